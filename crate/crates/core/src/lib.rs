pub mod backstepping;
pub mod checks;
pub mod controller;
pub mod error;
pub mod funnel;
pub mod jet;
pub mod plant;
pub mod quadrature;
pub mod presets;
pub mod scalar;
pub mod sim;

pub use backstepping::{BacksteppingController, BacksteppingGains, RecursionTrace};
pub use controller::{AdaptationGain, ControlOutput, Controller, Estimates, LyapunovOracle};
pub use error::{Error, Result};
pub use funnel::{FunnelTransform, NormalizedFunction, PerformanceFunction, Strategy};
pub use plant::{ParameterSignal, Plant, RegressorBank};
pub use scalar::{ScalarController, ScalarGains};
pub use sim::{simulate, simulate_batch, SimJob, FunnelPolicy, Integrator, SimConfig, SimError, SimFailure, TrajectoryLog};
