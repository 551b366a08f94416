//! Ready-made experiments: the second-order benchmark with three
//! controllers and the first-order demo.

use std::sync::Arc;

use crate::backstepping::{BacksteppingController, BacksteppingGains};
use crate::controller::{Controller, Estimates};
use crate::error::Result;
use crate::funnel::{FunnelTransform, NormalizedFunction, PerformanceFunction, Strategy};
use crate::plant::{scalar_demo_plant, showcase_plant, smooth_showcase_plant, Plant};
use crate::scalar::{ScalarController, ScalarGains};
use crate::sim::{simulate_batch, FunnelPolicy, SimConfig, SimFailure, SimJob, TrajectoryLog};

/// One controller of an experiment.
#[derive(Clone)]
pub struct Run {
    pub label: String,
    pub controller: Arc<dyn Controller>,
    pub cfg: SimConfig,
}

#[derive(Clone)]
pub struct Experiment {
    pub name: String,
    pub plant: Plant,
    pub x0: Vec<f64>,
    pub est0: Estimates,
    pub runs: Vec<Run>,
}

pub type RunResult = std::result::Result<TrajectoryLog, SimFailure>;

impl Experiment {
    /// Runs every controller in parallel; results follow `runs`.
    pub fn run(&self) -> Vec<RunResult> {
        let jobs: Vec<SimJob> = self
            .runs
            .iter()
            .map(|r| SimJob {
                plant: &self.plant,
                controller: r.controller.as_ref(),
                x0: self.x0.clone(),
                est0: self.est0.clone(),
                cfg: r.cfg,
            })
            .collect();
        simulate_batch(&jobs)
    }

    pub fn run_named(&self, label: &str) -> Option<RunResult> {
        let r = self.runs.iter().find(|r| r.label == label)?;
        Some(crate::sim::simulate(
            &self.plant,
            r.controller.as_ref(),
            &self.x0,
            &self.est0,
            &r.cfg,
        ))
    }
}

/// `k_1 = k_2 = gamma_rho = 0.1`, `delta = 1`, `Gamma = 0.1 I`.
pub fn benchmark_gains() -> BacksteppingGains {
    BacksteppingGains::uniform(2, 1, 0.1, 0.1, 0.1, 1.0).expect("valid gains")
}

/// `0.9 e^{-0.4 t} + 0.1`.
pub fn benchmark_beta() -> PerformanceFunction {
    PerformanceFunction::exponential(0.1, 0.4).expect("valid performance function")
}

/// `4 e^{-0.4 t} + 0.1`, for the tangent-barrier baseline.
pub fn tangent_beta() -> PerformanceFunction {
    PerformanceFunction::exponential_from(4.1, 0.1, 0.4).expect("valid performance function")
}

pub fn benchmark_transform(strategy: Strategy) -> FunnelTransform {
    let beta = match strategy {
        Strategy::Tangent => tangent_beta(),
        Strategy::Rational | Strategy::Identity => benchmark_beta(),
    };
    FunnelTransform::new(beta, NormalizedFunction::Algebraic, strategy).expect("valid transform")
}

pub fn benchmark_controller(plant: &Plant, strategy: Strategy) -> Result<BacksteppingController> {
    BacksteppingController::new(
        plant.bank().clone(),
        benchmark_transform(strategy),
        benchmark_gains(),
        plant.sign_b(),
    )
}

/// Labels of the benchmark runs, in order.
pub const BENCHMARK_RUNS: [(&str, Strategy); 3] = [
    ("identity", Strategy::Identity),
    ("tangent", Strategy::Tangent),
    ("rational", Strategy::Rational),
];

fn benchmark_experiment(name: &str, plant: Plant, sim: SimConfig) -> Experiment {
    let runs = BENCHMARK_RUNS
        .iter()
        .map(|&(label, strategy)| {
            let policy = if strategy == Strategy::Identity {
                FunnelPolicy::RecordAndContinue
            } else {
                FunnelPolicy::Abort
            };
            Run {
                label: label.to_string(),
                controller: Arc::new(benchmark_controller(&plant, strategy).expect("valid controller")),
                cfg: SimConfig {
                    funnel_policy: policy,
                    ..sim
                },
            }
        })
        .collect();
    Experiment {
        name: name.to_string(),
        plant,
        x0: vec![1.0, -1.0],
        est0: Estimates {
            theta_hat: vec![0.0],
            rho_hat: 0.25,
        },
        runs,
    }
}

/// Second-order benchmark: identity, tangent and rational controllers from
/// `x(0) = (1, -1)`, `theta_hat(0) = 0`, `rho_hat(0) = 0.25`.
pub fn paper_sim(sim: SimConfig) -> Experiment {
    benchmark_experiment("paper-sim", showcase_plant(), sim)
}

/// The benchmark with `sign` replaced by `tanh(sharpness s)`.
pub fn smooth_paper_sim(sharpness: f64, sim: SimConfig) -> Experiment {
    benchmark_experiment("paper-sim-smooth", smooth_showcase_plant(sharpness), sim)
}

/// Unit gains with `delta_theta` twice the radius of `theta`, enough for
/// `V` to decrease since `x/z <= 1` on the rational funnel.
pub fn scalar_demo_gains(plant: &Plant) -> ScalarGains {
    ScalarGains {
        k: 1.0,
        gamma_theta: 1.0,
        gamma_rho: 1.0,
        delta_theta: 2.0 * plant.theta_radius(),
    }
}

/// First-order demo with the rational funnel on `0.9 e^{-0.4 t} + 0.1`.
pub fn scalar_demo(sim: SimConfig) -> Experiment {
    let plant = scalar_demo_plant();
    let transform = FunnelTransform::new(benchmark_beta(), NormalizedFunction::Algebraic, Strategy::Rational)
        .expect("valid transform");
    let controller = ScalarController::new(transform, scalar_demo_gains(&plant), plant.sign_b())
        .expect("valid controller");
    Experiment {
        name: "scalar-demo".into(),
        x0: vec![0.5],
        est0: Estimates {
            theta_hat: vec![0.0],
            rho_hat: 0.5,
        },
        runs: vec![Run {
            label: "scalar".into(),
            controller: Arc::new(controller),
            cfg: sim,
        }],
        plant,
    }
}

pub fn preset(name: &str, sim: SimConfig) -> Option<Experiment> {
    match name {
        "paper-sim" => Some(paper_sim(sim)),
        "scalar-demo" => Some(scalar_demo(sim)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_wiring() {
        let e = paper_sim(SimConfig::default());
        let labels: Vec<&str> = e.runs.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["identity", "tangent", "rational"]);
        assert_eq!(e.runs[0].cfg.funnel_policy, FunnelPolicy::RecordAndContinue);
        assert_eq!(e.runs[2].cfg.funnel_policy, FunnelPolicy::Abort);
        assert_eq!(e.runs[1].controller.transform().funnel_bound(0.0), 4.1);
        assert!(e.runs[2].controller.transform().funnel_bound(0.0).is_infinite());
        assert!(preset("nope", SimConfig::default()).is_none());
    }

    #[test]
    fn short_runs_stay_in_funnel() {
        let sim = SimConfig {
            dt: 1e-3,
            t_final: 0.2,
            ..SimConfig::default()
        };
        for e in [paper_sim(sim), scalar_demo(sim)] {
            for (run, res) in e.runs.iter().zip(e.run()) {
                let log = res.unwrap_or_else(|f| panic!("{}: {f}", run.label));
                assert_eq!(log.rows.len(), 201);
                if run.controller.transform().constrains() {
                    assert_eq!(log.violations(), 0, "{}", run.label);
                }
            }
        }
    }

    #[test]
    fn scalar_demo_lyapunov_decreases() {
        let e = scalar_demo(SimConfig {
            t_final: 10.0,
            ..SimConfig::default()
        });
        let log = e.run_named("scalar").unwrap().unwrap();
        let v: Vec<f64> = log.rows.iter().map(|r| r.lyapunov).collect();
        assert!(crate::checks::max_relative_increase(&v) <= 1e-6);
        assert!(v[v.len() - 1] < v[0]);
    }
}
