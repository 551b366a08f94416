//! Forward-mode differentiation: nested first-order jets, seed bookkeeping
//! and a small expression language evaluated over any [`Real`].

mod dual;
mod expr;
mod lift;
mod real;

pub use dual::Jet;
pub use expr::{Expr, Func, Interval};
pub use lift::{
    evaluate_with_gradient, Lift, Saturated, Seed, SeedRegistry, J1, J2, J3, J4, J5, J6,
    MAX_NESTING,
};
pub use real::{dot, horner, norm_sq, sign, Real};
