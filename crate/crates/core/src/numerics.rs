//! Statistical building blocks shared by the designs.

pub mod beta;
pub mod binomial_ci;
pub mod isotonic;
pub mod mcmc;
pub mod quadrature;
pub mod skeleton;

pub use beta::BetaParams;
pub use binomial_ci::exact_binomial_ci;
pub use isotonic::{pava_2d, IsotonicSolver};
pub use mcmc::{rw_sampler, Chain};
pub use quadrature::GridPosterior;
pub use skeleton::{crm_skeleton, SkeletonSpec};

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
