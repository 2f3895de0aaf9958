//! Rational approximation of phase coefficients and the arithmetic
//! factorization of major-scale operators.

mod dirichlet;
mod factor;
mod schedule;

pub use dirichlet::{
    classify_index, dirichlet_approx, dirichlet_exhaustive, dyadic_separation_check, level_scale, separation_verdict,
    DirichletApprox, IndexClass, SeparationVerdict,
};
pub use factor::{
    build_factorization, error_kernel_norms, factorization_residual, product_apply, shifted_ball_ratio, DilatedKernel,
    FactorizationData, FactorizationOptions, GaussOperator, ResidualReport, TNaturalOperator,
};
pub use schedule::{
    build_schedule, default_eps, level_part, shifted_phase, Branch, CoefficientApprox, Leaf, LevelCollection, LevelNode,
    MinorBucket, RadiusRule, Schedule, ScheduleConfig,
};
