//! Rate function for correlated price and variance: the action functional,
//! analytic bounds, the perfect-correlation reduction and a direct numerical
//! minimizer.

pub mod bounds;
pub mod correlated;
pub mod functional;
pub mod numeric;

pub use bounds::{rate_bounds_rho, BoundsResult};
pub use correlated::{
    f_map_rho, rate_corr_path, rate_perfect_corr, rate_upper_corr_path, CorrPathOptions,
};
pub use functional::{constraint_value, euler_lagrange_residual, lambda_functional, LambdaValue};
pub use numeric::{rate_numeric, NumericOptions};
