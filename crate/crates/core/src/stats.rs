//! Normal and Student-t helpers.

use libm::erfc;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 - Phi(z)`, evaluated without cancellation in the tail.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `2 (1 - Phi(|z|))`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Upper `q` quantile of Student's t with `dof` degrees of freedom, i.e. the
/// `t` with `P(T > t) = q`.
pub fn t_upper_quantile(q: f64, dof: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    dist.inverse_cdf(1.0 - q)
}
