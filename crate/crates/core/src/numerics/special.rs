//! Special functions not covered by `statrs`.

use num_complex::Complex64;

use super::quad::integrate_to_infinity;
use crate::Result;

pub use statrs::function::factorial::ln_factorial;
pub use statrs::function::gamma::{gamma, ln_gamma};

/// Generalized Laguerre polynomial `L_n^{(a)}(x)` by the three-term recurrence.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut l0 = 1.0;
    if n == 0 {
        return l0;
    }
    let mut l1 = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Modified Bessel function `K_nu(x)` for `x > 0` from
/// `K_nu(x) = ∫_0^∞ exp(-x cosh u) cosh(nu u) du`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let est = integrate_to_infinity(
        |u| {
            let v = (-x * u.cosh() + nu * u).exp() + (-x * u.cosh() - nu * u).exp();
            Complex64::new(0.5 * v, 0.0)
        },
        0.0,
        1e-300,
        1e-14,
    )?;
    Ok(est.value.re)
}

/// `ln |binomial(n, k)|`-style helper: `ln(n! / (k! (n-k)!))`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}
