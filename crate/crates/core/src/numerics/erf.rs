//! Complex error function.
//!
//! Branches:
//! - `|Re z| < ERF_SERIES_STRIP`: Maclaurin series. Inside the strip the
//!   terms grow at most like `exp(|z|^2)` while `|erf z|` is at least of
//!   order `exp(Im(z)^2 - Re(z)^2)`, so cancellation costs at most
//!   `exp(2 Re(z)^2) < e^8` in relative accuracy.
//! - otherwise: Laplace continued fraction for `erfc` on the right
//!   half-plane (modified Lentz), extended to the left by oddness.
//!
//! Arguments with `|z| > ERF_STABLE_RANGE` are rejected because
//! `exp(|z|^2)` overflows a double shortly beyond it.

use num_complex::Complex64;

use crate::{Error, Result};

pub const ERF_SERIES_STRIP: f64 = 2.0;
pub const ERF_STABLE_RANGE: f64 = 26.0;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;
const MAX_TERMS: usize = 5000;

/// `erf(z)` for `|z| <= ERF_STABLE_RANGE`.
pub fn erf_cplx(z: Complex64) -> Result<Complex64> {
    check_range(z)?;
    if z.re.abs() < ERF_SERIES_STRIP {
        Ok(erf_series(z))
    } else if z.re > 0.0 {
        Ok(1.0 - erfc_right(z))
    } else {
        Ok(erfc_right(-z) - 1.0)
    }
}

/// `erfc(z) = 1 - erf(z)`, accurate on the right half-plane where it is small.
pub fn erfc_cplx(z: Complex64) -> Result<Complex64> {
    check_range(z)?;
    if z.re.abs() < ERF_SERIES_STRIP {
        Ok(1.0 - erf_series(z))
    } else if z.re > 0.0 {
        Ok(erfc_right(z))
    } else {
        Ok(2.0 - erfc_right(-z))
    }
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-i z)`.
///
/// Defined on the whole plane without a range limit for `Im z >= 0`; the
/// lower half-plane uses `w(z) = 2 exp(-z^2) - w(-z)` and overflows
/// like `exp(Im(z)^2)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    let zeta = Complex64::new(z.im, -z.re); // -i z
    if z.norm() >= 8.0 || z.im >= 2.0 {
        1.0 / (SQRT_PI * laplace_cf(zeta))
    } else {
        (zeta * zeta).exp() * (1.0 - erf_series(zeta))
    }
}

fn check_range(z: Complex64) -> Result<()> {
    let modulus = z.norm();
    if modulus.is_nan() || modulus > ERF_STABLE_RANGE {
        return Err(Error::Range {
            modulus,
            limit: ERF_STABLE_RANGE,
        });
    }
    Ok(())
}

pub(crate) fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut power = z;
    let mut sum = z;
    for n in 1..MAX_TERMS {
        power *= -z2 / n as f64;
        let term = power / (2 * n + 1) as f64;
        sum += term;
        if n > 3 && term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

// erfc(z) for Re z > 0, from the continued fraction
// sqrt(pi) exp(z^2) erfc(z) = 1 / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))).
fn erfc_right(z: Complex64) -> Complex64 {
    (-z * z).exp() / (SQRT_PI * laplace_cf(z))
}

fn laplace_cf(z: Complex64) -> Complex64 {
    const TINY: f64 = 1e-300;
    let tiny = Complex64::new(TINY, 0.0);
    let mut f = if z == Complex64::new(0.0, 0.0) { tiny } else { z };
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..MAX_TERMS {
        let a = k as f64 / 2.0;
        d = z + a * d;
        if d.norm_sqr() == 0.0 {
            d = tiny;
        }
        c = z + a / c;
        if c.norm_sqr() == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    f
}
