//! Quadrature: adaptive Gauss-Kronrod in one dimension, Gauss-Legendre
//! node generation, and the 2-D integrator used as an oracle across the
//! crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{PhaseGrid, PhasePoint};
use crate::{Error, Result};

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl Estimate {
    pub fn re(&self) -> f64 {
        self.value.re
    }
}

// Kronrod 21-point abscissae and weights, with the embedded 10-point Gauss
// weights (abscissae at odd indices).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_438,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const MAX_INTERVALS: usize = 2000;

fn gk21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).norm();
    (value, error)
}

/// Adaptive Gauss-Kronrod integral of a complex integrand over `[a, b]`.
///
/// Subdivides the interval with the largest error until the summed error
/// falls below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let (v, e) = gk21(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > abs_tol.max(rel_tol * total.norm()) {
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence {
                value: total.re,
                error: total_err,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk21(&mut f, lo, mid);
        let (v2, e2) = gk21(&mut f, mid, hi);
        total += v1 + v2 - v0;
        total_err += e1 + e2 - e0;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
        if total_err < 0.0 {
            total_err = pieces.iter().map(|p| p.3).sum();
        }
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = pieces.iter().map(|p| p.2).sum();
    Ok(Estimate { value, error: total_err })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let est = integrate(|x| Complex64::new(f(x), 0.0), a, b, abs_tol, rel_tol)?;
    Ok((est.value.re, est.error))
}

/// Integral over `[a, inf)` through `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let jac = 1.0 / (s * s);
            let v = f(a + t / s);
            if jac.is_finite() && v.is_finite() {
                v * jac
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

/// Integration domain for [`quad2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Tensor trapezoid rule on the grid nodes. The error estimate compares
    /// against the rule on every other node, so the resolution must be odd.
    Grid(PhaseGrid),
    /// Polar coordinates about `center`, `r` up to `r_max` or to infinity.
    Radial { center: PhasePoint, r_max: Option<f64> },
}

/// 2-D integral `∫ dx dp f(x + i p)` on a domain.
///
/// Fails with [`Error::NonConvergence`] when the error estimate exceeds
/// `tolerance`.
pub fn quad2d<F>(f: F, domain: Domain, tolerance: f64) -> Result<Estimate>
where
    F: Fn(PhasePoint) -> Complex64 + Sync,
{
    let est = match domain {
        Domain::Grid(grid) => grid_trapezoid(&f, &grid)?,
        Domain::Radial { center, r_max } => radial(&f, center, r_max, tolerance)?,
    };
    if est.error.is_nan() || est.error > tolerance || !est.value.is_finite() {
        return Err(Error::NonConvergence {
            value: est.value.re,
            error: est.error,
        });
    }
    Ok(est)
}

fn grid_trapezoid<F>(f: &F, grid: &PhaseGrid) -> Result<Estimate>
where
    F: Fn(PhasePoint) -> Complex64 + Sync,
{
    use rayon::prelude::*;
    let n = grid.resolution();
    if n.is_multiple_of(2) || n < 5 {
        return Err(Error::Parameter(format!("grid quadrature needs an odd resolution >= 5, got {n}")));
    }
    let coarse_w = |i: usize| {
        if i % 2 == 1 {
            0.0
        } else if i == 0 || i == n - 1 {
            grid.spacing()
        } else {
            2.0 * grid.spacing()
        }
    };
    let rows: Vec<(Complex64, Complex64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut fine = Complex64::new(0.0, 0.0);
            let mut coarse = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let v = f(grid.point(i, j));
                fine += v * grid.weight(j);
                coarse += v * coarse_w(j);
            }
            (fine * grid.weight(i), coarse * coarse_w(i))
        })
        .collect();
    let (fine, coarse) = rows
        .iter()
        .fold((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)), |acc, r| (acc.0 + r.0, acc.1 + r.1));
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).norm(),
    })
}

fn radial<F>(f: &F, center: PhasePoint, r_max: Option<f64>, tolerance: f64) -> Result<Estimate>
where
    F: Fn(PhasePoint) -> Complex64,
{
    let inner_tol = (tolerance * 1e-3).max(1e-15);
    let mut inner_err: f64 = 0.0;
    let mut ring = |r: f64| -> Complex64 {
        let (v, e) = angular(f, center, r, inner_tol);
        inner_err = inner_err.max(e * r);
        v * r
    };
    let rel = 1e-13;
    let est = match r_max {
        Some(r) => integrate(&mut ring, 0.0, r, tolerance * 0.1, rel)?,
        None => integrate_to_infinity(&mut ring, 0.0, tolerance * 0.1, rel)?,
    };
    Ok(Estimate {
        value: est.value,
        error: est.error + inner_err,
    })
}

// Periodic trapezoid in the angle, doubled until two successive values agree.
fn angular<F>(f: &F, center: PhasePoint, r: f64, tol: f64) -> (Complex64, f64)
where
    F: Fn(PhasePoint) -> Complex64,
{
    let at = |phi: f64| f(PhasePoint::new(center.x + r * phi.cos(), center.p + r * phi.sin()));
    let mut m = 16usize;
    let mut sum: Complex64 = (0..m).map(|k| at(2.0 * PI * k as f64 / m as f64)).sum();
    let mut value = sum * (2.0 * PI / m as f64);
    loop {
        let extra: Complex64 = (0..m).map(|k| at(2.0 * PI * (k as f64 + 0.5) / m as f64)).sum();
        sum += extra;
        m *= 2;
        let next = sum * (2.0 * PI / m as f64);
        let err = (next - value).norm();
        value = next;
        if err <= tol.max(1e-14 * value.norm()) || m >= 1 << 14 {
            return (value, err);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_over_plane() {
        let g = |pt: PhasePoint| Complex64::new((-pt.norm_sqr()).exp(), 0.0);
        let grid = PhaseGrid::new(7.0, 201).unwrap();
        let a = quad2d(g, Domain::Grid(grid), 1e-10).unwrap();
        assert!((a.value.re - PI).abs() < 1e-10);
        let b = quad2d(g, Domain::Radial { center: PhasePoint::ORIGIN, r_max: None }, 1e-10).unwrap();
        assert!((b.value.re - PI).abs() < 1e-10);
        assert!((a.value.re - PI).abs() <= a.error.max(1e-14));
    }

    #[test]
    fn half_width_gaussian() {
        let g = |pt: PhasePoint| Complex64::new((-pt.norm_sqr() / 2.0).exp(), 0.0);
        let b = quad2d(g, Domain::Radial { center: PhasePoint::ORIGIN, r_max: None }, 1e-10).unwrap();
        assert!((b.value.re - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        let (x, w) = gauss_legendre_on(200, 0.0, 3.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((s - (1.0 - 3f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_integral() {
        let (v, _) = integrate_real(|x| (-x).exp(), 0.0, 1.0, 1e-14, 1e-14).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        let v = integrate_to_infinity(|x| Complex64::new(1.0 / (1.0 + x * x), 0.0), 0.0, 1e-12, 1e-13).unwrap();
        assert!((v.value.re - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = |pt: PhasePoint| Complex64::new(1.0 / (1.0 + pt.norm_sqr()), 0.0);
        let r = quad2d(g, Domain::Radial { center: PhasePoint::ORIGIN, r_max: None }, 1e-8);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
