//! The phase-space Fourier transform.
//!
//! With `α = x + i p` and `β = u + i v`,
//!
//! ```text
//! Φ(β) = ∫ dx dp P(α) exp(β α* − β* α) = ∫ dx dp P(x, p) exp(2i (v x − u p))
//! P(α) = (1/π²) ∫ du dv Φ(β) exp(β* α − β α*)
//! ```
//!
//! This is the only place the sign convention is written down; every other
//! module calls [`fourier_kernel`] or the transforms below.
//!
//! The inverse kernel is the forward kernel with the roles of `α` and `β`
//! exchanged, so both directions share one implementation. Grid-to-grid
//! transforms factor into two 1-D passes (the kernel is a product of an
//! `x`-phase and a `p`-phase), costing `O(N³)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{PhaseField, PhaseGrid, PhasePoint, Side};
use crate::{Error, Result};

/// `exp(β α* − β* α)`.
pub fn fourier_kernel(alpha: PhasePoint, beta: PhasePoint) -> Complex64 {
    Complex64::cis(2.0 * (beta.p * alpha.x - beta.x * alpha.p))
}

/// Forward transform at a single `β`. The field is sampled on `grid`.
pub fn fourier_forward_at(field: &PhaseField, grid: &PhaseGrid, beta: PhasePoint, tolerance: f64) -> Result<Complex64> {
    expect_side(field, Side::Alpha)?;
    let values = field.samples_on(grid)?;
    check_boundary(grid, &values, tolerance)?;
    check_nyquist(grid, beta.x.abs().max(beta.p.abs()))?;
    Ok(point_transform(grid, &values, beta))
}

/// Inverse transform at a single `α`. The field is sampled on `grid`.
pub fn fourier_inverse_at(field: &PhaseField, grid: &PhaseGrid, alpha: PhasePoint, tolerance: f64) -> Result<Complex64> {
    expect_side(field, Side::Beta)?;
    let values = field.samples_on(grid)?;
    check_boundary(grid, &values, tolerance)?;
    check_nyquist(grid, alpha.x.abs().max(alpha.p.abs()))?;
    Ok(point_transform(grid, &values, alpha) / (PI * PI))
}

/// Forward transform of an `α`-field, evaluated on the nodes of `target`.
///
/// The source samples are the field's own grid if it was sampled, otherwise
/// the closed form sampled on `target`.
pub fn fourier_forward(field: &PhaseField, target: &PhaseGrid, tolerance: f64) -> Result<PhaseField> {
    expect_side(field, Side::Alpha)?;
    let (grid, values) = source(field, target)?;
    let out = grid_transform(&grid, &values, target, tolerance)?;
    PhaseField::sampled(Side::Beta, *target, out)
}

/// Inverse transform of a `β`-field, evaluated on the nodes of `target`.
pub fn fourier_inverse(field: &PhaseField, target: &PhaseGrid, tolerance: f64) -> Result<PhaseField> {
    expect_side(field, Side::Beta)?;
    let (grid, values) = source(field, target)?;
    let mut out = grid_transform(&grid, &values, target, tolerance)?;
    let scale = 1.0 / (PI * PI);
    out.iter_mut().for_each(|z| *z *= scale);
    PhaseField::sampled(Side::Alpha, *target, out)
}

fn source(field: &PhaseField, target: &PhaseGrid) -> Result<(PhaseGrid, std::sync::Arc<[Complex64]>)> {
    match field.grid() {
        Some(g) => Ok((*g, field.samples_on(g)?)),
        None => Ok((*target, field.samples_on(target)?)),
    }
}

fn expect_side(field: &PhaseField, side: Side) -> Result<()> {
    if field.side() != side {
        return Err(Error::Parameter(format!("expected a {side:?}-side field, got {:?}", field.side())));
    }
    Ok(())
}

fn check_boundary(grid: &PhaseGrid, values: &[Complex64], tolerance: f64) -> Result<()> {
    let boundary = (0..grid.len())
        .filter(|&k| grid.is_boundary(k))
        .fold(0.0f64, |m, k| m.max(values[k].norm()));
    if boundary > tolerance {
        return Err(Error::Truncation { boundary, tolerance });
    }
    Ok(())
}

fn check_nyquist(grid: &PhaseGrid, frequency: f64) -> Result<()> {
    let nyquist = grid.nyquist();
    if frequency > nyquist {
        return Err(Error::Resolution { frequency, nyquist });
    }
    Ok(())
}

// Σ f(s_i, s_j) exp(2i (t_p s_i − t_x s_j)) with trapezoid weights.
fn point_transform(grid: &PhaseGrid, values: &[Complex64], to: PhasePoint) -> Complex64 {
    let n = grid.resolution();
    let p_phase: Vec<Complex64> = (0..n)
        .map(|j| Complex64::cis(-2.0 * to.x * grid.coord(j)) * grid.weight(j))
        .collect();
    (0..n)
        .map(|i| {
            let row: Complex64 = (0..n).map(|j| values[i * n + j] * p_phase[j]).sum();
            row * Complex64::cis(2.0 * to.p * grid.coord(i)) * grid.weight(i)
        })
        .sum()
}

fn grid_transform(grid: &PhaseGrid, values: &[Complex64], target: &PhaseGrid, tolerance: f64) -> Result<Vec<Complex64>> {
    check_boundary(grid, values, tolerance)?;
    check_nyquist(grid, target.extent())?;
    let n = grid.resolution();
    let m = target.resolution();
    // phase tables: e_p[a][j] for the p-sum, e_x[b][i] for the x-sum
    let e_p: Vec<Complex64> = (0..m)
        .flat_map(|a| (0..n).map(move |j| (a, j)))
        .map(|(a, j)| Complex64::cis(-2.0 * target.coord(a) * grid.coord(j)) * grid.weight(j))
        .collect();
    let e_x: Vec<Complex64> = (0..m)
        .flat_map(|b| (0..n).map(move |i| (b, i)))
        .map(|(b, i)| Complex64::cis(2.0 * target.coord(b) * grid.coord(i)) * grid.weight(i))
        .collect();
    // g[a][i] = Σ_j f[i][j] e_p[a][j]
    let g: Vec<Complex64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let row = &e_p[a * n..(a + 1) * n];
            (0..n).map(move |i| {
                let f = &values[i * n..(i + 1) * n];
                f.iter().zip(row).map(|(f, e)| f * e).sum::<Complex64>()
            })
        })
        .collect();
    // out[a][b] = Σ_i g[a][i] e_x[b][i]; a indexes u (the output x-axis)
    let out: Vec<Complex64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let g = &g[a * n..(a + 1) * n];
            let e_x = &e_x;
            (0..m).map(move |b| {
                let row = &e_x[b * n..(b + 1) * n];
                g.iter().zip(row).map(|(g, e)| g * e).sum::<Complex64>()
            })
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss() -> PhaseField {
        PhaseField::closed(Side::Alpha, |pt| Complex64::new((-pt.norm_sqr()).exp(), 0.0))
    }

    #[test]
    fn kernel_matches_complex_form() {
        let a = PhasePoint::new(0.3, -0.8);
        let b = PhasePoint::new(-1.1, 0.45);
        let (ac, bc) = (a.to_complex(), b.to_complex());
        let direct = (bc * ac.conj() - bc.conj() * ac).exp();
        assert!((fourier_kernel(a, b) - direct).norm() < 1e-15);
    }

    #[test]
    fn gaussian_forward_against_quadrature() {
        use crate::numerics::{quad2d, Domain};
        let grid = PhaseGrid::default();
        let f = gauss();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let beta = PhasePoint::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
            let got = fourier_forward_at(&f, &grid, beta, 1e-12).unwrap();
            let oracle = quad2d(
                |pt| Complex64::new((-pt.norm_sqr()).exp(), 0.0) * fourier_kernel(pt, beta),
                Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
                1e-11,
            )
            .unwrap();
            let closed = PI * (-beta.norm_sqr()).exp();
            assert!((got - oracle.value).norm() < 1e-8, "{beta:?}");
            assert!((got.re - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn thermal_inverse_is_regular_gaussian() {
        let nbar = 0.5;
        let phi = PhaseField::closed(Side::Beta, move |b| Complex64::new((-nbar * b.norm_sqr()).exp(), 0.0));
        let src = PhaseGrid::new(8.0, 257).unwrap();
        let sampled = phi.sample(&src).unwrap();
        let target = PhaseGrid::new(2.0, 21).unwrap();
        let p = fourier_inverse(&sampled, &target, 1e-12).unwrap();
        for (k, z) in p.values().unwrap().iter().enumerate() {
            let a = target.point_at(k);
            let want = (-a.norm_sqr() / nbar).exp() / (PI * nbar);
            assert!((z - want).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_shifted_gaussian() {
        let f = PhaseField::closed(Side::Alpha, |pt| {
            let a = pt.to_complex();
            (-a.norm_sqr() + 0.3 * a - 0.3 * a.conj()).exp()
        });
        let grid = PhaseGrid::default();
        let fwd = fourier_forward(&f, &grid, 1e-12).unwrap();
        let back = fourier_inverse(&fwd, &grid, 1e-12).unwrap();
        let orig = f.sample(&grid).unwrap();
        let err = back
            .values()
            .unwrap()
            .iter()
            .zip(orig.values().unwrap())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-8, "round trip error {err}");
    }

    #[test]
    fn errors_on_truncation_and_aliasing() {
        let wide = PhaseField::closed(Side::Alpha, |pt| Complex64::new((-pt.norm_sqr() / 10.0).exp(), 0.0));
        let grid = PhaseGrid::new(3.0, 31).unwrap();
        assert!(matches!(fourier_forward_at(&wide, &grid, PhasePoint::ORIGIN, 1e-10), Err(Error::Truncation { .. })));
        let far = PhasePoint::new(grid.nyquist() * 1.01, 0.0);
        assert!(matches!(fourier_forward_at(&gauss(), &PhaseGrid::new(8.0, 31).unwrap(), far, 1e-10), Err(Error::Resolution { .. })));
        assert!(fourier_forward(&gauss(), &PhaseGrid::new(6.0, 11).unwrap(), 1e-10).is_err());
    }

    #[test]
    fn parseval_pairing() {
        // ∫ P F d²α = (1/π²) ∫ Φ(β) F̃(β)* d²β for real F
        let nbar = 0.5;
        let sigma2 = 1.0;
        let p = move |a: PhasePoint| (-a.norm_sqr() / nbar).exp() / (PI * nbar);
        let f = move |a: PhasePoint| (-a.norm_sqr() / sigma2).exp();
        let grid = PhaseGrid::new(7.0, 257).unwrap();
        let direct: f64 = grid.points().enumerate().map(|(k, a)| {
            let n = grid.resolution();
            p(a) * f(a) * grid.weight(k / n) * grid.weight(k % n)
        }).sum();
        let phi = fourier_forward(&PhaseField::closed(Side::Alpha, move |a| Complex64::new(p(a), 0.0)), &grid, 1e-12).unwrap();
        let ft = fourier_forward(&PhaseField::closed(Side::Alpha, move |a| Complex64::new(f(a), 0.0)), &grid, 1e-12).unwrap();
        let n = grid.resolution();
        let dual: Complex64 = phi.values().unwrap().iter().zip(ft.values().unwrap()).enumerate()
            .map(|(k, (a, b))| a * b.conj() * grid.weight(k / n) * grid.weight(k % n))
            .sum::<Complex64>() / (PI * PI);
        assert!((direct - dual.re).abs() < 1e-6 && dual.im.abs() < 1e-6);
        assert!((direct - sigma2 / (sigma2 + nbar)).abs() < 1e-10);
    }
}
