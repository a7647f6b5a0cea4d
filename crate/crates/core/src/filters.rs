//! Filtered quasiprobabilities `P_Ω(α; w) = (1/π²) ∫ Φ(β) Ω̃(β; w) e^{β*α − βα*} d²β`.
//!
//! The built-in filter is the normalized autocorrelation of a unit box,
//! `Ω̃(β; w) = tri(Re β / w) tri(Im β / w)`, supported on `[−w, w]²`. Its
//! α-side kernel is `(w²/π²) sinc²(w Re α) sinc²(w Im α) >= 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charfn::phi;
use crate::numerics::quad::{gauss_legendre_on, integrate_real};
use crate::numerics::{erf_cplx, faddeeva, PhaseField, PhaseGrid, PhasePoint, Side};
use crate::states::{State, StateKind};
use crate::{Error, Result};

/// Triangle function: `1 − |x|` on `[−1, 1]`, zero outside.
pub fn tri(x: f64) -> f64 {
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else if x < 0.0 {
        1.0 + x
    } else {
        1.0 - x
    }
}

/// `Ω̃(β; w) = tri(Re β / w) tri(Im β / w)`.
pub fn autocorrelate_box(beta: Complex64, w: f64) -> f64 {
    tri(beta.re / w) * tri(beta.im / w)
}

fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.sin() / z
    }
}

/// `(w²/π²) sinc²(w Re α) sinc²(w Im α)`.
pub fn omega_sinc(alpha: PhasePoint, w: f64) -> f64 {
    let a = sinc(w * alpha.x);
    let b = sinc(w * alpha.p);
    w * w / (PI * PI) * a * a * b * b
}

/// Shape of the filter before autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaSpec {
    /// Indicator of the unit square centred at the origin.
    Box,
}

/// Regularizing filter of width `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterKernel {
    pub w: f64,
    pub omega: OmegaSpec,
}

impl FilterKernel {
    pub fn box_filter(w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Parameter(format!("filter width must be positive, got {w}")));
        }
        Ok(Self { w, omega: OmegaSpec::Box })
    }

    /// `Ω̃(β; w)`, normalized to 1 at the origin.
    pub fn omega_tilde(&self, beta: Complex64) -> f64 {
        match self.omega {
            OmegaSpec::Box => autocorrelate_box(beta, self.w),
        }
    }

    /// `Ω(α; w)`, the inverse transform of `Ω̃`.
    pub fn omega_alpha(&self, alpha: PhasePoint) -> f64 {
        match self.omega {
            OmegaSpec::Box => omega_sinc(alpha, self.w),
        }
    }

    /// Half-width of the square carrying `Ω̃`, if compact.
    pub fn support(&self) -> Option<f64> {
        match self.omega {
            OmegaSpec::Box => Some(self.w),
        }
    }
}

/// Below this `|g|` the closed form of [`t_function`] loses more than a few
/// digits to cancellation and a Taylor expansion in `g` is used instead.
pub const T_SERIES_THRESHOLD: f64 = 1e-2;

/// `T(y; g) = (2/π) Re ∫_0^1 exp(−g z² + 2i y z) (1 − z) dz`.
///
/// For `g ≠ 0` the closed form
/// `(2/π) Re[(e^{−g+2iy} − 1)/(2g) + (g − iy)/(g√g) (√π/2) e^{−y²/g}(erf ζ₁ − erf ζ₀)]`,
/// `ζ₀ = −iy/√g`, `ζ₁ = √g − iy/√g`, is evaluated with the Faddeeva
/// function: `e^{−y²/g}(erf ζ₁ − erf ζ₀) = w(iζ₀) − e^{−g+2iy} w(iζ₁)`,
/// with the branch of `√g` chosen so both arguments lie in the upper
/// half-plane.
pub fn t_function(y: f64, g: f64) -> f64 {
    let y = y.abs();
    if g == 0.0 {
        if y == 0.0 {
            return 1.0 / PI;
        }
        let s = y.sin() / y;
        return s * s / PI;
    }
    if g.abs() < T_SERIES_THRESHOLD {
        return t_series(y, g);
    }
    if y == 0.0 {
        return t_at_zero(g);
    }
    let i = Complex64::new(0.0, 1.0);
    let (sqrt_g, z0, z1) = if g > 0.0 {
        let s = g.sqrt();
        (Complex64::new(s, 0.0), Complex64::new(y / s, 0.0), Complex64::new(y / s, s))
    } else {
        let s = (-g).sqrt();
        (Complex64::new(0.0, -s), Complex64::new(0.0, y / s), Complex64::new(s, y / s))
    };
    let e = Complex64::new(-g, 2.0 * y).exp();
    let bracket = faddeeva(z0) - e * faddeeva(z1);
    let v = (e - 1.0) / (2.0 * g) + (g - i * y) / (g * sqrt_g) * (PI.sqrt() / 2.0) * bracket;
    2.0 / PI * v.re
}

// T(0; g) = erf(√g)/√(πg) + (e^{−g} − 1)/(πg), real for either sign of g.
fn t_at_zero(g: f64) -> f64 {
    let sqrt_g = Complex64::new(g, 0.0).sqrt();
    let erf_part = match erf_cplx(sqrt_g) {
        Ok(e) => (e / (PI.sqrt() * sqrt_g)).re,
        // beyond the erf range, erf(√g) -> 1 for g > 0
        Err(_) if g > 0.0 => 1.0 / (PI * g).sqrt(),
        Err(_) => f64::INFINITY,
    };
    erf_part + ((-g).exp() - 1.0) / (PI * g)
}

// Σ_{k<6} (−g)^k/k! (2/π) Re J_{2k}(y), J_m = ∫_0^1 z^m (1 − z) e^{2iyz} dz.
fn t_series(y: f64, g: f64) -> f64 {
    let panels = (y.abs() / 2.0).ceil().max(1.0) as usize;
    let mut j = [0.0f64; 6];
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        let (xs, ws) = gauss_legendre_on(24, a, b);
        for (z, wt) in xs.iter().zip(&ws) {
            let base = wt * (1.0 - z) * (2.0 * y * z).cos();
            let z2 = z * z;
            let mut zp = 1.0;
            for jk in j.iter_mut() {
                *jk += base * zp;
                zp *= z2;
            }
        }
    }
    let mut sum = 0.0;
    let mut coef = 1.0;
    for (k, jk) in j.iter().enumerate() {
        if k > 0 {
            coef *= -g / k as f64;
        }
        sum += coef * jk;
    }
    2.0 / PI * sum
}

/// Gaussian characteristic function `Φ(β) = exp(−λ (Re β)² − κ (Im β)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCF {
    pub lambda: f64,
    pub kappa: f64,
}

impl GaussianCF {
    pub fn vacuum() -> Self {
        Self { lambda: 0.0, kappa: 0.0 }
    }

    pub fn thermal(nbar: f64) -> Self {
        Self { lambda: nbar, kappa: nbar }
    }

    pub fn p_max() -> Self {
        Self { lambda: -0.5, kappa: -0.5 }
    }

    pub fn squeezed(xi: f64) -> Self {
        Self {
            lambda: ((2.0 * xi).exp() - 1.0) / 2.0,
            kappa: -(1.0 - (-2.0 * xi).exp()) / 2.0,
        }
    }

    /// The Gaussian form of an unmodified catalog state, if it has one.
    pub fn of_state(state: &State) -> Option<Self> {
        let spec = state.spec()?;
        if spec.rotation != 0.0 || spec.displacement != PhasePoint::ORIGIN {
            return None;
        }
        match spec.kind {
            StateKind::Vacuum => Some(Self::vacuum()),
            StateKind::Thermal { nbar } => Some(Self::thermal(nbar)),
            StateKind::PMax => Some(Self::p_max()),
            StateKind::Squeezed { xi } => Some(Self::squeezed(xi)),
            _ => None,
        }
    }

    pub fn eval(&self, beta: Complex64) -> f64 {
        (-self.lambda * beta.re * beta.re - self.kappa * beta.im * beta.im).exp()
    }
}

/// `P_Ω(α; w) = w² T(w Im α; w² λ) T(−w Re α; w² κ)` for the box filter.
pub fn filtered_p_gaussian(cf: GaussianCF, w: f64, alpha: PhasePoint) -> f64 {
    w * w * t_function(w * alpha.p, w * w * cf.lambda) * t_function(-w * alpha.x, w * w * cf.kappa)
}

/// `∫ T(y; g) dy` over the real line: quadrature up to `Y = kπ` plus the
/// leading asymptotic tail `2 · 1/(2πY)`.
pub fn t_integral(g: f64) -> Result<f64> {
    const PERIODS: usize = 3000;
    let mut total = 0.0;
    for k in 0..PERIODS {
        let a = k as f64 * PI;
        let (v, _) = integrate_real(|y| t_function(y, g), a, a + PI, 1e-13, 1e-12)?;
        total += v;
    }
    let y_max = PERIODS as f64 * PI;
    // (2/π) ∫_Y^∞ [1/(4y²) + g/(8y⁴)] dy, the non-oscillating terms
    let tail = (1.0 / (2.0 * PI * y_max)) + (2.0 / PI) * g / (24.0 * y_max.powi(3));
    Ok(2.0 * (total + tail))
}

/// `∫ P_Ω d²α` for a Gaussian characteristic function, as the product of
/// the two one-dimensional integrals of `T`.
pub fn filtered_mass_gaussian(cf: GaussianCF, w: f64) -> Result<f64> {
    Ok(t_integral(w * w * cf.lambda)? * t_integral(w * w * cf.kappa)?)
}

/// Per-axis Gauss-Legendre nodes of the β-side quadrature, split at the
/// kinks of `tri`.
pub const NODES_PER_HALF_AXIS: usize = 200;

/// Filtered `P` with the largest imaginary part seen (a quadrature
/// residue; the exact result is real).
#[derive(Debug, Clone)]
pub struct FilteredP {
    pub field: PhaseField,
    pub residue: f64,
}

/// `P_Ω` on a grid by direct quadrature over the support of `Ω̃`.
pub fn filtered_p_numeric(state: &State, kernel: &FilterKernel, grid: &PhaseGrid) -> Result<FilteredP> {
    let coords = grid.coords();
    let values = filtered_on_tensor(state, kernel, &coords, &coords)?;
    let residue = values.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    Ok(FilteredP {
        field: PhaseField::sampled(Side::Alpha, *grid, values)?,
        residue,
    })
}

/// Which 1-D section of the phase plane to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cut {
    /// Vary `Re α` at `Im α = 0`.
    Re,
    /// Vary `Im α` at `Re α = 0`.
    Im,
}

impl Cut {
    pub fn point(self, t: f64) -> PhasePoint {
        match self {
            Cut::Re => PhasePoint::new(t, 0.0),
            Cut::Im => PhasePoint::new(0.0, t),
        }
    }
}

/// `P_Ω` along a cut; returns `(values, residue)`.
pub fn filtered_p_numeric_cut(state: &State, kernel: &FilterKernel, cut: Cut, ts: &[f64]) -> Result<(Vec<f64>, f64)> {
    let zero = [0.0];
    let values = match cut {
        Cut::Re => filtered_on_tensor(state, kernel, ts, &zero)?,
        Cut::Im => filtered_on_tensor(state, kernel, &zero, ts)?,
    };
    let residue = values.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    Ok((values.iter().map(|z| z.re).collect(), residue))
}

// P(x_i, p_j) = (1/π²) Σ_{a,b} W_a W_b Φ(u_a + i v_b) Ω̃ exp(2i(u_a p_j − v_b x_i)),
// row-major over (x_i, p_j).
fn filtered_on_tensor(state: &State, kernel: &FilterKernel, xs: &[f64], ps: &[f64]) -> Result<Vec<Complex64>> {
    let half = kernel.support().ok_or(Error::Support)?;
    let (mut nodes, mut weights) = gauss_legendre_on(NODES_PER_HALF_AXIS, -half, 0.0);
    let (n2, w2) = gauss_legendre_on(NODES_PER_HALF_AXIS, 0.0, half);
    nodes.extend(n2);
    weights.extend(w2);
    let m = nodes.len();
    // integrand on the β nodes, indexed [a * m + b] for (u_a, v_b)
    let integrand: Result<Vec<Complex64>> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let beta = Complex64::new(nodes[k / m], nodes[k % m]);
            let om = kernel.omega_tilde(beta);
            if om == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(phi(state, beta)? * (om * weights[k / m] * weights[k % m]))
        })
        .collect();
    let integrand = integrand?;
    // g[a][i] = Σ_b f[a][b] exp(−2i v_b x_i)
    let nx = xs.len();
    let g: Vec<Complex64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let row = &integrand[a * m..(a + 1) * m];
            let nodes = &nodes;
            xs.iter().map(move |&x| row.iter().zip(nodes).map(|(f, v)| f * Complex64::cis(-2.0 * v * x)).sum::<Complex64>())
        })
        .collect();
    let scale = 1.0 / (PI * PI);
    let out: Vec<Complex64> = (0..nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let g = &g;
            let nodes = &nodes;
            ps.iter().map(move |&p| {
                (0..m).map(|a| g[a * nx + i] * Complex64::cis(2.0 * nodes[a] * p)).sum::<Complex64>() * scale
            })
        })
        .collect();
    Ok(out)
}
