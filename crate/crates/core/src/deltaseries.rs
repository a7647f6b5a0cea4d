//! Singular `P` functions as series in derivatives of the delta
//! distribution, `Σ c_{q,r} ∂_α^q ∂_α*^r δ(α)`, and their pairing with
//! smooth test functions.
//!
//! Integration by parts gives
//! `∫ ∂_α^q ∂_α*^r δ · F = (−1)^{q+r} [∂_α^q ∂_α*^r F]_0`, and under the
//! Fourier convention of [`crate::numerics::fourier`] the transform of
//! `∂_α^q ∂_α*^r δ` is `(−1)^{q+r} (−β*)^q β^r`. The generator series
//! `exp(γ ∂_α ∂_α*) δ` therefore has characteristic function
//! `exp(−γ |β|²)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfn::ordered_sum;
use crate::numerics::special::{laguerre, ln_factorial};
use crate::numerics::{quad2d, Domain, PhasePoint, WirtingerPoly};
use crate::states::FockMatrix;
use crate::{Error, Result, Warning};

/// Closed-form tag for `exp(γ ∂_α ∂_α*) δ`, i.e. `c_{n,n} = γⁿ/n!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub gamma: f64,
}

/// Formal series `Σ c_{q,r} ∂_α^q ∂_α*^r δ(α)`.
///
/// Generator series keep no coefficient table; coefficients are produced
/// on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSeries {
    coeffs: BTreeMap<(u32, u32), Complex64>,
    order: u32,
    generator: Option<Generator>,
    warnings: Vec<Warning>,
}

impl DeltaSeries {
    /// `δ(α)` itself.
    pub fn delta() -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert((0, 0), Complex64::new(1.0, 0.0));
        Self {
            coeffs,
            order: 0,
            generator: None,
            warnings: Vec::new(),
        }
    }

    pub fn from_coeffs(coeffs: BTreeMap<(u32, u32), Complex64>, order: u32) -> Self {
        let coeffs = coeffs.into_iter().filter(|(k, v)| k.0 <= order && k.1 <= order && v.norm() > 0.0).collect();
        Self {
            coeffs,
            order,
            generator: None,
            warnings: Vec::new(),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn generator(&self) -> Option<Generator> {
        self.generator
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn coeff(&self, q: u32, r: u32) -> Complex64 {
        match self.generator {
            Some(g) if q == r && q <= self.order => Complex64::new(generator_coeff(g.gamma, q), 0.0),
            Some(_) => Complex64::new(0.0, 0.0),
            None => self.coeffs.get(&(q, r)).copied().unwrap_or_default(),
        }
    }

    /// Non-zero coefficients up to the order, materialized.
    pub fn coeffs(&self) -> Vec<((u32, u32), Complex64)> {
        match self.generator {
            Some(g) => (0..=self.order)
                .map(|n| ((n, n), Complex64::new(generator_coeff(g.gamma, n), 0.0)))
                .filter(|(_, v)| v.norm() > 0.0)
                .collect(),
            None => self.coeffs.iter().map(|(k, v)| (*k, *v)).collect(),
        }
    }

    /// Largest `|c_{q,r} − c_{r,q}*|`.
    pub fn reality_defect(&self) -> f64 {
        self.coeffs()
            .iter()
            .map(|&((q, r), c)| (c - self.coeff(r, q).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Characteristic function `Σ c_{q,r} (−1)^{q+r} (−β*)^q β^r`.
    pub fn phi(&self, beta: Complex64) -> Complex64 {
        if let Some(g) = self.generator {
            return Complex64::new((-g.gamma * beta.norm_sqr()).exp(), 0.0);
        }
        let terms = self
            .coeffs
            .iter()
            .map(|(&(q, r), c)| {
                let sign = if (q + r) % 2 == 0 { 1.0 } else { -1.0 };
                c * sign * (-beta.conj()).powu(q) * beta.powu(r)
            })
            .collect();
        ordered_sum(terms)
    }
}

fn generator_coeff(gamma: f64, n: u32) -> f64 {
    if gamma == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let sign = if gamma < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * (n as f64 * gamma.abs().ln() - ln_factorial(n as u64)).exp()
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    generator: Option<Generator>,
    coeffs: Vec<(u32, u32, f64, f64)>,
    order: u32,
}

impl Serialize for DeltaSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = if self.generator.is_some() {
            Vec::new()
        } else {
            self.coeffs.iter().map(|(&(q, r), c)| (q, r, c.re, c.im)).collect()
        };
        RawSeries {
            generator: self.generator,
            coeffs,
            order: self.order,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeltaSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSeries::deserialize(d)?;
        if let Some(g) = raw.generator {
            return Ok(exp_laplace_series(g.gamma, raw.order));
        }
        let coeffs = raw.coeffs.iter().map(|&(q, r, re, im)| ((q, r), Complex64::new(re, im))).collect();
        Ok(DeltaSeries::from_coeffs(coeffs, raw.order))
    }
}

/// `exp(γ ∂_α ∂_α*) δ` up to `order`: `γ = n̄` is the thermal state,
/// `γ = −1/2` the maximally singular distribution.
pub fn exp_laplace_series(gamma: f64, order: u32) -> DeltaSeries {
    DeltaSeries {
        coeffs: BTreeMap::new(),
        order,
        generator: Some(Generator { gamma }),
        warnings: Vec::new(),
    }
}

/// Delta series of a density matrix:
/// `c_{q,r} = (−1)^{q+r}/(q! r!) Σ_k ρ_{q+k,r+k} sqrt((q+k)! (r+k)!)/k!`.
///
/// The k-sum stops at the matrix cutoff; when its estimated tail exceeds
/// 1e-8 for a retained coefficient, a truncation warning is attached.
pub fn series_from_fock(fock: &FockMatrix, order_cutoff: u32) -> Result<DeltaSeries> {
    let cutoff = fock.cutoff() as u32;
    if order_cutoff > cutoff {
        return Err(Error::Parameter(format!("series order {order_cutoff} exceeds the Fock cutoff {cutoff}")));
    }
    let mut coeffs = BTreeMap::new();
    let mut worst_tail = fock.truncation_loss();
    for q in 0..=order_cutoff {
        for r in 0..=order_cutoff {
            let mut terms = Vec::new();
            let top = cutoff - q.max(r);
            for k in 0..=top {
                let rho = fock.get((q + k) as usize, (r + k) as usize);
                if rho == Complex64::new(0.0, 0.0) {
                    terms.push(Complex64::new(0.0, 0.0));
                    continue;
                }
                let ln = 0.5 * (ln_factorial((q + k) as u64) + ln_factorial((r + k) as u64))
                    - ln_factorial(k as u64)
                    - ln_factorial(q as u64)
                    - ln_factorial(r as u64);
                terms.push(rho * ln.exp());
            }
            if terms.len() >= 2 && fock.truncation_loss() > 0.0 {
                let last = terms[terms.len() - 1].norm();
                let prev = terms[terms.len() - 2].norm();
                let tail = if prev > 0.0 && last < prev {
                    let ratio = last / prev;
                    last * ratio / (1.0 - ratio)
                } else if last > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                worst_tail = worst_tail.max(tail);
            }
            let sign = if (q + r) % 2 == 0 { 1.0 } else { -1.0 };
            let c = ordered_sum(terms) * sign;
            if c.norm() > 0.0 {
                coeffs.insert((q, r), c);
            }
        }
    }
    let mut series = DeltaSeries::from_coeffs(coeffs, order_cutoff);
    if worst_tail > 1e-8 {
        series.warnings.push(Warning::Truncation {
            what: format!("delta series from a Fock matrix at cutoff {cutoff}"),
            loss: worst_tail,
        });
    }
    Ok(series)
}

#[derive(Clone)]
enum Data {
    /// `F = scale · exp(c |α|²)`: `a_{n,n} = scale · cⁿ n!`.
    ExpAbs2 { c: f64, scale: f64 },
    /// `F = exp(−|α|²) |α|^{2k} / k!`.
    FockWeight { k: u32 },
    Sparse(BTreeMap<(u32, u32), Complex64>),
}

/// Smooth test function given by its derivatives at the origin,
/// `a_{m,n} = [∂_α^m ∂_α*^n F]_0`.
#[derive(Clone)]
pub struct TaylorField {
    data: Data,
    max_order: u32,
    eval: Option<Arc<dyn Fn(PhasePoint) -> Complex64 + Send + Sync>>,
}

impl std::fmt::Debug for TaylorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.data {
            Data::ExpAbs2 { c, scale } => format!("{scale}·exp({c}|α|²)"),
            Data::FockWeight { k } => format!("fock_weight({k})"),
            Data::Sparse(m) => format!("sparse({} terms)", m.len()),
        };
        f.debug_struct("TaylorField").field("data", &kind).field("max_order", &self.max_order).finish()
    }
}

/// Default derivative order available from closed-form test functions.
pub const TAYLOR_ORDER: u32 = 4000;

impl TaylorField {
    /// `exp(c |α|²)`.
    pub fn exp_abs2(c: f64) -> Self {
        Self {
            data: Data::ExpAbs2 { c, scale: 1.0 },
            max_order: TAYLOR_ORDER,
            eval: Some(Arc::new(move |a: PhasePoint| Complex64::new((c * a.norm_sqr()).exp(), 0.0))),
        }
    }

    /// `exp(−|α|²/σ²)`.
    pub fn gaussian(sigma2: f64) -> Self {
        Self::exp_abs2(-1.0 / sigma2)
    }

    pub fn constant(v: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert((0, 0), Complex64::new(v, 0.0));
        Self {
            data: Data::Sparse(m),
            max_order: TAYLOR_ORDER,
            eval: Some(Arc::new(move |_| Complex64::new(v, 0.0))),
        }
    }

    /// `F_k(α) = exp(−|α|²) |α|^{2k} / k!`, whose pairing with `P` is the
    /// Fock population `<k|ρ|k>`.
    pub fn fock_weight(k: u32) -> Self {
        let lnk = ln_factorial(k as u64);
        Self {
            data: Data::FockWeight { k },
            max_order: TAYLOR_ORDER,
            eval: Some(Arc::new(move |a: PhasePoint| {
                let r2 = a.norm_sqr();
                let v = if r2 == 0.0 {
                    if k == 0 { 1.0 } else { 0.0 }
                } else {
                    (-r2 + k as f64 * r2.ln() - lnk).exp()
                };
                Complex64::new(v, 0.0)
            })),
        }
    }

    /// `α^m α*^n`.
    pub fn monomial(m: u32, n: u32) -> Self {
        Self::from_poly(&WirtingerPoly::monomial(m, n, Complex64::new(1.0, 0.0)))
    }

    pub fn from_poly(p: &WirtingerPoly) -> Self {
        let map = p.terms().map(|((m, n), _)| ((m, n), p.derivative_at_origin(m, n))).collect();
        let poly = p.clone();
        Self {
            data: Data::Sparse(map),
            max_order: TAYLOR_ORDER,
            eval: Some(Arc::new(move |a| poly.eval(a))),
        }
    }

    /// Raw derivative table known up to `max_order` in each index.
    pub fn from_derivatives(a: BTreeMap<(u32, u32), Complex64>, max_order: u32) -> Self {
        Self {
            data: Data::Sparse(a),
            max_order,
            eval: None,
        }
    }

    /// `self + eps · other` on derivative data (closed forms are dropped
    /// unless both exist).
    pub fn plus(&self, eps: f64, other: &TaylorField) -> Self {
        let order = self.max_order.min(other.max_order).min(400);
        let mut map = BTreeMap::new();
        for m in 0..=order {
            for n in 0..=order {
                let v = self.coeff(m, n) + eps * other.coeff(m, n);
                if v.norm() > 0.0 && v.is_finite() {
                    map.insert((m, n), v);
                }
            }
        }
        let eval = match (&self.eval, &other.eval) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |a| f(a) + eps * g(a)) as Arc<dyn Fn(PhasePoint) -> Complex64 + Send + Sync>)
            }
            _ => None,
        };
        Self {
            data: Data::Sparse(map),
            max_order: order,
            eval,
        }
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn eval(&self, a: PhasePoint) -> Option<Complex64> {
        self.eval.as_ref().map(|f| f(a))
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.data {
            Data::ExpAbs2 { .. } | Data::FockWeight { .. } => true,
            Data::Sparse(m) => m.keys().all(|(a, b)| a == b),
        }
    }

    /// `ln |a_{m,n}|` and the unit phase of `a_{m,n}`; `None` when zero.
    pub fn log_coeff(&self, m: u32, n: u32) -> Option<(f64, Complex64)> {
        match &self.data {
            Data::ExpAbs2 { c, scale } => {
                if m != n || *scale == 0.0 || (*c == 0.0 && n > 0) {
                    return None;
                }
                let ln = scale.abs().ln() + if n > 0 { n as f64 * c.abs().ln() } else { 0.0 } + ln_factorial(n as u64);
                let neg = (*scale < 0.0) ^ (*c < 0.0 && n % 2 == 1);
                Some((ln, Complex64::new(if neg { -1.0 } else { 1.0 }, 0.0)))
            }
            Data::FockWeight { k } => {
                if m != n || n < *k {
                    return None;
                }
                let ln = 2.0 * ln_factorial(n as u64) - ln_factorial((n - k) as u64) - ln_factorial(*k as u64);
                let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                Some((ln, Complex64::new(sign, 0.0)))
            }
            Data::Sparse(map) => {
                let v = *map.get(&(m, n))?;
                (v.norm() > 0.0).then(|| (v.norm().ln(), v / v.norm()))
            }
        }
    }

    /// `a_{m,n}`; overflows to infinity for very high orders.
    pub fn coeff(&self, m: u32, n: u32) -> Complex64 {
        if let Data::Sparse(map) = &self.data {
            return map.get(&(m, n)).copied().unwrap_or_default();
        }
        match self.log_coeff(m, n) {
            Some((ln, phase)) => phase * ln.exp(),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Pairing value with its convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pairing {
    pub value: Complex64,
    /// Number of series terms summed.
    pub terms: u32,
    /// `|last term| / |partial sum|`.
    pub last_to_sum: f64,
    /// Largest ratio of consecutive terms over the final window.
    pub ratio: f64,
}

const RATIO_LIMIT: f64 = 0.95;
const RATIO_WINDOW: usize = 10;

/// `∫ P F d²α` for `P` given as a delta series:
/// `Σ c_{q,r} (−1)^{q+r} a_{q,r}`.
///
/// Generator series sum `Σ γⁿ/n! a_{n,n}` in the log domain until the terms
/// drop below 1e-17 of the partial sum, or up to the series order. The sum
/// is accepted only if the last ten consecutive-term ratios stay below
/// 0.95.
pub fn pair(series: &DeltaSeries, f: &TaylorField) -> Result<Pairing> {
    let Some(g) = series.generator else {
        if series.order > f.max_order {
            return Err(Error::Parameter(format!(
                "test function known to order {}, series needs {}",
                f.max_order, series.order
            )));
        }
        let terms: Vec<Complex64> = series
            .coeffs
            .iter()
            .map(|(&(q, r), c)| {
                let sign = if (q + r) % 2 == 0 { 1.0 } else { -1.0 };
                c * sign * f.coeff(q, r)
            })
            .collect();
        let value = ordered_sum(terms.clone());
        let last = terms.last().map_or(0.0, |t| t.norm());
        return Ok(Pairing {
            value,
            terms: terms.len() as u32,
            last_to_sum: if value.norm() > 0.0 { last / value.norm() } else { 0.0 },
            ratio: 0.0,
        });
    };
    let gamma = g.gamma;
    let top = series.order.min(f.max_order);
    if gamma == 0.0 {
        return Ok(Pairing {
            value: f.coeff(0, 0),
            terms: 1,
            last_to_sum: 0.0,
            ratio: 0.0,
        });
    }
    let mut terms: Vec<Complex64> = Vec::new();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut converged = false;
    let mut seen_nonzero = false;
    for n in 0..=top {
        let t = match f.log_coeff(n, n) {
            Some((ln, phase)) => {
                let ln_t = n as f64 * gamma.abs().ln() - ln_factorial(n as u64) + ln;
                let sign = if gamma < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                if ln_t > 700.0 {
                    return Err(Error::Divergence(format!("term {n} of the pairing overflows (ln = {ln_t:.1})")));
                }
                phase * sign * ln_t.exp()
            }
            None => Complex64::new(0.0, 0.0),
        };
        seen_nonzero |= t.norm() > 0.0;
        terms.push(t);
        sum += t;
        if seen_nonzero && terms.len() > RATIO_WINDOW + 1 && t.norm() <= 1e-17 * sum.norm() {
            converged = true;
            break;
        }
    }
    // ratio test over the final window of non-zero terms
    let nz: Vec<f64> = terms.iter().map(|t| t.norm()).filter(|v| *v > 0.0).collect();
    let window = &nz[nz.len().saturating_sub(RATIO_WINDOW + 1)..];
    let ratio = window.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if nz.len() <= RATIO_WINDOW && !converged && nz.len() > 1 {
        return Err(Error::Divergence("too few non-zero terms for the ratio test".into()));
    }
    if ratio >= RATIO_LIMIT {
        return Err(Error::Divergence(format!("consecutive-term ratio {ratio:.3} at order {}", terms.len() - 1)));
    }
    let value = ordered_sum(terms.clone());
    let last = nz.last().copied().unwrap_or(0.0);
    Ok(Pairing {
        value,
        terms: terms.len() as u32,
        last_to_sum: if value.norm() > 0.0 { last / value.norm() } else { 0.0 },
        ratio,
    })
}

/// One row of [`FockDiagonalReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockDiagonalEntry {
    pub k: u32,
    /// `<k|μ|k>` from pairing with `F_k`.
    pub pairing: f64,
    /// `(1/π) ∫ Φ(β) exp(−|β|²) L_k(|β|²) d²β`, computed for `k <= 3`.
    pub fourier: Option<f64>,
    /// `2(−1)^k / 3^{k+1}`, a closed form in circulation for the
    /// maximally singular case; compared, never asserted.
    pub candidate: f64,
    pub routes_agree: Option<bool>,
    pub matches_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockDiagonalReport {
    pub gamma: f64,
    pub entries: Vec<FockDiagonalEntry>,
    /// True when some entry disagrees with the candidate closed form.
    pub candidate_discrepancy: bool,
}

/// Route agreement tolerance for [`fock_diagonal`].
pub const ROUTE_TOLERANCE: f64 = 1e-6;

/// Fock diagonal `<k|μ|k>` of the operator whose `P` is a generator
/// series, by pairing with `F_k` and, for `k <= 3`, by an independent
/// Fourier-side quadrature.
pub fn fock_diagonal(series: &DeltaSeries, k_max: u32) -> Result<FockDiagonalReport> {
    let g = series
        .generator
        .ok_or_else(|| Error::Unsupported("Fock diagonal of a non-generator series".into()))?;
    if g.gamma.abs() >= 1.0 {
        return Err(Error::Divergence(format!("|gamma| = {} >= 1", g.gamma.abs())));
    }
    let mut entries = Vec::new();
    for k in 0..=k_max {
        let pairing = pair(series, &TaylorField::fock_weight(k))?.value.re;
        let fourier = if k <= 3 { Some(fourier_fock_diagonal(g.gamma, k)?) } else { None };
        let candidate = 2.0 * if k % 2 == 0 { 1.0 } else { -1.0 } / 3f64.powi(k as i32 + 1);
        entries.push(FockDiagonalEntry {
            k,
            pairing,
            fourier,
            candidate,
            routes_agree: fourier.map(|f| (f - pairing).abs() <= ROUTE_TOLERANCE),
            matches_candidate: (pairing - candidate).abs() <= ROUTE_TOLERANCE,
        });
    }
    let candidate_discrepancy = entries.iter().any(|e| !e.matches_candidate);
    Ok(FockDiagonalReport {
        gamma: g.gamma,
        entries,
        candidate_discrepancy,
    })
}

fn fourier_fock_diagonal(gamma: f64, k: u32) -> Result<f64> {
    let est = quad2d(
        |b| {
            let r2 = b.norm_sqr();
            Complex64::new((-(gamma + 1.0) * r2).exp() * laguerre(k as usize, 0.0, r2) / PI, 0.0)
        },
        Domain::Radial {
            center: PhasePoint::ORIGIN,
            r_max: None,
        },
        1e-10,
    )?;
    Ok(est.value.re)
}

/// Regular Gaussian `(1/(πγ)) exp(−|α|²/γ)` equal in distribution to
/// `exp(γ ∂_α ∂_α*) δ` for `γ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularGaussian {
    pub gamma: f64,
}

impl RegularGaussian {
    pub fn eval(&self, a: PhasePoint) -> f64 {
        (-a.norm_sqr() / self.gamma).exp() / (PI * self.gamma)
    }
}

/// `s`-ordered counterpart of a generator series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct STransform {
    pub series: DeltaSeries,
    /// Present when the new generator is positive.
    pub regular: Option<RegularGaussian>,
}

/// Moves a generator series from normal to `s` ordering:
/// `γ' = γ + (1 − s)/2`.
pub fn s_transform(series: &DeltaSeries, s: f64) -> Result<STransform> {
    let g = series
        .generator
        .ok_or_else(|| Error::Unsupported("s-transform of a non-generator series".into()))?;
    let gamma = g.gamma + (1.0 - s) / 2.0;
    Ok(STransform {
        series: exp_laplace_series(gamma, series.order),
        regular: (gamma > 0.0).then_some(RegularGaussian { gamma }),
    })
}

/// Behaviour of `exp(γ ∂_α ∂_α*)` as a map, read off its Fourier
/// multiplier `exp(−γ |β|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorClass {
    Identity,
    /// Multiplier below one; the series equals a regular Gaussian.
    Contractive { regular_dual: bool },
    /// Multiplier above one; the distribution is genuinely singular.
    Expansive,
}

pub fn classify_generator(gamma: f64) -> GeneratorClass {
    if gamma == 0.0 {
        GeneratorClass::Identity
    } else if gamma > 0.0 {
        GeneratorClass::Contractive { regular_dual: true }
    } else {
        GeneratorClass::Expansive
    }
}
