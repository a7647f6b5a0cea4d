//! Nonclassicality criteria and the admissible test-function class.
//!
//! A finite battery can certify nonclassicality but never classicality, so
//! verdicts are either [`Verdict::NonclassicalCertified`],
//! [`Verdict::ConsistentWithClassical`] or [`Verdict::Inapplicable`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::charfn::{classicality_violation, classicality_violation_within, fock_band};
use crate::deltaseries::{exp_laplace_series, pair, TaylorField, TAYLOR_ORDER};
use crate::filters::{filtered_p_numeric, FilterKernel};
use crate::numerics::quad::{integrate_real, quad2d, Domain};
use crate::numerics::special::ln_factorial;
use crate::numerics::{PhaseField, PhaseGrid, PhasePoint};
use crate::states::{State, StateKind};
use crate::{Error, Result};

/// A certificate needs the witness to clear zero by more than this.
pub const CERTIFICATION_MARGIN: f64 = 1e-9;

/// Largest imaginary residue accepted by [`negativity_scan`].
pub const REALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonclassicalCertified,
    ConsistentWithClassical,
    Inapplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    CharacteristicFunction,
    VacuumProbability,
    MomentMatrix,
    FilteredNegativity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionEntry {
    pub criterion: Criterion,
    pub verdict: Verdict,
    pub value: Option<f64>,
    pub location: Option<PhasePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CriterionEntry {
    fn inapplicable(criterion: Criterion, note: impl Into<String>) -> Self {
        Self {
            criterion,
            verdict: Verdict::Inapplicable,
            value: None,
            location: None,
            note: Some(note.into()),
        }
    }

    fn decided(criterion: Criterion, certified: bool, value: f64, location: Option<PhasePoint>) -> Self {
        Self {
            criterion,
            verdict: if certified {
                Verdict::NonclassicalCertified
            } else {
                Verdict::ConsistentWithClassical
            },
            value: Some(value),
            location,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonclassicalityReport {
    pub state: String,
    pub verdict: Verdict,
    pub criteria: Vec<CriterionEntry>,
}

// (1/2π) ∫ P_reg(r e^{iφ}) dφ; one evaluation for centred states.
fn angular_mean(state: &State, r: f64) -> Result<f64> {
    let displaced = state.spec().is_some_and(|s| s.displacement != PhasePoint::ORIGIN);
    if !displaced {
        return state.regular_p(PhasePoint::new(r, 0.0));
    }
    const M: usize = 64;
    let mut sum = 0.0;
    for j in 0..M {
        let phi = 2.0 * PI * j as f64 / M as f64;
        sum += state.regular_p(PhasePoint::new(r * phi.cos(), r * phi.sin()))?;
    }
    Ok(sum / M as f64)
}

/// `⟨0|ρ|0⟩`: the regular `P` against `e^{−|α|²}` (plus any atom), else the
/// Fock matrix, else `(1/π) ∫ Φ(β) e^{−|β|²} d²β`.
pub fn vacuum_probability(state: &State) -> Result<f64> {
    if state.has_regular_p() {
        let mut total = 0.0;
        let mut prev = 0.0;
        for edge in [1.0, 3.0, 6.0, 10.0] {
            let mut err = None;
            let (v, _) = integrate_real(
                |r| match angular_mean(state, r) {
                    Ok(p) => 2.0 * PI * r * p * (-r * r).exp(),
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                prev,
                edge,
                1e-15,
                1e-13,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            total += v;
            prev = edge;
        }
        // displaced states reach further out
        let shift = state.spec().map_or(0.0, |s| s.displacement.norm());
        if shift > 0.0 {
            let (v, _) = integrate_real(
                |r| 2.0 * PI * r * angular_mean(state, r).unwrap_or(0.0) * (-r * r).exp(),
                prev,
                prev + 2.0 * shift + 10.0,
                1e-15,
                1e-13,
            )?;
            total += v;
        }
        return Ok(total + state.atom_weight());
    }
    match state.fock() {
        Ok(f) => Ok(f.get(0, 0).re),
        Err(Error::Unsupported(_)) => {
            let est = quad2d(
                |b| crate::charfn::phi(state, b.to_complex()).unwrap_or_default() * (-b.norm_sqr()).exp(),
                Domain::Radial {
                    center: PhasePoint::ORIGIN,
                    r_max: None,
                },
                1e-8,
            )?;
            Ok(est.re() / PI)
        }
        Err(e) => Err(e),
    }
}

/// A normally ordered moment, or the diagnosis that it diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    /// The radial integrand decays like `r^{−q}` with `q <= 1`.
    Diverged { tail_exponent: f64 },
}

impl Moment {
    pub fn value(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Diverged { .. } => None,
        }
    }
}

const MOMENT_RADIUS: f64 = 1e4;

/// `⟨:(a†a)^n:⟩ = ∫ P(α) |α|^{2n} d²α`.
///
/// Regular `P`: radial quadrature to `R = 10⁴`, then a power-law fit
/// `r^{−q}` of the radial integrand over the last decade. `q <= 1` means the
/// integral diverges; otherwise the fitted tail is added. Other states use
/// `Σ ρ_kk k!/(k−n)!` or, for `p_max`, the delta-series pairing.
pub fn normal_moment(state: &State, n: u32) -> Result<Moment> {
    if state.has_regular_p() {
        return radial_moment(state, n);
    }
    match state.fock() {
        Ok(f) => {
            let n = n as usize;
            let mut sum = 0.0;
            for (k, p) in f.diagonal().into_iter().enumerate().skip(n) {
                if p != 0.0 {
                    sum += p * (ln_factorial(k as u64) - ln_factorial((k - n) as u64)).exp();
                }
            }
            Ok(Moment::Finite(sum))
        }
        Err(Error::Unsupported(_)) if matches!(state.kind(), Some(StateKind::PMax)) => {
            let p = pair(&exp_laplace_series(-0.5, TAYLOR_ORDER), &TaylorField::monomial(n, n))?;
            Ok(Moment::Finite(p.value.re))
        }
        Err(e) => Err(e),
    }
}

fn radial_moment(state: &State, n: u32) -> Result<Moment> {
    let g = |r: f64| -> Result<f64> { Ok(2.0 * PI * r.powi(2 * n as i32 + 1) * angular_mean(state, r)?) };
    let r_max = MOMENT_RADIUS;
    let (g_hi, g_lo) = (g(r_max)?, g(r_max / 10.0)?);
    let q = if g_hi == 0.0 || g_lo == 0.0 {
        f64::INFINITY
    } else {
        -(g_hi.abs() / g_lo.abs()).log10()
    };
    if q <= 1.0 + 1e-3 {
        return Ok(Moment::Diverged { tail_exponent: q });
    }
    let mut total = 0.0;
    let mut prev = 0.0;
    let mut edge = 1.0;
    while prev < r_max {
        let mut err = None;
        let (v, _) = integrate_real(
            |r| {
                g(r).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
            },
            prev,
            edge,
            1e-14,
            1e-12,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        total += v;
        prev = edge;
        edge *= 10.0;
    }
    if q.is_finite() {
        total += g_hi * r_max / (q - 1.0);
    }
    if n == 0 {
        total += state.atom_weight();
    }
    Ok(Moment::Finite(total))
}

/// Minimal eigenvalue of `M_jk = ⟨:(a†a)^{j+k}:⟩`, `j, k <= order`. A
/// negative value certifies nonclassicality; a diverging moment makes the
/// test inapplicable.
pub fn moment_matrix_test(state: &State, order: usize) -> CriterionEntry {
    let mut moments = Vec::with_capacity(2 * order + 1);
    for m in 0..=2 * order as u32 {
        match normal_moment(state, m) {
            Ok(Moment::Finite(v)) => moments.push(v),
            Ok(Moment::Diverged { .. }) => {
                return CriterionEntry::inapplicable(Criterion::MomentMatrix, format!("normally ordered moment of order {m} diverges"))
            }
            Err(e) => return CriterionEntry::inapplicable(Criterion::MomentMatrix, e.to_string()),
        }
    }
    let min = min_eigenvalue(&moment_matrix(&moments, order));
    CriterionEntry::decided(Criterion::MomentMatrix, min < -CERTIFICATION_MARGIN, min, None)
}

/// Hankel matrix `M_jk = moments[j + k]`.
pub fn moment_matrix(moments: &[f64], order: usize) -> DMatrix<f64> {
    DMatrix::from_fn(order + 1, order + 1, |j, k| moments[j + k])
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Minimum of a real field and its node.
pub fn negativity_scan(field: &PhaseField) -> Result<(f64, PhasePoint)> {
    let residue = field
        .imaginary_residue()
        .ok_or_else(|| Error::Unsupported("negativity scan needs a sampled field".into()))?;
    if residue > REALITY_TOLERANCE {
        return Err(Error::ComplexResidue { residue });
    }
    Ok(field.min_real().expect("sampled"))
}

/// Growth constants of a test-function class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionClass {
    pub c: f64,
    pub m: f64,
    pub max_checked_order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// First `(n, m)` violating the bound, scanning by total order, then `n`.
    pub first_failure: Option<(u32, u32)>,
}

// Scan all (n, m) with n, m <= order by total order; `bound_ln` gives ln of
// the admissible magnitude, `None` for zero.
fn check_bound(f: &TaylorField, order: u32, bound_ln: impl Fn(u32, u32) -> Option<f64>) -> Admissibility {
    for total in 0..=2 * order {
        for n in total.saturating_sub(order)..=total.min(order) {
            let m = total - n;
            let Some((ln, _)) = f.log_coeff(n, m) else { continue };
            let ok = match bound_ln(n, m) {
                Some(b) => ln <= b + 1e-12 * b.abs().max(1.0),
                None => false,
            };
            if !ok {
                return Admissibility {
                    admissible: false,
                    first_failure: Some((n, m)),
                };
            }
        }
    }
    Admissibility {
        admissible: true,
        first_failure: None,
    }
}

/// Checks `|a_{n,m}| <= (√2 C)^{n+m} √(n! m!)` for `n, m <= order`.
pub fn admissible_check(f: &TaylorField, c: f64, order: u32) -> Admissibility {
    let k = 2f64.sqrt() * c;
    check_bound(f, order, |n, m| {
        let total = n + m;
        let base = if total == 0 {
            0.0
        } else if k == 0.0 {
            return None;
        } else {
            total as f64 * k.ln()
        };
        Some(base + 0.5 * (ln_factorial(n as u64) + ln_factorial(m as u64)))
    })
}

/// Checks the analyticity bound `|a_{n,m}| <= M C^{n+m} n! m!`.
pub fn analytic_bound_check(f: &TaylorField, m_const: f64, c: f64, order: u32) -> Admissibility {
    check_bound(f, order, |n, m| {
        if m_const <= 0.0 {
            return None;
        }
        let total = n + m;
        let base = if total == 0 {
            0.0
        } else if c == 0.0 {
            return None;
        } else {
            total as f64 * c.ln()
        };
        Some(m_const.ln() + base + ln_factorial(n as u64) + ln_factorial(m as u64))
    })
}

/// `1/(1 − C²)`, bounding `|⟨:F:⟩|` under the maximally singular state for
/// every admissible `F` with constant `C`.
pub fn pmax_pairing_bound(c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::Parameter(format!("growth constant must lie in [0, 1), got {c}")));
    }
    Ok(1.0 / (1.0 - c * c))
}

/// Root-test estimates `c_k^{1/k}`, `c_k = Σ_{n<=k} (√2C)^k / √((k−n)! n!)`.
pub fn radius_estimate(c: f64, orders: &[u32]) -> Vec<f64> {
    orders
        .iter()
        .map(|&k| {
            if c == 0.0 {
                return 0.0;
            }
            if k == 0 {
                return 1.0;
            }
            let terms: Vec<f64> = (0..=k)
                .map(|n| -0.5 * (ln_factorial((k - n) as u64) + ln_factorial(n as u64)))
                .collect();
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
            ((k as f64 * (2f64.sqrt() * c).ln() + lse) / k as f64).exp()
        })
        .collect()
}

/// `2C [(l−1)!]^{−1/(2l)}`, which dominates [`radius_estimate`] at order `l`.
pub fn radius_bound(c: f64, l: u32) -> f64 {
    2.0 * c * (-ln_factorial(l.saturating_sub(1) as u64) / (2.0 * l as f64)).exp()
}

/// Partial sums of `M Σ_n n! (C²/2)^n`, kept in the log domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceDemo {
    pub ln_partial_sums: Vec<f64>,
}

impl DivergenceDemo {
    /// `S_N`, saturating to infinity.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.ln_partial_sums.iter().map(|l| l.exp()).collect()
    }

    /// Ratio of consecutive terms, `(n + 1) C²/2`.
    pub fn term_ratio(c: f64, n: u32) -> f64 {
        (n + 1) as f64 * c * c / 2.0
    }

    /// First `n` with `S_n > threshold`.
    pub fn first_exceeding(&self, threshold: f64) -> Option<usize> {
        let t = threshold.ln();
        self.ln_partial_sums.iter().position(|&l| l > t)
    }
}

pub fn analytic_divergence_demo(c: f64, m_const: f64, n_max: u32) -> Result<DivergenceDemo> {
    if !(c >= 0.0 && m_const > 0.0) {
        return Err(Error::Parameter(format!("need C >= 0 and M > 0, got C = {c}, M = {m_const}")));
    }
    let ln_m = m_const.ln();
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut acc = f64::NEG_INFINITY;
    for n in 0..=n_max {
        let term = if n == 0 {
            ln_m
        } else if c == 0.0 {
            f64::NEG_INFINITY
        } else {
            ln_m + ln_factorial(n as u64) + n as f64 * (c * c / 2.0).ln()
        };
        let (hi, lo) = if acc > term { (acc, term) } else { (term, acc) };
        acc = if lo == f64::NEG_INFINITY { hi } else { hi + (lo - hi).exp().ln_1p() };
        out.push(acc);
    }
    Ok(DivergenceDemo { ln_partial_sums: out })
}

/// Settings of the [`classify`] battery.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub w: f64,
    pub filter_grid: PhaseGrid,
    pub phi_grid: PhaseGrid,
    pub moment_order: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            w: 2.0,
            filter_grid: PhaseGrid::new(4.0, 321).expect("valid grid"),
            phi_grid: PhaseGrid::new(4.0, 81).expect("valid grid"),
            moment_order: 2,
        }
    }
}

fn phi_criterion(state: &State, grid: &PhaseGrid) -> CriterionEntry {
    let scan = if state.phi_closed(Complex64::new(0.0, 0.0)).is_some() {
        classicality_violation(state, grid)
    } else {
        match state.fock() {
            Ok(f) if f.truncation_loss() > 0.0 => classicality_violation_within(state, grid, fock_band(f.cutoff())),
            Ok(_) => classicality_violation(state, grid),
            Err(e) => Err(e),
        }
    };
    match scan {
        Ok(s) => CriterionEntry::decided(Criterion::CharacteristicFunction, s.value > CERTIFICATION_MARGIN, s.value + 1.0, Some(s.location)),
        Err(e) => CriterionEntry::inapplicable(Criterion::CharacteristicFunction, e.to_string()),
    }
}

fn vacuum_criterion(state: &State) -> CriterionEntry {
    if !state.is_physical() {
        return CriterionEntry::inapplicable(Criterion::VacuumProbability, "not a density operator");
    }
    match vacuum_probability(state) {
        Ok(v) => CriterionEntry::decided(Criterion::VacuumProbability, v <= CERTIFICATION_MARGIN, v, Some(PhasePoint::ORIGIN)),
        Err(e) => CriterionEntry::inapplicable(Criterion::VacuumProbability, e.to_string()),
    }
}

fn negativity_criterion(state: &State, opts: &ClassifyOptions) -> CriterionEntry {
    let run = || -> Result<(f64, PhasePoint)> {
        let kernel = FilterKernel::box_filter(opts.w)?;
        let f = filtered_p_numeric(state, &kernel, &opts.filter_grid)?;
        negativity_scan(&f.field)
    };
    match run() {
        Ok((v, at)) => CriterionEntry::decided(Criterion::FilteredNegativity, v < -CERTIFICATION_MARGIN, v, Some(at)),
        Err(e) => CriterionEntry::inapplicable(Criterion::FilteredNegativity, e.to_string()),
    }
}

/// Runs the four criteria in a fixed order. One certificate makes the
/// state nonclassical; otherwise it is only consistent with classical.
pub fn classify(state: &State) -> NonclassicalityReport {
    classify_with(state, &ClassifyOptions::default())
}

pub fn classify_with(state: &State, opts: &ClassifyOptions) -> NonclassicalityReport {
    let (phi_entry, (vac, (mom, neg))) = rayon::join(
        || phi_criterion(state, &opts.phi_grid),
        || {
            rayon::join(
                || vacuum_criterion(state),
                || rayon::join(|| moment_matrix_test(state, opts.moment_order), || negativity_criterion(state, opts)),
            )
        },
    );
    let criteria = vec![phi_entry, vac, mom, neg];
    let verdict = if criteria.iter().any(|c| c.verdict == Verdict::NonclassicalCertified) {
        Verdict::NonclassicalCertified
    } else {
        Verdict::ConsistentWithClassical
    };
    NonclassicalityReport {
        state: state.name(),
        verdict,
        criteria,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_state, StateSpec};
    use phasespace_oracles::{lorentz_moment, simpson_to_infinity};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn st(spec: StateSpec) -> State {
        make_state(spec).unwrap()
    }

    #[test]
    fn vacuum_probabilities() {
        assert!((vacuum_probability(&st(StateSpec::thermal(0.5))).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!(vacuum_probability(&st(StateSpec::cauchy_lorentz_ncl(3.0))).unwrap().abs() < 1e-9);
        assert!(vacuum_probability(&st(StateSpec::spats(1.0))).unwrap().abs() < 1e-8);
        assert!((vacuum_probability(&st(StateSpec::vacuum())).unwrap() - 1.0).abs() < 1e-14);
        assert!((vacuum_probability(&st(StateSpec::p_max())).unwrap() - 2.0).abs() < 1e-6);
        let coherent = st(StateSpec::vacuum().displaced(PhasePoint::new(1.0, 0.5)));
        assert!((vacuum_probability(&coherent).unwrap() - (-1.25f64).exp()).abs() < 1e-10);
        let thermal_shift = st(StateSpec::thermal(0.5).displaced(PhasePoint::new(1.0, 0.0)));
        let expect = (2.0 / 3.0) * (-1.0f64 / 1.5).exp();
        assert!((vacuum_probability(&thermal_shift).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn spats_vacuum_by_independent_quadrature() {
        let nbar = 1.0;
        let f = |r: f64| 2.0 * r * ((nbar + 1.0) * r * r - nbar) * (-r * r / nbar).exp() * (-r * r).exp() / nbar.powi(3);
        let v = simpson_to_infinity(&f, 1e-12);
        assert!(v.abs() < 1e-8);
    }

    #[test]
    fn lorentz_moments() {
        let m = normal_moment(&st(StateSpec::cauchy_lorentz(3.0)), 1).unwrap();
        assert!((m.value().unwrap() - 0.5).abs() < 1e-6);
        assert!((m.value().unwrap() - lorentz_moment(3.0, 1)).abs() < 1e-6);
        assert!(matches!(normal_moment(&st(StateSpec::cauchy_lorentz(1.0)), 1).unwrap(), Moment::Diverged { .. }));
    }

    #[test]
    fn moment_divergence_threshold() {
        for t in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let s = st(StateSpec::cauchy_lorentz(t));
            for n in 0..=2u32 {
                let m = normal_moment(&s, n).unwrap();
                if t > n as f64 {
                    let v = m.value().unwrap_or_else(|| panic!("t {t} n {n} diverged"));
                    assert!((v - lorentz_moment(t, n)).abs() < 1e-6, "t {t} n {n}: {v}");
                } else {
                    assert!(m.value().is_none(), "t {t} n {n}");
                }
            }
        }
    }

    #[test]
    fn zeroth_moment_is_one() {
        for spec in [StateSpec::thermal(0.5), StateSpec::spats(1.0), StateSpec::cauchy_lorentz_ncl(3.0), StateSpec::fock_element(2, 2), StateSpec::p_max()] {
            let m = normal_moment(&st(spec.clone()), 0).unwrap().value().unwrap();
            assert!((m - 1.0).abs() < 1e-6, "{spec:?}: {m}");
        }
    }

    #[test]
    fn thermal_moments() {
        let s = st(StateSpec::thermal(0.5));
        for n in 0..=4u32 {
            let v = normal_moment(&s, n).unwrap().value().unwrap();
            let exact = (ln_factorial(n as u64)).exp() * 0.5f64.powi(n as i32);
            assert!((v - exact).abs() < 1e-6 * exact.max(1.0), "n {n}");
        }
        assert!((normal_moment(&st(StateSpec::p_max()), 2).unwrap().value().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moment_matrices() {
        let one = moment_matrix_test(&st(StateSpec::fock_element(1, 1)), 1);
        assert_eq!(one.verdict, Verdict::NonclassicalCertified);
        assert!((one.value.unwrap() - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let th = st(StateSpec::thermal(0.5));
        for order in 1..=3 {
            let e = moment_matrix_test(&th, order);
            assert_eq!(e.verdict, Verdict::ConsistentWithClassical, "order {order}");
        }
        let ncl = moment_matrix_test(&st(StateSpec::cauchy_lorentz_ncl(1.0)), 1);
        assert_eq!(ncl.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn thermal_hankel_is_positive() {
        let m: Vec<f64> = (0..7).map(|k| (ln_factorial(k) as f64).exp() * 0.5f64.powi(k as i32)).collect();
        assert!(min_eigenvalue(&moment_matrix(&m, 3)) > 0.0);
    }

    #[test]
    fn negativity() {
        let grid = PhaseGrid::new(3.0, 31).unwrap();
        let k = FilterKernel::box_filter(2.0).unwrap();
        let scan = |spec| negativity_scan(&filtered_p_numeric(&st(spec), &k, &grid).unwrap().field).unwrap().0;
        assert!(scan(StateSpec::spats(1.0)) < 0.0);
        assert!(scan(StateSpec::vacuum()) >= -1e-12);
        assert!(scan(StateSpec::p_max()) < 0.0);
        let complex = PhaseField::sampled(crate::numerics::Side::Alpha, PhaseGrid::new(1.0, 3).unwrap(), vec![Complex64::new(0.0, 1e-6); 9]).unwrap();
        assert!(matches!(negativity_scan(&complex), Err(Error::ComplexResidue { .. })));
    }

    #[test]
    fn admissibility() {
        let g = TaylorField::exp_abs2(-1.0);
        assert!(admissible_check(&g, 0.75, 60).admissible);
        assert!(admissible_check(&g, 1.0 / 2f64.sqrt() + 1e-9, 200).admissible);
        let fail = admissible_check(&g, 0.70, 60);
        assert_eq!(fail.first_failure, Some((1, 1)));
        assert!(admissible_check(&TaylorField::constant(1.0), 0.0, 20).admissible);
        // |a_nn| = n! meets the bound exactly when 2C² >= 1
        let grow = TaylorField::exp_abs2(1.0);
        assert_eq!(admissible_check(&grow, 0.7, 2000).first_failure, Some((1, 1)));
        assert!(admissible_check(&grow, 0.99, 2000).admissible);
    }

    #[test]
    fn admissible_implies_analytic() {
        for (f, c) in [(TaylorField::exp_abs2(-1.0), 0.75), (TaylorField::gaussian(3.0), 0.9), (TaylorField::constant(0.5), 0.0)] {
            if admissible_check(&f, c, 80).admissible {
                assert!(analytic_bound_check(&f, 1.0, 2f64.sqrt() * c, 80).admissible);
            }
        }
    }

    #[test]
    fn pairing_bounds() {
        assert_eq!(pmax_pairing_bound(0.0).unwrap(), 1.0);
        assert!((pmax_pairing_bound(1.0 / 2f64.sqrt()).unwrap() - 2.0).abs() < 1e-12);
        assert!((pmax_pairing_bound(0.9).unwrap() - 1.0 / 0.19).abs() < 1e-12);
        assert!(pmax_pairing_bound(1.0).is_err());
        let pmax = exp_laplace_series(-0.5, TAYLOR_ORDER);
        let v = pair(&pmax, &TaylorField::exp_abs2(-1.0)).unwrap().value.re;
        assert!((v - 2.0).abs() < 1e-10);
    }

    fn alternating_family(c: f64, theta: f64, order: u32) -> TaylorField {
        let mut a = BTreeMap::new();
        for n in 0..=order {
            let ln = n as f64 * (2.0 * c * c * theta).ln() + ln_factorial(n as u64);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            a.insert((n, n), Complex64::new(sign * ln.exp(), 0.0));
        }
        TaylorField::from_derivatives(a, order)
    }

    #[test]
    fn bound_is_tight() {
        let c = 0.6;
        let bound = pmax_pairing_bound(c).unwrap();
        let pmax = exp_laplace_series(-0.5, TAYLOR_ORDER);
        let mut last = 0.0;
        for theta in [0.5, 0.9, 0.99, 0.999] {
            let f = alternating_family(c, theta, 150);
            assert!(admissible_check(&f, c, 150).admissible);
            let v = pair(&pmax, &f).unwrap().value.re;
            assert!(v <= bound + 1e-12 && v > last);
            last = v;
        }
        assert!(bound - last < 1e-3);
    }

    #[test]
    fn radius() {
        let b = radius_bound(0.9, 200);
        assert!((b - 0.2112).abs() < 1e-3, "{b}");
        let est = radius_estimate(0.9, &[200]);
        assert!(est[0] < b);
        assert!(radius_estimate(0.0, &[10, 20]).iter().all(|&v| v == 0.0));
        let e = radius_estimate(0.5, &[50, 100, 200]);
        assert!(e[0] > e[1] && e[1] > e[2]);
    }

    #[test]
    fn divergence_demo() {
        assert!((DivergenceDemo::term_ratio(1.0, 9) - 5.0).abs() < 1e-15);
        let zero = analytic_divergence_demo(0.0, 1.0, 10).unwrap();
        assert!(zero.partial_sums().iter().all(|&s| s == 1.0));
        let d = analytic_divergence_demo(0.5, 1.0, 60).unwrap();
        assert_eq!(d.first_exceeding(1e6), Some(31));
        let big = analytic_divergence_demo(1.0, 1.0, 400).unwrap();
        assert!(big.ln_partial_sums[400].is_finite() && big.partial_sums()[400].is_infinite());
    }

    #[test]
    fn classify_squeezed_and_thermal() {
        let r = classify(&st(StateSpec::squeezed(1.4)));
        assert_eq!(r.verdict, Verdict::NonclassicalCertified);
        assert_eq!(r.criteria[0].verdict, Verdict::NonclassicalCertified);
        assert_eq!(r.criteria[3].verdict, Verdict::NonclassicalCertified);
        let t = classify(&st(StateSpec::thermal(0.5)));
        assert_eq!(t.verdict, Verdict::ConsistentWithClassical);
        assert!(t.criteria.iter().all(|c| c.verdict == Verdict::ConsistentWithClassical));
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("consistent-with-classical") && !json.contains("\"classical\""));
    }

    #[test]
    fn classify_lorentz_ncl() {
        let r = classify(&st(StateSpec::cauchy_lorentz_ncl(1.0)));
        assert_eq!(r.verdict, Verdict::NonclassicalCertified);
        assert_eq!(r.criteria[1].verdict, Verdict::NonclassicalCertified);
        assert_eq!(r.criteria[2].verdict, Verdict::Inapplicable);
        let spats = classify(&st(StateSpec::spats(1.0)));
        assert_eq!(spats.criteria[0].verdict, Verdict::ConsistentWithClassical);
        assert_eq!(spats.criteria[1].verdict, Verdict::NonclassicalCertified);
    }

    #[test]
    fn classical_states_never_certified() {
        for spec in [
            StateSpec::vacuum(),
            StateSpec::thermal(1.2),
            StateSpec::cauchy_lorentz(3.0),
            StateSpec::vacuum().displaced(PhasePoint::new(0.7, -0.4)),
        ] {
            let r = classify(&st(spec.clone()));
            assert_eq!(r.verdict, Verdict::ConsistentWithClassical, "{spec:?}: {r:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn admissible_functions_respect_pmax_bound(c in 0.05f64..0.9, theta in 0.0f64..1.0) {
            let f = alternating_family(c, theta, 150);
            prop_assert!(admissible_check(&f, c, 150).admissible);
            let v = pair(&exp_laplace_series(-0.5, TAYLOR_ORDER), &f).unwrap().value.re;
            prop_assert!(v.abs() <= pmax_pairing_bound(c).unwrap() + 1e-9);
        }

        #[test]
        fn gaussian_tests_respect_pmax_bound(sigma2 in 2.0f64..20.0) {
            // e^{−|α|²/σ²} has a_nn = (−1)^n n!/σ^{2n}: admissible with 2C² = 1/σ²
            let f = TaylorField::gaussian(sigma2);
            let c = (1.0 / (2.0 * sigma2)).sqrt() * (1.0 + 1e-9);
            prop_assert!(admissible_check(&f, c, 300).admissible);
            let v = pair(&exp_laplace_series(-0.5, TAYLOR_ORDER), &f).unwrap().value.re;
            prop_assert!(v.abs() <= pmax_pairing_bound(c).unwrap() + 1e-9);
        }
    }
}
