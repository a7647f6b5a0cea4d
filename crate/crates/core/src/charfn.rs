//! Characteristic functions `Φ(β) = tr(ρ :D(β):)` with
//! `:D(β): = exp(β a†) exp(−β* a)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::numerics::special::ln_factorial;
use crate::numerics::{PhaseField, PhaseGrid, PhasePoint, Side};
use crate::states::{FockMatrix, State};
use crate::{Error, Result};

/// Largest Fock index accepted by [`phi_fock_element`].
pub const FOCK_ELEMENT_LIMIT: usize = 1000;

/// `Φ_{m,n}(β) = <n| :D(β): |m>`, the characteristic function of `|m><n|`:
///
/// `Σ_k sqrt(m! n!) β^{n−k} (−β*)^{m−k} / (k! (m−k)! (n−k)!)`.
///
/// Terms are formed from log-factorials and summed in order of decreasing
/// magnitude with compensation.
pub fn phi_fock_element(m: usize, n: usize, beta: Complex64) -> Result<Complex64> {
    if m > FOCK_ELEMENT_LIMIT || n > FOCK_ELEMENT_LIMIT {
        return Err(Error::Overflow(format!("Fock element ({m}, {n}) beyond index {FOCK_ELEMENT_LIMIT}")));
    }
    let r = beta.norm();
    if r == 0.0 {
        return Ok(Complex64::new(if m == n { 1.0 } else { 0.0 }, 0.0));
    }
    let unit = beta / r;
    let neg_conj = -unit.conj();
    let ln_r = r.ln();
    let half = 0.5 * (ln_factorial(m as u64) + ln_factorial(n as u64));
    let mut terms = Vec::with_capacity(m.min(n) + 1);
    for k in 0..=m.min(n) {
        let ln_mag = half - ln_factorial(k as u64) - ln_factorial((m - k) as u64) - ln_factorial((n - k) as u64)
            + (m + n - 2 * k) as f64 * ln_r;
        if ln_mag > 700.0 {
            return Err(Error::Overflow(format!("Fock element ({m}, {n}) at |beta| = {r}")));
        }
        let phase = unit.powu((n - k) as u32) * neg_conj.powu((m - k) as u32);
        terms.push(phase * ln_mag.exp());
    }
    Ok(ordered_sum(terms))
}

/// Compensated (Neumaier) sum after sorting by decreasing modulus.
pub(crate) fn ordered_sum(mut terms: Vec<Complex64>) -> Complex64 {
    terms.sort_by(|a, b| b.norm_sqr().total_cmp(&a.norm_sqr()));
    let (re, im): (Vec<f64>, Vec<f64>) = terms.iter().map(|z| (z.re, z.im)).unzip();
    Complex64::new(neumaier(&re), neumaier(&im))
}

pub(crate) fn neumaier(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Radius up to which the Fock sum is trusted for a truncated matrix:
/// `sqrt(cutoff) / 3`.
pub fn fock_band(cutoff: usize) -> f64 {
    (cutoff as f64).sqrt() / 3.0
}

/// `Σ ρ_{m,n} Φ_{m,n}(β)`.
///
/// Matrices with a non-zero truncation loss are only evaluated inside
/// [`fock_band`]; finite-rank matrices are exact everywhere.
pub fn phi_fock_route(fock: &FockMatrix, beta: Complex64) -> Result<Complex64> {
    if fock.truncation_loss() > 0.0 {
        let band = fock_band(fock.cutoff());
        if beta.norm() > band {
            return Err(Error::FockBand { modulus: beta.norm(), band });
        }
    }
    let mut terms = Vec::new();
    for (m, n, rho) in fock.entries() {
        terms.push(rho * phi_fock_element(m, n, beta)?);
    }
    Ok(ordered_sum(terms))
}

/// Characteristic function: the closed form when the state has one,
/// otherwise the Fock sum.
pub fn phi(state: &State, beta: Complex64) -> Result<Complex64> {
    match state.phi_closed(beta) {
        Some(v) => Ok(v),
        None => phi_fock_route(state.fock()?, beta),
    }
}

/// `s`-ordered characteristic function `exp(−(1−s)|β|²/2) Φ(β)`.
pub fn phi_s(state: &State, beta: Complex64, s: f64) -> Result<Complex64> {
    if !(-1.0..=1.0).contains(&s) {
        log::warn!("ordering parameter s = {s} outside [-1, 1]");
    }
    Ok((-(1.0 - s) * beta.norm_sqr() / 2.0).exp() * phi(state, beta)?)
}

/// A characteristic function bound to a state and an ordering parameter.
#[derive(Debug, Clone, Copy)]
pub struct CharFn<'a> {
    state: &'a State,
    s: f64,
}

impl<'a> CharFn<'a> {
    pub fn new(state: &'a State) -> Self {
        Self { state, s: 1.0 }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn state(&self) -> &'a State {
        self.state
    }

    pub fn eval(&self, beta: PhasePoint) -> Result<Complex64> {
        if self.s == 1.0 {
            phi(self.state, beta.to_complex())
        } else {
            phi_s(self.state, beta.to_complex(), self.s)
        }
    }

    /// Samples on the nodes of `grid` (β-side field).
    pub fn sample(&self, grid: &PhaseGrid) -> Result<PhaseField> {
        let values: Result<Vec<Complex64>> = (0..grid.len()).into_par_iter().map(|k| self.eval(grid.point_at(k))).collect();
        PhaseField::sampled(Side::Beta, *grid, values?)
    }
}

/// Result of a grid scan: the extreme value and the node where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanReport {
    pub value: f64,
    pub location: PhasePoint,
    pub nodes: usize,
}

/// `max |Φ(β)| exp(−|β|²/2)` over the grid. Physical states stay at or
/// below 1.
pub fn quantum_bound_check(state: &State, grid: &PhaseGrid) -> Result<ScanReport> {
    scan_max(state, grid, None, |b, phi| phi.norm() * (-b.norm_sqr() / 2.0).exp())
}

/// [`quantum_bound_check`] restricted to nodes with `|β| <= radius`.
pub fn quantum_bound_check_within(state: &State, grid: &PhaseGrid, radius: f64) -> Result<ScanReport> {
    scan_max(state, grid, Some(radius), |b, phi| phi.norm() * (-b.norm_sqr() / 2.0).exp())
}

/// `max (|Φ(β)| − 1)` over the grid. A positive value certifies
/// nonclassicality; a non-positive one is inconclusive.
pub fn classicality_violation(state: &State, grid: &PhaseGrid) -> Result<ScanReport> {
    scan_max(state, grid, None, |_, phi| phi.norm() - 1.0)
}

/// [`classicality_violation`] restricted to nodes with `|β| <= radius`.
pub fn classicality_violation_within(state: &State, grid: &PhaseGrid, radius: f64) -> Result<ScanReport> {
    scan_max(state, grid, Some(radius), |_, phi| phi.norm() - 1.0)
}

// Parallel evaluation, sequential reduction in row-major order: the first
// maximum wins, which is the lexicographically smallest (x, p).
fn scan_max<F>(state: &State, grid: &PhaseGrid, radius: Option<f64>, score: F) -> Result<ScanReport>
where
    F: Fn(PhasePoint, Complex64) -> f64 + Sync,
{
    let scores: Result<Vec<Option<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let b = grid.point_at(k);
            if radius.is_some_and(|r| b.norm() > r) {
                return Ok(None);
            }
            Ok(Some(score(b, phi(state, b.to_complex())?)))
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    let mut nodes = 0;
    for (k, s) in scores?.into_iter().enumerate() {
        let Some(s) = s else { continue };
        nodes += 1;
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, k));
        }
    }
    let (value, k) = best.ok_or_else(|| Error::Parameter("scan region contains no grid nodes".into()))?;
    Ok(ScanReport {
        value,
        location: grid.point_at(k),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_state, StateSpec};
    use phasespace_oracles::Truncated;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn low_order_elements() {
        let b = c(0.8, -1.3);
        assert_eq!(phi_fock_element(0, 0, b).unwrap(), c(1.0, 0.0));
        assert!((phi_fock_element(1, 1, b).unwrap() - (1.0 - b.norm_sqr())).norm() < 1e-15);
        assert!((phi_fock_element(0, 2, b).unwrap() - b * b / 2f64.sqrt()).norm() < 1e-15);
        assert!((phi_fock_element(2, 0, b).unwrap() - b.conj() * b.conj() / 2f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn agrees_with_truncated_operators() {
        let op = Truncated::new(60);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let r = rng.gen_range(0.0..3.0f64);
            let b = Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
            for m in 0..=10 {
                for n in 0..=10 {
                    let want = op.normal_displacement(b, m, n);
                    let got = phi_fock_element(m, n, b).unwrap();
                    assert!((got - want).norm() < 1e-8, "({m},{n}) at {b}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn guards_large_indices() {
        assert!(phi_fock_element(170, 170, c(0.5, 0.0)).is_ok());
        assert!(matches!(phi_fock_element(1001, 0, c(0.5, 0.0)), Err(Error::Overflow(_))));
    }

    #[test]
    fn closed_forms() {
        let th = make_state(StateSpec::thermal(0.5)).unwrap();
        assert!((phi(&th, c(1.0, 0.0)).unwrap().re - (-0.5f64).exp()).abs() < 1e-15);
        let sq = make_state(StateSpec::squeezed(1.4)).unwrap();
        let v = phi(&sq, c(0.0, 1.0)).unwrap();
        assert!((v.re - ((1.0 - (-2.8f64).exp()) / 2.0).exp()).abs() < 1e-14);
        let pm = make_state(StateSpec::p_max()).unwrap();
        assert!((phi(&pm, c(1.0, 1.0)).unwrap().re - 1f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn s_ordering() {
        let pm = make_state(StateSpec::p_max()).unwrap();
        let th = make_state(StateSpec::thermal(0.7)).unwrap();
        let b = c(0.6, -0.9);
        for s in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            assert!((phi_s(&pm, b, s).unwrap().re - (s * b.norm_sqr() / 2.0).exp()).abs() < 1e-14);
        }
        assert_eq!(phi_s(&th, b, 1.0).unwrap(), phi(&th, b).unwrap());
        assert!((phi_s(&th, b, -1.0).unwrap().re - (-(1.7) * b.norm_sqr()).exp()).abs() < 1e-15);
    }

    #[test]
    fn husimi_side_against_convolution() {
        // s = -1 is the transform of P convolved with exp(-|α|²)/π
        use crate::numerics::{fourier_kernel, quad2d, Domain};
        let nbar = 0.7;
        let q = move |a: PhasePoint| (-a.norm_sqr() / (nbar + 1.0)).exp() / (std::f64::consts::PI * (nbar + 1.0));
        let th = make_state(StateSpec::thermal(nbar)).unwrap();
        // Q itself from the convolution, by quadrature at one point
        let a0 = PhasePoint::new(0.3, -0.2);
        let conv = quad2d(
            |a| {
                let d = PhasePoint::new(a0.x - a.x, a0.p - a.p);
                Complex64::new(th.regular_p(a).unwrap() * (-d.norm_sqr()).exp() / std::f64::consts::PI, 0.0)
            },
            Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
            1e-11,
        )
        .unwrap();
        assert!((conv.value.re - q(a0)).abs() < 1e-10);
        let b = PhasePoint::new(0.4, 0.9);
        let ft = quad2d(
            |a| Complex64::new(q(a), 0.0) * fourier_kernel(a, b),
            Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
            1e-10,
        )
        .unwrap();
        assert!((ft.value - phi_s(&th, b.to_complex(), -1.0).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn fock_route_matches_closed_form() {
        for spec in [StateSpec::thermal(0.5), StateSpec::squeezed(1.0)] {
            let s = make_state(spec).unwrap();
            let m = s.fock_matrix(64).unwrap();
            assert!(m.truncation_loss() < 1e-6);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..20 {
                let b = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
                let fock = phi_fock_route(&m, b).unwrap();
                let closed = s.phi_closed(b).unwrap();
                assert!((fock - closed).norm() < 1e-6, "{s} at {b}: {fock} vs {closed}");
            }
            assert!(matches!(phi_fock_route(&m, c(3.0, 0.0)), Err(Error::FockBand { .. })));
        }
    }

    #[test]
    fn mixture_closed_form_matches_elements() {
        let s = make_state(StateSpec::fock_mixture(vec![(0, 0.2), (3, 0.5), (7, 0.3)])).unwrap();
        let b = c(1.1, 0.4);
        let want = 0.2 + 0.5 * phi_fock_element(3, 3, b).unwrap() + 0.3 * phi_fock_element(7, 7, b).unwrap();
        assert!((s.phi_closed(b).unwrap() - want).norm() < 1e-13);
    }

    #[test]
    fn bound_scans() {
        let grid = PhaseGrid::new(4.0, 81).unwrap();
        let sq = make_state(StateSpec::squeezed(1.4)).unwrap();
        let r = quantum_bound_check_within(&sq, &grid, 4.0).unwrap();
        assert!(r.value <= 1.0 + 1e-9);
        let th = make_state(StateSpec::thermal(2.0)).unwrap();
        let r = quantum_bound_check(&th, &grid).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.location, PhasePoint::ORIGIN);
        let one = make_state(StateSpec::fock_element(1, 1)).unwrap();
        assert!(quantum_bound_check(&one, &grid).unwrap().value <= 1.0 + 1e-12);
        assert!(classicality_violation(&th, &grid).unwrap().value <= 0.0);
    }

    #[test]
    fn violations() {
        let grid = PhaseGrid::new(2.0, 41).unwrap();
        let sq = make_state(StateSpec::squeezed(0.5)).unwrap();
        let at = phi(&sq, c(0.0, 2.0)).unwrap().norm() - 1.0;
        assert!((at - ((1.0 - (-1.0f64).exp()) * 2.0).exp() + 1.0).abs() < 1e-12);
        let r = classicality_violation(&sq, &grid).unwrap();
        assert!(r.value >= at && r.location.x.abs() < 1e-12);
        let one = make_state(StateSpec::photon_vacuum_mix(1.0)).unwrap();
        assert!((phi(&one, c(2.0, 0.0)).unwrap().norm() - 1.0 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn finite_rank_states_exceed_one() {
        let grid = PhaseGrid::new(6.0, 121).unwrap();
        let sup = FockMatrix::from_pure(&[c(1.0 / 2f64.sqrt(), 0.0), c(0.0, 0.0), c(1.0 / 2f64.sqrt(), 0.0)]);
        let states = [
            make_state(StateSpec::fock_element(1, 1)).unwrap(),
            make_state(StateSpec::fock_element(2, 2)).unwrap(),
            State::from_fock(sup).unwrap(),
        ];
        for s in &states {
            assert!(classicality_violation(s, &grid).unwrap().value > 0.0, "{s}");
        }
    }

    #[test]
    fn argmax_ties_break_lexicographically() {
        // |Φ| of the single photon is symmetric; the first maximal node has
        // the smallest x, then the smallest p
        let grid = PhaseGrid::new(2.0, 5).unwrap();
        let one = make_state(StateSpec::fock_element(1, 1)).unwrap();
        let r = classicality_violation(&one, &grid).unwrap();
        assert_eq!(r.location, PhasePoint::new(-2.0, -2.0));
    }

    proptest! {
        #[test]
        fn hermitian_symmetry(bx in -2.5f64..2.5, bp in -2.5f64..2.5) {
            let b = c(bx, bp);
            for spec in [StateSpec::thermal(0.5), StateSpec::squeezed(1.0), StateSpec::spats(1.0), StateSpec::cauchy_lorentz(2.0), StateSpec::squeezed(0.6).rotated(0.4)] {
                let s = make_state(spec).unwrap();
                prop_assert!((phi(&s, -b).unwrap() - phi(&s, b).unwrap().conj()).norm() < 1e-12);
            }
            let s = State::from_fock(FockMatrix::from_pure(&[c(0.6, 0.0), c(0.0, 0.8)])).unwrap();
            prop_assert!((phi(&s, -b).unwrap() - phi(&s, b).unwrap().conj()).norm() < 1e-12);
        }

        #[test]
        fn s_monotone(bx in -3.0f64..3.0, bp in -3.0f64..3.0, s1 in -1.0f64..1.0, s2 in -1.0f64..1.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let st = make_state(StateSpec::squeezed(0.8)).unwrap();
            let b = c(bx, bp);
            prop_assert!(phi_s(&st, b, lo).unwrap().norm() <= phi_s(&st, b, hi).unwrap().norm() * (1.0 + 1e-15));
        }
    }
}
