//! Acceptance suite for `phasespace`.
//!
//! Every criterion yields a [`CriterionOutcome`] with fixed-precision detail
//! lines, so a report serializes to the same bytes on every run. Timings
//! are handed to a caller-supplied callback and never enter the report.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use phasespace::charfn::{phi, phi_fock_element, quantum_bound_check_within};
use phasespace::deltaseries::{exp_laplace_series, fock_diagonal, pair, TaylorField, TAYLOR_ORDER};
use phasespace::filters::{
    filtered_mass_gaussian, filtered_p_gaussian, filtered_p_numeric, filtered_p_numeric_cut, omega_sinc, t_function, Cut, FilterKernel, GaussianCF,
};
use phasespace::numerics::quad::{quad2d, Domain};
use phasespace::numerics::{PhaseGrid, PhasePoint};
use phasespace::states::{make_state, StateSpec};
use phasespace::witness::{
    admissible_check, classify, normal_moment, pmax_pairing_bound, radius_bound, radius_estimate, Criterion, Moment, Verdict,
};
use phasespace_oracles::{lorentz_moment, t_integral, Truncated};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    /// Mismatches that are documented and reported, not failed.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub known_discrepancies: Vec<String>,
}

impl CriterionOutcome {
    fn new(id: u8, name: &'static str) -> Self {
        Self {
            id,
            name,
            passed: true,
            details: Vec::new(),
            known_discrepancies: Vec::new(),
        }
    }

    // Records a check; any failing check fails the criterion.
    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details.push(format!("{} {}", if ok { "ok" } else { "FAILED" }, detail));
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.check(false, format!("{what}: {e}"));
    }

    pub fn summary_line(&self) -> String {
        format!("criterion {:>2} {}: {}", self.id, if self.passed { "PASS" } else { "FAIL" }, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One PASS/FAIL line per criterion followed by its details.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&c.summary_line());
            s.push('\n');
            for d in &c.details {
                s.push_str("    ");
                s.push_str(d);
                s.push('\n');
            }
            for k in &c.known_discrepancies {
                s.push_str("    KNOWN-DISCREPANCY ");
                s.push_str(k);
                s.push('\n');
            }
        }
        s
    }
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "characteristic-function oracle"),
    (2, "thermal duality"),
    (3, "Fock diagonal cross-oracle"),
    (4, "quantum bound"),
    (5, "T(y;g) closed form"),
    (6, "filtered P properties at w = 2"),
    (7, "filtered normalization"),
    (8, "nonclassicality battery"),
    (9, "Cauchy-Lorentz moments"),
    (10, "dual-space suite"),
    (11, "determinism"),
];

/// Runs a single criterion. Criterion 11 reruns 1 to 10 twice.
pub fn run_criterion(id: u8) -> CriterionOutcome {
    match id {
        1 => fock_element_oracle(),
        2 => thermal_duality(),
        3 => fock_diagonal_cross(),
        4 => quantum_bound(),
        5 => t_closed_form(),
        6 => figure_one(),
        7 => filtered_normalization(),
        8 => battery(),
        9 => lorentz_moments(),
        10 => dual_space(),
        11 => {
            let first = run_until_ten(&mut |_, _| {});
            determinism(&first)
        }
        _ => panic!("no criterion {id}"),
    }
}

fn run_until_ten(timing: &mut dyn FnMut(u8, Duration)) -> Vec<CriterionOutcome> {
    (1..=10)
        .map(|id| {
            let start = Instant::now();
            let out = run_criterion(id);
            timing(id, start.elapsed());
            out
        })
        .collect()
}

fn determinism(first: &[CriterionOutcome]) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(11, CRITERIA[10].1);
    let second = run_until_ten(&mut |_, _| {});
    let a = serde_json::to_string(first).expect("serializes");
    let b = serde_json::to_string(&second).expect("serializes");
    out.check(a == b, format!("two runs of criteria 1-10 serialize to identical bytes ({} bytes)", a.len()));
    out
}

/// The full suite; `timing` receives the wall time of each criterion.
pub fn run_suite(timing: &mut dyn FnMut(u8, Duration)) -> SuiteReport {
    let mut criteria = run_until_ten(timing);
    let start = Instant::now();
    criteria.push(determinism(&criteria));
    timing(11, start.elapsed());
    SuiteReport { criteria }
}

fn fock_element_oracle() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(1, CRITERIA[0].1);
    let op = Truncated::new(60);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let betas: Vec<Complex64> = (0..50)
        .map(|_| {
            // uniform on the disk |β| <= 3
            let r = 3.0 * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let errs: Vec<f64> = betas
        .par_iter()
        .map(|&b| {
            let mut worst = 0.0f64;
            for m in 0..=10 {
                for n in 0..=10 {
                    let got = phi_fock_element(m, n, b).unwrap_or(Complex64::new(f64::NAN, 0.0));
                    worst = worst.max((got - op.normal_displacement(b, m, n)).norm());
                }
            }
            worst
        })
        .collect();
    let max = errs.iter().cloned().fold(0.0, f64::max);
    out.check(max < 1e-8, format!("m, n <= 10 at 50 points |beta| <= 3: max error {max:.3e} < 1e-8"));
    out
}

fn thermal_duality() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(2, CRITERIA[1].1);
    for (nbar, sigma2) in [(0.25, 1.0), (0.5, 1.0), (0.5, 2.0), (1.0, 4.0)] {
        let exact = sigma2 / (sigma2 + nbar);
        let series = match pair(&exp_laplace_series(nbar, TAYLOR_ORDER), &TaylorField::gaussian(sigma2)) {
            Ok(p) => p.value.re,
            Err(e) => return fail_with(out, "pairing", e),
        };
        let state = match make_state(StateSpec::thermal(nbar)) {
            Ok(s) => s,
            Err(e) => return fail_with(out, "state", e),
        };
        let quad = quad2d(
            |a| Complex64::new(state.regular_p(a).unwrap_or(f64::NAN) * (-a.norm_sqr() / sigma2).exp(), 0.0),
            Domain::Radial {
                center: PhasePoint::ORIGIN,
                r_max: None,
            },
            1e-10,
        );
        let quad = match quad {
            Ok(q) => q.re(),
            Err(e) => return fail_with(out, "quadrature", e),
        };
        let e1 = (series - exact).abs();
        let e2 = (quad - exact).abs();
        out.check(
            e1 < 1e-8 && e2 < 1e-8,
            format!("nbar {nbar}, sigma2 {sigma2}: exact {exact:.12}, series error {e1:.2e}, quadrature error {e2:.2e}"),
        );
    }
    out
}

fn fail_with(mut out: CriterionOutcome, what: &str, e: impl std::fmt::Display) -> CriterionOutcome {
    out.error(what, e);
    out
}

fn fock_diagonal_cross() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(3, CRITERIA[2].1);
    let report = match fock_diagonal(&exp_laplace_series(-0.5, TAYLOR_ORDER), 3) {
        Ok(r) => r,
        Err(e) => return fail_with(out, "fock diagonal", e),
    };
    let e0 = &report.entries[0];
    let fourier = e0.fourier.unwrap_or(f64::NAN);
    out.check(
        (e0.pairing - 2.0).abs() < 1e-6 && (fourier - 2.0).abs() < 1e-6 && (e0.pairing - fourier).abs() < 1e-6,
        format!("k = 0: pairing {:.10}, Fourier route {:.10}", e0.pairing, fourier),
    );
    for e in &report.entries {
        out.details.push(format!(
            "k = {}: pairing {:.10}, Fourier {}, candidate {:.10}",
            e.k,
            e.pairing,
            e.fourier.map_or("-".to_string(), |f| format!("{f:.10}")),
            e.candidate
        ));
        if !e.matches_candidate {
            out.known_discrepancies
                .push(format!("k = {}: computed {:.10} differs from candidate 2(-1)^k/3^(k+1) = {:.10}", e.k, e.pairing, e.candidate));
        }
    }
    out
}

/// Physical catalog states used for the bound and soundness checks.
pub fn physical_catalog() -> Vec<StateSpec> {
    vec![
        StateSpec::vacuum(),
        StateSpec::thermal(0.5),
        StateSpec::thermal(2.0),
        StateSpec::squeezed(1.4),
        StateSpec::spats(1.0),
        StateSpec::photon_vacuum_mix(0.5),
        StateSpec::photon_vacuum_mix(1.0),
        StateSpec::cauchy_lorentz(3.0),
        StateSpec::cauchy_lorentz_ncl(1.0),
        StateSpec::fock_element(2, 2),
        StateSpec::fock_mixture(vec![(0, 0.2), (1, 0.5), (3, 0.3)]),
        StateSpec::vacuum().displaced(PhasePoint::new(1.0, -0.5)),
        StateSpec::squeezed(0.8).rotated(0.6),
    ]
}

fn quantum_bound() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(4, CRITERIA[3].1);
    let grid = PhaseGrid::new(4.0, 81).expect("valid grid");
    for spec in physical_catalog() {
        let state = match make_state(spec) {
            Ok(s) => s,
            Err(e) => return fail_with(out, "state", e),
        };
        match quantum_bound_check_within(&state, &grid, 4.0) {
            Ok(r) => out.check(
                r.value <= 1.0 + 1e-9,
                format!("{}: max |Phi| exp(-|beta|^2/2) = {:.12} over {} nodes", state.name(), r.value, r.nodes),
            ),
            Err(e) => out.error(&state.name(), e),
        }
    }
    let xi = 5.0f64;
    let state = make_state(StateSpec::squeezed(xi)).expect("valid state");
    let beta = Complex64::new(0.0, 4.0);
    match phi(&state, beta) {
        Ok(v) => {
            let ratio = v.norm() * (-beta.norm_sqr() / 2.0).exp();
            let limit = (-(-2.0 * xi).exp() * 8.0).exp();
            out.check(
                ratio >= 0.9996 && (ratio - limit).abs() < 1e-12,
                format!("squeezed(5) at beta = 4i: ratio {ratio:.12}, exp(-8 exp(-2 xi)) = {limit:.12}"),
            );
        }
        Err(e) => out.error("squeezed(5)", e),
    }
    out
}

fn t_closed_form() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(5, CRITERIA[4].1);
    let ys: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
    for g in [-2.0, -0.5, 0.0, 0.5, 2.0] {
        let max = ys.par_iter().map(|&y| (t_function(y, g) - t_integral(y, g)).abs()).reduce(|| 0.0, f64::max);
        out.check(max < 1e-10, format!("g = {g}: max error {max:.3e} over 401 points in [-10, 10]"));
    }
    let exact = ys.iter().filter(|&&y| y != 0.0).all(|&y| {
        let s = y.sin() / y;
        t_function(y, 0.0) == s * s / PI
    });
    out.check(exact && t_function(0.0, 0.0) == 1.0 / PI, "T(y; 0) equals sin^2 y / (pi y^2) exactly".into());
    out
}

/// Relative L2 distance between two cuts, each scaled to unit value at
/// its largest magnitude.
pub fn normalized_cut_deviation(a: &[f64], b: &[f64]) -> f64 {
    let scale = |v: &[f64]| {
        let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter().map(|x| x / m).collect::<Vec<_>>()
    };
    let (a, b) = (scale(a), scale(b));
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn figure_one() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(6, CRITERIA[5].1);
    let w = 2.0;
    let grid = PhaseGrid::new(4.0, 321).expect("valid grid");
    let kernel = FilterKernel::box_filter(w).expect("valid width");
    let filtered = |spec: StateSpec| -> phasespace::Result<(Vec<f64>, f64)> {
        let s = make_state(spec)?;
        let f = filtered_p_numeric(&s, &kernel, &grid)?;
        Ok((f.field.values().expect("sampled").iter().map(|z| z.re).collect(), f.residue))
    };
    let min_of = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);

    match filtered(StateSpec::vacuum()) {
        Ok((v, res)) => {
            let err = v
                .iter()
                .enumerate()
                .map(|(k, x)| (x - omega_sinc(grid.point_at(k), w)).abs())
                .fold(0.0, f64::max);
            let min = min_of(&v);
            out.check(
                err < 1e-8 && min >= 0.0,
                format!("(a) vacuum: max |P_w - kernel| {err:.3e}, min {min:.3e}, residue {res:.1e}"),
            );
        }
        Err(e) => out.error("(a) vacuum", e),
    }
    match filtered(StateSpec::p_max()) {
        Ok((v, _)) => {
            let min = min_of(&v);
            out.check(min < -1e-3, format!("(b) p_max: min {min:.6e} < -1e-3"));
        }
        Err(e) => out.error("(b) p_max", e),
    }
    match filtered(StateSpec::thermal(0.5)) {
        Ok((v, _)) => {
            let min = min_of(&v);
            out.check(min >= -1e-9, format!("(c) thermal(0.5): min {min:.3e} >= -1e-9"));
        }
        Err(e) => out.error("(c) thermal(0.5)", e),
    }
    let ts = grid.coords();
    let cut = |spec: StateSpec| -> phasespace::Result<Vec<f64>> {
        let s = make_state(spec)?;
        Ok(filtered_p_numeric_cut(&s, &kernel, Cut::Re, &ts)?.0)
    };
    match (cut(StateSpec::squeezed(1.4)), cut(StateSpec::p_max())) {
        (Ok(sq), Ok(pm)) => {
            let min = min_of(&sq);
            let dev = normalized_cut_deviation(&sq, &pm);
            let closed = ts
                .iter()
                .zip(&sq)
                .map(|(&t, v)| (v - filtered_p_gaussian(GaussianCF::squeezed(1.4), w, PhasePoint::new(t, 0.0))).abs())
                .fold(0.0, f64::max);
            out.check(
                min < 0.0 && dev < 0.15 && closed < 1e-8,
                format!("(d) squeezed(1.4) cut Im alpha = 0: min {min:.6e}, deviation from p_max cut {dev:.4}, closed-form error {closed:.1e}"),
            );
        }
        (Err(e), _) | (_, Err(e)) => out.error("(d) cuts", e),
    }
    out
}

fn filtered_normalization() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(7, CRITERIA[6].1);
    let states = [
        ("vacuum", GaussianCF::vacuum()),
        ("p_max", GaussianCF::p_max()),
        ("thermal(0.5)", GaussianCF::thermal(0.5)),
        ("squeezed(1.4)", GaussianCF::squeezed(1.4)),
    ];
    let cases: Vec<(&str, GaussianCF, f64)> = states.iter().flat_map(|&(n, cf)| [1.0, 2.0, 4.0].map(|w| (n, cf, w))).collect();
    let masses: Vec<phasespace::Result<f64>> = cases.par_iter().map(|&(_, cf, w)| filtered_mass_gaussian(cf, w)).collect();
    for ((name, _, w), m) in cases.iter().zip(masses) {
        match m {
            Ok(m) => out.check((m - 1.0).abs() < 1e-6, format!("{name}, w = {w}: mass {m:.10}")),
            Err(e) => out.error(name, e),
        }
    }
    out
}

fn battery() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(8, CRITERIA[7].1);
    let classical = [StateSpec::vacuum(), StateSpec::thermal(0.5), StateSpec::cauchy_lorentz(3.0)];
    let quantum = [
        StateSpec::squeezed(1.4),
        StateSpec::spats(1.0),
        StateSpec::photon_vacuum_mix(1.0),
        StateSpec::p_max(),
        StateSpec::cauchy_lorentz_ncl(1.0),
    ];
    let certified = |r: &phasespace::witness::NonclassicalityReport| {
        r.criteria
            .iter()
            .filter(|c| c.verdict == Verdict::NonclassicalCertified)
            .map(|c| format!("{:?}", c.criterion))
            .collect::<Vec<_>>()
    };
    for spec in classical {
        let Ok(state) = make_state(spec) else { return fail_with(out, "state", "invalid") };
        let r = classify(&state);
        let c = certified(&r);
        out.check(c.is_empty(), format!("{}: {} certifications", state.name(), c.len()));
    }
    for spec in quantum {
        let Ok(state) = make_state(spec) else { return fail_with(out, "state", "invalid") };
        let r = classify(&state);
        let c = certified(&r);
        out.check(!c.is_empty(), format!("{}: certified by [{}]", state.name(), c.join(", ")));
        if state.name().starts_with("cauchy_lorentz_ncl") {
            let by_vacuum = r
                .criteria
                .iter()
                .any(|c| c.criterion == Criterion::VacuumProbability && c.verdict == Verdict::NonclassicalCertified);
            let moment = r.criteria.iter().find(|c| c.criterion == Criterion::MomentMatrix);
            let diverged = moment.is_some_and(|m| m.verdict == Verdict::Inapplicable && m.note.as_deref().is_some_and(|n| n.contains("diverges")));
            out.check(by_vacuum && diverged, format!("{}: vacuum certificate {by_vacuum}, moment route diverged {diverged}", state.name()));
        }
    }
    out
}

fn lorentz_moments() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(9, CRITERIA[8].1);
    match make_state(StateSpec::cauchy_lorentz(3.0)).and_then(|s| normal_moment(&s, 1)) {
        Ok(Moment::Finite(v)) => {
            let oracle = lorentz_moment(3.0, 1);
            out.check(
                (v - 0.5).abs() < 1e-6 && (v - oracle).abs() < 1e-6,
                format!("t = 3, n = 1: {v:.10} against Beta-integral oracle {oracle:.10}"),
            );
        }
        Ok(m) => out.check(false, format!("t = 3, n = 1: {m:?}")),
        Err(e) => out.error("t = 3, n = 1", e),
    }
    let mut cells = Vec::new();
    let mut all = true;
    for t in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let state = make_state(StateSpec::cauchy_lorentz(t)).expect("valid state");
        for n in 0..=2u32 {
            let m = normal_moment(&state, n);
            let diverged = matches!(m, Ok(Moment::Diverged { .. }));
            let ok = match m {
                Ok(Moment::Finite(v)) => t > n as f64 && (v - lorentz_moment(t, n)).abs() < 1e-6,
                Ok(Moment::Diverged { .. }) => t <= n as f64,
                Err(_) => false,
            };
            all &= ok;
            cells.push(format!("(t {t}, n {n}) {}", if diverged { "diverged" } else { "finite" }));
        }
    }
    out.check(all, format!("divergence exactly on t <= n: {}", cells.join(", ")));
    out
}

fn dual_space() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(10, CRITERIA[9].1);
    let g = TaylorField::exp_abs2(-1.0);
    let pass = admissible_check(&g, 0.75, 60);
    let fail = admissible_check(&g, 0.70, 60);
    out.check(pass.admissible, "exp(-|alpha|^2) admissible at C = 0.75, N = 60".into());
    // (2C²)^n n! < n! first at n = 1 when 2C² < 1
    out.check(
        fail.first_failure == Some((1, 1)),
        format!("exp(-|alpha|^2) at C = 0.70 first fails at {:?}, predicted (1, 1)", fail.first_failure),
    );

    let pmax = exp_laplace_series(-0.5, TAYLOR_ORDER);
    let catalog: Vec<(String, TaylorField)> = {
        let mut v = vec![
            ("1".to_string(), TaylorField::constant(1.0)),
            ("exp(-|alpha|^2)".to_string(), g.clone()),
            ("exp(|alpha|^2)".to_string(), TaylorField::exp_abs2(1.0)),
        ];
        for s2 in [2.0, 4.0, 10.0] {
            v.push((format!("gaussian(sigma2 = {s2})"), TaylorField::gaussian(s2)));
        }
        for k in [1, 2, 5] {
            v.push((format!("fock_weight({k})"), TaylorField::fock_weight(k)));
        }
        for theta in [0.5, 0.9, 0.99] {
            v.push((format!("alternating(C = 0.6, theta = {theta})"), alternating(0.6, theta, 150)));
        }
        v
    };
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut all = true;
    for (name, f) in &catalog {
        for c in [0.0, 0.5, 0.6, 0.75, 0.9, 0.99] {
            if !admissible_check(f, c, f.max_order().min(150)).admissible {
                continue;
            }
            checked += 1;
            match pair(&pmax, f) {
                Ok(p) => {
                    let bound = pmax_pairing_bound(c).expect("C < 1");
                    let ok = p.value.norm() <= bound + 1e-9;
                    worst = worst.max(p.value.norm() / bound);
                    if !ok {
                        out.details.push(format!("{name} at C = {c}: |pair| {:.6} > {bound:.6}", p.value.norm()));
                    }
                    all &= ok;
                }
                Err(e) => {
                    out.details.push(format!("{name} at C = {c}: {e}"));
                    all = false;
                }
            }
        }
    }
    out.check(
        all && checked > 0,
        format!("|pair(P_max, F)| <= 1/(1 - C^2) for {checked} admissible (F, C) pairs, largest ratio to the bound {worst:.6}"),
    );

    let ls = [50, 100, 200];
    let est = radius_estimate(0.9, &ls);
    let bounds: Vec<f64> = ls.iter().map(|&l| radius_bound(0.9, l)).collect();
    let decreasing = est.windows(2).all(|w| w[1] < w[0]);
    let bounded = est.iter().zip(&bounds).all(|(e, b)| e <= b);
    out.check(
        decreasing && bounded,
        format!(
            "radius estimates at C = 0.9 for l = 50, 100, 200: [{}] under bounds [{}]",
            est.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "),
            bounds.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
        ),
    );
    out
}

/// `a_nn = (−1)^n (2C²θ)^n n!`, whose pairing with `P_max` is `1/(1 − C²θ)`.
pub fn alternating(c: f64, theta: f64, order: u32) -> TaylorField {
    let mut a = std::collections::BTreeMap::new();
    for n in 0..=order {
        let ln = n as f64 * (2.0 * c * c * theta).ln() + phasespace::numerics::special::ln_factorial(n as u64);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        a.insert((n, n), Complex64::new(sign * ln.exp(), 0.0));
    }
    TaylorField::from_derivatives(a, order)
}
