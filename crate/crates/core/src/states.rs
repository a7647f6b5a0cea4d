//! Catalog of single-mode states and pseudo-states.
//!
//! Every catalog entry carries whatever closed forms exist: the Fock
//! matrix, the characteristic function `Φ(β)` and a regular `P(α)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfn::phi_fock_element;
use crate::numerics::special::{bessel_k, gamma, laguerre, ln_factorial};
use crate::numerics::{quad2d, Domain, PhasePoint};
use crate::{Error, Result, Warning};

/// Default Fock cutoff.
pub const DEFAULT_CUTOFF: usize = 64;

/// Losses above this are reported as a truncation warning.
pub const TRUNCATION_WARN: f64 = 1e-6;

// Adaptive cutoffs aim for this loss and never exceed MAX_CUTOFF.
const TARGET_LOSS: f64 = 1e-12;
const MAX_CUTOFF: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Vacuum,
    /// The operator `|m><n|`; a density operator only when `m == n`.
    FockElement { m: usize, n: usize },
    Thermal { nbar: f64 },
    Squeezed { xi: f64 },
    /// Single-photon-added thermal state.
    Spats { nbar: f64 },
    /// `(1 - eta)|0><0| + eta |1><1|`.
    PhotonVacuumMix { eta: f64 },
    CauchyLorentz { t: f64 },
    /// Cauchy-Lorentz state with its vacuum component removed.
    CauchyLorentzNcl { t: f64 },
    /// The maximally singular distribution `exp(-∂∂*/2) δ`. Not a state.
    PMax,
    /// Diagonal mixture of Fock states, `(k, weight)` pairs.
    FockMixture(Vec<(usize, f64)>),
}

impl StateKind {
    pub fn name(&self) -> &'static str {
        match self {
            StateKind::Vacuum => "vacuum",
            StateKind::FockElement { .. } => "fock_element",
            StateKind::Thermal { .. } => "thermal",
            StateKind::Squeezed { .. } => "squeezed",
            StateKind::Spats { .. } => "spats",
            StateKind::PhotonVacuumMix { .. } => "photon_vacuum_mix",
            StateKind::CauchyLorentz { .. } => "cauchy_lorentz",
            StateKind::CauchyLorentzNcl { .. } => "cauchy_lorentz_ncl",
            StateKind::PMax => "p_max",
            StateKind::FockMixture(_) => "fock_mixture",
        }
    }
}

/// A catalog state plus an optional rotation `α -> e^{iφ} α` followed by a
/// displacement `α -> α + α₀`.
///
/// JSON form: `{"kind": "thermal", "params": {"nbar": 0.5}}` with optional
/// `"rotation": φ` and `"displacement": [x, p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct StateSpec {
    pub kind: StateKind,
    pub rotation: f64,
    pub displacement: PhasePoint,
}

impl StateSpec {
    pub fn new(kind: StateKind) -> Self {
        Self {
            kind,
            rotation: 0.0,
            displacement: PhasePoint::ORIGIN,
        }
    }

    pub fn vacuum() -> Self {
        Self::new(StateKind::Vacuum)
    }
    pub fn thermal(nbar: f64) -> Self {
        Self::new(StateKind::Thermal { nbar })
    }
    pub fn squeezed(xi: f64) -> Self {
        Self::new(StateKind::Squeezed { xi })
    }
    pub fn spats(nbar: f64) -> Self {
        Self::new(StateKind::Spats { nbar })
    }
    pub fn photon_vacuum_mix(eta: f64) -> Self {
        Self::new(StateKind::PhotonVacuumMix { eta })
    }
    pub fn cauchy_lorentz(t: f64) -> Self {
        Self::new(StateKind::CauchyLorentz { t })
    }
    pub fn cauchy_lorentz_ncl(t: f64) -> Self {
        Self::new(StateKind::CauchyLorentzNcl { t })
    }
    pub fn p_max() -> Self {
        Self::new(StateKind::PMax)
    }
    pub fn fock_element(m: usize, n: usize) -> Self {
        Self::new(StateKind::FockElement { m, n })
    }
    pub fn fock_mixture(weights: Vec<(usize, f64)>) -> Self {
        Self::new(StateKind::FockMixture(weights))
    }

    pub fn rotated(mut self, phi: f64) -> Self {
        self.rotation = phi;
        self
    }

    pub fn displaced(mut self, alpha0: PhasePoint) -> Self {
        self.displacement = alpha0;
        self
    }

    fn has_modifiers(&self) -> bool {
        self.rotation != 0.0 || self.displacement != PhasePoint::ORIGIN
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.rotation.is_finite() && self.displacement.x.is_finite() && self.displacement.p.is_finite()) {
            return bad("rotation and displacement must be finite".into());
        }
        match &self.kind {
            StateKind::Thermal { nbar } | StateKind::Spats { nbar } if !(*nbar > 0.0 && nbar.is_finite()) => {
                bad(format!("{} needs nbar > 0, got {nbar}", self.kind.name()))
            }
            StateKind::Squeezed { xi } if !(*xi > 0.0 && xi.is_finite()) => bad(format!("squeezed needs xi > 0, got {xi}")),
            StateKind::PhotonVacuumMix { eta } if !(*eta > 0.0 && *eta <= 1.0) => {
                bad(format!("photon_vacuum_mix needs 0 < eta <= 1, got {eta}"))
            }
            StateKind::CauchyLorentz { t } | StateKind::CauchyLorentzNcl { t } if !(*t > 0.0 && t.is_finite()) => {
                bad(format!("{} needs t > 0, got {t}", self.kind.name()))
            }
            StateKind::FockMixture(w) => {
                if w.is_empty() || w.iter().any(|(_, p)| p.is_nan() || *p < 0.0) {
                    return bad("fock_mixture needs non-negative weights".into());
                }
                let total: f64 = w.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("fock_mixture weights sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    displacement: Option<[f64; 2]>,
}

impl TryFrom<RawSpec> for StateSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let get = |name: &str| {
            raw.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::Parameter(format!("{} needs parameter `{name}`", raw.kind)))
        };
        let index = |name: &str| -> Result<usize> {
            let v = get(name)?;
            if v < 0.0 || v.fract() != 0.0 || v > 1e6 {
                return Err(Error::Parameter(format!("`{name}` must be a non-negative integer, got {v}")));
            }
            Ok(v as usize)
        };
        let expected: &[&str] = match raw.kind.as_str() {
            "vacuum" | "p_max" => &[],
            "fock_element" => &["m", "n"],
            "thermal" | "spats" => &["nbar"],
            "squeezed" => &["xi"],
            "photon_vacuum_mix" => &["eta"],
            "cauchy_lorentz" | "cauchy_lorentz_ncl" => &["t"],
            "fock_mixture" => &[],
            other => return Err(Error::Parameter(format!("unknown state kind `{other}`"))),
        };
        if raw.kind != "fock_mixture" {
            if let Some(extra) = raw.params.keys().find(|k| !expected.contains(&k.as_str())) {
                return Err(Error::Parameter(format!("{} does not take parameter `{extra}`", raw.kind)));
            }
        }
        let kind = match raw.kind.as_str() {
            "vacuum" => StateKind::Vacuum,
            "p_max" => StateKind::PMax,
            "fock_element" => StateKind::FockElement { m: index("m")?, n: index("n")? },
            "thermal" => StateKind::Thermal { nbar: get("nbar")? },
            "spats" => StateKind::Spats { nbar: get("nbar")? },
            "squeezed" => StateKind::Squeezed { xi: get("xi")? },
            "photon_vacuum_mix" => StateKind::PhotonVacuumMix { eta: get("eta")? },
            "cauchy_lorentz" => StateKind::CauchyLorentz { t: get("t")? },
            "cauchy_lorentz_ncl" => StateKind::CauchyLorentzNcl { t: get("t")? },
            _ => {
                let mut w = Vec::new();
                for (k, p) in &raw.params {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::Parameter(format!("fock_mixture keys are photon numbers, got `{k}`")))?;
                    w.push((k, *p));
                }
                w.sort_by_key(|e| e.0);
                StateKind::FockMixture(w)
            }
        };
        let d = raw.displacement.unwrap_or([0.0, 0.0]);
        let spec = StateSpec {
            kind,
            rotation: raw.rotation.unwrap_or(0.0),
            displacement: PhasePoint::new(d[0], d[1]),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<StateSpec> for RawSpec {
    fn from(spec: StateSpec) -> Self {
        let mut params = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            params.insert(k.to_string(), v);
        };
        match &spec.kind {
            StateKind::Vacuum | StateKind::PMax => {}
            StateKind::FockElement { m, n } => {
                put("m", *m as f64);
                put("n", *n as f64);
            }
            StateKind::Thermal { nbar } | StateKind::Spats { nbar } => put("nbar", *nbar),
            StateKind::Squeezed { xi } => put("xi", *xi),
            StateKind::PhotonVacuumMix { eta } => put("eta", *eta),
            StateKind::CauchyLorentz { t } | StateKind::CauchyLorentzNcl { t } => put("t", *t),
            StateKind::FockMixture(w) => {
                for (k, p) in w {
                    put(&k.to_string(), *p);
                }
            }
        }
        RawSpec {
            kind: spec.kind.name().to_string(),
            params,
            rotation: (spec.rotation != 0.0).then_some(spec.rotation),
            displacement: (spec.displacement != PhasePoint::ORIGIN).then_some([spec.displacement.x, spec.displacement.p]),
        }
    }
}

/// Dense truncated density matrix `ρ_{m,n}`, `0 <= m, n <= cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    cutoff: usize,
    data: Vec<Complex64>,
    truncation_loss: f64,
}

impl FockMatrix {
    pub fn zeros(cutoff: usize) -> Self {
        let dim = cutoff + 1;
        Self {
            cutoff,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
            truncation_loss: 0.0,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "a Fock matrix needs at least one entry");
        let mut m = Self::zeros(diag.len() - 1);
        for (k, v) in diag.iter().enumerate() {
            m.set(k, k, Complex64::new(*v, 0.0));
        }
        m
    }

    /// Pure state from amplitudes `ψ_n`.
    pub fn from_pure(psi: &[Complex64]) -> Self {
        assert!(!psi.is_empty(), "a Fock matrix needs at least one entry");
        let mut m = Self::zeros(psi.len() - 1);
        for (i, a) in psi.iter().enumerate() {
            for (j, b) in psi.iter().enumerate() {
                m.set(i, j, a * b.conj());
            }
        }
        m
    }

    pub fn with_truncation_loss(mut self, loss: f64) -> Self {
        self.truncation_loss = loss;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        if m > self.cutoff || n > self.cutoff {
            return Complex64::new(0.0, 0.0);
        }
        self.data[m * self.dim() + n]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        let dim = self.dim();
        self.data[m * dim + n] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.get(k, k).re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|k| self.get(k, k)).sum()
    }

    /// Population beyond the cutoff, `1 - Σ_{n <= cutoff} ρ_{n,n}` for
    /// states; exact closed forms are used where available.
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn warning(&self) -> Option<Warning> {
        (self.truncation_loss > TRUNCATION_WARN).then(|| Warning::Truncation {
            what: format!("Fock matrix at cutoff {}", self.cutoff),
            loss: self.truncation_loss,
        })
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim()).all(|m| (0..self.dim()).all(|n| m == n || self.get(m, n) == Complex64::new(0.0, 0.0)))
    }

    /// Largest `|ρ_{m,n} - ρ_{n,m}*|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..self.dim() {
            for n in m..self.dim() {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    /// Highest populated index (any row or column with a non-zero entry).
    pub fn rank_bound(&self) -> usize {
        (0..self.dim())
            .rev()
            .find(|&k| (0..self.dim()).any(|j| self.get(k, j) != Complex64::new(0.0, 0.0) || self.get(j, k) != Complex64::new(0.0, 0.0)))
            .unwrap_or(0)
    }

    /// Non-zero entries `(m, n, ρ_{m,n})` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let dim = self.dim();
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(move |(k, v)| (k / dim, k % dim, *v))
    }

    fn truncated(&self, cutoff: usize) -> FockMatrix {
        let mut out = FockMatrix::zeros(cutoff);
        for m in 0..=cutoff.min(self.cutoff) {
            for n in 0..=cutoff.min(self.cutoff) {
                out.set(m, n, self.get(m, n));
            }
        }
        out
    }

    fn rotate(&mut self, phi: f64) {
        let dim = self.dim();
        for m in 0..dim {
            for n in 0..dim {
                let v = self.get(m, n) * Complex64::cis(phi * (m as f64 - n as f64));
                self.set(m, n, v);
            }
        }
    }
}

#[derive(Debug)]
enum Source {
    Catalog(StateSpec),
    Explicit(FockMatrix),
}

/// A constructed state with its closed forms.
#[derive(Debug)]
pub struct State {
    source: Source,
    physical: bool,
    ncl_norm: Option<f64>,
    fock: OnceLock<std::result::Result<FockMatrix, String>>,
}

/// Builds a catalog state. For `cauchy_lorentz_ncl` the vacuum overlap of
/// the parent state is integrated here and stored.
pub fn make_state(spec: StateSpec) -> Result<State> {
    State::new(spec)
}

impl State {
    pub fn new(spec: StateSpec) -> Result<Self> {
        spec.validate()?;
        let physical = match spec.kind {
            StateKind::PMax => false,
            StateKind::FockElement { m, n } => m == n,
            _ => true,
        };
        let ncl_norm = match spec.kind {
            StateKind::CauchyLorentzNcl { t } => Some(lorentz_vacuum_overlap(t)?),
            _ => None,
        };
        Ok(Self {
            source: Source::Catalog(spec),
            physical,
            ncl_norm,
            fock: OnceLock::new(),
        })
    }

    /// A state given only by its density matrix. The matrix is taken as
    /// exact (finite rank) unless it carries a truncation loss.
    pub fn from_fock(matrix: FockMatrix) -> Result<Self> {
        if matrix.hermiticity_defect() > 1e-12 {
            return Err(Error::Parameter("explicit Fock matrix is not Hermitian".into()));
        }
        let trace = matrix.trace().re + matrix.truncation_loss();
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("explicit Fock matrix has trace {trace}")));
        }
        Ok(Self {
            source: Source::Explicit(matrix.clone()),
            physical: true,
            ncl_norm: None,
            fock: OnceLock::from(Ok(matrix)),
        })
    }

    pub fn spec(&self) -> Option<&StateSpec> {
        match &self.source {
            Source::Catalog(s) => Some(s),
            Source::Explicit(_) => None,
        }
    }

    pub fn kind(&self) -> Option<&StateKind> {
        self.spec().map(|s| &s.kind)
    }

    pub fn name(&self) -> String {
        match &self.source {
            Source::Explicit(m) => format!("fock_matrix(cutoff={})", m.cutoff()),
            Source::Catalog(s) => {
                let raw = RawSpec::from(s.clone());
                let params: Vec<String> = raw.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let mut name = format!("{}({})", raw.kind, params.join(","));
                if s.has_modifiers() {
                    name.push_str(&format!("@rot={},disp=({},{})", s.rotation, s.displacement.x, s.displacement.p));
                }
                name
            }
        }
    }

    /// False for `p_max` and for off-diagonal Fock elements.
    pub fn is_physical(&self) -> bool {
        self.physical
    }

    /// `N_t = ∫ P_cl(α; t) exp(-|α|²) d²α` for `cauchy_lorentz_ncl`.
    pub fn ncl_norm(&self) -> Option<f64> {
        self.ncl_norm
    }

    /// Weight of the point mass at the origin separated from the regular
    /// part of `P` (only `cauchy_lorentz_ncl` has one).
    pub fn atom_weight(&self) -> f64 {
        match self.ncl_norm {
            Some(n) => -n / (1.0 - n),
            None => 0.0,
        }
    }

    /// Characteristic function in closed form, if the state has one.
    /// Explicit Fock matrices return `None`.
    pub fn phi_closed(&self, beta: Complex64) -> Option<Complex64> {
        let spec = self.spec()?;
        let (b, shift) = modified_argument(spec, beta);
        let base = match &spec.kind {
            StateKind::Vacuum => Complex64::new(1.0, 0.0),
            StateKind::FockElement { m, n } => phi_fock_element(*m, *n, b).ok()?,
            StateKind::Thermal { nbar } => Complex64::new((-nbar * b.norm_sqr()).exp(), 0.0),
            StateKind::Squeezed { xi } => {
                // −sinh²ξ |β|² − sinh ξ cosh ξ Re β², without the cancellation
                let s = xi.sinh();
                Complex64::new((-s * (xi.exp() * b.re * b.re - (-xi).exp() * b.im * b.im)).exp(), 0.0)
            }
            StateKind::Spats { nbar } => {
                let r2 = b.norm_sqr();
                Complex64::new((1.0 - (nbar + 1.0) * r2) * (-nbar * r2).exp(), 0.0)
            }
            StateKind::PhotonVacuumMix { eta } => Complex64::new(1.0 - eta * b.norm_sqr(), 0.0),
            StateKind::CauchyLorentz { t } => Complex64::new(lorentz_phi(*t, b.norm()).ok()?, 0.0),
            StateKind::CauchyLorentzNcl { t } => {
                let n = self.ncl_norm?;
                Complex64::new((lorentz_phi(*t, b.norm()).ok()? - n) / (1.0 - n), 0.0)
            }
            StateKind::PMax => Complex64::new((b.norm_sqr() / 2.0).exp(), 0.0),
            StateKind::FockMixture(w) => w
                .iter()
                .map(|(k, p)| *p * laguerre(*k, 0.0, b.norm_sqr()))
                .sum::<f64>()
                .into(),
        };
        Some(shift * base)
    }

    /// Regular part of `P(α)`.
    ///
    /// For `cauchy_lorentz_ncl` this excludes the atom at the origin (see
    /// [`atom_weight`](Self::atom_weight)).
    pub fn regular_p(&self, alpha: PhasePoint) -> Result<f64> {
        let spec = self
            .spec()
            .ok_or_else(|| Error::NoRegularForm("an explicit Fock matrix".into()))?;
        let a = Complex64::cis(-spec.rotation) * (alpha.to_complex() - spec.displacement.to_complex());
        let r2 = a.norm_sqr();
        match &spec.kind {
            StateKind::Thermal { nbar } => Ok((-r2 / nbar).exp() / (PI * nbar)),
            StateKind::Spats { nbar } => Ok(((nbar + 1.0) * r2 - nbar) * (-r2 / nbar).exp() / (PI * nbar.powi(3))),
            StateKind::CauchyLorentz { t } => Ok(lorentz_p(*t, r2)),
            StateKind::CauchyLorentzNcl { t } => {
                let n = self.ncl_norm.expect("set at construction");
                Ok(lorentz_p(*t, r2) / (1.0 - n))
            }
            other => Err(Error::NoRegularForm(other.name().to_string())),
        }
    }

    pub fn has_regular_p(&self) -> bool {
        matches!(
            self.kind(),
            Some(StateKind::Thermal { .. } | StateKind::Spats { .. } | StateKind::CauchyLorentz { .. } | StateKind::CauchyLorentzNcl { .. })
        )
    }

    /// Cutoff used by [`fock`](Self::fock): 64, raised where the closed-form
    /// tail says more is needed, up to 4000.
    pub fn default_cutoff(&self) -> usize {
        let Some(spec) = self.spec() else {
            return match &self.source {
                Source::Explicit(m) => m.cutoff(),
                Source::Catalog(_) => unreachable!(),
            };
        };
        let base = match &spec.kind {
            StateKind::Thermal { nbar } => {
                let q = nbar / (nbar + 1.0);
                (0..MAX_CUTOFF).find(|&k| thermal_tail(q, k) < TARGET_LOSS).unwrap_or(MAX_CUTOFF)
            }
            StateKind::Spats { nbar } => {
                let q = nbar / (nbar + 1.0);
                (0..MAX_CUTOFF).find(|&k| spats_tail(q, k) < TARGET_LOSS).unwrap_or(MAX_CUTOFF)
            }
            StateKind::Squeezed { xi } => squeezed_cutoff(*xi),
            StateKind::FockElement { m, n } => *m.max(n),
            StateKind::FockMixture(w) => w.iter().map(|e| e.0).max().unwrap_or(0),
            _ => 0,
        };
        let disp = spec.displacement.norm_sqr();
        let extra = if disp > 0.0 { (disp + 10.0 * disp.sqrt() + 30.0).ceil() as usize } else { 0 };
        (base + extra).clamp(DEFAULT_CUTOFF, MAX_CUTOFF)
    }

    /// Fock matrix at [`default_cutoff`](Self::default_cutoff), built once.
    pub fn fock(&self) -> Result<&FockMatrix> {
        self.fock
            .get_or_init(|| self.fock_matrix(self.default_cutoff()).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Unsupported(e.clone()))
    }

    /// Truncated Fock matrix with its loss `1 - Σ ρ_{n,n}`. A loss above
    /// 1e-6 is logged and available via [`FockMatrix::warning`].
    pub fn fock_matrix(&self, cutoff: usize) -> Result<FockMatrix> {
        let spec = match &self.source {
            Source::Explicit(m) => {
                let kept: f64 = m.diagonal().iter().take(cutoff + 1).sum();
                let loss = m.truncation_loss() + (m.trace().re - kept);
                return Ok(m.truncated(cutoff).with_truncation_loss(loss.max(0.0)));
            }
            Source::Catalog(s) => s,
        };
        if !spec.has_modifiers() {
            return self.catalog_fock(&spec.kind, cutoff);
        }
        // displaced states populate higher photon numbers; build wide, then cut
        let work = if spec.displacement == PhasePoint::ORIGIN {
            cutoff
        } else {
            let d = spec.displacement.norm_sqr();
            cutoff.max(self.default_cutoff()) + (d + 10.0 * d.sqrt() + 30.0).ceil() as usize
        };
        let mut m = self.catalog_fock(&spec.kind, work)?;
        let base_loss = m.truncation_loss();
        m.rotate(spec.rotation);
        if spec.displacement != PhasePoint::ORIGIN {
            m = displace(&m, spec.displacement.to_complex());
        }
        let kept: f64 = m.diagonal().iter().take(cutoff + 1).sum();
        let loss = (1.0 - kept).max(base_loss);
        let out = m.truncated(cutoff).with_truncation_loss(loss.max(0.0));
        warn_loss(&out);
        Ok(out)
    }

    fn catalog_fock(&self, kind: &StateKind, cutoff: usize) -> Result<FockMatrix> {
        let m = match kind {
            StateKind::Vacuum => FockMatrix::from_diagonal(&vec_with(cutoff, &[(0, 1.0)])),
            StateKind::FockElement { m, n } => {
                let mut f = FockMatrix::zeros(cutoff);
                if *m <= cutoff && *n <= cutoff {
                    f.set(*m, *n, Complex64::new(1.0, 0.0));
                    f
                } else {
                    f.with_truncation_loss(if m == n { 1.0 } else { 0.0 })
                }
            }
            StateKind::Thermal { nbar } => {
                let q = nbar / (nbar + 1.0);
                let diag: Vec<f64> = (0..=cutoff).map(|m| q.powi(m as i32) / (nbar + 1.0)).collect();
                FockMatrix::from_diagonal(&diag).with_truncation_loss(thermal_tail(q, cutoff))
            }
            StateKind::Spats { nbar } => {
                let q = nbar / (nbar + 1.0);
                let diag: Vec<f64> = (0..=cutoff)
                    .map(|m| if m == 0 { 0.0 } else { m as f64 * q.powi(m as i32 - 1) / (nbar + 1.0).powi(2) })
                    .collect();
                FockMatrix::from_diagonal(&diag).with_truncation_loss(spats_tail(q, cutoff))
            }
            StateKind::Squeezed { xi } => {
                let psi: Vec<Complex64> = (0..=cutoff).map(|n| Complex64::new(squeezed_amplitude(*xi, n), 0.0)).collect();
                let mut loss = 0.0;
                let mut n = cutoff + 1;
                loop {
                    let a = squeezed_amplitude(*xi, n);
                    loss += a * a;
                    if n.is_multiple_of(2) && (a * a < 1e-20 * loss || a == 0.0) && n > cutoff + 2 {
                        break;
                    }
                    n += 1;
                    if n > 1_000_000 {
                        break;
                    }
                }
                FockMatrix::from_pure(&psi).with_truncation_loss(loss)
            }
            StateKind::PhotonVacuumMix { eta } => FockMatrix::from_diagonal(&vec_with(cutoff, &[(0, 1.0 - eta), (1, *eta)])),
            StateKind::FockMixture(w) => {
                let kept: Vec<(usize, f64)> = w.iter().copied().filter(|e| e.0 <= cutoff).collect();
                let loss: f64 = w.iter().filter(|e| e.0 > cutoff).map(|e| e.1).sum();
                FockMatrix::from_diagonal(&vec_with(cutoff, &kept)).with_truncation_loss(loss)
            }
            StateKind::CauchyLorentz { t } | StateKind::CauchyLorentzNcl { t } => {
                let mut diag = Vec::with_capacity(cutoff + 1);
                for k in 0..=cutoff {
                    diag.push(lorentz_fock_diagonal(*t, k)?);
                }
                if let Some(n) = self.ncl_norm {
                    diag[0] = 0.0;
                    for v in diag.iter_mut().skip(1) {
                        *v /= 1.0 - n;
                    }
                }
                let kept: f64 = diag.iter().sum();
                FockMatrix::from_diagonal(&diag).with_truncation_loss((1.0 - kept).max(0.0))
            }
            StateKind::PMax => {
                return Err(Error::Unsupported("p_max has no trace-class Fock matrix".into()));
            }
        };
        warn_loss(&m);
        Ok(m)
    }
}

fn warn_loss(m: &FockMatrix) {
    if let Some(Warning::Truncation { what, loss }) = m.warning() {
        log::warn!("{what}: truncation loss {loss:e}");
    }
}

fn vec_with(cutoff: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; cutoff + 1];
    for &(k, p) in entries {
        if k <= cutoff {
            v[k] += p;
        }
    }
    v
}

// β for the unmodified state and the displacement phase exp(β α₀* − β* α₀).
fn modified_argument(spec: &StateSpec, beta: Complex64) -> (Complex64, Complex64) {
    let b = beta * Complex64::cis(-spec.rotation);
    let a0 = spec.displacement;
    let shift = if a0 == PhasePoint::ORIGIN {
        Complex64::new(1.0, 0.0)
    } else {
        crate::numerics::fourier_kernel(a0, PhasePoint::from_complex(beta))
    };
    (b, shift)
}

fn thermal_tail(q: f64, cutoff: usize) -> f64 {
    q.powi(cutoff as i32 + 1)
}

fn spats_tail(q: f64, cutoff: usize) -> f64 {
    let k = cutoff as f64;
    (k + 1.0) * q.powi(cutoff as i32) * (1.0 - q) + q.powi(cutoff as i32 + 1)
}

/// Amplitude `<n|ξ>` of the squeezed vacuum: zero for odd `n`,
/// `(cosh ξ)^{-1/2} (-tanh(ξ)/2)^j sqrt((2j)!) / j!` for `n = 2j`.
pub fn squeezed_amplitude(xi: f64, n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let j = (n / 2) as u64;
    let th = xi.tanh();
    let ln = -0.5 * xi.cosh().ln() + j as f64 * (th / 2.0).ln() + 0.5 * ln_factorial(2 * j) - ln_factorial(j);
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * ln.exp()
}

fn squeezed_cutoff(xi: f64) -> usize {
    let mut tail = 1.0;
    for n in (0..MAX_CUTOFF).step_by(2) {
        let a = squeezed_amplitude(xi, n);
        tail -= a * a;
        if tail < TARGET_LOSS {
            return n + 1;
        }
    }
    MAX_CUTOFF
}

fn lorentz_p(t: f64, r2: f64) -> f64 {
    t / PI * (1.0 + r2).powf(-1.0 - t)
}

/// `Φ(β) = 2 |β|^t K_t(2|β|) / Γ(t)` of the Cauchy-Lorentz family.
fn lorentz_phi(t: f64, b: f64) -> Result<f64> {
    if b == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * b.powf(t) * bessel_k(t, 2.0 * b)? / gamma(t))
}

fn lorentz_radial<F: Fn(f64) -> f64 + Sync>(t: f64, weight: F) -> Result<f64> {
    let est = quad2d(
        |pt| Complex64::new(lorentz_p(t, pt.norm_sqr()) * weight(pt.norm_sqr()), 0.0),
        Domain::Radial {
            center: PhasePoint::ORIGIN,
            r_max: None,
        },
        1e-11,
    )?;
    Ok(est.value.re)
}

/// `∫ P_cl(α; t) exp(-|α|²) d²α`.
fn lorentz_vacuum_overlap(t: f64) -> Result<f64> {
    lorentz_radial(t, |r2| (-r2).exp())
}

fn lorentz_fock_diagonal(t: f64, k: usize) -> Result<f64> {
    let lnk = ln_factorial(k as u64);
    lorentz_radial(t, move |r2| {
        if r2 == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        (-r2 + k as f64 * r2.ln() - lnk).exp()
    })
}

/// `D(α₀) ρ D(α₀)†` using the Laguerre form of `<m|D|n>`.
fn displace(rho: &FockMatrix, a0: Complex64) -> FockMatrix {
    let dim = rho.dim();
    let x = a0.norm_sqr();
    let mut d = vec![Complex64::new(0.0, 0.0); dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            let (hi, lo) = (m.max(n), m.min(n));
            let ln_mag = 0.5 * (ln_factorial(lo as u64) - ln_factorial(hi as u64)) - x / 2.0;
            let lag = laguerre(lo, (hi - lo) as f64, x);
            let pow = if m >= n { a0.powu((m - n) as u32) } else { (-a0.conj()).powu((n - m) as u32) };
            d[m * dim + n] = pow * lag * ln_mag.exp();
        }
    }
    // D ρ D†
    let mut tmp = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let dik = d[i * dim + k];
            if dik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                tmp[i * dim + j] += dik * rho.get(k, j);
            }
        }
    }
    let mut out = FockMatrix::zeros(rho.cutoff());
    for i in 0..dim {
        for j in 0..dim {
            let v: Complex64 = (0..dim).map(|k| tmp[i * dim + k] * d[j * dim + k].conj()).sum();
            out.set(i, j, v);
        }
    }
    out
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn state(spec: StateSpec) -> State {
        make_state(spec).unwrap()
    }

    fn min_eigenvalue(m: &FockMatrix) -> f64 {
        let dim = m.dim();
        // Hermitian -> real symmetric 2n x 2n embedding [[A, -B], [B, A]]
        let big = DMatrix::from_fn(2 * dim, 2 * dim, |i, j| {
            let v = m.get(i % dim, j % dim);
            match (i < dim, j < dim) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        });
        big.symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"thermal","params":{"nbar":0.5}}"#;
        let spec: StateSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec, StateSpec::thermal(0.5));
        assert_eq!(serde_json::to_string(&spec).unwrap(), text);
        let mix: StateSpec = serde_json::from_str(r#"{"kind":"fock_mixture","params":{"2":0.25,"0":0.75}}"#).unwrap();
        assert_eq!(mix.kind, StateKind::FockMixture(vec![(0, 0.75), (2, 0.25)]));
        let moved: StateSpec = serde_json::from_str(r#"{"kind":"vacuum","displacement":[1.0,-0.5]}"#).unwrap();
        assert_eq!(moved.displacement, PhasePoint::new(1.0, -0.5));
    }

    #[test]
    fn rejects_bad_parameters() {
        for text in [
            r#"{"kind":"thermal","params":{"nbar":0}}"#,
            r#"{"kind":"photon_vacuum_mix","params":{"eta":1.5}}"#,
            r#"{"kind":"squeezed","params":{"xi":-1}}"#,
            r#"{"kind":"cauchy_lorentz","params":{"t":0}}"#,
            r#"{"kind":"thermal","params":{"nbar":1,"xi":2}}"#,
            r#"{"kind":"laser","params":{}}"#,
            r#"{"kind":"fock_element","params":{"m":1.5,"n":0}}"#,
            r#"{"kind":"fock_mixture","params":{"1":0.5}}"#,
        ] {
            assert!(serde_json::from_str::<StateSpec>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn thermal_diagonal_and_tail() {
        let s = state(StateSpec::thermal(0.5));
        let m = s.fock_matrix(40).unwrap();
        for k in 0..=40 {
            let want = 2.0 / 3f64.powi(k as i32 + 1);
            assert!((m.get(k, k).re - want).abs() < 1e-15 * want.max(1e-300) + 1e-300);
        }
        assert!((m.truncation_loss() - 3f64.powi(-41)).abs() < 1e-30);
        assert!(m.truncation_loss() < 1e-19);
        assert!(m.warning().is_none());
    }

    #[test]
    fn single_photon_endpoint() {
        let m = state(StateSpec::photon_vacuum_mix(1.0)).fock_matrix(5).unwrap();
        assert_eq!(m.get(1, 1).re, 1.0);
        assert_eq!(m.entries().count(), 1);
    }

    #[test]
    fn squeezed_is_even_and_normalized() {
        for xi in [0.3, 1.0, 1.4] {
            let s = state(StateSpec::squeezed(xi));
            let m = s.fock().unwrap();
            for k in (1..m.dim()).step_by(2) {
                assert_eq!(m.get(k, k).re, 0.0);
            }
            assert!((m.trace().re + m.truncation_loss() - 1.0).abs() < 1e-12);
            assert!(m.truncation_loss() < 1e-11);
        }
        // the plain default cutoff is too small for strong squeezing
        let m = state(StateSpec::squeezed(1.4)).fock_matrix(DEFAULT_CUTOFF).unwrap();
        assert!(m.truncation_loss() > 1e-6);
        assert!(m.warning().is_some());
    }

    #[test]
    fn ncl_normalizer_matches_one_dimensional_integral() {
        let s = state(StateSpec::cauchy_lorentz_ncl(3.0));
        let n = s.ncl_norm().unwrap();
        let oracle = phasespace_oracles::lorentz_vacuum(3.0);
        assert!((n - oracle).abs() < 1e-8, "{n} vs {oracle}");
        assert_eq!(s.fock_matrix(10).unwrap().get(0, 0).re, 0.0);
    }

    #[test]
    fn regular_p_values() {
        let p = state(StateSpec::spats(1.0)).regular_p(PhasePoint::ORIGIN).unwrap();
        assert!((p + 1.0 / PI).abs() < 1e-15);
        let p = state(StateSpec::thermal(0.5)).regular_p(PhasePoint::ORIGIN).unwrap();
        assert!((p - 2.0 / PI).abs() < 1e-15);
        let p = state(StateSpec::cauchy_lorentz(1.0)).regular_p(PhasePoint::new(0.6, 0.8)).unwrap();
        assert!((p - 1.0 / (4.0 * PI)).abs() < 1e-15);
        for spec in [StateSpec::fock_element(1, 1), StateSpec::squeezed(1.0), StateSpec::p_max(), StateSpec::photon_vacuum_mix(0.5)] {
            assert!(matches!(state(spec).regular_p(PhasePoint::ORIGIN), Err(Error::NoRegularForm(_))));
        }
    }

    #[test]
    fn regular_p_is_normalized() {
        for spec in [StateSpec::spats(1.0), StateSpec::thermal(0.5), StateSpec::cauchy_lorentz(3.0), StateSpec::cauchy_lorentz(1.0)] {
            let s = state(spec);
            let est = quad2d(
                |a| Complex64::new(s.regular_p(a).unwrap(), 0.0),
                Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
                1e-8,
            )
            .unwrap();
            assert!((est.value.re - 1.0).abs() < 1e-6, "{s}: {}", est.value.re);
        }
        let s = state(StateSpec::cauchy_lorentz_ncl(3.0));
        let est = quad2d(
            |a| Complex64::new(s.regular_p(a).unwrap(), 0.0),
            Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
            1e-8,
        )
        .unwrap();
        assert!((est.value.re + s.atom_weight() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn spats_has_no_vacuum() {
        for nbar in [0.5, 1.0, 2.0] {
            let s = state(StateSpec::spats(nbar));
            let est = quad2d(
                |a| Complex64::new(s.regular_p(a).unwrap() * (-a.norm_sqr()).exp(), 0.0),
                Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
                1e-10,
            )
            .unwrap();
            assert!(est.value.re.abs() < 1e-8, "{nbar}: {}", est.value.re);
        }
    }

    #[test]
    fn physical_matrices_are_positive() {
        let specs = [
            StateSpec::vacuum(),
            StateSpec::thermal(0.5),
            StateSpec::thermal(2.0),
            StateSpec::squeezed(0.8),
            StateSpec::spats(1.0),
            StateSpec::photon_vacuum_mix(0.3),
            StateSpec::cauchy_lorentz(2.0),
            StateSpec::cauchy_lorentz_ncl(2.0),
            StateSpec::fock_mixture(vec![(0, 0.5), (3, 0.5)]),
            StateSpec::squeezed(0.5).rotated(0.7),
            StateSpec::vacuum().displaced(PhasePoint::new(1.0, 0.5)),
            StateSpec::thermal(0.3).displaced(PhasePoint::new(-0.5, 0.2)),
        ];
        for spec in specs {
            let s = state(spec);
            for cutoff in [4, 20] {
                let m = s.fock_matrix(cutoff).unwrap();
                assert!(m.hermiticity_defect() < 1e-12, "{s}");
                assert!(min_eigenvalue(&m) >= -1e-10, "{s}");
                let t = m.trace().re;
                assert!(t <= 1.0 + 1e-10 && t >= 1.0 - m.truncation_loss() - 1e-9, "{s}: {t}");
            }
        }
    }

    #[test]
    fn displaced_vacuum_is_poissonian() {
        let a0 = PhasePoint::new(1.2, -0.4);
        let m = state(StateSpec::vacuum().displaced(a0)).fock_matrix(30).unwrap();
        let mean = a0.norm_sqr();
        for k in 0..10 {
            let want = (-mean + k as f64 * mean.ln() - ln_factorial(k as u64)).exp();
            assert!((m.get(k, k).re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn p_max_is_not_physical() {
        let s = state(StateSpec::p_max());
        assert!(!s.is_physical());
        assert!(s.fock().is_err());
        assert!(!state(StateSpec::fock_element(0, 2)).is_physical());
        assert!(state(StateSpec::cauchy_lorentz_ncl(1.0)).is_physical());
    }

    #[test]
    fn lorentz_phi_is_normalized_and_matches_quadrature() {
        let s = state(StateSpec::cauchy_lorentz(1.5));
        assert_eq!(s.phi_closed(Complex64::new(0.0, 0.0)).unwrap().re, 1.0);
        let beta = PhasePoint::new(0.4, -0.3);
        let est = quad2d(
            |a| Complex64::new(s.regular_p(a).unwrap(), 0.0) * crate::numerics::fourier_kernel(a, beta),
            Domain::Radial { center: PhasePoint::ORIGIN, r_max: None },
            1e-7,
        )
        .unwrap();
        let closed = s.phi_closed(beta.to_complex()).unwrap();
        assert!((est.value - closed).norm() < 1e-6, "{} vs {closed}", est.value);
    }

    proptest! {
        #[test]
        fn modifiers_commute_with_fourier(phi in -3.0f64..3.0, x0 in -1.0f64..1.0, p0 in -1.0f64..1.0, bx in -1.0f64..1.0, bp in -1.0f64..1.0) {
            // Φ' from the modified closed form equals the transform of the modified P
            let s = state(StateSpec::thermal(0.4).rotated(phi).displaced(PhasePoint::new(x0, p0)));
            let beta = PhasePoint::new(bx, bp);
            let est = quad2d(
                |a| Complex64::new(s.regular_p(a).unwrap(), 0.0) * crate::numerics::fourier_kernel(a, beta),
                Domain::Radial { center: PhasePoint::new(x0, p0), r_max: None },
                1e-8,
            ).unwrap();
            prop_assert!((est.value - s.phi_closed(beta.to_complex()).unwrap()).norm() < 1e-7);
        }
    }
}
