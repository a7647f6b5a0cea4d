//! Reference computations that share no code with `phasespace-core`.
//!
//! Everything here favours transparency over speed: dense truncated
//! operators, adaptive Simpson quadrature and plain series summation.

use num_complex::Complex64;

/// `ln n!` by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0` (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Dense truncated annihilation operator on `cutoff` Fock states.
pub struct Truncated {
    dim: usize,
    // sqrt(k) on the superdiagonal: a|k> = sqrt(k)|k-1>
    sqrt: Vec<f64>,
}

impl Truncated {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sqrt: (0..dim).map(|k| (k as f64).sqrt()).collect(),
        }
    }

    fn annihilate(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for k in 1..self.dim {
            out[k - 1] = v[k] * self.sqrt[k];
        }
        out
    }

    /// `exp(c a) |m>` summed until the nilpotent series terminates.
    pub fn exp_annihilation(&self, c: Complex64, m: usize) -> Vec<Complex64> {
        let mut term = vec![Complex64::new(0.0, 0.0); self.dim];
        term[m] = Complex64::new(1.0, 0.0);
        let mut sum = term.clone();
        for k in 1..self.dim {
            term = self.annihilate(&term);
            for t in term.iter_mut() {
                *t *= c / k as f64;
            }
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
        }
        sum
    }

    /// `<n| exp(β a†) exp(−β* a) |m>`.
    pub fn normal_displacement(&self, beta: Complex64, m: usize, n: usize) -> Complex64 {
        let right = self.exp_annihilation(-beta.conj(), m);
        // <n| exp(β a†) = (exp(β* a)|n>)†
        let left = self.exp_annihilation(beta.conj(), n);
        left.iter().zip(&right).map(|(l, r)| l.conj() * r).sum()
    }
}

/// Adaptive Simpson quadrature of a real function.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `∫_0^∞ f` through `u = s / (1 - s)`, split into panels so the adaptive
/// rule sees the decay.
pub fn simpson_to_infinity<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let u = s / (1.0 - s);
        let v = f(u) / ((1.0 - s) * (1.0 - s));
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let edges = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];
    edges.windows(2).map(|w| simpson(&g, w[0], w[1], tol / 8.0)).sum()
}

/// Maclaurin series of `erf` summed until the terms vanish.
pub fn erf_series(z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut n = 0u32;
    loop {
        let term = z.powu(2 * n + 1) * (-1.0f64).powi(n as i32) / ((2 * n + 1) as f64 * ln_factorial(n as u64).exp());
        sum += term;
        if n > 5 && term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        n += 1;
        if n > 400 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// `(2/π) Re ∫_0^1 exp(−g z² + 2i y z) (1 − z) dz`.
pub fn t_integral(y: f64, g: f64) -> f64 {
    let f = |z: f64| (-g * z * z).exp() * (2.0 * y * z).cos() * (1.0 - z);
    // panels of at most a quarter period keep the Simpson estimate honest
    let panels = ((y.abs() * 2.0).ceil() as usize).max(4);
    let h = 1.0 / panels as f64;
    let s: f64 = (0..panels).map(|k| simpson(&f, k as f64 * h, (k + 1) as f64 * h, 1e-15)).sum();
    2.0 / std::f64::consts::PI * s
}

/// Overlap area of the unit box `[-1/2, 1/2]^2` with its copy shifted by
/// `(sx, sy)`, integrated piecewise between the indicator's breakpoints.
pub fn box_overlap(sx: f64, sy: f64) -> f64 {
    let axis = |s: f64| {
        let mut pts = [-0.5, 0.5, -0.5 - s, 0.5 - s];
        pts.sort_by(f64::total_cmp);
        let inside = |u: f64| (-0.5..=0.5).contains(&u) && (-0.5..=0.5).contains(&(u + s));
        pts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                if inside(mid) {
                    w[1] - w[0]
                } else {
                    0.0
                }
            })
            .sum::<f64>()
    };
    axis(sx) * axis(sy)
}

/// `t B(n + 1, t − n)`, the `n`-th normal moment of the Cauchy-Lorentz
/// family with index `t > n`.
pub fn lorentz_moment(t: f64, n: u32) -> f64 {
    let n = n as f64;
    t * (ln_gamma(n + 1.0) + ln_gamma(t - n) - ln_gamma(t + 1.0)).exp()
}

/// `t ∫_0^∞ exp(−u) (1 + u)^{−t−1} du`, the vacuum overlap of the
/// Cauchy-Lorentz family.
pub fn lorentz_vacuum(t: f64) -> f64 {
    t * simpson_to_infinity(&|u: f64| (-u).exp() * (1.0 + u).powf(-t - 1.0), 1e-14)
}

/// Central differences with one Richardson step, for Wirtinger derivatives
/// `∂_α = (∂_x − i ∂_p)/2` and `∂_α* = (∂_x + i ∂_p)/2`.
pub fn wirtinger_fd<F: Fn(f64, f64) -> Complex64>(f: &F, x: f64, p: f64) -> (Complex64, Complex64) {
    let h = 1e-4;
    let d = |hx: f64, hp: f64, step: f64| (f(x + hx * step, p + hp * step) - f(x - hx * step, p - hp * step)) / (2.0 * step);
    let rich = |hx: f64, hp: f64| (4.0 * d(hx, hp, h / 2.0) - d(hx, hp, h)) / 3.0;
    let dx = rich(1.0, 0.0);
    let dp = rich(0.0, 1.0);
    let i = Complex64::new(0.0, 1.0);
    ((dx - i * dp) / 2.0, (dx + i * dp) / 2.0)
}
