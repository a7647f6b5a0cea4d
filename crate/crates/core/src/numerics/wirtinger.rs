use std::collections::BTreeMap;

use num_complex::Complex64;

use super::PhasePoint;

/// Polynomial `Σ c_{m,n} α^m α*^n` with closed-form Wirtinger derivatives.
///
/// `α` and `α*` are independent variables for differentiation:
/// `∂_α α^m α*^n = m α^{m-1} α*^n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WirtingerPoly {
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl WirtingerPoly {
    pub fn monomial(m: u32, n: u32, c: Complex64) -> Self {
        let mut p = Self::default();
        p.add_term(m, n, c);
        p
    }

    /// `|α|^2 = α α*`.
    pub fn abs2() -> Self {
        Self::monomial(1, 1, Complex64::new(1.0, 0.0))
    }

    pub fn add_term(&mut self, m: u32, n: u32, c: Complex64) {
        let e = self.terms.entry((m, n)).or_default();
        *e += c;
        if *e == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(m, n));
        }
    }

    pub fn coeff(&self, m: u32, n: u32) -> Complex64 {
        self.terms.get(&(m, n)).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn d_alpha(&self) -> Self {
        let mut out = Self::default();
        for (&(m, n), &c) in &self.terms {
            if m > 0 {
                out.add_term(m - 1, n, c * m as f64);
            }
        }
        out
    }

    pub fn d_alpha_conj(&self) -> Self {
        let mut out = Self::default();
        for (&(m, n), &c) in &self.terms {
            if n > 0 {
                out.add_term(m, n - 1, c * n as f64);
            }
        }
        out
    }

    pub fn eval(&self, pt: PhasePoint) -> Complex64 {
        let a = pt.to_complex();
        let ac = a.conj();
        self.terms
            .iter()
            .map(|(&(m, n), &c)| c * a.powu(m) * ac.powu(n))
            .sum()
    }

    /// `[∂_α^m ∂_α*^n P]` at the origin, i.e. `m! n! c_{m,n}`.
    pub fn derivative_at_origin(&self, m: u32, n: u32) -> Complex64 {
        let f = |k: u32| (1..=k).map(f64::from).product::<f64>();
        self.coeff(m, n) * f(m) * f(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_abs2() {
        let p = WirtingerPoly::abs2();
        assert_eq!(p.d_alpha(), WirtingerPoly::monomial(0, 1, Complex64::new(1.0, 0.0)));
        assert_eq!(p.d_alpha_conj(), WirtingerPoly::monomial(1, 0, Complex64::new(1.0, 0.0)));
        let pt = PhasePoint::new(0.4, -1.1);
        assert_eq!(p.d_alpha().eval(pt), pt.to_complex().conj());
        assert_eq!(p.d_alpha_conj().eval(pt), pt.to_complex());
    }

    #[test]
    fn mixed_derivative_at_origin() {
        let mut p = WirtingerPoly::abs2();
        p.add_term(2, 1, Complex64::new(0.5, 0.0));
        assert_eq!(p.derivative_at_origin(2, 1), Complex64::new(1.0, 0.0));
        assert_eq!(p.d_alpha().d_alpha().d_alpha_conj().coeff(0, 0), Complex64::new(1.0, 0.0));
    }
}
