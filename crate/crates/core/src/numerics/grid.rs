use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point `alpha = x + i p` of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, p: 0.0 };

    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    /// Recovers the quadratures from `alpha` and `alpha*`:
    /// `x = (alpha + alpha*) / 2`, `p = (alpha - alpha*) / (2i)`.
    pub fn from_complex(alpha: Complex64) -> Self {
        let conj = alpha.conj();
        let x = (alpha + conj) / 2.0;
        let p = (alpha - conj) / Complex64::new(0.0, 2.0);
        Self { x: x.re, p: p.re }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.p)
    }

    pub fn conj(self) -> Self {
        Self { x: self.x, p: -self.p }
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.p * self.p
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.p)
    }
}

impl From<Complex64> for PhasePoint {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl From<PhasePoint> for Complex64 {
    fn from(pt: PhasePoint) -> Self {
        pt.to_complex()
    }
}

/// Uniform Cartesian grid on `[-L, L]^2` with `N` nodes per axis.
///
/// Nodes are symmetric about the origin; for odd `N` the origin is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    extent: f64,
    resolution: usize,
}

impl PhaseGrid {
    pub const DEFAULT_EXTENT: f64 = 6.0;
    pub const DEFAULT_RESOLUTION: usize = 257;

    pub fn new(extent: f64, resolution: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Parameter(format!("grid extent must be positive, got {extent}")));
        }
        if resolution < 2 {
            return Err(Error::Parameter(format!("grid needs at least 2 nodes per axis, got {resolution}")));
        }
        Ok(Self { extent, resolution })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.resolution - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        // exact symmetry: coord(i) == -coord(N-1-i)
        let half = (self.resolution - 1) as f64 / 2.0;
        (i as f64 - half) * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.resolution).map(|i| self.coord(i)).collect()
    }

    /// Node with x-index `i` and p-index `j`. Flat index is `i * N + j`.
    pub fn point(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint::new(self.coord(i), self.coord(j))
    }

    pub fn point_at(&self, flat: usize) -> PhasePoint {
        self.point(flat / self.resolution, flat % self.resolution)
    }

    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        (0..self.len()).map(move |k| self.point_at(k))
    }

    /// Trapezoid weight of node `i` along one axis.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.resolution {
            0.5 * h
        } else {
            h
        }
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let (i, j) = (flat / self.resolution, flat % self.resolution);
        let last = self.resolution - 1;
        i == 0 || j == 0 || i == last || j == last
    }

    /// Largest `|Re beta|`, `|Im beta|` the kernel `exp(2i(...))` can resolve
    /// on this grid without aliasing.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / (2.0 * self.spacing())
    }
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self {
            extent: Self::DEFAULT_EXTENT,
            resolution: Self::DEFAULT_RESOLUTION,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_reconstruction_is_exact() {
        let alpha = Complex64::new(0.3, -1.7);
        let pt = PhasePoint::from_complex(alpha);
        assert_eq!(pt.x, 0.3);
        assert_eq!(pt.p, -1.7);
        assert_eq!(pt.to_complex(), alpha);
        assert_eq!(pt.conj().to_complex(), alpha.conj());
    }

    #[test]
    fn default_grid_has_origin_node() {
        let g = PhaseGrid::default();
        assert_eq!(g.resolution() % 2, 1);
        assert_eq!(g.coord(128), 0.0);
        assert_eq!(g.coord(0), -6.0);
        assert_eq!(g.coord(256), 6.0);
        for i in 0..g.resolution() {
            assert_eq!(g.coord(i), -g.coord(g.resolution() - 1 - i));
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(PhaseGrid::new(0.0, 11).is_err());
        assert!(PhaseGrid::new(1.0, 1).is_err());
    }
}
