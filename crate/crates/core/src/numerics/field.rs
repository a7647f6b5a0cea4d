use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PhaseGrid, PhasePoint};
use crate::{Error, Result};

/// Which plane a field lives on: amplitudes `α` or Fourier variables `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alpha,
    Beta,
}

type Evaluator = Arc<dyn Fn(PhasePoint) -> Complex64 + Send + Sync>;

/// A complex function on the phase plane, as a closed-form evaluator,
/// a sampled array, or both.
#[derive(Clone)]
pub struct PhaseField {
    side: Side,
    closed: Option<Evaluator>,
    sampled: Option<(PhaseGrid, Arc<[Complex64]>)>,
}

impl fmt::Debug for PhaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseField")
            .field("side", &self.side)
            .field("closed", &self.closed.is_some())
            .field("grid", &self.sampled.as_ref().map(|s| s.0))
            .finish()
    }
}

impl PhaseField {
    pub fn closed<F>(side: Side, f: F) -> Self
    where
        F: Fn(PhasePoint) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            side,
            closed: Some(Arc::new(f)),
            sampled: None,
        }
    }

    /// Values in row-major order: flat index `i * N + j` for node `(x_i, p_j)`.
    pub fn sampled(side: Side, grid: PhaseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "sampled field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            side,
            closed: None,
            sampled: Some((grid, values.into())),
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> Option<&PhaseGrid> {
        self.sampled.as_ref().map(|s| &s.0)
    }

    pub fn values(&self) -> Option<&[Complex64]> {
        self.sampled.as_ref().map(|s| &s.1[..])
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    /// Closed-form value, or the sampled value when `pt` is a grid node.
    pub fn eval(&self, pt: PhasePoint) -> Option<Complex64> {
        if let Some(f) = &self.closed {
            return Some(f(pt));
        }
        let (grid, values) = self.sampled.as_ref()?;
        let h = grid.spacing();
        let half = (grid.resolution() - 1) as f64 / 2.0;
        let i = pt.x / h + half;
        let j = pt.p / h + half;
        let (ir, jr) = (i.round(), j.round());
        let n = grid.resolution() as f64;
        if (i - ir).abs() > 1e-9 || (j - jr).abs() > 1e-9 || ir < 0.0 || jr < 0.0 || ir >= n || jr >= n {
            return None;
        }
        Some(values[ir as usize * grid.resolution() + jr as usize])
    }

    /// Evaluates the closed form on every node of `grid` (in parallel) and
    /// keeps both representations.
    pub fn sample(&self, grid: &PhaseGrid) -> Result<Self> {
        let f = self
            .closed
            .as_ref()
            .ok_or_else(|| Error::Unsupported("resampling a field without a closed form".into()))?;
        let values: Vec<Complex64> = (0..grid.len()).into_par_iter().map(|k| f(grid.point_at(k))).collect();
        Ok(Self {
            side: self.side,
            closed: self.closed.clone(),
            sampled: Some((*grid, values.into())),
        })
    }

    /// The sampled array on `grid`, sampling the closed form if needed.
    pub fn samples_on(&self, grid: &PhaseGrid) -> Result<Arc<[Complex64]>> {
        match &self.sampled {
            Some((g, v)) if g == grid => Ok(v.clone()),
            _ => Ok(self.sample(grid)?.sampled.expect("just sampled").1),
        }
    }

    /// Largest `|Im f|` over the samples.
    pub fn imaginary_residue(&self) -> Option<f64> {
        self.values().map(|v| v.iter().fold(0.0f64, |m, z| m.max(z.im.abs())))
    }

    /// Minimum of `Re f` over the samples and its node; ties resolve to the
    /// lexicographically smallest `(x, p)`.
    pub fn min_real(&self) -> Option<(f64, PhasePoint)> {
        let (grid, values) = self.sampled.as_ref()?;
        let mut best = (f64::INFINITY, 0usize);
        for (k, z) in values.iter().enumerate() {
            if z.re < best.0 {
                best = (z.re, k);
            }
        }
        Some((best.0, grid.point_at(best.1)))
    }

    /// Writes `x,p,re,im` rows (with the header) in row-major order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let (grid, values) = self
            .sampled
            .as_ref()
            .ok_or_else(|| Error::Unsupported("writing a field that was never sampled".into()))?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "p", "re", "im"])?;
        for (k, z) in values.iter().enumerate() {
            let pt = grid.point_at(k);
            w.write_record([fmt_num(pt.x), fmt_num(pt.p), fmt_num(z.re), fmt_num(z.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout produced by [`write_csv`](Self::write_csv).
    /// Lines starting with `#` are skipped. The grid is inferred from the
    /// coordinates and must be square, symmetric and row-major.
    pub fn read_csv<R: Read>(side: Side, reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parameter(format!("bad CSV field {i} in {rec:?}")))
            };
            xs.push((num(0)?, num(1)?));
            values.push(Complex64::new(num(2)?, num(3)?));
        }
        let n = (values.len() as f64).sqrt().round() as usize;
        if n < 2 || n * n != values.len() {
            return Err(Error::Parameter(format!("{} rows do not form a square grid", values.len())));
        }
        let extent = xs[n * n - 1].0;
        let grid = PhaseGrid::new(extent, n)?;
        let tol = 1e-9 * extent.max(1.0);
        for (k, &(x, p)) in xs.iter().enumerate() {
            let pt = grid.point_at(k);
            if (pt.x - x).abs() > tol || (pt.p - p).abs() > tol {
                return Err(Error::Parameter(format!("row {k} at ({x}, {p}) is off the inferred grid")));
            }
        }
        Self::sampled(side, grid, values)
    }
}

// Shortest round-tripping representation, independent of locale.
fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:?}")
    }
}
