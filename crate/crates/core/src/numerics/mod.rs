//! Complex-amplitude calculus on the phase plane.
//!
//! A coherent amplitude is written `alpha = x + i p`. Functions of `alpha`
//! are treated as functions of the two real quadratures, with the Wirtinger
//! derivatives `d/dalpha = (d/dx - i d/dp) / 2` and
//! `d/dalpha* = (d/dx + i d/dp) / 2`.
//!
//! The Fourier convention used everywhere in the crate lives in
//! [`fourier`]; nothing else re-derives its signs.

mod erf;
mod field;
pub mod fourier;
mod grid;
pub mod quad;
pub mod special;
mod wirtinger;

pub use erf::{erf_cplx, erfc_cplx, faddeeva, ERF_SERIES_STRIP, ERF_STABLE_RANGE};
pub use field::{PhaseField, Side};
pub use fourier::{fourier_forward, fourier_forward_at, fourier_inverse, fourier_inverse_at, fourier_kernel};
pub use grid::{PhaseGrid, PhasePoint};
pub use quad::{quad2d, Domain, Estimate};
pub use wirtinger::WirtingerPoly;
