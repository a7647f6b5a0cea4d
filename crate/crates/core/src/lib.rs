//! Phase-space calculus for the Glauber-Sudarshan `P` representation of a
//! single bosonic mode.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: complex-amplitude calculus, the phase-plane Fourier
//!   convention, 2-D quadrature and the complex error function.
//! * [`states`]: the state catalog (thermal, squeezed, photon-added thermal,
//!   Cauchy-Lorentz families, the maximally singular `P_max`, ...).
//! * [`charfn`]: characteristic functions and the quantum / classical bounds.
//! * [`deltaseries`]: formal series in derivatives of the Dirac delta and
//!   their pairing with test functions.
//! * [`filters`]: regularised (filtered) quasiprobabilities.
//! * [`witness`]: nonclassicality criteria and the admissible test-function
//!   class.

pub mod charfn;
pub mod deltaseries;
mod error;
pub mod filters;
pub mod numerics;
pub mod states;
pub mod witness;

pub use error::{Error, Result, Warning};
pub use num_complex::Complex64;
