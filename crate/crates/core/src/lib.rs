//! Radial ground states of the quasilinear Schrödinger equation
//!
//! ```text
//! -Δw + V(|x|) w - w Δ(w²) = K(|x|) g(w)   in R^N, N >= 3,
//! ```
//!
//! computed through the dual change of variables `w = f(u)` and a numerical
//! mountain-pass method, together with exact-rational admissibility checks
//! for the exponents of `g` given power-type envelopes of `K / (r^α V^β)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`transform`]: the change of variables `f` and its inverse.
//! * [`exponents`]: exponent formulas and the admissibility report.
//! * [`mesh`]: geometric radial mesh, weighted quadrature and the norms of
//!   `D^{1,2}_r` and the Orlicz-Sobolev space `E`.
//! * [`potential`] and [`nonlinearity`]: the catalog of `V`, `K` and `g`.
//! * [`energy`]: the dual functional `I`, `J` and their derivatives.
//! * [`mountain_pass`]: endpoint search, ρ-certificate, path deformation
//!   and Newton refinement.
//! * [`verify`]: residuals, weak-form defects and embedding rate fits.

pub mod energy;
pub mod error;
pub mod exponents;
pub mod linalg;
pub mod mesh;
pub mod mountain_pass;
pub mod nonlinearity;
pub mod potential;
pub mod transform;
pub mod verify;

pub use energy::DualFunctional;
pub use error::{DomainError, EvalError, SolveError};
pub use exponents::{AdmissibilityReport, Envelope, Rational};
pub use mesh::{RadialFunction, RadialMesh};
pub use nonlinearity::{Nonlinearity, NonlinearityKind};
pub use potential::Potential;
pub use transform::DualTransform;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dual-transform.md")]
    mod dual_transform {}
    #[doc = include_str!("../../../book/src/exponents.md")]
    mod exponents {}
    #[doc = include_str!("../../../book/src/mesh.md")]
    mod mesh {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/mountain-pass.md")]
    mod mountain_pass {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
