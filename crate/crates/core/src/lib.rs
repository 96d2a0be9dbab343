//! Smooth max-mutual information `I^ε_max(ρ_AB)` of bipartite quantum states.
//!
//! The quantity is `log₂ λ_min`, where `λ_min` is the smallest `λ` such that
//! `λ·ρ_A⊗ρ̃_B − ρ̃_AB ⪰ 0` for some `ρ̃_AB` with fidelity at least `1 − ε²`
//! to `ρ_AB`. The constraint is bilinear in `(λ, ρ̃)`, so [`seesaw`]
//! alternates two semidefinite programs from [`programs`]: one fixes the
//! state and minimizes `λ`, the other fixes `λ` and searches the ball for a
//! state with spectral slack. [`oracle`] holds independent validators.
//!
//! The operator algebra ([`linalg`], [`measures`], [`state`]) is generic over
//! [`Real`] (`f32` or `f64`); the solver layer works in `f64`. The aliases
//! below name the `f64` instantiations used by the rest of the crate.

pub mod conic;
pub mod error;
pub mod generators;
pub mod json;
pub mod linalg;
pub mod measures;
pub mod oracle;
pub mod programs;
pub mod scalar;
pub mod seesaw;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{kron, min_eigenvalue, Subsystem};
pub use measures::{dmax_closed_form, fidelity, sine_distance};
pub use scalar::Real;

pub type ComplexMatrix = linalg::CMatrix<f64>;
pub type BipartiteState = state::BipartiteState<f64>;
pub type Tolerances = state::Tolerances<f64>;
pub type SmoothingBall = state::SmoothingBall<f64>;
