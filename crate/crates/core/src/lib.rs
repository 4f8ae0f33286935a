//! Linear dynamic equations y^Δ = Ay + f(t) + g(t) on the periodic time scale
//! T₀ = ⋃ₖ [θ₂ₖ₋₁, θ₂ₖ], their reduction to impulsive differential equations,
//! and numerical verification of the bounded solution's periodic plus
//! Poisson-stable structure.

pub mod analysis;
pub mod dynamic;
pub mod error;
pub mod forcing;
pub mod impulsive;
pub mod matrixkit;
mod ode;
pub mod timescale;

pub use error::{Error, Result};
pub use forcing::{
    Harmonic, PoissonSequence, PoissonSequenceSpec, ReturnEntry, ReturnTimeSet, TrigComponent,
    TrigForcing,
};
pub use impulsive::{BoundedSolution, ImpulsiveModel, Part, StabilityCert, Trajectory};
pub use matrixkit::Matrix;
pub use timescale::TimeScaleSpec;
pub use analysis::{ReportKind, VerificationReport};
pub use dynamic::{Branch, Provenance, TimeScaleSolution};
