//! Shared fixtures for the kernel benchmarks.

use tsdyn_core::forcing::{Harmonic, PoissonSequence, TrigComponent, TrigForcing};
use tsdyn_core::{ImpulsiveModel, Matrix, TimeScaleSpec};

/// The two-dimensional reference scenario: θ = 1, ω = 8, δ = 3.
pub fn reference_model() -> ImpulsiveModel {
    let ts = TimeScaleSpec::new(1.0, 8.0, 3.0).expect("valid time scale");
    let a = Matrix::from_row_major(&[-0.4, 0.2, -0.2, -0.4]).expect("square");
    let f = TrigForcing::new(
        8.0,
        vec![
            TrigComponent { constant: 0.0, harmonics: vec![Harmonic { n: 1, cos: 1.0, sin: 0.0 }] },
            TrigComponent { constant: 0.0, harmonics: vec![Harmonic { n: 2, cos: 0.0, sin: 1.0 }] },
        ],
    )
    .expect("forcing");
    let g = PoissonSequence::logistic(3.9, 0.4, -2000, vec![1.0, 2.0]).expect("logistic");
    ImpulsiveModel::new(a, ts, f, g).expect("model")
}
