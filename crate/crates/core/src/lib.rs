//! Amplitude-phase decomposition of one-dimensional bound-state problems.

pub mod checks;
pub mod domain;
pub mod ermakov;
pub mod error;
pub mod numerics;
pub mod problem;
pub mod schrodinger;
pub mod semiclassical;
pub mod spectral;

pub use domain::{EnergySlice, PotentialKind, PotentialSpec, SpatialGrid};
pub use ermakov::{AmplitudePhase, CoefficientMatrix, ErmakovParams};
pub use error::{MilneError, Result};
pub use problem::Problem;
pub use schrodinger::{BasisPair, GFunction, LinearSolution};
pub use spectral::{AccumulatedPhase, QuantumNumberMap};
