//! Fixtures shared by the benchmarks.

use milne::{PotentialSpec, Problem, SpatialGrid};

/// Harmonic reference problem.
pub fn harmonic() -> Problem {
    Problem::harmonic_reference()
}

/// Pure quartic well on `[-4, 4]`.
pub fn quartic() -> Problem {
    let potential = PotentialSpec::polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0, 1.0).expect("valid polynomial");
    Problem::new(potential, SpatialGrid::new(-4.0, 4.0, 4001).expect("valid grid")).expect("single well")
}
