use std::path::Path;

use crate::domain::{evaluate_energy_slice, load_config, EnergySlice, PotentialSpec, SpatialGrid};
use crate::error::{MilneError, Result};
use crate::schrodinger::{integrate_regular, rescale_basis, BasisPair, LinearSolution, Side};
use crate::spectral::{find_eigenvalues, QuantumNumberMap};

/// A potential on a grid: everything needed to build slices and basis pairs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub potential: PotentialSpec,
    pub grid: SpatialGrid,
}

impl Problem {
    pub fn new(potential: PotentialSpec, grid: SpatialGrid) -> Result<Self> {
        potential.validate_on(&grid)?;
        Ok(Self { potential, grid })
    }

    /// Harmonic oscillator `m = omega = hbar = 1` on `[-12, 12]` with 4001 points.
    pub fn harmonic_reference() -> Self {
        Self {
            potential: PotentialSpec::harmonic(1.0, 1.0, 1.0).expect("valid harmonic potential"),
            grid: SpatialGrid::new(-12.0, 12.0, 4001).expect("valid grid"),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (potential, grid) = load_config(path)?;
        Self::new(potential, grid).map_err(|e| MilneError::Config(e.to_string()))
    }

    pub fn with_grid(&self, grid: SpatialGrid) -> Result<Self> {
        Self::new(self.potential.clone(), grid)
    }

    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(self.potential.with_hbar(hbar)?, self.grid)
    }

    pub fn hbar(&self) -> f64 {
        self.potential.hbar
    }

    pub fn slice(&self, energy: f64) -> Result<EnergySlice> {
        evaluate_energy_slice(&self.potential, &self.grid, energy)
    }

    pub fn regular_solutions(&self, energy: f64) -> Result<(EnergySlice, LinearSolution, LinearSolution)> {
        let slice = self.slice(energy)?;
        let u1 = integrate_regular(&slice, Side::Left)?;
        let u2 = integrate_regular(&slice, Side::Right)?;
        Ok((slice, u1, u2))
    }

    /// Pair normalized to unit in-well amplitudes, without Wronskian rescaling.
    pub fn unscaled_basis(&self, energy: f64, invariant: f64) -> Result<BasisPair> {
        let (slice, u1, u2) = self.regular_solutions(energy)?;
        BasisPair::unscaled(&slice, u1, u2, invariant)
    }

    /// Pair rescaled to `W = 2 I sin(pi n(E))`.
    pub fn basis(&self, energy: f64, invariant: f64, map: &QuantumNumberMap) -> Result<BasisPair> {
        let n = map.quantum_number(energy)?;
        self.basis_with_n(energy, invariant, n)
    }

    pub fn basis_with_n(&self, energy: f64, invariant: f64, n_of_e: f64) -> Result<BasisPair> {
        let (slice, u1, u2) = self.regular_solutions(energy)?;
        rescale_basis(u1, u2, &slice, invariant, n_of_e)
    }

    /// Analytic continuation for the harmonic oscillator, otherwise eigenvalues up to `n_max`.
    pub fn quantum_number_map(&self, n_max: usize) -> Result<QuantumNumberMap> {
        match self.potential.omega() {
            Some(omega) => Ok(QuantumNumberMap::analytic_harmonic(omega, self.hbar())),
            None => find_eigenvalues(self, n_max),
        }
    }
}
