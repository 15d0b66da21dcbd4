//! Eigenvalues, the quantum-number continuation `n(E)`, `c(E)`, accumulated
//! phase and normalization relations.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::domain::build_energy_slice;
use crate::ermakov::{self, ErmakovParams};
use crate::error::{MilneError, Result};
use crate::numerics::{self, MonotoneCubic};
use crate::problem::Problem;
use crate::schrodinger::{integrate_regular, BasisPair, Side};

#[derive(Debug, Clone)]
pub enum MapKind {
    AnalyticHarmonic { omega: f64, hbar: f64 },
    Interpolated(Option<MonotoneCubic>),
}

/// Eigenvalue list with a monotone continuation `n(E)`.
#[derive(Debug, Clone)]
pub struct QuantumNumberMap {
    pub eigenvalues: Vec<(usize, f64)>,
    pub kind: MapKind,
}

impl QuantumNumberMap {
    /// `n(E) = E / (hbar omega) - 1/2`
    pub fn analytic_harmonic(omega: f64, hbar: f64) -> Self {
        let eigenvalues = (0..=10).map(|n| (n, hbar * omega * (n as f64 + 0.5))).collect();
        Self { eigenvalues, kind: MapKind::AnalyticHarmonic { omega, hbar } }
    }

    /// Monotone cubic through `(E_n, n)`.
    pub fn interpolated(eigenvalues: Vec<(usize, f64)>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(MilneError::InvalidParameter("no eigenvalues".into()));
        }
        let table = if eigenvalues.len() >= 2 {
            let xs = eigenvalues.iter().map(|e| e.1).collect();
            let ys = eigenvalues.iter().map(|e| e.0 as f64).collect();
            Some(MonotoneCubic::new(xs, ys)?)
        } else {
            None
        };
        Ok(Self { eigenvalues, kind: MapKind::Interpolated(table) })
    }

    fn covered(&self, energy: f64) -> Result<()> {
        let lo = self.eigenvalues[0].1;
        let hi = self.eigenvalues[self.eigenvalues.len() - 1].1;
        if energy < lo || energy > hi {
            return Err(MilneError::OutOfRange { energy, lo, hi });
        }
        Ok(())
    }

    pub fn quantum_number(&self, energy: f64) -> Result<f64> {
        match &self.kind {
            MapKind::AnalyticHarmonic { omega, hbar } => Ok(energy / (hbar * omega) - 0.5),
            MapKind::Interpolated(table) => {
                self.covered(energy)?;
                if let Some(&(n, _)) = self.eigenvalues.iter().find(|e| e.1 == energy) {
                    return Ok(n as f64);
                }
                Ok(table.as_ref().expect("covered range has two eigenvalues").eval(energy))
            }
        }
    }

    /// `dn/dE`
    pub fn derivative(&self, energy: f64) -> Result<f64> {
        match &self.kind {
            MapKind::AnalyticHarmonic { omega, hbar } => Ok(1.0 / (hbar * omega)),
            MapKind::Interpolated(table) => {
                self.covered(energy)?;
                table
                    .as_ref()
                    .map(|t| t.derivative(energy))
                    .ok_or(MilneError::OutOfRange { energy, lo: energy, hi: energy })
            }
        }
    }

    /// Energy with `n(E) = n`, by bisection on the continuation.
    pub fn energy_for(&self, n: f64) -> Result<f64> {
        match &self.kind {
            MapKind::AnalyticHarmonic { omega, hbar } => Ok(hbar * omega * (n + 0.5)),
            MapKind::Interpolated(_) => {
                let lo = self.eigenvalues[0].1;
                let hi = self.eigenvalues[self.eigenvalues.len() - 1].1;
                numerics::bisect(|e| self.quantum_number(e).unwrap_or(f64::NAN) - n, lo, hi, 1e-14 * hi.abs())
                    .ok_or(MilneError::OutOfRange { energy: n, lo, hi })
            }
        }
    }
}

/// Number of sign changes of the solution regular on the right, over the whole grid.
fn sturm_count(problem: &Problem, energy: f64) -> Result<usize> {
    match build_energy_slice(&problem.potential, &problem.grid, energy) {
        Ok(slice) => Ok(integrate_regular(&slice, Side::Right)?.total_zeros()),
        Err(MilneError::DegenerateTurningPoints(_)) => Ok(0),
        Err(e) => Err(e),
    }
}

fn matching_wronskian(problem: &Problem, energy: f64) -> f64 {
    problem.unscaled_basis(energy, 1.0).map(|p| p.wronskian).unwrap_or(f64::NAN)
}

fn eigenvalue(problem: &Problem, n: usize, window: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = window;
    if sturm_count(problem, hi)? <= n {
        return Err(MilneError::BracketNotFound(n));
    }
    while hi - lo > 1e-4 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if sturm_count(problem, mid)? <= n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tol = 1e-13 * hi.abs().max(1.0);
    numerics::bisect(|e| matching_wronskian(problem, e), lo, hi, tol).ok_or(MilneError::BracketNotFound(n))
}

/// Eigenvalues `E_0..=E_{n_max}` by Sturm-count bracketing and Wronskian bisection.
pub fn find_eigenvalues(problem: &Problem, n_max: usize) -> Result<QuantumNumberMap> {
    let v = problem.potential.values(&problem.grid);
    let floor = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let top = v[0].min(v[v.len() - 1]);
    let window = (floor, top - 1e-9 * (top - floor));
    let found: Result<Vec<(usize, f64)>> =
        (0..=n_max).into_par_iter().map(|n| eigenvalue(problem, n, window).map(|e| (n, e))).collect();
    QuantumNumberMap::interpolated(found?)
}

pub fn quantum_number(map: &QuantumNumberMap, energy: f64) -> Result<f64> {
    map.quantum_number(energy)
}

/// `c(E) = -cot(pi n(E)) / 2I`, clamped to `|c| <= C_MAX`.
pub fn c_of_energy(invariant: f64, map: &QuantumNumberMap, energy: f64) -> Result<f64> {
    let n = map.quantum_number(energy)?;
    c_of_quantum_number(invariant, n)
}

pub fn c_of_quantum_number(invariant: f64, n: f64) -> Result<f64> {
    let s = (PI * n).sin();
    if s.abs() < 1e-8 {
        return Err(MilneError::EigenvalueDegenerate(n));
    }
    let c = -(PI * n).cos() / (s * 2.0 * invariant);
    Ok(c.clamp(-ermakov::C_MAX, ermakov::C_MAX))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulatedPhase {
    pub energy: f64,
    pub phi_total: f64,
    pub c_used: f64,
    /// Phase added beyond the right edge of the trimmed interior.
    pub tail_correction: f64,
}

/// Pair used for phase measurements: rescaled when `n(E)` allows it, otherwise unscaled.
pub fn measurement_basis(problem: &Problem, map: &QuantumNumberMap, energy: f64, invariant: f64) -> Result<BasisPair> {
    let n = map.quantum_number(energy)?;
    if (PI * n).sin().abs() < 1e-8 {
        problem.unscaled_basis(energy, invariant)
    } else {
        problem.basis_with_n(energy, invariant, n)
    }
}

/// Phase accumulated from the left grid edge to the right trim boundary, plus the tail estimate.
pub fn accumulated_phase_of(pair: &BasisPair, params: &ErmakovParams) -> Result<AccumulatedPhase> {
    let closed = ermakov::closed_form_phase(pair, params.c);
    let alpha = ermakov::amplitude(pair, params)?;
    let n = alpha.len();
    let d: Vec<f64> = alpha[n - 3..].iter().map(|a| 1.0 / (a * a)).collect();
    let slope = (d[0] / d[2]).ln() / (2.0 * pair.h());
    let tail = if slope > 0.0 && slope.is_finite() { d[2] / slope } else { 0.0 };
    let phi = closed[pair.trim.end - 1] + tail;
    if !(phi > 0.0) {
        return Err(MilneError::NonFinite(format!("accumulated phase {phi}")));
    }
    Ok(AccumulatedPhase { energy: pair.slice.energy, phi_total: phi, c_used: params.c, tail_correction: tail })
}

pub fn accumulated_phase(
    problem: &Problem,
    map: &QuantumNumberMap,
    energy: f64,
    invariant: f64,
    c: f64,
) -> Result<AccumulatedPhase> {
    let pair = measurement_basis(problem, map, energy, invariant)?;
    accumulated_phase_of(&pair, &ErmakovParams::new(invariant, c)?)
}

/// Accumulated phase with `c = c(E)`.
pub fn accumulated_phase_smooth(problem: &Problem, map: &QuantumNumberMap, energy: f64, invariant: f64) -> Result<AccumulatedPhase> {
    let c = c_of_energy(invariant, map, energy)?;
    accumulated_phase(problem, map, energy, invariant, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

impl CheckItem {
    pub fn relative_error(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs()
    }

    pub fn pass(&self) -> bool {
        self.relative_error() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    pub level: usize,
    pub eigenvalue: f64,
    /// `1 / dphi(s2)/dE` scaled by `m/hbar^2`: the `I` for which the eigenfunction has unit norm.
    pub unity_invariant: f64,
    pub items: Vec<CheckItem>,
}

/// `int lambda dx` over the allowed range, integrated in the angle variable.
pub fn de_broglie_integral(problem: &Problem, energy: f64) -> Result<f64> {
    let slice = problem.slice(energy)?;
    let half = 0.5 * (slice.t2 - slice.t1);
    let two_pi_hbar = 2.0 * PI * slice.hbar();
    let f = |t: f64| {
        let x = slice.t1 + half * (1.0 - t.cos());
        let p2 = slice.potential.p_squared(energy, x);
        let s = t.sin();
        if p2 > 0.0 {
            two_pi_hbar * half * s / p2.sqrt()
        } else {
            // limit of sin(theta) / sqrt(p^2) at a turning point
            let dv = |x: f64| slice.potential.value(x);
            let eps = 1e-6 * half;
            let slope = ((dv(x + eps) - dv(x - eps)) / (2.0 * eps)).abs();
            two_pi_hbar * half * (2.0 / (half * 2.0 * slice.mass() * slope)).sqrt()
        }
    };
    Ok(numerics::gauss_legendre(f, 0.0, PI, 64))
}

/// Normalization relations at the eigenvalue of index `level`.
pub fn normalization_checks(problem: &Problem, map: &QuantumNumberMap, invariant: f64, level: usize) -> Result<NormalizationReport> {
    let e0 = match &map.kind {
        MapKind::AnalyticHarmonic { .. } => map.energy_for(level as f64)?,
        MapKind::Interpolated(_) => {
            map.eigenvalues.iter().find(|e| e.0 == level).map(|e| e.1).ok_or(MilneError::BracketNotFound(level))?
        }
    };
    let hb = problem.hbar();
    let m = problem.potential.mass;
    let de = 1e-4;
    let plus = problem.basis(e0 + de, invariant, map)?;
    let minus = problem.basis(e0 - de, invariant, map)?;
    let phase_at = |pair: &BasisPair| -> Result<f64> {
        let n = pair.n_of_e.expect("rescaled pair");
        let c = c_of_quantum_number(invariant, n)?;
        Ok(accumulated_phase_of(pair, &ErmakovParams::new(invariant, c)?)?.phi_total)
    };
    let dphi_de = (phase_at(&plus)? - phase_at(&minus)?) / (2.0 * de);

    // eigenfunction at E0 carrying the normalization the rescaled pairs have next to it
    let at = problem.unscaled_basis(e0, invariant)?;
    let target = 0.5 * (plus.kappa.abs().sqrt() + minus.kappa.abs().sqrt());
    let f: Vec<f64> = at.u1.values[at.trim.clone()].iter().map(|v| v * target).collect();
    let f_norm = numerics::integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>(), at.h());

    let n_ref = 4.25;
    let e_ref = map.energy_for(n_ref)?;
    let dc = (c_of_energy(invariant, map, e_ref + 1e-5)? - c_of_energy(invariant, map, e_ref - 1e-5)?) / 2e-5;
    let c_ref = c_of_energy(invariant, map, e_ref)?;
    let lhs_13 = invariant * dc / (0.5 / invariant + 2.0 * invariant * c_ref * c_ref);
    let rhs_13 = invariant * PI * map.derivative(e_ref)?;

    let unity_invariant = m / (hb * hb * dphi_de);
    let de_broglie = 2.0 * PI / de_broglie_integral(problem, e0)?;
    let mut items = vec![
        CheckItem {
            name: "eigenfunction norm = (hbar^2/m) I dphi(s2)/dE".into(),
            lhs: f_norm,
            rhs: hb * hb / m * invariant * dphi_de,
            tolerance: 1e-3,
        },
        CheckItem { name: "I dc/dE / (1/2I + 2Ic^2) = I pi dn/dE".into(), lhs: lhs_13, rhs: rhs_13, tolerance: 1e-6 },
        CheckItem {
            name: "de Broglie invariant = unity-normalization invariant".into(),
            lhs: de_broglie,
            rhs: unity_invariant,
            tolerance: 1e-3,
        },
    ];
    if let Some(omega) = problem.potential.omega() {
        items.push(CheckItem {
            name: "unity-normalization invariant = m omega / (hbar pi)".into(),
            lhs: unity_invariant,
            rhs: m * omega / (hb * PI),
            tolerance: 1e-4,
        });
    }
    Ok(NormalizationReport { level, eigenvalue: e0, unity_invariant, items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PotentialSpec, SpatialGrid};
    use crate::schrodinger::build_g;
    use proptest::prelude::*;

    fn quartic() -> Problem {
        Problem::new(
            PotentialSpec::polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0, 1.0).unwrap(),
            SpatialGrid::new(-4.0, 4.0, 4001).unwrap(),
        )
        .unwrap()
    }

    /// Eigenvalues of the three-point finite-difference Hamiltonian by Sturm-sequence bisection.
    fn finite_difference_levels(v: impl Fn(f64) -> f64, l: f64, n: usize, count: usize) -> Vec<f64> {
        let h = 2.0 * l / (n + 1) as f64;
        let off = -0.5 / (h * h);
        let diag: Vec<f64> = (1..=n).map(|j| 1.0 / (h * h) + v(-l + j as f64 * h)).collect();
        let below = |lambda: f64| {
            let mut d = 1.0;
            let mut neg = 0;
            for (j, a) in diag.iter().enumerate() {
                d = a - lambda - if j == 0 { 0.0 } else { off * off / d };
                if d == 0.0 {
                    d = 1e-300;
                }
                if d < 0.0 {
                    neg += 1;
                }
            }
            neg
        };
        (0..count)
            .map(|k| {
                let (mut lo, mut hi) = (0.0, 100.0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if below(mid) > k {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    #[test]
    fn quartic_levels_match_finite_difference_oracle() {
        let v = |x: f64| x.powi(4);
        let coarse = finite_difference_levels(v, 4.0, 1599, 6);
        let fine = finite_difference_levels(v, 4.0, 3199, 6);
        let map = find_eigenvalues(&quartic(), 5).unwrap();
        assert!((map.eigenvalues[0].1 - 0.667_986_259_155_777).abs() < 1e-8);
        for (k, (n, e)) in map.eigenvalues.iter().enumerate() {
            assert_eq!(*n, k);
            let oracle = (4.0 * fine[k] - coarse[k]) / 3.0;
            assert!((e / oracle - 1.0).abs() < 1e-6, "level {k}: {e} vs {oracle}");
        }
    }

    #[test]
    fn harmonic_levels() {
        let map = find_eigenvalues(&Problem::harmonic_reference(), 10).unwrap();
        for (n, e) in &map.eigenvalues {
            assert!((e - (*n as f64 + 0.5)).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolated_map_reproduces_linear_spectrum() {
        let levels = (0..=6).map(|n| (n, n as f64 + 0.5)).collect();
        let map = QuantumNumberMap::interpolated(levels).unwrap();
        let exact = QuantumNumberMap::analytic_harmonic(1.0, 1.0);
        for j in 0..=580 {
            let e = 0.6 + j as f64 * 0.01;
            assert!((map.quantum_number(e).unwrap() - exact.quantum_number(e).unwrap()).abs() < 1e-6);
            assert!((map.derivative(e).unwrap() - 1.0).abs() < 1e-6);
        }
        assert!(matches!(map.quantum_number(7.0), Err(MilneError::OutOfRange { .. })));
        assert!((map.energy_for(4.4).unwrap() - 4.9).abs() < 1e-12);
    }

    #[test]
    fn quartic_map_is_continuation() {
        let map = find_eigenvalues(&quartic(), 5).unwrap();
        for (n, e) in &map.eigenvalues {
            assert_eq!(map.quantum_number(*e).unwrap(), *n as f64);
        }
        let mid = 0.5 * (map.eigenvalues[2].1 + map.eigenvalues[3].1);
        let n = map.quantum_number(mid).unwrap();
        assert!(n > 2.0 && n < 3.0);
        assert!(map.derivative(mid).unwrap() > 0.0);
    }

    #[test]
    fn c_of_energy_values() {
        let map = QuantumNumberMap::analytic_harmonic(1.0, 1.0);
        assert!((c_of_energy(1.0, &map, 4.75).unwrap() + 0.5).abs() < 1e-12);
        assert!((c_of_energy(2.0, &map, 1.0).unwrap()).abs() < 1e-12);
        assert!(matches!(c_of_energy(1.0, &map, 3.5), Err(MilneError::EigenvalueDegenerate(_))));
        let near = c_of_energy(1.0, &map, 3.5 + 1e-7).unwrap();
        assert!((near * 2.0 * PI * 1e-7 + 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn phase_matches_quantum_number(n in 1.05f64..7.95) {
            prop_assume!((n - n.round()).abs() > 0.05);
            let problem = Problem::harmonic_reference();
            let map = problem.quantum_number_map(10).unwrap();
            let acc = accumulated_phase_smooth(&problem, &map, map.energy_for(n).unwrap(), 1.0).unwrap();
            prop_assert!((acc.phi_total / PI - (n + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn accumulated_phase_agrees_with_edge_value() {
        // at the right grid edge u2 vanishes, so cot(phi) = g/u1 = -2 I c
        let problem = Problem::harmonic_reference();
        let map = problem.quantum_number_map(10).unwrap();
        for (e, c) in [(3.7, 0.0), (3.7, 0.3), (4.9, -1.2), (6.1, 5.0)] {
            let pair = measurement_basis(&problem, &map, e, 1.0).unwrap();
            let acc = accumulated_phase(&problem, &map, e, 1.0, c).unwrap();
            let g = build_g(&pair, c);
            let last = g.values.len() - 1;
            let edge = pair.u1.values[last].atan2(g.values[last]);
            let wrapped = (acc.phi_total - edge) / PI;
            assert!((wrapped - wrapped.round()).abs() < 1e-7, "E = {e}, c = {c}");
            assert!((edge.cos() / edge.sin() + 2.0 * c).abs() < 1e-6 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn phase_at_eigenvalue_is_independent_of_c() {
        let problem = Problem::harmonic_reference();
        let map = problem.quantum_number_map(10).unwrap();
        for e in [1.5, 3.5, 6.5] {
            let base = accumulated_phase(&problem, &map, e, 1.0, 0.0).unwrap().phi_total;
            assert!((base / PI - (e + 0.5)).abs() < 1e-6);
            for c in [-2.0, 0.3, 7.0] {
                let other = accumulated_phase(&problem, &map, e, 1.0, c).unwrap().phi_total;
                assert!((other - base).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn normalization_relations() {
        let problem = Problem::harmonic_reference();
        let map = problem.quantum_number_map(10).unwrap();
        for level in [0, 4] {
            let report = normalization_checks(&problem, &map, 1.0, level).unwrap();
            assert_eq!(report.items.len(), 4);
            for item in &report.items {
                assert!(item.pass(), "{}: {} vs {}", item.name, item.lhs, item.rhs);
            }
        }
        let quartic = quartic();
        let qmap = find_eigenvalues(&quartic, 6).unwrap();
        let report = normalization_checks(&quartic, &qmap, 1.0, 2).unwrap();
        assert_eq!(report.items.len(), 3);
        assert!(report.items[0].pass());
    }

    #[test]
    fn de_broglie_integral_of_oscillator() {
        let problem = Problem::harmonic_reference();
        for e in [0.5, 2.5, 9.5] {
            let v = de_broglie_integral(&problem, e).unwrap();
            assert!((v - 2.0 * PI * PI).abs() < 1e-9);
        }
        let heavy = Problem::new(PotentialSpec::harmonic(2.0, 1.5, 0.5).unwrap(), SpatialGrid::new(-8.0, 8.0, 2001).unwrap())
            .unwrap();
        assert!((de_broglie_integral(&heavy, 2.0).unwrap() - 2.0 * PI * 0.5 * PI / 3.0).abs() < 1e-9);
    }
}
