//! Regular solutions of `hbar^2 u'' + p^2 u = 0` and the basis pair built from them.

use std::ops::Range;

use crate::domain::EnergySlice;
use crate::error::{MilneError, Result};
use crate::numerics;

/// Forbidden-region depth (in units of `int |p| dx / hbar`) kept on each side
/// of the well for amplitude and phase arrays.
pub const TRIM_DEPTH: f64 = 8.0;

const START_VALUE: f64 = 1e-30;
const RESCALE_AT: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub regular_end: Side,
    /// Sign changes strictly between the turning points.
    pub node_count: usize,
    /// Base-10 exponent of the factor removed from the raw march.
    pub log_scale: f64,
}

impl LinearSolution {
    /// Sign changes over the whole grid.
    pub fn total_zeros(&self) -> usize {
        numerics::sign_change_indices(&self.values).len()
    }

    fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
        self.derivative.iter_mut().for_each(|v| *v *= s);
        self.log_scale -= s.abs().log10();
    }

    /// Local amplitude `sqrt(u^2 + (hbar u' / p)^2)` at sample `i` inside the well.
    pub fn local_amplitude(&self, slice: &EnergySlice, i: usize) -> f64 {
        let p = slice.p_squared[i].sqrt();
        let v = self.values[i];
        let d = slice.hbar() * self.derivative[i] / p;
        (v * v + d * d).sqrt()
    }
}

/// Numerov march for `u'' + k2 u = 0` starting from `(0, 1e-30)` at index 0.
/// Returns the raw values and the base-10 exponent removed by rescaling.
pub fn numerov(k2: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
    let n = k2.len();
    if k2.iter().any(|v| !v.is_finite()) {
        return Err(MilneError::NonFinite("p^2 samples".into()));
    }
    let w: Vec<f64> = k2.iter().map(|k| h * h * k / 12.0).collect();
    let mut u = vec![0.0; n];
    let mut log_scale = 0.0;
    if n > 1 {
        u[1] = START_VALUE;
    }
    for i in 1..n.saturating_sub(1) {
        let next = (2.0 * u[i] * (1.0 - 5.0 * w[i]) - u[i - 1] * (1.0 + w[i - 1])) / (1.0 + w[i + 1]);
        u[i + 1] = next;
        if next.abs() > RESCALE_AT {
            u[..=i + 1].iter_mut().for_each(|v| *v /= RESCALE_AT);
            log_scale += 100.0;
            if !u[i + 1].is_finite() || u[i + 1].abs() > RESCALE_AT {
                return Err(MilneError::Overflow(format!("Numerov march at step {}", i + 1)));
            }
        } else if !next.is_finite() {
            return Err(MilneError::Overflow(format!("Numerov march at step {}", i + 1)));
        }
    }
    Ok((u, log_scale))
}

/// Integrate inward from the `side` edge, regular there, normalized to `max|u| = 1`.
pub fn integrate_regular(slice: &EnergySlice, side: Side) -> Result<LinearSolution> {
    let hb2 = slice.hbar() * slice.hbar();
    let mut k2: Vec<f64> = slice.p_squared.iter().map(|p2| p2 / hb2).collect();
    if side == Side::Right {
        k2.reverse();
    }
    let (mut values, mut log_scale) = numerov(&k2, slice.step())?;
    if side == Side::Right {
        values.reverse();
    }
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    values.iter_mut().for_each(|v| *v /= peak);
    log_scale += peak.log10();
    let derivative = numerics::derivative(&values, slice.step());
    let node_count = nodes_between_turning_points(&values, slice);
    Ok(LinearSolution { values, derivative, regular_end: side, node_count, log_scale })
}

fn nodes_between_turning_points(values: &[f64], slice: &EnergySlice) -> usize {
    numerics::sign_change_indices(&values[slice.allowed.clone()]).len()
}

/// Pointwise Wronskian `a' b - a b'`.
pub fn wronskian_profile(a: &[f64], da: &[f64], b: &[f64], db: &[f64]) -> Vec<f64> {
    (0..a.len()).map(|i| da[i] * b[i] - a[i] * db[i]).collect()
}

/// Mean Wronskian over the five samples centred on `center`, checking that it is constant.
pub fn wronskian_near(a: &[f64], da: &[f64], b: &[f64], db: &[f64], center: usize) -> Result<f64> {
    let lo = center.saturating_sub(2).min(a.len() - 5);
    let idx = lo..lo + 5;
    let w: Vec<f64> = idx.clone().map(|i| da[i] * b[i] - a[i] * db[i]).collect();
    let mean = w.iter().sum::<f64>() / 5.0;
    let reference = idx.map(|i| (da[i] * b[i]).abs() + (a[i] * db[i]).abs()).fold(0.0, f64::max);
    let spread = w.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - w.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let rel = spread / mean.abs().max(1e-4 * reference);
    if !(rel <= 1e-4) {
        return Err(MilneError::InconsistentWronskian(rel));
    }
    Ok(mean)
}

/// Wronskian near the potential minimum and the node count of `u2`.
pub fn wronskian_and_nodes(u1: &LinearSolution, u2: &LinearSolution, slice: &EnergySlice) -> Result<(f64, usize)> {
    let w = wronskian_near(&u1.values, &u1.derivative, &u2.values, &u2.derivative, slice.i_min)?;
    Ok((w, u2.node_count))
}

/// Factor applied to `u2` so the Wronskian becomes `2 I sin(pi n)`.
pub fn rescale_factor(invariant: f64, n_of_e: f64, w_raw: f64) -> Result<f64> {
    let s = (std::f64::consts::PI * n_of_e).sin();
    if s.abs() < 1e-8 {
        return Err(MilneError::EigenvalueDegenerate(n_of_e));
    }
    if w_raw == 0.0 || !w_raw.is_finite() {
        return Err(MilneError::EigenvalueDegenerate(n_of_e));
    }
    Ok(2.0 * invariant * s / w_raw)
}

/// Regular pair on a common slice together with its Wronskian and invariant.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub slice: EnergySlice,
    pub u1: LinearSolution,
    pub u2: LinearSolution,
    pub wronskian: f64,
    pub invariant: f64,
    pub n_of_e: Option<f64>,
    /// Factor applied to `u2` to reach `W = 2 I sin(pi n)`; 1 for unscaled pairs.
    pub kappa: f64,
    /// Grid indices on which amplitude and phase arrays are evaluated.
    pub trim: Range<usize>,
}

impl BasisPair {
    /// Pair with each solution normalized to unit local amplitude at the
    /// potential minimum and no Wronskian rescaling.
    pub fn unscaled(slice: &EnergySlice, mut u1: LinearSolution, mut u2: LinearSolution, invariant: f64) -> Result<Self> {
        check_invariant(invariant)?;
        unit_amplitude(&mut u1, slice);
        unit_amplitude(&mut u2, slice);
        let (w, _) = wronskian_and_nodes(&u1, &u2, slice)?;
        Ok(Self {
            slice: slice.clone(),
            u1,
            u2,
            wronskian: w,
            invariant,
            n_of_e: None,
            kappa: 1.0,
            trim: trimmed_interior(slice),
        })
    }

    pub fn h(&self) -> f64 {
        self.slice.step()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.slice.x(i)
    }

    /// Interpolated `(u1, u2)` at an arbitrary abscissa.
    pub fn values_at(&self, x: f64) -> (f64, f64) {
        let (x0, h) = (self.slice.grid.x_min(), self.h());
        (
            numerics::interp_cubic(&self.u1.values, x0, h, x),
            numerics::interp_cubic(&self.u2.values, x0, h, x),
        )
    }

    /// Zeros of `u1` and `u2` strictly between the turning points, in ascending order.
    pub fn zeros_between_turning_points(&self) -> (Vec<f64>, Vec<f64>) {
        let r = &self.slice.allowed;
        let find = |u: &[f64]| -> Vec<f64> {
            numerics::sign_change_indices(&u[r.clone()])
                .into_iter()
                .map(|k| numerics::refine_zero(u, self.slice.grid.x_min(), self.h(), r.start + k))
                .filter(|z| *z > self.slice.t1 && *z < self.slice.t2)
                .collect()
        };
        (find(&self.u1.values), find(&self.u2.values))
    }
}

fn check_invariant(invariant: f64) -> Result<()> {
    if !(invariant > 0.0 && invariant.is_finite()) {
        return Err(MilneError::InvalidParameter(format!("I must be positive, got {invariant}")));
    }
    Ok(())
}

fn unit_amplitude(u: &mut LinearSolution, slice: &EnergySlice) {
    let a = u.local_amplitude(slice, slice.i_min);
    u.scale(1.0 / a);
}

/// Indices whose forbidden depth is at most [`TRIM_DEPTH`], kept three samples from the grid edges.
pub fn trimmed_interior(slice: &EnergySlice) -> Range<usize> {
    let depth = slice.forbidden_depth();
    let n = depth.len();
    let start = depth.iter().position(|d| *d <= TRIM_DEPTH).unwrap_or(0).max(3);
    let end = (depth.iter().rposition(|d| *d <= TRIM_DEPTH).unwrap_or(n - 1) + 1).min(n - 3);
    start..end
}

/// Scale `u2` so that `W = 2 I sin(pi n)`, then share the factor between
/// both solutions so their in-well amplitudes are equal.
pub fn rescale_basis(
    u1: LinearSolution,
    u2: LinearSolution,
    slice: &EnergySlice,
    invariant: f64,
    n_of_e: f64,
) -> Result<BasisPair> {
    check_invariant(invariant)?;
    if !n_of_e.is_finite() {
        return Err(MilneError::NonFinite(format!("n(E) = {n_of_e}")));
    }
    let mut pair = BasisPair::unscaled(slice, u1, u2, invariant)?;
    let kappa = rescale_factor(invariant, n_of_e, pair.wronskian)?;
    let balance = kappa.abs().sqrt();
    pair.u1.scale(balance);
    pair.u2.scale(kappa / balance);
    pair.wronskian = 2.0 * invariant * (std::f64::consts::PI * n_of_e).sin();
    pair.n_of_e = Some(n_of_e);
    pair.kappa = kappa;
    Ok(pair)
}

/// Auxiliary solution lagging `u1` by a quarter period.
#[derive(Debug, Clone)]
pub struct GFunction {
    pub values: Vec<f64>,
    pub c: f64,
}

/// `g = 2I (u2 / W - c u1)`
pub fn build_g(pair: &BasisPair, c: f64) -> GFunction {
    let k = 2.0 * pair.invariant;
    let values = pair
        .u1
        .values
        .iter()
        .zip(&pair.u2.values)
        .map(|(a, b)| k * (b / pair.wronskian - c * a))
        .collect();
    GFunction { values, c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{evaluate_energy_slice, PotentialSpec, SpatialGrid};

    fn slice(e: f64) -> EnergySlice {
        let pot = PotentialSpec::harmonic(1.0, 1.0, 1.0).unwrap();
        let grid = SpatialGrid::new(-12.0, 12.0, 4001).unwrap();
        evaluate_energy_slice(&pot, &grid, e).unwrap()
    }

    fn pair(e: f64) -> (EnergySlice, LinearSolution, LinearSolution) {
        let s = slice(e);
        let u1 = integrate_regular(&s, Side::Left).unwrap();
        let u2 = integrate_regular(&s, Side::Right).unwrap();
        (s, u1, u2)
    }

    fn slab_error(h: f64) -> f64 {
        let n = (10.0 / h).round() as usize + 1;
        let (u, _) = numerov(&vec![1.0; n], h).unwrap();
        let a = START_VALUE / h.sin();
        (0..n).map(|i| (u[i] / a - (h * i as f64).sin()).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn numerov_slab_accuracy_and_order() {
        assert!(slab_error(0.005) <= 1e-9);
        // coarse steps keep the global truncation error above the rounding floor
        let ratio = slab_error(0.04) / slab_error(0.02);
        assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn numerov_rescales_instead_of_overflowing() {
        let (u, log_scale) = numerov(&vec![-400.0; 4001], 0.01).unwrap();
        assert!(log_scale >= 100.0);
        assert!(u.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ground_state_is_gaussian() {
        let (s, u1, _) = pair(0.5);
        let i0 = s.grid.nearest(0.0);
        for i in 0..s.grid.len() {
            let x = s.x(i);
            if x.abs() <= 3.0 {
                let exact = (-0.5 * x * x).exp();
                let got = u1.values[i] / u1.values[i0];
                assert!((got - exact).abs() <= 1e-7 * exact, "x={x}");
            }
        }
        assert_eq!(u1.node_count, 0);
        assert!(u1.values[0].abs() <= 1e-12);
    }

    #[test]
    fn regular_edges_vanish() {
        let (_, u1, u2) = pair(4.9);
        assert_eq!(u1.values[0], 0.0);
        assert_eq!(u2.values[u2.values.len() - 1], 0.0);
        let m1 = u1.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((m1 - 1.0).abs() < 1e-15);
        assert!(u1.values[1] > 0.0 && u2.values[u2.values.len() - 2] > 0.0);
    }

    /// Independent oracle: classical RK4 on a finer grid.
    fn rk4_nodes(e: f64, from_left: bool) -> usize {
        let n = 48001;
        let h = 24.0 / (n - 1) as f64 * if from_left { 1.0 } else { -1.0 };
        let mut x = if from_left { -12.0 } else { 12.0 };
        let (mut y, mut dy) = (0.0, 1e-30 / h.abs());
        let f = |x: f64| -2.0 * (e - 0.5 * x * x);
        let t = (2.0 * e).sqrt();
        let mut last = 0.0;
        let mut count = 0;
        for _ in 0..n - 1 {
            let k1 = (dy, f(x) * y);
            let k2 = (dy + 0.5 * h * k1.1, f(x + 0.5 * h) * (y + 0.5 * h * k1.0));
            let k3 = (dy + 0.5 * h * k2.1, f(x + 0.5 * h) * (y + 0.5 * h * k2.0));
            let k4 = (dy + h * k3.1, f(x + h) * (y + h * k3.0));
            y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            dy += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            x += h;
            if y.abs() > 1e100 {
                y *= 1e-100;
                dy *= 1e-100;
            }
            if x.abs() < t {
                if last != 0.0 && y.signum() != last {
                    count += 1;
                }
                last = y.signum();
            }
        }
        count
    }

    #[test]
    fn node_counts_match_independent_oracle() {
        let (s, u1, u2) = pair(4.9);
        assert_eq!(u1.node_count, rk4_nodes(4.9, true));
        assert_eq!(u1.node_count, 5);
        let (_, nodes) = wronskian_and_nodes(&u1, &u2, &s).unwrap();
        assert_eq!(nodes, rk4_nodes(4.9, false));
    }

    #[test]
    fn slab_wronskian_is_one() {
        let h = 0.01;
        let xs: Vec<f64> = (0..401).map(|i| h * i as f64).collect();
        let a: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let b: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let w = wronskian_near(&a, &numerics::derivative(&a, h), &b, &numerics::derivative(&b, h), 200).unwrap();
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wronskian_vanishes_at_eigenvalue() {
        let (s, u1, u2) = pair(2.5);
        let (w, _) = wronskian_and_nodes(&u1, &u2, &s).unwrap();
        let norm = |u: &[f64]| u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(w.abs() <= 1e-6 * norm(&u1.values) * norm(&u2.values));
    }

    #[test]
    fn rescale_factor_examples() {
        let k = rescale_factor(1.0, 4.4, 0.37).unwrap();
        assert!((k - 5.14085).abs() < 1e-5);
        assert!((k * 0.37 - 1.902113).abs() < 1e-6);
        assert!(matches!(rescale_factor(1.0, 4.0, 0.37), Err(MilneError::EigenvalueDegenerate(_))));
    }

    #[test]
    fn rescaled_pair_wronskian() {
        let (s, u1, u2) = pair(5.0);
        let p = rescale_basis(u1, u2, &s, 1.0, 4.5).unwrap();
        assert_eq!(p.wronskian, 2.0);
        let (s, u1, u2) = pair(4.9);
        let p = rescale_basis(u1, u2, &s, 1.0, 4.4).unwrap();
        let target = 2.0 * (0.4 * std::f64::consts::PI).sin();
        assert!((p.wronskian - target).abs() < 1e-15);
        assert!(p.wronskian.powi(2) < 4.0);
        for center in [s.i_min - 300, s.i_min, s.i_min + 500] {
            let w = wronskian_near(&p.u1.values, &p.u1.derivative, &p.u2.values, &p.u2.derivative, center).unwrap();
            assert!((w - target).abs() <= 1e-6 * target, "center {center}: {w}");
        }
        let (s, u1, u2) = pair(4.5);
        assert!(matches!(rescale_basis(u1, u2, &s, 1.0, 4.0), Err(MilneError::EigenvalueDegenerate(_))));
    }

    #[test]
    fn g_function_wronskian() {
        let (s, u1, u2) = pair(4.9);
        let p = rescale_basis(u1, u2, &s, 1.0, 4.4).unwrap();
        for c in [-1.0, 0.0, 0.3] {
            let g = build_g(&p, c);
            let dg = numerics::derivative(&g.values, p.h());
            let w = wronskian_near(&p.u1.values, &p.u1.derivative, &g.values, &dg, s.i_min).unwrap();
            assert!((w - 2.0).abs() < 1e-6 * 2.0, "c={c}: {w}");
        }
    }

    #[test]
    fn zeros_interlace() {
        let (s, u1, u2) = pair(4.9);
        let p = rescale_basis(u1, u2, &s, 1.0, 4.4).unwrap();
        let (z1, z2) = p.zeros_between_turning_points();
        let mut all: Vec<(f64, u8)> = z1.iter().map(|z| (*z, 1)).chain(z2.iter().map(|z| (*z, 2))).collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!(all.len() >= 8);
        for w in all.windows(2) {
            assert_ne!(w[0].1, w[1].1);
        }
    }

    #[test]
    fn node_count_scan_follows_sturm() {
        let mut prev_total = None;
        let mut prev_inner = 0;
        for k in 0..=29 {
            let e = 0.6 + 0.2 * k as f64;
            let (_, _, u2) = pair(e);
            let below = (0..20).filter(|n| (*n as f64 + 0.5) < e).count();
            assert_eq!(u2.total_zeros(), below, "E={e}");
            if let Some(p) = prev_total {
                assert!(u2.total_zeros() - p <= 1);
            }
            assert!(u2.node_count >= prev_inner);
            prev_total = Some(u2.total_zeros());
            prev_inner = u2.node_count;
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn rescaled_wronskian_is_constant(energy in 0.7f64..9.0, invariant in 0.2f64..3.0) {
            let n = energy - 0.5;
            proptest::prop_assume!((n - n.round()).abs() > 0.05);
            let (s, u1, u2) = pair(energy);
            let p = rescale_basis(u1, u2, &s, invariant, n).unwrap();
            let target = 2.0 * invariant * (std::f64::consts::PI * n).sin();
            proptest::prop_assert!((p.wronskian - target).abs() <= 1e-12 * target.abs());
            let span = s.allowed.end - s.allowed.start;
            let ws: Vec<f64> = (1..=5)
                .map(|k| s.allowed.start + k * span / 6)
                .map(|c| wronskian_near(&p.u1.values, &p.u1.derivative, &p.u2.values, &p.u2.derivative, c).unwrap())
                .collect();
            let lo = ws.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!((hi - lo) <= 1e-6 * target.abs(), "{:?}", ws);
        }
    }
}
