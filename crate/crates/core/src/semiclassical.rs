//! Reduced action, WKB pair, Schwarzian derivative, truncated hbar expansion
//! and action integrals.

use std::f64::consts::PI;
use std::ops::Range;

use crate::domain::{evaluate_energy_slice, EnergySlice};
use crate::ermakov::{self, amplitude_from, coefficient_matrix, ErmakovParams};
use crate::error::{MilneError, Result};
use crate::numerics;
use crate::problem::Problem;
use crate::spectral::{self, QuantumNumberMap};

/// Fraction of `t2 - t1` excluded next to each turning point.
pub const CAUSTIC_TRIM: f64 = 0.1;

/// Gauss panels for the full loop integral.
const LOOP_PANELS: usize = 64;

/// Schwarzian `f'''/f' - 3/2 (f''/f')^2` on samples `3..n-3`; returns the offset 3 and the values.
pub fn schwarzian(f: &[f64], h: f64) -> Result<(usize, Vec<f64>)> {
    let n = f.len();
    if n < 7 {
        return Err(MilneError::InvalidParameter("schwarzian needs at least 7 samples".into()));
    }
    let d1 = numerics::derivative(f, h);
    let d2 = numerics::second_derivative(f, h);
    let peak = d1[3..n - 3].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(n - 6);
    for i in 3..n - 3 {
        if d1[i].abs() <= 1e-12 * peak {
            return Err(MilneError::DerivativeVanishes(i));
        }
        let d3 = numerics::third_derivative_at(f, h, i);
        let r = d2[i] / d1[i];
        out.push(d3 / d1[i] - 1.5 * r * r);
    }
    Ok((3, out))
}

/// Schwarzian of `f` computed from samples of `df = f'`, on samples `2..n-2`.
pub fn schwarzian_of_derivative(df: &[f64], h: f64) -> (usize, Vec<f64>) {
    let n = df.len();
    let d1 = numerics::derivative(df, h);
    let d2 = numerics::second_derivative(df, h);
    let out = (2..n - 2)
        .map(|i| {
            let r = d1[i] / df[i];
            d2[i] / df[i] - 1.5 * r * r
        })
        .collect();
    (2, out)
}

fn theta_of(x: f64, t1: f64, t2: f64) -> f64 {
    (1.0 - 2.0 * (x - t1) / (t2 - t1)).clamp(-1.0, 1.0).acos()
}

/// `p(x(theta)) dx/dtheta` with `x = t1 + (t2 - t1)(1 - cos theta)/2`.
fn action_integrand(slice: &EnergySlice, theta: f64) -> f64 {
    let (t1, t2) = (slice.t1, slice.t2);
    let half = 0.5 * (t2 - t1);
    let x = t1 + half * (1.0 - theta.cos());
    let p2 = slice.potential.p_squared(slice.energy, x);
    p2.max(0.0).sqrt() * half * theta.sin()
}

#[derive(Debug, Clone)]
pub struct ReducedAction {
    /// Allowed grid indices covered by the arrays.
    pub range: Range<usize>,
    pub x: Vec<f64>,
    /// `S(x) = int_{t1}^x p dx'`
    pub s: Vec<f64>,
    /// `dS/dx = p(x)`
    pub ds: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    /// `S(t2)`
    pub half_loop: f64,
}

impl ReducedAction {
    /// `oint p dx = 2 S(t2)`
    pub fn loop_integral(&self) -> f64 {
        2.0 * self.half_loop
    }
}

/// Reduced action on the allowed grid points, integrated in the angle
/// variable that removes the square-root endpoint behaviour.
pub fn reduced_action(slice: &EnergySlice) -> ReducedAction {
    let range = slice.allowed.clone();
    let x: Vec<f64> = range.clone().map(|i| slice.x(i)).collect();
    let ds: Vec<f64> = range.clone().map(|i| slice.p_squared[i].sqrt()).collect();
    let f = |t: f64| action_integrand(slice, t);
    let mut s = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for xi in &x {
        let th = theta_of(*xi, slice.t1, slice.t2);
        acc += numerics::gauss_legendre(f, prev, th, 2);
        s.push(acc);
        prev = th;
    }
    let half_loop = numerics::gauss_legendre(f, 0.0, PI, LOOP_PANELS);
    ReducedAction { range, x, s, ds, t1: slice.t1, t2: slice.t2, half_loop }
}

/// Allowed indices at least `CAUSTIC_TRIM (t2 - t1)` away from both turning points.
pub fn caustic_trimmed(slice: &EnergySlice) -> Range<usize> {
    let d = CAUSTIC_TRIM * (slice.t2 - slice.t1);
    let r = slice.allowed.clone();
    let start = r.clone().find(|&i| slice.x(i) >= slice.t1 + d).unwrap_or(r.start);
    let end = r.clone().rev().find(|&i| slice.x(i) <= slice.t2 - d).map(|i| i + 1).unwrap_or(r.end);
    start..end
}

/// Local WKB pair sharing `I` and `W` with a quantum pair.
#[derive(Debug, Clone)]
pub struct WkbPair {
    pub range: Range<usize>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub invariant: f64,
    pub wronskian: f64,
    pub hbar: f64,
    pub h: f64,
    pub t1: f64,
    pub t2: f64,
}

/// `u1 = sqrt(2 I hbar/p) sin(S/hbar)`, `u2 = sqrt(2 I hbar/p) cos(S/hbar + arccos(W/2I))`
/// on the caustic-trimmed allowed range.
pub fn wkb_pair(slice: &EnergySlice, invariant: f64, wronskian: f64) -> Result<WkbPair> {
    let ratio = wronskian / (2.0 * invariant);
    if !(-1.0..=1.0).contains(&ratio) {
        return Err(MilneError::ArccosDomain(ratio));
    }
    let b = ratio.acos();
    let action = reduced_action(slice);
    let range = caustic_trimmed(slice);
    let off = range.start - action.range.start;
    let hb = slice.hbar();
    let take = |v: &[f64]| v[off..off + range.len()].to_vec();
    let x = take(&action.x);
    let p = take(&action.ds);
    let s = take(&action.s);
    let amp: Vec<f64> = p.iter().map(|pi| (2.0 * invariant * hb / pi).sqrt()).collect();
    let u1 = s.iter().zip(&amp).map(|(si, a)| a * (si / hb).sin()).collect();
    let u2 = s.iter().zip(&amp).map(|(si, a)| a * (si / hb + b).cos()).collect();
    Ok(WkbPair {
        range,
        x,
        p,
        s,
        u1,
        u2,
        invariant,
        wronskian,
        hbar: hb,
        h: slice.step(),
        t1: slice.t1,
        t2: slice.t2,
    })
}

impl WkbPair {
    /// Indices of the middle half of `(t1, t2)`.
    pub fn mid_well(&self) -> Vec<usize> {
        let q = 0.25 * (self.t2 - self.t1);
        (0..self.x.len()).filter(|&k| self.x[k] >= self.t1 + q && self.x[k] <= self.t2 - q).collect()
    }

    pub fn wronskian_profile(&self) -> Vec<f64> {
        let d1 = numerics::derivative(&self.u1, self.h);
        let d2 = numerics::derivative(&self.u2, self.h);
        (0..self.u1.len()).map(|k| d1[k] * self.u2[k] - self.u1[k] * d2[k]).collect()
    }

    /// Residual of `hbar^2 u'' + [p^2 + hbar^2/2 <S;x>] u = 0` for `u1`,
    /// normalized by `p^2 sqrt(2 I hbar / p)`, on the samples `2..n-2`.
    pub fn modified_equation_residual(&self) -> Vec<f64> {
        let hb2 = self.hbar * self.hbar;
        let d2 = numerics::second_derivative(&self.u1, self.h);
        let (off, sch) = schwarzian_of_derivative(&self.p, self.h);
        sch.iter()
            .enumerate()
            .map(|(k, sk)| {
                let i = k + off;
                let p2 = self.p[i] * self.p[i];
                let amp = (2.0 * self.invariant * self.hbar / self.p[i]).sqrt();
                (hb2 * d2[i] + (p2 + 0.5 * hb2 * sk) * self.u1[i]) / (p2 * amp)
            })
            .collect()
    }
}

/// `c` cancelling the oscillating terms of the semiclassical amplitude for the
/// `arccos(W/2I)` convention of [`wkb_pair`]. Equals `c_o` when `W > 0`.
pub fn nonoscillating_c(invariant: f64, wronskian: f64) -> Result<f64> {
    ermakov::c_nonoscillating(invariant, wronskian).map(|c| c * wronskian.signum())
}

#[derive(Debug, Clone)]
pub struct SemiclassicalAmpPhase {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub c: f64,
}

/// Superposition amplitude and phase of the WKB pair; the phase starts at `S/hbar`
/// at the first sample.
pub fn semiclassical_amp_phase(pair: &WkbPair, params: &ErmakovParams) -> Result<SemiclassicalAmpPhase> {
    let m = coefficient_matrix(params, pair.wronskian)?;
    let alpha = amplitude_from(&pair.u1, &pair.u2, &m, &pair.x)?;
    let dphi: Vec<f64> = alpha.iter().map(|a| 1.0 / (a * a)).collect();
    let start = pair.s[0] / pair.hbar;
    let phi = numerics::cumulative_integral(&dphi, pair.h).into_iter().map(|v| v + start).collect();
    Ok(SemiclassicalAmpPhase { x: pair.x.clone(), alpha, phi, dphi, c: params.c })
}

/// Truncated hbar-expansion coefficients on the caustic-trimmed range.
#[derive(Debug, Clone)]
pub struct ExpansionTerms {
    pub range: Range<usize>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub a0: Vec<f64>,
    pub f0: Vec<f64>,
    pub a2: Vec<f64>,
    pub f2: Vec<f64>,
    pub df2: Vec<f64>,
    pub order: usize,
    pub hbar_eff: f64,
    pub h: f64,
}

pub fn hbar_expansion(slice: &EnergySlice, hbar_eff: f64, order: usize) -> Result<ExpansionTerms> {
    if order != 0 && order != 2 {
        return Err(MilneError::InvalidParameter(format!("expansion order must be 0 or 2, got {order}")));
    }
    if !(hbar_eff > 0.0 && hbar_eff.is_finite()) {
        return Err(MilneError::InvalidParameter(format!("hbar_eff must be positive, got {hbar_eff}")));
    }
    let action = reduced_action(slice);
    let h = slice.step();
    let p = &action.ds;
    let a0: Vec<f64> = p.iter().map(|v| 1.0 / v.sqrt()).collect();
    let range = caustic_trimmed(slice);
    let off = range.start - action.range.start;
    let len = range.len();
    let take = |v: &[f64]| v[off..off + len].to_vec();
    let (mut a2, mut f2, mut df2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    if order == 2 {
        let da0 = numerics::derivative(&a0, h);
        let dda0 = numerics::second_derivative(&a0, h);
        let df2_all: Vec<f64> = (0..p.len()).map(|k| dda0[k] / (2.0 * a0[k] * p[k])).collect();
        let ddf2_all = numerics::derivative(&df2_all, h);
        df2 = take(&df2_all);
        f2 = numerics::cumulative_integral(&df2, h);
        let integrand: Vec<f64> = (off..off + len)
            .map(|k| (2.0 * da0[k] * df2_all[k] + a0[k] * ddf2_all[k]) / p[k].sqrt())
            .collect();
        let inner = numerics::cumulative_integral(&integrand, h);
        a2 = (0..len).map(|k| -inner[k] / (2.0 * p[off + k].sqrt())).collect();
    }
    let x = take(&action.x);
    let terms = ExpansionTerms {
        x,
        p: take(p),
        a0: take(&a0),
        f0: take(&action.s),
        a2,
        f2,
        df2,
        range,
        order,
        hbar_eff,
        h,
    };
    let identity = terms.wronskian_identity_defect();
    if identity > 1e-10 {
        return Err(MilneError::InvalidParameter(format!("a0^2 dS/dx deviates from 1 by {identity:e}")));
    }
    Ok(terms)
}

impl ExpansionTerms {
    /// `max |a0^2 dS/dx - 1|` with `dS/dx = p`.
    pub fn wronskian_identity_defect(&self) -> f64 {
        self.a0.iter().zip(&self.p).map(|(a, p)| (a * a * p - 1.0).abs()).fold(0.0, f64::max)
    }

    fn amplitude_and_phase(&self) -> (Vec<f64>, Vec<f64>) {
        let hb = self.hbar_eff;
        let a = self.a0.iter().zip(&self.a2).map(|(a0, a2)| a0 + hb * hb * a2).collect();
        let f = self.f0.iter().zip(&self.f2).map(|(f0, f2)| f0 + hb * hb * f2).collect();
        (a, f)
    }

    /// `sqrt(2 I hbar) a sin(f/hbar + theta0)` with the terms truncated at `self.order`.
    pub fn wavefunction(&self, invariant: f64, theta0: f64) -> Vec<f64> {
        let (a, f) = self.amplitude_and_phase();
        let k = (2.0 * invariant * self.hbar_eff).sqrt();
        a.iter().zip(&f).map(|(ai, fi)| k * ai * (fi / self.hbar_eff + theta0).sin()).collect()
    }

    /// Relative residual of the Schroedinger equation for `a exp(i f/hbar)` on samples `2..n-2`.
    pub fn residual(&self) -> Vec<f64> {
        let hb = self.hbar_eff;
        let (a, _) = self.amplitude_and_phase();
        let da = numerics::derivative(&a, self.h);
        let dda = numerics::second_derivative(&a, self.h);
        let df: Vec<f64> = self.p.iter().zip(&self.df2).map(|(p, d)| p + hb * hb * d).collect();
        let ddf = numerics::derivative(&df, self.h);
        (2..a.len() - 2)
            .map(|k| {
                let p2 = self.p[k] * self.p[k];
                let re = hb * hb * dda[k] - a[k] * df[k] * df[k] + p2 * a[k];
                let im = hb * (2.0 * da[k] * df[k] + a[k] * ddf[k]);
                re.hypot(im) / (p2 * a[k])
            })
            .collect()
    }
}

/// `[2Ic + (I/W) sqrt(4 - W^2/I^2)]`, the shift inside the expanded phase.
pub fn phase_bracket(invariant: f64, wronskian: f64, c: f64) -> Result<f64> {
    let rad = 4.0 - (wronskian / invariant).powi(2);
    if rad < 0.0 {
        return Err(MilneError::RealityViolated { w2: wronskian * wronskian, four_i2: 4.0 * invariant * invariant });
    }
    Ok(2.0 * invariant * c + invariant / wronskian * rad.sqrt())
}

/// `phi = arccot(cot(S/hbar + hbar f2) - B)`, continuous and matched to the
/// argument of the cotangent at the first sample.
pub fn expanded_phase(terms: &ExpansionTerms, invariant: f64, wronskian: f64, c: f64) -> Result<Vec<f64>> {
    let hb = terms.hbar_eff;
    let b = phase_bracket(invariant, wronskian, c)?;
    let theta: Vec<f64> = terms.f0.iter().zip(&terms.f2).map(|(f0, f2)| f0 / hb + hb * f2).collect();
    let mut phi: Vec<f64> = theta.iter().map(|t| t.sin().atan2(t.cos() - b * t.sin())).collect();
    numerics::unwrap_angles(&mut phi);
    let shift = 2.0 * PI * ((theta[0] - phi[0]) / (2.0 * PI)).round();
    phi.iter_mut().for_each(|v| *v += shift);
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionIntegrals {
    pub energy: f64,
    pub n_of_e: f64,
    pub j_classical: f64,
    /// `2 hbar phi(s2)` measured at the non-oscillating `c`.
    pub j_quantal: f64,
    /// `2 pi hbar n(E)`
    pub j_quantal_co: f64,
    pub period: f64,
    /// `(j_quantal - j_classical) / hbar`
    pub offset_over_hbar: f64,
    pub c_used: f64,
}

/// Classical loop integral at `E`.
pub fn classical_action(problem: &Problem, energy: f64) -> Result<f64> {
    let slice = evaluate_energy_slice(&problem.potential, &problem.grid, energy)?;
    Ok(reduced_action(&slice).loop_integral())
}

pub fn action_integrals(problem: &Problem, map: &QuantumNumberMap, energy: f64, invariant: f64) -> Result<ActionIntegrals> {
    let hb = problem.potential.hbar;
    let j_classical = classical_action(problem, energy)?;
    let de = 1e-3;
    let period = (classical_action(problem, energy + de)? - classical_action(problem, energy - de)?) / (2.0 * de);
    let n_of_e = map.quantum_number(energy)?;
    let c = spectral::c_of_energy(invariant, map, energy)?;
    let acc = spectral::accumulated_phase(problem, map, energy, invariant, c)?;
    let j_quantal = 2.0 * hb * acc.phi_total;
    Ok(ActionIntegrals {
        energy,
        n_of_e,
        j_classical,
        j_quantal,
        j_quantal_co: 2.0 * PI * hb * n_of_e,
        period,
        offset_over_hbar: (j_quantal - j_classical) / hb,
        c_used: c,
    })
}
