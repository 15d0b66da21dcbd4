//! Finite-difference stencils, quadrature and interpolation on uniform grids.

use crate::error::{MilneError, Result};

/// First derivative, fourth order everywhere (centered interior, one-sided
/// five-point formulas at the two outermost samples on each side).
pub fn derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    if n < 5 {
        return centered_derivative(y, h);
    }
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h);
    let m = n - 1;
    d[m] = (25.0 * y[m] - 48.0 * y[m - 1] + 36.0 * y[m - 2] - 16.0 * y[m - 3] + 3.0 * y[m - 4])
        / (12.0 * h);
    d[m - 1] = (3.0 * y[m] + 10.0 * y[m - 1] - 18.0 * y[m - 2] + 6.0 * y[m - 3] - y[m - 4])
        / (12.0 * h);
    d
}

/// Second derivative, fourth order everywhere.
pub fn second_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "second_derivative needs at least 5 samples");
    let h2 = 12.0 * h * h;
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-y[i - 2] + 16.0 * y[i - 1] - 30.0 * y[i] + 16.0 * y[i + 1] - y[i + 2]) / h2;
    }
    d[0] = (35.0 * y[0] - 104.0 * y[1] + 114.0 * y[2] - 56.0 * y[3] + 11.0 * y[4]) / h2;
    d[1] = (11.0 * y[0] - 20.0 * y[1] + 6.0 * y[2] + 4.0 * y[3] - y[4]) / h2;
    let m = n - 1;
    d[m] = (35.0 * y[m] - 104.0 * y[m - 1] + 114.0 * y[m - 2] - 56.0 * y[m - 3] + 11.0 * y[m - 4])
        / h2;
    d[m - 1] = (11.0 * y[m] - 20.0 * y[m - 1] + 6.0 * y[m - 2] + 4.0 * y[m - 3] - y[m - 4]) / h2;
    d
}

/// Third derivative at sample `i` from the seven-point centered stencil.
pub fn third_derivative_at(y: &[f64], h: f64, i: usize) -> f64 {
    (y[i - 3] - 8.0 * y[i - 2] + 13.0 * y[i - 1] - 13.0 * y[i + 1] + 8.0 * y[i + 2] - y[i + 3])
        / (8.0 * h * h * h)
}

/// Second-order centered differences with one-sided second-order ends.
pub fn centered_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    if n == 2 {
        let s = (y[1] - y[0]) / h;
        return vec![s, s];
    }
    for i in 1..n - 1 {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    d
}

/// Running integral `F[i] = \int_{x_0}^{x_i} y dx` with fourth-order
/// interval rules (cubic through four neighbouring samples).
pub fn cumulative_integral(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
        }
        return out;
    }
    let c = h / 24.0;
    for i in 0..n - 1 {
        let piece = if i == 0 {
            c * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
        } else if i == n - 2 {
            c * (9.0 * y[n - 1] + 19.0 * y[n - 2] - 5.0 * y[n - 3] + y[n - 4])
        } else {
            c * (-y[i - 1] + 13.0 * y[i] + 13.0 * y[i + 1] - y[i + 2])
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// Definite integral over all samples.
pub fn integrate(y: &[f64], h: f64) -> f64 {
    cumulative_integral(y, h).last().copied().unwrap_or(0.0)
}

/// Eight-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Composite eight-point Gauss-Legendre rule on [a, b] with `panels` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + w * k as f64;
        let mid = lo + 0.5 * w;
        let mut s = 0.0;
        for &(t, wt) in GAUSS8.iter() {
            s += wt * f(mid + 0.5 * w * t);
        }
        total += 0.5 * w * s;
    }
    total
}

/// Bisection for a sign change of `f` on [a, b] down to absolute width `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Indices `i` where the sign flips between the nonzero samples at or
/// before `i` and the next nonzero sample `j > i`. Exact zeros are skipped.
pub fn sign_change_indices(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in y.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some((j, s)) = last {
            if s != v.signum() {
                out.push(if i - j == 1 { j } else { i - 1 });
            }
        }
        last = Some((i, v.signum()));
    }
    out
}

/// Cubic Lagrange interpolation through the four samples surrounding `x`.
pub fn interp_cubic(y: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = y.len();
    let t = (x - x0) / h;
    let i = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut l = 1.0;
        for k in 0..4 {
            if k != j {
                l *= (t - (i + k) as f64) / (j as f64 - k as f64);
            }
        }
        acc += l * y[i + j];
    }
    acc
}

/// Locate the zero of the cubic interpolant of `y` between samples `i` and
/// `i + 1`, where `y` changes sign.
pub fn refine_zero(y: &[f64], x0: f64, h: f64, i: usize) -> f64 {
    let a = x0 + h * i as f64;
    bisect(|x| interp_cubic(y, x0, h, x), a, a + h, 1e-15 * (1.0 + a.abs())).unwrap_or_else(|| {
        a + h * y[i] / (y[i] - y[i + 1])
    })
}

/// Shape-preserving piecewise cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(MilneError::InvalidParameter(
                "interpolant needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(MilneError::NonFinite("interpolation table".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MilneError::InvalidParameter(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        let hs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / hs[k]).collect();
        let mut ds = vec![0.0; n];
        if n == 2 {
            ds[0] = del[0];
            ds[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * hs[k] + hs[k - 1];
                    let w2 = hs[k] + 2.0 * hs[k - 1];
                    ds[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            ds[0] = end_slope(hs[0], hs[1], del[0], del[1]);
            ds[n - 1] = end_slope(hs[n - 2], hs[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Self { xs, ys, ds })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn locate(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(self.xs.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Value at `x`; beyond the table the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.locate(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.ds[k] + h01 * self.ys[k + 1] + h11 * h * self.ds[k + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.locate(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[k] + d10 * self.ds[k] + d01 * self.ys[k + 1] + d11 * self.ds[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Remove jumps larger than pi between consecutive angles.
pub fn unwrap_angles(theta: &mut [f64]) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut offset = 0.0;
    for i in 1..theta.len() {
        let raw = theta[i] + offset;
        let jump = raw - theta[i - 1];
        let k = (jump / two_pi).round();
        offset -= k * two_pi;
        theta[i] = raw - k * two_pi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, a: f64, b: f64) -> (Vec<f64>, f64) {
        let h = (b - a) / (n - 1) as f64;
        ((0..n).map(|i| a + h * i as f64).collect(), h)
    }

    #[test]
    fn derivatives_of_sine_are_fourth_order() {
        let mut errs = Vec::new();
        for n in [201, 401] {
            let (x, h) = grid(n, 0.0, 3.0);
            let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            let d = derivative(&y, h);
            let e = x.iter().zip(&d).map(|(v, dv)| (dv - v.cos()).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
        assert!(errs[1] < 1e-8);
    }

    #[test]
    fn second_and_third_derivatives() {
        let (x, h) = grid(601, -1.0, 2.0);
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let d2 = second_derivative(&y, h);
        for (i, v) in x.iter().enumerate() {
            assert!((d2[i] - v.exp()).abs() < 1e-6 * v.exp(), "i={i}");
        }
        for i in 3..x.len() - 3 {
            assert!((third_derivative_at(&y, h, i) - x[i].exp()).abs() < 1e-6 * x[i].exp());
        }
    }

    #[test]
    fn cumulative_integral_of_cosine() {
        let (x, h) = grid(301, 0.0, 2.0);
        let y: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let f = cumulative_integral(&y, h);
        for (i, v) in x.iter().enumerate() {
            assert!((f[i] - v.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_polynomial_exact() {
        let v = gauss_legendre(|x| x.powi(15) + 3.0 * x * x, -1.0, 2.0, 1);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_none());
    }

    #[test]
    fn sign_changes_skip_zeros() {
        let y = [0.0, 1.0, 2.0, -1.0, 0.0, -2.0, 3.0];
        assert_eq!(sign_change_indices(&y), vec![2, 5]);
    }

    #[test]
    fn cubic_interpolation_and_zero() {
        let (x, h) = grid(101, 0.0, 4.0);
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let i = sign_change_indices(&y)[0];
        let z = refine_zero(&y, 0.0, h, i);
        assert!((z - std::f64::consts::PI).abs() < 1e-6);
        assert!((interp_cubic(&y, 0.0, h, 1.234) - 1.234f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 0.2, 5.0, 5.1];
        let p = MonotoneCubic::new(xs, ys).unwrap();
        let mut prev = p.eval(0.0);
        for k in 1..=400 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
        assert!((p.eval(3.0) - 5.0).abs() < 1e-14);
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut t: Vec<f64> = (0..100).map(|k| (0.2 * k as f64).sin().atan2((0.2 * k as f64).cos())).collect();
        unwrap_angles(&mut t);
        for (k, v) in t.iter().enumerate() {
            assert!((v - 0.2 * k as f64).abs() < 1e-12);
        }
    }
}
