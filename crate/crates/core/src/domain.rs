//! Grids, potential models and per-energy kinematics.

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;

use crate::error::{MilneError, Result};
use crate::numerics::{self, MonotoneCubic};

/// Minimum number of forbidden-region e-foldings wanted beyond each turning point.
pub const MIN_BUFFER_EFOLDS: f64 = 5.0;

/// Uniform one-dimensional grid with an odd number of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(MilneError::InvalidGrid("grid bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(MilneError::InvalidGrid(format!("x_min {x_min} must be below x_max {x_max}")));
        }
        if n_points < 5 {
            return Err(MilneError::InvalidGrid("at least 5 points are required".into()));
        }
        if n_points % 2 == 0 {
            return Err(MilneError::InvalidGrid(format!("n_points must be odd, got {n_points}")));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Build from explicit abscissae, rejecting anything that is not uniform.
    pub fn from_points(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(MilneError::InvalidGrid("need at least two points".into()));
        }
        let n = xs.len();
        let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let dev = xs
            .windows(2)
            .map(|w| ((w[1] - w[0]) - h).abs() / h.abs())
            .fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(MilneError::NonUniformGrid(dev));
        }
        Self::new(xs[0], xs[n - 1], n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + self.step() * i as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Same interval with `2(n - 1) + 1` points.
    pub fn refined(&self) -> Self {
        Self { n_points: 2 * (self.n_points - 1) + 1, ..*self }
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.step()).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `V = m omega^2 x^2 / 2`
    Harmonic { omega: f64 },
    /// `V = sum_k c_k x^k`
    Polynomial { coeffs: Vec<f64> },
    Tabulated { table: MonotoneCubic },
}

/// Single-well potential with particle mass and Planck constant.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub mass: f64,
    pub hbar: f64,
}

impl PotentialSpec {
    pub fn harmonic(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(MilneError::InvalidPotential(format!("omega must be positive, got {omega}")));
        }
        Self::checked(PotentialKind::Harmonic { omega }, mass, hbar)
    }

    pub fn polynomial(coeffs: Vec<f64>, mass: f64, hbar: f64) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(MilneError::InvalidPotential("polynomial coefficients must be finite".into()));
        }
        Self::checked(PotentialKind::Polynomial { coeffs }, mass, hbar)
    }

    pub fn tabulated(xs: Vec<f64>, vs: Vec<f64>, mass: f64, hbar: f64) -> Result<Self> {
        let table = MonotoneCubic::new(xs, vs)
            .map_err(|e| MilneError::InvalidPotential(format!("potential table: {e}")))?;
        Self::checked(PotentialKind::Tabulated { table }, mass, hbar)
    }

    fn checked(kind: PotentialKind, mass: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MilneError::InvalidPotential(format!("mass must be positive, got {mass}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(MilneError::InvalidPotential(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { kind, mass, hbar })
    }

    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::checked(self.kind.clone(), self.mass, hbar)
    }

    pub fn omega(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Harmonic { omega } => Some(omega),
            _ => None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Harmonic { omega } => 0.5 * self.mass * omega * omega * x * x,
            PotentialKind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            PotentialKind::Tabulated { table } => table.eval(x),
        }
    }

    pub fn values(&self, grid: &SpatialGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.x(i))).collect()
    }

    /// `p^2 = 2m(E - V(x))`
    pub fn p_squared(&self, energy: f64, x: f64) -> f64 {
        2.0 * self.mass * (energy - self.value(x))
    }

    /// Checks the single-minimum shape on `grid` and returns the index of the minimum.
    pub fn validate_on(&self, grid: &SpatialGrid) -> Result<usize> {
        if let PotentialKind::Tabulated { table } = &self.kind {
            let (lo, hi) = table.domain();
            let tol = 1e-9 * (grid.x_max() - grid.x_min());
            if lo > grid.x_min() + tol || hi < grid.x_max() - tol {
                return Err(MilneError::InvalidPotential(format!(
                    "table covers [{lo}, {hi}] but the grid spans [{}, {}]",
                    grid.x_min(),
                    grid.x_max()
                )));
            }
        }
        let v = self.values(grid);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MilneError::NonFinite("potential samples".into()));
        }
        let slopes: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
        let mut transitions = 0;
        let mut wrong = 0;
        let mut last = 0.0;
        for &s in &slopes {
            if s == 0.0 {
                continue;
            }
            if last != 0.0 && s.signum() != last {
                if last < 0.0 {
                    transitions += 1;
                } else {
                    wrong += 1;
                }
            }
            last = s.signum();
        }
        if transitions != 1 || wrong != 0 {
            return Err(MilneError::NoMinimum);
        }
        let imin = v
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if imin == 0 || imin + 1 == v.len() {
            return Err(MilneError::NoMinimum);
        }
        Ok(imin)
    }
}

/// Kinematic data at one energy.
#[derive(Debug, Clone)]
pub struct EnergySlice {
    pub energy: f64,
    pub grid: SpatialGrid,
    pub potential: PotentialSpec,
    pub p_squared: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    /// Grid indices with `p^2 > 0`.
    pub allowed: Range<usize>,
    /// Grid index of the potential minimum.
    pub i_min: usize,
}

impl EnergySlice {
    pub fn hbar(&self) -> f64 {
        self.potential.hbar
    }

    pub fn mass(&self) -> f64 {
        self.potential.mass
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p_squared[i].abs().sqrt()
    }

    /// Integral of `|p|/hbar` from the nearest turning point out to each grid
    /// point, zero inside the allowed range.
    pub fn forbidden_depth(&self) -> Vec<f64> {
        let h = self.step();
        let hb = self.hbar();
        let n = self.p_squared.len();
        let kappa: Vec<f64> = self.p_squared.iter().map(|p2| (-p2).max(0.0).sqrt() / hb).collect();
        let mut depth = vec![0.0; n];
        let a = self.allowed.start;
        if a > 0 {
            let gap = (self.t1 - self.grid.x(a - 1)).max(0.0);
            depth[a - 1] = 0.5 * kappa[a - 1] * gap;
            for i in (0..a - 1).rev() {
                depth[i] = depth[i + 1] + 0.5 * h * (kappa[i] + kappa[i + 1]);
            }
        }
        let b = self.allowed.end;
        if b < n {
            let gap = (self.grid.x(b) - self.t2).max(0.0);
            depth[b] = 0.5 * kappa[b] * gap;
            for i in b + 1..n {
                depth[i] = depth[i - 1] + 0.5 * h * (kappa[i] + kappa[i - 1]);
            }
        }
        depth
    }
}

/// Build the slice at energy `E`, warning when the forbidden buffer is thin.
pub fn evaluate_energy_slice(potential: &PotentialSpec, grid: &SpatialGrid, energy: f64) -> Result<EnergySlice> {
    let slice = build_energy_slice(potential, grid, energy)?;
    let depth = slice.forbidden_depth();
    if depth[0] < MIN_BUFFER_EFOLDS || depth[depth.len() - 1] < MIN_BUFFER_EFOLDS {
        log::warn!(
            "forbidden buffer at E = {energy} is only {:.2} / {:.2} e-folds; regular boundary conditions may be inaccurate",
            depth[0],
            depth[depth.len() - 1]
        );
    }
    Ok(slice)
}

/// Build the slice at energy `E` without the buffer diagnostic.
pub fn build_energy_slice(potential: &PotentialSpec, grid: &SpatialGrid, energy: f64) -> Result<EnergySlice> {
    if !energy.is_finite() {
        return Err(MilneError::NonFinite(format!("energy {energy}")));
    }
    let i_min = potential.validate_on(grid)?;
    let left = potential.value(grid.x_min());
    let right = potential.value(grid.x_max());
    if energy >= left || energy >= right {
        return Err(MilneError::EnergyOutOfRange { energy, left, right });
    }
    let p_squared: Vec<f64> = (0..grid.len()).map(|i| potential.p_squared(energy, grid.x(i))).collect();
    let mut slice = EnergySlice {
        energy,
        grid: *grid,
        potential: potential.clone(),
        p_squared,
        t1: f64::NAN,
        t2: f64::NAN,
        allowed: 0..0,
        i_min,
    };
    let (t1, t2) = find_turning_points(&slice)?;
    slice.t1 = t1;
    slice.t2 = t2;
    let a = slice.p_squared.iter().position(|&v| v > 0.0).unwrap();
    let b = slice.p_squared.iter().rposition(|&v| v > 0.0).unwrap() + 1;
    slice.allowed = a..b;
    Ok(slice)
}

/// Roots of `E - V(x)` bracketed on the grid and refined by bisection.
pub fn find_turning_points(slice: &EnergySlice) -> Result<(f64, f64)> {
    let scale = slice.p_squared.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let resolve = 1e-12 * scale;
    let signs: Vec<(usize, f64)> = slice
        .p_squared
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > resolve)
        .map(|(i, v)| (i, v.signum()))
        .collect();
    let mut brackets = Vec::new();
    for w in signs.windows(2) {
        if w[0].1 != w[1].1 {
            brackets.push((w[0].0, w[1].0));
        }
    }
    if brackets.len() != 2 || signs.first().map(|s| s.1) != Some(-1.0) {
        return Err(MilneError::DegenerateTurningPoints(brackets.len()));
    }
    let pot = &slice.potential;
    let e = slice.energy;
    let refine = |(i, j): (usize, usize)| {
        let (a, b) = (slice.grid.x(i), slice.grid.x(j));
        let tol = 1e-13 * (a.abs().max(b.abs())).max(slice.grid.step());
        numerics::bisect(|x| e - pot.value(x), a, b, tol).unwrap_or(0.5 * (a + b))
    };
    Ok((refine(brackets[0]), refine(brackets[1])))
}

/// Local de Broglie wavelength `2 pi hbar / p` on the allowed indices.
pub fn local_de_broglie(slice: &EnergySlice) -> (Range<usize>, Vec<f64>) {
    let two_pi_hbar = 2.0 * std::f64::consts::PI * slice.hbar();
    let lambda = slice.allowed.clone().map(|i| two_pi_hbar / slice.p_squared[i].sqrt()).collect();
    (slice.allowed.clone(), lambda)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum PotentialConfig {
    Harmonic {
        #[serde(default = "one")]
        m: f64,
        omega: f64,
    },
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default = "one")]
        m: f64,
    },
    Table {
        file: String,
        #[serde(default = "one")]
        m: f64,
    },
}

#[derive(Debug, Deserialize)]
struct GridConfig {
    xmin: f64,
    xmax: f64,
    n: usize,
}

#[derive(Debug, Deserialize)]
struct ProblemConfig {
    potential: PotentialConfig,
    grid: GridConfig,
    #[serde(default = "one")]
    hbar: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct TableRow {
    x: f64,
    #[serde(rename = "V")]
    v: f64,
}

/// Parse the JSON problem description; table paths are resolved against `base_dir`.
pub fn parse_config(json: &str, base_dir: &Path) -> Result<(PotentialSpec, SpatialGrid)> {
    let cfg: ProblemConfig = serde_json::from_str(json).map_err(|e| MilneError::Config(e.to_string()))?;
    let grid = SpatialGrid::new(cfg.grid.xmin, cfg.grid.xmax, cfg.grid.n)?;
    let potential = match cfg.potential {
        PotentialConfig::Harmonic { m, omega } => PotentialSpec::harmonic(m, omega, cfg.hbar)?,
        PotentialConfig::Polynomial { coeffs, m } => PotentialSpec::polynomial(coeffs, m, cfg.hbar)?,
        PotentialConfig::Table { file, m } => {
            let path = base_dir.join(file);
            let mut reader = csv::Reader::from_path(&path)
                .map_err(|e| MilneError::Config(format!("{}: {e}", path.display())))?;
            let mut xs = Vec::new();
            let mut vs = Vec::new();
            for row in reader.deserialize() {
                let row: TableRow = row.map_err(|e| MilneError::Config(format!("{}: {e}", path.display())))?;
                xs.push(row.x);
                vs.push(row.v);
            }
            PotentialSpec::tabulated(xs, vs, m, cfg.hbar)?
        }
    };
    Ok((potential, grid))
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<(PotentialSpec, SpatialGrid)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MilneError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or_else(|| Path::new(".")))
}
