//! Command-line front end: configuration loading, command dispatch and
//! CSV/JSON output.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use milne::ermakov::{self, ErmakovParams};
use milne::spectral::{self, QuantumNumberMap};
use milne::{checks, semiclassical, BasisPair, MilneError, Problem};
use rayon::prelude::*;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "milne", version, about = "Amplitude-phase solutions of the 1D Schroedinger equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ermakov invariant I.
    #[arg(long, default_value_t = 1.0)]
    pub invariant: f64,
    /// Highest eigenvalue index used for the quantum-number map of non-harmonic potentials.
    #[arg(long = "levels", default_value_t = 10)]
    pub levels: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues E_0..E_nmax as JSON.
    Eigen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        nmax: usize,
    },
    /// Basis pair, amplitude and phase at one energy as CSV.
    Ampphase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        energy: f64,
        /// co, minus_co, of_energy or fixed:VALUE
        #[arg(long = "c-policy", default_value = "of_energy")]
        c_policy: CPolicy,
    },
    /// Accumulated phase over a range of n(E) as CSV.
    ScanPhase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nmin: f64,
        #[arg(long)]
        nmax: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Action integrals at one energy as JSON.
    Action {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        energy: f64,
    },
    /// Amplitudes for both non-oscillating branches at n(E) = 4.4, with zero markers.
    Fig1 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-of-e", default_value_t = 4.4)]
        n_of_e: f64,
    },
    /// Quantal momentum against the classical one at n(E) = 12.4.
    Fig2 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-of-e", default_value_t = 12.4)]
        n_of_e: f64,
    },
    /// Truncated hbar-expansion terms and residuals as CSV.
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long = "hbar-eff", default_value_t = 1.0)]
        hbar_eff: f64,
        #[arg(long, default_value_t = 4.9)]
        energy: f64,
    },
    /// Acceptance suite with one pass/fail line per criterion.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Eigen { common, .. }
            | Command::Ampphase { common, .. }
            | Command::ScanPhase { common, .. }
            | Command::Action { common, .. }
            | Command::Fig1 { common, .. }
            | Command::Fig2 { common, .. }
            | Command::Expand { common, .. }
            | Command::Check { common } => common,
        }
    }
}

/// Rule for choosing `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CPolicy {
    Co,
    MinusCo,
    OfEnergy,
    Fixed(f64),
}

impl FromStr for CPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "co" => Ok(CPolicy::Co),
            "minus_co" => Ok(CPolicy::MinusCo),
            "of_energy" => Ok(CPolicy::OfEnergy),
            _ => {
                let inner = s
                    .strip_prefix("fixed:")
                    .or_else(|| s.strip_prefix("fixed(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(|| format!("unknown c-policy '{s}'"))?;
                let v: f64 = inner.parse().map_err(|_| format!("invalid fixed c '{inner}'"))?;
                if v.is_finite() {
                    Ok(CPolicy::Fixed(v))
                } else {
                    Err(format!("fixed c must be finite, got {inner}"))
                }
            }
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<MilneError> for Failure {
    fn from(e: MilneError) -> Self {
        if e.is_config() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

/// `%.15g`-style formatting.
pub fn fmt15(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.14e}").parse().expect("formatted float parses");
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn round15(v: f64) -> f64 {
    fmt15(v).parse().unwrap_or(v)
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self, Failure> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(MilneError::from)?;
        Ok(Self { writer })
    }

    fn row(&mut self, values: &[f64]) -> Result<(), Failure> {
        self.writer.write_record(values.iter().map(|v| fmt15(*v))).map_err(MilneError::from)?;
        Ok(())
    }

    fn row_with(&mut self, values: &[f64], tag: &str) -> Result<(), Failure> {
        let mut rec: Vec<String> = values.iter().map(|v| fmt15(*v)).collect();
        rec.push(tag.to_string());
        self.writer.write_record(rec).map_err(MilneError::from)?;
        Ok(())
    }

    fn finish(self) -> Result<String, Failure> {
        let bytes = self.writer.into_inner().map_err(|e| Failure::Numerical(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn quantum_map(problem: &Problem, common: &Common) -> Result<QuantumNumberMap, Failure> {
    Ok(problem.quantum_number_map(common.levels)?)
}

fn resolve_c(policy: CPolicy, pair: &BasisPair, map: &QuantumNumberMap) -> Result<f64, Failure> {
    let i = pair.invariant;
    Ok(match policy {
        CPolicy::Co => ermakov::c_nonoscillating(i, pair.wronskian)?,
        CPolicy::MinusCo => -ermakov::c_nonoscillating(i, pair.wronskian)?,
        CPolicy::OfEnergy => spectral::c_of_energy(i, map, pair.slice.energy)?,
        CPolicy::Fixed(c) => c,
    })
}

fn eigen(problem: &Problem, nmax: usize) -> Result<String, Failure> {
    let map = spectral::find_eigenvalues(problem, nmax)?;
    let list: Vec<_> = map.eigenvalues.iter().map(|(n, e)| json!({ "n": n, "E": round15(*e) })).collect();
    Ok(serde_json::to_string_pretty(&json!({ "eigenvalues": list })).map_err(MilneError::from)? + "\n")
}

fn ampphase(problem: &Problem, common: &Common, energy: f64, policy: CPolicy) -> Result<String, Failure> {
    let map = quantum_map(problem, common)?;
    let pair = spectral::measurement_basis(problem, &map, energy, common.invariant)?;
    let c = resolve_c(policy, &pair, &map)?;
    let ap = ermakov::phase(&pair, &ErmakovParams::new(common.invariant, c)?)?;
    let mut t = Table::new(&["x", "u1", "u2", "alpha", "phi", "dphi"])?;
    for (k, i) in ap.range.clone().enumerate() {
        t.row(&[ap.x[k], pair.u1.values[i], pair.u2.values[i], ap.alpha[k], ap.phi[k], ap.dphi[k]])?;
    }
    t.finish()
}

fn scan_phase(problem: &Problem, common: &Common, nmin: f64, nmax: f64, steps: usize) -> Result<String, Failure> {
    if steps < 2 || !(nmax > nmin) {
        return Err(Failure::Usage("scan-phase needs nmax > nmin and at least 2 steps".into()));
    }
    let map = quantum_map(problem, common)?;
    let i = common.invariant;
    let rows: Result<Vec<[f64; 4]>, MilneError> = (0..steps)
        .into_par_iter()
        .map(|k| {
            let n = nmin + (nmax - nmin) * k as f64 / (steps - 1) as f64;
            let e = map.energy_for(n)?;
            let n_e = map.quantum_number(e)?;
            let c = match spectral::c_of_energy(i, &map, e) {
                Err(MilneError::EigenvalueDegenerate(_)) => 0.0,
                other => other?,
            };
            let acc = spectral::accumulated_phase(problem, &map, e, i, c)?;
            Ok([e, n_e, acc.phi_total / PI, c])
        })
        .collect();
    let mut t = Table::new(&["E", "nE", "phi_total_over_pi", "c_used"])?;
    for r in rows? {
        t.row(&r)?;
    }
    t.finish()
}

fn action(problem: &Problem, common: &Common, energy: f64) -> Result<String, Failure> {
    let map = quantum_map(problem, common)?;
    let a = semiclassical::action_integrals(problem, &map, energy, common.invariant)?;
    let doc = json!({
        "E": round15(a.energy),
        "J_classical": round15(a.j_classical),
        "J_quantal_co": round15(a.j_quantal_co),
        "period": round15(a.period),
        "J_quantal": round15(a.j_quantal),
        "offset_over_hbar": round15(a.offset_over_hbar),
    });
    Ok(serde_json::to_string_pretty(&doc).map_err(MilneError::from)? + "\n")
}

fn fig1(problem: &Problem, common: &Common, n: f64) -> Result<String, Failure> {
    let map = quantum_map(problem, common)?;
    let pair = problem.basis(map.energy_for(n)?, common.invariant, &map)?;
    let co = ermakov::c_nonoscillating(common.invariant, pair.wronskian)?;
    let p_co = ErmakovParams::new(common.invariant, co)?;
    let p_minus = ErmakovParams::new(common.invariant, -co)?;
    let q = ermakov::canonical_q(&pair, &p_co)?;
    let a_co = ermakov::amplitude(&pair, &p_co)?;
    let a_minus = ermakov::amplitude(&pair, &p_minus)?;
    let mut t = Table::new(&["x", "Q_co", "alpha_co", "alpha_minus_co", "marker"])?;
    for (k, i) in pair.trim.clone().enumerate() {
        t.row_with(&[pair.x(i), q.q[k], a_co[k], a_minus[k]], "")?;
    }
    let (z1, z2) = pair.zeros_between_turning_points();
    let m = ermakov::coefficient_matrix(&p_co, pair.wronskian)?;
    let m_minus = ermakov::coefficient_matrix(&p_minus, pair.wronskian)?;
    for (zeros, tag) in [(z1, "u1_zero"), (z2, "u2_zero")] {
        for x in zeros {
            let (a, b) = pair.values_at(x);
            let qv = ermakov::q_at(&pair, &p_co, x)?;
            t.row_with(&[x, qv, m.form(a, b).sqrt(), m_minus.form(a, b).sqrt()], tag)?;
        }
    }
    t.finish()
}

fn fig2(problem: &Problem, common: &Common, n: f64) -> Result<String, Failure> {
    let map = quantum_map(problem, common)?;
    let pair = problem.basis(map.energy_for(n)?, common.invariant, &map)?;
    let co = ermakov::c_nonoscillating(common.invariant, pair.wronskian)?;
    let a_co = ermakov::phase(&pair, &ErmakovParams::new(common.invariant, co)?)?;
    let a_gen = ermakov::phase(&pair, &ErmakovParams::new(common.invariant, 0.0)?)?;
    let hb = problem.hbar();
    let mut t = Table::new(&["x", "p_classical", "hbar_dphi_co", "hbar_dphi_generic"])?;
    for (k, i) in a_co.range.clone().enumerate() {
        let x = pair.x(i);
        if x <= pair.slice.t1 || x >= pair.slice.t2 {
            continue;
        }
        t.row(&[x, pair.slice.p(i), hb * a_co.dphi[k], hb * a_gen.dphi[k]])?;
    }
    t.finish()
}

fn expand(problem: &Problem, order: usize, hbar_eff: f64, energy: f64) -> Result<String, Failure> {
    let slice = problem.slice(energy)?;
    let terms = semiclassical::hbar_expansion(&slice, hbar_eff, order)?;
    let residual = terms.residual();
    let mut t = Table::new(&["x", "p", "a0", "f0", "a2", "f2", "residual"])?;
    for (j, r) in residual.iter().enumerate() {
        let k = j + 2;
        t.row(&[terms.x[k], terms.p[k], terms.a0[k], terms.f0[k], terms.a2[k], terms.f2[k], *r])?;
    }
    t.finish()
}

fn check(problem: &Problem) -> Result<String, Failure> {
    let outcomes = checks::run_all(problem);
    let mut text = String::new();
    for o in &outcomes {
        text.push_str(&o.line());
        text.push('\n');
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("{} ({})", o.id, o.name)).collect();
    if failed.is_empty() {
        Ok(text)
    } else {
        // the table is still useful when some criteria fail
        print!("{text}");
        Err(Failure::Numerical(format!("failing criteria: {}", failed.join(", "))))
    }
}

fn dispatch(command: &Command) -> Result<String, Failure> {
    let common = command.common();
    if !(common.invariant > 0.0 && common.invariant.is_finite()) {
        return Err(Failure::Usage(format!("--invariant must be positive, got {}", common.invariant)));
    }
    let problem = Problem::load(&common.config)?;
    match command {
        Command::Eigen { nmax, .. } => eigen(&problem, *nmax),
        Command::Ampphase { energy, c_policy, .. } => ampphase(&problem, common, *energy, *c_policy),
        Command::ScanPhase { nmin, nmax, steps, .. } => scan_phase(&problem, common, *nmin, *nmax, *steps),
        Command::Action { energy, .. } => action(&problem, common, *energy),
        Command::Fig1 { n_of_e, .. } => fig1(&problem, common, *n_of_e),
        Command::Fig2 { n_of_e, .. } => fig2(&problem, common, *n_of_e),
        Command::Expand { order, hbar_eff, energy, .. } => expand(&problem, *order, *hbar_eff, *energy),
        Command::Check { .. } => check(&problem),
    }
}

fn configure_threads() {
    let threads = std::env::var("MILNE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let out = cli.command.common().out.clone();
    let result = dispatch(&cli.command).and_then(|text| match &out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
            }
            f.exit_code()
        }
    }
}
