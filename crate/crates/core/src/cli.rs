//! `decoctl` command-line front end.
//!
//! Exit codes: 0 success, 1 oracle gate exceeded, 2 invalid config or
//! arguments, 3 numerical failure, 4 refused (oracle size or recurrence).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::Value;

use crate::bloch::{self, Basis, ControlProgram, GeneralProgram, StepControl, TiltDirection};
use crate::config::*;
use crate::error::{Error, Result};
use crate::io::{format_number, CsvTable};
use crate::multipartite as mp;
use crate::oracle;
use crate::rates::{self, Regime};

pub const EXIT_GATE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_REFUSED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "decoctl", version, about = "Modulation-controlled decoherence of driven qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment config.
    Run(CommonArgs),
    /// Run a config over a grid of values of one scalar field.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// `POINTER=START:STOP:COUNT` or `POINTER=V1,V2,...`, where POINTER
        /// is a JSON pointer to a number in the config (e.g. `/grid/t_final`).
        #[arg(long)]
        axis: String,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, env = "DECOCTL_JOBS")]
    pub jobs: Option<usize>,
    /// Reserved; no computation is stochastic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub verbose: bool,
}

/// Result of one experiment: the CSV table and the summary scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: CsvTable,
    pub summary: Vec<(String, f64)>,
    /// Set when an oracle comparison exceeded its gate.
    pub gate_failed: bool,
    /// Extra JSON artifact (designed modulations).
    pub artifact: Option<Value>,
}

impl Outcome {
    fn new(table: CsvTable) -> Self {
        Outcome {
            table,
            summary: Vec::new(),
            gate_failed: false,
            artifact: None,
        }
    }

    fn add(&mut self, name: &str, value: f64) {
        self.summary.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(n, _)| n == name).map(|p| p.1)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) | Error::Unsupported(_) => EXIT_INVALID,
        Error::NumericalFailure { .. } | Error::UndefinedFilter(_) | Error::NoSolution(_) => EXIT_NUMERICAL,
        Error::Refused(_) => EXIT_REFUSED,
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { 0 };
        }
    };
    let common = match &cli.command {
        Command::Run(c) => c,
        Command::Sweep { common, .. } => common,
    };
    let level = if common.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(seed) = common.seed {
        log::info!("--seed {seed} accepted; no computation uses randomness");
    }
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep { common, axis } => sweep(common, axis),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(Error::InvalidInput("--jobs must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn print_summary(title: &str, summary: &[(String, f64)]) {
    println!("{title}");
    let width = summary.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, value) in summary {
        println!("  {name:<width$}  {}", format_number(*value));
    }
}

fn run(args: &CommonArgs) -> Result<i32> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let outcome = pool(args.jobs)?.install(|| execute(&cfg))?;
    let name = cfg.output();
    let path = write_file(&args.out, &name, outcome.table.to_csv_string().as_bytes())?;
    if let Some(artifact) = &outcome.artifact {
        let stem = name.strip_suffix(".csv").unwrap_or(&name);
        let text = serde_json::to_string_pretty(artifact).expect("JSON values serialize");
        write_file(&args.out, &format!("{stem}.modulations.json"), format!("{text}\n").as_bytes())?;
    }
    print_summary(&format!("{} -> {}", cfg.kind(), path.display()), &outcome.summary);
    if outcome.gate_failed {
        eprintln!("oracle deviation exceeds the configured gate");
        return Ok(EXIT_GATE);
    }
    Ok(0)
}

/// Parsed `--axis` argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub pointer: String,
    pub values: Vec<f64>,
}

pub fn parse_axis(spec: &str) -> Result<Axis> {
    let (pointer, grid) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid("--axis must look like POINTER=START:STOP:COUNT or POINTER=V1,V2,..."))?;
    if !pointer.starts_with('/') {
        return Err(Error::invalid(format!("--axis pointer `{pointer}` must start with `/`")));
    }
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("--axis: `{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::invalid("--axis values must be finite"))
        }
    };
    let values = if grid.trim().is_empty() {
        Vec::new()
    } else if grid.contains(':') {
        let parts: Vec<&str> = grid.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid("--axis range must be START:STOP:COUNT"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::invalid("--axis COUNT must be a non-negative integer"))?;
        match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        grid.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::invalid("--axis grid is empty"));
    }
    Ok(Axis {
        pointer: pointer.to_string(),
        values,
    })
}

fn sweep(args: &CommonArgs, axis: &str) -> Result<i32> {
    let axis = parse_axis(axis)?;
    let text = fs::read_to_string(&args.config)?;
    let base: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", args.config.display()),
    })?;
    let integral = match base.pointer(&axis.pointer) {
        Some(Value::Number(n)) => n.is_u64() || n.is_i64(),
        Some(_) => return Err(Error::invalid(format!("at {}: sweep axis must be a number", axis.pointer))),
        None => return Err(Error::invalid(format!("at {}: no such config field", axis.pointer))),
    };
    if integral && axis.values.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::invalid(format!("at {}: sweep values must be integers", axis.pointer)));
    }
    let dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let configs = axis
        .values
        .iter()
        .map(|&v| {
            let mut value = base.clone();
            *value.pointer_mut(&axis.pointer).expect("pointer checked") = if integral {
                serde_json::json!(v as i64)
            } else {
                serde_json::json!(v)
            };
            ExperimentConfig::from_value(value, &dir)
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes = pool(args.jobs)?.install(|| configs.par_iter().map(execute).collect::<Vec<_>>());
    let mut rows = Vec::with_capacity(outcomes.len());
    for (v, o) in axis.values.iter().zip(outcomes) {
        let o = o.map_err(|e| annotate(e, &format!("at {} = {}", axis.pointer, format_number(*v))))?;
        rows.push((*v, o));
    }
    let names: Vec<String> = rows[0].1.summary.iter().map(|(n, _)| n.clone()).collect();
    let mut table = CsvTable::new(std::iter::once(axis.pointer.clone()).chain(names.iter().cloned()));
    let mut gate_failed = false;
    for (v, o) in &rows {
        gate_failed |= o.gate_failed;
        table.push(std::iter::once(*v).chain(o.summary.iter().map(|p| p.1)).collect());
    }
    let output = configs[0].output();
    let stem = output.strip_suffix(".csv").unwrap_or(&output);
    let path = write_file(&args.out, &format!("{stem}.sweep.csv"), table.to_csv_string().as_bytes())?;
    println!(
        "{} sweep over {} ({} points) -> {}",
        configs[0].kind(),
        axis.pointer,
        rows.len(),
        path.display()
    );
    if gate_failed {
        eprintln!("oracle deviation exceeds the configured gate at one or more grid points");
        return Ok(EXIT_GATE);
    }
    Ok(0)
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{context}: {m}")),
        Error::NumericalFailure { message, residual } => Error::NumericalFailure {
            message: format!("{context}: {message}"),
            residual,
        },
        Error::Refused(m) => Error::Refused(format!("{context}: {m}")),
        Error::NoSolution(m) => Error::NoSolution(format!("{context}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{context}: {m}")),
        other => other,
    }
}

/// Run one decoded experiment.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg {
        ExperimentConfig::Rate(e) => run_rate(e),
        ExperimentConfig::Bloch(e) => run_bloch(e),
        ExperimentConfig::Filter(e) => run_filter(e),
        ExperimentConfig::MultiAn(e) => run_multi_an(e),
        ExperimentConfig::MultiPn(e) => run_multi_pn(e),
        ExperimentConfig::OracleCompare(e) => run_oracle(e),
        ExperimentConfig::DesignIip(e) => run_design(e),
    }
}

fn carrier(program: &ControlProgram) -> f64 {
    match program.regime() {
        Regime::Amplitude => program.omega_a(),
        Regime::Phase => 0.0,
    }
}

fn run_rate(e: &RateExperiment) -> Result<Outcome> {
    let bath = e.bath.build()?;
    let eps = e.program.effective_modulation(e.grid.t_final)?;
    let report = rates::spectral_exponent(&bath, &eps, e.program.omega_a(), e.program.regime(), &e.grid.times())?;
    let mut table = CsvTable::new(["t", "J", "R_e", "Delta_a", "P_e"]);
    for p in &report.points {
        table.push(vec![p.t, p.exponent, p.rate, p.shift_difference, p.survival]);
    }
    let last = report.points.last().expect("grid has samples");
    let r_gr = bath.golden_rule_rate(carrier(&e.program))?;
    let long = match eps.harmonics(e.harmonics) {
        Ok(h) => rates::longtime_rate(&bath, &h, carrier(&e.program), Some(e.grid.t_final))?.rate,
        Err(err) => {
            log::warn!("no harmonic decomposition ({err}); reporting R_e at t_final as the long-time rate");
            last.rate
        }
    };
    let mut out = Outcome::new(table);
    out.add("R_GR", r_gr);
    out.add("R_e_long", long);
    out.add("suppression", long / r_gr);
    out.add("J_final", last.exponent);
    out.add("R_e_final", last.rate);
    Ok(out)
}

fn run_bloch(e: &BlochExperiment) -> Result<Outcome> {
    let bath = e.bath.build()?;
    let state = e.initial.state()?;
    let omega_a = e.program.omega_a();
    let samples = e.grid.samples;
    let traj = match e.solver {
        Solver::Bloch => {
            let control = StepControl {
                samples,
                ..Default::default()
            };
            match e.program.regime() {
                Regime::Amplitude => bloch::evolve_an(&state, &bath, &e.program, e.grid.t_final, control)?,
                Regime::Phase => bloch::evolve_pn(&state, &bath, &e.program, e.grid.t_final, control)?,
            }
        }
        Solver::MasterEquation => {
            let g = GeneralProgram::from_control(&e.program, e.grid.t_final)?;
            let s = if g.basis == Basis::Tilted {
                bloch::tilt_basis(&state, omega_a, 0.0, TiltDirection::LabToTilted)?
            } else {
                state
            };
            bloch::evolve_general_me(&s, &bath, &g, e.grid.t_final, samples)?
        }
    };
    let lab = traj.to_lab(omega_a)?;
    let mut table = CsvTable::new([
        "t",
        "re_rho_ee",
        "im_rho_ee",
        "re_rho_eg",
        "im_rho_eg",
        "P_e",
        "abs_rho_eg",
    ]);
    let mut drift = 0.0f64;
    let mut herm = 0.0f64;
    for (&t, s) in lab.times.iter().zip(&lab.states) {
        let ee = s.rho[(0, 0)];
        let eg = s.coherence();
        table.push(vec![t, ee.re, ee.im, eg.re, eg.im, s.upper_population(), eg.norm()]);
        drift = drift.max((s.trace() - 1.0).abs());
        herm = herm.max(s.hermiticity_defect());
    }
    let last = lab.states.last().expect("trajectory has samples");
    let mut out = Outcome::new(table);
    out.add("R_GR", bath.golden_rule_rate(carrier(&e.program))?);
    out.add("P_e_final", last.upper_population());
    out.add("abs_rho_eg_final", last.coherence().norm());
    out.add("trace_drift", drift);
    out.add("hermiticity_defect", herm);
    Ok(out)
}

fn run_filter(e: &FilterExperiment) -> Result<Outcome> {
    let omegas = e.frequencies.values();
    let values = omegas
        .par_iter()
        .map(|&w| e.modulation.filter_function(e.t, w))
        .collect::<Result<Vec<_>>>()?;
    let mut table = CsvTable::new(["omega", "F"]);
    let mut peak = (f64::NAN, f64::NEG_INFINITY);
    for (&w, &f) in omegas.iter().zip(&values) {
        table.push(vec![w, f]);
        if f > peak.1 {
            peak = (w, f);
        }
    }
    let mass: f64 = omegas
        .windows(2)
        .zip(values.windows(2))
        .map(|(w, f)| 0.5 * (w[1] - w[0]) * (f[0] + f[1]))
        .sum();
    let mut out = Outcome::new(table);
    out.add("fluence", e.modulation.fluence(e.t));
    out.add("grid_mass", mass);
    out.add("peak_omega", peak.0);
    out.add("peak_F", peak.1);
    Ok(out)
}

fn run_multi_an(e: &MultiAnExperiment) -> Result<Outcome> {
    let times = e.grid.times();
    let report = mp::an_fidelity_evolution(&e.coupling, &e.modulations, &e.initial, &times, e.substeps)?;
    let mut table = CsvTable::new(["t", "F", "F_p", "F_c", "C"]);
    for (&t, f) in report.times.iter().zip(&report.values) {
        table.push(vec![t, f.f, f.f_p, f.f_c, f.concurrence]);
    }
    let last = report.values.last().expect("grid has samples");
    let j = mp::decoherence_matrix(&e.coupling, &e.modulations, e.grid.t_final)?;
    let mut out = Outcome::new(table);
    out.add("F_final", last.f);
    out.add("F_p_final", last.f_p);
    out.add("F_c_final", last.f_c);
    out.add("C_final", last.concurrence);
    out.add("max_diag_J", j.max_diagonal());
    out.add("max_offdiag_J", j.max_off_diagonal());
    Ok(out)
}

fn run_multi_pn(e: &MultiPnExperiment) -> Result<Outcome> {
    if e.coupling.size() != 2 {
        return Err(Error::invalid("at /coupling: multi-pn reports need exactly two qubits"));
    }
    let times = e.grid.times();
    let rows = times
        .par_iter()
        .map(|&t| {
            let j = mp::cross_dephasing_matrix(&e.coupling, &e.modulations, e.bell, t)?;
            let f = mp::pn_bell_fidelity(&e.coupling, &e.modulations, e.bell, t)?;
            Ok(vec![t, j.values[(0, 0)].re, j.values[(1, 1)].re, j.values[(0, 1)].norm(), f])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = CsvTable::new(["t", "J11", "J22", "abs_J12", "F_l"]);
    for r in rows {
        table.push(r);
    }
    let last = table.rows.last().expect("grid has samples").clone();
    let mut out = Outcome::new(table);
    out.add("J11_final", last[1]);
    out.add("J22_final", last[2]);
    out.add("abs_J12_final", last[3]);
    out.add("F_l_final", last[4]);
    Ok(out)
}

fn run_oracle(e: &OracleExperiment) -> Result<Outcome> {
    let bath = e.bath.build()?;
    let window = e.window.map(|[a, b]| (a, b));
    let db = oracle::discretize(&bath, e.modes, window, e.n_max)?;
    let horizon = match e.horizon {
        Some(h) => h,
        None => db.default_horizon(&bath)?,
    };
    let cmp = match e.program.regime() {
        Regime::Amplitude => oracle::compare_an(&bath, &db, &e.program, horizon, e.samples)?,
        Regime::Phase => oracle::compare_pn(&bath, &db, &e.program, horizon, e.samples)?,
    };
    let mut table = CsvTable::new(["t", "exact", "predicted", "relative_deviation"]);
    for r in &cmp.rows {
        table.push(vec![r.t, r.exact, r.predicted, r.relative_deviation]);
    }
    let mut out = Outcome::new(table);
    out.add("max_relative_deviation", cmp.max_relative_deviation);
    out.add("gate", e.gate);
    out.add("horizon", horizon);
    out.add("recurrence_time", db.recurrence_time);
    out.add("l1_error", db.l1_error);
    out.gate_failed = !(cmp.max_relative_deviation < e.gate);
    Ok(out)
}

fn run_design(e: &DesignExperiment) -> Result<Outcome> {
    let design = mp::iip_design(&e.coupling, &e.request)?;
    let mut table = CsvTable::new(["qubit", "shift", "spectral_value"]);
    for (j, &d) in design.shifts.iter().enumerate() {
        let v = e.coupling.entry(j, j, e.request.omega_0 + d).re;
        table.push(vec![(j + 1) as f64, d, v]);
    }
    let mut out = Outcome::new(table);
    out.add("level", design.level);
    if let Some(t) = e.probe_time {
        let j = mp::decoherence_matrix(&e.coupling, &design.modulations, t)?;
        out.add("max_diag_J", j.max_diagonal());
        out.add("offdiag_ratio", j.max_off_diagonal() / j.max_diagonal());
        out.add("diagonal_spread", j.diagonal_spread());
    }
    out.artifact = Some(serde_json::to_value(&design.modulations).expect("modulations serialize"));
    Ok(out)
}
