//! Experiment configuration files.
//!
//! A config is a JSON object whose `kind` selects the experiment. Data files
//! can stand in for inline arrays: objects of kind `tabulated_csv`,
//! `sampled_csv` and `mode_list_csv` carrying a `file` (relative to the
//! config's directory) are replaced by the loaded spectrum, waveform or mode
//! list before the config is decoded.

use std::fs::File;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bath::{SpectrumModel, ThermalBathSpectrum};
use crate::bloch::{ControlProgram, QubitState};
use crate::error::{Error, Result};
use crate::io;
use crate::modulation::ModulationWaveform;
use crate::multipartite::{CouplingSpectrumMatrix, DesignRequest, LocalModulationSet};

pub const KINDS: [&str; 7] = [
    "rate",
    "bloch",
    "filter",
    "multi-an",
    "multi-pn",
    "oracle-compare",
    "design-iip",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub model: SpectrumModel,
    /// Inverse temperature; absent means `T = 0`.
    #[serde(default)]
    pub beta: Option<f64>,
}

impl BathSpec {
    pub fn build(&self) -> Result<ThermalBathSpectrum> {
        ThermalBathSpectrum::new(self.model.clone(), self.beta.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_final: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    101
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        (0..n).map(|k| self.t_final * k as f64 / (n - 1) as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::invalid("grid.t_final must be finite and > 0"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("grid.samples must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub low: f64,
    pub high: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.low];
        }
        (0..self.points)
            .map(|k| self.low + (self.high - self.low) * k as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Initial qubit state in the lab basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Excited,
    Ground,
    Coherent,
    /// `a|e⟩ + b|g⟩`, normalized on load.
    Pure { a: Complex64, b: Complex64 },
}

impl InitialState {
    pub fn state(&self) -> Result<QubitState> {
        use crate::bloch::Basis;
        match *self {
            InitialState::Excited => Ok(QubitState::excited()),
            InitialState::Ground => QubitState::pure(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Basis::Lab),
            InitialState::Coherent => Ok(QubitState::coherent()),
            InitialState::Pure { a, b } => {
                let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::invalid("initial state amplitudes must be finite and not both zero"));
                }
                QubitState::pure(a / n, b / n, Basis::Lab)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Bloch,
    MasterEquation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateExperiment {
    pub bath: BathSpec,
    pub program: ControlProgram,
    pub grid: TimeGrid,
    /// Harmonics retained for the long-time rate.
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_harmonics() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochExperiment {
    pub bath: BathSpec,
    pub program: ControlProgram,
    pub initial: InitialState,
    pub grid: TimeGrid,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterExperiment {
    pub modulation: ModulationWaveform,
    pub t: f64,
    pub frequencies: FrequencyGrid,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAnExperiment {
    pub coupling: CouplingSpectrumMatrix,
    pub modulations: LocalModulationSet,
    /// Single-excitation amplitudes, one per qubit.
    pub initial: Vec<Complex64>,
    pub grid: TimeGrid,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_substeps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiPnExperiment {
    pub coupling: CouplingSpectrumMatrix,
    pub modulations: LocalModulationSet,
    /// Bell state index `l ∈ 1..=4`.
    pub bell: usize,
    pub grid: TimeGrid,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleExperiment {
    pub bath: BathSpec,
    pub program: ControlProgram,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Discretization window; defaults to the spectrum's support.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Defaults to `min(0.4·recurrence, 10·t_c)`.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_oracle_samples")]
    pub samples: usize,
    /// Largest acceptable relative deviation.
    #[serde(default = "default_gate")]
    pub gate: f64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_modes() -> usize {
    crate::oracle::DEFAULT_MODES
}

fn default_n_max() -> usize {
    2
}

fn default_oracle_samples() -> usize {
    41
}

fn default_gate() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignExperiment {
    pub coupling: CouplingSpectrumMatrix,
    pub request: DesignRequest,
    /// Time at which the designed decoherence matrix is evaluated.
    #[serde(default)]
    pub probe_time: Option<f64>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Rate(RateExperiment),
    Bloch(BlochExperiment),
    Filter(FilterExperiment),
    MultiAn(MultiAnExperiment),
    MultiPn(MultiPnExperiment),
    OracleCompare(OracleExperiment),
    DesignIip(DesignExperiment),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Rate(_) => "rate",
            ExperimentConfig::Bloch(_) => "bloch",
            ExperimentConfig::Filter(_) => "filter",
            ExperimentConfig::MultiAn(_) => "multi-an",
            ExperimentConfig::MultiPn(_) => "multi-pn",
            ExperimentConfig::OracleCompare(_) => "oracle-compare",
            ExperimentConfig::DesignIip(_) => "design-iip",
        }
    }

    /// Output file name, `<kind>.csv` unless overridden.
    pub fn output(&self) -> String {
        let o = match self {
            ExperimentConfig::Rate(e) => &e.output,
            ExperimentConfig::Bloch(e) => &e.output,
            ExperimentConfig::Filter(e) => &e.output,
            ExperimentConfig::MultiAn(e) => &e.output,
            ExperimentConfig::MultiPn(e) => &e.output,
            ExperimentConfig::OracleCompare(e) => &e.output,
            ExperimentConfig::DesignIip(e) => &e.output,
        };
        o.clone().unwrap_or_else(|| format!("{}.csv", self.kind()))
    }

    /// Read, resolve data files and decode a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_value(value, &base)
    }

    pub fn from_value(mut value: Value, base: &Path) -> Result<Self> {
        resolve_files(&mut value, base, &mut Vec::new())?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::invalid("at /: config must be a JSON object"))?;
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(Error::invalid("at /kind: expected a string")),
            None => return Err(Error::invalid("at /kind: missing experiment kind")),
        };
        let cfg = match kind.as_str() {
            "rate" => ExperimentConfig::Rate(decode(value)?),
            "bloch" => ExperimentConfig::Bloch(decode(value)?),
            "filter" => ExperimentConfig::Filter(decode(value)?),
            "multi-an" => ExperimentConfig::MultiAn(decode(value)?),
            "multi-pn" => ExperimentConfig::MultiPn(decode(value)?),
            "oracle-compare" => ExperimentConfig::OracleCompare(decode(value)?),
            "design-iip" => ExperimentConfig::DesignIip(decode(value)?),
            other => {
                return Err(Error::invalid(format!(
                    "at /kind: unknown experiment kind `{other}` (expected one of {})",
                    KINDS.join(", ")
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Physical-parameter checks that do not need a computation.
    pub fn validate(&self) -> Result<()> {
        let program = |p: &ControlProgram| -> Result<()> {
            if !p.omega_a().is_finite() {
                return Err(Error::invalid("at /program/omega_a: must be finite"));
            }
            p.envelope().validate()?;
            if let Some(f) = p.frame() {
                f.validate()?;
            }
            Ok(())
        };
        let mods = |m: &LocalModulationSet| -> Result<()> {
            for q in &m.qubits {
                if !q.carrier.is_finite() {
                    return Err(Error::invalid("carrier frequencies must be finite"));
                }
                q.envelope.validate()?;
                if let Some(f) = &q.frame {
                    f.validate()?;
                }
            }
            Ok(())
        };
        match self {
            ExperimentConfig::Rate(e) => {
                e.bath.build()?;
                program(&e.program)?;
                e.grid.validate()
            }
            ExperimentConfig::Bloch(e) => {
                e.bath.build()?;
                program(&e.program)?;
                e.initial.state()?;
                e.grid.validate()
            }
            ExperimentConfig::Filter(e) => {
                e.modulation.validate()?;
                if !(e.t.is_finite() && e.t > 0.0) {
                    return Err(Error::invalid("at /t: must be finite and > 0"));
                }
                let f = e.frequencies;
                if f.points == 0 || !(f.low.is_finite() && f.high.is_finite() && f.high >= f.low) {
                    return Err(Error::invalid("at /frequencies: need points >= 1 and finite low <= high"));
                }
                Ok(())
            }
            ExperimentConfig::MultiAn(e) => {
                e.coupling.validate()?;
                mods(&e.modulations)?;
                if e.modulations.qubits.len() != e.coupling.size() || e.initial.len() != e.coupling.size() {
                    return Err(Error::invalid(
                        "at /modulations: qubit count must match the coupling matrix and the initial amplitudes",
                    ));
                }
                e.grid.validate()
            }
            ExperimentConfig::MultiPn(e) => {
                e.coupling.validate()?;
                mods(&e.modulations)?;
                if e.modulations.qubits.len() != e.coupling.size() {
                    return Err(Error::invalid("at /modulations: qubit count must match the coupling matrix"));
                }
                if !(1..=4).contains(&e.bell) {
                    return Err(Error::invalid("at /bell: must be in 1..=4"));
                }
                e.grid.validate()
            }
            ExperimentConfig::OracleCompare(e) => {
                e.bath.build()?;
                program(&e.program)?;
                if !(e.gate.is_finite() && e.gate > 0.0) {
                    return Err(Error::invalid("at /gate: must be finite and > 0"));
                }
                if let Some(h) = e.horizon {
                    if !(h.is_finite() && h > 0.0) {
                        return Err(Error::invalid("at /horizon: must be finite and > 0"));
                    }
                }
                Ok(())
            }
            ExperimentConfig::DesignIip(e) => e.coupling.validate(),
        }
    }
}

fn decode<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => Some(format!("/{key}")),
                _ => None,
            })
            .collect();
        let pointer = if pointer.is_empty() { "/".to_string() } else { pointer };
        Error::invalid(format!("at {pointer}: {}", e.inner()))
    })
}

fn open(base: &Path, file: &str, at: &str) -> Result<File> {
    let path: PathBuf = base.join(file);
    File::open(&path).map_err(|e| Error::invalid(format!("at {at}: cannot open {}: {e}", path.display())))
}

fn with_file<T>(r: Result<T>, file: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{file}: {message}"),
        },
        other => other,
    })
}

fn resolve_files(value: &mut Value, base: &Path, path: &mut Vec<String>) -> Result<()> {
    match value {
        Value::Object(map) => {
            let kind = map.get("kind").and_then(Value::as_str).map(str::to_owned);
            if let Some(kind @ ("tabulated_csv" | "sampled_csv" | "mode_list_csv")) = kind.as_deref() {
                let at = format!("/{}", path.join("/"));
                let file = map
                    .get("file")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::invalid(format!("at {at}: `{kind}` needs a `file` string")))?
                    .to_owned();
                let reader = open(base, &file, &at)?;
                let loaded = match kind {
                    "tabulated_csv" => serde_json::to_value(with_file(io::read_spectrum(reader), &file)?),
                    "sampled_csv" => serde_json::to_value(with_file(io::read_waveform(reader), &file)?),
                    _ => {
                        let broadening = map.get("broadening").and_then(Value::as_f64);
                        serde_json::to_value(with_file(io::read_mode_list(reader, broadening), &file)?)
                    }
                }
                .map_err(|e| Error::invalid(format!("at {at}: {e}")))?;
                *value = loaded;
                return Ok(());
            }
            for (k, v) in map.iter_mut() {
                path.push(k.clone());
                resolve_files(v, base, path)?;
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter_mut().enumerate() {
                path.push(i.to_string());
                resolve_files(v, base, path)?;
                path.pop();
            }
        }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rate_config() -> Value {
        json!({
            "kind": "rate",
            "bath": { "model": { "kind": "lorentzian", "height": 0.01, "center": 5.0, "width": 1.0 } },
            "program": {
                "regime": "amplitude",
                "omega_a": 5.0,
                "envelope": { "kind": "monochromatic", "amplitude": 1.0, "shift": 1.0 }
            },
            "grid": { "t_final": 20.0 }
        })
    }

    #[test]
    fn decodes_rate_config() {
        let cfg = ExperimentConfig::from_value(rate_config(), Path::new(".")).unwrap();
        assert_eq!(cfg.kind(), "rate");
        assert_eq!(cfg.output(), "rate.csv");
    }

    #[test]
    fn pointer_in_schema_error() {
        let mut v = rate_config();
        v["grid"]["samples"] = json!("many");
        let msg = ExperimentConfig::from_value(v, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("/grid/samples"), "{msg}");
        let mut v = rate_config();
        v["bogus"] = json!(1);
        assert!(ExperimentConfig::from_value(v, Path::new(".")).is_err());
    }

    #[test]
    fn invariant_violation_named() {
        let mut v = rate_config();
        v["program"]["envelope"] = json!({ "kind": "on_off", "on_time": 2.0, "period": 1.0 });
        let msg = ExperimentConfig::from_value(v, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("on_time <= period"), "{msg}");
    }

    #[test]
    fn csv_reference_is_loaded() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.csv"), "omega,G0\n0,0\n5,0.01\n10,0\n").unwrap();
        let mut v = rate_config();
        v["bath"]["model"] = json!({ "kind": "tabulated_csv", "file": "g.csv" });
        match ExperimentConfig::from_value(v, dir.path()).unwrap() {
            ExperimentConfig::Rate(e) => assert!(matches!(e.bath.model, SpectrumModel::Tabulated { .. })),
            other => panic!("{other:?}"),
        }
        let mut v = rate_config();
        v["bath"]["model"] = json!({ "kind": "tabulated_csv", "file": "missing.csv" });
        let msg = ExperimentConfig::from_value(v, dir.path()).unwrap_err().to_string();
        assert!(msg.contains("/bath/model"), "{msg}");
    }
}
