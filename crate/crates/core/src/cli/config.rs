//! Run configuration: a flat dotted-key document such as
//!
//! ```text
//! model.J = 0.5
//! numerics.phonon_cutoff = 10
//! filter.n_points = 641
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::dynamics::{EvolutionConfig, Method};
use crate::error::{Error, Result};
use crate::hilbert::Truncation;
use crate::model::{InitialExcitation, ModelParams};
use crate::spectrum::FilterParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Model parameters a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    J,
    DeltaAc,
    GammaM,
    GammaA,
    Mbar,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [Self::J, Self::DeltaAc, Self::GammaM, Self::GammaA, Self::Mbar];

    pub fn key(&self) -> &'static str {
        match self {
            Self::J => "J",
            Self::DeltaAc => "delta_ac",
            Self::GammaM => "gamma_M",
            Self::GammaA => "gamma_a",
            Self::Mbar => "Mbar",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.key() == s)
    }

    pub fn apply(&self, params: &mut ModelParams, value: f64) {
        match self {
            Self::J => params.j = value,
            Self::DeltaAc => params.delta_ac = value,
            Self::GammaM => params.gamma_m = value,
            Self::GammaA => params.gamma_a = value,
            Self::Mbar => params.mbar = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub correlation_dump: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub initial: InitialExcitation,
    pub numerics: EvolutionConfig,
    pub truncation: Truncation,
    /// Repeat the run with four more phonon levels and compare.
    pub convergence_check: bool,
    pub filter: FilterParams,
    pub output: OutputPaths,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            initial: InitialExcitation::Atom1,
            numerics: EvolutionConfig::default(),
            truncation: Truncation::default(),
            convergence_check: false,
            filter: FilterParams::default(),
            output: OutputPaths::default(),
            sweep: None,
        }
    }
}

fn bad(path: &str, what: impl std::fmt::Display) -> Error {
    Error::config(format!("{path}: {what}"))
}

fn as_f64(path: &str, v: &Value) -> Result<f64> {
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        other => return Err(bad(path, format!("expected a number, found {}", other.type_str()))),
    };
    if !x.is_finite() {
        return Err(bad(path, "must be finite"));
    }
    Ok(x)
}

fn as_usize(path: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(_) => Err(bad(path, "must be non-negative")),
        other => Err(bad(path, format!("expected an integer, found {}", other.type_str()))),
    }
}

fn as_bool(path: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(path, format!("expected true or false, found {}", v.type_str())))
}

fn as_str<'a>(path: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(path, format!("expected a string, found {}", v.type_str())))
}

fn section<'a>(name: &str, v: &'a Value) -> Result<&'a Table> {
    v.as_table().ok_or_else(|| bad(name, "expected a group of dotted keys"))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("config syntax: {}", e.message().replace('\n', " "))))?;
    let mut cfg = RunConfig::default();
    let mut budget_mb = None;
    let mut sweep_parameter = None;
    let mut sweep_values = None;
    for (name, body) in &doc {
        let table = section(name, body)?;
        for (key, v) in table {
            let path = format!("{name}.{key}");
            let p = path.as_str();
            match (name.as_str(), key.as_str()) {
                ("model", "g_a") => cfg.model.g_a = as_f64(p, v)?,
                ("model", "g_M") => cfg.model.g_m = as_f64(p, v)?,
                ("model", "delta_ac") => cfg.model.delta_ac = as_f64(p, v)?,
                ("model", "J") => cfg.model.j = as_f64(p, v)?,
                ("model", "kappa") => cfg.model.kappa = as_f64(p, v)?,
                ("model", "gamma_a") => cfg.model.gamma_a = as_f64(p, v)?,
                ("model", "gamma_a_coop") => cfg.model.gamma_a_coop = as_f64(p, v)?,
                ("model", "gamma_M") => cfg.model.gamma_m = as_f64(p, v)?,
                ("model", "Mbar") => cfg.model.mbar = as_f64(p, v)?,
                ("model", "initial") => {
                    let s = as_str(p, v)?;
                    cfg.initial = InitialExcitation::from_name(s).ok_or_else(|| {
                        bad(p, format!("unknown initial state {s:?}; use atom1, atom2, symmetric or antisymmetric"))
                    })?;
                }
                ("numerics", "dt") => cfg.numerics.dt = as_f64(p, v)?,
                ("numerics", "t_max") => cfg.numerics.t_max = as_f64(p, v)?,
                ("numerics", "leak_tolerance") => cfg.numerics.leak_tolerance = as_f64(p, v)?,
                ("numerics", "method") => {
                    let s = as_str(p, v)?;
                    cfg.numerics.method = Method::from_name(s)
                        .ok_or_else(|| bad(p, format!("unknown method {s:?}; use rk4 or dense")))?;
                }
                ("numerics", "substeps") => cfg.numerics.substeps = as_usize(p, v)?,
                ("numerics", "photon_cutoff") => cfg.truncation.photon_cutoff = as_usize(p, v)?,
                ("numerics", "phonon_cutoff") => cfg.truncation.phonon_cutoff = as_usize(p, v)?,
                ("numerics", "excitation_cap") => {
                    cfg.truncation.excitation_cap = match as_usize(p, v)? {
                        0 => None,
                        c => Some(c),
                    }
                }
                ("numerics", "grid_memory_budget_mb") => budget_mb = Some(as_usize(p, v)?),
                ("numerics", "check_positivity") => cfg.numerics.check_positivity = as_bool(p, v)?,
                ("numerics", "convergence_check") => cfg.convergence_check = as_bool(p, v)?,
                ("filter", "Gamma") => cfg.filter.gamma = as_f64(p, v)?,
                ("filter", "delta_min") => cfg.filter.delta_min = as_f64(p, v)?,
                ("filter", "delta_max") => cfg.filter.delta_max = as_f64(p, v)?,
                ("filter", "n_points") => cfg.filter.n_points = as_usize(p, v)?,
                ("filter", "peak_threshold") => cfg.filter.peak_threshold = as_f64(p, v)?,
                ("output", "csv") => cfg.output.csv = Some(as_str(p, v)?.into()),
                ("output", "svg") => cfg.output.svg = Some(as_str(p, v)?.into()),
                ("output", "correlation_dump") => cfg.output.correlation_dump = Some(as_str(p, v)?.into()),
                ("sweep", "parameter") => {
                    let s = as_str(p, v)?;
                    let names: Vec<_> = SweepParameter::ALL.iter().map(|q| q.key()).collect();
                    sweep_parameter = Some(SweepParameter::from_key(s).ok_or_else(|| {
                        bad(p, format!("cannot sweep {s:?}; choose one of {}", names.join(", ")))
                    })?);
                }
                ("sweep", "values") => {
                    let arr = v.as_array().ok_or_else(|| bad(p, "expected an array of numbers"))?;
                    let vals = arr
                        .iter()
                        .enumerate()
                        .map(|(i, x)| as_f64(&format!("{p}[{i}]"), x))
                        .collect::<Result<Vec<_>>>()?;
                    if vals.is_empty() {
                        return Err(bad(p, "needs at least one value"));
                    }
                    sweep_values = Some(vals);
                }
                _ => return Err(bad(p, "unknown key")),
            }
        }
        if !matches!(name.as_str(), "model" | "numerics" | "filter" | "output" | "sweep") {
            return Err(bad(name, "unknown key"));
        }
    }
    if let Some(mb) = budget_mb {
        cfg.numerics.grid_memory_budget = mb << 20;
    }
    cfg.sweep = match (sweep_parameter, sweep_values) {
        (Some(parameter), Some(values)) => Some(SweepSpec { parameter, values }),
        (None, None) => None,
        (Some(_), None) => return Err(bad("sweep.values", "missing; required with sweep.parameter")),
        (None, Some(_)) => return Err(bad("sweep.parameter", "missing; required with sweep.values")),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.numerics.validate(&self.model)?;
        self.truncation.build()?;
        self.filter.validate()?;
        if let Some(sweep) = &self.sweep {
            for v in &sweep.values {
                let mut m = self.model.clone();
                sweep.parameter.apply(&mut m, *v);
                m.validate().map_err(|e| bad("sweep.values", format!("{} = {v}: {e}", sweep.parameter.key())))?;
                self.numerics.validate(&m)?;
            }
        }
        Ok(())
    }

    /// Physics and numerics as a config document; parsing it back yields the
    /// same model, numerics and filter. Output paths and the sweep are left
    /// out so the text depends only on what determines the numbers.
    pub fn echo(&self) -> String {
        let m = &self.model;
        let n = &self.numerics;
        let t = &self.truncation;
        let f = &self.filter;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model.g_a", format!("{:?}", m.g_a));
        put("model.g_M", format!("{:?}", m.g_m));
        put("model.delta_ac", format!("{:?}", m.delta_ac));
        put("model.J", format!("{:?}", m.j));
        put("model.kappa", format!("{:?}", m.kappa));
        put("model.gamma_a", format!("{:?}", m.gamma_a));
        put("model.gamma_a_coop", format!("{:?}", m.gamma_a_coop));
        put("model.gamma_M", format!("{:?}", m.gamma_m));
        put("model.Mbar", format!("{:?}", m.mbar));
        put("model.initial", format!("{:?}", self.initial.name()));
        put("numerics.dt", format!("{:?}", n.dt));
        put("numerics.t_max", format!("{:?}", n.t_max));
        put("numerics.leak_tolerance", format!("{:?}", n.leak_tolerance));
        put("numerics.method", format!("{:?}", n.method.name()));
        put("numerics.substeps", n.substeps.to_string());
        put("numerics.photon_cutoff", t.photon_cutoff.to_string());
        put("numerics.phonon_cutoff", t.phonon_cutoff.to_string());
        put("numerics.excitation_cap", t.excitation_cap.unwrap_or(0).to_string());
        put("numerics.grid_memory_budget_mb", (n.grid_memory_budget >> 20).to_string());
        put("numerics.check_positivity", n.check_positivity.to_string());
        put("numerics.convergence_check", self.convergence_check.to_string());
        put("filter.Gamma", format!("{:?}", f.gamma));
        put("filter.delta_min", format!("{:?}", f.delta_min));
        put("filter.delta_max", format!("{:?}", f.delta_max));
        put("filter.n_points", f.n_points.to_string());
        put("filter.peak_threshold", format!("{:?}", f.peak_threshold));
        s
    }

    /// Fingerprint of everything that shapes the correlation grid.
    pub fn grid_hash(&self) -> u64 {
        let mut h = Sha256::new();
        for line in self.echo().lines() {
            let key = line.split(" = ").next().unwrap_or("");
            let shapes_grid = key.starts_with("model.")
                || (key.starts_with("numerics.")
                    && !matches!(
                        key,
                        "numerics.grid_memory_budget_mb" | "numerics.check_positivity" | "numerics.convergence_check"
                    ));
            if shapes_grid {
                h.update(line.as_bytes());
                h.update(b"\n");
            }
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// The configuration of one member of the sweep.
    pub fn at_sweep_value(&self, parameter: SweepParameter, value: f64) -> RunConfig {
        let mut c = self.clone();
        parameter.apply(&mut c.model, value);
        c.sweep = None;
        c
    }
}
