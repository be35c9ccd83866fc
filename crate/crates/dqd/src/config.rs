//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dqd_core::expfit::LagGrid;
use dqd_core::pipeline::FitSettings;
use dqd_core::steady::{AsymmetryOptions, SteadyOptions};
use dqd_core::ModelParams;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Weak,
    Polaron,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Weak => "weak",
            Method::Polaron => "polaron",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Weak,
    Polaron,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> &'static [Method] {
        match self {
            MethodChoice::Weak => &[Method::Weak],
            MethodChoice::Polaron => &[Method::Polaron],
            MethodChoice::Both => &[Method::Weak, Method::Polaron],
        }
    }
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weak" => Ok(MethodChoice::Weak),
            "polaron" => Ok(MethodChoice::Polaron),
            "both" => Ok(MethodChoice::Both),
            _ => Err(format!("expected weak, polaron or both, got `{s}`")),
        }
    }
}

/// Keys every configuration must supply, in canonical order.
pub const REQUIRED_KEYS: [&str; 22] = [
    "epsilon",
    "delta",
    "omega0",
    "Omega0",
    "P",
    "omega_c",
    "d_cs",
    "kT",
    "method",
    "eps_min",
    "eps_max",
    "eps_steps",
    "rtol",
    "atol",
    "quad_tol",
    "fit_tol_kernel",
    "fit_tol_spectral",
    "steady_tol",
    "max_periods",
    "workers",
    "n_terms_max",
    "output_path",
];

/// Keys with defaults.
pub const OPTIONAL_KEYS: [&str; 8] = [
    "fit_tol_weak_kernel",
    "samples_per_period",
    "shoulder_inner",
    "shoulder_outer",
    "shoulder_slope_fraction",
    "shoulder_run",
    "shoulder_baseline_factor",
    "shoulder_neighborhood",
];

fn known(key: &str) -> bool {
    REQUIRED_KEYS.contains(&key) || OPTIONAL_KEYS.contains(&key)
}

/// Raw key/value pairs before validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !known(key) {
                return Err(CliError::Config(format!("unknown key `{key}`")));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("key `{key}` given twice")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn into_config(self) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(&self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub method: MethodChoice,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_steps: usize,
    pub rtol: f64,
    pub atol: f64,
    pub quad_tol: f64,
    pub fit_tol_kernel: f64,
    pub fit_tol_spectral: f64,
    pub fit_tol_weak_kernel: f64,
    pub steady_tol: f64,
    pub max_periods: usize,
    pub samples_per_period: usize,
    pub workers: usize,
    pub n_terms_max: usize,
    pub output_path: PathBuf,
    pub shoulder: AsymmetryOptions,
}

fn value<T: FromStr>(raw: &RawConfig, key: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    let text = raw.get(key).ok_or_else(|| CliError::Config(format!("missing key `{key}`")))?;
    text.parse().map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{text}`: {e}")))
}

fn value_or<T: FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    if raw.get(key).is_some() { value(raw, key) } else { Ok(default) }
}

fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("key `{key}` must be positive, got {x}")))
    }
}

fn at_least_one(key: &str, n: usize) -> Result<usize, CliError> {
    if n >= 1 { Ok(n) } else { Err(CliError::Config(format!("key `{key}` must be at least 1"))) }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| raw.get(k).is_none()).collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!("missing keys: {}", missing.join(", "))));
        }
        let params = ModelParams {
            bias: value(raw, "epsilon")?,
            tunneling: value(raw, "delta")?,
            drive_frequency: value(raw, "omega0")?,
            drive_amplitude: value(raw, "Omega0")?,
            coupling: value(raw, "P")?,
            cutoff: value(raw, "omega_c")?,
            delay: value(raw, "d_cs")?,
            temperature: value(raw, "kT")?,
        };
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let tol = |key: &str| value::<f64>(raw, key).and_then(|x| positive(key, x));
        let count = |key: &str| value::<usize>(raw, key).and_then(|n| at_least_one(key, n));
        let eps_min: f64 = value(raw, "eps_min")?;
        let eps_max: f64 = value(raw, "eps_max")?;
        if !(eps_min < eps_max) {
            return Err(CliError::Config(format!("key `eps_min` must be below `eps_max`, got {eps_min} and {eps_max}")));
        }
        let defaults = AsymmetryOptions::default();
        let shoulder = AsymmetryOptions {
            inner: positive("shoulder_inner", value_or(raw, "shoulder_inner", defaults.inner)?)?,
            outer: positive("shoulder_outer", value_or(raw, "shoulder_outer", defaults.outer)?)?,
            slope_fraction: positive(
                "shoulder_slope_fraction",
                value_or(raw, "shoulder_slope_fraction", defaults.slope_fraction)?,
            )?,
            run: at_least_one("shoulder_run", value_or(raw, "shoulder_run", defaults.run)?)?,
            baseline_factor: positive(
                "shoulder_baseline_factor",
                value_or(raw, "shoulder_baseline_factor", defaults.baseline_factor)?,
            )?,
            neighborhood: at_least_one(
                "shoulder_neighborhood",
                value_or(raw, "shoulder_neighborhood", defaults.neighborhood)?,
            )?,
        };
        if shoulder.inner >= shoulder.outer {
            return Err(CliError::Config("key `shoulder_inner` must be below `shoulder_outer`".into()));
        }
        let fit_defaults = FitSettings::default();
        let steady_defaults = SteadyOptions::default();
        Ok(RunConfig {
            params,
            method: value(raw, "method")?,
            eps_min,
            eps_max,
            eps_steps: count("eps_steps")?,
            rtol: tol("rtol")?,
            atol: tol("atol")?,
            quad_tol: tol("quad_tol")?,
            fit_tol_kernel: tol("fit_tol_kernel")?,
            fit_tol_spectral: tol("fit_tol_spectral")?,
            fit_tol_weak_kernel: positive(
                "fit_tol_weak_kernel",
                value_or(raw, "fit_tol_weak_kernel", fit_defaults.fit_tol_weak_kernel)?,
            )?,
            steady_tol: tol("steady_tol")?,
            max_periods: count("max_periods")?,
            samples_per_period: at_least_one(
                "samples_per_period",
                value_or(raw, "samples_per_period", steady_defaults.samples_per_period)?,
            )?,
            workers: count("workers")?,
            n_terms_max: count("n_terms_max")?,
            output_path: PathBuf::from(value::<String>(raw, "output_path")?),
            shoulder,
        })
    }

    /// Bias grid `eps_min + k·(eps_max − eps_min)/(eps_steps − 1)`.
    pub fn eps_grid(&self) -> Vec<f64> {
        if self.eps_steps == 1 {
            return vec![self.eps_min];
        }
        let n = self.eps_steps - 1;
        (0..=n).map(|k| self.eps_min + (self.eps_max - self.eps_min) * k as f64 / n as f64).collect()
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            quad_tol: self.quad_tol,
            fit_tol_spectral: self.fit_tol_spectral,
            fit_tol_kernel: self.fit_tol_kernel,
            fit_tol_weak_kernel: self.fit_tol_weak_kernel,
            n_terms_max: self.n_terms_max,
            grid: LagGrid::TRAINING,
        }
    }

    pub fn steady_options(&self) -> SteadyOptions {
        SteadyOptions {
            steady_tol: self.steady_tol,
            max_periods: self.max_periods,
            samples_per_period: self.samples_per_period,
            rtol: self.rtol,
            atol: self.atol,
            ..SteadyOptions::default()
        }
    }
}
