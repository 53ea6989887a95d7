//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Command-line overrides use the same keys.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chemotaxis_core::nonlinear::{Dealias, Integrator};
use chemotaxis_core::{ModeIndex, ModelParams, SolverConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error in `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

/// Initial perturbation shape, always normalized to unit L² before use.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `r₊(q₀) e_{q₀}` for the first mode of Ω_max.
    Dominant,
    /// Gaussian coefficients drawn from the run seed.
    Random,
    /// Explicit `(q, u_q, v_q)` coefficients, all others zero.
    Modes(Vec<(ModeIndex, f64, f64)>),
}

impl FromStr for InitialDatum {
    type Err = String;

    /// `dominant`, `random`, or whitespace-separated `q1,q2:u:v` entries.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "dominant" => return Ok(Self::Dominant),
            "random" => return Ok(Self::Random),
            _ => {}
        }
        let mut modes = Vec::new();
        for entry in s.split_whitespace() {
            let parts: Vec<&str> = entry.split(':').collect();
            let [q, u, v] = parts[..] else {
                return Err(format!("expected `q1,q2:u:v`, got `{entry}`"));
            };
            let q: Vec<usize> = q
                .split(',')
                .map(|c| c.parse().map_err(|_| format!("bad mode index `{q}`")))
                .collect::<Result<_, _>>()?;
            let u: f64 = u.parse().map_err(|_| format!("bad coefficient `{u}`"))?;
            let v: f64 = v.parse().map_err(|_| format!("bad coefficient `{v}`"))?;
            modes.push((ModeIndex::new(q), u, v));
        }
        if modes.is_empty() {
            return Err("empty coefficient list".into());
        }
        Ok(Self::Modes(modes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n: usize,
    /// Grid size; the dealiasing minimum when unset.
    pub m: Option<usize>,
    pub dt: f64,
    /// Simulation end time, and the time budget of experiments.
    pub t_end: Option<f64>,
    pub dealias: Dealias,
    pub integrator: Integrator,
    pub nonlinear: bool,
    pub delta: f64,
    pub delta0: Option<f64>,
    pub deltas: Vec<f64>,
    pub theta_override: Option<f64>,
    pub w0: InitialDatum,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub samples: usize,
    /// Steps between stored states of `simulate`.
    pub sample_every: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Simulation length of `simulate` when `t_end` is not given.
pub const DEFAULT_T_END: f64 = 10.0;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::flagship(),
            n: 16,
            m: None,
            dt: 1e-3,
            t_end: None,
            dealias: Dealias::TwoThirds,
            integrator: Integrator::ImexRk2,
            nonlinear: true,
            delta: 1e-3,
            delta0: None,
            deltas: Vec::new(),
            theta_override: None,
            w0: InitialDatum::Dominant,
            c0: None,
            c1: None,
            samples: 64,
            sample_every: 100,
            seed: 0,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError::new(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        match key {
            "mu" => p.mu = parse(key, value)?,
            "chi" => p.chi = parse(key, value)?,
            "D" => p.diffusion = parse(key, value)?,
            "f" => p.secretion = parse(key, value)?,
            "k" => p.degradation = parse(key, value)?,
            "U_bar" => p.u_bar = parse(key, value)?,
            "d" => p.dim = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "M" => self.m = Some(parse(key, value)?),
            "dt" => self.dt = parse(key, value)?,
            "t_end" => self.t_end = Some(parse(key, value)?),
            "dealias" => self.dealias = parse(key, value)?,
            "integrator" => self.integrator = parse(key, value)?,
            "nonlinear" => self.nonlinear = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "delta0" => self.delta0 = Some(parse(key, value)?),
            "deltas" => self.deltas = parse_list(key, value)?,
            "theta_override" => self.theta_override = Some(parse(key, value)?),
            "w0" => self.w0 = value.parse().map_err(|e| ConfigError::new(key, e))?,
            "C0" => self.c0 = Some(parse(key, value)?),
            "C1" => self.c1 = Some(parse(key, value)?),
            "samples" => self.samples = parse(key, value)?,
            "sample_every" => self.sample_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    line,
                    format!("line {} is not of the form key = value", lineno + 1),
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `--key value` or `--key=value` pairs.
    pub fn merge_args(&mut self, args: &[String]) -> Result<(), ConfigError> {
        let mut iter = args.iter();
        while let Some(arg) = iter.next() {
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(ConfigError::new(arg.as_str(), "expected `--key value`"));
            };
            match flag.split_once('=') {
                Some((key, value)) => self.set(key, value)?,
                None => {
                    let value = iter
                        .next()
                        .ok_or_else(|| ConfigError::new(flag, "missing value"))?;
                    self.set(flag, value)?;
                }
            }
        }
        Ok(())
    }

    /// Checks the model and solver invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| {
            let key = match e {
                chemotaxis_core::Error::NonPositiveParameter(name) => name,
                _ => "d",
            };
            ConfigError::new(key, e)
        })?;
        self.solver(self.t_end.unwrap_or(DEFAULT_T_END))?;
        if self.samples == 0 {
            return Err(ConfigError::new("samples", "must be positive"));
        }
        if let InitialDatum::Modes(modes) = &self.w0 {
            for (q, _, _) in modes {
                if q.dim() != self.params.dim || q.as_slice().iter().any(|&c| c > self.n) {
                    return Err(ConfigError::new("w0", format!("mode {q} is outside the truncation")));
                }
            }
        }
        Ok(())
    }

    pub fn solver(&self, t_end: f64) -> Result<SolverConfig, ConfigError> {
        let mut cfg = SolverConfig::new(self.n, self.dt, t_end);
        cfg.dealias = self.dealias;
        cfg.m = self.m.unwrap_or_else(|| self.dealias.min_grid(self.n));
        cfg.integrator = self.integrator;
        cfg.nonlinear = self.nonlinear;
        cfg.validate().map_err(|e| {
            let key = match e {
                chemotaxis_core::Error::GridTooCoarse { .. } => "M",
                _ if !(self.dt > 0.0) => "dt",
                _ if !(t_end >= 0.0) => "t_end",
                _ => "N",
            };
            ConfigError::new(key, e)
        })?;
        Ok(cfg)
    }
}
