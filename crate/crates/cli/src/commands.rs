use std::io::{self, Write};

use chemotaxis_core::dispersion::growth_constant_estimate;
use chemotaxis_core::experiment::{
    self, dominant_mode_datum, random_unit_datum, sobolev_constant_probe, ExperimentOptions,
};
use chemotaxis_core::nonlinear::simulate;
use chemotaxis_core::{
    spectrum_summary, Error, ExperimentReport, ModelParams, RunStatus, SolverConfig, SpectralField,
    SpectrumSummary, TheoremConstants,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, InitialDatum, RunConfig, DEFAULT_T_END};
use crate::output::{num, opt_num, CsvWriter};

/// Random fields used for the default growth constant and Sobolev constant.
const PROBE_SAMPLES: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("solution blew up at t = {0}; partial output written")]
    BlowUp(f64),
    #[error("empty delta list")]
    EmptySweep,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::EmptySweep => 2,
            CliError::BlowUp(_) => 3,
            CliError::Core(e) => match e {
                Error::NonFinite { .. } | Error::BlowUp { .. } => 3,
                Error::NumericalContradiction(_)
                | Error::DegenerateEigenbasis { .. }
                | Error::Overflow { .. }
                | Error::SpectrumMismatch { .. }
                | Error::ShapeMismatch
                | Error::InsufficientSamples { .. } => 4,
                _ => 2,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_params<W: Write>(w: &mut CsvWriter<W>, p: &ModelParams) -> io::Result<()> {
    w.meta("mu", num(p.mu))?;
    w.meta("chi", num(p.chi))?;
    w.meta("D", num(p.diffusion))?;
    w.meta("f", num(p.secretion))?;
    w.meta("k", num(p.degradation))?;
    w.meta("U_bar", num(p.u_bar))?;
    w.meta("d", p.dim.to_string())
}

fn write_solver<W: Write>(w: &mut CsvWriter<W>, cfg: &SolverConfig) -> io::Result<()> {
    w.meta("N", cfg.n.to_string())?;
    w.meta("M", cfg.m.to_string())?;
    w.meta("dt", num(cfg.dt))?;
    w.meta("dealias", cfg.dealias.to_string())?;
    w.meta("integrator", cfg.integrator.to_string())?;
    w.meta("nonlinear", cfg.nonlinear.to_string())
}

fn spectrum(cfg: &RunConfig) -> Result<SpectrumSummary> {
    let params = cfg.params.validate()?;
    Ok(spectrum_summary(&params, cfg.n)?)
}

/// Spectrum row per mode plus a summary header.
pub fn dispersion<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    cfg.validate()?;
    let s = spectrum(cfg)?;
    let mut w = CsvWriter::new(out);
    w.meta("command", "dispersion")?;
    write_params(&mut w, s.params())?;
    w.meta("N", s.n().to_string())?;
    w.meta("lambda_max", num(s.lambda_max))?;
    w.meta("nu", num(s.nu))?;
    w.meta("nu_convention", "gap to every other eigenvalue, lambda_minus branches included")?;
    w.meta("unstable_count", s.unstable.len().to_string())?;
    let omega: Vec<String> = s.omega_max.iter().map(|q| q.to_string()).collect();
    w.meta("omega_max", omega.join(" "))?;
    w.meta("omega_max_count", s.omega_max.len().to_string())?;

    let dim = s.params().dim;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("q{i}")).collect();
    header.extend(["q2", "lambda_minus", "lambda_plus", "r_plus_u"].map(String::from));
    w.row(&header)?;
    for pair in s.pairs() {
        let mut row: Vec<String> = pair.q.as_slice().iter().map(|c| c.to_string()).collect();
        row.push(pair.q.q2().to_string());
        row.push(num(pair.lambda_minus));
        row.push(num(pair.lambda_plus));
        row.push(num(pair.r_plus[0]));
        w.row(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn initial_datum(cfg: &RunConfig, spectrum: &SpectrumSummary, rng: &mut ChaCha8Rng) -> Result<SpectralField> {
    let dim = cfg.params.dim;
    let w0 = match &cfg.w0 {
        InitialDatum::Dominant => dominant_mode_datum(spectrum, spectrum.dominant_mode()),
        InitialDatum::Random => random_unit_datum(cfg.n, dim, rng),
        InitialDatum::Modes(modes) => {
            let mut f = SpectralField::zeros(cfg.n, dim);
            for (q, u, v) in modes {
                f.set_mode(q, *u, *v);
            }
            let norm = f.l2_norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(ConfigError::new("w0", "coefficients must be finite and not all zero").into());
            }
            &f * (1.0 / norm)
        }
    };
    Ok(w0)
}

/// Raw trajectory of `delta · w0`: norms, mass and all coefficients per sample.
pub fn simulate_cmd<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    cfg.validate()?;
    let s = spectrum(cfg)?;
    let solver = cfg.solver(cfg.t_end.unwrap_or(DEFAULT_T_END))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w0 = &initial_datum(cfg, &s, &mut rng)? * cfg.delta;
    let traj = simulate(&w0, s.params(), &solver, cfg.sample_every)?;

    let mut w = CsvWriter::new(out);
    w.meta("command", "simulate")?;
    write_params(&mut w, s.params())?;
    write_solver(&mut w, &solver)?;
    w.meta("t_end", num(solver.t_end))?;
    w.meta("delta", num(cfg.delta))?;
    w.meta("seed", cfg.seed.to_string())?;
    let status = if traj.completed() { "completed" } else { "blow-up" };
    w.meta("status", status)?;
    let labels: Vec<String> = w0
        .modes()
        .map(|q| q.as_slice().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("_"))
        .collect();
    let mut header: Vec<String> = ["t", "mass", "l2", "h2"].map(String::from).to_vec();
    header.extend(labels.iter().map(|l| format!("u_{l}")));
    header.extend(labels.iter().map(|l| format!("v_{l}")));
    w.row(&header)?;
    for ((t, state), mass) in traj.times.iter().zip(&traj.states).zip(&traj.masses) {
        let mut row = vec![num(*t), num(*mass), num(state.l2_norm()), num(state.h2_norm())];
        row.extend(state.u().iter().map(|&c| num(c)));
        row.extend(state.v().iter().map(|&c| num(c)));
        w.row(&row)?;
    }
    w.flush()?;
    match traj.blow_up {
        Some(t) => Err(CliError::BlowUp(t)),
        None => Ok(()),
    }
}

/// Everything an experiment needs besides δ.
pub struct ExperimentSetup {
    pub spectrum: SpectrumSummary,
    pub solver: SolverConfig,
    pub constants: TheoremConstants,
    pub w0: SpectralField,
    pub options: ExperimentOptions,
}

impl ExperimentSetup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let spectrum = spectrum(cfg)?;
        if !(spectrum.lambda_max > 0.0) {
            return Err(Error::StableRegime {
                lambda_max: spectrum.lambda_max,
            }
            .into());
        }
        let solver = cfg.solver(0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w0 = initial_datum(cfg, &spectrum, &mut rng)?;
        let c1 = match cfg.c1 {
            Some(c) => c,
            None => 2.0 * growth_constant_estimate(&spectrum, PROBE_SAMPLES, &mut rng).c1_hat,
        };
        let c0 = match cfg.c0 {
            Some(c) => c,
            None => 2.0 * sobolev_constant_probe(cfg.n, cfg.params.dim, PROBE_SAMPLES, &mut rng),
        };
        let mut constants = experiment::constants(spectrum.params(), &spectrum, c0, c1)?;
        if let Some(theta) = cfg.theta_override {
            constants = constants.with_theta(theta);
        }
        let options = ExperimentOptions {
            budget: cfg.t_end.unwrap_or(f64::INFINITY),
            delta0: cfg.delta0.unwrap_or(f64::INFINITY),
            samples: cfg.samples,
        };
        Ok(Self {
            spectrum,
            solver,
            constants,
            w0,
            options,
        })
    }

    pub fn run(&self, delta: f64) -> Result<ExperimentReport> {
        Ok(experiment::run(
            delta,
            &self.w0,
            self.spectrum.params(),
            &self.solver,
            &self.spectrum,
            &self.constants,
            &self.options,
        )?)
    }

    fn write_header<W: Write>(&self, w: &mut CsvWriter<W>, cfg: &RunConfig) -> io::Result<()> {
        let c = &self.constants;
        write_params(w, self.spectrum.params())?;
        write_solver(w, &self.solver)?;
        w.meta("seed", cfg.seed.to_string())?;
        w.meta("A", num(c.a))?;
        w.meta("C2", num(c.c2))?;
        w.meta("C1_hat", num(c.c1_hat))?;
        w.meta("C3", num(c.c3))?;
        w.meta("C0", num(c.c0))?;
        w.meta("theta", num(c.theta))?;
        w.meta("theta_source", if cfg.theta_override.is_some() { "override" } else { "constants" })?;
        w.meta("theta_admissible", c.theta_admissible().to_string())?;
        w.meta("smallness", num(c.smallness))?;
        w.meta("nu", num(c.nu))?;
        w.meta("nu_convention", "gap to every other eigenvalue, lambda_minus branches included")?;
        w.meta("lambda_max", num(c.lambda_max))?;
        w.meta("w0_H2", num(self.w0.h2_norm()))
    }
}

const COLUMNS: [&str; 12] = [
    "t",
    "l2",
    "gap_ratio",
    "bracket",
    "h2",
    "linear_deviation",
    "duhamel_residual",
    "mass",
    "energy",
    "half_energy_rate",
    "energy_forcing",
    "status",
];

fn report_rows(r: &ExperimentReport) -> Vec<Vec<String>> {
    let e = &r.energy;
    (0..r.times.len())
        .map(|i| {
            vec![
                num(r.times[i]),
                num(r.l2_series[i]),
                num(r.gap_ratio[i]),
                num(r.bracket[i]),
                num(r.h2_series[i]),
                num(r.linear_deviation[i]),
                num(r.duhamel_residual[i]),
                num(r.masses[i]),
                num(e.energy[i]),
                opt_num(e.half_rate[i]),
                num(e.forcing[i]),
                r.status.as_str().to_string(),
            ]
        })
        .collect()
}

fn write_summary<W: Write>(w: &mut CsvWriter<W>, r: &ExperimentReport) -> io::Result<()> {
    w.meta("delta", num(r.delta))?;
    w.meta("T_delta", num(r.t_delta))?;
    w.meta("final_time", num(r.final_time()))?;
    w.meta("fitted_C", num(r.fitted_c))?;
    w.meta("t_star", opt_num(r.t_star))?;
    w.meta("t_star_star", opt_num(r.t_star_star))?;
    w.meta(
        "energy_fraction_satisfied",
        opt_num(r.energy.fraction_satisfied()),
    )?;
    w.meta("status", r.status.as_str())
}

/// One experiment at `cfg.delta`; the report table plus a constants header.
pub fn experiment_cmd<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    let setup = ExperimentSetup::new(cfg)?;
    let report = setup.run(cfg.delta)?;
    let mut w = CsvWriter::new(out);
    w.meta("command", "experiment")?;
    setup.write_header(&mut w, cfg)?;
    write_summary(&mut w, &report)?;
    w.row(&COLUMNS)?;
    for row in report_rows(&report) {
        w.row(&row)?;
    }
    w.flush()?;
    if report.status == RunStatus::BlowUp {
        return Err(CliError::BlowUp(report.final_time()));
    }
    Ok(())
}

/// Independent experiments for every δ in `cfg.deltas`, run concurrently and
/// written in list order as one table keyed by δ.
pub fn sweep_cmd<W: Write>(cfg: &RunConfig, out: W) -> Result<()> {
    if cfg.deltas.is_empty() {
        return Err(CliError::EmptySweep);
    }
    let setup = ExperimentSetup::new(cfg)?;
    let results: Vec<Result<ExperimentReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .deltas
            .iter()
            .map(|&delta| {
                let setup = &setup;
                scope.spawn(move || setup.run(delta))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });

    let mut w = CsvWriter::new(out);
    w.meta("command", "sweep")?;
    setup.write_header(&mut w, cfg)?;
    w.comment("summary: delta,fitted_C,final_l2,status")?;
    for (delta, result) in cfg.deltas.iter().zip(&results) {
        let line = match result {
            Ok(r) => format!(
                "summary: {},{},{},{}",
                num(*delta),
                num(r.fitted_c),
                num(r.final_l2()),
                r.status.as_str()
            ),
            Err(e) => format!("summary: {},none,none,error: {e}", num(*delta)),
        };
        w.comment(&line)?;
    }
    let mut header = vec!["delta"];
    header.extend(COLUMNS);
    w.row(&header)?;
    for (delta, result) in cfg.deltas.iter().zip(&results) {
        w.comment(&format!("section delta={}", num(*delta)))?;
        match result {
            Ok(r) => {
                write_summary(&mut w, r)?;
                for row in report_rows(r) {
                    let mut cells = vec![num(*delta)];
                    cells.extend(row);
                    w.row(&cells)?;
                }
            }
            Err(e) => w.meta("error", e.to_string())?,
        }
    }
    w.flush()?;

    let ran = results
        .iter()
        .any(|r| matches!(r, Ok(r) if r.status != RunStatus::BlowUp));
    if ran {
        return Ok(());
    }
    let first = results.into_iter().next().expect("non-empty sweep");
    Err(match first {
        Ok(r) => CliError::BlowUp(r.final_time()),
        Err(e) => e,
    })
}
