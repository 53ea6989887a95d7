//! Dominant-mode tracking experiment for small perturbations.
//!
//! A perturbation `δ w₀` of the homogeneous state is evolved nonlinearly up to
//! the escape time `T^δ = ln(θ/δ)/λ_max` and compared against the growth of its
//! fastest linear modes. Besides the gap ratio, the report carries the Duhamel
//! residual of the computed solution and the second-order energy balance that
//! controls its H² norm.

use std::f64::consts::PI;

use ndarray::Dimension;
use rand::Rng;

use crate::dispersion::{EigenTable, SpectrumSummary};
use crate::error::{Error, Result};
use crate::linprop::{dominant_projection, Propagator};
use crate::model::ModelParams;
use crate::nonlinear::{mass, Evolution, SolverConfig, Stepper, Trajectory};
use crate::spectral::{mode_weight, squared_wavenumber, synthesize, ModeIndex, SpectralField};

/// Relative slack allowed in the discrete energy inequality.
pub const ENERGY_SLACK: f64 = 0.05;
/// Evenly spaced report times strictly inside `(0, T^δ)`.
pub const REPORT_SAMPLES: usize = 64;

/// Constants entering the tracking estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    /// Energy weight `A = (Ūχ)²/(Dμ)`.
    pub a: f64,
    /// Energy forcing `C₂ = Ū⁶χ⁶f⁶/(2D³μ⁵k³)`.
    pub c2: f64,
    /// Growth constant used for `C₁` (already including any safety factor).
    pub c1_hat: f64,
    /// Bootstrap constant `C₃ = C₁² max(A, 1/A) max(4C₂/λ_max, 1)`.
    pub c3: f64,
    /// Sobolev/Poincaré constant `C₀`.
    pub c0: f64,
    pub theta: f64,
    pub nu: f64,
    pub lambda_max: f64,
    /// `min(λ_max/4, μ/8, (Ūχ)²/(4μ))`; θ is admissible when `C₀C₃θ` is below it.
    pub theta_bound: f64,
    /// `min(μ/4, (Ūχ)²/(2μ))/C₀`, the H² smallness level of the bootstrap.
    pub smallness: f64,
}

impl TheoremConstants {
    pub fn theta_admissible(&self) -> bool {
        self.c0 * self.c3 * self.theta < self.theta_bound
    }

    /// Replaces θ, e.g. with a value larger than the admissible one.
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

pub fn energy_weight(params: &ModelParams) -> f64 {
    (params.u_bar * params.chi).powi(2) / (params.diffusion * params.mu)
}

pub fn energy_forcing(params: &ModelParams) -> f64 {
    (params.u_bar * params.chi * params.secretion).powi(6)
        / (2.0 * params.diffusion.powi(3) * params.mu.powi(5) * params.degradation.powi(3))
}

/// All constants for `params`; `c1` is the growth constant to use and `c0` the
/// Sobolev constant. θ is half of its largest admissible value.
pub fn constants(
    params: &ModelParams,
    spectrum: &SpectrumSummary,
    c0: f64,
    c1: f64,
) -> Result<TheoremConstants> {
    let lambda_max = spectrum.lambda_max;
    if !(lambda_max > 0.0) {
        return Err(Error::StableRegime { lambda_max });
    }
    let a = energy_weight(params);
    let c2 = energy_forcing(params);
    let c3 = c1 * c1 * a.max(1.0 / a) * (4.0 * c2 / lambda_max).max(1.0);
    let chemo = (params.u_bar * params.chi).powi(2) / params.mu;
    let theta_bound = (lambda_max / 4.0).min(params.mu / 8.0).min(chemo / 4.0);
    Ok(TheoremConstants {
        a,
        c2,
        c1_hat: c1,
        c3,
        c0,
        theta: 0.5 * theta_bound / (c0 * c3),
        nu: spectrum.nu,
        lambda_max,
        theta_bound,
        smallness: (params.mu / 4.0).min(chemo / 2.0) / c0,
    })
}

/// `T^δ = ln(θ/δ)/λ_max`.
pub fn escape_time(delta: f64, theta: f64, lambda_max: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < theta) {
        return Err(Error::BadAmplitude { delta, theta });
    }
    if !(lambda_max > 0.0) {
        return Err(Error::StableRegime { lambda_max });
    }
    Ok((theta / delta).ln() / lambda_max)
}

/// Scalar H² norm of a cosine series with coefficients `g`.
fn scalar_h2(g: &SpectralField) -> f64 {
    g.u()
        .indexed_iter()
        .map(|(ix, c)| {
            let q2 = squared_wavenumber(ix.slice()) as f64;
            (1.0 + q2).powi(2) * mode_weight(ix.slice()) * c * c
        })
        .sum::<f64>()
        .sqrt()
}

fn scalar_gradient_norm(g: &SpectralField) -> f64 {
    g.u()
        .indexed_iter()
        .map(|(ix, c)| squared_wavenumber(ix.slice()) as f64 * mode_weight(ix.slice()) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Ratios `‖g‖_∞/‖g‖_{H²}` and, for the mean-free part, `‖g‖_{L⁴}/‖∇g‖`.
fn sobolev_ratios(g: &SpectralField) -> f64 {
    let m = 4 * (g.n() + 1);
    let grid = synthesize(g, m).expect("grid is fine enough");
    let sup = grid.u.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let mut best = sup / scalar_h2(g);

    let mut mean_free = g.clone();
    mean_free.u_mut()[vec![0; g.dim()].as_slice()] = 0.0;
    let grad = scalar_gradient_norm(&mean_free);
    if grad > 0.0 {
        let grid = synthesize(&mean_free, m).expect("grid is fine enough");
        let cell = (PI / m as f64).powi(g.dim() as i32);
        let l4 = (grid.u.iter().map(|s| s.powi(4)).sum::<f64>() * cell).powf(0.25);
        best = best.max(l4 / grad);
    }
    best
}

/// Empirical Sobolev constant: the running maximum of [`sobolev_ratios`] over
/// the constant field followed by `samples` random fields of truncation `n`.
pub fn sobolev_constant_probe<R: Rng + ?Sized>(n: usize, dim: usize, samples: usize, rng: &mut R) -> f64 {
    let one = SpectralField::single_mode(n, &ModeIndex::zero(dim), 1.0, 0.0);
    let mut best = sobolev_ratios(&one);
    for _ in 0..samples {
        let g = SpectralField::random(n, dim, rng);
        best = best.max(sobolev_ratios(&g));
    }
    best
}

/// `E₂ = Σ_{|∂|=2} ∫ |∂u|² + A|∂v|²` over ordered pairs of second derivatives,
/// i.e. `Σ_q (q²)² γ_q (u_q² + A v_q²)`.
pub fn second_order_energy(state: &SpectralField, a: f64) -> f64 {
    state
        .u()
        .indexed_iter()
        .zip(state.v().iter())
        .map(|((ix, u), v)| {
            let q2 = squared_wavenumber(ix.slice()) as f64;
            q2 * q2 * mode_weight(ix.slice()) * (u * u + a * v * v)
        })
        .sum()
}

/// Discrete check of `½ dE₂/dt ≤ C₂‖u‖²` along a trajectory.
#[derive(Debug, Clone, Default)]
pub struct EnergyDiagnostic {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `½ dE₂/dt` by centered differences; `None` at the endpoints.
    pub half_rate: Vec<Option<f64>>,
    /// `C₂‖u‖²`.
    pub forcing: Vec<f64>,
    /// Whether `‖w‖_{H²}` is below the bootstrap smallness level.
    pub small: Vec<bool>,
    /// Inequality with [`ENERGY_SLACK`] at interior points where `small` holds.
    pub satisfied: Vec<Option<bool>>,
}

impl EnergyDiagnostic {
    /// Share of checked points satisfying the inequality, `None` if none were checked.
    pub fn fraction_satisfied(&self) -> Option<f64> {
        let checked: Vec<bool> = self.satisfied.iter().flatten().copied().collect();
        if checked.is_empty() {
            return None;
        }
        Some(checked.iter().filter(|&&ok| ok).count() as f64 / checked.len() as f64)
    }

    pub fn checked_points(&self) -> usize {
        self.satisfied.iter().flatten().count()
    }
}

pub fn energy_diagnostic(
    trajectory: &Trajectory,
    constants: &TheoremConstants,
) -> EnergyDiagnostic {
    let energy: Vec<f64> = trajectory
        .states
        .iter()
        .map(|s| second_order_energy(s, constants.a))
        .collect();
    let forcing: Vec<f64> = trajectory
        .states
        .iter()
        .map(|s| constants.c2 * s.u_l2_norm().powi(2))
        .collect();
    let small: Vec<bool> = trajectory
        .states
        .iter()
        .map(|s| s.h2_norm() <= constants.smallness)
        .collect();
    let len = energy.len();
    let t = &trajectory.times;
    let half_rate: Vec<Option<f64>> = (0..len)
        .map(|i| {
            (i > 0 && i + 1 < len)
                .then(|| 0.5 * (energy[i + 1] - energy[i - 1]) / (t[i + 1] - t[i - 1]))
        })
        .collect();
    let satisfied = (0..len)
        .map(|i| {
            half_rate[i]
                .filter(|_| small[i])
                .map(|rate| rate <= (1.0 + ENERGY_SLACK) * forcing[i])
        })
        .collect();
    EnergyDiagnostic {
        times: t.clone(),
        energy,
        half_rate,
        forcing,
        small,
        satisfied,
    }
}

/// Running trapezoid approximation of `∫₀^t e^{L(t−τ)} N(τ) dτ`, updated one
/// quadrature interval at a time via `S ← E(h)S + h/2 (E(h)N_prev + N_next)`.
struct DuhamelIntegral<'t> {
    table: &'t EigenTable,
    n: usize,
    cached: Option<(f64, Propagator)>,
    value: SpectralField,
}

impl<'t> DuhamelIntegral<'t> {
    fn new(table: &'t EigenTable, n: usize, dim: usize) -> Self {
        Self {
            table,
            n,
            cached: None,
            value: SpectralField::zeros(n, dim),
        }
    }

    fn propagator(&mut self, h: f64) -> Result<&Propagator> {
        if self.cached.as_ref().map(|(ch, _)| *ch) != Some(h) {
            self.cached = Some((h, Propagator::new(self.table, self.n, h)?));
        }
        Ok(&self.cached.as_ref().expect("just filled").1)
    }

    fn push(&mut self, h: f64, previous: &SpectralField, next: &SpectralField) -> Result<()> {
        let mut acc = std::mem::replace(&mut self.value, SpectralField::zeros(0, 1));
        acc.axpy(0.5 * h, previous);
        self.propagator(h)?.apply_in_place(&mut acc);
        acc.axpy(0.5 * h, next);
        self.value = acc;
        Ok(())
    }

    /// `‖w(t) − e^{Lt}w(0) − S(t)‖`
    fn residual(&self, state: &SpectralField, w0: &SpectralField, t: f64) -> Result<f64> {
        let mut r = state - &Propagator::new(self.table, self.n, t)?.apply(w0);
        r.axpy(-1.0, &self.value);
        Ok(r.l2_norm())
    }
}

/// Duhamel residual at every sample of `trajectory`, with the time integral by
/// the composite trapezoid rule over the trajectory samples themselves.
pub fn duhamel_residual(
    trajectory: &Trajectory,
    params: &ModelParams,
    cfg: &SolverConfig,
    spectrum: &SpectrumSummary,
    quad_dt: f64,
) -> Result<Vec<f64>> {
    if trajectory.states.is_empty()
        || trajectory
            .times
            .windows(2)
            .any(|w| w[1] - w[0] > quad_dt * (1.0 + 1e-9))
    {
        return Err(Error::InsufficientSamples { quad_dt });
    }
    let w0 = &trajectory.states[0];
    spectrum.table.covers(w0)?;
    let table = EigenTable::new(params, w0.n())?;
    let stepper = Stepper::new(params, cfg)?;
    let mut integral = DuhamelIntegral::new(&table, w0.n(), w0.dim());
    let mut out = Vec::with_capacity(trajectory.states.len());
    let mut previous = stepper.flux(w0);
    out.push(integral.residual(w0, w0, 0.0)?);
    for (w, (state, &t)) in trajectory.times.windows(2).zip(
        trajectory.states.iter().zip(&trajectory.times).skip(1),
    ) {
        let next = stepper.flux(state);
        integral.push(w[1] - w[0], &previous, &next)?;
        out.push(integral.residual(state, w0, t)?);
        previous = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    BlowUp,
    BudgetExceeded,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::BlowUp => "blow-up",
            RunStatus::BudgetExceeded => "budget-exceeded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    /// Largest simulated time; runs with `T^δ` beyond it stop early.
    pub budget: f64,
    /// Largest accepted amplitude.
    pub delta0: f64,
    pub samples: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            budget: f64::INFINITY,
            delta0: f64::INFINITY,
            samples: REPORT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub delta: f64,
    pub t_delta: f64,
    pub constants: TheoremConstants,
    pub w0_h2: f64,
    pub status: RunStatus,
    pub times: Vec<f64>,
    pub l2_series: Vec<f64>,
    /// `‖w^δ(t) − dominant_projection(δw₀, t)‖ / (δ e^{λ_max t})`.
    pub gap_ratio: Vec<f64>,
    /// `e^{−νt} + δ‖w₀‖²_{H²} + δ e^{λ_max t}`.
    pub bracket: Vec<f64>,
    pub h2_series: Vec<f64>,
    /// `‖w^δ(t) − δ e^{Lt} w₀‖`.
    pub linear_deviation: Vec<f64>,
    /// Duhamel residual with the solver's own steps as quadrature nodes.
    pub duhamel_residual: Vec<f64>,
    pub masses: Vec<f64>,
    pub energy: EnergyDiagnostic,
    /// Smallest `C` with `gap_ratio ≤ C · bracket` at every sample.
    pub fitted_c: f64,
    /// First sample where `‖w^δ − δe^{Lt}w₀‖ > (C₁/2) δ e^{λ_max t}`.
    pub t_star: Option<f64>,
    /// First sample where `‖w^δ‖_{H²}` exceeds the smallness level.
    pub t_star_star: Option<f64>,
}

impl ExperimentReport {
    pub fn final_l2(&self) -> f64 {
        *self.l2_series.last().expect("report has the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("report has the initial sample")
    }
}

/// Report times: `horizon · k/(samples+1)` for `k = 0..=samples+1`.
pub fn report_times(horizon: f64, samples: usize) -> Vec<f64> {
    let parts = samples + 1;
    (0..=parts)
        .map(|k| if k == parts { horizon } else { horizon * k as f64 / parts as f64 })
        .collect()
}

/// Evolves `δ w₀` up to `min(T^δ, budget)` and measures its distance to the
/// dominant linear modes. A blow-up ends the run with a partial report.
pub fn run(
    delta: f64,
    w0: &SpectralField,
    params: &ModelParams,
    cfg: &SolverConfig,
    spectrum: &SpectrumSummary,
    constants: &TheoremConstants,
    options: &ExperimentOptions,
) -> Result<ExperimentReport> {
    let norm = w0.l2_norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    if delta > options.delta0 {
        return Err(Error::InvalidConfig(format!(
            "delta = {delta} exceeds delta0 = {}",
            options.delta0
        )));
    }
    let t_delta = escape_time(delta, constants.theta, constants.lambda_max)?;
    let horizon = t_delta.min(options.budget);
    let stepper = Stepper::new(params, cfg)?;
    let table = stepper.table();
    spectrum.table.covers(w0)?;

    let initial = w0 * delta;
    let dominant0 = dominant_projection(&initial, 0.0, spectrum)?;
    let lambda = constants.lambda_max;
    let w0_h2 = w0.h2_norm();

    let mut report = ExperimentReport {
        delta,
        t_delta,
        constants: *constants,
        w0_h2,
        status: if t_delta > options.budget {
            RunStatus::BudgetExceeded
        } else {
            RunStatus::Completed
        },
        times: Vec::new(),
        l2_series: Vec::new(),
        gap_ratio: Vec::new(),
        bracket: Vec::new(),
        h2_series: Vec::new(),
        linear_deviation: Vec::new(),
        duhamel_residual: Vec::new(),
        masses: Vec::new(),
        energy: EnergyDiagnostic::default(),
        fitted_c: 0.0,
        t_star: None,
        t_star_star: None,
    };
    let mut samples = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        masses: Vec::new(),
        blow_up: None,
    };

    let mut evolution = Evolution::new(&stepper, initial.clone())?;
    let mut integral = DuhamelIntegral::new(table, cfg.n, params.dim);
    let mut record = |t: f64,
                      state: &SpectralField,
                      integral: &DuhamelIntegral<'_>,
                      report: &mut ExperimentReport|
     -> Result<()> {
        let growth = delta * (lambda * t).exp();
        let linear = Propagator::new(table, cfg.n, t)?.apply(&initial);
        // dominant part evolves by the single factor e^{λ_max t}
        let dominant = &dominant0 * (lambda * t).exp();
        let gap = (state - &dominant).l2_norm() / growth;
        let deviation = (state - &linear).l2_norm();
        let h2 = state.h2_norm();
        let bracket = (-constants.nu * t).exp() + delta * w0_h2 * w0_h2 + growth;
        if report.t_star.is_none() && deviation > 0.5 * constants.c1_hat * growth {
            report.t_star = Some(t);
        }
        if report.t_star_star.is_none() && h2 > constants.smallness {
            report.t_star_star = Some(t);
        }
        report.times.push(t);
        report.l2_series.push(state.l2_norm());
        report.gap_ratio.push(gap);
        report.bracket.push(bracket);
        report.h2_series.push(h2);
        report.linear_deviation.push(deviation);
        report.duhamel_residual.push(integral.residual(state, &initial, t)?);
        report.masses.push(mass(state));
        samples.times.push(t);
        samples.masses.push(mass(state));
        samples.states.push(state.clone());
        Ok(())
    };

    record(0.0, &initial, &integral, &mut report)?;
    for &t in report_times(horizon, options.samples).iter().skip(1) {
        let mut failure = None;
        let stepped = evolution.advance_to(t, |info| {
            if failure.is_none() {
                if let Err(e) = integral.push(info.h, info.previous_flux, info.flux) {
                    failure = Some(e);
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        match stepped {
            Ok(()) => record(t, evolution.state(), &integral, &mut report)?,
            Err(Error::NonFinite { .. }) => {
                report.status = RunStatus::BlowUp;
                samples.blow_up = Some(evolution.time());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    report.fitted_c = report
        .gap_ratio
        .iter()
        .zip(&report.bracket)
        .map(|(g, b)| g / b)
        .fold(0.0, f64::max);
    report.energy = energy_diagnostic(&samples, constants);
    Ok(report)
}

/// Unit-L² datum `r₊(q₀) e_{q₀}/‖·‖` along the dominant mode `q₀`.
pub fn dominant_mode_datum(spectrum: &SpectrumSummary, q0: &ModeIndex) -> SpectralField {
    let pair = spectrum.pair(q0);
    let f = SpectralField::single_mode(spectrum.n(), q0, pair.r_plus[0], pair.r_plus[1]);
    let norm = f.l2_norm();
    &f * (1.0 / norm)
}

/// Random unit-L² datum.
pub fn random_unit_datum<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> SpectralField {
    let f = SpectralField::random(n, dim, rng);
    let norm = f.l2_norm();
    &f * (1.0 / norm)
}
