//! Pseudo-spectral integrator for the full perturbation system
//!
//! ```text
//! u_t = μ∇²u − χŪ∇²v − χ∇·(u∇v)
//! v_t = D∇²v + fu − kv
//! ```
//!
//! The linear part is integrated exactly per mode (integrating factor built on
//! the eigen-exponentials); the chemotactic flux is evaluated on the
//! collocation grid and advanced with an explicit midpoint rule.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayD};

use crate::dispersion::EigenTable;
use crate::error::{Error, Result};
use crate::linprop::Propagator;
use crate::model::ModelParams;
use crate::spectral::{apply_separable, Basis1d, SpectralField};

/// L² norm above which the solution is declared blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

/// Treatment of aliasing in the quadratic flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dealias {
    /// Grid padded to at least `3(N+1)/2` nodes per axis; products are projected
    /// onto the retained modes, which then lie below two thirds of the grid
    /// bandwidth and receive no aliased content.
    TwoThirds,
    /// Any grid with `M ≥ N + 2`; aliasing errors are accepted.
    None,
}

impl Dealias {
    pub fn min_grid(self, n: usize) -> usize {
        match self {
            Dealias::TwoThirds => (3 * (n + 1)).div_ceil(2),
            Dealias::None => n + 2,
        }
    }
}

impl fmt::Display for Dealias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dealias::TwoThirds => "two-thirds",
            Dealias::None => "none",
        })
    }
}

impl FromStr for Dealias {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-thirds" | "2/3" => Ok(Dealias::TwoThirds),
            "none" => Ok(Dealias::None),
            other => Err(Error::InvalidConfig(format!("unknown dealias rule `{other}`"))),
        }
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Exact linear flow plus explicit midpoint on the flux (second order).
    ImexRk2,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("imex-rk2")
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex-rk2" => Ok(Integrator::ImexRk2),
            other => Err(Error::InvalidConfig(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Spectral truncation `q_i ≤ N`.
    pub n: usize,
    /// Collocation nodes per axis.
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: Dealias,
    pub integrator: Integrator,
    /// When false the flux is dropped and the solver reduces to the linear flow.
    pub nonlinear: bool,
}

impl SolverConfig {
    /// Two-thirds dealiasing on the smallest admissible grid.
    pub fn new(n: usize, dt: f64, t_end: f64) -> Self {
        Self {
            n,
            m: Dealias::TwoThirds.min_grid(n),
            dt,
            t_end,
            dealias: Dealias::TwoThirds,
            integrator: Integrator::ImexRk2,
            nonlinear: true,
        }
    }

    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// `min(1e-3, 0.5/|λ_max|)`.
    pub fn default_dt(lambda_max: f64) -> f64 {
        if lambda_max == 0.0 {
            1e-3
        } else {
            (0.5 / lambda_max.abs()).min(1e-3)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let required = self.dealias.min_grid(self.n);
        if self.m < required {
            return Err(Error::GridTooCoarse {
                required,
                got: self.m,
            });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

/// Grid evaluator of the chemotactic flux `−χ∇·(u∇v)` for one truncation.
#[derive(Debug, Clone)]
pub struct FluxOperator {
    n: usize,
    dim: usize,
    chi: f64,
    basis: Basis1d,
}

impl FluxOperator {
    pub fn new(params: &ModelParams, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            n: cfg.n,
            dim: params.dim,
            chi: params.chi,
            basis: Basis1d::new(cfg.n, cfg.m),
        })
    }

    /// Coefficients of `−χ∇·(u∇v)` in the u-slot; the v-slot is zero.
    ///
    /// Each flux component `u ∂_i v` is a sine series along axis `i`, so it is
    /// projected with sines there and differentiated back into cosines.
    pub fn eval(&self, state: &SpectralField) -> SpectralField {
        assert!(
            state.n() == self.n && state.dim() == self.dim,
            "state truncation differs from solver configuration"
        );
        let b = &self.basis;
        let u_grid = apply_separable(state.u(), &vec![&b.cos_eval; self.dim]);
        let mut div: Option<ArrayD<f64>> = None;
        for axis in 0..self.dim {
            let eval_mats: Vec<&Array2<f64>> = (0..self.dim)
                .map(|i| if i == axis { &b.cos_deriv_eval } else { &b.cos_eval })
                .collect();
            let project_mats: Vec<&Array2<f64>> = (0..self.dim)
                .map(|i| if i == axis { &b.sin_project_deriv } else { &b.cos_project })
                .collect();
            let mut flux = apply_separable(state.v(), &eval_mats);
            flux *= &u_grid;
            let term = apply_separable(&flux, &project_mats);
            div = Some(match div {
                None => term,
                Some(acc) => acc + term,
            });
        }
        let mut u = div.expect("dimension is at least one");
        u.mapv_inplace(|c| -self.chi * c);
        let v = ArrayD::zeros(u.raw_dim());
        SpectralField::from_arrays(u, v).expect("finite input gives finite flux")
    }
}

/// `−χ∇·(u∇v)` for `state`, dealiased per `cfg`.
pub fn nonlinear_term(
    state: &SpectralField,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<SpectralField> {
    if state.n() != cfg.n || state.dim() != params.dim {
        return Err(Error::InvalidConfig(format!(
            "state has N = {}, d = {} but solver expects N = {}, d = {}",
            state.n(),
            state.dim(),
            cfg.n,
            params.dim
        )));
    }
    Ok(FluxOperator::new(params, cfg)?.eval(state))
}

/// ∫u over the box: the q = 0 coefficient of u times π^d.
pub fn mass(state: &SpectralField) -> f64 {
    state.u()[vec![0; state.dim()].as_slice()] * std::f64::consts::PI.powi(state.dim() as i32)
}

/// Reusable one-step map with the propagators for `cfg.dt` cached.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    cfg: SolverConfig,
    table: EigenTable,
    flux: Option<FluxOperator>,
    full: Propagator,
    half: Propagator,
}

impl Stepper {
    pub fn new(params: &ModelParams, cfg: &SolverConfig) -> Result<Self> {
        let params = params.validate()?;
        cfg.validate()?;
        let table = EigenTable::new(&params, cfg.n)?;
        let flux = if cfg.nonlinear {
            Some(FluxOperator::new(&params, cfg)?)
        } else {
            None
        };
        Ok(Self {
            full: Propagator::new(&table, cfg.n, cfg.dt)?,
            half: Propagator::new(&table, cfg.n, 0.5 * cfg.dt)?,
            params,
            cfg: cfg.clone(),
            table,
            flux,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn table(&self) -> &EigenTable {
        &self.table
    }

    /// Flux at `state`, or zero when the nonlinearity is disabled.
    pub fn flux(&self, state: &SpectralField) -> SpectralField {
        match &self.flux {
            Some(op) => op.eval(state),
            None => SpectralField::zeros(state.n(), state.dim()),
        }
    }

    fn propagators(&self, h: f64) -> Result<(Propagator, Propagator)> {
        Ok((
            Propagator::new(&self.table, self.cfg.n, h)?,
            Propagator::new(&self.table, self.cfg.n, 0.5 * h)?,
        ))
    }

    /// One step of size `h`, given the flux `flux0` at `state`.
    ///
    /// ```text
    /// w* = E(h/2)(w + h/2 N(w))
    /// w' = E(h) w + h E(h/2) N(w*)
    /// ```
    fn advance_with(&self, state: &SpectralField, flux0: &SpectralField, h: f64) -> Result<SpectralField> {
        let owned;
        let (full, half) = if h == self.cfg.dt {
            (&self.full, &self.half)
        } else {
            owned = self.propagators(h)?;
            (&owned.0, &owned.1)
        };
        let mut next = full.apply(state);
        if self.flux.is_some() {
            let mut mid = state.clone();
            mid.axpy(0.5 * h, flux0);
            half.apply_in_place(&mut mid);
            let mut flux1 = self.flux(&mid);
            half.apply_in_place(&mut flux1);
            next.axpy(h, &flux1);
        }
        Ok(next)
    }

    /// Advances `state` by `h`.
    pub fn step_by(&self, state: &SpectralField, h: f64) -> Result<SpectralField> {
        let flux0 = self.flux(state);
        self.advance_with(state, &flux0, h)
    }

    pub fn step(&self, state: &SpectralField) -> Result<SpectralField> {
        self.step_by(state, self.cfg.dt)
    }
}

/// Advances `state` by one step of `dt`, treating the linear part exactly.
pub fn step(
    state: &SpectralField,
    dt: f64,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<SpectralField> {
    let cfg = SolverConfig { dt, ..cfg.clone() };
    let next = Stepper::new(params, &cfg)?.step(state)?;
    check_state(&next, dt)?;
    Ok(next)
}

fn check_state(state: &SpectralField, time: f64) -> Result<()> {
    if !state.is_finite() || !(state.l2_norm() <= BLOW_UP_THRESHOLD) {
        return Err(Error::NonFinite { time });
    }
    Ok(())
}

/// A running solution: current state, time and flux at the current state.
#[derive(Debug, Clone)]
pub struct Evolution<'a> {
    stepper: &'a Stepper,
    state: SpectralField,
    time: f64,
    flux: SpectralField,
}

/// What one completed step looked like, for observers.
pub struct StepInfo<'e> {
    pub h: f64,
    pub previous_flux: &'e SpectralField,
    pub state: &'e SpectralField,
    pub flux: &'e SpectralField,
    pub time: f64,
}

impl<'a> Evolution<'a> {
    pub fn new(stepper: &'a Stepper, initial: SpectralField) -> Result<Self> {
        if initial.n() != stepper.cfg.n || initial.dim() != stepper.params.dim {
            return Err(Error::InvalidConfig(
                "initial state truncation differs from solver configuration".into(),
            ));
        }
        check_state(&initial, 0.0)?;
        let flux = stepper.flux(&initial);
        Ok(Self {
            stepper,
            state: initial,
            time: 0.0,
            flux,
        })
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Flux `−χ∇·(u∇v)` at the current state.
    pub fn flux(&self) -> &SpectralField {
        &self.flux
    }

    /// One step of size `h`, landing at `new_time`.
    fn advance(&mut self, h: f64, new_time: f64, observe: &mut impl FnMut(StepInfo<'_>)) -> Result<()> {
        let next = self.stepper.advance_with(&self.state, &self.flux, h)?;
        check_state(&next, new_time)?;
        let flux = self.stepper.flux(&next);
        let previous_flux = std::mem::replace(&mut self.flux, flux);
        self.state = next;
        self.time = new_time;
        observe(StepInfo {
            h,
            previous_flux: &previous_flux,
            state: &self.state,
            flux: &self.flux,
            time: self.time,
        });
        Ok(())
    }

    /// Steps of `dt` until `target`, shortening the last one to land on it
    /// exactly. On failure the evolution keeps the last finite state.
    pub fn advance_to(&mut self, target: f64, mut observe: impl FnMut(StepInfo<'_>)) -> Result<()> {
        let dt = self.stepper.cfg.dt;
        let start = self.time;
        let span = target - start;
        if span <= 0.0 {
            return Ok(());
        }
        let full_steps = (span / dt * (1.0 + 1e-12)).floor() as usize;
        for k in 1..=full_steps {
            let t = (start + k as f64 * dt).min(target);
            self.advance(dt, t, &mut observe)?;
        }
        let rest = target - self.time;
        if rest > 1e-9 * dt {
            self.advance(rest, target, &mut observe)?;
        }
        self.time = target;
        Ok(())
    }
}

/// Sampled solution of an initial value problem.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub masses: Vec<f64>,
    /// Time of the last finite state if the run blew up.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    fn push(&mut self, time: f64, state: &SpectralField) {
        self.times.push(time);
        self.masses.push(mass(state));
        self.states.push(state.clone());
    }

    pub fn completed(&self) -> bool {
        self.blow_up.is_none()
    }

    /// `Err(BlowUp)` if the run stopped early.
    pub fn check(&self) -> Result<()> {
        match self.blow_up {
            Some(last_good_time) => Err(Error::BlowUp { last_good_time }),
            None => Ok(()),
        }
    }
}

/// Integrates from `w0` to `cfg.t_end`, recording every `sample_every` steps
/// and the final state. A blow-up ends the run early; the trajectory keeps the
/// samples taken so far and its `blow_up` field records the last good time.
pub fn simulate(
    w0: &SpectralField,
    params: &ModelParams,
    cfg: &SolverConfig,
    sample_every: usize,
) -> Result<Trajectory> {
    let stepper = Stepper::new(params, cfg)?;
    simulate_with(&stepper, w0, sample_every)
}

pub fn simulate_with(stepper: &Stepper, w0: &SpectralField, sample_every: usize) -> Result<Trajectory> {
    let sample_every = sample_every.max(1);
    let mut evolution = Evolution::new(stepper, w0.clone())?;
    let mut trajectory = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        masses: Vec::new(),
        blow_up: None,
    };
    trajectory.push(0.0, w0);
    let mut count = 0usize;
    let t_end = stepper.cfg.t_end;
    let result = evolution.advance_to(t_end, |info| {
        count += 1;
        if count.is_multiple_of(sample_every) || info.time == t_end {
            trajectory.push(info.time, info.state);
        }
    });
    match result {
        Ok(()) => {
            if *trajectory.times.last().expect("initial sample") < t_end {
                trajectory.push(t_end, evolution.state());
            }
        }
        Err(Error::NonFinite { .. }) => {
            trajectory.blow_up = Some(evolution.time());
            if *trajectory.times.last().expect("initial sample") < evolution.time() {
                trajectory.push(evolution.time(), evolution.state());
            }
        }
        Err(e) => return Err(e),
    }
    Ok(trajectory)
}
