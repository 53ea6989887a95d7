//! Per-mode dispersion relation of the linearized system
//!
//! ```text
//! λ² + (q²(μ+D) + k) λ + q²(μ(Dq² + k) − χŪf) = 0
//! ```
//! and the spectrum summary built from it.

use std::collections::BTreeSet;

use ndarray::Dimension;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{mode_weight, squared_wavenumber, ModeIndex, SpectralField};

/// Relative tolerance under which two growth rates count as tied for λ_max.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Coefficients `(b, c)` of `λ² + bλ + c`.
pub fn quadratic_coefficients(params: &ModelParams, q2: f64) -> (f64, f64) {
    let b = q2 * (params.mu + params.diffusion) + params.degradation;
    let c = q2 * params.criterion(q2);
    (b, c)
}

/// Value of the dispersion polynomial at `lambda`.
pub fn dispersion_residual(params: &ModelParams, q2: f64, lambda: f64) -> f64 {
    let (b, c) = quadratic_coefficients(params, q2);
    lambda * lambda + b * lambda + c
}

/// Discriminant in the cancellation-free form `(q²(μ−D) − k)² + 4q²χŪf`,
/// algebraically equal to `b² − 4c`.
pub fn discriminant(params: &ModelParams, q2: f64) -> f64 {
    let s = q2 * (params.mu - params.diffusion) - params.degradation;
    s * s + 4.0 * q2 * params.feedback()
}

/// Roots `(λ₋, λ₊)` of the dispersion relation, `λ₋ < λ₊`.
pub fn dispersion_roots(params: &ModelParams, q2: f64) -> Result<(f64, f64)> {
    let (b, c) = quadratic_coefficients(params, q2);
    let disc = discriminant(params, q2);
    if !(disc > 0.0) || !disc.is_finite() {
        return Err(Error::NumericalContradiction(format!(
            "dispersion discriminant {disc} at q^2 = {q2}"
        )));
    }
    // b > 0, so the minus branch has no cancellation; the other root follows
    // from Vieta. `+ 0.0` turns −0 into +0 when c vanishes.
    let lambda_minus = -0.5 * (b + disc.sqrt());
    let lambda_plus = c / lambda_minus + 0.0;
    Ok((lambda_minus, lambda_plus))
}

/// First component of the eigenvector `[a, 1]` for root `lambda`.
///
/// Both rows of the eigen-system give `a`: `(λ + Dq² + k)/f` and
/// `χŪq²/(λ + μq²)`; whichever denominator-free/numerator is larger in
/// magnitude carries less cancellation.
fn eigenvector_component(params: &ModelParams, q2: f64, lambda: f64) -> f64 {
    let second_row = lambda + params.diffusion * q2 + params.degradation;
    let first_row = lambda + params.mu * q2;
    let a = if second_row.abs() >= first_row.abs() {
        second_row / params.secretion
    } else {
        params.chi * params.u_bar * q2 / first_row
    };
    a + 0.0
}

/// Eigen-data of every mode sharing one value of q².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEigen {
    pub q2: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// First components of `r₋ = [a₋, 1]` and `r₊ = [a₊, 1]`.
    pub a_minus: f64,
    pub a_plus: f64,
}

impl ModeEigen {
    pub fn new(params: &ModelParams, q2: usize) -> Result<Self> {
        let q2f = q2 as f64;
        let (lambda_minus, lambda_plus) = dispersion_roots(params, q2f)?;
        let eig = Self {
            q2,
            lambda_minus,
            lambda_plus,
            a_minus: eigenvector_component(params, q2f, lambda_minus),
            a_plus: eigenvector_component(params, q2f, lambda_plus),
        };
        if !(eig.det().abs() >= 1e-14) {
            return Err(Error::DegenerateEigenbasis { q2 });
        }
        Ok(eig)
    }

    /// det[r₋, r₊] = a₋ − a₊.
    pub fn det(&self) -> f64 {
        self.a_minus - self.a_plus
    }

    /// Coordinates `(w⁻, w⁺)` of `(u, v)` in the eigenbasis.
    pub fn decompose(&self, u: f64, v: f64) -> (f64, f64) {
        let det = self.det();
        ((u - self.a_plus * v) / det, (self.a_minus * v - u) / det)
    }

    pub fn recompose(&self, minus: f64, plus: f64) -> (f64, f64) {
        (self.a_minus * minus + self.a_plus * plus, minus + plus)
    }

    /// Flow of this mode over time `t`, with both exponentials shifted by
    /// `-shift * t` (use `shift = λ_max` for growth-normalized flows).
    pub fn flow(&self, t: f64, shift: f64) -> ModeFlow {
        ModeFlow {
            eig: *self,
            e_minus: ((self.lambda_minus - shift) * t).exp(),
            e_plus: ((self.lambda_plus - shift) * t).exp(),
        }
    }
}

/// `e^{L_q t}` for a single q², applied by decomposing, scaling each branch by
/// its exponential and recomposing.
#[derive(Debug, Clone, Copy)]
pub struct ModeFlow {
    eig: ModeEigen,
    e_minus: f64,
    e_plus: f64,
}

impl ModeFlow {
    #[inline]
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (minus, plus) = self.eig.decompose(u, v);
        self.eig.recompose(minus * self.e_minus, plus * self.e_plus)
    }

    /// Row-major 2×2 matrix of the flow.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (a, c) = self.apply(1.0, 0.0);
        let (b, d) = self.apply(0.0, 1.0);
        [[a, b], [c, d]]
    }

    /// Largest singular value (Euclidean operator norm).
    pub fn norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.matrix();
        let frob2 = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let root = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (frob2 + root)).sqrt()
    }
}

/// Eigenvalues and eigenvectors of one mode q.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub q: ModeIndex,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub r_minus: [f64; 2],
    pub r_plus: [f64; 2],
}

impl EigenPair {
    fn from_eigen(q: ModeIndex, eig: &ModeEigen) -> Self {
        Self {
            q,
            lambda_minus: eig.lambda_minus,
            lambda_plus: eig.lambda_plus,
            r_minus: [eig.a_minus, 1.0],
            r_plus: [eig.a_plus, 1.0],
        }
    }
}

pub fn eigenpair(params: &ModelParams, q: &ModeIndex) -> Result<EigenPair> {
    Ok(EigenPair::from_eigen(q.clone(), &ModeEigen::new(params, q.q2())?))
}

/// Eigen-data for all q² reachable inside the truncation `q_i ≤ N`.
#[derive(Debug, Clone)]
pub struct EigenTable {
    params: ModelParams,
    n: usize,
    by_q2: Vec<ModeEigen>,
}

impl EigenTable {
    pub fn new(params: &ModelParams, n: usize) -> Result<Self> {
        let params = params.validate()?;
        let max_q2 = params.dim * n * n;
        let by_q2 = (0..=max_q2)
            .map(|q2| ModeEigen::new(&params, q2))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params, n, by_q2 })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn get(&self, q2: usize) -> &ModeEigen {
        &self.by_q2[q2]
    }

    pub fn covers(&self, field: &SpectralField) -> Result<()> {
        if field.n() > self.n || field.dim() != self.dim() {
            return Err(Error::SpectrumMismatch {
                spectrum_n: self.n,
                spectrum_d: self.dim(),
                field_n: field.n(),
                field_d: field.dim(),
            });
        }
        Ok(())
    }

    /// Every mode of the truncation in row-major order.
    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        SpectralField::zeros(self.n, self.dim())
            .modes()
            .collect::<Vec<_>>()
            .into_iter()
    }
}

/// Spectrum of the linearized operator over the truncation `q_i ≤ N`.
#[derive(Debug, Clone)]
pub struct SpectrumSummary {
    pub table: EigenTable,
    pub lambda_max: f64,
    pub omega_max: BTreeSet<ModeIndex>,
    /// λ_max minus the largest other eigenvalue (λ₊ off Ω_max, λ₋ everywhere).
    pub nu: f64,
    pub unstable: BTreeSet<ModeIndex>,
}

impl SpectrumSummary {
    pub fn params(&self) -> &ModelParams {
        self.table.params()
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn pair(&self, q: &ModeIndex) -> EigenPair {
        EigenPair::from_eigen(q.clone(), self.table.get(q.q2()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = EigenPair> + '_ {
        self.table.modes().map(|q| self.pair(&q))
    }

    /// Number of distinct q² values among Ω_max.
    pub fn omega_max_shells(&self) -> usize {
        self.omega_max
            .iter()
            .map(ModeIndex::q2)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Lowest mode of Ω_max in index order.
    pub fn dominant_mode(&self) -> &ModeIndex {
        self.omega_max.iter().next().expect("Ω_max is never empty")
    }
}

pub fn spectrum_summary(params: &ModelParams, n: usize) -> Result<SpectrumSummary> {
    let params = params.validate()?;
    if let Some(q2c) = params.critical_wavenumber_squared() {
        if ((n * n) as f64) < q2c {
            return Err(Error::TruncationTooSmall { n, q2_critical: q2c });
        }
    }
    let table = EigenTable::new(&params, n)?;
    let modes: Vec<ModeIndex> = table.modes().collect();

    let lambda_max = modes
        .iter()
        .map(|q| table.get(q.q2()).lambda_plus)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied = |lambda: f64| (lambda - lambda_max).abs() <= TIE_TOLERANCE * lambda_max.abs();
    let omega_max: BTreeSet<ModeIndex> = modes
        .iter()
        .filter(|q| tied(table.get(q.q2()).lambda_plus))
        .cloned()
        .collect();
    let unstable = modes
        .iter()
        .filter(|q| table.get(q.q2()).lambda_plus > 0.0)
        .cloned()
        .collect();
    let runner_up = modes
        .iter()
        .flat_map(|q| {
            let eig = table.get(q.q2());
            let plus = (!omega_max.contains(q)).then_some(eig.lambda_plus);
            std::iter::once(eig.lambda_minus).chain(plus)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(SpectrumSummary {
        table,
        lambda_max,
        omega_max,
        nu: lambda_max - runner_up,
        unstable,
    })
}

/// Empirical growth constant of the linear flow.
#[derive(Debug, Clone)]
pub struct GrowthEstimate {
    /// max of all probes below, never less than the dominant-mode witness.
    pub c1_hat: f64,
    /// Largest ratio among the random unit fields.
    pub random_max: f64,
    /// Largest per-mode operator norm, the worst case over all fields.
    pub operator_max: f64,
    /// Probe times.
    pub times: Vec<f64>,
}

/// Probe times on `[0, horizon]`: geometric near zero for fast transients,
/// uniform over the whole window.
pub fn probe_times(spectrum: &SpectrumSummary) -> Vec<f64> {
    let rate = spectrum.nu.min(spectrum.lambda_max.abs());
    let horizon = if rate > 0.0 {
        (10.0 / rate).clamp(1.0, 200.0)
    } else {
        10.0
    };
    let count = 120;
    let mut times = vec![0.0];
    let t0 = 1e-4 * horizon;
    times.extend((0..count).map(|i| t0 * (horizon / t0).powf(i as f64 / (count - 1) as f64)));
    times.extend((1..=count).map(|i| horizon * i as f64 / count as f64));
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// `‖e^{Lt} w‖ e^{−λ_max t} / ‖w‖`.
pub fn growth_ratio(spectrum: &SpectrumSummary, field: &SpectralField, t: f64) -> Result<f64> {
    spectrum.table.covers(field)?;
    let flows: Vec<ModeFlow> = (0..=field.dim() * field.n() * field.n())
        .map(|q2| spectrum.table.get(q2).flow(t, spectrum.lambda_max))
        .collect();
    let mut sum = 0.0;
    for ((ix, &u), &v) in field.u().indexed_iter().zip(field.v().iter()) {
        let q = ix.slice();
        let (u, v) = flows[squared_wavenumber(q)].apply(u, v);
        sum += mode_weight(q) * (u * u + v * v);
    }
    Ok(sum.sqrt() / field.l2_norm())
}

/// Estimates the constant `C₁` in `‖e^{Lt}w‖ ≤ C₁ e^{λ_max t}‖w‖` by
/// sampling `trials` random unit fields, the normalized dominant eigenmode and
/// the worst-case direction of every mode over [`probe_times`].
pub fn growth_constant_estimate<R: Rng + ?Sized>(
    spectrum: &SpectrumSummary,
    trials: usize,
    rng: &mut R,
) -> GrowthEstimate {
    let times = probe_times(spectrum);
    let n = spectrum.n();
    let dim = spectrum.params().dim;
    let fields: Vec<SpectralField> = (0..trials)
        .map(|_| SpectralField::random(n, dim, rng))
        .collect();
    let q0 = spectrum.dominant_mode();
    let eig = spectrum.table.get(q0.q2());
    let witness = SpectralField::single_mode(n, q0, eig.a_plus, 1.0);

    let mut random_max = 0.0f64;
    let mut witness_max = 0.0f64;
    let mut operator_max = 0.0f64;
    for &t in &times {
        for f in &fields {
            random_max = random_max.max(growth_ratio(spectrum, f, t).expect("same truncation"));
        }
        witness_max = witness_max.max(growth_ratio(spectrum, &witness, t).expect("same truncation"));
        for q2 in 0..=dim * n * n {
            // q² values not realized by any mode still give valid bounds, just
            // unused ones; restrict to realized shells.
            if realized_q2(q2, n, dim) {
                operator_max = operator_max.max(spectrum.table.get(q2).flow(t, spectrum.lambda_max).norm());
            }
        }
    }
    GrowthEstimate {
        c1_hat: random_max.max(witness_max).max(operator_max),
        random_max,
        operator_max,
        times,
    }
}

/// Whether some `q` with `q_i ≤ n` in `dim` dimensions has `|q|² = q2`.
fn realized_q2(q2: usize, n: usize, dim: usize) -> bool {
    if dim == 0 {
        return q2 == 0;
    }
    (0..=n).take_while(|&q| q * q <= q2).any(|q| realized_q2(q2 - q * q, n, dim - 1))
}
