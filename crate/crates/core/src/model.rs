//! Physical parameters of the Keller-Segel system and its homogeneous state.

use crate::error::{Error, Result};

/// Constants of the chemotaxis system
///
/// ```text
/// U_t = ∇·(μ∇U − χU∇V),   V_t = D∇²V + fU − kV
/// ```
/// on the box (0,π)^d with Neumann walls, perturbed around the density `u_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Cell motility μ.
    pub mu: f64,
    /// Chemotactic sensitivity χ.
    pub chi: f64,
    /// Chemical diffusion rate D.
    pub diffusion: f64,
    /// Secretion rate f.
    pub secretion: f64,
    /// Degradation rate k.
    pub degradation: f64,
    /// Homogeneous cell density Ū.
    pub u_bar: f64,
    /// Spatial dimension, 1 to 3.
    pub dim: usize,
}

impl ModelParams {
    /// All rates one, Ū = 3, two dimensions: two unstable modes (1,0) and (0,1).
    pub fn flagship() -> Self {
        Self {
            mu: 1.0,
            chi: 1.0,
            diffusion: 1.0,
            secretion: 1.0,
            degradation: 1.0,
            u_bar: 3.0,
            dim: 2,
        }
    }

    pub fn validate(self) -> Result<Self> {
        let fields = [
            ("mu", self.mu),
            ("chi", self.chi),
            ("D", self.diffusion),
            ("f", self.secretion),
            ("k", self.degradation),
            ("U_bar", self.u_bar),
        ];
        for (name, value) in fields {
            // NaN fails this comparison too.
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveParameter(name));
            }
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::BadDimension(self.dim));
        }
        Ok(self)
    }

    pub fn steady_state(&self) -> SteadyState {
        SteadyState {
            u_bar: self.u_bar,
            v_bar: self.secretion * self.u_bar / self.degradation,
        }
    }

    /// χŪf, the destabilizing chemotactic feedback.
    pub(crate) fn feedback(&self) -> f64 {
        self.chi * self.u_bar * self.secretion
    }

    /// μ(Dq² + k) − χŪf; negative exactly on the unstable band.
    pub fn criterion(&self, q2: f64) -> f64 {
        self.mu * (self.diffusion * q2 + self.degradation) - self.feedback()
    }

    /// Upper edge q²_c of the unstable band `0 < q² < q²_c`, or `None` if the
    /// band is empty (χŪf ≤ μk).
    pub fn critical_wavenumber_squared(&self) -> Option<f64> {
        let excess = self.feedback() - self.mu * self.degradation;
        (excess > 0.0).then(|| excess / (self.mu * self.diffusion))
    }
}

/// Constant solution (Ū, V̄) with fŪ = kV̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub u_bar: f64,
    pub v_bar: f64,
}
