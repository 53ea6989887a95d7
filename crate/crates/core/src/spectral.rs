//! Neumann cosine basis on (0,π)^d.
//!
//! A field is stored as coefficients of the unnormalized products
//! `e_q(x) = Π cos(q_i x_i)` for `0 ≤ q_i ≤ N`. Grid samples live on the
//! midpoint nodes `x_j = (j + ½)π/M`, where the discrete cosine and sine sums are
//! exactly orthogonal for every mode below `M`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use ndarray::{Array2, ArrayD, Axis, Dimension, IxDyn, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Multi-index `q = (q_1, …, q_d)` of a cosine mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex(pub Vec<usize>);

impl ModeIndex {
    pub fn new(q: impl Into<Vec<usize>>) -> Self {
        Self(q.into())
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Squared wavenumber q² = Σ q_i².
    pub fn q2(&self) -> usize {
        squared_wavenumber(&self.0)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn squared_wavenumber(q: &[usize]) -> usize {
    q.iter().map(|&qi| qi * qi).sum()
}

/// Squared L² norm of `e_q` over (0,π)^d: π^d / 2^{#nonzero q_i}.
pub fn mode_weight(q: &[usize]) -> f64 {
    let nonzero = q.iter().filter(|&&qi| qi != 0).count();
    PI.powi(q.len() as i32) / f64::powi(2.0, nonzero as i32)
}

/// Cosine coefficients of a perturbation pair (u, v), truncated at `q_i ≤ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n: usize,
    dim: usize,
    u: ArrayD<f64>,
    v: ArrayD<f64>,
}

impl SpectralField {
    pub fn zeros(n: usize, dim: usize) -> Self {
        let shape = vec![n + 1; dim];
        Self {
            n,
            dim,
            u: ArrayD::zeros(IxDyn(&shape)),
            v: ArrayD::zeros(IxDyn(&shape)),
        }
    }

    /// Builds a field from coefficient arrays of shape `(N+1)^d`.
    pub fn from_arrays(u: ArrayD<f64>, v: ArrayD<f64>) -> Result<Self> {
        if u.shape() != v.shape() || u.ndim() == 0 || u.ndim() > 3 {
            return Err(Error::ShapeMismatch);
        }
        let n1 = u.shape()[0];
        if n1 == 0 || u.shape().iter().any(|&s| s != n1) {
            return Err(Error::ShapeMismatch);
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NumericalContradiction(
                "non-finite coefficient".into(),
            ));
        }
        Ok(Self {
            n: n1 - 1,
            dim: u.ndim(),
            u,
            v,
        })
    }

    /// The single mode `u_q e_q` (resp. `v_q e_q`).
    pub fn single_mode(n: usize, q: &ModeIndex, u: f64, v: f64) -> Self {
        let mut field = Self::zeros(n, q.dim());
        field.set_mode(q, u, v);
        field
    }

    /// Independent standard-normal coefficients on every mode.
    pub fn random<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Self {
        let mut field = Self::zeros(n, dim);
        for c in field.u.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        for c in field.v.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self) -> &ArrayD<f64> {
        &self.u
    }

    pub fn v(&self) -> &ArrayD<f64> {
        &self.v
    }

    pub fn u_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.v
    }

    pub fn parts_mut(&mut self) -> (&mut ArrayD<f64>, &mut ArrayD<f64>) {
        (&mut self.u, &mut self.v)
    }

    pub fn mode(&self, q: &ModeIndex) -> (f64, f64) {
        (self.u[q.as_slice()], self.v[q.as_slice()])
    }

    pub fn set_mode(&mut self, q: &ModeIndex, u: f64, v: f64) {
        self.u[q.as_slice()] = u;
        self.v[q.as_slice()] = v;
    }

    /// All mode indices in row-major order.
    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.u.indexed_iter().map(|(ix, _)| ModeIndex(ix.slice().to_vec()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.dim == other.dim
    }

    /// Copies into truncation `n`, padding with zeros or dropping modes above `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut out = Self::zeros(n, self.dim);
        let keep = n.min(self.n);
        for (ix, c) in self.u.indexed_iter() {
            if ix.slice().iter().all(|&q| q <= keep) {
                out.u[ix.slice()] = *c;
                out.v[ix.slice()] = self.v[ix.slice()];
            }
        }
        out
    }

    /// Weighted sum Σ_q g(q²) γ_q (|u_q|² + |v_q|²).
    fn weighted_square_sum(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for ((ix, u), v) in self.u.indexed_iter().zip(self.v.iter()) {
            let q = ix.slice();
            let q2 = squared_wavenumber(q) as f64;
            sum += g(q2) * mode_weight(q) * (u * u + v * v);
        }
        sum
    }

    /// ‖(u, v)‖ in L²((0,π)^d).
    pub fn l2_norm(&self) -> f64 {
        self.weighted_square_sum(|_| 1.0).sqrt()
    }

    /// Modal H² norm, weights (1 + q²)².
    pub fn h2_norm(&self) -> f64 {
        self.weighted_square_sum(|q2| (1.0 + q2) * (1.0 + q2)).sqrt()
    }

    /// L² norm of the u-component alone.
    pub fn u_l2_norm(&self) -> f64 {
        let mut sum = 0.0;
        for (ix, u) in self.u.indexed_iter() {
            sum += mode_weight(ix.slice()) * u * u;
        }
        sum.sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.u.mapv_inplace(|c| c * s);
        self.v.mapv_inplace(|c| c * s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert!(self.same_shape(other), "field shapes differ");
        self.u.scaled_add(s, &other.u);
        self.v.scaled_add(s, &other.v);
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(s);
        out
    }
}

/// Samples of (u, v) on the `M^d` midpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub m: usize,
    pub dim: usize,
    pub u: ArrayD<f64>,
    pub v: ArrayD<f64>,
}

impl GridField {
    /// Samples `g(x)` for both components from closures over node coordinates.
    pub fn from_fn(
        m: usize,
        dim: usize,
        u: impl Fn(&[f64]) -> f64,
        v: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let x = nodes(m);
        let shape = vec![m; dim];
        let point = |ix: IxDyn| -> Vec<f64> { ix.slice().iter().map(|&j| x[j]).collect() };
        Self {
            m,
            dim,
            u: ArrayD::from_shape_fn(IxDyn(&shape), |ix| u(&point(ix))),
            v: ArrayD::from_shape_fn(IxDyn(&shape), |ix| v(&point(ix))),
        }
    }
}

/// Midpoint collocation nodes `(j + ½)π/M`.
pub fn nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| (j as f64 + 0.5) * PI / m as f64).collect()
}

/// One-dimensional transform matrices between `N+1` modes and `M` nodes.
#[derive(Debug, Clone)]
pub(crate) struct Basis1d {
    /// `M × (N+1)`: cos(q x_j).
    pub cos_eval: Array2<f64>,
    /// `M × (N+1)`: d/dx cos(q x) = −q sin(q x_j).
    pub cos_deriv_eval: Array2<f64>,
    /// `(N+1) × M`: discrete cosine projection.
    pub cos_project: Array2<f64>,
    /// `(N+1) × M`: sine projection followed by d/dx, so that a sine series
    /// `Σ s_q sin(q x)` maps to the cosine coefficients `q s_q` of its derivative.
    pub sin_project_deriv: Array2<f64>,
}

impl Basis1d {
    /// Requires `m > n` so that all retained modes are discretely orthogonal.
    pub fn new(n: usize, m: usize) -> Self {
        debug_assert!(m > n);
        let x = nodes(m);
        let mf = m as f64;
        let cos_eval = Array2::from_shape_fn((m, n + 1), |(j, q)| (q as f64 * x[j]).cos());
        let cos_deriv_eval =
            Array2::from_shape_fn((m, n + 1), |(j, q)| -(q as f64) * (q as f64 * x[j]).sin());
        let cos_project = Array2::from_shape_fn((n + 1, m), |(q, j)| {
            let w = if q == 0 { 1.0 / mf } else { 2.0 / mf };
            w * (q as f64 * x[j]).cos()
        });
        let sin_project_deriv = Array2::from_shape_fn((n + 1, m), |(q, j)| {
            let qf = q as f64;
            qf * (2.0 / mf) * (qf * x[j]).sin()
        });
        Self {
            cos_eval,
            cos_deriv_eval,
            cos_project,
            sin_project_deriv,
        }
    }
}

/// Applies `mat` to every lane of `a` along `axis`; that axis changes length
/// from `mat.ncols()` to `mat.nrows()`.
pub(crate) fn apply_along_axis(a: &ArrayD<f64>, axis: usize, mat: &Array2<f64>) -> ArrayD<f64> {
    debug_assert_eq!(a.shape()[axis], mat.ncols());
    let mut shape = a.shape().to_vec();
    shape[axis] = mat.nrows();
    let mut out = ArrayD::zeros(IxDyn(&shape));
    Zip::from(out.lanes_mut(Axis(axis)))
        .and(a.lanes(Axis(axis)))
        .for_each(|mut dst, src| {
            for (row, d) in mat.rows().into_iter().zip(dst.iter_mut()) {
                *d = row.dot(&src);
            }
        });
    out
}

/// Applies one matrix per axis (separable transform).
pub(crate) fn apply_separable(a: &ArrayD<f64>, mats: &[&Array2<f64>]) -> ArrayD<f64> {
    debug_assert_eq!(a.ndim(), mats.len());
    let mut out = apply_along_axis(a, 0, mats[0]);
    for (axis, mat) in mats.iter().enumerate().skip(1) {
        out = apply_along_axis(&out, axis, mat);
    }
    out
}

fn check_resolution(n: usize, m: usize, extra: usize) -> Result<()> {
    if m < n + 1 + extra {
        return Err(Error::GridTooCoarse {
            required: n + 1 + extra,
            got: m,
        });
    }
    Ok(())
}

/// Evaluates `Σ_q w_q e_q` at the nodes of an `M^d` grid.
pub fn synthesize(field: &SpectralField, m: usize) -> Result<GridField> {
    check_resolution(field.n, m, 0)?;
    let basis = Basis1d::new(field.n, m);
    let mats = vec![&basis.cos_eval; field.dim];
    Ok(GridField {
        m,
        dim: field.dim,
        u: apply_separable(&field.u, &mats),
        v: apply_separable(&field.v, &mats),
    })
}

/// Discrete cosine projection of grid samples onto modes `q_i ≤ N`.
///
/// Exact for inputs of degree at most `M − 1` per axis; higher content aliases
/// onto `2M − q` and is folded into the retained coefficients.
pub fn analyze(grid: &GridField, n: usize) -> Result<SpectralField> {
    check_resolution(n, grid.m, 0)?;
    let basis = Basis1d::new(n, grid.m);
    let mats = vec![&basis.cos_project; grid.dim];
    Ok(SpectralField {
        n,
        dim: grid.dim,
        u: apply_separable(&grid.u, &mats),
        v: apply_separable(&grid.v, &mats),
    })
}

/// Per-axis partial derivatives of both components at the grid nodes.
#[derive(Debug, Clone)]
pub struct GridGradient {
    pub u: Vec<ArrayD<f64>>,
    pub v: Vec<ArrayD<f64>>,
}

/// Differentiates the cosine series term by term (cos → −q sin along the
/// differentiated axis) and evaluates on the `M^d` grid.
pub fn gradient_on_grid(field: &SpectralField, m: usize) -> Result<GridGradient> {
    check_resolution(field.n, m, 1)?;
    let basis = Basis1d::new(field.n, m);
    let partial = |coeffs: &ArrayD<f64>, axis: usize| {
        let mats: Vec<&Array2<f64>> = (0..field.dim)
            .map(|i| {
                if i == axis {
                    &basis.cos_deriv_eval
                } else {
                    &basis.cos_eval
                }
            })
            .collect();
        apply_separable(coeffs, &mats)
    };
    Ok(GridGradient {
        u: (0..field.dim).map(|i| partial(&field.u, i)).collect(),
        v: (0..field.dim).map(|i| partial(&field.v, i)).collect(),
    })
}
