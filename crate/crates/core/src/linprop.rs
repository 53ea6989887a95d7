//! Exact solution operator `e^{Lt}` of the linearized system.
//!
//! Each mode evolves independently as a 2×2 system, solved in closed form by
//! its eigen-decomposition; nothing here is time-stepped.

use ndarray::{ArrayD, Dimension};

use crate::dispersion::{EigenTable, ModeFlow, SpectrumSummary};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{squared_wavenumber, ModeIndex, SpectralField};

/// Largest growth exponent `λ t` accepted before the flow would overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Eigen-coordinates `w_q = w_q⁻ r₋(q) + w_q⁺ r₊(q)` of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    pub minus: ArrayD<f64>,
    pub plus: ArrayD<f64>,
}

impl ModalDecomposition {
    pub fn minus_at(&self, q: &ModeIndex) -> f64 {
        self.minus[q.as_slice()]
    }

    pub fn plus_at(&self, q: &ModeIndex) -> f64 {
        self.plus[q.as_slice()]
    }

    pub fn recompose(&self, spectrum: &SpectrumSummary) -> SpectralField {
        let mut u = self.minus.clone();
        let mut v = self.minus.clone();
        for ((ix, &m), &p) in self.minus.indexed_iter().zip(self.plus.iter()) {
            let eig = spectrum.table.get(squared_wavenumber(ix.slice()));
            let (a, b) = eig.recompose(m, p);
            u[ix.slice()] = a;
            v[ix.slice()] = b;
        }
        SpectralField::from_arrays(u, v).expect("decomposition arrays share one shape")
    }
}

pub fn decompose(field: &SpectralField, spectrum: &SpectrumSummary) -> Result<ModalDecomposition> {
    spectrum.table.covers(field)?;
    let mut minus = field.u().clone();
    let mut plus = field.v().clone();
    for ((ix, &u), &v) in field.u().indexed_iter().zip(field.v().iter()) {
        let (m, p) = spectrum.table.get(squared_wavenumber(ix.slice())).decompose(u, v);
        minus[ix.slice()] = m;
        plus[ix.slice()] = p;
    }
    Ok(ModalDecomposition { minus, plus })
}

/// Precomputed `e^{Lt}` for one time `t`, shared by all modes of a truncation.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    dim: usize,
    flows: Vec<ModeFlow>,
}

impl Propagator {
    pub fn new(table: &EigenTable, n: usize, t: f64) -> Result<Self> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        let dim = table.dim();
        let max_q2 = dim * n * n;
        let flows = (0..=max_q2)
            .map(|q2| {
                let eig = table.get(q2);
                let exponent = eig.lambda_plus * t;
                if exponent > MAX_EXPONENT {
                    return Err(Error::Overflow { exponent });
                }
                Ok(eig.flow(t, 0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, dim, flows })
    }

    pub fn apply(&self, field: &SpectralField) -> SpectralField {
        let mut out = field.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, field: &mut SpectralField) {
        assert!(
            field.n() == self.n && field.dim() == self.dim,
            "propagator built for another truncation"
        );
        let (u, v) = field.parts_mut();
        for ((ix, u), v) in u.indexed_iter_mut().zip(v.iter_mut()) {
            let (a, b) = self.flows[squared_wavenumber(ix.slice())].apply(*u, *v);
            *u = a;
            *v = b;
        }
    }
}

/// Solution of the linearized system at time `t` from initial data `field`.
pub fn propagate(field: &SpectralField, t: f64, spectrum: &SpectrumSummary) -> Result<SpectralField> {
    spectrum.table.covers(field)?;
    Ok(Propagator::new(&spectrum.table, field.n(), t)?.apply(field))
}

/// `e^{λ_max t} Σ_{q∈Ω_max} w_q⁺ r₊(q) e_q`, the plus branch of the fastest modes.
pub fn dominant_projection(
    field: &SpectralField,
    t: f64,
    spectrum: &SpectrumSummary,
) -> Result<SpectralField> {
    spectrum.table.covers(field)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let exponent = spectrum.lambda_max * t;
    if exponent > MAX_EXPONENT {
        return Err(Error::Overflow { exponent });
    }
    let growth = exponent.exp();
    let mut out = SpectralField::zeros(field.n(), field.dim());
    for q in &spectrum.omega_max {
        if q.as_slice().iter().any(|&qi| qi > field.n()) {
            continue;
        }
        let eig = spectrum.table.get(q.q2());
        let (u, v) = field.mode(q);
        let (_, plus) = eig.decompose(u, v);
        out.set_mode(q, growth * plus * eig.a_plus, growth * plus);
    }
    Ok(out)
}

/// Right-hand side of the linearized system, `L w`, in coefficient form.
pub fn apply_generator(field: &SpectralField, params: &ModelParams) -> SpectralField {
    let mut out = field.clone();
    let (u_out, v_out) = out.parts_mut();
    for (((ix, u), v), (&u0, &v0)) in u_out
        .indexed_iter_mut()
        .zip(v_out.iter_mut())
        .zip(field.u().iter().zip(field.v().iter()))
    {
        let q2 = squared_wavenumber(ix.slice()) as f64;
        *u = -params.mu * q2 * u0 + params.chi * params.u_bar * q2 * v0;
        *v = params.secretion * u0 - (params.diffusion * q2 + params.degradation) * v0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{growth_constant_estimate, growth_ratio, spectrum_summary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectrum(n: usize) -> SpectrumSummary {
        spectrum_summary(&ModelParams::flagship(), n).unwrap()
    }

    fn rel_err(a: &SpectralField, b: &SpectralField) -> f64 {
        (a - b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn decompose_eigenvectors() {
        let s = spectrum(8);
        let q0 = ModeIndex::new([1, 0]);
        let p = s.pair(&q0);
        let f = SpectralField::single_mode(8, &q0, p.r_plus[0], p.r_plus[1]);
        let d = decompose(&f, &s).unwrap();
        assert!((d.plus_at(&q0) - 1.0).abs() < 1e-15);
        assert!(d.minus_at(&q0).abs() < 1e-15);

        let f = SpectralField::single_mode(
            8,
            &q0,
            p.r_minus[0] + 2.0 * p.r_plus[0],
            p.r_minus[1] + 2.0 * p.r_plus[1],
        );
        let d = decompose(&f, &s).unwrap();
        assert!((d.minus_at(&q0) - 1.0).abs() < 1e-14);
        assert!((d.plus_at(&q0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn decompose_round_trip() {
        let s = spectrum(8);
        let f = SpectralField::random(8, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let back = decompose(&f, &s).unwrap().recompose(&s);
        assert!(rel_err(&back, &f) <= 1e-11);
    }

    #[test]
    fn decompose_rejects_foreign_truncation() {
        let s = spectrum(4);
        assert!(matches!(
            decompose(&SpectralField::zeros(5, 2), &s),
            Err(Error::SpectrumMismatch { .. })
        ));
        assert!(decompose(&SpectralField::zeros(3, 1), &s).is_err());
    }

    #[test]
    fn propagate_identity_and_eigen() {
        let s = spectrum(8);
        let f = SpectralField::random(8, 2, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(rel_err(&propagate(&f, 0.0, &s).unwrap(), &f) <= 1e-12);

        let q0 = ModeIndex::new([0, 1]);
        let p = s.pair(&q0);
        let e = SpectralField::single_mode(8, &q0, p.r_plus[0], 1.0);
        let t = 2.5;
        let expect = &e * (p.lambda_plus * t).exp();
        assert!(rel_err(&propagate(&e, t, &s).unwrap(), &expect) <= 1e-14);
    }

    #[test]
    fn propagate_guards() {
        let s = spectrum(4);
        let f = SpectralField::zeros(4, 2);
        assert!(matches!(propagate(&f, -1.0, &s), Err(Error::NegativeTime(_))));
        assert!(matches!(propagate(&f, 1e4, &s), Err(Error::Overflow { .. })));
        assert!(propagate(&f, 2000.0, &s).is_ok());
    }

    /// Classical RK4 on the per-mode 2×2 system, independent of the eigenbasis.
    fn rk4_mode(params: &ModelParams, q2: f64, (u, v): (f64, f64), t: f64, dt: f64) -> (f64, f64) {
        let rhs = |u: f64, v: f64| {
            (
                -params.mu * q2 * u + params.chi * params.u_bar * q2 * v,
                params.secretion * u - (params.diffusion * q2 + params.degradation) * v,
            )
        };
        let steps = (t / dt).round() as usize;
        let (mut u, mut v) = (u, v);
        for _ in 0..steps {
            let k1 = rhs(u, v);
            let k2 = rhs(u + 0.5 * dt * k1.0, v + 0.5 * dt * k1.1);
            let k3 = rhs(u + 0.5 * dt * k2.0, v + 0.5 * dt * k2.1);
            let k4 = rhs(u + dt * k3.0, v + dt * k3.1);
            u += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (u, v)
    }

    #[test]
    fn propagate_matches_rk4() {
        let s = spectrum(4);
        let params = ModelParams::flagship();
        let f = SpectralField::random(4, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let t = 0.7;
        let out = propagate(&f, t, &s).unwrap();
        for q in f.modes() {
            let (u, v) = rk4_mode(&params, q.q2() as f64, f.mode(&q), t, 1e-4);
            let (a, b) = out.mode(&q);
            let scale = a.hypot(b).max(1e-300);
            assert!((a - u).hypot(b - v) <= 1e-6 * scale, "{q}");
        }
    }

    #[test]
    fn dominant_projection_cases() {
        let s = spectrum(8);
        // support on (2,3) only, disjoint from Ω_max
        let f = SpectralField::single_mode(8, &ModeIndex::new([2, 3]), 1.0, -0.5);
        assert_eq!(dominant_projection(&f, 1.0, &s).unwrap().l2_norm(), 0.0);

        let q0 = ModeIndex::new([1, 0]);
        let p = s.pair(&q0);
        let e = SpectralField::single_mode(8, &q0, p.r_plus[0], 1.0);
        assert!(rel_err(&dominant_projection(&e, 0.0, &s).unwrap(), &e) <= 1e-15);

        let g = SpectralField::random(8, 2, &mut ChaCha8Rng::seed_from_u64(9));
        let base = dominant_projection(&g, 0.0, &s).unwrap().l2_norm();
        let t = 3.3;
        let later = dominant_projection(&g, t, &s).unwrap().l2_norm();
        assert!((later - (s.lambda_max * t).exp() * base).abs() <= 1e-13 * later);
    }

    #[test]
    fn pde_residual_is_second_order() {
        let s = spectrum(6);
        let params = ModelParams::flagship();
        let f = SpectralField::random(6, 2, &mut ChaCha8Rng::seed_from_u64(11)).resized(3).resized(6);
        let t = 0.8;
        let rhs = apply_generator(&propagate(&f, t, &s).unwrap(), &params);
        let err = |h: f64| {
            let fd = &(&propagate(&f, t + h, &s).unwrap() - &propagate(&f, t - h, &s).unwrap()) * (0.5 / h);
            (&fd - &rhs).l2_norm()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} {e2}");
    }

    #[test]
    fn growth_bound_holds_on_probe_grid() {
        let s = spectrum(8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let est = growth_constant_estimate(&s, 10, &mut rng);
        for _ in 0..10 {
            let f = SpectralField::random(8, 2, &mut rng);
            for &t in &est.times {
                assert!(growth_ratio(&s, &f, t).unwrap() <= est.c1_hat * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn non_dominant_part_decays_at_gap_rate() {
        let s = spectrum(8);
        let f = SpectralField::random(8, 2, &mut ChaCha8Rng::seed_from_u64(4));
        let rest = |t: f64| {
            let full = propagate(&f, t, &s).unwrap();
            let dom = dominant_projection(&f, t, &s).unwrap();
            (&full - &dom).l2_norm() * (-s.lambda_max * t).exp()
        };
        let c = rest(0.0);
        for t in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            // the marginal modes (λ₊ = 0) set the rate exactly at ν
            assert!(rest(t) <= 2.0 * c * (-s.nu * t).exp(), "t = {t}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn semigroup(seed in any::<u64>(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
                let s = spectrum(6);
                let f = SpectralField::random(6, 2, &mut ChaCha8Rng::seed_from_u64(seed));
                let two = propagate(&propagate(&f, a, &s).unwrap(), b, &s).unwrap();
                let one = propagate(&f, a + b, &s).unwrap();
                prop_assert!(rel_err(&two, &one) <= 1e-10);
            }
        }
    }
}
