//! The memory kernel `a(t,s)`.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::fit::{decay_fit, DecayFit};
use crate::profile::ChargeProfile;
use crate::propagator::{FieldJet, FreeFieldData, KirchhoffRule};
use crate::ridge::MollifiedRidge;
use crate::soliton::{check_speed, skew, PlaneWave, PropagatedSource};
use crate::trajectory::{momentum_maps, ParticleState};

/// `a(t,s)` as a matrix acting on `ṗ(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub s: f64,
    pub matrix: Matrix3<f64>,
}

/// `−(M_E + q̇(t)× M_B) F′(p(s))`.
pub fn kernel_matrix(m_e: &Matrix3<f64>, m_b: &Matrix3<f64>, qdot_t: &Vector3<f64>, f_prime_s: &Matrix3<f64>) -> Matrix3<f64> {
    -(m_e + skew(qdot_t) * m_b) * f_prime_s
}

/// Mollified soliton-derivative source `S^ρ` as free-field data, columns
/// indexed by the velocity direction.
pub struct MollifiedSource<'a> {
    plane: &'a PlaneWave<MollifiedRidge>,
    velocity: Vector3<f64>,
}

impl FreeFieldData for MollifiedSource<'_> {
    type Value = Matrix3<f64>;

    fn jet(&self, y: &Vector3<f64>) -> FieldJet<Matrix3<f64>> {
        let s = self.plane.source(&self.velocity, y, true);
        FieldJet {
            e: s.e,
            b: s.b,
            grad_e: s.grad_e,
            grad_b: s.grad_b,
        }
    }
}

/// Evaluates propagated mollified sources and kernel samples.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    plane: PlaneWave<MollifiedRidge>,
}

impl KernelEvaluator {
    pub fn new(profile: &ChargeProfile) -> Result<Self> {
        Ok(Self {
            plane: PlaneWave::new(MollifiedRidge::new(profile)?),
        })
    }

    pub fn with_plane_wave(plane: PlaneWave<MollifiedRidge>) -> Self {
        Self { plane }
    }

    /// Light-cone support half-width `2R`.
    pub fn support_width(&self) -> f64 {
        use crate::ridge::RidgeProfile;
        self.plane.ridge().half_width()
    }

    /// `[U(τ) S^ρ_v](d)`, optionally with `[U(τ) ∇S^ρ_v](d)`.
    pub fn propagated(&self, v: &Vector3<f64>, tau: f64, d: &Vector3<f64>, gradient: bool) -> PropagatedSource {
        self.plane.propagated_source(v, tau, d, gradient)
    }

    pub fn source_data(&self, v: Vector3<f64>) -> MollifiedSource<'_> {
        MollifiedSource {
            plane: &self.plane,
            velocity: v,
        }
    }

    /// `a(t,s)` from the plane-wave representation of the propagated source.
    pub fn sample(&self, at_t: &ParticleState, at_s: &ParticleState) -> KernelSample {
        let m = self.propagated(&at_s.qdot, at_t.t - at_s.t, &(at_t.q - at_s.q), false);
        KernelSample {
            t: at_t.t,
            s: at_s.t,
            matrix: kernel_matrix(&m.e, &m.b, &at_t.qdot, &momentum_maps(&at_s.p).f_prime),
        }
    }

    /// `a(t,s)` by Kirchhoff spherical means of the mollified source.
    pub fn sample_kirchhoff(&self, at_t: &ParticleState, at_s: &ParticleState, rule: &KirchhoffRule) -> Result<KernelSample> {
        check_speed(&at_s.qdot)?;
        let data = self.source_data(at_s.qdot);
        let v = rule.evaluate(&data, &(at_t.q - at_s.q), at_t.t - at_s.t)?;
        Ok(KernelSample {
            t: at_t.t,
            s: at_s.t,
            matrix: kernel_matrix(&v.e, &v.b, &at_t.qdot, &momentum_maps(&at_s.p).f_prime),
        })
    }
}

/// Kernel norms along a straight-line trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDecay {
    pub lags: Vec<f64>,
    pub norms: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub fit: DecayFit,
    pub gradient_fit: DecayFit,
}

/// `‖a(t,s)‖` and `‖[U(t−s)∇S^ρ](q(t)−q(s))‖` against `t − s` for `q(t) = vt`.
/// Both vanish identically once `(1 − |v|)(t−s) ≥ 2R` (strong Huygens
/// principle), which the fits report as slope `−∞`.
pub fn kernel_decay_scan(evaluator: &KernelEvaluator, velocity: &Vector3<f64>, lags: &[f64]) -> Result<KernelDecay> {
    check_speed(velocity)?;
    let p = crate::trajectory::momentum_from_velocity(velocity)?;
    let fp = momentum_maps(&p).f_prime;
    let rows = crate::exec::map_slice(lags, |&tau| {
        let m = evaluator.propagated(velocity, tau, &(velocity * tau), true);
        (kernel_matrix(&m.e, &m.b, velocity, &fp).norm(), m.grad_norm())
    });
    let norms: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gradient_norms: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(KernelDecay {
        fit: decay_fit(lags, &norms, 0.0)?,
        gradient_fit: decay_fit(lags, &gradient_norms, 0.0)?,
        lags: lags.to_vec(),
        norms,
        gradient_norms,
    })
}
