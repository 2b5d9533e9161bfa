//! Free radiation pulses used as initial data.

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Result};
use crate::propagator::{FieldJet, FreeFieldData};

/// Divergence-free Gaussian pulse
/// `E₀ = A √(2e) (w/2) ∇g × p̂`, `B₀ = 0`, `g = exp(-|x - c|²/w²)`,
/// scaled so that `max |E₀| = A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub center: Vector3<f64>,
    pub width: f64,
    pub amplitude: f64,
    pub polarization: Vector3<f64>,
}

/// Relative size below which the pulse is treated as absent.
pub const PULSE_SUPPORT_TOL: f64 = 1e-16;

impl Pulse {
    pub fn new(center: Vector3<f64>, width: f64, amplitude: f64, polarization: Vector3<f64>) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() {
            return Err(invalid("pulse needs positive width and finite amplitude"));
        }
        let n = polarization.norm();
        if !(n > 0.0) {
            return Err(invalid("pulse polarization must be nonzero"));
        }
        Ok(Self {
            center,
            width,
            amplitude,
            polarization: polarization / n,
        })
    }

    fn scale(&self) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::E).sqrt() * 0.5 * self.width
    }

    /// Radius beyond which `g < tol`.
    pub fn radius_for(&self, tol: f64) -> f64 {
        self.width * (1.0 / tol).ln().sqrt()
    }

    /// `(E₀, ∂_l E₀)` at `x`.
    pub fn field(&self, x: &Vector3<f64>) -> (Vector3<f64>, [Vector3<f64>; 3]) {
        let r = x - self.center;
        let w2 = self.width * self.width;
        let g = (-r.norm_squared() / w2).exp();
        let s = self.scale();
        let grad = r * (-2.0 * g / w2);
        let hess = (r * r.transpose() * (4.0 / (w2 * w2)) - Matrix3::identity() * (2.0 / w2)) * g;
        let p = &self.polarization;
        let e = grad.cross(p) * s;
        let de = [0, 1, 2].map(|l| hess.column(l).into_owned().cross(p) * s);
        (e, de)
    }
}

impl FreeFieldData for Pulse {
    type Value = Vector3<f64>;

    fn jet(&self, y: &Vector3<f64>) -> FieldJet<Vector3<f64>> {
        let (e, grad_e) = self.field(y);
        FieldJet {
            e,
            grad_e,
            ..FieldJet::default()
        }
    }

    fn support(&self) -> Option<(Vector3<f64>, f64)> {
        Some((self.center, self.radius_for(PULSE_SUPPORT_TOL)))
    }
}

/// Superposition of pulses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTrain {
    pub pulses: Vec<Pulse>,
}

impl PulseTrain {
    pub fn new(pulses: Vec<Pulse>) -> Self {
        Self { pulses }
    }

    /// Smallest ball about the origin containing every pulse to `tol`.
    pub fn extent(&self, tol: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.center.norm() + p.radius_for(tol))
            .fold(0.0, f64::max)
    }

    pub fn field(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.pulses.iter().map(|p| p.field(x).0).sum()
    }
}

impl FreeFieldData for PulseTrain {
    type Value = Vector3<f64>;

    fn jet(&self, y: &Vector3<f64>) -> FieldJet<Vector3<f64>> {
        self.pulses.iter().fold(FieldJet::default(), |acc, p| acc + p.jet(y))
    }

    fn support(&self) -> Option<(Vector3<f64>, f64)> {
        match self.pulses.as_slice() {
            [] => Some((Vector3::zeros(), 0.0)),
            [p] => p.support(),
            _ => Some((Vector3::zeros(), self.extent(PULSE_SUPPORT_TOL))),
        }
    }
}
