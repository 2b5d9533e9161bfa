//! Plane-wave representation of soliton fields.
//!
//! With `Φ` the ridge profile of the density and `D(ω) = 1 - (v·ω)²`,
//!
//! ```text
//! E_v(x) = 1/(4π) ∫_{S²} a(ω) Φ(ω·x) dω,   a = (ω - v (v·ω)) / D
//! B_v(x) = 1/(4π) ∫_{S²} b(ω) Φ(ω·x) dω,   b = (v × ω) / D
//! ```
//!
//! The velocity derivatives `a_j = ∂_{v_j} a`, `b_j = ∂_{v_j} b` are
//! transverse (`a_j·ω = b_j·ω = 0`), so each plane wave of the source
//! `S_j = ∂_{v_j}(E_v, B_v)` splits into counter-propagating parts and the free
//! evolution is explicit:
//!
//! ```text
//! E(t) = ½(a - ω×b) Φ(u - t) + ½(a + ω×b) Φ(u + t)
//! B(t) = ½(ω×a + b) Φ(u - t) - ½(ω×a - b) Φ(u + t),   u = ω·x
//! ```

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::{anisotropy_factor, skew, FieldOrder, FieldPack};
use crate::quadrature::BandRule;
use crate::ridge::RidgeProfile;

/// Velocity derivatives of the source at a point.
/// `e`, `b`: column `j` is `∂_{v_j} E_v`, `∂_{v_j} B_v`.
/// `grad_e[i]`, `grad_b[i]`: the same matrices differentiated in `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SourceJet {
    pub e: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub grad_e: [Matrix3<f64>; 3],
    pub grad_b: [Matrix3<f64>; 3],
}

/// `[U(τ) S](d)` with columns indexed by the velocity direction, and
/// optionally `[U(τ) ∂_{x_i} S](d)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagatedSource {
    pub e: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub grad: Option<([Matrix3<f64>; 3], [Matrix3<f64>; 3])>,
}

impl PropagatedSource {
    /// Frobenius norm of the gradient part.
    pub fn grad_norm(&self) -> f64 {
        self.grad.map_or(0.0, |(ge, gb)| {
            ge.iter().chain(&gb).map(|m| m.norm_squared()).sum::<f64>().sqrt()
        })
    }
}

/// Direction-dependent coefficient matrices at one node.
struct Coefficients {
    a: Vector3<f64>,
    b: Vector3<f64>,
    da: Matrix3<f64>,
    db: Matrix3<f64>,
}

fn coefficients(v: &Vector3<f64>, omega: &Vector3<f64>, with_dv: bool) -> Coefficients {
    let vw = v.dot(omega);
    let inv_d = 1.0 / (1.0 - vw * vw);
    let a = (omega - v * vw) * inv_d;
    let b = v.cross(omega) * inv_d;
    let (da, db) = if with_dv {
        let k = 2.0 * vw * inv_d;
        let da = (Matrix3::identity() * (-vw) - v * omega.transpose()) * inv_d + a * omega.transpose() * k;
        let db = -skew(omega) * inv_d + b * omega.transpose() * k;
        (da, db)
    } else {
        (Matrix3::zeros(), Matrix3::zeros())
    };
    Coefficients { a, b, da, db }
}

/// Evaluator of soliton fields and sources for a given ridge profile.
#[derive(Debug, Clone)]
pub struct PlaneWave<P> {
    ridge: P,
    polar: usize,
    azimuth: usize,
}

impl<P: RidgeProfile> PlaneWave<P> {
    pub fn new(ridge: P) -> Self {
        Self::with_resolution(ridge, 96, 64)
    }

    /// Node counts at `|v| = 0`; scaled with speed.
    pub fn with_resolution(ridge: P, polar: usize, azimuth: usize) -> Self {
        Self {
            ridge,
            polar,
            azimuth,
        }
    }

    pub fn ridge(&self) -> &P {
        &self.ridge
    }

    fn rule(&self, speed: f64) -> BandRule {
        let f = anisotropy_factor(speed);
        BandRule::new(
            (self.polar as f64 * f).ceil() as usize,
            (self.azimuth as f64 * f).ceil() as usize,
        )
        .expect("positive node counts")
    }

    /// Band of directions where `Φ(ω·x - shift)` can be nonzero, as
    /// `(axis, c_lo, c_hi, |x|)`; `None` if empty.
    fn band(&self, x: &Vector3<f64>, shift: f64) -> Option<(Vector3<f64>, f64, f64, f64)> {
        let u = self.ridge.half_width();
        let r = x.norm();
        if r < 1e-14 {
            return (shift.abs() < u).then_some((Vector3::z(), -1.0, 1.0, 0.0));
        }
        let lo = ((shift - u) / r).max(-1.0);
        let hi = ((shift + u) / r).min(1.0);
        (hi > lo).then_some((x / r, lo, hi, r))
    }

    /// Static soliton fields of the ridge's density.
    pub fn fields(&self, v: &Vector3<f64>, x: &Vector3<f64>, order: FieldOrder) -> FieldPack {
        let mut pack = FieldPack::default();
        let Some((axis, lo, hi, r)) = self.band(x, 0.0) else {
            if order >= FieldOrder::SpaceGradient {
                pack.grad_e = Some(Matrix3::zeros());
                pack.grad_b = Some(Matrix3::zeros());
            }
            if order == FieldOrder::VelocityGradient {
                pack.dv_e = Some(Matrix3::zeros());
                pack.dv_b = Some(Matrix3::zeros());
            }
            return pack;
        };
        let with_grad = order >= FieldOrder::SpaceGradient;
        let with_dv = order == FieldOrder::VelocityGradient;
        let mut ge = Matrix3::zeros();
        let mut gb = Matrix3::zeros();
        let mut dve = Matrix3::zeros();
        let mut dvb = Matrix3::zeros();
        self.rule(v.norm()).for_each(&axis, lo, hi, |omega, c, w| {
            let phi = self.ridge.ridge(c * r, usize::from(with_grad));
            let k = coefficients(v, omega, with_dv);
            pack.e += k.a * (w * phi[0]);
            pack.b += k.b * (w * phi[0]);
            if with_grad {
                ge += k.a * omega.transpose() * (w * phi[1]);
                gb += k.b * omega.transpose() * (w * phi[1]);
            }
            if with_dv {
                dve += k.da * (w * phi[0]);
                dvb += k.db * (w * phi[0]);
            }
        });
        let s = 1.0 / (4.0 * PI);
        pack.e *= s;
        pack.b *= s;
        if with_grad {
            pack.grad_e = Some(ge * s);
            pack.grad_b = Some(gb * s);
        }
        if with_dv {
            pack.dv_e = Some(dve * s);
            pack.dv_b = Some(dvb * s);
        }
        pack
    }

    /// Source `S = ∂_v(E_v, B_v)` and its space gradient at `x`.
    pub fn source(&self, v: &Vector3<f64>, x: &Vector3<f64>, with_gradient: bool) -> SourceJet {
        let mut out = SourceJet::default();
        let Some((axis, lo, hi, r)) = self.band(x, 0.0) else {
            return out;
        };
        self.rule(v.norm()).for_each(&axis, lo, hi, |omega, c, w| {
            let phi = self.ridge.ridge(c * r, usize::from(with_gradient));
            let k = coefficients(v, omega, true);
            out.e += k.da * (w * phi[0]);
            out.b += k.db * (w * phi[0]);
            if with_gradient {
                for i in 0..3 {
                    let f = w * phi[1] * omega[i];
                    out.grad_e[i] += k.da * f;
                    out.grad_b[i] += k.db * f;
                }
            }
        });
        let s = 1.0 / (4.0 * PI);
        out.e *= s;
        out.b *= s;
        for i in 0..3 {
            out.grad_e[i] *= s;
            out.grad_b[i] *= s;
        }
        out
    }

    /// `[U(τ) S_v](d)` and optionally `[U(τ) ∇_x S_v](d)`.
    pub fn propagated_source(
        &self,
        v: &Vector3<f64>,
        tau: f64,
        d: &Vector3<f64>,
        gradient: bool,
    ) -> PropagatedSource {
        let mut e = Matrix3::zeros();
        let mut b = Matrix3::zeros();
        let mut ge = [Matrix3::zeros(); 3];
        let mut gb = [Matrix3::zeros(); 3];
        let rule = self.rule(v.norm());
        // sign = -1: profile Φ(u - τ); sign = +1: profile Φ(u + τ).
        for sign in [-1.0f64, 1.0] {
            let shift = -sign * tau;
            let Some((axis, lo, hi, r)) = self.band(d, shift) else {
                continue;
            };
            rule.for_each(&axis, lo, hi, |omega, c, w| {
                let phi = self.ridge.ridge(c * r - shift, usize::from(gradient));
                let k = coefficients(v, omega, true);
                let wx = skew(omega);
                let (ce, cb) = if sign < 0.0 {
                    ((k.da - wx * k.db) * 0.5, (wx * k.da + k.db) * 0.5)
                } else {
                    ((k.da + wx * k.db) * 0.5, (k.db - wx * k.da) * 0.5)
                };
                e += ce * (w * phi[0]);
                b += cb * (w * phi[0]);
                if gradient {
                    for i in 0..3 {
                        let f = w * phi[1] * omega[i];
                        ge[i] += ce * f;
                        gb[i] += cb * f;
                    }
                }
            });
        }
        let s = 1.0 / (4.0 * PI);
        PropagatedSource {
            e: e * s,
            b: b * s,
            grad: gradient.then(|| (ge.map(|m| m * s), gb.map(|m| m * s))),
        }
    }
}
