//! Pointwise free evolution by spherical means.
//!
//! For divergence-free data each Cartesian component solves the scalar wave
//! equation with `∂_t E(0) = curl B₀`, `∂_t B(0) = -curl E₀`, so
//!
//! ```text
//! E(x,t) = M[E₀] + t M[(ω·∇)E₀] + t M[curl B₀]
//! B(x,t) = M[B₀] + t M[(ω·∇)B₀] - t M[curl E₀]
//! ```
//!
//! with `M[f] = (4π)⁻¹ ∫ f(x + tω) dω`. Matrix-valued data are treated
//! column by column.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::exec;
use crate::profile::Quantity;
use crate::quadrature::BandRule;

/// Field values that admit a curl from their three partial derivatives.
pub trait FieldValue: Quantity + Sub<Output = Self> + PartialEq + std::fmt::Debug {
    /// `curl F` from `grad[i] = ∂_{x_i} F`.
    fn curl(grad: &[Self; 3]) -> Self;
}

impl FieldValue for Vector3<f64> {
    fn curl(g: &[Self; 3]) -> Self {
        Vector3::new(g[1][2] - g[2][1], g[2][0] - g[0][2], g[0][1] - g[1][0])
    }
}

impl FieldValue for Matrix3<f64> {
    fn curl(g: &[Self; 3]) -> Self {
        let mut out = Matrix3::zeros();
        for j in 0..3 {
            out[(0, j)] = g[1][(2, j)] - g[2][(1, j)];
            out[(1, j)] = g[2][(0, j)] - g[0][(2, j)];
            out[(2, j)] = g[0][(1, j)] - g[1][(0, j)];
        }
        out
    }
}

/// Fields and their first partial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJet<V> {
    pub e: V,
    pub b: V,
    pub grad_e: [V; 3],
    pub grad_b: [V; 3],
}

impl<V: Quantity> Default for FieldJet<V> {
    fn default() -> Self {
        Self {
            e: V::zero(),
            b: V::zero(),
            grad_e: [V::zero(); 3],
            grad_b: [V::zero(); 3],
        }
    }
}

impl<V: Quantity> Add for FieldJet<V> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let add3 = |a: [V; 3], b: [V; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        Self {
            e: self.e + o.e,
            b: self.b + o.b,
            grad_e: add3(self.grad_e, o.grad_e),
            grad_b: add3(self.grad_b, o.grad_b),
        }
    }
}

impl<V: Quantity> Mul<f64> for FieldJet<V> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            e: self.e * s,
            b: self.b * s,
            grad_e: self.grad_e.map(|g| g * s),
            grad_b: self.grad_b.map(|g| g * s),
        }
    }
}

/// Initial data of the free field, sampled pointwise.
pub trait FreeFieldData: Sync {
    type Value: FieldValue;

    fn jet(&self, y: &Vector3<f64>) -> FieldJet<Self::Value>;

    /// Closed ball `(centre, radius)` outside which the data vanish.
    fn support(&self) -> Option<(Vector3<f64>, f64)> {
        None
    }
}

/// Result of one Kirchhoff evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KirchhoffValue<V> {
    pub e: V,
    pub b: V,
    /// `|fine − coarse|` over both fields.
    pub error_estimate: f64,
}

/// Spherical quadrature settings for the Kirchhoff formula.
#[derive(Debug, Clone)]
pub struct KirchhoffRule {
    fine: BandRule,
    coarse: BandRule,
    tolerance: f64,
    t_min: f64,
}

impl KirchhoffRule {
    /// Default rule: exactness 47, relative tolerance `1e-6`.
    pub fn new() -> Self {
        Self::with_exactness(47, 1e-6).expect("valid default rule")
    }

    /// Fine rule of the given exactness; the error estimate compares against
    /// a rule of two thirds the exactness.
    pub fn with_exactness(degree: usize, tolerance: f64) -> Result<Self> {
        Ok(Self {
            fine: BandRule::with_exactness(degree)?,
            coarse: BandRule::with_exactness((2 * degree / 3).max(1))?,
            tolerance,
            t_min: 1e-12,
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn fine_rule(&self) -> &BandRule {
        &self.fine
    }

    /// Sums the three mean terms with one rule; also returns `Σ w |integrand|`.
    fn means<D: FreeFieldData>(
        &self,
        rule: &BandRule,
        data: &D,
        x: &Vector3<f64>,
        t: f64,
        band: &(Vector3<f64>, f64),
    ) -> (D::Value, D::Value, f64) {
        let zero = D::Value::zero();
        let (mut e, mut b, mut mass) = (zero, zero, 0.0);
        let (axis, c_lo) = band;
        rule.for_each(axis, *c_lo, 1.0, |omega, _, w| {
            let j = data.jet(&(x + omega * t));
            let dir = |g: &[D::Value; 3]| g[0] * omega[0] + g[1] * omega[1] + g[2] * omega[2];
            let ie = j.e + (dir(&j.grad_e) + D::Value::curl(&j.grad_b)) * t;
            let ib = j.b + (dir(&j.grad_b) - D::Value::curl(&j.grad_e)) * t;
            e = e + ie * w;
            b = b + ib * w;
            mass += w * (ie.magnitude() + ib.magnitude());
        });
        let s = 1.0 / (4.0 * std::f64::consts::PI);
        (e * s, b * s, mass * s)
    }

    /// Spherical means of `E₀, B₀, curl E₀, curl B₀` over `|y − x| = r`
    /// with the fine or coarse rule, plus `Σ w (|E₀| + |B₀| + |curl E₀| + |curl B₀|)/4π`.
    /// `None` when the sphere misses the data support.
    pub(crate) fn data_means<D: FreeFieldData>(
        &self,
        fine: bool,
        data: &D,
        x: &Vector3<f64>,
        r: f64,
    ) -> Option<([D::Value; 4], f64)> {
        let zero = D::Value::zero();
        if r < self.t_min {
            let j = data.jet(x);
            let (ce, cb) = (D::Value::curl(&j.grad_e), D::Value::curl(&j.grad_b));
            let mass = j.e.magnitude() + j.b.magnitude() + ce.magnitude() + cb.magnitude();
            return Some(([j.e, j.b, ce, cb], mass));
        }
        let (axis, c_lo) = Self::cap(data, x, r)?;
        let rule = if fine { &self.fine } else { &self.coarse };
        let mut acc = [zero; 4];
        let mut mass = 0.0;
        rule.for_each(&axis, c_lo, 1.0, |omega, _, w| {
            let j = data.jet(&(x + omega * r));
            let vals = [j.e, j.b, D::Value::curl(&j.grad_e), D::Value::curl(&j.grad_b)];
            for (a, v) in acc.iter_mut().zip(vals) {
                *a = *a + v * w;
                mass += w * v.magnitude();
            }
        });
        let s = 1.0 / (4.0 * std::f64::consts::PI);
        Some((acc.map(|a| a * s), mass * s))
    }

    /// Directions `ω` with `x + tω` inside the data support, as a polar cap.
    fn cap<D: FreeFieldData>(data: &D, x: &Vector3<f64>, t: f64) -> Option<(Vector3<f64>, f64)> {
        let Some((centre, radius)) = data.support() else {
            return Some((Vector3::z(), -1.0));
        };
        let d = centre - x;
        let dist = d.norm();
        if dist < 1e-14 {
            return (t < radius).then_some((Vector3::z(), -1.0));
        }
        let c_min = (t * t + dist * dist - radius * radius) / (2.0 * t * dist);
        (c_min < 1.0).then(|| (d / dist, c_min.max(-1.0)))
    }

    /// `U(t)(E₀, B₀)` at `x`.
    pub fn evaluate<D: FreeFieldData>(&self, data: &D, x: &Vector3<f64>, t: f64) -> Result<KirchhoffValue<D::Value>> {
        if t.abs() < self.t_min {
            let j = data.jet(x);
            return Ok(KirchhoffValue {
                e: j.e,
                b: j.b,
                error_estimate: 0.0,
            });
        }
        if t < 0.0 {
            return Err(crate::error::invalid("Kirchhoff evaluation needs t ≥ 0"));
        }
        let zero = D::Value::zero();
        let Some(band) = Self::cap(data, x, t) else {
            return Ok(KirchhoffValue {
                e: zero,
                b: zero,
                error_estimate: 0.0,
            });
        };
        let (e, b, mass) = self.means(&self.fine, data, x, t, &band);
        let (ec, bc, _) = self.means(&self.coarse, data, x, t, &band);
        let error_estimate = ((e - ec).magnitude().powi(2) + (b - bc).magnitude().powi(2)).sqrt();
        let scale = mass.max((e.magnitude().powi(2) + b.magnitude().powi(2)).sqrt());
        if error_estimate > self.tolerance * scale && error_estimate > f64::MIN_POSITIVE {
            return Err(Error::Accuracy {
                estimate: error_estimate / scale,
                tolerance: self.tolerance,
            });
        }
        Ok(KirchhoffValue { e, b, error_estimate })
    }

    /// [`Self::evaluate`] at many points in parallel.
    pub fn evaluate_many<D: FreeFieldData>(
        &self,
        data: &D,
        points: &[Vector3<f64>],
        t: f64,
    ) -> Result<Vec<KirchhoffValue<D::Value>>> {
        exec::map_slice(points, |x| self.evaluate(data, x, t)).into_iter().collect()
    }
}

impl Default for KirchhoffRule {
    fn default() -> Self {
        Self::new()
    }
}
