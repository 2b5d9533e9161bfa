//! The radial charge distribution ρ and mollification `f ↦ f * ρ`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{BandRule, GaussRule};
use crate::taylor::Jet;

/// Below this value of `1 - (r/R)^2` the bump is zero in double precision.
const BUMP_EDGE: f64 = 1.0 / 740.0;

/// Radial shape of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// `Z exp(-1/(1 - r²/R²))`, C^∞.
    Bump,
    /// `Z (1 - r²/R²)^4`, C³ at the edge.
    Poly4,
}

impl FromStr for ProfileShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bump" => Ok(Self::Bump),
            "poly4" => Ok(Self::Poly4),
            other => Err(invalid(format!("unknown profile shape `{other}` (expected bump | poly4)"))),
        }
    }
}

impl fmt::Display for ProfileShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bump => "bump",
            Self::Poly4 => "poly4",
        })
    }
}

/// Charge `e` and mass `m` (c = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    charge: f64,
    mass: f64,
}

impl PhysicalConstants {
    pub fn new(charge: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        if !charge.is_finite() {
            return Err(invalid("charge must be finite"));
        }
        Ok(Self { charge, mass })
    }

    /// Constants with unit mass and the given `e²/m`.
    pub fn from_coupling(coupling: f64) -> Result<Self> {
        if coupling < 0.0 {
            return Err(invalid("e²/m must be nonnegative"));
        }
        Self::new(coupling.sqrt(), 1.0)
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `e² / m`.
    pub fn coupling(&self) -> f64 {
        self.charge * self.charge / self.mass
    }
}

/// Values that can be averaged against ρ.
pub trait Quantity: Copy + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Quantity for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Quantity for Vector3<f64> {
    fn zero() -> Self {
        Vector3::zeros()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Quantity for Matrix3<f64> {
    fn zero() -> Self {
        Matrix3::zeros()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// A pair of vectors, typically `(E, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorPair {
    pub e: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl VectorPair {
    pub fn new(e: Vector3<f64>, b: Vector3<f64>) -> Self {
        Self { e, b }
    }
}

impl Add for VectorPair {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.e + o.e, self.b + o.b)
    }
}

impl Mul<f64> for VectorPair {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.e * s, self.b * s)
    }
}

impl Quantity for VectorPair {
    fn zero() -> Self {
        Self::default()
    }
    fn magnitude(&self) -> f64 {
        (self.e.norm_squared() + self.b.norm_squared()).sqrt()
    }
}

/// Minimum of |ρ̂| over a sampled wavenumber range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerScan {
    pub min_abs: f64,
    pub k_at_min: f64,
    pub k_max: f64,
    pub samples: usize,
    /// Lower end of the first sampled interval on which ρ̂ changes sign.
    pub first_sign_change: Option<f64>,
}

/// Compactly supported, radial, unit-charge profile.
#[derive(Debug, Clone)]
pub struct ChargeProfile {
    shape: ProfileShape,
    radius: f64,
    normalization: f64,
}

impl ChargeProfile {
    pub fn new(shape: ProfileShape, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("support radius must be positive, got {radius}")));
        }
        let mut p = Self {
            shape,
            radius,
            normalization: 1.0,
        };
        let charge = p.radial_integral(radius, |r| r * r);
        p.normalization = 1.0 / (4.0 * PI * charge);
        Ok(p)
    }

    pub fn shape(&self) -> ProfileShape {
        self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Taylor jet of ρ as a function of the signed radial coordinate `r`.
    /// ρ depends on `r²`, so the jet is valid for negative `r` as well.
    pub fn radial_jet<const N: usize>(&self, r: f64) -> Jet<N> {
        let x = Jet::<N>::variable(r).scale(1.0 / self.radius);
        let one_minus = -(x * x) + 1.0;
        let gap = one_minus.value();
        match self.shape {
            ProfileShape::Bump => {
                if gap <= BUMP_EDGE {
                    return Jet::zero();
                }
                (-one_minus.recip()).exp().scale(self.normalization)
            }
            ProfileShape::Poly4 => {
                if gap <= 0.0 {
                    return Jet::zero();
                }
                one_minus.powi(4).scale(self.normalization)
            }
        }
    }

    /// ρ at radius `r`.
    pub fn density_radial(&self, r: f64) -> f64 {
        let s = r / self.radius;
        let gap = 1.0 - s * s;
        match self.shape {
            ProfileShape::Bump if gap > BUMP_EDGE => self.normalization * (-1.0 / gap).exp(),
            ProfileShape::Poly4 if gap > 0.0 => self.normalization * gap.powi(4),
            _ => 0.0,
        }
    }

    /// `(ρ(x), ∇ρ(x))`.
    pub fn eval_density(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let r = x.norm();
        if r >= self.radius {
            return (0.0, Vector3::zeros());
        }
        let j = self.radial_jet::<2>(r);
        let grad = if r > 0.0 { x * (j.0[1] / r) } else { Vector3::zeros() };
        (j.0[0], grad)
    }

    /// `(ρ, ∇ρ, ∇∇ρ)` at `x`.
    pub fn eval_density_hessian(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let r = x.norm();
        if r >= self.radius {
            return (0.0, Vector3::zeros(), Matrix3::zeros());
        }
        let j = self.radial_jet::<3>(r);
        let d1 = j.0[1];
        let d2 = 2.0 * j.0[2];
        if r < 1e-8 * self.radius {
            return (j.0[0], x * d2, Matrix3::identity() * d2);
        }
        let u = x / r;
        let uu = u * u.transpose();
        let hess = uu * d2 + (Matrix3::identity() - uu) * (d1 / r);
        (j.0[0], u * d1, hess)
    }

    /// `∫₀^min(r,R) g(s) ρ(s) ds` by composite Gauss–Legendre.
    fn radial_integral(&self, upper: f64, g: impl Fn(f64) -> f64) -> f64 {
        let upper = upper.min(self.radius);
        if upper <= 0.0 {
            return 0.0;
        }
        let rule = GaussRule::new(32).expect("nonzero order");
        let panels = 16;
        let h = upper / panels as f64;
        (0..panels)
            .map(|i| rule.integrate(i as f64 * h, (i + 1) as f64 * h, |s| g(s) * self.density_radial(s)))
            .sum()
    }

    /// Charge inside the ball of radius `r`.
    pub fn enclosed_charge(&self, r: f64) -> f64 {
        4.0 * PI * self.radial_integral(r, |s| s * s)
    }

    /// `∫₀^min(r,R) s ρ(s) ds`.
    pub fn radial_first_moment(&self, r: f64) -> f64 {
        self.radial_integral(r, |s| s)
    }

    /// `∫ |y|^k ρ(y) dy`.
    pub fn moment(&self, k: i32) -> f64 {
        4.0 * PI * self.radial_integral(self.radius, |s| s.powi(k + 2))
    }

    /// Electrostatic field of the profile at rest (Newton's shell theorem).
    pub fn coulomb_field(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let r = x.norm();
        if r == 0.0 {
            return Vector3::zeros();
        }
        x * (self.enclosed_charge(r) / (4.0 * PI * r * r * r))
    }

    /// `ρ̂(k) = 4π ∫ r² ρ(r) sin(kr)/(kr) dr`.
    pub fn fourier_radial(&self, k: f64) -> f64 {
        let k = k.abs();
        let rule = GaussRule::new(32).expect("nonzero order");
        let panels = 16usize.max((k * self.radius / 2.0).ceil() as usize);
        let h = self.radius / panels as f64;
        let sinc = |x: f64| if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        4.0 * PI
            * (0..panels)
                .map(|i| {
                    rule.integrate(i as f64 * h, (i + 1) as f64 * h, |r| {
                        r * r * self.density_radial(r) * sinc(k * r)
                    })
                })
                .sum::<f64>()
    }

    /// Samples ρ̂ on `samples` equispaced points of `[0, k_max]`.
    pub fn wiener_scan(&self, k_max: f64, samples: usize) -> Result<WienerScan> {
        if samples < 2 || !(k_max > 0.0) {
            return Err(invalid("wiener scan needs k_max > 0 and at least 2 samples"));
        }
        let values = crate::exec::map_indices(samples, |i| {
            let k = k_max * i as f64 / (samples - 1) as f64;
            (k, self.fourier_radial(k))
        });
        let (k_at_min, min_abs) = values
            .iter()
            .map(|&(k, v)| (k, v.abs()))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let first_sign_change = values
            .windows(2)
            .find(|w| w[0].1 * w[1].1 < 0.0)
            .map(|w| w[0].0);
        Ok(WienerScan {
            min_abs,
            k_at_min,
            k_max,
            samples,
            first_sign_change,
        })
    }

    /// `∫ f(point − y) ρ(y) dy` with the default rule, checked against a
    /// coarser embedded rule.
    pub fn mollify_at<T, F>(&self, f: F, point: &Vector3<f64>) -> Result<T>
    where
        T: Quantity,
        F: Fn(&Vector3<f64>) -> T + Sync,
    {
        let fine = MollifyRule::new(self, 64, 23)?;
        let coarse = MollifyRule::new(self, 40, 17)?;
        mollify_checked(&fine, &coarse, f, point, 1e-9)
    }
}

/// Weighted nodes `(y, w)` with `Σ w g(y) ≈ ∫ g ρ`.
#[derive(Debug, Clone)]
pub struct MollifyRule {
    nodes: Vec<(Vector3<f64>, f64)>,
}

impl MollifyRule {
    /// `radial` Gauss nodes on `[0, R]` times a sphere rule of exactness `degree`.
    pub fn new(profile: &ChargeProfile, radial: usize, degree: usize) -> Result<Self> {
        let rr = GaussRule::new(radial)?;
        let sphere = BandRule::with_exactness(degree)?.sphere_nodes(&Vector3::z());
        let mut nodes = Vec::with_capacity(rr.len() * sphere.len());
        for (r, wr) in rr.mapped(0.0, profile.radius()) {
            let radial_w = wr * r * r * profile.density_radial(r);
            if radial_w == 0.0 {
                continue;
            }
            for (omega, w) in &sphere {
                nodes.push((omega * r, radial_w * w));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[(Vector3<f64>, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// `Σ w f(point − y)`.
    pub fn apply<T, F>(&self, f: F, point: &Vector3<f64>) -> T
    where
        T: Quantity,
        F: Fn(&Vector3<f64>) -> T + Sync,
    {
        self.apply_with_scale(f, point).0
    }

    /// Value together with `Σ w |f|`.
    fn apply_with_scale<T, F>(&self, f: F, point: &Vector3<f64>) -> (T, f64)
    where
        T: Quantity,
        F: Fn(&Vector3<f64>) -> T + Sync,
    {
        let vals = crate::exec::map_slice(&self.nodes, |(y, w)| {
            let v = f(&(point - y));
            (v * *w, v.magnitude() * w.abs())
        });
        vals.into_iter()
            .fold((T::zero(), 0.0), |(a, s), (v, m)| (a + v, s + m))
    }
}

/// Mollifies with `fine`, reporting an accuracy error when `coarse`
/// disagrees by more than `rel_tol` of the absolute integral.
pub fn mollify_checked<T, F>(
    fine: &MollifyRule,
    coarse: &MollifyRule,
    f: F,
    point: &Vector3<f64>,
    rel_tol: f64,
) -> Result<T>
where
    T: Quantity,
    F: Fn(&Vector3<f64>) -> T + Sync,
{
    let (value, scale) = fine.apply_with_scale(&f, point);
    let (rough, _) = coarse.apply_with_scale(&f, point);
    let estimate = (value + rough * -1.0).magnitude();
    let tolerance = rel_tol * scale.max(f64::MIN_POSITIVE);
    if estimate > tolerance {
        return Err(Error::Accuracy { estimate, tolerance });
    }
    Ok(value)
}
