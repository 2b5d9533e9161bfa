//! Comoving soliton fields `E_v = -∇φ_v + v(v·∇φ_v)`, `B_v = -v × ∇φ_v` with
//! `φ_v = ρ * G_v` and the anisotropic kernel
//! `G_v(x) = 1 / (4π √((1-v²)|x|² + (v·x)²))`.
//!
//! The direct route integrates in spherical coordinates centred on the kernel
//! singularity, `y = sω`, where `G_v(sω) = g_v(ω)/s` and the Jacobian `s²`
//! leaves a bounded integrand. Every `x`-derivative is moved onto ρ, every
//! `v`-derivative onto `g_v`.

pub mod plane_wave;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::fit::{loglog_slope, sphere_directions};
use crate::profile::{ChargeProfile, MollifyRule, VectorPair};
use crate::quadrature::{BandRule, GaussRule};

pub use plane_wave::{PlaneWave, PropagatedSource, SourceJet};

/// Largest admissible soliton speed.
pub const V_MAX: f64 = 0.99;

/// Angular refinement factor for speed `|v|`: the angular integrands have
/// complex singularities at distance `acosh(1/|v|)` from the real sphere.
pub fn anisotropy_factor(speed: f64) -> f64 {
    if speed < 1e-3 {
        return 1.0;
    }
    (0.467 / (1.0 / speed).acosh()).clamp(1.0, 4.0)
}

pub(crate) fn check_speed(v: &Vector3<f64>) -> Result<()> {
    let s = v.norm();
    if !(s <= V_MAX) {
        return Err(invalid(format!("|v| = {s} exceeds v_max = {V_MAX}")));
    }
    Ok(())
}

/// Value and closed-form gradients of the anisotropic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub space_gradient: Vector3<f64>,
    pub velocity_gradient: Vector3<f64>,
}

/// `G_v(x)` with its `x`- and `v`-gradients.
pub fn anisotropic_kernel(v: &Vector3<f64>, x: &Vector3<f64>) -> Result<KernelValue> {
    check_speed(v)?;
    if x.norm_squared() == 0.0 {
        return Err(Error::Singularity);
    }
    let vx = v.dot(x);
    let x2 = x.norm_squared();
    let q = (1.0 - v.norm_squared()) * x2 + vx * vx;
    let value = 1.0 / (4.0 * PI * q.sqrt());
    let dq_dx = x * (2.0 * (1.0 - v.norm_squared())) + v * (2.0 * vx);
    let dq_dv = v * (-2.0 * x2) + x * (2.0 * vx);
    let f = -0.5 * value / q;
    Ok(KernelValue {
        value,
        space_gradient: dq_dx * f,
        velocity_gradient: dq_dv * f,
    })
}

/// How many derivatives [`SolitonField::fields`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FieldOrder {
    Values,
    /// Values and `∇_x`.
    SpaceGradient,
    /// Values, `∇_x` and `∇_v`.
    VelocityGradient,
}

/// Soliton fields at one point. Matrices are Jacobians: `m[(i, j)] = ∂_j F_i`
/// with `∂_j` a derivative in `x_j` (`grad_*`) or `v_j` (`dv_*`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldPack {
    pub e: Vector3<f64>,
    pub b: Vector3<f64>,
    pub grad_e: Option<Matrix3<f64>>,
    pub grad_b: Option<Matrix3<f64>>,
    pub dv_e: Option<Matrix3<f64>>,
    pub dv_b: Option<Matrix3<f64>>,
}

impl FieldPack {
    pub fn pair(&self) -> VectorPair {
        VectorPair::new(self.e, self.b)
    }

    /// Builds `E`, `B` and their derivatives from derivatives of `φ`.
    /// `hess[(i,j)] = ∂_i∂_jφ`, `dv_grad[(i,j)] = ∂_{v_j}∂_iφ`.
    pub fn from_potential(
        v: &Vector3<f64>,
        grad: &Vector3<f64>,
        hess: Option<&Matrix3<f64>>,
        dv_grad: Option<&Matrix3<f64>>,
    ) -> Self {
        let vg = v.dot(grad);
        let e = -grad + v * vg;
        let b = -v.cross(grad);
        let mut pack = Self {
            e,
            b,
            ..Self::default()
        };
        if let Some(h) = hess {
            pack.grad_e = Some(-h + v * (v.transpose() * h));
            pack.grad_b = Some(-skew(v) * h);
        }
        if let Some(g) = dv_grad {
            let dv_e = -g
                + Matrix3::identity() * vg
                + v * (grad.transpose() + v.transpose() * g);
            pack.dv_e = Some(dv_e);
            pack.dv_b = Some(skew(grad) - skew(v) * g);
        }
        pack
    }
}

/// `skew(a) y = a × y`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Curl from a Jacobian `m[(i,j)] = ∂_j F_i`.
pub fn curl_of(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Node counts of the direct quadrature at `|v| = 0`; scaled up with speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonQuadrature {
    pub chord: usize,
    pub polar: usize,
    pub azimuth: usize,
}

impl Default for SolitonQuadrature {
    fn default() -> Self {
        Self {
            chord: 72,
            polar: 48,
            azimuth: 64,
        }
    }
}

impl SolitonQuadrature {
    fn coarse(&self) -> Self {
        Self {
            chord: self.chord * 2 / 3,
            polar: self.polar * 2 / 3,
            azimuth: self.azimuth * 2 / 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    phi: f64,
    grad: Vector3<f64>,
    hess: Matrix3<f64>,
    dv_grad: Matrix3<f64>,
}

impl std::ops::Add for Sums {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            phi: self.phi + o.phi,
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
            dv_grad: self.dv_grad + o.dv_grad,
        }
    }
}

/// Equation residuals of a soliton at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonResidual {
    pub force_balance: Vector3<f64>,
    pub faraday: Vector3<f64>,
    pub ampere: Vector3<f64>,
}

/// Quantity scanned by [`SolitonField::decay_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayQuantity {
    Field,
    SpaceGradient,
    VelocityGradient,
}

/// Sup over sampled directions at each radius, and the log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayScan {
    pub radii: Vec<f64>,
    pub sup: Vec<f64>,
    pub slope: f64,
}

/// The soliton of velocity `v` for a given profile.
#[derive(Debug, Clone)]
pub struct SolitonField {
    velocity: Vector3<f64>,
    profile: Arc<ChargeProfile>,
    quadrature: SolitonQuadrature,
}

impl SolitonField {
    pub fn new(profile: Arc<ChargeProfile>, velocity: Vector3<f64>) -> Result<Self> {
        check_speed(&velocity)?;
        Ok(Self {
            velocity,
            profile,
            quadrature: SolitonQuadrature::default(),
        })
    }

    pub fn with_quadrature(mut self, quadrature: SolitonQuadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.velocity
    }

    pub fn profile(&self) -> &Arc<ChargeProfile> {
        &self.profile
    }

    fn sums(&self, q: &SolitonQuadrature, x: &Vector3<f64>, order: Option<FieldOrder>) -> Result<Sums> {
        let v = self.velocity;
        let big_r = self.profile.radius();
        let f = anisotropy_factor(v.norm());
        let polar = ((q.polar as f64) * f).ceil() as usize;
        let azimuth = ((q.azimuth as f64) * f).ceil() as usize;
        let band = BandRule::new(polar, azimuth)?;
        let chord = GaussRule::new(q.chord)?;
        let r = x.norm();
        let axis = if r > 0.0 { x / r } else { Vector3::z() };
        let c_min = if r > big_r { (1.0 - (big_r / r).powi(2)).sqrt() } else { -1.0 };
        let want_hess = order.is_some_and(|o| o >= FieldOrder::SpaceGradient);
        let want_dv = order == Some(FieldOrder::VelocityGradient);
        let profile = &self.profile;
        let v2 = v.norm_squared();

        // Parallel over polar rows; each row sums its azimuthal nodes.
        let polar_nodes: Vec<(f64, f64)> = band.polar().mapped(c_min, 1.0).collect();
        let (e1, e2) = crate::quadrature::orthonormal_frame(&axis);
        let w_psi = 2.0 * PI / azimuth as f64;
        let rows = crate::exec::map_slice(&polar_nodes, |&(c, wc)| {
            let sn = (1.0 - c * c).max(0.0).sqrt();
            let mut acc = Sums::default();
            for &(cp, sp) in band.azimuth() {
                let omega = axis * c + (e1 * cp + e2 * sp) * sn;
                let ox = omega.dot(x);
                let disc = big_r * big_r - r * r + ox * ox;
                if disc <= 0.0 {
                    continue;
                }
                let root = disc.sqrt();
                let s_lo = (ox - root).max(0.0);
                let s_hi = ox + root;
                if s_hi <= s_lo {
                    continue;
                }
                let mut i0 = 0.0;
                let mut i1 = Vector3::zeros();
                let mut i2 = Matrix3::zeros();
                for (s, ws) in chord.mapped(s_lo, s_hi) {
                    let z = x - omega * s;
                    let w = ws * s;
                    if want_hess {
                        let (rho, g, h) = profile.eval_density_hessian(&z);
                        i0 += w * rho;
                        i1 += g * w;
                        i2 += h * w;
                    } else {
                        let (rho, g) = profile.eval_density(&z);
                        i0 += w * rho;
                        i1 += g * w;
                    }
                }
                let vw = v.dot(&omega);
                let qd = 1.0 - v2 + vw * vw;
                let gval = 1.0 / (4.0 * PI * qd.sqrt());
                let wt = wc * w_psi;
                acc.phi += wt * gval * i0;
                acc.grad += i1 * (wt * gval);
                if want_hess {
                    acc.hess += i2 * (wt * gval);
                }
                if want_dv {
                    let dg = (v - omega * vw) * (gval / qd);
                    acc.dv_grad += i1 * dg.transpose() * wt;
                }
            }
            acc
        });
        Ok(rows.into_iter().fold(Sums::default(), |a, b| a + b))
    }

    /// `φ_v(x)`, checked against a coarser rule.
    pub fn potential_phi(&self, x: &Vector3<f64>) -> Result<f64> {
        let fine = self.sums(&self.quadrature, x, None)?.phi;
        let rough = self.sums(&self.quadrature.coarse(), x, None)?.phi;
        let estimate = (fine - rough).abs();
        let tolerance = 1e-6 * fine.abs();
        if estimate > tolerance {
            return Err(Error::Accuracy { estimate, tolerance });
        }
        Ok(fine)
    }

    /// `E_v`, `B_v` and requested derivatives at `x`.
    pub fn fields(&self, x: &Vector3<f64>, order: FieldOrder) -> Result<FieldPack> {
        let s = self.sums(&self.quadrature, x, Some(order))?;
        let hess = (order >= FieldOrder::SpaceGradient).then_some(&s.hess);
        let dv = (order == FieldOrder::VelocityGradient).then_some(&s.dv_grad);
        Ok(FieldPack::from_potential(&self.velocity, &s.grad, hess, dv))
    }

    /// `E_v^ρ(0) + v × B_v^ρ(0)`, by mollifying the plane-wave fields.
    pub fn force_balance(&self) -> Result<Vector3<f64>> {
        let pw = PlaneWave::new(self.profile.as_ref().clone());
        let rule = MollifyRule::new(&self.profile, 24, 13)?;
        let v = self.velocity;
        let m: VectorPair = rule.apply(|y| pw.fields(&v, y, FieldOrder::Values).pair(), &Vector3::zeros());
        Ok(m.e + v.cross(&m.b))
    }

    /// Residuals of the traveling-wave equations at `x`.
    pub fn residual(&self, x: &Vector3<f64>, force_balance: Vector3<f64>) -> Result<SolitonResidual> {
        let p = self.fields(x, FieldOrder::SpaceGradient)?;
        let v = self.velocity;
        let ge = p.grad_e.expect("requested");
        let gb = p.grad_b.expect("requested");
        let rho = self.profile.eval_density(x).0;
        Ok(SolitonResidual {
            force_balance,
            faraday: -(gb * v) + curl_of(&ge),
            ampere: -(ge * v) - curl_of(&gb) + v * rho,
        })
    }

    /// Sup of the selected quantity over sampled directions at each radius,
    /// and the least-squares slope of log sup against log r.
    pub fn decay_scan(&self, radii: &[f64], which: DecayQuantity) -> Result<DecayScan> {
        if radii.len() < 3 {
            return Err(invalid("decay scan needs at least 3 radii"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("decay scan radii must be increasing"));
        }
        if radii[0] <= 2.0 * self.profile.radius() {
            return Err(invalid("decay scan radii must exceed 2R"));
        }
        let order = match which {
            DecayQuantity::Field => FieldOrder::Values,
            DecayQuantity::SpaceGradient => FieldOrder::SpaceGradient,
            DecayQuantity::VelocityGradient => FieldOrder::VelocityGradient,
        };
        let dirs = sphere_directions(32);
        let mut sup = Vec::with_capacity(radii.len());
        for &r in radii {
            let mut best: f64 = 0.0;
            for d in &dirs {
                let p = self.fields(&(d * r), order)?;
                let m = match which {
                    DecayQuantity::Field => (p.e.norm_squared() + p.b.norm_squared()).sqrt(),
                    DecayQuantity::SpaceGradient => {
                        let (a, b) = (p.grad_e.unwrap(), p.grad_b.unwrap());
                        (a.norm_squared() + b.norm_squared()).sqrt()
                    }
                    DecayQuantity::VelocityGradient => {
                        let (a, b) = (p.dv_e.unwrap(), p.dv_b.unwrap());
                        (a.norm_squared() + b.norm_squared()).sqrt()
                    }
                };
                best = best.max(m);
            }
            sup.push(best);
        }
        let slope = loglog_slope(radii, &sup)?;
        Ok(DecayScan {
            radii: radii.to_vec(),
            sup,
            slope,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileShape;
    use approx::assert_relative_eq;

    fn profile() -> Arc<ChargeProfile> {
        Arc::new(ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap())
    }

    #[test]
    fn kernel_closed_forms() {
        let k = anisotropic_kernel(&Vector3::zeros(), &Vector3::new(0.0, 3.0, 4.0)).unwrap();
        assert_relative_eq!(k.value, 1.0 / (20.0 * PI), max_relative = 1e-15);
        let k = anisotropic_kernel(&Vector3::new(0.5, 0.0, 0.0), &Vector3::x()).unwrap();
        assert_relative_eq!(k.value, 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert!(matches!(
            anisotropic_kernel(&Vector3::new(0.5, 0.0, 0.0), &Vector3::zeros()),
            Err(Error::Singularity)
        ));
    }

    #[test]
    fn kernel_gradients_match_finite_differences() {
        let v = Vector3::new(0.3, -0.4, 0.5);
        let x = Vector3::new(0.7, 0.2, -1.1);
        let k = anisotropic_kernel(&v, &x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = h;
            let fx = (anisotropic_kernel(&v, &(x + e)).unwrap().value
                - anisotropic_kernel(&v, &(x - e)).unwrap().value)
                / (2.0 * h);
            let fv = (anisotropic_kernel(&(v + e), &x).unwrap().value
                - anisotropic_kernel(&(v - e), &x).unwrap().value)
                / (2.0 * h);
            assert!((fx - k.space_gradient[i]).abs() < 1e-6 * k.space_gradient.norm());
            assert!((fv - k.velocity_gradient[i]).abs() < 1e-6 * k.velocity_gradient.norm());
        }
    }

    #[test]
    fn potential_at_rest() {
        let p = profile();
        let s = SolitonField::new(p.clone(), Vector3::zeros()).unwrap();
        let far = Vector3::new(6.0, 0.0, 8.0);
        assert_relative_eq!(s.potential_phi(&far).unwrap(), 1.0 / (40.0 * PI), max_relative = 1e-6);
        // φ_0(0) = ∫ ρ(y)/(4π|y|) dy = ∫₀^R r ρ(r) dr
        let rule = GaussRule::new(200).unwrap();
        let oracle = rule.integrate(0.0, 1.0, |r| r * p.density_radial(r));
        assert_relative_eq!(s.potential_phi(&Vector3::zeros()).unwrap(), oracle, max_relative = 1e-8);
    }

    #[test]
    fn field_at_rest_is_radial_coulomb() {
        let p = profile();
        let s = SolitonField::new(p.clone(), Vector3::zeros()).unwrap();
        for x in [Vector3::new(0.3, 0.1, -0.2), Vector3::new(0.0, 10.0, 0.0), Vector3::new(1.5, -0.7, 0.2)] {
            let f = s.fields(&x, FieldOrder::Values).unwrap();
            assert_eq!(f.b, Vector3::zeros());
            assert!(f.e.cross(&x).norm() < 1e-10 * f.e.norm() * x.norm());
            let oracle = p.coulomb_field(&x);
            assert!((f.e - oracle).norm() < 1e-8 * oracle.norm(), "{x:?}");
        }
        let f = s.fields(&Vector3::new(0.0, 0.0, 10.0), FieldOrder::Values).unwrap();
        assert_relative_eq!(f.e.norm(), 1.0 / (400.0 * PI), max_relative = 1e-4);
    }

    #[test]
    fn reflection_symmetry_of_potential() {
        let p = profile();
        let v = Vector3::new(0.2, 0.5, -0.3);
        let a = SolitonField::new(p.clone(), v).unwrap();
        let b = SolitonField::new(p, -v).unwrap();
        for x in [Vector3::new(0.4, -0.2, 0.1), Vector3::new(2.0, 1.0, -1.5)] {
            let (pa, pb) = (a.potential_phi(&x).unwrap(), b.potential_phi(&x).unwrap());
            assert!((pa - pb).abs() < 1e-10 * pa.abs());
        }
    }

    #[test]
    fn velocity_gradient_matches_finite_difference() {
        let p = profile();
        let v = Vector3::new(0.3, 0.0, 0.0);
        let x = Vector3::new(0.8, 0.9, -0.4);
        let s = SolitonField::new(p.clone(), v).unwrap();
        let f = s.fields(&x, FieldOrder::VelocityGradient).unwrap();
        let (dve, dvb) = (f.dv_e.unwrap(), f.dv_b.unwrap());
        let h = 1e-4;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let plus = SolitonField::new(p.clone(), v + e).unwrap().fields(&x, FieldOrder::Values).unwrap();
            let minus = SolitonField::new(p.clone(), v - e).unwrap().fields(&x, FieldOrder::Values).unwrap();
            let fd_e = (plus.e - minus.e) / (2.0 * h);
            let fd_b = (plus.b - minus.b) / (2.0 * h);
            assert!((fd_e - dve.column(j)).norm() < 1e-4 * dve.norm(), "E col {j}");
            assert!((fd_b - dvb.column(j)).norm() < 1e-4 * dvb.norm(), "B col {j}");
        }
    }

    #[test]
    fn magnetic_field_is_orthogonal_to_velocity_and_gauss_law_holds() {
        let p = profile();
        let v = Vector3::new(0.0, 0.6, 0.0);
        let s = SolitonField::new(p.clone(), v).unwrap();
        for x in [Vector3::new(0.3, 0.2, 0.1), Vector3::new(-0.5, 0.4, 0.6)] {
            let f = s.fields(&x, FieldOrder::SpaceGradient).unwrap();
            assert!(f.b.dot(&v).abs() < 1e-14);
            let div = f.grad_e.unwrap().trace();
            let rho = p.eval_density(&x).0;
            assert!((div - rho).abs() < 1e-5 * rho, "{div} vs {rho}");
        }
    }
}
