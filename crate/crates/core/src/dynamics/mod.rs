//! Reduced particle dynamics as a Volterra equation.
//!
//! With the modified fields `Ē = E − e E_{q̇}(·−q)`, `B̄ = B − e B_{q̇}(·−q)` the
//! force law becomes
//!
//! ```text
//! m ṗ(t) = α(t) + q̇(t) × β(t) + e² (A ṗ)(t)
//! α(t) = e [U_E(t)(Ē₀, B̄₀)]^ρ(q(t)),   β(t) = e [U_B(t)(Ē₀, B̄₀)]^ρ(q(t))
//! (A f)(t) = ∫₀ᵗ a(t,s) f(s) ds
//! a(t,s) w = −( [U_E(t−s) S^ρ_{F′(p(s))w}] + q̇(t) × [U_B(t−s) S^ρ_{F′(p(s))w}] )(q(t) − q(s))
//! ```
//!
//! where `S_u = (u·∂_v)(E_v, B_v)` at `v = q̇(s)` and `S^ρ` is its mollification.

pub mod kernel;
pub mod volterra;

use std::sync::Arc;

use nalgebra::Vector3;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec;
use crate::profile::{ChargeProfile, Quantity, VectorPair};
use crate::quadrature::GaussRule;
use crate::propagator::{FieldJet, FreeFieldData, KirchhoffRule};
use crate::soliton::{check_speed, FieldOrder, PlaneWave};

pub use kernel::{kernel_decay_scan, KernelDecay, KernelEvaluator, KernelSample};
pub use volterra::{apply_memory, solve_trajectory, VolterraConfig, VolterraRun};

/// `α(t)` and `β(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DrivingForces {
    pub alpha: Vector3<f64>,
    pub beta: Vector3<f64>,
}

/// Source of the driving forces along a trajectory.
pub trait DrivingField: Sync {
    fn forces(&self, t: f64, q: &Vector3<f64>) -> Result<DrivingForces>;
}

/// Driving forces of vanishing modified fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDriving;

impl DrivingField for NoDriving {
    fn forces(&self, _: f64, _: &Vector3<f64>) -> Result<DrivingForces> {
        Ok(DrivingForces::default())
    }
}

/// Position and velocity of a soliton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonPlacement {
    pub center: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// `(Ē₀, B̄₀)`: initial data minus the soliton attached to the particle.
#[derive(Debug, Clone)]
pub struct ModifiedFields<D> {
    radiation: D,
    charge: f64,
    data_soliton: Option<SolitonPlacement>,
    particle: SolitonPlacement,
    evaluator: Arc<PlaneWave<ChargeProfile>>,
}

/// Initial data `E₀ = e E_{v_d}(·−q_d) + radiation` (soliton part optional)
/// seen from a particle at `particle.center` moving with `particle.velocity`.
pub fn modified_initial_fields<D: FreeFieldData<Value = Vector3<f64>>>(
    radiation: D,
    data_soliton: Option<SolitonPlacement>,
    particle: SolitonPlacement,
    charge: f64,
    profile: &ChargeProfile,
) -> Result<ModifiedFields<D>> {
    check_speed(&particle.velocity)?;
    if let Some(s) = &data_soliton {
        check_speed(&s.velocity)?;
    }
    Ok(ModifiedFields {
        radiation,
        charge,
        data_soliton,
        particle,
        evaluator: Arc::new(PlaneWave::new(profile.clone())),
    })
}

impl<D> ModifiedFields<D> {
    /// Whether the soliton terms cancel identically.
    pub fn solitons_cancel(&self) -> bool {
        self.charge == 0.0 || self.data_soliton == Some(self.particle)
    }

    pub fn radiation(&self) -> &D {
        &self.radiation
    }

    fn soliton_jet(&self, s: &SolitonPlacement, y: &Vector3<f64>) -> FieldJet<Vector3<f64>> {
        let f = self.evaluator.fields(&s.velocity, &(y - s.center), FieldOrder::SpaceGradient);
        let ge = f.grad_e.expect("gradient requested");
        let gb = f.grad_b.expect("gradient requested");
        FieldJet {
            e: f.e,
            b: f.b,
            grad_e: [0, 1, 2].map(|j| ge.column(j).into_owned()),
            grad_b: [0, 1, 2].map(|j| gb.column(j).into_owned()),
        }
    }
}

impl<D: FreeFieldData<Value = Vector3<f64>>> FreeFieldData for ModifiedFields<D> {
    type Value = Vector3<f64>;

    fn jet(&self, y: &Vector3<f64>) -> FieldJet<Vector3<f64>> {
        let base = self.radiation.jet(y);
        if self.solitons_cancel() {
            return base;
        }
        let mut out = base + self.soliton_jet(&self.particle, y) * -self.charge;
        if let Some(s) = &self.data_soliton {
            out = out + self.soliton_jet(s, y) * self.charge;
        }
        out
    }

    fn support(&self) -> Option<(Vector3<f64>, f64)> {
        if self.solitons_cancel() {
            self.radiation.support()
        } else {
            None
        }
    }
}

/// `α, β` from the mollified Kirchhoff formula.
///
/// Averaging the spherical means over `x ∈ q + supp ρ` turns `U(t)` into radial
/// weights on spheres about `q`:
///
/// ```text
/// E^ρ(q,t) = ∫ 4πr² ( Q(r,t) M_r[E₀] + P(r,t) M_r[curl B₀] ) dr
/// B^ρ(q,t) = ∫ 4πr² ( Q(r,t) M_r[B₀] − P(r,t) M_r[curl E₀] ) dr
/// P = (G(r+t) − G(|r−t|)) / 2r,   Q = ∂_t P = ((r+t)ρ(r+t) − (t−r)ρ(|t−r|)) / 2r
/// ```
///
/// with `G(u) = ∫₀ᵘ sρ(s) ds`, supported on `|r − t| ≤ R`.
pub struct KirchhoffDriving<D> {
    data: D,
    charge: f64,
    profile: ChargeProfile,
    rule: KirchhoffRule,
    radial_fine: GaussRule,
    radial_coarse: GaussRule,
    tolerance: f64,
    absolute_tolerance: f64,
}

impl<D: FreeFieldData<Value = Vector3<f64>>> KirchhoffDriving<D> {
    /// Default rules: sphere exactness 47, 64 radial nodes per panel, checked
    /// against exactness 31 and 42 nodes at relative `1e-5`.
    pub fn new(data: D, charge: f64, profile: &ChargeProfile) -> Result<Self> {
        Self::with_rules(data, charge, profile, KirchhoffRule::new(), 64, 1e-5)
    }

    pub fn with_rules(
        data: D,
        charge: f64,
        profile: &ChargeProfile,
        rule: KirchhoffRule,
        radial_nodes: usize,
        tolerance: f64,
    ) -> Result<Self> {
        Ok(Self {
            data,
            charge,
            profile: profile.clone(),
            rule,
            radial_fine: GaussRule::new(radial_nodes)?,
            radial_coarse: GaussRule::new((2 * radial_nodes / 3).max(1))?,
            tolerance,
            absolute_tolerance: 1e-13,
        })
    }

    /// Error estimates below this absolute level are accepted regardless of
    /// the relative test (default `1e-13`; the pulse tails sit near `1e-16`).
    pub fn with_absolute_tolerance(mut self, tol: f64) -> Self {
        self.absolute_tolerance = tol;
        self
    }

    pub fn data(&self) -> &D {
        &self.data
    }

    /// `U(t)(Ē₀, B̄₀)` at `x`.
    pub fn free_field(&self, x: &Vector3<f64>, t: f64) -> Result<VectorPair> {
        let v = self.rule.evaluate(&self.data, x, t)?;
        Ok(VectorPair::new(v.e, v.b))
    }

    /// `(4πr²Q, 4πr²P)`.
    fn radial_weights(&self, r: f64, t: f64) -> (f64, f64) {
        let p = &self.profile;
        let q = 2.0 * PI * r * ((r + t) * p.density_radial(r + t) - (t - r) * p.density_radial((t - r).abs()));
        let g = 2.0 * PI * r * (p.radial_first_moment(r + t) - p.radial_first_moment((r - t).abs()));
        (q, g)
    }

    /// `(E^ρ, B^ρ, Σ|integrand|)` with one pair of rules.
    fn shell_sum(&self, fine: bool, q: &Vector3<f64>, t: f64) -> (VectorPair, f64) {
        let radial = if fine { &self.radial_fine } else { &self.radial_coarse };
        let r_max = self.profile.radius();
        let mut panels = vec![((t - r_max).max(0.0), t + r_max)];
        if t < r_max {
            // ρ(r + t) switches off at r = R − t.
            panels = vec![(0.0, r_max - t), (r_max - t, r_max + t)];
        }
        let nodes: Vec<(f64, f64)> = panels.iter().flat_map(|&(a, b)| radial.mapped(a, b)).collect();
        let parts = exec::map_slice(&nodes, |&(r, w)| {
            let (cq, cp) = self.radial_weights(r, t);
            match self.rule.data_means(fine, &self.data, q, r) {
                None => (VectorPair::default(), 0.0),
                Some(([e0, b0, ce, cb], mass)) => (
                    VectorPair::new((e0 * cq + cb * cp) * w, (b0 * cq - ce * cp) * w),
                    w * (cq.abs() + cp.abs()) * mass,
                ),
            }
        });
        parts.into_iter().fold((VectorPair::default(), 0.0), |(a, m), (v, w)| (a + v, m + w))
    }

    /// `(E^ρ, B^ρ)(q, t)` of the free evolution.
    pub fn mollified_free_field(&self, q: &Vector3<f64>, t: f64) -> Result<VectorPair> {
        if t < 0.0 {
            return Err(crate::error::invalid("driving fields need t ≥ 0"));
        }
        let (fine, mass) = self.shell_sum(true, q, t);
        let (coarse, _) = self.shell_sum(false, q, t);
        let estimate = (fine + coarse * -1.0).magnitude();
        let scale = mass.max(fine.magnitude());
        if estimate > self.tolerance * scale && estimate > self.absolute_tolerance {
            return Err(Error::Accuracy {
                estimate: estimate / scale,
                tolerance: self.tolerance,
            });
        }
        Ok(fine)
    }
}

impl<D: FreeFieldData<Value = Vector3<f64>>> DrivingField for KirchhoffDriving<D> {
    fn forces(&self, t: f64, q: &Vector3<f64>) -> Result<DrivingForces> {
        if self.charge == 0.0 {
            return Ok(DrivingForces::default());
        }
        let pair = self.mollified_free_field(q, t)?;
        Ok(DrivingForces {
            alpha: pair.e * self.charge,
            beta: pair.b * self.charge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileShape;
    use crate::scenario::Pulse;

    fn profile() -> ChargeProfile {
        ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap()
    }

    fn pulse() -> Pulse {
        Pulse::new(Vector3::new(3.0, 0.5, 0.0), 0.7, 0.5, Vector3::z()).unwrap()
    }

    #[test]
    fn pure_soliton_data_have_no_modified_field() {
        let particle = SolitonPlacement {
            center: Vector3::new(0.1, 0.0, 0.0),
            velocity: Vector3::new(0.3, 0.1, 0.0),
        };
        let empty = crate::scenario::PulseTrain::default();
        let m = modified_initial_fields(empty, Some(particle), particle, 0.3, &profile()).unwrap();
        for y in [Vector3::new(0.5, 0.2, -0.3), Vector3::new(4.0, 1.0, 2.0)] {
            let j = m.jet(&y);
            assert_eq!(j.e, Vector3::zeros());
            assert_eq!(j.b, Vector3::zeros());
        }
    }

    #[test]
    fn uncharged_particle_sees_raw_data() {
        let particle = SolitonPlacement {
            center: Vector3::zeros(),
            velocity: Vector3::new(0.4, 0.0, 0.0),
        };
        let other = SolitonPlacement {
            center: Vector3::zeros(),
            velocity: Vector3::zeros(),
        };
        let m = modified_initial_fields(pulse(), Some(other), particle, 0.0, &profile()).unwrap();
        let y = Vector3::new(2.7, 0.2, 0.1);
        assert_eq!(m.jet(&y).e, pulse().field(&y).0);
    }

    #[test]
    fn mismatched_soliton_leaves_velocity_difference() {
        let p = profile();
        let particle = SolitonPlacement {
            center: Vector3::zeros(),
            velocity: Vector3::new(0.2, 0.0, 0.0),
        };
        let data = SolitonPlacement {
            center: Vector3::zeros(),
            velocity: Vector3::zeros(),
        };
        let empty = crate::scenario::PulseTrain::default();
        let m = modified_initial_fields(empty, Some(data), particle, 1.0, &p).unwrap();
        let y = Vector3::new(3.0, 1.0, 0.0);
        let coulomb = p.coulomb_field(&y);
        let moving = crate::soliton::SolitonField::new(Arc::new(p), particle.velocity)
            .unwrap()
            .fields(&y, FieldOrder::Values)
            .unwrap();
        assert!((m.jet(&y).e - (coulomb - moving.e)).norm() < 1e-7 * coulomb.norm());
    }

    #[test]
    fn driving_force_at_zero_time_is_mollified_data() {
        let p = profile();
        let drive = KirchhoffDriving::new(pulse(), 0.3, &p).unwrap();
        let q = Vector3::new(1.5, 0.0, 0.2);
        let f = drive.forces(0.0, &q).unwrap();
        let direct: Vector3<f64> = p.mollify_at(|x| pulse().field(x).0, &q).unwrap() * 0.3;
        assert!((f.alpha - direct).norm() < 1e-8 * direct.norm().max(1e-12));
        assert_eq!(f.beta, Vector3::zeros());
    }

    #[test]
    fn zero_modified_fields_give_zero_forces() {
        let p = profile();
        let drive = KirchhoffDriving::new(crate::scenario::PulseTrain::default(), 0.3, &p).unwrap();
        let f = drive.forces(2.0, &Vector3::new(0.3, 0.0, 0.0)).unwrap();
        assert_eq!(f, DrivingForces::default());
        assert_eq!(NoDriving.forces(1.0, &Vector3::zeros()).unwrap(), DrivingForces::default());
    }

    #[test]
    fn driving_force_respects_huygens_window() {
        // Pulse support radius a about c, particle at rest at origin: the
        // mollified free field can be nonzero only for |c| − a − R < t < |c| + a + R.
        let p = profile();
        let pulse = Pulse::new(Vector3::new(9.0, 0.0, 0.0), 0.4, 1.0, Vector3::z()).unwrap();
        let a = pulse.radius_for(crate::scenario::PULSE_SUPPORT_TOL);
        let drive = KirchhoffDriving::new(pulse, 0.5, &p).unwrap();
        let q = Vector3::zeros();
        let (lo, hi) = (9.0 - a - 1.0, 9.0 + a + 1.0);
        for t in [0.5 * lo, 0.98 * lo, 1.02 * hi, 1.5 * hi] {
            assert_eq!(drive.forces(t, &q).unwrap(), DrivingForces::default(), "t={t}");
        }
        assert!(drive.forces(9.0, &q).unwrap().alpha.norm() > 0.0);
    }

    #[test]
    fn shell_route_matches_mollified_kirchhoff() {
        let p = profile();
        let pulse = Pulse::new(Vector3::new(2.0, 0.5, 0.0), 0.8, 1.0, Vector3::new(0.0, 0.3, 1.0)).unwrap();
        let drive = KirchhoffDriving::new(pulse.clone(), 1.0, &p).unwrap();
        let rule = KirchhoffRule::new();
        let q = Vector3::new(0.2, -0.1, 0.3);
        for t in [0.4, 2.0] {
            let shell = drive.mollified_free_field(&q, t).unwrap();
            let nested: VectorPair = p
                .mollify_at(
                    |x| {
                        let v = rule.evaluate(&pulse, x, t).unwrap();
                        VectorPair::new(v.e, v.b)
                    },
                    &q,
                )
                .unwrap();
            let err = (shell + nested * -1.0).magnitude();
            assert!(err < 1e-5 * nested.magnitude(), "t={t}: {err} vs {}", nested.magnitude());
        }
    }
}
