//! Pseudo-spectral reference solver for the coupled particle–field system.
//!
//! The field is stored spectrally as `(E − E_C(q), B)` where `E_C(q)` is the
//! lattice Coulomb field of the charge at `q`. The longitudinal part of `E` is
//! therefore slaved to the particle position and Gauss's law holds on the
//! lattice whenever it holds for the data. The uniform (`k = 0`) current is
//! dropped, as for a neutralizing background.
//!
//! One step is the symmetric splitting
//! `particle(Δt/2) ∘ field(Δt) ∘ particle(Δt/2)`: the particle half-step is
//! drift–kick–drift in frozen fields with a relativistic Boris kick, and the
//! field step rotates each mode exactly with the current frozen.

pub mod spectral;

use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::profile::{ChargeProfile, PhysicalConstants};
use crate::propagator::{mode_direction, rotate_mode, CVec3, Complex64, FieldGrid, ModeClass};
use crate::scenario::PulseTrain;
use crate::soliton::V_MAX;
use crate::trajectory::{momentum_maps, ParticleState, TrajectoryRecord, TrajectoryRow};

pub use spectral::SpectralProfile;

/// Lattice initial data: the transverse part of `radiation` plus the
/// soliton `e(E_v, B_v)(· − q)`.
pub fn soliton_with_radiation(
    spectral: &SpectralProfile,
    charge: f64,
    q: &Vector3<f64>,
    v: &Vector3<f64>,
    radiation: &PulseTrain,
) -> Result<FieldGrid> {
    let g = spectral.geometry().clone();
    let sol = spectral.soliton_grid(charge, q, v)?;
    if radiation.pulses.is_empty() {
        return Ok(sol);
    }
    let mut rad = FieldGrid::from_fn(g.clone(), |x| (radiation.field(x), Vector3::zeros()));
    rad.project_transverse();
    Ok(FieldGrid::from_spectral_fn(g, |i, _| {
        let (e, b) = rad.mode(i);
        let (se, sb) = sol.mode(i);
        ([e[0] + se[0], e[1] + se[1], e[2] + se[2]], [b[0] + sb[0], b[1] + sb[1], b[2] + sb[2]])
    }))
}

/// Energy `m√(1+p²) + ½∫(E² + B²)` and momentum `m p + ∫E × B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedQuantities {
    pub energy: f64,
    pub momentum: Vector3<f64>,
}

impl ConservedQuantities {
    /// Particle terms plus the field integrals of `fields`.
    pub fn of(constants: &PhysicalConstants, p: &Vector3<f64>, fields: &FieldGrid) -> Self {
        let m = constants.mass();
        Self {
            energy: m * (1.0 + p.norm_squared()).sqrt() + fields.field_energy(),
            momentum: p * m + fields.field_momentum(),
        }
    }
}

/// `(L − 2a)/2`: data supported in a ball of radius `a` about the origin
/// neither meet their periodic images nor radiate back onto the particle
/// before this time.
pub fn no_contamination_horizon(length: f64, extent: f64) -> f64 {
    0.5 * (length - 2.0 * extent)
}

/// Particle plus stored field.
#[derive(Debug, Clone)]
pub struct CoupledState {
    stored: FieldGrid,
    particle: ParticleState,
    constants: PhysicalConstants,
    spectral: SpectralProfile,
    horizon: Option<f64>,
    rotations: Option<(f64, Arc<Vec<Rotation>>)>,
}

/// Cached `(k̂, |k|, cos |k|h, sin |k|h)` for active modes.
type Rotation = Option<(Vector3<f64>, f64, f64, f64)>;

impl CoupledState {
    /// `fields` holds the full `(E, B)` at time `t = fields.time()`.
    pub fn new(
        fields: &FieldGrid,
        q: Vector3<f64>,
        p: Vector3<f64>,
        constants: PhysicalConstants,
        profile: &ChargeProfile,
    ) -> Result<Self> {
        let spectral = SpectralProfile::new(fields.geometry().clone(), profile);
        Self::with_spectral_profile(fields, q, p, constants, spectral)
    }

    pub fn with_spectral_profile(
        fields: &FieldGrid,
        q: Vector3<f64>,
        p: Vector3<f64>,
        constants: PhysicalConstants,
        spectral: SpectralProfile,
    ) -> Result<Self> {
        if spectral.geometry() != fields.geometry() {
            return Err(invalid("profile table and field grid use different lattices"));
        }
        let speed = crate::trajectory::velocity(&p).norm();
        if speed > V_MAX {
            return Err(Error::Stability { speed, cap: V_MAX });
        }
        let mut stored = fields.spectral();
        let charge = constants.charge();
        if charge != 0.0 {
            let phases = spectral.axis_phases(&q);
            stored.update_modes(|i, e, _| {
                let c = spectral.coulomb_mode(i, charge, &phases);
                for j in 0..3 {
                    e[j] -= c[j];
                }
            });
        }
        let mut state = Self {
            particle: ParticleState::new(fields.time(), q, p, &Vector3::zeros()),
            stored,
            constants,
            spectral,
            horizon: None,
            rotations: None,
        };
        state.refresh_acceleration();
        Ok(state)
    }

    /// Refuses steps beyond `t_max`.
    pub fn with_horizon(mut self, t_max: f64) -> Self {
        self.horizon = Some(t_max);
        self
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn time(&self) -> f64 {
        self.particle.t
    }

    pub fn particle(&self) -> &ParticleState {
        &self.particle
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn spectral_profile(&self) -> &SpectralProfile {
        &self.spectral
    }

    /// `(E − E_C(q), B)`.
    pub fn stored_fields(&self) -> &FieldGrid {
        &self.stored
    }

    /// Full `(E, B)` in the spectral representation.
    pub fn fields(&self) -> FieldGrid {
        let charge = self.constants.charge();
        let mut out = self.stored.clone();
        if charge == 0.0 {
            return out;
        }
        let phases = self.spectral.axis_phases(&self.particle.q);
        out.update_modes(|i, e, _| {
            let c = self.spectral.coulomb_mode(i, charge, &phases);
            for j in 0..3 {
                e[j] += c[j];
            }
        });
        out
    }

    /// `(E^ρ, B^ρ)(x)` of the stored field. The lattice Coulomb field exerts
    /// no force on its own charge, so this is also the total mollified field
    /// felt at `x = q`.
    pub fn mollified_fields(&self, x: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        self.spectral.mollified_at(&self.stored, x)
    }

    pub fn conserved_quantities(&self) -> ConservedQuantities {
        ConservedQuantities::of(&self.constants, &self.particle.p, &self.fields())
    }

    /// `‖div E − eρ(· − q)‖₂` with the lattice density, over active modes.
    pub fn gauss_residual(&self) -> f64 {
        let full = self.fields();
        let g = full.geometry();
        let phases = self.spectral.axis_phases(&self.particle.q);
        let charge = self.constants.charge();
        let i = Complex64::new(0.0, 1.0);
        let sum = exec::sum_indices(g.points(), 0.0, |idx| {
            if g.mode_class(idx) != ModeClass::Active {
                return 0.0;
            }
            let k = g.wavevector(idx);
            let (e, _) = full.mode(idx);
            let div = i * (k[0] * e[0] + k[1] * e[1] + k[2] * e[2]);
            (div - self.spectral.density_mode_with(idx, charge, &phases)).norm_sqr()
        });
        (sum * g.volume()).sqrt()
    }

    fn refresh_acceleration(&mut self) {
        let (e, b) = self.mollified_fields(&self.particle.q);
        let c = self.constants;
        let pdot = (e + self.particle.qdot.cross(&b)) * (c.charge() / c.mass());
        self.particle.qddot = momentum_maps(&self.particle.p).f_prime * pdot;
    }

    /// Drift `h/4`, Boris kick `h/2`, drift `h/4`.
    fn particle_half_step(&mut self, h: f64) {
        let c = self.constants;
        let mut q = self.particle.q;
        let mut p = self.particle.p;
        q += crate::trajectory::velocity(&p) * (0.25 * h);
        if c.charge() != 0.0 {
            let (e, b) = self.mollified_fields(&q);
            p = boris_kick(&p, &e, &b, c.charge() / c.mass(), 0.5 * h);
        }
        q += crate::trajectory::velocity(&p) * (0.25 * h);
        self.particle.q = q;
        self.particle.p = p;
        self.particle.qdot = crate::trajectory::velocity(&p);
    }

    /// Exact field evolution over `h` with the current of the particle as it
    /// stands, frozen.
    fn field_step(&mut self, h: f64) {
        let g = self.stored.geometry().clone();
        let table = match &self.rotations {
            Some((dt, t)) if *dt == h => t.clone(),
            _ => {
                let t: Arc<Vec<Rotation>> = Arc::new(exec::map_indices(g.points(), |i| {
                    mode_direction(&g, i).map(|(khat, kappa)| {
                        let (s, c) = (kappa * h).sin_cos();
                        (khat, kappa, c, s)
                    })
                }));
                self.rotations = Some((h, t.clone()));
                t
            }
        };
        let charge = self.constants.charge();
        let v = self.particle.qdot;
        let phases = self.spectral.axis_phases(&self.particle.q);
        let sp = &self.spectral;
        self.stored.update_modes(|i, e, b| {
            if let Some((khat, kappa, c, s)) = table[i] {
                if charge == 0.0 {
                    rotate_mode(e, b, &khat, kappa, (c, s), None);
                } else {
                    let d = sp.density_mode_with(i, charge, &phases);
                    let j: CVec3 = [d * v[0], d * v[1], d * v[2]];
                    rotate_mode(e, b, &khat, kappa, (c, s), Some(&j));
                }
            }
        });
    }
}

/// Relativistic Boris update of `p` (momentum per unit mass) over `tau` for
/// `ṗ = κ(E + F(p) × B)`.
pub fn boris_kick(p: &Vector3<f64>, e: &Vector3<f64>, b: &Vector3<f64>, kappa: f64, tau: f64) -> Vector3<f64> {
    let half = e * (0.5 * kappa * tau);
    let minus = p + half;
    let gamma = (1.0 + minus.norm_squared()).sqrt();
    let t = b * (0.5 * kappa * tau / gamma);
    let s = t * (2.0 / (1.0 + t.norm_squared()));
    let prime = minus + minus.cross(&t);
    let plus = minus + prime.cross(&s);
    plus + half
}

/// Advances the coupled state by one splitting step.
pub fn step_coupled(state: &mut CoupledState, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(invalid("grid.dt must be positive"));
    }
    let t_next = state.time() + dt;
    if let Some(h) = state.horizon {
        if t_next > h * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::HorizonExceeded {
                requested: t_next,
                horizon: h,
            });
        }
    }
    state.particle_half_step(dt);
    state.field_step(dt);
    state.particle_half_step(dt);
    let speed = state.particle.qdot.norm();
    if speed >= V_MAX {
        return Err(Error::Stability { speed, cap: V_MAX });
    }
    state.particle.t = t_next;
    state.stored.set_time(t_next);
    state.refresh_acceleration();
    Ok(())
}

/// Grid run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Times at which full field snapshots are kept (rounded to steps).
    pub snapshot_times: Vec<f64>,
    /// Conserved quantities are recorded every this many steps.
    pub sample_every: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_final: 10.0,
            snapshot_times: Vec::new(),
            sample_every: 1,
        }
    }
}

/// Conserved quantities and Gauss residual at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationSample {
    pub t: f64,
    pub quantities: ConservedQuantities,
    pub gauss_residual: f64,
    pub field_norm: f64,
}

/// Everything a grid run produces.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub record: TrajectoryRecord,
    pub conservation: Vec<ConservationSample>,
    /// Full spectral fields at the requested snapshot times.
    pub snapshots: Vec<FieldGrid>,
    pub final_state: CoupledState,
}

impl GridRun {
    /// Largest relative energy and momentum drift against the first sample.
    pub fn relative_drifts(&self) -> (f64, f64) {
        let Some(first) = self.conservation.first() else {
            return (0.0, 0.0);
        };
        let (e0, p0) = (first.quantities.energy, first.quantities.momentum);
        let pn = p0.norm().max(f64::MIN_POSITIVE);
        self.conservation.iter().fold((0.0, 0.0), |(de, dp), s| {
            (
                f64::max(de, (s.quantities.energy - e0).abs() / e0.abs()),
                f64::max(dp, (s.quantities.momentum - p0).norm() / pn),
            )
        })
    }

    /// Largest increase of the Gauss residual over the run.
    pub fn gauss_growth(&self) -> f64 {
        let Some(first) = self.conservation.first() else {
            return 0.0;
        };
        self.conservation.iter().map(|s| s.gauss_residual - first.gauss_residual).fold(0.0, f64::max)
    }
}

fn record_row(state: &CoupledState) -> TrajectoryRow {
    let (e, b) = state.mollified_fields(&state.particle.q);
    let charge = state.constants.charge();
    TrajectoryRow {
        state: state.particle,
        alpha: e * charge,
        beta: b * charge,
        memory: Vector3::zeros(),
        contraction: 0.0,
    }
}

fn conservation_sample(state: &CoupledState) -> ConservationSample {
    let full = state.fields();
    ConservationSample {
        t: state.time(),
        quantities: ConservedQuantities::of(&state.constants, &state.particle.p, &full),
        gauss_residual: state.gauss_residual(),
        field_norm: full.l2_norm(),
    }
}

/// Marches `state` to `config.t_final`.
pub fn run_simulation(mut state: CoupledState, config: &GridConfig) -> Result<GridRun> {
    if !(config.dt > 0.0) || !(config.t_final >= 0.0) || config.sample_every == 0 {
        return Err(invalid("grid.dt and sample interval must be positive, t_final nonnegative"));
    }
    let steps = (config.t_final / config.dt).round() as usize;
    if let Some(h) = state.horizon {
        let end = state.time() + steps as f64 * config.dt;
        if end > h * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::HorizonExceeded { requested: end, horizon: h });
        }
    }
    let t0 = state.time();
    let snapshot_steps: Vec<usize> = config
        .snapshot_times
        .iter()
        .map(|&t| {
            if t < t0 - 1e-12 || t > t0 + steps as f64 * config.dt + 1e-9 {
                Err(invalid(format!("snapshot time {t} lies outside the run")))
            } else {
                Ok(((t - t0) / config.dt).round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let mut record = TrajectoryRecord::new(config.dt);
    let mut conservation = Vec::new();
    let mut snapshots = Vec::new();
    for n in 0..=steps {
        if n > 0 {
            step_coupled(&mut state, config.dt)?;
            state.particle.t = t0 + n as f64 * config.dt;
        }
        record.rows.push(record_row(&state));
        if n % config.sample_every == 0 || n == steps {
            conservation.push(conservation_sample(&state));
        }
        for _ in snapshot_steps.iter().filter(|&&s| s == n) {
            snapshots.push(state.fields());
        }
    }
    Ok(GridRun {
        record,
        conservation,
        snapshots,
        final_state: state,
    })
}

/// Parameters of the model after the scaling `x → x/λ`, `t → t/λ` that maps
/// solutions to solutions: profile radius `R/λ` with charge `e λ^{-1/2}` (the
/// product `eρ` scales as `λ^{5/2}`), fields `λ^{3/2} E(λ·)`, positions `q/λ`,
/// momenta unchanged.
#[derive(Debug, Clone)]
pub struct ScaledSetup {
    pub fields: FieldGrid,
    pub q: Vector3<f64>,
    pub p: Vector3<f64>,
    pub constants: PhysicalConstants,
    pub profile: ChargeProfile,
    pub dt: f64,
}

pub fn scaled_setup(
    fields: &FieldGrid,
    q: &Vector3<f64>,
    p: &Vector3<f64>,
    constants: &PhysicalConstants,
    profile: &ChargeProfile,
    dt: f64,
    lambda: f64,
) -> Result<ScaledSetup> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("scaling factor must be positive"));
    }
    let g = fields.geometry();
    let geometry = crate::propagator::GridGeometry::new(g.length() / lambda, g.resolution())?;
    let src = fields.spectral();
    // Spectral coefficients of λ^{3/2} f(λx) on the box L/λ equal λ^{3/2} times the originals.
    let s = lambda.powf(1.5);
    let mut out = FieldGrid::from_spectral_fn(geometry, |i, _| {
        let (e, b) = src.mode(i);
        (e.map(|c| c * s), b.map(|c| c * s))
    });
    out.set_time(fields.time() / lambda);
    Ok(ScaledSetup {
        fields: out,
        q: q / lambda,
        p: *p,
        constants: PhysicalConstants::new(constants.charge() / lambda.sqrt(), constants.mass())?,
        profile: ChargeProfile::new(profile.shape(), profile.radius() / lambda)?,
        dt: dt / lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileShape;
    use crate::propagator::{GridGeometry, Representation};

    fn profile() -> ChargeProfile {
        ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap()
    }

    #[test]
    fn boris_kick_conserves_speed_in_pure_magnetic_field() {
        let p = Vector3::new(0.4, -0.2, 0.7);
        let out = boris_kick(&p, &Vector3::zeros(), &Vector3::new(0.3, 1.0, -0.5), 2.0, 0.3);
        assert!((out.norm() - p.norm()).abs() < 1e-15);
        let e = Vector3::new(0.1, 0.2, 0.3);
        assert!((boris_kick(&p, &e, &Vector3::zeros(), 1.5, 0.2) - (p + e * 0.3)).norm() < 1e-15);
    }

    #[test]
    fn conserved_quantities_of_a_bare_particle() {
        let g = GridGeometry::new(8.0, 8).unwrap();
        let zero = FieldGrid::zeros(g, Representation::Spectral);
        let c = PhysicalConstants::new(1.0, 2.0).unwrap();
        let rest = ConservedQuantities::of(&c, &Vector3::zeros(), &zero);
        assert_eq!(rest.energy, 2.0);
        assert_eq!(rest.momentum, Vector3::zeros());
        let p = crate::trajectory::momentum_from_velocity(&Vector3::new(0.6, 0.0, 0.0)).unwrap();
        let moving = ConservedQuantities::of(&c, &p, &zero);
        assert!((moving.energy - 2.0 * 1.25).abs() < 1e-15);
    }

    #[test]
    fn stored_field_round_trips_to_full_field() {
        let g = GridGeometry::new(10.0, 16).unwrap();
        let c = PhysicalConstants::new(0.8, 1.0).unwrap();
        let sp = SpectralProfile::new(g.clone(), &profile());
        let q = Vector3::new(0.5, 0.0, -0.3);
        let sol = sp.soliton_grid(0.8, &q, &Vector3::new(0.2, 0.0, 0.0)).unwrap();
        let state = CoupledState::with_spectral_profile(&sol, q, Vector3::zeros(), c, sp).unwrap();
        let back = state.fields();
        for i in 0..g.points() {
            let (a, b) = back.mode(i);
            let (x, y) = sol.mode(i);
            for j in 0..3 {
                assert!((a[j] - x[j]).norm() < 1e-15 && (b[j] - y[j]).norm() < 1e-15);
            }
        }
        assert!(state.gauss_residual() < 1e-14);
    }

    #[test]
    fn horizon_is_enforced() {
        let g = GridGeometry::new(8.0, 8).unwrap();
        let zero = FieldGrid::zeros(g, Representation::Spectral);
        let c = PhysicalConstants::new(0.0, 1.0).unwrap();
        let mut s = CoupledState::new(&zero, Vector3::zeros(), Vector3::zeros(), c, &profile()).unwrap().with_horizon(0.15);
        step_coupled(&mut s, 0.1).unwrap();
        assert!(matches!(step_coupled(&mut s, 0.1), Err(Error::HorizonExceeded { .. })));
        assert_eq!(no_contamination_horizon(32.0, 6.0), 10.0);
    }
}
