use abraham_core::diagnostics::{
    asymptotics_report, free_field_candidate, jacobian_check, modified_grid_data, scattering_residual, ParticlePath,
};
use abraham_core::grid::{run_simulation, CoupledState, GridConfig, SpectralProfile};
use abraham_core::propagator::{FieldGrid, GridGeometry};
use abraham_core::scenario::Pulse;
use abraham_core::trajectory::momentum_from_velocity;
use abraham_core::{ChargeProfile, PhysicalConstants, ProfileShape};
use nalgebra::Vector3;
use proptest::prelude::*;

fn bump() -> ChargeProfile {
    ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap()
}

/// `q(s) = q₀ + v s + a sin(ω s)`.
struct Wobble {
    q0: Vector3<f64>,
    v: Vector3<f64>,
    a: Vector3<f64>,
    omega: f64,
}

impl ParticlePath for Wobble {
    fn domain(&self) -> (f64, f64) {
        (0.0, 200.0)
    }
    fn position(&self, s: f64) -> Vector3<f64> {
        self.q0 + self.v * s + self.a * (self.omega * s).sin()
    }
    fn velocity(&self, s: f64) -> Vector3<f64> {
        self.v + self.a * (self.omega * (self.omega * s).cos())
    }
}

fn directions(n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let phi = 2.399_963_229_728_653 * i as f64;
            let r = (1.0 - z * z).sqrt();
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

#[test]
fn straight_line_jacobian_matches_closed_form() {
    let path = Wobble { q0: Vector3::new(0.5, -1.0, 2.0), v: Vector3::new(0.6, 0.3, -0.2), a: Vector3::zeros(), omega: 1.0 };
    let samples: Vec<_> = directions(12).into_iter().flat_map(|w| [(3.0, w), (40.0, w)]).collect();
    let r = jacobian_check(&path, &samples, 1e-4);
    assert_eq!(r.checked, samples.len());
    assert!(r.max_relative_error < 1e-6, "{}", r.max_relative_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wobbling_path_jacobian_matches_closed_form(
        v in prop::array::uniform3(-0.3f64..0.3),
        a in prop::array::uniform3(-0.2f64..0.2),
        omega in 0.2f64..1.5,
        s in 1.0f64..30.0,
    ) {
        let a = Vector3::from(a) / omega.max(1.0);
        let path = Wobble { q0: Vector3::zeros(), v: Vector3::from(v), a, omega };
        let samples: Vec<_> = directions(6).into_iter().map(|w| (s, w)).collect();
        let r = jacobian_check(&path, &samples, 1e-4);
        prop_assert_eq!(r.checked, samples.len());
        prop_assert!(r.max_relative_error < 1e-4, "{}", r.max_relative_error);
    }
}

fn pulse_grid(g: &GridGeometry, pulse: &Pulse) -> FieldGrid {
    let mut f = FieldGrid::from_fn(g.clone(), |x| (pulse.field(x).0, Vector3::zeros()));
    f.project_transverse();
    f
}

fn run(charge: f64, data: &FieldGrid, v0: Vector3<f64>, sp: &SpectralProfile, snapshots: Vec<f64>) -> abraham_core::grid::GridRun {
    let c = PhysicalConstants::new(charge, 1.0).unwrap();
    let s = CoupledState::with_spectral_profile(data, Vector3::zeros(), momentum_from_velocity(&v0).unwrap(), c, sp.clone()).unwrap();
    run_simulation(s, &GridConfig { dt: 0.1, t_final: 3.0, snapshot_times: snapshots, sample_every: 10 }).unwrap()
}

#[test]
fn uncharged_candidate_is_the_initial_field() {
    let g = GridGeometry::new(12.0, 16).unwrap();
    let sp = SpectralProfile::new(g.clone(), &bump());
    let data = pulse_grid(&g, &Pulse::new(Vector3::new(1.0, 0.0, 0.0), 1.0, 1.0, Vector3::z()).unwrap());
    let v0 = Vector3::new(0.2, 0.0, 0.1);
    let r = run(0.0, &data, v0, &sp, vec![1.5, 3.0]);
    let modified = modified_grid_data(&data, &sp, 0.0, &Vector3::zeros(), &v0).unwrap();
    let cand = free_field_candidate(&r.record, &modified, &sp, 0.0, 3.0).unwrap();
    assert_eq!(cand.e(), data.spectral().e());
    assert_eq!(cand.b(), data.spectral().b());
    for snap in &r.snapshots {
        let row = r.record.rows.iter().find(|row| (row.state.t - snap.time()).abs() < 1e-9).unwrap();
        let (re, rb) = scattering_residual(snap, &row.state.q, &row.state.qdot, &cand, &sp, 0.0).unwrap();
        let scale = data.field_energy().sqrt();
        assert!(re < 1e-10 * scale && rb < 1e-10 * scale, "{re} {rb}");
    }
}

#[test]
fn lone_soliton_leaves_no_free_field() {
    let g = GridGeometry::new(16.0, 32).unwrap();
    let sp = SpectralProfile::new(g.clone(), &bump());
    let charge = 0.3;
    let v0 = Vector3::new(0.4, 0.0, 0.0);
    let data = sp.soliton_grid(charge, &Vector3::zeros(), &v0).unwrap();
    let r = run(charge, &data, v0, &sp, vec![3.0]);
    let modified = modified_grid_data(&data, &sp, charge, &Vector3::zeros(), &v0).unwrap();
    assert!(modified.field_energy() < 1e-24 * data.field_energy());
    let cand = free_field_candidate(&r.record, &modified, &sp, charge, 3.0).unwrap();
    assert!(cand.field_energy() < 1e-6 * data.field_energy(), "{}", cand.field_energy());
    let snap = &r.snapshots[0];
    let last = r.record.rows.last().unwrap();
    let (re, _) = scattering_residual(snap, &last.state.q, &last.state.qdot, &cand, &sp, charge).unwrap();
    assert!(re < 1e-3 * (2.0 * data.field_energy()).sqrt(), "{re}");
}

#[test]
fn candidate_energy_stays_bounded_by_the_initial_energy() {
    let g = GridGeometry::new(12.0, 24).unwrap();
    let sp = SpectralProfile::new(g.clone(), &bump());
    let charge = 0.5;
    let v0 = Vector3::new(0.1, 0.0, 0.0);
    let pulse = pulse_grid(&g, &Pulse::new(Vector3::new(1.5, 0.0, 0.0), 1.0, 1.0, Vector3::z()).unwrap());
    let mut data = sp.soliton_grid(charge, &Vector3::zeros(), &v0).unwrap();
    data.update_modes(|i, e, b| {
        let (pe, pb) = pulse.spectral().mode(i);
        for j in 0..3 {
            e[j] += pe[j];
            b[j] += pb[j];
        }
    });
    let r = run(charge, &data, v0, &sp, vec![]);
    let modified = modified_grid_data(&data, &sp, charge, &Vector3::zeros(), &v0).unwrap();
    let cand = free_field_candidate(&r.record, &modified, &sp, charge, 3.0).unwrap();
    assert!(cand.field_energy() > 0.0);
    assert!(cand.field_energy() <= r.conservation[0].quantities.energy);
    let report = asymptotics_report(&r.record, 4).unwrap();
    assert!(report.tail_fraction >= 0.0 && report.tail_fraction <= 1.0);
    assert!(report.v_infinity.norm() < 1.0);
}
