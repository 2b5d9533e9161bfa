//! Subcommand pipelines.

use std::path::Path;
use std::sync::Arc;

use abraham_core::diagnostics::{
    asymptotics_report, free_field_candidate, jacobian_check, modified_grid_data, scattering_residual, ParticlePath,
};
use abraham_core::dynamics::{kernel_decay_scan, solve_trajectory, KernelEvaluator, KirchhoffDriving, NoDriving, VolterraRun};
use abraham_core::fit::{logspace, sphere_directions};
use abraham_core::grid::{run_simulation, soliton_with_radiation, CoupledState, GridConfig, SpectralProfile};
use abraham_core::propagator::{constraint_residual, snapshot, spectral_evolve, FieldGrid, GridGeometry};
use abraham_core::soliton::{DecayQuantity, FieldOrder, SolitonField};
use abraham_core::trajectory::{momentum_from_velocity, TrajectoryRecord, CSV_HEADER};
use nalgebra::Vector3;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{finish_run_dir, prepare_run_dir, write_atomic, write_json, write_table, Manifest, TRAJECTORY};

fn write_trajectory(dir: &Path, record: &TrajectoryRecord, manifest: &mut Manifest) -> Result<(), CliError> {
    write_atomic(&dir.join(TRAJECTORY), |w| Ok(record.write_csv(w)?))?;
    manifest.files.push(TRAJECTORY.into());
    Ok(())
}

fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn soliton(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    prepare_run_dir(dir, config)?;
    let mut manifest = Manifest::new("soliton", None, config);
    let sol = SolitonField::new(Arc::new(config.profile.clone()), config.velocity)?;
    let balance = sol.force_balance()?;
    let mut rows = Vec::new();
    for &r in &config.soliton.radii {
        for d in sphere_directions(config.soliton.directions) {
            let x = d * r;
            let p = sol.fields(&x, FieldOrder::SpaceGradient)?;
            let res = sol.residual(&x, balance)?;
            let mut row = vec![x.x, x.y, x.z];
            row.extend(vec3(&p.e));
            row.extend(vec3(&p.b));
            row.extend(p.grad_e.unwrap().iter());
            row.extend(p.grad_b.unwrap().iter());
            row.push(res.faraday.amax());
            row.push(res.ampere.amax());
            rows.push(row);
        }
    }
    let mut header: Vec<String> = ["x1", "x2", "x3", "Ex", "Ey", "Ez", "Bx", "By", "Bz"].map(String::from).to_vec();
    // Column-major 3×3 gradients: entry (i, l) = ∂_l E_i.
    for f in ["E", "B"] {
        for l in 1..=3 {
            for i in ["x", "y", "z"] {
                header.push(format!("d{f}{i}_dx{l}"));
            }
        }
    }
    header.push("faraday_residual".into());
    header.push("ampere_residual".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join("soliton.csv"), &header, &rows)?;

    let (lo, hi) = config.soliton.decay_radii;
    let radii = logspace(lo, hi, config.soliton.decay_samples);
    let scans = [DecayQuantity::Field, DecayQuantity::SpaceGradient, DecayQuantity::VelocityGradient]
        .map(|q| sol.decay_scan(&radii, q));
    let [f, g, v] = scans;
    let (f, g, v) = (f?, g?, v?);
    let decay: Vec<Vec<f64>> = (0..radii.len()).map(|i| vec![radii[i], f.sup[i], g.sup[i], v.sup[i]]).collect();
    write_table(&dir.join("decay.csv"), &["r", "field", "space_gradient", "velocity_gradient"], &decay)?;
    let max_res = rows.iter().map(|r| r[r.len() - 1].max(r[r.len() - 2])).fold(0.0, f64::max);
    write_json(
        &dir.join("soliton.json"),
        &json!({
            "velocity": vec3(&config.velocity),
            "force_balance": vec3(&balance),
            "max_residual": max_res,
            "slopes": { "field": f.slope, "space_gradient": g.slope, "velocity_gradient": v.slope },
        }),
    )?;
    manifest.files.extend(["soliton.csv", "decay.csv", "soliton.json"].map(String::from));
    finish_run_dir(dir, manifest)
}

pub fn propagate(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    prepare_run_dir(dir, config)?;
    let mut manifest = Manifest::new("propagate", None, config);
    let g = GridGeometry::new(config.grid.length, config.grid.n)?;
    let mut initial = FieldGrid::from_fn(g, |x| (config.radiation.field(x), Vector3::zeros()));
    initial.project_transverse();
    let t = config.propagate_time;
    let evolved = spectral_evolve(&initial, t);
    snapshot::write(&initial, &dir.join("initial.snap"))?;
    snapshot::write(&evolved, &dir.join("final.snap"))?;
    let d0 = constraint_residual(&initial, None).gauss_norm;
    let d1 = constraint_residual(&evolved, None).gauss_norm;
    write_json(
        &dir.join("propagate.json"),
        &json!({
            "time": t,
            "norm_initial": initial.l2_norm(),
            "norm_final": evolved.l2_norm(),
            "energy_initial": initial.field_energy(),
            "energy_final": evolved.field_energy(),
            "divergence_initial": d0,
            "divergence_final": d1,
        }),
    )?;
    manifest.snapshots = vec![(0.0, "initial.snap".into()), (t, "final.snap".into())];
    manifest.files.push("propagate.json".into());
    finish_run_dir(dir, manifest)
}

fn volterra(config: &RunConfig) -> Result<VolterraRun, CliError> {
    let p0 = momentum_from_velocity(&config.velocity)?;
    let ev = KernelEvaluator::new(&config.profile)?;
    let c = config.constants;
    Ok(if config.radiation.pulses.is_empty() || c.charge() == 0.0 {
        solve_trajectory(c, config.position, p0, &NoDriving, &ev, &config.dynamics)?
    } else {
        let drive = KirchhoffDriving::new(config.radiation.clone(), c.charge(), &config.profile)?;
        solve_trajectory(c, config.position, p0, &drive, &ev, &config.dynamics)?
    })
}

fn grid_initial(config: &RunConfig) -> Result<(SpectralProfile, FieldGrid), CliError> {
    let g = GridGeometry::new(config.grid.length, config.grid.n)?;
    let sp = SpectralProfile::new(g, &config.profile);
    let data = soliton_with_radiation(&sp, config.constants.charge(), &config.position, &config.velocity, &config.radiation)?;
    Ok((sp, data))
}

pub fn simulate(config: &RunConfig, solver: &str, dir: &Path) -> Result<(), CliError> {
    prepare_run_dir(dir, config)?;
    let mut manifest = Manifest::new("simulate", Some(solver), config);
    match solver {
        "volterra" => {
            let run = volterra(config)?;
            write_trajectory(dir, &run.record, &mut manifest)?;
        }
        "grid" => {
            let (sp, data) = grid_initial(config)?;
            let p0 = momentum_from_velocity(&config.velocity)?;
            let mut state = CoupledState::with_spectral_profile(&data, config.position, p0, config.constants, sp)?;
            if config.grid.enforce_horizon {
                state = state.with_horizon(config.horizon());
            }
            let gc = GridConfig {
                dt: config.grid.dt,
                t_final: config.grid.t_final,
                snapshot_times: config.grid.snapshot_times.clone(),
                sample_every: config.grid.sample_every,
            };
            let run = run_simulation(state, &gc)?;
            write_trajectory(dir, &run.record, &mut manifest)?;
            let rows: Vec<Vec<f64>> = run
                .conservation
                .iter()
                .map(|s| {
                    let m = s.quantities.momentum;
                    vec![s.t, s.quantities.energy, m.x, m.y, m.z, s.gauss_residual, s.field_norm]
                })
                .collect();
            write_table(
                &dir.join("conservation.csv"),
                &["t", "energy", "momentum1", "momentum2", "momentum3", "gauss_residual", "field_norm"],
                &rows,
            )?;
            manifest.files.push("conservation.csv".into());
            for (i, (snap, &t)) in run.snapshots.iter().zip(&gc.snapshot_times).enumerate() {
                let name = format!("snapshot_{i:03}.snap");
                snapshot::write(snap, &dir.join(&name))?;
                manifest.snapshots.push((t, name));
            }
        }
        other => return Err(CliError::Config(format!("unknown solver `{other}` (expected volterra | grid)"))),
    }
    finish_run_dir(dir, manifest)
}

/// Reads `trajectory.csv` from a run directory or takes the path as a file.
fn load_trajectory(path: &Path) -> Result<TrajectoryRecord, CliError> {
    let file = if path.is_dir() { path.join(TRAJECTORY) } else { path.to_path_buf() };
    TrajectoryRecord::read_csv_path(&file).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))
}

pub fn compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let (ra, rb) = (load_trajectory(a)?, load_trajectory(b)?);
    let sup = ra.qdot_sup_difference(&rb)?;
    let flat = |r: &abraham_core::trajectory::TrajectoryRow| -> Vec<f64> {
        let s = &r.state;
        let mut v = vec![s.t];
        for x in [&s.q, &s.p, &s.qdot, &s.qddot, &r.alpha, &r.beta, &r.memory] {
            v.extend(x.iter());
        }
        v.push(r.contraction);
        v
    };
    let mut deltas = vec![0.0f64; CSV_HEADER.len()];
    for (x, y) in ra.rows.iter().zip(&rb.rows) {
        for (d, (u, w)) in deltas.iter_mut().zip(flat(x).into_iter().zip(flat(y))) {
            *d = d.max((u - w).abs());
        }
    }
    let columns: serde_json::Map<String, serde_json::Value> =
        CSV_HEADER.iter().zip(&deltas).map(|(k, d)| (k.to_string(), json!(d))).collect();
    let report = json!({
        "rows": ra.rows.len().min(rb.rows.len()),
        "qdot_sup_difference": sup,
        "max_column_delta": columns,
    });
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}

pub fn diagnose(run_dir: &Path) -> Result<serde_json::Value, CliError> {
    let manifest = crate::output::Manifest::read(run_dir)?;
    let config = RunConfig::load(&run_dir.join(crate::output::CONFIG_COPY))?;
    if config.raw.hash() != manifest.config_hash {
        return Err(CliError::Input("stored configuration does not match the manifest hash".into()));
    }
    let record = load_trajectory(run_dir)?;
    let Some(last) = record.rows.last().map(|r| r.state) else {
        return Err(CliError::Input("empty trajectory".into()));
    };
    let d = &config.diagnostics;
    let report = asymptotics_report(&record, d.windows)?;
    let t_end = last.t;
    let t0 = record.rows[0].state.t;
    let at = |t: f64| record.rows[(((t - t0) / record.dt).round() as usize).min(record.rows.len() - 1)].state;
    let gap_end = (last.qdot - report.v_infinity).norm();
    let gap_mid = (at(0.5 * (t0 + t_end)).qdot - report.v_infinity).norm();

    let n = d.jacobian_samples.max(1);
    let dirs = sphere_directions(n);
    let (lo, hi) = record.domain();
    let samples: Vec<(f64, Vector3<f64>)> =
        (0..n).map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / n as f64, dirs[i])).collect();
    let jac = jacobian_check(&record, &samples, 1e-4);

    let mut residuals = Vec::new();
    if manifest.solver.as_deref() == Some("grid") && !manifest.snapshots.is_empty() {
        let (sp, data) = grid_initial(&config)?;
        let charge = config.constants.charge();
        let modified = modified_grid_data(&data, &sp, charge, &config.position, &config.velocity)?;
        let candidate = free_field_candidate(&record, &modified, &sp, charge, t_end)?;
        for (t, name) in &manifest.snapshots {
            let snap = snapshot::read(&run_dir.join(name))?;
            let s = at(*t);
            let (re, rb) = scattering_residual(&snap, &s.q, &s.qdot, &candidate, &sp, charge)?;
            residuals.push(vec![*t, re, rb, (re * re + rb * rb).sqrt()]);
        }
        write_table(&run_dir.join("residuals.csv"), &["t", "residual_e", "residual_b", "residual"], &residuals)?;
    }
    let r: Vec<f64> = residuals.iter().map(|x| x[3]).collect();
    let smoothed: Vec<f64> = r.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
    let residual_check = match (r.first(), r.last()) {
        (Some(a), Some(b)) if r.len() > 1 => json!({
            "ratio": b / a,
            "threshold": d.residual_ratio,
            "pass": *b < d.residual_ratio * a,
            "smoothed_nonincreasing": smoothed.windows(2).all(|w| w[1] <= w[0]),
        }),
        _ => json!(null),
    };
    let windows: Vec<_> = report
        .windows
        .iter()
        .map(|w| json!({ "t_start": w.t_start, "t_end": w.t_end, "mean_pdot": w.mean_pdot, "mean_qddot": w.mean_qddot }))
        .collect();
    let out = json!({
        "t_final": t_end,
        "v_infinity": vec3(&report.v_infinity),
        "v_infinity_error": report.v_infinity_error,
        "velocity_gap_final": gap_end,
        "velocity_gap_half": gap_mid,
        "velocity_gap_decreasing": gap_end < gap_mid,
        "acceleration_l2": report.acceleration_l2,
        "tail_fraction": report.tail_fraction,
        "tail_fraction_threshold": d.tail_fraction,
        "tail_fraction_pass": report.tail_fraction < d.tail_fraction,
        "windows": windows,
        "scattering_residual": residuals.iter().map(|x| json!({ "t": x[0], "e": x[1], "b": x[2] })).collect::<Vec<_>>(),
        "residual_check": residual_check,
        "jacobian": { "max_relative_error": jac.max_relative_error, "checked": jac.checked, "skipped": jac.skipped },
    });
    write_json(&run_dir.join("diagnostics.json"), &out)?;
    Ok(out)
}

pub fn bounds_check(config: &RunConfig, what: &str, dir: &Path) -> Result<serde_json::Value, CliError> {
    prepare_run_dir(dir, config)?;
    let mut manifest = Manifest::new("bounds-check", None, config);
    let report = match what {
        "kernel" => {
            let (lo, hi) = config.bounds_lags;
            let lags = logspace(lo, hi, config.bounds_samples);
            let ev = KernelEvaluator::new(&config.profile)?;
            let d = kernel_decay_scan(&ev, &config.velocity, &lags)?;
            let rows: Vec<Vec<f64>> = (0..lags.len()).map(|i| vec![lags[i], d.norms[i], d.gradient_norms[i]]).collect();
            write_table(&dir.join("bounds.csv"), &["lag", "kernel_norm", "gradient_norm"], &rows)?;
            json!({
                "what": "kernel",
                "velocity": vec3(&config.velocity),
                "kernel_slope": d.fit.slope,
                "kernel_support_edge": d.fit.support_edge,
                "gradient_slope": d.gradient_fit.slope,
                "gradient_support_edge": d.gradient_fit.support_edge,
                "kernel_pass": d.fit.slope <= -2.0 + 0.15,
                "gradient_pass": d.gradient_fit.slope <= -3.0 + 0.15,
            })
        }
        "soliton" => {
            let (lo, hi) = config.soliton.decay_radii;
            let radii = logspace(lo, hi, config.soliton.decay_samples);
            let sol = SolitonField::new(Arc::new(config.profile.clone()), config.velocity)?;
            let f = sol.decay_scan(&radii, DecayQuantity::Field)?;
            let g = sol.decay_scan(&radii, DecayQuantity::SpaceGradient)?;
            let v = sol.decay_scan(&radii, DecayQuantity::VelocityGradient)?;
            let rows: Vec<Vec<f64>> = (0..radii.len()).map(|i| vec![radii[i], f.sup[i], g.sup[i], v.sup[i]]).collect();
            write_table(&dir.join("bounds.csv"), &["r", "field", "space_gradient", "velocity_gradient"], &rows)?;
            json!({
                "what": "soliton",
                "field_slope": f.slope,
                "space_gradient_slope": g.slope,
                "velocity_gradient_slope": v.slope,
                "pass": (f.slope + 2.0).abs() < 0.1 && (g.slope + 3.0).abs() < 0.1 && (v.slope + 2.0).abs() < 0.1,
            })
        }
        other => return Err(CliError::Config(format!("unknown bounds target `{other}` (expected kernel | soliton)"))),
    };
    write_json(&dir.join("bounds.json"), &report)?;
    manifest.files.extend(["bounds.csv", "bounds.json"].map(String::from));
    finish_run_dir(dir, manifest)?;
    Ok(report)
}
