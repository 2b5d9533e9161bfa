//! Finite-time diagnostics of the long-time behaviour: the free field left
//! behind by the particle, the scattering residual, the limiting velocity and
//! the integrability of the acceleration, and the lightcone Jacobian.

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Result};
use crate::exec;
use crate::grid::SpectralProfile;
use crate::propagator::{mode_direction, rotate_mode, spectral_evolve, FieldGrid};
use crate::trajectory::TrajectoryRecord;

/// `(Ē₀, B̄₀) = (E₀, B₀) − e (E_v, B_v)(· − q₀)` on the lattice.
pub fn modified_grid_data(
    fields: &FieldGrid,
    spectral: &SpectralProfile,
    charge: f64,
    q0: &Vector3<f64>,
    v0: &Vector3<f64>,
) -> Result<FieldGrid> {
    let sol = spectral.soliton_grid(charge, q0, v0)?;
    let full = fields.spectral();
    let mut out = FieldGrid::from_spectral_fn(full.geometry().clone(), |i, _| {
        let (e, b) = full.mode(i);
        let (se, sb) = sol.mode(i);
        ([e[0] - se[0], e[1] - se[1], e[2] - se[2]], [b[0] - sb[0], b[1] - sb[1], b[2] - sb[2]])
    });
    out.set_time(fields.time());
    Ok(out)
}

/// Free field at `t = 0` whose evolution the total field approaches:
///
/// ```text
/// (E_L, B_L)(0) = (Ē₀, B̄₀) − e ∫₀^{T_max} U(−s) [(q̈(s)·∂_v)(E_v, B_v)]_{v=q̇(s)}(· − q(s)) ds
/// ```
///
/// by the trapezoid rule on the record's samples, nested as
/// `H_n = w_n S_n + U(−Δt) H_{n+1}`.
pub fn free_field_candidate(
    record: &TrajectoryRecord,
    modified: &FieldGrid,
    spectral: &SpectralProfile,
    charge: f64,
    t_max: f64,
) -> Result<FieldGrid> {
    let rows = &record.rows;
    let Some(last) = rows.last() else {
        return Err(invalid("empty trajectory"));
    };
    let t0 = rows[0].state.t;
    if t_max > last.state.t + 1e-9 || t_max < t0 {
        return Err(invalid(format!(
            "T_max = {t_max} lies outside the trajectory [{t0}, {}]",
            last.state.t
        )));
    }
    let dt = record.dt;
    let n_end = ((t_max - t0) / dt).round() as usize;
    let mut out = modified.spectral();
    if charge == 0.0 || n_end == 0 {
        return Ok(out);
    }
    let g = out.geometry().clone();
    let rotations: Vec<_> = exec::map_indices(g.points(), |i| {
        mode_direction(&g, i).map(|(khat, kappa)| {
            let (s, c) = (-kappa * dt).sin_cos();
            (khat, kappa, c, s)
        })
    });
    let mut acc = FieldGrid::zeros(g.clone(), crate::propagator::Representation::Spectral);
    for n in (0..=n_end).rev() {
        let st = &rows[n].state;
        let w = if n == 0 || n == n_end { 0.5 * dt } else { dt };
        let phases = spectral.axis_phases(&st.q);
        acc.update_modes(|i, e, b| {
            if n < n_end {
                if let Some((khat, kappa, c, s)) = rotations[i] {
                    rotate_mode(e, b, &khat, kappa, (c, s), None);
                }
            }
            if st.qddot != Vector3::zeros() {
                let (se, sb) = spectral.soliton_velocity_derivative_mode_with(i, charge * w, &phases, &st.qdot, &st.qddot);
                for j in 0..3 {
                    e[j] += se[j];
                    b[j] += sb[j];
                }
            }
        });
    }
    out.update_modes(|i, e, b| {
        let (ae, ab) = acc.mode(i);
        for j in 0..3 {
            e[j] -= ae[j];
            b[j] -= ab[j];
        }
    });
    out.set_time(t0);
    Ok(out)
}

/// `‖E − eE_{q̇}(· − q) − E_L‖₂` and the same for `B` at the snapshot time,
/// with `E_L` the candidate evolved from its own time.
pub fn scattering_residual(
    snapshot: &FieldGrid,
    q: &Vector3<f64>,
    qdot: &Vector3<f64>,
    candidate: &FieldGrid,
    spectral: &SpectralProfile,
    charge: f64,
) -> Result<(f64, f64)> {
    if snapshot.geometry() != candidate.geometry() {
        return Err(invalid("snapshot and candidate use different lattices"));
    }
    let free = spectral_evolve(candidate, snapshot.time() - candidate.time());
    let sol = spectral.soliton_grid(charge, q, qdot)?;
    let full = snapshot.spectral();
    let g = full.geometry();
    let sums = exec::sum_indices(g.points(), nalgebra::Vector2::<f64>::zeros(), |i| {
        let (e, b) = full.mode(i);
        let (fe, fb) = free.mode(i);
        let (se, sb) = sol.mode(i);
        let mut v = nalgebra::Vector2::zeros();
        for j in 0..3 {
            v[0] += (e[j] - se[j] - fe[j]).norm_sqr();
            v[1] += (b[j] - sb[j] - fb[j]).norm_sqr();
        }
        v
    });
    let w = g.volume();
    Ok(((sums[0] * w).sqrt(), (sums[1] * w).sqrt()))
}

/// One averaging window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMean {
    pub t_start: f64,
    pub t_end: f64,
    pub mean_pdot: f64,
    pub mean_qddot: f64,
    pub mean_qdot: Vector3<f64>,
}

/// Long-time summary of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub windows: Vec<WindowMean>,
    /// `∫₀ᵀ |q̈|²`.
    pub acceleration_l2: f64,
    /// Share of `∫|q̈|²` collected over `[T/2, T]`; zero when the integral is.
    pub tail_fraction: f64,
    pub v_infinity: Vector3<f64>,
    pub v_infinity_error: f64,
}

/// Windowed means over `windows` equal windows, `∫|q̈|²` with its tail
/// share, and `v∞` from the last two window means extrapolated in `1/t`.
pub fn asymptotics_report(record: &TrajectoryRecord, windows: usize) -> Result<AsymptoticsReport> {
    let rows = &record.rows;
    if windows < 4 || rows.len() < 2 * windows + 1 {
        return Err(invalid("asymptotics need at least four windows of two samples"));
    }
    let n = rows.len() - 1;
    let l2 = record.acceleration_l2();
    let total = l2[n];
    let half = n / 2;
    let tail_fraction = if total > 0.0 { (total - l2[half]) / total } else { 0.0 };

    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let (lo, hi) = (w * n / windows, (w + 1) * n / windows);
        let span = &rows[lo..=hi];
        // Trapezoid means.
        let len = span[span.len() - 1].state.t - span[0].state.t;
        let avg = |f: &dyn Fn(usize) -> Vector3<f64>| {
            let s = (1..span.len()).fold(Vector3::zeros(), |a, i| a + (f(i - 1) + f(i)) * (0.5 * (span[i].state.t - span[i - 1].state.t)));
            s / len
        };
        out.push(WindowMean {
            t_start: span[0].state.t,
            t_end: span[span.len() - 1].state.t,
            mean_pdot: avg(&|i| Vector3::new(span[i].state.pdot().norm(), 0.0, 0.0)).x,
            mean_qddot: avg(&|i| Vector3::new(span[i].state.qddot.norm(), 0.0, 0.0)).x,
            mean_qdot: avg(&|i| span[i].state.qdot),
        });
    }

    let tail = &rows[half..];
    let steady = tail.iter().all(|r| r.state.qdot == tail[0].state.qdot);
    let (v_infinity, v_infinity_error) = if steady {
        (rows[n].state.qdot, 0.0)
    } else {
        let (a, b) = (&out[windows - 2], &out[windows - 1]);
        let (ta, tb) = (0.5 * (a.t_start + a.t_end), 0.5 * (b.t_start + b.t_end));
        let v = (b.mean_qdot * tb - a.mean_qdot * ta) / (tb - ta);
        (v, (v - b.mean_qdot).norm())
    };
    Ok(AsymptoticsReport {
        windows: out,
        acceleration_l2: total,
        tail_fraction,
        v_infinity,
        v_infinity_error,
    })
}

/// A particle path `s ↦ q(s)` with velocity, on a closed time interval.
pub trait ParticlePath {
    fn domain(&self) -> (f64, f64);
    fn position(&self, s: f64) -> Vector3<f64>;
    fn velocity(&self, s: f64) -> Vector3<f64>;
}

/// Cubic Hermite interpolation of a recorded trajectory.
impl ParticlePath for TrajectoryRecord {
    fn domain(&self) -> (f64, f64) {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => (a.state.t, b.state.t),
            _ => (0.0, 0.0),
        }
    }

    fn position(&self, s: f64) -> Vector3<f64> {
        let (i, u, h) = self.segment(s);
        let (a, b) = (&self.rows[i].state, &self.rows[i + 1].state);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u).powi(2),
            u * (1.0 - u).powi(2),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        a.q * h00 + a.qdot * (h10 * h) + b.q * h01 + b.qdot * (h11 * h)
    }

    fn velocity(&self, s: f64) -> Vector3<f64> {
        let (i, u, h) = self.segment(s);
        let (a, b) = (&self.rows[i].state, &self.rows[i + 1].state);
        let (d00, d10, d01, d11) = (
            6.0 * u * (u - 1.0),
            (1.0 - u) * (1.0 - 3.0 * u),
            6.0 * u * (1.0 - u),
            u * (3.0 * u - 2.0),
        );
        a.q * (d00 / h) + a.qdot * d10 + b.q * (d01 / h) + b.qdot * d11
    }
}

impl TrajectoryRecord {
    /// `(segment index, local coordinate in [0,1], segment length)`.
    fn segment(&self, s: f64) -> (usize, f64, f64) {
        let n = self.rows.len();
        assert!(n >= 2, "interpolation needs two samples");
        let t0 = self.rows[0].state.t;
        let i = (((s - t0) / self.dt).floor().max(0.0) as usize).min(n - 2);
        let (a, b) = (self.rows[i].state.t, self.rows[i + 1].state.t);
        (i, (s - a) / (b - a), b - a)
    }
}

/// Result of [`jacobian_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Samples whose stencil left the trajectory's time domain.
    pub skipped: usize,
}

/// `s` with `|z − q(s)| = s`, unique while `|q̇| < 1`.
fn lightcone_time<P: ParticlePath + ?Sized>(path: &P, z: &Vector3<f64>) -> Option<f64> {
    let (lo, hi) = path.domain();
    let f = |s: f64| s - (z - path.position(s)).norm();
    let (mut a, mut b) = (lo.max(0.0), hi);
    if f(a) > 0.0 || f(b) < 0.0 {
        return None;
    }
    // Safeguarded Newton on the increasing function f.
    let mut s = 0.5 * (a + b);
    for _ in 0..100 {
        let fs = f(s);
        if fs > 0.0 {
            b = s;
        } else {
            a = s;
        }
        let d = z - path.position(s);
        let df = 1.0 + path.velocity(s).dot(&d) / d.norm().max(f64::MIN_POSITIVE);
        let mut next = s - fs / df;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

/// For each `(s, ω)`, maps `z = q(s) + sω`, differentiates the inverse
/// `z ↦ y = z − q(s(z))` by central differences of step `h`, and compares
/// `det ∂y/∂z` with `1/(1 + ⟨q̇(s), ω⟩)`.
pub fn jacobian_check<P: ParticlePath + Sync + ?Sized>(path: &P, samples: &[(f64, Vector3<f64>)], h: f64) -> JacobianReport {
    let results = exec::map_slice(samples, |(s, omega)| {
        let omega = omega.normalize();
        let z = path.position(*s) + omega * *s;
        let inverse = |z: &Vector3<f64>| lightcone_time(path, z).map(|t| z - path.position(t));
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let mut dz = Vector3::zeros();
            dz[k] = h;
            let (Some(p), Some(m)) = (inverse(&(z + dz)), inverse(&(z - dz))) else {
                return None;
            };
            jac.set_column(k, &((p - m) / (2.0 * h)));
        }
        let expected = 1.0 / (1.0 + path.velocity(*s).dot(&omega));
        Some((jac.determinant() - expected).abs() / expected.abs())
    });
    let checked: Vec<f64> = results.iter().flatten().copied().collect();
    JacobianReport {
        max_relative_error: checked.iter().copied().fold(0.0, f64::max),
        checked: checked.len(),
        skipped: results.len() - checked.len(),
    }
}
