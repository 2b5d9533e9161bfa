//! Time march of the reduced equation.
//!
//! On `t_n = nΔt` the unknowns are `q_n, p_n, ṗ_n`. Each step
//!
//! 1. predicts `q_n` explicitly (Hermite rule with extrapolated `ṗ`), so the
//!    displacements `q_n − q_k` and hence all propagated sources are fixed;
//! 2. evaluates `α_n, β_n` and the propagated sources for `k ≤ n`, stopping at
//!    the first `k` outside the light cone;
//! 3. solves `m ṗ_n = α_n + q̇_n × β_n + e² Σ_k w_k a(t_n, t_k) ṗ_k` by
//!    fixed-point iteration with `p_n = p_{n−1} + Δt(ṗ_{n−1} + ṗ_n)/2`.

use nalgebra::{Matrix3, Vector3};

use super::kernel::{kernel_matrix, KernelEvaluator};
use super::{DrivingField, DrivingForces};
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::profile::PhysicalConstants;
use crate::soliton::{check_speed, V_MAX};
use crate::trajectory::{momentum_maps, ParticleState, TrajectoryRecord, TrajectoryRow};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraConfig {
    pub dt: f64,
    pub t_final: f64,
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    /// Lags beyond which only every other history node is used.
    pub tau_cut: Option<f64>,
    pub damping: f64,
}

impl Default for VolterraConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_final: 10.0,
            fixed_point_tol: 1e-10,
            max_iters: 50,
            tau_cut: None,
            damping: 1.0,
        }
    }
}

impl VolterraConfig {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(invalid("dynamics.dt must be positive and dynamics.t_final nonnegative"));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_iters == 0 {
            return Err(invalid("fixed-point tolerance and iteration cap must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        if let Some(c) = self.tau_cut {
            if !(c > 0.0) {
                return Err(invalid("dynamics.tau_cut must be positive"));
            }
        }
        Ok(())
    }
}

/// Quadrature weight of history node `k` at step `n`, zero for skipped nodes.
///
/// Plain trapezoid rule, except that with `tau_cut` the nodes older than
/// `t_n − τ_cut` form a trapezoid rule of step `2Δt` (plus one `Δt` interval
/// at `s = 0` when the parity requires it).
pub fn memory_weight(n: usize, k: usize, dt: f64, tau_cut: Option<f64>) -> f64 {
    if n == 0 || k > n {
        return 0.0;
    }
    let plain = if k == 0 || k == n { 0.5 * dt } else { dt };
    let Some(cut) = tau_cut else {
        return plain;
    };
    // Junction node: the newest node with even lag beyond the cut.
    let mut lag = (cut / dt).floor() as usize + 1;
    lag += lag % 2;
    if lag + 2 > n {
        return plain;
    }
    let junction = n - lag;
    if k > junction {
        return plain;
    }
    let coarse_end = junction % 2;
    let w = if k == junction {
        1.5
    } else if (junction - k) % 2 == 1 {
        if k == 0 {
            0.5
        } else {
            0.0
        }
    } else if k == 0 {
        1.0
    } else if k == 1 && coarse_end == 1 {
        1.5
    } else {
        2.0
    };
    w * dt
}

/// `∫₀^{t_n} a(t_n, s) ṗ(s) ds` by the trapezoid rule on `s_k = kΔt`,
/// `k = 0..=n` where `n = pdot.len() − 1`.
pub fn apply_memory(
    dt: f64,
    kernel: impl Fn(usize) -> Matrix3<f64>,
    pdot: &[Vector3<f64>],
    tau_cut: Option<f64>,
) -> Vector3<f64> {
    if pdot.len() < 2 {
        return Vector3::zeros();
    }
    let n = pdot.len() - 1;
    (0..=n).fold(Vector3::zeros(), |acc, k| {
        let w = memory_weight(n, k, dt, tau_cut);
        if w == 0.0 {
            acc
        } else {
            acc + kernel(k) * pdot[k] * w
        }
    })
}

/// Cached propagated sources for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    pub k: usize,
    pub weight: f64,
    pub m_e: Matrix3<f64>,
    pub m_b: Matrix3<f64>,
}

/// A finished run: the record plus the data needed to re-check it.
#[derive(Debug, Clone)]
pub struct VolterraRun {
    pub record: TrajectoryRecord,
    pub pdot: Vec<Vector3<f64>>,
    pub kernels: Vec<Vec<KernelEntry>>,
    pub forces: Vec<DrivingForces>,
    pub constants: PhysicalConstants,
}

impl VolterraRun {
    /// `max_n |m ṗ_n − α_n − q̇_n × β_n − e² Σ_k w_k a(t_n,t_k) ṗ_k|`.
    pub fn discrete_residual(&self) -> f64 {
        let e2 = self.constants.charge().powi(2);
        let m = self.constants.mass();
        let fprime: Vec<Matrix3<f64>> = self.record.rows.iter().map(|r| momentum_maps(&r.state.p).f_prime).collect();
        self.record
            .rows
            .iter()
            .enumerate()
            .map(|(n, row)| {
                let qd = row.state.qdot;
                let mem = self.kernels[n].iter().fold(Vector3::zeros(), |acc, e| {
                    acc + kernel_matrix(&e.m_e, &e.m_b, &qd, &fprime[e.k]) * self.pdot[e.k] * e.weight
                });
                let f = &self.forces[n];
                (self.pdot[n] * m - f.alpha - qd.cross(&f.beta) - mem * e2).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Extrapolated `ṗ_n` from the last three values.
fn extrapolate(pdot: &[Vector3<f64>]) -> Vector3<f64> {
    match pdot {
        [] => Vector3::zeros(),
        [a] => *a,
        [.., a, b] if pdot.len() == 2 => b * 2.0 - a,
        [.., a, b, c] => c * 3.0 - b * 3.0 + a,
        _ => unreachable!(),
    }
}

/// Marches the reduced equation from `(q0, p0)`.
pub fn solve_trajectory<G: DrivingField>(
    constants: PhysicalConstants,
    q0: Vector3<f64>,
    p0: Vector3<f64>,
    driver: &G,
    kernels: &KernelEvaluator,
    config: &VolterraConfig,
) -> Result<VolterraRun> {
    config.validate()?;
    let dt = config.dt;
    let e2 = constants.charge().powi(2);
    let mass = constants.mass();
    let steps = config.steps();
    check_speed(&crate::trajectory::velocity(&p0))?;
    let batch = 4 * std::thread::available_parallelism().map_or(1, |n| n.get()).max(4);

    let mut q: Vec<Vector3<f64>> = Vec::with_capacity(steps + 1);
    let mut p: Vec<Vector3<f64>> = Vec::with_capacity(steps + 1);
    let mut pdot: Vec<Vector3<f64>> = Vec::with_capacity(steps + 1);
    let mut qdot: Vec<Vector3<f64>> = Vec::with_capacity(steps + 1);
    let mut fprime: Vec<Matrix3<f64>> = Vec::with_capacity(steps + 1);
    let mut run = VolterraRun {
        record: TrajectoryRecord::new(dt),
        pdot: Vec::new(),
        kernels: Vec::with_capacity(steps + 1),
        forces: Vec::with_capacity(steps + 1),
        constants,
    };

    for n in 0..=steps {
        let t = n as f64 * dt;
        // Predicted state at t_n.
        let (qn, pdot_guess) = if n == 0 {
            (q0, Vector3::zeros())
        } else {
            let guess = extrapolate(&pdot[pdot.len().saturating_sub(3)..]);
            let p_pred = p[n - 1] + (pdot[n - 1] + guess) * (0.5 * dt);
            let mp = momentum_maps(&p_pred);
            let qddot_prev = fprime[n - 1] * pdot[n - 1];
            let qn = q[n - 1] + (qdot[n - 1] + mp.f) * (0.5 * dt) + (qddot_prev - mp.f_prime * guess) * (dt * dt / 12.0);
            (qn, guess)
        };
        let forces = driver.forces(t, &qn)?;

        // Propagated sources for k < n, newest first, until the light cone is left.
        let mut entries: Vec<KernelEntry> = Vec::new();
        if e2 != 0.0 && n > 0 {
            let mut hi = n;
            'outer: while hi > 0 {
                let lo = hi.saturating_sub(batch);
                let ks: Vec<usize> = (lo..hi).rev().filter(|&k| memory_weight(n, k, dt, config.tau_cut) != 0.0).collect();
                let block = exec::map_slice(&ks, |&k| {
                    let m = kernels.propagated(&qdot[k], t - k as f64 * dt, &(qn - q[k]), false);
                    (k, m)
                });
                for (k, m) in block {
                    if m.e == Matrix3::zeros() && m.b == Matrix3::zeros() {
                        break 'outer;
                    }
                    entries.push(KernelEntry {
                        k,
                        weight: memory_weight(n, k, dt, config.tau_cut),
                        m_e: m.e,
                        m_b: m.b,
                    });
                }
                hi = lo;
            }
        }
        // History part of the memory, split so that only q̇_n varies below.
        let (mut hist_e, mut hist_b) = (Vector3::zeros(), Vector3::zeros());
        for e in &entries {
            let u = fprime[e.k] * pdot[e.k] * e.weight;
            hist_e += e.m_e * u;
            hist_b += e.m_b * u;
        }
        // Endpoint s = t_n with the predicted velocity; it vanishes by symmetry.
        let end_w = memory_weight(n, n, dt, config.tau_cut);
        let endpoint = if e2 != 0.0 && n > 0 {
            let p_pred = p[n - 1] + (pdot[n - 1] + pdot_guess) * (0.5 * dt);
            let mp = momentum_maps(&p_pred);
            let m = kernels.propagated(&mp.f, 0.0, &Vector3::zeros(), false);
            Some((m.e, m.b, mp.f_prime))
        } else {
            None
        };

        let state_for = |x: &Vector3<f64>| -> Vector3<f64> {
            if n == 0 {
                p0
            } else {
                p[n - 1] + (pdot[n - 1] + x) * (0.5 * dt)
            }
        };
        let rhs = |x: &Vector3<f64>| -> (Vector3<f64>, Vector3<f64>) {
            let pn = state_for(x);
            let qd = crate::trajectory::velocity(&pn);
            let mut mem = -(hist_e + qd.cross(&hist_b));
            if let Some((me, mb, fp)) = &endpoint {
                mem += kernel_matrix(me, mb, &qd, fp) * x * end_w;
            }
            ((forces.alpha + qd.cross(&forces.beta) + mem * e2) / mass, mem)
        };

        let mut x = if n == 0 { rhs(&Vector3::zeros()).0 } else { pdot_guess };
        let mut prev_diff: Option<f64> = None;
        let mut contraction: f64 = 0.0;
        let mut converged = false;
        let mut memory = Vector3::zeros();
        for iter in 0..config.max_iters {
            let (next, mem) = rhs(&x);
            let next = x + (next - x) * config.damping;
            let diff = (next - x).norm();
            memory = mem;
            x = next;
            if let Some(pd) = prev_diff.filter(|pd| *pd > 0.0) {
                let ratio = diff / pd;
                contraction = contraction.max(ratio);
                if ratio >= 1.0 && iter >= 2 && diff > config.fixed_point_tol {
                    return Err(Error::Divergence {
                        step: n,
                        time: t,
                        reason: format!("fixed-point contraction factor {ratio:.3} ≥ 1"),
                    });
                }
            }
            if diff <= config.fixed_point_tol {
                converged = true;
                break;
            }
            prev_diff = Some(diff);
        }
        if !converged {
            return Err(Error::Divergence {
                step: n,
                time: t,
                reason: format!("no convergence in {} iterations", config.max_iters),
            });
        }

        let pn = state_for(&x);
        let mp = momentum_maps(&pn);
        if mp.f.norm() > V_MAX {
            return Err(Error::Stability {
                speed: mp.f.norm(),
                cap: V_MAX,
            });
        }
        q.push(qn);
        p.push(pn);
        pdot.push(x);
        qdot.push(mp.f);
        fprime.push(mp.f_prime);
        if let Some((me, mb, _)) = endpoint {
            entries.push(KernelEntry {
                k: n,
                weight: end_w,
                m_e: me,
                m_b: mb,
            });
        }
        run.record.rows.push(TrajectoryRow {
            state: ParticleState::new(t, qn, pn, &x),
            alpha: forces.alpha,
            beta: forces.beta,
            memory,
            contraction,
        });
        run.kernels.push(entries);
        run.forces.push(forces);
    }
    run.pdot = pdot;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_of_constant_history_and_empty_integral() {
        let z = apply_memory(0.1, |_| Matrix3::identity(), &[Vector3::new(1.0, 0.0, 0.0)], None);
        assert_eq!(z, Vector3::zeros());
        let zeros = vec![Vector3::zeros(); 20];
        assert_eq!(apply_memory(0.1, |_| Matrix3::identity(), &zeros, None), Vector3::zeros());
    }

    #[test]
    fn memory_matches_refined_quadrature() {
        // a(t,s) = e^{-(t−s)} M, ṗ(s) = sin(s) w, t = 2.
        let m = Matrix3::new(1.0, 0.2, 0.0, -0.3, 0.5, 0.1, 0.0, 0.4, 0.8);
        let w = Vector3::new(0.3, -1.0, 0.5);
        let t = 2.0;
        let eval = |dt: f64| {
            let n = (t / dt).round() as usize;
            let pd: Vec<Vector3<f64>> = (0..=n).map(|k| w * (k as f64 * dt).sin()).collect();
            apply_memory(dt, |k| m * (-(t - k as f64 * dt)).exp(), &pd, None)
        };
        let coarse = eval(0.05);
        let fine = eval(0.0125);
        assert!((coarse - fine).norm() < 1e-3 * fine.norm());
    }

    #[test]
    fn thinned_weights_integrate_constants() {
        let dt = 0.1;
        for n in [3usize, 10, 13, 14, 37, 40] {
            let total: f64 = (0..=n).map(|k| memory_weight(n, k, dt, Some(1.0))).sum();
            assert!((total - n as f64 * dt).abs() < 1e-12, "n={n}: {total}");
        }
    }

    fn evaluator() -> KernelEvaluator {
        use crate::profile::{ChargeProfile, ProfileShape};
        KernelEvaluator::new(&ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn uncharged_particle_moves_in_a_straight_line() {
        let c = PhysicalConstants::new(0.0, 1.0).unwrap();
        let p0 = Vector3::new(0.3, -0.2, 0.1);
        let cfg = VolterraConfig { dt: 0.1, t_final: 5.0, ..Default::default() };
        let run = solve_trajectory(c, Vector3::zeros(), p0, &super::super::NoDriving, &evaluator(), &cfg).unwrap();
        let v = crate::trajectory::velocity(&p0);
        for r in &run.record.rows {
            assert!((r.state.q - v * r.state.t).norm() < 1e-12);
            assert_eq!(r.state.p, p0);
        }
        assert_eq!(run.record.len(), 51);
    }

    #[test]
    fn free_soliton_is_inertial() {
        let c = PhysicalConstants::new(0.5, 1.0).unwrap();
        let p0 = crate::trajectory::momentum_from_velocity(&Vector3::new(0.4, 0.1, 0.0)).unwrap();
        let cfg = VolterraConfig { dt: 0.1, t_final: 6.0, ..Default::default() };
        let run = solve_trajectory(c, Vector3::zeros(), p0, &super::super::NoDriving, &evaluator(), &cfg).unwrap();
        for r in &run.record.rows {
            assert!(r.state.pdot().norm() < 1e-12, "t={} pdot={}", r.state.t, r.state.pdot());
        }
        assert!(run.discrete_residual() < 1e-12);
    }

    #[test]
    fn kicked_particle_satisfies_discrete_equation() {
        struct Kick;
        impl DrivingField for Kick {
            fn forces(&self, t: f64, _: &Vector3<f64>) -> Result<DrivingForces> {
                let a = (-(t - 1.0) * (t - 1.0) * 4.0).exp() * 0.3;
                Ok(DrivingForces { alpha: Vector3::new(a, 0.5 * a, 0.0), beta: Vector3::new(0.0, 0.0, 0.2 * a) })
            }
        }
        let c = PhysicalConstants::new(1.0, 1.0).unwrap();
        let cfg = VolterraConfig { dt: 0.05, t_final: 4.0, ..Default::default() };
        let run = solve_trajectory(c, Vector3::zeros(), Vector3::zeros(), &Kick, &evaluator(), &cfg).unwrap();
        assert!(run.discrete_residual() < 1e-8, "{}", run.discrete_residual());
        assert!(run.record.last().unwrap().state.speed() > 1e-3);
        assert!(run.record.rows.iter().any(|r| r.memory.norm() > 1e-6));
    }
}
