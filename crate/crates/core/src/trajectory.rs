//! Particle states and recorded trajectories shared by both solvers.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};

/// `F(p) = p/√(1+p²)` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMaps {
    pub f: Vector3<f64>,
    pub f_prime: Matrix3<f64>,
    /// `f_second[k] = ∂_{p_k} F′`.
    pub f_second: [Matrix3<f64>; 3],
}

pub fn momentum_maps(p: &Vector3<f64>) -> MomentumMaps {
    let g2 = 1.0 + p.norm_squared();
    let g = g2.sqrt();
    let (g3, g5) = (g2 * g, g2 * g2 * g);
    let ppt = p * p.transpose();
    let f_prime = Matrix3::identity() / g - ppt / g3;
    let f_second = [0, 1, 2].map(|k| {
        let mut m = Matrix3::identity() * (-p[k] / g3) + ppt * (3.0 * p[k] / g5);
        for i in 0..3 {
            m[(i, k)] -= p[i] / g3;
            m[(k, i)] -= p[i] / g3;
        }
        m
    });
    MomentumMaps {
        f: p / g,
        f_prime,
        f_second,
    }
}

/// `q̇ = F(p)`.
pub fn velocity(p: &Vector3<f64>) -> Vector3<f64> {
    p / (1.0 + p.norm_squared()).sqrt()
}

/// `p = q̇/√(1−q̇²)`.
pub fn momentum_from_velocity(v: &Vector3<f64>) -> Result<Vector3<f64>> {
    let s = v.norm_squared();
    if !(s < 1.0) {
        return Err(invalid(format!("speed {} is not below 1", s.sqrt())));
    }
    Ok(v / (1.0 - s).sqrt())
}

/// Particle state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParticleState {
    pub t: f64,
    pub q: Vector3<f64>,
    pub p: Vector3<f64>,
    pub qdot: Vector3<f64>,
    pub qddot: Vector3<f64>,
}

impl ParticleState {
    /// State with `q̇ = F(p)` and `q̈ = F′(p) ṗ`.
    pub fn new(t: f64, q: Vector3<f64>, p: Vector3<f64>, pdot: &Vector3<f64>) -> Self {
        let m = momentum_maps(&p);
        Self {
            t,
            q,
            p,
            qdot: m.f,
            qddot: m.f_prime * pdot,
        }
    }

    pub fn speed(&self) -> f64 {
        self.qdot.norm()
    }

    /// `ṗ` recovered from `q̈ = F′(p) ṗ`.
    pub fn pdot(&self) -> Vector3<f64> {
        let g2 = 1.0 + self.p.norm_squared();
        let g = g2.sqrt();
        // (F′)⁻¹ = γ (I + p pᵀ)
        (self.qddot + self.p * self.p.dot(&self.qddot)) * g
    }
}

/// One recorded step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryRow {
    pub state: ParticleState,
    pub alpha: Vector3<f64>,
    pub beta: Vector3<f64>,
    /// `(A ṗ)(t)`; zero for the grid solver.
    pub memory: Vector3<f64>,
    pub contraction: f64,
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub rows: Vec<TrajectoryRow>,
}

pub const CSV_HEADER: [&str; 23] = [
    "t", "q1", "q2", "q3", "p1", "p2", "p3", "qdot1", "qdot2", "qdot3", "qddot1", "qddot2", "qddot3", "alpha1",
    "alpha2", "alpha3", "beta1", "beta2", "beta3", "memory1", "memory2", "memory3", "contraction_factor",
];

impl TrajectoryRecord {
    pub fn new(dt: f64) -> Self {
        Self { dt, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.state.t).collect()
    }

    pub fn max_speed(&self) -> f64 {
        self.rows.iter().map(|r| r.state.speed()).fold(0.0, f64::max)
    }

    /// Running trapezoid integral of `|q̈|²`.
    pub fn acceleration_l2(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                let prev = &self.rows[i - 1].state;
                acc += 0.5 * (r.state.t - prev.t) * (r.state.qddot.norm_squared() + prev.qddot.norm_squared());
            }
            out.push(acc);
        }
        out
    }

    /// `sup_t |q̇_self − q̇_other|` over common sample times.
    pub fn qdot_sup_difference(&self, other: &Self) -> Result<f64> {
        let n = self.rows.len().min(other.rows.len());
        let mut sup: f64 = 0.0;
        for (a, b) in self.rows[..n].iter().zip(&other.rows[..n]) {
            if (a.state.t - b.state.t).abs() > 1e-9 * (1.0 + a.state.t.abs()) {
                return Err(invalid(format!("sample times differ: {} vs {}", a.state.t, b.state.t)));
            }
            sup = sup.max((a.state.qdot - b.state.qdot).norm());
        }
        Ok(sup)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let s = &r.state;
            let mut fields = vec![s.t.to_string()];
            for v in [&s.q, &s.p, &s.qdot, &s.qddot, &r.alpha, &r.beta, &r.memory] {
                fields.extend(v.iter().map(|x| x.to_string()));
            }
            fields.push(r.contraction.to_string());
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Format(format!("unexpected trajectory header: {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let v: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Format(format!("bad number {f:?}: {e}"))))
                .collect::<Result<_>>()?;
            let vec3 = |i: usize| Vector3::new(v[i], v[i + 1], v[i + 2]);
            rows.push(TrajectoryRow {
                state: ParticleState {
                    t: v[0],
                    q: vec3(1),
                    p: vec3(4),
                    qdot: vec3(7),
                    qddot: vec3(10),
                },
                alpha: vec3(13),
                beta: vec3(16),
                memory: vec3(19),
                contraction: v[22],
            });
        }
        let dt = if rows.len() > 1 { rows[1].state.t - rows[0].state.t } else { 0.0 };
        Ok(Self { dt, rows })
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn maps_at_rest() {
        let m = momentum_maps(&Vector3::zeros());
        assert_eq!(m.f, Vector3::zeros());
        assert_eq!(m.f_prime, Matrix3::identity());
    }

    #[test]
    fn inverse_map_rejects_light_speed() {
        assert!(momentum_from_velocity(&Vector3::new(0.6, 0.8, 0.0)).is_err());
        assert!(momentum_from_velocity(&Vector3::new(0.6, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rec = TrajectoryRecord::new(0.1);
        for i in 0..3 {
            let p = Vector3::new(0.1 * i as f64, -0.3, 1.0 / 3.0);
            let mut row = TrajectoryRow {
                state: ParticleState::new(0.1 * i as f64, Vector3::new(1e-17, 2.0, -3.5), p, &Vector3::new(0.2, 0.0, 1e-3)),
                ..Default::default()
            };
            row.alpha = Vector3::new(std::f64::consts::PI, 0.0, -1e300);
            row.contraction = 0.25;
            rec.rows.push(row);
        }
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let back = TrajectoryRecord::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, rec.rows);
    }

    proptest! {
        #[test]
        fn speed_below_one_and_round_trip(x in -1e3..1e3f64, y in -1e3..1e3f64, z in -1e3..1e3f64) {
            let p = Vector3::new(x, y, z);
            let v = velocity(&p);
            prop_assert!(v.norm() < 1.0);
            if p.norm() < 50.0 {
                let back = momentum_from_velocity(&v).unwrap();
                prop_assert!((back - p).norm() <= 1e-12 * (1.0 + p.norm()));
            }
        }

        #[test]
        fn derivatives_match_differences(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
            let p = Vector3::new(x, y, z);
            let m = momentum_maps(&p);
            let h = 1e-5;
            for k in 0..3 {
                let mut d = Vector3::zeros();
                d[k] = h;
                let fd = (velocity(&(p + d)) - velocity(&(p - d))) / (2.0 * h);
                let col = m.f_prime.column(k).into_owned();
                prop_assert!((fd - col).norm() <= 1e-7 * col.norm().max(1e-3));
                let fd2 = (momentum_maps(&(p + d)).f_prime - momentum_maps(&(p - d)).f_prime) / (2.0 * h);
                prop_assert!((fd2 - m.f_second[k]).norm() <= 1e-7 * m.f_second[k].norm().max(1e-3));
            }
            let pdot = Vector3::new(0.3, -0.1, 0.7);
            let s = ParticleState::new(0.0, Vector3::zeros(), p, &pdot);
            prop_assert!((s.pdot() - pdot).norm() < 1e-10 * (1.0 + p.norm_squared()));
        }
    }
}
