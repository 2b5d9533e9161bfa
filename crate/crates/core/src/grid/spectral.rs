//! Lattice Fourier coefficients of the profile and of soliton fields.
//!
//! With `c_k = f̂(k)/L³` the charge density `eρ(x − q)` has coefficients
//! `P̂_k = e ρ̂(|k|) e^{−ik·q}/L³` and the soliton at velocity `v` is
//!
//! ```text
//! Ê = i P̂ (−k + v (v·k)) / Q,   B̂ = −i P̂ (v × k) / Q,   Q = |k|² − (v·k)².
//! ```
//!
//! The `k = 0` and Nyquist modes are left empty.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::Result;
use crate::exec;
use crate::profile::ChargeProfile;
use crate::propagator::{CVec3, Complex64, FieldGrid, GridGeometry, ModeClass, Representation};
use crate::soliton::check_speed;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `ρ̂(|k|)` on every lattice mode.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    geometry: GridGeometry,
    rho_hat: Arc<Vec<f64>>,
}

impl SpectralProfile {
    pub fn new(geometry: GridGeometry, profile: &ChargeProfile) -> Self {
        // |k|² is (2π/L)² times an integer, so few distinct values occur.
        let n = geometry.resolution() as i64;
        let shells: Vec<i64> = (0..geometry.points())
            .map(|i| {
                let c = geometry.coords(i);
                c.iter().map(|&j| if (j as i64) < n / 2 { j as i64 } else { j as i64 - n }).map(|m| m * m).sum()
            })
            .collect();
        let mut keys: Vec<i64> = shells.clone();
        keys.sort_unstable();
        keys.dedup();
        let dk = 2.0 * std::f64::consts::PI / geometry.length();
        let values = exec::map_slice(&keys, |&s| profile.fourier_radial(dk * (s as f64).sqrt()));
        let table: HashMap<i64, f64> = keys.into_iter().zip(values).collect();
        let rho_hat = shells.iter().map(|s| table[s]).collect();
        Self {
            geometry,
            rho_hat: Arc::new(rho_hat),
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn rho_hat(&self, idx: usize) -> f64 {
        self.rho_hat[idx]
    }

    /// `P̂_k` for charge `e` at `q`; zero on inactive modes.
    pub fn density_mode(&self, idx: usize, charge: f64, q: &Vector3<f64>) -> Complex64 {
        if self.geometry.mode_class(idx) != ModeClass::Active {
            return CZERO;
        }
        let k = self.geometry.wavevector(idx);
        Complex64::from_polar(charge * self.rho_hat[idx] / self.geometry.volume(), -k.dot(q))
    }

    /// Per-axis factors `e^{−i k_j q_j}` so that `e^{−ik·q}` is their product.
    pub fn axis_phases(&self, q: &Vector3<f64>) -> AxisPhases {
        let kn = self.geometry.wavenumbers();
        AxisPhases([0, 1, 2].map(|a| kn.iter().map(|k| Complex64::from_polar(1.0, -k * q[a])).collect()))
    }

    /// [`Self::density_mode`] with precomputed phases.
    pub fn density_mode_with(&self, idx: usize, charge: f64, phases: &AxisPhases) -> Complex64 {
        if self.geometry.mode_class(idx) != ModeClass::Active {
            return CZERO;
        }
        phases.at(self.geometry.coords(idx)) * (charge * self.rho_hat[idx] / self.geometry.volume())
    }

    /// Soliton mode `(Ê, B̂)` at velocity `v`.
    pub fn soliton_mode(&self, idx: usize, charge: f64, q: &Vector3<f64>, v: &Vector3<f64>) -> (CVec3, CVec3) {
        let p = self.density_mode(idx, charge, q);
        if p == CZERO {
            return ([CZERO; 3], [CZERO; 3]);
        }
        let k = self.geometry.wavevector(idx);
        let vk = v.dot(&k);
        let q_den = k.norm_squared() - vk * vk;
        let e = (-k + v * vk) / q_den;
        let b = v.cross(&k) / q_den;
        (cvec(&e, I * p), cvec(&b, -I * p))
    }

    /// Coulomb mode `−ik P̂/|k|²`.
    pub fn coulomb_mode(&self, idx: usize, charge: f64, phases: &AxisPhases) -> CVec3 {
        let p = self.density_mode_with(idx, charge, phases);
        if p == CZERO {
            return [CZERO; 3];
        }
        let k = self.geometry.wavevector(idx);
        cvec(&(-k / k.norm_squared()), I * p)
    }

    /// `(u·∂_v)` of the soliton mode.
    pub fn soliton_velocity_derivative_mode(
        &self,
        idx: usize,
        charge: f64,
        q: &Vector3<f64>,
        v: &Vector3<f64>,
        u: &Vector3<f64>,
    ) -> (CVec3, CVec3) {
        self.velocity_derivative_from_density(idx, self.density_mode(idx, charge, q), v, u)
    }

    /// [`Self::soliton_velocity_derivative_mode`] with precomputed phases.
    pub fn soliton_velocity_derivative_mode_with(
        &self,
        idx: usize,
        charge: f64,
        phases: &AxisPhases,
        v: &Vector3<f64>,
        u: &Vector3<f64>,
    ) -> (CVec3, CVec3) {
        self.velocity_derivative_from_density(idx, self.density_mode_with(idx, charge, phases), v, u)
    }

    fn velocity_derivative_from_density(&self, idx: usize, p: Complex64, v: &Vector3<f64>, u: &Vector3<f64>) -> (CVec3, CVec3) {
        if p == CZERO {
            return ([CZERO; 3], [CZERO; 3]);
        }
        let k = self.geometry.wavevector(idx);
        let (vk, uk) = (v.dot(&k), u.dot(&k));
        let q_den = k.norm_squared() - vk * vk;
        let dq = 2.0 * vk * uk / (q_den * q_den);
        let e = (u * vk + v * uk) / q_den + (-k + v * vk) * dq;
        let b = u.cross(&k) / q_den + v.cross(&k) * dq;
        (cvec(&e, I * p), cvec(&b, -I * p))
    }

    /// Whole soliton field as a spectral grid.
    pub fn soliton_grid(&self, charge: f64, q: &Vector3<f64>, v: &Vector3<f64>) -> Result<FieldGrid> {
        check_speed(v)?;
        Ok(FieldGrid::from_spectral_fn(self.geometry.clone(), |i, _| self.soliton_mode(i, charge, q, v)))
    }

    /// `(u·∂_v)(E_v, B_v)(· − q)` as a spectral grid.
    pub fn soliton_derivative_grid(&self, charge: f64, q: &Vector3<f64>, v: &Vector3<f64>, u: &Vector3<f64>) -> Result<FieldGrid> {
        check_speed(v)?;
        Ok(FieldGrid::from_spectral_fn(self.geometry.clone(), |i, _| {
            self.soliton_velocity_derivative_mode(i, charge, q, v, u)
        }))
    }

    /// Mollified `(E^ρ, B^ρ)(q) = Re Σ_k c_k ρ̂(k) e^{ik·q}` over non-Nyquist modes.
    pub fn mollified_at(&self, grid: &FieldGrid, q: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        assert_eq!(grid.representation(), Representation::Spectral);
        let g = &self.geometry;
        let phases = self.axis_phases(&-q);
        let sum = exec::sum_indices(g.points(), nalgebra::Vector6::zeros(), |i| {
            if g.mode_class(i) == ModeClass::Nyquist {
                return nalgebra::Vector6::zeros();
            }
            let ph = phases.at(g.coords(i)) * self.rho_hat[i];
            let (e, b) = grid.mode(i);
            nalgebra::Vector6::new(
                (e[0] * ph).re,
                (e[1] * ph).re,
                (e[2] * ph).re,
                (b[0] * ph).re,
                (b[1] * ph).re,
                (b[2] * ph).re,
            )
        });
        (sum.fixed_rows::<3>(0).into_owned(), sum.fixed_rows::<3>(3).into_owned())
    }
}

/// Separable plane-wave phases on the lattice.
#[derive(Debug, Clone)]
pub struct AxisPhases([Vec<Complex64>; 3]);

impl AxisPhases {
    #[inline]
    pub fn at(&self, c: [usize; 3]) -> Complex64 {
        self.0[0][c[0]] * self.0[1][c[1]] * self.0[2][c[2]]
    }
}

fn cvec(v: &Vector3<f64>, f: Complex64) -> CVec3 {
    [f * v[0], f * v[1], f * v[2]]
}
