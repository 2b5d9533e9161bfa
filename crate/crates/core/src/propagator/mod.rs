//! The free Maxwell group on a periodic box and at single points.
//!
//! Lattice points sit at `x_j = -L/2 + j L/N`. Spectral coefficients use
//! `f(x_j) = Σ_k c_k e^{i k·x_j}` with `k = 2π m / L`, `m ∈ [-N/2, N/2)`, stored
//! in FFT order. Modes with `k = 0` or any Nyquist index are left unchanged by
//! the evolution and carry no derivative.

pub mod fft;
pub mod kirchhoff;
pub mod snapshot;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
pub use rustfft::num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::exec;
use fft::Fft3;

pub use kirchhoff::{FieldJet, FieldValue, FreeFieldData, KirchhoffRule};

/// Complex 3-vector of spectral coefficients.
pub type CVec3 = [Complex64; 3];

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Box length, resolution and cached wavenumbers.
#[derive(Clone)]
pub struct GridGeometry {
    length: f64,
    n: usize,
    wavenumbers: Arc<Vec<f64>>,
    fft: Arc<Fft3>,
}

impl fmt::Debug for GridGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridGeometry")
            .field("length", &self.length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for GridGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.n == other.n
    }
}

/// How a spectral mode is treated by evolution and differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Zero,
    Nyquist,
    Active,
}

impl GridGeometry {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("box length must be positive"));
        }
        if n < 4 || n % 2 != 0 {
            return Err(invalid("grid resolution must be even and at least 4"));
        }
        let wavenumbers = (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * std::f64::consts::PI * m / length
            })
            .collect();
        Ok(Self {
            length,
            n,
            wavenumbers: Arc::new(wavenumbers),
            fft: Arc::new(Fft3::new(n)),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    pub fn position(&self, idx: usize) -> Vector3<f64> {
        let h = self.spacing();
        let c = self.coords(idx);
        Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64) * h - Vector3::repeat(0.5 * self.length)
    }

    /// One-dimensional wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn wavevector(&self, idx: usize) -> Vector3<f64> {
        let c = self.coords(idx);
        Vector3::new(self.wavenumbers[c[0]], self.wavenumbers[c[1]], self.wavenumbers[c[2]])
    }

    pub fn mode_class(&self, idx: usize) -> ModeClass {
        let c = self.coords(idx);
        if c.contains(&(self.n / 2)) {
            ModeClass::Nyquist
        } else if c == [0, 0, 0] {
            ModeClass::Zero
        } else {
            ModeClass::Active
        }
    }

    /// Largest resolved wavenumber.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// `(-1)^{ix+iy+iz}` relating FFT output to the centred lattice.
    fn phase(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        if (c[0] + c[1] + c[2]) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Physical samples to spectral coefficients.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft.process(data, false);
        let scale = 1.0 / self.points() as f64;
        exec::for_chunks_mut(data, exec::REDUCE_CHUNK, |off, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                *v *= self.phase(off + i) * scale;
            }
        });
    }

    /// Spectral coefficients to physical samples; imaginary parts are dropped.
    pub fn inverse(&self, data: &mut [Complex64]) {
        exec::for_chunks_mut(data, exec::REDUCE_CHUNK, |off, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                *v *= self.phase(off + i);
            }
        });
        self.fft.process(data, true);
        exec::for_chunks_mut(data, exec::REDUCE_CHUNK, |_, chunk| {
            for v in chunk {
                v.im = 0.0;
            }
        });
    }

    /// Samples `f` on the lattice and returns its spectral coefficients.
    pub fn transform_scalar(&self, f: impl Fn(&Vector3<f64>) -> f64 + Sync + Send) -> Vec<Complex64> {
        let mut data = exec::map_indices(self.points(), |i| Complex64::new(f(&self.position(i)), 0.0));
        self.forward(&mut data);
        data
    }
}

/// Whether a grid holds lattice samples or Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Spectral,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Physical => "physical",
            Representation::Spectral => "spectral",
        })
    }
}

/// `E` and `B` on an `N³` periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    geometry: GridGeometry,
    time: f64,
    representation: Representation,
    e: [Vec<Complex64>; 3],
    b: [Vec<Complex64>; 3],
}

impl FieldGrid {
    pub fn zeros(geometry: GridGeometry, representation: Representation) -> Self {
        let n = geometry.points();
        let z = || vec![CZERO; n];
        Self {
            geometry,
            time: 0.0,
            representation,
            e: [z(), z(), z()],
            b: [z(), z(), z()],
        }
    }

    /// Samples `f(x) -> (E, B)` at the lattice points.
    pub fn from_fn<F>(geometry: GridGeometry, f: F) -> Self
    where
        F: Fn(&Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) + Sync + Send,
    {
        let samples = exec::map_indices(geometry.points(), |i| f(&geometry.position(i)));
        let mut g = Self::zeros(geometry, Representation::Physical);
        for (i, (e, b)) in samples.into_iter().enumerate() {
            for c in 0..3 {
                g.e[c][i] = Complex64::new(e[c], 0.0);
                g.b[c][i] = Complex64::new(b[c], 0.0);
            }
        }
        g
    }

    /// Builds spectral coefficients mode by mode from `f(idx, k) -> (Ê, B̂)`.
    pub fn from_spectral_fn<F>(geometry: GridGeometry, f: F) -> Self
    where
        F: Fn(usize, &Vector3<f64>) -> (CVec3, CVec3) + Sync + Send,
    {
        let modes = exec::map_indices(geometry.points(), |i| f(i, &geometry.wavevector(i)));
        let mut g = Self::zeros(geometry, Representation::Spectral);
        for (i, (e, b)) in modes.into_iter().enumerate() {
            g.set_mode(i, e, b);
        }
        g
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn e(&self) -> &[Vec<Complex64>; 3] {
        &self.e
    }

    pub fn b(&self) -> &[Vec<Complex64>; 3] {
        &self.b
    }

    /// `(E, B)` at entry `idx` in the current representation.
    pub fn mode(&self, idx: usize) -> (CVec3, CVec3) {
        (
            [self.e[0][idx], self.e[1][idx], self.e[2][idx]],
            [self.b[0][idx], self.b[1][idx], self.b[2][idx]],
        )
    }

    pub fn set_mode(&mut self, idx: usize, e: CVec3, b: CVec3) {
        for c in 0..3 {
            self.e[c][idx] = e[c];
            self.b[c][idx] = b[c];
        }
    }

    /// Rewrites every entry in place with `f(idx, &mut E, &mut B)`.
    pub fn update_modes<F>(&mut self, f: F)
    where
        F: Fn(usize, &mut CVec3, &mut CVec3) + Sync + Send,
    {
        const CHUNK: usize = 4096;
        let [e0, e1, e2] = &mut self.e;
        let [b0, b1, b2] = &mut self.b;
        type Chunks<'a> = (((((&'a mut [Complex64], &'a mut [Complex64]), &'a mut [Complex64]), &'a mut [Complex64]), &'a mut [Complex64]), &'a mut [Complex64]);
        let work = |(ci, (((((x0, x1), x2), y0), y1), y2)): (usize, Chunks<'_>)| {
            for j in 0..x0.len() {
                let mut e = [x0[j], x1[j], x2[j]];
                let mut b = [y0[j], y1[j], y2[j]];
                f(ci * CHUNK + j, &mut e, &mut b);
                (x0[j], x1[j], x2[j]) = (e[0], e[1], e[2]);
                (y0[j], y1[j], y2[j]) = (b[0], b[1], b[2]);
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            e0.par_chunks_mut(CHUNK)
                .zip(e1.par_chunks_mut(CHUNK))
                .zip(e2.par_chunks_mut(CHUNK))
                .zip(b0.par_chunks_mut(CHUNK))
                .zip(b1.par_chunks_mut(CHUNK))
                .zip(b2.par_chunks_mut(CHUNK))
                .enumerate()
                .for_each(work);
        }
        #[cfg(not(feature = "parallel"))]
        {
            e0.chunks_mut(CHUNK)
                .zip(e1.chunks_mut(CHUNK))
                .zip(e2.chunks_mut(CHUNK))
                .zip(b0.chunks_mut(CHUNK))
                .zip(b1.chunks_mut(CHUNK))
                .zip(b2.chunks_mut(CHUNK))
                .enumerate()
                .for_each(work);
        }
    }

    /// Real `(E, B)` at lattice point `idx`; requires the physical representation.
    pub fn sample(&self, idx: usize) -> (Vector3<f64>, Vector3<f64>) {
        debug_assert_eq!(self.representation, Representation::Physical);
        let (e, b) = self.mode(idx);
        (Vector3::new(e[0].re, e[1].re, e[2].re), Vector3::new(b[0].re, b[1].re, b[2].re))
    }

    fn components_mut(&mut self) -> impl Iterator<Item = &mut Vec<Complex64>> {
        self.e.iter_mut().chain(self.b.iter_mut())
    }

    pub fn to_spectral(&mut self) {
        if self.representation == Representation::Spectral {
            return;
        }
        let geometry = self.geometry.clone();
        for c in self.components_mut() {
            geometry.forward(c);
        }
        self.representation = Representation::Spectral;
    }

    pub fn to_physical(&mut self) {
        if self.representation == Representation::Physical {
            return;
        }
        let geometry = self.geometry.clone();
        for c in self.components_mut() {
            geometry.inverse(c);
        }
        self.representation = Representation::Physical;
    }

    pub fn spectral(&self) -> Self {
        let mut g = self.clone();
        g.to_spectral();
        g
    }

    pub fn physical(&self) -> Self {
        let mut g = self.clone();
        g.to_physical();
        g
    }

    /// Removes longitudinal parts of `E` and `B` and clears Nyquist modes.
    /// The result is spectral.
    pub fn project_transverse(&mut self) {
        self.to_spectral();
        let g = self.geometry.clone();
        for i in 0..g.points() {
            let (mut e, mut b) = self.mode(i);
            match g.mode_class(i) {
                ModeClass::Nyquist => {
                    e = [CZERO; 3];
                    b = [CZERO; 3];
                }
                ModeClass::Zero => {}
                ModeClass::Active => {
                    let khat = g.wavevector(i).normalize();
                    for v in [&mut e, &mut b] {
                        let p = khat[0] * v[0] + khat[1] * v[1] + khat[2] * v[2];
                        for c in 0..3 {
                            v[c] -= p * khat[c];
                        }
                    }
                }
            }
            self.set_mode(i, e, b);
        }
    }

    /// Weight turning `Σ|entry|²` into an integral over the box.
    fn quadratic_weight(&self) -> f64 {
        match self.representation {
            Representation::Physical => self.geometry.cell_volume(),
            Representation::Spectral => self.geometry.volume(),
        }
    }

    /// `(∫ |E|² + |B|²)^{1/2}`, identical in both representations.
    pub fn l2_norm(&self) -> f64 {
        let sq = exec::sum_indices(self.geometry.points(), 0.0, |i| {
            (0..3).map(|c| self.e[c][i].norm_sqr() + self.b[c][i].norm_sqr()).sum::<f64>()
        });
        (sq * self.quadratic_weight()).sqrt()
    }

    /// `½ ∫ |E|² + |B|²`.
    pub fn field_energy(&self) -> f64 {
        0.5 * self.l2_norm().powi(2)
    }

    /// `∫ E × B`.
    pub fn field_momentum(&self) -> Vector3<f64> {
        let s = exec::sum_indices(self.geometry.points(), Vector3::zeros(), |i| {
            let (e, b) = self.mode(i);
            let x = |p: usize, q: usize| (e[p] * b[q].conj() - e[q] * b[p].conj()).re;
            Vector3::new(x(1, 2), x(2, 0), x(0, 1))
        });
        s * self.quadratic_weight()
    }

    /// Trigonometric interpolation of fields and first derivatives at an
    /// arbitrary point; requires the spectral representation.
    pub fn interpolate(&self, x: &Vector3<f64>) -> FieldJet<Vector3<f64>> {
        assert_eq!(self.representation, Representation::Spectral);
        let g = &self.geometry;
        let zero = FieldJet::<Vector3<f64>>::default();
        exec::sum_indices(g.points(), zero, |i| {
            let class = g.mode_class(i);
            let k = g.wavevector(i);
            let phase = Complex64::from_polar(1.0, k.dot(x));
            let (e, b) = self.mode(i);
            let re = |v: &CVec3, f: Complex64| Vector3::new((v[0] * f).re, (v[1] * f).re, (v[2] * f).re);
            let mut out = FieldJet {
                e: re(&e, phase),
                b: re(&b, phase),
                ..FieldJet::default()
            };
            if class == ModeClass::Active {
                for d in 0..3 {
                    let f = phase * Complex64::new(0.0, k[d]);
                    out.grad_e[d] = re(&e, f);
                    out.grad_b[d] = re(&b, f);
                }
            }
            out
        })
    }
}

/// Exact free rotation of one mode, with an optional current frozen over the
/// step. Longitudinal parts of `E` and `B` are stationary; the longitudinal
/// current is ignored.
#[inline]
pub(crate) fn rotate_mode(
    e: &mut CVec3,
    b: &mut CVec3,
    khat: &Vector3<f64>,
    kappa: f64,
    (cos, sin): (f64, f64),
    current: Option<&CVec3>,
) {
    let dot = |v: &CVec3| khat[0] * v[0] + khat[1] * v[1] + khat[2] * v[2];
    let cross = |v: &CVec3| -> CVec3 {
        [
            khat[1] * v[2] - khat[2] * v[1],
            khat[2] * v[0] - khat[0] * v[2],
            khat[0] * v[1] - khat[1] * v[0],
        ]
    };
    let i = Complex64::new(0.0, 1.0);
    let (ep, bp) = (dot(e), dot(b));
    let ke = cross(e);
    let kb = cross(b);
    let mut ne = [CZERO; 3];
    let mut nb = [CZERO; 3];
    for c in 0..3 {
        let e_par = ep * khat[c];
        let b_par = bp * khat[c];
        ne[c] = e[c] + (e[c] - e_par) * (cos - 1.0) + i * sin * kb[c];
        nb[c] = b[c] + (b[c] - b_par) * (cos - 1.0) - i * sin * ke[c];
    }
    if let Some(j) = current {
        let jp = dot(j);
        let kj = cross(j);
        for c in 0..3 {
            ne[c] -= (j[c] - jp * khat[c]) * (sin / kappa);
            nb[c] += i * kj[c] * ((1.0 - cos) / kappa);
        }
    }
    *e = ne;
    *b = nb;
}

/// Unit wavevector and `|k|` of an active mode.
pub(crate) fn mode_direction(geometry: &GridGeometry, idx: usize) -> Option<(Vector3<f64>, f64)> {
    (geometry.mode_class(idx) == ModeClass::Active).then(|| {
        let k = geometry.wavevector(idx);
        let kappa = k.norm();
        (k / kappa, kappa)
    })
}

/// `U(t)` applied mode-wise. The result is spectral.
pub fn spectral_evolve(state: &FieldGrid, t: f64) -> FieldGrid {
    let mut out = state.spectral();
    let geometry = out.geometry.clone();
    out.update_modes(|i, e, b| {
        if let Some((khat, kappa)) = mode_direction(&geometry, i) {
            let (s, c) = (kappa * t).sin_cos();
            rotate_mode(e, b, &khat, kappa, (c, s), None);
        }
    });
    out.time = state.time + t;
    out
}

/// The propagator `U(t)` as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOp {
    time: f64,
}

impl PropagatorOp {
    pub fn new(time: f64) -> Self {
        Self { time }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `U(self) ∘ U(other)`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(self.time + other.time)
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.time)
    }

    pub fn apply(&self, state: &FieldGrid) -> FieldGrid {
        spectral_evolve(state, self.time)
    }
}

/// `L²` norms of the constraint violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResidual {
    pub div_b_norm: f64,
    pub gauss_norm: f64,
}

/// `‖div B‖₂` and `‖div E − density‖₂` from exact lattice derivatives.
/// The `k = 0` mode is excluded (a periodic box carries a neutralizing
/// background) as are Nyquist modes, which have no derivative.
pub fn constraint_residual(
    state: &FieldGrid,
    density: Option<&(dyn Fn(&Vector3<f64>) -> f64 + Sync)>,
) -> ConstraintResidual {
    let s = state.spectral();
    let g = s.geometry();
    let rho = density.map(|f| g.transform_scalar(f));
    let i = Complex64::new(0.0, 1.0);
    let sums = exec::sum_indices(g.points(), Vector2::zeros(), |idx| {
        if g.mode_class(idx) != ModeClass::Active {
            return Vector2::zeros();
        }
        let k = g.wavevector(idx);
        let (e, b) = s.mode(idx);
        let div = |v: &CVec3| i * (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]);
        let r = rho.as_ref().map_or(CZERO, |r| r[idx]);
        Vector2::new(div(&b).norm_sqr(), (div(&e) - r).norm_sqr())
    });
    let w = g.volume();
    ConstraintResidual {
        div_b_norm: (sums[0] * w).sqrt(),
        gauss_norm: (sums[1] * w).sqrt(),
    }
}
