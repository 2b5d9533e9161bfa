//! Gauss–Legendre rules and product rules on the unit sphere.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::Vector3;

use crate::error::{invalid, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Result<Self> {
        let n = NonZeroUsize::new(n).ok_or_else(|| invalid("quadrature needs at least one node"))?;
        let rule = GaussLegendre::new(n);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Orthonormal pair completing `axis` (assumed unit) to a right-handed frame.
pub fn orthonormal_frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if axis.x.abs() < 0.6 {
        Vector3::x()
    } else if axis.y.abs() < 0.6 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (helper - axis * axis.dot(&helper)).normalize();
    let e2 = axis.cross(&e1);
    (e1, e2)
}

/// Product rule on a polar band `c = cos θ ∈ [c_lo, c_hi]` about an axis:
/// Gauss–Legendre in `c`, trapezoid in azimuth.
#[derive(Debug, Clone)]
pub struct BandRule {
    polar: GaussRule,
    azimuth: Vec<(f64, f64)>,
}

impl BandRule {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_azimuth == 0 {
            return Err(invalid("azimuthal rule needs at least one node"));
        }
        let azimuth = (0..n_azimuth)
            .map(|j| {
                let psi = 2.0 * PI * (j as f64 + 0.5) / n_azimuth as f64;
                (psi.cos(), psi.sin())
            })
            .collect();
        Ok(Self {
            polar: GaussRule::new(n_polar)?,
            azimuth,
        })
    }

    /// Rule integrating spherical polynomials of total degree `degree` exactly.
    pub fn with_exactness(degree: usize) -> Result<Self> {
        Self::new(degree / 2 + 1, degree + 1)
    }

    pub fn len(&self) -> usize {
        self.polar.len() * self.azimuth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn polar(&self) -> &GaussRule {
        &self.polar
    }

    pub fn azimuth(&self) -> &[(f64, f64)] {
        &self.azimuth
    }

    /// Visits `(ω, c, weight)` over the band; weights sum to the band's solid angle.
    pub fn for_each(
        &self,
        axis: &Vector3<f64>,
        c_lo: f64,
        c_hi: f64,
        mut f: impl FnMut(&Vector3<f64>, f64, f64),
    ) {
        let c_lo = c_lo.max(-1.0);
        let c_hi = c_hi.min(1.0);
        if c_hi <= c_lo {
            return;
        }
        let (e1, e2) = orthonormal_frame(axis);
        let w_psi = 2.0 * PI / self.azimuth.len() as f64;
        for (c, wc) in self.polar.mapped(c_lo, c_hi) {
            let sn = (1.0 - c * c).max(0.0).sqrt();
            let w = wc * w_psi;
            for &(cp, sp) in &self.azimuth {
                let omega = axis * c + (e1 * cp + e2 * sp) * sn;
                f(&omega, c, w);
            }
        }
    }

    /// Materialized nodes on the full sphere about `axis`.
    pub fn sphere_nodes(&self, axis: &Vector3<f64>) -> Vec<(Vector3<f64>, f64)> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(axis, -1.0, 1.0, |w, _, wt| out.push((*w, wt)));
        out
    }
}
