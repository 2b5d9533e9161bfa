//! Least-squares slope fits and deterministic direction sets.

use nalgebra::Vector3;

use crate::error::{invalid, Result};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("slope fit needs at least two matched samples"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("slope fit needs positive samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Log-spaced samples from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// `n` roughly uniform unit vectors on a Fibonacci spiral.
pub fn sphere_directions(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vector3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

/// Outcome of a decay fit on samples that may vanish identically past some
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Slope over samples above the floor; `-inf` if none remain in the
    /// fit window, i.e. the quantity is compactly supported there.
    pub slope: f64,
    /// Samples used by the fit.
    pub used: usize,
    /// First abscissa at which the samples fall to the floor, if any.
    pub support_edge: Option<f64>,
}

/// Fits `ln y` against `ln x` over the leading run of samples with `y > floor`.
/// Samples past the first one at the floor are treated as outside the
/// support. Fewer than three leading samples give slope `-inf` when the
/// quantity has vanished, so callers can distinguish compact support from
/// algebraic decay.
pub fn decay_fit(x: &[f64], y: &[f64], floor: f64) -> Result<DecayFit> {
    if x.len() != y.len() {
        return Err(invalid("decay fit needs matched samples"));
    }
    let cut = y.iter().position(|v| *v <= floor).unwrap_or(y.len());
    let support_edge = (cut < y.len()).then(|| x[cut]);
    if cut >= 3 {
        return Ok(DecayFit {
            slope: loglog_slope(&x[..cut], &y[..cut])?,
            used: cut,
            support_edge,
        });
    }
    if support_edge.is_some() {
        return Ok(DecayFit {
            slope: f64::NEG_INFINITY,
            used: cut,
            support_edge,
        });
    }
    Err(invalid("decay fit needs at least three samples above the floor"))
}
