//! One-dimensional ridge profiles of radial densities.
//!
//! A radial density `P` with support radius `U` has the ridge profile
//! `Φ(u) = u P(|u|)`. Fields of its soliton are superpositions over directions
//! `ω` of plane profiles `Φ(ω·x)`, which makes both static evaluation and
//! free propagation cheap (see `soliton::plane_wave`).
//!
//! The mollified source uses the density `ρ * ρ`; its ridge profile is the
//! one-dimensional convolution `Φ_ρ * R_ρ` with `R_ρ(u) = 2π ∫_{|u|}^R r ρ(r) dr`,
//! and `(Φ_ρ * R_ρ)^{(k)} = -2π Φ_ρ^{(k-1)} * Φ_ρ` for `k ≥ 1`. It is tabulated
//! once and evaluated by quintic Hermite interpolation.

use std::f64::consts::PI;

use crate::error::Result;
use crate::profile::ChargeProfile;
use crate::quadrature::GaussRule;
use crate::taylor::Jet;

/// Highest derivative order returned by [`RidgeProfile::ridge`].
pub const MAX_RIDGE_ORDER: usize = 3;

/// Profile `Φ` together with its first derivatives.
pub trait RidgeProfile: Send + Sync {
    /// `Φ(u) = 0` for `|u| ≥ half_width()`.
    fn half_width(&self) -> f64;

    /// `[Φ, Φ', Φ'', Φ''']` at `u`; entries above `order` may be left zero.
    fn ridge(&self, u: f64, order: usize) -> [f64; 4];
}

impl RidgeProfile for ChargeProfile {
    fn half_width(&self) -> f64 {
        self.radius()
    }

    fn ridge(&self, u: f64, _order: usize) -> [f64; 4] {
        if u.abs() >= self.radius() {
            return [0.0; 4];
        }
        let phi = Jet::<4>::variable(u) * self.radial_jet::<4>(u);
        [phi.derivative(0), phi.derivative(1), phi.derivative(2), phi.derivative(3)]
    }
}

/// Tabulated ridge profile of `ρ * ρ`.
#[derive(Debug, Clone)]
pub struct MollifiedRidge {
    half_width: f64,
    step: f64,
    /// `tables[k][i] = Φ₂^{(k)}(-half_width + i step)` for `k = 0..=5`.
    tables: Vec<Vec<f64>>,
}

/// Number of intervals of the default table.
const DEFAULT_INTERVALS: usize = 2048;

impl MollifiedRidge {
    pub fn new(profile: &ChargeProfile) -> Result<Self> {
        Self::with_intervals(profile, DEFAULT_INTERVALS)
    }

    pub fn with_intervals(profile: &ChargeProfile, intervals: usize) -> Result<Self> {
        let r = profile.radius();
        let half_width = 2.0 * r;
        let step = 2.0 * half_width / intervals as f64;
        let rule = GaussRule::new(24)?;
        let panels = 8;

        let radon = |s: f64| -> f64 {
            let lo = s.abs();
            if lo >= r {
                return 0.0;
            }
            let mid = 0.5 * (lo + r);
            2.0 * PI
                * (rule.integrate(lo, mid, |t| t * profile.density_radial(t))
                    + rule.integrate(mid, r, |t| t * profile.density_radial(t)))
        };

        let row = |u: f64| -> [f64; 6] {
            let mut out = [0.0; 6];
            let lo = (-r).max(u - r);
            let hi = r.min(u + r);
            if hi <= lo {
                return out;
            }
            let h = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * h;
                for (t, w) in rule.mapped(a, a + h) {
                    let jet = Jet::<5>::variable(t) * profile.radial_jet::<5>(t);
                    let other = u - t;
                    let phi_other = other * profile.density_radial(other.abs());
                    out[0] += w * jet.value() * radon(other);
                    for k in 1..6 {
                        out[k] += w * -2.0 * PI * jet.derivative(k - 1) * phi_other;
                    }
                }
            }
            out
        };

        let rows = crate::exec::map_indices(intervals + 1, |i| row(-half_width + i as f64 * step));
        let tables = (0..6).map(|k| rows.iter().map(|row| row[k]).collect()).collect();
        Ok(Self {
            half_width,
            step,
            tables,
        })
    }

    /// Quintic Hermite interpolation of `Φ₂^{(m)}` from tables `m, m+1, m+2`.
    fn hermite(&self, m: usize, i: usize, t: f64) -> f64 {
        let h = self.step;
        let f = &self.tables[m];
        let d1 = &self.tables[m + 1];
        let d2 = &self.tables[m + 2];
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        h00 * f[i]
            + h01 * f[i + 1]
            + h * (h10 * d1[i] + h11 * d1[i + 1])
            + h * h * (h20 * d2[i] + h21 * d2[i + 1])
    }
}

impl RidgeProfile for MollifiedRidge {
    fn half_width(&self) -> f64 {
        self.half_width
    }

    fn ridge(&self, u: f64, order: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        if u.abs() >= self.half_width {
            return out;
        }
        let x = (u + self.half_width) / self.step;
        let i = (x.floor() as usize).min(self.tables[0].len() - 2);
        let t = x - i as f64;
        for (m, o) in out.iter_mut().enumerate().take(order.min(MAX_RIDGE_ORDER) + 1) {
            *o = self.hermite(m, i, t);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileShape;

    /// Direct evaluation of `Φ₂(u) = u (ρ*ρ)(|u|)` from the 3-D convolution in
    /// radial form: `(ρ*ρ)(a) = 2π/a ∫∫ r s ρ(r) ρ(s) dr ds` over `|r-s| < a < r+s`.
    fn phi2_oracle(p: &ChargeProfile, u: f64) -> f64 {
        let a = u.abs();
        if a == 0.0 {
            return 0.0;
        }
        let r_max = p.radius();
        let n = 1500;
        let h = r_max / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            let lo = (a - r).abs();
            let hi = (a + r).min(r_max);
            if hi <= lo {
                continue;
            }
            let m = 400;
            let hs = (hi - lo) / m as f64;
            let inner: f64 = (0..m)
                .map(|j| {
                    let s = lo + (j as f64 + 0.5) * hs;
                    s * p.density_radial(s) * hs
                })
                .sum();
            acc += r * p.density_radial(r) * inner * h;
        }
        u * 2.0 * PI / a * acc
    }

    #[test]
    fn tabulated_profile_matches_radial_convolution() {
        let p = ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap();
        let mr = MollifiedRidge::new(&p).unwrap();
        let scale = (0..200)
            .map(|i| mr.ridge(-2.0 + 0.02 * i as f64, 0)[0].abs())
            .fold(0.0, f64::max);
        for u in [0.13, 0.5, -0.77, 1.2, 1.9] {
            let got = mr.ridge(u, 0)[0];
            let want = phi2_oracle(&p, u);
            assert!((got - want).abs() < 1e-5 * scale, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn derivative_tables_are_consistent() {
        let p = ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap();
        let mr = MollifiedRidge::new(&p).unwrap();
        let h = 1e-5;
        for u in [-1.3, -0.4, 0.05, 0.9, 1.6] {
            let d = mr.ridge(u, 3);
            for m in 0..3 {
                let fd = (mr.ridge(u + h, 3)[m] - mr.ridge(u - h, 3)[m]) / (2.0 * h);
                assert!((fd - d[m + 1]).abs() < 1e-6 * d[m + 1].abs().max(1.0), "m={m} u={u}");
            }
        }
    }

    #[test]
    fn ridge_profile_is_odd_with_unit_first_moment() {
        // ∫ u Φ(u) du = ∫ u² P(|u|) du relates to total charge: 2π ∫ u Φ = 1.
        for shape in [ProfileShape::Bump, ProfileShape::Poly4] {
            let p = ChargeProfile::new(shape, 1.3).unwrap();
            let rule = GaussRule::new(80).unwrap();
            let m1 = rule.integrate(-1.3, 1.3, |u| u * p.ridge(u, 0)[0]);
            assert!((2.0 * PI * m1 - 1.0).abs() < 1e-10);
            assert_eq!(p.ridge(0.4, 0)[0], -p.ridge(-0.4, 0)[0]);
        }
    }

    #[test]
    fn mollified_profile_has_unit_charge_moment() {
        let p = ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap();
        let mr = MollifiedRidge::new(&p).unwrap();
        let rule = GaussRule::new(64).unwrap();
        let m1: f64 = (0..8)
            .map(|i| {
                let a = -2.0 + 0.5 * i as f64;
                rule.integrate(a, a + 0.5, |u| u * mr.ridge(u, 0)[0])
            })
            .sum();
        assert!((2.0 * PI * m1 - 1.0).abs() < 1e-9, "{m1}");
    }
}
