//! Flat `key = value` run configuration with dotted section names.
//!
//! ```text
//! # comment
//! physics.charge = 0.316227766
//! grid.N = 96
//! pulse.center = 3, 0, 0
//! ```
//!
//! Unknown keys are rejected. Vectors and lists are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use abraham_core::dynamics::VolterraConfig;
use abraham_core::grid::no_contamination_horizon;
use abraham_core::scenario::{Pulse, PulseTrain};
use abraham_core::soliton::V_MAX;
use abraham_core::{ChargeProfile, PhysicalConstants, ProfileShape};
use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every accepted key with its default, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("physics.charge", "0.31622776601683794"),
    ("physics.mass", "1"),
    ("profile.shape", "bump"),
    ("profile.radius", "1"),
    ("initial.position", "0, 0, 0"),
    ("initial.velocity", "0, 0, 0"),
    ("pulse.center", ""),
    ("pulse.width", "1"),
    ("pulse.amplitude", "0"),
    ("pulse.polarization", "0, 0, 1"),
    ("dynamics.dt", "0.05"),
    ("dynamics.t_final", "10"),
    ("dynamics.fixed_point_tol", "1e-10"),
    ("dynamics.max_iters", "50"),
    ("dynamics.tau_cut", ""),
    ("grid.N", "64"),
    ("grid.L", "32"),
    ("grid.dt", "0.05"),
    ("grid.t_final", "10"),
    ("grid.snapshot_times", ""),
    ("grid.sample_every", "20"),
    ("grid.enforce_horizon", "true"),
    ("propagate.time", "1"),
    ("soliton.radii", "0.5, 1.5, 3"),
    ("soliton.directions", "6"),
    ("soliton.decay_radii", "5, 50"),
    ("soliton.decay_samples", "8"),
    ("bounds.lag_range", "5, 50"),
    ("bounds.samples", "10"),
    ("diagnostics.windows", "8"),
    ("diagnostics.residual_ratio", "0.5"),
    ("diagnostics.tail_fraction", "0.1"),
    ("diagnostics.jacobian_samples", "64"),
    ("output.dir", "run"),
];

/// Parsed `key = value` pairs, defaults filled in.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    explicit: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut explicit = BTreeMap::new();
        let mut unknown = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", no + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(key, _)| *key == k) {
                unknown.push(k.to_string());
                continue;
            }
            if explicit.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, d)| (k.to_string(), d.to_string())).collect();
        values.extend(explicit.clone());
        Ok(Self { values, explicit })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text: every key with its effective value, sorted.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn is_set(&self, key: &str) -> bool {
        self.explicit.contains_key(key)
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        let s = self.raw(key);
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Config(format!("`{key}`: expected a number, got `{s}`")))
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        let s = self.raw(key);
        s.parse().map_err(|_| CliError::Config(format!("`{key}`: expected a nonnegative integer, got `{s}`")))
    }

    fn bool(&self, key: &str) -> Result<bool, CliError> {
        let s = self.raw(key);
        s.parse().map_err(|_| CliError::Config(format!("`{key}`: expected true or false, got `{s}`")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let s = self.raw(key);
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Config(format!("`{key}`: bad list entry `{}`", x.trim())))
            })
            .collect()
    }

    fn vector(&self, key: &str) -> Result<Vector3<f64>, CliError> {
        match self.list(key)?.as_slice() {
            [a, b, c] => Ok(Vector3::new(*a, *b, *c)),
            _ => Err(CliError::Config(format!("`{key}`: expected three comma-separated numbers"))),
        }
    }

    fn pair(&self, key: &str) -> Result<(f64, f64), CliError> {
        match self.list(key)?.as_slice() {
            [a, b] if a < b => Ok((*a, *b)),
            _ => Err(CliError::Config(format!("`{key}`: expected `lo, hi` with lo < hi"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSettings {
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_every: usize,
    pub enforce_horizon: bool,
}

#[derive(Debug, Clone)]
pub struct SolitonSettings {
    pub radii: Vec<f64>,
    pub directions: usize,
    pub decay_radii: (f64, f64),
    pub decay_samples: usize,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsSettings {
    pub windows: usize,
    pub residual_ratio: f64,
    pub tail_fraction: f64,
    pub jacobian_samples: usize,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub constants: PhysicalConstants,
    pub profile: ChargeProfile,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub radiation: PulseTrain,
    pub dynamics: VolterraConfig,
    pub grid: GridSettings,
    pub propagate_time: f64,
    pub soliton: SolitonSettings,
    pub bounds_lags: (f64, f64),
    pub bounds_samples: usize,
    pub diagnostics: DiagnosticsSettings,
    pub output_dir: PathBuf,
}

fn core(e: abraham_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_raw(RawConfig::read(path)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let constants = PhysicalConstants::new(raw.f64("physics.charge")?, raw.f64("physics.mass")?).map_err(core)?;
        let shape: ProfileShape = raw.raw("profile.shape").parse().map_err(core)?;
        let profile = ChargeProfile::new(shape, raw.f64("profile.radius")?).map_err(core)?;
        let velocity = raw.vector("initial.velocity")?;
        if !(velocity.norm() <= V_MAX) {
            return Err(CliError::Config(format!("|initial.velocity| = {} exceeds v_max = {V_MAX}", velocity.norm())));
        }
        let radiation = if raw.is_set("pulse.center") {
            let pulse = Pulse::new(
                raw.vector("pulse.center")?,
                raw.f64("pulse.width")?,
                raw.f64("pulse.amplitude")?,
                raw.vector("pulse.polarization")?,
            )
            .map_err(core)?;
            PulseTrain::new(vec![pulse])
        } else {
            PulseTrain::default()
        };
        let tau_cut = if raw.raw("dynamics.tau_cut").is_empty() { None } else { Some(raw.f64("dynamics.tau_cut")?) };
        let dynamics = VolterraConfig {
            dt: raw.f64("dynamics.dt")?,
            t_final: raw.f64("dynamics.t_final")?,
            fixed_point_tol: raw.f64("dynamics.fixed_point_tol")?,
            max_iters: raw.usize("dynamics.max_iters")?,
            tau_cut,
            ..VolterraConfig::default()
        };
        if !(dynamics.dt > 0.0 && dynamics.t_final >= 0.0) {
            return Err(CliError::Config("dynamics.dt must be positive and dynamics.t_final nonnegative".into()));
        }
        let grid = GridSettings {
            n: raw.usize("grid.N")?,
            length: raw.f64("grid.L")?,
            dt: raw.f64("grid.dt")?,
            t_final: raw.f64("grid.t_final")?,
            snapshot_times: raw.list("grid.snapshot_times")?,
            sample_every: raw.usize("grid.sample_every")?,
            enforce_horizon: raw.bool("grid.enforce_horizon")?,
        };
        if !(grid.dt > 0.0 && grid.t_final >= 0.0 && grid.sample_every > 0 && grid.length > 0.0 && grid.n >= 4) {
            return Err(CliError::Config("grid.N ≥ 4, grid.L, grid.dt, grid.sample_every must be positive".into()));
        }
        if let Some(t) = grid.snapshot_times.iter().find(|t| **t < 0.0 || **t > grid.t_final) {
            return Err(CliError::Config(format!("grid.snapshot_times entry {t} lies outside [0, grid.t_final]")));
        }
        let config = Self {
            constants,
            position: raw.vector("initial.position")?,
            velocity,
            radiation,
            dynamics,
            propagate_time: raw.f64("propagate.time")?,
            soliton: SolitonSettings {
                radii: raw.list("soliton.radii")?,
                directions: raw.usize("soliton.directions")?,
                decay_radii: raw.pair("soliton.decay_radii")?,
                decay_samples: raw.usize("soliton.decay_samples")?,
            },
            bounds_lags: raw.pair("bounds.lag_range")?,
            bounds_samples: raw.usize("bounds.samples")?,
            diagnostics: DiagnosticsSettings {
                windows: raw.usize("diagnostics.windows")?,
                residual_ratio: raw.f64("diagnostics.residual_ratio")?,
                tail_fraction: raw.f64("diagnostics.tail_fraction")?,
                jacobian_samples: raw.usize("diagnostics.jacobian_samples")?,
            },
            output_dir: PathBuf::from(raw.raw("output.dir")),
            profile,
            grid,
            raw,
        };
        Ok(config)
    }

    /// Rejects coupled grid runs longer than the no-contamination horizon
    /// unless `grid.enforce_horizon = false`.
    pub fn check_grid_horizon(&self) -> Result<(), CliError> {
        if self.grid.enforce_horizon && self.grid.t_final > self.horizon() {
            return Err(CliError::Config(format!(
                "grid.t_final = {} exceeds the no-contamination horizon {:.4} (set grid.enforce_horizon = false to override)",
                self.grid.t_final,
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Radius about the origin containing the particle and the pulse.
    pub fn data_extent(&self) -> f64 {
        self.radiation.extent(1e-8).max(self.position.norm() + self.profile.radius())
    }

    pub fn horizon(&self) -> f64 {
        no_contamination_horizon(self.grid.length, self.data_extent())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_listed() {
        let e = RawConfig::parse("grid.N = 8\ngrid.n = 8\nphysics.chrage = 1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("grid.n") && msg.contains("physics.chrage"), "{msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn defaults_and_overrides() {
        let raw = RawConfig::parse("# run\ngrid.N = 16 # small\ngrid.L = 12\ninitial.velocity = 0.3, 0, 0\n").unwrap();
        let c = RunConfig::from_raw(raw).unwrap();
        assert_eq!(c.grid.n, 16);
        assert_eq!(c.velocity, Vector3::new(0.3, 0.0, 0.0));
        assert!(c.radiation.pulses.is_empty());
        assert_eq!(c.dynamics.tau_cut, None);
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = RawConfig::parse("grid.N = 16\ngrid.L = 12\n").unwrap();
        let b = RawConfig::parse("\n  grid.L=12\ngrid.N   = 16 # same\n").unwrap();
        let c = RawConfig::parse("grid.N = 16\ngrid.L = 13\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn horizon_is_enforced_at_load() {
        let raw = RawConfig::parse("grid.L = 16\ngrid.t_final = 20\n").unwrap();
        let c = RunConfig::from_raw(raw).unwrap();
        assert_eq!(c.check_grid_horizon().unwrap_err().exit_code(), 2);
        let raw = RawConfig::parse("grid.L = 16\ngrid.t_final = 20\ngrid.enforce_horizon = false\n").unwrap();
        assert!(RunConfig::from_raw(raw).unwrap().check_grid_horizon().is_ok());
    }

    #[test]
    fn malformed_values_are_config_errors() {
        for text in ["grid.N = -3", "initial.velocity = 1, 2", "initial.velocity = 0.999, 0, 0", "profile.shape = cube", "x"] {
            let r = RawConfig::parse(text).and_then(RunConfig::from_raw);
            assert_eq!(r.unwrap_err().exit_code(), 2, "{text}");
        }
    }
}
