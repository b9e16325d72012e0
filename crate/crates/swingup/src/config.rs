//! Plain-text key=value run configuration with a stable fingerprint.
//!
//! One file carries both the swing simulator and the tactile synthesis
//! constants. Values round-trip losslessly (written with the shortest
//! exact f64 representation), the write order is fixed, and the FNV-1a
//! fingerprint of the canonical text tags every derived artifact.

use crate::error::{Error, Result};
use crate::simdyn::SwingConfig;
use crate::tactile::TactileConfig;
use std::collections::BTreeMap;
use std::path::Path;

/// The full configuration of a run: dynamics plus tactile synthesis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub sim: SwingConfig,
    pub tact: TactileConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.tact.validate()
    }

    /// Canonical key=value serialization; fixed order, exact f64 text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# swing-up run configuration\n");
        for (k, v) in self.entries() {
            s.push_str(&format!("{k}={v:?}\n"));
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("sim.g", self.sim.g),
            ("sim.f_max", self.sim.f_max),
            ("sim.r_grip", self.sim.r_grip),
            ("sim.l_imp", self.sim.l_imp),
            ("sim.t_stop", self.sim.t_stop),
            ("sim.omega_noise_sd", self.sim.omega_noise_sd),
            ("sim.dt", self.sim.dt),
            ("tact.alpha_t", self.tact.alpha_t),
            ("tact.alpha_r", self.tact.alpha_r),
            ("tact.k_shear", self.tact.k_shear),
            ("tact.f_hold", self.tact.f_hold),
            ("tact.f_explore", self.tact.f_explore),
            ("tact.k_theta", self.tact.k_theta),
            ("tact.eps_inertia", self.tact.eps_inertia),
            ("tact.r_grip", self.tact.r_grip),
            ("tact.shake_amplitude_deg", self.tact.shake_amplitude_deg),
            ("tact.shake_freq_hz", self.tact.shake_freq_hz),
            ("tact.frame_rate_hz", self.tact.frame_rate_hz),
            ("tact.noise_sd", self.tact.noise_sd),
            ("tact.g", self.tact.g),
        ]
    }

    /// Apply one `key=value` assignment (used by file parsing and by CLI
    /// flag overrides).
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "sim.g" => self.sim.g = value,
            "sim.f_max" => self.sim.f_max = value,
            "sim.r_grip" => self.sim.r_grip = value,
            "sim.l_imp" => self.sim.l_imp = value,
            "sim.t_stop" => self.sim.t_stop = value,
            "sim.omega_noise_sd" => self.sim.omega_noise_sd = value,
            "sim.dt" => self.sim.dt = value,
            "tact.alpha_t" => self.tact.alpha_t = value,
            "tact.alpha_r" => self.tact.alpha_r = value,
            "tact.k_shear" => self.tact.k_shear = value,
            "tact.f_hold" => self.tact.f_hold = value,
            "tact.f_explore" => self.tact.f_explore = value,
            "tact.k_theta" => self.tact.k_theta = value,
            "tact.eps_inertia" => self.tact.eps_inertia = value,
            "tact.r_grip" => self.tact.r_grip = value,
            "tact.shake_amplitude_deg" => self.tact.shake_amplitude_deg = value,
            "tact.shake_freq_hz" => self.tact.shake_freq_hz = value,
            "tact.frame_rate_hz" => self.tact.frame_rate_hz = value,
            "tact.noise_sd" => self.tact.noise_sd = value,
            "tact.g" => self.tact.g = value,
            _ => return Err(Error::InvalidArg(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(origin, format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::format(origin, format!("line {}: bad number {value:?}", lineno + 1))
            })?;
            cfg.set(key, value)?;
            seen.insert(key.to_string(), value);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// FNV-1a hash of the canonical serialization.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(self.to_text().as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
