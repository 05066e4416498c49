//! Eigenstate cache keyed by (config hash, field). Amplitudes are stored as
//! raw little-endian f64 with a JSON sidecar holding everything else.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sidonor::eigensolver::{DonorState, SolveOutcome};

use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    version: String,
    config_hash: String,
    field_mv_per_m: f64,
    dim: usize,
    energies: Vec<f64>,
    residuals: Vec<f64>,
    clusters: Vec<usize>,
    converged: bool,
    matvecs: usize,
    restarts: usize,
    log: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
    hash: String,
    enabled: bool,
}

impl Cache {
    pub fn new(out: &Path, hash: &str, enabled: bool) -> Cache {
        Cache {
            dir: out.join("cache").join(&hash[..16]),
            hash: hash.to_string(),
            enabled,
        }
    }

    fn stem(e: f64) -> String {
        // bit pattern keeps 0.1 and 0.1000000001 apart
        format!("field_{:016x}", e.to_bits())
    }

    pub fn load_state(&self, e: f64) -> Option<SolveOutcome<f64>> {
        if !self.enabled {
            return None;
        }
        let stem = Self::stem(e);
        let side: Sidecar = serde_json::from_slice(&fs::read(self.dir.join(format!("{stem}.json"))).ok()?).ok()?;
        if side.config_hash != self.hash || side.field_mv_per_m.to_bits() != e.to_bits() {
            log::warn!("cache entry {stem} belongs to another run; ignoring");
            return None;
        }
        let bytes = fs::read(self.dir.join(format!("{stem}.bin"))).ok()?;
        let n = side.energies.len();
        if bytes.len() != n * side.dim * 8 || side.residuals.len() != n || side.clusters.len() != n {
            log::warn!("cache entry {stem} is truncated; ignoring");
            return None;
        }
        let amps: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let states = (0..n)
            .map(|i| DonorState {
                energy: side.energies[i],
                amplitudes: amps[i * side.dim..(i + 1) * side.dim].to_vec(),
                residual: side.residuals[i],
                cluster: side.clusters[i],
            })
            .collect();
        Some(SolveOutcome {
            states,
            converged: side.converged,
            matvecs: side.matvecs,
            restarts: side.restarts,
            log: side.log,
        })
    }

    pub fn store_state(&self, e: f64, out: &SolveOutcome<f64>) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        let stem = Self::stem(e);
        let dim = out.states.first().map_or(0, |s| s.amplitudes.len());
        let mut bytes = Vec::with_capacity(out.states.len() * dim * 8);
        for s in &out.states {
            for a in &s.amplitudes {
                bytes.extend_from_slice(&a.to_le_bytes());
            }
        }
        let side = Sidecar {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.hash.clone(),
            field_mv_per_m: e,
            dim,
            energies: out.states.iter().map(|s| s.energy).collect(),
            residuals: out.states.iter().map(|s| s.residual).collect(),
            clusters: out.states.iter().map(|s| s.cluster).collect(),
            converged: out.converged,
            matvecs: out.matvecs,
            restarts: out.restarts,
            log: out.log.clone(),
        };
        // amplitudes first so a sidecar never points at a missing array
        write_atomic(&self.dir.join(format!("{stem}.bin")), &bytes)?;
        write_atomic(&self.dir.join(format!("{stem}.json")), &serde_json::to_vec_pretty(&side)?)
            .context("writing cache sidecar")
    }

    pub fn load_json<T: DeserializeOwned>(&self, name: &str) -> Option<T> {
        if !self.enabled {
            return None;
        }
        serde_json::from_slice(&fs::read(self.dir.join(name)).ok()?).ok()
    }

    pub fn store_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        write_atomic(&self.dir.join(name), &serde_json::to_vec_pretty(value)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome() -> SolveOutcome<f64> {
        SolveOutcome {
            states: vec![
                DonorState {
                    energy: 1.0,
                    amplitudes: vec![0.6, 0.8, 0.0],
                    residual: 1e-10,
                    cluster: 0,
                },
                DonorState {
                    energy: 1.5,
                    amplitudes: vec![0.0, 0.0, -1.0],
                    residual: 2e-10,
                    cluster: 1,
                },
            ],
            converged: true,
            matvecs: 42,
            restarts: 3,
            log: vec!["line".into()],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let d = tempfile::tempdir().unwrap();
        let h = "ab".repeat(32);
        let c = Cache::new(d.path(), &h, true);
        assert!(c.load_state(0.5).is_none());
        c.store_state(0.5, &outcome()).unwrap();
        let back = c.load_state(0.5).unwrap();
        assert_eq!(back.states, outcome().states);
        assert_eq!((back.matvecs, back.restarts, back.log), (42, 3, vec!["line".to_string()]));
        assert!(c.load_state(0.5000001).is_none());
        let other = Cache::new(d.path(), &format!("{}{}", &h[..16], "cd".repeat(24)), true);
        assert!(other.load_state(0.5).is_none());
    }

    #[test]
    fn disabled_cache_is_inert() {
        let d = tempfile::tempdir().unwrap();
        let c = Cache::new(d.path(), &"0".repeat(64), false);
        c.store_state(0.0, &outcome()).unwrap();
        assert!(c.load_state(0.0).is_none());
        assert!(!d.path().join("cache").exists());
    }
}
