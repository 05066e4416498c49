use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use sidonor::donor_model::Calibration;
use sidonor::hyperfine::CONSTANTS_VERSION;

use crate::output::write_atomic;

#[derive(Debug, Clone, Serialize)]
pub struct PointStats {
    pub field_mv_per_m: f64,
    pub converged: bool,
    pub cache_hit: bool,
    pub matvecs: usize,
    pub restarts: usize,
    pub energies_ev: Vec<f64>,
    pub max_residual_ev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub constants_version: String,
    pub config_hash: String,
    pub status: String,
    pub error: Option<String>,
    /// (stage, seconds) in execution order.
    pub timings: Vec<(String, f64)>,
    pub u0_ev: Option<f64>,
    pub calibration: Option<Calibration>,
    pub solver: Vec<PointStats>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str) -> Manifest {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            constants_version: CONSTANTS_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            status: "running".into(),
            error: None,
            timings: Vec::new(),
            u0_ev: None,
            calibration: None,
            solver: Vec::new(),
            warnings: Vec::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Manifest) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f(self);
        self.timings.push((name.to_string(), t.elapsed().as_secs_f64()));
        r
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let m = msg.into();
        log::warn!("{m}");
        self.warnings.push(m);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(self)?)
    }
}
