use serde::{Deserialize, Serialize};

/// Identifier of the constant set below; written into run manifests.
pub const CONSTANTS_VERSION: &str = "codata2018-si29-v1";

/// Physical constants entering the hyperfine couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Free-electron g factor (magnitude).
    pub g_electron: f64,
    /// Bohr magneton, J/T.
    pub bohr_magneton: f64,
    /// |γ_n| / 2π of ²⁹Si, Hz/T.
    pub gamma_si29_hz_per_t: f64,
    /// μ0 / 4π, T·m/A.
    pub mu0_over_4pi: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            g_electron: 2.002_319_304_362_56,
            bohr_magneton: 9.274_010_078_3e-24,
            gamma_si29_hz_per_t: 8.465_49e6,
            mu0_over_4pi: 1e-7,
        }
    }
}

impl PhysicalConstants {
    /// (μ0/4π) g_e μ_B |γ_n|/2π in kHz·nm³: the coupling of a unit
    /// point density at distance 1 nm.
    pub fn coupling_khz_nm3(&self) -> f64 {
        let hz_m3 = self.mu0_over_4pi * self.g_electron * self.bohr_magneton * self.gamma_si29_hz_per_t;
        hz_m3 * 1e27 * 1e-3
    }
}
