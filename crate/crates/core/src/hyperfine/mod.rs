//! Hyperfine couplings of ²⁹Si probe nuclei to the donor electron: the
//! Fermi contact term β and the anisotropic dipolar tensor B.
//!
//! The tight-binding state is coarse-grained to one probability per site.
//! The contact density at a probe is that probability over the atomic volume
//! a₀³/8 times the bunching factor η. The dipolar tensor treats every other
//! site as a point charge; the probe's own on-site density is left out.

mod constants;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constants::{PhysicalConstants, CONSTANTS_VERSION};

use crate::crystal::{Coord, LatticeDomain, SymOp};
use crate::eigensolver::DonorState;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperfineError {
    #[error("probe site {0:?} is not in the domain")]
    ProbeOutside(Coord),
    #[error("the donor site is not a ²⁹Si probe")]
    ProbeIsDonor,
    #[error("density has {got} entries, domain has {want} sites")]
    DensityLength { got: usize, want: usize },
    #[error("calibration anchor {site:?} has zero contact density")]
    DeadAnchor { site: Coord },
}

/// Orbital-summed probability per lattice site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDensity {
    pub p: Vec<f64>,
}

impl SiteDensity {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// p_m = Σ_orbitals |c(m, orbital)|².
pub fn site_density<T: Real>(state: &DonorState<T>, orbitals_per_site: usize) -> SiteDensity {
    SiteDensity {
        p: state
            .amplitudes
            .chunks_exact(orbitals_per_site)
            .map(|c| c.iter().map(|&a| (a * a).to_f64_lossy()).sum())
            .collect(),
    }
}

/// Average density of a degenerate cluster. Unlike a single member, it does
/// not depend on the basis chosen inside the cluster subspace.
pub fn cluster_density<T: Real>(states: &[DonorState<T>], orbitals_per_site: usize) -> SiteDensity {
    assert!(!states.is_empty(), "cluster needs at least one state");
    let mut p = site_density(&states[0], orbitals_per_site).p;
    for s in &states[1..] {
        for (a, b) in p.iter_mut().zip(site_density(s, orbitals_per_site).p) {
            *a += b;
        }
    }
    let w = 1.0 / states.len() as f64;
    p.iter_mut().for_each(|x| *x *= w);
    SiteDensity { p }
}

fn probe_index(domain: &LatticeDomain, density: &SiteDensity, rel: Coord) -> Result<usize, HyperfineError> {
    if density.p.len() != domain.len() {
        return Err(HyperfineError::DensityLength {
            got: density.p.len(),
            want: domain.len(),
        });
    }
    if rel == [0, 0, 0] {
        return Err(HyperfineError::ProbeIsDonor);
    }
    domain
        .index_of_relative(rel)
        .ok_or(HyperfineError::ProbeOutside(rel))
}

/// Uncalibrated contact coupling in kHz: (8π/3) K η p / Ω.
pub fn contact_coupling(
    domain: &LatticeDomain,
    density: &SiteDensity,
    probe: Coord,
    constants: &PhysicalConstants,
    eta: f64,
) -> Result<f64, HyperfineError> {
    let i = probe_index(domain, density, probe)?;
    let omega = domain.lattice_constant_nm().powi(3) / 8.0;
    Ok(8.0 * std::f64::consts::PI / 3.0 * constants.coupling_khz_nm3() * eta * density.p[i] / omega)
}

/// Dipolar tensor in kHz, summed over every site but the probe:
/// K Σ p_m (3 r_i r_j − r² δ_ij) / r⁵ with r = R_m − R_probe.
pub fn dipolar_tensor(
    domain: &LatticeDomain,
    density: &SiteDensity,
    probe: Coord,
    constants: &PhysicalConstants,
) -> Result<[[f64; 3]; 3], HyperfineError> {
    let i = probe_index(domain, density, probe)?;
    let q = domain.lattice_constant_nm() / 4.0;
    // xx, yy, zz, xy, xz, yz
    let mut acc = [0.0f64; 6];
    for (m, &pm) in density.p.iter().enumerate() {
        if m == i || pm == 0.0 {
            continue;
        }
        let rel = domain.relative(m);
        let r = [0, 1, 2].map(|k| (rel[k] - probe[k]) as f64 * q);
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        let w = pm / (r2 * r2 * r2.sqrt());
        // diagonal terms built as differences so each summand is traceless
        acc[0] += w * (2.0 * r[0] * r[0] - r[1] * r[1] - r[2] * r[2]);
        acc[1] += w * (2.0 * r[1] * r[1] - r[0] * r[0] - r[2] * r[2]);
        acc[2] += w * (2.0 * r[2] * r[2] - r[0] * r[0] - r[1] * r[1]);
        acc[3] += w * 3.0 * r[0] * r[1];
        acc[4] += w * 3.0 * r[0] * r[2];
        acc[5] += w * 3.0 * r[1] * r[2];
    }
    let k = constants.coupling_khz_nm3();
    let [xx, yy, zz, xy, xz, yz] = acc.map(|a| a * k);
    // remove the rounding residue of the trace
    let t = (xx + yy + zz) / 3.0;
    Ok([
        [xx - t, xy, xz],
        [xy, yy - t, yz],
        [xz, yz, zz - t],
    ])
}

/// g B gᵀ: the tensor at g·s given the tensor at s.
pub fn transport(b: &[[f64; 3]; 3], g: &SymOp) -> [[f64; 3]; 3] {
    let m = g.matrix();
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += m[i][k] as f64 * b[k][l] * m[j][l] as f64;
                }
            }
            *v = s;
        }
    }
    out
}

/// Frobenius norm.
pub fn tensor_norm(b: &[[f64; 3]; 3]) -> f64 {
    b.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Measured zero-field contact coupling at a reference probe. β is scaled
/// so the anchor reproduces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub site: Coord,
    pub khz: f64,
}

impl Anchor {
    /// Scale factor taking raw β to calibrated β.
    pub fn scale(
        &self,
        domain: &LatticeDomain,
        zero_field: &SiteDensity,
        constants: &PhysicalConstants,
        eta: f64,
    ) -> Result<f64, HyperfineError> {
        let raw = contact_coupling(domain, zero_field, self.site, constants, eta)?;
        if raw == 0.0 {
            return Err(HyperfineError::DeadAnchor { site: self.site });
        }
        Ok(self.khz / raw)
    }
}

/// No dipolar integral over the probe's own p/d density.
pub const FLAG_ONSITE_EXCLUDED: &str = "onsite-excluded";
/// The probe lies in the outer half of the box, where truncation matters.
pub const FLAG_NEAR_BOUNDARY: &str = "near-boundary";

/// One probe at one field, in the per-probe CSV layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineRecord {
    pub site: Coord,
    pub field_mv_per_m: [f64; 3],
    pub beta_khz: f64,
    pub b: [[f64; 3]; 3],
    pub calibration_scale: f64,
    pub flags: Vec<String>,
}

impl HyperfineRecord {
    /// Contact and dipolar couplings at `probe`, with β multiplied by `scale`.
    pub fn evaluate(
        domain: &LatticeDomain,
        density: &SiteDensity,
        probe: Coord,
        field_mv_per_m: [f64; 3],
        constants: &PhysicalConstants,
        eta: f64,
        scale: f64,
    ) -> Result<HyperfineRecord, HyperfineError> {
        let beta = contact_coupling(domain, density, probe, constants, eta)? * scale;
        let b = dipolar_tensor(domain, density, probe, constants)?;
        let mut flags = vec![FLAG_ONSITE_EXCLUDED.to_string()];
        let q = domain.lattice_constant_nm() / 4.0;
        let r = probe.iter().map(|&c| (c as f64 * q).powi(2)).sum::<f64>().sqrt();
        if r > 0.5 * domain.inradius_nm() {
            flags.push(FLAG_NEAR_BOUNDARY.to_string());
        }
        Ok(HyperfineRecord {
            site: probe,
            field_mv_per_m,
            beta_khz: beta,
            b,
            calibration_scale: scale,
            flags,
        })
    }

    /// β, B_xx, B_yy, B_zz, B_xy, B_xz, B_yz.
    pub fn components(&self) -> [f64; 7] {
        let b = &self.b;
        [self.beta_khz, b[0][0], b[1][1], b[2][2], b[0][1], b[0][2], b[1][2]]
    }
}
