//! Slater-Koster parameter sets.
//!
//! File format: one `channel,value` row per line, `#` starts a comment, an
//! optional `channel,value_eV` header. Energies are in eV; the
//! `lattice_constant_nm` row is in nm. The basis is sp3d5s* when any
//! d-orbital channel is present, sp3s* otherwise; every channel of the
//! inferred basis must be given exactly once.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::basis::OrbitalBasis;
use crate::scalar::Real;

/// Published sp3d5s* nearest-neighbor silicon set without spin-orbit.
pub const SI_SP3D5S_CSV: &str = include_str!("../../data/si_sp3d5s.csv");
/// Vogl-type sp3s* silicon set, used for fast runs.
pub const SI_SP3S_CSV: &str = include_str!("../../data/si_sp3s.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    OnsiteS,
    OnsiteP,
    OnsiteD,
    OnsiteSStar,
    SsSigma,
    SStarSStarSigma,
    SSStarSigma,
    SpSigma,
    SStarPSigma,
    SdSigma,
    SStarDSigma,
    PpSigma,
    PpPi,
    PdSigma,
    PdPi,
    DdSigma,
    DdPi,
    DdDelta,
    LatticeConstant,
}

const SP3S_CHANNELS: [Channel; 11] = [
    Channel::OnsiteS,
    Channel::OnsiteP,
    Channel::OnsiteSStar,
    Channel::SsSigma,
    Channel::SStarSStarSigma,
    Channel::SSStarSigma,
    Channel::SpSigma,
    Channel::SStarPSigma,
    Channel::PpSigma,
    Channel::PpPi,
    Channel::LatticeConstant,
];

const D_CHANNELS: [Channel; 8] = [
    Channel::OnsiteD,
    Channel::SdSigma,
    Channel::SStarDSigma,
    Channel::PdSigma,
    Channel::PdPi,
    Channel::DdSigma,
    Channel::DdPi,
    Channel::DdDelta,
];

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::OnsiteS => "onsite_s",
            Channel::OnsiteP => "onsite_p",
            Channel::OnsiteD => "onsite_d",
            Channel::OnsiteSStar => "onsite_sstar",
            Channel::SsSigma => "ss_sigma",
            Channel::SStarSStarSigma => "sstar_sstar_sigma",
            Channel::SSStarSigma => "s_sstar_sigma",
            Channel::SpSigma => "sp_sigma",
            Channel::SStarPSigma => "sstar_p_sigma",
            Channel::SdSigma => "sd_sigma",
            Channel::SStarDSigma => "sstar_d_sigma",
            Channel::PpSigma => "pp_sigma",
            Channel::PpPi => "pp_pi",
            Channel::PdSigma => "pd_sigma",
            Channel::PdPi => "pd_pi",
            Channel::DdSigma => "dd_sigma",
            Channel::DdPi => "dd_pi",
            Channel::DdDelta => "dd_delta",
            Channel::LatticeConstant => "lattice_constant_nm",
        }
    }

    pub fn from_label(s: &str) -> Option<Channel> {
        SP3S_CHANNELS
            .iter()
            .chain(D_CHANNELS.iter())
            .copied()
            .find(|c| c.label() == s)
    }

    fn is_d(self) -> bool {
        D_CHANNELS.contains(&self)
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("cannot read parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed row `{text}` (expected `channel,value`)")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown channel `{label}`")]
    UnknownChannel { line: usize, label: String },
    #[error("line {line}: channel `{label}` has non-finite value")]
    NonFinite { line: usize, label: String },
    #[error("line {line}: channel `{label}` given twice")]
    Duplicate { line: usize, label: String },
    #[error("missing channel `{0}` required by the {1} basis")]
    Missing(&'static str, &'static str),
}

/// Validated two-center parameter set for a homonuclear diamond crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkParameters<T> {
    basis: OrbitalBasis,
    values: BTreeMap<Channel, T>,
}

impl<T: Real> SkParameters<T> {
    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut values: BTreeMap<Channel, T> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut cols = body.split(',').map(str::trim);
            let (label, value) = match (cols.next(), cols.next(), cols.next()) {
                (Some(l), Some(v), None) if !l.is_empty() => (l, v),
                _ => {
                    return Err(ParamError::Malformed {
                        line,
                        text: raw.to_string(),
                    })
                }
            };
            if label == "channel" {
                continue;
            }
            let channel = Channel::from_label(label).ok_or_else(|| ParamError::UnknownChannel {
                line,
                label: label.to_string(),
            })?;
            let v: f64 = value.parse().map_err(|_| ParamError::Malformed {
                line,
                text: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(ParamError::NonFinite {
                    line,
                    label: label.to_string(),
                });
            }
            if values.insert(channel, T::of(v)).is_some() {
                return Err(ParamError::Duplicate {
                    line,
                    label: label.to_string(),
                });
            }
        }
        let basis = if values.keys().any(|c| c.is_d()) {
            OrbitalBasis::Sp3d5s
        } else {
            OrbitalBasis::Sp3s
        };
        let required = SP3S_CHANNELS.iter().chain(match basis {
            OrbitalBasis::Sp3d5s => D_CHANNELS.iter(),
            OrbitalBasis::Sp3s => [].iter(),
        });
        for c in required {
            if !values.contains_key(c) {
                return Err(ParamError::Missing(c.label(), basis.name()));
            }
        }
        Ok(SkParameters { basis, values })
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn silicon_sp3d5s() -> Self {
        Self::parse(SI_SP3D5S_CSV).expect("shipped parameter file is valid")
    }

    pub fn silicon_sp3s() -> Self {
        Self::parse(SI_SP3S_CSV).expect("shipped parameter file is valid")
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    /// Value of a channel; zero for channels the basis does not use.
    pub fn get(&self, c: Channel) -> T {
        self.values.get(&c).copied().unwrap_or_else(T::zero)
    }

    pub fn lattice_constant_nm(&self) -> T {
        self.get(Channel::LatticeConstant)
    }

    /// Rows in file order, for writing the set back out.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,value_eV\n");
        for (c, v) in &self.values {
            out.push_str(&format!("{},{}\n", c.label(), v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_sets_load() {
        let p = SkParameters::<f64>::silicon_sp3d5s();
        assert_eq!(p.basis().orbitals_per_site(), 10);
        assert_eq!(p.basis().labels().len(), 10);
        let p = SkParameters::<f64>::silicon_sp3s();
        assert_eq!(p.basis().orbitals_per_site(), 5);
        assert!((p.lattice_constant_nm() - 0.543).abs() < 1e-12);
    }

    #[test]
    fn missing_channel_is_named() {
        let text: String = SI_SP3S_CSV
            .lines()
            .filter(|l| !l.starts_with("ss_sigma"))
            .collect::<Vec<_>>()
            .join("\n");
        let err = SkParameters::<f64>::parse(&text).unwrap_err();
        assert!(matches!(err, ParamError::Missing("ss_sigma", _)), "{err}");
        assert!(err.to_string().contains("ss_sigma"));
    }

    #[test]
    fn bad_rows_report_line() {
        let err = SkParameters::<f64>::parse("onsite_s,-4.2\npp_pi\n").unwrap_err();
        assert!(matches!(err, ParamError::Malformed { line: 2, .. }));
        let err = SkParameters::<f64>::parse("onsite_s,NaN\n").unwrap_err();
        assert!(matches!(err, ParamError::NonFinite { line: 1, .. }));
        let err = SkParameters::<f64>::parse("onsite_x,1\n").unwrap_err();
        assert!(matches!(err, ParamError::UnknownChannel { line: 1, .. }));
        let err = SkParameters::<f64>::parse("onsite_s,1\nonsite_s,2\n").unwrap_err();
        assert!(matches!(err, ParamError::Duplicate { line: 2, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let p = SkParameters::<f64>::silicon_sp3d5s();
        let q = SkParameters::<f64>::parse(&p.to_csv()).unwrap();
        assert_eq!(p, q);
    }
}
