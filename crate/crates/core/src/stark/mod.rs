//! Field sweeps, Stark fits and the interface-confinement scan.

mod fit;
mod interface;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{evaluate_fit, fit_stark, propagate_field_uncertainty, StarkFit};
pub use interface::{interface_scan, InterfacePoint};
pub use sweep::{
    merge_resolvable, probe_orbits, sweep, FieldPoint, Merge, ProbeOrbit, Scenario, Sweep,
    SweepSettings,
};

use crate::crystal::Coord;
use crate::donor_model::ModelError;
use crate::eigensolver::EigenError;
use crate::hyperfine::HyperfineError;

/// Relative merge tolerance between strict orbits.
pub const DEFAULT_MERGE_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum StarkError {
    #[error("series needs strictly increasing fields including 0, got {0:?}")]
    BadFields(Vec<f64>),
    #[error("{0} samples do not determine both coefficients")]
    RankDeficient(usize),
    #[error("field direction must be a nonzero finite vector, got {0:?}")]
    BadDirection([f64; 3]),
    #[error("interface scan needs an interface in the potential")]
    NoInterface,
    #[error("zero-field point did not converge; the sweep has no reference")]
    NoReference,
    #[error(transparent)]
    Solver(#[from] EigenError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hyperfine(#[from] HyperfineError),
}

/// Coupling component reported per probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    Beta,
    Bxx,
    Byy,
    Bzz,
    Bxy,
    Bxz,
    Byz,
}

impl Component {
    /// Same order as [`crate::hyperfine::HyperfineRecord::components`].
    pub const ALL: [Component; 7] = [
        Component::Beta,
        Component::Bxx,
        Component::Byy,
        Component::Bzz,
        Component::Bxy,
        Component::Bxz,
        Component::Byz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::Beta => "beta",
            Component::Bxx => "B_xx",
            Component::Byy => "B_yy",
            Component::Bzz => "B_zz",
            Component::Bxy => "B_xy",
            Component::Bxz => "B_xz",
            Component::Byz => "B_yz",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        let t: String = s.trim().chars().filter(|&c| c != '_').collect();
        match t.to_lowercase().as_str() {
            "beta" | "β" | "a" => Some(Component::Beta),
            "bxx" => Some(Component::Bxx),
            "byy" => Some(Component::Byy),
            "bzz" => Some(Component::Bzz),
            "bxy" | "byx" => Some(Component::Bxy),
            "bxz" | "bzx" => Some(Component::Bxz),
            "byz" | "bzy" => Some(Component::Byz),
            _ => None,
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One component of one orbit across the sweep, kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkSeries {
    pub orbit_id: usize,
    pub site: Coord,
    pub component: Component,
    /// (E in MV/m, value in kHz)
    pub samples: Vec<(f64, f64)>,
}

impl StarkSeries {
    pub fn validate(&self) -> Result<(), StarkError> {
        let fields: Vec<f64> = self.samples.iter().map(|s| s.0).collect();
        let increasing = fields.windows(2).all(|w| w[0] < w[1]);
        if !increasing || !fields.contains(&0.0) || fields.iter().any(|e| !e.is_finite()) {
            return Err(StarkError::BadFields(fields));
        }
        Ok(())
    }

    /// Value at E = 0.
    pub fn alpha0(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.0 == 0.0).map(|s| s.1)
    }

    /// (α − α0)/α0 per sample; absolute change when α0 is zero.
    pub fn relative_change(&self) -> Vec<(f64, f64)> {
        let a0 = self.alpha0().unwrap_or(0.0);
        let pre = if a0 == 0.0 { 1.0 } else { a0 };
        self.samples.iter().map(|&(e, v)| (e, (v - a0) / pre)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_labels_round_trip() {
        for c in Component::ALL {
            assert_eq!(Component::parse(c.label()), Some(c));
        }
        assert_eq!(Component::parse("Bzz"), Some(Component::Bzz));
        assert_eq!(Component::parse("β"), Some(Component::Beta));
        assert_eq!(Component::parse("B_qq"), None);
    }

    #[test]
    fn series_validation() {
        let mut s = StarkSeries {
            orbit_id: 0,
            site: [0, 0, 4],
            component: Component::Beta,
            samples: vec![(0.0, 1.0), (1.0, 2.0)],
        };
        assert!(s.validate().is_ok());
        assert_eq!(s.relative_change()[1], (1.0, 1.0));
        s.samples = vec![(1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(s.validate(), Err(StarkError::BadFields(_))));
        s.samples = vec![(0.0, 1.0), (0.0, 2.0)];
        assert!(s.validate().is_err());
    }
}
