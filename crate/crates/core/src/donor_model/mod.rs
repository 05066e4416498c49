//! Tight-binding model of a substitutional donor in silicon.

mod basis;
pub mod bulk;
mod calibrate;
mod hamiltonian;
mod params;
mod potential;
mod rotation;
mod slater_koster;

use thiserror::Error;

pub use basis::{Orbital, OrbitalBasis};
pub use calibrate::{
    auto_shift, calibrate_u0, solve_donor, Calibration, CalibrationError, CalibrationOptions,
};
pub use bulk::{band_edges, band_energies, BandEdges};
pub use hamiltonian::{assemble, AssemblyOptions, TbHamiltonian};
pub use params::{Channel, ParamError, SkParameters, SI_SP3D5S_CSV, SI_SP3S_CSV};
pub use potential::{
    donor_potential, field_potential, Axis, Interface, PotentialSpec, SignedAxis, COULOMB_EV_NM,
    EV_PER_MV_PER_M_NM, SI_DIELECTRIC,
};
pub use rotation::{apply_symmetry, orbital_rotation};
pub use slater_koster::{hopping, hopping_block};

use crate::crystal::{Coord, CrystalError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("basis {requested} does not match the {parameters} parameter set")]
    BasisMismatch {
        requested: &'static str,
        parameters: &'static str,
    },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error("domain is not symmetric: image {0:?} missing")]
    AsymmetricDomain(Coord),
}
