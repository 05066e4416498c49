//! Finite diamond lattice around a substitutional donor.
//!
//! Coordinates are integers in units of a₀/4. Sublattice A holds the FCC
//! points (all coordinates even, sum ≡ 0 mod 4); sublattice B is A shifted
//! by (1,1,1). A-sites bond along [`BOND_VECTORS`], B-sites along their
//! negatives.

mod shells;
mod symmetry;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use shells::{classify_shells, orbit_partition, DirectionClass, ShellOrbit, SubOrbit};
pub use symmetry::{residual_group, td_group, SymOp, SymmetryGroup};

/// Silicon lattice constant in nm.
pub const SI_LATTICE_CONSTANT_NM: f64 = 0.543;

/// Integer coordinates in units of a₀/4.
pub type Coord = [i32; 3];

/// Nearest-neighbor offsets from an A-site. B-sites use the negatives.
pub const BOND_VECTORS: [Coord; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];

/// Marker for a missing neighbor in [`LatticeDomain::neighbors`].
pub const NO_NEIGHBOR: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("coordinates {0:?} are not a diamond lattice site")]
    OffLattice(Coord),
    #[error("donor {donor:?} lies outside the domain box {lo:?}..={hi:?}")]
    DonorOutside { donor: Coord, lo: Coord, hi: Coord },
    #[error("extent must be at least one cell along every axis, got {0:?}")]
    BadExtent([i32; 3]),
    #[error("the donor site was removed from the domain")]
    DonorRemoved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn of(c: Coord) -> Option<Sublattice> {
        let sum = c[0] + c[1] + c[2];
        if c.iter().all(|x| x.rem_euclid(2) == 0) && sum.rem_euclid(4) == 0 {
            Some(Sublattice::A)
        } else if c.iter().all(|x| x.rem_euclid(2) == 1) && sum.rem_euclid(4) == 3 {
            Some(Sublattice::B)
        } else {
            None
        }
    }

    /// Bond offsets leaving a site of this sublattice.
    pub fn bonds(self) -> [Coord; 4] {
        match self {
            Sublattice::A => BOND_VECTORS,
            Sublattice::B => BOND_VECTORS.map(|b| b.map(|x| -x)),
        }
    }
}

/// Maps a donor-relative site label written for the mirrored lattice
/// orientation (B-sites at odd coordinates with sum ≡ 1 mod 4) onto this
/// lattice. Labels that are already sites are returned unchanged; otherwise
/// one coordinate is negated, choosing the first axis orthogonal to `field`
/// so the site stays on the same side of the donor along the field.
pub fn resolve_site_label(rel: Coord, field: [f64; 3]) -> Option<Coord> {
    if Sublattice::of(rel).is_some() {
        return Some(rel);
    }
    let axis = (0..3).find(|&k| field[k] == 0.0)?;
    let mut m = rel;
    m[axis] = -m[axis];
    Sublattice::of(m).map(|_| m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSite {
    pub coords: Coord,
    pub sublattice: Sublattice,
    pub index: usize,
}

/// How the box is placed relative to the donor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BoxPlacement {
    /// Closed box `|c - donor| <= 2 n` per axis: n conventional cells wide and
    /// invariant under every Td operation about the donor.
    #[default]
    Centered,
    /// Half-open box `[0, 4 n)` per axis: exactly 8 n_x n_y n_z sites.
    Corner,
}

/// A finite piece of the diamond lattice with a donor site and neighbor table.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    sites: Vec<LatticeSite>,
    donor: usize,
    neighbors: Vec<[u32; 4]>,
    lookup: HashMap<Coord, usize>,
    lo: Coord,
    hi: Coord,
    lattice_constant_nm: f64,
}

/// Builds the diamond lattice inside a box of `extent` conventional cells.
///
/// Sites are ordered lexicographically by coordinates.
pub fn build_lattice(
    extent: [i32; 3],
    donor: Coord,
    placement: BoxPlacement,
) -> Result<LatticeDomain, CrystalError> {
    if extent.iter().any(|&n| n < 1) {
        return Err(CrystalError::BadExtent(extent));
    }
    if Sublattice::of(donor).is_none() {
        return Err(CrystalError::OffLattice(donor));
    }
    let (lo, hi) = match placement {
        BoxPlacement::Centered => (
            [0, 1, 2].map(|i| donor[i] - 2 * extent[i]),
            [0, 1, 2].map(|i| donor[i] + 2 * extent[i]),
        ),
        BoxPlacement::Corner => ([0; 3], extent.map(|n| 4 * n - 1)),
    };
    if (0..3).any(|i| donor[i] < lo[i] || donor[i] > hi[i]) {
        return Err(CrystalError::DonorOutside { donor, lo, hi });
    }
    let mut coords = Vec::new();
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                if Sublattice::of([x, y, z]).is_some() {
                    coords.push([x, y, z]);
                }
            }
        }
    }
    LatticeDomain::from_coords(coords, donor, lo, hi, SI_LATTICE_CONSTANT_NM)
}

impl LatticeDomain {
    fn from_coords(
        mut coords: Vec<Coord>,
        donor: Coord,
        lo: Coord,
        hi: Coord,
        lattice_constant_nm: f64,
    ) -> Result<Self, CrystalError> {
        coords.sort_unstable();
        let sites: Vec<LatticeSite> = coords
            .iter()
            .enumerate()
            .map(|(index, &c)| LatticeSite {
                coords: c,
                sublattice: Sublattice::of(c).expect("filtered lattice site"),
                index,
            })
            .collect();
        let lookup: HashMap<Coord, usize> = sites.iter().map(|s| (s.coords, s.index)).collect();
        let donor = *lookup.get(&donor).ok_or(CrystalError::DonorRemoved)?;
        let neighbors = sites
            .iter()
            .map(|s| {
                s.sublattice.bonds().map(|b| {
                    let n = [s.coords[0] + b[0], s.coords[1] + b[1], s.coords[2] + b[2]];
                    lookup.get(&n).map_or(NO_NEIGHBOR, |&j| j as u32)
                })
            })
            .collect();
        Ok(LatticeDomain {
            sites,
            donor,
            neighbors,
            lookup,
            lo,
            hi,
            lattice_constant_nm,
        })
    }

    /// Keeps only sites whose donor-relative coordinates satisfy `keep`.
    /// Bonds to removed sites become dangling.
    pub fn retain<F: Fn(Coord) -> bool>(&self, keep: F) -> Result<LatticeDomain, CrystalError> {
        let d = self.donor_coords();
        let coords = self
            .sites
            .iter()
            .map(|s| s.coords)
            .filter(|c| keep([c[0] - d[0], c[1] - d[1], c[2] - d[2]]))
            .collect();
        LatticeDomain::from_coords(coords, d, self.lo, self.hi, self.lattice_constant_nm)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[LatticeSite] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> &LatticeSite {
        &self.sites[index]
    }

    pub fn donor(&self) -> &LatticeSite {
        &self.sites[self.donor]
    }

    pub fn donor_index(&self) -> usize {
        self.donor
    }

    pub fn donor_coords(&self) -> Coord {
        self.sites[self.donor].coords
    }

    /// Neighbor indices in bond order of the site's sublattice, [`NO_NEIGHBOR`] where absent.
    pub fn neighbors(&self, index: usize) -> [u32; 4] {
        self.neighbors[index]
    }

    pub fn neighbor_table(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    pub fn index_of(&self, coords: Coord) -> Option<usize> {
        self.lookup.get(&coords).copied()
    }

    /// Index of the site at donor-relative coordinates.
    pub fn index_of_relative(&self, rel: Coord) -> Option<usize> {
        let d = self.donor_coords();
        self.index_of([rel[0] + d[0], rel[1] + d[1], rel[2] + d[2]])
    }

    pub fn relative(&self, index: usize) -> Coord {
        let c = self.sites[index].coords;
        let d = self.donor_coords();
        [c[0] - d[0], c[1] - d[1], c[2] - d[2]]
    }

    /// Donor-relative position in nm.
    pub fn position_nm(&self, index: usize) -> [f64; 3] {
        let q = self.lattice_constant_nm / 4.0;
        self.relative(index).map(|x| x as f64 * q)
    }

    pub fn distance_nm(&self, index: usize) -> f64 {
        let p = self.position_nm(index);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    pub fn lattice_constant_nm(&self) -> f64 {
        self.lattice_constant_nm
    }

    /// Inclusive box bounds in a₀/4 units.
    pub fn bounds(&self) -> (Coord, Coord) {
        (self.lo, self.hi)
    }

    /// Distance from the donor to the nearest box face, in nm.
    pub fn inradius_nm(&self) -> f64 {
        let d = self.donor_coords();
        let m = (0..3)
            .map(|i| (d[i] - self.lo[i]).min(self.hi[i] - d[i]))
            .min()
            .unwrap_or(0);
        m as f64 * self.lattice_constant_nm / 4.0
    }

    /// Number of bonds leaving `index` that end outside the domain.
    pub fn dangling_bonds(&self, index: usize) -> usize {
        self.neighbors[index]
            .iter()
            .filter(|&&n| n == NO_NEIGHBOR)
            .count()
    }
}
