use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orbital {
    S,
    Px,
    Py,
    Pz,
    Dyz,
    Dzx,
    Dxy,
    Dx2y2,
    Dz2,
    SStar,
}

impl Orbital {
    pub fn angular_momentum(self) -> u8 {
        match self {
            Orbital::S | Orbital::SStar => 0,
            Orbital::Px | Orbital::Py | Orbital::Pz => 1,
            _ => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Orbital::S => "s",
            Orbital::Px => "px",
            Orbital::Py => "py",
            Orbital::Pz => "pz",
            Orbital::Dyz => "dyz",
            Orbital::Dzx => "dzx",
            Orbital::Dxy => "dxy",
            Orbital::Dx2y2 => "dx2-y2",
            Orbital::Dz2 => "dz2",
            Orbital::SStar => "s*",
        }
    }
}

/// Spatial orbitals carried on every atom. Spin is not doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitalBasis {
    Sp3s,
    Sp3d5s,
}

const SP3S: [Orbital; 5] = [
    Orbital::S,
    Orbital::Px,
    Orbital::Py,
    Orbital::Pz,
    Orbital::SStar,
];
const SP3D5S: [Orbital; 10] = [
    Orbital::S,
    Orbital::Px,
    Orbital::Py,
    Orbital::Pz,
    Orbital::Dyz,
    Orbital::Dzx,
    Orbital::Dxy,
    Orbital::Dx2y2,
    Orbital::Dz2,
    Orbital::SStar,
];

impl OrbitalBasis {
    pub fn orbitals(self) -> &'static [Orbital] {
        match self {
            OrbitalBasis::Sp3s => &SP3S,
            OrbitalBasis::Sp3d5s => &SP3D5S,
        }
    }

    pub fn orbitals_per_site(self) -> usize {
        self.orbitals().len()
    }

    pub fn labels(self) -> Vec<&'static str> {
        self.orbitals().iter().map(|o| o.label()).collect()
    }

    pub fn index_of(self, orb: Orbital) -> Option<usize> {
        self.orbitals().iter().position(|&o| o == orb)
    }

    pub fn name(self) -> &'static str {
        match self {
            OrbitalBasis::Sp3s => "sp3s*",
            OrbitalBasis::Sp3d5s => "sp3d5s*",
        }
    }

    pub fn parse(s: &str) -> Option<OrbitalBasis> {
        match s.trim() {
            "sp3s*" | "sp3s" => Some(OrbitalBasis::Sp3s),
            "sp3d5s*" | "sp3d5s" => Some(OrbitalBasis::Sp3d5s),
            _ => None,
        }
    }
}
