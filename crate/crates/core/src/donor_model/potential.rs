//! Diagonal potentials: screened donor Coulomb well with a central-cell
//! cutoff, and a uniform applied field.
//!
//! Sign convention: the field term is `+e E·r` with `r` measured from the
//! donor, so a field along +y raises the electron's potential energy at
//! positive y and pushes the electron towards -y.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// e²/(4πε₀) in eV·nm.
pub const COULOMB_EV_NM: f64 = 1.439_964_548;
/// Static dielectric constant of silicon.
pub const SI_DIELECTRIC: f64 = 11.9;
/// Energy in eV of one MV/m across one nm.
pub const EV_PER_MV_PER_M_NM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Unit vector along a Cartesian axis with a sign, e.g. `-y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedAxis {
    pub axis: Axis,
    pub positive: bool,
}

impl SignedAxis {
    pub fn parse(s: &str) -> Option<SignedAxis> {
        let s = s.trim();
        let (positive, rest) = match s.as_bytes().first()? {
            b'-' => (false, &s[1..]),
            b'+' => (true, &s[1..]),
            _ => (true, s),
        };
        let axis = match rest {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            _ => return None,
        };
        Some(SignedAxis { axis, positive })
    }

    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn vector(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.axis.index()] = self.sign();
        v
    }
}

impl std::fmt::Display for SignedAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = match self.axis {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        write!(f, "{}{}", if self.positive { "+" } else { "-" }, a)
    }
}

/// Hard-wall interface: the plane at `depth_nm` from the donor along
/// `normal` (pointing from the donor into the barrier). Sites beyond it are
/// removed from the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub normal: SignedAxis,
    pub depth_nm: f64,
}

impl Interface {
    /// Whether a donor-relative position (nm) lies on the crystal side.
    pub fn keeps(&self, rel_nm: [f64; 3]) -> bool {
        rel_nm[self.normal.axis.index()] * self.normal.sign() <= self.depth_nm + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec<T> {
    /// Central-cell cutoff: the donor-site potential is -u0.
    pub u0_ev: T,
    pub dielectric: T,
    pub field_mv_per_m: [T; 3],
    pub interface: Option<Interface>,
    /// Drop the Coulomb tail (r > 0), keeping only the cutoff site.
    pub coulomb_tail: bool,
}

impl<T: Real> PotentialSpec<T> {
    pub fn silicon(u0_ev: T) -> Self {
        PotentialSpec {
            u0_ev,
            dielectric: T::of(SI_DIELECTRIC),
            field_mv_per_m: [T::zero(); 3],
            interface: None,
            coulomb_tail: true,
        }
    }

    pub fn with_field(mut self, field_mv_per_m: [T; 3]) -> Self {
        self.field_mv_per_m = field_mv_per_m;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dielectric > T::one()) {
            return Err(format!(
                "dielectric constant must exceed 1, got {}",
                self.dielectric
            ));
        }
        if !self.u0_ev.is_finite() || self.field_mv_per_m.iter().any(|e| !e.is_finite()) {
            return Err("potential parameters must be finite".into());
        }
        if let Some(i) = self.interface {
            if !(i.depth_nm > 0.0) {
                return Err(format!(
                    "interface depth must be positive, got {}",
                    i.depth_nm
                ));
            }
        }
        Ok(())
    }
}

/// Donor well at a site `r_nm` from the donor: `-U0` on the donor itself,
/// the screened Coulomb tail elsewhere.
pub fn donor_potential<T: Real>(spec: &PotentialSpec<T>, r_nm: T) -> T {
    if r_nm == T::zero() {
        -spec.u0_ev
    } else if spec.coulomb_tail {
        -T::of(COULOMB_EV_NM) / (spec.dielectric * r_nm)
    } else {
        T::zero()
    }
}

/// `+e E·r` in eV, field in MV/m and donor-relative position in nm.
pub fn field_potential<T: Real>(field_mv_per_m: [T; 3], rel_nm: [T; 3]) -> T {
    let dot = field_mv_per_m[0] * rel_nm[0]
        + field_mv_per_m[1] * rel_nm[1]
        + field_mv_per_m[2] * rel_nm[2];
    T::of(EV_PER_MV_PER_M_NM) * dot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_at_donor() {
        let spec = PotentialSpec::silicon(3.2f64);
        assert_eq!(donor_potential(&spec, 0.0), -3.2);
    }

    #[test]
    fn coulomb_tail_value() {
        let spec = PotentialSpec::silicon(3.2f64);
        let v = donor_potential(&spec, 0.543);
        // 1.4400 / (11.9 * 0.543) with the rounded constant
        assert!((v - (-0.2229)).abs() < 1e-4, "{v}");
        assert!(donor_potential(&spec, 1e6) < 0.0);
        assert!(donor_potential(&spec, 1e6) > -1e-6);
    }

    #[test]
    fn field_term() {
        let v = field_potential([0.0, 4.0, 0.0], [0.0, 1.0, 0.0]);
        assert!((v - 0.004f64).abs() < 1e-15);
        assert_eq!(field_potential([0.0; 3], [0.3, 1.0, -2.0]), 0.0);
        assert_eq!(field_potential([1.0, 2.0, 3.0], [0.0f64; 3]), 0.0);
    }

    #[test]
    fn validation() {
        let mut s = PotentialSpec::silicon(1.0f64);
        assert!(s.validate().is_ok());
        s.dielectric = 1.0;
        assert!(s.validate().is_err());
        let mut s = PotentialSpec::silicon(1.0f64);
        s.interface = Some(Interface {
            normal: SignedAxis::parse("-y").unwrap(),
            depth_nm: 0.0,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn signed_axis_parse() {
        let a = SignedAxis::parse("-y").unwrap();
        assert_eq!(a.vector(), [0.0, -1.0, 0.0]);
        assert_eq!(a.to_string(), "-y");
        assert_eq!(SignedAxis::parse("z").unwrap().vector(), [0.0, 0.0, 1.0]);
        assert!(SignedAxis::parse("w").is_none());
    }
}
