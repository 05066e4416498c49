use serde::{Deserialize, Serialize};

use super::Coord;

/// Signed permutation of the Cartesian axes: `(g v)_i = sign_i * v_{perm_i}`.
///
/// These are exact on integer lattice coordinates, and on floats too, since
/// they only permute and negate components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymOp {
    perm: [u8; 3],
    sign: [i8; 3],
}

impl SymOp {
    pub const IDENTITY: SymOp = SymOp {
        perm: [0, 1, 2],
        sign: [1, 1, 1],
    };

    /// Returns `None` unless `perm` is a permutation and signs are ±1.
    pub fn new(perm: [u8; 3], sign: [i8; 3]) -> Option<SymOp> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p as usize] {
                return None;
            }
            seen[p as usize] = true;
        }
        if sign.iter().any(|s| s.abs() != 1) {
            return None;
        }
        Some(SymOp { perm, sign })
    }

    pub fn apply(&self, v: Coord) -> Coord {
        [0, 1, 2].map(|i| self.sign[i] as i32 * v[self.perm[i] as usize])
    }

    pub fn apply_f64(&self, v: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sign[i] as f64 * v[self.perm[i] as usize])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SymOp) -> SymOp {
        let mut perm = [0u8; 3];
        let mut sign = [0i8; 3];
        for i in 0..3 {
            let j = self.perm[i] as usize;
            perm[i] = other.perm[j];
            sign[i] = self.sign[i] * other.sign[j];
        }
        SymOp { perm, sign }
    }

    pub fn inverse(&self) -> SymOp {
        let mut perm = [0u8; 3];
        let mut sign = [0i8; 3];
        for i in 0..3 {
            let j = self.perm[i] as usize;
            perm[j] = i as u8;
            sign[j] = self.sign[i];
        }
        SymOp { perm, sign }
    }

    pub fn matrix(&self) -> [[i32; 3]; 3] {
        let mut m = [[0; 3]; 3];
        for i in 0..3 {
            m[i][self.perm[i] as usize] = self.sign[i] as i32;
        }
        m
    }

    pub fn determinant(&self) -> i32 {
        let parity = match self.perm {
            [0, 1, 2] | [1, 2, 0] | [2, 0, 1] => 1,
            _ => -1,
        };
        parity * self.sign.iter().map(|&s| s as i32).product::<i32>()
    }

    /// Product of the nonzero entries; +1 exactly for the operations that
    /// preserve the diamond lattice about an atom.
    fn sign_product(&self) -> i8 {
        self.sign.iter().product()
    }
}

/// A finite group of lattice-preserving operations about the donor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    elements: Vec<SymOp>,
}

impl SymmetryGroup {
    pub fn elements(&self) -> &[SymOp] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: &SymOp) -> bool {
        self.elements.binary_search(g).is_ok()
    }

    pub fn is_closed(&self) -> bool {
        self.elements
            .iter()
            .all(|a| self.elements.iter().all(|b| self.contains(&a.compose(b))))
    }
}

/// The 24 signed permutation matrices whose sign product is +1: the point
/// group Td of a diamond-lattice atom site.
pub fn td_group() -> SymmetryGroup {
    const PERMS: [[u8; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut elements = Vec::with_capacity(24);
    for perm in PERMS {
        for bits in 0..8u8 {
            let sign = [0, 1, 2].map(|k| if bits >> k & 1 == 1 { -1 } else { 1 });
            let g = SymOp { perm, sign };
            if g.sign_product() == 1 {
                elements.push(g);
            }
        }
    }
    elements.sort();
    SymmetryGroup { elements }
}

/// Subgroup of Td fixing `field` exactly. The zero vector yields all of Td.
pub fn residual_group(field: [f64; 3]) -> SymmetryGroup {
    let td = td_group();
    if field.iter().all(|&x| x == 0.0) {
        return td;
    }
    let elements = td
        .elements
        .into_iter()
        .filter(|g| g.apply_f64(field) == field)
        .collect();
    SymmetryGroup { elements }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::Sublattice;
    use proptest::prelude::*;

    fn mat_mul(a: [[i32; 3]; 3], b: [[i32; 3]; 3]) -> [[i32; 3]; 3] {
        let mut c = [[0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    #[test]
    fn td_has_24_lattice_preserving_elements() {
        let td = td_group();
        assert_eq!(td.order(), 24);
        assert!(td.contains(&SymOp::IDENTITY));
        assert!(td.is_closed());
        let proper = td
            .elements()
            .iter()
            .filter(|g| g.determinant() == 1)
            .count();
        assert_eq!(proper, 12);
        // every element maps each sublattice onto itself about an A-site
        for g in td.elements() {
            for v in [
                [1, 1, 1],
                [1, -1, -1],
                [0, 2, 2],
                [4, 0, 0],
                [-3, 3, 3],
                [2, 0, -2],
            ] {
                assert_eq!(Sublattice::of(g.apply(v)), Sublattice::of(v));
            }
        }
    }

    #[test]
    fn compose_matches_matrix_product() {
        let td = td_group();
        for a in td.elements() {
            for b in td.elements() {
                assert_eq!(a.compose(b).matrix(), mat_mul(a.matrix(), b.matrix()));
            }
            assert_eq!(a.compose(&a.inverse()), SymOp::IDENTITY);
        }
    }

    #[test]
    fn field_010_leaves_order_four() {
        let g = residual_group([0.0, 1.0, 0.0]);
        assert_eq!(g.order(), 4);
        let c2y = SymOp::new([0, 1, 2], [-1, 1, -1]).unwrap();
        let sigma = SymOp::new([2, 1, 0], [1, 1, 1]).unwrap();
        let sigma2 = SymOp::new([2, 1, 0], [-1, 1, -1]).unwrap();
        for e in [SymOp::IDENTITY, c2y, sigma, sigma2] {
            assert!(g.contains(&e), "{e:?}");
        }
    }

    #[test]
    fn field_111_leaves_c3v() {
        let g = residual_group([1.0, 1.0, 1.0]);
        assert_eq!(g.order(), 6);
        assert_eq!(
            g.elements()
                .iter()
                .filter(|e| e.determinant() == -1)
                .count(),
            3
        );
        assert_eq!(residual_group([0.0; 3]).order(), 24);
    }

    proptest! {
        #[test]
        fn residual_group_is_a_subgroup(x in -3i32..=3, y in -3i32..=3, z in -3i32..=3) {
            let g = residual_group([x as f64, y as f64, z as f64]);
            prop_assert!(g.contains(&SymOp::IDENTITY));
            prop_assert!(g.is_closed());
            prop_assert_eq!(24 % g.order(), 0);
        }
    }
}
