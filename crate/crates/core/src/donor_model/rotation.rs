//! Action of lattice symmetry operations on tight-binding vectors.
//!
//! For an operation `g` about the donor, `(R c)_{g·s, β} = Σ_α D_βα(g) c_{s,α}`,
//! where `D` is identity on s-like orbitals, `g` itself on p orbitals and
//! the induced action on traceless quadratic forms for d orbitals.

use super::basis::{Orbital, OrbitalBasis};
use super::ModelError;
use crate::crystal::{LatticeDomain, SymOp};
use crate::scalar::Real;

/// Normalized traceless symmetric matrix for a d orbital.
fn quadratic_form(o: Orbital) -> [[f64; 3]; 3] {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r6 = 1.0 / 6f64.sqrt();
    let mut q = [[0.0; 3]; 3];
    match o {
        Orbital::Dxy => {
            q[0][1] = r2;
            q[1][0] = r2;
        }
        Orbital::Dyz => {
            q[1][2] = r2;
            q[2][1] = r2;
        }
        Orbital::Dzx => {
            q[0][2] = r2;
            q[2][0] = r2;
        }
        Orbital::Dx2y2 => {
            q[0][0] = r2;
            q[1][1] = -r2;
        }
        Orbital::Dz2 => {
            q[0][0] = -r6;
            q[1][1] = -r6;
            q[2][2] = 2.0 * r6;
        }
        _ => unreachable!("not a d orbital"),
    }
    q
}

/// Orbital representation matrix `D(g)`, row-major `D[β][α]`.
pub fn orbital_rotation(basis: OrbitalBasis, g: &SymOp) -> Vec<f64> {
    let orbs = basis.orbitals();
    let n = orbs.len();
    let m = g.matrix().map(|r| r.map(|v| v as f64));
    let mut d = vec![0.0; n * n];
    for (ia, &a) in orbs.iter().enumerate() {
        for (ib, &b) in orbs.iter().enumerate() {
            let v = match (a.angular_momentum(), b.angular_momentum()) {
                (0, 0) => {
                    if a == b {
                        1.0
                    } else {
                        0.0
                    }
                }
                (1, 1) => {
                    let idx = |o| match o {
                        Orbital::Px => 0,
                        Orbital::Py => 1,
                        _ => 2,
                    };
                    m[idx(b)][idx(a)]
                }
                (2, 2) => {
                    // <Q_b, g Q_a g^T>
                    let qa = quadratic_form(a);
                    let qb = quadratic_form(b);
                    let mut s = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut gqg = 0.0;
                            for k in 0..3 {
                                for l in 0..3 {
                                    gqg += m[i][k] * qa[k][l] * m[j][l];
                                }
                            }
                            s += qb[i][j] * gqg;
                        }
                    }
                    s
                }
                _ => 0.0,
            };
            d[ib * n + ia] = v;
        }
    }
    d
}

/// Applies the symmetry operation to a site-orbital vector on `domain`.
/// Fails when the domain is not mapped onto itself.
pub fn apply_symmetry<T: Real>(
    domain: &LatticeDomain,
    basis: OrbitalBasis,
    g: &SymOp,
    x: &[T],
) -> Result<Vec<T>, ModelError> {
    let n = basis.orbitals_per_site();
    let d: Vec<T> = orbital_rotation(basis, g).into_iter().map(T::of).collect();
    let mut y = vec![T::zero(); x.len()];
    for s in 0..domain.len() {
        let image = g.apply(domain.relative(s));
        let t = domain
            .index_of_relative(image)
            .ok_or(ModelError::AsymmetricDomain(image))?;
        for b in 0..n {
            let mut acc = T::zero();
            for a in 0..n {
                acc = acc + d[b * n + a] * x[s * n + a];
            }
            y[t * n + b] = acc;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::td_group;

    #[test]
    fn representation_is_orthogonal_and_multiplicative() {
        let td = td_group();
        let n = 10;
        for g in td.elements() {
            let d = orbital_rotation(OrbitalBasis::Sp3d5s, g);
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = (0..n).map(|k| d[k * n + i] * d[k * n + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            for h in td.elements() {
                let dg = d.clone();
                let dh = orbital_rotation(OrbitalBasis::Sp3d5s, h);
                let dgh = orbital_rotation(OrbitalBasis::Sp3d5s, &g.compose(h));
                for i in 0..n {
                    for j in 0..n {
                        let p: f64 = (0..n).map(|k| dg[i * n + k] * dh[k * n + j]).sum();
                        assert!((p - dgh[i * n + j]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
