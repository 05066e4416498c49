//! Bulk band structure of the two-atom primitive cell.
//!
//! Used to locate the gap (for spectral windows) and as an independent
//! small-matrix check on the finite-domain operator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::Orbital;
use super::params::{Channel, SkParameters};
use super::slater_koster::hopping_block;
use crate::crystal::BOND_VECTORS;
use crate::scalar::Real;

/// Band energies (eV, ascending) at wavevector `k` in units of 2π/a₀.
pub fn band_energies<T: Real>(params: &SkParameters<T>, k: [f64; 3]) -> Vec<f64> {
    let basis = params.basis();
    let n = basis.orbitals_per_site();
    let p64: SkParameters<f64> = SkParameters::parse(&params.to_csv()).expect("round trip");
    let inv = 1.0 / 3f64.sqrt();
    // complex Hermitian 2n x 2n embedded as real symmetric 4n x 4n
    let mut re = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut im = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for (a, o) in basis.orbitals().iter().enumerate() {
        let e = match (o.angular_momentum(), *o == Orbital::SStar) {
            (0, true) => p64.get(Channel::OnsiteSStar),
            (0, false) => p64.get(Channel::OnsiteS),
            (1, _) => p64.get(Channel::OnsiteP),
            _ => p64.get(Channel::OnsiteD),
        };
        re[(a, a)] = e;
        re[(n + a, n + a)] = e;
    }
    for b in BOND_VECTORS {
        let blk = hopping_block(basis, b.map(|x| x as f64 * inv), &p64);
        let phase = std::f64::consts::FRAC_PI_2
            * (k[0] * b[0] as f64 + k[1] * b[1] as f64 + k[2] * b[2] as f64);
        let (s, c) = phase.sin_cos();
        for a in 0..n {
            for q in 0..n {
                let h = blk[a * n + q];
                re[(a, n + q)] += h * c;
                im[(a, n + q)] += h * s;
                re[(n + q, a)] += h * c;
                im[(n + q, a)] -= h * s;
            }
        }
    }
    let m = 2 * n;
    let mut big = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            big[(i, j)] = re[(i, j)];
            big[(m + i, m + j)] = re[(i, j)];
            big[(i, m + j)] = -im[(i, j)];
            big[(m + i, j)] = im[(i, j)];
        }
    }
    let mut ev: Vec<f64> = big.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.into_iter().step_by(2).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    pub valence_max: f64,
    pub conduction_min: f64,
    /// Position of the conduction minimum along Γ–X as a fraction of X.
    pub conduction_min_fraction_x: f64,
}

impl BandEdges {
    pub fn gap(&self) -> f64 {
        self.conduction_min - self.valence_max
    }
}

/// Valence maximum (at Γ) and conduction minimum (searched along Γ–X and at L).
pub fn band_edges<T: Real>(params: &SkParameters<T>) -> BandEdges {
    const VALENCE_BANDS: usize = 4;
    let valence_max = band_energies(params, [0.0; 3])[VALENCE_BANDS - 1];
    let cb = |t: f64| band_energies(params, [0.0, 0.0, t])[VALENCE_BANDS];
    let steps = 100;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let e = cb(t);
        if e < best {
            best = e;
            best_t = t;
        }
    }
    // golden-section refinement around the grid minimum
    let (mut a, mut b) = ((best_t - 0.01).max(0.0), (best_t + 0.01).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cb(c) < cb(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    let (mut conduction_min, mut frac) = (cb(t).min(best), t);
    let l = band_energies(params, [0.5, 0.5, 0.5])[VALENCE_BANDS];
    if l < conduction_min {
        conduction_min = l;
        frac = f64::NAN;
    }
    BandEdges {
        valence_max,
        conduction_min,
        conduction_min_fraction_x: frac,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_degeneracies() {
        let p = SkParameters::<f64>::silicon_sp3d5s();
        let e = band_energies(&p, [0.0; 3]);
        // top valence state is a triplet
        assert!((e[1] - e[3]).abs() < 1e-9 && (e[2] - e[3]).abs() < 1e-9);
    }

    #[test]
    fn silicon_is_indirect_near_x() {
        for p in [
            SkParameters::<f64>::silicon_sp3d5s(),
            SkParameters::<f64>::silicon_sp3s(),
        ] {
            let edges = band_edges(&p);
            let g = edges.gap();
            assert!(g > 1.0 && g < 1.3, "gap {g}");
            assert!(edges.conduction_min_fraction_x > 0.7, "{edges:?}");
        }
    }
}
