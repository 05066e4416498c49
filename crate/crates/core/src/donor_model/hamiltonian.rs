//! Nearest-neighbor tight-binding Hamiltonian of a finite domain, applied
//! matrix-free.
//!
//! Hopping blocks depend only on the bond direction, so four blocks (for
//! bonds leaving A-sites) describe the whole crystal; B-sites apply their
//! transposes. Each block is stored once, which makes the operator exactly
//! symmetric. Potentials live in a separate per-site diagonal.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{Orbital, OrbitalBasis};
use super::params::{Channel, SkParameters};
use super::potential::{donor_potential, field_potential, PotentialSpec};
use super::slater_koster::hopping_block;
use super::ModelError;
use crate::crystal::{LatticeDomain, Sublattice, BOND_VECTORS, NO_NEIGHBOR};
use crate::eigensolver::LinearOperator;
use crate::scalar::Real;

const NO_BLOCK: u32 = u32::MAX;
const SITES_PER_TASK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Energy added to the sp3 hybrid of every dangling bond, eV.
    pub boundary_shift_ev: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            boundary_shift_ev: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TbHamiltonian<T> {
    domain: Arc<LatticeDomain>,
    basis: OrbitalBasis,
    onsite: Vec<T>,
    /// Row-major ⟨A α|H|B β⟩ per bond vector.
    hop: [Vec<T>; 4],
    potential: Vec<T>,
    /// Per site: index into `corrections` or `NO_BLOCK`.
    boundary: Vec<u32>,
    corrections: Vec<Vec<T>>,
    spec: PotentialSpec<T>,
    options: AssemblyOptions,
}

/// Assembles H = on-site + nearest-neighbor hopping + passivation + potential.
///
/// With an interface in `spec`, sites beyond the plane are dropped first and
/// the operator carries the truncated domain (see [`TbHamiltonian::domain`]).
pub fn assemble<T: Real>(
    domain: &LatticeDomain,
    basis: OrbitalBasis,
    params: &SkParameters<T>,
    spec: &PotentialSpec<T>,
    options: AssemblyOptions,
) -> Result<TbHamiltonian<T>, ModelError> {
    if basis != params.basis() {
        return Err(ModelError::BasisMismatch {
            requested: basis.name(),
            parameters: params.basis().name(),
        });
    }
    spec.validate().map_err(ModelError::InvalidPotential)?;
    let domain = match spec.interface {
        Some(iface) => {
            let q = domain.lattice_constant_nm() / 4.0;
            domain.retain(|rel| iface.keeps(rel.map(|x| x as f64 * q)))?
        }
        None => domain.clone(),
    };
    let n = basis.orbitals_per_site();
    let onsite: Vec<T> = basis
        .orbitals()
        .iter()
        .map(|o| match o.angular_momentum() {
            0 if *o == Orbital::SStar => params.get(Channel::OnsiteSStar),
            0 => params.get(Channel::OnsiteS),
            1 => params.get(Channel::OnsiteP),
            _ => params.get(Channel::OnsiteD),
        })
        .collect();
    let inv = T::one() / T::of(3f64.sqrt());
    let hop = BOND_VECTORS.map(|b| hopping_block(basis, b.map(|x| T::of(x as f64) * inv), params));

    let s = basis
        .index_of(Orbital::S)
        .expect("s orbital in every basis");
    let p = [Orbital::Px, Orbital::Py, Orbital::Pz].map(|o| basis.index_of(o).expect("p orbitals"));
    let shift = T::of(options.boundary_shift_ev);
    let mut boundary = vec![NO_BLOCK; domain.len()];
    let mut corrections = Vec::new();
    for site in domain.sites() {
        let nbrs = domain.neighbors(site.index);
        if nbrs.iter().all(|&j| j != NO_NEIGHBOR) {
            continue;
        }
        let mut block = vec![T::zero(); n * n];
        for (k, b) in site.sublattice.bonds().iter().enumerate() {
            if nbrs[k] != NO_NEIGHBOR {
                continue;
            }
            // sp3 hybrid along the missing bond: (s + b·p) / 2 with b = (±1,±1,±1)
            let mut h = vec![T::zero(); n];
            h[s] = T::of(0.5);
            for i in 0..3 {
                h[p[i]] = T::of(0.5 * b[i] as f64);
            }
            for a in 0..n {
                for c in 0..n {
                    block[a * n + c] = block[a * n + c] + shift * h[a] * h[c];
                }
            }
        }
        boundary[site.index] = corrections.len() as u32;
        corrections.push(block);
    }
    let mut h = TbHamiltonian {
        domain: Arc::new(domain),
        basis,
        onsite,
        hop,
        potential: Vec::new(),
        boundary,
        corrections,
        spec: spec.clone(),
        options,
    };
    h.potential = h.potential_for(spec);
    Ok(h)
}

impl<T: Real> TbHamiltonian<T> {
    fn potential_for(&self, spec: &PotentialSpec<T>) -> Vec<T> {
        let d = &self.domain;
        (0..d.len())
            .map(|i| {
                let rel = d.position_nm(i).map(T::of);
                let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
                donor_potential(spec, r) + field_potential(spec.field_mv_per_m, rel)
            })
            .collect()
    }

    /// Same crystal and domain with a different potential. The interface
    /// cannot change here since it alters the domain.
    pub fn with_potential(&self, spec: &PotentialSpec<T>) -> Result<Self, ModelError> {
        spec.validate().map_err(ModelError::InvalidPotential)?;
        if spec.interface != self.spec.interface {
            return Err(ModelError::InvalidPotential(
                "changing the interface requires reassembly".into(),
            ));
        }
        let mut h = self.clone();
        h.potential = h.potential_for(spec);
        h.spec = spec.clone();
        Ok(h)
    }

    /// The crystal operator with every potential term removed.
    pub fn pristine(&self) -> Self {
        let mut h = self.clone();
        h.potential = vec![T::zero(); self.domain.len()];
        h
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    pub fn orbitals_per_site(&self) -> usize {
        self.basis.orbitals_per_site()
    }

    pub fn spec(&self) -> &PotentialSpec<T> {
        &self.spec
    }

    pub fn options(&self) -> AssemblyOptions {
        self.options
    }

    pub fn site_potential(&self, site: usize) -> T {
        self.potential[site]
    }

    /// Number of sites carrying a passivation block.
    pub fn boundary_sites(&self) -> usize {
        self.corrections.len()
    }

    /// Gershgorin bounds on the spectrum.
    pub fn gershgorin_bounds(&self) -> (T, T) {
        let n = self.orbitals_per_site();
        let hop_row: Vec<T> = (0..n)
            .map(|a| {
                (0..4)
                    .map(|k| {
                        (0..n)
                            .map(|b| self.hop[k][a * n + b].abs() + self.hop[k][b * n + a].abs())
                            .fold(T::zero(), |acc, v| acc + v)
                    })
                    .fold(T::zero(), |m, v| m.max(v))
            })
            .collect();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..self.domain.len() {
            for a in 0..n {
                let mut diag = self.onsite[a] + self.potential[i];
                let mut off = T::of(4.0) * hop_row[a];
                if self.boundary[i] != NO_BLOCK {
                    let c = &self.corrections[self.boundary[i] as usize];
                    diag = diag + c[a * n + a];
                    for b in (0..n).filter(|&b| b != a) {
                        off = off + c[a * n + b].abs();
                    }
                }
                lo = lo.min(diag - off);
                hi = hi.max(diag + off);
            }
        }
        (lo, hi)
    }

    fn apply_n<const N: usize>(&self, x: &[T], y: &mut [T]) {
        let d = &*self.domain;
        let nbr = d.neighbor_table();
        let sites = d.sites();
        y.par_chunks_mut(N * SITES_PER_TASK)
            .enumerate()
            .for_each(|(chunk, ys)| {
                let first = chunk * SITES_PER_TASK;
                for (k, yi) in ys.chunks_exact_mut(N).enumerate() {
                    let i = first + k;
                    let xi = &x[i * N..(i + 1) * N];
                    let v = self.potential[i];
                    let mut acc = [T::zero(); N];
                    for a in 0..N {
                        acc[a] = (self.onsite[a] + v) * xi[a];
                    }
                    let b = self.boundary[i];
                    if b != NO_BLOCK {
                        let c = &self.corrections[b as usize];
                        for a in 0..N {
                            let row = &c[a * N..(a + 1) * N];
                            let mut s = T::zero();
                            for q in 0..N {
                                s = s + row[q] * xi[q];
                            }
                            acc[a] = acc[a] + s;
                        }
                    }
                    let is_a = sites[i].sublattice == Sublattice::A;
                    for (bond, &j) in nbr[i].iter().enumerate() {
                        if j == NO_NEIGHBOR {
                            continue;
                        }
                        let j = j as usize;
                        let xj = &x[j * N..(j + 1) * N];
                        let blk = &self.hop[bond];
                        if is_a {
                            for a in 0..N {
                                let row = &blk[a * N..(a + 1) * N];
                                let mut s = T::zero();
                                for q in 0..N {
                                    s = s + row[q] * xj[q];
                                }
                                acc[a] = acc[a] + s;
                            }
                        } else {
                            for q in 0..N {
                                let row = &blk[q * N..(q + 1) * N];
                                let xq = xj[q];
                                for a in 0..N {
                                    acc[a] = acc[a] + row[a] * xq;
                                }
                            }
                        }
                    }
                    yi.copy_from_slice(&acc);
                }
            });
    }
}

impl<T: Real> LinearOperator<T> for TbHamiltonian<T> {
    fn dim(&self) -> usize {
        self.domain.len() * self.orbitals_per_site()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match self.orbitals_per_site() {
            5 => self.apply_n::<5>(x, y),
            10 => self.apply_n::<10>(x, y),
            n => unreachable!("unsupported basis size {n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::crystal::{build_lattice, residual_group, BoxPlacement};
    use crate::donor_model::potential::{Interface, SignedAxis};
    use crate::donor_model::{apply_symmetry, auto_shift, band_edges, solve_donor};
    use crate::eigensolver::SolverOptions;
    use crate::scalar::{dot, norm};

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn build(
        n: i32,
        p: &SkParameters<f64>,
        spec: &PotentialSpec<f64>,
    ) -> TbHamiltonian<f64> {
        let dom = build_lattice([n, n, n], [0, 0, 0], BoxPlacement::Centered).unwrap();
        assemble(&dom, p.basis(), p, spec, AssemblyOptions::default()).unwrap()
    }

    fn donor_spec() -> PotentialSpec<f64> {
        PotentialSpec::silicon(2.5).with_field([0.0, 7.0, 0.0])
    }

    #[test]
    fn dimension_and_symmetry() {
        for p in [SkParameters::silicon_sp3s(), SkParameters::silicon_sp3d5s()] {
            let h = build(2, &p, &donor_spec());
            assert_eq!(h.dim(), h.domain().len() * p.basis().orbitals_per_site());
            assert!(h.boundary_sites() > 0);
            for seed in 0..4 {
                let x = random(h.dim(), seed);
                let y = random(h.dim(), seed + 100);
                let a = dot(&y, &h.apply_vec(&x));
                let b = dot(&h.apply_vec(&y), &x);
                assert!((a - b).abs() <= 1e-12 * norm(&x) * norm(&y), "{a} {b}");
            }
        }
    }

    #[test]
    fn pristine_is_bit_identical() {
        let p = SkParameters::silicon_sp3d5s();
        let with = build(2, &p, &donor_spec()).pristine();
        let spec = PotentialSpec {
            coulomb_tail: false,
            ..PotentialSpec::silicon(0.0)
        };
        let without = build(2, &p, &spec);
        let x = random(with.dim(), 9);
        assert_eq!(with.apply_vec(&x), without.apply_vec(&x));
    }

    #[test]
    fn commutes_with_residual_group() {
        let p = SkParameters::silicon_sp3d5s();
        let h = build(2, &p, &donor_spec());
        let group = residual_group([0.0, 1.0, 0.0]);
        assert_eq!(group.order(), 4);
        let x = random(h.dim(), 3);
        for g in group.elements() {
            let rx = apply_symmetry(h.domain(), h.basis(), g, &x).unwrap();
            let hrx = h.apply_vec(&rx);
            let rhx = apply_symmetry(h.domain(), h.basis(), g, &h.apply_vec(&x)).unwrap();
            let diff: Vec<f64> = hrx.iter().zip(&rhx).map(|(a, b)| a - b).collect();
            assert!(norm(&diff) <= 1e-10 * norm(&x), "{g:?}: {}", norm(&diff));
        }
        // an element that reverses the field does not commute
        let flip = crate::crystal::td_group()
            .elements()
            .iter()
            .copied()
            .find(|g| g.apply([0, 4, 0]) == [0, -4, 0])
            .unwrap();
        let rx = apply_symmetry(h.domain(), h.basis(), &flip, &x).unwrap();
        let rhx = apply_symmetry(h.domain(), h.basis(), &flip, &h.apply_vec(&x)).unwrap();
        let diff: Vec<f64> = h.apply_vec(&rx).iter().zip(&rhx).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) > 1e-6 * norm(&x));
    }

    #[test]
    fn interface_removes_sites_beyond_plane() {
        let p = SkParameters::silicon_sp3s();
        let mut spec = donor_spec();
        spec.interface = Some(Interface {
            normal: SignedAxis::parse("-y").unwrap(),
            depth_nm: 0.6,
        });
        let full = build(3, &p, &donor_spec());
        let cut = build(3, &p, &spec);
        assert!(cut.domain().len() < full.domain().len());
        for i in 0..cut.domain().len() {
            assert!(cut.domain().position_nm(i)[1] >= -0.6 - 1e-9);
        }
        assert_eq!(cut.dim(), cut.domain().len() * 5);
        assert!(cut.with_potential(&donor_spec()).is_err());
    }

    #[test]
    fn box_ground_lies_above_bulk_edge() {
        let p = SkParameters::silicon_sp3s();
        let edges = band_edges(&p);
        let spec = PotentialSpec {
            coulomb_tail: false,
            ..PotentialSpec::silicon(0.0)
        };
        let h = build(3, &p, &spec);
        let out = solve_donor(
            &h,
            auto_shift(&edges),
            &SolverOptions {
                k: 1,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.states[0].energy >= edges.conduction_min);
    }
}
