use serde::{Deserialize, Serialize};

use super::{Component, StarkError, StarkSeries};
use crate::crystal::{orbit_partition, residual_group, td_group, Coord, LatticeDomain, ShellOrbit, SymOp};
use crate::donor_model::{solve_donor, PotentialSpec, TbHamiltonian};
use crate::eigensolver::{SolveOutcome, SolverOptions};
use crate::hyperfine::{
    cluster_density, tensor_norm, transport, Anchor, HyperfineRecord, PhysicalConstants,
    SiteDensity,
};
use crate::scalar::Real;

/// Tensor components below this fraction of the tensor norm are set to 0.
const SYMMETRY_ZERO: f64 = 1e-10;

/// A donor Hamiltonian with U0 fixed, swept along one field direction.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    /// Zero-field operator; its spec supplies U0, tail and interface.
    pub hamiltonian: TbHamiltonian<T>,
    direction: [f64; 3],
    pub sigma_ev: f64,
    pub solver: SolverOptions,
}

impl<T: Real> Scenario<T> {
    /// `direction` is normalized; its sign fixes which way +E points.
    pub fn new(
        hamiltonian: TbHamiltonian<T>,
        direction: [f64; 3],
        sigma_ev: f64,
        solver: SolverOptions,
    ) -> Result<Self, StarkError> {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(StarkError::BadDirection(direction));
        }
        Ok(Scenario {
            hamiltonian,
            direction: direction.map(|x| x / n),
            sigma_ev,
            solver,
        })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn field_vector(&self, e: f64) -> [f64; 3] {
        self.direction.map(|d| d * e)
    }

    pub fn hamiltonian_at(&self, e: f64) -> Result<TbHamiltonian<T>, StarkError> {
        let spec = PotentialSpec {
            field_mv_per_m: self.field_vector(e).map(T::of),
            ..self.hamiltonian.spec().clone()
        };
        Ok(self.hamiltonian.with_potential(&spec)?)
    }

    pub fn solve(&self, e: f64, start: Option<&[T]>) -> Result<SolveOutcome<T>, StarkError> {
        let h = self.hamiltonian_at(e)?;
        Ok(solve_donor(&h, self.sigma_ev, &self.solver, start)?)
    }

    /// Cold solve at one field, reduced to what a sweep needs.
    pub fn point(&self, e: f64) -> Result<FieldPoint, StarkError> {
        let out = self.solve(e, None)?;
        Ok(FieldPoint::from_outcome(e, &out, self.hamiltonian.orbitals_per_site()))
    }
}

/// Ground-cluster density and spectrum at one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub field_mv_per_m: f64,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Average over the lowest degenerate cluster; empty when nothing
    /// converged.
    pub density: SiteDensity,
    pub converged: bool,
    pub matvecs: usize,
}

impl FieldPoint {
    pub fn from_outcome<T: Real>(e: f64, out: &SolveOutcome<T>, orbitals_per_site: usize) -> FieldPoint {
        let cluster = out.ground_cluster();
        FieldPoint {
            field_mv_per_m: e,
            energies: out.states.iter().map(|s| s.energy.to_f64_lossy()).collect(),
            residuals: out.states.iter().map(|s| s.residual.to_f64_lossy()).collect(),
            density: if cluster.is_empty() {
                SiteDensity { p: Vec::new() }
            } else {
                cluster_density(cluster, orbitals_per_site)
            },
            converged: out.converged && !cluster.is_empty(),
            matvecs: out.matvecs,
        }
    }
}

/// One orbit of a shell under the field's residual group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOrbit {
    pub orbit_id: usize,
    pub shell_id: usize,
    pub representative: Coord,
    pub members: Vec<Coord>,
    /// Element taking the representative to each member.
    pub transports: Vec<SymOp>,
}

impl ProbeOrbit {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Splits every shell into residual-group orbits. Shell ids are positions
/// in `shells`; orbit ids run over all shells in order.
pub fn probe_orbits(domain: &LatticeDomain, shells: &[ShellOrbit], direction: [f64; 3]) -> Vec<ProbeOrbit> {
    let group = residual_group(direction);
    let mut out = Vec::new();
    for (shell_id, shell) in shells.iter().enumerate() {
        for sub in orbit_partition(domain, shell, &group) {
            let rep = domain.relative(sub.representative.index);
            let members: Vec<Coord> = sub.members.iter().map(|m| domain.relative(m.index)).collect();
            let transports = members
                .iter()
                .map(|&m| {
                    *group
                        .elements()
                        .iter()
                        .find(|g| g.apply(rep) == m)
                        .expect("orbit members are images of the representative")
                })
                .collect();
            out.push(ProbeOrbit {
                orbit_id: out.len(),
                shell_id,
                representative: rep,
                members,
                transports,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub constants: PhysicalConstants,
    pub eta: f64,
    pub anchor: Option<Anchor>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            constants: PhysicalConstants::default(),
            eta: 1.0,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub fields: Vec<f64>,
    pub direction: [f64; 3],
    pub calibration_scale: f64,
    pub orbits: Vec<ProbeOrbit>,
    pub converged: Vec<bool>,
    pub energies: Vec<Vec<f64>>,
    /// [field][orbit] member-averaged components in the representative
    /// frame; `None` for points that did not converge.
    pub values: Vec<Option<Vec<[f64; 7]>>>,
    /// [field][orbit] largest relative deviation of a member from the
    /// average, over β and the tensor norm.
    pub spread: Vec<Option<Vec<f64>>>,
    /// Every orbit member at every converged field, in its own frame.
    pub records: Vec<HyperfineRecord>,
    pub warnings: Vec<String>,
}

/// Solves every field through `solve` (index, E), evaluates each orbit
/// member and averages members after mapping their tensors back to the
/// representative frame.
pub fn sweep<F>(
    domain: &LatticeDomain,
    direction: [f64; 3],
    fields: &[f64],
    orbits: &[ProbeOrbit],
    settings: &SweepSettings,
    mut solve: F,
) -> Result<Sweep, StarkError>
where
    F: FnMut(usize, f64) -> Result<FieldPoint, StarkError>,
{
    let ok = fields.windows(2).all(|w| w[0] < w[1]) && fields.iter().all(|e| e.is_finite());
    let zero = fields.iter().position(|&e| e == 0.0);
    let zero = match zero {
        Some(z) if ok => z,
        _ => return Err(StarkError::BadFields(fields.to_vec())),
    };
    let points = fields
        .iter()
        .enumerate()
        .map(|(i, &e)| solve(i, e))
        .collect::<Result<Vec<_>, _>>()?;
    if !points[zero].converged {
        return Err(StarkError::NoReference);
    }
    let scale = match settings.anchor {
        Some(a) => a.scale(domain, &points[zero].density, &settings.constants, settings.eta)?,
        None => 1.0,
    };

    let mut out = Sweep {
        fields: fields.to_vec(),
        direction,
        calibration_scale: scale,
        orbits: orbits.to_vec(),
        converged: points.iter().map(|p| p.converged).collect(),
        energies: points.iter().map(|p| p.energies.clone()).collect(),
        values: Vec::with_capacity(fields.len()),
        spread: Vec::with_capacity(fields.len()),
        records: Vec::new(),
        warnings: Vec::new(),
    };
    for (p, &e) in points.iter().zip(fields) {
        if !p.converged {
            let msg = format!("field {e} MV/m did not converge; excluded from fits");
            log::warn!("{msg}");
            out.warnings.push(msg);
            out.values.push(None);
            out.spread.push(None);
            continue;
        }
        let fv = direction.map(|d| d * e);
        let mut vals = Vec::with_capacity(orbits.len());
        let mut spreads = Vec::with_capacity(orbits.len());
        for orbit in orbits {
            let mut back = Vec::with_capacity(orbit.members.len());
            for (&m, g) in orbit.members.iter().zip(&orbit.transports) {
                let rec = HyperfineRecord::evaluate(
                    domain,
                    &p.density,
                    m,
                    fv,
                    &settings.constants,
                    settings.eta,
                    scale,
                )?;
                back.push((rec.beta_khz, transport(&rec.b, &g.inverse())));
                out.records.push(rec);
            }
            let w = 1.0 / back.len() as f64;
            let beta = back.iter().map(|b| b.0).sum::<f64>() * w;
            let mut b = [[0.0; 3]; 3];
            for (_, t) in &back {
                for i in 0..3 {
                    for j in 0..3 {
                        b[i][j] += t[i][j] * w;
                    }
                }
            }
            let bn = tensor_norm(&b);
            let mut worst = 0.0f64;
            for (bm, t) in &back {
                let db = (bm - beta).abs() / if beta != 0.0 { beta.abs() } else { 1.0 };
                let diff: f64 = (0..9)
                    .map(|k| (t[k / 3][k % 3] - b[k / 3][k % 3]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let dt = diff / if bn > 0.0 { bn } else { 1.0 };
                worst = worst.max(db).max(dt);
            }
            let mut v = [beta, b[0][0], b[1][1], b[2][2], b[0][1], b[0][2], b[1][2]];
            // components zero by site symmetry come out as rounding noise
            for x in &mut v[1..] {
                if x.abs() <= SYMMETRY_ZERO * bn {
                    *x = 0.0;
                }
            }
            vals.push(v);
            spreads.push(worst);
        }
        out.values.push(Some(vals));
        out.spread.push(Some(spreads));
    }
    Ok(out)
}

impl Sweep {
    /// One series per (orbit, component), converged points only.
    pub fn series(&self) -> Vec<StarkSeries> {
        let mut out = Vec::with_capacity(self.orbits.len() * 7);
        for (k, orbit) in self.orbits.iter().enumerate() {
            for c in Component::ALL {
                let samples = self
                    .fields
                    .iter()
                    .zip(&self.values)
                    .filter_map(|(&e, v)| v.as_ref().map(|v| (e, v[k][c.index()])))
                    .collect();
                out.push(StarkSeries {
                    orbit_id: orbit.orbit_id,
                    site: orbit.representative,
                    component: c,
                    samples,
                });
            }
        }
        out
    }

    /// Largest member spread over every orbit and converged field.
    pub fn max_spread(&self) -> f64 {
        self.spread
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Resolvable groups of strict orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Per orbit of the sweep: the smallest orbit id of its group.
    pub group: Vec<usize>,
    pub events: Vec<String>,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Largest relative tensor mismatch between orbits `a` and `b` at one field,
/// minimized over the Td elements taking b's representative onto a's.
fn tensor_mismatch(ra: Coord, va: &[f64; 7], rb: Coord, vb: &[f64; 7]) -> f64 {
    let unpack = |v: &[f64; 7]| [[v[1], v[4], v[5]], [v[4], v[2], v[6]], [v[5], v[6], v[3]]];
    let (ba, bb) = (unpack(va), unpack(vb));
    let scale = tensor_norm(&ba).max(tensor_norm(&bb));
    td_group()
        .elements()
        .iter()
        .filter(|h| h.apply(rb) == ra)
        .map(|h| {
            let t = transport(&bb, h);
            let d: f64 = (0..9)
                .map(|k| (t[k / 3][k % 3] - ba[k / 3][k % 3]).powi(2))
                .sum::<f64>()
                .sqrt();
            if scale > 0.0 {
                d / scale
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Merges orbits of the same shell whose β agrees to `rel_tol` and whose
/// tensors agree to `rel_tol` in norm, after mapping one representative onto
/// the other, at every converged field. `rel_tol = 0` keeps strict orbits.
pub fn merge_resolvable(sweep: &Sweep, rel_tol: f64) -> Merge {
    let orbits = &sweep.orbits;
    let n = orbits.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut events = Vec::new();
    if rel_tol > 0.0 {
        for i in 0..n {
            for j in i + 1..n {
                if orbits[i].shell_id != orbits[j].shell_id {
                    continue;
                }
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri == rj {
                    continue;
                }
                let (a, b) = (orbits[i].representative, orbits[j].representative);
                let agree = sweep.values.iter().flatten().all(|v| {
                    close(v[i][0], v[j][0], rel_tol) && tensor_mismatch(a, &v[i], b, &v[j]) <= rel_tol
                });
                if agree {
                    parent[ri.max(rj)] = ri.min(rj);
                    let msg = format!(
                        "merged orbit {} into orbit {} (rel_tol {rel_tol})",
                        orbits[j].orbit_id, orbits[i].orbit_id
                    );
                    log::info!("{msg}");
                    events.push(msg);
                }
            }
        }
    }
    let group = (0..n)
        .map(|i| {
            let r = root(&mut parent, i);
            (0..n)
                .filter(|&j| root(&mut parent, j) == r)
                .map(|j| orbits[j].orbit_id)
                .min()
                .expect("group holds its root")
        })
        .collect();
    Merge { group, events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_lattice, classify_shells, BoxPlacement};

    fn domain() -> LatticeDomain {
        build_lattice([3, 3, 3], [0, 0, 0], BoxPlacement::Centered).unwrap()
    }

    fn find(orbits: &[ProbeOrbit], rel: Coord) -> &ProbeOrbit {
        orbits.iter().find(|o| o.members.contains(&rel)).unwrap()
    }

    #[test]
    fn orbits_split_under_field() {
        let d = domain();
        let shells = classify_shells(&d, 0.6);
        let zero = probe_orbits(&d, &shells, [0.0; 3]);
        assert_eq!(zero.len(), shells.len());
        assert!(zero.iter().all(|o| o.orbit_id == o.shell_id));
        let y = probe_orbits(&d, &shells, [0.0, 1.0, 0.0]);
        let s100 = y.iter().filter(|o| o.shell_id == find(&y, [0, 0, 4]).shell_id);
        let mut mult: Vec<usize> = s100.map(|o| o.multiplicity()).collect();
        mult.sort_unstable();
        assert_eq!(mult, vec![1, 1, 4]);
        for o in &y {
            for (m, g) in o.members.iter().zip(&o.transports) {
                assert_eq!(g.apply(o.representative), *m);
            }
        }
    }

    /// Exponentially decaying density, shifted along +y so [010] splits it.
    fn tilted(d: &LatticeDomain, shift: f64) -> SiteDensity {
        let p = (0..d.len())
            .map(|i| {
                let r = d.position_nm(i);
                (-(r[0].powi(2) + (r[1] - shift).powi(2) + r[2].powi(2)).sqrt()).exp()
            })
            .collect();
        SiteDensity { p }
    }

    fn synthetic(fields: &[f64], drop: Option<usize>) -> (Sweep, Vec<ProbeOrbit>) {
        let d = domain();
        let shells = classify_shells(&d, 0.6);
        let orbits = probe_orbits(&d, &shells, [0.0, 1.0, 0.0]);
        let settings = SweepSettings {
            anchor: Some(Anchor {
                site: [0, 0, 4],
                khz: 2981.0,
            }),
            ..Default::default()
        };
        let s = sweep(&d, [0.0, 1.0, 0.0], fields, &orbits, &settings, |i, e| {
            Ok(FieldPoint {
                field_mv_per_m: e,
                energies: vec![1.0],
                residuals: vec![0.0],
                density: tilted(&d, -0.01 * e),
                converged: Some(i) != drop,
                matvecs: 0,
            })
        })
        .unwrap();
        (s, orbits)
    }

    #[test]
    fn sweep_averages_and_anchors() {
        let (s, orbits) = synthetic(&[0.0, 1.0, 2.0, 3.0], None);
        assert!(s.max_spread() < 1e-12, "{}", s.max_spread());
        let series = s.series();
        assert_eq!(series.len(), orbits.len() * 7);
        let anchor = find(&orbits, [0, 0, 4]).orbit_id;
        let beta0 = series
            .iter()
            .find(|x| x.orbit_id == anchor && x.component == Component::Beta)
            .unwrap();
        assert!((beta0.alpha0().unwrap() - 2981.0).abs() < 1e-9);
        // density moves to -y: (0,-4,0) gains, (0,4,0) loses
        let up = find(&orbits, [0, 4, 0]).orbit_id;
        let down = find(&orbits, [0, -4, 0]).orbit_id;
        let beta = |id: usize| {
            series
                .iter()
                .find(|x| x.orbit_id == id && x.component == Component::Beta)
                .unwrap()
                .samples
                .clone()
        };
        assert!(beta(up)[3].1 < beta(up)[0].1);
        assert!(beta(down)[3].1 > beta(down)[0].1);
        assert_eq!(s.records.len(), 4 * orbits.iter().map(|o| o.multiplicity()).sum::<usize>());
    }

    #[test]
    fn unconverged_points_are_excluded() {
        let (s, _) = synthetic(&[0.0, 1.0, 2.0, 3.0], Some(2));
        assert_eq!(s.warnings.len(), 1);
        assert!(s.series().iter().all(|x| x.samples.len() == 3));
        let d = domain();
        let err = sweep(&d, [0.0, 1.0, 0.0], &[1.0, 2.0], &[], &SweepSettings::default(), |_, _| unreachable!());
        assert!(matches!(err, Err(StarkError::BadFields(_))));
    }

    #[test]
    fn merging_follows_tolerance() {
        let (s, orbits) = synthetic(&[0.0, 1.0, 2.0], None);
        let strict = merge_resolvable(&s, 0.0);
        assert!(strict.events.is_empty());
        let ids: Vec<usize> = orbits.iter().map(|o| o.orbit_id).collect();
        assert_eq!(strict.group, ids);
        let tight = merge_resolvable(&s, 1e-9);
        assert_eq!(tight.group, ids);
        // at zero field every shell is one group
        let (z, zo) = synthetic(&[0.0], None);
        let m = merge_resolvable(&z, 1e-9);
        for (o, &g) in zo.iter().zip(&m.group) {
            assert_eq!(g, zo.iter().find(|x| x.shell_id == o.shell_id).unwrap().orbit_id);
        }
    }
}
