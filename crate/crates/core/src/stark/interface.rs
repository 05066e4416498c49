use serde::{Deserialize, Serialize};

use super::sweep::{FieldPoint, Scenario};
use super::StarkError;
use crate::crystal::Coord;
use crate::eigensolver::SolverOptions;
use crate::hyperfine::{HyperfineRecord, PhysicalConstants};
use crate::scalar::Real;

/// Ground state of the interface scenario at one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfacePoint {
    pub field_mv_per_m: f64,
    pub ground_ev: f64,
    /// Lowest level above the ground cluster, when one was resolved.
    pub excited_ev: Option<f64>,
    /// ⟨r·n⟩ with n the interface normal, nm from the donor.
    pub centroid_nm: f64,
    /// Ground-cluster probability on the donor site.
    pub donor_density: f64,
    pub converged: bool,
    pub map: Vec<HyperfineRecord>,
}

/// Field scan of a donor below an interface. Each point is warm-started
/// from the previous ground state. β in the map is uncalibrated (scale 1).
pub fn interface_scan<T: Real>(
    scenario: &Scenario<T>,
    fields: &[f64],
    probes: &[Coord],
    constants: &PhysicalConstants,
    eta: f64,
) -> Result<Vec<InterfacePoint>, StarkError> {
    let iface = scenario
        .hamiltonian
        .spec()
        .interface
        .ok_or(StarkError::NoInterface)?;
    if fields.iter().any(|e| !e.is_finite()) {
        return Err(StarkError::BadFields(fields.to_vec()));
    }
    let domain = scenario.hamiltonian.domain().clone();
    let normal = iface.normal.vector();
    let nb = scenario.hamiltonian.orbitals_per_site();
    let solver = SolverOptions {
        k: scenario.solver.k.max(2),
        ..scenario.solver.clone()
    };
    let local = Scenario::new(scenario.hamiltonian.clone(), scenario.direction(), scenario.sigma_ev, solver)?;
    let mut start: Option<Vec<T>> = None;
    let mut out = Vec::with_capacity(fields.len());
    for &e in fields {
        let res = local.solve(e, start.as_deref())?;
        let point = FieldPoint::from_outcome(e, &res, nb);
        if !point.converged {
            log::warn!("interface scan: field {e} MV/m did not converge");
        }
        let cluster = res.ground_cluster().len();
        let ground_ev = point.energies.first().copied().unwrap_or(f64::NAN);
        let excited_ev = point.energies.get(cluster).copied();
        let (centroid_nm, donor_density, map) = if point.density.p.is_empty() {
            (f64::NAN, f64::NAN, Vec::new())
        } else {
            let c = (0..domain.len())
                .map(|i| {
                    let r = domain.position_nm(i);
                    point.density.p[i] * (r[0] * normal[0] + r[1] * normal[1] + r[2] * normal[2])
                })
                .sum::<f64>()
                / point.density.total();
            let fv = local.field_vector(e);
            let map = probes
                .iter()
                .map(|&s| HyperfineRecord::evaluate(&domain, &point.density, s, fv, constants, eta, 1.0))
                .collect::<Result<Vec<_>, _>>()?;
            (c, point.density.p[domain.donor_index()], map)
        };
        start = res.ground().map(|g| g.amplitudes.clone());
        out.push(InterfacePoint {
            field_mv_per_m: e,
            ground_ev,
            excited_ev,
            centroid_nm,
            donor_density,
            converged: point.converged,
            map,
        });
    }
    Ok(out)
}
