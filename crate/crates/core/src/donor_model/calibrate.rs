//! Donor ground-state solves and calibration of the central-cell cutoff U0
//! against a target binding energy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bulk::BandEdges;
use super::hamiltonian::TbHamiltonian;
use super::potential::PotentialSpec;
use super::ModelError;
use crate::eigensolver::{
    lowest_states, EigenError, EnergyWindow, SolveOutcome, SolverOptions, TransformMode,
};
use crate::scalar::Real;

/// Fold shift in the gap, a quarter gap below the conduction edge. Donor
/// levels sit just under the edge and come out first. Keeping the shift off
/// midgap matters: the fold maps E and 2σ − E to the same value, so valence
/// states mirrored onto the wanted ones would mix with them.
pub fn auto_shift(edges: &BandEdges) -> f64 {
    edges.conduction_min - 0.25 * edges.gap()
}

/// Lowest states above `sigma` by the folded transform.
pub fn solve_donor<T: Real>(
    h: &TbHamiltonian<T>,
    sigma: f64,
    opts: &SolverOptions,
    start: Option<&[T]>,
) -> Result<SolveOutcome<T>, EigenError> {
    let s = T::of(sigma);
    lowest_states(
        h,
        EnergyWindow {
            lo: s,
            hi: T::infinity(),
        },
        TransformMode::Folded(s),
        opts,
        start,
        None,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub target_binding_ev: f64,
    pub tol_ev: f64,
    /// U0 search interval, eV. Must bracket the target. Bindings deeper
    /// than `reference − sigma` push the ground state out of the solve
    /// window, so the interval should stay in the shallow regime.
    pub u0_range_ev: (f64, f64),
    pub max_evaluations: usize,
    /// Fold shift used for every solve.
    pub sigma_ev: f64,
}

impl CalibrationOptions {
    pub fn new(target_binding_ev: f64, sigma_ev: f64) -> Self {
        CalibrationOptions {
            target_binding_ev,
            tol_ev: 1e-4,
            u0_range_ev: (-1.0, 5.0),
            max_evaluations: 40,
            sigma_ev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub u0_ev: f64,
    pub binding_ev: f64,
    /// Lowest state of the same domain without any potential.
    pub reference_ev: f64,
    pub ground_ev: f64,
    /// Every (U0, binding) pair evaluated, in order.
    pub trace: Vec<(f64, f64)>,
    pub matvecs: usize,
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error(
        "target binding {target:.6} eV is not bracketed: U0 in [{u0_lo}, {u0_hi}] eV gives bindings {binding_lo:.6}..{binding_hi:.6} eV"
    )]
    NoBracket {
        target: f64,
        u0_lo: f64,
        u0_hi: f64,
        binding_lo: f64,
        binding_hi: f64,
    },
    #[error("eigensolver did not converge at U0 = {u0} eV")]
    NotConverged { u0: f64 },
    #[error("no U0 within {tol} eV of the target after {evaluations} solves (best {best_u0} eV, binding {best_binding} eV)")]
    Exhausted {
        tol: f64,
        evaluations: usize,
        best_u0: f64,
        best_binding: f64,
    },
    #[error("invalid calibration options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Solver(#[from] EigenError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Probe<T> {
    binding: f64,
    ground: f64,
    amplitudes: Vec<T>,
}

/// Finds U0 with `reference − ground = target ± tol` by false position
/// (Illinois variant) on the configured U0 interval. The rest of the
/// potential in `h` (field, interface, tail) is kept as is.
pub fn calibrate_u0<T: Real>(
    h: &TbHamiltonian<T>,
    opts: &CalibrationOptions,
    solver: &SolverOptions,
) -> Result<Calibration, CalibrationError> {
    let (a0, b0) = opts.u0_range_ev;
    if !(a0 < b0) || !(opts.tol_ev > 0.0) || opts.max_evaluations < 2 {
        return Err(CalibrationError::InvalidOptions(format!(
            "need u0 range lo < hi, tol > 0 and at least 2 evaluations, got {:?}, {}, {}",
            opts.u0_range_ev, opts.tol_ev, opts.max_evaluations
        )));
    }
    let one = SolverOptions {
        k: 1,
        ..solver.clone()
    };
    let pristine = h.pristine();
    let reference = solve_donor(&pristine, opts.sigma_ev, &one, None)?;
    if !reference.converged {
        return Err(CalibrationError::NotConverged { u0: f64::NAN });
    }
    let reference_ev = reference.states[0].energy.to_f64_lossy();
    let mut matvecs = reference.matvecs;
    let mut trace = Vec::new();

    let mut probe = |u0: f64, start: Option<&[T]>| -> Result<Probe<T>, CalibrationError> {
        let spec = PotentialSpec {
            u0_ev: T::of(u0),
            ..h.spec().clone()
        };
        let hu = h.with_potential(&spec)?;
        let out = solve_donor(&hu, opts.sigma_ev, &one, start)?;
        matvecs += out.matvecs;
        if !out.converged {
            return Err(CalibrationError::NotConverged { u0 });
        }
        let g = &out.states[0];
        let ground = g.energy.to_f64_lossy();
        let binding = reference_ev - ground;
        log::debug!("calibrate U0 {u0:.9} binding {binding:.9}");
        trace.push((u0, binding));
        Ok(Probe {
            binding,
            ground,
            amplitudes: g.amplitudes.clone(),
        })
    };

    let target = opts.target_binding_ev;
    let (mut a, mut b) = (a0, b0);
    let pa = probe(a, None)?;
    let pb = probe(b, Some(&pa.amplitudes))?;
    let (mut fa, mut fb) = (pa.binding - target, pb.binding - target);
    if fa.signum() == fb.signum() && fa.abs() > opts.tol_ev && fb.abs() > opts.tol_ev {
        return Err(CalibrationError::NoBracket {
            target,
            u0_lo: a,
            u0_hi: b,
            binding_lo: pa.binding,
            binding_hi: pb.binding,
        });
    }
    let mut best = if fa.abs() <= fb.abs() { (a, pa) } else { (b, pb) };
    let mut side = 0i8;
    let mut evaluations = 2;
    while (best.1.binding - target).abs() > opts.tol_ev {
        if evaluations >= opts.max_evaluations {
            drop(probe);
            return Err(CalibrationError::Exhausted {
                tol: opts.tol_ev,
                evaluations,
                best_u0: best.0,
                best_binding: best.1.binding,
            });
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let pc = probe(c, Some(&best.1.amplitudes))?;
        evaluations += 1;
        let fc = pc.binding - target;
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if fc.abs() < (best.1.binding - target).abs() {
            best = (c, pc);
        }
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    drop(probe);
    let (u0_ev, p) = best;
    if (p.binding - target).abs() > opts.tol_ev {
        return Err(CalibrationError::Exhausted {
            tol: opts.tol_ev,
            evaluations,
            best_u0: u0_ev,
            best_binding: p.binding,
        });
    }
    Ok(Calibration {
        u0_ev,
        binding_ev: p.binding,
        reference_ev,
        ground_ev: p.ground,
        trace,
        matvecs,
    })
}
