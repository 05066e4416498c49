//! Lowest donor-bound eigenpairs of a sparse Hamiltonian.
//!
//! [`lowest_states`] runs thick-restart Lanczos on a spectral transform of H
//! (folded spectrum by default), then refines the converged subspace with a
//! Rayleigh-Ritz step on H itself. Every returned state carries its residual
//! ‖Hv − Ev‖ measured against the untransformed operator.

mod dense;
mod lanczos;
mod operator;
mod transform;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lanczos::{thick_restart_lanczos, LanczosOptions, LanczosOutcome, RitzView, Verdict};
pub use operator::{DenseOperator, LinearOperator};
pub use transform::{spectral_transform, ShiftedSolve, TransformMode, Transformed};

use crate::scalar::{axpy, dot, norm, Real};

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("invalid solver argument: {0}")]
    InvalidArgument(String),
    #[error("shift-invert transform needs a linear solver")]
    MissingSolver,
    #[error("energy window [{lo}, {hi}] eV lies outside the estimated spectrum [{min}, {max}] eV")]
    EmptyWindow {
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
}

/// One eigenpair of H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorState<T> {
    pub energy: T,
    pub amplitudes: Vec<T>,
    /// ‖H v − E v‖ in eV.
    pub residual: T,
    /// States whose energies chain within the cluster tolerance share an id.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub k: usize,
    /// Residual bound on ‖Hv − Ev‖, eV.
    pub tol: f64,
    pub max_matvecs: usize,
    pub basis_size: usize,
    pub seed: u64,
    /// Extra Ritz pairs tracked beyond `k`.
    pub guard: usize,
    /// Energies closer than this (eV) form one degenerate cluster.
    pub cluster_tol: f64,
    /// Chebyshev degree used to accelerate the folded transform; 0 or 1
    /// applies (H − σ)² directly.
    pub filter_degree: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            k: 8,
            tol: 1e-8,
            max_matvecs: 400_000,
            basis_size: 48,
            seed: 20_090_101,
            guard: 2,
            cluster_tol: 1e-7,
            filter_degree: 16,
        }
    }
}

/// Energy interval (eV) in which states are wanted. For the folded and
/// shift-invert transforms the shift is taken from the mode, and `lo` only
/// filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow<T> {
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub states: Vec<DonorState<T>>,
    pub converged: bool,
    /// Applications of H (transformed applications count double when folded).
    pub matvecs: usize,
    pub restarts: usize,
    /// Line-oriented convergence log.
    pub log: Vec<String>,
}

impl<T: Real> SolveOutcome<T> {
    pub fn ground(&self) -> Option<&DonorState<T>> {
        self.states.first()
    }

    /// States of the lowest degenerate cluster.
    pub fn ground_cluster(&self) -> &[DonorState<T>] {
        match self.states.first() {
            Some(g) => {
                let n = self
                    .states
                    .iter()
                    .take_while(|s| s.cluster == g.cluster)
                    .count();
                &self.states[..n]
            }
            None => &[],
        }
    }
}

/// Spectrum bounds from a short Lanczos run: extreme Ritz values widened by
/// their residuals.
pub fn estimate_bounds<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    steps: usize,
    seed: u64,
) -> (T, T) {
    let out = thick_restart_lanczos(
        op,
        &LanczosOptions {
            nev: steps.min(op.dim()),
            basis_size: steps.min(op.dim()),
            max_matvecs: steps,
            seed,
        },
        None,
        &[],
        |_| Verdict::Done,
    );
    let lo = out.values.first().copied().unwrap_or_else(T::zero);
    let hi = out.values.last().copied().unwrap_or_else(T::zero);
    let rlo = out.residuals.first().copied().unwrap_or_else(T::zero);
    let rhi = out.residuals.last().copied().unwrap_or_else(T::zero);
    (lo - rlo, hi + rhi)
}

/// Flips the sign so the largest-magnitude component is positive.
fn fix_phase<T: Real>(v: &mut [T]) {
    let mut best = T::zero();
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Rayleigh-Ritz of H on the span of orthonormal `x`. Returns states sorted
/// by energy with residuals against H.
fn rayleigh_ritz<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    x: &[Vec<T>],
) -> Vec<DonorState<T>> {
    let k = x.len();
    let hx: Vec<Vec<T>> = x.iter().map(|v| h.apply_vec(v)).collect();
    let g = DMatrix::<f64>::from_fn(k, k, |i, j| {
        0.5 * (dot(&x[i], &hx[j]).to_f64_lossy() + dot(&x[j], &hx[i]).to_f64_lossy())
    });
    let (values, vectors) = dense::symmetric_eigen(&g);
    let n = h.dim();
    (0..k)
        .map(|c| {
            let e = T::of(values[c]);
            let mut v = vec![T::zero(); n];
            let mut hv = vec![T::zero(); n];
            for i in 0..k {
                let coef = T::of(vectors[(i, c)]);
                axpy(coef, &x[i], &mut v);
                axpy(coef, &hx[i], &mut hv);
            }
            let nv = norm(&v);
            for (a, b) in v.iter_mut().zip(hv.iter_mut()) {
                *a = *a / nv;
                *b = *b / nv;
            }
            axpy(-e, &v, &mut hv);
            let residual = norm(&hv);
            fix_phase(&mut v);
            DonorState {
                energy: e,
                amplitudes: v,
                residual,
                cluster: 0,
            }
        })
        .collect()
}

/// Rayleigh-Ritz of H within groups of Ritz vectors whose transformed
/// values coincide. Distinct transformed values are never mixed: a subspace
/// holding one converged and one unconverged vector with a similar H
/// quotient would otherwise spoil the converged one.
fn ritz_states<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    x: &[Vec<T>],
    theta: &[T],
) -> Vec<DonorState<T>> {
    let scale = theta
        .iter()
        .fold(1.0f64, |m, t| m.max(t.to_f64_lossy().abs()));
    let mut states = Vec::with_capacity(x.len());
    let mut start = 0;
    for i in 1..=x.len() {
        let split = i == x.len()
            || (theta[i] - theta[i - 1]).to_f64_lossy().abs() > 1e-6 * scale;
        if split {
            states.extend(rayleigh_ritz(h, &x[start..i]));
            start = i;
        }
    }
    states.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    states
}

fn assign_clusters<T: Real>(states: &mut [DonorState<T>], tol: f64) {
    let mut id = 0;
    for i in 0..states.len() {
        if i > 0 && (states[i].energy - states[i - 1].energy).to_f64_lossy() > tol {
            id += 1;
        }
        states[i].cluster = id;
    }
}

struct Pass<T> {
    states: Vec<DonorState<T>>,
    /// Converged eigenvectors outside the window that crowded out wanted ones.
    outside: Vec<Vec<T>>,
    converged: bool,
    /// The H residual stopped improving while the Lanczos estimates had
    /// already converged.
    stalled: bool,
    matvecs: usize,
    restarts: usize,
}

/// Rayleigh-Ritz checks without a halving of the worst residual before a
/// pass is declared stalled.
const STALL_CHECKS: usize = 8;
/// Fresh restarts from the best states after a stall.
const STALL_RETRIES: usize = 3;

/// One Lanczos run on the transformed operator, restricted to the complement
/// of `locked`, converging the `k` lowest in-window states.
#[allow(clippy::too_many_arguments)]
fn run_pass<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    op: &Transformed<'_, T, A>,
    window: EnergyWindow<T>,
    opts: &SolverOptions,
    k: usize,
    start: Option<&[T]>,
    locked: &[Vec<T>],
    budget: usize,
    log: &mut Vec<String>,
) -> Pass<T> {
    let nev = (k + opts.guard).min(h.dim());
    let lopts = LanczosOptions {
        nev,
        basis_size: opts.basis_size.max(nev + 8),
        max_matvecs: (budget / op.cost()).max(1),
        seed: opts.seed.wrapping_add(locked.len() as u64),
    };
    let tol = opts.tol;
    let mode = op.mode();
    let mut best: Option<Vec<DonorState<T>>> = None;
    let mut outside = Vec::new();
    let mut converged = false;
    let mut stalled = false;
    let mut record = f64::INFINITY;
    let mut since_record = 0usize;
    let mut cycle = 0usize;
    let mut extra = 0usize;
    let tag = locked.len();
    let out = thick_restart_lanczos(op, &lopts, start, locked, |view| {
        cycle += 1;
        // cheap gate on the projected residuals before touching H
        let estimate = |i: usize| -> f64 {
            let r = view.residuals[i].to_f64_lossy();
            let th = view.values[i].to_f64_lossy();
            match mode {
                TransformMode::Folded(_) => r / (2.0 * th.abs().sqrt()).max(1e-300),
                TransformMode::ShiftInvert(_) => r / (th * th).max(1e-300),
                TransformMode::Plain => r,
                // no cheap inverse map; always verify against H
                TransformMode::FilteredFolded { .. } => f64::INFINITY,
            }
        };
        let gate = (0..view.values.len().min(k))
            .map(estimate)
            .fold(0.0, f64::max);
        log.push(format!(
            "pass {tag} cycle {cycle} lowest {:.10e} est_residual {gate:.3e}",
            view.values.first().map_or(f64::NAN, |v| v.to_f64_lossy())
        ));
        let filtered = matches!(mode, TransformMode::FilteredFolded { .. });
        if gate > 10.0 * tol && !view.exhausted && !filtered {
            return Verdict::Continue;
        }
        let all = ritz_states(h, view.vectors, view.values);
        extra += view.vectors.len();
        let all_converged = all.iter().all(|s| s.residual.to_f64_lossy() <= tol);
        let (mut states, out): (Vec<_>, Vec<_>) = all
            .into_iter()
            .partition(|s| s.energy >= window.lo && s.energy <= window.hi);
        states.truncate(k);
        let worst = states
            .iter()
            .map(|s| s.residual.to_f64_lossy())
            .fold(0.0, f64::max);
        log.push(format!(
            "pass {tag} cycle {cycle} rayleigh-ritz {} states in window, first {:.10e} eV, max residual {worst:.3e} eV",
            states.len(),
            states.first().map_or(f64::NAN, |s| s.energy.to_f64_lossy())
        ));
        let ok = worst <= tol && (states.len() == k || view.exhausted);
        let crowded = states.len() < k && all_converged && !out.is_empty();
        best = Some(states);
        if worst < 0.5 * record {
            record = worst;
            since_record = 0;
        } else {
            since_record += 1;
        }
        if ok {
            converged = true;
            Verdict::Done
        } else if since_record >= STALL_CHECKS {
            stalled = true;
            Verdict::Done
        } else if crowded {
            outside = out.into_iter().map(|s| s.amplitudes).collect();
            Verdict::Done
        } else {
            Verdict::Continue
        }
    });
    let states = match best {
        Some(s) => s,
        None => {
            let mut s = ritz_states(h, &out.vectors, &out.values);
            extra += out.vectors.len();
            s.retain(|s| s.energy >= window.lo && s.energy <= window.hi);
            s.truncate(k);
            s
        }
    };
    Pass {
        states,
        outside,
        converged,
        stalled,
        matvecs: out.matvecs * op.cost() + extra,
        restarts: out.restarts,
    }
}

/// Repeats [`run_pass`] while out-of-window eigenvectors crowd the tracked
/// set, deflating them into `excluded` each time.
#[allow(clippy::too_many_arguments)]
fn pass_with_exclusions<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    op: &Transformed<'_, T, A>,
    window: EnergyWindow<T>,
    opts: &SolverOptions,
    k: usize,
    start: Option<&[T]>,
    found: &[DonorState<T>],
    excluded: &mut Vec<Vec<T>>,
    budget: usize,
    log: &mut Vec<String>,
) -> Pass<T> {
    let mut spent = 0;
    let mut restarts = 0;
    let mut start = start.map(|s| s.to_vec());
    loop {
        let locked: Vec<Vec<T>> = found
            .iter()
            .map(|s| s.amplitudes.clone())
            .chain(excluded.iter().cloned())
            .collect();
        let mut pass = run_pass(
            h,
            op,
            window,
            opts,
            k,
            start.as_deref(),
            &locked,
            budget.saturating_sub(spent),
            log,
        );
        spent += pass.matvecs;
        restarts += pass.restarts;
        if pass.converged || pass.outside.is_empty() || spent >= budget {
            pass.matvecs = spent;
            pass.restarts = restarts;
            return pass;
        }
        log.push(format!(
            "excluding {} converged states outside the window",
            pass.outside.len()
        ));
        excluded.append(&mut pass.outside);
        if let Some(first) = pass.states.first() {
            start = Some(first.amplitudes.clone());
        }
    }
}

/// Orthonormalizes the state vectors (two Gram-Schmidt passes) and
/// re-diagonalizes H on their span.
fn polish<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    states: &[DonorState<T>],
) -> Vec<DonorState<T>> {
    let mut q: Vec<Vec<T>> = Vec::with_capacity(states.len());
    for s in states {
        let mut v = s.amplitudes.clone();
        for _ in 0..2 {
            for u in &q {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > T::of(1e-8) {
            for x in v.iter_mut() {
                *x = *x / nv;
            }
            q.push(v);
        }
    }
    rayleigh_ritz(h, &q)
}

/// Returns the `opts.k` eigenpairs of `h` lowest in `window`, ascending, each
/// with ‖Hv − Ev‖ ≤ `opts.tol` when `converged`. When the k-th state belongs
/// to a degenerate cluster, the whole cluster is returned.
///
/// After the main run, further runs deflated against the states found so far
/// look for degenerate partners a single Krylov sequence can miss.
///
/// `start` seeds the Krylov space (e.g. the ground state of a neighboring
/// field point). Non-convergence within the matvec budget is not an error:
/// the best available states are returned with `converged == false`.
pub fn lowest_states<T: Real, A: LinearOperator<T> + ?Sized>(
    h: &A,
    window: EnergyWindow<T>,
    mode: TransformMode<T>,
    opts: &SolverOptions,
    start: Option<&[T]>,
    solver: Option<&dyn ShiftedSolve<T>>,
) -> Result<SolveOutcome<T>, EigenError> {
    if opts.k == 0 {
        return Err(EigenError::InvalidArgument("k must be at least 1".into()));
    }
    if !(window.lo <= window.hi) {
        return Err(EigenError::InvalidArgument(format!(
            "window lower bound {} exceeds upper bound {}",
            window.lo, window.hi
        )));
    }
    const BOUND_STEPS: usize = 30;
    let (smin, smax) = estimate_bounds(h, BOUND_STEPS.min(h.dim()), opts.seed ^ 0x9e37);
    let slack = T::of(1e-6) * (smax - smin).abs().max(T::one());
    if window.lo > smax + slack || window.hi < smin - slack {
        return Err(EigenError::EmptyWindow {
            lo: window.lo.to_f64_lossy(),
            hi: window.hi.to_f64_lossy(),
            min: smin.to_f64_lossy(),
            max: smax.to_f64_lossy(),
        });
    }
    let mut log = Vec::new();
    let mut matvecs = BOUND_STEPS.min(h.dim());
    let mut seeded: Option<Vec<T>> = start.map(|s| s.to_vec());
    let mode = match mode {
        TransformMode::Folded(sigma) if opts.filter_degree > 1 => {
            let folded = spectral_transform(h, mode, None)?;
            let nev = (opts.k + opts.guard).min(h.dim());
            let size = opts.basis_size.max(nev + 8);
            let probe = thick_restart_lanczos(
                &folded,
                &LanczosOptions {
                    nev,
                    basis_size: size,
                    max_matvecs: size,
                    seed: opts.seed,
                },
                start,
                &[],
                |_| Verdict::Done,
            );
            matvecs += probe.matvecs * folded.cost();
            // Ritz values bound the folded eigenvalues from above, so every
            // wanted state lies below `cut`
            let cut = probe.values.last().copied().unwrap_or_else(T::zero);
            let reach = (smax - sigma).abs().max((smin - sigma).abs()) + slack;
            let top = reach * reach;
            let mut seed = vec![T::zero(); h.dim()];
            for v in &probe.vectors {
                axpy(T::one(), v, &mut seed);
            }
            seeded = Some(seed);
            log.push(format!(
                "filter degree {} cut {:.6e} top {:.6e}",
                opts.filter_degree,
                cut.to_f64_lossy(),
                top.to_f64_lossy()
            ));
            if cut < top {
                TransformMode::FilteredFolded {
                    sigma,
                    degree: opts.filter_degree,
                    cut,
                    top,
                }
            } else {
                mode
            }
        }
        _ => mode,
    };
    let start = seeded.as_deref();
    let mut op = spectral_transform(h, mode, solver)?;
    let mut excluded = Vec::new();
    let mut first = pass_with_exclusions(
        h,
        &op,
        window,
        opts,
        opts.k,
        start,
        &[],
        &mut excluded,
        opts.max_matvecs,
        &mut log,
    );
    matvecs += first.matvecs;
    let mut restarts = first.restarts;
    let mut retries = 0;
    while first.stalled && retries < STALL_RETRIES && matvecs < opts.max_matvecs {
        retries += 1;
        // converged Ritz pairs whose true residual sits above the Lanczos
        // estimate are never refined by restarts; rebuild the Krylov space
        // from them. The filtered operator can also resolve its own
        // eigenvalue long before H residuals reach tol, so it hands over to
        // the plain fold.
        if let TransformMode::FilteredFolded { sigma, .. } = op.mode() {
            log.push("filtered fold stalled; continuing on the plain fold".into());
            op = spectral_transform(h, TransformMode::Folded(sigma), None)?;
        } else {
            log.push("stalled; restarting from the current states".into());
        }
        let mut seed = vec![T::zero(); h.dim()];
        for s in &first.states {
            axpy(T::one(), &s.amplitudes, &mut seed);
        }
        excluded.clear();
        first = pass_with_exclusions(
            h,
            &op,
            window,
            opts,
            opts.k,
            Some(&seed),
            &[],
            &mut excluded,
            opts.max_matvecs.saturating_sub(matvecs),
            &mut log,
        );
        matvecs += first.matvecs;
        restarts += first.restarts;
    }
    let mut converged = first.converged;
    let mut states = first.states;
    let cluster_tol = T::of(opts.cluster_tol);

    while converged && states.len() < h.dim() {
        let budget = opts.max_matvecs.saturating_sub(matvecs);
        if budget == 0 {
            converged = false;
            break;
        }
        let pass = pass_with_exclusions(
            h,
            &op,
            window,
            opts,
            1,
            None,
            &states,
            &mut excluded,
            budget,
            &mut log,
        );
        matvecs += pass.matvecs;
        restarts += pass.restarts;
        if !pass.converged {
            converged = false;
            break;
        }
        let Some(candidate) = pass.states.into_iter().next() else {
            break;
        };
        let wanted = states.len() < opts.k
            || states
                .last()
                .map_or(true, |last| candidate.energy <= last.energy + cluster_tol);
        if !wanted {
            break;
        }
        log.push(format!(
            "deflated pass found an extra state at {:.10e} eV",
            candidate.energy.to_f64_lossy()
        ));
        states.push(candidate);
        states.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
        // keep k states plus whatever completes the k-th state's cluster
        if states.len() > opts.k {
            let mut keep = opts.k;
            while keep < states.len()
                && states[keep].energy - states[keep - 1].energy <= cluster_tol
            {
                keep += 1;
            }
            states.truncate(keep);
        }
    }
    let mut states = polish(h, &states);
    matvecs += states.len();
    if converged && states.iter().any(|s| s.residual.to_f64_lossy() > opts.tol) {
        converged = false;
    }
    assign_clusters(&mut states, opts.cluster_tol);
    log.push(format!(
        "finished converged={converged} states={} max residual {:.3e} eV matvecs={matvecs} restarts={restarts}",
        states.len(),
        states.iter().map(|s| s.residual.to_f64_lossy()).fold(0.0, f64::max)
    ));
    if !converged {
        log::warn!(
            "eigensolver stopped without meeting tolerance {:e} eV",
            opts.tol
        );
    }
    Ok(SolveOutcome {
        states,
        converged,
        matvecs,
        restarts,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let h = DenseOperator::diagonal(&[1.0f64, 2.0]);
        let opts = SolverOptions {
            k: 1,
            ..Default::default()
        };
        let out = lowest_states(
            &h,
            EnergyWindow {
                lo: -10.0,
                hi: 10.0,
            },
            TransformMode::Plain,
            &opts,
            None,
            None,
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.states.len(), 1);
        assert!((out.states[0].energy - 1.0).abs() < 1e-14);
        assert!((out.states[0].amplitudes[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn folded_finds_interior_states() {
        let d: Vec<f64> = (0..300).map(|i| (i as f64 - 150.0) * 0.1).collect();
        let h = DenseOperator::diagonal(&d);
        let opts = SolverOptions {
            k: 2,
            basis_size: 30,
            ..Default::default()
        };
        let out = lowest_states(
            &h,
            EnergyWindow {
                lo: 0.53,
                hi: 100.0,
            },
            TransformMode::Folded(0.53),
            &opts,
            None,
            None,
        )
        .unwrap();
        assert!(out.converged);
        let e: Vec<f64> = out.states.iter().map(|s| s.energy).collect();
        assert!(
            (e[0] - 0.6).abs() < 1e-9 && (e[1] - 0.7).abs() < 1e-9,
            "{e:?}"
        );
    }

    #[test]
    fn shift_invert_needs_solver() {
        let h = DenseOperator::diagonal(&[1.0f64, 2.0]);
        assert!(matches!(
            spectral_transform(&h, TransformMode::ShiftInvert(0.5), None),
            Err(EigenError::MissingSolver)
        ));
        assert!(matches!(
            spectral_transform(&h, TransformMode::Folded(f64::NAN), None),
            Err(EigenError::InvalidArgument(_))
        ));
    }

    #[test]
    fn window_outside_spectrum() {
        let h = DenseOperator::diagonal(&[1.0f64, 2.0, 3.0]);
        let err = lowest_states(
            &h,
            EnergyWindow { lo: 50.0, hi: 60.0 },
            TransformMode::Folded(50.0),
            &SolverOptions::default(),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, EigenError::EmptyWindow { .. }));
    }

    #[test]
    fn clusters_group_degenerate_levels() {
        let h = DenseOperator::diagonal(&[1.0f64, 1.0, 1.0 + 1e-9, 2.0, 3.0, 4.0]);
        let out = lowest_states(
            &h,
            EnergyWindow { lo: 0.0, hi: 10.0 },
            TransformMode::Plain,
            &SolverOptions {
                k: 4,
                ..Default::default()
            },
            None,
            None,
        )
        .unwrap();
        let ids: Vec<usize> = out.states.iter().map(|s| s.cluster).collect();
        assert_eq!(ids, vec![0, 0, 0, 1]);
        assert_eq!(out.ground_cluster().len(), 3);
    }

    fn random_sparse(n: usize, seed: u64) -> DenseOperator<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = rng.gen_range(-3.0..3.0);
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                let v = rng.gen_range(-1.0..1.0);
                a[i * n + j] += v;
                a[j * n + i] += v;
            }
        }
        DenseOperator::new(n, a)
    }

    fn dense_eigenvalues(op: &DenseOperator<f64>) -> Vec<f64> {
        let n = op.dim();
        let m = DMatrix::from_row_slice(n, n, op.as_slice());
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn random_sparse_matches_dense() {
        let h = random_sparse(200, 7);
        let exact = dense_eigenvalues(&h);
        let out = lowest_states(
            &h,
            EnergyWindow { lo: -1e3, hi: 1e3 },
            TransformMode::Plain,
            &SolverOptions {
                k: 5,
                ..Default::default()
            },
            None,
            None,
        )
        .unwrap();
        assert!(out.converged);
        for (s, e) in out.states.iter().zip(&exact) {
            assert!((s.energy - e).abs() < 1e-8, "{} vs {e}", s.energy);
            assert!(s.residual <= 1e-8);
        }
        for a in &out.states {
            for b in &out.states {
                let d = dot(&a.amplitudes, &b.amplitudes);
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn midgap_shift_recovers_nearest_states() {
        let h = random_sparse(200, 11);
        let exact = dense_eigenvalues(&h);
        // widest gap in the middle third of the spectrum
        let (i, _) = (60..140)
            .map(|i| (i, exact[i + 1] - exact[i]))
            .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
        let sigma = 0.5 * (exact[i] + exact[i + 1]);
        for degree in [0, 8] {
            let out = lowest_states(
                &h,
                EnergyWindow { lo: sigma, hi: 1e3 },
                TransformMode::Folded(sigma),
                &SolverOptions {
                    k: 2,
                    filter_degree: degree,
                    ..Default::default()
                },
                None,
                None,
            )
            .unwrap();
            assert!(out.converged, "degree {degree}");
            assert!((out.states[0].energy - exact[i + 1]).abs() < 1e-8);
            assert!((out.states[1].energy - exact[i + 2]).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_partners_are_found() {
        let mut d: Vec<f64> = (0..400).map(|i| -5.0 + 0.01 * i as f64).collect();
        d[200] = 1.0;
        d[201] = 1.0;
        d[202] = 1.0;
        d[203] = 1.0 + 1e-3;
        let h = DenseOperator::diagonal(&d);
        let modes = [
            (TransformMode::Plain, -10.0, vec![-5.0, -4.99, -4.98]),
            (TransformMode::Folded(0.99), 0.99, vec![1.0, 1.0, 1.0]),
        ];
        for (mode, lo, want) in modes {
            let out = lowest_states(
                &h,
                EnergyWindow { lo, hi: 100.0 },
                mode,
                &SolverOptions {
                    k: 3,
                    basis_size: 30,
                    ..Default::default()
                },
                None,
                None,
            )
            .unwrap();
            assert!(out.converged, "{mode:?}");
            let e: Vec<f64> = out.states.iter().map(|s| s.energy).collect();
            for (a, b) in e.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "{mode:?}: {e:?}");
            }
            if let TransformMode::Folded(_) = mode {
                assert_eq!(out.ground_cluster().len(), 3);
            }
        }
    }

    #[test]
    fn same_seed_same_result() {
        let h = random_sparse(150, 3);
        let run = || {
            lowest_states(
                &h,
                EnergyWindow { lo: -1e3, hi: 1e3 },
                TransformMode::Plain,
                &SolverOptions {
                    k: 2,
                    ..Default::default()
                },
                None,
                None,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.states[0].energy, b.states[0].energy);
        assert_eq!(a.states[0].amplitudes, b.states[0].amplitudes);
    }

    struct DenseLu(DMatrix<f64>);

    impl ShiftedSolve<f64> for DenseLu {
        fn solve(&self, sigma: f64, b: &[f64], x: &mut [f64]) {
            let n = self.0.nrows();
            let a = &self.0 - DMatrix::identity(n, n) * sigma;
            let sol = a.lu().solve(&nalgebra::DVector::from_column_slice(b)).unwrap();
            x.copy_from_slice(sol.as_slice());
        }
    }

    #[test]
    fn shift_invert_with_dense_solver() {
        let h = random_sparse(120, 5);
        let exact = dense_eigenvalues(&h);
        let sigma = 0.5 * (exact[59] + exact[60]);
        let lu = DenseLu(DMatrix::from_row_slice(120, 120, h.as_slice()));
        let out = lowest_states(
            &h,
            EnergyWindow { lo: sigma, hi: 1e3 },
            TransformMode::ShiftInvert(sigma),
            &SolverOptions {
                k: 3,
                ..Default::default()
            },
            None,
            Some(&lu),
        )
        .unwrap();
        assert!(out.converged);
        for (s, e) in out.states.iter().zip(&exact[60..]) {
            assert!((s.energy - e).abs() < 1e-8, "{} vs {e}", s.energy);
        }
    }
}
