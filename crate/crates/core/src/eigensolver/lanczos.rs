//! Thick-restart Lanczos for the smallest eigenpairs of a symmetric operator.
//!
//! Every new Lanczos vector is orthogonalized twice against the whole stored
//! basis (classical Gram-Schmidt with one refinement pass). When the basis
//! reaches `basis_size`, it is compressed onto the lowest Ritz vectors plus
//! the current residual direction and the recurrence continues from there.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operator::LinearOperator;
use crate::scalar::{axpy, dot, norm, scale, Real};

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Number of wanted (smallest) eigenpairs.
    pub nev: usize,
    /// Maximum number of stored Lanczos vectors.
    pub basis_size: usize,
    /// Budget of operator applications.
    pub max_matvecs: usize,
    pub seed: u64,
}

/// What the convergence callback reports back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Done,
}

/// Ritz data handed to the convergence callback after each cycle.
pub struct RitzView<'a, T> {
    pub values: &'a [T],
    pub vectors: &'a [Vec<T>],
    /// Residual estimates ‖A x − θ x‖ from the projected problem.
    pub residuals: &'a [T],
    /// True when the basis spans an invariant subspace (results are exact).
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct LanczosOutcome<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub matvecs: usize,
    pub restarts: usize,
    pub done: bool,
}

fn random_unit<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v: Vec<T> = (0..n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect();
    let nv = norm(&v);
    scale(T::one() / nv, &mut v);
    v
}

/// Classical Gram-Schmidt of `w` against `basis`, repeated once when the
/// first pass removed most of the norm. Returns the summed coefficients.
fn orthogonalize<T: Real>(basis: &[Vec<T>], w: &mut [T]) -> Vec<T> {
    let mut total = vec![T::zero(); basis.len()];
    let mut before = norm(w);
    for _ in 0..2 {
        let h: Vec<T> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &hi) in basis.iter().zip(&h) {
            axpy(-hi, v, w);
        }
        for (t, hi) in total.iter_mut().zip(h) {
            *t = *t + hi;
        }
        let after = norm(w);
        if after > T::of(0.717) * before {
            break;
        }
        before = after;
    }
    total
}

/// Replaces `basis[..cols]` by `basis · s[:, ..cols]` in place.
fn rotate_basis<T: Real>(basis: &mut [Vec<T>], s: &DMatrix<f64>, cols: usize) {
    const BLOCK: usize = 256;
    let m = s.nrows();
    let n = basis[0].len();
    let sm: Vec<T> = (0..m * cols)
        .map(|idx| T::of(s[(idx / cols, idx % cols)]))
        .collect();
    let mut inbuf = vec![T::zero(); m * BLOCK];
    let mut outbuf = vec![T::zero(); cols * BLOCK];
    let mut start = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        for j in 0..m {
            inbuf[j * BLOCK..j * BLOCK + len].copy_from_slice(&basis[j][start..start + len]);
        }
        for o in outbuf.iter_mut() {
            *o = T::zero();
        }
        for j in 0..m {
            let row = &inbuf[j * BLOCK..j * BLOCK + len];
            for i in 0..cols {
                let c = sm[j * cols + i];
                let out = &mut outbuf[i * BLOCK..i * BLOCK + len];
                for (o, &r) in out.iter_mut().zip(row) {
                    *o = *o + c * r;
                }
            }
        }
        for i in 0..cols {
            basis[i][start..start + len].copy_from_slice(&outbuf[i * BLOCK..i * BLOCK + len]);
        }
        start += len;
    }
}

/// Orthonormalizes `v` against `locked`; `None` if nothing is left.
fn deflate<T: Real>(locked: &[Vec<T>], mut v: Vec<T>) -> Option<Vec<T>> {
    let before = norm(&v);
    orthogonalize(locked, &mut v);
    let nv = norm(&v);
    if !(nv > T::of(1e-8) * before) {
        return None;
    }
    scale(T::one() / nv, &mut v);
    Some(v)
}

/// Runs thick-restart Lanczos until `check` returns [`Verdict::Done`] or the
/// matvec budget is spent. `start` seeds the Krylov space; a seeded random
/// vector is used otherwise.
///
/// The search is restricted to the orthogonal complement of `locked`
/// (orthonormal vectors, typically eigenvectors found earlier).
pub fn thick_restart_lanczos<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    opts: &LanczosOptions,
    start: Option<&[T]>,
    locked: &[Vec<T>],
    mut check: impl FnMut(&RitzView<'_, T>) -> Verdict,
) -> LanczosOutcome<T> {
    let n = op.dim() - locked.len().min(op.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if n == 0 {
        return LanczosOutcome {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
            matvecs: 0,
            restarts: 0,
            done: true,
        };
    }
    let m = opts.basis_size.min(n).max(opts.nev.min(n) + 1).min(n);
    let nev = opts.nev.min(m);

    let first = start
        .filter(|s| norm(s) > T::zero())
        .and_then(|s| deflate(locked, s.to_vec()))
        .unwrap_or_else(|| loop {
            if let Some(v) = deflate(locked, random_unit(op.dim(), &mut rng)) {
                break v;
            }
        });
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    basis.push(first);
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut p = 0usize;
    let mut matvecs = 0usize;
    let mut restarts = 0usize;
    let mut w = vec![T::zero(); op.dim()];

    loop {
        // expand the basis from p to m vectors
        let mut size = m;
        let mut last_beta = 0.0;
        let mut exhausted = false;
        for j in p..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            // locked directions are the most amplified ones, so they are
            // removed both before and after the basis projection
            orthogonalize(locked, &mut w);
            let h = orthogonalize(&basis[..=j], &mut w);
            orthogonalize(locked, &mut w);
            t[(j, j)] = h[j].to_f64_lossy();
            let mut beta = norm(&w);
            let tnorm = t.diagonal().amax().max(1e-300);
            if beta.to_f64_lossy() <= 1e-12 * tnorm {
                // invariant subspace: continue with a fresh orthogonal direction
                if basis.len() >= n {
                    size = j + 1;
                    exhausted = true;
                    last_beta = 0.0;
                    break;
                }
                let mut r = random_unit(op.dim(), &mut rng);
                orthogonalize(locked, &mut r);
                orthogonalize(&basis[..=j], &mut r);
                orthogonalize(locked, &mut r);
                let nr = norm(&r);
                scale(T::one() / nr, &mut r);
                w.copy_from_slice(&r);
                beta = T::zero();
            } else {
                let inv = T::one() / beta;
                scale(inv, &mut w);
            }
            let b = beta.to_f64_lossy();
            if j + 1 < m {
                t[(j + 1, j)] = b;
                t[(j, j + 1)] = b;
            } else {
                last_beta = b;
            }
            basis.push(w.clone());
        }

        let proj = t.view((0, 0), (size, size)).into_owned();
        let (theta, s) = super::dense::symmetric_eigen(&proj);
        let res: Vec<f64> = (0..size)
            .map(|i| (last_beta * s[(size - 1, i)]).abs())
            .collect();

        let keep = if exhausted {
            size
        } else {
            (nev + (size - nev) / 2).clamp(nev, size - 1).max(1)
        };
        let residual_vec = if exhausted { None } else { basis.pop() };
        basis.truncate(size);
        rotate_basis(&mut basis, &s.columns(0, keep).into_owned(), keep);
        basis.truncate(keep);
        let want = nev.min(keep);
        let values: Vec<T> = theta[..want].iter().map(|&x| T::of(x)).collect();
        let residuals: Vec<T> = res[..want].iter().map(|&x| T::of(x)).collect();
        let verdict = check(&RitzView {
            values: &values,
            vectors: &basis[..want],
            residuals: &residuals,
            exhausted,
        });
        if verdict == Verdict::Done || exhausted || matvecs >= opts.max_matvecs {
            let vectors = basis[..want].to_vec();
            return LanczosOutcome {
                values,
                vectors,
                residuals,
                matvecs,
                restarts,
                done: verdict == Verdict::Done || exhausted,
            };
        }

        // thick restart: Ritz values on the diagonal, arrow couplings to the residual
        restarts += 1;
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
            let c = last_beta * s[(size - 1, i)];
            t[(keep, i)] = c;
            t[(i, keep)] = c;
        }
        basis.push(residual_vec.expect("residual kept when not exhausted"));
        p = keep;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::DenseOperator;

    #[test]
    fn diagonal_operator() {
        let d: Vec<f64> = (0..50).map(|i| i as f64 * 0.5 - 3.0).collect();
        let op = DenseOperator::diagonal(&d);
        let out = thick_restart_lanczos(
            &op,
            &LanczosOptions {
                nev: 3,
                basis_size: 12,
                max_matvecs: 2000,
                seed: 1,
            },
            None,
            &[],
            |v| {
                if v.residuals.iter().all(|r| *r < 1e-10) {
                    Verdict::Done
                } else {
                    Verdict::Continue
                }
            },
        );
        assert!(out.done);
        for (i, v) in out.values.iter().enumerate() {
            assert!((v - d[i]).abs() < 1e-9, "{v} vs {}", d[i]);
        }
        assert!(out.restarts > 0);
    }

    #[test]
    fn tiny_operator_exhausts() {
        let op = DenseOperator::diagonal(&[2.0f64, 1.0]);
        let out = thick_restart_lanczos(
            &op,
            &LanczosOptions {
                nev: 1,
                basis_size: 20,
                max_matvecs: 100,
                seed: 3,
            },
            None,
            &[],
            |_| Verdict::Continue,
        );
        assert!(out.done);
        assert!((out.values[0] - 1.0).abs() < 1e-14);
        assert!((out.vectors[0][1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locked_vectors_are_skipped() {
        let d: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let op = DenseOperator::diagonal(&d);
        let mut e0 = vec![0.0; 30];
        e0[0] = 1.0;
        let out = thick_restart_lanczos(
            &op,
            &LanczosOptions {
                nev: 1,
                basis_size: 30,
                max_matvecs: 100,
                seed: 5,
            },
            None,
            &[e0],
            |v| {
                if v.residuals[0] < 1e-12 {
                    Verdict::Done
                } else {
                    Verdict::Continue
                }
            },
        );
        assert!((out.values[0] - 1.0).abs() < 1e-10, "{:?}", out.values);
    }
}
