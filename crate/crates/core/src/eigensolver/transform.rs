use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::operator::LinearOperator;
use super::EigenError;
use crate::scalar::Real;

/// How interior eigenvalues near σ are turned into extremal ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TransformMode<T> {
    /// The operator itself; finds the bottom of the spectrum.
    Plain,
    /// (H − σ)²: states nearest σ on either side come first.
    Folded(T),
    /// −(H − σ)⁻¹: states just above σ come first. Needs a linear solver.
    ShiftInvert(T),
    /// −T_d(ℓ((H − σ)²)), with ℓ mapping the folded interval [cut, top] onto
    /// [1, −1]. Folded values below `cut` keep their order and are stretched
    /// away from the rest; `top` must bound the folded spectrum. Costs
    /// `2·degree` applications of H.
    FilteredFolded {
        sigma: T,
        degree: usize,
        cut: T,
        top: T,
    },
}

impl<T: Real> TransformMode<T> {
    pub fn shift(&self) -> Option<T> {
        match *self {
            TransformMode::Plain => None,
            TransformMode::Folded(s) | TransformMode::ShiftInvert(s) => Some(s),
            TransformMode::FilteredFolded { sigma, .. } => Some(sigma),
        }
    }
}

/// Solves (H − σ) x = b for the shift-invert transform.
pub trait ShiftedSolve<T: Real>: Sync {
    fn solve(&self, sigma: T, b: &[T], x: &mut [T]);
}

pub struct Transformed<'a, T: Real, A: LinearOperator<T> + ?Sized> {
    op: &'a A,
    mode: TransformMode<T>,
    solver: Option<&'a dyn ShiftedSolve<T>>,
    scratch: Mutex<Vec<Vec<T>>>,
}

/// Wraps `op` in the requested spectral transform.
pub fn spectral_transform<'a, T: Real, A: LinearOperator<T> + ?Sized>(
    op: &'a A,
    mode: TransformMode<T>,
    solver: Option<&'a dyn ShiftedSolve<T>>,
) -> Result<Transformed<'a, T, A>, EigenError> {
    if let Some(s) = mode.shift() {
        if !s.is_finite() {
            return Err(EigenError::InvalidArgument(format!("shift must be finite, got {s}")));
        }
    }
    let buffers = match mode {
        TransformMode::ShiftInvert(_) if solver.is_none() => return Err(EigenError::MissingSolver),
        TransformMode::FilteredFolded { degree, cut, top, .. } => {
            if degree == 0 || !(cut >= T::zero() && top > cut) {
                return Err(EigenError::InvalidArgument(format!(
                    "filter needs degree >= 1 and 0 <= cut < top, got degree {degree}, cut {cut}, top {top}"
                )));
            }
            4
        }
        TransformMode::Folded(_) => 1,
        _ => 0,
    };
    Ok(Transformed {
        op,
        mode,
        solver,
        scratch: Mutex::new(vec![vec![T::zero(); op.dim()]; buffers]),
    })
}

impl<'a, T: Real, A: LinearOperator<T> + ?Sized> Transformed<'a, T, A> {
    pub fn mode(&self) -> TransformMode<T> {
        self.mode
    }

    /// Image of an eigenvalue of the original operator.
    pub fn map_eigenvalue(&self, e: T) -> T {
        match self.mode {
            TransformMode::Plain => e,
            TransformMode::Folded(s) => (e - s) * (e - s),
            TransformMode::ShiftInvert(s) => -T::one() / (e - s),
            TransformMode::FilteredFolded { sigma, degree, cut, top } => {
                let x = (e - sigma) * (e - sigma);
                let l = -(T::of(2.0) * x - (cut + top)) / (top - cut);
                -chebyshev(degree, l)
            }
        }
    }

    /// Number of operator applications per transformed application.
    pub fn cost(&self) -> usize {
        match self.mode {
            TransformMode::Folded(_) => 2,
            TransformMode::FilteredFolded { degree, .. } => 2 * degree,
            _ => 1,
        }
    }
}

/// y = (A − σ)² x, using `t` as scratch.
fn fold<T: Real, A: LinearOperator<T> + ?Sized>(op: &A, s: T, x: &[T], y: &mut [T], t: &mut [T]) {
    op.apply(x, t);
    for (ti, &xi) in t.iter_mut().zip(x) {
        *ti = *ti - s * xi;
    }
    op.apply(t, y);
    for (yi, &ti) in y.iter_mut().zip(t.iter()) {
        *yi = *yi - s * ti;
    }
}

/// Chebyshev polynomial T_d(x), valid inside and outside [−1, 1].
pub(crate) fn chebyshev<T: Real>(d: usize, x: T) -> T {
    let (mut a, mut b) = (T::one(), x);
    if d == 0 {
        return a;
    }
    for _ in 1..d {
        let c = T::of(2.0) * x * b - a;
        a = b;
        b = c;
    }
    b
}

impl<'a, T: Real, A: LinearOperator<T> + ?Sized> LinearOperator<T> for Transformed<'a, T, A> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match self.mode {
            TransformMode::Plain => self.op.apply(x, y),
            TransformMode::Folded(s) => {
                let mut buf = self.scratch.lock().expect("scratch lock");
                fold(self.op, s, x, y, &mut buf[0]);
            }
            TransformMode::FilteredFolded { sigma, degree, cut, top } => {
                let mut buf = self.scratch.lock().expect("scratch lock");
                let [t, prev, cur, next] = &mut buf[..] else {
                    unreachable!("four filter buffers")
                };
                let c1 = -T::of(2.0) / (top - cut);
                let c0 = (cut + top) / (top - cut);
                // ℓ(F) v = c1·F v + c0·v
                let ell = |v: &[T], out: &mut [T], t: &mut [T]| {
                    fold(self.op, sigma, v, out, t);
                    for (o, &vi) in out.iter_mut().zip(v) {
                        *o = c1 * *o + c0 * vi;
                    }
                };
                prev.copy_from_slice(x);
                ell(x, cur, t);
                for _ in 1..degree {
                    ell(cur, next, t);
                    for (n, &p) in next.iter_mut().zip(prev.iter()) {
                        *n = T::of(2.0) * *n - p;
                    }
                    std::mem::swap(prev, cur);
                    std::mem::swap(cur, next);
                }
                for (yi, &ci) in y.iter_mut().zip(cur.iter()) {
                    *yi = -ci;
                }
            }
            TransformMode::ShiftInvert(s) => {
                let solver = self.solver.expect("checked at construction");
                solver.solve(s, x, y);
                for yi in y.iter_mut() {
                    *yi = -*yi;
                }
            }
        }
    }
}
