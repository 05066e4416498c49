use faer::{Mat, Side};
use nalgebra::DMatrix;

/// Eigenpairs of a small symmetric matrix, eigenvalues ascending, eigenvectors
/// as columns. Only the lower triangle is read.
pub(crate) fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let m = Mat::from_fn(n, n, |i, j| a[(i, j)]);
    // nalgebra 0.33 can return eigenvectors rotated by ~1e-3 when the
    // off-diagonal part is tiny, which spoils converged Ritz vectors
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let s = eig.S();
    let u = eig.U();
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    (values, vectors)
}
