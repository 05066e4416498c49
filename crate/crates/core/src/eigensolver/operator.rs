use crate::scalar::Real;

/// Symmetric linear operator applied matrix-free: `y ← A x`.
pub trait LinearOperator<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[T], y: &mut [T]);

    fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: Real, A: LinearOperator<T> + ?Sized> LinearOperator<T> for &A {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

/// Dense symmetric matrix stored row-major; for small problems and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseOperator<T> {
    /// `data` is row-major `n × n`; only the lower triangle is read and
    /// mirrored, so the stored operator is exactly symmetric.
    pub fn new(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "dense operator needs n*n entries");
        let mut data = data;
        for i in 0..n {
            for j in 0..i {
                data[j * n + i] = data[i * n + j];
            }
        }
        DenseOperator { n, data }
    }

    pub fn diagonal(d: &[T]) -> Self {
        let n = d.len();
        let mut data = vec![T::zero(); n * n];
        for (i, &v) in d.iter().enumerate() {
            data[i * n + i] = v;
        }
        DenseOperator { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Real> LinearOperator<T> for DenseOperator<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = crate::scalar::dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}
