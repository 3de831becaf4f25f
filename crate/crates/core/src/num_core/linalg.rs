use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num_core::Real;

const PIVOT_TOLERANCE: f64 = 1e-10;
const EIGEN_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::domain(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data
            .chunks(self.dim.max(1))
            .map(<[T]>::to_vec)
            .take(self.dim)
            .collect()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::domain("matrix dimensions differ"));
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.dim {
            return Err(Error::domain(format!(
                "vector length {} does not match matrix dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(self
            .data
            .chunks(self.dim.max(1))
            .take(self.dim)
            .map(|row| {
                row.iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    pub fn frobenius_distance(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Symmetric, unit-diagonal, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Real> CorrelationMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            inner: Matrix::identity(dim),
        }
    }

    /// All off-diagonal entries equal to `rho`. Errors if the result is not PSD,
    /// which happens for `rho < −1/(dim−1)`.
    pub fn equicorrelated(dim: usize, rho: T) -> Result<Self> {
        let mut m = Matrix::identity(dim);
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    m[(i, j)] = rho;
                }
            }
        }
        Self::new(m)
    }

    /// Block-diagonal matrix with an equicorrelated block per `(size, rho)`.
    pub fn blocks(blocks: &[(usize, T)]) -> Result<Self> {
        let dim: usize = blocks.iter().map(|b| b.0).sum();
        let mut m = Matrix::identity(dim);
        let mut start = 0;
        for &(size, rho) in blocks {
            for i in start..start + size {
                for j in start..start + size {
                    if i != j {
                        m[(i, j)] = rho;
                    }
                }
            }
            start += size;
        }
        Self::new(m)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::domain("correlation matrix must have dimension >= 1"));
        }
        if m.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("correlation matrix has non-finite entries"));
        }
        if !m.is_symmetric(T::lit(SYMMETRY_TOLERANCE)) {
            return Err(Error::domain("correlation matrix is not symmetric"));
        }
        for i in 0..m.dim() {
            if (m[(i, i)] - T::one()).abs() > T::lit(SYMMETRY_TOLERANCE) {
                return Err(Error::domain(format!(
                    "diagonal entry {i} is {}, expected 1",
                    m[(i, i)]
                )));
            }
            for j in 0..m.dim() {
                if m[(i, j)].abs() > T::one() + T::lit(SYMMETRY_TOLERANCE) {
                    return Err(Error::domain(format!(
                        "entry ({i}, {j}) exceeds 1 in magnitude"
                    )));
                }
            }
        }
        let smallest = jacobi(&m, false)?.0.last().copied().unwrap_or_else(T::one);
        if smallest < T::lit(-EIGEN_TOLERANCE) {
            return Err(Error::domain(format!(
                "correlation matrix is not positive semidefinite (eigenvalue {smallest})"
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    /// Principal submatrix over `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&i| i >= self.dim()) {
            return Err(Error::domain("submatrix index out of range"));
        }
        let mut m = Matrix::zeros(indices.len());
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                m[(a, b)] = self.inner[(i, j)];
            }
        }
        Ok(Self { inner: m })
    }
}

impl Serialize for CorrelationMatrix<f64> {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.inner.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Lower-triangular factor with a nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T> {
    inner: Matrix<T>,
}

impl<T: Real> LowerTriangular<T> {
    /// Wraps `m` after zeroing everything above the diagonal.
    pub fn from_matrix(mut m: Matrix<T>) -> Self {
        for i in 0..m.dim() {
            for j in i + 1..m.dim() {
                m[(i, j)] = T::zero();
            }
        }
        Self { inner: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: Matrix::identity(dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: Matrix::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    /// L·Lᵀ.
    pub fn reconstruct(&self) -> Matrix<T> {
        self.inner
            .matmul(&self.inner.transpose())
            .expect("square factor multiplies with its transpose")
    }

    /// Writes L·z into `out`, skipping the zero upper triangle.
    pub fn apply_into(&self, z: &[T], out: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..=i {
                acc = acc + self.inner[(i, j)] * z[j];
            }
            out[i] = acc;
        }
    }
}

/// Cholesky factor L with L·Lᵀ = m. Pivots in [−1e-10, 0] are treated as zero,
/// so rank-deficient correlation structures factor without error.
pub fn cholesky_lower<T: Real>(m: &CorrelationMatrix<T>) -> Result<LowerTriangular<T>> {
    cholesky_matrix(m.matrix())
}

pub(crate) fn cholesky_matrix<T: Real>(m: &Matrix<T>) -> Result<LowerTriangular<T>> {
    let n = m.dim();
    let tol = T::lit(PIVOT_TOLERANCE);
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot = pivot - l[(j, k)] * l[(j, k)];
        }
        if pivot < -tol {
            return Err(Error::Factorization {
                row: j,
                pivot: pivot.as_f64(),
            });
        }
        // Round-off in rank-deficient inputs leaves pivots near 1e-16 of either sign.
        if pivot <= tol {
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(LowerTriangular { inner: l })
}

/// Eigenvalues of a symmetric matrix in descending order (cyclic Jacobi).
pub fn symmetric_eigenvalues<T: Real>(m: &Matrix<T>) -> Result<Vec<T>> {
    Ok(jacobi(m, false)?.0)
}

/// Eigenvalues in descending order and the matching unit eigenvectors as columns.
pub fn symmetric_eigen<T: Real>(m: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let (values, vectors) = jacobi(m, true)?;
    Ok((values, vectors.expect("vectors requested")))
}

fn jacobi<T: Real>(m: &Matrix<T>, want_vectors: bool) -> Result<(Vec<T>, Option<Matrix<T>>)> {
    let n = m.dim();
    let scale = m.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if !m.is_symmetric(T::lit(SYMMETRY_TOLERANCE) * scale.max(T::one())) {
        return Err(Error::domain("matrix is not symmetric"));
    }
    let mut a = m.clone();
    let mut v = want_vectors.then(|| Matrix::identity(n));
    let two = T::lit(2.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
        if off.sqrt() <= T::epsilon() * scale.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.map(|v| {
        let mut sorted = Matrix::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                sorted[(row, col)] = v[(row, src)];
            }
        }
        sorted
    });
    Ok((values, vectors))
}
