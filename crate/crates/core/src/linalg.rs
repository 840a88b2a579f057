//! Dense symmetric-matrix primitives.
//!
//! Everything here is a pure function of its inputs. Matrices are stored as
//! `nalgebra::DMatrix<f64>` (column-major); a [`DataMatrix`] keeps each
//! variable in one contiguous column.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of the largest one count as zero.
pub const SINGULAR_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Negative eigenvalues above this (absolute, after scaling by `max(1, λ_max)`) are rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-6;

/// An `n × p` sample; rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DataMatrix {
    /// Wraps a matrix after checking shape and finiteness.
    ///
    /// Zero-variance columns are accepted here and rejected when a correlation
    /// matrix is formed, since the covariance of such data is still well defined.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::InsufficientSample { n });
        }
        if p < 2 {
            return Err(Error::Dimension(format!("need at least 2 variables, got {p}")));
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        let names = (1..=p).map(|j| format!("X{j}")).collect();
        Ok(Self { values, names })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!("row {bad} has {} entries, expected {p}", rows[bad].len())));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("columns have different lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| columns[j][i]))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.ncols() {
            return Err(Error::Dimension(format!("{} names for {} columns", names.len(), self.ncols())));
        }
        self.names = names;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Contiguous view of column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.nrows();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub(crate) fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.nrows();
        &mut self.values.as_mut_slice()[j * n..(j + 1) * n]
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// A real symmetric matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Rejects non-square input and input whose asymmetry exceeds `1e-8`
    /// relative to its largest entry; otherwise averages with the transpose.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-8 * scale {
            return Err(Error::InvalidParameter(format!("matrix is not symmetric (max |m - mᵀ| = {asym:e})")));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let s = (&m + m.transpose()) * 0.5;
        Self(s)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// A correlation matrix: symmetric, unit diagonal, entries in `[-1, 1]`,
/// numerically positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(SymmetricMatrix);

impl CorrelationMatrix {
    /// Validates every invariant, including an eigenvalue check.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let sym = SymmetricMatrix::new(m)?;
        let p = sym.dim();
        for i in 0..p {
            if (sym.0[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("diagonal entry {i} is {} rather than 1", sym.0[(i, i)])));
            }
        }
        if sym.0.iter().any(|v| v.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidParameter("entry outside [-1, 1]".into()));
        }
        let min_ev = sym.eigenvalues().first().copied().unwrap_or(0.0);
        if min_ev < -1e-10 {
            return Err(Error::NotPsd { min_eigenvalue: min_ev });
        }
        Ok(Self::from_symmetric_unchecked(sym))
    }

    /// Sets the diagonal to exactly one and clips entries into `[-1, 1]`;
    /// the caller guarantees positive semidefiniteness.
    pub(crate) fn from_symmetric_unchecked(mut sym: SymmetricMatrix) -> Self {
        let p = sym.dim();
        for v in sym.0.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
        for i in 0..p {
            sym.0[(i, i)] = 1.0;
        }
        Self(sym)
    }

    pub fn identity(p: usize) -> Self {
        Self(SymmetricMatrix::identity(p))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0 .0
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.0
    }

    /// Correlation matrix of the variables in `indices`, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> CorrelationMatrix {
        let m = self.matrix();
        let k = indices.len();
        let sub = DMatrix::from_fn(k, k, |a, b| m[(indices[a], indices[b])]);
        Self(SymmetricMatrix(sub))
    }
}

impl From<CorrelationMatrix> for SymmetricMatrix {
    fn from(c: CorrelationMatrix) -> Self {
        c.0
    }
}

/// Sample mean and the unbiased (`1/(n-1)`) sample covariance.
pub fn sample_mean_cov(data: &DataMatrix) -> Result<(DVector<f64>, SymmetricMatrix)> {
    let (n, p) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::InsufficientSample { n });
    }
    let mean = DVector::from_fn(p, |j, _| data.column(j).iter().sum::<f64>() / n as f64);
    let mut centered = data.values().clone();
    for j in 0..p {
        let mu = mean[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= mu);
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    Ok((mean, SymmetricMatrix::symmetrized(cov)))
}

/// `diag(Σ)^{-1/2} Σ diag(Σ)^{-1/2}`.
pub fn correlation_from_cov(cov: &SymmetricMatrix) -> Result<CorrelationMatrix> {
    let m = cov.matrix();
    let p = cov.dim();
    let mut inv_sd = Vec::with_capacity(p);
    for j in 0..p {
        let d = m[(j, j)];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::DegenerateVariable { column: j });
        }
        inv_sd.push(1.0 / d.sqrt());
    }
    let corr = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { m[(i, j)] * inv_sd[i] * inv_sd[j] });
    Ok(CorrelationMatrix::from_symmetric_unchecked(SymmetricMatrix::symmetrized(corr)))
}

/// Sample correlation matrix of the data.
pub fn sample_correlation(data: &DataMatrix) -> Result<CorrelationMatrix> {
    let (_, cov) = sample_mean_cov(data)?;
    correlation_from_cov(&cov)
}

/// `log det(M)` for a symmetric positive semidefinite matrix.
///
/// Well-conditioned matrices go through a Cholesky factorization; anything
/// else is decided on its eigenvalues. Returns `-∞` when an eigenvalue is
/// at most `1e-12 · λ_max`.
pub fn log_det_psd(m: &SymmetricMatrix) -> f64 {
    log_det_sym(m.matrix())
}

pub(crate) fn log_det_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        let l = chol.l_dirty();
        let (mut lo, mut hi, mut acc) = (f64::INFINITY, 0.0f64, 0.0);
        for i in 0..m.nrows() {
            let d = l[(i, i)];
            lo = lo.min(d * d);
            hi = hi.max(d * d);
            acc += d.ln();
        }
        if lo > 1e-6 * hi {
            return 2.0 * acc;
        }
    }
    log_det_eigen(m)
}

fn log_det_eigen(m: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = ev.max();
    if !(max > 0.0) {
        return f64::NEG_INFINITY;
    }
    if ev.iter().any(|&l| l <= SINGULAR_RELATIVE_THRESHOLD * max) {
        return f64::NEG_INFINITY;
    }
    ev.iter().map(|l| l.ln()).sum()
}

/// Symmetric positive semidefinite square root via a full eigendecomposition.
///
/// Small negative eigenvalues are clamped to zero; anything below
/// `-1e-6 · max(1, λ_max)` is an error.
pub fn sqrt_psd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = SymmetricEigen::new(m.matrix().clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE * max.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*r);
    }
    Ok(SymmetricMatrix::symmetrized(&scaled * u.transpose()))
}

/// Entrywise product.
pub fn hadamard(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("hadamard of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(a.component_mul(b))
}

/// Sum of squared entries.
pub fn frobenius_norm_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn trace(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("trace of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(m.trace())
}
