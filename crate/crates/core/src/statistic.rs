//! Fast evaluation of `|Z|` for resampled data.
//!
//! Permuting values within a column leaves its mean and norm unchanged, so
//! once every column is centered and scaled to unit norm the sample
//! correlation matrix is just `UᵀU` for the permuted `U`. Resampling and the
//! SAMC chain work on `U` directly and skip the covariance step.

use nalgebra::DMatrix;

use crate::asymptotics::NullCalibration;
use crate::error::{Error, Result};
use crate::linalg::{log_det_sym, DataMatrix};

/// Centers each column and scales it to unit Euclidean norm.
///
/// Errors with [`Error::DegenerateVariable`] on a constant column.
pub fn standardize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut u = x.clone();
    standardize_in_place(&mut u)?;
    Ok(u)
}

pub(crate) fn standardize_in_place(u: &mut DMatrix<f64>) -> Result<()> {
    let n = u.nrows() as f64;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        // relative test so that a constant column with rounding noise still counts as constant
        if !(norm > 0.0) || norm <= 1e-14 * mean.abs() * n.sqrt() {
            return Err(Error::DegenerateVariable { column: j });
        }
        col /= norm;
    }
    Ok(())
}

/// `UᵀU` with the diagonal pinned to one.
pub fn gram(u: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = u.transpose() * u;
    g.fill_diagonal(1.0);
    g
}

/// `|Z|` under the null calibration for a fixed `(n, p)`.
#[derive(Debug, Clone, Copy)]
pub struct NullStatistic {
    calibration: NullCalibration,
}

impl NullStatistic {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        Ok(Self { calibration: NullCalibration::new(n, p)? })
    }

    pub fn n(&self) -> usize {
        self.calibration.n
    }

    pub fn p(&self) -> usize {
        self.calibration.p
    }

    /// `|Z|` from a correlation matrix given as a plain matrix. A singular
    /// matrix gives `+∞`.
    pub fn abs_z_from_correlation(&self, v: &DMatrix<f64>) -> f64 {
        let ld = log_det_sym(v);
        if ld == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        self.calibration.z_from_log_det(ld).abs()
    }

    /// `|Z|` for columns that are already centered with unit norm.
    pub fn abs_z_standardized(&self, u: &DMatrix<f64>) -> f64 {
        self.abs_z_from_correlation(&gram(u))
    }

    /// `|Z|` for raw data.
    pub fn abs_z(&self, x: &DMatrix<f64>) -> Result<f64> {
        Ok(self.abs_z_standardized(&standardize_columns(x)?))
    }
}

/// Observed `|Z|` of a data set along with its standardized columns.
pub(crate) fn observed(data: &DataMatrix) -> Result<(NullStatistic, DMatrix<f64>, f64)> {
    let stat = NullStatistic::new(data.nrows(), data.ncols())?;
    let u = standardize_columns(data.values())?;
    let z = stat.abs_z_standardized(&u);
    Ok((stat, u, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::z_statistic;
    use crate::coefficient::psi_hat;
    use crate::datagen::{sample_icm, ComponentDistribution, CovarianceCase, SigmaSpec};

    #[test]
    fn matches_estimator_route() {
        for (case, phi, p, n, seed) in [
            (CovarianceCase::Autoregressive, 0.0, 10, 200, 1),
            (CovarianceCase::CompoundSymmetry, 0.1, 5, 50, 2),
            (CovarianceCase::MDependent, 0.3, 40, 60, 3),
        ] {
            let spec = SigmaSpec::new(case, phi, p).unwrap();
            let data = sample_icm(n, &spec, ComponentDistribution::T6, seed).unwrap();
            let slow = z_statistic(psi_hat(&data).unwrap().value, n, p).unwrap().abs();
            let fast = NullStatistic::new(n, p).unwrap().abs_z(data.values()).unwrap();
            assert!((slow - fast).abs() < 1e-9 * slow.max(1.0), "{slow} {fast}");
        }
    }

    #[test]
    fn standardized_columns() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 40.0, 4.0, 10.0]);
        let u = standardize_columns(&x).unwrap();
        for col in u.column_iter() {
            assert!(col.sum().abs() < 1e-15);
            assert!((col.norm() - 1.0).abs() < 1e-15);
        }
        let g = gram(&u);
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - g[(1, 0)]).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.1, 2.0, 0.1, 3.0, 0.1]);
        assert_eq!(standardize_columns(&x), Err(Error::DegenerateVariable { column: 1 }));
    }

    #[test]
    fn collinear_columns_give_infinity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 5.0, 10.0]);
        let z = NullStatistic::new(4, 2).unwrap().abs_z(&x).unwrap();
        assert_eq!(z, f64::INFINITY);
    }
}
