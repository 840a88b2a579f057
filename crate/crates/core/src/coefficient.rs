//! Population and sample multiple-correlation coefficients.
//!
//! The main quantity is ψ = √(1 − det(V)^{2/p}), which summarizes the linear
//! dependence among all `p` variables without singling out a response. The
//! classical coefficient ρ (one variable regressed on the rest) and the
//! comparators ψ*, ρ_(a) and ρ_(m) are provided for comparison.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_det_psd, sample_correlation, CorrelationMatrix, DataMatrix};

/// A coefficient value in `[0, 1]`.
///
/// `singular` is set when the correlation matrix was numerically singular and
/// the value was set to exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub value: f64,
    pub singular: bool,
}

impl PsiValue {
    fn from_log_det(log_det: f64, p: usize) -> Self {
        if log_det == f64::NEG_INFINITY {
            return Self { value: 1.0, singular: true };
        }
        // 1 - exp(x) = -expm1(x); a log-determinant of a correlation matrix is <= 0
        let sq = (-(2.0 * log_det / p as f64).exp_m1()).clamp(0.0, 1.0);
        Self { value: sq.sqrt(), singular: false }
    }
}

fn check_dim(p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::Dimension(format!("coefficient needs p >= 2, got {p}")));
    }
    Ok(())
}

/// ψ of a correlation matrix.
pub fn psi_from_correlation(v: &CorrelationMatrix) -> Result<PsiValue> {
    check_dim(v.dim())?;
    Ok(PsiValue::from_log_det(log_det_psd(v.as_symmetric()), v.dim()))
}

/// Sample coefficient ψ̂: ψ evaluated at the sample correlation matrix.
///
/// The asymptotic theory needs `p < n`; with `p >= n` the sample correlation
/// is singular and the result is 1 (with a logged warning).
pub fn psi_hat(data: &DataMatrix) -> Result<PsiValue> {
    let (n, p) = (data.nrows(), data.ncols());
    if p >= n {
        log::warn!("psi_hat: p = {p} >= n = {n}; the sample coefficient is not consistent here");
    }
    psi_from_correlation(&sample_correlation(data)?)
}

/// ψ* = √(1 − det V).
pub fn psi_star(v: &CorrelationMatrix) -> Result<f64> {
    check_dim(v.dim())?;
    let ld = log_det_psd(v.as_symmetric());
    if ld == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok((-ld.exp_m1()).clamp(0.0, 1.0).sqrt())
}

/// Classical coefficient for `dep` as the response, by both routes:
/// the quadratic form `σ₁₂ᵀ V₂₂⁻¹ σ₁₂` and the determinant ratio
/// `1 − det V / det V₂₂`. Returns `(quadratic_form, determinant_ratio)`.
pub fn classical_rho_both(v: &CorrelationMatrix, dep: usize) -> Result<(f64, f64)> {
    let p = v.dim();
    check_dim(p)?;
    if dep >= p {
        return Err(Error::Dimension(format!("dependent index {dep} out of range for p = {p}")));
    }
    let others: Vec<usize> = (0..p).filter(|&j| j != dep).collect();
    let v22 = v.submatrix(&others);
    let ld22 = log_det_psd(v22.as_symmetric());
    if ld22 == f64::NEG_INFINITY {
        return Err(Error::SingularBlock);
    }
    let chol = Cholesky::new(v22.matrix().clone()).ok_or(Error::SingularBlock)?;
    let m = v.matrix();
    let s12 = DVector::from_iterator(others.len(), others.iter().map(|&j| m[(j, dep)]));
    let solved = chol.solve(&s12);
    // the response's own variance is 1 on the correlation scale
    let quad = s12.dot(&solved).clamp(0.0, 1.0).sqrt();

    let ld = log_det_psd(v.as_symmetric());
    let ratio = if ld == f64::NEG_INFINITY { 1.0 } else { (-(ld - ld22).exp_m1()).clamp(0.0, 1.0).sqrt() };
    Ok((quad, ratio))
}

/// Classical multiple correlation of variable `dep` on all the others.
///
/// Both closed forms are evaluated; if their squares differ by more than
/// `1e-8` an [`Error::Internal`] is returned. The determinant-ratio value is
/// returned otherwise.
pub fn classical_rho(v: &CorrelationMatrix, dep: usize) -> Result<f64> {
    let (quad, ratio) = classical_rho_both(v, dep)?;
    if (quad * quad - ratio * ratio).abs() > 1e-8 {
        return Err(Error::Internal(format!("quadratic form ({quad}) and determinant ratio ({ratio}) disagree")));
    }
    Ok(ratio)
}

/// Classical coefficient computed from data.
pub fn classical_rho_data(data: &DataMatrix, dep: usize) -> Result<f64> {
    classical_rho(&sample_correlation(data)?, dep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoAggregate {
    Average,
    Max,
}

/// Average or maximum of the `p` classical coefficients.
pub fn rho_aggregate(v: &CorrelationMatrix, mode: RhoAggregate) -> Result<f64> {
    let p = v.dim();
    let rhos = (0..p).map(|j| classical_rho(v, j)).collect::<Result<Vec<_>>>()?;
    Ok(match mode {
        RhoAggregate::Average => rhos.iter().sum::<f64>() / p as f64,
        RhoAggregate::Max => rhos.iter().copied().fold(0.0, f64::max),
    })
}

/// `diag(A_α, …, A_α)` with 2×2 blocks `[[1, α], [α, 1]]`; `p` must be even.
pub fn block_diagonal_pairs(alpha: f64, p: usize) -> Result<CorrelationMatrix> {
    if p % 2 != 0 || p == 0 {
        return Err(Error::Dimension(format!("block-diagonal pairs need an even p, got {p}")));
    }
    let m = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i / 2 == j / 2 {
            alpha
        } else {
            0.0
        }
    });
    CorrelationMatrix::new(m)
}

/// The 4×4 matrix `diag(A_α, A_γ)`.
pub fn two_pair_matrix(alpha: f64, gamma: f64) -> Result<CorrelationMatrix> {
    let mut m = DMatrix::identity(4, 4);
    m[(0, 1)] = alpha;
    m[(1, 0)] = alpha;
    m[(2, 3)] = gamma;
    m[(3, 2)] = gamma;
    CorrelationMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::random_correlation_matrix;
    use crate::testutil::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn compound(alpha: f64, p: usize) -> CorrelationMatrix {
        CorrelationMatrix::new(DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { alpha })).unwrap()
    }

    #[test]
    fn identity_gives_zero() {
        let psi = psi_from_correlation(&CorrelationMatrix::identity(3)).unwrap();
        assert_eq!(psi, PsiValue { value: 0.0, singular: false });
        assert_eq!(psi_star(&CorrelationMatrix::identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn two_variables_give_absolute_correlation() {
        for r in [0.5, -0.5, 0.93] {
            let v = compound(r, 2);
            assert!((psi_from_correlation(&v).unwrap().value - r.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn block_diagonal_pairs_give_alpha() {
        let v = block_diagonal_pairs(0.6, 4).unwrap();
        assert!((psi_from_correlation(&v).unwrap().value - 0.6).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_gives_one() {
        // third variable is the normalized sum of the first two
        let s = 1.0 / 2f64.sqrt();
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, s, 0.0, 1.0, s, s, s, 1.0]);
        let v = CorrelationMatrix::new(m).unwrap();
        assert_eq!(psi_from_correlation(&v).unwrap(), PsiValue { value: 1.0, singular: true });
        assert_eq!(psi_star(&v).unwrap(), 1.0);
    }

    #[test]
    fn dimension_error() {
        let one = CorrelationMatrix::identity(1);
        assert!(matches!(psi_from_correlation(&one), Err(Error::Dimension(_))));
    }

    #[test]
    fn psi_hat_two_columns_is_abs_pearson() {
        let mut r = rng(5);
        let x: Vec<f64> = (0..50).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| -0.7 * v + 0.3 * r.random::<f64>()).collect();
        let data = DataMatrix::from_columns(&[x.clone(), y.clone()]).unwrap();
        // textbook Pearson as the oracle
        let mx = x.iter().sum::<f64>() / 50.0;
        let my = y.iter().sum::<f64>() / 50.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let pearson = sxy / (sxx * syy).sqrt();
        assert!((psi_hat(&data).unwrap().value - pearson.abs()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_gives_one() {
        let mut r = rng(9);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| r.random::<f64>()).collect()).collect();
        let data =
            DataMatrix::from_columns(&[cols[0].clone(), cols[1].clone(), cols[2].clone(), cols[1].clone()]).unwrap();
        assert_eq!(psi_hat(&data).unwrap().value, 1.0);
    }

    #[test]
    fn psi_hat_is_consistent_at_large_n() {
        use crate::datagen::{sample_icm, solve_phi_for_psi, ComponentDistribution, CovarianceCase, SigmaSpec};
        let phi = solve_phi_for_psi(CovarianceCase::CompoundSymmetry, 5, 0.6).unwrap();
        let spec = SigmaSpec::new(CovarianceCase::CompoundSymmetry, phi, 5).unwrap();
        let data = sample_icm(10_000, &spec, ComponentDistribution::StandardNormal, 1).unwrap();
        let est = psi_hat(&data).unwrap().value;
        assert!((est - 0.6).abs() < 0.02, "{est}");
    }

    #[test]
    fn classical_rho_examples() {
        for dep in 0..4 {
            assert_eq!(classical_rho(&CorrelationMatrix::identity(4), dep).unwrap(), 0.0);
        }
        let v = compound(-0.4, 2);
        assert!((classical_rho(&v, 0).unwrap() - 0.4).abs() < 1e-14);
        assert!((classical_rho(&v, 1).unwrap() - 0.4).abs() < 1e-14);

        let v = two_pair_matrix(0.3, 0.7).unwrap();
        // hand oracle: the response's only correlated predictor is its pair partner
        assert!((classical_rho(&v, 2).unwrap() - 0.7).abs() < 1e-14);
        assert!((classical_rho(&v, 3).unwrap() - 0.7).abs() < 1e-14);
        assert!((classical_rho(&v, 0).unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn classical_rho_singular_block() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.2, 0.2, 1.0, 1.0, 0.2, 1.0, 1.0]);
        let v = CorrelationMatrix::new(m).unwrap();
        assert_eq!(classical_rho(&v, 0), Err(Error::SingularBlock));
    }

    #[test]
    fn classical_rho_routes_agree() {
        let mut r = rng(21);
        for _ in 0..100 {
            let p = r.random_range(2..=10);
            let v = random_correlation_matrix(p, &mut r);
            for dep in 0..p {
                let (q, d) = classical_rho_both(&v, dep).unwrap();
                assert!((q - d).abs() < 1e-10, "{q} {d}");
            }
        }
    }

    #[test]
    fn aggregates() {
        let i = CorrelationMatrix::identity(5);
        assert_eq!(rho_aggregate(&i, RhoAggregate::Average).unwrap(), 0.0);
        assert_eq!(rho_aggregate(&i, RhoAggregate::Max).unwrap(), 0.0);

        let gamma = 0.7;
        let mut last_psi = -1.0;
        for k in 0..=14 {
            let alpha = gamma * k as f64 / 14.0;
            let v = two_pair_matrix(alpha, gamma).unwrap();
            let max = rho_aggregate(&v, RhoAggregate::Max).unwrap();
            assert!((max - gamma).abs() < 1e-12);
            let psi = psi_from_correlation(&v).unwrap().value;
            assert!(psi > last_psi);
            last_psi = psi;
        }
    }

    #[test]
    fn psi_star_block_closed_form_and_growth() {
        for (alpha, p) in [(0.3, 4), (0.5, 10), (0.3, 40)] {
            let v = block_diagonal_pairs(alpha, p).unwrap();
            let closed = (1.0 - (1.0 - alpha * alpha).powf(p as f64 / 2.0)).sqrt();
            assert!((psi_star(&v).unwrap() - closed).abs() < 1e-12);
        }
        let small = block_diagonal_pairs(0.3, 40).unwrap();
        let large = block_diagonal_pairs(0.3, 400).unwrap();
        let (s40, s400) = (psi_star(&small).unwrap(), psi_star(&large).unwrap());
        assert!(s400 > s40 && s400 > 0.999999);
        assert!((psi_from_correlation(&small).unwrap().value - 0.3).abs() < 1e-12);
        assert!((psi_from_correlation(&large).unwrap().value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn psi_is_permutation_invariant() {
        let mut r = rng(33);
        for _ in 0..50 {
            let p = r.random_range(2..=12);
            let v = random_correlation_matrix(p, &mut r);
            let mut perm: Vec<usize> = (0..p).collect();
            perm.shuffle(&mut r);
            let pv = v.submatrix(&perm);
            let a = psi_from_correlation(&v).unwrap().value;
            let b = psi_from_correlation(&pv).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_hat_is_affine_invariant() {
        let mut r = rng(34);
        for _ in 0..20 {
            let p = r.random_range(2..=6);
            let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..40).map(|_| r.random::<f64>()).collect()).collect();
            let mut mixed = cols.clone();
            for j in 1..p {
                for i in 0..40 {
                    mixed[j][i] += 0.5 * cols[j - 1][i];
                }
            }
            let data = DataMatrix::from_columns(&mixed).unwrap();
            let scaled: Vec<Vec<f64>> = mixed
                .iter()
                .map(|c| {
                    let a = if r.random::<bool>() { 1.0 } else { -1.0 } * r.random_range(0.1..50.0);
                    let b = r.random_range(-100.0..100.0);
                    c.iter().map(|x| a * x + b).collect()
                })
                .collect();
            let data2 = DataMatrix::from_columns(&scaled).unwrap();
            let (a, b) = (psi_hat(&data).unwrap().value, psi_hat(&data2).unwrap().value);
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn psi_nondecreasing_along_compound_symmetry() {
        for p in [2, 3, 10, 50] {
            let mut last = 0.0;
            for k in 0..100 {
                let alpha = k as f64 / 100.0;
                let psi = psi_from_correlation(&compound(alpha, p)).unwrap().value;
                assert!(psi >= last && (0.0..=1.0).contains(&psi));
                last = psi;
            }
        }
    }

    #[test]
    fn psi_zero_exactly_at_identity() {
        assert_eq!(psi_from_correlation(&CorrelationMatrix::identity(6)).unwrap().value, 0.0);
        for eps in [1e-3, 1e-6] {
            let mut m = DMatrix::identity(6, 6);
            m[(2, 4)] = eps;
            m[(4, 2)] = eps;
            let psi = psi_from_correlation(&CorrelationMatrix::new(m).unwrap()).unwrap().value;
            assert!(psi > 0.0, "eps={eps}");
        }
    }
}
