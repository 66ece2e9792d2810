use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalues in `[-NEG_EIG_TOL, 0)` are clipped to zero; below that the
/// matrix is rejected.
pub const NEG_EIG_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

/// Centered Gaussian sampler for a possibly singular covariance matrix.
///
/// Uses the spectral factor `V sqrt(L)`; eigenvalues that are zero up to
/// rounding (relative to the largest) are treated as exact zeros so that null
/// directions of the covariance carry no noise at all.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let k = cov.nrows();
        if k == 0 || cov.ncols() != k {
            return Err(Error::NotPsd(format!(
                "expected a nonempty square matrix, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPsd("non-finite entry".into()));
        }
        let scale = cov.amax().max(1.0);
        for i in 0..k {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotPsd(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let eig = SymmetricEigen::new(cov.clone());
        let max_eig = eig.eigenvalues.max().max(0.0);
        let rank_tol = (k as f64) * f64::EPSILON * max_eig * 16.0;
        let mut roots = DVector::zeros(k);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l < -NEG_EIG_TOL {
                return Err(Error::NotPsd(format!("eigenvalue {l}")));
            }
            roots[i] = if l <= rank_tol { 0.0 } else { l.sqrt() };
        }
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(GaussianSampler { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.dim();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }
}

/// One draw of `N(0, cov)`.
pub fn sample_gaussian<R: Rng + ?Sized>(cov: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::multinomial_covariance;
    use crate::rng::RngStream;

    #[test]
    fn zero_covariance_gives_zero() {
        let mut rng = RngStream::new(0, 0);
        let z = sample_gaussian(&DMatrix::zeros(3, 3), &mut rng).unwrap();
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn rank_one_multinomial_sums_to_zero() {
        let q = multinomial_covariance(&[0.3, 0.7]).unwrap();
        let s = GaussianSampler::new(&q).unwrap();
        let mut rng = RngStream::new(11, 0);
        for _ in 0..10_000 {
            let z = s.sample(&mut rng);
            assert!((z[0] + z[1]).abs() <= 1e-9, "{z:?}");
        }
        let q3 = multinomial_covariance(&[0.2, 0.5, 0.3]).unwrap();
        let s3 = GaussianSampler::new(&q3).unwrap();
        for _ in 0..10_000 {
            let z = s3.sample(&mut rng);
            assert!(z.iter().sum::<f64>().abs() <= 1e-9);
        }
    }

    #[test]
    fn identity_empirical_covariance() {
        let s = GaussianSampler::new(&DMatrix::identity(2, 2)).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 100_000;
        let mut acc = [[0.0; 2]; 2];
        for _ in 0..n {
            let z = s.sample(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += z[i] * z[j];
                }
            }
        }
        for (i, row) in acc.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v / n as f64 - expect).abs() < 0.02);
            }
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianSampler::new(&bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianSampler::new(&asym).is_err());
        let tiny_neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-11]);
        assert!(GaussianSampler::new(&tiny_neg).is_ok());
    }
}
