//! Fréchet distance between Gaussian fits of two feature sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance below zero for eigenvalues treated as rounding noise.
pub const EIGEN_TOLERANCE: f64 = 1e-6;

fn check_square(name: &str, m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, mean has dimension {d}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::invariant(format!("{name} is not symmetric")));
            }
        }
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix with tiny negatives clamped to zero.
fn clamped_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -EIGEN_TOLERANCE * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    eig.eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(eig)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = clamped_eigen(m)?;
    let sqrt = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose())
}

/// `||mu1 - mu2||^2 + tr(cov1 + cov2 - 2 (cov1 cov2)^{1/2})`.
///
/// The trace of the product root is taken as `tr sqrt(S1 cov2 S1)` with
/// `S1 = cov1^{1/2}`, which is symmetric and has the same spectrum.
pub fn frechet_distance(
    mu1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d {
        return Err(Error::Dimension(format!(
            "means have dimensions {d} and {}",
            mu2.len()
        )));
    }
    check_square("cov1", cov1, d)?;
    check_square("cov2", cov2, d)?;

    let s1 = psd_sqrt(cov1)?;
    // cov2 must itself be PSD; the product check alone would miss a
    // negative direction hidden in the null space of cov1.
    clamped_eigen(cov2)?;
    let inner = clamped_eigen(&(&s1 * cov2 * &s1))?;
    let tr_sqrt: f64 = inner.eigenvalues.iter().map(|v| v.sqrt()).sum();

    let diff = mu1 - mu2;
    let value = diff.dot(&diff) + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
    Ok(value.max(0.0))
}

/// Sample mean and unbiased sample covariance.
pub fn gaussian_fit(features: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            got: n,
            required: 2,
        });
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::Dimension(format!(
            "feature vectors of dimension {d} and {}",
            bad.len()
        )));
    }
    let mut mu = DVector::zeros(d);
    for f in features {
        mu += DVector::from_column_slice(f);
    }
    mu /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let c = DVector::from_column_slice(f) - &mu;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    Ok((mu, cov))
}

/// FID between two feature sets. Each set needs at least `dim + 1` vectors.
pub fn fid_between_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let d = a.first().or(b.first()).map(|f| f.len()).unwrap_or(0);
    let required = d + 1;
    for set in [a, b] {
        if set.len() < required.max(2) {
            return Err(Error::TooFewSamples {
                got: set.len(),
                required: required.max(2),
            });
        }
    }
    let (m1, c1) = gaussian_fit(a)?;
    let (m2, c2) = gaussian_fit(b)?;
    frechet_distance(&m1, &c1, &m2, &c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_gaussians_are_zero() {
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(frechet_distance(&mu, &cov, &mu, &cov).unwrap() < 1e-10);
    }

    #[test]
    fn mean_shift_only() {
        let cov = DMatrix::identity(2, 2);
        let d = frechet_distance(
            &DVector::zeros(2),
            &cov,
            &DVector::from_vec(vec![3.0, 4.0]),
            &cov,
        )
        .unwrap();
        assert!((d - 25.0).abs() < 1e-10);
    }

    #[test]
    fn commuting_diagonals() {
        let d = frechet_distance(
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
            &(DMatrix::identity(2, 2) * 4.0),
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = frechet_distance(
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
            &bad,
        );
        assert!(matches!(err, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn small_set_names_required_size() {
        let a = vec![vec![0.0, 1.0, 2.0]; 3];
        match fid_between_sets(&a, &a) {
            Err(Error::TooFewSamples { got: 3, required: 4 }) => {}
            other => panic!("{other:?}"),
        }
    }
}
