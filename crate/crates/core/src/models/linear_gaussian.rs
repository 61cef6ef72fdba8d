use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{SampleMatrix, SensitivityDataset};
use crate::error::{Error, Result};

/// Coefficients of `Y = A X`.
pub const DEFAULT_A: [[f64; 3]; 2] = [[4.0, -2.0, 1.0], [2.0, 5.0, -1.0]];
pub const MEAN: [f64; 3] = [1.0, 1.0, 1.0];
/// Off-diagonal correlation of the inputs (unit variances).
pub const CORRELATION: f64 = 0.5;

/// Correlated Gaussian inputs pushed through a 2x3 linear map, using
/// [`DEFAULT_A`].
pub fn gen_linear_gaussian(n: usize, seed: u64) -> Result<SensitivityDataset> {
    gen_linear_gaussian_with(n, seed, DEFAULT_A)
}

pub fn gen_linear_gaussian_with(n: usize, seed: u64, a: [[f64; 3]; 2]) -> Result<SensitivityDataset> {
    if n < 2 {
        return Err(Error::TooSmall { rows: n, cols: 3 });
    }
    let sigma = Matrix3::from_fn(|i, j| if i == j { 1.0 } else { CORRELATION });
    let l = sigma.cholesky().expect("covariance is positive definite").l();

    // Standard normals are drawn one column at a time.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::<f64>::zeros((n, 3));
    for j in 0..3 {
        for i in 0..n {
            z[[i, j]] = StandardNormal.sample(&mut rng);
        }
    }

    let mut x = Array2::zeros((n, 3));
    let mut y = Array2::zeros((n, 2));
    for i in 0..n {
        let xi = l * Vector3::new(z[[i, 0]], z[[i, 1]], z[[i, 2]]) + Vector3::from(MEAN);
        for j in 0..3 {
            x[[i, j]] = xi[j];
        }
        for (r, coef) in a.iter().enumerate() {
            y[[i, r]] = coef[0] * xi[0] + coef[1] * xi[1] + coef[2] * xi[2];
        }
    }
    SensitivityDataset::new(SampleMatrix::with_default_names(x, "X")?, SampleMatrix::with_default_names(y, "Y")?)
}
