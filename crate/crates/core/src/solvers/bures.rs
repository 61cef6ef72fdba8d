use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a negative eigenvalue is treated
/// as roundoff and clamped to zero.
const PSD_CLAMP: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

fn to_nalgebra(s: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[[i, j]])
}

fn to_ndarray(s: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((s.nrows(), s.ncols()), |(i, j)| s[(i, j)])
}

fn sqrt_psd(s: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < 0.0 {
            if *l < -PSD_CLAMP * top {
                return Err(Error::NotPsd(*l));
            }
            *l = 0.0;
        }
        *l = l.sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub fn matrix_sqrt_psd(s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, m) = s.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!("{n}x{m} matrix is not square")));
    }
    let scale = s.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (s[[i, j]] - s[[j, i]]).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let root = sqrt_psd(symmetrize(&to_nalgebra(s)))?;
    Ok(to_ndarray(&symmetrize(&root)))
}

/// Wasserstein-Bures cost between two sets of first and second moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuresCost {
    pub total: f64,
    /// `||m_a - m_b||^2`
    pub advective: f64,
    /// `Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)`
    pub diffusive: f64,
}

pub fn bures_cost(
    m_a: ArrayView1<'_, f64>,
    s_a: ArrayView2<'_, f64>,
    m_b: ArrayView1<'_, f64>,
    s_b: ArrayView2<'_, f64>,
) -> Result<BuresCost> {
    let k = m_a.len();
    if m_b.len() != k || s_a.dim() != (k, k) || s_b.dim() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "means of length {} and {}, covariances {:?} and {:?}",
            k,
            m_b.len(),
            s_a.dim(),
            s_b.dim()
        )));
    }
    let advective: f64 = m_a.iter().zip(m_b.iter()).map(|(a, b)| (a - b) * (a - b)).sum();

    let trace_a: f64 = s_a.diag().sum();
    let trace_b: f64 = s_b.diag().sum();
    let cross = if k == 1 {
        (s_a[[0, 0]].max(0.0) * s_b[[0, 0]].max(0.0)).sqrt()
    } else {
        let root_a = to_nalgebra(matrix_sqrt_psd(s_a)?.view());
        let sb = symmetrize(&to_nalgebra(s_b));
        let inner = symmetrize(&(&root_a * sb * &root_a));
        sqrt_psd(inner)?.trace()
    };
    let mut diffusive = trace_a + trace_b - 2.0 * cross;
    if diffusive < 0.0 && diffusive >= -PSD_CLAMP * (trace_a + trace_b).max(f64::MIN_POSITIVE) {
        diffusive = 0.0;
    }
    Ok(BuresCost { total: advective + diffusive, advective, diffusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sqrt_examples() {
        let eye = Array2::<f64>::eye(3);
        let r = matrix_sqrt_psd(eye.view()).unwrap();
        assert!(r.iter().zip(eye.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        let r = matrix_sqrt_psd(array![[4.0, 0.0], [0.0, 9.0]].view()).unwrap();
        assert_abs_diff_eq!(r[[0, 0]], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[[1, 1]], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[[0, 1]], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_reconstructs_random_gram_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = Array2::from_shape_fn((3, 3), |_| rng.random_range(-2.0..2.0));
            let s = a.dot(&a.t());
            let r = matrix_sqrt_psd(s.view()).unwrap();
            let err = (&r.dot(&r) - &s).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-8, "{err}");
        }
    }

    #[test]
    fn sqrt_errors() {
        assert!(matches!(matrix_sqrt_psd(array![[1.0, 0.5], [0.0, 1.0]].view()), Err(Error::NotSymmetric(_))));
        assert!(matches!(matrix_sqrt_psd(array![[1.0, 0.0], [0.0, -1.0]].view()), Err(Error::NotPsd(_))));
        // Roundoff-sized negative eigenvalue is clamped.
        let r = matrix_sqrt_psd(array![[1.0, 0.0], [0.0, -1e-13]].view()).unwrap();
        assert_eq!(r[[1, 1]], 0.0);
    }

    #[test]
    fn bures_examples() {
        let m = array![1.0, -2.0];
        let s = array![[2.0, 0.3], [0.3, 1.0]];
        let out = bures_cost(m.view(), s.view(), m.view(), s.view()).unwrap();
        assert_abs_diff_eq!(out.total, 0.0, epsilon = 1e-12);
        assert!(out.diffusive >= 0.0);

        let out = bures_cost(array![0.0].view(), array![[1.0]].view(), array![1.0].view(), array![[4.0]].view())
            .unwrap();
        assert_abs_diff_eq!(out.total, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.advective, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.diffusive, 1.0, epsilon = 1e-14);

        let z = Array1::zeros(2);
        let out = bures_cost(
            z.view(),
            array![[1.0, 0.0], [0.0, 4.0]].view(),
            z.view(),
            array![[4.0, 0.0], [0.0, 1.0]].view(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.diffusive, 2.0, epsilon = 1e-12);
        assert_eq!(out.advective, 0.0);
    }

    #[test]
    fn bures_dimension_mismatch() {
        let err = bures_cost(array![0.0].view(), array![[1.0]].view(), array![0.0, 1.0].view(), array![[1.0]].view());
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn bures_is_symmetric_in_its_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
            let b = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
            let (sa, sb) = (a.dot(&a.t()), b.dot(&b.t()));
            let ma = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let mb = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let ab = bures_cost(ma.view(), sa.view(), mb.view(), sb.view()).unwrap();
            let ba = bures_cost(mb.view(), sb.view(), ma.view(), sa.view()).unwrap();
            assert_abs_diff_eq!(ab.total, ba.total, epsilon = 1e-9);
        }
    }
}
