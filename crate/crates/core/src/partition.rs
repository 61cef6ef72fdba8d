//! Equal-frequency partitions of an input's sample.
//!
//! Rows are ranked by value (ties broken by row index) and cut into M
//! contiguous classes whose sizes differ by at most one; the first `N mod M`
//! classes receive the extra row.

use ndarray::ArrayView1;
use rayon::prelude::*;

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

/// Assignment of sample rows to the conditioning classes of one input.
///
/// Classes are stored 0-based; [`Partitioning::label`] reports the 1-based
/// label used in every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning {
    input_index: usize,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    representatives: Vec<f64>,
}

impl Partitioning {
    pub fn input_index(&self) -> usize {
        self.input_index
    }

    /// Number of classes H.
    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    /// 1-based class label of `row`.
    pub fn label(&self, row: usize) -> usize {
        self.labels[row] + 1
    }

    /// Rows of class `h` (0-based), in increasing order of input value.
    pub fn members(&self, h: usize) -> &[usize] {
        &self.members[h]
    }

    pub fn classes(&self) -> impl ExactSizeIterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Per-class mean input value.
    pub fn representatives(&self) -> &[f64] {
        &self.representatives
    }

    fn with_input(mut self, input_index: usize) -> Self {
        self.input_index = input_index;
        self
    }
}

/// Default class count: one class per 100 rows, between 2 and 50.
pub fn default_class_count(n: usize) -> usize {
    (n / 100).clamp(2, 50).min(n.max(2))
}

/// Partitions one column into `m` equal-frequency classes.
pub fn build_partition(x_col: ArrayView1<'_, f64>, m: usize) -> Result<Partitioning> {
    let n = x_col.len();
    if m < 2 || m > n {
        return Err(Error::InvalidClassCount { classes: m, rows: n });
    }
    if let Some((row, _)) = x_col.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col: 0 });
    }
    let first = x_col[0];
    if x_col.iter().all(|&v| v == first) {
        return Err(Error::DegenerateInput { column: String::from("<unnamed>") });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x_col[a].total_cmp(&x_col[b]).then(a.cmp(&b)));

    let base = n / m;
    let extra = n % m;
    let mut labels = vec![0; n];
    let mut members = Vec::with_capacity(m);
    let mut representatives = Vec::with_capacity(m);
    let mut start = 0;
    for h in 0..m {
        let size = base + usize::from(h < extra);
        let rows = order[start..start + size].to_vec();
        let mean = rows.iter().map(|&r| x_col[r]).sum::<f64>() / size as f64;
        for &r in &rows {
            labels[r] = h;
        }
        members.push(rows);
        representatives.push(mean);
        start += size;
    }

    Ok(Partitioning { input_index: 0, labels, members, representatives })
}

/// Partitions every column of `x`; errors name the offending column.
pub fn partition_all(x: &SampleMatrix, m: usize) -> Result<Vec<Partitioning>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            build_partition(x.column(j), m)
                .map(|p| p.with_input(j))
                .map_err(|e| match e {
                    Error::DegenerateInput { .. } => {
                        Error::DegenerateInput { column: x.names()[j].clone() }
                    }
                    Error::NonFinite { row, .. } => Error::NonFinite { row, col: j },
                    other => other,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn values(xs: &[f64]) -> Array1<f64> {
        Array1::from(xs.to_vec())
    }

    #[test]
    fn ten_values_two_classes() {
        let x = values(&[6.0, 1.0, 9.0, 2.0, 10.0, 3.0, 8.0, 4.0, 7.0, 5.0]);
        let p = build_partition(x.view(), 2).unwrap();
        assert_eq!(p.sizes(), vec![5, 5]);
        let low: Vec<f64> = p.members(0).iter().map(|&r| x[r]).collect();
        assert_eq!(low, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.label(0), 2);
        assert_eq!(p.label(1), 1);
        assert_eq!(p.representatives(), &[3.0, 8.0]);
    }

    #[test]
    fn remainder_goes_to_lowest_classes() {
        let x = Array1::from_iter((1..=10).map(f64::from));
        let p = build_partition(x.view(), 3).unwrap();
        assert_eq!(p.sizes(), vec![4, 3, 3]);
    }

    #[test]
    fn gaussian_sample_twenty_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array1::from_iter((0..2000).map(|_| StandardNormal.sample(&mut rng)));
        let p = build_partition(x.view(), 20).unwrap();
        assert!(p.sizes().iter().all(|&s| s == 100));
        assert!(p.representatives().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ties_are_broken_by_row_index() {
        let x = values(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let p = build_partition(x.view(), 3).unwrap();
        assert_eq!(p.members(0), &[1, 3]);
        assert_eq!(p.members(1), &[5, 0]);
        assert_eq!(p.members(2), &[2, 4]);
    }

    #[test]
    fn errors() {
        let x = values(&[2.0, 2.0, 2.0]);
        assert!(matches!(build_partition(x.view(), 2), Err(Error::DegenerateInput { .. })));
        let x = values(&[1.0, 2.0, 3.0]);
        assert!(matches!(build_partition(x.view(), 4), Err(Error::InvalidClassCount { .. })));
        assert!(matches!(build_partition(x.view(), 1), Err(Error::InvalidClassCount { .. })));
    }

    #[test]
    fn partition_all_names_constant_column() {
        let mut v = Array2::zeros((30, 3));
        for i in 0..30 {
            v[[i, 0]] = i as f64;
            v[[i, 1]] = 5.0;
            v[[i, 2]] = (i * 7 % 30) as f64;
        }
        let x = SampleMatrix::with_default_names(v.clone(), "X").unwrap();
        let err = partition_all(&x, 3).unwrap_err();
        assert_eq!(err.to_string(), "degenerate input: constant column `X2`");

        v.column_mut(1).assign(&Array1::from_iter((0..30).map(|i| (i % 4) as f64)));
        let x = SampleMatrix::with_default_names(v, "X").unwrap();
        let parts = partition_all(&x, 31).unwrap_err();
        assert!(matches!(parts, Error::InvalidClassCount { .. }));
        let parts = partition_all(&x, 3).unwrap();
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().enumerate().all(|(j, p)| p.input_index() == j && p.class_count() == 3));
    }

    #[test]
    fn default_count() {
        assert_eq!(default_class_count(2000), 20);
        assert_eq!(default_class_count(50), 2);
        assert_eq!(default_class_count(100_000), 50);
        assert_eq!(default_class_count(2), 2);
    }

    proptest! {
        #[test]
        fn classes_cover_rows_and_are_ordered(
            xs in prop::collection::vec(-100i32..100, 4..200),
            m in 2usize..12,
        ) {
            let x = Array1::from_iter(xs.iter().map(|&v| f64::from(v)));
            prop_assume!(m <= x.len());
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            let p = build_partition(x.view(), m).unwrap();
            let n = x.len();
            let mut seen = vec![false; n];
            for (h, rows) in p.classes().enumerate() {
                prop_assert!((rows.len() as f64 - n as f64 / m as f64).abs() < 1.0);
                for &r in rows {
                    prop_assert!(!seen[r]);
                    seen[r] = true;
                    prop_assert_eq!(p.label(r), h + 1);
                }
            }
            prop_assert!(seen.into_iter().all(|s| s));
            for h in 1..m {
                let prev = p.members(h - 1).iter().map(|&r| x[r]).fold(f64::MIN, f64::max);
                let next = p.members(h).iter().map(|&r| x[r]).fold(f64::MAX, f64::min);
                prop_assert!(prev <= next);
            }
        }

        #[test]
        fn row_permutation_keeps_class_value_sets(
            xs in prop::collection::vec(-50i32..50, 6..80),
            m in 2usize..6,
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            prop_assume!(m <= xs.len());
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            let x = Array1::from_iter(xs.iter().map(|&v| f64::from(v)));
            let mut perm: Vec<usize> = (0..xs.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let xp = Array1::from_iter(perm.iter().map(|&r| x[r]));
            let a = build_partition(x.view(), m).unwrap();
            let b = build_partition(xp.view(), m).unwrap();
            for h in 0..m {
                let mut va: Vec<i64> = a.members(h).iter().map(|&r| x[r] as i64).collect();
                let mut vb: Vec<i64> = b.members(h).iter().map(|&r| xp[r] as i64).collect();
                va.sort_unstable();
                vb.sort_unstable();
                prop_assert_eq!(va, vb);
            }
        }
    }
}
