//! Ground costs between output realizations and the normalizing bound
//! `E[c(Y, Y')]`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

/// Largest sample on which the pairwise U-statistic is evaluated exactly.
pub const EXACT_PAIR_LIMIT: usize = 5000;

/// Seed of the row subsample used above [`EXACT_PAIR_LIMIT`].
const PAIR_SUBSAMPLE_SEED: u64 = 0x5eed;

type CostFn = dyn Fn(ArrayView2<'_, f64>, ArrayView2<'_, f64>) -> Array2<f64> + Send + Sync;

/// User-supplied cost: receives two blocks of output rows and returns the
/// matrix of pairwise costs between them.
#[derive(Clone)]
pub struct CustomCost {
    name: String,
    func: Arc<CostFn>,
}

impl CustomCost {
    pub fn new<F>(name: impl Into<String>, func: F) -> Self
    where
        F: Fn(ArrayView2<'_, f64>, ArrayView2<'_, f64>) -> Array2<f64> + Send + Sync + 'static,
    {
        Self { name: name.into(), func: Arc::new(func) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCost").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Cost `c(y, y')` of moving unit mass between two output points.
#[derive(Debug, Clone, Default)]
pub enum GroundCost {
    /// `sum_j (y_j - y'_j)^2`
    #[default]
    SqEuclidean,
    /// `(sum_j |y_j - y'_j|^p)^(q/p)`
    MinkowskiPower { p: f64, q: f64 },
    Custom(CustomCost),
}

impl GroundCost {
    pub fn minkowski_power(p: f64, q: f64) -> Result<Self> {
        let cost = GroundCost::MinkowskiPower { p, q };
        cost.validate()?;
        Ok(cost)
    }

    pub fn custom<F>(name: impl Into<String>, func: F) -> Self
    where
        F: Fn(ArrayView2<'_, f64>, ArrayView2<'_, f64>) -> Array2<f64> + Send + Sync + 'static,
    {
        GroundCost::Custom(CustomCost::new(name, func))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroundCost::MinkowskiPower { p, q } if !(p >= 1.0 && q > 0.0 && p.is_finite() && q.is_finite()) => {
                Err(Error::InvalidCost(format!("minkowski-power needs p >= 1 and q > 0 (got p={p}, q={q})")))
            }
            _ => Ok(()),
        }
    }

    /// Squared Euclidean distance, under either spelling.
    pub fn is_sq_euclidean(&self) -> bool {
        match *self {
            GroundCost::SqEuclidean => true,
            GroundCost::MinkowskiPower { p, q } => p == 2.0 && q == 2.0,
            GroundCost::Custom(_) => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GroundCost::SqEuclidean => "sq-euclidean".to_string(),
            GroundCost::MinkowskiPower { p, q } => format!("minkowski-power({p},{q})"),
            GroundCost::Custom(c) => format!("custom({})", c.name()),
        }
    }

    /// Cost between two points; `None` for custom costs.
    pub fn pair(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Option<f64> {
        match *self {
            GroundCost::SqEuclidean => Some(sq_dist(a, b)),
            GroundCost::MinkowskiPower { p, q } => Some(minkowski_power(a, b, p, q)),
            GroundCost::Custom(_) => None,
        }
    }
}

/// Parses `sq-euclidean` or `minkowski-power(p,q)`; `minkowski-power:p,q`
/// is accepted as well.
impl std::str::FromStr for GroundCost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("sq-euclidean") {
            return Ok(GroundCost::SqEuclidean);
        }
        let args = s
            .strip_prefix("minkowski-power")
            .map(|rest| rest.trim_start_matches(':').trim_start_matches('(').trim_end_matches(')'));
        let parsed = args.and_then(|a| {
            let (p, q) = a.split_once(',')?;
            Some((p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?))
        });
        match parsed {
            Some((p, q)) => GroundCost::minkowski_power(p, q),
            None => Err(Error::InvalidCost(format!(
                "unknown cost `{s}` (expected sq-euclidean or minkowski-power(p,q))"
            ))),
        }
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn abs_pow(d: f64, p: f64) -> f64 {
    let d = d.abs();
    if p.fract() == 0.0 && p <= 16.0 {
        d.powi(p as i32)
    } else {
        d.powf(p)
    }
}

fn minkowski_power(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, p: f64, q: f64) -> f64 {
    if p == 2.0 && q == 2.0 {
        return sq_dist(a, b);
    }
    let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| abs_pow(x - y, p)).sum();
    if p == q {
        s
    } else {
        s.powf(q / p)
    }
}

/// Dense matrix of nonnegative finite costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    row_points: Vec<usize>,
    col_points: Vec<usize>,
}

impl CostMatrix {
    /// Wraps a raw matrix (no provenance).
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        check_entries(&entries)?;
        Ok(Self { entries, row_points: Vec::new(), col_points: Vec::new() })
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// Output rows behind each matrix row (empty when built from a raw matrix).
    pub fn row_points(&self) -> &[usize] {
        &self.row_points
    }

    pub fn col_points(&self) -> &[usize] {
        &self.col_points
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.entries.mean().unwrap_or(0.0)
    }

    /// Divides every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> CostMatrix {
        CostMatrix {
            entries: &self.entries / factor,
            row_points: self.row_points.clone(),
            col_points: self.col_points.clone(),
        }
    }
}

fn check_entries(entries: &Array2<f64>) -> Result<()> {
    for ((i, j), &c) in entries.indexed_iter() {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidCost(format!("entry ({i}, {j}) = {c} is not a finite nonnegative cost")));
        }
    }
    Ok(())
}

/// Materializes `c(y[rows_a[a]], y[rows_b[b]])` for every pair.
pub fn cost_matrix(rows_a: &[usize], rows_b: &[usize], y: &SampleMatrix, cost: &GroundCost) -> Result<CostMatrix> {
    let n = y.nrows();
    if let Some(&bad) = rows_a.iter().chain(rows_b).find(|&&r| r >= n) {
        return Err(Error::DimensionMismatch(format!("row index {bad} out of range for {n} rows")));
    }
    cost.validate()?;
    let values = y.values();
    let entries = match cost {
        GroundCost::Custom(custom) => {
            let a = values.select(ndarray::Axis(0), rows_a);
            let b = values.select(ndarray::Axis(0), rows_b);
            let out = (custom.func)(a.view(), b.view());
            if out.dim() != (rows_a.len(), rows_b.len()) {
                return Err(Error::InvalidCost(format!(
                    "custom cost `{}` returned a {:?} matrix, expected {:?}",
                    custom.name(),
                    out.dim(),
                    (rows_a.len(), rows_b.len())
                )));
            }
            check_entries(&out)?;
            out
        }
        builtin => {
            let mut out = Array2::zeros((rows_a.len(), rows_b.len()));
            for (mut row, &ra) in out.rows_mut().into_iter().zip(rows_a) {
                let ya = values.row(ra);
                for (c, &rb) in row.iter_mut().zip(rows_b) {
                    *c = builtin.pair(ya, values.row(rb)).expect("built-in cost");
                }
            }
            out
        }
    };
    Ok(CostMatrix { entries, row_points: rows_a.to_vec(), col_points: rows_b.to_vec() })
}

/// Mean and maximum of `c(y_i, y_j)` over unordered pairs `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub mean: f64,
    pub max: f64,
}

fn pair_rows(n: usize) -> Option<Vec<usize>> {
    if n <= EXACT_PAIR_LIMIT {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SUBSAMPLE_SEED);
    let mut rows = index::sample(&mut rng, n, EXACT_PAIR_LIMIT).into_vec();
    rows.sort_unstable();
    Some(rows)
}

/// Pairwise statistics of the output sample. Samples larger than
/// [`EXACT_PAIR_LIMIT`] are reduced to a fixed-seed row subsample first.
pub fn pair_stats(y: &SampleMatrix, cost: &GroundCost) -> Result<PairStats> {
    cost.validate()?;
    let sub;
    let y = match pair_rows(y.nrows()) {
        Some(rows) => {
            sub = y.select_rows(&rows);
            &sub
        }
        None => y,
    };
    let n = y.nrows();
    let values = y.values();
    // Per-row partial results are reduced in row order for reproducibility.
    let partial: Vec<(f64, f64)> = match cost {
        GroundCost::Custom(_) => {
            const BLOCK: usize = 256;
            let all: Vec<usize> = (0..n).collect();
            let blocks: Vec<usize> = (0..n).step_by(BLOCK).collect();
            let per_block: Result<Vec<Vec<(f64, f64)>>> = blocks
                .par_iter()
                .map(|&start| {
                    let rows: Vec<usize> = (start..(start + BLOCK).min(n)).collect();
                    let block = cost_matrix(&rows, &all, y, cost)?;
                    Ok(rows
                        .iter()
                        .enumerate()
                        .map(|(a, &i)| {
                            let tail = block.entries.slice(ndarray::s![a, i + 1..]);
                            (tail.sum(), tail.iter().copied().fold(0.0, f64::max))
                        })
                        .collect())
                })
                .collect();
            per_block?.into_iter().flatten().collect()
        }
        builtin => (0..n)
            .into_par_iter()
            .map(|i| {
                let yi = values.row(i);
                let mut sum = 0.0;
                let mut max = 0.0_f64;
                for j in i + 1..n {
                    let c = builtin.pair(yi, values.row(j)).expect("built-in cost");
                    sum += c;
                    max = max.max(c);
                }
                (sum, max)
            })
            .collect(),
    };
    let pairs = (n * (n - 1) / 2) as f64;
    let (sum, max) = partial.iter().fold((0.0, 0.0_f64), |(s, m), &(ps, pm)| (s + ps, m.max(pm)));
    Ok(PairStats { mean: sum / pairs, max })
}

/// U-statistic estimate of `E[c(Y, Y')]`, the normalizing bound of every index.
///
/// For the squared Euclidean cost this equals twice the trace of the unbiased
/// sample covariance, which is evaluated directly.
pub fn upper_bound(y: &SampleMatrix, cost: &GroundCost) -> Result<f64> {
    let bound = if cost.is_sq_euclidean() {
        let n = y.nrows() as f64;
        y.values()
            .columns()
            .into_iter()
            .map(|col| {
                let mean = col.sum() / n;
                2.0 * col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            })
            .sum()
    } else {
        pair_stats(y, cost)?.mean
    };
    if bound > 0.0 {
        Ok(bound)
    } else {
        Err(Error::ZeroBound)
    }
}
