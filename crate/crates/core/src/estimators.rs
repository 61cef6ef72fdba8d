//! Given-data estimators of the OT-based sensitivity indices.
//!
//! For every input the sample is cut into equal-frequency classes; the OT
//! cost between the full output sample and each class subsample is averaged
//! over the classes and normalized by the pairwise-cost bound of the output.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};
use rayon::prelude::*;

use crate::bootstrap::BootstrapResult;
use crate::cost::{cost_matrix, pair_stats, upper_bound, CostMatrix, GroundCost};
use crate::data::{SampleMatrix, SensitivityDataset};
use crate::error::{Error, Result};
use crate::partition::{partition_all, Partitioning};
use crate::solvers::{
    bures_cost, default_epsilon, exact_uniform_cost, solve_sinkhorn, solve_sinkhorn_stable, transport_1d_sorted,
    BuresCost, SolverConfig, SolverKind,
};

/// Samples up to this size keep the full `N x N` cost matrix in memory and
/// slice the per-class problems out of it.
const FULL_COST_LIMIT: usize = 4000;

/// How the per-class costs are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Plain `1/H` average over classes.
    #[default]
    Uniform,
    /// Classes weighted by `N_h / N`.
    ClassSize,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "class-size" | "weighted" => Ok(Weighting::ClassSize),
            other => Err(Error::InvalidConfig(format!("unknown weighting `{other}`"))),
        }
    }
}

/// Distribution of the auxiliary input used for the irrelevance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DummyDistribution {
    #[default]
    StandardNormal,
    /// Uniform on (0, 1).
    Uniform,
}

impl DummyDistribution {
    pub fn name(self) -> &'static str {
        match self {
            DummyDistribution::StandardNormal => "normal",
            DummyDistribution::Uniform => "uniform",
        }
    }

    /// `n` seeded draws.
    pub fn sample(self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            DummyDistribution::StandardNormal => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            DummyDistribution::Uniform => (0..n).map(|_| StandardUniform.sample(&mut rng)).collect(),
        }
    }
}

impl fmt::Display for DummyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DummyDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "standard-normal" | "rnorm" => Ok(DummyDistribution::StandardNormal),
            "uniform" | "runif" => Ok(DummyDistribution::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown dummy distribution `{other}`"))),
        }
    }
}

/// Everything needed to run one estimator on a dataset.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Requested class count M.
    pub partitions: usize,
    /// Ground cost; ignored by the 1-D solver, which uses `|y - y'|^p`.
    pub cost: GroundCost,
    pub solver: SolverConfig,
    pub weighting: Weighting,
}

impl EstimatorConfig {
    pub fn new(partitions: usize, solver: SolverConfig) -> Self {
        EstimatorConfig { partitions, cost: GroundCost::SqEuclidean, solver, weighting: Weighting::Uniform }
    }

    pub fn with_cost(mut self, cost: GroundCost) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.cost.validate()?;
        if self.solver.kind() == SolverKind::WassBures && !self.cost.is_sq_euclidean() {
            return Err(Error::InvalidConfig(format!(
                "wass-bures requires the sq-euclidean cost (got {})",
                self.cost.label()
            )));
        }
        Ok(())
    }
}

/// Index components, already divided by the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    /// Mean-shift part.
    pub advective: f64,
    /// Covariance part.
    pub diffusive: f64,
    /// What the two moments leave unexplained (zero for wass-bures).
    pub residual: f64,
}

/// OT cost between the full sample and one class subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSeparation {
    /// 1-based class label.
    pub class: usize,
    pub size: usize,
    /// Mean input value of the class.
    pub representative: f64,
    /// Unscaled local separation.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputIndex {
    pub name: String,
    pub index: f64,
    /// Weighted average of the class costs, before normalization.
    pub xi: f64,
    pub components: Option<Components>,
    pub classes: Vec<ClassSeparation>,
    /// False when some entropic class problem ran out of iterations.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub method: SolverKind,
    /// Label of the ground cost.
    pub cost: String,
    pub bound: f64,
    pub partitions: usize,
    pub epsilon: Option<f64>,
    pub inputs: Vec<InputIndex>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<BootstrapResult>,
}

impl IndexEstimate {
    pub fn indices(&self) -> Vec<f64> {
        self.inputs.iter().map(|i| i.index).collect()
    }

    pub fn input(&self, name: &str) -> Option<&InputIndex> {
        self.inputs.iter().find(|i| i.name == name)
    }

    pub fn converged(&self) -> bool {
        self.inputs.iter().all(|i| i.converged)
    }
}

/// One row of the local-separation table.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRow {
    pub input: String,
    pub class: usize,
    pub x: f64,
    /// Local separation divided by the bound.
    pub value: f64,
}

/// One-dimensional indices for every (output, input) pair; rows are outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub values: Array2<f64>,
}

impl SensitivityMap {
    pub fn get(&self, output: &str, input: &str) -> Option<f64> {
        let r = self.outputs.iter().position(|o| o == output)?;
        let c = self.inputs.iter().position(|i| i == input)?;
        Some(self.values[[r, c]])
    }
}

fn average(costs: &[f64], sizes: &[usize], weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Uniform => costs.iter().sum::<f64>() / costs.len() as f64,
        Weighting::ClassSize => {
            let n: usize = sizes.iter().sum();
            costs.iter().zip(sizes).map(|(c, &s)| c * s as f64).sum::<f64>() / n as f64
        }
    }
}

fn class_tasks(parts: &[Partitioning]) -> Vec<(usize, usize)> {
    parts.iter().enumerate().flat_map(|(i, p)| (0..p.class_count()).map(move |h| (i, h))).collect()
}

fn class_table(part: &Partitioning, costs: &[f64]) -> Vec<ClassSeparation> {
    part.classes()
        .zip(part.representatives())
        .zip(costs)
        .enumerate()
        .map(|(h, ((rows, &representative), &cost))| ClassSeparation {
            class: h + 1,
            size: rows.len(),
            representative,
            cost,
        })
        .collect()
}

/// Full `N x N` cost matrix of the output sample, rows computed in parallel.
fn full_cost(y: &SampleMatrix, cost: &GroundCost) -> Result<Array2<f64>> {
    let n = y.nrows();
    let all: Vec<usize> = (0..n).collect();
    let mut buf = vec![0.0; n * n];
    match cost {
        GroundCost::Custom(_) => {
            const BLOCK: usize = 128;
            buf.par_chunks_mut(BLOCK * n).enumerate().try_for_each(|(b, chunk)| -> Result<()> {
                let rows: Vec<usize> = (b * BLOCK..(b * BLOCK + chunk.len() / n)).collect();
                let block = cost_matrix(&rows, &all, y, cost)?;
                for (dst, src) in chunk.iter_mut().zip(block.entries().iter()) {
                    *dst = *src;
                }
                Ok(())
            })?;
        }
        builtin => {
            let values = y.values();
            buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                let yi = values.row(i);
                for (j, c) in row.iter_mut().enumerate() {
                    *c = builtin.pair(yi, values.row(j)).expect("built-in cost");
                }
            });
        }
    }
    Ok(Array2::from_shape_vec((n, n), buf).expect("square buffer"))
}

/// Sample mean and covariance (denominator `n - 1`) of the given rows.
fn moments(values: ArrayView2<'_, f64>, rows: &[usize]) -> (Array1<f64>, Array2<f64>) {
    let sub = values.select(Axis(0), rows);
    let n = rows.len() as f64;
    let mean = sub.sum_axis(Axis(0)) / n;
    let centered = &sub - &mean;
    let cov = centered.t().dot(&centered) / (n - 1.0);
    let cov = (&cov + &cov.t()) * 0.5;
    (mean, cov)
}

fn wb_class_costs(y: &SampleMatrix, parts: &[Partitioning]) -> Result<Vec<Vec<BuresCost>>> {
    let values = y.values();
    let all: Vec<usize> = (0..y.nrows()).collect();
    let (m_all, s_all) = moments(values, &all);
    let flat: Vec<Result<BuresCost>> = class_tasks(parts)
        .par_iter()
        .map(|&(i, h)| {
            let (m_h, s_h) = moments(values, parts[i].members(h));
            bures_cost(m_all.view(), s_all.view(), m_h.view(), s_h.view())
        })
        .collect();
    let mut flat = flat.into_iter();
    parts.iter().map(|p| (0..p.class_count()).map(|_| flat.next().expect("one result per class")).collect()).collect()
}

fn check_class_sizes(ds: &SensitivityDataset, parts: &[Partitioning]) -> Result<()> {
    let k = ds.output_dim();
    for p in parts {
        for (h, rows) in p.classes().enumerate() {
            if rows.len() <= k {
                return Err(Error::ClassTooSmall {
                    input: ds.x().names()[p.input_index()].clone(),
                    class: h + 1,
                    size: rows.len(),
                    dim: k,
                });
            }
        }
    }
    Ok(())
}

struct ClassSolve {
    cost: f64,
    converged: bool,
    marginal_err: f64,
}

fn solve_class(c: Array2<f64>, solver: &SolverConfig, scale: f64) -> Result<ClassSolve> {
    match solver.kind() {
        SolverKind::Exact => Ok(ClassSolve { cost: exact_uniform_cost(c.view())?, converged: true, marginal_err: 0.0 }),
        kind => {
            let (n, m) = c.dim();
            let cm = CostMatrix::new(c / scale)?;
            let a = Array1::from_elem(n, 1.0 / n as f64);
            let b = Array1::from_elem(m, 1.0 / m as f64);
            let eps = solver.epsilon().unwrap_or_else(|| default_epsilon(&cm));
            let run = if kind == SolverKind::Sinkhorn { solve_sinkhorn } else { solve_sinkhorn_stable };
            let out = run(&cm, a.view(), b.view(), eps, solver.num_iterations(), solver.max_err())?;
            Ok(ClassSolve { cost: out.cost * scale, converged: out.converged, marginal_err: out.marginal_err })
        }
    }
}

fn transport_path(ds: &SensitivityDataset, parts: &[Partitioning], cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    let y = ds.y();
    let n = y.nrows();
    let bound = upper_bound(y, &cfg.cost)?;
    let entropic = cfg.solver.kind().is_entropic();
    let cache = if n <= FULL_COST_LIMIT { Some(full_cost(y, &cfg.cost)?) } else { None };
    // Entropic problems are solved on costs divided by the largest pairwise
    // cost, so epsilon is relative to that scale.
    let scale = if !entropic {
        1.0
    } else if let Some(full) = &cache {
        full.iter().copied().fold(0.0, f64::max)
    } else {
        pair_stats(y, &cfg.cost)?.max
    };
    let all: Vec<usize> = (0..n).collect();

    let tasks = class_tasks(parts);
    let solved: Vec<Result<ClassSolve>> = tasks
        .par_iter()
        .map(|&(i, h)| {
            let members = parts[i].members(h);
            let c = match &cache {
                Some(full) => full.select(Axis(1), members),
                None => cost_matrix(&all, members, y, &cfg.cost)?.entries().to_owned(),
            };
            solve_class(c, &cfg.solver, scale)
        })
        .collect();
    let mut solved = solved.into_iter();

    let mut warnings = Vec::new();
    let with_components = cfg.solver.kind() == SolverKind::Exact && cfg.cost.is_sq_euclidean();
    let wb = if with_components {
        match check_class_sizes(ds, parts) {
            Ok(()) => Some(wb_class_costs(y, parts)?),
            Err(e) => {
                warnings.push(format!("components not computed: {e}"));
                None
            }
        }
    } else {
        None
    };

    let mut inputs = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        let name = ds.x().names()[part.input_index()].clone();
        let mut costs = Vec::with_capacity(part.class_count());
        let mut failed = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..part.class_count() {
            let s = solved.next().expect("one result per class")?;
            if !s.converged {
                failed += 1;
                worst = worst.max(s.marginal_err);
            }
            costs.push(s.cost);
        }
        if failed > 0 {
            warnings.push(format!(
                "input `{name}`: {failed} of {} class problems did not converge (worst marginal error {worst:e})",
                part.class_count()
            ));
        }
        let sizes = part.sizes();
        let xi = average(&costs, &sizes, cfg.weighting);
        let index = xi / bound;
        let components = wb.as_ref().map(|wb| {
            let adv: Vec<f64> = wb[i].iter().map(|c| c.advective).collect();
            let diff: Vec<f64> = wb[i].iter().map(|c| c.diffusive).collect();
            let advective = average(&adv, &sizes, cfg.weighting) / bound;
            let diffusive = average(&diff, &sizes, cfg.weighting) / bound;
            Components { advective, diffusive, residual: (index - advective - diffusive).max(0.0) }
        });
        inputs.push(InputIndex { name, index, xi, components, classes: class_table(part, &costs), converged: failed == 0 });
    }

    Ok(IndexEstimate {
        method: cfg.solver.kind(),
        cost: cfg.cost.label(),
        bound,
        partitions: cfg.partitions,
        epsilon: if entropic { cfg.solver.epsilon() } else { None },
        inputs,
        warnings,
        bootstrap: None,
    })
}

fn one_d_path(ds: &SensitivityDataset, parts: &[Partitioning], cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    if ds.output_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "the 1d solver needs exactly one output column (got {})",
            ds.output_dim()
        )));
    }
    let p = cfg.solver.p();
    let cost = GroundCost::minkowski_power(p, p)?;
    let y = ds.y().column(0);
    let bound = upper_bound(ds.y(), &cost)?;
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);

    let costs: Vec<f64> = class_tasks(parts)
        .par_iter()
        .map(|&(i, h)| {
            let mut cond: Vec<f64> = parts[i].members(h).iter().map(|&r| y[r]).collect();
            cond.sort_by(f64::total_cmp);
            transport_1d_sorted(&sorted, &cond, p)
        })
        .collect();

    let mut offset = 0;
    let inputs = parts
        .iter()
        .map(|part| {
            let h = part.class_count();
            let own = &costs[offset..offset + h];
            offset += h;
            let xi = average(own, &part.sizes(), cfg.weighting);
            InputIndex {
                name: ds.x().names()[part.input_index()].clone(),
                index: xi / bound,
                xi,
                components: None,
                classes: class_table(part, own),
                converged: true,
            }
        })
        .collect();

    Ok(IndexEstimate {
        method: SolverKind::OneD,
        cost: cost.label(),
        bound,
        partitions: cfg.partitions,
        epsilon: None,
        inputs,
        warnings: Vec::new(),
        bootstrap: None,
    })
}

fn wb_path(ds: &SensitivityDataset, parts: &[Partitioning], cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    check_class_sizes(ds, parts)?;
    let bound = upper_bound(ds.y(), &GroundCost::SqEuclidean)?;
    let wb = wb_class_costs(ds.y(), parts)?;
    let inputs = parts
        .iter()
        .zip(&wb)
        .map(|(part, costs)| {
            let sizes = part.sizes();
            let adv: Vec<f64> = costs.iter().map(|c| c.advective).collect();
            let diff: Vec<f64> = costs.iter().map(|c| c.diffusive).collect();
            let total: Vec<f64> = costs.iter().map(|c| c.total).collect();
            let advective = average(&adv, &sizes, cfg.weighting) / bound;
            let diffusive = average(&diff, &sizes, cfg.weighting) / bound;
            let index = advective + diffusive;
            InputIndex {
                name: ds.x().names()[part.input_index()].clone(),
                index,
                xi: index * bound,
                components: Some(Components { advective, diffusive, residual: 0.0 }),
                classes: class_table(part, &total),
                converged: true,
            }
        })
        .collect();
    Ok(IndexEstimate {
        method: SolverKind::WassBures,
        cost: GroundCost::SqEuclidean.label(),
        bound,
        partitions: cfg.partitions,
        epsilon: None,
        inputs,
        warnings: Vec::new(),
        bootstrap: None,
    })
}

/// Runs the configured estimator on precomputed partitions of `ds.x()`.
pub fn estimate_with_partitions(
    ds: &SensitivityDataset,
    parts: &[Partitioning],
    cfg: &EstimatorConfig,
) -> Result<IndexEstimate> {
    cfg.validate()?;
    match cfg.solver.kind() {
        SolverKind::OneD => one_d_path(ds, parts, cfg),
        SolverKind::WassBures => wb_path(ds, parts, cfg),
        SolverKind::Exact | SolverKind::Sinkhorn | SolverKind::SinkhornStable => transport_path(ds, parts, cfg),
    }
}

/// Partitions every input and runs the configured estimator.
pub fn estimate(ds: &SensitivityDataset, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    cfg.validate()?;
    let parts = partition_all(ds.x(), cfg.partitions)?;
    estimate_with_partitions(ds, &parts, cfg)
}

/// Indices from discrete OT solves (exact or entropic) between the full
/// output sample and every class subsample.
pub fn ot_indices(ds: &SensitivityDataset, m: usize, cost: GroundCost, solver: SolverConfig) -> Result<IndexEstimate> {
    if matches!(solver.kind(), SolverKind::OneD | SolverKind::WassBures) {
        return Err(Error::InvalidConfig(format!(
            "ot_indices takes exact, sinkhorn or sinkhorn-stable (got {})",
            solver.kind()
        )));
    }
    estimate(ds, &EstimatorConfig::new(m, solver).with_cost(cost))
}

/// Indices for a scalar output from quantile matching with cost `|y - y'|^p`.
pub fn ot_indices_1d(ds: &SensitivityDataset, m: usize, p: f64) -> Result<IndexEstimate> {
    estimate(ds, &EstimatorConfig::new(m, SolverConfig::one_d(p)))
}

/// Wasserstein-Bures indices with their advective and diffusive parts.
pub fn ot_indices_wb(ds: &SensitivityDataset, m: usize) -> Result<IndexEstimate> {
    estimate(ds, &EstimatorConfig::new(m, SolverConfig::wass_bures()))
}

/// One-dimensional (p = 2) index of every input on every single output.
pub fn ot_indices_smap(ds: &SensitivityDataset, m: usize) -> Result<SensitivityMap> {
    let parts = partition_all(ds.x(), m)?;
    let cfg = EstimatorConfig::new(m, SolverConfig::one_d(2.0));
    let k = ds.output_dim();
    let mut values = Array2::zeros((k, ds.input_dim()));
    for j in 0..k {
        let single = ds.with_outputs(ds.y().select_columns(&[j]))?;
        let est = one_d_path(&single, &parts, &cfg)?;
        for (c, input) in est.inputs.iter().enumerate() {
            values[[j, c]] = input.index;
        }
    }
    Ok(SensitivityMap { inputs: ds.x().names().to_vec(), outputs: ds.y().names().to_vec(), values })
}

/// Name of the pseudo-input in threshold estimates.
pub const DUMMY_NAME: &str = "dummy";

/// Index of a seeded auxiliary input drawn independently of `y`: the level
/// reached by estimation noise alone.
pub fn irrelevance_threshold(
    y: &SampleMatrix,
    cfg: &EstimatorConfig,
    dummy: DummyDistribution,
    seed: u64,
) -> Result<IndexEstimate> {
    let values = dummy.sample(y.nrows(), seed);
    let x = SampleMatrix::new(Array2::from_shape_vec((y.nrows(), 1), values).expect("column"), vec![DUMMY_NAME.into()])?;
    estimate(&SensitivityDataset::new(x, y.clone())?, cfg)
}

/// Per-class separations divided by the bound, in input and class order.
pub fn local_separations(est: &IndexEstimate) -> Vec<SeparationRow> {
    est.inputs
        .iter()
        .flat_map(|input| {
            input.classes.iter().map(|c| SeparationRow {
                input: input.name.clone(),
                class: c.class,
                x: c.representative,
                value: c.cost / est.bound,
            })
        })
        .collect()
}
