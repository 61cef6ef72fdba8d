//! Optimal-transport solvers between discrete distributions.
//!
//! * [`solve_exact`]: network simplex on the transportation problem.
//! * [`solve_sinkhorn`] / [`solve_sinkhorn_stable`]: entropic OT by matrix
//!   scaling, in the primal and in the log domain.
//! * [`solve_1d`]: quantile matching for scalar samples.
//! * [`bures_cost`]: closed-form Wasserstein-Bures cost from two sets of moments.

mod bures;
mod network_simplex;
mod one_d;
mod sinkhorn;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cost::CostMatrix;
use crate::error::{Error, Result};

pub use bures::{bures_cost, matrix_sqrt_psd, BuresCost};
pub use one_d::solve_1d;
pub(crate) use one_d::transport_1d_sorted;
pub use sinkhorn::{default_epsilon, solve_sinkhorn, solve_sinkhorn_stable};

/// Tolerance on the marginal sums accepted by the solvers.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Coupling between two discrete distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    coupling: Array2<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    /// Checks nonnegativity and that the row/column sums of `coupling` match
    /// the marginals within `tolerance` (L-infinity).
    pub fn new(coupling: Array2<f64>, row_marginal: Vec<f64>, col_marginal: Vec<f64>, tolerance: f64) -> Result<Self> {
        if coupling.dim() != (row_marginal.len(), col_marginal.len()) {
            return Err(Error::DimensionMismatch(format!(
                "coupling {:?} vs marginals ({}, {})",
                coupling.dim(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        if let Some(v) = coupling.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InfeasibleMarginals(format!("negative coupling entry {v}")));
        }
        let plan = Self { coupling, row_marginal, col_marginal };
        let err = plan.marginal_error_max();
        if err > tolerance {
            return Err(Error::InfeasibleMarginals(format!("plan marginals off by {err:e}")));
        }
        Ok(plan)
    }

    pub fn coupling(&self) -> ArrayView2<'_, f64> {
        self.coupling.view()
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Largest absolute deviation of any row or column sum from its marginal.
    pub fn marginal_error_max(&self) -> f64 {
        let rows = self.coupling.sum_axis(Axis(1));
        let cols = self.coupling.sum_axis(Axis(0));
        let r = rows.iter().zip(&self.row_marginal).map(|(s, a)| (s - a).abs());
        let c = cols.iter().zip(&self.col_marginal).map(|(s, b)| (s - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// `<coupling, C>`
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        (&self.coupling * &cost.entries()).sum()
    }

    pub fn nonzeros(&self) -> usize {
        self.coupling.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Result of one OT solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Transport cost `<plan, C>`.
    pub cost: f64,
    /// `<plan, C> + eps * KL(plan | a x b)` for entropic solvers.
    pub regularized_cost: Option<f64>,
    pub plan: Option<TransportPlan>,
    pub iterations: usize,
    /// Worse L1 marginal deviation (entropic solvers).
    pub marginal_err: f64,
    pub converged: bool,
}

/// Which estimator family computes the per-class OT cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[serde(rename = "1d")]
    OneD,
    WassBures,
    Exact,
    Sinkhorn,
    SinkhornStable,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::OneD => "1d",
            SolverKind::WassBures => "wass-bures",
            SolverKind::Exact => "exact",
            SolverKind::Sinkhorn => "sinkhorn",
            SolverKind::SinkhornStable => "sinkhorn-stable",
        }
    }

    pub fn is_entropic(self) -> bool {
        matches!(self, SolverKind::Sinkhorn | SolverKind::SinkhornStable)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1d" => SolverKind::OneD,
            "wass-bures" | "wb" => SolverKind::WassBures,
            "exact" | "transport" | "network-simplex" => SolverKind::Exact,
            "sinkhorn" => SolverKind::Sinkhorn,
            "sinkhorn-stable" | "sinkhorn_log" => SolverKind::SinkhornStable,
            other => return Err(Error::InvalidConfig(format!("unknown solver `{other}`"))),
        })
    }
}

/// Solver choice and its numerical options.
///
/// For entropic solvers inside the index estimators, `epsilon` is expressed
/// relative to the largest pairwise output cost (costs are divided by it
/// before scaling). When `epsilon` is `None`, each problem uses
/// [`default_epsilon`] on its own cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    kind: SolverKind,
    epsilon: Option<f64>,
    num_iterations: usize,
    max_err: f64,
    p: f64,
}

impl SolverConfig {
    pub const DEFAULT_ITERATIONS: usize = 1000;
    pub const DEFAULT_MAX_ERR: f64 = 1e-9;

    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            epsilon: None,
            num_iterations: Self::DEFAULT_ITERATIONS,
            max_err: Self::DEFAULT_MAX_ERR,
            p: 2.0,
        }
    }

    pub fn exact() -> Self {
        Self::new(SolverKind::Exact)
    }

    pub fn sinkhorn(epsilon: f64) -> Self {
        Self::new(SolverKind::Sinkhorn).with_epsilon(epsilon)
    }

    pub fn sinkhorn_stable(epsilon: f64) -> Self {
        Self::new(SolverKind::SinkhornStable).with_epsilon(epsilon)
    }

    pub fn wass_bures() -> Self {
        Self::new(SolverKind::WassBures)
    }

    pub fn one_d(p: f64) -> Self {
        Self::new(SolverKind::OneD).with_p(p)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_iterations(mut self, num_iterations: usize) -> Self {
        self.num_iterations = num_iterations;
        self
    }

    pub fn with_max_err(mut self, max_err: f64) -> Self {
        self.max_err = max_err;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn num_iterations(&self) -> usize {
        self.num_iterations
    }

    pub fn max_err(&self) -> f64 {
        self.max_err
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(format!("epsilon must be > 0 (got {eps})")));
            }
        }
        if self.num_iterations < 1 {
            return Err(Error::InvalidConfig("num_iterations must be >= 1".into()));
        }
        if !(self.max_err > 0.0) {
            return Err(Error::InvalidConfig(format!("max_err must be > 0 (got {})", self.max_err)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidConfig(format!("p must be >= 1 (got {})", self.p)));
        }
        Ok(())
    }
}

pub(crate) fn check_marginals(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<()> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix is {n}x{m} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch("empty marginal".into()));
    }
    for (name, w) in [("row", a), ("column", b)] {
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InfeasibleMarginals(format!("{name} marginal has invalid weight {v}")));
        }
        let s = w.sum();
        if (s - 1.0).abs() > MARGINAL_TOLERANCE {
            return Err(Error::InfeasibleMarginals(format!("{name} marginal sums to {s}")));
        }
    }
    Ok(())
}

/// Exact OT cost and an optimal basic plan (at most n + m - 1 nonzeros).
pub fn solve_exact(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<SolveOutcome> {
    check_marginals(cost, a, b)?;
    let c = cost.entries().as_standard_layout().into_owned();
    let flows = network_simplex::solve_transport(c.as_slice().expect("standard layout"), &a.to_vec(), &b.to_vec())?;
    let coupling = Array2::from_shape_vec(cost.dim(), flows).expect("flow count");
    let plan = TransportPlan::new(coupling, a.to_vec(), b.to_vec(), MARGINAL_TOLERANCE)?;
    Ok(SolveOutcome {
        cost: plan.cost(cost),
        regularized_cost: None,
        plan: Some(plan),
        iterations: 0,
        marginal_err: 0.0,
        converged: true,
    })
}

/// Exact OT cost between the uniform distribution on the `n` rows and the
/// uniform distribution on the `m` columns of `cost`.
///
/// Supplies are scaled to integers (`m` per row, `n` per column) so every
/// pivot moves an integral amount of flow.
pub(crate) fn exact_uniform_cost(cost: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, m) = cost.dim();
    let c = cost.as_standard_layout();
    let c = c.as_slice().expect("standard layout");
    let flows = network_simplex::solve_transport(c, &vec![m as f64; n], &vec![n as f64; m])?;
    let total: f64 = flows.iter().zip(c).map(|(f, c)| f * c).sum();
    Ok(total / (n as f64 * m as f64))
}
