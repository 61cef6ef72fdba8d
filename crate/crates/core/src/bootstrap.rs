//! Row-resampling bootstrap for index estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::SensitivityDataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, IndexEstimate};
use crate::solvers::SolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiType {
    /// Bias-corrected normal approximation.
    #[default]
    Normal,
    Basic,
    Percentile,
}

impl CiType {
    pub fn name(self) -> &'static str {
        match self {
            CiType::Normal => "normal",
            CiType::Basic => "basic",
            CiType::Percentile => "percentile",
        }
    }
}

impl fmt::Display for CiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "norm" => Ok(CiType::Normal),
            "basic" => Ok(CiType::Basic),
            "percentile" | "perc" => Ok(CiType::Percentile),
            other => Err(Error::InvalidConfig(format!("unknown interval type `{other}`"))),
        }
    }
}

/// Which quantity of an input a bootstrap statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Index,
    Advective,
    Diffusive,
    Residual,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Index => "index",
            Statistic::Advective => "advective",
            Statistic::Diffusive => "diffusive",
            Statistic::Residual => "residual",
        }
    }

    fn read(self, est: &IndexEstimate, input: usize) -> Option<f64> {
        let i = &est.inputs[input];
        match self {
            Statistic::Index => Some(i.index),
            Statistic::Advective => i.components.map(|c| c.advective),
            Statistic::Diffusive => i.components.map(|c| c.diffusive),
            Statistic::Residual if est.method == SolverKind::WassBures => None,
            Statistic::Residual => i.components.map(|c| c.residual),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "index" => Ok(Statistic::Index),
            "advective" => Ok(Statistic::Advective),
            "diffusive" => Ok(Statistic::Diffusive),
            "residual" => Ok(Statistic::Residual),
            other => Err(Error::InvalidConfig(format!("unknown statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapStat {
    pub input: String,
    pub statistic: Statistic,
    pub original: f64,
    /// Mean of the replicates minus the original.
    pub bias: f64,
    /// Standard deviation of the replicates.
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub replicates: usize,
    pub ci_type: CiType,
    pub confidence: f64,
    /// Degenerate resamples that were redrawn.
    pub redraws: usize,
    pub stats: Vec<BootstrapStat>,
}

impl BootstrapResult {
    pub fn get(&self, input: &str, statistic: Statistic) -> Option<&BootstrapStat> {
        self.stats.iter().find(|s| s.input == input && s.statistic == statistic)
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Normal quantile `z` with `P(Z <= z) = p`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Confidence interval from an original estimate and its replicates.
pub fn interval(original: f64, replicates: &[f64], confidence: f64, ci_type: CiType) -> (f64, f64, f64, f64) {
    let r = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / r;
    let sd = (replicates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt();
    let bias = mean - original;
    let alpha = (1.0 - confidence) / 2.0;
    let (low, high) = match ci_type {
        CiType::Normal => {
            let half = normal_quantile(1.0 - alpha) * sd;
            let center = original - bias;
            (center - half, center + half)
        }
        CiType::Basic | CiType::Percentile => {
            let mut sorted = replicates.to_vec();
            sorted.sort_by(f64::total_cmp);
            let q_lo = quantile_sorted(&sorted, alpha);
            let q_hi = quantile_sorted(&sorted, 1.0 - alpha);
            if ci_type == CiType::Basic {
                (2.0 * original - q_hi, 2.0 * original - q_lo)
            } else {
                (q_lo, q_hi)
            }
        }
    };
    (bias, sd, low, high)
}

fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateInput { .. } | Error::ClassTooSmall { .. } | Error::ZeroBound)
}

/// Resamples rows jointly, re-partitions and re-estimates `replicates` times.
///
/// Replicate `r` draws from stream `r` of a generator seeded with `seed`, so
/// results do not depend on scheduling. Resamples that leave an input or the
/// output constant are redrawn, up to `10 * replicates` times in total.
pub fn bootstrap_indices(
    ds: &SensitivityDataset,
    cfg: &EstimatorConfig,
    replicates: usize,
    confidence: f64,
    ci_type: CiType,
    seed: u64,
) -> Result<BootstrapResult> {
    let original = estimate(ds, cfg)?;
    bootstrap_from(ds, cfg, &original, replicates, confidence, ci_type, seed)
}

/// As [`bootstrap_indices`], reusing an already computed original estimate.
pub fn bootstrap_from(
    ds: &SensitivityDataset,
    cfg: &EstimatorConfig,
    original: &IndexEstimate,
    replicates: usize,
    confidence: f64,
    ci_type: CiType,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < 2 {
        return Err(Error::InvalidConfig(format!("at least 2 replicates are required (got {replicates})")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence must lie in (0, 1) (got {confidence})")));
    }
    let n = ds.len();
    let budget = 10 * replicates;
    let redraws = AtomicUsize::new(0);

    let runs: Vec<Result<IndexEstimate>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            loop {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                match estimate(&ds.select_rows(&rows), cfg) {
                    Err(e) if is_degenerate(&e) => {
                        if redraws.fetch_add(1, Ordering::Relaxed) + 1 > budget {
                            return Err(Error::BootstrapExhausted(budget));
                        }
                    }
                    other => return other,
                }
            }
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut stats = Vec::new();
    for (i, input) in original.inputs.iter().enumerate() {
        for statistic in [Statistic::Index, Statistic::Advective, Statistic::Diffusive, Statistic::Residual] {
            let Some(orig) = statistic.read(original, i) else { continue };
            let values: Option<Vec<f64>> = runs.iter().map(|run| statistic.read(run, i)).collect();
            let Some(values) = values else { continue };
            let (bias, std_error, ci_low, ci_high) = interval(orig, &values, confidence, ci_type);
            stats.push(BootstrapStat { input: input.name.clone(), statistic, original: orig, bias, std_error, ci_low, ci_high });
        }
    }
    Ok(BootstrapResult { replicates, ci_type, confidence, redraws: redraws.into_inner(), stats })
}
