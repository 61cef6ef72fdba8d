//! Entropic OT by Sinkhorn-Knopp scaling.
//!
//! Both variants run the same alternating projections starting from unit
//! scalings: column update first, then row update. The stable variant carries
//! the dual potentials `f = eps * ln u`, `g = eps * ln v` and evaluates every
//! kernel sum with a log-sum-exp, so it never forms `exp(-C / eps)`.
//! Convergence is checked every [`CHECK_EVERY`] iterations on the worse L1
//! marginal deviation.

use ndarray::{Array2, ArrayView1};

use super::{check_marginals, SolveOutcome, TransportPlan};
use crate::cost::CostMatrix;
use crate::error::{Error, Result};

pub(crate) const CHECK_EVERY: usize = 10;

/// `0.01 * mean(C)`, or `0.01` for an all-zero cost.
pub fn default_epsilon(cost: &CostMatrix) -> f64 {
    let mean = cost.mean();
    if mean > 0.0 {
        0.01 * mean
    } else {
        0.01
    }
}

fn check_params(epsilon: f64, num_iterations: usize, max_err: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be > 0 (got {epsilon})")));
    }
    if num_iterations == 0 {
        return Err(Error::InvalidConfig("num_iterations must be >= 1".into()));
    }
    if !(max_err > 0.0) {
        return Err(Error::InvalidConfig(format!("max_err must be > 0 (got {max_err})")));
    }
    Ok(())
}

fn l1(a: impl Iterator<Item = f64>, b: &[f64]) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn finish(
    cost: &CostMatrix,
    coupling: Array2<f64>,
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    iterations: usize,
    marginal_err: f64,
    converged: bool,
) -> Result<SolveOutcome> {
    let c = cost.entries();
    let transport: f64 = coupling.iter().zip(c.iter()).map(|(p, c)| p * c).sum();
    let kl: f64 = coupling
        .indexed_iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|((i, j), &p)| p * (p / (a[i] * b[j])).ln())
        .sum();
    // Entropic plans only match the marginals up to the achieved error.
    let plan = TransportPlan::new(coupling, a.to_vec(), b.to_vec(), marginal_err.max(1e-12) * 1.0001)?;
    Ok(SolveOutcome {
        cost: transport,
        regularized_cost: Some(transport + epsilon * kl),
        plan: Some(plan),
        iterations,
        marginal_err,
        converged,
    })
}

/// Sinkhorn-Knopp on the Gibbs kernel `exp(-C / epsilon)`.
///
/// The reported `cost` is the transport cost `<plan, C>` of the scaled plan;
/// the full entropic objective is in `regularized_cost`.
pub fn solve_sinkhorn(
    cost: &CostMatrix,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    epsilon: f64,
    num_iterations: usize,
    max_err: f64,
) -> Result<SolveOutcome> {
    check_marginals(cost, a, b)?;
    check_params(epsilon, num_iterations, max_err)?;
    let (n, m) = cost.dim();
    let a = a.to_vec();
    let b = b.to_vec();
    let kernel = cost.entries().mapv(|c| (-c / epsilon).exp());
    let kernel = kernel.as_standard_layout();
    let k = kernel.as_slice().expect("standard layout");

    for (i, row) in k.chunks_exact(m).enumerate() {
        if a[i] > 0.0 && row.iter().all(|&v| v == 0.0) {
            return Err(Error::KernelUnderflow);
        }
    }
    let mut col_mass = vec![0.0; m];
    for row in k.chunks_exact(m) {
        for (s, &v) in col_mass.iter_mut().zip(row) {
            *s += v;
        }
    }
    if col_mass.iter().zip(&b).any(|(&s, &w)| w > 0.0 && s == 0.0) {
        return Err(Error::KernelUnderflow);
    }

    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let mut ktu = vec![0.0; m];
    let mut err = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    let kt_times = |u: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (row, &ui) in k.chunks_exact(m).zip(u) {
            if ui != 0.0 {
                for (o, &kij) in out.iter_mut().zip(row) {
                    *o += kij * ui;
                }
            }
        }
    };

    for it in 1..=num_iterations {
        iterations = it;
        kt_times(&u, &mut ktu);
        for ((vj, &s), &bj) in v.iter_mut().zip(&ktu).zip(&b) {
            *vj = if bj > 0.0 { bj / s } else { 0.0 };
        }
        for ((ui, row), &ai) in u.iter_mut().zip(k.chunks_exact(m)).zip(&a) {
            let kv: f64 = row.iter().zip(&v).map(|(k, v)| k * v).sum();
            *ui = if ai > 0.0 { ai / kv } else { 0.0 };
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::KernelUnderflow);
        }
        if it % CHECK_EVERY == 0 || it == num_iterations {
            kt_times(&u, &mut ktu);
            let col_err = l1(ktu.iter().zip(&v).map(|(s, v)| s * v), &b);
            let row_err = l1(
                k.chunks_exact(m).zip(&u).map(|(row, ui)| ui * row.iter().zip(&v).map(|(k, v)| k * v).sum::<f64>()),
                &a,
            );
            err = col_err.max(row_err);
            if err <= max_err {
                converged = true;
                break;
            }
        }
    }

    let coupling = Array2::from_shape_fn((n, m), |(i, j)| u[i] * k[i * m + j] * v[j]);
    finish(cost, coupling, &a, &b, epsilon, iterations, err, converged)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn. Same iterates as [`solve_sinkhorn`] but immune to
/// kernel underflow; an exhausted budget returns `converged = false`.
pub fn solve_sinkhorn_stable(
    cost: &CostMatrix,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    epsilon: f64,
    num_iterations: usize,
    max_err: f64,
) -> Result<SolveOutcome> {
    check_marginals(cost, a, b)?;
    check_params(epsilon, num_iterations, max_err)?;
    let (n, m) = cost.dim();
    let a = a.to_vec();
    let b = b.to_vec();
    let c = cost.entries().as_standard_layout().into_owned();
    let c = c.as_slice().expect("standard layout");
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut err = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut col_buf = vec![0.0; n];

    let update_g = |f: &[f64], g: &mut [f64], buf: &mut [f64]| {
        for j in 0..m {
            for i in 0..n {
                buf[i] = (f[i] - c[i * m + j]) / epsilon;
            }
            g[j] = epsilon * (log_b[j] - log_sum_exp(buf.iter().copied()));
        }
    };
    let update_f = |g: &[f64], f: &mut [f64]| {
        for i in 0..n {
            let row = &c[i * m..(i + 1) * m];
            f[i] = epsilon * (log_a[i] - log_sum_exp(row.iter().zip(g).map(|(cij, gj)| (gj - cij) / epsilon)));
        }
    };
    let entry = |f: &[f64], g: &[f64], i: usize, j: usize| {
        let x = (f[i] + g[j] - c[i * m + j]) / epsilon;
        if x.is_nan() {
            0.0
        } else {
            x.exp()
        }
    };

    for it in 1..=num_iterations {
        iterations = it;
        update_g(&f, &mut g, &mut col_buf);
        update_f(&g, &mut f);
        if it % super::sinkhorn::CHECK_EVERY == 0 || it == num_iterations {
            let mut cols = vec![0.0; m];
            let mut rows = vec![0.0; n];
            for i in 0..n {
                for j in 0..m {
                    let p = entry(&f, &g, i, j);
                    rows[i] += p;
                    cols[j] += p;
                }
            }
            err = l1(cols.into_iter(), &b).max(l1(rows.into_iter(), &a));
            if err <= max_err {
                converged = true;
                break;
            }
        }
    }

    let coupling = Array2::from_shape_fn((n, m), |(i, j)| entry(&f, &g, i, j));
    finish(cost, coupling, &a, &b, epsilon, iterations, err, converged)
}
