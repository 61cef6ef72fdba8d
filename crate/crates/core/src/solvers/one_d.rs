use crate::error::{Error, Result};

/// `|Fa^-1(t) - Fb^-1(t)|^p` integrated over `t` in (0, 1], for the uniform
/// empirical distributions on two sorted samples.
///
/// Both quantile functions are step functions with jumps at `i / n` and
/// `j / m`; the integral is summed exactly over the merged breakpoints, which
/// are tracked as integers in units of `1 / (n m)`. When `m` divides `n`
/// every piece has length `1 / n` and this is the plain average of
/// `|a[j] - b[ceil(j m / n)]|^p` over the `n`-point grid.
pub(crate) fn transport_1d_sorted(a: &[f64], b: &[f64], p: f64) -> f64 {
    let (n, m) = (a.len() as u64, b.len() as u64);
    let pow = |d: f64| {
        let d = d.abs();
        if p == 2.0 {
            d * d
        } else if p == 1.0 {
            d
        } else {
            d.powf(p)
        }
    };
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos = 0u64;
    let mut acc = 0.0;
    let end = n * m;
    while pos < end {
        let next_a = (i as u64 + 1) * m;
        let next_b = (j as u64 + 1) * n;
        let next = next_a.min(next_b);
        acc += (next - pos) as f64 * pow(a[i] - b[j]);
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    acc / end as f64
}

fn check_sorted(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidSample(format!("{name} sample is empty")));
    }
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: k, col: 0 });
    }
    if v.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidSample(format!("{name} sample is not sorted ascending")));
    }
    Ok(())
}

/// OT cost with ground cost `|y - y'|^p` between the uniform empirical
/// distributions of two sorted scalar samples.
pub fn solve_1d(y_marg: &[f64], y_cond: &[f64], p: f64) -> Result<f64> {
    check_sorted("marginal", y_marg)?;
    check_sorted("conditional", y_cond)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidConfig(format!("p must be >= 1 (got {p})")));
    }
    Ok(transport_1d_sorted(y_marg, y_cond, p))
}
