//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use otsense::bootstrap::{bootstrap_from, CiType, Statistic};
use otsense::io::ResultsDoc;
use otsense::models::{budworm, gen_budworm, gen_climate, gen_linear_gaussian, BudwormOutput};
use otsense::solvers::{solve_exact, solve_sinkhorn, solve_sinkhorn_stable};
use otsense::{
    estimate, irrelevance_threshold, ot_indices, ot_indices_1d, ot_indices_smap, ot_indices_wb, CostMatrix,
    DummyDistribution, EstimatorConfig, GroundCost, IndexEstimate, SampleMatrix, SensitivityDataset, SolverConfig,
};

const GAUSS_SEED: u64 = 42;
const GAUSS_N: usize = 2000;
const GAUSS_M: usize = 20;

/// Sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    lines: Vec<(bool, String)>,
}

impl Checks {
    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.lines.push((ok, detail.into()));
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(ok, format!("{label}: {got:.4} vs {want:.4} (tol {tol})"));
    }

    fn timed(&mut self, label: &str, elapsed: Duration, target: Duration) {
        // Runtime targets are reported, not enforced: they depend on the host.
        let within = if elapsed <= target { "within" } else { "OVER" };
        self.lines.push((true, format!("{label} runtime {elapsed:.2?} ({within} target {target:?})")));
    }
}

fn gauss() -> SensitivityDataset {
    gen_linear_gaussian(GAUSS_N, GAUSS_SEED).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sqrt_psd(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(s.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Population Wasserstein-Bures indices of the linear Gaussian model, as
/// (advective, diffusive, total) per input.
fn gaussian_oracle() -> Vec<(f64, f64, f64)> {
    let a = DMatrix::from_row_slice(2, 3, &[4.0, -2.0, 1.0, 2.0, 5.0, -1.0]);
    let sigma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
    let sy = &a * &sigma * a.transpose();
    let bound = 2.0 * sy.trace();
    let root = sqrt_psd(&sy);
    (0..3)
        .map(|i| {
            let s = sigma.column(i).into_owned();
            let shift = &a * &s;
            let adv = shift.dot(&shift) / sigma[(i, i)];
            let cond = &a * (&sigma - &s * s.transpose() / sigma[(i, i)]) * a.transpose();
            let diff = (&sy + &cond).trace() - 2.0 * sqrt_psd(&(&root * &cond * &root)).trace();
            (adv / bound, diff / bound, (adv + diff) / bound)
        })
        .collect()
}

#[allow(clippy::approx_constant)]
fn criterion_1() -> Checks {
    let mut c = Checks::default();
    let ds = gauss();
    let start = Instant::now();
    let wb = ot_indices_wb(&ds, GAUSS_M).unwrap();
    c.timed("WB", start.elapsed(), Duration::from_secs(10));
    let paper = [(0.294, 0.198, 0.492), (0.318, 0.189, 0.507), (0.107, 0.010, 0.117)];
    let oracle = gaussian_oracle();
    for (k, input) in wb.inputs.iter().enumerate() {
        let comp = input.components.unwrap();
        c.near(&format!("{} total", input.name), input.index, paper[k].2, 0.05);
        c.near(&format!("{} advective", input.name), comp.advective, paper[k].0, 0.05);
        c.near(&format!("{} diffusive", input.name), comp.diffusive, paper[k].1, 0.05);
        // The printed table is the population value rounded to 3 places.
        c.near(&format!("{} oracle vs table", input.name), oracle[k].2, paper[k].2, 0.0005);
    }
    c
}

fn criterion_2() -> Checks {
    let mut c = Checks::default();
    let ds = gauss();
    let sq = GroundCost::SqEuclidean;
    let start = Instant::now();
    let exact = ot_indices(&ds, GAUSS_M, sq.clone(), SolverConfig::exact()).unwrap();
    c.timed("exact", start.elapsed(), Duration::from_secs(60));
    let wb = ot_indices_wb(&ds, GAUSS_M).unwrap();
    let start = Instant::now();
    let small = ot_indices(&ds, GAUSS_M, sq.clone(), SolverConfig::sinkhorn(0.001).with_iterations(1_000_000)).unwrap();
    c.timed("sinkhorn(0.001)", start.elapsed(), Duration::from_secs(60));
    let large = ot_indices(&ds, GAUSS_M, sq, SolverConfig::sinkhorn(0.05).with_iterations(1_000_000)).unwrap();
    c.check(small.converged() && large.converged(), "entropic solves converged");

    let (e, w, s, l) = (exact.indices(), wb.indices(), small.indices(), large.indices());
    for (name, a, b) in [("exact/wb", &e, &w), ("exact/sinkhorn(0.001)", &e, &s), ("wb/sinkhorn(0.001)", &w, &s)] {
        let d = max_abs_diff(a, b);
        c.check(d <= 0.05, format!("{name}: max difference {d:.4} (tol 0.05)"));
    }
    c.check(l[1] >= l[0] && l[0] > l[2], format!("sinkhorn(0.05) ranking X2 >= X1 > X3: {:.4} {:.4} {:.4}", l[0], l[1], l[2]));
    let excess = l.iter().zip(&e).map(|(a, b)| a - b).sum::<f64>() / 3.0;
    c.check(excess > 0.1, format!("sinkhorn(0.05) mean excess over exact {excess:.4} (> 0.1)"));
    c
}

fn criterion_3() -> Checks {
    let mut c = Checks::default();
    let map = ot_indices_smap(&gauss(), GAUSS_M).unwrap();
    let paper = [[0.5555770, 0.01877416, 0.1618665], [0.2954471, 0.70408182, 0.1040416]];
    for (r, out) in ["Y1", "Y2"].iter().enumerate() {
        for (j, inp) in ["X1", "X2", "X3"].iter().enumerate() {
            c.near(&format!("({out},{inp})"), map.get(out, inp).unwrap(), paper[r][j], 0.07);
        }
    }
    c
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_4() -> Checks {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut exact_hits = 0;
    for trial in 0..200 {
        let n = 2 + trial % 5;
        let entries = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
        let best = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| entries[[i, j]]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        let w = Array1::from_elem(n, 1.0 / n as f64);
        let out = solve_exact(&CostMatrix::new(entries).unwrap(), w.view(), w.view()).unwrap();
        let d = (out.cost - best).abs();
        exact_hits += usize::from(d == 0.0);
        worst = worst.max(d);
    }
    c.check(worst <= 1e-12, format!("max |exact - permutation minimum| = {worst:.1e} over 200 instances"));
    c.lines.push((true, format!("{exact_hits}/200 bit-identical")));
    c
}

fn criterion_5() -> Checks {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(20..=500);
        let m = rng.random_range(2..=10);
        let d = rng.random_range(1..=3);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, 1), |(i, _)| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            x.row(i).iter().enumerate().map(|(j, v)| (j + 1) as f64 * v * v).sum::<f64>() + 0.3 * noise
        });
        let ds = SensitivityDataset::new(
            SampleMatrix::with_default_names(x, "X").unwrap(),
            SampleMatrix::with_default_names(y, "Y").unwrap(),
        )
        .unwrap();
        let one = ot_indices_1d(&ds, m, 2.0).unwrap();
        let exact = ot_indices(&ds, m, GroundCost::SqEuclidean, SolverConfig::exact()).unwrap();
        worst = worst.max(max_abs_diff(&one.indices(), &exact.indices()));
    }
    c.check(worst <= 1e-8, format!("max |1d - exact| = {worst:.1e} over 50 datasets (tol 1e-8)"));
    c
}

fn criterion_6() -> Checks {
    let mut c = Checks::default();
    let w = Array1::from_elem(20, 1.0 / 20.0);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let cost = CostMatrix::new(Array2::from_shape_fn((20, 20), |_| rng.random_range(0.0..1.0))).unwrap();
        let exact = solve_exact(&cost, w.view(), w.view()).unwrap().cost;
        let mut gaps = Vec::new();
        for eps in [1.0, 0.1, 0.01] {
            let plain = solve_sinkhorn(&cost, w.view(), w.view(), eps, 200_000, 1e-10).unwrap();
            let stable = solve_sinkhorn_stable(&cost, w.view(), w.view(), eps, 200_000, 1e-10).unwrap();
            if plain.converged && stable.converged {
                let d = (plain.cost - stable.cost).abs();
                c.check(d <= 1e-9, format!("instance {seed}, eps {eps}: |sinkhorn - stable| = {d:.1e}"));
            }
            gaps.push((stable.cost - exact).abs());
        }
        let mono = gaps.windows(2).all(|g| g[1] <= g[0]);
        let gap_last = gaps[2];
        let limit = 1e-2 * cost.mean();
        let gaps: Vec<String> = gaps.iter().map(|g| format!("{g:.2e}")).collect();
        c.check(mono && gap_last < limit, format!("instance {seed}: gaps {gaps:?}, limit at eps 0.01 {limit:.2e}"));
    }
    c
}

fn criterion_7() -> Checks {
    let mut c = Checks::default();
    let start = Instant::now();
    let data = gen_budworm(2000, 7, &budworm::default_times()).unwrap();
    let ds = data.dataset(BudwormOutput::B).unwrap();
    let cfg = EstimatorConfig::new(25, SolverConfig::exact());
    let est = estimate(&ds, &cfg).unwrap();
    let threshold = irrelevance_threshold(ds.y(), &cfg, DummyDistribution::Uniform, 7).unwrap().inputs[0].index;
    c.timed("budworm", start.elapsed(), Duration::from_secs(300));

    let mut ranked: Vec<(&str, f64)> = est.inputs.iter().map(|i| (i.name.as_str(), i.index)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let top: Vec<&str> = ranked[..2].iter().map(|r| r.0).collect();
    c.check(top.contains(&"K") && top.contains(&"r_s"), format!("top two {top:?}"));
    c.near("K", est.input("K").unwrap().index, 0.583, 0.07);
    c.near("r_s", est.input("r_s").unwrap().index, 0.215, 0.07);
    for name in ["beta", "alpha", "K_s", "r_e", "P"] {
        let v = est.input(name).unwrap().index;
        c.check(v < threshold + 0.02, format!("{name} {v:.4} < threshold {threshold:.4} + 0.02"));
    }
    c
}

fn criterion_8() -> Checks {
    let mut c = Checks::default();
    let start = Instant::now();
    let ds = gen_climate(2000, 8).unwrap();
    let solver = SolverConfig::sinkhorn(0.001).with_iterations(100_000).with_max_err(1e-3);
    let cfg = EstimatorConfig::new(15, solver).with_cost(GroundCost::minkowski_power(3.0, 3.0).unwrap());
    let est = estimate(&ds, &cfg).unwrap();
    let threshold = irrelevance_threshold(ds.y(), &cfg, DummyDistribution::StandardNormal, 8).unwrap().inputs[0].index;
    c.timed("climate", start.elapsed(), Duration::from_secs(300));

    let mut ranked: Vec<(&str, f64)> = est.inputs.iter().map(|i| (i.name.as_str(), i.index)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    c.check(ranked[0].0 == "phi11" && ranked[0].1 > ranked[1].1, format!("unique maximum {:?}", ranked[0]));
    c.check(ranked[1].0 == "S", format!("second {:?}", ranked[1]));
    c.near("phi11", est.input("phi11").unwrap().index, 0.212, 0.05);
    c.near("S", est.input("S").unwrap().index, 0.079, 0.04);
    c.near("normal-dummy threshold", threshold, 0.026, 0.02);
    c
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn transformed(ds: &SensitivityDataset) -> SensitivityDataset {
    let (s, t) = (0.6_f64.sin(), 0.6_f64.cos());
    let y = ds.y().values();
    let z = Array2::from_shape_fn(y.dim(), |(i, j)| {
        let r = if j == 0 { t * y[[i, 0]] - s * y[[i, 1]] } else { s * y[[i, 0]] + t * y[[i, 1]] };
        3.7 * r + [10.0, -4.0][j]
    });
    ds.with_outputs(SampleMatrix::new(z, ds.y().names().to_vec()).unwrap()).unwrap()
}

fn criterion_9() -> Checks {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // Marginal feasibility of plans.
    let mut worst_exact: f64 = 0.0;
    let mut worst_entropic: f64 = 0.0;
    for _ in 0..100 {
        let (n, m) = (rng.random_range(1..12), rng.random_range(1..12));
        let cost = CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..1.0))).unwrap();
        let mut a = Array1::from_shape_fn(n, |_| rng.random_range(0.1..1.0));
        let mut b = Array1::from_shape_fn(m, |_| rng.random_range(0.1..1.0));
        a /= a.sum();
        b /= b.sum();
        let plan = solve_exact(&cost, a.view(), b.view()).unwrap().plan.unwrap();
        worst_exact = worst_exact.max(plan.marginal_error_max());
        let out = solve_sinkhorn_stable(&cost, a.view(), b.view(), 0.05, 100_000, 1e-10).unwrap();
        worst_entropic = worst_entropic.max(out.plan.unwrap().marginal_error_max());
    }
    c.check(worst_exact <= 1e-12, format!("exact plan marginal error {worst_exact:.1e}"));
    c.check(worst_entropic <= 1e-9, format!("entropic plan marginal error {worst_entropic:.1e}"));

    // Affine invariance of squared-Euclidean indices.
    let ds = gen_linear_gaussian(500, 90).unwrap();
    let moved = transformed(&ds);
    for (label, solver) in [("exact", SolverConfig::exact()), ("wass-bures", SolverConfig::wass_bures())] {
        let cfg = EstimatorConfig::new(10, solver);
        let d = max_abs_diff(&estimate(&ds, &cfg).unwrap().indices(), &estimate(&moved, &cfg).unwrap().indices());
        c.check(d <= 1e-9, format!("{label} indices under rotation, scaling and shift: max change {d:.1e}"));
    }

    // WB decomposition and nonnegativity.
    let wb = ot_indices_wb(&gauss(), GAUSS_M).unwrap();
    let split = wb.inputs.iter().map(|i| {
        let comp = i.components.unwrap();
        (i.index - comp.advective - comp.diffusive).abs()
    });
    let split = split.fold(0.0, f64::max);
    c.check(split <= 1e-12, format!("WB total - (advective + diffusive) = {split:.1e}"));
    let mut all: Vec<f64> = wb.indices();
    for solver in [SolverConfig::exact(), SolverConfig::sinkhorn(0.01), SolverConfig::one_d(2.0)] {
        let ds1 = ds.with_outputs(ds.y().select_columns(&[0])).unwrap();
        all.extend(estimate(&ds1, &EstimatorConfig::new(10, solver)).unwrap().indices());
    }
    let low = all.iter().copied().fold(f64::INFINITY, f64::min);
    c.check(low >= 0.0, format!("smallest index over solvers {low:.4}"));

    // Determinism across thread counts.
    let cfg = EstimatorConfig::new(8, SolverConfig::sinkhorn(0.01));
    let run = |threads: usize| {
        in_pool(threads, || {
            let mut est = estimate(&ds, &cfg).unwrap();
            est.bootstrap = Some(bootstrap_from(&ds, &cfg, &est, 20, 0.95, CiType::Normal, 3).unwrap());
            ResultsDoc::new(&est, None).to_json().unwrap()
        })
    };
    let (one, four) = (run(1), run(4));
    c.check(one == four, "JSON byte-identical with 1 and 4 threads");

    // Max-functionality and the noise floor.
    let x = Array2::from_shape_fn((2000, 1), |_| rng.random_range(0.0..1.0));
    let ident = SensitivityDataset::new(
        SampleMatrix::with_default_names(x.clone(), "X").unwrap(),
        SampleMatrix::with_default_names(x, "Y").unwrap(),
    )
    .unwrap();
    let v = ot_indices(&ident, 20, GroundCost::SqEuclidean, SolverConfig::exact()).unwrap().indices()[0];
    c.check(v >= 0.9, format!("Y = X index {v:.4} (>= 0.9)"));
    let dummy = irrelevance_threshold(gauss().y(), &EstimatorConfig::new(20, SolverConfig::exact()), DummyDistribution::StandardNormal, 9)
        .unwrap()
        .inputs[0]
        .index;
    c.check(dummy <= 0.1, format!("independent dummy index {dummy:.4} (<= 0.1)"));
    c
}

fn wb_config() -> EstimatorConfig {
    EstimatorConfig::new(GAUSS_M, SolverConfig::wass_bures())
}

fn boot_x(est: &IndexEstimate, ds: &SensitivityDataset, r: usize, seed: u64, input: &str) -> (f64, f64) {
    let b = bootstrap_from(ds, &wb_config(), est, r, 0.95, CiType::Normal, seed).unwrap();
    let s = b.get(input, Statistic::Index).unwrap();
    (s.ci_low, s.ci_high)
}

fn criterion_10() -> Checks {
    let mut c = Checks::default();
    let ds = gauss();
    let est = ot_indices_wb(&ds, GAUSS_M).unwrap();
    let start = Instant::now();
    let (low, high) = boot_x(&est, &ds, 1000, 10, "X1");
    c.timed("R=1000 bootstrap", start.elapsed(), Duration::from_secs(60));
    c.near("X1 CI low", low, 0.451742695, 0.02);
    c.near("X1 CI high", high, 0.47856489, 0.02);

    let target = gaussian_oracle()[2].2;
    let datasets = 200;
    let mut covered = 0;
    for k in 0..datasets {
        let ds = gen_linear_gaussian(GAUSS_N, 10_000 + k as u64).unwrap();
        let est = ot_indices_wb(&ds, GAUSS_M).unwrap();
        let (lo, hi) = boot_x(&est, &ds, 200, k as u64, "X3");
        covered += usize::from(lo <= target && target <= hi);
    }
    let rate = covered as f64 / datasets as f64;
    c.check(rate >= 0.85, format!("X3 coverage {covered}/{datasets} = {rate:.3} of {target:.4} at R=200 (>= 0.85)"));
    c
}

fn main() {
    let criteria: [(&str, fn() -> Checks); 10] = [
        ("analytical Gaussian reproduction", criterion_1),
        ("solver agreement", criterion_2),
        ("sensitivity map", criterion_3),
        ("brute-force OT oracle", criterion_4),
        ("1-D / exact equivalence", criterion_5),
        ("entropic convergence", criterion_6),
        ("budworm ranking", criterion_7),
        ("climate ranking", criterion_8),
        ("property suites", criterion_9),
        ("bootstrap sanity", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let number = k + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        match outcome {
            Ok(checks) => {
                let ok = checks.lines.iter().all(|(ok, _)| *ok);
                failed += usize::from(!ok);
                println!("criterion {number:>2} {}: {title} ({elapsed:.1?})", if ok { "PASS" } else { "FAIL" });
                for (ok, line) in &checks.lines {
                    println!("      {} {line}", if *ok { "ok  " } else { "FAIL" });
                }
            }
            Err(_) => {
                failed += 1;
                println!("criterion {number:>2} FAIL: {title} (panicked)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
