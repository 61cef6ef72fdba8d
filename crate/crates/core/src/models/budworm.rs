//! Spruce budworm and forest model: budworm density B, branch size S and
//! foliage energy reserve E.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::data::{SampleMatrix, SensitivityDataset};
use crate::error::{Error, Result};

/// Input names and uniform ranges.
pub const INPUTS: [(&str, f64, f64); 10] = [
    ("r_b", 1.52, 1.6),
    ("K", 100.0, 355.0),
    ("beta", 20000.0, 43200.0),
    ("alpha", 1.0, 2.0),
    ("r_s", 0.095, 0.15),
    ("K_s", 24000.0, 25440.0),
    ("K_e", 1.0, 1.2),
    ("r_e", 0.92, 1.0),
    ("P", 0.0015, 0.00195),
    ("T_e", 0.7, 0.9),
];

/// (B, S, E) at the first time of the grid.
pub const INITIAL_STATE: [f64; 3] = [0.1, 7.0, 1.0];

/// Form of the predation half-saturation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Predation {
    /// `beta B^2 / ((alpha^S)^2 + B^2)`
    #[default]
    PowerOfS,
    /// `beta B^2 / ((alpha S)^2 + B^2)`
    ProductWithS,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Dormand-Prince 5(4) with error control; handles the stiff start of
    /// the B equation for small `alpha`.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudwormConfig {
    pub times: Vec<f64>,
    pub integrator: Integrator,
    pub predation: Predation,
    pub initial: [f64; 3],
}

impl Default for BudwormConfig {
    fn default() -> Self {
        BudwormConfig {
            times: default_times(),
            integrator: Integrator::default(),
            predation: Predation::default(),
            initial: INITIAL_STATE,
        }
    }
}

/// Months 0, 1, ..., 150.
pub fn default_times() -> Vec<f64> {
    (0..=150).map(f64::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudwormOutput {
    B,
    S,
    E,
}

/// Inputs and the three trajectories, one column per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct BudwormData {
    pub x: SampleMatrix,
    pub b: SampleMatrix,
    pub s: SampleMatrix,
    pub e: SampleMatrix,
}

impl BudwormData {
    pub fn dataset(&self, output: BudwormOutput) -> Result<SensitivityDataset> {
        let y = match output {
            BudwormOutput::B => &self.b,
            BudwormOutput::S => &self.s,
            BudwormOutput::E => &self.e,
        };
        SensitivityDataset::new(self.x.clone(), y.clone())
    }

    /// All three trajectories side by side (B, then S, then E).
    pub fn combined(&self) -> Result<SensitivityDataset> {
        let y = ndarray::concatenate(ndarray::Axis(1), &[self.b.values(), self.s.values(), self.e.values()])
            .expect("equal row counts");
        let names = [&self.b, &self.s, &self.e].iter().flat_map(|m| m.names().iter().cloned()).collect();
        SensitivityDataset::new(self.x.clone(), SampleMatrix::new(y, names)?)
    }
}

#[derive(Debug, Clone, Copy)]
struct Params {
    r_b: f64,
    k: f64,
    beta: f64,
    alpha: f64,
    r_s: f64,
    k_s: f64,
    k_e: f64,
    r_e: f64,
    p: f64,
    t_e: f64,
    predation: Predation,
}

impl Params {
    fn new(v: &[f64], predation: Predation) -> Self {
        Params {
            r_b: v[0],
            k: v[1],
            beta: v[2],
            alpha: v[3],
            r_s: v[4],
            k_s: v[5],
            k_e: v[6],
            r_e: v[7],
            p: v[8],
            t_e: v[9],
            predation,
        }
    }

    fn rhs(&self, y: [f64; 3]) -> [f64; 3] {
        let [b, s, e] = y;
        let half = match self.predation {
            Predation::PowerOfS => self.alpha.powf(s),
            Predation::ProductWithS => self.alpha * s,
        };
        let te2 = self.t_e * self.t_e;
        let e2 = e * e;
        let db = self.r_b * b * (1.0 - b / (self.k * s) * (te2 + e2) / e2) - self.beta * b * b / (half * half + b * b);
        let ds = self.r_s * s * (1.0 - (s * self.k_e) / (e * self.k_s));
        let de = self.r_e * e * (1.0 - e / self.k_e) - self.p * (b / s) * e2 / (te2 + e2);
        [db, ds, de]
    }
}

fn axpy(y: [f64; 3], h: f64, terms: &[(f64, &[f64; 3])]) -> [f64; 3] {
    let mut out = y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn rk4_step(p: &Params, y: [f64; 3], h: f64) -> [f64; 3] {
    let k1 = p.rhs(y);
    let k2 = p.rhs(axpy(y, h / 2.0, &[(1.0, &k1)]));
    let k3 = p.rhs(axpy(y, h / 2.0, &[(1.0, &k2)]));
    let k4 = p.rhs(axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)])
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B5: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine(y: [f64; 3], h: f64, coefs: &[f64], ks: &[[f64; 3]]) -> [f64; 3] {
    let mut out = y;
    for (c, k) in coefs.iter().zip(ks) {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Advances `y` from `t0` to `t1` with error-controlled Dormand-Prince steps.
/// `h` carries the step size between calls; `k1` is the derivative at `y`.
fn dopri_segment(
    p: &Params,
    mut y: [f64; 3],
    t0: f64,
    t1: f64,
    h: &mut f64,
    k1: &mut [f64; 3],
    rtol: f64,
    atol: f64,
    row: usize,
) -> Result<[f64; 3]> {
    let mut t = t0;
    while t < t1 {
        let last = *h >= t1 - t;
        let step = if last { t1 - t } else { *h };
        let mut ks = [[0.0; 3]; 7];
        ks[0] = *k1;
        ks[1] = p.rhs(combine(y, step, &A2, &ks[..1]));
        ks[2] = p.rhs(combine(y, step, &A3, &ks[..2]));
        ks[3] = p.rhs(combine(y, step, &A4, &ks[..3]));
        ks[4] = p.rhs(combine(y, step, &A5, &ks[..4]));
        ks[5] = p.rhs(combine(y, step, &A6, &ks[..5]));
        let next = combine(y, step, &B5, &ks[..6]);
        ks[6] = p.rhs(next);

        let mut err = 0.0;
        for i in 0..3 {
            let e: f64 = ERR.iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>() * step;
            let scale = atol + rtol * y[i].abs().max(next[i].abs());
            err += (e / scale).powi(2);
        }
        let err = (err / 3.0).sqrt();

        if err.is_finite() && err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = next;
            *k1 = ks[6];
            if y.iter().chain(k1.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { row, time: t });
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || step == *h {
                *h = step * grow;
            }
        } else {
            let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            *h = step * shrink;
            if *h < 1e-12 * t1.abs().max(1.0) {
                return Err(Error::NonFiniteState { row, time: t });
            }
        }
    }
    Ok(y)
}

/// Trajectory of one input row, sampled at `cfg.times`.
pub fn simulate(inputs: &[f64], cfg: &BudwormConfig, row: usize) -> Result<Vec<[f64; 3]>> {
    if inputs.len() != INPUTS.len() {
        return Err(Error::DimensionMismatch(format!("expected {} inputs, got {}", INPUTS.len(), inputs.len())));
    }
    let p = Params::new(inputs, cfg.predation);
    let mut y = cfg.initial;
    let mut out = Vec::with_capacity(cfg.times.len());
    out.push(y);
    match cfg.integrator {
        Integrator::Rk4 { step } => {
            for w in cfg.times.windows(2) {
                let span = w[1] - w[0];
                let steps = (span / step).round().max(1.0) as usize;
                let h = span / steps as f64;
                for s in 0..steps {
                    y = rk4_step(&p, y, h);
                    if y.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFiniteState { row, time: w[0] + (s + 1) as f64 * h });
                    }
                }
                out.push(y);
            }
        }
        Integrator::Adaptive { rtol, atol } => {
            let mut h = 1e-3;
            let mut k1 = p.rhs(y);
            for w in cfg.times.windows(2) {
                y = dopri_segment(&p, y, w[0], w[1], &mut h, &mut k1, rtol, atol, row)?;
                out.push(y);
            }
        }
    }
    Ok(out)
}

fn check_config(n: usize, cfg: &BudwormConfig) -> Result<()> {
    if n < 2 {
        return Err(Error::TooSmall { rows: n, cols: INPUTS.len() });
    }
    if cfg.times.is_empty() || cfg.times.windows(2).any(|w| !(w[1] > w[0])) || cfg.times.iter().any(|t| !t.is_finite())
    {
        return Err(Error::InvalidConfig("time grid must be non-empty and strictly increasing".into()));
    }
    match cfg.integrator {
        Integrator::Rk4 { step } if !(step > 0.0 && step.is_finite()) => {
            Err(Error::InvalidConfig(format!("RK4 step must be > 0 (got {step})")))
        }
        Integrator::Adaptive { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
            Err(Error::InvalidConfig("integrator tolerances must be > 0".into()))
        }
        _ => Ok(()),
    }
}

/// Uniform input sample, one column at a time.
pub fn sample_inputs(n: usize, seed: u64) -> Result<SampleMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, INPUTS.len()));
    for (j, &(_, lo, hi)) in INPUTS.iter().enumerate() {
        let u = Uniform::new(lo, hi).expect("valid range");
        for i in 0..n {
            x[[i, j]] = u.sample(&mut rng);
        }
    }
    SampleMatrix::new(x, INPUTS.iter().map(|(name, _, _)| name.to_string()).collect())
}

pub fn gen_budworm(n: usize, seed: u64, times: &[f64]) -> Result<BudwormData> {
    gen_budworm_with(n, seed, &BudwormConfig { times: times.to_vec(), ..BudwormConfig::default() })
}

pub fn gen_budworm_with(n: usize, seed: u64, cfg: &BudwormConfig) -> Result<BudwormData> {
    check_config(n, cfg)?;
    let x = sample_inputs(n, seed)?;
    let runs: Vec<Result<Vec<[f64; 3]>>> =
        (0..n).into_par_iter().map(|i| simulate(x.row(i).as_slice().expect("contiguous row"), cfg, i)).collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let t = cfg.times.len();
    let block = |c: usize, prefix: &str| {
        let values = Array2::from_shape_fn((n, t), |(i, j)| runs[i][j][c]);
        SampleMatrix::new(values, cfg.times.iter().map(|t| format!("{prefix}{t}")).collect())
    };
    Ok(BudwormData { b: block(0, "B")?, s: block(1, "S")?, e: block(2, "E")?, x })
}
