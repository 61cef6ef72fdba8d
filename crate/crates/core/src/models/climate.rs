//! Reduced carbon-cycle and temperature recursion over 18 periods.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::data::{SampleMatrix, SensitivityDataset};
use crate::error::{Error, Result};

pub const INPUTS: [(&str, f64, f64); 9] = [
    ("phi11", 0.704, 1.056),
    ("phi23", 0.0056, 0.0084),
    ("c1", 0.0804, 0.1206),
    ("c3", 0.0704, 0.1056),
    ("c4", 0.02, 0.03),
    ("lambda", 2.94504, 4.41756),
    ("S", 2.48, 3.72),
    ("F_EX0", 0.4, 0.6),
    ("F_EX1", 0.8, 1.2),
];

const RAW_EMISSIONS: [f64; 18] = [
    35.74, 33.22, 35.26, 36.96, 38.28, 39.19, 39.67, 39.7, 39.29, 38.43, 37.12, 35.38, 33.22, 30.65, 27.71, 24.4,
    20.76, 16.82,
];

/// Emissions per period, in carbon units.
pub fn default_emissions() -> Vec<f64> {
    RAW_EMISSIONS.iter().map(|e| e / 3.666).collect()
}

/// Initial (M_AT, M_UO, M_LO, T_AT, T_OC).
pub const INITIAL_STATE: [f64; 5] = [851.0, 460.0, 1740.0, 0.85, 0.0068];

#[derive(Debug, Clone, PartialEq)]
pub struct ClimateConfig {
    pub emissions: Vec<f64>,
    pub initial: [f64; 5],
}

impl Default for ClimateConfig {
    fn default() -> Self {
        ClimateConfig { emissions: default_emissions(), initial: INITIAL_STATE }
    }
}

/// Atmospheric temperature trajectory, one value per emissions period.
pub fn simulate(inputs: &[f64], cfg: &ClimateConfig) -> Vec<f64> {
    let [phi11, phi23, c1, c3, c4, lambda, s, f_ex0, f_ex1] =
        <[f64; 9]>::try_from(inputs).expect("nine climate inputs");
    let phi12 = 1.0 - phi11;
    let phi21 = phi12 * 588.0 / 360.0;
    let phi22 = 1.0 - phi21 - phi23;
    let phi32 = phi23 * 360.0 / 1720.0;
    let phi33 = 1.0 - phi32;

    let [mut m_at, mut m_uo, mut m_lo, mut t_at, mut t_oc] = cfg.initial;
    let periods = cfg.emissions.len();
    let mut out = Vec::with_capacity(periods);
    out.push(t_at);
    for t in 1..periods {
        let e = cfg.emissions[t - 1];
        let m_at_next = phi11 * m_at + phi21 * m_uo + 5.0 * e;
        let m_uo_next = phi12 * m_at + phi22 * m_uo + phi32 * m_lo;
        let m_lo_next = phi23 * m_uo + phi33 * m_lo;
        let f_ex = f_ex0 + (f_ex1 - f_ex0) * (t - 1) as f64 / 17.0;
        let forcing = lambda * (m_at / 588.0).ln() / 2f64.ln() + f_ex;
        let t_at_next = t_at + c1 * (forcing - lambda * t_at / s - c3 * (t_at - t_oc));
        let t_oc_next = t_oc + c4 * (t_at - t_oc);
        out.push(t_at_next);
        m_at = m_at_next;
        m_uo = m_uo_next;
        m_lo = m_lo_next;
        t_at = t_at_next;
        t_oc = t_oc_next;
    }
    out
}

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

pub fn gen_climate(n: usize, seed: u64) -> Result<SensitivityDataset> {
    gen_climate_with(n, seed, &ClimateConfig::default())
}

/// Outputs are named `T_AT1`, `T_AT2`, ... by period.
pub fn gen_climate_with(n: usize, seed: u64, cfg: &ClimateConfig) -> Result<SensitivityDataset> {
    if n < 2 {
        return Err(Error::TooSmall { rows: n, cols: INPUTS.len() });
    }
    if cfg.emissions.is_empty() {
        return Err(Error::InvalidConfig("emissions vector is empty".into()));
    }
    let x = sample_inputs(n, seed)?;
    let runs: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| simulate(x.row(i).as_slice().expect("contiguous row"), cfg)).collect();
    let periods = cfg.emissions.len();
    let y = Array2::from_shape_fn((n, periods), |(i, t)| runs[i][t]);
    let y = SampleMatrix::new(y, (1..=periods).map(|t| format!("T_AT{t}")).collect())?;
    SensitivityDataset::new(x, y)
}
