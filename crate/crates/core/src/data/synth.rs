use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result, Targets};
use crate::engine::Tensor;

/// Target functions for the approximation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SynthFunction {
    Sin,
    AbsSin,
    /// `1 / (1 + exp(-10 x))`
    StepSmooth,
    /// `x^3 - x`
    Poly3,
}

impl SynthFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Sin => x.sin(),
            Self::AbsSin => x.sin().abs(),
            Self::StepSmooth => crate::activations::sigmoid(10.0 * x),
            Self::Poly3 => x * x * x - x,
        }
    }
}

impl fmt::Display for SynthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sin => "sin",
            Self::AbsSin => "abs_sin",
            Self::StepSmooth => "step_smooth",
            Self::Poly3 => "poly3",
        })
    }
}

impl FromStr for SynthFunction {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Self::Sin),
            "abs_sin" => Ok(Self::AbsSin),
            "step_smooth" => Ok(Self::StepSmooth),
            "poly3" => Ok(Self::Poly3),
            _ => Err(DataError::UnknownFunction(s.to_string())),
        }
    }
}

impl TryFrom<String> for SynthFunction {
    type Error = DataError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SynthFunction> for String {
    fn from(f: SynthFunction) -> Self {
        f.to_string()
    }
}

/// `n` evenly spaced points on `[lo, hi]` (endpoints included) with targets
/// `g(x)` plus optional Gaussian noise drawn from `seed`.
pub fn synth_function(g: SynthFunction, lo: f64, hi: f64, n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if !(lo < hi) || n < 2 || !(noise_std >= 0.0) {
        return Err(DataError::InvalidArgument(format!(
            "synth_function: interval [{lo}, {hi}], n={n}, noise_std={noise_std}"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let mut ys: Vec<f64> = xs.iter().map(|&x| g.eval(x)).collect();
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        for y in &mut ys {
            *y += normal.sample(&mut rng);
        }
    }
    Dataset::new(
        Tensor::new(vec![n, 1], xs).expect("n values"),
        Targets::Values(Tensor::new(vec![n, 1], ys).expect("n values")),
    )
}

/// Geometric random walk `s[t+1] = s[t] * exp(drift - vol^2 / 2 + vol * e)`
/// with standard normal `e`, a stand-in for a daily price series.
pub fn random_walk(n: usize, start: f64, drift: f64, vol: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || !(start > 0.0) || !(vol >= 0.0) {
        return Err(DataError::InvalidArgument(format!(
            "random_walk: n={n}, start={start}, vol={vol}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(n);
    let mut s = start;
    out.push(s);
    for _ in 1..n {
        s *= (drift - 0.5 * vol * vol + vol * normal.sample(&mut rng)).exp();
        out.push(s);
    }
    Ok(out)
}
