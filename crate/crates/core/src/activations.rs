//! Closed-form APALU and the baseline activations it is compared against.
//!
//! APALU is piecewise:
//!
//! ```text
//! f(x) = a * (x + x * sigmoid(1.702 x))   for x >= 0
//! f(x) = b * (exp(x) - 1)                 for x < 0
//! ```
//!
//! with trainable gains `a, b > 0`. The function is continuous at the origin
//! but has a kink there unless `b == 1.5 a`: the right derivative is `1.5 a`,
//! the left derivative is `b`. `x == 0` belongs to the positive branch, and so
//! does its derivative.
//!
//! Everything here is a pure function of its arguments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficient of the sigmoid approximation of GELU embedded in APALU.
pub const GELU_SIGMOID_COEF: f64 = 1.702;

/// Smallest value an activation gain may take after an optimizer step.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

/// Supremum of `1 + s(u) + u s(u) (1 - s(u))` over `u >= 0`, reached at
/// `u ~= 2.3994`. The positive-branch slope of APALU never exceeds
/// `APALU_SLOPE_SUP * a`.
pub const APALU_SLOPE_SUP: f64 = 2.099_839_320_128_867;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActivationError {
    #[error("activation parameters must be finite and positive, got a={a}, b={b}")]
    InvalidParams { a: f64, b: f64 },
    #[error("activation input is NaN")]
    NanInput,
    #[error("unknown activation kind `{0}`")]
    UnknownKind(String),
    #[error("invalid hyperparameter for `{kind}`: {value}")]
    InvalidHyperparameter { kind: &'static str, value: String },
    #[error("APALU needs (a, b) parameters; use `apalu` / `apalu_grad` instead of the baseline API")]
    ApaluAsBaseline,
}

pub type Result<T> = std::result::Result<T, ActivationError>;

/// The trainable pair `(a, b)`. Both are finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ActivationParams {
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
}

impl TryFrom<RawParams> for ActivationParams {
    type Error = ActivationError;

    fn try_from(raw: RawParams) -> Result<Self> {
        ActivationParams::new(raw.a, raw.b)
    }
}

impl From<ActivationParams> for RawParams {
    fn from(p: ActivationParams) -> Self {
        RawParams { a: p.a, b: p.b }
    }
}

impl ActivationParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
            Ok(Self { a, b })
        } else {
            Err(ActivationError::InvalidParams { a, b })
        }
    }

    /// Clamps both gains to [`POSITIVITY_FLOOR`]. Non-finite inputs map to
    /// the floor as well, so the result always satisfies the invariants.
    pub fn projected(a: f64, b: f64) -> Self {
        let clamp = |v: f64| {
            if v.is_finite() {
                v.max(POSITIVITY_FLOOR)
            } else if v == f64::INFINITY {
                f64::MAX
            } else {
                POSITIVITY_FLOOR
            }
        };
        Self {
            a: clamp(a),
            b: clamp(b),
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Named initial gains used by the experiment presets.
    pub fn preset(name: &str) -> Option<Self> {
        let (a, b) = match name {
            "mnist" => (1.05, 1.20),
            "anomaly" | "regression" => (0.55, 0.065),
            "sign" => (1.01, 1.00),
            "stock" => (0.40, 1.00),
            _ => return None,
        };
        Some(Self { a, b })
    }
}

/// Partial derivatives of APALU at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationGrad {
    pub d_dx: f64,
    pub d_da: f64,
    pub d_db: f64,
}

/// Which nonlinearity a layer applies.
///
/// Parses from and prints as a compact string: `apalu`, `relu`,
/// `lrelu[:slope]`, `elu[:alpha]`, `gelu`, `gelu_sigmoid`, `tanh`, `sigmoid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationKind {
    Apalu,
    Relu,
    LeakyRelu { slope: f64 },
    Elu { alpha: f64 },
    GeluExact,
    GeluSigmoid,
    Tanh,
    Sigmoid,
}

impl ActivationKind {
    pub const LEAKY_RELU: Self = Self::LeakyRelu { slope: 0.1 };
    pub const ELU: Self = Self::Elu { alpha: 1.0 };

    /// The baselines plotted alongside APALU: GELU, ReLU, ELU(1), LReLU(0.1).
    pub fn figure_baselines() -> [Self; 4] {
        [Self::GeluExact, Self::Relu, Self::ELU, Self::LEAKY_RELU]
    }

    pub fn is_apalu(&self) -> bool {
        matches!(self, Self::Apalu)
    }

    /// Short stable name, used in file names and tables.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Apalu => f.write_str("apalu"),
            Self::Relu => f.write_str("relu"),
            Self::LeakyRelu { slope } if *slope == 0.1 => f.write_str("lrelu"),
            Self::LeakyRelu { slope } => write!(f, "lrelu:{slope}"),
            Self::Elu { alpha } if *alpha == 1.0 => f.write_str("elu"),
            Self::Elu { alpha } => write!(f, "elu:{alpha}"),
            Self::GeluExact => f.write_str("gelu"),
            Self::GeluSigmoid => f.write_str("gelu_sigmoid"),
            Self::Tanh => f.write_str("tanh"),
            Self::Sigmoid => f.write_str("sigmoid"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = ActivationError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let hyper = |kind: &'static str, default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ActivationError::InvalidHyperparameter {
                        kind,
                        value: v.to_string(),
                    }),
            }
        };
        let no_arg = |kind: Self| -> Result<Self> {
            match arg {
                None => Ok(kind),
                Some(_) => Err(ActivationError::UnknownKind(s.to_string())),
            }
        };
        match name {
            "apalu" => no_arg(Self::Apalu),
            "relu" => no_arg(Self::Relu),
            "lrelu" | "leaky_relu" => Ok(Self::LeakyRelu {
                slope: hyper("lrelu", 0.1)?,
            }),
            "elu" => {
                let alpha = hyper("elu", 1.0)?;
                if alpha <= 0.0 {
                    return Err(ActivationError::InvalidHyperparameter {
                        kind: "elu",
                        value: alpha.to_string(),
                    });
                }
                Ok(Self::Elu { alpha })
            }
            "gelu" | "gelu_exact" => no_arg(Self::GeluExact),
            "gelu_sigmoid" => no_arg(Self::GeluSigmoid),
            "tanh" => no_arg(Self::Tanh),
            "sigmoid" => no_arg(Self::Sigmoid),
            _ => Err(ActivationError::UnknownKind(s.to_string())),
        }
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = ActivationError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ActivationKind> for String {
    fn from(k: ActivationKind) -> Self {
        k.to_string()
    }
}

/// Logistic sigmoid, evaluated so that `exp` never sees a positive argument.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid'(z) = s(z) s(-z)`; avoids the cancellation in `s (1 - s)`.
#[inline]
fn sigmoid_slope(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

/// Standard normal CDF. The `erfc` form keeps relative accuracy in the left tail.
#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

// Unchecked kernels shared with the tensor engine. Callers validate inputs.

#[inline]
pub(crate) fn apalu_raw(x: f64, a: f64, b: f64) -> f64 {
    if x >= 0.0 {
        a * (x + x * sigmoid(GELU_SIGMOID_COEF * x))
    } else {
        b * x.exp_m1()
    }
}

#[inline]
pub(crate) fn apalu_grad_raw(x: f64, a: f64, b: f64) -> ActivationGrad {
    if x >= 0.0 {
        let u = GELU_SIGMOID_COEF * x;
        let s = sigmoid(u);
        ActivationGrad {
            d_dx: a * (1.0 + s + u * s * sigmoid(-u)),
            d_da: x * (1.0 + s),
            d_db: 0.0,
        }
    } else {
        let e = x.exp();
        ActivationGrad {
            d_dx: b * e,
            d_da: 0.0,
            d_db: x.exp_m1(),
        }
    }
}

#[inline]
pub(crate) fn baseline_raw(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Relu => x.max(0.0),
        ActivationKind::LeakyRelu { slope } => {
            if x >= 0.0 {
                x
            } else {
                slope * x
            }
        }
        ActivationKind::Elu { alpha } => {
            if x >= 0.0 {
                x
            } else {
                alpha * x.exp_m1()
            }
        }
        ActivationKind::GeluExact => x * normal_cdf(x),
        ActivationKind::GeluSigmoid => x * sigmoid(GELU_SIGMOID_COEF * x),
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Sigmoid => sigmoid(x),
        // Unit gains: the positive branch then carries an extra identity term.
        ActivationKind::Apalu => apalu_raw(x, 1.0, 1.0),
    }
}

#[inline]
pub(crate) fn baseline_grad_raw(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        // Kinks at 0 take the right-hand derivative.
        ActivationKind::Relu => {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ActivationKind::LeakyRelu { slope } => {
            if x >= 0.0 {
                1.0
            } else {
                slope
            }
        }
        ActivationKind::Elu { alpha } => {
            if x >= 0.0 {
                1.0
            } else {
                alpha * x.exp()
            }
        }
        ActivationKind::GeluExact => normal_cdf(x) + x * normal_pdf(x),
        ActivationKind::GeluSigmoid => {
            let u = GELU_SIGMOID_COEF * x;
            sigmoid(u) + u * sigmoid_slope(u)
        }
        ActivationKind::Tanh => {
            let c = x.cosh();
            if c.is_finite() {
                1.0 / (c * c)
            } else {
                0.0
            }
        }
        ActivationKind::Sigmoid => sigmoid_slope(x),
        ActivationKind::Apalu => apalu_grad_raw(x, 1.0, 1.0).d_dx,
    }
}

fn check_input(x: f64) -> Result<()> {
    if x.is_nan() {
        Err(ActivationError::NanInput)
    } else {
        Ok(())
    }
}

/// APALU at `x`.
pub fn apalu(x: f64, p: ActivationParams) -> Result<f64> {
    check_input(x)?;
    Ok(apalu_raw(x, p.a, p.b))
}

/// All three partials of APALU at `x`. At `x == 0` the positive branch applies.
pub fn apalu_grad(x: f64, p: ActivationParams) -> Result<ActivationGrad> {
    check_input(x)?;
    Ok(apalu_grad_raw(x, p.a, p.b))
}

pub fn baseline(kind: ActivationKind, x: f64) -> Result<f64> {
    check_input(x)?;
    if kind.is_apalu() {
        return Err(ActivationError::ApaluAsBaseline);
    }
    Ok(baseline_raw(kind, x))
}

pub fn baseline_grad(kind: ActivationKind, x: f64) -> Result<f64> {
    check_input(x)?;
    if kind.is_apalu() {
        return Err(ActivationError::ApaluAsBaseline);
    }
    Ok(baseline_grad_raw(kind, x))
}

/// Extremes of `d apalu / dx` over a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeBounds {
    pub sup: f64,
    pub inf: f64,
}

/// Scans `d apalu / dx` over `n` evenly spaced points on `[lo, hi]`, both
/// endpoints included.
pub fn derivative_bound_scan(
    p: ActivationParams,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<DerivativeBounds> {
    check_input(lo)?;
    check_input(hi)?;
    if !(lo < hi) || n < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(ActivationError::InvalidHyperparameter {
            kind: "derivative_bound_scan",
            value: format!("lo={lo}, hi={hi}, n={n}"),
        });
    }
    let step = (hi - lo) / (n - 1) as f64;
    let slope = |i: usize| {
        let x = if i == n - 1 { hi } else { lo + i as f64 * step };
        apalu_grad_raw(x, p.a, p.b).d_dx
    };
    let (sup, inf) = crate::par::map_reduce(
        n,
        slope,
        (f64::NEG_INFINITY, f64::INFINITY),
        |(s, i), d| (s.max(d), i.min(d)),
        |(s1, i1), (s2, i2)| (s1.max(s2), i1.min(i2)),
    );
    Ok(DerivativeBounds { sup, inf })
}
