//! Verification suites: analytic gradients against a finite-difference
//! oracle, range and shape properties of APALU, derivative bounds, and a
//! function-fitting demo. Failures are reported, never thrown.

pub mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::activations::{
    apalu_grad, apalu_raw, baseline_grad, derivative_bound_scan, ActivationKind, ActivationParams, APALU_SLOPE_SUP,
};
use crate::engine::{gradcheck, GradcheckReport, Tape, Tensor, Var};
use crate::nn::{self, Model, ModelSpec, OutputHead};
use crate::runner::{self, ExperimentConfig, Task};
use oracle::Partial;

/// One verdict: a measured value against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Human-readable bound, e.g. `< 1e-6`.
    pub threshold: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, measured: f64, threshold: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured,
            threshold: threshold.into(),
            detail: detail.into(),
        }
    }

    /// `measured < limit`.
    fn below(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        Self::new(name, measured < limit, measured, format!("< {limit:e}"), detail)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e} (want {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Properties,
    Approximation,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gradients" => Ok(Self::Gradients),
            "properties" => Ok(Self::Properties),
            "approximation" => Ok(Self::Approximation),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown suite `{s}` (gradients, properties, approximation, all)")),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

/// The activation the property suite inspects. Tests swap in deliberately
/// broken versions.
#[derive(Clone, Copy)]
pub struct Subject {
    pub name: &'static str,
    pub eval: fn(f64, f64, f64) -> f64,
}

impl Subject {
    pub fn apalu() -> Self {
        Self {
            name: "apalu",
            eval: apalu_raw,
        }
    }
}

pub fn run(suite: Suite) -> VerifyReport {
    run_with(suite, &Subject::apalu())
}

pub fn run_with(suite: Suite, subject: &Subject) -> VerifyReport {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Gradients | Suite::All) {
        checks.extend(gradient_checks());
    }
    if matches!(suite, Suite::Properties | Suite::All) {
        checks.extend(property_checks(subject));
        checks.extend(bound_checks());
    }
    if matches!(suite, Suite::Approximation | Suite::All) {
        checks.extend(approximation_checks());
    }
    VerifyReport { checks }
}

/// Radical inverse of `i` in `base`: the `i`-th Halton coordinate.
pub fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `n` quasi-random `(x, a, b)` with `x` in `[-10, 10]` and `a, b` in
/// `(0, 2]`, from Halton bases 2, 3, 5.
pub fn gradient_points(n: usize) -> Vec<(f64, f64, f64)> {
    (1..=n as u64)
        .map(|i| {
            let x = -10.0 + 20.0 * halton(i, 2);
            let a = 2.0 * (1.0 - halton(i, 3));
            let b = 2.0 * (1.0 - halton(i, 5));
            (x, a, b)
        })
        .collect()
}

pub const GRADIENT_POINTS: usize = 1000;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const MODEL_GRADCHECK_TOL: f64 = 1e-5;

fn worst<I: IntoIterator<Item = (f64, f64, String)>>(items: I) -> (f64, String) {
    items
        .into_iter()
        .map(|(an, num, at)| (crate::engine::relative_error(an, num), at))
        .fold((0.0, "none".to_string()), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// APALU partials and every baseline derivative against the oracle, then
/// end-to-end gradchecks of small models.
pub fn gradient_checks() -> Vec<Check> {
    let points = gradient_points(GRADIENT_POINTS);
    let oracle_kind = if oracle::HIGH_PRECISION { "mpfr" } else { "f64" };
    let mut checks = Vec::new();
    for (which, label) in [(Partial::X, "d/dx"), (Partial::A, "d/da"), (Partial::B, "d/db")] {
        let (err, at) = worst(points.iter().map(|&(x, a, b)| {
            let g = apalu_grad(x, ActivationParams::new(a, b).expect("positive")).expect("finite");
            let an = match which {
                Partial::X => g.d_dx,
                Partial::A => g.d_da,
                Partial::B => g.d_db,
            };
            (an, oracle::apalu_partial(x, a, b, which), format!("x={x}, a={a}, b={b}"))
        }));
        checks.push(Check::below(
            &format!("gradients/apalu {label}"),
            err,
            GRADIENT_REL_TOL,
            format!("{} points, {oracle_kind} oracle, worst at {at}", points.len()),
        ));
    }
    let kinds = [
        ActivationKind::Relu,
        ActivationKind::LEAKY_RELU,
        ActivationKind::ELU,
        ActivationKind::GeluExact,
        ActivationKind::GeluSigmoid,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
    ];
    for kind in kinds {
        let (err, at) = worst(points.iter().map(|&(x, _, _)| {
            let an = baseline_grad(kind, x).expect("not apalu");
            (an, oracle::baseline_derivative(kind, x), format!("x={x}"))
        }));
        checks.push(Check::below(
            &format!("gradients/{kind} d/dx"),
            err,
            GRADIENT_REL_TOL,
            format!("{} points, {oracle_kind} oracle, worst at {at}", points.len()),
        ));
    }
    for (name, report) in [("mlp", mlp_gradcheck()), ("gru", gru_gradcheck())] {
        let (err, detail) = match report {
            Ok(r) => (r.max_rel_error, format!("{} parameters, worst index {}", r.analytic.len(), r.worst_index)),
            Err(e) => (f64::INFINITY, e),
        };
        checks.push(Check::below(&format!("gradients/{name} end-to-end"), err, MODEL_GRADCHECK_TOL, detail));
    }
    checks
}

/// Gradcheck of a whole model with respect to all its parameters, packed
/// into one vector that is sliced back into tensors on the tape.
pub fn model_gradcheck(
    model: &Model,
    x: &Tensor,
    loss: impl Fn(&mut Tape, Var) -> crate::engine::Result<Var>,
    h: f64,
) -> Result<GradcheckReport, String> {
    let entries = model.params().entries();
    let theta: Vec<f64> = entries.iter().flat_map(|e| e.value.data().iter().copied()).collect();
    let theta = Tensor::vector(theta);
    let f = |tape: &mut Tape, t: Var| -> crate::engine::Result<Var> {
        let mut vars = Vec::with_capacity(entries.len());
        let mut offset = 0;
        for e in entries {
            let n = e.value.len();
            let s = tape.slice(t, 0, offset, n)?;
            vars.push(tape.reshape(s, e.value.shape())?);
            offset += n;
        }
        let xv = tape.constant(x.clone())?;
        let out = model.forward(tape, &vars, xv).map_err(|e| match e {
            nn::NnError::Engine(e) => e,
            other => crate::engine::EngineError::InvalidArgument {
                op: "forward",
                detail: other.to_string(),
            },
        })?;
        loss(tape, out)
    };
    gradcheck(f, &theta, h).map_err(|e| e.to_string())
}

fn jitter(model: &mut Model, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let role = model.params().get(id).expect("listed").role;
        if role == nn::ParamRole::Bias {
            for v in model.params_mut().value_mut(id).expect("listed").data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
}

fn random_input(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).expect("shape")
}

/// Dense APALU layer plus softmax head, 3 -> 5 -> 3, cross-entropy on 6 rows.
pub fn mlp_gradcheck() -> Result<GradcheckReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = ActivationParams::new(0.8, 1.3).expect("positive");
    let spec = ModelSpec::mlp(&[3, 5], 3, ActivationKind::Apalu, &[p], OutputHead::SoftmaxClassifier).map_err(|e| e.to_string())?;
    let mut model = Model::new(spec, &mut rng).map_err(|e| e.to_string())?;
    jitter(&mut model, &mut rng);
    let x = random_input(&mut rng, &[6, 3]);
    let labels = [0usize, 2, 1, 1, 0, 2];
    model_gradcheck(&model, &x, |tape, out| tape.softmax_cross_entropy(out, &labels), 1e-6)
}

/// GRU regressor with an APALU candidate, 4 steps of 2 features, MSE.
pub fn gru_gradcheck() -> Result<GradcheckReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let p = ActivationParams::new(0.6, 0.9).expect("positive");
    let spec = ModelSpec::gru_regressor(2, 3, ActivationKind::Apalu, Some(p)).map_err(|e| e.to_string())?;
    let mut model = Model::new(spec, &mut rng).map_err(|e| e.to_string())?;
    jitter(&mut model, &mut rng);
    let x = random_input(&mut rng, &[5, 4, 2]);
    let y = random_input(&mut rng, &[5, 1]);
    model_gradcheck(
        &model,
        &x,
        |tape, out| {
            let t = tape.constant(y.clone())?;
            let d = tape.sub(out, t)?;
            let sq = tape.mul(d, d)?;
            tape.mean(sq)
        },
        1e-6,
    )
}

pub const PROPERTY_SAMPLES: usize = 1_000_000;
const PROPERTY_PAIRS: usize = 20;
const PROPERTY_RANGE: f64 = 30.0;

/// Range, monotonicity and continuity of `subject` over random `x` in
/// `[-30, 30]` and 20 `(a, b)` pairs in `(0, 2]`.
///
/// Strict increase is asserted wherever the true rise `f'(x) dx` exceeds
/// four ulps of `f`; below that f64 cannot represent the difference and
/// only non-decrease is required.
pub fn property_checks(subject: &Subject) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let per_pair = PROPERTY_SAMPLES / PROPERTY_PAIRS;
    let mut sign_bad = 0usize;
    let mut floor_bad = 0usize;
    let mut decreasing = 0usize;
    let mut flat = 0usize;
    let mut strict_pairs = 0usize;
    let mut origin_worst = 0.0f64;
    let mut floor_margin = f64::INFINITY;
    let mut xs = vec![0.0; per_pair];
    for _ in 0..PROPERTY_PAIRS {
        let a = 2.0 * (1.0 - rng.random::<f64>());
        let b = 2.0 * (1.0 - rng.random::<f64>());
        let f = |x: f64| (subject.eval)(x, a, b);
        for x in xs.iter_mut() {
            *x = rng.random_range(-PROPERTY_RANGE..PROPERTY_RANGE);
        }
        xs.sort_by(f64::total_cmp);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for (&x, &y) in xs.iter().zip(&ys) {
            let sign_ok = (x > 0.0 && y > 0.0) || (x < 0.0 && y < 0.0) || x == 0.0;
            sign_bad += usize::from(!sign_ok);
            floor_bad += usize::from(!(y > -b));
            floor_margin = floor_margin.min((y + b) / b);
        }
        for i in 1..xs.len() {
            let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
            if x1 <= x0 {
                continue;
            }
            if y1 < y0 {
                decreasing += 1;
            }
            let slope = crate::activations::apalu_grad_raw(x0, a, b).d_dx.min(crate::activations::apalu_grad_raw(x1, a, b).d_dx);
            let ulp = f64::EPSILON * y0.abs().max(y1.abs()).max(f64::MIN_POSITIVE);
            if slope * (x1 - x0) > 4.0 * ulp {
                strict_pairs += 1;
                flat += usize::from(y1 <= y0);
            }
        }
        for x in [1e-6, -1e-6] {
            origin_worst = origin_worst.max(f(x).abs() / (1e-5 * (a + b)));
        }
    }
    let name = subject.name;
    let n = PROPERTY_PAIRS * per_pair;
    vec![
        Check::new(format!("properties/{name} range sign(f(x)) = sign(x)"), sign_bad == 0, sign_bad as f64, "0 violations", format!("{n} samples")),
        Check::new(
            format!("properties/{name} range f(x) > -b"),
            floor_bad == 0,
            floor_bad as f64,
            "0 violations",
            format!("{n} samples, min (f + b) / b = {floor_margin:e}"),
        ),
        Check::new(format!("properties/{name} monotone non-decreasing"), decreasing == 0, decreasing as f64, "0 violations", format!("{n} sorted samples")),
        Check::new(
            format!("properties/{name} strictly increasing"),
            flat == 0,
            flat as f64,
            "0 violations",
            format!("{strict_pairs} resolvable pairs"),
        ),
        Check::new(
            format!("properties/{name} continuity |f(+-1e-6)| < 1e-5 (a + b)"),
            origin_worst < 1.0,
            origin_worst,
            "< 1 (ratio to bound)",
            String::new(),
        ),
    ]
}

pub const BOUND_SCAN_POINTS: usize = 100_000;

/// Expected sup of `d apalu / dx` on a grid straddling 0: the positive
/// branch peak or, when larger, `b` (approached from the left).
pub fn expected_slope_sup(p: ActivationParams) -> f64 {
    (APALU_SLOPE_SUP * p.a()).max(p.b())
}

/// Sup and inf of the slope over `[-20, 20]` for the presets and a Halton
/// sample of `(a, b)`. The sup must lie in `[2.05 a, 2.11 a]` when the
/// positive peak dominates and in `[0.99 b, b]` otherwise; the inf must be
/// at least `0.99 min(b e^-20, a)`.
pub fn bound_checks() -> Vec<Check> {
    let mut params: Vec<ActivationParams> = ["mnist", "regression", "sign", "stock"]
        .iter()
        .filter_map(|n| ActivationParams::preset(n))
        .collect();
    params.extend(gradient_points(20).into_iter().map(|(_, a, b)| ActivationParams::new(a, b).expect("positive")));
    let mut sup_bad = Vec::new();
    let mut inf_bad = Vec::new();
    let mut sup_dev = 0.0f64;
    let mut inf_ratio = f64::INFINITY;
    for p in &params {
        let (a, b) = (p.a(), p.b());
        let bounds = derivative_bound_scan(*p, -20.0, 20.0, BOUND_SCAN_POINTS).expect("valid scan");
        let sup_ok = if APALU_SLOPE_SUP * a >= b {
            (2.05 * a..=2.11 * a).contains(&bounds.sup)
        } else {
            (0.99 * b..=b).contains(&bounds.sup)
        };
        sup_dev = sup_dev.max((bounds.sup / expected_slope_sup(*p) - 1.0).abs());
        let floor = (b * (-20f64).exp()).min(a) * 0.99;
        inf_ratio = inf_ratio.min(bounds.inf / floor);
        if !sup_ok {
            sup_bad.push(format!("a={a}, b={b}: sup {}", bounds.sup));
        }
        if !(bounds.inf >= floor && bounds.inf > 0.0) {
            inf_bad.push(format!("a={a}, b={b}: inf {}", bounds.inf));
        }
    }
    let detail = |bad: &[String]| {
        if bad.is_empty() {
            format!("{} parameter pairs, {BOUND_SCAN_POINTS} grid points", params.len())
        } else {
            bad.join("; ")
        }
    };
    vec![
        Check::new(
            "bounds/sup d/dx",
            sup_bad.is_empty(),
            sup_dev,
            "in band; measured is max |sup / max(2.0998 a, b) - 1|",
            detail(&sup_bad),
        ),
        Check::new(
            "bounds/inf d/dx",
            inf_bad.is_empty(),
            inf_ratio,
            ">= 1 (ratio to 0.99 min(b e^-20, a))",
            detail(&inf_bad),
        ),
    ]
}

pub const FIT_MSE: f64 = 1e-3;

/// The sin fitting protocol: width-32 APALU layer, Adam 1e-3, 512 grid
/// points on `[-3, 3]`, 2000 epochs, seeds 0..5.
pub fn sin_fit_config() -> ExperimentConfig {
    ExperimentConfig::preset(Task::FunctionFit)
}

pub fn approximation_checks() -> Vec<Check> {
    let cfg = sin_fit_config();
    let started = Instant::now();
    match runner::run_experiment(&cfg) {
        Ok(reports) => {
            let mses: Vec<f64> = reports.iter().map(|r| r.train_mse.unwrap_or(f64::INFINITY)).collect();
            let hits = mses.iter().filter(|&&m| m < FIT_MSE).count();
            let need = reports.len() - reports.len() / 5;
            vec![Check::new(
                "approximation/sin fit train MSE < 1e-3",
                hits >= need,
                hits as f64,
                format!(">= {need} of {} seeds", reports.len()),
                format!("MSE per seed [{}], {:.1}s", mses.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(", "), started.elapsed().as_secs_f64()),
            )]
        }
        Err(e) => vec![Check::new("approximation/sin fit", false, f64::NAN, "run completes", e.to_string())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_prefix() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
        let pts = gradient_points(1000);
        assert!(pts.iter().all(|&(x, a, b)| (-10.0..=10.0).contains(&x) && a > 0.0 && a <= 2.0 && b > 0.0 && b <= 2.0));
    }

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn negative_b_breaks_the_range_check() {
        let broken = Subject {
            name: "broken",
            eval: |x, a, b| apalu_raw(x, a, -b),
        };
        let report = run_with(Suite::Properties, &broken);
        assert!(!report.passed());
        assert!(report.failures().any(|c| c.name.contains("range")));
    }
}
