use super::{EngineError, ParamId, Result, Tape, Tensor, Var};

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Relative error with the denominator floored at `1e-12`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    (analytic - numeric).abs() / denom
}

/// Checks the gradient of the scalar function `f` at `point`.
///
/// `f` receives a fresh tape and the point registered on it; it must return
/// a single-element node. Each coordinate is perturbed by `±h` for the
/// central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn gradcheck<F>(f: F, point: &Tensor, h: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(EngineError::InvalidArgument {
            op: "gradcheck",
            detail: format!("step h = {h}"),
        });
    }
    let id = ParamId(0);
    let mut tape = Tape::new();
    let x = tape.param(id, point.clone())?;
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let analytic = grads
        .get(id)
        .map(|g| g.data().to_vec())
        .unwrap_or_else(|| vec![0.0; point.len()]);

    let eval = |p: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(p)?;
        let y = f(&mut tape, x)?;
        tape.value(y).item()
    };

    let mut numeric = Vec::with_capacity(point.len());
    let mut max_rel_error = 0.0;
    let mut worst_index = 0;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += h;
        let mut minus = point.clone();
        minus.data_mut()[i] -= h;
        let d = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let err = relative_error(analytic[i], d);
        if err > max_rel_error {
            max_rel_error = err;
            worst_index = i;
        }
        numeric.push(d);
    }
    Ok(GradcheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
    })
}
