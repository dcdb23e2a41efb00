//! Reference derivatives by finite differences, independent of the analytic
//! formulas in `activations`.
//!
//! With the `mpfr` feature the functions are re-implemented in 256-bit MPFR
//! arithmetic and differenced with a step of `2^-90`, so truncation and
//! rounding error both sit far below `1e-20` relative. Without it, a
//! Richardson-extrapolated f64 central difference is used; that is accurate
//! to roughly `1e-9` and degrades where the derivative is tiny.

use crate::activations::ActivationKind;

/// Which partial derivative of APALU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partial {
    X,
    A,
    B,
}

/// True when the MPFR oracle is compiled in.
pub const HIGH_PRECISION: bool = cfg!(feature = "mpfr");

/// `d apalu / d(which)` at `(x, a, b)`. At `x == 0` the one-sided difference
/// from the right is used, matching the right-hand derivative convention.
pub fn apalu_partial(x: f64, a: f64, b: f64, which: Partial) -> f64 {
    imp::apalu_partial(x, a, b, which)
}

/// `d g / dx` for a fixed nonlinearity `g`, same conventions.
pub fn baseline_derivative(kind: ActivationKind, x: f64) -> f64 {
    imp::baseline_derivative(kind, x)
}

#[cfg(feature = "mpfr")]
mod imp {
    use rug::Float;

    use super::Partial;
    use crate::activations::{ActivationKind, GELU_SIGMOID_COEF};

    const PREC: u32 = 256;
    const STEP_EXP: i32 = -90;

    fn mp(x: f64) -> Float {
        Float::with_val(PREC, x)
    }

    fn sigmoid(z: &Float) -> Float {
        let e = Float::with_val(PREC, -z).exp();
        Float::with_val(PREC, 1) / (e + 1u32)
    }

    fn apalu(x: &Float, a: &Float, b: &Float) -> Float {
        if *x >= 0 {
            let u = Float::with_val(PREC, x * mp(GELU_SIGMOID_COEF));
            let inner = Float::with_val(PREC, x * sigmoid(&u)) + x;
            inner * a
        } else {
            x.clone().exp_m1() * b
        }
    }

    fn baseline(kind: ActivationKind, x: &Float) -> Float {
        let pos = *x >= 0;
        match kind {
            ActivationKind::Relu => {
                if pos {
                    x.clone()
                } else {
                    mp(0.0)
                }
            }
            ActivationKind::LeakyRelu { slope } => {
                if pos {
                    x.clone()
                } else {
                    x.clone() * mp(slope)
                }
            }
            ActivationKind::Elu { alpha } => {
                if pos {
                    x.clone()
                } else {
                    x.clone().exp_m1() * mp(alpha)
                }
            }
            ActivationKind::GeluExact => {
                let z = Float::with_val(PREC, -x) / Float::with_val(PREC, 2u32).sqrt();
                z.erfc() * x / 2u32
            }
            ActivationKind::GeluSigmoid => {
                let u = Float::with_val(PREC, x * mp(GELU_SIGMOID_COEF));
                sigmoid(&u) * x
            }
            ActivationKind::Tanh => x.clone().tanh(),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Apalu => apalu(x, &mp(1.0), &mp(1.0)),
        }
    }

    fn derivative(f: impl Fn(&Float) -> Float, at: f64, one_sided: bool) -> f64 {
        let h = Float::with_val(PREC, Float::u_exp(1, STEP_EXP));
        let t = mp(at);
        let up = f(&Float::with_val(PREC, &t + &h));
        let d = if one_sided {
            (up - f(&t)) / &h
        } else {
            let down = f(&Float::with_val(PREC, &t - &h));
            (up - down) / (h * 2u32)
        };
        d.to_f64()
    }

    pub fn apalu_partial(x: f64, a: f64, b: f64, which: Partial) -> f64 {
        let (xm, am, bm) = (mp(x), mp(a), mp(b));
        match which {
            Partial::X => derivative(|t| apalu(t, &am, &bm), x, x == 0.0),
            Partial::A => derivative(|t| apalu(&xm, t, &bm), a, false),
            Partial::B => derivative(|t| apalu(&xm, &am, t), b, false),
        }
    }

    pub fn baseline_derivative(kind: ActivationKind, x: f64) -> f64 {
        derivative(|t| baseline(kind, t), x, x == 0.0)
    }
}

#[cfg(not(feature = "mpfr"))]
mod imp {
    use super::Partial;
    use crate::activations::{apalu_raw, baseline_raw, ActivationKind};

    /// Two central differences at `h` and `h / 2`, combined to cancel the
    /// `h^2` error term.
    fn derivative(f: impl Fn(f64) -> f64, at: f64, one_sided: bool) -> f64 {
        let h = 1e-3 * at.abs().max(1.0);
        let d = |h: f64| {
            if one_sided {
                // Second-order forward difference.
                (-3.0 * f(at) + 4.0 * f(at + h) - f(at + 2.0 * h)) / (2.0 * h)
            } else {
                (f(at + h) - f(at - h)) / (2.0 * h)
            }
        };
        let (d1, d2) = (d(h), d(h / 2.0));
        if one_sided {
            (8.0 * d2 - 2.0 * d1) / 6.0
        } else {
            (4.0 * d2 - d1) / 3.0
        }
    }

    pub fn apalu_partial(x: f64, a: f64, b: f64, which: Partial) -> f64 {
        match which {
            Partial::X => derivative(|t| apalu_raw(t, a, b), x, x == 0.0),
            Partial::A => derivative(|t| apalu_raw(x, t, b), a, false),
            Partial::B => derivative(|t| apalu_raw(x, a, t), b, false),
        }
    }

    pub fn baseline_derivative(kind: ActivationKind, x: f64) -> f64 {
        derivative(|t| baseline_raw(kind, t), x, x == 0.0)
    }
}
