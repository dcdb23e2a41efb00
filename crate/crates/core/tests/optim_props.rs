use std::collections::BTreeMap;

use apalu::activations::{ActivationKind, ActivationParams, POSITIVITY_FLOOR};
use apalu::engine::{ParamId, Tensor};
use apalu::nn::{Model, ModelSpec, OutputHead, ParamRole};
use apalu::optim::{Optimizer, OptimizerConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn apalu_model() -> Model {
    let gains = [ActivationParams::new(0.5, 0.5).unwrap(); 2];
    let spec = ModelSpec::mlp(&[2, 3, 2], 1, ActivationKind::Apalu, &gains, OutputHead::LinearRegressor).unwrap();
    Model::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn scalar_weight() -> Model {
    let spec = ModelSpec::mlp(&[1, 1], 1, ActivationKind::Tanh, &[], OutputHead::LinearRegressor).unwrap();
    Model::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

/// Largest possible `|m_hat| / sqrt(v_hat)` after `t` Adam steps, reached by
/// Cauchy-Schwarz with `g_i` proportional to `(beta1 / beta2)^(t - i)`.
fn adam_ratio_bound(t: i32, beta1: f64, beta2: f64) -> f64 {
    let q = beta1 * beta1 / beta2;
    let geometric: f64 = (0..t).map(|k| q.powi(k)).sum();
    (1.0 - beta1) / (1.0 - beta1.powi(t)) * geometric.sqrt() * ((1.0 - beta2.powi(t)) / (1.0 - beta2)).sqrt()
}

fn weight_after(model: &Model) -> f64 {
    model.params().get(ParamId(0)).unwrap().value.data()[0]
}

fn step_scalar(opt: &mut Optimizer, model: &mut Model, g: f64) -> f64 {
    let before = weight_after(model);
    let grads = BTreeMap::from([(ParamId(0), Tensor::new(vec![1, 1], vec![g]).unwrap())]);
    opt.step(model.params_mut(), &grads).unwrap();
    (weight_after(model) - before).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gains_stay_above_the_floor(
        adam in any::<bool>(),
        lr in 1e-4..10.0f64,
        grads in prop::collection::vec(prop::collection::vec(-1e6..1e6f64, 64), 1..20),
    ) {
        let mut model = apalu_model();
        let config = if adam { OptimizerConfig::adam(lr) } else { OptimizerConfig::sgd(lr) };
        let mut opt = Optimizer::new(config).unwrap();
        for g in grads {
            let mut k = 0;
            let map: BTreeMap<ParamId, Tensor> = model
                .params()
                .ids()
                .map(|id| {
                    let shape = model.params().get(id).unwrap().value.shape().to_vec();
                    let n: usize = shape.iter().product();
                    let data = (0..n).map(|i| g[(k + i) % g.len()]).collect();
                    k += n;
                    (id, Tensor::new(shape, data).unwrap())
                })
                .collect();
            opt.step(model.params_mut(), &map).unwrap();
            for e in model.params().entries() {
                if matches!(e.role, ParamRole::GainA | ParamRole::GainB) {
                    prop_assert!(e.value.data().iter().all(|&v| v >= POSITIVITY_FLOOR));
                }
            }
        }
    }

    #[test]
    fn adam_first_step_is_at_most_lr(lr in 1e-6..1.0f64, g in -1e6..1e6f64) {
        let mut model = scalar_weight();
        let mut opt = Optimizer::new(OptimizerConfig::adam(lr)).unwrap();
        let d = step_scalar(&mut opt, &mut model, g);
        prop_assert!(d <= lr * (1.0 + 1e-12), "{d} > {lr}");
    }

    #[test]
    fn adam_constant_gradient_steps_are_at_most_lr(lr in 1e-6..1.0f64, g in -1e3..1e3f64, n in 1usize..64) {
        let mut model = scalar_weight();
        let mut opt = Optimizer::new(OptimizerConfig::adam(lr)).unwrap();
        for _ in 0..n {
            let d = step_scalar(&mut opt, &mut model, g);
            prop_assert!(d <= lr * (1.0 + 1e-12), "{d} > {lr}");
        }
    }

    #[test]
    fn adam_steps_respect_the_worst_case_ratio(
        lr in 1e-6..1.0f64,
        grads in prop::collection::vec(-1e3..1e3f64, 1..64),
    ) {
        let mut model = scalar_weight();
        let config = OptimizerConfig::adam(lr);
        let (b1, b2) = (config.beta1, config.beta2);
        let mut opt = Optimizer::new(config).unwrap();
        for (t, g) in grads.into_iter().enumerate() {
            let d = step_scalar(&mut opt, &mut model, g);
            let bound = lr * adam_ratio_bound(t as i32 + 1, b1, b2);
            prop_assert!(d <= bound * (1.0 + 1e-12), "step {}: {d} > {bound}", t + 1);
        }
    }
}

#[test]
fn adam_second_step_can_exceed_lr() {
    // Gradients shaped to attain the Cauchy-Schwarz bound at t = 2.
    let lr = 1e-3;
    let config = OptimizerConfig::adam(lr);
    let ratio = config.beta1 / config.beta2;
    let mut model = scalar_weight();
    let mut opt = Optimizer::new(config).unwrap();
    step_scalar(&mut opt, &mut model, ratio);
    let d = step_scalar(&mut opt, &mut model, 1.0);
    let bound = adam_ratio_bound(2, 0.9, 0.999);
    assert!(d > lr * 1.001, "{d}");
    assert!((d / lr - bound).abs() < 1e-6, "{} vs {bound}", d / lr);
}
