mod common;

use common::{first_order_cosines, mixture_example, rng};
use metass::metalearn::{
    inner_adapt, meta_gradient, meta_step, Learner, MetaConfig, MetaGradMode, QuadraticProbe, SeparationLearner, Task,
};
use metass::tasnet::{ConvTasNet, ModelConfig, Partition};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn probe_task(t: f64) -> Vec<Task<f64>> {
    vec![Task {
        id: "probe".into(),
        support: vec![t],
        query: vec![t],
    }]
}

#[test]
fn probe_first_order_and_exact_gradients() {
    for &(alpha, theta, t) in &[(0.1, 0.0, 1.0), (0.3, 0.5, -2.0), (0.01, -1.0, 4.0), (0.5, 2.0, 2.5)] {
        let p = QuadraticProbe::params(theta);
        let fo = MetaConfig {
            alpha,
            ..MetaConfig::default()
        };
        let exact = MetaConfig {
            meta_grad_mode: MetaGradMode::FiniteDifferenceExact,
            fd_step: 1e-4,
            ..fo
        };
        let (g1, _) = meta_gradient(&QuadraticProbe, &p, &probe_task(t), &fo).unwrap();
        let (g2, _) = meta_gradient(&QuadraticProbe, &p, &probe_task(t), &exact).unwrap();
        let want_fo = -(1.0 - alpha) * (t - theta);
        let want_exact = -(1.0 - alpha).powi(2) * (t - theta);
        assert!(rel(g1.get_scalar(0), want_fo) < 1e-6, "{} vs {want_fo}", g1.get_scalar(0));
        assert!(rel(g2.get_scalar(0), want_exact) < 1e-6, "{} vs {want_exact}", g2.get_scalar(0));
    }
}

#[test]
fn probe_overfits_a_single_task() {
    let cfg = MetaConfig {
        alpha: 0.1,
        beta: 0.5,
        ..MetaConfig::default()
    };
    let tasks = probe_task(3.0);
    let mut p = QuadraticProbe::params(-2.0);
    let first = meta_step(&QuadraticProbe, &p, &tasks, &cfg).unwrap().meta_loss;
    let mut last = first;
    for _ in 0..50 {
        let s = meta_step(&QuadraticProbe, &p, &tasks, &cfg).unwrap();
        last = s.meta_loss;
        p = s.params;
    }
    assert!(last < 1e-3 * first, "{first} -> {last}");
}

#[test]
fn first_order_points_along_exact_on_a_small_model() {
    let cos = first_order_cosines(10);
    let positive = cos.iter().filter(|c| **c > 0.0).count();
    assert!(positive >= 9, "cosine > 0 on only {positive}/10 seeds: {cos:?}");
}

#[test]
fn exact_mode_refuses_the_toy_model() {
    let learner = SeparationLearner::new(ConvTasNet::new(ModelConfig::toy()).unwrap());
    let params = learner.model.init_params(0);
    let mut g = rng(0);
    let tasks = vec![Task {
        id: "t".into(),
        support: vec![mixture_example(&mut g, 64)],
        query: vec![mixture_example(&mut g, 64)],
    }];
    let cfg = MetaConfig {
        meta_grad_mode: MetaGradMode::FiniteDifferenceExact,
        ..MetaConfig::default()
    };
    let err = meta_gradient(&learner, &params, &tasks, &cfg).unwrap_err();
    assert!(matches!(err, metass::Error::TooManyParams { limit: 2000, .. }), "{err}");
}

#[test]
fn inner_loop_reduces_support_loss_on_the_model() {
    let learner = SeparationLearner::new(ConvTasNet::new(ModelConfig::tiny()).unwrap());
    let params = learner.model.init_params(5);
    let support = vec![mixture_example(&mut rng(9), 64)];
    let before = learner.loss(&params, &support).unwrap();
    let cfg = MetaConfig {
        alpha: 1e-3,
        inner_steps: 3,
        partition: Partition::WholeModel,
        ..MetaConfig::default()
    };
    let adapted = inner_adapt(&learner, &params, &support, &cfg).unwrap();
    assert!(learner.loss(&adapted.params, &support).unwrap() < before);
}
