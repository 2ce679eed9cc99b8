mod common;

use common::{learner_fd_error, mixture_example, rng, speech_example};
use metass::autograd::{Tape, Tensor};
use metass::harness::{adapt_task, Regime};
use metass::metalearn::{inner_adapt, Learner, MetaConfig, SeparationLearner};
use metass::taskgen::{SeparationTask, TaskMixture};
use metass::tasnet::{BoundParams, ConvTasNet, Group, ModelConfig, ModelParams, Partition};
use proptest::prelude::*;

fn tiny() -> SeparationLearner {
    SeparationLearner::new(ConvTasNet::new(ModelConfig::tiny()).unwrap())
}

fn toy() -> SeparationLearner {
    SeparationLearner::new(ConvTasNet::new(ModelConfig::toy()).unwrap())
}

fn bits(p: &ModelParams, group: Group) -> Vec<u64> {
    p.iter()
        .filter(|e| e.group == group)
        .flat_map(|e| e.value.data().iter().map(|v| v.to_bits()))
        .collect()
}

fn one_task(t: usize, seed: u64) -> SeparationTask {
    let mk = |u: u64| {
        let ex = speech_example(seed, u, t);
        TaskMixture {
            pair: (0, 0),
            mixture: ex.mixture,
            references: [ex.references[0].clone(), ex.references[1].clone()],
            snr_db: 0.0,
            noise_snr_db: None,
        }
    };
    SeparationTask {
        task_id: "a+b".into(),
        speakers: ["a".into(), "b".into()],
        seed,
        support: vec![mk(0)],
        query: vec![mk(1), mk(2)],
        noise: None,
    }
}

#[test]
fn tiny_model_matches_finite_differences() {
    let learner = tiny();
    for seed in 0..10u64 {
        let params = learner.model.init_params(seed);
        let ex = vec![mixture_example(&mut rng(seed + 50), 32)];
        let (worst, _) = learner_fd_error(&learner, &params, &ex, 1e-6);
        assert!(worst < 1e-4, "seed {seed}: {worst}");
    }
}

#[test]
fn every_group_receives_gradient() {
    let learner = toy();
    let params = learner.model.init_params(1);
    let ex = vec![speech_example(4, 0, 400)];
    let (_, g) = learner.loss_and_grad(&params, &ex, Partition::WholeModel).unwrap();
    for group in Group::ALL {
        assert!(g.group_norm(group) > 0.0, "{group:?}");
    }
    for partition in [Partition::SeparatorOnly, Partition::AutoencoderOnly] {
        let (_, g) = learner.loss_and_grad(&params, &ex, partition).unwrap();
        for group in Group::ALL {
            assert_eq!(g.group_norm(group) > 0.0, partition.contains(group), "{partition} {group:?}");
        }
    }
}

#[test]
fn masks_lie_in_unit_interval() {
    let learner = toy();
    for seed in 0..5u64 {
        let params = learner.model.init_params(seed);
        let ex = speech_example(seed, 0, 400);
        let mut tape = Tape::new();
        let bound = BoundParams::register(&mut tape, &params, |_| false);
        let x = tape.constant(Tensor::row(ex.mixture.clone()));
        let h = learner.model.encode(&mut tape, &bound, x).unwrap();
        for m in learner.model.separate(&mut tape, &bound, h).unwrap() {
            assert!(tape.value(m).data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn inner_loop_touches_only_its_partition() {
    let learner = toy();
    for seed in 0..4u64 {
        let params = learner.model.init_params(seed);
        let support = vec![speech_example(seed, 0, 400)];
        for partition in [Partition::SeparatorOnly, Partition::AutoencoderOnly, Partition::WholeModel] {
            let cfg = MetaConfig {
                alpha: 0.01,
                inner_steps: 2,
                partition,
                ..MetaConfig::default()
            };
            let adapted = inner_adapt(&learner, &params, &support, &cfg).unwrap().params;
            for group in Group::ALL {
                let same = bits(&adapted, group) == bits(&params, group);
                assert_eq!(same, !partition.contains(group), "{partition} {group:?}");
            }
        }
    }
}

#[test]
fn adaptation_regimes_respect_partitions() {
    let learner = toy();
    let params = learner.model.init_params(3);
    let task = one_task(400, 11);
    let a_s = adapt_task(&learner, &params, &task, Regime::AS, 0.01).unwrap();
    assert_eq!(bits(&a_s, Group::Encoder), bits(&params, Group::Encoder));
    assert_eq!(bits(&a_s, Group::Decoder), bits(&params, Group::Decoder));
    assert_ne!(bits(&a_s, Group::Separator), bits(&params, Group::Separator));
    let a_c = adapt_task(&learner, &params, &task, Regime::AC, 0.01).unwrap();
    assert_eq!(bits(&a_c, Group::Separator), bits(&params, Group::Separator));
    assert_ne!(bits(&a_c, Group::Encoder), bits(&params, Group::Encoder));
    assert_eq!(adapt_task(&learner, &params, &task, Regime::None, 0.01).unwrap(), params);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_shape_follows_input(t in 40usize..300, seed in 0u64..1000) {
        let learner = toy();
        let params = learner.model.init_params(seed);
        let mix: Vec<f64> = (0..t).map(|i| ((i as f64) * 0.3 + seed as f64).sin()).collect();
        let out = learner.model.separate_signal(&params, &mix).unwrap();
        prop_assert_eq!(out.len(), 2);
        prop_assert!(out.iter().all(|s| s.len() == t && s.iter().all(|v| v.is_finite())));
    }
}
