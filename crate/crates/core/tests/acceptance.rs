//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::time::Instant;

use common::ops::op_cases;
use common::protocol::{db, pool_of, power, task_violations};
use common::{brute_force_upit, first_order_cosines, learner_fd_error, mixture_example, rng, speech_example, upit_instance};
use metass::harness::{
    adapt_task, make_tasks, run_adapt_eval, run_lr_sweep, run_meta_train, run_pretrain, Algo, ExperimentConfig, Regime,
    SWEEP_ALPHAS,
};
use metass::metalearn::{inner_adapt, meta_gradient, MetaConfig, MetaGradMode, QuadraticProbe, SeparationLearner, Task};
use metass::objective::{si_snr, si_snri, upit_loss, SiSnrOptions};
use metass::taskgen::{enumerate_tasks, mix_at_snr, synth_speaker_utterance, AudioSignal, SeparationTask, SpeakerSpec, TaskMixture};
use metass::tasnet::{ConvTasNet, Group, ModelConfig, ModelParams};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn autodiff() -> Outcome {
    let start = Instant::now();
    let mut worst_op = 0.0f64;
    for case in op_cases() {
        let e = case.worst_error();
        ensure(e < 1e-4, format!("{}: {e:e}", case.name))?;
        worst_op = worst_op.max(e);
    }
    let learner = SeparationLearner::new(ConvTasNet::new(ModelConfig::tiny()).unwrap());
    let mut worst_model = 0.0f64;
    for seed in 0..10u64 {
        let params = learner.model.init_params(seed);
        let ex = vec![mixture_example(&mut rng(seed + 50), 32)];
        let (e, _) = learner_fd_error(&learner, &params, &ex, 1e-6);
        ensure(e < 1e-4, format!("tiny model seed {seed}: {e:e}"))?;
        worst_model = worst_model.max(e);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{} ops x 10 seeds worst {worst_op:.1e}; tiny model x 10 seeds worst {worst_model:.1e}; {secs:.1} s",
        op_cases().len()
    ))
}

fn si_snr_cases() -> Outcome {
    let o = SiSnrOptions::default();
    let zero = si_snr(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], &o).unwrap();
    ensure(zero == 0.0, format!("0 dB case gave {zero}"))?;
    let orth = si_snr(&[0.0, 1.0], &[1.0, 0.0], &o).unwrap();
    let floor = 10.0 * (o.epsilon / (1.0 + o.epsilon)).log10();
    ensure((orth - floor).abs() < 1e-9, format!("orthogonal case {orth} vs {floor}"))?;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut g = rng(seed);
        let r: Vec<f64> = (0..256).map(|_| g.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = r.iter().map(|v| 0.7 * v + g.gen_range(-1.0..1.0)).collect();
        let base = si_snr(&e, &r, &o).unwrap();
        for a in [0.1, 0.5, 3.0, 10.0] {
            let s: Vec<f64> = e.iter().map(|v| a * v).collect();
            worst = worst.max((si_snr(&s, &r, &o).unwrap() - base).abs());
        }
        let imp = si_snri(&e, &r, &e, &o).unwrap();
        ensure(imp == 0.0, format!("si_snri(mixture) = {imp}"))?;
    }
    ensure(worst < 1e-6, format!("scale invariance off by {worst:e} dB"))?;
    Ok(format!("0 dB exact, orthogonal {orth:.1} dB, scale drift {worst:.1e} dB, si_snri(mixture) = 0"))
}

fn upit_oracle() -> Outcome {
    let o = SiSnrOptions::default();
    let mut worst = 0.0f64;
    for c in [2usize, 3, 4] {
        for seed in 0..100u64 {
            let (est, refs) = upit_instance(c, seed);
            let e: Vec<&[f64]> = est.iter().map(Vec::as_slice).collect();
            let r: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
            let got = upit_loss(&e, &r, &o).unwrap().value;
            worst = worst.max((got - brute_force_upit(&est, &refs, &o)).abs());
        }
        let same = vec![0.3, -1.0, 0.5, 0.2];
        let tied: Vec<&[f64]> = vec![same.as_slice(); c];
        for _ in 0..3 {
            let p = upit_loss(&tied, &tied, &o).unwrap().permutation;
            ensure(p == (0..c).collect::<Vec<_>>(), format!("tie broken as {p:?}"))?;
        }
    }
    ensure(worst < 1e-12, format!("differs from brute force by {worst:e}"))?;
    Ok(format!("300 instances, max |diff| {worst:.1e}; ties resolve to identity"))
}

fn meta_gradient_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for &(alpha, theta, t) in &[(0.1, 0.0, 1.0), (0.3, 0.5, -2.0), (0.01, -1.0, 4.0), (0.5, 2.0, 2.5)] {
        let p = QuadraticProbe::params(theta);
        let task = vec![Task {
            id: "probe".to_string(),
            support: vec![t],
            query: vec![t],
        }];
        let fo = MetaConfig {
            alpha,
            ..MetaConfig::default()
        };
        let exact = MetaConfig {
            meta_grad_mode: MetaGradMode::FiniteDifferenceExact,
            fd_step: 1e-4,
            ..fo
        };
        let g1 = meta_gradient(&QuadraticProbe, &p, &task, &fo).unwrap().0.get_scalar(0);
        let g2 = meta_gradient(&QuadraticProbe, &p, &task, &exact).unwrap().0.get_scalar(0);
        let w1 = -(1.0 - alpha) * (t - theta);
        let w2 = -(1.0 - alpha) * (1.0 - alpha) * (t - theta);
        worst = worst.max((g1 - w1).abs() / w1.abs()).max((g2 - w2).abs() / w2.abs());
    }
    ensure(worst < 1e-6, format!("probe relative error {worst:e}"))?;
    let cos = first_order_cosines(10);
    let positive = cos.iter().filter(|c| **c > 0.0).count();
    ensure(positive >= 9, format!("cosine > 0 on {positive}/10 seeds: {cos:.3?}"))?;
    Ok(format!("probe rel. error {worst:.1e}; cosine > 0 on {positive}/10 seeds"))
}

fn group_bits(p: &ModelParams, group: Group) -> Vec<u64> {
    p.iter()
        .filter(|e| e.group == group)
        .flat_map(|e| e.value.data().iter().map(|v| v.to_bits()))
        .collect()
}

fn partition_contracts() -> Outcome {
    let learner = SeparationLearner::new(ConvTasNet::new(ModelConfig::toy()).unwrap());
    let mk = |seed: u64, u: u64| {
        let ex = speech_example(seed, u, 400);
        TaskMixture {
            pair: (0, 0),
            mixture: ex.mixture,
            references: [ex.references[0].clone(), ex.references[1].clone()],
            snr_db: 0.0,
            noise_snr_db: None,
        }
    };
    let mut checks = 0;
    for seed in 0..5u64 {
        let params = learner.model.init_params(seed);
        let anil_s = MetaConfig {
            alpha: 0.01,
            partition: Algo::AnilS.partition().unwrap(),
            inner_steps: 2,
            ..MetaConfig::default()
        };
        let inner = inner_adapt(&learner, &params, &[speech_example(seed, 0, 400)], &anil_s).unwrap().params;
        let task = SeparationTask {
            task_id: "a+b".into(),
            speakers: ["a".into(), "b".into()],
            seed,
            support: vec![mk(seed, 0)],
            query: vec![mk(seed, 1)],
            noise: None,
        };
        let a_s = adapt_task(&learner, &params, &task, Regime::AS, 0.01).unwrap();
        let a_c = adapt_task(&learner, &params, &task, Regime::AC, 0.01).unwrap();
        for (name, adapted, frozen, moving) in [
            ("ANIL_s inner loop", &inner, vec![Group::Encoder, Group::Decoder], Group::Separator),
            ("regime a_s", &a_s, vec![Group::Encoder, Group::Decoder], Group::Separator),
            ("regime a_c", &a_c, vec![Group::Separator], Group::Encoder),
        ] {
            for g in frozen {
                ensure(group_bits(adapted, g) == group_bits(&params, g), format!("{name} moved {g:?} (seed {seed})"))?;
                checks += 1;
            }
            ensure(group_bits(adapted, moving) != group_bits(&params, moving), format!("{name} did not adapt"))?;
        }
    }
    Ok(format!("{checks} frozen-group comparisons bit-identical over 5 seeds"))
}

fn task_protocol() -> Outcome {
    let mut g = rng(77);
    for seed in 0..100u64 {
        let pair = g.gen_range(0..15);
        let v = task_violations(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15), pair);
        ensure(v.is_empty(), format!("seed {seed}: {v:?}"))?;
    }
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let snr = g.gen_range(-5.0..5.0);
        let a = synth_speaker_utterance(&SpeakerSpec::random("a", seed), 0, 0.05, 8000).unwrap();
        let b = synth_speaker_utterance(&SpeakerSpec::random("b", seed + 500), 1, 0.04, 8000).unwrap();
        let m = mix_at_snr(&AudioSignal::new(8000, a.samples), &AudioSignal::new(8000, b.samples), snr).unwrap();
        worst = worst.max((db(power(&m.target), power(&m.scaled_interferer)) - snr).abs());
    }
    ensure(worst < 0.01, format!("mixing SNR off by {worst} dB"))?;
    let n101 = enumerate_tasks(&pool_of(101, 3, 0.005)).len();
    let n14 = enumerate_tasks(&pool_of(14, 3, 0.005)).len();
    ensure(n101 == 5050 && n14 == 91, format!("enumerated {n101} and {n14}"))?;
    Ok(format!("100 seeds clean+noisy; mixing SNR error {worst:.1e} dB; 101 -> {n101}, 14 -> {n14}"))
}

struct SeedResult {
    pretrain_drop: f64,
    mt_post: f64,
    maml_pre: f64,
    maml_post: f64,
    pretrain_best: std::path::PathBuf,
    cfg: ExperimentConfig,
}

fn desk_config(root: &Path, seed: u64) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.model, ModelConfig::toy());
    cfg.seed = seed;
    cfg.noise = false;
    cfg.data_root = root.join("data");
    cfg.out_dir = root.join("runs");
    cfg
}

fn desk_seed(root: &Path, seed: u64) -> SeedResult {
    let cfg = desk_config(root, seed);
    make_tasks(&cfg).unwrap();
    let pre = run_pretrain(&ExperimentConfig {
        algo: Algo::Multitask,
        epochs: 10,
        ..cfg.clone()
    })
    .unwrap();
    let train_loss = |epoch: usize| {
        pre.outcome
            .history
            .iter()
            .find(|r| r.epoch == epoch && r.split == "train")
            .unwrap()
            .loss
    };
    let pretrain_drop = train_loss(0) - train_loss(pre.outcome.best_epoch);
    let meta = run_meta_train(&ExperimentConfig {
        algo: Algo::Maml,
        epochs: 4,
        init_checkpoint: Some(pre.best.clone()),
        ..cfg.clone()
    })
    .unwrap();
    let eval = |ckpt: &Path, algo: Algo| {
        let run = run_adapt_eval(&ExperimentConfig {
            algo,
            checkpoint: Some(ckpt.to_path_buf()),
            finetune_regime: Regime::M,
            alpha: 0.01,
            ..cfg.clone()
        })
        .unwrap();
        let r = &run.reports[0].1;
        (r.mean_pre(), r.mean_post())
    };
    let (_, mt_post) = eval(&pre.best, Algo::Multitask);
    let (maml_pre, maml_post) = eval(&meta.best, Algo::Maml);
    SeedResult {
        pretrain_drop,
        mt_post,
        maml_pre,
        maml_post,
        pretrain_best: pre.best,
        cfg,
    }
}

fn end_to_end(dirs: &[tempfile::TempDir]) -> (Outcome, Option<(std::path::PathBuf, ExperimentConfig)>) {
    let start = Instant::now();
    let results: Vec<SeedResult> = dirs.iter().enumerate().map(|(s, d)| desk_seed(d.path(), s as u64)).collect();
    let secs = start.elapsed().as_secs_f64();
    let lines: Vec<String> = results
        .iter()
        .enumerate()
        .map(|(s, r)| {
            format!(
                "seed {s}: pretrain -{:.1} dB, multitask post {:.2}, MAML pre {:.2} post {:.2}",
                r.pretrain_drop, r.mt_post, r.maml_pre, r.maml_post
            )
        })
        .collect();
    for l in &lines {
        println!("       {l}");
    }
    let sweep_input = results.first().map(|r| (r.pretrain_best.clone(), r.cfg.clone()));
    let outcome = (|| {
        for (s, r) in results.iter().enumerate() {
            ensure(r.pretrain_drop >= 3.0, format!("seed {s}: pretraining reduced loss by {:.2} dB", r.pretrain_drop))?;
            ensure(r.maml_post > r.maml_pre, format!("seed {s}: adaptation changed SI-SNRi by {:.3} dB", r.maml_post - r.maml_pre))?;
        }
        let wins = results.iter().filter(|r| r.maml_post > r.mt_post).count();
        ensure(wins >= 2, format!("MAML ahead of multitask on {wins}/3 seeds"))?;
        ensure(secs < 1800.0, format!("took {secs:.0} s"))?;
        Ok(format!("MAML > multitask after adaptation on {wins}/3 seeds; {secs:.0} s"))
    })();
    (outcome, sweep_input)
}

fn sweep(input: Option<(std::path::PathBuf, ExperimentConfig)>) -> Outcome {
    let (ckpt, cfg) = input.ok_or("no multitask checkpoint")?;
    let run = run_lr_sweep(&ExperimentConfig {
        checkpoint: Some(ckpt),
        ..cfg
    })
    .map_err(|e| e.to_string())?;
    ensure(run.rows.len() == 30, format!("{} rows", run.rows.len()))?;
    for regime in Regime::ADAPTING {
        let alphas: Vec<f64> = run.rows.iter().filter(|r| r.regime == regime).map(|r| r.alpha).collect();
        ensure(alphas == SWEEP_ALPHAS, format!("{regime}: grid {alphas:?}"))?;
    }
    let mut worst = 0.0f64;
    for r in run.reports.iter().filter(|r| r.alpha == 1e-6) {
        worst = worst.max((r.mean_post() - r.mean_pre()).abs());
    }
    ensure(worst < 0.1, format!("alpha=1e-6 moved the score by {worst} dB"))?;
    Ok(format!("30 rows; alpha=1e-6 |post-pre| {worst:.1e} dB"))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    };
    report("autodiff soundness", autodiff());
    report("SI-SNR correctness", si_snr_cases());
    report("uPIT oracle", upit_oracle());
    report("meta-gradient oracle", meta_gradient_oracle());
    report("partition contracts", partition_contracts());
    report("task protocol", task_protocol());
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let (e2e, sweep_input) = end_to_end(&dirs);
    report("desk-scale end-to-end", e2e);
    report("sweep harness", sweep(sweep_input));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
