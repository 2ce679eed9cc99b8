#![allow(dead_code)]

pub mod ops;
pub mod protocol;

use metass::autograd::{NodeId, Tape, Tensor};
use metass::metalearn::{Learner, MixtureExample};
use metass::tasnet::{ModelParams, Partition};
use metass::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero, for kinked activations.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = random_tensor(rng, shape);
    for v in t.data_mut() {
        *v = v.signum() * (0.05 + v.abs());
    }
    t
}

/// `<y, r>` for a fixed random `r`: a scalar whose gradient is generic.
pub fn weighted_sum(tape: &mut Tape, y: NodeId, seed: u64) -> Result<NodeId> {
    let shape = tape.value(y).shape().to_vec();
    let r = random_tensor(&mut rng(seed ^ 0xabcdef), &shape);
    let c = tape.constant(r);
    tape.dot(y, c)
}

pub fn mixture_example(rng: &mut ChaCha8Rng, t: usize) -> MixtureExample {
    let mut src = || {
        let f = rng.gen_range(0.05..0.6);
        let p = rng.gen_range(0.0..6.0);
        (0..t)
            .map(|i| (f * i as f64 + p).sin() + 0.3 * rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let a = src();
    let b = src();
    let mix = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    MixtureExample::new(mix, vec![a, b])
}

/// Largest `|analytic - numeric| / max(|analytic|, 1e-8)` over all scalars of
/// a learner's parameters, with central differences of `loss`.
pub fn learner_fd_error<L: Learner>(
    learner: &L,
    params: &ModelParams,
    examples: &[L::Example],
    step: f64,
) -> (f64, ModelParams) {
    let (_, grad) = learner.loss_and_grad(params, examples, Partition::WholeModel).unwrap();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.scalar_count() {
        let x = params.get_scalar(i);
        probe.set_scalar(i, x + step);
        let plus = learner.loss(&probe, examples).unwrap();
        probe.set_scalar(i, x - step);
        let minus = learner.loss(&probe, examples).unwrap();
        probe.set_scalar(i, x);
        let numeric = (plus - minus) / (2.0 * step);
        let a = grad.get_scalar(i);
        worst = worst.max((a - numeric).abs() / a.abs().max(1e-8));
    }
    (worst, grad)
}

/// Two synthetic talkers mixed at 0 dB, `t` samples at 8 kHz.
pub fn speech_example(seed: u64, utterance: u64, t: usize) -> MixtureExample {
    use metass::taskgen::{synth_speaker_utterance, SpeakerSpec};
    let a = SpeakerSpec::random("a", seed * 7 + 1);
    let b = SpeakerSpec::random("b", seed * 7 + 2);
    let x = synth_speaker_utterance(&a, utterance, 0.1, 8000).unwrap().samples[..t].to_vec();
    let y = synth_speaker_utterance(&b, utterance, 0.1, 8000).unwrap().samples[..t].to_vec();
    let mix = x.iter().zip(&y).map(|(p, q)| p + q).collect();
    MixtureExample::new(mix, vec![x, y])
}

/// Every permutation of `0..n`, built by insertion.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum over all assignments of the mean negative SI-SNR.
pub fn brute_force_upit(est: &[Vec<f64>], refs: &[Vec<f64>], opts: &metass::objective::SiSnrOptions) -> f64 {
    all_permutations(est.len())
        .iter()
        .map(|p| {
            -p.iter()
                .enumerate()
                .map(|(i, &j)| metass::objective::si_snr(&est[i], &refs[j], opts).unwrap())
                .sum::<f64>()
                / est.len() as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// References and noisy, permuted estimates for one uPIT instance.
pub fn upit_instance(c: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut g = rng(seed * 10 + c as u64);
    let t = 32;
    let refs: Vec<Vec<f64>> = (0..c).map(|_| (0..t).map(|_| g.gen_range(-1.0..1.0)).collect()).collect();
    let mut perm: Vec<usize> = (0..c).collect();
    perm.rotate_left(seed as usize % c);
    let est = (0..c)
        .map(|i| refs[perm[i]].iter().map(|v| v + g.gen_range(-0.8..0.8)).collect())
        .collect();
    (est, refs)
}

/// Cosine between first-order and finite-difference-exact meta-gradients of
/// the tiny model, one value per seed `0..seeds`, with `alpha = 0.01`.
pub fn first_order_cosines(seeds: u64) -> Vec<f64> {
    use metass::metalearn::{meta_gradient, MetaConfig, MetaGradMode, SeparationLearner, Task};
    use metass::tasnet::{ConvTasNet, ModelConfig};
    let learner = SeparationLearner::new(ConvTasNet::new(ModelConfig::tiny()).unwrap());
    (0..seeds)
        .map(|seed| {
            let params = learner.model.init_params(seed);
            assert!(params.scalar_count() <= 2000);
            let tasks: Vec<_> = (0..2u64)
                .map(|k| Task {
                    id: format!("t{k}"),
                    support: vec![speech_example(seed * 3 + k, 0, 128)],
                    query: vec![speech_example(seed * 3 + k, 1, 128), speech_example(seed * 3 + k, 2, 128)],
                })
                .collect();
            let fo = MetaConfig {
                alpha: 0.01,
                ..MetaConfig::default()
            };
            let exact = MetaConfig {
                meta_grad_mode: MetaGradMode::FiniteDifferenceExact,
                ..fo
            };
            let (a, _) = meta_gradient(&learner, &params, &tasks, &fo).unwrap();
            let (b, _) = meta_gradient(&learner, &params, &tasks, &exact).unwrap();
            a.dot(&b).unwrap() / (a.norm() * b.norm())
        })
        .collect()
}
