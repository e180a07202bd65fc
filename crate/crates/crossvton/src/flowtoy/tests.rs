use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::maskcore::{assemble_trizone, BinaryMask, ImageGrid, RgbImage};

fn tensor(values: &[f64]) -> Tensor {
    Tensor::new(vec![values.len()], values.to_vec()).unwrap()
}

#[test]
fn interpolate_endpoints_are_exact() {
    let z0 = tensor(&[1.5, -2.0, 0.25]);
    let eps = tensor(&[0.5, 3.0, -1.0]);
    assert_eq!(interpolate(&z0, &eps, 0.0).unwrap(), z0);
    assert_eq!(interpolate(&z0, &eps, 1.0).unwrap(), eps);
}

#[test]
fn interpolate_midpoint() {
    let out = interpolate(&tensor(&[2.0]), &tensor(&[0.0]), 0.5).unwrap();
    assert_eq!(out.values(), &[1.0]);
}

#[test]
fn interpolate_is_affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: f64 = rng.gen_range(0.0..=1.0);
        let out = interpolate(&tensor(&a), &tensor(&b), t).unwrap();
        for i in 0..4 {
            let expect = (1.0 - t) * a[i] + t * b[i];
            assert!((out.values()[i] - expect).abs() < 1e-15);
        }
    }
}

#[test]
fn interpolate_rejects_bad_inputs() {
    let z0 = tensor(&[1.0, 2.0]);
    let eps3 = tensor(&[1.0, 2.0, 3.0]);
    assert!(matches!(interpolate(&z0, &eps3, 0.5), Err(FlowError::ShapeMismatch(..))));
    let eps = tensor(&[0.0, 0.0]);
    assert!(matches!(interpolate(&z0, &eps, 1.5), Err(FlowError::TimeOutOfRange(_))));
    assert!(matches!(interpolate(&z0, &eps, -0.1), Err(FlowError::TimeOutOfRange(_))));
}

/// Test stub that always predicts the sample's own noise.
struct OracleStub;

impl FlowModel for OracleStub {
    fn predict(&self, sample: &FlowSample) -> Result<Tensor, FlowError> {
        Ok(sample.eps.clone())
    }
    fn param_count(&self) -> usize {
        0
    }
    fn accumulate_grads(&self, _: &FlowSample, _: &Tensor, _: &mut [f64]) -> Result<(), FlowError> {
        Ok(())
    }
}

fn random_batch(
    rng: &mut ChaCha8Rng,
    latent_len: usize,
    cond_len: usize,
    count: usize,
) -> Vec<FlowSample> {
    (0..count)
        .map(|_| {
            let z0: Vec<f64> = (0..latent_len).map(|_| StandardNormal.sample(rng)).collect();
            let eps: Vec<f64> = (0..latent_len).map(|_| StandardNormal.sample(rng)).collect();
            let cond: Vec<f64> = (0..cond_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            FlowSample::new(tensor(&z0), tensor(&eps), rng.gen_range(0.0..=1.0), tensor(&cond))
                .unwrap()
        })
        .collect()
}

#[test]
fn oracle_predictor_gives_zero_loss_and_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = random_batch(&mut rng, 6, 4, 5);
    let (loss, grads) = flow_loss(&OracleStub, &batch, |_| 1.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.is_empty());
}

#[test]
fn zero_weight_gives_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = DenoiserConfig { token_dim: 4, latent_tokens: 2, garment_tokens: 2, hidden: 5 };
    let model = ToyDenoiser::new(cfg, 7);
    let batch = random_batch(&mut rng, cfg.latent_len(), cfg.cond_len(), 4);
    let (loss, grads) = flow_loss(&model, &batch, |_| 0.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().all(|&g| g == 0.0));
}

#[test]
fn flow_loss_is_nonnegative_and_rejects_empty_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = DenoiserConfig { token_dim: 4, latent_tokens: 2, garment_tokens: 1, hidden: 4 };
    let model = ToyDenoiser::new(cfg, 1);
    let batch = random_batch(&mut rng, cfg.latent_len(), cfg.cond_len(), 3);
    let (loss, _) = flow_loss(&model, &batch, |t| 0.5 + t).unwrap();
    assert!(loss > 0.0);
    assert!(matches!(flow_loss(&model, &[], |_| 1.0), Err(FlowError::EmptyBatch)));
}

/// Central finite differences over every parameter, three seeds.
#[test]
fn gradients_match_finite_differences() {
    for seed in [11u64, 22, 33] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = DenoiserConfig { token_dim: 4, latent_tokens: 2, garment_tokens: 2, hidden: 5 };
        let mut model = ToyDenoiser::new(cfg, seed);
        let batch = random_batch(&mut rng, cfg.latent_len(), cfg.cond_len(), 3);
        let weight = |t: f64| 0.5 + t; // non-constant weighting to exercise w(t)

        let (_, analytic) = flow_loss(&model, &batch, weight).unwrap();
        assert_eq!(analytic.len(), model.param_count());

        let h = 1e-5;
        for i in 0..model.param_count() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + h;
            let up = flow_loss_value(&model, &batch, weight).unwrap();
            model.params_mut()[i] = orig - h;
            let down = flow_loss_value(&model, &batch, weight).unwrap();
            model.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic[i];
            let denom = a.abs().max(fd.abs());
            let rel = if denom > 1e-8 { (a - fd).abs() / denom } else { (a - fd).abs() };
            assert!(
                rel <= 1e-4,
                "seed {seed} param {i}: analytic {a:.10e} vs fd {fd:.10e} (rel {rel:.3e})"
            );
        }
    }
}

#[test]
fn attention_hand_computed_single_token_example() {
    // one latent token [1,0], one garment token [0,1], identity projections
    let p = AttentionParams::identity(2);
    let latent = tensor(&[1.0, 0.0]);
    let garment = tensor(&[0.0, 1.0]);
    let out = kv_concat_attention(&latent, &garment, &p).unwrap();

    // scores: q·k1/√2 = 1/√2, q·k2/√2 = 0; softmax mixes the two values
    let s1 = 1.0 / 2.0f64.sqrt();
    let e1 = s1.exp();
    let a1 = e1 / (e1 + 1.0);
    let a2 = 1.0 / (e1 + 1.0);
    assert!((out.values()[0] - a1).abs() < 1e-10);
    assert!((out.values()[1] - a2).abs() < 1e-10);

    // and with a non-trivial output projection
    let p2 = AttentionParams { wo: vec![0.5, -1.0, 2.0, 0.25], ..p };
    let out2 = kv_concat_attention(&latent, &garment, &p2).unwrap();
    assert!((out2.values()[0] - (0.5 * a1 - 1.0 * a2)).abs() < 1e-10);
    assert!((out2.values()[1] - (2.0 * a1 + 0.25 * a2)).abs() < 1e-10);
}

#[test]
fn attention_weights_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 4;
    let p = AttentionParams {
        dim: d,
        wq: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wk: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wv: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wo: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let latent: Vec<f64> = (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let garment: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights = attention_weights(&tensor(&latent), &tensor(&garment), &p).unwrap();
    assert_eq!(weights.len(), 3);
    for row in weights {
        assert_eq!(row.len(), 5);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_garment_tokens_reduce_to_plain_self_attention() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = 4;
    let p = AttentionParams {
        dim: d,
        wq: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wk: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wv: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wo: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let latent: Vec<f64> = (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let empty = Tensor::new(vec![0], vec![]).unwrap();
    let with_empty = kv_concat_attention(&tensor(&latent), &empty, &p).unwrap();

    // independent plain self-attention oracle
    let lt: Vec<Vec<f64>> = latent.chunks(d).map(|c| c.to_vec()).collect();
    let matv = |m: &[f64], x: &[f64]| -> Vec<f64> {
        (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
    };
    let scale = 1.0 / (d as f64).sqrt();
    for (i, xi) in lt.iter().enumerate() {
        let q = matv(&p.wq, xi);
        let scores: Vec<f64> = lt
            .iter()
            .map(|xj| {
                let k = matv(&p.wk, xj);
                q.iter().zip(&k).map(|(&a, &b)| a * b).sum::<f64>() * scale
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|&s| (s - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut mixed = vec![0.0; d];
        for (j, xj) in lt.iter().enumerate() {
            let v = matv(&p.wv, xj);
            for s in 0..d {
                mixed[s] += exps[j] / z * v[s];
            }
        }
        let out = matv(&p.wo, &mixed);
        for s in 0..d {
            assert!((with_empty.values()[i * d + s] - out[s]).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_is_permutation_equivariant_in_garment_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = 3;
    let p = AttentionParams {
        dim: d,
        wq: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wk: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wv: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        wo: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let latent: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g3: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let cat = |toks: &[&[f64]]| tensor(&toks.concat());
    let a = kv_concat_attention(&tensor(&latent), &cat(&[&g1, &g2, &g3]), &p).unwrap();
    let b = kv_concat_attention(&tensor(&latent), &cat(&[&g3, &g1, &g2]), &p).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-12);
    }
}

fn tiny_quadruplets(count: usize, seed: u64) -> Vec<ToyQuadruplet> {
    let g = ImageGrid::new(8, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let color = [rng.gen(), rng.gen(), rng.gen()];
            let p_c = RgbImage::filled(g, color);
            let p_g = RgbImage::filled(g, [color[2], color[0], color[1]]);
            let g_g = RgbImage::filled(g, [rng.gen(), rng.gen(), rng.gen()]);
            let split = rng.gen_range(1..7);
            let tryon = BinaryMask::from_fn(g, |r, _| r < split);
            let imagi = BinaryMask::from_fn(g, |r, _| r == split);
            let m3g = assemble_trizone(&tryon, &imagi).unwrap();
            ToyQuadruplet { p_c, p_g, g_g, m3g }
        })
        .collect()
}

#[test]
fn training_is_deterministic_under_a_fixed_seed() {
    let data = tiny_quadruplets(12, 9);
    let cfg = TrainConfig { stage1_steps: 10, stage2_steps: 5, batch_size: 4, ..Default::default() };
    let a = train_toy_two_stage(&data, &cfg).unwrap();
    let b = train_toy_two_stage(&data, &cfg).unwrap();
    assert_eq!(a.stage1_losses, b.stage1_losses);
    assert_eq!(a.stage2_losses, b.stage2_losses);
    assert_eq!(a.stage1_holdout_accuracy, b.stage1_holdout_accuracy);
}

#[test]
fn empty_dataset_is_rejected() {
    assert!(matches!(
        train_toy_two_stage(&[], &TrainConfig::default()),
        Err(FlowError::EmptyDataset)
    ));
}

#[test]
fn zero_step_training_reports_initial_losses_only() {
    let data = tiny_quadruplets(4, 10);
    let cfg = TrainConfig { stage1_steps: 0, stage2_steps: 0, batch_size: 2, ..Default::default() };
    let report = train_toy_two_stage(&data, &cfg).unwrap();
    assert_eq!(report.stage1_losses.len(), 1);
    assert_eq!(report.stage2_losses.len(), 1);
}
