//! The toy noise predictor: per-token embeddings, one K/V-concat
//! attention fusion block with a residual connection, and a shared
//! two-layer head. Parameters live in one flat vector so finite-
//! difference checking and plain SGD stay trivial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{
    attention_backward, attention_forward, attention_output, mat_t_vec, mat_vec, AttentionParams,
};
use super::{FlowError, FlowModel, FlowSample, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserConfig {
    /// Feature dimension of every token.
    pub token_dim: usize,
    /// Number of latent tokens; latent length = latent_tokens × token_dim.
    pub latent_tokens: usize,
    /// Number of garment (condition) tokens.
    pub garment_tokens: usize,
    /// Hidden width of the per-token head.
    pub hidden: usize,
}

impl DenoiserConfig {
    pub fn latent_len(&self) -> usize {
        self.latent_tokens * self.token_dim
    }

    pub fn cond_len(&self) -> usize {
        self.garment_tokens * self.token_dim
    }
}

// Flat-parameter layout offsets, in order:
// w_x (d*d), u_t (d), b_x (d), w_g (d*d), b_g (d),
// wq, wk, wv, wo (d*d each), w1 (h*d), b1 (h), w2 (d*h), b2 (d)
struct Layout {
    w_x: std::ops::Range<usize>,
    u_t: std::ops::Range<usize>,
    b_x: std::ops::Range<usize>,
    w_g: std::ops::Range<usize>,
    b_g: std::ops::Range<usize>,
    wq: std::ops::Range<usize>,
    wk: std::ops::Range<usize>,
    wv: std::ops::Range<usize>,
    wo: std::ops::Range<usize>,
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
    total: usize,
}

impl Layout {
    fn new(cfg: &DenoiserConfig) -> Self {
        let (d, h) = (cfg.token_dim, cfg.hidden);
        let mut at = 0usize;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let w_x = take(d * d);
        let u_t = take(d);
        let b_x = take(d);
        let w_g = take(d * d);
        let b_g = take(d);
        let wq = take(d * d);
        let wk = take(d * d);
        let wv = take(d * d);
        let wo = take(d * d);
        let w1 = take(h * d);
        let b1 = take(h);
        let w2 = take(d * h);
        let b2 = take(d);
        Self { w_x, u_t, b_x, w_g, b_g, wq, wk, wv, wo, w1, b1, w2, b2, total: at }
    }
}

pub struct ToyDenoiser {
    config: DenoiserConfig,
    layout: Layout,
    params: Vec<f64>,
}

struct Forward {
    x: Vec<Vec<f64>>,      // latent token embeds (post-tanh)
    g: Vec<Vec<f64>>,      // garment token embeds (post-tanh)
    cache: super::attention::AttentionCache,
    y: Vec<Vec<f64>>,      // residual sum x + attention output
    h: Vec<Vec<f64>>,      // head hidden activations (post-tanh)
    pred: Vec<Vec<f64>>,
}

impl ToyDenoiser {
    pub fn new(config: DenoiserConfig, seed: u64) -> Self {
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (config.token_dim as f64).sqrt();
        let params = (0..layout.total).map(|_| rng.gen_range(-scale..scale)).collect();
        Self { config, layout, params }
    }

    pub fn config(&self) -> DenoiserConfig {
        self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn attention_params(&self) -> AttentionParams {
        let l = &self.layout;
        AttentionParams {
            dim: self.config.token_dim,
            wq: self.params[l.wq.clone()].to_vec(),
            wk: self.params[l.wk.clone()].to_vec(),
            wv: self.params[l.wv.clone()].to_vec(),
            wo: self.params[l.wo.clone()].to_vec(),
        }
    }

    fn check_shapes(&self, zt: &Tensor, cond: &Tensor) -> Result<(), FlowError> {
        if zt.len() != self.config.latent_len() {
            return Err(FlowError::ShapeMismatch(
                zt.shape().to_vec(),
                vec![self.config.latent_len()],
            ));
        }
        if cond.len() != self.config.cond_len() {
            return Err(FlowError::ShapeMismatch(
                cond.shape().to_vec(),
                vec![self.config.cond_len()],
            ));
        }
        Ok(())
    }

    fn forward(&self, zt: &Tensor, t: f64, cond: &Tensor) -> Result<Forward, FlowError> {
        self.check_shapes(zt, cond)?;
        let cfg = &self.config;
        let l = &self.layout;
        let (d, h) = (cfg.token_dim, cfg.hidden);
        let p = &self.params;

        let embed = |token: &[f64], w: &std::ops::Range<usize>, b: &std::ops::Range<usize>, t_term: Option<f64>| {
            let mut pre = mat_vec(&p[w.clone()], token, d, d);
            for (s, pb) in pre.iter_mut().zip(&p[b.clone()]) {
                *s += pb;
            }
            if let Some(tv) = t_term {
                for (s, ut) in pre.iter_mut().zip(&p[l.u_t.clone()]) {
                    *s += ut * tv;
                }
            }
            pre
        };

        let mut x = Vec::with_capacity(cfg.latent_tokens);
        for token in zt.values().chunks(d) {
            let pre = embed(token, &l.w_x, &l.b_x, Some(t));
            x.push(pre.iter().map(|v| v.tanh()).collect::<Vec<_>>());
        }
        let mut g = Vec::with_capacity(cfg.garment_tokens);
        for token in cond.values().chunks(d) {
            let pre = embed(token, &l.w_g, &l.b_g, None);
            g.push(pre.iter().map(|v| v.tanh()).collect::<Vec<_>>());
        }

        let ap = self.attention_params();
        let cache = attention_forward(&x, &g, &ap);
        let attn_out = attention_output(&cache, &ap);
        let y: Vec<Vec<f64>> = x
            .iter()
            .zip(&attn_out)
            .map(|(xi, oi)| xi.iter().zip(oi).map(|(&a, &b)| a + b).collect())
            .collect();

        let mut hh = Vec::with_capacity(cfg.latent_tokens);
        let mut pred = Vec::with_capacity(cfg.latent_tokens);
        for yi in &y {
            let mut s = mat_vec(&p[l.w1.clone()], yi, h, d);
            for (v, b) in s.iter_mut().zip(&p[l.b1.clone()]) {
                *v += b;
            }
            let a: Vec<f64> = s.iter().map(|v| v.tanh()).collect();
            let mut out = mat_vec(&p[l.w2.clone()], &a, d, h);
            for (v, b) in out.iter_mut().zip(&p[l.b2.clone()]) {
                *v += b;
            }
            hh.push(a);
            pred.push(out);
        }
        Ok(Forward { x, g, cache, y, h: hh, pred })
    }

    /// Predicted noise given the noisy latent, time, and condition.
    pub fn predict_noise(&self, zt: &Tensor, t: f64, cond: &Tensor) -> Result<Tensor, FlowError> {
        let f = self.forward(zt, t, cond)?;
        Tensor::new(vec![self.config.latent_len()], f.pred.into_iter().flatten().collect())
    }

    fn backward(
        &self,
        zt: &Tensor,
        t: f64,
        cond: &Tensor,
        fwd: &Forward,
        d_pred: &Tensor,
        grads: &mut [f64],
    ) {
        let cfg = &self.config;
        let l = &self.layout;
        let (d, h) = (cfg.token_dim, cfg.hidden);
        let p = &self.params;
        let n = cfg.latent_tokens;

        let mut d_y = vec![vec![0.0; d]; n];
        for i in 0..n {
            let dp = &d_pred.values()[i * d..(i + 1) * d];
            // out = w2·tanh(w1·y + b1) + b2
            for (gslot, &v) in grads[l.b2.clone()].iter_mut().zip(dp) {
                *gslot += v;
            }
            for r in 0..d {
                for c in 0..h {
                    grads[l.w2.clone()][r * h + c] += dp[r] * fwd.h[i][c];
                }
            }
            let d_a = mat_t_vec(&p[l.w2.clone()], dp, d, h);
            let d_s: Vec<f64> = d_a
                .iter()
                .zip(&fwd.h[i])
                .map(|(&da, &a)| da * (1.0 - a * a))
                .collect();
            for (gslot, &v) in grads[l.b1.clone()].iter_mut().zip(&d_s) {
                *gslot += v;
            }
            for r in 0..h {
                for c in 0..d {
                    grads[l.w1.clone()][r * d + c] += d_s[r] * fwd.y[i][c];
                }
            }
            let back = mat_t_vec(&p[l.w1.clone()], &d_s, h, d);
            for s in 0..d {
                d_y[i][s] += back[s];
            }
        }

        // y = x + attention(x, g); residual splits the gradient
        let ap = self.attention_params();
        let ag = attention_backward(&fwd.cache, &ap, &d_y);
        for (gslot, v) in grads[l.wq.clone()].iter_mut().zip(&ag.d_wq) {
            *gslot += v;
        }
        for (gslot, v) in grads[l.wk.clone()].iter_mut().zip(&ag.d_wk) {
            *gslot += v;
        }
        for (gslot, v) in grads[l.wv.clone()].iter_mut().zip(&ag.d_wv) {
            *gslot += v;
        }
        for (gslot, v) in grads[l.wo.clone()].iter_mut().zip(&ag.d_wo) {
            *gslot += v;
        }

        let mut d_x = ag.d_latent;
        for i in 0..n {
            for s in 0..d {
                d_x[i][s] += d_y[i][s]; // residual path
            }
        }

        // latent embeds: x = tanh(w_x·z + u_t·t + b_x)
        for i in 0..n {
            let token = &zt.values()[i * d..(i + 1) * d];
            let d_pre: Vec<f64> = d_x[i]
                .iter()
                .zip(&fwd.x[i])
                .map(|(&g, &xv)| g * (1.0 - xv * xv))
                .collect();
            for (gslot, &v) in grads[l.b_x.clone()].iter_mut().zip(&d_pre) {
                *gslot += v;
            }
            for (gslot, &v) in grads[l.u_t.clone()].iter_mut().zip(&d_pre) {
                *gslot += v * t;
            }
            for r in 0..d {
                for c in 0..d {
                    grads[l.w_x.clone()][r * d + c] += d_pre[r] * token[c];
                }
            }
        }

        // garment embeds: g = tanh(w_g·c + b_g)
        for j in 0..cfg.garment_tokens {
            let token = &cond.values()[j * d..(j + 1) * d];
            let d_pre: Vec<f64> = ag.d_garment[j]
                .iter()
                .zip(&fwd.g[j])
                .map(|(&g, &gv)| g * (1.0 - gv * gv))
                .collect();
            for (gslot, &v) in grads[l.b_g.clone()].iter_mut().zip(&d_pre) {
                *gslot += v;
            }
            for r in 0..d {
                for c in 0..d {
                    grads[l.w_g.clone()][r * d + c] += d_pre[r] * token[c];
                }
            }
        }
    }
}

impl FlowModel for ToyDenoiser {
    fn predict(&self, sample: &FlowSample) -> Result<Tensor, FlowError> {
        self.predict_noise(&sample.noisy_latent(), sample.t, &sample.cond)
    }

    fn param_count(&self) -> usize {
        self.layout.total
    }

    fn accumulate_grads(
        &self,
        sample: &FlowSample,
        d_pred: &Tensor,
        grads: &mut [f64],
    ) -> Result<(), FlowError> {
        let zt = sample.noisy_latent();
        let fwd = self.forward(&zt, sample.t, &sample.cond)?;
        self.backward(&zt, sample.t, &sample.cond, &fwd, d_pred, grads);
        Ok(())
    }
}
