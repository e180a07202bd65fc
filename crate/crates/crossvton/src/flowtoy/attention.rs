//! Single-head attention where keys and values of the garment tokens are
//! concatenated onto the latent-derived keys and values before softmax.
//! Queries come from latent tokens only. No positional terms, so the
//! output is permutation-equivariant in the garment tokens.

use super::{FlowError, Tensor};

/// Projection matrices, each `dim × dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub dim: usize,
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
}

impl AttentionParams {
    pub fn identity(dim: usize) -> Self {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        Self { dim, wq: eye.clone(), wk: eye.clone(), wv: eye.clone(), wo: eye }
    }
}

pub(crate) fn mat_vec(m: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_dim];
    for i in 0..out_dim {
        let row = &m[i * in_dim..(i + 1) * in_dim];
        out[i] = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
    }
    out
}

/// `m^T x` for an `out_dim × in_dim` matrix: gradient flow back through
/// a mat_vec product.
pub(crate) fn mat_t_vec(m: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; in_dim];
    for i in 0..out_dim {
        for j in 0..in_dim {
            out[j] += m[i * in_dim + j] * x[i];
        }
    }
    out
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn tokens_of(t: &Tensor, dim: usize, what: &str) -> Result<Vec<Vec<f64>>, FlowError> {
    if t.is_empty() {
        return Ok(Vec::new());
    }
    if t.len() % dim != 0 {
        return Err(FlowError::BadTensor(t.len(), vec![t.len() / dim, dim]));
    }
    let _ = what;
    Ok(t.values().chunks(dim).map(|c| c.to_vec()).collect())
}

/// Intermediates kept for the backward pass.
pub(crate) struct AttentionCache {
    pub x: Vec<Vec<f64>>,       // latent tokens
    pub z: Vec<Vec<f64>>,       // concat(latent, garment) tokens
    pub q: Vec<Vec<f64>>,       // per latent token
    pub k: Vec<Vec<f64>>,       // per key token
    pub v: Vec<Vec<f64>>,       // per key token
    pub attn: Vec<Vec<f64>>,    // softmax weights per query
    pub mixed: Vec<Vec<f64>>,   // attention-weighted values per query
}

pub(crate) fn attention_forward(
    latent: &[Vec<f64>],
    garment: &[Vec<f64>],
    p: &AttentionParams,
) -> AttentionCache {
    let d = p.dim;
    let scale = 1.0 / (d as f64).sqrt();
    let z: Vec<Vec<f64>> = latent.iter().chain(garment.iter()).cloned().collect();
    let q: Vec<Vec<f64>> = latent.iter().map(|x| mat_vec(&p.wq, x, d, d)).collect();
    let k: Vec<Vec<f64>> = z.iter().map(|t| mat_vec(&p.wk, t, d, d)).collect();
    let v: Vec<Vec<f64>> = z.iter().map(|t| mat_vec(&p.wv, t, d, d)).collect();
    let mut attn = Vec::with_capacity(q.len());
    let mut mixed = Vec::with_capacity(q.len());
    for qi in &q {
        let scores: Vec<f64> =
            k.iter().map(|kj| qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<f64>() * scale).collect();
        let a = softmax(&scores);
        let mut o = vec![0.0; d];
        for (aj, vj) in a.iter().zip(&v) {
            for (os, &vs) in o.iter_mut().zip(vj) {
                *os += aj * vs;
            }
        }
        attn.push(a);
        mixed.push(o);
    }
    AttentionCache { x: latent.to_vec(), z, q, k, v, attn, mixed }
}

pub(crate) fn attention_output(cache: &AttentionCache, p: &AttentionParams) -> Vec<Vec<f64>> {
    cache.mixed.iter().map(|o| mat_vec(&p.wo, o, p.dim, p.dim)).collect()
}

/// Gradients from the backward pass: projection-matrix gradients plus the
/// gradients flowing back into the latent and garment tokens.
pub(crate) struct AttentionGrads {
    pub d_wq: Vec<f64>,
    pub d_wk: Vec<f64>,
    pub d_wv: Vec<f64>,
    pub d_wo: Vec<f64>,
    pub d_latent: Vec<Vec<f64>>,
    pub d_garment: Vec<Vec<f64>>,
}

pub(crate) fn attention_backward(
    cache: &AttentionCache,
    p: &AttentionParams,
    d_out: &[Vec<f64>],
) -> AttentionGrads {
    let d = p.dim;
    let n = cache.x.len();
    let total = cache.z.len();
    let scale = 1.0 / (d as f64).sqrt();

    let mut d_wq = vec![0.0; d * d];
    let mut d_wk = vec![0.0; d * d];
    let mut d_wv = vec![0.0; d * d];
    let mut d_wo = vec![0.0; d * d];
    let mut d_q = vec![vec![0.0; d]; n];
    let mut d_k = vec![vec![0.0; d]; total];
    let mut d_v = vec![vec![0.0; d]; total];
    let mut d_z = vec![vec![0.0; d]; total];

    for i in 0..n {
        // out_i = wo · mixed_i
        for r in 0..d {
            for c in 0..d {
                d_wo[r * d + c] += d_out[i][r] * cache.mixed[i][c];
            }
        }
        let d_mixed = mat_t_vec(&p.wo, &d_out[i], d, d);

        // mixed_i = Σ_j attn_ij · v_j
        let a = &cache.attn[i];
        let mut d_a = vec![0.0; total];
        for j in 0..total {
            d_a[j] = d_mixed.iter().zip(&cache.v[j]).map(|(&g, &vs)| g * vs).sum();
            for s in 0..d {
                d_v[j][s] += a[j] * d_mixed[s];
            }
        }

        // softmax backward
        let dot: f64 = a.iter().zip(&d_a).map(|(&aj, &gj)| aj * gj).sum();
        for j in 0..total {
            let d_score = a[j] * (d_a[j] - dot);
            // score_ij = (q_i · k_j) * scale
            for s in 0..d {
                d_q[i][s] += d_score * cache.k[j][s] * scale;
                d_k[j][s] += d_score * cache.q[i][s] * scale;
            }
        }
    }

    let mut d_latent = vec![vec![0.0; d]; n];
    for i in 0..n {
        for r in 0..d {
            for c in 0..d {
                d_wq[r * d + c] += d_q[i][r] * cache.x[i][c];
            }
        }
        let back = mat_t_vec(&p.wq, &d_q[i], d, d);
        for s in 0..d {
            d_latent[i][s] += back[s];
        }
    }
    for j in 0..total {
        for r in 0..d {
            for c in 0..d {
                d_wk[r * d + c] += d_k[j][r] * cache.z[j][c];
                d_wv[r * d + c] += d_v[j][r] * cache.z[j][c];
            }
        }
        let back_k = mat_t_vec(&p.wk, &d_k[j], d, d);
        let back_v = mat_t_vec(&p.wv, &d_v[j], d, d);
        let target = &mut d_z[j];
        for s in 0..d {
            target[s] += back_k[s] + back_v[s];
        }
    }
    let mut d_garment = vec![vec![0.0; d]; total - n];
    for j in 0..total {
        if j < n {
            for s in 0..d {
                d_latent[j][s] += d_z[j][s];
            }
        } else {
            for s in 0..d {
                d_garment[j - n][s] += d_z[j][s];
            }
        }
    }
    AttentionGrads { d_wq, d_wk, d_wv, d_wo, d_latent, d_garment }
}

/// Softmax attention where garment-token keys/values are concatenated
/// onto the latent ones. Returns one vector per latent token, shape
/// `[latent_count, dim]`. With zero garment tokens this is plain
/// self-attention over the latent tokens.
pub fn kv_concat_attention(
    latent_tokens: &Tensor,
    garment_tokens: &Tensor,
    params: &AttentionParams,
) -> Result<Tensor, FlowError> {
    let d = params.dim;
    let latent = tokens_of(latent_tokens, d, "latent")?;
    let garment = tokens_of(garment_tokens, d, "garment")?;
    if latent.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let cache = attention_forward(&latent, &garment, params);
    let out = attention_output(&cache, params);
    let n = out.len();
    Tensor::new(vec![n, d], out.into_iter().flatten().collect())
}

/// Attention weights per latent token (rows sum to one). Exposed for
/// inspection and tests.
pub fn attention_weights(
    latent_tokens: &Tensor,
    garment_tokens: &Tensor,
    params: &AttentionParams,
) -> Result<Vec<Vec<f64>>, FlowError> {
    let d = params.dim;
    let latent = tokens_of(latent_tokens, d, "latent")?;
    let garment = tokens_of(garment_tokens, d, "garment")?;
    if latent.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    Ok(attention_forward(&latent, &garment, params).attn)
}
