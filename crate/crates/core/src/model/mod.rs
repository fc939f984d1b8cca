//! Tiny decoder-only autoregressive transformer with hand-written forward
//! and backward passes.
//!
//! Pre-norm residual blocks, GELU feed-forward, learned absolute positions,
//! causal attention, optionally tied input/output embeddings. Everything is
//! f32 and single-threaded; batch rows are processed in a fixed order so a
//! fixed seed gives bit-identical loss trajectories.

pub mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{
    axpy, dot, linear_bwd_input, linear_bwd_weight, linear_fwd, softmax_inplace, Tensor,
};
use crate::tokenizer::PAD;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("d_model {d_model} is not divisible by n_heads {n_heads}")]
    BadHeadSplit { d_model: usize, n_heads: usize },
    #[error("sequence length {len} exceeds max_seq_len {max}")]
    LengthOverflow { len: usize, max: usize },
    #[error("loss mask selects no targets")]
    AllMasked,
    #[error("forward cache does not match this batch")]
    CacheMismatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub tie_embeddings: bool,
}

impl ModelConfig {
    /// The default desk-scale model: trains on CPU in minutes.
    pub fn tiny(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: 128,
            n_layers: 4,
            n_heads: 4,
            d_ff: 512,
            max_seq_len: 256,
            tie_embeddings: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::BadHeadSplit {
                d_model: self.d_model,
                n_heads: self.n_heads,
            });
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Named tensor manifest; fixed order shared by init, the optimizer and
    /// the checkpoint format.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.d_model;
        let mut m = vec![
            ("tok_emb".to_string(), vec![self.vocab_size, d]),
            ("pos_emb".to_string(), vec![self.max_seq_len, d]),
        ];
        for l in 0..self.n_layers {
            m.push((format!("layer{l}.ln1.scale"), vec![d]));
            m.push((format!("layer{l}.ln1.shift"), vec![d]));
            m.push((format!("layer{l}.attn.wq"), vec![d, d]));
            m.push((format!("layer{l}.attn.wk"), vec![d, d]));
            m.push((format!("layer{l}.attn.wv"), vec![d, d]));
            m.push((format!("layer{l}.attn.wo"), vec![d, d]));
            m.push((format!("layer{l}.ln2.scale"), vec![d]));
            m.push((format!("layer{l}.ln2.shift"), vec![d]));
            m.push((format!("layer{l}.ff.w_in"), vec![self.d_ff, d]));
            m.push((format!("layer{l}.ff.w_out"), vec![d, self.d_ff]));
        }
        m.push(("final_norm.scale".to_string(), vec![d]));
        m.push(("final_norm.shift".to_string(), vec![d]));
        if !self.tie_embeddings {
            m.push(("head".to_string(), vec![self.vocab_size, d]));
        }
        m
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 4 * d * d + 2 * d * self.d_ff + 4 * d;
        let head = if self.tie_embeddings { 0 } else { self.vocab_size * d };
        self.vocab_size * d + self.max_seq_len * d + self.n_layers * per_layer + 2 * d + head
    }
}

// Tensor indices within the manifest.
const IDX_TOK_EMB: usize = 0;
const IDX_POS_EMB: usize = 1;
const LAYER_STRIDE: usize = 10;
const OFF_LN1_SCALE: usize = 0;
const OFF_LN1_SHIFT: usize = 1;
const OFF_WQ: usize = 2;
const OFF_WK: usize = 3;
const OFF_WV: usize = 4;
const OFF_WO: usize = 5;
const OFF_LN2_SCALE: usize = 6;
const OFF_LN2_SHIFT: usize = 7;
const OFF_FF_IN: usize = 8;
const OFF_FF_OUT: usize = 9;

fn layer_base(l: usize) -> usize {
    2 + l * LAYER_STRIDE
}

/// An ordered collection of tensors laid out per the model manifest. Both the
/// parameters and their gradients use this container.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            tensors: self.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }

    pub fn copy_from(&mut self, other: &ParamSet) {
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            dst.data.copy_from_slice(&src.data);
        }
    }

    /// Global L2 norm over all tensors, accumulated in f64.
    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sq_norm_f64).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// `self += alpha * other`, elementwise across all tensors.
    pub fn add_scaled(&mut self, other: &ParamSet, alpha: f32) {
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            axpy(alpha, &src.data, &mut dst.data);
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// All transformer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub set: ParamSet,
}

/// Gradients share the parameter layout.
pub type Gradients = ParamSet;

impl ModelParams {
    fn t(&self, idx: usize) -> &Tensor {
        &self.set.tensors[idx]
    }
}

/// Deterministic initialization: embeddings and projections from a seeded
/// normal with standard deviation 0.02, norm scales 1 and shifts 0.
pub fn init(config: &ModelConfig, seed: u64) -> Result<ModelParams, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move |std: f32| -> f32 {
        // Box-Muller; two uniform draws per sample keeps the stream simple.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        (z as f32) * std
    };
    let tensors = config
        .manifest()
        .into_iter()
        .map(|(name, shape)| {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".scale") {
                vec![1.0; n]
            } else if name.ends_with(".shift") {
                vec![0.0; n]
            } else {
                (0..n).map(|_| gauss(0.02)).collect()
            };
            Tensor::from_vec(&shape, data)
        })
        .collect();
    Ok(ModelParams {
        config: config.clone(),
        set: ParamSet { tensors },
    })
}

/// A padded batch of token id rows with a per-position target mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub rows: usize,
    pub cols: usize,
    pub ids: Vec<u32>,
    /// 1 where the position's token is a loss target (position 0 never is,
    /// by the shift convention; PAD positions are 0).
    pub mask: Vec<u8>,
    pub lengths: Vec<usize>,
}

impl Batch {
    /// Assemble a batch from (ids, target-mask) rows, padding to the longest.
    pub fn from_rows(rows: &[(Vec<u32>, Vec<u8>)]) -> Batch {
        assert!(!rows.is_empty());
        let cols = rows.iter().map(|(ids, _)| ids.len()).max().unwrap();
        let mut ids = vec![PAD; rows.len() * cols];
        let mut mask = vec![0u8; rows.len() * cols];
        let mut lengths = Vec::with_capacity(rows.len());
        for (r, (row_ids, row_mask)) in rows.iter().enumerate() {
            assert_eq!(row_ids.len(), row_mask.len());
            ids[r * cols..r * cols + row_ids.len()].copy_from_slice(row_ids);
            mask[r * cols..r * cols + row_mask.len()].copy_from_slice(row_mask);
            lengths.push(row_ids.len());
        }
        Batch {
            rows: rows.len(),
            cols,
            ids,
            mask,
            lengths,
        }
    }

    pub fn row_ids(&self, r: usize) -> &[u32] {
        &self.ids[r * self.cols..r * self.cols + self.lengths[r]]
    }

    /// Number of masked-in target positions.
    pub fn target_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Per-row, per-layer activations kept for the backward pass.
struct LayerCache {
    ln1_xhat: Vec<f32>,
    ln1_rstd: Vec<f32>,
    ln1_out: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    /// Lower-triangular attention probabilities, one S x S block per head.
    probs: Vec<f32>,
    ctx: Vec<f32>,
    h_mid: Vec<f32>,
    ln2_xhat: Vec<f32>,
    ln2_rstd: Vec<f32>,
    ln2_out: Vec<f32>,
    ff_pre: Vec<f32>,
    ff_act: Vec<f32>,
}

struct RowCache {
    len: usize,
    layers: Vec<LayerCache>,
    lnf_xhat: Vec<f32>,
    lnf_rstd: Vec<f32>,
    lnf_out: Vec<f32>,
}

/// Activations for one forward call; consumed by `backward`.
pub struct ForwardCache {
    ids: Vec<u32>,
    rows: Vec<RowCache>,
}

/// Logits for a batch, shaped (rows, cols, vocab) with PAD tail positions
/// zero-filled.
pub struct Logits {
    pub rows: usize,
    pub cols: usize,
    pub vocab: usize,
    pub data: Vec<f32>,
}

impl Logits {
    pub fn at(&self, r: usize, t: usize) -> &[f32] {
        let base = (r * self.cols + t) * self.vocab;
        &self.data[base..base + self.vocab]
    }
}

fn layer_norm_fwd(
    x: &[f32],
    scale: &[f32],
    shift: &[f32],
    seq: usize,
    d: usize,
    xhat: &mut Vec<f32>,
    rstd: &mut Vec<f32>,
    out: &mut Vec<f32>,
) {
    const EPS: f32 = 1e-5;
    xhat.resize(seq * d, 0.0);
    rstd.resize(seq, 0.0);
    out.resize(seq * d, 0.0);
    for s in 0..seq {
        let xr = &x[s * d..(s + 1) * d];
        let mean = xr.iter().sum::<f32>() / d as f32;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        let r = 1.0 / (var + EPS).sqrt();
        rstd[s] = r;
        let xh = &mut xhat[s * d..(s + 1) * d];
        let o = &mut out[s * d..(s + 1) * d];
        for i in 0..d {
            xh[i] = (xr[i] - mean) * r;
            o[i] = xh[i] * scale[i] + shift[i];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn layer_norm_bwd(
    d_out: &[f32],
    xhat: &[f32],
    rstd: &[f32],
    scale: &[f32],
    seq: usize,
    d: usize,
    d_scale: &mut [f32],
    d_shift: &mut [f32],
    d_x: &mut [f32],
) {
    for s in 0..seq {
        let dy = &d_out[s * d..(s + 1) * d];
        let xh = &xhat[s * d..(s + 1) * d];
        let mut sum_dxhat = 0.0f32;
        let mut sum_dxhat_xhat = 0.0f32;
        for i in 0..d {
            d_scale[i] += dy[i] * xh[i];
            d_shift[i] += dy[i];
            let dxh = dy[i] * scale[i];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[i];
        }
        let inv_d = 1.0 / d as f32;
        let dxr = &mut d_x[s * d..(s + 1) * d];
        for i in 0..d {
            let dxh = dy[i] * scale[i];
            dxr[i] += rstd[s] * (dxh - inv_d * sum_dxhat - xh[i] * inv_d * sum_dxhat_xhat);
        }
    }
}

const GELU_C: f32 = 0.797_884_56; // sqrt(2/pi)
const GELU_A: f32 = 0.044_715;

#[inline]
fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
fn gelu_grad(x: f32) -> f32 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Run the model over a batch. Position `t` of each row attends only to
/// positions `<= t`.
pub fn forward(params: &ModelParams, batch: &Batch) -> Result<(Logits, ForwardCache), ModelError> {
    let cfg = &params.config;
    let vocab = cfg.vocab_size;
    for &len in &batch.lengths {
        if len > cfg.max_seq_len {
            return Err(ModelError::LengthOverflow {
                len,
                max: cfg.max_seq_len,
            });
        }
    }
    let mut logits = Logits {
        rows: batch.rows,
        cols: batch.cols,
        vocab,
        data: vec![0.0; batch.rows * batch.cols * vocab],
    };
    let mut rows = Vec::with_capacity(batch.rows);
    for r in 0..batch.rows {
        let seq = batch.lengths[r];
        let ids = batch.row_ids(r);
        let row = forward_row(params, ids, seq, &mut logits.data, r, batch.cols)?;
        rows.push(row);
    }
    let cache = ForwardCache {
        ids: batch.ids.clone(),
        rows,
    };
    Ok((logits, cache))
}

fn forward_row(
    params: &ModelParams,
    ids: &[u32],
    seq: usize,
    logits_data: &mut [f32],
    row: usize,
    cols: usize,
) -> Result<RowCache, ModelError> {
    let cfg = &params.config;
    let d = cfg.d_model;
    let heads = cfg.n_heads;
    let hd = cfg.head_dim();
    let scale = 1.0 / (hd as f32).sqrt();
    let tok_emb = params.t(IDX_TOK_EMB);
    let pos_emb = params.t(IDX_POS_EMB);

    let mut h = vec![0.0f32; seq * d];
    for (t, &id) in ids.iter().enumerate() {
        debug_assert!((id as usize) < cfg.vocab_size, "token id out of range");
        let te = tok_emb.row(id as usize);
        let pe = pos_emb.row(t);
        let hr = &mut h[t * d..(t + 1) * d];
        for i in 0..d {
            hr[i] = te[i] + pe[i];
        }
    }

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let base = layer_base(l);
        let ln1_scale = &params.t(base + OFF_LN1_SCALE).data;
        let ln1_shift = &params.t(base + OFF_LN1_SHIFT).data;
        let wq = &params.t(base + OFF_WQ).data;
        let wk = &params.t(base + OFF_WK).data;
        let wv = &params.t(base + OFF_WV).data;
        let wo = &params.t(base + OFF_WO).data;
        let ln2_scale = &params.t(base + OFF_LN2_SCALE).data;
        let ln2_shift = &params.t(base + OFF_LN2_SHIFT).data;
        let w_in = &params.t(base + OFF_FF_IN).data;
        let w_out = &params.t(base + OFF_FF_OUT).data;

        let mut lc = LayerCache {
            ln1_xhat: Vec::new(),
            ln1_rstd: Vec::new(),
            ln1_out: Vec::new(),
            q: vec![0.0; seq * d],
            k: vec![0.0; seq * d],
            v: vec![0.0; seq * d],
            probs: vec![0.0; heads * seq * seq],
            ctx: vec![0.0; seq * d],
            h_mid: Vec::new(),
            ln2_xhat: Vec::new(),
            ln2_rstd: Vec::new(),
            ln2_out: Vec::new(),
            ff_pre: vec![0.0; seq * cfg.d_ff],
            ff_act: vec![0.0; seq * cfg.d_ff],
        };

        layer_norm_fwd(&h, ln1_scale, ln1_shift, seq, d, &mut lc.ln1_xhat, &mut lc.ln1_rstd, &mut lc.ln1_out);
        linear_fwd(&lc.ln1_out, wq, seq, d, d, &mut lc.q);
        linear_fwd(&lc.ln1_out, wk, seq, d, d, &mut lc.k);
        linear_fwd(&lc.ln1_out, wv, seq, d, d, &mut lc.v);

        for hix in 0..heads {
            let off = hix * hd;
            let pb = hix * seq * seq;
            for s in 0..seq {
                let qrow = &lc.q[s * d + off..s * d + off + hd];
                let prow = &mut lc.probs[pb + s * seq..pb + s * seq + s + 1];
                for (t, p) in prow.iter_mut().enumerate() {
                    *p = dot(qrow, &lc.k[t * d + off..t * d + off + hd]) * scale;
                }
                softmax_inplace(prow);
                let ctx_row = &mut lc.ctx[s * d + off..s * d + off + hd];
                for t in 0..=s {
                    let p = lc.probs[pb + s * seq + t];
                    axpy(p, &lc.v[t * d + off..t * d + off + hd], ctx_row);
                }
            }
        }

        let mut attn_out = vec![0.0f32; seq * d];
        linear_fwd(&lc.ctx, wo, seq, d, d, &mut attn_out);
        for i in 0..seq * d {
            h[i] += attn_out[i];
        }
        lc.h_mid = h.clone();

        layer_norm_fwd(&h, ln2_scale, ln2_shift, seq, d, &mut lc.ln2_xhat, &mut lc.ln2_rstd, &mut lc.ln2_out);
        linear_fwd(&lc.ln2_out, w_in, seq, d, cfg.d_ff, &mut lc.ff_pre);
        for (a, &p) in lc.ff_act.iter_mut().zip(&lc.ff_pre) {
            *a = gelu(p);
        }
        let mut ff_out = vec![0.0f32; seq * d];
        linear_fwd(&lc.ff_act, w_out, seq, cfg.d_ff, d, &mut ff_out);
        for i in 0..seq * d {
            h[i] += ff_out[i];
        }
        layers.push(lc);
    }

    let lnf_scale = &params.set.tensors[layer_base(cfg.n_layers)].data;
    let lnf_shift = &params.set.tensors[layer_base(cfg.n_layers) + 1].data;
    let mut lnf_xhat = Vec::new();
    let mut lnf_rstd = Vec::new();
    let mut lnf_out = Vec::new();
    layer_norm_fwd(&h, lnf_scale, lnf_shift, seq, d, &mut lnf_xhat, &mut lnf_rstd, &mut lnf_out);

    let head = if cfg.tie_embeddings {
        &params.t(IDX_TOK_EMB).data
    } else {
        &params.set.tensors[layer_base(cfg.n_layers) + 2].data
    };
    for t in 0..seq {
        let out = &mut logits_data[(row * cols + t) * cfg.vocab_size..(row * cols + t + 1) * cfg.vocab_size];
        let xr = &lnf_out[t * d..(t + 1) * d];
        for o in 0..cfg.vocab_size {
            out[o] = dot(xr, &head[o * d..(o + 1) * d]);
        }
    }

    Ok(RowCache {
        len: seq,
        layers,
        lnf_xhat,
        lnf_rstd,
        lnf_out,
    })
}

/// Mean negative log-likelihood over masked targets.
///
/// Targets are the ids shifted left by one: the logits at position `t` are
/// scored against the token at `t + 1`, and that term is included when
/// `mask[t + 1] == 1`. Returns the loss and the masked target count.
pub fn nll_loss(logits: &Logits, batch: &Batch) -> Result<(f64, usize), ModelError> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for r in 0..batch.rows {
        let len = batch.lengths[r];
        for t in 0..len.saturating_sub(1) {
            if batch.mask[r * batch.cols + t + 1] != 1 {
                continue;
            }
            let target = batch.ids[r * batch.cols + t + 1] as usize;
            let row = logits.at(r, t);
            let mx = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let lse: f32 = row.iter().map(|&v| (v - mx).exp()).sum::<f32>().ln() + mx;
            total += (lse - row[target]) as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(ModelError::AllMasked);
    }
    Ok((total / count as f64, count))
}

/// Backward pass. Consumes nothing; the cache must come from a `forward`
/// call on the same batch. Gradients of masked-out positions are zero.
pub fn backward(
    params: &ModelParams,
    logits: &Logits,
    cache: &ForwardCache,
    batch: &Batch,
) -> Result<Gradients, ModelError> {
    if cache.ids != batch.ids || cache.rows.len() != batch.rows {
        return Err(ModelError::CacheMismatch);
    }
    let count = batch
        .lengths
        .iter()
        .enumerate()
        .map(|(r, &len)| {
            (0..len.saturating_sub(1))
                .filter(|&t| batch.mask[r * batch.cols + t + 1] == 1)
                .count()
        })
        .sum::<usize>();
    if count == 0 {
        return Err(ModelError::AllMasked);
    }
    let inv_count = 1.0f32 / count as f32;

    let mut grads = params.set.zeros_like();
    for r in 0..batch.rows {
        backward_row(params, logits, cache, batch, r, inv_count, &mut grads);
    }
    Ok(grads)
}

#[allow(clippy::needless_range_loop)]
fn backward_row(
    params: &ModelParams,
    logits: &Logits,
    cache: &ForwardCache,
    batch: &Batch,
    r: usize,
    inv_count: f32,
    grads: &mut Gradients,
) {
    let cfg = &params.config;
    let d = cfg.d_model;
    let heads = cfg.n_heads;
    let hd = cfg.head_dim();
    let att_scale = 1.0 / (hd as f32).sqrt();
    let rc = &cache.rows[r];
    let seq = rc.len;
    let ids = batch.row_ids(r);

    // dlogits = (softmax - onehot) * mask / count, consumed immediately
    // against the (possibly tied) output head.
    let head_idx = if cfg.tie_embeddings {
        IDX_TOK_EMB
    } else {
        layer_base(cfg.n_layers) + 2
    };
    let head = &params.set.tensors[head_idx].data;
    let mut d_lnf_out = vec![0.0f32; seq * d];
    {
        let d_head = &mut grads.tensors[head_idx].data;
        let mut prob = vec![0.0f32; cfg.vocab_size];
        for t in 0..seq.saturating_sub(1) {
            if batch.mask[r * batch.cols + t + 1] != 1 {
                continue;
            }
            let target = batch.ids[r * batch.cols + t + 1] as usize;
            prob.copy_from_slice(logits.at(r, t));
            softmax_inplace(&mut prob);
            prob[target] -= 1.0;
            let xr = &rc.lnf_out[t * d..(t + 1) * d];
            let dxr = &mut d_lnf_out[t * d..(t + 1) * d];
            for o in 0..cfg.vocab_size {
                let g = prob[o] * inv_count;
                if g != 0.0 {
                    axpy(g, &head[o * d..(o + 1) * d], dxr);
                    axpy(g, xr, &mut d_head[o * d..(o + 1) * d]);
                }
            }
        }
    }

    // Final norm.
    let lnf_base = layer_base(cfg.n_layers);
    let mut dh = vec![0.0f32; seq * d];
    {
        let scale = &params.set.tensors[lnf_base].data;
        let (left, right) = grads.tensors.split_at_mut(lnf_base + 1);
        let d_scale = &mut left[lnf_base].data;
        let d_shift = &mut right[0].data;
        layer_norm_bwd(
            &d_lnf_out,
            &rc.lnf_xhat,
            &rc.lnf_rstd,
            scale,
            seq,
            d,
            d_scale,
            d_shift,
            &mut dh,
        );
    }

    for l in (0..cfg.n_layers).rev() {
        let base = layer_base(l);
        let lc = &rc.layers[l];
        let w_out = &params.t(base + OFF_FF_OUT).data;
        let w_in = &params.t(base + OFF_FF_IN).data;
        let ln2_scale = &params.t(base + OFF_LN2_SCALE).data;
        let wo = &params.t(base + OFF_WO).data;
        let wq = &params.t(base + OFF_WQ).data;
        let wk = &params.t(base + OFF_WK).data;
        let wv = &params.t(base + OFF_WV).data;
        let ln1_scale = &params.t(base + OFF_LN1_SCALE).data;

        // Feed-forward block: h = h_mid + W_out gelu(W_in ln2(h_mid)).
        let mut d_ff_act = vec![0.0f32; seq * cfg.d_ff];
        linear_bwd_input(&dh, w_out, seq, cfg.d_ff, d, &mut d_ff_act);
        linear_bwd_weight(&dh, &lc.ff_act, seq, cfg.d_ff, d, &mut grads.tensors[base + OFF_FF_OUT].data);
        let mut d_ff_pre = vec![0.0f32; seq * cfg.d_ff];
        for i in 0..seq * cfg.d_ff {
            d_ff_pre[i] = d_ff_act[i] * gelu_grad(lc.ff_pre[i]);
        }
        let mut d_ln2_out = vec![0.0f32; seq * d];
        linear_bwd_input(&d_ff_pre, w_in, seq, d, cfg.d_ff, &mut d_ln2_out);
        linear_bwd_weight(&d_ff_pre, &lc.ln2_out, seq, d, cfg.d_ff, &mut grads.tensors[base + OFF_FF_IN].data);
        {
            let (left, right) = grads.tensors.split_at_mut(base + OFF_LN2_SHIFT);
            layer_norm_bwd(
                &d_ln2_out,
                &lc.ln2_xhat,
                &lc.ln2_rstd,
                ln2_scale,
                seq,
                d,
                &mut left[base + OFF_LN2_SCALE].data,
                &mut right[0].data,
                &mut dh, // residual: gradient adds onto the skip path
            );
        }

        // Attention block: h_mid = h_in + Wo ctx.
        let mut d_ctx = vec![0.0f32; seq * d];
        linear_bwd_input(&dh, wo, seq, d, d, &mut d_ctx);
        linear_bwd_weight(&dh, &lc.ctx, seq, d, d, &mut grads.tensors[base + OFF_WO].data);

        let mut dq = vec![0.0f32; seq * d];
        let mut dk = vec![0.0f32; seq * d];
        let mut dv = vec![0.0f32; seq * d];
        let mut dp = vec![0.0f32; seq];
        for hix in 0..heads {
            let off = hix * hd;
            let pb = hix * seq * seq;
            for s in 0..seq {
                let d_ctx_row = &d_ctx[s * d + off..s * d + off + hd];
                let prow = &lc.probs[pb + s * seq..pb + s * seq + s + 1];
                // dv and dp from ctx = sum_t p[t] v[t]
                let mut dot_p_dp = 0.0f32;
                for t in 0..=s {
                    let vrow = &lc.v[t * d + off..t * d + off + hd];
                    dp[t] = dot(d_ctx_row, vrow);
                    axpy(prow[t], d_ctx_row, &mut dv[t * d + off..t * d + off + hd]);
                    dot_p_dp += prow[t] * dp[t];
                }
                // softmax backward, then scores -> q, k
                let qrow = &lc.q[s * d + off..s * d + off + hd];
                for t in 0..=s {
                    let ds = prow[t] * (dp[t] - dot_p_dp) * att_scale;
                    if ds != 0.0 {
                        axpy(ds, &lc.k[t * d + off..t * d + off + hd], &mut dq[s * d + off..s * d + off + hd]);
                        axpy(ds, qrow, &mut dk[t * d + off..t * d + off + hd]);
                    }
                }
            }
        }

        let mut d_ln1_out = vec![0.0f32; seq * d];
        linear_bwd_input(&dq, wq, seq, d, d, &mut d_ln1_out);
        linear_bwd_input(&dk, wk, seq, d, d, &mut d_ln1_out);
        linear_bwd_input(&dv, wv, seq, d, d, &mut d_ln1_out);
        linear_bwd_weight(&dq, &lc.ln1_out, seq, d, d, &mut grads.tensors[base + OFF_WQ].data);
        linear_bwd_weight(&dk, &lc.ln1_out, seq, d, d, &mut grads.tensors[base + OFF_WK].data);
        linear_bwd_weight(&dv, &lc.ln1_out, seq, d, d, &mut grads.tensors[base + OFF_WV].data);
        {
            let (left, right) = grads.tensors.split_at_mut(base + OFF_LN1_SHIFT);
            layer_norm_bwd(
                &d_ln1_out,
                &lc.ln1_xhat,
                &lc.ln1_rstd,
                ln1_scale,
                seq,
                d,
                &mut left[base + OFF_LN1_SCALE].data,
                &mut right[0].data,
                &mut dh,
            );
        }
    }

    // Embeddings.
    let (tok_slice, rest) = grads.tensors.split_at_mut(1);
    let d_tok = &mut tok_slice[0].data;
    let d_pos = &mut rest[0].data;
    for t in 0..seq {
        let g = &dh[t * d..(t + 1) * d];
        axpy(1.0, g, &mut d_tok[ids[t] as usize * d..(ids[t] as usize + 1) * d]);
        axpy(1.0, g, &mut d_pos[t * d..(t + 1) * d]);
    }
}

/// Greedy decoding: repeatedly append the argmax next token until a stop id
/// appears, `max_new` tokens were added, or the context window fills up.
pub fn generate_greedy(
    params: &ModelParams,
    prompt: &[u32],
    max_new: usize,
    stop_ids: &[u32],
) -> Result<Vec<u32>, ModelError> {
    assert!(!prompt.is_empty(), "prompt must be non-empty");
    let mut ids = prompt.to_vec();
    for _ in 0..max_new {
        if ids.len() >= params.config.max_seq_len {
            break;
        }
        let mask = vec![0u8; ids.len()];
        let batch = Batch::from_rows(&[(ids.clone(), mask)]);
        let (logits, _) = forward(params, &batch)?;
        let last = logits.at(0, ids.len() - 1);
        let mut best = 0usize;
        let mut best_v = f32::NEG_INFINITY;
        for (i, &v) in last.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        let next = best as u32;
        ids.push(next);
        if stop_ids.contains(&next) {
            break;
        }
    }
    Ok(ids)
}
