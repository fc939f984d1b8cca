//! Test-only reference implementation of the model's loss in f64.
//!
//! Written independently of the production forward pass (plain nested loops,
//! no shared kernels) so it can serve as the finite-difference oracle for
//! the analytic gradients.

use plab_core::model::{Batch, ModelParams};

pub struct RefParams {
    pub tensors: Vec<Vec<f64>>,
    pub shapes: Vec<Vec<usize>>,
}

impl RefParams {
    pub fn from_model(params: &ModelParams) -> RefParams {
        RefParams {
            tensors: params
                .set
                .tensors
                .iter()
                .map(|t| t.data.iter().map(|&v| v as f64).collect())
                .collect(),
            shapes: params.set.tensors.iter().map(|t| t.shape.clone()).collect(),
        }
    }
}

fn layer_norm_ref(x: &[f64], scale: &[f64], shift: &[f64], d: usize) -> Vec<f64> {
    let seq = x.len() / d;
    let mut out = vec![0.0; x.len()];
    for s in 0..seq {
        let row = &x[s * d..(s + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + 1e-5).sqrt();
        for i in 0..d {
            out[s * d + i] = (row[i] - mean) * rstd * scale[i] + shift[i];
        }
    }
    out
}

fn matmul_ref(x: &[f64], w: &[f64], seq: usize, n_in: usize, n_out: usize) -> Vec<f64> {
    let mut y = vec![0.0; seq * n_out];
    for s in 0..seq {
        for o in 0..n_out {
            let mut acc = 0.0;
            for i in 0..n_in {
                acc += x[s * n_in + i] * w[o * n_in + i];
            }
            y[s * n_out + o] = acc;
        }
    }
    y
}

fn gelu_ref(x: f64) -> f64 {
    let c = 0.797_884_56f32 as f64; // same constant the f32 path uses
    let a = 0.044_715f32 as f64;
    0.5 * x * (1.0 + (c * (x + a * x * x * x)).tanh())
}

/// Mean masked NLL of the batch under the reference forward pass.
pub fn ref_loss(rp: &RefParams, params: &ModelParams, batch: &Batch) -> f64 {
    let cfg = &params.config;
    let d = cfg.d_model;
    let heads = cfg.n_heads;
    let hd = d / heads;
    let n_layers = cfg.n_layers;
    let tok_emb = &rp.tensors[0];
    let pos_emb = &rp.tensors[1];
    let layer = |l: usize, off: usize| -> &Vec<f64> { &rp.tensors[2 + l * 10 + off] };
    let lnf_scale = &rp.tensors[2 + n_layers * 10];
    let lnf_shift = &rp.tensors[2 + n_layers * 10 + 1];
    let head = if cfg.tie_embeddings {
        tok_emb
    } else {
        &rp.tensors[2 + n_layers * 10 + 2]
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..batch.rows {
        let seq = batch.lengths[r];
        let ids = &batch.ids[r * batch.cols..r * batch.cols + seq];

        let mut h = vec![0.0f64; seq * d];
        for t in 0..seq {
            for i in 0..d {
                h[t * d + i] = tok_emb[ids[t] as usize * d + i] + pos_emb[t * d + i];
            }
        }

        for l in 0..n_layers {
            let ln1 = layer_norm_ref(&h, layer(l, 0), layer(l, 1), d);
            let q = matmul_ref(&ln1, layer(l, 2), seq, d, d);
            let k = matmul_ref(&ln1, layer(l, 3), seq, d, d);
            let v = matmul_ref(&ln1, layer(l, 4), seq, d, d);
            let mut ctx = vec![0.0f64; seq * d];
            for hh in 0..heads {
                let off = hh * hd;
                for s in 0..seq {
                    let mut scores = vec![0.0f64; s + 1];
                    for (t, sc) in scores.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for i in 0..hd {
                            acc += q[s * d + off + i] * k[t * d + off + i];
                        }
                        *sc = acc / (hd as f64).sqrt();
                    }
                    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut den = 0.0;
                    for sc in scores.iter_mut() {
                        *sc = (*sc - mx).exp();
                        den += *sc;
                    }
                    for (t, sc) in scores.iter().enumerate() {
                        let p = sc / den;
                        for i in 0..hd {
                            ctx[s * d + off + i] += p * v[t * d + off + i];
                        }
                    }
                }
            }
            let attn_out = matmul_ref(&ctx, layer(l, 5), seq, d, d);
            for i in 0..seq * d {
                h[i] += attn_out[i];
            }
            let ln2 = layer_norm_ref(&h, layer(l, 6), layer(l, 7), d);
            let pre = matmul_ref(&ln2, layer(l, 8), seq, d, cfg.d_ff);
            let act: Vec<f64> = pre.iter().map(|&x| gelu_ref(x)).collect();
            let ff_out = matmul_ref(&act, layer(l, 9), seq, cfg.d_ff, d);
            for i in 0..seq * d {
                h[i] += ff_out[i];
            }
        }

        let hf = layer_norm_ref(&h, lnf_scale, lnf_shift, d);
        for t in 0..seq.saturating_sub(1) {
            if batch.mask[r * batch.cols + t + 1] != 1 {
                continue;
            }
            let target = batch.ids[r * batch.cols + t + 1] as usize;
            let mut logits = vec![0.0f64; cfg.vocab_size];
            for (o, lg) in logits.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += hf[t * d + i] * head[o * d + i];
                }
                *lg = acc;
            }
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = logits.iter().map(|&v| (v - mx).exp()).sum::<f64>().ln() + mx;
            total += lse - logits[target];
            count += 1;
        }
    }
    total / count as f64
}

/// Central finite difference of `ref_loss` along one parameter coordinate.
pub fn central_diff(
    rp: &mut RefParams,
    params: &ModelParams,
    batch: &Batch,
    tensor: usize,
    elem: usize,
    h: f64,
) -> f64 {
    let base = rp.tensors[tensor][elem];
    rp.tensors[tensor][elem] = base + h;
    let up = ref_loss(rp, params, batch);
    rp.tensors[tensor][elem] = base - h;
    let down = ref_loss(rp, params, batch);
    rp.tensors[tensor][elem] = base;
    (up - down) / (2.0 * h)
}
