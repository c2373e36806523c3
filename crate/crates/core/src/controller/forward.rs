//! Taped forward passes of the decoders-controller.
//!
//! The projected query for modality X is a routed mixture of K expert
//! outputs, each expert being a transformer stack over the concatenated
//! modality-query and signal-prompt tokens:
//!
//! ```text
//! qbar   = sum_k w_k * expert_k([Q^X; M_e^X])     (first N rows)
//! w      = softmax(mlp(mean(M_e^X)))              (1 x K, on the simplex)
//! s      = T_e + alpha * mean(f_L(qbar))          (1 x D_c)
//! ```
//!
//! The two losses drive `cos(s, T_e) -> 1` (alignment) and
//! `cos(mean(qbar), E) -> 1` (reconstruction).

use std::collections::BTreeMap;

use super::config::ControllerConfig;
use super::params::ControllerParams;
use crate::numerics::{Graph, NumericsError, Tensor, Var};
use crate::template::Modality;

/// Graph handles to one expert layer's tensors.
#[derive(Debug, Clone, Copy)]
pub struct ExpertLayerVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ffn_w1: Var,
    pub ffn_w2: Var,
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
}

/// Graph handles to every controller parameter, in schema order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub m_queries: BTreeMap<Modality, Var>,
    pub experts: Vec<Vec<ExpertLayerVars>>,
    pub router_hidden: Var,
    pub router_out: Var,
    pub fusion: BTreeMap<Modality, Var>,
}

impl ParamVars {
    /// Rebuild the structured view from vars laid out in schema order.
    pub fn from_ordered(config: &ControllerConfig, vars: &[Var]) -> Self {
        let mut it = vars.iter().copied();
        let mut m_queries = BTreeMap::new();
        for m in Modality::ALL {
            m_queries.insert(m, it.next().expect("m_query var"));
        }
        let mut experts = Vec::with_capacity(config.k);
        for _ in 0..config.k {
            let mut layers = Vec::with_capacity(config.expert_layers);
            for _ in 0..config.expert_layers {
                layers.push(ExpertLayerVars {
                    wq: it.next().expect("wq"),
                    wk: it.next().expect("wk"),
                    wv: it.next().expect("wv"),
                    wo: it.next().expect("wo"),
                    ffn_w1: it.next().expect("ffn_w1"),
                    ffn_w2: it.next().expect("ffn_w2"),
                    ln1_gain: it.next().expect("ln1_gain"),
                    ln1_bias: it.next().expect("ln1_bias"),
                    ln2_gain: it.next().expect("ln2_gain"),
                    ln2_bias: it.next().expect("ln2_bias"),
                });
            }
            experts.push(layers);
        }
        let router_hidden = it.next().expect("router.hidden");
        let router_out = it.next().expect("router.out");
        let mut fusion = BTreeMap::new();
        for m in Modality::ALL {
            fusion.insert(m, it.next().expect("fusion var"));
        }
        assert!(it.next().is_none(), "extra parameter vars");
        ParamVars {
            m_queries,
            experts,
            router_hidden,
            router_out,
            fusion,
        }
    }

    /// Insert every parameter into the graph (trainable or frozen) and
    /// return the structured handle view.
    pub fn insert(
        graph: &mut Graph,
        config: &ControllerConfig,
        params: &ControllerParams,
        trainable: bool,
    ) -> Self {
        let vars: Vec<Var> = params
            .named()
            .into_iter()
            .map(|(_, t)| {
                if trainable {
                    graph.leaf(t.clone())
                } else {
                    graph.constant(t.clone())
                }
            })
            .collect();
        Self::from_ordered(config, &vars)
    }
}

/// One projection expert over the concatenated `[Q^X; M_e^X]` rows:
/// per layer, pre-norm single-head self-attention and a pre-norm tanh
/// FFN, both residual. Returns the first `n` rows (the projected query).
pub fn expert_forward(
    graph: &mut Graph,
    layers: &[ExpertLayerVars],
    q: Var,
    m_e: Var,
    n: usize,
    d: usize,
) -> Result<Var, NumericsError> {
    let mut h = graph.concat_rows(q, m_e)?;
    let scale = 1.0 / (d as f64).sqrt();
    for layer in layers {
        let normed = graph.layer_norm(h, layer.ln1_gain, layer.ln1_bias)?;
        let qh = graph.matmul(normed, layer.wq)?;
        let kh = graph.matmul(normed, layer.wk)?;
        let vh = graph.matmul(normed, layer.wv)?;
        let kt = graph.transpose(kh);
        let scores = graph.matmul(qh, kt)?;
        let scaled = graph.scale(scores, scale);
        let attn = graph.softmax_rows(scaled);
        let ctx = graph.matmul(attn, vh)?;
        let proj = graph.matmul(ctx, layer.wo)?;
        h = graph.add(h, proj)?;
        let normed2 = graph.layer_norm(h, layer.ln2_gain, layer.ln2_bias)?;
        let f1 = graph.matmul(normed2, layer.ffn_w1)?;
        let f1a = graph.tanh(f1);
        let f2 = graph.matmul(f1a, layer.ffn_w2)?;
        h = graph.add(h, f2)?;
    }
    graph.take_rows(h, n)
}

/// Routing weights for the K experts: mean-pool the signal-prompt
/// embedding, apply the two-layer MLP, softmax onto the simplex.
pub fn router_forward(
    graph: &mut Graph,
    vars: &ParamVars,
    m_e: Var,
) -> Result<Var, NumericsError> {
    let pooled = graph.mean_rows(m_e);
    let hidden = graph.matmul(pooled, vars.router_hidden)?;
    let activated = graph.tanh(hidden);
    let logits = graph.matmul(activated, vars.router_out)?;
    Ok(graph.softmax_rows(logits))
}

/// The routed mixture `sum_k w_k * expert_k(Q^X, M_e^X)`.
/// Returns the projected query and the routing weights.
pub fn udp_forward(
    graph: &mut Graph,
    vars: &ParamVars,
    config: &ControllerConfig,
    modality: Modality,
    m_e: Var,
) -> Result<(Var, Var), NumericsError> {
    let q = vars.m_queries[&modality];
    let n = config.n_for(modality);
    let weights = router_forward(graph, vars, m_e)?;
    let mut mix: Option<Var> = None;
    for (k, layers) in vars.experts.iter().enumerate() {
        let out = expert_forward(graph, layers, q, m_e, n, config.d)?;
        let weighted = graph.scale_by_entry(out, weights, k)?;
        mix = Some(match mix {
            None => weighted,
            Some(acc) => graph.add(acc, weighted)?,
        });
    }
    Ok((mix.expect("K >= 1"), weights))
}

/// Fuse the text-encoder embedding with the projected query:
/// `s = t_e + alpha * mean(qbar . f_L)`.
pub fn tmf_forward(
    graph: &mut Graph,
    vars: &ParamVars,
    config: &ControllerConfig,
    modality: Modality,
    t_e: Var,
    qbar: Var,
) -> Result<Var, NumericsError> {
    let projected = graph.matmul(qbar, vars.fusion[&modality])?;
    let pooled = graph.mean_rows(projected);
    let scaled = graph.scale(pooled, config.alpha);
    graph.add(t_e, scaled)
}

/// `1 - cos(s, t_e)`, in [0, 2]. Also returns the cosine node.
pub fn alignment_loss(graph: &mut Graph, s: Var, t_e: Var) -> Result<(Var, Var), NumericsError> {
    let cos = graph.cosine(s, t_e)?;
    Ok((graph.one_minus(cos), cos))
}

/// `1 - cos(mean(qbar), e)`; keeps the projected query anchored to the
/// input-side encoder embedding so it cannot collapse toward zero.
pub fn reconstruction_loss(
    graph: &mut Graph,
    qbar: Var,
    e: Var,
) -> Result<(Var, Var), NumericsError> {
    let pooled = graph.mean_rows(qbar);
    let cos = graph.cosine(pooled, e)?;
    Ok((graph.one_minus(cos), cos))
}

/// One training example: the frozen signal-prompt embedding, frozen
/// text-encoder target, and frozen input-side encoder embedding for one
/// answer group.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub modality: Modality,
    /// L x D
    pub m_e: Tensor,
    /// 1 x D_c
    pub t_e: Tensor,
    /// 1 x D
    pub e: Tensor,
}

/// Loss node plus per-batch diagnostics (plain numbers read off the
/// forward values).
#[derive(Debug)]
pub struct BatchOutputs {
    pub loss: Var,
    pub loss_align: f64,
    pub loss_recon: f64,
    pub mean_cos_align: f64,
    pub mean_cos_recon: f64,
}

/// Mean over the batch of `align + lambda_recon * recon`.
pub fn batch_loss(
    graph: &mut Graph,
    vars: &ParamVars,
    config: &ControllerConfig,
    items: &[BatchItem],
) -> Result<BatchOutputs, NumericsError> {
    if items.is_empty() {
        return Err(NumericsError::ShapeMismatch {
            op: "batch_loss",
            lhs: (0, 0),
            rhs: (1, 1),
        });
    }
    let mut total: Option<Var> = None;
    let mut align_sum = 0.0;
    let mut recon_sum = 0.0;
    let mut cos_align_sum = 0.0;
    let mut cos_recon_sum = 0.0;
    for item in items {
        let m_e = graph.constant(item.m_e.clone());
        let t_e = graph.constant(item.t_e.clone());
        let e = graph.constant(item.e.clone());
        let (qbar, _w) = udp_forward(graph, vars, config, item.modality, m_e)?;
        let s = tmf_forward(graph, vars, config, item.modality, t_e, qbar)?;
        let (align, cos_a) = alignment_loss(graph, s, t_e)?;
        let (recon, cos_r) = reconstruction_loss(graph, qbar, e)?;
        let weighted = graph.scale(recon, config.lambda_recon);
        let item_loss = graph.add(align, weighted)?;
        total = Some(match total {
            None => item_loss,
            Some(acc) => graph.add(acc, item_loss)?,
        });
        align_sum += graph.value(align).item();
        recon_sum += graph.value(recon).item();
        cos_align_sum += graph.value(cos_a).item();
        cos_recon_sum += graph.value(cos_r).item();
    }
    let count = items.len() as f64;
    let loss = graph.scale(total.expect("non-empty batch"), 1.0 / count);
    Ok(BatchOutputs {
        loss,
        loss_align: align_sum / count,
        loss_recon: recon_sum / count,
        mean_cos_align: cos_align_sum / count,
        mean_cos_recon: cos_recon_sum / count,
    })
}
