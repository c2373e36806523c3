//! Trainable state of the decoders-controller.
//!
//! Parameter tensors have stable dotted names ("expert.0.layer.0.wq",
//! "m_query.IMAGE", ...) used for checkpointing, optimizer state
//! alignment, and gradient-check reporting. Name order is fixed by the
//! traversal in [`ControllerParams::named`].

use std::collections::BTreeMap;

use thiserror::Error;

use super::config::ControllerConfig;
use crate::numerics::Tensor;
use crate::rng::Rng;
use crate::template::Modality;

/// One transformer layer of a projection expert: single-head attention
/// and a tanh FFN, each behind a pre-norm and a residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertLayer {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ffn_w1: Tensor,
    pub ffn_w2: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

impl ExpertLayer {
    const FIELDS: [&'static str; 10] = [
        "wq", "wk", "wv", "wo", "ffn_w1", "ffn_w2", "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias",
    ];

    fn field(&self, name: &str) -> &Tensor {
        match name {
            "wq" => &self.wq,
            "wk" => &self.wk,
            "wv" => &self.wv,
            "wo" => &self.wo,
            "ffn_w1" => &self.ffn_w1,
            "ffn_w2" => &self.ffn_w2,
            "ln1_gain" => &self.ln1_gain,
            "ln1_bias" => &self.ln1_bias,
            "ln2_gain" => &self.ln2_gain,
            "ln2_bias" => &self.ln2_bias,
            _ => unreachable!("unknown expert field {name}"),
        }
    }

    fn field_mut(&mut self, name: &str) -> &mut Tensor {
        match name {
            "wq" => &mut self.wq,
            "wk" => &mut self.wk,
            "wv" => &mut self.wv,
            "wo" => &mut self.wo,
            "ffn_w1" => &mut self.ffn_w1,
            "ffn_w2" => &mut self.ffn_w2,
            "ln1_gain" => &mut self.ln1_gain,
            "ln1_bias" => &mut self.ln1_bias,
            "ln2_gain" => &mut self.ln2_gain,
            "ln2_bias" => &mut self.ln2_bias,
            _ => unreachable!("unknown expert field {name}"),
        }
    }
}

/// Two-layer routing MLP with tanh between, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterParams {
    /// D x router_hidden
    pub hidden: Tensor,
    /// router_hidden x K
    pub out: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    /// Learnable per-modality query tokens, N^X x D.
    pub m_queries: BTreeMap<Modality, Tensor>,
    /// K projection experts, each a stack of transformer layers.
    pub experts: Vec<Vec<ExpertLayer>>,
    pub router: RouterParams,
    /// Per-modality fusion linear, D x D_c.
    pub fusion: BTreeMap<Modality, Tensor>,
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("tensor `{name}`: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    DimMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("missing tensor `{name}`")]
    Missing { name: String },
    #[error("unexpected tensor `{name}`")]
    Unexpected { name: String },
}

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for a weight matrix;
/// fan_in is the input width, i.e. the row count of `rows x cols`.
fn uniform_init(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-bound, bound))
        .collect();
    Tensor::new(rows, cols, data).expect("init shape")
}

fn normal_init(rng: &mut Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Tensor::new(rows, cols, data).expect("init shape")
}

impl ControllerParams {
    /// Expected shape of each named tensor under `config`, in canonical
    /// name order.
    pub fn schema(config: &ControllerConfig) -> Vec<(String, (usize, usize))> {
        let d = config.d;
        let mut out = Vec::new();
        for m in Modality::ALL {
            out.push((format!("m_query.{m}"), (config.n_for(m), d)));
        }
        for k in 0..config.k {
            for layer in 0..config.expert_layers {
                for field in ExpertLayer::FIELDS {
                    let shape = match field {
                        "wq" | "wk" | "wv" | "wo" => (d, d),
                        "ffn_w1" => (d, 4 * d),
                        "ffn_w2" => (4 * d, d),
                        _ => (1, d),
                    };
                    out.push((format!("expert.{k}.layer.{layer}.{field}"), shape));
                }
            }
        }
        out.push(("router.hidden".into(), (d, config.router_hidden)));
        out.push(("router.out".into(), (config.router_hidden, config.k)));
        for m in Modality::ALL {
            out.push((format!("fusion.{m}"), (d, config.d_c)));
        }
        out
    }

    /// Fresh parameters. Each tensor draws from its own named substream
    /// of `rng`, so the init is independent of traversal order. Weight
    /// matrices are uniform in +/- 1/sqrt(fan_in); modality queries are
    /// normal with std 0.02; layer-norm gains start at 1 and biases at 0.
    pub fn init(config: &ControllerConfig, rng: &Rng) -> Self {
        let build = |name: String, shape: (usize, usize)| -> Tensor {
            let mut sub = rng.substream(&format!("init:{name}"));
            if name.starts_with("m_query.") {
                normal_init(&mut sub, shape.0, shape.1, 0.02)
            } else if name.ends_with("gain") {
                Tensor::filled(shape.0, shape.1, 1.0)
            } else if name.ends_with("bias") {
                Tensor::zeros(shape.0, shape.1)
            } else if name.ends_with(".wo") || name.ends_with(".ffn_w2") {
                // Residual-branch output projections start damped so the
                // residual stream is query-dominated early in training.
                uniform_init(&mut sub, shape.0, shape.1).scaled(0.25)
            } else {
                uniform_init(&mut sub, shape.0, shape.1)
            }
        };
        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        for (name, shape) in Self::schema(config) {
            tensors.insert(name.clone(), build(name, shape));
        }
        Self::from_named(config, tensors).expect("schema-generated tensors")
    }

    /// Assemble from named tensors, validating shapes against `config`.
    pub fn from_named(
        config: &ControllerConfig,
        mut tensors: BTreeMap<String, Tensor>,
    ) -> Result<Self, ParamsError> {
        let mut take = |name: &str, expected: (usize, usize)| -> Result<Tensor, ParamsError> {
            let t = tensors
                .remove(name)
                .ok_or_else(|| ParamsError::Missing { name: name.into() })?;
            if t.shape() != expected {
                return Err(ParamsError::DimMismatch {
                    name: name.into(),
                    expected,
                    found: t.shape(),
                });
            }
            Ok(t)
        };

        let mut m_queries = BTreeMap::new();
        let mut fusion = BTreeMap::new();
        let mut experts = Vec::with_capacity(config.k);
        let mut router = RouterParams {
            hidden: Tensor::zeros(1, 1),
            out: Tensor::zeros(1, 1),
        };
        for (name, shape) in Self::schema(config) {
            let t = take(&name, shape)?;
            if let Some(m) = name.strip_prefix("m_query.") {
                m_queries.insert(Modality::from_name(m).unwrap(), t);
            } else if let Some(m) = name.strip_prefix("fusion.") {
                fusion.insert(Modality::from_name(m).unwrap(), t);
            } else if name == "router.hidden" {
                router.hidden = t;
            } else if name == "router.out" {
                router.out = t;
            } else {
                // expert.{k}.layer.{l}.{field}
                let rest = name.strip_prefix("expert.").unwrap();
                let (k, rest) = rest.split_once(".layer.").unwrap();
                let (layer, field) = rest.split_once('.').unwrap();
                let k: usize = k.parse().unwrap();
                let layer: usize = layer.parse().unwrap();
                if experts.len() <= k {
                    experts.push(Vec::with_capacity(config.expert_layers));
                }
                let zero = ExpertLayer {
                    wq: Tensor::zeros(1, 1),
                    wk: Tensor::zeros(1, 1),
                    wv: Tensor::zeros(1, 1),
                    wo: Tensor::zeros(1, 1),
                    ffn_w1: Tensor::zeros(1, 1),
                    ffn_w2: Tensor::zeros(1, 1),
                    ln1_gain: Tensor::zeros(1, 1),
                    ln1_bias: Tensor::zeros(1, 1),
                    ln2_gain: Tensor::zeros(1, 1),
                    ln2_bias: Tensor::zeros(1, 1),
                };
                if experts[k].len() <= layer {
                    experts[k].push(zero);
                }
                *experts[k][layer].field_mut(field) = t;
            }
        }
        if let Some(name) = tensors.keys().next() {
            return Err(ParamsError::Unexpected { name: name.clone() });
        }
        Ok(ControllerParams {
            m_queries,
            experts,
            router,
            fusion,
        })
    }

    /// Tensors in canonical name order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (m, t) in &self.m_queries {
            out.push((format!("m_query.{m}"), t));
        }
        for (k, layers) in self.experts.iter().enumerate() {
            for (l, layer) in layers.iter().enumerate() {
                for field in ExpertLayer::FIELDS {
                    out.push((format!("expert.{k}.layer.{l}.{field}"), layer.field(field)));
                }
            }
        }
        out.push(("router.hidden".into(), &self.router.hidden));
        out.push(("router.out".into(), &self.router.out));
        for (m, t) in &self.fusion {
            out.push((format!("fusion.{m}"), t));
        }
        out
    }

    /// Mutable view in the same order as [`Self::named`].
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (m, t) in &mut self.m_queries {
            out.push((format!("m_query.{m}"), t));
        }
        for (k, layers) in self.experts.iter_mut().enumerate() {
            for (l, layer) in layers.iter_mut().enumerate() {
                out.push((format!("expert.{k}.layer.{l}.wq"), &mut layer.wq));
                out.push((format!("expert.{k}.layer.{l}.wk"), &mut layer.wk));
                out.push((format!("expert.{k}.layer.{l}.wv"), &mut layer.wv));
                out.push((format!("expert.{k}.layer.{l}.wo"), &mut layer.wo));
                out.push((format!("expert.{k}.layer.{l}.ffn_w1"), &mut layer.ffn_w1));
                out.push((format!("expert.{k}.layer.{l}.ffn_w2"), &mut layer.ffn_w2));
                out.push((format!("expert.{k}.layer.{l}.ln1_gain"), &mut layer.ln1_gain));
                out.push((format!("expert.{k}.layer.{l}.ln1_bias"), &mut layer.ln1_bias));
                out.push((format!("expert.{k}.layer.{l}.ln2_gain"), &mut layer.ln2_gain));
                out.push((format!("expert.{k}.layer.{l}.ln2_bias"), &mut layer.ln2_bias));
            }
        }
        out.push(("router.hidden".into(), &mut self.router.hidden));
        out.push(("router.out".into(), &mut self.router.out));
        for (m, t) in &mut self.fusion {
            out.push((format!("fusion.{m}"), t));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }
}
