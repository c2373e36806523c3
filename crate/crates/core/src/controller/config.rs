//! Controller hyperparameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::Modality;

/// All knobs of the decoders-controller.
///
/// Serialized field names are the symbol names used throughout the
/// project: `D` (LLM hidden width), `D_c` (decoder conditioning width),
/// `K` (projection experts), `N` (modality-query tokens per modality),
/// `L` (signal-prompt tokens), `alpha` (fusion weight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    #[serde(rename = "D", default = "default_d")]
    pub d: usize,
    #[serde(rename = "D_c", default = "default_d_c")]
    pub d_c: usize,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    /// Query-token count per modality; missing modalities default to 1.
    #[serde(rename = "N", default)]
    pub n: BTreeMap<Modality, usize>,
    #[serde(rename = "L", default = "default_l")]
    pub l: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_expert_layers")]
    pub expert_layers: usize,
    #[serde(default = "default_router_hidden")]
    pub router_hidden: usize,
    #[serde(default = "default_lambda_recon")]
    pub lambda_recon: f64,
}

fn default_d() -> usize {
    64
}
fn default_d_c() -> usize {
    32
}
fn default_k() -> usize {
    2
}
fn default_l() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.2
}
fn default_expert_layers() -> usize {
    1
}
fn default_router_hidden() -> usize {
    32
}
fn default_lambda_recon() -> f64 {
    1.0
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            d: default_d(),
            d_c: default_d_c(),
            k: default_k(),
            n: BTreeMap::new(),
            l: default_l(),
            alpha: default_alpha(),
            expert_layers: default_expert_layers(),
            router_hidden: default_router_hidden(),
            lambda_recon: default_lambda_recon(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{field} must be at least 1")]
    ZeroDim { field: &'static str },
    #[error("{field} must be non-negative")]
    Negative { field: &'static str },
}

impl ControllerConfig {
    /// Query-token count for a modality (defaults to 1).
    pub fn n_for(&self, modality: Modality) -> usize {
        self.n.get(&modality).copied().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("D", self.d),
            ("D_c", self.d_c),
            ("K", self.k),
            ("L", self.l),
            ("expert_layers", self.expert_layers),
            ("router_hidden", self.router_hidden),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroDim { field });
            }
        }
        for (&m, &v) in &self.n {
            if v == 0 {
                let _ = m;
                return Err(ConfigError::ZeroDim { field: "N" });
            }
        }
        if self.alpha < 0.0 {
            return Err(ConfigError::Negative { field: "alpha" });
        }
        if self.lambda_recon < 0.0 {
            return Err(ConfigError::Negative {
                field: "lambda_recon",
            });
        }
        Ok(())
    }
}
