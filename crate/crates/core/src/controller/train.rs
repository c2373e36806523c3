//! The controller object: owns config + parameters, runs training steps,
//! frozen-parameter inference, and the whole-graph gradient check.

use thiserror::Error;

use super::config::{ConfigError, ControllerConfig};
use super::forward::{self, BatchItem, ParamVars};
use super::params::ControllerParams;
use crate::numerics::gradcheck::{self, GradCheckReport};
use crate::numerics::{AdamState, Graph, NumericsError, Tensor};
use crate::rng::Rng;
use crate::template::Modality;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch item {index}: {what} is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    ItemShape {
        index: usize,
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Diagnostics of one optimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub loss_total: f64,
    pub loss_align: f64,
    pub loss_recon: f64,
    pub mean_cos_align: f64,
    pub mean_cos_recon: f64,
}

/// Output of a frozen-parameter forward pass for one group.
#[derive(Debug, Clone)]
pub struct GroupInference {
    /// Projected query, N x D.
    pub qbar: Tensor,
    /// Routing weights, 1 x K.
    pub weights: Tensor,
    /// Controlling embedding, 1 x D_c.
    pub s: Tensor,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControllerConfig,
    pub params: ControllerParams,
}

impl Controller {
    /// Fresh controller; the init stream is the `"init"` substream of a
    /// root generator seeded with `seed`.
    pub fn init(config: ControllerConfig, seed: u64) -> Result<Self, ControllerError> {
        config.validate()?;
        let rng = Rng::new(seed).substream("init");
        let params = ControllerParams::init(&config, &rng);
        Ok(Controller { config, params })
    }

    fn check_items(&self, items: &[BatchItem]) -> Result<(), ControllerError> {
        if items.is_empty() {
            return Err(ControllerError::EmptyBatch);
        }
        for (index, item) in items.iter().enumerate() {
            let checks = [
                ("m_e", item.m_e.shape(), (self.config.l, self.config.d)),
                ("t_e", item.t_e.shape(), (1, self.config.d_c)),
                ("e", item.e.shape(), (1, self.config.d)),
            ];
            for (what, found, expected) in checks {
                if found != expected {
                    return Err(ControllerError::ItemShape {
                        index,
                        what,
                        expected,
                        found,
                    });
                }
            }
        }
        Ok(())
    }

    /// Forward, backward, and one Adam update over all trainable
    /// parameters. The batch inputs are frozen constants and stay
    /// untouched.
    pub fn train_step(
        &mut self,
        items: &[BatchItem],
        adam: &mut AdamState,
    ) -> Result<StepStats, ControllerError> {
        self.check_items(items)?;
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &self.config, &self.params, true);
        let ordered: Vec<crate::numerics::Var> = {
            // insert() laid them out in schema order; re-derive that order.
            let mut g2 = Vec::new();
            let mut collect = |v: crate::numerics::Var| g2.push(v);
            for m in Modality::ALL {
                collect(vars.m_queries[&m]);
            }
            for layers in &vars.experts {
                for l in layers {
                    for v in [
                        l.wq, l.wk, l.wv, l.wo, l.ffn_w1, l.ffn_w2, l.ln1_gain, l.ln1_bias,
                        l.ln2_gain, l.ln2_bias,
                    ] {
                        collect(v);
                    }
                }
            }
            collect(vars.router_hidden);
            collect(vars.router_out);
            for m in Modality::ALL {
                collect(vars.fusion[&m]);
            }
            g2
        };
        let outputs = forward::batch_loss(&mut graph, &vars, &self.config, items)?;
        let loss_total = graph.value(outputs.loss).item();
        graph.backward(outputs.loss)?;
        let grads: Vec<Option<Tensor>> = ordered.iter().map(|v| graph.grad(*v).cloned()).collect();
        let mut named = self.params.named_mut();
        let mut refs: Vec<&mut Tensor> = named.iter_mut().map(|(_, t)| &mut **t).collect();
        adam.step(&mut refs, &grads)?;
        Ok(StepStats {
            loss_total,
            loss_align: outputs.loss_align,
            loss_recon: outputs.loss_recon,
            mean_cos_align: outputs.mean_cos_align,
            mean_cos_recon: outputs.mean_cos_recon,
        })
    }

    /// Loss and cosine diagnostics without touching the parameters.
    pub fn evaluate(&self, items: &[BatchItem]) -> Result<StepStats, ControllerError> {
        self.check_items(items)?;
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &self.config, &self.params, false);
        let outputs = forward::batch_loss(&mut graph, &vars, &self.config, items)?;
        Ok(StepStats {
            loss_total: graph.value(outputs.loss).item(),
            loss_align: outputs.loss_align,
            loss_recon: outputs.loss_recon,
            mean_cos_align: outputs.mean_cos_align,
            mean_cos_recon: outputs.mean_cos_recon,
        })
    }

    /// Frozen-parameter forward pass for one group: projected query,
    /// routing weights, and the controlling embedding.
    pub fn infer_group(
        &self,
        modality: Modality,
        m_e: &Tensor,
        t_e: &Tensor,
    ) -> Result<GroupInference, ControllerError> {
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &self.config, &self.params, false);
        let m_e_var = graph.constant(m_e.clone());
        let t_e_var = graph.constant(t_e.clone());
        let (qbar, weights) = forward::udp_forward(&mut graph, &vars, &self.config, modality, m_e_var)?;
        let s = forward::tmf_forward(&mut graph, &vars, &self.config, modality, t_e_var, qbar)?;
        Ok(GroupInference {
            qbar: graph.value(qbar).clone(),
            weights: graph.value(weights).clone(),
            s: graph.value(s).clone(),
        })
    }

    /// Routing weights alone (frozen parameters).
    pub fn route(&self, m_e: &Tensor) -> Result<Tensor, ControllerError> {
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &self.config, &self.params, false);
        let m_e_var = graph.constant(m_e.clone());
        let w = forward::router_forward(&mut graph, &vars, m_e_var)?;
        Ok(graph.value(w).clone())
    }

    /// Full-graph gradient check against central differences over the
    /// supplied batch. `corrupt` scales the first matmul backward rule
    /// by 1.1 to prove the oracle catches broken gradients.
    pub fn grad_check(
        &self,
        items: &[BatchItem],
        eps: f64,
        corrupt: bool,
    ) -> Result<GradCheckReport, ControllerError> {
        self.check_items(items)?;
        let named: Vec<(String, Tensor)> = self
            .params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        let config = self.config.clone();
        let items = items.to_vec();
        let mut first = corrupt;
        let report = gradcheck::check(&named, eps, {
            let config = config.clone();
            move |graph, vars| {
                if first {
                    graph.corrupt_first_matmul(1.1);
                    first = false;
                }
                let pv = ParamVars::from_ordered(&config, vars);
                let out = forward::batch_loss(graph, &pv, &config, &items)?;
                Ok(out.loss)
            }
        })?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ControllerConfig {
        ControllerConfig {
            d: 8,
            d_c: 4,
            k: 2,
            router_hidden: 6,
            ..ControllerConfig::default()
        }
    }

    fn random_items(config: &ControllerConfig, seed: u64, count: usize) -> Vec<BatchItem> {
        let mut rng = Rng::new(seed).substream("items");
        (0..count)
            .map(|i| {
                let modality = Modality::ALL[i % Modality::ALL.len()];
                let unit = |rng: &mut Rng, cols: usize| {
                    let data: Vec<f64> = (0..cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
                    Tensor::new(1, cols, data).unwrap().l2_normalized().unwrap()
                };
                BatchItem {
                    modality,
                    m_e: unit(&mut rng, config.d),
                    t_e: unit(&mut rng, config.d_c),
                    e: unit(&mut rng, config.d),
                }
            })
            .collect()
    }

    #[test]
    fn zero_weight_experts_pass_queries_through() {
        let config = tiny_config();
        let mut controller = Controller::init(config.clone(), 5).unwrap();
        for layers in &mut controller.params.experts {
            for layer in layers {
                for t in [
                    &mut layer.wq,
                    &mut layer.wk,
                    &mut layer.wv,
                    &mut layer.wo,
                    &mut layer.ffn_w1,
                    &mut layer.ffn_w2,
                ] {
                    *t = Tensor::zeros(t.rows(), t.cols());
                }
            }
        }
        let items = random_items(&config, 1, 1);
        let q = controller.params.m_queries[&items[0].modality].clone();

        // Residual-only experts reproduce the query rows exactly.
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &config, &controller.params, false);
        let qv = graph.constant(q.clone());
        let me = graph.constant(items[0].m_e.clone());
        for k in 0..config.k {
            let out = forward::expert_forward(
                &mut graph,
                &vars.experts[k],
                qv,
                me,
                config.n_for(items[0].modality),
                config.d,
            )
            .unwrap();
            assert_eq!(*graph.value(out), q, "expert {k}");
        }

        // The routed mixture of identical outputs re-sums the simplex
        // weights, so it matches up to one rounding step.
        let out = controller
            .infer_group(items[0].modality, &items[0].m_e, &items[0].t_e)
            .unwrap();
        for (a, b) in out.qbar.data().iter().zip(q.data()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn k1_mixture_equals_single_expert_output() {
        let config = ControllerConfig {
            k: 1,
            ..tiny_config()
        };
        let controller = Controller::init(config.clone(), 6).unwrap();
        let items = random_items(&config, 2, 1);
        let out = controller
            .infer_group(items[0].modality, &items[0].m_e, &items[0].t_e)
            .unwrap();
        assert_eq!(out.weights.data(), &[1.0]);

        // Recompute the lone expert by hand on a fresh graph.
        let mut graph = Graph::new();
        let vars = ParamVars::insert(&mut graph, &config, &controller.params, false);
        let q = graph.constant(controller.params.m_queries[&items[0].modality].clone());
        let me = graph.constant(items[0].m_e.clone());
        let solo = forward::expert_forward(
            &mut graph,
            &vars.experts[0],
            q,
            me,
            config.n_for(items[0].modality),
            config.d,
        )
        .unwrap();
        assert_eq!(out.qbar, *graph.value(solo));
    }

    #[test]
    fn mixture_is_componentwise_convex_combination() {
        let config = tiny_config();
        let controller = Controller::init(config.clone(), 7).unwrap();
        let items = random_items(&config, 3, 4);
        for item in &items {
            let out = controller.infer_group(item.modality, &item.m_e, &item.t_e).unwrap();
            // Expert outputs, recomputed individually.
            let mut graph = Graph::new();
            let vars = ParamVars::insert(&mut graph, &config, &controller.params, false);
            let q = graph.constant(controller.params.m_queries[&item.modality].clone());
            let me = graph.constant(item.m_e.clone());
            let per_expert: Vec<Tensor> = (0..config.k)
                .map(|k| {
                    let v = forward::expert_forward(
                        &mut graph,
                        &vars.experts[k],
                        q,
                        me,
                        config.n_for(item.modality),
                        config.d,
                    )
                    .unwrap();
                    graph.value(v).clone()
                })
                .collect();
            for i in 0..out.qbar.len() {
                let lo = per_expert
                    .iter()
                    .map(|t| t.data()[i])
                    .fold(f64::INFINITY, f64::min);
                let hi = per_expert
                    .iter()
                    .map(|t| t.data()[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let v = out.qbar.data()[i];
                assert!(
                    v >= lo - 1e-12 && v <= hi + 1e-12,
                    "component {i}: {v} outside [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn router_weights_live_on_the_simplex() {
        let config = tiny_config();
        let controller = Controller::init(config.clone(), 8).unwrap();
        let mut rng = Rng::new(44);
        for _ in 0..100 {
            let data: Vec<f64> = (0..config.d).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let m_e = Tensor::new(1, config.d, data).unwrap();
            let w = controller.route(&m_e).unwrap();
            assert!(w.data().iter().all(|&v| v > 0.0));
            let sum: f64 = w.data().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn zeroed_router_out_routes_uniformly() {
        let config = tiny_config();
        let mut controller = Controller::init(config.clone(), 9).unwrap();
        let rows = controller.params.router.out.rows();
        let cols = controller.params.router.out.cols();
        controller.params.router.out = Tensor::zeros(rows, cols);
        let items = random_items(&config, 4, 1);
        let w = controller.route(&items[0].m_e).unwrap();
        for &v in w.data() {
            assert!((v - 1.0 / config.k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_zero_fuses_to_exactly_t_e() {
        let config = ControllerConfig {
            alpha: 0.0,
            ..tiny_config()
        };
        let controller = Controller::init(config.clone(), 10).unwrap();
        let items = random_items(&config, 5, 3);
        for item in &items {
            let out = controller.infer_group(item.modality, &item.m_e, &item.t_e).unwrap();
            assert_eq!(out.s, item.t_e);
        }
    }

    #[test]
    fn tmf_direct_arithmetic() {
        // t_e = [1, 0], pooled projection = [0, 1], alpha = 0.2.
        let config = ControllerConfig {
            d: 2,
            d_c: 2,
            k: 1,
            router_hidden: 2,
            ..ControllerConfig::default()
        };
        let mut controller = Controller::init(config.clone(), 11).unwrap();
        // Zero the expert weights so qbar == m_query row.
        for layers in &mut controller.params.experts {
            for layer in layers {
                for t in [
                    &mut layer.wq,
                    &mut layer.wk,
                    &mut layer.wv,
                    &mut layer.wo,
                    &mut layer.ffn_w1,
                    &mut layer.ffn_w2,
                ] {
                    *t = Tensor::zeros(t.rows(), t.cols());
                }
            }
        }
        controller
            .params
            .m_queries
            .insert(Modality::Image, Tensor::row(&[1.0, 0.0]));
        // Fusion maps [1, 0] -> [0, 1].
        controller.params.fusion.insert(
            Modality::Image,
            Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(),
        );
        let m_e = Tensor::row(&[0.5, -0.5]);
        let t_e = Tensor::row(&[1.0, 0.0]);
        let out = controller.infer_group(Modality::Image, &m_e, &t_e).unwrap();
        assert_eq!(out.s.data(), &[1.0, 0.2]);
    }

    #[test]
    fn loss_values_are_forced_at_the_extremes() {
        let mut graph = Graph::new();
        let v = graph.constant(Tensor::row(&[0.6, 0.8]));
        let same = graph.constant(Tensor::row(&[0.6, 0.8]));
        let neg = graph.constant(Tensor::row(&[-0.6, -0.8]));
        let orth = graph.constant(Tensor::row(&[-0.8, 0.6]));
        let (l0, _) = forward::alignment_loss(&mut graph, v, same).unwrap();
        assert!(graph.value(l0).item().abs() < 1e-12);
        let (l1, _) = forward::alignment_loss(&mut graph, v, orth).unwrap();
        assert!((graph.value(l1).item() - 1.0).abs() < 1e-12);
        let (l2, _) = forward::alignment_loss(&mut graph, v, neg).unwrap();
        assert!((graph.value(l2).item() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_is_scale_invariant() {
        let mut graph = Graph::new();
        let qbar = graph.constant(Tensor::from_rows(&[vec![2.0, 4.0]]).unwrap());
        let e = graph.constant(Tensor::row(&[1.0, 2.0]));
        let (loss, _) = forward::reconstruction_loss(&mut graph, qbar, e).unwrap();
        assert!(graph.value(loss).item().abs() < 1e-12);
    }

    #[test]
    fn train_step_is_deterministic_and_leaves_inputs_alone() {
        let config = tiny_config();
        let items = random_items(&config, 12, 4);
        let snapshot = items.clone();
        let run = || {
            let mut c = Controller::init(config.clone(), 13).unwrap();
            let mut adam = AdamState::with_defaults();
            let mut items = items.clone();
            let mut stats = Vec::new();
            for _ in 0..5 {
                stats.push(c.train_step(&items, &mut adam).unwrap().loss_total);
            }
            // Frozen inputs must be untouched by training.
            for (a, b) in items.iter().zip(&snapshot) {
                assert_eq!(a.m_e, b.m_e);
                assert_eq!(a.t_e, b.t_e);
                assert_eq!(a.e, b.e);
            }
            items.clear();
            (c.params, stats)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(s1, s2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let config = tiny_config();
        let mut c = Controller::init(config, 14).unwrap();
        let mut adam = AdamState::with_defaults();
        assert!(matches!(
            c.train_step(&[], &mut adam),
            Err(ControllerError::EmptyBatch)
        ));
    }

    #[test]
    fn lambda_zero_reduces_to_alignment() {
        let config = ControllerConfig {
            lambda_recon: 0.0,
            ..tiny_config()
        };
        let c = Controller::init(config.clone(), 15).unwrap();
        let items = random_items(&config, 16, 3);
        let stats = c.evaluate(&items).unwrap();
        assert!((stats.loss_total - stats.loss_align).abs() < 1e-12);
        assert!(stats.loss_total >= 0.0 && stats.loss_total.is_finite());
    }

    #[test]
    fn full_graph_gradients_match_finite_differences() {
        let config = ControllerConfig {
            d: 6,
            d_c: 3,
            k: 2,
            router_hidden: 4,
            ..ControllerConfig::default()
        };
        let c = Controller::init(config.clone(), 17).unwrap();
        let items = random_items(&config, 18, 2);
        let report = c.grad_check(&items, 1e-5, false).unwrap();
        assert!(
            report.max_rel_err <= 1e-4,
            "rel err {} at {}",
            report.max_rel_err,
            report.worst_param
        );
    }

    #[test]
    fn corrupted_rule_fails_the_check() {
        let config = ControllerConfig {
            d: 6,
            d_c: 3,
            k: 2,
            router_hidden: 4,
            ..ControllerConfig::default()
        };
        let c = Controller::init(config.clone(), 19).unwrap();
        let items = random_items(&config, 20, 2);
        let report = c.grad_check(&items, 1e-5, true).unwrap();
        assert!(report.max_rel_err > 1e-2, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn gradcheck_verdict_is_stable_across_eps() {
        // The raw error magnitude tracks the eps^2 truncation term (so
        // it moves by ~100x between 1e-4 and 1e-5), but the verdict at
        // the 1e-4 threshold is identical for every probe step, in both
        // the clean and the corrupted graph.
        let config = ControllerConfig {
            d: 6,
            d_c: 3,
            k: 2,
            router_hidden: 4,
            ..ControllerConfig::default()
        };
        let c = Controller::init(config.clone(), 23).unwrap();
        let items = random_items(&config, 24, 2);
        for eps in [1e-4, 1e-5, 1e-6] {
            let clean = c.grad_check(&items, eps, false).unwrap();
            assert!(
                clean.max_rel_err <= 1e-4,
                "eps {eps}: clean graph at {}",
                clean.max_rel_err
            );
            let corrupt = c.grad_check(&items, eps, true).unwrap();
            assert!(
                corrupt.max_rel_err > 1e-2,
                "eps {eps}: corruption missed at {}",
                corrupt.max_rel_err
            );
        }
    }
}
