//! Central-difference gradient oracle.
//!
//! Rebuilds the forward pass twice per parameter entry with `+/- eps`
//! perturbations and compares the analytic tape gradient against the
//! numeric quotient. The oracle shares nothing with the backward pass it
//! verifies: it only calls the forward builder.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use super::NumericsError;

/// Default central-difference step.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Worst observed disagreement between analytic and numeric gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Name of the parameter holding the worst entry.
    pub worst_param: String,
    /// Flat index of the worst entry within that parameter.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Relative error with a floor so near-zero gradients do not blow up
/// the quotient on finite-difference noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4);
    (analytic - numeric).abs() / denom
}

/// Compare tape gradients against central differences.
///
/// `build` must construct the full forward graph from the given
/// parameter leaves (in order) and return the scalar loss variable. It is
/// called once for the analytic pass and `2 * total_entries` times for
/// the numeric one.
pub fn check<F>(
    params: &[(String, Tensor)],
    eps: f64,
    mut build: F,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    // Analytic gradients from one taped pass.
    let mut graph = Graph::new();
    let vars: Vec<Var> = params.iter().map(|(_, t)| graph.leaf(t.clone())).collect();
    let loss = build(&mut graph, &vars)?;
    graph.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(v, (_, t))| {
            graph
                .grad(*v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))
        })
        .collect();

    let eval = |perturbed: &[(String, Tensor)], build: &mut F| -> Result<f64, NumericsError> {
        let mut g = Graph::new();
        let vs: Vec<Var> = perturbed.iter().map(|(_, t)| g.constant(t.clone())).collect();
        let l = build(&mut g, &vs)?;
        Ok(g.value(l).item())
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut work: Vec<(String, Tensor)> = params.to_vec();
    for (pi, (name, _)) in params.iter().enumerate() {
        for i in 0..work[pi].1.len() {
            let orig = work[pi].1.data()[i];
            work[pi].1.data_mut()[i] = orig + eps;
            let plus = eval(&work, &mut build)?;
            work[pi].1.data_mut()[i] = orig - eps;
            let minus = eval(&work, &mut build)?;
            work[pi].1.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi].data()[i];
            let rel = relative_error(a, numeric);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
