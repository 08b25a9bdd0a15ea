//! Base neural point process: an RNN encodes the recent inter-arrival
//! history into a hidden state, and a monotone feed-forward network maps
//! (hidden state, elapsed time) to the cumulative hazard. The hazard is the
//! exact slope of that network, built as an explicit derivative graph, so
//! per-event log-likelihood terms `log hazard - cumulative hazard` are
//! differentiable end to end.
//!
//! Every numerical routine exists twice: as graph construction (for
//! training gradients) and as a plain-float path (for evaluation and
//! prediction). The two are written operation-for-operation alike and are
//! held together by bitwise equality tests.

use thiserror::Error;

use crate::diffgraph::{
    self, build_mlp, input_derivative, mlp_value_with_input_derivative, softplus, Activation,
    Graph, LayerSpec, LayerValues, MlpTrace, NodeId,
};
use crate::seqdata::EventSequence;

const LN_2: f64 = std::f64::consts::LN_2;

/// Architecture of the per-sequence networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NhpTopology {
    /// RNN hidden width.
    pub hidden: usize,
    /// Hidden widths of the cumulative-hazard network; may be empty for a
    /// single affine layer.
    pub hazard_hidden: Vec<usize>,
    /// Softplus on the output layer (the standard configuration). A linear
    /// output admits exactly constant hazards, used by oracle checks.
    pub hazard_softplus_output: bool,
    /// Number of descriptor entries concatenated to both network inputs
    /// (0 except for the descriptor-concatenation baseline).
    pub descriptor_inputs: usize,
}

impl Default for NhpTopology {
    fn default() -> Self {
        NhpTopology {
            hidden: 16,
            hazard_hidden: vec![16, 16],
            hazard_softplus_output: true,
            descriptor_inputs: 0,
        }
    }
}

impl NhpTopology {
    /// Inputs to one RNN step: the scalar inter-arrival plus any
    /// concatenated descriptor entries.
    pub fn rnn_inputs(&self) -> usize {
        1 + self.descriptor_inputs
    }

    pub fn rnn_param_count(&self) -> usize {
        self.rnn_inputs() * self.hidden + self.hidden * self.hidden + self.hidden
    }

    /// Hazard-network input layout: hidden state, then elapsed time, then
    /// descriptor entries.
    pub fn hazard_inputs(&self) -> usize {
        self.hidden + 1 + self.descriptor_inputs
    }

    /// Index of the elapsed-time input within the hazard-network inputs.
    pub fn tau_index(&self) -> usize {
        self.hidden
    }

    pub fn hazard_layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hazard_hidden.len() + 1);
        let mut prev = self.hazard_inputs();
        for &w in &self.hazard_hidden {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, 1));
        dims
    }

    pub fn hazard_activations(&self) -> Vec<Activation> {
        let mut acts = vec![Activation::Softplus; self.hazard_hidden.len()];
        acts.push(if self.hazard_softplus_output {
            Activation::Softplus
        } else {
            Activation::Linear
        });
        acts
    }

    pub fn hazard_param_count(&self) -> usize {
        self.hazard_layer_dims()
            .iter()
            .map(|(i, o)| i * o + o)
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum NhpError {
    #[error("non-finite likelihood term at event {event}")]
    NonFiniteTerm { event: usize },
    #[error("hazard {value} is not positive at event {event}")]
    NonPositiveHazard { event: usize, value: f64 },
    #[error("event index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Graph(#[from] diffgraph::GraphError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("cumulative hazard at zero already exceeds ln 2; no positive median")]
    NoRootAtZero,
    #[error("bracket expansion cap of {cap} doublings exceeded; hazard too small")]
    BracketCap { cap: usize },
    #[error("bisection did not reach tolerance within {max_iters} iterations")]
    NoConvergence { max_iters: usize },
    #[error("event index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// RNN weights. `input_weight[i * hidden + u]` connects input `i` (the
/// inter-arrival, then descriptor entries) to unit `u`;
/// `recurrent_weight[j * hidden + u]` connects previous unit `j` to `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnWeights {
    pub hidden: usize,
    pub extra_inputs: usize,
    pub input_weight: Vec<f64>,
    pub recurrent_weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl RnnWeights {
    pub fn zeros(hidden: usize, extra_inputs: usize) -> Self {
        RnnWeights {
            hidden,
            extra_inputs,
            input_weight: vec![0.0; (1 + extra_inputs) * hidden],
            recurrent_weight: vec![0.0; hidden * hidden],
            bias: vec![0.0; hidden],
        }
    }

    pub fn param_count(&self) -> usize {
        self.input_weight.len() + self.recurrent_weight.len() + self.bias.len()
    }

    /// Flat layout: input weights, recurrent weights, bias.
    pub fn from_flat(flat: &[f64], hidden: usize, extra_inputs: usize) -> Self {
        let n_in = (1 + extra_inputs) * hidden;
        let n_rec = hidden * hidden;
        assert_eq!(
            flat.len(),
            n_in + n_rec + hidden,
            "rnn weight count mismatch"
        );
        RnnWeights {
            hidden,
            extra_inputs,
            input_weight: flat[..n_in].to_vec(),
            recurrent_weight: flat[n_in..n_in + n_rec].to_vec(),
            bias: flat[n_in + n_rec..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.input_weight);
        out.extend_from_slice(&self.recurrent_weight);
        out.extend_from_slice(&self.bias);
        out
    }
}

/// One affine layer of the hazard network in raw (unconstrained) form.
/// Multiplicative weights pass through softplus before use, so the
/// effective network has strictly positive weights; biases are used as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardLayer {
    pub weight_raw: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Raw parameters of the monotone cumulative-hazard network.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardWeights {
    pub layers: Vec<HazardLayer>,
}

impl HazardWeights {
    pub fn zeros(topo: &NhpTopology) -> Self {
        let layers = topo
            .hazard_layer_dims()
            .into_iter()
            .map(|(i, o)| HazardLayer {
                weight_raw: vec![0.0; i * o],
                bias: vec![0.0; o],
                in_dim: i,
                out_dim: o,
            })
            .collect();
        HazardWeights { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight_raw.len() + l.bias.len())
            .sum()
    }

    /// Flat layout: per layer, weights then bias.
    pub fn from_flat(flat: &[f64], topo: &NhpTopology) -> Self {
        let mut layers = Vec::new();
        let mut pos = 0;
        for (i, o) in topo.hazard_layer_dims() {
            let w_end = pos + i * o;
            let b_end = w_end + o;
            assert!(flat.len() >= b_end, "hazard weight count mismatch");
            layers.push(HazardLayer {
                weight_raw: flat[pos..w_end].to_vec(),
                bias: flat[w_end..b_end].to_vec(),
                in_dim: i,
                out_dim: o,
            });
            pos = b_end;
        }
        assert_eq!(pos, flat.len(), "hazard weight count mismatch");
        HazardWeights { layers }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight_raw);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Positions within the flat layout that hold multiplicative weights
    /// (true) as opposed to biases (false).
    pub fn weight_mask(topo: &NhpTopology) -> Vec<bool> {
        let mut mask = Vec::new();
        for (i, o) in topo.hazard_layer_dims() {
            mask.extend(std::iter::repeat(true).take(i * o));
            mask.extend(std::iter::repeat(false).take(o));
        }
        mask
    }
}

/// RNN hidden state; entries live in (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub Vec<f64>);

impl HiddenState {
    pub fn zeros(hidden: usize) -> Self {
        HiddenState(vec![0.0; hidden])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// One RNN update: `h = tanh(tau * V + h_prev * U + b)` element-wise, with
/// optional descriptor entries as additional inputs.
///
/// Accumulation order (bias, inputs, recurrent) matches the graph builder;
/// when `h_prev` is exactly the zero state the recurrent terms are skipped,
/// as the builder does for the first fold step.
pub fn rnn_step_ext(
    tau: f64,
    descriptor: &[f64],
    h_prev: &HiddenState,
    w: &RnnWeights,
) -> HiddenState {
    assert_eq!(descriptor.len(), w.extra_inputs, "descriptor input mismatch");
    assert_eq!(h_prev.0.len(), w.hidden);
    let h = w.hidden;
    let skip_recurrent = h_prev.is_zero();
    let mut out = Vec::with_capacity(h);
    for u in 0..h {
        let mut acc = w.bias[u];
        acc += tau * w.input_weight[u];
        for (i, &d) in descriptor.iter().enumerate() {
            acc += d * w.input_weight[(1 + i) * h + u];
        }
        if !skip_recurrent {
            for j in 0..h {
                acc += h_prev.0[j] * w.recurrent_weight[j * h + u];
            }
        }
        out.push(acc.tanh());
    }
    HiddenState(out)
}

/// [`rnn_step_ext`] without descriptor conditioning.
pub fn rnn_step(tau: f64, h_prev: &HiddenState, w: &RnnWeights) -> HiddenState {
    rnn_step_ext(tau, &[], h_prev, w)
}

/// Hidden state after event `j` (zero-based): the zero state folded through
/// the last `min(j, window_len)` inter-event intervals. `j = 0` yields the
/// zero state.
pub fn encode_history(
    seq: &EventSequence,
    j: usize,
    w: &RnnWeights,
    window_len: usize,
    descriptor: &[f64],
) -> Result<HiddenState, NhpError> {
    if j >= seq.len() {
        return Err(NhpError::IndexOutOfRange {
            index: j,
            len: seq.len(),
        });
    }
    let mut h = HiddenState::zeros(w.hidden);
    let take = j.min(window_len);
    for k in (j - take)..j {
        let tau = seq.timestamps[k + 1] - seq.timestamps[k];
        h = rnn_step_ext(tau, descriptor, &h, w);
    }
    Ok(h)
}

fn hazard_layer_values<'a>(
    w: &'a HazardWeights,
    topo: &NhpTopology,
) -> Vec<(Vec<f64>, &'a [f64], usize, usize, Activation)> {
    let acts = topo.hazard_activations();
    w.layers
        .iter()
        .zip(acts)
        .map(|(l, act)| {
            let eff: Vec<f64> = l.weight_raw.iter().map(|&r| softplus(r)).collect();
            (eff, l.bias.as_slice(), l.in_dim, l.out_dim, act)
        })
        .collect()
}

fn hazard_input_vec(h: &HiddenState, tau: f64, descriptor: &[f64]) -> Vec<f64> {
    let mut inputs = Vec::with_capacity(h.0.len() + 1 + descriptor.len());
    inputs.extend_from_slice(&h.0);
    inputs.push(tau);
    inputs.extend_from_slice(descriptor);
    inputs
}

/// Cumulative hazard and its exact slope at elapsed time `tau`.
pub fn hazard_with_phi(
    tau: f64,
    h: &HiddenState,
    w: &HazardWeights,
    topo: &NhpTopology,
    descriptor: &[f64],
) -> (f64, f64) {
    let owned = hazard_layer_values(w, topo);
    let layers: Vec<LayerValues> = owned
        .iter()
        .map(|(eff, bias, i, o, act)| LayerValues {
            weights: eff,
            bias,
            in_dim: *i,
            out_dim: *o,
            activation: *act,
        })
        .collect();
    let inputs = hazard_input_vec(h, tau, descriptor);
    mlp_value_with_input_derivative(&inputs, &layers, topo.tau_index())
}

/// Cumulative hazard `Phi(tau | h)`.
pub fn cumulative_hazard(
    tau: f64,
    h: &HiddenState,
    w: &HazardWeights,
    topo: &NhpTopology,
    descriptor: &[f64],
) -> f64 {
    hazard_with_phi(tau, h, w, topo, descriptor).0
}

/// Hazard: the slope of the cumulative hazard in `tau`.
pub fn hazard(
    tau: f64,
    h: &HiddenState,
    w: &HazardWeights,
    topo: &NhpTopology,
    descriptor: &[f64],
) -> f64 {
    hazard_with_phi(tau, h, w, topo, descriptor).1
}

/// Log-likelihood term of event `j` (zero-based, `j >= 1`):
/// `log hazard(tau_j | h_{j-1}) - Phi(tau_j | h_{j-1})`.
pub fn event_term(
    seq: &EventSequence,
    j: usize,
    rnn: &RnnWeights,
    haz: &HazardWeights,
    topo: &NhpTopology,
    window_len: usize,
    descriptor: &[f64],
) -> Result<f64, NhpError> {
    if j == 0 || j >= seq.len() {
        return Err(NhpError::IndexOutOfRange {
            index: j,
            len: seq.len(),
        });
    }
    let h = encode_history(seq, j - 1, rnn, window_len, descriptor)?;
    let tau = seq.timestamps[j] - seq.timestamps[j - 1];
    let (phi, dphi) = hazard_with_phi(tau, &h, haz, topo, descriptor);
    if !(dphi > 0.0) {
        return Err(NhpError::NonPositiveHazard {
            event: j,
            value: dphi,
        });
    }
    let term = dphi.ln() + (-phi);
    if !term.is_finite() {
        return Err(NhpError::NonFiniteTerm { event: j });
    }
    Ok(term)
}

/// Sequence log-likelihood: the sum of [`event_term`] over events
/// `1..len`, in ascending order. The first timestamp only serves as
/// history.
pub fn event_loglik(
    seq: &EventSequence,
    rnn: &RnnWeights,
    haz: &HazardWeights,
    topo: &NhpTopology,
    window_len: usize,
    descriptor: &[f64],
) -> Result<f64, NhpError> {
    let mut total = 0.0;
    for j in 1..seq.len() {
        total += event_term(seq, j, rnn, haz, topo, window_len, descriptor)?;
    }
    Ok(total)
}

const BRACKET_CAP: usize = 60;
const BISECT_CAP: usize = 200;

/// Predicts the median next-event time after event `j` (zero-based,
/// `j >= 1`): the `tau` solving `Phi(tau | h_j) = ln 2`, bracketed by
/// doubling and then bisected until both the bracket width and the
/// cumulative-hazard residual are within `tol`. Returns `t_j + tau`.
pub fn predict_next(
    seq: &EventSequence,
    j: usize,
    rnn: &RnnWeights,
    haz: &HazardWeights,
    topo: &NhpTopology,
    window_len: usize,
    tol: f64,
    descriptor: &[f64],
) -> Result<f64, PredictError> {
    assert!(tol > 0.0, "tolerance must be positive");
    if j == 0 || j >= seq.len() {
        return Err(PredictError::IndexOutOfRange {
            index: j,
            len: seq.len(),
        });
    }
    let h = encode_history(seq, j, rnn, window_len, descriptor).expect("index checked above");
    let tau_star = median_interarrival(&h, haz, topo, tol, descriptor)?;
    Ok(seq.timestamps[j] + tau_star)
}

/// Root of `Phi(tau | h) = ln 2` for a fixed hidden state.
pub fn median_interarrival(
    h: &HiddenState,
    haz: &HazardWeights,
    topo: &NhpTopology,
    tol: f64,
    descriptor: &[f64],
) -> Result<f64, PredictError> {
    let phi_at = |tau: f64| cumulative_hazard(tau, h, haz, topo, descriptor);
    let target = LN_2;
    if phi_at(0.0) > target {
        return Err(PredictError::NoRootAtZero);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut phi_hi = phi_at(hi);
    let mut doublings = 0;
    while phi_hi < target {
        doublings += 1;
        if doublings > BRACKET_CAP {
            return Err(PredictError::BracketCap { cap: BRACKET_CAP });
        }
        lo = hi;
        hi *= 2.0;
        phi_hi = phi_at(hi);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..BISECT_CAP {
        let phi_mid = phi_at(mid);
        if (hi - lo) <= tol && (phi_mid - target).abs() <= tol {
            return Ok(mid);
        }
        if phi_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
    }
    Err(PredictError::NoConvergence {
        max_iters: BISECT_CAP,
    })
}

/// Weights realizing exactly constant hazard `c`: a zero RNN (so the hidden
/// state vanishes) and a single affine hazard layer with linear output,
/// effective time-weight `c` and zero bias.
pub fn constant_hazard_config(
    c: f64,
    topo_base: &NhpTopology,
) -> (NhpTopology, RnnWeights, HazardWeights) {
    assert!(c > 0.0, "hazard must be positive");
    let topo = NhpTopology {
        hidden: topo_base.hidden,
        hazard_hidden: Vec::new(),
        hazard_softplus_output: false,
        descriptor_inputs: topo_base.descriptor_inputs,
    };
    let rnn = RnnWeights::zeros(topo.hidden, topo.descriptor_inputs);
    let in_dim = topo.hazard_inputs();
    // Effective weights on the (identically zero) hidden inputs are made
    // negligible; only the time weight matters.
    let mut weight_raw = vec![diffgraph::inv_softplus(1e-300); in_dim];
    weight_raw[topo.tau_index()] = diffgraph::inv_softplus(c);
    let haz = HazardWeights {
        layers: vec![HazardLayer {
            weight_raw,
            bias: vec![0.0],
            in_dim,
            out_dim: 1,
        }],
    };
    (topo, rnn, haz)
}

// --- graph builders -------------------------------------------------------

/// RNN weight node ids (effective values, whatever their provenance).
pub struct RnnNodes {
    pub hidden: usize,
    pub extra_inputs: usize,
    pub input_weight: Vec<NodeId>,
    pub recurrent_weight: Vec<NodeId>,
    pub bias: Vec<NodeId>,
}

/// Raw hazard weight node ids, layer by layer (weights, bias).
pub struct HazardNodes {
    pub layers: Vec<(Vec<NodeId>, Vec<NodeId>)>,
}

/// Hazard nodes after the softplus reparameterization of the weights.
pub struct HazardEffNodes {
    pub layers: Vec<(Vec<NodeId>, Vec<NodeId>)>,
}

impl HazardNodes {
    /// Applies softplus to every multiplicative weight once; shared by all
    /// event terms built afterwards.
    pub fn effective(&self, g: &mut Graph) -> HazardEffNodes {
        let layers = self
            .layers
            .iter()
            .map(|(w, b)| {
                let eff = w.iter().map(|&id| g.softplus(id)).collect();
                (eff, b.clone())
            })
            .collect();
        HazardEffNodes { layers }
    }
}

/// Builds the fold of [`rnn_step_ext`] over the given inter-arrival values
/// (data constants), mirroring the float path.
pub fn build_rnn_fold(
    g: &mut Graph,
    w: &RnnNodes,
    taus: &[f64],
    descriptor: &[NodeId],
) -> Vec<NodeId> {
    assert_eq!(descriptor.len(), w.extra_inputs);
    let hidden = w.hidden;
    let mut h: Option<Vec<NodeId>> = None;
    for &tau in taus {
        let tau_node = g.constant(tau);
        let mut next = Vec::with_capacity(hidden);
        for u in 0..hidden {
            let mut acc = w.bias[u];
            let p = g.mul(tau_node, w.input_weight[u]);
            acc = g.add(acc, p);
            for (i, &d) in descriptor.iter().enumerate() {
                let p = g.mul(d, w.input_weight[(1 + i) * hidden + u]);
                acc = g.add(acc, p);
            }
            if let Some(prev) = &h {
                for j in 0..hidden {
                    let p = g.mul(prev[j], w.recurrent_weight[j * hidden + u]);
                    acc = g.add(acc, p);
                }
            }
            next.push(g.tanh(acc));
        }
        h = Some(next);
    }
    h.unwrap_or_else(|| (0..hidden).map(|_| g.constant(0.0)).collect())
}

/// Builds `Phi(tau | h)` and returns the trace for derivative construction.
pub fn build_phi(
    g: &mut Graph,
    eff: &HazardEffNodes,
    h: &[NodeId],
    tau: NodeId,
    descriptor: &[NodeId],
    topo: &NhpTopology,
) -> MlpTrace {
    let mut inputs = Vec::with_capacity(h.len() + 1 + descriptor.len());
    inputs.extend_from_slice(h);
    inputs.push(tau);
    inputs.extend_from_slice(descriptor);
    let dims = topo.hazard_layer_dims();
    let acts = topo.hazard_activations();
    let specs: Vec<LayerSpec> = eff
        .layers
        .iter()
        .zip(dims.iter())
        .zip(acts.iter())
        .map(|(((w, b), (i, o)), act)| LayerSpec {
            weights: w,
            bias: b,
            in_dim: *i,
            out_dim: *o,
            activation: *act,
        })
        .collect();
    build_mlp(g, &inputs, &specs)
}

/// Builds one event's log-likelihood term `log(dPhi/dtau) - Phi` over the
/// given history window.
pub fn build_event_term(
    g: &mut Graph,
    rnn: &RnnNodes,
    eff: &HazardEffNodes,
    topo: &NhpTopology,
    history_taus: &[f64],
    tau: f64,
    descriptor: &[NodeId],
) -> NodeId {
    let h = build_rnn_fold(g, rnn, history_taus, descriptor);
    let tau_node = g.constant(tau);
    let trace = build_phi(g, eff, &h, tau_node, descriptor, topo);
    let phi = trace.output();
    let dphi = input_derivative(g, &trace, topo.tau_index());
    let log_haz = g.log(dphi);
    g.sub(log_haz, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::EventSequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_topology() -> NhpTopology {
        NhpTopology {
            hidden: 3,
            hazard_hidden: vec![4],
            hazard_softplus_output: true,
            descriptor_inputs: 0,
        }
    }

    fn random_rnn(topo: &NhpTopology, rng: &mut ChaCha8Rng) -> RnnWeights {
        let flat: Vec<f64> = (0..topo.rnn_param_count())
            .map(|_| rng.gen_range(-0.8..0.8))
            .collect();
        RnnWeights::from_flat(&flat, topo.hidden, topo.descriptor_inputs)
    }

    fn random_hazard(topo: &NhpTopology, rng: &mut ChaCha8Rng) -> HazardWeights {
        let flat: Vec<f64> = (0..topo.hazard_param_count())
            .map(|_| rng.gen_range(-2.0..0.5))
            .collect();
        HazardWeights::from_flat(&flat, topo)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> HiddenState {
        HiddenState(vec![
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
        ])
    }

    #[test]
    fn rnn_step_zero_weights_gives_zero_state() {
        let w = RnnWeights::zeros(4, 0);
        let h = rnn_step(0.7, &HiddenState::zeros(4), &w);
        assert_eq!(h.0, vec![0.0; 4]);
    }

    #[test]
    fn rnn_step_bias_only_is_input_independent() {
        let mut w = RnnWeights::zeros(3, 0);
        w.bias = vec![0.3, -0.2, 1.1];
        let h1 = rnn_step(0.0, &HiddenState::zeros(3), &w);
        let h2 = rnn_step(5.0, &HiddenState::zeros(3), &w);
        let expected: Vec<f64> = w.bias.iter().map(|b| b.tanh()).collect();
        assert_eq!(h1.0, expected);
        assert_eq!(h2.0, expected);
    }

    #[test]
    fn rnn_step_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topo = small_topology();
        let w = random_rnn(&topo, &mut rng);
        let h_prev = HiddenState(vec![0.3, -0.5, 0.1]);
        let tau = 0.42;
        let got = rnn_step(tau, &h_prev, &w);
        for u in 0..3 {
            let mut z = w.bias[u] + tau * w.input_weight[u];
            for j in 0..3 {
                z += h_prev.0[j] * w.recurrent_weight[j * 3 + u];
            }
            assert!((got.0[u] - z.tanh()).abs() < 1e-12);
            assert!(got.0[u] > -1.0 && got.0[u] < 1.0);
        }
    }

    #[test]
    fn encode_history_single_interval_equals_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let topo = small_topology();
        let w = random_rnn(&topo, &mut rng);
        let seq = EventSequence::from_raw("s", &[1.0, 3.0], 1).unwrap();
        let h = encode_history(&seq, 1, &w, 1, &[]).unwrap();
        let tau = seq.timestamps[1] - seq.timestamps[0];
        let manual = rnn_step(tau, &HiddenState::zeros(3), &w);
        assert_eq!(h, manual);
    }

    #[test]
    fn encode_history_at_zero_is_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let topo = small_topology();
        let w = random_rnn(&topo, &mut rng);
        let seq = EventSequence::from_raw("s", &[1.0, 2.0], 1).unwrap();
        assert!(encode_history(&seq, 0, &w, 5, &[]).unwrap().is_zero());
    }

    #[test]
    fn encode_history_matches_manual_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let topo = small_topology();
        let w = random_rnn(&topo, &mut rng);
        let seq = EventSequence::from_raw("s", &[1.0, 2.0, 2.5, 4.0, 7.0], 1).unwrap();
        let h = encode_history(&seq, 4, &w, 3, &[]).unwrap();
        let iv = seq.intervals();
        let mut manual = HiddenState::zeros(3);
        for k in 1..4 {
            manual = rnn_step(iv[k], &manual, &w);
        }
        assert_eq!(h, manual);
    }

    #[test]
    fn cumulative_hazard_is_positive_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let topo = small_topology();
        for _ in 0..50 {
            let haz = random_hazard(&topo, &mut rng);
            let h = random_state(&mut rng);
            let t1: f64 = rng.gen_range(0.0..2.0);
            let t2 = t1 + rng.gen_range(1e-6..2.0);
            let p1 = cumulative_hazard(t1, &h, &haz, &topo, &[]);
            let p2 = cumulative_hazard(t2, &h, &haz, &topo, &[]);
            assert!(p1 > 0.0);
            assert!(p2 > p1, "phi not increasing: {p1} vs {p2}");
        }
    }

    #[test]
    fn hazard_matches_single_layer_closed_form() {
        // Effective time-weight 2 and bias c under a softplus output:
        // phi(tau) = softplus(c + 2 tau), hazard = 2 sigmoid(c + 2 tau).
        let topo = NhpTopology {
            hidden: 2,
            hazard_hidden: vec![],
            hazard_softplus_output: true,
            descriptor_inputs: 0,
        };
        let c = 0.37;
        let tiny = diffgraph::inv_softplus(1e-300);
        let haz = HazardWeights {
            layers: vec![HazardLayer {
                weight_raw: vec![tiny, tiny, diffgraph::inv_softplus(2.0)],
                bias: vec![c],
                in_dim: 3,
                out_dim: 1,
            }],
        };
        let h = HiddenState::zeros(2);
        for tau in [0.0, 0.3, 1.7] {
            let lam = hazard(tau, &h, &haz, &topo, &[]);
            let expected = 2.0 * diffgraph::sigmoid(c + 2.0 * tau);
            assert!((lam - expected).abs() < 1e-9, "{lam} vs {expected}");
        }
    }

    #[test]
    fn hazard_matches_finite_difference_slope_of_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let topo = small_topology();
        for _ in 0..50 {
            let haz = random_hazard(&topo, &mut rng);
            let h = random_state(&mut rng);
            let tau: f64 = rng.gen_range(0.05..2.0);
            let lam = hazard(tau, &h, &haz, &topo, &[]);
            let dt = 1e-6;
            let fd = (cumulative_hazard(tau + dt, &h, &haz, &topo, &[])
                - cumulative_hazard(tau - dt, &h, &haz, &topo, &[]))
                / (2.0 * dt);
            assert!(
                (lam - fd).abs() <= 1e-6 * lam.abs().max(fd.abs()).max(1e-3),
                "hazard {lam} vs fd {fd}"
            );
            assert!(lam > 0.0);
        }
    }

    #[test]
    fn constant_hazard_likelihood_is_exponential() {
        let c = 1.7;
        let (topo, rnn, haz) = constant_hazard_config(c, &NhpTopology::default());
        let seq = EventSequence::from_raw("s", &[0.5, 1.25, 2.0, 2.25, 4.0], 1).unwrap();
        let ll = event_loglik(&seq, &rnn, &haz, &topo, 20, &[]).unwrap();
        let expected: f64 = seq.intervals().iter().map(|&tau| c.ln() - c * tau).sum();
        assert!((ll - expected).abs() < 1e-12, "{ll} vs {expected}");
    }

    #[test]
    fn loglik_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let topo = small_topology();
        let rnn = random_rnn(&topo, &mut rng);
        let haz = random_hazard(&topo, &mut rng);
        let seq = EventSequence::from_raw("s", &[0.5, 1.0, 1.25, 3.0, 4.5, 5.0], 1).unwrap();
        let a = event_loglik(&seq, &rnn, &haz, &topo, 4, &[]).unwrap();
        let b = event_loglik(&seq, &rnn, &haz, &topo, 4, &[]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn constant_hazard_median_is_ln2_over_c() {
        for c in [1.0, 2.0] {
            let (topo, rnn, haz) = constant_hazard_config(c, &NhpTopology::default());
            let seq = EventSequence::from_raw("s", &[0.5, 1.0, 2.0], 1).unwrap();
            let t_star = predict_next(&seq, 1, &rnn, &haz, &topo, 20, 1e-10, &[]).unwrap();
            let expected = seq.timestamps[1] + LN_2 / c;
            assert!(
                (t_star - expected).abs() < 1e-8,
                "c={c}: {t_star} vs {expected}"
            );
        }
    }

    #[test]
    fn predict_rejects_bad_index() {
        let (topo, rnn, haz) = constant_hazard_config(1.0, &NhpTopology::default());
        let seq = EventSequence::from_raw("s", &[0.5, 1.0, 2.0], 1).unwrap();
        assert!(matches!(
            predict_next(&seq, 0, &rnn, &haz, &topo, 20, 1e-8, &[]),
            Err(PredictError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            predict_next(&seq, 9, &rnn, &haz, &topo, 20, 1e-8, &[]),
            Err(PredictError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn bisection_residual_is_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let topo = small_topology();
        for _ in 0..100 {
            let haz = random_hazard(&topo, &mut rng);
            let h = random_state(&mut rng);
            let tol = 1e-8;
            match median_interarrival(&h, &haz, &topo, tol, &[]) {
                Ok(tau) => {
                    let phi = cumulative_hazard(tau, &h, &haz, &topo, &[]);
                    assert!((phi - LN_2).abs() <= tol, "residual {}", (phi - LN_2).abs());
                }
                Err(PredictError::NoRootAtZero) => {} // random weights may start above ln 2
                Err(e) => panic!("unexpected prediction failure: {e}"),
            }
        }
    }

    #[test]
    fn graph_and_value_paths_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let topo = small_topology();
        let rnn = random_rnn(&topo, &mut rng);
        let haz = random_hazard(&topo, &mut rng);
        let seq = EventSequence::from_raw("s", &[0.4, 1.0, 1.7, 2.2, 5.0], 1).unwrap();
        let window_len = 3;

        for j in 1..seq.len() {
            let value_term = event_term(&seq, j, &rnn, &haz, &topo, window_len, &[]).unwrap();

            let mut g = Graph::new();
            let rnn_nodes = RnnNodes {
                hidden: topo.hidden,
                extra_inputs: 0,
                input_weight: rnn.input_weight.iter().map(|&v| g.constant(v)).collect(),
                recurrent_weight: rnn
                    .recurrent_weight
                    .iter()
                    .map(|&v| g.constant(v))
                    .collect(),
                bias: rnn.bias.iter().map(|&v| g.constant(v)).collect(),
            };
            let haz_nodes = HazardNodes {
                layers: haz
                    .layers
                    .iter()
                    .map(|l| {
                        (
                            l.weight_raw.iter().map(|&v| g.input(v)).collect(),
                            l.bias.iter().map(|&v| g.input(v)).collect(),
                        )
                    })
                    .collect(),
            };
            let eff = haz_nodes.effective(&mut g);
            let iv = seq.intervals();
            let take = (j - 1).min(window_len);
            let history = &iv[j - 1 - take..j - 1];
            let term = build_event_term(&mut g, &rnn_nodes, &eff, &topo, history, iv[j - 1], &[]);
            let graph_term = g.forward(term).unwrap();
            assert_eq!(
                graph_term.to_bits(),
                value_term.to_bits(),
                "event {j}: graph {graph_term} vs value {value_term}"
            );
        }
    }
}
