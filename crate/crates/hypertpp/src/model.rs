//! The four trainable models behind one interface: a shared flat parameter
//! vector, per-sequence weight resolution (direct slices or hypernetwork
//! generation), and a single likelihood path used by both training graphs
//! and plain-float evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffgraph::{Graph, NodeId};
use crate::hypernet::{
    build_generator, generate_hazard_weights, generate_rnn_weights, hazard_nodes_from_outputs,
    rnn_nodes_from_outputs, HyperTopology, Variant,
};
use crate::nhp::{
    self, build_event_term, HazardWeights, NhpError, NhpTopology, RnnWeights,
};
use crate::seqdata::EventSequence;

/// Model family. The two baselines share one parameter set across all
/// sequences; the two hypernetwork variants generate per-sequence weights
/// from the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Shared weights, descriptor ignored.
    Fnhp,
    /// Shared weights with the descriptor concatenated to both the RNN and
    /// hazard-network inputs.
    FnhpDescriptor,
    /// Hazard weights generated from the descriptor; one shared RNN.
    HyperFnn,
    /// Both RNN and hazard weights generated, by separate generators.
    HyperFnnRnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fnhp => "fnhp",
            ModelKind::FnhpDescriptor => "fnhp-descriptor",
            ModelKind::HyperFnn => "hyper-fnn",
            ModelKind::HyperFnnRnn => "hyper-fnn-rnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fnhp" => Some(ModelKind::Fnhp),
            "fnhp-descriptor" => Some(ModelKind::FnhpDescriptor),
            "hyper-fnn" => Some(ModelKind::HyperFnn),
            "hyper-fnn-rnn" => Some(ModelKind::HyperFnnRnn),
            _ => None,
        }
    }

    pub fn all() -> [ModelKind; 4] {
        [
            ModelKind::Fnhp,
            ModelKind::FnhpDescriptor,
            ModelKind::HyperFnn,
            ModelKind::HyperFnnRnn,
        ]
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::HyperFnn => Some(Variant::FnnOnly),
            ModelKind::HyperFnnRnn => Some(Variant::FnnRnn),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named segment of the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Full model configuration: kind plus every width that determines the
/// parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub descriptor_dim: usize,
    /// RNN hidden width.
    pub hidden: usize,
    /// Hazard-network hidden widths.
    pub hazard_hidden: Vec<usize>,
    /// Hidden width of each weight generator.
    pub hyper_hidden: usize,
    /// History window length fed to the RNN.
    pub history_len: usize,
    /// Linear (instead of softplus) hazard output layer; used by
    /// constant-hazard oracle configurations.
    pub hazard_linear_output: bool,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, descriptor_dim: usize) -> Self {
        ModelConfig {
            kind,
            descriptor_dim,
            hidden: 16,
            hazard_hidden: vec![16, 16],
            hyper_hidden: 32,
            history_len: 20,
            hazard_linear_output: false,
        }
    }

    pub fn nhp_topology(&self) -> NhpTopology {
        NhpTopology {
            hidden: self.hidden,
            hazard_hidden: self.hazard_hidden.clone(),
            hazard_softplus_output: !self.hazard_linear_output,
            descriptor_inputs: if self.kind == ModelKind::FnhpDescriptor {
                self.descriptor_dim
            } else {
                0
            },
        }
    }

    pub fn rnn_generator_topology(&self) -> Option<HyperTopology> {
        match self.kind {
            ModelKind::HyperFnnRnn => Some(HyperTopology::new(
                self.descriptor_dim,
                self.hyper_hidden,
                self.nhp_topology().rnn_param_count(),
            )),
            _ => None,
        }
    }

    pub fn hazard_generator_topology(&self) -> Option<HyperTopology> {
        match self.kind {
            ModelKind::HyperFnn | ModelKind::HyperFnnRnn => Some(HyperTopology::new(
                self.descriptor_dim,
                self.hyper_hidden,
                self.nhp_topology().hazard_param_count(),
            )),
            _ => None,
        }
    }

    /// Named segments of the flat parameter vector, in storage order.
    pub fn layout(&self) -> Vec<Segment> {
        let topo = self.nhp_topology();
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: &'static str, len: usize, segments: &mut Vec<Segment>| {
            segments.push(Segment { name, offset, len });
            offset += len;
        };
        match self.kind {
            ModelKind::Fnhp | ModelKind::FnhpDescriptor => {
                push("rnn", topo.rnn_param_count(), &mut segments);
                push("hazard", topo.hazard_param_count(), &mut segments);
            }
            ModelKind::HyperFnn => {
                push("rnn", topo.rnn_param_count(), &mut segments);
                push(
                    "hyper_hazard",
                    self.hazard_generator_topology().unwrap().param_count(),
                    &mut segments,
                );
            }
            ModelKind::HyperFnnRnn => {
                push(
                    "hyper_rnn",
                    self.rnn_generator_topology().unwrap().param_count(),
                    &mut segments,
                );
                push(
                    "hyper_hazard",
                    self.hazard_generator_topology().unwrap().param_count(),
                    &mut segments,
                );
            }
        }
        segments
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|s| s.len).sum()
    }

    pub fn segment(&self, name: &str) -> Option<Segment> {
        self.layout().into_iter().find(|s| s.name == name)
    }

    /// Seeded initialization. Directly trained weights get
    /// fan-scaled uniform draws (hazard raw weights offset negative so the
    /// effective weights start small); generators start with small hidden
    /// weights and output biases drawn like a direct initialization, so
    /// generated weights begin near a sensible shared model.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = self.nhp_topology();
        let mut params = Vec::with_capacity(self.param_count());
        for segment in self.layout() {
            match segment.name {
                "rnn" => params.extend(direct_rnn_init(&topo, &mut rng)),
                "hazard" => params.extend(direct_hazard_init(&topo, &mut rng)),
                "hyper_rnn" => {
                    let hyper = self.rnn_generator_topology().unwrap();
                    let target = direct_rnn_init(&topo, &mut rng);
                    params.extend(generator_init(&hyper, &target, &mut rng));
                }
                "hyper_hazard" => {
                    let hyper = self.hazard_generator_topology().unwrap();
                    let target = direct_hazard_init(&topo, &mut rng);
                    params.extend(generator_init(&hyper, &target, &mut rng));
                }
                other => unreachable!("unknown segment {other}"),
            }
        }
        params
    }

    /// Resolves the per-sequence weights for a descriptor.
    pub fn sequence_weights(&self, theta: &[f64], descriptor: &[f64]) -> (RnnWeights, HazardWeights) {
        assert_eq!(theta.len(), self.param_count(), "parameter count mismatch");
        let topo = self.nhp_topology();
        let rnn = match self.kind {
            ModelKind::HyperFnnRnn => {
                let seg = self.segment("hyper_rnn").unwrap();
                generate_rnn_weights(
                    descriptor,
                    &theta[seg.range()],
                    &self.rnn_generator_topology().unwrap(),
                    &topo,
                )
            }
            _ => {
                let seg = self.segment("rnn").unwrap();
                RnnWeights::from_flat(&theta[seg.range()], topo.hidden, topo.descriptor_inputs)
            }
        };
        let hazard = match self.kind {
            ModelKind::Fnhp | ModelKind::FnhpDescriptor => {
                let seg = self.segment("hazard").unwrap();
                HazardWeights::from_flat(&theta[seg.range()], &topo)
            }
            _ => {
                let seg = self.segment("hyper_hazard").unwrap();
                generate_hazard_weights(
                    descriptor,
                    &theta[seg.range()],
                    &self.hazard_generator_topology().unwrap(),
                    &topo,
                )
            }
        };
        (rnn, hazard)
    }

    /// Descriptor entries fed to the network inputs (only the
    /// concatenation baseline uses any).
    pub fn input_descriptor<'a>(&self, descriptor: &'a [f64]) -> &'a [f64] {
        if self.kind == ModelKind::FnhpDescriptor {
            descriptor
        } else {
            &[]
        }
    }

    /// Sum of negative log-likelihood terms over the given events
    /// (zero-based indices, each >= 1), plain-float path.
    pub fn nll_events(
        &self,
        theta: &[f64],
        seq: &EventSequence,
        descriptor: &[f64],
        events: &[usize],
    ) -> Result<f64, NhpError> {
        let (rnn, hazard) = self.sequence_weights(theta, descriptor);
        self.nll_events_with_weights(&rnn, &hazard, seq, descriptor, events)
    }

    /// As [`ModelConfig::nll_events`] but with pre-resolved weights, for
    /// callers that evaluate one sequence many times.
    pub fn nll_events_with_weights(
        &self,
        rnn: &RnnWeights,
        hazard: &HazardWeights,
        seq: &EventSequence,
        descriptor: &[f64],
        events: &[usize],
    ) -> Result<f64, NhpError> {
        let topo = self.nhp_topology();
        let d_in = self.input_descriptor(descriptor);
        let mut total = 0.0;
        for &j in events {
            let term = nhp::event_term(seq, j, rnn, hazard, &topo, self.history_len, d_in)?;
            total += -term;
        }
        Ok(total)
    }
}

fn direct_rnn_init(topo: &NhpTopology, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s_in = 0.8 / (topo.rnn_inputs() as f64).sqrt();
    let s_rec = 0.8 / (topo.hidden as f64).sqrt();
    let n_in = topo.rnn_inputs() * topo.hidden;
    let n_rec = topo.hidden * topo.hidden;
    let mut out = Vec::with_capacity(topo.rnn_param_count());
    for _ in 0..n_in {
        out.push(rng.gen_range(-s_in..s_in));
    }
    for _ in 0..n_rec {
        out.push(rng.gen_range(-s_rec..s_rec));
    }
    out.extend(std::iter::repeat(0.0).take(topo.hidden));
    out
}

fn direct_hazard_init(topo: &NhpTopology, rng: &mut ChaCha8Rng) -> Vec<f64> {
    HazardWeights::weight_mask(topo)
        .into_iter()
        .map(|is_weight| {
            if is_weight {
                -2.0 + rng.gen_range(-0.5..0.5)
            } else {
                rng.gen_range(-0.1..0.1)
            }
        })
        .collect()
}

/// Generator init: small hidden layer, near-zero output weights and output
/// biases equal to a direct target initialization, so generation starts at
/// a sensible shared network plus a small descriptor modulation.
fn generator_init(hyper: &HyperTopology, target_bias: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert_eq!(target_bias.len(), hyper.out);
    let s1 = 1.0 / (hyper.descriptor_dim as f64).sqrt();
    let s2 = 0.05 / (hyper.hidden as f64).sqrt();
    let mut out = Vec::with_capacity(hyper.param_count());
    for _ in 0..hyper.descriptor_dim * hyper.hidden {
        out.push(rng.gen_range(-s1..s1));
    }
    out.extend(std::iter::repeat(0.0).take(hyper.hidden));
    for _ in 0..hyper.hidden * hyper.out {
        out.push(rng.gen_range(-s2..s2));
    }
    out.extend_from_slice(target_bias);
    out
}

/// A built loss graph: input nodes for every parameter and the summed
/// negative log-likelihood over the selected events.
pub struct LossGraph {
    pub theta_nodes: Vec<NodeId>,
    /// Sum (not mean) of per-event negative log-likelihood terms.
    pub nll_sum: NodeId,
    pub n_events: usize,
}

/// Builds the training graph for one sequence and an ascending list of
/// event indices (each >= 1). The graph mirrors the plain-float path of
/// [`ModelConfig::nll_events`] bitwise.
pub fn build_loss(
    cfg: &ModelConfig,
    g: &mut Graph,
    theta: &[f64],
    seq: &EventSequence,
    descriptor: &[f64],
    events: &[usize],
) -> LossGraph {
    assert_eq!(theta.len(), cfg.param_count(), "parameter count mismatch");
    assert!(!events.is_empty(), "losses need at least one event");
    debug_assert!(events.windows(2).all(|w| w[0] < w[1]), "events must ascend");
    let topo = cfg.nhp_topology();

    let theta_nodes: Vec<NodeId> = theta.iter().map(|&v| g.input(v)).collect();

    let rnn_nodes = match cfg.kind {
        ModelKind::HyperFnnRnn => {
            let seg = cfg.segment("hyper_rnn").unwrap();
            let outputs = build_generator(
                g,
                &theta_nodes[seg.range()],
                &cfg.rnn_generator_topology().unwrap(),
                descriptor,
            );
            rnn_nodes_from_outputs(&outputs, &topo)
        }
        _ => {
            let seg = cfg.segment("rnn").unwrap();
            rnn_nodes_from_outputs(&theta_nodes[seg.range()], &topo)
        }
    };

    let hazard_nodes = match cfg.kind {
        ModelKind::Fnhp | ModelKind::FnhpDescriptor => {
            let seg = cfg.segment("hazard").unwrap();
            hazard_nodes_from_outputs(&theta_nodes[seg.range()], &topo)
        }
        _ => {
            let seg = cfg.segment("hyper_hazard").unwrap();
            let outputs = build_generator(
                g,
                &theta_nodes[seg.range()],
                &cfg.hazard_generator_topology().unwrap(),
                descriptor,
            );
            hazard_nodes_from_outputs(&outputs, &topo)
        }
    };
    let eff = hazard_nodes.effective(g);

    let d_in = cfg.input_descriptor(descriptor);
    let d_nodes: Vec<NodeId> = d_in.iter().map(|&v| g.constant(v)).collect();

    let iv = seq.intervals();
    let mut terms = Vec::with_capacity(events.len());
    for &j in events {
        assert!(j >= 1 && j < seq.len(), "event index {j} out of range");
        let take = (j - 1).min(cfg.history_len);
        let history = &iv[j - 1 - take..j - 1];
        terms.push(build_event_term(
            g, &rnn_nodes, &eff, &topo, history, iv[j - 1], &d_nodes,
        ));
    }
    let loglik = g.sum(&terms);
    let nll_sum = g.neg(loglik);
    LossGraph {
        theta_nodes,
        nll_sum,
        n_events: events.len(),
    }
}

/// Reads the gradient with respect to every parameter after a backward
/// pass.
pub fn extract_grads(g: &Graph, theta_nodes: &[NodeId]) -> Vec<f64> {
    theta_nodes.iter().map(|&id| g.adjoint(id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_config(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            descriptor_dim: 3,
            hidden: 3,
            hazard_hidden: vec![4],
            hyper_hidden: 5,
            history_len: 3,
            hazard_linear_output: false,
        }
    }

    fn toy_sequence() -> EventSequence {
        EventSequence::from_raw("s", &[0.5, 1.1, 1.9, 2.4, 4.0], 1).unwrap()
    }

    #[test]
    fn layouts_have_expected_counts() {
        let cfg = tiny_config(ModelKind::Fnhp);
        let topo = cfg.nhp_topology();
        assert_eq!(
            cfg.param_count(),
            topo.rnn_param_count() + topo.hazard_param_count()
        );

        let cfg = tiny_config(ModelKind::FnhpDescriptor);
        let topo = cfg.nhp_topology();
        // 1 + D inputs to the RNN, H + 1 + D inputs to the hazard net
        assert_eq!(topo.rnn_inputs(), 4);
        assert_eq!(topo.hazard_inputs(), 7);
        assert_eq!(
            cfg.param_count(),
            topo.rnn_param_count() + topo.hazard_param_count()
        );

        let cfg = tiny_config(ModelKind::HyperFnnRnn);
        let fr = cfg.rnn_generator_topology().unwrap();
        let ft = cfg.hazard_generator_topology().unwrap();
        assert_eq!(fr.out, cfg.nhp_topology().rnn_param_count());
        assert_eq!(ft.out, cfg.nhp_topology().hazard_param_count());
        assert_eq!(cfg.param_count(), fr.param_count() + ft.param_count());
    }

    #[test]
    fn init_is_seed_deterministic() {
        for kind in ModelKind::all() {
            let cfg = tiny_config(kind);
            let a = cfg.init_params(42);
            let b = cfg.init_params(42);
            assert_eq!(a, b);
            let c = cfg.init_params(43);
            assert_ne!(a, c);
            assert_eq!(a.len(), cfg.param_count());
        }
    }

    #[test]
    fn graph_loss_matches_value_loss_bitwise_for_all_kinds() {
        let seq = toy_sequence();
        let d = vec![0.4, -0.2, 0.7];
        let events: Vec<usize> = (1..seq.len()).collect();
        for kind in ModelKind::all() {
            let cfg = tiny_config(kind);
            let theta = cfg.init_params(7);
            let value = cfg.nll_events(&theta, &seq, &d, &events).unwrap();
            let mut g = Graph::new();
            let lg = build_loss(&cfg, &mut g, &theta, &seq, &d, &events);
            let graph = g.forward(lg.nll_sum).unwrap();
            assert_eq!(
                graph.to_bits(),
                value.to_bits(),
                "{kind}: graph {graph} vs value {value}"
            );
        }
    }

    #[test]
    fn descriptor_changes_generated_models_only() {
        let seq = toy_sequence();
        let events: Vec<usize> = (1..seq.len()).collect();
        let d1 = vec![0.4, -0.2, 0.7];
        let d2 = vec![-0.9, 0.3, 0.1];
        for kind in ModelKind::all() {
            let cfg = tiny_config(kind);
            let theta = cfg.init_params(11);
            let a = cfg.nll_events(&theta, &seq, &d1, &events).unwrap();
            let b = cfg.nll_events(&theta, &seq, &d2, &events).unwrap();
            match kind {
                ModelKind::Fnhp => assert_eq!(a, b, "fnhp must ignore the descriptor"),
                _ => assert_ne!(a, b, "{kind} must condition on the descriptor"),
            }
        }
    }

    #[test]
    fn generated_hazard_weights_stay_positive_and_monotone() {
        let cfg = tiny_config(ModelKind::HyperFnnRnn);
        let theta = cfg.init_params(3);
        let topo = cfg.nhp_topology();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, hazard) = cfg.sequence_weights(&theta, &d);
            for layer in &hazard.layers {
                for &raw in &layer.weight_raw {
                    assert!(crate::diffgraph::softplus(raw) > 0.0);
                }
            }
            let h = nhp::HiddenState(vec![0.1, -0.3, 0.5]);
            let t1: f64 = rng.gen_range(0.0..1.0);
            let t2 = t1 + rng.gen_range(1e-4..1.0);
            let p1 = nhp::cumulative_hazard(t1, &h, &hazard, &topo, &[]);
            let p2 = nhp::cumulative_hazard(t2, &h, &hazard, &topo, &[]);
            assert!(p1 > 0.0 && p2 > p1);
        }
    }

    #[test]
    fn gradients_flow_to_every_segment() {
        let seq = toy_sequence();
        let d = vec![0.4, -0.2, 0.7];
        let events: Vec<usize> = (1..seq.len()).collect();
        for kind in ModelKind::all() {
            let cfg = tiny_config(kind);
            let theta = cfg.init_params(5);
            let mut g = Graph::new();
            let lg = build_loss(&cfg, &mut g, &theta, &seq, &d, &events);
            g.forward(lg.nll_sum).unwrap();
            g.backward(lg.nll_sum).unwrap();
            let grads = extract_grads(&g, &lg.theta_nodes);
            for segment in cfg.layout() {
                let norm: f64 = grads[segment.range()].iter().map(|g| g * g).sum();
                assert!(
                    norm > 0.0,
                    "{kind}: no gradient reached segment {}",
                    segment.name
                );
            }
        }
    }
}
