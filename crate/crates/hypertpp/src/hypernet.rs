//! Descriptor-conditioned weight generators: small feed-forward networks
//! (one tanh hidden layer, linear outputs) whose outputs are reshaped into
//! the per-sequence weights of the point-process networks.
//!
//! Two generators exist: one for the RNN weights and one for the raw
//! parameters of the hazard network. Raw hazard outputs pass through the
//! same softplus reparameterization as directly trained hazard weights, so
//! generated networks satisfy the positivity constraint by construction and
//! the two training modes differ only in where the weights come from.

use crate::diffgraph::{build_mlp, mlp_value, Activation, Graph, LayerSpec, LayerValues, NodeId};
use crate::nhp::{HazardNodes, HazardWeights, NhpTopology, RnnNodes, RnnWeights};

/// Which networks get generated weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Only the hazard network is generated; one shared RNN is trained
    /// directly.
    FnnOnly,
    /// Both the RNN and the hazard network are generated, by separate
    /// generators.
    FnnRnn,
}

/// Shape of one generator: descriptor in, one tanh hidden layer, linear
/// outputs matching the flattened target parameter count exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperTopology {
    pub descriptor_dim: usize,
    pub hidden: usize,
    pub out: usize,
}

impl HyperTopology {
    pub fn new(descriptor_dim: usize, hidden: usize, out: usize) -> Self {
        assert!(descriptor_dim > 0 && hidden > 0 && out > 0);
        HyperTopology {
            descriptor_dim,
            hidden,
            out,
        }
    }

    /// Flat parameter count: hidden weights, hidden bias, output weights,
    /// output bias.
    pub fn param_count(&self) -> usize {
        self.descriptor_dim * self.hidden
            + self.hidden
            + self.hidden * self.out
            + self.out
    }

    fn segments(&self) -> (usize, usize, usize, usize) {
        let w1 = self.descriptor_dim * self.hidden;
        let b1 = self.hidden;
        let w2 = self.hidden * self.out;
        let b2 = self.out;
        (w1, b1, w2, b2)
    }

    /// Offset of output-bias position `o` within the flat layout; the
    /// initializer uses this to seed generated raw weights at sensible
    /// magnitudes.
    pub fn output_bias_offset(&self, o: usize) -> usize {
        let (w1, b1, w2, _) = self.segments();
        w1 + b1 + w2 + o
    }
}

/// Generator outputs as plain values, mirroring the graph builder bitwise.
pub fn generator_forward(theta: &[f64], topo: &HyperTopology, descriptor: &[f64]) -> Vec<f64> {
    assert_eq!(theta.len(), topo.param_count(), "generator parameter count");
    assert_eq!(
        descriptor.len(),
        topo.descriptor_dim,
        "descriptor dimension mismatch"
    );
    let (w1, b1, w2, _) = topo.segments();
    let layers = [
        LayerValues {
            weights: &theta[..w1],
            bias: &theta[w1..w1 + b1],
            in_dim: topo.descriptor_dim,
            out_dim: topo.hidden,
            activation: Activation::Tanh,
        },
        LayerValues {
            weights: &theta[w1 + b1..w1 + b1 + w2],
            bias: &theta[w1 + b1 + w2..],
            in_dim: topo.hidden,
            out_dim: topo.out,
            activation: Activation::Linear,
        },
    ];
    mlp_value(descriptor, &layers)
}

/// Graph twin of [`generator_forward`] over parameter nodes.
pub fn build_generator(
    g: &mut Graph,
    theta: &[NodeId],
    topo: &HyperTopology,
    descriptor: &[f64],
) -> Vec<NodeId> {
    assert_eq!(theta.len(), topo.param_count(), "generator parameter count");
    assert_eq!(descriptor.len(), topo.descriptor_dim);
    let (w1, b1, w2, _) = topo.segments();
    let inputs: Vec<NodeId> = descriptor.iter().map(|&d| g.constant(d)).collect();
    let specs = [
        LayerSpec {
            weights: &theta[..w1],
            bias: &theta[w1..w1 + b1],
            in_dim: topo.descriptor_dim,
            out_dim: topo.hidden,
            activation: Activation::Tanh,
        },
        LayerSpec {
            weights: &theta[w1 + b1..w1 + b1 + w2],
            bias: &theta[w1 + b1 + w2..],
            in_dim: topo.hidden,
            out_dim: topo.out,
            activation: Activation::Linear,
        },
    ];
    let trace = build_mlp(g, &inputs, &specs);
    trace.outputs().to_vec()
}

/// Generates per-sequence RNN weights from a descriptor.
pub fn generate_rnn_weights(
    descriptor: &[f64],
    theta: &[f64],
    hyper: &HyperTopology,
    nhp: &NhpTopology,
) -> RnnWeights {
    assert_eq!(hyper.out, nhp.rnn_param_count(), "generator output count");
    let flat = generator_forward(theta, hyper, descriptor);
    RnnWeights::from_flat(&flat, nhp.hidden, nhp.descriptor_inputs)
}

/// Generates per-sequence raw hazard weights from a descriptor. Effective
/// weights are the softplus of these raw values, hence strictly positive.
pub fn generate_hazard_weights(
    descriptor: &[f64],
    theta: &[f64],
    hyper: &HyperTopology,
    nhp: &NhpTopology,
) -> HazardWeights {
    assert_eq!(hyper.out, nhp.hazard_param_count(), "generator output count");
    let flat = generator_forward(theta, hyper, descriptor);
    HazardWeights::from_flat(&flat, nhp)
}

/// Reshapes generator output nodes into RNN weight nodes.
pub fn rnn_nodes_from_outputs(outputs: &[NodeId], nhp: &NhpTopology) -> RnnNodes {
    let n_in = nhp.rnn_inputs() * nhp.hidden;
    let n_rec = nhp.hidden * nhp.hidden;
    assert_eq!(outputs.len(), nhp.rnn_param_count());
    RnnNodes {
        hidden: nhp.hidden,
        extra_inputs: nhp.descriptor_inputs,
        input_weight: outputs[..n_in].to_vec(),
        recurrent_weight: outputs[n_in..n_in + n_rec].to_vec(),
        bias: outputs[n_in + n_rec..].to_vec(),
    }
}

/// Reshapes generator output nodes into raw hazard weight nodes.
pub fn hazard_nodes_from_outputs(outputs: &[NodeId], nhp: &NhpTopology) -> HazardNodes {
    assert_eq!(outputs.len(), nhp.hazard_param_count());
    let mut layers = Vec::new();
    let mut pos = 0;
    for (i, o) in nhp.hazard_layer_dims() {
        let w_end = pos + i * o;
        let b_end = w_end + o;
        layers.push((outputs[pos..w_end].to_vec(), outputs[w_end..b_end].to_vec()));
        pos = b_end;
    }
    HazardNodes { layers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::softplus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nhp_topo() -> NhpTopology {
        NhpTopology {
            hidden: 3,
            hazard_hidden: vec![4],
            hazard_softplus_output: true,
            descriptor_inputs: 0,
        }
    }

    #[test]
    fn zero_generator_produces_zero_rnn_weights() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(4, 8, nhp.rnn_param_count());
        let theta = vec![0.0; hyper.param_count()];
        let d = vec![0.3, -0.7, 0.1, 0.9];
        let w = generate_rnn_weights(&d, &theta, &hyper, &nhp);
        assert!(w.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_generator_produces_ln2_effective_hazard_weights() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(4, 8, nhp.hazard_param_count());
        let theta = vec![0.0; hyper.param_count()];
        let d = vec![0.5, 0.0, -0.4, 1.0];
        let w = generate_hazard_weights(&d, &theta, &hyper, &nhp);
        for layer in &w.layers {
            for &raw in &layer.weight_raw {
                assert_eq!(raw, 0.0);
                assert!((softplus(raw) - std::f64::consts::LN_2).abs() < 1e-15);
            }
            for &b in &layer.bias {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_descriptor() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(5, 8, nhp.rnn_param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..hyper.param_count())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let d: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = generate_rnn_weights(&d, &theta, &hyper, &nhp);
        let b = generate_rnn_weights(&d, &theta, &hyper, &nhp);
        assert_eq!(a, b);
        let a_bits: Vec<u64> = a.to_flat().iter().map(|v| v.to_bits()).collect();
        let b_bits: Vec<u64> = b.to_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a_bits, b_bits);
    }

    #[test]
    fn descriptor_perturbation_changes_outputs_proportionally() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(5, 8, nhp.rnn_param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta: Vec<f64> = (0..hyper.param_count())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let d: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = generate_rnn_weights(&d, &theta, &hyper, &nhp).to_flat();

        // Jacobian column by central differences at a moderate step.
        let h = 1e-4;
        let mut d_plus = d.clone();
        let mut d_minus = d.clone();
        d_plus[2] += h;
        d_minus[2] -= h;
        let f_plus = generate_rnn_weights(&d_plus, &theta, &hyper, &nhp).to_flat();
        let f_minus = generate_rnn_weights(&d_minus, &theta, &hyper, &nhp).to_flat();
        let jac_norm: f64 = f_plus
            .iter()
            .zip(&f_minus)
            .map(|(p, m)| ((p - m) / (2.0 * h)).powi(2))
            .sum::<f64>()
            .sqrt();

        let eps = 1e-3;
        let mut d_eps = d.clone();
        d_eps[2] += eps;
        let moved = generate_rnn_weights(&d_eps, &theta, &hyper, &nhp).to_flat();
        let delta: f64 = moved
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        // First-order bound with slack for curvature.
        assert!(delta <= 1.5 * jac_norm * eps + 1e-9, "delta {delta} vs bound {}", jac_norm * eps);
        assert!(delta > 0.0);
    }

    #[test]
    fn generator_output_count_must_match_target() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(4, 8, nhp.rnn_param_count() + 1);
        let theta = vec![0.0; hyper.param_count()];
        let d = vec![0.0; 4];
        let res = std::panic::catch_unwind(|| generate_rnn_weights(&d, &theta, &hyper, &nhp));
        assert!(res.is_err());
    }

    #[test]
    fn graph_generator_matches_value_generator_bitwise() {
        let nhp = nhp_topo();
        let hyper = HyperTopology::new(4, 6, nhp.hazard_param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta: Vec<f64> = (0..hyper.param_count())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let values = generator_forward(&theta, &hyper, &d);

        let mut g = Graph::new();
        let theta_nodes: Vec<NodeId> = theta.iter().map(|&v| g.input(v)).collect();
        let outputs = build_generator(&mut g, &theta_nodes, &hyper, &d);
        g.forward(*outputs.last().unwrap()).unwrap();
        for (node, value) in outputs.iter().zip(&values) {
            assert_eq!(g.value(*node).to_bits(), value.to_bits());
        }
    }
}
