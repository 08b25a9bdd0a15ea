//! Scalar reverse-mode differentiation over explicit computation graphs.
//!
//! Nodes live in an append-only arena; construction order is a topological
//! order, so forward evaluation is a single left-to-right sweep and the
//! backward pass a single right-to-left sweep. The engine is first-order
//! only: expressions that need the derivative of a sub-network with respect
//! to one of its inputs (the hazard as the slope of the cumulative hazard)
//! are built as explicit chain-rule graphs via [`input_derivative`], which
//! makes them ordinary nodes that `backward` differentiates like any other.

use thiserror::Error;

/// Handle to a node in a [`Graph`] arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const,
    Input,
    Add(u32, u32),
    Mul(u32, u32),
    Tanh(u32),
    Softplus(u32),
    Exp(u32),
    Log(u32),
    Neg(u32),
    Recip(u32),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("log of non-positive value {value} at node {node}")]
    LogOfNonPositive { node: usize, value: f64 },
    #[error("reciprocal of non-positive value {value} at node {node}")]
    ReciprocalOfNonPositive { node: usize, value: f64 },
    #[error("backward pass requested before forward")]
    BackwardBeforeForward,
}

/// Arena-backed scalar computation graph.
///
/// Values and adjoints are stored per node; `forward` caches every
/// intermediate value, `backward` accumulates adjoints for every node
/// reachable from the seeded output.
#[derive(Default)]
pub struct Graph {
    ops: Vec<Op>,
    vals: Vec<f64>,
    adjoints: Vec<f64>,
    evaluated: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Graph {
            ops: Vec::with_capacity(n),
            vals: Vec::with_capacity(n),
            adjoints: Vec::new(),
            evaluated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Drops all nodes but keeps the allocations for reuse.
    pub fn clear(&mut self) {
        self.ops.clear();
        self.vals.clear();
        self.adjoints.clear();
        self.evaluated = false;
    }

    #[inline]
    fn push(&mut self, op: Op, val: f64) -> NodeId {
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.vals.push(val);
        self.evaluated = false;
        NodeId(id)
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Const, v)
    }

    /// Adds an input node holding `v`; the value can be reassigned later
    /// with [`Graph::set_input`].
    pub fn input(&mut self, v: f64) -> NodeId {
        self.push(Op::Input, v)
    }

    pub fn set_input(&mut self, id: NodeId, v: f64) {
        debug_assert!(
            matches!(self.ops[id.index()], Op::Input),
            "set_input on non-input node {}",
            id.index()
        );
        self.vals[id.index()] = v;
        self.evaluated = false;
    }

    #[inline]
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a.0, b.0), 0.0)
    }

    #[inline]
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a.0, b.0), 0.0)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a.0), 0.0)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Softplus(a.0), 0.0)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a.0), 0.0)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Log(a.0), 0.0)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a.0), 0.0)
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Recip(a.0), 0.0)
    }

    // Composites expressed with the primitive ops above.

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let rb = self.recip(b);
        self.mul(a, rb)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.mul(a, a)
    }

    /// sigmoid(x) = 1 / (1 + exp(-x)), the derivative of softplus.
    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let na = self.neg(a);
        let e = self.exp(na);
        let one = self.constant(1.0);
        let denom = self.add(one, e);
        self.recip(denom)
    }

    /// Left fold of `add` over the ids; fixed order keeps results
    /// bitwise reproducible.
    pub fn sum(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "sum of no nodes");
        let mut acc = ids[0];
        for &id in &ids[1..] {
            acc = self.add(acc, id);
        }
        acc
    }

    /// Inner product with left-to-right accumulation.
    pub fn dot(&mut self, a: &[NodeId], b: &[NodeId]) -> NodeId {
        assert_eq!(a.len(), b.len(), "dot dimension mismatch");
        assert!(!a.is_empty(), "dot of empty vectors");
        let mut acc = self.mul(a[0], b[0]);
        for i in 1..a.len() {
            let p = self.mul(a[i], b[i]);
            acc = self.add(acc, p);
        }
        acc
    }

    /// Evaluates every node in construction order, caching all values.
    /// Returns the value of `out`.
    pub fn forward(&mut self, out: NodeId) -> Result<f64, GraphError> {
        for i in 0..self.ops.len() {
            let v = match self.ops[i] {
                Op::Const | Op::Input => self.vals[i],
                Op::Add(a, b) => self.vals[a as usize] + self.vals[b as usize],
                Op::Mul(a, b) => self.vals[a as usize] * self.vals[b as usize],
                Op::Tanh(a) => self.vals[a as usize].tanh(),
                Op::Softplus(a) => softplus(self.vals[a as usize]),
                Op::Exp(a) => self.vals[a as usize].exp(),
                Op::Log(a) => {
                    let x = self.vals[a as usize];
                    if x <= 0.0 {
                        return Err(GraphError::LogOfNonPositive { node: i, value: x });
                    }
                    x.ln()
                }
                Op::Neg(a) => -self.vals[a as usize],
                Op::Recip(a) => {
                    let x = self.vals[a as usize];
                    if x <= 0.0 {
                        return Err(GraphError::ReciprocalOfNonPositive { node: i, value: x });
                    }
                    1.0 / x
                }
            };
            self.vals[i] = v;
        }
        self.evaluated = true;
        Ok(self.vals[out.index()])
    }

    /// Cached value of a node after `forward`.
    pub fn value(&self, id: NodeId) -> f64 {
        self.vals[id.index()]
    }

    /// Reverse sweep seeding `d out / d out = 1`; afterwards
    /// [`Graph::adjoint`] of any node n is `d out / d n`.
    pub fn backward(&mut self, out: NodeId) -> Result<(), GraphError> {
        if !self.evaluated {
            return Err(GraphError::BackwardBeforeForward);
        }
        self.adjoints.clear();
        self.adjoints.resize(self.ops.len(), 0.0);
        self.adjoints[out.index()] = 1.0;
        for i in (0..self.ops.len()).rev() {
            let d = self.adjoints[i];
            if d == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Const | Op::Input => {}
                Op::Add(a, b) => {
                    self.adjoints[a as usize] += d;
                    self.adjoints[b as usize] += d;
                }
                Op::Mul(a, b) => {
                    self.adjoints[a as usize] += d * self.vals[b as usize];
                    self.adjoints[b as usize] += d * self.vals[a as usize];
                }
                Op::Tanh(a) => {
                    let y = self.vals[i];
                    self.adjoints[a as usize] += d * (1.0 - y * y);
                }
                Op::Softplus(a) => {
                    self.adjoints[a as usize] += d * sigmoid(self.vals[a as usize]);
                }
                Op::Exp(a) => {
                    self.adjoints[a as usize] += d * self.vals[i];
                }
                Op::Log(a) => {
                    self.adjoints[a as usize] += d / self.vals[a as usize];
                }
                Op::Neg(a) => {
                    self.adjoints[a as usize] -= d;
                }
                Op::Recip(a) => {
                    let y = self.vals[i];
                    self.adjoints[a as usize] -= d * y * y;
                }
            }
        }
        Ok(())
    }

    pub fn adjoint(&self, id: NodeId) -> f64 {
        self.adjoints[id.index()]
    }
}

/// Numerically stable softplus; shared by the graph op and plain-float code
/// so both paths produce identical bits.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// 1 / (1 + e^-x). Mirrors the graph composition `recip(1 + exp(neg x))`
/// exactly, including its saturation to 0 for very negative x.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of [`softplus`]: the raw value whose softplus is `y` (y > 0).
pub fn inv_softplus(y: f64) -> f64 {
    assert!(y > 0.0, "inv_softplus requires a positive target");
    if y > 30.0 {
        // softplus(x) = x to machine precision in this range
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Unconstrained parameterization of a positive quantity via softplus.
///
/// `effective = softplus(raw)` is positive for every finite raw value and
/// strictly increasing in it, so optimizers can move `raw` freely while the
/// consuming network only ever sees positive weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositiveReparam {
    pub raw: f64,
}

impl PositiveReparam {
    pub fn new(raw: f64) -> Self {
        PositiveReparam { raw }
    }

    pub fn from_effective(effective: f64) -> Self {
        PositiveReparam {
            raw: inv_softplus(effective),
        }
    }

    pub fn effective(self) -> f64 {
        softplus(self.raw)
    }
}

/// Activation functions supported by the layered builder below.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Softplus,
}

impl Activation {
    fn apply(self, g: &mut Graph, z: NodeId) -> NodeId {
        match self {
            Activation::Linear => z,
            Activation::Tanh => g.tanh(z),
            Activation::Softplus => g.softplus(z),
        }
    }

    /// Builds act'(z) as graph nodes. `out` is the already-built act(z),
    /// reused where the derivative is cheaper in terms of the output.
    fn derivative(self, g: &mut Graph, z: NodeId, out: NodeId) -> Option<NodeId> {
        match self {
            Activation::Linear => None,
            Activation::Tanh => {
                let sq = g.square(out);
                let one = g.constant(1.0);
                Some(g.sub(one, sq))
            }
            Activation::Softplus => Some(g.sigmoid(z)),
        }
    }
}

/// One dense layer to build: `out = act(W inputs + bias)` with `weights`
/// stored row-major (`weights[o * in_dim + i]`). The node ids are whatever
/// the caller wants multiplied in — typically softplus-reparameterized
/// weights for monotone networks.
pub struct LayerSpec<'a> {
    pub weights: &'a [NodeId],
    pub bias: &'a [NodeId],
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

struct LayerTrace {
    weights: Vec<NodeId>,
    pre: Vec<NodeId>,
    out: Vec<NodeId>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

/// Record of a built feed-forward pass, retaining the per-layer
/// pre-activations needed to assemble derivative graphs.
pub struct MlpTrace {
    layers: Vec<LayerTrace>,
}

impl MlpTrace {
    pub fn outputs(&self) -> &[NodeId] {
        &self.layers.last().expect("mlp has layers").out
    }

    pub fn output(&self) -> NodeId {
        let outs = self.outputs();
        assert_eq!(outs.len(), 1, "scalar output expected");
        outs[0]
    }
}

/// Builds the forward pass of a dense network over `inputs`.
///
/// Accumulation order is fixed (bias first, then inputs left to right) so
/// repeated builds of the same network are bitwise reproducible and match
/// the plain-float evaluation path.
pub fn build_mlp(g: &mut Graph, inputs: &[NodeId], layers: &[LayerSpec]) -> MlpTrace {
    assert!(!layers.is_empty(), "mlp needs at least one layer");
    let mut current: Vec<NodeId> = inputs.to_vec();
    let mut trace = Vec::with_capacity(layers.len());
    for spec in layers {
        assert_eq!(spec.in_dim, current.len(), "layer input dimension mismatch");
        assert_eq!(spec.weights.len(), spec.in_dim * spec.out_dim);
        assert_eq!(spec.bias.len(), spec.out_dim);
        let mut pre = Vec::with_capacity(spec.out_dim);
        let mut out = Vec::with_capacity(spec.out_dim);
        for o in 0..spec.out_dim {
            let mut acc = spec.bias[o];
            for (i, &x) in current.iter().enumerate() {
                let p = g.mul(spec.weights[o * spec.in_dim + i], x);
                acc = g.add(acc, p);
            }
            pre.push(acc);
            out.push(spec.activation.apply(g, acc));
        }
        trace.push(LayerTrace {
            weights: spec.weights.to_vec(),
            pre,
            out: out.clone(),
            in_dim: spec.in_dim,
            out_dim: spec.out_dim,
            activation: spec.activation,
        });
        current = out;
    }
    MlpTrace { layers: trace }
}

/// Builds the analytic derivative of a scalar-output network with respect
/// to one of its inputs, as ordinary graph nodes.
///
/// Layer by layer the chain rule gives
/// `d a_k / d x = act'(z_k) ⊙ (W_k · d a_{k-1} / d x)` with the base case
/// selecting the `input_index` column of the first weight matrix. The
/// returned node is differentiable by `backward` like any other, which is
/// what makes log-slope loss terms exact.
pub fn input_derivative(g: &mut Graph, trace: &MlpTrace, input_index: usize) -> NodeId {
    let first = &trace.layers[0];
    assert!(input_index < first.in_dim, "input index out of range");

    // d a_0 / d x for the first layer: the selected weight column scaled
    // by the activation slope.
    let mut deriv: Vec<NodeId> = Vec::with_capacity(first.out_dim);
    for o in 0..first.out_dim {
        let w = first.weights[o * first.in_dim + input_index];
        let slope = first.activation.derivative(g, first.pre[o], first.out[o]);
        deriv.push(match slope {
            Some(s) => g.mul(s, w),
            None => w,
        });
    }

    for layer in &trace.layers[1..] {
        let mut next = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let mut acc = g.mul(layer.weights[o * layer.in_dim], deriv[0]);
            for i in 1..layer.in_dim {
                let p = g.mul(layer.weights[o * layer.in_dim + i], deriv[i]);
                acc = g.add(acc, p);
            }
            let slope = layer.activation.derivative(g, layer.pre[o], layer.out[o]);
            next.push(match slope {
                Some(s) => g.mul(s, acc),
                None => acc,
            });
        }
        deriv = next;
    }

    assert_eq!(deriv.len(), 1, "scalar output expected");
    deriv[0]
}

/// One dense layer as plain values; the float twin of [`LayerSpec`].
pub struct LayerValues<'a> {
    pub weights: &'a [f64],
    pub bias: &'a [f64],
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

fn activation_value(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Linear => z,
        Activation::Tanh => z.tanh(),
        Activation::Softplus => softplus(z),
    }
}

fn activation_slope_value(act: Activation, z: f64, out: f64) -> f64 {
    match act {
        Activation::Linear => 1.0,
        Activation::Tanh => 1.0 - out * out,
        Activation::Softplus => sigmoid(z),
    }
}

/// Plain-float forward pass mirroring [`build_mlp`] operation for
/// operation, so both paths agree bitwise.
pub fn mlp_value(inputs: &[f64], layers: &[LayerValues]) -> Vec<f64> {
    let mut current = inputs.to_vec();
    for spec in layers {
        assert_eq!(spec.in_dim, current.len(), "layer input dimension mismatch");
        let mut out = Vec::with_capacity(spec.out_dim);
        for o in 0..spec.out_dim {
            let mut acc = spec.bias[o];
            for (i, &x) in current.iter().enumerate() {
                acc += spec.weights[o * spec.in_dim + i] * x;
            }
            out.push(activation_value(spec.activation, acc));
        }
        current = out;
    }
    current
}

/// Plain-float twin of [`build_mlp`] followed by [`input_derivative`]:
/// returns the scalar output and its derivative with respect to
/// `inputs[input_index]`, with the same accumulation order as the graph.
pub fn mlp_value_with_input_derivative(
    inputs: &[f64],
    layers: &[LayerValues],
    input_index: usize,
) -> (f64, f64) {
    let mut current = inputs.to_vec();
    let mut deriv: Vec<f64> = Vec::new();
    for (k, spec) in layers.iter().enumerate() {
        assert_eq!(spec.in_dim, current.len(), "layer input dimension mismatch");
        let mut out = Vec::with_capacity(spec.out_dim);
        let mut next_deriv = Vec::with_capacity(spec.out_dim);
        for o in 0..spec.out_dim {
            let mut acc = spec.bias[o];
            for (i, &x) in current.iter().enumerate() {
                acc += spec.weights[o * spec.in_dim + i] * x;
            }
            let y = activation_value(spec.activation, acc);
            let slope = activation_slope_value(spec.activation, acc, y);
            let chain = if k == 0 {
                spec.weights[o * spec.in_dim + input_index]
            } else {
                let mut s = spec.weights[o * spec.in_dim] * deriv[0];
                for i in 1..spec.in_dim {
                    s += spec.weights[o * spec.in_dim + i] * deriv[i];
                }
                s
            };
            next_deriv.push(match spec.activation {
                Activation::Linear => chain,
                _ => slope * chain,
            });
            out.push(y);
        }
        current = out;
        deriv = next_deriv;
    }
    assert_eq!(current.len(), 1, "scalar output expected");
    (current[0], deriv[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn softplus_at_zero_is_ln_two() {
        let mut g = Graph::new();
        let x = g.input(0.0);
        let y = g.softplus(x);
        let v = g.forward(y).unwrap();
        assert!((v - LN_2).abs() < 1e-15);
    }

    #[test]
    fn tanh_at_zero_is_zero() {
        let mut g = Graph::new();
        let x = g.input(0.0);
        let y = g.tanh(x);
        assert_eq!(g.forward(y).unwrap(), 0.0);
    }

    #[test]
    fn log_of_negative_is_domain_error() {
        let mut g = Graph::new();
        let x = g.input(-1.0);
        let y = g.log(x);
        match g.forward(y) {
            Err(GraphError::LogOfNonPositive { node, value }) => {
                assert_eq!(node, y.index());
                assert_eq!(value, -1.0);
            }
            other => panic!("expected log domain error, got {other:?}"),
        }
    }

    #[test]
    fn recip_of_zero_is_domain_error() {
        let mut g = Graph::new();
        let x = g.input(0.0);
        let y = g.recip(x);
        assert!(matches!(
            g.forward(y),
            Err(GraphError::ReciprocalOfNonPositive { .. })
        ));
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.input(3.0);
        let y = g.square(x);
        assert_eq!(g.forward(y).unwrap(), 9.0);
        g.backward(y).unwrap();
        assert_eq!(g.adjoint(x), 6.0);
    }

    #[test]
    fn softplus_gradient_at_zero_is_half() {
        let mut g = Graph::new();
        let x = g.input(0.0);
        let y = g.softplus(x);
        g.forward(y).unwrap();
        g.backward(y).unwrap();
        assert!((g.adjoint(x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn backward_before_forward_is_an_error() {
        let mut g = Graph::new();
        let x = g.input(1.0);
        let y = g.exp(x);
        assert_eq!(g.backward(y), Err(GraphError::BackwardBeforeForward));
    }

    #[test]
    fn set_input_invalidates_forward() {
        let mut g = Graph::new();
        let x = g.input(2.0);
        let y = g.square(x);
        assert_eq!(g.forward(y).unwrap(), 4.0);
        g.set_input(x, 5.0);
        assert_eq!(g.forward(y).unwrap(), 25.0);
    }

    #[test]
    fn identical_graphs_give_bitwise_identical_results() {
        let build = || {
            let mut g = Graph::new();
            let x = g.input(0.731);
            let y = g.input(-1.25);
            let sp = g.softplus(x);
            let t = g.tanh(y);
            let p = g.mul(sp, t);
            let e = g.exp(p);
            let out = g.add(e, sp);
            let v = g.forward(out).unwrap();
            g.backward(out).unwrap();
            (v, g.adjoint(x), g.adjoint(y))
        };
        let a = build();
        let b = build();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(a.2.to_bits(), b.2.to_bits());
    }

    #[test]
    fn positive_reparam_is_positive_and_monotone() {
        for raw in [-50.0, -3.0, 0.0, 2.5, 40.0] {
            assert!(PositiveReparam::new(raw).effective() > 0.0);
        }
        let mut prev = PositiveReparam::new(-6.0).effective();
        for i in 1..100 {
            let cur = PositiveReparam::new(-6.0 + 0.12 * i as f64).effective();
            assert!(cur > prev);
            prev = cur;
        }
        let round = PositiveReparam::from_effective(2.0).effective();
        assert!((round - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_phi_derivative_is_the_weight() {
        // phi(tau) = w * tau + b with w = 2: slope is 2 everywhere.
        let mut g = Graph::new();
        let tau = g.input(0.4);
        let w = g.constant(2.0);
        let b = g.constant(0.3);
        let trace = build_mlp(
            &mut g,
            &[tau],
            &[LayerSpec {
                weights: &[w],
                bias: &[b],
                in_dim: 1,
                out_dim: 1,
                activation: Activation::Linear,
            }],
        );
        let d = input_derivative(&mut g, &trace, 0);
        for t in [0.0, 0.4, 3.7] {
            g.set_input(tau, t);
            g.forward(d).unwrap();
            assert_eq!(g.value(d), 2.0);
        }
    }

    #[test]
    fn single_layer_softplus_derivative_matches_finite_differences() {
        // Raw weights 0 => effective ln 2 after softplus reparameterization.
        let phi_at = |tau: f64| -> f64 {
            let mut g = Graph::new();
            let t = g.input(tau);
            let raw = g.constant(0.0);
            let w = g.softplus(raw);
            let b = g.constant(0.1);
            let trace = build_mlp(
                &mut g,
                &[t],
                &[LayerSpec {
                    weights: &[w],
                    bias: &[b],
                    in_dim: 1,
                    out_dim: 1,
                    activation: Activation::Softplus,
                }],
            );
            g.forward(trace.output()).unwrap()
        };
        let mut g = Graph::new();
        let t = g.input(0.0);
        let raw = g.constant(0.0);
        let w = g.softplus(raw);
        let b = g.constant(0.1);
        let trace = build_mlp(
            &mut g,
            &[t],
            &[LayerSpec {
                weights: &[w],
                bias: &[b],
                in_dim: 1,
                out_dim: 1,
                activation: Activation::Softplus,
            }],
        );
        let d = input_derivative(&mut g, &trace, 0);
        let analytic = g.forward(d).unwrap();
        // Closed form: d/dtau softplus(w tau + b) = w * sigmoid(w tau + b).
        let expected = LN_2 * sigmoid(0.1);
        assert!((analytic - expected).abs() < 1e-12);
        let h = 1e-6;
        let fd = (phi_at(h) - phi_at(-h)) / (2.0 * h);
        assert!((analytic - fd).abs() < 1e-6, "analytic {analytic} fd {fd}");
    }
}
