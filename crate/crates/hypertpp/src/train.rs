//! Optimization: Adam over flat parameter vectors, mini-batched
//! maximum-likelihood training of the zero-shot objective, and sequential
//! continual learning where a snapshot of the weight generators anchors a
//! penalty on regenerated weights for previously seen descriptors.
//!
//! Mini-batches are fixed-size windows of consecutive events from one
//! sequence, shuffled across the training set each epoch. All randomness is
//! seeded; two runs with the same configuration are bitwise identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diffgraph::{softplus, Graph, NodeId};
use crate::hypernet::{build_generator, generator_forward, Variant};
use crate::model::{build_loss, extract_grads, ModelConfig, ModelKind};
use crate::nhp::HazardWeights;
use crate::seqdata::{portion_bounds, Descriptor, EventSequence};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("parameter/gradient shape mismatch: {params} vs {grads}")]
    ShapeMismatch { params: usize, grads: usize },
    #[error("non-finite gradient at coordinate {index}; step skipped")]
    NonFiniteGradient { index: usize },
    #[error("training diverged: no finite batch loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no trainable events in the training set")]
    NoTrainingEvents,
    #[error("continual state inconsistent: stage {stage} with {descriptors} stored descriptors")]
    BadContinualState { stage: usize, descriptors: usize },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Training hyperparameters. `history_len` is the RNN window (the `M` key
/// in config files); `beta` is the continual-learning regularization
/// strength.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_events: usize,
    pub history_len: usize,
    pub variant: ModelKind,
    pub beta: f64,
    pub seed: u64,
    pub patience: usize,
    pub hidden: usize,
    pub hazard_hidden: Vec<usize>,
    pub hyper_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            beta1: 0.90,
            beta2: 0.99,
            epsilon: 1e-8,
            epochs: 300,
            batch_events: 64,
            history_len: 20,
            variant: ModelKind::HyperFnn,
            beta: 0.5,
            seed: 0,
            patience: 30,
            hidden: 16,
            hazard_hidden: vec![16, 16],
            hyper_hidden: 32,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self, descriptor_dim: usize) -> ModelConfig {
        ModelConfig {
            kind: self.variant,
            descriptor_dim,
            hidden: self.hidden,
            hazard_hidden: self.hazard_hidden.clone(),
            hyper_hidden: self.hyper_hidden,
            history_len: self.history_len,
            hazard_linear_output: false,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |message: &str| TrainError::Config {
            line: 0,
            message: message.to_string(),
        };
        if !(self.lr > 0.0) {
            return Err(bad("lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(bad("beta1 and beta2 must lie in [0, 1)"));
        }
        if self.epsilon <= 0.0 {
            return Err(bad("epsilon must be positive"));
        }
        if self.epochs == 0 || self.batch_events == 0 || self.history_len == 0 {
            return Err(bad("epochs, batch_events and M must be positive"));
        }
        if self.beta < 0.0 {
            return Err(bad("beta must be non-negative"));
        }
        if self.hidden == 0 || self.hyper_hidden == 0 {
            return Err(bad("hidden and hyper_hidden must be positive"));
        }
        Ok(())
    }

    /// Parses the flat `key = value` config format. Unknown and duplicate
    /// keys are rejected with their line number.
    pub fn parse(contents: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw_line) in contents.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| TrainError::Config {
                line: line_no,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(TrainError::Config {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
            let parse_err = |message: String| TrainError::Config {
                line: line_no,
                message,
            };
            macro_rules! num {
                ($ty:ty) => {
                    value
                        .parse::<$ty>()
                        .map_err(|e| parse_err(format!("bad value for {key}: {e}")))?
                };
            }
            match key {
                "lr" => cfg.lr = num!(f64),
                "beta1" => cfg.beta1 = num!(f64),
                "beta2" => cfg.beta2 = num!(f64),
                "epsilon" => cfg.epsilon = num!(f64),
                "epochs" => cfg.epochs = num!(usize),
                "batch_events" => cfg.batch_events = num!(usize),
                "M" => cfg.history_len = num!(usize),
                "variant" => {
                    cfg.variant = ModelKind::parse(value)
                        .ok_or_else(|| parse_err(format!("unknown variant {value:?}")))?;
                }
                "beta" => cfg.beta = num!(f64),
                "seed" => cfg.seed = num!(u64),
                "patience" => cfg.patience = num!(usize),
                "hidden" => cfg.hidden = num!(usize),
                "hyper_hidden" => cfg.hyper_hidden = num!(usize),
                "hazard_hidden" => {
                    cfg.hazard_hidden = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| {
                            s.trim()
                                .parse::<usize>()
                                .map_err(|e| parse_err(format!("bad hazard_hidden: {e}")))
                        })
                        .collect::<Result<_, _>>()?;
                }
                other => {
                    return Err(TrainError::Config {
                        line: line_no,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_file_string(&self) -> String {
        let hazard: Vec<String> = self.hazard_hidden.iter().map(|w| w.to_string()).collect();
        format!(
            "lr = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\nepochs = {}\nbatch_events = {}\nM = {}\nvariant = {}\nbeta = {}\nseed = {}\npatience = {}\nhidden = {}\nhazard_hidden = {}\nhyper_hidden = {}\n",
            self.lr,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.epochs,
            self.batch_events,
            self.history_len,
            self.variant,
            self.beta,
            self.seed,
            self.patience,
            self.hidden,
            hazard.join(","),
            self.hyper_hidden,
        )
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
        }
    }
}

/// Standard bias-corrected Adam update, in place. A non-finite gradient
/// leaves parameters and moments untouched and the step counter
/// unincremented.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(TrainError::ShapeMismatch {
            params: params.len(),
            grads: grads.len(),
        });
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { index });
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let m = cfg.beta1 * state.first_moment[i] + (1.0 - cfg.beta1) * grads[i];
        let v = cfg.beta2 * state.second_moment[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// One sequence's training material: the events whose likelihood terms are
/// optimized (ascending zero-based indices, each >= 1).
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub seq: EventSequence,
    pub descriptor: Vec<f64>,
    pub train_events: Vec<usize>,
}

impl TrainItem {
    /// All predictable events of the sequence.
    pub fn whole(seq: EventSequence, descriptor: Vec<f64>) -> Self {
        let train_events = (1..seq.len()).collect();
        TrainItem {
            seq,
            descriptor,
            train_events,
        }
    }
}

/// Events used for validation scoring.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub seq: EventSequence,
    pub descriptor: Vec<f64>,
    pub events: Vec<usize>,
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub stage: usize,
    pub epoch: usize,
    pub split: &'static str,
    pub mnll: f64,
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::from("stage,epoch,split,mnll\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.stage, r.epoch, r.split, r.mnll));
    }
    out
}

/// Result of one optimization run: the best-validation parameters, the
/// final parameters and the per-epoch log.
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub log: Vec<LogRow>,
    pub best_val_mnll: f64,
    pub epochs_run: usize,
    pub skipped_batches: usize,
}

/// Snapshot state carried across continual-learning stages: the generator
/// parameters frozen after the previous stage and the descriptors of all
/// previously seen sequences. No event data is retained.
#[derive(Debug, Clone)]
pub struct CLState {
    pub theta_snapshot: Vec<f64>,
    pub seen_descriptors: Vec<Vec<f64>>,
    pub beta: f64,
    pub sequence_index: usize,
}

impl CLState {
    pub fn start(beta: f64) -> Self {
        CLState {
            theta_snapshot: Vec::new(),
            seen_descriptors: Vec::new(),
            beta,
            sequence_index: 1,
        }
    }

    /// Bytes retained on behalf of past sequences: the shared snapshot plus
    /// one descriptor per sequence.
    pub fn retained_bytes(&self) -> usize {
        (self.theta_snapshot.len()
            + self.seen_descriptors.iter().map(|d| d.len()).sum::<usize>())
            * std::mem::size_of::<f64>()
    }

    fn check(&self) -> Result<(), TrainError> {
        if self.sequence_index == 0 || self.seen_descriptors.len() != self.sequence_index - 1 {
            return Err(TrainError::BadContinualState {
                stage: self.sequence_index,
                descriptors: self.seen_descriptors.len(),
            });
        }
        Ok(())
    }
}

/// Anchor outputs of the generators at the snapshot parameters, one entry
/// per past descriptor, in the same space the penalty is computed in
/// (weights as consumed: softplus of raw hazard weights, raw biases, raw
/// RNN weights).
struct RegAnchors {
    hazard: Vec<Vec<f64>>,
    rnn: Vec<Vec<f64>>,
}

fn hazard_consumed_space(raw: &[f64], weight_mask: &[bool]) -> Vec<f64> {
    raw.iter()
        .zip(weight_mask)
        .map(|(&v, &is_weight)| if is_weight { softplus(v) } else { v })
        .collect()
}

fn compute_anchors(model: &ModelConfig, cl: &CLState) -> RegAnchors {
    let topo = model.nhp_topology();
    let mask = HazardWeights::weight_mask(&topo);
    let ft = model.hazard_generator_topology();
    let fr = model.rnn_generator_topology();
    let mut hazard = Vec::new();
    let mut rnn = Vec::new();
    if cl.sequence_index > 1 {
        for d in &cl.seen_descriptors {
            if let Some(ft) = &ft {
                let seg = model.segment("hyper_hazard").unwrap();
                let raw = generator_forward(&cl.theta_snapshot[seg.range()], ft, d);
                hazard.push(hazard_consumed_space(&raw, &mask));
            }
            if let Some(fr) = &fr {
                let seg = model.segment("hyper_rnn").unwrap();
                rnn.push(generator_forward(&cl.theta_snapshot[seg.range()], fr, d));
            }
        }
    }
    RegAnchors { hazard, rnn }
}

/// Builds the snapshot penalty
/// `(beta / (s-1)) * sum_c (||f_t(d_c) - anchor||^2 [+ ||f_r(d_c) - anchor||^2])`
/// as graph nodes over the current parameters. Returns `None` when the
/// penalty is identically zero (first stage, zero beta, or a model without
/// generators).
fn build_regularizer(
    g: &mut Graph,
    theta_nodes: &[NodeId],
    model: &ModelConfig,
    cl: &CLState,
    anchors: &RegAnchors,
) -> Option<NodeId> {
    let s = cl.sequence_index;
    if s <= 1 || cl.beta == 0.0 {
        return None;
    }
    let variant = model.kind.variant()?;
    let topo = model.nhp_topology();
    let mask = HazardWeights::weight_mask(&topo);
    let mut sq_terms: Vec<NodeId> = Vec::new();
    for (c, d) in cl.seen_descriptors.iter().enumerate() {
        let ft = model.hazard_generator_topology().unwrap();
        let seg = model.segment("hyper_hazard").unwrap();
        let outputs = build_generator(g, &theta_nodes[seg.range()], &ft, d);
        for (k, &out) in outputs.iter().enumerate() {
            let consumed = if mask[k] { g.softplus(out) } else { out };
            let anchor = g.constant(anchors.hazard[c][k]);
            let diff = g.sub(consumed, anchor);
            sq_terms.push(g.square(diff));
        }
        if variant == Variant::FnnRnn {
            let fr = model.rnn_generator_topology().unwrap();
            let seg = model.segment("hyper_rnn").unwrap();
            let outputs = build_generator(g, &theta_nodes[seg.range()], &fr, d);
            for (k, &out) in outputs.iter().enumerate() {
                let anchor = g.constant(anchors.rnn[c][k]);
                let diff = g.sub(out, anchor);
                sq_terms.push(g.square(diff));
            }
        }
    }
    let total = g.sum(&sq_terms);
    let scale = g.constant(cl.beta / (s - 1) as f64);
    Some(g.mul(total, scale))
}

/// Mean negative log-likelihood of a batch of whole sequences under the
/// zero-shot objective, with gradients for every parameter.
pub fn zsl_loss(
    batch: &[(EventSequence, Vec<f64>)],
    theta: &[f64],
    model: &ModelConfig,
) -> Result<(f64, Vec<f64>), TrainError> {
    assert!(!batch.is_empty(), "empty batch");
    let mut g = Graph::new();
    let mut grads = vec![0.0; theta.len()];
    let mut total = 0.0;
    let mut count = 0usize;
    for (seq, d) in batch {
        let events: Vec<usize> = (1..seq.len()).collect();
        g.clear();
        let lg = build_loss(model, &mut g, theta, seq, d, &events);
        let value = g
            .forward(lg.nll_sum)
            .map_err(|_| TrainError::Diverged { epoch: 0 })?;
        if !value.is_finite() {
            return Err(TrainError::Diverged { epoch: 0 });
        }
        g.backward(lg.nll_sum).expect("forward just ran");
        for (acc, part) in grads.iter_mut().zip(extract_grads(&g, &lg.theta_nodes)) {
            *acc += part;
        }
        total += value;
        count += lg.n_events;
    }
    let scale = 1.0 / count as f64;
    for v in grads.iter_mut() {
        *v *= scale;
    }
    Ok((total * scale, grads))
}

/// Continual-learning loss for one sequence at stage `cl.sequence_index`:
/// mean NLL over the sequence's predictable events plus the snapshot
/// penalty. With `beta = 0` or at the first stage this is exactly the plain
/// loss.
pub fn cl_loss(
    seq: &EventSequence,
    descriptor: &[f64],
    theta: &[f64],
    cl: &CLState,
    model: &ModelConfig,
) -> Result<(f64, Vec<f64>), TrainError> {
    cl.check()?;
    let anchors = compute_anchors(model, cl);
    let events: Vec<usize> = (1..seq.len()).collect();
    let mut g = Graph::new();
    let lg = build_loss(model, &mut g, theta, seq, descriptor, &events);
    let inv_n = g.constant(1.0 / lg.n_events as f64);
    let mean_nll = g.mul(lg.nll_sum, inv_n);
    let objective = match build_regularizer(&mut g, &lg.theta_nodes, model, cl, &anchors) {
        Some(reg) => g.add(mean_nll, reg),
        None => mean_nll,
    };
    let value = g
        .forward(objective)
        .map_err(|_| TrainError::Diverged { epoch: 0 })?;
    g.backward(objective).expect("forward just ran");
    Ok((value, extract_grads(&g, &lg.theta_nodes)))
}

struct BatchRef {
    item: usize,
    events: Vec<usize>,
}

fn make_batches(items: &[TrainItem], batch_events: usize) -> Vec<BatchRef> {
    let mut batches = Vec::new();
    for (i, item) in items.iter().enumerate() {
        for chunk in item.train_events.chunks(batch_events) {
            batches.push(BatchRef {
                item: i,
                events: chunk.to_vec(),
            });
        }
    }
    batches
}

/// Mean NLL over evaluation items via the plain-float path; `None` when a
/// term is non-finite or there are no events.
fn val_mnll(model: &ModelConfig, theta: &[f64], items: &[EvalItem]) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for item in items {
        if item.events.is_empty() {
            continue;
        }
        match model.nll_events(theta, &item.seq, &item.descriptor, &item.events) {
            Ok(sum) if sum.is_finite() => {
                total += sum;
                count += item.events.len();
            }
            _ => return None,
        }
    }
    if count == 0 {
        None
    } else {
        Some(total / count as f64)
    }
}

struct FitSpec<'a> {
    items: &'a [TrainItem],
    val_items: &'a [EvalItem],
    stage: usize,
    seed: u64,
    reg: Option<(&'a CLState, &'a RegAnchors)>,
}

/// Shared optimization loop for the zero-shot and continual paths.
fn fit(
    model: &ModelConfig,
    cfg: &TrainConfig,
    theta_init: Vec<f64>,
    spec: FitSpec,
) -> Result<TrainOutcome, TrainError> {
    let mut theta = theta_init;
    let mut adam = AdamState::new(theta.len());
    let batches = make_batches(spec.items, cfg.batch_events);
    if batches.is_empty() {
        return Err(TrainError::NoTrainingEvents);
    }
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g = Graph::new();

    let mut log = Vec::new();
    let mut best_theta = theta.clone();
    let mut best_val = f64::INFINITY;
    let mut stall = 0usize;
    let mut skipped_batches = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 1..=cfg.epochs {
        epochs_run = epoch;
        // Fisher-Yates over the batch order, fresh each epoch.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_nll = 0.0;
        let mut epoch_events = 0usize;
        let mut finite_batches = 0usize;
        for &b in &order {
            let batch = &batches[b];
            let item = &spec.items[batch.item];
            g.clear();
            let lg = build_loss(
                model,
                &mut g,
                &theta,
                &item.seq,
                &item.descriptor,
                &batch.events,
            );
            let inv_n = g.constant(1.0 / lg.n_events as f64);
            let mean_nll = g.mul(lg.nll_sum, inv_n);
            let objective = match spec.reg {
                Some((cl, anchors)) => {
                    match build_regularizer(&mut g, &lg.theta_nodes, model, cl, anchors) {
                        Some(reg) => g.add(mean_nll, reg),
                        None => mean_nll,
                    }
                }
                None => mean_nll,
            };
            let value = match g.forward(objective) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    skipped_batches += 1;
                    continue;
                }
            };
            g.backward(objective).expect("forward just ran");
            let grads = extract_grads(&g, &lg.theta_nodes);
            match adam_step(&mut theta, &grads, &mut adam, cfg) {
                Ok(()) => {}
                Err(TrainError::NonFiniteGradient { .. }) => {
                    skipped_batches += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
            let _ = value;
            epoch_nll += g.value(lg.nll_sum);
            epoch_events += lg.n_events;
            finite_batches += 1;
        }
        if finite_batches == 0 {
            return Err(TrainError::Diverged { epoch });
        }
        let train_mnll = epoch_nll / epoch_events as f64;
        log.push(LogRow {
            stage: spec.stage,
            epoch,
            split: "train",
            mnll: train_mnll,
        });
        let val = val_mnll(model, &theta, spec.val_items).unwrap_or(f64::INFINITY);
        let selection = if spec.val_items.iter().all(|v| v.events.is_empty()) {
            train_mnll
        } else {
            val
        };
        if !spec.val_items.is_empty() {
            log.push(LogRow {
                stage: spec.stage,
                epoch,
                split: "val",
                mnll: val,
            });
        }
        if selection < best_val {
            best_val = selection;
            best_theta = theta.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        theta: best_theta,
        final_theta: theta,
        log,
        best_val_mnll: best_val,
        epochs_run,
        skipped_batches,
    })
}

/// Trains on the seen set under the zero-shot objective, selecting the
/// epoch with the best validation MNLL.
pub fn train_zsl(
    items: &[TrainItem],
    val_items: &[EvalItem],
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let theta = model.init_params(cfg.seed);
    fit(
        model,
        cfg,
        theta,
        FitSpec {
            items,
            val_items,
            stage: 0,
            seed: cfg.seed,
            reg: None,
        },
    )
}

/// Per-stage snapshot of a continual run.
pub struct StageCheckpoint {
    pub stage: usize,
    pub theta: Vec<f64>,
}

pub struct ContinualOutcome {
    pub final_theta: Vec<f64>,
    pub checkpoints: Vec<StageCheckpoint>,
    pub log: Vec<LogRow>,
    pub state: CLState,
}

fn stage_seed(base: u64, stage: usize) -> u64 {
    base.wrapping_add(((stage - 1) as u64).wrapping_mul(0x9e3779b97f4a7c15))
}

/// Processes sequences strictly in stream order. Before each stage the
/// current parameters are frozen as the snapshot and the previous
/// descriptor is appended to the seen list; the stage then trains on the
/// new sequence's first 70% of events (validating on the next 10%) under
/// the snapshot penalty. Event data of past sequences is never touched.
pub fn train_continual(
    stream: &[(EventSequence, Descriptor)],
    model: &ModelConfig,
    cfg: &TrainConfig,
    beta: f64,
) -> Result<ContinualOutcome, TrainError> {
    cfg.validate()?;
    assert!(!stream.is_empty(), "empty stream");
    let mut theta = model.init_params(cfg.seed);
    let mut cl = CLState::start(beta);
    let mut checkpoints = Vec::with_capacity(stream.len());
    let mut log = Vec::new();

    for (idx, (seq, desc)) in stream.iter().enumerate() {
        let stage = idx + 1;
        if stage > 1 {
            cl.theta_snapshot = theta.clone();
            cl.seen_descriptors.push(stream[idx - 1].1.values.clone());
        }
        cl.sequence_index = stage;
        cl.check()?;
        let anchors = compute_anchors(model, &cl);

        let (train_end, val_end) = portion_bounds(seq.len());
        let train_events: Vec<usize> = (1..train_end.min(seq.len())).collect();
        let val_events: Vec<usize> = (train_end.max(1)..val_end.min(seq.len())).collect();
        let items = [TrainItem {
            seq: seq.clone(),
            descriptor: desc.values.clone(),
            train_events,
        }];
        let val_items = [EvalItem {
            seq: seq.clone(),
            descriptor: desc.values.clone(),
            events: val_events,
        }];
        let reg = if stage > 1 { Some((&cl, &anchors)) } else { None };
        let outcome = fit(
            model,
            cfg,
            theta,
            FitSpec {
                items: &items,
                val_items: &val_items,
                stage,
                seed: stage_seed(cfg.seed, stage),
                reg,
            },
        )?;
        theta = outcome.theta;
        log.extend(outcome.log);
        checkpoints.push(StageCheckpoint {
            stage,
            theta: theta.clone(),
        });
    }

    Ok(ContinualOutcome {
        final_theta: theta,
        checkpoints,
        log,
        state: cl,
    })
}
