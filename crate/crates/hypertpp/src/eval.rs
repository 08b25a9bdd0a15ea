//! Metrics and protocols: mean negative log-likelihood and mean absolute
//! error with single-step lookahead, the three zero-shot evaluation
//! protocols, continual-learning forgetting matrices with averaged curves,
//! and deterministic CSV/SVG report emission.
//!
//! MNLL shares the per-event likelihood path with training; MAE预dicts each
//! test event from its true past via the bisection median.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::hawkes::{self, HawkesParams};
use crate::model::{ModelConfig, ModelKind};
use crate::nhp::{self, NhpError};
use crate::report::{csv_field, csv_table, svg_line_chart, Series};
use crate::seqdata::{
    event_roles, portion_bounds, Corpus, CorpusSplit, Descriptor, EventRole, EventSequence,
    SplitSetup,
};
use crate::train::{
    train_continual, train_zsl, EvalItem, LogRow, TrainConfig, TrainError, TrainItem,
};

pub const DEFAULT_PREDICT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nhp(#[from] NhpError),
    #[error("sequence {id} not present in the split")]
    UnknownSequence { id: String },
    #[error("split setup {split} does not match requested protocol {requested}")]
    SetupMismatch { split: String, requested: String },
}

/// One sequence's evaluation workload: which events to score.
#[derive(Debug, Clone)]
pub struct EvalTarget {
    pub id: String,
    pub seq: EventSequence,
    pub descriptor: Vec<f64>,
    pub events: Vec<usize>,
}

/// Per-sequence metric contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSequence {
    pub id: String,
    pub mnll: f64,
    pub n_events: usize,
    /// NaN when no event of the sequence was predictable.
    pub mae: f64,
    pub n_predicted: usize,
}

#[derive(Debug, Clone)]
pub struct MnllResult {
    pub mnll: f64,
    pub total_nll: f64,
    pub n_events: usize,
    pub per_sequence: Vec<(String, f64, usize)>,
}

#[derive(Debug, Clone)]
pub struct MaeResult {
    pub mae: f64,
    pub total_abs_err: f64,
    pub n_predicted: usize,
    /// Events skipped because no history window precedes them.
    pub skipped_no_history: usize,
    /// (sequence id, event index, reason)
    pub failures: Vec<(String, usize, String)>,
    pub per_sequence: Vec<(String, f64, usize)>,
}

fn chunk_ranges(n: usize, threads: usize) -> Vec<std::ops::Range<usize>> {
    let threads = threads.max(1).min(n.max(1));
    let base = n / threads;
    let extra = n % threads;
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 0..threads {
        let len = base + usize::from(i < extra);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

/// Mean negative log-likelihood per event over all listed targets.
/// Parallel across targets with a deterministic ordered reduction.
pub fn mnll(
    model: &ModelConfig,
    theta: &[f64],
    targets: &[EvalTarget],
    threads: usize,
) -> Result<MnllResult, EvalError> {
    let mut slots: Vec<Option<Result<(f64, usize), NhpError>>> =
        (0..targets.len()).map(|_| None).collect();
    let compute = |t: &EvalTarget| -> Result<(f64, usize), NhpError> {
        if t.events.is_empty() {
            return Ok((0.0, 0));
        }
        let (rnn, hazard) = model.sequence_weights(theta, &t.descriptor);
        let sum = model.nll_events_with_weights(&rnn, &hazard, &t.seq, &t.descriptor, &t.events)?;
        Ok((sum, t.events.len()))
    };
    if threads <= 1 || targets.len() <= 1 {
        for (slot, t) in slots.iter_mut().zip(targets) {
            *slot = Some(compute(t));
        }
    } else {
        let ranges = chunk_ranges(targets.len(), threads);
        let mut parts: Vec<&mut [Option<Result<(f64, usize), NhpError>>]> = Vec::new();
        let mut rest = slots.as_mut_slice();
        for r in &ranges {
            let (head, tail) = rest.split_at_mut(r.len());
            parts.push(head);
            rest = tail;
        }
        std::thread::scope(|scope| {
            for (range, part) in ranges.iter().zip(parts) {
                let targets = &targets[range.clone()];
                scope.spawn(move || {
                    for (slot, t) in part.iter_mut().zip(targets) {
                        *slot = Some(compute(t));
                    }
                });
            }
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut per_sequence = Vec::with_capacity(targets.len());
    for (t, slot) in targets.iter().zip(slots) {
        let (sum, n) = slot.expect("slot filled")?;
        if n > 0 {
            per_sequence.push((t.id.clone(), sum / n as f64, n));
        }
        total += sum;
        count += n;
    }
    Ok(MnllResult {
        mnll: total / count as f64,
        total_nll: total,
        n_events: count,
        per_sequence,
    })
}

/// Mean absolute error of single-step lookahead median predictions over
/// the listed targets: each test event is predicted from its true past.
/// Prediction failures are excluded from the mean and reported.
pub fn mae(
    model: &ModelConfig,
    theta: &[f64],
    targets: &[EvalTarget],
    tol: f64,
    threads: usize,
) -> MaeResult {
    type SeqOut = (f64, usize, usize, Vec<(usize, String)>);
    let topo = model.nhp_topology();
    let compute = |t: &EvalTarget| -> SeqOut {
        let (rnn, hazard) = model.sequence_weights(theta, &t.descriptor);
        let d_in = model.input_descriptor(&t.descriptor);
        let mut abs_sum = 0.0;
        let mut predicted = 0usize;
        let mut skipped = 0usize;
        let mut failures = Vec::new();
        for &j in &t.events {
            if j < 2 {
                // single-step lookahead needs at least one past interval
                skipped += 1;
                continue;
            }
            match nhp::predict_next(&t.seq, j - 1, &rnn, &hazard, &topo, model.history_len, tol, d_in)
            {
                Ok(t_hat) => {
                    // re-check the bisection contract at the returned root
                    let tau = t_hat - t.seq.timestamps[j - 1];
                    let h = nhp::encode_history(&t.seq, j - 1, &rnn, model.history_len, d_in)
                        .expect("valid index");
                    let residual =
                        (nhp::cumulative_hazard(tau, &h, &hazard, &topo, d_in) - std::f64::consts::LN_2).abs();
                    if residual > tol {
                        failures.push((j, format!("bisection residual {residual} above {tol}")));
                        continue;
                    }
                    abs_sum += (t_hat - t.seq.timestamps[j]).abs();
                    predicted += 1;
                }
                Err(e) => failures.push((j, e.to_string())),
            }
        }
        (abs_sum, predicted, skipped, failures)
    };

    let mut slots: Vec<Option<SeqOut>> = vec![None; targets.len()];
    if threads <= 1 || targets.len() <= 1 {
        for (slot, t) in slots.iter_mut().zip(targets) {
            *slot = Some(compute(t));
        }
    } else {
        let ranges = chunk_ranges(targets.len(), threads);
        let mut parts: Vec<&mut [Option<SeqOut>]> = Vec::new();
        let mut rest = slots.as_mut_slice();
        for r in &ranges {
            let (head, tail) = rest.split_at_mut(r.len());
            parts.push(head);
            rest = tail;
        }
        std::thread::scope(|scope| {
            for (range, part) in ranges.iter().zip(parts) {
                let targets = &targets[range.clone()];
                scope.spawn(move || {
                    for (slot, t) in part.iter_mut().zip(targets) {
                        *slot = Some(compute(t));
                    }
                });
            }
        });
    }

    let mut total = 0.0;
    let mut n_predicted = 0usize;
    let mut skipped_no_history = 0usize;
    let mut failures = Vec::new();
    let mut per_sequence = Vec::with_capacity(targets.len());
    for (t, slot) in targets.iter().zip(slots) {
        let (abs_sum, predicted, skipped, seq_failures) = slot.expect("slot filled");
        total += abs_sum;
        n_predicted += predicted;
        skipped_no_history += skipped;
        for (j, reason) in seq_failures {
            failures.push((t.id.clone(), j, reason));
        }
        let seq_mae = if predicted > 0 {
            abs_sum / predicted as f64
        } else {
            f64::NAN
        };
        per_sequence.push((t.id.clone(), seq_mae, predicted));
    }
    MaeResult {
        mae: if n_predicted > 0 {
            total / n_predicted as f64
        } else {
            f64::NAN
        },
        total_abs_err: total,
        n_predicted,
        skipped_no_history,
        failures,
        per_sequence,
    }
}

/// MNLL of the true generating Hawkes parameters on a normalized sequence:
/// the per-event conditional log-density under the exact oracle, with the
/// parameters rescaled onto normalized time.
pub fn oracle_mnll(
    params_raw: &HawkesParams,
    seq: &EventSequence,
    events: &[usize],
) -> Result<f64, hawkes::HawkesError> {
    let scale = seq.raw_span.1 - seq.raw_span.0;
    let p = params_raw.rescaled(scale);
    let mut total = 0.0;
    for &j in events {
        assert!(j >= 1 && j < seq.len());
        let pdf = hawkes::event_pdf(&p, &seq.timestamps[..j], seq.timestamps[j])?;
        total -= pdf.ln();
    }
    Ok(total / events.len() as f64)
}

/// Training/validation/test materialization of a split over a corpus.
pub struct ProtocolSets {
    pub train_items: Vec<TrainItem>,
    pub val_items: Vec<EvalItem>,
    pub test_targets: Vec<EvalTarget>,
}

/// Applies a split's protocol to a corpus: which events train, validate
/// and test, per sequence.
pub fn protocol_sets(corpus: &Corpus, split: &CorpusSplit) -> Result<ProtocolSets, EvalError> {
    let mut train_items = Vec::new();
    let mut val_items = Vec::new();
    let mut test_targets = Vec::new();
    for (seq, desc) in corpus.entries() {
        let roles = event_roles(split, &seq.id, seq.len()).ok_or_else(|| {
            EvalError::UnknownSequence {
                id: seq.id.clone(),
            }
        })?;
        let events_with = |role: EventRole| -> Vec<usize> {
            roles
                .iter()
                .enumerate()
                .skip(1) // event 0 has no likelihood term
                .filter(|(_, r)| **r == role)
                .map(|(j, _)| j)
                .collect()
        };
        let train_events = events_with(EventRole::Train);
        let val_events = events_with(EventRole::Val);
        let test_events = events_with(EventRole::Test);

        // Only seen sequences contribute training material.
        let is_seen = split.seen.iter().any(|s| s == &seq.id);
        let trains_on_all = split.setup == SplitSetup::StandardEventModeling;
        if (is_seen || trains_on_all) && !train_events.is_empty() {
            train_items.push(TrainItem {
                seq: seq.clone(),
                descriptor: desc.values.clone(),
                train_events,
            });
        }
        if !val_events.is_empty() {
            val_items.push(EvalItem {
                seq: seq.clone(),
                descriptor: desc.values.clone(),
                events: val_events,
            });
        }
        // Test metrics: unseen test sequences always; event-sampled test
        // events of seen sequences in the generalized protocol.
        let in_test_scope = match split.setup {
            SplitSetup::ZeroShot | SplitSetup::StandardEventModeling => {
                split.unseen_test.iter().any(|s| s == &seq.id)
            }
            SplitSetup::GeneralizedZeroShot => true,
            SplitSetup::Continual => true,
        };
        if in_test_scope && !test_events.is_empty() {
            test_targets.push(EvalTarget {
                id: seq.id.clone(),
                seq: seq.clone(),
                descriptor: desc.values.clone(),
                events: test_events,
            });
        }
    }
    Ok(ProtocolSets {
        train_items,
        val_items,
        test_targets,
    })
}

/// Headline metrics for one (setup, model) run.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub setup: SplitSetup,
    pub model: ModelKind,
    pub mnll: f64,
    pub mae: f64,
    pub n_events: usize,
    pub n_predicted: usize,
    pub prediction_failures: usize,
    pub skipped_no_history: usize,
    pub per_sequence: Vec<PerSequence>,
}

pub struct SetupOutcome {
    pub report: MetricReport,
    pub theta: Vec<f64>,
    pub log: Vec<LogRow>,
}

/// Combines per-sequence MNLL/MAE results into a [`MetricReport`],
/// asserting the event-weighted aggregation identity.
pub fn combine_report(
    setup: SplitSetup,
    model: ModelKind,
    nll: &MnllResult,
    mae_res: &MaeResult,
) -> MetricReport {
    // event-weighted per-sequence aggregation must reproduce the headline
    let weighted: f64 = nll.per_sequence.iter().map(|(_, m, n)| m * *n as f64).sum();
    let n_total: usize = nll.per_sequence.iter().map(|(_, _, n)| n).sum();
    debug_assert_eq!(n_total, nll.n_events);
    let recombined = weighted / n_total as f64;
    assert!(
        (recombined - nll.mnll).abs() <= 1e-10 * nll.mnll.abs().max(1.0),
        "aggregation identity violated: {recombined} vs {}",
        nll.mnll
    );
    let mut per_sequence = Vec::new();
    for (id, m, n) in &nll.per_sequence {
        let (seq_mae, n_pred) = mae_res
            .per_sequence
            .iter()
            .find(|(mid, _, _)| mid == id)
            .map(|(_, v, k)| (*v, *k))
            .unwrap_or((f64::NAN, 0));
        per_sequence.push(PerSequence {
            id: id.clone(),
            mnll: *m,
            n_events: *n,
            mae: seq_mae,
            n_predicted: n_pred,
        });
    }
    MetricReport {
        setup,
        model,
        mnll: nll.mnll,
        mae: mae_res.mae,
        n_events: nll.n_events,
        n_predicted: mae_res.n_predicted,
        prediction_failures: mae_res.failures.len(),
        skipped_no_history: mae_res.skipped_no_history,
        per_sequence,
    }
}

/// Full protocol run: trains the requested model on the split's training
/// material and evaluates on its test events.
pub fn run_setup(
    corpus: &Corpus,
    split: &CorpusSplit,
    model_kind: ModelKind,
    cfg: &TrainConfig,
    threads: usize,
) -> Result<SetupOutcome, EvalError> {
    let mut model = cfg.model_config(corpus.descriptor_dim());
    model.kind = model_kind;
    let sets = protocol_sets(corpus, split)?;
    let outcome = train_zsl(&sets.train_items, &sets.val_items, &model, cfg)?;
    let nll = mnll(&model, &outcome.theta, &sets.test_targets, threads)?;
    let mae_res = mae(
        &model,
        &outcome.theta,
        &sets.test_targets,
        DEFAULT_PREDICT_TOL,
        threads,
    );
    let report = combine_report(split.setup, model_kind, &nll, &mae_res);
    Ok(SetupOutcome {
        report,
        theta: outcome.theta,
        log: outcome.log,
    })
}

/// Lower-triangular forgetting matrix: `value(s, c)` is the metric on
/// sequence `c`'s test portion after training through stage `s` (both
/// 1-based, `c <= s`).
#[derive(Debug, Clone, PartialEq)]
pub struct CLMatrix {
    pub values: Vec<Vec<f64>>,
}

impl CLMatrix {
    pub fn n_stages(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, stage: usize, seq: usize) -> f64 {
        assert!(seq >= 1 && seq <= stage, "lower-triangular access");
        self.values[stage - 1][seq - 1]
    }

    /// Mean over previous sequences at each stage, ignoring non-finite
    /// entries (failed predictions).
    pub fn averaged_curve(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                let finite: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
                if finite.is_empty() {
                    f64::NAN
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                }
            })
            .collect()
    }

    pub fn populated_cells(&self) -> usize {
        self.values.iter().map(|r| r.len()).sum()
    }
}

/// One continual run at a fixed regularization strength.
pub struct ClBetaRun {
    pub beta: f64,
    pub mnll: CLMatrix,
    pub mae: CLMatrix,
    pub avg_mnll: Vec<f64>,
    pub avg_mae: Vec<f64>,
    pub checkpoints: Vec<Vec<f64>>,
    pub log: Vec<LogRow>,
}

pub struct ClRunOutput {
    pub model: ModelKind,
    pub runs: Vec<ClBetaRun>,
}

impl ClRunOutput {
    /// Final-stage averages per beta: (beta, avg mnll, avg mae).
    pub fn summary(&self) -> Vec<(f64, f64, f64)> {
        self.runs
            .iter()
            .map(|r| {
                (
                    r.beta,
                    *r.avg_mnll.last().unwrap_or(&f64::NAN),
                    *r.avg_mae.last().unwrap_or(&f64::NAN),
                )
            })
            .collect()
    }
}

/// Test portion of one stream sequence: the last 20% of its events.
pub fn stream_test_target(seq: &EventSequence, descriptor: &[f64]) -> EvalTarget {
    let (_, val_end) = portion_bounds(seq.len());
    EvalTarget {
        id: seq.id.clone(),
        seq: seq.clone(),
        descriptor: descriptor.to_vec(),
        events: (val_end.max(1)..seq.len()).collect(),
    }
}

/// Runs the continual protocol once per beta (0 is always included as the
/// no-regularization reference) and fills the forgetting matrices.
pub fn run_cl(
    stream: &[(EventSequence, Descriptor)],
    cfg: &TrainConfig,
    beta_values: &[f64],
    threads: usize,
) -> Result<ClRunOutput, EvalError> {
    assert!(stream.len() >= 2, "continual stream needs at least 2 sequences");
    let descriptor_dim = stream[0].1.values.len();
    let model = cfg.model_config(descriptor_dim);

    let mut betas: Vec<f64> = vec![0.0];
    for &b in beta_values {
        if !betas.iter().any(|x| x == &b) {
            betas.push(b);
        }
    }

    let targets: Vec<EvalTarget> = stream
        .iter()
        .map(|(s, d)| stream_test_target(s, &d.values))
        .collect();

    let mut runs = Vec::with_capacity(betas.len());
    for beta in betas {
        let outcome = train_continual(stream, &model, cfg, beta)?;
        let mut mnll_rows = Vec::with_capacity(stream.len());
        let mut mae_rows = Vec::with_capacity(stream.len());
        for (s_idx, ckpt) in outcome.checkpoints.iter().enumerate() {
            let mut mnll_row = Vec::with_capacity(s_idx + 1);
            let mut mae_row = Vec::with_capacity(s_idx + 1);
            for target in targets.iter().take(s_idx + 1) {
                let one = std::slice::from_ref(target);
                let nll = mnll(&model, &ckpt.theta, one, threads)?;
                let m = mae(&model, &ckpt.theta, one, DEFAULT_PREDICT_TOL, threads);
                mnll_row.push(nll.mnll);
                mae_row.push(m.mae);
            }
            mnll_rows.push(mnll_row);
            mae_rows.push(mae_row);
        }
        let mnll_matrix = CLMatrix { values: mnll_rows };
        let mae_matrix = CLMatrix { values: mae_rows };
        runs.push(ClBetaRun {
            beta,
            avg_mnll: mnll_matrix.averaged_curve(),
            avg_mae: mae_matrix.averaged_curve(),
            mnll: mnll_matrix,
            mae: mae_matrix,
            checkpoints: outcome.checkpoints.into_iter().map(|c| c.theta).collect(),
            log: outcome.log,
        });
    }
    Ok(ClRunOutput {
        model: model.kind,
        runs,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Writes the headline and per-sequence CSVs for one metric report.
/// Returns the created paths.
pub fn emit_metric_report(report: &MetricReport, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let headline = csv_table(
        "setup,model,mnll,mae,n_events,n_predicted,prediction_failures,skipped_no_history",
        &[vec![
            report.setup.to_string(),
            report.model.to_string(),
            format!("{}", report.mnll),
            fmt_opt(report.mae),
            report.n_events.to_string(),
            report.n_predicted.to_string(),
            report.prediction_failures.to_string(),
            report.skipped_no_history.to_string(),
        ]],
    );
    let rows: Vec<Vec<String>> = report
        .per_sequence
        .iter()
        .map(|p| {
            vec![
                csv_field(&p.id),
                format!("{}", p.mnll),
                p.n_events.to_string(),
                fmt_opt(p.mae),
                p.n_predicted.to_string(),
            ]
        })
        .collect();
    let per_seq = csv_table("id,mnll,n_events,mae,n_predicted", &rows);

    let p1 = out_dir.join("report.csv");
    let p2 = out_dir.join("per_sequence.csv");
    write_file(&p1, &headline)?;
    write_file(&p2, &per_seq)?;
    Ok(vec![p1, p2])
}

/// Writes forgetting matrices, averaged curves, the beta summary and SVG
/// plots for a continual run. Returns the created paths.
pub fn emit_cl_run(output: &ClRunOutput, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let mut paths = Vec::new();
    for run in &output.runs {
        let mut rows = Vec::new();
        for (s, (mnll_row, mae_row)) in run
            .mnll
            .values
            .iter()
            .zip(run.mae.values.iter())
            .enumerate()
        {
            for (c, (m, a)) in mnll_row.iter().zip(mae_row).enumerate() {
                rows.push(vec![
                    (s + 1).to_string(),
                    (c + 1).to_string(),
                    fmt_opt(*m),
                    fmt_opt(*a),
                ]);
            }
        }
        let path = out_dir.join(format!("cl_matrix_beta_{}.csv", run.beta));
        write_file(&path, &csv_table("stage,seq_index,mnll,mae", &rows))?;
        paths.push(path);
    }

    let mut curve_rows = Vec::new();
    for run in &output.runs {
        for (s, (m, a)) in run.avg_mnll.iter().zip(&run.avg_mae).enumerate() {
            curve_rows.push(vec![
                format!("{}", run.beta),
                (s + 1).to_string(),
                fmt_opt(*m),
                fmt_opt(*a),
            ]);
        }
    }
    let curves_path = out_dir.join("cl_curves.csv");
    write_file(
        &curves_path,
        &csv_table("beta,stage,avg_mnll,avg_mae", &curve_rows),
    )?;
    paths.push(curves_path);

    let summary_rows: Vec<Vec<String>> = output
        .summary()
        .iter()
        .map(|(b, m, a)| vec![format!("{b}"), fmt_opt(*m), fmt_opt(*a)])
        .collect();
    let summary_path = out_dir.join("cl_summary.csv");
    write_file(
        &summary_path,
        &csv_table("beta,final_avg_mnll,final_avg_mae", &summary_rows),
    )?;
    paths.push(summary_path);

    let curve_series = |per_run: &dyn Fn(&ClBetaRun) -> Vec<f64>| -> Vec<Series> {
        output
            .runs
            .iter()
            .map(|run| Series {
                label: format!("beta={}", run.beta),
                points: per_run(run)
                    .iter()
                    .enumerate()
                    .map(|(s, v)| ((s + 1) as f64, *v))
                    .collect(),
            })
            .collect()
    };
    let mnll_svg = svg_line_chart(
        &format!("Average MNLL over previous sequences ({})", output.model),
        "stage",
        "avg MNLL",
        &curve_series(&|r: &ClBetaRun| r.avg_mnll.clone()),
    );
    let mae_svg = svg_line_chart(
        &format!("Average MAE over previous sequences ({})", output.model),
        "stage",
        "avg MAE",
        &curve_series(&|r: &ClBetaRun| r.avg_mae.clone()),
    );
    let sweep_points: Vec<(f64, f64)> = output
        .summary()
        .iter()
        .map(|(b, m, _)| (*b, *m))
        .collect();
    let sweep_svg = svg_line_chart(
        &format!("Final average MNLL vs beta ({})", output.model),
        "beta",
        "final avg MNLL",
        &[Series {
            label: "final avg MNLL".into(),
            points: sweep_points,
        }],
    );
    for (name, body) in [
        ("cl_avg_mnll.svg", mnll_svg),
        ("cl_avg_mae.svg", mae_svg),
        ("cl_beta_sweep.svg", sweep_svg),
    ] {
        let path = out_dir.join(name);
        write_file(&path, &body)?;
        paths.push(path);
    }
    Ok(paths)
}
