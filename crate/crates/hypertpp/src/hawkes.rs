//! Classical univariate Hawkes process with exponential kernel.
//!
//! Serves as the exact oracle for the neural models: closed-form intensity,
//! event density and log-likelihood, an exact thinning simulator, and a
//! generator of descriptor-conditioned synthetic corpora where the
//! descriptor fully determines the dynamics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::seqdata::{Descriptor, EventSequence, SeqDataError};

#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("invalid parameters mu={mu} alpha={alpha} decay={decay}: {reason}")]
    InvalidParams {
        mu: f64,
        alpha: f64,
        decay: f64,
        reason: &'static str,
    },
    #[error("history must be strictly increasing and precede the evaluation time")]
    BadHistory,
    #[error("sequence must be strictly increasing within [0, window_end]")]
    BadSequence,
    #[error("rejection cap of {cap} exceeded while generating sequence {index}")]
    RejectionCap { cap: usize, index: usize },
    #[error(transparent)]
    SeqData(#[from] SeqDataError),
    #[error("params sidecar line {line}: {message}")]
    MalformedSidecar { line: usize, message: String },
}

/// Exponential-kernel Hawkes parameters: intensity
/// `mu + sum alpha * exp(-decay * (t - t_k))` over past events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesParams {
    pub mu: f64,
    pub alpha: f64,
    pub decay: f64,
}

impl HawkesParams {
    pub fn new(mu: f64, alpha: f64, decay: f64) -> Result<Self, HawkesError> {
        let reason = if !(mu > 0.0 && mu.is_finite()) {
            Some("mu must be positive")
        } else if !(alpha >= 0.0 && alpha.is_finite()) {
            Some("alpha must be non-negative")
        } else if !(decay > 0.0 && decay.is_finite()) {
            Some("decay must be positive")
        } else if alpha / decay >= 1.0 {
            Some("branching ratio alpha/decay must be below 1")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(HawkesError::InvalidParams {
                mu,
                alpha,
                decay,
                reason,
            }),
            None => Ok(HawkesParams { mu, alpha, decay }),
        }
    }

    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.decay
    }

    /// Time-rescaled parameters: if raw times are divided by `scale`, the
    /// process on normalized time has all three rates multiplied by it.
    pub fn rescaled(&self, scale: f64) -> HawkesParams {
        HawkesParams {
            mu: self.mu * scale,
            alpha: self.alpha * scale,
            decay: self.decay * scale,
        }
    }
}

fn check_history(history: &[f64], t: f64) -> Result<(), HawkesError> {
    if history.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HawkesError::BadHistory);
    }
    if history.last().is_some_and(|&last| last >= t) {
        return Err(HawkesError::BadHistory);
    }
    Ok(())
}

/// Conditional intensity at `t` given strictly earlier events.
pub fn intensity(params: &HawkesParams, history: &[f64], t: f64) -> Result<f64, HawkesError> {
    check_history(history, t)?;
    let excitation: f64 = history
        .iter()
        .map(|&tk| params.alpha * (-params.decay * (t - tk)).exp())
        .sum();
    Ok(params.mu + excitation)
}

/// Closed-form integral of the intensity over `[from, to]` given events
/// at or before `from`.
fn compensator(params: &HawkesParams, history: &[f64], from: f64, to: f64) -> f64 {
    let base = params.mu * (to - from);
    let kernel: f64 = history
        .iter()
        .map(|&tk| {
            (params.alpha / params.decay)
                * ((-params.decay * (from - tk)).exp() - (-params.decay * (to - tk)).exp())
        })
        .sum();
    base + kernel
}

/// Conditional density of the next event at `t`: intensity times the
/// probability that nothing happened since the previous event (or since 0
/// for an empty history).
pub fn event_pdf(params: &HawkesParams, history: &[f64], t: f64) -> Result<f64, HawkesError> {
    check_history(history, t)?;
    let from = history.last().copied().unwrap_or(0.0);
    let lam = intensity(params, history, t)?;
    Ok(lam * (-compensator(params, history, from, t)).exp())
}

/// Exact log-likelihood of a full sequence observed on `[0, window_end]`:
/// sum of log-intensities minus the compensator over the whole window.
pub fn loglik_exact(
    params: &HawkesParams,
    seq: &[f64],
    window_end: f64,
) -> Result<f64, HawkesError> {
    if seq.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HawkesError::BadSequence);
    }
    if seq.first().is_some_and(|&t| t < 0.0) || seq.last().is_some_and(|&t| t > window_end) {
        return Err(HawkesError::BadSequence);
    }
    let mut loglik = 0.0;
    for (j, &tj) in seq.iter().enumerate() {
        let lam = intensity(params, &seq[..j], tj)?;
        loglik += lam.ln();
    }
    // compensator over [0, window_end]: mu*T + (alpha/decay) * sum(1 - e^{-decay (T - t_j)})
    let mut integral = params.mu * window_end;
    for &tj in seq {
        integral += (params.alpha / params.decay)
            * (1.0 - (-params.decay * (window_end - tj)).exp());
    }
    Ok(loglik - integral)
}

/// Exact simulation on `[0, window_end]` by thinning: between events the
/// intensity only decays, so the intensity just after the current position
/// dominates until the next candidate.
pub fn simulate(params: &HawkesParams, window_end: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<f64> = Vec::new();
    let mut t = 0.0;
    let mut bound = params.mu; // intensity at 0+ with empty history
    while t < window_end {
        let u: f64 = rng.gen();
        let wait = -(1.0 - u).ln() / bound;
        t += wait;
        if t >= window_end {
            break;
        }
        let lam = intensity(params, &events, t).expect("history precedes t by construction");
        let accept: f64 = rng.gen();
        if accept * bound <= lam {
            events.push(t);
            // refresh the dominating rate just after the accepted event
            bound = lam + params.alpha;
        } else {
            // the decayed intensity is itself a valid tighter bound
            bound = lam;
        }
    }
    events
}

/// Log-linear map from descriptors to Hawkes parameters, with optional
/// noise on the log scale. With zero noise the descriptor fully determines
/// the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorLink {
    /// 3 x D matrix, rows mapping to (log mu, log alpha, log decay).
    pub weight_matrix: [Vec<f64>; 3],
    /// Additive offsets for the three log-parameters.
    pub intercept: [f64; 3],
    pub noise_scale: f64,
}

impl DescriptorLink {
    /// Seeded random link with spreads tuned so sampled descriptors yield
    /// valid, visibly heterogeneous dynamics (branching ratio well below 1
    /// for the bulk of descriptor space).
    pub fn random(descriptor_dim: usize, noise_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale_per_row = [2.0, 1.3, 0.9];
        let weight_matrix = scale_per_row.map(|s| {
            (0..descriptor_dim)
                .map(|_| {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    v * s / (descriptor_dim as f64).sqrt()
                })
                .collect()
        });
        DescriptorLink {
            weight_matrix,
            intercept: [(0.5f64).ln(), (0.3f64).ln(), 0.0],
            noise_scale,
        }
    }

    /// Maps a descriptor to candidate parameters. The result may violate
    /// the stationarity bound; callers re-sample in that case.
    pub fn map(&self, descriptor: &[f64], rng: &mut ChaCha8Rng) -> Result<HawkesParams, HawkesError> {
        let mut logs = [0.0f64; 3];
        for (r, row) in self.weight_matrix.iter().enumerate() {
            let dot: f64 = row.iter().zip(descriptor).map(|(w, d)| w * d).sum();
            let noise = if self.noise_scale > 0.0 {
                self.noise_scale * standard_normal(rng)
            } else {
                0.0
            };
            logs[r] = self.intercept[r] + dot + noise;
        }
        HawkesParams::new(logs[0].exp(), logs[1].exp(), logs[2].exp())
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; consumes two uniforms deterministically.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

const REJECTION_CAP: usize = 1000;

/// A generated corpus together with the parameters that produced each
/// sequence. The parameters are for oracle evaluation only and are written
/// to a sidecar file, never read by training code.
pub struct GeneratedCorpus {
    pub entries: Vec<(EventSequence, Descriptor)>,
    pub params: Vec<(String, HawkesParams)>,
}

/// Draws descriptors, maps them to Hawkes parameters and simulates one
/// sequence per descriptor. Descriptors whose parameters violate the
/// stationarity bound, and simulations with fewer than 2 events, are
/// re-drawn up to a cap.
pub fn generate_corpus(
    link: &DescriptorLink,
    n_sequences: usize,
    descriptor_dim: usize,
    window_end: f64,
    seed: u64,
) -> Result<GeneratedCorpus, HawkesError> {
    assert!(n_sequences >= 1, "need at least one sequence");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_sequences);
    let mut params_out = Vec::with_capacity(n_sequences);
    for i in 0..n_sequences {
        let mut attempts = 0;
        let (descriptor, params, events) = loop {
            attempts += 1;
            if attempts > REJECTION_CAP {
                return Err(HawkesError::RejectionCap {
                    cap: REJECTION_CAP,
                    index: i,
                });
            }
            let descriptor: Vec<f64> = (0..descriptor_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let params = match link.map(&descriptor, &mut rng) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let sim_seed = rng.gen::<u64>();
            let events = simulate(&params, window_end, sim_seed);
            if events.len() >= 2 {
                break (descriptor, params, events);
            }
        };
        let id = format!("seq-{i:03}");
        let seq = EventSequence::from_raw(id.clone(), &events, i + 1)?;
        entries.push((
            seq,
            Descriptor {
                id: id.clone(),
                values: descriptor,
            },
        ));
        params_out.push((id, params));
    }
    Ok(GeneratedCorpus {
        entries,
        params: params_out,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecar {
    id: String,
    mu: f64,
    alpha: f64,
    decay: f64,
}

/// Serializes the id -> generating-parameters sidecar (one JSON object per
/// line).
pub fn sidecar_to_string(params: &[(String, HawkesParams)]) -> String {
    let mut out = String::new();
    for (id, p) in params {
        out.push_str(&format!(
            "{{\"id\": \"{}\", \"mu\": {}, \"alpha\": {}, \"decay\": {}}}\n",
            id, p.mu, p.alpha, p.decay
        ));
    }
    out
}

/// Parses a params sidecar file body. Rejects malformed records and
/// invalid parameters with the offending line number.
pub fn parse_sidecar(contents: &str) -> Result<Vec<(String, HawkesParams)>, HawkesError> {
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSidecar =
            serde_json::from_str(line).map_err(|e| HawkesError::MalformedSidecar {
                line: line_no,
                message: e.to_string(),
            })?;
        let params = HawkesParams::new(raw.mu, raw.alpha, raw.decay).map_err(|e| {
            HawkesError::MalformedSidecar {
                line: line_no,
                message: e.to_string(),
            }
        })?;
        out.push((raw.id, params));
    }
    Ok(out)
}

pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Vec<(String, HawkesParams)>, HawkesError> {
    let path = path.as_ref();
    let contents = std::fs::read_to_string(path).map_err(|source| SeqDataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_sidecar(&contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, alpha: f64, decay: f64) -> HawkesParams {
        HawkesParams::new(mu, alpha, decay).unwrap()
    }

    #[test]
    fn branching_ratio_must_stay_subcritical() {
        assert!(HawkesParams::new(1.0, 2.0, 1.0).is_err());
        assert!(HawkesParams::new(1.0, 0.99, 1.0).is_ok());
        assert!(HawkesParams::new(0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn intensity_with_empty_history_is_base_rate() {
        let p = params(1.0, 0.5, 1.0);
        assert_eq!(intensity(&p, &[], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn intensity_single_excitation_term() {
        let p = params(1.0, 0.5, 1.0);
        let v = intensity(&p, &[0.0], 1.0).unwrap();
        let expected = 1.0 + 0.5 * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 1.1839397).abs() < 1e-7);
    }

    #[test]
    fn intensity_requires_history_before_t() {
        let p = params(1.0, 0.5, 1.0);
        assert!(matches!(
            intensity(&p, &[0.9], 0.5),
            Err(HawkesError::BadHistory)
        ));
    }

    #[test]
    fn intensity_jumps_by_alpha_at_events() {
        let p = params(0.8, 0.6, 2.0);
        let history = [0.4, 1.1, 1.9];
        let eps = 1e-9;
        for (k, &tk) in history.iter().enumerate() {
            let before = intensity(&p, &history[..k], tk - eps).unwrap();
            let after = intensity(&p, &history[..=k], tk + eps).unwrap();
            assert!(
                (after - before - p.alpha).abs() < 1e-6,
                "jump at event {k}: {} -> {}",
                before,
                after
            );
        }
    }

    #[test]
    fn intensity_decays_between_events() {
        let p = params(0.8, 0.6, 2.0);
        let history = [0.4, 1.1];
        let mut prev = intensity(&p, &history, 1.1 + 1e-9).unwrap();
        for step in 1..50 {
            let t = 1.1 + 1e-9 + 0.02 * step as f64;
            let cur = intensity(&p, &history, t).unwrap();
            assert!(cur <= prev + 1e-15);
            prev = cur;
        }
    }

    #[test]
    fn pdf_reduces_to_exponential_for_poisson() {
        let p = params(2.0, 0.0, 1.0);
        let v = event_pdf(&p, &[], 0.5).unwrap();
        let expected = 2.0 * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.7357589).abs() < 1e-7);
    }

    #[test]
    fn pdf_uses_closed_form_kernel_integral() {
        let p = params(1.0, 0.5, 1.0);
        let v = event_pdf(&p, &[0.0], 1.0).unwrap();
        let lam = intensity(&p, &[0.0], 1.0).unwrap();
        let integral = 1.0 + 0.5 * (1.0 - (-1.0f64).exp());
        let expected = lam * (-integral).exp();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn poisson_loglik_closed_form() {
        let p = params(3.0, 0.0, 1.0);
        let seq = [0.5, 1.25, 2.0, 4.0];
        let ll = loglik_exact(&p, &seq, 5.0).unwrap();
        let expected = 4.0 * 3.0f64.ln() - 3.0 * 5.0;
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn loglik_telescopes_into_event_pdfs_plus_final_survival() {
        let p = params(1.2, 0.7, 1.5);
        let seq = [0.3, 0.9, 1.0, 2.4, 3.1];
        let window_end = 4.0;
        let mut total = 0.0;
        for (j, &tj) in seq.iter().enumerate() {
            total += event_pdf(&p, &seq[..j], tj).unwrap().ln();
        }
        total -= compensator(&p, &seq, *seq.last().unwrap(), window_end);
        let direct = loglik_exact(&p, &seq, window_end).unwrap();
        assert!((total - direct).abs() < 1e-10, "{total} vs {direct}");
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let p = params(1.0, 0.5, 1.0);
        let a = simulate(&p, 50.0, 99);
        let b = simulate(&p, 50.0, 99);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&t| t > 0.0 && t <= 50.0));
        let c = simulate(&p, 50.0, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn simulated_poisson_counts_match_rate() {
        let p = params(3.0, 0.0, 1.0);
        let reps = 200;
        let counts: Vec<f64> = (0..reps).map(|s| simulate(&p, 100.0, s) .len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - 300.0).abs() <= 3.0 * se,
            "mean {mean} expected 300 (se {se})"
        );
    }

    #[test]
    fn simulated_hawkes_matches_stationary_rate() {
        // alpha/decay = 0.5 and mu = 1 give stationary rate mu/(1-r) = 2.
        let p = params(1.0, 0.6, 1.2);
        let reps = 200;
        let window = 200.0;
        let rates: Vec<f64> = (0..reps)
            .map(|s| simulate(&p, window, 1000 + s).len() as f64 / window)
            .collect();
        let mean = rates.iter().sum::<f64>() / reps as f64;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - 2.0).abs() <= 3.0 * se,
            "mean rate {mean} expected 2.0 (se {se})"
        );
    }

    #[test]
    fn generated_corpus_has_requested_shape() {
        let link = DescriptorLink::random(8, 0.0, 5);
        let corpus = generate_corpus(&link, 50, 8, 100.0, 13).unwrap();
        assert_eq!(corpus.entries.len(), 50);
        assert_eq!(corpus.params.len(), 50);
        let mut seen = std::collections::BTreeSet::new();
        for (seq, desc) in &corpus.entries {
            assert!(seq.len() >= 2);
            assert_eq!(desc.values.len(), 8);
            assert!(seen.insert(format!("{:?}", desc.values)), "duplicate descriptor");
        }
    }

    #[test]
    fn zero_noise_link_is_deterministic_in_the_descriptor() {
        let link = DescriptorLink::random(6, 0.0, 7);
        let d: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        let mut rng1 = ChaCha8Rng::seed_from_u64(1);
        let mut rng2 = ChaCha8Rng::seed_from_u64(2);
        let a = link.map(&d, &mut rng1).unwrap();
        let b = link.map(&d, &mut rng2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn own_params_beat_permuted_params_on_likelihood() {
        let link = DescriptorLink::random(8, 0.0, 21);
        let corpus = generate_corpus(&link, 30, 8, 150.0, 77).unwrap();
        let n = corpus.entries.len();
        let mut wins = 0;
        for i in 0..n {
            let (seq, _) = &corpus.entries[i];
            let scale = seq.raw_span.1 - seq.raw_span.0;
            let own = corpus.params[i].1.rescaled(scale);
            let other = corpus.params[(i + 7) % n].1.rescaled(scale);
            let ll_own = loglik_exact(&own, &seq.timestamps, 1.0).unwrap();
            let ll_other = loglik_exact(&other, &seq.timestamps, 1.0).unwrap();
            if ll_own > ll_other {
                wins += 1;
            }
        }
        assert!(
            wins * 10 >= n * 9,
            "own params won only {wins}/{n} comparisons"
        );
    }

    #[test]
    fn sidecar_round_trips() {
        let params = vec![
            ("seq-000".to_string(), params(0.5, 0.2, 1.0)),
            ("seq-001".to_string(), params(1.5, 0.0, 2.0)),
        ];
        let text = sidecar_to_string(&params);
        let parsed = parse_sidecar(&text).unwrap();
        assert_eq!(params, parsed);
        assert!(parse_sidecar("{\"id\": \"x\"}").is_err());
    }
}
