//! Event-sequence data model: corpus files, timestamp normalization,
//! inter-arrival windows and split construction for the evaluation
//! protocols.
//!
//! A corpus file is UTF-8 text with one JSON record per line:
//! `{"id": "...", "timestamps": [...], "descriptor": [...]}`. Timestamps are
//! raw observation times; loading validates each record and maps the
//! observation window `[0, last timestamp]` affinely onto `[0, 1]`, keeping
//! the original span for inversion.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

/// Pad value used when an inter-arrival window is longer than the available
/// history. Padded positions are flagged by the parallel mask so encoders
/// can skip them instead of ingesting fake intervals.
pub const PAD_VALUE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum SeqDataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("record {line}: unsorted timestamps")]
    UnsortedTimestamps { line: usize },
    #[error("record {line}: descriptor dimension mismatch (expected {expected}, found {found})")]
    DescriptorDimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("record {line}: fewer than 2 timestamps")]
    TooFewEvents { line: usize },
    #[error("record {line}: non-finite value in record")]
    NonFinite { line: usize },
    #[error("record {line}: timestamps must be positive (observation window starts at 0)")]
    NonPositiveTimestamp { line: usize },
    #[error("record {line}: duplicate sequence id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("need at least {needed} sequences for this split, found {found}")]
    TooFewSequences { needed: usize, found: usize },
    #[error("event index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("split manifest line {line}: {message}")]
    MalformedManifest { line: usize, message: String },
}

/// Fixed-length side-information vector identifying a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub id: String,
    pub values: Vec<f64>,
}

/// One event sequence after normalization. `timestamps` are strictly
/// increasing and lie in `[0, 1]`; `raw_span` is the original observation
/// window so raw times can be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub id: String,
    pub timestamps: Vec<f64>,
    pub descriptor_id: String,
    pub raw_span: (f64, f64),
}

impl EventSequence {
    /// Builds a sequence from raw observation times, normalizing the window
    /// `[0, last]` onto `[0, 1]`.
    pub fn from_raw(
        id: impl Into<String>,
        raw_timestamps: &[f64],
        line: usize,
    ) -> Result<Self, SeqDataError> {
        if raw_timestamps.len() < 2 {
            return Err(SeqDataError::TooFewEvents { line });
        }
        if raw_timestamps.iter().any(|t| !t.is_finite()) {
            return Err(SeqDataError::NonFinite { line });
        }
        if raw_timestamps[0] <= 0.0 {
            return Err(SeqDataError::NonPositiveTimestamp { line });
        }
        if raw_timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SeqDataError::UnsortedTimestamps { line });
        }
        let end = *raw_timestamps.last().unwrap();
        let timestamps = raw_timestamps.iter().map(|t| t / end).collect();
        let id = id.into();
        Ok(EventSequence {
            descriptor_id: id.clone(),
            id,
            timestamps,
            raw_span: (0.0, end),
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Maps a normalized time back to the original units.
    pub fn denormalize(&self, t: f64) -> f64 {
        self.raw_span.0 + t * (self.raw_span.1 - self.raw_span.0)
    }

    /// Inter-event intervals `i_k = t_k - t_{k-1}` for `k = 1..len`.
    pub fn intervals(&self) -> Vec<f64> {
        self.timestamps.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Inter-arrival window with its pad mask. `values[k]` is real history
/// where `present[k]` is true and [`PAD_VALUE`] otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<f64>,
    pub present: Vec<bool>,
}

/// The `window_len` inter-event intervals ending at event `j` (the interval
/// `t_j - t_{j-1}` last), left-padded when fewer exist.
///
/// `j` is a zero-based event index with `1 <= j < seq.len()`.
pub fn interarrival_window(
    seq: &EventSequence,
    j: usize,
    window_len: usize,
) -> Result<Window, SeqDataError> {
    if j == 0 || j >= seq.len() {
        return Err(SeqDataError::IndexOutOfRange {
            index: j,
            len: seq.len(),
        });
    }
    let mut values = vec![PAD_VALUE; window_len];
    let mut present = vec![false; window_len];
    let take = j.min(window_len);
    for k in 0..take {
        // interval index j - take + 1 + k, ending at event j
        let idx = j - take + 1 + k;
        values[window_len - take + k] = seq.timestamps[idx] - seq.timestamps[idx - 1];
        present[window_len - take + k] = true;
    }
    Ok(Window { values, present })
}

/// Which experimental protocol a split serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSetup {
    ZeroShot,
    GeneralizedZeroShot,
    StandardEventModeling,
    Continual,
}

impl SplitSetup {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitSetup::ZeroShot => "zero-shot",
            SplitSetup::GeneralizedZeroShot => "generalized-zero-shot",
            SplitSetup::StandardEventModeling => "standard-event-modeling",
            SplitSetup::Continual => "continual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero-shot" => Some(SplitSetup::ZeroShot),
            "generalized-zero-shot" => Some(SplitSetup::GeneralizedZeroShot),
            "standard-event-modeling" => Some(SplitSetup::StandardEventModeling),
            "continual" => Some(SplitSetup::Continual),
            _ => None,
        }
    }
}

impl fmt::Display for SplitSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sequence-level partition of a corpus. For the continual setup every id
/// is in `seen` (in stream order) and the other two lists are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub setup: SplitSetup,
    pub seed: u64,
    pub seen: Vec<String>,
    pub unseen_val: Vec<String>,
    pub unseen_test: Vec<String>,
}

/// Role of a sequence within a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqRole {
    Seen,
    UnseenVal,
    UnseenTest,
}

/// Role of a single event under a split's protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventRole {
    Train,
    Val,
    Test,
}

impl CorpusSplit {
    pub fn role_of(&self, id: &str) -> Option<SeqRole> {
        if self.seen.iter().any(|s| s == id) {
            Some(SeqRole::Seen)
        } else if self.unseen_val.iter().any(|s| s == id) {
            Some(SeqRole::UnseenVal)
        } else if self.unseen_test.iter().any(|s| s == id) {
            Some(SeqRole::UnseenTest)
        } else {
            None
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates; own loop so the result depends only on the ChaCha stream.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Builds a sequence-level split. Zero-shot style setups use a seeded
/// 60-20-20 partition; the continual setup shuffles all ids into `seen`
/// as the stream order.
pub fn make_split(
    ids: &[String],
    setup: SplitSetup,
    seed: u64,
) -> Result<CorpusSplit, SeqDataError> {
    if ids.is_empty() {
        return Err(SeqDataError::EmptyCorpus);
    }
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = shuffled_indices(n, &mut rng);
    let pick = |range: std::ops::Range<usize>| -> Vec<String> {
        order[range].iter().map(|&i| ids[i].clone()).collect()
    };
    match setup {
        SplitSetup::Continual => Ok(CorpusSplit {
            setup,
            seed,
            seen: pick(0..n),
            unseen_val: Vec::new(),
            unseen_test: Vec::new(),
        }),
        _ => {
            let n_val = n / 5;
            let n_test = n / 5;
            if n_val == 0 || n_test == 0 || n - n_val - n_test == 0 {
                return Err(SeqDataError::TooFewSequences { needed: 5, found: n });
            }
            Ok(CorpusSplit {
                setup,
                seed,
                seen: pick(0..n - n_val - n_test),
                unseen_val: pick(n - n_val - n_test..n - n_test),
                unseen_test: pick(n - n_test..n),
            })
        }
    }
}

/// Event-portion boundaries used by the per-sequence protocols: the first
/// 70% of events train, the next 10% validate, the last 20% test.
pub fn portion_bounds(n: usize) -> (usize, usize) {
    let train_end = (0.7 * n as f64).ceil() as usize;
    let val_end = (0.8 * n as f64).ceil() as usize;
    (train_end, val_end)
}

/// Assigns every event of a sequence to exactly one role under the split's
/// protocol. `n` is the sequence length; the seed and id feed the seeded
/// event sampling of the generalized zero-shot protocol.
///
/// Event 0 has no likelihood term (it only ever serves as history), so
/// protocols that sample test events draw from indices `1..n`.
pub fn event_roles(split: &CorpusSplit, id: &str, n: usize) -> Option<Vec<EventRole>> {
    let seq_role = split.role_of(id)?;
    Some(match split.setup {
        SplitSetup::ZeroShot => {
            let role = match seq_role {
                SeqRole::Seen => EventRole::Train,
                SeqRole::UnseenVal => EventRole::Val,
                SeqRole::UnseenTest => EventRole::Test,
            };
            vec![role; n]
        }
        SplitSetup::StandardEventModeling | SplitSetup::Continual => {
            let (train_end, val_end) = portion_bounds(n);
            (0..n)
                .map(|j| {
                    if j < train_end {
                        EventRole::Train
                    } else if j < val_end {
                        EventRole::Val
                    } else {
                        EventRole::Test
                    }
                })
                .collect()
        }
        SplitSetup::GeneralizedZeroShot => {
            // Unseen validation sequences stay whole for model selection;
            // test events are sampled per sequence from the others.
            if seq_role == SeqRole::UnseenVal {
                return Some(vec![EventRole::Val; n]);
            }
            let mut roles = vec![EventRole::Train; n];
            let predictable = n.saturating_sub(1);
            let n_test = ((0.2 * predictable as f64).round() as usize).min(predictable);
            if n_test > 0 {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(split.seed.wrapping_mul(0x9e3779b97f4a7c15) ^ fnv1a(id));
                let mut candidates: Vec<usize> = (1..n).collect();
                for k in 0..n_test {
                    let pick = rng.gen_range(k..candidates.len());
                    candidates.swap(k, pick);
                }
                for &j in &candidates[..n_test] {
                    roles[j] = EventRole::Test;
                }
            }
            roles
        }
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    timestamps: Vec<f64>,
    descriptor: Vec<f64>,
}

/// Parses one corpus record line. `expected_dim` enforces the corpus-wide
/// descriptor dimension once it is known.
pub fn parse_corpus_record(
    line: &str,
    line_no: usize,
    expected_dim: Option<usize>,
) -> Result<(EventSequence, Descriptor), SeqDataError> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| SeqDataError::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
    if raw.descriptor.is_empty() {
        return Err(SeqDataError::DescriptorDimMismatch {
            line: line_no,
            expected: expected_dim.unwrap_or(1),
            found: 0,
        });
    }
    if let Some(d) = expected_dim {
        if raw.descriptor.len() != d {
            return Err(SeqDataError::DescriptorDimMismatch {
                line: line_no,
                expected: d,
                found: raw.descriptor.len(),
            });
        }
    }
    if raw.descriptor.iter().any(|v| !v.is_finite()) {
        return Err(SeqDataError::NonFinite { line: line_no });
    }
    let seq = EventSequence::from_raw(raw.id.clone(), &raw.timestamps, line_no)?;
    Ok((
        seq,
        Descriptor {
            id: raw.id,
            values: raw.descriptor,
        },
    ))
}

/// Parses a whole corpus from file contents. Never panics on malformed
/// input; every failure names the offending record.
pub fn parse_corpus_str(contents: &str) -> Result<Corpus, SeqDataError> {
    let mut entries = Vec::new();
    let mut dim: Option<usize> = None;
    let mut ids = BTreeMap::new();
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (seq, desc) = parse_corpus_record(line, line_no, dim)?;
        dim = Some(desc.values.len());
        if ids.insert(seq.id.clone(), line_no).is_some() {
            return Err(SeqDataError::DuplicateId {
                line: line_no,
                id: seq.id,
            });
        }
        entries.push((seq, desc));
    }
    if entries.is_empty() {
        return Err(SeqDataError::EmptyCorpus);
    }
    Ok(Corpus::new(entries))
}

/// Loads and validates a corpus file, returning normalized sequences.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, SeqDataError> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|source| SeqDataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus_str(&contents)
}

/// Writes sequences back to the corpus file format in the original
/// (denormalized) time units.
pub fn save_corpus(
    path: impl AsRef<Path>,
    entries: &[(EventSequence, Descriptor)],
) -> Result<(), SeqDataError> {
    let path = path.as_ref();
    let mut out = String::new();
    for (seq, desc) in entries {
        let raw: Vec<String> = seq
            .timestamps
            .iter()
            .map(|t| format!("{}", seq.denormalize(*t)))
            .collect();
        let dvals: Vec<String> = desc.values.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!(
            "{{\"id\": \"{}\", \"timestamps\": [{}], \"descriptor\": [{}]}}\n",
            seq.id,
            raw.join(", "),
            dvals.join(", ")
        ));
    }
    write_file(path, &out)
}

fn write_file(path: &Path, contents: &str) -> Result<(), SeqDataError> {
    let mut f = fs::File::create(path).map_err(|source| SeqDataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(contents.as_bytes())
        .map_err(|source| SeqDataError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// A validated corpus with id lookup.
#[derive(Debug, Clone)]
pub struct Corpus {
    entries: Vec<(EventSequence, Descriptor)>,
    by_id: BTreeMap<String, usize>,
    descriptor_dim: usize,
}

impl Corpus {
    pub fn new(entries: Vec<(EventSequence, Descriptor)>) -> Self {
        let by_id = entries
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.id.clone(), i))
            .collect();
        let descriptor_dim = entries.first().map(|(_, d)| d.values.len()).unwrap_or(0);
        Corpus {
            entries,
            by_id,
            descriptor_dim,
        }
    }

    pub fn entries(&self) -> &[(EventSequence, Descriptor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.descriptor_dim
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|(s, _)| s.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&(EventSequence, Descriptor)> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }
}

/// Serializes a split as a manifest: setup, seed and the three id lists.
pub fn split_to_manifest(split: &CorpusSplit) -> String {
    let mut out = String::new();
    out.push_str(&format!("setup {}\n", split.setup.as_str()));
    out.push_str(&format!("seed {}\n", split.seed));
    for (name, list) in [
        ("seen", &split.seen),
        ("unseen_val", &split.unseen_val),
        ("unseen_test", &split.unseen_test),
    ] {
        out.push_str(&format!("[{name}]\n"));
        for id in list {
            out.push_str(id);
            out.push('\n');
        }
    }
    out
}

/// Parses a split manifest produced by [`split_to_manifest`].
pub fn parse_split_manifest(contents: &str) -> Result<CorpusSplit, SeqDataError> {
    let mut setup: Option<SplitSetup> = None;
    let mut seed: Option<u64> = None;
    let mut lists: [Vec<String>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut current: Option<usize> = None;
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("setup ") {
            setup = Some(SplitSetup::parse(rest.trim()).ok_or_else(|| {
                SeqDataError::MalformedManifest {
                    line: line_no,
                    message: format!("unknown setup {rest:?}"),
                }
            })?);
        } else if let Some(rest) = line.strip_prefix("seed ") {
            seed = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| SeqDataError::MalformedManifest {
                        line: line_no,
                        message: format!("bad seed {rest:?}"),
                    })?,
            );
        } else if line == "[seen]" {
            current = Some(0);
        } else if line == "[unseen_val]" {
            current = Some(1);
        } else if line == "[unseen_test]" {
            current = Some(2);
        } else if line.starts_with('[') {
            return Err(SeqDataError::MalformedManifest {
                line: line_no,
                message: format!("unknown section {line:?}"),
            });
        } else {
            match current {
                Some(k) => lists[k].push(line.to_string()),
                None => {
                    return Err(SeqDataError::MalformedManifest {
                        line: line_no,
                        message: "id before any section header".to_string(),
                    })
                }
            }
        }
    }
    let setup = setup.ok_or(SeqDataError::MalformedManifest {
        line: 0,
        message: "missing setup".to_string(),
    })?;
    let seed = seed.ok_or(SeqDataError::MalformedManifest {
        line: 0,
        message: "missing seed".to_string(),
    })?;
    let [seen, unseen_val, unseen_test] = lists;
    Ok(CorpusSplit {
        setup,
        seed,
        seen,
        unseen_val,
        unseen_test,
    })
}
