//! Text checkpoint format shared by every model kind: a topology header
//! followed by one named flat array per parameter segment. Values are
//! written with the shortest decimal representation that round-trips, so
//! save/load is bit-exact.

use std::path::Path;

use thiserror::Error;

use crate::model::{ModelConfig, ModelKind};

const MAGIC: &str = "hypertpp-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("checkpoint declares segment {name:?} of {declared} values, found {found}")]
    SegmentLength {
        name: String,
        declared: usize,
        found: usize,
    },
    #[error("checkpoint segments do not match the {kind} layout: expected {expected:?}, found {found:?}")]
    LayoutMismatch {
        kind: ModelKind,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("non-finite parameter value at segment {name:?} index {index}")]
    NonFinite { name: String, index: usize },
}

/// Serializes a model configuration and its flat parameters.
pub fn checkpoint_to_string(cfg: &ModelConfig, theta: &[f64]) -> String {
    assert_eq!(theta.len(), cfg.param_count(), "parameter count mismatch");
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("model {}\n", cfg.kind));
    out.push_str(&format!("descriptor_dim {}\n", cfg.descriptor_dim));
    out.push_str(&format!("hidden {}\n", cfg.hidden));
    let hh: Vec<String> = cfg.hazard_hidden.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!(
        "hazard_hidden {}\n",
        if hh.is_empty() { "-".to_string() } else { hh.join(",") }
    ));
    out.push_str(&format!(
        "hazard_output {}\n",
        if cfg.hazard_linear_output { "linear" } else { "softplus" }
    ));
    out.push_str(&format!("hyper_hidden {}\n", cfg.hyper_hidden));
    out.push_str(&format!("M {}\n", cfg.history_len));
    for segment in cfg.layout() {
        out.push_str(&format!("array {} {}\n", segment.name, segment.len));
        let vals: Vec<String> = theta[segment.range()].iter().map(|v| format!("{v}")).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

/// Parses a checkpoint produced by [`checkpoint_to_string`]. Strict: the
/// header must be complete, segments must match the declared model's
/// layout, and every value must be finite.
pub fn parse_checkpoint(contents: &str) -> Result<(ModelConfig, Vec<f64>), CheckpointError> {
    let mut lines = contents.lines().enumerate();
    let bad = |line: usize, message: String| CheckpointError::Malformed { line, message };

    let (_, first) = lines
        .next()
        .ok_or_else(|| bad(1, "empty checkpoint".into()))?;
    if first.trim() != MAGIC {
        return Err(bad(1, format!("expected {MAGIC:?}")));
    }

    let mut kind: Option<ModelKind> = None;
    let mut descriptor_dim: Option<usize> = None;
    let mut hidden: Option<usize> = None;
    let mut hazard_hidden: Option<Vec<usize>> = None;
    let mut hazard_linear: Option<bool> = None;
    let mut hyper_hidden: Option<usize> = None;
    let mut history_len: Option<usize> = None;
    let mut arrays: Vec<(String, Vec<f64>)> = Vec::new();
    let mut ended = false;

    let mut pending_array: Option<(String, usize, usize)> = None; // name, declared, line
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if ended {
            if !line.is_empty() {
                return Err(bad(line_no, "content after end marker".into()));
            }
            continue;
        }
        if let Some((name, declared, decl_line)) = pending_array.take() {
            let vals: Result<Vec<f64>, _> = line
                .split_ascii_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect();
            let vals = vals.map_err(|e| bad(line_no, format!("bad value in {name}: {e}")))?;
            if vals.len() != declared {
                return Err(CheckpointError::SegmentLength {
                    name,
                    declared,
                    found: vals.len(),
                });
            }
            if let Some(index) = vals.iter().position(|v| !v.is_finite()) {
                return Err(CheckpointError::NonFinite { name, index });
            }
            let _ = decl_line;
            arrays.push((name, vals));
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| bad(line_no, format!("expected `key value`, got {line:?}")))?;
        let value = value.trim();
        match key {
            "model" => {
                kind = Some(ModelKind::parse(value).ok_or_else(|| {
                    bad(line_no, format!("unknown model kind {value:?}"))
                })?);
            }
            "descriptor_dim" => {
                descriptor_dim = Some(value.parse().map_err(|e| {
                    bad(line_no, format!("bad descriptor_dim: {e}"))
                })?);
            }
            "hidden" => {
                hidden =
                    Some(value.parse().map_err(|e| bad(line_no, format!("bad hidden: {e}")))?);
            }
            "hazard_hidden" => {
                hazard_hidden = Some(if value == "-" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<usize>()
                                .map_err(|e| bad(line_no, format!("bad hazard_hidden: {e}")))
                        })
                        .collect::<Result<_, _>>()?
                });
            }
            "hazard_output" => {
                hazard_linear = Some(match value {
                    "linear" => true,
                    "softplus" => false,
                    other => return Err(bad(line_no, format!("bad hazard_output {other:?}"))),
                });
            }
            "hyper_hidden" => {
                hyper_hidden = Some(
                    value
                        .parse()
                        .map_err(|e| bad(line_no, format!("bad hyper_hidden: {e}")))?,
                );
            }
            "M" => {
                history_len =
                    Some(value.parse().map_err(|e| bad(line_no, format!("bad M: {e}")))?);
            }
            "array" => {
                let (name, len) = value
                    .split_once(' ')
                    .ok_or_else(|| bad(line_no, "expected `array name len`".into()))?;
                let len: usize = len
                    .trim()
                    .parse()
                    .map_err(|e| bad(line_no, format!("bad array length: {e}")))?;
                pending_array = Some((name.trim().to_string(), len, line_no));
            }
            other => return Err(bad(line_no, format!("unknown header key {other:?}"))),
        }
    }
    if pending_array.is_some() {
        return Err(bad(0, "array declared but values missing".into()));
    }
    if !ended {
        return Err(bad(0, "missing end marker".into()));
    }

    let missing = |what: &str| bad(0, format!("missing header field {what}"));
    let cfg = ModelConfig {
        kind: kind.ok_or_else(|| missing("model"))?,
        descriptor_dim: descriptor_dim.ok_or_else(|| missing("descriptor_dim"))?,
        hidden: hidden.ok_or_else(|| missing("hidden"))?,
        hazard_hidden: hazard_hidden.ok_or_else(|| missing("hazard_hidden"))?,
        hyper_hidden: hyper_hidden.ok_or_else(|| missing("hyper_hidden"))?,
        history_len: history_len.ok_or_else(|| missing("M"))?,
        hazard_linear_output: hazard_linear.ok_or_else(|| missing("hazard_output"))?,
    };
    if cfg.descriptor_dim == 0 || cfg.hidden == 0 || cfg.hyper_hidden == 0 || cfg.history_len == 0
    {
        return Err(bad(0, "zero-sized topology field".into()));
    }

    let expected: Vec<(String, usize)> = cfg
        .layout()
        .iter()
        .map(|s| (s.name.to_string(), s.len))
        .collect();
    let found: Vec<(String, usize)> = arrays.iter().map(|(n, v)| (n.clone(), v.len())).collect();
    if expected != found {
        return Err(CheckpointError::LayoutMismatch {
            kind: cfg.kind,
            expected: expected.into_iter().map(|(n, l)| format!("{n}[{l}]")).collect(),
            found: found.into_iter().map(|(n, l)| format!("{n}[{l}]")).collect(),
        });
    }
    let mut theta = Vec::with_capacity(cfg.param_count());
    for (_, vals) in arrays {
        theta.extend(vals);
    }
    Ok((cfg, theta))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    cfg: &ModelConfig,
    theta: &[f64],
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(cfg, theta)).map_err(|source| {
        CheckpointError::Io {
            path: path.display().to_string(),
            source,
        }
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, Vec<f64>), CheckpointError> {
    let path = path.as_ref();
    let contents = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint(&contents)
}
