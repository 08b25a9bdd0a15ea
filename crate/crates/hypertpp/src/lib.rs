//! Time-to-event modeling toolkit built around neural temporal point
//! processes whose per-sequence weights come from descriptor-conditioned
//! hypernetworks.
//!
//! The crate provides:
//!
//! - [`seqdata`]: event-sequence data model, corpus files, normalization and
//!   train/validation/test split protocols;
//! - [`hawkes`]: a classical exponential-kernel Hawkes process used as an
//!   exact simulator and likelihood oracle for synthetic corpora;
//! - [`diffgraph`]: a scalar reverse-mode differentiation engine with
//!   explicit derivative graphs for monotone hazard networks;
//! - [`nhp`]: the base neural point process — RNN history encoder, monotone
//!   cumulative-hazard network, exact hazard, likelihood and median
//!   next-event prediction by bisection;
//! - [`hypernet`]: descriptor-conditioned weight generators;
//! - [`model`]: the four trainable model kinds sharing one likelihood path;
//! - [`train`]: Adam, zero-shot maximum-likelihood training and sequential
//!   continual learning with a snapshot output regularizer;
//! - [`eval`]: MNLL/MAE metrics, evaluation protocols, forgetting matrices
//!   and report emission;
//! - [`checkpoint`]: the text checkpoint format shared by all models.

pub mod checkpoint;
pub mod diffgraph;
pub mod eval;
pub mod hawkes;
pub mod hypernet;
pub mod model;
pub mod nhp;
pub mod report;
pub mod seqdata;
pub mod train;
