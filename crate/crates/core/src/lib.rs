//! Temporal classification losses over pronunciation graphs.
//!
//! The classic single-sequence loss marginalizes over every frame alignment
//! that collapses to one target transcription. This crate generalizes the
//! target to a node-labeled acyclic acceptor — typically the graph of all
//! concatenations of the pronunciation variants a lexicon lists per word — and
//! computes the exact loss and gradient by intersecting that graph with the
//! per-frame posteriors and running log-domain forward-backward on the
//! resulting trellis.
//!
//! The pieces:
//!
//! - [`acceptor`]: the [`LabelGraph`] type, trimming, topological ordering and
//!   Graphviz export.
//! - [`topology`]: blank-interleaved graph construction for single sequences
//!   plus parallel/serial composition over per-word variants.
//! - [`trellis`]: graph x emission intersection and forward-backward.
//! - [`loss`]: the graph loss and its gradient, an independent reference
//!   implementation of the single-sequence recursion, the collapse function
//!   and an exhaustive brute-force oracle.
//! - [`lexicon`]: ranked multi-variant pronunciation dictionaries.
//! - [`metrics`]: edit distances, pooled error rates and oracle n-best label
//!   error rates.
//! - [`synth`]: a synthetic corpus generator and a small trainable frame
//!   classifier for end-to-end comparisons of the objectives.

pub mod acceptor;
pub mod emissions;
pub mod error;
pub mod lexicon;
pub mod loss;
pub mod metrics;
pub mod synth;
pub mod topology;
pub mod trellis;
pub mod vocab;

mod util;

pub use acceptor::{topo_order, LabelGraph};
pub use emissions::EmissionMatrix;
pub use error::{Error, Result};
pub use lexicon::{parse_lexicon, Lexicon, NBest, Variant};
pub use loss::{
    alignment_logprob, brute_force_loss, collapse, ctc_loss_reference, greedy_decode, gtc_loss,
    LossResult, TargetSequence,
};
pub use metrics::{
    edit_distance, error_rate, graph_edit_distance, oracle_ler, oracle_ler_report,
    parse_transcripts, EditCounts, LerReport, Transcript,
};
pub use synth::{
    dump_corpus, evaluate, generate_corpus, load_corpus, run_experiment, train, Corpus,
    CorpusDump, ExperimentOutcome, Features, FrameModel, LossMode, SynthConfig, TrainStats,
    Utterance,
};
pub use topology::{
    build_ctc_graph, build_gtc_graph, enumerate_collapsed, parallel, serial, Pronunciation,
    WordAlternatives,
};
pub use trellis::{forward_backward, intersect, Trellis, TrellisArc, TrellisState};
pub use vocab::{Vocabulary, BLANK, BLANK_SYMBOL};
