//! Context-aware guitar chord diagram suggestion.
//!
//! Given a chord label and the diagram played just before it, a small
//! neural network proposes fretboard diagrams for the new chord. The crate
//! also carries the dataset pipeline, training and evaluation harness,
//! playability and texture metrics, an HTTP service and a CLI.

pub mod chords;
pub mod cli;
pub mod data;
pub mod encoding;
pub mod evaluation;
pub mod fretboard;
pub mod metrics;
pub mod model;
pub mod server;
pub mod suggest;

pub use chords::{parse_label, ChordLabel, ChordNature, LabelError, PitchClass};
pub use fretboard::{parse_fingering, Diagram, DiagramError, StringState, Tuning};
pub use model::{SuggestionModel, Topology, TrainConfig};
pub use suggest::{continue_sequence, suggest, Suggestion};
