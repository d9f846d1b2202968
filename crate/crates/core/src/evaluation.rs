//! Test-set evaluation and the multi-split train/evaluate protocol.

use serde::Serialize;
use thiserror::Error;

use crate::data::{augment, dedup_targets, split, DataError, SplitSpec, TrackTransition};
use crate::metrics::{
    chord_change_ease, is_unplayable, pitch_scores, slot_f1, string_fret_scores, texture, texture_delta, TextureProfile,
};
use crate::model::{train, ModelError, SuggestionModel, Topology, TrainConfig, TrainReport};
use crate::suggest::{suggest, SuggestError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Suggest(#[from] SuggestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Unplayable rate, transition ease and texture of a set of diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagramSetMetrics {
    pub unplayable: f64,
    pub ease: f64,
    pub texture: TextureProfile,
    pub texture_delta: TextureProfile,
}

/// Means over one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub test_size: usize,
    pub f1: f64,
    pub pitch_f1: f64,
    pub string_fret_f1: f64,
    pub predictions: DiagramSetMetrics,
    pub ground_truth: DiagramSetMetrics,
}

#[derive(Default)]
struct SetAccumulator {
    unplayable: f64,
    ease: f64,
    texture: [f64; 4],
    delta: [f64; 4],
}

impl SetAccumulator {
    fn add(&mut self, prev: &crate::fretboard::Diagram, d: &crate::fretboard::Diagram) {
        self.unplayable += is_unplayable(d) as u8 as f64;
        self.ease += chord_change_ease(prev, d);
        for (acc, v) in self.texture.iter_mut().zip(texture(d).values()) {
            *acc += v;
        }
        for (acc, v) in self.delta.iter_mut().zip(texture_delta(prev, d).values()) {
            *acc += v;
        }
    }

    fn mean(&self, n: f64) -> DiagramSetMetrics {
        DiagramSetMetrics {
            unplayable: self.unplayable / n,
            ease: self.ease / n,
            texture: TextureProfile::from_values(self.texture.map(|v| v / n)),
            texture_delta: TextureProfile::from_values(self.delta.map(|v| v / n)),
        }
    }
}

/// Scores the model's top-1 suggestion on every test transition. Test
/// transitions sharing the same target label and diagram are counted once.
pub fn evaluate(model: &SuggestionModel, test: &[TrackTransition]) -> Result<SplitMetrics, EvalError> {
    let test = dedup_targets(test);
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let (mut f1, mut pitch, mut sf) = (0.0, 0.0, 0.0);
    let mut predicted = SetAccumulator::default();
    let mut reference = SetAccumulator::default();
    for tt in &test {
        let t = &tt.transition;
        let top = suggest(model, &t.next_label, Some(&t.prev_diagram), 1)?;
        let pred = top[0].diagram;
        f1 += slot_f1(&pred, &t.next_diagram);
        pitch += pitch_scores(&pred, &t.next_label).f1;
        sf += string_fret_scores(&pred, &t.next_diagram).f1;
        predicted.add(&t.prev_diagram, &pred);
        reference.add(&t.prev_diagram, &t.next_diagram);
    }
    let n = test.len() as f64;
    Ok(SplitMetrics {
        test_size: test.len(),
        f1: f1 / n,
        pitch_f1: pitch / n,
        string_fret_f1: sf / n,
        predictions: predicted.mean(n),
        ground_truth: reference.mean(n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextureSummary {
    pub muted: MeanStd,
    pub muted_delta: MeanStd,
    pub open: MeanStd,
    pub open_delta: MeanStd,
    pub string_centroid: MeanStd,
    pub string_centroid_delta: MeanStd,
    pub unique_notes: MeanStd,
    pub unique_notes_delta: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayabilitySummary {
    pub unplayable: MeanStd,
    pub ease: MeanStd,
    pub texture: TextureSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub topology: Topology,
    pub splits: usize,
    pub test_sizes: Vec<usize>,
    pub f1: MeanStd,
    pub pitch_f1: MeanStd,
    pub string_fret_f1: MeanStd,
    pub model: PlayabilitySummary,
    pub test_set: PlayabilitySummary,
    pub per_split: Vec<SplitMetrics>,
}

fn summarize(sets: &[DiagramSetMetrics]) -> PlayabilitySummary {
    let stat = |f: &dyn Fn(&DiagramSetMetrics) -> f64| MeanStd::of(&sets.iter().map(f).collect::<Vec<_>>());
    PlayabilitySummary {
        unplayable: stat(&|m| m.unplayable),
        ease: stat(&|m| m.ease),
        texture: TextureSummary {
            muted: stat(&|m| m.texture.muted_ratio),
            muted_delta: stat(&|m| m.texture_delta.muted_ratio),
            open: stat(&|m| m.texture.open_ratio),
            open_delta: stat(&|m| m.texture_delta.open_ratio),
            string_centroid: stat(&|m| m.texture.string_centroid),
            string_centroid_delta: stat(&|m| m.texture_delta.string_centroid),
            unique_notes: stat(&|m| m.texture.unique_note_ratio),
            unique_notes_delta: stat(&|m| m.texture_delta.unique_note_ratio),
        },
    }
}

/// Combines per-split results into mean and standard deviation.
pub fn aggregate(topology: Topology, per_split: Vec<SplitMetrics>) -> EvaluationReport {
    let stat = |f: fn(&SplitMetrics) -> f64| MeanStd::of(&per_split.iter().map(f).collect::<Vec<_>>());
    let predictions: Vec<_> = per_split.iter().map(|m| m.predictions).collect();
    let truth: Vec<_> = per_split.iter().map(|m| m.ground_truth).collect();
    EvaluationReport {
        topology,
        splits: per_split.len(),
        test_sizes: per_split.iter().map(|m| m.test_size).collect(),
        f1: stat(|m| m.f1),
        pitch_f1: stat(|m| m.pitch_f1),
        string_fret_f1: stat(|m| m.string_fret_f1),
        model: summarize(&predictions),
        test_set: summarize(&truth),
        per_split,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOptions {
    pub topology: Topology,
    pub config: TrainConfig,
    pub augment: bool,
    pub split_seed: u64,
    pub splits: u32,
}

/// Trains one model per split (train portion, optionally augmented; early
/// stopping on the validation portion) and evaluates it on the test
/// portion.
pub fn run_protocol(
    transitions: &[TrackTransition],
    opts: &ProtocolOptions,
) -> Result<(EvaluationReport, Vec<TrainReport>), EvalError> {
    let mut per_split = Vec::with_capacity(opts.splits as usize);
    let mut reports = Vec::with_capacity(opts.splits as usize);
    for split_index in 0..opts.splits {
        let (model, report, test) = train_on_split(transitions, opts, split_index)?;
        per_split.push(evaluate(&model, &test)?);
        reports.push(report);
    }
    Ok((aggregate(opts.topology, per_split), reports))
}

/// Trains on one split and returns the model with that split's test set.
pub fn train_on_split(
    transitions: &[TrackTransition],
    opts: &ProtocolOptions,
    split_index: u32,
) -> Result<(SuggestionModel, TrainReport, Vec<TrackTransition>), EvalError> {
    let parts = split(transitions, SplitSpec { seed: opts.split_seed, split_index })?;
    let train_set = if opts.augment { augment(&parts.train) } else { parts.train };
    let encode = |ts: &[TrackTransition]| ts.iter().map(|t| t.transition.encode(opts.topology)).collect::<Vec<_>>();
    let (mut model, report) = train(opts.topology, &encode(&train_set), &encode(&parts.validation), &opts.config)?;
    model.meta.provenance = crate::model::Provenance {
        split_seed: Some(opts.split_seed),
        split_index: Some(split_index),
        augmented: opts.augment,
    };
    Ok((model, report, parts.test))
}
