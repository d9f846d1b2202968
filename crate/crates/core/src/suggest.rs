//! Ranked diagram suggestions from model outputs.
//!
//! Rows of the output grid are normalized into per-string distributions and
//! a diagram's score is the product of the probabilities of its slots. The
//! k best diagrams are enumerated best-first: starting from the per-string
//! argmax, each step moves one string to its next most likely slot.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::chords::ChordLabel;
use crate::encoding::{encode_context_input, encode_label_input, normalize_rows, MUTED_SLOT, SLOTS_PER_STRING};
use crate::fretboard::{Diagram, StringState, STRING_COUNT};
use crate::metrics::{anatomical_score, chord_change_ease, pitch_scores, UNPLAYABLE_THRESHOLD};
use crate::model::{ModelError, SuggestionModel, Topology};

#[derive(Debug, Error)]
pub enum SuggestError {
    #[error("the context model needs the previous diagram")]
    MissingContext,
    #[error("k must be positive")]
    InvalidK,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annotations {
    pub playability: f64,
    pub unplayable: bool,
    pub pitch_f1: f64,
    /// Present only when a previous diagram was given.
    pub chord_change_ease: Option<f64>,
}

impl Annotations {
    pub fn compute(diagram: &Diagram, label: &ChordLabel, prev: Option<&Diagram>) -> Self {
        let playability = anatomical_score(diagram);
        Annotations {
            playability,
            unplayable: playability < UNPLAYABLE_THRESHOLD,
            pitch_f1: pitch_scores(diagram, label).f1,
            chord_change_ease: prev.map(|p| chord_change_ease(p, diagram)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub diagram: Diagram,
    pub score: f64,
    pub annotations: Annotations,
}

/// Model input for a label and optional previous diagram.
pub fn model_input(
    model: &SuggestionModel,
    label: &ChordLabel,
    prev: Option<&Diagram>,
) -> Result<Vec<f64>, SuggestError> {
    match model.topology {
        Topology::Baseline => Ok(encode_label_input(label)),
        Topology::Full => {
            let prev = prev.ok_or(SuggestError::MissingContext)?;
            Ok(encode_context_input(prev, label))
        }
    }
}

#[derive(Debug, PartialEq)]
struct Candidate {
    score: f64,
    ranks: [usize; STRING_COUNT],
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on score; equal scores pop the lexicographically smaller ranks first
        self.score.total_cmp(&other.score).then_with(|| other.ranks.cmp(&self.ranks))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` most probable distinct valid diagrams under the row-normalized
/// distribution, best first. All-muted combinations are skipped.
pub fn top_k_diagrams(probs: &[f64], k: usize) -> Vec<(Diagram, f64)> {
    let normalized = normalize_rows(probs);
    // per string: slots ordered by descending probability, lower slot first on ties
    let orders: Vec<Vec<usize>> = normalized
        .chunks(SLOTS_PER_STRING)
        .map(|row| {
            let mut idx: Vec<usize> = (0..SLOTS_PER_STRING).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let prob = |s: usize, rank: usize| normalized[s * SLOTS_PER_STRING + orders[s][rank]];
    let score_of = |ranks: &[usize; STRING_COUNT]| (0..STRING_COUNT).map(|s| prob(s, ranks[s])).product::<f64>();

    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = [0; STRING_COUNT];
    seen.insert(start);
    heap.push(Candidate { score: score_of(&start), ranks: start });

    let mut out = Vec::with_capacity(k);
    while let Some(Candidate { score, ranks }) = heap.pop() {
        let states = std::array::from_fn(|s| {
            let slot = orders[s][ranks[s]];
            if slot == MUTED_SLOT {
                StringState::Muted
            } else {
                StringState::Fret(slot as u8)
            }
        });
        if let Ok(d) = Diagram::new(states) {
            out.push((d, score));
            if out.len() == k {
                break;
            }
        }
        for s in 0..STRING_COUNT {
            if ranks[s] + 1 < SLOTS_PER_STRING {
                let mut next = ranks;
                next[s] += 1;
                if seen.insert(next) {
                    heap.push(Candidate { score: score_of(&next), ranks: next });
                }
            }
        }
    }
    out
}

/// Ranked suggestions for `label`, annotated with playability, pitch F1
/// and (when `prev` is given) chord-change ease.
pub fn suggest(
    model: &SuggestionModel,
    label: &ChordLabel,
    prev: Option<&Diagram>,
    k: usize,
) -> Result<Vec<Suggestion>, SuggestError> {
    if k == 0 {
        return Err(SuggestError::InvalidK);
    }
    let probs = model.forward(&model_input(model, label, prev)?)?;
    Ok(top_k_diagrams(&probs, k)
        .into_iter()
        .map(|(diagram, score)| Suggestion { annotations: Annotations::compute(&diagram, label, prev), diagram, score })
        .collect())
}

/// Chains top-1 suggestions over `labels`, starting from `first`.
pub fn continue_sequence(
    model: &SuggestionModel,
    labels: &[ChordLabel],
    first: Diagram,
) -> Result<Vec<Diagram>, SuggestError> {
    let mut out = Vec::with_capacity(labels.len());
    if labels.is_empty() {
        return Ok(out);
    }
    out.push(first);
    for label in &labels[1..] {
        let prev = *out.last().expect("non-empty");
        let top = suggest(model, label, Some(&prev), 1)?;
        out.push(top[0].diagram);
    }
    Ok(out)
}
