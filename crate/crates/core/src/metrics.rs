//! Evaluation metrics for suggested diagrams: set overlap on pitch classes
//! and on string/fret positions, anatomical playability, chord-change ease
//! and texture profiles.

use std::collections::BTreeSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::chords::ChordLabel;
use crate::fretboard::{assign_fingering, greedy_fingering, Diagram, FingeringResult, Tuning};

/// Below this anatomical score a diagram counts as unplayable.
pub const UNPLAYABLE_THRESHOLD: f64 = 0.2;
/// Cost of a finger that is placed in only one of the two chords.
pub const UNMATCHED_FINGER_COST: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SetScores {
    pub fn from_counts(intersection: usize, predicted: usize, expected: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { intersection as f64 / predicted as f64 };
        let recall = if expected == 0 { 0.0 } else { intersection as f64 / expected as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        SetScores { precision, recall, f1 }
    }

    pub fn of_sets<T: Ord + Hash>(predicted: &BTreeSet<T>, expected: &BTreeSet<T>) -> Self {
        let inter = predicted.intersection(expected).count();
        SetScores::from_counts(inter, predicted.len(), expected.len())
    }
}

/// Pitch-class overlap between a diagram and the chord it should voice.
pub fn pitch_scores(pred: &Diagram, label: &ChordLabel) -> SetScores {
    SetScores::of_sets(&pred.pitch_classes(&Tuning::STANDARD), &label.pitch_classes())
}

fn string_fret_set(d: &Diagram) -> BTreeSet<(usize, u8)> {
    d.sounding().collect()
}

/// Overlap of sounding (string, fret) pairs. Muted strings are not pairs.
pub fn string_fret_scores(pred: &Diagram, reference: &Diagram) -> SetScores {
    SetScores::of_sets(&string_fret_set(pred), &string_fret_set(reference))
}

/// Ease-of-playing score in [0, 1] from the fretted span, 0 when the
/// diagram needs more than four fingers.
pub fn anatomical_score(d: &Diagram) -> f64 {
    if assign_fingering(d) == FingeringResult::Unfingerable {
        return 0.0;
    }
    let span = match (d.min_fretted(), d.max_fretted()) {
        (Some(lo), Some(hi)) => (hi - lo) as f64,
        _ => 0.0,
    };
    (1.0 - (span - 2.0).max(0.0) / 3.0).clamp(0.0, 1.0)
}

pub fn is_unplayable(d: &Diagram) -> bool {
    anatomical_score(d) < UNPLAYABLE_THRESHOLD
}

/// Wrist movement (index-fret distance) and finger movement between two
/// chords.
pub fn chord_change_movements(from: &Diagram, to: &Diagram) -> (f64, f64) {
    let wrist = (from.index_fret() as f64 - to.index_fret() as f64).abs();
    let a = greedy_fingering(from).finger_positions();
    let b = greedy_fingering(to).finger_positions();
    let mut fingers: BTreeSet<u8> = a.iter().map(|p| p.finger).collect();
    fingers.extend(b.iter().map(|p| p.finger));
    let mut movement = 0.0;
    for finger in fingers {
        let pa = a.iter().find(|p| p.finger == finger);
        let pb = b.iter().find(|p| p.finger == finger);
        movement += match (pa, pb) {
            (Some(x), Some(y)) => (x.string as f64 - y.string as f64).abs() + (x.fret as f64 - y.fret as f64).abs(),
            _ => UNMATCHED_FINGER_COST,
        };
    }
    (wrist, movement)
}

/// Chord-change ease `1 / (1 + m_w + m_f)`: 1 for no movement, towards 0
/// for large movements.
pub fn chord_change_ease(from: &Diagram, to: &Diagram) -> f64 {
    let (wrist, fingers) = chord_change_movements(from, to);
    1.0 / (1.0 + wrist + fingers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TextureProfile {
    pub muted_ratio: f64,
    pub open_ratio: f64,
    pub string_centroid: f64,
    pub unique_note_ratio: f64,
}

impl TextureProfile {
    pub fn values(&self) -> [f64; 4] {
        [self.muted_ratio, self.open_ratio, self.string_centroid, self.unique_note_ratio]
    }

    pub fn from_values(v: [f64; 4]) -> Self {
        TextureProfile { muted_ratio: v[0], open_ratio: v[1], string_centroid: v[2], unique_note_ratio: v[3] }
    }
}

pub fn texture(d: &Diagram) -> TextureProfile {
    let sounding: Vec<usize> = d.sounding().map(|(s, _)| s).collect();
    let n = sounding.len() as f64;
    TextureProfile {
        muted_ratio: d.muted_count() as f64 / 6.0,
        open_ratio: d.open_count() as f64 / 6.0,
        // low E is string 0
        string_centroid: sounding.iter().sum::<usize>() as f64 / n / 5.0,
        unique_note_ratio: d.pitch_classes(&Tuning::STANDARD).len() as f64 / n,
    }
}

/// Componentwise absolute texture difference between two chords.
pub fn texture_delta(a: &Diagram, b: &Diagram) -> TextureProfile {
    let (ta, tb) = (texture(a).values(), texture(b).values());
    TextureProfile::from_values([0, 1, 2, 3].map(|i| (ta[i] - tb[i]).abs()))
}

/// Slotwise F1 between two one-hot diagram encodings.
pub fn slot_f1(pred: &Diagram, target: &Diagram) -> f64 {
    // both encodings have exactly one hot slot per string
    let hits = pred.strings().iter().zip(target.strings()).filter(|(a, b)| a == b).count();
    SetScores::from_counts(hits, 6, 6).f1
}
