//! Vector encodings of labels and diagrams.
//!
//! Input layout of the context model (180 values):
//! `[previous diagram 6x26 | bass one-hot 12 | nature many-hot 12]`.
//! Each diagram row holds frets 0..=24 followed by a muted flag at slot 25.

use crate::chords::ChordLabel;
use crate::fretboard::{Diagram, StringState, MAX_FRET, STRING_COUNT};

pub const SLOTS_PER_STRING: usize = MAX_FRET as usize + 2;
pub const MUTED_SLOT: usize = SLOTS_PER_STRING - 1;
pub const DIAGRAM_WIDTH: usize = STRING_COUNT * SLOTS_PER_STRING;
pub const LABEL_WIDTH: usize = 24;
pub const CONTEXT_INPUT_WIDTH: usize = DIAGRAM_WIDTH + LABEL_WIDTH;

/// Tag stored in model files so a reader can check the layout it expects.
pub const INPUT_LAYOUT_TAG: &str = "prev_diagram[6x26:fret0..24,muted]|bass[12]|nature[12]";

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    pub bass_onehot: [f64; 12],
    pub nature_manyhot: [f64; 12],
}

impl LabelVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(LABEL_WIDTH);
        v.extend_from_slice(&self.bass_onehot);
        v.extend_from_slice(&self.nature_manyhot);
        v
    }
}

/// Flattened 6x26 grid, row-major by string.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramVector(pub Vec<f64>);

impl DiagramVector {
    pub fn row(&self, string: usize) -> &[f64] {
        &self.0[string * SLOTS_PER_STRING..(string + 1) * SLOTS_PER_STRING]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

pub fn encode_label(label: &ChordLabel) -> LabelVector {
    let mut bass_onehot = [0.0; 12];
    bass_onehot[label.bass.value() as usize] = 1.0;
    let mut nature_manyhot = [0.0; 12];
    for pc in label.pitch_classes() {
        nature_manyhot[pc.value() as usize] = 1.0;
    }
    LabelVector { bass_onehot, nature_manyhot }
}

pub fn encode_diagram(d: &Diagram) -> DiagramVector {
    let mut grid = vec![0.0; DIAGRAM_WIDTH];
    for (i, s) in d.strings().iter().enumerate() {
        let slot = match s {
            StringState::Muted => MUTED_SLOT,
            StringState::Fret(f) => *f as usize,
        };
        grid[i * SLOTS_PER_STRING + slot] = 1.0;
    }
    DiagramVector(grid)
}

/// Input for the context model: previous diagram then label.
pub fn encode_context_input(prev: &Diagram, label: &ChordLabel) -> Vec<f64> {
    let mut v = encode_diagram(prev).0;
    v.extend(encode_label(label).to_vec());
    v
}

/// Input for the label-only model.
pub fn encode_label_input(label: &ChordLabel) -> Vec<f64> {
    encode_label(label).to_vec()
}

/// Index of the largest value, ties going to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn slot_state(slot: usize) -> StringState {
    if slot == MUTED_SLOT {
        StringState::Muted
    } else {
        StringState::Fret(slot as u8)
    }
}

/// Row-wise argmax of a 156-value probability grid.
///
/// An all-muted argmax is not a diagram; in that case the muted string
/// whose best fret loses the least against its muted slot is switched to
/// that fret (the most probable valid diagram).
pub fn decode_probabilities(probs: &[f64]) -> Diagram {
    assert_eq!(probs.len(), DIAGRAM_WIDTH, "expected {DIAGRAM_WIDTH} probabilities");
    let mut states = [StringState::Muted; STRING_COUNT];
    for (i, s) in states.iter_mut().enumerate() {
        *s = slot_state(argmax(&probs[i * SLOTS_PER_STRING..(i + 1) * SLOTS_PER_STRING]));
    }
    if states.iter().all(|s| *s == StringState::Muted) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..STRING_COUNT {
            let row = &probs[i * SLOTS_PER_STRING..(i + 1) * SLOTS_PER_STRING];
            let fret = argmax(&row[..MUTED_SLOT]);
            let ratio = row[fret] / row[MUTED_SLOT];
            if best.is_none_or(|(r, _, _)| ratio > r) {
                best = Some((ratio, i, fret));
            }
        }
        let (_, string, fret) = best.expect("six strings");
        states[string] = StringState::Fret(fret as u8);
    }
    Diagram::new(states).expect("decoded diagram always has a sounding string")
}

/// Divides each string row by its sum.
pub fn normalize_rows(probs: &[f64]) -> Vec<f64> {
    let mut out = probs.to_vec();
    for row in out.chunks_mut(SLOTS_PER_STRING) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|v| *v /= sum);
        }
    }
    out
}
