//! Dataset pipeline: track ingestion, transition extraction with per-track
//! deduplication, fret-shift augmentation, seeded splits and corpus stats.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chords::{ChordLabel, LabelError, PitchClass};
use crate::encoding::{encode_context_input, encode_diagram, encode_label_input, EncodedPair};
use crate::fretboard::{Diagram, DiagramError};
use crate::model::Topology;

/// Consecutive chords at most this many bars apart form a transition.
pub const MAX_BAR_GAP: u32 = 2;
/// Up-shifted copies never go above this fret.
pub const AUGMENT_MAX_FRET: u8 = 15;
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);
pub const MIN_SPLIT_SIZE: usize = 5;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("track {track}, event {event}: {source}")]
    Label { track: String, event: usize, source: LabelError },
    #[error("track {track}, event {event}: {source}")]
    Fingering { track: String, event: usize, source: DiagramError },
    #[error("track {track}: events are not sorted by bar")]
    Unsorted { track: String },
    #[error("need at least {MIN_SPLIT_SIZE} transitions to split, found {0}")]
    TooFewTransitions(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of the track file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackEvents {
    pub track_id: String,
    pub events: Vec<ChordEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordEvent {
    pub bar: u32,
    pub label: String,
    pub fingering: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub prev_label: ChordLabel,
    pub prev_diagram: Diagram,
    pub next_label: ChordLabel,
    pub next_diagram: Diagram,
}

/// A transition with the track it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrackTransition {
    pub track_id: String,
    pub transition: Transition,
}

/// Wire form of a transition, one per line in transitions files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub track_id: String,
    pub prev_label: String,
    pub prev_fingering: String,
    pub next_label: String,
    pub next_fingering: String,
}

impl Transition {
    /// Both diagrams shifted by `offset` frets and both labels transposed
    /// by the same number of semitones.
    pub fn shifted(&self, offset: i32) -> Result<Transition, DiagramError> {
        Ok(Transition {
            prev_label: self.prev_label.transpose(offset),
            prev_diagram: self.prev_diagram.shift(offset)?,
            next_label: self.next_label.transpose(offset),
            next_diagram: self.next_diagram.shift(offset)?,
        })
    }

    pub fn encode(&self, topology: Topology) -> EncodedPair {
        let input = match topology {
            Topology::Baseline => encode_label_input(&self.next_label),
            Topology::Full => encode_context_input(&self.prev_diagram, &self.next_label),
        };
        EncodedPair { input, target: encode_diagram(&self.next_diagram).0 }
    }
}

impl TrackTransition {
    pub fn to_record(&self) -> TransitionRecord {
        let t = &self.transition;
        TransitionRecord {
            track_id: self.track_id.clone(),
            prev_label: t.prev_label.to_string(),
            prev_fingering: t.prev_diagram.to_string(),
            next_label: t.next_label.to_string(),
            next_fingering: t.next_diagram.to_string(),
        }
    }

    pub fn from_record(r: &TransitionRecord, line: usize) -> Result<Self, DataError> {
        let label = |s: &str| ChordLabel::parse(s).map_err(|e| DataError::Json { line, message: e.to_string() });
        let diagram = |s: &str| Diagram::parse(s).map_err(|e| DataError::Json { line, message: e.to_string() });
        Ok(TrackTransition {
            track_id: r.track_id.clone(),
            transition: Transition {
                prev_label: label(&r.prev_label)?,
                prev_diagram: diagram(&r.prev_fingering)?,
                next_label: label(&r.next_label)?,
                next_diagram: diagram(&r.next_fingering)?,
            },
        })
    }
}

/// Pairs of consecutive chords at most two bars apart, keeping one
/// occurrence of each distinct transition in the track.
pub fn extract_transitions(track: &TrackEvents) -> Result<Vec<TrackTransition>, DataError> {
    let mut parsed = Vec::with_capacity(track.events.len());
    for (i, e) in track.events.iter().enumerate() {
        let label = ChordLabel::parse(&e.label).map_err(|source| DataError::Label {
            track: track.track_id.clone(),
            event: i,
            source,
        })?;
        let diagram = Diagram::parse(&e.fingering).map_err(|source| DataError::Fingering {
            track: track.track_id.clone(),
            event: i,
            source,
        })?;
        parsed.push((e.bar, label, diagram));
    }
    if parsed.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(DataError::Unsorted { track: track.track_id.clone() });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for w in parsed.windows(2) {
        let ((bar_a, label_a, diagram_a), (bar_b, label_b, diagram_b)) = (w[0], w[1]);
        if bar_b - bar_a > MAX_BAR_GAP {
            continue;
        }
        let transition =
            Transition { prev_label: label_a, prev_diagram: diagram_a, next_label: label_b, next_diagram: diagram_b };
        if seen.insert(transition) {
            out.push(TrackTransition { track_id: track.track_id.clone(), transition });
        }
    }
    Ok(out)
}

/// Original transitions followed by their fret-shifted copies.
///
/// A transition whose diagrams have no open string is shifted down one fret
/// at a time while every fretted note stays at fret 1 or above, and up while
/// none goes past fret 15. Transitions with open strings pass through.
pub fn augment(transitions: &[TrackTransition]) -> Vec<TrackTransition> {
    let mut out = transitions.to_vec();
    for tt in transitions {
        let t = &tt.transition;
        if t.prev_diagram.has_open_string() || t.next_diagram.has_open_string() {
            continue;
        }
        let lowest = t.prev_diagram.min_fretted().min(t.next_diagram.min_fretted());
        let highest = t.prev_diagram.max_fretted().max(t.next_diagram.max_fretted());
        let (Some(lowest), Some(highest)) = (lowest, highest) else {
            continue;
        };
        let down = 1 - lowest as i32..=-1;
        let up = 1..=AUGMENT_MAX_FRET as i32 - highest as i32;
        for offset in down.rev().chain(up) {
            let shifted = t.shifted(offset).expect("offset range keeps frets on the neck");
            out.push(TrackTransition { track_id: tt.track_id.clone(), transition: shifted });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub split_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<TrackTransition>,
    pub validation: Vec<TrackTransition>,
    pub test: Vec<TrackTransition>,
}

/// Seeded 60-20-20 partition; each `split_index` yields its own shuffle.
pub fn split(transitions: &[TrackTransition], spec: SplitSpec) -> Result<Split, DataError> {
    let n = transitions.len();
    if n < MIN_SPLIT_SIZE {
        return Err(DataError::TooFewTransitions(n));
    }
    let key = spec.seed ^ (spec.split_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * SPLIT_RATIOS.0).round() as usize;
    let n_val = ((n as f64) * SPLIT_RATIOS.1).round() as usize;
    let take = |idx: &[usize]| idx.iter().map(|&i| transitions[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: take(&order[..n_train]),
        validation: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

/// Drops transitions whose target (label and diagram) already appeared.
pub fn dedup_targets(transitions: &[TrackTransition]) -> Vec<TrackTransition> {
    let mut seen = HashSet::new();
    transitions.iter().filter(|t| seen.insert((t.transition.next_label, t.transition.next_diagram))).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub transitions: usize,
    pub chords: usize,
    pub root_histogram: BTreeMap<String, usize>,
    /// Most frequent natures first.
    pub nature_histogram: Vec<(String, usize)>,
    pub diagrams_per_label: BTreeMap<String, usize>,
    pub median_diagrams_per_label: f64,
    pub label_inventory: BTreeMap<String, Vec<String>>,
}

/// Counts both chords of every transition.
pub fn stats(transitions: &[TrackTransition], top_natures: usize) -> CorpusStats {
    let mut roots: BTreeMap<PitchClass, usize> = BTreeMap::new();
    let mut natures: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut inventory: BTreeMap<String, BTreeSet<Diagram>> = BTreeMap::new();
    for tt in transitions {
        let t = &tt.transition;
        for (label, diagram) in [(t.prev_label, t.prev_diagram), (t.next_label, t.next_diagram)] {
            *roots.entry(label.root).or_default() += 1;
            *natures.entry(label.nature.name()).or_default() += 1;
            inventory.entry(label.to_string()).or_default().insert(diagram);
        }
    }

    let mut nature_histogram: Vec<(String, usize)> = natures.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
    nature_histogram.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    nature_histogram.truncate(top_natures);

    let diagrams_per_label: BTreeMap<String, usize> = inventory.iter().map(|(l, d)| (l.clone(), d.len())).collect();
    let mut counts: Vec<usize> = diagrams_per_label.values().copied().collect();
    counts.sort_unstable();
    let median = match counts.len() {
        0 => 0.0,
        n if n % 2 == 1 => counts[n / 2] as f64,
        n => (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0,
    };

    CorpusStats {
        transitions: transitions.len(),
        chords: transitions.len() * 2,
        root_histogram: roots.into_iter().map(|(r, c)| (r.name().to_string(), c)).collect(),
        nature_histogram,
        diagrams_per_label,
        median_diagrams_per_label: median,
        label_inventory: inventory.into_iter().map(|(l, ds)| (l, ds.iter().map(|d| d.to_string()).collect())).collect(),
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(reader: impl BufRead) -> Result<Vec<(usize, T)>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DataError::Json { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn read_tracks(reader: impl BufRead) -> Result<Vec<TrackEvents>, DataError> {
    Ok(read_jsonl(reader)?.into_iter().map(|(_, t)| t).collect())
}

pub fn read_transitions(reader: impl BufRead) -> Result<Vec<TrackTransition>, DataError> {
    read_jsonl::<TransitionRecord>(reader)?.iter().map(|(line, r)| TrackTransition::from_record(r, *line)).collect()
}

pub fn write_transitions(mut writer: impl Write, transitions: &[TrackTransition]) -> Result<(), DataError> {
    for t in transitions {
        serde_json::to_writer(&mut writer, &t.to_record()).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Extracts transitions from every track, in file order.
pub fn ingest(tracks: &[TrackEvents]) -> Result<Vec<TrackTransition>, DataError> {
    let mut out = Vec::new();
    for track in tracks {
        out.extend(extract_transitions(track)?);
    }
    Ok(out)
}
