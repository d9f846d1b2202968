//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use fretwise::data::{ChordEvent, TrackEvents, TrackTransition, Transition};
use fretwise::{ChordLabel, Diagram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (label, open-position shape, barré shape at fret 5 or above)
pub const SHAPES: &[(&str, &str, &str)] = &[
    ("C", "x.3.2.0.1.0", "8.10.10.9.8.8"),
    ("A", "x.0.2.2.2.0", "5.7.7.6.5.5"),
    ("G", "3.2.0.0.0.3", "x.10.12.12.12.10"),
    ("E", "0.2.2.1.0.0", "x.7.9.9.9.7"),
    ("D", "x.x.0.2.3.2", "x.5.7.7.7.5"),
    ("Am", "x.0.2.2.1.0", "5.7.7.5.5.5"),
    ("Em", "0.2.2.0.0.0", "x.7.9.9.8.7"),
    ("Dm", "x.x.0.2.3.1", "x.5.7.7.6.5"),
];

fn chord(i: usize, barre: bool) -> (ChordLabel, Diagram) {
    let (label, open, high) = SHAPES[i];
    let shape = if barre { high } else { open };
    (ChordLabel::parse(label).unwrap(), Diagram::parse(shape).unwrap())
}

/// Transitions where the next diagram stays in the fretboard area of the
/// previous one: open shapes follow open shapes, barré shapes follow
/// barré shapes.
pub fn context_corpus(n: usize, seed: u64) -> Vec<TrackTransition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let barre = rng.random_bool(0.5);
            let (prev_label, prev_diagram) = chord(rng.random_range(0..SHAPES.len()), barre);
            let (next_label, next_diagram) = chord(rng.random_range(0..SHAPES.len()), barre);
            TrackTransition {
                track_id: format!("track-{i:04}"),
                transition: Transition { prev_label, prev_diagram, next_label, next_diagram },
            }
        })
        .collect()
}

/// The same corpus expressed as one two-event track per transition.
pub fn context_tracks(n: usize, seed: u64) -> Vec<TrackEvents> {
    context_corpus(n, seed)
        .into_iter()
        .map(|tt| {
            let t = tt.transition;
            TrackEvents {
                track_id: tt.track_id,
                events: vec![
                    ChordEvent { bar: 0, label: t.prev_label.to_string(), fingering: t.prev_diagram.to_string() },
                    ChordEvent { bar: 1, label: t.next_label.to_string(), fingering: t.next_diagram.to_string() },
                ],
            }
        })
        .collect()
}

/// Uniformly random valid diagram; each string is muted with probability 1/6.
pub fn random_diagram(rng: &mut ChaCha8Rng) -> Diagram {
    loop {
        let frets =
            std::array::from_fn(|_| if rng.random_range(0..6) == 0 { None } else { Some(rng.random_range(0..=24u8)) });
        if let Ok(d) = Diagram::from_frets(frets) {
            return d;
        }
    }
}
