//! Six-string chord diagrams, the dotted fingering notation, pitch mapping
//! and a greedy finger assignment used by the playability metrics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chords::PitchClass;

pub const STRING_COUNT: usize = 6;
/// Highest playable fret; fret 0 is the open string.
pub const MAX_FRET: u8 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagramError {
    #[error("expected 6 dot-separated strings, found {0}")]
    WrongStringCount(usize),
    #[error("invalid fret token {0:?} (expected x or 0..=24)")]
    FretOutOfRange(String),
    #[error("diagram has no sounding string")]
    AllMuted,
    #[error("diagram with open strings cannot be shifted")]
    OpenStringUnshiftable,
}

impl DiagramError {
    pub fn code(&self) -> &'static str {
        match self {
            DiagramError::WrongStringCount(_) => "WrongStringCount",
            DiagramError::FretOutOfRange(_) => "FretOutOfRange",
            DiagramError::AllMuted => "AllMuted",
            DiagramError::OpenStringUnshiftable => "OpenStringUnshiftable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StringState {
    Muted,
    Fret(u8),
}

impl StringState {
    pub fn fret(self) -> Option<u8> {
        match self {
            StringState::Muted => None,
            StringState::Fret(f) => Some(f),
        }
    }
}

/// A chord diagram. Index 0 is the low E string, index 5 the high E string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagram([StringState; STRING_COUNT]);

impl Diagram {
    /// Builds a diagram, checking fret range and that something sounds.
    pub fn new(strings: [StringState; STRING_COUNT]) -> Result<Self, DiagramError> {
        for s in strings {
            if let StringState::Fret(f) = s {
                if f > MAX_FRET {
                    return Err(DiagramError::FretOutOfRange(f.to_string()));
                }
            }
        }
        if strings.iter().all(|s| *s == StringState::Muted) {
            return Err(DiagramError::AllMuted);
        }
        Ok(Diagram(strings))
    }

    /// Convenience constructor: `None` is a muted string.
    pub fn from_frets(frets: [Option<u8>; STRING_COUNT]) -> Result<Self, DiagramError> {
        Diagram::new(frets.map(|f| f.map_or(StringState::Muted, StringState::Fret)))
    }

    pub fn parse(text: &str) -> Result<Self, DiagramError> {
        let tokens: Vec<&str> = text.trim().split('.').collect();
        if tokens.len() != STRING_COUNT {
            return Err(DiagramError::WrongStringCount(tokens.len()));
        }
        let mut strings = [StringState::Muted; STRING_COUNT];
        for (slot, token) in strings.iter_mut().zip(&tokens) {
            *slot = match *token {
                "x" | "X" => StringState::Muted,
                t => match t.parse::<u8>() {
                    Ok(f) if f <= MAX_FRET && t.bytes().all(|b| b.is_ascii_digit()) => StringState::Fret(f),
                    _ => return Err(DiagramError::FretOutOfRange(t.to_string())),
                },
            };
        }
        Diagram::new(strings)
    }

    pub fn strings(&self) -> &[StringState; STRING_COUNT] {
        &self.0
    }

    pub fn string(&self, index: usize) -> StringState {
        self.0[index]
    }

    /// `(string, fret)` for every non-muted string, open strings included.
    pub fn sounding(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.0.iter().enumerate().filter_map(|(i, s)| s.fret().map(|f| (i, f)))
    }

    /// `(string, fret)` for strings pressed at fret 1 or above.
    pub fn fretted(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.sounding().filter(|&(_, f)| f >= 1)
    }

    pub fn muted_count(&self) -> usize {
        self.0.iter().filter(|s| **s == StringState::Muted).count()
    }

    pub fn open_count(&self) -> usize {
        self.0.iter().filter(|s| **s == StringState::Fret(0)).count()
    }

    pub fn has_open_string(&self) -> bool {
        self.open_count() > 0
    }

    pub fn min_fretted(&self) -> Option<u8> {
        self.fretted().map(|(_, f)| f).min()
    }

    pub fn max_fretted(&self) -> Option<u8> {
        self.fretted().map(|(_, f)| f).max()
    }

    /// Fret under the index finger: the lowest fretted position, 0 when
    /// nothing is fretted.
    pub fn index_fret(&self) -> u8 {
        self.min_fretted().unwrap_or(0)
    }

    pub fn sounding_pitches(&self, tuning: &Tuning) -> Vec<u8> {
        self.sounding().map(|(i, f)| tuning.open_midi[i] + f).collect()
    }

    pub fn pitch_classes(&self, tuning: &Tuning) -> BTreeSet<PitchClass> {
        self.sounding_pitches(tuning).into_iter().map(|p| PitchClass::new(p as i32)).collect()
    }

    /// Moves every fretted string by `offset` frets. Diagrams with open
    /// strings never shift, in either direction.
    pub fn shift(&self, offset: i32) -> Result<Self, DiagramError> {
        if self.has_open_string() {
            return Err(DiagramError::OpenStringUnshiftable);
        }
        let mut strings = self.0;
        for s in strings.iter_mut() {
            if let StringState::Fret(f) = *s {
                let moved = f as i32 + offset;
                if !(1..=MAX_FRET as i32).contains(&moved) {
                    return Err(DiagramError::FretOutOfRange(moved.to_string()));
                }
                *s = StringState::Fret(moved as u8);
            }
        }
        Ok(Diagram(strings))
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            match s {
                StringState::Muted => f.write_str("x")?,
                StringState::Fret(n) => write!(f, "{n}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Diagram {
    type Err = DiagramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Diagram::parse(s)
    }
}

pub fn parse_fingering(text: &str) -> Result<Diagram, DiagramError> {
    Diagram::parse(text)
}

pub fn format_fingering(d: &Diagram) -> String {
    d.to_string()
}

/// Open-string MIDI pitches, low string first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tuning {
    pub open_midi: [u8; STRING_COUNT],
}

impl Tuning {
    pub const STANDARD: Tuning = Tuning { open_midi: [40, 45, 50, 55, 59, 64] };
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning::STANDARD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerPlacement {
    pub finger: u8,
    pub string: usize,
    pub fret: u8,
}

/// Index-finger barré from `first_string` up to `last_string` at `fret`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Barre {
    pub fret: u8,
    pub first_string: usize,
    pub last_string: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingering {
    /// One entry per fretted string not covered by the barré.
    pub assignments: Vec<FingerPlacement>,
    pub barre: Option<Barre>,
}

impl Fingering {
    /// Where each finger sits: the barré counts as finger 1 on its lowest
    /// string.
    pub fn finger_positions(&self) -> Vec<FingerPlacement> {
        let mut out = Vec::with_capacity(self.assignments.len() + 1);
        if let Some(b) = self.barre {
            out.push(FingerPlacement { finger: 1, string: b.first_string, fret: b.fret });
        }
        out.extend(self.assignments.iter().copied());
        out
    }

    pub fn highest_finger(&self) -> u8 {
        self.finger_positions().iter().map(|p| p.finger).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FingeringResult {
    Fingered(Fingering),
    /// More than four fingers would be needed.
    Unfingerable,
}

/// Greedy assignment with no limit on the number of fingers. The result is
/// a valid hand position only when `highest_finger() <= 4`.
pub fn greedy_fingering(d: &Diagram) -> Fingering {
    let fretted: Vec<(usize, u8)> = d.fretted().collect();
    let Some(base) = fretted.iter().map(|&(_, f)| f).min() else {
        return Fingering { assignments: Vec::new(), barre: None };
    };

    let at_base: Vec<usize> = fretted.iter().filter(|&&(_, f)| f == base).map(|&(s, _)| s).collect();
    let barre = if at_base.len() >= 2 || fretted.len() > 4 {
        let first = at_base[0];
        // an open string under the bar would be stopped by it
        let blocked = (first..STRING_COUNT).any(|s| d.string(s) == StringState::Fret(0));
        (!blocked).then_some(Barre { fret: base, first_string: first, last_string: STRING_COUNT - 1 })
    } else {
        None
    };

    let mut remaining: Vec<(usize, u8)> = fretted
        .into_iter()
        .filter(|&(s, f)| match barre {
            Some(b) => !(f == b.fret && s >= b.first_string),
            None => true,
        })
        .collect();
    remaining.sort_by_key(|&(s, f)| (f, s));

    let mut next_finger: u8 = if barre.is_some() { 2 } else { 1 };
    let mut assignments = Vec::with_capacity(remaining.len());
    let count = remaining.len();
    for (i, (string, fret)) in remaining.into_iter().enumerate() {
        // a finger naturally rests one fret above the previous one, but must
        // leave enough fingers for the positions still to come
        let natural = 1 + fret - base;
        let reserve = 4u8.saturating_sub((count - i - 1) as u8);
        let finger = next_finger.max(natural.min(reserve));
        assignments.push(FingerPlacement { finger, string, fret });
        next_finger = finger + 1;
    }
    Fingering { assignments, barre }
}

/// Deterministic finger assignment: index barré at the lowest fret when two
/// or more strings share it (or more than four strings are fretted), then
/// fingers 2..4 in ascending (fret, string) order.
pub fn assign_fingering(d: &Diagram) -> FingeringResult {
    let fingering = greedy_fingering(d);
    if fingering.highest_finger() > 4 {
        FingeringResult::Unfingerable
    } else {
        FingeringResult::Fingered(fingering)
    }
}
