//! Chord labels: parsing, pitch-class content and canonical formatting.
//!
//! Grammar: `Root Nature? ("/" Bass)?` where `Root` and `Bass` are an
//! uppercase letter `A`..`G` followed by an optional `#` or `b`. Enharmonic
//! spellings collapse to one pitch class; formatting always uses sharps.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Error raised when a chord label cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("malformed root note in chord label {0:?}")]
    MalformedRoot(String),
    #[error("unknown chord nature {nature:?} in chord label {label:?}")]
    UnknownNature { label: String, nature: String },
    #[error("malformed bass note in chord label {0:?}")]
    MalformedBass(String),
}

impl LabelError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            LabelError::MalformedRoot(_) => "MalformedRoot",
            LabelError::UnknownNature { .. } => "UnknownNature",
            LabelError::MalformedBass(_) => "MalformedBass",
        }
    }
}

/// A pitch class in twelve-tone equal temperament, `C = 0` through `B = 11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PitchClass(u8);

const SHARP_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

impl PitchClass {
    /// Builds a pitch class from any integer, reducing it modulo 12.
    pub fn new(value: i32) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        PitchClass::new(self.0 as i32 + semitones)
    }

    /// Sharp spelling of this pitch class.
    pub fn name(self) -> &'static str {
        SHARP_NAMES[self.0 as usize]
    }

    /// Parses a note name (`A`..`G` with an optional `#` or `b`) from the
    /// start of `text`, returning the pitch class and the number of bytes read.
    fn parse_prefix(text: &str) -> Option<(PitchClass, usize)> {
        let mut chars = text.chars();
        let natural = match chars.next()? {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return None,
        };
        match chars.next() {
            Some('#') => Some((PitchClass::new(natural + 1), 2)),
            Some('b') => Some((PitchClass::new(natural - 1), 2)),
            _ => Some((PitchClass::new(natural), 1)),
        }
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Chord quality as a set of semitone offsets above the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChordNature {
    name: &'static str,
    intervals: &'static [u8],
}

struct NatureEntry {
    canonical: &'static str,
    aliases: &'static [&'static str],
    intervals: &'static [u8],
}

// Canonical token, accepted aliases, intervals (root first).
const NATURES: &[NatureEntry] = &[
    NatureEntry { canonical: "maj", aliases: &["", "M", "maj", "major"], intervals: &[0, 4, 7] },
    NatureEntry { canonical: "m", aliases: &["m", "min", "-"], intervals: &[0, 3, 7] },
    NatureEntry { canonical: "5", aliases: &["5"], intervals: &[0, 7] },
    NatureEntry { canonical: "7", aliases: &["7", "dom7"], intervals: &[0, 4, 7, 10] },
    NatureEntry { canonical: "m7", aliases: &["m7", "min7", "-7"], intervals: &[0, 3, 7, 10] },
    NatureEntry { canonical: "maj7", aliases: &["maj7", "7M", "M7", "Maj7"], intervals: &[0, 4, 7, 11] },
    NatureEntry { canonical: "mmaj7", aliases: &["mmaj7", "m7M", "mM7"], intervals: &[0, 3, 7, 11] },
    NatureEntry { canonical: "sus2", aliases: &["sus2"], intervals: &[0, 2, 7] },
    NatureEntry { canonical: "sus4", aliases: &["sus4", "sus"], intervals: &[0, 5, 7] },
    NatureEntry { canonical: "dim", aliases: &["dim", "o"], intervals: &[0, 3, 6] },
    NatureEntry { canonical: "dim7", aliases: &["dim7", "o7"], intervals: &[0, 3, 6, 9] },
    NatureEntry { canonical: "aug", aliases: &["aug", "+"], intervals: &[0, 4, 8] },
    NatureEntry { canonical: "6", aliases: &["6"], intervals: &[0, 4, 7, 9] },
    NatureEntry { canonical: "m6", aliases: &["m6"], intervals: &[0, 3, 7, 9] },
    NatureEntry { canonical: "add9", aliases: &["add9", "add2"], intervals: &[0, 4, 7, 2] },
    NatureEntry { canonical: "madd9", aliases: &["madd9"], intervals: &[0, 3, 7, 2] },
    NatureEntry { canonical: "9", aliases: &["9"], intervals: &[0, 4, 7, 10, 2] },
    NatureEntry { canonical: "m9", aliases: &["m9"], intervals: &[0, 3, 7, 10, 2] },
    NatureEntry { canonical: "maj9", aliases: &["maj9", "9M", "M9"], intervals: &[0, 4, 7, 11, 2] },
    NatureEntry { canonical: "11", aliases: &["11"], intervals: &[0, 4, 7, 10, 2, 5] },
    NatureEntry { canonical: "13", aliases: &["13"], intervals: &[0, 4, 7, 10, 2, 5, 9] },
    NatureEntry { canonical: "7sus4", aliases: &["7sus4", "7sus"], intervals: &[0, 5, 7, 10] },
    NatureEntry { canonical: "m7b5", aliases: &["m7b5", "ø"], intervals: &[0, 3, 6, 10] },
];

impl ChordNature {
    /// Looks up a nature token, accepting any known alias.
    pub fn from_token(token: &str) -> Option<Self> {
        NATURES
            .iter()
            .find(|e| e.aliases.contains(&token))
            .map(|e| ChordNature { name: e.canonical, intervals: e.intervals })
    }

    pub fn major() -> Self {
        ChordNature::from_token("").expect("major is in the nature table")
    }

    /// Canonical token, e.g. `"maj"`, `"m"`, `"maj7"`.
    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Semitone offsets above the root; always contains 0.
    pub fn intervals(&self) -> &'static [u8] {
        self.intervals
    }

    /// Suffix used when formatting a label (major has an empty suffix).
    pub fn suffix(&self) -> &'static str {
        if self.name == "maj" {
            ""
        } else {
            self.name
        }
    }

    /// Every canonical nature known to the parser.
    pub fn all() -> impl Iterator<Item = ChordNature> {
        NATURES.iter().map(|e| ChordNature { name: e.canonical, intervals: e.intervals })
    }
}

/// A parsed chord label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChordLabel {
    pub root: PitchClass,
    pub nature: ChordNature,
    pub bass: PitchClass,
}

impl ChordLabel {
    pub fn new(root: PitchClass, nature: ChordNature, bass: PitchClass) -> Self {
        ChordLabel { root, nature, bass }
    }

    /// Parses a chord label such as `Am`, `G/B` or `C#maj7`.
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        let (root, used) = PitchClass::parse_prefix(text).ok_or_else(|| LabelError::MalformedRoot(text.to_string()))?;
        let rest = &text[used..];
        let (nature_token, bass_token) = match rest.split_once('/') {
            Some((n, b)) => (n, Some(b)),
            None => (rest, None),
        };
        let nature = ChordNature::from_token(nature_token)
            .ok_or_else(|| LabelError::UnknownNature { label: text.to_string(), nature: nature_token.to_string() })?;
        let bass = match bass_token {
            None => root,
            Some(b) => match PitchClass::parse_prefix(b) {
                Some((pc, n)) if n == b.len() => pc,
                _ => return Err(LabelError::MalformedBass(text.to_string())),
            },
        };
        Ok(ChordLabel { root, nature, bass })
    }

    /// Pitch classes of the chord: root plus nature intervals, plus the bass.
    pub fn pitch_classes(&self) -> BTreeSet<PitchClass> {
        let mut set: BTreeSet<PitchClass> =
            self.nature.intervals.iter().map(|&i| self.root.transpose(i as i32)).collect();
        set.insert(self.bass);
        set
    }

    /// Moves root and bass by `semitones`, keeping the nature.
    pub fn transpose(&self, semitones: i32) -> Self {
        ChordLabel { root: self.root.transpose(semitones), nature: self.nature, bass: self.bass.transpose(semitones) }
    }

    pub fn is_slash(&self) -> bool {
        self.bass != self.root
    }
}

impl fmt::Display for ChordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.root, self.nature.suffix())?;
        if self.is_slash() {
            write!(f, "/{}", self.bass)?;
        }
        Ok(())
    }
}

impl FromStr for ChordLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChordLabel::parse(s)
    }
}

pub fn parse_label(text: &str) -> Result<ChordLabel, LabelError> {
    ChordLabel::parse(text)
}

pub fn format_label(label: &ChordLabel) -> String {
    label.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcs(values: &[i32]) -> BTreeSet<PitchClass> {
        values.iter().map(|&v| PitchClass::new(v)).collect()
    }

    #[test]
    fn parses_reference_labels() {
        let am = parse_label("Am").unwrap();
        assert_eq!(am.root.value(), 9);
        assert_eq!(am.nature.name(), "m");
        assert_eq!(am.nature.intervals(), &[0, 3, 7]);
        assert_eq!(am.bass.value(), 9);

        let c = parse_label("C").unwrap();
        assert_eq!((c.root.value(), c.nature.name(), c.bass.value()), (0, "maj", 0));

        let gb = parse_label("G/B").unwrap();
        assert_eq!((gb.root.value(), gb.nature.name(), gb.bass.value()), (7, "maj", 11));

        let asus4 = parse_label("Asus4").unwrap();
        assert_eq!((asus4.root.value(), asus4.nature.name()), (9, "sus4"));
        assert_eq!(asus4.nature.intervals(), &[0, 5, 7]);
    }

    #[test]
    fn pitch_class_content() {
        assert_eq!(parse_label("Asus4").unwrap().pitch_classes(), pcs(&[9, 2, 4]));
        assert_eq!(parse_label("G").unwrap().pitch_classes(), pcs(&[7, 11, 2]));
        assert_eq!(parse_label("G5").unwrap().pitch_classes(), pcs(&[7, 2]));
        // slash bass outside the nature is added
        assert_eq!(parse_label("C/F#").unwrap().pitch_classes(), pcs(&[0, 4, 7, 6]));
        assert_eq!(parse_label("G9").unwrap().pitch_classes(), pcs(&[7, 11, 2, 5, 9]));
    }

    #[test]
    fn formats_canonically() {
        let am = ChordLabel::new(PitchClass::new(9), ChordNature::from_token("m").unwrap(), PitchClass::new(9));
        assert_eq!(format_label(&am), "Am");
        let gb = ChordLabel::new(PitchClass::new(7), ChordNature::major(), PitchClass::new(11));
        assert_eq!(format_label(&gb), "G/B");
        let csharp = ChordLabel::new(PitchClass::new(1), ChordNature::from_token("7M").unwrap(), PitchClass::new(1));
        assert_eq!(format_label(&csharp), "C#maj7");
    }

    #[test]
    fn aliases_and_enharmonics_merge() {
        assert_eq!(parse_label("C7M").unwrap(), parse_label("Cmaj7").unwrap());
        assert_eq!(parse_label("CM7").unwrap(), parse_label("Cmaj7").unwrap());
        assert_eq!(parse_label("Db").unwrap(), parse_label("C#").unwrap());
        assert_eq!(parse_label("Cb").unwrap().root.value(), 11);
        assert_eq!(parse_label("E#").unwrap().root.value(), 5);
    }

    #[test]
    fn rejects_malformed_labels() {
        assert_eq!(parse_label("Zx").unwrap_err().code(), "MalformedRoot");
        assert_eq!(parse_label("").unwrap_err().code(), "MalformedRoot");
        assert_eq!(parse_label("am").unwrap_err().code(), "MalformedRoot");
        assert_eq!(parse_label("Aqux").unwrap_err().code(), "UnknownNature");
        assert_eq!(parse_label("G/H").unwrap_err().code(), "MalformedBass");
        assert_eq!(parse_label("G/").unwrap_err().code(), "MalformedBass");
        assert_eq!(parse_label("G/Bm").unwrap_err().code(), "MalformedBass");
    }

    fn any_label() -> impl Strategy<Value = ChordLabel> {
        let natures: Vec<ChordNature> = ChordNature::all().collect();
        (0..12i32, 0..natures.len(), prop::option::of(0..12i32)).prop_map(move |(r, n, b)| {
            let root = PitchClass::new(r);
            ChordLabel::new(root, natures[n], b.map(PitchClass::new).unwrap_or(root))
        })
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(label in any_label()) {
            prop_assert_eq!(parse_label(&format_label(&label)).unwrap(), label);
        }

        #[test]
        fn transposition_is_a_homomorphism(label in any_label(), k in -24i32..24) {
            let shifted: BTreeSet<_> = label.pitch_classes().iter().map(|p| p.transpose(k)).collect();
            prop_assert_eq!(label.transpose(k).pitch_classes(), shifted);
        }

        #[test]
        fn pitch_class_count_bounded(label in any_label()) {
            let n = label.pitch_classes().len();
            prop_assert!((1..=12).contains(&n));
            prop_assert!(label.pitch_classes().contains(&label.root));
        }
    }
}
