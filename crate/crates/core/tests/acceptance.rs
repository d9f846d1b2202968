//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails or exceeds its time budget.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fretwise::data::{augment, TrackTransition, Transition};
use fretwise::encoding::{
    decode_probabilities, encode_context_input, encode_diagram, encode_label, encode_label_input, EncodedPair,
};
use fretwise::evaluation::{run_protocol, ProtocolOptions};
use fretwise::metrics::{
    chord_change_ease, is_unplayable, pitch_scores, slot_f1, string_fret_scores, texture, texture_delta,
};
use fretwise::model::{train, Activation, Mlp, Topology, TrainConfig};
use fretwise::suggest::suggest;
use fretwise::{ChordLabel, Diagram, StringState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn d(text: &str) -> Diagram {
    Diagram::parse(text).unwrap()
}

fn label(text: &str) -> ChordLabel {
    ChordLabel::parse(text).unwrap()
}

fn random_diagrams(n: usize, seed: u64) -> Vec<Diagram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| common::random_diagram(&mut rng)).collect()
}

fn encoding_identities() -> Outcome {
    let diagrams = random_diagrams(1000, 1);
    let round_trip_failures = diagrams.iter().filter(|x| decode_probabilities(&encode_diagram(x).0) != **x).count();
    let l = label("G/B");
    let widths = [
        encode_label(&l).to_vec().len(),
        encode_label_input(&l).len(),
        encode_diagram(&diagrams[0]).0.len(),
        encode_context_input(&diagrams[0], &l).len(),
    ];
    outcome(
        round_trip_failures == 0 && widths == [24, 24, 156, 180],
        format!("{round_trip_failures} round-trip failures in 1000; widths {widths:?}"),
    )
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let activations = [Activation::Relu, Activation::Tanh, Activation::Sigmoid];
    let mut worst: f64 = 0.0;
    for net in 0..20 {
        let widths: Vec<usize> = (0..rng.random_range(2..=4)).map(|_| rng.random_range(2..=6)).collect();
        let mut mlp = Mlp::init(&widths, activations[net % 3], &mut rng);
        // zero biases would put dead ReLU layers exactly on the kink
        for layer in &mut mlp.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let batch: Vec<EncodedPair> = (0..3)
            .map(|_| EncodedPair {
                input: (0..widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect(),
                target: (0..widths[widths.len() - 1]).map(|_| rng.random_range(0..2) as f64).collect(),
            })
            .collect();
        let (_, grads) = mlp.loss_and_gradients(&batch);
        let analytic: Vec<f64> = grads.values().copied().collect();
        for (i, a) in analytic.iter().enumerate() {
            let original = *mlp.parameters_mut().nth(i).unwrap();
            *mlp.parameters_mut().nth(i).unwrap() = original + H;
            let plus = mlp.mean_loss(&batch);
            *mlp.parameters_mut().nth(i).unwrap() = original - H;
            let minus = mlp.mean_loss(&batch);
            *mlp.parameters_mut().nth(i).unwrap() = original;
            let numeric = (plus - minus) / (2.0 * H);
            let scale = a.abs().max(numeric.abs());
            // below this magnitude both gradients are rounding noise
            if scale > 1e-7 {
                let rel = (a - numeric).abs() / scale;
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 20 networks"))
}

fn memorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let names = ["C", "Am", "F", "G7", "Dm", "E", "Bb", "F#m7"];
    let transitions: Vec<Transition> = (0..32)
        .map(|_| Transition {
            prev_label: label(names[rng.random_range(0..names.len())]),
            prev_diagram: common::random_diagram(&mut rng),
            next_label: label(names[rng.random_range(0..names.len())]),
            next_diagram: common::random_diagram(&mut rng),
        })
        .collect();
    let pairs: Vec<EncodedPair> = transitions.iter().map(|t| t.encode(Topology::Full)).collect();
    let cfg = TrainConfig { max_epochs: 500, ..TrainConfig::default() };
    let (model, report) = train(Topology::Full, &pairs, &pairs, &cfg).unwrap();
    let (again, _) = train(Topology::Full, &pairs, &pairs, &cfg).unwrap();
    let f1 = transitions
        .iter()
        .map(|t| {
            slot_f1(&suggest(&model, &t.next_label, Some(&t.prev_diagram), 1).unwrap()[0].diagram, &t.next_diagram)
        })
        .sum::<f64>()
        / transitions.len() as f64;
    let deterministic = model.to_bytes() == again.to_bytes();
    outcome(
        f1 >= 0.95 && deterministic && report.epochs.len() <= 500,
        format!("training F1 {f1:.4} after {} epochs; identical reruns: {deterministic}", report.epochs.len()),
    )
}

fn context_advantage() -> Outcome {
    let data = common::context_corpus(500, 11);
    let run = |topology, augment| {
        let opts = ProtocolOptions { topology, config: TrainConfig::default(), augment, split_seed: 1, splits: 4 };
        run_protocol(&data, &opts).unwrap().0
    };
    let baseline = run(Topology::Baseline, false);
    let full = run(Topology::Full, true);
    let gap = full.f1.mean - baseline.f1.mean;
    outcome(
        gap >= 0.20,
        format!(
            "full F1 {:.4} ± {:.4}, baseline F1 {:.4} ± {:.4}, gap {gap:.4}",
            full.f1.mean, full.f1.std, baseline.f1.mean, baseline.f1.std
        ),
    )
}

const OPEN_MIDI: [i32; 6] = [40, 45, 50, 55, 59, 64];
const NOTE_NAMES: [&str; 12] = ["C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];
const ORACLE_NATURES: &[(&str, &[i32])] = &[
    ("", &[0, 4, 7]),
    ("m", &[0, 3, 7]),
    ("5", &[0, 7]),
    ("7", &[0, 4, 7, 10]),
    ("m7", &[0, 3, 7, 10]),
    ("maj7", &[0, 4, 7, 11]),
    ("sus2", &[0, 2, 7]),
    ("sus4", &[0, 5, 7]),
    ("dim", &[0, 3, 6]),
    ("dim7", &[0, 3, 6, 9]),
    ("aug", &[0, 4, 8]),
    ("6", &[0, 4, 7, 9]),
    ("m7b5", &[0, 3, 6, 10]),
    ("add9", &[0, 2, 4, 7]),
    ("9", &[0, 2, 4, 7, 10]),
];

/// Precision, recall and F1 of two pitch-class membership tables.
fn oracle_scores(pred: &[bool], expected: &[bool]) -> (f64, f64, f64) {
    let inter = pred.iter().zip(expected).filter(|(a, b)| **a && **b).count() as f64;
    let np = pred.iter().filter(|x| **x).count() as f64;
    let ne = expected.iter().filter(|x| **x).count() as f64;
    let p = if np == 0.0 { 0.0 } else { inter / np };
    let r = if ne == 0.0 { 0.0 } else { inter / ne };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn frets(x: &Diagram) -> [Option<i32>; 6] {
    std::array::from_fn(|s| match x.string(s) {
        StringState::Muted => None,
        StringState::Fret(f) => Some(f as i32),
    })
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let a = common::random_diagram(&mut rng);

        let root = rng.random_range(0..12);
        let (suffix, intervals) = ORACLE_NATURES[rng.random_range(0..ORACLE_NATURES.len())];
        let bass = rng.random_bool(0.3).then(|| rng.random_range(0..12));
        let text = match bass {
            Some(b) => format!("{}{suffix}/{}", NOTE_NAMES[root], NOTE_NAMES[b]),
            None => format!("{}{suffix}", NOTE_NAMES[root]),
        };
        let mut expected = [false; 12];
        for i in intervals {
            expected[(root + *i as usize) % 12] = true;
        }
        if let Some(b) = bass {
            expected[b] = true;
        }
        let mut sounding = [false; 12];
        for (s, f) in frets(&a).iter().enumerate() {
            if let Some(f) = f {
                sounding[((OPEN_MIDI[s] + f) % 12) as usize] = true;
            }
        }
        let got = pitch_scores(&a, &label(&text));
        if (got.precision, got.recall, got.f1) != oracle_scores(&sounding, &expected) {
            mismatches += 1;
        }

        // reference: a copy of `a` with some strings changed, so overlaps are common
        let mut b_frets = frets(&a);
        for slot in b_frets.iter_mut() {
            if rng.random_bool(0.4) {
                *slot = if rng.random_bool(0.2) { None } else { Some(rng.random_range(0..=24)) };
            }
        }
        let Ok(b) = Diagram::from_frets(b_frets.map(|f| f.map(|v| v as u8))) else { continue };
        let (fa, fb) = (frets(&a), frets(&b));
        let mut pairs_a = vec![false; 6 * 25];
        let mut pairs_b = vec![false; 6 * 25];
        for s in 0..6 {
            if let Some(f) = fa[s] {
                pairs_a[s * 25 + f as usize] = true;
            }
            if let Some(f) = fb[s] {
                pairs_b[s * 25 + f as usize] = true;
            }
        }
        let got = string_fret_scores(&a, &b);
        if (got.precision, got.recall, got.f1) != oracle_scores(&pairs_a, &pairs_b) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 1000 pitch and 1000 string/fret pairs"))
}

/// 10,000 diagrams: strings 0-3 enumerate ten states each, strings 4 and 5
/// are derived from them so spans and distinct-fret counts vary widely.
fn playability_grid() -> Vec<Diagram> {
    const STATES: [Option<u8>; 10] =
        [None, Some(0), Some(1), Some(2), Some(3), Some(4), Some(5), Some(7), Some(9), Some(12)];
    (0..10_000usize)
        .map(|i| {
            let digits = [i % 10, i / 10 % 10, i / 100 % 10, i / 1000 % 10];
            let s4 = (digits[0] + digits[2] + 1) % 10;
            let s5 = (digits[1] + 2 * digits[3] + 3) % 10;
            let states = [digits[0], digits[1], digits[2], digits[3], s4, s5].map(|k| STATES[k]);
            Diagram::from_frets(states).expect("string 4 or 5 always sounds when 0-3 are muted")
        })
        .collect()
}

fn playability() -> Outcome {
    let grid = playability_grid();
    let mut must_flag = 0;
    let mut missed = Vec::new();
    for x in &grid {
        let fretted: Vec<i32> = frets(x).iter().flatten().copied().filter(|f| *f > 0).collect();
        let span = match (fretted.iter().min(), fretted.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0,
        };
        let mut distinct = fretted.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if span >= 5 || distinct.len() > 4 {
            must_flag += 1;
            if !is_unplayable(x) {
                missed.push(x.to_string());
            }
        }
    }
    let known = ["x.0.2.2.1.0", "5.7.7.5.5.5"];
    let known_ok = known.iter().all(|t| !is_unplayable(&d(t)));
    outcome(
        missed.is_empty() && known_ok,
        format!(
            "{} grid diagrams, {must_flag} must be flagged, {} missed{}; {:?} playable: {known_ok}",
            grid.len(),
            missed.len(),
            missed.first().map(|m| format!(" (e.g. {m})")).unwrap_or_default(),
            known
        ),
    )
}

fn chord_change() -> Outcome {
    let identity_failures =
        random_diagrams(10_000, 5).iter().chain(&playability_grid()).filter(|x| chord_change_ease(x, x) != 1.0).count();
    let mut sequences_ok = true;
    let mut shown = String::new();
    for shape in ["1.3.3.2.1.1", "x.1.3.3.3.1", "1.3.3.1.1.1", "x.1.3.3.2.1", "5.7.7.5.5.5"] {
        let base = d(shape);
        let ease: Vec<f64> = (1..=7).map(|k| chord_change_ease(&base, &base.shift(k).unwrap())).collect();
        sequences_ok &= ease.windows(2).all(|w| w[1] <= w[0]);
        if shown.is_empty() {
            shown = format!("{shape}: {:?}", ease.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>());
        }
    }
    outcome(
        identity_failures == 0 && sequences_ok,
        format!("CC(d,d)=1 failures: {identity_failures}; non-increasing over offsets 1..7: {sequences_ok}; {shown}"),
    )
}

fn texture_bounds() -> Outcome {
    let diagrams = random_diagrams(10_000, 6);
    let out_of_range = diagrams.iter().filter(|x| texture(x).values().iter().any(|v| !(0.0..=1.0).contains(v))).count();
    let mut asymmetric = 0;
    let mut nonzero_self = 0;
    for pair in diagrams.windows(2) {
        if texture_delta(&pair[0], &pair[1]) != texture_delta(&pair[1], &pair[0]) {
            asymmetric += 1;
        }
        if texture_delta(&pair[0], &pair[0]).values() != [0.0; 4] {
            nonzero_self += 1;
        }
    }
    outcome(
        out_of_range + asymmetric + nonzero_self == 0,
        format!("{out_of_range} out of [0,1], {asymmetric} asymmetric deltas, {nonzero_self} nonzero self-deltas"),
    )
}

fn augmentation() -> Outcome {
    let shapes = [
        ("A", "5.7.7.6.5.5"),
        ("Am", "5.7.7.5.5.5"),
        ("D", "x.5.7.7.7.5"),
        ("Dm", "x.5.7.7.6.5"),
        ("A#", "6.8.8.7.6.6"),
        ("D#", "x.6.8.8.8.6"),
        ("B5", "7.x.x.x.x.x"),
        ("C", "8.x.x.x.x.x"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let corpus: Vec<TrackTransition> = (0..40)
        .map(|i| {
            let (pl, pd) = shapes[rng.random_range(0..shapes.len())];
            let (nl, nd) = shapes[rng.random_range(0..shapes.len())];
            TrackTransition {
                track_id: format!("t{i}"),
                transition: Transition {
                    prev_label: label(pl),
                    prev_diagram: d(pd),
                    next_label: label(nl),
                    next_diagram: d(nd),
                },
            }
        })
        .collect();

    let mut inconsistent = 0;
    for tt in &corpus {
        let t = &tt.transition;
        let copies = augment(std::slice::from_ref(tt));
        let lowest = t.prev_diagram.min_fretted().min(t.next_diagram.min_fretted()).unwrap() as i32;
        let highest = t.prev_diagram.max_fretted().max(t.next_diagram.max_fretted()).unwrap() as i32;
        let offsets: Vec<i32> = (1 - lowest..=-1).rev().chain(1..=15 - highest).collect();
        if copies[0] != *tt || copies.len() != offsets.len() + 1 {
            inconsistent += 1;
            continue;
        }
        for (copy, offset) in copies[1..].iter().zip(&offsets) {
            let c = &copy.transition;
            let shifted = |x: &Diagram| frets(x).map(|f| f.map(|v| v + offset));
            let consistent = c.prev_label == t.prev_label.transpose(*offset)
                && c.next_label == t.next_label.transpose(*offset)
                && frets(&c.prev_diagram) == shifted(&t.prev_diagram)
                && frets(&c.next_diagram) == shifted(&t.next_diagram)
                && pitch_scores(&c.next_diagram, &c.next_label) == pitch_scores(&t.next_diagram, &t.next_label)
                && pitch_scores(&c.prev_diagram, &c.prev_label) == pitch_scores(&t.prev_diagram, &t.prev_label);
            if !consistent {
                inconsistent += 1;
            }
        }
    }
    let ratio = augment(&corpus).len() as f64 / corpus.len() as f64;
    outcome(
        inconsistent == 0 && ratio >= 3.0,
        format!("{inconsistent} inconsistent copies; augmented set is {ratio:.2}x the original"),
    )
}

fn fretwise(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fretwise")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn cli_run(dir: &Path, data: &str, tag: &str) -> Result<[Vec<u8>; 4], String> {
    let p = |name: &str| dir.join(format!("{tag}-{name}")).to_str().unwrap().to_string();
    let (model, report, eval) = (p("model.bin"), p("train.json"), p("eval.json"));
    fretwise(&[
        "train",
        "--data",
        data,
        "--topology",
        "full",
        "--out",
        &model,
        "--report",
        &report,
        "--split-seed",
        "3",
    ])?;
    let text = fretwise(&["eval", "--model", &model, "--data", data])?;
    fretwise(&["eval", "--model", &model, "--data", data, "--splits", "2", "--format", "json", "--out", &eval])?;
    let read = |path: &str| std::fs::read(path).map_err(|e| e.to_string());
    Ok([read(&model)?, read(&report)?, text, read(&eval)?])
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let tracks = dir.path().join("tracks.jsonl");
    let lines: Vec<String> = common::context_tracks(120, 8).iter().map(|t| serde_json::to_string(t).unwrap()).collect();
    std::fs::write(&tracks, lines.join("\n") + "\n").unwrap();
    let data = dir.path().join("transitions.jsonl");
    let (tracks, data) = (tracks.to_str().unwrap(), data.to_str().unwrap());
    if let Err(e) = fretwise(&["ingest", "--tracks", tracks, "--out", data]) {
        return outcome(false, format!("ingest failed: {e}"));
    }
    match (cli_run(dir.path(), data, "a"), cli_run(dir.path(), data, "b")) {
        (Ok(a), Ok(b)) => {
            let names = ["model file", "train report", "eval report", "split eval report"];
            let differing: Vec<&str> =
                names.iter().zip(a.iter().zip(&b)).filter(|(_, (x, y))| x != y).map(|(n, _)| *n).collect();
            let sizes: Vec<usize> = a.iter().map(Vec::len).collect();
            outcome(
                differing.is_empty(),
                if differing.is_empty() {
                    format!("identical outputs across two runs (bytes: {sizes:?})")
                } else {
                    format!("outputs differ: {differing:?}")
                },
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("command failed: {e}")),
    }
}

/// Name, time budget and check.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("encoding identities", Some(Duration::from_secs(1)), encoding_identities),
        ("gradient check", Some(Duration::from_secs(10)), gradient_check),
        ("memorization", Some(Duration::from_secs(60)), memorization),
        ("context advantage", Some(Duration::from_secs(300)), context_advantage),
        ("metric oracles", Some(Duration::from_secs(5)), metric_oracles),
        ("playability behavior", Some(Duration::from_secs(10)), playability),
        ("chord-change ease", Some(Duration::from_secs(1)), chord_change),
        ("texture bounds and deltas", Some(Duration::from_secs(5)), texture_bounds),
        ("augmentation correctness", Some(Duration::from_secs(5)), augmentation),
        ("CLI determinism", None, cli_determinism),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let passed = result.passed && in_time;
        if !passed {
            failures += 1;
        }
        let limit = budget.map(|b| format!(" / limit {:.0} s", b.as_secs_f64())).unwrap_or_default();
        println!(
            "{} {name}: {} [{:.2} s{limit}]{}",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { " over time budget" }
        );
    }
    println!("{} of {} criteria passed", 10 - failures, 10);
    if failures > 0 {
        std::process::exit(1);
    }
}
