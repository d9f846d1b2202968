//! Command-line workflow: ingest, stats, augment, train, eval, suggest,
//! continue and serve.
//!
//! Exit codes: 0 on success, 1 on data or runtime errors, 2 on usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::chords::ChordLabel;
use crate::data::{self, SplitSpec, TrackTransition};
use crate::evaluation::{self, EvaluationReport, MeanStd, PlayabilitySummary, ProtocolOptions};
use crate::fretboard::Diagram;
use crate::model::{Activation, SuggestionModel, Topology, TrainConfig};
use crate::server::{self, ServerOptions};
use crate::suggest::{continue_sequence, suggest, Annotations};

#[derive(Debug, Parser)]
#[command(name = "fretwise", version, about = "Context-aware guitar chord diagram suggestion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract chord transitions from a tracks JSONL file.
    ///
    /// Input lines: {"track_id", "events": [{"bar", "label", "fingering"}]}.
    /// Output lines: {"track_id", "prev_label", "prev_fingering", "next_label", "next_fingering"}.
    Ingest {
        #[arg(long)]
        tracks: PathBuf,
        /// Transitions JSONL output; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics: root and nature histograms, diagrams per label.
    Stats {
        /// Transitions JSONL.
        #[arg(long)]
        data: PathBuf,
        /// Number of natures listed in the histogram.
        #[arg(long, default_value_t = 15)]
        top_natures: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Append transposed copies of every transition without open strings.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on one split and write the model file.
    Train(TrainArgs),
    /// Evaluate over train/validation/test splits.
    ///
    /// With --model and no --splits, the model is evaluated on the test part
    /// of the split it was trained on. With --splits, one model per split is
    /// retrained using the topology and configuration stored in --model, or
    /// the --topology and training flags when no model is given.
    Eval(EvalArgs),
    /// Top-k diagrams for a chord label.
    Suggest {
        #[arg(long)]
        model: PathBuf,
        /// Chord label, e.g. "Am", "G/B", "F#m7b5".
        #[arg(long)]
        label: String,
        /// Previous diagram, e.g. "x.0.2.2.1.0"; required by the full model.
        #[arg(long)]
        prev: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Chain top-1 suggestions over a label sequence.
    Continue {
        #[arg(long)]
        model: PathBuf,
        /// Labels separated by whitespace, e.g. "Am F C G".
        #[arg(long)]
        labels: String,
        /// Diagram of the first label.
        #[arg(long)]
        first: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Serve the HTTP API (and optionally the web UI).
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory with the built web UI, served under "/".
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Allow cross-origin requests from any origin.
        #[arg(long)]
        cors_permissive: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Baseline,
    Full,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Baseline => Topology::Baseline,
            TopologyArg::Full => Topology::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
    Sigmoid,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

/// Training hyperparameters; unset flags keep the defaults.
#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Seed for weight initialization and batch shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Mini-batch size; 0 trains on the full batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<u32>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub patience: Option<u32>,
    #[arg(long, value_enum)]
    pub hidden_activation: Option<ActivationArg>,
    /// Force augmentation of the training part (default: on for full, off for baseline).
    #[arg(long, conflicts_with = "no_augment")]
    pub augment: bool,
    #[arg(long)]
    pub no_augment: bool,
}

impl TrainFlags {
    fn config(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            seed: self.seed.unwrap_or(base.seed),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            early_stop_patience: self.patience.unwrap_or(base.early_stop_patience),
            hidden_activation: self.hidden_activation.map(Into::into).unwrap_or(base.hidden_activation),
            ..base
        }
    }

    fn augment_for(&self, topology: Topology, default: Option<bool>) -> bool {
        if self.augment {
            true
        } else if self.no_augment {
            false
        } else {
            default.unwrap_or(topology == Topology::Full)
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Transitions JSONL.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub topology: TopologyArg,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report (JSON) to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub split_index: u32,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transitions JSONL.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, required_unless_present = "topology")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "model")]
    pub topology: Option<TopologyArg>,
    /// Number of splits to retrain and evaluate.
    #[arg(long)]
    pub splits: Option<u32>,
    /// Split seed; defaults to the one recorded in the model, else 0.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{}: no such file", path.display());
    }
    Ok(())
}

fn require_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("{}: directory does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

fn require_outputs(paths: &[Option<&Path>]) -> anyhow::Result<()> {
    paths.iter().flatten().try_for_each(|p| require_parent(p))
}

fn load_transitions(path: &Path) -> anyhow::Result<Vec<TrackTransition>> {
    let file = File::open(path).with_context(|| format!("{}", path.display()))?;
    data::read_transitions(BufReader::new(file)).with_context(|| format!("{}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<SuggestionModel> {
    SuggestionModel::load(path).with_context(|| format!("{}", path.display()))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("{}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn write_transitions(out: Option<&Path>, transitions: &[TrackTransition]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    data::write_transitions(&mut buf, transitions)?;
    write_output(out, &buf)
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest { tracks, out } => {
            require_file(&tracks)?;
            require_outputs(&[out.as_deref()])?;
            let file = File::open(&tracks).with_context(|| format!("{}", tracks.display()))?;
            let events = data::read_tracks(BufReader::new(file)).with_context(|| format!("{}", tracks.display()))?;
            let transitions = data::ingest(&events).with_context(|| format!("{}", tracks.display()))?;
            write_transitions(out.as_deref(), &transitions)
        }
        Command::Stats { data: path, top_natures, format, out } => {
            require_file(&path)?;
            require_outputs(&[out.as_deref()])?;
            let stats = data::stats(&load_transitions(&path)?, top_natures);
            let bytes = match format {
                Format::Json => to_json(&stats)?,
                Format::Text => format_stats(&stats).into_bytes(),
            };
            write_output(out.as_deref(), &bytes)
        }
        Command::Augment { data: path, out } => {
            require_file(&path)?;
            require_outputs(&[out.as_deref()])?;
            write_transitions(out.as_deref(), &data::augment(&load_transitions(&path)?))
        }
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Suggest { model, label, prev, k, format } => {
            require_file(&model)?;
            let label = ChordLabel::parse(&label)?;
            let prev = prev.as_deref().map(Diagram::parse).transpose()?;
            let model = load_model(&model)?;
            let suggestions = suggest(&model, &label, prev.as_ref(), k)?;
            let bytes = match format {
                Format::Json => {
                    let bodies: Vec<server::SuggestionBody> = suggestions.iter().map(Into::into).collect();
                    to_json(&server::SuggestResponse { suggestions: bodies })?
                }
                Format::Text => {
                    let mut s = String::new();
                    for (i, sug) in suggestions.iter().enumerate() {
                        let _ = writeln!(
                            s,
                            "{:>2}. {:<20} score={:.4}  {}",
                            i + 1,
                            sug.diagram.to_string(),
                            sug.score,
                            format_annotations(&sug.annotations)
                        );
                    }
                    s.into_bytes()
                }
            };
            write_output(None, &bytes)
        }
        Command::Continue { model, labels, first, format } => {
            require_file(&model)?;
            let labels = labels
                .split_whitespace()
                .enumerate()
                .map(|(i, l)| ChordLabel::parse(l).with_context(|| format!("label {} ({l})", i + 1)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if labels.is_empty() {
                bail!("--labels must contain at least one label");
            }
            let first = Diagram::parse(&first)?;
            let model = load_model(&model)?;
            let diagrams = continue_sequence(&model, &labels, first)?;
            let bytes = match format {
                Format::Json => {
                    let req = server::ContinueRequest {
                        labels: labels.iter().map(|l| l.to_string()).collect(),
                        first_fingering: first.to_string(),
                    };
                    to_json(&server::handle_continue(&model, &req).map_err(|e| anyhow::anyhow!("{e:?}"))?)?
                }
                Format::Text => {
                    let mut s = String::new();
                    for (i, (label, d)) in labels.iter().zip(&diagrams).enumerate() {
                        let prev = i.checked_sub(1).map(|p| &diagrams[p]);
                        let a = Annotations::compute(d, label, prev);
                        let _ =
                            writeln!(s, "{:<8} {:<20} {}", label.to_string(), d.to_string(), format_annotations(&a));
                    }
                    s.into_bytes()
                }
            };
            write_output(None, &bytes)
        }
        Command::Serve { model, host, port, ui_dir, cors_permissive } => {
            require_file(&model)?;
            if let Some(dir) = &ui_dir {
                if !dir.is_dir() {
                    bail!("{}: not a directory", dir.display());
                }
            }
            let addr: SocketAddr =
                format!("{host}:{port}").parse().with_context(|| format!("address {host}:{port}"))?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(addr, &model, ServerOptions { ui_dir, permissive_cors: cors_permissive }))
        }
    }
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    require_file(&args.data)?;
    require_outputs(&[Some(&args.out), args.report.as_deref()])?;
    let transitions = load_transitions(&args.data)?;
    let topology: Topology = args.topology.into();
    let opts = ProtocolOptions {
        topology,
        config: args.flags.config(TrainConfig::default()),
        augment: args.flags.augment_for(topology, None),
        split_seed: args.split_seed,
        splits: 1,
    };
    let (model, report, _) = evaluation::train_on_split(&transitions, &opts, args.split_index)?;
    model.save(&args.out).with_context(|| format!("{}", args.out.display()))?;
    if let Some(path) = &args.report {
        std::fs::write(path, to_json(&report)?).with_context(|| format!("{}", path.display()))?;
    }
    let last = report.epochs.last();
    println!(
        "trained {} model: {} examples, {} epochs{}, final validation loss {:.6}",
        topology.as_str(),
        report.train_examples,
        report.epochs.len(),
        if report.stopped_early { " (early stop)" } else { "" },
        last.map_or(f64::NAN, |e| e.val_loss)
    );
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    require_file(&args.data)?;
    if let Some(m) = &args.model {
        require_file(m)?;
    }
    require_outputs(&[args.out.as_deref()])?;
    let transitions = load_transitions(&args.data)?;
    let model = args.model.as_deref().map(load_model).transpose()?;

    let report = match (&model, args.splits) {
        (Some(model), None) => {
            let prov = &model.meta.provenance;
            let spec = SplitSpec {
                seed: args.split_seed.or(prov.split_seed).unwrap_or(0),
                split_index: prov.split_index.unwrap_or(0),
            };
            let test = data::split(&transitions, spec)?.test;
            evaluation::aggregate(model.topology, vec![evaluation::evaluate(model, &test)?])
        }
        (Some(model), Some(splits)) => {
            let prov = &model.meta.provenance;
            let opts = ProtocolOptions {
                topology: model.topology,
                config: args.flags.config(model.meta.config.clone()),
                augment: args.flags.augment_for(model.topology, Some(prov.augmented)),
                split_seed: args.split_seed.or(prov.split_seed).unwrap_or(0),
                splits,
            };
            evaluation::run_protocol(&transitions, &opts)?.0
        }
        (None, splits) => {
            let topology: Topology = args.topology.expect("required by clap").into();
            let opts = ProtocolOptions {
                topology,
                config: args.flags.config(TrainConfig::default()),
                augment: args.flags.augment_for(topology, None),
                split_seed: args.split_seed.unwrap_or(0),
                splits: splits.unwrap_or(4),
            };
            evaluation::run_protocol(&transitions, &opts)?.0
        }
    };

    let bytes = match args.format {
        Format::Json => to_json(&report)?,
        Format::Text => format_report(&report).into_bytes(),
    };
    write_output(args.out.as_deref(), &bytes)
}

fn format_annotations(a: &Annotations) -> String {
    let mut s = format!("playability={:.3}  pitch_f1={:.3}", a.playability, a.pitch_f1);
    if let Some(ease) = a.chord_change_ease {
        let _ = write!(s, "  ease={ease:.3}");
    }
    if a.unplayable {
        s.push_str("  *unplayable");
    }
    s
}

fn format_stats(stats: &data::CorpusStats) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "transitions: {}", stats.transitions);
    let _ = writeln!(s, "chords: {}", stats.chords);
    let _ = writeln!(s, "distinct labels: {}", stats.diagrams_per_label.len());
    let _ = writeln!(s, "median diagrams per label: {}", stats.median_diagrams_per_label);
    let _ = writeln!(s, "\nroot notes:");
    for (root, count) in &stats.root_histogram {
        let _ = writeln!(s, "  {root:<3} {count}");
    }
    let _ = writeln!(s, "\nnatures:");
    for (nature, count) in &stats.nature_histogram {
        let _ = writeln!(s, "  {nature:<8} {count}");
    }
    let _ = writeln!(s, "\ndiagrams per label:");
    for (label, count) in &stats.diagrams_per_label {
        let _ = writeln!(s, "  {label:<10} {count}");
    }
    s
}

fn format_report(r: &EvaluationReport) -> String {
    fn row(s: &mut String, name: &str, v: &MeanStd) {
        let _ = writeln!(s, "{name:<26} {:.4} ± {:.4}", v.mean, v.std);
    }
    fn playability(s: &mut String, prefix: &str, p: &PlayabilitySummary) {
        row(s, &format!("{prefix}.unplayable"), &p.unplayable);
        row(s, &format!("{prefix}.ease"), &p.ease);
        let t = &p.texture;
        row(s, &format!("{prefix}.muted"), &t.muted);
        row(s, &format!("{prefix}.muted_delta"), &t.muted_delta);
        row(s, &format!("{prefix}.open"), &t.open);
        row(s, &format!("{prefix}.open_delta"), &t.open_delta);
        row(s, &format!("{prefix}.string_centroid"), &t.string_centroid);
        row(s, &format!("{prefix}.string_centroid_delta"), &t.string_centroid_delta);
        row(s, &format!("{prefix}.unique_notes"), &t.unique_notes);
        row(s, &format!("{prefix}.unique_notes_delta"), &t.unique_notes_delta);
    }
    let mut s = String::new();
    let _ = writeln!(s, "{:<26} {}", "topology", r.topology.as_str());
    let _ = writeln!(s, "{:<26} {}", "splits", r.splits);
    let sizes: Vec<String> = r.test_sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "{:<26} {}", "test_sizes", sizes.join(" "));
    row(&mut s, "f1", &r.f1);
    row(&mut s, "pitch_f1", &r.pitch_f1);
    row(&mut s, "string_fret_f1", &r.string_fret_f1);
    playability(&mut s, "model", &r.model);
    playability(&mut s, "test_set", &r.test_set);
    s
}
