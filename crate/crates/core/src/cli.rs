//! The `wfst-btc` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (including
//! unrealizable transcripts), 3 internal invariant violation.
//!
//! A data directory holds `units.txt`, `train.feats`, `train.txt`,
//! `test.feats` and `test.txt` (see [`write_data_dir`]).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corruption::{corrupt_utterance, CorruptionConfig, CorruptionMode, CorruptionStats};
use crate::error::Error;
use crate::loss::{
    brute_force_loss, lattice_loss, EmissionMatrix, PenaltySchedule, BRUTE_FORCE_MAX_FRAMES,
    BRUTE_FORCE_MAX_WIDTH,
};
use crate::topology::{
    btc_graph, ctc_graph, parse_transcripts, transcripts_to_text, Lexicon, Transcript, Vocabulary,
};
use crate::trainer::data::{features_from_text, features_to_text};
use crate::trainer::{
    evaluate, generate_synthetic_dataset, train, Dataset, EncoderParams, SyntheticTaskConfig,
    TrainConfig, TrainCriterion, Utterance,
};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Largest |lattice − brute force| the oracle command accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "wfst-btc", version, about = "CTC / BTC training-graph toolkit")]
pub struct Cli {
    /// Worker threads (defaults to available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Ctc,
    Btc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sub,
    Ins,
    #[value(name = "sub+ins")]
    SubIns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Att,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a transcript file (one utterance per line) and write a manifest.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.0)]
        p_sub: f64,
        #[arg(long, default_value_t = 0.0)]
        p_ins: f64,
        #[arg(long)]
        seed: u64,
        /// Unit vocabulary; defaults to the units seen in the input.
        #[arg(long)]
        units: Option<PathBuf>,
    },
    /// Write a synthetic data directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML task config; built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train an encoder with CTC or BTC.
    Train {
        /// TOML training config (lr, epochs, batch_size, clip_norm, hidden_dim,
        /// context, init_seed, shuffle_seed, beta, tau).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        criterion: CriterionArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training transcripts; defaults to `<data>/train.txt`.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Greedy-decode the test set and score it against clean references.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Build and print a training graph.
    Graph {
        /// Space-separated transcript.
        #[arg(long)]
        transcript: String,
        /// Unit vocabulary; defaults to the transcript's units in order of appearance.
        #[arg(long)]
        units: Option<PathBuf>,
        /// Lexicon file (`WORD unit ...`); the transcript is then over words.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ctc")]
        criterion: CriterionArg,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "att")]
        format: GraphFormat,
    },
    /// Print the bypass penalty for each epoch.
    Schedule {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        epochs: usize,
    },
    /// Compare the lattice loss with the enumeration oracle.
    Oracle {
        /// Emission text file: `T V_ext` then T rows.
        #[arg(long)]
        emissions: PathBuf,
        #[arg(long)]
        transcript: String,
        /// Bypass penalty; omit for CTC.
        #[arg(long)]
        lambda: Option<f64>,
        /// Unit vocabulary; defaults to `a`, `b`, ... sized from the emissions.
        #[arg(long)]
        units: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::TooLarge(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            let _ = writeln!(err, "error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let (result, buf) = pool.install(|| {
        let mut buf = Vec::new();
        (dispatch(cli.command, &mut buf), buf)
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_DATA
        }
        Err(CliError::Internal(m)) => {
            let _ = writeln!(err, "internal error: {m}");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Corrupt {
            input,
            output,
            mode,
            p_sub,
            p_ins,
            seed,
            units,
        } => cmd_corrupt(&input, &output, mode, p_sub, p_ins, seed, units.as_deref(), out),
        Command::Synth { out: dir, config } => cmd_synth(&dir, config.as_deref(), out),
        Command::Train {
            config,
            criterion,
            data,
            out: dir,
            transcripts,
        } => cmd_train(&config, criterion, &data, &dir, transcripts.as_deref(), out),
        Command::Eval { model, data } => cmd_eval(&model, &data, out),
        Command::Graph {
            transcript,
            units,
            lexicon,
            criterion,
            lambda,
            format,
        } => cmd_graph(
            &transcript,
            units.as_deref(),
            lexicon.as_deref(),
            criterion,
            lambda,
            format,
            out,
        ),
        Command::Schedule { beta, tau, epochs } => cmd_schedule(beta, tau, epochs, out),
        Command::Oracle {
            emissions,
            transcript,
            lambda,
            units,
        } => cmd_oracle(&emissions, &transcript, lambda, units.as_deref(), out),
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn out_line(out: &mut dyn Write, s: std::fmt::Arguments<'_>) -> CliResult {
    out.write_fmt(s)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::Internal(e.to_string()))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { out_line($out, format_args!($($arg)*)) };
}

/// Units in order of first appearance.
fn vocab_from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> CliResult<Vocabulary> {
    let mut seen: Vec<&str> = Vec::new();
    for line in lines {
        for tok in line.split_whitespace() {
            if !seen.contains(&tok) {
                seen.push(tok);
            }
        }
    }
    Ok(Vocabulary::new(seen)?)
}

#[derive(Serialize)]
struct CorruptionManifest<'a> {
    version: &'a str,
    input: String,
    output: String,
    config: CorruptionConfig,
    utterances: usize,
    stats: CorruptionStats,
    realized_substitution_rate: f64,
    realized_insertion_rate: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_corrupt(
    input: &Path,
    output: &Path,
    mode: ModeArg,
    p_sub: f64,
    p_ins: f64,
    seed: u64,
    units: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let mode = match mode {
        ModeArg::Sub => CorruptionMode::Substitution,
        ModeArg::Ins => CorruptionMode::Insertion,
        ModeArg::SubIns => CorruptionMode::SubPlusIns,
    };
    let config = CorruptionConfig::new(mode, p_sub, p_ins, seed)?;
    let text = read(input)?;
    let vocab = match units {
        Some(p) => Vocabulary::from_text(&read(p)?)?,
        None => vocab_from_lines(text.lines())?,
    };
    let transcripts = parse_transcripts(&text, &vocab)?;
    let mut lines = Vec::with_capacity(transcripts.len());
    let mut stats = CorruptionStats::default();
    for (i, (line, t)) in text.lines().zip(&transcripts).enumerate() {
        let (c, s) = corrupt_utterance(t, &vocab, &config, i as u64)?;
        stats.sub_trials += s.sub_trials;
        stats.substitutions += s.substitutions;
        stats.gaps += s.gaps;
        stats.insertions += s.insertions;
        // untouched lines are copied verbatim
        lines.push(if &c == t { line.to_string() } else { c.to_line(&vocab) });
    }
    let mut body = lines.join("\n");
    if text.ends_with('\n') {
        body.push('\n');
    }
    write_atomic(output, body.as_bytes())?;
    let manifest = CorruptionManifest {
        version: VERSION,
        input: input.display().to_string(),
        output: output.display().to_string(),
        config,
        utterances: transcripts.len(),
        stats,
        realized_substitution_rate: stats.substitution_rate(),
        realized_insertion_rate: stats.insertion_rate(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&manifest_path(output), format!("{json}\n").as_bytes())?;
    say!(
        out,
        "{} utterances, substitution rate {:.4}, insertion rate {:.4}",
        transcripts.len(),
        stats.substitution_rate(),
        stats.insertion_rate()
    )
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `units.txt`, `{train,test}.feats` and `{train,test}.txt`.
pub fn write_data_dir(dir: &Path, data: &Dataset) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("units.txt"), data.vocab.to_text().as_bytes())?;
    for (name, utts) in [("train", &data.train), ("test", &data.test)] {
        let feats: Vec<_> = utts.iter().map(|u| &u.features).collect();
        write_atomic(&dir.join(format!("{name}.feats")), features_to_text(&feats).as_bytes())?;
        let ts: Vec<Transcript> = utts.iter().map(|u| u.transcript.clone()).collect();
        write_atomic(
            &dir.join(format!("{name}.txt")),
            transcripts_to_text(&ts, &data.vocab).as_bytes(),
        )?;
    }
    Ok(())
}

pub fn read_data_dir(dir: &Path) -> crate::Result<Dataset> {
    let vocab = Vocabulary::from_text(&fs::read_to_string(dir.join("units.txt"))?)?;
    let split = |name: &str| -> crate::Result<Vec<Utterance>> {
        let feats = features_from_text(&fs::read_to_string(dir.join(format!("{name}.feats")))?)?;
        let ts = parse_transcripts(&fs::read_to_string(dir.join(format!("{name}.txt")))?, &vocab)?;
        if feats.len() != ts.len() {
            return Err(Error::Config(format!(
                "{name}: {} feature blocks but {} transcripts",
                feats.len(),
                ts.len()
            )));
        }
        Ok(feats
            .into_iter()
            .zip(ts)
            .map(|(features, transcript)| Utterance {
                features,
                transcript,
            })
            .collect())
    };
    let train = split("train")?;
    let test = split("test")?;
    Ok(Dataset { vocab, train, test })
}

fn cmd_synth(dir: &Path, config: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let cfg: SyntheticTaskConfig = match config {
        Some(p) => toml::from_str(&read(p)?).map_err(|e| CliError::Usage(e.to_string()))?,
        None => SyntheticTaskConfig::default(),
    };
    let data = generate_synthetic_dataset(&cfg)?;
    write_data_dir(dir, &data)?;
    say!(
        out,
        "wrote {} train and {} test utterances to {}",
        data.train.len(),
        data.test.len(),
        dir.display()
    )
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    version: &'a str,
    criterion: &'a str,
    config: &'a TrainConfig,
    data: String,
    transcripts: String,
    final_per: f64,
}

fn cmd_train(
    config_path: &Path,
    criterion: CriterionArg,
    data_dir: &Path,
    out_dir: &Path,
    transcripts: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let text = read(config_path)?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
    let cfg: TrainConfig = toml::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.validate()?;
    let crit = match criterion {
        CriterionArg::Ctc => TrainCriterion::Ctc,
        // the schedule must be stated, not inherited from defaults
        CriterionArg::Btc => match cfg.schedule()? {
            Some(s) if table.contains_key("beta") && table.contains_key("tau") => TrainCriterion::Btc(s),
            _ => {
                return Err(CliError::Usage(
                    "criterion btc needs beta and tau in the config".into(),
                ))
            }
        },
    };
    let data = read_data_dir(data_dir)?;
    let labels_path = transcripts
        .map(Path::to_path_buf)
        .unwrap_or_else(|| data_dir.join("train.txt"));
    let labels = parse_transcripts(&read(&labels_path)?, &data.vocab)?;
    let (params, report) = train(&data, &labels, crit, &cfg)?;
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("model.bin"), &params.to_bytes())?;
    write_atomic(&out_dir.join("model.txt"), params.to_text().as_bytes())?;
    write_atomic(&out_dir.join("report.csv"), report.to_csv().as_bytes())?;
    write_atomic(&out_dir.join("summary.txt"), report.summary().as_bytes())?;
    let manifest = TrainManifest {
        version: VERSION,
        criterion: match criterion {
            CriterionArg::Ctc => "ctc",
            CriterionArg::Btc => "btc",
        },
        config: &cfg,
        data: data_dir.display().to_string(),
        transcripts: labels_path.display().to_string(),
        final_per: report.final_per,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&out_dir.join("manifest.json"), format!("{json}\n").as_bytes())?;
    out.write_all(report.summary().as_bytes())
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_eval(model: &Path, data_dir: &Path, out: &mut dyn Write) -> CliResult {
    let bytes = fs::read(model).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let params = EncoderParams::from_bytes(&bytes)?;
    let data = read_data_dir(data_dir)?;
    if params.output_dim != data.vocab.extended_size() {
        return Err(CliError::Data(format!(
            "model emits {} labels but the vocabulary needs {}",
            params.output_dim,
            data.vocab.extended_size()
        )));
    }
    let (c, _) = evaluate(&params, &data.test)?;
    say!(out, "utterances {}", data.test.len())?;
    say!(out, "reference tokens {}", c.ref_len)?;
    say!(out, "substitutions {}", c.substitutions)?;
    say!(out, "insertions {}", c.insertions)?;
    say!(out, "deletions {}", c.deletions)?;
    say!(out, "PER {:.2}", c.error_rate())
}

fn cmd_graph(
    transcript: &str,
    units: Option<&Path>,
    lexicon: Option<&Path>,
    criterion: CriterionArg,
    lambda: Option<f64>,
    format: GraphFormat,
    out: &mut dyn Write,
) -> CliResult {
    let vocab = match units {
        Some(p) => Vocabulary::from_text(&read(p)?)?,
        None if lexicon.is_some() => {
            return Err(CliError::Usage("--lexicon needs --units".into()));
        }
        None => vocab_from_lines([transcript])?,
    };
    let lex = match lexicon {
        Some(p) => Lexicon::from_text(&read(p)?, &vocab)?,
        None => Lexicon::identity(&vocab),
    };
    let t = Transcript::parse(transcript, lex.words())?;
    let graph = match (criterion, lambda) {
        (CriterionArg::Ctc, None) => ctc_graph(&vocab, &lex, &t)?,
        (CriterionArg::Ctc, Some(_)) => {
            return Err(CliError::Usage("--lambda only applies to btc".into()))
        }
        (CriterionArg::Btc, l) => btc_graph(&vocab, &lex, &t, l.unwrap_or(0.0))?,
    };
    let text = match format {
        GraphFormat::Att => graph.to_text(),
        GraphFormat::Dot => graph.to_dot(&|l| {
            // output side carries word labels when a lexicon is given
            vocab.name(l).to_string()
        }),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_schedule(beta: f64, tau: f64, epochs: usize, out: &mut dyn Write) -> CliResult {
    let s = PenaltySchedule::new(beta, tau)?;
    say!(out, "epoch lambda")?;
    for i in 0..epochs {
        say!(out, "{} {}", i, s.penalty_at(i))?;
    }
    Ok(())
}

fn cmd_oracle(
    emissions: &Path,
    transcript: &str,
    lambda: Option<f64>,
    units: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let e = EmissionMatrix::from_text(&read(emissions)?)?;
    if e.frames() > BRUTE_FORCE_MAX_FRAMES || e.width() > BRUTE_FORCE_MAX_WIDTH {
        return Err(CliError::Usage(format!(
            "{}x{} emissions exceed the enumeration bound {}x{}",
            e.frames(),
            e.width(),
            BRUTE_FORCE_MAX_FRAMES,
            BRUTE_FORCE_MAX_WIDTH
        )));
    }
    let vocab = match units {
        Some(p) => Vocabulary::from_text(&read(p)?)?,
        None => Vocabulary::new((0..e.width() - 2).map(|i| ((b'a' + i as u8) as char).to_string()))?,
    };
    if vocab.extended_size() != e.width() {
        return Err(CliError::Usage(format!(
            "{} units need {} emission columns, found {}",
            vocab.len(),
            vocab.extended_size(),
            e.width()
        )));
    }
    let t = Transcript::parse(transcript, &vocab)?;
    let lex = Lexicon::identity(&vocab);
    let graph = match lambda {
        None => ctc_graph(&vocab, &lex, &t)?,
        Some(l) => btc_graph(&vocab, &lex, &t, l)?,
    };
    let lattice = lattice_loss(&e, &graph)?.nll;
    let oracle = brute_force_loss(&e, &t, lambda)?;
    let diff = (lattice - oracle).abs();
    say!(
        out,
        "criterion {}",
        lambda.map_or("ctc".to_string(), |l| format!("btc lambda={l}"))
    )?;
    say!(out, "lattice {lattice:.17e}")?;
    say!(out, "oracle  {oracle:.17e}")?;
    say!(out, "diff    {diff:.3e}")?;
    if diff > ORACLE_TOLERANCE {
        return Err(CliError::Internal(format!(
            "lattice and oracle differ by {diff:e}"
        )));
    }
    Ok(())
}
