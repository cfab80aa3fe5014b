//! Command-line front end for `latgraph`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 oracle mismatch.

pub mod check;
pub mod instance;
pub mod sweep;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use latgraph::metrics::{format_alignment, parse_alignments, tokens_to_words, DelayAccumulator};
use latgraph::synth::{peaked_instance, rng, PeakConfig, RandomBounds};
use latgraph::{
    delay_penalized_ctc_loss, expected_delay, greedy_decode, DelayReport, Label, Validation,
    DEFAULT_FRAME_SHIFT_MS, DEFAULT_LAMBDA,
};
use serde::Serialize;

use check::{oracle_check, CheckConfig};
use instance::{matrix_tsv, InstanceFile};
use sweep::{rows_tsv, run_sweep, SweepConfig, SweepInstance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// Set to `strict` to check that every log-probability row normalizes.
pub const VALIDATE_ENV: &str = "LATGRAPH_VALIDATE";

#[derive(Debug, Parser)]
#[command(name = "latgraph", version, about = "CTC and delay-penalized CTC on lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print L, L_aug and minimize_loss = -L_aug as JSON.
    Loss {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA, value_parser = parse_lambda)]
        lambda: f64,
    },
    /// Write the gradient of L_aug with respect to the log-probabilities as TSV.
    Grad {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA, value_parser = parse_lambda)]
        lambda: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Greedy-decode a log-probability matrix into timed tokens and words.
    Decode {
        instance: PathBuf,
        /// Token table with `piece id` lines; words then follow the ▁ prefix.
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FRAME_SHIFT_MS, value_parser = parse_frame_shift)]
        frame_shift_ms: f64,
        /// `tsv` prints one alignment line usable by `metrics`.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value = "utt")]
        utt: String,
    },
    /// Corpus-level MSD, MED and WER of hypothesis against reference alignments.
    Metrics {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FRAME_SHIFT_MS, value_parser = parse_frame_shift)]
        frame_shift_ms: f64,
    },
    /// Loss, expected emission frame and delay metrics over a λ grid.
    Sweep(SweepArgs),
    /// Compare the lattice pipeline against brute-force enumeration.
    OracleCheck(CheckArgs),
    /// Write a seeded synthetic instance with planted token peaks.
    Gen {
        #[command(flatten)]
        peaks: PeakArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the reference word alignment here.
        #[arg(long)]
        ref_output: Option<PathBuf>,
        #[arg(long, default_value = "utt")]
        utt: String,
    },
}

#[derive(Debug, Args)]
pub struct PeakArgs {
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    pub frames: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub vocab: u64,
    /// Number of random labels, ignored when --labels is given.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub num_labels: u64,
    /// Explicit label sequence, e.g. "3 1 4".
    #[arg(long, value_parser = parse_ids::<Label>)]
    pub labels: Option<Ids<Label>>,
    /// Reference start frame of each label, e.g. "5 20 40".
    #[arg(long, value_parser = parse_ids::<usize>)]
    pub ref_frames: Option<Ids<usize>>,
    /// Frames between reference start and peak; positive means late.
    #[arg(long, default_value_t = 3, allow_negative_numbers = true)]
    pub peak_offset: i64,
    #[arg(long, default_value_t = 4.0)]
    pub peak_height: f64,
    #[arg(long, default_value_t = 3.0)]
    pub peak_width: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub blank_logit: f64,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub ref_len: u64,
}

impl PeakArgs {
    pub fn config(&self) -> Result<PeakConfig> {
        let cfg = PeakConfig {
            num_frames: self.frames as usize,
            vocab_size: self.vocab as usize,
            labels: self.labels.clone().map(|i| i.0),
            num_labels: self.num_labels as usize,
            reference_frames: self.ref_frames.clone().map(|i| i.0),
            peak_offset: self.peak_offset,
            peak_height: self.peak_height,
            peak_width: self.peak_width,
            blank_logit: self.blank_logit,
            noise: self.noise,
            reference_len: self.ref_len as usize,
        };
        if let Some(labels) = &cfg.labels {
            if labels.is_empty() || labels.iter().any(|&k| k < 1 || k as usize > cfg.vocab_size) {
                bail!("--labels must be non-empty ids in 1..={}", cfg.vocab_size);
            }
            if let Some(frames) = &cfg.reference_frames {
                if frames.len() != labels.len() {
                    bail!("--ref-frames needs one frame per label");
                }
            }
        }
        if let Some(frames) = &cfg.reference_frames {
            if frames.iter().any(|&f| f >= cfg.num_frames) {
                bail!("--ref-frames must be below --frames");
            }
            if cfg.labels.is_none() && frames.len() != cfg.num_labels {
                bail!("--ref-frames needs one frame per label");
            }
        }
        if !(cfg.noise >= 0.0 && cfg.peak_width > 0.0) {
            bail!("--noise must be >= 0 and --peak-width > 0");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Instance files; synthetic instances are generated when none are given.
    pub instances: Vec<PathBuf>,
    /// Reference alignments for the instance files, keyed by file stem.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = "0,0.005,0.01,0.02,0.025", value_parser = parse_lambdas)]
    pub lambdas: Lambdas,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of synthetic instances.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Posterior self-training rounds before decoding.
    #[arg(long, default_value_t = 40)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_FRAME_SHIFT_MS, value_parser = parse_frame_shift)]
    pub frame_shift_ms: f64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[command(flatten)]
    pub peaks: PeakArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "max-T", default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..=12))]
    pub max_t: u64,
    #[arg(long = "max-U", default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_u: u64,
    #[arg(long = "max-V", default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_v: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value = "0.005,0.01,0.02,0.1", value_parser = parse_lambdas)]
    pub lambdas: Lambdas,
}

/// A comma-separated list of penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas(pub Vec<f64>);

fn parse_lambda(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("lambda must be finite and >= 0, got {s}"))
    }
}

fn parse_lambdas(s: &str) -> std::result::Result<Lambdas, String> {
    let v = s.split(',').map(parse_lambda).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Lambdas(v))
}

fn parse_frame_shift(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("frame shift must be a positive number, got {s:?}")),
    }
}

/// A comma- or space-separated list of integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ids<T>(pub Vec<T>);

fn parse_ids<T: std::str::FromStr>(s: &str) -> std::result::Result<Ids<T>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|_| format!("bad id {p:?}")))
        .collect::<std::result::Result<Vec<T>, String>>()
        .map(Ids)
}

fn validation_from_env() -> std::result::Result<Validation, String> {
    match std::env::var(VALIDATE_ENV) {
        Err(_) => Ok(Validation::Off),
        Ok(v) => match v.to_ascii_lowercase().as_str() {
            "strict" => Ok(Validation::Strict),
            "" | "off" => Ok(Validation::Off),
            other => Err(format!("{VALIDATE_ENV} must be 'strict' or 'off', got {other:?}")),
        },
    }
}

/// Parses `argv` (program name first) and runs the command on stdout/stderr.
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let validation = match validation_from_env() {
        Ok(v) => v,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, validation, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

#[derive(Serialize)]
struct LossReport {
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "L_aug")]
    l_aug: f64,
    minimize_loss: f64,
    lambda: f64,
    /// Posterior mean delay score under the penalized lattice.
    expected_delay: f64,
    num_frames: usize,
    vocab_size: usize,
    num_labels: usize,
}

#[derive(Serialize)]
struct TimedOut<T: Serialize> {
    token: T,
    start_frame: usize,
    end_frame: usize,
    start_ms: f64,
    end_ms: f64,
}

#[derive(Serialize)]
struct DecodeReport {
    frame_shift_ms: f64,
    tokens: Vec<TimedOut<Label>>,
    words: Vec<TimedOut<String>>,
}

#[derive(Serialize)]
struct MetricsReport {
    utterances: usize,
    #[serde(flatten)]
    report: DelayReport,
}

fn load(path: &Path, validation: Validation) -> Result<InstanceFile> {
    let inst = InstanceFile::read(path)?;
    inst.dense(validation).with_context(|| format!("validating {}", path.display()))?;
    Ok(inst)
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_token_table(path: &Path) -> Result<HashMap<Label, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (piece, id) = line
            .trim()
            .rsplit_once(char::is_whitespace)
            .with_context(|| format!("{}:{}: expected `piece id`", path.display(), n + 1))?;
        let id: Label = id
            .parse()
            .with_context(|| format!("{}:{}: bad id", path.display(), n + 1))?;
        map.insert(id, piece.trim().to_string());
    }
    Ok(map)
}

fn read_alignments(path: &Path) -> Result<Vec<(String, Vec<latgraph::TimedWord>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_alignments(&text).with_context(|| format!("parsing {}", path.display()))
}

fn execute(command: Command, validation: Validation, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Loss { instance, lambda } => {
            let inst = load(&instance, validation)?;
            let labels = inst.labels()?;
            let (l, _) = delay_penalized_ctc_loss(&inst.logprobs, labels, 0.0)?;
            let (l_aug, _) = delay_penalized_ctc_loss(&inst.logprobs, labels, lambda)?;
            let report = LossReport {
                l,
                l_aug,
                minimize_loss: -l_aug,
                lambda,
                expected_delay: expected_delay(&inst.logprobs, labels, lambda)?,
                num_frames: inst.logprobs.nrows(),
                vocab_size: inst.logprobs.ncols() - 1,
                num_labels: labels.len(),
            };
            json(out, &report)?;
        }
        Command::Grad {
            instance,
            lambda,
            output,
        } => {
            let inst = load(&instance, validation)?;
            let (_, grad) = delay_penalized_ctc_loss(&inst.logprobs, inst.labels()?, lambda)?;
            write_text(output.as_deref(), &matrix_tsv(&grad), out)?;
        }
        Command::Decode {
            instance,
            tokens,
            frame_shift_ms,
            format,
            utt,
        } => {
            let inst = load(&instance, validation)?;
            let table = tokens.as_deref().map(read_token_table).transpose()?;
            let toks = greedy_decode(&inst.logprobs);
            let words = tokens_to_words(&toks, table.as_ref());
            match format {
                Format::Tsv => writeln!(out, "{}", format_alignment(&utt, &words))?,
                Format::Json => {
                    let ms = |f: usize| f as f64 * frame_shift_ms;
                    let report = DecodeReport {
                        frame_shift_ms,
                        tokens: toks
                            .iter()
                            .map(|t| TimedOut {
                                token: t.token,
                                start_frame: t.start_frame,
                                end_frame: t.end_frame,
                                start_ms: ms(t.start_frame),
                                end_ms: ms(t.end_frame),
                            })
                            .collect(),
                        words: words
                            .into_iter()
                            .map(|w| TimedOut {
                                start_ms: ms(w.start_frame),
                                end_ms: ms(w.end_frame),
                                token: w.token,
                                start_frame: w.start_frame,
                                end_frame: w.end_frame,
                            })
                            .collect(),
                    };
                    json(out, &report)?;
                }
            }
        }
        Command::Metrics {
            hyp,
            reference,
            frame_shift_ms,
        } => {
            let hyps: HashMap<String, Vec<latgraph::TimedWord>> = read_alignments(&hyp)?.into_iter().collect();
            let refs = read_alignments(&reference)?;
            let known: std::collections::HashSet<&str> = refs.iter().map(|(u, _)| u.as_str()).collect();
            if let Some(extra) = hyps.keys().find(|u| !known.contains(u.as_str())) {
                bail!("hypothesis utterance {extra:?} has no reference");
            }
            let mut acc = DelayAccumulator::default();
            for (utt, words) in &refs {
                acc.add(hyps.get(utt).map_or(&[][..], Vec::as_slice), words);
            }
            json(
                out,
                &MetricsReport {
                    utterances: refs.len(),
                    report: acc.report(frame_shift_ms)?,
                },
            )?;
        }
        Command::Sweep(args) => {
            let instances = sweep_instances(&args, validation)?;
            let cfg = SweepConfig {
                iterations: args.iterations,
                frame_shift_ms: args.frame_shift_ms,
            };
            let rows = run_sweep(&instances, &args.lambdas.0, &cfg)?;
            match args.format {
                Format::Tsv => out.write_all(rows_tsv(&rows).as_bytes())?,
                Format::Json => json(out, &rows)?,
            }
        }
        Command::OracleCheck(args) => {
            if !(args.tolerance > 0.0) {
                bail!("--tolerance must be positive");
            }
            let cfg = CheckConfig {
                trials: args.trials,
                seed: args.seed,
                bounds: RandomBounds {
                    max_frames: args.max_t as usize,
                    max_labels: args.max_u as usize,
                    max_vocab: args.max_v as usize,
                },
                tolerance: args.tolerance,
            };
            let report = oracle_check(&cfg, &args.lambdas.0);
            json(out, &report)?;
            if !report.ok {
                return Ok(EXIT_MISMATCH);
            }
        }
        Command::Gen {
            peaks,
            seed,
            output,
            ref_output,
            utt,
        } => {
            let inst = peaked_instance(&mut rng(seed), &peaks.config()?);
            let file = InstanceFile {
                logprobs: inst.logprobs,
                labels: Some(inst.labels),
            };
            write_text(output.as_deref(), &file.to_text(), out)?;
            if let (Some(path), Some(reference)) = (ref_output, inst.reference) {
                let line = format_alignment(&utt, &reference) + "\n";
                std::fs::write(&path, line).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn sweep_instances(args: &SweepArgs, validation: Validation) -> Result<Vec<SweepInstance>> {
    if args.instances.is_empty() {
        let cfg = args.peaks.config()?;
        let mut r = rng(args.seed);
        return Ok((0..args.trials)
            .map(|_| {
                let inst = peaked_instance(&mut r, &cfg);
                SweepInstance {
                    logprobs: inst.logprobs,
                    labels: inst.labels,
                    reference: inst.reference,
                }
            })
            .collect());
    }
    let refs: HashMap<String, Vec<latgraph::TimedWord>> = match &args.reference {
        Some(p) => read_alignments(p)?.into_iter().collect(),
        None => HashMap::new(),
    };
    args.instances
        .iter()
        .map(|path| {
            let inst = load(path, validation)?;
            let utt = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(SweepInstance {
                labels: inst.labels()?.to_vec(),
                logprobs: inst.logprobs,
                reference: refs.get(&utt).cloned(),
            })
        })
        .collect()
}
