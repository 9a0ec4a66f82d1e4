//! The `streamrev` command line.
//!
//! Exit codes: 0 on success, 2 on configuration, argument or input-format
//! errors, 1 on runtime failures. Messages go to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Entries, RunConfig};
use crate::ctcdec::{align_spikes, redecode_from, top_two_rows, Hypothesis};
use crate::error::{Error, Result};
use crate::formats;
use crate::harness::{self, Mode};
use crate::masks::{
    causal_mask, chunk_mask, export_mask, revision_mask, AttentionMask, MaskFormat,
};
use crate::scheduler::{cost_report, events_to_csv, plan, RevisionPolicy};
use crate::tensor::Matrix;

#[derive(Debug, Parser)]
#[command(
    name = "streamrev",
    version,
    about = "Streaming encoder revision and spike-aligned CTC decoding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one streaming session and write transcript, metrics and event log.
    Run(RunArgs),
    /// Predicted and exact revision cost for a stream length.
    Cost(CostArgs),
    /// Export an attention mask.
    Masks(MaskArgs),
    /// Decode a posterior file, or align and re-decode an old/new stream pair.
    Decode(DecodeArgs),
    /// Run the same input under several modes and print one CSV row per mode.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Causal,
    Revision,
    Offline,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Causal => Mode::Causal,
            ModeArg::Revision => Mode::Revision,
            ModeArg::Offline => Mode::Offline,
        }
    }
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Config file (`section.key = value` lines).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set revision.step=1s`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for generated weights; wins over STREAMREV_SEED and the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature file (SRF1 or CSV).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Posterior file for decoder-only sessions (SRF1 or CSV).
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Also write a blank-dominance trace with this window (frames).
    #[arg(long)]
    pub trace: Option<usize>,
    /// Include wall-clock fields (processing time, RTF proxy) in the metrics.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Stream length in frames.
    #[arg(long = "frames", short = 'T')]
    pub frames: usize,
    #[arg(long)]
    pub sigma: usize,
    #[arg(long)]
    pub nu: usize,
    /// Add the end-of-stream revision.
    #[arg(long = "final")]
    pub final_revision: bool,
    /// Print the per-event breakdown as CSV.
    #[arg(long)]
    pub events: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Causal,
    Chunk,
    Revision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long = "frames", short = 'T')]
    pub frames: usize,
    #[arg(long)]
    pub chunk: Option<usize>,
    #[arg(long)]
    pub sigma: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
    /// Write the mask here; otherwise only the context ends are printed.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bin")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Posterior file to decode from scratch.
    pub posteriors: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    /// Previous stream of an old/new pair.
    #[arg(long, requires = "new")]
    pub old: Option<PathBuf>,
    /// Revised stream of an old/new pair; one extra trailing frame is the newest input.
    #[arg(long, requires = "old")]
    pub new: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "causal,revision,offline"
    )]
    pub modes: Vec<ModeArg>,
    /// Sessions to run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub timing: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Exit code for an error: 2 for anything the caller can fix in the
/// invocation or its inputs, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) | Error::Format { .. } => 2,
        Error::Io { .. } | Error::Numeric(_) => 1,
    }
}

/// Parses the process arguments, runs the command and reports errors.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("streamrev: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Cost(a) => cmd_cost(&a),
        Command::Masks(a) => cmd_masks(&a),
        Command::Decode(a) => cmd_decode(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

fn resolve_config(args: &SessionArgs, mode: Option<ModeArg>) -> Result<RunConfig> {
    let mut entries = match &args.config {
        Some(p) if !p.exists() => {
            return Err(Error::Config(format!(
                "config file not found: {}",
                p.display()
            )))
        }
        Some(p) => Entries::load(p)?,
        None => Entries::default(),
    };
    for o in &args.overrides {
        entries.set_override(o)?;
    }
    let path_str = |p: &Path| p.to_string_lossy().into_owned();
    if let Some(f) = &args.features {
        entries.insert("session.features", &path_str(f), None)?;
    }
    if let Some(p) = &args.posteriors {
        entries.insert("session.posteriors", &path_str(p), None)?;
    }
    if let Some(m) = mode {
        entries.insert("session.mode", &Mode::from(m).to_string(), None)?;
    }
    let mut cfg = entries.resolve()?;
    cfg.apply_seed_env()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn join(tokens: &[u32]) -> String {
    tokens
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = resolve_config(&a.session, a.mode)?;
    let session = cfg.session()?;
    let out = harness::run_session(&session)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write(
        &a.out.join("transcript.txt"),
        &format!("{}\n", join(&out.transcript)),
    )?;
    write(
        &a.out.join("metrics.jsonl"),
        &format!("{}\n", out.metrics.to_json_line(a.timing)),
    )?;
    write(&a.out.join("events.csv"), &out.log.to_csv())?;
    write(&a.out.join("config.txt"), &cfg.to_text())?;
    if let Some(window) = a.trace {
        let rows = harness::emit_blank_dominance_trace(&out, window)?;
        write(&a.out.join("trace.csv"), &harness::trace_csv(&rows))?;
    }
    println!("{}", join(&out.transcript));
    eprintln!(
        "{} frames, {} recomputed, rtf proxy {:.4}, outputs in {}",
        out.metrics.frames,
        out.metrics.recomputed_frames,
        out.metrics.rtf_proxy,
        a.out.display()
    );
    Ok(())
}

fn cmd_cost(a: &CostArgs) -> Result<()> {
    let policy = RevisionPolicy::new(a.sigma, a.nu, a.final_revision, 0.0)?;
    let report = cost_report(a.frames, &policy)?;
    let predicted = report
        .predicted
        .ok_or_else(|| Error::Domain(format!("sigma {} exceeds T {}", a.sigma, a.frames)))?;
    println!("predicted {predicted}");
    println!("measured {}", report.measured);
    if a.events {
        print!("{}", events_to_csv(&plan(a.frames, &policy)?));
    }
    Ok(())
}

fn cmd_masks(a: &MaskArgs) -> Result<()> {
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| Error::InvalidArgument(format!("--kind needs --{flag}")))
    };
    let mask: AttentionMask = match a.kind {
        KindArg::Causal => causal_mask(a.frames)?,
        KindArg::Chunk => chunk_mask(a.frames, need(a.chunk, "chunk")?)?,
        KindArg::Revision => revision_mask(a.frames, need(a.sigma, "sigma")?, need(a.nu, "nu")?)?,
    };
    let ends: Vec<String> = mask.ends().iter().map(u32::to_string).collect();
    println!("e = [{}]", ends.join(","));
    if let Some(path) = &a.out {
        let format = match a.format {
            FormatArg::Csv => MaskFormat::Csv,
            FormatArg::Bin => MaskFormat::Bin,
        };
        export_mask(&mask, path, format)?;
    }
    Ok(())
}

fn load_input(path: &Path) -> Result<Matrix> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "input file not found: {}",
            path.display()
        )));
    }
    formats::load_matrix(path)
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.theta) {
        return Err(Error::InvalidArgument(format!(
            "theta {} outside [0, 1]",
            a.theta
        )));
    }
    let mut out = std::io::stdout().lock();
    let mut say = |line: String| writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e));
    if let Some(p) = &a.posteriors {
        let tops = top_two_rows(load_input(p)?.iter_rows())?;
        let hyp = Hypothesis::decode(&tops, a.theta);
        say(format!("transcript {}", join(hyp.tokens())))?;
        say(format!("skipped {}", hyp.skipped()))?;
    }
    match (&a.old, &a.new) {
        (Some(old), Some(new)) => {
            let old = top_two_rows(load_input(old)?.iter_rows())?;
            let new = top_two_rows(load_input(new)?.iter_rows())?;
            if new.len() != old.len() && new.len() != old.len() + 1 {
                return Err(Error::InvalidArgument(format!(
                    "new stream has {} frames, old {}; expected equal or one more",
                    new.len(),
                    old.len()
                )));
            }
            let alignment = align_spikes(&old, &new[..old.len()], a.theta)?;
            let hyp = Hypothesis::decode(&old, a.theta);
            let res = redecode_from(&hyp, &alignment, &new, a.theta)?;
            say(format!("tau {} of {}", res.tau, alignment.tau_max()))?;
            say(format!("redecoded {}", res.frames_redecoded))?;
            say(format!("transcript {}", join(res.hypothesis.tokens())))?;
        }
        (None, None) if a.posteriors.is_none() => {
            return Err(Error::InvalidArgument(
                "give a posterior file or an --old/--new pair".into(),
            ))
        }
        _ => {}
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let cfg = resolve_config(&a.session, None)?;
    let modes: Vec<Mode> = a.modes.iter().map(|&m| m.into()).collect();
    let rows = harness::compare_modes(&cfg.session()?, &modes, a.jobs)?;
    let csv = harness::metrics_csv(&rows, a.timing);
    match &a.out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
