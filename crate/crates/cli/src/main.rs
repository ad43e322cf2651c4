use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use percepbench::adapter::serve;
use percepbench::metrics::{lookup, native_metrics};
use percepbench::pipeline::config::{AdapterConfig, RunConfig, DEFAULT_IN_FLIGHT, DEFAULT_TIMEOUT_S};
use percepbench::pipeline::run::RunFlags;
use percepbench::pipeline::score::{resolve_pack, score_all};
use percepbench::pipeline::suite::GenOutcome;
use percepbench::pipeline::{gen_all, run_all, with_pool, PipelineError};
use percepbench::reference::{build_pack, save_reference_pack, CastleCsf, SyntheticCsf};
use percepbench::report::render_report;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_STRICT: u8 = 3;

#[derive(Parser)]
#[command(name = "percepbench", version, about = "Psychophysical tests for image and video quality metrics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (.toml or .json).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output root, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Keep completed cells of earlier runs and only retry the rest.
    #[arg(long)]
    resume: bool,
    /// Exit with code 3 when any cell, adapter or score failed.
    #[arg(long)]
    strict: bool,
    /// Extra external metric, started as `sh -c "<cmd>"`.
    #[arg(long = "adapter", value_name = "CMD")]
    adapters: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate stimulus suites.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Regenerate suites whose inputs changed.
        #[arg(long)]
        force: bool,
    },
    /// Collect metric responses over generated suites.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: RunOpts,
        /// Replace outputs produced from different inputs.
        #[arg(long)]
        force: bool,
    },
    /// Score response surfaces against the reference pack.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strict: bool,
    },
    /// Render the HTML/SVG/CSV report.
    Report {
        #[command(flatten)]
        common: Common,
        /// Results root (defaults to the config output).
        #[arg(long)]
        results: Option<PathBuf>,
        /// Leave timestamps out of the pages.
        #[arg(long)]
        reproducible: bool,
    },
    /// gen, run, score and report in sequence.
    All {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        reproducible: bool,
    },
    /// Built-in metrics.
    Metrics {
        #[command(subcommand)]
        cmd: MetricsCmd,
    },
    /// Reference packs.
    Refpack {
        #[command(subcommand)]
        cmd: RefpackCmd,
    },
    /// Serve a built-in metric over the adapter protocol on stdin/stdout.
    AdapterServe {
        #[arg(long)]
        metric: String,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum PackModel {
    Castle,
    Synthetic,
}

#[derive(Subcommand)]
enum RefpackCmd {
    /// Write a pack built from a threshold model as CSV files.
    Export {
        #[arg(long, value_enum)]
        model: PackModel,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Strict(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => Failure::Config(c.to_string()),
            PipelineError::Metric(m) => Failure::Config(m.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_config(common: &Common, adapters: &[String]) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    for cmd in adapters {
        cfg.adapters.push(AdapterConfig {
            name: String::new(),
            command: cmd.clone(),
            timeout_s: DEFAULT_TIMEOUT_S,
            in_flight: DEFAULT_IN_FLIGHT,
        });
    }
    Ok(cfg)
}

fn gen(cfg: &RunConfig, force: bool) -> Result<(), Failure> {
    for (t, o) in gen_all(cfg, force)? {
        let what = match o {
            GenOutcome::Generated => "generated",
            GenOutcome::UpToDate => "up to date",
        };
        eprintln!("gen {t}: {what}");
    }
    Ok(())
}

fn run(cfg: &RunConfig, opts: &RunOpts, force: bool) -> Result<Vec<String>, Failure> {
    let report = run_all(cfg, RunFlags { resume: opts.resume, force })?;
    let mut problems = Vec::new();
    for (name, msg) in &report.adapter_failures {
        eprintln!("adapter {name}: {msg}");
        problems.push(format!("adapter {name} failed to start"));
    }
    for r in &report.runs {
        match &r.skipped {
            Some(why) => eprintln!("run {} {}: skipped ({why})", r.test_id, r.metric),
            None => eprintln!("run {} {}: {}/{} cells failed", r.test_id, r.metric, r.failed_cells, r.total_cells),
        }
    }
    if report.failed_cells() > 0 {
        problems.push(format!("{} cells failed", report.failed_cells()));
    }
    Ok(problems)
}

fn score(cfg: &RunConfig) -> Result<Vec<String>, Failure> {
    let pack = resolve_pack(&cfg.reference_pack)?;
    for w in &pack.warnings {
        eprintln!("warning: {w}");
    }
    let s = score_all(cfg, &pack)?;
    for r in &s.records {
        let v = r.value.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let flag = if r.degenerate { " (degenerate)" } else { "" };
        println!("{}\t{}\t{:?}\t{v}{flag}", r.metric, r.test_id, r.score_type);
    }
    for u in &s.unscorable {
        println!("{}\t{}\tunscorable\t{}", u.metric, u.test_id, u.reason);
    }
    let mut problems = Vec::new();
    for u in &s.failed {
        eprintln!("score {} {}: {}", u.test_id, u.metric, u.reason);
        problems.push(format!("{} {} failed to score", u.test_id, u.metric));
    }
    if s.masked_cells > 0 {
        problems.push(format!("{} masked cells in scored surfaces", s.masked_cells));
    }
    Ok(problems)
}

fn report(results: PathBuf, out: PathBuf, reproducible: bool) -> Result<(), Failure> {
    let r = render_report(&results, &out, reproducible).map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("report: {} figures, {} metrics -> {}", r.figures, r.metrics.len(), out.join("index.html").display());
    Ok(())
}

fn strict_check(strict: bool, problems: Vec<String>) -> Result<(), Failure> {
    if strict && !problems.is_empty() {
        return Err(Failure::Strict(problems.join("; ")));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Gen { common, force } => {
            let cfg = load_config(&common, &[])?;
            with_pool(cfg.thread_count(), || gen(&cfg, force))
        }
        Cmd::Run { common, opts, force } => {
            let cfg = load_config(&common, &opts.adapters)?;
            let problems = with_pool(cfg.thread_count(), || run(&cfg, &opts, force))?;
            strict_check(opts.strict, problems)
        }
        Cmd::Score { common, strict } => {
            let cfg = load_config(&common, &[])?;
            strict_check(strict, score(&cfg)?)
        }
        Cmd::Report { common, results, reproducible } => {
            let cfg = load_config(&common, &[])?;
            let results = results.unwrap_or_else(|| cfg.output.clone());
            let out = common.out.map(|o| o.join("report")).unwrap_or_else(|| results.join("report"));
            report(results, out, reproducible || cfg.reproducible)
        }
        Cmd::All { common, opts, force, reproducible } => {
            let cfg = load_config(&common, &opts.adapters)?;
            let mut problems = with_pool(cfg.thread_count(), || -> Result<_, Failure> {
                gen(&cfg, force)?;
                run(&cfg, &opts, force)
            })?;
            problems.extend(score(&cfg)?);
            report(cfg.output.clone(), cfg.report_dir(), reproducible || cfg.reproducible)?;
            strict_check(opts.strict, problems)
        }
        Cmd::Metrics { cmd: MetricsCmd::List } => {
            println!("name\tinput_space\thigher_is_better\tvideo\tcolor");
            for m in native_metrics() {
                let d = m.descriptor();
                println!("{}\t{:?}\t{}\t{}\t{}", d.name, d.input_space, d.higher_is_better, d.supports_video, d.color);
            }
            println!("oracle\tEncodedSrgb\tfalse\ttrue\ttrue");
            Ok(())
        }
        Cmd::Refpack { cmd: RefpackCmd::Export { model, out } } => {
            let pack = match model {
                PackModel::Castle => build_pack(&CastleCsf),
                PackModel::Synthetic => build_pack(&SyntheticCsf::default()),
            };
            save_reference_pack(&pack, &out).map_err(|e| Failure::Runtime(e.to_string()))?;
            eprintln!("wrote {} entries to {}", pack.entries.len(), out.display());
            Ok(())
        }
        Cmd::AdapterServe { metric } => {
            let m = lookup(&metric, None).map_err(|e| Failure::Config(e.to_string()))?;
            let stdin = io::stdin().lock();
            let stdout = BufWriter::new(io::stdout().lock());
            serve(m.as_ref(), None, stdin, stdout).map_err(|e| Failure::Runtime(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Strict(m)) => {
            eprintln!("strict mode: {m}");
            ExitCode::from(EXIT_STRICT)
        }
    }
}
