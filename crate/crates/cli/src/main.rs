//! Batch runner: executes the audit experiments, writes one result file per
//! experiment (sectioned CSV or JSON), a summary verdict file, formal-method
//! artifacts, and a run manifest.

use anyhow::{bail, Context, Result};
use auditcert::harness::{self, CheckStatus, ExperimentResult};
use auditcert::rational::{parse_rational, Q};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "auditcert",
    version,
    about = "Reproduces manipulation-robustness audit experiments with exact arithmetic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; command-line flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Audit budget for the random experiment (exact decimal or n/d).
    #[arg(long, global = true)]
    tau: Option<String>,

    /// Extra validation threshold for protocol-sensitivity (repeatable).
    #[arg(long, global = true)]
    rho: Vec<String>,

    /// Base seed for the random experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Instance count for the random experiment.
    #[arg(long, global = true)]
    instances: Option<usize>,

    /// Grid step denominator k (masses are multiples of 1/k).
    #[arg(long, global = true)]
    grid_step: Option<u64>,

    /// Output directory (created if absent).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// External SMT solver as name=path; repeatable.
    #[arg(long = "solver", global = true, value_name = "NAME=PATH")]
    solvers: Vec<String>,

    /// Result file format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Ten-variant case study: budget table, trajectories, certificates.
    Deterministic,
    /// Generated-catalog stress test with aggregate tolerance checks.
    Random,
    /// HateCheck-derived class masses and harms at one budget.
    Hatecheck,
    /// Partition, coverage, and grid violations across validation thresholds.
    ProtocolSensitivity,
    /// Certified-ceiling sweep over coverage and disagreement slack.
    Sweep,
    /// Exhaustive strategy-grid verification on the six-variant model.
    Grid,
    /// SMT query emission plus optional external-solver runs.
    Smt,
    /// Bounded audit MDP values and model emission.
    Mdp,
    /// Every experiment in sequence.
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// File-config mirror of the flags. Flags win field by field.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    tau: Option<String>,
    rho: Option<Vec<String>>,
    seed: Option<u64>,
    instances: Option<usize>,
    grid_step: Option<u64>,
    out_dir: Option<PathBuf>,
    solvers: Option<BTreeMap<String, PathBuf>>,
    format: Option<String>,
}

struct Settings {
    tau: Q,
    extra_rhos: Vec<Q>,
    seed: u64,
    instances: usize,
    grid_step: u64,
    out_dir: PathBuf,
    solvers: Vec<(String, PathBuf)>,
    format: Format,
}

fn parse_q(label: &str, text: &str) -> Result<Q> {
    parse_rational(text).with_context(|| format!("invalid {label} value {text:?}"))
}

fn resolve(cli: &Cli) -> Result<Settings> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let tau_text = cli
        .tau
        .clone()
        .or(file.tau)
        .unwrap_or_else(|| "0.20".to_string());
    let rho_texts = if cli.rho.is_empty() {
        file.rho.unwrap_or_default()
    } else {
        cli.rho.clone()
    };
    let mut solvers: BTreeMap<String, PathBuf> = file.solvers.unwrap_or_default();
    for entry in &cli.solvers {
        let Some((name, path)) = entry.split_once('=') else {
            bail!("--solver expects name=path, got {entry:?}");
        };
        solvers.insert(name.to_string(), PathBuf::from(path));
    }
    let format = match (&cli.format, file.format.as_deref()) {
        (Some(f), _) => *f,
        (None, Some("csv")) => Format::Csv,
        (None, Some("json")) => Format::Json,
        (None, Some(other)) => bail!("config format must be csv or json, got {other:?}"),
        (None, None) => Format::Csv,
    };

    Ok(Settings {
        tau: parse_q("tau", &tau_text)?,
        extra_rhos: rho_texts
            .iter()
            .map(|r| parse_q("rho", r))
            .collect::<Result<_>>()?,
        seed: cli.seed.or(file.seed).unwrap_or(1),
        instances: cli.instances.or(file.instances).unwrap_or(500),
        grid_step: cli.grid_step.or(file.grid_step).unwrap_or(20),
        out_dir: cli
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        solvers: solvers.into_iter().collect(),
        format,
    })
}

/// Single sectioned CSV per experiment: `# table:` comment lines separate
/// the tables, a final `# checks` section carries the verdicts. The comment
/// prefix matches the catalog file format, so each section reads back with
/// any CSV reader configured for `#` comments.
fn result_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("# experiment: {}\n", result.experiment));
    out.push_str(&format!("# input_digest: {}\n", result.input_digest));
    for (key, value) in &result.provenance {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    for table in &result.tables {
        out.push_str(&format!("# table: {}\n", table.name));
        out.push_str(&table.to_csv());
    }
    out.push_str("# table: checks\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "expected", "actual", "status"])
        .expect("in-memory write");
    for check in &result.checks {
        let status = match check.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skip => "skip",
        };
        w.write_record([&check.name, &check.expected, &check.actual, status])
            .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

fn write_result(result: &ExperimentResult, settings: &Settings) -> Result<()> {
    let (name, content) = match settings.format {
        Format::Csv => (format!("{}.csv", result.experiment), result_csv(result)),
        Format::Json => (
            format!("{}.json", result.experiment),
            serde_json::to_string_pretty(result).context("serializing result")? + "\n",
        ),
    };
    let path = settings.out_dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    if !result.artifacts.is_empty() {
        let formal_dir = settings.out_dir.join("formal");
        fs::create_dir_all(&formal_dir)
            .with_context(|| format!("creating {}", formal_dir.display()))?;
        for artifact in &result.artifacts {
            let artifact_path = formal_dir.join(&artifact.name);
            fs::write(&artifact_path, &artifact.content)
                .with_context(|| format!("writing {}", artifact_path.display()))?;
        }
    }
    Ok(())
}

fn run_one(command: Command, settings: &Settings) -> Vec<ExperimentResult> {
    match command {
        Command::Deterministic => vec![harness::run_deterministic()],
        Command::Random => vec![harness::run_random(
            settings.instances,
            &settings.tau,
            settings.seed,
        )],
        Command::Hatecheck => vec![harness::run_hatecheck()],
        Command::ProtocolSensitivity => {
            vec![harness::run_protocol_thresholds(&settings.extra_rhos)]
        }
        Command::Sweep => vec![harness::run_sensitivity_sweep()],
        Command::Grid => vec![harness::run_grid(settings.grid_step)],
        Command::Smt => vec![harness::run_smt(&settings.solvers)],
        Command::Mdp => vec![harness::run_mdp()],
        Command::All => [
            Command::Deterministic,
            Command::Random,
            Command::Hatecheck,
            Command::ProtocolSensitivity,
            Command::Sweep,
            Command::Grid,
            Command::Smt,
            Command::Mdp,
        ]
        .into_iter()
        .flat_map(|c| run_one(c, settings))
        .collect(),
    }
}

fn write_summary(results: &[ExperimentResult], out_dir: &Path) -> Result<bool> {
    let mut lines = Vec::new();
    let mut totals = (0usize, 0usize, 0usize);
    for result in results {
        lines.extend(result.summary_lines());
        for check in &result.checks {
            totals.0 += 1;
            match check.status {
                CheckStatus::Fail => totals.1 += 1,
                CheckStatus::Skip => totals.2 += 1,
                CheckStatus::Pass => {}
            }
        }
    }
    let verdict = if totals.1 == 0 { "PASS" } else { "FAIL" };
    lines.push(format!(
        "VERDICT: {verdict} ({} checks, {} failed, {} skipped)",
        totals.0, totals.1, totals.2
    ));
    let text = lines.join("\n") + "\n";
    let path = out_dir.join("summary.txt");
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    Ok(totals.1 == 0)
}

fn run(cli: &Cli) -> Result<bool> {
    let settings = resolve(cli)?;
    fs::create_dir_all(&settings.out_dir)
        .with_context(|| format!("creating {}", settings.out_dir.display()))?;
    let results = run_one(cli.command, &settings);
    for result in &results {
        write_result(result, &settings)?;
    }
    let refs: Vec<&ExperimentResult> = results.iter().collect();
    let manifest_path = settings.out_dir.join("manifest.json");
    fs::write(&manifest_path, harness::manifest(&refs) + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    write_summary(&results, &settings.out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
