//! `shrinkerlab`: deterministic runs of the numerical laboratory.
//!
//! Exit codes: 0 all audits pass, 1 invalid input, 2 numerical or search
//! failure, 3 an audited inequality failed.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shrinkerlab::io::{sha256_hex, to_stable_json, Manifest, MANIFEST_NAME};
use shrinkerlab::{Error, Result};

use crate::commands::Run;
use crate::config::{
    default_formats, AncientParams, AvoidParams, CommandKind, DensityParams, DigestInput, FlowParams, Format,
    ModesParams, Params, ReportParams, RunConfig, SolitonParams, SpectrumParams, DEFAULT_OUTPUT, OUTPUT_ENV,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "shrinkerlab", version, about = "Numerical laboratory for rotationally symmetric self-shrinkers")]
struct Cli {
    /// JSON run configuration; replaces the subcommand and its flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overridden by the SHRINKERLAB_OUTPUT environment variable.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    formats: Option<Vec<Format>>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a shrinker, conical end or expander profile.
    Soliton(SolitonParams),
    /// Eigenvalues of the stability operator.
    Spectrum(SpectrumParams),
    /// Rescaled flow of a graph over a shrinker.
    Flow(FlowParams),
    /// Spectral mode dynamics of a flow.
    Modes(ModesParams),
    /// Ancient solutions by fixed-point iteration.
    Ancient(AncientParams),
    /// Gaussian density, entropy and monotonicity.
    Density(DensityParams),
    /// Conformal distance, avoidance and intersection probes.
    Avoid(AvoidParams),
    /// Merge the audits of finished runs.
    Report(ReportParams),
}

impl Command {
    fn into_params(self) -> Params {
        match self {
            Command::Soliton(p) => Params::Soliton(p),
            Command::Spectrum(p) => Params::Spectrum(p),
            Command::Flow(p) => Params::Flow(p),
            Command::Modes(p) => Params::Modes(p),
            Command::Ancient(p) => Params::Ancient(p),
            Command::Density(p) => Params::Density(p),
            Command::Avoid(p) => Params::Avoid(p),
            Command::Report(p) => Params::Report(p),
        }
    }
}

#[derive(Debug)]
struct Resolved {
    params: Params,
    seed: u64,
    output_dir: PathBuf,
    formats: Vec<Format>,
}

fn resolve(cli: Cli) -> Result<Resolved> {
    let (params, mut seed, mut out, mut formats) = match (cli.config, cli.command) {
        (Some(_), Some(_)) => return Err(Error::Validation("pass either --config or a subcommand, not both".into())),
        (None, None) => return Err(Error::Validation("no command given; run with --help for usage".into())),
        (None, Some(cmd)) => (cmd.into_params(), 0, None, default_formats()),
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Validation(format!("malformed config {}: {e}", path.display())))?;
            (Params::from_table(cfg.command, &cfg.params)?, cfg.seed, cfg.output_dir, cfg.formats)
        }
    };
    if let Some(s) = cli.seed {
        seed = s;
    }
    if let Some(o) = cli.output_dir {
        out = Some(o);
    }
    if let Some(f) = cli.formats {
        formats = f;
    }
    if let Some(env) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        out = Some(PathBuf::from(env));
    }
    formats.sort();
    formats.dedup();
    if formats.is_empty() {
        return Err(Error::Validation("formats must name at least one of csv, json".into()));
    }
    Ok(Resolved { params, seed, output_dir: out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)), formats })
}

fn execute(r: Resolved) -> Result<bool> {
    let command = r.params.command();
    let table = r.params.to_table()?;
    let input = DigestInput { command, params: &table, seed: r.seed, formats: &r.formats, version: VERSION };
    let config_digest = sha256_hex(to_stable_json(&input)?.as_bytes());
    let mut run = Run::new(&r.output_dir, r.formats.clone())?;
    let echo = RunConfig { command, params: table.clone(), seed: r.seed, output_dir: None, formats: r.formats.clone() };
    run.json_always("config.json", &echo)?;
    commands::execute(&r.params, r.seed, &mut run)?;
    if command != CommandKind::Report {
        for a in &run.audits {
            println!("{:<28} {:<15} {}", a.name, report::status_word(a.status), a.failures().join(", "));
        }
    }
    let root = run.root().to_path_buf();
    let manifest = run.finish(Manifest {
        tool: "shrinkerlab".into(),
        version: VERSION.into(),
        command: command.name().into(),
        seed: r.seed,
        config_digest,
        outputs: Default::default(),
        audits: Vec::new(),
        passed: false,
    })?;
    println!("manifest: {}", root.join(MANIFEST_NAME).display());
    Ok(manifest.passed)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::SearchFailure(_) => 2,
        Error::Validation(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
    }
}

fn emit_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return emit_error("validation", e.render().to_string().trim(), 1);
        }
    };
    match resolve(cli).and_then(execute) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => emit_error(e.kind(), &e.to_string(), exit_code(&e)),
    }
}
