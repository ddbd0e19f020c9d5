use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use affmatch::evaluation::{evaluate, format_table, load_gold, GoldField, MetricsReport};
use affmatch::{Condition, CriterionCatalog, MatchConfig, RegistryKind, Snapshot, Sources};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::config::{AppConfig, CONFIG_ENV};
use crate::{match_one, parse_condition};

#[derive(Debug, Parser)]
#[command(name = "affmatch", version, about = "Match affiliation strings to registry identifiers")]
pub struct Cli {
    /// Application config (JSON).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build criterion indexes from a registry file and persist a snapshot.
    Index(IndexArgs),
    /// Match affiliation strings against a built registry.
    Match(MatchArgs),
    /// Compute precision and recall against a gold standard.
    Evaluate(EvaluateArgs),
    /// Serve the matcher over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long, value_parser = parse_registry)]
    pub registry: Option<RegistryKind>,
    /// Registry JSON-lines file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// City to employment zone / urban unit mapping.
    #[arg(long)]
    pub geo: Option<PathBuf>,
    /// GRID file whose institutions are projected onto country entries.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub build_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_parser = parse_registry)]
    pub registry: RegistryKind,
    /// A single affiliation. Without it, affiliations are read one per line.
    #[arg(long, conflicts_with = "input")]
    pub query: Option<String>,
    /// File of affiliations, one per line; `-` or absent reads stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Strategy groups (JSON); defaults to the shipped configuration.
    #[arg(long)]
    pub match_config: Option<PathBuf>,
    /// Known fact about the affiliation, `criterion=value`. Repeatable.
    #[arg(long = "condition", value_parser = parse_condition)]
    pub conditions: Vec<Condition>,
    #[arg(long)]
    pub build_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold-standard JSON array.
    #[arg(long)]
    pub gold: PathBuf,
    /// Gold columns to evaluate; defaults to country, grid and rnsr.
    #[arg(long = "registry", value_parser = parse_gold_field)]
    pub fields: Vec<GoldField>,
    /// Where to write the JSON report; stdout table only when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub build_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub build_dir: Option<PathBuf>,
}

fn parse_registry(raw: &str) -> Result<RegistryKind, String> {
    raw.parse().map_err(|e: affmatch::Error| e.to_string())
}

fn parse_gold_field(raw: &str) -> Result<GoldField, String> {
    raw.parse().map_err(|e: affmatch::Error| e.to_string())
}

pub fn load_app_config(cli: &Cli) -> Result<AppConfig> {
    match &cli.config {
        Some(path) => AppConfig::load(path),
        None => Ok(AppConfig::default()),
    }
}

pub fn run_index(args: &IndexArgs, app: &AppConfig, out: &mut impl Write) -> Result<()> {
    let build_dir = args.build_dir.clone().unwrap_or_else(|| app.build_dir());
    let registries: Vec<RegistryKind> = match args.registry {
        Some(registry) => vec![registry],
        None if args.input.is_none() && !app.registries.is_empty() => app.registries.keys().copied().collect(),
        None => bail!("--registry is required"),
    };
    for registry in registries {
        let entries = match (&args.input, app.registries.get(&registry)) {
            (Some(path), _) | (None, Some(path)) => path.clone(),
            (None, None) => bail!("no input file for registry `{registry}`"),
        };
        let geo = args.geo.clone().or_else(|| app.geo_mapping.clone());
        let grid = match (&args.grid, registry) {
            (Some(path), _) => Some(path.clone()),
            (None, RegistryKind::Country) => app.registries.get(&RegistryKind::Grid).cloned(),
            (None, _) => None,
        };
        let sources = Sources {
            registry,
            entries,
            geo,
            grid,
        };
        let snapshot = Snapshot::build(&sources, CriterionCatalog::default())
            .with_context(|| format!("building {registry} indexes from {}", sources.entries.display()))?;
        writeln!(out, "{:<26} {}", "index", "number of elements in index")?;
        for (criterion, size) in snapshot.index.sizes() {
            writeln!(out, "{criterion}: {size}")?;
        }
        let path = Snapshot::path_in(&build_dir, registry);
        snapshot.save(&path)?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

pub fn run_match(args: &MatchArgs, app: &AppConfig, stdin: impl BufRead, out: &mut impl Write) -> Result<()> {
    let build_dir = args.build_dir.clone().unwrap_or_else(|| app.build_dir());
    let config = match args.match_config.as_ref().or(app.match_configs.get(&args.registry)) {
        Some(path) => MatchConfig::load(path)?,
        None => MatchConfig::default_for(args.registry),
    };
    if config.registry != args.registry {
        bail!("match configuration targets `{}`, not `{}`", config.registry, args.registry);
    }
    let snapshot = Snapshot::load(Snapshot::path_in(&build_dir, args.registry))?;
    config.validate(&snapshot.catalog)?;

    let mut emit = |query: &str| -> Result<()> {
        let output = match_one(&snapshot, &config, query, &args.conditions)?;
        writeln!(out, "{}", output.to_json())?;
        Ok(())
    };

    if let Some(query) = &args.query {
        return emit(query);
    }
    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) if path.as_os_str() != "-" => Box::new(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        )),
        _ => Box::new(stdin),
    };
    for line in reader.lines() {
        let line = line?;
        let query = line.trim();
        if !query.is_empty() {
            emit(query)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationFile<'a> {
    gold: String,
    reports: &'a [MetricsReport],
}

pub fn run_evaluate(args: &EvaluateArgs, app: &AppConfig, out: &mut impl Write) -> Result<Vec<MetricsReport>> {
    let build_dir = args.build_dir.clone().unwrap_or_else(|| app.build_dir());
    let gold = load_gold(&args.gold).with_context(|| format!("reading gold file {}", args.gold.display()))?;
    let fields = if args.fields.is_empty() {
        vec![GoldField::Country, GoldField::Grid, GoldField::Rnsr]
    } else {
        args.fields.clone()
    };
    let configs = app.match_configs()?;

    let mut reports = Vec::new();
    for field in fields {
        let Some(registry) = field.registry() else {
            warn!("no matcher exists for `{field}`; its gold ids are ignored");
            reports.push(MetricsReport::empty(field));
            continue;
        };
        let snapshot = Snapshot::load(Snapshot::path_in(&build_dir, registry))?;
        let config = configs
            .get(&registry)
            .cloned()
            .unwrap_or_else(|| MatchConfig::default_for(registry));
        config.validate(&snapshot.catalog)?;
        let matcher = snapshot.matcher();
        let mut failure = None;
        let report = evaluate(
            |affiliation| match matcher.match_affiliation(affiliation, &[], &config) {
                Ok(results) => results.into_iter().map(|r| r.registry_id).collect(),
                Err(e) => {
                    failure.get_or_insert(e);
                    Default::default()
                }
            },
            &gold,
            field,
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        reports.push(report);
    }

    write!(out, "{}", format_table(&reports))?;
    if let Some(path) = &args.report {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(
            file,
            &EvaluationFile {
                gold: args.gold.display().to_string(),
                reports: &reports,
            },
        )?;
    }
    Ok(reports)
}

pub fn serve_settings(args: &ServeArgs, app: &AppConfig) -> Result<(String, PathBuf, BTreeMap<RegistryKind, MatchConfig>)> {
    let bind = args
        .bind
        .clone()
        .or_else(|| app.bind.clone())
        .unwrap_or_else(|| "127.0.0.1:8080".to_string());
    let build_dir = args.build_dir.clone().unwrap_or_else(|| app.build_dir());
    Ok((bind, build_dir, app.match_configs()?))
}

pub fn stdin() -> impl BufRead {
    io::stdin().lock()
}
