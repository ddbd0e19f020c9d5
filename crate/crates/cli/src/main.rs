use std::io;
use std::process::ExitCode;

use affmatch_cli::commands::{self, Cli, Command};
use affmatch_cli::http::{router, AppState};
use affmatch_cli::Loaded;
use anyhow::{Context, Result};
use clap::Parser;
use log::{error, info};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(verbose: u8, configured: Option<&str>) {
    let level = match verbose {
        0 => configured.unwrap_or("warn"),
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn run(cli: Cli) -> Result<()> {
    let app = commands::load_app_config(&cli)?;
    init_logging(cli.verbose, app.log.as_deref());
    let mut stdout = io::stdout().lock();
    match &cli.command {
        Command::Index(args) => commands::run_index(args, &app, &mut stdout),
        Command::Match(args) => commands::run_match(args, &app, commands::stdin(), &mut stdout),
        Command::Evaluate(args) => commands::run_evaluate(args, &app, &mut stdout).map(|_| ()),
        Command::Serve(args) => {
            let (bind, build_dir, configs) = commands::serve_settings(args, &app)?;
            serve(bind, build_dir, configs)
        }
    }
}

#[tokio::main]
async fn serve(
    bind: String,
    build_dir: std::path::PathBuf,
    configs: std::collections::BTreeMap<affmatch::RegistryKind, affmatch::MatchConfig>,
) -> Result<()> {
    let state = AppState::new();
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match Loaded::from_dir(&build_dir, &configs) {
        Ok(loaded) => {
            info!("loaded {} snapshot(s) from {}", loaded.snapshots.len(), build_dir.display());
            loader.install(loaded);
        }
        Err(e) => error!("loading snapshots from {}: {e:#}", build_dir.display()),
    });

    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .with_context(|| format!("binding {bind}"))?;
    info!("listening on {bind}");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
