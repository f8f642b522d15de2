use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use abstain_core::config::AppConfig;
use abstain_gateway::{router, AppState, Snapshot};

#[derive(Parser)]
#[command(name = "abstain-gateway", version, about = "Answer-or-abstain HTTP gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve decisions over HTTP. SIGHUP reloads the config file.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `gateway.listen` from the config.
        #[arg(long)]
        listen: Option<String>,
    },
}

fn load(path: &Path) -> anyhow::Result<Snapshot> {
    let cfg = AppConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(Snapshot::from_config(cfg)?)
}

#[cfg(unix)]
fn watch_reload(state: AppState, path: PathBuf) {
    use tokio::signal::unix::{signal, SignalKind};
    tokio::spawn(async move {
        let Ok(mut hup) = signal(SignalKind::hangup()) else {
            tracing::warn!("SIGHUP handler unavailable; reload disabled");
            return;
        };
        while hup.recv().await.is_some() {
            match load(&path) {
                Ok(s) => {
                    state.reload(s);
                    tracing::info!(config = %path.display(), "configuration reloaded");
                }
                Err(e) => tracing::error!(error = %format!("{e:#}"), "reload failed; keeping old configuration"),
            }
        }
    });
}

#[cfg(not(unix))]
fn watch_reload(_: AppState, _: PathBuf) {}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let Cli {
        command: Command::Serve { config, listen },
    } = Cli::parse();

    let snapshot = load(&config)?;
    let addr = listen.unwrap_or_else(|| snapshot.config.gateway.listen.clone());
    let state = AppState::new(snapshot);
    watch_reload(state.clone(), config);

    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
