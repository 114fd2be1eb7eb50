use std::net::SocketAddr;
use std::time::Duration;

use clap::Parser;
use otseg_service::{router, AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "otseg-service", version, about = "HTTP service for scribble-driven segmentation")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Solver worker threads.
    #[arg(long, env = "OTSEG_THREADS")]
    threads: Option<usize>,
    /// Sessions whose latest result is kept in memory.
    #[arg(long, default_value_t = 64)]
    max_results: usize,
    /// Idle time after which a session is dropped.
    #[arg(long, default_value_t = 3600)]
    ttl_secs: u64,
    #[arg(long)]
    cors_origin: Option<String>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt().init();
    let args = Args::parse();
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        threads: args.threads.unwrap_or(defaults.threads),
        max_results: args.max_results,
        session_ttl: Duration::from_secs(args.ttl_secs),
        cors_origin: args.cors_origin,
        ..defaults
    };
    tracing::info!(threads = config.threads, "starting");
    let state = AppState::new(config);
    state.spawn_sweeper();
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    tracing::info!(addr = %args.addr, "listening");
    axum::serve(listener, router(state)).await
}
