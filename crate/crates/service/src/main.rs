use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use cgm_service::{router, AppState, Store, DEFAULT_MAX_TIMEOUT};
use clap::Parser;

#[derive(Parser)]
#[command(name = "cgm-service", version, about = "HTTP API for constrained goal model reasoning")]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Append-only JSON-lines file holding models and scenarios.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Upper bound on any solve, in seconds.
    #[arg(long, default_value_t = DEFAULT_MAX_TIMEOUT.as_secs_f64())]
    max_timeout: f64,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args = Args::parse();
    if !(args.max_timeout.is_finite() && args.max_timeout > 0.0) {
        eprintln!("error: invalid --max-timeout {}", args.max_timeout);
        return ExitCode::from(2);
    }
    let store = match &args.state {
        Some(p) => match Store::open(p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => Store::default(),
    };
    let app = router(AppState::new(store, Duration::from_secs_f64(args.max_timeout)));
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.bind);
            return ExitCode::from(2);
        }
    };
    tracing::info!("listening on {}", args.bind);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
