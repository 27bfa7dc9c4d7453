use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use tower_http::services::ServeDir;

use combodose_conduct::{router, Store};

#[derive(Parser)]
#[command(
    name = "combodose-conduct",
    version,
    about = "Serve the trial conduct API"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory of session logs; sessions are kept in memory only when omitted.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Static files (the built web console) served at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let store = match &args.data_dir {
        Some(dir) => match Store::open(dir) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => Store::in_memory(),
    };
    let mut app = router(Arc::new(store));
    if let Some(ui) = &args.ui {
        app = app.fallback_service(ServeDir::new(ui));
    }
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.addr);
            return ExitCode::from(3);
        }
    };
    eprintln!("listening on http://{}", args.addr);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
