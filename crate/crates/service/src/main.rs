use clap::Parser;
use lire_service::{router, AppState};
use std::net::SocketAddr;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "lire-service", about = "HTTP facade over live-region counterfactual search")]
struct Args {
    /// Listen address; loopback by default since there is no authentication.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::default()))).await
}
