use clap::Parser;
use textbook_server::{serve, AppState, Cli, ServerConfig};
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = ServerConfig::from(&cli);
    if !config.gateway.mock && config.gateway.api_key.is_none() {
        tracing::warn!("LLM_API_KEY is not set; set MOCK_LLM=1 to run without a provider");
    }
    let state = AppState::new(config)?;
    let listener = TcpListener::bind((cli.bind.as_str(), cli.port)).await?;
    // Tests read this line to find the bound port.
    println!("listening on {}", listener.local_addr()?);
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
