use anyhow::Context;
use bodyprompt_server::{build_state, router, ApiConfig, Overrides};
use clap::Parser;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = ApiConfig::parse();
    let listen = config.listen;
    let state = build_state(config, Overrides::default())?;
    let log = std::sync::Arc::clone(&state.log);
    let listener = tokio::net::TcpListener::bind(listen).await.with_context(|| format!("binding {listen}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    log.flush()?;
    Ok(())
}
