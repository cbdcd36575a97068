//! HTTP API and command line for the Open Data chatbot. The models, dialogue
//! logic and catalog search live in `odbot-core`.

pub mod api;
pub mod app;
pub mod config;

use std::time::Duration;

use anyhow::Context;
use tokio::net::TcpListener;

use crate::api::{router, AppState};
use crate::config::ServeArgs;

/// Binds the port, then loads the models in the background; requests that
/// need them get 503 until loading finishes. A load failure stops the
/// server with that error.
pub async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    app::check_serving_files(&args.data)?;
    let state = AppState::new(Duration::from_secs(args.ttl_minutes * 60));
    let app = router(state.clone(), &args.allowed_origin)?;
    let listener = TcpListener::bind(("0.0.0.0", args.port))
        .await
        .with_context(|| format!("binding port {}", args.port))?;
    log::info!("listening on {}", listener.local_addr()?);

    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    let data = args.data.clone();
    let pipeline = tokio::task::spawn_blocking(move || app::load_pipeline(&data))
        .await
        .context("model loading panicked")??;
    state.set_pipeline(pipeline);
    server.await.context("server task panicked")??;
    Ok(())
}
