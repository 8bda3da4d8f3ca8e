use std::sync::Arc;

use disc_service::{app, AppState, Config};

#[tokio::main]
async fn main() {
    let config = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let state = match AppState::new(&config) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("error: loading the store: {}", e.message);
            std::process::exit(1);
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: binding {}: {e}", config.bind);
            std::process::exit(1);
        }
    };
    eprintln!("listening on {}", config.bind);
    if let Err(e) = axum::serve(listener, app(state)).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
