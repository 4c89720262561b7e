//! HTTP facade over the study engine for the participant UI, scripted bots
//! and operators.

pub mod app;
pub mod config;
pub mod error;

use std::sync::Arc;

use axum::http::HeaderValue;
use axum::Router;
use cef_analytics::report::AnalysisOptions;
use cef_core::explain::llm::{ReplayClient, TextCompletion};
use cef_study::clock::SystemClock;
use cef_study::context::StudyContext;
use cef_study::store::NdjsonStore;
use cef_study::Engine;
use tokio::net::TcpListener;
use tower_http::cors::{AllowHeaders, AllowMethods, AllowOrigin, CorsLayer};
use tower_http::services::{ServeDir, ServeFile};

pub use app::{router, AppState};
pub use config::ApiConfig;
pub use error::{ApiError, Result, ServiceError};

/// Published request and response schemas, by name.
pub mod schemas {
    pub const ALL: [(&str, &str); 8] = [
        ("create_session.request", include_str!("../schemas/create_session.request.json")),
        ("answer.request", include_str!("../schemas/answer.request.json")),
        ("questionnaire.request", include_str!("../schemas/questionnaire.request.json")),
        ("session_created.response", include_str!("../schemas/session_created.response.json")),
        ("next.response", include_str!("../schemas/next.response.json")),
        ("answer_ack.response", include_str!("../schemas/answer_ack.response.json")),
        ("questionnaire_ack.response", include_str!("../schemas/questionnaire_ack.response.json")),
        ("error.response", include_str!("../schemas/error.response.json")),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }
}

fn llm_client(cfg: &ApiConfig) -> Result<Option<Arc<dyn TextCompletion>>> {
    use config::LlmMode;
    Ok(match cfg.llm.mode {
        LlmMode::Off => None,
        LlmMode::Replay => {
            let dir = cfg.llm.replay_dir.as_ref().ok_or_else(|| ServiceError::Config {
                field: "llm.replay_dir".into(),
                reason: "required for replay mode".into(),
            })?;
            Some(Arc::new(ReplayClient::from_dir(dir)?))
        }
        #[cfg(feature = "http-llm")]
        LlmMode::Http => {
            let client = cef_core::explain::llm::HttpClient::from_env(
                cfg.llm.base_url.clone().unwrap_or_default(),
                cfg.llm.model.clone().unwrap_or_default(),
                &cfg.llm.api_key_env,
                std::time::Duration::from_secs(cfg.llm.timeout_secs),
            )?;
            Some(Arc::new(client))
        }
        #[cfg(not(feature = "http-llm"))]
        LlmMode::Http => {
            return Err(ServiceError::Config {
                field: "llm.mode".into(),
                reason: "http needs a build with the http-llm feature".into(),
            })
        }
    })
}

/// Validate `cfg`, open the study's event log and rebuild every session.
pub fn build_state(cfg: &ApiConfig) -> Result<AppState> {
    cfg.validate()?;
    let secret = cfg
        .token_secret
        .clone()
        .unwrap_or_else(|| format!("{}-{}", cfg.study_id, cfg.study_seed));
    let mut ctx = StudyContext::bundled(cfg.study_seed)?.with_token_secret(secret.clone());
    if let Some(client) = llm_client(cfg)? {
        ctx = ctx.clone().with_presenter(ctx.presenter.clone().with_llm(client));
    }
    let store = NdjsonStore::open(cfg.study_dir())?;
    let engine = Engine::open(Arc::new(ctx), Arc::new(store), Arc::new(SystemClock))?;
    Ok(AppState {
        engine: Arc::new(engine),
        balance: cfg.balance,
        admin_token: cfg.admin_token.clone(),
        finish_secret: secret,
        analysis: AnalysisOptions::default(),
    })
}

/// The API plus CORS and static assets as configured.
pub fn app(cfg: &ApiConfig, state: AppState) -> Result<Router> {
    let mut app = router(state);
    if let Some(dir) = &cfg.static_dir {
        let index = ServeFile::new(dir.join("index.html"));
        app = app.fallback_service(ServeDir::new(dir).fallback(index));
    }
    if !cfg.cors_origins.is_empty() {
        let origins = cfg
            .cors_origins
            .iter()
            .map(|o| {
                HeaderValue::from_str(o).map_err(|_| ServiceError::Config {
                    field: "cors_origins".into(),
                    reason: format!("`{o}` is not a valid origin"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods(AllowMethods::list([axum::http::Method::GET, axum::http::Method::POST]))
                .allow_headers(AllowHeaders::list([axum::http::header::AUTHORIZATION, axum::http::header::CONTENT_TYPE])),
        );
    }
    Ok(app)
}

/// Serve on an already bound listener until ctrl-c.
pub async fn serve_on(listener: TcpListener, app: Router) -> Result<()> {
    let addr = listener.local_addr().map_err(|e| ServiceError::io("listener", e))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::io("server", e))
}

pub async fn serve(cfg: ApiConfig) -> Result<()> {
    let state = build_state(&cfg)?;
    let app = app(&cfg, state)?;
    let listener = TcpListener::bind(cfg.bind).await.map_err(|e| ServiceError::io(cfg.bind.to_string(), e))?;
    serve_on(listener, app).await
}
