use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{middleware, Router};
use chrono::NaiveDate;
use thiserror::Error;

use super::{canonical_string, ExportError, Scene};
use crate::ingest::AntennaId;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Scene {
        path: String,
        #[source]
        source: ExportError,
    },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pre-rendered response bodies; nothing is serialized per request.
#[derive(Debug, Clone)]
pub struct ServedScene {
    full: Bytes,
    epochs: HashMap<(AntennaId, NaiveDate), Bytes>,
}

impl ServedScene {
    pub fn new(scene: &Scene) -> Result<Self, ExportError> {
        scene.validate()?;
        let value = scene.to_value();
        let epochs = scene
            .epochs
            .iter()
            .zip(value["epochs"].as_array().expect("epochs serialize as an array"))
            .map(|(e, v)| ((e.antenna_id, e.fire_date), Bytes::from(canonical_string(v))))
            .collect();
        Ok(Self {
            full: Bytes::from(canonical_string(&value)),
            epochs,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ServeError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ServeError::Read {
            path: shown.clone(),
            source,
        })?;
        let scene = Scene::from_json(&text).map_err(|source| ServeError::Scene {
            path: shown.clone(),
            source,
        })?;
        Self::new(&scene).map_err(|source| ServeError::Scene { path: shown, source })
    }

    pub fn full(&self) -> &[u8] {
        &self.full
    }

    pub fn epoch(&self, antenna: AntennaId, date: NaiveDate) -> Option<&[u8]> {
        self.epochs.get(&(antenna, date)).map(|b| &b[..])
    }
}

fn json(body: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn not_found() -> Response {
    (StatusCode::NOT_FOUND, "not found\n").into_response()
}

async fn full_scene(State(s): State<Arc<ServedScene>>) -> Response {
    json(s.full.clone())
}

async fn epoch_slice(State(s): State<Arc<ServedScene>>, UrlPath((antenna, date)): UrlPath<(String, String)>) -> Response {
    let (Ok(antenna), Ok(date)) = (antenna.parse::<AntennaId>(), date.parse::<NaiveDate>()) else {
        return not_found();
    };
    match s.epochs.get(&(antenna, date)) {
        Some(b) => json(b.clone()),
        None => not_found(),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn allow_any_origin(mut res: Response) -> Response {
    res.headers_mut()
        .insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    res
}

pub fn router(scene: Arc<ServedScene>) -> Router {
    Router::new()
        .route("/scene", get(full_scene))
        .route("/scene/epochs/{antenna}/{date}", get(epoch_slice))
        .route("/healthz", get(healthz))
        .fallback(|| async { not_found() })
        .with_state(scene)
        .layer(middleware::map_response(allow_any_origin))
}

/// Loads and checks the scene, then serves it until interrupted. A malformed
/// scene is rejected before the socket is bound.
pub fn serve(scene_path: &Path, addr: &str) -> Result<(), ServeError> {
    let scene = Arc::new(ServedScene::load(scene_path)?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind {
            addr: addr.to_owned(),
            source,
        })?;
        let local: SocketAddr = listener.local_addr()?;
        log::info!("serving {} on http://{local}", scene_path.display());
        eprintln!("listening on http://{local}");
        axum::serve(listener, router(scene))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
