//! JSON-over-HTTP routes. Every response is `{"data": .., "error": ..}`
//! with exactly one of the two set.

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get};
use axum::{Json, Router};
use openlink::bundle::SplitName;
use openlink::graph::Direction;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::{EngineKind, LinkingQuery, OverlayTriple, RankingQuery, WorkbenchError, Workspace};

type Shared = Arc<Workspace>;

impl WorkbenchError {
    fn status(&self) -> StatusCode {
        match self {
            WorkbenchError::UnknownVertex(_)
            | WorkbenchError::UnknownRelation(_)
            | WorkbenchError::UnknownMention(_)
            | WorkbenchError::UnknownTriple(_) => StatusCode::NOT_FOUND,
            WorkbenchError::UnknownEngine(_)
            | WorkbenchError::BadDirection(_)
            | WorkbenchError::BadSplit(_)
            | WorkbenchError::BadRequest(_) => StatusCode::BAD_REQUEST,
            WorkbenchError::NoContexts(_) => StatusCode::UNPROCESSABLE_ENTITY,
            WorkbenchError::EngineUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            WorkbenchError::Eval(_) if self.code() == "no-contexts" => StatusCode::UNPROCESSABLE_ENTITY,
            WorkbenchError::Eval(_) | WorkbenchError::Log(_) | WorkbenchError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

impl IntoResponse for WorkbenchError {
    fn into_response(self) -> Response {
        let body = json!({
            "data": null,
            "error": {"code": self.code(), "message": self.to_string()},
        });
        (self.status(), Json(body)).into_response()
    }
}

fn ok<T: Serialize>(data: T) -> Response {
    Json(json!({"data": data, "error": null})).into_response()
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, WorkbenchError> {
    q.get(key)
        .map(String::as_str)
        .ok_or_else(|| WorkbenchError::BadRequest(format!("missing parameter {key:?}")))
}

fn direction(s: &str) -> Result<Direction, WorkbenchError> {
    Direction::parse(s).ok_or_else(|| WorkbenchError::BadDirection(s.to_owned()))
}

fn number(q: &HashMap<String, String>, key: &str) -> Result<Option<usize>, WorkbenchError> {
    q.get(key)
        .map(|s| {
            s.parse()
                .map_err(|_| WorkbenchError::BadRequest(format!("{key} must be a non-negative integer")))
        })
        .transpose()
}

fn engine(q: &HashMap<String, String>) -> Result<Option<EngineKind>, WorkbenchError> {
    q.get("engine").map(|s| EngineKind::parse(s)).transpose()
}

fn ranking_query(q: &HashMap<String, String>) -> Result<RankingQuery, WorkbenchError> {
    let split = match q.get("split") {
        None => None,
        Some(s) => match SplitName::parse(s) {
            Some(SplitName::Closed) | None => return Err(WorkbenchError::BadSplit(s.clone())),
            Some(n) => Some(n),
        },
    };
    Ok(RankingQuery {
        vertex: required(q, "vertex")?.to_owned(),
        relation: required(q, "relation")?.to_owned(),
        direction: direction(q.get("direction").map_or("tail", String::as_str))?,
        engine: engine(q)?,
        split,
        limit: number(q, "limit")?,
        offset: number(q, "offset")?.unwrap_or(0),
    })
}

fn linking_query(q: &HashMap<String, String>) -> Result<LinkingQuery, WorkbenchError> {
    Ok(LinkingQuery {
        mention: required(q, "mention")?.to_owned(),
        relation: required(q, "relation")?.to_owned(),
        direction: direction(q.get("direction").map_or("tail", String::as_str))?,
        engine: engine(q)?,
        limit: number(q, "limit")?,
        offset: number(q, "offset")?.unwrap_or(0),
    })
}

async fn blocking<T, F>(f: F) -> Result<T, WorkbenchError>
where
    F: FnOnce() -> Result<T, WorkbenchError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| WorkbenchError::Io(std::io::Error::other(e.to_string())))?
}

async fn stats(State(ws): State<Shared>) -> Response {
    ok(ws.stats())
}

async fn ranking(State(ws): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Response {
    let run = async {
        let query = ranking_query(&q)?;
        blocking(move || ws.query_ranking(&query)).await
    };
    match run.await {
        Ok(page) => ok(page),
        Err(e) => e.into_response(),
    }
}

async fn linking(State(ws): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Response {
    let run = async {
        let query = linking_query(&q)?;
        blocking(move || ws.query_linking(&query)).await
    };
    match run.await {
        Ok(page) => ok(page),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct AcceptBody {
    mention: String,
    relation: String,
    vertex: String,
    #[serde(default = "default_direction")]
    direction: String,
    #[serde(default)]
    provenance: Option<String>,
}

fn default_direction() -> String {
    "tail".into()
}

async fn accept(State(ws): State<Shared>, body: Bytes) -> Response {
    let run = || -> Result<_, WorkbenchError> {
        let b: AcceptBody =
            serde_json::from_slice(&body).map_err(|e| WorkbenchError::BadRequest(e.to_string()))?;
        let triple = OverlayTriple {
            mention: b.mention,
            relation: b.relation,
            vertex: b.vertex,
            direction: direction(&b.direction)?,
        };
        ws.accept_triple(triple, b.provenance.as_deref().unwrap_or("workbench"))
    };
    match run() {
        Ok(a) => {
            let status = if a.created { StatusCode::CREATED } else { StatusCode::OK };
            (status, ok(json!({"id": a.id, "created": a.created}))).into_response()
        }
        Err(e) => e.into_response(),
    }
}

async fn retract(State(ws): State<Shared>, Path(id): Path<String>) -> Response {
    let run = || -> Result<_, WorkbenchError> {
        let id: u64 = id
            .parse()
            .map_err(|_| WorkbenchError::BadRequest(format!("bad triple id {id:?}")))?;
        let tombstone = ws.retract_triple(id, "workbench")?;
        Ok(json!({"id": id, "tombstone": tombstone}))
    };
    match run() {
        Ok(v) => ok(v),
        Err(e) => e.into_response(),
    }
}

async fn export(State(ws): State<Shared>) -> Response {
    (
        [(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")],
        ws.export_tsv(),
    )
        .into_response()
}

async fn fallback() -> Response {
    let body = json!({
        "data": null,
        "error": {"code": "not-found", "message": "no such route"},
    });
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

/// Routes over a shared workspace.
pub fn router(ws: Arc<Workspace>) -> Router {
    Router::new()
        .route("/stats", get(stats))
        .route("/ranking", get(ranking))
        .route("/linking", get(linking))
        .route("/triples", axum::routing::post(accept))
        .route("/triples/{id}", delete(retract))
        .route("/export", get(export))
        .fallback(fallback)
        .with_state(ws)
}

/// Serves the workspace on `listener` until `shutdown` resolves.
pub async fn serve<F>(ws: Arc<Workspace>, listener: TcpListener, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    log::info!("workbench listening on {}", listener.local_addr()?);
    axum::serve(listener, router(ws))
        .with_graceful_shutdown(shutdown)
        .await
}
