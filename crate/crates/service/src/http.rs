use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::api::{self, ApiError, ErrorKind, DEFAULT_VARIANTS};
use crate::snapshot::{SnapshotStore, StoreError};

/// Every response carries the version of the snapshot that produced it.
pub const VERSION_HEADER: &str = "x-snapshot-version";

type Shared = Arc<SnapshotStore>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/model", get(model))
        .route("/api/whatif", post(whatif))
        .route("/api/variants", get(variants))
        .route("/api/reports", get(reports))
        .route("/api/reports/static/{id}", get(static_report))
        .route("/api/reports/pivot/{id}", get(pivot_report))
        .route("/api/rules/trace", post(trace))
        .route("/api/reload", post(reload))
        .fallback(not_found)
        .with_state(store)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(store: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}

fn respond(version: u64, status: StatusCode, content_type: &'static str, body: Vec<u8>) -> Response {
    let mut r = Response::new(Body::from(body));
    *r.status_mut() = status;
    let headers = r.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    headers.insert(VERSION_HEADER, HeaderValue::from(version));
    r
}

fn json<T: Serialize>(version: u64, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("response types serialize");
    respond(version, StatusCode::OK, "application/json", body)
}

fn error(version: u64, e: &ApiError) -> Response {
    let status = match e.kind {
        ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
    };
    let body = serde_json::to_vec(e).expect("errors serialize");
    respond(version, status, "application/json", body)
}

fn reply<T: Serialize>(version: u64, r: Result<T, ApiError>) -> Response {
    match r {
        Ok(v) => json(version, &v),
        Err(e) => error(version, &e),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("bad_json", e.to_string()))
}

fn parse_number<T: std::str::FromStr>(
    q: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| {
            v.parse().map_err(|_| {
                ApiError::bad_request("bad_query", format!("`{key}` is not a valid number: {v}"))
            })
        })
        .transpose()
}

async fn health(State(store): State<Shared>) -> Response {
    let s = store.current();
    json(s.version, &api::health(&s))
}

async fn model(State(store): State<Shared>) -> Response {
    let s = store.current();
    json(s.version, &api::model_view(&s))
}

async fn whatif(State(store): State<Shared>, body: Bytes) -> Response {
    let s = store.current();
    reply(s.version, parse_body(&body).and_then(|req| api::whatif(&s, &req)))
}

async fn variants(State(store): State<Shared>, Query(q): Query<BTreeMap<String, String>>) -> Response {
    let s = store.current();
    let result = (|| {
        let limit = parse_number(&q, "limit")?.unwrap_or(DEFAULT_VARIANTS);
        let param = parse_number(&q, "param")?;
        api::variants(&s, limit, param, true)
    })();
    reply(s.version, result)
}

async fn reports(State(store): State<Shared>) -> Response {
    let s = store.current();
    json(s.version, &api::report_index(&s))
}

async fn static_report(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    let s = store.current();
    match api::static_report(&s, &id) {
        Ok(xml) => respond(s.version, StatusCode::OK, "application/xml", xml),
        Err(e) => error(s.version, &e),
    }
}

async fn pivot_report(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    let s = store.current();
    match api::pivot_report(&s, &id) {
        Ok(csv) => respond(s.version, StatusCode::OK, "text/csv", csv),
        Err(e) => error(s.version, &e),
    }
}

async fn trace(State(store): State<Shared>, body: Bytes) -> Response {
    let s = store.current();
    reply(s.version, parse_body(&body).and_then(|req| api::trace(&s, &req)))
}

async fn reload(State(store): State<Shared>) -> Response {
    let task = {
        let store = Arc::clone(&store);
        tokio::task::spawn_blocking(move || store.reload())
    };
    match task.await.expect("reload task does not panic") {
        Ok(s) => json(s.version, &api::health(&s)),
        Err(e) => {
            let detail = match &e {
                StoreError::Load(load) => load.to_string(),
                StoreError::Invalid(report) => report.to_string(),
            };
            error(
                store.current().version,
                &ApiError::unprocessable("reload_failed", detail),
            )
        }
    }
}

async fn not_found(State(store): State<Shared>) -> impl IntoResponse {
    error(
        store.current().version,
        &ApiError::not_found("no_route", "no such endpoint"),
    )
}
