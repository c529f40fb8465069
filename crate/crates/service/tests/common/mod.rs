#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use innotree_service::config::Config;
use innotree_service::http::{router, VERSION_HEADER};
use innotree_service::SnapshotStore;
use tempfile::TempDir;
use tower::ServiceExt;

pub const STATIC_IDS: [&str; 4] = [
    "cost_by_criterion",
    "cost_by_program",
    "peak_spend_by_alternative",
    "outcomes_by_direction",
];
pub const PIVOT_IDS: [&str; 4] = [
    "actual_criterion_by_program",
    "planned_alternative_by_direction",
    "commercial_actual_by_alternative",
    "jobs_alternative_by_direction",
];

pub fn example_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/example")
}

pub fn golden(name: &str) -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// A private copy of the example data set.
pub fn copy_example() -> TempDir {
    let dir = tempfile::tempdir().expect("temp dir");
    for entry in std::fs::read_dir(example_dir()).expect("example dir") {
        let entry = entry.expect("dir entry");
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).expect("copy");
    }
    dir
}

pub fn store(dir: &Path) -> Arc<SnapshotStore> {
    let path = dir.join("config.json");
    let cfg = Config::load(&path).expect("config").resolve(&path, None);
    Arc::new(SnapshotStore::open(cfg).expect("valid example"))
}

pub fn app(dir: &Path) -> Router {
    router(store(dir))
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn header_version(&self) -> u64 {
        self.headers[VERSION_HEADER].to_str().unwrap().parse().unwrap()
    }

    pub fn content_type(&self) -> &str {
        self.headers["content-type"].to_str().unwrap()
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

pub fn cli(args: &[&str]) -> Output {
    cli_with_env(args, &[])
}

pub fn cli_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_innotree"));
    cmd.args(args).env_remove("INNOTREE_DATA");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run innotree")
}

pub fn example_config() -> String {
    example_dir().join("config.json").to_string_lossy().into_owned()
}
