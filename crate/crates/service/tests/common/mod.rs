#![allow(dead_code)]

use axum::body::{to_bytes, Body, Bytes};
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tower::ServiceExt;
use volstc_core::{GridSpec, SpaceTimeVolume, ValueRange};

/// 64 x 64 x 100 volume, background 5, one block at x 20..30, y 25..35, t 40..=60 valued 90.
pub fn block_volume() -> SpaceTimeVolume {
    let grid = GridSpec::new((100.0, 30.0, 110.0, 40.0), 64, 64).unwrap();
    SpaceTimeVolume::from_fn(grid, 100, ValueRange::new(0.0, 100.0).unwrap(), |x, y, t| {
        if (20..30).contains(&x) && (25..35).contains(&y) && (40..=60).contains(&t) {
            90.0
        } else {
            5.0
        }
    })
    .unwrap()
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, HeaderMap, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, headers, bytes)
}

pub async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, _, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}
