mod common;

use std::sync::Arc;

use axum::http::{Method, StatusCode};
use serde_json::{json, Value};
use volstc_core::format::save_volume;
use volstc_core::render::{ContextOptions, FrameMeta};
use volstc_core::Vec3;
use volstc_service::api::{router, META_HEADER, REVISION_HEADER};
use volstc_service::session::SessionState;
use volstc_service::wire::decode_packet;
use volstc_service::Engine;

use common::{block_volume, call, call_json};

fn setup() -> (Arc<Engine>, axum::Router, String) {
    let engine = Arc::new(Engine::new(ContextOptions::default()));
    let id = engine.add_volume(block_volume(), None);
    let app = router(engine.clone());
    (engine, app, id)
}

#[tokio::test]
async fn volume_registration_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("block.vstc");
    save_volume(&block_volume(), &path).unwrap();
    let (_, app, _) = setup();

    let (s, meta) = call_json(&app, Method::POST, "/volumes", Some(json!({ "path": path }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((meta["m"].as_u64(), meta["n"].as_u64(), meta["steps"].as_u64()), (Some(64), Some(64), Some(100)));
    let id = meta["id"].as_str().unwrap().to_owned();
    let (s, again) = call_json(&app, Method::GET, &format!("/volumes/{id}/meta"), None).await;
    assert_eq!((s, again), (StatusCode::OK, meta));

    let (s, body) = call_json(&app, Method::POST, "/volumes", Some(json!({ "path": dir.path().join("missing.vstc") }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (s, _) = call_json(&app, Method::GET, "/volumes/nope/meta", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn session_lifecycle() {
    let (_, app, vid) = setup();
    let (s, a) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a["revision"], 0);
    assert_eq!(a["state"]["selection"]["time_range"], json!([0, 99]));
    assert!(a["state"]["selection"]["spotlight"].is_null());
    let (_, b) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    assert_ne!(a["id"], b["id"]);

    let (s, e) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": "missing" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(e["error"].as_str().unwrap().contains("volume not found"));
    let (s, _) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume": vid }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn patches_apply_atomically() {
    let (_, app, vid) = setup();
    let (_, sess) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    let sid = sess["id"].as_str().unwrap();
    let uri = format!("/sessions/{sid}/state");

    let (s, v) = call_json(&app, Method::PATCH, &uri, Some(json!({ "t_lo": 100, "t_hi": 50 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["revision"].as_u64(), v["state"]["selection"]["time_range"].clone()), (Some(1), json!([50, 99])));
    let (_, v) = call_json(&app, Method::PATCH, &uri, Some(json!({ "t_lo": 60, "t_hi": 20 }))).await;
    assert_eq!(v["state"]["selection"]["time_range"], json!([20, 60]));

    let (s, _) = call_json(&app, Method::PATCH, &uri, Some(json!({ "t_lo": 0, "camera": { "vfov": 0.0 } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, Method::PATCH, &uri, Some(json!({ "step": -1 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, Method::PATCH, &uri, Some(json!({ "lambda_q": 1 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (_, v) = call_json(&app, Method::GET, &format!("/sessions/{sid}"), None).await;
    assert_eq!(v["revision"], 2);
    assert_eq!(v["state"]["selection"]["time_range"], json!([20, 60]));

    let (_, v) = call_json(&app, Method::PATCH, &uri, Some(json!({ "lambda_v": 50, "spotlight": { "cx": 10, "cy": 10, "r": 5 } }))).await;
    assert_eq!(v["state"]["settings"]["lambda_v"], 50.0);
    assert_eq!(v["state"]["cluster_params"]["lambda_a"], 75.0);
    let (_, v) = call_json(&app, Method::PATCH, &uri, Some(json!({ "spotlight": null }))).await;
    assert!(v["state"]["selection"]["spotlight"].is_null());
    assert_eq!(v["revision"], 4);
    let (s, _) = call_json(&app, Method::PATCH, "/sessions/none/state", Some(json!({}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn frames_carry_revision_and_meta() {
    let (_, app, vid) = setup();
    let (_, sess) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    let sid = sess["id"].as_str().unwrap();
    let frame_uri = format!("/sessions/{sid}/frame?w=96&h=72");

    let (s, h1, png1) = call(&app, Method::GET, &frame_uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h1["content-type"], "image/png");
    assert_eq!(h1[REVISION_HEADER], "0");
    assert_eq!(&png1[..8], b"\x89PNG\r\n\x1a\n");
    let (_, _, png2) = call(&app, Method::GET, &frame_uri, None).await;
    assert_eq!(png1, png2);
    let meta: FrameMeta = serde_json::from_str(h1[META_HEADER].to_str().unwrap()).unwrap();
    assert_eq!((meta.width, meta.height, meta.revision), (96, 72, 0));
    assert_eq!(meta.axis_boxes.len(), 6);

    call(&app, Method::PATCH, &format!("/sessions/{sid}/state"), Some(json!({ "lambda_v": 60 }))).await;
    let (_, _, packet) = call(&app, Method::GET, &format!("{frame_uri}&format=packet"), None).await;
    let (rev, meta, png) = decode_packet(&packet).unwrap();
    let meta: FrameMeta = serde_json::from_slice(meta).unwrap();
    assert_eq!((rev, meta.revision), (1, 1));
    assert_eq!(&png[..4], b"\x89PNG");
    assert_ne!(png, &png1[..]);

    let (s, _, _) = call(&app, Method::GET, &format!("/sessions/{sid}/frame?w=0&h=10"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = call(&app, Method::GET, &format!("/sessions/{sid}/frame?w=abc"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = call(&app, Method::GET, "/sessions/zzz/frame", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

fn block_center_pixel(state: &SessionState, w: u32, h: u32) -> (f64, f64) {
    let cam = state.camera_for(w, h);
    let zs = state.settings.z_scale;
    cam.project(Vec3::new(25.0, 30.0, 50.5 * zs)).unwrap()
}

#[tokio::test]
async fn pick_applies_slicing_and_spotlight() {
    let (engine, app, vid) = setup();
    let (_, sess) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    let sid = sess["id"].as_str().unwrap().to_owned();
    // establish the viewport
    call(&app, Method::GET, &format!("/sessions/{sid}/frame?w=128&h=128"), None).await;

    let (s, miss) = call_json(&app, Method::POST, &format!("/sessions/{sid}/pick"), Some(json!({ "px": 1.0, "py": 1.0 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(miss["hit"].is_null());
    assert_eq!(miss["session"]["revision"], 0);

    let state = engine.session(&sid).unwrap().snapshot();
    let (px, py) = block_center_pixel(&state, 128, 128);
    let (s, hit) = call_json(&app, Method::POST, &format!("/sessions/{sid}/pick"), Some(json!({ "px": px, "py": py }))).await;
    assert_eq!(s, StatusCode::OK, "{hit}");
    assert_eq!(hit["hit"]["t_min"], 40);
    assert_eq!(hit["hit"]["t_max"], 60);
    assert_eq!(hit["hit"]["member_count"], 10 * 10 * 21);
    let sel = &hit["session"]["state"]["selection"];
    assert_eq!(sel["time_range"], json!([40, 60]));
    assert_eq!(sel["selected_cluster"], hit["hit"]["id"]);
    assert_eq!(hit["session"]["revision"], 1);
    let spot = &sel["spotlight"];
    let (cx, cy, r) = (spot["cx"].as_f64().unwrap(), spot["cy"].as_f64().unwrap(), spot["r"].as_f64().unwrap());
    for x in 20..30 {
        for y in 25..35 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            assert!(dx * dx + dy * dy <= r * r, "column ({x},{y}) outside the spotlight");
        }
    }

    let (s, _) = call_json(&app, Method::POST, &format!("/sessions/{sid}/pick"), Some(json!({ "px": 500.0, "py": 1.0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(engine.session(&sid).unwrap().snapshot().revision, 1);
}

#[tokio::test]
async fn map_point_and_clusters() {
    let (engine, app, vid) = setup();
    let (_, sess) = call_json(&app, Method::POST, "/sessions", Some(json!({ "volume_id": vid }))).await;
    let sid = sess["id"].as_str().unwrap().to_owned();
    call(&app, Method::GET, &format!("/sessions/{sid}/frame?w=128&h=128"), None).await;
    let state = engine.session(&sid).unwrap().snapshot();
    let (px, py) = state.camera_for(128, 128).project(Vec3::new(12.0, 40.0, 0.0)).unwrap();
    let (_, v) = call_json(&app, Method::POST, &format!("/sessions/{sid}/map_point"), Some(json!({ "px": px, "py": py }))).await;
    let p = v["point"].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() - 12.0).abs() < 1e-6 && (p[1].as_f64().unwrap() - 40.0).abs() < 1e-6);
    let (_, v) = call_json(&app, Method::POST, &format!("/sessions/{sid}/map_point"), Some(json!({ "px": 0.5, "py": 0.5 }))).await;
    assert!(v["point"].is_null());

    let (s, list) = call_json(&app, Method::GET, &format!("/volumes/{vid}/clusters?lambda_a=50&eps=10&min_pts=100"), None).await;
    assert_eq!(s, StatusCode::OK);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 1);
    let keys: Vec<&str> = list[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in ["id", "member_count", "t_min", "t_max", "circle", "value_max", "centroid"] {
        assert!(keys.contains(&k), "{k}");
    }
    let (s, _) = call_json(&app, Method::GET, &format!("/volumes/{vid}/clusters?eps=0"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, none) = call_json(&app, Method::GET, &format!("/volumes/{vid}/clusters?lambda_a=95"), None).await;
    assert_eq!((s, none), (StatusCode::OK, Value::Array(vec![])));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn cluster_detection_runs_once_per_key() {
    let (engine, app, vid) = setup();
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let app = app.clone();
        let uri = format!("/volumes/{vid}/clusters?lambda_a=40&eps=10&min_pts=100");
        tasks.push(tokio::spawn(async move { call_json(&app, Method::GET, &uri, None).await }));
    }
    let mut bodies = Vec::new();
    for t in tasks {
        let (s, b) = t.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(engine.cluster_cache().computations(), 1);
    call_json(&app, Method::GET, &format!("/volumes/{vid}/clusters?lambda_a=41"), None).await;
    assert_eq!(engine.cluster_cache().computations(), 2);
}
