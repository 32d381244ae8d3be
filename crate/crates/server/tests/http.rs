//! Endpoint behavior over a real socket.

use glf::api::ApiError;
use glf::config::ExperimentConfig;
use glf::kernels::KernelFamily;
use serde_json::{json, Value};

async fn base() -> String {
    let (addr, _task) = glf_server::spawn_local().await.unwrap();
    format!("http://{addr}")
}

async fn post(base: &str, op: &str, body: Value) -> (u16, Value) {
    let r = reqwest::Client::new().post(format!("{base}/v1/{op}")).json(&body).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

fn config(v: &ExperimentConfig) -> Value {
    serde_json::to_value(v).unwrap()
}

#[tokio::test]
async fn health_answers_ok() {
    let b = base().await;
    let r = reqwest::get(format!("{b}/health")).await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(r.text().await.unwrap(), "ok");
}

#[tokio::test]
async fn synth_returns_rows() {
    let b = base().await;
    let (status, body) = post(&b, "synth", json!({"dataset": "synth_1d", "n": 40, "seed": 3})).await;
    assert_eq!(status, 200);
    assert_eq!(body["train"]["x"].as_array().unwrap().len(), 40);
    assert_eq!(body["test"]["y"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn malformed_body_is_a_validation_error() {
    let b = base().await;
    let (status, body) = post(&b, "fit", json!({"config": 3})).await;
    assert_eq!(status, 400);
    let e: ApiError = serde_json::from_value(body).unwrap();
    assert_eq!(e.kind, "invalid_argument");
    assert!(e.message.contains("malformed fit request"));
}

#[tokio::test]
async fn error_kinds_map_to_statuses() {
    let b = base().await;
    let mut cfg = ExperimentConfig { box_width: Some(vec![2.0]), ..Default::default() };
    let (status, body) = post(&b, "bounds", json!({"config": config(&cfg), "n": 0, "dim": 1})).await;
    assert_eq!((status, body["kind"].as_str().unwrap()), (400, "invalid_argument"));

    cfg.kernel = KernelFamily::Laplacian;
    let (status, body) = post(&b, "bounds", json!({"config": config(&cfg), "n": 100, "dim": 1})).await;
    assert_eq!((status, body["kind"].as_str().unwrap()), (422, "unsupported"));

    let rows: Vec<Vec<f64>> = (0..5001).map(|i| vec![i as f64 / 5001.0]).collect();
    let (status, body) = post(&b, "audit", json!({"config": config(&ExperimentConfig::default()), "x": rows})).await;
    assert_eq!((status, body["kind"].as_str().unwrap()), (413, "capacity"));
}

#[tokio::test]
async fn bounds_reports_the_plan() {
    let b = base().await;
    let cfg = ExperimentConfig { box_width: Some(vec![2.0]), lengthscale: vec![0.2], ..Default::default() };
    let (status, body) = post(&b, "bounds", json!({"config": config(&cfg), "n": 1000, "dim": 1})).await;
    assert_eq!(status, 200);
    assert!(body["plan"]["s_tot"].as_u64().unwrap() > 0);
    assert!(body["report"].as_str().unwrap().contains("s_tot="));
}
