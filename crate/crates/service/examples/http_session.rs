//! Drives the HTTP API in-process: builds a table from inline CSV through
//! `POST /tables`, then holds a two-turn session.
//!
//! `cargo run -p dir-service --example http_session`

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dir_core::agent::{AgentTurn, SessionStore};
use dir_core::llm::{Gateway, LexiconEntry, MockProvider, ProviderConfig};
use dir_core::tablegen::Store;
use dir_core::{Config, Engine, Templates};
use dir_service::http::{router, AppState};
use dir_service::render_turn;

const CSV: &str = "product_id,title,price,description\n\
p1,Trail 15,120,\"A rugged 15 liter backpack in black nylon with a padded shoulder strap.\"\n\
p2,City 22,310,\"A sleek navy 22 liter backpack in leather, carried by a top handle.\"\n\
p3,Summit 15,450,\"A premium red 15 liter backpack in canvas with a strap.\"\n\
p4,Scout 15,199,\"A compact red 15 liter backpack in nylon with a top handle.\"\n";

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap_or(Value::Null)
}

#[tokio::main]
async fn main() -> dir_core::Result<()> {
    let tmp = std::env::temp_dir().join(format!("dir-http-example-{}", std::process::id()));
    let mut config = Config { workdir: tmp.clone(), mandatory_keys: vec!["product_type".into()], ..Config::default() };
    config.ingest.primary_key = "product_id".into();

    let lexicon = [
        ("backpack", "product_type", "backpack"),
        ("15 liter", "product_size", "15 liter"),
        ("22 liter", "product_size", "22 liter"),
        ("black", "color", "black"),
        ("navy", "color", "navy"),
        ("red", "color", "red"),
        ("nylon", "material", "nylon"),
        ("leather", "material", "leather"),
        ("canvas", "material", "canvas"),
    ]
    .into_iter()
    .map(|(p, k, v)| LexiconEntry { phrase: p.into(), key: k.into(), value: v.into() })
    .collect();
    let gateway = Gateway::new(Arc::new(MockProvider::new(lexicon)), ProviderConfig::mock(8000));
    let mut cap = config.cap_policy()?;
    cap.min_row_support = 0.0;
    let engine = Arc::new(Engine::new(gateway, Templates::default(), cap, Store::in_memory()?));
    let state = Arc::new(AppState::new(engine, SessionStore::new(tmp.join("sessions"))?, &config));
    let app = router(state);

    let job = call(&app, "POST", "/tables", Some(json!({"table_id": "backpacks", "data": CSV}))).await;
    println!("POST /tables -> {job}");
    loop {
        let status = call(&app, "GET", "/tables/backpacks/status", None).await;
        if status["state"] != "pending" {
            println!("GET /tables/backpacks/status -> {status}");
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    println!("catalog: {}", call(&app, "GET", "/tables/backpacks/catalog", None).await["entries"]);

    let session = call(&app, "POST", "/sessions", Some(json!({"session_id": "demo"}))).await;
    println!("POST /sessions -> {session}");
    for utterance in ["red backpacks", "only nylon ones"] {
        let turn = call(&app, "POST", "/sessions/demo/turns", Some(json!({"utterance": utterance}))).await;
        let turn: AgentTurn = serde_json::from_value(turn)?;
        print!("{}", render_turn(&turn));
    }
    let _ = std::fs::remove_dir_all(&tmp);
    Ok(())
}
