use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use ucrec_core::data::synth::{generate, SynthConfig};
use ucrec_core::data::split;
use ucrec_core::model::{train, TrainConfig};
use ucrec_core::ScorerKind;
use ucrec_service::{router, Service, Settings, SCHEMA_VERSION};

fn service() -> Arc<Service> {
    static S: OnceLock<Arc<Service>> = OnceLock::new();
    S.get_or_init(|| {
        let corpus = generate(&SynthConfig {
            n_users: 30,
            n_items: 50,
            n_genres: 3,
            min_len: 14,
            mean_extra: 6.0,
            max_len: 24,
            seed: 5,
            ..SynthConfig::default()
        });
        let data = split(&corpus.to_log(), 2).unwrap();
        let cfg = TrainConfig {
            dim: 8,
            window: 10,
            batch_size: 8,
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let (params, _) = train(ScorerKind::Attention, data.n_items, &data.training_sequences(), &cfg).unwrap();
        let names: HashMap<String, String> = corpus
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| ((i + 1).to_string(), n.clone()))
            .collect();
        let settings = Settings {
            k: 4,
            ..Settings::default()
        };
        Arc::new(Service::new(params, data, &names, settings).unwrap())
    })
    .clone()
}

async fn call(method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(service()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn items(v: &Value, key: &str) -> Vec<String> {
    v[key]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["item"].as_str().unwrap().to_string())
        .collect()
}

async fn open_session() -> (String, Vec<String>) {
    let (status, v) = call(Method::POST, "/sessions", Some(json!({"user_id": "1"}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), items(&v, "recommendations"))
}

#[tokio::test]
async fn healthz_and_items() {
    let (status, v) = call(Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model"]["kind"], "attention");
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    let (status, v) = call(Method::GET, "/items", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = v["items"].as_array().unwrap();
    assert!(!list.is_empty());
    assert!(list.iter().all(|i| i["name"].as_str().is_some_and(|n| !n.is_empty())));
}

#[tokio::test]
async fn errors_carry_code_and_message() {
    let (status, v) = call(Method::POST, "/sessions", Some(json!({"user_id": "99999"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_user");
    assert!(v["message"].is_string());
    assert_eq!(v["schema_version"], SCHEMA_VERSION);

    let (status, v) = call(Method::POST, "/sessions", Some(json!({"user": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");

    let (status, v) = call(Method::GET, "/sessions/nope/recommendations", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_session");

    let (status, v) = call(Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn explain_then_revoke_removes_the_item() {
    let (id, recs) = open_session().await;
    let mut removed = 0;
    for item in &recs {
        let (status, v) = call(Method::GET, &format!("/sessions/{id}/explanations/{item}"), None).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        if v["status"] != "success" {
            assert!(v["text"].as_str().unwrap().starts_with("No set of past behaviors"));
            continue;
        }
        let positions: Vec<u64> = v["revoked"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["position"].as_u64().unwrap())
            .collect();
        let (sid, _) = open_session().await;
        let (status, after) = call(
            Method::POST,
            &format!("/sessions/{sid}/revoke"),
            Some(json!({ "positions": positions })),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert!(!items(&after, "recommendations").contains(item));
        let (_, again) = call(Method::GET, &format!("/sessions/{sid}/recommendations"), None).await;
        assert_eq!(items(&again, "recommendations"), items(&after, "recommendations"));
        removed += 1;
    }
    assert!(removed > 0);
}

#[tokio::test]
async fn relax_method_is_selectable() {
    let (id, recs) = open_session().await;
    let uri = format!("/sessions/{id}/explanations/{}?method=relax", recs[0]);
    let (status, v) = call(Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["method"], "relax");
    let uri = format!("/sessions/{id}/explanations/{}?method=exhaustive", recs[0]);
    let (status, v) = call(Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_method");
}

#[tokio::test]
async fn interact_confirm_and_undo() {
    let (id, recs) = open_session().await;
    let (status, staged) = call(Method::POST, &format!("/sessions/{id}/interact"), Some(json!({"item": "7"}))).await;
    assert_eq!(status, StatusCode::OK, "{staged}");
    assert!(staged["text"].as_str().unwrap().starts_with("With the current interaction"));
    let (_, current) = call(Method::GET, &format!("/sessions/{id}/recommendations"), None).await;
    assert_eq!(items(&current, "recommendations"), recs);

    let (status, v) = call(Method::POST, &format!("/sessions/{id}/interact"), Some(json!({"item": "8"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "pending_interaction");

    let (status, undone) = call(Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(items(&undone, "recommendations"), recs);

    let (_, staged) = call(Method::POST, &format!("/sessions/{id}/interact"), Some(json!({"item": "7"}))).await;
    let (status, confirmed) = call(Method::POST, &format!("/sessions/{id}/confirm"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(items(&confirmed, "recommendations"), items(&staged, "recommendations_after"));

    let (status, v) = call(Method::POST, &format!("/sessions/{id}/confirm"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "nothing_pending");
}

#[tokio::test]
async fn invalid_revocation_leaves_the_session_unchanged() {
    let (id, _) = open_session().await;
    let (_, before) = call(Method::GET, &format!("/sessions/{id}"), None).await;
    let (status, v) = call(
        Method::POST,
        &format!("/sessions/{id}/revoke"),
        Some(json!({"positions": [9, 9]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_positions");
    let (_, after) = call(Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
}
