use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use cef_service::config::BalanceMode;
use cef_service::{build_state, router, schemas, ApiConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const ADMIN: &str = "admin-token-for-tests";
const CONDITIONS: [&str; 5] = ["no_ai", "unilateral", "contrastive_predicted", "contrastive_random", "contrastive_after"];
/// Keys that must never reach a participant.
const HIDDEN: [&str; 5] = ["ground_truth", "ai_is_correct", "expert_ranking", "token_sha256", "correct"];

fn config(dir: &std::path::Path, balance: BalanceMode) -> ApiConfig {
    ApiConfig {
        data_dir: dir.to_path_buf(),
        study_id: "test".into(),
        study_seed: 7,
        balance,
        admin_token: Some(ADMIN.into()),
        ..ApiConfig::default()
    }
}

fn app(dir: &std::path::Path, balance: BalanceMode) -> Router {
    router(build_state(&config(dir, balance)).unwrap())
}

struct Reply {
    status: StatusCode,
    body: Value,
    raw: Vec<u8>,
}

async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let raw = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
    Reply { status, body, raw }
}

fn validator(name: &str) -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(schemas::get(name).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn conforms(name: &str, v: &Value) {
    let errors: Vec<String> = validator(name).iter_errors(v).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{v:#}");
}

fn leaks(v: &Value) -> Option<String> {
    match v {
        Value::Object(m) => m
            .iter()
            .find_map(|(k, v)| if HIDDEN.contains(&k.as_str()) { Some(k.clone()) } else { leaks(v) }),
        Value::Array(a) => a.iter().find_map(leaks),
        _ => None,
    }
}

/// Answers for every item the condition is asked, read from the instrument
/// definitions returned at creation.
fn questionnaire(created: &Value, instrument: &str) -> Value {
    let has_ai = created["condition"] != "no_ai";
    let def = created["instruments"].as_array().unwrap().iter().find(|d| d["instrument"] == instrument).unwrap();
    let items: serde_json::Map<String, Value> = def["items"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| has_ai || i["ai_only"] != true)
        .map(|i| {
            let v = match i["kind"]["type"].as_str().unwrap() {
                "likert" => json!(4),
                "integer" => i["kind"]["min"].clone(),
                _ => json!("n/a"),
            };
            (i["id"].as_str().unwrap().to_string(), v)
        })
        .collect();
    json!({"instrument": instrument, "items": items})
}

async fn create(app: &Router, condition: &str) -> (Value, String, String) {
    let r = call(app, Method::POST, "/api/sessions", None, Some(json!({"condition": condition, "participant_id": "p1"}))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    conforms("session_created.response", &r.body);
    let id = r.body["session_id"].as_str().unwrap().to_string();
    let token = r.body["token"].as_str().unwrap().to_string();
    (r.body, id, token)
}

/// Walk a session to the end through the API, checking every response.
async fn walk(app: &Router, condition: &str) -> (String, String, Vec<Value>) {
    let (created, id, token) = create(app, condition).await;
    let mut bodies = vec![created.clone()];
    let base = format!("/api/sessions/{id}");
    for _ in 0..200 {
        let next = call(app, Method::GET, &format!("{base}/next"), Some(&token), None).await;
        assert_eq!(next.status, StatusCode::OK, "{}", next.body);
        conforms("next.response", &next.body);
        bodies.push(next.body.clone());
        match next.body["stage"].as_str().unwrap() {
            "pre_task" | "post_task" => {
                for i in next.body["pending_instruments"].as_array().unwrap() {
                    let r = call(app, Method::POST, &format!("{base}/questionnaires"), Some(&token), Some(questionnaire(&created, i.as_str().unwrap()))).await;
                    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
                    conforms("questionnaire_ack.response", &r.body);
                    bodies.push(r.body);
                }
            }
            "trial" => {
                let t = &next.body["trial"];
                let first = t["dropdown"][0].clone();
                let r = call(app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": t["index"], "phase": t["phase"], "exercise_id": first, "rt_ms": 5000}))).await;
                assert_eq!(r.status, StatusCode::OK, "{}", r.body);
                conforms("answer_ack.response", &r.body);
                if t["phase"] == "initial" {
                    assert!(r.body["ai"].is_object(), "initial answer must return the explanation");
                    assert_eq!(r.body["ai"]["foil"]["label"], "Your choice");
                } else {
                    assert!(r.body.get("ai").is_none());
                }
                bodies.push(r.body);
            }
            "completed" => return (id, token, bodies),
            other => panic!("unexpected stage {other}"),
        }
    }
    panic!("session did not finish")
}

#[tokio::test]
async fn every_condition_completes_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path(), BalanceMode::Client);
    for condition in CONDITIONS {
        let (id, _, bodies) = walk(&app, condition).await;
        let trials: Vec<&Value> = bodies.iter().filter(|b| b["stage"] == "trial").collect();
        let shown_ai = |phase: &str| {
            trials
                .iter()
                .filter(|b| b["trial"]["phase"] == phase && b["trial"]["ai"].is_object())
                .count()
        };
        // contrastive_after shows AI only once the initial answer is in
        let expected = if condition == "no_ai" { (0, 0) } else { (0, 14) };
        assert_eq!((shown_ai("initial"), shown_ai("final")), expected, "{condition}");
        let initial_views = trials.iter().filter(|b| b["trial"]["phase"] == "initial").count();
        assert_eq!(initial_views > 0, condition == "contrastive_after");
        if condition == "unilateral" {
            assert!(trials.iter().filter_map(|b| b["trial"].get("ai")).all(|ai| ai.get("foil").is_none()));
        }
        for b in &bodies {
            assert_eq!(leaks(b), None, "{condition}: {b}");
        }
        let done = bodies.last().unwrap();
        assert_eq!(done["session_id"], id.as_str());
        assert_eq!(done["finish_code"].as_str().unwrap().len(), 10);
    }
    let health = call(&app, Method::GET, "/healthz", None, None).await;
    assert_eq!(health.body, json!({"status": "ok", "sessions": {"completed": 5}}));
}

#[tokio::test]
async fn protocol_and_auth_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path(), BalanceMode::Client);
    let (created, id, token) = create(&app, "contrastive_after").await;
    let base = format!("/api/sessions/{id}");

    // answers before the pre-task questionnaires
    let early = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": 0, "phase": "final", "exercise_id": "x", "rt_ms": 1}))).await;
    assert_eq!(early.status, StatusCode::CONFLICT);
    for i in created["pending_instruments"].as_array().unwrap() {
        let r = call(&app, Method::POST, &format!("{base}/questionnaires"), Some(&token), Some(questionnaire(&created, i.as_str().unwrap()))).await;
        assert_eq!(r.status, StatusCode::OK);
    }
    // reach the first intervention trial
    let mut next = call(&app, Method::GET, &format!("{base}/next"), Some(&token), None).await;
    while next.body["trial"]["block"] != "intervention" {
        let t = &next.body["trial"];
        let r = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": t["index"], "phase": "final", "exercise_id": t["dropdown"][0], "rt_ms": 5000}))).await;
        assert_eq!(r.status, StatusCode::OK);
        next = call(&app, Method::GET, &format!("{base}/next"), Some(&token), None).await;
    }
    let t = next.body["trial"].clone();
    assert_eq!(t["phase"], "initial");
    assert!(t.get("ai").is_none());
    let forged = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": t["index"], "phase": "final", "exercise_id": t["dropdown"][0], "rt_ms": 5000}))).await;
    assert_eq!(forged.status, StatusCode::CONFLICT, "{}", forged.body);
    assert_eq!(forged.body["error"]["code"], "protocol");
    conforms("error.response", &forged.body);

    let bad_id = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": t["index"], "phase": "initial", "exercise_id": "moonwalking", "rt_ms": 5000}))).await;
    assert_eq!(bad_id.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad_id.body["error"]["field"], "exercise_id");
    conforms("error.response", &bad_id.body);

    let wrong_type = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": t["index"], "phase": "initial", "exercise_id": 3, "rt_ms": 5000}))).await;
    assert_eq!(wrong_type.status, StatusCode::BAD_REQUEST);
    assert_eq!(wrong_type.body["error"]["field"], "exercise_id", "{}", wrong_type.body);
    let missing = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"phase": "initial", "exercise_id": "a", "rt_ms": 1}))).await;
    assert_eq!(missing.status, StatusCode::BAD_REQUEST);
    assert_eq!(missing.body["error"]["field"], "trial");
    let unknown = call(&app, Method::POST, &format!("{base}/answers"), Some(&token), Some(json!({"trial": 5, "phase": "initial", "exercise_id": "a", "rt_ms": 1, "correct": true}))).await;
    assert_eq!(unknown.status, StatusCode::BAD_REQUEST);
    assert_eq!(unknown.body["error"]["field"], "correct");

    let bare = app
        .clone()
        .oneshot(
            Request::post(format!("{base}/answers"))
                .header(header::AUTHORIZATION, format!("Bearer {token}"))
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from("{"))
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(bare.status(), StatusCode::BAD_REQUEST);
    let text = app
        .clone()
        .oneshot(Request::post("/api/sessions").header(header::CONTENT_TYPE, "text/plain").body(Body::from("{}")).unwrap())
        .await
        .unwrap();
    assert_eq!(text.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);

    assert_eq!(call(&app, Method::GET, &format!("{base}/next"), None, None).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, Method::GET, &format!("{base}/next"), Some("nope"), None).await.status, StatusCode::UNAUTHORIZED);
    let other = call(&app, Method::GET, "/api/sessions/s0000000000000000/next", Some(&token), None).await;
    assert_eq!(other.status, StatusCode::NOT_FOUND);
    conforms("error.response", &other.body);

    // the failed requests changed nothing
    let again = call(&app, Method::GET, &format!("{base}/next"), Some(&token), None).await;
    assert_eq!(again.raw, next.raw);
}

#[tokio::test]
async fn balance_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let auto = app(tmp.path(), BalanceMode::Auto);
    let r = call(&auto, Method::POST, "/api/sessions", None, Some(json!({"condition": "no_ai"}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.body["error"]["field"], "condition");
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..5 {
        let r = call(&auto, Method::POST, "/api/sessions", None, Some(json!({}))).await;
        assert_eq!(r.status, StatusCode::CREATED);
        seen.insert(r.body["condition"].as_str().unwrap().to_string());
    }
    assert_eq!(seen.len(), 5, "the first five sessions cover every condition");
    let bad = call(&auto, Method::POST, "/api/sessions", None, Some(json!({"condition": "telepathy"}))).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn get_is_stable_across_restarts() {
    let tmp = tempfile::tempdir().unwrap();
    let first = app(tmp.path(), BalanceMode::Client);
    let (created, id, token) = create(&first, "contrastive_predicted").await;
    for i in created["pending_instruments"].as_array().unwrap() {
        call(&first, Method::POST, &format!("/api/sessions/{id}/questionnaires"), Some(&token), Some(questionnaire(&created, i.as_str().unwrap()))).await;
    }
    let uri = format!("/api/sessions/{id}/next");
    let before = call(&first, Method::GET, &uri, Some(&token), None).await;
    assert_eq!(before.body["stage"], "trial");
    assert_eq!(call(&first, Method::GET, &uri, Some(&token), None).await.raw, before.raw);
    drop(first);
    let second = app(tmp.path(), BalanceMode::Client);
    let after = call(&second, Method::GET, &uri, Some(&token), None).await;
    assert_eq!(after.raw, before.raw);
}

#[tokio::test]
async fn admin_routes_need_the_admin_token() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path(), BalanceMode::Client);
    for c in CONDITIONS {
        walk(&app, c).await;
    }
    let (_, _, participant) = create(&app, "unilateral").await;
    assert_eq!(call(&app, Method::GET, "/api/admin/summary", None, None).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, Method::GET, "/api/admin/summary", Some(&participant), None).await.status, StatusCode::UNAUTHORIZED);
    let summary = call(&app, Method::GET, "/api/admin/summary", Some(ADMIN), None).await;
    assert_eq!(summary.status, StatusCode::OK, "{}", summary.body);
    assert_eq!(summary.body["n_sessions"], 6);
    assert_eq!(summary.body["n_complete"], 5);

    let trials = call(&app, Method::GET, "/api/admin/export/trials.csv", Some(ADMIN), None).await;
    assert_eq!(trials.status, StatusCode::OK);
    let text = String::from_utf8(trials.raw).unwrap();
    assert!(text.lines().next().unwrap().contains("ground_truth"));
    assert_eq!(text.lines().count(), 1 + 5 * 24);
    assert_eq!(call(&app, Method::GET, "/api/admin/export/secrets.csv", Some(ADMIN), None).await.status, StatusCode::NOT_FOUND);

    let closed = router(build_state(&ApiConfig { admin_token: None, ..config(tmp.path(), BalanceMode::Client) }).unwrap());
    assert_eq!(call(&closed, Method::GET, "/api/admin/summary", Some(ADMIN), None).await.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn published_schemas_agree_with_the_server() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path(), BalanceMode::Client);
    for (name, _) in schemas::ALL {
        let r = call(&app, Method::GET, &format!("/api/schemas/{name}.json"), None, None).await;
        assert_eq!(r.status, StatusCode::OK, "{name}");
        jsonschema::validator_for(&r.body).unwrap();
    }
    assert_eq!(call(&app, Method::GET, "/api/schemas/nothing", None, None).await.status, StatusCode::NOT_FOUND);

    // bodies the request schema rejects are rejected by the server too
    let create_schema = validator("create_session.request");
    for body in [json!({"condition": "x"}), json!({"seed": -1}), json!({"extra": 1}), json!({"participant_id": ""}), json!([])] {
        assert!(!create_schema.is_valid(&body), "{body}");
        let r = call(&app, Method::POST, "/api/sessions", None, Some(body.clone())).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{body}: {}", r.body);
    }
    for body in [json!({}), json!({"condition": null, "seed": 3}), json!({"participant_id": "abc"})] {
        assert!(create_schema.is_valid(&body));
        assert_eq!(call(&app, Method::POST, "/api/sessions", None, Some(body)).await.status, StatusCode::CREATED);
    }
    let answer_schema = validator("answer.request");
    for body in [
        json!({"trial": 0, "phase": "middle", "exercise_id": "a", "rt_ms": 1}),
        json!({"trial": -1, "phase": "final", "exercise_id": "a", "rt_ms": 1}),
        json!({"trial": 0, "phase": "final", "exercise_id": "a"}),
    ] {
        assert!(!answer_schema.is_valid(&body));
    }
}

#[tokio::test]
async fn live_server_answers_health_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), BalanceMode::Auto);
    let state = build_state(&cfg).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(cef_service::serve_on(listener, cef_service::app(&cfg, state).unwrap()));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream.write_all(b"GET /healthz HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    assert!(out.starts_with("HTTP/1.1 200"), "{out}");
    assert!(out.contains(r#""status":"ok""#));
    server.abort();
}
