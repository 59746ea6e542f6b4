use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mdim_core::acts::{SystemAct, SystemActType};
use mdim_core::chat::{http, ChatConfig, ChatEngine, PolicyPool, PoolEntry};
use mdim_core::domain::Domain;
use mdim_core::harness::{run_training, ExperimentConfig};
use mdim_core::ontology::NAME_SLOT;
use mdim_core::selection::{AgentEnsemble, Variant};
use serde_json::{json, Value};
use tower::ServiceExt;

fn domain() -> Domain {
    let cfg = ExperimentConfig::for_variant(Variant::MultiDim);
    Domain::from_config(&cfg.domain, Path::new(".")).unwrap()
}

/// One briefly trained multi-dimensional ensemble, shared by every test.
fn trained() -> Arc<AgentEnsemble> {
    static ENSEMBLE: OnceLock<Arc<AgentEnsemble>> = OnceLock::new();
    ENSEMBLE
        .get_or_init(|| {
            let mut cfg = ExperimentConfig::for_variant(Variant::MultiDim);
            cfg.n_dialogues = 6000;
            cfg.n_runs = 1;
            cfg.seed = 11;
            let d = domain();
            let mut art = run_training(&cfg, &d).unwrap();
            Arc::new(art.runs.remove(0).final_ensemble)
        })
        .clone()
}

fn engine(pool_size: usize, state_dir: &Path) -> Arc<ChatEngine> {
    let entries = (0..pool_size)
        .map(|i| PoolEntry { label: format!("policy-{i}"), ensemble: trained() })
        .collect();
    let pool = PolicyPool::new(entries, Some(state_dir)).unwrap();
    let config = ChatConfig { state_dir: Some(state_dir.to_path_buf()), seed: 9, ..Default::default() };
    Arc::new(ChatEngine::new(domain(), pool, config).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(body.get("policy_index").is_none(), "assignment must stay hidden from the user");
    body["session_id"].as_str().unwrap().to_string()
}

async fn say(app: &Router, id: &str, text: &str) -> (Vec<SystemAct>, String, String) {
    let (status, body) = call(app, Method::POST, &format!("/session/{id}/turn"), Some(&json!({ "text": text }).to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let acts = body["acts"].as_array().unwrap().iter().map(|a| a.as_str().unwrap().parse().unwrap()).collect();
    (acts, body["utterance"].as_str().unwrap().to_string(), body["status"].as_str().unwrap().to_string())
}

fn find(acts: &[SystemAct], kind: SystemActType) -> Option<&SystemAct> {
    acts.iter().find(|a| a.kind == kind)
}

pub async fn scripted_conversation_gets_matching_venue_and_true_answers() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(1, dir.path());
    let app = http::router(engine.clone());
    let d = engine.domain();
    let mut passed = 0;
    for target in d.db.venues().iter().take(5) {
        let constraints: Vec<(String, String)> =
            ["food", "area", "pricerange"].iter().map(|s| (s.to_string(), target.slots[*s].clone())).collect();
        let wish = format!(
            "I want a {} {} restaurant in the {}",
            target.slots["pricerange"], target.slots["food"], target.slots["area"]
        );
        let id = create(&app).await;
        let mut offered = None;
        let mut text = wish.clone();
        for _ in 0..12 {
            let (acts, utterance, _) = say(&app, &id, &text).await;
            assert!(!utterance.is_empty());
            if let Some(offer) = find(&acts, SystemActType::Offer) {
                offered = offer.value(NAME_SLOT).map(String::from);
                break;
            }
            text = if find(&acts, SystemActType::ExplConfirm).is_some() { "yes".into() } else { wish.clone() };
        }
        let name = offered.expect("no offer within 12 turns");
        let venue = d.db.venue(&name).expect("offered venue exists");
        assert!(venue.matches(&constraints), "{name} does not match {constraints:?}");

        let mut phone = None;
        for _ in 0..6 {
            let (acts, _, _) = say(&app, &id, "what is the phone number?").await;
            if let Some(v) = find(&acts, SystemActType::Answer).and_then(|a| a.value("phone")) {
                phone = Some(v.to_string());
                break;
            }
        }
        assert_eq!(phone.as_deref(), Some(venue.slots["phone"].as_str()));

        let mut status = String::new();
        for text in ["thank you", "goodbye", "bye"] {
            status = say(&app, &id, text).await.2;
            if status == "ended" {
                break;
            }
        }
        let (code, end) = call(&app, Method::POST, &format!("/session/{id}/end"), None).await;
        assert_eq!(code, StatusCode::OK);
        assert_eq!(end["status"], "ended");
        assert!(end["completion_code"].as_str().unwrap().starts_with("MDIM-"));
        passed += usize::from(status == "ended");
    }
    assert!(passed >= 4, "only {passed}/5 sessions closed on goodbye");
}

pub async fn sessions_are_balanced_round_robin() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(10, dir.path());
    let app = http::router(engine.clone());
    let mut counts = [0usize; 10];
    for _ in 0..100 {
        let id = create(&app).await;
        counts[engine.get_session(&id).unwrap().policy_index] += 1;
    }
    assert_eq!(counts, [10; 10]);
    assert_eq!(engine.pool().counter(), 100);
}

pub async fn questionnaire_and_error_contract() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(2, dir.path());
    let app = http::router(engine.clone());

    let (s, b) = call(&app, Method::GET, "/health", None).await;
    assert_eq!((s, b["policies"].as_u64()), (StatusCode::OK, Some(2)));

    let (s, b) = call(&app, Method::POST, "/session/nope/turn", Some(r#"{"text":"hi"}"#)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    let id = create(&app).await;
    let (s, b) = call(&app, Method::POST, &format!("/session/{id}/turn"), Some("{not json")).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    assert!(b["detail"].is_string());

    let good = json!({ "q1": true, "q2": false, "q3": 4, "q4": 6, "q5": 1, "q6": 3 }).to_string();
    let (s, b) = call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(&good)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("session_live")));

    say(&app, &id, "hello").await;
    assert_eq!(call(&app, Method::POST, &format!("/session/{id}/end"), None).await.0, StatusCode::OK);
    assert_eq!(call(&app, Method::POST, &format!("/session/{id}/end"), None).await.0, StatusCode::OK);

    let (s, b) = call(&app, Method::POST, &format!("/session/{id}/turn"), Some(r#"{"text":"hi"}"#)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("session_ended")));

    for bad in [
        json!({ "q1": true, "q2": false, "q3": 0, "q4": 6, "q5": 1, "q6": 3 }),
        json!({ "q1": true, "q2": false, "q3": 4, "q4": 7, "q5": 1, "q6": 3 }),
    ] {
        let (s, b) = call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(&bad.to_string())).await;
        assert_eq!((s, b["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_questionnaire")));
    }
    let (s, _) = call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(r#"{"q1":"yes"}"#)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, b) = call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(&good)).await;
    assert_eq!((s, b["stored"].as_bool()), (StatusCode::CREATED, Some(true)));
    let (s, b) = call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(&good)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("already_submitted")));

    let records = mdim_core::chat::engine::read_results(engine.results_path().unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].answers.q3, 4);
    assert!(dir.path().join(&records[0].transcript).exists());
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

pub async fn traffic_never_changes_policy_weights() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(2, dir.path());
    let before = tempfile::tempdir().unwrap();
    engine.pool().entries()[0].ensemble.save(before.path()).unwrap();
    let app = http::router(engine.clone());
    for i in 0..20 {
        let id = create(&app).await;
        for text in ["cheap indian food in the north", "yes", "what is the phone number?", "zzzz", "no", "thanks, bye"] {
            if say(&app, &id, text).await.2 == "ended" {
                break;
            }
        }
        call(&app, Method::POST, &format!("/session/{id}/end"), None).await;
        let q = json!({ "q1": i % 2 == 0, "q2": true, "q3": 1 + i % 6, "q4": 3, "q5": 3, "q6": 3 }).to_string();
        assert_eq!(call(&app, Method::POST, &format!("/session/{id}/questionnaire"), Some(&q)).await.0, StatusCode::CREATED);
    }
    let after = tempfile::tempdir().unwrap();
    for entry in engine.pool().entries() {
        entry.ensemble.save(after.path()).unwrap();
        assert_eq!(snapshot(before.path()), snapshot(after.path()));
    }
}

/// Runs every check in this file; used by the acceptance runner.
#[allow(dead_code)]
pub fn suite() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    rt.block_on(scripted_conversation_gets_matching_venue_and_true_answers());
    rt.block_on(sessions_are_balanced_round_robin());
    rt.block_on(questionnaire_and_error_contract());
    rt.block_on(traffic_never_changes_policy_weights());
}

#[cfg(test)]
mod tests {
    #[tokio::test]
    async fn scripted_conversation_gets_matching_venue_and_true_answers() {
        super::scripted_conversation_gets_matching_venue_and_true_answers().await
    }

    #[tokio::test]
    async fn sessions_are_balanced_round_robin() {
        super::sessions_are_balanced_round_robin().await
    }

    #[tokio::test]
    async fn questionnaire_and_error_contract() {
        super::questionnaire_and_error_contract().await
    }

    #[tokio::test]
    async fn traffic_never_changes_policy_weights() {
        super::traffic_never_changes_policy_weights().await
    }
}
