use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use psyling::adapt::{parse_conversations_jsonl, Adapter, Lexicons};
use psyling::agreement::perfect_agreement;
use psyling::bundle::ModelBundle;
use psyling::corpus::{derive_gold, generate_synthetic, Corpus, GoldPolicy};
use psyling::fixtures;
use psyling::model::{train_model, ModelConfig, ModelKind, TextClassifier, TrainedModel};
use psyling::{ByCharacteristic, Characteristic};
use psyling_service::{router, stats_for, AnnotationStore, AppState, ErrorBody, ServiceConfig, CORPUS_FILE, VOTE_LOG};
use serde_json::{json, Value};
use tower::ServiceExt;

fn trained() -> &'static ByCharacteristic<TrainedModel> {
    static MODELS: OnceLock<ByCharacteristic<TrainedModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let gold = derive_gold(&generate_synthetic(11, 600, 1.0).unwrap(), GoldPolicy::PerfectOnly).unwrap();
        ByCharacteristic::from_fn(|c| {
            let data: Vec<_> = gold.iter().filter_map(|g| g.labeled(c)).collect();
            train_model(ModelKind::NgSvm, c, &data, &ModelConfig::default()).unwrap()
        })
    })
}

fn bundle() -> ModelBundle {
    ModelBundle::new(trained().map(|_, m| Arc::new(m.clone()) as Arc<dyn TextClassifier>)).unwrap()
}

fn adapter() -> Adapter {
    Adapter::new(bundle(), Lexicons::bundled())
}

/// Yes exactly when the text contains one of the cue substrings.
struct Cue(Characteristic, &'static [&'static str]);

impl TextClassifier for Cue {
    fn task(&self) -> Characteristic {
        self.0
    }
    fn prob_yes(&self, text: &str) -> psyling::Result<f64> {
        let t = text.to_lowercase();
        Ok(if self.1.iter().any(|c| t.contains(c)) { 0.8 } else { 0.2 })
    }
    fn fingerprint(&self) -> &str {
        "cue"
    }
}

fn cue_adapter() -> Adapter {
    let cues = |c| -> &'static [&'static str] {
        match c {
            Characteristic::Emotionality => &["!"],
            Characteristic::FactOriented => &["kg"],
            Characteristic::SelfRevealing => &["my "],
            Characteristic::ActionSeeking => &["please"],
            Characteristic::InformationSeeking => &["?"],
        }
    };
    Adapter::new(
        ModelBundle::new(ByCharacteristic::from_fn(|c| Arc::new(Cue(c, cues(c))) as Arc<dyn TextClassifier>)).unwrap(),
        Lexicons::bundled(),
    )
}

fn queue_corpus(jsonl: &str) -> Corpus {
    Corpus::parse_jsonl_with(jsonl, psyling::corpus::ImportOptions { allow_unannotated: true }).unwrap()
}

fn app(adapter: Option<Adapter>, store: AnnotationStore) -> axum::Router {
    router(AppState::new(ServiceConfig::default(), adapter, store))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn error_of(bytes: &[u8]) -> ErrorBody {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn classify_returns_five_labels_deterministically() {
    let app = app(Some(adapter()), AnnotationStore::in_memory(Corpus::default()));
    let body = json!({"text": "My husband was also diagnosed with a lung cancer."});
    let (s1, b1) = call(&app, "POST", "/v1/classify", Some(body.clone())).await;
    let (s2, b2) = call(&app, "POST", "/v1/classify", Some(body)).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(b1, b2);
    let v = json_of(&b1);
    for c in Characteristic::ALL {
        assert!(v["labels"][c.key()].is_boolean(), "{c}");
        let p = v["probabilities"][c.key()].as_f64().unwrap();
        assert_eq!(v["labels"][c.key()].as_bool().unwrap(), p >= 0.5);
    }
    assert_eq!(v["fingerprints"]["emotionality"], trained().emotionality.fingerprint());
}

#[tokio::test]
async fn classify_errors() {
    let app = app(Some(adapter()), AnnotationStore::in_memory(Corpus::default()));
    let (s, b) = call(&app, "POST", "/v1/classify", Some(json!({"text": "  "}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&b).code, "empty_text");
    assert_eq!(error_of(&b).path.as_deref(), Some("/text"));

    let (s, b) = call(&app, "POST", "/v1/classify", Some(json!({"text": 5}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&b).path.as_deref(), Some("/text"));

    let big = "a".repeat(2 << 20);
    let (s, b) = call(&app, "POST", "/v1/classify", Some(json!({ "text": big }))).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(error_of(&b).code, "payload_too_large");

    let empty = self::app(None, AnnotationStore::in_memory(Corpus::default()));
    let (s, b) = call(&empty, "POST", "/v1/classify", Some(json!({"text": "hello"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(error_of(&b).code, "models_unavailable");

    let (s, b) = call(&empty, "GET", "/v1/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(error_of(&b).code, "not_found");
}

#[tokio::test]
async fn classify_does_not_touch_the_store() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(CORPUS_FILE), fixtures::STYLE_EXAMPLES).unwrap();
    let app = app(Some(adapter()), AnnotationStore::open(dir.path()).unwrap());
    let checksum = || {
        let mut bytes = std::fs::read(dir.path().join(CORPUS_FILE)).unwrap();
        bytes.extend(std::fs::read(dir.path().join(VOTE_LOG)).unwrap());
        psyling::sha256_hex(&bytes)
    };
    let before = checksum();
    let (_, export_before) = call(&app, "GET", "/v1/export", None).await;
    for text in ["Try contacting the customer service, here's the link.", "ok"] {
        let (s, _) = call(&app, "POST", "/v1/classify", Some(json!({ "text": text }))).await;
        assert_eq!(s, StatusCode::OK);
    }
    assert_eq!(checksum(), before);
    assert_eq!(call(&app, "GET", "/v1/export", None).await.1, export_before);
}

#[tokio::test]
async fn adapt_single_and_matched_turns() {
    let app = app(Some(cue_adapter()), AnnotationStore::in_memory(Corpus::default()));
    let one = json!({"conversation": {"id": "a", "turns": [{"speaker": "user", "text": "My bag is 3 kg?"}], "satisfaction": null}});
    let (s, b) = call(&app, "POST", "/v1/adapt", Some(one)).await;
    assert_eq!(s, StatusCode::OK);
    let v = json_of(&b);
    assert!(v["matching"]["matching_level"].is_null());
    assert_eq!(v["turns"][0]["directives"].as_array().unwrap().len(), 4);

    let two = json!({"conversation": {"id": "b", "turns": [
        {"speaker": "user", "text": "Please fix it!"},
        {"speaker": "agent", "text": "We recommend a reset!"}
    ], "satisfaction": "satisfied"}});
    let (s, b) = call(&app, "POST", "/v1/adapt", Some(two)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(json_of(&b)["matching"]["matching_level"], json!(100.0));
}

#[tokio::test]
async fn adapt_schema_errors_carry_pointers() {
    let app = app(Some(cue_adapter()), AnnotationStore::in_memory(Corpus::default()));
    let bad_speaker = json!({"conversation": {"id": "a", "turns": [{"speaker": "user", "text": "hi"}, {"speaker": "bot", "text": "x"}]}});
    let (s, b) = call(&app, "POST", "/v1/adapt", Some(bad_speaker)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&b).path.as_deref(), Some("/conversation/turns/1/speaker"));

    let agent_first = json!({"conversation": {"id": "a", "turns": [{"speaker": "agent", "text": "hi"}]}});
    let (s, b) = call(&app, "POST", "/v1/adapt", Some(agent_first)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&b).path.as_deref(), Some("/conversation/turns/0/speaker"));

    let missing = json!({"conversation": {"turns": []}});
    let (s, b) = call(&app, "POST", "/v1/adapt", Some(missing)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_of(&b).code, "schema_violation");
}

#[tokio::test]
async fn conversation_fixture_replay_matches_offline_engine() {
    let offline = adapter();
    let app = app(Some(adapter()), AnnotationStore::in_memory(Corpus::default()));
    let conversations = parse_conversations_jsonl(fixtures::CONVERSATIONS).unwrap();
    assert_eq!(conversations.len(), 50);
    for c in conversations {
        let (s, b) = call(&app, "POST", "/v1/adapt", Some(json!({ "conversation": c }))).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(b, serde_json::to_vec(&offline.adapt(&c).unwrap()).unwrap(), "{}", c.id);
    }
}

fn queue_jsonl(n: usize) -> String {
    (0..n)
        .map(|i| {
            json!({"id": format!("u{i:03}"), "text": format!("utterance {i}"), "author_id": null, "source": null,
                "language": "en", "votes": {"emotionality": [], "fact_oriented": [], "self_revealing": [],
                "action_seeking": [], "information_seeking": []}, "difficulty_votes": null})
            .to_string()
                + "\n"
        })
        .collect()
}

fn vote(annotator: &str, id: &str, bits: u32) -> Value {
    let b = |k: u32| bits >> k & 1 == 1;
    json!({"annotator": annotator, "utterance_id": id, "difficulty": b(5),
        "votes": {"emotionality": b(0), "fact_oriented": b(1), "self_revealing": b(2), "action_seeking": b(3), "information_seeking": b(4)}})
}

#[tokio::test]
async fn queue_walks_in_id_order_and_rejects_duplicates() {
    let app = app(None, AnnotationStore::in_memory(queue_corpus(&queue_jsonl(3))));
    let mut seen = Vec::new();
    for _ in 0..3 {
        let (s, b) = call(&app, "GET", "/v1/annotation/next?annotator=ann", None).await;
        assert_eq!(s, StatusCode::OK);
        let id = json_of(&b)["item"]["utterance_id"].as_str().unwrap().to_string();
        let (s, _) = call(&app, "POST", "/v1/annotation", Some(vote("ann", &id, 0b101))).await;
        assert_eq!(s, StatusCode::OK);
        seen.push(id);
    }
    assert_eq!(seen, ["u000", "u001", "u002"]);
    let (_, b) = call(&app, "GET", "/v1/annotation/next?annotator=ann", None).await;
    assert!(json_of(&b)["item"].is_null());

    let (_, before) = call(&app, "GET", "/v1/export", None).await;
    let (s, b) = call(&app, "POST", "/v1/annotation", Some(vote("ann", "u001", 0))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(error_of(&b).code, "duplicate_vote");
    let (s, _) = call(&app, "POST", "/v1/annotation", Some(vote("ann", "u999", 0))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/v1/export", None).await.1, before);

    let (s, _) = call(&app, "GET", "/v1/annotation/next", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn annotator_header_is_accepted() {
    let app = app(None, AnnotationStore::in_memory(queue_corpus(&queue_jsonl(2))));
    let mut v = vote("", "u000", 1);
    v.as_object_mut().unwrap().remove("annotator");
    let req = Request::post("/v1/annotation")
        .header("x-annotator-id", "hdr")
        .body(Body::from(v.to_string()))
        .unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
    let req = Request::get("/v1/annotation/next")
        .header("x-annotator-id", "hdr")
        .body(Body::empty())
        .unwrap();
    let b = app
        .clone()
        .oneshot(req)
        .await
        .unwrap()
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes();
    assert_eq!(json_of(&b)["item"]["utterance_id"], "u001");
}

#[tokio::test]
async fn agreement_endpoint_matches_export_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(CORPUS_FILE), queue_jsonl(100)).unwrap();
    let app = app(None, AnnotationStore::open(dir.path()).unwrap());
    let mut state = 12345u64;
    for annotator in ["a1", "a2", "a3"] {
        for i in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let (s, _) = call(
                &app,
                "POST",
                "/v1/annotation",
                Some(vote(annotator, &format!("u{i:03}"), (state >> 33) as u32)),
            )
            .await;
            assert_eq!(s, StatusCode::OK);
        }
    }
    let (_, export) = call(&app, "GET", "/v1/export", None).await;
    let exported = Corpus::parse_jsonl(std::str::from_utf8(&export).unwrap()).unwrap();
    let (_, b) = call(&app, "GET", "/v1/agreement", None).await;
    assert_eq!(b, serde_json::to_vec(&perfect_agreement(&exported)).unwrap());

    let (_, b) = call(&app, "GET", "/v1/stats", None).await;
    assert_eq!(b, serde_json::to_vec(&stats_for(&exported, 300).unwrap()).unwrap());

    // a restarted service sees the same store
    let again = self::app(None, AnnotationStore::open(dir.path()).unwrap());
    assert_eq!(call(&again, "GET", "/v1/export", None).await.1, export);
}

#[tokio::test]
async fn stats_for_empty_and_fixture_stores() {
    let app = app(None, AnnotationStore::in_memory(Corpus::default()));
    let (s, b) = call(&app, "GET", "/v1/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    let v = json_of(&b);
    assert_eq!(v["dataset"]["n_instances"], 0);
    for c in Characteristic::ALL {
        assert_eq!(v["dataset"]["counts"][c.key()]["yes"], 0);
        assert!(v["agreement"]["per_characteristic"][c.key()].is_null());
    }

    let app = self::app(
        None,
        AnnotationStore::in_memory(Corpus::parse_jsonl(fixtures::STYLE_EXAMPLES).unwrap()),
    );
    let v = json_of(&call(&app, "GET", "/v1/stats", None).await.1);
    assert_eq!(v["dataset"]["n_instances"], 7);
    assert_eq!(v["n_utterances"], 7);
}

#[tokio::test]
async fn bundle_is_verified_at_startup_and_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    ModelBundle::save_dir(&models, trained()).unwrap();
    let config = ServiceConfig {
        models: Some(models.clone()),
        ..Default::default()
    };
    let state = AppState::from_config(config.clone()).unwrap();
    let app = router(state);
    let (_, b) = call(&app, "GET", "/v1/health", None).await;
    assert_eq!(json_of(&b)["models_loaded"], true);
    let (s, _) = call(&app, "POST", "/v1/admin/reload", None).await;
    assert_eq!(s, StatusCode::OK);

    let path = models.join("emotionality.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[10] ^= 0xff;
    std::fs::write(&path, bytes).unwrap();
    let (s, b) = call(&app, "POST", "/v1/admin/reload", None).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(error_of(&b).code, "reload_failed");
    // the previous bundle keeps serving
    let (s, _) = call(&app, "POST", "/v1/classify", Some(json!({"text": "hello"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(AppState::from_config(config).is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_duplicate_votes_store_once() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(CORPUS_FILE), queue_jsonl(1)).unwrap();
    let app = app(None, AnnotationStore::open(dir.path()).unwrap());
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "POST", "/v1/annotation", Some(vote("x", "u000", 3))).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(ok, 1);
    let log = std::fs::read_to_string(dir.path().join(VOTE_LOG)).unwrap();
    assert_eq!(log.lines().count(), 1);
}
