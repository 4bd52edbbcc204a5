use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lire_core::{region_growth_curve, Dataset, Forest, GrowthMode};
use lire_service::{router, AppState};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::Arc;
use tower::ServiceExt;

const BOUNDARY: &str = "lire-test-boundary";

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn multipart(fields: &[(&str, &str)]) -> Body {
    let mut body = String::new();
    for (name, value) in fields {
        body.push_str(&format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n{value}\r\n"
        ));
    }
    body.push_str(&format!("--{BOUNDARY}--\r\n"));
    Body::from(body)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

async fn upload(app: &Router, name: &str) -> String {
    let req = Request::post("/models")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(multipart(&[("model", &read(&format!("{name}.json"))), ("data", &read(&format!("{name}.csv")))]))
        .unwrap();
    let (status, body) = send(app, req).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

async fn query(app: &Router, id: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(format!("/models/{id}/counterfactual")).body(Body::from(body.to_string())).unwrap();
    send(app, req).await
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

fn app() -> Router {
    router(Arc::new(AppState::default()))
}

/// The response without service-only metadata.
fn result_fields(mut v: Value) -> Value {
    let obj = v.as_object_mut().unwrap();
    obj.remove("elapsed_ms");
    obj.remove("witness_instance");
    obj.remove("baselines");
    v
}

fn cli_ce(model: &str, query_file: &std::path::Path) -> (u8, String) {
    let model_path = fixture(&format!("{model}.json"));
    let data_path = fixture(&format!("{model}.csv"));
    let out = lire_cli::run_command(&[
        "lire",
        "ce",
        "--model",
        model_path.to_str().unwrap(),
        "--data",
        data_path.to_str().unwrap(),
        "--query",
        query_file.to_str().unwrap(),
    ]);
    (out.code, out.stdout)
}

#[tokio::test]
async fn stump_upload_and_query() {
    let app = app();
    let req = Request::post("/models")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(multipart(&[("model", &read("stump.json")), ("data", &read("stump.csv"))]))
        .unwrap();
    let (status, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["M"], 2);
    assert_eq!(body["stats"], json!({"T": 1, "Delta": 1.0, "L": 2.0}));
    let id = body["id"].as_str().unwrap();

    let q = r#"{"source":[0.2],"metric":"l2sq","target":{"classes":[1]},"with_baselines":true}"#;
    let (status, res) = query(&app, id, q).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["distance"], 0.09);
    assert_eq!(res["witness_instance"], json!([0.8]));
    assert!((res["baselines"]["dataset"]["distance"].as_f64().unwrap() - 0.36).abs() < 1e-12);
    assert!(res["elapsed_ms"].as_f64().unwrap() >= 0.0);

    let dir = std::env::temp_dir().join(format!("lire-service-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("stump-query.json");
    std::fs::write(&file, q).unwrap();
    let (code, stdout) = cli_ce("stump", &file);
    assert_eq!(code, 0);
    assert_eq!(result_fields(res), serde_json::from_str::<Value>(&stdout).unwrap());
}

#[tokio::test]
async fn model_metadata_instances_and_delete() {
    let app = app();
    let id = upload(&app, "stump").await;
    let (status, list) = get(&app, "/models").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (_, info) = get(&app, &format!("/models/{id}")).await;
    assert_eq!((info["M"].clone(), info["N"].clone(), info["D"].clone()), (json!(2), json!(2), json!(1)));
    assert_eq!(info["outputs"], json!({"classes": [1, 1]}));
    let (status, inst) = get(&app, &format!("/models/{id}/instances/0")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(inst["x"], json!([0.3]));
    assert_eq!(inst["prediction"]["label"], 0);
    assert_eq!(get(&app, &format!("/models/{id}/instances/2")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/models/nope").await.0, StatusCode::NOT_FOUND);
    let del = Request::delete(format!("/models/{id}")).body(Body::empty()).unwrap();
    assert_eq!(send(&app, del).await.0, StatusCode::NO_CONTENT);
    assert_eq!(get(&app, &format!("/models/{id}")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let stump = upload(&app, "stump").await;
    let reg = upload(&app, "toy_regression").await;
    assert_eq!(query(&app, &stump, "{not json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        query(&app, &stump, r#"{"source":[0.2,0.1],"metric":"l1","target":{"classes":[1]}}"#).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        query(&app, &reg, r#"{"source":[0.2],"metric":"l1","target":{"classes":[1]}}"#).await.0,
        StatusCode::CONFLICT
    );
    let (status, body) = query(&app, &reg, r#"{"source":[0.2],"metric":"l1","target":{"intervals":[[1e9,"inf"]]}}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("no live target"));
    assert_eq!(query(&app, "missing", "{}").await.0, StatusCode::NOT_FOUND);
    let bad_upload = Request::post("/models")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(multipart(&[("model", "{}"), ("data", "0.1\n")]))
        .unwrap();
    assert_eq!(send(&app, bad_upload).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn growth_matches_library() {
    let app = app();
    let id = upload(&app, "toy_forest").await;
    let (status, body) = get(&app, &format!("/models/{id}/regions/growth?mode=by-depth&cap=1000")).await;
    assert_eq!(status, StatusCode::OK);
    let forest = Forest::from_json(&read("toy_forest.json")).unwrap();
    let data = Dataset::load_csv(fixture("toy_forest.csv"), false, None).unwrap();
    let curve = region_growth_curve(&forest, &data, GrowthMode::ByDepth, 1000).unwrap();
    assert_eq!(body, serde_json::to_value(&curve).unwrap());
}

#[tokio::test]
async fn server_side_paths() {
    let app = app();
    let req = Request::post("/models")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(multipart(&[
            ("model_path", fixture("toy_oblique.json").to_str().unwrap()),
            ("data_path", fixture("toy_oblique.csv").to_str().unwrap()),
        ]))
        .unwrap();
    let (status, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["stats"]["T"], 2);
}

/// Scripted queries answered identically by the service and the CLI.
#[tokio::test]
async fn service_matches_cli() {
    let app = app();
    let dir = std::env::temp_dir().join(format!("lire-service-eq-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (mut compared, mut answered) = (0, 0);
    for (model, queries) in [
        (
            "toy_forest",
            vec![
                r#"{"source":[0.1,0.9],"metric":"l1","target":{"classes":[0]}}"#,
                r#"{"source":[0.1,0.9],"metric":"l2sq","target":{"classes":[0]},"margin":0.01}"#,
                r#"{"source":[0.5,0.5],"metric":"l2sq","target":{"classes":[1]},"fix":{"0":0.5}}"#,
                r#"{"source":[0.9,0.1],"metric":"l1","target":{"classes":[1]},"bounds":{"1":[0,0.5]}}"#,
                r#"{"source":[0.9,0.1],"metric":"l2sq","weights":[1,4],"target":{"classes":[0,1]}}"#,
                r#"{"source":[-1,2],"metric":"l1","target":{"classes":[0]},"budget":{"regions":2}}"#,
                r#"{"source":[0.3,0.3],"metric":"l2sq","target":{"classes":[1]}}"#,
            ],
        ),
        (
            "toy_oblique",
            vec![
                r#"{"source":[0.2,0.2],"metric":"l2sq","target":{"classes":[1]}}"#,
                r#"{"source":[0.8,0.8],"metric":"l1","target":{"classes":[0]}}"#,
                r#"{"source":[0.5,0.1],"metric":"l2sq","target":{"classes":[0]},"margin":0.02}"#,
                r#"{"source":[0.5,0.1],"metric":"l1","target":{"classes":[1]},"fix":{"1":0.1}}"#,
                r#"{"source":[1.5,-0.5],"metric":"l2sq","target":{"classes":[1]}}"#,
                r#"{"source":[0.4,0.6],"metric":"l1","target":{"classes":[0]},"budget":{"regions":1}}"#,
            ],
        ),
        (
            "toy_regression",
            vec![
                r#"{"source":[0.1],"metric":"l2sq","target":{"intervals":[[0.5,"inf"]]}}"#,
                r#"{"source":[0.9],"metric":"l1","target":{"intervals":[["-inf",0]]}}"#,
                r#"{"source":[0.5],"metric":"l2sq","target":{"intervals":[[-0.2,0.2],[0.8,1.5]]}}"#,
                r#"{"source":[0.5],"metric":"l1","target":{"intervals":[["-inf","inf"]]}}"#,
                r#"{"source":[0.3],"metric":"l2sq","target":{"intervals":[[0,0.5]]},"margin":0.01}"#,
                r#"{"source":[0.7],"metric":"l1","target":{"intervals":[[1e9,"inf"]]}}"#,
                r#"{"source":[0.2],"metric":"l2sq","target":{"intervals":[[0.3,0.6]]},"bounds":{"0":[0,0.5]}}"#,
            ],
        ),
    ] {
        let id = upload(&app, model).await;
        for (i, q) in queries.iter().enumerate() {
            let file = dir.join(format!("{model}-{i}.json"));
            std::fs::write(&file, q).unwrap();
            let (code, stdout) = cli_ce(model, &file);
            let (status, body) = query(&app, &id, q).await;
            if code == 0 {
                assert_eq!(status, StatusCode::OK, "{model} {q}");
                assert_eq!(result_fields(body), serde_json::from_str::<Value>(&stdout).unwrap(), "{model} {q}");
                answered += 1;
            } else {
                assert_eq!(code, 2, "{model} {q}");
                assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{model} {q}");
            }
            compared += 1;
        }
    }
    assert_eq!(compared, 20);
    println!("{answered} of {compared} queries answered");
    assert!(answered >= 15);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_queries_do_not_interfere() {
    let app = app();
    let id = upload(&app, "toy_forest").await;
    let q = r#"{"source":[0.1,0.9],"metric":"l1","target":{"classes":[0]}}"#;
    let expected = result_fields(query(&app, &id, q).await.1);
    let handles: Vec<_> = (0..32)
        .map(|_| {
            let (app, id) = (app.clone(), id.clone());
            tokio::spawn(async move { result_fields(query(&app, &id, q).await.1) })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), expected);
    }
}
