use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use codesign_core::session::ProjectStore;
use codesign_core::toy::toy_first_iteration_graph;
use codesign_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let app = router(AppState::new(ProjectStore::open(dir.path()).unwrap()));
        Self { app, _dir: dir }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, Body::from))
            .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, text) = self.call(method, uri, body.map(|b| b.to_string())).await;
        (s, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn toy_project(&self, n: usize) -> String {
        let (s, body) = self
            .json(
                Method::POST,
                "/projects",
                Some(json!({"dataset": {"toy": {"n": n, "seed": 4}}, "settings": {"reps": 30, "master_seed": 9}})),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{body}");
        body["id"].as_str().unwrap().to_string()
    }
}

fn graph_json(g: &codesign_core::CausalGraph) -> Value {
    serde_json::from_str(&g.to_json().unwrap()).unwrap()
}

#[tokio::test]
async fn happy_path_record_count_matches_formula() {
    let api = Api::new();
    let id = api.toy_project(1000).await;
    let g = toy_first_iteration_graph();
    let (s, _) = api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(graph_json(&g))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, snap) = api
        .json(Method::POST, &format!("/projects/{id}/iterations"), Some(json!({"note": "draft"})))
        .await;
    assert_eq!(s, StatusCode::CREATED, "{snap}");
    assert_eq!(snap["index"], 1);
    let p = 7;
    let expected = 9 + 5 + 5 + p * (p + 1) / 2 + 2;
    assert_eq!(snap["family"]["records"].as_array().unwrap().len(), expected);

    let (s, summary) = api.json(Method::GET, &format!("/projects/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["iterations"][0]["records"], expected);
}

#[tokio::test]
async fn cycles_are_conflicts_with_the_path() {
    let api = Api::new();
    let id = api.toy_project(200).await;
    let cyclic = json!({
        "nodes": [{"name": "Wind_Speed"}, {"name": "Rotational_RPM"}, {"name": "Perceived_Noise"}],
        "edges": [
            {"parent": "Wind_Speed", "child": "Rotational_RPM", "belief": 3},
            {"parent": "Rotational_RPM", "child": "Perceived_Noise", "belief": 3},
            {"parent": "Perceived_Noise", "child": "Wind_Speed", "belief": 1}
        ]
    });
    let (s, body) = api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(cyclic)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "cycle");
    let path = body["error"]["detail"]["path"].as_array().unwrap();
    assert!(path.len() >= 4);
    assert_eq!(path.first(), path.last());
}

#[tokio::test]
async fn validation_and_lookup_errors() {
    let api = Api::new();
    let (s, _) = api.call(Method::POST, "/projects", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.json(Method::POST, "/projects", Some(json!({"dataset": {"toy": {"n": 1, "seed": 1}}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api
        .json(Method::POST, "/projects", Some(json!({"dataset": {"toy": {"n": 50, "seed": 1}}, "settings": {"q": 2.0}})))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.json(Method::GET, "/projects/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let id = api.toy_project(200).await;
    let (s, _) = api.json(Method::GET, &format!("/projects/{id}/iterations/1"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let unknown = json!({"nodes": [{"name": "Mystery"}], "edges": []});
    let (s, _) = api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(unknown)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.json(Method::GET, &format!("/projects/{id}/diff?from=1"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn fit_failures_are_unprocessable_with_detail() {
    let api = Api::new();
    let mut csv = String::from("X,Y,Z\n");
    for i in 0..40 {
        let x = i as f64 * 0.37 % 5.0;
        csv.push_str(&format!("{x},{},{}\n", 2.0 * x, (i as f64).sin()));
    }
    let (s, body) = api.json(Method::POST, "/projects", Some(json!({"dataset": {"csv": csv}}))).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    let id = body["id"].as_str().unwrap();
    let g = json!({
        "nodes": [{"name": "X"}, {"name": "Y"}, {"name": "Z"}],
        "edges": [{"parent": "X", "child": "Z", "belief": 2}, {"parent": "Y", "child": "Z", "belief": 2}]
    });
    let (s, _) = api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(g)).await;
    assert_eq!(s, StatusCode::OK);
    let (s, body) = api.json(Method::POST, &format!("/projects/{id}/iterations"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "singular_design");
    assert_eq!(body["error"]["detail"]["node"], "Z");
}

#[tokio::test]
async fn history_is_append_only_and_diffable() {
    let api = Api::new();
    let id = api.toy_project(800).await;
    let g = toy_first_iteration_graph();
    api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(graph_json(&g))).await;
    api.json(Method::POST, &format!("/projects/{id}/iterations"), Some(json!({"note": "first"}))).await;
    let pruned = g.remove_edge("Strength_Degradation", "Rotational_RPM").unwrap();
    api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(graph_json(&pruned))).await;
    let (s, snap) = api.json(Method::POST, &format!("/projects/{id}/iterations"), None).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(snap["index"], 2);

    let (s, diff) = api.json(Method::GET, &format!("/projects/{id}/diff?from=1&to=2"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(diff["edges_removed"][0]["parent"], "Strength_Degradation");
    assert_eq!(diff["edges_removed"][0]["child"], "Rotational_RPM");

    for method in [Method::DELETE, Method::PUT, Method::PATCH] {
        let (s, _) = api.call(method, &format!("/projects/{id}/iterations/1"), Some("{}".into())).await;
        assert_eq!(s, StatusCode::METHOD_NOT_ALLOWED);
    }
    let (s, _) = api.call(Method::DELETE, &format!("/projects/{id}/iterations"), None).await;
    assert_eq!(s, StatusCode::METHOD_NOT_ALLOWED);
    let (_, summary) = api.json(Method::GET, &format!("/projects/{id}"), None).await;
    assert_eq!(summary["iterations"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn dot_export_and_byte_stable_reads() {
    let api = Api::new();
    let id = api.toy_project(500).await;
    let g = toy_first_iteration_graph();
    api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(graph_json(&g))).await;
    api.json(Method::POST, &format!("/projects/{id}/iterations"), None).await;

    let uri = format!("/projects/{id}/iterations/1");
    let (_, a) = api.call(Method::GET, &uri, None).await;
    let (_, b) = api.call(Method::GET, &uri, None).await;
    assert_eq!(a, b);

    let (s, effects) = api.call(Method::GET, &format!("{uri}/dot?view=effects"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(effects.starts_with("digraph effects {"));
    assert_eq!(effects.matches(" -> ").count(), 9);
    let (s, cov) = api.call(Method::GET, &format!("{uri}/dot?view=cov"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cov.matches(" -- ").count(), 28);
    let (s, _) = api.call(Method::GET, &format!("{uri}/dot?view=sideways"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn correlations_table() {
    let api = Api::new();
    let id = api.toy_project(1000).await;
    let (s, table) = api.json(Method::GET, &format!("/projects/{id}/correlations?reps=99"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(table["pairs"].as_array().unwrap().len(), 21);
    assert_eq!(table["corr"].as_array().unwrap().len(), 7);
    let (_, again) = api.json(Method::GET, &format!("/projects/{id}/correlations?reps=99"), None).await;
    assert_eq!(table, again);
}

#[tokio::test]
async fn concurrent_iterations_are_serialised() {
    let api = Api::new();
    let id = api.toy_project(400).await;
    let g = toy_first_iteration_graph();
    api.json(Method::PUT, &format!("/projects/{id}/graph"), Some(graph_json(&g))).await;
    let uri = format!("/projects/{id}/iterations");
    let summary = format!("/projects/{id}");
    let (a, b, c) = tokio::join!(
        api.json(Method::POST, &uri, None),
        api.json(Method::POST, &uri, None),
        api.json(Method::GET, &summary, None),
    );
    assert_eq!(c.0, StatusCode::OK);
    let mut idx = vec![a.1["index"].as_u64().unwrap(), b.1["index"].as_u64().unwrap()];
    idx.sort();
    assert_eq!(idx, vec![1, 2]);
}

#[tokio::test]
async fn projects_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = router(AppState::new(ProjectStore::open(dir.path()).unwrap()));
    let api = Api { app: first, _dir: tempfile::tempdir().unwrap() };
    let id = api.toy_project(300).await;
    api.json(Method::POST, &format!("/projects/{id}/iterations"), None).await;
    let (_, before) = api.call(Method::GET, &format!("/projects/{id}/iterations/1"), None).await;

    let restarted = Api {
        app: router(AppState::new(ProjectStore::open(dir.path()).unwrap())),
        _dir: tempfile::tempdir().unwrap(),
    };
    let (s, after) = restarted.call(Method::GET, &format!("/projects/{id}/iterations/1"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(before, after);
}
