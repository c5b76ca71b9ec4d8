//! Service contract checks shared by the `api_contract` tests and the acceptance run.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tradao::demo::{self, DemoTree};
use tradao::service::Service;
use tradao::api;

fn schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/api.schema.json");
        serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
    })
}

fn assert_schema(def: &str, value: &Value) {
    let s = json!({ "$defs": schema()["$defs"], "$ref": format!("#/$defs/{def}") });
    let validator = jsonschema::validator_for(&s).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{def} schema violations: {errors:#?}");
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    service: Arc<Service>,
    app: Router,
    demo: DemoTree,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let service = Arc::new(Service::open(&root).unwrap());
    let demo = demo::seed(&service, demo::DEMO_SEED).unwrap();
    let app = api::router(service.clone());
    Fixture { _dir: dir, root, service, app, demo }
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, bytes) = call(app, Method::GET, uri, Body::empty()).await;
    (status, serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: {e}")))
}

async fn post(app: &Router, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, Method::POST, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: {e}")))
}

fn assert_error(res: &(StatusCode, Value), status: StatusCode, code: &str) {
    assert_eq!(res.0, status, "{}", res.1);
    assert_schema("Error", &res.1);
    assert_eq!(res.1["code"], code, "{}", res.1);
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["market", "records", "strategies"] {
        for entry in std::fs::read_dir(root.join(sub)).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                out.insert(format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn read_endpoints(f: &Fixture) -> Vec<(String, &'static str)> {
    let child = &f.demo.child.instance.id;
    let root = &f.demo.parent.instance.id;
    let sid = &f.demo.parent.instance.strategy_id;
    vec![
        ("/api/strategies".into(), "StrategyList"),
        (format!("/api/strategies/{sid}/tree"), "Tree"),
        (format!("/api/instances/{child}"), "InstanceDetail"),
        (format!("/api/instances/{root}"), "InstanceDetail"),
        (format!("/api/instances/{child}/record"), "Record"),
        (format!("/api/instances/{child}/parallel"), "Parallel"),
        (format!("/api/instances/{child}/correlation"), "Correlation"),
        (format!("/api/instances/{root}/correlation?window=10&bins=5"), "Correlation"),
        (format!("/api/instances/{child}/correlation?vars=coeff_1,diff_thre,spread"), "Correlation"),
        (format!("/api/instances/{child}/residuals?bins=12"), "Residuals"),
        (format!("/api/instances/{child}/cash"), "Cash"),
        (format!("/api/instances/{child}/cash?from=2020-08-01&to=2020-10-01&warning=990000&danger=985000"), "Cash"),
        (format!("/api/instances/{child}/trades"), "Trades"),
        (format!("/api/instances/{child}/trades?symbol=NSXUSD&from=2020-08-01&to=2020-10-01"), "Trades"),
        ("/api/market".into(), "MarketList"),
        ("/api/market/NSXUSD?from=2020-01-01&to=2020-02-01".into(), "Bars"),
        ("/api/market/SPXUSD/overlay".into(), "DatedValues"),
    ]
}

pub async fn every_read_endpoint_matches_its_schema() {
    let f = fixture();
    for (uri, def) in read_endpoints(&f) {
        let (status, body) = get(&f.app, &uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {body}");
        assert_schema(def, &body);
    }
}

pub async fn write_endpoints_match_their_schemas() {
    let f = fixture();
    let root = &f.demo.parent.instance.id;
    let body = json!({
        "parent_id": root,
        "label": "wide band",
        "params": {
            "model": "pairs", "symbol_a": "NSXUSD", "symbol_b": "SPXUSD", "lookback": 20,
            "coeff_1": "estimate", "diff_thre": 2.0, "exit_thre": 0.5, "cooldown": 2, "trade_size": 5
        },
        "period": { "start": "2019-01-02", "end": "2020-06-30" },
        "config": { "initial_capital": 500000.0, "commission_per_unit": 0.1 }
    });
    let res = post(&f.app, "/api/backtests", body.to_string()).await;
    assert_eq!(res.0, StatusCode::CREATED, "{}", res.1);
    assert_schema("InstanceResponse", &res.1);
    assert_eq!(res.1["instance"]["label"], "wide band");
    assert_eq!(res.1["instance"]["parent_id"], json!(root));

    let csv = "timestamp,open,high,low,close,volume\n2024-01-02,10,11,9,10.5,100\n2024-01-03,10.5,12,10,11,200\n";
    let res = post(&f.app, "/api/market?symbol=ABC", csv).await;
    assert_eq!(res.0, StatusCode::CREATED);
    assert_schema("MarketSummary", &res.1);
    assert_eq!(post(&f.app, "/api/market?symbol=ABC", csv).await.0, StatusCode::OK);
}

pub async fn ma_model_runs_through_the_api() {
    let f = fixture();
    let body = json!({
        "params": { "model": "ma", "symbol": "SPXUSD", "window_fast": 5, "window_slow": 20, "trade_size": 3 },
        "period": { "start": "2019-01-02", "end": "2020-12-01" }
    });
    let res = post(&f.app, "/api/backtests", body.to_string()).await;
    assert_eq!(res.0, StatusCode::CREATED, "{}", res.1);
    assert_eq!(res.1["instance"]["label"], "α1");
    let id = res.1["instance"]["id"].as_str().unwrap();
    let (status, tree) = get(&f.app, "/api/strategies/ma-SPXUSD/tree").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree["root"], json!(id));
    let (_, list) = get(&f.app, "/api/strategies").await;
    assert_eq!(list.as_array().unwrap().len(), 2);
}

pub async fn errors_carry_status_and_code() {
    let f = fixture();
    let child = f.demo.child.instance.id.clone();
    let pairs = |a: &str, b: &str| {
        json!({
            "model": "pairs", "symbol_a": a, "symbol_b": b, "lookback": 10,
            "coeff_1": "estimate", "diff_thre": 1.0, "exit_thre": 0.5, "cooldown": 0, "trade_size": 1
        })
    };
    let period = json!({ "start": "2019-01-02", "end": "2020-12-01" });

    assert_error(&get(&f.app, "/api/instances/nope").await, StatusCode::NOT_FOUND, "UnknownInstance");
    assert_error(&get(&f.app, "/api/instances/nope/cash").await, StatusCode::NOT_FOUND, "UnknownInstance");
    assert_error(&get(&f.app, "/api/strategies/nope/tree").await, StatusCode::NOT_FOUND, "UnknownStrategy");
    assert_error(&get(&f.app, "/api/market/NOPE").await, StatusCode::NOT_FOUND, "UnknownSymbol");
    assert_error(&get(&f.app, "/api/market/NOPE/overlay").await, StatusCode::NOT_FOUND, "UnknownSymbol");
    assert_error(&get(&f.app, "/api/no/such/route").await, StatusCode::NOT_FOUND, "NotFound");
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/cash?warning=abc")).await,
        StatusCode::BAD_REQUEST,
        "InvalidQuery",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/cash?bogus=1")).await,
        StatusCode::BAD_REQUEST,
        "InvalidQuery",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/cash?warning=10&danger=20")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidThresholds",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/cash?from=2020-05-01&to=2020-04-01")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidPeriod",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/trades?from=2030-01-01&to=2030-02-01")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidPeriod",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/correlation?window=1")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "WindowTooLarge",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/correlation?vars=coeff_1,spread,nope")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "UnknownVariable",
    );
    assert_error(
        &get(&f.app, &format!("/api/instances/{child}/residuals?bins=0")).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidBins",
    );

    let res = post(&f.app, "/api/backtests", json!({ "params": pairs("NSXUSD", "ZZZ"), "period": period }).to_string()).await;
    assert_error(&res, StatusCode::UNPROCESSABLE_ENTITY, "UnknownSymbol");
    assert!(res.1["message"].as_str().unwrap().contains("ZZZ"));

    assert_error(&post(&f.app, "/api/backtests", "{not json").await, StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation");
    assert_error(
        &post(&f.app, "/api/backtests", json!({ "params": pairs("NSXUSD", "SPXUSD"), "period": period, "extra": 1 }).to_string())
            .await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "SchemaViolation",
    );
    assert_error(
        &post(&f.app, "/api/backtests", json!({ "params": pairs("NSXUSD", "SPXUSD"), "period": period }).to_string()).await,
        StatusCode::CONFLICT,
        "SecondRoot",
    );
    assert_error(
        &post(
            &f.app,
            "/api/backtests",
            json!({ "params": pairs("NSXUSD", "SPXUSD"), "period": period, "parent_id": "ghost" }).to_string(),
        )
        .await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "UnknownParent",
    );
    assert_error(
        &post(
            &f.app,
            "/api/backtests",
            json!({ "params": pairs("NSXUSD", "SPXUSD"), "period": period, "parent_id": child, "id": child }).to_string(),
        )
        .await,
        StatusCode::CONFLICT,
        "DuplicateId",
    );
    let mut bad = pairs("NSXUSD", "SPXUSD");
    bad["lookback"] = json!(0);
    assert_error(
        &post(&f.app, "/api/backtests", json!({ "params": bad, "period": period, "parent_id": child }).to_string()).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidParams",
    );
    assert_error(
        &post(
            &f.app,
            "/api/backtests",
            json!({ "params": pairs("NSXUSD", "SPXUSD"), "period": { "start": "2030-01-01", "end": "2030-02-01" }, "parent_id": child })
                .to_string(),
        )
        .await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidPeriod",
    );
    assert_error(
        &post(&f.app, "/api/market?symbol=BAD", "timestamp,open,high,low,close,volume\n2024-01-02,10,9,11,10,1\n").await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidMarketData",
    );
    assert_error(&post(&f.app, "/api/market?symbol=../x", "").await, StatusCode::BAD_REQUEST, "InvalidQuery");
    assert_error(&post(&f.app, "/api/market", "").await, StatusCode::BAD_REQUEST, "InvalidQuery");
}

pub async fn restart_serves_identical_bytes() {
    let f = fixture();
    let mut before = Vec::new();
    for (uri, _) in read_endpoints(&f) {
        before.push(call(&f.app, Method::GET, &uri, Body::empty()).await);
    }
    let reopened = api::router(Arc::new(Service::open(&f.root).unwrap()));
    for ((uri, _), expected) in read_endpoints(&f).into_iter().zip(before) {
        let got = call(&reopened, Method::GET, &uri, Body::empty()).await;
        assert_eq!(got, expected, "{uri} changed across restart");
    }
}

pub async fn failed_runs_leave_the_store_untouched() {
    let f = fixture();
    let before = snapshot(&f.root);
    let (_, strategies_before) = get(&f.app, "/api/strategies").await;

    let period = json!({ "start": "2019-01-02", "end": "2020-12-01" });
    let ma = json!({ "model": "ma", "symbol": "NSXUSD", "window_fast": 3, "window_slow": 9, "trade_size": 1 });
    // Block the tree file so the commit fails after the record was written.
    std::fs::create_dir(f.root.join("strategies/ma-NSXUSD.json")).unwrap();
    let res = post(&f.app, "/api/backtests", json!({ "params": ma, "period": period }).to_string()).await;
    assert_error(&res, StatusCode::SERVICE_UNAVAILABLE, "StoreUnavailable");
    std::fs::remove_dir(f.root.join("strategies/ma-NSXUSD.json")).unwrap();

    let res = post(&f.app, "/api/backtests", json!({ "params": ma, "period": period, "parent_id": "ghost" }).to_string()).await;
    assert_eq!(res.0, StatusCode::UNPROCESSABLE_ENTITY);

    assert_eq!(snapshot(&f.root), before);
    assert_eq!(get(&f.app, "/api/strategies").await.1, strategies_before);
    f.service.check_integrity().unwrap();
    Service::open(&f.root).unwrap();

    let res = post(&f.app, "/api/backtests", json!({ "params": ma, "period": period }).to_string()).await;
    assert_eq!(res.0, StatusCode::CREATED, "{}", res.1);
}

pub async fn record_ingest_is_idempotent_per_client_id() {
    let f = fixture();
    let parent = f.demo.parent.instance.id.clone();
    let (_, mut record) = get(&f.app, &format!("/api/instances/{}/record", f.demo.sibling.instance.id)).await;
    record["instance_id"] = json!("client-run-7");
    let uri = format!("/api/instances?parent_id={parent}");

    let first = post(&f.app, &uri, record.to_string()).await;
    assert_eq!(first.0, StatusCode::CREATED, "{}", first.1);
    assert_schema("InstanceResponse", &first.1);
    assert_eq!(first.1["instance"]["id"], "client-run-7");
    assert_eq!(first.1["instance"]["label"], "γ2");
    let files = snapshot(&f.root);

    let again = post(&f.app, &uri, record.to_string()).await;
    assert_eq!(again.0, StatusCode::OK);
    assert_eq!(again.1, first.1);
    assert_eq!(snapshot(&f.root), files);

    record["commission_per_unit"] = json!(0.5);
    assert_error(&post(&f.app, &uri, record.to_string()).await, StatusCode::CONFLICT, "DuplicateId");

    record["instance_id"] = json!("");
    let generated = post(&f.app, &uri, record.to_string()).await;
    assert_eq!(generated.0, StatusCode::CREATED);
    assert_ne!(generated.1["instance"]["id"], "");

    record["transactions"][0]["symbol"] = json!("QQQ");
    let res = post(&f.app, &uri, record.to_string()).await;
    assert!(res.0.is_client_error(), "{}", res.1);

    let mut alien = record.clone();
    alien["instance_id"] = json!("alien");
    alien["params"]["symbol_b"] = json!("QQQ");
    let res = post(&f.app, "/api/instances", alien.to_string()).await;
    assert_error(&res, StatusCode::UNPROCESSABLE_ENTITY, "UnknownSymbol");
    assert!(res.1["message"].as_str().unwrap().contains("QQQ"));
}
