use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use realign::model::{GeoPoint, LeagueDataset, LeagueStructure, ScheduleProfile, StructureTemplate, Team, TeamId};
use realign_service::{app, app_with, Config};
use realign_testkit::{brute_force_optimum, distance_table, general_position_leagues, two_by_five};
use serde_json::{json, Value};
use std::time::Duration;
use tower::ServiceExt;

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    assert_eq!(res.headers()["content-type"], "application/json");
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    send(app, req).await
}

fn small_problem() -> (Value, Value, f64) {
    let t = two_by_five();
    let (_, sites) = general_position_leagues(4242, 1, 10).remove(0);
    let teams = sites
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| Team {
            id: TeamId(format!("T{i}")),
            name: format!("Team {i}"),
            city: format!("City {i}"),
            location: GeoPoint::new(lat, lon),
            country: "US".into(),
            tz_offset_hours: -5,
        })
        .collect();
    let ds = LeagueDataset::new("small", teams, None, None).unwrap();
    let (d, c, o) = t.totals;
    let template = StructureTemplate::new(&t.conference_sizes, &t.divisions, ScheduleProfile::totals(d, c, o)).unwrap();
    let (oracle, _, _) = brute_force_optimum(&distance_table(&sites), &t.away, &t.slot_sizes);
    (serde_json::from_str(&ds.to_json_string()).unwrap(), template.to_json(), oracle)
}

#[tokio::test]
async fn lists_bundled_leagues() {
    let app = app();
    let (status, v) = get(&app, "/leagues").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|l| l["id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 4);
    let nhl = v.as_array().unwrap().iter().find(|l| l["id"] == "nhl-2011").unwrap();
    assert_eq!(nhl["teams"], 30);
    assert_eq!(nhl["has_current_structure"], true);

    let req = Request::get("/leagues/nhl-2011").header("accept", "text/html").body(Body::empty()).unwrap();
    let (status, v) = send(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["dataset"]["teams"].as_array().unwrap().len(), 30);

    let (status, v) = get(&app, "/leagues/xfl-2020").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn solve_nhl_returns_ranked_pages() {
    let app = app();
    let (status, v) = post(&app, "/solve", json!({"dataset": "nhl-2011", "wait": true, "top_k": 25, "per_page": 10, "page": 2})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["total_candidates"], 25);
    assert_eq!(v["pages"], 3);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 10);
    assert_eq!(results[0]["rank"], 11);
    let ds = realign::datasets::dataset("nhl-2011").unwrap();
    let mut prev = 0.0;
    for r in results {
        let total = r["total"].as_f64().unwrap();
        assert!(total >= prev);
        prev = total;
        let s = LeagueStructure::from_json(&r["structure"]).unwrap();
        ds.check_partition(&s).unwrap();
        assert_eq!(r["geojson"]["type"], "FeatureCollection");
        let per_team: f64 = r["per_team"].as_object().unwrap().values().map(|x| x.as_f64().unwrap()).sum();
        assert!((per_team - total).abs() <= 1e-6 * total);
    }
    let summary = v["summary"].as_array().unwrap();
    assert_eq!(summary[0]["label"], "Best");
    assert_eq!(summary[0]["over_minimum"].as_f64(), Some(0.0));
    assert_eq!(summary[1]["label"], "Current");
    assert!(summary[1]["total"].as_f64().unwrap() > summary[0]["total"].as_f64().unwrap());
}

#[tokio::test]
async fn contradictory_predicates_are_unsatisfiable() {
    let app = app();
    let body = json!({
        "dataset": "nhl-2011",
        "wait": true,
        "predicates": [
            {"kind": "together", "params": {"teams": ["TB", "FLA"]}},
            {"kind": "apart", "params": {"teams": ["TB", "FLA"]}},
        ],
    });
    let (status, v) = post(&app, "/solve", body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "unsatisfiable");
    assert_eq!(v["details"]["results"], json!([]));

    let (status, v) = post(&app, "/solve", json!({"dataset": "nhl-2011", "predicates": [{"kind": "apart", "params": {"teams": ["TB", "ZZZ"]}}]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["details"]["team"], "ZZZ");

    let (status, _) = post(&app, "/solve", json!({"dataset": "nhl-2011", "template": "8x4"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&app, "/solve", json!({"dataset": "/etc/passwd"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn edits_relocate_a_team() {
    let app = app();
    let body = json!({"dataset": "nhl-2011", "wait": true, "top_k": 1, "edits": [{"move": {"team": "PHO", "city": "QUE"}}]});
    let (status, v) = post(&app, "/solve", body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let pho = v["results"][0]["geojson"]["features"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["properties"]["team_id"] == "PHO")
        .unwrap()
        .clone();
    assert_eq!(pho["properties"]["city"], "Quebec City");
    assert!(pho["geometry"]["coordinates"][1].as_f64().unwrap() > 46.0);
}

#[tokio::test]
async fn slow_requests_hand_out_a_token() {
    let app = app_with(Config { sync_budget: Duration::ZERO, ..Config::default() });
    let (status, v) = post(&app, "/solve", json!({"dataset": "mlb-2012", "top_k": 3})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(v["status"], "pending");
    let token = v["token"].as_str().unwrap().to_string();
    let (status, v) = post(&app, "/solve", json!({"token": token, "wait": true})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["league_id"], "mlb-2012");
    assert_eq!(v["total_candidates"], 3);
    let (status, _) = post(&app, "/solve", json!({"token": "0000000000000000"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn identical_requests_share_one_computation() {
    let app = app();
    let body = json!({"dataset": "nfl-2012", "wait": true, "top_k": 5});
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let (app, body) = (app.clone(), body.clone());
            tokio::spawn(async move { post(&app, "/solve", body).await })
        })
        .collect();
    let mut totals = Vec::new();
    for h in handles {
        let (status, v) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        totals.push(v["results"][0]["total"].as_f64().unwrap());
    }
    assert!(totals.windows(2).all(|w| w[0] == w[1]));
    let (_, h) = get(&app, "/health").await;
    assert_eq!(h["status"], "ok");
    assert_eq!(h["computations"], 1);
    assert_eq!(h["cached"], 1);

    let (status, _) = post(&app, "/solve", json!({"dataset": "nfl-2012", "wait": true, "top_k": 6})).await;
    assert_eq!(status, StatusCode::OK);
    let (_, h) = get(&app, "/health").await;
    assert_eq!(h["computations"], 2);
}

#[tokio::test]
async fn diff_between_structures() {
    let app = app();
    let (status, v) = post(&app, "/diff", json!({"dataset": "nhl-2011", "a": "current", "b": "current"})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["diff"]["delta_total"].as_f64(), Some(0.0));
    assert!(v["diff"]["teams"].as_array().unwrap().iter().all(|t| t["direction"] == "same"));

    let (_, solved) = post(&app, "/solve", json!({"dataset": "nhl-2011", "wait": true, "top_k": 1})).await;
    let best = solved["results"][0]["structure"].clone();
    let (status, v) = post(&app, "/diff", json!({"dataset": "nhl-2011", "a": "current", "b": best, "slope": 1.25})).await;
    assert_eq!(status, StatusCode::OK);
    let delta = v["diff"]["delta_total"].as_f64().unwrap();
    let expected = 1.25 * (v["b_total"].as_f64().unwrap() - v["a_total"].as_f64().unwrap());
    assert!((delta - expected).abs() <= 1e-6 * expected.abs());
    let wpg = v["diff"]["teams"].as_array().unwrap().iter().find(|t| t["team_id"] == "WPG").unwrap();
    assert!(wpg["delta"].as_f64().unwrap() < 0.0);

    let nfl = realign::datasets::dataset("nfl-2012").unwrap();
    let foreign = nfl.current_structure.unwrap().to_json();
    let (status, _) = post(&app, "/diff", json!({"dataset": "nhl-2011", "a": "current", "b": foreign})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn exact_solves_small_leagues_only() {
    let app = app();
    let (status, v) = post(&app, "/exact", json!({"dataset": "nhl-2011"})).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(v["code"], "too_large");
    assert_eq!(v["details"]["teams"], 30);

    let (dataset, template, oracle) = small_problem();
    let (status, v) = post(&app, "/exact", json!({"dataset": dataset, "template": template})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "solved");
    let total = v["total"].as_f64().unwrap();
    assert!((total - oracle).abs() <= 1e-9 * oracle);

    let (status, v) = post(&app, "/exact", json!({"dataset": dataset, "template": template, "node_limit": 1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "budget-exceeded");
}
