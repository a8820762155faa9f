//! HTTP API over the realignment pipeline.
//!
//! Endpoints: `GET /leagues`, `GET /leagues/{id}`, `POST /solve`,
//! `POST /diff`, `POST /exact`, `GET /health`. Bodies are UTF-8 JSON; errors
//! carry `{code, message, details}`.
//!
//! A solve that is not finished within [`Config::sync_budget`] answers `202`
//! with a token; posting `{"token": ...}` to `/solve` polls it. Finished
//! candidate pools are cached per request, and concurrent identical requests
//! share one computation.

mod error;
mod problem;

pub use error::ApiError;
pub use problem::{Problem, ProblemSpec, StructureRef};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use realign::datasets;
use realign::exact::{solve_exact, ExactOptions, ProofMethod, EXACT_TEAM_LIMIT};
use realign::geodesy::distance_matrix;
use realign::hullsplit::{generate, GenerateOptions};
use realign::reports::{hull_geojson, summary_table, travel_diff};
use realign::surrogate::{build_game_matrix, weighted_distance, ScoredStructure, TravelModel};
use realign::CandidateSet;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::sync::watch;

pub const DEFAULT_TOP_K: usize = 10;
pub const MAX_TOP_K: usize = 10_000;
pub const MAX_PER_PAGE: usize = 100;

#[derive(Clone, Debug)]
pub struct Config {
    /// How long `/solve` waits before answering `202`.
    pub sync_budget: Duration,
    /// Finished pools kept in memory.
    pub cache_capacity: usize,
    /// Upper bound on `/exact` wall time.
    pub exact_time_limit: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sync_budget: Duration::from_secs(2),
            cache_capacity: 64,
            exact_time_limit: Duration::from_secs(60),
        }
    }
}

type Outcome = Arc<Result<CandidateSet, ApiError>>;

struct Job {
    problem: Arc<Problem>,
    rx: watch::Receiver<Option<Outcome>>,
}

#[derive(Default)]
struct Cache {
    jobs: HashMap<String, Job>,
    order: VecDeque<String>,
}

struct AppState {
    config: Config,
    cache: Mutex<Cache>,
    computations: AtomicU64,
}

pub fn app() -> Router {
    app_with(Config::default())
}

pub fn app_with(config: Config) -> Router {
    let state = Arc::new(AppState { config, cache: Mutex::new(Cache::default()), computations: AtomicU64::new(0) });
    Router::new()
        .route("/leagues", get(leagues))
        .route("/leagues/{id}", get(league))
        .route("/solve", post(solve))
        .route("/diff", post(diff))
        .route("/exact", post(exact))
        .route("/health", get(health))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app()).await
}

/// Runs [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(addr))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn descriptor(id: &str) -> Result<Value, ApiError> {
    let ds = datasets::dataset(id)?;
    Ok(json!({
        "id": id,
        "teams": ds.len(),
        "templates": datasets::template_names(id),
        "default_template": datasets::default_template(id),
        "has_current_structure": ds.current_structure.is_some(),
    }))
}

async fn leagues() -> Result<Json<Value>, ApiError> {
    let list = datasets::LEAGUE_IDS.iter().map(|id| descriptor(id)).collect::<Result<Vec<_>, _>>()?;
    Ok(Json(Value::Array(list)))
}

async fn league(Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    if !datasets::LEAGUE_IDS.contains(&id.as_str()) {
        return Err(ApiError::not_found(format!("unknown league {id:?}")));
    }
    let ds = datasets::dataset(&id)?;
    let mut v = descriptor(&id)?;
    v["dataset"] = serde_json::from_str(&ds.to_json_string()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(v))
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    let cached = st.cache.lock().expect("cache lock").jobs.len();
    Json(json!({
        "status": "ok",
        "cached": cached,
        "computations": st.computations.load(Ordering::Relaxed),
    }))
}

#[derive(Debug, Deserialize)]
struct SolveRequest {
    #[serde(flatten)]
    problem: ProblemSpec,
    top_k: Option<usize>,
    filter_angle: Option<f64>,
    page: Option<usize>,
    per_page: Option<usize>,
    #[serde(default)]
    wait: bool,
    token: Option<String>,
}

fn token_of(key: &str) -> String {
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    format!("{:016x}", h.finish())
}

impl AppState {
    /// Existing job for `key`, or a new one computing `opts` on a blocking thread.
    fn job(self: &Arc<Self>, key: String, problem: Arc<Problem>, opts: GenerateOptions) -> (Arc<Problem>, watch::Receiver<Option<Outcome>>) {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(job) = cache.jobs.get(&key) {
            return (job.problem.clone(), job.rx.clone());
        }
        let (tx, rx) = watch::channel(None);
        let st = self.clone();
        let p = problem.clone();
        tokio::spawn(async move {
            st.computations.fetch_add(1, Ordering::Relaxed);
            let out = tokio::task::spawn_blocking(move || generate::<f64>(&p.dataset, &p.template, &opts).map_err(ApiError::from))
                .await
                .unwrap_or_else(|e| Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())));
            let _ = tx.send(Some(Arc::new(out)));
        });
        cache.jobs.insert(key.clone(), Job { problem: problem.clone(), rx: rx.clone() });
        cache.order.push_back(key);
        while cache.jobs.len() > self.config.cache_capacity.max(1) {
            let Some(victim) = cache.order.iter().position(|k| cache.jobs[k].rx.borrow().is_some()) else { break };
            let k = cache.order.remove(victim).expect("position in range");
            cache.jobs.remove(&k);
        }
        (problem, rx)
    }

    fn lookup(&self, token: &str) -> Option<(Arc<Problem>, watch::Receiver<Option<Outcome>>)> {
        let cache = self.cache.lock().expect("cache lock");
        cache.jobs.iter().find(|(k, _)| token_of(k) == token).map(|(_, j)| (j.problem.clone(), j.rx.clone()))
    }
}

async fn solve(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    match solve_inner(st, body).await {
        Ok(r) => r,
        Err(e) => e.into_response(),
    }
}

async fn solve_inner(st: Arc<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: SolveRequest = parse(&body)?;
    let page = req.page.unwrap_or(1).max(1);
    let per_page = req.per_page.unwrap_or(DEFAULT_TOP_K).clamp(1, MAX_PER_PAGE);
    let (key_token, problem, mut rx) = match (&req.token, &req.problem.dataset) {
        (Some(token), None) => {
            let (p, rx) = st.lookup(token).ok_or_else(|| ApiError::not_found(format!("unknown or expired token {token:?}")))?;
            (token.clone(), p, rx)
        }
        _ => {
            let problem = req.problem.resolve()?;
            let top_k = req.top_k.unwrap_or(DEFAULT_TOP_K);
            if top_k == 0 || top_k > MAX_TOP_K {
                return Err(ApiError::bad_request(format!("top_k must be in 1..={MAX_TOP_K}")));
            }
            let filter = req.filter_angle.unwrap_or(GenerateOptions::default().filter_angle_deg);
            if !(0.0..90.0).contains(&filter) {
                return Err(ApiError::bad_request("filter_angle must be in [0, 90)"));
            }
            let opts = GenerateOptions {
                filter_angle_deg: filter,
                top_k,
                keep_all: false,
                predicates: problem.predicates.clone(),
                jobs: 1,
            };
            let key = serde_json::to_string(&json!([
                problem.dataset.to_json_string(),
                problem.template.to_json(),
                problem.predicates,
                filter,
                top_k,
            ]))
            .expect("key serializes");
            let token = token_of(&key);
            let (p, rx) = st.job(key, Arc::new(problem), opts);
            (token, p, rx)
        }
    };
    let ready = if req.wait {
        rx.wait_for(Option::is_some).await.is_ok()
    } else {
        matches!(tokio::time::timeout(st.config.sync_budget, rx.wait_for(Option::is_some)).await, Ok(Ok(_)))
    };
    let outcome = rx.borrow().clone();
    match (ready, outcome) {
        (true, Some(out)) => match out.as_ref() {
            Ok(set) => solve_payload(&problem, set, page, per_page).map(|v| Json(v).into_response()),
            Err(e) => Err(e.clone()),
        },
        _ => Ok((StatusCode::ACCEPTED, Json(json!({"status": "pending", "token": key_token}))).into_response()),
    }
}

fn geojson_value(s: &realign::LeagueStructure, p: &Problem) -> Result<Value, ApiError> {
    let text = hull_geojson(s, &p.dataset)?;
    serde_json::from_str(&text).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn current_scored(p: &Problem) -> Result<Option<ScoredStructure<f64>>, ApiError> {
    match &p.dataset.current_structure {
        Some(c) if p.template.assign_slots(c).is_some() => {
            let g = build_game_matrix::<f64>(&p.template)?;
            Ok(Some(weighted_distance(c, &g, &distance_matrix::<f64>(&p.dataset))?))
        }
        _ => Ok(None),
    }
}

fn solve_payload(p: &Problem, set: &CandidateSet, page: usize, per_page: usize) -> Result<Value, ApiError> {
    if set.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unsatisfiable",
            "no structure satisfies the predicates",
        )
        .with_details(json!({"results": [], "rejected_by": set.stats.rejected_by})));
    }
    let best = set.entries[0].total;
    let start = (page - 1) * per_page;
    let slice = set.entries.iter().enumerate().skip(start).take(per_page);
    let mut results = Vec::new();
    for (k, e) in slice {
        results.push(json!({
            "rank": k + 1,
            "total": e.total,
            "over_best": e.total - best,
            "structure": e.structure.to_json(),
            "per_team": e.per_team,
            "geojson": geojson_value(&e.structure, p)?,
        }));
    }
    let current = current_scored(p)?;
    let mut rows: Vec<(&str, &str, &ScoredStructure<f64>)> = vec![("Best", p.template_label.as_str(), &set.entries[0])];
    if let Some(c) = &current {
        rows.push(("Current", p.template_label.as_str(), c));
    }
    Ok(json!({
        "league_id": p.dataset.league_id,
        "template": p.template_label,
        "teams": p.dataset.len(),
        "predicates": p.predicates,
        "total_candidates": set.len(),
        "page": page,
        "per_page": per_page,
        "pages": set.len().div_ceil(per_page),
        "results": results,
        "summary": summary_table(&rows),
        "stats": set.stats,
    }))
}

#[derive(Debug, Deserialize)]
struct DiffRequest {
    #[serde(flatten)]
    problem: ProblemSpec,
    a: StructureRef,
    b: StructureRef,
    slope: Option<f64>,
    intercept: Option<f64>,
}

async fn diff(body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: DiffRequest = parse(&body)?;
    let p = req.problem.resolve()?;
    let g = build_game_matrix::<f64>(&p.template)?;
    let dm = distance_matrix::<f64>(&p.dataset);
    let a = weighted_distance(&req.a.resolve(&p.dataset)?, &g, &dm)?;
    let b = weighted_distance(&req.b.resolve(&p.dataset)?, &g, &dm)?;
    let mut model = TravelModel::identity();
    if let Some(s) = req.slope {
        model.slope = s;
    }
    if let Some(i) = req.intercept {
        model.intercept = i;
    }
    let d = travel_diff(&a, &b, &model)?;
    Ok(Json(json!({
        "league_id": p.dataset.league_id,
        "a_total": a.total,
        "b_total": b.total,
        "diff": d,
    })))
}

#[derive(Debug, Deserialize)]
struct ExactRequest {
    #[serde(flatten)]
    problem: ProblemSpec,
    #[serde(default)]
    exhaustive: bool,
    node_limit: Option<u64>,
    time_limit_ms: Option<u64>,
}

async fn exact(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ExactRequest = parse(&body)?;
    let p = req.problem.resolve()?;
    if p.dataset.len() > EXACT_TEAM_LIMIT {
        return Err(realign::Error::TooLarge { teams: p.dataset.len(), limit: EXACT_TEAM_LIMIT }.into());
    }
    let limit = req.time_limit_ms.map(Duration::from_millis).unwrap_or(st.config.exact_time_limit);
    let opts = ExactOptions {
        method: if req.exhaustive { ProofMethod::Exhaustive } else { ProofMethod::BranchAndBound },
        node_limit: req.node_limit,
        time_limit: Some(limit.min(st.config.exact_time_limit)),
        ..ExactOptions::default()
    };
    let p = Arc::new(p);
    let q = p.clone();
    let out = tokio::task::spawn_blocking(move || solve_exact(&q.dataset, &q.template, &q.predicates, &opts))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    match out {
        Ok(r) => Ok(Json(json!({
            "status": "solved",
            "league_id": p.dataset.league_id,
            "proof": r.proof,
            "total": r.objective(),
            "structure": r.structure().to_json(),
            "geojson": geojson_value(r.structure(), &p)?,
            "nodes": r.nodes,
        }))),
        Err(realign::Error::BudgetExceeded { nodes, incumbent }) => Ok(Json(json!({
            "status": "budget-exceeded",
            "league_id": p.dataset.league_id,
            "nodes": nodes,
            "total": incumbent.as_ref().map(|i| i.total),
            "structure": incumbent.as_ref().map(|i| i.structure.to_json()),
        }))),
        Err(e) => Err(e.into()),
    }
}
