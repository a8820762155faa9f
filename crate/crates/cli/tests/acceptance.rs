//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Run with `cargo test -p realign-cli --test acceptance`.

use realign::datasets;
use realign::exact::{build_mip, solve_exact, ExactOptions, ProofMethod};
use realign::geodesy::{distance_matrix, projection};
use realign::hullsplit::{candidate_lines, division_hulls_disjoint, generate, GenerateOptions};
use realign::model::{GeoPoint, LeagueDataset, LeagueStructure, ScheduleProfile, StructureTemplate, Team, TeamId};
use realign::reports::{fuel_estimate, DEFAULT_GALLONS_PER_MILE};
use realign::surrogate::{build_game_matrix, fit_travel_model, slot_assignment, weighted_distance, ScoredStructure};
use realign_testkit::{brute_force_optimum, distance_table, general_position_leagues, suite_templates, SyntheticTemplate};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

/// Relative agreement between a heuristic or exact D and the enumeration optimum.
const ORACLE_REL_TOL: f64 = 1e-9;
/// Leagues per synthetic template (four templates).
const SEEDS_PER_TEMPLATE: usize = 14;
const MIN_SYNTHETIC_LEAGUES: usize = 50;
const ORACLE_TIME_BUDGET: Duration = Duration::from_secs(120);
const NHL_TIME_BUDGET: Duration = Duration::from_secs(300);
const NHL_GAP_BAND: (f64, f64) = (15_000.0, 45_000.0);
const RATIO_BAND: (f64, f64) = (1.12, 1.28);
/// NBA current-over-best gap as a fraction of current D.
const NBA_GAP_FRACTION: f64 = 0.001;
/// Two structures score equally when D agrees to this relative tolerance.
const EQUAL_SCORE_REL_TOL: f64 = 1e-9;
const MIN_RAW_CANDIDATES: u64 = 50_000;
const LINE_RETENTION_BAND: (usize, usize) = (15, 25);
const NHL_PAIR_LINES: usize = 435;
const REGRESSION_TOL: f64 = 1e-9;
const R_SQUARED_TOL: f64 = 1e-12;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn synthetic_league(sites: &[(f64, f64)]) -> LeagueDataset {
    let teams = sites
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| Team {
            id: TeamId(format!("S{i:02}")),
            name: format!("Synthetic {i}"),
            city: format!("Site {i}"),
            location: GeoPoint::new(lat, lon),
            country: "US".into(),
            tz_offset_hours: -5,
        })
        .collect();
    LeagueDataset::new("synthetic", teams, None, None).unwrap()
}

fn template_of(t: &SyntheticTemplate) -> StructureTemplate {
    let (d, c, o) = t.totals;
    StructureTemplate::new(&t.conference_sizes, &t.divisions, ScheduleProfile::totals(d, c, o)).unwrap()
}

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

struct SuiteCase {
    name: String,
    seed: u64,
    dataset: LeagueDataset,
    template: StructureTemplate,
    optimum: f64,
}

fn synthetic_suite() -> Vec<SuiteCase> {
    let mut cases = Vec::new();
    for t in suite_templates() {
        for (seed, sites) in general_position_leagues(0, SEEDS_PER_TEMPLATE, t.team_count()) {
            let (optimum, _, _) = brute_force_optimum(&distance_table(&sites), &t.away, &t.slot_sizes);
            cases.push(SuiteCase {
                name: t.name.to_string(),
                seed,
                dataset: synthetic_league(&sites),
                template: template_of(&t),
                optimum,
            });
        }
    }
    cases
}

fn oracle_optimality(suite: &[SuiteCase], enumeration: Duration) -> Outcome {
    let start = Instant::now();
    let opts = GenerateOptions { filter_angle_deg: 0.0, ..Default::default() };
    let mut misses = Vec::new();
    for c in suite {
        let best = generate::<f64>(&c.dataset, &c.template, &opts).unwrap().best().map(|b| b.total);
        if !best.is_some_and(|b| rel_eq(b, c.optimum, ORACLE_REL_TOL)) {
            misses.push(format!("{} seed {}", c.name, c.seed));
        }
    }
    let elapsed = start.elapsed() + enumeration;
    let pass = suite.len() >= MIN_SYNTHETIC_LEAGUES && misses.is_empty() && elapsed < ORACLE_TIME_BUDGET;
    Outcome {
        name: "oracle optimality",
        pass,
        detail: format!(
            "{}/{} synthetic leagues optimal, {:.1}s including enumeration{}",
            suite.len() - misses.len(),
            suite.len(),
            elapsed.as_secs_f64(),
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(", ")) }
        ),
    }
}

fn pairing_is_consistent(c: &SuiteCase, structure: &LeagueStructure) -> bool {
    let model = build_mip(&c.dataset, &c.template).unwrap();
    let g = build_game_matrix::<f64>(&c.template).unwrap();
    let slot_of = slot_assignment(structure, &g, &distance_matrix::<f64>(&c.dataset)).unwrap();
    let x = model.assignment_values(&slot_of);
    let y = model.optimal_pairing(&x);
    if !model.violations(&x, &y).is_empty() {
        return false;
    }
    let (n, s) = (model.team_count(), model.slots());
    (0..n).all(|u| {
        (0..n).all(|v| {
            (0..s).all(|i| {
                (0..s).all(|j| (y[model.y_index(u, v, i, j)] == 1) == (x[u * s + i] == 1 && x[v * s + j] == 1))
            })
        })
    })
}

fn mip_consistency(suite: &[SuiteCase]) -> Outcome {
    let mut misses = Vec::new();
    let mut inconsistent = Vec::new();
    for c in suite {
        let r = solve_exact(&c.dataset, &c.template, &[], &ExactOptions::default()).unwrap();
        if r.proof != ProofMethod::BranchAndBound || !rel_eq(r.objective(), c.optimum, ORACLE_REL_TOL) {
            misses.push(format!("{} seed {}", c.name, c.seed));
        }
        if !pairing_is_consistent(c, r.structure()) {
            inconsistent.push(format!("{} seed {}", c.name, c.seed));
        }
    }
    Outcome {
        name: "MIP consistency",
        pass: misses.is_empty() && inconsistent.is_empty(),
        detail: format!(
            "branch-and-bound optimal on {}/{}, y consistent on {}/{}",
            suite.len() - misses.len(),
            suite.len(),
            suite.len() - inconsistent.len(),
            suite.len()
        ),
    }
}

fn current_of(ds: &LeagueDataset, t: &StructureTemplate) -> ScoredStructure<f64> {
    let g = build_game_matrix::<f64>(t).unwrap();
    weighted_distance(ds.current_structure.as_ref().unwrap(), &g, &distance_matrix::<f64>(ds)).unwrap()
}

fn best_of(ds: &LeagueDataset, t: &StructureTemplate, presets: &[&str]) -> ScoredStructure<f64> {
    let predicates = presets.iter().flat_map(|p| realign::constraints::preset(p).unwrap()).collect();
    let opts = GenerateOptions { top_k: 1, predicates, ..Default::default() };
    generate::<f64>(ds, t, &opts).unwrap().entries.remove(0)
}

fn league(id: &str) -> (LeagueDataset, StructureTemplate) {
    let t = datasets::default_template(id).unwrap();
    (datasets::dataset(id).unwrap(), datasets::template(id, t).unwrap())
}

fn nhl_table() -> Outcome {
    let start = Instant::now();
    let (ds, t) = league("nhl-2011");
    let rows = [
        ("Best", best_of(&ds, &t, &[]).total),
        ("FLA-TB", best_of(&ds, &t, &["fla-tb"]).total),
        ("Rivalries", best_of(&ds, &t, &["nhl-rivalries"]).total),
        ("3-CAN", best_of(&ds, &t, &["nhl-full"]).total),
        ("Current", current_of(&ds, &t).total),
    ];
    let elapsed = start.elapsed();
    let increasing = rows.windows(2).all(|w| w[0].1 < w[1].1);
    let gap = rows[4].1 - rows[0].1;
    let in_band = (NHL_GAP_BAND.0..=NHL_GAP_BAND.1).contains(&gap);
    let over: Vec<String> = rows.iter().map(|(l, d)| format!("{l} +{:.0}", d - rows[0].1)).collect();
    Outcome {
        name: "NHL summary ordering and gap",
        pass: increasing && in_band && elapsed < NHL_TIME_BUDGET,
        detail: format!(
            "ordering {} ({}); Current-Best gap {gap:.0} mi vs band [{:.0}, {:.0}]; {:.1}s",
            if increasing { "strictly increasing" } else { "NOT increasing" },
            over.join(", "),
            NHL_GAP_BAND.0,
            NHL_GAP_BAND.1,
            elapsed.as_secs_f64()
        ),
    }
}

fn ratio(id: &str, name: &'static str) -> Outcome {
    let (ds, t) = league(id);
    let cur = current_of(&ds, &t).total;
    let best = best_of(&ds, &t, &[]).total;
    let r = cur / best;
    Outcome {
        name,
        pass: (RATIO_BAND.0..=RATIO_BAND.1).contains(&r),
        detail: format!("Current/Best = {cur:.0}/{best:.0} = {r:.4} vs band [{}, {}]", RATIO_BAND.0, RATIO_BAND.1),
    }
}

fn swapped(s: &LeagueStructure, a: &str, b: &str) -> LeagueStructure {
    let mut out = s.clone();
    for conf in &mut out.conferences {
        for div in &mut conf.divisions {
            for id in div.iter_mut() {
                if id.as_str() == a {
                    *id = TeamId::new(b);
                } else if id.as_str() == b {
                    *id = TeamId::new(a);
                }
            }
        }
    }
    out
}

fn nba_near_optimal() -> Outcome {
    let (ds, t) = league("nba-2012");
    let cur = current_of(&ds, &t);
    let best = best_of(&ds, &t, &[]);
    let gap = cur.total - best.total;
    let swap = swapped(ds.current_structure.as_ref().unwrap(), "POR", "PHX");
    let g = build_game_matrix::<f64>(&t).unwrap();
    let swap_d = weighted_distance(&swap, &g, &distance_matrix::<f64>(&ds)).unwrap().total;
    let is_swap = best.structure.same_divisions(&swap);
    let equal_score = rel_eq(best.total, swap_d, EQUAL_SCORE_REL_TOL);
    Outcome {
        name: "NBA near-optimality",
        pass: gap <= NBA_GAP_FRACTION * cur.total && (is_swap || equal_score),
        detail: format!(
            "gap {gap:.0} mi = {:.4}% of current (limit {}%); best {} the POR/PHX swap of current (swap D {swap_d:.0}, {:+.1} mi vs best)",
            100.0 * gap / cur.total,
            100.0 * NBA_GAP_FRACTION,
            if is_swap { "is" } else if equal_score { "scores equal to" } else { "differs from" },
            swap_d - best.total
        ),
    }
}

fn candidate_volume() -> Outcome {
    let (ds, t) = league("nhl-2011");
    let set = generate::<f64>(&ds, &t, &GenerateOptions::default()).unwrap();
    let st = &set.stats;
    let proj = projection::<f64>(&ds);
    let pair_lines = candidate_lines(&ds.ids(), &proj.points).len();
    let pass = st.raw_candidates > MIN_RAW_CANDIDATES
        && (LINE_RETENTION_BAND.0..=LINE_RETENTION_BAND.1).contains(&st.lines_kept)
        && pair_lines == NHL_PAIR_LINES
        && st.lines_considered == NHL_PAIR_LINES;
    Outcome {
        name: "candidate volume",
        pass,
        detail: format!(
            "{} raw candidates (> {MIN_RAW_CANDIDATES}); {} conference lines kept (band [{}, {}]); {pair_lines} pair lines",
            st.raw_candidates, st.lines_kept, LINE_RETENTION_BAND.0, LINE_RETENTION_BAND.1
        ),
    }
}

fn hull_disjointness() -> Outcome {
    let mut checked = 0usize;
    let mut bad = Vec::new();
    for id in datasets::LEAGUE_IDS {
        let (ds, t) = league(id);
        let set = generate::<f64>(&ds, &t, &GenerateOptions::default()).unwrap();
        for (k, e) in set.entries.iter().enumerate() {
            checked += 1;
            if !division_hulls_disjoint(&e.structure, &ds).unwrap() {
                bad.push(format!("{id} #{}", k + 1));
            }
        }
    }
    Outcome {
        name: "hull disjointness",
        pass: bad.is_empty() && checked > 0,
        detail: format!("{}/{checked} generated structures over four leagues hull-disjoint", checked - bad.len()),
    }
}

fn regression() -> Outcome {
    let fixtures = [(2.5, 1234.5), (0.75, -300.0), (1.0, 0.0), (3.2e-1, 98_765.4321)];
    let mut worst: f64 = 0.0;
    let mut r2_ok = true;
    for &(slope, intercept) in &fixtures {
        let mut x = BTreeMap::new();
        let mut y = BTreeMap::new();
        for k in 0..30 {
            let id = TeamId(format!("T{k:02}"));
            let s = 10_000.0 + 1_733.0 * k as f64 + if k % 3 == 0 { 511.0 } else { 0.0 };
            x.insert(id.clone(), s);
            y.insert(id, slope * s + intercept);
        }
        let m = fit_travel_model(&x, &y).unwrap();
        worst = worst
            .max((m.slope - slope).abs() / slope.abs())
            .max((m.intercept - intercept).abs() / intercept.abs().max(1.0));
        r2_ok &= (m.r_squared - 1.0).abs() <= R_SQUARED_TOL;
    }
    let fuel = fuel_estimate(160_000.0, DEFAULT_GALLONS_PER_MILE);
    Outcome {
        name: "regression and fuel",
        pass: worst <= REGRESSION_TOL && r2_ok && fuel.gallons == 800_000.0,
        detail: format!(
            "worst relative coefficient error {worst:.2e} over {} fixtures, R^2 = 1 {}; 160000 mi -> {} gal",
            fixtures.len(),
            if r2_ok { "on all" } else { "NOT on all" },
            fuel.gallons
        ),
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
        }
    }
    out
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_realign");
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let t = realign_testkit::two_by_five();
    let (_, sites) = general_position_leagues(2024, 1, t.team_count()).remove(0);
    std::fs::write(w.join("ten.json"), synthetic_league(&sites).to_json_string()).unwrap();
    std::fs::write(w.join("ten-template.json"), template_of(&t).to_json().to_string()).unwrap();
    std::fs::write(
        w.join("que.json"),
        r#"{"base": "nhl-2011", "edits": [{"move": {"team": "PHO", "city": "QUE"}}], "template": "6x5", "top_k": 25}"#,
    )
    .unwrap();
    std::fs::write(
        w.join("expansion.json"),
        r#"{"base": "nhl-2011", "edits": [{"move": {"team": "PHO", "city": "LV"}}, {"add": {"id": "ONT", "city": "ONT"}}, {"add": {"id": "QUE", "city": "QUE"}}], "template": "8x4"}"#,
    )
    .unwrap();
    let ten = w.join("ten.json").display().to_string();
    let ten_t = w.join("ten-template.json").display().to_string();
    let que = w.join("que.json").display().to_string();
    let exp = w.join("expansion.json").display().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("generate", vec!["generate", "--dataset", "nhl-2011", "--template", "6x5", "--top", "100"]),
        ("generate-constrained", vec!["generate", "--dataset", "nhl-2011", "--constraints", "nhl-rivalries", "--jobs", "4"]),
        ("exact", vec!["exact", "--dataset", &ten, "--template", &ten_t]),
        ("exact-parallel", vec!["exact", "--dataset", &ten, "--template", &ten_t, "--jobs", "4"]),
        ("exact-export", vec!["exact", "--dataset", "nhl-2011", "--export-only"]),
        ("scenario", vec!["scenario", "--file", &que]),
        ("scenario-expansion", vec!["scenario", "--file", &exp]),
        (
            "report",
            vec!["report", "--dataset", "nhl-2011", "--variant", "FLA-TB=fla-tb", "--variant", "Rivalries=nhl-rivalries"],
        ),
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (label, args) in &runs {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out = w.join(format!("{label}-{round}"));
            let status = Command::new(bin).args(args).arg("--out").arg(&out).output().unwrap();
            if !status.status.success() {
                failures.push(format!("{label} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr).trim()));
            }
            outputs.push(snapshot(&out));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            failures.push(format!("{label} artifacts differ or are missing"));
        }
        files += outputs[0].len();
    }
    Outcome {
        name: "CLI determinism",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} invocations run twice, {files} artifacts byte-identical", runs.len())
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    let start = Instant::now();
    let suite = synthetic_suite();
    let enumeration = start.elapsed();
    let outcomes = [
        oracle_optimality(&suite, enumeration),
        mip_consistency(&suite),
        nhl_table(),
        ratio("mlb-2012", "MLB current/best ratio"),
        ratio("nfl-2012", "NFL current/best ratio"),
        nba_near_optimal(),
        candidate_volume(),
        hull_disjointness(),
        regression(),
        determinism(),
    ];
    println!();
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed ({:.1}s)", outcomes.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
