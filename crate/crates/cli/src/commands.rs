use crate::*;
use realign::constraints::{parse_constraints, preset, Predicate};
use realign::exact::{
    add_exclusions, build_mip, certify, export_lp, far_pairs, solve_exact, ExactOptions, ProofMethod, EXACT_TEAM_LIMIT,
};
use realign::geodesy::distance_matrix;
use realign::hullsplit::{generate, GenerateOptions};
use realign::model::{LeagueDataset, LeagueStructure, StructureTemplate, TeamId};
use realign::reports::{
    candidates_csv, diff_csv, fuel_estimate, hull_geojson, summary_csv, summary_table, travel_diff, SummaryRow,
};
use realign::scenarios::{resolve_dataset, run_scenario, Scenario};
use realign::surrogate::{build_game_matrix, fit_travel_model, weighted_distance, ScoredStructure, TravelModel};
use realign::Error;
use serde_json::{json, Value};
use std::fs;
use std::path::Path;
use std::time::Duration;

/// Runs one parsed invocation and returns its exit status.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Exact(a) => cmd_exact(&a),
        Command::Scenario(a) => cmd_scenario(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Serve(a) => cmd_serve(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_all(out: &Path, files: &[(&str, String)]) -> Result<()> {
    let io = |source| CliError::Io { path: out.display().to_string(), source };
    fs::create_dir_all(out).map_err(io)?;
    for (name, text) in files {
        let path = out.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    }
    Ok(())
}

struct League {
    dataset: LeagueDataset,
    template: StructureTemplate,
    template_label: String,
    predicates: Vec<Predicate>,
}

fn load_template(dataset: &LeagueDataset, spec: Option<&str>) -> Result<(StructureTemplate, String)> {
    let name = match spec {
        Some(s) => s.to_string(),
        None => realign::datasets::default_template(&dataset.league_id)
            .ok_or_else(|| CliError::Input(format!("no default template for {}; pass --template", dataset.league_id)))?
            .to_string(),
    };
    let path = Path::new(&name);
    if path.is_file() {
        let label = path.file_stem().map_or(name.clone(), |s| s.to_string_lossy().into_owned());
        return Ok((StructureTemplate::from_json_str(&read(path)?)?, label));
    }
    Ok((realign::datasets::template(&dataset.league_id, &name)?, name))
}

fn load_constraints(items: &[String]) -> Result<Vec<Predicate>> {
    let mut out = Vec::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let path = Path::new(item);
        if path.is_file() {
            out.extend(parse_constraints(&read(path)?)?);
        } else {
            out.extend(preset(item)?);
        }
    }
    Ok(out)
}

fn load_league(a: &LeagueArgs) -> Result<League> {
    let dataset = resolve_dataset(&a.dataset)?;
    let (template, template_label) = load_template(&dataset, a.template.as_deref())?;
    if template.team_count() != dataset.len() {
        return Err(CliError::Input(format!(
            "template {template_label} holds {} teams but {} has {}",
            template.team_count(),
            dataset.league_id,
            dataset.len()
        )));
    }
    let predicates = load_constraints(&a.constraints)?;
    for p in &predicates {
        p.check_against(&dataset)?;
    }
    Ok(League { dataset, template, template_label, predicates })
}

fn options(search: &SearchArgs, top: usize, predicates: Vec<Predicate>) -> Result<GenerateOptions> {
    if search.jobs == 0 {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    Ok(GenerateOptions {
        filter_angle_deg: search.filter_angle,
        top_k: top.max(1),
        keep_all: search.keep_all,
        predicates,
        jobs: search.jobs,
    })
}

fn no_survivors(stats: &realign::GenerationStats) -> CliError {
    let counts = stats
        .rejected_by
        .iter()
        .map(|(p, n)| format!("{p}: {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    CliError::Input(format!("no candidate satisfies the constraints (rejections: {counts})"))
}

fn ranked_artifacts(
    dataset: &LeagueDataset,
    group: &str,
    entries: &[ScoredStructure<f64>],
) -> Result<Vec<(&'static str, String)>> {
    let labels: Vec<String> = (1..=entries.len()).map(|k| format!("#{k}")).collect();
    let rows: Vec<(&str, &str, &ScoredStructure<f64>)> =
        labels.iter().zip(entries).map(|(l, e)| (l.as_str(), group, e)).collect();
    Ok(vec![
        (CANDIDATES_CSV, candidates_csv(entries)?),
        (SUMMARY_CSV, summary_csv(&summary_table(&rows))?),
        (BEST_GEOJSON, hull_geojson(&entries[0].structure, dataset)?),
    ])
}

fn cmd_generate(a: &GenerateArgs) -> Result<u8> {
    let league = load_league(&a.league)?;
    let opts = options(&a.search, a.top, league.predicates.clone())?;
    let set = generate::<f64>(&league.dataset, &league.template, &opts)?;
    if set.is_empty() {
        return Err(no_survivors(&set.stats));
    }
    let entries = &set.entries[..set.len().min(a.top.max(1))];
    write_all(&a.out, &ranked_artifacts(&league.dataset, &league.template_label, entries)?)?;
    println!(
        "{}: {} structures ranked, best D = {:.1} miles ({} raw candidates, {} top-level lines kept)",
        league.dataset.league_id,
        entries.len(),
        entries[0].total,
        set.stats.raw_candidates,
        set.stats.lines_kept
    );
    Ok(0)
}

fn cmd_scenario(a: &ScenarioArgs) -> Result<u8> {
    let mut scenario = Scenario::from_json_str(&read(&a.file)?)?;
    if let Some(top) = a.top {
        scenario.top_k = top;
    }
    let opts = options(&a.search, scenario.top_k, Vec::new())?;
    let run = run_scenario(&scenario, &opts)?;
    if run.candidates.is_empty() {
        return Err(no_survivors(&run.candidates.stats));
    }
    let group = match &scenario.template {
        realign::scenarios::TemplateSpec::Named(n) => n.clone(),
        realign::scenarios::TemplateSpec::Inline(_) => "inline".to_string(),
    };
    write_all(&a.out, &ranked_artifacts(&run.dataset, &group, &run.candidates.entries)?)?;
    println!(
        "scenario on {} ({} teams): best D = {:.1} miles",
        scenario.base,
        run.dataset.len(),
        run.candidates.entries[0].total
    );
    Ok(0)
}

fn exclusion_pairs(predicates: &[Predicate]) -> Result<Vec<(TeamId, TeamId)>> {
    let mut pairs = Vec::new();
    for p in predicates {
        match p {
            Predicate::Apart { teams } => {
                for (k, u) in teams.iter().enumerate() {
                    for v in &teams[k + 1..] {
                        pairs.push((u.clone(), v.clone()));
                    }
                }
            }
            other => {
                return Err(CliError::Input(format!("the LP export can encode apart constraints only, not {other}")))
            }
        }
    }
    Ok(pairs)
}

fn cmd_exact(a: &ExactArgs) -> Result<u8> {
    let league = load_league(&a.league)?;
    let (ds, template) = (&league.dataset, &league.template);
    if a.jobs == 0 {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    let heuristic_opts = GenerateOptions {
        filter_angle_deg: a.filter_angle,
        top_k: 1,
        keep_all: false,
        predicates: league.predicates.clone(),
        jobs: a.jobs,
    };
    let heuristic = generate::<f64>(ds, template, &heuristic_opts)?.entries.into_iter().next();

    if a.export_only || ds.len() > EXACT_TEAM_LIMIT {
        let mut pairs = exclusion_pairs(&league.predicates)?;
        if let Some(miles) = a.exclude_above {
            pairs.extend(far_pairs(ds, miles));
        }
        let mut model = add_exclusions(&build_mip(ds, template)?, &pairs)?;
        if let Some(h) = &heuristic {
            model = model.with_warm_start(&h.structure, template)?;
        }
        let mut files = vec![(MODEL_LP, export_lp(&model))];
        if let Some(start) = model.warm_start_text() {
            files.push((WARM_START, start));
        }
        write_all(&a.out, &files)?;
        if !a.export_only {
            eprintln!(
                "{} teams exceed the internal solver limit of {EXACT_TEAM_LIMIT}; wrote the model for an external solver",
                ds.len()
            );
        }
        println!(
            "model: {} binaries ({} x, {} y), {} rows, {} exclusion pairs",
            model.binary_count(),
            model.x_count(),
            model.y_count(),
            model.rows.len(),
            model.exclusions.len()
        );
        return Ok(0);
    }

    let opts = ExactOptions {
        method: match a.method {
            MethodArg::BranchAndBound => ProofMethod::BranchAndBound,
            MethodArg::Exhaustive => ProofMethod::Exhaustive,
        },
        node_limit: a.node_limit,
        time_limit: match a.time_limit {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                return Err(CliError::Input("--time-limit must be a positive number of seconds".into()))
            }
            s => s.map(Duration::from_secs_f64),
        },
        jobs: a.jobs,
        warm_start: heuristic.as_ref().map(|h| h.structure.clone()),
    };
    let predicates: Vec<String> = league.predicates.iter().map(|p| p.to_string()).collect();
    let mut cert = json!({
        "league_id": ds.league_id,
        "template": league.template_label,
        "teams": ds.len(),
        "predicates": predicates,
    });
    match solve_exact(ds, template, &league.predicates, &opts) {
        Ok(result) => {
            cert["status"] = json!("solved");
            cert["proof"] = json!(result.proof);
            cert["exact_total"] = json!(result.objective());
            cert["structure"] = result.structure().to_json();
            if let Some(h) = &heuristic {
                let c = certify(h, &result)?;
                cert["heuristic_total"] = json!(c.heuristic_total);
                cert["gap"] = json!(c.gap);
                cert["optimal"] = json!(c.optimal);
            }
            let geo = hull_geojson(result.structure(), ds)?;
            write_all(&a.out, &[(CERTIFICATE_JSON, pretty(&cert)), (BEST_GEOJSON, geo)])?;
            println!("exact D = {:.1} miles ({})", result.objective(), result.proof);
            Ok(0)
        }
        Err(Error::BudgetExceeded { nodes, incumbent }) => {
            cert["status"] = json!("budget-exceeded");
            if let Some(inc) = &incumbent {
                cert["incumbent_total"] = json!(inc.total);
                cert["structure"] = inc.structure.to_json();
            }
            write_all(&a.out, &[(CERTIFICATE_JSON, pretty(&cert))])?;
            match incumbent {
                Some(inc) => eprintln!("search budget exceeded after {nodes} nodes; incumbent D = {:.1} miles", inc.total),
                None => eprintln!("search budget exceeded after {nodes} nodes; no incumbent"),
            }
            Ok(EXIT_BUDGET)
        }
        Err(e) => Err(e.into()),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn parse_variant(spec: &str) -> Result<(String, Vec<Predicate>)> {
    let (label, presets) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("variant {spec:?} is not LABEL=preset[+preset]")))?;
    let items: Vec<String> = presets.split('+').map(str::to_string).collect();
    Ok((label.to_string(), load_constraints(&items)?))
}

fn cmd_report(a: &ReportArgs) -> Result<u8> {
    let league = load_league(&a.league)?;
    let (ds, template) = (&league.dataset, &league.template);
    let variants = a.variant.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?;
    let alternative = match &a.alternative {
        Some(path) => {
            let text = read(path)?;
            let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Some(LeagueStructure::from_json(&value)?)
        }
        None => None,
    };
    let g = build_game_matrix::<f64>(template)?;
    let dm = distance_matrix::<f64>(ds);
    let solve = |extra: &[Predicate]| -> Result<Option<ScoredStructure<f64>>> {
        let mut preds = league.predicates.clone();
        preds.extend_from_slice(extra);
        let opts = options(&a.search, 1, preds)?;
        Ok(generate::<f64>(ds, template, &opts)?.entries.into_iter().next())
    };
    let best = solve(&[])?.ok_or_else(|| CliError::Input("no candidate satisfies the constraints".into()))?;
    let mut scored: Vec<(String, ScoredStructure<f64>)> = vec![("Best".into(), best.clone())];
    for (label, preds) in &variants {
        match solve(preds)? {
            Some(s) => scored.push((label.clone(), s)),
            None => eprintln!("variant {label}: no candidate satisfies its constraints"),
        }
    }
    let current = match &ds.current_structure {
        Some(c) if template.assign_slots(c).is_some() => Some(weighted_distance(c, &g, &dm)?),
        _ => None,
    };
    if let Some(c) = &current {
        scored.push(("Current".into(), c.clone()));
    }
    let compared = match alternative {
        Some(s) => {
            ds.check_partition(&s)?;
            weighted_distance(&s, &g, &dm)?
        }
        None => best,
    };
    if !scored.iter().any(|(_, s)| s.structure.same_divisions(&compared.structure)) {
        scored.push(("Alternative".into(), compared.clone()));
    }
    let rows: Vec<(&str, &str, &ScoredStructure<f64>)> =
        scored.iter().map(|(l, s)| (l.as_str(), league.template_label.as_str(), s)).collect();
    let summary: Vec<SummaryRow> = summary_table(&rows);
    let mut files = vec![(SUMMARY_CSV, summary_csv(&summary)?), (BEST_GEOJSON, hull_geojson(&compared.structure, ds)?)];
    if let Some(cur) = &current {
        let model = match &ds.actual_travel {
            Some(actual) => fit_travel_model(&cur.per_team, actual)?,
            None => TravelModel::identity(),
        };
        let diff = travel_diff(cur, &compared, &model)?;
        let fuel = fuel_estimate(-diff.delta_total, a.gallons_per_mile);
        files.push((DIFF_CSV, diff_csv(&diff)?));
        println!(
            "travel change {:+.1} miles (model slope {:.4}, intercept {:.1}); fuel saved {:.0} gallons at {} gal/mi",
            diff.delta_total, model.slope, model.intercept, fuel.gallons, fuel.gallons_per_mile
        );
    } else {
        eprintln!("{} has no current alignment for this template; diff.csv not written", ds.league_id);
    }
    write_all(&a.out, &files)?;
    for r in &summary {
        println!("{:<14} {:>14.1} {:>12.1}", r.label, r.total, r.over_minimum);
    }
    Ok(0)
}

fn cmd_serve(a: &ServeArgs) -> Result<u8> {
    let addr = a
        .addr
        .parse()
        .map_err(|e| CliError::Input(format!("bad --addr {:?}: {e}", a.addr)))?;
    realign_service::serve_blocking(addr).map_err(|source| CliError::Io { path: a.addr.clone(), source })?;
    Ok(0)
}
