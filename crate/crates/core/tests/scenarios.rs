mod common;

use common::{synthetic_league, template_of};
use proptest::prelude::*;
use realign::constraints::ConstraintItem;
use realign::exact::{solve_exact, ExactOptions};
use realign::geodesy::distance_matrix;
use realign::hullsplit::{division_hulls_disjoint, GenerateOptions};
use realign::model::validate_structure;
use realign::scenarios::*;
use realign::{CandidateSet, Predicate, TeamId};
use realign_testkit::{haversine_miles, random_sites, two_by_four};

fn nhl(edits: Vec<Edit>, template: &str, presets: &[&str]) -> ScenarioRun {
    let s = Scenario {
        base: "nhl-2011".into(),
        edits,
        template: TemplateSpec::Named(template.into()),
        predicates: presets.iter().map(|p| ConstraintItem::Preset(p.to_string())).collect(),
        top_k: 5,
    };
    run_scenario(&s, &GenerateOptions::default()).unwrap()
}

fn best(c: &CandidateSet) -> &realign::LeagueStructure {
    &c.best().unwrap().structure
}

#[test]
fn las_vegas_keeps_the_phoenix_solution() {
    let base = nhl(vec![], "6x5", &["nhl-rivalries"]);
    let lv = nhl(vec![Edit::relocate("PHO", "LV")], "6x5", &["nhl-rivalries"]);
    assert!(best(&lv.candidates).same_divisions(best(&base.candidates)));
    let moved = lv.dataset.team(&TeamId::new("PHO")).unwrap();
    assert_eq!(moved.city, "Las Vegas");
}

#[test]
fn southern_ontario_matches_quebec() {
    let que = nhl(vec![Edit::relocate("PHO", "QUE")], "6x5", &[]);
    let ont = nhl(vec![Edit::relocate("PHO", "ONT")], "6x5", &[]);
    assert!(best(&ont.candidates).same_divisions(best(&que.candidates)));
    let base = nhl(vec![], "6x5", &[]);
    assert!(!best(&que.candidates).same_divisions(best(&base.candidates)));
}

#[test]
fn expansion_to_thirty_two() {
    let edits = vec![Edit::relocate("PHO", "LV"), Edit::expansion("ONT", "ONT"), Edit::expansion("QUE", "QUE")];
    for (template, per_conf) in [("8x4", 4), ("4x8", 2)] {
        let run = nhl(edits.clone(), template, &[]);
        assert_eq!(run.dataset.len(), 32);
        let s = best(&run.candidates);
        assert!(s.conferences.iter().all(|c| c.divisions.len() == per_conf));
        assert!(validate_structure(s, &run.dataset, &run.template).is_empty());
        assert!(division_hulls_disjoint(s, &run.dataset).unwrap());
    }
    let err = run_scenario(
        &Scenario { edits: edits.clone(), ..Scenario::from_json_str(r#"{"base": "nhl-2011", "template": "6x5"}"#).unwrap() },
        &GenerateOptions::default(),
    );
    assert!(matches!(err, Err(realign::Error::StructureMismatch(_))));
}

#[test]
fn unsatisfiable_predicates_give_no_candidates() {
    let s = Scenario {
        base: "nhl-2011".into(),
        edits: vec![Edit::relocate("PHO", "QUE")],
        template: TemplateSpec::Named("6x5".into()),
        predicates: vec![
            ConstraintItem::Predicate(Predicate::together(&["TB", "FLA"])),
            ConstraintItem::Predicate(Predicate::apart(&["TB", "FLA"])),
        ],
        top_k: 5,
    };
    let run = run_scenario(&s, &GenerateOptions::default()).unwrap();
    assert!(run.candidates.is_empty());
}

#[test]
fn scenario_file_drives_a_run() {
    let text = r#"{
        "base": "nhl-2011",
        "edits": [{"move": {"team": "PHO", "city": "QUE"}}],
        "template": "6x5",
        "predicates": ["fla-tb"],
        "top_k": 3
    }"#;
    let s = Scenario::from_json_str(text).unwrap();
    let a = run_scenario(&s, &GenerateOptions::default()).unwrap();
    let b = run_scenario(&s, &GenerateOptions::default()).unwrap();
    assert_eq!(a.candidates, b.candidates);
    assert_eq!(a.candidates.len(), 3);
    let (c, _) = best(&a.candidates).locate(&TeamId::new("TB")).unwrap();
    assert_eq!(best(&a.candidates).locate(&TeamId::new("FLA")).unwrap().0, c);
}

#[test]
fn edits_leave_the_base_untouched() {
    let base = realign::datasets::dataset("nhl-2011").unwrap();
    let before = distance_matrix::<f64>(&base);
    let edited = apply_edits(&base, &[Edit::relocate("PHO", "SEA")]).unwrap();
    assert_eq!(distance_matrix::<f64>(&base), before);
    assert_ne!(distance_matrix::<f64>(&edited), before);
    assert_eq!(apply_edits(&base, &[]).unwrap(), base);
    assert_eq!(distance_matrix::<f64>(&apply_edits(&base, &[]).unwrap()), before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closer_moves_never_raise_the_optimum(seed in 0u64..10_000, mover in 0usize..8, step in 0.05f64..0.9, target in 0usize..8) {
        let t = two_by_four();
        let template = template_of(&t);
        let sites = random_sites(seed, 8);
        prop_assume!(target != mover);
        let (m, g) = (sites[mover], sites[target]);
        let to = (m.0 + step * (g.0 - m.0), m.1 + step * (g.1 - m.1));
        let closer = (0..8)
            .filter(|&k| k != mover)
            .all(|k| haversine_miles(to, sites[k]) < haversine_miles(m, sites[k]));
        prop_assume!(closer);
        let ds = synthetic_league("m", &sites);
        let id = ds.teams[mover].id.clone();
        let edit = Edit::Move(MoveEdit {
            team: id,
            to: Site { lat: Some(to.0), lon: Some(to.1), country: Some("US".into()), tz_offset: Some(-5), ..Default::default() },
        });
        let moved = apply_edits(&ds, &[edit]).unwrap();
        let before = solve_exact(&ds, &template, &[], &ExactOptions::default()).unwrap();
        let after = solve_exact(&moved, &template, &[], &ExactOptions::default()).unwrap();
        prop_assert!(after.objective() <= before.objective() * (1.0 + 1e-12));
    }
}

#[test]
fn datasets_resolve_from_files() {
    let base = realign::datasets::dataset("nba-2012").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("league.json");
    std::fs::write(&path, base.to_json_string()).unwrap();
    let loaded = resolve_dataset(path.to_str().unwrap()).unwrap();
    assert_eq!(loaded, base);
    assert!(resolve_dataset(dir.path().join("missing.json").to_str().unwrap()).is_err());
}
