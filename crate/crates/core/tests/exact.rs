mod common;

use common::{synthetic_league, template_of};
use proptest::prelude::*;
use realign::datasets;
use realign::exact::*;
use realign::geodesy::distance_matrix;
use realign::hullsplit::{generate, GenerateOptions};
use realign::model::{StructureTemplate, TeamId};
use realign::surrogate::{build_game_matrix, slot_assignment, weighted_distance};
use realign::Predicate;
use realign_testkit::{
    brute_force_optimum, brute_force_optimum_where, distance_table, general_position_leagues, haversine_miles,
    random_sites, two_by_five, two_by_four, two_by_two_by_three, weighted_total,
};

#[test]
fn nhl_lp_declares_all_binaries() {
    let ds = datasets::dataset("nhl-2011").unwrap();
    let t = datasets::template("nhl-2011", "6x5").unwrap();
    let model = build_mip(&ds, &t).unwrap();
    assert_eq!(model.division_sizes, vec![5; 6]);
    let lp = export_lp(&model);
    let binaries: Vec<&str> = lp
        .lines()
        .skip_while(|l| l.trim() != "Binaries")
        .skip(1)
        .take_while(|l| l.trim() != "End")
        .flat_map(|l| l.split_whitespace())
        .collect();
    assert_eq!(binaries.len(), 32_580);
    assert_eq!(binaries.iter().filter(|b| b.starts_with("x_")).count(), 180);
    assert!(model.costs.iter().all(|&c| c < model.big_m));

    let excl = add_exclusions(&model, &[(TeamId::new("VAN"), TeamId::new("FLA"))]).unwrap();
    assert_eq!(excl.rows.len(), model.rows.len() + 6);
    assert_eq!(add_exclusions(&model, &[]).unwrap(), model);
    assert!(add_exclusions(&model, &[(TeamId::new("VAN"), TeamId::new("XXX"))]).is_err());
}

#[test]
fn warm_start_file_lists_heuristic_best() {
    let ds = datasets::dataset("nhl-2011").unwrap();
    let t = datasets::template("nhl-2011", "6x5").unwrap();
    let best = generate::<f64>(&ds, &t, &GenerateOptions { top_k: 1, ..Default::default() }).unwrap();
    let best = best.best().unwrap();
    let model = build_mip(&ds, &t).unwrap().with_warm_start(&best.structure, &t).unwrap();
    let text = model.warm_start_text().unwrap();
    assert_eq!(text.lines().count(), 30);
    assert!(text.lines().all(|l| l.starts_with("x_") && l.ends_with(" = 1")));
    let back = from_external_solution(&ds, &t, &text).unwrap();
    assert!(back.structure().same_divisions(&best.structure));
    assert!((back.objective() - best.total).abs() <= 1e-9 * best.total);
}

fn small_leagues() -> Vec<(StructureTemplate, realign::model::LeagueDataset)> {
    let mut out = Vec::new();
    for t in [two_by_four(), two_by_five()] {
        for (seed, sites) in general_position_leagues(500, 3, t.team_count()) {
            out.push((template_of(&t), synthetic_league(&format!("s{seed}"), &sites)));
        }
    }
    out
}

#[test]
fn maximize_and_minimize_share_the_argmax() {
    for (t, ds) in small_leagues() {
        let model = build_mip(&ds, &t).unwrap();
        let max = solve_mip_exhaustive(&model, ObjectiveForm::MaximizeShifted).unwrap();
        let min = solve_mip_exhaustive(&model, ObjectiveForm::MinimizeCost).unwrap();
        assert!((model.cost_objective(&max.y) - min.objective).abs() <= 1e-9 * min.objective);
        let part = |slot_of: &[usize]| {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); model.slots()];
            for (v, &i) in slot_of.iter().enumerate() {
                groups[i].push(v);
            }
            groups.sort();
            groups
        };
        assert_eq!(part(&max.slot_of), part(&min.slot_of), "{}", ds.league_id);
        let exact = solve_exact(&ds, &t, &[], &ExactOptions::default()).unwrap();
        assert!((exact.objective() - min.objective).abs() <= 1e-9 * min.objective);
    }
}

#[test]
fn solved_instances_have_consistent_pairings() {
    for t in [two_by_four(), two_by_five(), two_by_two_by_three()] {
        let template = template_of(&t);
        for (_, sites) in general_position_leagues(900, 2, t.team_count()) {
            let ds = synthetic_league("y", &sites);
            let model = build_mip(&ds, &template).unwrap();
            let r = solve_exact(&ds, &template, &[], &ExactOptions::default()).unwrap();
            let g = build_game_matrix::<f64>(&template).unwrap();
            let slot_of = slot_assignment(r.structure(), &g, &distance_matrix::<f64>(&ds)).unwrap();
            let x = model.assignment_values(&slot_of);
            let y = model.optimal_pairing(&x);
            assert!(model.violations(&x, &y).is_empty());
            let (n, s) = (model.team_count(), model.slots());
            for u in 0..n {
                for v in 0..n {
                    for i in 0..s {
                        for j in 0..s {
                            let both = x[u * s + i] == 1 && x[v * s + j] == 1;
                            assert_eq!(y[model.y_index(u, v, i, j)] == 1, both);
                        }
                    }
                }
            }
            assert!((model.cost_objective(&y) - r.objective()).abs() <= 1e-9 * r.objective());
        }
    }
}

#[test]
fn far_pair_exclusions_match_filtered_enumeration() {
    let t = two_by_five();
    let template = template_of(&t);
    let (_, sites) = general_position_leagues(4242, 1, 10).remove(0);
    let ds = synthetic_league("ten", &sites);
    let dist = distance_table(&sites);
    let mut all: Vec<f64> = (0..10).flat_map(|u| (u + 1..10).map(move |v| (u, v))).map(|(u, v)| dist[u][v]).collect();
    all.sort_by(f64::total_cmp);
    let threshold = all[all.len() * 9 / 10];
    let pairs = far_pairs(&ds, threshold);
    assert!(!pairs.is_empty());
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(a, b)| (ds.index_of(a).unwrap(), ds.index_of(b).unwrap()))
        .collect();
    for &(u, v) in &idx {
        assert!(haversine_miles(sites[u], sites[v]) > threshold - 1e-6);
    }
    let base = build_mip(&ds, &template).unwrap();
    let model = add_exclusions(&base, &pairs).unwrap();
    let sol = solve_mip_exhaustive(&model, ObjectiveForm::MinimizeCost).unwrap();
    for &(u, v) in &idx {
        assert_ne!(sol.slot_of[u], sol.slot_of[v]);
    }
    let keep = |slot_of: &[usize]| idx.iter().all(|&(u, v)| slot_of[u] != slot_of[v]);
    let (oracle, _, _) = brute_force_optimum_where(&dist, &t.away, &t.slot_sizes, &keep);
    assert!((sol.objective - oracle).abs() <= 1e-9 * oracle);
    let (free, _, _) = brute_force_optimum(&dist, &t.away, &t.slot_sizes);
    assert!(sol.objective >= free - 1e-9 * free);

    let apart: Vec<Predicate> = pairs.iter().map(|(a, b)| Predicate::apart(&[a.as_str(), b.as_str()])).collect();
    let r = solve_exact(&ds, &template, &apart, &ExactOptions::default()).unwrap();
    assert!((r.objective() - oracle).abs() <= 1e-9 * oracle);
}

#[test]
fn certificate_against_truncated_run() {
    let t = two_by_five();
    let template = template_of(&t);
    for (_, sites) in general_position_leagues(31, 3, 10) {
        let ds = synthetic_league("c", &sites);
        let exact = solve_exact(&ds, &template, &[], &ExactOptions::default()).unwrap();
        let opts = GenerateOptions { filter_angle_deg: 80.0, top_k: 1, ..Default::default() };
        if let Some(h) = generate::<f64>(&ds, &template, &opts).unwrap().best() {
            let c = certify(h, &exact).unwrap();
            assert!(c.gap >= 0.0);
            assert_eq!(c.optimal, c.gap <= OPTIMALITY_TOLERANCE * exact.objective());
        }
        let full = generate::<f64>(&ds, &template, &GenerateOptions { filter_angle_deg: 0.0, ..Default::default() }).unwrap();
        let c = certify(full.best().unwrap(), &exact).unwrap();
        assert!(c.optimal);
        assert_eq!(c.gap, 0.0);
    }
}

#[test]
fn exact_objective_recomputes_independently() {
    let t = two_by_two_by_three();
    let template = template_of(&t);
    for (_, sites) in general_position_leagues(61, 2, 12) {
        let ds = synthetic_league("r", &sites);
        let r = solve_exact(&ds, &template, &[], &ExactOptions::default()).unwrap();
        let g = build_game_matrix::<f64>(&template).unwrap();
        let dm = distance_matrix::<f64>(&ds);
        let slot_of = slot_assignment(r.structure(), &g, &dm).unwrap();
        let own = weighted_total(&distance_table(&sites), &t.away, &slot_of);
        assert!((own - r.objective()).abs() <= 1e-6 * own);
        let again = weighted_distance(r.structure(), &g, &dm).unwrap();
        assert!((again.total - r.objective()).abs() <= 1e-9 * own);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exclusions_never_lower_the_optimum(seed in 0u64..10_000, mask in 0u64..(1 << 12)) {
        let t = two_by_four();
        let template = template_of(&t);
        let sites = random_sites(seed, 8);
        let ds = synthetic_league("p", &sites);
        let ids = ds.ids();
        let pairs: Vec<(TeamId, TeamId)> = (0..12)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| (ids[b % 8].clone(), ids[(b * 3 + 1) % 8].clone()))
            .filter(|(a, b)| a != b)
            .collect();
        let base = build_mip(&ds, &template).unwrap();
        let free = solve_mip_exhaustive(&base, ObjectiveForm::MinimizeCost).unwrap();
        match solve_mip_exhaustive(&add_exclusions(&base, &pairs).unwrap(), ObjectiveForm::MinimizeCost) {
            Ok(sol) => prop_assert!(sol.objective >= free.objective - 1e-9 * free.objective),
            Err(e) => prop_assert!(matches!(e, realign::Error::Infeasible(_))),
        }
    }
}
