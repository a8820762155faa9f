mod common;

use common::{synthetic_league, template_of};
use realign::exact::{solve_exact, ExactOptions, ProofMethod};
use realign::hullsplit::{division_hulls_disjoint, generate, GenerateOptions};
use realign::surrogate::build_game_matrix;
use realign_testkit::{brute_force_optimum, distance_table, general_position_leagues, multinomial, suite_templates};

fn unfiltered() -> GenerateOptions {
    GenerateOptions { filter_angle_deg: 0.0, ..Default::default() }
}

#[test]
fn hand_written_tables_match_game_matrix() {
    for t in suite_templates() {
        let g = build_game_matrix::<f64>(&template_of(&t)).unwrap();
        for (i, row) in t.away.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((g.get(i, j) - v).abs() < 1e-12, "{} ({i},{j})", t.name);
            }
        }
    }
}

#[test]
fn heuristic_and_exact_match_enumeration() {
    for t in suite_templates() {
        let template = template_of(&t);
        for (seed, sites) in general_position_leagues(1000, 3, t.team_count()) {
            let ds = synthetic_league("synthetic", &sites);
            let (best, count, _) = brute_force_optimum(&distance_table(&sites), &t.away, &t.slot_sizes);
            assert_eq!(count as u128, multinomial(&t.slot_sizes));
            let h = generate::<f64>(&ds, &template, &unfiltered()).unwrap();
            let hb = h.best().unwrap();
            assert!((hb.total - best).abs() <= 1e-9 * best, "{} seed {seed}: heuristic {} vs {best}", t.name, hb.total);
            for e in &h.entries {
                assert!(division_hulls_disjoint(&e.structure, &ds).unwrap());
            }
            let e = solve_exact(&ds, &template, &[], &ExactOptions::default()).unwrap();
            assert_eq!(e.proof, ProofMethod::BranchAndBound);
            assert!((e.objective() - best).abs() <= 1e-9 * best, "{} seed {seed}: exact {} vs {best}", t.name, e.objective());
        }
    }
}

#[test]
fn eight_teams_give_thirty_five_partitions() {
    let t = realign_testkit::two_by_four();
    let template = template_of(&t);
    let (_, sites) = general_position_leagues(77, 1, 8).remove(0);
    let ds = synthetic_league("eight", &sites);
    let r = solve_exact(&ds, &template, &[], &ExactOptions { method: ProofMethod::Exhaustive, ..Default::default() }).unwrap();
    assert_eq!(r.leaves as u128, multinomial(&[4, 4]) / 2);
    let (best, _, _) = brute_force_optimum(&distance_table(&sites), &t.away, &t.slot_sizes);
    assert!((r.objective() - best).abs() <= 1e-9 * best);
}
