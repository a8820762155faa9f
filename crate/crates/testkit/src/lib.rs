//! Synthetic leagues and brute-force reference optima.
//!
//! Everything here is computed from first principles (its own haversine, its
//! own away-game tables, plain enumeration) so tests can compare library
//! output against values that share no code with it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

pub fn haversine_miles(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.min(1.0).sqrt().asin()
}

pub fn distance_table(coords: &[(f64, f64)]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|&a| coords.iter().map(|&b| haversine_miles(a, b)).collect())
        .collect()
}

/// A league shape with its away-game table written out by hand.
#[derive(Clone, Debug)]
pub struct SyntheticTemplate {
    pub name: &'static str,
    pub conference_sizes: Vec<usize>,
    /// Division sizes per conference; empty for an undivided conference.
    pub divisions: Vec<Vec<usize>>,
    /// Per-team division, conference and non-conference game totals.
    pub totals: (f64, f64, f64),
    /// Division size per slot.
    pub slot_sizes: Vec<usize>,
    /// Away games per opponent between slots.
    pub away: Vec<Vec<f64>>,
}

impl SyntheticTemplate {
    pub fn team_count(&self) -> usize {
        self.slot_sizes.iter().sum()
    }
}

/// Two undivided conferences of 4: 12 games against 3 conference rivals,
/// 8 against 4 others.
pub fn two_by_four() -> SyntheticTemplate {
    SyntheticTemplate {
        name: "2x4",
        conference_sizes: vec![4, 4],
        divisions: vec![],
        totals: (0.0, 12.0, 8.0),
        slot_sizes: vec![4, 4],
        away: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
    }
}

/// Two undivided conferences of 5: 16 games against 4 rivals, 10 against 5.
pub fn two_by_five() -> SyntheticTemplate {
    SyntheticTemplate {
        name: "2x5",
        conference_sizes: vec![5, 5],
        divisions: vec![],
        totals: (0.0, 16.0, 10.0),
        slot_sizes: vec![5, 5],
        away: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
    }
}

/// Two conferences of two 3-team divisions: 8 division games (2 rivals),
/// 9 conference games (3 rivals), 6 non-conference games (6 rivals).
pub fn two_by_two_by_three() -> SyntheticTemplate {
    let (d, c, o) = (2.0, 1.5, 0.5);
    SyntheticTemplate {
        name: "2x(2x3)",
        conference_sizes: vec![6, 6],
        divisions: vec![vec![3, 3], vec![3, 3]],
        totals: (8.0, 9.0, 6.0),
        slot_sizes: vec![3, 3, 3, 3],
        away: vec![vec![d, c, o, o], vec![c, d, o, o], vec![o, o, d, c], vec![o, o, c, d]],
    }
}

/// Three undivided conferences of 4: 12 games against 3 rivals, 8 against
/// the other 8 teams.
pub fn three_by_four() -> SyntheticTemplate {
    let (w, x) = (2.0, 0.5);
    SyntheticTemplate {
        name: "3x4",
        conference_sizes: vec![4, 4, 4],
        divisions: vec![],
        totals: (0.0, 12.0, 8.0),
        slot_sizes: vec![4, 4, 4],
        away: vec![vec![w, x, x], vec![x, w, x], vec![x, x, w]],
    }
}

pub fn suite_templates() -> Vec<SyntheticTemplate> {
    vec![two_by_four(), two_by_five(), two_by_two_by_three(), three_by_four()]
}

/// `n` random sites over the continental United States.
pub fn random_sites(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(26.0..49.0), rng.gen_range(-123.0..-70.0)))
        .collect()
}

/// No two sites within `min_sep` degrees and no three sites within a small
/// area of being collinear, in raw degree coordinates.
pub fn in_general_position(sites: &[(f64, f64)]) -> bool {
    let n = sites.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (sites[i], sites[j]);
            if (a.0 - b.0).hypot(a.1 - b.1) < 0.05 {
                return false;
            }
            for &c in &sites[j + 1..] {
                let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if cross.abs() < 1e-3 {
                    return false;
                }
            }
        }
    }
    true
}

/// Random general-position leagues: the first `count` seeds from `first_seed`
/// upward that pass [`in_general_position`].
pub fn general_position_leagues(first_seed: u64, count: usize, n: usize) -> Vec<(u64, Vec<(f64, f64)>)> {
    let mut out = Vec::with_capacity(count);
    let mut seed = first_seed;
    while out.len() < count {
        let sites = random_sites(seed, n);
        if in_general_position(&sites) {
            out.push((seed, sites));
        }
        seed += 1;
    }
    out
}

/// Sum over ordered pairs of distance times away games.
pub fn weighted_total(dist: &[Vec<f64>], away: &[Vec<f64>], slot_of: &[usize]) -> f64 {
    let n = slot_of.len();
    let mut total = 0.0;
    for u in 0..n {
        for v in 0..n {
            if u != v {
                total += dist[u][v] * away[slot_of[u]][slot_of[v]];
            }
        }
    }
    total
}

/// Every assignment of teams to slots with the given sizes, no symmetry
/// reduction.
pub fn all_assignments(n: usize, slot_sizes: &[usize], visit: &mut dyn FnMut(&[usize])) {
    fn rec(k: usize, slot_of: &mut Vec<usize>, fill: &mut Vec<usize>, sizes: &[usize], visit: &mut dyn FnMut(&[usize])) {
        if k == slot_of.len() {
            visit(slot_of);
            return;
        }
        for i in 0..sizes.len() {
            if fill[i] < sizes[i] {
                fill[i] += 1;
                slot_of[k] = i;
                rec(k + 1, slot_of, fill, sizes, visit);
                fill[i] -= 1;
            }
        }
    }
    assert_eq!(slot_sizes.iter().sum::<usize>(), n);
    rec(0, &mut vec![0; n], &mut vec![0; slot_sizes.len()], slot_sizes, visit);
}

/// Minimum weighted total over all assignments, the number of assignments
/// visited and one minimizing assignment.
pub fn brute_force_optimum(dist: &[Vec<f64>], away: &[Vec<f64>], slot_sizes: &[usize]) -> (f64, usize, Vec<usize>) {
    brute_force_optimum_where(dist, away, slot_sizes, &|_| true)
}

/// [`brute_force_optimum`] restricted to assignments accepted by `keep`.
pub fn brute_force_optimum_where(
    dist: &[Vec<f64>],
    away: &[Vec<f64>],
    slot_sizes: &[usize],
    keep: &dyn Fn(&[usize]) -> bool,
) -> (f64, usize, Vec<usize>) {
    let mut best = (f64::INFINITY, 0usize, Vec::new());
    let mut count = 0usize;
    all_assignments(dist.len(), slot_sizes, &mut |slot_of| {
        count += 1;
        if !keep(slot_of) {
            return;
        }
        let total = weighted_total(dist, away, slot_of);
        if total < best.0 {
            best = (total, 0, slot_of.to_vec());
        }
    });
    best.1 = count;
    best
}

/// Number of ways to split `n` labeled items into groups of the given sizes.
pub fn multinomial(slot_sizes: &[usize]) -> u128 {
    let fact = |k: usize| (1..=k as u128).product::<u128>();
    let n: usize = slot_sizes.iter().sum();
    slot_sizes.iter().fold(fact(n), |acc, &k| acc / fact(k))
}
