//! Schedule-free travel objective and its linear calibration to actual miles.
//!
//! The weighted distance of a structure is the sum over ordered team pairs
//! `(i, j)` of `d(i, j) * g(i, j)`, where `g(i, j)` is the number of away games
//! team `i` plays in `j`'s city. `g` depends only on which divisions the two
//! teams sit in, so it is stored as a division-by-division [`GameMatrix`].

use crate::error::{Error, Result};
use crate::geodesy::DistanceMatrix;
use crate::model::{Conference, LeagueStructure, Provenance, ScheduleProfile, StructureTemplate, TeamId};
use crate::scalar::Scalar;
use num_rational::Ratio;
use std::collections::BTreeMap;

/// Away games per opponent pair between division slots (row plays at column).
#[derive(Clone, Debug, PartialEq)]
pub struct GameMatrix<W> {
    size: usize,
    entries: Vec<W>,
    template: StructureTemplate,
}

impl<W: Clone> GameMatrix<W> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> W {
        self.entries[i * self.size + j].clone()
    }

    pub fn template(&self) -> &StructureTemplate {
        &self.template
    }

    pub fn rows(&self) -> Vec<Vec<W>> {
        self.entries.chunks(self.size).map(<[W]>::to_vec).collect()
    }
}

impl<W: Clone + PartialEq> GameMatrix<W> {
    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..self.size).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// True when relabeling slots by `perm` leaves every entry unchanged.
    pub fn is_invariant_under(&self, perm: &[usize]) -> bool {
        (0..self.size)
            .all(|i| (0..self.size).all(|j| self.get(i, j) == self.get(perm[i], perm[j])))
    }
}

impl<T: Scalar> GameMatrix<T> {
    /// Matrix with explicitly given entries (row-major), sharing a template's layout.
    pub fn from_entries(template: StructureTemplate, entries: Vec<T>) -> Result<Self> {
        let size = template.slot_count();
        if entries.len() != size * size {
            return Err(Error::Schedule(format!(
                "expected {} entries for {size} slots, got {}",
                size * size,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !(*e >= T::zero())) {
            return Err(Error::Schedule("negative away-game entry".into()));
        }
        Ok(GameMatrix {
            size,
            entries,
            template,
        })
    }

    pub fn max_entry(&self) -> T {
        self.entries.iter().copied().fold(T::zero(), T::max)
    }

    /// Smallest combined weight `G[a][b] + G[b][a]` any two distinct teams can carry.
    pub fn min_pair_weight(&self) -> T {
        let sizes = self.template.slot_sizes();
        let mut best = T::infinity();
        for a in 0..self.size {
            for b in 0..self.size {
                if a == b && sizes[a] < 2 {
                    continue;
                }
                best = best.min(self.get(a, b) + self.get(b, a));
            }
        }
        if best.is_finite() {
            best
        } else {
            T::zero()
        }
    }
}

/// Games and opponent count behind one matrix entry.
struct EntryRule {
    games: f64,
    opponents: usize,
    category: &'static str,
}

fn entry_rules(template: &StructureTemplate) -> Result<Vec<Option<EntryRule>>> {
    let sizes = template.slot_sizes();
    let confs = template.slot_conferences();
    let n = template.team_count();
    let s = sizes.len();
    let ScheduleProfile::Totals {
        division_games,
        conference_games,
        nonconference_games,
    } = &template.schedule
    else {
        return Ok((0..s * s).map(|_| None).collect());
    };
    let mut out = Vec::with_capacity(s * s);
    for i in 0..s {
        let ci = confs[i];
        let shape = &template.conferences[ci];
        let undivided = shape.divisions.is_empty();
        let div = division_games.for_conference(ci)?;
        if undivided && div > 0.0 {
            return Err(Error::Schedule(format!(
                "conference {ci} is undivided but has {div} division games"
            )));
        }
        let other = nonconference_games.for_conference(ci)?;
        if other > 0.0 && n == shape.size {
            return Err(Error::Schedule(format!(
                "{other} non-conference games for conference {ci} but no non-conference opponents"
            )));
        }
        for j in 0..s {
            let rule = if i == j {
                if undivided {
                    EntryRule {
                        games: conference_games.for_conference(ci)?,
                        opponents: shape.size - 1,
                        category: "conference",
                    }
                } else {
                    EntryRule {
                        games: div,
                        opponents: sizes[i] - 1,
                        category: "division",
                    }
                }
            } else if confs[j] == ci {
                EntryRule {
                    games: conference_games.for_conference(ci)?,
                    opponents: shape.size - sizes[i],
                    category: "conference",
                }
            } else {
                EntryRule {
                    games: nonconference_games.for_conference(ci)?,
                    opponents: n - shape.size,
                    category: "non-conference",
                }
            };
            if rule.opponents == 0 && rule.games > 0.0 {
                return Err(Error::Schedule(format!(
                    "{} {} games for slot {i} but no {} opponents",
                    rule.games, rule.category, rule.category
                )));
            }
            out.push(Some(rule));
        }
    }
    Ok(out)
}

fn pair_away_entry(template: &StructureTemplate, i: usize, j: usize) -> f64 {
    let ScheduleProfile::PairAway { away_per_pair: p } = &template.schedule else {
        unreachable!("only called for explicit per-pair schedules")
    };
    let confs = template.slot_conferences();
    if i == j {
        if template.conferences[confs[i]].divisions.is_empty() {
            p.conference
        } else {
            p.division
        }
    } else if confs[i] == confs[j] {
        p.conference
    } else {
        p.nonconference
    }
}

/// Away games a team in division `i` plays at each team of division `j`:
/// category games divided by twice the number of opponents in that category.
pub fn build_game_matrix<T: Scalar>(template: &StructureTemplate) -> Result<GameMatrix<T>> {
    let s = template.slot_count();
    let rules = entry_rules(template)?;
    let entries = rules
        .into_iter()
        .enumerate()
        .map(|(k, rule)| match rule {
            Some(r) if r.opponents == 0 => T::zero(),
            Some(r) => T::of(r.games) / T::of(2.0 * r.opponents as f64),
            None => T::of(pair_away_entry(template, k / s, k % s)),
        })
        .collect();
    Ok(GameMatrix {
        size: s,
        entries,
        template: template.clone(),
    })
}

/// Exact rational version of [`build_game_matrix`].
pub fn build_game_matrix_exact(template: &StructureTemplate) -> Result<GameMatrix<Ratio<i64>>> {
    let s = template.slot_count();
    let to_ratio = |v: f64| {
        Ratio::approximate_float(v)
            .ok_or_else(|| Error::Schedule(format!("game count {v} has no rational form")))
    };
    let mut entries = Vec::with_capacity(s * s);
    for (k, rule) in entry_rules(template)?.into_iter().enumerate() {
        entries.push(match rule {
            Some(r) if r.opponents == 0 => Ratio::from_integer(0),
            Some(r) => to_ratio(r.games)? / Ratio::from_integer(2 * r.opponents as i64),
            None => to_ratio(pair_away_entry(template, k / s, k % s))?,
        });
    }
    Ok(GameMatrix {
        size: s,
        entries,
        template: template.clone(),
    })
}

impl GameMatrix<Ratio<i64>> {
    pub fn to_scalar<T: Scalar>(&self) -> GameMatrix<T> {
        GameMatrix {
            size: self.size,
            entries: self
                .entries
                .iter()
                .map(|r| T::of(*r.numer() as f64 / *r.denom() as f64))
                .collect(),
            template: self.template.clone(),
        }
    }
}

/// A structure with its weighted distance and per-team breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredStructure<T> {
    pub structure: LeagueStructure,
    /// League weighted distance in miles.
    pub total: T,
    pub per_team: BTreeMap<TeamId, T>,
}

/// Division slot of every team (by distance-matrix index).
pub fn slot_assignment<T: Scalar, W: Clone>(
    structure: &LeagueStructure,
    matrix: &GameMatrix<W>,
    distances: &DistanceMatrix<T>,
) -> Result<Vec<usize>> {
    let slots = matrix.template.assign_slots(structure).ok_or_else(|| {
        Error::StructureMismatch("structure does not fit the game matrix's template".into())
    })?;
    let mut slot_of = vec![usize::MAX; distances.len()];
    for (conf, conf_slots) in structure.conferences.iter().zip(&slots) {
        for (div, &slot) in conf.divisions.iter().zip(conf_slots) {
            for id in div {
                let i = distances
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownTeam(id.0.clone()))?;
                if slot_of[i] != usize::MAX {
                    return Err(Error::StructureMismatch(format!("team {id} assigned twice")));
                }
                slot_of[i] = slot;
            }
        }
    }
    if let Some(i) = slot_of.iter().position(|&s| s == usize::MAX) {
        return Err(Error::MissingTeam(distances.ids()[i].0.clone()));
    }
    Ok(slot_of)
}

/// Inverse of [`slot_assignment`]: conferences in template order carrying the
/// template's labels, divisions in slot order, ids in `ids` order.
pub fn structure_from_slots(
    slot_of: &[usize],
    template: &StructureTemplate,
    ids: &[TeamId],
    provenance: Provenance,
) -> LeagueStructure {
    let slot_conf = template.slot_conferences();
    let mut divisions: Vec<Vec<TeamId>> = vec![Vec::new(); slot_conf.len()];
    for (id, &slot) in ids.iter().zip(slot_of) {
        divisions[slot].push(id.clone());
    }
    let mut conferences: Vec<Conference> = template
        .conferences
        .iter()
        .map(|c| Conference { label: c.label.clone(), divisions: Vec::new() })
        .collect();
    for (slot, div) in divisions.into_iter().enumerate() {
        conferences[slot_conf[slot]].divisions.push(div);
    }
    LeagueStructure { conferences, provenance }
}

/// Per-team weighted distance for a slot assignment.
pub fn per_team_distance<T: Scalar>(
    slot_of: &[usize],
    matrix: &GameMatrix<T>,
    distances: &DistanceMatrix<T>,
) -> Vec<T> {
    let n = slot_of.len();
    (0..n)
        .map(|i| {
            let row = distances.row(i);
            let si = slot_of[i];
            (0..n)
                .filter(|&j| j != i)
                .map(|j| row[j] * matrix.get(si, slot_of[j]))
                .sum()
        })
        .collect()
}

/// League weighted distance for a slot assignment.
pub fn total_distance<T: Scalar>(
    slot_of: &[usize],
    matrix: &GameMatrix<T>,
    distances: &DistanceMatrix<T>,
) -> T {
    per_team_distance(slot_of, matrix, distances).into_iter().sum()
}

/// Scores `structure` under the away-game matrix and distances.
pub fn weighted_distance<T: Scalar>(
    structure: &LeagueStructure,
    matrix: &GameMatrix<T>,
    distances: &DistanceMatrix<T>,
) -> Result<ScoredStructure<T>> {
    let slot_of = slot_assignment(structure, matrix, distances)?;
    let per = per_team_distance(&slot_of, matrix, distances);
    let total = per.iter().copied().sum();
    Ok(ScoredStructure {
        structure: structure.clone(),
        total,
        per_team: distances.ids().iter().cloned().zip(per).collect(),
    })
}

/// Least-squares line from surrogate miles to actual miles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TravelModel<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    /// Number of teams used in the fit.
    pub samples: usize,
}

impl<T: Scalar> TravelModel<T> {
    /// Slope 1, intercept 0: predictions equal raw surrogate values.
    pub fn identity() -> Self {
        TravelModel {
            slope: T::one(),
            intercept: T::zero(),
            r_squared: T::one(),
            samples: 0,
        }
    }

    pub fn predict(&self, surrogate: T) -> T {
        self.slope * surrogate + self.intercept
    }
}

/// Ordinary least squares of actual travel on the surrogate, over teams in both maps.
pub fn fit_travel_model<T: Scalar>(
    per_team_surrogate: &BTreeMap<TeamId, T>,
    actual_travel: &BTreeMap<TeamId, f64>,
) -> Result<TravelModel<T>> {
    let pairs: Vec<(T, T)> = per_team_surrogate
        .iter()
        .filter_map(|(id, &x)| actual_travel.get(id).map(|&y| (x, T::of(y))))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::Regression(format!(
            "need at least 3 teams with both surrogate and actual travel, have {}",
            pairs.len()
        )));
    }
    let n = T::of(pairs.len() as f64);
    let mean_x = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pairs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: T = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: T = pairs.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let scale = pairs.iter().map(|p| p.0.abs()).fold(T::zero(), T::max).max(T::one());
    if sxx <= T::epsilon() * scale * scale * n {
        return Err(Error::Regression("surrogate values have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy <= T::zero() {
        T::zero()
    } else {
        (sxy * sxy / (sxx * syy)).min(T::one()).max(T::zero())
    };
    Ok(TravelModel {
        slope,
        intercept,
        r_squared,
        samples: pairs.len(),
    })
}

pub fn predict_travel<T: Scalar>(
    model: &TravelModel<T>,
    per_team_surrogate: &BTreeMap<TeamId, T>,
) -> BTreeMap<TeamId, T> {
    per_team_surrogate
        .iter()
        .map(|(id, &x)| (id.clone(), model.predict(x)))
        .collect()
}
