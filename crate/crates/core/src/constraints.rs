//! Hard filters over league structures.
//!
//! Predicates are conjunctive: a structure passes when every predicate holds.
//! They can be evaluated on a [`LeagueStructure`] directly or compiled to team
//! bitmasks for use inside candidate generation and the exact search.

use crate::error::{Error, Result};
use crate::hullsplit::CandidateSet;
use crate::model::{LeagueDataset, LeagueStructure, TeamId};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Predicate {
    /// All listed teams share a division.
    Together { teams: Vec<TeamId> },
    /// No two listed teams share a division.
    Apart { teams: Vec<TeamId> },
    /// Every division has at most `cap` teams whose `attribute` equals `value`.
    MaxAttrPerDivision {
        attribute: String,
        value: String,
        cap: usize,
    },
    /// Every division spans at most `zones` time zones, i.e. offsets differ by
    /// at most `zones - 1` hours.
    MaxTzSpanPerDivision { zones: u32 },
    /// All listed teams sit in one conference; if conferences carry labels,
    /// it must be the one labeled `label`.
    FixedGroup { label: String, teams: Vec<TeamId> },
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids = |t: &[TeamId]| t.iter().map(|t| t.0.as_str()).collect::<Vec<_>>().join("+");
        match self {
            Predicate::Together { teams } => write!(f, "together({})", ids(teams)),
            Predicate::Apart { teams } => write!(f, "apart({})", ids(teams)),
            Predicate::MaxAttrPerDivision { attribute, value, cap } => {
                write!(f, "max_attr({attribute}={value}, {cap})")
            }
            Predicate::MaxTzSpanPerDivision { zones } => write!(f, "max_tz_span({zones} zones)"),
            Predicate::FixedGroup { label, teams } => write!(f, "fixed_group({label}: {})", ids(teams)),
        }
    }
}

fn ids(list: &[&str]) -> Vec<TeamId> {
    list.iter().map(|&s| TeamId::from(s)).collect()
}

impl Predicate {
    pub fn together(teams: &[&str]) -> Self {
        Predicate::Together { teams: ids(teams) }
    }

    pub fn apart(teams: &[&str]) -> Self {
        Predicate::Apart { teams: ids(teams) }
    }

    pub fn max_attr(attribute: &str, value: &str, cap: usize) -> Self {
        Predicate::MaxAttrPerDivision {
            attribute: attribute.into(),
            value: value.into(),
            cap,
        }
    }

    pub fn max_tz_span(zones: u32) -> Self {
        Predicate::MaxTzSpanPerDivision { zones }
    }

    pub fn fixed_group(label: &str, teams: &[&str]) -> Self {
        Predicate::FixedGroup {
            label: label.into(),
            teams: ids(teams),
        }
    }

    fn teams(&self) -> &[TeamId] {
        match self {
            Predicate::Together { teams } | Predicate::Apart { teams } | Predicate::FixedGroup { teams, .. } => teams,
            _ => &[],
        }
    }

    /// Errors if the predicate references teams or attributes the dataset lacks.
    pub fn check_against(&self, dataset: &LeagueDataset) -> Result<()> {
        if let Some(id) = self.teams().iter().find(|id| dataset.index_of(id).is_none()) {
            return Err(Error::UnknownTeam(id.0.clone()));
        }
        match self {
            Predicate::MaxAttrPerDivision { attribute, .. } => {
                if dataset.teams.first().and_then(|t| t.attribute(attribute)).is_none() {
                    return Err(Error::UnknownAttribute(attribute.clone()));
                }
            }
            Predicate::MaxTzSpanPerDivision { zones: 0 } => {
                return Err(Error::Predicate("time-zone span must be at least 1 zone".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Whether `structure` satisfies `predicate`.
pub fn evaluate(predicate: &Predicate, structure: &LeagueStructure, dataset: &LeagueDataset) -> Result<bool> {
    predicate.check_against(dataset)?;
    let ok = match predicate {
        Predicate::Together { teams } => match teams.split_first() {
            None => true,
            Some((first, rest)) => {
                let home = structure.locate(first);
                home.is_some() && rest.iter().all(|t| structure.locate(t) == home)
            }
        },
        Predicate::Apart { teams } => structure
            .divisions()
            .all(|d| teams.iter().filter(|t| d.contains(t)).count() <= 1),
        Predicate::MaxAttrPerDivision { attribute, value, cap } => structure.divisions().all(|d| {
            d.iter()
                .filter(|id| {
                    dataset
                        .team(id)
                        .and_then(|t| t.attribute(attribute))
                        .is_some_and(|v| &v == value)
                })
                .count()
                <= *cap
        }),
        Predicate::MaxTzSpanPerDivision { zones } => structure.divisions().all(|d| {
            let offs: Vec<i32> = d
                .iter()
                .filter_map(|id| dataset.team(id).map(|t| t.tz_offset_hours))
                .collect();
            match (offs.iter().min(), offs.iter().max()) {
                (Some(lo), Some(hi)) => hi - lo < *zones as i32,
                _ => true,
            }
        }),
        Predicate::FixedGroup { label, teams } => structure.conferences.iter().any(|c| {
            c.label.as_ref().is_none_or(|l| l == label)
                && teams.iter().all(|t| c.divisions.iter().any(|d| d.contains(t)))
        }),
    };
    Ok(ok)
}

/// Keeps the entries satisfying every predicate, in order, and records how
/// many entries each predicate rejected first.
pub fn filter<T: Scalar>(
    set: &CandidateSet<T>,
    predicates: &[Predicate],
    dataset: &LeagueDataset,
) -> Result<CandidateSet<T>> {
    for p in predicates {
        p.check_against(dataset)?;
    }
    let mut rejected = vec![0u64; predicates.len()];
    let mut entries = Vec::new();
    'outer: for e in &set.entries {
        for (k, p) in predicates.iter().enumerate() {
            if !evaluate(p, &e.structure, dataset)? {
                rejected[k] += 1;
                continue 'outer;
            }
        }
        entries.push(e.clone());
    }
    let mut stats = set.stats.clone();
    for (p, r) in predicates.iter().zip(rejected) {
        stats.add_rejections(&p.to_string(), r);
    }
    Ok(CandidateSet { entries, stats })
}

/// Predicates compiled to team bitmasks (bit `i` = dataset team `i`).
#[derive(Clone, Debug)]
pub struct CompiledPredicates {
    checks: Vec<Check>,
    names: Vec<String>,
}

#[derive(Clone, Debug)]
enum Check {
    Together(u128),
    Apart(u128),
    MaxCount { mask: u128, cap: u32 },
    TzSpan { by_offset: Vec<(i32, u128)>, max_span: i32 },
    FixedGroup { mask: u128, label: String },
}

fn mask_of(ids: &[TeamId], dataset: &LeagueDataset) -> Result<u128> {
    ids.iter().try_fold(0u128, |m, id| {
        let i = dataset.index_of(id).ok_or_else(|| Error::UnknownTeam(id.0.clone()))?;
        Ok(m | (1u128 << i))
    })
}

impl CompiledPredicates {
    pub fn compile(predicates: &[Predicate], dataset: &LeagueDataset) -> Result<Self> {
        if dataset.len() > 128 {
            return Err(Error::Options("at most 128 teams are supported".into()));
        }
        let mut checks = Vec::with_capacity(predicates.len());
        for p in predicates {
            p.check_against(dataset)?;
            checks.push(match p {
                Predicate::Together { teams } => Check::Together(mask_of(teams, dataset)?),
                Predicate::Apart { teams } => Check::Apart(mask_of(teams, dataset)?),
                Predicate::MaxAttrPerDivision { attribute, value, cap } => {
                    let mut mask = 0u128;
                    for (i, t) in dataset.teams.iter().enumerate() {
                        if t.attribute(attribute).as_deref() == Some(value.as_str()) {
                            mask |= 1 << i;
                        }
                    }
                    Check::MaxCount { mask, cap: *cap as u32 }
                }
                Predicate::MaxTzSpanPerDivision { zones } => {
                    let mut by_offset: Vec<(i32, u128)> = Vec::new();
                    for (i, t) in dataset.teams.iter().enumerate() {
                        match by_offset.iter_mut().find(|(o, _)| *o == t.tz_offset_hours) {
                            Some((_, m)) => *m |= 1 << i,
                            None => by_offset.push((t.tz_offset_hours, 1 << i)),
                        }
                    }
                    by_offset.sort_unstable();
                    Check::TzSpan { by_offset, max_span: *zones as i32 - 1 }
                }
                Predicate::FixedGroup { label, teams } => Check::FixedGroup {
                    mask: mask_of(teams, dataset)?,
                    label: label.clone(),
                },
            });
        }
        Ok(CompiledPredicates {
            checks,
            names: predicates.iter().map(ToString::to_string).collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of the first failing predicate for a complete assignment, given
    /// one team mask per division slot, the conference of each slot and the
    /// label of each conference.
    pub fn first_failure(
        &self,
        slot_masks: &[u128],
        slot_conf: &[usize],
        conf_labels: &[Option<String>],
    ) -> Option<usize> {
        self.checks.iter().position(|c| !c.holds(slot_masks, slot_conf, conf_labels))
    }

    /// Whether a partial assignment can still be completed without violating
    /// a division-local predicate. Conference membership is checked only for
    /// the `fixed_group` teams already placed.
    pub fn partial_ok(&self, slot_masks: &[u128], slot_conf: &[usize], conf_labels: &[Option<String>], placed: u128) -> bool {
        self.checks.iter().all(|c| match c {
            Check::Together(m) => {
                let here = m & placed;
                here == 0 || slot_masks.iter().any(|s| s & here == here)
            }
            Check::FixedGroup { mask, label } => {
                let here = mask & placed;
                if here == 0 {
                    return true;
                }
                (0..conf_labels.len()).any(|c| {
                    conf_labels[c].as_ref().is_none_or(|l| l == label)
                        && slot_masks
                            .iter()
                            .zip(slot_conf)
                            .filter(|(_, &sc)| sc == c)
                            .fold(0u128, |acc, (m, _)| acc | m)
                            & here
                            == here
                })
            }
            other => other.holds(slot_masks, slot_conf, conf_labels),
        })
    }
}

impl Check {
    fn holds(&self, slot_masks: &[u128], slot_conf: &[usize], conf_labels: &[Option<String>]) -> bool {
        match self {
            Check::Together(m) => slot_masks.iter().any(|s| s & m == *m),
            Check::Apart(m) => slot_masks.iter().all(|s| (s & m).count_ones() <= 1),
            Check::MaxCount { mask, cap } => slot_masks.iter().all(|s| (s & mask).count_ones() <= *cap),
            Check::TzSpan { by_offset, max_span } => slot_masks.iter().all(|s| {
                let lo = by_offset.iter().find(|(_, m)| m & s != 0);
                let hi = by_offset.iter().rev().find(|(_, m)| m & s != 0);
                match (lo, hi) {
                    (Some((lo, _)), Some((hi, _))) => hi - lo <= *max_span,
                    _ => true,
                }
            }),
            Check::FixedGroup { mask, label } => (0..conf_labels.len()).any(|c| {
                conf_labels[c].as_ref().is_none_or(|l| l == label)
                    && slot_masks
                        .iter()
                        .zip(slot_conf)
                        .filter(|(_, &sc)| sc == c)
                        .fold(0u128, |acc, (m, _)| acc | m)
                        & mask
                        == *mask
            }),
        }
    }
}

/// Named predicate bundles.
pub fn preset(name: &str) -> Result<Vec<Predicate>> {
    Ok(match name {
        "fla-tb" => vec![Predicate::together(&["TB", "FLA"])],
        "nhl-rivalries" => vec![
            Predicate::together(&["TB", "FLA"]),
            Predicate::together(&["PHI", "PIT"]),
            Predicate::together(&["NYR", "NYI", "NJ"]),
            Predicate::together(&["CGY", "EDM"]),
            Predicate::together(&["ANA", "LA"]),
        ],
        "max-3-canadian" => vec![Predicate::max_attr("country", "CA", 3)],
        "two-time-zones" => vec![Predicate::max_tz_span(2)],
        // rivalries plus the Canadian cap and the two-zone span
        "nhl-full" => {
            let mut v = preset("nhl-rivalries")?;
            v.extend(preset("max-3-canadian")?);
            v.extend(preset("two-time-zones")?);
            v
        }
        "mlb-fix-al-nl" => vec![
            Predicate::fixed_group(
                "AL",
                &["BAL", "BOS", "NYY", "TB", "TOR", "CWS", "CLE", "DET", "KC", "MIN", "HOU", "LAA", "OAK", "SEA", "TEX"],
            ),
            Predicate::fixed_group(
                "NL",
                &["ATL", "MIA", "NYM", "PHI", "WSH", "CHC", "CIN", "MIL", "PIT", "STL", "ARI", "COL", "LAD", "SD", "SF"],
            ),
        ],
        _ => {
            return Err(Error::UnknownName {
                kind: "preset",
                name: name.into(),
            })
        }
    })
}

pub const PRESET_NAMES: &[&str] = &[
    "fla-tb",
    "nhl-rivalries",
    "max-3-canadian",
    "two-time-zones",
    "nhl-full",
    "mlb-fix-al-nl",
];

/// One entry of a constraint list: a preset name or a predicate object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintItem {
    Preset(String),
    Predicate(Predicate),
}

/// Expands presets, keeping list order.
pub fn resolve_items(items: &[ConstraintItem]) -> Result<Vec<Predicate>> {
    let mut out = Vec::new();
    for item in items {
        match item {
            ConstraintItem::Preset(name) => out.extend(preset(name)?),
            ConstraintItem::Predicate(p) => out.push(p.clone()),
        }
    }
    Ok(out)
}

/// Parses a constraint file: a JSON array whose items are `{kind, params}`
/// objects or preset names.
pub fn parse_constraints(json: &str) -> Result<Vec<Predicate>> {
    let items: Vec<ConstraintItem> = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    resolve_items(&items)
}
