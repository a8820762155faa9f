//! Domain types: teams, datasets, templates, schedules and league structures.
//!
//! Everything here is immutable after construction. Datasets are loaded from
//! the JSON file format described in the README and validated on the way in.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

/// Short team token such as `"TB"` or `"NYR"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(pub String);

impl TeamId {
    pub fn new(s: impl Into<String>) -> Self {
        TeamId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TeamId {
    fn from(s: &str) -> Self {
        TeamId(s.to_string())
    }
}

/// Latitude/longitude in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Team {
    pub id: TeamId,
    pub name: String,
    pub city: String,
    pub location: GeoPoint,
    /// ISO-style country code, e.g. `"CA"`.
    pub country: String,
    /// Standard-time UTC offset in hours (no daylight saving).
    pub tz_offset_hours: i32,
}

impl Team {
    /// Attribute lookup used by the attribute-cap predicate.
    pub fn attribute(&self, name: &str) -> Option<String> {
        match name {
            "country" => Some(self.country.clone()),
            "tz_offset" => Some(self.tz_offset_hours.to_string()),
            "city" => Some(self.city.clone()),
            _ => None,
        }
    }
}

/// Where a structure came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Heuristic,
    Exact,
    Current,
    #[default]
    Manual,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Heuristic => "heuristic",
            Provenance::Exact => "exact",
            Provenance::Current => "current",
            Provenance::Manual => "manual",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Conference {
    pub label: Option<String>,
    pub divisions: Vec<Vec<TeamId>>,
}

impl Conference {
    pub fn size(&self) -> usize {
        self.divisions.iter().map(Vec::len).sum()
    }
}

/// Assignment of teams to divisions, grouped into conferences.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LeagueStructure {
    pub conferences: Vec<Conference>,
    pub provenance: Provenance,
}

impl LeagueStructure {
    pub fn from_nested(nested: Vec<Vec<Vec<TeamId>>>, provenance: Provenance) -> Self {
        LeagueStructure {
            conferences: nested
                .into_iter()
                .map(|divisions| Conference {
                    label: None,
                    divisions,
                })
                .collect(),
            provenance,
        }
    }

    pub fn from_strs(nested: &[&[&[&str]]], provenance: Provenance) -> Self {
        Self::from_nested(
            nested
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|d| d.iter().map(|&t| TeamId::from(t)).collect())
                        .collect()
                })
                .collect(),
            provenance,
        )
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<TeamId>>> {
        self.conferences
            .iter()
            .map(|c| c.divisions.clone())
            .collect()
    }

    pub fn divisions(&self) -> impl Iterator<Item = &Vec<TeamId>> {
        self.conferences.iter().flat_map(|c| c.divisions.iter())
    }

    pub fn team_count(&self) -> usize {
        self.divisions().map(Vec::len).sum()
    }

    /// `(conference index, division index)` of a team, if present.
    pub fn locate(&self, id: &TeamId) -> Option<(usize, usize)> {
        for (ci, c) in self.conferences.iter().enumerate() {
            for (di, d) in c.divisions.iter().enumerate() {
                if d.contains(id) {
                    return Some((ci, di));
                }
            }
        }
        None
    }

    /// Label-order-normalized form: ids sorted within divisions, divisions
    /// sorted by smallest id, conferences sorted by smallest id. Labeled
    /// conferences keep their label and are ordered by label instead.
    pub fn canonical(&self) -> CanonicalForm {
        let mut confs: Vec<(Option<String>, Vec<Vec<String>>)> = self
            .conferences
            .iter()
            .map(|c| {
                let mut divs: Vec<Vec<String>> = c
                    .divisions
                    .iter()
                    .map(|d| {
                        let mut ids: Vec<String> = d.iter().map(|t| t.0.clone()).collect();
                        ids.sort();
                        ids
                    })
                    .collect();
                divs.sort();
                (c.label.clone(), divs)
            })
            .collect();
        confs.sort();
        CanonicalForm(confs)
    }

    /// Same teams, canonical ordering, provenance kept.
    pub fn normalized(&self) -> LeagueStructure {
        let CanonicalForm(confs) = self.canonical();
        LeagueStructure {
            conferences: confs
                .into_iter()
                .map(|(label, divs)| Conference {
                    label,
                    divisions: divs
                        .into_iter()
                        .map(|d| d.into_iter().map(TeamId).collect())
                        .collect(),
                })
                .collect(),
            provenance: self.provenance,
        }
    }

    /// Identical division memberships, ignoring order and labels.
    pub fn same_divisions(&self, other: &LeagueStructure) -> bool {
        let norm = |s: &LeagueStructure| {
            let mut divs: Vec<Vec<String>> = s
                .divisions()
                .map(|d| {
                    let mut v: Vec<String> = d.iter().map(|t| t.0.clone()).collect();
                    v.sort();
                    v
                })
                .collect();
            divs.sort();
            divs
        };
        norm(self) == norm(other)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StructureFile::from(self)).expect("structure serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let file: StructureFile =
            serde_json::from_value(value.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(file.into())
    }
}

/// Nested sorted form used for deduplication and deterministic tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(pub Vec<(Option<String>, Vec<Vec<String>>)>);

/// On-disk structure: `{"conferences": [[[ids]]], "labels": [...], "provenance": ...}`.
#[derive(Serialize, Deserialize)]
struct StructureFile {
    conferences: Vec<Vec<Vec<TeamId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Option<String>>>,
    #[serde(default)]
    provenance: Provenance,
}

impl From<&LeagueStructure> for StructureFile {
    fn from(s: &LeagueStructure) -> Self {
        let labels: Vec<Option<String>> = s.conferences.iter().map(|c| c.label.clone()).collect();
        StructureFile {
            conferences: s.to_nested(),
            labels: labels.iter().any(Option::is_some).then_some(labels),
            provenance: s.provenance,
        }
    }
}

impl From<StructureFile> for LeagueStructure {
    fn from(f: StructureFile) -> Self {
        let mut s = LeagueStructure::from_nested(f.conferences, f.provenance);
        if let Some(labels) = f.labels {
            for (c, l) in s.conferences.iter_mut().zip(labels) {
                c.label = l;
            }
        }
        s
    }
}

/// Per-team games against a category: one value for the whole league or one
/// per conference (in template order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Games {
    Uniform(f64),
    PerConference(Vec<f64>),
}

impl Games {
    pub fn for_conference(&self, conf: usize) -> Result<f64> {
        match self {
            Games::Uniform(v) => Ok(*v),
            Games::PerConference(v) => v.get(conf).copied().ok_or_else(|| {
                Error::Schedule(format!("no game count given for conference {conf}"))
            }),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Games::Uniform(v) => vec![*v],
            Games::PerConference(v) => v.clone(),
        }
    }
}

/// Away games per opponent pair, given directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAwayGames {
    pub division: f64,
    pub conference: f64,
    pub nonconference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleProfile {
    /// Per-team total games against each category.
    Totals {
        division_games: Games,
        conference_games: Games,
        nonconference_games: Games,
    },
    /// Explicit per-pair away-game counts.
    PairAway { away_per_pair: PairAwayGames },
}

impl ScheduleProfile {
    pub fn totals(division: f64, conference: f64, nonconference: f64) -> Self {
        ScheduleProfile::Totals {
            division_games: Games::Uniform(division),
            conference_games: Games::Uniform(conference),
            nonconference_games: Games::Uniform(nonconference),
        }
    }

    fn all_values(&self) -> Vec<f64> {
        match self {
            ScheduleProfile::Totals {
                division_games,
                conference_games,
                nonconference_games,
            } => [division_games, conference_games, nonconference_games]
                .iter()
                .flat_map(|g| g.values())
                .collect(),
            ScheduleProfile::PairAway { away_per_pair: p } => {
                vec![p.division, p.conference, p.nonconference]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConferenceShape {
    pub label: Option<String>,
    pub size: usize,
    /// Empty means the conference is a single undivided group.
    pub divisions: Vec<usize>,
}

impl ConferenceShape {
    /// Division sizes, treating an undivided conference as one group.
    pub fn groups(&self) -> Vec<usize> {
        if self.divisions.is_empty() {
            vec![self.size]
        } else {
            self.divisions.clone()
        }
    }
}

/// Shape of a league plus its schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTemplate {
    pub conferences: Vec<ConferenceShape>,
    pub schedule: ScheduleProfile,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    conference_sizes: Vec<usize>,
    #[serde(default)]
    divisions_per_conference: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conference_labels: Option<Vec<String>>,
    schedule: ScheduleProfile,
}

impl StructureTemplate {
    /// Builds and checks a template. `divisions` may be shorter than
    /// `conference_sizes`; missing entries mean undivided conferences.
    pub fn new(
        conference_sizes: &[usize],
        divisions: &[Vec<usize>],
        schedule: ScheduleProfile,
    ) -> Result<Self> {
        if conference_sizes.is_empty() {
            return Err(Error::Template("no conferences".into()));
        }
        if divisions.len() > conference_sizes.len() {
            return Err(Error::Template(
                "more division lists than conferences".into(),
            ));
        }
        let mut conferences = Vec::with_capacity(conference_sizes.len());
        for (i, &size) in conference_sizes.iter().enumerate() {
            if size == 0 {
                return Err(Error::Template(format!("conference {i} has size 0")));
            }
            let divs = divisions.get(i).cloned().unwrap_or_default();
            if divs.contains(&0) {
                return Err(Error::Template(format!(
                    "conference {i} has an empty division"
                )));
            }
            if !divs.is_empty() && divs.iter().sum::<usize>() != size {
                return Err(Error::Template(format!(
                    "conference {i}: division sizes {divs:?} do not sum to {size}"
                )));
            }
            conferences.push(ConferenceShape {
                label: None,
                size,
                divisions: divs,
            });
        }
        if schedule.all_values().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Schedule("game counts must be non-negative".into()));
        }
        Ok(StructureTemplate {
            conferences,
            schedule,
        })
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.conferences.len() {
            return Err(Error::Template(format!(
                "{} labels for {} conferences",
                labels.len(),
                self.conferences.len()
            )));
        }
        for (c, l) in self.conferences.iter_mut().zip(labels) {
            c.label = Some((*l).to_string());
        }
        Ok(self)
    }

    pub fn team_count(&self) -> usize {
        self.conferences.iter().map(|c| c.size).sum()
    }

    pub fn is_labeled(&self) -> bool {
        self.conferences.iter().any(|c| c.label.is_some())
    }

    /// Number of division slots (`s` in the game matrix).
    pub fn slot_count(&self) -> usize {
        self.conferences.iter().map(|c| c.groups().len()).sum()
    }

    /// Division sizes in slot order (`d_i`).
    pub fn slot_sizes(&self) -> Vec<usize> {
        self.conferences.iter().flat_map(|c| c.groups()).collect()
    }

    /// Conference index of each slot.
    pub fn slot_conferences(&self) -> Vec<usize> {
        self.conferences
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| std::iter::repeat_n(ci, c.groups().len()))
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: TemplateFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let t = StructureTemplate::new(&f.conference_sizes, &f.divisions_per_conference, f.schedule)?;
        match f.conference_labels {
            Some(labels) => {
                let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
                t.with_labels(&refs)
            }
            None => Ok(t),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let labels = self.is_labeled().then(|| {
            self.conferences
                .iter()
                .map(|c| c.label.clone().unwrap_or_default())
                .collect()
        });
        serde_json::to_value(TemplateFile {
            conference_sizes: self.conferences.iter().map(|c| c.size).collect(),
            divisions_per_conference: self.conferences.iter().map(|c| c.divisions.clone()).collect(),
            conference_labels: labels,
            schedule: self.schedule.clone(),
        })
        .expect("template serializes")
    }

    /// Maps every `(conference, division)` of `structure` to a template slot.
    ///
    /// Conferences are matched by shape (size, division sizes, label when both
    /// sides carry one); divisions within a conference by size.
    pub fn assign_slots(&self, structure: &LeagueStructure) -> Option<Vec<Vec<usize>>> {
        let mut offsets = Vec::with_capacity(self.conferences.len());
        let mut acc = 0;
        for c in &self.conferences {
            offsets.push(acc);
            acc += c.groups().len();
        }
        if structure.conferences.len() != self.conferences.len() {
            return None;
        }
        let mut used = vec![false; self.conferences.len()];
        let mut result = Vec::with_capacity(structure.conferences.len());
        for conf in &structure.conferences {
            let mut sizes: Vec<usize> = conf.divisions.iter().map(Vec::len).collect();
            sizes.sort_unstable();
            let found = self.conferences.iter().enumerate().position(|(ti, shape)| {
                if used[ti] {
                    return false;
                }
                if let (Some(a), Some(b)) = (&shape.label, &conf.label) {
                    if a != b {
                        return false;
                    }
                }
                let mut want = shape.groups();
                want.sort_unstable();
                want == sizes
            })?;
            used[found] = true;
            let shape = &self.conferences[found];
            let groups = shape.groups();
            let mut slot_used = vec![false; groups.len()];
            let mut slots = Vec::with_capacity(conf.divisions.len());
            for d in &conf.divisions {
                let k = (0..groups.len()).find(|&k| !slot_used[k] && groups[k] == d.len())?;
                slot_used[k] = true;
                slots.push(offsets[found] + k);
            }
            result.push(slots);
        }
        Some(result)
    }
}

/// A team list with optional current alignment and historical travel.
#[derive(Clone, Debug, PartialEq)]
pub struct LeagueDataset {
    pub league_id: String,
    pub teams: Vec<Team>,
    pub current_structure: Option<LeagueStructure>,
    /// Miles per season by team (historical averages).
    pub actual_travel: Option<BTreeMap<TeamId, f64>>,
    index: HashMap<TeamId, usize>,
}

#[derive(Serialize, Deserialize)]
struct TeamRecord {
    id: String,
    name: String,
    city: String,
    lat: f64,
    lon: f64,
    country: String,
    tz_offset: i32,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    league_id: String,
    teams: Vec<TeamRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current_structure: Option<Vec<Vec<Vec<TeamId>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actual_travel: Option<BTreeMap<TeamId, f64>>,
}

impl LeagueDataset {
    /// Validates and indexes a dataset.
    pub fn new(
        league_id: impl Into<String>,
        teams: Vec<Team>,
        current_structure: Option<LeagueStructure>,
        actual_travel: Option<BTreeMap<TeamId, f64>>,
    ) -> Result<Self> {
        if teams.len() < 2 {
            return Err(Error::Parse(format!(
                "a league needs at least 2 teams, got {}",
                teams.len()
            )));
        }
        let mut index = HashMap::with_capacity(teams.len());
        for (i, t) in teams.iter().enumerate() {
            if !(-90.0..=90.0).contains(&t.location.lat) || !t.location.lat.is_finite() {
                return Err(Error::OutOfRange {
                    team: t.id.0.clone(),
                    field: "lat",
                    value: t.location.lat,
                });
            }
            if !(-180.0..=180.0).contains(&t.location.lon) || !t.location.lon.is_finite() {
                return Err(Error::OutOfRange {
                    team: t.id.0.clone(),
                    field: "lon",
                    value: t.location.lon,
                });
            }
            if index.insert(t.id.clone(), i).is_some() {
                return Err(Error::DuplicateTeam(t.id.0.clone()));
            }
        }
        let ds = LeagueDataset {
            league_id: league_id.into(),
            teams,
            current_structure,
            actual_travel,
            index,
        };
        if let Some(cs) = &ds.current_structure {
            ds.check_partition(cs)?;
        }
        if let Some(at) = &ds.actual_travel {
            if let Some(id) = at.keys().find(|id| !ds.index.contains_key(*id)) {
                return Err(Error::UnknownTeam(id.0.clone()));
            }
        }
        Ok(ds)
    }

    /// Errors unless `s` assigns every team exactly once.
    pub fn check_partition(&self, s: &LeagueStructure) -> Result<()> {
        let mut seen = HashSet::new();
        for id in s.divisions().flatten() {
            if !self.index.contains_key(id) {
                return Err(Error::StructureMismatch(format!("unknown team {id}")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::StructureMismatch(format!("team {id} assigned twice")));
            }
        }
        if let Some(t) = self.teams.iter().find(|t| !seen.contains(&t.id)) {
            return Err(Error::StructureMismatch(format!("team {} unassigned", t.id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.teams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teams.is_empty()
    }

    pub fn index_of(&self, id: &TeamId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn team(&self, id: &TeamId) -> Option<&Team> {
        self.index_of(id).map(|i| &self.teams[i])
    }

    pub fn ids(&self) -> Vec<TeamId> {
        self.teams.iter().map(|t| t.id.clone()).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: DatasetFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let teams = f
            .teams
            .into_iter()
            .map(|r| Team {
                id: TeamId(r.id),
                name: r.name,
                city: r.city,
                location: GeoPoint::new(r.lat, r.lon),
                country: r.country,
                tz_offset_hours: r.tz_offset,
            })
            .collect();
        let current = f
            .current_structure
            .map(|n| LeagueStructure::from_nested(n, Provenance::Current));
        LeagueDataset::new(f.league_id, teams, current, f.actual_travel)
    }

    pub fn to_json_string(&self) -> String {
        let f = DatasetFile {
            league_id: self.league_id.clone(),
            teams: self
                .teams
                .iter()
                .map(|t| TeamRecord {
                    id: t.id.0.clone(),
                    name: t.name.clone(),
                    city: t.city.clone(),
                    lat: t.location.lat,
                    lon: t.location.lon,
                    country: t.country.clone(),
                    tz_offset: t.tz_offset_hours,
                })
                .collect(),
            current_structure: self.current_structure.as_ref().map(|s| s.to_nested()),
            actual_travel: self.actual_travel.clone(),
        };
        serde_json::to_string_pretty(&f).expect("dataset serializes")
    }
}

/// Reads and validates a dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LeagueDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    LeagueDataset::from_json_str(&text)
}

/// A reason a structure does not fit a dataset/template pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnassignedTeam { team: String },
    UnknownTeam { team: String },
    DuplicateAssignment { team: String },
    ConferenceCount { expected: usize, found: usize },
    ConferenceShape { conference: usize, sizes: Vec<usize> },
    DivisionSize { conference: usize, division: usize, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnassignedTeam { team } => write!(f, "unassigned team {team}"),
            Violation::UnknownTeam { team } => write!(f, "unknown team {team}"),
            Violation::DuplicateAssignment { team } => write!(f, "team {team} assigned twice"),
            Violation::ConferenceCount { expected, found } => {
                write!(f, "expected {expected} conferences, found {found}")
            }
            Violation::ConferenceShape { conference, sizes } => {
                write!(f, "conference {conference} with division sizes {sizes:?} matches no template conference")
            }
            Violation::DivisionSize { conference, division, expected, found } => write!(
                f,
                "conference {conference} division {division}: {found} teams in a {expected}-team slot"
            ),
        }
    }
}

/// Empty iff `structure` partitions the dataset's teams and fits the template.
pub fn validate_structure(
    structure: &LeagueStructure,
    dataset: &LeagueDataset,
    template: &StructureTemplate,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for id in structure.divisions().flatten() {
        if dataset.index_of(id).is_none() {
            out.push(Violation::UnknownTeam { team: id.0.clone() });
        } else if !seen.insert(id.clone()) {
            out.push(Violation::DuplicateAssignment { team: id.0.clone() });
        }
    }
    for t in &dataset.teams {
        if !seen.contains(&t.id) {
            out.push(Violation::UnassignedTeam { team: t.id.0.clone() });
        }
    }
    if structure.conferences.len() != template.conferences.len() {
        out.push(Violation::ConferenceCount {
            expected: template.conferences.len(),
            found: structure.conferences.len(),
        });
        return out;
    }
    if template.assign_slots(structure).is_none() {
        // Report per division against the closest template conference of the same
        // division count, falling back to a shape violation.
        let mut used = vec![false; template.conferences.len()];
        for (ci, conf) in structure.conferences.iter().enumerate() {
            let candidate = template
                .conferences
                .iter()
                .enumerate()
                .find(|(ti, shape)| !used[*ti] && shape.groups().len() == conf.divisions.len());
            match candidate {
                Some((ti, shape)) => {
                    used[ti] = true;
                    let mut want = shape.groups();
                    want.sort_unstable();
                    let mut order: Vec<usize> = (0..conf.divisions.len()).collect();
                    order.sort_by_key(|&d| conf.divisions[d].len());
                    for (k, &d) in order.iter().enumerate() {
                        let found = conf.divisions[d].len();
                        if found != want[k] {
                            out.push(Violation::DivisionSize {
                                conference: ci,
                                division: d,
                                expected: want[k],
                                found,
                            });
                        }
                    }
                    let label_clash = matches!((&shape.label, &conf.label), (Some(a), Some(b)) if a != b);
                    if label_clash || !out.iter().any(|v| matches!(v, Violation::DivisionSize { conference, .. } if *conference == ci)) {
                        out.push(Violation::ConferenceShape {
                            conference: ci,
                            sizes: conf.divisions.iter().map(Vec::len).collect(),
                        });
                    }
                }
                None => out.push(Violation::ConferenceShape {
                    conference: ci,
                    sizes: conf.divisions.iter().map(Vec::len).collect(),
                }),
            }
        }
    }
    out
}
