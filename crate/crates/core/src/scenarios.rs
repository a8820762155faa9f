//! What-if runs: franchise moves, expansion teams and alternative templates.

use crate::constraints::{resolve_items, ConstraintItem, Predicate};
use crate::datasets;
use crate::error::{Error, Result};
use crate::hullsplit::{generate, CandidateSet, GenerateOptions};
use crate::model::{load_dataset, GeoPoint, LeagueDataset, StructureTemplate, Team, TeamId};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where a team plays after an edit. `city` names a gazetteer entry; the
/// explicit fields override it or, without `city`, must all be given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Site {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tz_offset: Option<i32>,
}

struct Resolved {
    city: String,
    location: GeoPoint,
    country: String,
    tz_offset: i32,
}

impl Site {
    pub fn gazetteer(key: &str) -> Self {
        Site { city: Some(key.to_string()), ..Default::default() }
    }

    fn resolve(&self) -> Result<Resolved> {
        let base = self.city.as_deref().map(datasets::city).transpose()?;
        let missing = |field: &str| Error::Parse(format!("site needs `{field}` when no gazetteer city is given"));
        let lat = self.lat.or(base.as_ref().map(|c| c.lat)).ok_or_else(|| missing("lat"))?;
        let lon = self.lon.or(base.as_ref().map(|c| c.lon)).ok_or_else(|| missing("lon"))?;
        let location = GeoPoint::new(lat, lon);
        if !location.is_valid() {
            return Err(Error::Parse(format!("site coordinates ({lat}, {lon}) out of range")));
        }
        Ok(Resolved {
            city: self
                .city_name
                .clone()
                .or(base.as_ref().map(|c| c.city.clone()))
                .unwrap_or_else(|| format!("{lat:.4}, {lon:.4}")),
            location,
            country: self
                .country
                .clone()
                .or(base.as_ref().map(|c| c.country.clone()))
                .ok_or_else(|| missing("country"))?,
            tz_offset: self
                .tz_offset
                .or(base.as_ref().map(|c| c.tz_offset))
                .ok_or_else(|| missing("tz_offset"))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveEdit {
    pub team: TeamId,
    #[serde(flatten)]
    pub to: Site,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddEdit {
    pub id: TeamId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub at: Site,
}

/// `{"move": {...}}` or `{"add": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    Move(MoveEdit),
    Add(AddEdit),
}

impl Edit {
    pub fn relocate(team: &str, city: &str) -> Self {
        Edit::Move(MoveEdit { team: TeamId::from(team), to: Site::gazetteer(city) })
    }

    pub fn expansion(id: &str, city: &str) -> Self {
        Edit::Add(AddEdit { id: TeamId::from(id), name: None, at: Site::gazetteer(city) })
    }
}

/// A template by name (looked up for the base league) or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateSpec {
    Named(String),
    Inline(serde_json::Value),
}

impl TemplateSpec {
    pub fn resolve(&self, league_id: &str) -> Result<StructureTemplate> {
        match self {
            TemplateSpec::Named(name) => datasets::template(league_id, name),
            TemplateSpec::Inline(v) => StructureTemplate::from_json_str(&v.to_string()),
        }
    }
}

fn default_top_k() -> usize {
    10
}

/// Scenario file: `{base, edits, template, predicates, top_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Bundled dataset id or path to a dataset file.
    pub base: String,
    #[serde(default)]
    pub edits: Vec<Edit>,
    pub template: TemplateSpec,
    #[serde(default)]
    pub predicates: Vec<ConstraintItem>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn predicates(&self) -> Result<Vec<Predicate>> {
        resolve_items(&self.predicates)
    }

    pub fn base_dataset(&self) -> Result<LeagueDataset> {
        resolve_dataset(&self.base)
    }

    pub fn template(&self) -> Result<StructureTemplate> {
        self.template.resolve(&self.base_dataset()?.league_id)
    }
}

/// A bundled dataset id, or else a dataset file path.
pub fn resolve_dataset(reference: &str) -> Result<LeagueDataset> {
    if datasets::LEAGUE_IDS.contains(&reference) {
        return datasets::dataset(reference);
    }
    if Path::new(reference).exists() {
        return load_dataset(reference);
    }
    Err(Error::UnknownName { kind: "dataset", name: reference.into() })
}

/// Applies `edits` in order to `base`. Moves keep the current structure and
/// drop the mover's historical travel; additions drop the current structure.
pub fn apply_edits(base: &LeagueDataset, edits: &[Edit]) -> Result<LeagueDataset> {
    if edits.is_empty() {
        return Ok(base.clone());
    }
    let mut teams = base.teams.clone();
    let mut current = base.current_structure.clone();
    let mut travel = base.actual_travel.clone();
    for edit in edits {
        match edit {
            Edit::Move(m) => {
                let team = teams
                    .iter_mut()
                    .find(|t| t.id == m.team)
                    .ok_or_else(|| Error::UnknownTeam(m.team.0.clone()))?;
                let site = m.to.resolve()?;
                team.city = site.city;
                team.location = site.location;
                team.country = site.country;
                team.tz_offset_hours = site.tz_offset;
                if let Some(t) = travel.as_mut() {
                    t.remove(&m.team);
                }
            }
            Edit::Add(a) => {
                if teams.iter().any(|t| t.id == a.id) {
                    return Err(Error::DuplicateTeam(a.id.0.clone()));
                }
                let site = a.at.resolve()?;
                teams.push(Team {
                    id: a.id.clone(),
                    name: a.name.clone().unwrap_or_else(|| format!("{} expansion", site.city)),
                    city: site.city,
                    location: site.location,
                    country: site.country,
                    tz_offset_hours: site.tz_offset,
                });
                current = None;
            }
        }
    }
    LeagueDataset::new(base.league_id.clone(), teams, current, travel)
}

/// The edited dataset, checked against the scenario's template size.
pub fn apply_scenario(scenario: &Scenario) -> Result<LeagueDataset> {
    let base = scenario.base_dataset()?;
    let template = scenario.template.resolve(&base.league_id)?;
    let ds = apply_edits(&base, &scenario.edits)?;
    if ds.len() != template.team_count() {
        return Err(Error::StructureMismatch(format!(
            "scenario yields {} teams but the template holds {}",
            ds.len(),
            template.team_count()
        )));
    }
    Ok(ds)
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub dataset: LeagueDataset,
    pub template: StructureTemplate,
    pub predicates: Vec<Predicate>,
    pub candidates: CandidateSet<f64>,
}

/// Generates over the edited dataset with the scenario's predicates added to
/// `options`, keeping the scenario's `top_k` best.
pub fn run_scenario(scenario: &Scenario, options: &GenerateOptions) -> Result<ScenarioRun> {
    let dataset = apply_scenario(scenario)?;
    let template = scenario.template.resolve(&dataset.league_id)?;
    let mut predicates = options.predicates.clone();
    predicates.extend(scenario.predicates()?);
    let opts = GenerateOptions {
        predicates: predicates.clone(),
        top_k: scenario.top_k,
        keep_all: false,
        ..options.clone()
    };
    let candidates = generate::<f64>(&dataset, &template, &opts)?;
    Ok(ScenarioRun { dataset, template, predicates, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(edits: Vec<Edit>, template: &str) -> Scenario {
        Scenario {
            base: "nhl-2011".into(),
            edits,
            template: TemplateSpec::Named(template.into()),
            predicates: Vec::new(),
            top_k: 5,
        }
    }

    #[test]
    fn relocation_keeps_league_size() {
        let s = scenario(vec![Edit::relocate("PHO", "QUE")], "6x5");
        let ds = apply_scenario(&s).unwrap();
        assert_eq!(ds.len(), 30);
        let pho = ds.team(&TeamId::from("PHO")).unwrap();
        assert_eq!(pho.country, "CA");
        assert_eq!(pho.city, "Quebec City");
        assert!(ds.current_structure.is_some());
    }

    #[test]
    fn expansion_to_thirty_two() {
        let edits = vec![Edit::relocate("PHO", "LV"), Edit::expansion("ONT", "ONT"), Edit::expansion("QUE", "QUE")];
        for t in ["8x4", "4x8"] {
            let ds = apply_scenario(&scenario(edits.clone(), t)).unwrap();
            assert_eq!(ds.len(), 32);
            assert!(ds.current_structure.is_none());
        }
        assert!(matches!(apply_scenario(&scenario(edits, "6x5")), Err(Error::StructureMismatch(_))));
    }

    #[test]
    fn empty_edits_are_identity() {
        let base = datasets::dataset("nhl-2011").unwrap();
        let ds = apply_scenario(&scenario(vec![], "6x5")).unwrap();
        assert_eq!(ds, base);
        let a = crate::geodesy::distance_matrix::<f64>(&ds);
        let b = crate::geodesy::distance_matrix::<f64>(&base);
        assert!((0..30).all(|i| (0..30).all(|j| a.get(i, j).to_bits() == b.get(i, j).to_bits())));
    }

    #[test]
    fn edit_errors() {
        assert!(matches!(
            apply_scenario(&scenario(vec![Edit::relocate("XXX", "QUE")], "6x5")),
            Err(Error::UnknownTeam(_))
        ));
        assert!(apply_scenario(&scenario(vec![Edit::relocate("PHO", "ATLANTIS")], "6x5")).is_err());
        let dup = vec![Edit::expansion("TOR", "ONT"), Edit::expansion("QUE", "QUE")];
        assert!(matches!(apply_scenario(&scenario(dup, "8x4")), Err(Error::DuplicateTeam(_))));
        let partial = Edit::Move(MoveEdit { team: TeamId::from("PHO"), to: Site { lat: Some(40.0), ..Default::default() } });
        assert!(matches!(apply_scenario(&scenario(vec![partial], "6x5")), Err(Error::Parse(_))));
    }

    #[test]
    fn base_is_untouched() {
        let base = datasets::dataset("nhl-2011").unwrap();
        let edits = vec![Edit::relocate("PHO", "SEA")];
        let a = apply_edits(&base, &edits).unwrap();
        let b = apply_edits(&base, &edits).unwrap();
        assert_eq!(a, b);
        assert_eq!(base, datasets::dataset("nhl-2011").unwrap());
        assert_ne!(a, base);
    }

    #[test]
    fn scenario_file_round_trip() {
        let json = r#"{
            "base": "nhl-2011",
            "edits": [
                {"move": {"team": "PHO", "city": "LV"}},
                {"add": {"id": "ONT", "city": "ONT", "name": "Hamilton Expansion"}},
                {"add": {"id": "QUE", "lat": 46.8, "lon": -71.2, "country": "CA", "tz_offset": -5}}
            ],
            "template": "8x4",
            "predicates": ["fla-tb", {"kind": "apart", "params": {"teams": ["ONT", "TOR"]}}],
            "top_k": 3
        }"#;
        let s = Scenario::from_json_str(json).unwrap();
        assert_eq!(s.predicates().unwrap().len(), 2);
        let ds = apply_scenario(&s).unwrap();
        assert_eq!(ds.team(&TeamId::from("ONT")).unwrap().name, "Hamilton Expansion");
        let back = Scenario::from_json_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(Scenario::from_json_str("{\"base\": 3}").is_err());
    }

    #[test]
    fn inline_template() {
        let json = r#"{"base": "nba-2012", "template": {"conference_sizes": [15, 15],
            "divisions_per_conference": [[5, 5, 5], [5, 5, 5]],
            "schedule": {"division_games": 16, "conference_games": 36, "nonconference_games": 30}}}"#;
        let s = Scenario::from_json_str(json).unwrap();
        assert_eq!(s.template().unwrap(), datasets::template("nba-2012", "6x5").unwrap());
        assert_eq!(s.top_k, 10);
    }
}
