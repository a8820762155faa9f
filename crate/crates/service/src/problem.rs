use crate::error::ApiError;
use realign::constraints::{resolve_items, ConstraintItem, Predicate};
use realign::datasets;
use realign::model::{LeagueDataset, LeagueStructure, StructureTemplate};
use realign::scenarios::{apply_edits, Edit, TemplateSpec};
use serde::Deserialize;
use serde_json::Value;

/// Dataset, template, predicates and edits shared by every POST body.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct ProblemSpec {
    /// Bundled league id or an inline dataset object.
    pub dataset: Option<Value>,
    pub template: Option<TemplateSpec>,
    #[serde(default)]
    pub predicates: Vec<ConstraintItem>,
    #[serde(default)]
    pub edits: Vec<Edit>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub dataset: LeagueDataset,
    pub template: StructureTemplate,
    pub template_label: String,
    pub predicates: Vec<Predicate>,
}

impl ProblemSpec {
    pub fn resolve(&self) -> Result<Problem, ApiError> {
        let base = match &self.dataset {
            Some(Value::String(id)) => datasets::dataset(id).map_err(|_| {
                ApiError::bad_request(format!("unknown league {id:?}")).with_details(serde_json::json!({
                    "known": datasets::LEAGUE_IDS,
                }))
            })?,
            Some(v @ Value::Object(_)) => LeagueDataset::from_json_str(&v.to_string())?,
            Some(_) => return Err(ApiError::bad_request("dataset must be a league id or a dataset object")),
            None => return Err(ApiError::bad_request("missing dataset")),
        };
        let dataset = apply_edits(&base, &self.edits)?;
        let (template, template_label) = match &self.template {
            Some(spec @ TemplateSpec::Named(name)) => (spec.resolve(&dataset.league_id)?, name.clone()),
            Some(spec @ TemplateSpec::Inline(_)) => (spec.resolve(&dataset.league_id)?, "inline".to_string()),
            None => {
                let name = datasets::default_template(&dataset.league_id).ok_or_else(|| {
                    ApiError::bad_request(format!("no default template for {}", dataset.league_id))
                })?;
                (datasets::template(&dataset.league_id, name)?, name.to_string())
            }
        };
        if template.team_count() != dataset.len() {
            return Err(ApiError::bad_request(format!(
                "template {template_label} holds {} teams but the league has {}",
                template.team_count(),
                dataset.len()
            ))
            .with_details(serde_json::json!({"template_teams": template.team_count(), "league_teams": dataset.len()})));
        }
        let predicates = resolve_items(&self.predicates)?;
        for p in &predicates {
            p.check_against(&dataset)?;
        }
        Ok(Problem { dataset, template, template_label, predicates })
    }
}

/// A structure given inline or as the string `"current"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StructureRef {
    Named(String),
    Inline(Value),
}

impl StructureRef {
    pub fn resolve(&self, dataset: &LeagueDataset) -> Result<LeagueStructure, ApiError> {
        let s = match self {
            StructureRef::Named(n) if n == "current" => dataset
                .current_structure
                .clone()
                .ok_or_else(|| ApiError::bad_request(format!("{} has no current alignment", dataset.league_id)))?,
            StructureRef::Named(n) => return Err(ApiError::bad_request(format!("unknown structure name {n:?}"))),
            StructureRef::Inline(v) => LeagueStructure::from_json(v)?,
        };
        dataset.check_partition(&s)?;
        Ok(s)
    }
}
