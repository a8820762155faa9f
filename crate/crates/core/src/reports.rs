//! Per-team travel diffs, summary tables, hull maps and the fuel estimate.

use crate::error::{Error, Result};
use crate::geodesy::projection;
use crate::geometry::convex_hull;
use crate::model::{LeagueDataset, LeagueStructure, TeamId};
use crate::surrogate::{ScoredStructure, TravelModel};
use serde::Serialize;
use serde_json::{json, Value};

/// Gallons of jet fuel burned per mile flown by a team charter.
pub const DEFAULT_GALLONS_PER_MILE: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Better,
    Worse,
    Same,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TeamDiff {
    pub team_id: TeamId,
    pub current: f64,
    pub alternative: f64,
    /// `alternative - current`.
    pub delta: f64,
    pub direction: Direction,
}

/// Predicted travel of every team under two structures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TravelDiff {
    /// Sorted by current travel, largest first.
    pub teams: Vec<TeamDiff>,
    pub current_total: f64,
    pub alternative_total: f64,
    /// Sum of the team deltas.
    pub delta_total: f64,
}

impl TravelDiff {
    pub fn team(&self, id: &str) -> Option<&TeamDiff> {
        self.teams.iter().find(|t| t.team_id.as_str() == id)
    }
}

/// Team-by-team change from `current` to `alternative` under `model`.
pub fn travel_diff(
    current: &ScoredStructure<f64>,
    alternative: &ScoredStructure<f64>,
    model: &TravelModel<f64>,
) -> Result<TravelDiff> {
    if !current.per_team.keys().eq(alternative.per_team.keys()) {
        return Err(Error::Mismatch("structures cover different teams".into()));
    }
    let mut teams: Vec<TeamDiff> = current
        .per_team
        .iter()
        .zip(alternative.per_team.values())
        .map(|((id, &a), &b)| {
            let (cur, alt) = (model.predict(a), model.predict(b));
            let delta = alt - cur;
            let tol = 1e-9 * cur.abs().max(alt.abs()).max(1.0);
            let direction = if delta < -tol {
                Direction::Better
            } else if delta > tol {
                Direction::Worse
            } else {
                Direction::Same
            };
            TeamDiff { team_id: id.clone(), current: cur, alternative: alt, delta, direction }
        })
        .collect();
    teams.sort_by(|a, b| b.current.total_cmp(&a.current).then_with(|| a.team_id.cmp(&b.team_id)));
    Ok(TravelDiff {
        current_total: teams.iter().map(|t| t.current).sum(),
        alternative_total: teams.iter().map(|t| t.alternative).sum(),
        delta_total: teams.iter().map(|t| t.delta).sum(),
        teams,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    /// Rows sharing a group are compared against that group's minimum.
    pub group: String,
    pub total: f64,
    pub over_minimum: f64,
}

/// One row per `(label, group, structure)`, with miles over the smallest D of
/// its group.
pub fn summary_table(rows: &[(&str, &str, &ScoredStructure<f64>)]) -> Vec<SummaryRow> {
    let min_of = |group: &str| {
        rows.iter()
            .filter(|r| r.1 == group)
            .map(|r| r.2.total)
            .fold(f64::INFINITY, f64::min)
    };
    rows.iter()
        .map(|&(label, group, s)| SummaryRow {
            label: label.to_string(),
            group: group.to_string(),
            total: s.total,
            over_minimum: s.total - min_of(group),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FuelEstimate {
    pub miles: f64,
    pub gallons_per_mile: f64,
    pub gallons: f64,
}

pub fn fuel_estimate(delta_miles: f64, gallons_per_mile: f64) -> FuelEstimate {
    FuelEstimate { miles: delta_miles, gallons_per_mile, gallons: delta_miles * gallons_per_mile }
}

fn lon_lat(dataset: &LeagueDataset, i: usize) -> Value {
    let p = dataset.teams[i].location;
    json!([p.lon, p.lat])
}

/// FeatureCollection with one hull feature per division (polygon, line for
/// two distinct sites, point for one) and one point per team. Hulls are taken
/// in the league projection; vertices are the member teams' own coordinates.
pub fn hull_geojson(structure: &LeagueStructure, dataset: &LeagueDataset) -> Result<String> {
    dataset.check_partition(structure)?;
    let proj = projection::<f64>(dataset);
    let mut features = Vec::new();
    let mut team_features = Vec::new();
    for (ci, conf) in structure.conferences.iter().enumerate() {
        for (di, div) in conf.divisions.iter().enumerate() {
            let members: Vec<usize> = div
                .iter()
                .map(|id| dataset.index_of(id).ok_or_else(|| Error::UnknownTeam(id.0.clone())))
                .collect::<Result<_>>()?;
            let pts: Vec<_> = members.iter().map(|&i| proj.points[i]).collect();
            let hull: Vec<usize> = convex_hull(&pts).into_iter().map(|k| members[k]).collect();
            let geometry = match hull.len() {
                0 => continue,
                1 => json!({"type": "Point", "coordinates": lon_lat(dataset, hull[0])}),
                2 => json!({"type": "LineString", "coordinates": [lon_lat(dataset, hull[0]), lon_lat(dataset, hull[1])]}),
                _ => {
                    let mut ring: Vec<Value> = hull.iter().map(|&i| lon_lat(dataset, i)).collect();
                    ring.push(lon_lat(dataset, hull[0]));
                    json!({"type": "Polygon", "coordinates": [ring]})
                }
            };
            features.push(json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": {
                    "kind": "division",
                    "conference": ci,
                    "conference_label": conf.label,
                    "division": di,
                    "teams": div,
                },
            }));
            for &i in &members {
                let t = &dataset.teams[i];
                team_features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": lon_lat(dataset, i)},
                    "properties": {
                        "kind": "team",
                        "team_id": t.id,
                        "name": t.name,
                        "city": t.city,
                        "conference": ci,
                        "conference_label": conf.label,
                        "division": di,
                    },
                }));
            }
        }
    }
    features.extend(team_features);
    let fc = json!({"type": "FeatureCollection", "features": features});
    Ok(serde_json::to_string_pretty(&fc).expect("geojson serializes"))
}

/// `BOS BUF / MTL OTT | ...`: divisions split by `/`, conferences by `|`.
pub fn structure_label(structure: &LeagueStructure) -> String {
    structure
        .conferences
        .iter()
        .map(|c| {
            let divs = c
                .divisions
                .iter()
                .map(|d| d.iter().map(TeamId::as_str).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join(" / ");
            match &c.label {
                Some(l) => format!("{l}: {divs}"),
                None => divs,
            }
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn miles(v: f64) -> String {
    format!("{v:.3}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `rank,total_miles,over_best,structure`.
pub fn candidates_csv(entries: &[ScoredStructure<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "total_miles", "over_best", "structure"]).map_err(csv_err)?;
    let best = entries.first().map_or(0.0, |e| e.total);
    for (k, e) in entries.iter().enumerate() {
        w.write_record([(k + 1).to_string(), miles(e.total), miles(e.total - best), structure_label(&e.structure)])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// `label,group,total_miles,over_minimum`.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "group", "total_miles", "over_minimum"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.label.clone(), r.group.clone(), miles(r.total), miles(r.over_minimum)])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// `team_id,current,alternative,delta,direction`, then a `TOTAL` row.
pub fn diff_csv(diff: &TravelDiff) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["team_id", "current", "alternative", "delta", "direction"]).map_err(csv_err)?;
    let token = |d: Direction| match d {
        Direction::Better => "better",
        Direction::Worse => "worse",
        Direction::Same => "same",
    };
    for t in &diff.teams {
        w.write_record([
            t.team_id.0.clone(),
            miles(t.current),
            miles(t.alternative),
            miles(t.delta),
            token(t.direction).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let total_dir = if diff.delta_total < 0.0 {
        Direction::Better
    } else if diff.delta_total > 0.0 {
        Direction::Worse
    } else {
        Direction::Same
    };
    w.write_record([
        "TOTAL".to_string(),
        miles(diff.current_total),
        miles(diff.alternative_total),
        miles(diff.delta_total),
        token(total_dir).to_string(),
    ])
    .map_err(csv_err)?;
    finish(w)
}
