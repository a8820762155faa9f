//! Bundled leagues, named templates and the relocation gazetteer.

use crate::error::{Error, Result};
use crate::model::{Games, LeagueDataset, LeagueStructure, ScheduleProfile, StructureTemplate, Provenance};
use serde::{Deserialize, Serialize};

pub const LEAGUE_IDS: [&str; 4] = ["nhl-2011", "mlb-2012", "nfl-2012", "nba-2012"];

fn source(id: &str) -> Option<&'static str> {
    Some(match id {
        "nhl-2011" => include_str!("../data/nhl-2011.json"),
        "mlb-2012" => include_str!("../data/mlb-2012.json"),
        "nfl-2012" => include_str!("../data/nfl-2012.json"),
        "nba-2012" => include_str!("../data/nba-2012.json"),
        _ => return None,
    })
}

/// A bundled league by id.
pub fn dataset(id: &str) -> Result<LeagueDataset> {
    let text = source(id).ok_or_else(|| Error::UnknownName { kind: "dataset", name: id.into() })?;
    LeagueDataset::from_json_str(text)
}

/// A candidate relocation or expansion city.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazetteerCity {
    pub key: String,
    pub city: String,
    pub lat: f64,
    pub lon: f64,
    pub country: String,
    pub tz_offset: i32,
}

pub fn gazetteer() -> Vec<GazetteerCity> {
    serde_json::from_str(include_str!("../data/gazetteer.json")).expect("bundled gazetteer parses")
}

pub fn city(key: &str) -> Result<GazetteerCity> {
    gazetteer()
        .into_iter()
        .find(|c| c.key.eq_ignore_ascii_case(key))
        .ok_or_else(|| Error::UnknownName { kind: "city", name: key.into() })
}

/// League family of an id such as `nhl-2011` (the part before the first `-`).
pub fn family(league_id: &str) -> &str {
    league_id.split('-').next().unwrap_or(league_id)
}

/// Template names available for a league family; the first is the default.
pub fn template_names(league_id: &str) -> &'static [&'static str] {
    match family(league_id) {
        "nhl" => &["6x5", "4conf", "8x4", "4x8"],
        "mlb" | "nba" => &["6x5"],
        "nfl" => &["8x4"],
        _ => &[],
    }
}

pub fn default_template(league_id: &str) -> Option<&'static str> {
    template_names(league_id).first().copied()
}

fn two_by_three_fives(schedule: ScheduleProfile) -> Result<StructureTemplate> {
    StructureTemplate::new(&[15, 15], &[vec![5, 5, 5], vec![5, 5, 5]], schedule)
}

/// A named template for a league family.
///
/// * `6x5`: two conferences of three 5-team divisions.
/// * `4conf` (NHL): four undivided conferences of 7, 8, 7 and 8 teams.
/// * `8x4`: two conferences of four 4-team divisions.
/// * `4x8` (NHL): two conferences of two 8-team divisions.
pub fn template(league_id: &str, name: &str) -> Result<StructureTemplate> {
    let unknown = || Error::UnknownName { kind: "template", name: format!("{name} for {league_id}") };
    match (family(league_id), name) {
        ("nhl", "6x5") => two_by_three_fives(ScheduleProfile::totals(24.0, 40.0, 18.0)),
        ("mlb", "6x5") => two_by_three_fives(ScheduleProfile::totals(24.0, 20.0, 6.0)),
        ("nba", "6x5") => two_by_three_fives(ScheduleProfile::totals(16.0, 36.0, 30.0)),
        ("nhl", "4conf") => StructureTemplate::new(
            &[7, 8, 7, 8],
            &[],
            ScheduleProfile::Totals {
                division_games: Games::Uniform(0.0),
                conference_games: Games::PerConference(vec![36.0, 38.0, 36.0, 38.0]),
                nonconference_games: Games::PerConference(vec![46.0, 44.0, 46.0, 44.0]),
            },
        ),
        ("nfl", "8x4") => StructureTemplate::new(
            &[16, 16],
            &[vec![4; 4], vec![4; 4]],
            ScheduleProfile::totals(6.0, 6.0, 4.0),
        ),
        ("nhl", "8x4") => StructureTemplate::new(
            &[16, 16],
            &[vec![4; 4], vec![4; 4]],
            ScheduleProfile::totals(18.0, 36.0, 28.0),
        ),
        ("nhl", "4x8") => StructureTemplate::new(
            &[16, 16],
            &[vec![8, 8], vec![8, 8]],
            ScheduleProfile::totals(28.0, 24.0, 30.0),
        ),
        _ => Err(unknown()),
    }
}

/// The four-conference NHL plan announced for 2012-13.
pub fn nhl_proposed_four_conference() -> LeagueStructure {
    LeagueStructure::from_strs(
        &[
            &[&["CHI", "DAL", "DET", "MIN", "NSH", "STL", "WPG"]],
            &[&["ANA", "CGY", "COL", "EDM", "LA", "PHO", "SJ", "VAN"]],
            &[&["BOS", "BUF", "FLA", "MTL", "OTT", "TB", "TOR"]],
            &[&["CAR", "CBJ", "NJ", "NYI", "NYR", "PHI", "PIT", "WSH"]],
        ],
        Provenance::Manual,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_structure;

    #[test]
    fn bundled_leagues_load_and_validate() {
        for id in LEAGUE_IDS {
            let ds = dataset(id).unwrap();
            assert_eq!(ds.league_id, id);
            let t = template(id, default_template(id).unwrap()).unwrap();
            assert_eq!(ds.len(), t.team_count());
            let cur = ds.current_structure.as_ref().unwrap();
            assert!(validate_structure(cur, &ds, &t).is_empty(), "{id}");
        }
        assert!(dataset("xfl-2001").is_err());
    }

    #[test]
    fn nhl_arenas_are_distinct() {
        let ds = dataset("nhl-2011").unwrap();
        for (i, a) in ds.teams.iter().enumerate() {
            for b in &ds.teams[i + 1..] {
                assert_ne!(a.location, b.location, "{} {}", a.id, b.id);
            }
        }
    }

    #[test]
    fn proposed_plan_fits_four_conference_template() {
        let ds = dataset("nhl-2011").unwrap();
        let t = template("nhl-2011", "4conf").unwrap();
        assert!(validate_structure(&nhl_proposed_four_conference(), &ds, &t).is_empty());
    }

    #[test]
    fn gazetteer_lookup() {
        assert_eq!(gazetteer().len(), 6);
        assert_eq!(city("que").unwrap().country, "CA");
        assert!(city("ATL").is_err());
    }

    #[test]
    fn unknown_template() {
        assert!(template("nfl-2012", "6x5").is_err());
        assert!(template("nhl-2011", "9x9").is_err());
    }
}
