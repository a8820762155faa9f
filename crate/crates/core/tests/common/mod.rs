#![allow(dead_code)]

use realign::model::{GeoPoint, LeagueDataset, ScheduleProfile, StructureTemplate, Team, TeamId};
use realign_testkit::SyntheticTemplate;

pub fn synthetic_league(id: &str, sites: &[(f64, f64)]) -> LeagueDataset {
    let teams = sites
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon))| Team {
            id: TeamId(format!("S{i:02}")),
            name: format!("Synthetic {i}"),
            city: format!("Site {i}"),
            location: GeoPoint::new(lat, lon),
            country: "US".into(),
            tz_offset_hours: -5 - ((lon + 70.0) / -13.5).floor() as i32,
        })
        .collect();
    LeagueDataset::new(id, teams, None, None).unwrap()
}

pub fn template_of(t: &SyntheticTemplate) -> StructureTemplate {
    let (d, c, o) = t.totals;
    StructureTemplate::new(&t.conference_sizes, &t.divisions, ScheduleProfile::totals(d, c, o)).unwrap()
}
