//! Exact division assignment.
//!
//! [`build_mip`] writes the assignment/pairing integer program: binary
//! `x[v][i]` puts team `v` in division slot `i`, binary `y[u][v][i][j]` marks
//! the pair `(u, v)` as sitting in slots `(i, j)`, and the objective maximizes
//! `sum (M - c) * y` with `c = d(u, v) * G[i][j]`. The model can be exported
//! in LP format for an external solver.
//!
//! [`solve_exact`] solves small instances internally by depth-first
//! branch-and-bound over direct team-to-slot assignments.

use crate::constraints::{CompiledPredicates, Predicate};
use crate::error::{Error, Result};
use crate::geodesy::{distance_matrix, DistanceMatrix};
use crate::model::{CanonicalForm, LeagueDataset, LeagueStructure, Provenance, StructureTemplate, TeamId};
use crate::surrogate::{build_game_matrix, per_team_distance, structure_from_slots, GameMatrix, ScoredStructure};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Largest league the branch-and-bound search accepts.
pub const EXACT_TEAM_LIMIT: usize = 20;
/// Largest league the unbounded enumeration accepts.
pub const EXHAUSTIVE_TEAM_LIMIT: usize = 14;
/// Largest model [`solve_mip_exhaustive`] accepts.
pub const MIP_ENUMERATION_LIMIT: usize = 10;
/// Relative tolerance on D for calling a heuristic structure optimal.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-6;

/// A model variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Team `team` sits in division slot `slot`.
    X { team: usize, slot: usize },
    /// Teams `u` and `v` sit in slots `i` and `j`.
    Y { u: usize, v: usize, i: usize, j: usize },
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::X { team, slot } => write!(f, "x_{team}_{slot}"),
            Var::Y { u, v, i, j } => write!(f, "y_{u}_{v}_{i}_{j}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        let tol = 1e-9 * rhs.abs().max(1.0);
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
            Sense::Ge => lhs >= rhs - tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    /// `sum_v x[v][i] = d_i`
    DivisionSize,
    /// `sum_i x[v][i] = 1`
    TeamAssignment,
    /// `sum_{i,j} y[u][v][i][j] = 1`
    PairCoverage,
    /// `sum_{u,v} y[u][v][i][j] = d_i * d_j`
    PairCardinality,
    /// `y[u][v][i][j] <= (x[u][i] + x[v][j]) / 2`
    Linking,
    /// `x[u][i] + x[v][i] <= 1`
    Exclusion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub family: RowFamily,
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    fn lhs(&self, x: &[u8], y: &[u8], model: &MipModel) -> f64 {
        self.terms
            .iter()
            .map(|&(v, a)| {
                a * f64::from(match v {
                    Var::X { team, slot } => x[team * model.slots() + slot],
                    Var::Y { u, v, i, j } => y[model.y_index(u, v, i, j)],
                })
            })
            .sum()
    }
}

/// The assignment/pairing integer program for one dataset and template.
#[derive(Clone, Debug, PartialEq)]
pub struct MipModel {
    pub league_id: String,
    pub teams: Vec<TeamId>,
    /// `d_i` in slot order.
    pub division_sizes: Vec<usize>,
    /// `c[u][v][i][j]`, indexed by [`MipModel::y_index`].
    pub costs: Vec<f64>,
    /// Shift `M = 1 + max c`; the objective uses `M - c`.
    pub big_m: f64,
    pub rows: Vec<Row>,
    /// Slot of every team in a starting solution.
    pub warm_start: Option<Vec<usize>>,
    pub exclusions: Vec<(usize, usize)>,
}

impl MipModel {
    pub fn team_count(&self) -> usize {
        self.teams.len()
    }

    pub fn slots(&self) -> usize {
        self.division_sizes.len()
    }

    pub fn x_count(&self) -> usize {
        self.team_count() * self.slots()
    }

    pub fn y_count(&self) -> usize {
        self.x_count() * self.x_count()
    }

    pub fn binary_count(&self) -> usize {
        self.x_count() + self.y_count()
    }

    pub fn y_index(&self, u: usize, v: usize, i: usize, j: usize) -> usize {
        let (n, s) = (self.team_count(), self.slots());
        ((u * n + v) * s + i) * s + j
    }

    pub fn cost(&self, u: usize, v: usize, i: usize, j: usize) -> f64 {
        self.costs[self.y_index(u, v, i, j)]
    }

    pub fn shifted_cost(&self, u: usize, v: usize, i: usize, j: usize) -> f64 {
        self.big_m - self.cost(u, v, i, j)
    }

    pub fn rows_of(&self, family: RowFamily) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.family == family)
    }

    /// `x` values (row-major by team) for a slot assignment.
    pub fn assignment_values(&self, slot_of: &[usize]) -> Vec<u8> {
        let s = self.slots();
        let mut x = vec![0u8; self.x_count()];
        for (v, &i) in slot_of.iter().enumerate() {
            x[v * s + i] = 1;
        }
        x
    }

    /// Best `y` for fixed `x` under the shifted objective: for every pair the
    /// highest-valued `(i, j)` the linking rows allow, or nothing if none does.
    pub fn optimal_pairing(&self, x: &[u8]) -> Vec<u8> {
        let (n, s) = (self.team_count(), self.slots());
        let mut y = vec![0u8; self.y_count()];
        for u in 0..n {
            for v in 0..n {
                let mut best: Option<(f64, usize)> = None;
                for i in 0..s {
                    for j in 0..s {
                        let cap = 0.5 * f64::from(x[u * s + i] + x[v * s + j]);
                        if cap < 1.0 {
                            continue;
                        }
                        let value = self.shifted_cost(u, v, i, j);
                        if best.is_none_or(|(b, _)| value > b) {
                            best = Some((value, self.y_index(u, v, i, j)));
                        }
                    }
                }
                if let Some((_, k)) = best {
                    y[k] = 1;
                }
            }
        }
        y
    }

    /// Names of rows violated by `(x, y)`.
    pub fn violations(&self, x: &[u8], y: &[u8]) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.sense.holds(r.lhs(x, y, self), r.rhs))
            .map(|r| r.name.clone())
            .collect()
    }

    /// Names of violated rows that involve only `x`.
    pub fn assignment_violations(&self, x: &[u8]) -> Vec<String> {
        let y = vec![0u8; 0];
        self.rows
            .iter()
            .filter(|r| matches!(r.family, RowFamily::DivisionSize | RowFamily::TeamAssignment | RowFamily::Exclusion))
            .filter(|r| !r.sense.holds(r.lhs(x, &y, self), r.rhs))
            .map(|r| r.name.clone())
            .collect()
    }

    /// `sum (M - c) * y`.
    pub fn shifted_objective(&self, y: &[u8]) -> f64 {
        y.iter()
            .zip(&self.costs)
            .filter(|(&on, _)| on == 1)
            .map(|(_, &c)| self.big_m - c)
            .sum()
    }

    /// `sum c * y`, which equals D when `y` pairs every team pair once.
    pub fn cost_objective(&self, y: &[u8]) -> f64 {
        y.iter()
            .zip(&self.costs)
            .filter(|(&on, _)| on == 1)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Records a starting solution.
    pub fn with_warm_start(mut self, structure: &LeagueStructure, template: &StructureTemplate) -> Result<Self> {
        self.warm_start = Some(slots_of(structure, template, &self.teams)?);
        Ok(self)
    }

    /// Companion start file: one `x_v_i = 1` line per team.
    pub fn warm_start_text(&self) -> Option<String> {
        self.warm_start.as_ref().map(|slot_of| {
            slot_of
                .iter()
                .enumerate()
                .map(|(team, &slot)| format!("{} = 1\n", Var::X { team, slot }))
                .collect()
        })
    }
}

/// Slot of every team in `ids` order.
fn slots_of(structure: &LeagueStructure, template: &StructureTemplate, ids: &[TeamId]) -> Result<Vec<usize>> {
    let slots = template
        .assign_slots(structure)
        .ok_or_else(|| Error::StructureMismatch("structure does not fit the template".into()))?;
    let index: HashMap<&TeamId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut slot_of = vec![usize::MAX; ids.len()];
    for (conf, conf_slots) in structure.conferences.iter().zip(&slots) {
        for (div, &slot) in conf.divisions.iter().zip(conf_slots) {
            for id in div {
                let &i = index.get(id).ok_or_else(|| Error::UnknownTeam(id.0.clone()))?;
                if slot_of[i] != usize::MAX {
                    return Err(Error::StructureMismatch(format!("team {id} assigned twice")));
                }
                slot_of[i] = slot;
            }
        }
    }
    if let Some(i) = slot_of.iter().position(|&s| s == usize::MAX) {
        return Err(Error::MissingTeam(ids[i].0.clone()));
    }
    Ok(slot_of)
}

fn check_size(dataset: &LeagueDataset, template: &StructureTemplate) -> Result<()> {
    if dataset.len() != template.team_count() {
        return Err(Error::StructureMismatch(format!(
            "dataset has {} teams but the template holds {}",
            dataset.len(),
            template.team_count()
        )));
    }
    Ok(())
}

/// Builds the five constraint families and the shifted objective.
pub fn build_mip(dataset: &LeagueDataset, template: &StructureTemplate) -> Result<MipModel> {
    check_size(dataset, template)?;
    let g = build_game_matrix::<f64>(template)?;
    let d = distance_matrix::<f64>(dataset);
    let n = dataset.len();
    let sizes = template.slot_sizes();
    let s = sizes.len();
    let mut costs = Vec::with_capacity(n * n * s * s);
    for u in 0..n {
        for v in 0..n {
            for i in 0..s {
                for j in 0..s {
                    costs.push(d.get(u, v) * g.get(i, j));
                }
            }
        }
    }
    let big_m = 1.0 + costs.iter().copied().fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(s + n + n * n + s * s + n * n * s * s);
    for (i, &size) in sizes.iter().enumerate() {
        rows.push(Row {
            family: RowFamily::DivisionSize,
            name: format!("size_{i}"),
            terms: (0..n).map(|v| (Var::X { team: v, slot: i }, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: size as f64,
        });
    }
    for v in 0..n {
        rows.push(Row {
            family: RowFamily::TeamAssignment,
            name: format!("team_{v}"),
            terms: (0..s).map(|i| (Var::X { team: v, slot: i }, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for u in 0..n {
        for v in 0..n {
            let terms = (0..s)
                .flat_map(|i| (0..s).map(move |j| (Var::Y { u, v, i, j }, 1.0)))
                .collect();
            rows.push(Row {
                family: RowFamily::PairCoverage,
                name: format!("pair_{u}_{v}"),
                terms,
                sense: Sense::Eq,
                rhs: 1.0,
            });
        }
    }
    for i in 0..s {
        for j in 0..s {
            let terms = (0..n)
                .flat_map(|u| (0..n).map(move |v| (Var::Y { u, v, i, j }, 1.0)))
                .collect();
            rows.push(Row {
                family: RowFamily::PairCardinality,
                name: format!("block_{i}_{j}"),
                terms,
                sense: Sense::Eq,
                rhs: (sizes[i] * sizes[j]) as f64,
            });
        }
    }
    for u in 0..n {
        for v in 0..n {
            for i in 0..s {
                for j in 0..s {
                    rows.push(Row {
                        family: RowFamily::Linking,
                        name: format!("link_{u}_{v}_{i}_{j}"),
                        terms: vec![
                            (Var::Y { u, v, i, j }, 1.0),
                            (Var::X { team: u, slot: i }, -0.5),
                            (Var::X { team: v, slot: j }, -0.5),
                        ],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                }
            }
        }
    }
    Ok(MipModel {
        league_id: dataset.league_id.clone(),
        teams: dataset.ids(),
        division_sizes: sizes,
        costs,
        big_m,
        rows,
        warm_start: None,
        exclusions: Vec::new(),
    })
}

/// Appends `x[u][i] + x[v][i] <= 1` for every listed pair and every slot.
pub fn add_exclusions(model: &MipModel, pairs: &[(TeamId, TeamId)]) -> Result<MipModel> {
    let index = |id: &TeamId| {
        model
            .teams
            .iter()
            .position(|t| t == id)
            .ok_or_else(|| Error::UnknownTeam(id.0.clone()))
    };
    let mut out = model.clone();
    for (a, b) in pairs {
        let (u, v) = (index(a)?, index(b)?);
        if u == v {
            return Err(Error::Predicate(format!("cannot separate {a} from itself")));
        }
        let (u, v) = (u.min(v), u.max(v));
        if out.exclusions.contains(&(u, v)) {
            continue;
        }
        out.exclusions.push((u, v));
        for i in 0..model.slots() {
            out.rows.push(Row {
                family: RowFamily::Exclusion,
                name: format!("excl_{u}_{v}_{i}"),
                terms: vec![(Var::X { team: u, slot: i }, 1.0), (Var::X { team: v, slot: i }, 1.0)],
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }
    Ok(out)
}

/// Team pairs farther apart than `threshold_miles`, in dataset order.
pub fn far_pairs(dataset: &LeagueDataset, threshold_miles: f64) -> Vec<(TeamId, TeamId)> {
    let d = distance_matrix::<f64>(dataset);
    let mut out = Vec::new();
    for u in 0..dataset.len() {
        for v in (u + 1)..dataset.len() {
            if d.get(u, v) > threshold_miles {
                out.push((dataset.teams[u].id.clone(), dataset.teams[v].id.clone()));
            }
        }
    }
    out
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (Var, f64)>) {
    let mut first = true;
    for (k, (var, a)) in terms.enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n  ");
        }
        let sign = if a < 0.0 { "-" } else if first { "" } else { "+" };
        let mag = a.abs();
        if !first || sign == "-" {
            out.push(' ');
        }
        out.push_str(sign);
        if !sign.is_empty() {
            out.push(' ');
        }
        if mag == 1.0 {
            let _ = write!(out, "{var}");
        } else {
            let _ = write!(out, "{mag} {var}");
        }
        first = false;
    }
}

/// The model in LP format. Variable `x_v_i` uses the dataset index of the
/// team; the header comment maps indices to ids.
pub fn export_lp(model: &MipModel) -> String {
    let (n, s) = (model.team_count(), model.slots());
    let mut out = String::new();
    let _ = writeln!(out, "\\ league {}: {n} teams, {s} divisions, M = {}", model.league_id, model.big_m);
    for (v, id) in model.teams.iter().enumerate() {
        let _ = writeln!(out, "\\ team {v} = {id}");
    }
    out.push_str("Maximize\n obj: ");
    let objective = (0..n).flat_map(|u| {
        (0..n).flat_map(move |v| (0..s).flat_map(move |i| (0..s).map(move |j| (u, v, i, j))))
    });
    write_terms(
        &mut out,
        objective.map(|(u, v, i, j)| (Var::Y { u, v, i, j }, model.shifted_cost(u, v, i, j))),
    );
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}: ", row.name);
        write_terms(&mut out, row.terms.iter().copied());
        let _ = writeln!(out, " {} {}", row.sense.symbol(), row.rhs);
    }
    out.push_str("Bounds\n");
    let all_vars = || {
        (0..n)
            .flat_map(move |v| (0..s).map(move |i| Var::X { team: v, slot: i }))
            .chain((0..n).flat_map(move |u| {
                (0..n).flat_map(move |v| (0..s).flat_map(move |i| (0..s).map(move |j| Var::Y { u, v, i, j })))
            }))
    };
    for var in all_vars() {
        let _ = writeln!(out, " 0 <= {var} <= 1");
    }
    out.push_str("Binaries\n");
    for var in all_vars() {
        let _ = writeln!(out, " {var}");
    }
    out.push_str("End\n");
    out
}

/// Which objective [`solve_mip_exhaustive`] optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveForm {
    /// `max sum (M - c) y`
    MaximizeShifted,
    /// `min sum c y`
    MinimizeCost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MipSolution {
    pub slot_of: Vec<usize>,
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub objective: f64,
}

/// Optimizes the model by enumerating every `x` that meets the size,
/// assignment and exclusion rows, with `y` chosen by
/// [`MipModel::optimal_pairing`]. Ties keep the first assignment in
/// enumeration order.
pub fn solve_mip_exhaustive(model: &MipModel, form: ObjectiveForm) -> Result<MipSolution> {
    let n = model.team_count();
    if n > MIP_ENUMERATION_LIMIT {
        return Err(Error::TooLarge { teams: n, limit: MIP_ENUMERATION_LIMIT });
    }
    let sizes = model.division_sizes.clone();
    let mut best: Option<MipSolution> = None;
    let mut slot_of = vec![0usize; n];
    let mut fill = vec![0usize; sizes.len()];
    fn rec(
        k: usize,
        model: &MipModel,
        form: ObjectiveForm,
        sizes: &[usize],
        slot_of: &mut Vec<usize>,
        fill: &mut Vec<usize>,
        best: &mut Option<MipSolution>,
    ) {
        if k == slot_of.len() {
            let x = model.assignment_values(slot_of);
            if !model.assignment_violations(&x).is_empty() {
                return;
            }
            let y = model.optimal_pairing(&x);
            let objective = match form {
                ObjectiveForm::MaximizeShifted => model.shifted_objective(&y),
                ObjectiveForm::MinimizeCost => model.cost_objective(&y),
            };
            let better = best.as_ref().is_none_or(|b| {
                let tol = 1e-9 * b.objective.abs().max(1.0);
                match form {
                    ObjectiveForm::MaximizeShifted => objective > b.objective + tol,
                    ObjectiveForm::MinimizeCost => objective < b.objective - tol,
                }
            });
            if better {
                *best = Some(MipSolution { slot_of: slot_of.clone(), x, y, objective });
            }
            return;
        }
        for i in 0..sizes.len() {
            if fill[i] < sizes[i] {
                fill[i] += 1;
                slot_of[k] = i;
                rec(k + 1, model, form, sizes, slot_of, fill, best);
                fill[i] -= 1;
            }
        }
    }
    rec(0, model, form, &sizes, &mut slot_of, &mut fill, &mut best);
    best.ok_or_else(|| Error::Infeasible("no assignment satisfies the model rows".into()))
}

/// How an [`ExactResult`] was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofMethod {
    /// Every assignment up to slot symmetry was scored.
    Exhaustive,
    /// Depth-first search with lower-bound pruning.
    BranchAndBound,
    /// Read from an external solver's solution.
    External,
}

impl fmt::Display for ProofMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProofMethod::Exhaustive => "exhaustive",
            ProofMethod::BranchAndBound => "branch-and-bound",
            ProofMethod::External => "external",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExactOptions {
    /// `Exhaustive` or `BranchAndBound`.
    pub method: ProofMethod,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub jobs: usize,
    /// Initial incumbent, usually the heuristic's best structure.
    pub warm_start: Option<LeagueStructure>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            method: ProofMethod::BranchAndBound,
            node_limit: None,
            time_limit: None,
            jobs: 1,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactResult {
    pub best: ScoredStructure<f64>,
    pub proof: ProofMethod,
    /// Search nodes visited.
    pub nodes: u64,
    /// Complete assignments scored.
    pub leaves: u64,
    pub elapsed: Duration,
}

impl ExactResult {
    pub fn structure(&self) -> &LeagueStructure {
        &self.best.structure
    }

    pub fn objective(&self) -> f64 {
        self.best.total
    }
}

/// Slot permutations that preserve sizes, the game matrix, conference
/// grouping and conference labels.
#[derive(Debug)]
enum Symmetry {
    Group(Vec<Vec<usize>>),
    /// Pairs of slots whose transposition is a symmetry.
    Classes(Vec<usize>),
}

const GROUP_CAP: usize = 40_320;

fn slot_symmetry(template: &StructureTemplate, g: &GameMatrix<f64>) -> Symmetry {
    let sizes = template.slot_sizes();
    let conf = template.slot_conferences();
    let labels: Vec<Option<String>> = conf.iter().map(|&c| template.conferences[c].label.clone()).collect();
    let s = sizes.len();
    let compatible = |a: usize, b: usize| sizes[a] == sizes[b] && labels[a] == labels[b];
    let mut perms = Vec::new();
    let mut perm = vec![usize::MAX; s];
    let mut used = vec![false; s];
    fn extend(
        k: usize,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        perms: &mut Vec<Vec<usize>>,
        g: &GameMatrix<f64>,
        conf: &[usize],
        compatible: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        let s = perm.len();
        if k == s {
            perms.push(perm.clone());
            return perms.len() <= GROUP_CAP;
        }
        for t in 0..s {
            if used[t] || !compatible(k, t) {
                continue;
            }
            let ok = (0..k).all(|a| {
                g.get(k, a) == g.get(t, perm[a])
                    && g.get(a, k) == g.get(perm[a], t)
                    && (conf[a] == conf[k]) == (conf[perm[a]] == conf[t])
            }) && g.get(k, k) == g.get(t, t);
            if !ok {
                continue;
            }
            perm[k] = t;
            used[t] = true;
            let go_on = extend(k + 1, perm, used, perms, g, conf, compatible);
            used[t] = false;
            perm[k] = usize::MAX;
            if !go_on {
                return false;
            }
        }
        true
    }
    if extend(0, &mut perm, &mut used, &mut perms, g, &conf, &compatible) {
        return Symmetry::Group(perms);
    }
    let mut class: Vec<usize> = (0..s).collect();
    for a in 0..s {
        for b in (a + 1)..s {
            if class[b] != b || !compatible(a, b) || conf[a] != conf[b] {
                continue;
            }
            let mut p: Vec<usize> = (0..s).collect();
            p.swap(a, b);
            if g.is_invariant_under(&p) {
                class[b] = class[a];
            }
        }
    }
    Symmetry::Classes(class)
}

impl Symmetry {
    /// For each slot, whether an empty slot is the smallest of its orbit
    /// under the symmetries fixing every nonempty slot.
    fn representatives(&self, nonempty: u64, s: usize) -> Vec<bool> {
        let mut parent: Vec<usize> = (0..s).collect();
        fn find(p: &mut [usize], a: usize) -> usize {
            let mut a = a;
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        let mut union = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        match self {
            Symmetry::Group(perms) => {
                for p in perms {
                    if (0..s).all(|i| nonempty & (1 << i) == 0 || p[i] == i) {
                        for (i, &pi) in p.iter().enumerate() {
                            union(i, pi);
                        }
                    }
                }
            }
            Symmetry::Classes(class) => {
                for i in 0..s {
                    for j in (i + 1)..s {
                        if class[i] == class[j] && nonempty & (1 << i) == 0 && nonempty & (1 << j) == 0 {
                            union(i, j);
                        }
                    }
                }
            }
        }
        (0..s).map(|i| find(&mut parent, i) == i).collect()
    }
}

struct Incumbent {
    total: f64,
    form: CanonicalForm,
    slot_of: Vec<usize>,
}

struct Shared {
    incumbent: Mutex<Option<Incumbent>>,
    best_bits: AtomicU64,
    nodes: AtomicU64,
    leaves: AtomicU64,
    stop: AtomicBool,
    next: AtomicUsize,
}

struct Search<'a> {
    dataset: &'a LeagueDataset,
    template: &'a StructureTemplate,
    g: &'a GameMatrix<f64>,
    d: &'a DistanceMatrix<f64>,
    n: usize,
    s: usize,
    order: Vec<usize>,
    pair_weight: Vec<f64>,
    /// Lower bound on pairs among teams `order[k..]`.
    rest_pairs: Vec<f64>,
    sizes: Vec<usize>,
    slot_conf: Vec<usize>,
    labels: Vec<Option<String>>,
    compiled: CompiledPredicates,
    symmetry: Symmetry,
    use_bound: bool,
    node_limit: Option<u64>,
    deadline: Option<Instant>,
    shared: Shared,
}

#[derive(Clone)]
struct State {
    slot_of: Vec<usize>,
    masks: Vec<u128>,
    fill: Vec<usize>,
    /// `acc[t * s + i]`: cost of every placed pair with `t` if `t` went to `i`.
    acc: Vec<f64>,
    partial: f64,
    placed: u128,
    nonempty: u64,
}

const UNASSIGNED: usize = usize::MAX;

impl<'a> Search<'a> {
    fn root_state(&self) -> State {
        State {
            slot_of: vec![UNASSIGNED; self.n],
            masks: vec![0; self.s],
            fill: vec![0; self.s],
            acc: vec![0.0; self.n * self.s],
            partial: 0.0,
            placed: 0,
            nonempty: 0,
        }
    }

    fn place(&self, st: &mut State, t: usize, slot: usize) {
        st.partial += st.acc[t * self.s + slot];
        st.slot_of[t] = slot;
        st.masks[slot] |= 1 << t;
        st.fill[slot] += 1;
        st.placed |= 1 << t;
        st.nonempty |= 1 << slot;
        for u in 0..self.n {
            if st.slot_of[u] != UNASSIGNED {
                continue;
            }
            let dut = self.d.get(u, t);
            if dut == 0.0 {
                continue;
            }
            for i in 0..self.s {
                st.acc[u * self.s + i] += dut * self.pair_weight[i * self.s + slot];
            }
        }
    }

    fn lower_bound(&self, st: &State, depth: usize) -> f64 {
        let mut lb = st.partial + self.rest_pairs[depth];
        for &u in &self.order[depth..] {
            let mut m = f64::INFINITY;
            for i in 0..self.s {
                if st.fill[i] < self.sizes[i] {
                    m = m.min(st.acc[u * self.s + i]);
                }
            }
            lb += m;
        }
        lb
    }

    fn best(&self) -> f64 {
        f64::from_bits(self.shared.best_bits.load(Ordering::Relaxed))
    }

    /// Candidate slots for the team at `depth`, cheapest first.
    fn children(&self, st: &State, depth: usize, reps: &mut HashMap<u64, Vec<bool>>) -> Vec<usize> {
        let t = self.order[depth];
        let rep = reps
            .entry(st.nonempty)
            .or_insert_with(|| self.symmetry.representatives(st.nonempty, self.s));
        let mut out: Vec<usize> = (0..self.s)
            .filter(|&i| st.fill[i] < self.sizes[i])
            .filter(|&i| st.nonempty & (1 << i) != 0 || rep[i])
            .filter(|&i| {
                let mut masks = st.masks.clone();
                masks[i] |= 1 << t;
                self.compiled.partial_ok(&masks, &self.slot_conf, &self.labels, st.placed | (1 << t))
            })
            .collect();
        out.sort_by(|&a, &b| {
            st.acc[t * self.s + a]
                .partial_cmp(&st.acc[t * self.s + b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        out
    }

    fn count_node(&self, local: &mut u64) -> bool {
        *local += 1;
        if let Some(l) = self.node_limit {
            if self.shared.nodes.load(Ordering::Relaxed) + *local % 1024 > l {
                self.shared.stop.store(true, Ordering::Relaxed);
            }
        }
        if (*local).is_multiple_of(1024) {
            let total = self.shared.nodes.fetch_add(1024, Ordering::Relaxed) + 1024;
            if self.node_limit.is_some_and(|l| total > l) || self.deadline.is_some_and(|d| Instant::now() >= d) {
                self.shared.stop.store(true, Ordering::Relaxed);
            }
        }
        !self.shared.stop.load(Ordering::Relaxed)
    }

    fn offer(&self, st: &State) {
        self.shared.leaves.fetch_add(1, Ordering::Relaxed);
        if self.compiled.first_failure(&st.masks, &self.slot_conf, &self.labels).is_some() {
            return;
        }
        let total: f64 = per_team_distance(&st.slot_of, self.g, self.d).into_iter().sum();
        if total > self.best() {
            return;
        }
        let form = structure_from_slots(&st.slot_of, self.template, &self.dataset.ids(), Provenance::Exact).canonical();
        let mut inc = self.shared.incumbent.lock().expect("incumbent lock");
        let better = match inc.as_ref() {
            None => true,
            Some(b) => total < b.total || (total == b.total && form < b.form),
        };
        if better {
            self.shared.best_bits.store(total.to_bits(), Ordering::Relaxed);
            *inc = Some(Incumbent { total, form, slot_of: st.slot_of.clone() });
        }
    }

    fn prune(&self, st: &State, depth: usize) -> bool {
        if !self.use_bound {
            return false;
        }
        let best = self.best();
        best.is_finite() && self.lower_bound(st, depth) > best + 1e-9 * best.abs()
    }

    fn dfs(&self, st: &mut State, depth: usize, reps: &mut HashMap<u64, Vec<bool>>, local: &mut u64) {
        if !self.count_node(local) {
            return;
        }
        if depth == self.n {
            self.offer(st);
            return;
        }
        if self.prune(st, depth) {
            return;
        }
        let t = self.order[depth];
        for slot in self.children(st, depth, reps) {
            let mut child = st.clone();
            self.place(&mut child, t, slot);
            self.dfs(&mut child, depth + 1, reps, local);
            if self.shared.stop.load(Ordering::Relaxed) {
                return;
            }
        }
    }

    /// Open nodes at the shallowest depth with at least `want` of them.
    fn frontier(&self, want: usize, reps: &mut HashMap<u64, Vec<bool>>) -> Vec<(State, usize)> {
        let mut level = vec![(self.root_state(), 0usize)];
        while level.len() < want {
            let mut next = Vec::new();
            let mut grew = false;
            for (st, depth) in level {
                if depth == self.n {
                    next.push((st, depth));
                    continue;
                }
                grew = true;
                let t = self.order[depth];
                for slot in self.children(&st, depth, reps) {
                    let mut child = st.clone();
                    self.place(&mut child, t, slot);
                    next.push((child, depth + 1));
                }
            }
            level = next;
            if !grew {
                break;
            }
        }
        level
    }
}

/// Branching order: smallest id first, then repeatedly the team farthest in
/// total from those already ordered.
fn branching_order(dataset: &LeagueDataset, d: &DistanceMatrix<f64>) -> Vec<usize> {
    let n = dataset.len();
    let first = (0..n).min_by(|&a, &b| dataset.teams[a].id.cmp(&dataset.teams[b].id)).unwrap_or(0);
    let mut order = vec![first];
    let mut score: Vec<f64> = (0..n).map(|v| d.get(v, first)).collect();
    let mut used = vec![false; n];
    used[first] = true;
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !used[v])
            .max_by(|&a, &b| score[a].partial_cmp(&score[b]).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a)))
            .expect("unordered team left");
        used[next] = true;
        order.push(next);
        for v in 0..n {
            score[v] += d.get(v, next);
        }
    }
    order
}

/// Globally minimal D over every structure that fits `template` and
/// satisfies `predicates`.
pub fn solve_exact(
    dataset: &LeagueDataset,
    template: &StructureTemplate,
    predicates: &[Predicate],
    options: &ExactOptions,
) -> Result<ExactResult> {
    let started = Instant::now();
    check_size(dataset, template)?;
    let n = dataset.len();
    let (use_bound, limit) = match options.method {
        ProofMethod::BranchAndBound => (true, EXACT_TEAM_LIMIT),
        ProofMethod::Exhaustive => (false, EXHAUSTIVE_TEAM_LIMIT),
        ProofMethod::External => {
            return Err(Error::Options("external proofs come from a solver solution file".into()))
        }
    };
    if n > limit {
        return Err(Error::TooLarge { teams: n, limit });
    }
    let g = build_game_matrix::<f64>(template)?;
    let d = distance_matrix::<f64>(dataset);
    let compiled = CompiledPredicates::compile(predicates, dataset)?;
    let s = template.slot_count();
    let mut pair_weight = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..s {
            pair_weight[i * s + j] = g.get(i, j) + g.get(j, i);
        }
    }
    let order = branching_order(dataset, &d);
    let min_pair = g.min_pair_weight();
    let mut rest_pairs = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let add: f64 = order[k + 1..].iter().map(|&b| d.get(order[k], b)).sum();
        rest_pairs[k] = rest_pairs[k + 1] + add * min_pair;
    }
    let search = Search {
        dataset,
        template,
        g: &g,
        d: &d,
        n,
        s,
        order,
        pair_weight,
        rest_pairs,
        sizes: template.slot_sizes(),
        slot_conf: template.slot_conferences(),
        labels: template.conferences.iter().map(|c| c.label.clone()).collect(),
        compiled,
        symmetry: slot_symmetry(template, &g),
        use_bound,
        node_limit: options.node_limit,
        deadline: options.time_limit.map(|t| started + t),
        shared: Shared {
            incumbent: Mutex::new(None),
            best_bits: AtomicU64::new(f64::INFINITY.to_bits()),
            nodes: AtomicU64::new(0),
            leaves: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            next: AtomicUsize::new(0),
        },
    };
    if let Some(ws) = &options.warm_start {
        let slot_of = slots_of(ws, template, &dataset.ids())?;
        let mut st = search.root_state();
        for (t, &slot) in slot_of.iter().enumerate() {
            search.place(&mut st, t, slot);
        }
        search.offer(&st);
        search.shared.leaves.store(0, Ordering::Relaxed);
    }
    let jobs = options.jobs.max(1);
    let mut reps = HashMap::new();
    let frontier = if jobs > 1 { search.frontier(jobs * 8, &mut reps) } else { vec![(search.root_state(), 0)] };
    let run = |reps: &mut HashMap<u64, Vec<bool>>| {
        let mut local = 0u64;
        loop {
            let k = search.shared.next.fetch_add(1, Ordering::Relaxed);
            let Some((st, depth)) = frontier.get(k) else { break };
            let mut st = st.clone();
            search.dfs(&mut st, *depth, reps, &mut local);
            if search.shared.stop.load(Ordering::Relaxed) {
                break;
            }
        }
        search.shared.nodes.fetch_add(local % 1024, Ordering::Relaxed);
    };
    if jobs == 1 {
        run(&mut reps);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| run(&mut HashMap::new()));
            }
        });
    }
    let nodes = search.shared.nodes.load(Ordering::Relaxed);
    let leaves = search.shared.leaves.load(Ordering::Relaxed);
    let incumbent = search.shared.incumbent.into_inner().expect("incumbent lock");
    let scored = |inc: &Incumbent| {
        let structure = structure_from_slots(&inc.slot_of, template, &dataset.ids(), Provenance::Exact);
        let per = per_team_distance(&inc.slot_of, &g, &d);
        ScoredStructure {
            structure,
            total: per.iter().sum(),
            per_team: dataset.ids().into_iter().zip(per).collect(),
        }
    };
    if search.shared.stop.load(Ordering::Relaxed) {
        return Err(Error::BudgetExceeded {
            nodes,
            incumbent: incumbent.as_ref().map(|inc| Box::new(scored(inc))),
        });
    }
    let Some(inc) = incumbent else {
        let names = search.compiled.names().join(", ");
        return Err(Error::Infeasible(if names.is_empty() { "no structure fits the template".into() } else { names }));
    };
    Ok(ExactResult {
        best: scored(&inc),
        proof: options.method,
        nodes,
        leaves,
        elapsed: started.elapsed(),
    })
}

/// Reads an external solver's solution: lines `x_v_i <value>` or
/// `x_v_i = <value>`; other lines are ignored and values of at least 0.5
/// count as set.
pub fn from_external_solution(
    dataset: &LeagueDataset,
    template: &StructureTemplate,
    text: &str,
) -> Result<ExactResult> {
    check_size(dataset, template)?;
    let (n, s) = (dataset.len(), template.slot_count());
    let mut slot_of = vec![UNASSIGNED; n];
    for line in text.lines() {
        let mut parts = line.split(|c: char| c.is_whitespace() || c == '=').filter(|p| !p.is_empty());
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else { continue };
        let Some(rest) = name.strip_prefix("x_") else { continue };
        let Some((v, i)) = rest.split_once('_') else { continue };
        let (Ok(v), Ok(i), Ok(value)) = (v.parse::<usize>(), i.parse::<usize>(), value.parse::<f64>()) else {
            continue;
        };
        if v >= n || i >= s {
            return Err(Error::Parse(format!("variable {name} outside the {n}x{s} model")));
        }
        if value >= 0.5 {
            if slot_of[v] != UNASSIGNED && slot_of[v] != i {
                return Err(Error::Parse(format!("team {v} set in two divisions")));
            }
            slot_of[v] = i;
        }
    }
    if let Some(v) = slot_of.iter().position(|&x| x == UNASSIGNED) {
        return Err(Error::MissingTeam(dataset.teams[v].id.0.clone()));
    }
    let sizes = template.slot_sizes();
    for (i, &size) in sizes.iter().enumerate() {
        let got = slot_of.iter().filter(|&&x| x == i).count();
        if got != size {
            return Err(Error::StructureMismatch(format!("division {i} has {got} teams, expected {size}")));
        }
    }
    let g = build_game_matrix::<f64>(template)?;
    let d = distance_matrix::<f64>(dataset);
    let per = per_team_distance(&slot_of, &g, &d);
    Ok(ExactResult {
        best: ScoredStructure {
            structure: structure_from_slots(&slot_of, template, &dataset.ids(), Provenance::Exact),
            total: per.iter().sum(),
            per_team: dataset.ids().into_iter().zip(per).collect(),
        },
        proof: ProofMethod::External,
        nodes: 0,
        leaves: 0,
        elapsed: Duration::ZERO,
    })
}

/// Heuristic-versus-exact comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub optimal: bool,
    /// Heuristic D minus exact D, in miles.
    pub gap: f64,
    pub heuristic_total: f64,
    pub exact_total: f64,
    pub proof: ProofMethod,
}

fn shape(s: &LeagueStructure) -> Vec<Vec<usize>> {
    let mut confs: Vec<Vec<usize>> = s
        .conferences
        .iter()
        .map(|c| {
            let mut d: Vec<usize> = c.divisions.iter().map(Vec::len).collect();
            d.sort_unstable();
            d
        })
        .collect();
    confs.sort();
    confs
}

/// Compares a heuristic structure with an exact result for the same problem.
pub fn certify(heuristic: &ScoredStructure<f64>, exact: &ExactResult) -> Result<Certificate> {
    let teams_h: Vec<&TeamId> = heuristic.per_team.keys().collect();
    let teams_e: Vec<&TeamId> = exact.best.per_team.keys().collect();
    if teams_h != teams_e {
        return Err(Error::Mismatch("structures cover different teams".into()));
    }
    if shape(&heuristic.structure) != shape(&exact.best.structure) {
        return Err(Error::Mismatch("structures follow different templates".into()));
    }
    let tol = OPTIMALITY_TOLERANCE * exact.best.total.abs().max(1.0);
    let mut gap = heuristic.total - exact.best.total;
    if gap < 0.0 {
        if -gap > tol {
            return Err(Error::Mismatch(format!(
                "heuristic D {} is below the exact optimum {}",
                heuristic.total, exact.best.total
            )));
        }
        gap = 0.0;
    }
    Ok(Certificate {
        optimal: gap <= tol,
        gap,
        heuristic_total: heuristic.total,
        exact_total: exact.best.total,
        proof: exact.proof,
    })
}
