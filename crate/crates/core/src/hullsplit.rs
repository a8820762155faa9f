//! Candidate generation by recursive straight-line cuts.
//!
//! Every hull-disjoint structure can be produced by cutting the league with a
//! line into the two halves of the template's split tree, then cutting each
//! half again, down to single divisions. A cut line is enumerated through
//! every pair of cities in the set being split; points lying on the line are
//! resolved by four symbolic nudges (shift either way, or turn slightly about
//! the anchors' midpoint either way).
//!
//! Sub-results are memoized per (tree node, team set) and kept sorted by
//! their internal weighted distance, so the top level can stream complete
//! structures in roughly ascending order into a bounded heap.

use crate::constraints::{CompiledPredicates, Predicate};
use crate::error::{Error, Result};
use crate::geodesy::{distance_matrix, projection, DistanceMatrix, PlanarPoint};
use crate::geometry::{convex_sets_intersect, hull_points};
use crate::model::{CanonicalForm, Conference, LeagueDataset, LeagueStructure, Provenance, StructureTemplate, TeamId};
use crate::scalar::Scalar;
use crate::surrogate::{build_game_matrix, per_team_distance, GameMatrix, ScoredStructure};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

/// Relative collinearity tolerance, scaled by the point-set diameter.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// A cut line through two projected cities.
#[derive(Clone, Debug, PartialEq)]
pub struct CutLine<T> {
    pub anchors: (TeamId, TeamId),
    /// Unit vector from the first anchor to the second.
    pub direction: PlanarPoint<T>,
    /// In degrees, within `[0, 90]`.
    pub angle_from_horizontal: T,
}

/// How points lying on a cut line are assigned to a side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Nudge {
    /// Move the line off to the right of its direction: on-line points go left.
    ShiftPositive,
    ShiftNegative,
    /// Rotate counter-clockwise about the anchors' midpoint.
    TurnPositive,
    TurnNegative,
}

pub const NUDGES: [Nudge; 4] = [
    Nudge::ShiftPositive,
    Nudge::ShiftNegative,
    Nudge::TurnPositive,
    Nudge::TurnNegative,
];

fn angle_deg<T: Scalar>(u: PlanarPoint<T>) -> T {
    u.y.abs().atan2(u.x.abs()).to_degrees()
}

fn diameter_of<T: Scalar>(points: &[PlanarPoint<T>]) -> T {
    let mut best = T::zero();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.sub(*b).norm());
        }
    }
    best
}

/// One line per unordered pair of distinct locations.
pub fn candidate_lines<T: Scalar>(ids: &[TeamId], points: &[PlanarPoint<T>]) -> Vec<CutLine<T>> {
    let tol = T::of(COLLINEAR_TOLERANCE) * diameter_of(points);
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let v = points[j].sub(points[i]);
            let len = v.norm();
            if len <= tol || len == T::zero() {
                continue;
            }
            let u = PlanarPoint::new(v.x / len, v.y / len);
            out.push(CutLine {
                anchors: (ids[i].clone(), ids[j].clone()),
                direction: u,
                angle_from_horizontal: angle_deg(u),
            });
        }
    }
    out
}

/// Side masks of `members` relative to the line through `a` and `b`, one per nudge.
fn nudged_sides<T: Scalar>(points: &[PlanarPoint<T>], members: u128, a: usize, b: usize, tol: T) -> Option<[u128; 4]> {
    let v = points[b].sub(points[a]);
    let len = v.norm();
    if len <= tol || len == T::zero() {
        return None;
    }
    let u = PlanarPoint::new(v.x / len, v.y / len);
    let mid = PlanarPoint::new((points[a].x + points[b].x) / T::of(2.0), (points[a].y + points[b].y) / T::of(2.0));
    let mut pos = 0u128;
    let mut online_ahead = 0u128;
    let mut online_behind = 0u128;
    let mut online_mid = 0u128;
    for i in bits(members) {
        let c = u.cross(points[i].sub(points[a]));
        if c > tol {
            pos |= 1 << i;
        } else if c >= -tol {
            let t = u.dot(points[i].sub(mid));
            if t > tol {
                online_ahead |= 1 << i;
            } else if t < -tol {
                online_behind |= 1 << i;
            } else {
                online_mid |= 1 << i;
            }
        }
    }
    let online = online_ahead | online_behind | online_mid;
    Some([
        pos | online,
        pos,
        // a small counter-clockwise turn puts points behind the midpoint on the left
        pos | online_behind | online_mid,
        pos | online_ahead,
    ])
}

/// A split kept by [`balanced_splits`].
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedSplit {
    /// Index into the line list.
    pub line: usize,
    pub nudge: Nudge,
    pub left: Vec<TeamId>,
    pub right: Vec<TeamId>,
}

/// Splits of the given points into sides of sizes `target` (in either
/// orientation) produced by the nudged lines, once per line and nudge.
pub fn balanced_splits<T: Scalar>(
    lines: &[CutLine<T>],
    ids: &[TeamId],
    points: &[PlanarPoint<T>],
    target: (usize, usize),
) -> Result<Vec<BalancedSplit>> {
    let n = ids.len();
    if n > 128 {
        return Err(Error::Options("at most 128 points are supported".into()));
    }
    if target.0 + target.1 != n {
        return Err(Error::Options(format!("target {target:?} does not cover {n} points")));
    }
    if target.0 == 0 || target.1 == 0 {
        return Err(Error::Options(format!("degenerate split target {target:?}")));
    }
    let index: HashMap<&TeamId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let tol = T::of(COLLINEAR_TOLERANCE) * diameter_of(points);
    let all = full_mask(n);
    let names = |m: u128| bits(m).map(|i| ids[i].clone()).collect::<Vec<_>>();
    let mut out = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let (Some(&a), Some(&b)) = (index.get(&line.anchors.0), index.get(&line.anchors.1)) else {
            return Err(Error::UnknownTeam(format!("{} or {}", line.anchors.0, line.anchors.1)));
        };
        let Some(sides) = nudged_sides(points, all, a, b, tol) else { continue };
        for (nudge, pos) in NUDGES.iter().zip(sides) {
            let mut seen = HashSet::new();
            let neg = all ^ pos;
            for (l, r) in [(pos, neg), (neg, pos)] {
                if l.count_ones() as usize == target.0 && seen.insert(l) {
                    out.push(BalancedSplit { line: li, nudge: *nudge, left: names(l), right: names(r) });
                }
            }
        }
    }
    Ok(out)
}

/// Drops lines closer to horizontal than `min_angle_deg`.
pub fn orientation_filter<T: Scalar>(lines: &[CutLine<T>], min_angle_deg: T) -> Vec<usize> {
    (0..lines.len())
        .filter(|&i| lines[i].angle_from_horizontal >= min_angle_deg)
        .collect()
}

fn full_mask(n: usize) -> u128 {
    if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerateOptions {
    /// Top-level cuts closer to horizontal than this are skipped; 0 disables.
    pub filter_angle_deg: f64,
    /// Size of the retained top set.
    pub top_k: usize,
    /// Keep every candidate instead of a bounded top set.
    pub keep_all: bool,
    pub predicates: Vec<Predicate>,
    /// Worker threads for the top-level combination pass.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            filter_angle_deg: 30.0,
            top_k: 10_000,
            keep_all: false,
            predicates: Vec::new(),
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GenerationStats {
    /// Candidate lines at the top level.
    pub lines_considered: usize,
    /// Top-level lines whose perpendicular shift in some direction yields
    /// the target side sizes.
    pub lines_balanced: usize,
    /// Balanced top-level lines surviving the orientation filter.
    pub lines_kept: usize,
    /// Top-level lines, after the filter, reaching the target only by a
    /// slight rotation (the two anchors end up on opposite sides).
    pub turn_only_lines: usize,
    /// Distinct top-level splits after the filter.
    pub top_splits: usize,
    /// Distinct kept splits over all tree nodes.
    pub splits_kept: usize,
    /// Complete structures implied by every kept (line, nudge, orientation)
    /// choice before any deduplication.
    pub raw_candidates: u64,
    /// Complete structures rescored exactly.
    pub scored: u64,
    pub duplicates_removed: u64,
    pub rejected_by: BTreeMap<String, u64>,
}

impl GenerationStats {
    pub fn add_rejections(&mut self, predicate: &str, count: u64) {
        *self.rejected_by.entry(predicate.to_string()).or_default() += count;
    }
}

/// Distinct structures sorted by weighted distance, ties by canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet<T> {
    pub entries: Vec<ScoredStructure<T>>,
    pub stats: GenerationStats,
}

impl<T: Scalar> CandidateSet<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&ScoredStructure<T>> {
        self.entries.first()
    }
}

/// The first `k` entries.
pub fn rank<T: Scalar>(set: &CandidateSet<T>, top_k: usize) -> Vec<ScoredStructure<T>> {
    set.entries.iter().take(top_k).cloned().collect()
}

#[derive(Clone, Copy, Debug)]
enum NodeKind {
    Leaf(usize),
    Split { left: usize, right: usize, interchangeable: bool },
}

#[derive(Clone, Debug)]
struct TreeNode {
    /// First slot and slot count.
    slot_start: usize,
    slot_len: usize,
    size: usize,
    kind: NodeKind,
}

struct SplitTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl SplitTree {
    fn build<T: Scalar>(template: &StructureTemplate, g: &GameMatrix<T>) -> SplitTree {
        let sizes = template.slot_sizes();
        let mut offsets = Vec::new();
        let mut acc = 0;
        for c in &template.conferences {
            offsets.push(acc);
            acc += c.groups().len();
        }
        let mut tree = SplitTree { nodes: Vec::new(), root: 0 };
        let k = template.conferences.len();
        tree.root = tree.conferences(template, &offsets, &sizes, g, 0, k);
        tree
    }

    fn push(&mut self, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn join<T: Scalar>(&mut self, template: &StructureTemplate, g: &GameMatrix<T>, left: usize, right: usize) -> usize {
        let (l, r) = (&self.nodes[left], &self.nodes[right]);
        let interchangeable = interchangeable(template, g, l, r);
        let node = TreeNode {
            slot_start: l.slot_start,
            slot_len: l.slot_len + r.slot_len,
            size: l.size + r.size,
            kind: NodeKind::Split { left, right, interchangeable },
        };
        self.push(node)
    }

    fn conferences<T: Scalar>(
        &mut self,
        template: &StructureTemplate,
        offsets: &[usize],
        sizes: &[usize],
        g: &GameMatrix<T>,
        lo: usize,
        hi: usize,
    ) -> usize {
        if hi - lo == 1 {
            let groups = template.conferences[lo].groups().len();
            return self.divisions(template, sizes, g, offsets[lo], offsets[lo] + groups);
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let l = self.conferences(template, offsets, sizes, g, lo, mid);
        let r = self.conferences(template, offsets, sizes, g, mid, hi);
        self.join(template, g, l, r)
    }

    fn divisions<T: Scalar>(&mut self, template: &StructureTemplate, sizes: &[usize], g: &GameMatrix<T>, lo: usize, hi: usize) -> usize {
        if hi - lo == 1 {
            return self.push(TreeNode {
                slot_start: lo,
                slot_len: 1,
                size: sizes[lo],
                kind: NodeKind::Leaf(lo),
            });
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let l = self.divisions(template, sizes, g, lo, mid);
        let r = self.divisions(template, sizes, g, mid, hi);
        self.join(template, g, l, r)
    }
}

/// Whether swapping the two children slot-for-slot leaves the game matrix,
/// the division sizes and the conference labels unchanged.
fn interchangeable<T: Scalar>(template: &StructureTemplate, g: &GameMatrix<T>, l: &TreeNode, r: &TreeNode) -> bool {
    if l.slot_len != r.slot_len || l.size != r.size {
        return false;
    }
    let sizes = template.slot_sizes();
    let confs = template.slot_conferences();
    let mut perm: Vec<usize> = (0..g.size()).collect();
    for k in 0..l.slot_len {
        let (a, b) = (l.slot_start + k, r.slot_start + k);
        if sizes[a] != sizes[b] {
            return false;
        }
        let (la, lb) = (&template.conferences[confs[a]].label, &template.conferences[confs[b]].label);
        if la != lb {
            return false;
        }
        perm[a] = b;
        perm[b] = a;
    }
    for i in 0..l.slot_len {
        for j in 0..l.slot_len {
            let same_l = confs[l.slot_start + i] == confs[l.slot_start + j];
            let same_r = confs[r.slot_start + i] == confs[r.slot_start + j];
            if same_l != same_r {
                return false;
            }
        }
    }
    g.is_invariant_under(&perm)
}

/// Groups slots that share a conference and a size and whose transposition
/// leaves the game matrix unchanged.
fn slot_classes<T: Scalar>(template: &StructureTemplate, g: &GameMatrix<T>) -> Vec<usize> {
    let sizes = template.slot_sizes();
    let confs = template.slot_conferences();
    let s = sizes.len();
    let mut class: Vec<usize> = (0..s).collect();
    for a in 0..s {
        for b in (a + 1)..s {
            if class[b] != b || sizes[a] != sizes[b] || confs[a] != confs[b] {
                continue;
            }
            let mut perm: Vec<usize> = (0..s).collect();
            perm.swap(a, b);
            if g.is_invariant_under(&perm) {
                class[b] = class[a];
            }
        }
    }
    class
}

/// Sorts the masks of each symmetry class into ascending order in place.
fn canonicalize_within_classes(masks: &mut [u128], classes: &[usize]) {
    for (k, &c) in classes.iter().enumerate() {
        if classes[..k].contains(&c) {
            continue;
        }
        let idx: Vec<usize> = (k..classes.len()).filter(|&j| classes[j] == c).collect();
        if idx.len() < 2 {
            continue;
        }
        let mut vals: Vec<u128> = idx.iter().map(|&j| masks[j]).collect();
        vals.sort_unstable();
        for (&j, v) in idx.iter().zip(vals) {
            masks[j] = v;
        }
    }
}

/// Assignments of a node's team set to its slots.
struct Arrangement<T> {
    score: T,
    masks: Box<[u128]>,
}

struct NodeList<T> {
    items: Vec<Arrangement<T>>,
    raw: u64,
}

fn cmp_scalar<T: Scalar>(a: T, b: T) -> Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}

struct Generator<'a, T> {
    tree: &'a SplitTree,
    g: &'a GameMatrix<T>,
    d: &'a DistanceMatrix<T>,
    points: &'a [PlanarPoint<T>],
    tol: T,
    memo: HashMap<(usize, u128), Arc<NodeList<T>>>,
    /// Symmetry class of every slot: slots in one class can be permuted
    /// without changing any score.
    slot_class: Vec<usize>,
    splits_kept: usize,
    duplicates: u64,
}

/// Distinct splits of a set with their (line, nudge, orientation) multiplicity.
struct SplitSet {
    splits: BTreeMap<u128, u64>,
    lines_considered: usize,
    lines_balanced: usize,
    lines_kept: usize,
    turn_only_lines: usize,
}

impl<'a, T: Scalar> Generator<'a, T> {
    fn pair_sum(&self, mask: u128) -> T {
        let mut s = T::zero();
        for i in bits(mask) {
            let row = self.d.row(i);
            for j in bits(mask & !((2u128 << i) - 1)) {
                s = s + row[j];
            }
        }
        s
    }

    fn cross_sum(&self, a: u128, b: u128) -> T {
        let mut s = T::zero();
        for i in bits(a) {
            let row = self.d.row(i);
            for j in bits(b) {
                s = s + row[j];
            }
        }
        s
    }

    /// Combined weight `G[l][r] + G[r][l]` if it is the same for every slot pair
    /// across the two children, else `None`.
    fn constant_block(&self, l: &TreeNode, r: &TreeNode) -> (Option<T>, T) {
        let mut first = None;
        let mut constant = true;
        let mut min = T::infinity();
        for a in l.slot_start..l.slot_start + l.slot_len {
            for b in r.slot_start..r.slot_start + r.slot_len {
                let w = self.g.get(a, b) + self.g.get(b, a);
                min = min.min(w);
                match first {
                    None => first = Some(w),
                    Some(f) if f != w => constant = false,
                    _ => {}
                }
            }
        }
        (if constant { first } else { None }, min)
    }

    fn block_cross(&self, l: &TreeNode, r: &TreeNode, lm: &[u128], rm: &[u128]) -> T {
        let mut s = T::zero();
        for (ka, &ma) in lm.iter().enumerate() {
            for (kb, &mb) in rm.iter().enumerate() {
                let (a, b) = (l.slot_start + ka, r.slot_start + kb);
                let w = self.g.get(a, b) + self.g.get(b, a);
                if w != T::zero() {
                    s = s + w * self.cross_sum(ma, mb);
                }
            }
        }
        s
    }

    fn splits(&self, mask: u128, left_size: usize, right_size: usize, interchangeable: bool, min_angle: Option<T>) -> SplitSet {
        let members: Vec<usize> = bits(mask).collect();
        let lowest = mask & mask.wrapping_neg();
        let mut out = SplitSet {
            splits: BTreeMap::new(),
            lines_considered: 0,
            lines_balanced: 0,
            lines_kept: 0,
            turn_only_lines: 0,
        };
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                let Some(sides) = nudged_sides(self.points, mask, a, b, self.tol) else { continue };
                out.lines_considered += 1;
                let mut hits: Vec<u128> = Vec::new();
                let mut shifted = false;
                for (k, pos) in sides.into_iter().enumerate() {
                    let neg = mask ^ pos;
                    for l in [pos, neg] {
                        if l.count_ones() as usize == left_size && (mask ^ l).count_ones() as usize == right_size {
                            // for interchangeable children keep the side holding the lowest team
                            let l = if interchangeable && l & lowest == 0 { mask ^ l } else { l };
                            hits.push(l);
                            shifted |= k < 2;
                        }
                    }
                }
                if hits.is_empty() {
                    continue;
                }
                out.lines_balanced += usize::from(shifted);
                if let Some(min) = min_angle {
                    let u = self.points[b].sub(self.points[a]);
                    if angle_deg(u) < min {
                        continue;
                    }
                }
                if shifted {
                    out.lines_kept += 1;
                } else {
                    out.turn_only_lines += 1;
                }
                for l in hits {
                    *out.splits.entry(l).or_default() += 1;
                }
            }
        }
        out
    }

    fn arrangements(&mut self, node: usize, mask: u128) -> Arc<NodeList<T>> {
        if let Some(hit) = self.memo.get(&(node, mask)) {
            return hit.clone();
        }
        let tn = self.tree.nodes[node].clone();
        let list = match tn.kind {
            NodeKind::Leaf(slot) => NodeList {
                items: vec![Arrangement {
                    score: self.g.get(slot, slot) * T::of(2.0) * self.pair_sum(mask),
                    masks: vec![mask].into_boxed_slice(),
                }],
                raw: 1,
            },
            NodeKind::Split { left, right, interchangeable } => {
                let (ln, rn) = (self.tree.nodes[left].clone(), self.tree.nodes[right].clone());
                let set = self.splits(mask, ln.size, rn.size, interchangeable, None);
                self.splits_kept += set.splits.len();
                let (constant, _) = self.constant_block(&ln, &rn);
                let mut items = Vec::new();
                let mut raw = 0u64;
                for (&a, &mult) in &set.splits {
                    let b = mask ^ a;
                    let la = self.arrangements(left, a);
                    let lb = self.arrangements(right, b);
                    raw = raw.saturating_add(mult.saturating_mul(la.raw).saturating_mul(lb.raw));
                    let cross = constant.map(|w| w * self.cross_sum(a, b));
                    for x in &la.items {
                        for y in &lb.items {
                            let c = match cross {
                                Some(c) => c,
                                None => self.block_cross(&ln, &rn, &x.masks, &y.masks),
                            };
                            let masks: Box<[u128]> = x.masks.iter().chain(y.masks.iter()).copied().collect();
                            items.push(Arrangement { score: x.score + y.score + c, masks });
                        }
                    }
                }
                for it in &mut items {
                    canonicalize_within_classes(&mut it.masks, &self.slot_class[tn.slot_start..tn.slot_start + tn.slot_len]);
                }
                items.sort_by(|p, q| cmp_scalar(p.score, q.score).then_with(|| p.masks.cmp(&q.masks)));
                let mut seen = HashSet::with_capacity(items.len());
                let before = items.len();
                items.retain(|it| seen.insert(it.masks.clone()));
                self.duplicates += (before - items.len()) as u64;
                NodeList { items, raw }
            }
        };
        let list = Arc::new(list);
        self.memo.insert((node, mask), list.clone());
        list
    }
}

/// A top-level split ready for streaming.
struct RootWork<T> {
    left: Arc<NodeList<T>>,
    right: Arc<NodeList<T>>,
    /// Exact cross term when constant, else a lower bound.
    cross: T,
    constant: bool,
}

struct HeapItem<T> {
    d: T,
    form: CanonicalForm,
    masks: Box<[u128]>,
}

impl<T: Scalar> PartialEq for HeapItem<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for HeapItem<T> {}
impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for HeapItem<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        cmp_scalar(self.d, o.d).then_with(|| self.form.cmp(&o.form))
    }
}

/// Everything the streaming pass needs, shared read-only across workers.
struct Context<'a, T> {
    dataset: &'a LeagueDataset,
    template: &'a StructureTemplate,
    g: &'a GameMatrix<T>,
    d: &'a DistanceMatrix<T>,
    slot_conf: Vec<usize>,
    labels: Vec<Option<String>>,
    compiled: CompiledPredicates,
    right_start: usize,
    right_len: usize,
    left_node: TreeNode,
    right_node: TreeNode,
}

impl<'a, T: Scalar> Context<'a, T> {
    fn canonical(&self, masks: &[u128]) -> CanonicalForm {
        self.structure(masks).canonical()
    }

    fn structure(&self, masks: &[u128]) -> LeagueStructure {
        let mut conferences: Vec<Conference> = self
            .template
            .conferences
            .iter()
            .map(|c| Conference { label: c.label.clone(), divisions: Vec::new() })
            .collect();
        for (slot, &m) in masks.iter().enumerate() {
            conferences[self.slot_conf[slot]]
                .divisions
                .push(bits(m).map(|i| self.dataset.teams[i].id.clone()).collect());
        }
        LeagueStructure { conferences, provenance: Provenance::Heuristic }
    }

    fn slot_of(&self, masks: &[u128]) -> Vec<usize> {
        let mut slot_of = vec![0; self.d.len()];
        for (slot, &m) in masks.iter().enumerate() {
            for i in bits(m) {
                slot_of[i] = slot;
            }
        }
        slot_of
    }

    fn exact_total(&self, masks: &[u128]) -> T {
        per_team_distance(&self.slot_of(masks), self.g, self.d).into_iter().sum()
    }
}

struct Stream<T> {
    heap: BinaryHeap<HeapItem<T>>,
    members: HashSet<CanonicalForm>,
    capacity: Option<usize>,
    scored: u64,
    duplicates: u64,
    rejected: Vec<u64>,
}

impl<T: Scalar> Stream<T> {
    fn new(capacity: Option<usize>, predicates: usize) -> Self {
        Stream {
            heap: BinaryHeap::new(),
            members: HashSet::new(),
            capacity,
            scored: 0,
            duplicates: 0,
            rejected: vec![0; predicates],
        }
    }

    fn threshold(&self) -> Option<T> {
        match self.capacity {
            Some(k) if self.heap.len() >= k => self.heap.peek().map(|h| h.d),
            _ => None,
        }
    }

    fn offer(&mut self, ctx: &Context<'_, T>, d: T, masks: &[u128]) {
        if let Some(k) = self.capacity {
            if k == 0 {
                return;
            }
            if self.heap.len() >= k {
                let worst = self.heap.peek().expect("full heap");
                if cmp_scalar(d, worst.d) == Ordering::Greater {
                    return;
                }
            }
        }
        let item = HeapItem { d, form: ctx.canonical(masks), masks: masks.into() };
        if let Some(k) = self.capacity {
            if self.heap.len() >= k && item >= *self.heap.peek().expect("full heap") {
                return;
            }
        }
        if self.members.contains(&item.form) {
            self.duplicates += 1;
            return;
        }
        self.members.insert(item.form.clone());
        self.heap.push(item);
        if let Some(k) = self.capacity {
            if self.heap.len() > k {
                let out = self.heap.pop().expect("non-empty heap");
                self.members.remove(&out.form);
            }
        }
    }

    fn run(&mut self, ctx: &Context<'_, T>, work: &RootWork<T>) {
        let mut buf = vec![0u128; ctx.slot_conf.len()];
        let Some(first_right) = work.right.items.first() else { return };
        for x in &work.left.items {
            let slack = |t: T| t + t.abs() * T::of(1e-9);
            if let Some(t) = self.threshold() {
                if x.score + first_right.score + work.cross > slack(t) {
                    break;
                }
            }
            for y in &work.right.items {
                let approx = x.score + y.score + work.cross;
                if let Some(t) = self.threshold() {
                    if approx > slack(t) {
                        break;
                    }
                }
                buf[..x.masks.len()].copy_from_slice(&x.masks);
                buf[ctx.right_start..ctx.right_start + ctx.right_len].copy_from_slice(&y.masks);
                if let Some(k) = ctx.compiled.first_failure(&buf, &ctx.slot_conf, &ctx.labels) {
                    self.rejected[k] += 1;
                    continue;
                }
                if !work.constant {
                    let full = x.score + y.score + block_cross_ctx(ctx, &x.masks, &y.masks);
                    if let Some(t) = self.threshold() {
                        if full > slack(t) {
                            continue;
                        }
                    }
                }
                self.scored += 1;
                let d = ctx.exact_total(&buf);
                self.offer(ctx, d, &buf);
            }
        }
    }
}

fn block_cross_ctx<T: Scalar>(ctx: &Context<'_, T>, lm: &[u128], rm: &[u128]) -> T {
    let mut s = T::zero();
    for (ka, &ma) in lm.iter().enumerate() {
        for (kb, &mb) in rm.iter().enumerate() {
            let (a, b) = (ctx.left_node.slot_start + ka, ctx.right_node.slot_start + kb);
            let w = ctx.g.get(a, b) + ctx.g.get(b, a);
            if w == T::zero() {
                continue;
            }
            for i in bits(ma) {
                let row = ctx.d.row(i);
                for j in bits(mb) {
                    s = s + w * row[j];
                }
            }
        }
    }
    s
}

/// Generates candidates with great-circle distances and the template's game matrix.
pub fn generate<T: Scalar>(
    dataset: &LeagueDataset,
    template: &StructureTemplate,
    options: &GenerateOptions,
) -> Result<CandidateSet<T>> {
    let g = build_game_matrix::<T>(template)?;
    let d = distance_matrix::<T>(dataset);
    generate_with(dataset, template, &g, &d, options)
}

/// Generates candidates with an explicit game matrix and distance matrix.
pub fn generate_with<T: Scalar>(
    dataset: &LeagueDataset,
    template: &StructureTemplate,
    g: &GameMatrix<T>,
    d: &DistanceMatrix<T>,
    options: &GenerateOptions,
) -> Result<CandidateSet<T>> {
    let n = dataset.len();
    if n != template.team_count() {
        return Err(Error::StructureMismatch(format!(
            "dataset has {n} teams but the template holds {}",
            template.team_count()
        )));
    }
    if n > 128 {
        return Err(Error::Options("at most 128 teams are supported".into()));
    }
    if d.len() != n || d.ids() != dataset.ids().as_slice() {
        return Err(Error::Mismatch("distance matrix does not follow dataset order".into()));
    }
    if g.template() != template {
        return Err(Error::Mismatch("game matrix built for a different template".into()));
    }
    if !options.filter_angle_deg.is_finite() || !(0.0..=90.0).contains(&options.filter_angle_deg) {
        return Err(Error::Options(format!("filter angle {} outside [0, 90]", options.filter_angle_deg)));
    }
    let compiled = CompiledPredicates::compile(&options.predicates, dataset)?;
    let proj = projection::<T>(dataset);
    let tree = SplitTree::build(template, g);
    let mut generator = Generator {
        tree: &tree,
        g,
        d,
        points: &proj.points,
        tol: T::of(COLLINEAR_TOLERANCE) * proj.diameter(),
        memo: HashMap::new(),
        slot_class: slot_classes(template, g),
        splits_kept: 0,
        duplicates: 0,
    };
    let all = full_mask(n);
    let slot_conf = template.slot_conferences();
    let labels: Vec<Option<String>> = template.conferences.iter().map(|c| c.label.clone()).collect();
    let mut stats = GenerationStats::default();

    let root = tree.nodes[tree.root].clone();
    let NodeKind::Split { left, right, interchangeable } = root.kind else {
        // a single undivided group: the only structure is everyone together
        let masks = [all];
        stats.raw_candidates = 1;
        let mut entries = Vec::new();
        match compiled.first_failure(&masks, &slot_conf, &labels) {
            Some(k) => stats.add_rejections(&compiled.names()[k], 1),
            None => {
                let mut conferences: Vec<Conference> = template
                    .conferences
                    .iter()
                    .map(|c| Conference { label: c.label.clone(), divisions: Vec::new() })
                    .collect();
                conferences[0].divisions.push(dataset.ids());
                let s = LeagueStructure { conferences, provenance: Provenance::Heuristic };
                entries.push(score_entry(s, &vec![0; n], g, d));
            }
        }
        return Ok(CandidateSet { entries, stats });
    };
    let (ln, rn) = (tree.nodes[left].clone(), tree.nodes[right].clone());
    let min_angle = (options.filter_angle_deg > 0.0).then(|| T::of(options.filter_angle_deg));
    let top = generator.splits(all, ln.size, rn.size, interchangeable, min_angle);
    stats.lines_considered = top.lines_considered;
    stats.lines_balanced = top.lines_balanced;
    stats.lines_kept = top.lines_kept;
    stats.turn_only_lines = top.turn_only_lines;
    stats.top_splits = top.splits.len();
    let (constant, min_w) = generator.constant_block(&ln, &rn);
    let mut work = Vec::with_capacity(top.splits.len());
    let mut raw = 0u64;
    for (&a, &mult) in &top.splits {
        let b = all ^ a;
        let la = generator.arrangements(left, a);
        let lb = generator.arrangements(right, b);
        raw = raw.saturating_add(mult.saturating_mul(la.raw).saturating_mul(lb.raw));
        let cs = generator.cross_sum(a, b);
        work.push(RootWork {
            left: la,
            right: lb,
            cross: constant.unwrap_or(min_w) * cs,
            constant: constant.is_some(),
        });
    }
    stats.raw_candidates = raw;
    stats.splits_kept = generator.splits_kept + top.splits.len();
    stats.duplicates_removed = generator.duplicates;
    drop(generator);

    let ctx = Context {
        dataset,
        template,
        g,
        d,
        slot_conf: slot_conf.clone(),
        labels,
        compiled,
        right_start: rn.slot_start,
        right_len: rn.slot_len,
        left_node: ln,
        right_node: rn,
    };
    let capacity = (!options.keep_all).then_some(options.top_k);
    let jobs = options.jobs.max(1).min(work.len().max(1));
    let streams: Vec<Stream<T>> = if jobs == 1 {
        let mut s = Stream::new(capacity, ctx.compiled.len());
        for w in &work {
            s.run(&ctx, w);
        }
        vec![s]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|j| {
                    let (ctx, work) = (&ctx, &work);
                    scope.spawn(move || {
                        let mut s = Stream::new(capacity, ctx.compiled.len());
                        for w in work.iter().skip(j).step_by(jobs) {
                            s.run(ctx, w);
                        }
                        s
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };

    let mut items: Vec<HeapItem<T>> = Vec::new();
    let mut rejected = vec![0u64; ctx.compiled.len()];
    for s in streams {
        stats.scored += s.scored;
        stats.duplicates_removed += s.duplicates;
        for (r, k) in rejected.iter_mut().zip(&s.rejected) {
            *r += k;
        }
        items.extend(s.heap.into_vec());
    }
    items.sort();
    let before = items.len();
    items.dedup_by(|a, b| a.form == b.form);
    stats.duplicates_removed += (before - items.len()) as u64;
    if let Some(k) = capacity {
        items.truncate(k);
    }
    for (name, r) in ctx.compiled.names().iter().zip(rejected) {
        stats.add_rejections(name, r);
    }
    let entries = items
        .into_iter()
        .map(|it| score_entry(ctx.structure(&it.masks), &ctx.slot_of(&it.masks), g, d))
        .collect();
    Ok(CandidateSet { entries, stats })
}

fn score_entry<T: Scalar>(structure: LeagueStructure, slot_of: &[usize], g: &GameMatrix<T>, d: &DistanceMatrix<T>) -> ScoredStructure<T> {
    let per = per_team_distance(slot_of, g, d);
    ScoredStructure {
        structure,
        total: per.iter().copied().sum(),
        per_team: d.ids().iter().cloned().zip(per).collect(),
    }
}

/// Whether all division hulls of `structure` are pairwise disjoint in the
/// dataset's projection.
pub fn division_hulls_disjoint(structure: &LeagueStructure, dataset: &LeagueDataset) -> Result<bool> {
    let proj = projection::<f64>(dataset);
    let mut hulls = Vec::new();
    for div in structure.divisions() {
        let members = div
            .iter()
            .map(|id| dataset.index_of(id).ok_or_else(|| Error::UnknownTeam(id.0.clone())))
            .collect::<Result<Vec<_>>>()?;
        hulls.push(hull_points(&proj.points, &members));
    }
    for i in 0..hulls.len() {
        for j in (i + 1)..hulls.len() {
            if convex_sets_intersect(&hulls[i], &hulls[j]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
