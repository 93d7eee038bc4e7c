//! Object parsing: candidate proposal, joint part assignment per pose, and the
//! top-down parse graph through layers 5-9.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aog::model::{Aog, Part, PartKind, PartTemplate, Pose};
use crate::aog::scoring::{score_and, score_deformation, score_terminal, ChildEval, SAME_REGION};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{BoxRect, Region};

pub const SCALE_LADDER: [f64; 3] = [0.75, 1.0, 1.33];

/// Annotated part boxes of one object by part name; `None` marks an invisible part.
pub type PartLabels = BTreeMap<String, Option<BoxRect>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Candidates kept per part.
    pub budget: usize,
    /// Largest joint assignment count searched exhaustively.
    pub enumeration_limit: u64,
    pub restarts: usize,
    pub seed: u64,
    /// Search parts at their nominal scale only instead of the whole ladder.
    #[serde(default)]
    pub nominal_scale_only: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            budget: 8,
            enumeration_limit: 1_000_000,
            restarts: 10,
            seed: 0x5eed,
            nominal_scale_only: false,
        }
    }
}

impl InferenceConfig {
    /// Scale factors searched per part.
    pub fn ladder(&self) -> &'static [f64] {
        if self.nominal_scale_only {
            &[1.0]
        } else {
            &SCALE_LADDER
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub region: Region,
    /// Layer-4 score: best layer-5 child at this region.
    pub score: f64,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub parts: Vec<Vec<Candidate>>,
}

/// One option per part: `Some(candidate index)` or `None` for invisible.
pub type Assignment = Vec<Option<usize>>;

fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| {
        a.region
            .order_key()
            .partial_cmp(&b.region.order_key())
            .unwrap_or(Ordering::Equal)
    })
}

/// Every placement of a part on the stride-1 grid over the scale ladder, whose
/// center falls inside `search` when given.
pub fn placements(
    scale: f64,
    aspect: f64,
    width: usize,
    height: usize,
    search: Option<&BoxRect>,
) -> Vec<Region> {
    placements_on(&SCALE_LADDER, scale, aspect, width, height, search)
}

/// [`placements`] over the given scale factors.
pub fn placements_on(
    ladder: &[f64],
    scale: f64,
    aspect: f64,
    width: usize,
    height: usize,
    search: Option<&BoxRect>,
) -> Vec<Region> {
    let mut out = Vec::new();
    for &f in ladder {
        let w = scale * f;
        let h = w * aspect;
        let nx = (width as f64 - w + 1e-9).floor();
        let ny = (height as f64 - h + 1e-9).floor();
        if nx < 0.0 || ny < 0.0 {
            continue;
        }
        for y0 in 0..=ny as usize {
            for x0 in 0..=nx as usize {
                let r = Region {
                    cx: x0 as f64 + 0.5 * w,
                    cy: y0 as f64 + 0.5 * h,
                    scale: w,
                    aspect,
                };
                if search.is_none_or(|s| s.contains_point(r.cx, r.cy)) {
                    out.push(r);
                }
            }
        }
    }
    out
}

pub fn score_part_at(
    part: &Part,
    grid: &FeatureGrid,
    region: &Region,
    buf: &mut Vec<f64>,
) -> Result<(usize, f64)> {
    grid.pooled_into(&region.bbox(), buf);
    part.best_child(buf)
}

fn propose_in(
    grid: &FeatureGrid,
    pose: &Pose,
    budget: usize,
    search: Option<&BoxRect>,
    labels: Option<&PartLabels>,
    ladder: &[f64],
) -> Result<CandidateSet> {
    if grid.is_empty() {
        return Err(Error::Empty("scene grid"));
    }
    if budget == 0 {
        return Err(Error::Config("candidate budget must be at least 1".into()));
    }
    let mut buf = Vec::new();
    let mut parts = Vec::with_capacity(pose.parts.len());
    for part in &pose.parts {
        // a labeled part keeps its annotation as the only candidate (none when invisible)
        if let Some(label) = labels.and_then(|l| l.get(&part.name)) {
            let mut cands = Vec::new();
            if let Some(b) = label {
                let region = Region::from_box(b)?;
                let (child, score) = score_part_at(part, grid, &region, &mut buf)?;
                cands.push(Candidate {
                    region,
                    score,
                    child,
                });
            }
            parts.push(cands);
            continue;
        }
        let mut cands = Vec::new();
        for region in placements_on(
            ladder,
            part.scale,
            part.aspect,
            grid.width(),
            grid.height(),
            search,
        ) {
            let (child, score) = score_part_at(part, grid, &region, &mut buf)?;
            cands.push(Candidate {
                region,
                score,
                child,
            });
        }
        cands.sort_by(candidate_order);
        cands.truncate(budget);
        parts.push(cands);
    }
    Ok(CandidateSet { parts })
}

/// Top-`budget` placements per part ranked by the part's appearance score.
pub fn propose_candidates(grid: &FeatureGrid, pose: &Pose, budget: usize) -> Result<CandidateSet> {
    propose_in(grid, pose, budget, None, None, &SCALE_LADDER)
}

/// Pose score of a complete assignment, through the model's AND scoring.
pub fn score_assignment(
    pose: &Pose,
    cands: &CandidateSet,
    assignment: &[Option<usize>],
) -> Result<f64> {
    let evals: Vec<ChildEval> = assignment
        .iter()
        .enumerate()
        .map(|(i, o)| match o {
            Some(c) => {
                let cand = &cands.parts[i][*c];
                ChildEval::detected(cand.score, cand.region)
            }
            None => ChildEval::undetected(pose.parts[i].invisible_penalty),
        })
        .collect();
    score_and(&pose.and, &evals)
}

/// Unary and pairwise tables over options `0..k` (candidates) and `k` (invisible).
struct Tables {
    unary: Vec<Vec<f64>>,
    /// `pair[(i, j)]` as a dense `(k_i + 1) x (k_j + 1)` table, for `i < j`.
    pairs: Vec<(usize, usize, Vec<f64>)>,
    /// Pair indices touching each part.
    touching: Vec<Vec<usize>>,
}

impl Tables {
    fn new(pose: &Pose, cands: &CandidateSet) -> Tables {
        let n = pose.parts.len();
        let unary: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut u: Vec<f64> = cands.parts[i].iter().map(|c| c.score).collect();
                u.push(pose.parts[i].invisible_penalty);
                u
            })
            .collect();
        let mut pairs = Vec::new();
        let mut touching = vec![Vec::new(); n];
        for p in &pose.and.pairs {
            let (i, j) = if p.a < p.b { (p.a, p.b) } else { (p.b, p.a) };
            let (ki, kj) = (cands.parts[i].len(), cands.parts[j].len());
            let mut t = vec![0.0; (ki + 1) * (kj + 1)];
            for oi in 0..=ki {
                for oj in 0..=kj {
                    let ri = cands.parts[i].get(oi).map(|c| c.region);
                    let rj = cands.parts[j].get(oj).map(|c| c.region);
                    // geometry is measured from pair.a to pair.b
                    let (ra, rb) = if p.a == i { (ri, rj) } else { (rj, ri) };
                    let d = score_deformation(
                        &p.mean_geometry,
                        pose.and.undetected_penalty,
                        ra.as_ref(),
                        rb.as_ref(),
                    );
                    t[oi * (kj + 1) + oj] = if d == SAME_REGION {
                        f64::NEG_INFINITY
                    } else {
                        p.weight * d
                    };
                }
            }
            touching[i].push(pairs.len());
            touching[j].push(pairs.len());
            pairs.push((i, j, t));
        }
        Tables {
            unary,
            pairs,
            touching,
        }
    }

    fn pair_value(&self, p: usize, opts: &[usize]) -> f64 {
        let (i, j, ref t) = self.pairs[p];
        let kj = self.unary[j].len();
        t[opts[i] * kj + opts[j]]
    }

    fn total(&self, opts: &[usize]) -> f64 {
        let u: f64 = opts
            .iter()
            .enumerate()
            .map(|(i, &o)| self.unary[i][o])
            .sum();
        u + (0..self.pairs.len())
            .map(|p| self.pair_value(p, opts))
            .sum::<f64>()
    }

    /// Contribution of part `i` taking option `o`, holding the others fixed.
    fn local(&self, i: usize, opts: &mut [usize], o: usize) -> f64 {
        let old = opts[i];
        opts[i] = o;
        let v = self.unary[i][o]
            + self.touching[i]
                .iter()
                .map(|&p| self.pair_value(p, opts))
                .sum::<f64>();
        opts[i] = old;
        v
    }
}

fn to_assignment(tables: &Tables, opts: &[usize]) -> Assignment {
    opts.iter()
        .enumerate()
        .map(|(i, &o)| {
            if o + 1 == tables.unary[i].len() {
                None
            } else {
                Some(o)
            }
        })
        .collect()
}

fn exhaustive(tables: &Tables) -> Vec<usize> {
    let n = tables.unary.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut opts = vec![0usize; n];
    // pairs are evaluated once both endpoints are fixed, i.e. at the later part
    let closing: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            tables.touching[i]
                .iter()
                .copied()
                .filter(|&p| tables.pairs[p].1 == i)
                .collect()
        })
        .collect();
    fn rec(
        t: &Tables,
        closing: &[Vec<usize>],
        i: usize,
        acc: f64,
        opts: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if i == opts.len() {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                *best = Some((acc, opts.clone()));
            }
            return;
        }
        for o in 0..t.unary[i].len() {
            opts[i] = o;
            let mut v = acc + t.unary[i][o];
            for &p in &closing[i] {
                v += t.pair_value(p, opts);
            }
            if v == f64::NEG_INFINITY {
                continue;
            }
            rec(t, closing, i + 1, v, opts, best);
        }
    }
    rec(tables, &closing, 0, 0.0, &mut opts, &mut best);
    best.map(|(_, o)| o)
        .unwrap_or_else(|| tables.unary.iter().map(|u| u.len() - 1).collect())
}

fn coordinate_ascent(tables: &Tables, restarts: usize, seed: u64) -> Vec<usize> {
    let n = tables.unary.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in 0..restarts.max(1) {
        let mut opts: Vec<usize> = if start == 0 {
            tables.unary.iter().map(|u| u.len() - 1).collect()
        } else {
            tables
                .unary
                .iter()
                .map(|u| rng.random_range(0..u.len()))
                .collect()
        };
        loop {
            let mut changed = false;
            for i in 0..n {
                let o0 = opts[i];
                let mut cur = tables.local(i, &mut opts, o0);
                for o in 0..tables.unary[i].len() {
                    let v = tables.local(i, &mut opts, o);
                    if v > cur {
                        cur = v;
                        opts[i] = o;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let total = tables.total(&opts);
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, opts));
        }
    }
    best.expect("at least one start").1
}

/// Joint choice of one candidate (or invisible) per part maximizing the pose score.
pub fn optimize_pose_assignment(pose: &Pose, cands: &CandidateSet) -> Result<(Assignment, f64)> {
    optimize_pose_assignment_with(pose, cands, &InferenceConfig::default())
}

pub fn optimize_pose_assignment_with(
    pose: &Pose,
    cands: &CandidateSet,
    cfg: &InferenceConfig,
) -> Result<(Assignment, f64)> {
    if cands.parts.len() != pose.parts.len() {
        return Err(Error::DimensionMismatch {
            expected: pose.parts.len(),
            got: cands.parts.len(),
        });
    }
    let tables = Tables::new(pose, cands);
    let joint = tables
        .unary
        .iter()
        .try_fold(1u64, |acc, u| acc.checked_mul(u.len() as u64))
        .unwrap_or(u64::MAX);
    let opts = if joint <= cfg.enumeration_limit {
        exhaustive(&tables)
    } else {
        coordinate_ascent(&tables, cfg.restarts, cfg.seed)
    };
    let assignment = to_assignment(&tables, &opts);
    let score = score_assignment(pose, cands, &assignment)?;
    if score == f64::NEG_INFINITY {
        return Err(Error::Infeasible);
    }
    Ok((assignment, score))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafParse {
    pub terminal: usize,
    pub bbox: BoxRect,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfParse {
    pub alternative: usize,
    pub bbox: BoxRect,
    pub score: f64,
    pub leaves: [LeafParse; 2],
}

/// Layers 6-9 beneath an activated layer-5 node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateParse {
    pub score: f64,
    pub halves: [HalfParse; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartParse {
    pub name: String,
    pub kind: PartKind,
    /// `None` when the invisible child is activated.
    pub region: Option<Region>,
    pub child: Option<usize>,
    pub score: f64,
    pub template: Option<TemplateParse>,
}

impl PartParse {
    pub fn bbox(&self) -> Option<BoxRect> {
        self.region.map(|r| r.bbox())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseGraph {
    pub category: usize,
    pub pose: usize,
    /// Pose score `S(PO)`, which is also the root score.
    pub score: f64,
    pub parts: Vec<PartParse>,
}

impl ParseGraph {
    pub fn part(&self, name: &str) -> Option<&PartParse> {
        self.parts.iter().find(|p| p.name == name)
    }

    /// Union of the visible part boxes.
    pub fn object_box(&self) -> Option<BoxRect> {
        self.parts
            .iter()
            .filter_map(|p| p.bbox())
            .reduce(|a, b| a.union_box(&b))
    }
}

fn best_terminal(leaves: &[Vec<f64>], grid: &FeatureGrid, b: &BoxRect) -> Result<LeafParse> {
    let x = grid.pooled(b);
    let mut best: Option<LeafParse> = None;
    for (t, template) in leaves.iter().enumerate() {
        let s = score_terminal(template, &x)?;
        if best.as_ref().is_none_or(|l| s > l.score) {
            best = Some(LeafParse {
                terminal: t,
                bbox: *b,
                score: s,
            });
        }
    }
    best.ok_or(Error::Empty("layer-8 node without terminals"))
}

/// Local refinement of layers 6-9 inside a fixed part box.
pub fn parse_template(
    template: &PartTemplate,
    grid: &FeatureGrid,
    part_box: &BoxRect,
) -> Result<TemplateParse> {
    let mut halves = Vec::with_capacity(2);
    for (h, rel) in template.halves.iter().zip(&template.layout) {
        let hb = rel.place(part_box);
        let mut best: Option<HalfParse> = None;
        for (a, alt) in h.alternatives.iter().enumerate() {
            let l0 = best_terminal(&alt.leaves[0], grid, &alt.layout[0].place(&hb))?;
            let l1 = best_terminal(&alt.leaves[1], grid, &alt.layout[1].place(&hb))?;
            let s = score_and(
                &alt.and,
                &[
                    ChildEval::undetected(l0.score),
                    ChildEval::undetected(l1.score),
                ],
            )?;
            if best.as_ref().is_none_or(|b| s > b.score) {
                best = Some(HalfParse {
                    alternative: a,
                    bbox: hb,
                    score: s,
                    leaves: [l0, l1],
                });
            }
        }
        halves.push(best.ok_or(Error::Empty("layer-6 node without alternatives"))?);
    }
    let [h0, h1]: [HalfParse; 2] = halves.try_into().expect("two halves");
    let score = score_and(
        &template.and,
        &[
            ChildEval::undetected(h0.score),
            ChildEval::undetected(h1.score),
        ],
    )?;
    Ok(TemplateParse {
        score,
        halves: [h0, h1],
    })
}

fn check_dims(aog: &Aog, grid: &FeatureGrid) -> Result<()> {
    if aog.feature_dim != grid.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: aog.feature_dim,
            got: grid.feature_dim(),
        });
    }
    Ok(())
}

/// Best parse of a single pose, restricted to part centers inside `search` when given.
pub fn parse_pose(
    aog: &Aog,
    pose_id: usize,
    grid: &FeatureGrid,
    search: Option<&BoxRect>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    check_dims(aog, grid)?;
    parse_pose_model(aog.pose(pose_id)?, pose_id, grid, search, cfg)
}

/// [`parse_pose`] for a pose that is not (yet) part of a graph; `pose_id` is
/// only recorded in the result.
pub fn parse_pose_model(
    pose: &Pose,
    pose_id: usize,
    grid: &FeatureGrid,
    search: Option<&BoxRect>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    parse_pose_labeled(pose, pose_id, grid, search, None, cfg)
}

/// [`parse_pose_model`] with the parts named in `labels` held at their annotations.
pub fn parse_pose_labeled(
    pose: &Pose,
    pose_id: usize,
    grid: &FeatureGrid,
    search: Option<&BoxRect>,
    labels: Option<&PartLabels>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    let cands = propose_in(grid, pose, cfg.budget, search, labels, cfg.ladder())?;
    let (assignment, score) = optimize_pose_assignment_with(pose, &cands, cfg)?;
    let mut parts = Vec::with_capacity(pose.parts.len());
    for (i, part) in pose.parts.iter().enumerate() {
        let pp = match assignment[i] {
            None => PartParse {
                name: part.name.clone(),
                kind: part.kind,
                region: None,
                child: None,
                score: part.invisible_penalty,
                template: None,
            },
            Some(c) => {
                let cand = cands.parts[i][c];
                let template = match &part.children[cand.child].template {
                    Some(t) => Some(parse_template(t, grid, &cand.region.bbox())?),
                    None => None,
                };
                PartParse {
                    name: part.name.clone(),
                    kind: part.kind,
                    region: Some(cand.region),
                    child: Some(cand.child),
                    score: cand.score,
                    template,
                }
            }
        };
        parts.push(pp);
    }
    Ok(ParseGraph {
        category: pose.category,
        pose: pose_id,
        score,
        parts,
    })
}

/// Best parse over the given poses; ties keep the lowest pose index.
pub fn parse_among(
    aog: &Aog,
    poses: &[usize],
    grid: &FeatureGrid,
    search: Option<&BoxRect>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    let mut best: Option<ParseGraph> = None;
    for &p in poses {
        let pg = parse_pose(aog, p, grid, search, cfg)?;
        if best.as_ref().is_none_or(|b| pg.score > b.score) {
            best = Some(pg);
        }
    }
    best.ok_or(Error::Empty("no poses to parse"))
}

/// Best parse over every pose of the graph.
pub fn parse(aog: &Aog, grid: &FeatureGrid, search: Option<&BoxRect>) -> Result<ParseGraph> {
    parse_with(aog, grid, search, &InferenceConfig::default())
}

pub fn parse_with(
    aog: &Aog,
    grid: &FeatureGrid,
    search: Option<&BoxRect>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    check_dims(aog, grid)?;
    let all: Vec<usize> = (0..aog.poses.len()).collect();
    parse_among(aog, &all, grid, search, cfg)
}

/// The detection window `[c_x - w, c_x + w] x [c_y - h, c_y + h]` around a box.
pub fn detection_window(gt_box: &BoxRect) -> BoxRect {
    let (cx, cy) = gt_box.center();
    let (w, h) = (gt_box.width(), gt_box.height());
    BoxRect::new(cx - w, cy - h, cx + w, cy + h)
}

/// Single best object whose parts are centered in the window around `gt_box`.
pub fn detect_best_object(aog: &Aog, grid: &FeatureGrid, gt_box: &BoxRect) -> Result<ParseGraph> {
    detect_best_object_with(aog, grid, gt_box, None, &InferenceConfig::default())
}

/// As [`detect_best_object`], optionally restricted to a subset of poses.
pub fn detect_best_object_with(
    aog: &Aog,
    grid: &FeatureGrid,
    gt_box: &BoxRect,
    poses: Option<&[usize]>,
    cfg: &InferenceConfig,
) -> Result<ParseGraph> {
    if !gt_box.is_valid() {
        return Err(Error::DegenerateBox);
    }
    let window = detection_window(gt_box);
    if window.intersection_area(&grid.bounds()) <= 0.0 {
        return Err(Error::RegionOutsideScene);
    }
    check_dims(aog, grid)?;
    match poses {
        Some(p) => parse_among(aog, p, grid, Some(&window), cfg),
        None => {
            let all: Vec<usize> = (0..aog.poses.len()).collect();
            parse_among(aog, &all, grid, Some(&window), cfg)
        }
    }
}
