//! Pose structure mining: a greedy hill-climb over latent parts, their layer-5
//! children and the mean appearance and geometry, scored by
//! `J = mean S_I(PO) - lambda * Complexity_new`.

use serde::{Deserialize, Serialize};

use crate::aog::model::{Part, PartKind, Patch, PatchAppearance, Pose};
use crate::aog::scoring::{calibrate_normalization, Affine, NeighborPair};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{iou, pairwise_geometry, BoxRect, Geometry, Region};
use crate::inference::{
    detection_window, parse_pose_labeled, placements, InferenceConfig, ParseGraph, PartLabels,
};

use super::calibration::{background_pair_weight, calibrate_part, patch_norm, raw_patch_score};
use super::negatives::NEGATIVE_MAX_IOU;
use super::penalties::{pair_weight, percentile, PoseObservations};
use super::template::kmeans;

/// Pair weight used until a pair has been observed [`MIN_PAIR_SAMPLES`] times.
pub const DEFAULT_PAIR_WEIGHT: f64 = -10.0;
pub const MIN_PAIR_SAMPLES: usize = 3;
/// Accepted moves must raise J by more than this.
const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Complexity weight.
    pub lambda: f64,
    /// Weight of the layer-5 child count inside the complexity.
    pub beta: f64,
    pub max_latent_parts: usize,
    /// Accepted moves per run.
    pub move_budget: usize,
    /// Layer-5 children per latent part.
    pub max_children: usize,
    /// Seeds fully evaluated per add-part move.
    pub seeds_per_move: usize,
    /// Height/width ratio of mined parts.
    pub latent_aspect: f64,
    /// Background grids sampled per seed to standardize its response.
    pub seed_background: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            lambda: 0.1,
            beta: 0.5,
            max_latent_parts: 3,
            move_budget: 12,
            max_children: 3,
            seeds_per_move: 3,
            latent_aspect: 1.0,
            seed_background: 2,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("lambda and beta must be non-negative".into()));
        }
        if self.max_children == 0 || self.latent_aspect <= 0.0 {
            return Err(Error::Config(
                "mined parts need a child and a positive aspect".into(),
            ));
        }
        Ok(())
    }
}

/// `(|Ch(PO)| + beta * sum_P |Ch(P)|) / |Ch(PO)|`, counting layer-5 children.
pub fn complexity_new(pose: &Pose, beta: f64) -> Result<f64> {
    if pose.parts.is_empty() {
        return Err(Error::Empty("pose without parts"));
    }
    let n = pose.parts.len() as f64;
    let children: usize = pose.parts.iter().map(|p| p.children.len()).sum();
    Ok((n + beta * children as f64) / n)
}

/// Copy of `pose` with every semantic part (and its pairs) removed.
pub fn build_dummy_pose(pose: &Pose) -> Result<Pose> {
    if pose.latent_count() == 0 {
        return Err(Error::Empty("dummy pose needs a latent part"));
    }
    let mut d = pose.clone();
    d.name = format!("{}-latent", pose.name);
    while let Some(i) = d.parts.iter().position(|p| p.is_semantic()) {
        d.remove_part(i);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum MiningMove {
    AddLatent { name: String },
    DeleteLatent { part: usize },
    AddChild { part: usize },
    RemoveChild { part: usize, child: usize },
    ReestimateAppearance,
    ReestimateGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningRun {
    pub pose: Pose,
    /// J before the first move and after every accepted move.
    pub objective: Vec<f64>,
    pub moves: Vec<MiningMove>,
}

/// Scenes of the pool plus background grids for calibrating new appearance.
#[derive(Debug, Clone, Copy)]
pub struct MiningData<'a> {
    pub scenes: &'a [&'a FeatureGrid],
    /// Annotations aligned with `scenes`; missing entries are unlabeled.
    pub labels: &'a [Option<&'a PartLabels>],
    pub background: &'a [FeatureGrid],
    pub inference: InferenceConfig,
}

/// Best parses of the pool scenes under `pose`, with annotated parts held at
/// their labels (`labels[i]` belongs to `scenes[i]`).
pub fn parse_pool(
    pose: &Pose,
    scenes: &[&FeatureGrid],
    labels: &[Option<&PartLabels>],
    cfg: &InferenceConfig,
) -> Result<Vec<ParseGraph>> {
    scenes
        .iter()
        .enumerate()
        .map(|(i, g)| parse_pose_labeled(pose, 0, g, None, labels.get(i).copied().flatten(), cfg))
        .collect()
}

/// Mining objective of `pose` on the pool, with the pose norm as given.
pub fn mining_objective(pose: &Pose, parses: &[ParseGraph], cfg: &MiningConfig) -> Result<f64> {
    if parses.is_empty() {
        return Err(Error::Empty("mining pool"));
    }
    let mean = parses.iter().map(|p| p.score).sum::<f64>() / parses.len() as f64;
    Ok(mean - cfg.lambda * complexity_new(pose, cfg.beta)?)
}

/// Detected-part scores and pair residuals of a pose over its parses.
pub fn observe(pose: &Pose, parses: &[ParseGraph]) -> PoseObservations {
    let mut obs = PoseObservations::new(pose);
    for pg in parses {
        let seen: Vec<Option<(f64, Region)>> = pg
            .parts
            .iter()
            .map(|p| p.region.map(|r| (p.score, r)))
            .collect();
        obs.add(pose, &seen);
    }
    obs
}

/// Invisible-child score while observing detected-case statistics.
const FORCE_VISIBLE: f64 = -1e6;

/// [`parse_pool`] where every unlabeled part must be detected, so the parses
/// do not depend on the invisibility penalties currently in place.
pub fn parse_detected(
    pose: &Pose,
    scenes: &[&FeatureGrid],
    labels: &[Option<&PartLabels>],
    cfg: &InferenceConfig,
) -> Result<Vec<ParseGraph>> {
    let mut forced = pose.clone();
    for p in forced.parts.iter_mut() {
        p.invisible_penalty = FORCE_VISIBLE;
    }
    parse_pool(&forced, scenes, labels, cfg)
}

/// Parses with every pair weight at zero, each searched in the detection window
/// around the object of the matching `anchors` parse. Part placements then
/// follow appearance alone, so residuals measured on them are not pulled toward
/// the mean geometry.
pub fn parse_appearance_only(
    pose: &Pose,
    scenes: &[&FeatureGrid],
    labels: &[Option<&PartLabels>],
    anchors: &[ParseGraph],
    cfg: &InferenceConfig,
) -> Result<Vec<ParseGraph>> {
    let mut flat = pose.clone();
    for p in flat.parts.iter_mut() {
        p.invisible_penalty = FORCE_VISIBLE;
    }
    for pair in flat.and.pairs.iter_mut() {
        pair.weight = 0.0;
    }
    scenes
        .iter()
        .zip(anchors)
        .enumerate()
        .map(|(i, (g, anchor))| {
            let window = anchor.object_box().map(|b| detection_window(&b));
            parse_pose_labeled(
                &flat,
                0,
                g,
                window.as_ref(),
                labels.get(i).copied().flatten(),
                cfg,
            )
        })
        .collect()
}

/// [`pair_weight`], or [`DEFAULT_PAIR_WEIGHT`] with fewer than [`MIN_PAIR_SAMPLES`] residuals.
pub fn pair_weight_or_default(residuals: &[f64]) -> f64 {
    if residuals.len() < MIN_PAIR_SAMPLES {
        DEFAULT_PAIR_WEIGHT
    } else {
        pair_weight(residuals).unwrap_or(DEFAULT_PAIR_WEIGHT)
    }
}

fn mean_vec(xs: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; xs[0].len()];
    for x in xs {
        for (a, v) in m.iter_mut().zip(x) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= xs.len() as f64);
    m
}

fn mean_geometry(gs: &[Geometry]) -> Geometry {
    let mut m = [0.0; 4];
    for g in gs {
        for k in 0..4 {
            m[k] += g[k];
        }
    }
    m.map(|v| v / gs.len() as f64)
}

/// Features at the regions where latent part `i` was detected with child `c`
/// (any child when `c` is `None`).
fn part_features(
    scenes: &[&FeatureGrid],
    parses: &[ParseGraph],
    i: usize,
    c: Option<usize>,
) -> Vec<Vec<f64>> {
    scenes
        .iter()
        .zip(parses)
        .filter_map(|(g, pg)| {
            let p = &pg.parts[i];
            match (p.region, p.child) {
                (Some(r), Some(ch)) if c.is_none_or(|c| c == ch) => Some(g.pooled(&r.bbox())),
                _ => None,
            }
        })
        .collect()
}

fn latent_patch(mean: Vec<f64>) -> Patch {
    Patch {
        appearance: PatchAppearance::Latent { mean },
        norm: Affine { w: -1.0, b: 0.0 },
        template: None,
    }
}

/// Box around the visible parts of a parse, grown by `margin` and clipped.
fn object_area(pg: &ParseGraph, margin: f64, bounds: &BoxRect) -> BoxRect {
    match pg.object_box() {
        Some(b) => BoxRect::new(
            (b.x0 - margin).max(bounds.x0),
            (b.y0 - margin).max(bounds.y0),
            (b.x1 + margin).min(bounds.x1),
            (b.y1 + margin).min(bounds.y1),
        ),
        None => *bounds,
    }
}

struct Seed {
    region: Region,
    freq: f64,
    hits: Vec<Option<Region>>,
    responses: Vec<f64>,
}

fn standardized_patch(
    patch: &Patch,
    part: &Part,
    background: &[FeatureGrid],
) -> Result<Option<Affine>> {
    let mut raw = Vec::new();
    let mut buf = Vec::new();
    for g in background {
        for r in placements(part.scale, part.aspect, g.width(), g.height(), None)
            .into_iter()
            .step_by(3)
        {
            g.pooled_into(&r.bbox(), &mut buf);
            raw.push(raw_patch_score(patch, &buf)?);
        }
    }
    match calibrate_normalization(&raw) {
        Ok(a) => Ok(Some(patch_norm(patch, a))),
        Err(Error::ZeroVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Candidate latent parts seeded from the first pool scene, ranked by their
/// mean standardized best response over the pool.
fn seed_parts(
    pose: &Pose,
    parses: &[ParseGraph],
    data: &MiningData<'_>,
    cfg: &MiningConfig,
) -> Result<Vec<Pose>> {
    if pose.latent_count() >= cfg.max_latent_parts || data.scenes.is_empty() {
        return Ok(Vec::new());
    }
    let scale = pose.parts.iter().map(|p| p.scale).sum::<f64>() / pose.parts.len() as f64;
    let anchor = data.scenes[0];
    let areas: Vec<BoxRect> = data
        .scenes
        .iter()
        .zip(parses)
        .map(|(g, pg)| object_area(pg, scale, &g.bounds()))
        .collect();
    let taken: Vec<BoxRect> = parses[0].parts.iter().filter_map(|p| p.bbox()).collect();
    let template = Part {
        kind: PartKind::Latent,
        name: String::new(),
        aspect: cfg.latent_aspect,
        scale,
        invisible_penalty: 0.0,
        children: Vec::new(),
    };
    let at_scale = |g: &FeatureGrid, area: &BoxRect| -> Vec<Region> {
        placements(scale, cfg.latent_aspect, g.width(), g.height(), Some(area))
            .into_iter()
            .filter(|r| (r.scale - scale).abs() < 1e-9)
            .collect()
    };
    let bg = &data.background[..cfg.seed_background.min(data.background.len())];
    let mut seeds = Vec::new();
    let mut buf = Vec::new();
    for region in at_scale(anchor, &areas[0]) {
        let b = region.bbox();
        let mut clear = true;
        for t in &taken {
            if iou(&b, t)? >= NEGATIVE_MAX_IOU {
                clear = false;
                break;
            }
        }
        if !clear {
            continue;
        }
        let patch = latent_patch(anchor.pooled(&b));
        let Some(norm) = standardized_patch(&patch, &template, bg)? else {
            continue;
        };
        let mut hits = Vec::with_capacity(data.scenes.len());
        let mut responses = Vec::with_capacity(data.scenes.len());
        for (g, area) in data.scenes.iter().zip(&areas) {
            let mut best: Option<(f64, Region)> = None;
            for r in at_scale(g, area) {
                g.pooled_into(&r.bbox(), &mut buf);
                let s = norm.apply(-raw_patch_score(&patch, &buf)?);
                if best.is_none_or(|(bs, _)| s > bs) {
                    best = Some((s, r));
                }
            }
            responses.push(best.map_or(f64::NEG_INFINITY, |b| b.0));
            hits.push(best.map(|b| b.1));
        }
        let freq = responses.iter().sum::<f64>() / responses.len() as f64;
        if freq.is_finite() {
            seeds.push(Seed {
                region,
                freq,
                hits,
                responses,
            });
        }
    }
    seeds.sort_by(|a, b| {
        b.freq.total_cmp(&a.freq).then_with(|| {
            a.region
                .order_key()
                .partial_cmp(&b.region.order_key())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut out = Vec::new();
    let name = (0..)
        .map(|k| format!("latent-{k}"))
        .find(|n| pose.part_index(n).is_none())
        .expect("unbounded names");
    for seed in seeds.into_iter().take(cfg.seeds_per_move) {
        let anchor_response = seed.responses[0];
        let keep: Vec<usize> = (0..seed.hits.len())
            .filter(|&s| seed.hits[s].is_some() && seed.responses[s] >= 0.5 * anchor_response)
            .collect();
        let feats: Vec<Vec<f64>> = keep
            .iter()
            .map(|&s| data.scenes[s].pooled(&seed.hits[s].expect("kept").bbox()))
            .collect();
        let mut part = template.clone();
        part.name = name.clone();
        part.children = vec![latent_patch(mean_vec(&feats))];
        calibrate_part(&mut part, data.background)?;
        let kept_responses: Vec<f64> = keep.iter().map(|&s| seed.responses[s]).collect();
        part.invisible_penalty = percentile(&kept_responses, 0.1)?;
        let mut p = pose.clone();
        let new = p.parts.len();
        for j in 0..pose.parts.len() {
            let mut gs = Vec::new();
            for &s in &keep {
                if let (Some(a), Some(b)) = (seed.hits[s], parses[s].parts[j].region) {
                    if let Ok(g) = pairwise_geometry(&b, &a) {
                        gs.push(g);
                    }
                }
            }
            if gs.is_empty() {
                continue;
            }
            p.and.pairs.push(NeighborPair {
                a: j,
                b: new,
                weight: 0.0,
                mean_geometry: mean_geometry(&gs),
            });
        }
        if p.and.pairs.len() - pose.and.pairs.len() != pose.parts.len() {
            // some existing part never co-occurs with the seed
            continue;
        }
        p.parts.push(part);
        for k in pose.and.pairs.len()..p.and.pairs.len() {
            p.and.pairs[k].weight = background_pair_weight(&p, k, anchor.width(), anchor.height())?;
        }
        out.push(p);
    }
    Ok(out)
}

fn add_child(
    pose: &Pose,
    i: usize,
    parses: &[ParseGraph],
    data: &MiningData<'_>,
) -> Result<Option<Pose>> {
    let feats = part_features(data.scenes, parses, i, None);
    let k = pose.parts[i].children.len() + 1;
    if feats.len() < 2 * k {
        return Ok(None);
    }
    let labels = kmeans(&feats, k);
    let mut children = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<Vec<f64>> = feats
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == c)
            .map(|(x, _)| x.clone())
            .collect();
        if members.len() < 2 {
            return Ok(None);
        }
        children.push(latent_patch(mean_vec(&members)));
    }
    let mut p = pose.clone();
    p.parts[i].children = children;
    match calibrate_part(&mut p.parts[i], data.background) {
        Ok(()) => Ok(Some(p)),
        Err(Error::ZeroVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

fn reestimate_appearance(
    pose: &Pose,
    parses: &[ParseGraph],
    data: &MiningData<'_>,
) -> Result<Option<Pose>> {
    let mut p = pose.clone();
    let mut changed = false;
    for i in 0..p.parts.len() {
        if p.parts[i].kind != PartKind::Latent {
            continue;
        }
        for c in 0..p.parts[i].children.len() {
            let feats = part_features(data.scenes, parses, i, Some(c));
            if feats.is_empty() {
                continue;
            }
            p.parts[i].children[c] = latent_patch(mean_vec(&feats));
            changed = true;
        }
        match calibrate_part(&mut p.parts[i], data.background) {
            Ok(()) => {}
            Err(Error::ZeroVariance) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(changed.then_some(p))
}

/// Mean pair geometry over the parses. When at least [`MIN_PAIR_SAMPLES`]
/// parses are `labeled`, only those count: their annotated boxes fix the part
/// scales that appearance alone leaves ambiguous.
pub fn reestimate_geometry(pose: &Pose, parses: &[ParseGraph], labeled: &[bool]) -> Option<Pose> {
    let mut p = pose.clone();
    let mut changed = false;
    let n_labeled = parses.iter().zip(labeled).filter(|(_, &l)| l).count();
    let used: Vec<&ParseGraph> = if n_labeled >= MIN_PAIR_SAMPLES {
        parses
            .iter()
            .zip(labeled)
            .filter(|(_, &l)| l)
            .map(|(pg, _)| pg)
            .collect()
    } else {
        parses.iter().collect()
    };
    for pair in p.and.pairs.iter_mut() {
        let gs: Vec<Geometry> = used
            .iter()
            .filter_map(
                |pg| match (pg.parts[pair.a].region, pg.parts[pair.b].region) {
                    (Some(a), Some(b)) => pairwise_geometry(&a, &b).ok(),
                    _ => None,
                },
            )
            .collect();
        if !gs.is_empty() {
            pair.mean_geometry = mean_geometry(&gs);
            changed = true;
        }
    }
    changed.then_some(p)
}

fn candidate_moves(
    pose: &Pose,
    parses: &[ParseGraph],
    data: &MiningData<'_>,
    cfg: &MiningConfig,
) -> Result<Vec<(MiningMove, Pose)>> {
    let mut out = Vec::new();
    for p in seed_parts(pose, parses, data, cfg)? {
        let name = p.parts.last().expect("seeded part").name.clone();
        out.push((MiningMove::AddLatent { name }, p));
    }
    for i in 0..pose.parts.len() {
        if pose.parts[i].kind != PartKind::Latent {
            continue;
        }
        if pose.parts.len() > 1 {
            let mut p = pose.clone();
            p.remove_part(i);
            out.push((MiningMove::DeleteLatent { part: i }, p));
        }
        if pose.parts[i].children.len() < cfg.max_children {
            if let Some(p) = add_child(pose, i, parses, data)? {
                out.push((MiningMove::AddChild { part: i }, p));
            }
        }
        if pose.parts[i].children.len() > 1 {
            for c in 0..pose.parts[i].children.len() {
                let mut p = pose.clone();
                p.parts[i].children.remove(c);
                out.push((MiningMove::RemoveChild { part: i, child: c }, p));
            }
        }
    }
    if let Some(p) = reestimate_appearance(pose, parses, data)? {
        out.push((MiningMove::ReestimateAppearance, p));
    }
    let labeled: Vec<bool> = (0..parses.len())
        .map(|i| data.labels.get(i).is_some_and(|l| l.is_some()))
        .collect();
    if let Some(p) = reestimate_geometry(pose, parses, &labeled) {
        out.push((MiningMove::ReestimateGeometry, p));
    }
    Ok(out)
}

/// Greedy steepest-ascent hill-climb on J. Every candidate move is scored by
/// re-parsing the pool; the best one is accepted while it raises J. The pose
/// norm is held at identity during the run and restored afterwards.
pub fn mine_pose_structure(
    initial: &Pose,
    data: &MiningData<'_>,
    cfg: &MiningConfig,
) -> Result<MiningRun> {
    cfg.validate()?;
    if data.scenes.is_empty() {
        return Err(Error::Empty("mining pool"));
    }
    let norm = initial.and.norm;
    let mut pose = initial.clone();
    pose.and.norm = Affine::IDENTITY;
    let mut parses = parse_pool(&pose, data.scenes, data.labels, &data.inference)?;
    let mut j = mining_objective(&pose, &parses, cfg)?;
    let mut objective = vec![j];
    let mut moves = Vec::new();
    for _ in 0..cfg.move_budget {
        let mut best: Option<(f64, MiningMove, Pose, Vec<ParseGraph>)> = None;
        for (mv, cand) in candidate_moves(&pose, &parses, data, cfg)? {
            let ps = parse_pool(&cand, data.scenes, data.labels, &data.inference)?;
            let cj = mining_objective(&cand, &ps, cfg)?;
            if best.as_ref().is_none_or(|b| cj > b.0) {
                best = Some((cj, mv, cand, ps));
            }
        }
        match best {
            Some((cj, mv, cand, ps)) if cj > j + MIN_GAIN => {
                assert!(cj >= j, "mining objective decreased");
                j = cj;
                pose = cand;
                parses = ps;
                objective.push(j);
                moves.push(mv);
            }
            _ => break,
        }
    }
    pose.and.norm = norm;
    Ok(MiningRun {
        pose,
        objective,
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::scoring::AndParams;

    fn part(kind: PartKind, name: &str, children: usize) -> Part {
        let patch = match kind {
            PartKind::Latent => latent_patch(vec![0.0; 2]),
            PartKind::Semantic => Patch {
                appearance: PatchAppearance::Semantic {
                    classifier: crate::aog::model::LinearClassifier {
                        weights: vec![1.0, 0.0],
                        bias: 0.0,
                    },
                },
                norm: Affine::IDENTITY,
                template: None,
            },
        };
        Part {
            kind,
            name: name.into(),
            aspect: 1.0,
            scale: 4.0,
            invisible_penalty: 0.0,
            children: vec![patch; children],
        }
    }

    fn pose(parts: Vec<Part>) -> Pose {
        let mut and = AndParams::new(1.0);
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                and.pairs.push(NeighborPair {
                    a,
                    b,
                    weight: -1.0,
                    mean_geometry: [0.0; 4],
                });
            }
        }
        Pose {
            name: "p".into(),
            category: 0,
            parts,
            and,
        }
    }

    #[test]
    fn complexity_examples() {
        let four = pose(
            (0..4)
                .map(|i| part(PartKind::Latent, &format!("l{i}"), 2))
                .collect(),
        );
        assert!((complexity_new(&four, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(complexity_new(&four, 0.0).unwrap(), 1.0);
        let one = pose(vec![part(PartKind::Latent, "l", 3)]);
        assert!((complexity_new(&one, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!(complexity_new(&pose(vec![]), 0.5).is_err());
    }

    #[test]
    fn dummy_pose_keeps_only_latent_parts() {
        let mut parts: Vec<Part> = (0..3)
            .map(|i| part(PartKind::Latent, &format!("l{i}"), 1))
            .collect();
        parts.insert(1, part(PartKind::Semantic, "head", 1));
        parts.push(part(PartKind::Semantic, "tail", 1));
        let p = pose(parts);
        let d = build_dummy_pose(&p).unwrap();
        assert_eq!(d.parts.len(), 3);
        assert!(d.parts.iter().all(|q| q.kind == PartKind::Latent));
        assert_eq!(d.and.pairs.len(), 3);
        assert!(crate::aog::validate(&{
            let mut a = crate::aog::Aog::new(2);
            a.add_category("c");
            a.add_pose(d.clone());
            a.to_graph()
        })
        .is_empty());

        let latent_only = pose(
            (0..2)
                .map(|i| part(PartKind::Latent, &format!("l{i}"), 1))
                .collect(),
        );
        let same = build_dummy_pose(&latent_only).unwrap();
        assert_eq!(same.parts, latent_only.parts);
        assert_eq!(same.and, latent_only.and);
        assert!(build_dummy_pose(&pose(vec![part(PartKind::Semantic, "head", 1)])).is_err());
    }

    #[test]
    fn negative_lambda_is_rejected() {
        assert!(MiningConfig {
            lambda: -1.0,
            ..MiningConfig::default()
        }
        .validate()
        .is_err());
    }
}
