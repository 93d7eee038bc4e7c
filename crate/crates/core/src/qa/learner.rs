//! Learner state, the four storylines and the greedy learning loop.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aog::model::{Aog, Part, PartKind, Pose};
use crate::aog::scoring::{Affine, AndParams, NeighborPair};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{pairwise_geometry, Region};
use crate::inference::{parse_pose, parse_pose_model, InferenceConfig};
use crate::learning::calibration::{calibrate_pair_weights, calibrate_pose};
use crate::learning::hard_negatives::mine_hard_negatives;
use crate::learning::penalties::estimate_penalties;
use crate::learning::semantic::{train_semantic_part, PartExample};
use crate::learning::structure::{
    build_dummy_pose, mine_pose_structure, observe, pair_weight_or_default, parse_appearance_only,
    parse_detected, reestimate_geometry, MiningConfig, MiningData,
};
use crate::world::generate::{stream, LEARNER_STREAM};
use crate::world::{Answer, BackgroundSampler, Exemplar, Question, World};

use super::cost::{collection_quota, storyline_cost, CostModel, CostState, StorylineKind, Target};
use super::events::{Event, EventLog};
use super::ledger::{
    estimate_pose_probability, predict_gains, select_next_storyline, Candidate, GainRecord, Losses,
    RiskLedger, RiskPoint,
};
use super::loss::{category_scores, pose_losses, LossScene, PartLabels};
use super::source::AnswerSource;

/// Deformation penalty of a freshly labeled pose, in residual units.
pub const INITIAL_DEFORMATION_PENALTY: f64 = 1.0;
/// Collect-and-mine rounds when a pose is created.
pub const NEW_POSE_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Storylines run after the bootstrap.
    pub iterations: usize,
    pub cost: CostModel,
    pub mining: MiningConfig,
    pub inference: InferenceConfig,
    /// Background grids for calibration.
    pub background_grids: usize,
    /// Collected samples (labeled first) used for mining.
    pub mining_pool: usize,
    /// Parse training samples at nominal part scale only. Mean-pooled
    /// appearance barely tells a part from its sub-boxes, so ladder search
    /// while learning lets the whole model drift to a smaller scale.
    pub train_nominal_scale: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            iterations: 20,
            cost: CostModel::default(),
            mining: MiningConfig::default(),
            inference: InferenceConfig::default(),
            background_grids: 8,
            mining_pool: 16,
            train_nominal_scale: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.mining.validate()?;
        if self.background_grids < 2 || self.mining_pool == 0 {
            return Err(Error::Config(
                "need two background grids and a mining pool".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub category: usize,
    pub exemplar: usize,
    /// Collected samples `I^_PO`, exemplar first.
    pub positives: Vec<usize>,
    /// Scenes already shown for this pose.
    pub asked: BTreeSet<usize>,
    pub yes: usize,
    pub collections: u32,
    pub labels: BTreeMap<usize, PartLabels>,
    /// `(scene, part)` labels that are accepted proposals rather than drawn boxes.
    pub confirmed: BTreeSet<(usize, String)>,
    pub hard_negatives: BTreeMap<String, Vec<Vec<f64>>>,
    /// Part boxes drawn by an annotator for this pose.
    pub boxes_requested: usize,
    pub names_confirmed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub part_names: Option<Vec<String>>,
    /// No further pose exemplar exists.
    pub exhausted: bool,
}

/// Pose losses of the graph plus everything the learner has been told.
pub struct Learner {
    world: Arc<World>,
    cfg: LearnerConfig,
    pub aog: Aog,
    pub poses: Vec<PoseRecord>,
    pub categories: Vec<CategoryRecord>,
    pub ledger: RiskLedger,
    pub log: EventLog,
    rng: ChaCha8Rng,
    background: Vec<FeatureGrid>,
    storyline: usize,
    realized: f64,
}

impl Learner {
    pub fn new(world: Arc<World>, cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(world.config.seed, LEARNER_STREAM);
        let background =
            BackgroundSampler::new(&world.config, rng.random()).grids(cfg.background_grids);
        let mut aog = Aog::new(world.feature_dim());
        for name in &world.category_names {
            aog.add_category(name.clone());
        }
        let categories = vec![CategoryRecord::default(); world.category_names.len()];
        Ok(Learner {
            world,
            cfg,
            aog,
            poses: Vec::new(),
            categories,
            ledger: RiskLedger::default(),
            log: EventLog::default(),
            rng,
            background,
            storyline: 0,
            realized: 0.0,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn storylines_run(&self) -> usize {
        self.storyline
    }

    fn charge(&mut self, cost: f64) {
        self.realized += cost;
        self.ledger.cost += cost;
    }

    fn ask(&mut self, src: &mut dyn AnswerSource, q: Question) -> Result<Answer> {
        let a = src.answer(&q)?;
        if !a.matches(&q) {
            return Err(Error::AnswerMismatch(format!(
                "{} answered with {}",
                q.code(),
                a.kind_name()
            )));
        }
        a.validate(&q, &self.world)?;
        let cost = self.cfg.cost.question_cost(&q);
        self.charge(cost);
        let storyline = self.storyline;
        let answer = a.clone();
        self.log.push(|step| Event::Question {
            step,
            storyline,
            question: q,
            answer,
            cost,
        });
        Ok(a)
    }

    fn compute(&mut self, what: &str, cost: f64) {
        self.charge(cost);
        let storyline = self.storyline;
        self.log.push(|step| Event::Computation {
            step,
            storyline,
            what: what.into(),
            cost,
        });
    }

    fn training_inference(&self) -> InferenceConfig {
        InferenceConfig {
            nominal_scale_only: self.cfg.train_nominal_scale,
            ..self.cfg.inference
        }
    }

    fn grids(&self, scenes: &[usize]) -> Result<Vec<&FeatureGrid>> {
        scenes
            .iter()
            .map(|&s| self.world.scene(s).map(|sc| &sc.grid))
            .collect()
    }

    fn refresh_probabilities(&mut self) -> Result<()> {
        let counts: Vec<(usize, usize)> =
            self.poses.iter().map(|p| (p.yes, p.asked.len())).collect();
        self.ledger.probabilities = estimate_pose_probability(&counts)?;
        Ok(())
    }

    fn losses_of(&self, pose: usize) -> Result<Losses> {
        let rec = &self.poses[pose];
        let grids = self.grids(&rec.positives)?;
        let scenes: Vec<LossScene> = rec
            .positives
            .iter()
            .zip(grids)
            .map(|(s, grid)| LossScene {
                grid,
                labels: rec.labels.get(s),
            })
            .collect();
        pose_losses(&self.aog, pose, &scenes, &self.cfg.inference)
    }

    fn refresh_losses(&mut self) -> Result<()> {
        self.ledger.losses = (0..self.poses.len())
            .map(|p| self.losses_of(p))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn category_pool_scores(&self, category: usize) -> Result<Vec<f64>> {
        let grids = self.grids(&self.world.pools[category])?;
        category_scores(
            &self.aog,
            &self.aog.categories[category].poses,
            &grids,
            &self.cfg.inference,
        )
    }

    /// Pool scenes of the pose's category that nobody has claimed or shown for this pose.
    fn unexplored(&self, pose: usize) -> Vec<usize> {
        let rec = &self.poses[pose];
        let taken: BTreeSet<usize> = self
            .poses
            .iter()
            .filter(|p| p.category == rec.category)
            .flat_map(|p| p.positives.iter().copied())
            .collect();
        self.world.pools[rec.category]
            .iter()
            .copied()
            .filter(|s| !taken.contains(s) && !rec.asked.contains(s))
            .collect()
    }

    fn ask_part_names(
        &mut self,
        src: &mut dyn AnswerSource,
        category: usize,
    ) -> Result<Vec<String>> {
        let count = match self.ask(src, Question::PartCount { category })? {
            Answer::Count(n) => n,
            _ => unreachable!("matched"),
        };
        let names = match self.ask(src, Question::PartNames { category })? {
            Answer::Names(n) => n,
            _ => unreachable!("matched"),
        };
        if names.len() != count {
            return Err(Error::AnswerMismatch(format!(
                "{count} parts but {} names",
                names.len()
            )));
        }
        self.categories[category].part_names = Some(names.clone());
        Ok(names)
    }

    /// Semantic-only pose from an exemplar; returns its id.
    fn create_pose(
        &mut self,
        category: usize,
        ex: &Exemplar,
        names_confirmed: bool,
    ) -> Result<usize> {
        let world = self.world.clone();
        let grid = &world.scene(ex.scene)?.grid;
        let mut parts = Vec::with_capacity(ex.boxes.len());
        for (i, (name, b)) in ex.boxes.iter().enumerate() {
            let keep_clear: Vec<_> = ex
                .boxes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (_, o))| *o)
                .collect();
            let mut part = Part {
                kind: PartKind::Semantic,
                name: name.clone(),
                aspect: 1.0,
                scale: 1.0,
                invisible_penalty: 0.0,
                children: Vec::new(),
            };
            let example = PartExample {
                grid,
                bbox: *b,
                keep_clear: &keep_clear,
                drawn: true,
            };
            train_semantic_part(&mut part, &[example], &[], &self.background)?;
            parts.push(part);
        }
        let mut and = AndParams::new(INITIAL_DEFORMATION_PENALTY);
        for a in 0..ex.boxes.len() {
            for b in a + 1..ex.boxes.len() {
                let g = pairwise_geometry(
                    &Region::from_box(&ex.boxes[a].1)?,
                    &Region::from_box(&ex.boxes[b].1)?,
                )?;
                and.pairs.push(NeighborPair {
                    a,
                    b,
                    weight: 0.0,
                    mean_geometry: g,
                });
            }
        }
        let k = self.aog.categories[category].poses.len();
        let name = format!("{}-{k}", self.aog.categories[category].name);
        let mut new = Pose {
            name,
            category,
            parts,
            and,
        };
        calibrate_pair_weights(&mut new, self.world.config.grid, self.world.config.grid)?;
        let id = self.aog.add_pose(new);
        calibrate_pose(&mut self.aog, id, &self.background, &self.cfg.inference)?;
        let labels: PartLabels = ex
            .boxes
            .iter()
            .map(|(n, b)| (n.clone(), Some(*b)))
            .collect();
        self.poses.push(PoseRecord {
            category,
            exemplar: ex.scene,
            positives: vec![ex.scene],
            asked: BTreeSet::new(),
            yes: 0,
            collections: 0,
            labels: BTreeMap::from([(ex.scene, labels)]),
            confirmed: BTreeSet::new(),
            hard_negatives: BTreeMap::new(),
            boxes_requested: ex.boxes.len(),
            names_confirmed,
        });
        self.ledger.losses.push(Losses::default());
        Ok(id)
    }

    /// Re-estimates geometry, penalties and pair weights from parses of the
    /// collected samples, then recalibrates the pose norm.
    fn refit(&mut self, pose: usize) -> Result<()> {
        let grids = self.grids(&self.poses[pose].positives)?;
        let labels = self.labels_of(pose, &self.poses[pose].positives);
        let parses = parse_detected(
            &self.aog.poses[pose],
            &grids,
            &labels,
            &self.training_inference(),
        )?;
        let labeled: Vec<bool> = labels.iter().map(Option::is_some).collect();
        let mut p = reestimate_geometry(&self.aog.poses[pose], &parses, &labeled)
            .unwrap_or_else(|| self.aog.poses[pose].clone());
        let obs = observe(&p, &parses);
        let flat = parse_appearance_only(&p, &grids, &labels, &parses, &self.training_inference())?;
        let pair_obs = observe(&p, &flat);
        match estimate_penalties(&obs) {
            Ok(pen) => {
                for (part, rho) in p.parts.iter_mut().zip(&pen.parts) {
                    if let Some(r) = rho {
                        part.invisible_penalty = *r;
                    }
                }
                if let Some(r) = pen.rho {
                    p.and.undetected_penalty = r;
                }
            }
            Err(Error::Empty(_)) => {}
            Err(e) => return Err(e),
        }
        for (pair, res) in p.and.pairs.iter_mut().zip(&pair_obs.pair_residuals) {
            pair.weight = pair_weight_or_default(res);
        }
        self.aog.poses[pose] = p;
        calibrate_pose(&mut self.aog, pose, &self.background, &self.cfg.inference)
    }

    fn retrain_semantic(&mut self, pose: usize) -> Result<()> {
        let world = self.world.clone();
        let rec = &self.poses[pose];
        for i in 0..self.aog.poses[pose].parts.len() {
            if self.aog.poses[pose].parts[i].kind != PartKind::Semantic {
                continue;
            }
            let name = self.aog.poses[pose].parts[i].name.clone();
            let mut boxes = Vec::new();
            for (&scene, labels) in &rec.labels {
                if let Some(Some(b)) = labels.get(&name) {
                    let clear: Vec<_> = labels
                        .iter()
                        .filter(|(n, _)| **n != name)
                        .filter_map(|(_, o)| *o)
                        .collect();
                    let drawn = !rec.confirmed.contains(&(scene, name.clone()));
                    boxes.push((&world.scene(scene)?.grid, *b, clear, drawn));
                }
            }
            if boxes.is_empty() {
                continue;
            }
            let examples: Vec<PartExample> = boxes
                .iter()
                .map(|(grid, bbox, clear, drawn)| PartExample {
                    grid,
                    bbox: *bbox,
                    keep_clear: clear,
                    drawn: *drawn,
                })
                .collect();
            let hard = rec
                .hard_negatives
                .get(&name)
                .map_or(&[][..], |v| v.as_slice());
            train_semantic_part(
                &mut self.aog.poses[pose].parts[i],
                &examples,
                hard,
                &self.background,
            )?;
        }
        self.refit(pose)
    }

    /// Shows the top-scoring unexplored pool scenes and keeps those confirmed
    /// to show the pose.
    fn collect(&mut self, src: &mut dyn AnswerSource, pose: usize) -> Result<()> {
        let category = self.poses[pose].category;
        self.poses[pose].collections += 1;
        let quota = collection_quota(self.poses[pose].collections);
        let pool_cost = self.cfg.cost.col * self.world.pools[category].len() as f64;
        self.compute("collect", pool_cost);
        let cands = self.unexplored(pose);
        let grids = self.grids(&cands)?;
        let scores: Vec<f64> = grids
            .par_iter()
            .map(|g| parse_pose(&self.aog, pose, g, None, &self.cfg.inference).map(|p| p.score))
            .collect::<Result<_>>()?;
        let mut ranked: Vec<(usize, f64)> = cands.into_iter().zip(scores).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(quota);
        let n = self.cfg.cost.n.min(ranked.len());
        let mut chosen = sample(&mut self.rng, ranked.len(), n).into_vec();
        chosen.sort_unstable();
        let exemplar = self.poses[pose].exemplar;
        for i in chosen {
            let scene = ranked[i].0;
            let yes = matches!(
                self.ask(src, Question::CheckSample { scene, exemplar })?,
                Answer::YesNo(true)
            );
            let rec = &mut self.poses[pose];
            rec.asked.insert(scene);
            if yes {
                rec.yes += 1;
                rec.positives.push(scene);
            }
        }
        Ok(())
    }

    /// Labels aligned with `scenes`.
    fn labels_of(&self, pose: usize, scenes: &[usize]) -> Vec<Option<&PartLabels>> {
        scenes
            .iter()
            .map(|s| self.poses[pose].labels.get(s))
            .collect()
    }

    fn mine(&mut self, pose: usize) -> Result<()> {
        // labeled samples first: they pin the geometry to annotated boxes
        let rec = &self.poses[pose];
        let (mut scenes, rest): (Vec<usize>, Vec<usize>) = rec
            .positives
            .iter()
            .partition(|s| rec.labels.contains_key(s));
        scenes.extend(rest);
        scenes.truncate(self.cfg.mining_pool);
        let run = {
            let grids = self.grids(&scenes)?;
            let labels = self.labels_of(pose, &scenes);
            let data = MiningData {
                scenes: &grids,
                labels: &labels,
                background: &self.background,
                inference: self.training_inference(),
            };
            mine_pose_structure(&self.aog.poses[pose], &data, &self.cfg.mining)?
        };
        self.aog.poses[pose] = run.pose;
        let storyline = self.storyline;
        self.log.push(|step| Event::Mining {
            step,
            storyline,
            pose,
            moves: run.moves,
            objective: run.objective,
        });
        self.refit(pose)
    }

    /// Semantic part check on the collected sample where the semantic parts
    /// add the most over the latent-only model.
    fn check_parts(&mut self, src: &mut dyn AnswerSource, pose: usize) -> Result<()> {
        let category = self.poses[pose].category;
        if !self.poses[pose].names_confirmed {
            self.ask_part_names(src, category)?;
            self.poses[pose].names_confirmed = true;
        }
        let rec = &self.poses[pose];
        let unlabeled: Vec<usize> = rec
            .positives
            .iter()
            .copied()
            .filter(|s| !rec.labels.contains_key(s))
            .collect();
        if unlabeled.is_empty() {
            return Ok(());
        }
        let mut full = self.aog.poses[pose].clone();
        full.and.norm = Affine::IDENTITY;
        let dummy = if full.latent_count() > 0 {
            Some(build_dummy_pose(&full)?)
        } else {
            None
        };
        let grids = self.grids(&unlabeled)?;
        let cfg = self.cfg.inference;
        let gaps: Vec<f64> = grids
            .par_iter()
            .map(|g| {
                let s = parse_pose_model(&full, pose, g, None, &cfg)?.score;
                let lat = match &dummy {
                    Some(d) => parse_pose_model(d, pose, g, None, &cfg)?.score,
                    None => 0.0,
                };
                Ok(s - lat)
            })
            .collect::<Result<_>>()?;
        let mut best = 0;
        for i in 1..gaps.len() {
            if gaps[i] > gaps[best] {
                best = i;
            }
        }
        let scene = unlabeled[best];
        let parse = parse_pose(
            &self.aog,
            pose,
            grids[best],
            None,
            &self.training_inference(),
        )?;
        let mut labels = PartLabels::new();
        for p in parse.parts.iter().filter(|p| p.kind == PartKind::Semantic) {
            let q = Question::CheckPart {
                scene,
                part: p.name.clone(),
                bbox: p.bbox(),
            };
            let label = match self.ask(src, q)? {
                Answer::YesNo(true) => {
                    self.poses[pose].confirmed.insert((scene, p.name.clone()));
                    p.bbox()
                }
                _ => {
                    self.poses[pose].boxes_requested += 1;
                    match self.ask(
                        src,
                        Question::LabelPart {
                            scene,
                            part: p.name.clone(),
                        },
                    )? {
                        Answer::Box(b) => b,
                        _ => unreachable!("matched"),
                    }
                }
            };
            labels.insert(p.name.clone(), label);
        }
        self.poses[pose].labels.insert(scene, labels);
        self.retrain_semantic(pose)
    }

    /// Harvests hard negatives from the pose's samples won by other poses and
    /// retrains those poses' semantic parts.
    fn retrain(&mut self, pose: usize) -> Result<()> {
        let cost = self.cfg.cost.ret
            * self.poses[pose].positives.len() as f64
            * self.aog.poses.len() as f64;
        self.compute("retrain", cost);
        let all: Vec<usize> = (0..self.aog.poses.len()).collect();
        let negs = {
            let grids = self.grids(&self.poses[pose].positives)?;
            mine_hard_negatives(&self.aog, pose, &all, &grids, &self.cfg.inference)?
        };
        let mut touched = BTreeSet::new();
        for n in negs {
            touched.insert(n.pose);
            self.poses[n.pose]
                .hard_negatives
                .entry(n.part)
                .or_default()
                .push(n.feature);
        }
        for p in touched {
            self.retrain_semantic(p)?;
        }
        Ok(())
    }

    fn new_pose(&mut self, src: &mut dyn AnswerSource, category: usize) -> Result<Option<usize>> {
        let fresh_names = self.categories[category].part_names.is_none();
        if fresh_names {
            self.ask_part_names(src, category)?;
        }
        let known_poses = self.aog.categories[category].poses.len();
        let ex = match self.ask(
            src,
            Question::Exemplar {
                category,
                known_poses,
            },
        )? {
            Answer::Exemplar(Some(e)) => e,
            _ => {
                self.categories[category].exhausted = true;
                return Ok(None);
            }
        };
        let pose = self.create_pose(category, &ex, fresh_names)?;
        for _ in 0..NEW_POSE_ROUNDS {
            self.collect(src, pose)?;
            self.mine(pose)?;
        }
        self.check_parts(src, pose)?;
        self.retrain(pose)?;
        Ok(Some(pose))
    }

    fn category_of(&self, target: Target) -> usize {
        match target {
            Target::Pose(p) => self.poses[p].category,
            Target::Category(c) => c,
        }
    }

    /// Runs one storyline and records its realized cost and loss change.
    pub fn run_storyline(
        &mut self,
        src: &mut dyn AnswerSource,
        kind: StorylineKind,
        target: Target,
    ) -> Result<GainRecord> {
        let predicted = self.candidate(kind, target);
        let predicted_delta = predict_gains(&self.ledger, kind, target);
        let category = self.category_of(target);
        let track_category = matches!(kind, StorylineKind::Collect | StorylineKind::NewPose);
        let before_scores = if track_category {
            self.category_pool_scores(category)?
        } else {
            Vec::new()
        };
        let before = match target {
            Target::Pose(p) => *self.ledger.losses.get(p).ok_or(Error::UnknownPose(p))?,
            Target::Category(_) => Losses::default(),
        };
        self.realized = 0.0;
        let pose = match (kind, target) {
            (StorylineKind::Retrain, Target::Pose(p)) => self.retrain(p).map(|_| Some(p))?,
            (StorylineKind::CheckParts, Target::Pose(p)) => {
                self.check_parts(src, p).map(|_| Some(p))?
            }
            (StorylineKind::Collect, Target::Pose(p)) => {
                self.collect(src, p)?;
                self.mine(p)?;
                self.check_parts(src, p)?;
                self.retrain(p)?;
                Some(p)
            }
            (StorylineKind::NewPose, Target::Category(c)) => self.new_pose(src, c)?,
            _ => {
                return Err(Error::Config(format!(
                    "storyline {} cannot target {target:?}",
                    kind.number()
                )))
            }
        };
        self.refresh_probabilities()?;
        self.refresh_losses()?;
        let mut delta = match (target, pose) {
            (Target::Pose(p), _) => {
                let a = self.ledger.losses[p];
                Losses {
                    gen: a.gen - before.gen,
                    cate: a.cate - before.cate,
                    part: a.part - before.part,
                }
            }
            _ => Losses::default(),
        };
        if track_category && pose.is_some() {
            let after = self.category_pool_scores(category)?;
            let n = after.len().max(1) as f64;
            delta.gen = -after
                .iter()
                .zip(&before_scores)
                .map(|(a, b)| a - b)
                .sum::<f64>()
                / n;
        }
        let delta = delta.masked(kind.components());
        let record = GainRecord {
            kind,
            target,
            delta,
            cost: self.realized,
        };
        self.ledger.records.push(record.clone());
        let risk = self.ledger.risk(&self.cfg.cost);
        self.ledger.trajectory.push(RiskPoint {
            storyline: self.storyline,
            risk,
            cost: self.ledger.cost,
        });
        let (storyline, realized_cost, cumulative_cost) =
            (self.storyline, self.realized, self.ledger.cost);
        self.log.push(|step| Event::Storyline {
            step,
            storyline,
            kind,
            target,
            pose,
            predicted_cost: predicted.cost,
            predicted_delta,
            realized_cost,
            realized_delta: delta,
            risk,
            cumulative_cost,
        });
        self.storyline += 1;
        Ok(record)
    }

    fn candidate(&self, kind: StorylineKind, target: Target) -> Candidate {
        let m = &self.cfg.cost;
        let (state, probability) = match target {
            Target::Pose(p) => {
                let rec = &self.poses[p];
                let state = CostState {
                    pose_pool: rec.positives.len(),
                    poses: self.aog.poses.len(),
                    category_pool: self.world.pools[rec.category].len(),
                    semantic_parts: self.aog.poses[p].semantic_count(),
                };
                (
                    state,
                    self.ledger.probabilities.get(p).copied().unwrap_or(1.0),
                )
            }
            Target::Category(c) => {
                let siblings = &self.aog.categories[c].poses;
                let probability = if siblings.is_empty() {
                    1.0 / (self.poses.len() + 1) as f64
                } else {
                    siblings
                        .iter()
                        .map(|&p| self.ledger.probabilities[p])
                        .sum::<f64>()
                        / siblings.len() as f64
                };
                let semantic = self.categories[c]
                    .part_names
                    .as_ref()
                    .map_or(0, |n| n.len());
                let state = CostState {
                    pose_pool: 1,
                    poses: self.aog.poses.len() + 1,
                    category_pool: self.world.pools[c].len(),
                    semantic_parts: semantic,
                };
                (state, probability)
            }
        };
        Candidate {
            kind,
            target,
            probability,
            cost: storyline_cost(kind, &state, m),
        }
    }

    /// The candidate set: retraining, part checks and collection for every pose
    /// that still has material for them, and a new pose for every category not
    /// known to be exhausted.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::new();
        for p in 0..self.poses.len() {
            out.push(self.candidate(StorylineKind::Retrain, Target::Pose(p)));
            let rec = &self.poses[p];
            if rec.positives.iter().any(|s| !rec.labels.contains_key(s)) {
                out.push(self.candidate(StorylineKind::CheckParts, Target::Pose(p)));
            }
            if !self.unexplored(p).is_empty() {
                out.push(self.candidate(StorylineKind::Collect, Target::Pose(p)));
            }
        }
        for c in 0..self.categories.len() {
            if !self.categories[c].exhausted {
                out.push(self.candidate(StorylineKind::NewPose, Target::Category(c)));
            }
        }
        out
    }

    /// Picks and runs the next storyline; `None` when nothing is left to do.
    pub fn step(&mut self, src: &mut dyn AnswerSource) -> Result<Option<GainRecord>> {
        let omega = self.candidates();
        if omega.is_empty() {
            return Ok(None);
        }
        let i = select_next_storyline(&self.ledger, &omega, &self.cfg.cost)?;
        self.run_storyline(src, omega[i].kind, omega[i].target)
            .map(Some)
    }
}

/// Bootstrap followed by `cfg.iterations` greedy storylines. `observe` sees the
/// learner after every storyline.
pub fn run_learning_loop_observed(
    world: Arc<World>,
    cfg: LearnerConfig,
    src: &mut dyn AnswerSource,
    observe: &mut dyn FnMut(&Learner),
) -> Result<Learner> {
    let iterations = cfg.iterations;
    let mut learner = Learner::new(world, cfg)?;
    for c in 0..learner.categories.len() {
        learner.run_storyline(src, StorylineKind::NewPose, Target::Category(c))?;
        observe(&learner);
    }
    for _ in 0..iterations {
        if learner.step(src)?.is_none() {
            break;
        }
        observe(&learner);
    }
    Ok(learner)
}

pub fn run_learning_loop(
    world: Arc<World>,
    cfg: LearnerConfig,
    src: &mut dyn AnswerSource,
) -> Result<Learner> {
    run_learning_loop_observed(world, cfg, src, &mut |_| {})
}
