//! Hidden generators, scene rendering and keyword pools.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aog::model::{Aog, LinearClassifier, Part, PartKind, Patch, PatchAppearance, Pose};
use crate::aog::scoring::{calibrate_normalization, Affine, AndParams, NeighborPair};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{pairwise_geometry, squared_distance, BoxRect, Region};
use crate::learning::classifier::train_semantic_classifier;
use crate::learning::negatives::background_negatives;
use crate::learning::penalties::{
    apply_penalties, pair_weight, percentile, PoseObservations, MIN_RESIDUAL,
};

use super::config::WorldConfig;

const SEMANTIC_NAMES: [&str; 12] = [
    "head", "tail", "wheel", "handle", "lid", "base", "wing", "door", "seat", "light", "leg",
    "spout",
];

/// Independent random stream `k` of a master seed.
pub fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// Spread of the per-cell detail around a part's base appearance.
pub const DETAIL_SD: f64 = 0.1;

pub const WORLD_STREAM: u64 = 1;
pub const ORACLE_STREAM: u64 = 2;
pub const LEARNER_STREAM: u64 = 3;
pub const BACKGROUND_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    pub kind: PartKind,
    pub width: usize,
    pub height: usize,
    /// Top-left corner relative to the object center.
    pub offset: (i64, i64),
    pub base: Vec<f64>,
    /// Per-cell detail, `[(y * width + x) * channels + c]`.
    pub detail: Vec<f64>,
}

impl PartSpec {
    pub fn cell(&self, y: usize, x: usize, channels: usize) -> Vec<f64> {
        let at = (y * self.width + x) * channels;
        (0..channels)
            .map(|c| self.base[c] + self.detail[at + c])
            .collect()
    }

    /// Noise-free pooled feature of the part's own box.
    pub fn mean_feature(&self, channels: usize) -> Vec<f64> {
        let n = (self.width * self.height) as f64;
        let mut m = vec![0.0; channels + 1];
        for y in 0..self.height {
            for x in 0..self.width {
                for (c, v) in self.cell(y, x, channels).into_iter().enumerate() {
                    m[c] += v / n;
                }
            }
        }
        m[channels] = self.height as f64 / self.width as f64;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenPose {
    pub category: usize,
    pub index_in_category: usize,
    pub parts: Vec<PartSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtPart {
    pub name: String,
    pub kind: PartKind,
    pub bbox: BoxRect,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub category: usize,
    /// Global hidden pose index.
    pub pose: usize,
    pub parts: Vec<GtPart>,
}

impl GroundTruth {
    pub fn part(&self, name: &str) -> Option<&GtPart> {
        self.parts.iter().find(|p| p.name == name)
    }

    /// Union of all part boxes, visible or not.
    pub fn object_box(&self) -> BoxRect {
        self.parts
            .iter()
            .map(|p| p.bbox)
            .reduce(|a, b| a.union_box(&b))
            .expect("poses have parts")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Pool,
    Heldout,
    Exemplar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub id: usize,
    pub grid: FeatureGrid,
    pub truth: Option<GroundTruth>,
    /// Category keyword whose search returned the scene.
    pub keyword: usize,
    pub relevant: bool,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub occlusion: f64,
    pub noise: f64,
    pub jitter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub category_names: Vec<String>,
    pub poses: Vec<HiddenPose>,
    pub scenes: Vec<Scene>,
    /// Keyword pool scene ids per category.
    pub pools: Vec<Vec<usize>>,
    pub heldout: Vec<usize>,
    /// One clean exemplar scene per hidden pose.
    pub exemplars: Vec<usize>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

fn background(rng: &mut ChaCha8Rng, cfg: &WorldConfig) -> FeatureGrid {
    let n = cfg.channels * cfg.grid * cfg.grid;
    let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    FeatureGrid::from_data(cfg.channels, cfg.grid, cfg.grid, data).expect("sizes agree")
}

/// Draws background grids from the same distribution as scene backgrounds.
#[derive(Debug, Clone)]
pub struct BackgroundSampler {
    cfg: WorldConfig,
    rng: ChaCha8Rng,
}

impl BackgroundSampler {
    pub fn new(cfg: &WorldConfig, seed: u64) -> Self {
        BackgroundSampler {
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_grid(&mut self) -> FeatureGrid {
        background(&mut self.rng, &self.cfg)
    }

    pub fn grids(&mut self, n: usize) -> Vec<FeatureGrid> {
        (0..n).map(|_| self.next_grid()).collect()
    }
}

impl World {
    pub fn scene(&self, id: usize) -> Result<&Scene> {
        self.scenes.get(id).ok_or(Error::UnknownScene(id))
    }

    pub fn pose(&self, category: usize, index_in_category: usize) -> Option<usize> {
        self.poses
            .iter()
            .position(|p| p.category == category && p.index_in_category == index_in_category)
    }

    pub fn semantic_names(&self, category: usize) -> Vec<String> {
        let Some(p) = self.poses.iter().find(|p| p.category == category) else {
            return Vec::new();
        };
        p.parts
            .iter()
            .filter(|s| s.kind == PartKind::Semantic)
            .map(|s| s.name.clone())
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    /// Range of integer object centers keeping every part box inside the grid.
    fn center_range(&self, pose: &HiddenPose, jitter: usize) -> ((i64, i64), (i64, i64)) {
        let j = jitter as i64;
        let g = self.config.grid as i64;
        let minx = pose.parts.iter().map(|p| p.offset.0).min().unwrap_or(0) - j;
        let maxx = pose
            .parts
            .iter()
            .map(|p| p.offset.0 + p.width as i64)
            .max()
            .unwrap_or(0)
            + j;
        let miny = pose.parts.iter().map(|p| p.offset.1).min().unwrap_or(0) - j;
        let maxy = pose
            .parts
            .iter()
            .map(|p| p.offset.1 + p.height as i64)
            .max()
            .unwrap_or(0)
            + j;
        ((-minx, g - maxx), (-miny, g - maxy))
    }

    /// Renders hidden pose `pose` on a fresh background.
    pub fn render_scene(
        &self,
        pose: usize,
        opts: &RenderOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<(FeatureGrid, GroundTruth)> {
        let hp = self.poses.get(pose).ok_or(Error::UnknownPose(pose))?;
        let cfg = &self.config;
        let mut grid = background(rng, cfg);
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.center_range(hp, opts.jitter);
        let cx = rng.random_range(x_lo..=x_hi);
        let cy = rng.random_range(y_lo..=y_hi);
        let j = opts.jitter as i64;
        let noise =
            Normal::new(0.0, opts.noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
        let mut parts = Vec::with_capacity(hp.parts.len());
        let mut cells = Vec::new();
        for spec in &hp.parts {
            let dx = if j > 0 { rng.random_range(-j..=j) } else { 0 };
            let dy = if j > 0 { rng.random_range(-j..=j) } else { 0 };
            let visible = !rng.random_bool(opts.occlusion);
            let x0 = cx + spec.offset.0 + dx;
            let y0 = cy + spec.offset.1 + dy;
            let bbox = BoxRect::new(
                x0 as f64,
                y0 as f64,
                (x0 + spec.width as i64) as f64,
                (y0 + spec.height as i64) as f64,
            );
            if visible {
                for y in 0..spec.height {
                    for x in 0..spec.width {
                        let v: Vec<f64> = spec
                            .cell(y, x, cfg.channels)
                            .into_iter()
                            .map(|v| v + noise.sample(rng))
                            .collect();
                        cells.push(((y0 + y as i64) as usize, (x0 + x as i64) as usize, v));
                    }
                }
            }
            parts.push(GtPart {
                name: spec.name.clone(),
                kind: spec.kind,
                bbox,
                visible,
            });
        }
        grid.paint(cells);
        Ok((
            grid,
            GroundTruth {
                category: hp.category,
                pose,
                parts,
            },
        ))
    }

    /// Inference model built directly from the hidden generators.
    pub fn generator_aog(&self) -> Result<Aog> {
        let cfg = &self.config;
        let mut rng = stream(cfg.seed, LEARNER_STREAM + 100);
        let mut aog = Aog::new(cfg.feature_dim());
        for name in &self.category_names {
            aog.add_category(name.clone());
        }
        let clean = RenderOptions {
            occlusion: 0.0,
            noise: 0.0,
            jitter: cfg.jitter,
        };
        for (pi, hp) in self.poses.iter().enumerate() {
            let renders: Vec<(FeatureGrid, GroundTruth)> = (0..20)
                .map(|_| self.render_scene(pi, &clean, &mut rng))
                .collect::<Result<_>>()?;
            let mut parts = Vec::new();
            for (k, spec) in hp.parts.iter().enumerate() {
                let aspect = spec.height as f64 / spec.width as f64;
                let (appearance, norm) = match spec.kind {
                    PartKind::Latent => (
                        PatchAppearance::Latent {
                            mean: spec.mean_feature(cfg.channels),
                        },
                        Affine { w: -1.0, b: 0.0 },
                    ),
                    PartKind::Semantic => {
                        let (classifier, norm) = classifier_from_renders(&renders, k)?;
                        (PatchAppearance::Semantic { classifier }, norm)
                    }
                };
                parts.push(Part {
                    kind: spec.kind,
                    name: spec.name.clone(),
                    aspect,
                    scale: spec.width as f64,
                    invisible_penalty: -3.0,
                    children: vec![Patch {
                        appearance,
                        norm,
                        template: None,
                    }],
                });
            }
            let mut and = AndParams::new(4.0);
            let regions: Vec<Region> = hp
                .parts
                .iter()
                .map(|s| {
                    let b = BoxRect::new(
                        s.offset.0 as f64,
                        s.offset.1 as f64,
                        (s.offset.0 + s.width as i64) as f64,
                        (s.offset.1 + s.height as i64) as f64,
                    );
                    Region::from_box(&b)
                })
                .collect::<Result<_>>()?;
            for a in 0..parts.len() {
                for b in a + 1..parts.len() {
                    let g = pairwise_geometry(&regions[a], &regions[b])?;
                    and.pairs.push(NeighborPair {
                        a,
                        b,
                        weight: -1.0,
                        mean_geometry: g,
                    });
                }
            }
            let mut pose = Pose {
                name: format!(
                    "{}-{}",
                    self.category_names[hp.category], hp.index_in_category
                ),
                category: hp.category,
                parts,
                and,
            };
            let mut obs = PoseObservations::new(&pose);
            for (grid, truth) in &renders {
                let seen = pose
                    .parts
                    .iter()
                    .zip(&truth.parts)
                    .map(|(part, gt)| {
                        let (_, s) = part.best_child(&grid.pooled(&gt.bbox))?;
                        Ok(Some((s, Region::from_box(&gt.bbox)?)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                obs.add(&pose, &seen);
            }
            apply_penalties(&mut pose, &obs)?;
            // latent appearance weighted like the pair terms: by the observed residual spread
            for (part, spec) in pose.parts.iter_mut().zip(&hp.parts) {
                if part.kind == PartKind::Latent {
                    let mean = spec.mean_feature(cfg.channels);
                    let res: Vec<f64> = renders
                        .iter()
                        .map(|(g, t)| {
                            let b = t
                                .parts
                                .iter()
                                .find(|p| p.name == spec.name)
                                .expect("part")
                                .bbox;
                            squared_distance(&mean, &g.pooled(&b))
                        })
                        .collect();
                    let w = pair_weight(&res).expect("renders");
                    part.children[0].norm = Affine { w, b: 0.0 };
                    part.invisible_penalty = w * percentile(&res, 0.9)?.max(MIN_RESIDUAL);
                }
            }
            aog.add_pose(pose);
        }
        Ok(aog)
    }
}

/// Classifier for part `k` plus the norm that standardizes its background margins.
fn classifier_from_renders(
    renders: &[(FeatureGrid, GroundTruth)],
    k: usize,
) -> Result<(LinearClassifier, Affine)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (grid, truth) in renders {
        let gt = truth.parts[k].bbox;
        pos.push(grid.pooled(&gt));
        neg.extend(background_negatives(grid, &gt, &[], 2)?);
    }
    let c = train_semantic_classifier(&pos, &neg)?;
    let margins = neg
        .iter()
        .map(|x| c.margin(x))
        .collect::<Result<Vec<_>>>()?;
    let norm = calibrate_normalization(&margins)?;
    Ok((c, norm))
}

/// Builds the hidden generators and materializes every scene.
pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, WORLD_STREAM);
    let ch = cfg.channels;
    let w = cfg.part_width;
    let step = cfg.lattice_step as i64;
    let category_names: Vec<String> = (0..cfg.categories)
        .map(|c| format!("category-{c}"))
        .collect();

    let mut poses = Vec::new();
    for c in 0..cfg.categories {
        // semantic parts keep their appearance across poses of a category
        let semantic: Vec<(String, Vec<f64>, Vec<f64>, usize)> = (0..cfg.semantic_parts)
            .map(|s| {
                let h = ((w as f64) * cfg.semantic_aspect).round().max(1.0) as usize;
                let name =
                    SEMANTIC_NAMES[(c * cfg.semantic_parts + s) % SEMANTIC_NAMES.len()].to_string();
                let name = if c * cfg.semantic_parts + s >= SEMANTIC_NAMES.len() {
                    format!("{name}-{c}")
                } else {
                    name
                };
                (
                    name,
                    gaussian_vec(&mut rng, ch, 1.0),
                    gaussian_vec(&mut rng, h * w * ch, DETAIL_SD),
                    h,
                )
            })
            .collect();
        for p in 0..cfg.poses_per_category {
            let mut slots: Vec<(i64, i64)> = (-1..=1)
                .flat_map(|y| (-1..=1).map(move |x| (x, y)))
                .collect();
            slots.shuffle(&mut rng);
            let mut parts = Vec::new();
            for l in 0..cfg.latent_parts {
                let h = ((w as f64) * cfg.latent_aspect).round().max(1.0) as usize;
                let (sx, sy) = slots[l];
                parts.push(PartSpec {
                    name: format!("latent-{l}"),
                    kind: PartKind::Latent,
                    width: w,
                    height: h,
                    offset: (sx * step - (w / 2) as i64, sy * step - (h / 2) as i64),
                    base: gaussian_vec(&mut rng, ch, 1.0),
                    detail: gaussian_vec(&mut rng, h * w * ch, DETAIL_SD),
                });
            }
            for (s, (name, base, detail, h)) in semantic.iter().enumerate() {
                let (sx, sy) = slots[cfg.latent_parts + s];
                parts.push(PartSpec {
                    name: name.clone(),
                    kind: PartKind::Semantic,
                    width: w,
                    height: *h,
                    offset: (sx * step - (w / 2) as i64, sy * step - (*h / 2) as i64),
                    base: base.clone(),
                    detail: detail.clone(),
                });
            }
            poses.push(HiddenPose {
                category: c,
                index_in_category: p,
                parts,
            });
        }
    }

    let mut world = World {
        config: cfg.clone(),
        category_names,
        poses,
        scenes: Vec::new(),
        pools: vec![Vec::new(); cfg.categories],
        heldout: Vec::new(),
        exemplars: Vec::new(),
    };
    let opts = RenderOptions {
        occlusion: cfg.occlusion,
        noise: cfg.noise,
        jitter: cfg.jitter,
    };
    let relevant = ((cfg.precision * cfg.pool_size as f64) + 0.5).floor() as usize;
    for c in 0..cfg.categories {
        let mut entries: Vec<Option<usize>> = (0..cfg.pool_size)
            .map(|i| {
                if i < relevant {
                    world.pose(c, i % cfg.poses_per_category)
                } else {
                    None
                }
            })
            .collect();
        entries.shuffle(&mut rng);
        for e in entries {
            let id = world.scenes.len();
            let scene = match e {
                Some(pose) => {
                    let (grid, truth) = world.render_scene(pose, &opts, &mut rng)?;
                    Scene {
                        id,
                        grid,
                        truth: Some(truth),
                        keyword: c,
                        relevant: true,
                        split: Split::Pool,
                    }
                }
                None => Scene {
                    id,
                    grid: background(&mut rng, cfg),
                    truth: None,
                    keyword: c,
                    relevant: false,
                    split: Split::Pool,
                },
            };
            world.scenes.push(scene);
            world.pools[c].push(id);
        }
    }
    for pose in 0..world.poses.len() {
        let c = world.poses[pose].category;
        for _ in 0..cfg.heldout_per_pose {
            let id = world.scenes.len();
            let (grid, truth) = world.render_scene(pose, &opts, &mut rng)?;
            world.scenes.push(Scene {
                id,
                grid,
                truth: Some(truth),
                keyword: c,
                relevant: true,
                split: Split::Heldout,
            });
            world.heldout.push(id);
        }
    }
    let clean = RenderOptions {
        occlusion: 0.0,
        noise: 0.0,
        jitter: 0,
    };
    for pose in 0..world.poses.len() {
        let c = world.poses[pose].category;
        let id = world.scenes.len();
        let (grid, truth) = world.render_scene(pose, &clean, &mut rng)?;
        world.scenes.push(Scene {
            id,
            grid,
            truth: Some(truth),
            keyword: c,
            relevant: true,
            split: Split::Exemplar,
        });
        world.exemplars.push(id);
    }
    Ok(world)
}
