//! On-disk scene archives and the world manifest.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureGrid;

use super::config::WorldConfig;
use super::generate::{generate_world, GroundTruth, Scene, Split, World};

pub const SCENES_FORMAT: &str = "aogqa-scenes";
pub const MANIFEST_FORMAT: &str = "aogqa-world";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EncodedScene {
    id: usize,
    channels: usize,
    height: usize,
    width: usize,
    /// Little-endian f64 cells, base64.
    data: String,
    truth: Option<GroundTruth>,
    keyword: usize,
    relevant: bool,
    split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneArchive {
    format: String,
    version: u32,
    name: String,
    scenes: Vec<EncodedScene>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: WorldConfig,
    pub category_names: Vec<String>,
    pub archives: Vec<String>,
    pub scene_count: usize,
}

fn encode(scene: &Scene) -> EncodedScene {
    let bytes: Vec<u8> = scene
        .grid
        .data()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    EncodedScene {
        id: scene.id,
        channels: scene.grid.channels(),
        height: scene.grid.height(),
        width: scene.grid.width(),
        data: STANDARD.encode(bytes),
        truth: scene.truth.clone(),
        keyword: scene.keyword,
        relevant: scene.relevant,
        split: scene.split,
    }
}

fn decode(e: EncodedScene) -> Result<Scene> {
    let bytes = STANDARD
        .decode(e.data.as_bytes())
        .map_err(|err| Error::Format(err.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(
            "grid byte length is not a multiple of 8".into(),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect();
    let grid = FeatureGrid::from_data(e.channels, e.height, e.width, data)?;
    Ok(Scene {
        id: e.id,
        grid,
        truth: e.truth,
        keyword: e.keyword,
        relevant: e.relevant,
        split: e.split,
    })
}

pub fn scenes_to_json(name: &str, scenes: &[&Scene]) -> Result<String> {
    let doc = SceneArchive {
        format: SCENES_FORMAT.into(),
        version: ARCHIVE_VERSION,
        name: name.into(),
        scenes: scenes.iter().map(|s| encode(s)).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn scenes_from_json(text: &str) -> Result<Vec<Scene>> {
    let doc: SceneArchive = serde_json::from_str(text)?;
    if doc.format != SCENES_FORMAT || doc.version != ARCHIVE_VERSION {
        return Err(Error::Format(format!("{} v{}", doc.format, doc.version)));
    }
    doc.scenes.into_iter().map(decode).collect()
}

/// Writes one archive per keyword pool plus held-out and exemplar archives, and the manifest.
pub fn write_world(world: &World, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut archives = Vec::new();
    let mut groups: Vec<(String, Vec<&Scene>)> = world
        .pools
        .iter()
        .enumerate()
        .map(|(c, ids)| {
            (
                format!("pool-{c}.json"),
                ids.iter().map(|&i| &world.scenes[i]).collect(),
            )
        })
        .collect();
    groups.push((
        "heldout.json".into(),
        world.heldout.iter().map(|&i| &world.scenes[i]).collect(),
    ));
    groups.push((
        "exemplars.json".into(),
        world.exemplars.iter().map(|&i| &world.scenes[i]).collect(),
    ));
    for (name, scenes) in groups {
        fs::write(dir.join(&name), scenes_to_json(&name, &scenes)?)?;
        archives.push(name);
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: ARCHIVE_VERSION,
        config: world.config.clone(),
        category_names: world.category_names.clone(),
        archives,
        scene_count: world.scenes.len(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if m.format != MANIFEST_FORMAT || m.version != ARCHIVE_VERSION {
        return Err(Error::Format(format!("{} v{}", m.format, m.version)));
    }
    Ok(m)
}

/// Regenerates the world from the manifest seed and checks it against the stored archives.
pub fn load_world(dir: &Path) -> Result<World> {
    let manifest = read_manifest(dir)?;
    let world = generate_world(&manifest.config)?;
    if world.scenes.len() != manifest.scene_count {
        return Err(Error::Format(
            "manifest scene count does not match the regenerated world".into(),
        ));
    }
    for name in &manifest.archives {
        for s in scenes_from_json(&fs::read_to_string(dir.join(name))?)? {
            let ours = world.scene(s.id)?;
            if ours.grid.data() != s.grid.data() || ours.truth != s.truth {
                return Err(Error::Format(format!(
                    "scene {} differs from its archive",
                    s.id
                )));
            }
        }
    }
    Ok(world)
}
