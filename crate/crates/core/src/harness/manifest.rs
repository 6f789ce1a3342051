use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{make_synthetic, SceneSpec, ShapeKind};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::io::save_scan;
use crate::recognition::{ClassRegistry, NORMAL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub truths: Vec<TruthEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub images: Vec<ImageEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidManifest(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks ids and class names; box bounds are checked once the image
    /// is loaded.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidManifest(m));
        let registry = ClassRegistry::new(&self.classes).map_err(|e| Error::InvalidManifest(e.to_string()))?;
        let mut seen = HashSet::new();
        for img in &self.images {
            if img.id.is_empty() || img.id.contains(['/', '\\']) || img.id == "." || img.id == ".." {
                return bad(format!("image id {:?} is not a plain name", img.id));
            }
            if !seen.insert(img.id.as_str()) {
                return bad(format!("image id {:?} appears twice", img.id));
            }
            for t in &img.truths {
                if t.class == NORMAL || registry.id(&t.class).is_none() {
                    return bad(format!("image {:?}: class {:?} not in the registry", img.id, t.class));
                }
                if t.bbox.height == 0 || t.bbox.width == 0 {
                    return bad(format!("image {:?}: empty truth box", img.id));
                }
            }
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<ClassRegistry> {
        ClassRegistry::new(&self.classes)
    }

    pub fn resolve(&self, entry: &ImageEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Images sorted by id.
    pub fn sorted_images(&self) -> Vec<&ImageEntry> {
        let mut v: Vec<&ImageEntry> = self.images.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Truths of one image as `(class_id, box)` against `registry`.
    pub fn truth_ids(&self, entry: &ImageEntry, registry: &ClassRegistry) -> Vec<(usize, BoundingBox)> {
        entry
            .truths
            .iter()
            .filter_map(|t| registry.id(&t.class).map(|c| (c, t.bbox)))
            .collect()
    }
}

/// Renders `count` scenes with seeds `first_seed..`, writes them as PNGs
/// under `dir` together with `manifest.json`, and returns the manifest.
pub fn write_synthetic_corpus(
    dir: &Path,
    spec: &SceneSpec,
    first_seed: u64,
    count: usize,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let seed = first_seed + i as u64;
        let scene = make_synthetic(seed, spec)?;
        let id = format!("scene_{seed:06}");
        let file = PathBuf::from(format!("{id}.png"));
        save_scan(&scene.image, &dir.join(&file))?;
        images.push(ImageEntry {
            id,
            path: file,
            truths: scene
                .shapes
                .iter()
                .map(|s| TruthEntry { class: s.kind.name().to_string(), bbox: s.bbox })
                .collect(),
        });
    }
    let manifest = DatasetManifest {
        classes: ShapeKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        images,
        base_dir: dir.to_path_buf(),
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}
