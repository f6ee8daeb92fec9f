//! Dataset directory layout:
//!
//! ```text
//! root/<instance-id>/manifest.json
//! root/<instance-id>/frame_000.png ... frame_004.png
//! ```
//!
//! Frame index order is temporal order. JPEG frames (`.jpg`/`.jpeg`) are
//! accepted on load; saving always writes lossless PNG.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledDataset, LabeledInstance, ObjectClass};
use crate::error::{Error, Result};
use crate::experts::{ObjectSequence, SourceMeta};
use crate::imaging::Image;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub label: String,
    pub city: String,
    pub object_class: String,
    pub interval_ms: f64,
    #[serde(default)]
    pub crop_margin_px: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub augmented: bool,
}

fn frame_index(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    let (stem, ext) = name.rsplit_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg") {
        return None;
    }
    stem.strip_prefix("frame_")?.parse().ok()
}

fn decode_frame(path: &Path) -> std::result::Result<Image, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.to_rgb8();
    let (w, h) = img.dimensions();
    Image::from_rgb8(w as usize, h as usize, img.as_raw()).map_err(|e| e.to_string())
}

/// Decodes the `frame_NNN` images of one instance directory in index order.
pub fn load_instance_frames(dir: &Path) -> Result<Vec<Image>> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut frames: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter_map(|p| frame_index(&p).map(|i| (i, p)))
        .collect();
    frames.sort();
    frames
        .iter()
        .map(|(_, p)| {
            decode_frame(p).map_err(|reason| Error::Instance {
                id: id.clone(),
                reason: format!("{}: {reason}", p.display()),
            })
        })
        .collect()
}

fn load_instance(dir: &Path) -> Result<LabeledInstance> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let fail = |reason: String| Error::Instance { id: id.clone(), reason };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| fail(format!("missing or unreadable manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| fail(format!("bad manifest: {e}")))?;
    let label: Label = manifest.label.parse().map_err(|e: Error| fail(e.to_string()))?;
    let object_class: ObjectClass = manifest.object_class.parse().map_err(|e: Error| fail(e.to_string()))?;
    let frames = load_instance_frames(dir)?;
    let sequence = ObjectSequence::new(frames, manifest.interval_ms)
        .map_err(|e| fail(e.to_string()))?
        .with_meta(SourceMeta {
            city: Some(manifest.city.clone()),
            object_class: Some(object_class),
            track_id: Some(id.clone()),
        });
    Ok(LabeledInstance {
        id: id.clone(),
        sequence,
        label,
        city: manifest.city,
        object_class,
        augmented: manifest.augmented && label == Label::TwoD,
        crop_margin_px: manifest.crop_margin_px,
    })
}

/// Loads every instance directory under `root`, sorted by directory name.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<LabeledDataset> {
    let root = root.as_ref();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Dataset(format!("no instances under {}", root.display())));
    }
    let instances = dirs.par_iter().map(|d| load_instance(d)).collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(instances, root.display().to_string())
}

fn save_instance(root: &Path, inst: &LabeledInstance) -> Result<()> {
    let dir = root.join(&inst.id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = Manifest {
        label: inst.label.to_string(),
        city: inst.city.clone(),
        object_class: inst.object_class.to_string(),
        interval_ms: inst.sequence.interval_ms(),
        crop_margin_px: inst.crop_margin_px,
        augmented: inst.augmented,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    for (i, frame) in inst.sequence.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{i:03}.png"));
        let buf = image::RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.to_u8())
            .ok_or_else(|| Error::InvalidImage("frame buffer size".into()))?;
        buf.save(&path).map_err(|e| Error::Instance {
            id: inst.id.clone(),
            reason: format!("{}: {e}", path.display()),
        })?;
    }
    Ok(())
}

/// Writes `dataset` in the directory layout above, one subdirectory per instance.
pub fn save_dataset(dataset: &LabeledDataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    dataset
        .instances
        .par_iter()
        .try_for_each(|inst| save_instance(root, inst))
}
