//! Labelled sequences, augmentation, tag splits and the on-disk format.

mod io;
mod synthetic;

pub use io::{load_dataset, load_instance_frames, save_dataset, Manifest, MANIFEST_FILE};
pub use synthetic::{generate_synthetic, synthetic_pair, SyntheticConfig, DEFAULT_CITIES};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::ObjectSequence;
use crate::imaging::rotate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl Label {
    /// Positive class of the classifier is 3D.
    pub fn is_3d(self) -> bool {
        self == Label::ThreeD
    }

    pub fn from_3d(is_3d: bool) -> Self {
        if is_3d {
            Label::ThreeD
        } else {
            Label::TwoD
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::TwoD => "2d",
            Label::ThreeD => "3d",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Label::TwoD),
            "3d" => Ok(Label::ThreeD),
            other => Err(Error::Dataset(format!("unknown label '{other}'"))),
        }
    }
}

/// Humans, vehicles, animals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    HU,
    VE,
    AN,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::HU, ObjectClass::VE, ObjectClass::AN];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::HU => "HU",
            ObjectClass::VE => "VE",
            ObjectClass::AN => "AN",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HU" => Ok(ObjectClass::HU),
            "VE" => Ok(ObjectClass::VE),
            "AN" => Ok(ObjectClass::AN),
            other => Err(Error::Dataset(format!("unknown object class '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub id: String,
    pub sequence: ObjectSequence,
    pub label: Label,
    pub city: String,
    pub object_class: ObjectClass,
    pub augmented: bool,
    pub crop_margin_px: u32,
}

impl LabeledInstance {
    pub fn tag(&self, axis: TagAxis) -> String {
        match axis {
            TagAxis::City => self.city.clone(),
            TagAxis::ObjectClass => self.object_class.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub instances: Vec<LabeledInstance>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(instances: Vec<LabeledInstance>, provenance: impl Into<String>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Dataset("no instances".into()));
        }
        if let Some(bad) = instances.iter().find(|i| i.augmented && i.label == Label::ThreeD) {
            return Err(Error::Instance {
                id: bad.id.clone(),
                reason: "augmented instances must be 2D".into(),
            });
        }
        Ok(Self {
            instances,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.instances.iter().filter(|i| i.label == label).count()
    }

    /// Distinct tag values along `axis`, sorted.
    pub fn tags(&self, axis: TagAxis) -> Vec<String> {
        self.instances
            .iter()
            .map(|i| i.tag(axis))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Sub-dataset of the given instance indices, in the given order.
    pub fn select(&self, indices: &[usize], provenance: impl Into<String>) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.instances[i].clone()).collect(), provenance)
    }
}

/// Grows the 2D class to the size of the 3D class with rotated clones.
///
/// Each clone copies a uniformly drawn original 2D instance and rotates all of
/// its frames by one angle drawn uniformly from `[90, 180]` degrees.
pub fn augment_to_parity(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let n3 = dataset.count(Label::ThreeD);
    let n2 = dataset.count(Label::TwoD);
    if n2 == 0 {
        return Err(Error::Dataset("augmentation needs at least one 2D instance".into()));
    }
    if n3 == 0 {
        return Err(Error::Dataset("augmentation needs at least one 3D instance".into()));
    }
    if n2 > n3 {
        return Err(Error::Dataset(format!(
            "2D class ({n2}) is already larger than 3D class ({n3})"
        )));
    }
    let mut sources: Vec<&LabeledInstance> = dataset
        .instances
        .iter()
        .filter(|i| i.label == Label::TwoD && !i.augmented)
        .collect();
    if sources.is_empty() {
        sources = dataset.instances.iter().filter(|i| i.label == Label::TwoD).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = dataset.instances.clone();
    for j in 0..n3 - n2 {
        let src = sources[rng.gen_range(0..sources.len())];
        let angle: f64 = rng.gen_range(90.0..=180.0);
        let sequence = src.sequence.map_frames(|f| rotate(f, angle))?;
        instances.push(LabeledInstance {
            id: format!("{}~aug{j:04}", src.id),
            sequence,
            augmented: true,
            ..src.clone()
        });
    }
    LabeledDataset::new(instances, format!("{} + parity augmentation", dataset.provenance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagAxis {
    City,
    ObjectClass,
}

impl FromStr for TagAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "city" => Ok(TagAxis::City),
            "object_class" | "object-class" | "class" => Ok(TagAxis::ObjectClass),
            other => Err(Error::Config(format!("unknown tag axis '{other}'"))),
        }
    }
}

/// Minimum training-side class counts for a tag split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFloor {
    pub min_2d: usize,
    pub min_3d: usize,
}

impl Default for SplitFloor {
    fn default() -> Self {
        Self {
            min_2d: 56,
            min_3d: 120,
        }
    }
}

/// Partitions by tag with the default training floor of 56 2D / 120 3D instances.
pub fn split_by_tag(
    dataset: &LabeledDataset,
    axis: TagAxis,
    train_tags: &[String],
    test_tags: &[String],
) -> Result<(LabeledDataset, LabeledDataset)> {
    split_by_tag_with_floor(dataset, axis, train_tags, test_tags, SplitFloor::default())
}

/// Instances tagged with neither side are dropped.
pub fn split_by_tag_with_floor(
    dataset: &LabeledDataset,
    axis: TagAxis,
    train_tags: &[String],
    test_tags: &[String],
    floor: SplitFloor,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if train_tags.is_empty() || test_tags.is_empty() {
        return Err(Error::Split("train and test tag sets must be non-empty".into()));
    }
    let train_set: BTreeSet<&String> = train_tags.iter().collect();
    let test_set: BTreeSet<&String> = test_tags.iter().collect();
    if let Some(t) = train_set.intersection(&test_set).next() {
        return Err(Error::Split(format!("tag '{t}' is on both sides")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for inst in &dataset.instances {
        let tag = inst.tag(axis);
        if train_set.contains(&tag) {
            train.push(inst.clone());
        } else if test_set.contains(&tag) {
            test.push(inst.clone());
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!(
            "split leaves {} training and {} test instances",
            train.len(),
            test.len()
        )));
    }
    let n2 = train.iter().filter(|i| i.label == Label::TwoD && !i.augmented).count();
    let n3 = train.iter().filter(|i| i.label == Label::ThreeD).count();
    if n2 < floor.min_2d || n3 < floor.min_3d {
        return Err(Error::Split(format!(
            "training side has {n2} 2D / {n3} 3D instances, needs at least {} / {}",
            floor.min_2d, floor.min_3d
        )));
    }
    Ok((
        LabeledDataset::new(
            train,
            format!("{} [train {}]", dataset.provenance, train_tags.join("+")),
        )?,
        LabeledDataset::new(test, format!("{} [test {}]", dataset.provenance, test_tags.join("+")))?,
    ))
}
