//! The four unsupervised committee members and the raw-image baseline.
//!
//! Every expert extracts one feature per frame and reports the largest
//! distance between consecutive frames. A planar depiction moves and
//! refocuses as a single surface, so its consecutive features stay close;
//! a real object separates from its background under auto-focus and motion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::ObjectClass;
use crate::error::{Error, Result};
use crate::imaging::{blur_map, dominant_cluster_fraction, edge_map, sharpness, ssim, to_grayscale, Image, ScalarMap};

/// Acquisition protocol: a decision never waits for more than five frames.
pub const MAX_FRAMES: usize = 5;
pub const MIN_FRAME_SIDE: usize = 8;
/// Cluster count for the colour expert.
pub const COLOR_CLUSTERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SourceMeta {
    pub city: Option<String>,
    pub object_class: Option<ObjectClass>,
    pub track_id: Option<String>,
}

/// A time series of cropped RGB images of one tracked object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSequence {
    frames: Vec<Image>,
    interval_ms: f64,
    meta: Option<SourceMeta>,
}

impl ObjectSequence {
    pub fn new(frames: Vec<Image>, interval_ms: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames(frames.len()));
        }
        if frames.len() > MAX_FRAMES {
            return Err(Error::InvalidSequence(format!(
                "{} frames exceeds the maximum of {MAX_FRAMES}",
                frames.len()
            )));
        }
        if !(interval_ms > 0.0) || !interval_ms.is_finite() {
            return Err(Error::InvalidSequence(format!(
                "interval must be positive, got {interval_ms}"
            )));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        if w < MIN_FRAME_SIDE || h < MIN_FRAME_SIDE {
            return Err(Error::TooSmall {
                width: w,
                height: h,
                min: MIN_FRAME_SIDE,
            });
        }
        for (i, f) in frames.iter().enumerate() {
            f.expect_channels(3)?;
            if f.width() != w || f.height() != h {
                return Err(Error::InvalidSequence(format!(
                    "frame {i} is {}x{}, frame 0 is {w}x{h}",
                    f.width(),
                    f.height()
                )));
            }
        }
        Ok(Self {
            frames,
            interval_ms,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: SourceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn interval_ms(&self) -> f64 {
        self.interval_ms
    }

    /// Sampling frequency in Hz.
    pub fn frequency_hz(&self) -> f64 {
        1000.0 / self.interval_ms
    }

    pub fn meta(&self) -> Option<&SourceMeta> {
        self.meta.as_ref()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// The first `k` frames as a new sequence.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k > self.frames.len() {
            return Err(Error::InvalidSequence(format!(
                "prefix of {k} frames requested from a {}-frame sequence",
                self.frames.len()
            )));
        }
        let mut seq = Self::new(self.frames[..k].to_vec(), self.interval_ms)?;
        seq.meta = self.meta.clone();
        Ok(seq)
    }

    /// Same frames in reverse temporal order.
    pub fn reversed(&self) -> Self {
        let mut frames = self.frames.clone();
        frames.reverse();
        Self {
            frames,
            interval_ms: self.interval_ms,
            meta: self.meta.clone(),
        }
    }

    /// Applies `f` to every frame, keeping interval and metadata.
    pub fn map_frames(&self, mut f: impl FnMut(&Image) -> Result<Image>) -> Result<Self> {
        let frames = self.frames.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        let mut seq = Self::new(frames, self.interval_ms)?;
        seq.meta = self.meta.clone();
        Ok(seq)
    }
}

/// One committee member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expert {
    Blurring,
    Sharpness,
    Color,
    Edge,
}

impl Expert {
    pub const ALL: [Expert; 4] = [Expert::Blurring, Expert::Sharpness, Expert::Color, Expert::Edge];

    /// Column of this expert in a feature vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Expert::Blurring => 'B',
            Expert::Sharpness => 'S',
            Expert::Color => 'C',
            Expert::Edge => 'E',
        }
    }
}

/// A non-empty subset of experts, stored as a bitmask over [`Expert::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Committee(u8);

impl Committee {
    pub const FULL: Committee = Committee(0b1111);

    pub fn new(experts: &[Expert]) -> Result<Self> {
        let mask = experts.iter().fold(0u8, |m, e| m | (1 << e.index()));
        Self::from_mask(mask)
    }

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask == 0 || mask > 0b1111 {
            return Err(Error::Config(format!("invalid committee mask {mask:#06b}")));
        }
        Ok(Committee(mask))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, expert: Expert) -> bool {
        self.0 & (1 << expert.index()) != 0
    }

    pub fn experts(self) -> impl Iterator<Item = Expert> {
        Expert::ALL.into_iter().filter(move |e| self.contains(*e))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Feature-column mask suitable for [`crate::gbm::FitParams::feature_mask`].
    pub fn feature_mask(self) -> Vec<bool> {
        Expert::ALL.iter().map(|e| self.contains(*e)).collect()
    }

    /// All 15 non-empty committees, ordered by size then by mask.
    pub fn all() -> Vec<Committee> {
        let mut all: Vec<Committee> = (1u8..16).map(Committee).collect();
        all.sort_by_key(|c| (c.len(), c.0));
        all
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut experts = Vec::new();
        for part in s.split('+').map(str::trim) {
            let e = match part {
                "B" | "b" => Expert::Blurring,
                "S" | "s" => Expert::Sharpness,
                "C" | "c" => Expert::Color,
                "E" | "e" => Expert::Edge,
                other => return Err(Error::Config(format!("unknown expert '{other}'"))),
            };
            experts.push(e);
        }
        Self::new(&experts)
    }
}

impl fmt::Display for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.experts().map(|e| e.letter().to_string()).collect();
        f.write_str(&parts.join("+"))
    }
}

/// The four 3D-confidence scores of one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpertScores {
    pub b: f64,
    pub s: f64,
    pub c: f64,
    pub e: f64,
}

impl ExpertScores {
    pub const ZERO: ExpertScores = ExpertScores {
        b: 0.0,
        s: 0.0,
        c: 0.0,
        e: 0.0,
    };

    pub fn to_array(self) -> [f64; 4] {
        [self.b, self.s, self.c, self.e]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            b: v[0],
            s: v[1],
            c: v[2],
            e: v[3],
        }
    }

    pub fn get(&self, expert: Expert) -> f64 {
        self.to_array()[expert.index()]
    }

    /// Element-wise maximum.
    pub fn max(self, other: Self) -> Self {
        Self {
            b: self.b.max(other.b),
            s: self.s.max(other.s),
            c: self.c.max(other.c),
            e: self.e.max(other.e),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0) && self.c <= 0.5
    }
}

/// `1 - ssim`, clamped to `[0, 1]`.
pub fn ssim_distance(a: &ScalarMap, b: &ScalarMap) -> Result<f64> {
    Ok((1.0 - ssim(a.as_plane(), b.as_plane())?).clamp(0.0, 1.0))
}

/// Cached per-frame features; an incremental session keeps only the latest.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub blur: ScalarMap,
    pub sharpness: f64,
    pub cluster_fraction: f64,
    pub edges: ScalarMap,
}

impl FrameFeatures {
    pub fn extract(frame: &Image) -> Result<Self> {
        let gray = to_grayscale(frame)?;
        Ok(Self {
            blur: blur_map(&gray)?,
            sharpness: sharpness(&gray)?,
            cluster_fraction: dominant_cluster_fraction(frame, COLOR_CLUSTERS)?,
            edges: edge_map(&gray)?,
        })
    }

    /// Distances between this frame and the next one, per expert.
    pub fn distance_to(&self, next: &FrameFeatures) -> Result<ExpertScores> {
        Ok(ExpertScores {
            b: ssim_distance(&self.blur, &next.blur)?,
            s: (next.sharpness - self.sharpness).abs(),
            c: (next.cluster_fraction - self.cluster_fraction).abs(),
            e: ssim_distance(&self.edges, &next.edges)?,
        })
    }

    pub fn heap_bytes(&self) -> usize {
        self.blur.heap_bytes() + self.edges.heap_bytes()
    }
}

/// Maximum of `distance` over consecutive frame pairs.
fn max_consecutive<T>(
    seq: &ObjectSequence,
    extract: impl Fn(&Image) -> Result<T>,
    distance: impl Fn(&T, &T) -> Result<f64>,
) -> Result<f64> {
    let features = seq.frames().iter().map(extract).collect::<Result<Vec<_>>>()?;
    features
        .windows(2)
        .try_fold(0.0f64, |acc, w| Ok(acc.max(distance(&w[0], &w[1])?)))
}

fn scalar_distance(a: &f64, b: &f64) -> Result<f64> {
    Ok((b - a).abs())
}

pub fn score_blurring(seq: &ObjectSequence) -> Result<f64> {
    max_consecutive(seq, |f| blur_map(&to_grayscale(f)?), ssim_distance)
}

pub fn score_sharpness(seq: &ObjectSequence) -> Result<f64> {
    max_consecutive(seq, |f| sharpness(&to_grayscale(f)?), scalar_distance)
}

pub fn score_color(seq: &ObjectSequence) -> Result<f64> {
    max_consecutive(seq, |f| dominant_cluster_fraction(f, COLOR_CLUSTERS), scalar_distance)
}

pub fn score_edge(seq: &ObjectSequence) -> Result<f64> {
    max_consecutive(seq, |f| edge_map(&to_grayscale(f)?), ssim_distance)
}

/// All four scores, extracting each frame's features once.
pub fn score_all(seq: &ObjectSequence) -> Result<ExpertScores> {
    let features = seq
        .frames()
        .iter()
        .map(FrameFeatures::extract)
        .collect::<Result<Vec<_>>>()?;
    features
        .windows(2)
        .try_fold(ExpertScores::ZERO, |acc, w| Ok(acc.max(w[0].distance_to(&w[1])?)))
}

/// Single-expert baseline: SSIM distance between the raw grayscale frames.
pub fn score_raw_baseline(seq: &ObjectSequence) -> Result<f64> {
    let grays = seq.frames().iter().map(to_grayscale).collect::<Result<Vec<_>>>()?;
    grays.windows(2).try_fold(0.0f64, |acc, w| {
        let s = ssim(w[0].as_plane()?, w[1].as_plane()?)?;
        Ok(acc.max((1.0 - s).clamp(0.0, 1.0)))
    })
}
