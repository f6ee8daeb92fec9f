//! Procedural stand-in for captured object sequences.
//!
//! Every instance starts from a random scene: a patchwork background with
//! fine texture and a striped elliptical object in the middle. A 2D instance
//! is a picture of that scene: the whole composite is blurred by one focus
//! level and then moved, brightened and noised as a single plane. A 3D
//! instance renders object and background as separate layers, each with its
//! own per-frame focus; background patches churn (parallax reveals new
//! background) and the object drifts against the background. Both classes
//! share the same camera jitter, illumination flicker and sensor noise, which
//! is what makes raw frame differences a weak cue on their own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledDataset, LabeledInstance, ObjectClass};
use crate::error::{Error, Result};
use crate::experts::{ObjectSequence, SourceMeta, MAX_FRAMES, MIN_FRAME_SIDE};
use crate::imaging::{gaussian_blur, sample_bilinear, Image};

pub const DEFAULT_CITIES: [&str; 6] = ["NY", "SF", "LDN", "DXB", "MIA", "GT"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_3d: usize,
    pub n_2d: usize,
    pub seed: u64,
    pub frames: usize,
    /// Side of the square output frames.
    pub size: usize,
    /// Extra canvas rendered around the crop so jitter never samples outside it.
    pub margin_px: usize,
    pub interval_ms: f64,
    pub cities: Vec<String>,
    /// Largest camera jitter, in pixels, applied to both classes.
    pub max_jitter_px: f64,
    pub noise_sigma: f64,
    pub flicker: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_3d: 150,
            n_2d: 70,
            seed: 0,
            frames: MAX_FRAMES,
            size: crate::imaging::WORKING_SIZE,
            margin_px: 6,
            interval_ms: 200.0,
            cities: DEFAULT_CITIES.iter().map(|c| c.to_string()).collect(),
            max_jitter_px: 2.5,
            noise_sigma: 0.008,
            flicker: 0.05,
        }
    }
}

impl SyntheticConfig {
    pub fn new(n_3d: usize, n_2d: usize, seed: u64) -> Self {
        Self {
            n_3d,
            n_2d,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_3d == 0 || self.n_2d == 0 {
            return Err(Error::Config(format!(
                "synthetic data needs at least one instance per class, got {} 3D / {} 2D",
                self.n_3d, self.n_2d
            )));
        }
        if !(2..=MAX_FRAMES).contains(&self.frames) {
            return Err(Error::Config(format!("frames must be in 2..={MAX_FRAMES}")));
        }
        if self.size < MIN_FRAME_SIDE.max(16) {
            return Err(Error::Config(format!("frame size {} is too small", self.size)));
        }
        if self.cities.is_empty() {
            return Err(Error::Config("at least one city tag is required".into()));
        }
        if !(self.interval_ms > 0.0) || self.max_jitter_px < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Config("invalid synthetic rendering parameters".into()));
        }
        if self.max_jitter_px.ceil() as usize + 1 > self.margin_px {
            return Err(Error::Config("margin must exceed the jitter range".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_3d + self.n_2d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instance `i` of the dataset: 3D instances come first, then 2D.
    ///
    /// Each instance draws from its own random stream, so any subset can be
    /// rendered on demand without materialising the rest.
    pub fn instance(&self, i: usize) -> Result<LabeledInstance> {
        self.validate()?;
        if i >= self.len() {
            return Err(Error::Config(format!("instance {i} out of range")));
        }
        let (label, j) = if i < self.n_3d {
            (Label::ThreeD, i)
        } else {
            (Label::TwoD, i - self.n_3d)
        };
        let mut rng = self.stream(i as u64);
        let scene = Scene::random(&mut rng, self.canvas());
        let id = format!("syn{}_{j:04}", label.as_str());
        self.render(&scene, label, id, &mut rng)
    }

    pub fn instances(&self) -> impl Iterator<Item = Result<LabeledInstance>> + '_ {
        (0..self.len()).map(|i| self.instance(i))
    }

    pub fn generate(&self) -> Result<LabeledDataset> {
        let instances = self.instances().collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(
            instances,
            format!("synthetic(n_3d={}, n_2d={}, seed={})", self.n_3d, self.n_2d, self.seed),
        )
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn canvas(&self) -> usize {
        self.size + 2 * self.margin_px
    }

    fn render(&self, scene: &Scene, label: Label, id: String, rng: &mut ChaCha8Rng) -> Result<LabeledInstance> {
        let city = self.cities[rng.gen_range(0..self.cities.len())].clone();
        let object_class = ObjectClass::ALL[rng.gen_range(0..ObjectClass::ALL.len())];
        let camera = Camera::random(rng, self);
        let frames = match label {
            Label::TwoD => render_planar(scene, &camera, self, rng),
            Label::ThreeD => render_volumetric(scene, &camera, self, rng),
        };
        let sequence = ObjectSequence::new(frames, self.interval_ms)?.with_meta(SourceMeta {
            city: Some(city.clone()),
            object_class: Some(object_class),
            track_id: Some(id.clone()),
        });
        Ok(LabeledInstance {
            id,
            sequence,
            label,
            city,
            object_class,
            augmented: false,
            crop_margin_px: self.margin_px as u32,
        })
    }
}

/// `n_3d` 3D instances followed by `n_2d` 2D instances, deterministic in `seed`.
pub fn generate_synthetic(n_3d: usize, n_2d: usize, seed: u64) -> Result<LabeledDataset> {
    SyntheticConfig::new(n_3d, n_2d, seed).generate()
}

/// A 3D instance and a 2D instance rendered from the same base scene.
pub fn synthetic_pair(seed: u64) -> Result<(LabeledInstance, LabeledInstance)> {
    let cfg = SyntheticConfig::new(1, 1, seed);
    cfg.validate()?;
    let mut scene_rng = cfg.stream(0);
    let scene = Scene::random(&mut scene_rng, cfg.canvas());
    let three = cfg.render(&scene, Label::ThreeD, "pair3d".into(), &mut cfg.stream(1))?;
    let two = cfg.render(&scene, Label::TwoD, "pair2d".into(), &mut cfg.stream(2))?;
    Ok((three, two))
}

#[derive(Debug, Clone)]
struct Patch {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    color: [f64; 3],
}

#[derive(Debug, Clone)]
struct Scene {
    side: usize,
    base_color: [f64; 3],
    gradient: [f64; 2],
    texture: (f64, f64, f64),
    patches: Vec<Patch>,
    object_center: (f64, f64),
    object_radii: (f64, f64),
    object_colors: [[f64; 3]; 2],
    stripe: (f64, f64, f64),
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.gen_range(0.05..0.95),
        rng.gen_range(0.05..0.95),
        rng.gen_range(0.05..0.95),
    ]
}

impl Scene {
    fn random(rng: &mut ChaCha8Rng, side: usize) -> Self {
        let n_patches = rng.gen_range(6..=10);
        let patches = (0..n_patches).map(|_| Self::random_patch(rng, side)).collect();
        let s = side as f64;
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let period: f64 = rng.gen_range(3.0..6.0);
        let k = std::f64::consts::TAU / period;
        Self {
            side,
            base_color: random_color(rng),
            gradient: [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
            texture: (
                rng.gen_range(0.6..1.6),
                rng.gen_range(0.6..1.6),
                rng.gen_range(0.0..6.3),
            ),
            patches,
            object_center: (
                s / 2.0 + rng.gen_range(-0.05..0.05) * s,
                s / 2.0 + rng.gen_range(-0.05..0.05) * s,
            ),
            object_radii: (rng.gen_range(0.22..0.32) * s, rng.gen_range(0.22..0.32) * s),
            object_colors: [random_color(rng), random_color(rng)],
            stripe: (k * angle.cos(), k * angle.sin(), rng.gen_range(0.0..6.3)),
        }
    }

    fn random_patch(rng: &mut ChaCha8Rng, side: usize) -> Patch {
        let w = rng.gen_range(side / 6..side / 2);
        let h = rng.gen_range(side / 6..side / 2);
        let x0 = rng.gen_range(0..side - w);
        let y0 = rng.gen_range(0..side - h);
        Patch {
            x0,
            y0,
            x1: x0 + w,
            y1: y0 + h,
            color: random_color(rng),
        }
    }

    fn background_at(&self, patches: &[Patch], x: usize, y: usize) -> [f64; 3] {
        let s = self.side as f64;
        let (fx, fy, ph) = self.texture;
        let ramp = self.gradient[0] * (x as f64 / s - 0.5) + self.gradient[1] * (y as f64 / s - 0.5);
        let fine = 0.06 * (fx * x as f64 + ph).sin() * (fy * y as f64).cos();
        let mut c = self.base_color;
        if let Some(p) = patches
            .iter()
            .rev()
            .find(|p| (p.x0..p.x1).contains(&x) && (p.y0..p.y1).contains(&y))
        {
            c = p.color;
        }
        c.map(|v| (v + ramp + fine).clamp(0.0, 1.0))
    }

    fn background(&self, patches: &[Patch]) -> Image {
        Image::from_rgb_fn(self.side, self.side, |x, y| self.background_at(patches, x, y))
    }

    /// Object colour layer and its coverage mask, shifted by `(dx, dy)`.
    fn object(&self, dx: f64, dy: f64) -> (Image, Image) {
        let (cx, cy) = (self.object_center.0 + dx, self.object_center.1 + dy);
        let (rx, ry) = self.object_radii;
        let (kx, ky, ph) = self.stripe;
        let layer = Image::from_rgb_fn(self.side, self.side, |x, y| {
            let t = 0.5 + 0.5 * (kx * (x as f64 - dx) + ky * (y as f64 - dy) + ph).sin();
            let [a, b] = self.object_colors;
            [0, 1, 2].map(|i| a[i] * t + b[i] * (1.0 - t))
        });
        let mask = Image::from_gray_fn(self.side, self.side, |x, y| {
            let u = (x as f64 + 0.5 - cx) / rx;
            let v = (y as f64 + 0.5 - cy) / ry;
            // One-pixel antialiased rim.
            let r = (u * u + v * v).sqrt();
            ((1.0 - r) * rx.min(ry)).clamp(0.0, 1.0)
        });
        (layer, mask)
    }
}

/// Per-instance camera behaviour shared by both classes.
#[derive(Debug, Clone, Copy)]
struct Camera {
    jitter: f64,
}

impl Camera {
    fn random(rng: &mut ChaCha8Rng, cfg: &SyntheticConfig) -> Self {
        Self {
            jitter: rng.gen_range(0.0..=cfg.max_jitter_px),
        }
    }

    /// Crops the output window out of `canvas` with sub-pixel jitter, then
    /// applies illumination flicker and sensor noise.
    fn expose(&self, canvas: &Image, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Image {
        let m = cfg.margin_px as f64;
        let ox = m + self.jitter * rng.gen_range(-1.0..=1.0);
        let oy = m + self.jitter * rng.gen_range(-1.0..=1.0);
        let gain = 1.0 + cfg.flicker * rng.gen_range(-1.0..=1.0);
        let n = cfg.size;
        let noise: Vec<f64> = (0..n * n * 3).map(|_| cfg.noise_sigma * standard_normal(rng)).collect();
        Image::from_rgb_fn(n, n, |x, y| {
            let (sx, sy) = (ox + x as f64, oy + y as f64);
            let base = (y * n + x) * 3;
            [0, 1, 2].map(|c| sample_bilinear(canvas, sx, sy, c) * gain + noise[base + c])
        })
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one variate per call keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn composite(background: &Image, object: &Image, mask: &Image) -> Image {
    let side = background.width();
    Image::from_rgb_fn(side, side, |x, y| {
        let m = mask.get(x, y, 0);
        [0, 1, 2].map(|c| m * object.get(x, y, c) + (1.0 - m) * background.get(x, y, c))
    })
}

fn render_planar(scene: &Scene, camera: &Camera, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<Image> {
    let (object, mask) = scene.object(0.0, 0.0);
    let picture = composite(&scene.background(&scene.patches), &object, &mask);
    let focus: f64 = rng.gen_range(0.4..1.6);
    (0..cfg.frames)
        .map(|_| {
            let sigma = focus + rng.gen_range(-0.1..=0.1);
            camera.expose(&gaussian_blur(&picture, sigma), cfg, rng)
        })
        .collect()
}

fn render_volumetric(scene: &Scene, camera: &Camera, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<Image> {
    let mut patches = scene.patches.clone();
    let (mut dx, mut dy) = (0.0, 0.0);
    // Auto-focus hunts between the object and the background plane.
    let mut object_in_focus = rng.gen_bool(0.5);
    (0..cfg.frames)
        .map(|t| {
            if t > 0 {
                for _ in 0..rng.gen_range(1..=3) {
                    let i = rng.gen_range(0..patches.len());
                    patches[i] = Scene::random_patch(rng, scene.side);
                }
                dx += rng.gen_range(-2.5..=2.5);
                dy += rng.gen_range(-2.5..=2.5);
                if rng.gen_bool(0.75) {
                    object_in_focus = !object_in_focus;
                }
            }
            let sharp: f64 = rng.gen_range(0.2..0.6);
            let soft: f64 = rng.gen_range(1.4..3.0);
            let (sigma_object, sigma_background) = if object_in_focus { (sharp, soft) } else { (soft, sharp) };
            let (object, mask) = scene.object(dx, dy);
            let frame = composite(
                &gaussian_blur(&scene.background(&patches), sigma_background),
                &gaussian_blur(&object, sigma_object),
                &gaussian_blur(&mask, sigma_object),
            );
            camera.expose(&frame, cfg, rng)
        })
        .collect()
}
