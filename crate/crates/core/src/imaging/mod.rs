//! Low-level image kernels shared by the experts.
//!
//! Every kernel is a pure function over normalized `f64` intensities in
//! `[0, 1]`. Grayscale images and scalar maps are both viewed as a
//! [`PlaneRef`] so that SSIM can compare either kind.

mod blur;
mod filter;
mod geometry;
mod kmeans;
mod ssim;

pub use blur::{block_high_frequency_fraction, blur_map, BLOCK};
pub use filter::{edge_map, gaussian_blur, gaussian_kernel, laplacian_response, sharpness, sobel_magnitude};
pub(crate) use geometry::sample_bilinear;
pub use geometry::{resize_bilinear, rotate};
pub use kmeans::{dominant_cluster_fraction, KMEANS_MAX_ITERS, KMEANS_TOLERANCE, SEED_SAMPLE};
pub use ssim::{ssim, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};

use crate::error::{Error, Result};

/// Side length every frame is resized to before feature extraction.
pub const WORKING_SIZE: usize = 128;

/// An 8-bit-derived image with intensities normalized to `[0, 1]`.
///
/// Samples are stored row-major and interleaved (`RGBRGB...` for colour).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an RGB image from interleaved 8-bit samples, dividing by 255.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, 3, data)
    }

    /// Builds a grayscale image by evaluating `f(x, y)` in row-major order; values are clamped into `[0, 1]`.
    pub fn from_gray_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    /// Builds an RGB image by evaluating `f(x, y)` in row-major order; values are clamped into `[0, 1]`.
    pub fn from_rgb_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_rgb(&self) -> bool {
        self.channels == 3
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Quantizes back to 8-bit interleaved samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Views a grayscale image as a plane; colour images are rejected.
    pub fn as_plane(&self) -> Result<PlaneRef<'_>> {
        self.expect_channels(1)?;
        Ok(PlaneRef {
            width: self.width,
            height: self.height,
            data: &self.data,
        })
    }

    pub(crate) fn expect_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }
}

/// A per-pixel scalar field with values in `[0, 1]` (blur maps, edge maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage("map value outside [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn as_plane(&self) -> PlaneRef<'_> {
        PlaneRef {
            width: self.width,
            height: self.height,
            data: &self.data,
        }
    }

    /// Approximate heap footprint in bytes.
    pub fn heap_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

/// Borrowed single-channel view used by the windowed kernels.
#[derive(Debug, Clone, Copy)]
pub struct PlaneRef<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f64],
}

impl PlaneRef<'_> {
    #[inline]
    pub(crate) fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with replicated-edge addressing.
    #[inline]
    pub(crate) fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }
}

/// ITU-R BT.601 luma: `0.299 R + 0.587 G + 0.114 B`.
pub fn to_grayscale(img: &Image) -> Result<Image> {
    img.expect_channels(3)?;
    // Grouping the last two terms makes pure white map to exactly 1.0.
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + (0.587 * p[1] + 0.114 * p[2])).clamp(0.0, 1.0))
        .collect();
    Ok(Image::from_parts_unchecked(img.width, img.height, 1, data))
}

/// Rescales `values` to `[0, 1]` in place; a (near-)flat field becomes all zeros.
pub(crate) fn min_max_normalize(values: &mut [f64]) {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 1e-12) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values.iter_mut() {
        *v = ((*v - lo) / range).clamp(0.0, 1.0);
    }
}

pub(crate) fn require_min_size(width: usize, height: usize, min: usize) -> Result<()> {
    if width < min || height < min {
        return Err(Error::TooSmall { width, height, min });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_maps_to_one() {
        let img = Image::from_rgb_fn(9, 9, |_, _| [1.0, 1.0, 1.0]);
        let g = to_grayscale(&img).unwrap();
        assert!(g.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn red_maps_to_luma_weight() {
        let img = Image::from_rgb_fn(9, 9, |_, _| [1.0, 0.0, 0.0]);
        let g = to_grayscale(&img).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.299));
    }

    #[test]
    fn grayscale_matches_per_pixel_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_rgb_fn(4, 4, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
        let g = to_grayscale(&img).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let expect = 0.299 * img.get(x, y, 0) + 0.587 * img.get(x, y, 1) + 0.114 * img.get(x, y, 2);
                assert!((g.get(x, y, 0) - expect).abs() < 1e-12);
            }
        }
        assert_eq!((g.width(), g.height(), g.channels()), (4, 4, 1));
    }

    #[test]
    fn grayscale_rejects_single_channel() {
        let img = Image::from_gray_fn(8, 8, |_, _| 0.5);
        assert!(matches!(
            to_grayscale(&img),
            Err(Error::ChannelMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn constructor_validates() {
        assert!(Image::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ScalarMap::new(2, 2, vec![0.0, 0.5, 1.0, -0.1]).is_err());
    }

    #[test]
    fn normalization_of_flat_field_is_zero() {
        let mut v = vec![0.25; 10];
        min_max_normalize(&mut v);
        assert!(v.iter().all(|&x| x == 0.0));
    }
}
