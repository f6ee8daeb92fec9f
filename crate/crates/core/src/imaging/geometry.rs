use super::Image;
use crate::error::{Error, Result};

/// Bilinear sample at fractional coordinates with replicated edges.
#[inline]
pub(crate) fn sample_bilinear(img: &Image, sx: f64, sy: f64, ch: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let top = img.get(x0, y0, ch) * (1.0 - fx) + img.get(x1, y0, ch) * fx;
    let bottom = img.get(x0, y1, ch) * (1.0 - fx) + img.get(x1, y1, ch) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Rotates counter-clockwise (as displayed) about the image centre.
///
/// Output keeps the input dimensions; pixels that map outside the source are
/// filled by edge replication. Only angles in `[90, 180]` are accepted.
pub fn rotate(img: &Image, degrees: f64) -> Result<Image> {
    if !(90.0..=180.0).contains(&degrees) {
        return Err(Error::AngleOutOfRange(degrees));
    }
    // Snap the exact quarter turns so they stay pure pixel permutations.
    let (sin, cos) = if degrees == 90.0 {
        (1.0, 0.0)
    } else if degrees == 180.0 {
        (0.0, -1.0)
    } else {
        degrees.to_radians().sin_cos()
    };
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cx + (cos * dx - sin * dy);
            let sy = cy + (sin * dx + cos * dy);
            for ch in 0..c {
                out.push(sample_bilinear(img, sx, sy, ch).clamp(0.0, 1.0));
            }
        }
    }
    Ok(Image::from_parts_unchecked(w, h, c, out))
}

/// Bilinear resize with pixel-centre alignment.
pub fn resize_bilinear(img: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage("resize target has zero size".into()));
    }
    if img.width() == width && img.height() == height {
        return Ok(img.clone());
    }
    let c = img.channels();
    let scale_x = img.width() as f64 / width as f64;
    let scale_y = img.height() as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        for x in 0..width {
            let sx = (x as f64 + 0.5) * scale_x - 0.5;
            for ch in 0..c {
                out.push(sample_bilinear(img, sx, sy, ch).clamp(0.0, 1.0));
            }
        }
    }
    Ok(Image::from_parts_unchecked(width, height, c, out))
}
