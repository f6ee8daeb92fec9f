use super::{min_max_normalize, require_min_size, Image, PlaneRef, ScalarMap};
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps for `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let two_s2 = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / two_s2).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable convolution of one plane with replicated borders.
fn convolve_separable_replicate(plane: PlaneRef<'_>, taps: &[f64]) -> Vec<f64> {
    let (w, h) = (plane.width, plane.height);
    let r = taps.len() / 2;
    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * r];
    for y in 0..h {
        let row = &plane.data[y * w..(y + 1) * w];
        padded[..r].fill(row[0]);
        padded[r..r + w].copy_from_slice(row);
        padded[r + w..].fill(row[w - 1]);
        for (x, out) in tmp[y * w..(y + 1) * w].iter_mut().enumerate() {
            *out = taps.iter().zip(&padded[x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, t) in taps.iter().enumerate() {
            let sy = (y + k).saturating_sub(r).min(h - 1);
            let src = &tmp[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Gaussian blur of every channel, radius `ceil(3 sigma)`, replicated borders.
///
/// `sigma <= 0` returns a copy of the input.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let taps = gaussian_kernel(sigma, radius);
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = vec![0.0; w * h * c];
    let mut channel = vec![0.0; w * h];
    for ch in 0..c {
        for (i, v) in channel.iter_mut().enumerate() {
            *v = img.data()[i * c + ch];
        }
        let blurred = convolve_separable_replicate(
            PlaneRef {
                width: w,
                height: h,
                data: &channel,
            },
            &taps,
        );
        for (i, v) in blurred.into_iter().enumerate() {
            out[i * c + ch] = v.clamp(0.0, 1.0);
        }
    }
    Image::from_parts_unchecked(w, h, c, out)
}

/// 4-neighbour Laplacian over interior pixels, `(w-2) x (h-2)` row-major.
pub fn laplacian_response(plane: PlaneRef<'_>) -> Result<Vec<f64>> {
    require_min_size(plane.width, plane.height, 3)?;
    let (w, h) = (plane.width, plane.height);
    let mut out = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let neighbours = plane.at(x, y - 1) + plane.at(x - 1, y) + plane.at(x + 1, y) + plane.at(x, y + 1);
            out.push(neighbours - 4.0 * plane.at(x, y));
        }
    }
    Ok(out)
}

/// Variance of the Laplacian response over interior pixels.
pub fn sharpness(img: &Image) -> Result<f64> {
    let response = laplacian_response(img.as_plane()?)?;
    let n = response.len() as f64;
    let mean = response.iter().sum::<f64>() / n;
    Ok(response.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Raw Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(plane: PlaneRef<'_>) -> Result<Vec<f64>> {
    require_min_size(plane.width, plane.height, 3)?;
    let (w, h) = (plane.width, plane.height);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| plane.at_clamped(x + dx, y + dy);
            // Both sides are summed in the same order so a flat patch gives exactly 0.
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    Ok(out)
}

/// Sobel magnitude min-max normalized to `[0, 1]`.
pub fn edge_map(img: &Image) -> Result<ScalarMap> {
    let plane = img.as_plane()?;
    let mut mag = sobel_magnitude(plane)?;
    min_max_normalize(&mut mag);
    ScalarMap::new(plane.width, plane.height, mag).map_err(|e| match e {
        Error::InvalidImage(m) => Error::InvalidImage(format!("edge map: {m}")),
        other => other,
    })
}
