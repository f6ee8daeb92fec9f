//! Mean structural similarity over a sliding Gaussian window.
//!
//! Uses the reference configuration of Wang et al. (2004): an 11x11 Gaussian
//! window with sigma 1.5, `K1 = 0.01`, `K2 = 0.03` on a dynamic range of 1.0.
//! Only windows that lie fully inside the image are averaged.

use super::{filter::gaussian_kernel, require_min_size, PlaneRef};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Horizontal then vertical "valid" filtering; output is `(w-k+1) x (h-k+1)`.
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (i, t) in taps.iter().enumerate() {
            let src = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Mean SSIM of two same-shaped planes. Symmetric in its arguments and exactly
/// `1.0` for identical inputs.
pub fn ssim(a: PlaneRef<'_>, b: PlaneRef<'_>) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    require_min_size(a.width, a.height, SSIM_WINDOW)?;
    let (w, h) = (a.width, a.height);
    let taps = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW / 2);

    let aa: Vec<f64> = a.data.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.data.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.data.iter().zip(b.data).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(a.data, w, h, &taps);
    let mu_b = filter_valid(b.data, w, h, &taps);
    let e_aa = filter_valid(&aa, w, h, &taps);
    let e_bb = filter_valid(&bb, w, h, &taps);
    let e_ab = filter_valid(&ab, w, h, &taps);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * (ma * mb) + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
        total += (num / den).clamp(-1.0, 1.0);
    }
    Ok(total / mu_a.len() as f64)
}
