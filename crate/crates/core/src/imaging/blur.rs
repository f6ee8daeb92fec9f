//! Block-DCT blur map.
//!
//! Each 8x8 block (edge-replicated up to a multiple of 8) is scored by the
//! share of its orthonormal DCT-II magnitude carried by the high-frequency
//! coefficients `u + v >= 8`. Sharp regions keep a large share, defocused
//! regions lose it. Scores are broadcast to the block's pixels and min-max
//! normalized over the image.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{min_max_normalize, Image, PlaneRef, ScalarMap};
use crate::error::Result;

pub const BLOCK: usize = 8;
const HIGH_FREQ_INDEX_SUM: usize = 8;

/// `basis[u][i] = alpha(u) * cos((2i + 1) u pi / 16)`.
fn dct_basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut basis = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (u, row) in basis.iter_mut().enumerate() {
            let alpha = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (i, b) in row.iter_mut().enumerate() {
                *b = alpha * ((2 * i + 1) as f64 * u as f64 * PI / (2.0 * n)).cos();
            }
        }
        basis
    })
}

/// High-frequency magnitude share of one 8x8 block (row-major, `block[y][x]`).
pub fn block_high_frequency_fraction(block: &[[f64; BLOCK]; BLOCK]) -> f64 {
    let first = block[0][0];
    if block.iter().flatten().all(|&v| v == first) {
        return 0.0;
    }
    let basis = dct_basis();
    // Rows first: tmp[y][u] = sum_x basis[u][x] * block[y][x].
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[y][u] = (0..BLOCK).map(|x| basis[u][x] * block[y][x]).sum();
        }
    }
    let mut total = 0.0;
    let mut high = 0.0;
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            let coeff: f64 = (0..BLOCK).map(|y| basis[v][y] * tmp[y][u]).sum();
            let mag = coeff.abs();
            total += mag;
            if u + v >= HIGH_FREQ_INDEX_SUM {
                high += mag;
            }
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

fn blur_map_plane(plane: PlaneRef<'_>) -> Vec<f64> {
    let (w, h) = (plane.width, plane.height);
    let blocks_x = w.div_ceil(BLOCK);
    let blocks_y = h.div_ceil(BLOCK);
    let mut out = vec![0.0; w * h];
    let mut block = [[0.0; BLOCK]; BLOCK];
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            for (dy, row) in block.iter_mut().enumerate() {
                for (dx, v) in row.iter_mut().enumerate() {
                    *v = plane.at_clamped((bx * BLOCK + dx) as isize, (by * BLOCK + dy) as isize);
                }
            }
            let score = block_high_frequency_fraction(&block);
            for y in by * BLOCK..((by + 1) * BLOCK).min(h) {
                for x in bx * BLOCK..((bx + 1) * BLOCK).min(w) {
                    out[y * w + x] = score;
                }
            }
        }
    }
    min_max_normalize(&mut out);
    out
}

/// Per-block sharpness field of a grayscale image; higher means sharper.
///
/// A constant image yields an all-zero map.
pub fn blur_map(img: &Image) -> Result<ScalarMap> {
    let plane = img.as_plane()?;
    ScalarMap::new(plane.width, plane.height, blur_map_plane(plane))
}
