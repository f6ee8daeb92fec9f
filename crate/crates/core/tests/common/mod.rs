//! Direct, unoptimized re-implementations shared by the oracle suites and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use eyedas_core::gbm::{GbmModel, MIN_SAMPLES_LEAF};
use eyedas_core::imaging::{Image, SSIM_C1, SSIM_C2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_gray_fn(w, h, |_, _| rng.gen())
}

pub fn random_rgb(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_rgb_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()])
}

pub fn clamped(img: &Image, x: isize, y: isize) -> f64 {
    let x = x.clamp(0, img.width() as isize - 1) as usize;
    let y = y.clamp(0, img.height() as isize - 1) as usize;
    img.get(x, y, 0)
}

/// Mean SSIM with an explicit 2-D Gaussian window and two-pass moments.
pub fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let r = 5isize;
    let mut weights = vec![vec![0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *w = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *w;
        }
    }
    let (w, h) = (a.width() as isize, a.height() as isize);
    let mut sum = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            let window = |f: &dyn Fn(usize, usize) -> f64| {
                let mut s = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let wt = weights[(dy + r) as usize][(dx + r) as usize] / total;
                        s += wt * f((cx + dx) as usize, (cy + dy) as usize);
                    }
                }
                s
            };
            let ma = window(&|x, y| a.get(x, y, 0));
            let mb = window(&|x, y| b.get(x, y, 0));
            let va = window(&|x, y| (a.get(x, y, 0) - ma).powi(2));
            let vb = window(&|x, y| (b.get(x, y, 0) - mb).powi(2));
            let cov = window(&|x, y| (a.get(x, y, 0) - ma) * (b.get(x, y, 0) - mb));
            sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            count += 1;
        }
    }
    sum / count as f64
}

pub fn naive_dct_fraction(block: &[[f64; 8]; 8]) -> f64 {
    let alpha = |u: usize| {
        if u == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        }
    };
    let (mut high, mut total) = (0.0, 0.0);
    for v in 0..8 {
        for u in 0..8 {
            let mut c = 0.0;
            for (y, row) in block.iter().enumerate() {
                for (x, &f) in row.iter().enumerate() {
                    c += f
                        * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                }
            }
            let mag = (alpha(u) * alpha(v) * c).abs();
            total += mag;
            if u + v >= 8 {
                high += mag;
            }
        }
    }
    high / total
}

pub fn normalize(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in values.iter_mut() {
        *v = if hi - lo > 1e-12 { (*v - lo) / (hi - lo) } else { 0.0 };
    }
}

/// Blur map from per-block naive DCTs; dimensions must be multiples of 8.
pub fn blur_map_oracle(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    for by in 0..h / 8 {
        for bx in 0..w / 8 {
            let mut block = [[0.0; 8]; 8];
            for (dy, row) in block.iter_mut().enumerate() {
                for (dx, v) in row.iter_mut().enumerate() {
                    *v = img.get(bx * 8 + dx, by * 8 + dy, 0);
                }
            }
            let f = naive_dct_fraction(&block);
            for y in 0..8 {
                for x in 0..8 {
                    out[(by * 8 + y) * w + bx * 8 + x] = f;
                }
            }
        }
    }
    normalize(&mut out);
    out
}

/// Sobel gradient magnitude with edge-replicated borders.
pub fn sobel_oracle(img: &Image) -> Vec<f64> {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let mut out = Vec::new();
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = clamped(img, x + i as isize - 1, y + j as isize - 1);
                    gx += kx[j][i] * v;
                    gy += ky[j][i] * v;
                }
            }
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// 4-neighbour Laplacian over interior pixels.
pub fn laplacian_oracle(img: &Image) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let v = |dx: isize, dy: isize| img.get((x as isize + dx) as usize, (y as isize + dy) as usize, 0);
            out.push(v(-1, 0) + v(1, 0) + v(0, -1) + v(0, 1) - 4.0 * v(0, 0));
        }
    }
    out
}

pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn noisy_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 3 != 0;
        let shift = if y { 0.35 } else { 0.0 };
        rows.push((0..d).map(|_| rng.gen::<f64>() + shift).collect());
        labels.push(y);
    }
    (rows, labels)
}

/// One boosting round with depth 1 and learning rate 1, recomputed by hand.
pub fn single_stump_oracle(xs: &[f64], ys: &[bool]) -> impl Fn(f64) -> f64 {
    let n = xs.len() as f64;
    let p = ys.iter().filter(|&&y| y).count() as f64 / n;
    let base = (p / (1.0 - p)).ln();
    let g: Vec<f64> = ys.iter().map(|&y| p - if y { 1.0 } else { 0.0 }).collect();
    let h = p * (1.0 - p);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let g_total: f64 = g.iter().sum();
    let h_total = h * n;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in MIN_SAMPLES_LEAF..=(xs.len() - MIN_SAMPLES_LEAF) {
        let (lo, hi) = (xs[order[k - 1]], xs[order[k]]);
        if lo == hi {
            continue;
        }
        let gl: f64 = order[..k].iter().map(|&i| g[i]).sum();
        let hl = h * k as f64;
        let (gr, hr) = (g_total - gl, h_total - hl);
        let gain = gl * gl / hl + gr * gr / hr - g_total * g_total / h_total;
        if best.map_or(true, |b| gain > b.0) {
            best = Some((gain, (lo + hi) / 2.0, -gl / hl, -gr / hr));
        }
    }
    let (_, thr, left, right) = best.unwrap();
    move |x| base + if x < thr { left } else { right }
}

pub fn value(model: &GbmModel, x: &[f64], background: &[Vec<f64>], coalition: &[bool]) -> f64 {
    let total: f64 = background
        .iter()
        .map(|b| {
            let hybrid: Vec<f64> = (0..x.len()).map(|j| if coalition[j] { x[j] } else { b[j] }).collect();
            model.margin(&hybrid).unwrap()
        })
        .sum();
    total / background.len() as f64
}

pub fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut tail in permutations(rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Shapley values as the average marginal contribution over every feature ordering.
pub fn permutation_oracle(model: &GbmModel, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let orders = permutations((0..n).collect());
    let mut phi = vec![0.0; n];
    for order in &orders {
        let mut coalition = vec![false; n];
        let mut before = value(model, x, background, &coalition);
        for &j in order {
            coalition[j] = true;
            let after = value(model, x, background, &coalition);
            phi[j] += after - before;
            before = after;
        }
    }
    phi.iter().map(|p| p / orders.len() as f64).collect()
}
