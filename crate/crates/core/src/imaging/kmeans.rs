//! Colour k-means used by the colour expert.

use std::collections::HashMap;

use super::Image;
use crate::error::{Error, Result};

/// Lloyd iterations stop once no centroid moves further than this.
pub const KMEANS_TOLERANCE: f64 = 1e-4;
pub const KMEANS_MAX_ITERS: usize = 25;
/// Upper bound on the number of distinct colours scanned for seeding.
pub const SEED_SAMPLE: usize = 1024;

type Rgb = [f64; 3];

#[inline]
fn dist2(a: &Rgb, b: &Rgb) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Distinct colours in first-appearance order with their pixel counts.
fn distinct_colours(img: &Image) -> Vec<(Rgb, usize)> {
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut colours: Vec<(Rgb, usize)> = Vec::new();
    for p in img.data().chunks_exact(3) {
        let key = [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()];
        match index.get(&key) {
            Some(&i) => colours[i].1 += 1,
            None => {
                index.insert(key, colours.len());
                colours.push(([p[0], p[1], p[2]], 1));
            }
        }
    }
    colours
}

/// Farthest-pair seeding, extended by farthest-point selection for `k > 2`.
fn seed_centroids(colours: &[(Rgb, usize)], k: usize) -> Vec<Rgb> {
    let stride = colours.len().div_ceil(SEED_SAMPLE).max(1);
    let candidates: Vec<Rgb> = colours.iter().step_by(stride).map(|c| c.0).collect();

    let (mut best, mut pair) = (-1.0, (0, 0));
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            let d = dist2(&candidates[i], &candidates[j]);
            if d > best {
                best = d;
                pair = (i, j);
            }
        }
    }
    let mut seeds = vec![candidates[pair.0], candidates[pair.1]];
    while seeds.len() < k {
        let next = candidates
            .iter()
            .map(|c| seeds.iter().map(|s| dist2(c, s)).fold(f64::INFINITY, f64::min))
            .enumerate()
            .fold((0, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
            .0;
        seeds.push(candidates[next]);
    }
    seeds
}

fn nearest(centroids: &[Rgb], c: &Rgb) -> usize {
    let mut best = 0;
    let mut best_d = dist2(&centroids[0], c);
    for (i, centroid) in centroids.iter().enumerate().skip(1) {
        let d = dist2(centroid, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Share of pixels in the largest of `k` colour clusters.
///
/// Lloyd's algorithm over RGB vectors with deterministic farthest-pair
/// seeding. Images with fewer than `k` distinct colours return `1.0`.
pub fn dominant_cluster_fraction(img: &Image, k: usize) -> Result<f64> {
    img.expect_channels(3)?;
    if k < 2 {
        return Err(Error::Config(format!("cluster count must be >= 2, got {k}")));
    }
    let colours = distinct_colours(img);
    if colours.len() < k {
        return Ok(1.0);
    }
    let total: usize = colours.iter().map(|c| c.1).sum();
    let mut centroids = seed_centroids(&colours, k);
    let mut assignment = vec![0usize; colours.len()];
    let mut sizes = vec![0usize; k];

    for _ in 0..KMEANS_MAX_ITERS {
        sizes.iter_mut().for_each(|s| *s = 0);
        let mut sums = vec![[0.0; 3]; k];
        for (i, (c, n)) in colours.iter().enumerate() {
            let j = nearest(&centroids, c);
            assignment[i] = j;
            sizes[j] += n;
            for ch in 0..3 {
                sums[j][ch] += c[ch] * *n as f64;
            }
        }
        let mut moved = 0.0f64;
        for j in 0..k {
            if sizes[j] == 0 {
                continue;
            }
            let updated = sums[j].map(|s| s / sizes[j] as f64);
            moved = moved.max(dist2(&updated, &centroids[j]).sqrt());
            centroids[j] = updated;
        }
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    let largest = *sizes.iter().max().expect("k >= 2");
    Ok(largest as f64 / total as f64)
}
