//! Reference classifiers that bound what the benchmark can be solved with.
//!
//! [`shape_oracle`] sees only the glyph outline; [`ColorOracle`] sees only
//! per-channel mean colour. The first must succeed everywhere and the second
//! only on the source, otherwise the benchmark does not test what it claims.

use super::glyph::{rasterize, Glyph, CLASSES, IMAGE_SIZE};
use super::Split;

/// Foreground mask of a 3×32×32 image: threshold the channel with the widest
/// range at its midpoint, taking the border's majority side as background.
pub fn extract_mask(image: &[f64]) -> Vec<bool> {
    let hw = IMAGE_SIZE * IMAGE_SIZE;
    let range = |c: usize| {
        let ch = &image[c * hw..(c + 1) * hw];
        let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo, lo, hi)
    };
    let best = (0..3).max_by(|&a, &b| range(a).0.total_cmp(&range(b).0)).unwrap_or(0);
    let (_, lo, hi) = range(best);
    let mid = (lo + hi) / 2.0;
    let ch = &image[best * hw..(best + 1) * hw];
    let above: Vec<bool> = ch.iter().map(|&v| v > mid).collect();
    let n = IMAGE_SIZE;
    let border = (0..n).flat_map(|i| [i, (n - 1) * n + i, i * n, i * n + n - 1]);
    let (up, total) = border.fold((0, 0), |(u, t), i| (u + usize::from(above[i]), t + 1));
    if 2 * up > total {
        above.into_iter().map(|a| !a).collect()
    } else {
        above
    }
}

fn iou(a: &[bool], b: &[f64]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let y = y > 0.5;
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Class whose glyph, re-rendered at the placement read off the mask's
/// bounding box, best overlaps the mask.
pub fn shape_oracle(image: &[f64]) -> usize {
    let mask = extract_mask(image);
    let n = IMAGE_SIZE;
    let (mut r0, mut r1, mut c0, mut c1) = (n, 0, n, 0);
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = (i / n, i % n);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    if r0 > r1 {
        return 0;
    }
    let cy = (r0 + r1 + 1) as f64 / 2.0;
    let cx = (c0 + c1 + 1) as f64 / 2.0;
    // Pixel centres under-read the half-size by up to one pixel.
    let half = (r1 - r0).max(c1 - c0) as f64 / 2.0;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, glyph) in Glyph::ALL.iter().enumerate() {
        // The square fills only 0.8 of its nominal box.
        let extent = if *glyph == Glyph::Square { 0.8 } else { 1.0 };
        for dr in [0.25, 0.5, 0.75] {
            let r = (half + dr) / extent;
            for oy in [-0.5, 0.0, 0.5] {
                for ox in [-0.5, 0.0, 0.5] {
                    let score = iou(&mask, &rasterize(*glyph, cx + ox, cy + oy, r));
                    if score > best.0 {
                        best = (score, k);
                    }
                }
            }
        }
    }
    best.1
}

fn channel_means(image: &[f64]) -> [f64; 3] {
    let hw = image.len() / 3;
    let mut m = [0.0; 3];
    for (c, v) in m.iter_mut().enumerate() {
        *v = image[c * hw..(c + 1) * hw].iter().sum::<f64>() / hw as f64;
    }
    m
}

/// Nearest-centroid classifier on per-channel mean colour.
#[derive(Debug, Clone)]
pub struct ColorOracle {
    centroids: Vec<[f64; 3]>,
}

impl ColorOracle {
    /// Centroids are the class-wise mean colours of `split`; on a
    /// class-correlated split these are the palettes' mean colours.
    pub fn fit(split: &Split) -> Self {
        let per = split.images.numel() / split.len().max(1);
        let mut sums = vec![[0.0; 3]; CLASSES];
        let mut counts = vec![0usize; CLASSES];
        for (i, &l) in split.labels.iter().enumerate() {
            let m = channel_means(&split.images.data()[i * per..(i + 1) * per]);
            for c in 0..3 {
                sums[l][c] += m[c];
            }
            counts[l] += 1;
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| s.map(|v| v / n.max(1) as f64))
            .collect();
        Self { centroids }
    }

    pub fn predict(&self, image: &[f64]) -> usize {
        let m = channel_means(image);
        let dist = |c: &[f64; 3]| (0..3).map(|i| (c[i] - m[i]).powi(2)).sum::<f64>();
        (0..self.centroids.len())
            .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])))
            .unwrap_or(0)
    }
}

/// Percentage of `split` that `classify` labels correctly.
pub fn oracle_accuracy(split: &Split, classify: impl Fn(&[f64]) -> usize) -> f64 {
    let per = split.images.numel() / split.len().max(1);
    let hits = (0..split.len())
        .filter(|&i| classify(&split.images.data()[i * per..(i + 1) * per]) == split.labels[i])
        .count();
    100.0 * hits as f64 / split.len().max(1) as f64
}
