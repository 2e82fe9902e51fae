use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::style::StyleRng;
use crate::tensor::Tensor;

pub const IMAGE_SIZE: usize = 32;
pub const CLASSES: usize = 7;
/// Half-size of every glyph's bounding box at scale 1, in pixels.
pub const GLYPH_RADIUS: f64 = 9.0;
pub const MAX_SHIFT: i32 = 4;
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    Disk,
    Square,
    Cross,
    Triangle,
    Ring,
    HorizontalStripes,
    VerticalStripes,
}

impl Glyph {
    pub const ALL: [Glyph; CLASSES] = [
        Self::Disk,
        Self::Square,
        Self::Cross,
        Self::Triangle,
        Self::Ring,
        Self::HorizontalStripes,
        Self::VerticalStripes,
    ];

    pub fn of_class(k: usize) -> Option<Self> {
        Self::ALL.get(k).copied()
    }

    /// Membership test in glyph coordinates, where the bounding box is [−1, 1]².
    fn contains(self, u: f64, v: f64) -> bool {
        let inside = u.abs() <= 1.0 && v.abs() <= 1.0;
        let band = |t: f64| ((t + 1.0) * 2.5).floor().min(4.0) as i32 % 2 == 0;
        match self {
            Self::Disk => u * u + v * v <= 1.0,
            Self::Square => u.abs() <= 0.8 && v.abs() <= 0.8,
            Self::Cross => inside && (u.abs() <= 0.25 || v.abs() <= 0.25),
            Self::Triangle => inside && u.abs() <= (v + 1.0) / 2.0,
            Self::Ring => (0.3025..=1.0).contains(&(u * u + v * v)),
            Self::HorizontalStripes => inside && band(v),
            Self::VerticalStripes => inside && band(u),
        }
    }
}

/// Placement of a glyph: integer pixel shift of its centre and a size factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub dx: i32,
    pub dy: i32,
    pub scale: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        dx: 0,
        dy: 0,
        scale: 1.0,
    };

    pub fn sample(rng: &mut StyleRng) -> Self {
        Self {
            dx: rng.random_range(-MAX_SHIFT..=MAX_SHIFT),
            dy: rng.random_range(-MAX_SHIFT..=MAX_SHIFT),
            scale: rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1),
        }
    }
}

/// Binary mask of `glyph` centred at `(cx, cy)` with half-size `r`, sampled at
/// pixel centres. Row-major, `IMAGE_SIZE²` entries.
pub fn rasterize(glyph: Glyph, cx: f64, cy: f64, r: f64) -> Vec<f64> {
    let n = IMAGE_SIZE;
    let mut mask = vec![0.0; n * n];
    for row in 0..n {
        let v = (row as f64 + 0.5 - cy) / r;
        for col in 0..n {
            let u = (col as f64 + 0.5 - cx) / r;
            if glyph.contains(u, v) {
                mask[row * n + col] = 1.0;
            }
        }
    }
    mask
}

pub fn render_glyph(glyph: Glyph, jitter: Jitter) -> Tensor {
    let centre = IMAGE_SIZE as f64 / 2.0;
    let mask = rasterize(
        glyph,
        centre + f64::from(jitter.dx),
        centre + f64::from(jitter.dy),
        GLYPH_RADIUS * jitter.scale,
    );
    Tensor::new(vec![1, IMAGE_SIZE, IMAGE_SIZE], mask).expect("mask has IMAGE_SIZE² pixels")
}

/// 1×32×32 {0, 1} mask of class `k` with random placement.
///
/// # Panics
/// If `k ≥ CLASSES`.
pub fn render_content(k: usize, rng: &mut StyleRng) -> (Tensor, Jitter) {
    let glyph = Glyph::of_class(k).unwrap_or_else(|| panic!("class {k} out of range 0..{CLASSES}"));
    let jitter = Jitter::sample(rng);
    (render_glyph(glyph, jitter), jitter)
}
