use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::glyph::CLASSES;
use crate::style::StyleRng;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Base intensity of glyph pixels before styling.
pub const FOREGROUND: f64 = 0.85;
/// Base intensity of background pixels before styling.
pub const BACKGROUND: f64 = 0.15;
pub const MIN_GAIN: f64 = 0.05;
/// Minimum L∞ distance between palettes that must stay apart.
pub const PALETTE_GAP: f64 = 0.5;

/// Per-channel affine style: `gain · base + bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Palette {
    pub gain: [f64; 3],
    pub bias: [f64; 3],
}

impl Palette {
    /// The palette that paints background pixels `bg` and glyph pixels `fg`.
    pub fn from_colors(fg: [f64; 3], bg: [f64; 3]) -> Self {
        let mut gain = [0.0; 3];
        let mut bias = [0.0; 3];
        for c in 0..3 {
            gain[c] = (fg[c] - bg[c]) / (FOREGROUND - BACKGROUND);
            bias[c] = bg[c] - BACKGROUND * gain[c];
        }
        Self { gain, bias }
    }

    pub const IDENTITY: Palette = Palette {
        gain: [1.0; 3],
        bias: [0.0; 3],
    };

    /// L∞ distance over the six numbers (γ, β).
    pub fn distance(&self, other: &Palette) -> f64 {
        self.gain
            .iter()
            .chain(&self.bias)
            .zip(other.gain.iter().chain(&other.bias))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// Class k is always painted with palette k.
    ClassCorrelated,
    /// Each sample draws a palette uniformly, independent of its class.
    Decorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: usize,
    pub name: String,
    pub palettes: Vec<Palette>,
    pub gain_jitter: f64,
    pub bias_jitter: f64,
    /// Inclusive range of the exponent applied after clipping.
    pub contrast: [f64; 2],
    pub correlation: Correlation,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid("domain spec", msg)
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let who = &self.name;
        if self.palettes.is_empty() {
            return Err(bad(format!("{who}: no palettes")));
        }
        for (i, p) in self.palettes.iter().enumerate() {
            if let Some(c) = p.gain.iter().position(|g| g.abs() < MIN_GAIN) {
                return Err(bad(format!("{who}: palette {i} gain[{c}] below {MIN_GAIN} in magnitude")));
            }
        }
        if !(self.gain_jitter >= 0.0 && self.bias_jitter >= 0.0) {
            return Err(bad(format!("{who}: jitter must be ≥ 0")));
        }
        let [lo, hi] = self.contrast;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(bad(format!("{who}: contrast range {lo}..{hi} must be positive and ordered")));
        }
        if self.correlation == Correlation::ClassCorrelated {
            if self.palettes.len() != CLASSES {
                return Err(bad(format!(
                    "{who}: class-correlated domains need one palette per class ({CLASSES}), got {}",
                    self.palettes.len()
                )));
            }
            for i in 0..CLASSES {
                for j in i + 1..CLASSES {
                    let d = self.palettes[i].distance(&self.palettes[j]);
                    if d < PALETTE_GAP {
                        return Err(bad(format!("{who}: palettes {i} and {j} only {d:.3} apart")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn palette_for(&self, class: usize, rng: &mut StyleRng) -> Palette {
        match self.correlation {
            Correlation::ClassCorrelated => self.palettes[class],
            Correlation::Decorrelated => self.palettes[rng.random_range(0..self.palettes.len())],
        }
    }

    /// Smallest L∞ distance between any palette here and any in `other`.
    pub fn gap_to(&self, other: &DomainSpec) -> f64 {
        self.palettes
            .iter()
            .flat_map(|a| other.palettes.iter().map(move |b| a.distance(b)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Paints a 1×H×W {0,1} mask as a 3×H×W image:
/// `clip(gain_c · (FG·mask + BG·(1 − mask)) + bias_c, 0, 1)^contrast`,
/// with gain, bias and contrast drawn around the chosen palette. Pixels are
/// rounded to `f32` so they survive a single-precision round trip exactly.
pub fn stylize(mask: &Tensor, spec: &DomainSpec, class: usize, rng: &mut StyleRng) -> Tensor {
    let palette = spec.palette_for(class, rng);
    let jitter = |rng: &mut StyleRng, std: f64| -> f64 {
        if std == 0.0 {
            0.0
        } else {
            Normal::new(0.0, std).expect("std validated").sample(rng)
        }
    };
    let mut gain = [0.0; 3];
    let mut bias = [0.0; 3];
    for c in 0..3 {
        let g = palette.gain[c] + jitter(rng, spec.gain_jitter);
        gain[c] = if g.abs() < MIN_GAIN { MIN_GAIN.copysign(palette.gain[c]) } else { g };
        bias[c] = palette.bias[c] + jitter(rng, spec.bias_jitter);
    }
    let [lo, hi] = spec.contrast;
    let gamma = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let hw = mask.numel();
    let mut out = Vec::with_capacity(3 * hw);
    for c in 0..3 {
        out.extend(mask.data().iter().map(|&m| {
            let base = FOREGROUND * m + BACKGROUND * (1.0 - m);
            let v = (gain[c] * base + bias[c]).clamp(0.0, 1.0).powf(gamma);
            f64::from(v as f32)
        }));
    }
    let side = mask.shape()[1..].to_vec();
    Tensor::new([vec![3], side].concat(), out).expect("three channels of the mask's size")
}

fn domain(id: usize, name: &str, colors: &[([f64; 3], [f64; 3])], correlation: Correlation) -> DomainSpec {
    DomainSpec {
        id,
        name: name.to_string(),
        palettes: colors.iter().map(|&(fg, bg)| Palette::from_colors(fg, bg)).collect(),
        gain_jitter: 0.05,
        bias_jitter: 0.03,
        contrast: [0.8, 1.25],
        correlation,
    }
}

/// Source domain: saturated glyphs on a dark tint of the same hue, one
/// colour per class.
pub fn source_domain() -> DomainSpec {
    let colors = [
        ([0.95, 0.15, 0.15], [0.30, 0.05, 0.05]),
        ([0.15, 0.90, 0.15], [0.05, 0.30, 0.05]),
        ([0.15, 0.20, 0.95], [0.05, 0.05, 0.30]),
        ([0.95, 0.90, 0.15], [0.30, 0.30, 0.05]),
        ([0.90, 0.15, 0.90], [0.30, 0.05, 0.30]),
        ([0.15, 0.90, 0.90], [0.05, 0.30, 0.30]),
        ([0.95, 0.95, 0.95], [0.05, 0.05, 0.05]),
    ];
    domain(0, "saturated", &colors, Correlation::ClassCorrelated)
}

/// The three unseen domains, in increasing order of shift.
pub fn target_domains() -> Vec<DomainSpec> {
    let light = [
        ([1.00, 0.95, 0.95], [0.75, 0.70, 0.70]),
        ([0.95, 1.00, 0.95], [0.70, 0.75, 0.70]),
        ([0.95, 0.95, 1.00], [0.70, 0.70, 0.75]),
        ([1.00, 1.00, 0.95], [0.75, 0.75, 0.65]),
        ([1.00, 0.95, 1.00], [0.75, 0.65, 0.75]),
        ([0.95, 1.00, 1.00], [0.65, 0.75, 0.75]),
        ([1.00, 1.00, 1.00], [0.70, 0.70, 0.70]),
    ];
    let dim = [
        ([0.50, 0.38, 0.38], [0.30, 0.25, 0.25]),
        ([0.38, 0.50, 0.38], [0.25, 0.30, 0.25]),
        ([0.38, 0.38, 0.50], [0.25, 0.25, 0.30]),
        ([0.50, 0.50, 0.38], [0.30, 0.30, 0.25]),
        ([0.50, 0.38, 0.50], [0.30, 0.25, 0.30]),
        ([0.38, 0.50, 0.50], [0.25, 0.30, 0.30]),
        ([0.46, 0.46, 0.46], [0.28, 0.28, 0.28]),
    ];
    // Neutral greys: colour carries no class signal at all.
    let grey = [
        ([0.60, 0.60, 0.60], [0.10, 0.10, 0.10]),
        ([0.65, 0.65, 0.65], [0.15, 0.15, 0.15]),
        ([0.70, 0.70, 0.70], [0.20, 0.20, 0.20]),
        ([0.75, 0.75, 0.75], [0.25, 0.25, 0.25]),
        ([0.80, 0.80, 0.80], [0.30, 0.30, 0.30]),
        ([0.85, 0.85, 0.85], [0.35, 0.35, 0.35]),
        ([0.90, 0.90, 0.90], [0.40, 0.40, 0.40]),
    ];
    vec![
        domain(1, "light", &light, Correlation::Decorrelated),
        domain(2, "dim", &dim, Correlation::Decorrelated),
        domain(3, "grey", &grey, Correlation::Decorrelated),
    ]
}

/// Mean image over a mask when the palette is applied without jitter,
/// clipping or contrast; used by the colour oracle and the bias-shift test.
pub fn expected_channel_means(palette: &Palette, coverage: f64) -> [f64; 3] {
    let base = FOREGROUND * coverage + BACKGROUND * (1.0 - coverage);
    let mut m = [0.0; 3];
    for c in 0..3 {
        m[c] = palette.gain[c] * base + palette.bias[c];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::glyph::{render_glyph, Glyph, Jitter};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn fixed(palette: Palette) -> DomainSpec {
        DomainSpec {
            id: 9,
            name: "fixed".into(),
            palettes: vec![palette],
            gain_jitter: 0.0,
            bias_jitter: 0.0,
            contrast: [1.0, 1.0],
            correlation: Correlation::Decorrelated,
        }
    }

    #[test]
    fn identity_palette_gives_a_grey_glyph() {
        let mask = render_glyph(Glyph::Cross, Jitter::NONE);
        let img = stylize(&mask, &fixed(Palette::IDENTITY), 0, &mut StyleRng::seed_from_u64(0));
        let hw = mask.numel();
        for (i, &m) in mask.data().iter().enumerate() {
            let want = f64::from((if m == 1.0 { FOREGROUND } else { BACKGROUND }) as f32);
            for c in 0..3 {
                assert_eq!(img.data()[c * hw + i], want);
            }
        }
    }

    #[test]
    fn class_correlated_samples_share_their_palette() {
        let spec = source_domain();
        let mut rng = StyleRng::seed_from_u64(3);
        for k in 0..CLASSES {
            assert_eq!(spec.palette_for(k, &mut rng), spec.palettes[k]);
        }
    }

    #[test]
    fn bias_shift_moves_channel_means_by_the_shift() {
        let mask = render_glyph(Glyph::Ring, Jitter::NONE);
        let base = Palette::from_colors([0.6, 0.5, 0.4], [0.3, 0.2, 0.1]);
        let mut shifted = base;
        shifted.bias = [base.bias[0] + 0.1, base.bias[1], base.bias[2] - 0.05];
        let mean = |p: Palette| {
            let img = stylize(&mask, &fixed(p), 0, &mut StyleRng::seed_from_u64(0));
            let hw = mask.numel();
            (0..3)
                .map(|c| img.data()[c * hw..(c + 1) * hw].iter().sum::<f64>() / hw as f64)
                .collect::<Vec<_>>()
        };
        let (a, b) = (mean(base), mean(shifted));
        assert_abs_diff_eq!(b[0] - a[0], 0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(b[1] - a[1], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b[2] - a[2], -0.05, epsilon = 1e-6);
        let coverage = mask.data().iter().sum::<f64>() / mask.numel() as f64;
        for (c, want) in expected_channel_means(&shifted, coverage).iter().enumerate() {
            assert_abs_diff_eq!(b[c], want, epsilon = 1e-6);
        }
    }

    #[test]
    fn builtin_domains_validate_and_stay_apart() {
        let src = source_domain();
        src.validate().unwrap();
        for t in target_domains() {
            t.validate().unwrap();
            let gap = t.gap_to(&src);
            assert!(gap >= PALETTE_GAP, "{} is only {gap:.3} from the source", t.name);
        }
    }

    #[test]
    fn small_gains_are_rejected() {
        let mut p = Palette::IDENTITY;
        p.gain[1] = 0.01;
        assert!(fixed(p).validate().unwrap_err().to_string().contains("gain[1]"));
    }
}
