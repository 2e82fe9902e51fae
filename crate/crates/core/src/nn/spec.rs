use serde::{Deserialize, Serialize};

use crate::style::Variant;
use crate::{Error, Result};

/// The six places a perturbation module can sit, each right after the
/// activation of its stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertionPoint {
    Conv1,
    Pool1,
    Block1,
    Block2,
    Block3,
    Block4,
}

impl InsertionPoint {
    pub const ALL: [InsertionPoint; 6] = [
        Self::Conv1,
        Self::Pool1,
        Self::Block1,
        Self::Block2,
        Self::Block3,
        Self::Block4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Conv1 => "conv1",
            Self::Pool1 => "pool1",
            Self::Block1 => "block1",
            Self::Block2 => "block2",
            Self::Block3 => "block3",
            Self::Block4 => "block4",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Index into [`Backbone::widths`] of the channel count seen here.
    pub fn stage(self) -> usize {
        match self {
            Self::Conv1 | Self::Pool1 => 0,
            Self::Block1 => 1,
            Self::Block2 => 2,
            Self::Block3 => 3,
            Self::Block4 => 4,
        }
    }
}

impl std::fmt::Display for InsertionPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    None,
    AdvStyle,
    Dsu,
    MixStyle,
    #[serde(rename = "padain")]
    PAdaIN,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::AdvStyle => "advstyle",
            Self::Dsu => "dsu",
            Self::MixStyle => "mixstyle",
            Self::PAdaIN => "padain",
        }
    }
}

/// Network shape, independent of any perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Backbone {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    /// Output channels of conv1 and block1..block4.
    pub widths: [usize; 5],
}

impl Default for Backbone {
    fn default() -> Self {
        Self {
            in_channels: 3,
            height: 32,
            width: 32,
            classes: 7,
            widths: [8, 16, 32, 32, 32],
        }
    }
}

/// Which perturbation runs where, and its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub kind: Method,
    pub points: Vec<InsertionPoint>,
    /// Reversal strength of the GRL in front of Σ.
    pub lambda: f64,
    pub variant: Variant,
    /// Firing probability of DSU, MixStyle and pAdaIN. AdvStyle always fires.
    pub prob: f64,
    pub mix_alpha: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kind: Method::None,
            points: vec![InsertionPoint::Conv1],
            lambda: 5.0,
            variant: Variant::Full,
            prob: 0.5,
            mix_alpha: 0.1,
        }
    }
}

impl MethodConfig {
    pub fn is_active(&self, point: InsertionPoint) -> bool {
        self.kind != Method::None && self.points.contains(&point)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub backbone: Backbone,
    pub method: MethodConfig,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid("model spec", msg)
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let b = &self.backbone;
        if b.classes < 2 {
            return Err(bad(format!("classes = {} (need at least 2)", b.classes)));
        }
        if b.in_channels == 0 {
            return Err(bad("in_channels must be positive"));
        }
        if let Some(i) = b.widths.iter().position(|&w| w == 0) {
            return Err(bad(format!("widths[{i}] must be positive")));
        }
        // Three 2×2 pools: after conv1, block1 and block2.
        if b.height / 8 == 0 || b.width / 8 == 0 {
            return Err(bad(format!(
                "input {}×{} underflows the three 2×2 pools (need at least 8×8)",
                b.height, b.width
            )));
        }
        let m = &self.method;
        if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
            return Err(bad(format!("method.lambda = {} (need a finite value ≥ 0)", m.lambda)));
        }
        if !(0.0..=1.0).contains(&m.prob) {
            return Err(bad(format!("method.prob = {} (need 0 ≤ p ≤ 1)", m.prob)));
        }
        if !(m.mix_alpha > 0.0 && m.mix_alpha.is_finite()) {
            return Err(bad(format!("method.mix_alpha = {} (need > 0)", m.mix_alpha)));
        }
        for (i, p) in m.points.iter().enumerate() {
            if m.points[..i].contains(p) {
                return Err(bad(format!("method.points lists {p} twice")));
            }
        }
        Ok(())
    }

    /// Number of scalars in the registry:
    ///
    /// `Σ_stages (9·c_in·c_out + c_out) + (w5 + 1)·K` for θ, plus per
    /// AdvStyle point `2·C` scales (`2` for the intensity-only variant).
    pub fn parameter_count(&self) -> usize {
        let b = &self.backbone;
        let mut c_in = b.in_channels;
        let mut n = 0;
        for &c_out in &b.widths {
            n += 9 * c_in * c_out + c_out;
            c_in = c_out;
        }
        n += (c_in + 1) * b.classes;
        if self.method.kind == Method::AdvStyle {
            for p in &self.method.points {
                n += match self.method.variant {
                    Variant::IntensityOnly => 2,
                    _ => 2 * b.widths[p.stage()],
                };
            }
        }
        n
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}
