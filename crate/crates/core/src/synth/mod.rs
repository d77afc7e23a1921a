//! Synthetic benchmark generation with aligned text, attribute and label
//! conditions.
//!
//! A univariate sample is the sum of a trend, a seasonal sinusoid, local
//! shapelets confined to three equal segments, a high-frequency sinusoid and
//! Gaussian noise. The multivariate variant adds a second variable derived
//! from the first by a flip or a circular shift.

mod caption;
mod components;
mod dataset;

pub use caption::render_caption;
pub use components::{
    apply_mv_transform, compose_univariate, inject_shapelets, noise_component, noise_with_sigma,
    place_shapelets, recompose_deterministic, sample_segment_labels, shapelet_template,
    sinusoid_component, trend_component, Composition, ComposeOptions, SampleTrace, ShapeletPlacement,
};
pub use dataset::{build_synth_dataset, synth_schema, SplitAssignment, SynthDataset, DEFAULT_LENGTH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendType {
    Linear,
    Quadratic,
    Exponential,
    Logistic,
}

impl TrendType {
    pub const ALL: [TrendType; 4] = [Self::Linear, Self::Quadratic, Self::Exponential, Self::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
            Self::Exponential => "exponential",
            Self::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendDirection {
    Up,
    Down,
}

impl TrendDirection {
    pub const ALL: [TrendDirection; 2] = [Self::Up, Self::Down];

    pub fn name(self) -> &'static str {
        match self {
            Self::Up => "up",
            Self::Down => "down",
        }
    }
}

pub const SEASON_CYCLES: [u32; 4] = [0, 1, 2, 4];
pub const HF_CYCLES: [u32; 4] = [0, 16, 32, 64];
pub const N_SEGMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimaryAttrs {
    pub trend_type: TrendType,
    pub trend_direction: TrendDirection,
    pub season_cycles: u32,
}

impl PrimaryAttrs {
    pub fn new(trend_type: TrendType, trend_direction: TrendDirection, season_cycles: u32) -> Result<Self> {
        if !SEASON_CYCLES.contains(&season_cycles) {
            return Err(Error::invalid(format!("season cycles must be one of {SEASON_CYCLES:?}, got {season_cycles}")));
        }
        Ok(Self { trend_type, trend_direction, season_cycles })
    }

    /// All 32 primary combinations in lexicographic (type, direction, cycles) order.
    pub fn all() -> Vec<PrimaryAttrs> {
        let mut out = Vec::with_capacity(32);
        for &trend_type in &TrendType::ALL {
            for &trend_direction in &TrendDirection::ALL {
                for &season_cycles in &SEASON_CYCLES {
                    out.push(PrimaryAttrs { trend_type, trend_direction, season_cycles });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shapelet {
    None,
    SinglePeak,
    Sag,
    DoublePeaks,
}

impl Shapelet {
    pub const ALL: [Shapelet; 4] = [Self::None, Self::SinglePeak, Self::Sag, Self::DoublePeaks];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::SinglePeak => "single_peak",
            Self::Sag => "sag",
            Self::DoublePeaks => "double_peaks",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecondaryAttrs {
    pub hf_cycles: u32,
    pub segment_shapelets: [Shapelet; N_SEGMENTS],
}

impl SecondaryAttrs {
    pub fn new(hf_cycles: u32, segment_shapelets: [Shapelet; N_SEGMENTS]) -> Result<Self> {
        if !HF_CYCLES.contains(&hf_cycles) {
            return Err(Error::invalid(format!("hf cycles must be one of {HF_CYCLES:?}, got {hf_cycles}")));
        }
        Ok(Self { hf_cycles, segment_shapelets })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MvKind {
    XFlip,
    YFlip,
    ShiftForward,
    ShiftBackward,
}

impl MvKind {
    pub const ALL: [MvKind; 4] = [Self::XFlip, Self::YFlip, Self::ShiftForward, Self::ShiftBackward];

    pub fn name(self) -> &'static str {
        match self {
            Self::XFlip => "x_flip",
            Self::YFlip => "y_flip",
            Self::ShiftForward => "shift_forward",
            Self::ShiftBackward => "shift_backward",
        }
    }

    pub fn is_shift(self) -> bool {
        matches!(self, Self::ShiftForward | Self::ShiftBackward)
    }
}

pub const MIN_SHIFT: usize = 20;
pub const MAX_SHIFT: usize = 40;

/// Rule deriving the second variable from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MvTransform {
    pub kind: MvKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_distance: Option<usize>,
}

impl MvTransform {
    pub fn flip(kind: MvKind) -> Result<Self> {
        if kind.is_shift() {
            return Err(Error::invalid("shift transforms need a distance"));
        }
        Ok(Self { kind, shift_distance: None })
    }

    pub fn shift(kind: MvKind, distance: usize) -> Result<Self> {
        let t = Self { kind, shift_distance: Some(distance) };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        match (self.kind.is_shift(), self.shift_distance) {
            (true, Some(d)) if (MIN_SHIFT..=MAX_SHIFT).contains(&d) => Ok(()),
            (true, Some(d)) => Err(Error::invalid(format!("shift distance {d} outside [{MIN_SHIFT}, {MAX_SHIFT}]"))),
            (true, None) => Err(Error::invalid("shift transforms need a distance")),
            (false, None) => Ok(()),
            (false, Some(_)) => Err(Error::invalid("flip transforms take no distance")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthVariant {
    U,
    M,
}

impl SynthVariant {
    pub fn n_features(self) -> usize {
        match self {
            Self::U => 1,
            Self::M => 2,
        }
    }
}
