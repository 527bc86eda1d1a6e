use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Size and width knobs for the UNET classifier.
///
/// Channel widths follow `base_filters · 2^level`: the defaults give encoder
/// blocks of 64, 128 and 256 filters and a 512-filter bottleneck.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UNetConfig {
    /// `(height, width)` of the input image.
    pub input_hw: (usize, usize),
    pub input_channels: usize,
    pub base_filters: usize,
    pub num_classes: usize,
    /// Hidden dense widths between the flatten and the class layer.
    pub head_widths: Vec<usize>,
    /// Number of encoder blocks (and decoder blocks).
    pub depth: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            input_hw: (256, 256),
            input_channels: 1,
            base_filters: 64,
            num_classes: 5,
            head_widths: vec![256, 128],
            depth: 3,
        }
    }
}

impl UNetConfig {
    /// Default topology at a square input size and base width.
    pub fn scaled(input_size: usize, base_filters: usize) -> Self {
        Self {
            input_hw: (input_size, input_size),
            base_filters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.depth == 0 || self.depth > 8 {
            return bad(format!("depth must be 1..=8, got {}", self.depth));
        }
        let step = 1usize << self.depth;
        let (h, w) = self.input_hw;
        if h == 0 || w == 0 || h % step != 0 || w % step != 0 {
            return bad(format!("input size {h}x{w} is not divisible by 2^{} = {step}", self.depth));
        }
        if self.input_channels == 0 {
            return bad("input_channels must be >= 1".into());
        }
        if self.base_filters == 0 {
            return bad("base_filters must be >= 1".into());
        }
        if self.base_filters.checked_shl(self.depth as u32).is_none() {
            return bad(format!("base_filters {} overflows at depth {}", self.base_filters, self.depth));
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        if self.head_widths.contains(&0) {
            return bad("head widths must be >= 1".into());
        }
        Ok(())
    }

    /// Filters of encoder/decoder level `level` (0-based); `depth` is the bottleneck.
    pub fn filters_at(&self, level: usize) -> usize {
        self.base_filters << level
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    UNet,
    /// Two UNET bodies in series sharing one classification head.
    StackedUNet,
}

impl ModelKind {
    pub fn bodies(self) -> usize {
        match self {
            ModelKind::UNet => 1,
            ModelKind::StackedUNet => 2,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::UNet => "UNET",
            ModelKind::StackedUNet => "Stacked UNET",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::UNet => "unet",
            ModelKind::StackedUNet => "stacked_unet",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(ModelKind::UNet),
            "stacked_unet" => Ok(ModelKind::StackedUNet),
            other => Err(Error::Config(format!("unknown model '{other}' (expected unet or stacked_unet)"))),
        }
    }
}
