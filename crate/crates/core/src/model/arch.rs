//! Layer topology and per-node output shapes, computed without allocating
//! any parameters. The full-size default model has a 4194304 x 256 dense weight,
//! so summaries and checkpoint validation work from this description alone.

use std::fmt;

use super::{ModelKind, UNetConfig};
use crate::error::{shape_err, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Input,
    /// 3x3 'same' convolution followed by ReLU.
    Conv { c_in: usize, c_out: usize },
    MaxPool,
    /// 2x2 stride-2 transposed convolution, no activation.
    TransposeConv { c_in: usize, c_out: usize },
    /// Appends the output of node `skip` to the running feature map's channels.
    Concat { skip: usize },
    Flatten,
    Dense { n_in: usize, n_out: usize, relu: bool },
}

impl LayerKind {
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv { .. } => "conv3x3+relu",
            LayerKind::MaxPool => "maxpool2x2",
            LayerKind::TransposeConv { .. } => "convT2x2/2",
            LayerKind::Concat { .. } => "concat",
            LayerKind::Flatten => "flatten",
            LayerKind::Dense { relu: true, .. } => "dense+relu",
            LayerKind::Dense { relu: false, .. } => "dense",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: LayerKind,
    /// Per-sample output extents: `[h, w, c]` or `[features]`.
    pub output: Vec<usize>,
}

impl Node {
    pub fn parameter_specs(&self) -> Vec<ParamSpec> {
        let spec = |suffix: &str, dims: Vec<usize>, fan_in: usize| ParamSpec {
            name: format!("{}.{suffix}", self.name),
            dims,
            fan_in,
        };
        match self.kind {
            LayerKind::Conv { c_in, c_out } => vec![
                spec("kernel", vec![3, 3, c_in, c_out], 9 * c_in),
                spec("bias", vec![c_out], 0),
            ],
            LayerKind::TransposeConv { c_in, c_out } => vec![
                spec("kernel", vec![2, 2, c_out, c_in], c_in),
                spec("bias", vec![c_out], 0),
            ],
            LayerKind::Dense { n_in, n_out, .. } => vec![
                spec("weight", vec![n_in, n_out], n_in),
                spec("bias", vec![n_out], 0),
            ],
            _ => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_specs().iter().map(ParamSpec::numel).sum()
    }
}

/// A named parameter tensor. `fan_in == 0` marks a zero-initialized bias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Topologically ordered layer list with skip wiring. Each node consumes
/// the previous node's output; `Concat` nodes additionally read their skip
/// source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    kind: ModelKind,
    config: UNetConfig,
    nodes: Vec<Node>,
    /// `(source, concat node)` pairs.
    skips: Vec<(usize, usize)>,
}

impl Architecture {
    pub fn new(kind: ModelKind, config: &UNetConfig) -> Result<Self> {
        config.validate()?;
        let (h, w) = config.input_hw;
        let mut arch = Self {
            kind,
            config: config.clone(),
            nodes: vec![Node {
                name: "input".into(),
                kind: LayerKind::Input,
                output: vec![h, w, config.input_channels],
            }],
            skips: Vec::new(),
        };
        match kind {
            ModelKind::UNet => arch.push_body("")?,
            ModelKind::StackedUNet => {
                arch.push_body("unet1.")?;
                arch.push_body("unet2.")?;
            }
        }
        arch.push_head()?;
        Ok(arch)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn skips(&self) -> &[(usize, usize)] {
        &self.skips
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Per-sample input extents `[h, w, c]`.
    pub fn input_dims(&self) -> &[usize] {
        &self.nodes[0].output
    }

    pub fn parameter_specs(&self) -> Vec<ParamSpec> {
        self.nodes.iter().flat_map(Node::parameter_specs).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.nodes.iter().map(Node::parameter_count).sum()
    }

    /// Number of bottleneck stages (one per UNET body).
    pub fn bottleneck_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.name.ends_with("bottleneck.conv1"))
            .count()
    }

    /// Number of classification heads (flatten layers).
    pub fn head_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == LayerKind::Flatten)
            .count()
    }

    pub fn ledger(&self) -> ShapeLedger<'_> {
        ShapeLedger { arch: self }
    }

    fn current(&self) -> &[usize] {
        &self.nodes.last().expect("input node always present").output
    }

    fn push(&mut self, name: String, kind: LayerKind, output: Vec<usize>) -> usize {
        self.nodes.push(Node { name, kind, output });
        self.nodes.len() - 1
    }

    fn push_conv(&mut self, name: String, c_out: usize) -> usize {
        let (h, w, c_in) = hwc(self.current());
        self.push(name, LayerKind::Conv { c_in, c_out }, vec![h, w, c_out])
    }

    fn push_body(&mut self, prefix: &str) -> Result<()> {
        let depth = self.config.depth;
        let mut skip_sources = Vec::with_capacity(depth);
        for level in 0..depth {
            let f = self.config.filters_at(level);
            let block = format!("{prefix}enc{}", level + 1);
            self.push_conv(format!("{block}.conv1"), f);
            let src = self.push_conv(format!("{block}.conv2"), f);
            skip_sources.push(src);
            let (h, w, c) = hwc(self.current());
            self.push(format!("{block}.pool"), LayerKind::MaxPool, vec![h / 2, w / 2, c]);
        }
        let f = self.config.filters_at(depth);
        self.push_conv(format!("{prefix}bottleneck.conv1"), f);
        self.push_conv(format!("{prefix}bottleneck.conv2"), f);
        for (j, level) in (0..depth).rev().enumerate() {
            let f = self.config.filters_at(level);
            let block = format!("{prefix}dec{}", j + 1);
            let (h, w, c_in) = hwc(self.current());
            self.push(
                format!("{block}.tconv"),
                LayerKind::TransposeConv { c_in, c_out: f },
                vec![2 * h, 2 * w, f],
            );
            let src = skip_sources[level];
            let (sh, sw, sc) = hwc(&self.nodes[src].output);
            let (h, w, c) = hwc(self.current());
            if (sh, sw) != (h, w) {
                return Err(shape_err!(
                    "skip from {} is {sh}x{sw}, decoder {block} is {h}x{w}",
                    self.nodes[src].name
                ));
            }
            let dst = self.push(format!("{block}.concat"), LayerKind::Concat { skip: src }, vec![h, w, c + sc]);
            self.skips.push((src, dst));
            self.push_conv(format!("{block}.conv"), f);
        }
        Ok(())
    }

    fn push_head(&mut self) -> Result<()> {
        let mut features: usize = self.current().iter().product();
        self.push("head.flatten".into(), LayerKind::Flatten, vec![features]);
        let widths: Vec<(usize, bool)> = self
            .config
            .head_widths
            .iter()
            .map(|&w| (w, true))
            .chain(std::iter::once((self.config.num_classes, false)))
            .collect();
        for (i, (n_out, relu)) in widths.into_iter().enumerate() {
            self.push(
                format!("head.dense{}", i + 1),
                LayerKind::Dense { n_in: features, n_out, relu },
                vec![n_out],
            );
            features = n_out;
        }
        Ok(())
    }
}

fn hwc(dims: &[usize]) -> (usize, usize, usize) {
    match dims {
        &[h, w, c] => (h, w, c),
        _ => unreachable!("spatial node with non-spatial output {dims:?}"),
    }
}

/// Table of every node's output extents and parameter count.
pub struct ShapeLedger<'a> {
    arch: &'a Architecture,
}

impl ShapeLedger<'_> {
    pub fn rows(&self) -> impl Iterator<Item = (&Node, String, usize)> {
        self.arch
            .nodes
            .iter()
            .map(|n| (n, format_extent(&n.output), n.parameter_count()))
    }
}

/// `256×256×64` for spatial maps, plain count for vectors.
pub fn format_extent(dims: &[usize]) -> String {
    dims.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("×")
}

impl fmt::Display for ShapeLedger<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:<14} {:>16} {:>14}", "layer", "op", "output", "params")?;
        for (node, extent, params) in self.rows() {
            writeln!(f, "{:<28} {:<14} {:>16} {:>14}", node.name, node.kind.label(), extent, params)?;
        }
        write!(f, "total parameters: {}", self.arch.parameter_count())
    }
}
