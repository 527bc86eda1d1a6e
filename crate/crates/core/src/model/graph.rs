use std::collections::HashMap;

use indexmap::IndexMap;

use super::arch::{Architecture, LayerKind, ParamSpec};
use super::{ModelKind, UNetConfig};
use crate::error::{shape_err, Error, Result};
use crate::ops::{
    self, conv2d_backward, conv2d_forward, conv2d_transpose_backward, conv2d_transpose_forward,
    dense_backward, dense_forward, maxpool2d_backward, maxpool2d_forward, ConvParams, ConvTape,
    DenseParams, DenseTape, PoolSpec, PoolTape, ReluTape, TransposeConvParams, TransposeConvTape,
};
use crate::tensor::{Rng, Shape, Tensor};
use crate::Scalar;

/// Parameter (or gradient) tensors by name, in topological order.
pub type ParamRegistry<T> = IndexMap<String, Tensor<T>>;

#[derive(Clone, Debug, PartialEq)]
enum LayerParams<T> {
    None,
    Conv(ConvParams<T>),
    TransposeConv(TransposeConvParams<T>),
    Dense(DenseParams<T>),
}

impl<T: Scalar> LayerParams<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv(p) => vec![&p.kernel, &p.bias],
            LayerParams::TransposeConv(p) => vec![&p.kernel, &p.bias],
            LayerParams::Dense(p) => vec![&p.weight, &p.bias],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv(p) => vec![&mut p.kernel, &mut p.bias],
            LayerParams::TransposeConv(p) => vec![&mut p.kernel, &mut p.bias],
            LayerParams::Dense(p) => vec![&mut p.weight, &mut p.bias],
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug)]
pub struct ForwardTape<T> {
    version: u64,
    batch: usize,
    nodes: Vec<NodeTape<T>>,
}

#[derive(Debug)]
enum NodeTape<T> {
    Input,
    Conv(ConvTape<T>, ReluTape),
    Pool(PoolTape),
    TransposeConv(TransposeConvTape<T>),
    Concat { main_channels: usize },
    Flatten { dims: Vec<usize> },
    Dense(DenseTape<T>, Option<ReluTape>),
}

/// A UNET or stacked-UNET classifier with its parameters.
///
/// Parameters change only through [`ModelGraph::update`], which bumps an
/// internal version so tapes recorded against older weights are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph<T> {
    arch: Architecture,
    specs: Vec<ParamSpec>,
    layers: Vec<LayerParams<T>>,
    version: u64,
}

pub fn build_unet<T: Scalar>(cfg: &UNetConfig, rng: &mut Rng) -> Result<ModelGraph<T>> {
    ModelGraph::build(ModelKind::UNet, cfg, rng)
}

pub fn build_stacked_unet<T: Scalar>(cfg: &UNetConfig, rng: &mut Rng) -> Result<ModelGraph<T>> {
    ModelGraph::build(ModelKind::StackedUNet, cfg, rng)
}

impl<T: Scalar> ModelGraph<T> {
    /// He-normal weights drawn from `rng` in topological parameter order; zero biases.
    pub fn build(kind: ModelKind, cfg: &UNetConfig, rng: &mut Rng) -> Result<Self> {
        let arch = Architecture::new(kind, cfg)?;
        let mut params = ParamRegistry::new();
        for spec in arch.parameter_specs() {
            let shape = Shape::new(&spec.dims)?;
            let t = if spec.fan_in == 0 {
                Tensor::zeros(shape)
            } else {
                Tensor::he_init(shape, spec.fan_in, rng)?
            };
            params.insert(spec.name, t);
        }
        Self::from_parameters(arch, params)
    }

    /// Assembles a model from named tensors, which must match the
    /// architecture's parameter names and shapes exactly.
    pub fn from_parameters(arch: Architecture, mut params: ParamRegistry<T>) -> Result<Self> {
        let specs = arch.parameter_specs();
        if params.len() != specs.len() {
            return Err(shape_err!("expected {} parameter tensors, got {}", specs.len(), params.len()));
        }
        let mut take = |name: String, dims: &[usize]| -> Result<Tensor<T>> {
            let t = params
                .swap_remove(&name)
                .ok_or_else(|| shape_err!("missing parameter {name}"))?;
            if t.dims() != dims {
                return Err(shape_err!("parameter {name} has shape {}, expected {dims:?}", t.shape()));
            }
            Ok(t)
        };
        let mut layers = Vec::with_capacity(arch.nodes().len());
        for node in arch.nodes() {
            let ps = node.parameter_specs();
            let layer = match node.kind {
                LayerKind::Conv { .. } => {
                    let k = take(ps[0].name.clone(), &ps[0].dims)?;
                    let b = take(ps[1].name.clone(), &ps[1].dims)?;
                    LayerParams::Conv(ConvParams::new(k, b)?)
                }
                LayerKind::TransposeConv { .. } => {
                    let k = take(ps[0].name.clone(), &ps[0].dims)?;
                    let b = take(ps[1].name.clone(), &ps[1].dims)?;
                    LayerParams::TransposeConv(TransposeConvParams::new(k, b)?)
                }
                LayerKind::Dense { .. } => {
                    let w = take(ps[0].name.clone(), &ps[0].dims)?;
                    let b = take(ps[1].name.clone(), &ps[1].dims)?;
                    LayerParams::Dense(DenseParams::new(w, b)?)
                }
                _ => LayerParams::None,
            };
            layers.push(layer);
        }
        Ok(Self { arch, specs, layers, version: 0 })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind()
    }

    pub fn config(&self) -> &UNetConfig {
        self.arch.config()
    }

    pub fn num_classes(&self) -> usize {
        self.arch.config().num_classes
    }

    /// `(name, tensor)` pairs in topological order.
    pub fn parameters(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.specs
            .iter()
            .map(|s| s.name.as_str())
            .zip(self.layers.iter().flat_map(LayerParams::tensors))
    }

    pub fn parameter(&self, name: &str) -> Option<&Tensor<T>> {
        self.parameters().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    /// Sum of the lengths of all stored parameter tensors.
    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|(_, t)| t.len()).sum()
    }

    /// Mutable access to all parameters. Shapes must be preserved; any tape
    /// recorded before the update becomes stale.
    pub fn update<F>(&mut self, f: F) -> Result<()>
    where
        F: FnOnce(&mut [(&str, &mut Tensor<T>)]) -> Result<()>,
    {
        self.version += 1;
        let mut view: Vec<(&str, &mut Tensor<T>)> = self
            .specs
            .iter()
            .map(|s| s.name.as_str())
            .zip(self.layers.iter_mut().flat_map(LayerParams::tensors_mut))
            .collect();
        f(&mut view)?;
        for ((name, t), spec) in view.iter().zip(&self.specs) {
            if t.dims() != spec.dims {
                return Err(shape_err!("update changed the shape of {name} to {}", t.shape()));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let want = self.arch.input_dims();
        match x.dims() {
            [b, rest @ ..] if rest == want => Ok(*b),
            _ => Err(shape_err!("model expects input [b,{}], got {}", want.iter().map(usize::to_string).collect::<Vec<_>>().join(","), x.shape())),
        }
    }

    /// Forward pass returning `[b, num_classes]` logits and the tape.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardTape<T>)> {
        let batch = self.check_input(x)?;
        let nodes = self.arch.nodes();
        let skip_sources: Vec<usize> = self.arch.skips().iter().map(|&(s, _)| s).collect();
        let mut saved: HashMap<usize, Tensor<T>> = HashMap::new();
        let mut tapes = Vec::with_capacity(nodes.len());
        let mut cur = x.clone();
        tapes.push(NodeTape::Input);

        for (i, (node, layer)) in nodes.iter().zip(&self.layers).enumerate().skip(1) {
            let tape = match (&node.kind, layer) {
                (LayerKind::Conv { .. }, LayerParams::Conv(p)) => {
                    let (mut y, t) = conv2d_forward(&cur, p)?;
                    let r = ops::relu_in_place(&mut y);
                    cur = y;
                    NodeTape::Conv(t, r)
                }
                (LayerKind::MaxPool, _) => {
                    let (y, t) = maxpool2d_forward(&cur, PoolSpec)?;
                    cur = y;
                    NodeTape::Pool(t)
                }
                (LayerKind::TransposeConv { .. }, LayerParams::TransposeConv(p)) => {
                    let (y, t) = conv2d_transpose_forward(&cur, p)?;
                    cur = y;
                    NodeTape::TransposeConv(t)
                }
                (LayerKind::Concat { skip }, _) => {
                    let src = saved
                        .get(skip)
                        .ok_or_else(|| shape_err!("skip source {skip} not recorded"))?;
                    let main_channels = *cur.dims().last().unwrap();
                    cur = Tensor::concat_channels(&cur, src)?;
                    NodeTape::Concat { main_channels }
                }
                (LayerKind::Flatten, _) => {
                    let dims = cur.dims().to_vec();
                    cur = cur.flatten_batch()?;
                    NodeTape::Flatten { dims }
                }
                (LayerKind::Dense { relu, .. }, LayerParams::Dense(p)) => {
                    let (mut y, t) = dense_forward(&cur, p)?;
                    let r = relu.then(|| ops::relu_in_place(&mut y));
                    cur = y;
                    NodeTape::Dense(t, r)
                }
                (kind, _) => return Err(shape_err!("node {} ({kind:?}) has mismatched parameters", node.name)),
            };
            if skip_sources.contains(&i) {
                saved.insert(i, cur.clone());
            }
            tapes.push(tape);
        }
        Ok((cur, ForwardTape { version: self.version, batch, nodes: tapes }))
    }

    /// Forward pass without keeping the tape.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x)?.0)
    }

    /// Gradients of every parameter given `d loss / d logits`.
    pub fn backward(&self, tape: ForwardTape<T>, grad_logits: &Tensor<T>) -> Result<ParamRegistry<T>> {
        if tape.version != self.version || tape.nodes.len() != self.layers.len() {
            return Err(Error::Numerical("stale tape: parameters changed since the forward pass".into()));
        }
        if grad_logits.dims() != [tape.batch, self.num_classes()] {
            return Err(shape_err!("grad_logits {} does not match [{},{}]", grad_logits.shape(), tape.batch, self.num_classes()));
        }
        let nodes = self.arch.nodes();
        let mut pending: HashMap<usize, Tensor<T>> = HashMap::new();
        let mut per_layer: Vec<Vec<Tensor<T>>> = vec![Vec::new(); nodes.len()];
        let mut grad = grad_logits.clone();

        for (i, node_tape) in tape.nodes.into_iter().enumerate().skip(1).rev() {
            if let Some(extra) = pending.remove(&i) {
                grad.add_assign(&extra)?;
            }
            grad = match (node_tape, &self.layers[i]) {
                (NodeTape::Conv(t, r), LayerParams::Conv(p)) => {
                    ops::relu_backward_in_place(&mut grad, &r)?;
                    let g = conv2d_backward(&grad, &t, p)?;
                    per_layer[i] = vec![g.kernel, g.bias];
                    g.input
                }
                (NodeTape::Pool(t), _) => maxpool2d_backward(&grad, &t)?,
                (NodeTape::TransposeConv(t), LayerParams::TransposeConv(p)) => {
                    let g = conv2d_transpose_backward(&grad, &t, p)?;
                    per_layer[i] = vec![g.kernel, g.bias];
                    g.input
                }
                (NodeTape::Concat { main_channels }, _) => {
                    let LayerKind::Concat { skip } = nodes[i].kind else {
                        unreachable!("concat tape on non-concat node")
                    };
                    let (main, side) = grad.split_channels(main_channels)?;
                    match pending.get_mut(&skip) {
                        Some(acc) => acc.add_assign(&side)?,
                        None => {
                            pending.insert(skip, side);
                        }
                    }
                    main
                }
                (NodeTape::Flatten { dims }, _) => grad.into_reshaped(&dims)?,
                (NodeTape::Dense(t, r), LayerParams::Dense(p)) => {
                    if let Some(r) = r {
                        ops::relu_backward_in_place(&mut grad, &r)?;
                    }
                    let g = dense_backward(&grad, &t, p)?;
                    per_layer[i] = vec![g.weight, g.bias];
                    g.input
                }
                (NodeTape::Input, _) => unreachable!("input node is skipped"),
                _ => return Err(shape_err!("tape does not match node {}", nodes[i].name)),
            };
        }

        let mut out = ParamRegistry::with_capacity(self.specs.len());
        for (spec, g) in self.specs.iter().zip(per_layer.into_iter().flatten()) {
            out.insert(spec.name.clone(), g);
        }
        Ok(out)
    }
}
