//! The UNET classifier and its stacked variant: topology, parameters,
//! whole-model forward/backward, and checkpoints.

mod arch;
mod checkpoint;
mod config;
mod graph;

pub use arch::{format_extent, Architecture, LayerKind, Node, ParamSpec, ShapeLedger};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC,
};
pub use checkpoint::write_atomic;
pub use config::{ModelKind, UNetConfig};
pub use graph::{build_stacked_unet, build_unet, ForwardTape, ModelGraph, ParamRegistry};
