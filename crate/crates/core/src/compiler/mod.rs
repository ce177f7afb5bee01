//! Network compiler: netlist, placement, tag allocation, image emission and
//! symbolic validation.

mod emit;
mod netlist;
mod place;
mod tags;
mod validate;

pub use emit::{emit_images, input_stimuli};
pub use netlist::{Connection, NetworkSpec, NeuronId, PopKind, Population, DEFAULT_PARAM_SET};
pub use place::{cam_usage_by_type, place, placement_report, Placement, RouteTarget, MAX_TARGET_CORES};
pub use tags::{allocate_tags, tag_collisions, TagMap};
pub use validate::{validate, BitsReport, EdgeDiff, TypeMismatch, ValidationReport};

use crate::packets::{ChipCoord, ImageError};
use serde::Serialize;
use std::fmt;

/// A core on the chip grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CoreRef {
    pub chip: ChipCoord,
    pub core: u8,
}

impl fmt::Display for CoreRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chip, self.core)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("netlist: {0}")]
    Netlist(String),
    #[error("unknown parameter set `{0}`")]
    UnknownParamSet(String),
    #[error("fan-in bound: neuron {neuron} needs {count} CAM entries (max 64)")]
    FanIn { neuron: NeuronId, count: u32 },
    #[error("fan-out cores bound: neuron {neuron} projects into {cores} cores (max 4)")]
    FanOutCores { neuron: NeuronId, cores: usize },
    #[error("core capacity bound: {needed} cores needed, {available} available")]
    CoreCapacity { needed: usize, available: usize },
    #[error("tag exhaustion: {sources} sources project into core {core} (max 1024)")]
    TagExhaustion { core: CoreRef, sources: usize },
    #[error("neuron {neuron}: displacement ({dx}, {dy}) exceeds 2-bit hop field; re-place closer")]
    HopOverflow { neuron: NeuronId, dx: i32, dy: i32 },
    #[error(transparent)]
    Image(#[from] ImageError),
}
