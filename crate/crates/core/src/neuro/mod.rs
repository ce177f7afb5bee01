//! Per-core compute: CAM matching, pulse-extended DPI synapses and AdEx
//! neurons.

pub mod cam;
pub mod neuron;
pub mod node;
pub mod synapse;

pub use cam::{CamMatch, CoreMemory, CAM_WORDS_PER_NEURON};
pub use neuron::{neuron_step, NeuronParams, NeuronState, SynapticInput};
pub use node::{Broadcast, CoreParams, NeuralCore};
pub use synapse::{dpi_step, Dpi, SynapseParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuroError {
    #[error("CAM address neuron {neuron} slot {slot} out of range")]
    CamAddress { neuron: u16, slot: u8 },
    #[error("CAM tag {0} exceeds 10 bits")]
    CamTag(u16),
    #[error("all CAM words of neuron {neuron} are in use")]
    CamFull { neuron: u16 },
    #[error("invalid parameter: {0}")]
    Config(String),
    #[error("non-finite state in neuron {neuron} at t = {t_ms} ms (V = {v}, w = {w})")]
    NumericalFault { neuron: u16, t_ms: f64, v: f64, w: f64 },
}
