//! Glue between compiled networks and the fabric simulator.

use crate::aer::AerEvent;
use dynapsim_core::compiler::{emit_images, input_stimuli, place, CompileError, NetworkSpec, NeuronId, Placement};
use dynapsim_core::fabric::{Engine, ExternalEvent, FabricConfig, FabricError, SimTime};
use dynapsim_core::packets::{ChipCoord, MemoryImage};
use std::collections::BTreeMap;

pub const PS_PER_US: SimTime = 1_000_000;
pub const PS_PER_MS: SimTime = 1_000_000_000;

#[derive(Debug, Clone)]
pub struct Compiled {
    pub spec: NetworkSpec,
    pub placement: Placement,
    pub image: MemoryImage,
}

pub fn compile(spec: NetworkSpec, fabric: &FabricConfig, seed: u64) -> Result<Compiled, CompileError> {
    let placement = place(&spec, fabric, seed)?;
    let image = emit_images(&placement)?;
    Ok(Compiled { spec, placement, image })
}

/// Engine with the image loaded and every used core set to its parameter set.
pub fn build_engine(c: &Compiled, fabric: &FabricConfig) -> Result<Engine, FabricError> {
    let mut e = Engine::new(fabric.clone())?;
    for (core, set) in &c.placement.core_params {
        let params = c
            .spec
            .params(set, &fabric.core)
            .map_err(|err| FabricError::Config(err.to_string()))?;
        e.set_core_params(core.chip, core.core, params)?;
    }
    e.load_image(&c.image)?;
    Ok(e)
}

/// Stimulus `(chip, core, tag)` lists of every input neuron.
pub fn stimulus_table(p: &Placement) -> BTreeMap<NeuronId, Vec<(ChipCoord, u8, u16)>> {
    p.inputs.iter().map(|&i| (i, input_stimuli(p, i))).collect()
}

/// Maps sensor events to stimuli: pixel `(x, y)` drives input neuron
/// `first_input + y * width + x`. Events of pixels without an input neuron
/// are skipped and counted.
pub fn aer_to_stimuli(
    events: &[AerEvent],
    table: &BTreeMap<NeuronId, Vec<(ChipCoord, u8, u16)>>,
    first_input: NeuronId,
    width: u16,
) -> (Vec<ExternalEvent>, usize) {
    let mut out = Vec::with_capacity(events.len() * 4);
    let mut skipped = 0;
    for e in events {
        let id = first_input + e.y as u32 * width as u32 + e.x as u32;
        match table.get(&id) {
            Some(targets) => {
                let t = e.ts_us as SimTime * PS_PER_US;
                out.extend(
                    targets
                        .iter()
                        .map(|&(chip, core, tag)| ExternalEvent::stimulus(t, chip, core, tag)),
                );
            }
            None => skipped += 1,
        }
    }
    (out, skipped)
}

/// Raster entries mapped back to neuron ids, as `(time_ms, id)`.
pub fn raster_ids(e: &Engine, p: &Placement) -> Vec<(f64, NeuronId)> {
    let rev = p.reverse();
    let w = e.config().grid_w;
    e.raster()
        .iter()
        .filter_map(|r| {
            let a = dynapsim_core::packets::NeuronAddr {
                chip: ChipCoord::from_index(r.chip, w),
                core: r.core,
                neuron: r.neuron,
            };
            rev.get(&a).map(|&id| (r.time_ps as f64 / PS_PER_MS as f64, id))
        })
        .collect()
}
