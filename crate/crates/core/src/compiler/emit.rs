use super::place::Placement;
use super::{CompileError, NeuronId};
use crate::packets::{MemoryImage, RoutingWord, SlotAddr, MAX_HOPS};

/// SRAM and CAM image of a placement. Routing words are written in slot
/// order, one per destination core; inputs get no SRAM words.
pub fn emit_images(p: &Placement) -> Result<MemoryImage, CompileError> {
    let mut img = MemoryImage::new();
    for (&src, targets) in &p.routes {
        let Some(at) = p.locations[src as usize] else {
            continue;
        };
        for (slot, t) in targets.iter().enumerate() {
            let dx = t.core.chip.x as i32 - at.chip.x as i32;
            let dy = t.core.chip.y as i32 - at.chip.y as i32;
            if dx.unsigned_abs() > MAX_HOPS as u32 || dy.unsigned_abs() > MAX_HOPS as u32 {
                return Err(CompileError::HopOverflow { neuron: src, dx, dy });
            }
            let word = RoutingWord::toward(t.tag, t.core.core, dx, dy);
            img.sram.insert(
                SlotAddr::new(at.chip.index(p.grid_w), at.core, at.neuron, slot as u8),
                word,
            );
        }
    }
    for (a, entries) in &p.cam {
        for (slot, e) in entries.iter().enumerate() {
            img.cam
                .insert(SlotAddr::new(a.chip.index(p.grid_w), a.core, a.neuron, slot as u8), *e);
        }
    }
    Ok(img)
}

/// Stimulus `(chip, core, tag)` triples that realise input source `input`.
pub fn input_stimuli(p: &Placement, input: NeuronId) -> Vec<(crate::packets::ChipCoord, u8, u16)> {
    p.input_targets(input)
        .iter()
        .map(|t| (t.core.chip, t.core.core, t.tag))
        .collect()
}
