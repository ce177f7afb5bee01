//! Symbolic validation: every routing word is walked through the routers
//! and matched against destination CAMs, and the resulting edge multiset is
//! compared with the netlist.

use super::netlist::{NetworkSpec, NeuronId};
use super::place::{Placement, MAX_TARGET_CORES};
use super::tags::tag_collisions;
use super::{emit_images, CoreRef};
use crate::memopt::{mem_two_stage, NetParams};
use crate::neuro::CAM_WORDS_PER_NEURON;
use crate::packets::{ChipCoord, MemoryImage, NeuronAddr, SynType, CAM_SLOTS, SRAM_SLOTS, TAGS_PER_CORE};
use serde::Serialize;
use std::collections::BTreeMap;

pub const CAM_ENTRY_BITS: u32 = 12;
pub const SRAM_WORD_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeDiff {
    pub src: NeuronId,
    pub dst: NeuronId,
    pub syn: SynType,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeMismatch {
    pub src: NeuronId,
    pub dst: NeuronId,
    pub expected: SynType,
    pub realized: SynType,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitsReport {
    /// Memory available per neuron: 64 CAM words and 4 SRAM words.
    pub capacity_per_neuron: u32,
    pub max_used_per_neuron: u32,
    pub mean_used_per_neuron: f64,
    pub total_used: u64,
    /// Two-stage model evaluated at the network's own N, F, C and M, when
    /// those are inside the model's domain.
    pub predicted_per_neuron: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub expected_edges: u64,
    pub realized_edges: u64,
    pub missing: Vec<EdgeDiff>,
    pub spurious: Vec<EdgeDiff>,
    pub type_mismatch: Vec<TypeMismatch>,
    /// Sources whose routing word faults in the routers.
    pub route_faults: Vec<(NeuronId, String)>,
    /// Broken resource bounds, one message each.
    pub resource_violations: Vec<String>,
    pub image_error: Option<String>,
    pub bits: BitsReport,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty()
            && self.spurious.is_empty()
            && self.type_mismatch.is_empty()
            && self.route_faults.is_empty()
            && self.resource_violations.is_empty()
            && self.image_error.is_none()
    }
}

type Multiset = BTreeMap<(NeuronId, NeuronId, SynType), u32>;

pub fn validate(p: &Placement, spec: &NetworkSpec) -> ValidationReport {
    let expected = spec.edge_multiset();
    let mut report = ValidationReport {
        expected_edges: expected.values().map(|&c| c as u64).sum(),
        realized_edges: 0,
        missing: Vec::new(),
        spurious: Vec::new(),
        type_mismatch: Vec::new(),
        route_faults: Vec::new(),
        resource_violations: resource_violations(p),
        image_error: None,
        bits: bits_report(p, &MemoryImage::new()),
    };

    // Go through the text format so the check covers the file as well.
    let image = match emit_images(p).map_err(|e| e.to_string()).and_then(|img| {
        let text = img.render().map_err(|e| e.to_string())?;
        MemoryImage::parse(&text).map_err(|e| e.to_string())
    }) {
        Ok(img) => img,
        Err(e) => {
            report.image_error = Some(e);
            return report;
        }
    };
    report.bits = bits_report(p, &image);

    let reverse = p.reverse();
    // (core, tag) -> subscribers, one item per CAM entry.
    let mut subscribers: BTreeMap<(CoreRef, u16), Vec<(NeuronId, SynType)>> = BTreeMap::new();
    for (slot, e) in &image.cam {
        let addr = NeuronAddr {
            chip: ChipCoord::from_index(slot.chip, p.grid_w),
            core: slot.core,
            neuron: slot.neuron,
        };
        if let Some(&dst) = reverse.get(&addr) {
            let core = CoreRef {
                chip: addr.chip,
                core: addr.core,
            };
            subscribers.entry((core, e.tag)).or_default().push((dst, e.syn_type));
        }
    }

    let mut realized = Multiset::new();
    let deliver = |src: NeuronId, core: CoreRef, tag: u16, realized: &mut Multiset| {
        for &(dst, syn) in subscribers.get(&(core, tag)).map(Vec::as_slice).unwrap_or(&[]) {
            *realized.entry((src, dst, syn)).or_insert(0) += 1;
        }
    };
    for (slot, word) in &image.sram {
        let src_addr = NeuronAddr {
            chip: ChipCoord::from_index(slot.chip, p.grid_w),
            core: slot.core,
            neuron: slot.neuron,
        };
        let Some(&src) = reverse.get(&src_addr) else {
            report.route_faults.push((NeuronId::MAX, format!("word at unplaced address {src_addr}")));
            continue;
        };
        match crate::fabric::trace_route(src_addr, word, p.grid_w, p.grid_h, p.cores_per_chip) {
            Ok(t) => deliver(
                src,
                CoreRef {
                    chip: t.chip,
                    core: t.core,
                },
                word.tag,
                &mut realized,
            ),
            Err(f) => report.route_faults.push((src, f.to_string())),
        }
    }
    for &input in &p.inputs {
        for t in p.input_targets(input) {
            deliver(input, t.core, t.tag, &mut realized);
        }
    }
    report.realized_edges = realized.values().map(|&c| c as u64).sum();

    let mut missing = diff(&expected, &realized);
    let mut spurious = diff(&realized, &expected);
    // A missing and a spurious edge on the same pair is a type mismatch.
    for m in missing.iter_mut() {
        for s in spurious.iter_mut() {
            if m.count == 0 || s.count == 0 || (m.src, m.dst) != (s.src, s.dst) {
                continue;
            }
            let k = m.count.min(s.count);
            report.type_mismatch.push(TypeMismatch {
                src: m.src,
                dst: m.dst,
                expected: m.syn,
                realized: s.syn,
                count: k,
            });
            m.count -= k;
            s.count -= k;
        }
    }
    missing.retain(|e| e.count > 0);
    spurious.retain(|e| e.count > 0);
    report.missing = missing;
    report.spurious = spurious;
    report
}

/// Edges of `a` not covered by `b`, with multiplicity.
fn diff(a: &Multiset, b: &Multiset) -> Vec<EdgeDiff> {
    a.iter()
        .filter_map(|(&(src, dst, syn), &n)| {
            let have = b.get(&(src, dst, syn)).copied().unwrap_or(0);
            (n > have).then_some(EdgeDiff {
                src,
                dst,
                syn,
                count: n - have,
            })
        })
        .collect()
}

fn resource_violations(p: &Placement) -> Vec<String> {
    let mut v = Vec::new();
    let mut per_core: BTreeMap<CoreRef, usize> = BTreeMap::new();
    for a in p.locations.iter().flatten() {
        *per_core
            .entry(CoreRef {
                chip: a.chip,
                core: a.core,
            })
            .or_default() += 1;
        if a.neuron >= p.neurons_per_core {
            v.push(format!("neuron slot {a} beyond core size {}", p.neurons_per_core));
        }
    }
    for (c, n) in per_core {
        if n > p.neurons_per_core as usize {
            v.push(format!("core {c} holds {n} neurons"));
        }
    }
    for (a, e) in &p.cam {
        if e.len() > CAM_WORDS_PER_NEURON.min(CAM_SLOTS as usize) {
            v.push(format!("neuron {a} has {} CAM entries", e.len()));
        }
    }
    for (s, r) in &p.routes {
        let limit = if p.inputs.contains(s) {
            usize::MAX
        } else {
            MAX_TARGET_CORES.min(SRAM_SLOTS as usize)
        };
        if r.len() > limit {
            v.push(format!("source {s} has {} routing words", r.len()));
        }
        if r.iter().any(|t| t.tag as usize >= TAGS_PER_CORE) {
            v.push(format!("source {s} uses a tag beyond 10 bits"));
        }
    }
    for (c, t, a, b) in tag_collisions(&p.tag_map) {
        v.push(format!("sources {a} and {b} share tag {t} in core {c}"));
    }
    v
}

fn bits_report(p: &Placement, image: &MemoryImage) -> BitsReport {
    let capacity = CAM_SLOTS as u32 * CAM_ENTRY_BITS + SRAM_SLOTS as u32 * SRAM_WORD_BITS;
    let mut used: BTreeMap<(u16, u8, u16), u32> = BTreeMap::new();
    for s in image.cam.keys() {
        *used.entry((s.chip, s.core, s.neuron)).or_default() += CAM_ENTRY_BITS;
    }
    for s in image.sram.keys() {
        *used.entry((s.chip, s.core, s.neuron)).or_default() += SRAM_WORD_BITS;
    }
    let placed = p.locations.iter().flatten().count();
    let total: u64 = used.values().map(|&b| b as u64).sum();

    let words = image.sram.len() as f64;
    let entries = image.cam.len() as f64;
    let predicted = (placed >= 2 && words > 0.0).then(|| {
        // Fan-out F is edges per source; M is edges per routing word.
        let sources = image
            .sram
            .keys()
            .map(|s| (s.chip, s.core, s.neuron))
            .collect::<std::collections::BTreeSet<_>>()
            .len() as f64;
        let f = (entries / sources).max(1.0);
        let m = (entries / words).clamp(1.0, f);
        let params = NetParams::new(placed as f64, f, p.neurons_per_core as f64, TAGS_PER_CORE as f64, m);
        mem_two_stage(&params).ok().map(|r| r.mem_total_bits)
    });
    BitsReport {
        capacity_per_neuron: capacity,
        max_used_per_neuron: used.values().copied().max().unwrap_or(0),
        mean_used_per_neuron: if placed == 0 { 0.0 } else { total as f64 / placed as f64 },
        total_used: total,
        predicted_per_neuron: predicted.flatten(),
    }
}
