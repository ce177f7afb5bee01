//! Clustering of neurons into cores.
//!
//! Populations are cut into units of at most one core. Units are merged
//! agglomeratively, heaviest mutual connectivity first, as long as the merged
//! group fits a core, shares a parameter set and keeps its incoming sources
//! within the tag space. Leftover groups are packed first-fit (largest first)
//! and cores are laid out row-major over the chip grid.

use super::netlist::{NetworkSpec, NeuronId, PopKind};
use super::tags::{allocate_tags, TagMap};
use super::{CompileError, CoreRef};
use crate::fabric::FabricConfig;
use crate::neuro::CAM_WORDS_PER_NEURON;
use crate::packets::{CamEntry, ChipCoord, NeuronAddr, TAGS_PER_CORE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Destination core cap per source.
pub const MAX_TARGET_CORES: usize = 4;

/// A stage-one destination: broadcast `tag` into `core`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouteTarget {
    pub core: CoreRef,
    pub tag: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub grid_w: u8,
    pub grid_h: u8,
    pub cores_per_chip: u8,
    pub neurons_per_core: u16,
    /// Hardware address of every neuron; `None` for input sources.
    pub locations: Vec<Option<NeuronAddr>>,
    /// Destination list of every source, sorted by core.
    pub routes: BTreeMap<NeuronId, Vec<RouteTarget>>,
    /// CAM contents of every destination neuron in slot order.
    pub cam: BTreeMap<NeuronAddr, Vec<CamEntry>>,
    pub tag_map: TagMap,
    /// Parameter set of every used core.
    pub core_params: BTreeMap<CoreRef, String>,
    /// Input sources, which are broadcast by external stimulus.
    pub inputs: BTreeSet<NeuronId>,
}

impl Placement {
    pub fn used_cores(&self) -> BTreeSet<CoreRef> {
        self.core_params.keys().copied().collect()
    }

    /// Neuron id at each hardware address.
    pub fn reverse(&self) -> BTreeMap<NeuronAddr, NeuronId> {
        self.locations
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (a, i as NeuronId)))
            .collect()
    }

    /// Stimulus targets of an input source: `(core, tag)` pairs.
    pub fn input_targets(&self, input: NeuronId) -> &[RouteTarget] {
        self.routes.get(&input).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<NeuronId>,
    param_set: String,
    sources: BTreeSet<NeuronId>,
    prio: u64,
}

pub fn place(spec: &NetworkSpec, fabric: &FabricConfig, seed: u64) -> Result<Placement, CompileError> {
    spec.validate()?;
    let cap = fabric.neurons_per_core as usize;
    let pop_of = spec.population_of();
    let n = spec.neuron_count() as usize;

    let mut fan_in = vec![0u32; n];
    let mut sources_of: Vec<BTreeSet<NeuronId>> = vec![BTreeSet::new(); n];
    for c in &spec.connections {
        fan_in[c.dst as usize] += c.multiplicity as u32;
        sources_of[c.dst as usize].insert(c.src);
    }
    if let Some((d, &k)) = fan_in.iter().enumerate().find(|(_, &k)| k as usize > CAM_WORDS_PER_NEURON) {
        return Err(CompileError::FanIn {
            neuron: d as NeuronId,
            count: k,
        });
    }
    for p in &spec.populations {
        if p.kind == PopKind::Neuron {
            spec.params(&p.param_set, &fabric.core)?;
        }
    }

    // Units: one core's worth of consecutive neurons of one population.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Option<Group>> = Vec::new();
    let mut group_of = vec![usize::MAX; n];
    let offsets = spec.offsets();
    for (pi, p) in spec.populations.iter().enumerate() {
        if p.kind == PopKind::Input {
            continue;
        }
        let start = offsets[pi];
        for chunk in (start..start + p.size).collect::<Vec<_>>().chunks(cap) {
            let gi = groups.len();
            let mut sources = BTreeSet::new();
            for &m in chunk {
                group_of[m as usize] = gi;
                sources.extend(&sources_of[m as usize]);
            }
            groups.push(Some(Group {
                members: chunk.to_vec(),
                param_set: p.param_set.clone(),
                sources,
                prio: rng.random(),
            }));
        }
    }

    // Symmetric connection weights between units.
    let mut weight: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for c in &spec.connections {
        if spec.is_input(&pop_of, c.src) {
            continue;
        }
        let (a, b) = (group_of[c.src as usize], group_of[c.dst as usize]);
        if a != b {
            *weight.entry((a.min(b), a.max(b))).or_default() += c.multiplicity as u64;
        }
    }

    let fits = |a: &Group, b: &Group| {
        a.param_set == b.param_set
            && a.members.len() + b.members.len() <= cap
            && a.sources.union(&b.sources).count() <= TAGS_PER_CORE
    };

    loop {
        let mut best: Option<((u64, std::cmp::Reverse<u64>), (usize, usize))> = None;
        for (&(a, b), &w) in &weight {
            let (Some(ga), Some(gb)) = (&groups[a], &groups[b]) else { continue };
            if !fits(ga, gb) {
                continue;
            }
            let key = (w, std::cmp::Reverse(ga.prio.min(gb.prio)));
            if best.is_none_or(|(k, _)| key > k) {
                best = Some((key, (a, b)));
            }
        }
        let Some((_, (a, b))) = best else { break };
        let gb = groups[b].take().expect("live group");
        let ga = groups[a].as_mut().expect("live group");
        ga.members.extend(gb.members);
        ga.members.sort_unstable();
        ga.sources.extend(gb.sources);
        ga.prio = ga.prio.min(gb.prio);
        let old = std::mem::take(&mut weight);
        for ((x, y), w) in old {
            let x = if x == b { a } else { x };
            let y = if y == b { a } else { y };
            if x != y {
                *weight.entry((x.min(y), x.max(y))).or_default() += w;
            }
        }
    }

    let mut live: Vec<Group> = groups.into_iter().flatten().collect();
    live.sort_by_key(|g| (std::cmp::Reverse(g.members.len()), g.prio, g.members[0]));
    let mut cores: Vec<Group> = Vec::new();
    for g in live {
        match cores.iter_mut().find(|c| fits(c, &g)) {
            Some(c) => {
                c.members.extend(g.members);
                c.members.sort_unstable();
                c.sources.extend(g.sources);
            }
            None => cores.push(g),
        }
    }
    let available = fabric.chips() * fabric.cores_per_chip as usize;
    if cores.len() > available {
        return Err(CompileError::CoreCapacity {
            needed: cores.len(),
            available,
        });
    }

    let core_ref = |i: usize| CoreRef {
        chip: ChipCoord::from_index((i / fabric.cores_per_chip as usize) as u16, fabric.grid_w),
        core: (i % fabric.cores_per_chip as usize) as u8,
    };
    let mut locations = vec![None; n];
    let mut core_params = BTreeMap::new();
    for (ci, g) in cores.iter().enumerate() {
        let r = core_ref(ci);
        core_params.insert(r, g.param_set.clone());
        for (k, &m) in g.members.iter().enumerate() {
            locations[m as usize] = Some(NeuronAddr {
                chip: r.chip,
                core: r.core,
                neuron: k as u16,
            });
        }
    }

    let core_of = |m: NeuronId| {
        let a = locations[m as usize].expect("placed");
        CoreRef {
            chip: a.chip,
            core: a.core,
        }
    };
    let mut targets: BTreeMap<NeuronId, BTreeSet<CoreRef>> = BTreeMap::new();
    for c in &spec.connections {
        targets.entry(c.src).or_default().insert(core_of(c.dst));
    }
    for (&s, t) in &targets {
        if !spec.is_input(&pop_of, s) && t.len() > MAX_TARGET_CORES {
            return Err(CompileError::FanOutCores {
                neuron: s,
                cores: t.len(),
            });
        }
    }
    let tag_map = allocate_tags(&targets)?;

    let routes = targets
        .iter()
        .map(|(&s, cs)| {
            let list = cs
                .iter()
                .map(|&core| RouteTarget {
                    core,
                    tag: tag_map[&(s, core)],
                })
                .collect();
            (s, list)
        })
        .collect();

    let mut edges: Vec<_> = spec.connections.iter().collect();
    edges.sort_by_key(|c| (c.dst, c.src, c.syn));
    let mut cam: BTreeMap<NeuronAddr, Vec<CamEntry>> = BTreeMap::new();
    for c in edges {
        let dst = locations[c.dst as usize].expect("placed");
        let tag = tag_map[&(c.src, core_of(c.dst))];
        let list = cam.entry(dst).or_default();
        for _ in 0..c.multiplicity {
            list.push(CamEntry::new(tag, c.syn));
        }
    }

    let inputs = (0..n as NeuronId)
        .filter(|&i| spec.is_input(&pop_of, i))
        .collect();
    Ok(Placement {
        grid_w: fabric.grid_w,
        grid_h: fabric.grid_h,
        cores_per_chip: fabric.cores_per_chip,
        neurons_per_core: fabric.neurons_per_core,
        locations,
        routes,
        cam,
        tag_map,
        core_params,
        inputs,
    })
}

/// Tab-separated placement table, one row per neuron.
pub fn placement_report(p: &Placement, spec: &NetworkSpec) -> String {
    use std::fmt::Write as _;
    let pop_of = spec.population_of();
    let offsets = spec.offsets();
    let mut out = String::from("neuron\tpopulation\tindex\tchip\tcore\tslot\trouting_words\tcam_entries\ttags\n");
    for (i, loc) in p.locations.iter().enumerate() {
        let pi = pop_of[i];
        let label = &spec.populations[pi].label;
        let idx = i as u32 - offsets[pi];
        let routes = p.routes.get(&(i as NeuronId)).map(Vec::as_slice).unwrap_or(&[]);
        let tags: Vec<String> = routes
            .iter()
            .map(|r| format!("{}:{}={}", r.core.chip.index(p.grid_w), r.core.core, r.tag))
            .collect();
        let tags = if tags.is_empty() { "-".to_string() } else { tags.join(",") };
        match loc {
            Some(a) => {
                let cam = p.cam.get(a).map_or(0, Vec::len);
                let _ = writeln!(
                    out,
                    "{i}\t{label}\t{idx}\t{}\t{}\t{}\t{}\t{cam}\t{tags}",
                    a.chip.index(p.grid_w),
                    a.core,
                    a.neuron,
                    routes.len()
                );
            }
            None => {
                let _ = writeln!(out, "{i}\t{label}\t{idx}\t-\t-\t-\t0\t0\t{tags}");
            }
        }
    }
    out
}

/// Number of CAM words each synapse type occupies in a placement.
pub fn cam_usage_by_type(p: &Placement) -> [usize; 4] {
    let mut n = [0; 4];
    for e in p.cam.values().flatten() {
        n[e.syn_type.index()] += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::SynType;

    fn fabric(w: u8, h: u8) -> FabricConfig {
        FabricConfig::grid(w, h)
    }

    #[test]
    fn recurrent_population_fits_one_core() {
        let mut spec = NetworkSpec::new("rec", 0);
        spec.add_population("r", 256, PopKind::Neuron, "default");
        for d in 0..256u32 {
            for k in 1..=8u32 {
                spec.connect((d + k * 31) % 256, d, SynType::FastExc);
            }
        }
        let p = place(&spec, &fabric(1, 1), 1).unwrap();
        assert_eq!(p.used_cores().len(), 1);
        assert!(p.routes.values().all(|r| r.len() == 1));
        for r in p.routes.values() {
            assert_eq!(r[0].core, CoreRef { chip: ChipCoord::new(0, 0), core: 0 });
        }
    }

    #[test]
    fn fan_in_is_bounded() {
        let mut spec = NetworkSpec::new("dense", 0);
        spec.add_population("r", 100, PopKind::Neuron, "default");
        for s in 0..65 {
            spec.connect(s, 99, SynType::FastExc);
        }
        assert!(matches!(
            place(&spec, &fabric(1, 1), 0),
            Err(CompileError::FanIn { neuron: 99, count: 65 })
        ));
    }

    #[test]
    fn feed_forward_pair_uses_two_cores() {
        let mut spec = NetworkSpec::new("ff", 0);
        let a = spec.add_population("a", 256, PopKind::Neuron, "default");
        let b = spec.add_population("b", 256, PopKind::Neuron, "default");
        for i in 0..256 {
            spec.connect(a + i, b + i, SynType::FastExc);
            spec.connect(a + i, b + (i + 1) % 256, SynType::SlowExc);
        }
        let p = place(&spec, &fabric(1, 1), 3).unwrap();
        assert_eq!(p.used_cores().len(), 2);
        for i in 0..256 {
            let r = &p.routes[&(a + i)];
            assert_eq!(r.len(), 1);
            let dst = p.locations[(b + i) as usize].unwrap();
            assert_eq!((r[0].core.chip, r[0].core.core), (dst.chip, dst.core));
        }
    }

    #[test]
    fn too_many_target_cores() {
        let mut spec = NetworkSpec::new("wide", 0);
        let s = spec.add_population("s", 1, PopKind::Neuron, "default");
        let d = spec.add_population("d", 5 * 256, PopKind::Neuron, "default");
        for k in 0..5 {
            spec.connect(s, d + k * 256, SynType::FastExc);
        }
        assert!(matches!(
            place(&spec, &fabric(2, 1), 0),
            Err(CompileError::FanOutCores { cores: 5, .. })
        ));
    }

    #[test]
    fn capacity_is_checked() {
        let mut spec = NetworkSpec::new("big", 0);
        spec.add_population("a", 5 * 256, PopKind::Neuron, "default");
        assert!(matches!(
            place(&spec, &fabric(1, 1), 0),
            Err(CompileError::CoreCapacity { needed: 5, available: 4 })
        ));
    }

    #[test]
    fn param_sets_never_share_a_core() {
        let mut spec = NetworkSpec::new("mixed", 0);
        spec.param_sets.insert("slow".into(), Default::default());
        let a = spec.add_population("a", 10, PopKind::Neuron, "default");
        let b = spec.add_population("b", 10, PopKind::Neuron, "slow");
        for i in 0..10 {
            spec.connect(a + i, b + i, SynType::FastExc);
            spec.connect(b + i, a + i, SynType::FastExc);
        }
        let p = place(&spec, &fabric(1, 1), 0).unwrap();
        assert_eq!(p.used_cores().len(), 2);
        assert_eq!(place(&spec, &fabric(1, 1), 0).unwrap(), p);
    }
}
