//! Tag allocation by greedy colouring.
//!
//! Two sources conflict when they project into a common core. Sources are
//! visited in Welsh-Powell order (most conflicts first, then lowest id) and
//! receive the lowest tag free in every one of their destination cores, so
//! a source normally keeps one tag everywhere. When no common tag exists the
//! source falls back to the lowest free tag of each core separately.

use super::netlist::NeuronId;
use super::{CompileError, CoreRef};
use crate::packets::TAGS_PER_CORE;
use std::collections::{BTreeMap, BTreeSet};

/// `(source, destination core) -> tag`.
pub type TagMap = BTreeMap<(NeuronId, CoreRef), u16>;

/// `targets[s]` lists the cores that source `s` projects into.
pub fn allocate_tags(targets: &BTreeMap<NeuronId, BTreeSet<CoreRef>>) -> Result<TagMap, CompileError> {
    let mut into: BTreeMap<CoreRef, Vec<NeuronId>> = BTreeMap::new();
    for (&s, cores) in targets {
        for &c in cores {
            into.entry(c).or_default().push(s);
        }
    }
    for (&core, srcs) in &into {
        if srcs.len() > TAGS_PER_CORE {
            return Err(CompileError::TagExhaustion {
                core,
                sources: srcs.len(),
            });
        }
    }
    // Conflict degree: sources sharing a core, counted with repetition.
    let degree = |s: NeuronId| -> usize { targets[&s].iter().map(|c| into[c].len() - 1).sum() };
    let mut order: Vec<NeuronId> = targets.keys().copied().collect();
    order.sort_by_key(|&s| (std::cmp::Reverse(degree(s)), s));

    let mut used: BTreeMap<CoreRef, Vec<bool>> =
        into.keys().map(|&c| (c, vec![false; TAGS_PER_CORE])).collect();
    let mut map = TagMap::new();
    for s in order {
        let cores = &targets[&s];
        let common = (0..TAGS_PER_CORE).find(|&t| cores.iter().all(|c| !used[c][t]));
        for &c in cores {
            let slots = used.get_mut(&c).expect("core registered");
            let t = match common {
                Some(t) => t,
                None => slots.iter().position(|u| !u).expect("capacity checked"),
            };
            slots[t] = true;
            map.insert((s, c), t as u16);
        }
    }
    Ok(map)
}

/// Pairs of distinct sources sharing a tag inside one core.
pub fn tag_collisions(map: &TagMap) -> Vec<(CoreRef, u16, NeuronId, NeuronId)> {
    let mut seen: BTreeMap<(CoreRef, u16), NeuronId> = BTreeMap::new();
    let mut out = Vec::new();
    for (&(s, c), &t) in map {
        if let Some(&prev) = seen.get(&(c, t)) {
            out.push((c, t, prev, s));
        } else {
            seen.insert((c, t), s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::ChipCoord;

    fn core(i: u8) -> CoreRef {
        CoreRef {
            chip: ChipCoord::new(0, 0),
            core: i,
        }
    }

    #[test]
    fn disjoint_cores_reuse_tags() {
        let mut t = BTreeMap::new();
        for s in 0..10 {
            t.insert(s, BTreeSet::from([core(0)]));
        }
        for s in 10..20 {
            t.insert(s, BTreeSet::from([core(1)]));
        }
        let m = allocate_tags(&t).unwrap();
        let tags0: BTreeSet<u16> = (0..10).map(|s| m[&(s, core(0))]).collect();
        let tags1: BTreeSet<u16> = (10..20).map(|s| m[&(s, core(1))]).collect();
        assert_eq!(tags0, (0..10).collect());
        assert_eq!(tags0, tags1);
        assert!(tag_collisions(&m).is_empty());
    }

    #[test]
    fn pigeonhole() {
        let t: BTreeMap<_, _> = (0..1025).map(|s| (s, BTreeSet::from([core(2)]))).collect();
        assert!(matches!(
            allocate_tags(&t),
            Err(CompileError::TagExhaustion { sources: 1025, .. })
        ));
        let t: BTreeMap<_, _> = (0..1024).map(|s| (s, BTreeSet::from([core(2)]))).collect();
        assert!(allocate_tags(&t).is_ok());
    }

    #[test]
    fn random_heavy_instance_is_collision_free() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut t: BTreeMap<NeuronId, BTreeSet<CoreRef>> = BTreeMap::new();
        for s in 0..1500 {
            let k = rng.random_range(1..=4);
            let cores: BTreeSet<CoreRef> = (0..k).map(|_| core(rng.random_range(0..6))).collect();
            t.insert(s, cores);
        }
        let m = allocate_tags(&t).unwrap();
        assert_eq!(m.len(), t.values().map(|c| c.len()).sum::<usize>());
        // Pairwise oracle.
        let entries: Vec<_> = m.iter().collect();
        for (i, (a, ta)) in entries.iter().enumerate() {
            for (b, tb) in &entries[i + 1..] {
                assert!(!(a.1 == b.1 && ta == tb), "{a:?} and {b:?} share tag {ta}");
            }
        }
    }
}
