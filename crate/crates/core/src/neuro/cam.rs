use super::NeuroError;
use crate::packets::{CamEntry, SynType, MAX_TAG, TAGS_PER_CORE};

/// CAM words available to each neuron.
pub const CAM_WORDS_PER_NEURON: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CamMatch {
    pub neuron: u16,
    pub slot: u8,
    pub syn_type: SynType,
}

/// All CAM words of one core with a per-neuron occupancy bitmap.
///
/// Lookups go through a tag-indexed table of subscribers so a broadcast costs
/// O(matches); the table is kept sorted by `(neuron, slot)`.
#[derive(Debug, Clone)]
pub struct CoreMemory {
    neurons: usize,
    words: Vec<CamEntry>,
    valid: Vec<u64>,
    by_tag: Vec<Vec<u32>>,
}

impl CoreMemory {
    pub fn new(neurons: usize) -> Self {
        CoreMemory {
            neurons,
            words: vec![CamEntry::new(0, SynType::FastExc); neurons * CAM_WORDS_PER_NEURON],
            valid: vec![0; neurons],
            by_tag: vec![Vec::new(); TAGS_PER_CORE],
        }
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    fn check(&self, neuron: u16, slot: u8) -> Result<usize, NeuroError> {
        if neuron as usize >= self.neurons || slot as usize >= CAM_WORDS_PER_NEURON {
            return Err(NeuroError::CamAddress { neuron, slot });
        }
        Ok(neuron as usize * CAM_WORDS_PER_NEURON + slot as usize)
    }

    pub fn get(&self, neuron: u16, slot: u8) -> Option<CamEntry> {
        let i = self.check(neuron, slot).ok()?;
        (self.valid[neuron as usize] >> slot & 1 == 1).then(|| self.words[i])
    }

    /// Stores `entry` in a slot, returning the entry it replaced.
    pub fn write(&mut self, neuron: u16, slot: u8, entry: CamEntry) -> Result<Option<CamEntry>, NeuroError> {
        if entry.tag > MAX_TAG {
            return Err(NeuroError::CamTag(entry.tag));
        }
        let i = self.check(neuron, slot)?;
        let old = self.clear(neuron, slot)?;
        self.words[i] = entry;
        self.valid[neuron as usize] |= 1 << slot;
        let list = &mut self.by_tag[entry.tag as usize];
        let key = i as u32;
        let pos = list.binary_search(&key).unwrap_or_else(|p| p);
        list.insert(pos, key);
        Ok(old)
    }

    pub fn clear(&mut self, neuron: u16, slot: u8) -> Result<Option<CamEntry>, NeuroError> {
        let i = self.check(neuron, slot)?;
        let bit = 1u64 << slot;
        if self.valid[neuron as usize] & bit == 0 {
            return Ok(None);
        }
        self.valid[neuron as usize] &= !bit;
        let old = self.words[i];
        let list = &mut self.by_tag[old.tag as usize];
        if let Ok(pos) = list.binary_search(&(i as u32)) {
            list.remove(pos);
        }
        Ok(Some(old))
    }

    /// Writes into the lowest free slot of `neuron`.
    pub fn push(&mut self, neuron: u16, entry: CamEntry) -> Result<u8, NeuroError> {
        self.check(neuron, 0)?;
        let free = !self.valid[neuron as usize];
        if free == 0 {
            return Err(NeuroError::CamFull { neuron });
        }
        let slot = free.trailing_zeros() as u8;
        self.write(neuron, slot, entry)?;
        Ok(slot)
    }

    pub fn occupancy(&self, neuron: u16) -> u64 {
        self.valid.get(neuron as usize).copied().unwrap_or(0)
    }

    pub fn valid_count(&self, neuron: u16) -> u32 {
        self.occupancy(neuron).count_ones()
    }

    /// Every valid `(neuron, slot, entry)` in address order.
    pub fn entries(&self) -> impl Iterator<Item = (u16, u8, CamEntry)> + '_ {
        (0..self.neurons).flat_map(move |n| {
            let bits = self.valid[n];
            (0..CAM_WORDS_PER_NEURON as u8)
                .filter(move |s| bits >> s & 1 == 1)
                .map(move |s| (n as u16, s, self.words[n * CAM_WORDS_PER_NEURON + s as usize]))
        })
    }

    /// All subscribers of `tag`, ordered by neuron then slot.
    pub fn cam_match(&self, tag: u16) -> Vec<CamMatch> {
        let mut out = Vec::new();
        self.cam_match_into(tag, &mut out);
        out
    }

    pub fn cam_match_into(&self, tag: u16, out: &mut Vec<CamMatch>) {
        out.clear();
        let Some(list) = self.by_tag.get(tag as usize) else {
            return;
        };
        out.extend(list.iter().map(|&key| {
            let i = key as usize;
            CamMatch {
                neuron: (i / CAM_WORDS_PER_NEURON) as u16,
                slot: (i % CAM_WORDS_PER_NEURON) as u8,
                syn_type: self.words[i].syn_type,
            }
        }));
    }
}
