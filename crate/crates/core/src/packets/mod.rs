//! Bit-exact routing words, CAM entries and in-flight address events.
//!
//! SRAM routing word layout (20 bits, LSB first):
//!
//! | bits  | field                      |
//! |-------|----------------------------|
//! | 0–9   | tag                        |
//! | 10–13 | destination core id        |
//! | 14–15 | ΔX hop count               |
//! | 16–17 | ΔY hop count               |
//! | 18    | X sign (0 = east, 1 = west)|
//! | 19    | Y sign (0 = north, 1 = south)|
//!
//! CAM entry layout (12 bits): tag in bits 0–9, synapse type in bits 10–11.

mod image;

pub use image::{ImageError, MemoryImage, SlotAddr, CAM_SLOTS, SRAM_SLOTS};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const TAG_BITS: u32 = 10;
pub const CORE_ID_BITS: u32 = 4;
pub const HOP_BITS: u32 = 2;
pub const ROUTING_WORD_BITS: u32 = 20;
pub const CAM_ENTRY_BITS: u32 = 12;

pub const MAX_TAG: u16 = (1 << TAG_BITS) - 1;
pub const MAX_CORE_ID: u8 = (1 << CORE_ID_BITS) - 1;
pub const MAX_HOPS: u8 = (1 << HOP_BITS) - 1;
/// Number of distinct tags in one core's address space.
pub const TAGS_PER_CORE: usize = 1 << TAG_BITS;

const CORE_SHIFT: u32 = 10;
const DX_SHIFT: u32 = 14;
const DY_SHIFT: u32 = 16;
const SX_SHIFT: u32 = 18;
const SY_SHIFT: u32 = 19;
const SYN_SHIFT: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("field `{field}` value {value} exceeds maximum {max}")]
    FieldOverflow {
        field: &'static str,
        value: u32,
        max: u32,
    },
    #[error("value {value:#x} does not fit in {bits} bits")]
    OutOfRange { value: u32, bits: u32 },
}

/// The four synapse behaviours selectable by the 2-bit SRAM cell next to each CAM word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynType {
    FastExc = 0,
    SlowExc = 1,
    SubInh = 2,
    ShuntInh = 3,
}

impl SynType {
    pub const ALL: [SynType; 4] = [
        SynType::FastExc,
        SynType::SlowExc,
        SynType::SubInh,
        SynType::ShuntInh,
    ];

    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(bits: u8) -> Result<Self, PacketError> {
        match bits {
            0 => Ok(SynType::FastExc),
            1 => Ok(SynType::SlowExc),
            2 => Ok(SynType::SubInh),
            3 => Ok(SynType::ShuntInh),
            v => Err(PacketError::OutOfRange {
                value: v as u32,
                bits: 2,
            }),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_excitatory(self) -> bool {
        matches!(self, SynType::FastExc | SynType::SlowExc)
    }
}

impl fmt::Display for SynType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SynType::FastExc => "fast_exc",
            SynType::SlowExc => "slow_exc",
            SynType::SubInh => "sub_inh",
            SynType::ShuntInh => "shunt_inh",
        };
        f.write_str(s)
    }
}

/// Direction bit of a mesh hop field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Sign {
    /// East for X, north for Y. Encoded as 0.
    #[default]
    Plus,
    /// West for X, south for Y. Encoded as 1.
    Minus,
}

impl Sign {
    pub fn bit(self) -> u32 {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn from_bit(bit: u32) -> Self {
        if bit & 1 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn of(delta: i32) -> Self {
        if delta < 0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn apply(self, magnitude: i32) -> i32 {
        match self {
            Sign::Plus => magnitude,
            Sign::Minus => -magnitude,
        }
    }
}

/// One 20-bit SRAM entry of an R1 routing table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RoutingWord {
    pub tag: u16,
    pub core: u8,
    pub dx: u8,
    pub dy: u8,
    pub sign_x: Sign,
    pub sign_y: Sign,
}

fn check(field: &'static str, value: u32, max: u32) -> Result<(), PacketError> {
    if value > max {
        Err(PacketError::FieldOverflow { field, value, max })
    } else {
        Ok(())
    }
}

impl RoutingWord {
    /// A word that broadcasts back into `core` on the same chip.
    pub fn local(tag: u16, core: u8) -> Self {
        RoutingWord {
            tag,
            core,
            ..Default::default()
        }
    }

    /// Builds a word from a signed chip displacement.
    pub fn toward(tag: u16, core: u8, delta_x: i32, delta_y: i32) -> Self {
        let dx = delta_x.unsigned_abs().min(u8::MAX as u32) as u8;
        let dy = delta_y.unsigned_abs().min(u8::MAX as u32) as u8;
        RoutingWord {
            tag,
            core,
            dx,
            dy,
            sign_x: Sign::of(delta_x),
            sign_y: Sign::of(delta_y),
        }
    }

    pub fn validate(&self) -> Result<(), PacketError> {
        check("tag", self.tag as u32, MAX_TAG as u32)?;
        check("core", self.core as u32, MAX_CORE_ID as u32)?;
        check("dx", self.dx as u32, MAX_HOPS as u32)?;
        check("dy", self.dy as u32, MAX_HOPS as u32)?;
        Ok(())
    }

    /// Signed chip displacement encoded by the hop header.
    pub fn displacement(&self) -> (i32, i32) {
        (
            self.sign_x.apply(self.dx as i32),
            self.sign_y.apply(self.dy as i32),
        )
    }

    pub fn is_mesh(&self) -> bool {
        self.dx != 0 || self.dy != 0
    }
}

pub fn encode_routing_word(w: &RoutingWord) -> Result<u32, PacketError> {
    w.validate()?;
    Ok(w.tag as u32
        | (w.core as u32) << CORE_SHIFT
        | (w.dx as u32) << DX_SHIFT
        | (w.dy as u32) << DY_SHIFT
        | w.sign_x.bit() << SX_SHIFT
        | w.sign_y.bit() << SY_SHIFT)
}

pub fn decode_routing_word(v: u32) -> Result<RoutingWord, PacketError> {
    if v >> ROUTING_WORD_BITS != 0 {
        return Err(PacketError::OutOfRange {
            value: v,
            bits: ROUTING_WORD_BITS,
        });
    }
    Ok(RoutingWord {
        tag: (v & MAX_TAG as u32) as u16,
        core: ((v >> CORE_SHIFT) & MAX_CORE_ID as u32) as u8,
        dx: ((v >> DX_SHIFT) & MAX_HOPS as u32) as u8,
        dy: ((v >> DY_SHIFT) & MAX_HOPS as u32) as u8,
        sign_x: Sign::from_bit(v >> SX_SHIFT),
        sign_y: Sign::from_bit(v >> SY_SHIFT),
    })
}

/// One synapse subscription: the 10-bit CAM tag plus its 2-bit type cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CamEntry {
    pub tag: u16,
    pub syn_type: SynType,
}

impl CamEntry {
    pub fn new(tag: u16, syn_type: SynType) -> Self {
        CamEntry { tag, syn_type }
    }
}

pub fn encode_cam_entry(e: &CamEntry) -> Result<u16, PacketError> {
    check("tag", e.tag as u32, MAX_TAG as u32)?;
    Ok(e.tag | (e.syn_type.bits() as u16) << SYN_SHIFT)
}

pub fn decode_cam_entry(v: u16) -> Result<CamEntry, PacketError> {
    if (v as u32) >> CAM_ENTRY_BITS != 0 {
        return Err(PacketError::OutOfRange {
            value: v as u32,
            bits: CAM_ENTRY_BITS,
        });
    }
    Ok(CamEntry {
        tag: v & MAX_TAG,
        syn_type: SynType::from_bits((v >> SYN_SHIFT) as u8)?,
    })
}

/// Position of a chip in the 2D mesh. `y` grows northward, `x` eastward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ChipCoord {
    pub x: u8,
    pub y: u8,
}

impl ChipCoord {
    pub fn new(x: u8, y: u8) -> Self {
        ChipCoord { x, y }
    }

    /// Row-major index used by the memory image and report files.
    pub fn index(self, grid_w: u8) -> u16 {
        self.y as u16 * grid_w as u16 + self.x as u16
    }

    pub fn from_index(index: u16, grid_w: u8) -> Self {
        ChipCoord {
            x: (index % grid_w as u16) as u8,
            y: (index / grid_w as u16) as u8,
        }
    }
}

impl fmt::Display for ChipCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Hardware address of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct NeuronAddr {
    pub chip: ChipCoord,
    pub core: u8,
    pub neuron: u16,
}

impl fmt::Display for NeuronAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.chip, self.core, self.neuron)
    }
}

/// An address event in transit through the routers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub tag: u16,
    /// Remaining SRAM reads after this one; the R1 loop exits at zero.
    pub fanout_hdr: u8,
    pub core: u8,
    pub dx: u8,
    pub dy: u8,
    pub sign_x: Sign,
    pub sign_y: Sign,
    pub src: NeuronAddr,
    pub seq: u64,
}

impl Packet {
    pub fn from_word(word: &RoutingWord, fanout_hdr: u8, src: NeuronAddr, seq: u64) -> Self {
        Packet {
            tag: word.tag,
            fanout_hdr,
            core: word.core,
            dx: word.dx,
            dy: word.dy,
            sign_x: word.sign_x,
            sign_y: word.sign_y,
            src,
            seq,
        }
    }

    pub fn word(&self) -> RoutingWord {
        RoutingWord {
            tag: self.tag,
            core: self.core,
            dx: self.dx,
            dy: self.dy,
            sign_x: self.sign_x,
            sign_y: self.sign_y,
        }
    }

    /// True when every field fits its hardware width.
    pub fn fields_in_range(&self) -> bool {
        self.word().validate().is_ok() && self.fanout_hdr <= MAX_HOPS
    }
}
