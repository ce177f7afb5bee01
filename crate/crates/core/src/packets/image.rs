//! Text memory-image format.
//!
//! One entry per line, `chip:core:neuron:slot = 0xHHHHH` for SRAM routing
//! words (five hex digits) and `chip:core:neuron:slot = 0xHHH` for CAM
//! entries (three hex digits). `chip` is the row-major chip index. Blank
//! lines and lines starting with `#` are ignored.

use super::{
    decode_cam_entry, decode_routing_word, encode_cam_entry, encode_routing_word, CamEntry,
    PacketError, RoutingWord,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const SRAM_SLOTS: u8 = 4;
pub const CAM_SLOTS: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotAddr {
    pub chip: u16,
    pub core: u8,
    pub neuron: u16,
    pub slot: u8,
}

impl SlotAddr {
    pub fn new(chip: u16, core: u8, neuron: u16, slot: u8) -> Self {
        SlotAddr {
            chip,
            core,
            neuron,
            slot,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: hex value must have 5 (SRAM) or 3 (CAM) digits, found {digits}")]
    BadWidth { line: usize, digits: usize },
    #[error("line {line}: slot {slot} out of range for {kind} (max {max})")]
    SlotRange {
        line: usize,
        kind: &'static str,
        slot: u8,
        max: u8,
    },
    #[error("line {line}: duplicate entry for {addr:?}")]
    Duplicate { line: usize, addr: SlotAddr },
    #[error("line {line}: {source}")]
    Field {
        line: usize,
        #[source]
        source: PacketError,
    },
    #[error(transparent)]
    Encode(#[from] PacketError),
}

/// SRAM and CAM contents of a whole fabric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryImage {
    pub sram: BTreeMap<SlotAddr, RoutingWord>,
    pub cam: BTreeMap<SlotAddr, CamEntry>,
}

impl MemoryImage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.sram.is_empty() && self.cam.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sram.len() + self.cam.len()
    }

    pub fn render(&self) -> Result<String, ImageError> {
        let mut out = String::new();
        out.push_str("# dynapsim memory image v1\n");
        for (a, w) in &self.sram {
            let v = encode_routing_word(w)?;
            let _ = writeln!(out, "{}:{}:{}:{} = 0x{:05X}", a.chip, a.core, a.neuron, a.slot, v);
        }
        for (a, e) in &self.cam {
            let v = encode_cam_entry(e)?;
            let _ = writeln!(out, "{}:{}:{}:{} = 0x{:03X}", a.chip, a.core, a.neuron, a.slot, v);
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ImageError> {
        let mut image = MemoryImage::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| ImageError::Malformed {
                line,
                reason: reason.to_string(),
            };
            let (lhs, rhs) = body
                .split_once('=')
                .ok_or_else(|| malformed("missing `=`"))?;
            let parts: Vec<&str> = lhs.trim().split(':').collect();
            if parts.len() != 4 {
                return Err(malformed("address must be chip:core:neuron:slot"));
            }
            let chip: u16 = parts[0].parse().map_err(|_| malformed("bad chip index"))?;
            let core: u8 = parts[1].parse().map_err(|_| malformed("bad core index"))?;
            let neuron: u16 = parts[2].parse().map_err(|_| malformed("bad neuron index"))?;
            let slot: u8 = parts[3].parse().map_err(|_| malformed("bad slot index"))?;
            let addr = SlotAddr::new(chip, core, neuron, slot);
            let hex = rhs
                .trim()
                .strip_prefix("0x")
                .ok_or_else(|| malformed("value must start with 0x"))?;
            if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(malformed("value is not hexadecimal"));
            }
            let value = u32::from_str_radix(hex, 16).map_err(|_| malformed("bad hex value"))?;
            match hex.len() {
                5 => {
                    if slot >= SRAM_SLOTS {
                        return Err(ImageError::SlotRange {
                            line,
                            kind: "SRAM",
                            slot,
                            max: SRAM_SLOTS - 1,
                        });
                    }
                    let word = decode_routing_word(value)
                        .map_err(|source| ImageError::Field { line, source })?;
                    if image.sram.insert(addr, word).is_some() {
                        return Err(ImageError::Duplicate { line, addr });
                    }
                }
                3 => {
                    if slot >= CAM_SLOTS {
                        return Err(ImageError::SlotRange {
                            line,
                            kind: "CAM",
                            slot,
                            max: CAM_SLOTS - 1,
                        });
                    }
                    let entry = decode_cam_entry(value as u16)
                        .map_err(|source| ImageError::Field { line, source })?;
                    if image.cam.insert(addr, entry).is_some() {
                        return Err(ImageError::Duplicate { line, addr });
                    }
                }
                digits => return Err(ImageError::BadWidth { line, digits }),
            }
        }
        Ok(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::{Sign, SynType};

    #[test]
    fn empty_image_renders_header_only() {
        let text = MemoryImage::new().render().unwrap();
        assert_eq!(MemoryImage::parse(&text).unwrap(), MemoryImage::new());
    }

    #[test]
    fn render_parse_round_trip() {
        let mut img = MemoryImage::new();
        img.sram.insert(
            SlotAddr::new(3, 1, 200, 2),
            RoutingWord {
                tag: 77,
                core: 3,
                dx: 1,
                dy: 2,
                sign_x: Sign::Minus,
                sign_y: Sign::Plus,
            },
        );
        img.cam
            .insert(SlotAddr::new(0, 0, 5, 63), CamEntry::new(5, SynType::ShuntInh));
        let text = img.render().unwrap();
        assert!(text.contains("0:0:5:63 = 0xC05"));
        assert_eq!(MemoryImage::parse(&text).unwrap(), img);
    }

    #[test]
    fn rejects_malformed_widths() {
        assert!(matches!(
            MemoryImage::parse("0:0:0:0 = 0x1234"),
            Err(ImageError::BadWidth { line: 1, digits: 4 })
        ));
        assert!(matches!(
            MemoryImage::parse("\n0:0:0:0 = 0x123456"),
            Err(ImageError::BadWidth { line: 2, digits: 6 })
        ));
        assert!(MemoryImage::parse("0:0:0 = 0x12345").is_err());
        assert!(MemoryImage::parse("0:0:0:0 0x12345").is_err());
        assert!(MemoryImage::parse("0:0:0:0 = 12345").is_err());
        assert!(MemoryImage::parse("0:0:0:0 = 0xFFG").is_err());
    }

    #[test]
    fn rejects_bad_slots_and_duplicates() {
        assert!(matches!(
            MemoryImage::parse("0:0:0:4 = 0x00000"),
            Err(ImageError::SlotRange { kind: "SRAM", .. })
        ));
        assert!(matches!(
            MemoryImage::parse("0:0:0:64 = 0x000"),
            Err(ImageError::SlotRange { kind: "CAM", .. })
        ));
        assert!(matches!(
            MemoryImage::parse("0:0:0:1 = 0x000\n0:0:0:1 = 0x001"),
            Err(ImageError::Duplicate { line: 2, .. })
        ));
        // 0xFFF carries a valid tag and synapse type; only 13+ bit values fail.
        assert!(MemoryImage::parse("0:0:0:1 = 0xFFF").is_ok());
    }
}
