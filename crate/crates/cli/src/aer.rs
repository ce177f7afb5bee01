//! Address-event files.
//!
//! `csv`: one `ts_us,x,y,pol` record per line; blank lines and lines starting
//! with `#` are skipped, and a first line starting with `ts` is a header.
//! `binary-v1`: packed little-endian records `{u32 ts_us, u16 x, u16 y, i8 pol}`
//! (9 bytes, no header).

use serde::Serialize;
use std::fmt::Write as _;
use std::str::FromStr;

pub const RECORD_BYTES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AerEvent {
    pub ts_us: u32,
    pub x: u16,
    pub y: u16,
    /// +1 or -1.
    pub pol: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AerFormat {
    Csv,
    BinaryV1,
}

impl FromStr for AerFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(AerFormat::Csv),
            "binary-v1" => Ok(AerFormat::BinaryV1),
            _ => Err(format!("unknown AER format `{s}` (expected csv or binary-v1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AerError {
    #[error("byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("byte {offset}: event ({x}, {y}) outside the {width}x{height} sensor")]
    OutOfBounds {
        offset: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
}

fn malformed(offset: usize, reason: impl Into<String>) -> AerError {
    AerError::Malformed {
        offset,
        reason: reason.into(),
    }
}

fn check_pol(offset: usize, pol: i64) -> Result<i8, AerError> {
    match pol {
        1 => Ok(1),
        -1 => Ok(-1),
        _ => Err(malformed(offset, format!("polarity {pol} is not +1 or -1"))),
    }
}

fn in_bounds(offset: usize, e: AerEvent, bounds: Option<(u16, u16)>) -> Result<AerEvent, AerError> {
    match bounds {
        Some((width, height)) if e.x >= width || e.y >= height => Err(AerError::OutOfBounds {
            offset,
            x: e.x,
            y: e.y,
            width,
            height,
        }),
        _ => Ok(e),
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<AerEvent>, AerError> {
    csv_events(text, None)
}

fn csv_events(text: &str, bounds: Option<(u16, u16)>) -> Result<Vec<AerEvent>, AerError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') || (i == 0 && body.starts_with("ts")) {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(start, format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |k: usize, name: &str| -> Result<i64, AerError> {
            fields[k]
                .parse::<i64>()
                .map_err(|_| malformed(start, format!("{name} `{}` is not an integer", fields[k])))
        };
        let ts = num(0, "timestamp")?;
        let x = num(1, "x")?;
        let y = num(2, "y")?;
        let pol = check_pol(start, num(3, "polarity")?)?;
        let ts_us = u32::try_from(ts).map_err(|_| malformed(start, format!("timestamp {ts} out of range")))?;
        let x = u16::try_from(x).map_err(|_| malformed(start, format!("x {x} out of range")))?;
        let y = u16::try_from(y).map_err(|_| malformed(start, format!("y {y} out of range")))?;
        out.push(in_bounds(start, AerEvent { ts_us, x, y, pol }, bounds)?);
    }
    out.sort();
    Ok(out)
}

pub fn parse_binary(bytes: &[u8]) -> Result<Vec<AerEvent>, AerError> {
    binary_events(bytes, None)
}

fn binary_events(bytes: &[u8], bounds: Option<(u16, u16)>) -> Result<Vec<AerEvent>, AerError> {
    if bytes.len() % RECORD_BYTES != 0 {
        let offset = bytes.len() - bytes.len() % RECORD_BYTES;
        return Err(malformed(
            offset,
            format!("truncated record ({} trailing bytes)", bytes.len() % RECORD_BYTES),
        ));
    }
    let mut out = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (i, r) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let ts_us = u32::from_le_bytes([r[0], r[1], r[2], r[3]]);
        let x = u16::from_le_bytes([r[4], r[5]]);
        let y = u16::from_le_bytes([r[6], r[7]]);
        let pol = check_pol(i * RECORD_BYTES + 8, r[8] as i8 as i64)?;
        out.push(in_bounds(i * RECORD_BYTES, AerEvent { ts_us, x, y, pol }, bounds)?);
    }
    out.sort();
    Ok(out)
}

pub fn parse(bytes: &[u8], format: AerFormat) -> Result<Vec<AerEvent>, AerError> {
    parse_inner(bytes, format, None)
}

/// [`parse`] that also rejects events outside a `width` x `height` sensor,
/// reporting the offset of the offending record.
pub fn parse_bounded(bytes: &[u8], format: AerFormat, width: u16, height: u16) -> Result<Vec<AerEvent>, AerError> {
    parse_inner(bytes, format, Some((width, height)))
}

fn parse_inner(bytes: &[u8], format: AerFormat, bounds: Option<(u16, u16)>) -> Result<Vec<AerEvent>, AerError> {
    match format {
        AerFormat::Csv => {
            let text = std::str::from_utf8(bytes).map_err(|e| malformed(e.valid_up_to(), "invalid UTF-8"))?;
            csv_events(text, bounds)
        }
        AerFormat::BinaryV1 => binary_events(bytes, bounds),
    }
}

pub fn write_csv(events: &[AerEvent]) -> String {
    let mut out = String::from("ts,x,y,pol\n");
    for e in events {
        let _ = writeln!(out, "{},{},{},{}", e.ts_us, e.x, e.y, e.pol);
    }
    out
}

pub fn write_binary(events: &[AerEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(events.len() * RECORD_BYTES);
    for e in events {
        out.extend_from_slice(&e.ts_us.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.pol as u8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs() {
        assert!(parse_csv("").unwrap().is_empty());
        assert!(parse_binary(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_csv_record() {
        assert_eq!(
            parse_csv("100,3,4,1").unwrap(),
            vec![AerEvent {
                ts_us: 100,
                x: 3,
                y: 4,
                pol: 1
            }]
        );
    }

    #[test]
    fn csv_header_comments_and_sorting() {
        let ev = parse_csv("ts,x,y,pol\n# comment\n50,1,1,-1\n\n10,2,2,1\n").unwrap();
        assert_eq!(ev.iter().map(|e| e.ts_us).collect::<Vec<_>>(), vec![10, 50]);
    }

    #[test]
    fn csv_errors_carry_byte_offsets() {
        let text = "1,2,3,1\n4,5,6\n";
        assert_eq!(parse_csv(text), Err(malformed(8, "expected 4 fields, found 3")));
        assert!(matches!(parse_csv("1,2,3,7\n"), Err(AerError::Malformed { offset: 0, .. })));
        assert!(matches!(parse_csv("1,2,3,1\n-5,0,0,1\n"), Err(AerError::Malformed { offset: 8, .. })));
        assert!(matches!(parse_csv("1,x,3,1"), Err(AerError::Malformed { offset: 0, .. })));
    }

    #[test]
    fn binary_layout_and_errors() {
        let e = AerEvent {
            ts_us: 0x0403_0201,
            x: 0x0605,
            y: 0x0807,
            pol: -1,
        };
        let b = write_binary(&[e]);
        assert_eq!(b, vec![1, 2, 3, 4, 5, 6, 7, 8, 0xff]);
        assert_eq!(parse_binary(&b).unwrap(), vec![e]);
        let mut bad = b.clone();
        bad.extend_from_slice(&[0, 0]);
        assert!(matches!(parse_binary(&bad), Err(AerError::Malformed { offset: 9, .. })));
        bad.truncate(9);
        bad[8] = 5;
        assert!(matches!(parse_binary(&bad), Err(AerError::Malformed { offset: 8, .. })));
    }

    #[test]
    fn bounds_report_record_offset() {
        let text = b"ts,x,y,pol\n5,1,1,1\n1,40,1,1\n";
        assert!(matches!(
            parse_bounded(text, AerFormat::Csv, 32, 32),
            Err(AerError::OutOfBounds { offset: 19, x: 40, .. })
        ));
        assert_eq!(parse_bounded(text, AerFormat::Csv, 64, 32).unwrap().len(), 2);
        let late = AerEvent {
            ts_us: 9,
            x: 0,
            y: 33,
            pol: 1,
        };
        let early = AerEvent { ts_us: 1, y: 0, ..late };
        let b = write_binary(&[late, early]);
        assert!(matches!(
            parse_bounded(&b, AerFormat::BinaryV1, 32, 32),
            Err(AerError::OutOfBounds { offset: 0, y: 33, .. })
        ));
    }
}
