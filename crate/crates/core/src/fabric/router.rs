//! Behavioural models of the three router levels. These are pure functions
//! over packets; timing and accounting live in the engine.

use crate::packets::{ChipCoord, NeuronAddr, Packet, RoutingWord, Sign};
use std::fmt;

/// SRAM routing words per source neuron.
pub const SRAM_WORDS: usize = 4;

/// The R1 routing table of one neuron.
pub type SramSlots = [Option<RoutingWord>; SRAM_WORDS];

/// Runs the R1 memory-address loop for one spike: one packet per valid slot
/// in slot order, with `fanout_hdr` counting the reads still to come.
pub fn r1_emit(src: NeuronAddr, slots: &SramSlots, next_seq: &mut u64) -> Vec<Packet> {
    let k = slots.iter().flatten().count();
    slots
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, w)| {
            let seq = *next_seq;
            *next_seq += 1;
            Packet::from_word(w, (k - 1 - i) as u8, src, seq)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R1Decision {
    BroadcastLocal,
    ToR2,
}

pub fn r1_dispatch(p: &Packet, local_core: u8) -> R1Decision {
    if p.dx == 0 && p.dy == 0 && p.core == local_core {
        R1Decision::BroadcastLocal
    } else {
        R1Decision::ToR2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R2Direction {
    /// From an R1 toward the chip root.
    Up,
    /// From the R3 router into the chip.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R2Decision {
    ToR3,
    ToCore(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteFault {
    CoreOutOfRange { core: u8, cores_per_chip: u8 },
    OffMesh { chip: ChipCoord, port: Port },
}

impl fmt::Display for RouteFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteFault::CoreOutOfRange { core, cores_per_chip } => {
                write!(f, "core id {core} out of range ({cores_per_chip} cores per chip)")
            }
            RouteFault::OffMesh { chip, port } => {
                write!(f, "exit {port} from chip {chip} leaves the mesh")
            }
        }
    }
}

pub fn r2_route(p: &Packet, dir: R2Direction, cores_per_chip: u8) -> Result<R2Decision, RouteFault> {
    if dir == R2Direction::Up && (p.dx != 0 || p.dy != 0) {
        return Ok(R2Decision::ToR3);
    }
    if p.core >= cores_per_chip {
        return Err(RouteFault::CoreOutOfRange {
            core: p.core,
            cores_per_chip,
        });
    }
    Ok(R2Decision::ToCore(p.core))
}

/// R3 ports. `Local` connects to the chip's R2 root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    Local,
    North,
    South,
    East,
    West,
}

impl Port {
    pub const ALL: [Port; 5] = [Port::Local, Port::North, Port::South, Port::East, Port::West];

    pub fn opposite(self) -> Port {
        match self {
            Port::Local => Port::Local,
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Neighbour reached through this port, if it lies on a `w`×`h` mesh.
    pub fn neighbour(self, c: ChipCoord, w: u8, h: u8) -> Option<ChipCoord> {
        let (x, y) = (c.x as i16, c.y as i16);
        let (nx, ny) = match self {
            Port::Local => return Some(c),
            Port::North => (x, y + 1),
            Port::South => (x, y - 1),
            Port::East => (x + 1, y),
            Port::West => (x - 1, y),
        };
        (nx >= 0 && ny >= 0 && nx < w as i16 && ny < h as i16).then(|| ChipCoord::new(nx as u8, ny as u8))
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Local => "L",
            Port::North => "N",
            Port::South => "S",
            Port::East => "E",
            Port::West => "W",
        })
    }
}

fn x_port(s: Sign) -> Port {
    match s {
        Sign::Plus => Port::East,
        Sign::Minus => Port::West,
    }
}

fn y_port(s: Sign) -> Port {
    match s {
        Sign::Plus => Port::North,
        Sign::Minus => Port::South,
    }
}

/// One XY routing decision. Packets arriving from north or south already
/// finished their X leg, so only `dy` is inspected.
pub fn r3_route(p: &Packet, arrival: Port) -> (Port, Packet) {
    let mut out = *p;
    let check_x = matches!(arrival, Port::Local | Port::East | Port::West);
    if check_x && p.dx != 0 {
        out.dx -= 1;
        (x_port(p.sign_x), out)
    } else if p.dy != 0 {
        out.dy -= 1;
        (y_port(p.sign_y), out)
    } else {
        (Port::Local, out)
    }
}

/// Where a routing word sent from `src` ends up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTrace {
    pub chip: ChipCoord,
    pub core: u8,
    pub r3_hops: u32,
    /// Chips visited, starting with the source.
    pub path: Vec<ChipCoord>,
}

/// Walks a routing word through R1, R2 and R3 without timing.
pub fn trace_route(
    src: NeuronAddr,
    word: &RoutingWord,
    grid_w: u8,
    grid_h: u8,
    cores_per_chip: u8,
) -> Result<RouteTrace, RouteFault> {
    let mut p = Packet::from_word(word, 0, src, 0);
    let mut chip = src.chip;
    let mut path = vec![chip];
    let mut hops = 0;
    if r1_dispatch(&p, src.core) == R1Decision::BroadcastLocal {
        return Ok(RouteTrace {
            chip,
            core: src.core,
            r3_hops: 0,
            path,
        });
    }
    match r2_route(&p, R2Direction::Up, cores_per_chip)? {
        R2Decision::ToCore(core) => {
            return Ok(RouteTrace {
                chip,
                core,
                r3_hops: 0,
                path,
            })
        }
        R2Decision::ToR3 => {}
    }
    let mut arrival = Port::Local;
    loop {
        let (exit, next) = r3_route(&p, arrival);
        p = next;
        if exit == Port::Local {
            break;
        }
        chip = exit
            .neighbour(chip, grid_w, grid_h)
            .ok_or(RouteFault::OffMesh { chip, port: exit })?;
        hops += 1;
        path.push(chip);
        arrival = exit.opposite();
    }
    let R2Decision::ToCore(core) = r2_route(&p, R2Direction::Down, cores_per_chip)? else {
        unreachable!("down-stream R2 always targets a core")
    };
    Ok(RouteTrace {
        chip,
        core,
        r3_hops: hops,
        path,
    })
}
