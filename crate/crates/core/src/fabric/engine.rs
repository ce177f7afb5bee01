//! Discrete-event engine tying routers, memories and neural cores together.
//!
//! Packet events are ordered by `(time, seq)` in an [`EventQueue`]. Neuron
//! integration runs on a fixed global step interleaved with the queue: all
//! events at or before a step's start are processed before the step, and
//! spikes produced by a step are emitted at its end.

use super::config::{EnergyFj, FabricConfig, LatencyPs};
use super::queue::EventQueue;
use super::router::{
    r1_dispatch, r1_emit, r2_route, r3_route, Port, R1Decision, R2Decision, R2Direction, RouteFault,
    SramSlots, SRAM_WORDS,
};
use super::stats::SimStats;
use super::{FabricError, SimTime};
use crate::neuro::{CoreParams, NeuralCore, CAM_WORDS_PER_NEURON};
use crate::packets::{
    CamEntry, ChipCoord, MemoryImage, NeuronAddr, Packet, RoutingWord, SlotAddr, MAX_HOPS, MAX_TAG,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Content of an externally injected event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Broadcast `tag` into `core` of the destination chip.
    Stimulus { core: u8, tag: u16 },
    Program(Program),
}

/// A memory-programming write. `None` clears the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    Sram {
        core: u8,
        neuron: u16,
        slot: u8,
        word: Option<RoutingWord>,
    },
    Cam {
        core: u8,
        neuron: u16,
        slot: u8,
        entry: Option<CamEntry>,
    },
}

/// An event presented to the input interface of chip `entry`, addressed to
/// chip `dest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalEvent {
    pub time_ps: SimTime,
    pub entry: ChipCoord,
    pub dest: ChipCoord,
    pub payload: Payload,
}

impl ExternalEvent {
    pub fn stimulus(time_ps: SimTime, chip: ChipCoord, core: u8, tag: u16) -> Self {
        ExternalEvent {
            time_ps,
            entry: chip,
            dest: chip,
            payload: Payload::Stimulus { core, tag },
        }
    }

    pub fn program(time_ps: SimTime, chip: ChipCoord, program: Program) -> Self {
        ExternalEvent {
            time_ps,
            entry: chip,
            dest: chip,
            payload: Payload::Program(program),
        }
    }
}

#[derive(Debug, Clone)]
enum Ev {
    Spike(NeuronAddr),
    External(ExternalEvent),
    R1Out { chip: usize, core: u8, p: Packet },
    R2Up { chip: usize, p: Packet },
    R3 { chip: usize, arrival: Port, p: Packet },
    R2Down { chip: usize, p: Packet },
    R1In { chip: usize, core: u8, p: Packet },
    Broadcast { chip: usize, core: u8, p: Packet },
}

impl Ev {
    fn name(&self) -> &'static str {
        match self {
            Ev::Spike(_) => "spike",
            Ev::External(_) => "external",
            Ev::R1Out { .. } => "r1_out",
            Ev::R2Up { .. } => "r2_up",
            Ev::R3 { .. } => "r3",
            Ev::R2Down { .. } => "r2_down",
            Ev::R1In { .. } => "r1_in",
            Ev::Broadcast { .. } => "broadcast",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Flight {
    sent_ps: SimTime,
    r3_hops: u32,
    external: bool,
}

/// A packet that completed its broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub seq: u64,
    pub src: NeuronAddr,
    pub external: bool,
    pub chip: ChipCoord,
    pub core: u8,
    pub tag: u16,
    pub sent_ps: SimTime,
    pub delivered_ps: SimTime,
    pub r3_hops: u32,
    pub matches: u32,
}

impl Delivery {
    pub fn latency_ps(&self) -> SimTime {
        self.delivered_ps - self.sent_ps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub time_ps: SimTime,
    pub seq: u64,
    pub chip: ChipCoord,
    pub fault: RouteFault,
}

/// One line of the event trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_ps: SimTime,
    pub seq: u64,
    pub event: &'static str,
    pub location: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RasterEntry {
    pub time_ps: SimTime,
    pub chip: u16,
    pub core: u8,
    pub neuron: u16,
}

/// What [`Engine::step`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fired {
    Event(TraceRecord),
    Tick { time_ps: SimTime, spikes: usize },
}

#[derive(Debug, Clone)]
struct CoreNode {
    sram: Vec<SramSlots>,
    neural: NeuralCore,
    loop_free_at: SimTime,
    cam_free_at: SimTime,
}

#[derive(Debug, Clone)]
struct ChipState {
    cores: Vec<CoreNode>,
    input_free_at: SimTime,
    port_free_at: [SimTime; 5],
}

pub struct Engine {
    cfg: FabricConfig,
    lat: LatencyPs,
    energy: EnergyFj,
    dt_ps: SimTime,
    chips: Vec<ChipState>,
    queue: EventQueue<Ev>,
    stats: SimStats,
    next_packet_seq: u64,
    inflight: BTreeMap<u64, Flight>,
    next_tick: SimTime,
    jitter_rng: ChaCha8Rng,
    mismatch_rng: ChaCha8Rng,
    trace: Option<Vec<TraceRecord>>,
    deliveries: Option<Vec<Delivery>>,
    raster: Vec<RasterEntry>,
    faults: Vec<Fault>,
    spike_buf: Vec<u16>,
}

impl Engine {
    pub fn new(cfg: FabricConfig) -> Result<Self, FabricError> {
        cfg.validate()?;
        let mut mismatch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        mismatch_rng.set_stream(1);
        let mut jitter_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        jitter_rng.set_stream(2);
        let n = cfg.neurons_per_core as usize;
        let mut chips = Vec::with_capacity(cfg.chips());
        for _ in 0..cfg.chips() {
            let mut cores = Vec::with_capacity(cfg.cores_per_chip as usize);
            for _ in 0..cfg.cores_per_chip {
                let mut neural = NeuralCore::new(n, cfg.core);
                neural.apply_mismatch(cfg.mismatch_sigma, &mut mismatch_rng)?;
                cores.push(CoreNode {
                    sram: vec![[None; SRAM_WORDS]; n],
                    neural,
                    loop_free_at: 0,
                    cam_free_at: 0,
                });
            }
            chips.push(ChipState {
                cores,
                input_free_at: 0,
                port_free_at: [0; 5],
            });
        }
        Ok(Engine {
            lat: cfg.latency.to_ps(),
            energy: cfg.energy_table().to_fj(),
            dt_ps: cfg.neuron_dt_ps(),
            stats: SimStats::new(cfg.hist_bin_ps()),
            cfg,
            chips,
            queue: EventQueue::new(),
            next_packet_seq: 0,
            inflight: BTreeMap::new(),
            next_tick: 0,
            jitter_rng,
            mismatch_rng,
            trace: None,
            deliveries: Some(Vec::new()),
            raster: Vec::new(),
            faults: Vec::new(),
            spike_buf: Vec::new(),
        })
    }

    pub fn config(&self) -> &FabricConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    /// Enables or disables the per-event trace log.
    pub fn set_trace(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    /// Enables or disables keeping one record per delivered packet.
    pub fn set_record_deliveries(&mut self, on: bool) {
        self.deliveries = on.then(Vec::new);
    }

    fn chip_index(&self, c: ChipCoord) -> Result<usize, FabricError> {
        if !self.cfg.contains(c) {
            return Err(FabricError::Address(format!("chip {c} outside the mesh")));
        }
        Ok(c.index(self.cfg.grid_w) as usize)
    }

    fn coord(&self, chip: usize) -> ChipCoord {
        ChipCoord::from_index(chip as u16, self.cfg.grid_w)
    }

    fn check_core(&self, core: u8, neuron: u16) -> Result<(), FabricError> {
        if core >= self.cfg.cores_per_chip || neuron >= self.cfg.neurons_per_core {
            return Err(FabricError::Address(format!("core {core} neuron {neuron} out of range")));
        }
        Ok(())
    }

    fn node(&mut self, chip: ChipCoord, core: u8) -> Result<&mut CoreNode, FabricError> {
        let i = self.chip_index(chip)?;
        self.check_core(core, 0)?;
        Ok(&mut self.chips[i].cores[core as usize])
    }

    pub fn core(&self, chip: ChipCoord, core: u8) -> Result<&NeuralCore, FabricError> {
        let i = self.chip_index(chip)?;
        self.check_core(core, 0)?;
        Ok(&self.chips[i].cores[core as usize].neural)
    }

    pub fn set_core_params(&mut self, chip: ChipCoord, core: u8, params: CoreParams) -> Result<(), FabricError> {
        params
            .validate()
            .map_err(|e| FabricError::Config(format!("core {chip}:{core}: {e}")))?;
        let sigma = self.cfg.mismatch_sigma;
        let i = self.chip_index(chip)?;
        self.check_core(core, 0)?;
        let neural = &mut self.chips[i].cores[core as usize].neural;
        neural.set_params(params);
        neural.apply_mismatch(sigma, &mut self.mismatch_rng)?;
        Ok(())
    }

    pub fn sram(&self, addr: NeuronAddr) -> Result<&SramSlots, FabricError> {
        let i = self.chip_index(addr.chip)?;
        self.check_core(addr.core, addr.neuron)?;
        Ok(&self.chips[i].cores[addr.core as usize].sram[addr.neuron as usize])
    }

    pub fn write_sram(&mut self, addr: NeuronAddr, slot: u8, word: Option<RoutingWord>) -> Result<(), FabricError> {
        self.check_core(addr.core, addr.neuron)?;
        if slot as usize >= SRAM_WORDS {
            return Err(FabricError::Address(format!("SRAM slot {slot} out of range")));
        }
        if let Some(w) = &word {
            w.validate().map_err(|e| FabricError::Address(e.to_string()))?;
        }
        self.node(addr.chip, addr.core)?.sram[addr.neuron as usize][slot as usize] = word;
        Ok(())
    }

    pub fn write_cam(&mut self, addr: NeuronAddr, slot: u8, entry: Option<CamEntry>) -> Result<(), FabricError> {
        self.check_core(addr.core, addr.neuron)?;
        let node = self.node(addr.chip, addr.core)?;
        match entry {
            Some(e) => node.neural.write_cam(addr.neuron, slot, e)?,
            None => node.neural.clear_cam(addr.neuron, slot)?,
        };
        Ok(())
    }

    /// Programs every SRAM and CAM word listed in `image`.
    pub fn load_image(&mut self, image: &MemoryImage) -> Result<(), FabricError> {
        let grid_w = self.cfg.grid_w;
        let addr = |a: &SlotAddr| NeuronAddr {
            chip: ChipCoord::from_index(a.chip, grid_w),
            core: a.core,
            neuron: a.neuron,
        };
        for (a, w) in &image.sram {
            if a.chip as usize >= self.cfg.chips() {
                return Err(FabricError::Address(format!("image chip index {} outside the mesh", a.chip)));
            }
            self.write_sram(addr(a), a.slot, Some(*w))?;
        }
        for (a, e) in &image.cam {
            if a.chip as usize >= self.cfg.chips() {
                return Err(FabricError::Address(format!("image chip index {} outside the mesh", a.chip)));
            }
            self.write_cam(addr(a), a.slot, Some(*e))?;
        }
        Ok(())
    }

    /// Current SRAM and CAM contents.
    pub fn memory_image(&self) -> MemoryImage {
        let mut img = MemoryImage::new();
        for (ci, chip) in self.chips.iter().enumerate() {
            for (k, node) in chip.cores.iter().enumerate() {
                for (n, slots) in node.sram.iter().enumerate() {
                    for (s, w) in slots.iter().enumerate() {
                        if let Some(w) = w {
                            img.sram
                                .insert(SlotAddr::new(ci as u16, k as u8, n as u16, s as u8), *w);
                        }
                    }
                }
                for (n, s, e) in node.neural.memory().entries() {
                    img.cam.insert(SlotAddr::new(ci as u16, k as u8, n, s), e);
                }
            }
        }
        img
    }

    /// Queues a neuron output spike, as if produced by the neuron at `time_ps`.
    pub fn inject_spike(&mut self, time_ps: SimTime, src: NeuronAddr) -> Result<(), FabricError> {
        self.chip_index(src.chip)?;
        self.check_core(src.core, src.neuron)?;
        self.queue.push(time_ps, Ev::Spike(src));
        Ok(())
    }

    /// Queues events at the input interfaces. Addresses are checked here;
    /// chip mismatches are resolved when the event is accepted.
    pub fn inject_external(&mut self, events: &[ExternalEvent]) -> Result<(), FabricError> {
        for ev in events {
            self.chip_index(ev.entry)?;
            match ev.payload {
                Payload::Stimulus { tag, .. } => {
                    if tag > MAX_TAG {
                        return Err(FabricError::Address(format!("stimulus tag {tag} exceeds 10 bits")));
                    }
                }
                Payload::Program(Program::Sram { core, neuron, slot, word }) => {
                    self.check_core(core, neuron)?;
                    if slot as usize >= SRAM_WORDS {
                        return Err(FabricError::Address(format!("SRAM slot {slot} out of range")));
                    }
                    if let Some(w) = word {
                        w.validate().map_err(|e| FabricError::Address(e.to_string()))?;
                    }
                }
                Payload::Program(Program::Cam { core, neuron, slot, entry }) => {
                    self.check_core(core, neuron)?;
                    if slot as usize >= CAM_WORDS_PER_NEURON {
                        return Err(FabricError::Address(format!("CAM slot {slot} out of range")));
                    }
                    if let Some(e) = entry {
                        if e.tag > MAX_TAG {
                            return Err(FabricError::Address(format!("CAM tag {} exceeds 10 bits", e.tag)));
                        }
                    }
                }
            }
        }
        for ev in events {
            self.queue.push(ev.time_ps, Ev::External(*ev));
        }
        Ok(())
    }

    fn jitter(&mut self) -> SimTime {
        if self.cfg.jitter_ps == 0 {
            0
        } else {
            self.jitter_rng.random_range(0..=self.cfg.jitter_ps)
        }
    }

    fn charge(&mut self, fj: u64, times: u64) {
        self.stats.energy_fj += fj * times;
    }

    fn new_packet(&mut self, word: &RoutingWord, src: NeuronAddr, t: SimTime, external: bool) -> Packet {
        let seq = self.next_packet_seq;
        self.next_packet_seq += 1;
        self.inflight.insert(
            seq,
            Flight {
                sent_ps: t,
                r3_hops: 0,
                external,
            },
        );
        Packet::from_word(word, 0, src, seq)
    }

    fn fault(&mut self, t: SimTime, chip: usize, p: &Packet, fault: RouteFault) {
        self.stats.counters.faults += 1;
        self.inflight.remove(&p.seq);
        log::debug!("t={t} packet {} fault: {fault}", p.seq);
        self.faults.push(Fault {
            time_ps: t,
            seq: p.seq,
            chip: self.coord(chip),
            fault,
        });
    }

    fn schedule_broadcast(&mut self, t: SimTime, chip: usize, core: u8, p: Packet) {
        let node = &mut self.chips[chip].cores[core as usize];
        let start = if self.cfg.congestion {
            t.max(node.cam_free_at)
        } else {
            t
        };
        let done = start + self.lat.broadcast;
        node.cam_free_at = done;
        self.queue.push(done, Ev::Broadcast { chip, core, p });
    }

    fn location(&self, ev: &Ev) -> String {
        let pkt = |chip: usize, core: Option<u8>, p: &Packet| {
            let mut s = format!("chip={}", self.coord(chip));
            if let Some(c) = core {
                let _ = write!(s, " core={c}");
            }
            let _ = write!(s, " pkt={} tag={} dst_core={} dx={} dy={}", p.seq, p.tag, p.core, p.dx, p.dy);
            s
        };
        match ev {
            Ev::Spike(a) => format!("neuron={a}"),
            Ev::External(e) => format!("entry={} dest={} {:?}", e.entry, e.dest, e.payload),
            Ev::R1Out { chip, core, p } | Ev::R1In { chip, core, p } | Ev::Broadcast { chip, core, p } => {
                pkt(*chip, Some(*core), p)
            }
            Ev::R2Up { chip, p } | Ev::R2Down { chip, p } => pkt(*chip, None, p),
            Ev::R3 { chip, arrival, p } => format!("{} from={arrival}", pkt(*chip, None, p)),
        }
    }

    fn process(&mut self, t: SimTime, seq: u64, ev: Ev) -> Result<TraceRecord, FabricError> {
        let record = TraceRecord {
            time_ps: t,
            seq,
            event: ev.name(),
            location: self.location(&ev),
        };
        if let Some(tr) = &mut self.trace {
            tr.push(record.clone());
        }
        match ev {
            Ev::Spike(src) => self.on_spike(t, src)?,
            Ev::External(e) => self.on_external(t, e)?,
            Ev::R1Out { chip, core, p } => match r1_dispatch(&p, core) {
                R1Decision::BroadcastLocal => self.schedule_broadcast(t, chip, core, p),
                R1Decision::ToR2 => {
                    self.stats.counters.cross_core += 1;
                    self.charge(self.energy.route_diff_core, 1);
                    let at = t + self.lat.r2_hop + self.jitter();
                    self.queue.push(at, Ev::R2Up { chip, p });
                }
            },
            Ev::R2Up { chip, p } => match r2_route(&p, R2Direction::Up, self.cfg.cores_per_chip) {
                Ok(R2Decision::ToR3) => {
                    self.stats.counters.cross_chip += 1;
                    self.queue.push(
                        t,
                        Ev::R3 {
                            chip,
                            arrival: Port::Local,
                            p,
                        },
                    );
                }
                Ok(R2Decision::ToCore(core)) => {
                    let at = t + self.lat.r2_hop + self.jitter();
                    self.queue.push(at, Ev::R1In { chip, core, p });
                }
                Err(f) => self.fault(t, chip, &p, f),
            },
            Ev::R3 { chip, arrival, p } => {
                let (exit, next) = r3_route(&p, arrival);
                let state = &mut self.chips[chip];
                let start = if self.cfg.congestion {
                    t.max(state.port_free_at[exit.index()])
                } else {
                    t
                };
                let depart = start + self.lat.r3_hop;
                state.port_free_at[exit.index()] = depart;
                if exit == Port::Local {
                    self.queue.push(depart, Ev::R2Down { chip, p: next });
                } else {
                    let here = self.coord(chip);
                    match exit.neighbour(here, self.cfg.grid_w, self.cfg.grid_h) {
                        None => self.fault(t, chip, &p, RouteFault::OffMesh { chip: here, port: exit }),
                        Some(n) => {
                            self.stats.counters.r3_hops += 1;
                            self.charge(self.energy.r3_hop, 1);
                            if let Some(f) = self.inflight.get_mut(&p.seq) {
                                f.r3_hops += 1;
                            }
                            let at = depart + self.lat.chip_traverse + self.jitter();
                            self.queue.push(
                                at,
                                Ev::R3 {
                                    chip: n.index(self.cfg.grid_w) as usize,
                                    arrival: exit.opposite(),
                                    p: next,
                                },
                            );
                        }
                    }
                }
            }
            Ev::R2Down { chip, p } => match r2_route(&p, R2Direction::Down, self.cfg.cores_per_chip) {
                Ok(R2Decision::ToCore(core)) => {
                    let at = t + self.lat.r2_hop + self.jitter();
                    self.queue.push(at, Ev::R1In { chip, core, p });
                }
                Ok(R2Decision::ToR3) => unreachable!("down-stream R2 never returns to R3"),
                Err(f) => self.fault(t, chip, &p, f),
            },
            Ev::R1In { chip, core, p } => self.schedule_broadcast(t, chip, core, p),
            Ev::Broadcast { chip, core, p } => self.on_broadcast(t, chip, core, p),
        }
        Ok(record)
    }

    fn on_spike(&mut self, t: SimTime, src: NeuronAddr) -> Result<(), FabricError> {
        self.stats.counters.spikes += 1;
        self.charge(self.energy.spike_gen, 1);
        let chip = self.chip_index(src.chip)?;
        let slots = self.chips[chip].cores[src.core as usize].sram[src.neuron as usize];
        let packets = r1_emit(src, &slots, &mut self.next_packet_seq);
        if packets.is_empty() {
            self.stats.counters.dropped_at_source += 1;
            return Ok(());
        }
        let k = packets.len() as u64;
        self.stats.counters.encodes += 1;
        self.stats.counters.sram_reads += k;
        self.charge(self.energy.encode_append, 1);
        let node = &mut self.chips[chip].cores[src.core as usize];
        let start = if self.cfg.congestion {
            t.max(node.loop_free_at)
        } else {
            t
        };
        node.loop_free_at = start + k * self.lat.r1_loop_read;
        for (i, p) in packets.into_iter().enumerate() {
            self.inflight.insert(
                p.seq,
                Flight {
                    sent_ps: t,
                    r3_hops: 0,
                    external: false,
                },
            );
            let at = start + (i as u64 + 1) * self.lat.r1_loop_read + self.jitter();
            self.queue.push(
                at,
                Ev::R1Out {
                    chip,
                    core: src.core,
                    p,
                },
            );
        }
        Ok(())
    }

    fn on_external(&mut self, t: SimTime, e: ExternalEvent) -> Result<(), FabricError> {
        let entry = self.chip_index(e.entry)?;
        if self.cfg.throttle_io {
            let free = self.chips[entry].input_free_at;
            if t < free {
                self.queue.push(free, Ev::External(e));
                return Ok(());
            }
            self.chips[entry].input_free_at = t + self.cfg.input_spacing_ps();
        }
        self.stats.counters.events_injected += 1;
        let src = NeuronAddr {
            chip: e.entry,
            core: 0,
            neuron: 0,
        };
        if e.dest != e.entry {
            let dx = e.dest.x as i32 - e.entry.x as i32;
            let dy = e.dest.y as i32 - e.entry.y as i32;
            let reachable = dx.unsigned_abs() <= MAX_HOPS as u32 && dy.unsigned_abs() <= MAX_HOPS as u32;
            match e.payload {
                Payload::Stimulus { core, tag } if self.cfg.forward_misaddressed && reachable => {
                    self.stats.counters.forwarded_misaddressed += 1;
                    let word = RoutingWord::toward(tag, core, dx, dy);
                    let p = self.new_packet(&word, src, e.time_ps, true);
                    self.queue.push(
                        t,
                        Ev::R3 {
                            chip: entry,
                            arrival: Port::Local,
                            p,
                        },
                    );
                }
                _ => {
                    self.stats.counters.dropped_misaddressed += 1;
                    log::debug!("t={t} dropped event for chip {} at chip {}", e.dest, e.entry);
                }
            }
            return Ok(());
        }
        match e.payload {
            Payload::Stimulus { core, tag } => {
                let p = self.new_packet(&RoutingWord::local(tag, core), src, e.time_ps, true);
                self.queue.push(t, Ev::R2Down { chip: entry, p });
            }
            Payload::Program(prog) => {
                self.stats.counters.programming_writes += 1;
                match prog {
                    Program::Sram { core, neuron, slot, word } => {
                        self.write_sram(NeuronAddr { chip: e.dest, core, neuron }, slot, word)?
                    }
                    Program::Cam { core, neuron, slot, entry } => {
                        self.write_cam(NeuronAddr { chip: e.dest, core, neuron }, slot, entry)?
                    }
                }
            }
        }
        Ok(())
    }

    fn on_broadcast(&mut self, t: SimTime, chip: usize, core: u8, p: Packet) {
        let m = self.chips[chip].cores[core as usize]
            .neural
            .broadcast(p.tag, t)
            .pulses() as u64;
        self.stats.counters.broadcasts += 1;
        self.stats.counters.cam_matches += m;
        self.stats.counters.delivered += 1;
        self.charge(self.energy.broadcast_same_core, 1);
        self.charge(self.energy.pulse_extend, m);
        let flight = self.inflight.remove(&p.seq).unwrap_or(Flight {
            sent_ps: t,
            r3_hops: 0,
            external: false,
        });
        self.stats.latency.record(t - flight.sent_ps);
        if let Some(d) = &mut self.deliveries {
            d.push(Delivery {
                seq: p.seq,
                src: p.src,
                external: flight.external,
                chip: ChipCoord::from_index(chip as u16, self.cfg.grid_w),
                core,
                tag: p.tag,
                sent_ps: flight.sent_ps,
                delivered_ps: t,
                r3_hops: flight.r3_hops,
                matches: m as u32,
            });
        }
    }

    fn tick(&mut self) -> Result<usize, FabricError> {
        let t = self.next_tick;
        let dt = self.dt_ps;
        let mut fired = 0;
        let mut buf = std::mem::take(&mut self.spike_buf);
        for ci in 0..self.chips.len() {
            for k in 0..self.chips[ci].cores.len() {
                buf.clear();
                self.chips[ci].cores[k].neural.tick(t, dt, &mut buf)?;
                for &n in &buf {
                    let chip = self.coord(ci);
                    self.raster.push(RasterEntry {
                        time_ps: t + dt,
                        chip: ci as u16,
                        core: k as u8,
                        neuron: n,
                    });
                    self.queue.push(
                        t + dt,
                        Ev::Spike(NeuronAddr {
                            chip,
                            core: k as u8,
                            neuron: n,
                        }),
                    );
                }
                fired += buf.len();
            }
        }
        self.spike_buf = buf;
        self.next_tick = t + dt;
        self.queue.set_now(t);
        Ok(fired)
    }

    fn next_is_tick(&self, horizon: Option<SimTime>) -> Option<bool> {
        let tick_ok = self.cfg.dynamics && horizon.is_none_or(|h| self.next_tick + self.dt_ps <= h);
        let ev = self.queue.peek_time().filter(|&te| horizon.is_none_or(|h| te <= h));
        match (ev, tick_ok) {
            (Some(te), true) => Some(self.next_tick < te),
            (Some(_), false) => Some(false),
            (None, true) => Some(true),
            (None, false) => None,
        }
    }

    /// Processes the next event or integration step. With dynamics enabled
    /// there is always a next step.
    pub fn step(&mut self) -> Result<Option<Fired>, FabricError> {
        match self.next_is_tick(None) {
            None => Ok(None),
            Some(true) => {
                let t = self.next_tick;
                let spikes = self.tick()?;
                Ok(Some(Fired::Tick { time_ps: t, spikes }))
            }
            Some(false) => {
                let (t, seq, ev) = self.queue.pop().expect("peeked");
                Ok(Some(Fired::Event(self.process(t, seq, ev)?)))
            }
        }
    }

    /// Runs every event and integration step up to `t_end` and returns a
    /// snapshot of the statistics.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<SimStats, FabricError> {
        if t_end < self.now() {
            return Err(FabricError::TimeReversal {
                t_end,
                now: self.now(),
            });
        }
        while let Some(is_tick) = self.next_is_tick(Some(t_end)) {
            if is_tick {
                self.tick()?;
            } else {
                let (t, seq, ev) = self.queue.pop().expect("peeked");
                self.process(t, seq, ev)?;
            }
        }
        self.queue.set_now(t_end);
        Ok(self.stats())
    }

    pub fn stats(&self) -> SimStats {
        let mut s = self.stats.clone();
        s.time_ps = self.now();
        s.in_flight = self.inflight.len() as u64;
        s
    }

    /// Packets created so far (R1 reads plus accepted stimulus).
    pub fn packets_created(&self) -> u64 {
        self.next_packet_seq
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn deliveries(&self) -> &[Delivery] {
        self.deliveries.as_deref().unwrap_or(&[])
    }

    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn raster(&self) -> &[RasterEntry] {
        &self.raster
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn render_trace(&self) -> String {
        let mut out = String::from("time_ns\tseq\tevent\tlocation\n");
        for r in self.trace() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", fmt_ns(r.time_ps), r.seq, r.event, r.location);
        }
        out
    }

    pub fn render_raster(&self) -> String {
        render_raster(&self.raster)
    }
}

/// Formats picoseconds as nanoseconds with three decimals.
pub fn fmt_ns(ps: SimTime) -> String {
    format!("{}.{:03}", ps / 1000, ps % 1000)
}

pub fn render_raster(raster: &[RasterEntry]) -> String {
    let mut out = String::from("time_ns\tchip\tcore\tneuron\n");
    for r in raster {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", fmt_ns(r.time_ps), r.chip, r.core, r.neuron);
    }
    out
}
