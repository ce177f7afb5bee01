//! Convolutional demo network and its synthetic event source.
//!
//! Layers: 32x32 input tags, four 8x8 stride-2 convolutions (4x16x16), 2x2
//! sum pooling (4x8x8) and four 64-neuron output populations wired by the
//! readout. Kernel templates are +1 (fast excitatory) and -1 (subtractive
//! inhibitory); their magnitude is the synapse weight of the `conv` set.
//!
//! Templates, row 0 at the top:
//! - vertical edge: +1 in the left four columns, -1 in the right four
//! - horizontal edge: +1 in the top four rows, -1 in the bottom four
//! - up vertex: +1 inside the triangle with apex at the top centre
//! - down vertex: the up vertex flipped vertically

use crate::aer::AerEvent;
use dynapsim_core::compiler::{Connection, NetworkSpec, NeuronId, PopKind};
use dynapsim_core::neuro::CoreParams;
use dynapsim_core::packets::SynType;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const CLASSES: [Suit; 4] = [Suit::Club, Suit::Diamond, Suit::Heart, Suit::Spade];
pub const GLYPH: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suit {
    Club,
    Diamond,
    Heart,
    Spade,
}

impl Suit {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Suit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suit::Club => "club",
            Suit::Diamond => "diamond",
            Suit::Heart => "heart",
            Suit::Spade => "spade",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSpec {
    pub input: u32,
    pub kernels: u32,
    pub kernel: u32,
    pub stride: u32,
    pub pad: u32,
    pub pool: u32,
    pub classes: u32,
    pub out_per_class: u32,
}

impl Default for CnnSpec {
    fn default() -> Self {
        CnnSpec {
            input: 32,
            kernels: 4,
            kernel: 8,
            stride: 2,
            pad: 3,
            pool: 2,
            classes: 4,
            out_per_class: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("CNN shape: {0}")]
pub struct ShapeError(pub String);

impl CnnSpec {
    pub fn conv_side(&self) -> u32 {
        (self.input + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn pool_side(&self) -> u32 {
        self.conv_side() / self.pool
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        let err = |m: String| Err(ShapeError(m));
        if self.input == 0 || self.kernel == 0 || self.stride == 0 || self.pool == 0 {
            return err("sizes must be positive".into());
        }
        if self.input + 2 * self.pad < self.kernel {
            return err(format!("kernel {} larger than padded input", self.kernel));
        }
        if (self.input + 2 * self.pad - self.kernel) % self.stride != 0 {
            return err(format!(
                "input {} with padding {} is not tiled by kernel {} at stride {}",
                self.input, self.pad, self.kernel, self.stride
            ));
        }
        if self.conv_side() % self.pool != 0 {
            return err(format!("conv output {} not divisible by pool {}", self.conv_side(), self.pool));
        }
        if self.kernels != 4 {
            return err(format!("{} kernels requested, four templates exist", self.kernels));
        }
        if self.kernel % 2 != 0 {
            return err("templates need an even kernel size".into());
        }
        if self.kernel * self.kernel > 64 {
            return err(format!("{}x{} kernel exceeds the 64-entry fan-in", self.kernel, self.kernel));
        }
        if self.pool * self.pool * self.kernels > 64 || self.out_per_class == 0 || self.classes == 0 {
            return err("pool or output layer out of range".into());
        }
        Ok(())
    }

    /// Template `k` as +1/-1 values, row-major.
    pub fn template(&self, k: u32) -> Vec<i8> {
        let s = self.kernel as i32;
        let mut out = Vec::with_capacity((s * s) as usize);
        for r in 0..s {
            for c in 0..s {
                let inside_up = {
                    // Apex at the top centre, base on the bottom row.
                    let half = (r as f64 + 1.0) * s as f64 / (2.0 * s as f64);
                    ((c as f64 + 0.5) - s as f64 / 2.0).abs() < half
                };
                let inside_down = {
                    let half = ((s - 1 - r) as f64 + 1.0) * s as f64 / (2.0 * s as f64);
                    ((c as f64 + 0.5) - s as f64 / 2.0).abs() < half
                };
                let plus = match k {
                    0 => c < s / 2,
                    1 => r < s / 2,
                    2 => inside_up,
                    _ => inside_down,
                };
                out.push(if plus { 1 } else { -1 });
            }
        }
        out
    }
}

/// First neuron id of each layer in the emitted netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CnnLayout {
    pub input: NeuronId,
    pub conv: NeuronId,
    pub pool: NeuronId,
    pub out: NeuronId,
    pub input_size: u32,
    pub conv_size: u32,
    pub pool_size: u32,
    pub out_per_class: u32,
    pub classes: u32,
}

impl CnnLayout {
    pub fn class_of_output(&self, id: NeuronId) -> Option<usize> {
        let end = self.out + self.classes * self.out_per_class;
        (self.out..end)
            .contains(&id)
            .then(|| ((id - self.out) / self.out_per_class) as usize)
    }

    pub fn pool_index(&self, id: NeuronId) -> Option<u32> {
        (self.pool..self.pool + self.pool_size)
            .contains(&id)
            .then(|| id - self.pool)
    }
}

pub const CONV_SET: &str = "conv";
pub const POOL_SET: &str = "pool";
pub const OUT_SET: &str = "out";

/// Per-layer core parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerParams {
    pub conv: CoreParams,
    pub pool: CoreParams,
    pub out: CoreParams,
}

impl Default for LayerParams {
    fn default() -> Self {
        // Short membrane and refractory times with no adaptation keep every
        // layer in a graded rate regime well below saturation.
        let mut base = CoreParams::default();
        base.neuron.c_mem_pf = 20.0;
        base.neuron.t_ref_ms = 0.5;
        base.neuron.a_ns = 0.0;
        base.neuron.b_pa = 0.0;
        let mut conv = base;
        conv.fast_exc.weight = 100.0;
        conv.sub_inh.weight = 150.0;
        let mut pool = base;
        pool.fast_exc.weight = 1200.0;
        let mut out = base;
        out.fast_exc.weight = 20.0;
        LayerParams { conv, pool, out }
    }
}

/// Netlist of the feed-forward part; the readout is added by
/// [`add_readout`].
pub fn build_cnn(spec: &CnnSpec, layers: &LayerParams) -> Result<(NetworkSpec, CnnLayout), ShapeError> {
    spec.validate()?;
    let mut net = NetworkSpec::new("cnn", 0);
    net.param_sets.insert(CONV_SET.into(), layers.conv);
    net.param_sets.insert(POOL_SET.into(), layers.pool);
    net.param_sets.insert(OUT_SET.into(), layers.out);

    let side = spec.input;
    let cs = spec.conv_side();
    let ps = spec.pool_side();
    let input = net.add_population("input", side * side, PopKind::Input, CONV_SET);
    let mut conv = 0;
    for k in 0..spec.kernels {
        let first = net.add_population(&format!("conv{k}"), cs * cs, PopKind::Neuron, CONV_SET);
        if k == 0 {
            conv = first;
        }
    }
    let mut pool = 0;
    for k in 0..spec.kernels {
        let first = net.add_population(&format!("pool{k}"), ps * ps, PopKind::Neuron, POOL_SET);
        if k == 0 {
            pool = first;
        }
    }
    let mut out = 0;
    for c in 0..spec.classes {
        let first = net.add_population(&format!("out{c}"), spec.out_per_class, PopKind::Neuron, OUT_SET);
        if c == 0 {
            out = first;
        }
    }

    for k in 0..spec.kernels {
        let t = spec.template(k);
        for i in 0..cs {
            for j in 0..cs {
                let dst = conv + k * cs * cs + i * cs + j;
                for r in 0..spec.kernel {
                    for c in 0..spec.kernel {
                        let y = (i * spec.stride + r) as i64 - spec.pad as i64;
                        let x = (j * spec.stride + c) as i64 - spec.pad as i64;
                        if y < 0 || x < 0 || y >= side as i64 || x >= side as i64 {
                            continue;
                        }
                        let syn = if t[(r * spec.kernel + c) as usize] > 0 {
                            SynType::FastExc
                        } else {
                            SynType::SubInh
                        };
                        net.connect(input + y as u32 * side + x as u32, dst, syn);
                    }
                }
            }
        }
        for i in 0..ps {
            for j in 0..ps {
                let dst = pool + k * ps * ps + i * ps + j;
                for di in 0..spec.pool {
                    for dj in 0..spec.pool {
                        let src = conv + k * cs * cs + (i * spec.pool + di) * cs + j * spec.pool + dj;
                        net.connect(src, dst, SynType::FastExc);
                    }
                }
            }
        }
    }
    let layout = CnnLayout {
        input,
        conv,
        pool,
        out,
        input_size: side * side,
        conv_size: spec.kernels * cs * cs,
        pool_size: spec.kernels * ps * ps,
        out_per_class: spec.out_per_class,
        classes: spec.classes,
    };
    Ok((net, layout))
}

/// Connects each class's pooling neurons (local indices) all-to-all to that
/// class's output population.
pub fn add_readout(net: &mut NetworkSpec, layout: &CnnLayout, wiring: &[Vec<u32>]) {
    for (class, pools) in wiring.iter().enumerate() {
        for &p in pools {
            for o in 0..layout.out_per_class {
                net.connections.push(Connection {
                    src: layout.pool + p,
                    dst: layout.out + class as u32 * layout.out_per_class + o,
                    syn: SynType::FastExc,
                    multiplicity: 1,
                });
            }
        }
    }
}

/// 31x31 glyph mask, row 0 at the top.
pub fn glyph(suit: Suit) -> Vec<bool> {
    let c = (GLYPH as f64 - 1.0) / 2.0;
    let disc = |x: f64, y: f64, cx: f64, cy: f64, r: f64| (x - cx).powi(2) + (y - cy).powi(2) <= r * r;
    // Downward-pointing heart centred horizontally, spanning rows top..top+h.
    let heart = |x: f64, y: f64, top: f64, h: f64| {
        let s = h / 29.0;
        let lobe = 7.5 * s;
        let ly = top + lobe;
        let lx = 6.8 * s;
        let in_lobes = disc(x, y, c - lx, ly, lobe) || disc(x, y, c + lx, ly, lobe);
        let tip = top + h;
        let in_point = y >= ly && y <= tip && (x - c).abs() <= (tip - y) * (lx + lobe) / (tip - ly);
        in_lobes || in_point
    };
    let mut out = vec![false; GLYPH * GLYPH];
    for r in 0..GLYPH {
        for col in 0..GLYPH {
            let (x, y) = (col as f64, r as f64);
            let inside = match suit {
                Suit::Diamond => (x - c).abs() / 9.0 + (y - c).abs() / 15.0 <= 1.0,
                Suit::Heart => heart(x, y, 1.0, 28.0),
                Suit::Spade => {
                    let body = heart(x, 30.0 - y - 5.0, 1.0, 24.0);
                    let stem = y >= 22.0 && y <= 30.0 && (x - c).abs() <= 1.0 + (y - 22.0) * 0.6;
                    body || stem
                }
                Suit::Club => {
                    disc(x, y, c, 6.0, 5.5)
                        || disc(x, y, c - 8.5, 15.5, 5.5)
                        || disc(x, y, c + 8.5, 15.5, 5.5)
                        || (y >= 10.0 && y <= 30.0 && (x - c).abs() <= 1.0)
                        || (y >= 27.0 && y <= 30.0 && (x - c).abs() <= 5.0)
                }
            };
            out[r * GLYPH + col] = inside;
        }
    }
    out
}

/// One stimulus presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Presentation {
    pub suit: Suit,
    pub onset_us: u32,
    pub duration_us: u32,
    /// Glyph placement inside the input frame.
    pub offset_x: u16,
    pub offset_y: u16,
}

/// Poisson pixel events for a sequence of presentations: glyph pixels fire
/// at `rate_hz`, background pixels are silent. Events are sorted.
pub fn render_events<R: Rng + ?Sized>(presentations: &[Presentation], side: u16, rate_hz: f64, rng: &mut R) -> Vec<AerEvent> {
    let mut out = Vec::new();
    let exp = Exp::new(rate_hz / 1e6).expect("positive rate");
    for p in presentations {
        let mask = glyph(p.suit);
        for r in 0..GLYPH {
            for c in 0..GLYPH {
                if !mask[r * GLYPH + c] {
                    continue;
                }
                let x = c as u16 + p.offset_x;
                let y = r as u16 + p.offset_y;
                if x >= side || y >= side {
                    continue;
                }
                let mut t = exp.sample(rng);
                while t < p.duration_us as f64 {
                    out.push(AerEvent {
                        ts_us: p.onset_us + t as u32,
                        x,
                        y,
                        pol: 1,
                    });
                    t += exp.sample(rng);
                }
            }
        }
    }
    out.sort();
    out
}
