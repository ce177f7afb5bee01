//! Fabric configuration: mesh geometry, per-stage latencies, per-operation
//! energies and simulation switches. Loaded from TOML; every field has a
//! default so partial files are accepted.

use super::{FabricError, SimTime};
use crate::neuro::CoreParams;
use crate::packets::{ChipCoord, MAX_CORE_ID};
use serde::{Deserialize, Serialize};

pub const PS_PER_NS: f64 = 1e3;

pub fn ns_to_ps(ns: f64) -> SimTime {
    (ns * PS_PER_NS).round() as SimTime
}

pub fn ms_to_ps(ms: f64) -> SimTime {
    (ms * 1e9).round() as SimTime
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Latencies {
    /// CAM broadcast into a core, including buffering and handshakes.
    pub broadcast_ns: f64,
    /// Pin-to-pin latency of one chip-to-chip link.
    pub chip_traverse_ns: f64,
    /// One decision of an R3 router.
    pub r3_hop_ns: f64,
    /// One 20-bit SRAM read in the R1 loop.
    pub r1_loop_read_ns: f64,
    /// One level of the R2 merge or split tree.
    pub r2_hop_ns: f64,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies {
            broadcast_ns: 27.0,
            chip_traverse_ns: 15.4,
            r3_hop_ns: 2.5,
            // 20 bits at 750 Mb/s.
            r1_loop_read_ns: 20.0 / 0.75,
            r2_hop_ns: 1.0,
        }
    }
}

/// Latencies converted to integer picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyPs {
    pub broadcast: SimTime,
    pub chip_traverse: SimTime,
    pub r3_hop: SimTime,
    pub r1_loop_read: SimTime,
    pub r2_hop: SimTime,
}

impl Latencies {
    pub fn to_ps(&self) -> LatencyPs {
        LatencyPs {
            broadcast: ns_to_ps(self.broadcast_ns),
            chip_traverse: ns_to_ps(self.chip_traverse_ns),
            r3_hop: ns_to_ps(self.r3_hop_ns),
            r1_loop_read: ns_to_ps(self.r1_loop_read_ns),
            r2_hop: ns_to_ps(self.r2_hop_ns),
        }
    }

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("broadcast_ns", self.broadcast_ns),
            ("chip_traverse_ns", self.chip_traverse_ns),
            ("r3_hop_ns", self.r3_hop_ns),
            ("r1_loop_read_ns", self.r1_loop_read_ns),
            ("r2_hop_ns", self.r2_hop_ns),
        ]
    }
}

/// Supply voltages with measured energy figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Supply {
    #[default]
    #[serde(rename = "1.8V")]
    V1_8,
    #[serde(rename = "1.3V")]
    V1_3,
}

/// Energy per operation in pJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyTable {
    pub spike_gen: f64,
    pub encode_append: f64,
    pub broadcast_same_core: f64,
    pub route_diff_core: f64,
    pub pulse_extend: f64,
    /// Charged per R3 mesh hop. Defaults to the route-to-other-core figure.
    pub r3_hop: f64,
}

impl EnergyTable {
    pub fn preset(supply: Supply) -> Self {
        match supply {
            Supply::V1_8 => EnergyTable {
                spike_gen: 883.0,
                encode_append: 883.0,
                broadcast_same_core: 6840.0,
                route_diff_core: 360.0,
                pulse_extend: 324.0,
                r3_hop: 360.0,
            },
            Supply::V1_3 => EnergyTable {
                spike_gen: 260.0,
                encode_append: 507.0,
                broadcast_same_core: 2200.0,
                route_diff_core: 78.0,
                pulse_extend: 26.0,
                r3_hop: 78.0,
            },
        }
    }

    /// All entries in femtojoules.
    pub fn to_fj(&self) -> EnergyFj {
        let fj = |pj: f64| (pj * 1e3).round() as u64;
        EnergyFj {
            spike_gen: fj(self.spike_gen),
            encode_append: fj(self.encode_append),
            broadcast_same_core: fj(self.broadcast_same_core),
            route_diff_core: fj(self.route_diff_core),
            pulse_extend: fj(self.pulse_extend),
            r3_hop: fj(self.r3_hop),
        }
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("spike_gen", self.spike_gen),
            ("encode_append", self.encode_append),
            ("broadcast_same_core", self.broadcast_same_core),
            ("route_diff_core", self.route_diff_core),
            ("pulse_extend", self.pulse_extend),
            ("r3_hop", self.r3_hop),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyFj {
    pub spike_gen: u64,
    pub encode_append: u64,
    pub broadcast_same_core: u64,
    pub route_diff_core: u64,
    pub pulse_extend: u64,
    pub r3_hop: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricConfig {
    pub grid_w: u8,
    pub grid_h: u8,
    pub cores_per_chip: u8,
    pub neurons_per_core: u16,
    pub latency: Latencies,
    /// Energy preset used when `energy` is absent.
    pub supply: Supply,
    pub energy: Option<EnergyTable>,
    /// Caps each chip's input interface at 30 M events/s.
    pub throttle_io: bool,
    pub input_rate_mev_s: f64,
    /// Misaddressed stimulus is forwarded over the mesh instead of dropped.
    pub forward_misaddressed: bool,
    /// Serializes packets on the SRAM loop, the R3 output ports and the CAM
    /// broadcast of each core.
    pub congestion: bool,
    /// Upper bound of a uniform delay added to each routing stage.
    pub jitter_ps: u64,
    pub seed: u64,
    /// Neuron integration step.
    pub neuron_dt_ms: f64,
    /// Integrate neurons and synapses. When off, only routing is simulated.
    pub dynamics: bool,
    /// Log-normal sigma of per-neuron parameter mismatch.
    pub mismatch_sigma: f64,
    /// Bin width of the packet latency histogram.
    pub hist_bin_ns: f64,
    /// Parameters of cores not configured otherwise.
    pub core: CoreParams,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            grid_w: 1,
            grid_h: 1,
            cores_per_chip: 4,
            neurons_per_core: 256,
            latency: Latencies::default(),
            supply: Supply::default(),
            energy: None,
            throttle_io: false,
            input_rate_mev_s: 30.0,
            forward_misaddressed: false,
            congestion: false,
            jitter_ps: 0,
            seed: 0,
            neuron_dt_ms: 0.1,
            dynamics: true,
            mismatch_sigma: 0.0,
            hist_bin_ns: 10.0,
            core: CoreParams::default(),
        }
    }
}

impl FabricConfig {
    pub fn grid(w: u8, h: u8) -> Self {
        FabricConfig {
            grid_w: w,
            grid_h: h,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, FabricError> {
        let cfg: FabricConfig =
            toml::from_str(text).map_err(|e| FabricError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn energy_table(&self) -> EnergyTable {
        self.energy.unwrap_or_else(|| EnergyTable::preset(self.supply))
    }

    pub fn chips(&self) -> usize {
        self.grid_w as usize * self.grid_h as usize
    }

    pub fn contains(&self, c: ChipCoord) -> bool {
        c.x < self.grid_w && c.y < self.grid_h
    }

    pub fn neuron_dt_ps(&self) -> SimTime {
        ms_to_ps(self.neuron_dt_ms)
    }

    /// Minimum spacing of input events on one chip interface.
    pub fn input_spacing_ps(&self) -> SimTime {
        (1e6 / self.input_rate_mev_s).ceil() as SimTime
    }

    pub fn hist_bin_ps(&self) -> SimTime {
        ns_to_ps(self.hist_bin_ns).max(1)
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        let bad = |m: String| Err(FabricError::Config(m));
        if self.grid_w == 0 || self.grid_h == 0 {
            return bad(format!("grid must be at least 1x1, got {}x{}", self.grid_w, self.grid_h));
        }
        if self.cores_per_chip == 0 || self.cores_per_chip > MAX_CORE_ID + 1 {
            return bad(format!(
                "cores_per_chip must be in 1..={}, got {}",
                MAX_CORE_ID + 1,
                self.cores_per_chip
            ));
        }
        if self.neurons_per_core == 0 || self.neurons_per_core > 1024 {
            return bad(format!("neurons_per_core must be in 1..=1024, got {}", self.neurons_per_core));
        }
        for (name, v) in self.latency.fields() {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("latency.{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in self.energy_table().fields() {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("energy.{name} must be non-negative, got {v}"));
            }
        }
        if !(self.input_rate_mev_s.is_finite() && self.input_rate_mev_s > 0.0) {
            return bad("input_rate_mev_s must be positive".into());
        }
        if !(self.neuron_dt_ms.is_finite() && self.neuron_dt_ms > 0.0) || self.neuron_dt_ps() == 0 {
            return bad(format!("neuron_dt_ms must be positive, got {}", self.neuron_dt_ms));
        }
        if !(self.mismatch_sigma.is_finite() && self.mismatch_sigma >= 0.0) {
            return bad("mismatch_sigma must be non-negative".into());
        }
        if !(self.hist_bin_ns.is_finite() && self.hist_bin_ns > 0.0) {
            return bad("hist_bin_ns must be positive".into());
        }
        self.core
            .validate()
            .map_err(|e| FabricError::Config(format!("core: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_latencies_in_ps() {
        let l = Latencies::default().to_ps();
        assert_eq!(l.broadcast, 27_000);
        assert_eq!(l.chip_traverse, 15_400);
        assert_eq!(l.r3_hop, 2_500);
        assert_eq!(l.r1_loop_read, 26_667);
        assert_eq!(l.r2_hop, 1_000);
    }

    #[test]
    fn presets_match_measured_table() {
        let lo = EnergyTable::preset(Supply::V1_3).to_fj();
        assert_eq!(lo.spike_gen, 260_000);
        assert_eq!(lo.broadcast_same_core, 2_200_000);
        let hi = EnergyTable::preset(Supply::V1_8).to_fj();
        assert_eq!(hi.encode_append, 883_000);
        assert_eq!(hi.pulse_extend, 324_000);
    }

    #[test]
    fn toml_partial_file() {
        let cfg = FabricConfig::from_toml(
            "grid_w = 3\ngrid_h = 2\nsupply = \"1.3V\"\n[latency]\nr2_hop_ns = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.chips(), 6);
        assert_eq!(cfg.energy_table(), EnergyTable::preset(Supply::V1_3));
        assert_eq!(cfg.latency.r2_hop_ns, 2.0);
        assert_eq!(cfg.latency.broadcast_ns, 27.0);
        let back = FabricConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(FabricConfig::from_toml("grid_w = 0").is_err());
        assert!(FabricConfig::from_toml("[latency]\nbroadcast_ns = -1.0").is_err());
        assert!(FabricConfig::from_toml("cores_per_chip = 17").is_err());
        assert!(FabricConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn throttle_spacing() {
        assert_eq!(FabricConfig::default().input_spacing_ps(), 33_334);
    }
}
