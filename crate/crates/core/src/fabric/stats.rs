use super::config::EnergyFj;
use super::SimTime;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// External events accepted by a chip input interface.
    pub events_injected: u64,
    /// Neuron output spikes entering an R1 loop.
    pub spikes: u64,
    /// Spikes with at least one routing word.
    pub encodes: u64,
    pub sram_reads: u64,
    pub dropped_at_source: u64,
    pub broadcasts: u64,
    pub cam_matches: u64,
    /// Packets handed from an R1 to the R2 tree.
    pub cross_core: u64,
    /// Packets handed from an R2 root to its R3 router.
    pub cross_chip: u64,
    pub r3_hops: u64,
    pub delivered: u64,
    pub faults: u64,
    pub dropped_misaddressed: u64,
    pub forwarded_misaddressed: u64,
    pub programming_writes: u64,
}

impl Counters {
    /// Energy implied by the counters, in femtojoules.
    pub fn energy_fj(&self, e: &EnergyFj) -> u64 {
        self.spikes * e.spike_gen
            + self.encodes * e.encode_append
            + self.broadcasts * e.broadcast_same_core
            + self.cross_core * e.route_diff_core
            + self.cam_matches * e.pulse_extend
            + self.r3_hops * e.r3_hop
    }

    fn rows(&self) -> [(&'static str, u64); 15] {
        [
            ("events_injected", self.events_injected),
            ("spikes", self.spikes),
            ("encodes", self.encodes),
            ("sram_reads", self.sram_reads),
            ("dropped_at_source", self.dropped_at_source),
            ("broadcasts", self.broadcasts),
            ("cam_matches", self.cam_matches),
            ("cross_core", self.cross_core),
            ("cross_chip", self.cross_chip),
            ("r3_hops", self.r3_hops),
            ("delivered", self.delivered),
            ("faults", self.faults),
            ("dropped_misaddressed", self.dropped_misaddressed),
            ("forwarded_misaddressed", self.forwarded_misaddressed),
            ("programming_writes", self.programming_writes),
        ]
    }
}

/// Packet latency histogram with fixed-width bins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LatencyHistogram {
    pub bin_ps: SimTime,
    pub bins: BTreeMap<u64, u64>,
    pub count: u64,
    pub min_ps: Option<SimTime>,
    pub max_ps: Option<SimTime>,
    pub sum_ps: u128,
}

impl LatencyHistogram {
    pub fn new(bin_ps: SimTime) -> Self {
        LatencyHistogram {
            bin_ps: bin_ps.max(1),
            ..Self::default()
        }
    }

    pub fn record(&mut self, latency: SimTime) {
        *self.bins.entry(latency / self.bin_ps).or_default() += 1;
        self.count += 1;
        self.min_ps = Some(self.min_ps.map_or(latency, |m| m.min(latency)));
        self.max_ps = Some(self.max_ps.map_or(latency, |m| m.max(latency)));
        self.sum_ps += latency as u128;
    }

    pub fn mean_ps(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ps as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimStats {
    pub time_ps: SimTime,
    pub counters: Counters,
    pub energy_fj: u64,
    pub latency: LatencyHistogram,
    pub in_flight: u64,
}

impl SimStats {
    pub fn new(bin_ps: SimTime) -> Self {
        SimStats {
            time_ps: 0,
            counters: Counters::default(),
            energy_fj: 0,
            latency: LatencyHistogram::new(bin_ps),
            in_flight: 0,
        }
    }

    pub fn energy_pj(&self) -> f64 {
        self.energy_fj as f64 / 1e3
    }

    /// Counters, energy and histogram as tab-separated text.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("counter\tvalue\n");
        let _ = writeln!(out, "time_ps\t{}", self.time_ps);
        for (k, v) in self.counters.rows() {
            let _ = writeln!(out, "{k}\t{v}");
        }
        let _ = writeln!(out, "in_flight\t{}", self.in_flight);
        let _ = writeln!(out, "energy_fj\t{}", self.energy_fj);
        let _ = writeln!(out, "energy_pj\t{:.3}", self.energy_pj());
        if let Some(m) = self.latency.mean_ps() {
            let _ = writeln!(out, "latency_mean_ps\t{m:.1}");
        }
        let _ = writeln!(out, "latency_min_ps\t{}", self.latency.min_ps.unwrap_or(0));
        let _ = writeln!(out, "latency_max_ps\t{}", self.latency.max_ps.unwrap_or(0));
        out.push_str("\nbin_lo_ps\tbin_hi_ps\tcount\n");
        for (&b, &n) in &self.latency.bins {
            let lo = b * self.latency.bin_ps;
            let _ = writeln!(out, "{lo}\t{}\t{n}", lo + self.latency.bin_ps);
        }
        out
    }
}
