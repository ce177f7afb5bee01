//! Pulse extender plus first-order DPI filter.
//!
//! A CAM match opens a rectangular pulse of height `weight` and width
//! `pulse_ms`; the filter obeys `τ·dI/dt = −I + u(t)` where `u` is the sum of
//! open pulses. `u` is piecewise constant, so the state is advanced exactly
//! from edge to edge.

use super::NeuroError;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Picoseconds per millisecond.
pub const PS_PER_MS: f64 = 1e9;

/// Pulse widths accepted by configuration, in milliseconds.
pub const PULSE_MS_RANGE: (f64, f64) = (1e-5, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapseParams {
    pub tau_ms: f64,
    /// Pulse height. Current (pA) for current synapses, conductance (nS) for
    /// the shunting synapse.
    pub weight: f64,
    pub pulse_ms: f64,
}

impl SynapseParams {
    pub fn new(tau_ms: f64, weight: f64, pulse_ms: f64) -> Self {
        SynapseParams {
            tau_ms,
            weight,
            pulse_ms,
        }
    }

    pub fn validate(&self) -> Result<(), NeuroError> {
        if !(self.tau_ms.is_finite() && self.tau_ms > 0.0) {
            return Err(NeuroError::Config(format!("synapse tau must be positive, got {}", self.tau_ms)));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(NeuroError::Config(format!("synapse weight must be non-negative, got {}", self.weight)));
        }
        let (lo, hi) = PULSE_MS_RANGE;
        if !(self.pulse_ms.is_finite() && self.pulse_ms >= lo && self.pulse_ms <= hi) {
            return Err(NeuroError::Config(format!(
                "pulse width {} ms outside [{lo}, {hi}] ms",
                self.pulse_ms
            )));
        }
        Ok(())
    }

    pub fn pulse_ps(&self) -> u64 {
        (self.pulse_ms * PS_PER_MS).round().max(1.0) as u64
    }
}

/// Exact response of the filter over `dt_ms` with constant drive `u`.
pub fn dpi_step(current: f64, drive: f64, tau_ms: f64, dt_ms: f64) -> f64 {
    drive + (current - drive) * (-dt_ms / tau_ms).exp()
}

/// State of one synapse accumulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dpi {
    current: f64,
    t_ps: u64,
    open: u32,
    closes: VecDeque<u64>,
}

impl Dpi {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_current(current: f64) -> Self {
        Dpi {
            current,
            ..Self::default()
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn time_ps(&self) -> u64 {
        self.t_ps
    }

    pub fn open_pulses(&self) -> u32 {
        self.open
    }

    pub fn drive(&self, p: &SynapseParams) -> f64 {
        self.open as f64 * p.weight
    }

    fn integrate(&mut self, until: u64, p: &SynapseParams) {
        if until > self.t_ps {
            let dt_ms = (until - self.t_ps) as f64 / PS_PER_MS;
            self.current = dpi_step(self.current, self.drive(p), p.tau_ms, dt_ms);
            self.t_ps = until;
        }
    }

    /// Advances to `t_ps`, closing pulses at their exact end times.
    /// Times earlier than the current state time are ignored.
    pub fn advance_to(&mut self, t_ps: u64, p: &SynapseParams) {
        while let Some(&end) = self.closes.front() {
            if end > t_ps {
                break;
            }
            self.integrate(end, p);
            self.closes.pop_front();
            self.open -= 1;
        }
        self.integrate(t_ps, p);
    }

    /// Advances by `dt_ps` from the current state time.
    pub fn step(&mut self, dt_ps: u64, p: &SynapseParams) {
        self.advance_to(self.t_ps + dt_ps, p);
    }

    /// Opens a pulse at `t_ps`. Pulses may overlap and superpose.
    pub fn apply_pulse(&mut self, t_ps: u64, p: &SynapseParams) {
        self.advance_to(t_ps, p);
        let end = self.t_ps + p.pulse_ps();
        // Equal widths keep the close queue sorted.
        debug_assert!(self.closes.back().is_none_or(|&b| b <= end));
        self.closes.push_back(end);
        self.open += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: u64 = 1_000_000_000;

    #[test]
    fn analytic_decay_and_rise() {
        let p = SynapseParams::new(5.0, 1.0, 1.0);
        let mut s = Dpi::with_current(1.0);
        s.advance_to(5 * MS, &p);
        assert!((s.current() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((dpi_step(0.0, 1.0, 5.0, 5.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn single_pulse_leaks_back_to_rest() {
        let p = SynapseParams::new(5.0, 100.0, 1.0);
        let mut s = Dpi::new();
        s.apply_pulse(0, &p);
        s.advance_to(MS / 2, &p);
        assert!(s.current() > 0.0);
        s.advance_to(500 * MS, &p);
        assert_eq!(s.open_pulses(), 0);
        assert!(s.current() < 1e-30);
    }

    #[test]
    fn pulse_height_is_exact_at_close() {
        let p = SynapseParams::new(4.0, 10.0, 2.0);
        let mut s = Dpi::new();
        s.apply_pulse(0, &p);
        s.advance_to(2 * MS, &p);
        let expect = 10.0 * (1.0 - (-0.5f64).exp());
        assert!((s.current() - expect).abs() < 1e-12);
        s.advance_to(6 * MS, &p);
        assert!((s.current() - expect * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn halving_the_step_is_invisible() {
        let p = SynapseParams::new(3.0, 7.0, 0.7);
        let mut coarse = Dpi::new();
        let mut fine = Dpi::new();
        let pulses = [0u64, MS / 3, 2 * MS, 2 * MS + 1, 9 * MS];
        let dt = MS / 10;
        let mut next = 0;
        for k in 0..200u64 {
            let t = k * dt;
            while next < pulses.len() && pulses[next] <= t {
                coarse.apply_pulse(pulses[next], &p);
                fine.apply_pulse(pulses[next], &p);
                next += 1;
            }
            coarse.step(dt, &p);
            fine.step(dt / 2, &p);
            fine.step(dt / 2, &p);
            assert!((coarse.current() - fine.current()).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_width_validation() {
        assert!(SynapseParams::new(5.0, 1.0, 0.0005).validate().is_ok());
        assert!(SynapseParams::new(5.0, 1.0, 50.0).validate().is_ok());
        assert!(SynapseParams::new(5.0, 1.0, 0.0).validate().is_err());
        assert!(SynapseParams::new(5.0, 1.0, 500.0).validate().is_err());
        assert!(SynapseParams::new(0.0, 1.0, 1.0).validate().is_err());
        assert!(SynapseParams::new(-2.0, 1.0, 1.0).validate().is_err());
    }
}
