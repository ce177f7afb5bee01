//! Adaptive exponential integrate-and-fire neuron.
//!
//! Units: mV, ms, pF, nS, pA (so pA/nS = mV and pF/nS = ms).
//!
//! Each step freezes the exponential term, adaptation and input currents at
//! their start-of-step values and integrates the remaining linear ODE
//! exactly (exponential Euler). With the `lif` flag the exponential term is
//! dropped and the threshold moves to `v_t_mv`, which makes the update exact
//! for constant input.

use super::NeuroError;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

/// Largest exponent evaluated in the spike-initiation term.
const EXP_ARG_CAP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    pub c_mem_pf: f64,
    pub g_l_ns: f64,
    pub e_l_mv: f64,
    pub v_t_mv: f64,
    pub delta_t_mv: f64,
    pub a_ns: f64,
    pub b_pa: f64,
    pub tau_w_ms: f64,
    pub v_reset_mv: f64,
    pub v_cut_mv: f64,
    pub t_ref_ms: f64,
    /// Constant injected current.
    pub i_bias_pa: f64,
    pub lif: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            c_mem_pf: 200.0,
            g_l_ns: 10.0,
            e_l_mv: -70.0,
            v_t_mv: -50.0,
            delta_t_mv: 2.0,
            a_ns: 2.0,
            b_pa: 10.0,
            tau_w_ms: 100.0,
            v_reset_mv: -65.0,
            v_cut_mv: -40.0,
            t_ref_ms: 2.0,
            i_bias_pa: 0.0,
            lif: false,
        }
    }
}

impl NeuronParams {
    pub fn tau_m_ms(&self) -> f64 {
        self.c_mem_pf / self.g_l_ns
    }

    /// Spike detection level.
    pub fn threshold_mv(&self) -> f64 {
        if self.lif {
            self.v_t_mv
        } else {
            self.v_cut_mv
        }
    }

    /// Rheobase of the leaky integrate-and-fire reduction.
    pub fn lif_threshold_current_pa(&self) -> f64 {
        self.g_l_ns * (self.v_t_mv - self.e_l_mv)
    }

    pub fn validate(&self) -> Result<(), NeuroError> {
        let positive = [
            ("c_mem_pf", self.c_mem_pf),
            ("g_l_ns", self.g_l_ns),
            ("tau_w_ms", self.tau_w_ms),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(NeuroError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.lif && !(self.delta_t_mv.is_finite() && self.delta_t_mv > 0.0) {
            return Err(NeuroError::Config(format!(
                "delta_t_mv must be positive unless lif is set, got {}",
                self.delta_t_mv
            )));
        }
        let finite = [
            ("e_l_mv", self.e_l_mv),
            ("v_t_mv", self.v_t_mv),
            ("a_ns", self.a_ns),
            ("b_pa", self.b_pa),
            ("v_reset_mv", self.v_reset_mv),
            ("v_cut_mv", self.v_cut_mv),
            ("i_bias_pa", self.i_bias_pa),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(NeuroError::Config(format!("{name} must be finite")));
            }
        }
        if !(self.t_ref_ms.is_finite() && self.t_ref_ms >= 0.0) {
            return Err(NeuroError::Config("t_ref_ms must be non-negative".into()));
        }
        if self.v_reset_mv >= self.threshold_mv() {
            return Err(NeuroError::Config(format!(
                "v_reset_mv {} must lie below the spike threshold {}",
                self.v_reset_mv,
                self.threshold_mv()
            )));
        }
        Ok(())
    }

    /// Multiplies the circuit-level parameters by independent log-normal
    /// factors with median 1. `sigma = 0` returns the parameters unchanged.
    pub fn jittered<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self, NeuroError> {
        if sigma == 0.0 {
            return Ok(*self);
        }
        let dist = LogNormal::new(0.0, sigma)
            .map_err(|e| NeuroError::Config(format!("mismatch sigma {sigma}: {e}")))?;
        let mut p = *self;
        p.c_mem_pf *= dist.sample(rng);
        p.g_l_ns *= dist.sample(rng);
        p.a_ns *= dist.sample(rng);
        p.b_pa *= dist.sample(rng);
        p.tau_w_ms *= dist.sample(rng);
        p.i_bias_pa *= dist.sample(rng);
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub w_adapt: f64,
    pub refractory_until_ms: f64,
}

impl NeuronState {
    pub fn at_rest(p: &NeuronParams) -> Self {
        NeuronState {
            v: p.e_l_mv,
            w_adapt: 0.0,
            refractory_until_ms: f64::NEG_INFINITY,
        }
    }

    pub fn is_refractory(&self, t_ms: f64) -> bool {
        t_ms < self.refractory_until_ms
    }
}

/// Synaptic drive sampled at the start of a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SynapticInput {
    pub i_fast_pa: f64,
    pub i_slow_pa: f64,
    pub i_inh_sub_pa: f64,
    pub g_shunt_ns: f64,
}

impl SynapticInput {
    pub fn dc(i_pa: f64) -> Self {
        SynapticInput {
            i_fast_pa: i_pa,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

/// Advances one neuron from `t_ms` to `t_ms + dt_ms`. Returns whether it
/// spiked at the end of the step.
pub fn neuron_step(
    s: &mut NeuronState,
    p: &NeuronParams,
    input: &SynapticInput,
    t_ms: f64,
    dt_ms: f64,
) -> Result<bool, NeuroError> {
    let v0 = s.v;
    let w_inf = p.a_ns * (v0 - p.e_l_mv);
    s.w_adapt = w_inf + (s.w_adapt - w_inf) * (-dt_ms / p.tau_w_ms).exp();

    let mut spiked = false;
    if s.is_refractory(t_ms) {
        s.v = p.v_reset_mv;
    } else {
        let g_tot = p.g_l_ns + input.g_shunt_ns.max(0.0);
        let spike_current = if p.lif {
            0.0
        } else {
            let arg = ((v0 - p.v_t_mv) / p.delta_t_mv).min(EXP_ARG_CAP);
            p.g_l_ns * p.delta_t_mv * arg.exp()
        };
        let i_net = spike_current - s.w_adapt + input.i_fast_pa + input.i_slow_pa
            - input.i_inh_sub_pa
            + p.i_bias_pa;
        let v_inf = p.e_l_mv + i_net / g_tot;
        s.v = v_inf + (v0 - v_inf) * (-dt_ms * g_tot / p.c_mem_pf).exp();
        if s.v >= p.threshold_mv() {
            spiked = true;
            s.v = p.v_reset_mv;
            s.w_adapt += p.b_pa;
            s.refractory_until_ms = t_ms + dt_ms + p.t_ref_ms;
        }
    }
    if !(s.v.is_finite() && s.w_adapt.is_finite()) {
        return Err(NeuroError::NumericalFault {
            neuron: 0,
            t_ms,
            v: s.v,
            w: s.w_adapt,
        });
    }
    Ok(spiked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spike_times(p: &NeuronParams, input: SynapticInput, dt: f64, t_end: f64) -> Vec<f64> {
        let mut s = NeuronState::at_rest(p);
        let steps = (t_end / dt).round() as u64;
        let mut out = Vec::new();
        for k in 0..steps {
            let t = k as f64 * dt;
            if neuron_step(&mut s, p, &input, t, dt).unwrap() {
                out.push(t + dt);
            }
        }
        out
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let p = NeuronParams::default();
        let mut s = NeuronState::at_rest(&p);
        for k in 0..10_000 {
            assert!(!neuron_step(&mut s, &p, &SynapticInput::default(), k as f64 * 0.1, 0.1).unwrap());
        }
        assert!((s.v - p.e_l_mv).abs() < 0.1);
    }

    #[test]
    fn lif_isi_matches_closed_form() {
        let p = NeuronParams {
            lif: true,
            a_ns: 0.0,
            b_pa: 0.0,
            v_reset_mv: -70.0,
            t_ref_ms: 0.0,
            ..NeuronParams::default()
        };
        let i_th = p.lif_threshold_current_pa();
        for ratio in [1.2, 1.5, 2.0, 4.0] {
            let i = ratio * i_th;
            let expect = p.tau_m_ms() * (i / (i - i_th)).ln();
            let spikes = spike_times(&p, SynapticInput::dc(i), 0.01, 20.0 * expect);
            let isi = (spikes[spikes.len() - 1] - spikes[0]) / (spikes.len() - 1) as f64;
            assert!((isi - expect).abs() / expect < 0.01, "ratio {ratio}: {isi} vs {expect}");
        }
    }

    #[test]
    fn refractory_holds_reset() {
        let p = NeuronParams {
            t_ref_ms: 5.0,
            ..NeuronParams::default()
        };
        let spikes = spike_times(&p, SynapticInput::dc(5_000.0), 0.1, 200.0);
        assert!(spikes.len() > 10);
        for w in spikes.windows(2) {
            assert!(w[1] - w[0] >= p.t_ref_ms);
        }
    }

    #[test]
    fn shunt_slows_firing() {
        let p = NeuronParams::default();
        let base = spike_times(&p, SynapticInput::dc(600.0), 0.1, 500.0).len();
        let shunted = spike_times(
            &p,
            SynapticInput {
                g_shunt_ns: 5.0,
                ..SynapticInput::dc(600.0)
            },
            0.1,
            500.0,
        )
        .len();
        assert!(base > 0);
        assert!(shunted <= base);
    }

    #[test]
    fn validation_and_jitter() {
        assert!(NeuronParams::default().validate().is_ok());
        let bad = NeuronParams {
            g_l_ns: 0.0,
            ..NeuronParams::default()
        };
        assert!(bad.validate().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = NeuronParams::default();
        assert_eq!(p.jittered(0.0, &mut rng).unwrap(), p);
        let j = p.jittered(0.1, &mut rng).unwrap();
        assert_ne!(j, p);
        assert!(j.validate().is_ok());
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let p = NeuronParams::default();
        let mut s = NeuronState::at_rest(&p);
        s.v = f64::NAN;
        assert!(matches!(
            neuron_step(&mut s, &p, &SynapticInput::default(), 0.0, 0.1),
            Err(NeuroError::NumericalFault { .. })
        ));
    }
}
