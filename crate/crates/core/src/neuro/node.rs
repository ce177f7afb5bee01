use super::cam::{CamMatch, CoreMemory};
use super::neuron::{neuron_step, NeuronParams, NeuronState, SynapticInput};
use super::synapse::{Dpi, SynapseParams, PS_PER_MS};
use super::NeuroError;
use crate::packets::{CamEntry, SynType};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Parameters shared by every neuron of a core. Synapse weights are
/// per type, not per CAM word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreParams {
    pub neuron: NeuronParams,
    pub fast_exc: SynapseParams,
    pub slow_exc: SynapseParams,
    pub sub_inh: SynapseParams,
    /// Weight is a conductance in nS.
    pub shunt_inh: SynapseParams,
}

impl Default for CoreParams {
    fn default() -> Self {
        CoreParams {
            neuron: NeuronParams::default(),
            fast_exc: SynapseParams::new(5.0, 1500.0, 1.0),
            slow_exc: SynapseParams::new(100.0, 150.0, 1.0),
            sub_inh: SynapseParams::new(5.0, 1500.0, 1.0),
            shunt_inh: SynapseParams::new(5.0, 20.0, 1.0),
        }
    }
}

impl CoreParams {
    pub fn synapse(&self, t: SynType) -> &SynapseParams {
        match t {
            SynType::FastExc => &self.fast_exc,
            SynType::SlowExc => &self.slow_exc,
            SynType::SubInh => &self.sub_inh,
            SynType::ShuntInh => &self.shunt_inh,
        }
    }

    pub fn validate(&self) -> Result<(), NeuroError> {
        self.neuron.validate()?;
        for t in SynType::ALL {
            self.synapse(t)
                .validate()
                .map_err(|e| NeuroError::Config(format!("{t}: {e}")))?;
        }
        Ok(())
    }
}

/// Outcome of one tag broadcast into a core.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Broadcast {
    pub matches: Vec<CamMatch>,
}

impl Broadcast {
    pub fn pulses(&self) -> usize {
        self.matches.len()
    }
}

/// CAM array, synapses and neurons of one core.
#[derive(Debug, Clone)]
pub struct NeuralCore {
    memory: CoreMemory,
    params: CoreParams,
    neuron_params: Vec<NeuronParams>,
    states: Vec<NeuronState>,
    synapses: Vec<[Dpi; 4]>,
    active: Vec<bool>,
    active_count: usize,
    scratch: Vec<CamMatch>,
}

impl NeuralCore {
    pub fn new(neurons: usize, params: CoreParams) -> Self {
        let mut core = NeuralCore {
            memory: CoreMemory::new(neurons),
            params,
            neuron_params: vec![params.neuron; neurons],
            states: vec![NeuronState::at_rest(&params.neuron); neurons],
            synapses: vec![Default::default(); neurons],
            active: vec![false; neurons],
            active_count: 0,
            scratch: Vec::new(),
        };
        core.refresh_bias_activity();
        core
    }

    fn refresh_bias_activity(&mut self) {
        for n in 0..self.states.len() {
            if self.neuron_params[n].i_bias_pa != 0.0 {
                self.activate(n as u16);
            }
        }
    }

    /// Replaces the core parameters and resets every neuron to rest. CAM
    /// contents and synapse states are kept.
    pub fn set_params(&mut self, params: CoreParams) {
        self.params = params;
        self.neuron_params.fill(params.neuron);
        self.states.fill(NeuronState::at_rest(&params.neuron));
        self.refresh_bias_activity();
    }

    /// Applies per-neuron log-normal mismatch to the neuron parameters.
    pub fn apply_mismatch<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) -> Result<(), NeuroError> {
        for p in self.neuron_params.iter_mut() {
            *p = self.params.neuron.jittered(sigma, rng)?;
        }
        self.refresh_bias_activity();
        Ok(())
    }

    pub fn neurons(&self) -> usize {
        self.states.len()
    }

    pub fn params(&self) -> &CoreParams {
        &self.params
    }

    pub fn neuron_params(&self, neuron: u16) -> &NeuronParams {
        &self.neuron_params[neuron as usize]
    }

    pub fn memory(&self) -> &CoreMemory {
        &self.memory
    }

    pub fn state(&self, neuron: u16) -> &NeuronState {
        &self.states[neuron as usize]
    }

    pub fn synapse(&self, neuron: u16, t: SynType) -> &Dpi {
        &self.synapses[neuron as usize][t.index()]
    }

    pub fn is_active(&self, neuron: u16) -> bool {
        self.active[neuron as usize]
    }

    /// Marks a neuron for integration even without CAM subscriptions.
    pub fn activate(&mut self, neuron: u16) {
        let a = &mut self.active[neuron as usize];
        if !*a {
            *a = true;
            self.active_count += 1;
        }
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn write_cam(&mut self, neuron: u16, slot: u8, entry: CamEntry) -> Result<Option<CamEntry>, NeuroError> {
        let old = self.memory.write(neuron, slot, entry)?;
        self.activate(neuron);
        Ok(old)
    }

    pub fn push_cam(&mut self, neuron: u16, entry: CamEntry) -> Result<u8, NeuroError> {
        let slot = self.memory.push(neuron, entry)?;
        self.activate(neuron);
        Ok(slot)
    }

    pub fn clear_cam(&mut self, neuron: u16, slot: u8) -> Result<Option<CamEntry>, NeuroError> {
        self.memory.clear(neuron, slot)
    }

    pub fn cam_match(&self, tag: u16) -> Vec<CamMatch> {
        self.memory.cam_match(tag)
    }

    /// Matches `tag` against every CAM word and opens one pulse per match at
    /// `t_ps`.
    pub fn broadcast(&mut self, tag: u16, t_ps: u64) -> Broadcast {
        let mut matches = std::mem::take(&mut self.scratch);
        self.memory.cam_match_into(tag, &mut matches);
        for m in &matches {
            let p = self.params.synapse(m.syn_type);
            self.synapses[m.neuron as usize][m.syn_type.index()].apply_pulse(t_ps, p);
        }
        let out = Broadcast {
            matches: matches.clone(),
        };
        self.scratch = matches;
        out
    }

    /// Integrates all active neurons over `[t_ps, t_ps + dt_ps]`, appending
    /// the indices of neurons that spiked at the end of the step.
    pub fn tick(&mut self, t_ps: u64, dt_ps: u64, spikes: &mut Vec<u16>) -> Result<(), NeuroError> {
        let t_ms = t_ps as f64 / PS_PER_MS;
        let dt_ms = dt_ps as f64 / PS_PER_MS;
        if self.active_count == 0 {
            return Ok(());
        }
        let params = self.params;
        for n in 0..self.states.len() {
            if !self.active[n] {
                continue;
            }
            let syn = &mut self.synapses[n];
            let mut sample = |t: SynType| {
                let d = &mut syn[t.index()];
                d.advance_to(t_ps, params.synapse(t));
                d.current()
            };
            let input = SynapticInput {
                i_fast_pa: sample(SynType::FastExc),
                i_slow_pa: sample(SynType::SlowExc),
                i_inh_sub_pa: sample(SynType::SubInh),
                g_shunt_ns: sample(SynType::ShuntInh),
            };
            let fired = neuron_step(&mut self.states[n], &self.neuron_params[n], &input, t_ms, dt_ms)
                .map_err(|e| match e {
                    NeuroError::NumericalFault { t_ms, v, w, .. } => NeuroError::NumericalFault {
                        neuron: n as u16,
                        t_ms,
                        v,
                        w,
                    },
                    other => other,
                })?;
            if fired {
                spikes.push(n as u16);
            }
        }
        Ok(())
    }
}
