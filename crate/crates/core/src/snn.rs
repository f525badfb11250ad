//! Clock-driven simulation of one encoder: a layer of conductance-based LIF
//! neurons fed by input spike trains, with a single inhibitory relay that
//! answers any output spike by raising the inhibitory conductance of every
//! output neuron (winner-take-all loop).
//!
//! Membrane dynamics:
//!
//! ```text
//! tau_m du/dt = (u_rest - u) + g_e (u_exc - u) + g_i (u_inh - u)
//! tau_e dg_e/dt = -g_e          tau_i dg_i/dt = -g_i
//! ```
//!
//! Each substep holds the conductances at their mean over the substep (exact
//! for the exponential decay) and solves the membrane equation in closed
//! form, so `u` is always a convex combination of the reversal potentials.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plasticity::{on_postsynaptic_spike, PlasticityParams, PresynapticTraces, PruneMask};
use crate::spikegen::SpikeSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    pub u_rest: f64,
    pub u_exc: f64,
    pub u_inh: f64,
    pub u_th: f64,
    pub tau_m_ms: f64,
    pub tau_e_ms: f64,
    pub tau_i_ms: f64,
    pub t_ref_ms: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            u_rest: -65.0,
            u_exc: 0.0,
            u_inh: -90.0,
            u_th: -52.0,
            tau_m_ms: 100.0,
            tau_e_ms: 2.0,
            tau_i_ms: 2.0,
            t_ref_ms: 3.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.u_inh < self.u_rest && self.u_rest < self.u_th && self.u_th < self.u_exc;
        let taus = self.tau_m_ms > 0.0 && self.tau_e_ms > 0.0 && self.tau_i_ms > 0.0;
        if ordered && taus && self.t_ref_ms >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("neuron parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InhibitionConfig {
    /// Inhibitory conductance increment while learning.
    pub training_level: f64,
    /// Inhibitory conductance increment while encoding.
    pub eval_level: f64,
    /// Delay of the inhibitory loop; `None` means one simulation step.
    pub loop_delay_ms: Option<f64>,
}

impl Default for InhibitionConfig {
    fn default() -> Self {
        InhibitionConfig {
            training_level: 10.0,
            eval_level: 0.0,
            loop_delay_ms: None,
        }
    }
}

impl InhibitionConfig {
    pub fn validate(&self) -> Result<()> {
        let delay_ok = self.loop_delay_ms.is_none_or(|d| d >= 0.0);
        if self.training_level >= 0.0 && self.eval_level >= 0.0 && delay_ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inhibition {self:?}")))
        }
    }
}

/// Dense excitatory weights, one row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_neurons: usize,
    n_inputs: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n_neurons: usize, n_inputs: usize) -> Self {
        WeightMatrix {
            n_neurons,
            n_inputs,
            data: vec![0.0; n_neurons * n_inputs],
        }
    }

    pub fn from_vec(n_neurons: usize, n_inputs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_neurons * n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a {n_neurons}x{n_inputs} matrix",
                data.len()
            )));
        }
        Ok(WeightMatrix {
            n_neurons,
            n_inputs,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_inputs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_inputs) {
            return Err(Error::DimensionMismatch("ragged weight rows".into()));
        }
        Self::from_vec(rows.len(), n_inputs, rows.concat())
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn get(&self, neuron: usize, input: usize) -> f64 {
        self.data[neuron * self.n_inputs + input]
    }

    pub fn set(&mut self, neuron: usize, input: usize, w: f64) {
        self.data[neuron * self.n_inputs + input] = w;
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.data[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn row_mut(&mut self, neuron: usize) -> &mut [f64] {
        &mut self.data[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// How the simulator may touch the synapses during a run.
pub enum Synapses<'a> {
    /// Weights are read only; used for encoding.
    Frozen {
        weights: &'a WeightMatrix,
        mask: Option<&'a PruneMask>,
    },
    /// Weights follow the STDP rule on every output spike.
    Plastic {
        weights: &'a mut WeightMatrix,
        mask: Option<&'a PruneMask>,
        params: &'a PlasticityParams,
    },
}

impl Synapses<'_> {
    fn weights(&self) -> &WeightMatrix {
        match self {
            Synapses::Frozen { weights, .. } => weights,
            Synapses::Plastic { weights, .. } => weights,
        }
    }

    fn mask(&self) -> Option<&PruneMask> {
        match self {
            Synapses::Frozen { mask, .. } | Synapses::Plastic { mask, .. } => *mask,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time_ms: f64,
    pub neuron: u32,
    pub u: f64,
}

/// Dynamic state of one encoder run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub u: Vec<f64>,
    pub g_e: Vec<f64>,
    pub g_i: Vec<f64>,
    pub refractory_remaining: Vec<f64>,
    /// Postsynaptic rate trace `R` per output neuron.
    pub rate: Vec<f64>,
    /// Presynaptic trace `A` per input.
    pub pre: PresynapticTraces,
    step_index: u64,
    pending_inhibition: VecDeque<(u64, f64)>,
    /// Number of weight updates that hit the clamp bounds.
    pub clamp_events: u64,
    trace: Option<Vec<TraceRecord>>,
    fired: Vec<usize>,
    a_buf: Vec<f64>,
}

impl SimulationState {
    /// Everything at rest: `u = u_rest`, conductances and traces zero.
    pub fn new(n_neurons: usize, n_inputs: usize, neuron: &NeuronParams, plasticity: &PlasticityParams) -> Self {
        SimulationState {
            u: vec![neuron.u_rest; n_neurons],
            g_e: vec![0.0; n_neurons],
            g_i: vec![0.0; n_neurons],
            refractory_remaining: vec![0.0; n_neurons],
            rate: vec![0.0; n_neurons],
            pre: PresynapticTraces::new(n_inputs, plasticity.tau_a_ms),
            step_index: 0,
            pending_inhibition: VecDeque::new(),
            clamp_events: 0,
            trace: None,
            fired: Vec::new(),
            a_buf: Vec::new(),
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.u.len()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_index
    }

    /// Records `(time, neuron, u)` after every step from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn write_trace_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "time_ms,neuron,u_mv")?;
        for r in self.trace.iter().flatten() {
            writeln!(out, "{},{},{}", r.time_ms, r.neuron, r.u)?;
        }
        Ok(())
    }
}

/// Closed-form membrane update over `dt` with conductances held constant.
pub fn integrate_membrane(u: f64, g_e: f64, g_i: f64, dt: f64, p: &NeuronParams) -> f64 {
    let g_tot = 1.0 + g_e + g_i;
    let u_inf = (p.u_rest + g_e * p.u_exc + g_i * p.u_inh) / g_tot;
    u_inf + (u - u_inf) * (-dt * g_tot / p.tau_m_ms).exp()
}

/// Integrator with all per-step constants precomputed.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub neuron: NeuronParams,
    pub dt: f64,
    steps_per_ms: u32,
    decay_e: f64,
    decay_i: f64,
    decay_r: f64,
    mean_e: f64,
    mean_i: f64,
    delay_steps: u64,
    refractory_eps: f64,
}

impl Simulator {
    /// `dt` must divide one millisecond (input events sit on the 1 ms grid).
    pub fn new(neuron: NeuronParams, plasticity: &PlasticityParams, dt: f64, inhibition: &InhibitionConfig) -> Result<Self> {
        neuron.validate()?;
        inhibition.validate()?;
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::InvalidConfig(format!("dt must be in (0, 1] ms, got {dt}")));
        }
        let spm = (1.0 / dt).round();
        if ((1.0 / dt) - spm).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("dt = {dt} ms does not divide 1 ms")));
        }
        // Mean of exp(-t/tau) over [0, dt].
        let mean = |tau: f64| tau / dt * (1.0 - (-dt / tau).exp());
        let delay_steps = inhibition
            .loop_delay_ms
            .map_or(1, |d| ((d / dt).round() as u64).max(1));
        Ok(Simulator {
            neuron,
            dt,
            steps_per_ms: spm as u32,
            decay_e: (-dt / neuron.tau_e_ms).exp(),
            decay_i: (-dt / neuron.tau_i_ms).exp(),
            decay_r: (-dt / plasticity.tau_r_ms).exp(),
            mean_e: mean(neuron.tau_e_ms),
            mean_i: mean(neuron.tau_i_ms),
            delay_steps,
            refractory_eps: dt * 1e-3,
        })
    }

    pub fn steps_per_ms(&self) -> u32 {
        self.steps_per_ms
    }

    /// Current simulation time of `state` in ms.
    pub fn time_of(&self, state: &SimulationState) -> f64 {
        state.step_index as f64 * self.dt
    }

    /// Advances `state` by one step of `dt`. `inputs` are the input neurons
    /// spiking at the start of the step. Returns the output neurons that
    /// fired during the step.
    pub fn step<'s>(
        &self,
        state: &'s mut SimulationState,
        synapses: &mut Synapses<'_>,
        inputs: &[u32],
        inhibition_level: f64,
    ) -> Result<&'s [usize]> {
        let p = &self.neuron;
        let n = state.n_neurons();
        let now = self.time_of(state);
        state.pre.advance_to(now);

        while let Some(&(due, level)) = state.pending_inhibition.front() {
            if due > state.step_index {
                break;
            }
            state.pending_inhibition.pop_front();
            for g in &mut state.g_i {
                *g += level;
            }
        }

        {
            let w = synapses.weights();
            let mask = synapses.mask();
            let n_inputs = w.n_inputs();
            for &i in inputs {
                let i = i as usize;
                state.pre.on_presynaptic_spike(i);
                match mask {
                    None => {
                        for (j, g) in state.g_e.iter_mut().enumerate() {
                            *g += w.data[j * n_inputs + i];
                        }
                    }
                    Some(m) => {
                        for (j, g) in state.g_e.iter_mut().enumerate() {
                            if m.is_kept(j, i) {
                                *g += w.data[j * n_inputs + i];
                            }
                        }
                    }
                }
            }
        }

        for j in 0..n {
            if state.refractory_remaining[j] > self.refractory_eps {
                state.u[j] = p.u_rest;
                state.refractory_remaining[j] -= self.dt;
            } else {
                state.refractory_remaining[j] = 0.0;
                let ge = state.g_e[j] * self.mean_e;
                let gi = state.g_i[j] * self.mean_i;
                state.u[j] = integrate_membrane(state.u[j], ge, gi, self.dt, p);
            }
            state.g_e[j] *= self.decay_e;
            state.g_i[j] *= self.decay_i;
            state.rate[j] *= self.decay_r;
        }
        state.step_index += 1;
        let end = self.time_of(state);
        state.pre.advance_to(end);

        state.fired.clear();
        for j in 0..n {
            let u = state.u[j];
            if !(u.is_finite() && state.g_e[j].is_finite() && state.g_i[j].is_finite()) {
                return Err(Error::Diverged { neuron: j, time_ms: end });
            }
            if state.refractory_remaining[j] <= self.refractory_eps && u >= p.u_th {
                state.fired.push(j);
            }
        }

        if !state.fired.is_empty() {
            if let Synapses::Plastic { weights, mask, params } = synapses {
                state.pre.fill_current(&mut state.a_buf);
                for &j in &state.fired {
                    let kept = mask.map(|m| m.row(j));
                    state.clamp_events += on_postsynaptic_spike(
                        weights.row_mut(j),
                        kept,
                        &state.a_buf,
                        &mut state.rate[j],
                        params,
                    ) as u64;
                }
            } else {
                for &j in &state.fired {
                    state.rate[j] += 1.0;
                }
            }
            for &j in &state.fired {
                state.u[j] = p.u_rest;
                state.refractory_remaining[j] = p.t_ref_ms;
            }
            if inhibition_level > 0.0 {
                state
                    .pending_inhibition
                    .push_back((state.step_index - 1 + self.delay_steps, inhibition_level));
            }
        }

        if let Some(trace) = state.trace.as_mut() {
            trace.extend(state.u.iter().enumerate().map(|(j, &u)| TraceRecord {
                time_ms: end,
                neuron: j as u32,
                u,
            }));
        }
        Ok(&state.fired)
    }

    /// Presents one document: `schedule.window_ms` of driven activity
    /// followed by `gap_ms` without input. Returns per-neuron spike counts
    /// for the presentation part only.
    pub fn run_window(
        &self,
        state: &mut SimulationState,
        synapses: &mut Synapses<'_>,
        schedule: &SpikeSchedule,
        gap_ms: u32,
        inhibition_level: f64,
    ) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; state.n_neurons()];
        let mut buckets = schedule.by_millisecond().peekable();
        let mut inputs: Vec<u32> = Vec::new();
        for t in 0..schedule.window_ms {
            inputs.clear();
            if let Some((_, events)) = buckets.next_if(|(bt, _)| *bt == t) {
                inputs.extend(events.iter().map(|e| e.input));
            }
            for sub in 0..self.steps_per_ms {
                let ins: &[u32] = if sub == 0 { &inputs } else { &[] };
                for &j in self.step(state, synapses, ins, inhibition_level)? {
                    counts[j] += 1;
                }
            }
        }
        for _ in 0..gap_ms * self.steps_per_ms {
            self.step(state, synapses, &[], inhibition_level)?;
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spikegen::SpikeEvent;
    use approx::assert_relative_eq;

    fn sim(dt: f64) -> Simulator {
        Simulator::new(
            NeuronParams::default(),
            &PlasticityParams::default(),
            dt,
            &InhibitionConfig::default(),
        )
        .unwrap()
    }

    fn frozen(w: &WeightMatrix) -> Synapses<'_> {
        Synapses::Frozen { weights: w, mask: None }
    }

    #[test]
    fn free_decay_matches_closed_form() {
        let s = sim(0.1);
        let p = NeuronParams::default();
        let w = WeightMatrix::zeros(1, 1);
        let mut st = SimulationState::new(1, 1, &p, &PlasticityParams::default());
        st.u[0] = -55.0;
        for _ in 0..1000 {
            s.step(&mut st, &mut frozen(&w), &[], 0.0).unwrap();
        }
        let expected = p.u_rest + 10.0 * (-1f64).exp();
        assert_relative_eq!(st.u[0], expected, max_relative = 1e-3);
        assert!((st.u[0] - -61.32).abs() < 0.01);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let s = sim(0.1);
        let w = WeightMatrix::zeros(2, 1);
        let mut st = SimulationState::new(2, 1, &NeuronParams::default(), &PlasticityParams::default());
        for _ in 0..5000 {
            s.step(&mut st, &mut frozen(&w), &[], 0.0).unwrap();
        }
        assert_eq!(st.u, vec![-65.0, -65.0]);
    }

    #[test]
    fn clamped_conductance_steady_state() {
        let p = NeuronParams::default();
        let mut u = p.u_rest;
        for _ in 0..100_000 {
            u = integrate_membrane(u, 1.0, 0.0, 0.05, &p);
        }
        assert_relative_eq!(u, -32.5, max_relative = 1e-9);
        assert!(u > p.u_th);
    }

    #[test]
    fn clamped_drive_fires_periodically() {
        // Re-inject g_e = 1 each step: the neuron must fire, and never twice
        // within the refractory period.
        let s = sim(0.1);
        let w = WeightMatrix::zeros(1, 1);
        let mut st = SimulationState::new(1, 1, &NeuronParams::default(), &PlasticityParams::default());
        let mut fires = Vec::new();
        for k in 0..5000 {
            st.g_e[0] = 1.0;
            if !s.step(&mut st, &mut frozen(&w), &[], 0.0).unwrap().is_empty() {
                fires.push(k);
            }
        }
        assert!(fires.len() > 10);
        assert!(fires.windows(2).all(|f| (f[1] - f[0]) as f64 * 0.1 > 3.0));
        let gaps: Vec<_> = fires.windows(2).map(|f| f[1] - f[0]).collect();
        assert!(gaps.windows(2).all(|g| g[0] == g[1]), "period not constant: {gaps:?}");
    }

    #[test]
    fn conductance_decay_is_exponential() {
        let s = sim(0.1);
        let w = WeightMatrix::from_rows(&[vec![0.7]]).unwrap();
        let mut st = SimulationState::new(1, 1, &NeuronParams::default(), &PlasticityParams::default());
        s.step(&mut st, &mut frozen(&w), &[0], 0.0).unwrap();
        let g0 = st.g_e[0];
        for _ in 0..50 {
            s.step(&mut st, &mut frozen(&w), &[], 0.0).unwrap();
        }
        assert_relative_eq!(st.g_e[0], g0 * (-5.0f64 / 2.0).exp(), max_relative = 1e-6);
    }

    #[test]
    fn input_event_sets_trace_and_conductance() {
        let s = sim(0.5);
        let w = WeightMatrix::from_rows(&[vec![0.3, 0.0], vec![0.2, 0.4]]).unwrap();
        let mut st = SimulationState::new(2, 2, &NeuronParams::default(), &PlasticityParams::default());
        s.step(&mut st, &mut frozen(&w), &[0], 0.0).unwrap();
        let d = (-0.5f64 / 2.0).exp();
        assert_relative_eq!(st.g_e[0], 0.3 * d);
        assert_relative_eq!(st.g_e[1], 0.2 * d);
        assert_relative_eq!(st.pre.get(0), (-0.5f64 / 5.0).exp());
        assert_eq!(st.pre.get(1), 0.0);
    }

    #[test]
    fn masked_synapse_transmits_nothing() {
        use crate::plasticity::{prune_mask, PruneConfig};
        let s = sim(1.0);
        let w = WeightMatrix::from_rows(&[vec![0.1, 0.9]]).unwrap();
        let mask = prune_mask(&w, PruneConfig::new(0.5).unwrap());
        let mut st = SimulationState::new(1, 2, &NeuronParams::default(), &PlasticityParams::default());
        let mut syn = Synapses::Frozen { weights: &w, mask: Some(&mask) };
        s.step(&mut st, &mut syn, &[0], 0.0).unwrap();
        assert_eq!(st.g_e[0], 0.0);
    }

    #[test]
    fn driven_neuron_fires_and_unconnected_stays_silent() {
        let s = sim(0.1);
        let w = WeightMatrix::from_rows(&[vec![5.0], vec![0.0]]).unwrap();
        let schedule = SpikeSchedule {
            window_ms: 50,
            events: (0..50).map(|t| SpikeEvent { time_ms: t, input: 0 }).collect(),
        };
        let mut st = SimulationState::new(2, 1, &NeuronParams::default(), &PlasticityParams::default());
        let counts = s.run_window(&mut st, &mut frozen(&w), &schedule, 10, 0.0).unwrap();
        assert!(counts[0] >= 1);
        assert_eq!(counts[1], 0);
    }

    #[test]
    fn empty_schedule_gives_zero_counts() {
        let s = sim(0.1);
        let w = WeightMatrix::from_rows(&vec![vec![1.0; 3]; 4]).unwrap();
        let mut st = SimulationState::new(4, 3, &NeuronParams::default(), &PlasticityParams::default());
        st.u.fill(-60.0);
        let schedule = SpikeSchedule { window_ms: 600, events: vec![] };
        let counts = s.run_window(&mut st, &mut frozen(&w), &schedule, 300, 0.0).unwrap();
        assert_eq!(counts, vec![0; 4]);
        assert!(st.u.iter().all(|&u| (u - -65.0).abs() < 1e-3));
    }

    #[test]
    fn inhibition_arrives_after_one_step_for_everyone() {
        let s = sim(0.1);
        let w = WeightMatrix::zeros(3, 1);
        let mut st = SimulationState::new(3, 1, &NeuronParams::default(), &PlasticityParams::default());
        st.u[1] = -52.0 + 1.0;
        st.g_e[1] = 5.0;
        let fired = s.step(&mut st, &mut frozen(&w), &[], 2.5).unwrap().to_vec();
        assert_eq!(fired, vec![1]);
        assert!(st.g_i.iter().all(|&g| g == 0.0));
        assert_eq!(st.rate[1], 1.0);
        s.step(&mut st, &mut frozen(&w), &[], 2.5).unwrap();
        let d = (-0.1f64 / 2.0).exp();
        for &g in &st.g_i {
            assert_relative_eq!(g, 2.5 * d);
        }
    }

    #[test]
    fn rejects_bad_dt() {
        let p = PlasticityParams::default();
        let i = InhibitionConfig::default();
        assert!(Simulator::new(NeuronParams::default(), &p, 0.0, &i).is_err());
        assert!(Simulator::new(NeuronParams::default(), &p, 1.5, &i).is_err());
        assert!(Simulator::new(NeuronParams::default(), &p, 0.3, &i).is_err());
        assert!(Simulator::new(NeuronParams::default(), &p, 0.25, &i).is_ok());
    }

    #[test]
    fn divergence_is_reported() {
        let s = sim(0.1);
        let w = WeightMatrix::zeros(2, 1);
        let mut st = SimulationState::new(2, 1, &NeuronParams::default(), &PlasticityParams::default());
        st.g_e[1] = f64::NAN;
        match s.step(&mut st, &mut frozen(&w), &[], 0.0) {
            Err(Error::Diverged { neuron, .. }) => assert_eq!(neuron, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_log() {
        let s = sim(0.5);
        let w = WeightMatrix::zeros(2, 1);
        let mut st = SimulationState::new(2, 1, &NeuronParams::default(), &PlasticityParams::default());
        st.enable_trace();
        s.step(&mut st, &mut frozen(&w), &[], 0.0).unwrap();
        assert_eq!(st.trace().unwrap().len(), 2);
        let mut buf = Vec::new();
        st.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time_ms,neuron,u_mv\n0.5,0,-65"));
    }
}
