//! Modified STDP with synaptic scaling, and post-training pruning.
//!
//! On every postsynaptic spike of neuron `j`, each kept incoming synapse
//! `i -> j` moves by
//!
//! ```text
//! ds_ij = eta * (A_i - (R_j + 0.1) * s_ij)
//! ```
//!
//! where `A_i` is the presynaptic trace (set to 1 on each presynaptic spike,
//! decaying with `tau_A`) and `R_j` the postsynaptic rate trace (incremented
//! by 1 on each postsynaptic spike, decaying with `tau_R`). There is no
//! post-before-pre depression branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::WeightMatrix;

/// Whether the firing neuron's own spike is counted in `R` for the update
/// it triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Update with the pre-spike `R`, then increment.
    #[default]
    UpdateThenIncrement,
    IncrementThenUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlasticityParams {
    pub eta: f64,
    pub tau_a_ms: f64,
    pub tau_r_ms: f64,
    pub scaling_floor: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub update_order: UpdateOrder,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        PlasticityParams {
            eta: 0.01,
            tau_a_ms: 5.0,
            tau_r_ms: 70.0,
            scaling_floor: 0.1,
            w_min: 0.0,
            w_max: 10.0,
            update_order: UpdateOrder::default(),
        }
    }
}

impl PlasticityParams {
    /// `eta` may be zero (learning switched off) but not negative.
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta >= 0.0
            && self.tau_a_ms > 0.0
            && self.tau_r_ms > 0.0
            && self.scaling_floor >= 0.0
            && self.w_min < self.w_max
            && [self.eta, self.tau_a_ms, self.tau_r_ms, self.scaling_floor, self.w_min, self.w_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("plasticity parameters {self:?}")))
        }
    }
}

/// Presynaptic traces `A_i`, stored lazily as (value, time of last reset) so
/// that decaying every trace costs O(1): `A_i(t) = v_i * exp(-(t - t_i) / tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PresynapticTraces {
    value: Vec<f64>,
    stamp: Vec<f64>,
    now: f64,
    tau: f64,
}

impl PresynapticTraces {
    pub fn new(n_inputs: usize, tau_ms: f64) -> Self {
        PresynapticTraces {
            value: vec![0.0; n_inputs],
            stamp: vec![0.0; n_inputs],
            now: 0.0,
            tau: tau_ms,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn get(&self, i: usize) -> f64 {
        let v = self.value[i];
        if v == 0.0 {
            0.0
        } else {
            v * (-(self.now - self.stamp[i]) / self.tau).exp()
        }
    }

    /// Current value of every trace.
    pub fn fill_current(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.len()).map(|i| self.get(i)));
    }

    /// `A_i := 1`.
    pub fn on_presynaptic_spike(&mut self, i: usize) {
        self.value[i] = 1.0;
        self.stamp[i] = self.now;
    }

    /// `A *= exp(-elapsed / tau_A)` for every trace.
    pub fn decay(&mut self, elapsed_ms: f64) {
        self.now += elapsed_ms;
    }

    /// Like [`decay`](Self::decay) but to an absolute clock value, which
    /// avoids accumulating rounding error over long runs.
    pub fn advance_to(&mut self, t_ms: f64) {
        debug_assert!(t_ms >= self.now);
        self.now = t_ms;
    }

    /// Overwrites trace `i` with `v` at the current time.
    pub fn set(&mut self, i: usize, v: f64) {
        self.value[i] = v;
        self.stamp[i] = self.now;
    }

    pub fn reset(&mut self) {
        self.value.fill(0.0);
        self.stamp.fill(0.0);
        self.now = 0.0;
    }
}

/// Free-function form of [`PresynapticTraces::on_presynaptic_spike`].
pub fn on_presynaptic_spike(traces: &mut PresynapticTraces, input: usize) {
    traces.on_presynaptic_spike(input);
}

/// Decays every presynaptic trace by `exp(-elapsed/tau_A)` and every rate
/// trace by `exp(-elapsed/tau_R)`.
pub fn decay_traces(
    traces: &mut PresynapticTraces,
    rates: &mut [f64],
    elapsed_ms: f64,
    params: &PlasticityParams,
) {
    traces.decay(elapsed_ms);
    let f = (-elapsed_ms / params.tau_r_ms).exp();
    for r in rates {
        *r *= f;
    }
}

/// Applies the STDP update to one neuron's incoming weights after it fired
/// and bumps its rate trace. `presynaptic` holds the current `A_i`, and
/// `kept` (if pruned) marks synapses that may change. Returns how many
/// weights had to be clamped.
pub fn on_postsynaptic_spike(
    weights: &mut [f64],
    kept: Option<&[bool]>,
    presynaptic: &[f64],
    rate: &mut f64,
    params: &PlasticityParams,
) -> usize {
    debug_assert_eq!(weights.len(), presynaptic.len());
    if params.update_order == UpdateOrder::IncrementThenUpdate {
        *rate += 1.0;
    }
    let scale = *rate + params.scaling_floor;
    let eta = params.eta;
    let (lo, hi) = (params.w_min, params.w_max);
    let mut clamped = 0;
    let mut update = |s: &mut f64, a: f64| {
        let next = *s + eta * (a - scale * *s);
        let bounded = next.clamp(lo, hi);
        clamped += usize::from(bounded != next);
        *s = bounded;
    };
    match kept {
        None => {
            for (s, &a) in weights.iter_mut().zip(presynaptic) {
                update(s, a);
            }
        }
        Some(kept) => {
            for ((s, &a), _) in weights
                .iter_mut()
                .zip(presynaptic)
                .zip(kept)
                .filter(|(_, &k)| k)
            {
                update(s, a);
            }
        }
    }
    if params.update_order == UpdateOrder::UpdateThenIncrement {
        *rate += 1.0;
    }
    clamped
}

/// Per-neuron connection mask produced by pruning; `true` means kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    pub theta: f64,
    pub n_neurons: usize,
    pub n_inputs: usize,
    kept: Vec<bool>,
}

impl PruneMask {
    pub fn from_kept(theta: f64, n_neurons: usize, n_inputs: usize, kept: Vec<bool>) -> Result<Self> {
        if kept.len() != n_neurons * n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries, expected {}",
                kept.len(),
                n_neurons * n_inputs
            )));
        }
        Ok(PruneMask {
            theta,
            n_neurons,
            n_inputs,
            kept,
        })
    }

    pub fn row(&self, neuron: usize) -> &[bool] {
        &self.kept[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn is_kept(&self, neuron: usize, input: usize) -> bool {
        self.kept[neuron * self.n_inputs + input]
    }

    pub fn kept_count(&self, neuron: usize) -> usize {
        self.row(neuron).iter().filter(|&&k| k).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.kept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub theta: f64,
}

impl PruneConfig {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidConfig(format!("theta must be in [0, 1), got {theta}")));
        }
        Ok(PruneConfig { theta })
    }

    /// `floor(theta * n)`, robust to representation error in `theta`.
    pub fn pruned_count(&self, n_incoming: usize) -> usize {
        ((self.theta * n_incoming as f64) + 1e-9).floor() as usize
    }
}

/// Masks the `floor(theta * n)` weakest incoming connections of every
/// neuron. Ties go to the lower input index first.
pub fn prune_mask(weights: &WeightMatrix, config: PruneConfig) -> PruneMask {
    let (n_neurons, n_inputs) = (weights.n_neurons(), weights.n_inputs());
    let k = config.pruned_count(n_inputs);
    let mut kept = vec![true; n_neurons * n_inputs];
    let mut order: Vec<usize> = Vec::with_capacity(n_inputs);
    for j in 0..n_neurons {
        let row = weights.row(j);
        order.clear();
        order.extend(0..n_inputs);
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for &i in &order[..k] {
            kept[j * n_inputs + i] = false;
        }
    }
    PruneMask {
        theta: config.theta,
        n_neurons,
        n_inputs,
        kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn presynaptic_set_and_decay() {
        let mut a = PresynapticTraces::new(2, 5.0);
        a.set(0, 0.2);
        on_presynaptic_spike(&mut a, 0);
        assert_eq!(a.get(0), 1.0);
        on_presynaptic_spike(&mut a, 0);
        assert_eq!(a.get(0), 1.0);
        let mut r = [1.0];
        decay_traces(&mut a, &mut r, 5.0, &PlasticityParams::default());
        assert_abs_diff_eq!(a.get(0), (-1f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(a.get(0), 0.3679, epsilon = 1e-4);
        assert_eq!(a.get(1), 0.0);
    }

    #[test]
    fn rate_decay() {
        let p = PlasticityParams::default();
        let mut a = PresynapticTraces::new(1, p.tau_a_ms);
        let mut r = [1.0, 0.0];
        decay_traces(&mut a, &mut r, 0.0, &p);
        assert_eq!(r, [1.0, 0.0]);
        decay_traces(&mut a, &mut r, 70.0, &p);
        assert_abs_diff_eq!(r[0], 0.3679, epsilon = 1e-4);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn update_examples() {
        let p = PlasticityParams::default();
        let mut s = [0.5, 0.0];
        let mut r = 0.0;
        on_postsynaptic_spike(&mut s, None, &[1.0, 0.0], &mut r, &p);
        assert_abs_diff_eq!(s[0], 0.5095, epsilon = 1e-12);
        assert_eq!(s[1], 0.0);
        assert_eq!(r, 1.0);

        let mut s = [1.0];
        let mut r = 4.0;
        on_postsynaptic_spike(&mut s, None, &[0.0], &mut r, &p);
        assert_abs_diff_eq!(s[0], 1.0 - 0.041, epsilon = 1e-12);
        assert_eq!(r, 5.0);
    }

    #[test]
    fn increment_first_order() {
        let p = PlasticityParams {
            update_order: UpdateOrder::IncrementThenUpdate,
            ..Default::default()
        };
        let mut s = [0.5];
        let mut r = 0.0;
        on_postsynaptic_spike(&mut s, None, &[1.0], &mut r, &p);
        assert_abs_diff_eq!(s[0], 0.5 + 0.01 * (1.0 - 1.1 * 0.5), epsilon = 1e-12);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn masked_synapses_never_change() {
        let p = PlasticityParams::default();
        let mut s = [0.5, 0.5];
        let mut r = 2.0;
        on_postsynaptic_spike(&mut s, Some(&[false, true]), &[1.0, 1.0], &mut r, &p);
        assert_eq!(s[0], 0.5);
        assert_ne!(s[1], 0.5);
    }

    #[test]
    fn clamp_is_reported() {
        let p = PlasticityParams {
            w_max: 0.5,
            ..Default::default()
        };
        let mut s = [0.5];
        let mut r = 0.0;
        assert_eq!(on_postsynaptic_spike(&mut s, None, &[1.0], &mut r, &p), 1);
        assert_eq!(s[0], 0.5);
    }

    #[test]
    fn prune_examples() {
        let w = WeightMatrix::from_rows(&[vec![0.9, 0.1, 0.5, 0.3]]).unwrap();
        let m = prune_mask(&w, PruneConfig::new(0.5).unwrap());
        assert_eq!(m.row(0), &[true, false, true, false]);

        let m = prune_mask(&w, PruneConfig::new(0.0).unwrap());
        assert_eq!(m.kept_count(0), 4);

        let w = WeightMatrix::from_rows(&[vec![0.4; 100]]).unwrap();
        let m = prune_mask(&w, PruneConfig::new(0.9).unwrap());
        assert_eq!(m.kept_count(0), 10);
        assert!(m.row(0)[..90].iter().all(|&k| !k));
        assert!(m.row(0)[90..].iter().all(|&k| k));

        assert!(PruneConfig::new(1.0).is_err());
        assert!(PruneConfig::new(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn pruning_keeps_exact_count(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..60), 1..5),
            theta in 0.0f64..0.999,
        ) {
            let n = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(n, 0.5); r }).collect();
            let w = WeightMatrix::from_rows(&rows).unwrap();
            let cfg = PruneConfig::new(theta).unwrap();
            let m = prune_mask(&w, cfg);
            for j in 0..rows.len() {
                prop_assert_eq!(m.kept_count(j), n - cfg.pruned_count(n));
                let min_kept = (0..n).filter(|&i| m.is_kept(j, i)).map(|i| rows[j][i]).fold(f64::INFINITY, f64::min);
                let max_pruned = (0..n).filter(|&i| !m.is_kept(j, i)).map(|i| rows[j][i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(max_pruned <= min_kept);
            }
        }

        #[test]
        fn iteration_converges_to_fixed_point(a in 0.0f64..=1.0, r in 0.0f64..20.0, s0 in 0.0f64..10.0) {
            let p = PlasticityParams::default();
            let mut s = [s0];
            let contraction = 1.0 - p.eta * (r + p.scaling_floor);
            // Enough iterations for contraction^k * 10 < 1e-7.
            let k = ((1e-8f64).ln() / contraction.ln()).ceil() as usize + 1;
            for _ in 0..k {
                let mut rr = r;
                on_postsynaptic_spike(&mut s, None, &[a], &mut rr, &p);
            }
            prop_assert!((s[0] - a / (r + p.scaling_floor)).abs() < 1e-6);
        }

        #[test]
        fn update_stays_in_bounds_without_clamp(a in 0.0f64..=1.0, r in 0.0f64..90.0, s0 in 0.0f64..=10.0) {
            let p = PlasticityParams::default();
            let mut s = [s0];
            let mut rr = r;
            prop_assert_eq!(on_postsynaptic_spike(&mut s, None, &[a], &mut rr, &p), 0);
        }
    }
}
