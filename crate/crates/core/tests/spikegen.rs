use proptest::prelude::*;

use textspike::corpus::SparseRow;
use textspike::spikegen::{expected_spike_count, generate_spikes, SpikeGenConfig};

#[test]
fn mean_count_within_four_standard_errors() {
    let config = SpikeGenConfig {
        rng_seed: 3,
        ..SpikeGenConfig::default()
    };
    let reps = 1000;
    for w in [0.01, 0.1, 0.3, 0.5, 0.66] {
        let row = SparseRow {
            indices: &[4],
            values: &[w],
        };
        let total: usize = (0..reps).map(|r| generate_spikes(row, &config, r).len()).sum();
        let mean = total as f64 / reps as f64;
        let n = config.presentation_ms as f64;
        let p = config.spike_probability(w);
        let se = (n * p * (1.0 - p)).sqrt() / (reps as f64).sqrt();
        let expected = expected_spike_count(w, &config);
        assert!((mean - expected).abs() <= 4.0 * se, "w={w}: mean {mean}, expected {expected} +/- {}", 4.0 * se);
    }
}

#[test]
fn inputs_are_independent() {
    // Two inputs with p = 0.5: the joint firing rate is close to 1/4.
    let config = SpikeGenConfig::default();
    let w = 0.5 / config.alpha;
    let row = SparseRow {
        indices: &[0, 1],
        values: &[w, w],
    };
    let mut both = 0usize;
    let reps = 200;
    for r in 0..reps {
        let s = generate_spikes(row, &config, r);
        for (_, events) in s.by_millisecond() {
            both += usize::from(events.len() == 2);
        }
    }
    let rate = both as f64 / (reps as f64 * config.presentation_ms as f64);
    assert!((rate - 0.25).abs() < 0.01, "{rate}");
}

proptest! {
    #[test]
    fn schedules_are_reproducible_and_inside_the_window(
        weights in prop::collection::vec(0.0f64..1.0, 1..20),
        seed in any::<u64>(),
        stream in any::<u64>(),
        presentation_ms in 1u32..800,
    ) {
        let indices: Vec<u32> = (0..weights.len() as u32).map(|i| i * 3).collect();
        let row = SparseRow { indices: &indices, values: &weights };
        let config = SpikeGenConfig { rng_seed: seed, presentation_ms, ..SpikeGenConfig::default() };
        let a = generate_spikes(row, &config, stream);
        let b = generate_spikes(row, &config, stream);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.window_ms, presentation_ms);
        prop_assert!(a.events.iter().all(|e| e.time_ms < presentation_ms));
        prop_assert!(a.events.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(a.events.iter().all(|e| indices.contains(&e.input)));
    }
}
