//! Synthetic archived windows and live streams for the benchmark suite.
//!
//! Windows hold a sinusoid around 50 with seeded noise; a planted subset
//! follows the live generator's waveform closely, so Pearson queries at
//! 0.75 have nonempty answers, while average and minimum similarities get
//! a healthy mix of hits and misses.

use ontostream_core::engine::{compute_mws, Measurement, WindowBlock, WindowRecord, WindowStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SENSOR: &str = "ref";
pub const LIVE_SENSOR: &str = "live";

/// One archived window every `tuples` seconds, `tuples` samples each.
pub struct SynthConfig {
    pub windows: usize,
    pub tuples: usize,
    pub seed: u64,
    /// Every k-th window is planted to correlate with the live waveform.
    pub planted_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { windows: 10_000, tuples: 60, seed: 42, planted_every: 20 }
    }
}

fn base_waveform(i: usize) -> f64 {
    50.0 + 20.0 * (i as f64 * 0.3).sin()
}

pub fn archived_store(cfg: &SynthConfig) -> WindowStore {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.windows);
    let mut blocks = Vec::with_capacity(cfg.windows);
    let span = cfg.tuples as i64 * 1_000;
    for w in 0..cfg.windows {
        let start = w as i64 * span;
        let planted = cfg.planted_every > 0 && w % cfg.planted_every == 0;
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let freq: f64 = rng.gen_range(0.05..0.8);
        let samples: Vec<(i64, f64)> = (0..cfg.tuples)
            .map(|i| {
                let t = start + i as i64 * 1_000 + 500;
                let v = if planted {
                    base_waveform(i) + rng.gen_range(-0.5..0.5)
                } else {
                    50.0 + 30.0 * (phase + i as f64 * freq).sin() + rng.gen_range(-2.0..2.0)
                };
                (t, v)
            })
            .collect();
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let signature = compute_mws(&values).expect("nonempty window");
        records.push(WindowRecord {
            wid: w as u64,
            sensor: SENSOR.into(),
            start_ms: start,
            end_ms: start + span,
            signature,
        });
        blocks.push(WindowBlock { wid: w as u64, sensor: SENSOR.into(), samples });
    }
    WindowStore::from_parts(records, blocks)
}

/// `cycles` live windows on the same grid, one sensor, following the base
/// waveform with small noise.
pub fn live_stream(cfg: &SynthConfig, cycles: usize, start_ms: i64) -> Vec<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ LIVE_SEED);
    let mut out = Vec::with_capacity(cycles * cfg.tuples);
    for c in 0..cycles {
        for i in 0..cfg.tuples {
            let t = start_ms + (c * cfg.tuples + i) as i64 * 1_000 + 500;
            let v = base_waveform(i) + rng.gen_range(-0.5..0.5);
            out.push(Measurement { sensor: LIVE_SENSOR.into(), time_ms: t, value: v });
        }
    }
    out
}

const LIVE_SEED: u64 = 0x1157_0202;
