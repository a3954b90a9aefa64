//! Synthetic price series for demos, smoke tests, and learnability checks.

use rand::Rng;

use crate::market_data::{Bar, PriceSeries};
use crate::seeds::stream_rng;

/// Triangular wave in [-1, 1] with the given full period.
fn triangle(i: usize, period: usize) -> f64 {
    let half = (period / 2).max(1);
    let phase = i % (2 * half);
    if phase < half {
        -1.0 + 2.0 * phase as f64 / half as f64
    } else {
        1.0 - 2.0 * (phase - half) as f64 / half as f64
    }
}

/// Deterministic sawtooth series: close oscillates `base ± amplitude` with
/// the given period (bars per full cycle), minute-spaced timestamps,
/// constant volume. Every up-leg move is predictable from the window, which
/// makes the series learnable by construction.
pub fn sawtooth_series(
    n_bars: usize,
    period: usize,
    base: f64,
    amplitude: f64,
    volume: f64,
) -> PriceSeries {
    let closes: Vec<f64> = (0..n_bars)
        .map(|i| base + amplitude * triangle(i, period))
        .collect();
    from_closes(&closes, volume, "sawtooth")
}

/// Sawtooth with multiplicative noise on the closes.
pub fn noisy_sawtooth_series(
    n_bars: usize,
    period: usize,
    base: f64,
    amplitude: f64,
    volume: f64,
    noise: f64,
    seed: u64,
) -> PriceSeries {
    let mut rng = stream_rng(seed, "synth-noise");
    let closes: Vec<f64> = (0..n_bars)
        .map(|i| {
            let clean = base + amplitude * triangle(i, period);
            clean * (1.0 + rng.gen_range(-noise..=noise))
        })
        .collect();
    from_closes(&closes, volume, "noisy-sawtooth")
}

/// Constant-price series (useful for baseline sanity checks).
pub fn flat_series(n_bars: usize, price: f64, volume: f64) -> PriceSeries {
    from_closes(&vec![price; n_bars], volume, "flat")
}

fn from_closes(closes: &[f64], volume: f64, source_id: &str) -> PriceSeries {
    let bars: Vec<Bar> = closes
        .iter()
        .enumerate()
        .map(|(i, &close)| {
            let open = if i == 0 { close } else { closes[i - 1] };
            Bar {
                timestamp: 60 * i as i64,
                open,
                high: open.max(close),
                low: open.min(close),
                close,
                volume,
            }
        })
        .collect();
    PriceSeries::from_bars(bars, source_id).expect("synthetic bars are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_oscillates_within_band() {
        let s = sawtooth_series(100, 8, 100.0, 2.0, 1000.0);
        assert_eq!(s.len(), 100);
        for b in s.bars() {
            assert!(b.close >= 98.0 - 1e-12 && b.close <= 102.0 + 1e-12);
        }
        // Period 8: close returns to the same value every 8 bars.
        assert_eq!(s.bars()[0].close, s.bars()[8].close);
        assert_ne!(s.bars()[0].close, s.bars()[4].close);
    }

    #[test]
    fn flat_series_has_zero_relative_bars() {
        let s = flat_series(10, 50.0, 1.0);
        for r in s.rel() {
            assert_eq!((r.rel_high, r.rel_low, r.rel_close), (0.0, 0.0, 0.0));
        }
    }
}
