use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SynthConfig;
use super::generate::{non_adherence_logit, Sampler};
use crate::error::{Error, Result};
use crate::stats::sigmoid;

pub const CALIBRATION_SEED: u64 = 0x5EED_CA1B;
pub const CALIBRATION_N: usize = 200_000;

const BRACKET: (f64, f64) = (-12.0, 12.0);

/// Offsets of the non-adherence logit (everything but the intercept) over a
/// fixed covariate sample.
fn logit_offsets(config: &SynthConfig, n: usize) -> Result<Vec<f64>> {
    let sampler = Sampler::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(CALIBRATION_SEED);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let d = sampler.draw(config, &mut rng);
        // keep the stream aligned with generation, which draws one more uniform here
        let _: f64 = rng.random();
        out.push(non_adherence_logit(config, &d.x, d.medication) - config.adherence.intercept);
    }
    Ok(out)
}

fn mean_rate(offsets: &[f64], intercept: f64) -> f64 {
    offsets.iter().map(|o| sigmoid(intercept + o)).sum::<f64>() / offsets.len() as f64
}

/// Expected marginal non-adherence rate of `config` over the calibration sample.
pub fn expected_rate(config: &SynthConfig) -> Result<f64> {
    let offsets = logit_offsets(config, CALIBRATION_N)?;
    Ok(mean_rate(&offsets, config.adherence.intercept))
}

/// Sets the adherence intercept so the expected non-adherence rate over a
/// fixed 200,000-patient covariate sample equals `target_rate`.
pub fn calibrate_prevalence(config: &SynthConfig, target_rate: f64) -> Result<SynthConfig> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::Calibration(format!(
            "target rate {target_rate} must lie in (0, 1)"
        )));
    }
    let offsets = logit_offsets(config, CALIBRATION_N)?;
    let (mut lo, mut hi) = BRACKET;
    let (r_lo, r_hi) = (mean_rate(&offsets, lo), mean_rate(&offsets, hi));
    if !(r_lo <= target_rate && target_rate <= r_hi) {
        return Err(Error::Calibration(format!(
            "target {target_rate} outside attainable range ({r_lo:.4}, {r_hi:.4})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(&offsets, mid) < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let mut out = config.clone();
    out.adherence.intercept = 0.5 * (lo + hi);
    Ok(out)
}
