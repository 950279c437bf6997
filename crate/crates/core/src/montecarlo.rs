//! Monte Carlo reference for the secrecy metrics under the exact Jakes
//! correlation.
//!
//! Every sample draws from its own ChaCha8 stream, keyed by the seed and the
//! user, with the sample index as stream number. The output is therefore a
//! function of the seed alone, independent of chunk size and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{coloring_factor, Covariance};
use crate::error::{domain, Result};
use crate::linalg::Matrix;
use crate::numeric::pairwise_sum;

pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub num_samples: usize,
    pub seed: u64,
    /// Samples per parallel work item; affects scheduling only.
    pub chunk_size: usize,
}

impl McSettings {
    pub fn new(num_samples: usize, seed: u64) -> Result<Self> {
        let s = McSettings {
            num_samples,
            seed,
            chunk_size: 4096,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < MIN_SAMPLES {
            return domain(format!(
                "at least {MIN_SAMPLES} samples are required, got {}",
                self.num_samples
            ));
        }
        if self.chunk_size == 0 {
            return domain("chunk size must be positive");
        }
        Ok(())
    }
}

/// Sample mean with its standard error and normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub num_samples: usize,
}

impl McEstimate {
    fn from_mean(mean: f64, std_error: f64, num_samples: usize) -> Self {
        McEstimate {
            mean,
            std_error,
            ci95_low: mean - 1.96 * std_error,
            ci95_high: mean + 1.96 * std_error,
            num_samples,
        }
    }

    /// Mean and `sample std / sqrt(n)`, both summed pairwise in index order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let spread: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let variance = if n > 1 {
            pairwise_sum(&spread) / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate::from_mean(mean, (variance / n as f64).sqrt(), n)
    }

    /// Proportion estimate with binomial standard error; when every or no
    /// draw succeeds the error is floored at `sqrt(0.5/n)`.
    pub fn from_count(successes: usize, num_samples: usize) -> Self {
        let n = num_samples as f64;
        let p = successes as f64 / n;
        let se = if successes == 0 || successes == num_samples {
            (0.5 / n).sqrt()
        } else {
            (p * (1.0 - p) / n).sqrt()
        };
        McEstimate::from_mean(p, se, num_samples)
    }
}

/// Which user a random stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Alice,
    Eve,
}

fn base_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = match stream {
        Stream::Alice => 1,
        Stream::Eve => 2,
    };
    ChaCha8Rng::from_seed(key)
}

/// Draws `g = F z` with i.i.d. unit-variance circular complex Gaussian `z`
/// and returns the largest `|g_k|`.
pub fn sample_max_amplitude<R: Rng + ?Sized>(factor: &Matrix, rng: &mut R) -> f64 {
    let n = factor.dim();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            (re * scale, im * scale)
        })
        .collect();
    let mut best: f64 = 0.0;
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (f, (zr, zi)) in factor.row(k).iter().zip(&z) {
            re += f * zr;
            im += f * zi;
        }
        best = best.max(re.hypot(im));
    }
    best
}

/// `num_samples` maximum amplitudes for one user, sample `i` drawn from
/// stream `i` of the user's generator.
pub fn max_amplitude_samples(factor: &Matrix, stream: Stream, settings: &McSettings) -> Result<Vec<f64>> {
    if settings.chunk_size == 0 {
        return domain("chunk size must be positive");
    }
    let base = base_rng(settings.seed, stream);
    let n = settings.num_samples;
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(settings.chunk_size))
        .into_par_iter()
        .map(|c| {
            let start = c * settings.chunk_size;
            let end = (start + settings.chunk_size).min(n);
            (start..end)
                .map(|i| {
                    let mut rng = base.clone();
                    rng.set_stream(i as u64);
                    sample_max_amplitude(factor, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// Instantaneous secrecy capacities `[C_A - C_E]^+` for paired samples.
pub fn secrecy_capacities(
    alice: &[f64],
    eve: &[f64],
    power: f64,
    noise_alice: f64,
    noise_eve: f64,
) -> Vec<f64> {
    alice
        .iter()
        .zip(eve)
        .map(|(&a, &e)| {
            let ca = (power * a * a / noise_alice).ln_1p();
            let ce = (power * e * e / noise_eve).ln_1p();
            ((ca - ce) / std::f64::consts::LN_2).max(0.0)
        })
        .collect()
}

/// ASC estimate from pre-drawn amplitude samples.
pub fn asc_from_samples(alice: &[f64], eve: &[f64], power: f64, noise_alice: f64, noise_eve: f64) -> McEstimate {
    McEstimate::from_values(&secrecy_capacities(alice, eve, power, noise_alice, noise_eve))
}

/// SOP estimate from pre-drawn amplitude samples.
pub fn sop_from_samples(
    alice: &[f64],
    eve: &[f64],
    power: f64,
    noise_alice: f64,
    noise_eve: f64,
    secrecy_rate: f64,
) -> McEstimate {
    let caps = secrecy_capacities(alice, eve, power, noise_alice, noise_eve);
    let outages = caps.iter().filter(|&&c| c < secrecy_rate).count();
    McEstimate::from_count(outages, caps.len())
}

fn check_inputs(power: f64, noise_alice: f64, noise_eve: f64) -> Result<()> {
    if !(power >= 0.0 && power.is_finite()) {
        return domain(format!("transmit power must be non-negative, got {power}"));
    }
    if !(noise_alice > 0.0 && noise_eve > 0.0) {
        return domain("noise variances must be positive");
    }
    Ok(())
}

fn paired_samples(
    alice_cov: &Covariance,
    eve_cov: &Covariance,
    settings: &McSettings,
) -> Result<(Vec<f64>, Vec<f64>)> {
    settings.validate()?;
    let fa = coloring_factor(alice_cov)?;
    let fe = coloring_factor(eve_cov)?;
    Ok((
        max_amplitude_samples(&fa, Stream::Alice, settings)?,
        max_amplitude_samples(&fe, Stream::Eve, settings)?,
    ))
}

pub fn mc_asc(
    alice_cov: &Covariance,
    eve_cov: &Covariance,
    power: f64,
    noise_alice: f64,
    noise_eve: f64,
    settings: &McSettings,
) -> Result<McEstimate> {
    check_inputs(power, noise_alice, noise_eve)?;
    let (a, e) = paired_samples(alice_cov, eve_cov, settings)?;
    Ok(asc_from_samples(&a, &e, power, noise_alice, noise_eve))
}

pub fn mc_sop(
    alice_cov: &Covariance,
    eve_cov: &Covariance,
    power: f64,
    noise_alice: f64,
    noise_eve: f64,
    secrecy_rate: f64,
    settings: &McSettings,
) -> Result<McEstimate> {
    check_inputs(power, noise_alice, noise_eve)?;
    if !(secrecy_rate >= 0.0) {
        return domain(format!("secrecy rate must be non-negative, got {secrecy_rate}"));
    }
    let (a, e) = paired_samples(alice_cov, eve_cov, settings)?;
    Ok(sop_from_samples(&a, &e, power, noise_alice, noise_eve, secrecy_rate))
}
