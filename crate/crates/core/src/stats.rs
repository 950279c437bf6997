//! Distribution of the strongest port's amplitude under a block partition.
//!
//! Inside a block every port is `sqrt(eta (1-rho)) p_k + sqrt(eta rho) q`
//! with private `p_k` and a shared `q`. Conditioned on the shared amplitude
//! `theta = sqrt(eta rho)|q|` the ports are independent Rician, so the block
//! maximum has conditional CDF `[1 - Q1(theta/sigma, x/sigma)]^L`, and the
//! unconditional law follows by integrating `theta` against its Rayleigh
//! density. Blocks are independent, so the overall CDF is a product.

use std::sync::Arc;

use crate::error::{domain, Result};
use crate::numeric::GaussLegendre;
use crate::specfun::{i0e, marcum_pair};
use crate::vbcm::BlockPartition;

/// Correlations below this are treated as independent ports.
pub const RHO_FLOOR: f64 = 1e-9;
/// Correlations above `1 - RHO_CEILING_GAP` are treated as identical ports.
pub const RHO_CEILING_GAP: f64 = 1e-9;
/// Half-width of the conditioning window in units of sigma. Outside it the
/// conditional CDF is within `e^{-50}` of 0 or 1 per port.
const WINDOW_SIGMAS: f64 = 10.0;

fn check_rician(x: f64, theta: f64, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return domain(format!("Rician scale must be positive, got {sigma}"));
    }
    if !(x >= 0.0 && theta >= 0.0) || theta.is_infinite() {
        return domain(format!(
            "Rician arguments must be non-negative, got x={x}, theta={theta}"
        ));
    }
    Ok(())
}

/// `P(R <= x)` for a Rician amplitude with line-of-sight `theta` and
/// per-dimension scale `sigma`, i.e. `1 - Q1(theta/sigma, x/sigma)`.
pub fn rician_cdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_rician(x, theta, sigma)?;
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(marcum_pair(theta / sigma, x / sigma).p)
}

/// Rician density `(x/sigma^2) exp(-(x^2+theta^2)/(2 sigma^2)) I0(x theta/sigma^2)`.
pub fn rician_pdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_rician(x, theta, sigma)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(rician_density(x, theta, sigma))
}

fn rician_density(x: f64, theta: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let d = x - theta;
    x / s2 * (-0.5 * d * d / s2).exp() * i0e(x * theta / s2)
}

/// Numerical settings for the integral over the shared amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterIntegral {
    /// Gauss-Legendre points over the integration window.
    pub nodes: usize,
    /// Rayleigh tail mass beyond the truncation point.
    pub tail_mass: f64,
}

impl Default for OuterIntegral {
    fn default() -> Self {
        OuterIntegral {
            nodes: 64,
            tail_mass: 1e-12,
        }
    }
}

impl OuterIntegral {
    fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return domain(format!("outer integral needs at least 2 nodes, got {}", self.nodes));
        }
        if !(self.tail_mass > 0.0 && self.tail_mass < 1.0) {
            return domain(format!("tail mass must lie in (0, 1), got {}", self.tail_mass));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockLaw {
    /// A single Rayleigh amplitude (one port, or all ports identical).
    Rayleigh,
    /// Maximum of `size` independent Rayleigh amplitudes.
    Independent,
    /// Rician maximum mixed over a Rayleigh shared amplitude.
    Mixture { sigma: f64, shared_power: f64, theta_max: f64 },
}

/// Law of the maximum amplitude within one constant-correlation block.
#[derive(Debug, Clone)]
pub struct BlockMax {
    size: usize,
    rho: f64,
    eta: f64,
    law: BlockLaw,
    rule: Arc<GaussLegendre>,
}

impl BlockMax {
    pub fn new(size: usize, rho: f64, eta: f64, outer: OuterIntegral) -> Result<Self> {
        outer.validate()?;
        Self::with_rule(size, rho, eta, outer.tail_mass, Arc::new(GaussLegendre::new(outer.nodes)))
    }

    fn with_rule(size: usize, rho: f64, eta: f64, tail_mass: f64, rule: Arc<GaussLegendre>) -> Result<Self> {
        if size == 0 {
            return domain("block size must be at least 1");
        }
        if !(0.0..=1.0).contains(&rho) {
            return domain(format!("block correlation {rho} outside [0, 1]"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return domain(format!("mean gain must be positive, got {eta}"));
        }
        let law = if size == 1 || rho > 1.0 - RHO_CEILING_GAP {
            BlockLaw::Rayleigh
        } else if rho < RHO_FLOOR {
            BlockLaw::Independent
        } else {
            let shared_power = eta * rho;
            BlockLaw::Mixture {
                sigma: (eta * (1.0 - rho) / 2.0).sqrt(),
                shared_power,
                theta_max: (shared_power * (1.0 / tail_mass).ln()).sqrt(),
            }
        };
        Ok(BlockMax {
            size,
            rho,
            eta,
            law,
            rule,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Per-dimension scale of the private component, `sqrt(eta (1-rho)/2)`.
    pub fn scatter_scale(&self) -> f64 {
        (self.eta * (1.0 - self.rho) / 2.0).sqrt()
    }

    /// RMS of the shared component, `sqrt(eta rho)`.
    pub fn shared_scale(&self) -> f64 {
        (self.eta * self.rho).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_pdf(x).0
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.cdf_pdf(x).1
    }

    /// CDF and density at `x`, sharing one pass over the quadrature nodes.
    pub fn cdf_pdf(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (0.0, 0.0);
        }
        if x.is_infinite() {
            return (1.0, 0.0);
        }
        let eta = self.eta;
        match self.law {
            BlockLaw::Rayleigh => {
                let e = (-x * x / eta).exp();
                (-(-x * x / eta).exp_m1(), 2.0 * x / eta * e)
            }
            BlockLaw::Independent => {
                let e = (-x * x / eta).exp();
                let single = -(-x * x / eta).exp_m1();
                let l = self.size as i32;
                (
                    single.powi(l),
                    l as f64 * single.powi(l - 1) * 2.0 * x / eta * e,
                )
            }
            BlockLaw::Mixture {
                sigma,
                shared_power,
                theta_max,
            } => self.mixture(x, sigma, shared_power, theta_max),
        }
    }

    fn mixture(&self, x: f64, sigma: f64, shared_power: f64, theta_max: f64) -> (f64, f64) {
        // Below the window every port is below x with certainty, so that part
        // contributes the Rayleigh CDF of the shared amplitude; above it the
        // conditional CDF vanishes.
        let lo = (x - WINDOW_SIGMAS * sigma).clamp(0.0, theta_max);
        let hi = (x + WINDOW_SIGMAS * sigma).clamp(0.0, theta_max);
        let mut cdf = -(-lo * lo / shared_power).exp_m1();
        let mut pdf = 0.0;
        if hi > lo {
            let l = self.size as i32;
            let b = x / sigma;
            for (theta, w) in self.rule.mapped(lo, hi) {
                let mixing = 2.0 * theta / shared_power * (-theta * theta / shared_power).exp();
                let below = marcum_pair(theta / sigma, b).p;
                let below_pow = below.powi(l - 1);
                cdf += w * below_pow * below * mixing;
                pdf += w * l as f64 * below_pow * rician_density(x, theta, sigma) * mixing;
            }
        }
        (cdf.clamp(0.0, 1.0), pdf.max(0.0))
    }
}

/// CDF of the largest of `size` ports in one block with correlation `rho`.
pub fn block_max_cdf(x: f64, size: usize, rho: f64, eta: f64) -> Result<f64> {
    check_amplitude(x)?;
    Ok(BlockMax::new(size, rho, eta, OuterIntegral::default())?.cdf(x))
}

/// Density of the largest of `size` ports in one block.
pub fn block_max_pdf(x: f64, size: usize, rho: f64, eta: f64) -> Result<f64> {
    check_amplitude(x)?;
    Ok(BlockMax::new(size, rho, eta, OuterIntegral::default())?.pdf(x))
}

fn check_amplitude(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        domain(format!("amplitude must be non-negative, got {x}"))
    }
}

/// Law of the strongest port over all blocks of a partition.
#[derive(Debug, Clone)]
pub struct AmplitudeDistribution {
    blocks: Vec<BlockMax>,
    mean_gain: f64,
    outer: OuterIntegral,
}

impl AmplitudeDistribution {
    pub fn new(partition: &BlockPartition, outer: OuterIntegral) -> Result<Self> {
        Self::from_blocks(
            partition.blocks().iter().map(|b| (b.size(), b.rho)),
            partition.mean_gain(),
            outer,
        )
    }

    /// Builds the distribution directly from `(size, rho)` pairs.
    pub fn from_blocks(
        blocks: impl IntoIterator<Item = (usize, f64)>,
        mean_gain: f64,
        outer: OuterIntegral,
    ) -> Result<Self> {
        outer.validate()?;
        let rule = Arc::new(GaussLegendre::new(outer.nodes));
        let blocks = blocks
            .into_iter()
            .map(|(size, rho)| BlockMax::with_rule(size, rho, mean_gain, outer.tail_mass, rule.clone()))
            .collect::<Result<Vec<_>>>()?;
        if blocks.is_empty() {
            return domain("distribution needs at least one block");
        }
        Ok(AmplitudeDistribution {
            blocks,
            mean_gain,
            outer,
        })
    }

    pub fn blocks(&self) -> &[BlockMax] {
        &self.blocks
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_gain
    }

    pub fn outer(&self) -> OuterIntegral {
        self.outer
    }

    pub fn num_ports(&self) -> usize {
        self.blocks.iter().map(BlockMax::size).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_pdf(x).0
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.cdf_pdf(x).1
    }

    /// Product CDF and the matching density `sum_d f_d prod_{j != d} F_j`.
    pub fn cdf_pdf(&self, x: f64) -> (f64, f64) {
        let parts: Vec<(f64, f64)> = self.blocks.iter().map(|b| b.cdf_pdf(x)).collect();
        let d = parts.len();
        // prefix[i] = prod_{j<i} F_j, suffix[i] = prod_{j>=i} F_j
        let mut prefix = vec![1.0; d + 1];
        for i in 0..d {
            prefix[i + 1] = prefix[i] * parts[i].0;
        }
        let mut suffix = vec![1.0; d + 1];
        for i in (0..d).rev() {
            suffix[i] = suffix[i + 1] * parts[i].0;
        }
        let pdf = (0..d).map(|i| parts[i].1 * prefix[i] * suffix[i + 1]).sum();
        (prefix[d], pdf)
    }
}

pub fn max_amplitude_cdf(x: f64, dist: &AmplitudeDistribution) -> Result<f64> {
    check_amplitude(x)?;
    Ok(dist.cdf(x))
}

pub fn max_amplitude_pdf(x: f64, dist: &AmplitudeDistribution) -> Result<f64> {
    check_amplitude(x)?;
    Ok(dist.pdf(x))
}
