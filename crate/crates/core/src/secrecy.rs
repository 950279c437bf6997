//! Average secrecy capacity and secrecy outage probability by
//! Gauss-Chebyshev quadrature over the strongest-port amplitude laws.
//!
//! With `k = sigma_E / sigma_A` (ratio of noise standard deviations) the
//! secrecy capacity is positive exactly when Eve's amplitude is below `k`
//! times Alice's, which splits the ASC into
//!
//! ```text
//! C1 = int_0^H C_A(x) f_A(x) F_E(k x) dx
//! C2 = int_0^H int_0^{k x} C_E(y) f_A(x) f_E(y) dy dx
//! ```
//!
//! Neither the nodes nor the density values depend on the transmit power,
//! so [`AscKernel`] tabulates them once and evaluates ASC and its power
//! derivative for any `P` at the cost of a few hundred logarithms.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::numeric::pairwise_sum;
use crate::specfun::{chebyshev_rule, ChebyshevRule};
use crate::stats::AmplitudeDistribution;

/// Raw quadrature results further than this outside their theoretical range
/// are reported before clipping.
const RANGE_WARN: f64 = 1e-6;

/// `log2(1 + snr)`.
pub fn capacity(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return domain(format!("SNR must be non-negative, got {snr}"));
    }
    Ok(snr.ln_1p() / LN_2)
}

/// Integration range and node counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Upper integration limit in units of the integrated user's RMS
    /// amplitude (`H = h sqrt(eta)`).
    pub range_multiplier: f64,
    /// Nodes over Alice's amplitude in the ASC.
    pub outer_order: usize,
    /// Nodes over Eve's amplitude inside the ASC double integral.
    pub inner_order: usize,
    /// Nodes over Eve's amplitude in the SOP.
    pub sop_order: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            range_multiplier: 8.0,
            outer_order: 30,
            inner_order: 20,
            sop_order: 30,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_multiplier >= 4.0 && self.range_multiplier.is_finite()) {
            return domain(format!(
                "range multiplier must be at least 4, got {}",
                self.range_multiplier
            ));
        }
        for (name, order) in [
            ("outer", self.outer_order),
            ("inner", self.inner_order),
            ("sop", self.sop_order),
        ] {
            if order < 4 {
                return domain(format!("{name} quadrature order must be at least 4, got {order}"));
            }
        }
        Ok(())
    }
}

/// Everything needed to evaluate the secrecy metrics at one operating point.
#[derive(Debug, Clone)]
pub struct SecrecyScenario {
    power: f64,
    noise_alice: f64,
    noise_eve: f64,
    secrecy_rate: f64,
    alice: Arc<AmplitudeDistribution>,
    eve: Arc<AmplitudeDistribution>,
}

impl SecrecyScenario {
    pub fn new(
        power: f64,
        noise_alice: f64,
        noise_eve: f64,
        secrecy_rate: f64,
        alice: Arc<AmplitudeDistribution>,
        eve: Arc<AmplitudeDistribution>,
    ) -> Result<Self> {
        if !(power.is_finite() && power > 0.0) {
            return domain(format!("transmit power must be positive, got {power}"));
        }
        check_noise(noise_alice, noise_eve)?;
        if !(secrecy_rate >= 0.0) {
            return domain(format!("secrecy rate must be non-negative, got {secrecy_rate}"));
        }
        Ok(SecrecyScenario {
            power,
            noise_alice,
            noise_eve,
            secrecy_rate,
            alice,
            eve,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_alice(&self) -> f64 {
        self.noise_alice
    }

    pub fn noise_eve(&self) -> f64 {
        self.noise_eve
    }

    pub fn secrecy_rate(&self) -> f64 {
        self.secrecy_rate
    }

    pub fn alice(&self) -> &AmplitudeDistribution {
        &self.alice
    }

    pub fn eve(&self) -> &AmplitudeDistribution {
        &self.eve
    }

    /// Same scenario at a different transmit power.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        SecrecyScenario::new(
            power,
            self.noise_alice,
            self.noise_eve,
            self.secrecy_rate,
            self.alice.clone(),
            self.eve.clone(),
        )
    }
}

fn check_noise(noise_alice: f64, noise_eve: f64) -> Result<()> {
    if !(noise_alice.is_finite() && noise_alice > 0.0 && noise_eve.is_finite() && noise_eve > 0.0) {
        return domain(format!(
            "noise variances must be positive, got {noise_alice} and {noise_eve}"
        ));
    }
    Ok(())
}

/// The two ASC integrals at one power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscComponents {
    pub positive_part: f64,
    pub eve_part: f64,
}

impl AscComponents {
    /// `positive_part - eve_part`, unclipped.
    pub fn raw(&self) -> f64 {
        self.positive_part - self.eve_part
    }
}

/// Outer node `(beta^2 / sigma_A^2, weight)` and its inner nodes.
type KernelRow = ((f64, f64), Vec<(f64, f64)>);

/// Power-independent quadrature tables for the ASC.
#[derive(Debug, Clone)]
pub struct AscKernel {
    noise_alice: f64,
    noise_eve: f64,
    /// `beta_p^2 / sigma_A^2` and the matching first-integral weight.
    outer: Vec<(f64, f64)>,
    /// `chi_{p,l}^2 / sigma_E^2` and the matching second-integral weight,
    /// row-major in (p, l).
    inner: Vec<(f64, f64)>,
    range: f64,
}

impl AscKernel {
    pub fn new(
        alice: &AmplitudeDistribution,
        eve: &AmplitudeDistribution,
        noise_alice: f64,
        noise_eve: f64,
        quad: &QuadratureSettings,
    ) -> Result<Self> {
        quad.validate()?;
        check_noise(noise_alice, noise_eve)?;
        let range = quad.range_multiplier * alice.mean_gain().sqrt();
        let outer_rule = chebyshev_rule(quad.outer_order)?;
        let inner_rule = chebyshev_rule(quad.inner_order)?;
        let ratio = (noise_eve / noise_alice).sqrt();
        let up = quad.outer_order as f64;
        let ul = quad.inner_order as f64;
        let first_scale = range * PI / (2.0 * up);
        let second_scale = range * PI * PI * ratio / (4.0 * up * ul);

        let rows: Vec<KernelRow> = outer_rule
            .nodes()
            .par_iter()
            .zip(outer_rule.root_weights().par_iter())
            .map(|(&t, &wt)| {
                let beta = 0.5 * range * (t + 1.0);
                let f_alice = alice.pdf(beta);
                let outer = (
                    beta * beta / noise_alice,
                    first_scale * wt * f_alice * eve.cdf(ratio * beta),
                );
                let inner = inner_rule
                    .nodes()
                    .iter()
                    .zip(inner_rule.root_weights())
                    .map(|(&q, &wq)| {
                        let chi = ratio * beta * 0.5 * (q + 1.0);
                        (
                            chi * chi / noise_eve,
                            second_scale * beta * wt * wq * f_alice * eve.pdf(chi),
                        )
                    })
                    .collect();
                (outer, inner)
            })
            .collect();
        let mut outer = Vec::with_capacity(rows.len());
        let mut inner = Vec::with_capacity(rows.len() * quad.inner_order);
        for (o, i) in rows {
            outer.push(o);
            inner.extend(i);
        }
        Ok(AscKernel {
            noise_alice,
            noise_eve,
            outer,
            inner,
            range,
        })
    }

    pub fn from_scenario(scn: &SecrecyScenario, quad: &QuadratureSettings) -> Result<Self> {
        AscKernel::new(scn.alice(), scn.eve(), scn.noise_alice, scn.noise_eve, quad)
    }

    pub fn noise_alice(&self) -> f64 {
        self.noise_alice
    }

    pub fn noise_eve(&self) -> f64 {
        self.noise_eve
    }

    /// Upper limit `H` of the amplitude integrals.
    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn components(&self, power: f64) -> AscComponents {
        let log_term = |&(u, w): &(f64, f64)| w * (power * u).ln_1p() / LN_2;
        AscComponents {
            positive_part: pairwise_sum(&self.outer.iter().map(log_term).collect::<Vec<_>>()),
            eve_part: pairwise_sum(&self.inner.iter().map(log_term).collect::<Vec<_>>()),
        }
    }

    /// ASC at `power`, clipped at zero.
    pub fn asc(&self, power: f64) -> f64 {
        let raw = self.components(power).raw();
        if raw < -RANGE_WARN {
            warn!("ASC quadrature returned {raw:e} at P={power}; clipping to 0");
        }
        raw.max(0.0)
    }

    /// d ASC / d P of the unclipped quadrature expression.
    pub fn gradient(&self, power: f64) -> f64 {
        let slope = |&(u, w): &(f64, f64)| w * u / ((1.0 + power * u) * LN_2);
        let first = pairwise_sum(&self.outer.iter().map(slope).collect::<Vec<_>>());
        let second = pairwise_sum(&self.inner.iter().map(slope).collect::<Vec<_>>());
        first - second
    }
}

pub fn average_secrecy_capacity(scn: &SecrecyScenario, quad: &QuadratureSettings) -> Result<f64> {
    Ok(AscKernel::from_scenario(scn, quad)?.asc(scn.power))
}

pub fn asc_gradient_wrt_power(scn: &SecrecyScenario, quad: &QuadratureSettings) -> Result<f64> {
    Ok(AscKernel::from_scenario(scn, quad)?.gradient(scn.power))
}

/// Power-independent part of the SOP quadrature: Eve's density at the nodes.
#[derive(Debug, Clone)]
pub struct SopKernel {
    /// Eve amplitude `beta_p` and weight `(H pi / 2U) sqrt(1-t^2) f_E(beta_p)`.
    nodes: Vec<(f64, f64)>,
    alice: Arc<AmplitudeDistribution>,
    noise_alice: f64,
    noise_eve: f64,
}

impl SopKernel {
    pub fn new(
        alice: Arc<AmplitudeDistribution>,
        eve: &AmplitudeDistribution,
        noise_alice: f64,
        noise_eve: f64,
        quad: &QuadratureSettings,
    ) -> Result<Self> {
        quad.validate()?;
        check_noise(noise_alice, noise_eve)?;
        let rule: ChebyshevRule = chebyshev_rule(quad.sop_order)?;
        let range = quad.range_multiplier * eve.mean_gain().sqrt();
        let scale = range * PI / (2.0 * quad.sop_order as f64);
        let nodes = rule
            .nodes()
            .par_iter()
            .zip(rule.root_weights().par_iter())
            .map(|(&t, &w)| {
                let beta = 0.5 * range * (t + 1.0);
                (beta, scale * w * eve.pdf(beta))
            })
            .collect();
        Ok(SopKernel {
            nodes,
            alice,
            noise_alice,
            noise_eve,
        })
    }

    pub fn from_scenario(scn: &SecrecyScenario, quad: &QuadratureSettings) -> Result<Self> {
        SopKernel::new(scn.alice.clone(), scn.eve(), scn.noise_alice, scn.noise_eve, quad)
    }

    /// SOP at `power` and target rate `secrecy_rate`, clipped to [0, 1].
    pub fn sop(&self, power: f64, secrecy_rate: f64) -> f64 {
        let growth = secrecy_rate.exp2();
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .map(|&(beta, w)| {
                let arg = growth * (1.0 + power * beta * beta / self.noise_eve) - 1.0;
                debug_assert!(arg >= 0.0);
                let threshold = (self.noise_alice / power * arg.max(0.0)).sqrt();
                w * self.alice.cdf(threshold)
            })
            .collect();
        let raw = pairwise_sum(&terms);
        if !(-RANGE_WARN..=1.0 + RANGE_WARN).contains(&raw) {
            warn!("SOP quadrature returned {raw} at P={power}; clipping to [0, 1]");
        }
        raw.clamp(0.0, 1.0)
    }
}

pub fn secrecy_outage_probability(scn: &SecrecyScenario, quad: &QuadratureSettings) -> Result<f64> {
    Ok(SopKernel::from_scenario(scn, quad)?.sop(scn.power, scn.secrecy_rate))
}
