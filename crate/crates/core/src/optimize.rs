//! Maximizing average secrecy capacity over Alice's port count and the
//! transmit power.
//!
//! Two searches are provided: an exhaustive grid over (ports, power) and a
//! projected gradient ascent in power that periodically tries one more
//! port. Both work on any [`Objective`], so they can be exercised on
//! analytic test functions as well as the secrecy model.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use log::debug;
use rayon::prelude::*;

use crate::channel::FasGeometry;
use crate::error::{domain, Error, Result};
use crate::secrecy::{AscKernel, QuadratureSettings};
use crate::stats::{AmplitudeDistribution, OuterIntegral};
use crate::vbcm::{fit_geometry, BlockPolicy, FitMode};

/// A function of (port count, power) to maximize.
pub trait Objective: Sync {
    fn evaluate(&self, num_ports: usize, power: f64) -> Result<f64>;

    /// Analytic derivative in power, if the objective has one.
    fn power_gradient(&self, _num_ports: usize, _power: f64) -> Option<Result<f64>> {
        None
    }

    /// Called once with every port count a search is about to visit.
    fn prepare(&self, _ports: &[usize]) -> Result<()> {
        Ok(())
    }
}

/// Wraps a closure as an objective, optionally with its power derivative.
pub struct FnObjective<F, G = fn(usize, f64) -> f64> {
    value: F,
    gradient: Option<G>,
}

impl<F: Fn(usize, f64) -> f64 + Sync> FnObjective<F> {
    pub fn new(value: F) -> Self {
        FnObjective {
            value,
            gradient: None,
        }
    }
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(usize, f64) -> f64 + Sync,
    G: Fn(usize, f64) -> f64 + Sync,
{
    pub fn with_gradient(value: F, gradient: G) -> Self {
        FnObjective {
            value,
            gradient: Some(gradient),
        }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(usize, f64) -> f64 + Sync,
    G: Fn(usize, f64) -> f64 + Sync,
{
    fn evaluate(&self, num_ports: usize, power: f64) -> Result<f64> {
        Ok((self.value)(num_ports, power))
    }

    fn power_gradient(&self, num_ports: usize, power: f64) -> Option<Result<f64>> {
        self.gradient.as_ref().map(|g| Ok(g(num_ports, power)))
    }
}

/// Feasible box for (port count, power).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub power_min: f64,
    pub power_max: f64,
    pub ports_min: usize,
    pub ports_max: usize,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_min.is_finite() && self.power_max.is_finite() && self.power_min < self.power_max) {
            return domain(format!(
                "power bounds must satisfy P_min < P_max, got [{}, {}]",
                self.power_min, self.power_max
            ));
        }
        if self.ports_min > self.ports_max {
            return domain(format!(
                "port bounds must satisfy N_min <= N_max, got [{}, {}]",
                self.ports_min, self.ports_max
            ));
        }
        Ok(())
    }

    pub fn check(&self, num_ports: usize, power: f64) -> Result<()> {
        if num_ports < self.ports_min {
            return Err(Error::Constraint(format!(
                "port count {num_ports} below minimum {}",
                self.ports_min
            )));
        }
        if num_ports > self.ports_max {
            return Err(Error::Constraint(format!(
                "port count {num_ports} above maximum {}",
                self.ports_max
            )));
        }
        if !(power >= self.power_min) {
            return Err(Error::Constraint(format!(
                "power {power} below minimum {}",
                self.power_min
            )));
        }
        if !(power <= self.power_max) {
            return Err(Error::Constraint(format!(
                "power {power} above maximum {}",
                self.power_max
            )));
        }
        Ok(())
    }

    pub fn clip_power(&self, power: f64) -> f64 {
        power.clamp(self.power_min, self.power_max)
    }
}

/// Bounds on Alice's configuration, including the shared port budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    pub power_min: f64,
    pub power_max: f64,
    pub ports_min: usize,
    pub ports_max: usize,
    /// Upper bound on Alice's plus Eve's ports.
    pub total_port_cap: usize,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            power_min: 0.1,
            power_max: 20.0,
            ports_min: 2,
            ports_max: 35,
            total_port_cap: 40,
        }
    }
}

/// Fixed scenario around the optimization variables.
#[derive(Debug, Clone)]
pub struct OptEnvironment {
    pub eve: FasGeometry,
    pub alice_aperture: f64,
    pub alice_gain: f64,
    pub noise_alice: f64,
    pub noise_eve: f64,
    pub quadrature: QuadratureSettings,
    pub constraints: Constraints,
    pub fit_mode: FitMode,
    pub block_policy: BlockPolicy,
}

impl OptEnvironment {
    /// Alice's port range after applying the total port budget.
    pub fn search_space(&self) -> Result<SearchSpace> {
        let c = &self.constraints;
        let by_cap = c.total_port_cap.checked_sub(self.eve.num_ports()).ok_or_else(|| {
            Error::Constraint(format!(
                "Eve's {} ports already exceed the total cap {}",
                self.eve.num_ports(),
                c.total_port_cap
            ))
        })?;
        let space = SearchSpace {
            power_min: c.power_min,
            power_max: c.power_max,
            ports_min: c.ports_min.max(2),
            ports_max: c.ports_max.min(by_cap),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        FasGeometry::new(2, self.alice_aperture, self.alice_gain)?;
        if !(self.noise_alice > 0.0 && self.noise_eve > 0.0) {
            return domain("noise variances must be positive");
        }
        if self.constraints.power_min <= 0.0 {
            return domain("minimum power must be positive");
        }
        self.quadrature.validate()?;
        self.search_space().map(|_| ())
    }
}

/// ASC as a function of (Alice's port count, power), with the block fit and
/// quadrature tables cached per port count.
pub struct AscObjective {
    env: OptEnvironment,
    space: SearchSpace,
    eve: AmplitudeDistribution,
    kernels: Mutex<HashMap<usize, Arc<AscKernel>>>,
}

impl AscObjective {
    pub fn new(env: OptEnvironment) -> Result<Self> {
        env.validate()?;
        let space = env.search_space()?;
        let eve_fit = fit_geometry(&env.eve, env.block_policy, env.fit_mode)?;
        let eve = AmplitudeDistribution::new(&eve_fit, OuterIntegral::default())?;
        Ok(AscObjective {
            env,
            space,
            eve,
            kernels: Mutex::new(HashMap::new()),
        })
    }

    pub fn environment(&self) -> &OptEnvironment {
        &self.env
    }

    pub fn space(&self) -> SearchSpace {
        self.space
    }

    fn build_kernel(&self, num_ports: usize) -> Result<AscKernel> {
        let geom = FasGeometry::new(num_ports, self.env.alice_aperture, self.env.alice_gain)?;
        let fit = fit_geometry(&geom, self.env.block_policy, self.env.fit_mode)?;
        let alice = AmplitudeDistribution::new(&fit, OuterIntegral::default())?;
        AscKernel::new(
            &alice,
            &self.eve,
            self.env.noise_alice,
            self.env.noise_eve,
            &self.env.quadrature,
        )
    }

    /// Quadrature tables for `num_ports`, built on first use.
    pub fn kernel(&self, num_ports: usize) -> Result<Arc<AscKernel>> {
        if let Some(k) = self.kernels.lock().expect("kernel cache poisoned").get(&num_ports) {
            return Ok(k.clone());
        }
        let kernel = Arc::new(self.build_kernel(num_ports)?);
        let mut cache = self.kernels.lock().expect("kernel cache poisoned");
        Ok(cache.entry(num_ports).or_insert(kernel).clone())
    }
}

impl Objective for AscObjective {
    fn evaluate(&self, num_ports: usize, power: f64) -> Result<f64> {
        self.space.check(num_ports, power)?;
        Ok(self.kernel(num_ports)?.asc(power))
    }

    fn power_gradient(&self, num_ports: usize, power: f64) -> Option<Result<f64>> {
        Some(analytic_gradient_step(self, num_ports, power))
    }

    fn prepare(&self, ports: &[usize]) -> Result<()> {
        let missing: Vec<usize> = {
            let cache = self.kernels.lock().expect("kernel cache poisoned");
            ports.iter().copied().filter(|n| !cache.contains_key(n)).collect()
        };
        let built: Vec<(usize, AscKernel)> = missing
            .into_par_iter()
            .map(|n| self.build_kernel(n).map(|k| (n, k)))
            .collect::<Result<_>>()?;
        let mut cache = self.kernels.lock().expect("kernel cache poisoned");
        for (n, k) in built {
            cache.entry(n).or_insert_with(|| Arc::new(k));
        }
        Ok(())
    }
}

/// Analytic d ASC / d P at (`num_ports`, `power`).
pub fn analytic_gradient_step(objective: &AscObjective, num_ports: usize, power: f64) -> Result<f64> {
    if !(power > 0.0) {
        return domain(format!("power must be positive, got {power}"));
    }
    objective.space.check(num_ports, power)?;
    Ok(objective.kernel(num_ports)?.gradient(power))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Power grid points `G`.
    pub resolution: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return domain(format!("grid resolution must be at least 2, got {}", self.resolution));
        }
        Ok(())
    }

    /// `P_min + j (P_max - P_min)/(G - 1)` for `j = 0..G`.
    pub fn powers(&self, space: &SearchSpace) -> Vec<f64> {
        let g = self.resolution;
        let step = (space.power_max - space.power_min) / (g - 1) as f64;
        (0..g)
            .map(|j| {
                if j + 1 == g {
                    space.power_max
                } else {
                    space.power_min + j as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSpec {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Finite-difference half step in power.
    pub fd_step: f64,
    /// Iterations between port-count probes.
    pub probe_interval: usize,
    /// Stop once the power gradient magnitude falls below this.
    pub grad_tolerance: f64,
    /// Also probe one port fewer.
    pub symmetric_probe: bool,
    /// Use the objective's analytic power derivative instead of finite
    /// differences.
    pub analytic_gradient: bool,
}

impl Default for GradientSpec {
    fn default() -> Self {
        GradientSpec {
            learning_rate: 0.01,
            max_iters: 100,
            fd_step: 0.01,
            probe_interval: 5,
            grad_tolerance: 0.0,
            symmetric_probe: false,
            analytic_gradient: false,
        }
    }
}

impl GradientSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return domain(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return domain(format!("finite-difference step must be positive, got {}", self.fd_step));
        }
        if self.probe_interval == 0 {
            return domain("probe interval must be at least 1");
        }
        if self.max_iters == 0 {
            return domain("iteration count must be at least 1");
        }
        if !(self.grad_tolerance >= 0.0) {
            return domain("gradient tolerance must be non-negative");
        }
        Ok(())
    }
}

/// What happened at a port-count probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    None,
    Rejected,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub num_ports: usize,
    pub power: f64,
    pub asc: f64,
    pub probe: ProbeOutcome,
}

/// Where the objective evaluations of a gradient run went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvaluationBreakdown {
    pub initial: usize,
    /// Finite-difference evaluations (two per iteration).
    pub gradient: usize,
    /// Value at each new iterate.
    pub tracking: usize,
    /// Neighbouring port counts tried.
    pub probe: usize,
}

impl EvaluationBreakdown {
    pub fn total(&self) -> usize {
        self.initial + self.gradient + self.tracking + self.probe
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_num_ports: usize,
    pub best_power: f64,
    pub best_asc: f64,
    pub objective_evaluations: usize,
    pub trace: Vec<TracePoint>,
    /// Set for gradient runs only.
    pub breakdown: Option<EvaluationBreakdown>,
    /// Iterations actually performed (gradient runs).
    pub iterations: usize,
}

/// Exhaustive search over `G` powers times every feasible port count;
/// exactly `G (N_max - N_min + 1)` evaluations. Ties keep the smaller port
/// count, then the smaller power.
pub fn grid_search<O: Objective + ?Sized>(objective: &O, space: &SearchSpace, spec: &GridSpec) -> Result<OptResult> {
    space.validate()?;
    spec.validate()?;
    let powers = spec.powers(space);
    let ports: Vec<usize> = (space.ports_min..=space.ports_max).collect();
    objective.prepare(&ports)?;
    let candidates: Vec<(usize, f64)> = ports
        .iter()
        .flat_map(|&n| powers.iter().map(move |&p| (n, p)))
        .collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|&(n, p)| objective.evaluate(n, p))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let trace = candidates
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (&(n, p), &v))| TracePoint {
            iteration: i,
            num_ports: n,
            power: p,
            asc: v,
            probe: ProbeOutcome::None,
        })
        .collect();
    Ok(OptResult {
        best_num_ports: candidates[best].0,
        best_power: candidates[best].1,
        best_asc: values[best],
        objective_evaluations: candidates.len(),
        trace,
        breakdown: None,
        iterations: 0,
    })
}

/// Default starting point: fewest ports, mid-range power.
pub fn default_start(space: &SearchSpace) -> (usize, f64) {
    (space.ports_min, 0.5 * (space.power_min + space.power_max))
}

/// Projected gradient ascent in power with a port-count probe every
/// `probe_interval` iterations. Returns the best point visited.
pub fn gradient_ascent<O: Objective + ?Sized>(
    objective: &O,
    space: &SearchSpace,
    spec: &GradientSpec,
    start: (usize, f64),
) -> Result<OptResult> {
    space.validate()?;
    spec.validate()?;
    let (mut ports, mut power) = start;
    space
        .check(ports, power)
        .map_err(|e| Error::Domain(format!("infeasible starting point: {e}")))?;

    let mut counts = EvaluationBreakdown::default();
    let mut current = objective.evaluate(ports, power)?;
    counts.initial += 1;
    let mut trace = vec![TracePoint {
        iteration: 0,
        num_ports: ports,
        power,
        asc: current,
        probe: ProbeOutcome::None,
    }];
    let mut best = (ports, power, current);
    let mut iterations = 0;

    for t in 1..=spec.max_iters {
        let slope = if spec.analytic_gradient {
            objective
                .power_gradient(ports, power)
                .ok_or_else(|| Error::Domain("objective has no analytic gradient".into()))??
        } else {
            let lo = space.clip_power(power - spec.fd_step);
            let hi = space.clip_power(power + spec.fd_step);
            let f_hi = objective.evaluate(ports, hi)?;
            let f_lo = objective.evaluate(ports, lo)?;
            counts.gradient += 2;
            (f_hi - f_lo) / (hi - lo)
        };
        if slope.abs() < spec.grad_tolerance {
            debug!("gradient ascent stopped at iteration {t}: |g| = {:e}", slope.abs());
            break;
        }
        iterations = t;
        power = space.clip_power(power + spec.learning_rate * slope);
        current = objective.evaluate(ports, power)?;
        counts.tracking += 1;

        let mut probe = ProbeOutcome::None;
        if t % spec.probe_interval == 0 {
            if ports < space.ports_max {
                let up = objective.evaluate(ports + 1, power)?;
                counts.probe += 1;
                if up > current {
                    ports += 1;
                    current = up;
                    probe = ProbeOutcome::Accepted;
                } else {
                    probe = ProbeOutcome::Rejected;
                }
            }
            if spec.symmetric_probe && probe != ProbeOutcome::Accepted && ports > space.ports_min {
                let down = objective.evaluate(ports - 1, power)?;
                counts.probe += 1;
                if down > current {
                    ports -= 1;
                    current = down;
                    probe = ProbeOutcome::Accepted;
                } else {
                    probe = ProbeOutcome::Rejected;
                }
            }
        }
        trace.push(TracePoint {
            iteration: t,
            num_ports: ports,
            power,
            asc: current,
            probe,
        });
        if current > best.2 {
            best = (ports, power, current);
        }
    }

    Ok(OptResult {
        best_num_ports: best.0,
        best_power: best.1,
        best_asc: best.2,
        objective_evaluations: counts.total(),
        trace,
        breakdown: Some(counts),
        iterations,
    })
}
