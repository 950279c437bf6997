//! Run configuration: a sectioned `key = value` file (TOML syntax), with
//! every key optional and command-line overrides applied on top.

use std::path::Path;

use fluidsec::optimize::{Constraints, GradientSpec, GridSpec};
use fluidsec::secrecy::QuadratureSettings;
use fluidsec::stats::OuterIntegral;
use fluidsec::vbcm::{BlockPolicy, FitMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable holding the default Monte Carlo seed.
pub const SEED_ENV: &str = "FAS_SEED";

const ECHO_BEGIN: &str = "--- config ---";
const ECHO_END: &str = "--- end config ---";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub quadrature: Quadrature,
    pub mc: MonteCarlo,
    pub optimize: Optimize,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n_alice: usize,
    pub n_eve: usize,
    pub aperture_alice: f64,
    pub aperture_eve: f64,
    pub eta_alice: f64,
    pub eta_eve: f64,
    pub noise_alice: f64,
    pub noise_eve: f64,
    pub secrecy_rate: f64,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub snr_db_step: f64,
    /// `least_squares` or `as_printed`.
    pub fit_mode: String,
    /// `auto`, `auto:<max>` or a block count.
    pub blocks: String,
    /// Fixed correlation for the constant baseline instead of the fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_fixed: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n_alice: 20,
            n_eve: 20,
            aperture_alice: 4.0,
            aperture_eve: 4.0,
            eta_alice: 1.0,
            eta_eve: 0.5,
            noise_alice: 1.0,
            noise_eve: 1.0,
            secrecy_rate: 0.5,
            snr_db_min: 0.0,
            snr_db_max: 20.0,
            snr_db_step: 2.0,
            fit_mode: "least_squares".into(),
            blocks: "auto".into(),
            rho_fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    pub range_multiplier: f64,
    pub outer_order: usize,
    pub inner_order: usize,
    pub sop_order: usize,
    pub outer_nodes: usize,
    pub tail_mass: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        let q = QuadratureSettings::default();
        let o = OuterIntegral::default();
        Quadrature {
            range_multiplier: q.range_multiplier,
            outer_order: q.outer_order,
            inner_order: q.inner_order,
            sop_order: q.sop_order,
            outer_nodes: o.nodes,
            tail_mass: o.tail_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub chunk_size: usize,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo {
            samples: 50_000,
            seed: default_seed(),
            chunk_size: 4096,
        }
    }
}

fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Optimize {
    /// `gs` (grid search) or `gd` (gradient ascent).
    pub algo: String,
    pub grid: usize,
    pub learning_rate: f64,
    pub iters: usize,
    pub fd_step: f64,
    pub probe_interval: usize,
    pub grad_tolerance: f64,
    pub analytic_gradient: bool,
    pub symmetric_probe: bool,
    pub power_min: f64,
    pub power_max: f64,
    pub ports_min: usize,
    pub ports_max: usize,
    pub total_port_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_ports: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_power: Option<f64>,
}

impl Default for Optimize {
    fn default() -> Self {
        let g = GradientSpec::default();
        Optimize {
            algo: "gs".into(),
            grid: 30,
            learning_rate: g.learning_rate,
            iters: g.max_iters,
            fd_step: g.fd_step,
            probe_interval: g.probe_interval,
            grad_tolerance: g.grad_tolerance,
            analytic_gradient: g.analytic_gradient,
            symmetric_probe: g.symmetric_probe,
            power_min: 0.1,
            power_max: 20.0,
            ports_min: 5,
            ports_max: 30,
            total_port_cap: 40,
            init_ports: None,
            init_power: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Main CSV destination; standard output when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Optimizer trace CSV destination.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    /// Grid size for amplitude distribution dumps.
    pub dist_points: usize,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            path: None,
            trace: None,
            dist_points: 200,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies `section.key=value`; the value is read as a TOML literal,
    /// falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::Config(format!("override key '{path}' is not section.key")))?;
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Table::try_from(&*self).expect("configuration serializes");
        let table = root
            .get_mut(section)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| CliError::Config(format!("unknown section '{section}'")))?;
        table.insert(key.to_string(), value);
        let updated: RunConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("override '{assignment}': {e}")))?;
        *self = updated;
        Ok(())
    }

    /// `#`-prefixed lines written at the top of every CSV.
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![ECHO_BEGIN.to_string()];
        lines.extend(self.to_text().lines().filter(|l| !l.is_empty()).map(str::to_string));
        lines.push(ECHO_END.to_string());
        lines
    }

    /// Recovers the configuration from the comment lines of a CSV.
    pub fn from_echo(comments: &[String]) -> Result<Self, CliError> {
        let start = comments
            .iter()
            .position(|c| c.trim() == ECHO_BEGIN)
            .ok_or_else(|| CliError::Config("no configuration echo found".into()))?;
        let end = comments[start..]
            .iter()
            .position(|c| c.trim() == ECHO_END)
            .ok_or_else(|| CliError::Config("unterminated configuration echo".into()))?;
        Self::parse(&comments[start + 1..start + end].join("\n"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.fit_mode()?;
        self.block_policy()?;
        let s = &self.scenario;
        if s.n_alice < 2 || s.n_eve < 2 {
            return bad(format!("port counts must be at least 2, got {} and {}", s.n_alice, s.n_eve));
        }
        for (name, v) in [
            ("scenario.aperture_alice", s.aperture_alice),
            ("scenario.aperture_eve", s.aperture_eve),
            ("scenario.eta_alice", s.eta_alice),
            ("scenario.eta_eve", s.eta_eve),
            ("scenario.noise_alice", s.noise_alice),
            ("scenario.noise_eve", s.noise_eve),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(s.secrecy_rate >= 0.0) {
            return bad(format!("scenario.secrecy_rate must be non-negative, got {}", s.secrecy_rate));
        }
        if !(s.snr_db_step > 0.0 && s.snr_db_min <= s.snr_db_max) {
            return bad("SNR grid needs snr_db_min <= snr_db_max and a positive step".into());
        }
        if let Some(r) = s.rho_fixed {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("scenario.rho_fixed must lie in [0, 1], got {r}"));
            }
        }
        self.quadrature_settings().validate().map_err(CliError::from_config)?;
        let q = &self.quadrature;
        if q.outer_nodes < 2 || !(q.tail_mass > 0.0 && q.tail_mass < 1.0) {
            return bad("quadrature.outer_nodes must be >= 2 and tail_mass in (0, 1)".into());
        }
        if self.mc.samples < fluidsec::montecarlo::MIN_SAMPLES || self.mc.chunk_size == 0 {
            return bad(format!(
                "mc.samples must be at least {} and chunk_size positive",
                fluidsec::montecarlo::MIN_SAMPLES
            ));
        }
        let o = &self.optimize;
        if o.algo != "gs" && o.algo != "gd" {
            return bad(format!("optimize.algo must be 'gs' or 'gd', got '{}'", o.algo));
        }
        GridSpec { resolution: o.grid }.validate().map_err(CliError::from_config)?;
        self.gradient_spec().validate().map_err(CliError::from_config)?;
        if !(o.power_min > 0.0 && o.power_min < o.power_max) {
            return bad(format!("optimize needs 0 < power_min < power_max, got [{}, {}]", o.power_min, o.power_max));
        }
        if o.ports_min < 2 || o.ports_min > o.ports_max {
            return bad(format!("optimize needs 2 <= ports_min <= ports_max, got [{}, {}]", o.ports_min, o.ports_max));
        }
        if self.output.dist_points < 2 {
            return bad("output.dist_points must be at least 2".into());
        }
        Ok(())
    }

    pub fn fit_mode(&self) -> Result<FitMode, CliError> {
        self.scenario.fit_mode.parse().map_err(CliError::from_config)
    }

    pub fn block_policy(&self) -> Result<BlockPolicy, CliError> {
        self.scenario.blocks.parse().map_err(CliError::from_config)
    }

    pub fn quadrature_settings(&self) -> QuadratureSettings {
        QuadratureSettings {
            range_multiplier: self.quadrature.range_multiplier,
            outer_order: self.quadrature.outer_order,
            inner_order: self.quadrature.inner_order,
            sop_order: self.quadrature.sop_order,
        }
    }

    pub fn outer_integral(&self) -> OuterIntegral {
        OuterIntegral {
            nodes: self.quadrature.outer_nodes,
            tail_mass: self.quadrature.tail_mass,
        }
    }

    pub fn gradient_spec(&self) -> GradientSpec {
        let o = &self.optimize;
        GradientSpec {
            learning_rate: o.learning_rate,
            max_iters: o.iters,
            fd_step: o.fd_step,
            probe_interval: o.probe_interval,
            grad_tolerance: o.grad_tolerance,
            symmetric_probe: o.symmetric_probe,
            analytic_gradient: o.analytic_gradient,
        }
    }

    pub fn constraints(&self) -> Constraints {
        let o = &self.optimize;
        Constraints {
            power_min: o.power_min,
            power_max: o.power_max,
            ports_min: o.ports_min,
            ports_max: o.ports_max,
            total_port_cap: o.total_port_cap,
        }
    }

    /// Inclusive SNR grid in dB.
    pub fn snr_grid(&self) -> Vec<f64> {
        let s = &self.scenario;
        let count = ((s.snr_db_max - s.snr_db_min) / s.snr_db_step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| s.snr_db_min + i as f64 * s.snr_db_step).collect()
    }

    /// Transmit power giving `snr_db` at Alice: `P = sigma_A^2 10^(snr/10)`.
    pub fn power_at(&self, snr_db: f64) -> f64 {
        self.scenario.noise_alice * 10f64.powf(snr_db / 10.0)
    }
}
