use std::path::Path;
use std::sync::Arc;

use fluidsec::channel::{build_covariance, coloring_factor, eigen_spectrum, Covariance, FasGeometry, Spectrum};
use fluidsec::montecarlo::{asc_from_samples, max_amplitude_samples, sop_from_samples, McSettings, Stream};
use fluidsec::optimize::{
    default_start, gradient_ascent, grid_search, AscObjective, GridSpec, OptEnvironment, OptResult, ProbeOutcome,
};
use fluidsec::secrecy::{AscKernel, SopKernel};
use fluidsec::stats::AmplitudeDistribution;
use fluidsec::vbcm::{constant_correlation_fit, shared_rho_refit, BlockPartition};
use log::info;

use crate::table::{format_number, Cell, Table};
use crate::{header, CliError, Metric, RunConfig};

/// Fitted block model and the two baselines for one user.
pub struct Models {
    pub geometry: FasGeometry,
    pub vbcm: BlockPartition,
    pub single_rho: BlockPartition,
    pub constant: BlockPartition,
}

impl Models {
    pub fn from_spectrum(cfg: &RunConfig, geometry: FasGeometry, spectrum: &Spectrum) -> Result<Self, CliError> {
        let vbcm = cfg.block_policy()?.fit(spectrum, cfg.fit_mode()?)?;
        Ok(Models {
            geometry,
            single_rho: shared_rho_refit(&vbcm),
            constant: constant_correlation_fit(spectrum, cfg.scenario.rho_fixed)?,
            vbcm,
        })
    }

    pub fn new(cfg: &RunConfig, geometry: FasGeometry) -> Result<Self, CliError> {
        let spectrum = eigen_spectrum(&build_covariance(&geometry))?;
        Self::from_spectrum(cfg, geometry, &spectrum)
    }

    pub fn distribution(&self, cfg: &RunConfig, partition: &BlockPartition) -> Result<Arc<AmplitudeDistribution>, CliError> {
        Ok(Arc::new(AmplitudeDistribution::new(partition, cfg.outer_integral())?))
    }
}

pub fn alice_geometry(cfg: &RunConfig) -> Result<FasGeometry, CliError> {
    let s = &cfg.scenario;
    Ok(FasGeometry::new(s.n_alice, s.aperture_alice, s.eta_alice)?)
}

pub fn eve_geometry(cfg: &RunConfig) -> Result<FasGeometry, CliError> {
    let s = &cfg.scenario;
    Ok(FasGeometry::new(s.n_eve, s.aperture_eve, s.eta_eve)?)
}

fn user_geometry(cfg: &RunConfig, eve: bool) -> Result<FasGeometry, CliError> {
    if eve {
        eve_geometry(cfg)
    } else {
        alice_geometry(cfg)
    }
}

pub fn fit(cfg: &RunConfig, eve: bool) -> Result<Table, CliError> {
    let geom = user_geometry(cfg, eve)?;
    let models = Models::new(cfg, geom)?;
    let p = &models.vbcm;
    let mut t = Table::new(&["block", "size", "rho", "dominant", "tail_sum"]);
    t.comments = header("fit", cfg);
    t.note(format!("user={} n={} w={} eta={}", if eve { "eve" } else { "alice" }, geom.num_ports(), geom.aperture(), geom.mean_gain()));
    t.note(format!("blocks={}", p.num_blocks()));
    t.note(format!("distance={}", format_number(p.distance())));
    t.note(format!("assignment_error={}", format_number(p.assignment_error())));
    t.note(format!("evaluations={}", p.evaluations()));
    t.note(format!("distance_single_rho_blocks={}", format_number(models.single_rho.distance())));
    t.note(format!("distance_constant={}", format_number(models.constant.distance())));
    for (i, b) in p.blocks().iter().enumerate() {
        t.push(vec![
            (i + 1).into(),
            b.size().into(),
            b.rho.into(),
            b.dominant.into(),
            b.tail.iter().sum::<f64>().into(),
        ]);
    }
    Ok(t)
}

pub fn spectrum(
    cfg: &RunConfig,
    eve: bool,
    covariance_in: Option<&Path>,
    covariance_out: Option<&Path>,
) -> Result<Table, CliError> {
    let geom = user_geometry(cfg, eve)?;
    let cov = match covariance_in {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Covariance::from_csv(&text)?
        }
        None => build_covariance(&geom),
    };
    if let Some(path) = covariance_out {
        std::fs::write(path, cov.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    // the block fit assumes a valid covariance, so indefinite input is rejected
    coloring_factor(&cov)?;
    let source = eigen_spectrum(&cov)?;
    let models = Models::from_spectrum(cfg, geom, &source)?;
    let mut t = Table::new(&["index", "source", "vbcm", "single_rho_blocks", "constant"]);
    t.comments = header("spectrum", cfg);
    match covariance_in {
        Some(path) => t.note(format!("source={}", path.display())),
        None => t.note(format!("source=jakes n={} w={} eta={}", geom.num_ports(), geom.aperture(), geom.mean_gain())),
    }
    t.note(format!("blocks={}", models.vbcm.num_blocks()));
    t.note(format!("distance_vbcm={}", format_number(models.vbcm.distance())));
    t.note(format!("distance_single_rho_blocks={}", format_number(models.single_rho.distance())));
    t.note(format!("distance_constant={}", format_number(models.constant.distance())));
    let columns = [
        models.vbcm.model_spectrum(),
        models.single_rho.model_spectrum(),
        models.constant.model_spectrum(),
    ];
    for (i, v) in source.eigenvalues().iter().enumerate() {
        let mut row: Vec<Cell> = vec![(i + 1).into(), (*v).into()];
        row.extend(columns.iter().map(|s| Cell::Num(s.eigenvalues()[i])));
        t.push(row);
    }
    Ok(t)
}

pub fn dist(cfg: &RunConfig, eve: bool) -> Result<Table, CliError> {
    let geom = user_geometry(cfg, eve)?;
    let models = Models::new(cfg, geom)?;
    let d = models.distribution(cfg, &models.vbcm)?;
    let top = cfg.quadrature.range_multiplier * geom.mean_gain().sqrt();
    let points = cfg.output.dist_points;
    let mut t = Table::new(&["x", "cdf", "pdf"]);
    t.comments = header("dist", cfg);
    t.note(format!("n={} w={} eta={} blocks={}", geom.num_ports(), geom.aperture(), geom.mean_gain(), models.vbcm.num_blocks()));
    for i in 0..points {
        let x = top * i as f64 / (points - 1) as f64;
        let (c, p) = d.cdf_pdf(x);
        t.push(vec![x.into(), c.into(), p.into()]);
    }
    Ok(t)
}

/// Alice and Eve distributions under the block model and the constant
/// baseline.
struct PairedModels {
    vbcm: (Arc<AmplitudeDistribution>, Arc<AmplitudeDistribution>),
    constant: (Arc<AmplitudeDistribution>, Arc<AmplitudeDistribution>),
}

fn paired_models(cfg: &RunConfig, alice: FasGeometry, eve: FasGeometry) -> Result<PairedModels, CliError> {
    let a = Models::new(cfg, alice)?;
    let e = Models::new(cfg, eve)?;
    Ok(PairedModels {
        vbcm: (a.distribution(cfg, &a.vbcm)?, e.distribution(cfg, &e.vbcm)?),
        constant: (a.distribution(cfg, &a.constant)?, e.distribution(cfg, &e.constant)?),
    })
}

pub fn asc(cfg: &RunConfig) -> Result<Table, CliError> {
    let m = paired_models(cfg, alice_geometry(cfg)?, eve_geometry(cfg)?)?;
    let (na, ne) = (cfg.scenario.noise_alice, cfg.scenario.noise_eve);
    let quad = cfg.quadrature_settings();
    let vbcm = AscKernel::new(&m.vbcm.0, &m.vbcm.1, na, ne, &quad)?;
    let constant = AscKernel::new(&m.constant.0, &m.constant.1, na, ne, &quad)?;
    let mut t = Table::new(&["snr_db", "power", "vbcm", "constant"]);
    t.comments = header("asc", cfg);
    for snr in cfg.snr_grid() {
        let p = cfg.power_at(snr);
        t.push(vec![snr.into(), p.into(), vbcm.asc(p).into(), constant.asc(p).into()]);
    }
    Ok(t)
}

pub fn sop(cfg: &RunConfig) -> Result<Table, CliError> {
    let m = paired_models(cfg, alice_geometry(cfg)?, eve_geometry(cfg)?)?;
    let (na, ne) = (cfg.scenario.noise_alice, cfg.scenario.noise_eve);
    let quad = cfg.quadrature_settings();
    let rate = cfg.scenario.secrecy_rate;
    let vbcm = SopKernel::new(m.vbcm.0.clone(), &m.vbcm.1, na, ne, &quad)?;
    let constant = SopKernel::new(m.constant.0.clone(), &m.constant.1, na, ne, &quad)?;
    let mut t = Table::new(&["snr_db", "power", "vbcm", "constant"]);
    t.comments = header("sop", cfg);
    t.note(format!("secrecy_rate={rate}"));
    for snr in cfg.snr_grid() {
        let p = cfg.power_at(snr);
        t.push(vec![snr.into(), p.into(), vbcm.sop(p, rate).into(), constant.sop(p, rate).into()]);
    }
    Ok(t)
}

pub fn mc_settings(cfg: &RunConfig) -> Result<McSettings, CliError> {
    let s = McSettings {
        num_samples: cfg.mc.samples,
        seed: cfg.mc.seed,
        chunk_size: cfg.mc.chunk_size,
    };
    s.validate()?;
    Ok(s)
}

/// Paired maximum-amplitude draws under the Jakes covariances.
pub fn jakes_samples(alice: &FasGeometry, eve: &FasGeometry, settings: &McSettings) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let fa = coloring_factor(&build_covariance(alice))?;
    let fe = coloring_factor(&build_covariance(eve))?;
    Ok((
        max_amplitude_samples(&fa, Stream::Alice, settings)?,
        max_amplitude_samples(&fe, Stream::Eve, settings)?,
    ))
}

pub fn mc(cfg: &RunConfig, metric: Metric) -> Result<Table, CliError> {
    let settings = mc_settings(cfg)?;
    let (a, e) = jakes_samples(&alice_geometry(cfg)?, &eve_geometry(cfg)?, &settings)?;
    let (na, ne, rate) = (cfg.scenario.noise_alice, cfg.scenario.noise_eve, cfg.scenario.secrecy_rate);
    let mut t = Table::new(&["snr_db", "power", "metric", "mean", "std_error", "ci95_low", "ci95_high", "n", "seed"]);
    t.comments = header("mc", cfg);
    for snr in cfg.snr_grid() {
        let p = cfg.power_at(snr);
        let mut estimates = Vec::new();
        if metric != Metric::Sop {
            estimates.push(("asc", asc_from_samples(&a, &e, p, na, ne)));
        }
        if metric != Metric::Asc {
            estimates.push(("sop", sop_from_samples(&a, &e, p, na, ne, rate)));
        }
        for (name, est) in estimates {
            t.push(vec![
                snr.into(),
                p.into(),
                name.into(),
                est.mean.into(),
                est.std_error.into(),
                est.ci95_low.into(),
                est.ci95_high.into(),
                est.num_samples.into(),
                settings.seed.into(),
            ]);
        }
    }
    Ok(t)
}

pub fn environment(cfg: &RunConfig) -> Result<OptEnvironment, CliError> {
    let s = &cfg.scenario;
    Ok(OptEnvironment {
        eve: eve_geometry(cfg)?,
        alice_aperture: s.aperture_alice,
        alice_gain: s.eta_alice,
        noise_alice: s.noise_alice,
        noise_eve: s.noise_eve,
        quadrature: cfg.quadrature_settings(),
        constraints: cfg.constraints(),
        fit_mode: cfg.fit_mode()?,
        block_policy: cfg.block_policy()?,
    })
}

/// Runs the configured optimizer on `objective`.
pub fn run_optimizer(cfg: &RunConfig, objective: &AscObjective, algo: &str) -> Result<OptResult, CliError> {
    let space = objective.space();
    let o = &cfg.optimize;
    if algo == "gs" {
        return Ok(grid_search(objective, &space, &GridSpec { resolution: o.grid })?);
    }
    let fallback = default_start(&space);
    if o.init_ports.is_none() || o.init_power.is_none() {
        info!("gradient ascent starts from the default ({}, {})", fallback.0, fallback.1);
    }
    let start = (o.init_ports.unwrap_or(fallback.0), o.init_power.unwrap_or(fallback.1));
    Ok(gradient_ascent(objective, &space, &cfg.gradient_spec(), start)?)
}

fn probe_label(p: ProbeOutcome) -> &'static str {
    match p {
        ProbeOutcome::None => "none",
        ProbeOutcome::Rejected => "rejected",
        ProbeOutcome::Accepted => "accepted",
    }
}

/// Result row and trace.
pub fn optimize(cfg: &RunConfig) -> Result<(Table, Table), CliError> {
    let objective = AscObjective::new(environment(cfg)?)?;
    let algo = cfg.optimize.algo.as_str();
    let r = run_optimizer(cfg, &objective, algo)?;
    let space = objective.space();
    let mut t = Table::new(&["algo", "best_num_ports", "best_power", "best_asc", "objective_evaluations", "iterations"]);
    t.comments = header("optimize", cfg);
    t.note(format!(
        "search ports=[{}, {}] power=[{}, {}]",
        space.ports_min, space.ports_max, space.power_min, space.power_max
    ));
    if let Some(b) = r.breakdown {
        t.note(format!(
            "evaluations initial={} gradient={} tracking={} probe={}",
            b.initial, b.gradient, b.tracking, b.probe
        ));
    }
    t.push(vec![
        algo.into(),
        r.best_num_ports.into(),
        r.best_power.into(),
        r.best_asc.into(),
        r.objective_evaluations.into(),
        r.iterations.into(),
    ]);
    let mut trace = Table::new(&["iteration", "num_ports", "power", "asc", "probe"]);
    trace.comments = header("optimize-trace", cfg);
    for p in &r.trace {
        trace.push(vec![
            p.iteration.into(),
            p.num_ports.into(),
            p.power.into(),
            p.asc.into(),
            probe_label(p.probe).into(),
        ]);
    }
    Ok((t, trace))
}
