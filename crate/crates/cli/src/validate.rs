//! Fast self-test: numerical contracts the other commands rely on.

use fluidsec::channel::{build_covariance, coloring_factor, eigen_spectrum, FasGeometry, Spectrum};
use fluidsec::montecarlo::{max_amplitude_samples, McSettings, Stream};
use fluidsec::numeric::GaussLegendre;
use fluidsec::optimize::{grid_search, AscObjective, GridSpec, Objective};
use fluidsec::secrecy::{AscKernel, SopKernel};
use fluidsec::specfun::{bessel_j0, marcum_q1};
use fluidsec::stats::block_max_cdf;
use fluidsec::vbcm::{fit_partition, FitMode};

use crate::commands::{environment, Models};
use crate::table::{format_number, Table};
use crate::{header, CliError, RunConfig};

type Check = (&'static str, Result<String, String>);

fn within(name: &'static str, got: f64, want: f64, tol: f64) -> Check {
    let gap = (got - want).abs();
    let detail = format!("got {}, want {}, gap {gap:.2e}, tolerance {tol:.0e}", format_number(got), format_number(want));
    (name, if gap <= tol { Ok(detail) } else { Err(detail) })
}

fn holds(name: &'static str, ok: bool, detail: String) -> Check {
    (name, if ok { Ok(detail) } else { Err(detail) })
}

fn library(name: &'static str, r: fluidsec::Result<Check>) -> Check {
    r.unwrap_or_else(|e| (name, Err(e.to_string())))
}

fn checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut out = vec![
        within("bessel_j0_at_zero", bessel_j0(0.0)?, 1.0, 1e-15),
        within("bessel_j0_first_root", bessel_j0(2.404_825_557_695_773)?, 0.0, 1e-14),
        within("marcum_q1_zero_shift", marcum_q1(0.0, 1.5)?, (-1.125f64).exp(), 1e-12),
        within("block_cdf_independent_ports", block_max_cdf(1.0, 3, 0.0, 1.0)?, (1.0 - (-1.0f64).exp()).powi(3), 1e-12),
    ];

    out.push(library("coloring_reconstructs_jakes", (|| {
        let cov = build_covariance(&FasGeometry::new(12, 3.0, 1.0)?);
        let f = coloring_factor(&cov)?;
        let n = cov.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| f[(i, k)] * f[(j, k)]).sum();
                worst = worst.max((v - cov.get(i, j)).abs());
            }
        }
        Ok(holds("coloring_reconstructs_jakes", worst < 1e-9, format!("max entry gap {worst:.2e}")))
    })()));

    out.push(library("constant_spectrum_recovered", (|| {
        let (n, rho) = (16usize, 0.6);
        let mut values = vec![1.0 - rho; n];
        values[0] = 1.0 + (n as f64 - 1.0) * rho;
        let fit = fit_partition(&Spectrum::new(values, 1.0)?, 1, FitMode::LeastSquares)?;
        let gap = (fit.rhos()[0] - rho).abs();
        Ok(holds(
            "constant_spectrum_recovered",
            gap < 1e-9 && fit.distance() < 1e-12,
            format!("rho gap {gap:.2e}, distance {:.2e}", fit.distance()),
        ))
    })()));

    out.push(library("fit_evaluation_count", (|| {
        let spectrum = eigen_spectrum(&build_covariance(&FasGeometry::new(20, 4.0, 1.0)?))?;
        let fit = fit_partition(&spectrum, 6, FitMode::LeastSquares)?;
        Ok(holds("fit_evaluation_count", fit.evaluations() == 14 * 6, format!("{} evaluations", fit.evaluations())))
    })()));

    let s = &cfg.scenario;
    let alice = Models::new(cfg, FasGeometry::new(s.n_alice, s.aperture_alice, s.eta_alice)?)?;
    let eve = Models::new(cfg, FasGeometry::new(s.n_eve, s.aperture_eve, s.eta_eve)?)?;
    let (da, de) = (alice.distribution(cfg, &alice.vbcm)?, eve.distribution(cfg, &eve.vbcm)?);

    out.push(holds(
        "model_ordering",
        alice.vbcm.distance() <= alice.single_rho.distance() + 1e-12
            && alice.single_rho.distance() <= alice.constant.distance() + 1e-12,
        format!(
            "{:.4e} <= {:.4e} <= {:.4e}",
            alice.vbcm.distance(),
            alice.single_rho.distance(),
            alice.constant.distance()
        ),
    ));

    let top = cfg.quadrature.range_multiplier * s.eta_alice.sqrt();
    let mass = GaussLegendre::new(64).integrate(0.0, top, |x| da.pdf(x));
    out.push(within("amplitude_pdf_normalized", mass, 1.0, 1e-6));

    let quad = cfg.quadrature_settings();
    let asc = AscKernel::new(&da, &de, s.noise_alice, s.noise_eve, &quad)?;
    let p = cfg.power_at(10.0);
    let h = 1e-4 * p;
    let fd = (asc.asc(p + h) - asc.asc(p - h)) / (2.0 * h);
    out.push(within("asc_gradient_matches_differences", asc.gradient(p) / fd, 1.0, 1e-4));

    let sop = SopKernel::new(da.clone(), &de, s.noise_alice, s.noise_eve, &quad)?;
    let powers: Vec<f64> = cfg.snr_grid().into_iter().map(|snr| cfg.power_at(snr)).collect();
    let ascs: Vec<f64> = powers.iter().map(|&p| asc.asc(p)).collect();
    let sops: Vec<f64> = powers.iter().map(|&p| sop.sop(p, s.secrecy_rate)).collect();
    out.push(holds(
        "asc_sop_monotone_in_power",
        ascs.windows(2).all(|w| w[1] >= w[0] - 1e-9)
            && sops.windows(2).all(|w| w[1] <= w[0] + 1e-9)
            && sops.iter().all(|v| (0.0..=1.0).contains(v)),
        format!("{} powers", powers.len()),
    ));

    let settings = McSettings::new(2000, cfg.mc.seed)?;
    let f = coloring_factor(&build_covariance(&FasGeometry::new(8, 2.0, 1.0)?))?;
    let first = max_amplitude_samples(&f, Stream::Alice, &settings)?;
    let again = max_amplitude_samples(&f, Stream::Alice, &McSettings { chunk_size: 300, ..settings })?;
    out.push(holds("monte_carlo_reproducible", first == again, format!("seed {}", settings.seed)));

    let mut small = cfg.clone();
    small.optimize.ports_min = 5;
    small.optimize.ports_max = 7;
    small.scenario.n_eve = 5;
    let objective = AscObjective::new(environment(&small)?)?;
    let space = objective.space();
    let r = grid_search(&objective, &space, &GridSpec { resolution: 4 })?;
    let best = objective.evaluate(r.best_num_ports, r.best_power)?;
    out.push(holds(
        "grid_search_count_and_argmax",
        r.objective_evaluations == 4 * 3 && (best - r.best_asc).abs() < 1e-12 && r.trace.iter().all(|t| t.asc <= r.best_asc),
        format!("{} evaluations, best {:.6} at ({}, {})", r.objective_evaluations, r.best_asc, r.best_num_ports, r.best_power),
    ));
    Ok(out)
}

/// The check table and the number of failures.
pub fn run(cfg: &RunConfig) -> Result<(Table, usize), CliError> {
    let mut t = Table::new(&["check", "status", "detail"]);
    t.comments = header("validate", cfg);
    let mut failures = 0;
    for (name, result) in checks(cfg)? {
        let (status, detail) = match result {
            Ok(d) => ("pass", d),
            Err(d) => {
                failures += 1;
                ("fail", d)
            }
        };
        t.push(vec![name.into(), status.into(), detail.into()]);
    }
    Ok((t, failures))
}
