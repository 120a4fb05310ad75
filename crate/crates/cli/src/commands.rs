//! The five subcommands. Each writes an SI CSV (or JSON report) plus a
//! metadata sidecar and returns what it wrote.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sdr_core::decay::DecayResult;
use sdr_core::estimation::{fit_diameter, normalize_first_point, DecayCurve, FitOptions, FitResult};
use sdr_core::montecarlo::{simulate_decay_batch, simulate_msd};
use sdr_core::{
    build_spectrum, correlation_time, restriction_length, sdr_scan, variance_exact, NoiseSpectrum, PulseSequence,
};
use serde::Serialize;

use crate::config::{Resolved, RunConfig, SequenceKind};
use crate::io::{read_scan, write_columns, write_sidecar};

const UM: f64 = 1e-6;
const SPECTRUM_POINTS: usize = 200;

/// Runs `f` on a pool of `workers` threads, or the global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

fn spectrum_for(r: &Resolved) -> Result<NoiseSpectrum> {
    build_spectrum(&r.geometry, &r.acq, r.spectrum_mode).context("noise spectrum")
}

fn derived(r: &Resolved) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("diameter_m".into(), r.geometry.size_d);
    m.insert("d0_m2_per_s".into(), r.geometry.d0);
    m.insert("gamma_rad_per_s_t".into(), r.acq.gamma);
    m.insert("gradient_t_per_m".into(), r.acq.gradient);
    if let Ok(tau) = correlation_time(&r.geometry) {
        m.insert("tau_c_s".into(), tau);
        m.insert("l_c_m".into(), restriction_length(tau, r.geometry.d0));
    }
    if let Some(te) = r.te {
        m.insert("te_s".into(), te);
    }
    m
}

fn apply_t2(result: DecayResult, total_time: f64, t2: Option<f64>) -> f64 {
    match t2 {
        Some(t2) => result.with_t2(total_time, t2).magnetization,
        None => result.magnetization,
    }
}

/// A two-or-three column curve as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

/// Gaussian-phase prediction: an SDR scan, or a Hahn/CPMG echo-time sweep.
pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> Result<Curve> {
    let r = cfg.resolve()?;
    let mut extra = derived(&r);
    let (header, curve) = if r.acq.gradient == 0.0 {
        let (x, seqs) = cfg.sequences()?;
        let y = seqs
            .iter()
            .map(|s| apply_t2(DecayResult::from_variance(0.0), s.total_time(), r.t2))
            .collect();
        (abscissa_header(r.sequence_kind), Curve { x, y, stderr: None })
    } else {
        let spec = spectrum_for(&r)?;
        extra.insert("delta_omega_sq_rad2_per_s2".into(), spec.delta_omega_sq());
        match r.sequence_kind {
            SequenceKind::Sdr => {
                let te = cfg.require_te()?;
                let x = cfg.x_grid()?;
                let y = sdr_scan(r.n_pulses, te, &spec, &x)?
                    .into_iter()
                    .map(|d| apply_t2(d, te, r.t2))
                    .collect();
                ("x_delay_s", Curve { x, y, stderr: None })
            }
            _ => {
                let (x, seqs) = cfg.sequences()?;
                let y = seqs
                    .iter()
                    .map(|s| apply_t2(variance_exact(s, &spec), s.total_time(), r.t2))
                    .collect();
                ("te_s", Curve { x, y, stderr: None })
            }
        }
    };
    write_columns(out, &[header, "magnetization"], &[&curve.x, &curve.y])?;
    write_sidecar(out, "predict", cfg, &extra)?;
    Ok(curve)
}

fn abscissa_header(kind: SequenceKind) -> &'static str {
    match kind {
        SequenceKind::Sdr => "x_delay_s",
        _ => "te_s",
    }
}

/// Single CPMG point `M(N, TE)` with the configured forward model.
pub fn predict_cpmg(cfg: &RunConfig) -> Result<f64> {
    let r = cfg.resolve()?;
    let te = cfg.require_te()?;
    let seq = PulseSequence::cpmg(r.n_pulses, te)?;
    if r.acq.gradient == 0.0 {
        return Ok(apply_t2(DecayResult::from_variance(0.0), te, r.t2));
    }
    Ok(apply_t2(variance_exact(&seq, &spectrum_for(&r)?), te, r.t2))
}

/// Monte Carlo ensemble signal for the configured sequences.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Curve> {
    let r = cfg.resolve()?;
    let (x, seqs) = cfg.sequences()?;
    let longest = seqs.iter().map(|s| s.total_time()).fold(0.0, f64::max);
    let spec = cfg.walk_spec(longest)?;
    let pts = simulate_decay_batch(&spec, &seqs, r.acq.gamma, &[r.acq.gradient])?;
    let y: Vec<f64> = pts[0].iter().map(|p| p.magnetization).collect();
    let e: Vec<f64> = pts[0].iter().map(|p| p.stderr).collect();
    write_columns(
        out,
        &[abscissa_header(r.sequence_kind), "magnetization", "stderr"],
        &[&x, &y, &e],
    )?;
    let mut extra = derived(&r);
    extra.insert("dt_s".into(), spec.dt);
    extra.insert("duration_s".into(), spec.duration);
    write_sidecar(out, "simulate", cfg, &extra)?;
    Ok(Curve { x, y, stderr: Some(e) })
}

/// Monte Carlo mean-square displacement along the gradient axis.
pub fn cmd_msd(cfg: &RunConfig, out: &Path, normalize: bool) -> Result<Curve> {
    let r = cfg.resolve()?;
    let spec = cfg.walk_spec(cfg.default_msd_duration()?)?;
    let curve = simulate_msd(&spec, cfg.walk.msd_points)?;
    let mut extra = derived(&r);
    extra.insert("dt_s".into(), spec.dt);
    extra.insert("duration_s".into(), spec.duration);
    let (header, err_header, scale) = if normalize {
        let tau = correlation_time(&r.geometry).context("--normalize needs a restricted geometry")?;
        let lc = restriction_length(tau, r.geometry.d0);
        ("msd_over_lc2", "stderr_over_lc2", 1.0 / (lc * lc))
    } else {
        ("msd_m2", "stderr_m2", 1.0)
    };
    let y: Vec<f64> = curve.msd.iter().map(|v| v * scale).collect();
    let e: Vec<f64> = curve.stderr.iter().map(|v| v * scale).collect();
    write_columns(out, &["t_s", header, err_header], &[&curve.times, &y, &e])?;
    write_sidecar(out, "msd", cfg, &extra)?;
    Ok(Curve {
        x: curve.times,
        y,
        stderr: Some(e),
    })
}

/// Unit-area spectral density `S(ω)` from ω = 0 over a log grid spanning the correlation times.
pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<Curve> {
    let r = cfg.resolve()?;
    let spec = spectrum_for(&r)?;
    let lo = 1e-2 / spec.tau_max();
    let hi = 1e2 / spec.tau_min();
    let mut x = vec![0.0];
    x.extend((0..SPECTRUM_POINTS).map(|i| lo * (hi / lo).powf(i as f64 / (SPECTRUM_POINTS - 1) as f64)));
    let y: Vec<f64> = x.iter().map(|&w| spec.s_of_omega(w)).collect();
    write_columns(out, &["omega_rad_s", "s_omega_s"], &[&x, &y])?;
    let mut extra = derived(&r);
    extra.insert("delta_omega_sq_rad2_per_s2".into(), spec.delta_omega_sq());
    for (k, c) in spec.components().iter().enumerate() {
        extra.insert(format!("component_{k}_weight"), c.weight);
        extra.insert(format!("component_{k}_tau_s"), c.tau);
    }
    write_sidecar(out, "spectrum", cfg, &extra)?;
    Ok(Curve { x, y, stderr: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub diameter_m: f64,
    pub diameter_um: f64,
    pub amplitude: f64,
    pub d0_m2_per_s: f64,
    pub d0_fitted: bool,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub covariance_diag: Vec<f64>,
    pub spectrum_mode: String,
    pub normalized: bool,
    pub rows_sorted: bool,
    pub x_delay_s: Vec<f64>,
    pub signal: Vec<f64>,
    pub model: Vec<f64>,
}

impl FitReport {
    fn new(fit: FitResult, curve: &DecayCurve, cfg: &RunConfig, rows_sorted: bool) -> Self {
        Self {
            diameter_m: fit.diameter,
            diameter_um: fit.diameter / UM,
            amplitude: fit.amplitude,
            d0_m2_per_s: fit.d0,
            d0_fitted: fit.d0_fitted,
            residual_rms: fit.residual_rms,
            iterations: fit.iterations,
            converged: fit.converged,
            covariance_diag: fit.covariance_diag,
            spectrum_mode: cfg.fit.spectrum_mode.clone(),
            normalized: cfg.fit.normalize,
            rows_sorted,
            x_delay_s: curve.x_values.clone(),
            signal: curve.signal.clone(),
            model: fit.model,
        }
    }
}

/// Fits the diameter to an `x_delay_s,signal` CSV and writes a JSON report.
pub fn cmd_fit(cfg: &RunConfig, data: &Path, out: &Path) -> Result<FitReport> {
    let r = cfg.resolve()?;
    let te = cfg.require_te()?;
    let scan = read_scan(data)?;
    if scan.was_sorted {
        eprintln!(
            "warning: {}: rows were not in increasing x order and have been sorted",
            data.display()
        );
    }
    let mut curve = DecayCurve::new(scan.x_delay, scan.signal, te, r.n_pulses, r.acq)
        .with_context(|| format!("{}", data.display()))?;
    if cfg.fit.normalize {
        curve = normalize_first_point(&curve)?;
    }
    let options = FitOptions {
        spectrum_mode: r.spectrum_mode,
        d_min: cfg.fit.d_min_um * UM,
        d_max: cfg.fit.d_max_um * UM,
        n_starts: cfg.fit.n_starts,
        fit_d0: cfg.fit.fit_d0,
        ..Default::default()
    };
    let fit = fit_diameter(&curve, r.geometry.kind, r.geometry.d0, &options)?;
    let report = FitReport::new(fit, &curve, cfg, scan.was_sorted);
    std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let mut extra = derived(&r);
    extra.insert("fitted_diameter_m".into(), report.diameter_m);
    write_sidecar(out, "fit", cfg, &extra)?;
    Ok(report)
}
