//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export takes laboratory units (μm, μm²/ms, G/cm, ms) and returns a
//! flat `Float64Array` of equal-length columns laid end to end.

// Flat scalar arguments keep the JS call sites simple.
#![allow(clippy::too_many_arguments)]

use sdr_core::decay::sdr_decay;
use sdr_core::filters::sdr_filter_squared;
use sdr_core::{
    build_spectrum, sdr_scan, variance_exact, AcquisitionParams, Geometry, GeometryKind, NoiseSpectrum, PulseSequence,
    SpectrumMode, GAMMA_PROTON,
};
use wasm_bindgen::prelude::*;

fn spectrum(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    gradient_g_per_cm: f64,
    modes: u32,
) -> Result<NoiseSpectrum, String> {
    let kind: GeometryKind = kind.parse().map_err(|e: sdr_core::Error| e.to_string())?;
    let geom = Geometry::new(kind, diameter_um * 1e-6, d0_um2_per_ms * 1e-9).map_err(|e| e.to_string())?;
    let acq = AcquisitionParams::new(GAMMA_PROTON, gradient_g_per_cm * 1e-2).map_err(|e| e.to_string())?;
    let mode = if modes <= 1 {
        SpectrumMode::Single
    } else {
        SpectrumMode::Multi(modes as usize)
    };
    build_spectrum(&geom, &acq, mode).map_err(|e| e.to_string())
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1).max(1) as f64))
        .collect()
}

/// SDR scan: `[x_ms; points] ++ [M_SDR; points] ++ [M_cpmg_block; points] ++ [M_hahn_block; points] ++ [M_cross; points]`.
pub fn sdr_curve_columns(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    gradient_g_per_cm: f64,
    te_ms: f64,
    n_pulses: u32,
    points: u32,
    modes: u32,
) -> Result<Vec<f64>, String> {
    let spec = spectrum(kind, diameter_um, d0_um2_per_ms, gradient_g_per_cm, modes)?;
    let te = te_ms * 1e-3;
    let n = n_pulses.max(2) as usize;
    let xs = log_grid(te / n as f64 * 1e-3, te / n as f64, points.max(2) as usize);
    let total = sdr_scan(n, te, &spec, &xs).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = xs.iter().map(|x| x * 1e3).collect();
    out.extend(total.iter().map(|r| r.magnetization));
    let parts = xs
        .iter()
        .map(|&x| PulseSequence::sdr(n, x, te).and_then(|s| sdr_decay(&s, &spec)))
        .collect::<sdr_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    out.extend(parts.iter().map(|p| p.cpmg_factor()));
    out.extend(parts.iter().map(|p| p.hahn_factor()));
    out.extend(parts.iter().map(|p| p.cross_factor()));
    Ok(out)
}

/// Filter functions of one SDR sequence against ω:
/// `[ω; points] ++ [|F|²; points] ++ [|F_CPMG|²; points] ++ [|F_Hahn|²; points] ++ [cross; points] ++ [S(ω)/S(0); points]`.
pub fn filter_columns(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    n_pulses: u32,
    x_ms: f64,
    te_ms: f64,
    points: u32,
) -> Result<Vec<f64>, String> {
    let te = te_ms * 1e-3;
    let n = n_pulses.max(2) as usize;
    let seq = PulseSequence::sdr(n, x_ms * 1e-3, te).map_err(|e| e.to_string())?;
    let spec = spectrum(kind, diameter_um, d0_um2_per_ms, 1.0, 1)?;
    let points = points.max(2) as usize;
    let omega_max = 4.0 * std::f64::consts::PI * n as f64 / te;
    let ws: Vec<f64> = (0..points)
        .map(|i| omega_max * i as f64 / (points - 1) as f64)
        .collect();
    let parts = ws
        .iter()
        .map(|&w| sdr_filter_squared(&seq, w))
        .collect::<sdr_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let s0 = spec.s_of_omega(0.0);
    let mut out = ws.clone();
    out.extend(parts.iter().map(|p| p.total()));
    out.extend(parts.iter().map(|p| p.cpmg));
    out.extend(parts.iter().map(|p| p.hahn));
    out.extend(parts.iter().map(|p| p.cross));
    out.extend(ws.iter().map(|&w| spec.s_of_omega(w) / s0));
    Ok(out)
}

/// Hahn and CPMG decays against echo time: `[TE_ms; points] ++ [M_Hahn; points] ++ [M_CPMG; points]`.
pub fn echo_columns(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    gradient_g_per_cm: f64,
    n_pulses: u32,
    te_max_ms: f64,
    points: u32,
    modes: u32,
) -> Result<Vec<f64>, String> {
    let spec = spectrum(kind, diameter_um, d0_um2_per_ms, gradient_g_per_cm, modes)?;
    let points = points.max(2) as usize;
    let tes: Vec<f64> = (1..=points)
        .map(|i| te_max_ms * 1e-3 * i as f64 / points as f64)
        .collect();
    let mut out: Vec<f64> = tes.iter().map(|t| t * 1e3).collect();
    for build in [
        &(|te: f64| PulseSequence::hahn(te)) as &dyn Fn(f64) -> sdr_core::Result<PulseSequence>,
        &|te: f64| PulseSequence::cpmg(n_pulses.max(1) as usize, te),
    ] {
        for &te in &tes {
            let seq = build(te).map_err(|e| e.to_string())?;
            out.push(variance_exact(&seq, &spec).magnetization);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn sdr_curve(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    gradient_g_per_cm: f64,
    te_ms: f64,
    n_pulses: u32,
    points: u32,
    modes: u32,
) -> Result<Vec<f64>, JsValue> {
    sdr_curve_columns(
        kind,
        diameter_um,
        d0_um2_per_ms,
        gradient_g_per_cm,
        te_ms,
        n_pulses,
        points,
        modes,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn filter_function(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    n_pulses: u32,
    x_ms: f64,
    te_ms: f64,
    points: u32,
) -> Result<Vec<f64>, JsValue> {
    filter_columns(kind, diameter_um, d0_um2_per_ms, n_pulses, x_ms, te_ms, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn echo_decays(
    kind: &str,
    diameter_um: f64,
    d0_um2_per_ms: f64,
    gradient_g_per_cm: f64,
    n_pulses: u32,
    te_max_ms: f64,
    points: u32,
    modes: u32,
) -> Result<Vec<f64>, JsValue> {
    echo_columns(
        kind,
        diameter_um,
        d0_um2_per_ms,
        gradient_g_per_cm,
        n_pulses,
        te_max_ms,
        points,
        modes,
    )
    .map_err(|e| JsValue::from_str(&e))
}
