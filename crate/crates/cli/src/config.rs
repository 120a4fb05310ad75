//! Run configuration: a TOML file with `[geometry]`, `[acquisition]`,
//! `[sequence]`, `[walk]` and `[fit]` sections, in laboratory units
//! (μm, ms, G/cm). [`RunConfig::resolve`] converts everything to SI.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sdr_core::montecarlo::WalkSpec;
use sdr_core::{
    correlation_time, AcquisitionParams, Geometry, GeometryKind, PulseSequence, SpectrumMode, GAMMA_PROTON,
};
use serde::{Deserialize, Serialize};

const UM: f64 = 1e-6;
const MS: f64 = 1e-3;
/// 1 μm²/ms in m²/s
const UM2_PER_MS: f64 = 1e-9;
/// 1 G/cm in T/m
const G_PER_CM: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub sequence: SequenceSection,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// free, slab, cylinder or sphere
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_um: Option<f64>,
    #[serde(default = "default_d0")]
    pub d0_um2_per_ms: f64,
}

fn default_d0() -> f64 {
    2.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    #[serde(default)]
    pub gradient_g_per_cm: f64,
    /// rad/(s·T); defaults to ¹H
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Optional uniform `exp(-TE/T2)` applied to predictions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_ms: Option<f64>,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            gradient_g_per_cm: 0.0,
            gamma: None,
            t2_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    /// sdr, cpmg or hahn
    #[serde(default = "default_sequence_kind")]
    pub kind: String,
    #[serde(default = "default_n_pulses")]
    pub n_pulses: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub te_ms: Option<f64>,
    /// Explicit SDR x delays; otherwise `x_points` log-spaced up to `TE/N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ms: Option<Vec<f64>>,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    /// Echo times for Hahn/CPMG decay curves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub te_list_ms: Option<Vec<f64>>,
}

fn default_sequence_kind() -> String {
    "sdr".into()
}

fn default_n_pulses() -> usize {
    8
}

fn default_x_points() -> usize {
    50
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            kind: default_sequence_kind(),
            n_pulses: default_n_pulses(),
            te_ms: None,
            x_ms: None,
            x_points: default_x_points(),
            te_list_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    /// Defaults to the largest step the geometry allows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ms: Option<f64>,
    #[serde(default = "default_walkers")]
    pub n_walkers: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the longest echo time (simulate) or 30 τ_c (msd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
    /// Number of MSD sample times.
    #[serde(default = "default_msd_points")]
    pub msd_points: usize,
}

fn default_walkers() -> usize {
    10_000
}

fn default_msd_points() -> usize {
    60
}

impl Default for WalkSection {
    fn default() -> Self {
        Self {
            dt_ms: None,
            n_walkers: default_walkers(),
            seed: 0,
            duration_ms: None,
            msd_points: default_msd_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Forward model for predict and fit: `single` or `multi:<K>`.
    #[serde(default = "default_spectrum_mode")]
    pub spectrum_mode: String,
    #[serde(default = "default_d_min")]
    pub d_min_um: f64,
    #[serde(default = "default_d_max")]
    pub d_max_um: f64,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    #[serde(default)]
    pub fit_d0: bool,
    /// Divide the data by its first point before fitting.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_spectrum_mode() -> String {
    "single".into()
}

fn default_d_min() -> f64 {
    0.1
}

fn default_d_max() -> f64 {
    100.0
}

fn default_starts() -> usize {
    8
}

fn default_true() -> bool {
    true
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            spectrum_mode: default_spectrum_mode(),
            d_min_um: default_d_min(),
            d_max_um: default_d_max(),
            n_starts: default_starts(),
            fit_d0: false,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Sdr,
    Cpmg,
    Hahn,
}

/// Everything a command needs, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub geometry: Geometry,
    pub acq: AcquisitionParams,
    pub spectrum_mode: SpectrumMode,
    pub sequence_kind: SequenceKind,
    pub n_pulses: usize,
    pub te: Option<f64>,
    pub t2: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let kind: GeometryKind = self.geometry.kind.parse().context("geometry.kind")?;
        let d0 = self.geometry.d0_um2_per_ms * UM2_PER_MS;
        let size = match (kind, self.geometry.diameter_um) {
            (GeometryKind::Free, _) => self.geometry.diameter_um.unwrap_or(0.0) * UM,
            (_, Some(d)) if d > 0.0 => d * UM,
            (_, Some(d)) => bail!("geometry.diameter_um must be positive, got {d}"),
            (_, None) => bail!("geometry.diameter_um is required for a {kind} geometry"),
        };
        let geometry = Geometry::new(kind, size, d0).context("geometry")?;
        let gamma = self.acquisition.gamma.unwrap_or(GAMMA_PROTON);
        let acq =
            AcquisitionParams::new(gamma, self.acquisition.gradient_g_per_cm * G_PER_CM).context("acquisition")?;
        let spectrum_mode: SpectrumMode = self.fit.spectrum_mode.parse().context("fit.spectrum_mode")?;
        let sequence_kind = match self.sequence.kind.as_str() {
            "sdr" => SequenceKind::Sdr,
            "cpmg" => SequenceKind::Cpmg,
            "hahn" => SequenceKind::Hahn,
            other => bail!("sequence.kind must be sdr, cpmg or hahn, got {other:?}"),
        };
        if self.sequence.n_pulses == 0 {
            bail!("sequence.n_pulses must be at least 1");
        }
        let te = self.sequence.te_ms.map(|t| t * MS);
        if let Some(t) = te {
            if !(t > 0.0 && t.is_finite()) {
                bail!("sequence.te_ms must be positive");
            }
        }
        let t2 = self.acquisition.t2_ms.map(|t| t * MS);
        if t2.is_some_and(|t| t.is_nan() || t <= 0.0) {
            bail!("acquisition.t2_ms must be positive");
        }
        Ok(Resolved {
            geometry,
            acq,
            spectrum_mode,
            sequence_kind,
            n_pulses: self.sequence.n_pulses,
            te,
            t2,
        })
    }

    pub fn require_te(&self) -> Result<f64> {
        self.resolve()?.te.context("sequence.te_ms is required")
    }

    /// SDR x delays in seconds: explicit list or a log grid ending at `TE/N`.
    pub fn x_grid(&self) -> Result<Vec<f64>> {
        let te = self.require_te()?;
        let n = self.sequence.n_pulses;
        if n < 2 {
            bail!("an SDR scan needs sequence.n_pulses >= 2");
        }
        let xs: Vec<f64> = match &self.sequence.x_ms {
            Some(list) => list.iter().map(|x| x * MS).collect(),
            None => {
                let points = self.sequence.x_points;
                if points < 2 {
                    bail!("sequence.x_points must be at least 2");
                }
                let hi = te / n as f64;
                let lo = hi * 1e-3;
                (0..points)
                    .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
                    .map(|x| x.min(hi))
                    .collect()
            }
        };
        sdr_core::decay::validate_scan(n, te, &xs).context("sequence.x_ms")?;
        Ok(xs)
    }

    /// Sequences for `simulate`: an SDR scan or a Hahn/CPMG echo-time sweep,
    /// each paired with its abscissa.
    pub fn sequences(&self) -> Result<(Vec<f64>, Vec<PulseSequence>)> {
        let r = self.resolve()?;
        match r.sequence_kind {
            SequenceKind::Sdr => {
                let te = self.require_te()?;
                let xs = self.x_grid()?;
                let seqs = xs
                    .iter()
                    .map(|&x| PulseSequence::sdr(r.n_pulses, x, te))
                    .collect::<sdr_core::Result<_>>()?;
                Ok((xs, seqs))
            }
            SequenceKind::Cpmg | SequenceKind::Hahn => {
                let tes: Vec<f64> = match (&self.sequence.te_list_ms, r.te) {
                    (Some(list), _) => list.iter().map(|t| t * MS).collect(),
                    (None, Some(te)) => vec![te],
                    (None, None) => bail!("sequence.te_list_ms or sequence.te_ms is required"),
                };
                let seqs = tes
                    .iter()
                    .map(|&te| match r.sequence_kind {
                        SequenceKind::Hahn => PulseSequence::hahn(te),
                        _ => PulseSequence::cpmg(r.n_pulses, te),
                    })
                    .collect::<sdr_core::Result<_>>()
                    .context("sequence.te_list_ms")?;
                Ok((tes, seqs))
            }
        }
    }

    /// Walk parameters; `duration` is used when `walk.duration_ms` is absent.
    pub fn walk_spec(&self, duration: f64) -> Result<WalkSpec> {
        let r = self.resolve()?;
        let dt = match self.walk.dt_ms {
            Some(dt) => dt * MS,
            None => match WalkSpec::max_dt(&r.geometry) {
                Some(limit) => limit,
                None => duration / 1000.0,
            },
        };
        let duration = self.walk.duration_ms.map_or(duration, |d| d * MS);
        let spec = WalkSpec {
            geometry: r.geometry,
            dt,
            n_walkers: self.walk.n_walkers,
            seed: self.walk.seed,
            duration,
        };
        spec.validate().context("walk")?;
        Ok(spec)
    }

    pub fn default_msd_duration(&self) -> Result<f64> {
        let r = self.resolve()?;
        match correlation_time(&r.geometry) {
            Ok(tau) => Ok(30.0 * tau),
            Err(_) => self
                .walk
                .duration_ms
                .map(|d| d * MS)
                .context("walk.duration_ms is required for free diffusion"),
        }
    }
}
