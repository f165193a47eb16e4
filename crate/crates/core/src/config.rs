//! Run configuration in engineering units, bundled presets and conversion
//! to the model types.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientOptions;
use crate::constellation::{Constellation, Format};
use crate::error::{Error, Result};
use crate::link::{centred_channels, FiberSpan, GainMode, Link, NoiseLoading};
use crate::ssfm::SimConfig;
use crate::units;
use crate::variance::AssemblyOptions;

/// Nonlinear index assumed when only the effective area is given, m²/W.
pub const DEFAULT_N2: f64 = 2.6e-20;

/// `count` identical spans, each closed by an amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanGroup {
    pub count: usize,
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    /// Explicit γ in 1/(W·km); otherwise derived from `n2` and the area.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_per_w_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_area_um2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<f64>,
    pub noise_figure_db: f64,
}

impl SpanGroup {
    fn fiber(&self, wavelength: f64) -> Result<FiberSpan> {
        let gamma = match (self.gamma_per_w_km, self.effective_area_um2) {
            (Some(g), _) => g * 1e-3,
            (None, Some(area)) => units::gamma_from_n2(self.n2.unwrap_or(DEFAULT_N2), wavelength, area),
            (None, None) => return Err(Error::Config("span group needs gamma_per_w_km or effective_area_um2".into())),
        };
        Ok(FiberSpan {
            length: self.length_km * 1e3,
            alpha: units::alpha_from_db_per_km(self.attenuation_db_per_km),
            beta2: units::beta2_from_dispersion(self.dispersion_ps_nm_km, wavelength),
            gamma,
            n_sp: units::nsp_from_noise_figure(self.noise_figure_db),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub spans: Vec<SpanGroup>,
    pub wavelength_nm: f64,
    pub mode: GainMode,
    pub noise_loading: NoiseLoading,
    /// Depletion bandwidth in constant-power mode; defaults to the
    /// occupied channel bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ase_bandwidth_ghz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub symbol_rate_gbd: f64,
    pub spacing_ghz: f64,
    pub channels: usize,
    /// "start:stop:step" in dBm, stop inclusive.
    pub powers_dbm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Relative standard error above which a coefficient is flagged.
    pub stderr_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub link: LinkConfig,
    pub plan: PlanConfig,
    pub format: Format,
    pub mc: McConfig,
    #[serde(default)]
    pub assembly: AssemblyOptions,
    #[serde(default)]
    pub ssfm: SimConfig,
    /// Allowed |analytic − simulated| SNR difference for `compare`, dB.
    #[serde(default = "default_tolerance")]
    pub compare_tolerance_db: f64,
    /// Directory for CSV and manifest output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_tolerance() -> f64 {
    0.75
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.link.spans.iter().all(|g| g.count == 0) {
            return Err(Error::Config("link.spans: no spans".into()));
        }
        if self.plan.channels == 0 {
            return Err(Error::Config("plan.channels must be positive".into()));
        }
        if self.mc.samples == 0 {
            return Err(Error::Config("mc.samples must be positive".into()));
        }
        parse_powers(&self.plan.powers_dbm)?;
        self.format.moments()?;
        self.ssfm.validate()?;
        self.to_link()?.validate()
    }

    pub fn to_link(&self) -> Result<Link> {
        let wavelength = self.link.wavelength_nm * 1e-9;
        let mut spans = Vec::new();
        for g in &self.link.spans {
            let fiber = g.fiber(wavelength)?;
            spans.extend(std::iter::repeat_n(fiber, g.count));
        }
        let symbol_rate = self.plan.symbol_rate_gbd * 1e9;
        let ase_bandwidth =
            self.link.ase_bandwidth_ghz.map_or(self.plan.channels as f64 * symbol_rate, |b| b * 1e9);
        Ok(Link {
            spans,
            symbol_rate,
            channel_spacing: self.plan.spacing_ghz * 1e9,
            channels: centred_channels(self.plan.channels),
            wavelength,
            gain_mode: self.link.mode,
            noise_loading: self.link.noise_loading,
            ase_bandwidth,
        })
    }

    pub fn powers(&self) -> Result<Vec<f64>> {
        parse_powers(&self.plan.powers_dbm)
    }

    pub fn coefficient_options(&self) -> CoefficientOptions {
        let mut o = CoefficientOptions::new(self.mc.samples, self.mc.seed);
        o.ndfwm = self.assembly.ndfwm;
        o
    }

    pub fn preset(name: &str) -> Option<RunConfig> {
        match name {
            "config1" => Some(config1()),
            "config2" => Some(config2()),
            _ => None,
        }
    }

    /// Scaled copy for desk-size simulation: `spans` spans of the first group.
    pub fn with_span_count(mut self, spans: usize) -> RunConfig {
        self.link.spans.truncate(1);
        self.link.spans[0].count = spans;
        self
    }
}

pub const PRESETS: [&str; 2] = ["config1", "config2"];

fn preset(name: &str, span: SpanGroup, format: Constellation, powers: &str) -> RunConfig {
    RunConfig {
        name: name.into(),
        link: LinkConfig {
            spans: vec![span],
            wavelength_nm: 1550.0,
            mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth_ghz: None,
        },
        plan: PlanConfig { symbol_rate_gbd: 49.0, spacing_ghz: 50.0, channels: 1, powers_dbm: powers.into() },
        format: Format::Named(format),
        mc: McConfig { samples: 200_000, seed: 1, stderr_target: 0.02 },
        assembly: AssemblyOptions::default(),
        ssfm: SimConfig::default(),
        compare_tolerance_db: default_tolerance(),
        output_dir: None,
    }
}

/// 40 × 120 km NZDSF, 49 GBd PDM-QPSK on a 50 GHz grid.
pub fn config1() -> RunConfig {
    let span = SpanGroup {
        count: 40,
        length_km: 120.0,
        attenuation_db_per_km: 0.22,
        dispersion_ps_nm_km: 3.8,
        gamma_per_w_km: None,
        effective_area_um2: Some(70.26),
        n2: None,
        noise_figure_db: 5.0,
    };
    preset("config1", span, Constellation::Qpsk, "-6:6:1")
}

/// 20 × 100 km SMF, 49 GBd PDM-16QAM on a 50 GHz grid.
pub fn config2() -> RunConfig {
    let span = SpanGroup {
        count: 20,
        length_km: 100.0,
        attenuation_db_per_km: 0.2,
        dispersion_ps_nm_km: 16.5,
        gamma_per_w_km: None,
        effective_area_um2: Some(80.0),
        n2: None,
        noise_figure_db: 5.0,
    };
    preset("config2", span, Constellation::Qam16, "-6:6:1")
}

/// Parse "start:stop:step" (dBm, stop inclusive) or a single value.
pub fn parse_powers(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("power range \"{spec}\" is not start:stop:step"));
    let parts: Vec<f64> = spec
        .trim()
        .trim_end_matches("dBm")
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [p] if p.is_finite() => Ok(vec![p]),
        [start, stop, step] if step > 0.0 && stop >= start && start.is_finite() && stop.is_finite() => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}
