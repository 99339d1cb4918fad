//! End-to-end link evaluation: one configuration in, one result row out.
//!
//! The evaluation runs the stages in a fixed order. Atmosphere first: the
//! path-averaged structure constant, the Rytov variance and its regime, the
//! diffractive beam radius, the beam-drift variance, the Fried parameter,
//! and the clear-air transmission of the turbulent layer. Adaptive optics
//! then rescales the beam radius, the drift variance, and the
//! phase-structure strength, and every later formula sees only the adjusted
//! values. The polarization stage turns the phase structure function into
//! the drift-and-aperture-averaged pair (λ_eff, r̄²_eff); the detection
//! stage assembles the efficiency budget and the scintillation moments; the
//! security stage evaluates gains, error rates, and the asymptotic key rate
//! for a symmetric link (both senders see the same channel); and the
//! optional decoy stage bounds the single-photon quantities from the
//! three-intensity protocol. Any stage failure propagates with the stage
//! named so a sweep can report exactly where a grid point died.
//!
//! Sweeps evaluate the cartesian product of the input grids in lexicographic
//! order (distance, then weather, then aperture, then elevation, then
//! adaptive optics). Evaluation may fan out across threads, but the output
//! order is fixed by the grid, never by scheduling. A failed grid point
//! becomes a [`SweepOutcome::Failed`] entry carrying its inputs and the
//! error text; the run continues.

use serde::{Deserialize, Serialize};

use crate::atmosphere::{
    atmospheric_loss, classify_regime, drift_variance, fried_parameter_plain, path_avg_cn2,
    rytov_variance, LinkDirection, LinkGeometry, TurbulenceProfile, TurbulenceRegime,
    DEFAULT_ATMOSPHERE_HEIGHT_M,
};
use crate::decoy::{
    bsm_coefficient, decoy_estimate, elementary_yields, DecoyOutput, DecoySettings, ErrorModel,
    ScintCorrelation,
};
use crate::detection::{
    detection_budget, eta_eff, gg_shape, DetectionBudget, ScintillationShape,
};
use crate::oracle::{
    closed_form_reference, compare_report, mc_channel_estimate, ChannelSpec, ComparisonReport,
    McConfig, McEstimate,
};
use crate::polchannel::{apply_ao, drift_average, AxisModel, DphiParams, EffectivePolParams};
use crate::presets::{ao_preset, weather_preset, DETECTOR_EFFICIENCY, RECEIVER_OPTICS_TRANSMISSION};
use crate::security::{evaluate, SecurityInput, SecurityOutput};
use crate::{Error, Result};

/// Link geometry as entered by a user: kilometres, degrees, and nanometres.
/// Converted to SI exactly once, in [`LinkConfig::link_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub distance_km: f64,
    pub elevation_deg: f64,
    pub wavelength_nm: f64,
    pub beam_waist_m: f64,
    /// Receiver aperture radius (m).
    pub aperture_m: f64,
    pub direction: LinkDirection,
    pub atmosphere_height_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            distance_km: 10.0,
            elevation_deg: 85.0,
            wavelength_nm: 850.0,
            beam_waist_m: 0.1,
            aperture_m: 0.6,
            direction: LinkDirection::Uplink,
            atmosphere_height_m: DEFAULT_ATMOSPHERE_HEIGHT_M,
        }
    }
}

/// Which weather preset to load, with an optional multiplier override on the
/// structure-constant profile (0 expresses an exactly turbulence-free path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbulenceConfig {
    pub weather: String,
    pub cn2_scale: Option<f64>,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        TurbulenceConfig {
            weather: "clear".into(),
            cn2_scale: None,
        }
    }
}

/// Polarization-channel knobs: the adaptive-optics preset, the rotation-axis
/// concentration, and the spatial-overlap factor at the relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub ao: String,
    pub kappa: f64,
    pub m_spatial: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            ao: "medium".into(),
            kappa: 1.0,
            m_spatial: 1.0,
        }
    }
}

/// Fixed receiver losses: detector quantum efficiency and the lumped optics
/// transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverConfig {
    pub detector_efficiency: f64,
    pub optics_transmission: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            detector_efficiency: DETECTOR_EFFICIENCY,
            optics_transmission: RECEIVER_OPTICS_TRANSMISSION,
        }
    }
}

/// Key-rate bookkeeping: the error-correction inefficiency and the QBER
/// abort threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecurityConfig {
    pub error_correction_f: f64,
    pub qber_cutoff: f64,
}

impl Default for SecurityConfig {
    fn default() -> Self {
        SecurityConfig {
            error_correction_f: 1.1,
            qber_cutoff: 0.15,
        }
    }
}

/// Decoy-state analysis toggle plus its intensity settings. The settings
/// flatten into this section of the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoyConfig {
    pub enabled: bool,
    /// Whether the two arms scintillate on a shared or independent screen.
    pub correlation: ScintCorrelation,
    #[serde(flatten)]
    pub settings: DecoySettings,
}

impl Default for DecoyConfig {
    fn default() -> Self {
        DecoyConfig {
            enabled: false,
            correlation: ScintCorrelation::Shared,
            settings: DecoySettings::default(),
        }
    }
}

/// A complete single-point configuration. Every section and every field has
/// a default, so a configuration file only needs to state what it changes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub geometry: GeometryConfig,
    pub turbulence: TurbulenceConfig,
    pub channel: ChannelConfig,
    pub receiver: ReceiverConfig,
    pub security: SecurityConfig,
    pub decoy: DecoyConfig,
}

impl LinkConfig {
    /// The SI geometry this configuration describes.
    pub fn link_geometry(&self) -> Result<LinkGeometry> {
        let geometry = LinkGeometry {
            path_length_m: self.geometry.distance_km * 1000.0,
            elevation_rad: self.geometry.elevation_deg.to_radians(),
            direction: self.geometry.direction,
            beam_waist_m: self.geometry.beam_waist_m,
            wavelength_m: self.geometry.wavelength_nm * 1e-9,
            aperture_radius_m: self.geometry.aperture_m,
            atmosphere_height_m: self.geometry.atmosphere_height_m,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// The weather preset with any structure-constant override applied.
    pub fn turbulence_profile(&self) -> Result<TurbulenceProfile> {
        let mut profile = weather_preset(&self.turbulence.weather)?;
        if let Some(scale) = self.turbulence.cn2_scale {
            profile.cn2_scale = scale;
        }
        profile.validate()?;
        Ok(profile)
    }
}

/// Everything derived from the configuration before polarization averaging:
/// the validated geometry and profile, the turbulence summary numbers, and
/// the adaptive-optics-adjusted beam/drift/phase parameters every later
/// stage consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedChannel {
    pub geometry: LinkGeometry,
    pub profile: TurbulenceProfile,
    pub cn2_avg: f64,
    pub sigma_r2: f64,
    pub regime: TurbulenceRegime,
    /// Beam radius at the receiver after adaptive-optics compression (m).
    pub beam_radius_m: f64,
    /// Drift variance after tip/tilt tracking (m²).
    pub sigma_drift2_m2: f64,
    pub fried_r0_m: f64,
    pub dphi: DphiParams,
    pub l_atm: f64,
    pub scintillation: ScintillationShape,
}

/// Runs the configuration and atmosphere stages: validates the inputs,
/// derives the turbulence summary, and applies the adaptive-optics model.
pub fn derive_channel(config: &LinkConfig) -> Result<DerivedChannel> {
    let geometry = config.link_geometry().map_err(|e| e.in_stage("config"))?;
    let profile = config
        .turbulence_profile()
        .map_err(|e| e.in_stage("config"))?;
    let ao = ao_preset(&config.channel.ao).map_err(|e| e.in_stage("config"))?;

    let atmosphere = |e: Error| e.in_stage("atmosphere");
    let cn2_avg = path_avg_cn2(&geometry, &profile).map_err(atmosphere)?;
    let rytov = rytov_variance(&geometry, &profile).map_err(atmosphere)?;
    let w_z = geometry
        .beam_radius(geometry.path_length_m)
        .map_err(atmosphere)?;
    let raw_drift2 = drift_variance(
        cn2_avg,
        geometry.path_length_m,
        w_z,
        profile.outer_scale_m,
        geometry.zenith_rad(),
    )
    .map_err(atmosphere)?;
    let fried_r0_m = fried_parameter_plain(&geometry, &profile).map_err(atmosphere)?;
    let adjusted = apply_ao(w_z, raw_drift2, &ao).map_err(atmosphere)?;
    let dphi = DphiParams {
        wavenumber: geometry.wavenumber(),
        path_length_m: geometry.path_length_m,
        cn2_avg,
        sigma_r2: rytov.sigma_r2,
        fried_r0_m,
        scale: adjusted.dphi_scale,
    };
    dphi.validate().map_err(atmosphere)?;
    let l_atm = atmospheric_loss(
        geometry.elevation_rad,
        profile.attenuation_per_km,
        geometry.atmosphere_height_m,
    )
    .map_err(atmosphere)?;
    let scintillation = gg_shape(
        rytov.sigma_r2,
        geometry.aperture_radius_m,
        geometry.path_length_m,
        geometry.wavelength_m,
    )
    .map_err(atmosphere)?;

    Ok(DerivedChannel {
        geometry,
        profile,
        cn2_avg,
        sigma_r2: rytov.sigma_r2,
        regime: rytov.regime,
        beam_radius_m: adjusted.beam_radius_m,
        sigma_drift2_m2: adjusted.drift_variance_m2,
        fried_r0_m,
        dphi,
        l_atm,
        scintillation,
    })
}

/// One emitted data row: the inputs echoed, then every derived column in the
/// order the CSV header lists them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub distance_km: f64,
    pub weather: String,
    pub aperture_m: f64,
    pub elevation_deg: f64,
    pub ao: String,
    pub kappa: f64,
    #[serde(rename = "sigma_R2")]
    pub sigma_r2: f64,
    pub regime: TurbulenceRegime,
    pub lambda_eff: f64,
    pub r2_eff: f64,
    pub sigma_drift2_m2: f64,
    pub eta_eff: f64,
    pub eta_total: f64,
    #[serde(rename = "Q_Z")]
    pub q_z: f64,
    #[serde(rename = "E_Z")]
    pub e_z: f64,
    #[serde(rename = "e_X11")]
    pub e_x11: f64,
    pub skr_bits_per_pulse: f64,
    /// `None` when the decoy stage is disabled; emitted as an empty CSV cell
    /// or a JSON null.
    pub skr_decoy_bits_per_pulse: Option<f64>,
}

impl ResultRow {
    /// Checks every numeric column is finite and in range, and that the
    /// regime label is consistent with the Rytov variance.
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.distance_km, "distance_km"),
            (self.aperture_m, "aperture_m"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        for (value, name) in [
            (self.lambda_eff, "lambda_eff"),
            (self.r2_eff, "r2_eff"),
            (self.eta_eff, "eta_eff"),
            (self.eta_total, "eta_total"),
            (self.q_z, "Q_Z"),
            (self.e_z, "E_Z"),
            (self.e_x11, "e_X11"),
        ] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        for (value, name) in [
            (self.sigma_r2, "sigma_R2"),
            (self.sigma_drift2_m2, "sigma_drift2_m2"),
            (self.skr_bits_per_pulse, "skr_bits_per_pulse"),
            (self.kappa, "kappa"),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative and finite, got {value}"
                )));
            }
        }
        if let Some(skr_decoy) = self.skr_decoy_bits_per_pulse {
            if !skr_decoy.is_finite() || skr_decoy < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "skr_decoy_bits_per_pulse must be non-negative and finite, got {skr_decoy}"
                )));
            }
        }
        let expected = classify_regime(self.sigma_r2)?;
        if expected != self.regime {
            return Err(Error::InvalidInput(format!(
                "regime {} inconsistent with sigma_R2 = {} (expected {})",
                self.regime, self.sigma_r2, expected
            )));
        }
        Ok(())
    }
}

/// A full single-point evaluation: the emitted row plus every intermediate
/// a caller might want to inspect or print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub row: ResultRow,
    pub channel: DerivedChannel,
    pub pol: EffectivePolParams,
    pub budget: DetectionBudget,
    pub security: SecurityOutput,
    pub decoy: Option<DecoyOutput>,
}

/// Evaluates one configuration through every stage in order. Errors carry
/// the name of the stage that failed.
pub fn run_point(config: &LinkConfig) -> Result<PointResult> {
    let channel = derive_channel(config)?;

    let axis = AxisModel {
        kappa: config.channel.kappa,
    };
    let pol = axis
        .validate()
        .and_then(|()| {
            drift_average(
                channel.geometry.aperture_radius_m,
                channel.sigma_drift2_m2,
                channel.regime,
                &axis,
                &channel.dphi,
                channel.beam_radius_m,
            )
        })
        .map_err(|e| e.in_stage("polarization"))?;

    let budget = eta_eff(
        channel.sigma_drift2_m2,
        channel.geometry.aperture_radius_m,
        channel.beam_radius_m,
        &channel.scintillation,
    )
    .and_then(|eta_eff_value| {
        detection_budget(
            eta_eff_value,
            channel.l_atm,
            config.receiver.detector_efficiency,
            config.receiver.optics_transmission,
            &channel.scintillation,
        )
    })
    .map_err(|e| e.in_stage("detection"))?;

    let security_input = SecurityInput {
        lambda_a: pol.lambda_eff,
        lambda_b: pol.lambda_eff,
        rbar2: pol.r2_eff,
        eta_total_a: budget.eta_total,
        eta_total_b: budget.eta_total,
        error_correction_f: config.security.error_correction_f,
        qber_cutoff: config.security.qber_cutoff,
        m_spatial: config.channel.m_spatial,
    };
    let security = evaluate(&security_input).map_err(|e| e.in_stage("security"))?;

    let decoy = if config.decoy.enabled {
        let run = || -> Result<DecoyOutput> {
            let f_bsm = bsm_coefficient(pol.lambda_eff)?;
            let moments = (budget.eta_mean, budget.eta_second_moment);
            let yields = elementary_yields(
                config.decoy.settings.y0,
                moments,
                moments,
                f_bsm,
                config.decoy.correlation,
            )?;
            let errors = ErrorModel {
                e11_z: security.e_z,
                e11_x: security.e_x11,
            };
            decoy_estimate(&config.decoy.settings, &yields, &errors)
        };
        Some(run().map_err(|e| e.in_stage("decoy"))?)
    } else {
        None
    };

    let row = ResultRow {
        distance_km: config.geometry.distance_km,
        weather: channel.profile.label.clone(),
        aperture_m: config.geometry.aperture_m,
        elevation_deg: config.geometry.elevation_deg,
        ao: config.channel.ao.clone(),
        kappa: config.channel.kappa,
        sigma_r2: channel.sigma_r2,
        regime: channel.regime,
        lambda_eff: pol.lambda_eff,
        r2_eff: pol.r2_eff,
        sigma_drift2_m2: channel.sigma_drift2_m2,
        eta_eff: budget.eta_eff,
        eta_total: budget.eta_total,
        q_z: security.q_z,
        e_z: security.e_z,
        e_x11: security.e_x11,
        skr_bits_per_pulse: security.skr,
        skr_decoy_bits_per_pulse: decoy.as_ref().map(|d| d.skr_decoy),
    };
    row.validate()?;

    Ok(PointResult {
        row,
        channel,
        pol,
        budget,
        security,
        decoy,
    })
}

/// The grids a sweep spans. The base configuration supplies everything the
/// grids do not vary (direction, waist, κ, decoy settings, receiver losses).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub base: LinkConfig,
    pub distances_km: Vec<f64>,
    pub weathers: Vec<String>,
    pub apertures_m: Vec<f64>,
    pub elevations_deg: Vec<f64>,
    pub ao_profiles: Vec<String>,
    /// Echoed into validation runs launched from this sweep; the closed-form
    /// evaluation itself draws no random numbers.
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let base = LinkConfig::default();
        SweepSpec {
            distances_km: vec![base.geometry.distance_km],
            weathers: vec![base.turbulence.weather.clone()],
            apertures_m: vec![base.geometry.aperture_m],
            elevations_deg: vec![base.geometry.elevation_deg],
            ao_profiles: vec![base.channel.ao.clone()],
            seed: 0,
            base,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (len, name) in [
            (self.distances_km.len(), "distance grid"),
            (self.weathers.len(), "weather grid"),
            (self.apertures_m.len(), "aperture grid"),
            (self.elevations_deg.len(), "elevation grid"),
            (self.ao_profiles.len(), "adaptive-optics grid"),
        ] {
            if len == 0 {
                return Err(Error::InvalidInput(format!("{name} must not be empty")));
            }
        }
        for &d in &self.distances_km {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "distances must be positive and finite, got {d}"
                )));
            }
        }
        for &a in &self.apertures_m {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "apertures must be positive and finite, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// The number of grid points the sweep will evaluate.
    pub fn len(&self) -> usize {
        self.distances_km.len()
            * self.weathers.len()
            * self.apertures_m.len()
            * self.elevations_deg.len()
            * self.ao_profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Materializes the grid points in lexicographic order: distance, then
    /// weather, then aperture, then elevation, then adaptive optics.
    pub fn points(&self) -> Vec<LinkConfig> {
        let mut points = Vec::with_capacity(self.len());
        for &distance_km in &self.distances_km {
            for weather in &self.weathers {
                for &aperture_m in &self.apertures_m {
                    for &elevation_deg in &self.elevations_deg {
                        for ao in &self.ao_profiles {
                            let mut config = self.base.clone();
                            config.geometry.distance_km = distance_km;
                            config.geometry.aperture_m = aperture_m;
                            config.geometry.elevation_deg = elevation_deg;
                            config.turbulence.weather = weather.clone();
                            config.channel.ao = ao.clone();
                            points.push(config);
                        }
                    }
                }
            }
        }
        points
    }
}

/// A grid point that failed: its identifying inputs plus the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub distance_km: f64,
    pub weather: String,
    pub aperture_m: f64,
    pub elevation_deg: f64,
    pub ao: String,
    pub error: String,
}

/// One sweep grid point: either a finished row or a recorded failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepOutcome {
    Row(ResultRow),
    Failed(FailedPoint),
}

impl SweepOutcome {
    pub fn as_row(&self) -> Option<&ResultRow> {
        match self {
            SweepOutcome::Row(row) => Some(row),
            SweepOutcome::Failed(_) => None,
        }
    }

    pub fn as_failed(&self) -> Option<&FailedPoint> {
        match self {
            SweepOutcome::Row(_) => None,
            SweepOutcome::Failed(failed) => Some(failed),
        }
    }
}

fn evaluate_sweep_point(config: &LinkConfig) -> SweepOutcome {
    match run_point(config) {
        Ok(point) => SweepOutcome::Row(point.row),
        Err(error) => SweepOutcome::Failed(FailedPoint {
            distance_km: config.geometry.distance_km,
            weather: config.turbulence.weather.clone(),
            aperture_m: config.geometry.aperture_m,
            elevation_deg: config.geometry.elevation_deg,
            ao: config.channel.ao.clone(),
            error: error.to_string(),
        }),
    }
}

/// Evaluates every grid point of the sweep. The output order is the
/// lexicographic grid order regardless of how the points were scheduled;
/// failed points become [`SweepOutcome::Failed`] entries and the sweep
/// continues.
#[cfg(feature = "parallel")]
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepOutcome>> {
    use rayon::prelude::*;
    spec.validate()?;
    Ok(spec.points().par_iter().map(evaluate_sweep_point).collect())
}

/// Evaluates every grid point of the sweep. The output order is the
/// lexicographic grid order regardless of how the points were scheduled;
/// failed points become [`SweepOutcome::Failed`] entries and the sweep
/// continues.
#[cfg(not(feature = "parallel"))]
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepOutcome>> {
    spec.validate()?;
    Ok(spec.points().iter().map(evaluate_sweep_point).collect())
}

/// A Monte Carlo cross-check of one configuration: the closed-form
/// reference values, the sampler's estimates, and the per-quantity
/// comparison verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRun {
    pub closed_pol: EffectivePolParams,
    pub closed_eta: f64,
    pub estimate: McEstimate,
    pub report: ComparisonReport,
}

/// The sampler view of a derived channel.
pub fn channel_spec(channel: &DerivedChannel, kappa: f64) -> ChannelSpec {
    ChannelSpec {
        regime: channel.regime,
        axis: AxisModel { kappa },
        dphi: channel.dphi,
        beam_radius_m: channel.beam_radius_m,
        sigma_drift2_m2: channel.sigma_drift2_m2,
        aperture_radius_m: channel.geometry.aperture_radius_m,
        scintillation: channel.scintillation,
    }
}

/// Runs the Monte Carlo sampler against the closed-form pipeline for one
/// configuration and reports agreement per quantity.
pub fn run_validation(config: &LinkConfig, n_samples: u64, seed: u64) -> Result<ValidationRun> {
    let channel = derive_channel(config)?;
    let oracle = |e: Error| e.in_stage("oracle");
    let spec = channel_spec(&channel, config.channel.kappa);
    let mc = McConfig {
        n_samples,
        seed,
        channel: spec,
    };
    let (closed_pol, closed_eta) = closed_form_reference(&spec).map_err(oracle)?;
    let estimate = mc_channel_estimate(&mc).map_err(oracle)?;
    let report = compare_report(&closed_pol, closed_eta, &estimate);
    Ok(ValidationRun {
        closed_pol,
        closed_eta,
        estimate,
        report,
    })
}
