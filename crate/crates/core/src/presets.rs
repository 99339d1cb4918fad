//! Named parameter sets: weather-to-turbulence mappings, adaptive-optics
//! baselines, and fixed receiver constants.
//!
//! The weather presets map an observing condition to a Hufnagel–Valley
//! ground strength `A`, a wind speed `v`, and a clear-air attenuation
//! coefficient; all share the default outer/inner scales. `vacuum` is the
//! turbulence-free reference: the profile multiplier is zero (the
//! stratospheric background never vanishes on its own) and so is the
//! attenuation.

use crate::atmosphere::{TurbulenceProfile, DEFAULT_INNER_SCALE_M, DEFAULT_OUTER_SCALE_M};
use crate::polchannel::AoProfile;
use crate::{Error, Result};

/// Detector quantum efficiency η_det.
pub const DETECTOR_EFFICIENCY: f64 = 0.75;
/// Fixed receiver-optics transmission L_opt = 10^(−0.2), a 2 dB insertion
/// loss.
pub const RECEIVER_OPTICS_TRANSMISSION: f64 = 0.630_957_344_480_193_2;

/// Known weather preset names, in documentation order.
pub const WEATHER_PRESETS: [&str; 4] = ["clear", "overcast", "hazy", "vacuum"];
/// Known adaptive-optics preset names, in documentation order.
pub const AO_PRESETS: [&str; 4] = ["off", "mild", "medium", "strong"];

/// Looks up a weather preset by name.
///
/// clear: A = 1.7e-14 m^(−2/3), v = 21 m/s, α = 0.004 km⁻¹;
/// overcast: 50e-14, 25, 0.010; hazy: 100e-14, 30, 0.020;
/// vacuum: zero turbulence and zero attenuation.
pub fn weather_preset(name: &str) -> Result<TurbulenceProfile> {
    let (ground_cn2, wind_speed_mps, attenuation_per_km, cn2_scale) = match name {
        "clear" => (1.7e-14, 21.0, 0.004, 1.0),
        "overcast" => (50e-14, 25.0, 0.010, 1.0),
        "hazy" => (100e-14, 30.0, 0.020, 1.0),
        "vacuum" => (0.0, 21.0, 0.0, 0.0),
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_owned(),
                available: WEATHER_PRESETS.join(", "),
            })
        }
    };
    Ok(TurbulenceProfile {
        label: name.to_owned(),
        ground_cn2,
        wind_speed_mps,
        outer_scale_m: DEFAULT_OUTER_SCALE_M,
        inner_scale_m: DEFAULT_INNER_SCALE_M,
        attenuation_per_km,
        cn2_scale,
    })
}

/// Looks up an adaptive-optics preset by name: the (ρ_trk, κ_w, κ_φ)
/// triples mild (0.80, 0.95, 0.80), medium (0.50, 0.80, 0.60), strong
/// (0.20, 0.60, 0.40), or the identity profile `off`.
pub fn ao_preset(name: &str) -> Result<AoProfile> {
    let (rho_trk, kappa_w, kappa_phi) = match name {
        "off" => return Ok(AoProfile::disabled()),
        "mild" => (0.80, 0.95, 0.80),
        "medium" => (0.50, 0.80, 0.60),
        "strong" => (0.20, 0.60, 0.40),
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_owned(),
                available: AO_PRESETS.join(", "),
            })
        }
    };
    Ok(AoProfile {
        rho_trk,
        kappa_w,
        kappa_phi,
    })
}
