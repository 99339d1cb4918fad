//! Turbulence statistics and path geometry.
//!
//! The link is a slant path of length `z` at elevation `theta_el`; altitude
//! along the path is `h(ξ) = ξ sin(theta_el)`, and the turbulent layer is
//! truncated at `H_atm` (integrals stop at `min(z, H_atm / sin(theta_el))` so
//! the altitude never exceeds the layer). The refractive-index structure
//! constant follows the Hufnagel–Valley profile with ground strength `A` and
//! wind speed `v`; from it come the path average `⟨C_n²⟩`, the Rytov variance
//! `σ_R²` (with direction-dependent path weighting and a beam-size
//! correction), the Fried parameter `r_0`, the beam-drift variance, and the
//! Beer–Lambert attenuation of the full layer.

use serde::{Deserialize, Serialize};

use crate::numerics::quad;
use crate::{ensure_finite, Error, Result};

/// Default thickness of the turbulent layer (m).
pub const DEFAULT_ATMOSPHERE_HEIGHT_M: f64 = 20_000.0;
/// Default outer scale of turbulence (m).
pub const DEFAULT_OUTER_SCALE_M: f64 = 25.0;
/// Default inner scale of turbulence (m).
pub const DEFAULT_INNER_SCALE_M: f64 = 1e-3;

/// Relative tolerance for path integrals (applied to O(1)-rescaled
/// integrands).
pub(crate) const PATH_REL_TOL: f64 = 1e-8;
/// Absolute tolerance for path integrals after rescaling to O(1).
pub(crate) const PATH_ABS_TOL: f64 = 1e-14;

/// Propagation direction of the link.
///
/// Uplink (ground → satellite) weights turbulence near the transmitter where
/// the beam is still narrow; downlink weights the far end of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkDirection {
    Uplink,
    Downlink,
}

/// Geometry of the optical link: where the beam goes and how it starts out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Propagation distance z (m).
    pub path_length_m: f64,
    /// Elevation angle above the horizon (rad), in (0, π/2].
    pub elevation_rad: f64,
    /// Link direction (selects the turbulence path weighting).
    pub direction: LinkDirection,
    /// Transmitter beam waist w₀ (m).
    pub beam_waist_m: f64,
    /// Optical wavelength (m).
    pub wavelength_m: f64,
    /// Receiver aperture radius a (m).
    pub aperture_radius_m: f64,
    /// Thickness of the turbulent layer H_atm (m).
    pub atmosphere_height_m: f64,
}

impl LinkGeometry {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.path_length_m, "path length"),
            (self.elevation_rad, "elevation"),
            (self.beam_waist_m, "beam waist"),
            (self.wavelength_m, "wavelength"),
            (self.aperture_radius_m, "aperture radius"),
            (self.atmosphere_height_m, "atmosphere height"),
        ] {
            ensure_finite(value, name)?;
            if value <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.elevation_rad > std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidInput(format!(
                "elevation must not exceed pi/2, got {}",
                self.elevation_rad
            )));
        }
        Ok(())
    }

    /// Optical wavenumber k = 2π/λ (m⁻¹).
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_m
    }

    /// Rayleigh range z_R = π w₀²/λ (m).
    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.beam_waist_m * self.beam_waist_m / self.wavelength_m
    }

    /// Gaussian beam radius w_z = w₀ √(1 + (z/z_R)²) at range `z` (m).
    ///
    /// Monotone non-decreasing in `z`; equals the waist at the origin.
    pub fn beam_radius(&self, z_m: f64) -> Result<f64> {
        ensure_finite(z_m, "range")?;
        if z_m < 0.0 {
            return Err(Error::InvalidInput(format!(
                "range must be non-negative, got {z_m}"
            )));
        }
        let ratio = z_m / self.rayleigh_range();
        Ok(self.beam_waist_m * ratio.mul_add(ratio, 1.0).sqrt())
    }

    /// Zenith angle β = π/2 − theta_el (rad).
    pub fn zenith_rad(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 - self.elevation_rad
    }

    /// Path length actually inside the turbulent layer:
    /// `min(z, H_atm / sin(theta_el))` (m).
    pub fn turbulent_path_m(&self) -> f64 {
        let slant_layer = self.atmosphere_height_m / self.elevation_rad.sin();
        self.path_length_m.min(slant_layer)
    }
}

/// Atmospheric turbulence profile: Hufnagel–Valley parameters, scales, and
/// clear-air attenuation, tagged with a weather label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceProfile {
    /// Weather tag echoed into result rows.
    pub label: String,
    /// Ground-level structure constant A (m^{-2/3}).
    pub ground_cn2: f64,
    /// Wind speed v (m/s).
    pub wind_speed_mps: f64,
    /// Outer scale L₀ (m).
    pub outer_scale_m: f64,
    /// Inner scale l₀ (m).
    pub inner_scale_m: f64,
    /// Attenuation coefficient α_atm (km⁻¹).
    pub attenuation_per_km: f64,
    /// Overall multiplier on the structure-constant profile. 1 for physical
    /// profiles; 0 expresses an exactly turbulence-free path (the profile's
    /// stratospheric term never vanishes on its own).
    pub cn2_scale: f64,
}

impl TurbulenceProfile {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.ground_cn2, "ground Cn2"),
            (self.attenuation_per_km, "attenuation"),
            (self.cn2_scale, "Cn2 scale"),
        ] {
            ensure_finite(value, name)?;
            if value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {value}"
                )));
            }
        }
        ensure_finite(self.wind_speed_mps, "wind speed")?;
        if self.wind_speed_mps <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "wind speed must be positive, got {}",
                self.wind_speed_mps
            )));
        }
        ensure_finite(self.outer_scale_m, "outer scale")?;
        ensure_finite(self.inner_scale_m, "inner scale")?;
        if !(self.outer_scale_m > self.inner_scale_m && self.inner_scale_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scales must satisfy L0 > l0 > 0, got L0={}, l0={}",
                self.outer_scale_m, self.inner_scale_m
            )));
        }
        Ok(())
    }
}

/// Turbulence regime classified from the Rytov variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurbulenceRegime {
    /// σ_R² < 1.
    Weak,
    /// 1 ≤ σ_R² < 5.
    Medium,
    /// σ_R² ≥ 5.
    Strong,
}

impl std::fmt::Display for TurbulenceRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TurbulenceRegime::Weak => "weak",
            TurbulenceRegime::Medium => "medium",
            TurbulenceRegime::Strong => "strong",
        })
    }
}

/// Rytov variance together with its regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RytovResult {
    pub sigma_r2: f64,
    pub regime: TurbulenceRegime,
}

/// Hufnagel–Valley structure constant C_n²(h) at altitude `h_m` (m^{-2/3}).
///
/// Three terms: high-altitude wind shear, a stratospheric background, and
/// the ground layer of strength `A`, all scaled by the profile's
/// `cn2_scale`.
pub fn hv_cn2(h_m: f64, profile: &TurbulenceProfile) -> Result<f64> {
    ensure_finite(h_m, "altitude")?;
    if h_m < 0.0 {
        return Err(Error::InvalidInput(format!(
            "altitude must be non-negative, got {h_m}"
        )));
    }
    let wind_term = 0.00594
        * (profile.wind_speed_mps / 27.0).powi(2)
        * (1e-5 * h_m).powi(10)
        * (-h_m / 1000.0).exp();
    let stratospheric_term = 2.7e-16 * (-h_m / 1500.0).exp();
    let ground_term = profile.ground_cn2 * (-h_m / 100.0).exp();
    Ok(profile.cn2_scale * (wind_term + stratospheric_term + ground_term))
}

/// Integrates `cn2_of_xi` over the truncated path and divides by the full
/// path length. The integrand is rescaled to O(1) by its ground value so the
/// pinned tolerances act relative to the profile's own magnitude.
fn path_average<F: Fn(f64) -> f64>(geom: &LinkGeometry, cn2_of_xi: F) -> Result<f64> {
    let z = geom.path_length_m;
    let xi_max = geom.turbulent_path_m();
    let scale = cn2_of_xi(0.0).max(cn2_of_xi(0.5 * xi_max));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let u_max = xi_max / z;
    let result = quad::integrate_with_breakpoints(
        |u| cn2_of_xi(u * z) / scale,
        0.0,
        u_max,
        &altitude_breakpoints(geom, u_max),
        PATH_REL_TOL,
        PATH_ABS_TOL,
    )?;
    Ok(result.value * scale)
}

/// Interior breakpoints (in the rescaled variable u = ξ/z) at the profile's
/// characteristic altitudes, so the ground-layer decay starts on its own
/// segments.
fn altitude_breakpoints(geom: &LinkGeometry, u_max: f64) -> Vec<f64> {
    let sin_el = geom.elevation_rad.sin();
    [100.0, 400.0, 1500.0, 5000.0, 12_000.0]
        .iter()
        .map(|h| h / (geom.path_length_m * sin_el))
        .filter(|&u| u > 0.0 && u < u_max)
        .collect()
}

/// Path-averaged structure constant `⟨C_n²⟩ = (1/z) ∫ C_n²(h(ξ)) dξ`
/// (m^{-2/3}), with the integrand truncated where the altitude leaves the
/// turbulent layer.
pub fn path_avg_cn2(geom: &LinkGeometry, profile: &TurbulenceProfile) -> Result<f64> {
    geom.validate()?;
    profile.validate()?;
    let sin_el = geom.elevation_rad.sin();
    path_average(geom, |xi| {
        hv_cn2(xi * sin_el, profile).unwrap_or(0.0)
    })
}

/// Von Kármán power spectral density of refractive-index fluctuations at
/// spatial wavenumber `kappa_s` (m⁻¹):
/// `0.033 C_n² (κ² + κ₀²)^{-11/6} exp(−κ²/κ_m²)` with κ₀ = 2π/L₀ and
/// κ_m = 5.92/l₀.
pub fn von_karman_psd(
    kappa_s: f64,
    cn2: f64,
    outer_scale_m: f64,
    inner_scale_m: f64,
) -> Result<f64> {
    ensure_finite(kappa_s, "spatial wavenumber")?;
    if kappa_s < 0.0 {
        return Err(Error::InvalidInput(format!(
            "spatial wavenumber must be non-negative, got {kappa_s}"
        )));
    }
    if !(outer_scale_m > inner_scale_m && inner_scale_m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scales must satisfy L0 > l0 > 0, got L0={outer_scale_m}, l0={inner_scale_m}"
        )));
    }
    let kappa0 = 2.0 * std::f64::consts::PI / outer_scale_m;
    let kappa_m = 5.92 / inner_scale_m;
    let k2 = kappa_s * kappa_s;
    Ok(0.033 * cn2 * (k2 + kappa0 * kappa0).powf(-11.0 / 6.0) * (-k2 / (kappa_m * kappa_m)).exp())
}

/// Rytov variance for an arbitrary structure-constant function of path
/// position; shared by the public profile-based wrapper and by unit tests
/// that exercise known constant-`C_n²` limits.
pub(crate) fn rytov_with_cn2<F: Fn(f64) -> f64>(
    geom: &LinkGeometry,
    cn2_of_xi: F,
) -> Result<RytovResult> {
    let z = geom.path_length_m;
    let u_max = geom.turbulent_path_m() / z;
    let scale = cn2_of_xi(0.0).max(cn2_of_xi(0.5 * geom.turbulent_path_m()));
    if scale == 0.0 {
        return Ok(RytovResult {
            sigma_r2: 0.0,
            regime: TurbulenceRegime::Weak,
        });
    }

    let w0 = geom.beam_waist_m;
    let integrand = |u: f64| {
        let xi = u * z;
        let w_link = match geom.direction {
            LinkDirection::Uplink => (1.0 - u).powf(5.0 / 6.0),
            LinkDirection::Downlink => (u * (1.0 - u)).powf(5.0 / 6.0),
        };
        let w_z = geom
            .beam_radius(xi)
            .expect("path position is non-negative");
        let ratio = w0 / w_z;
        let f_beam = ratio.mul_add(ratio, 1.0).powf(-7.0 / 6.0);
        cn2_of_xi(xi) / scale * w_link * f_beam
    };

    let mut cuts = altitude_breakpoints(geom, u_max);
    // The beam-size factor turns on over a few Rayleigh ranges.
    let z_r = geom.rayleigh_range();
    for mult in [1.0, 8.0] {
        let u = mult * z_r / z;
        if u > 0.0 && u < u_max {
            cuts.push(u);
        }
    }
    let integral = quad::integrate_with_breakpoints(
        integrand,
        0.0,
        u_max,
        &cuts,
        PATH_REL_TOL,
        PATH_ABS_TOL,
    )?;

    let k = geom.wavenumber();
    let sec_beta = 1.0 / geom.elevation_rad.sin();
    let sigma_r2 = 2.25
        * k.powf(7.0 / 6.0)
        * sec_beta.powf(11.0 / 6.0)
        * z.powf(5.0 / 6.0)
        * scale
        * z
        * integral.value;
    Ok(RytovResult {
        sigma_r2,
        regime: classify_regime(sigma_r2)?,
    })
}

/// Rytov variance of the link: a beam-size–corrected spherical-wave path
/// integral of the structure constant,
/// `σ_R² = 2.25 k^{7/6} sec^{11/6}β · z^{5/6} ∫ C_n² W_link F_beam dξ`,
/// with the uplink kernel `(1−ξ/z)^{5/6}` (ground-layer weighted) and the
/// downlink kernel `(ξ/z)^{5/6}(1−ξ/z)^{5/6}`, and
/// `F_beam = [1 + (w₀/w_z(ξ))²]^{-7/6}`. The leading `z^{5/6}` renders the
/// dimensionless kernels into path weights; in the constant-`C_n²` uplink
/// limit the expression reduces to `2.25·(6/11)·C_n² k^{7/6} z^{11/6}`.
pub fn rytov_variance(geom: &LinkGeometry, profile: &TurbulenceProfile) -> Result<RytovResult> {
    geom.validate()?;
    profile.validate()?;
    let sin_el = geom.elevation_rad.sin();
    rytov_with_cn2(geom, |xi| hv_cn2(xi * sin_el, profile).unwrap_or(0.0))
}

/// Classifies a Rytov variance into weak (< 1), medium ([1, 5)), or strong
/// (≥ 5) turbulence.
pub fn classify_regime(sigma_r2: f64) -> Result<TurbulenceRegime> {
    ensure_finite(sigma_r2, "Rytov variance")?;
    if sigma_r2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "Rytov variance must be non-negative, got {sigma_r2}"
        )));
    }
    Ok(if sigma_r2 < 1.0 {
        TurbulenceRegime::Weak
    } else if sigma_r2 < 5.0 {
        TurbulenceRegime::Medium
    } else {
        TurbulenceRegime::Strong
    })
}

fn fried_from_integral(k: f64, path_integral: f64) -> f64 {
    if path_integral <= 0.0 {
        // Turbulence-free path: infinite coherence length.
        return f64::INFINITY;
    }
    (0.423 * k * k * path_integral).powf(-3.0 / 5.0)
}

/// Fried parameter from the plain path integral,
/// `r₀^{-5/3} = 0.423 k² ∫ C_n²(ξ) dξ` over the truncated slant path (m).
///
/// A turbulence-free path returns the `+∞` sentinel (infinite coherence
/// length); downstream formulas use `exp(−r²/r₀²) → 1` in that limit.
pub fn fried_parameter_plain(geom: &LinkGeometry, profile: &TurbulenceProfile) -> Result<f64> {
    let avg = path_avg_cn2(geom, profile)?;
    Ok(fried_from_integral(
        geom.wavenumber(),
        avg * geom.path_length_m,
    ))
}

/// Fried parameter from the direction-weighted phase-structure integral,
/// `r₀^{-5/3} = 0.423 k² ∫ C_n² W_D F_D dξ` with the uplink kernel
/// `(ξ/z)^{5/3}`, the downlink kernel `(1−ξ/z)^{5/3}`, and
/// `F_D = [1 + (w₀/w_z(ξ))²]^{-1}` (m).
pub fn fried_parameter_weighted(geom: &LinkGeometry, profile: &TurbulenceProfile) -> Result<f64> {
    geom.validate()?;
    profile.validate()?;
    let z = geom.path_length_m;
    let sin_el = geom.elevation_rad.sin();
    let w0 = geom.beam_waist_m;
    let weighted = path_average(geom, |xi| {
        let u = xi / z;
        let w_d = match geom.direction {
            LinkDirection::Uplink => u.powf(5.0 / 3.0),
            LinkDirection::Downlink => (1.0 - u).powf(5.0 / 3.0),
        };
        let w_z = geom
            .beam_radius(xi)
            .expect("path position is non-negative");
        let ratio = w0 / w_z;
        let f_d = 1.0 / ratio.mul_add(ratio, 1.0);
        hv_cn2(xi * sin_el, profile).unwrap_or(0.0) * w_d * f_d
    })?;
    Ok(fried_from_integral(geom.wavenumber(), weighted * z))
}

/// Beam-drift (wander) variance from the von Kármán tilt spectrum under the
/// spherical-wave approximation (m²):
/// `σ_drift² = 0.73 ⟨C_n²⟩ z³ w_z^{-1/3} B sec²β`, where the large-eddy
/// bracket `B = 1 − 0.97 (L₀/w_z)^{1/3}` applies only once the beam has
/// outgrown the outer scale (`w_z > L₀`); narrower beams use `B = 1`, the
/// uncorrected spherical-wave form.
pub fn drift_variance(
    cn2_avg: f64,
    path_length_m: f64,
    w_z: f64,
    outer_scale_m: f64,
    zenith_rad: f64,
) -> Result<f64> {
    ensure_finite(cn2_avg, "path-averaged Cn2")?;
    if cn2_avg < 0.0 {
        return Err(Error::InvalidInput(format!(
            "path-averaged Cn2 must be non-negative, got {cn2_avg}"
        )));
    }
    if !(path_length_m > 0.0 && w_z > 0.0 && outer_scale_m > 0.0) {
        return Err(Error::InvalidInput(
            "drift variance needs positive path length, beam radius, and outer scale".into(),
        ));
    }
    let bracket = if w_z > outer_scale_m {
        1.0 - 0.97 * (outer_scale_m / w_z).powf(1.0 / 3.0)
    } else {
        1.0
    };
    let sec_beta = 1.0 / zenith_rad.cos();
    Ok(0.73
        * cn2_avg
        * path_length_m.powi(3)
        * w_z.powf(-1.0 / 3.0)
        * bracket
        * sec_beta
        * sec_beta)
}

/// Beer–Lambert transmission of the full turbulent layer:
/// `L_atm = exp(−α_atm · H_atm / sin θ_el)` with α in km⁻¹ and H in m.
///
/// Deliberately independent of the link length: the layer is either fully
/// traversed or the satellite sits above it.
pub fn atmospheric_loss(
    elevation_rad: f64,
    attenuation_per_km: f64,
    atmosphere_height_m: f64,
) -> Result<f64> {
    ensure_finite(elevation_rad, "elevation")?;
    ensure_finite(attenuation_per_km, "attenuation")?;
    if !(elevation_rad > 0.0 && elevation_rad <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidInput(format!(
            "elevation must lie in (0, pi/2], got {elevation_rad}"
        )));
    }
    if attenuation_per_km < 0.0 {
        return Err(Error::InvalidInput(format!(
            "attenuation must be non-negative, got {attenuation_per_km}"
        )));
    }
    let slant_km = atmosphere_height_m / 1000.0 / elevation_rad.sin();
    Ok((-attenuation_per_km * slant_km).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn clear_profile() -> TurbulenceProfile {
        TurbulenceProfile {
            label: "clear".into(),
            ground_cn2: 1.7e-14,
            wind_speed_mps: 21.0,
            outer_scale_m: DEFAULT_OUTER_SCALE_M,
            inner_scale_m: DEFAULT_INNER_SCALE_M,
            attenuation_per_km: 0.004,
            cn2_scale: 1.0,
        }
    }

    fn vacuum_profile() -> TurbulenceProfile {
        TurbulenceProfile {
            label: "vacuum".into(),
            ground_cn2: 0.0,
            attenuation_per_km: 0.0,
            cn2_scale: 0.0,
            ..clear_profile()
        }
    }

    fn geometry(z_m: f64) -> LinkGeometry {
        LinkGeometry {
            path_length_m: z_m,
            elevation_rad: 85.0_f64.to_radians(),
            direction: LinkDirection::Uplink,
            beam_waist_m: 0.1,
            wavelength_m: 850e-9,
            aperture_radius_m: 0.6,
            atmosphere_height_m: DEFAULT_ATMOSPHERE_HEIGHT_M,
        }
    }

    #[test]
    fn beam_radius_at_origin_is_the_waist() {
        let geom = geometry(10_000.0);
        assert_eq!(geom.beam_radius(0.0).unwrap(), 0.1);
    }

    #[test]
    fn beam_radius_at_rayleigh_range_is_waist_times_sqrt2() {
        let geom = geometry(10_000.0);
        let z_r = geom.rayleigh_range();
        assert_relative_eq!(z_r, 36_959.9, max_relative = 1e-4);
        assert_relative_eq!(
            geom.beam_radius(z_r).unwrap(),
            0.1 * 2.0_f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            geom.beam_radius(2.0 * z_r).unwrap(),
            0.1 * 5.0_f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn beam_radius_rejects_negative_and_non_finite_range() {
        let geom = geometry(10_000.0);
        assert!(geom.beam_radius(-1.0).is_err());
        assert!(geom.beam_radius(f64::NAN).is_err());
    }

    #[test]
    fn hv_profile_at_ground_is_stratospheric_plus_ground_term() {
        let c = hv_cn2(0.0, &clear_profile()).unwrap();
        assert_relative_eq!(c, 2.7e-16 + 1.7e-14, max_relative = 1e-15);
    }

    #[test]
    fn hv_profile_vanishes_at_high_altitude() {
        let c = hv_cn2(1e7, &clear_profile()).unwrap();
        assert!(c >= 0.0 && c < 1e-300);
    }

    #[test]
    fn hv_profile_with_only_stratospheric_term() {
        let profile = TurbulenceProfile {
            ground_cn2: 0.0,
            wind_speed_mps: 1e-12,
            ..clear_profile()
        };
        for h in [0.0, 800.0, 3000.0] {
            assert_relative_eq!(
                hv_cn2(h, &profile).unwrap(),
                2.7e-16 * (-h / 1500.0_f64).exp(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn hv_profile_rejects_negative_altitude() {
        assert!(hv_cn2(-1.0, &clear_profile()).is_err());
    }

    #[test]
    fn path_average_of_constant_profile_is_the_constant() {
        let geom = geometry(10_000.0);
        let avg = path_average(&geom, |_| 3.4e-15).unwrap();
        assert_relative_eq!(avg, 3.4e-15, max_relative = 1e-8);
    }

    #[test]
    fn path_average_matches_analytic_single_exponential() {
        let mut geom = geometry(20_000.0);
        geom.elevation_rad = std::f64::consts::FRAC_PI_2;
        let profile = TurbulenceProfile {
            ground_cn2: 0.0,
            wind_speed_mps: 1e-12,
            ..clear_profile()
        };
        let avg = path_avg_cn2(&geom, &profile).unwrap();
        let analytic = 2.7e-16 * 1500.0 / 20_000.0 * (1.0 - (-20_000.0_f64 / 1500.0).exp());
        assert_relative_eq!(avg, analytic, max_relative = 1e-7);
    }

    #[test]
    fn path_average_truncates_above_the_layer() {
        let profile = TurbulenceProfile {
            ground_cn2: 0.0,
            wind_speed_mps: 1e-12,
            ..clear_profile()
        };
        let mut short = geometry(20_000.0);
        short.elevation_rad = std::f64::consts::FRAC_PI_2;
        let mut long = geometry(200_000.0);
        long.elevation_rad = std::f64::consts::FRAC_PI_2;
        let avg_short = path_avg_cn2(&short, &profile).unwrap();
        let avg_long = path_avg_cn2(&long, &profile).unwrap();
        assert_relative_eq!(avg_long, avg_short * 0.1, max_relative = 1e-7);
    }

    #[test]
    fn von_karman_zero_turbulence_is_zero() {
        assert_eq!(von_karman_psd(10.0, 0.0, 25.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn von_karman_at_origin_matches_outer_scale_plateau() {
        let kappa0 = 2.0 * std::f64::consts::PI / 25.0;
        let expected = 0.033 * 1e-14 * kappa0.powf(-11.0 / 3.0);
        assert_relative_eq!(
            von_karman_psd(0.0, 1e-14, 25.0, 1e-3).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn von_karman_decays_past_the_inner_scale_cutoff() {
        let kappa_m = 5.92 / 1e-3;
        let value = von_karman_psd(20.0 * kappa_m, 1e-14, 25.0, 1e-3).unwrap();
        assert!(value >= 0.0 && value < 1e-200);
    }

    #[test]
    fn rytov_vanishes_without_turbulence() {
        let result = rytov_variance(&geometry(10_000.0), &vacuum_profile()).unwrap();
        assert_eq!(result.sigma_r2, 0.0);
        assert_eq!(result.regime, TurbulenceRegime::Weak);
    }

    #[test]
    fn rytov_constant_cn2_uplink_matches_closed_form() {
        // Tiny waist makes the beam-size factor unity except over a few
        // micrometres of path, so the classic constant-Cn2 limit applies.
        let mut geom = geometry(1000.0);
        geom.elevation_rad = std::f64::consts::FRAC_PI_2;
        geom.beam_waist_m = 1e-6;
        geom.atmosphere_height_m = 1e9;
        let c = 1e-14;
        let result = rytov_with_cn2(&geom, |_| c).unwrap();
        let k = geom.wavenumber();
        let expected = 2.25 * (6.0 / 11.0) * c * k.powf(7.0 / 6.0) * 1000.0_f64.powf(11.0 / 6.0);
        assert_relative_eq!(result.sigma_r2, expected, max_relative = 1e-5);
    }

    #[test]
    fn rytov_constant_cn2_downlink_gives_spherical_wave_prefactor() {
        let mut geom = geometry(1000.0);
        geom.elevation_rad = std::f64::consts::FRAC_PI_2;
        geom.direction = LinkDirection::Downlink;
        geom.beam_waist_m = 1e-7;
        geom.atmosphere_height_m = 1e9;
        let c = 1e-14;
        let result = rytov_with_cn2(&geom, |_| c).unwrap();
        let k = geom.wavenumber();
        // 2.25 · B(11/6, 11/6) ≈ 0.4962: the classic spherical-wave value.
        let beta_func = 0.220_535_655_384_688_0;
        let expected = 2.25 * beta_func * c * k.powf(7.0 / 6.0) * 1000.0_f64.powf(11.0 / 6.0);
        assert_relative_eq!(result.sigma_r2, expected, max_relative = 1e-5);
    }

    #[test]
    fn rytov_monotone_in_ground_strength() {
        let geom = geometry(10_000.0);
        let mut last = -1.0;
        for a in [1e-15, 1.7e-14, 5e-14, 1e-13] {
            let profile = TurbulenceProfile {
                ground_cn2: a,
                ..clear_profile()
            };
            let sigma = rytov_variance(&geom, &profile).unwrap().sigma_r2;
            assert!(sigma > last, "sigma_R2 not increasing at A={a}");
            last = sigma;
        }
    }

    #[test]
    fn regime_thresholds() {
        assert_eq!(classify_regime(0.5).unwrap(), TurbulenceRegime::Weak);
        assert_eq!(classify_regime(3.0).unwrap(), TurbulenceRegime::Medium);
        assert_eq!(classify_regime(7.0).unwrap(), TurbulenceRegime::Strong);
        assert_eq!(classify_regime(1.0).unwrap(), TurbulenceRegime::Medium);
        assert_eq!(classify_regime(5.0).unwrap(), TurbulenceRegime::Strong);
        assert!(classify_regime(-0.1).is_err());
    }

    #[test]
    fn fried_parameter_constant_profile_matches_hand_value() {
        let mut geom = geometry(1000.0);
        geom.elevation_rad = std::f64::consts::FRAC_PI_2;
        let k = geom.wavenumber();
        // Constant 1e-14 over 1 km: r0 = (0.423 k² · 1e-11)^{-3/5}.
        let integral = path_average(&geom, |_| 1e-14).unwrap() * geom.path_length_m;
        let r0 = fried_from_integral(k, integral);
        assert_relative_eq!(
            r0,
            (0.423 * k * k * 1e-11).powf(-0.6),
            max_relative = 1e-7
        );
    }

    #[test]
    fn fried_parameter_power_law_scaling() {
        let geom = geometry(10_000.0);
        let single = fried_parameter_plain(&geom, &clear_profile()).unwrap();
        let doubled_profile = TurbulenceProfile {
            cn2_scale: 2.0,
            ..clear_profile()
        };
        let doubled = fried_parameter_plain(&geom, &doubled_profile).unwrap();
        assert_relative_eq!(doubled, single * 2.0_f64.powf(-0.6), max_relative = 1e-7);
    }

    #[test]
    fn fried_parameter_vacuum_is_infinite() {
        let r0 = fried_parameter_plain(&geometry(10_000.0), &vacuum_profile()).unwrap();
        assert!(r0.is_infinite() && r0 > 0.0);
    }

    #[test]
    fn fried_weighted_is_larger_than_plain_for_uplink() {
        // The uplink weighting suppresses the ground layer, so the weighted
        // integral is smaller and the coherence length larger.
        let geom = geometry(10_000.0);
        let plain = fried_parameter_plain(&geom, &clear_profile()).unwrap();
        let weighted = fried_parameter_weighted(&geom, &clear_profile()).unwrap();
        assert!(weighted > plain);
    }

    #[test]
    fn drift_variance_zero_turbulence_is_zero() {
        assert_eq!(drift_variance(0.0, 1e4, 0.2, 25.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn drift_variance_bracket_at_outer_scale_boundary() {
        // w_z just above L0 engages the large-eddy bracket.
        let w_z = 25.0 + 1e-9;
        let got = drift_variance(1e-15, 1e4, w_z, 25.0, 0.0).unwrap();
        let expected = 0.73 * 1e-15 * 1e12 * w_z.powf(-1.0 / 3.0) * (1.0 - 0.97);
        assert_relative_eq!(got, expected, max_relative = 1e-6);
    }

    #[test]
    fn drift_variance_narrow_beam_uses_unit_bracket() {
        let got = drift_variance(1e-15, 1e4, 0.2, 25.0, 0.0).unwrap();
        let expected = 0.73 * 1e-15 * 1e12 * 0.2_f64.powf(-1.0 / 3.0);
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(got >= 0.0);
    }

    #[test]
    fn drift_variance_scales_as_path_length_cubed() {
        let base = drift_variance(1e-15, 1e4, 0.2, 25.0, 0.1).unwrap();
        let tripled = drift_variance(1e-15, 3e4, 0.2, 25.0, 0.1).unwrap();
        assert_relative_eq!(tripled, base * 27.0, max_relative = 1e-12);
    }

    #[test]
    fn atmospheric_loss_without_attenuation_is_unity() {
        assert_eq!(
            atmospheric_loss(std::f64::consts::FRAC_PI_2, 0.0, 20_000.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn atmospheric_loss_clear_zenith_matches_hand_value() {
        let loss =
            atmospheric_loss(std::f64::consts::FRAC_PI_2, 0.004, 20_000.0).unwrap();
        assert_relative_eq!(loss, (-0.08_f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(loss, 0.92312, max_relative = 1e-5);
    }

    #[test]
    fn atmospheric_loss_exponent_doubles_at_30_degrees() {
        let at_zenith =
            atmospheric_loss(std::f64::consts::FRAC_PI_2, 0.01, 20_000.0).unwrap();
        let at_30 = atmospheric_loss(std::f64::consts::FRAC_PI_6, 0.01, 20_000.0).unwrap();
        assert_relative_eq!(at_30, at_zenith * at_zenith, max_relative = 1e-12);
    }

    #[test]
    fn atmospheric_loss_underflows_gracefully_at_grazing_elevation() {
        let loss = atmospheric_loss(1e-300, 0.02, 20_000.0).unwrap();
        assert_eq!(loss, 0.0);
    }

    proptest! {
        #[test]
        fn hv_profile_is_non_negative(h in 0.0..100_000.0f64, a in 0.0..1e-12f64, v in 0.1..50.0f64) {
            let profile = TurbulenceProfile {
                ground_cn2: a,
                wind_speed_mps: v,
                ..clear_profile()
            };
            prop_assert!(hv_cn2(h, &profile).unwrap() >= 0.0);
        }

        #[test]
        fn drift_variance_is_non_negative(
            cn2 in 0.0..1e-12f64,
            z in 1.0..2e5f64,
            w_z in 1e-3..100.0f64,
            zenith in 0.0..1.5f64,
        ) {
            prop_assert!(drift_variance(cn2, z, w_z, 25.0, zenith).unwrap() >= 0.0);
        }

        #[test]
        fn atmospheric_loss_is_a_transmission(
            el in 1e-3..std::f64::consts::FRAC_PI_2,
            alpha in 0.0..0.1f64,
        ) {
            // Underflow to exactly 0 is acceptable at grazing elevation.
            let loss = atmospheric_loss(el, alpha, 20_000.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&loss));
            let heavier = atmospheric_loss(el, alpha + 0.01, 20_000.0).unwrap();
            prop_assert!(heavier <= loss);
        }

        #[test]
        fn regime_classification_is_total(s in 0.0..1e3f64) {
            classify_regime(s).unwrap();
        }
    }
}
