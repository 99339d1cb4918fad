//! Detection probability of the link.
//!
//! Scintillation of the received intensity follows a Gamma-Gamma law whose
//! shape parameters come from aperture-averaged fits in the Rytov variance
//! and the aperture parameter `d = √(k a²/z)`. Because the polarization
//! analysis normalizes by the arriving intensity, scintillation leaves the
//! effective channel parameters untouched and survives only in the moments
//! `⟨η⟩` and `⟨η²⟩` that enter yield formulas. The geometric part of the
//! detection probability is the drift-averaged aperture capture of the
//! Gaussian beam; atmospheric attenuation, detector quantum efficiency, and
//! fixed receiver losses multiply it into the total efficiency. The lossy
//! channel output is the polarization state embedded alongside a vacuum
//! component.

use serde::{Deserialize, Serialize};

use crate::numerics::{quad, special};
use crate::polchannel::{radial_weight, PolState};
use crate::{ensure_finite, Error, Result};

/// Relative tolerance of the capture quadrature (tight enough for the
/// closed-form zero-drift identity to hold at 1e-12).
const CAPTURE_REL_TOL: f64 = 1e-12;
/// Absolute tolerance of the capture and drift quadratures.
const CAPTURE_ABS_TOL: f64 = 1e-14;
/// Rayleigh drift integrals stop at this many sigmas (tail mass < 1e-13).
const DRIFT_TRUNCATION_SIGMAS: f64 = 8.0;

/// Gamma-Gamma scintillation shape, or the deterministic sentinel when the
/// Rytov variance vanishes and both shape parameters would diverge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScintillationShape {
    /// No scintillation: the intensity factor is identically 1.
    Deterministic,
    /// Gamma-Gamma with large-scale `alpha_gg`, small-scale `beta_gg`, and
    /// the aperture parameter `d` they were fitted at.
    GammaGamma {
        alpha_gg: f64,
        beta_gg: f64,
        d: f64,
    },
}

impl ScintillationShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScintillationShape::Deterministic => Ok(()),
            ScintillationShape::GammaGamma {
                alpha_gg,
                beta_gg,
                d,
            } => {
                for (value, name) in [(alpha_gg, "alpha_gg"), (beta_gg, "beta_gg")] {
                    ensure_finite(value, name)?;
                    if value <= 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "{name} must be positive, got {value}"
                        )));
                    }
                }
                ensure_finite(d, "aperture parameter")?;
                if d < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "aperture parameter must be non-negative, got {d}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Normalized intensity variance ⟨I²⟩−1 = (1+1/α)(1+1/β)−1; zero for the
    /// deterministic sentinel.
    pub fn scintillation_variance(&self) -> f64 {
        match *self {
            ScintillationShape::Deterministic => 0.0,
            ScintillationShape::GammaGamma {
                alpha_gg, beta_gg, ..
            } => (1.0 + 1.0 / alpha_gg) * (1.0 + 1.0 / beta_gg) - 1.0,
        }
    }
}

/// Builds the shape from a Rytov variance and an aperture parameter.
pub(crate) fn gg_shape_from(sigma_r2: f64, d: f64) -> Result<ScintillationShape> {
    ensure_finite(sigma_r2, "Rytov variance")?;
    ensure_finite(d, "aperture parameter")?;
    if sigma_r2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "Rytov variance must be non-negative, got {sigma_r2}"
        )));
    }
    if sigma_r2 == 0.0 {
        return Ok(ScintillationShape::Deterministic);
    }
    let d2 = d * d;
    let s125 = sigma_r2.powf(6.0 / 5.0);
    let alpha_exponent = 0.49 * sigma_r2 / (1.0 + 0.18 * d2 + 0.56 * s125).powf(7.0 / 6.0);
    let beta_exponent = 0.51 * sigma_r2 * (1.0 + 0.69 * s125).powf(-5.0 / 6.0)
        / (1.0 + 0.9 * d2 + 0.62 * d2 * s125);
    let shape = ScintillationShape::GammaGamma {
        alpha_gg: 1.0 / alpha_exponent.exp_m1(),
        beta_gg: 1.0 / beta_exponent.exp_m1(),
        d,
    };
    shape.validate()?;
    Ok(shape)
}

/// Aperture-averaged Gamma-Gamma shape parameters
/// `α = [exp(0.49 σ_R²/(1+0.18d²+0.56 σ_R^{12/5})^{7/6}) − 1]^{-1}` and
/// `β = [exp(0.51 σ_R² (1+0.69 σ_R^{12/5})^{-5/6}/(1+0.9d²+0.62 d² σ_R^{12/5})) − 1]^{-1}`
/// with `d = √(k a²/z)`. A vanishing Rytov variance returns the
/// deterministic sentinel instead of two divergent parameters.
pub fn gg_shape(sigma_r2: f64, a_m: f64, z_m: f64, wavelength_m: f64) -> Result<ScintillationShape> {
    if !(a_m > 0.0 && z_m > 0.0 && wavelength_m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "aperture, distance, and wavelength must be positive, got a={a_m}, z={z_m}, lambda={wavelength_m}"
        )));
    }
    let k = 2.0 * std::f64::consts::PI / wavelength_m;
    gg_shape_from(sigma_r2, (k * a_m * a_m / z_m).sqrt())
}

/// Gamma-Gamma probability density of the unit-mean normalized intensity:
/// `p(I) = 2(αβ)^{(α+β)/2} / (Γ(α)Γ(β)) · I^{(α+β)/2−1} K_{α−β}(2√(αβ I))`,
/// evaluated entirely in log space with the exponentially scaled Bessel K so
/// extreme shapes neither overflow nor underflow prematurely.
pub fn gg_pdf(i0: f64, shape: &ScintillationShape) -> Result<f64> {
    shape.validate()?;
    ensure_finite(i0, "normalized intensity")?;
    if i0 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "normalized intensity must be positive, got {i0}"
        )));
    }
    let (alpha, beta) = match *shape {
        ScintillationShape::Deterministic => {
            return Err(Error::InvalidInput(
                "the deterministic sentinel has no density; intensity is fixed at 1".into(),
            ))
        }
        ScintillationShape::GammaGamma {
            alpha_gg, beta_gg, ..
        } => (alpha_gg, beta_gg),
    };
    let half_sum = 0.5 * (alpha + beta);
    let x = 2.0 * (alpha * beta * i0).sqrt();
    let ln_pdf = std::f64::consts::LN_2 + half_sum * (alpha * beta).ln()
        - special::ln_gamma(alpha)
        - special::ln_gamma(beta)
        + (half_sum - 1.0) * i0.ln()
        + special::ln_bessel_k_scaled(alpha - beta, x)
        - x;
    Ok(ln_pdf.exp())
}

/// First two moments of the fluctuating efficiency `η = η̄ · I₀`:
/// `⟨η⟩ = η̄` (unit-mean intensity) and `⟨η²⟩ = η̄² (1+1/α)(1+1/β)`; the
/// deterministic sentinel gives `⟨η²⟩ = η̄²`.
pub fn eta_moments(shape: &ScintillationShape, eta_mean_in: f64) -> Result<(f64, f64)> {
    shape.validate()?;
    ensure_finite(eta_mean_in, "efficiency")?;
    if !(0.0..=1.0).contains(&eta_mean_in) {
        return Err(Error::InvalidInput(format!(
            "efficiency must lie in [0, 1], got {eta_mean_in}"
        )));
    }
    let second = eta_mean_in * eta_mean_in * (1.0 + shape.scintillation_variance());
    Ok((eta_mean_in, second))
}

/// Fraction of the drifted beam's power falling inside the aperture:
/// `∫₀^a W(r; r_drift, w_z) dr`. At zero drift this is exactly
/// `1 − exp(−2a²/w_z²)`.
pub fn capture_fraction(r_drift_m: f64, a_m: f64, w_z: f64) -> Result<f64> {
    if !(a_m > 0.0) || !a_m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "aperture radius must be positive and finite, got {a_m}"
        )));
    }
    let failure = std::cell::RefCell::new(None);
    let integrand = |r: f64| match radial_weight(r, r_drift_m, w_z) {
        Ok(w) => w,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let cuts: Vec<f64> = [
        r_drift_m - w_z,
        r_drift_m - 0.5 * w_z,
        r_drift_m,
        r_drift_m + 0.5 * w_z,
        r_drift_m + w_z,
    ]
    .into_iter()
    .filter(|&c| c > 0.0 && c < a_m)
    .collect();
    let result =
        quad::integrate_with_breakpoints(integrand, 0.0, a_m, &cuts, CAPTURE_REL_TOL, CAPTURE_ABS_TOL)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result.value.clamp(0.0, 1.0))
}

/// The small-drift approximation of the capture: the closed-form
/// `1 − exp(−2a²/w_z²)` gated by an indicator that the drift stays inside
/// the aperture. Retained for comparison against [`capture_fraction`], which
/// is the authoritative form.
pub fn capture_fraction_small_drift(r_drift_m: f64, a_m: f64, w_z: f64) -> Result<f64> {
    ensure_finite(r_drift_m, "drift radius")?;
    if !(a_m > 0.0 && w_z > 0.0) {
        return Err(Error::InvalidInput(format!(
            "aperture and beam radius must be positive, got a={a_m}, w_z={w_z}"
        )));
    }
    if r_drift_m >= a_m {
        return Ok(0.0);
    }
    Ok(1.0 - (-2.0 * a_m * a_m / (w_z * w_z)).exp())
}

/// Drift-averaged aperture efficiency
/// `η_eff = ⟨I₀⟩ · ∫₀^∞ p_drift(r_d) · capture(r_d) dr_d`, with the
/// intensity factor equal to 1 analytically (unit-mean scintillation). Zero
/// drift variance degenerates to the on-axis capture.
pub fn eta_eff(
    sigma_drift2_m2: f64,
    a_m: f64,
    w_z: f64,
    shape: &ScintillationShape,
) -> Result<f64> {
    shape.validate()?;
    ensure_finite(sigma_drift2_m2, "drift variance")?;
    if sigma_drift2_m2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "drift variance must be non-negative, got {sigma_drift2_m2}"
        )));
    }
    if sigma_drift2_m2 == 0.0 {
        return capture_fraction(0.0, a_m, w_z);
    }
    let sigma = sigma_drift2_m2.sqrt();
    let upper = DRIFT_TRUNCATION_SIGMAS * sigma;
    let cuts = [0.5 * sigma, sigma, 2.0 * sigma, 4.0 * sigma];
    let failure = std::cell::RefCell::new(None);
    let integrand = |r_d: f64| {
        let rayleigh = r_d / sigma_drift2_m2 * (-0.5 * r_d * r_d / sigma_drift2_m2).exp();
        match capture_fraction(r_d, a_m, w_z) {
            Ok(c) => rayleigh * c,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let result = quad::integrate_with_breakpoints(
        integrand,
        0.0,
        upper,
        &cuts,
        1e-10,
        CAPTURE_ABS_TOL,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result.value.clamp(0.0, 1.0))
}

/// Total single-arm detection probability: the product
/// `L_atm · η_eff · η_det · L_opt` of layer transmission, aperture
/// efficiency, detector quantum efficiency, and fixed receiver optics loss.
pub fn eta_total(eta_eff: f64, l_atm: f64, eta_det: f64, l_opt: f64) -> Result<f64> {
    for (value, name) in [
        (eta_eff, "eta_eff"),
        (l_atm, "L_atm"),
        (eta_det, "eta_det"),
        (l_opt, "L_opt"),
    ] {
        ensure_finite(value, name)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidInput(format!(
                "{name} must lie in [0, 1], got {value}"
            )));
        }
    }
    Ok(l_atm * eta_eff * eta_det * l_opt)
}

/// Polarization state embedded in the loss-extended space: the photon
/// arrives with probability `transmit_prob` carrying `polarization`, and the
/// vacuum component absorbs the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossExtendedState {
    pub transmit_prob: f64,
    pub polarization: PolState,
}

impl LossExtendedState {
    /// Weight of the vacuum sector.
    pub fn vacuum_prob(&self) -> f64 {
        1.0 - self.transmit_prob
    }

    /// The (sub-normalized) polarization block `η·ρ'`.
    pub fn polarization_block(&self) -> [[num_complex::Complex64; 2]; 2] {
        let mut block = self.polarization.rho;
        for row in &mut block {
            for entry in row {
                *entry *= self.transmit_prob;
            }
        }
        block
    }

    /// Total trace over both sectors; 1 by construction.
    pub fn total_trace(&self) -> f64 {
        self.transmit_prob * self.polarization.trace().re + self.vacuum_prob()
    }
}

/// Embeds the channel output in the loss-extended space:
/// `η·ρ' ⊕ (1−η)·|vac⟩⟨vac|`.
pub fn embed_loss_state(rho_prime: &PolState, eta: f64) -> Result<LossExtendedState> {
    rho_prime.validate()?;
    ensure_finite(eta, "efficiency")?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!(
            "efficiency must lie in [0, 1], got {eta}"
        )));
    }
    Ok(LossExtendedState {
        transmit_prob: eta,
        polarization: *rho_prime,
    })
}

/// Every factor of the detection probability plus the efficiency moments the
/// yield formulas consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBudget {
    pub eta_eff: f64,
    pub l_atm: f64,
    pub eta_det: f64,
    pub l_opt: f64,
    pub eta_total: f64,
    /// ⟨η⟩ of the scintillating total efficiency.
    pub eta_mean: f64,
    /// ⟨η²⟩ of the scintillating total efficiency.
    pub eta_second_moment: f64,
}

impl DetectionBudget {
    pub fn validate(&self) -> Result<()> {
        if self.eta_total > self.eta_eff + 1e-15 {
            return Err(Error::InvalidInput(format!(
                "eta_total={} exceeds eta_eff={}",
                self.eta_total, self.eta_eff
            )));
        }
        if self.eta_second_moment + 1e-15 < self.eta_mean * self.eta_mean {
            return Err(Error::InvalidInput(format!(
                "second moment {} below squared mean {}",
                self.eta_second_moment,
                self.eta_mean * self.eta_mean
            )));
        }
        Ok(())
    }
}

/// Assembles the full detection budget: total efficiency from the four
/// factors, then scintillation moments of that total.
pub fn detection_budget(
    eta_eff_value: f64,
    l_atm: f64,
    eta_det: f64,
    l_opt: f64,
    shape: &ScintillationShape,
) -> Result<DetectionBudget> {
    let total = eta_total(eta_eff_value, l_atm, eta_det, l_opt)?;
    let (mean, second) = eta_moments(shape, total)?;
    let budget = DetectionBudget {
        eta_eff: eta_eff_value,
        l_atm,
        eta_det,
        l_opt,
        eta_total: total,
        eta_mean: mean,
        eta_second_moment: second,
    };
    budget.validate()?;
    Ok(budget)
}
