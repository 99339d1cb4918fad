//! Closed-form MDI-QKD statistics and secret key rate.
//!
//! Both parties send polarization qubits through their own turbulent arm to
//! a midpoint Bell-state measurement. With effective channel parameters
//! `(λ_A, r̄²)` and `(λ_B, r̄²)` and total detection probabilities
//! `η_A, η_B`, the Z-basis gain, the single-photon-sector gain, the Z-basis
//! error rate, and the X-basis phase error rate all have closed forms; the
//! asymptotic key rate follows from the Devetak–Winter bound with an
//! error-correction inefficiency `f`, a hard QBER cutoff, and a clamp at
//! zero. Imperfect spatial overlap at the Bell measurement (finite
//! Hong–Ou–Mandel visibility) scales the coherence factor before it enters
//! the phase error.

use serde::{Deserialize, Serialize};

use crate::{ensure_finite, Error, Result};

/// Everything the closed-form security analysis consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityInput {
    /// Effective depolarization of arm A.
    pub lambda_a: f64,
    /// Effective depolarization of arm B.
    pub lambda_b: f64,
    /// Effective coherence factor r̄² shared by the arms.
    pub rbar2: f64,
    /// Total detection probability of arm A.
    pub eta_total_a: f64,
    /// Total detection probability of arm B.
    pub eta_total_b: f64,
    /// Error-correction inefficiency f ≥ 1.
    pub error_correction_f: f64,
    /// Hard QBER cutoff E_max: the rate is forced to zero above it.
    pub qber_cutoff: f64,
    /// Hong–Ou–Mandel spatial overlap ⟨M_spatial⟩ ∈ [0, 1]; 1 disables the
    /// correction.
    pub m_spatial: f64,
}

impl SecurityInput {
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.lambda_a, "lambda_A"),
            (self.lambda_b, "lambda_B"),
            (self.rbar2, "rbar2"),
            (self.eta_total_a, "eta_total_A"),
            (self.eta_total_b, "eta_total_B"),
            (self.m_spatial, "M_spatial"),
        ] {
            ensure_finite(value, name)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        ensure_finite(self.error_correction_f, "error-correction inefficiency")?;
        if self.error_correction_f < 1.0 {
            return Err(Error::InvalidInput(format!(
                "error-correction inefficiency must be at least 1, got {}",
                self.error_correction_f
            )));
        }
        ensure_finite(self.qber_cutoff, "QBER cutoff")?;
        if !(self.qber_cutoff > 0.0 && self.qber_cutoff < 1.0) {
            return Err(Error::InvalidInput(format!(
                "QBER cutoff must lie in (0, 1), got {}",
                self.qber_cutoff
            )));
        }
        Ok(())
    }
}

/// Gains and error rates of the Z and X bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZxStatistics {
    /// Total Z-basis gain Q_Z.
    pub q_z: f64,
    /// Single-photon-sector Z gain Q_Z^{(11)}.
    pub q_z11: f64,
    /// Z-basis error rate E_Z.
    pub e_z: f64,
    /// X-basis phase error rate e_X^{(11)}.
    pub e_x11: f64,
}

/// Statistics plus the resulting key rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityOutput {
    pub q_z: f64,
    pub q_z11: f64,
    pub e_z: f64,
    pub e_x11: f64,
    /// Asymptotic secret key rate (bits per pulse), clamped at zero and
    /// forced to zero above the QBER cutoff.
    pub skr: f64,
}

/// Binary entropy H(x) = −x log₂x − (1−x) log₂(1−x), with H(0) = H(1) = 0
/// by continuity.
pub fn binary_entropy(x: f64) -> Result<f64> {
    ensure_finite(x, "entropy argument")?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!(
            "entropy argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Drift-averaged Hong–Ou–Mandel spatial overlap
/// `⟨M_spatial⟩ = 1/(1 + 2σ²/w_z²)` with the relative-displacement variance
/// `σ² = σ²_A + σ²_B` of the two independent arms.
pub fn hom_visibility(sigma_drift2_a: f64, sigma_drift2_b: f64, w_z: f64) -> Result<f64> {
    ensure_finite(sigma_drift2_a, "drift variance A")?;
    ensure_finite(sigma_drift2_b, "drift variance B")?;
    if sigma_drift2_a < 0.0 || sigma_drift2_b < 0.0 {
        return Err(Error::InvalidInput(format!(
            "drift variances must be non-negative, got {sigma_drift2_a}, {sigma_drift2_b}"
        )));
    }
    if !(w_z > 0.0) || !w_z.is_finite() {
        return Err(Error::InvalidInput(format!(
            "beam radius must be positive and finite, got {w_z}"
        )));
    }
    let relative = sigma_drift2_a + sigma_drift2_b;
    Ok(1.0 / (1.0 + 2.0 * relative / (w_z * w_z)))
}

/// Closed-form basis statistics:
/// `Q_Z = ½ η_A η_B`,
/// `Q_Z^{(11)} = (2 − λ_A − λ_B + λ_A λ_B) η_A η_B`,
/// `E_Z = (λ_A + λ_B − λ_A λ_B)/2`, and
/// `e_X^{(11)} = [1 − (1−λ_A)(1−λ_B)(M r̄²)²]/2`.
pub fn zx_statistics(input: &SecurityInput) -> Result<ZxStatistics> {
    input.validate()?;
    let eta_product = input.eta_total_a * input.eta_total_b;
    let survival = (1.0 - input.lambda_a) * (1.0 - input.lambda_b);
    let coherence = input.m_spatial * input.rbar2;
    Ok(ZxStatistics {
        q_z: 0.5 * eta_product,
        q_z11: (2.0 - input.lambda_a - input.lambda_b + input.lambda_a * input.lambda_b)
            * eta_product,
        e_z: 0.5 * (input.lambda_a + input.lambda_b - input.lambda_a * input.lambda_b),
        e_x11: 0.5 * (1.0 - survival * coherence * coherence),
    })
}

/// Asymptotic secret key rate
/// `R = η_A η_B [(2−λ_A−λ_B+λ_Aλ_B)(1 − H(e_X11)) − ½ f H(E_Z)]`,
/// forced to zero when `E_Z` exceeds the cutoff and clamped at zero
/// otherwise.
pub fn skr(input: &SecurityInput) -> Result<f64> {
    Ok(evaluate(input)?.skr)
}

/// Full security evaluation: statistics plus the rate.
pub fn evaluate(input: &SecurityInput) -> Result<SecurityOutput> {
    let stats = zx_statistics(input)?;
    let skr = if stats.e_z > input.qber_cutoff {
        0.0
    } else {
        let yield_factor =
            2.0 - input.lambda_a - input.lambda_b + input.lambda_a * input.lambda_b;
        let raw = input.eta_total_a
            * input.eta_total_b
            * (yield_factor * (1.0 - binary_entropy(stats.e_x11)?)
                - 0.5 * input.error_correction_f * binary_entropy(stats.e_z)?);
        raw.max(0.0)
    };
    Ok(SecurityOutput {
        q_z: stats.q_z,
        q_z11: stats.q_z11,
        e_z: stats.e_z,
        e_x11: stats.e_x11,
        skr,
    })
}
