//! Polarization channel of the turbulent link.
//!
//! A photon crossing the turbulent path suffers a random SU(2) rotation whose
//! axis is drawn from an axial Watson distribution with concentration `κ` and
//! whose angle statistics are set by the phase structure function `D_φ(r)` at
//! transverse radius `r`. Averaging over those random rotations collapses, in
//! each turbulence regime, to a local depolarization weight `λ(r)` and a
//! coherence factor `r̄²(r, κ)`. Spatial averaging over the receiver aperture
//! with the beam's radial intensity profile, followed by averaging over
//! Rayleigh-distributed beam drift, produces the effective pair
//! `(λ_eff, r²_eff)` that defines the single-qubit channel
//! `ρ' = (1−λ)·diag-preserving-part + (λ/2)·I` with off-diagonals additionally
//! damped by `r²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atmosphere::TurbulenceRegime;
use crate::numerics::{quad, special};
use crate::{ensure_finite, Error, Result};

/// Tolerance on Hermiticity, unit trace, and eigenvalue positivity of states.
pub const STATE_TOL: f64 = 1e-12;
/// Capture probability below which the aperture ratio is declared
/// ill-conditioned and endpoint values are returned instead.
pub const NEGLIGIBLE_CAPTURE: f64 = 1e-12;
/// Concentration below which the axial second moment switches to its series.
const MU_SERIES_THRESHOLD: f64 = 1e-3;
/// Relative tolerance of the aperture and drift quadratures.
const AVG_REL_TOL: f64 = 1e-8;
/// Absolute tolerance of the aperture and drift quadratures.
const AVG_ABS_TOL: f64 = 1e-14;
/// The Rayleigh drift integral is truncated at this many drift sigmas
/// (tail mass e⁻³² < 1e-13).
const DRIFT_TRUNCATION_SIGMAS: f64 = 8.0;

/// A single-photon polarization state as a 2×2 density matrix in the
/// horizontal/vertical basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolState {
    pub rho: [[Complex64; 2]; 2],
}

impl PolState {
    /// Builds a state from matrix entries and checks its invariants.
    pub fn new(rho: [[Complex64; 2]; 2]) -> Result<Self> {
        let state = PolState { rho };
        state.validate()?;
        Ok(state)
    }

    /// |H⟩⟨H|.
    pub fn horizontal() -> Self {
        Self::pure(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// |V⟩⟨V|.
    pub fn vertical() -> Self {
        Self::pure(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// |+⟩⟨+| = (|H⟩+|V⟩)(⟨H|+⟨V|)/2.
    pub fn diagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::pure(Complex64::new(s, 0.0), Complex64::new(s, 0.0))
    }

    /// |+i⟩⟨+i| = (|H⟩+i|V⟩)(⟨H|−i⟨V|)/2.
    pub fn circular() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::pure(Complex64::new(s, 0.0), Complex64::new(0.0, s))
    }

    /// Projector onto the ket (amp_h, amp_v).
    pub fn pure(amp_h: Complex64, amp_v: Complex64) -> Self {
        PolState {
            rho: [
                [amp_h * amp_h.conj(), amp_h * amp_v.conj()],
                [amp_v * amp_h.conj(), amp_v * amp_v.conj()],
            ],
        }
    }

    /// Trace of the density matrix (real part; imaginary part is an
    /// invariant violation).
    pub fn trace(&self) -> Complex64 {
        self.rho[0][0] + self.rho[1][1]
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.rho[0][0].re;
        let d = self.rho[1][1].re;
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + self.rho[0][1].norm_sqr()).sqrt();
        (mean - disc, mean + disc)
    }

    /// Bloch vector (x, y, z) with ρ = (I + x σ_x + y σ_y + z σ_z)/2.
    pub fn bloch(&self) -> [f64; 3] {
        [
            2.0 * self.rho[0][1].re,
            -2.0 * self.rho[0][1].im,
            self.rho[0][0].re - self.rho[1][1].re,
        ]
    }

    /// Checks Hermiticity, unit trace, and positive semidefiniteness within
    /// the documented tolerance.
    pub fn validate(&self) -> Result<()> {
        let asym = (self.rho[1][0] - self.rho[0][1].conj()).norm();
        if asym > STATE_TOL
            || self.rho[0][0].im.abs() > STATE_TOL
            || self.rho[1][1].im.abs() > STATE_TOL
        {
            return Err(Error::InvalidInput(format!(
                "density matrix is not Hermitian (asymmetry {asym:.3e})"
            )));
        }
        let trace = self.trace();
        if (trace.re - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix trace is {} instead of 1",
                trace.re
            )));
        }
        let (lo, _) = self.eigenvalues();
        if lo < -STATE_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(())
    }
}

/// Axial Watson model of the random rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisModel {
    /// Concentration κ ≥ 0 about the vertical axis; 0 is isotropic.
    pub kappa: f64,
}

impl AxisModel {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.kappa, "axis concentration")?;
        if self.kappa < 0.0 {
            return Err(Error::InvalidInput(format!(
                "axis concentration must be non-negative, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Depolarization and coherence at a single transverse radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPolParams {
    /// Depolarization weight λ(r) ∈ [0, 1].
    pub lambda_r: f64,
    /// Coherence factor r̄²(r, κ) ∈ [0, 1].
    pub rbar2_r: f64,
}

/// Aperture-averaged polarization parameters at one drift radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AperturePolParams {
    pub lambda_a: f64,
    pub r2_a: f64,
    /// Set when the beam essentially misses the aperture (capture < 1e-12);
    /// the values then come from the aperture-rim radius instead of a 0/0
    /// ratio.
    pub negligible_capture: bool,
}

/// Drift-averaged channel parameters: the pair that defines the effective
/// depolarizing–dephasing channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePolParams {
    pub lambda_eff: f64,
    pub r2_eff: f64,
}

impl EffectivePolParams {
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [(self.lambda_eff, "lambda_eff"), (self.r2_eff, "r2_eff")] {
            ensure_finite(value, name)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Multiplicative adaptive-optics strengths, each in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoProfile {
    /// Tip/tilt tracking factor on the drift standard deviation.
    pub rho_trk: f64,
    /// Beam-radius compression factor.
    pub kappa_w: f64,
    /// Phase-structure-function suppression factor.
    pub kappa_phi: f64,
}

impl AoProfile {
    /// The identity profile: adaptive optics disabled.
    pub fn disabled() -> Self {
        AoProfile {
            rho_trk: 1.0,
            kappa_w: 1.0,
            kappa_phi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.rho_trk, "rho_trk"),
            (self.kappa_w, "kappa_w"),
            (self.kappa_phi, "kappa_phi"),
        ] {
            ensure_finite(value, name)?;
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "AO factor {name} must lie in (0, 1], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Geometry-side inputs of the phase structure function, bundled so the
/// averaging operators can carry them through their quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DphiParams {
    /// Optical wavenumber k (m⁻¹).
    pub wavenumber: f64,
    /// Path length z (m).
    pub path_length_m: f64,
    /// Path-averaged structure constant ⟨C_n²⟩ (m^{-2/3}).
    pub cn2_avg: f64,
    /// Rytov variance σ_R².
    pub sigma_r2: f64,
    /// Fried parameter r₀ (m); +∞ encodes a turbulence-free path.
    pub fried_r0_m: f64,
    /// Multiplicative suppression of D_φ (adaptive optics), in (0, 1].
    pub scale: f64,
}

impl DphiParams {
    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.wavenumber, "wavenumber"),
            (self.path_length_m, "path length"),
        ] {
            ensure_finite(value, name)?;
            if value <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        for (value, name) in [(self.cn2_avg, "path-averaged Cn2"), (self.sigma_r2, "sigma_R2")] {
            ensure_finite(value, name)?;
            if value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {value}"
                )));
            }
        }
        // +∞ is the documented turbulence-free sentinel for r0.
        if !(self.fried_r0_m > 0.0) || self.fried_r0_m.is_nan() {
            return Err(Error::InvalidInput(format!(
                "Fried parameter must be positive, got {}",
                self.fried_r0_m
            )));
        }
        ensure_finite(self.scale, "dphi scale")?;
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "dphi scale must lie in (0, 1], got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Axial second moment μ_∥(κ) = (1/κ) coth κ − 1/κ² of the Watson axis
/// distribution, evaluated by Taylor series below κ = 1e-3 where the closed
/// form loses all significance to cancellation. Lies in (0, 1/3].
pub fn mu_parallel(kappa: f64) -> Result<f64> {
    ensure_finite(kappa, "concentration")?;
    if kappa < 0.0 {
        return Err(Error::InvalidInput(format!(
            "concentration must be non-negative, got {kappa}"
        )));
    }
    if kappa < MU_SERIES_THRESHOLD {
        let k2 = kappa * kappa;
        return Ok(1.0 / 3.0 - k2 / 45.0 + 2.0 * k2 * k2 / 945.0);
    }
    let coth = 1.0 / kappa.tanh();
    Ok(coth / kappa - 1.0 / (kappa * kappa))
}

/// Weak-regime depolarization weight from a phase structure value.
pub(crate) fn weak_lambda(dphi: f64) -> f64 {
    0.5 * (1.0 - (-0.5 * dphi).exp())
}

/// Medium-regime depolarization weight; reduces to the weak form at α = 1.
pub(crate) fn medium_lambda(dphi: f64, alpha: f64) -> f64 {
    1.0 - 0.5 * alpha * (1.0 + (-0.5 * dphi).exp())
}

/// Gaussian fraction α = 1 − σ_R²/5 of the medium-regime angle mixture; the
/// complementary mass is the fully depolarizing uniform part.
pub(crate) fn mixture_alpha(sigma_r2: f64) -> f64 {
    1.0 - sigma_r2 / 5.0
}

/// Coherence factor from a depolarization weight and the axial second
/// moment, clamped into [0, 1].
pub(crate) fn rbar2_from_lambda(lambda: f64, mu_par: f64) -> f64 {
    (1.0 - 0.5 * lambda * (3.0 * mu_par - 1.0)).clamp(0.0, 1.0)
}

/// Phase structure function D_φ(r) (rad²) at transverse radius `r_m`.
///
/// Weak regime: the spherical-wave Kolmogorov power law
/// `1.09 k² z ⟨C_n²⟩ r^{5/3}`. Medium regime: a saturating Rytov term blended
/// with the same power law,
/// `2.22 σ_R² (1−e^{−r²/r₀²})(1−σ_R²/5) + 1.09 k² z ⟨C_n²⟩ r^{5/3} · σ_R²/5`.
/// The strong regime never evaluates D_φ (the channel is fully depolarized
/// there), so asking for it is a contract violation.
pub fn dphi(params: &DphiParams, r_m: f64, regime: TurbulenceRegime) -> Result<f64> {
    params.validate()?;
    ensure_finite(r_m, "radius")?;
    if r_m < 0.0 {
        return Err(Error::InvalidInput(format!(
            "radius must be non-negative, got {r_m}"
        )));
    }
    let power_law = 1.09
        * params.wavenumber
        * params.wavenumber
        * params.path_length_m
        * params.cn2_avg
        * r_m.powf(5.0 / 3.0);
    let value = match regime {
        TurbulenceRegime::Weak => power_law,
        TurbulenceRegime::Medium => {
            let s = params.sigma_r2;
            let ratio = r_m / params.fried_r0_m;
            let saturating = 2.22 * s * (1.0 - (-ratio * ratio).exp()) * (1.0 - s / 5.0);
            saturating + power_law * (s / 5.0)
        }
        TurbulenceRegime::Strong => {
            return Err(Error::InvalidInput(
                "phase structure function is undefined in the strong regime".into(),
            ))
        }
    };
    Ok(params.scale * value)
}

/// Local depolarization weight and coherence factor at radius `r_m`.
///
/// Weak: `λ = (1−e^{−D_φ/2})/2` (bounded by 1/2) and
/// `r̄² = 1 − λ(3μ_∥−1)/2`. Medium: the uniform part fully depolarizes, so
/// with `α = 1−σ_R²/5` the weight is `λ = 1 − α(1+e^{−D_φ/2})/2` and the
/// coherence is `α` times the weak-form factor built from the medium D_φ.
/// Strong: complete depolarization, (1, 0), independent of radius.
pub fn local_params(
    r_m: f64,
    regime: TurbulenceRegime,
    axis: &AxisModel,
    dphi_params: &DphiParams,
) -> Result<LocalPolParams> {
    axis.validate()?;
    if regime == TurbulenceRegime::Strong {
        return Ok(LocalPolParams {
            lambda_r: 1.0,
            rbar2_r: 0.0,
        });
    }
    let d = dphi(dphi_params, r_m, regime)?;
    let mu_par = mu_parallel(axis.kappa)?;
    Ok(match regime {
        TurbulenceRegime::Weak => {
            let lambda = weak_lambda(d);
            LocalPolParams {
                lambda_r: lambda,
                rbar2_r: rbar2_from_lambda(lambda, mu_par),
            }
        }
        TurbulenceRegime::Medium => {
            let alpha = mixture_alpha(dphi_params.sigma_r2);
            let lambda = medium_lambda(d, alpha);
            let rbar2_weak_form = rbar2_from_lambda(weak_lambda(d), mu_par);
            LocalPolParams {
                lambda_r: lambda.clamp(0.0, 1.0),
                rbar2_r: (alpha * rbar2_weak_form).clamp(0.0, 1.0),
            }
        }
        TurbulenceRegime::Strong => unreachable!("handled above"),
    })
}

/// Radial probability density W(r; r_drift, w_z) (m⁻¹) of the photon's
/// transverse radius for a Gaussian beam of radius `w_z` whose center has
/// drifted by `r_drift`:
/// `(4r/w_z²) exp(−2(r²+r_d²)/w_z²) I₀(4 r r_d/w_z²)`, evaluated with the
/// exponentially scaled Bessel function so large drifts cannot overflow.
pub fn radial_weight(r_m: f64, r_drift_m: f64, w_z: f64) -> Result<f64> {
    ensure_finite(r_m, "radius")?;
    ensure_finite(r_drift_m, "drift radius")?;
    ensure_finite(w_z, "beam radius")?;
    if r_m < 0.0 || r_drift_m < 0.0 {
        return Err(Error::InvalidInput(format!(
            "radii must be non-negative, got r={r_m}, r_drift={r_drift_m}"
        )));
    }
    if w_z <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "beam radius must be positive, got {w_z}"
        )));
    }
    let w2 = w_z * w_z;
    let bessel_arg = 4.0 * r_m * r_drift_m / w2;
    let displaced = r_m - r_drift_m;
    Ok(4.0 * r_m / w2 * special::i0_scaled(bessel_arg) * (-2.0 * displaced * displaced / w2).exp())
}

struct ApertureContext<'a> {
    regime: TurbulenceRegime,
    axis: &'a AxisModel,
    dphi_params: &'a DphiParams,
    w_z: f64,
    aperture_radius_m: f64,
}

impl ApertureContext<'_> {
    /// Integrates `W(r)·f(local params at r)` over the aperture disc.
    fn integral<F: Fn(&LocalPolParams) -> f64>(&self, r_drift_m: f64, f: F) -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let integrand = |r: f64| {
            let weight = match radial_weight(r, r_drift_m, self.w_z) {
                Ok(w) => w,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    return 0.0;
                }
            };
            match local_params(r, self.regime, self.axis, self.dphi_params) {
                Ok(p) => weight * f(&p),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let cuts: Vec<f64> = [
            r_drift_m - self.w_z,
            r_drift_m - 0.5 * self.w_z,
            r_drift_m,
            r_drift_m + 0.5 * self.w_z,
            r_drift_m + self.w_z,
        ]
        .into_iter()
        .filter(|&c| c > 0.0 && c < self.aperture_radius_m)
        .collect();
        let result = quad::integrate_with_breakpoints(
            integrand,
            0.0,
            self.aperture_radius_m,
            &cuts,
            AVG_REL_TOL,
            AVG_ABS_TOL,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(result.value)
    }
}

/// Aperture-weighted average of the local polarization parameters at a fixed
/// drift radius: `λ_a = ∫₀^a W λ dr / ∫₀^a W dr` and the analogous coherence
/// ratio. When the capture probability drops below 1e-12 the ratio is
/// ill-conditioned; the aperture-rim values are returned with the
/// `negligible_capture` flag set (such drifts carry essentially no weight in
/// the subsequent drift average).
pub fn aperture_average(
    r_drift_m: f64,
    aperture_radius_m: f64,
    regime: TurbulenceRegime,
    axis: &AxisModel,
    dphi_params: &DphiParams,
    w_z: f64,
) -> Result<AperturePolParams> {
    if !(aperture_radius_m > 0.0) || !aperture_radius_m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "aperture radius must be positive and finite, got {aperture_radius_m}"
        )));
    }
    if regime == TurbulenceRegime::Strong {
        return Ok(AperturePolParams {
            lambda_a: 1.0,
            r2_a: 0.0,
            negligible_capture: false,
        });
    }
    let ctx = ApertureContext {
        regime,
        axis,
        dphi_params,
        w_z,
        aperture_radius_m,
    };
    let capture = ctx.integral(r_drift_m, |_| 1.0)?;
    if capture < NEGLIGIBLE_CAPTURE {
        let rim = local_params(aperture_radius_m, regime, axis, dphi_params)?;
        return Ok(AperturePolParams {
            lambda_a: rim.lambda_r,
            r2_a: rim.rbar2_r,
            negligible_capture: true,
        });
    }
    let lambda_num = ctx.integral(r_drift_m, |p| p.lambda_r)?;
    let r2_num = ctx.integral(r_drift_m, |p| p.rbar2_r)?;
    Ok(AperturePolParams {
        lambda_a: (lambda_num / capture).clamp(0.0, 1.0),
        r2_a: (r2_num / capture).clamp(0.0, 1.0),
        negligible_capture: false,
    })
}

/// Rayleigh average of the aperture parameters over the beam-drift radius:
/// `λ_eff = ∫₀^∞ (r_d/σ²) e^{−r_d²/2σ²} λ_a(r_d) dr_d` (truncated at 8σ,
/// tail mass < 1e-13) and analogously for the coherence. Zero drift variance
/// degenerates to the aperture average at the beam axis.
pub fn drift_average(
    aperture_radius_m: f64,
    sigma_drift2_m2: f64,
    regime: TurbulenceRegime,
    axis: &AxisModel,
    dphi_params: &DphiParams,
    w_z: f64,
) -> Result<EffectivePolParams> {
    ensure_finite(sigma_drift2_m2, "drift variance")?;
    if sigma_drift2_m2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "drift variance must be non-negative, got {sigma_drift2_m2}"
        )));
    }
    if regime == TurbulenceRegime::Strong {
        return Ok(EffectivePolParams {
            lambda_eff: 1.0,
            r2_eff: 0.0,
        });
    }
    if sigma_drift2_m2 == 0.0 {
        let on_axis = aperture_average(0.0, aperture_radius_m, regime, axis, dphi_params, w_z)?;
        return Ok(EffectivePolParams {
            lambda_eff: on_axis.lambda_a,
            r2_eff: on_axis.r2_a,
        });
    }

    let sigma = sigma_drift2_m2.sqrt();
    let upper = DRIFT_TRUNCATION_SIGMAS * sigma;
    let cuts = [0.5 * sigma, sigma, 2.0 * sigma, 4.0 * sigma];
    let rayleigh = |r_d: f64| r_d / sigma_drift2_m2 * (-0.5 * r_d * r_d / sigma_drift2_m2).exp();

    let averaged = |pick: fn(&AperturePolParams) -> f64| -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let integrand = |r_d: f64| {
            match aperture_average(r_d, aperture_radius_m, regime, axis, dphi_params, w_z) {
                Ok(p) => rayleigh(r_d) * pick(&p),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let result =
            quad::integrate_with_breakpoints(integrand, 0.0, upper, &cuts, AVG_REL_TOL, AVG_ABS_TOL)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(result.value)
    };

    Ok(EffectivePolParams {
        lambda_eff: averaged(|p| p.lambda_a)?.clamp(0.0, 1.0),
        r2_eff: averaged(|p| p.r2_a)?.clamp(0.0, 1.0),
    })
}

/// Applies the effective depolarizing–dephasing channel:
/// `ρ' = (1−λ)[[ρ_HH, ρ_HV r²],[ρ_VH r², ρ_VV]] + (λ/2) I`.
pub fn apply_channel(rho: &PolState, p: &EffectivePolParams) -> Result<PolState> {
    rho.validate()?;
    p.validate()?;
    let keep = Complex64::new(1.0 - p.lambda_eff, 0.0);
    let damp = keep * p.r2_eff;
    let iso = Complex64::new(0.5 * p.lambda_eff, 0.0);
    PolState::new([
        [keep * rho.rho[0][0] + iso, damp * rho.rho[0][1]],
        [damp * rho.rho[1][0], keep * rho.rho[1][1] + iso],
    ])
}

/// Conjugates the state by the SU(2) rotation
/// `U = cos(θ/2) I − i sin(θ/2) (n·σ)` about the unit axis `n`.
pub fn su2_apply(rho: &PolState, theta: f64, axis: [f64; 3]) -> Result<PolState> {
    rho.validate()?;
    ensure_finite(theta, "rotation angle")?;
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "rotation axis must be a unit vector, |n| = {norm}"
        )));
    }
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    let u = [
        [
            Complex64::new(c, -s * axis[2]),
            Complex64::new(-s * axis[1], -s * axis[0]),
        ],
        [
            Complex64::new(s * axis[1], -s * axis[0]),
            Complex64::new(c, s * axis[2]),
        ],
    ];
    let mut u_rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            u_rho[i][j] = u[i][0] * rho.rho[0][j] + u[i][1] * rho.rho[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = u_rho[i][0] * u[j][0].conj() + u_rho[i][1] * u[j][1].conj();
        }
    }
    PolState::new(out)
}

/// Link quantities after applying adaptive optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoAdjusted {
    /// Compressed beam radius κ_w·w_z (m), used consistently downstream for
    /// spreading, capture, and the radial weight.
    pub beam_radius_m: f64,
    /// Tracked drift variance ρ_trk²·σ_drift² (m²).
    pub drift_variance_m2: f64,
    /// Residual phase-structure scale κ_φ to install in [`DphiParams`].
    pub dphi_scale: f64,
}

/// Applies the multiplicative adaptive-optics model: tracking shrinks the
/// drift standard deviation by ρ_trk, the beam radius compresses by κ_w, and
/// the phase structure function is suppressed by κ_φ. One single adjusted
/// beam radius feeds every downstream formula.
pub fn apply_ao(w_z: f64, sigma_drift2_m2: f64, ao: &AoProfile) -> Result<AoAdjusted> {
    ao.validate()?;
    ensure_finite(w_z, "beam radius")?;
    ensure_finite(sigma_drift2_m2, "drift variance")?;
    if w_z <= 0.0 || sigma_drift2_m2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "need positive beam radius and non-negative drift variance, got w_z={w_z}, sigma2={sigma_drift2_m2}"
        )));
    }
    Ok(AoAdjusted {
        beam_radius_m: ao.kappa_w * w_z,
        drift_variance_m2: ao.rho_trk * ao.rho_trk * sigma_drift2_m2,
        dphi_scale: ao.kappa_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn weak_dphi_params() -> DphiParams {
        DphiParams {
            wavenumber: 2.0 * std::f64::consts::PI / 850e-9,
            path_length_m: 1000.0,
            cn2_avg: 1e-14,
            sigma_r2: 0.4,
            fried_r0_m: 0.05,
            scale: 1.0,
        }
    }

    fn medium_dphi_params() -> DphiParams {
        DphiParams {
            sigma_r2: 2.0,
            ..weak_dphi_params()
        }
    }

    fn unit_axis() -> AxisModel {
        AxisModel { kappa: 1.0 }
    }

    #[test]
    fn mu_parallel_isotropic_limit_is_one_third() {
        assert_abs_diff_eq!(mu_parallel(0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn mu_parallel_series_and_closed_form_agree_at_the_switch() {
        // The closed form keeps only ~1e-10 of significance this close to
        // zero (two ~1e6 terms cancel); the series is the accurate branch.
        for kappa in [9e-4f64, 1.1e-3] {
            let series = 1.0 / 3.0 - kappa * kappa / 45.0
                + 2.0 * kappa.powi(4) / 945.0;
            let closed = (1.0 / kappa.tanh()) / kappa - 1.0 / (kappa * kappa);
            assert_abs_diff_eq!(series, closed, epsilon = 1e-9);
            assert_abs_diff_eq!(mu_parallel(kappa).unwrap(), series, epsilon = 1e-9);
        }
    }

    #[test]
    fn mu_parallel_at_unit_concentration() {
        // coth(1) − 1 = (e²+1)/(e²−1) − 1.
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let expected = (e2 + 1.0) / (e2 - 1.0) - 1.0;
        assert_relative_eq!(mu_parallel(1.0).unwrap(), expected, max_relative = 1e-14);
        assert_abs_diff_eq!(mu_parallel(1.0).unwrap(), 0.313035, epsilon = 1e-6);
    }

    #[test]
    fn mu_parallel_at_strong_concentration() {
        assert_abs_diff_eq!(mu_parallel(10.0).unwrap(), 0.09, epsilon = 1e-7);
    }

    #[test]
    fn mu_parallel_rejects_negative_concentration() {
        assert!(mu_parallel(-0.5).is_err());
    }

    #[test]
    fn dphi_vanishes_at_zero_radius_in_both_regimes() {
        assert_eq!(
            dphi(&weak_dphi_params(), 0.0, TurbulenceRegime::Weak).unwrap(),
            0.0
        );
        assert_eq!(
            dphi(&medium_dphi_params(), 0.0, TurbulenceRegime::Medium).unwrap(),
            0.0
        );
    }

    #[test]
    fn dphi_weak_matches_hand_value() {
        let params = weak_dphi_params();
        let got = dphi(&params, 0.1, TurbulenceRegime::Weak).unwrap();
        let k = params.wavenumber;
        let expected = 1.09 * k * k * 1000.0 * 1e-14 * 0.1f64.powf(5.0 / 3.0);
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert_abs_diff_eq!(got, 12.8, epsilon = 0.05);
    }

    #[test]
    fn dphi_medium_at_saturation_boundary_reduces_to_power_law() {
        let params = DphiParams {
            sigma_r2: 5.0,
            ..weak_dphi_params()
        };
        let medium = dphi(&params, 0.2, TurbulenceRegime::Medium).unwrap();
        let weak = dphi(&params, 0.2, TurbulenceRegime::Weak).unwrap();
        assert_relative_eq!(medium, weak, max_relative = 1e-12);
    }

    #[test]
    fn dphi_rejects_strong_regime() {
        assert!(dphi(&weak_dphi_params(), 0.1, TurbulenceRegime::Strong).is_err());
    }

    #[test]
    fn dphi_is_monotone_in_radius() {
        for (params, regime) in [
            (weak_dphi_params(), TurbulenceRegime::Weak),
            (medium_dphi_params(), TurbulenceRegime::Medium),
        ] {
            let mut last = -1.0;
            for i in 0..20 {
                let r = 0.05 * i as f64;
                let d = dphi(&params, r, regime).unwrap();
                assert!(d >= last, "D_phi not monotone at r={r}");
                last = d;
            }
        }
    }

    #[test]
    fn local_params_unperturbed_weak_channel_is_identity() {
        let p = local_params(0.0, TurbulenceRegime::Weak, &unit_axis(), &weak_dphi_params())
            .unwrap();
        assert_eq!(p.lambda_r, 0.0);
        assert_eq!(p.rbar2_r, 1.0);
    }

    #[test]
    fn weak_lambda_hand_value_at_dphi_two() {
        assert_abs_diff_eq!(weak_lambda(2.0), 0.316060, epsilon = 1e-6);
        assert_relative_eq!(
            weak_lambda(2.0),
            0.5 * (1.0 - (-1.0f64).exp()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn strong_regime_local_params_are_fully_depolarized() {
        for r in [0.0, 0.3, 2.0] {
            let p = local_params(r, TurbulenceRegime::Strong, &unit_axis(), &weak_dphi_params())
                .unwrap();
            assert_eq!((p.lambda_r, p.rbar2_r), (1.0, 0.0));
        }
    }

    #[test]
    fn medium_law_matches_weak_law_at_alpha_one() {
        for i in 0..50 {
            let d = 0.3 * i as f64;
            assert_abs_diff_eq!(medium_lambda(d, 1.0), weak_lambda(d), epsilon = 1e-15);
        }
    }

    #[test]
    fn radial_weight_without_drift_is_rayleigh_like() {
        let w_z = 0.2;
        let got = radial_weight(0.3, 0.0, w_z).unwrap();
        let expected = 4.0 * 0.3 / (w_z * w_z) * (-2.0 * 0.09 / (w_z * w_z)).exp();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
    }

    #[test]
    fn radial_weight_survives_large_arguments() {
        let w_z = 0.1;
        let w = radial_weight(1.0, 1.0, w_z).unwrap();
        assert!(w.is_finite() && w > 0.0, "scaled Bessel must not overflow");
    }

    #[test]
    fn radial_weight_normalizes_over_the_half_line() {
        let w_z = 0.15;
        for ratio in [0.0, 0.5, 1.0, 3.0] {
            let r_d = ratio * w_z;
            let upper = r_d + 12.0 * w_z;
            let total = quad::integrate_with_breakpoints(
                |r| radial_weight(r, r_d, w_z).unwrap(),
                0.0,
                upper,
                &[r_d.max(0.01 * w_z)],
                1e-12,
                1e-14,
            )
            .unwrap();
            assert_abs_diff_eq!(total.value, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn aperture_average_of_unperturbed_channel_is_identity() {
        let vacuum = DphiParams {
            cn2_avg: 0.0,
            sigma_r2: 0.0,
            fried_r0_m: f64::INFINITY,
            ..weak_dphi_params()
        };
        let p = aperture_average(0.05, 0.6, TurbulenceRegime::Weak, &unit_axis(), &vacuum, 0.2)
            .unwrap();
        assert_abs_diff_eq!(p.lambda_a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.r2_a, 1.0, epsilon = 1e-12);
        assert!(!p.negligible_capture);
    }

    #[test]
    fn aperture_average_is_bounded_by_the_rim_value() {
        // λ(r) increases with r, so its aperture mean cannot exceed λ(a).
        let params = weak_dphi_params();
        let axis = unit_axis();
        let p = aperture_average(0.1, 0.5, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
        let rim = local_params(0.5, TurbulenceRegime::Weak, &axis, &params).unwrap();
        assert!(p.lambda_a <= rim.lambda_r + 1e-12);
        assert!(p.lambda_a > 0.0);
    }

    #[test]
    fn aperture_average_flags_negligible_capture() {
        let params = weak_dphi_params();
        let axis = unit_axis();
        let p = aperture_average(5.0, 0.5, TurbulenceRegime::Weak, &axis, &params, 0.1).unwrap();
        assert!(p.negligible_capture);
        let rim = local_params(0.5, TurbulenceRegime::Weak, &axis, &params).unwrap();
        assert_abs_diff_eq!(p.lambda_a, rim.lambda_r, epsilon = 1e-15);
        assert_abs_diff_eq!(p.r2_a, rim.rbar2_r, epsilon = 1e-15);
    }

    #[test]
    fn aperture_average_strong_regime_is_constant() {
        for r_d in [0.0, 0.3, 10.0] {
            let p = aperture_average(
                r_d,
                0.5,
                TurbulenceRegime::Strong,
                &unit_axis(),
                &weak_dphi_params(),
                0.2,
            )
            .unwrap();
            assert_eq!((p.lambda_a, p.r2_a), (1.0, 0.0));
        }
    }

    #[test]
    fn drift_average_with_zero_variance_equals_on_axis_aperture_average() {
        let params = weak_dphi_params();
        let axis = unit_axis();
        let eff = drift_average(0.5, 0.0, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
        let on_axis =
            aperture_average(0.0, 0.5, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
        assert_eq!(eff.lambda_eff, on_axis.lambda_a);
        assert_eq!(eff.r2_eff, on_axis.r2_a);
    }

    #[test]
    fn drift_average_with_tiny_variance_matches_zero_variance_limit() {
        let params = weak_dphi_params();
        let axis = unit_axis();
        let tiny =
            drift_average(0.5, 1e-30, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
        let zero = drift_average(0.5, 0.0, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
        assert_abs_diff_eq!(tiny.lambda_eff, zero.lambda_eff, epsilon = 1e-10);
        assert_abs_diff_eq!(tiny.r2_eff, zero.r2_eff, epsilon = 1e-10);
    }

    #[test]
    fn drift_average_of_constant_params_is_the_constant() {
        let eff = drift_average(
            0.5,
            1e-4,
            TurbulenceRegime::Strong,
            &unit_axis(),
            &weak_dphi_params(),
            0.2,
        )
        .unwrap();
        assert_eq!((eff.lambda_eff, eff.r2_eff), (1.0, 0.0));
    }

    #[test]
    fn drift_average_grows_with_turbulence_strength() {
        let axis = unit_axis();
        let mut last = -1.0;
        for cn2 in [1e-15, 5e-15, 2e-14] {
            let params = DphiParams {
                cn2_avg: cn2,
                ..weak_dphi_params()
            };
            let eff =
                drift_average(0.5, 1e-4, TurbulenceRegime::Weak, &axis, &params, 0.2).unwrap();
            assert!(
                eff.lambda_eff > last - 1e-9,
                "lambda_eff not monotone at Cn2={cn2}"
            );
            last = eff.lambda_eff;
        }
    }

    #[test]
    fn stronger_phase_suppression_lowers_the_effective_depolarization() {
        let axis = unit_axis();
        let base = weak_dphi_params();
        let corrected = DphiParams { scale: 0.4, ..base };
        let without =
            drift_average(0.5, 1e-4, TurbulenceRegime::Weak, &axis, &base, 0.2).unwrap();
        let with =
            drift_average(0.5, 1e-4, TurbulenceRegime::Weak, &axis, &corrected, 0.2).unwrap();
        assert!(with.lambda_eff < without.lambda_eff);
    }

    #[test]
    fn apply_channel_identity_leaves_state_unchanged() {
        let rho = PolState::diagonal();
        let out = apply_channel(
            &rho,
            &EffectivePolParams {
                lambda_eff: 0.0,
                r2_eff: 1.0,
            },
        )
        .unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn apply_channel_full_depolarization_gives_maximally_mixed() {
        for state in [PolState::horizontal(), PolState::diagonal(), PolState::circular()] {
            let out = apply_channel(
                &state,
                &EffectivePolParams {
                    lambda_eff: 1.0,
                    r2_eff: 0.0,
                },
            )
            .unwrap();
            assert_abs_diff_eq!(out.rho[0][0].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(out.rho[1][1].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(out.rho[0][1].norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn apply_channel_hand_value_on_diagonal_state() {
        let out = apply_channel(
            &PolState::diagonal(),
            &EffectivePolParams {
                lambda_eff: 0.2,
                r2_eff: 0.5,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(out.rho[0][0].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rho[1][1].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rho[0][1].re, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rho[0][1].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn su2_identity_and_full_turn_leave_state_unchanged() {
        let rho = PolState::circular();
        let axis = [0.0, 1.0, 0.0];
        let same = su2_apply(&rho, 0.0, axis).unwrap();
        let turned = su2_apply(&rho, 2.0 * std::f64::consts::PI, axis).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!((same.rho[i][j] - rho.rho[i][j]).norm(), 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(
                    (turned.rho[i][j] - rho.rho[i][j]).norm(),
                    0.0,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn su2_pi_rotation_about_x_swaps_h_and_v() {
        let out = su2_apply(&PolState::horizontal(), std::f64::consts::PI, [1.0, 0.0, 0.0])
            .unwrap();
        assert_abs_diff_eq!(out.rho[0][0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rho[1][1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn su2_rejects_non_unit_axis() {
        assert!(su2_apply(&PolState::horizontal(), 1.0, [1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn apply_ao_identity_profile_changes_nothing() {
        let adjusted = apply_ao(0.2, 3e-4, &AoProfile::disabled()).unwrap();
        assert_eq!(adjusted.beam_radius_m, 0.2);
        assert_eq!(adjusted.drift_variance_m2, 3e-4);
        assert_eq!(adjusted.dphi_scale, 1.0);
    }

    #[test]
    fn apply_ao_medium_profile_scales_as_documented() {
        let ao = AoProfile {
            rho_trk: 0.5,
            kappa_w: 0.8,
            kappa_phi: 0.6,
        };
        let adjusted = apply_ao(0.2, 4e-4, &ao).unwrap();
        assert_relative_eq!(adjusted.drift_variance_m2, 1e-4, max_relative = 1e-15);
        assert_relative_eq!(adjusted.beam_radius_m, 0.16, max_relative = 1e-15);
        assert_eq!(adjusted.dphi_scale, 0.6);
    }

    #[test]
    fn apply_ao_rejects_out_of_range_factors() {
        let bad = AoProfile {
            rho_trk: 0.0,
            kappa_w: 0.8,
            kappa_phi: 0.6,
        };
        assert!(apply_ao(0.2, 4e-4, &bad).is_err());
        let oversized = AoProfile {
            rho_trk: 0.5,
            kappa_w: 1.2,
            kappa_phi: 0.6,
        };
        assert!(apply_ao(0.2, 4e-4, &oversized).is_err());
    }

    prop_compose! {
        fn arb_state()(
            theta in 0.0..std::f64::consts::PI,
            phi in 0.0..(2.0 * std::f64::consts::PI),
            purity in 0.0..1.0f64,
        ) -> PolState {
            let amp_h = Complex64::new((0.5 * theta).cos(), 0.0);
            let amp_v = Complex64::from_polar((0.5 * theta).sin(), phi);
            let pure = PolState::pure(amp_h, amp_v);
            let mut rho = pure.rho;
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] *= purity;
                }
            }
            rho[0][0] += 0.5 * (1.0 - purity);
            rho[1][1] += 0.5 * (1.0 - purity);
            PolState { rho }
        }
    }

    proptest! {
        #[test]
        fn channel_output_is_a_valid_state(
            state in arb_state(),
            lambda in 0.0..=1.0f64,
            r2 in 0.0..=1.0f64,
        ) {
            let out = apply_channel(
                &state,
                &EffectivePolParams { lambda_eff: lambda, r2_eff: r2 },
            ).unwrap();
            prop_assert!(out.validate().is_ok());
        }

        #[test]
        fn su2_preserves_trace_and_spectrum(
            state in arb_state(),
            theta in -10.0..10.0f64,
            raw_axis in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let norm = (raw_axis[0].powi(2) + raw_axis[1].powi(2) + raw_axis[2].powi(2)).sqrt();
            prop_assume!(norm > 1e-3);
            let axis = [raw_axis[0] / norm, raw_axis[1] / norm, raw_axis[2] / norm];
            let out = su2_apply(&state, theta, axis).unwrap();
            prop_assert!((out.trace().re - 1.0).abs() < 1e-12);
            let (in_lo, in_hi) = state.eigenvalues();
            let (out_lo, out_hi) = out.eigenvalues();
            prop_assert!((in_lo - out_lo).abs() < 1e-12);
            prop_assert!((in_hi - out_hi).abs() < 1e-12);
        }

        #[test]
        fn weak_lambda_is_bounded_by_half(d in 0.0..1e3f64) {
            let lambda = weak_lambda(d);
            prop_assert!((0.0..=0.5).contains(&lambda));
        }

        #[test]
        fn local_params_stay_in_the_unit_square(
            r in 0.0..2.0f64,
            kappa in 0.0..50.0f64,
            medium in proptest::bool::ANY,
        ) {
            let (params, regime) = if medium {
                (medium_dphi_params(), TurbulenceRegime::Medium)
            } else {
                (weak_dphi_params(), TurbulenceRegime::Weak)
            };
            let p = local_params(r, regime, &AxisModel { kappa }, &params).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.lambda_r));
            prop_assert!((0.0..=1.0).contains(&p.rbar2_r));
        }

        #[test]
        fn aperture_average_stays_in_the_unit_square(
            r_d in 0.0..1.0f64,
            medium in proptest::bool::ANY,
        ) {
            let (params, regime) = if medium {
                (medium_dphi_params(), TurbulenceRegime::Medium)
            } else {
                (weak_dphi_params(), TurbulenceRegime::Weak)
            };
            let p = aperture_average(r_d, 0.5, regime, &unit_axis(), &params, 0.15).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.lambda_a));
            prop_assert!((0.0..=1.0).contains(&p.r2_a));
        }
    }
}
