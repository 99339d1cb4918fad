//! Brute-force Monte Carlo reference for the composite polarization channel.
//!
//! Every closed form in the library ultimately claims to be an average over
//! the link's physical randomness: the Rayleigh-distributed beam-centroid
//! drift, the Rician transverse radius of the photon inside the drifted
//! Gaussian beam, the Watson-distributed rotation axis, the regime-dependent
//! rotation angle, and the gamma–gamma scintillation factor. This module
//! samples all of them directly — no quadrature anywhere — and estimates the
//! effective depolarization weight, coherence factor, and aperture efficiency
//! with standard errors, so the nested quadratures of the closed-form chain
//! can be validated end to end.
//!
//! The estimators use the per-sample functional weights that define the
//! closed-form convention: the Gaussian angle branch contributes
//! `λ_w = sin²(θ/2)` and the axial-moment coherence transfer, the uniform
//! branch contributes complete depolarization (1, 0). Each sample also
//! conjugates four probe states by the explicit SU(2) rotation; the averaged
//! outputs feed a least-squares Bloch fit that is reported as a diagnostic
//! (the raw rotation average is not the same two-parameter family — the
//! functional weights are the defined convention).
//!
//! Sampling is batched: batch `i` draws from an independent counter-based
//! substream of the seeded generator, and batch results are reduced in index
//! order, so parallel and sequential runs produce bit-identical estimates.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, OpenClosed01, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::atmosphere::TurbulenceRegime;
use crate::detection::{self, ScintillationShape};
use crate::polchannel::{
    self, mixture_alpha, mu_parallel, rbar2_from_lambda, su2_apply, AxisModel, DphiParams,
    EffectivePolParams, PolState,
};
use crate::{Error, Result};

/// Samples per RNG substream; batches reduce in index order so the parallel
/// and sequential schedulers produce bit-identical sums.
pub const BATCH_SIZE: u64 = 4096;
/// Upper limit on redraws of the transverse radius when conditioning on
/// capture; beams that essentially miss the aperture fall back to the rim.
pub const RESAMPLE_CAP: u32 = 10_000;
/// Concentrations below this sample the isotropic sphere directly — the
/// inverse CDF loses all significance as κ → 0.
const KAPPA_UNIFORM_THRESHOLD: f64 = 1e-8;
/// Comparisons pass at `|Δ| ≤ max(3·stderr, ABS_TOLERANCE_FLOOR)`.
pub const ABS_TOLERANCE_FLOOR: f64 = 5e-3;
/// The z-score threshold shared by the comparison report and the
/// scintillation-neutrality check.
pub const Z_THRESHOLD: f64 = 3.0;

/// Everything the sampler needs to realize the channel: the derived
/// turbulence regime and phase-structure inputs, the rotation-axis model,
/// the (adaptive-optics-adjusted) beam radius and drift variance, the
/// receiver aperture, and the scintillation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub regime: TurbulenceRegime,
    pub axis: AxisModel,
    pub dphi: DphiParams,
    pub beam_radius_m: f64,
    pub sigma_drift2_m2: f64,
    pub aperture_radius_m: f64,
    pub scintillation: ScintillationShape,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis.validate()?;
        self.dphi.validate()?;
        self.scintillation.validate()?;
        if !(self.beam_radius_m > 0.0) || !self.beam_radius_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "beam radius must be positive and finite, got {}",
                self.beam_radius_m
            )));
        }
        if !(self.sigma_drift2_m2 >= 0.0) || !self.sigma_drift2_m2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "drift variance must be non-negative and finite, got {}",
                self.sigma_drift2_m2
            )));
        }
        if !(self.aperture_radius_m > 0.0) || !self.aperture_radius_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "aperture radius must be positive and finite, got {}",
                self.aperture_radius_m
            )));
        }
        Ok(())
    }
}

/// A Monte Carlo run request: sample count, seed, and the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub channel: ChannelSpec,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput(
                "need at least one Monte Carlo sample".into(),
            ));
        }
        self.channel.validate()
    }
}

/// Monte Carlo estimates with standard errors and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Estimated depolarization weight, projected into [0, 1].
    pub lambda_hat: f64,
    pub lambda_stderr: f64,
    /// Estimated coherence factor, projected into [0, 1].
    pub r2_hat: f64,
    pub r2_stderr: f64,
    /// Estimated aperture efficiency (first-draw capture fraction).
    pub eta_hat: f64,
    pub eta_stderr: f64,
    /// Diagnostic: depolarization weight of the least-squares Bloch fit to
    /// the averaged conjugated probe states.
    pub lambda_fit: f64,
    /// Diagnostic: coherence factor of the same fit.
    pub r2_fit: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// First-draw captures (the numerator of `eta_hat`).
    pub n_accepted: u64,
    /// Samples whose conditioned radius hit [`RESAMPLE_CAP`] and fell back
    /// to the aperture rim.
    pub resample_exhausted: u64,
    /// Conjugated probe states that failed the Hermitian/trace/PSD check
    /// (expected to stay at zero).
    pub state_violations: u64,
    /// No first draw landed inside the aperture; `eta_hat` is exactly zero.
    pub zero_acceptance: bool,
    /// Set alongside `zero_acceptance`: the polarization estimates then rest
    /// entirely on rim-fallback radii and should not be trusted.
    pub polarization_undefined: bool,
}

/// Outcome of the scintillation-neutrality check: the shift of each
/// polarization estimate when samples are reweighted by an independently
/// drawn unit-mean scintillation factor, with paired z-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralityReport {
    pub delta_lambda: f64,
    pub z_lambda: f64,
    pub delta_r2: f64,
    pub z_r2: f64,
    pub pass: bool,
}

/// One closed-form-versus-Monte-Carlo comparison line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub quantity: String,
    pub closed: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub delta: f64,
    pub z: f64,
    pub pass: bool,
}

/// Machine-readable validation report for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
    pub all_pass: bool,
}

/// Which angle law a sample drew from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleBranch {
    /// Gaussian angle of variance D_φ; partial dephasing.
    Gaussian,
    /// Uniform angle standing in for the fully depolarizing component.
    Uniform,
}

/// Draws a rotation axis from the axial density ∝ e^{κ·cosϑ} via the closed
/// inverse CDF `cosϑ = 1 + ln(u + (1−u)e^{−2κ})/κ`, with the azimuth uniform.
/// κ = 0 degenerates to the uniform sphere. The result is unit length to
/// machine precision.
pub fn sample_watson_axis<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> [f64; 3] {
    debug_assert!(kappa >= 0.0, "axis concentration must be non-negative");
    let u: f64 = rng.gen();
    let cos_theta = if kappa < KAPPA_UNIFORM_THRESHOLD {
        2.0 * u - 1.0
    } else {
        (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
    };
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    [sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta]
}

/// Draws a rotation angle for the given regime and reports which branch of
/// the medium-regime mixture produced it: weak is always the zero-mean
/// Gaussian of variance `d_phi`; medium takes the Gaussian with probability
/// `alpha_mix` and the uniform circle otherwise; strong is always uniform.
pub fn sample_angle_with_branch<R: Rng + ?Sized>(
    regime: TurbulenceRegime,
    d_phi: f64,
    alpha_mix: f64,
    rng: &mut R,
) -> (f64, AngleBranch) {
    debug_assert!(d_phi >= 0.0, "phase structure function must be non-negative");
    let gaussian = match regime {
        TurbulenceRegime::Weak => true,
        TurbulenceRegime::Medium => rng.gen::<f64>() < alpha_mix,
        TurbulenceRegime::Strong => false,
    };
    if gaussian {
        let z: f64 = rng.sample(StandardNormal);
        (z * d_phi.sqrt(), AngleBranch::Gaussian)
    } else {
        (rng.gen::<f64>() * std::f64::consts::TAU, AngleBranch::Uniform)
    }
}

/// Rotation angle alone, for callers that do not need the branch.
pub fn sample_angle<R: Rng + ?Sized>(
    regime: TurbulenceRegime,
    d_phi: f64,
    alpha_mix: f64,
    rng: &mut R,
) -> f64 {
    sample_angle_with_branch(regime, d_phi, alpha_mix, rng).0
}

/// Rayleigh draw by inverse CDF; the open-closed unit draw keeps the
/// logarithm finite.
fn sample_rayleigh<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(OpenClosed01);
    sigma * (-2.0 * u.ln()).sqrt()
}

/// Draws the photon's transverse radius inside a Gaussian beam of radius
/// `w_z` whose center sits at `r_drift_m`: the radial law W(r; r_d, w) is
/// exactly a Rice distribution with ν = r_d and scale w/2, so the draw is
/// the modulus of a displaced circular Gaussian.
pub fn sample_rice_radius<R: Rng + ?Sized>(r_drift_m: f64, w_z: f64, rng: &mut R) -> f64 {
    debug_assert!(r_drift_m >= 0.0 && w_z > 0.0);
    let sigma = 0.5 * w_z;
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    (r_drift_m + sigma * gx).hypot(sigma * gy)
}

/// Raw sums accumulated per batch and merged in batch order.
#[derive(Clone, Copy)]
struct Totals {
    samples: u64,
    accepts: u64,
    resample_exhausted: u64,
    state_violations: u64,
    s_l: f64,
    s_ll: f64,
    s_r: f64,
    s_rr: f64,
    s_w: f64,
    s_ww: f64,
    s_wl: f64,
    s_wwl: f64,
    s_wll: f64,
    s_wwll: f64,
    s_wr: f64,
    s_wwr: f64,
    s_wrr: f64,
    s_wwrr: f64,
    probes: [[[Complex64; 2]; 2]; 4],
}

impl Totals {
    fn zero() -> Self {
        Totals {
            samples: 0,
            accepts: 0,
            resample_exhausted: 0,
            state_violations: 0,
            s_l: 0.0,
            s_ll: 0.0,
            s_r: 0.0,
            s_rr: 0.0,
            s_w: 0.0,
            s_ww: 0.0,
            s_wl: 0.0,
            s_wwl: 0.0,
            s_wll: 0.0,
            s_wwll: 0.0,
            s_wr: 0.0,
            s_wwr: 0.0,
            s_wrr: 0.0,
            s_wwrr: 0.0,
            probes: [[[Complex64::new(0.0, 0.0); 2]; 2]; 4],
        }
    }

    fn merge(&mut self, other: &Totals) {
        self.samples += other.samples;
        self.accepts += other.accepts;
        self.resample_exhausted += other.resample_exhausted;
        self.state_violations += other.state_violations;
        self.s_l += other.s_l;
        self.s_ll += other.s_ll;
        self.s_r += other.s_r;
        self.s_rr += other.s_rr;
        self.s_w += other.s_w;
        self.s_ww += other.s_ww;
        self.s_wl += other.s_wl;
        self.s_wwl += other.s_wwl;
        self.s_wll += other.s_wll;
        self.s_wwll += other.s_wwll;
        self.s_wr += other.s_wr;
        self.s_wwr += other.s_wwr;
        self.s_wrr += other.s_wrr;
        self.s_wwrr += other.s_wwrr;
        for k in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    self.probes[k][i][j] += other.probes[k][i][j];
                }
            }
        }
    }
}

/// One batch of samples from substream `batch` of the seeded generator.
///
/// Per-sample draw order (fixed; determinism depends on it): drift radius,
/// first transverse radius (capture trial), conditional redraws, rotation
/// axis, branch/angle, scintillation factor.
fn run_batch(mc: &McConfig, batch: u64, mu_par: f64, alpha_mix: f64) -> Result<Totals> {
    let ch = &mc.channel;
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(batch);
    let start = batch * BATCH_SIZE;
    let count = BATCH_SIZE.min(mc.n_samples - start);

    let drift_sigma = ch.sigma_drift2_m2.sqrt();
    let scint = match ch.scintillation {
        ScintillationShape::Deterministic => None,
        ScintillationShape::GammaGamma {
            alpha_gg, beta_gg, ..
        } => {
            let large = Gamma::new(alpha_gg, 1.0 / alpha_gg).map_err(|e| {
                Error::InvalidInput(format!("large-scale gamma rejected shape: {e}"))
            })?;
            let small = Gamma::new(beta_gg, 1.0 / beta_gg).map_err(|e| {
                Error::InvalidInput(format!("small-scale gamma rejected shape: {e}"))
            })?;
            Some((large, small))
        }
    };
    let probes = [
        PolState::horizontal(),
        PolState::vertical(),
        PolState::diagonal(),
        PolState::circular(),
    ];

    let mut totals = Totals::zero();
    for _ in 0..count {
        let r_drift = if drift_sigma > 0.0 {
            sample_rayleigh(drift_sigma, &mut rng)
        } else {
            0.0
        };
        let first = sample_rice_radius(r_drift, ch.beam_radius_m, &mut rng);
        let accepted = first <= ch.aperture_radius_m;
        if accepted {
            totals.accepts += 1;
        }
        // The polarization average conditions on capture, so redraw until
        // the radius lands inside the aperture (rim fallback past the cap).
        let mut radius = first;
        if !accepted {
            let mut tries = 0u32;
            loop {
                let r = sample_rice_radius(r_drift, ch.beam_radius_m, &mut rng);
                tries += 1;
                if r <= ch.aperture_radius_m {
                    radius = r;
                    break;
                }
                if tries >= RESAMPLE_CAP {
                    radius = ch.aperture_radius_m;
                    totals.resample_exhausted += 1;
                    break;
                }
            }
        }

        let axis = sample_watson_axis(ch.axis.kappa, &mut rng);
        let d_phi = if ch.regime == TurbulenceRegime::Strong {
            0.0
        } else {
            polchannel::dphi(&ch.dphi, radius, ch.regime)?
        };
        let (theta, branch) = sample_angle_with_branch(ch.regime, d_phi, alpha_mix, &mut rng);
        let (lambda_w, r2_w) = match branch {
            AngleBranch::Gaussian => {
                let s = (0.5 * theta).sin();
                let lambda = s * s;
                (lambda, rbar2_from_lambda(lambda, mu_par))
            }
            AngleBranch::Uniform => (1.0, 0.0),
        };
        let weight = match &scint {
            Some((large, small)) => large.sample(&mut rng) * small.sample(&mut rng),
            None => 1.0,
        };

        totals.samples += 1;
        totals.s_l += lambda_w;
        totals.s_ll += lambda_w * lambda_w;
        totals.s_r += r2_w;
        totals.s_rr += r2_w * r2_w;
        totals.s_w += weight;
        totals.s_ww += weight * weight;
        totals.s_wl += weight * lambda_w;
        totals.s_wwl += weight * weight * lambda_w;
        totals.s_wll += weight * lambda_w * lambda_w;
        totals.s_wwll += weight * weight * lambda_w * lambda_w;
        totals.s_wr += weight * r2_w;
        totals.s_wwr += weight * weight * r2_w;
        totals.s_wrr += weight * r2_w * r2_w;
        totals.s_wwrr += weight * weight * r2_w * r2_w;
        for (k, probe) in probes.iter().enumerate() {
            match su2_apply(probe, theta, axis) {
                Ok(state) => {
                    for i in 0..2 {
                        for j in 0..2 {
                            totals.probes[k][i][j] += state.rho[i][j];
                        }
                    }
                }
                Err(_) => totals.state_violations += 1,
            }
        }
    }
    Ok(totals)
}

/// Runs every batch and reduces the partial sums in batch order. The batch
/// loop is data-parallel when the `parallel` feature is enabled and a plain
/// sequential fold otherwise; both produce bit-identical totals.
fn run_all(mc: &McConfig) -> Result<Totals> {
    let mu_par = mu_parallel(mc.channel.axis.kappa)?;
    let alpha_mix = mixture_alpha(mc.channel.dphi.sigma_r2);
    let n_batches = mc.n_samples.div_ceil(BATCH_SIZE);

    #[cfg(feature = "parallel")]
    let partials: Vec<Result<Totals>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| run_batch(mc, batch, mu_par, alpha_mix))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<Totals>> = (0..n_batches)
        .map(|batch| run_batch(mc, batch, mu_par, alpha_mix))
        .collect();

    let mut totals = Totals::zero();
    for partial in partials {
        totals.merge(&partial?);
    }
    Ok(totals)
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    (mean, (variance / n).sqrt())
}

/// Least-squares fit of the averaged probe outputs to the diagonal Bloch
/// family b ↦ (a⊥·bx, a⊥·by, a_z·bz), returned as (λ_fit, r²_fit).
fn bloch_fit(totals: &Totals) -> (f64, f64) {
    if totals.samples == 0 {
        return (0.0, 0.0);
    }
    let n = totals.samples as f64;
    let out_bloch = |k: usize| -> [f64; 3] {
        let m = &totals.probes[k];
        [
            2.0 * m[0][1].re / n,
            -2.0 * m[0][1].im / n,
            (m[0][0].re - m[1][1].re) / n,
        ]
    };
    let in_bloch = [
        PolState::horizontal().bloch(),
        PolState::vertical().bloch(),
        PolState::diagonal().bloch(),
        PolState::circular().bloch(),
    ];
    // a_z from the z-components of the H/V pair, a⊥ from the transverse
    // components of the |+⟩ / |+i⟩ pair; each is a one-parameter LS slope.
    let a_z = (out_bloch(0)[2] * in_bloch[0][2] + out_bloch(1)[2] * in_bloch[1][2])
        / (in_bloch[0][2].powi(2) + in_bloch[1][2].powi(2));
    let a_perp = (out_bloch(2)[0] * in_bloch[2][0] + out_bloch(3)[1] * in_bloch[3][1])
        / (in_bloch[2][0].powi(2) + in_bloch[3][1].powi(2));
    let lambda_fit = 1.0 - a_z;
    let r2_fit = if a_z.abs() > 1e-9 { a_perp / a_z } else { 0.0 };
    (lambda_fit, r2_fit)
}

/// Estimates the effective channel parameters and aperture efficiency by
/// direct sampling. The polarization estimates average the per-sample
/// functional weights over captured radii; the efficiency is the first-draw
/// capture fraction (the independently sampled scintillation factor has unit
/// mean and cancels from polarization normalization — see
/// [`neutrality_check`]).
pub fn mc_channel_estimate(mc: &McConfig) -> Result<McEstimate> {
    mc.validate()?;
    let totals = run_all(mc)?;
    let n = totals.samples as f64;
    let (lambda_mean, lambda_stderr) = mean_and_stderr(totals.s_l, totals.s_ll, n);
    let (r2_mean, r2_stderr) = mean_and_stderr(totals.s_r, totals.s_rr, n);
    let eta_hat = totals.accepts as f64 / n;
    let eta_stderr = (eta_hat * (1.0 - eta_hat) / n).sqrt();
    let (lambda_fit, r2_fit) = bloch_fit(&totals);
    let zero_acceptance = totals.accepts == 0;
    Ok(McEstimate {
        lambda_hat: lambda_mean.clamp(0.0, 1.0),
        lambda_stderr,
        r2_hat: r2_mean.clamp(0.0, 1.0),
        r2_stderr,
        eta_hat,
        eta_stderr,
        lambda_fit,
        r2_fit,
        n_samples: mc.n_samples,
        seed: mc.seed,
        n_accepted: totals.accepts,
        resample_exhausted: totals.resample_exhausted,
        state_violations: totals.state_violations,
        zero_acceptance,
        polarization_undefined: zero_acceptance,
    })
}

/// Paired shift-and-z of a weighted versus unweighted sample mean. The
/// statistic is exact (`Δ = Σwx/Σw − Σx/n`) and its standard error comes
/// from the per-sample influence values `h = (w−w̄)(x−x̄)/w̄`, whose mean
/// equals Δ.
#[allow(clippy::too_many_arguments)]
fn weighted_shift(
    n: f64,
    s_w: f64,
    s_ww: f64,
    s_x: f64,
    s_xx: f64,
    s_wx: f64,
    s_wwx: f64,
    s_wxx: f64,
    s_wwxx: f64,
) -> (f64, f64) {
    if s_w <= 0.0 {
        return (0.0, 0.0);
    }
    let w_bar = s_w / n;
    let x_bar = s_x / n;
    let delta = s_wx / s_w - x_bar;
    // Σ (w−w̄)²(x−x̄)², expanded over the raw sums.
    let central = s_wwxx - 2.0 * x_bar * s_wwx + x_bar * x_bar * s_ww
        - 2.0 * w_bar * s_wxx
        + 4.0 * w_bar * x_bar * s_wx
        - 2.0 * w_bar * x_bar * x_bar * s_w
        + w_bar * w_bar * s_xx
        - 2.0 * w_bar * w_bar * x_bar * s_x
        + n * w_bar * w_bar * x_bar * x_bar;
    let var_h = (central / (w_bar * w_bar) / n - delta * delta).max(0.0);
    let stderr = (var_h / n).sqrt();
    let z = if stderr > 0.0 {
        (delta / stderr).abs()
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (delta, z)
}

/// Tests that reweighting the polarization estimators by the independently
/// sampled scintillation factor leaves them statistically unchanged — the
/// sampling-side statement that scintillation cancels from polarization
/// normalization. Both estimates come from the same samples, so the z-score
/// is properly paired.
pub fn neutrality_check(mc: &McConfig) -> Result<NeutralityReport> {
    mc.validate()?;
    let totals = run_all(mc)?;
    let n = totals.samples as f64;
    let (delta_lambda, z_lambda) = weighted_shift(
        n, totals.s_w, totals.s_ww, totals.s_l, totals.s_ll, totals.s_wl, totals.s_wwl,
        totals.s_wll, totals.s_wwll,
    );
    let (delta_r2, z_r2) = weighted_shift(
        n, totals.s_w, totals.s_ww, totals.s_r, totals.s_rr, totals.s_wr, totals.s_wwr,
        totals.s_wrr, totals.s_wwrr,
    );
    Ok(NeutralityReport {
        delta_lambda,
        z_lambda,
        delta_r2,
        z_r2,
        pass: z_lambda < Z_THRESHOLD && z_r2 < Z_THRESHOLD,
    })
}

/// The closed-form counterpart of [`mc_channel_estimate`]: the quadrature
/// drift average of the polarization parameters and the aperture efficiency.
pub fn closed_form_reference(channel: &ChannelSpec) -> Result<(EffectivePolParams, f64)> {
    channel.validate()?;
    let pol = polchannel::drift_average(
        channel.aperture_radius_m,
        channel.sigma_drift2_m2,
        channel.regime,
        &channel.axis,
        &channel.dphi,
        channel.beam_radius_m,
    )?;
    let eta = detection::eta_eff(
        channel.sigma_drift2_m2,
        channel.aperture_radius_m,
        channel.beam_radius_m,
        &channel.scintillation,
    )?;
    Ok((pol, eta))
}

fn comparison_entry(quantity: &str, closed: f64, estimate: f64, stderr: f64) -> ComparisonEntry {
    let delta = estimate - closed;
    let z = if stderr > 0.0 {
        (delta / stderr).abs()
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let pass = delta.abs() <= (Z_THRESHOLD * stderr).max(ABS_TOLERANCE_FLOOR);
    ComparisonEntry {
        quantity: quantity.to_owned(),
        closed,
        estimate,
        stderr,
        delta,
        z,
        pass,
    }
}

/// Compares closed-form parameters against a Monte Carlo estimate quantity
/// by quantity: each line passes when the discrepancy is within three
/// standard errors or the absolute floor, whichever is larger.
pub fn compare_report(
    closed: &EffectivePolParams,
    eta_closed: f64,
    mc: &McEstimate,
) -> ComparisonReport {
    let entries = vec![
        comparison_entry("lambda_eff", closed.lambda_eff, mc.lambda_hat, mc.lambda_stderr),
        comparison_entry("r2_eff", closed.r2_eff, mc.r2_hat, mc.r2_stderr),
        comparison_entry("eta_eff", eta_closed, mc.eta_hat, mc.eta_stderr),
    ];
    let all_pass = entries.iter().all(|entry| entry.pass);
    ComparisonReport { entries, all_pass }
}
