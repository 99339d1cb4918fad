//! Scaled modified Bessel functions and the log-gamma function.
//!
//! The radial beam density needs `e^{-x} I_0(x)` at arguments well beyond
//! overflow of `I_0` itself, and the Gamma–Gamma intensity law needs
//! `K_nu(x)` across twelve orders of magnitude of argument, so everything
//! here is evaluated in exponentially scaled or logarithmic form:
//!
//! * [`i0_scaled`] — Chebyshev fits on the two classic ranges (|x| ≤ 8 and
//!   beyond), stable for all finite arguments;
//! * [`bessel_k_scaled`] / [`ln_bessel_k_scaled`] — Temme's series for small
//!   arguments, Steed's continued fraction for large ones, and a renormalized
//!   upward recurrence in the order;
//! * [`ln_gamma`] — Lanczos approximation (g = 7, 9 terms) with reflection.
//!
//! All routines are pinned against 30-digit reference values in the tests.

/// Maximum iterations for series/continued-fraction evaluation.
const MAX_ITER: usize = 500;

/// Chebyshev coefficients for `e^{-x} I_0(x)` on `|x| <= 8`, argument
/// mapped through `y = x/2 - 2`.
const BESSI0_COEFFS_A: [f64; 30] = [
    -4.415_341_646_479_339_5e-18,
    3.330_794_518_822_238_4e-17,
    -2.431_279_846_547_955e-16,
    1.715_391_285_555_133e-15,
    -1.168_533_287_799_345_1e-14,
    7.676_185_498_604_936e-14,
    -4.856_446_783_111_929e-13,
    2.955_052_663_129_64e-12,
    -1.726_826_291_441_556e-11,
    9.675_809_035_373_237e-11,
    -5.189_795_601_635_263e-10,
    2.659_823_724_682_386_6e-9,
    -1.300_025_009_986_248e-8,
    6.046_995_022_541_919e-8,
    -2.670_793_853_940_612e-7,
    1.117_387_539_120_103_7e-6,
    -4.416_738_358_458_750_5e-6,
    1.644_844_807_072_889_6e-5,
    -5.754_195_010_082_104e-5,
    1.885_028_850_958_416_5e-4,
    -5.763_755_745_385_824e-4,
    1.639_475_616_941_335_7e-3,
    -4.324_309_995_050_576e-3,
    1.054_646_039_459_499_8e-2,
    -2.373_741_480_589_947e-2,
    4.930_528_423_967_071e-2,
    -9.490_109_704_804_764e-2,
    1.716_209_015_222_087_7e-1,
    -3.046_826_723_431_984e-1,
    6.767_952_744_094_761e-1,
];

/// Chebyshev coefficients for `e^{-x} I_0(x) * sqrt(x)` on `x >= 8`,
/// argument mapped through `y = 32/x - 2`.
const BESSI0_COEFFS_B: [f64; 25] = [
    -7.233_180_487_874_754e-18,
    -4.830_504_485_944_182e-18,
    4.465_621_420_296_76e-17,
    3.461_222_867_697_461e-17,
    -2.827_623_980_516_583_6e-16,
    -3.425_485_619_677_219e-16,
    1.772_560_133_056_526_3e-15,
    3.811_680_669_352_622_4e-15,
    -9.554_846_698_828_307e-15,
    -4.150_569_347_287_222e-14,
    1.540_086_217_521_41e-14,
    3.852_778_382_742_142_6e-13,
    7.180_124_451_383_666e-13,
    -1.794_178_531_506_806_2e-12,
    -1.321_581_184_044_771_3e-11,
    -3.149_916_527_963_241_6e-11,
    1.188_914_710_784_643_9e-11,
    4.940_602_388_224_97e-10,
    3.396_232_025_708_386_5e-9,
    2.266_668_990_498_178e-8,
    2.048_918_589_469_063_8e-7,
    2.891_370_520_834_756_7e-6,
    6.889_758_346_916_825e-5,
    3.369_116_478_255_694_3e-3,
    8.044_904_110_141_088e-1,
];

fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x.mul_add(b1, c) - b2;
    }
    0.5 * (b0 - b2)
}

/// Exponentially scaled modified Bessel function `e^{-|x|} I_0(x)`.
///
/// Finite and in `(0, 1]` for every finite argument; `i0_scaled(0) = 1`.
pub fn i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        chbevl(ax.mul_add(0.5, -2.0), &BESSI0_COEFFS_A)
    } else {
        chbevl(32.0_f64.mul_add(ax.recip(), -2.0), &BESSI0_COEFFS_B) / ax.sqrt()
    }
}

/// Lanczos coefficients (g = 7, 9 terms).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
///
/// Returns NaN outside the positive half-line (the crate never needs the
/// negative axis).
pub fn ln_gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx); sin is positive on (0, 1/2).
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ZETA_2: f64 = 1.644_934_066_848_226_4;
const ZETA_3: f64 = 1.202_056_903_159_594_3;
const ZETA_4: f64 = 1.082_323_233_711_138_2;
const ZETA_5: f64 = 1.036_927_755_143_369_9;

/// Temme's auxiliary gamma combinations for `|mu| <= 0.5`:
/// `gam1 = [1/Γ(1-μ) - 1/Γ(1+μ)]/(2μ)`, `gam2 = [1/Γ(1-μ) + 1/Γ(1+μ)]/2`,
/// plus the reciprocals `1/Γ(1+μ)` and `1/Γ(1-μ)` themselves.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    if mu.abs() < 1e-4 {
        // 1/Γ(1±μ) = exp(±P - Q) with the zeta-series exponents below;
        // the small-|μ| branch avoids the cancellation in gam1.
        let mu2 = mu * mu;
        let p = mu * (EULER_GAMMA + mu2 * (ZETA_3 / 3.0 + mu2 * ZETA_5 / 5.0));
        let q = mu2 * (ZETA_2 / 2.0 + mu2 * ZETA_4 / 4.0);
        let emq = (-q).exp();
        // sinh(P)/μ stays finite as μ → 0: expand sinh once.
        let p_over_mu = EULER_GAMMA + mu2 * (ZETA_3 / 3.0 + mu2 * ZETA_5 / 5.0);
        let sinh_p_over_mu = p_over_mu * (1.0 + p * p / 6.0 + p.powi(4) / 120.0);
        let gam1 = -emq * sinh_p_over_mu;
        let gam2 = emq * p.cosh();
        let gampl = (p - q).exp();
        let gammi = (-p - q).exp();
        (gam1, gam2, gampl, gammi)
    } else {
        let gampl = (-ln_gamma(1.0 + mu)).exp();
        let gammi = (-ln_gamma(1.0 - mu)).exp();
        ((gammi - gampl) / (2.0 * mu), (gammi + gampl) / 2.0, gampl, gammi)
    }
}

/// Temme series for `K_mu(x)` and `K_{mu+1}(x)` with `x <= 2`, `|mu| <= 0.5`,
/// returned in exponentially scaled form (`e^x K`).
fn temme_k_scaled(mu: f64, x: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    debug_assert!(x > 0.0 && x <= 2.0 && mu.abs() <= 0.5);

    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < f64::EPSILON {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < f64::EPSILON {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);

    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let d2 = x2 * x2;
    let mut sum1 = p;

    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d2 / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * f64::EPSILON {
            let scale = x.exp();
            return (sum * scale, sum1 * (2.0 / x) * scale);
        }
    }
    (f64::NAN, f64::NAN)
}

/// Steed's continued fraction for `e^x K_mu(x)` and `e^x K_{mu+1}(x)` with
/// `x > 2`, `|mu| <= 0.5`.
fn cf2_k_scaled(mu: f64, x: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    debug_assert!(x > 2.0 && mu.abs() <= 0.5);

    let mut a = mu.mul_add(mu, -0.25);
    let mut b = 2.0 * (x + 1.0);
    let mut d = b.recip();
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = q.mul_add(delta, 1.0);

    for k in 2..MAX_ITER {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = a.mul_add(d, b).recip();
        delta *= b.mul_add(d, -1.0);
        f += delta;

        let t = (b - 2.0).mul_add(-cur, prev) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;

        if (q * delta).abs() < s.abs() * f64::EPSILON / 2.0 {
            let k_mu = (PI / (2.0 * x)).sqrt() / s;
            let k_mu1 = k_mu * mu.mul_add(mu, -0.25).mul_add(f, 0.5 + mu + x) / x;
            return (k_mu, k_mu1);
        }
    }
    (f64::NAN, f64::NAN)
}

/// Threshold for renormalizing the upward recurrence.
const RENORM: f64 = 1e250;
const LN_RENORM: f64 = 575.646_273_248_511_4; // ln(1e250)

/// Computes `e^x K_nu(x)` as `mantissa * exp(ln_scale)`; `ln_scale` is a
/// multiple of `ln(1e250)` accumulated while recurring upward in the order.
fn k_scaled_parts(nu: f64, x: f64) -> (f64, f64) {
    let nu = nu.abs(); // K is even in the order
    if !(x > 0.0) || !nu.is_finite() {
        return (f64::INFINITY, 0.0);
    }

    let n = nu.round();
    let mu = nu - n;
    let steps = n as u64;

    let (mut k_lo, mut k_hi) = if x <= 2.0 {
        temme_k_scaled(mu, x)
    } else {
        cf2_k_scaled(mu, x)
    };

    let mut ln_scale = 0.0;
    for k in 0..steps {
        let order = mu + k as f64;
        let next = 2.0 * (order + 1.0) / x * k_hi + k_lo;
        k_lo = k_hi;
        k_hi = next;
        if k_hi > RENORM {
            k_lo /= RENORM;
            k_hi /= RENORM;
            ln_scale += LN_RENORM;
        }
    }
    (k_lo, ln_scale)
}

/// Exponentially scaled modified Bessel function of the second kind,
/// `e^x K_nu(x)`, for real order (sign of `nu` is immaterial) and `x > 0`.
///
/// Overflows to `+inf` for very large orders at small arguments; use
/// [`ln_bessel_k_scaled`] in that regime. Non-positive `x` yields `+inf`
/// (the function diverges as `x -> 0+`).
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let (mantissa, ln_scale) = k_scaled_parts(nu, x);
    if ln_scale == 0.0 {
        mantissa
    } else {
        mantissa * ln_scale.exp()
    }
}

/// `ln(e^x K_nu(x))`, finite wherever `K_nu(x)` is positive and finite in
/// extended precision — this covers orders far beyond what
/// [`bessel_k_scaled`] can represent directly.
pub fn ln_bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let (mantissa, ln_scale) = k_scaled_parts(nu, x);
    mantissa.ln() + ln_scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// (x, e^{-x} I_0(x)) reference pairs, 30-digit evaluation.
    const I0_SCALED_REFS: [(f64, f64); 11] = [
        (0.0, 1.0),
        (0.01, 0.9900745851497075),
        (0.5, 0.64503527044915007),
        (1.0, 0.46575960759364044),
        (3.0, 0.2430003541618254),
        (5.0, 0.18354081260932835),
        (8.0, 0.14343178185685031),
        (8.5, 0.1390018430548476),
        (20.0, 0.089780311884826022),
        (100.0, 0.039944379299096683),
        (700.0, 0.015081295651531358),
    ];

    /// (nu, x, e^x K_nu(x)) reference triples, 30-digit evaluation.
    const K_SCALED_REFS: [(f64, f64, f64); 80] = [
        (0.0, 0.01, 4.7686940285444619),
        (0.0, 0.1, 2.6823261022628943),
        (0.0, 0.5, 1.5241093857739095),
        (0.0, 1.0, 1.144463079806895),
        (0.0, 2.0, 0.84156821507077142),
        (0.0, 2.1, 0.82301715253166206),
        (0.0, 5.0, 0.54780756431351899),
        (0.0, 10.0, 0.39163193443659867),
        (0.0, 50.0, 0.17680715585742934),
        (0.0, 200.0, 0.088567458339296658),
        (0.1, 0.01, 4.9842602276582057),
        (0.1, 0.1, 2.7265156823229859),
        (0.1, 0.5, 1.533453444170723),
        (0.1, 1.0, 1.1486533294972618),
        (0.1, 2.0, 0.84331447651585496),
        (0.1, 2.1, 0.82465507681552006),
        (0.1, 5.0, 0.5483099345775357),
        (0.1, 10.0, 0.39181892132724048),
        (0.1, 50.0, 0.17682466433918445),
        (0.1, 200.0, 0.088569667047527766),
        (0.39, 0.01, 8.8378617138000233),
        (0.39, 0.1, 3.4158643836767525),
        (0.39, 0.5, 1.6714667603204984),
        (0.39, 1.0, 1.2096580792526553),
        (0.39, 2.0, 0.86848780340035158),
        (0.39, 2.1, 0.84825371515494325),
        (0.39, 5.0, 0.55549614412696481),
        (0.39, 10.0, 0.39448540130194378),
        (0.39, 50.0, 0.17707364610919737),
        (0.39, 200.0, 0.088601058734769992),
        (0.5, 0.01, 12.533141373155002),
        (0.5, 0.1, 3.9633272976060109),
        (0.5, 0.5, 1.772453850905516),
        (0.5, 1.0, 1.2533141373155003),
        (0.5, 2.0, 0.88622692545275801),
        (0.5, 2.1, 0.8648689211983008),
        (0.5, 5.0, 0.56049912163979287),
        (0.5, 10.0, 0.3963327297606011),
        (0.5, 50.0, 0.1772453850905516),
        (0.5, 200.0, 0.088622692545275801),
        (1.0, 0.01, 100.97864845824005),
        (1.0, 0.1, 10.890182683049696),
        (1.0, 0.5, 2.7310097082117857),
        (1.0, 1.0, 1.6361534862632582),
        (1.0, 2.0, 1.0334768470686886),
        (1.0, 2.1, 1.0023680527405791),
        (1.0, 5.0, 0.60027385878831258),
        (1.0, 10.0, 0.41076657059578875),
        (1.0, 50.0, 0.17856655855881557),
        (1.0, 200.0, 0.08878860158500368),
        (2.7, 0.01, 1273291.1423005614),
        (2.7, 0.1, 2775.7643268354535),
        (2.7, 0.5, 51.866662304001993),
        (2.7, 1.0, 11.890422069420951),
        (2.7, 2.0, 3.4967372087728794),
        (2.7, 2.1, 3.2422505064273929),
        (2.7, 5.0, 1.0576290903743482),
        (2.7, 10.0, 0.55370786734284924),
        (2.7, 50.0, 0.19003898459888606),
        (2.7, 200.0, 0.09019228690827731),
        (5.5, 0.01, 119627844934065.32),
        (5.5, 0.1, 413694683.45018605),
        (5.5, 0.5, 87153.328302875129),
        (5.5, 1.0, 3046.8066678139811),
        (5.5, 2.0, 155.83746592258342),
        (5.5, 2.1, 128.89420616841863),
        (5.5, 5.0, 7.4963394524592458),
        (5.5, 10.0, 1.6146397244082009),
        (5.5, 50.0, 0.23848618677769471),
        (5.5, 200.0, 0.095506734349953136),
        (20.3, 0.01, 7.715027434787047e63),
        (20.3, 0.1, 4.2302719258335769e43),
        (20.3, 0.5, 4.0704739132164541e29),
        (20.3, 1.0, 5.1483253825217806e23),
        (20.3, 2.0, 1.0428085154465901e18),
        (20.3, 2.1, 4.257862003759129e17),
        (20.3, 5.0, 133644599418.09368),
        (20.3, 10.0, 6047179.2216379356),
        (20.3, 50.0, 9.9420596031272695),
        (20.3, 200.0, 0.24728932869142004),
    ];

    /// (nu, x, ln(e^x K_nu(x))) references for orders past direct overflow.
    const LN_K_SCALED_REFS: [(f64, f64, f64); 4] = [
        (150.7, 3.0, 544.70444730030104),
        (400.0, 10.0, 1359.9782695712701),
        (1200.5, 40.0, 3751.6079392557262),
        (35.2, 0.2, 169.84716065658985),
    ];

    /// (x, ln Γ(x)) references.
    const LN_GAMMA_REFS: [(f64, f64); 7] = [
        (0.5, 0.57236494292470009),
        (1.0, 0.0),
        (1.5, -0.12078223763524522),
        (2.6, 0.35741186354897984),
        (10.3, 13.482036786138359),
        (100.0, 359.1342053695754),
        (1000.0, 5905.2204232091812),
    ];

    #[test]
    fn i0_scaled_matches_reference_values() {
        for &(x, expected) in &I0_SCALED_REFS {
            assert_relative_eq!(i0_scaled(x), expected, max_relative = 2e-14);
        }
    }

    #[test]
    fn i0_scaled_is_even_and_bounded() {
        for &x in &[0.3, 2.0, 8.0, 8.1, 64.0, 1e6] {
            assert_eq!(i0_scaled(x), i0_scaled(-x));
            assert!(i0_scaled(x) > 0.0 && i0_scaled(x) <= 1.0);
        }
        assert!(i0_scaled(1e308).is_finite());
    }

    #[test]
    fn ln_gamma_matches_reference_values() {
        for &(x, expected) in &LN_GAMMA_REFS {
            if expected == 0.0 {
                assert_abs_diff_eq!(ln_gamma(x), 0.0, epsilon = 1e-14);
            } else {
                assert_relative_eq!(ln_gamma(x), expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn ln_gamma_satisfies_recurrence() {
        // ln Γ(x+1) = ln Γ(x) + ln x across both evaluation branches.
        for &x in &[0.1, 0.4, 0.9, 1.7, 6.3, 41.5] {
            assert_relative_eq!(
                ln_gamma(x + 1.0),
                ln_gamma(x) + x.ln(),
                max_relative = 1e-12,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn ln_gamma_rejects_non_positive_arguments() {
        assert!(ln_gamma(0.0).is_nan());
        assert!(ln_gamma(-2.5).is_nan());
    }

    #[test]
    fn bessel_k_scaled_matches_reference_values() {
        for &(nu, x, expected) in &K_SCALED_REFS {
            assert_relative_eq!(bessel_k_scaled(nu, x), expected, max_relative = 5e-12);
        }
    }

    #[test]
    fn bessel_k_scaled_is_even_in_order() {
        for &(nu, x) in &[(0.39, 0.5), (1.0, 3.0), (2.7, 10.0)] {
            assert_eq!(bessel_k_scaled(nu, x), bessel_k_scaled(-nu, x));
        }
    }

    #[test]
    fn bessel_k_half_order_closed_form() {
        // e^x K_{1/2}(x) = sqrt(pi / (2x)) exactly.
        for &x in &[0.05, 0.7, 1.9, 2.5, 30.0, 500.0] {
            let expected = (std::f64::consts::PI / (2.0 * x)).sqrt();
            assert_relative_eq!(bessel_k_scaled(0.5, x), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn ln_bessel_k_scaled_matches_reference_values() {
        for &(nu, x, expected) in &LN_K_SCALED_REFS {
            assert_relative_eq!(ln_bessel_k_scaled(nu, x), expected, max_relative = 1e-12);
        }
        // Consistency with the direct form where both are representable.
        for &(nu, x, expected) in &K_SCALED_REFS[60..70] {
            assert_relative_eq!(
                ln_bessel_k_scaled(nu, x),
                expected.ln(),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn bessel_k_scaled_diverges_at_origin() {
        assert_eq!(bessel_k_scaled(0.3, 0.0), f64::INFINITY);
        assert_eq!(bessel_k_scaled(0.3, -1.0), f64::INFINITY);
    }

    #[test]
    fn bessel_k_scaled_satisfies_recurrence() {
        // K_{nu+1}(x) = K_{nu-1}(x) + (2 nu / x) K_nu(x), scaled form.
        for &(nu, x) in &[(1.3, 0.8), (1.3, 7.0), (4.6, 2.5), (9.2, 40.0)] {
            let lhs = bessel_k_scaled(nu + 1.0, x);
            let rhs = bessel_k_scaled(nu - 1.0, x) + 2.0 * nu / x * bessel_k_scaled(nu, x);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }
}
