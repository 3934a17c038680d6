//! Standard normal CDF, its logarithm, and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// ln(sqrt(2π))
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this standardized argument `log Φ` switches to the Mills-ratio form.
const LOG_CDF_TAIL_SWITCH: f64 = -8.0;

/// Depth of the backward continued-fraction evaluation of the Mills ratio.
const MILLS_CF_DEPTH: usize = 120;

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("standard normal argument must be finite, got {x}")))
    }
}

/// Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(cdf(x))
}

/// log Φ(x), finite for every finite `x`.
pub fn log_std_normal_cdf(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(log_cdf(x))
}

#[cfg(test)]
pub(crate) fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail Q(x) = 1 - Φ(x), accurate for large positive x.
#[inline]
pub(crate) fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub(crate) fn log_cdf(x: f64) -> f64 {
    if x < LOG_CDF_TAIL_SWITCH {
        // Φ(x) = φ(x) R(-x), with R the Mills ratio
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(-x).ln()
    } else if x > 0.0 {
        (-upper_tail(x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// Mills ratio R(t) = Q(t)/φ(t) for t well above zero, via Laplace's
/// continued fraction R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
fn mills_ratio(t: f64) -> f64 {
    let mut f = t;
    for k in (1..=MILLS_CF_DEPTH).rev() {
        f = t + k as f64 / f;
    }
    1.0 / f
}

// Acklam's rational approximation to Φ⁻¹, relative error below 1.2e-9
// before refinement.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Φ⁻¹(p) for p in (0, 1), refined by one Halley step against `erfc`.
pub(crate) fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5])
            * q
            / (((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
                + ACKLAM_B[4])
                * r
                + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    };
    // Halley step; the error is measured on the smaller tail for accuracy.
    let e = if x <= 0.0 {
        cdf(x) - p
    } else {
        (1.0 - p) - upper_tail(x)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
