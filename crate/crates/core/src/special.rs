//! Scalar special functions: the normal distribution, log-binomials and a
//! couple of numerically careful helpers.

#[allow(unused_imports)]
use crate::prelude::*;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper tail 1 − Φ(x) without cancellation for large x.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Cdf of |Z| for standard normal Z: 2Φ(y) − 1 on y ≥ 0.
pub fn folded_normal_cdf(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        libm::erf(y / core::f64::consts::SQRT_2)
    }
}

/// Standard normal quantile (Wichura's AS241, relative accuracy about 1e-16).
///
/// Returns ±∞ at the endpoints and NaN outside [0, 1].
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_871)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5226.495_278_852_545_9 * r + 28729.085_735_721_943) * r + 39307.895_800_092_711) * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751_1)
            * r
            + 687.187_007_492_057_91)
            * r
            + 42.313_330_701_600_911)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_185) * r + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_100_05)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_81)
            * r
            + 0.599_832_206_555_887_94)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// ln C(n, k); −∞ when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// (τ^{−ξ} − 1)/ξ, switching to its series in ξ near zero.
pub(crate) fn box_cox_neg(tau: f64, xi: f64) -> f64 {
    let l = -tau.ln();
    if xi.abs() < 1e-6 {
        // e^{ξl} − 1 = ξl + ξ²l²/2 + ξ³l³/6 + ...
        l * (1.0 + xi * l / 2.0 + xi * xi * l * l / 6.0)
    } else {
        libm::expm1(xi * l) / xi
    }
}

/// (θ^ξ − 1)/ξ with the same small-ξ series.
pub(crate) fn box_cox(theta: f64, xi: f64) -> f64 {
    box_cox_neg(1.0 / theta, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantile_known_values() {
        assert_relative_eq!(normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-14);
        assert_relative_eq!(normal_quantile(0.5), 0.0);
        assert_relative_eq!(normal_quantile(0.001), -3.090_232_306_167_813_5, epsilon = 1e-13);
        assert_relative_eq!(normal_quantile(1e-10), -6.361_340_902_404_056, epsilon = 1e-12);
        assert_relative_eq!(normal_quantile(0.995), 2.575_829_303_548_900_4, epsilon = 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Above 3 the cdf itself rounds too coarsely to invert precisely.
        for i in 1..140 {
            let x = -8.0 + 0.08 * i as f64;
            let p = normal_cdf(x);
            let back = normal_quantile(p);
            assert!((back - x).abs() < 1e-9 * (1.0 + x.abs()), "x={x} back={back}");
        }
    }

    #[test]
    fn folded_matches_two_phi_minus_one() {
        for y in [0.1, 0.7, 1.5, 3.0] {
            assert_relative_eq!(folded_normal_cdf(y), 2.0 * normal_cdf(y) - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn binomial_logs() {
        assert_relative_eq!(ln_binomial(10, 3).exp(), 120.0, max_relative = 1e-12);
        assert_relative_eq!(ln_binomial(1000, 500), 689.467_261_567_851_9, max_relative = 1e-12);
        assert_eq!(ln_binomial(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn box_cox_series_is_continuous() {
        for tau in [0.2, 1.0, 3.5] {
            let xi = 0.9e-6;
            let direct = libm::expm1(-xi * libm::log(tau)) / xi;
            assert!((box_cox_neg(tau, xi) - direct).abs() < 1e-9);
            assert_relative_eq!(box_cox_neg(tau, 0.0), -libm::log(tau), epsilon = 1e-15);
        }
    }
}
