//! Scalar special functions for the standard normal distribution.
//!
//! Everything is plain `f64` built on `libm`, so the crate works without
//! `std`. The inverse CDF is Acklam's rational approximation polished with
//! one Halley step against the `erfc`-based CDF, which brings it to full
//! double precision. `bvn_upper` is a port of Genz's bivariate normal
//! algorithm (Drezner-Wesolowsky quadrature with the high-correlation
//! expansion).

use libm::{asin, erfc, exp, fabs, log, sin, sqrt};

pub const SQRT_2: f64 = core::f64::consts::SQRT_2;
pub const SQRT_PI: f64 = 1.772_453_850_905_516;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;
const TWO_PI: f64 = core::f64::consts::TAU;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * z * z)
}

/// Standard normal CDF, accurate into the far tails via `erfc`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function `1 - Phi(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `exp(x^2)` evaluated with a split square so the rounding of `x * x` does
/// not get amplified by the exponential: `z` keeps the top 26 mantissa bits,
/// making `z * z` exact, and the small remainder `(x - z)(x + z)` enters
/// through a second, well-conditioned `exp`.
fn exp_sq(x: f64) -> f64 {
    let z = f64::from_bits(x.to_bits() & 0xFFFF_FFFF_F800_0000);
    exp(z * z) * exp((x - z) * (x + z))
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// Direct evaluation is safe up to x = 25 (no overflow in `exp`); beyond
/// that the asymptotic series in 1/(2x^2) converges well below 1 ulp.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(-x) = 2 - erfc(x); overflows to +inf for x < -26.6 as the
        // true value does in double precision.
        return 2.0 * exp_sq(x) - erfcx(-x);
    }
    if x <= 25.0 {
        exp_sq(x) * erfc(x)
    } else {
        let w = 0.5 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        while fabs(term) > 1e-18 && k < 12.0 {
            k += 1.0;
            term *= -(2.0 * k - 1.0) * w;
            sum += term;
        }
        sum / (x * SQRT_PI)
    }
}

/// Mills ratio `Phi(-z)/phi(z)` for `z >= 0`, stable far into the tail.
pub fn mills_ratio(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    SQRT_PI_OVER_2 * erfcx(z / SQRT_2)
}

// Acklam's rational approximation of the inverse normal CDF.
const ICDF_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ICDF_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ICDF_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ICDF_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Inverse of the standard normal CDF for `p` in (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1].
        return -inverse_normal_cdf(1.0 - p);
    }
    let x = if p < 0.02425 {
        let q = sqrt(-2.0 * log(p));
        (((((ICDF_C[0] * q + ICDF_C[1]) * q + ICDF_C[2]) * q + ICDF_C[3]) * q + ICDF_C[4]) * q
            + ICDF_C[5])
            / ((((ICDF_D[0] * q + ICDF_D[1]) * q + ICDF_D[2]) * q + ICDF_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((ICDF_A[0] * r + ICDF_A[1]) * r + ICDF_A[2]) * r + ICDF_A[3]) * r + ICDF_A[4]) * r
            + ICDF_A[5])
            * q
            / (((((ICDF_B[0] * r + ICDF_B[1]) * r + ICDF_B[2]) * r + ICDF_B[3]) * r + ICDF_B[4])
                * r
                + 1.0)
    };
    // One Halley step against the erfc-based CDF.
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        let e = normal_cdf(x) - p;
        let u = e / pdf;
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    }
}

// Gauss-Legendre half-rules (positive nodes, symmetric weights) for the
// bivariate normal quadrature below.
const GL6: [(f64, f64); 3] = [
    (2.386191860831969e-01, 4.679139345726914e-01),
    (6.612093864662645e-01, 3.607615730481389e-01),
    (9.324695142031520e-01, 1.713244923791697e-01),
];
const GL12: [(f64, f64); 6] = [
    (1.252334085114689e-01, 2.491470458134027e-01),
    (3.678314989981802e-01, 2.334925365383546e-01),
    (5.873179542866175e-01, 2.031674267230656e-01),
    (7.699026741943047e-01, 1.600783285433461e-01),
    (9.041172563704748e-01, 1.069393259953189e-01),
    (9.815606342467192e-01, 4.717533638651202e-02),
];
const GL20: [(f64, f64); 10] = [
    (7.652652113349733e-02, 1.527533871307258e-01),
    (2.277858511416451e-01, 1.491729864726037e-01),
    (3.737060887154195e-01, 1.420961093183819e-01),
    (5.108670019508271e-01, 1.316886384491766e-01),
    (6.360536807265150e-01, 1.181945319615182e-01),
    (7.463319064601508e-01, 1.019301198172403e-01),
    (8.391169718222188e-01, 8.327674157670467e-02),
    (9.122344282513258e-01, 6.267204833410944e-02),
    (9.639719272779138e-01, 4.060142980038622e-02),
    (9.931285991850949e-01, 1.761400713915327e-02),
];

/// Upper-orthant bivariate normal probability `P(Z1 > h, Z2 > k)` for
/// standard normal margins with correlation `r`.
pub fn bvn_upper(dh: f64, dk: f64, r: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&r));
    let rule: &[(f64, f64)] = if fabs(r) < 0.3 {
        &GL6
    } else if fabs(r) < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if fabs(r) < 0.925 {
        if fabs(r) > 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = asin(r);
            for &(xn, wn) in rule {
                for is in [-1.0, 1.0] {
                    let sn = sin(0.5 * asr * (is * xn + 1.0));
                    bvn += wn * exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn = bvn * asr / (2.0 * TWO_PI);
        }
        bvn + normal_cdf(-h) * normal_cdf(-k)
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if fabs(r) < 1.0 {
            let a2 = (1.0 - r) * (1.0 + r);
            let mut a = sqrt(a2);
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -0.5 * (bs / a2 + hk);
            if asr > -100.0 {
                bvn = a * exp(asr) * (1.0 - c * (bs - a2) * (1.0 - d * bs / 5.0) / 3.0
                    + c * d * a2 * a2 / 5.0);
            }
            if -hk < 100.0 {
                let b = sqrt(bs);
                let sp = SQRT_2PI * normal_cdf(-b / a);
                bvn -= exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a *= 0.5;
            for &(xn, wn) in rule {
                for is in [-1.0, 1.0] {
                    let x2 = a * (is * xn + 1.0);
                    let xs = x2 * x2;
                    let rs = sqrt(1.0 - xs);
                    let asr2 = -0.5 * (bs / xs + hk);
                    if asr2 > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
                        bvn += a * wn * exp(asr2) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / TWO_PI;
        }
        if r > 0.0 {
            bvn + normal_cdf(-h.max(k))
        } else {
            bvn = -bvn;
            if k > h {
                bvn += normal_cdf(k) - normal_cdf(h);
            }
            bvn
        }
    }
}

/// Compensated (Kahan) running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
