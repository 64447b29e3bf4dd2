//! Posterior sign probability and its coordinate machinery.
//!
//! The observation is `X_t = B t + W_t` with unknown drift `B ~ mu`. The
//! statistic everything runs on is
//!
//! ```text
//!     pi(t, x) = P(B >= 0 | X_t = x)
//! ```
//!
//! which is a ratio of tilted half-line masses from `prior::half_moments`.
//! `pi(t, .)` is strictly increasing in `x`, so levels can be inverted
//! (`x_of_pi`), and as a diffusion in its own filtration the posterior has
//! state-dependent volatility
//!
//! ```text
//!     sigma(t, q) = (1 - q) E[B 1_{B>=0}] - q E[B 1_{B<0}]
//! ```
//!
//! with the conditional expectations taken at `x = x_of_pi(t, q)`. For a
//! two-point prior on `{a1, a2}` this collapses to `(a2 - a1) q (1 - q)`,
//! and for `N(m, gamma^2)` to `phi(Phi^{-1}(q)) gamma / sqrt(1 + t gamma^2)`;
//! the tests pin both identities.

use core::fmt;

use crate::prior::{HalfMoments, Prior};

/// Posterior probabilities are clamped into `[PI_MIN, 1 - PI_MIN]`.
pub const PI_MIN: f64 = 1e-12;

/// Bracket expansion cap for `x_of_pi`.
const X_MAX: f64 = 1e9;
const MAX_BISECT: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub enum FilterError {
    /// Requested level outside `[PI_MIN, 1 - PI_MIN]` or not finite.
    LevelOutOfRange { q: f64 },
    NonFiniteInput,
    /// No sign change found while expanding the bracket up to `|x| = 1e9`.
    BracketExhausted { t: f64, q: f64 },
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::LevelOutOfRange { q } => write!(
                f,
                "posterior level {q} outside the representable band [{PI_MIN}, 1-{PI_MIN}]"
            ),
            FilterError::NonFiniteInput => write!(f, "inputs must be finite with t >= 0"),
            FilterError::BracketExhausted { t, q } => write!(
                f,
                "no bracket for pi(t={t}, .) = {q} within |x| <= {X_MAX:e}"
            ),
        }
    }
}

impl core::error::Error for FilterError {}

/// Posterior probability that the drift is nonnegative, clamped away from
/// 0 and 1.
pub fn pi_posterior(prior: &Prior, t: f64, x: f64) -> f64 {
    let hm = prior.half_moments(t, x);
    hm.pi_raw().clamp(PI_MIN, 1.0 - PI_MIN)
}

/// Posterior mean of the drift given `X_t = x`.
pub fn conditional_mean(prior: &Prior, t: f64, x: f64) -> f64 {
    prior.half_moments(t, x).mean()
}

/// Inverse of `pi_posterior` in `x`: geometric bracket expansion from
/// `[-1, 1]` followed by bisection to machine precision.
pub fn x_of_pi(prior: &Prior, t: f64, q: f64) -> Result<f64, FilterError> {
    if !(t.is_finite() && t >= 0.0) || !q.is_finite() {
        return Err(FilterError::NonFiniteInput);
    }
    if !(PI_MIN..=1.0 - PI_MIN).contains(&q) {
        return Err(FilterError::LevelOutOfRange { q });
    }
    let f = |x: f64| pi_posterior(prior, t, x) - q;
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut flo = f(lo);
    let mut fhi = f(hi);
    while flo > 0.0 {
        hi = lo;
        fhi = flo;
        lo *= 2.0;
        if lo < -X_MAX {
            return Err(FilterError::BracketExhausted { t, q });
        }
        flo = f(lo);
    }
    while fhi < 0.0 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        if hi > X_MAX {
            return Err(FilterError::BracketExhausted { t, q });
        }
        fhi = f(hi);
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at machine resolution
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Posterior volatility at level `q`.
pub fn sigma_vol(prior: &Prior, t: f64, q: f64) -> Result<f64, FilterError> {
    let x = x_of_pi(prior, t, q)?;
    let hm = prior.half_moments(t, x);
    Ok(sigma_from_moments(q, &hm))
}

pub(crate) fn sigma_from_moments(q: f64, hm: &HalfMoments) -> f64 {
    let z = hm.total();
    (1.0 - q) * (hm.m1_pos / z) - q * (hm.m1_neg / z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Posterior tail probability `P(B > a | X_t = x)` (`Side::Above`) or
/// `P(B < a | X_t = x)` (`Side::Below`), closed form for every family.
pub fn tail_prob(prior: &Prior, t: f64, x: f64, a: f64, side: Side) -> f64 {
    debug_assert!(t >= 0.0 && x.is_finite());
    if a == f64::NEG_INFINITY {
        return match side {
            Side::Above => 1.0,
            Side::Below => 0.0,
        };
    }
    if a == f64::INFINITY {
        return match side {
            Side::Above => 0.0,
            Side::Below => 1.0,
        };
    }
    match prior {
        Prior::Discrete { atoms } => {
            use libm::exp;
            let log_scale = atoms
                .iter()
                .map(|&(b, _)| b * x - 0.5 * b * b * t)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut hit = 0.0;
            let mut total = 0.0;
            for &(b, w) in atoms {
                let e = w * exp(b * x - 0.5 * b * b * t - log_scale);
                total += e;
                let take = match side {
                    Side::Above => b > a,
                    Side::Below => b < a,
                };
                if take {
                    hit += e;
                }
            }
            hit / total
        }
        Prior::Gaussian { .. } | Prior::GaussianMixture { .. } => {
            use crate::math::normal_cdf;
            let comps = crate::kernel::posterior_normals(prior, t, x);
            comps
                .iter()
                .map(|&(w, mean, sd)| {
                    let p_above = normal_cdf((mean - a) / sd);
                    w * match side {
                        Side::Above => p_above,
                        Side::Below => 1.0 - p_above,
                    }
                })
                .sum()
        }
    }
}

/// Posterior summaries at one `(t, x)`.
#[derive(Clone, Copy, Debug)]
pub struct PosteriorPoint {
    pub t: f64,
    pub x: f64,
    pub pi: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// Bundle `pi`, the conditional mean, and the volatility at `(t, x)` from a
/// single half-moment evaluation.
pub fn posterior_point(prior: &Prior, t: f64, x: f64) -> PosteriorPoint {
    let hm = prior.half_moments(t, x);
    let pi = hm.pi_raw().clamp(PI_MIN, 1.0 - PI_MIN);
    PosteriorPoint {
        t,
        x,
        pi,
        mean: hm.mean(),
        sigma: sigma_from_moments(pi, &hm),
    }
}
