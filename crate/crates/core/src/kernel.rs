//! Transition probabilities of the posterior level process and the terminal
//! payoff functional.
//!
//! The free-boundary equations need two ingredients at each time node:
//!
//! * `transition_prob`: `P(pi_{t+u} in [lo, hi] | pi_t = q)`, evaluated by
//!   pushing the level back to `x`-coordinates and integrating the Gaussian
//!   increment against the tilted posterior. Discrete priors use exact atom
//!   sums; Gaussian families integrate with an escalating Gauss-Hermite
//!   ladder. This route stays deliberately quadrature-based so the closed
//!   form below cross-checks it rather than feeding it.
//! * `terminal_payoff`: `E[min(pi_T, 1 - pi_T) | pi_t = q]`, reduced to
//!   half-line Gaussian probabilities. Writing `y*` for the point where
//!   `pi(T, .)` crosses 1/2,
//!
//!   ```text
//!       E[g(pi_T)] = q + P(X_T > y*) - 2 P(B >= 0, X_T > y*)
//!   ```
//!
//!   which is exact for atoms and a bivariate normal probability per
//!   component for Gaussian families.
//!
//! For a pure normal prior the level process is autonomous and the kernel
//! collapses to a single normal CDF (`normal_kernel`), independent of the
//! prior mean. Tests pin both routes against each other.

use alloc::vec::Vec;
use libm::{exp, sqrt};

use crate::filter::{x_of_pi, FilterError, PI_MIN};
use crate::math::{bvn_upper, inverse_normal_cdf, normal_cdf};
use crate::prior::{Prior, TiltedNormal};
use crate::quad::QuadLadder;

/// A single transition query: start at level `q` at time `t`, ask for the
/// chance of landing in `[lo, hi]` after `u` more units of time.
#[derive(Clone, Copy, Debug)]
pub struct KernelQuery {
    pub t: f64,
    pub u: f64,
    pub q: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelError {
    /// `lo`/`hi` must satisfy `0 < lo <= hi < 1`.
    InvalidInterval { lo: f64, hi: f64 },
    /// Conditioning level must lie in `(0, 1)`.
    InvalidLevel { q: f64 },
    /// Times must be finite with `t >= 0`, `u >= 0` (or `horizon >= t`).
    InvalidTime,
    Filter(FilterError),
}

impl core::fmt::Display for KernelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KernelError::InvalidInterval { lo, hi } => {
                write!(f, "interval [{lo}, {hi}] must satisfy 0 < lo <= hi < 1")
            }
            KernelError::InvalidLevel { q } => {
                write!(f, "conditioning level {q} must lie strictly inside (0, 1)")
            }
            KernelError::InvalidTime => write!(f, "times must be finite and ordered"),
            KernelError::Filter(e) => write!(f, "level inversion failed: {e}"),
        }
    }
}

impl core::error::Error for KernelError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            KernelError::Filter(e) => Some(e),
            _ => None,
        }
    }
}

impl From<FilterError> for KernelError {
    fn from(e: FilterError) -> Self {
        KernelError::Filter(e)
    }
}

/// Expectation of `f(B)` under the tilted discrete posterior at `(t, x)`,
/// computed with a shared exponent shift. Two passes, no allocation.
fn discrete_expect<F: FnMut(f64) -> f64>(atoms: &[(f64, f64)], t: f64, x: f64, mut f: F) -> f64 {
    let log_scale = atoms
        .iter()
        .map(|&(b, _)| b * x - 0.5 * b * b * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut acc = 0.0;
    for &(b, w) in atoms {
        let e = w * exp(b * x - 0.5 * b * b * t - log_scale);
        total += e;
        acc += e * f(b);
    }
    acc / total
}

/// The posterior at `(t, x)` for Gaussian families, as a normalized list of
/// `(weight, mean, sd)` components. Empty for discrete priors, whose
/// posterior keeps its atoms.
pub(crate) fn posterior_normals(prior: &Prior, t: f64, x: f64) -> Vec<(f64, f64, f64)> {
    match prior {
        Prior::Discrete { .. } => Vec::new(),
        Prior::Gaussian { m, gamma } => {
            let c = TiltedNormal::new(*m, *gamma, t, x);
            alloc::vec![(1.0, c.mean, c.sd)]
        }
        Prior::GaussianMixture { components } => {
            let mut comps: Vec<TiltedNormal> = Vec::with_capacity(components.len());
            let mut lg_max = f64::NEG_INFINITY;
            for &(w, mk, gk) in components {
                let c = TiltedNormal::weighted(w, mk, gk, t, x);
                lg_max = lg_max.max(c.log_gain);
                comps.push(c);
            }
            let mut out = Vec::with_capacity(comps.len());
            let mut total = 0.0;
            for c in &comps {
                let e = exp(c.log_gain - lg_max);
                total += e;
                out.push((e, c.mean, c.sd));
            }
            for item in &mut out {
                item.0 /= total;
            }
            out
        }
    }
}

/// `P(y_lo < X_{t+u} < y_hi | X_t = x)` for `u > 0`, integrating the
/// increment law `B u + sqrt(u) Z` against the posterior at `(t, x)`.
pub(crate) fn interval_prob_given_x(
    prior: &Prior,
    t: f64,
    x: f64,
    u: f64,
    y_lo: f64,
    y_hi: f64,
    ladder: &QuadLadder,
) -> f64 {
    debug_assert!(u > 0.0);
    let su = sqrt(u);
    let slice = |b: f64| {
        normal_cdf((y_hi - x - b * u) / su) - normal_cdf((y_lo - x - b * u) / su)
    };
    let raw = match prior {
        Prior::Discrete { atoms } => discrete_expect(atoms, t, x, slice),
        Prior::Gaussian { m, gamma } => {
            let c = TiltedNormal::new(*m, *gamma, t, x);
            ladder.gaussian_expect(c.mean, c.sd, slice)
        }
        Prior::GaussianMixture { components } => {
            let mut lg_max = f64::NEG_INFINITY;
            for &(w, mk, gk) in components {
                lg_max = lg_max.max(TiltedNormal::weighted(w, mk, gk, t, x).log_gain);
            }
            let mut total = 0.0;
            let mut acc = 0.0;
            for &(w, mk, gk) in components {
                let c = TiltedNormal::weighted(w, mk, gk, t, x);
                let e = exp(c.log_gain - lg_max);
                total += e;
                acc += e * ladder.gaussian_expect(c.mean, c.sd, &slice);
            }
            acc / total
        }
    };
    raw.clamp(0.0, 1.0)
}

/// Probability that the posterior level sits in `[lo, hi]` after `u` more
/// units of observation, starting from level `q` at time `t`.
///
/// `u == 0` degenerates to an indicator, with the half-count convention
/// `1/2` when `q` sits exactly on an endpoint.
pub fn transition_prob(
    prior: &Prior,
    query: &KernelQuery,
    ladder: &QuadLadder,
) -> Result<f64, KernelError> {
    let KernelQuery { t, u, q, lo, hi } = *query;
    if !(t.is_finite() && t >= 0.0 && u.is_finite() && u >= 0.0) {
        return Err(KernelError::InvalidTime);
    }
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(KernelError::InvalidInterval { lo, hi });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(KernelError::InvalidLevel { q });
    }
    if u == 0.0 {
        // degenerate interval containing q counts fully
        return Ok(if q == lo && q == hi {
            1.0
        } else if q == lo || q == hi {
            0.5
        } else if q > lo && q < hi {
            1.0
        } else {
            0.0
        });
    }
    let x = x_of_pi(prior, t, q)?;
    let y_lo = x_of_pi(prior, t + u, lo)?;
    let y_hi = x_of_pi(prior, t + u, hi)?;
    Ok(interval_prob_given_x(prior, t, x, u, y_lo, y_hi, ladder))
}

/// Closed-form level kernel for the prior `N(m, gamma^2)`, any `m`:
/// `P(pi_{t+s} <= b_next | pi_t = b_now)`. In level coordinates the prior
/// mean drops out, so only `gamma` enters.
pub fn normal_kernel(gamma: f64, t: f64, s: f64, b_now: f64, b_next: f64) -> f64 {
    debug_assert!(gamma > 0.0 && t >= 0.0 && s >= 0.0);
    debug_assert!(b_now > 0.0 && b_now < 1.0 && b_next > 0.0 && b_next < 1.0);
    if s == 0.0 {
        return if b_next >= b_now { 1.0 } else { 0.0 };
    }
    let gt2 = gamma * gamma / (1.0 + t * gamma * gamma);
    let r = sqrt(1.0 + s * gt2);
    let d = (inverse_normal_cdf(b_next) - inverse_normal_cdf(b_now) * r) / (sqrt(gt2) * sqrt(s));
    normal_cdf(d)
}

/// `E[min(pi_T, 1 - pi_T) | pi_t = q]`: the expected cost of a forced call
/// at the horizon `T = horizon`, seen from `(t, q)`.
pub fn terminal_payoff(prior: &Prior, t: f64, q: f64, horizon: f64) -> Result<f64, KernelError> {
    if !(t.is_finite() && t >= 0.0 && horizon.is_finite() && horizon >= t) {
        return Err(KernelError::InvalidTime);
    }
    if !(PI_MIN..=1.0 - PI_MIN).contains(&q) {
        return Err(KernelError::InvalidLevel { q });
    }
    let u = horizon - t;
    if u == 0.0 {
        return Ok(q.min(1.0 - q));
    }
    let x = x_of_pi(prior, t, q)?;
    let y_star = x_of_pi(prior, horizon, 0.5)?;
    let su = sqrt(u);
    let (s_all, s_pos) = match prior {
        Prior::Discrete { atoms } => {
            let s_all = discrete_expect(atoms, t, x, |b| normal_cdf((x + b * u - y_star) / su));
            let s_pos = discrete_expect(atoms, t, x, |b| {
                if b >= 0.0 {
                    normal_cdf((x + b * u - y_star) / su)
                } else {
                    0.0
                }
            });
            (s_all, s_pos)
        }
        Prior::Gaussian { .. } | Prior::GaussianMixture { .. } => {
            let mut s_all = 0.0;
            let mut s_pos = 0.0;
            for &(w, mh, sh) in &posterior_normals(prior, t, x) {
                let spread = sqrt(u + u * u * sh * sh);
                s_all += w * normal_cdf((x + mh * u - y_star) / spread);
                let rho = sh * su / sqrt(1.0 + u * sh * sh);
                s_pos += w * bvn_upper(-mh / sh, (y_star - x - mh * u) / spread, rho);
            }
            (s_all, s_pos)
        }
    };
    Ok((q + s_all - 2.0 * s_pos).clamp(0.0, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::pi_posterior;
    use crate::quad::GaussHermite;
    use alloc::vec;

    fn ladder() -> QuadLadder {
        QuadLadder::new(64)
    }

    fn three_atom() -> Prior {
        Prior::discrete(vec![(-2.0, 0.3), (1.0, 0.4), (3.0, 0.3)]).unwrap()
    }

    fn mix() -> Prior {
        Prior::mixture(vec![(0.6, -1.0, 0.8), (0.4, 1.5, 0.5)]).unwrap()
    }

    // quadrature oracles through the original x-coordinates, 30+ digits
    #[test]
    fn normal_kernel_frozen() {
        let cases = [
            (1.0, 0.0, 1.0, 0.5, 0.5, 0.5),
            (1.0, 2.0, 0.5, 0.3, 0.45, 0.859_845_879_920_993_6),
            (0.5, 1.0, 3.0, 0.6, 0.25, 0.099_487_621_218_803_485),
            (2.0, 0.25, 0.1, 0.45, 0.48, 0.577_561_601_543_125_05),
            (1.5, 5.0, 2.0, 0.2, 0.8, 0.998_703_829_051_552_05),
        ];
        for &(g, t, s, bn, bx, want) in &cases {
            let got = normal_kernel(g, t, s, bn, bx);
            assert!(
                (got - want).abs() < 1e-13,
                "g={g} t={t} s={s}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn normal_kernel_degenerate_horizon() {
        assert_eq!(normal_kernel(1.0, 2.0, 0.0, 0.4, 0.5), 1.0);
        assert_eq!(normal_kernel(1.0, 2.0, 0.0, 0.4, 0.4), 1.0);
        assert_eq!(normal_kernel(1.0, 2.0, 0.0, 0.4, 0.3), 0.0);
    }

    #[test]
    fn transition_frozen_oracles() {
        let q = KernelQuery {
            t: 0.5,
            u: 0.8,
            q: 0.4,
            lo: 0.3,
            hi: 0.7,
        };
        let l = ladder();
        let got = transition_prob(&three_atom(), &q, &l).unwrap();
        assert!((got - 0.098_479_707_998_034_527).abs() < 1e-12, "{got}");
        let got = transition_prob(&Prior::gaussian(0.3, 1.2).unwrap(), &q, &l).unwrap();
        assert!((got - 0.446_138_029_624_668_22).abs() < 1e-8, "{got}");
        let got = transition_prob(&mix(), &q, &l).unwrap();
        assert!((got - 0.276_899_956_419_521_707).abs() < 1e-8, "{got}");
    }

    // for the pure normal prior, the quadrature route must agree with the
    // closed form, and must not see the prior mean
    #[test]
    fn transition_matches_closed_form_and_ignores_mean() {
        let l = ladder();
        for &(g, t, u, q, lo, hi) in &[
            (1.2, 0.5, 0.8, 0.4, 0.3, 0.7),
            (0.7, 0.0, 0.25, 0.55, 0.45, 0.6),
            (2.0, 3.0, 1.5, 0.2, 0.05, 0.5),
        ] {
            let want = normal_kernel(g, t, u, q, hi) - normal_kernel(g, t, u, q, lo);
            for &m in &[0.0, -1.3, 2.0] {
                let p = Prior::gaussian(m, g).unwrap();
                let query = KernelQuery { t, u, q, lo, hi };
                let got = transition_prob(&p, &query, &l).unwrap();
                assert!(
                    (got - want).abs() < 1e-8,
                    "g={g} t={t} u={u} m={m}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn zero_elapsed_time_is_an_indicator() {
        let p = three_atom();
        let l = ladder();
        let mk = |q: f64| KernelQuery {
            t: 1.0,
            u: 0.0,
            q,
            lo: 0.3,
            hi: 0.7,
        };
        assert_eq!(transition_prob(&p, &mk(0.5), &l).unwrap(), 1.0);
        assert_eq!(transition_prob(&p, &mk(0.3), &l).unwrap(), 0.5);
        assert_eq!(transition_prob(&p, &mk(0.7), &l).unwrap(), 0.5);
        assert_eq!(transition_prob(&p, &mk(0.1), &l).unwrap(), 0.0);
        assert_eq!(transition_prob(&p, &mk(0.9), &l).unwrap(), 0.0);
    }

    #[test]
    fn query_validation() {
        let p = three_atom();
        let l = ladder();
        let base = KernelQuery {
            t: 1.0,
            u: 0.5,
            q: 0.4,
            lo: 0.3,
            hi: 0.7,
        };
        let bad_interval = KernelQuery {
            lo: 0.8,
            hi: 0.2,
            ..base
        };
        assert!(matches!(
            transition_prob(&p, &bad_interval, &l),
            Err(KernelError::InvalidInterval { .. })
        ));
        let bad_level = KernelQuery { q: 1.0, ..base };
        assert!(matches!(
            transition_prob(&p, &bad_level, &l),
            Err(KernelError::InvalidLevel { .. })
        ));
        let bad_time = KernelQuery { u: -0.1, ..base };
        assert!(matches!(
            transition_prob(&p, &bad_time, &l),
            Err(KernelError::InvalidTime)
        ));
    }

    // the landing distribution is an honest measure: splitting an interval
    // at an interior level preserves mass, and inclusion is monotone
    #[test]
    fn interval_additivity_and_inclusion() {
        let l = ladder();
        for p in [
            three_atom(),
            Prior::gaussian(0.3, 1.2).unwrap(),
            mix(),
        ] {
            for &(t, u, q) in &[(0.0, 0.5, 0.5), (1.0, 2.0, 0.25), (4.0, 0.1, 0.8)] {
                let (lo, mid, hi) = (0.08, 0.45, 0.83);
                let prob = |a: f64, b: f64| {
                    let query = KernelQuery { t, u, q, lo: a, hi: b };
                    transition_prob(&p, &query, &l).unwrap()
                };
                let whole = prob(lo, hi);
                let split = prob(lo, mid) + prob(mid, hi);
                assert!(
                    (whole - split).abs() < 1e-9,
                    "{p:?} t={t} u={u} q={q}: {whole} vs {split}"
                );
                assert!(prob(0.2, 0.6) <= whole + 1e-12);
            }
        }
    }

    #[test]
    fn terminal_payoff_frozen_oracles() {
        let got = terminal_payoff(&three_atom(), 0.5, 0.4, 2.0).unwrap();
        assert!((got - 0.031_665_144_008_011_544).abs() < 1e-13, "{got}");
        let got = terminal_payoff(&Prior::gaussian(0.3, 1.2).unwrap(), 0.5, 0.4, 2.0).unwrap();
        assert!((got - 0.222_979_436_954_372_23).abs() < 1e-12, "{got}");
        let got = terminal_payoff(&mix(), 0.5, 0.4, 2.0).unwrap();
        assert!((got - 0.146_434_770_944_412_006).abs() < 1e-12, "{got}");
    }

    #[test]
    fn terminal_payoff_at_the_horizon_is_the_payoff() {
        let p = three_atom();
        for &q in &[0.1, 0.4, 0.5, 0.9] {
            assert_eq!(terminal_payoff(&p, 2.0, q, 2.0).unwrap(), q.min(1.0 - q));
        }
        assert!(matches!(
            terminal_payoff(&p, 2.0, 0.4, 1.0),
            Err(KernelError::InvalidTime)
        ));
    }

    // composite Simpson over 2 * panels subintervals
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = 2 * panels;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    // independent check: brute double quadrature over (B, Z), splitting the
    // inner integral at the payoff kink so Simpson sees smooth pieces
    #[test]
    fn terminal_payoff_against_double_quadrature() {
        let gh = GaussHermite::new(128);
        for (p, tol) in [
            (three_atom(), 1e-9),
            (Prior::gaussian(0.3, 1.2).unwrap(), 1e-6),
            (mix(), 1e-6),
        ] {
            let (t, q, horizon) = (0.5, 0.4, 2.0);
            let u = horizon - t;
            let x = x_of_pi(&p, t, q).unwrap();
            let y_star = x_of_pi(&p, horizon, 0.5).unwrap();
            let su = sqrt(u);
            let phi = crate::math::normal_pdf;
            let inner = |b: f64| {
                // payoff is pi below the kink z*, 1 - pi above it
                let zs = ((y_star - x - b * u) / su).clamp(-10.0, 10.0);
                let below = simpson(
                    |z| pi_posterior(&p, horizon, x + b * u + su * z) * phi(z),
                    -10.0,
                    zs,
                    600,
                );
                let above = simpson(
                    |z| (1.0 - pi_posterior(&p, horizon, x + b * u + su * z)) * phi(z),
                    zs,
                    10.0,
                    600,
                );
                below + above
            };
            let want = match &p {
                Prior::Discrete { atoms } => discrete_expect(atoms, t, x, inner),
                _ => {
                    let comps = posterior_normals(&p, t, x);
                    comps
                        .iter()
                        .map(|&(w, mh, sh)| w * gh.gaussian_expect(mh, sh, inner))
                        .sum()
                }
            };
            let got = terminal_payoff(&p, t, q, horizon).unwrap();
            assert!((got - want).abs() < tol, "{p:?}: {got} vs {want}");
        }
    }

    // the level process is a martingale; E[pi_{t+u} | pi_t = q] = q via an
    // independent double-quadrature route sanity-checks the whole chain
    #[test]
    fn level_martingale_property()  {
        let gh = GaussHermite::new(128);
        for p in [three_atom(), Prior::gaussian(0.3, 1.2).unwrap(), mix()] {
            for &(t, u, q) in &[(0.5, 0.8, 0.4), (0.0, 1.0, 0.5), (2.0, 3.0, 0.7)] {
                let x = x_of_pi(&p, t, q).unwrap();
                let su = sqrt(u);
                let inner = |b: f64| {
                    gh.gaussian_expect(0.0, 1.0, |z| pi_posterior(&p, t + u, x + b * u + su * z))
                };
                let got: f64 = match &p {
                    Prior::Discrete { atoms } => discrete_expect(atoms, t, x, inner),
                    _ => posterior_normals(&p, t, x)
                        .iter()
                        .map(|&(w, mh, sh)| w * gh.gaussian_expect(mh, sh, inner))
                        .sum(),
                };
                assert!((got - q).abs() < 1e-6, "{p:?} t={t} u={u} q={q}: {got}");
            }
        }
    }

    // symmetric priors: reflecting levels about 1/2 leaves the kernel alone
    #[test]
    fn symmetric_prior_reflection() {
        let l = ladder();
        let priors = [
            Prior::discrete(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
            Prior::gaussian(0.0, 1.4).unwrap(),
            Prior::mixture(vec![(0.5, -0.8, 0.6), (0.5, 0.8, 0.6)]).unwrap(),
        ];
        for p in &priors {
            for &(t, u, q, lo, hi) in &[(0.3, 0.9, 0.35, 0.2, 0.6), (1.0, 0.2, 0.7, 0.5, 0.8)] {
                let fwd = KernelQuery { t, u, q, lo, hi };
                let mirror = KernelQuery {
                    t,
                    u,
                    q: 1.0 - q,
                    lo: 1.0 - hi,
                    hi: 1.0 - lo,
                };
                let a = transition_prob(p, &fwd, &l).unwrap();
                let b = transition_prob(p, &mirror, &l).unwrap();
                assert!((a - b).abs() < 1e-9, "{p:?}: {a} vs {b}");
            }
        }
    }
}
