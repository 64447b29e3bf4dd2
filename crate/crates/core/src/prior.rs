//! Prior distributions over the unknown drift.
//!
//! A prior `mu` over the drift `b` is observed through the exponential tilt
//! `exp(b x - b^2 t / 2) mu(db)`: every posterior summary needed elsewhere
//! (sign probability, conditional mean, volatility, tail masses) reduces to
//! half-line moments of that tilt. `half_moments` returns all of them in a
//! single stabilized pass using one shared exponent shift, so the tilted
//! weights never overflow even for extreme `(t, x)`.
//!
//! Supported families:
//! * `Discrete` - finitely many atoms; tilted sums are exact.
//! * `Gaussian` - conjugate: the tilt of `N(m, gamma^2)` is again normal
//!   with mean `(m + gamma^2 x)/(1 + t gamma^2)` and variance
//!   `gamma^2/(1 + t gamma^2)`, so half moments are truncated-normal moments.
//! * `GaussianMixture` - componentwise conjugate updates with reweighting.
//!
//! Continuous families outside this list are expected to be discretized by
//! the caller into `Discrete` atoms.

use alloc::vec::Vec;
use core::fmt;

use libm::{exp, log, sqrt};

use crate::math::{mills_ratio, normal_cdf, normal_pdf};

/// Threshold on `|mean/sd|` beyond which the small half-line moments switch
/// to the Mills-ratio form built on the scaled complementary error function.
const TAIL_SWITCH: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Prior {
    /// Atoms `(location, weight)`, sorted by location, weights summing to 1.
    Discrete { atoms: Vec<(f64, f64)> },
    Gaussian { m: f64, gamma: f64 },
    /// Components `(weight, m, gamma)`, weights summing to 1.
    GaussianMixture { components: Vec<(f64, f64, f64)> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorError {
    Empty,
    NonFinite,
    NonPositiveWeight { index: usize },
    WeightSum { sum: f64 },
    DuplicateAtom { location: f64 },
    NonPositiveSpread { index: usize },
    /// The prior puts mass 0 or 1 on `[0, inf)`, so the sign of the drift
    /// is already certain and the testing problem is degenerate.
    DegenerateSign { mass_nonneg: f64 },
}

impl fmt::Display for PriorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorError::Empty => write!(f, "prior needs at least one atom or component"),
            PriorError::NonFinite => write!(f, "prior parameters must be finite"),
            PriorError::NonPositiveWeight { index } => {
                write!(f, "weight at index {index} must be > 0")
            }
            PriorError::WeightSum { sum } => {
                write!(f, "weights must sum to 1 (tolerance 1e-9), got {sum}")
            }
            PriorError::DuplicateAtom { location } => {
                write!(f, "duplicate atom location {location}")
            }
            PriorError::NonPositiveSpread { index } => {
                write!(f, "gamma at index {index} must be > 0")
            }
            PriorError::DegenerateSign { mass_nonneg } => write!(
                f,
                "degenerate prior: mass on [0, inf) is {mass_nonneg}, but the sign test \
                 requires both signs to carry positive prior probability"
            ),
        }
    }
}

impl core::error::Error for PriorError {}

const WEIGHT_SUM_TOL: f64 = 1e-9;

impl Prior {
    /// Discrete prior from `(location, weight)` atoms (any order).
    pub fn discrete(mut atoms: Vec<(f64, f64)>) -> Result<Self, PriorError> {
        if atoms.is_empty() {
            return Err(PriorError::Empty);
        }
        let mut sum = 0.0;
        for (i, &(b, w)) in atoms.iter().enumerate() {
            if !b.is_finite() || !w.is_finite() {
                return Err(PriorError::NonFinite);
            }
            if w <= 0.0 {
                return Err(PriorError::NonPositiveWeight { index: i });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(PriorError::WeightSum { sum });
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
        for pair in atoms.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(PriorError::DuplicateAtom { location: pair[0].0 });
            }
        }
        let prior = Prior::Discrete { atoms };
        prior.check_sign_mass()?;
        Ok(prior)
    }

    pub fn gaussian(m: f64, gamma: f64) -> Result<Self, PriorError> {
        if !m.is_finite() || !gamma.is_finite() {
            return Err(PriorError::NonFinite);
        }
        if gamma <= 0.0 {
            return Err(PriorError::NonPositiveSpread { index: 0 });
        }
        Ok(Prior::Gaussian { m, gamma })
    }

    /// Mixture from `(weight, mean, gamma)` components.
    pub fn mixture(components: Vec<(f64, f64, f64)>) -> Result<Self, PriorError> {
        if components.is_empty() {
            return Err(PriorError::Empty);
        }
        let mut sum = 0.0;
        for (i, &(w, m, g)) in components.iter().enumerate() {
            if !w.is_finite() || !m.is_finite() || !g.is_finite() {
                return Err(PriorError::NonFinite);
            }
            if w <= 0.0 {
                return Err(PriorError::NonPositiveWeight { index: i });
            }
            if g <= 0.0 {
                return Err(PriorError::NonPositiveSpread { index: i });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(PriorError::WeightSum { sum });
        }
        Ok(Prior::GaussianMixture { components })
    }

    fn check_sign_mass(&self) -> Result<(), PriorError> {
        let mass = self.mass_nonneg();
        if mass <= 0.0 || mass >= 1.0 {
            return Err(PriorError::DegenerateSign { mass_nonneg: mass });
        }
        Ok(())
    }

    /// Prior probability `mu([0, inf))`; this is also the starting posterior.
    pub fn mass_nonneg(&self) -> f64 {
        match self {
            Prior::Discrete { atoms } => atoms.iter().filter(|a| a.0 >= 0.0).map(|a| a.1).sum(),
            Prior::Gaussian { m, gamma } => normal_cdf(m / gamma),
            Prior::GaussianMixture { components } => components
                .iter()
                .map(|&(w, m, g)| w * normal_cdf(m / g))
                .sum(),
        }
    }

    /// `(l, r)`: the supremum of support points below zero and the infimum of
    /// support points at or above zero. Full-support components give `(0, 0)`.
    pub fn support_gap(&self) -> (f64, f64) {
        match self {
            Prior::Discrete { atoms } => {
                let l = atoms
                    .iter()
                    .rev()
                    .find(|a| a.0 < 0.0)
                    .map(|a| a.0)
                    .unwrap_or(0.0);
                let r = atoms.iter().find(|a| a.0 >= 0.0).map(|a| a.0).unwrap_or(0.0);
                (l, r)
            }
            Prior::Gaussian { .. } | Prior::GaussianMixture { .. } => (0.0, 0.0),
        }
    }

    /// Whether the induced posterior volatility is symmetric about 1/2,
    /// which lets the solver treat the two boundaries as mirror images.
    /// True for every Gaussian, every two-atom discrete prior, and priors
    /// that are symmetric under `b -> -b`.
    pub fn symmetric_volatility(&self) -> bool {
        match self {
            Prior::Gaussian { .. } => true,
            Prior::Discrete { atoms } => {
                if atoms.len() == 2 {
                    return true;
                }
                if atoms.iter().any(|a| a.0 == 0.0) {
                    return false;
                }
                atoms.iter().all(|&(b, w)| {
                    atoms
                        .iter()
                        .any(|&(b2, w2)| (b2 + b).abs() <= 1e-12 && (w2 - w).abs() <= 1e-12)
                })
            }
            Prior::GaussianMixture { components } => {
                // a single component is a plain Gaussian prior
                components.len() == 1
                    || components.iter().all(|&(w, m, g)| {
                        components.iter().any(|&(w2, m2, g2)| {
                            (m2 + m).abs() <= 1e-12
                                && (w2 - w).abs() <= 1e-12
                                && (g2 - g).abs() <= 1e-12
                        })
                    })
            }
        }
    }

    /// Half-line moments of the tilted measure `exp(b x - b^2 t / 2) mu(db)`,
    /// all scaled by the common factor `exp(-log_scale)`.
    pub fn half_moments(&self, t: f64, x: f64) -> HalfMoments {
        debug_assert!(t >= 0.0 && t.is_finite() && x.is_finite());
        match self {
            Prior::Discrete { atoms } => {
                let log_scale = atoms
                    .iter()
                    .map(|&(b, _)| b * x - 0.5 * b * b * t)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut hm = HalfMoments {
                    log_scale,
                    ..HalfMoments::zero()
                };
                for &(b, w) in atoms {
                    let e = w * exp(b * x - 0.5 * b * b * t - log_scale);
                    if b < 0.0 {
                        hm.z_neg += e;
                        hm.m1_neg += e * b;
                        hm.m2_neg += e * b * b;
                    } else {
                        hm.z_pos += e;
                        hm.m1_pos += e * b;
                        hm.m2_pos += e * b * b;
                    }
                }
                hm
            }
            Prior::Gaussian { m, gamma } => {
                let comp = TiltedNormal::new(*m, *gamma, t, x);
                let mut hm = HalfMoments {
                    log_scale: comp.log_gain,
                    ..HalfMoments::zero()
                };
                hm.accumulate(&comp, 1.0);
                hm
            }
            Prior::GaussianMixture { components } => {
                let tilted: Vec<TiltedNormal> = components
                    .iter()
                    .map(|&(w, m, g)| TiltedNormal::weighted(w, m, g, t, x))
                    .collect();
                let log_scale = tilted
                    .iter()
                    .map(|c| c.log_gain)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut hm = HalfMoments {
                    log_scale,
                    ..HalfMoments::zero()
                };
                for comp in &tilted {
                    hm.accumulate(comp, exp(comp.log_gain - log_scale));
                }
                hm
            }
        }
    }
}

/// Scaled half-line moments of the tilted prior; the true moment of
/// `b^k 1_{b<0}` is `mk_neg * exp(log_scale)` and similarly for the
/// nonnegative side. Ratios of fields are scale-free.
#[derive(Clone, Copy, Debug)]
pub struct HalfMoments {
    /// Common exponent shift shared by all six scaled values.
    pub log_scale: f64,
    pub z_neg: f64,
    pub z_pos: f64,
    pub m1_neg: f64,
    pub m1_pos: f64,
    pub m2_neg: f64,
    pub m2_pos: f64,
}

impl HalfMoments {
    fn zero() -> Self {
        HalfMoments {
            log_scale: 0.0,
            z_neg: 0.0,
            z_pos: 0.0,
            m1_neg: 0.0,
            m1_pos: 0.0,
            m2_neg: 0.0,
            m2_pos: 0.0,
        }
    }

    /// Scaled total mass of the tilted measure.
    pub fn total(&self) -> f64 {
        self.z_neg + self.z_pos
    }

    /// Unclamped posterior probability of a nonnegative drift.
    pub fn pi_raw(&self) -> f64 {
        self.z_pos / self.total()
    }

    /// Posterior mean of the drift.
    pub fn mean(&self) -> f64 {
        (self.m1_neg + self.m1_pos) / self.total()
    }

    fn accumulate(&mut self, comp: &TiltedNormal, factor: f64) {
        let (zn, zp, m1n, m1p, m2n, m2p) = truncated_normal_moments(comp.mean, comp.sd);
        self.z_neg += factor * zn;
        self.z_pos += factor * zp;
        self.m1_neg += factor * m1n;
        self.m1_pos += factor * m1p;
        self.m2_neg += factor * m2n;
        self.m2_pos += factor * m2p;
    }
}

/// A Gaussian prior component after the exponential tilt: again normal, with
/// a total-mass gain tracked in log scale.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TiltedNormal {
    pub(crate) mean: f64,
    pub(crate) sd: f64,
    pub(crate) log_gain: f64,
}

impl TiltedNormal {
    pub(crate) fn new(m: f64, gamma: f64, t: f64, x: f64) -> Self {
        let denom = 1.0 + t * gamma * gamma;
        let mean = (m + gamma * gamma * x) / denom;
        let sd = gamma / sqrt(denom);
        // integral of the tilt against the component density, in logs:
        // mean^2/(2 sd^2) - m^2/(2 gamma^2) - log sqrt(denom)
        let log_gain =
            0.5 * mean * mean / (sd * sd) - 0.5 * m * m / (gamma * gamma) - 0.5 * log(denom);
        TiltedNormal { mean, sd, log_gain }
    }

    pub(crate) fn weighted(w: f64, m: f64, gamma: f64, t: f64, x: f64) -> Self {
        let mut c = Self::new(m, gamma, t, x);
        c.log_gain += log(w);
        c
    }
}

/// Half-line moments of `N(mean, sd^2)`: masses, first and second moments on
/// `(-inf, 0)` and `[0, inf)`. The side that is many standard deviations from
/// the mean is evaluated through the Mills ratio to dodge cancellation.
pub(crate) fn truncated_normal_moments(mean: f64, sd: f64) -> (f64, f64, f64, f64, f64, f64) {
    let a = mean / sd;
    if a >= TAIL_SWITCH {
        tail_moments(a, sd)
    } else if a <= -TAIL_SWITCH {
        // reflect b -> -b: halves swap and odd moments change sign
        let (zn, zp, m1n, m1p, m2n, m2p) = tail_moments(-a, sd);
        (zp, zn, -m1p, -m1n, m2p, m2n)
    } else {
        let zp = normal_cdf(a);
        let zn = normal_cdf(-a);
        let pdf = normal_pdf(a);
        let m1p = mean * zp + sd * pdf;
        let m1n = mean * zn - sd * pdf;
        let m2 = mean * mean + sd * sd;
        let m2p = m2 * zp + mean * sd * pdf;
        let m2n = m2 * zn - mean * sd * pdf;
        (zn, zp, m1n, m1p, m2n, m2p)
    }
}

// Moments when the negative half-line is `a >= TAIL_SWITCH` standard
// deviations below the mean. The mass comes straight from the survival
// function (the same expression the central branch uses, so the switch is
// seamless); the first and second moments share the factor phi(a) with
// brackets from the Mills ratio r = Phi(-a)/phi(a):
//   m1_neg = sd phi(a) (a r - 1)
//   m2_neg = sd^2 phi(a) ((a^2 + 1) r - a)
fn tail_moments(a: f64, sd: f64) -> (f64, f64, f64, f64, f64, f64) {
    let pdf = normal_pdf(a);
    let r = mills_ratio(a);
    let zn = normal_cdf(-a);
    let zp = 1.0 - zn;
    let mean = a * sd;
    let m1n = sd * pdf * (a * r - 1.0);
    let m1p = mean - m1n;
    let m2n = sd * sd * pdf * ((a * a + 1.0) * r - a);
    let m2p = mean * mean + sd * sd - m2n;
    (zn, zp, m1n, m1p, m2n, m2p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_atom() -> Prior {
        Prior::discrete(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn three_atom() -> Prior {
        Prior::discrete(vec![(-2.0, 0.3), (1.0, 0.4), (3.0, 0.3)]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            Prior::discrete(vec![]),
            Err(PriorError::Empty)
        ));
        assert!(matches!(
            Prior::discrete(vec![(1.0, 0.5), (2.0, 0.5)]),
            Err(PriorError::DegenerateSign { .. })
        ));
        assert!(matches!(
            Prior::discrete(vec![(-1.0, 0.5), (1.0, 0.6)]),
            Err(PriorError::WeightSum { .. })
        ));
        assert!(matches!(
            Prior::discrete(vec![(-1.0, 0.5), (-1.0, 0.5)]),
            Err(PriorError::DuplicateAtom { .. })
        ));
        assert!(matches!(
            Prior::discrete(vec![(1.0, 0.5), (1.0, 0.25), (-1.0, 0.25)]),
            Err(PriorError::DuplicateAtom { .. })
        ));
        assert!(matches!(
            Prior::gaussian(0.0, 0.0),
            Err(PriorError::NonPositiveSpread { .. })
        ));
        assert!(matches!(
            Prior::gaussian(f64::NAN, 1.0),
            Err(PriorError::NonFinite)
        ));
        assert!(matches!(
            Prior::mixture(vec![(0.5, 0.0, 1.0), (0.5, 1.0, -1.0)]),
            Err(PriorError::NonPositiveSpread { index: 1 })
        ));
        assert!(Prior::discrete(vec![(-0.5, 0.8), (0.0, 0.2)]).is_ok());
    }

    #[test]
    fn mass_and_gap() {
        assert!((two_atom().mass_nonneg() - 0.5).abs() < 1e-15);
        assert_eq!(three_atom().support_gap(), (-2.0, 1.0));
        let g = Prior::gaussian(0.3, 2.0).unwrap();
        assert_eq!(g.support_gap(), (0.0, 0.0));
        assert!((g.mass_nonneg() - normal_cdf(0.15)).abs() < 1e-15);
        let zero_atom = Prior::discrete(vec![(-0.5, 0.8), (0.0, 0.2)]).unwrap();
        assert_eq!(zero_atom.support_gap(), (-0.5, 0.0));
        assert!((zero_atom.mass_nonneg() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn symmetry_detection() {
        assert!(two_atom().symmetric_volatility());
        // every two-point prior has symmetric volatility, even with
        // lopsided weights and locations
        assert!(Prior::discrete(vec![(-2.0, 0.3), (1.0, 0.7)])
            .unwrap()
            .symmetric_volatility());
        assert!(!three_atom().symmetric_volatility());
        assert!(Prior::discrete(vec![(-2.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (2.0, 0.25)])
            .unwrap()
            .symmetric_volatility());
        assert!(Prior::gaussian(5.0, 0.1).unwrap().symmetric_volatility());
        assert!(Prior::mixture(vec![(0.5, -1.0, 0.7), (0.5, 1.0, 0.7)])
            .unwrap()
            .symmetric_volatility());
        assert!(!Prior::mixture(vec![(0.5, -1.0, 0.7), (0.5, 1.0, 0.8)])
            .unwrap()
            .symmetric_volatility());
    }

    // mpmath oracle: atoms (-1,.5),(1,.5) at t=1, x=2
    #[test]
    fn two_atom_posterior_oracle() {
        let hm = two_atom().half_moments(1.0, 2.0);
        assert!((hm.pi_raw() - 0.982_013_790_037_908_44).abs() < 1e-15);
        assert!((hm.mean() - 0.964_027_580_075_816_88).abs() < 1e-15);
    }

    // raw half moments of N(0.7, 1.3^2) at t = 0, x = 0 (mpmath)
    #[test]
    fn gaussian_raw_half_moments_oracle() {
        let p = Prior::gaussian(0.7, 1.3).unwrap();
        let hm = p.half_moments(0.0, 0.0);
        assert!(hm.log_scale.abs() < 1e-14);
        assert!((hm.z_pos - 0.704_870_774_342_614_06).abs() < 1e-15);
        assert!((hm.z_neg - 0.295_129_225_657_385_94).abs() < 1e-15);
        assert!((hm.m1_pos - 0.942_044_971_156_208_26).abs() < 1e-15);
        assert!((hm.m1_neg - (-0.242_044_971_156_208_26)).abs() < 1e-15);
        assert!((hm.m2_pos - 1.850_663_088_448_363_5).abs() < 1e-14);
        assert!((hm.m2_neg - 0.329_336_911_551_636_45).abs() < 1e-14);
    }

    #[test]
    fn discrete_raw_half_moments_at_origin() {
        let hm = three_atom().half_moments(0.0, 0.0);
        assert!(hm.log_scale.abs() < 1e-15);
        assert!((hm.z_pos - 0.7).abs() < 1e-15);
        assert!((hm.z_neg - 0.3).abs() < 1e-15);
        assert!((hm.m1_pos - (0.4 + 0.9)).abs() < 1e-15);
        assert!((hm.m1_neg - (-0.6)).abs() < 1e-15);
        assert!((hm.m2_pos - (0.4 + 2.7)).abs() < 1e-14);
        assert!((hm.m2_neg - 1.2).abs() < 1e-14);
    }

    // conjugate posterior of N(0,1) at (t,x) = (3,2) is N(0.5, 0.5^2)
    #[test]
    fn gaussian_conjugate_update() {
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        let hm = p.half_moments(3.0, 2.0);
        assert!((hm.mean() - 0.5).abs() < 1e-14);
        assert!((hm.pi_raw() - normal_cdf(1.0)).abs() < 1e-14);
        let m2 = (hm.m2_neg + hm.m2_pos) / hm.total();
        assert!((m2 - (0.25 + 0.25)).abs() < 1e-14);
    }

    // mixture oracle (mpmath quadrature): 0.6 N(-1, 0.8^2) + 0.4 N(1.5, 0.5^2)
    #[test]
    fn mixture_posterior_oracle() {
        let p = Prior::mixture(vec![(0.6, -1.0, 0.8), (0.4, 1.5, 0.5)]).unwrap();
        let hm = p.half_moments(0.6, 1.1);
        assert!(
            (hm.pi_raw() - 0.876_131_380_168_197_7).abs() < 1e-13,
            "pi = {}",
            hm.pi_raw()
        );
        assert!(
            (hm.mean() - 1.195_366_724_951_767).abs() < 1e-12,
            "mean = {}",
            hm.mean()
        );
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        let priors = [
            two_atom(),
            three_atom(),
            Prior::gaussian(0.0, 1.0).unwrap(),
            Prior::mixture(vec![(0.6, -1.0, 0.8), (0.4, 1.5, 0.5)]).unwrap(),
        ];
        for p in &priors {
            for &(t, x) in &[
                (0.0, 1e6),
                (0.0, -1e6),
                (1e6, 1e6),
                (1e6, -1e6),
                (1e6, 0.0),
                (500.0, 250.0),
            ] {
                let hm = p.half_moments(t, x);
                for v in [hm.log_scale, hm.z_neg, hm.z_pos, hm.m1_neg, hm.m1_pos, hm.m2_neg, hm.m2_pos]
                {
                    assert!(v.is_finite(), "{p:?} at ({t},{x}) gave {hm:?}");
                }
                assert!(hm.total() > 0.0);
            }
        }
    }

    #[test]
    fn tail_switch_is_seamless() {
        // compare the two computation branches just inside and outside the
        // switch for a prior whose posterior mean crosses ~8 sd
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        for &x in &[7.99, 8.01, -7.99, -8.01] {
            let hm = p.half_moments(0.0, x);
            let a = x; // posterior at t=0 is N(x, 1)
            let zn_ref = normal_cdf(-a);
            assert!((hm.z_neg - zn_ref).abs() <= 1e-15 * zn_ref.max(1e-30) + 1e-300);
            // the halves must recombine to the full moments
            assert!(((hm.m1_neg + hm.m1_pos) - a).abs() < 1e-12);
            assert!(((hm.m2_neg + hm.m2_pos) - (a * a + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn deep_tail_moments_keep_signs() {
        // far tail: negative-side mass is tiny but must stay >= 0, and
        // m1_neg <= 0 <= m1_pos
        for &a in &[10.0, 25.0, 35.0] {
            let (zn, zp, m1n, m1p, m2n, m2p) = truncated_normal_moments(a, 1.0);
            assert!(zn >= 0.0 && zp > 0.0);
            assert!(m1n <= 0.0 && m1p > 0.0);
            assert!(m2n >= 0.0 && m2p > 0.0);
            assert!(((m1n + m1p) - a).abs() < 1e-12 * a);
        }
    }
}
