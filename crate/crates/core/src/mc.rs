//! Monte Carlo certification of a stopping band.
//!
//! Paths draw a drift from the prior, then advance `X` with exact normal
//! increments on a fixed grid. The band is applied in `x` coordinates:
//! since the level is increasing in `x` at fixed `t`, the stopping test
//! `pi <= b1 or pi >= b2` becomes two precomputed thresholds per grid
//! time, so the hot loop does no special-function work. At the stop the
//! sign is called by which side of the median line `x(t, 1/2)` the path
//! sits on, and the path pays one on a wrong call plus `c` per unit of
//! elapsed time. Paths still running at the simulation horizon are
//! censored: they call the sign anyway and are flagged, because for a
//! perpetual band the tail beyond the horizon is unobserved.
//!
//! Everything is deterministic in the seed. Each path (or antithetic
//! pair) owns a counter-derived ChaCha8 stream, so results do not depend
//! on scheduling and a pair shares its drift and noise magnitudes with
//! the signs flipped.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::filter::{pi_posterior, x_of_pi, FilterError};
use crate::math::{inverse_normal_cdf, KahanSum};
use crate::prior::Prior;
use crate::solver::{BoundaryCurve, SolverError};

/// Fraction of censored paths above which the estimate is flagged.
pub const CENSOR_WARN_FRAC: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Grid step; the last step shrinks to land exactly on the horizon.
    pub dt: f64,
    /// Censoring time of the simulation.
    pub horizon: f64,
    pub seed: u64,
    /// Pair paths with mirrored noise; `n_paths` must then be even.
    pub antithetic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskEstimate {
    /// Mean of `1{wrong call} + c tau` over paths.
    pub risk_mean: f64,
    /// Standard error of `risk_mean`; `None` below two sampling units.
    /// Antithetic runs count each pair as one unit.
    pub risk_stderr: Option<f64>,
    pub error_prob: f64,
    pub expected_tau: f64,
    pub censored_frac: f64,
    pub n_paths: usize,
    pub censoring_warning: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminalProbe {
    /// Mean of `min(pi_T, 1 - pi_T)`: how much ambiguity is left at `T`.
    pub min_mean: f64,
    pub min_stderr: Option<f64>,
    /// Fraction of paths whose level ended above 1/2.
    pub frac_above_half: f64,
    pub n_paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum McError {
    BadConfig { what: &'static str },
    Filter(FilterError),
    Curve(SolverError),
}

impl core::fmt::Display for McError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            McError::BadConfig { what } => write!(f, "bad simulation config: {what}"),
            McError::Filter(e) => write!(f, "threshold setup failed: {e}"),
            McError::Curve(e) => write!(f, "boundary curve rejected: {e}"),
        }
    }
}

impl core::error::Error for McError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            McError::Filter(e) => Some(e),
            McError::Curve(e) => Some(e),
            _ => None,
        }
    }
}

impl From<FilterError> for McError {
    fn from(e: FilterError) -> Self {
        McError::Filter(e)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ (stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

// uniform on the open interval, symmetric about 1/2
fn open01(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    inverse_normal_cdf(open01(rng.next_u64()))
}

fn draw_drift(prior: &Prior, rng: &mut ChaCha8Rng) -> f64 {
    match prior {
        Prior::Discrete { atoms } => {
            let u = open01(rng.next_u64());
            let mut acc = 0.0;
            for &(b, w) in atoms.iter() {
                acc += w;
                if u <= acc {
                    return b;
                }
            }
            atoms.last().unwrap().0
        }
        Prior::Gaussian { m, gamma } => m + gamma * draw_normal(rng),
        Prior::GaussianMixture { components } => {
            let u = open01(rng.next_u64());
            let mut acc = 0.0;
            for &(w, m, gamma) in components.iter() {
                acc += w;
                if u <= acc {
                    return m + gamma * draw_normal(rng);
                }
            }
            let &(_, m, gamma) = components.last().unwrap();
            m + gamma * draw_normal(rng)
        }
    }
}

fn validate_sim(sim: &SimConfig) -> Result<(), McError> {
    if sim.n_paths == 0 {
        return Err(McError::BadConfig {
            what: "n_paths must be positive",
        });
    }
    if !(sim.dt.is_finite() && sim.dt > 0.0) {
        return Err(McError::BadConfig {
            what: "dt must be positive and finite",
        });
    }
    if !(sim.horizon.is_finite() && sim.horizon > 0.0) {
        return Err(McError::BadConfig {
            what: "horizon must be positive and finite",
        });
    }
    if sim.antithetic && !sim.n_paths.is_multiple_of(2) {
        return Err(McError::BadConfig {
            what: "antithetic runs need an even n_paths",
        });
    }
    Ok(())
}

// grid times plus the x-space stop thresholds and median line at each
struct PolicyGrid {
    times: Vec<f64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    x_mid: Vec<f64>,
}

impl PolicyGrid {
    fn build(prior: &Prior, curve: &BoundaryCurve, sim: &SimConfig) -> Result<Self, McError> {
        let n_steps = libm::ceil(sim.horizon / sim.dt) as usize;
        let n_steps = n_steps.max(1);
        let mut times = Vec::with_capacity(n_steps + 1);
        for k in 0..=n_steps {
            times.push((k as f64 * sim.dt).min(sim.horizon));
        }
        *times.last_mut().unwrap() = sim.horizon;
        let mut x_lo = Vec::with_capacity(times.len());
        let mut x_hi = Vec::with_capacity(times.len());
        let mut x_mid = Vec::with_capacity(times.len());
        for &t in &times {
            let (b1, b2) = curve.eval(t);
            x_lo.push(x_of_pi(prior, t, b1)?);
            x_hi.push(x_of_pi(prior, t, b2)?);
            x_mid.push(x_of_pi(prior, t, 0.5)?);
        }
        Ok(PolicyGrid {
            times,
            x_lo,
            x_hi,
            x_mid,
        })
    }
}

struct PathOutcome {
    tau: f64,
    wrong: bool,
    censored: bool,
}

// walk one noise realization; `flip` mirrors the increments
fn run_path(
    grid: &PolicyGrid,
    drift: f64,
    truth_nonneg: bool,
    noise: &[f64],
    flip: bool,
) -> PathOutcome {
    let n = grid.times.len();
    let mut x = 0.0;
    for k in 0..n {
        if k > 0 {
            let h = grid.times[k] - grid.times[k - 1];
            let z = if flip { -noise[k - 1] } else { noise[k - 1] };
            x += drift * h + libm::sqrt(h) * z;
        }
        if x <= grid.x_lo[k] || x >= grid.x_hi[k] {
            let call_nonneg = x >= grid.x_mid[k];
            return PathOutcome {
                tau: grid.times[k],
                wrong: call_nonneg != truth_nonneg,
                censored: false,
            };
        }
    }
    let last = n - 1;
    let call_nonneg = x >= grid.x_mid[last];
    PathOutcome {
        tau: grid.times[last],
        wrong: call_nonneg != truth_nonneg,
        censored: true,
    }
}

/// Estimate the Bayes risk `E[1{wrong call} + c tau]` of the stopping band
/// under the prior, by simulation on a fixed grid.
pub fn evaluate_policy(
    prior: &Prior,
    c: f64,
    curve: &BoundaryCurve,
    sim: &SimConfig,
) -> Result<RiskEstimate, McError> {
    validate_sim(sim)?;
    if !(c.is_finite() && c >= 0.0) {
        return Err(McError::BadConfig {
            what: "cost rate must be nonnegative and finite",
        });
    }
    curve.validate().map_err(McError::Curve)?;
    let grid = PolicyGrid::build(prior, curve, sim)?;
    let n_noise = grid.times.len() - 1;
    let mut noise = Vec::with_capacity(n_noise);

    let mut loss_sum = KahanSum::default();
    let mut tau_sum = KahanSum::default();
    let mut wrong_count = 0usize;
    let mut censored_count = 0usize;
    // per sampling unit (path, or pair mean) for the second stderr pass
    let mut units: Vec<f64> = Vec::new();

    let consume = |out: &PathOutcome,
                       loss_sum: &mut KahanSum,
                       tau_sum: &mut KahanSum,
                       wrong: &mut usize,
                       censored: &mut usize|
     -> f64 {
        let loss = if out.wrong { 1.0 } else { 0.0 } + c * out.tau;
        loss_sum.add(loss);
        tau_sum.add(out.tau);
        if out.wrong {
            *wrong += 1;
        }
        if out.censored {
            *censored += 1;
        }
        loss
    };

    if sim.antithetic {
        let n_pairs = sim.n_paths / 2;
        units.reserve(n_pairs);
        for pair in 0..n_pairs {
            let mut rng = stream_rng(sim.seed, pair as u64);
            let drift = draw_drift(prior, &mut rng);
            let truth_nonneg = drift >= 0.0;
            noise.clear();
            for _ in 0..n_noise {
                noise.push(draw_normal(&mut rng));
            }
            let a = run_path(&grid, drift, truth_nonneg, &noise, false);
            let b = run_path(&grid, drift, truth_nonneg, &noise, true);
            let la = consume(
                &a,
                &mut loss_sum,
                &mut tau_sum,
                &mut wrong_count,
                &mut censored_count,
            );
            let lb = consume(
                &b,
                &mut loss_sum,
                &mut tau_sum,
                &mut wrong_count,
                &mut censored_count,
            );
            units.push(0.5 * (la + lb));
        }
    } else {
        units.reserve(sim.n_paths);
        for idx in 0..sim.n_paths {
            let mut rng = stream_rng(sim.seed, idx as u64);
            let drift = draw_drift(prior, &mut rng);
            let truth_nonneg = drift >= 0.0;
            noise.clear();
            for _ in 0..n_noise {
                noise.push(draw_normal(&mut rng));
            }
            let out = run_path(&grid, drift, truth_nonneg, &noise, false);
            let loss = consume(
                &out,
                &mut loss_sum,
                &mut tau_sum,
                &mut wrong_count,
                &mut censored_count,
            );
            units.push(loss);
        }
    }

    let n = sim.n_paths as f64;
    let risk_mean = loss_sum.value() / n;
    let risk_stderr = stderr_of_mean(&units);
    let censored_frac = censored_count as f64 / n;
    Ok(RiskEstimate {
        risk_mean,
        risk_stderr,
        error_prob: wrong_count as f64 / n,
        expected_tau: tau_sum.value() / n,
        censored_frac,
        n_paths: sim.n_paths,
        censoring_warning: censored_frac > CENSOR_WARN_FRAC,
    })
}

fn stderr_of_mean(units: &[f64]) -> Option<f64> {
    let n = units.len();
    if n < 2 {
        return None;
    }
    let mut total = KahanSum::default();
    for &x in units {
        total.add(x);
    }
    let mean = total.value() / n as f64;
    let mut ss = KahanSum::default();
    for &x in units {
        let d = x - mean;
        ss.add(d * d);
    }
    Some(libm::sqrt(ss.value() / ((n - 1) as f64 * n as f64)))
}

/// Sample the level at a fixed time `t` in one exact step and report how
/// concentrated the posterior has become.
pub fn terminal_distribution_probe(
    prior: &Prior,
    t: f64,
    sim: &SimConfig,
) -> Result<TerminalProbe, McError> {
    validate_sim(sim)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(McError::BadConfig {
            what: "probe time must be positive and finite",
        });
    }
    let st = libm::sqrt(t);
    let mut min_units: Vec<f64> = Vec::with_capacity(sim.n_paths);
    let mut min_sum = KahanSum::default();
    let mut above = 0usize;
    for idx in 0..sim.n_paths {
        let mut rng = stream_rng(sim.seed, idx as u64);
        let drift = draw_drift(prior, &mut rng);
        let z = draw_normal(&mut rng);
        let x = drift * t + st * z;
        let pi = pi_posterior(prior, t, x);
        if pi > 0.5 {
            above += 1;
        }
        let m = pi.min(1.0 - pi);
        min_sum.add(m);
        min_units.push(m);
    }
    let n = sim.n_paths as f64;
    Ok(TerminalProbe {
        min_mean: min_sum.value() / n,
        min_stderr: stderr_of_mean(&min_units),
        frac_above_half: above as f64 / n,
        n_paths: sim.n_paths,
    })
}
