//! Free-boundary solver for the optimal stopping band.
//!
//! Write `g(q) = min(q, 1 - q)` for the cost of calling the sign at level
//! `q`, and `V(t, q)` for the least total cost from `(t, q)`. With sampling
//! cost `c` per unit time the value admits the representation
//!
//! ```text
//!     V(t, q) = E[g(pi_T) | pi_t = q]
//!             + c * integral_t^T P(b1(u) <= pi_u <= b2(u) | pi_t = q) du
//! ```
//!
//! valid at every `(t, q)`, because `V` satisfies the same parabolic
//! equation in both regions once the boundary is optimal. Setting `q` to a
//! boundary value, where `V = g`, turns the representation into a pair of
//! integral equations for `b1, b2` with `b_i(T) = 1/2`. They are solved
//! backward in time: the discretized system is lower triangular (each node
//! only references later ones; the open cell at elapsed time zero enters as
//! the constant 1/2 because the conditioning point sits on the boundary),
//! so one sweep solves it and a second confirms the fixed point.
//!
//! Priors with a symmetric level process need a single equation and the
//! mirror `b2 = 1 - b1`. A pure normal prior swaps the quadrature kernel
//! for the closed form, cutting the solve cost by an order of magnitude.
//! The perpetual band is approximated by doubling the horizon (and the
//! grid) until the boundary stops moving on the early half of the window.

use alloc::vec;
use alloc::vec::Vec;
use libm::{log, sqrt};

use crate::filter::{sigma_vol, x_of_pi, FilterError, PI_MIN};
use crate::kernel::{interval_prob_given_x, terminal_payoff, KernelError};
use crate::math::{inverse_normal_cdf, normal_cdf};
use crate::prior::Prior;
use crate::quad::{QuadLadder, MAX_QUAD_ORDER};

/// Lowest level the root search will resolve; boundaries below it are
/// reported as exactly this floor.
pub const LEVEL_FLOOR: f64 = 1e-9;
/// Slack allowed when checking boundary monotonicity in time.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Hard cap on the number of time intervals the perpetual ladder uses.
pub const PERPETUAL_N_CAP: usize = 4096;
// Gross-violation threshold for the widening-in-horizon sanity check; finer
// differences are indistinguishable from discretization error.
const HORIZON_SLACK: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Terminal time of the finite problem, or the starting horizon of the
    /// perpetual ladder.
    pub horizon: f64,
    /// Number of time intervals (nodes are one more), at least 16. Keep
    /// `c * horizon / n_time` a small fraction of the unit error cost:
    /// expensive sampling makes the band narrow, and a grid too coarse to
    /// resolve it reports the band as pinned at 1/2 (stop at once) rather
    /// than resolving sub-grid structure.
    pub n_time: usize,
    /// Base Gauss-Hermite order for the transition quadrature.
    pub quad_order: usize,
    /// Width at which the boundary root bisection stops.
    pub root_tol: f64,
    /// Sweep-to-sweep movement that counts as converged.
    pub fixed_point_tol: f64,
    pub max_sweeps: usize,
    /// Sup-norm agreement between successive horizon doublings.
    pub perpetual_tol: f64,
    /// Largest horizon the perpetual ladder will try.
    pub perpetual_t_cap: f64,
    /// Spend a quarter of the intervals on the last tenth of the horizon,
    /// square-root spaced, to resolve the boundary's terminal bend.
    pub tail_cluster: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            horizon: 1.0,
            n_time: 128,
            quad_order: 64,
            root_tol: 1e-9,
            fixed_point_tol: 1e-7,
            max_sweeps: 50,
            perpetual_tol: 1e-4,
            perpetual_t_cap: 128.0,
            tail_cluster: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SolverError::BadConfig {
                what: "horizon must be positive and finite",
            });
        }
        if self.n_time < 16 {
            return Err(SolverError::BadConfig {
                what: "n_time must be at least 16",
            });
        }
        if self.quad_order < 2 || self.quad_order > MAX_QUAD_ORDER {
            return Err(SolverError::BadConfig {
                what: "quad_order outside [2, 512]",
            });
        }
        if !(self.root_tol > 0.0 && self.fixed_point_tol > 0.0 && self.perpetual_tol > 0.0) {
            return Err(SolverError::BadConfig {
                what: "tolerances must be positive",
            });
        }
        if self.max_sweeps == 0 {
            return Err(SolverError::BadConfig {
                what: "max_sweeps must be at least 1",
            });
        }
        if !(self.perpetual_t_cap.is_finite() && self.perpetual_t_cap >= self.horizon) {
            return Err(SolverError::BadConfig {
                what: "perpetual_t_cap must be finite and at least the starting horizon",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HorizonKind {
    Finite { horizon: f64 },
    /// Horizon-doubling approximation of the perpetual problem; trust the
    /// curve on `[0, t_effective]`.
    PerpetualApprox { t_effective: f64 },
}

#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    pub times: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub kind: HorizonKind,
}

impl BoundaryCurve {
    /// Boundary pair at `t`, linearly interpolated; outside the stored range
    /// the end values extend as constants.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let times = &self.times;
        let n = times.len();
        if t <= times[0] {
            return (self.b1[0], self.b2[0]);
        }
        if t >= times[n - 1] {
            return (self.b1[n - 1], self.b2[n - 1]);
        }
        // binary search for the segment with times[i] <= t < times[i+1]
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if times[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - times[lo]) / (times[hi] - times[lo]);
        (
            self.b1[lo] + w * (self.b1[hi] - self.b1[lo]),
            self.b2[lo] + w * (self.b2[hi] - self.b2[lo]),
        )
    }

    /// Structural checks: consistent lengths, increasing times, levels in
    /// range on the correct side of 1/2, monotone approach to the terminal
    /// condition (with slack for root noise), and `b = 1/2` at a finite
    /// horizon.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.times.len();
        if n == 0 {
            return Err(SolverError::EmptyCurve);
        }
        if self.b1.len() != n || self.b2.len() != n {
            return Err(SolverError::LengthMismatch);
        }
        for i in 0..n {
            if !self.times[i].is_finite() || (i > 0 && self.times[i] <= self.times[i - 1]) {
                return Err(SolverError::TimesNotIncreasing { index: i });
            }
            let (lo, hi) = (self.b1[i], self.b2[i]);
            if !(lo.is_finite() && hi.is_finite())
                || !(PI_MIN..=0.5).contains(&lo)
                || !(0.5..=1.0 - PI_MIN).contains(&hi)
            {
                return Err(SolverError::LevelOutOfRange { index: i });
            }
            if i > 0
                && (self.b1[i] < self.b1[i - 1] - MONOTONE_SLACK
                    || self.b2[i] > self.b2[i - 1] + MONOTONE_SLACK)
            {
                return Err(SolverError::NonMonotone { index: i });
            }
        }
        if let HorizonKind::Finite { .. } = self.kind {
            if (self.b1[n - 1] - 0.5).abs() > MONOTONE_SLACK
                || (self.b2[n - 1] - 0.5).abs() > MONOTONE_SLACK
            {
                return Err(SolverError::TerminalNotHalf);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverError {
    BadConfig { what: &'static str },
    BadCost { c: f64 },
    Kernel(KernelError),
    EmptyCurve,
    LengthMismatch,
    TimesNotIncreasing { index: usize },
    LevelOutOfRange { index: usize },
    NonMonotone { index: usize },
    TerminalNotHalf,
    /// Doubling the horizon moved the band the wrong way by more than
    /// discretization noise can explain.
    HorizonRegression,
    NodeOutOfRange { index: usize },
    /// Value queries need a finite-horizon curve (use the full curve of a
    /// perpetual solve, not its truncation).
    NeedsFiniteCurve,
}

impl core::fmt::Display for SolverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolverError::BadConfig { what } => write!(f, "bad solver config: {what}"),
            SolverError::BadCost { c } => {
                write!(f, "sampling cost must be positive and finite, got {c}")
            }
            SolverError::Kernel(e) => write!(f, "kernel evaluation failed: {e}"),
            SolverError::EmptyCurve => write!(f, "boundary curve has no nodes"),
            SolverError::LengthMismatch => {
                write!(f, "boundary curve arrays have mismatched lengths")
            }
            SolverError::TimesNotIncreasing { index } => {
                write!(f, "curve times must increase strictly (node {index})")
            }
            SolverError::LevelOutOfRange { index } => write!(
                f,
                "boundary levels must satisfy 0 < b1 <= 1/2 <= b2 < 1 (node {index})"
            ),
            SolverError::NonMonotone { index } => write!(
                f,
                "boundaries must narrow toward the horizon (node {index})"
            ),
            SolverError::TerminalNotHalf => {
                write!(f, "a finite-horizon curve must end at b1 = b2 = 1/2")
            }
            SolverError::HorizonRegression => {
                write!(f, "band narrowed when the horizon doubled; solve is inconsistent")
            }
            SolverError::NodeOutOfRange { index } => {
                write!(f, "time node {index} outside the curve")
            }
            SolverError::NeedsFiniteCurve => {
                write!(f, "operation requires a finite-horizon curve")
            }
        }
    }
}

impl core::error::Error for SolverError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            SolverError::Kernel(e) => Some(e),
            _ => None,
        }
    }
}

impl From<KernelError> for SolverError {
    fn from(e: KernelError) -> Self {
        SolverError::Kernel(e)
    }
}

impl From<FilterError> for SolverError {
    fn from(e: FilterError) -> Self {
        SolverError::Kernel(KernelError::Filter(e))
    }
}

fn build_grid(cfg: &SolverConfig) -> Vec<f64> {
    let n = cfg.n_time;
    let t_end = cfg.horizon;
    let mut times = Vec::with_capacity(n + 1);
    if !cfg.tail_cluster {
        for i in 0..=n {
            times.push(t_end * i as f64 / n as f64);
        }
    } else {
        let n_head = (3 * n) / 4;
        let n_tail = n - n_head;
        let split = 0.9 * t_end;
        for i in 0..n_head {
            times.push(split * i as f64 / n_head as f64);
        }
        // nodes pile up toward the horizon like sqrt(T - t)
        for i in 0..=n_tail {
            let s = 1.0 - i as f64 / n_tail as f64;
            times.push(t_end - (t_end - split) * s * s);
        }
    }
    times
}

/// Everything one backward solve needs: the grid, the working boundary
/// levels, and per-node caches for whichever kernel route the prior uses
/// (`x`-thresholds for quadrature, probit levels for the normal closed
/// form).
struct Workspace<'a> {
    prior: &'a Prior,
    ladder: QuadLadder,
    /// `Some(gamma)` for a pure normal prior: use the closed-form kernel.
    gamma: Option<f64>,
    times: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    xlo: Vec<f64>,
    xhi: Vec<f64>,
    zlo: Vec<f64>,
    zhi: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(prior: &'a Prior, times: Vec<f64>, quad_order: usize) -> Result<Self, SolverError> {
        let n = times.len();
        let gamma = match prior {
            Prior::Gaussian { gamma, .. } => Some(*gamma),
            _ => None,
        };
        let mut ws = Workspace {
            prior,
            ladder: QuadLadder::new(quad_order),
            gamma,
            times,
            b1: vec![0.5; n],
            b2: vec![0.5; n],
            xlo: vec![0.0; n],
            xhi: vec![0.0; n],
            zlo: vec![0.0; n],
            zhi: vec![0.0; n],
        };
        for j in 0..n {
            ws.set_node(j, 0.5, 0.5)?;
        }
        Ok(ws)
    }

    fn from_curve(
        prior: &'a Prior,
        curve: &BoundaryCurve,
        quad_order: usize,
    ) -> Result<Self, SolverError> {
        curve.validate()?;
        let mut ws = Self::new(prior, curve.times.clone(), quad_order)?;
        for j in 0..curve.times.len() {
            ws.set_node(j, curve.b1[j], curve.b2[j])?;
        }
        Ok(ws)
    }

    fn set_node(&mut self, j: usize, lo: f64, hi: f64) -> Result<(), SolverError> {
        self.b1[j] = lo;
        self.b2[j] = hi;
        if self.gamma.is_some() {
            self.zlo[j] = inverse_normal_cdf(lo);
            self.zhi[j] = inverse_normal_cdf(hi);
        } else {
            let t = self.times[j];
            self.xlo[j] = x_of_pi(self.prior, t, lo)?;
            self.xhi[j] = x_of_pi(self.prior, t, hi)?;
        }
        Ok(())
    }

    fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Trapezoid of the in-band occupation probability over `(t_k, T]`,
    /// seen from level `q` at node `k`. The cell at elapsed time zero is
    /// excluded; its integrand is the indicator of the current band, which
    /// depends on where `q` sits, so callers add it themselves.
    fn q_tail(&self, k: usize, q: f64) -> Result<f64, SolverError> {
        let n = self.times.len() - 1;
        if k >= n {
            return Ok(0.0);
        }
        let tk = self.times[k];
        let mut acc = 0.0;
        match self.gamma {
            Some(gamma) => {
                let z_now = inverse_normal_cdf(q);
                let gt2 = gamma * gamma / (1.0 + tk * gamma * gamma);
                for j in k + 1..n {
                    let w = 0.5 * (self.times[j + 1] - self.times[j - 1]);
                    let u = self.times[j] - tk;
                    let shrink = sqrt(1.0 + u * gt2);
                    let den = sqrt(gt2 * u);
                    let p = normal_cdf((self.zhi[j] - z_now * shrink) / den)
                        - normal_cdf((self.zlo[j] - z_now * shrink) / den);
                    acc += w * p.max(0.0);
                }
            }
            None => {
                let x = x_of_pi(self.prior, tk, q)?;
                for j in k + 1..n {
                    let w = 0.5 * (self.times[j + 1] - self.times[j - 1]);
                    let u = self.times[j] - tk;
                    let p = interval_prob_given_x(
                        self.prior,
                        tk,
                        x,
                        u,
                        self.xlo[j],
                        self.xhi[j],
                        &self.ladder,
                    );
                    acc += w * p;
                }
            }
        }
        // the node at T carries a zero-width band and contributes nothing
        Ok(acc)
    }

    // weight of the excluded elapsed-time-zero trapezoid cell
    fn cell0_weight(&self, k: usize) -> f64 {
        let n = self.times.len() - 1;
        if k >= n {
            0.0
        } else {
            0.5 * (self.times[k + 1] - self.times[k])
        }
    }

    /// `V(t_k, q)` under the current boundary: terminal cost plus expected
    /// sampling charge. The time-zero cell uses the honest indicator of
    /// the band at node `k` (one half exactly on the boundary).
    fn value(&self, c: f64, k: usize, q: f64) -> Result<f64, SolverError> {
        let term = terminal_payoff(self.prior, self.times[k], q, self.horizon())?;
        let p0 = if q > self.b1[k] && q < self.b2[k] {
            1.0
        } else if q == self.b1[k] || q == self.b2[k] {
            0.5
        } else {
            0.0
        };
        Ok(term + c * (self.cell0_weight(k) * p0 + self.q_tail(k, q)?))
    }

    // root functions fix the time-zero cell at the boundary value 1/2: the
    // equations hold where the trial level IS the boundary, and a constant
    // cell keeps them smooth in q and independent of the node's unknowns
    fn g_low(&self, c: f64, k: usize, q: f64) -> Result<f64, SolverError> {
        let term = terminal_payoff(self.prior, self.times[k], q, self.horizon())?;
        let v = term + c * (0.5 * self.cell0_weight(k) + self.q_tail(k, q)?);
        Ok(q - v)
    }

    fn g_high(&self, c: f64, k: usize, q: f64) -> Result<f64, SolverError> {
        let term = terminal_payoff(self.prior, self.times[k], q, self.horizon())?;
        let v = term + c * (0.5 * self.cell0_weight(k) + self.q_tail(k, q)?);
        Ok((1.0 - q) - v)
    }

    fn solve_node(
        &self,
        k: usize,
        c: f64,
        symmetric: bool,
        root_tol: f64,
    ) -> Result<(f64, f64), SolverError> {
        let f_half = self.g_low(c, k, 0.5)?;
        if f_half <= 0.0 {
            // stopping at 1/2 already beats sampling: band is closed here
            return Ok((0.5, 0.5));
        }
        let fa = self.g_low(c, k, LEVEL_FLOOR)?;
        let b1 = if fa >= 0.0 {
            LEVEL_FLOOR
        } else {
            bisect(
                |q| self.g_low(c, k, q),
                LEVEL_FLOOR,
                fa,
                0.5,
                root_tol,
            )?
        };
        if symmetric {
            return Ok((b1, 1.0 - b1));
        }
        let hi = 1.0 - LEVEL_FLOOR;
        let fb = self.g_high(c, k, hi)?;
        let b2 = if fb >= 0.0 {
            hi
        } else {
            bisect(|q| self.g_high(c, k, q), hi, fb, 0.5, root_tol)?
        };
        Ok((b1, b2))
    }
}

// Bisection on [min(a,b), max(a,b)] given the sign at `a`; `f` at the other
// end is assumed opposite. Returns the midpoint of the final bracket.
fn bisect<F: FnMut(f64) -> Result<f64, SolverError>>(
    mut f: F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64, SolverError> {
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Solve the finite-horizon band on the configured grid.
pub fn solve_finite(
    prior: &Prior,
    c: f64,
    cfg: &SolverConfig,
) -> Result<BoundaryCurve, SolverError> {
    cfg.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(SolverError::BadCost { c });
    }
    let times = build_grid(cfg);
    let n = times.len() - 1;
    let mut ws = Workspace::new(prior, times, cfg.quad_order)?;
    let symmetric = prior.symmetric_volatility();
    for _ in 0..cfg.max_sweeps {
        let mut movement = 0.0f64;
        for k in (0..n).rev() {
            let (old1, old2) = (ws.b1[k], ws.b2[k]);
            let (new1, new2) = ws.solve_node(k, c, symmetric, cfg.root_tol)?;
            movement = movement
                .max((new1 - old1).abs())
                .max((new2 - old2).abs());
            ws.set_node(k, new1, new2)?;
        }
        if movement <= cfg.fixed_point_tol {
            break;
        }
    }
    // The trapezoid scheme does not inherit boundary monotonicity exactly:
    // in the layer where the band closes toward 1/2 the discrete roots can
    // dip below the running envelope by a fraction of the one-step closing
    // amplitude. Dips inside that scheme scale are lifted to the envelope;
    // anything larger means the grid cannot resolve the band and the solve
    // is rejected instead of returning a distorted curve.
    for k in 1..=n {
        let dt = ws.times[k] - ws.times[k - 1];
        let sig = sigma_vol(prior, ws.times[k], 0.5)?;
        let budget = 0.399 * sig * sqrt(dt) + c * dt;
        let dip = (ws.b1[k - 1] - ws.b1[k]).max(ws.b2[k] - ws.b2[k - 1]);
        if dip > budget {
            return Err(SolverError::NonMonotone { index: k });
        }
        ws.b1[k] = ws.b1[k].max(ws.b1[k - 1]);
        ws.b2[k] = ws.b2[k].min(ws.b2[k - 1]);
    }
    let curve = BoundaryCurve {
        times: ws.times,
        b1: ws.b1,
        b2: ws.b2,
        kind: HorizonKind::Finite {
            horizon: cfg.horizon,
        },
    };
    curve.validate()?;
    Ok(curve)
}

/// `V(t_k, q)` for a solved finite-horizon curve, through the same
/// representation the solver uses. The representation relies on smooth
/// fit, so it is exact only while the band stays open strictly before the
/// horizon; for costs large enough to pin some boundary nodes at 1/2 it
/// degrades to an approximation there.
pub fn value_at(
    prior: &Prior,
    c: f64,
    curve: &BoundaryCurve,
    node_idx: usize,
    q: f64,
    quad_order: usize,
) -> Result<f64, SolverError> {
    if let HorizonKind::PerpetualApprox { .. } = curve.kind {
        return Err(SolverError::NeedsFiniteCurve);
    }
    if node_idx >= curve.times.len() {
        return Err(SolverError::NodeOutOfRange { index: node_idx });
    }
    let ws = Workspace::from_curve(prior, curve, quad_order)?;
    ws.value(c, node_idx, q)
}

#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub times: Vec<f64>,
    pub pis: Vec<f64>,
    /// `values[i][j]` is `V(times[i], pis[j])`.
    pub values: Vec<Vec<f64>>,
}

/// Tabulate `V` on the curve's time nodes crossed with `n_pi` interior
/// levels, uniformly spaced in `(0, 1)`.
pub fn value_surface(
    prior: &Prior,
    c: f64,
    curve: &BoundaryCurve,
    quad_order: usize,
    n_pi: usize,
) -> Result<ValueSurface, SolverError> {
    if let HorizonKind::PerpetualApprox { .. } = curve.kind {
        return Err(SolverError::NeedsFiniteCurve);
    }
    if n_pi < 2 {
        return Err(SolverError::BadConfig {
            what: "n_pi must be at least 2",
        });
    }
    let ws = Workspace::from_curve(prior, curve, quad_order)?;
    let pis: Vec<f64> = (1..=n_pi)
        .map(|j| j as f64 / (n_pi + 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(curve.times.len());
    for i in 0..curve.times.len() {
        let mut row = Vec::with_capacity(n_pi);
        for &q in &pis {
            row.push(ws.value(c, i, q)?);
        }
        values.push(row);
    }
    Ok(ValueSurface {
        times: curve.times.clone(),
        pis,
        values,
    })
}

#[derive(Clone, Debug)]
pub struct PerpetualSolve {
    /// Stationary approximation: the final solve truncated to times where
    /// the horizon no longer matters.
    pub curve: BoundaryCurve,
    /// The last finite-horizon solve in full, for value queries.
    pub full_curve: BoundaryCurve,
    /// Sup-norm distance between the last two doublings on the comparison
    /// window.
    pub achieved_tol: f64,
    pub converged: bool,
    /// `(horizon, b1(0))` for each doubling, in order; the starting value
    /// can only fall as the horizon grows.
    pub history: Vec<(f64, f64)>,
}

/// Approximate the perpetual band by doubling the horizon until the early
/// part of the curve stops moving.
pub fn solve_perpetual(
    prior: &Prior,
    c: f64,
    cfg: &SolverConfig,
) -> Result<PerpetualSolve, SolverError> {
    cfg.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(SolverError::BadCost { c });
    }
    let mut horizon = cfg.horizon;
    let mut n_time = cfg.n_time;
    let mut prev: Option<BoundaryCurve> = None;
    let mut achieved = f64::INFINITY;
    let mut converged = false;
    let mut history = Vec::new();
    loop {
        let sub = SolverConfig {
            horizon,
            n_time,
            ..cfg.clone()
        };
        let curve = solve_finite(prior, c, &sub)?;
        history.push((horizon, curve.b1[0]));
        if let Some(old) = &prev {
            // longer horizons can only widen the band
            if curve.b1[0] > old.b1[0] + HORIZON_SLACK
                || curve.b2[0] < old.b2[0] - HORIZON_SLACK
            {
                return Err(SolverError::HorizonRegression);
            }
            let old_horizon = match old.kind {
                HorizonKind::Finite { horizon } => horizon,
                HorizonKind::PerpetualApprox { t_effective } => t_effective,
            };
            let t_hi = 0.5 * old_horizon;
            let mut diff = 0.0f64;
            for i in 0..=64 {
                let t = t_hi * i as f64 / 64.0;
                let (a1, a2) = old.eval(t);
                let (b1, b2) = curve.eval(t);
                diff = diff.max((a1 - b1).abs()).max((a2 - b2).abs());
            }
            achieved = diff;
            prev = Some(curve);
            if diff <= cfg.perpetual_tol {
                converged = true;
                break;
            }
        } else {
            prev = Some(curve);
        }
        if horizon >= cfg.perpetual_t_cap {
            break;
        }
        horizon = (horizon * 2.0).min(cfg.perpetual_t_cap);
        n_time = (n_time * 2).min(PERPETUAL_N_CAP);
    }
    let full_curve = prev.expect("at least one solve ran");
    let t_eff = 0.5 * horizon;
    let cut = full_curve
        .times
        .iter()
        .position(|&t| t > t_eff)
        .unwrap_or(full_curve.times.len());
    let curve = BoundaryCurve {
        times: full_curve.times[..cut].to_vec(),
        b1: full_curve.b1[..cut].to_vec(),
        b2: full_curve.b2[..cut].to_vec(),
        kind: HorizonKind::PerpetualApprox { t_effective: t_eff },
    };
    curve.validate()?;
    Ok(PerpetualSolve {
        curve,
        full_curve,
        achieved_tol: achieved,
        converged,
        history,
    })
}

/// Perpetual lower boundary for a two-point drift prior with support gap
/// `mu_gap`, from the smooth-fit ODE: the unique root in `(0, 1/2)` of
///
/// ```text
///     (2c / mu_gap^2) [2 log((1-A)/A) + (1-2A)/(A(1-A))] = 1
/// ```
///
/// The upper boundary is `1 - A` by symmetry of the level dynamics.
pub fn two_point_perpetual(mu_gap: f64, c: f64) -> f64 {
    debug_assert!(mu_gap > 0.0 && c > 0.0);
    let scale = 2.0 * c / (mu_gap * mu_gap);
    let f = |a: f64| scale * (2.0 * log((1.0 - a) / a) + (1.0 - 2.0 * a) / (a * (1.0 - a))) - 1.0;
    let mut lo = 1e-300;
    let mut hi = 0.5;
    // f(lo) -> +inf, f(1/2) = -1: bracketed
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Long-run limits `(b1(inf), b2(inf))` of the stopping band. They are
/// driven entirely by the support gap around zero: once the posterior has
/// localized, the undecidable alternative is the nearest support point on
/// the other side of zero. Full-support priors have no gap and the band
/// closes onto 1/2.
pub fn asymptote(prior: &Prior, c: f64) -> (f64, f64) {
    let (l, r) = prior.support_gap();
    let gap = r - l;
    if gap <= 0.0 {
        (0.5, 0.5)
    } else {
        let a = two_point_perpetual(gap, c);
        (a, 1.0 - a)
    }
}
