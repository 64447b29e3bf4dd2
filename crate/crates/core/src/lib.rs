//! Sequential testing of the sign of a Brownian drift.
//!
//! An observer watches `X_t = B t + W_t` where the drift `B` is random with
//! a known prior and `W` is an independent Brownian motion. At a sampling
//! cost `c` per unit time, the observer picks a stopping time and then calls
//! the sign of `B`, paying 1 on a wrong call. Everything reduces to the
//! posterior probability `pi_t = P(B >= 0 | F_t)`: the optimal rule stops
//! once `pi_t` exits a band `(b1(t), b2(t))` around 1/2 and calls the sign
//! suggested by the exited side.
//!
//! Crate layout, bottom up:
//!
//! * [`math`]: normal CDF family, bivariate normal tails, compensated sums.
//! * [`quad`]: Gauss-Hermite rules with a self-escalating accuracy ladder.
//! * [`prior`]: drift priors (atoms, normal, normal mixtures) and their
//!   exponentially tilted half-line moments.
//! * [`filter`]: the posterior level `pi(t, x)`, its inverse, and the level
//!   volatility.
//! * [`kernel`]: transition probabilities of the level process and the
//!   terminal payoff, with a closed form for pure normal priors.
//! * [`solver`]: the backward fixed-point solver for the stopping
//!   boundaries, finite horizon and perpetual.
//! * [`mc`]: Monte Carlo certification of a candidate boundary pair.
//!
//! The crate is `no_std` (with `alloc`); IO and file formats live in the
//! companion CLI crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// frozen reference values keep guard digits beyond f64 precision
#![allow(clippy::excessive_precision)]

extern crate alloc;

pub mod filter;
pub mod kernel;
pub mod math;
pub mod mc;
pub mod prior;
pub mod quad;
pub mod solver;
