//! Gauss-Hermite quadrature.
//!
//! Nodes and weights for the physicists' weight `exp(-x^2)` are generated by
//! Newton iteration on the orthonormal Hermite recurrence, so tables of any
//! order are built at run time without an eigenvalue solver. The `QuadLadder`
//! bundles a doubling sequence of rules: each integral is evaluated at
//! successive orders until two agree to a fixed absolute tolerance.

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, sqrt};

use crate::math::SQRT_PI;

/// Largest order the ladder escalates to.
pub const MAX_QUAD_ORDER: usize = 512;
/// Absolute agreement required between successive ladder orders.
pub const QUAD_AGREE_TOL: f64 = 1e-8;

const PI_POW_NEG_QUARTER: f64 = 0.751_125_544_464_942_5;

/// One Gauss-Hermite rule: `integral f(x) exp(-x^2) dx ~ sum w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

// Orthonormal Hermite value and derivative at z (Numerical Recipes style).
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI_POW_NEG_QUARTER;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let fj = j as f64;
        p1 = z * sqrt(2.0 / fj) * p2 - sqrt((fj - 1.0) / fj) * p3;
    }
    (p1, sqrt(2.0 * n as f64) * p2)
}

impl GaussHermite {
    /// All roots live in `(-sqrt(2n+1), sqrt(2n+1))` with local spacing
    /// close to `pi / sqrt(2n+1 - x^2)`. Scanning downward from the edge at
    /// a fifth of that spacing brackets every root by a sign change; each
    /// bracket is narrowed by bisection and polished by Newton. Slower than
    /// asymptotic initial guesses but reliable at every order up to the
    /// ladder cap.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Hermite order must be at least 2");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m_pos = n / 2;
        let nu = (2 * n + 1) as f64;
        // odd rules have a root exactly at zero; stop the scan just above it
        let floor = if n % 2 == 1 { 1e-12 } else { 0.0 };
        let mut found = 0usize;
        let mut x_hi = sqrt(nu);
        let mut p_hi = hermite_orthonormal(n, x_hi).0;
        while found < m_pos {
            assert!(
                x_hi > floor,
                "Gauss-Hermite order {n}: located {found} of {m_pos} roots"
            );
            let gap2 = (nu - x_hi * x_hi).max(1.0);
            let x_lo = (x_hi - 0.2 * core::f64::consts::PI / sqrt(gap2)).max(floor);
            let p_lo = hermite_orthonormal(n, x_lo).0;
            if p_lo == 0.0 {
                // landed exactly on a root; record it and resume just below
                let (_, dp) = hermite_orthonormal(n, x_lo);
                Self::store(&mut nodes, &mut weights, found, x_lo, dp);
                found += 1;
                x_hi = x_lo - 1e-12 * (1.0 + x_lo);
                p_hi = hermite_orthonormal(n, x_hi).0;
                continue;
            }
            if (p_lo < 0.0) == (p_hi < 0.0) {
                x_hi = x_lo;
                p_hi = p_lo;
                continue;
            }
            // sign change: bisect to isolate, then Newton polish
            let (mut a, mut b, mut pa) = (x_lo, x_hi, p_lo);
            for _ in 0..30 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let pm = hermite_orthonormal(n, mid).0;
                if pm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (pm < 0.0) == (pa < 0.0) {
                    a = mid;
                    pa = pm;
                } else {
                    b = mid;
                }
            }
            let mut z = 0.5 * (a + b);
            let mut pp = 0.0;
            for _ in 0..10 {
                let (p1, dp) = hermite_orthonormal(n, z);
                pp = dp;
                if dp == 0.0 {
                    break;
                }
                let dz = p1 / dp;
                z -= dz;
                if fabs(dz) <= 1e-15 * (1.0 + fabs(z)) {
                    break;
                }
            }
            Self::store(&mut nodes, &mut weights, found, z, pp);
            found += 1;
            x_hi = x_lo;
            p_hi = p_lo;
        }
        if n % 2 == 1 {
            let (_, dp) = hermite_orthonormal(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (dp * dp);
        }
        GaussHermite { nodes, weights }
    }

    // `idx`-th positive root (counting down from the largest) and its
    // mirror, stored so `nodes` ends up ascending.
    fn store(nodes: &mut [f64], weights: &mut [f64], idx: usize, z: f64, dp: f64) {
        let n = nodes.len();
        nodes[n - 1 - idx] = z;
        nodes[idx] = -z;
        let w = 2.0 / (dp * dp);
        weights[n - 1 - idx] = w;
        weights[idx] = w;
    }

    /// Expectation `E[f(Z)]` for `Z ~ N(mean, sd^2)`.
    pub fn gaussian_expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        let scale = core::f64::consts::SQRT_2 * sd;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + scale * x);
        }
        acc / SQRT_PI
    }
}

/// Doubling sequence of Gauss-Hermite rules starting at `base` order.
#[derive(Clone, Debug)]
pub struct QuadLadder {
    rules: Vec<GaussHermite>,
}

impl QuadLadder {
    /// `base` is clamped into `[2, MAX_QUAD_ORDER]`; callers validate first.
    pub fn new(base: usize) -> Self {
        let base = base.clamp(2, MAX_QUAD_ORDER);
        let mut rules = Vec::new();
        let mut order = base;
        loop {
            rules.push(GaussHermite::new(order));
            if order >= MAX_QUAD_ORDER {
                break;
            }
            order = (order * 2).min(MAX_QUAD_ORDER);
        }
        QuadLadder { rules }
    }

    pub fn base_order(&self) -> usize {
        self.rules[0].nodes.len()
    }

    /// `E[f(Z)]`, escalating the order until two successive rules agree to
    /// `QUAD_AGREE_TOL` (absolute) or the ladder is exhausted.
    pub fn gaussian_expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        let mut prev = self.rules[0].gaussian_expect(mean, sd, &mut f);
        for rule in &self.rules[1..] {
            let cur = rule.gaussian_expect(mean, sd, &mut f);
            if fabs(cur - prev) <= QUAD_AGREE_TOL {
                return cur;
            }
            prev = cur;
        }
        prev
    }
}
