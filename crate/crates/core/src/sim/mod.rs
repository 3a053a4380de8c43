//! Euler–Maruyama simulation of the primary SDE and the coupled comparison
//! processes sharing one Brownian driver.

pub mod euler;
pub mod rng;

pub use euler::{
    simulate_coupled, simulate_primary, simulate_sqbessel, stream_coupled, stream_primary,
    stream_sqbessel, time_change_of, u_transform, CoupledStats, CoupledStep, SqbesselStats,
};
pub use rng::{normal_inv_cdf, path_seed, CounterRng};

use crate::error::{Error, Result};

/// Paths beyond this many steps must be consumed through the streaming
/// interfaces instead of being materialized.
pub const MAX_STORED_STEPS: usize = 10_000_000;

/// A uniform time grid with one sample path and the Brownian increments
/// that generated it.
///
/// Derived grids (time-changed or transformed paths) carry no driver of
/// their own; their `dw` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub dt: f64,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub dw: Vec<f64>,
    pub seed: u64,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("path grid is nonempty")
    }

    /// Linear interpolation of the stored path at time `s` in [0, horizon].
    pub fn interpolate(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s <= self.horizon()) {
            return Err(Error::Range(format!(
                "interpolation time {s} outside [0, {}]",
                self.horizon()
            )));
        }
        let idx = (s / self.dt).floor() as usize;
        if idx + 1 >= self.values.len() {
            return Ok(self.last_value());
        }
        let frac = (s - self.t[idx]) / self.dt;
        Ok(self.values[idx] + frac * (self.values[idx + 1] - self.values[idx]))
    }
}

/// Aligned lower comparison, squared primary, and upper comparison paths on
/// one grid and one driver.
///
/// `z` is the Euler path of the squared dynamics (drift 2Xf + g², diffusion
/// 2√z g(√z), driver γ(X)·dW); it coincides with X² in the continuous
/// limit and stays within the ordering tolerance of x² on the grid. Keeping
/// all three of z_l, z, z_u on the same recursion family makes the discrete
/// comparison ordering exact at contact points.
#[derive(Debug, Clone)]
pub struct CoupledTriple {
    pub grid: PathGrid,
    pub z_l: Vec<f64>,
    pub z: Vec<f64>,
    pub z_u: Vec<f64>,
}

impl CoupledTriple {
    /// Grid points violating z_l <= z <= z_u beyond `tol`.
    pub fn ordering_violations(&self, tol: f64) -> usize {
        self.z_l
            .iter()
            .zip(&self.z)
            .zip(&self.z_u)
            .filter(|((l, z), u)| **l > **z + tol || **z > **u + tol)
            .count()
    }
}

/// Euler ordering tolerance 10·√dt; strong error is O(√dt) for these
/// coefficients.
pub fn ordering_tolerance(dt: f64) -> f64 {
    10.0 * dt.sqrt()
}

/// The running clock θ(t) = ∫_0^t g²(√Z_L) ds and its inverse.
#[derive(Debug, Clone)]
pub struct TimeChange {
    pub dt: f64,
    /// θ at the grid points, θ[k] = dt · S_k.
    pub theta: Vec<f64>,
    /// Compensated sums S_k of the g² terms; kept so the bound checks
    /// K1²·t <= θ(t) <= K2²·t can compare S_k against K²·k without an extra
    /// rounding on either side.
    sums: Vec<f64>,
}

impl TimeChange {
    pub(crate) fn from_sums(dt: f64, sums: Vec<f64>) -> Self {
        let theta = sums.iter().map(|s| dt * s).collect();
        Self { dt, theta, sums }
    }

    pub fn horizon(&self) -> f64 {
        *self.theta.last().expect("time change is nonempty")
    }

    /// Inverse clock by monotone piecewise-linear interpolation; clamps to
    /// the grid range.
    pub fn tau_of(&self, u: f64) -> f64 {
        let last = self.theta.len() - 1;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= self.theta[last] {
            return last as f64 * self.dt;
        }
        let mut lo = 0usize;
        let mut hi = last;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.theta[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.theta[hi] - self.theta[lo];
        let frac = if span > 0.0 {
            (u - self.theta[lo]) / span
        } else {
            0.0
        };
        (lo as f64 + frac) * self.dt
    }

    /// Count grid points where K1²·t <= θ(t) <= K2²·t fails.
    pub fn bounds_violations(&self, k1_sq: f64, k2_sq: f64) -> usize {
        self.sums
            .iter()
            .enumerate()
            .filter(|(k, s)| {
                let kf = *k as f64;
                **s < k1_sq * kf || **s > k2_sq * kf
            })
            .count()
    }
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::Argument(format!(
            "horizon T = {horizon} must be finite and at least dt = {dt}"
        )));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}
