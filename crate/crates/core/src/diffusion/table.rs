//! Incremental antiderivative cache on a dyadic grid.
//!
//! `F(x) = ∫_base^x w(y) dy` is tabulated at nodes base·2^k as prefix sums
//! of per-segment adaptive quadratures; an arbitrary evaluation reuses the
//! nearest cached node and integrates only the remaining partial segment.
//! This keeps repeated evaluations over huge ranges (scale functions under
//! Motoo checkpoints span many orders of magnitude) close to linear cost.

use crate::error::{Error, Result};
use crate::quad;

const MAX_NODES: usize = 4000;

pub(crate) struct CumulativeTable {
    base: f64,
    /// up[k] = ∫_base^{base·2^{k+1}} w
    up: Vec<f64>,
    /// down[k] = ∫_{base·2^{-(k+1)}}^{base} w
    down: Vec<f64>,
}

impl CumulativeTable {
    pub fn new(base: f64) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::Argument(format!(
                "cumulative table base must be positive and finite, got {base}"
            )));
        }
        Ok(Self {
            base,
            up: Vec::new(),
            down: Vec::new(),
        })
    }

    fn quad_segment<W: Fn(f64) -> f64>(w: &W, lo: f64, hi: f64) -> Result<f64> {
        Ok(quad::integrate_auto(w, lo, hi, 1e-13, 1e-11, 400)?.value)
    }

    /// Evaluate F(x), extending the node tables as needed.
    pub fn eval<W: Fn(f64) -> f64>(&mut self, w: &W, x: f64) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Argument(format!(
                "cumulative table evaluated outside (0, inf): {x}"
            )));
        }
        if x == self.base {
            return Ok(0.0);
        }
        if x > self.base {
            let k = (x / self.base).log2().floor().max(0.0) as usize;
            if k > MAX_NODES {
                return Err(Error::Range(format!(
                    "evaluation point {x} too far above base {}",
                    self.base
                )));
            }
            while self.up.len() < k {
                let i = self.up.len();
                let lo = self.base * 2f64.powi(i as i32);
                let hi = self.base * 2f64.powi(i as i32 + 1);
                let prev = if i == 0 { 0.0 } else { self.up[i - 1] };
                let seg = Self::quad_segment(w, lo, hi)?;
                self.up.push(prev + seg);
            }
            let node_val = if k == 0 { 0.0 } else { self.up[k - 1] };
            let node = self.base * 2f64.powi(k as i32);
            Ok(node_val + Self::quad_segment(w, node, x)?)
        } else {
            let j = (self.base / x).log2().floor().max(0.0) as usize;
            if j > MAX_NODES {
                return Err(Error::Range(format!(
                    "evaluation point {x} too far below base {}",
                    self.base
                )));
            }
            while self.down.len() < j {
                let i = self.down.len();
                let hi = self.base * 2f64.powi(-(i as i32));
                let lo = self.base * 2f64.powi(-(i as i32) - 1);
                let prev = if i == 0 { 0.0 } else { self.down[i - 1] };
                let seg = Self::quad_segment(w, lo, hi)?;
                self.down.push(prev + seg);
            }
            // F(node_{-j}) = -down[j-1]; finish with the signed partial piece.
            let node_val = if j == 0 { 0.0 } else { -self.down[j - 1] };
            let node = self.base * 2f64.powi(-(j as i32));
            Ok(node_val + Self::quad_segment(w, node, x)?)
        }
    }
}
