//! The SDE model class dX = f(X, t) dt + g(X) dB and deterministic
//! falsification of its certified hypothesis constants.
//!
//! The hypotheses are analytic (suprema over all of R x [0, inf)); no finite
//! procedure can certify them, so rho, mu, sigma, K1², K2² are user-declared
//! and only falsified by sampling on a grid.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

type Drift = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Diffusion = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Certified constants accompanying a coefficient pair.
#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    /// Upper bound: x f(x, t) <= rho.
    pub rho: f64,
    /// Lower bound: x f(x, t) / g²(x) >= mu > -1/2.
    pub mu: f64,
    /// Limit of g at infinity, nonzero.
    pub sigma: f64,
    /// Global lower bound K1² <= g²(x).
    pub k1_sq: f64,
    /// Global upper bound g²(x) <= K2².
    pub k2_sq: f64,
    /// Initial condition X(0) = x0.
    pub x0: f64,
}

/// Coefficient pair (f, g) with its certified constants.
#[derive(Clone)]
pub struct ModelSpec {
    drift: Drift,
    diffusion: Diffusion,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub k1_sq: f64,
    pub k2_sq: f64,
    pub x0: f64,
}

impl ModelSpec {
    pub fn new(
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        consts: ModelConstants,
    ) -> Result<Self> {
        if !(consts.rho > 0.0) {
            return Err(Error::Argument(format!("rho must be > 0, got {}", consts.rho)));
        }
        if !(consts.mu > -0.5) {
            return Err(Error::Argument(format!(
                "mu must be > -1/2, got {}",
                consts.mu
            )));
        }
        if consts.sigma == 0.0 || !consts.sigma.is_finite() {
            return Err(Error::Argument(format!(
                "sigma must be nonzero and finite, got {}",
                consts.sigma
            )));
        }
        if !(consts.k1_sq > 0.0 && consts.k2_sq >= consts.k1_sq) {
            return Err(Error::Argument(format!(
                "need 0 < K1² <= K2², got K1² = {}, K2² = {}",
                consts.k1_sq, consts.k2_sq
            )));
        }
        if !consts.x0.is_finite() {
            return Err(Error::Argument(format!("x0 must be finite, got {}", consts.x0)));
        }
        Ok(Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            rho: consts.rho,
            mu: consts.mu,
            sigma: consts.sigma,
            k1_sq: consts.k1_sq,
            k2_sq: consts.k2_sq,
            x0: consts.x0,
        })
    }

    #[inline]
    pub fn drift(&self, x: f64, t: f64) -> f64 {
        (self.drift)(x, t)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    /// Dimension constant of the lower comparison process: δ = 2μ + 1.
    pub fn delta(&self) -> f64 {
        2.0 * self.mu + 1.0
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        let mut spec = self.clone();
        spec.x0 = x0;
        spec
    }
}

/// One sampled hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub grid: String,
    pub worst_violation: f64,
    pub pass: bool,
    /// Reported for information only; never fails the validation
    /// (the limit g -> sigma cannot be certified by sampling).
    pub advisory: bool,
}

/// Outcome of sampling the model hypotheses on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.advisory || c.pass)
    }
}

/// Default falsification grid: log-spaced magnitudes from 1e-3 to 1e3,
/// symmetric about 0, plus the origin.
pub fn default_x_grid() -> Vec<f64> {
    let per_decade = 20;
    let decades = 6;
    let n = per_decade * decades;
    let mut grid = Vec::with_capacity(2 * (n + 1) + 1);
    for k in 0..=n {
        let mag = 10f64.powf(-3.0 + k as f64 / per_decade as f64);
        grid.push(-mag);
        grid.push(mag);
    }
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid
}

pub fn default_t_grid() -> Vec<f64> {
    vec![0.0, 1.0, 10.0, 100.0, 1000.0]
}

/// Default sampling tolerance: far below model-scale quantities, above
/// double-rounding noise.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// Sample the hypothesis conditions on the given grids.
///
/// Checks, at every grid point: x f(x,t) <= rho; x f(x,t)/g²(x) >= mu;
/// g even; g nonzero; K1² <= g²(x) <= K2² (all up to `tol`), and reports
/// |g(x_max) - sigma| at the largest magnitude as advisory output.
pub fn validate_model(
    spec: &ModelSpec,
    x_grid: &[f64],
    t_grid: &[f64],
    tol: f64,
) -> Result<ValidationReport> {
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::Argument("validation grids must be nonempty".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tol must be > 0, got {tol}")));
    }
    for &x in x_grid {
        if !x.is_finite() {
            return Err(Error::Argument(format!("non-finite grid point x = {x}")));
        }
    }
    for &t in t_grid {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Argument(format!("invalid grid time t = {t}")));
        }
    }

    let x_desc = format!(
        "{} x-points in [{:.3e}, {:.3e}]",
        x_grid.len(),
        x_grid.iter().cloned().fold(f64::INFINITY, f64::min),
        x_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );
    let xt_desc = format!("{} x {} (x, t) points", x_grid.len(), t_grid.len());

    let eval_g = |x: f64| -> Result<f64> {
        let g = spec.diffusion(x);
        if !g.is_finite() {
            return Err(Error::Evaluation {
                what: "diffusion g".into(),
                point: format!("x = {x}"),
            });
        }
        Ok(g)
    };

    let mut worst_xf = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    for &x in x_grid {
        let g = eval_g(x)?;
        let gsq = g * g;
        for &t in t_grid {
            let f = spec.drift(x, t);
            if !f.is_finite() {
                return Err(Error::Evaluation {
                    what: "drift f".into(),
                    point: format!("(x, t) = ({x}, {t})"),
                });
            }
            let xf = x * f;
            worst_xf = worst_xf.max(xf - spec.rho);
            if gsq > 0.0 {
                worst_ratio = worst_ratio.max(spec.mu - xf / gsq);
            }
        }
    }

    let mut worst_even = 0.0_f64;
    let mut any_zero = false;
    let mut worst_bounds = 0.0_f64;
    for &x in x_grid {
        let g = eval_g(x)?;
        let g_neg = eval_g(-x)?;
        worst_even = worst_even.max((g - g_neg).abs());
        if g == 0.0 {
            any_zero = true;
        }
        let gsq = g * g;
        worst_bounds = worst_bounds
            .max(spec.k1_sq - gsq)
            .max(gsq - spec.k2_sq);
    }

    let x_max = x_grid
        .iter()
        .cloned()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    let sigma_gap = (eval_g(x_max)? - spec.sigma).abs();

    let checks = vec![
        CheckResult {
            name: "drift_product_bound".into(),
            grid: xt_desc.clone(),
            worst_violation: worst_xf.max(0.0),
            pass: worst_xf <= tol,
            advisory: false,
        },
        CheckResult {
            name: "drift_ratio_lower_bound".into(),
            grid: xt_desc,
            worst_violation: worst_ratio.max(0.0),
            pass: worst_ratio <= tol,
            advisory: false,
        },
        CheckResult {
            name: "diffusion_even".into(),
            grid: x_desc.clone(),
            worst_violation: worst_even,
            pass: worst_even <= tol,
            advisory: false,
        },
        CheckResult {
            name: "diffusion_nonzero".into(),
            grid: x_desc.clone(),
            worst_violation: if any_zero { 1.0 } else { 0.0 },
            pass: !any_zero,
            advisory: false,
        },
        CheckResult {
            name: "diffusion_squared_bounds".into(),
            grid: x_desc.clone(),
            worst_violation: worst_bounds.max(0.0),
            pass: worst_bounds <= tol,
            advisory: false,
        },
        CheckResult {
            name: "sigma_limit_gap".into(),
            grid: format!("largest-magnitude point x = {x_max:.6e}"),
            worst_violation: sigma_gap,
            pass: true,
            advisory: true,
        },
    ];

    Ok(ValidationReport { checks, tol })
}

/// Built-in coefficient families selectable by name with numeric
/// parameters; arbitrary user code for f and g is deliberately excluded.
pub mod families {
    use super::*;

    pub const NAMES: [&str; 3] = ["rational", "brownian", "mean_reverting"];

    fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
        params.get(key).copied().unwrap_or(default)
    }

    /// Build a model from a named family.
    ///
    /// - `rational`: f = kappa·x/(1+x²), g = g_inf + g_bump/(1+x²)
    ///   (parameters kappa, g_inf, g_bump, all defaulting to 1)
    /// - `brownian`: f = 0, g = sig (parameter sig, default 1)
    /// - `mean_reverting`: f = -kappa·x, g = sig (kappa, sig, default 1)
    pub fn build(
        name: &str,
        params: &BTreeMap<String, f64>,
        consts: ModelConstants,
    ) -> Result<ModelSpec> {
        match name {
            "rational" => {
                let kappa = param(params, "kappa", 1.0);
                let g_inf = param(params, "g_inf", 1.0);
                let g_bump = param(params, "g_bump", 1.0);
                ModelSpec::new(
                    move |x, _t| kappa * x / (1.0 + x * x),
                    move |x| g_inf + g_bump / (1.0 + x * x),
                    consts,
                )
            }
            "brownian" => {
                let sig = param(params, "sig", 1.0);
                ModelSpec::new(move |_x, _t| 0.0, move |_x| sig, consts)
            }
            "mean_reverting" => {
                let kappa = param(params, "kappa", 1.0);
                let sig = param(params, "sig", 1.0);
                ModelSpec::new(move |x, _t| -kappa * x, move |_x| sig, consts)
            }
            other => Err(Error::Argument(format!(
                "unknown model family '{other}'; known families: {}",
                NAMES.join(", ")
            ))),
        }
    }

    /// The canonical test instance: f = x/(1+x²), g = 1 + 1/(1+x²),
    /// rho = 1, mu = 0, sigma = 1, K1² = 1, K2² = 4, x0 = 0.
    pub fn reference_model() -> ModelSpec {
        build(
            "rational",
            &BTreeMap::new(),
            ModelConstants {
                rho: 1.0,
                mu: 0.0,
                sigma: 1.0,
                k1_sq: 1.0,
                k2_sq: 4.0,
                x0: 0.0,
            },
        )
        .expect("reference model constants are valid")
    }

    /// Standard Brownian control: f = 0, g = sigma.
    pub fn brownian_control(sigma: f64, x0: f64) -> ModelSpec {
        build(
            "brownian",
            &BTreeMap::from([(String::from("sig"), sigma)]),
            ModelConstants {
                rho: 1.0,
                mu: 0.0,
                sigma,
                k1_sq: sigma * sigma,
                k2_sq: sigma * sigma,
                x0,
            },
        )
        .expect("brownian control constants are valid")
    }
}
