//! Scale functions, speed measures, Feller's explosion test, and Motoo's
//! integral criterion for autonomous scalar diffusions on (0, ∞).

pub mod classify;
mod table;

pub use classify::{
    classify_improper_integral, classify_increments, Checkpoint, ConvergenceVerdict,
    TailDiagnostic, Verdict, DEFAULT_OCTAVES,
};

use crate::error::{Error, Result};
use crate::quad;
use std::cell::RefCell;
use std::sync::Arc;
use table::CumulativeTable;

/// Shells used when probing behaviour at the boundaries: decades toward 0,
/// octaves toward infinity.
const DOWN_DECADES: usize = 30;
const UP_OCTAVES: usize = 40;

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An autonomous scalar diffusion dX = f(X) dt + g(X) dB on the open state
/// space (domain_lo, domain_hi); only (0, ∞) is exercised here.
#[derive(Clone)]
pub struct AutonomousDiffusion {
    drift: Coefficient,
    diffusion: Coefficient,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

impl AutonomousDiffusion {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            domain_lo: 0.0,
            domain_hi: f64::INFINITY,
        }
    }

    /// Driftless unit diffusion restricted to (0, ∞).
    pub fn brownian() -> Self {
        Self::new(|_| 0.0, |_| 1.0)
    }

    /// The transient upper-comparison generator f(x) = rho/x, g ≡ sigma.
    pub fn inverse_drift(rho: f64, sigma: f64) -> Self {
        Self::new(move |x| rho / x, move |_| sigma)
    }

    /// The mean-reverting square-root generator f(x) = delta − x, g = 2√x.
    pub fn cir(delta: f64) -> Self {
        Self::new(move |x| delta - x, |x| 2.0 * x.sqrt())
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    fn check_in_domain(&self, x: f64, name: &str) -> Result<()> {
        if !(x > self.domain_lo && x < self.domain_hi) {
            return Err(Error::Argument(format!(
                "{name} = {x} outside the open domain ({}, {})",
                self.domain_lo, self.domain_hi
            )));
        }
        Ok(())
    }
}

/// Per-call evaluator for s_c and derived integrals, with cached
/// antiderivative tables (call-local scratch, not shared).
struct ScaleEvaluator<'a> {
    d: &'a AutonomousDiffusion,
    exponent: RefCell<CumulativeTable>,
    scale: RefCell<CumulativeTable>,
    speed_inner: RefCell<CumulativeTable>,
}

impl<'a> ScaleEvaluator<'a> {
    fn new(d: &'a AutonomousDiffusion, c: f64) -> Result<Self> {
        d.check_in_domain(c, "c")?;
        Ok(Self {
            d,
            exponent: RefCell::new(CumulativeTable::new(c)?),
            scale: RefCell::new(CumulativeTable::new(c)?),
            speed_inner: RefCell::new(CumulativeTable::new(c)?),
        })
    }

    /// E(y) = ∫_c^y f/g² dz.
    fn exponent(&self, y: f64) -> Result<f64> {
        let d = self.d;
        let w = |z: f64| {
            let g = d.diffusion(z);
            d.drift(z) / (g * g)
        };
        self.exponent.borrow_mut().eval(&w, y)
    }

    /// s'_c(y) = exp(−2 E(y)).
    fn scale_derivative(&self, y: f64) -> Result<f64> {
        Ok((-2.0 * self.exponent(y)?).exp())
    }

    /// s_c(x) = ∫_c^x s'_c(y) dy.
    fn scale(&self, x: f64) -> Result<f64> {
        let w = |y: f64| self.scale_derivative(y).unwrap_or(f64::NAN);
        self.scale.borrow_mut().eval(&w, x)
    }

    /// Speed density 2/(s'(x) g²(x)).
    fn speed_density(&self, x: f64) -> Result<f64> {
        let g = self.d.diffusion(x);
        Ok(2.0 * (2.0 * self.exponent(x)?).exp() / (g * g))
    }

    /// M(y) = ∫_c^y 2/(s' g²) dz — the inner integral of Feller's v.
    fn speed_inner(&self, y: f64) -> Result<f64> {
        let w = |z: f64| self.speed_density(z).unwrap_or(f64::NAN);
        self.speed_inner.borrow_mut().eval(&w, y)
    }
}

/// Scale function s_c(x) = ∫_c^x exp(−2∫_c^y f/g²) dy.
pub fn scale_function(d: &AutonomousDiffusion, c: f64, x: f64) -> Result<f64> {
    d.check_in_domain(x, "x")?;
    let ev = ScaleEvaluator::new(d, c)?;
    ev.scale(x)
}

/// Derivative s'_c(x) of the scale function.
pub fn scale_derivative(d: &AutonomousDiffusion, c: f64, x: f64) -> Result<f64> {
    d.check_in_domain(x, "x")?;
    let ev = ScaleEvaluator::new(d, c)?;
    ev.scale_derivative(x)
}

/// Past this size the partial integral counts as numerically infinite.
const OVERFLOW_LIMIT: f64 = 1e150;

fn shell_quad(
    ev: &ScaleEvaluator<'_>,
    w: &dyn Fn(&ScaleEvaluator<'_>, f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let q = quad::integrate_auto(|x| w(ev, x), lo, hi, 1e-12, 1e-9, 400)?;
    Ok(q.value)
}

/// True when an integrand probe says the next shell would overflow.
fn shell_overflows(
    ev: &ScaleEvaluator<'_>,
    w: &dyn Fn(&ScaleEvaluator<'_>, f64) -> f64,
    lo: f64,
    hi: f64,
) -> bool {
    let probe = w(ev, lo).abs().max(w(ev, hi).abs());
    probe > 1e250
}

fn verdict_from_shells(increments: Vec<f64>, overflowed: bool) -> ConvergenceVerdict {
    let (verdict, diagnostic) = if overflowed {
        // Partial integrals past the floating range: the tail is growing
        // beyond any finite target, so the integral is classified divergent.
        (
            Verdict::Divergent,
            TailDiagnostic {
                tail_ratio: f64::INFINITY,
                fitted_decay: f64::NEG_INFINITY,
                tail_extrapolation: f64::INFINITY,
            },
        )
    } else {
        classify::classify_increments(&increments)
    };
    let mut partial = 0.0;
    let checkpoints = increments
        .iter()
        .enumerate()
        .map(|(k, inc)| {
            partial += inc;
            Checkpoint {
                t: (k + 1) as f64,
                partial,
            }
        })
        .collect();
    ConvergenceVerdict {
        verdict,
        checkpoints,
        diagnostic,
    }
}

/// Classify shell increments toward both boundaries and merge them into a
/// single verdict; checkpoints are indexed by shell number with cumulative
/// totals over the union of shells.
fn classify_two_sided(
    ev: &ScaleEvaluator<'_>,
    c: f64,
    w: &dyn Fn(&ScaleEvaluator<'_>, f64) -> f64,
) -> Result<ConvergenceVerdict> {
    let mut increments = Vec::with_capacity(UP_OCTAVES);
    let mut running = 0.0_f64;
    let mut overflowed = false;
    for k in 0..UP_OCTAVES {
        let mut inc = 0.0;
        if k < DOWN_DECADES {
            let hi = c * 10f64.powi(-(k as i32));
            let lo = c * 10f64.powi(-(k as i32) - 1);
            if shell_overflows(ev, w, lo, hi) {
                overflowed = true;
                break;
            }
            inc += shell_quad(ev, w, lo, hi)?.max(0.0);
        }
        let lo = c * 2f64.powi(k as i32);
        let hi = c * 2f64.powi(k as i32 + 1);
        if shell_overflows(ev, w, lo, hi) {
            overflowed = true;
            break;
        }
        inc += shell_quad(ev, w, lo, hi)?.max(0.0);
        running += inc;
        increments.push(inc);
        if running > OVERFLOW_LIMIT {
            overflowed = true;
            break;
        }
    }
    Ok(verdict_from_shells(increments, overflowed))
}

/// One-sided shell classification; `toward_zero` selects the boundary.
fn classify_one_sided(
    ev: &ScaleEvaluator<'_>,
    c: f64,
    toward_zero: bool,
    w: &dyn Fn(&ScaleEvaluator<'_>, f64) -> f64,
) -> Result<ConvergenceVerdict> {
    let shells = if toward_zero { DOWN_DECADES } else { UP_OCTAVES };
    let mut increments = Vec::with_capacity(shells);
    let mut running = 0.0_f64;
    let mut overflowed = false;
    for k in 0..shells {
        let (lo, hi) = if toward_zero {
            (
                c * 10f64.powi(-(k as i32) - 1),
                c * 10f64.powi(-(k as i32)),
            )
        } else {
            (c * 2f64.powi(k as i32), c * 2f64.powi(k as i32 + 1))
        };
        if shell_overflows(ev, w, lo, hi) {
            overflowed = true;
            break;
        }
        let inc = shell_quad(ev, w, lo, hi)?.abs();
        running += inc;
        increments.push(inc);
        if running > OVERFLOW_LIMIT {
            overflowed = true;
            break;
        }
    }
    Ok(verdict_from_shells(increments, overflowed))
}

/// Total speed measure m(0, ∞) = ∫ 2/(s' g²); convergent means the Motoo
/// hypothesis m(0, ∞) < ∞ holds.
pub fn speed_measure_total(d: &AutonomousDiffusion, c: f64) -> Result<ConvergenceVerdict> {
    let ev = ScaleEvaluator::new(d, c)?;
    classify_two_sided(&ev, c, &|ev, x| ev.speed_density(x).unwrap_or(f64::NAN))
}

/// Feller's v-function v_c(x) = ∫_c^x s'(y) ∫_c^y 2/(s' g²) dz dy.
pub fn feller_v(d: &AutonomousDiffusion, c: f64, x: f64) -> Result<f64> {
    d.check_in_domain(x, "x")?;
    let ev = ScaleEvaluator::new(d, c)?;
    let q = quad::integrate_auto(
        |y| match (ev.scale_derivative(y), ev.speed_inner(y)) {
            (Ok(sp), Ok(m)) => sp * m,
            _ => f64::NAN,
        },
        c,
        x,
        1e-10,
        1e-9,
        600,
    )?;
    Ok(q.value.max(0.0))
}

/// Feller's test at both boundaries: a divergent verdict for v at a
/// boundary means the process cannot reach it in finite time; divergent at
/// both ends means no explosion or escape.
pub fn feller_explosion_test(
    d: &AutonomousDiffusion,
    c: f64,
) -> Result<(ConvergenceVerdict, ConvergenceVerdict)> {
    let ev = ScaleEvaluator::new(d, c)?;
    let w = |ev: &ScaleEvaluator<'_>, y: f64| match (ev.scale_derivative(y), ev.speed_inner(y)) {
        (Ok(sp), Ok(m)) => sp * m,
        _ => f64::NAN,
    };
    let at_zero = classify_one_sided(&ev, c, true, &w)?;
    let at_infinity = classify_one_sided(&ev, c, false, &w)?;
    Ok((at_zero, at_infinity))
}

/// Named growth envelopes h(t) for the Motoo criterion.
#[derive(Debug, Clone, Copy)]
pub enum EnvelopeFamily {
    /// h(t) = √(2a · t · log log t)
    SqrtTLogLog { a: f64 },
    /// h(t) = 2a · log t
    LogT { a: f64 },
}

impl EnvelopeFamily {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            EnvelopeFamily::SqrtTLogLog { a } => (2.0 * a * t * t.ln().ln()).sqrt(),
            EnvelopeFamily::LogT { a } => 2.0 * a * t.ln(),
        }
    }
}

/// Motoo's zero-one criterion: classify ∫_{t0}^∞ dt / s_c(h(t)).
///
/// Divergent means P[limsup X(t)/h(t) >= 1] = 1; convergent means the
/// probability is 0. The speed-measure hypothesis m(0, ∞) < ∞ and the
/// positivity of s(h(t)) on [t0, ∞) are checked up front.
pub fn motoo_classify<H: Fn(f64) -> f64>(
    d: &AutonomousDiffusion,
    c: f64,
    h: H,
    t0: f64,
) -> Result<ConvergenceVerdict> {
    if !(t0 > 0.0) {
        return Err(Error::Argument(format!("t0 must be > 0, got {t0}")));
    }
    let speed = speed_measure_total(d, c)?;
    if !speed.is_convergent() {
        return Err(Error::Precondition(format!(
            "Motoo hypothesis m(0, inf) < inf fails: speed measure verdict is {}",
            speed.verdict
        )));
    }
    // h must be increasing and keep s(h(t)) positive over the checkpoints.
    let mut prev = h(t0);
    if !prev.is_finite() {
        return Err(Error::Precondition(format!(
            "envelope h is not finite at t0 = {t0}"
        )));
    }
    if prev <= c {
        return Err(Error::Precondition(format!(
            "s_c(h(t0)) must be positive: h({t0}) = {prev} does not exceed c = {c}"
        )));
    }
    for k in 1..=UP_OCTAVES {
        let t = t0 * 2f64.powi(k as i32);
        let val = h(t);
        if !(val >= prev) {
            return Err(Error::Precondition(format!(
                "envelope h is not increasing near t = {t}"
            )));
        }
        prev = val;
    }

    let ev = ScaleEvaluator::new(d, c)?;
    let integrand = |t: f64| match ev.scale(h(t)) {
        Ok(s) if s > 0.0 => 1.0 / s,
        _ => f64::NAN,
    };
    classify::classify_improper_integral(integrand, t0, UP_OCTAVES)
}
