//! Convergence classification for improper integrals from partial sums at
//! geometric checkpoints.
//!
//! The decision rule works on the increments r_k = I(T_{k+1}) - I(T_k):
//! geometric decay with ratio <= 0.9 over the tail window is convergent;
//! non-decaying increments, or increments decaying no faster than 1/k in
//! the checkpoint index, are divergent; anything in between is reported as
//! inconclusive rather than guessed.

use crate::error::Result;
use crate::quad;

/// Number of trailing increment ratios inspected.
const WINDOW: usize = 8;
/// Geometric-decay ratio below which the tail sum is declared finite.
const GEOMETRIC_RATIO: f64 = 0.9;
/// Ratio above which increments are treated as non-decaying.
const FLAT_RATIO: f64 = 0.98;
/// Fitted polynomial decay exponents at or below this are divergent
/// (harmonic-like tails, with a small margin for estimation error).
const HARMONIC_ALPHA: f64 = 1.05;
/// Increments below this fraction of the running total are considered an
/// exhausted tail.
const TINY_REL: f64 = 1e-12;

/// Default number of doubling checkpoints.
pub const DEFAULT_OCTAVES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Divergent,
    Convergent,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Divergent => write!(f, "divergent"),
            Verdict::Convergent => write!(f, "convergent"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// One partial integral I(T) at checkpoint T.
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint {
    pub t: f64,
    pub partial: f64,
}

/// Tail statistics backing a verdict.
#[derive(Debug, Clone, Copy)]
pub struct TailDiagnostic {
    /// Geometric mean of the trailing increment ratios.
    pub tail_ratio: f64,
    /// Exponent alpha from fitting r_k ~ C k^{-alpha} on the window.
    pub fitted_decay: f64,
    /// Geometric extrapolation of the remaining tail when convergent.
    pub tail_extrapolation: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceVerdict {
    pub verdict: Verdict,
    pub checkpoints: Vec<Checkpoint>,
    pub diagnostic: TailDiagnostic,
}

impl ConvergenceVerdict {
    pub fn is_convergent(&self) -> bool {
        self.verdict == Verdict::Convergent
    }

    pub fn is_divergent(&self) -> bool {
        self.verdict == Verdict::Divergent
    }

    /// Last partial integral, the best available estimate of the total.
    pub fn total(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.partial)
    }
}

/// Classify from a sequence of nonnegative increments between checkpoints.
pub fn classify_increments(increments: &[f64]) -> (Verdict, TailDiagnostic) {
    let total: f64 = increments.iter().sum();
    let tiny = TINY_REL * total.abs().max(f64::MIN_POSITIVE);

    let empty = TailDiagnostic {
        tail_ratio: f64::NAN,
        fitted_decay: f64::NAN,
        tail_extrapolation: f64::NAN,
    };
    if increments.len() < WINDOW + 2 {
        return (Verdict::Inconclusive, empty);
    }
    if increments.iter().any(|r| !r.is_finite()) {
        // A non-finite increment means a partial integral beyond the
        // floating range: divergent.
        return (
            Verdict::Divergent,
            TailDiagnostic {
                tail_ratio: f64::INFINITY,
                fitted_decay: f64::NEG_INFINITY,
                tail_extrapolation: f64::INFINITY,
            },
        );
    }

    let tail = &increments[increments.len() - (WINDOW + 1)..];
    if tail.iter().all(|&r| r.abs() <= tiny) {
        return (
            Verdict::Convergent,
            TailDiagnostic {
                tail_ratio: 0.0,
                fitted_decay: f64::INFINITY,
                tail_extrapolation: 0.0,
            },
        );
    }

    let mut ratios = Vec::with_capacity(WINDOW);
    for pair in tail.windows(2) {
        if pair[0] > tiny && pair[1] >= 0.0 {
            ratios.push(pair[1] / pair[0]);
        }
    }
    if ratios.len() < WINDOW / 2 {
        return (Verdict::Inconclusive, empty);
    }

    let qmax = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let qmin = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let geo_mean = (ratios.iter().map(|q| q.max(1e-300).ln()).sum::<f64>()
        / ratios.len() as f64)
        .exp();

    // Least-squares slope of ln r against ln k over the window.
    let k0 = increments.len() - (WINDOW + 1);
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > tiny)
        .map(|(i, &r)| (((k0 + i + 1) as f64).ln(), r.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let alpha = if sxx > 0.0 { -(sxy / sxx) } else { f64::NAN };

    let last = *tail.last().expect("tail is nonempty");
    let diag = TailDiagnostic {
        tail_ratio: geo_mean,
        fitted_decay: alpha,
        tail_extrapolation: if geo_mean < 1.0 {
            last * geo_mean / (1.0 - geo_mean)
        } else {
            f64::INFINITY
        },
    };

    let verdict = if qmax <= GEOMETRIC_RATIO {
        Verdict::Convergent
    } else if qmin >= FLAT_RATIO || (alpha.is_finite() && alpha <= HARMONIC_ALPHA) {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    (verdict, diag)
}

/// Classify `∫_{t0}^∞ integrand dt` from partial integrals at T_k = t0·2^k.
pub fn classify_improper_integral<F: Fn(f64) -> f64>(
    integrand: F,
    t0: f64,
    octaves: usize,
) -> Result<ConvergenceVerdict> {
    let mut checkpoints = Vec::with_capacity(octaves + 1);
    let mut increments = Vec::with_capacity(octaves);
    let mut partial = 0.0_f64;
    checkpoints.push(Checkpoint { t: t0, partial });
    let mut left = t0;
    for k in 0..octaves {
        let right = t0 * 2f64.powi(k as i32 + 1);
        let seg = quad::integrate_auto(&integrand, left, right, 1e-13, 1e-8, 600)?;
        partial += seg.value;
        increments.push(seg.value.max(0.0));
        checkpoints.push(Checkpoint { t: right, partial });
        left = right;
    }
    let (verdict, diagnostic) = classify_increments(&increments);
    Ok(ConvergenceVerdict {
        verdict,
        checkpoints,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(f: impl Fn(f64) -> f64) -> Verdict {
        classify_improper_integral(f, 1.0, DEFAULT_OCTAVES)
            .unwrap()
            .verdict
    }

    #[test]
    fn p_integrals() {
        assert_eq!(classify(|t| t.powf(-2.0)), Verdict::Convergent);
        assert_eq!(classify(|t| t.powf(-1.5)), Verdict::Convergent);
        assert_eq!(classify(|t| t.powf(-1.25)), Verdict::Convergent);
        assert_eq!(classify(|t| 1.0 / t), Verdict::Divergent);
        assert_eq!(classify(|t| t.powf(-0.5)), Verdict::Divergent);
        assert_eq!(classify(|_| 1.0), Verdict::Divergent);
    }

    #[test]
    fn log_corrected_p_integrals() {
        assert_eq!(classify(|t| t.powf(-2.0) * (1.0 + t.ln())), Verdict::Convergent);
        assert_eq!(classify(|t| t.powf(-1.5) / (1.0 + t.ln())), Verdict::Convergent);
        assert_eq!(classify(|t| t.powf(-0.5) * (1.0 + t.ln())), Verdict::Divergent);
        // 1/(t ln t) from t0 = 2: increments decay like 1/k, a divergent tail.
        let v = classify_improper_integral(|t| 1.0 / (t * t.ln()), 2.0, DEFAULT_OCTAVES)
            .unwrap()
            .verdict;
        assert_eq!(v, Verdict::Divergent);
    }

    #[test]
    fn exhausted_tail_is_convergent() {
        assert_eq!(classify(|t| (-t).exp()), Verdict::Convergent);
    }

    #[test]
    fn partials_nondecreasing_for_nonnegative_integrand() {
        let v = classify_improper_integral(|t| t.powf(-1.5), 1.0, 20).unwrap();
        for pair in v.checkpoints.windows(2) {
            assert!(pair[1].partial >= pair[0].partial);
        }
    }

    #[test]
    fn convergent_total_close_to_truth() {
        let v = classify_improper_integral(|t| t.powf(-2.0), 1.0, DEFAULT_OCTAVES).unwrap();
        // ∫_1^∞ t^{-2} dt = 1; checkpointed partial plus tail extrapolation.
        assert!((v.total() + v.diagnostic.tail_extrapolation - 1.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_checkpoints_is_inconclusive() {
        let v = classify_improper_integral(|t| t.powf(-2.0), 1.0, 4).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }
}
