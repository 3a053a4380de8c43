//! Streaming single-pass statistics for long-horizon paths.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sim::{time_change_of, PathGrid};

/// Ratios are only evaluated from here on, so that log log t is safely
/// positive and the envelope √(2t log log t) is real.
pub const LIL_T_START: f64 = 16.0;

/// Envelope squared, 2 t log log t.
#[inline]
fn envelope_sq(t: f64) -> f64 {
    2.0 * t * t.ln().ln()
}

/// Dyadic-block maxima and the running sup of |X(t)| / √(2t log log t).
#[derive(Debug, Clone, PartialEq)]
pub struct LilRecord {
    /// Right endpoints t_m of the observed blocks [t_{m-1}, t_m].
    pub block_times: Vec<f64>,
    /// Max of the normalized ratio over each block.
    pub block_max_ratio: Vec<f64>,
    /// Cumulative maximum of the ratio over all observed points.
    pub running_sup: f64,
    /// |sigma|, the predicted limsup value.
    pub normalizer: f64,
    pub t_start: f64,
}

impl LilRecord {
    /// Running sup divided by |sigma|; converges toward 1 under the
    /// iterated-logarithm law.
    pub fn normalized_sup(&self) -> f64 {
        self.running_sup / self.normalizer
    }
}

/// Streaming tracker for the iterated-logarithm ratio.
///
/// The per-step fast path is one multiply and compare: a point is examined
/// exactly only when it could raise the current block maximum, using a
/// conservative envelope value refreshed on a fine geometric schedule.
/// Block maxima and the running sup are exact over the observed grid.
#[derive(Debug, Clone)]
pub struct LilTracker {
    t_start: f64,
    normalizer: f64,
    block_sup_sq: f64,
    sup_sq: f64,
    next_block_end: f64,
    block_times: Vec<f64>,
    block_max_ratio: Vec<f64>,
    guard_env_sq: f64,
    next_guard_t: f64,
    skip_threshold: f64,
    last_t: f64,
    started: bool,
}

/// Guard refresh ratio: 64 sub-steps per octave keeps the conservative
/// envelope within ~1.1% of the true one.
const GUARD_RATIO: f64 = 1.010_889_286_051_700_5; // 2^(1/64)

impl LilTracker {
    pub fn new(t_start: f64, normalizer: f64) -> Result<Self> {
        if !(t_start >= LIL_T_START) {
            return Err(Error::Argument(format!(
                "ratio tracking starts at t >= {LIL_T_START}, got {t_start}"
            )));
        }
        if normalizer == 0.0 || !normalizer.is_finite() {
            return Err(Error::Argument(format!(
                "normalizer must be nonzero, got {normalizer}"
            )));
        }
        Ok(Self {
            t_start,
            normalizer: normalizer.abs(),
            block_sup_sq: 0.0,
            sup_sq: 0.0,
            next_block_end: 2.0 * t_start,
            block_times: Vec::new(),
            block_max_ratio: Vec::new(),
            guard_env_sq: envelope_sq(t_start),
            next_guard_t: t_start * GUARD_RATIO,
            skip_threshold: 0.0,
            last_t: t_start,
            started: false,
        })
    }

    fn close_block(&mut self, end: f64) {
        self.block_times.push(end);
        self.block_max_ratio.push(self.block_sup_sq.sqrt());
        self.sup_sq = self.sup_sq.max(self.block_sup_sq);
        self.block_sup_sq = 0.0;
        self.skip_threshold = 0.0;
    }

    #[inline]
    pub fn observe(&mut self, t: f64, x: f64) {
        if t < self.t_start {
            return;
        }
        let xsq = x * x;
        if self.started
            && t < self.next_guard_t
            && t < self.next_block_end
            && xsq <= self.skip_threshold
        {
            return;
        }
        self.slow_observe(t, xsq);
    }

    #[cold]
    fn slow_observe(&mut self, t: f64, xsq: f64) {
        self.started = true;
        self.last_t = t;
        while t >= self.next_block_end {
            let end = self.next_block_end;
            self.close_block(end);
            self.next_block_end *= 2.0;
        }
        if t >= self.next_guard_t {
            self.guard_env_sq = envelope_sq(t);
            self.next_guard_t = t * GUARD_RATIO;
        }
        let ratio_sq = xsq / envelope_sq(t);
        if ratio_sq > self.block_sup_sq {
            self.block_sup_sq = ratio_sq;
        }
        self.skip_threshold = self.block_sup_sq * self.guard_env_sq;
    }

    pub fn finish(mut self) -> LilRecord {
        let end = self.last_t;
        self.close_block(end);
        LilRecord {
            block_times: self.block_times,
            block_max_ratio: self.block_max_ratio,
            running_sup: self.sup_sq.sqrt(),
            normalizer: self.normalizer,
            t_start: self.t_start,
        }
    }
}

/// Track the iterated-logarithm ratio over a materialized path.
pub fn lil_track(path: &PathGrid, sigma: f64, t_start: f64) -> Result<LilRecord> {
    if path.horizon() < 4.0 * t_start {
        return Err(Error::Argument(format!(
            "path horizon {} is shorter than 4·t_start = {}",
            path.horizon(),
            4.0 * t_start
        )));
    }
    let mut tracker = LilTracker::new(t_start, sigma)?;
    for (t, x) in path.t.iter().zip(&path.values) {
        tracker.observe(*t, *x);
    }
    Ok(tracker.finish())
}

/// Running sup of value / (2 log t), the envelope of the mean-reverting
/// square-root limit process.
#[derive(Debug, Clone)]
pub struct RatioSupTracker {
    t_start: f64,
    sup: f64,
}

impl RatioSupTracker {
    pub fn new(t_start: f64) -> Self {
        Self {
            t_start,
            sup: 0.0,
        }
    }

    #[inline]
    pub fn observe(&mut self, t: f64, value: f64) {
        if t >= self.t_start {
            let ratio = value / (2.0 * t.ln());
            if ratio > self.sup {
                self.sup = ratio;
            }
        }
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

/// Occupation fractions (1/T) ∫_0^T 1{path <= c} recorded at checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationCurve {
    pub thresholds: Vec<f64>,
    pub times: Vec<f64>,
    /// fraction[i][j]: fraction below thresholds[i] at times[j].
    pub fraction: Vec<Vec<f64>>,
}

/// Streaming grid counter behind [`OccupationCurve`].
#[derive(Debug, Clone)]
pub struct OccupationTracker {
    thresholds: Vec<f64>,
    checkpoints: Vec<f64>,
    dt: f64,
    counts: Vec<u64>,
    next_checkpoint: usize,
    fraction: Vec<Vec<f64>>,
}

impl OccupationTracker {
    pub fn new(thresholds: &[f64], checkpoints: &[f64], dt: f64) -> Result<Self> {
        if thresholds.is_empty() || checkpoints.is_empty() {
            return Err(Error::Argument(
                "occupation tracking needs thresholds and checkpoints".into(),
            ));
        }
        let mut cps = checkpoints.to_vec();
        cps.sort_by(f64::total_cmp);
        Ok(Self {
            counts: vec![0; thresholds.len()],
            fraction: vec![Vec::with_capacity(cps.len()); thresholds.len()],
            thresholds: thresholds.to_vec(),
            checkpoints: cps,
            dt,
            next_checkpoint: 0,
        })
    }

    /// Feed the state at grid time `t`; left-endpoint counting over [0, T).
    #[inline]
    pub fn observe(&mut self, t: f64, value: f64) {
        while self.next_checkpoint < self.checkpoints.len()
            && t >= self.checkpoints[self.next_checkpoint] - 0.5 * self.dt
        {
            let cp = self.checkpoints[self.next_checkpoint];
            for (i, count) in self.counts.iter().enumerate() {
                self.fraction[i].push(*count as f64 * self.dt / cp);
            }
            self.next_checkpoint += 1;
        }
        for (i, &c) in self.thresholds.iter().enumerate() {
            if value <= c {
                self.counts[i] += 1;
            }
        }
    }

    pub fn finish(self) -> Result<OccupationCurve> {
        if self.next_checkpoint < self.checkpoints.len() {
            return Err(Error::Argument(format!(
                "checkpoint {} beyond the observed horizon",
                self.checkpoints[self.next_checkpoint]
            )));
        }
        Ok(OccupationCurve {
            thresholds: self.thresholds,
            times: self.checkpoints,
            fraction: self.fraction,
        })
    }
}

/// Occupation fractions of a stored path below each threshold.
pub fn occupation_fractions(
    values: &[f64],
    dt: f64,
    thresholds: &[f64],
    checkpoints: &[f64],
) -> Result<OccupationCurve> {
    let mut tracker = OccupationTracker::new(thresholds, checkpoints, dt)?;
    for (k, &v) in values.iter().enumerate() {
        tracker.observe(k as f64 * dt, v);
    }
    tracker.finish()
}

/// Streaming evaluation of F_c(h) = e^{-h} ∫_1^h e^s 1{U(s) <= c e^{-s}} ds
/// at several horizons h.
#[derive(Debug, Clone)]
pub struct FcTracker {
    c: f64,
    ds: f64,
    horizons: Vec<f64>,
    next_horizon: usize,
    integral: f64,
    values: Vec<f64>,
}

impl FcTracker {
    pub fn new(c: f64, ds: f64, horizons: &[f64]) -> Result<Self> {
        if !(c > 0.0) || !(ds > 0.0) {
            return Err(Error::Argument(format!(
                "F_c needs c > 0 and ds > 0, got c = {c}, ds = {ds}"
            )));
        }
        let mut hs = horizons.to_vec();
        hs.sort_by(f64::total_cmp);
        if hs.first().is_some_and(|&h| h < 1.0) {
            return Err(Error::Argument(
                "F_c horizons must be at least 1".into(),
            ));
        }
        Ok(Self {
            c,
            ds,
            horizons: hs,
            next_horizon: 0,
            integral: 0.0,
            values: Vec::new(),
        })
    }

    /// Feed U at transformed time `s`; grid points must arrive in order.
    #[inline]
    pub fn observe(&mut self, s: f64, u: f64) {
        while self.next_horizon < self.horizons.len()
            && s >= self.horizons[self.next_horizon] - 0.5 * self.ds
        {
            let h = self.horizons[self.next_horizon];
            self.values.push((-h).exp() * self.integral);
            self.next_horizon += 1;
        }
        if s >= 1.0 && u <= self.c * (-s).exp() {
            self.integral += s.exp() * self.ds;
        }
    }

    pub fn finish(self) -> Result<Vec<f64>> {
        if self.next_horizon < self.horizons.len() {
            return Err(Error::Argument(format!(
                "F_c horizon {} beyond the observed transformed time",
                self.horizons[self.next_horizon]
            )));
        }
        Ok(self.values)
    }
}

/// F_c of a stored transformed path at one horizon.
pub fn f_c_functional(u_path: &PathGrid, c: f64, horizon: f64) -> Result<f64> {
    if horizon < 1.0 {
        return Err(Error::Argument(format!(
            "F_c horizon must be >= 1, got {horizon}"
        )));
    }
    let mut tracker = FcTracker::new(c, u_path.dt, &[horizon])?;
    for (s, u) in u_path.t.iter().zip(&u_path.values) {
        tracker.observe(*s, *u);
    }
    Ok(tracker.finish()?[0])
}

/// Time averages (1/T) ∫_0^T g²(√Z_L) at the requested checkpoints,
/// exactly θ(T)/T on the grid.
pub fn time_average_gsq(
    z_l: &[f64],
    spec: &ModelSpec,
    dt: f64,
    checkpoints: &[f64],
) -> Result<Vec<f64>> {
    let tc = time_change_of(z_l, spec, dt)?;
    checkpoints
        .iter()
        .map(|&cp| {
            let k = (cp / dt).round() as usize;
            if k == 0 || k >= tc.theta.len() {
                return Err(Error::Argument(format!(
                    "checkpoint {cp} outside the path horizon"
                )));
            }
            Ok(tc.theta[k] / (k as f64 * dt))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::families;
    use crate::sim;

    fn grid_from(values: Vec<f64>, dt: f64) -> PathGrid {
        let n = values.len();
        PathGrid {
            dt,
            t: (0..n).map(|k| k as f64 * dt).collect(),
            values,
            dw: vec![0.0; n.saturating_sub(1)],
            seed: 0,
        }
    }

    #[test]
    fn zero_path_has_zero_ratios() {
        let path = grid_from(vec![0.0; 2001], 0.1);
        let rec = lil_track(&path, 1.0, 16.0).unwrap();
        assert_eq!(rec.running_sup, 0.0);
        assert!(rec.block_max_ratio.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn envelope_path_has_unit_ratios() {
        let dt = 0.05;
        let n = 4000;
        let values: Vec<f64> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                if t >= 16.0 {
                    (2.0 * t * t.ln().ln()).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let path = grid_from(values, dt);
        let rec = lil_track(&path, 1.0, 16.0).unwrap();
        assert!((rec.running_sup - 1.0).abs() < 1e-12);
        for r in &rec.block_max_ratio {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lil_scale_equivariance_power_of_two() {
        let spec = families::reference_model();
        let path = sim::simulate_primary(&spec, 200.0, 0.01, 77).unwrap();
        let rec = lil_track(&path, 1.0, 16.0).unwrap();
        let scaled = grid_from(path.values.iter().map(|x| 4.0 * x).collect(), 0.01);
        let rec4 = lil_track(&scaled, 1.0, 16.0).unwrap();
        assert_eq!(rec4.running_sup, 4.0 * rec.running_sup);
        for (a, b) in rec4.block_max_ratio.iter().zip(&rec.block_max_ratio) {
            assert_eq!(*a, 4.0 * b);
        }
    }

    #[test]
    fn lil_tracker_matches_naive_computation() {
        // The skip guard must not change the exact sup over grid points,
        // nor the per-block maxima.
        let spec = families::reference_model();
        let path = sim::simulate_primary(&spec, 500.0, 0.01, 3).unwrap();
        let rec = lil_track(&path, 1.0, 16.0).unwrap();
        let ratio = |t: f64, x: f64| x.abs() / (2.0 * t * t.ln().ln()).sqrt();
        let naive = path
            .t
            .iter()
            .zip(&path.values)
            .filter(|(t, _)| **t >= 16.0)
            .map(|(t, x)| ratio(*t, *x))
            .fold(0.0_f64, f64::max);
        assert!((rec.running_sup - naive).abs() < 1e-15);

        let mut block_start = 16.0;
        for (end, max) in rec.block_times.iter().zip(&rec.block_max_ratio) {
            let naive_block = path
                .t
                .iter()
                .zip(&path.values)
                .filter(|(t, _)| **t >= block_start && **t < *end)
                .map(|(t, x)| ratio(*t, *x))
                .fold(0.0_f64, f64::max);
            assert!(
                (max - naive_block).abs() < 1e-15,
                "block ending {end}: {max} vs {naive_block}"
            );
            block_start = *end;
        }
    }

    #[test]
    fn lil_horizon_guard() {
        let path = grid_from(vec![0.0; 100], 0.1);
        assert!(lil_track(&path, 1.0, 16.0).is_err());
    }

    #[test]
    fn occupation_trivial_paths() {
        // Identically zero: fraction 1 at every checkpoint.
        let curve =
            occupation_fractions(&vec![0.0; 1001], 0.01, &[1.0], &[5.0, 10.0]).unwrap();
        for f in &curve.fraction[0] {
            assert!((f - 1.0).abs() < 0.011);
        }
        // Linear path t over [0, 10] with c = 1: fraction 0.1.
        let values: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let curve = occupation_fractions(&values, 0.01, &[1.0], &[10.0]).unwrap();
        assert!((curve.fraction[0][0] - 0.1).abs() < 0.011);
    }

    #[test]
    fn occupation_monotone_in_threshold() {
        let spec = families::reference_model();
        let triple = sim::simulate_coupled(&spec, 50.0, 0.01, 5).unwrap();
        let curve = occupation_fractions(
            &triple.z_l,
            0.01,
            &[0.5, 1.0, 2.0, 10.0],
            &[10.0, 25.0, 50.0],
        )
        .unwrap();
        for j in 0..curve.times.len() {
            for i in 1..curve.thresholds.len() {
                assert!(curve.fraction[i - 1][j] <= curve.fraction[i][j] + 1e-15);
            }
        }
        for row in &curve.fraction {
            for &f in row {
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }

    #[test]
    fn occupation_checkpoint_beyond_horizon_errors() {
        let r = occupation_fractions(&[0.0; 10], 0.01, &[1.0], &[5.0]);
        assert!(r.is_err());
    }

    #[test]
    fn fc_indicator_never_fires_above_threshold() {
        let n = 5000;
        let ds = 1e-3;
        let path = grid_from(vec![7.0; n], ds); // any path >= c keeps F at 0
        let f = f_c_functional(&path, 7.0, 4.0).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn fc_indicator_always_fires_on_zero_path() {
        let ds = 1e-4;
        let n = 30_001; // horizon 3.0
        let path = grid_from(vec![0.0; n], ds);
        let f = f_c_functional(&path, 1.0, 3.0).unwrap();
        let expected = 1.0 - (1.0_f64 - 3.0).exp();
        assert!((f - expected).abs() < 1e-3, "{f} vs {expected}");
    }

    #[test]
    fn fc_bounds_property() {
        // 0 <= F_c(t) <= 1 - e^{1-t}.
        let spec = families::reference_model();
        let z = sim::simulate_sqbessel(1.0, 0.0, 400.0, 0.01, 21).unwrap();
        let u = sim::u_transform(&z, 1e-3, 5.5).unwrap();
        let _ = spec;
        for &h in &[2.0, 4.0, 5.5] {
            let f = f_c_functional(&u, 1.0, h).unwrap();
            assert!(f >= 0.0);
            assert!(f <= 1.0 - (1.0 - h).exp() + 1e-3);
        }
    }

    #[test]
    fn time_average_constant_diffusion_is_exact() {
        let spec = families::brownian_control(2.0, 0.0);
        let z_l = vec![1.0; 1001];
        let vals = time_average_gsq(&z_l, &spec, 0.01, &[1.0, 5.0, 10.0]).unwrap();
        for v in vals {
            assert_eq!(v, 4.0);
        }
    }

    #[test]
    fn time_average_within_global_bounds_and_matches_theta() {
        let spec = families::reference_model();
        let triple = sim::simulate_coupled(&spec, 20.0, 0.01, 9).unwrap();
        let cps = [5.0, 10.0, 20.0];
        let vals = time_average_gsq(&triple.z_l, &spec, 0.01, &cps).unwrap();
        let tc = sim::time_change_of(&triple.z_l, &spec, 0.01).unwrap();
        for (&cp, &v) in cps.iter().zip(&vals) {
            assert!(v >= spec.k1_sq && v <= spec.k2_sq);
            let k = (cp / 0.01).round() as usize;
            assert_eq!(v, tc.theta[k] / (k as f64 * 0.01));
        }
    }

    #[test]
    fn ratio_sup_tracker_basic() {
        let mut tracker = RatioSupTracker::new(5.0);
        tracker.observe(4.0, 100.0); // before start: ignored
        tracker.observe(std::f64::consts::E.powi(2), 8.0); // ratio 2
        tracker.observe(20.0, 3.0);
        assert!((tracker.sup() - 2.0).abs() < 1e-12);
    }
}
