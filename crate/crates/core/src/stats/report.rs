//! Ensemble runs with streaming per-path statistics.
//!
//! Each path is an independent task with its own derived seed; per-path
//! summaries are collected into a slot indexed by path number, so the
//! merged report is identical for every worker count and schedule.

use super::trackers::{FcTracker, LilRecord, LilTracker, OccupationTracker, RatioSupTracker};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sim::{
    ordering_tolerance, path_seed, stream_coupled, stream_primary, stream_sqbessel,
};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Parameters of a coupled ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Occupation thresholds c.
    pub thresholds: Vec<f64>,
    /// Times at which occupation fractions and clock averages are recorded.
    pub checkpoints: Vec<f64>,
    /// Threshold c of the exponential indicator functional.
    pub fc_threshold: f64,
    /// Transformed-time horizons for F_c; empty disables the functional.
    pub fc_horizons: Vec<f64>,
    /// Transformed-time grid spacing for F_c.
    pub fc_ds: f64,
    pub lil_t_start: f64,
    /// 0 uses the available parallelism.
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn new(horizon: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            dt,
            n_paths,
            seed,
            thresholds: vec![1.0, 10.0],
            checkpoints: vec![horizon / 100.0, horizon / 10.0, horizon],
            fc_threshold: 1.0,
            fc_horizons: Vec::new(),
            fc_ds: 1e-3,
            lil_t_start: super::trackers::LIL_T_START,
            workers: 0,
        }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Argument("ensemble needs at least one path".into()));
        }
        if self.horizon < 4.0 * self.lil_t_start {
            return Err(Error::Argument(format!(
                "horizon {} shorter than 4·t_start = {}",
                self.horizon,
                4.0 * self.lil_t_start
            )));
        }
        for &cp in &self.checkpoints {
            if !(cp > 0.0 && cp <= self.horizon) {
                return Err(Error::Argument(format!(
                    "checkpoint {cp} outside (0, {}]",
                    self.horizon
                )));
            }
        }
        // The clock grows at least like K1²·t, so every requested
        // transformed horizon must fit under log(1 + K1²·T).
        for &h in &self.fc_horizons {
            if !(h >= 1.0) {
                return Err(Error::Argument(format!("F_c horizon {h} below 1")));
            }
            let reachable = (1.0 + spec.k1_sq * self.horizon).ln();
            if h > reachable {
                return Err(Error::Argument(format!(
                    "F_c horizon {h} beyond the guaranteed clock range {reachable:.3}"
                )));
            }
        }
        Ok(())
    }
}

/// Streaming statistics of one coupled path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub seed: u64,
    pub lil: LilRecord,
    pub ordering_violations: u64,
    pub theta_violations: u64,
    pub clips_lower: u64,
    pub clips_upper: u64,
    /// occupation[i][j]: fraction below thresholds[i] at checkpoints[j].
    pub occupation: Vec<Vec<f64>>,
    /// Clock averages θ(T)/T at the checkpoints.
    pub gsq_average: Vec<f64>,
    /// F_c values at the configured transformed horizons.
    pub fc: Vec<f64>,
    pub final_x: f64,
    pub final_theta: f64,
}

/// Merged ensemble output; medians are taken path-wise per statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub fc_horizons: Vec<f64>,
    pub paths: Vec<PathSummary>,
    pub median_normalized_sup: f64,
    pub occupation_medians: Vec<Vec<f64>>,
    pub gsq_average_medians: Vec<f64>,
    pub fc_medians: Vec<f64>,
    pub total_ordering_violations: u64,
    pub total_theta_violations: u64,
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn run_coupled_path(spec: &ModelSpec, cfg: &EnsembleConfig, path: usize) -> Result<PathSummary> {
    let seed = path_seed(cfg.seed, path as u64);
    let dt = cfg.dt;
    let tol = ordering_tolerance(dt);

    let mut lil = LilTracker::new(cfg.lil_t_start, spec.sigma)?;
    let mut occupation = OccupationTracker::new(&cfg.thresholds, &cfg.checkpoints, dt)?;
    let mut fc = if cfg.fc_horizons.is_empty() {
        None
    } else {
        Some(FcTracker::new(cfg.fc_threshold, cfg.fc_ds, &cfg.fc_horizons)?)
    };

    let mut cp_indices: Vec<(usize, usize)> = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(j, &cp)| ((cp / dt).round() as usize, j))
        .collect();
    cp_indices.sort_unstable();
    let mut next_cp = 0usize;
    let mut gsq_average = vec![f64::NAN; cfg.checkpoints.len()];

    let mut ordering_violations = 0u64;
    let mut theta_violations = 0u64;
    let mut final_x = spec.x0;
    let mut final_theta = 0.0;

    // Transformed-time lookup state: U(s_j) = e^{-s_j} Z_L(τ(e^{s_j} - 1)).
    let mut u_index = 0usize;
    let mut next_u_time = 0.0_f64; // e^{s_j} - 1 for the next j
    let mut prev_theta = 0.0_f64;
    let mut prev_zl = spec.x0 * spec.x0;

    let stats = stream_coupled(spec, cfg.horizon, dt, seed, |step| {
        lil.observe(step.t, step.x);
        occupation.observe(step.t, step.z_l);
        if step.z_l > step.z + tol || step.z > step.z_u + tol {
            ordering_violations += 1;
        }
        let kf = step.index as f64;
        if step.gsq_sum < spec.k1_sq * kf || step.gsq_sum > spec.k2_sq * kf {
            theta_violations += 1;
        }
        let theta = dt * step.gsq_sum;
        while next_cp < cp_indices.len() && step.index == cp_indices[next_cp].0 {
            gsq_average[cp_indices[next_cp].1] = theta / step.t;
            next_cp += 1;
        }
        if let Some(fc) = fc.as_mut() {
            while next_u_time <= theta {
                let s = u_index as f64 * cfg.fc_ds;
                let span = theta - prev_theta;
                let ztilde = if span > 0.0 {
                    prev_zl + (next_u_time - prev_theta) / span * (step.z_l - prev_zl)
                } else {
                    step.z_l
                };
                fc.observe(s, (-s).exp() * ztilde);
                u_index += 1;
                next_u_time = (u_index as f64 * cfg.fc_ds).exp() - 1.0;
            }
        }
        prev_theta = theta;
        prev_zl = step.z_l;
        final_x = step.x;
        final_theta = theta;
    })?;

    Ok(PathSummary {
        seed,
        lil: lil.finish(),
        ordering_violations,
        theta_violations,
        clips_lower: stats.clips_lower,
        clips_upper: stats.clips_upper,
        occupation: occupation.finish()?.fraction,
        gsq_average,
        fc: match fc {
            Some(t) => t.finish()?,
            None => Vec::new(),
        },
        final_x,
        final_theta,
    })
}

/// Run independent path tasks over a worker pool, collecting results by
/// path index.
fn run_pool<R, F>(n_paths: usize, workers: usize, run: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync,
{
    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |p| p.get())
    } else {
        workers
    }
    .min(n_paths)
    .max(1);

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> =
        Mutex::new((0..n_paths).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= n_paths {
                    break;
                }
                let result = run(j);
                slots.lock().expect("pool lock poisoned")[j] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("pool lock poisoned")
        .into_iter()
        .map(|slot| slot.expect("every path slot is filled"))
        .collect()
}

/// Coupled ensemble with streaming statistics and schedule-independent
/// aggregation.
pub fn ensemble_report(spec: &ModelSpec, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    cfg.validate(spec)?;
    let paths = run_pool(cfg.n_paths, cfg.workers, |j| run_coupled_path(spec, cfg, j))?;

    let sups: Vec<f64> = paths.iter().map(|p| p.lil.normalized_sup()).collect();
    let occupation_medians: Vec<Vec<f64>> = (0..cfg.thresholds.len())
        .map(|i| {
            (0..cfg.checkpoints.len())
                .map(|j| {
                    let vals: Vec<f64> = paths.iter().map(|p| p.occupation[i][j]).collect();
                    median(&vals)
                })
                .collect()
        })
        .collect();
    let gsq_average_medians: Vec<f64> = (0..cfg.checkpoints.len())
        .map(|j| {
            let vals: Vec<f64> = paths.iter().map(|p| p.gsq_average[j]).collect();
            median(&vals)
        })
        .collect();
    let fc_medians: Vec<f64> = (0..cfg.fc_horizons.len())
        .map(|j| {
            let vals: Vec<f64> = paths.iter().map(|p| p.fc[j]).collect();
            median(&vals)
        })
        .collect();

    Ok(EnsembleReport {
        horizon: cfg.horizon,
        dt: cfg.dt,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        thresholds: cfg.thresholds.clone(),
        checkpoints: cfg.checkpoints.clone(),
        fc_horizons: cfg.fc_horizons.clone(),
        median_normalized_sup: median(&sups),
        total_ordering_violations: paths.iter().map(|p| p.ordering_violations).sum(),
        total_theta_violations: paths.iter().map(|p| p.theta_violations).sum(),
        paths,
        occupation_medians,
        gsq_average_medians,
        fc_medians,
    })
}

/// Iterated-logarithm records of the primary path only; the lean runner for
/// long-horizon envelope checks.
pub fn lil_ensemble(
    spec: &ModelSpec,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    t_start: f64,
    workers: usize,
) -> Result<Vec<LilRecord>> {
    if horizon < 4.0 * t_start {
        return Err(Error::Argument(format!(
            "horizon {horizon} shorter than 4·t_start = {}",
            4.0 * t_start
        )));
    }
    run_pool(n_paths, workers, |j| {
        let mut tracker = LilTracker::new(t_start, spec.sigma)?;
        stream_primary(spec, horizon, dt, path_seed(seed, j as u64), |_, t, x| {
            tracker.observe(t, x);
        })?;
        Ok(tracker.finish())
    })
}

/// Running sups of U(s)/(2 log s) where U(s) = e^{-s} Z(e^s - 1) and Z is a
/// squared-Bessel path of dimension `delta`; one sup per path.
#[allow(clippy::too_many_arguments)]
pub fn u_envelope_ensemble(
    delta: f64,
    x0_sq: f64,
    s_horizon: f64,
    dt: f64,
    ds: f64,
    n_paths: usize,
    seed: u64,
    s_start: f64,
    workers: usize,
) -> Result<Vec<f64>> {
    if !(s_horizon > s_start && s_start > 1.0) {
        return Err(Error::Argument(format!(
            "need 1 < s_start < s_horizon, got {s_start}, {s_horizon}"
        )));
    }
    let horizon = s_horizon.exp() - 1.0;
    run_pool(n_paths, workers, |j| {
        let mut tracker = RatioSupTracker::new(s_start);
        let mut u_index = 0usize;
        let mut next_u_time = 0.0_f64;
        let mut prev_t = 0.0_f64;
        let mut prev_z = x0_sq;
        stream_sqbessel(
            delta,
            x0_sq,
            horizon,
            dt,
            path_seed(seed, j as u64),
            |_, t, z| {
                while next_u_time <= t {
                    let s = u_index as f64 * ds;
                    if s > s_horizon {
                        break;
                    }
                    let span = t - prev_t;
                    let ztilde = if span > 0.0 {
                        prev_z + (next_u_time - prev_t) / span * (z - prev_z)
                    } else {
                        z
                    };
                    tracker.observe(s, (-s).exp() * ztilde);
                    u_index += 1;
                    next_u_time = (u_index as f64 * ds).exp() - 1.0;
                }
                prev_t = t;
                prev_z = z;
            },
        )?;
        Ok(tracker.sup())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::families;
    use crate::sim;
    use crate::stats::trackers::{lil_track, occupation_fractions, time_average_gsq};

    fn small_config() -> EnsembleConfig {
        let mut cfg = EnsembleConfig::new(100.0, 0.01, 4, 512);
        cfg.checkpoints = vec![10.0, 50.0, 100.0];
        cfg.thresholds = vec![1.0, 10.0];
        cfg.fc_horizons = vec![1.5, 3.0];
        cfg
    }

    #[test]
    fn single_path_matches_component_operations() {
        let spec = families::reference_model();
        let mut cfg = small_config();
        cfg.n_paths = 1;
        let report = ensemble_report(&spec, &cfg).unwrap();
        let summary = &report.paths[0];

        // The primary path of the coupled run is the primary simulation.
        let path = sim::simulate_primary(&spec, cfg.horizon, cfg.dt, cfg.seed).unwrap();
        let lil = lil_track(&path, spec.sigma, cfg.lil_t_start).unwrap();
        assert_eq!(summary.lil, lil);

        let triple = sim::simulate_coupled(&spec, cfg.horizon, cfg.dt, cfg.seed).unwrap();
        let occ = occupation_fractions(&triple.z_l, cfg.dt, &cfg.thresholds, &cfg.checkpoints)
            .unwrap();
        assert_eq!(summary.occupation, occ.fraction);

        let avg =
            time_average_gsq(&triple.z_l, &spec, cfg.dt, &cfg.checkpoints).unwrap();
        assert_eq!(summary.gsq_average, avg);
        assert_eq!(report.median_normalized_sup, lil.normalized_sup());
    }

    #[test]
    fn report_is_identical_across_worker_counts() {
        let spec = families::reference_model();
        let mut cfg = small_config();
        cfg.workers = 1;
        let one = ensemble_report(&spec, &cfg).unwrap();
        cfg.workers = 4;
        let four = ensemble_report(&spec, &cfg).unwrap();
        cfg.workers = 8;
        let eight = ensemble_report(&spec, &cfg).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, eight);
    }

    #[test]
    fn ordering_and_clock_bounds_hold_on_small_ensemble() {
        let spec = families::reference_model();
        let cfg = small_config();
        let report = ensemble_report(&spec, &cfg).unwrap();
        assert_eq!(report.total_ordering_violations, 0);
        assert_eq!(report.total_theta_violations, 0);
        for j in 0..cfg.checkpoints.len() {
            let avg = report.gsq_average_medians[j];
            assert!(avg >= spec.k1_sq && avg <= spec.k2_sq);
        }
    }

    #[test]
    fn unreachable_fc_horizon_rejected_up_front() {
        let spec = families::reference_model();
        let mut cfg = small_config();
        cfg.fc_horizons = vec![20.0]; // e^20 - 1 far beyond K1²·T
        assert!(ensemble_report(&spec, &cfg).is_err());
    }

    #[test]
    fn median_definition() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
