//! Long-horizon statistics: iterated-logarithm envelope tracking,
//! occupation fractions, time averages of the squared diffusion, the
//! exponential indicator functional, and distributional distances.

pub mod ks;
pub mod report;
pub mod trackers;

pub use ks::ks_distance;
pub use report::{
    ensemble_report, lil_ensemble, u_envelope_ensemble, EnsembleConfig, EnsembleReport,
    PathSummary,
};
pub use trackers::{
    f_c_functional, lil_track, occupation_fractions, time_average_gsq, FcTracker, LilRecord,
    LilTracker, OccupationCurve, OccupationTracker, RatioSupTracker,
};
