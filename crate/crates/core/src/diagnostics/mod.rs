//! Checks of how the label likelihood reshapes the topic posterior: exact
//! enumeration on tiny corpora, the small-σ concentration curve, the
//! residual-scale likelihood ratio, the degenerate two-topic assignment, and
//! the fixed-σ sweep.

mod posterior;
mod ratio;
mod sweep;
mod tiny;

pub use posterior::{
    concentration_curve, default_sigma_grid, exact_posterior, limit_distribution, log_grid, log_joint, min_mse_set,
    sse, ConcentrationReport, Posterior, PosteriorMode, MONOTONE_SLACK, TIE_TOLERANCE,
};
pub use ratio::{
    degenerate_assignment, degenerate_sigma_bound, extreme_topics, fixed_eta_sigma, log_ratio, log_ratio_all_pairs,
    log_ratio_growth, log_ratio_identity, log_ratio_tiny, proportions_of, tiny_ratio_check, GrowthRow, RatioReport,
    TinyRatioCheck,
};
pub use sweep::{sigma_sweep, SweepRow};
pub use tiny::{TinyInstance, TinySpec, BUILTIN_COUNT, MAX_STATES};
