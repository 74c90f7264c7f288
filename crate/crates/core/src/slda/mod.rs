//! Supervised LDA fitted by stochastic EM: an OLS M-step of labels on topic
//! proportions alternating with Gibbs sweeps whose site update is tilted
//! toward assignments that fit the current regression.

mod em;
mod regression;

pub use em::{
    stochastic_em, tilted_site_distribution, tilted_site_update, tilted_sweep, EmOutput, EmRound, EmSchedule,
    SigmaPolicy, SIGMA_FLOOR,
};
pub use regression::{m_step, predict, residual_scale, RegressionFit};
