use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::Result;
use crate::parallel::map_indices;
use crate::sampler::Hyperparams;
use crate::search::{run_slda, SearchConfig};
use crate::slda::{EmSchedule, SigmaPolicy};

/// One cell of the fixed-σ table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub topics: usize,
    pub seed: u64,
    pub in_sample: f64,
    pub out_sample: f64,
}

/// sLDA with each fixed σ, for every topic count and seed: in-sample R² from
/// the final M-step, out-of-sample R² from the holdout protocol. Rows are
/// ordered by topics, then σ, then seed.
pub fn sigma_sweep(
    corpus: &Corpus,
    topics: &[usize],
    sigmas: &[f64],
    seeds: &[u64],
    schedule: EmSchedule,
    fold_in_sweeps: usize,
) -> Result<Vec<SweepRow>> {
    let cells: Vec<(usize, f64, u64)> = topics
        .iter()
        .flat_map(|&k| sigmas.iter().flat_map(move |&s| seeds.iter().map(move |&seed| (k, s, seed))))
        .collect();
    let rows = map_indices(cells.len(), |i| {
        let (k, sigma, seed) = cells[i];
        let config = SearchConfig { n_runs: 1, fold_in_sweeps, seed, ..SearchConfig::default() };
        let trace = run_slda(corpus, Hyperparams::standard(k)?, SigmaPolicy::Fixed(sigma), schedule, &config)?;
        let w = &trace.winners[0];
        Ok(SweepRow { sigma, topics: k, seed, in_sample: w.in_sample_r2, out_sample: w.holdout_r2 })
    });
    rows.into_iter().collect()
}
