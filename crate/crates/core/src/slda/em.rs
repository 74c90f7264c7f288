use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::regression::{m_step, RegressionFit};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::math::sample_sd;
use crate::sampler::{init_chain, ChainState, Hyperparams};

/// Lower bound applied to σ̂ under the residual policy.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sigma")]
pub enum SigmaPolicy {
    Fixed(f64),
    /// σ̂ from the latest M-step.
    Residual,
    /// Sample SD of the training labels, computed once.
    LabelSd,
}

impl SigmaPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaPolicy::Fixed(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::Domain(format!("fixed sigma must be positive and finite, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Fixed(s) => write!(f, "fixed:{s}"),
            SigmaPolicy::Residual => f.write_str("residual"),
            SigmaPolicy::LabelSd => f.write_str("label-sd"),
        }
    }
}

impl FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let policy = match s.trim() {
            "residual" => SigmaPolicy::Residual,
            "label-sd" | "label_sd" => SigmaPolicy::LabelSd,
            other => {
                let value = other
                    .strip_prefix("fixed:")
                    .ok_or_else(|| Error::invalid(format!("unknown sigma policy {other:?}")))?;
                SigmaPolicy::Fixed(value.parse().map_err(|_| Error::invalid(format!("bad fixed sigma {value:?}")))?)
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmSchedule {
    pub em_rounds: usize,
    pub e_sweeps_per_round: usize,
    pub burn_in_sweeps: usize,
}

impl Default for EmSchedule {
    fn default() -> Self {
        Self { em_rounds: 9, e_sweeps_per_round: 50, burn_in_sweeps: 250 }
    }
}

impl EmSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.em_rounds == 0 || self.e_sweeps_per_round == 0 {
            return Err(Error::invalid("em_rounds and e_sweeps_per_round must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the EM trace. `sigma` is the value used by the E-step that
/// follows the M-step, or the value the policy would give for the final fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmRound {
    pub round: usize,
    pub sigma: f64,
    pub r2_in: f64,
}

#[derive(Debug, Clone)]
pub struct EmOutput {
    pub state: ChainState,
    pub fit: RegressionFit,
    pub trace: Vec<EmRound>,
}

/// Fills `cum` with cumulative unnormalized tilted weights and returns the
/// total. The Gaussian log-factor is shifted by its maximum before
/// exponentiating, so the largest factor is exactly one.
#[allow(clippy::too_many_arguments)]
#[inline]
fn tilted_weights(
    row: &[u32],
    nj: &[u32],
    inv_denom: &[f64],
    alpha: f64,
    beta: f64,
    y: f64,
    dot_minus: f64,
    len: f64,
    eta: &[f64],
    inv_two_var: f64,
    gauss: &mut [f64],
    cum: &mut [f64],
) -> f64 {
    let k = row.len();
    let mut gmax = f64::NEG_INFINITY;
    for t in 0..k {
        let r = y - (dot_minus + eta[t]) / len;
        let g = -r * r * inv_two_var;
        gauss[t] = g;
        gmax = gmax.max(g);
    }
    let mut total = 0.0;
    for t in 0..k {
        total += (row[t] as f64 + beta) * (nj[t] as f64 + alpha) * inv_denom[t] * (gauss[t] - gmax).exp();
        cum[t] = total;
    }
    total
}

fn check_tilt_args(state: &ChainState, eta: &[f64], sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if eta.len() != state.topics() {
        return Err(Error::invalid(format!("{} coefficients for {} topics", eta.len(), state.topics())));
    }
    Ok(())
}

/// Normalized tilted update distribution for site `(j, i)`, without sampling.
pub fn tilted_site_distribution(
    state: &ChainState,
    corpus: &Corpus,
    j: usize,
    i: usize,
    y: f64,
    eta: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    check_tilt_args(state, eta, sigma)?;
    let k = state.topics();
    let Hyperparams { alpha, beta, .. } = state.hyper;
    let vbeta = beta * state.vocab_size as f64;
    let doc = &corpus.documents[j];
    let v = doc.word_ids[i] as usize;
    let cur = state.z[j][i] as usize;
    let mut row = state.nkv[v * k..(v + 1) * k].to_vec();
    let mut nj = state.njk[j * k..(j + 1) * k].to_vec();
    row[cur] -= 1;
    nj[cur] -= 1;
    let inv_denom: Vec<f64> = (0..k).map(|t| 1.0 / ((state.nk[t] - u32::from(t == cur)) as f64 + vbeta)).collect();
    let dot_minus: f64 = nj.iter().zip(eta).map(|(&c, e)| c as f64 * e).sum();
    let mut gauss = vec![0.0; k];
    let mut cum = vec![0.0; k];
    let total = tilted_weights(
        &row,
        &nj,
        &inv_denom,
        alpha,
        beta,
        y,
        dot_minus,
        doc.len() as f64,
        eta,
        1.0 / (2.0 * sigma * sigma),
        &mut gauss,
        &mut cum,
    );
    let mut prev = 0.0;
    Ok(cum
        .iter()
        .map(|&c| {
            let p = (c - prev) / total;
            prev = c;
            p
        })
        .collect())
}

/// Resamples a single site from the tilted distribution and returns the new topic.
pub fn tilted_site_update(
    state: &mut ChainState,
    corpus: &Corpus,
    j: usize,
    i: usize,
    y: f64,
    eta: &[f64],
    sigma: f64,
) -> Result<usize> {
    let p = tilted_site_distribution(state, corpus, j, i, y, eta, sigma)?;
    let k = state.topics();
    let u = state.rng.random::<f64>();
    let mut acc = 0.0;
    let mut new = k - 1;
    for (t, pt) in p.iter().enumerate() {
        acc += pt;
        if u < acc {
            new = t;
            break;
        }
    }
    let v = corpus.documents[j].word_ids[i] as usize;
    let old = state.z[j][i] as usize;
    state.nkv[v * k + old] -= 1;
    state.njk[j * k + old] -= 1;
    state.nk[old] -= 1;
    state.z[j][i] = new as u32;
    state.nkv[v * k + new] += 1;
    state.njk[j * k + new] += 1;
    state.nk[new] += 1;
    state.tilted_updates += 1;
    Ok(new)
}

/// One document-major pass of tilted updates. `labels[j]` is document `j`'s label.
pub fn tilted_sweep(state: &mut ChainState, corpus: &Corpus, labels: &[f64], eta: &[f64], sigma: f64) -> Result<()> {
    check_tilt_args(state, eta, sigma)?;
    if labels.len() != corpus.num_docs() || state.num_docs() != corpus.num_docs() {
        return Err(Error::invalid("labels, chain and corpus disagree on the number of documents"));
    }
    let k = state.topics();
    let Hyperparams { alpha, beta, .. } = state.hyper;
    let vbeta = beta * state.vocab_size as f64;
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let ChainState { z, nkv, njk, nk, rng, tilted_updates, .. } = state;

    let mut inv_denom: Vec<f64> = nk.iter().map(|&n| 1.0 / (n as f64 + vbeta)).collect();
    let mut gauss = vec![0.0f64; k];
    let mut cum = vec![0.0f64; k];

    for (j, doc) in corpus.documents.iter().enumerate() {
        if doc.word_ids.is_empty() {
            continue;
        }
        let zj = &mut z[j];
        let nj = &mut njk[j * k..(j + 1) * k];
        let len = doc.len() as f64;
        let y = labels[j];
        let mut dot: f64 = nj.iter().zip(eta).map(|(&c, e)| c as f64 * e).sum();
        for (i, &w) in doc.word_ids.iter().enumerate() {
            let v = w as usize;
            let row = &mut nkv[v * k..(v + 1) * k];
            let old = zj[i] as usize;
            row[old] -= 1;
            nj[old] -= 1;
            nk[old] -= 1;
            inv_denom[old] = 1.0 / (nk[old] as f64 + vbeta);
            let dot_minus = dot - eta[old];

            let total = tilted_weights(
                row,
                nj,
                &inv_denom,
                alpha,
                beta,
                y,
                dot_minus,
                len,
                eta,
                inv_two_var,
                &mut gauss,
                &mut cum,
            );
            let u = rng.random::<f64>() * total;
            let new = cum.partition_point(|&c| c <= u).min(k - 1);

            zj[i] = new as u32;
            row[new] += 1;
            nj[new] += 1;
            nk[new] += 1;
            inv_denom[new] = 1.0 / (nk[new] as f64 + vbeta);
            dot = dot_minus + eta[new];
        }
        *tilted_updates += doc.word_ids.len() as u64;
    }
    state.iteration += 1;
    if cfg!(debug_assertions) {
        state.check_consistency(corpus)?;
    }
    Ok(())
}

fn sigma_for(policy: SigmaPolicy, fit: &RegressionFit, label_sd: f64) -> f64 {
    match policy {
        SigmaPolicy::Fixed(s) => s,
        SigmaPolicy::Residual => fit.sigma_hat.max(SIGMA_FLOOR),
        SigmaPolicy::LabelSd => label_sd,
    }
}

/// Stochastic EM on every document of `corpus`: `burn_in_sweeps` plain
/// sweeps, then `em_rounds` of (M-step, σ per policy, `e_sweeps_per_round`
/// tilted sweeps), then a final M-step. The chain is seeded with `seed`
/// directly, so a plain chain from `init_chain(corpus, hyper, seed)` shares
/// its random stream.
pub fn stochastic_em(
    corpus: &Corpus,
    hyper: Hyperparams,
    policy: SigmaPolicy,
    schedule: EmSchedule,
    seed: u64,
) -> Result<EmOutput> {
    policy.validate()?;
    schedule.validate()?;
    if corpus.num_docs() <= hyper.topics {
        return Err(Error::Underdetermined { docs: corpus.num_docs(), topics: hyper.topics });
    }
    let labels = corpus.labels();
    let label_sd = sample_sd(&labels);
    if !(label_sd > 0.0) {
        return Err(Error::ConstantLabels);
    }

    let mut state = init_chain(corpus, hyper, seed)?;
    state.run(corpus, schedule.burn_in_sweeps)?;

    let mut trace = Vec::with_capacity(schedule.em_rounds + 1);
    for round in 0..schedule.em_rounds {
        let fit = m_step(&state.all_proportions(), &labels)?;
        let sigma = sigma_for(policy, &fit, label_sd);
        trace.push(EmRound { round, sigma, r2_in: fit.r2_in });
        for _ in 0..schedule.e_sweeps_per_round {
            tilted_sweep(&mut state, corpus, &labels, &fit.eta_hat, sigma)?;
        }
    }
    let fit = m_step(&state.all_proportions(), &labels)?;
    trace.push(EmRound { round: schedule.em_rounds, sigma: sigma_for(policy, &fit, label_sd), r2_in: fit.r2_in });
    Ok(EmOutput { state, fit, trace })
}

#[cfg(test)]
mod tests;
