use serde::{Deserialize, Serialize};

use super::tiny::TinyInstance;
use crate::error::{Error, Result};
use crate::math::{ln_gamma, log_sum_exp, total_variation};
use crate::parallel::map_indices;

/// Absolute tolerance on summed squared error for membership in Z_Δ.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PosteriorMode {
    /// p(z | w)
    TextOnly,
    /// p(z, w) · Π_j exp(−(y_j − ηᵀz̄_j)² / 2σ²), with the instance's η.
    Labeled { sigma: f64 },
    /// p(z, w) · Π_j N(y_j; ηᵀz̄_j, σ̂(z)²) with σ̂(z)² = Σ ε² / (J − K).
    Residual,
}

/// Normalized distribution over every assignment, indexed as in
/// [`TinyInstance::assignment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub log_probs: Vec<f64>,
}

impl Posterior {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }
}

/// log p(z, w) of the collapsed model: Dirichlet-multinomial terms for the
/// topic-word counts and for the document-topic counts.
pub fn log_joint(tiny: &TinyInstance, z: &[Vec<u32>]) -> f64 {
    let k = tiny.topics();
    let v = tiny.corpus.vocab_size();
    let (alpha, beta) = (tiny.hyper.alpha, tiny.hyper.beta);
    let mut nkv = vec![0usize; k * v];
    let mut nk = vec![0usize; k];
    let mut lp = 0.0;
    for (doc, zj) in tiny.corpus.documents.iter().zip(z) {
        let mut njk = vec![0usize; k];
        for (&w, &t) in doc.word_ids.iter().zip(zj) {
            nkv[t as usize * v + w as usize] += 1;
            nk[t as usize] += 1;
            njk[t as usize] += 1;
        }
        lp += ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);
        lp += njk.iter().map(|&c| ln_gamma(c as f64 + alpha)).sum::<f64>();
        lp -= ln_gamma(doc.len() as f64 + k as f64 * alpha);
    }
    for t in 0..k {
        lp += ln_gamma(v as f64 * beta) - v as f64 * ln_gamma(beta);
        lp += (0..v).map(|w| ln_gamma(nkv[t * v + w] as f64 + beta)).sum::<f64>();
        lp -= ln_gamma(nk[t] as f64 + v as f64 * beta);
    }
    lp
}

/// Σ_j (y_j − ηᵀz̄_j)²
pub fn sse(tiny: &TinyInstance, z: &[Vec<u32>], eta: &[f64]) -> f64 {
    tiny.proportions(z)
        .iter()
        .zip(tiny.labels())
        .map(|(zbar, y)| {
            let m: f64 = zbar.iter().zip(eta).map(|(a, b)| a * b).sum();
            (y - m) * (y - m)
        })
        .sum()
}

fn normalize(mut log_w: Vec<f64>) -> Posterior {
    let lse = log_sum_exp(&log_w);
    log_w.iter_mut().for_each(|l| *l -= lse);
    Posterior { log_probs: log_w }
}

pub fn exact_posterior(tiny: &TinyInstance, mode: PosteriorMode) -> Result<Posterior> {
    let j = tiny.num_docs();
    let k = tiny.topics();
    match mode {
        PosteriorMode::Labeled { sigma } if !(sigma > 0.0) => {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        PosteriorMode::Residual if j <= k => return Err(Error::Underdetermined { docs: j, topics: k }),
        _ => {}
    }
    let labels = tiny.labels();
    let eta = &tiny.eta;
    let log_w: Vec<Result<f64>> = map_indices(tiny.state_count(), |s| {
        let z = tiny.assignment(s);
        let text = log_joint(tiny, &z);
        Ok(match mode {
            PosteriorMode::TextOnly => text,
            PosteriorMode::Labeled { sigma } => text - sse(tiny, &z, eta) / (2.0 * sigma * sigma),
            PosteriorMode::Residual => {
                let resid: Vec<f64> = tiny
                    .proportions(&z)
                    .iter()
                    .zip(&labels)
                    .map(|(zbar, y)| y - zbar.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let sigma_hat = (resid.iter().map(|e| e * e).sum::<f64>() / (j - k) as f64).sqrt();
                if sigma_hat == 0.0 {
                    return Err(Error::Domain(format!(
                        "assignment {s} fits the labels exactly, so the residual-scale density is unbounded"
                    )));
                }
                let gauss: f64 = resid
                    .iter()
                    .map(|e| {
                        -(2.0 * std::f64::consts::PI).sqrt().ln()
                            - sigma_hat.ln()
                            - e * e / (2.0 * sigma_hat * sigma_hat)
                    })
                    .sum();
                text + gauss
            }
        })
    });
    Ok(normalize(log_w.into_iter().collect::<Result<_>>()?))
}

/// Δ = min_z Σ_j (y_j − ηᵀz̄_j)² and every assignment within [`TIE_TOLERANCE`] of it.
pub fn min_mse_set(tiny: &TinyInstance, eta: &[f64]) -> (f64, Vec<usize>) {
    let errs = all_sse(tiny, eta);
    let delta = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let set = (0..errs.len()).filter(|&s| errs[s] - delta <= TIE_TOLERANCE).collect();
    (delta, set)
}

fn all_sse(tiny: &TinyInstance, eta: &[f64]) -> Vec<f64> {
    map_indices(tiny.state_count(), |s| sse(tiny, &tiny.assignment(s), eta))
}

/// q(z) ∝ p(z, w) on Z_Δ, zero elsewhere.
pub fn limit_distribution(tiny: &TinyInstance, z_delta: &[usize]) -> Vec<f64> {
    let logs: Vec<f64> = z_delta.iter().map(|&s| log_joint(tiny, &tiny.assignment(s))).collect();
    let lse = log_sum_exp(&logs);
    let mut q = vec![0.0; tiny.state_count()];
    for (&s, l) in z_delta.iter().zip(&logs) {
        q[s] = (l - lse).exp();
    }
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub instance: String,
    pub eta: Vec<f64>,
    pub delta: f64,
    pub z_delta_size: usize,
    /// Smallest excess SSE outside Z_Δ; `None` when every assignment is in Z_Δ.
    pub gap: Option<f64>,
    pub tie_tolerance: f64,
    /// Decreasing.
    pub sigmas: Vec<f64>,
    pub tv: Vec<f64>,
    pub mass_on_z_delta: Vec<f64>,
    /// Largest grid σ from which TV stays below `tv_target` for every smaller grid σ.
    pub threshold_sigma: Option<f64>,
    pub tv_target: f64,
    /// Over the last decade of the grid, within 1e-9.
    pub tv_monotone_final_decade: bool,
    pub mass_monotone_final_decade: bool,
}

pub const MONOTONE_SLACK: f64 = 1e-9;

/// Decreasing log-spaced σ grid, 10 points per decade, from 10× the label
/// scale down to 1e-5·sqrt(gap).
pub fn default_sigma_grid(tiny: &TinyInstance, eta: &[f64]) -> Vec<f64> {
    let errs = all_sse(tiny, eta);
    let delta = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let gap = gap_of(&errs, delta);
    let scale = tiny.labels().iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-3);
    let lo = if gap.is_finite() { 1e-5 * gap.sqrt() } else { 1e-5 * scale };
    log_grid(10.0 * scale, lo.min(scale), 10)
}

fn gap_of(errs: &[f64], delta: f64) -> f64 {
    errs.iter().filter(|&&e| e - delta > TIE_TOLERANCE).map(|e| e - delta).fold(f64::INFINITY, f64::min)
}

/// From `hi` down to `lo` (inclusive), `per_decade` points per factor of 10.
pub fn log_grid(hi: f64, lo: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).ceil() as usize;
    (0..=steps).map(|i| hi * 10f64.powf(-(i as f64) / per_decade as f64)).collect()
}

pub fn concentration_curve(tiny: &TinyInstance, eta: &[f64], sigmas: &[f64]) -> Result<ConcentrationReport> {
    if eta.len() != tiny.topics() {
        return Err(Error::invalid("eta must have one entry per topic"));
    }
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("sigma grid must be positive and strictly decreasing"));
    }
    let errs = all_sse(tiny, eta);
    let delta = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_delta: Vec<usize> = (0..errs.len()).filter(|&s| errs[s] - delta <= TIE_TOLERANCE).collect();
    let gap = gap_of(&errs, delta);
    let q = limit_distribution(tiny, &z_delta);
    let text: Vec<f64> = (0..errs.len()).map(|s| log_joint(tiny, &tiny.assignment(s))).collect();

    let mut tv = Vec::with_capacity(sigmas.len());
    let mut mass = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        // subtract Δ inside the exponent so the minimum-error states keep weight one
        let logs: Vec<f64> = text.iter().zip(&errs).map(|(t, e)| t - (e - delta) / (2.0 * sigma * sigma)).collect();
        let p = normalize(logs).probs();
        tv.push(total_variation(&p, &q));
        mass.push(z_delta.iter().map(|&s| p[s]).sum());
    }

    let tv_target = 0.01;
    let mut threshold_sigma = None;
    for (i, &s) in sigmas.iter().enumerate().rev() {
        if tv[i] < tv_target {
            threshold_sigma = Some(s);
        } else {
            break;
        }
    }
    let last_decade = sigmas.iter().position(|&s| s <= sigmas[sigmas.len() - 1] * 10.0 * (1.0 + 1e-12)).unwrap_or(0);
    let tail = last_decade..sigmas.len();
    let tv_monotone_final_decade = tail.clone().skip(1).all(|i| tv[i] <= tv[i - 1] + MONOTONE_SLACK);
    let mass_monotone_final_decade = tail.skip(1).all(|i| mass[i] >= mass[i - 1] - MONOTONE_SLACK);

    Ok(ConcentrationReport {
        instance: tiny.name.clone(),
        eta: eta.to_vec(),
        delta,
        z_delta_size: z_delta.len(),
        gap: gap.is_finite().then_some(gap),
        tie_tolerance: TIE_TOLERANCE,
        sigmas: sigmas.to_vec(),
        tv,
        mass_on_z_delta: mass,
        threshold_sigma,
        tv_target,
        tv_monotone_final_decade,
        mass_monotone_final_decade,
    })
}
