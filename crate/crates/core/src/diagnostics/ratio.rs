use serde::{Deserialize, Serialize};

use super::posterior::{exact_posterior, min_mse_set, PosteriorMode};
use super::tiny::TinyInstance;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag};
use crate::slda::predict;

/// Two-topic assignment that reproduces each label from the topics with the
/// smallest and largest coefficient: round(λ_j·N) words on the low topic and
/// the rest on the high one, where y_j = λ_j·η_lo + (1 − λ_j)·η_hi.
/// Ties in η go to the lowest topic index.
pub fn degenerate_assignment(labels: &[f64], eta: &[f64], doc_len: usize) -> Result<Vec<Vec<u32>>> {
    if eta.len() < 2 || doc_len == 0 {
        return Err(Error::invalid("need at least two topics and a positive document length"));
    }
    let (lo, hi) = extreme_topics(eta);
    let (e1, e2) = (eta[lo], eta[hi]);
    if let Some(y) = labels.iter().find(|&&y| !(e1 < y && y < e2)) {
        return Err(Error::Domain(format!("label {y} is not strictly between {e1} and {e2}")));
    }
    Ok(labels
        .iter()
        .map(|&y| {
            let lambda = (e2 - y) / (e2 - e1);
            let on_lo = (lambda * doc_len as f64).round() as usize;
            let mut z = vec![lo as u32; on_lo];
            z.resize(doc_len, hi as u32);
            z
        })
        .collect())
}

/// (argmin, argmax) of `eta`, first index on ties.
pub fn extreme_topics(eta: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, &e) in eta.iter().enumerate() {
        if e < eta[lo] {
            lo = k;
        }
        if e > eta[hi] {
            hi = k;
        }
    }
    (lo, hi)
}

/// sqrt(J/(J−K))·(η_hi − η_lo)/N
pub fn degenerate_sigma_bound(docs: usize, topics: usize, eta: &[f64], doc_len: usize) -> f64 {
    let (lo, hi) = extreme_topics(eta);
    (docs as f64 / (docs - topics) as f64).sqrt() * (eta[hi] - eta[lo]) / doc_len as f64
}

pub fn proportions_of(z: &[Vec<u32>], topics: usize) -> Vec<Vec<f64>> {
    z.iter()
        .map(|zj| {
            let mut c = vec![0.0; topics];
            zj.iter().for_each(|&t| c[t as usize] += 1.0);
            c.iter().map(|x| x / zj.len() as f64).collect()
        })
        .collect()
}

/// sqrt(Σ (y_j − ηᵀz̄_j)² / (J − K)) with η held fixed.
pub fn fixed_eta_sigma(zbar: &[Vec<f64>], labels: &[f64], eta: &[f64]) -> Result<f64> {
    let (j, k) = (labels.len(), eta.len());
    if zbar.len() != j {
        return Err(Error::invalid("one proportion row per label required"));
    }
    if j <= k {
        return Err(Error::Underdetermined { docs: j, topics: k });
    }
    let ssr: f64 = zbar.iter().zip(labels).map(|(z, y)| (y - predict(eta, z)).powi(2)).sum();
    Ok((ssr / (j - k) as f64).sqrt())
}

/// Both log R paths on a tiny instance: the pair (z_bad, z_good) in full,
/// plus the largest disagreement between the paths over every assignment
/// against z_good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyRatioCheck {
    pub instance: String,
    /// Text-only posterior mode.
    pub z_good_index: usize,
    /// The degenerate assignment when it exists, else the first minimum-SSE one.
    pub z_bad_index: usize,
    pub degenerate: bool,
    /// Degenerate residual-scale bound, when `degenerate`.
    pub bound: Option<f64>,
    pub report: RatioReport,
    pub pairs: usize,
    pub max_path_gap: f64,
}

pub fn tiny_ratio_check(tiny: &TinyInstance) -> Result<TinyRatioCheck> {
    let text = exact_posterior(tiny, PosteriorMode::TextOnly)?;
    let z_good_index =
        text.log_probs.iter().enumerate().fold(0, |best, (i, &lp)| if lp > text.log_probs[best] { i } else { best });
    let z_good = tiny.assignment(z_good_index);
    let labels = tiny.labels();
    let n = tiny.corpus.documents[0].len();
    let uniform = tiny.corpus.documents.iter().all(|d| d.len() == n);
    let degenerate = if uniform { degenerate_assignment(&labels, &tiny.eta, n).ok() } else { None };
    let (z_bad, bound) = match degenerate {
        Some(z) => (z, Some(degenerate_sigma_bound(labels.len(), tiny.topics(), &tiny.eta, n))),
        None => (tiny.assignment(min_mse_set(tiny, &tiny.eta).1[0]), None),
    };
    let report = log_ratio_tiny(tiny, &z_bad, &z_good)?;
    let pairs = log_ratio_all_pairs(tiny, &z_good)?;
    let max_path_gap = pairs.iter().map(|(d, i)| (d - i).abs()).fold(0.0, f64::max);
    Ok(TinyRatioCheck {
        instance: tiny.name.clone(),
        z_good_index,
        z_bad_index: tiny.index_of(&z_bad),
        degenerate: bound.is_some(),
        bound,
        report,
        pairs: pairs.len(),
        max_path_gap,
    })
}

/// One document length of a growth run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub doc_len: usize,
    /// Residual scale of the degenerate assignment.
    pub sigma_hat: f64,
    /// Residual scale of the comparison assignment.
    pub sigma_hat_prime: f64,
    pub bound: f64,
    pub log_r: f64,
}

/// log R of the degenerate assignment against a uniformly random one, for
/// each document length. Labels are drawn once, uniformly on the middle 90%
/// of [η_lo, η_hi], and shared across lengths; the random assignment is
/// redrawn per length.
pub fn log_ratio_growth(docs: usize, eta: &[f64], doc_lens: &[usize], seed: u64) -> Result<Vec<GrowthRow>> {
    use rand::Rng;
    let k = eta.len();
    if docs <= k {
        return Err(Error::Underdetermined { docs, topics: k });
    }
    let (lo, hi) = extreme_topics(eta);
    if !(eta[hi] > eta[lo]) {
        return Err(Error::Domain("η needs two distinct values".into()));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[tag::GROWTH]));
    let labels: Vec<f64> =
        (0..docs).map(|_| eta[lo] + (eta[hi] - eta[lo]) * (0.05 + 0.9 * rng.random::<f64>())).collect();
    doc_lens
        .iter()
        .map(|&n| {
            let z_bad = degenerate_assignment(&labels, eta, n)?;
            let mut rng = rng_from_seed(derive_seed(seed, &[tag::GROWTH, n as u64]));
            let z_good: Vec<Vec<u32>> =
                (0..docs).map(|_| (0..n).map(|_| rng.random_range(0..k as u32)).collect()).collect();
            let r = log_ratio(&z_bad, &z_good, &labels, eta)?;
            Ok(GrowthRow {
                doc_len: n,
                sigma_hat: r.sigma_hat,
                sigma_hat_prime: r.sigma_hat_prime,
                bound: degenerate_sigma_bound(docs, k, eta, n),
                log_r: r.log_r_identity,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub z_bad: Vec<Vec<u32>>,
    pub z_good: Vec<Vec<u32>>,
    pub sigma_hat: f64,
    pub sigma_hat_prime: f64,
    /// J·(log σ̂′ − log σ̂); ±∞ when one scale is zero.
    pub log_r_identity: f64,
    /// From normalized posteriors; tiny instances only.
    pub log_r_definitional: Option<f64>,
    pub docs: usize,
    /// Common document length, if all documents share one.
    pub doc_len: Option<usize>,
}

/// J·(log σ̂′ − log σ̂), with infinite values when exactly one scale is zero.
pub fn log_ratio_identity(sigma_hat: f64, sigma_hat_prime: f64, docs: usize) -> Result<f64> {
    match (sigma_hat == 0.0, sigma_hat_prime == 0.0) {
        (true, true) => Err(Error::Domain("both residual scales are zero".into())),
        (true, false) => Ok(f64::INFINITY),
        (false, true) => Ok(f64::NEG_INFINITY),
        (false, false) => Ok(docs as f64 * (sigma_hat_prime.ln() - sigma_hat.ln())),
    }
}

/// log R for a pair of assignments on any corpus, identity path only.
pub fn log_ratio(z_bad: &[Vec<u32>], z_good: &[Vec<u32>], labels: &[f64], eta: &[f64]) -> Result<RatioReport> {
    let k = eta.len();
    let sigma_hat = fixed_eta_sigma(&proportions_of(z_bad, k), labels, eta)?;
    let sigma_hat_prime = fixed_eta_sigma(&proportions_of(z_good, k), labels, eta)?;
    let n = z_bad.first().map(Vec::len);
    let doc_len = n.filter(|&n| z_bad.iter().chain(z_good).all(|z| z.len() == n));
    Ok(RatioReport {
        z_bad: z_bad.to_vec(),
        z_good: z_good.to_vec(),
        sigma_hat,
        sigma_hat_prime,
        log_r_identity: log_ratio_identity(sigma_hat, sigma_hat_prime, labels.len())?,
        log_r_definitional: None,
        docs: labels.len(),
        doc_len,
    })
}

/// log R on a tiny instance, both from the identity and from the ratio of
/// normalized residual-scale and text-only posteriors.
pub fn log_ratio_tiny(tiny: &TinyInstance, z_bad: &[Vec<u32>], z_good: &[Vec<u32>]) -> Result<RatioReport> {
    let mut report = log_ratio(z_bad, z_good, &tiny.labels(), &tiny.eta)?;
    let labeled = exact_posterior(tiny, PosteriorMode::Residual)?;
    let text = exact_posterior(tiny, PosteriorMode::TextOnly)?;
    let (a, b) = (tiny.index_of(z_bad), tiny.index_of(z_good));
    let log_pa = labeled.log_probs[a] - labeled.log_probs[b];
    let log_p = text.log_probs[a] - text.log_probs[b];
    report.log_r_definitional = Some(log_pa - log_p);
    Ok(report)
}

/// log R for every assignment against `z_good`, by both paths; reuses the
/// two posteriors across pairs.
pub fn log_ratio_all_pairs(tiny: &TinyInstance, z_good: &[Vec<u32>]) -> Result<Vec<(f64, f64)>> {
    let labeled = exact_posterior(tiny, PosteriorMode::Residual)?;
    let text = exact_posterior(tiny, PosteriorMode::TextOnly)?;
    let labels = tiny.labels();
    let k = tiny.topics();
    let b = tiny.index_of(z_good);
    let sigma_good = fixed_eta_sigma(&proportions_of(z_good, k), &labels, &tiny.eta)?;
    (0..tiny.state_count())
        .map(|a| {
            let z = tiny.assignment(a);
            let sigma = fixed_eta_sigma(&proportions_of(&z, k), &labels, &tiny.eta)?;
            let identity = log_ratio_identity(sigma, sigma_good, labels.len())?;
            let definitional = (labeled.log_probs[a] - labeled.log_probs[b]) - (text.log_probs[a] - text.log_probs[b]);
            Ok((definitional, identity))
        })
        .collect()
}
