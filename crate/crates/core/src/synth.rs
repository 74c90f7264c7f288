//! Corpora and labels drawn from the sLDA generative model, with the label
//! noise calibrated to a target share of explained variance.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{split_corpus, Corpus, Document, Split, SplitFractions, Vocabulary};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::rng::{derive_seed, rng_from_seed, tag, ChainRng};

/// Monte Carlo draws used when calibrating σ*.
pub const CALIBRATION_DRAWS: usize = 100_000;

/// Dirichlet draw by normalized Gamma variates. Shapes below one use
/// Γ(a) = Γ(a + 1)·U^(1/a) in log space so tiny concentrations do not
/// underflow to exact zeros.
pub fn sample_dirichlet(concentration: &[f64], rng: &mut ChainRng) -> Result<Vec<f64>> {
    if concentration.is_empty() {
        return Err(Error::invalid("empty concentration vector"));
    }
    let mut logs = Vec::with_capacity(concentration.len());
    for &a in concentration {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("Dirichlet concentration must be positive, got {a}")));
        }
        let shape = if a < 1.0 { a + 1.0 } else { a };
        let g: f64 = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
        let mut lg = g.ln();
        if a < 1.0 {
            let u = 1.0 - rng.random::<f64>();
            lg += u.ln() / a;
        }
        logs.push(lg);
    }
    let lse = log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - lse).exp().max(f64::MIN_POSITIVE)).collect())
}

/// Symmetric-Dirichlet draw into a reusable buffer.
fn sample_symmetric(alpha: f64, out: &mut [f64], rng: &mut ChainRng) -> Result<()> {
    let d = sample_dirichlet(&vec![alpha; out.len()], rng)?;
    out.copy_from_slice(&d);
    Ok(())
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw(cum: &[f64], rng: &mut ChainRng) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub vocab: usize,
    pub docs: usize,
    pub doc_len: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Drawn i.i.d. standard normal when absent.
    pub eta_star: Option<Vec<f64>>,
    /// Used as given when `target_r2` is absent.
    pub sigma_star: Option<f64>,
    pub target_r2: Option<f64>,
    pub split: SplitFractions,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::desk(10, 0)
    }
}

impl SyntheticSpec {
    /// K topics, V=500, J=2000, N=50, α=5/K, β=0.01, target R² 0.25.
    pub fn desk(topics: usize, seed: u64) -> Self {
        Self {
            topics,
            vocab: 500,
            docs: 2000,
            doc_len: 50,
            alpha: 5.0 / topics.max(1) as f64,
            beta: 0.01,
            eta_star: None,
            sigma_star: None,
            target_r2: Some(0.25),
            split: SplitFractions::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.vocab == 0 || self.docs == 0 || self.doc_len == 0 {
            return Err(Error::invalid("topics, vocab, docs and doc_len must all be positive"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Domain("alpha and beta must be positive".into()));
        }
        if let Some(eta) = &self.eta_star {
            if eta.len() != self.topics {
                return Err(Error::invalid(format!("eta_star has {} entries for {} topics", eta.len(), self.topics)));
            }
        }
        match (self.target_r2, self.sigma_star) {
            (Some(_), Some(_)) => Err(Error::invalid("give either target_r2 or sigma_star, not both")),
            (None, None) => Err(Error::invalid("one of target_r2 or sigma_star is required")),
            (Some(r), None) if !(r > 0.0 && r < 1.0) => {
                Err(Error::Domain(format!("target_r2 must be in (0,1), got {r}")))
            }
            (None, Some(s)) if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::Domain(format!("sigma_star must be non-negative, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub eta_star: Vec<f64>,
    pub sigma_star: f64,
    pub target_r2: Option<f64>,
    /// K rows over the vocabulary.
    pub phi: Vec<Vec<f64>>,
    /// J rows over topics.
    pub theta: Vec<Vec<f64>>,
    pub z: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn zbar(&self) -> Vec<Vec<f64>> {
        let k = self.eta_star.len();
        self.z
            .iter()
            .map(|zj| {
                let mut c = vec![0.0; k];
                zj.iter().for_each(|&t| c[t as usize] += 1.0);
                c.iter().map(|x| x / zj.len() as f64).collect()
            })
            .collect()
    }

    pub fn summary(&self, spec: &SyntheticSpec) -> TruthSummary {
        TruthSummary {
            spec: spec.clone(),
            eta_star: self.eta_star.clone(),
            sigma_star: self.sigma_star,
            phi_sha256: matrix_digest(&self.phi),
            theta_sha256: matrix_digest(&self.theta),
        }
    }
}

/// What the CLI writes next to a simulated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub spec: SyntheticSpec,
    pub eta_star: Vec<f64>,
    pub sigma_star: f64,
    pub phi_sha256: String,
    pub theta_sha256: String,
}

fn matrix_digest(rows: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        for x in r {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

/// φ_k ~ Dir(β), θ_j ~ Dir(α), z ~ θ_j, w ~ φ_z, y ~ N(η*·z̄_j, σ*²); then a
/// seeded train/validation/holdout split.
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let (k, v) = (spec.topics, spec.vocab);

    let eta_star = match &spec.eta_star {
        Some(e) => e.clone(),
        None => {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[tag::SYNTH, 0]));
            (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let sigma_star = match spec.target_r2 {
        Some(r) => {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[tag::CALIBRATE]));
            calibrate_sigma(&eta_star, spec.alpha, spec.doc_len, r, CALIBRATION_DRAWS, &mut rng)?
        }
        None => spec.sigma_star.unwrap_or(0.0),
    };

    let mut rng = rng_from_seed(derive_seed(spec.seed, &[tag::SYNTH, 1]));
    let mut phi = vec![vec![0.0; v]; k];
    for row in &mut phi {
        sample_symmetric(spec.beta, row, &mut rng)?;
    }
    let phi_cum: Vec<Vec<f64>> = phi.iter().map(|r| cumulative(r)).collect();

    let mut rng = rng_from_seed(derive_seed(spec.seed, &[tag::SYNTH, 2]));
    let mut theta = vec![vec![0.0; k]; spec.docs];
    let mut z = Vec::with_capacity(spec.docs);
    let mut documents = Vec::with_capacity(spec.docs);
    for (j, th) in theta.iter_mut().enumerate() {
        sample_symmetric(spec.alpha, th, &mut rng)?;
        let th_cum = cumulative(th);
        let zj: Vec<u32> = (0..spec.doc_len).map(|_| draw(&th_cum, &mut rng) as u32).collect();
        let words: Vec<u32> = zj.iter().map(|&t| draw(&phi_cum[t as usize], &mut rng) as u32).collect();
        let mean: f64 = zj.iter().map(|&t| eta_star[t as usize]).sum::<f64>() / spec.doc_len as f64;
        let noise: f64 = StandardNormal.sample(&mut rng);
        documents.push(Document {
            id: format!("doc{j:06}"),
            word_ids: words,
            label: mean + sigma_star * noise,
            split: Split::Train,
            meta: None,
        });
        z.push(zj);
    }
    let corpus = Corpus::new(Vocabulary::synthetic(v), documents)?;
    let corpus = split_corpus(&corpus, spec.split, spec.seed)?;
    Ok(Synthetic { corpus, truth: GroundTruth { eta_star, sigma_star, target_r2: spec.target_r2, phi, theta, z } })
}

/// σ* such that s² / (s² + σ*²) = `target_r2`, with s² = Var(η*·z̄) estimated
/// from `draws` simulated documents (θ ~ Dir(α), N topic draws).
pub fn calibrate_sigma(
    eta_star: &[f64],
    alpha: f64,
    doc_len: usize,
    target_r2: f64,
    draws: usize,
    rng: &mut ChainRng,
) -> Result<f64> {
    if !(target_r2 > 0.0 && target_r2 < 1.0) {
        return Err(Error::Domain(format!("target_r2 must be in (0,1), got {target_r2}")));
    }
    if eta_star.is_empty() || doc_len == 0 || draws < 2 {
        return Err(Error::invalid("calibration needs topics, a document length and at least two draws"));
    }
    if eta_star.iter().all(|&e| e == eta_star[0]) {
        return Err(Error::Domain("all coefficients are equal, so the labels carry no topic signal".into()));
    }
    let k = eta_star.len();
    let mut theta = vec![0.0; k];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        sample_symmetric(alpha, &mut theta, rng)?;
        let cum = cumulative(&theta);
        let m = (0..doc_len).map(|_| eta_star[draw(&cum, rng)]).sum::<f64>() / doc_len as f64;
        sum += m;
        sum_sq += m * m;
    }
    let n = draws as f64;
    let var = (sum_sq - sum * sum / n) / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Domain("simulated signal variance is zero".into()));
    }
    Ok(var.sqrt() * ((1.0 - target_r2) / target_r2).sqrt())
}
