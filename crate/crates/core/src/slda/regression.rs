use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output of one M-step: no-intercept least squares of labels on topic
/// proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub eta_hat: Vec<f64>,
    /// sqrt(Σ ε² / (J − K))
    pub sigma_hat: f64,
    pub r2_in: f64,
    pub dof: usize,
    /// True when the design was rank deficient and a ridge term was added.
    #[serde(default)]
    pub ridged: bool,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Regresses `y` on the rows of `zbar` without an intercept (the rows sum to
/// one). Rank-deficient designs, e.g. a topic no document uses, are solved
/// with a ridge of 1e-10 · trace(ZᵀZ)/K.
pub fn m_step(zbar: &[Vec<f64>], y: &[f64]) -> Result<RegressionFit> {
    let j = y.len();
    if zbar.len() != j {
        return Err(Error::invalid(format!("{} proportion rows for {j} labels", zbar.len())));
    }
    let k = zbar.first().map(Vec::len).unwrap_or(0);
    if j <= k || k == 0 {
        return Err(Error::Underdetermined { docs: j, topics: k });
    }
    if zbar.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("ragged proportion matrix"));
    }

    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (row, &yj) in zbar.iter().zip(y) {
        for a in 0..k {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            rhs[a] += ra * yj;
            for b in a..k {
                gram[a * k + b] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[a * k + b] = gram[b * k + a];
        }
    }

    let has_empty_column = (0..k).any(|a| gram[a * k + a] == 0.0);
    let (eta_hat, ridged) = match (!has_empty_column).then(|| cholesky_solve(&gram, &rhs, k)).flatten() {
        Some(eta) => (eta, false),
        None => {
            let trace: f64 = (0..k).map(|a| gram[a * k + a]).sum();
            let lambda = 1e-10 * trace / k as f64;
            let mut g = gram.clone();
            for a in 0..k {
                g[a * k + a] += lambda;
            }
            let eta = cholesky_solve(&g, &rhs, k)
                .ok_or_else(|| Error::Invariant("ridge-regularized normal equations not positive definite".into()))?;
            (eta, true)
        }
    };

    let residuals: Vec<f64> = zbar.iter().zip(y).map(|(row, &yj)| yj - predict(&eta_hat, row)).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = y.iter().sum::<f64>() / j as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantLabels);
    }
    let dof = j - k;
    Ok(RegressionFit {
        eta_hat,
        sigma_hat: residual_scale(&residuals, k)?,
        r2_in: 1.0 - ssr / sst,
        dof,
        ridged,
        residuals,
    })
}

/// sqrt(Σ ε² / (J − K)) for `J = residuals.len()`.
pub fn residual_scale(residuals: &[f64], topics: usize) -> Result<f64> {
    let j = residuals.len();
    if j <= topics {
        return Err(Error::Underdetermined { docs: j, topics });
    }
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    Ok((ssr / (j - topics) as f64).sqrt())
}

/// Cholesky factorization and solve; `None` if a pivot is not clearly positive.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for jj in 0..=i {
            let mut s = a[i * n + jj];
            for p in 0..jj {
                s -= l[i * n + p] * l[jj * n + p];
            }
            if i == jj {
                if !(s > tol) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + jj] = s / l[jj * n + jj];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for p in 0..i {
            s -= l[i * n + p] * x[p];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for p in i + 1..n {
            s -= l[p * n + i] * x[p];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// ŷ = η̂ᵀz̄
pub fn predict(eta_hat: &[f64], zbar: &[f64]) -> f64 {
    assert_eq!(eta_hat.len(), zbar.len(), "coefficient and proportion lengths differ");
    eta_hat.iter().zip(zbar).map(|(a, b)| a * b).sum()
}
