//! Posterior summarization, batch-means inefficiency factors, average
//! covariate effects by the method of composition, and trace export.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{self, DeltaVector, OrdinalDataset};
use crate::or1::Or1Fit;
use crate::or2::Or2Fit;

/// Per-parameter posterior summary: mean, standard deviation, and the
/// equal-tailed 95% credible interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStats {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Summary statistics over the post-burn columns of a params x iterations
/// draw matrix. Quantiles use linear interpolation of order statistics.
pub fn summarize(draws: &DMatrix<f64>, burn: usize) -> Result<Vec<ParamStats>> {
    let cols = draws.ncols();
    if burn >= cols {
        return Err(Error::Shape(format!(
            "burn {burn} leaves no post-burn columns out of {cols}"
        )));
    }
    let m = cols - burn;
    let mut out = Vec::with_capacity(draws.nrows());
    for r in 0..draws.nrows() {
        let row: Vec<f64> = (burn..cols).map(|c| draws[(r, c)]).collect();
        let mean = row.iter().sum::<f64>() / m as f64;
        let sd = if m > 1 {
            (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = row;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(ParamStats {
            mean,
            sd,
            lower: quantile_sorted(&sorted, 0.025),
            upper: quantile_sorted(&sorted, 0.975),
        });
    }
    Ok(out)
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Batch-means inefficiency factors, one per parameter row.
#[derive(Debug, Clone)]
pub struct InefficiencySummary {
    pub factors: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub cutoff: f64,
}

const MAX_ACF_LAG: usize = 500;

/// Inefficiency factor per parameter via the batch-means method: the batch
/// size is the smallest lag at which |acf| falls below `cutoff`, capped so
/// that at least 10 batches remain.
pub fn inefficiency_factor(draws: &DMatrix<f64>, cutoff: f64) -> Result<InefficiencySummary> {
    let m = draws.ncols();
    if m < 100 {
        return Err(Error::Shape(format!("need at least 100 draws, got {m}")));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Domain(format!("cutoff must be in (0,1), got {cutoff}")));
    }
    let max_lag = (m / 2).min(MAX_ACF_LAG);
    let cap = (m / 10).max(1);
    let mut factors = Vec::with_capacity(draws.nrows());
    let mut batch_sizes = Vec::with_capacity(draws.nrows());
    for r in 0..draws.nrows() {
        let series: Vec<f64> = (0..m).map(|c| draws[(r, c)]).collect();
        let mean = series.iter().sum::<f64>() / m as f64;
        let var0: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        if var0 <= 0.0 {
            return Err(Error::DegenerateChain(format!(
                "parameter row {r} has zero variance"
            )));
        }
        let mut b = cap;
        for lag in 1..=max_lag {
            let mut cov = 0.0;
            for t in lag..m {
                cov += (series[t] - mean) * (series[t - lag] - mean);
            }
            let acf = cov / m as f64 / var0;
            if acf.abs() < cutoff {
                b = lag;
                break;
            }
        }
        let b = b.clamp(1, cap);
        let nb = m / b;
        let mut batch_means = Vec::with_capacity(nb);
        for batch in 0..nb {
            let s: f64 = series[batch * b..(batch + 1) * b].iter().sum();
            batch_means.push(s / b as f64);
        }
        let bm_mean = batch_means.iter().sum::<f64>() / nb as f64;
        let bm_var = batch_means
            .iter()
            .map(|v| (v - bm_mean) * (v - bm_mean))
            .sum::<f64>()
            / (nb as f64 - 1.0);
        let var_draws = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (m as f64 - 1.0);
        factors.push(b as f64 * bm_var / var_draws);
        batch_sizes.push(b);
    }
    Ok(InefficiencySummary { factors, batch_sizes, cutoff })
}

/// Average covariate effect per outcome category: signed probability changes
/// that sum to zero.
#[derive(Debug, Clone)]
pub struct CovEffectResult {
    pub effects: Vec<f64>,
    pub quantile: f64,
    pub draws_used: usize,
}

fn check_mod_matrices(
    dataset: &OrdinalDataset,
    xmod1: &DMatrix<f64>,
    xmod2: &DMatrix<f64>,
) -> Result<()> {
    let (n, k) = (dataset.n(), dataset.k());
    for (name, m) in [("xMod1", xmod1), ("xMod2", xmod2)] {
        if m.nrows() != n || m.ncols() != k {
            return Err(Error::Shape(format!(
                "{name} is {}x{}, expected {n}x{k}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// Average covariate effect for the free-cut-point model, averaging the
/// pointwise probability differences over all observations and all post-burn
/// draws (full double sum, deterministic order).
pub fn cov_effect_or1(
    fit: &Or1Fit,
    dataset: &OrdinalDataset,
    xmod1: &DMatrix<f64>,
    xmod2: &DMatrix<f64>,
    p: f64,
) -> Result<CovEffectResult> {
    check_mod_matrices(dataset, xmod1, xmod2)?;
    let draws = &fit.draws;
    let burn = draws.config.burn;
    let nsim = draws.beta.ncols();
    if burn >= nsim {
        return Err(Error::Shape("no post-burn draws available".into()));
    }
    let j = dataset.num_outcomes();
    let n = dataset.n();
    let m = nsim - burn;
    let mut acc = vec![0.0f64; j];
    for col in burn..nsim {
        let beta = DVector::from_iterator(draws.beta.nrows(), draws.beta.column(col).iter().copied());
        let delta = DeltaVector::new(DVector::from_iterator(
            draws.delta.nrows(),
            draws.delta.column(col).iter().copied(),
        ))?;
        let gamma = model::delta_to_gamma(&delta);
        for i in 0..n {
            let x1 = DVector::from_iterator(xmod1.ncols(), xmod1.row(i).iter().copied());
            let x2 = DVector::from_iterator(xmod2.ncols(), xmod2.row(i).iter().copied());
            let p1 = model::outcome_probs_or1(&x1, &beta, &gamma, p)?;
            let p2 = model::outcome_probs_or1(&x2, &beta, &gamma, p)?;
            for c in 0..j {
                acc[c] += p2[c] - p1[c];
            }
        }
    }
    let scale = 1.0 / (m as f64 * n as f64);
    let effects: Vec<f64> = acc.iter().map(|v| v * scale).collect();
    debug_assert!(effects.iter().sum::<f64>().abs() < 1e-10);
    Ok(CovEffectResult { effects, quantile: p, draws_used: m })
}

/// Average covariate effect for the fixed-cut-point model.
pub fn cov_effect_or2(
    fit: &Or2Fit,
    dataset: &OrdinalDataset,
    xmod1: &DMatrix<f64>,
    xmod2: &DMatrix<f64>,
    p: f64,
) -> Result<CovEffectResult> {
    check_mod_matrices(dataset, xmod1, xmod2)?;
    let draws = &fit.draws;
    let burn = draws.config.burn;
    let nsim = draws.beta.ncols();
    if burn >= nsim {
        return Err(Error::Shape("no post-burn draws available".into()));
    }
    let gamma = &draws.gamma;
    let n = dataset.n();
    let m = nsim - burn;
    let mut acc = vec![0.0f64; 3];
    for col in burn..nsim {
        let beta = DVector::from_iterator(draws.beta.nrows(), draws.beta.column(col).iter().copied());
        let sigma = draws.sigma[col];
        for i in 0..n {
            let x1 = DVector::from_iterator(xmod1.ncols(), xmod1.row(i).iter().copied());
            let x2 = DVector::from_iterator(xmod2.ncols(), xmod2.row(i).iter().copied());
            let p1 = model::outcome_probs_or2(&x1, &beta, sigma, gamma, p)?;
            let p2 = model::outcome_probs_or2(&x2, &beta, sigma, gamma, p)?;
            for c in 0..3 {
                acc[c] += p2[c] - p1[c];
            }
        }
    }
    let scale = 1.0 / (m as f64 * n as f64);
    let effects: Vec<f64> = acc.iter().map(|v| v * scale).collect();
    debug_assert!(effects.iter().sum::<f64>().abs() < 1e-10);
    Ok(CovEffectResult { effects, quantile: p, draws_used: m })
}

/// Labeled post-burn series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// Post-burn draw series per parameter, in row order.
pub fn trace_export(
    draws: &DMatrix<f64>,
    names: &[String],
    burn: usize,
) -> Result<Vec<TraceSeries>> {
    if names.len() != draws.nrows() {
        return Err(Error::Shape(format!(
            "{} names supplied for {} parameter rows",
            names.len(),
            draws.nrows()
        )));
    }
    if burn >= draws.ncols() {
        return Err(Error::Shape("burn leaves no post-burn columns".into()));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(r, name)| TraceSeries {
            name: name.clone(),
            values: (burn..draws.ncols()).map(|c| draws[(r, c)]).collect(),
        })
        .collect())
}
