//! Model evidence: log marginal likelihood from reduced-run MCMC output and
//! the deviance information criterion.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{inverse_gamma_logpdf, mvn_logpdf, QuantileSpec};
use crate::error::{Error, Result};
use crate::model::{
    neg_log_lik_or1, neg_log_lik_or2, CutpointVector, DeltaVector, OrdinalDataset, PriorOr1,
    PriorOr2,
};
use crate::or1::{beta_conditional_or1, mh_log_alpha, Or1Draws, Or1ReducedRun};
use crate::or2::{beta_conditional_or2, sigma_conditional, Or2Draws, Or2ReducedRun};

/// Deviance summary: DIC, effective parameter count, and the deviance at the
/// posterior mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DicBundle {
    pub dic: f64,
    pub pd: f64,
    pub dev_post_mean: f64,
}

/// log(mean(exp(v))) computed stably against the running maximum.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_mean_exp over an empty slice".into()));
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !m.is_finite() {
        return Err(Error::Numeric("non-finite value in log_mean_exp".into()));
    }
    // Kahan summation keeps long averages honest.
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let term = (v - m).exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(m + (sum / values.len() as f64).ln())
}

/// Log marginal likelihood for the free-cut-point model. The cut-point
/// ordinate comes from the acceptance-probability identity (full-run average
/// of alpha times the proposal density over a reduced-run average of alpha);
/// the coefficient ordinate is a reduced-run average of conditional normal
/// densities.
pub fn log_marg_like_or1(
    draws: &Or1Draws,
    reduced: &Or1ReducedRun,
    dataset: &OrdinalDataset,
    prior: &PriorOr1,
) -> Result<f64> {
    let config = &draws.config;
    let spec = QuantileSpec::new(config.p)?;
    let burn = config.burn;
    let g_total = draws.beta.ncols();
    if g_total <= burn {
        return Err(Error::Shape("no post-burn draws available".into()));
    }
    let h_total = reduced.beta.ncols();
    if h_total == 0 {
        return Err(Error::Shape("reduced run holds no draws".into()));
    }

    let delta_star = reduced.delta_star.clone();
    let beta_star = post_mean_columns(&draws.beta, burn);
    let proposal_cov = &draws.dhat * (config.tune * config.tune);

    // numerator: mean over full-run posterior draws of alpha * q
    let mut num_terms = Vec::with_capacity(g_total - burn);
    for g in burn..g_total {
        let beta_g: DVector<f64> = draws.beta.column(g).into();
        let delta_g = DeltaVector::new(draws.delta.column(g).into())?;
        let la = mh_log_alpha(dataset, &beta_g, &delta_g, &delta_star, prior, config.p)?;
        let lq = mvn_logpdf(delta_star.as_vector(), delta_g.as_vector(), &proposal_cov)?;
        num_terms.push(la + lq);
    }

    // denominator: mean over reduced-run draws of alpha from delta_star to a
    // fresh proposal
    let mut den_terms = Vec::with_capacity(h_total);
    for h in 0..h_total {
        let beta_h: DVector<f64> = reduced.beta.column(h).into();
        let delta_h = DeltaVector::new(reduced.delta.column(h).into())?;
        den_terms.push(mh_log_alpha(dataset, &beta_h, &delta_star, &delta_h, prior, config.p)?);
    }
    let log_post_delta = log_mean_exp(&num_terms)? - log_mean_exp(&den_terms)?;

    // coefficient ordinate from the reduced run
    let mut beta_terms = Vec::with_capacity(h_total);
    for h in 0..h_total {
        let z_h: DVector<f64> = reduced.z.column(h).into();
        let w_h: DVector<f64> = reduced.w.column(h).into();
        let (mean, cov) = beta_conditional_or1(&z_h, &w_h, dataset, prior, &spec)?;
        beta_terms.push(mvn_logpdf(&beta_star, &mean, &cov)?);
    }
    let log_post_beta = log_mean_exp(&beta_terms)?;

    let (_, nll_star) = neg_log_lik_or1(dataset, &beta_star, &delta_star, config.p)?;
    let log_prior_beta = mvn_logpdf(&beta_star, &prior.beta_mean, &prior.beta_cov)?;
    let log_prior_delta =
        mvn_logpdf(delta_star.as_vector(), &prior.delta_mean, &prior.delta_cov)?;

    Ok(-nll_star + log_prior_beta + log_prior_delta - log_post_beta - log_post_delta)
}

/// Log marginal likelihood for the fixed-cut-point model: coefficient
/// ordinate from the full run, scale ordinate from the reduced run with the
/// coefficients pinned.
pub fn log_marg_like_or2(
    draws: &Or2Draws,
    reduced: &Or2ReducedRun,
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    sigma_star: f64,
) -> Result<f64> {
    let config = &draws.config;
    let spec = QuantileSpec::new(config.p)?;
    let burn = config.burn;
    let g_total = draws.beta.ncols();
    if g_total <= burn {
        return Err(Error::Shape("no post-burn draws available".into()));
    }
    let h_total = reduced.sigma.len();
    if h_total == 0 {
        return Err(Error::Shape("reduced run holds no draws".into()));
    }
    if !(sigma_star > 0.0 && sigma_star.is_finite()) {
        return Err(Error::Domain(format!("sigma_star must be positive, got {sigma_star}")));
    }
    let beta_star = reduced.beta_star.clone();

    let mut beta_terms = Vec::with_capacity(g_total - burn);
    for g in burn..g_total {
        let z_g: DVector<f64> = draws.z.column(g).into();
        let nu_g: DVector<f64> = draws.nu.column(g).into();
        let (mean, cov) =
            beta_conditional_or2(&z_g, draws.sigma[g], &nu_g, dataset, prior, &spec)?;
        beta_terms.push(mvn_logpdf(&beta_star, &mean, &cov)?);
    }
    let log_post_beta = log_mean_exp(&beta_terms)?;

    let mut sigma_terms = Vec::with_capacity(h_total);
    for h in 0..h_total {
        let z_h: DVector<f64> = reduced.z.column(h).into();
        let nu_h: DVector<f64> = reduced.nu.column(h).into();
        let (shape, scale) = sigma_conditional(&z_h, &beta_star, &nu_h, dataset, prior, &spec)?;
        sigma_terms.push(inverse_gamma_logpdf(sigma_star, shape, scale)?);
    }
    let log_post_sigma = log_mean_exp(&sigma_terms)?;

    let (_, nll_star) = neg_log_lik_or2(dataset, &beta_star, sigma_star, &draws.gamma, config.p)?;
    let log_prior_beta = mvn_logpdf(&beta_star, &prior.beta_mean, &prior.beta_cov)?;
    let log_prior_sigma =
        inverse_gamma_logpdf(sigma_star, prior.sigma_shape / 2.0, prior.sigma_scale / 2.0)?;

    Ok(-nll_star + log_prior_beta + log_prior_sigma - log_post_beta - log_post_sigma)
}

/// DIC for the free-cut-point model: deviance is twice the negative log
/// working likelihood, the effective parameter count is the mean deviance
/// minus the deviance at the posterior mean, and DIC adds the penalty twice.
#[allow(clippy::too_many_arguments)]
pub fn deviance_or1(
    dataset: &OrdinalDataset,
    beta_draws: &DMatrix<f64>,
    delta_draws: &DMatrix<f64>,
    post_mean_beta: &DVector<f64>,
    post_mean_delta: &DVector<f64>,
    burn: usize,
    mcmc: usize,
    p: f64,
) -> Result<DicBundle> {
    let total = burn + mcmc;
    if beta_draws.ncols() != total || delta_draws.ncols() != total {
        return Err(Error::Shape("draw matrices do not match burn + mcmc columns".into()));
    }
    let delta_bar = DeltaVector::new(post_mean_delta.clone())?;
    let (_, nll_bar) = neg_log_lik_or1(dataset, post_mean_beta, &delta_bar, p)?;
    let mut mean_dev = 0.0;
    for g in burn..total {
        let beta_g: DVector<f64> = beta_draws.column(g).into();
        let delta_g = DeltaVector::new(delta_draws.column(g).into())?;
        let (_, nll_g) = neg_log_lik_or1(dataset, &beta_g, &delta_g, p)?;
        mean_dev += 2.0 * nll_g;
    }
    mean_dev /= mcmc as f64;
    Ok(bundle_from(mean_dev, 2.0 * nll_bar))
}

/// DIC for the fixed-cut-point model.
#[allow(clippy::too_many_arguments)]
pub fn deviance_or2(
    dataset: &OrdinalDataset,
    beta_draws: &DMatrix<f64>,
    sigma_draws: &DVector<f64>,
    post_mean_beta: &DVector<f64>,
    post_mean_sigma: f64,
    gamma: &CutpointVector,
    burn: usize,
    mcmc: usize,
    p: f64,
) -> Result<DicBundle> {
    let total = burn + mcmc;
    if beta_draws.ncols() != total || sigma_draws.len() != total {
        return Err(Error::Shape("draw matrices do not match burn + mcmc columns".into()));
    }
    let (_, nll_bar) = neg_log_lik_or2(dataset, post_mean_beta, post_mean_sigma, gamma, p)?;
    let mut mean_dev = 0.0;
    for g in burn..total {
        let beta_g: DVector<f64> = beta_draws.column(g).into();
        let (_, nll_g) = neg_log_lik_or2(dataset, &beta_g, sigma_draws[g], gamma, p)?;
        mean_dev += 2.0 * nll_g;
    }
    mean_dev /= mcmc as f64;
    Ok(bundle_from(mean_dev, 2.0 * nll_bar))
}

fn bundle_from(mean_dev: f64, dev_post_mean: f64) -> DicBundle {
    let pd = mean_dev - dev_post_mean;
    DicBundle { dic: dev_post_mean + 2.0 * pd, pd, dev_post_mean }
}

fn post_mean_columns(draws: &DMatrix<f64>, burn: usize) -> DVector<f64> {
    let kept = draws.ncols() - burn;
    let mut mean = DVector::zeros(draws.nrows());
    for c in burn..draws.ncols() {
        mean += draws.column(c);
    }
    mean / kept as f64
}
