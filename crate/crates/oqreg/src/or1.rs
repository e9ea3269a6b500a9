//! MCMC estimator for ordinal quantile models with J >= 3 outcomes and free
//! cut-points: Gibbs updates for the coefficients and latent variables plus a
//! random-walk Metropolis-Hastings step for the transformed cut-points.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::diagnostics::{self, ParamStats};
use crate::distributions::{
    mvn_logpdf, sample_gig_half, sample_mvn, sample_truncated_normal, QuantileSpec, RngStream,
};
use crate::error::{Error, Result};
use crate::evidence::{self, DicBundle};
use crate::model::{
    delta_to_gamma, neg_log_lik_or1, CutpointVector, DeltaVector, OrdinalDataset, PriorOr1,
};
use crate::optim;

/// Sampler configuration for the free-cut-point model.
#[derive(Debug, Clone, PartialEq)]
pub struct Or1Config {
    pub burn: usize,
    pub mcmc: usize,
    pub p: f64,
    /// Step scale multiplier for the MH proposal covariance.
    pub tune: f64,
    pub seed: u64,
}

impl Or1Config {
    pub fn validate(&self) -> Result<()> {
        if self.mcmc < 100 {
            return Err(Error::Domain(format!("mcmc must be >= 100, got {}", self.mcmc)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Domain(format!("quantile p must be in (0,1), got {}", self.p)));
        }
        if !(self.tune > 0.0 && self.tune.is_finite()) {
            return Err(Error::Domain(format!("tune must be positive, got {}", self.tune)));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn + self.mcmc
    }
}

/// Raw draw matrices including burn-in columns; summaries use the post-burn
/// block only.
#[derive(Debug, Clone)]
pub struct Or1Draws {
    /// k x (burn+mcmc)
    pub beta: DMatrix<f64>,
    /// (J-2) x (burn+mcmc)
    pub delta: DMatrix<f64>,
    pub accept_count: usize,
    /// Proposal scale matrix for the MH step (negative inverse Hessian).
    pub dhat: DMatrix<f64>,
    pub config: Or1Config,
}

/// Draws from the reduced run with the cut-points pinned at their posterior
/// mean; retains what the marginal-likelihood estimator needs.
#[derive(Debug, Clone)]
pub struct Or1ReducedRun {
    /// k x H
    pub beta: DMatrix<f64>,
    /// (J-2) x H, proposal draws around the pinned delta
    pub delta: DMatrix<f64>,
    /// n x H latent mixture weights
    pub w: DMatrix<f64>,
    /// n x H latent utilities
    pub z: DMatrix<f64>,
    pub delta_star: DeltaVector,
}

/// Completed fit: draws, posterior summaries, MH acceptance rate, log
/// marginal likelihood, and the DIC bundle.
#[derive(Debug, Clone)]
pub struct Or1Fit {
    pub draws: Or1Draws,
    pub param_names: Vec<String>,
    pub summary: Vec<ParamStats>,
    pub post_mean_beta: DVector<f64>,
    pub post_std_beta: DVector<f64>,
    pub post_mean_delta: DVector<f64>,
    pub post_std_delta: DVector<f64>,
    /// Percent of proposals accepted over all sweeps.
    pub acceptance_rate: f64,
    pub log_marg_like: f64,
    pub dic: DicBundle,
    /// True when the proposal-scale optimization had to fall back.
    pub dhat_fallback: bool,
}

/// Output of the proposal-scale computation.
pub struct DhatResult {
    pub dhat: DMatrix<f64>,
    /// Maximizer of the profile log-likelihood over delta.
    pub delta_max: DeltaVector,
    pub converged: bool,
    pub fallback: bool,
}

const DHAT_EIGEN_FLOOR: f64 = 1e-6;
const DHAT_FALLBACK_SCALE: f64 = 0.1;
const HESSIAN_STEP: f64 = 1e-4;

/// Maximizes the log-likelihood over delta at a reference beta and returns
/// the inverse of the negative Hessian at the maximizer, symmetrized and
/// eigenvalue-floored to stay SPD.
pub fn compute_dhat(
    dataset: &OrdinalDataset,
    p: f64,
    beta_ref: &DVector<f64>,
    delta_init: &DeltaVector,
) -> Result<DhatResult> {
    let d = dataset.num_outcomes() - 2;
    if delta_init.len() != d {
        return Err(Error::Shape(format!(
            "delta_init has length {}, expected {d}",
            delta_init.len()
        )));
    }
    let nll = |dv: &DVector<f64>| -> f64 {
        if dv.iter().any(|v| !v.is_finite()) {
            return f64::MAX / 4.0;
        }
        match DeltaVector::new(dv.clone())
            .and_then(|delta| neg_log_lik_or1(dataset, beta_ref, &delta, p))
        {
            Ok((_, total)) => total,
            Err(_) => f64::MAX / 4.0,
        }
    };
    let res = optim::nelder_mead(nll, delta_init.as_vector(), 0.25, 1e-6, 500 * d.max(1));
    let delta_max = DeltaVector::new(res.x.clone())?;

    // The Hessian of the negative log-likelihood equals the negative Hessian
    // of the log-likelihood.
    let neg_hess = optim::central_hessian(nll, &res.x, HESSIAN_STEP);
    let fallback_dhat = DMatrix::identity(d, d) * DHAT_FALLBACK_SCALE;
    if neg_hess.iter().any(|v| !v.is_finite()) {
        return Ok(DhatResult { dhat: fallback_dhat, delta_max, converged: res.converged, fallback: true });
    }
    let sym = (&neg_hess + neg_hess.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max_ev = eig.eigenvalues.max();
    if !(max_ev > 0.0 && max_ev.is_finite()) {
        return Ok(DhatResult { dhat: fallback_dhat, delta_max, converged: res.converged, fallback: true });
    }
    let floor = DHAT_EIGEN_FLOOR * max_ev;
    let inv_ev = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&v| 1.0 / v.max(floor)));
    let dhat = &eig.eigenvectors * DMatrix::from_diagonal(&inv_ev) * eig.eigenvectors.transpose();
    let dhat = (&dhat + dhat.transpose()) * 0.5;
    Ok(DhatResult { dhat, delta_max, converged: res.converged, fallback: false })
}

/// Mean and covariance of the full conditional for beta given the latent
/// variables: precision B0^-1 + sum x_i x_i' / (tau^2 w_i).
pub fn beta_conditional_or1(
    z: &DVector<f64>,
    w: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr1,
    spec: &QuantileSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, k) = (dataset.n(), dataset.k());
    if z.len() != n || w.len() != n {
        return Err(Error::Shape("latent vectors must have length n".into()));
    }
    let prior_chol = Cholesky::new(prior.beta_cov.clone())
        .ok_or_else(|| Error::NotSpd("beta prior covariance".into()))?;
    let prior_prec = prior_chol.inverse();
    let mut precision = prior_prec.clone();
    let mut rhs = &prior_prec * &prior.beta_mean;
    let tau_sq = spec.tau_sq();
    for i in 0..n {
        if w[i] <= 0.0 {
            return Err(Error::Domain(format!("latent weight w[{i}] must be positive")));
        }
        let xi = dataset.x().row(i).transpose();
        let scale = 1.0 / (tau_sq * w[i]);
        precision.syger(scale, &xi, &xi, 1.0);
        rhs += xi * ((z[i] - spec.theta * w[i]) * scale);
    }
    // syger fills the lower triangle; mirror it.
    for r in 0..k {
        for c in (r + 1)..k {
            precision[(r, c)] = precision[(c, r)];
        }
    }
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::NotSpd("conditional beta precision".into()))?;
    let cov = chol.inverse();
    let mean = &cov * rhs;
    Ok((mean, cov))
}

/// Gibbs update for beta.
pub fn draw_beta_or1(
    z: &DVector<f64>,
    w: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr1,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let (mean, cov) = beta_conditional_or1(z, w, dataset, prior, spec)?;
    sample_mvn(&mean, &cov, rng)
}

/// Element-wise GIG update for the latent mixture weights.
pub fn draw_w(
    z: &DVector<f64>,
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let n = dataset.n();
    let eta = spec.theta * spec.theta / spec.tau_sq() + 2.0;
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let resid = (z[i] - dataset.linear_predictor(i, beta)) / spec.tau;
        w[i] = sample_gig_half(resid * resid, eta, rng)?;
    }
    Ok(w)
}

/// Log acceptance ratio for a cut-point move, marginally of the latent
/// variables; the beta prior cancels analytically and is never evaluated.
pub fn mh_log_alpha(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    delta_from: &DeltaVector,
    delta_to: &DeltaVector,
    prior: &PriorOr1,
    p: f64,
) -> Result<f64> {
    let (_, nll_from) = neg_log_lik_or1(dataset, beta, delta_from, p)?;
    let (_, nll_to) = neg_log_lik_or1(dataset, beta, delta_to, p)?;
    let lp_from = mvn_logpdf(delta_from.as_vector(), &prior.delta_mean, &prior.delta_cov)?;
    let lp_to = mvn_logpdf(delta_to.as_vector(), &prior.delta_mean, &prior.delta_cov)?;
    Ok(((-nll_to + lp_to) - (-nll_from + lp_from)).min(0.0))
}

/// Random-walk MH update for delta with proposal N(delta, tune^2 Dhat).
pub fn draw_delta_mh(
    delta_curr: &DeltaVector,
    beta: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr1,
    tune: f64,
    dhat: &DMatrix<f64>,
    p: f64,
    rng: &mut RngStream,
) -> Result<(DeltaVector, bool)> {
    let proposal_cov = dhat * (tune * tune);
    let prop = sample_mvn(delta_curr.as_vector(), &proposal_cov, rng)?;
    let delta_prop = DeltaVector::new(prop)?;
    let log_alpha = mh_log_alpha(dataset, beta, delta_curr, &delta_prop, prior, p)?;
    let u: f64 = rand::Rng::gen(rng);
    if u.ln() < log_alpha {
        Ok((delta_prop, true))
    } else {
        Ok((delta_curr.clone(), false))
    }
}

/// Element-wise truncated normal update for the latent utilities.
pub fn draw_z_or1(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    gamma: &CutpointVector,
    w: &DVector<f64>,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let n = dataset.n();
    let mut z = DVector::zeros(n);
    for i in 0..n {
        let j = dataset.y()[i];
        let mean = dataset.linear_predictor(i, beta) + spec.theta * w[i];
        let var = spec.tau_sq() * w[i];
        z[i] = sample_truncated_normal(mean, var, gamma.lower(j), gamma.upper(j), rng)?;
    }
    Ok(z)
}

/// Runs the full sampler and attaches summaries, marginal likelihood, and DIC.
pub fn fit_or1(dataset: &OrdinalDataset, prior: &PriorOr1, config: &Or1Config) -> Result<Or1Fit> {
    config.validate()?;
    let (k, j) = (dataset.k(), dataset.num_outcomes());
    let d = j - 2;
    if prior.beta_mean.len() != k {
        return Err(Error::Shape(format!(
            "beta prior has dimension {}, design has {k} columns",
            prior.beta_mean.len()
        )));
    }
    if prior.delta_mean.len() != d {
        return Err(Error::Shape(format!(
            "delta prior has dimension {}, J = {j} requires {d}",
            prior.delta_mean.len()
        )));
    }
    let spec = QuantileSpec::new(config.p)?;
    let mut rng = RngStream::new(config.seed);

    let delta_init = DeltaVector::new(prior.delta_mean.clone())?;
    let dhat_res = compute_dhat(dataset, config.p, &prior.beta_mean, &delta_init)?;
    let dhat = dhat_res.dhat.clone();

    let nsim = config.total_sweeps();
    let mut beta_draws = DMatrix::zeros(k, nsim);
    let mut delta_draws = DMatrix::zeros(d, nsim);
    let mut accept_count = 0usize;

    let mut beta = DVector::zeros(k);
    let mut delta = dhat_res.delta_max.clone();
    let mut gamma = delta_to_gamma(&delta);
    let w0 = DVector::from_element(dataset.n(), 1.0);
    let mut z = draw_z_or1(dataset, &beta, &gamma, &w0, &spec, &mut rng)?;
    let mut w = w0;

    for sweep in 0..nsim {
        beta = draw_beta_or1(&z, &w, dataset, prior, &spec, &mut rng)
            .map_err(|e| Error::Numeric(format!("sweep {sweep}: {e}")))?;
        w = draw_w(&z, dataset, &beta, &spec, &mut rng)?;
        let (next_delta, accepted) =
            draw_delta_mh(&delta, &beta, dataset, prior, config.tune, &dhat, config.p, &mut rng)?;
        delta = next_delta;
        gamma = delta_to_gamma(&delta);
        debug_assert!(gamma.interior().windows(2).all(|p| p[0] < p[1]));
        if accepted {
            accept_count += 1;
        }
        z = draw_z_or1(dataset, &beta, &gamma, &w, &spec, &mut rng)?;
        beta_draws.set_column(sweep, &beta);
        delta_draws.set_column(sweep, delta.as_vector());
    }

    let draws = Or1Draws {
        beta: beta_draws,
        delta: delta_draws,
        accept_count,
        dhat,
        config: config.clone(),
    };

    let beta_stats = diagnostics::summarize(&draws.beta, config.burn)?;
    let delta_stats = diagnostics::summarize(&draws.delta, config.burn)?;
    let post_mean_beta = DVector::from_iterator(k, beta_stats.iter().map(|s| s.mean));
    let post_std_beta = DVector::from_iterator(k, beta_stats.iter().map(|s| s.sd));
    let post_mean_delta = DVector::from_iterator(d, delta_stats.iter().map(|s| s.mean));
    let post_std_delta = DVector::from_iterator(d, delta_stats.iter().map(|s| s.sd));

    let delta_star = DeltaVector::new(post_mean_delta.clone())?;
    let reduced = reduced_run_or1(dataset, prior, config, &delta_star, &draws.dhat, &mut rng)?;
    let log_marg_like = evidence::log_marg_like_or1(&draws, &reduced, dataset, prior)?;
    let dic = evidence::deviance_or1(
        dataset,
        &draws.beta,
        &draws.delta,
        &post_mean_beta,
        &post_mean_delta,
        config.burn,
        config.mcmc,
        config.p,
    )?;

    let mut param_names: Vec<String> = dataset.covariate_names().to_vec();
    for i in 1..=d {
        param_names.push(format!("delta_{i}"));
    }
    let mut summary = beta_stats;
    summary.extend(delta_stats);

    Ok(Or1Fit {
        acceptance_rate: 100.0 * accept_count as f64 / nsim as f64,
        draws,
        param_names,
        summary,
        post_mean_beta,
        post_std_beta,
        post_mean_delta,
        post_std_delta,
        log_marg_like,
        dic,
        dhat_fallback: dhat_res.fallback,
    })
}

/// Reduced run with delta pinned at `delta_star`: a fresh burn of the same
/// length, then `mcmc` retained sweeps of (beta, w, z), each augmented with a
/// proposal draw delta ~ N(delta_star, tune^2 Dhat).
pub fn reduced_run_or1(
    dataset: &OrdinalDataset,
    prior: &PriorOr1,
    config: &Or1Config,
    delta_star: &DeltaVector,
    dhat: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<Or1ReducedRun> {
    config.validate()?;
    if delta_star.len() != dataset.num_outcomes() - 2 {
        return Err(Error::Shape("delta_star length does not match J".into()));
    }
    let spec = QuantileSpec::new(config.p)?;
    let gamma = delta_to_gamma(delta_star);
    let (n, k, d) = (dataset.n(), dataset.k(), delta_star.len());
    let h = config.mcmc;

    let mut beta_draws = DMatrix::zeros(k, h);
    let mut delta_draws = DMatrix::zeros(d, h);
    let mut w_draws = DMatrix::zeros(n, h);
    let mut z_draws = DMatrix::zeros(n, h);

    let proposal_cov = dhat * (config.tune * config.tune);
    let mut beta = DVector::zeros(k);
    let w0 = DVector::from_element(n, 1.0);
    let mut z = draw_z_or1(dataset, &beta, &gamma, &w0, &spec, rng)?;
    let mut w = w0;

    for sweep in 0..(config.burn + h) {
        beta = draw_beta_or1(&z, &w, dataset, prior, &spec, rng)?;
        w = draw_w(&z, dataset, &beta, &spec, rng)?;
        z = draw_z_or1(dataset, &beta, &gamma, &w, &spec, rng)?;
        if sweep >= config.burn {
            let col = sweep - config.burn;
            let delta_h = sample_mvn(delta_star.as_vector(), &proposal_cov, rng)?;
            beta_draws.set_column(col, &beta);
            delta_draws.set_column(col, &delta_h);
            w_draws.set_column(col, &w);
            z_draws.set_column(col, &z);
        }
    }
    Ok(Or1ReducedRun {
        beta: beta_draws,
        delta: delta_draws,
        w: w_draws,
        z: z_draws,
        delta_star: delta_star.clone(),
    })
}
