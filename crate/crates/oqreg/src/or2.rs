//! Gibbs sampler for three-category ordinal quantile models with fixed
//! cut-points and a free scale parameter. The scale absorbs the location
//! restriction that free cut-points would otherwise provide, so no
//! Metropolis-Hastings step is needed.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::diagnostics::{self, ParamStats};
use crate::distributions::{
    sample_gig_half, sample_inverse_gamma, sample_mvn, sample_truncated_normal, QuantileSpec,
    RngStream,
};
use crate::error::{Error, Result};
use crate::evidence::{self, DicBundle};
use crate::model::{CutpointVector, OrdinalDataset, PriorOr2};

/// Sampler configuration for the fixed-cut-point model.
#[derive(Debug, Clone, PartialEq)]
pub struct Or2Config {
    pub burn: usize,
    pub mcmc: usize,
    pub p: f64,
    /// The single free interior cut-point gamma_2 (gamma_1 is pinned at 0).
    pub gamma2: f64,
    pub seed: u64,
}

impl Or2Config {
    pub fn validate(&self) -> Result<()> {
        if self.mcmc < 100 {
            return Err(Error::Domain(format!("mcmc must be >= 100, got {}", self.mcmc)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Domain(format!("quantile p must be in (0,1), got {}", self.p)));
        }
        if !(self.gamma2 > 0.0 && self.gamma2.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma2 must be positive (gamma_1 is fixed at 0), got {}",
                self.gamma2
            )));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn + self.mcmc
    }

    pub fn cutpoints(&self) -> Result<CutpointVector> {
        self.validate()?;
        CutpointVector::new(vec![0.0, self.gamma2])
    }
}

/// Raw draw matrices including burn-in columns. The latent matrices are kept
/// because the marginal-likelihood estimator re-evaluates the beta
/// conditional at each retained sweep.
#[derive(Debug, Clone)]
pub struct Or2Draws {
    /// k x (burn+mcmc)
    pub beta: DMatrix<f64>,
    /// burn+mcmc scale draws
    pub sigma: DVector<f64>,
    /// n x (burn+mcmc) latent mixture terms nu = sigma * w
    pub nu: DMatrix<f64>,
    /// n x (burn+mcmc) latent utilities
    pub z: DMatrix<f64>,
    pub gamma: CutpointVector,
    pub config: Or2Config,
}

/// Reduced-run draws with beta pinned at its posterior mean.
#[derive(Debug, Clone)]
pub struct Or2ReducedRun {
    /// H scale draws
    pub sigma: DVector<f64>,
    /// n x H
    pub nu: DMatrix<f64>,
    /// n x H
    pub z: DMatrix<f64>,
    pub beta_star: DVector<f64>,
}

/// Completed fit with posterior summaries, log marginal likelihood, and DIC.
#[derive(Debug, Clone)]
pub struct Or2Fit {
    pub draws: Or2Draws,
    pub param_names: Vec<String>,
    pub summary: Vec<ParamStats>,
    pub post_mean_beta: DVector<f64>,
    pub post_std_beta: DVector<f64>,
    pub post_mean_sigma: f64,
    pub post_std_sigma: f64,
    pub log_marg_like: f64,
    pub dic: DicBundle,
}

/// Mean and covariance of the full conditional for beta given (z, sigma, nu):
/// precision B0^-1 + sum x_i x_i' / (tau^2 sigma nu_i).
pub fn beta_conditional_or2(
    z: &DVector<f64>,
    sigma: f64,
    nu: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    spec: &QuantileSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, k) = (dataset.n(), dataset.k());
    if z.len() != n || nu.len() != n {
        return Err(Error::Shape("latent vectors must have length n".into()));
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let prior_chol = Cholesky::new(prior.beta_cov.clone())
        .ok_or_else(|| Error::NotSpd("beta prior covariance".into()))?;
    let prior_prec = prior_chol.inverse();
    let mut precision = prior_prec.clone();
    let mut rhs = &prior_prec * &prior.beta_mean;
    let tau_sq = spec.tau_sq();
    for i in 0..n {
        if nu[i] <= 0.0 {
            return Err(Error::Domain(format!("latent nu[{i}] must be positive")));
        }
        let xi = dataset.x().row(i).transpose();
        let scale = 1.0 / (tau_sq * sigma * nu[i]);
        precision.syger(scale, &xi, &xi, 1.0);
        rhs += xi * ((z[i] - spec.theta * nu[i]) * scale);
    }
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
pub fn draw_beta_or2(
    z: &DVector<f64>,
    sigma: f64,
    nu: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let (mean, cov) = beta_conditional_or2(z, sigma, nu, dataset, prior, spec)?;
    sample_mvn(&mean, &cov, rng)
}

/// Posterior shape and scale of the inverse gamma conditional for sigma:
/// shape (n0 + 3n)/2, scale (sum (z - x'beta - theta nu)^2 / (tau^2 nu)
/// + d0 + 2 sum nu) / 2.
pub fn sigma_conditional(
    z: &DVector<f64>,
    beta: &DVector<f64>,
    nu: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    spec: &QuantileSpec,
) -> Result<(f64, f64)> {
    let n = dataset.n();
    if z.len() != n || nu.len() != n {
        return Err(Error::Shape("latent vectors must have length n".into()));
    }
    let shape_times_two = prior.sigma_shape + 3.0 * n as f64;
    let mut scale_times_two = prior.sigma_scale;
    let tau_sq = spec.tau_sq();
    for i in 0..n {
        if nu[i] <= 0.0 {
            return Err(Error::Domain(format!("latent nu[{i}] must be positive")));
        }
        let resid = z[i] - dataset.linear_predictor(i, beta) - spec.theta * nu[i];
        scale_times_two += resid * resid / (tau_sq * nu[i]) + 2.0 * nu[i];
    }
    Ok((shape_times_two / 2.0, scale_times_two / 2.0))
}

/// Gibbs update for the scale.
pub fn draw_sigma(
    z: &DVector<f64>,
    beta: &DVector<f64>,
    nu: &DVector<f64>,
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<f64> {
    let (shape, scale) = sigma_conditional(z, beta, nu, dataset, prior, spec)?;
    sample_inverse_gamma(shape, scale, rng)
}

/// Element-wise GIG update for the latent mixture terms nu.
pub fn draw_nu(
    z: &DVector<f64>,
    beta: &DVector<f64>,
    sigma: f64,
    dataset: &OrdinalDataset,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let n = dataset.n();
    let tau_sq = spec.tau_sq();
    let eta = spec.theta * spec.theta / (tau_sq * sigma) + 2.0 / sigma;
    let mut nu = DVector::zeros(n);
    for i in 0..n {
        let resid = z[i] - dataset.linear_predictor(i, beta);
        let lambda = resid * resid / (tau_sq * sigma);
        nu[i] = sample_gig_half(lambda, eta, rng)?;
    }
    Ok(nu)
}

/// Element-wise truncated normal update for the latent utilities.
pub fn draw_z_or2(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    sigma: f64,
    nu: &DVector<f64>,
    gamma: &CutpointVector,
    spec: &QuantileSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let n = dataset.n();
    let mut z = DVector::zeros(n);
    for i in 0..n {
        let j = dataset.y()[i];
        let mean = dataset.linear_predictor(i, beta) + spec.theta * nu[i];
        let var = spec.tau_sq() * sigma * nu[i];
        z[i] = sample_truncated_normal(mean, var, gamma.lower(j), gamma.upper(j), rng)?;
    }
    Ok(z)
}

/// Runs the sampler and attaches summaries, marginal likelihood, and DIC.
/// Requires exactly three outcome categories.
pub fn fit_or2(dataset: &OrdinalDataset, prior: &PriorOr2, config: &Or2Config) -> Result<Or2Fit> {
    config.validate()?;
    if dataset.num_outcomes() != 3 {
        return Err(Error::ModelMismatch(format!(
            "fixed-cut-point model requires exactly 3 outcome categories, data has {}",
            dataset.num_outcomes()
        )));
    }
    let k = dataset.k();
    if prior.beta_mean.len() != k {
        return Err(Error::Shape(format!(
            "beta prior has dimension {}, design has {k} columns",
            prior.beta_mean.len()
        )));
    }
    let spec = QuantileSpec::new(config.p)?;
    let gamma = config.cutpoints()?;
    let mut rng = RngStream::new(config.seed);

    let n = dataset.n();
    let nsim = config.total_sweeps();
    let mut beta_draws = DMatrix::zeros(k, nsim);
    let mut sigma_draws = DVector::zeros(nsim);
    let mut nu_draws = DMatrix::zeros(n, nsim);
    let mut z_draws = DMatrix::zeros(n, nsim);

    let mut beta = DVector::zeros(k);
    let mut sigma = 1.0;
    let mut nu = DVector::from_element(n, 1.0);
    let mut z = draw_z_or2(dataset, &beta, sigma, &nu, &gamma, &spec, &mut rng)?;

    for sweep in 0..nsim {
        beta = draw_beta_or2(&z, sigma, &nu, dataset, prior, &spec, &mut rng)
            .map_err(|e| Error::Numeric(format!("sweep {sweep}: {e}")))?;
        sigma = draw_sigma(&z, &beta, &nu, dataset, prior, &spec, &mut rng)?;
        nu = draw_nu(&z, &beta, sigma, dataset, &spec, &mut rng)?;
        z = draw_z_or2(dataset, &beta, sigma, &nu, &gamma, &spec, &mut rng)?;
        beta_draws.set_column(sweep, &beta);
        sigma_draws[sweep] = sigma;
        nu_draws.set_column(sweep, &nu);
        z_draws.set_column(sweep, &z);
    }

    let draws = Or2Draws {
        beta: beta_draws,
        sigma: sigma_draws,
        nu: nu_draws,
        z: z_draws,
        gamma,
        config: config.clone(),
    };

    let beta_stats = diagnostics::summarize(&draws.beta, config.burn)?;
    let sigma_mat = DMatrix::from_row_slice(1, nsim, draws.sigma.as_slice());
    let sigma_stats = diagnostics::summarize(&sigma_mat, config.burn)?;
    let post_mean_beta = DVector::from_iterator(k, beta_stats.iter().map(|s| s.mean));
    let post_std_beta = DVector::from_iterator(k, beta_stats.iter().map(|s| s.sd));
    let post_mean_sigma = sigma_stats[0].mean;
    let post_std_sigma = sigma_stats[0].sd;

    let reduced = reduced_run_or2(dataset, prior, config, &post_mean_beta, &mut rng)?;
    let log_marg_like =
        evidence::log_marg_like_or2(&draws, &reduced, dataset, prior, post_mean_sigma)?;
    let dic = evidence::deviance_or2(
        dataset,
        &draws.beta,
        &draws.sigma,
        &post_mean_beta,
        post_mean_sigma,
        &draws.gamma,
        config.burn,
        config.mcmc,
        config.p,
    )?;

    let mut param_names: Vec<String> = dataset.covariate_names().to_vec();
    param_names.push("sigma".into());
    let mut summary = beta_stats;
    summary.extend(sigma_stats);

    Ok(Or2Fit {
        draws,
        param_names,
        summary,
        post_mean_beta,
        post_std_beta,
        post_mean_sigma,
        post_std_sigma,
        log_marg_like,
        dic,
    })
}

/// Reduced run with beta pinned at `beta_star`: a fresh burn of the same
/// length, then `mcmc` retained sweeps of (sigma, nu, z).
pub fn reduced_run_or2(
    dataset: &OrdinalDataset,
    prior: &PriorOr2,
    config: &Or2Config,
    beta_star: &DVector<f64>,
    rng: &mut RngStream,
) -> Result<Or2ReducedRun> {
    config.validate()?;
    if beta_star.len() != dataset.k() {
        return Err(Error::Shape("beta_star length does not match design columns".into()));
    }
    let spec = QuantileSpec::new(config.p)?;
    let gamma = config.cutpoints()?;
    let n = dataset.n();
    let h = config.mcmc;

    let mut sigma_draws = DVector::zeros(h);
    let mut nu_draws = DMatrix::zeros(n, h);
    let mut z_draws = DMatrix::zeros(n, h);

    let mut sigma = 1.0;
    let mut nu = DVector::from_element(n, 1.0);
    let mut z = draw_z_or2(dataset, beta_star, sigma, &nu, &gamma, &spec, rng)?;

    for sweep in 0..(config.burn + h) {
        sigma = draw_sigma(&z, beta_star, &nu, dataset, prior, &spec, rng)?;
        nu = draw_nu(&z, beta_star, sigma, dataset, &spec, rng)?;
        z = draw_z_or2(dataset, beta_star, sigma, &nu, &gamma, &spec, rng)?;
        if sweep >= config.burn {
            let col = sweep - config.burn;
            sigma_draws[col] = sigma;
            nu_draws.set_column(col, &nu);
            z_draws.set_column(col, &z);
        }
    }
    Ok(Or2ReducedRun {
        sigma: sigma_draws,
        nu: nu_draws,
        z: z_draws,
        beta_star: beta_star.clone(),
    })
}
