//! Data containers, cut-point transforms, outcome probabilities, and
//! log-likelihoods shared by both model classes.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::distributions::al_cdf;
use crate::error::{Error, Result};

// Outcome probabilities are floored before taking logs so that far-tail
// observations under extreme proposals cannot inject -inf into MH ratios.
pub const PROB_FLOOR: f64 = 1e-300;

/// Ordinal dataset: response codes 1..J and an n x k design matrix.
#[derive(Debug, Clone)]
pub struct OrdinalDataset {
    y: Vec<usize>,
    x: DMatrix<f64>,
    covariate_names: Vec<String>,
}

impl OrdinalDataset {
    /// Validates codes, category coverage, and the rank of the design matrix.
    pub fn new(y: Vec<usize>, x: DMatrix<f64>, covariate_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no observations".into()));
        }
        if x.nrows() != n {
            return Err(Error::Shape(format!(
                "design matrix has {} rows but y has {n} entries",
                x.nrows()
            )));
        }
        let k = x.ncols();
        if covariate_names.len() != k {
            return Err(Error::Shape(format!(
                "{} covariate names supplied for {k} columns",
                covariate_names.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design matrix contains non-finite values".into()));
        }
        let j = *y.iter().max().unwrap();
        if j < 3 {
            return Err(Error::InvalidData(format!(
                "ordinal models require at least 3 outcome categories, found {j}"
            )));
        }
        if let Some(pos) = y.iter().position(|&c| c == 0) {
            return Err(Error::InvalidData(format!(
                "outcome code 0 at row {pos}; codes must lie in 1..={j}"
            )));
        }
        for cat in 1..=j {
            if !y.iter().any(|&c| c == cat) {
                return Err(Error::InvalidData(format!(
                    "outcome category {cat} never occurs; codes must cover 1..={j}"
                )));
            }
        }
        // rank-revealing check
        let svd = x.clone().svd(false, false);
        let max_sv = svd.singular_values.max();
        let tol = max_sv * (n.max(k) as f64) * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < k {
            return Err(Error::InvalidData(format!(
                "design matrix is rank deficient (rank {rank} < {k} columns)"
            )));
        }
        Ok(Self { y, x, covariate_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Number of outcome categories.
    pub fn num_outcomes(&self) -> usize {
        *self.y.iter().max().unwrap()
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// x_i' beta for row i.
    pub fn linear_predictor(&self, i: usize, beta: &DVector<f64>) -> f64 {
        self.x.row(i).transpose().dot(beta)
    }
}

/// Ordered cut-points gamma_0 = -inf < gamma_1 = 0 < ... < gamma_{J-1} < gamma_J = +inf.
/// Only the finite entries gamma_1..gamma_{J-1} are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointVector {
    interior: Vec<f64>,
}

impl CutpointVector {
    /// `interior` is (gamma_1, ..., gamma_{J-1}); gamma_1 must be 0 and the
    /// sequence strictly increasing.
    pub fn new(interior: Vec<f64>) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::Domain("cut-point vector needs at least gamma_1".into()));
        }
        if interior[0] != 0.0 {
            return Err(Error::Domain(format!(
                "gamma_1 must be 0 (location anchor), got {}",
                interior[0]
            )));
        }
        for w in interior.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Domain(format!(
                    "cut-points must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if interior.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("interior cut-points must be finite".into()));
        }
        Ok(Self { interior })
    }

    /// Number of categories J implied by this vector.
    pub fn num_outcomes(&self) -> usize {
        self.interior.len() + 1
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// Lower bound of the latent interval for category j (1-based).
    pub fn lower(&self, j: usize) -> f64 {
        if j <= 1 {
            f64::NEG_INFINITY
        } else {
            self.interior[j - 2]
        }
    }

    /// Upper bound of the latent interval for category j (1-based).
    pub fn upper(&self, j: usize) -> f64 {
        if j >= self.num_outcomes() {
            f64::INFINITY
        } else {
            self.interior[j - 1]
        }
    }
}

/// Log widths of the cut-point bins: delta_j = ln(gamma_j - gamma_{j-1}),
/// j = 2..J-1. Unconstrained image of the ordered interior cut-points.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector(pub DVector<f64>);

impl DeltaVector {
    pub fn new(delta: DVector<f64>) -> Result<Self> {
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Domain("delta entries must be finite".into()));
        }
        Ok(Self(delta))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// gamma_1 = 0, gamma_j = gamma_{j-1} + exp(delta_j) for 2 <= j <= J-1.
pub fn delta_to_gamma(delta: &DeltaVector) -> CutpointVector {
    let mut interior = Vec::with_capacity(delta.len() + 1);
    interior.push(0.0);
    let mut g = 0.0;
    for d in delta.0.iter() {
        g += d.exp();
        interior.push(g);
    }
    CutpointVector { interior }
}

/// Inverse of [`delta_to_gamma`]: delta_j = ln(gamma_j - gamma_{j-1}).
pub fn gamma_to_delta(gamma: &CutpointVector) -> Result<DeltaVector> {
    let interior = gamma.interior();
    let mut delta = Vec::with_capacity(interior.len().saturating_sub(1));
    for w in interior.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(Error::Domain("cut-points must be strictly increasing".into()));
        }
        delta.push(gap.ln());
    }
    Ok(DeltaVector(DVector::from_vec(delta)))
}

/// Category probabilities under the free-cut-point model: component j is
/// F_AL(gamma_j - x'beta; p) - F_AL(gamma_{j-1} - x'beta; p).
pub fn outcome_probs_or1(
    x: &DVector<f64>,
    beta: &DVector<f64>,
    gamma: &CutpointVector,
    p: f64,
) -> Result<Vec<f64>> {
    if x.len() != beta.len() {
        return Err(Error::Shape(format!(
            "x has length {} but beta has length {}",
            x.len(),
            beta.len()
        )));
    }
    let xb = x.dot(beta);
    cdf_differences(xb, 1.0, gamma, p)
}

/// Category probabilities under the fixed-cut-point, free-scale model.
pub fn outcome_probs_or2(
    x: &DVector<f64>,
    beta: &DVector<f64>,
    sigma: f64,
    gamma_fixed: &CutpointVector,
    p: f64,
) -> Result<Vec<f64>> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if x.len() != beta.len() {
        return Err(Error::Shape("x and beta lengths differ".into()));
    }
    let xb = x.dot(beta);
    cdf_differences(xb, sigma, gamma_fixed, p)
}

fn cdf_differences(xb: f64, sigma: f64, gamma: &CutpointVector, p: f64) -> Result<Vec<f64>> {
    let j_max = gamma.num_outcomes();
    let mut cdf = Vec::with_capacity(j_max + 1);
    cdf.push(0.0);
    for g in gamma.interior() {
        cdf.push(al_cdf((g - xb) / sigma, 0.0, 1.0, p)?);
    }
    cdf.push(1.0);
    Ok(cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

/// Per-observation and total negative log-likelihood of the free-cut-point
/// model, with probabilities floored at [`PROB_FLOOR`].
pub fn neg_log_lik_or1(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    delta: &DeltaVector,
    p: f64,
) -> Result<(DVector<f64>, f64)> {
    if beta.len() != dataset.k() {
        return Err(Error::Shape(format!(
            "beta has length {} but design has {} columns",
            beta.len(),
            dataset.k()
        )));
    }
    if delta.len() != dataset.num_outcomes() - 2 {
        return Err(Error::Shape(format!(
            "delta has length {} but J = {} requires {}",
            delta.len(),
            dataset.num_outcomes(),
            dataset.num_outcomes() - 2
        )));
    }
    let gamma = delta_to_gamma(delta);
    neg_log_lik_with_gamma(dataset, beta, 1.0, &gamma, p)
}

/// Negative log-likelihood of the fixed-cut-point model with AL scale sigma.
pub fn neg_log_lik_or2(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    sigma: f64,
    gamma_fixed: &CutpointVector,
    p: f64,
) -> Result<(DVector<f64>, f64)> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if beta.len() != dataset.k() {
        return Err(Error::Shape("beta length does not match design columns".into()));
    }
    neg_log_lik_with_gamma(dataset, beta, sigma, gamma_fixed, p)
}

fn neg_log_lik_with_gamma(
    dataset: &OrdinalDataset,
    beta: &DVector<f64>,
    sigma: f64,
    gamma: &CutpointVector,
    p: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = dataset.n();
    let mut per_obs = DVector::zeros(n);
    let mut total = 0.0;
    for i in 0..n {
        let xb = dataset.linear_predictor(i, beta);
        let j = dataset.y()[i];
        let hi = al_cdf((gamma.upper(j) - xb) / sigma, 0.0, 1.0, p)?;
        let lo = al_cdf((gamma.lower(j) - xb) / sigma, 0.0, 1.0, p)?;
        let prob = (hi - lo).max(PROB_FLOOR);
        let nll = -prob.ln();
        per_obs[i] = nll;
        total += nll;
    }
    Ok((per_obs, total))
}

/// Independent normal priors on beta and delta for the free-cut-point model.
#[derive(Debug, Clone)]
pub struct PriorOr1 {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub delta_mean: DVector<f64>,
    pub delta_cov: DMatrix<f64>,
}

impl PriorOr1 {
    pub fn new(
        beta_mean: DVector<f64>,
        beta_cov: DMatrix<f64>,
        delta_mean: DVector<f64>,
        delta_cov: DMatrix<f64>,
    ) -> Result<Self> {
        check_spd(&beta_cov, beta_mean.len(), "beta prior covariance")?;
        check_spd(&delta_cov, delta_mean.len(), "delta prior covariance")?;
        Ok(Self { beta_mean, beta_cov, delta_mean, delta_cov })
    }

    /// Diffuse default: beta ~ N(0, 10 I), delta ~ N(0, 0.25 I).
    pub fn default_for(k: usize, j: usize) -> Self {
        Self {
            beta_mean: DVector::zeros(k),
            beta_cov: DMatrix::identity(k, k) * 10.0,
            delta_mean: DVector::zeros(j - 2),
            delta_cov: DMatrix::identity(j - 2, j - 2) * 0.25,
        }
    }
}

/// Normal prior on beta plus inverse-gamma(shape n0/2, scale d0/2) on sigma.
#[derive(Debug, Clone)]
pub struct PriorOr2 {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    /// Prior shape parameter n0.
    pub sigma_shape: f64,
    /// Prior scale parameter d0.
    pub sigma_scale: f64,
}

impl PriorOr2 {
    pub fn new(
        beta_mean: DVector<f64>,
        beta_cov: DMatrix<f64>,
        sigma_shape: f64,
        sigma_scale: f64,
    ) -> Result<Self> {
        check_spd(&beta_cov, beta_mean.len(), "beta prior covariance")?;
        if sigma_shape <= 0.0 || sigma_scale <= 0.0 {
            return Err(Error::Domain(
                "inverse gamma prior parameters must be positive".into(),
            ));
        }
        Ok(Self { beta_mean, beta_cov, sigma_shape, sigma_scale })
    }

    /// Diffuse default: beta ~ N(0, 10 I), sigma ~ IG(5/2, 8/2).
    pub fn default_for(k: usize) -> Self {
        Self {
            beta_mean: DVector::zeros(k),
            beta_cov: DMatrix::identity(k, k) * 10.0,
            sigma_shape: 5.0,
            sigma_scale: 8.0,
        }
    }
}

fn check_spd(m: &DMatrix<f64>, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(Error::NotSpd(format!("{what} failed Cholesky factorization")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_dataset() -> OrdinalDataset {
        // 6 observations, 3 categories, intercept + one covariate
        let y = vec![1, 2, 3, 1, 2, 3];
        let x = DMatrix::from_row_slice(6, 2, &[
            1.0, 0.1, 1.0, 0.5, 1.0, 0.9, 1.0, 0.2, 1.0, 0.6, 1.0, 0.8,
        ]);
        OrdinalDataset::new(y, x, vec!["intercept".into(), "x2".into()]).unwrap()
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::from_element(4, 1, 1.0);
        // missing category 2
        assert!(OrdinalDataset::new(vec![1, 1, 3, 3], x.clone(), vec!["c".into()]).is_err());
        // fewer than 3 categories
        assert!(OrdinalDataset::new(vec![1, 2, 1, 2], x.clone(), vec!["c".into()]).is_err());
        // code 0
        assert!(OrdinalDataset::new(vec![0, 1, 2, 3], x.clone(), vec!["c".into()]).is_err());
        // rank-deficient design
        let xdup = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            OrdinalDataset::new(vec![1, 2, 3], xdup, vec!["a".into(), "b".into()]),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn delta_gamma_round_trips() {
        let d = DeltaVector::new(DVector::from_vec(vec![0.0, 0.0])).unwrap();
        let g = delta_to_gamma(&d);
        assert_eq!(g.interior(), &[0.0, 1.0, 2.0]);

        let d2 = DeltaVector::new(DVector::from_vec(vec![2.0f64.ln(), 2.0f64.ln()])).unwrap();
        let g2 = delta_to_gamma(&d2);
        assert_relative_eq!(g2.interior()[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(g2.interior()[2], 4.0, epsilon = 1e-12);

        let back = gamma_to_delta(&g2).unwrap();
        assert_relative_eq!(back.0[0], 2.0f64.ln(), epsilon = 1e-12);

        let g3 = CutpointVector::new(vec![0.0, 1.0, 2.0]).unwrap();
        let d3 = gamma_to_delta(&g3).unwrap();
        assert_eq!(d3.0.as_slice(), &[0.0, 0.0]);

        assert!(CutpointVector::new(vec![0.0, 2.0, 1.0]).is_err());
        assert!(CutpointVector::new(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn outcome_probs_hand_case() {
        // intercept-only, beta = 0, J = 3, interior cut-points (0, 1), p = 0.5
        let x = DVector::from_vec(vec![1.0]);
        let beta = DVector::from_vec(vec![0.0]);
        let gamma = CutpointVector::new(vec![0.0, 1.0]).unwrap();
        let probs = outcome_probs_or1(&x, &beta, &gamma, 0.5).unwrap();
        let f1 = 1.0 - 0.5 * (-0.5f64).exp();
        assert_relative_eq!(probs[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(probs[1], f1 - 0.5, epsilon = 1e-9);
        assert_relative_eq!(probs[2], 1.0 - f1, epsilon = 1e-9);
        assert_relative_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn outcome_probs_limit_pushes_mass_to_top() {
        let x = DVector::from_vec(vec![1.0]);
        let beta = DVector::from_vec(vec![200.0]);
        let gamma = CutpointVector::new(vec![0.0, 1.0, 2.0]).unwrap();
        let probs = outcome_probs_or1(&x, &beta, &gamma, 0.25).unwrap();
        assert!(probs[3] > 1.0 - 1e-12);
    }

    #[test]
    fn or2_probs_reduce_to_or1_at_unit_scale() {
        let x = DVector::from_vec(vec![1.0, 0.4]);
        let beta = DVector::from_vec(vec![0.3, -0.7]);
        let gamma = CutpointVector::new(vec![0.0, 3.0]).unwrap();
        let a = outcome_probs_or1(&x, &beta, &gamma, 0.25).unwrap();
        let b = outcome_probs_or2(&x, &beta, 1.0, &gamma, 0.25).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_relative_eq!(pa, pb, epsilon = 1e-14);
        }
        assert_relative_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(outcome_probs_or2(&x, &beta, 0.0, &gamma, 0.25).is_err());
    }

    #[test]
    fn or2_probs_large_sigma_limit() {
        let x = DVector::from_vec(vec![1.0]);
        let beta = DVector::from_vec(vec![0.0]);
        let gamma = CutpointVector::new(vec![0.0, 3.0]).unwrap();
        let probs = outcome_probs_or2(&x, &beta, 1e6, &gamma, 0.25).unwrap();
        assert_relative_eq!(probs[0], 0.25, epsilon = 1e-5);
        assert!(probs[1] < 1e-5);
        assert_relative_eq!(probs[2], 0.75, epsilon = 1e-5);
    }

    #[test]
    fn nll_single_observation() {
        let y = vec![1, 2, 3];
        let x = DMatrix::from_element(3, 1, 1.0);
        let ds = OrdinalDataset::new(y, x, vec!["intercept".into()]).unwrap();
        let beta = DVector::from_vec(vec![0.0]);
        let delta = DeltaVector::new(DVector::from_vec(vec![0.0])).unwrap();
        let (per_obs, total) = neg_log_lik_or1(&ds, &beta, &delta, 0.5).unwrap();
        // first observation has category 1 with probability 0.5
        assert_relative_eq!(per_obs[0], 2.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(total, per_obs.iter().sum::<f64>(), epsilon = 0.0);
    }

    #[test]
    fn nll_or2_matches_or1_at_unit_scale() {
        let ds = small_dataset();
        let beta = DVector::from_vec(vec![0.2, -0.4]);
        let gamma = CutpointVector::new(vec![0.0, 1.5]).unwrap();
        let delta = gamma_to_delta(&gamma).unwrap();
        let (_, t1) = neg_log_lik_or1(&ds, &beta, &delta, 0.25).unwrap();
        let (_, t2) = neg_log_lik_or2(&ds, &beta, 1.0, &gamma, 0.25).unwrap();
        assert_relative_eq!(t1, t2, epsilon = 1e-12);
    }

    #[test]
    fn nll_permutation_invariant() {
        let ds = small_dataset();
        let beta = DVector::from_vec(vec![0.2, -0.4]);
        let delta = DeltaVector::new(DVector::from_vec(vec![0.3])).unwrap();
        let (_, total) = neg_log_lik_or1(&ds, &beta, &delta, 0.25).unwrap();

        let perm = [5usize, 3, 1, 0, 4, 2];
        let y2: Vec<usize> = perm.iter().map(|&i| ds.y()[i]).collect();
        let mut x2 = DMatrix::zeros(6, 2);
        for (r, &i) in perm.iter().enumerate() {
            x2.set_row(r, &ds.x().row(i));
        }
        let ds2 = OrdinalDataset::new(y2, x2, ds.covariate_names().to_vec()).unwrap();
        let (_, total2) = neg_log_lik_or1(&ds2, &beta, &delta, 0.25).unwrap();
        assert_eq!(total, total2);
    }

    #[test]
    fn prior_validation() {
        assert!(PriorOr1::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            DVector::zeros(1),
            DMatrix::identity(1, 1),
        )
        .is_err());
        assert!(PriorOr2::new(DVector::zeros(2), DMatrix::identity(2, 2), 0.0, 8.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delta_gamma_inverse_pair(d in proptest::collection::vec(-3.0f64..3.0, 1..5)) {
                let delta = DeltaVector::new(DVector::from_vec(d)).unwrap();
                let gamma = delta_to_gamma(&delta);
                for w in gamma.interior().windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                let back = gamma_to_delta(&gamma).unwrap();
                for (a, b) in delta.0.iter().zip(back.0.iter()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn probs_sum_to_one(
                b0 in -5.0f64..5.0,
                b1 in -5.0f64..5.0,
                d in proptest::collection::vec(-2.0f64..2.0, 1..4),
                p in 0.05f64..0.95,
                xv in 0.0f64..1.0,
            ) {
                let delta = DeltaVector::new(DVector::from_vec(d)).unwrap();
                let gamma = delta_to_gamma(&delta);
                let x = DVector::from_vec(vec![1.0, xv]);
                let beta = DVector::from_vec(vec![b0, b1]);
                let probs = outcome_probs_or1(&x, &beta, &gamma, p).unwrap();
                prop_assert!(probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
