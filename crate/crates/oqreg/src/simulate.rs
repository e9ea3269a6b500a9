//! Data generators for sampler validation: ordinal responses built from a
//! linear predictor plus asymmetric Laplace noise, binned at known
//! cut-points.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::distributions::{sample_al, RngStream};
use crate::error::{Error, Result};
use crate::model::OrdinalDataset;

/// Data-generating design: `beta_true` includes the intercept, and
/// `cutpoints_true` lists the finite cut-points in increasing order (the
/// number of categories is one more than its length).
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub beta_true: Vec<f64>,
    pub cutpoints_true: Vec<f64>,
    pub p: f64,
    pub seed: u64,
}

/// Generated dataset plus how many regeneration attempts were needed before
/// every category appeared.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: OrdinalDataset,
    pub attempts: u32,
}

const MAX_ATTEMPTS: u32 = 100;

fn validate(spec: &DgpSpec) -> Result<()> {
    if spec.n < 2 {
        return Err(Error::Domain(format!("need at least 2 observations, got {}", spec.n)));
    }
    if spec.beta_true.is_empty() {
        return Err(Error::Domain("beta_true must be non-empty".into()));
    }
    if spec.cutpoints_true.len() < 2 {
        return Err(Error::Domain(
            "need at least 2 cut-points so the response has 3 or more categories".into(),
        ));
    }
    if !spec.cutpoints_true.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Domain("cut-points must be strictly increasing".into()));
    }
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(Error::Domain(format!("quantile p must be in (0,1), got {}", spec.p)));
    }
    Ok(())
}

fn generate(spec: &DgpSpec) -> Result<SimulatedData> {
    validate(spec)?;
    let k = spec.beta_true.len();
    let j_max = spec.cutpoints_true.len() + 1;
    let beta = DVector::from_vec(spec.beta_true.clone());
    let names: Vec<String> = (0..k)
        .map(|c| if c == 0 { "intercept".into() } else { format!("x{c}") })
        .collect();

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = RngStream::new(spec.seed.wrapping_add(attempt as u64));
        let x = DMatrix::from_fn(spec.n, k, |_, c| {
            if c == 0 {
                1.0
            } else {
                rng.gen::<f64>()
            }
        });
        let mut y = Vec::with_capacity(spec.n);
        for i in 0..spec.n {
            let eps = sample_al(0.0, 1.0, spec.p, &mut rng)?;
            let z = x.row(i).transpose().dot(&beta) + eps;
            let cat = spec.cutpoints_true.iter().take_while(|&&g| z > g).count() + 1;
            y.push(cat);
        }
        let seen = (1..=j_max).all(|cat| y.contains(&cat));
        if seen {
            let dataset = OrdinalDataset::new(y, x, names)?;
            return Ok(SimulatedData { dataset, attempts: attempt + 1 });
        }
    }
    Err(Error::InvalidData(format!(
        "failed to produce all {j_max} categories within {MAX_ATTEMPTS} attempts; \
         the design pushes some category's probability too close to zero"
    )))
}

/// Generates data for the free-cut-point model (three or more categories).
pub fn generate_or1_data(spec: &DgpSpec) -> Result<SimulatedData> {
    generate(spec)
}

/// Generates data for the fixed-cut-point model; requires exactly two
/// cut-points so the response has three categories.
pub fn generate_or2_data(spec: &DgpSpec) -> Result<SimulatedData> {
    if spec.cutpoints_true.len() != 2 {
        return Err(Error::ModelMismatch(format!(
            "fixed-cut-point generator needs exactly 2 cut-points, got {}",
            spec.cutpoints_true.len()
        )));
    }
    generate(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{delta_to_gamma, DeltaVector};

    fn base_spec() -> DgpSpec {
        DgpSpec {
            n: 500,
            beta_true: vec![-4.0, 5.0, 6.0],
            cutpoints_true: vec![0.0, 2.0, 4.0],
            p: 0.25,
            seed: 1,
        }
    }

    #[test]
    fn shapes_and_category_coverage() {
        let sim = generate_or1_data(&base_spec()).unwrap();
        let ds = &sim.dataset;
        assert_eq!(ds.n(), 500);
        assert_eq!(ds.k(), 3);
        assert_eq!(ds.num_outcomes(), 4);
        for cat in 1..=4 {
            assert!(ds.y().iter().any(|&y| y == cat));
        }
        // intercept column and uniform covariates
        assert!(ds.x().column(0).iter().all(|&v| v == 1.0));
        assert!(ds.x().columns(1, 2).iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_or1_data(&base_spec()).unwrap();
        let b = generate_or1_data(&base_spec()).unwrap();
        assert_eq!(a.dataset.y(), b.dataset.y());
        assert_eq!(a.dataset.x(), b.dataset.x());
        assert_eq!(a.attempts, b.attempts);
    }

    #[test]
    fn different_seed_changes_data() {
        let a = generate_or1_data(&base_spec()).unwrap();
        let mut spec = base_spec();
        spec.seed = 2;
        let b = generate_or1_data(&spec).unwrap();
        assert_ne!(a.dataset.y(), b.dataset.y());
    }

    #[test]
    fn or2_generator_rejects_wrong_cutpoint_count() {
        let err = generate_or2_data(&base_spec()).unwrap_err();
        assert!(matches!(err, Error::ModelMismatch(_)));
    }

    #[test]
    fn empirical_category_shares_match_al_probabilities() {
        // with a large sample the observed shares should be close to the
        // population probabilities implied by the AL error distribution
        let mut spec = base_spec();
        spec.n = 20000;
        let sim = generate_or1_data(&spec).unwrap();
        let ds = &sim.dataset;
        let beta = DVector::from_vec(spec.beta_true.clone());
        // population probabilities by Monte Carlo over the covariate space
        let delta = DeltaVector::new(DVector::from_vec(vec![
            (2.0f64).ln(),
            (2.0f64).ln(),
        ]))
        .unwrap();
        let gamma = delta_to_gamma(&delta);
        assert_eq!(gamma.interior(), &[0.0, 2.0, 4.0]);
        let mut expected = vec![0.0; 4];
        for i in 0..ds.n() {
            let xi = ds.x().row(i).transpose();
            let probs = crate::model::outcome_probs_or1(&xi, &beta, &gamma, spec.p).unwrap();
            for (e, p) in expected.iter_mut().zip(&probs) {
                *e += p;
            }
        }
        for e in expected.iter_mut() {
            *e /= ds.n() as f64;
        }
        let mut observed = vec![0.0; 4];
        for &y in ds.y() {
            observed[y - 1] += 1.0 / ds.n() as f64;
        }
        for (o, e) in observed.iter().zip(&expected) {
            assert!((o - e).abs() < 0.02, "observed {o} expected {e}");
        }
    }

    #[test]
    fn infeasible_design_reports_failure() {
        // a cut-point far beyond the reachable range leaves the top category
        // empty in every attempt
        let spec = DgpSpec {
            n: 50,
            beta_true: vec![0.0],
            cutpoints_true: vec![0.0, 1.0, 500.0],
            p: 0.5,
            seed: 1,
        };
        let err = generate_or1_data(&spec).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }
}
