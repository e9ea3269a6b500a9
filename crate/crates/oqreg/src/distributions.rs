//! Scalar and vector distribution primitives shared by the samplers and the
//! evidence computations: asymmetric Laplace density/CDF and sampler, the
//! index-1/2 generalized inverse Gaussian, truncated normal, inverse gamma,
//! and multivariate normal draws, all driven by a seeded stream.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Gamma, InverseGaussian, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Quantile level together with the mixture constants it determines.
///
/// For quantile `p`, the asymmetric Laplace error admits the
/// normal-exponential mixture with location weight `theta = (1-2p)/(p(1-p))`
/// and scale weight `tau = sqrt(2/(p(1-p)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSpec {
    pub p: f64,
    pub theta: f64,
    pub tau: f64,
}

impl QuantileSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile p must be in (0,1), got {p}")));
        }
        let pq = p * (1.0 - p);
        Ok(Self {
            p,
            theta: (1.0 - 2.0 * p) / pq,
            tau: (2.0 / pq).sqrt(),
        })
    }

    #[inline]
    pub fn tau_sq(&self) -> f64 {
        self.tau * self.tau
    }
}

/// Seeded random stream. One stream per chain; identical seeds reproduce the
/// draw sequence bit for bit on a given platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream with a fixed index, for deterministic parallel use.
    pub fn substream(&self, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        Self { seed: self.seed, rng }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

fn check_al_args(mu: f64, sigma: f64, p: f64) -> Result<()> {
    if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Domain(format!(
            "AL distribution requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("AL quantile must be in (0,1), got {p}")));
    }
    Ok(())
}

/// CDF of the asymmetric Laplace distribution AL(mu, sigma, p).
///
/// For standardized u = (x - mu)/sigma: F = p*exp((1-p)u) when u <= 0 and
/// F = 1 - (1-p)*exp(-p*u) when u > 0.
pub fn al_cdf(x: f64, mu: f64, sigma: f64, p: f64) -> Result<f64> {
    check_al_args(mu, sigma, p)?;
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let u = (x - mu) / sigma;
    Ok(if u <= 0.0 {
        p * ((1.0 - p) * u).exp()
    } else {
        1.0 - (1.0 - p) * (-p * u).exp()
    })
}

/// Density of the asymmetric Laplace distribution AL(mu, sigma, p).
pub fn al_pdf(x: f64, mu: f64, sigma: f64, p: f64) -> Result<f64> {
    check_al_args(mu, sigma, p)?;
    if !x.is_finite() {
        return Ok(0.0);
    }
    let u = (x - mu) / sigma;
    let rho = u * (p - if u < 0.0 { 1.0 } else { 0.0 });
    Ok(p * (1.0 - p) / sigma * (-rho).exp())
}

/// Draw from AL(mu, sigma, p) via the normal-exponential mixture
/// eps = theta*w + tau*sqrt(w)*u with w ~ Exp(1) and u ~ N(0,1).
pub fn sample_al(mu: f64, sigma: f64, p: f64, rng: &mut RngStream) -> Result<f64> {
    check_al_args(mu, sigma, p)?;
    let spec = QuantileSpec::new(p)?;
    let w: f64 = Exp::new(1.0).unwrap().sample(rng);
    let u: f64 = StandardNormal.sample(rng);
    Ok(mu + sigma * (spec.theta * w + spec.tau * w.sqrt() * u))
}

/// Draw from the generalized inverse Gaussian with index 1/2 and density
/// proportional to x^(-1/2) * exp(-(lambda/x + eta*x)/2).
///
/// The index-1/2 case maps onto the inverse Gaussian: if
/// Y ~ IG(sqrt(eta/lambda), eta) then 1/Y has the target law. The lambda = 0
/// boundary reduces to Gamma(1/2, rate eta/2). A ratio-of-uniforms pass backs
/// up the transform when the product lambda*eta is extreme enough to produce
/// an unusable draw.
pub fn sample_gig_half(lambda: f64, eta: f64, rng: &mut RngStream) -> Result<f64> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::Domain(format!("GIG rate eta must be positive, got {eta}")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!(
            "GIG parameter lambda must be nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let g: f64 = Gamma::new(0.5, 2.0 / eta).unwrap().sample(rng);
        if g > 0.0 && g.is_finite() {
            return Ok(g);
        }
        return gig_half_rou(f64::MIN_POSITIVE, eta, rng);
    }
    let mean = (eta / lambda).sqrt();
    if let Ok(ig) = InverseGaussian::new(mean, eta) {
        for _ in 0..4 {
            let y: f64 = ig.sample(rng);
            if y > 0.0 && y.is_finite() {
                let x = 1.0 / y;
                if x > 0.0 && x.is_finite() {
                    return Ok(x);
                }
            }
        }
    }
    gig_half_rou(lambda, eta, rng)
}

/// Ratio-of-uniforms sampler for GIG(1/2, lambda, eta); fallback path only.
fn gig_half_rou(lambda: f64, eta: f64, rng: &mut RngStream) -> Result<f64> {
    let log_h = |x: f64| -0.5 * x.ln() - 0.5 * (lambda / x + eta * x);
    // Mode of h and of x^2 h, both roots of simple quadratics.
    let x_u = (-1.0 + (1.0 + 4.0 * eta * lambda).sqrt()) / (2.0 * eta);
    let x_v = (3.0 + (9.0 + 4.0 * eta * lambda).sqrt()) / (2.0 * eta);
    let x_u = if x_u > 0.0 && x_u.is_finite() { x_u } else { f64::MIN_POSITIVE.sqrt() };
    let log_u_max = 0.5 * log_h(x_u);
    let log_v_max = x_v.ln() + 0.5 * log_h(x_v);
    for _ in 0..100_000 {
        let u: f64 = rng.gen::<f64>();
        let v: f64 = rng.gen::<f64>();
        if u <= 0.0 {
            continue;
        }
        let log_u = u.ln() + log_u_max;
        let log_v = v.ln() + log_v_max;
        let x = (log_v - log_u).exp();
        if x > 0.0 && x.is_finite() && 2.0 * log_u <= log_h(x) {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "GIG ratio-of-uniforms sampler failed to accept (lambda={lambda}, eta={eta})"
    )))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        std_normal().cdf(x)
    }
}

/// Standard normal quantile function.
pub fn normal_quantile(q: f64) -> f64 {
    std_normal().inverse_cdf(q)
}

// Interval ends at least this many sd into one tail switch to rejection
// sampling; the inverse CDF loses resolution out there.
const TAIL_SD: f64 = 5.0;

/// Draw from N(mean, variance) restricted to the open interval (lower, upper).
pub fn sample_truncated_normal(
    mean: f64,
    variance: f64,
    lower: f64,
    upper: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::Domain(format!("variance must be positive, got {variance}")));
    }
    if !(lower < upper) {
        return Err(Error::Domain(format!(
            "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    let sd = variance.sqrt();
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = if a >= TAIL_SD {
        tail_rejection(a, b, rng)?
    } else if b <= -TAIL_SD {
        -tail_rejection(-b, -a, rng)?
    } else {
        let pa = normal_cdf(a);
        let pb = normal_cdf(b);
        let mut z;
        loop {
            let u = pa + (pb - pa) * rng.gen::<f64>();
            z = normal_quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0));
            if z.is_finite() {
                break;
            }
        }
        z.clamp(a, b)
    };
    let mut x = mean + sd * z;
    // The draw must be strictly interior.
    if x <= lower {
        x = lower.max(mean + sd * a).next_up();
    }
    if x >= upper {
        x = upper.min(mean + sd * b).next_down();
    }
    Ok(x)
}

/// One-sided exponential rejection for a standard normal truncated to (a, b)
/// with a deep in the right tail.
fn tail_rejection(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..1_000_000 {
        let e: f64 = Exp::new(alpha).unwrap().sample(rng);
        let x = a + e;
        if x >= b {
            continue;
        }
        let accept_log = -0.5 * (x - alpha) * (x - alpha);
        if rng.gen::<f64>().ln() <= accept_log {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "truncated normal tail rejection failed for bounds ({a}, {b})"
    )))
}

/// Draw from the inverse gamma distribution with density proportional to
/// x^(-shape-1) * exp(-scale/x).
pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!(
            "inverse gamma requires positive shape and scale, got shape={shape}, scale={scale}"
        )));
    }
    loop {
        let g: f64 = Gamma::new(shape, 1.0 / scale).unwrap().sample(rng);
        if g > 0.0 && g.is_finite() {
            let x = 1.0 / g;
            if x > 0.0 && x.is_finite() {
                return Ok(x);
            }
        }
    }
}

/// Log density of the inverse gamma distribution at x.
pub fn inverse_gamma_logpdf(x: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::Domain("inverse gamma parameters must be positive".into()));
    }
    if x <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(shape * scale.ln() - statrs::function::gamma::ln_gamma(shape)
        - (shape + 1.0) * x.ln()
        - scale / x)
}

/// Draw from a multivariate normal with the given mean and SPD covariance.
pub fn sample_mvn(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let k = mean.len();
    if covariance.nrows() != k || covariance.ncols() != k {
        return Err(Error::Shape(format!(
            "covariance is {}x{} but mean has length {k}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let chol = Cholesky::new(covariance.clone())
        .ok_or_else(|| Error::NotSpd("mvn covariance failed Cholesky factorization".into()))?;
    let u = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
    Ok(mean + chol.l() * u)
}

/// Log density of a multivariate normal at x.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, covariance: &DMatrix<f64>) -> Result<f64> {
    let k = mean.len();
    if x.len() != k || covariance.nrows() != k || covariance.ncols() != k {
        return Err(Error::Shape("mvn logpdf dimension mismatch".into()));
    }
    let chol = Cholesky::new(covariance.clone())
        .ok_or_else(|| Error::NotSpd("mvn covariance failed Cholesky factorization".into()))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let diff = x - mean;
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved);
    Ok(-0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}
