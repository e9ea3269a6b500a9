//! Derivative-free simplex minimizer and finite-difference Hessians, used to
//! locate the cut-point proposal scale for the Metropolis-Hastings step.

use nalgebra::{DMatrix, DVector};

pub struct SimplexResult {
    pub x: DVector<f64>,
    #[allow(dead_code)]
    pub value: f64,
    pub converged: bool,
}

/// Nelder-Mead minimization with standard coefficients. `max_evals` bounds
/// the number of objective evaluations; convergence is declared when the
/// simplex objective spread drops below `tol`.
pub fn nelder_mead<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    start: &DVector<f64>,
    initial_step: f64,
    tol: f64,
    max_evals: usize,
) -> SimplexResult {
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() { v } else { f64::MAX / 4.0 }
    };

    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] += initial_step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < tol {
            converged = true;
            break;
        }
        let centroid: DVector<f64> = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (x, _)| acc + x)
            / n as f64;
        let worst = simplex[n].clone();
        let reflected = &centroid + (&centroid - &worst.0) * alpha;
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = &centroid + (&reflected - &centroid) * gamma;
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                &centroid + (&reflected - &centroid) * rho
            } else {
                &centroid + (&worst.0 - &centroid) * rho
            };
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x = &best + (&item.0 - &best) * sigma;
                    let v = eval(&x, &mut evals);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    SimplexResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        converged,
    }
}

/// Central-difference Hessian of `f` at `x` with per-coordinate step
/// h_j = base_step * max(1, |x_j|). Symmetric by construction.
pub fn central_hessian<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    x: &DVector<f64>,
    base_step: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| base_step * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h[i];
        xm[i] -= h[i];
        hess[(i, i)] = (f(&xp) - 2.0 * f0 + f(&xm)) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut xpp = x.clone();
            let mut xpm = x.clone();
            let mut xmp = x.clone();
            let mut xmm = x.clone();
            xpp[i] += h[i];
            xpp[j] += h[j];
            xpm[i] += h[i];
            xpm[j] -= h[j];
            xmp[i] -= h[i];
            xmp[j] += h[j];
            xmm[i] -= h[i];
            xmm[j] -= h[j];
            let v = (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}
