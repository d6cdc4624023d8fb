//! Levenberg-Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Weighted residuals `r(p)` and their Jacobian `dr/dp`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Row-major `n_residuals x n_params`.
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>);
    /// Maps a trial point back into the feasible set.
    fn project(&self, _p: &mut [f64]) {}
    fn param_name(&self, i: usize) -> String {
        format!("p{i}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    /// Relative cost change on an accepted step.
    pub ftol: f64,
    /// Infinity norm of `J^T r`.
    pub gtol: f64,
    /// Smallest/largest eigenvalue of the scaled normal matrix.
    pub degeneracy_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 3.0,
            lambda_max: 1e16,
            ftol: 1e-9,
            gtol: 1e-10,
            degeneracy_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    CostTolerance,
    GradientTolerance,
    /// No downhill step left at any damping.
    DampingSaturated,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        self != Termination::MaxIterations
    }
}

/// A combination of parameters the data does not constrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDirection {
    pub eigen_ratio: f64,
    pub components: Vec<(String, f64)>,
}

impl NullDirection {
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .filter(|(_, c)| c.abs() > 0.05)
            .map(|(n, c)| format!("{c:+.3}*{n}"))
            .collect();
        format!("{} (eigenvalue ratio {:.2e})", parts.join(" "), self.eigen_ratio)
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub jacobian: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub null_direction: Option<NullDirection>,
}

impl LmReport {
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        self.jacobian.transpose() * &self.jacobian
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Marquardt-damped Gauss-Newton with multiplicative damping updates.
pub fn minimize<P: LeastSquaresProblem + ?Sized>(problem: &P, p0: &[f64], opts: &LmOptions) -> LmReport {
    let np = problem.n_params();
    let nr = problem.n_residuals();
    let mut p = p0.to_vec();
    problem.project(&mut p);
    let mut r = vec![0.0; nr];
    let mut j = DMatrix::zeros(nr, np);
    problem.residuals(&p, &mut r);
    problem.jacobian(&p, &mut j);
    let mut cost = sum_sq(&r);
    let mut lambda = opts.lambda0;
    let mut trial = vec![0.0; np];
    let mut r_trial = vec![0.0; nr];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        if g.amax() < opts.gtol {
            termination = Termination::GradientTolerance;
            break;
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..np {
                let d = jtj[(k, k)];
                a[(k, k)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= opts.lambda_up;
                    if lambda > opts.lambda_max {
                        termination = Termination::DampingSaturated;
                        break 'outer;
                    }
                    continue;
                }
            };
            for k in 0..np {
                trial[k] = p[k] + step[k];
            }
            problem.project(&mut trial);
            problem.residuals(&trial, &mut r_trial);
            let c_trial = sum_sq(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let rel = (cost - c_trial) / cost.max(f64::MIN_POSITIVE);
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = c_trial;
                problem.jacobian(&p, &mut j);
                lambda = (lambda / opts.lambda_down).max(1e-15);
                if rel < opts.ftol {
                    termination = Termination::CostTolerance;
                    break 'outer;
                }
                break;
            }
            lambda *= opts.lambda_up;
            if lambda > opts.lambda_max {
                termination = Termination::DampingSaturated;
                break 'outer;
            }
        }
    }
    let null_direction = null_direction(problem, &j, opts.degeneracy_tol);
    LmReport {
        params: p,
        cost,
        iterations,
        termination,
        jacobian: j,
        residuals: r,
        null_direction,
    }
}

/// Eigen-decomposes the unit-diagonal normal matrix and reports its softest
/// direction when the eigenvalue spread exceeds `1 / tol`.
fn null_direction<P: LeastSquaresProblem + ?Sized>(problem: &P, j: &DMatrix<f64>, tol: f64) -> Option<NullDirection> {
    let jtj = j.transpose() * j;
    let n = jtj.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let d = jtj[(k, k)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if let Some(k) = scale.iter().position(|&s| s == 0.0) {
        return Some(NullDirection {
            eigen_ratio: 0.0,
            components: (0..n)
                .map(|i| (problem.param_name(i), if i == k { 1.0 } else { 0.0 }))
                .collect(),
        });
    }
    let scaled = DMatrix::from_fn(n, n, |a, b| jtj[(a, b)] * scale[a] * scale[b]);
    let eig = SymmetricEigen::new(scaled);
    let (mut imin, mut imax) = (0, 0);
    for k in 0..n {
        if eig.eigenvalues[k] < eig.eigenvalues[imin] {
            imin = k;
        }
        if eig.eigenvalues[k] > eig.eigenvalues[imax] {
            imax = k;
        }
    }
    let ratio = eig.eigenvalues[imin] / eig.eigenvalues[imax];
    if ratio >= tol {
        return None;
    }
    let v = eig.eigenvectors.column(imin);
    Some(NullDirection {
        eigen_ratio: ratio,
        components: (0..n).map(|i| (problem.param_name(i), v[i])).collect(),
    })
}

/// `(J^T J)^{-1}`, falling back to the pseudo-inverse when singular.
pub fn normal_inverse(jtj: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = jtj.clone().cholesky() {
        let inv = ch.inverse();
        if inv.iter().all(|x| x.is_finite()) {
            return inv;
        }
    }
    pseudo_inverse(jtj)
}

pub fn pseudo_inverse(jtj: &DMatrix<f64>) -> DMatrix<f64> {
    let n = jtj.nrows();
    let eig = SymmetricEigen::new(jtj.clone());
    let max = eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.eigenvalues[k];
        if l > 1e-12 * max {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Central-difference Jacobian, for checking analytic derivatives.
pub fn numeric_jacobian<P: LeastSquaresProblem + ?Sized>(problem: &P, p: &[f64], rel_step: f64) -> DMatrix<f64> {
    let np = problem.n_params();
    let nr = problem.n_residuals();
    let mut out = DMatrix::zeros(nr, np);
    let mut hi = vec![0.0; nr];
    let mut lo = vec![0.0; nr];
    let mut q = p.to_vec();
    for k in 0..np {
        let h = rel_step * p[k].abs().max(1e-3);
        q[k] = p[k] + h;
        problem.residuals(&q, &mut hi);
        q[k] = p[k] - h;
        problem.residuals(&q, &mut lo);
        q[k] = p[k];
        for i in 0..nr {
            out[(i, k)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    out
}
