//! Levenberg-Marquardt for the handful-of-parameters fits used throughout
//! (decaying cosines, exponential decays, RB curves).

/// A least-squares problem: residuals are already weighted, i.e.
/// `r_i = sqrt(w_i) * (y_i - model_i(p))`.
pub trait Residuals {
    fn n_obs(&self) -> usize;
    fn n_params(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// Row-major `n_obs × n_params` Jacobian of the residuals.
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (m, n) = (self.n_obs(), self.n_params());
        let mut base = vec![0.0; m];
        let mut shifted = vec![0.0; m];
        self.residuals(p, &mut base);
        let mut q = p.to_vec();
        for j in 0..n {
            let h = 1e-7 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            self.residuals(&q, &mut shifted);
            q[j] = p[j];
            for i in 0..m {
                out[i * n + j] = (shifted[i] - base[i]) / h;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iter: usize,
    /// Relative reduction in chi² below which the fit is converged.
    pub ftol: f64,
    /// Relative parameter step below which the fit is converged.
    pub xtol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { max_iter: 200, ftol: 1e-12, xtol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub params: Vec<f64>,
    /// `(JᵀJ)⁻¹` at the solution, row-major. With inverse-variance weights
    /// this is the asymptotic parameter covariance.
    pub covariance: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LsqFit {
    pub fn std_err(&self, j: usize) -> f64 {
        let n = self.params.len();
        self.covariance[j * n + j].max(0.0).sqrt()
    }
}

pub fn levenberg_marquardt<R: Residuals + ?Sized>(problem: &R, p0: &[f64], opts: LsqOptions) -> LsqFit {
    let (m, n) = (problem.n_obs(), problem.n_params());
    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    problem.residuals(&p, &mut r);
    let mut chi2 = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let (jtj, jtr) = normal_equations(&jac, &r, m, n);

        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k * n + k] += lambda * jtj[k * n + k].max(1e-12);
            }
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve(&a, &neg, n) else {
                lambda *= 10.0;
                continue;
            };
            for k in 0..n {
                trial[k] = p[k] + step[k];
            }
            problem.residuals(&trial, &mut r_trial);
            let chi2_trial = sum_sq(&r_trial);
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let step_norm = step.iter().zip(&p).map(|(s, x)| (s / x.abs().max(1e-8)).abs()).fold(0.0, f64::max);
                let reduction = (chi2 - chi2_trial) / chi2.max(1e-300);
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                chi2 = chi2_trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if reduction < opts.ftol || step_norm < opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No downhill step at any damping: a (local) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    problem.jacobian(&p, &mut jac);
    let (jtj, _) = normal_equations(&jac, &r, m, n);
    let covariance = invert(&jtj, n).unwrap_or_else(|| vec![f64::NAN; n * n]);
    LsqFit { params: p, covariance, chi2, iterations, converged }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn normal_equations(jac: &[f64], r: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for i in 0..m {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            jtr[a] += row[a] * r[i];
            for b in a..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting on a small dense system.
pub(crate) fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve(a, &e, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line<'a> {
        x: &'a [f64],
        y: &'a [f64],
    }

    impl Residuals for Line<'_> {
        fn n_obs(&self) -> usize {
            self.x.len()
        }
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            for i in 0..self.x.len() {
                out[i] = self.y[i] - (p[0] + p[1] * self.x[i]);
            }
        }
    }

    #[test]
    fn recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let fit = levenberg_marquardt(&Line { x: &x, y: &y }, &[0.0, 0.0], LsqOptions::default());
        assert!((fit.params[0] - 0.5).abs() < 1e-9);
        assert!((fit.params[1] + 2.0).abs() < 1e-9);
        assert!(fit.chi2 < 1e-16);
    }

    #[test]
    fn covariance_matches_ols_formula() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 0.9, 2.1, 2.9, 4.2];
        let fit = levenberg_marquardt(&Line { x: &x, y: &y }, &[0.0, 1.0], LsqOptions::default());
        // (XᵀX)⁻¹ for unit weights: slope variance = 1 / Σ(x - x̄)² = 1/10.
        assert!((fit.covariance[3] - 0.1).abs() < 1e-6);
    }
}
