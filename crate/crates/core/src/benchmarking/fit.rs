//! `A·p^L + B` decay fits and the interleaved-RB point estimate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::rb::RbDataset;
use crate::error::{Error, Result};
use crate::numeric::{levenberg_marquardt, LsqOptions, Residuals};

/// Two-qubit Hilbert-space dimension.
pub const DIM: f64 = 4.0;

/// Two-sided confidence level of reported intervals.
pub const CONFIDENCE: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    /// Decay parameter, clamped to [0, 1]; see `clamped`.
    pub p: f64,
    pub b: f64,
    /// Row-major covariance of (A, p, B).
    pub covariance: [f64; 9],
    /// 90% interval on p.
    pub p_ci: [f64; 2],
    pub lengths: Vec<usize>,
    pub means: Vec<f64>,
    /// Standard error of each length's mean survival.
    pub std_errs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    /// False when some length had zero spread and the fit fell back to
    /// equal weights.
    pub weighted: bool,
    /// The unconstrained estimate of p fell outside [0, 1].
    pub clamped: bool,
}

impl DecayFit {
    pub fn p_std_err(&self) -> f64 {
        self.covariance[4].max(0.0).sqrt()
    }

    pub fn model(&self, length: f64) -> f64 {
        self.a * self.p.powf(length) + self.b
    }
}

struct DecayModel<'a> {
    lengths: &'a [f64],
    means: &'a [f64],
    sigma: &'a [f64],
}

impl Residuals for DecayModel<'_> {
    fn n_obs(&self) -> usize {
        self.lengths.len()
    }
    fn n_params(&self) -> usize {
        3
    }
    fn residuals(&self, q: &[f64], out: &mut [f64]) {
        for i in 0..self.lengths.len() {
            out[i] = (self.means[i] - (q[0] * q[1].powf(self.lengths[i]) + q[2])) / self.sigma[i];
        }
    }
    fn jacobian(&self, q: &[f64], out: &mut [f64]) {
        for i in 0..self.lengths.len() {
            let l = self.lengths[i];
            let s = self.sigma[i];
            out[i * 3] = -q[1].powf(l) / s;
            out[i * 3 + 1] = -q[0] * l * q[1].powf(l - 1.0) / s;
            out[i * 3 + 2] = -1.0 / s;
        }
    }
}

/// Initial guess: A = B = half the observed range, p from a log-linear fit
/// of `ln(y − B)` against L.
fn initial_guess(lengths: &[f64], means: &[f64]) -> [f64; 3] {
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (hi - lo);
    let pts: Vec<(f64, f64)> = lengths
        .iter()
        .zip(means)
        .filter(|(_, &y)| y - half > 1e-3)
        .map(|(&l, &y)| (l, (y - half).ln()))
        .collect();
    let p0 = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp().clamp(0.05, 0.9999)
    } else {
        0.9
    };
    [half, p0, half]
}

/// Weighted non-linear least squares of `A·p^L + B` to per-length mean
/// survivals, weights from the spread across sequences.
pub fn fit_decay(data: &RbDataset) -> Result<DecayFit> {
    let groups = data.by_length();
    if groups.len() < 3 {
        return Err(Error::invalid(format!("decay fit needs at least 3 lengths, got {}", groups.len())));
    }
    let lengths: Vec<usize> = groups.iter().map(|g| g.0).collect();
    let lf: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let means: Vec<f64> = groups.iter().map(|g| g.1.iter().sum::<f64>() / g.1.len() as f64).collect();
    let std_errs: Vec<f64> = groups
        .iter()
        .zip(&means)
        .map(|((_, ys), &m)| {
            let n = ys.len() as f64;
            if ys.len() < 2 {
                return 0.0;
            }
            let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let weighted = std_errs.iter().all(|&s| s > 1e-12);
    let sigma: Vec<f64> = if weighted { std_errs.clone() } else { vec![1.0; means.len()] };

    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo < 1e-12 {
        // No decay at all: p = 1 with the level carried by A + B.
        let m = means[0];
        return Ok(DecayFit {
            a: m - 1.0 / DIM,
            p: 1.0,
            b: 1.0 / DIM,
            covariance: [0.0; 9],
            p_ci: [1.0, 1.0],
            residuals: vec![0.0; means.len()],
            lengths,
            means,
            std_errs,
            chi2: 0.0,
            weighted,
            clamped: false,
        });
    }

    let model = DecayModel { lengths: &lf, means: &means, sigma: &sigma };
    let opts = LsqOptions::default();
    let mut fit = levenberg_marquardt(&model, &initial_guess(&lf, &means), opts);
    if !fit.converged || !fit.params.iter().all(|v| v.is_finite()) {
        let b0 = 1.0 / DIM;
        let retry = levenberg_marquardt(&model, &[(means[0] - b0).max(0.1), 0.95, b0], opts);
        if retry.converged && (!fit.converged || retry.chi2 < fit.chi2) {
            fit = retry;
        }
    }
    if !fit.converged || !fit.params.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit { reason: "decay fit did not converge".into(), residual_norm: fit.chi2.sqrt() });
    }

    let n = means.len();
    let dof = n.saturating_sub(3);
    let scale = if weighted {
        1.0
    } else if dof > 0 {
        fit.chi2 / dof as f64
    } else {
        f64::INFINITY
    };
    let mut covariance = [0.0; 9];
    for (c, v) in covariance.iter_mut().zip(&fit.covariance) {
        *c = v * scale;
    }
    let quantile = if weighted || dof == 0 {
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 + CONFIDENCE / 2.0)
    } else {
        StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof").inverse_cdf(0.5 + CONFIDENCE / 2.0)
    };
    let raw_p = fit.params[1];
    let clamped = !(0.0..=1.0).contains(&raw_p);
    let p = raw_p.clamp(0.0, 1.0);
    let half = quantile * covariance[4].max(0.0).sqrt();
    let mut residuals = vec![0.0; n];
    model.residuals(&fit.params, &mut residuals);
    for (r, s) in residuals.iter_mut().zip(&sigma) {
        *r *= s;
    }
    Ok(DecayFit {
        a: fit.params[0],
        p,
        b: fit.params[2],
        covariance,
        p_ci: [(p - half).max(0.0), (p + half).min(1.0)],
        lengths,
        means,
        std_errs,
        residuals,
        chi2: fit.chi2,
        weighted,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrbResult {
    pub p_ref: f64,
    pub p_int: f64,
    /// Average gate fidelity F̄ = 1 − r.
    pub fidelity: f64,
    /// r = (d − 1)(1 − p_int/p_ref)/d.
    pub infidelity: f64,
    /// 90% interval on r (delta method unless replaced by a bootstrap).
    pub ci: [f64; 2],
    /// p_int exceeds p_ref by more than its 90% uncertainty.
    pub negative: bool,
    pub stability_pass: bool,
}

impl IrbResult {
    pub fn fidelity_ci(&self) -> [f64; 2] {
        [1.0 - self.ci[1], 1.0 - self.ci[0]]
    }
}

/// Point estimate from the two decay parameters alone.
pub fn irb_from_decay_parameters(p_ref: f64, p_int: f64) -> Result<IrbResult> {
    if !(p_ref > 0.0) || !p_int.is_finite() {
        return Err(Error::invalid("p_ref must be positive"));
    }
    let r = (DIM - 1.0) * (1.0 - p_int / p_ref) / DIM;
    Ok(IrbResult {
        p_ref,
        p_int,
        fidelity: 1.0 - r,
        infidelity: r,
        ci: [r, r],
        negative: r < 0.0,
        stability_pass: true,
    })
}

pub fn irb_estimate(reference: &DecayFit, interleaved: &DecayFit) -> Result<IrbResult> {
    let mut out = irb_from_decay_parameters(reference.p, interleaved.p)?;
    let (pr, pi) = (reference.p, interleaved.p);
    let (vr, vi) = (reference.covariance[4].max(0.0), interleaved.covariance[4].max(0.0));
    let c = (DIM - 1.0) / DIM;
    let var = c * c * (vi / (pr * pr) + pi * pi * vr / pr.powi(4));
    let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 + CONFIDENCE / 2.0);
    let half = z * var.sqrt();
    out.ci = [out.infidelity - half, out.infidelity + half];
    out.negative = pi - pr > z * (vi + vr).sqrt();
    Ok(out)
}
