//! Parametric bootstrap intervals, the duplicate-decay stability test and
//! empirical CDFs with simultaneous bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, CONFIDENCE};
use super::rb::RbDataset;
use crate::error::{Error, Result};
use crate::numeric::rng::stream;

const TAG_BOOTSTRAP: u64 = 0x424f_4f54;
const TAG_STABILITY: u64 = 0x5354_4142;

/// Replicant failures above this fraction mark the interval unstable.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub replicants: usize,
    pub failures: usize,
    /// More than 5% of the replicant fits failed.
    pub unstable: bool,
}

impl BootstrapCi {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Percentile interval (5th, 95th) of `statistic` over parametric
/// replicants: each sequence's count is redrawn from Binomial(shots,
/// observed fraction).
pub fn bootstrap_ci<F>(data: &RbDataset, statistic: F, replicants: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&RbDataset) -> Result<f64> + Sync,
{
    if replicants == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicant"));
    }
    let estimate = statistic(data)?;
    let values: Vec<Option<f64>> = (0..replicants)
        .into_par_iter()
        .map(|k| {
            let sample = data.resampled(&mut stream(seed, TAG_BOOTSTRAP, k as u64));
            statistic(&sample).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut ok: Vec<f64> = values.iter().flatten().copied().collect();
    let failures = replicants - ok.len();
    if ok.is_empty() {
        return Err(Error::Fit { reason: "every bootstrap replicant failed".into(), residual_norm: f64::NAN });
    }
    ok.sort_by(f64::total_cmp);
    let tail = (1.0 - CONFIDENCE) / 2.0;
    Ok(BootstrapCi {
        estimate,
        low: quantile(&ok, tail),
        high: quantile(&ok, 1.0 - tail),
        replicants,
        failures,
        unstable: failures as f64 > MAX_FAILURE_FRACTION * replicants as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTest {
    /// p̂_a − p̂_b.
    pub difference: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Bootstrap test of H₀: p_a = p_b for two decays measured with the same
/// configuration.
///
/// Both datasets are resampled together (parametric, per sequence) and the
/// null distribution of the difference statistic is the replicants'
/// difference shifted to zero; the p-value is the fraction of shifted
/// replicants at least as extreme as the observed difference. The decays
/// are judged distinguishable (fail) when `p < alpha`.
pub fn stability_test(a: &RbDataset, b: &RbDataset, alpha: f64, replicants: usize, seed: u64) -> Result<StabilityTest> {
    if !(0.0..1.0).contains(&alpha) || replicants == 0 {
        return Err(Error::invalid("alpha must lie in [0, 1) and replicants must be >= 1"));
    }
    let d = fit_decay(a)?.p - fit_decay(b)?.p;
    let shifted: Vec<Option<f64>> = (0..replicants)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, TAG_STABILITY, k as u64);
            let (ra, rb) = (a.resampled(&mut rng), b.resampled(&mut rng));
            let ds = fit_decay(&ra).ok()?.p - fit_decay(&rb).ok()?.p;
            Some(ds - d)
        })
        .collect();
    let ok: Vec<f64> = shifted.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Fit { reason: "every stability replicant failed".into(), residual_norm: f64::NAN });
    }
    let extreme = ok.iter().filter(|x| x.abs() >= d.abs() - 1e-15).count();
    let p_value = (1 + extreme) as f64 / (1 + ok.len()) as f64;
    Ok(StabilityTest { difference: d, p_value, alpha, pass: p_value >= alpha })
}

/// Step ECDF with a Dvoretzky–Kiefer–Wolfowitz simultaneous band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Sorted samples.
    pub values: Vec<f64>,
    /// F̂ just after each sample, i/n.
    pub cumulative: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    /// `sqrt(ln(2/α)/(2n))`.
    pub half_width: f64,
    pub confidence: f64,
}

impl Ecdf {
    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    pub fn band_at(&self, x: f64) -> (f64, f64) {
        let f = self.eval(x);
        ((f - self.half_width).max(0.0), (f + self.half_width).min(1.0))
    }
}

pub fn ecdf_with_band(samples: &[f64]) -> Result<Ecdf> {
    if samples.len() < 2 {
        return Err(Error::invalid("an ECDF needs at least 2 samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("ECDF samples must be finite"));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let half_width = ((2.0 / (1.0 - CONFIDENCE)).ln() / (2.0 * n)).sqrt();
    let cumulative: Vec<f64> = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(Ecdf {
        band_low: cumulative.iter().map(|f| (f - half_width).max(0.0)).collect(),
        band_high: cumulative.iter().map(|f| (f + half_width).min(1.0)).collect(),
        values,
        cumulative,
        half_width,
        confidence: CONFIDENCE,
    })
}
