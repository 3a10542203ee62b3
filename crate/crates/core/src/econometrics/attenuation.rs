use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_probit, EconError, Frame, RegressionSpec};
use crate::simulate::derive_seed;

/// Probit DGP `y = 1[b0 + b1·x + b2·z + e > 0]` with `x`, `z`, `e` standard
/// normal; `x` is observed with additive noise of each listed SD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttenuationConfig {
    pub n: usize,
    pub repetitions: usize,
    pub noise_sds: Vec<f64>,
    /// Intercept, noisy regressor, clean control.
    pub coefficients: [f64; 3],
    pub seed: u64,
}

impl Default for AttenuationConfig {
    fn default() -> Self {
        Self {
            n: 2_000,
            repetitions: 500,
            noise_sds: vec![0.0, 0.5, 1.0, 2.0, 4.0, 10.0],
            coefficients: [-0.5, -0.4, 0.3],
            seed: 0,
        }
    }
}

impl AttenuationConfig {
    pub fn validate(&self) -> Result<(), EconError> {
        if self.n < 10 || self.repetitions == 0 || self.noise_sds.is_empty() {
            return Err(EconError::InvalidConfig("need n ≥ 10, repetitions ≥ 1 and a noise grid".into()));
        }
        if self.noise_sds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(EconError::InvalidConfig("noise SDs must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationPoint {
    pub noise_sd: f64,
    pub mean_ame: f64,
    /// Monte Carlo standard error of `mean_ame`.
    pub mc_se: f64,
    pub fits: usize,
    /// Repetitions whose probit failed (e.g. separation).
    pub failures: usize,
}

/// Mean probit AME of the noisy regressor at each noise level. Every noise
/// level reuses the same draws within a repetition.
pub fn attenuation_monte_carlo(cfg: &AttenuationConfig) -> Result<Vec<AttenuationPoint>, EconError> {
    cfg.validate()?;
    let spec = RegressionSpec::new("y", &["x", "z"]);
    let [b0, b1, b2] = cfg.coefficients;
    let per_rep: Vec<Vec<Option<f64>>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[rep as u64]));
            let mut draw = || -> f64 { rng.sample(StandardNormal) };
            let mut x = Vec::with_capacity(cfg.n);
            let mut z = Vec::with_capacity(cfg.n);
            let mut y = Vec::with_capacity(cfg.n);
            let mut u = Vec::with_capacity(cfg.n);
            for _ in 0..cfg.n {
                let (xi, zi, ei, ui) = (draw(), draw(), draw(), draw());
                x.push(xi);
                z.push(zi);
                y.push(if b0 + b1 * xi + b2 * zi + ei > 0.0 { 1.0 } else { 0.0 });
                u.push(ui);
            }
            cfg.noise_sds
                .iter()
                .map(|&tau| {
                    let noisy = x.iter().zip(&u).map(|(a, e)| a + tau * e).collect();
                    let frame = Frame::new()
                        .with("y", y.clone())
                        .ok()?
                        .with("x", noisy)
                        .ok()?
                        .with("z", z.clone())
                        .ok()?;
                    let fit = fit_probit(&spec, &frame).ok()?;
                    fit.ame("x").map(|a| a.estimate)
                })
                .collect()
        })
        .collect();

    Ok(cfg
        .noise_sds
        .iter()
        .enumerate()
        .map(|(k, &noise_sd)| {
            let vals: Vec<f64> = per_rep.iter().filter_map(|r| r[k]).collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                f64::NAN
            };
            AttenuationPoint {
                noise_sd,
                mean_ame: mean,
                mc_se: (var / m).sqrt(),
                fits: vals.len(),
                failures: cfg.repetitions - vals.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_attenuates() {
        let cfg = AttenuationConfig { n: 800, repetitions: 20, noise_sds: vec![0.0, 3.0], ..Default::default() };
        let pts = attenuation_monte_carlo(&cfg).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].mean_ame < 0.0);
        assert!(pts[1].mean_ame.abs() < pts[0].mean_ame.abs());
        assert_eq!(pts[0].fits + pts[0].failures, 20);
    }

    #[test]
    fn rejects_bad_grid() {
        let cfg = AttenuationConfig { noise_sds: vec![-1.0], ..Default::default() };
        assert!(attenuation_monte_carlo(&cfg).is_err());
    }
}
