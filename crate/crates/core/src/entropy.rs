//! Conditional entropy of a finite-alphabet input observed through a scalar
//! AWGN channel: the Jensen-type closed-form approximation, its gradient
//! with respect to the per-stream gains, and a Monte-Carlo estimate of the
//! exact value.
//!
//! Gradients are composite complex derivatives `∂f/∂Re g + j ∂f/∂Im g`,
//! so a first-order change is `Re(conj(grad) * dg)`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::{effective_points, Constellation, EffectivePointSet};
use crate::error::{Error, Result};

/// Name of the generator behind every seeded draw in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9)";

/// Pairwise exponent tables are cached up to this many points.
const SYMMETRIC_CACHE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if sigma2.is_finite() && sigma2 > 0.0 {
            Ok(NoiseModel { sigma2 })
        } else {
            Err(Error::Config(format!("sigma2 must be positive, got {sigma2}")))
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 2000,
            seed: 0x5eed,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("mc.samples must be >= 1".into()));
        }
        Ok(())
    }

    /// Unit-variance circular complex Gaussian draws, shared by every
    /// entropy term of one evaluation.
    pub fn unit_draws(&self) -> Vec<Complex64> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..self.samples)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * s, im * s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> McEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return McEstimate {
            estimate: mean,
            std_error: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    McEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
    }
}

/// `(1/|X|) Σ_m log2 Σ_l exp(-|y_m - y_l|² / (2σ²))`.
///
/// The `l = m` term is `exp(0) = 1`, so every inner sum is `1 + off` with
/// `off` the off-diagonal part; `ln_1p(off)` keeps full relative precision
/// at high SNR where the entropy is tiny.
pub fn cond_entropy_approx(eff: &EffectivePointSet, noise: NoiseModel) -> f64 {
    approx_from_points(&eff.points, noise.sigma2)
}

pub(crate) fn approx_from_points(points: &[Complex64], sigma2: f64) -> f64 {
    let m = points.len();
    if m <= 1 {
        return 0.0;
    }
    let inv = 0.5 / sigma2;
    let mut total = 0.0;
    if m <= SYMMETRIC_CACHE_LIMIT {
        let mut sums = vec![0.0f64; m];
        for i in 0..m {
            let yi = points[i];
            for j in i + 1..m {
                let w = (-(yi - points[j]).norm_sqr() * inv).exp();
                sums[i] += w;
                sums[j] += w;
            }
        }
        for s in sums {
            total += s.ln_1p();
        }
    } else {
        for (i, &yi) in points.iter().enumerate() {
            let off: f64 = points
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != i)
                .map(|(_, &yl)| (-(yi - yl).norm_sqr() * inv).exp())
                .sum();
            total += off.ln_1p();
        }
    }
    total / (m as f64 * LN_2)
}

/// Approximate entropy of the product alphabet together with its gradient
/// with respect to every gain.
pub fn entropy_approx_with_gain_grad(
    gains: &[Complex64],
    alphabets: &[&Constellation],
    noise: NoiseModel,
) -> (f64, Vec<Complex64>) {
    let eff = effective_points(gains, alphabets);
    let points = &eff.points;
    let m = points.len();
    let n_streams = gains.len();
    if m <= 1 {
        return (0.0, vec![Complex64::new(0.0, 0.0); n_streams]);
    }
    let sigma2 = noise.sigma2;
    let inv = 0.5 / sigma2;

    // symbol[a][idx]: symbol of stream `a` inside point `idx`
    let mut symbols: Vec<Vec<Complex64>> = Vec::with_capacity(n_streams);
    let mut stride = m;
    for x in alphabets {
        let card = x.len();
        stride /= card;
        symbols.push(
            (0..m)
                .map(|idx| x.points()[(idx / stride) % card])
                .collect(),
        );
    }

    let cached = m <= SYMMETRIC_CACHE_LIMIT;
    let mut table = if cached { vec![0.0f64; m * m] } else { Vec::new() };
    if cached {
        for i in 0..m {
            table[i * m + i] = 1.0;
            for j in i + 1..m {
                let w = (-(points[i] - points[j]).norm_sqr() * inv).exp();
                table[i * m + j] = w;
                table[j * m + i] = w;
            }
        }
    }

    let mut row = vec![0.0f64; m];
    let mut total = 0.0;
    let mut grad = vec![Complex64::new(0.0, 0.0); n_streams];
    for i in 0..m {
        let yi = points[i];
        if cached {
            row.copy_from_slice(&table[i * m..(i + 1) * m]);
        } else {
            for (w, &yl) in row.iter_mut().zip(points.iter()) {
                *w = (-(yi - yl).norm_sqr() * inv).exp();
            }
        }
        let off: f64 = row.iter().enumerate().filter(|&(l, _)| l != i).map(|(_, w)| w).sum();
        total += off.ln_1p() / LN_2;
        let inv_s = 1.0 / (1.0 + off);
        for (a, sym) in symbols.iter().enumerate() {
            let own = sym[i];
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..m {
                let w = row[l];
                if w == 0.0 {
                    continue;
                }
                let z = yi - points[l];
                acc += z * (own - sym[l]).conj() * w;
            }
            grad[a] += acc * inv_s;
        }
    }
    let scale = -1.0 / (m as f64 * sigma2 * LN_2);
    for g in &mut grad {
        *g *= scale;
    }
    (total / m as f64, grad)
}

/// Per-draw values of `1/ln2 + (1/|X|) Σ_m log2 Σ_l exp(-|y_m - y_l + n|²/σ²)`.
/// `unit_draws` are scaled by `σ` here so the same draws serve every noise
/// level.
pub(crate) fn exact_per_sample(
    points: &[Complex64],
    sigma2: f64,
    unit_draws: &[Complex64],
) -> Vec<f64> {
    let m = points.len();
    let sigma = sigma2.sqrt();
    let inv = 1.0 / sigma2;
    let mut exps = vec![0.0f64; m];
    unit_draws
        .iter()
        .map(|w| {
            let n = w * sigma;
            let mut total = 0.0;
            for &yi in points {
                let mut max = f64::NEG_INFINITY;
                for (e, &yl) in exps.iter_mut().zip(points.iter()) {
                    *e = -(yi - yl + n).norm_sqr() * inv;
                    if *e > max {
                        max = *e;
                    }
                }
                let s: f64 = exps.iter().map(|e| (e - max).exp()).sum();
                total += max / LN_2 + s.log2();
            }
            1.0 / LN_2 + total / m as f64
        })
        .collect()
}

/// Monte-Carlo estimate of the exact conditional entropy.
pub fn cond_entropy_exact(eff: &EffectivePointSet, noise: NoiseModel, mc: McConfig) -> McEstimate {
    let draws = mc.unit_draws();
    mean_and_stderr(&exact_per_sample(&eff.points, noise.sigma2, &draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{standard_constellation, ConstellationKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bpsk_unit_noise_closed_form() {
        let bpsk = standard_constellation(ConstellationKind::Bpsk);
        let eff = effective_points(&[c(1.0, 0.0)], &[&bpsk]);
        let h = cond_entropy_approx(&eff, NoiseModel::new(1.0).unwrap());
        let expected = (1.0 + (-2.0f64).exp()).log2();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.183118).abs() < 1e-6);
    }

    #[test]
    fn zero_gains_give_full_entropy() {
        let qpsk = standard_constellation(ConstellationKind::Qpsk);
        let eff = effective_points(&[c(0.0, 0.0), c(0.0, 0.0)], &[&qpsk, &qpsk]);
        let h = cond_entropy_approx(&eff, NoiseModel::new(0.3).unwrap());
        assert!((h - 4.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit_vanishes() {
        let bpsk = standard_constellation(ConstellationKind::Bpsk);
        let eff = effective_points(&[c(1.0, 0.0)], &[&bpsk]);
        let h = cond_entropy_approx(&eff, NoiseModel::new(1e-12).unwrap());
        assert!(h <= 1e-9);
        let ex = cond_entropy_exact(&eff, NoiseModel::new(1e-12).unwrap(), McConfig::default());
        assert!(ex.estimate.abs() <= 3.0 * ex.std_error + 1e-12);
    }

    #[test]
    fn exact_at_zero_gain_is_log_cardinality() {
        let qpsk = standard_constellation(ConstellationKind::Qpsk);
        let eff = effective_points(&[c(0.0, 0.0)], &[&qpsk]);
        let est = cond_entropy_exact(&eff, NoiseModel::new(1.0).unwrap(), McConfig::default());
        assert!((est.estimate - 2.0).abs() <= 3.0 * est.std_error + 1e-12, "{est:?}");
    }

    #[test]
    fn exact_is_deterministic_per_seed() {
        let q = standard_constellation(ConstellationKind::Qpsk);
        let eff = effective_points(&[c(0.7, 0.2)], &[&q]);
        let noise = NoiseModel::new(0.5).unwrap();
        let mc = McConfig { samples: 300, seed: 9 };
        assert_eq!(cond_entropy_exact(&eff, noise, mc), cond_entropy_exact(&eff, noise, mc));
        let other = cond_entropy_exact(&eff, noise, McConfig { samples: 300, seed: 10 });
        assert_ne!(other.estimate, cond_entropy_exact(&eff, noise, mc).estimate);
    }

    #[test]
    fn large_point_sets_take_uncached_path() {
        let q16 = standard_constellation(ConstellationKind::Qam16);
        let gains = [c(0.8, 0.1), c(0.2, -0.3), c(0.05, 0.4)];
        let eff = effective_points(&gains, &[&q16, &q16, &q16]);
        assert!(eff.len() > SYMMETRIC_CACHE_LIMIT);
        let noise = NoiseModel::new(0.2).unwrap();
        let h = cond_entropy_approx(&eff, noise);
        // brute force over the same points
        let m = eff.len();
        let brute: f64 = eff
            .points
            .iter()
            .map(|&a| {
                eff.points
                    .iter()
                    .map(|&b| (-(a - b).norm_sqr() / 0.4).exp())
                    .sum::<f64>()
                    .log2()
            })
            .sum::<f64>()
            / m as f64;
        assert!((h - brute).abs() < 1e-9);
    }

    #[test]
    fn scalar_bpsk_gradient_matches_calculus() {
        // H(g) = log2(1 + exp(-2 g² / σ²)) for real g
        let bpsk = standard_constellation(ConstellationKind::Bpsk);
        for &(g, s2) in &[(0.3, 1.0), (1.1, 0.5), (0.05, 2.0)] {
            let noise = NoiseModel::new(s2).unwrap();
            let (_, grad) = entropy_approx_with_gain_grad(&[c(g, 0.0)], &[&bpsk], noise);
            let e = (-2.0 * g * g / s2).exp();
            let dh = -(4.0 * g / s2) * e / ((1.0 + e) * LN_2);
            assert!((grad[0].re - dh).abs() < 1e-8, "g={g}: {} vs {dh}", grad[0].re);
            assert!(grad[0].im.abs() < 1e-12);
        }
    }
}
