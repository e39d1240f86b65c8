//! Shared helpers for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsma::layout::{CMatrix, CVector};
use rsma::optimizer::project_power;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    // Box-Muller, kept local so the oracles do not share the library's sampler
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * u2)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cn(rng))
}

pub fn random_channels<R: Rng>(rng: &mut R, n_t: usize, k: usize) -> Vec<CVector> {
    (0..k).map(|_| random_vector(rng, n_t)).collect()
}

pub fn random_precoder<R: Rng>(rng: &mut R, n_t: usize, cols: usize, p_t: f64) -> CMatrix {
    project_power(&CMatrix::from_fn(n_t, cols, |_, _| cn(rng)), p_t).unwrap()
}

/// Central differences of `f` along the real and imaginary part of every
/// entry, packed as `∂f/∂Re + j ∂f/∂Im`.
pub fn fd_gradient<F: Fn(&CMatrix) -> f64>(p: &CMatrix, step: f64, f: F) -> CMatrix {
    let mut g = CMatrix::zeros(p.nrows(), p.ncols());
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let mut d = [0.0; 2];
            for (part, unit) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                let mut plus = p.clone();
                let mut minus = p.clone();
                plus[(i, j)] += unit * step;
                minus[(i, j)] -= unit * step;
                d[part] = (f(&plus) - f(&minus)) / (2.0 * step);
            }
            g[(i, j)] = Complex64::new(d[0], d[1]);
        }
    }
    g
}

/// `max |a - b| / max |b|` over entries.
pub fn rel_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    diff / scale.max(1e-300)
}

/// Mean and standard error, computed here rather than through the library.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// `(1/|X|) Σ_m E_n log2 Σ_l exp(-(|x_m - x_l + n|² - |n|²)/σ²)` by a
/// trapezoid rule over the complex noise plane.
pub fn quadrature_entropy(points: &[Complex64], sigma2: f64) -> f64 {
    let half = 9.0 * (sigma2 / 2.0).sqrt();
    let n = 601;
    let h = 2.0 * half / (n - 1) as f64;
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            let z = Complex64::new(-half + a as f64 * h, -half + b as f64 * h);
            let w = (-z.norm_sqr() / sigma2).exp() / (std::f64::consts::PI * sigma2) * h * h;
            let mut per_m = 0.0;
            for xm in points {
                let e: Vec<f64> = points.iter().map(|xl| -((xm - xl + z).norm_sqr() - z.norm_sqr()) / sigma2).collect();
                let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                per_m += (mx + e.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()) / std::f64::consts::LN_2;
            }
            total += w * per_m / points.len() as f64;
        }
    }
    total
}
