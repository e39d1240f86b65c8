//! SDMA and two-user power-domain NOMA under the same finite alphabets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::allocation::CommonAllocation;
use crate::constellation::{effective_points, Constellation, ModeDictionary};
use crate::entropy::{
    approx_from_points, entropy_approx_with_gain_grad, exact_per_sample, mean_and_stderr, McConfig, NoiseModel,
};
use crate::error::{Error, Result};
use crate::layout::{gains, CMatrix, CVector};
use crate::optimizer::{
    best_of_starts, optimize_mmf, optimize_wsr, ObjectiveKind, Objective, OptimizeResult,
    OptimizerConfig,
};
use crate::rate::{RateMethod, Receiver};

/// RSMA pinned to the dictionary's first mode, which has no common stream.
#[allow(clippy::too_many_arguments)]
pub fn sdma_optimize(
    channels: &[CVector],
    dict: &ModeDictionary,
    objective: ObjectiveKind,
    weights: Option<&[f64]>,
    noise: NoiseModel,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    let mode = dict.sdma_mode()?;
    // without a common stream both receivers coincide
    match objective {
        ObjectiveKind::Wsr => {
            let ones = vec![1.0; channels.len()];
            optimize_wsr(channels, mode, Receiver::Sic, weights.unwrap_or(&ones), noise, cfg, None)
        }
        ObjectiveKind::Mmf => optimize_mmf(channels, mode, Receiver::Sic, noise, cfg, None),
    }
}

/// Stronger user by `‖h‖²`, lower index on ties.
pub fn noma_order(channels: &[CVector]) -> Result<(usize, usize)> {
    if channels.len() != 2 {
        return Err(Error::Unsupported(format!("NOMA is defined for two users, got {}", channels.len())));
    }
    if channels[0].norm_squared() >= channels[1].norm_squared() {
        Ok((0, 1))
    } else {
        Ok((1, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NomaRates {
    pub strong: usize,
    pub weak: usize,
    /// `I(s_w; y_w)`, the weak user decoding its own stream under interference.
    pub weak_at_weak: f64,
    /// `I(s_w; y_s)`, the strong user decoding the weak stream first.
    pub weak_at_strong: f64,
    /// `I(s_s; y_s | s_w)`, after cancelling the weak stream.
    pub strong_rate: f64,
    pub weak_rate: f64,
    /// Monte-Carlo standard errors of the two reported rates, zero for the
    /// approximate method.
    pub strong_stderr: f64,
    pub weak_stderr: f64,
}

impl NomaRates {
    /// Rates in user order.
    pub fn per_user(&self) -> [f64; 2] {
        let mut r = [0.0; 2];
        r[self.strong] = self.strong_rate;
        r[self.weak] = self.weak_rate;
        r
    }
}

/// Entropy terms at one receiver: `(H({w, s}), H({s}))`. Precoder column
/// `a` belongs to user `a`.
fn noma_entropies(
    g: &[Complex64],
    strong: usize,
    x: &Constellation,
    method: RateMethod,
    noise: NoiseModel,
    draws: Option<&[Complex64]>,
) -> (Vec<f64>, Vec<f64>) {
    let both = effective_points(g, &[x, x]);
    let only_s = effective_points(&[g[strong]], &[x]);
    match method {
        RateMethod::Approx => (
            vec![approx_from_points(&both.points, noise.sigma2())],
            vec![approx_from_points(&only_s.points, noise.sigma2())],
        ),
        RateMethod::Exact => {
            let d = draws.expect("exact NOMA rates need noise draws");
            (
                exact_per_sample(&both.points, noise.sigma2(), d),
                exact_per_sample(&only_s.points, noise.sigma2(), d),
            )
        }
    }
}

/// NOMA rates with the private alphabet `x` on both streams, clamped to
/// `[0, log2|X|]`.
pub fn noma_rates(
    p: &CMatrix,
    channels: &[CVector],
    x: &Constellation,
    method: RateMethod,
    noise: NoiseModel,
    mc: Option<McConfig>,
) -> Result<NomaRates> {
    let (strong, weak) = noma_order(channels)?;
    if p.ncols() != 2 || p.nrows() != channels[0].len() {
        return Err(Error::Dimension("NOMA precoder is N_T x 2".into()));
    }
    let draws = match method {
        RateMethod::Exact => {
            let mc = mc.unwrap_or_default();
            mc.validate()?;
            Some(mc.unit_draws())
        }
        RateMethod::Approx => None,
    };
    let log_x = x.log2_len();
    let (hw_all, hw_s) = noma_entropies(&gains(&channels[weak], p), strong, x, method, noise, draws.as_deref());
    let (hs_all, hs_s) = noma_entropies(&gains(&channels[strong], p), strong, x, method, noise, draws.as_deref());
    let est = |f: &dyn Fn(usize) -> f64, n: usize| {
        let v: Vec<f64> = (0..n).map(f).collect();
        let m = mean_and_stderr(&v);
        (m.estimate.clamp(0.0, log_x), m.std_error)
    };
    let n = hw_all.len();
    let (weak_at_weak, se_ww) = est(&|i| log_x - hw_all[i] + hw_s[i], n);
    let (weak_at_strong, se_ws) = est(&|i| log_x - hs_all[i] + hs_s[i], n);
    // a single-stream set at the strong user: I(s_s; y_s | s_w) = log|X| - H({s})
    let (strong_rate, strong_stderr) = est(&|i| log_x - hs_s[i], n);
    let weak_stderr = if weak_at_weak <= weak_at_strong { se_ww } else { se_ws };
    Ok(NomaRates {
        strong,
        weak,
        weak_at_weak,
        weak_at_strong,
        strong_rate,
        weak_rate: weak_at_weak.min(weak_at_strong),
        strong_stderr,
        weak_stderr,
    })
}

/// Approximate NOMA objective for the ascent loop.
struct NomaProblem {
    channels: Vec<CVector>,
    x: Constellation,
    strong: usize,
    weak: usize,
    noise: NoiseModel,
    objective: ObjectiveKind,
    weights: [f64; 2],
}

struct Term {
    value: f64,
    grad: CMatrix,
}

impl NomaProblem {
    /// `log|X| - H(all) + H({s})` or `log|X| - H({s})` at receiver `rx`,
    /// with gradient.
    fn term(&self, p: &CMatrix, rx: usize, with_all: bool) -> Term {
        let h = &self.channels[rx];
        let g = gains(h, p);
        let x = &self.x;
        let (hs, dgs) = entropy_approx_with_gain_grad(&[g[self.strong]], &[x], self.noise);
        let mut dg = [Complex64::new(0.0, 0.0); 2];
        dg[self.strong] = dgs[0];
        let mut value = x.log2_len() + if with_all { hs } else { -hs };
        if with_all {
            let (ha, dga) = entropy_approx_with_gain_grad(&g, &[x, x], self.noise);
            value -= ha;
            dg[0] -= dga[0];
            dg[1] -= dga[1];
        } else {
            dg[self.strong] = -dg[self.strong];
        }
        let mut grad = CMatrix::zeros(p.nrows(), 2);
        for (a, d) in dg.iter().enumerate() {
            grad.set_column(a, &h.map(|hi| hi * d));
        }
        Term { value, grad }
    }

    fn terms(&self, p: &CMatrix) -> (Term, Term, Term) {
        (
            self.term(p, self.weak, true),
            self.term(p, self.strong, true),
            self.term(p, self.strong, false),
        )
    }

    fn combine(&self, ww: f64, ws: f64, s: f64) -> f64 {
        let weak = ww.min(ws);
        match self.objective {
            ObjectiveKind::Wsr => self.weights[self.weak] * weak + self.weights[self.strong] * s,
            ObjectiveKind::Mmf => weak.min(s),
        }
    }
}

impl Objective for NomaProblem {
    fn value(&self, x: &[CMatrix]) -> f64 {
        let (a, b, c) = self.terms(&x[0]);
        self.combine(a.value, b.value, c.value)
    }

    fn value_and_direction(&self, x: &[CMatrix]) -> (f64, Vec<CMatrix>) {
        let (ww, ws, s) = self.terms(&x[0]);
        let value = self.combine(ww.value, ws.value, s.value);
        let weak = if ww.value <= ws.value { &ww } else { &ws };
        let dir = match self.objective {
            ObjectiveKind::Wsr => {
                &weak.grad * Complex64::new(self.weights[self.weak], 0.0)
                    + &s.grad * Complex64::new(self.weights[self.strong], 0.0)
            }
            ObjectiveKind::Mmf => {
                if weak.value <= s.value {
                    weak.grad.clone()
                } else {
                    s.grad.clone()
                }
            }
        };
        (value, vec![dir])
    }
}

/// Two-user NOMA with the SDMA private alphabet, precoders optimized by the
/// same projected ascent on the approximate rates.
#[allow(clippy::too_many_arguments)]
pub fn noma_two_user(
    channels: &[CVector],
    dict: &ModeDictionary,
    objective: ObjectiveKind,
    weights: Option<&[f64]>,
    noise: NoiseModel,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    let (strong, weak) = noma_order(channels)?;
    let x = dict
        .sdma_mode()?
        .private
        .clone()
        .ok_or_else(|| Error::Config("SDMA mode has no private constellation".into()))?;
    let weights = match weights {
        Some(w) if w.len() == 2 => [w[0], w[1]],
        Some(_) => return Err(Error::Dimension("NOMA takes two weights".into())),
        None => [1.0, 1.0],
    };
    let problem = NomaProblem {
        channels: channels.to_vec(),
        x,
        strong,
        weak,
        noise,
        objective,
        weights,
    };
    // matched filters, more power to the weak user
    let n_t = channels[0].len();
    let mut init = CMatrix::zeros(n_t, 2);
    for (user, share) in [(weak, 0.7), (strong, 0.3)] {
        let h = &channels[user];
        let n = h.norm();
        let dir = if n > 0.0 {
            h / Complex64::new(n, 0.0)
        } else {
            CVector::from_element(n_t, Complex64::new(1.0 / (n_t as f64).sqrt(), 0.0))
        };
        init.set_column(user, &(dir * Complex64::new((share * cfg.p_t).sqrt(), 0.0)));
    }
    let run = best_of_starts(&problem, vec![init], cfg)?;
    let p = run.point[0].clone();
    let (a, b, c) = problem.terms(&p);
    let weak_rate = a.value.min(b.value);
    let mut user_rates = vec![0.0; 2];
    user_rates[weak] = weak_rate;
    user_rates[strong] = c.value;
    Ok(OptimizeResult {
        precoder: p,
        blocks: run.point,
        allocation: CommonAllocation::zeros(2),
        objective_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        user_rates,
        common_power_ratio: 0.0,
    })
}
