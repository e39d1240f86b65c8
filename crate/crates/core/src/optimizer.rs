//! Projected subgradient ascent on the power sphere `‖P‖_F² = P_T`, with
//! the projection-aware backtracking line search.
//!
//! The variable is a list of complex blocks so the same loop drives a plain
//! precoder (one block) and grouped reduced precoders (one block per group)
//! under a single shared power budget.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::allocation::CommonAllocation;
use crate::constellation::{TransmissionMode, DEFAULT_PAIR_BUDGET};
use crate::entropy::NoiseModel;
use crate::error::{Error, Result};
use crate::layout::{frobenius_sq, real_inner, CMatrix, CVector};
use crate::problem::{Block, Goal, RsmaProblem};
use crate::rate::Receiver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Wsr,
    Mmf,
}

/// How the MMF subgradient weights the common-rate gradient of user `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommonShareWeight {
    /// `c_k / R_c`: user `k`'s fraction of the common rate.
    Fraction,
    /// `c_k` in bits, as written in the subgradient formula.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub p_t: f64,
    pub epsilon: f64,
    pub v_max: usize,
    pub alpha: f64,
    pub beta: f64,
    pub t_min: f64,
    /// First step length tried by every line search.
    pub t_init: f64,
    /// Log-sum-exp sharpness for max-min fairness, negative.
    pub gamma: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Drop the radial part of the ascent direction before the line search.
    pub tangent_direction: bool,
    /// Multiply `t_init` and `t_min` by `p_t` inside the ascent loop, so the
    /// step on the unit-power sphere does not depend on the budget.
    pub scale_step_with_power: bool,
    pub share_weight: CommonShareWeight,
    pub pair_budget: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            p_t: 1.0,
            epsilon: 1e-4,
            v_max: 500,
            alpha: 0.3,
            beta: 0.5,
            t_min: 1e-8,
            t_init: 1.0,
            gamma: -30.0,
            restarts: 2,
            seed: 0,
            tangent_direction: true,
            scale_step_with_power: true,
            share_weight: CommonShareWeight::Fraction,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

impl OptimizerConfig {
    pub fn with_power(mut self, p_t: f64) -> Self {
        self.p_t = p_t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("optimizer.{what}")));
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return bad("p_t must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.v_max == 0 {
            return bad("v_max must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha must lie in (0, 0.5)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.t_min > 0.0) || !(self.t_init > self.t_min) {
            return bad("t_min must be positive and below t_init");
        }
        if !(self.gamma < 0.0) {
            return bad("gamma must be negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// Full `N_T x S` precoder (expanded when the problem is grouped).
    #[serde(skip)]
    pub precoder: CMatrix,
    #[serde(skip)]
    pub blocks: Vec<CMatrix>,
    pub allocation: CommonAllocation,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Per-user approximate totals `c_k + R_p,k` at the returned precoder.
    pub user_rates: Vec<f64>,
    /// `Σ ‖common columns‖² / P_T`.
    pub common_power_ratio: f64,
}

impl OptimizeResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// A real objective on block variables with an ascent direction.
pub trait Objective {
    fn value(&self, x: &[CMatrix]) -> f64;
    fn value_and_direction(&self, x: &[CMatrix]) -> (f64, Vec<CMatrix>);
}

pub fn blocks_norm_sq(x: &[CMatrix]) -> f64 {
    x.iter().map(frobenius_sq).sum()
}

pub fn project_power(p: &CMatrix, p_t: f64) -> Result<CMatrix> {
    let mut out = project_blocks(std::slice::from_ref(p), p_t)?;
    Ok(out.remove(0))
}

/// `(sqrt(P_T) / ‖X‖_F) X` over all blocks jointly.
pub fn project_blocks(x: &[CMatrix], p_t: f64) -> Result<Vec<CMatrix>> {
    let n = blocks_norm_sq(x).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate("cannot project a zero precoder onto the power sphere".into()));
    }
    let s = p_t.sqrt() / n;
    Ok(x.iter().map(|b| b * Complex64::new(s, 0.0)).collect())
}

fn axpy(x: &[CMatrix], t: f64, d: &[CMatrix]) -> Vec<CMatrix> {
    x.iter()
        .zip(d)
        .map(|(a, b)| a + b * Complex64::new(t, 0.0))
        .collect()
}

/// Remove the component of `d` along `x` (the sphere's normal).
pub fn tangent_part(x: &[CMatrix], d: &[CMatrix]) -> Vec<CMatrix> {
    let nx = blocks_norm_sq(x);
    if nx == 0.0 {
        return d.to_vec();
    }
    let along: f64 = x.iter().zip(d).map(|(a, b)| real_inner(a, b)).sum::<f64>() / nx;
    axpy(d, -along, x)
}

#[derive(Debug, Clone)]
pub struct LineSearch {
    pub t: f64,
    pub value: f64,
    pub point: Vec<CMatrix>,
}

/// Backtracking with projection: shrink `t` by `β` while
/// `f(proj(X + tΔ)) <= f(X) + α t ‖Δ‖²` and `t > t_min`; a step that
/// reaches `t_min` is rejected (`t = 0`, point unchanged).
pub fn backtracking_search<F>(
    x: &[CMatrix],
    f_x: f64,
    delta: &[CMatrix],
    f: F,
    cfg: &OptimizerConfig,
) -> LineSearch
where
    F: Fn(&[CMatrix]) -> f64,
{
    let d2 = blocks_norm_sq(delta);
    let mut t = cfg.t_init;
    let mut accepted = None;
    while t > cfg.t_min {
        let candidate = project_blocks(&axpy(x, t, delta), cfg.p_t).ok();
        let value = candidate.as_ref().map_or(f64::NEG_INFINITY, |c| f(c));
        if value > f_x + cfg.alpha * t * d2 {
            accepted = candidate.map(|c| (c, value));
            break;
        }
        t *= cfg.beta;
    }
    match accepted {
        Some((point, value)) => LineSearch { t, value, point },
        None => LineSearch {
            t: 0.0,
            value: f_x,
            point: x.to_vec(),
        },
    }
}

/// Step length only; see [`backtracking_search`].
pub fn backtracking_step<F>(p: &CMatrix, delta: &CMatrix, objective: F, cfg: &OptimizerConfig) -> f64
where
    F: Fn(&CMatrix) -> f64,
{
    let f0 = objective(p);
    backtracking_search(
        std::slice::from_ref(p),
        f0,
        std::slice::from_ref(delta),
        |x| objective(&x[0]),
        cfg,
    )
    .t
}

#[derive(Debug, Clone)]
pub struct AscentRun {
    pub point: Vec<CMatrix>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected subgradient ascent from `init` until the objective changes by
/// less than `ε` or `v_max` iterations have run.
pub fn projected_subgradient_ascent<O: Objective + ?Sized>(
    objective: &O,
    init: &[CMatrix],
    cfg: &OptimizerConfig,
) -> Result<AscentRun> {
    let mut x = project_blocks(init, cfg.p_t)?;
    let step_cfg = if cfg.scale_step_with_power {
        OptimizerConfig {
            t_init: cfg.t_init * cfg.p_t,
            t_min: cfg.t_min * cfg.p_t,
            ..*cfg
        }
    } else {
        *cfg
    };
    let mut f_x = objective.value(&x);
    let mut trace = vec![f_x];
    let mut v = 0;
    let mut converged = false;
    while v < cfg.v_max {
        let (_, mut delta) = objective.value_and_direction(&x);
        if cfg.tangent_direction {
            delta = tangent_part(&x, &delta);
        }
        let step = backtracking_search(&x, f_x, &delta, |c| objective.value(c), &step_cfg);
        let previous = f_x;
        if step.t > 0.0 {
            x = step.point;
            f_x = step.value;
        }
        trace.push(f_x);
        v += 1;
        if (f_x - previous).abs() < cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(AscentRun {
        point: x,
        trace,
        iterations: v,
        converged,
    })
}

/// Circular Gaussian blocks with the given shapes, seeded per restart.
pub fn random_blocks(shapes: &[(usize, usize)], seed: u64, restart: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(restart + 1);
    shapes
        .iter()
        .map(|&(r, c)| {
            CMatrix::from_fn(r, c, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
        })
        .collect()
}

/// Runs the deterministic start plus `cfg.restarts` random starts and keeps
/// the best final objective (first wins on ties).
pub fn best_of_starts<O: Objective + ?Sized>(
    objective: &O,
    deterministic: Vec<CMatrix>,
    cfg: &OptimizerConfig,
) -> Result<AscentRun> {
    let shapes: Vec<_> = deterministic.iter().map(|b| (b.nrows(), b.ncols())).collect();
    let mut best = projected_subgradient_ascent(objective, &deterministic, cfg)?;
    for r in 0..cfg.restarts {
        let init = random_blocks(&shapes, cfg.seed, r as u64);
        let run = projected_subgradient_ascent(objective, &init, cfg)?;
        if run.trace.last() > best.trace.last() {
            best = run;
        }
    }
    Ok(best)
}

/// Matched-filter privates with equal power, common column along the
/// dominant left singular vector of the block's channel matrix, 50/50
/// common/private power when both exist. Block `i` gets power in
/// proportion to its user count.
pub fn initial_blocks(problem: &RsmaProblem, p_t: f64) -> Vec<CMatrix> {
    let k = problem.k as f64;
    problem
        .blocks
        .iter()
        .map(|b| {
            let power = p_t * b.users.len() as f64 / k;
            initial_block(b, power)
        })
        .collect()
}

fn unit(v: CVector) -> Option<CVector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / Complex64::new(n, 0.0))
}

fn initial_block(b: &Block, power: f64) -> CMatrix {
    let d = b.dim();
    let layout = &b.layout;
    let mut v = CMatrix::zeros(d, layout.n_streams());
    let privates: Vec<(usize, usize)> = (0..layout.n_users())
        .filter_map(|j| layout.user(j).private.map(|a| (j, a)))
        .collect();
    let common = layout.common_streams().next();
    let (pc, pp) = match (common.is_some(), privates.is_empty()) {
        (true, false) => (0.5 * power, 0.5 * power),
        (true, true) => (power, 0.0),
        _ => (0.0, power),
    };
    let fallback = || CVector::from_element(d, Complex64::new(1.0 / (d as f64).sqrt(), 0.0));
    if let Some(a) = common {
        let h = CMatrix::from_columns(&b.channels);
        let dir = h
            .svd(true, false)
            .u
            .and_then(|u| unit(u.column(0).into_owned()))
            .unwrap_or_else(fallback);
        v.set_column(a, &(dir * Complex64::new(pc.sqrt(), 0.0)));
    }
    if !privates.is_empty() {
        let each = (pp / privates.len() as f64).sqrt();
        for (j, a) in privates {
            let dir = unit(b.channels[j].clone()).unwrap_or_else(fallback);
            v.set_column(a, &(dir * Complex64::new(each, 0.0)));
        }
    }
    v
}

fn common_power(problem: &RsmaProblem, x: &[CMatrix]) -> f64 {
    problem
        .blocks
        .iter()
        .zip(x)
        .map(|(b, v)| b.layout.common_streams().map(|a| v.column(a).norm_squared()).fold(0.0, |s, x| s + x))
        .fold(0.0, |s, x| s + x)
}

/// Runs the ascent on any block problem. `precoder` holds the first block;
/// grouped callers expand it themselves.
pub fn optimize_problem(problem: &RsmaProblem, cfg: &OptimizerConfig, init: Option<Vec<CMatrix>>) -> Result<OptimizeResult> {
    cfg.validate()?;
    for b in &problem.blocks {
        b.layout.check_tractable(cfg.pair_budget)?;
    }
    let shapes = problem.shapes();
    let start = match init {
        Some(x) => {
            if x.len() != shapes.len() || x.iter().zip(&shapes).any(|(m, &(r, c))| m.nrows() != r || m.ncols() != c) {
                return Err(Error::Dimension("initial precoder does not match the problem".into()));
            }
            x
        }
        None => initial_blocks(problem, cfg.p_t),
    };
    let run = best_of_starts(problem, start, cfg)?;
    let rates = problem.rates(&run.point);
    let allocation = problem.allocation(&rates);
    let user_rates = problem.user_totals(&rates, &allocation);
    Ok(OptimizeResult {
        precoder: run.point[0].clone(),
        common_power_ratio: common_power(problem, &run.point) / cfg.p_t,
        blocks: run.point,
        allocation,
        objective_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        user_rates,
    })
}

fn check_channels(channels: &[CVector]) -> Result<()> {
    let Some(first) = channels.first() else {
        return Err(Error::Dimension("no users".into()));
    };
    if first.is_empty() || channels.iter().any(|h| h.len() != first.len()) {
        return Err(Error::Dimension("channels must share a nonzero length".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn optimize_wsr(
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    weights: &[f64],
    noise: NoiseModel,
    cfg: &OptimizerConfig,
    init: Option<&CMatrix>,
) -> Result<OptimizeResult> {
    check_channels(channels)?;
    let goal = Goal::Wsr { weights: weights.to_vec() };
    let problem = RsmaProblem::single(channels, mode, rx, noise, goal)?;
    optimize_problem(&problem, cfg, init.map(|p| vec![p.clone()]))
}

pub fn optimize_mmf(
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    noise: NoiseModel,
    cfg: &OptimizerConfig,
    init: Option<&CMatrix>,
) -> Result<OptimizeResult> {
    check_channels(channels)?;
    let goal = Goal::Mmf {
        gamma: cfg.gamma,
        share: cfg.share_weight,
    };
    let problem = RsmaProblem::single(channels, mode, rx, noise, goal)?;
    optimize_problem(&problem, cfg, init.map(|p| vec![p.clone()]))
}

/// WSR ascent direction at `p`.
pub fn wsr_subgradient(
    p: &CMatrix,
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    weights: &[f64],
    noise: NoiseModel,
) -> Result<CMatrix> {
    check_channels(channels)?;
    let problem = RsmaProblem::single(channels, mode, rx, noise, Goal::Wsr { weights: weights.to_vec() })?;
    problem.blocks[0].layout.check_precoder(p, channels[0].len())?;
    Ok(problem.value_and_direction(std::slice::from_ref(p)).1.remove(0))
}

/// Log-sum-exp surrogate of the minimum user rate for a fixed common
/// allocation `c`, with its subgradient.
#[allow(clippy::too_many_arguments)]
pub fn mmf_objective_lse(
    p: &CMatrix,
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    c: &CommonAllocation,
    noise: NoiseModel,
    gamma: f64,
    share: CommonShareWeight,
) -> Result<(f64, CMatrix)> {
    check_channels(channels)?;
    if !(gamma < 0.0) {
        return Err(Error::Config("gamma must be negative".into()));
    }
    if c.c.len() != channels.len() {
        return Err(Error::Dimension("allocation length differs from user count".into()));
    }
    let problem = RsmaProblem::single(channels, mode, rx, noise, Goal::Mmf { gamma, share })?;
    problem.blocks[0].layout.check_precoder(p, channels[0].len())?;
    let (v, mut d) = problem.lse_value_and_direction(std::slice::from_ref(p), c, gamma, share);
    Ok((v, d.remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn projection_examples() {
        let p = CMatrix::from_element(2, 2, c(1.0)); // ‖P‖² = 4
        let q = project_power(&p, 1.0).unwrap();
        assert!((frobenius_sq(&q) - 1.0).abs() < 1e-15);
        assert!((q[(0, 0)] - c(0.5)).norm() < 1e-15);
        let again = project_power(&q, 1.0).unwrap();
        assert!((&again - &q).norm() < 1e-15);
        assert!(project_power(&CMatrix::zeros(2, 2), 1.0).is_err());
    }

    #[test]
    fn zero_direction_is_rejected() {
        let cfg = OptimizerConfig::default();
        let p = CMatrix::from_element(1, 2, c(0.5f64.sqrt()));
        let d = CMatrix::zeros(1, 2);
        let t = backtracking_step(&p, &d, |x| x[(0, 0)].re, &cfg);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn constant_objective_gives_zero_step() {
        let cfg = OptimizerConfig::default();
        let p = CMatrix::from_element(1, 2, c(0.5f64.sqrt()));
        let d = CMatrix::from_row_slice(1, 2, &[c(1.0), c(-1.0)]);
        assert_eq!(backtracking_step(&p, &d, |_| 3.0, &cfg), 0.0);
    }

    #[test]
    fn concave_quadratic_trace() {
        // f(P) = -(x0 - 0.9)² on the unit circle {x0² + x1² = 1}
        let cfg = OptimizerConfig {
            alpha: 0.3,
            beta: 0.5,
            ..OptimizerConfig::default()
        };
        let f = |p: &CMatrix| -(p[(0, 0)].re - 0.9).powi(2);
        let p = CMatrix::from_row_slice(1, 2, &[c(0.0), c(1.0)]);
        let d = CMatrix::from_row_slice(1, 2, &[c(2.0 * 0.9), c(0.0)]); // gradient at P
        let t = backtracking_step(&p, &d, f, &cfg);
        assert!(t > 0.0);
        // the accepted t is the first tested that satisfies the condition
        let cond = |t: f64| {
            let q = project_power(&(&p + &d * c(t)), 1.0).unwrap();
            f(&q) > f(&p) + cfg.alpha * t * frobenius_sq(&d)
        };
        assert!(cond(t));
        let mut s = 1.0;
        while s > t * 1.5 {
            assert!(!cond(s));
            s *= cfg.beta;
        }
        let q = project_power(&(&p + &d * c(t)), 1.0).unwrap();
        assert!(f(&q) >= f(&p));
    }

    #[test]
    fn tangent_part_is_orthogonal() {
        let x = vec![CMatrix::from_row_slice(1, 2, &[Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.7)])];
        let d = vec![CMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, -0.5), Complex64::new(0.2, 0.1)])];
        let t = tangent_part(&x, &d);
        assert!(real_inner(&x[0], &t[0]).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { alpha: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { gamma: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
