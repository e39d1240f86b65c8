//! WSR and MMF objectives over one or more precoder blocks.
//!
//! Each block serves a group of users through its own (possibly reduced)
//! channels and a single-group stream layout. Plain problems have one block
//! holding every user.

use num_complex::Complex64;

use crate::allocation::{argmax_lowest, argmin_lowest, mmf_allocation, wsr_allocation, CommonAllocation};
use crate::constellation::TransmissionMode;
use crate::entropy::NoiseModel;
use crate::error::{Error, Result};
use crate::layout::{gains, CMatrix, CVector, StreamLayout};
use crate::optimizer::{CommonShareWeight, Objective};
use crate::rate::{approx_user_eval, approx_user_value, Receiver, UserEval};

#[derive(Debug, Clone)]
pub struct Block {
    /// Global user indices served by this block.
    pub users: Vec<usize>,
    /// Channels seen by the block variable, in `users` order.
    pub channels: Vec<CVector>,
    pub layout: StreamLayout,
}

impl Block {
    pub fn new(users: Vec<usize>, channels: Vec<CVector>, mode: &TransmissionMode) -> Self {
        let layout = StreamLayout::single_group(mode, users.len());
        Block { users, channels, layout }
    }

    pub fn dim(&self) -> usize {
        self.channels[0].len()
    }

    pub fn has_common(&self) -> bool {
        self.layout.common_streams().next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    Wsr { weights: Vec<f64> },
    Mmf { gamma: f64, share: CommonShareWeight },
}

#[derive(Debug, Clone)]
pub struct RsmaProblem {
    pub blocks: Vec<Block>,
    pub k: usize,
    pub rx: Receiver,
    pub noise: NoiseModel,
    pub goal: Goal,
}

/// Unclamped approximate rates of every block at a point.
#[derive(Debug, Clone)]
pub struct BlockRates {
    /// Per local user.
    pub r_c: Vec<f64>,
    pub r_p: Vec<f64>,
}

impl BlockRates {
    /// Worst-user common rate, zero without a common stream.
    pub fn common(&self, has_common: bool) -> f64 {
        if has_common {
            self.r_c.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            0.0
        }
    }
}

impl RsmaProblem {
    pub fn single(channels: &[CVector], mode: &TransmissionMode, rx: Receiver, noise: NoiseModel, goal: Goal) -> Result<Self> {
        let k = channels.len();
        if k == 0 {
            return Err(Error::Dimension("no users".into()));
        }
        let block = Block::new((0..k).collect(), channels.to_vec(), mode);
        Self::from_blocks(vec![block], k, rx, noise, goal)
    }

    pub fn from_blocks(blocks: Vec<Block>, k: usize, rx: Receiver, noise: NoiseModel, goal: Goal) -> Result<Self> {
        if let Goal::Wsr { weights } = &goal {
            if weights.len() != k {
                return Err(Error::Dimension(format!("{} weights for {k} users", weights.len())));
            }
            if weights.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::Config("weights must be nonnegative".into()));
            }
        }
        for b in &blocks {
            if b.layout.n_streams() == 0 {
                return Err(Error::Config("mode has no streams".into()));
            }
            let d = b.dim();
            if b.channels.iter().any(|h| h.len() != d) {
                return Err(Error::Dimension("channels of one block differ in length".into()));
            }
        }
        Ok(RsmaProblem { blocks, k, rx, noise, goal })
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.dim(), b.layout.n_streams())).collect()
    }

    pub fn rates(&self, x: &[CMatrix]) -> Vec<BlockRates> {
        self.blocks
            .iter()
            .zip(x)
            .map(|(b, v)| {
                let (r_c, r_p) = b
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(j, h)| approx_user_value(&gains(h, v), &b.layout, j, self.rx, self.noise))
                    .unzip();
                BlockRates { r_c, r_p }
            })
            .collect()
    }

    fn weights_of(&self, b: &Block) -> Vec<f64> {
        match &self.goal {
            Goal::Wsr { weights } => b.users.iter().map(|&u| weights[u]).collect(),
            Goal::Mmf { .. } => vec![1.0; b.users.len()],
        }
    }

    /// Common-rate split per user (global order) for the given rates.
    pub fn allocation(&self, rates: &[BlockRates]) -> CommonAllocation {
        let mut c = CommonAllocation::zeros(self.k);
        for (b, r) in self.blocks.iter().zip(rates) {
            let r_c = r.common(b.has_common());
            let local = match self.goal {
                Goal::Wsr { .. } => wsr_allocation(&self.weights_of(b), r_c),
                Goal::Mmf { .. } => mmf_allocation(r_c.max(0.0), &r.r_p).0,
            };
            for (j, &u) in b.users.iter().enumerate() {
                c.c[u] = local.c[j];
            }
        }
        c
    }

    /// Per-user totals `c_k + R_p,k` in global order.
    pub fn user_totals(&self, rates: &[BlockRates], alloc: &CommonAllocation) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (b, r) in self.blocks.iter().zip(rates) {
            for (j, &u) in b.users.iter().enumerate() {
                out[u] = alloc.c[u] + r.r_p[j];
            }
        }
        out
    }

    pub fn value_of_rates(&self, rates: &[BlockRates]) -> f64 {
        match &self.goal {
            Goal::Wsr { .. } => self
                .blocks
                .iter()
                .zip(rates)
                .map(|(b, r)| {
                    let u = self.weights_of(b);
                    let u_max = u[argmax_lowest(&u)];
                    u_max * r.common(b.has_common()) + u.iter().zip(&r.r_p).map(|(w, p)| w * p).sum::<f64>()
                })
                .sum(),
            Goal::Mmf { .. } => self
                .blocks
                .iter()
                .zip(rates)
                .map(|(b, r)| mmf_allocation(r.common(b.has_common()).max(0.0), &r.r_p).1)
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn evals(&self, x: &[CMatrix]) -> Vec<Vec<UserEval>> {
        self.blocks
            .iter()
            .zip(x)
            .map(|(b, v)| {
                b.channels
                    .iter()
                    .enumerate()
                    .map(|(j, h)| approx_user_eval(&gains(h, v), &b.layout, j, self.rx, self.noise))
                    .collect()
            })
            .collect()
    }

    /// Adds `weight · ∇_V` of the rate whose gain-gradient is `dg` for a
    /// user with channel `h`.
    fn accumulate(out: &mut CMatrix, h: &CVector, dg: &[Complex64], weight: f64) {
        if weight == 0.0 {
            return;
        }
        for (a, d) in dg.iter().enumerate() {
            let s = d * weight;
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut col = out.column_mut(a);
            col.iter_mut().zip(h.iter()).for_each(|(o, hi)| *o += hi * s);
        }
    }

    fn rates_from_evals(evals: &[Vec<UserEval>]) -> Vec<BlockRates> {
        evals
            .iter()
            .map(|e| BlockRates {
                r_c: e.iter().map(|u| u.r_c).collect(),
                r_p: e.iter().map(|u| u.r_p).collect(),
            })
            .collect()
    }

    fn wsr_direction(&self, evals: &[Vec<UserEval>]) -> Vec<CMatrix> {
        self.blocks
            .iter()
            .zip(evals)
            .map(|(b, e)| {
                let mut d = CMatrix::zeros(b.dim(), b.layout.n_streams());
                let u = self.weights_of(b);
                if b.has_common() {
                    let r_c: Vec<f64> = e.iter().map(|x| x.r_c).collect();
                    let worst = argmin_lowest(&r_c);
                    Self::accumulate(&mut d, &b.channels[worst], &e[worst].grad_c, u[argmax_lowest(&u)]);
                }
                for (j, ev) in e.iter().enumerate() {
                    Self::accumulate(&mut d, &b.channels[j], &ev.grad_p, u[j]);
                }
                d
            })
            .collect()
    }

    /// Weight of user `j`'s common-rate gradient in its MMF subgradient.
    fn common_share(share: CommonShareWeight, c: &[f64], r_p: &[f64], r_c: f64, j: usize) -> f64 {
        match share {
            CommonShareWeight::Literal => c[j],
            CommonShareWeight::Fraction => {
                if r_c > 1e-12 {
                    c[j] / r_c
                } else {
                    // no common rate yet: the weakest users would receive it first
                    let m = r_p.iter().copied().fold(f64::INFINITY, f64::min);
                    let tied = r_p.iter().filter(|&&x| x <= m + 1e-12).count();
                    if r_p[j] <= m + 1e-12 {
                        1.0 / tied as f64
                    } else {
                        0.0
                    }
                }
            }
        }
    }

    fn mmf_direction(
        &self,
        evals: &[Vec<UserEval>],
        rates: &[BlockRates],
        alloc: &CommonAllocation,
        gamma: f64,
        share: CommonShareWeight,
    ) -> Vec<CMatrix> {
        let totals = self.user_totals(rates, alloc);
        let w = lse_weights(&totals, gamma);
        self.blocks
            .iter()
            .zip(evals)
            .zip(rates)
            .map(|((b, e), r)| {
                let mut d = CMatrix::zeros(b.dim(), b.layout.n_streams());
                let local_c: Vec<f64> = b.users.iter().map(|&u| alloc.c[u]).collect();
                let r_c = r.common(b.has_common());
                let worst = argmin_lowest(&r.r_c);
                for (j, ev) in e.iter().enumerate() {
                    let wk = w[b.users[j]];
                    if b.has_common() {
                        let s = Self::common_share(share, &local_c, &r.r_p, r_c, j);
                        Self::accumulate(&mut d, &b.channels[worst], &e[worst].grad_c, wk * s);
                    }
                    Self::accumulate(&mut d, &b.channels[j], &ev.grad_p, wk);
                }
                d
            })
            .collect()
    }

    /// LSE value and subgradient for a fixed common allocation.
    pub fn lse_value_and_direction(&self, x: &[CMatrix], alloc: &CommonAllocation, gamma: f64, share: CommonShareWeight) -> (f64, Vec<CMatrix>) {
        let evals = self.evals(x);
        let rates = Self::rates_from_evals(&evals);
        let totals = self.user_totals(&rates, alloc);
        let value = lse(&totals, gamma);
        (value, self.mmf_direction(&evals, &rates, alloc, gamma, share))
    }
}

impl Objective for RsmaProblem {
    fn value(&self, x: &[CMatrix]) -> f64 {
        self.value_of_rates(&self.rates(x))
    }

    fn value_and_direction(&self, x: &[CMatrix]) -> (f64, Vec<CMatrix>) {
        let evals = self.evals(x);
        let rates = Self::rates_from_evals(&evals);
        let value = self.value_of_rates(&rates);
        let dir = match &self.goal {
            Goal::Wsr { .. } => self.wsr_direction(&evals),
            Goal::Mmf { gamma, share } => {
                let alloc = self.allocation(&rates);
                self.mmf_direction(&evals, &rates, &alloc, *gamma, *share)
            }
        };
        (value, dir)
    }
}

/// `(1/γ) log Σ exp(γ r_k)` evaluated stably.
pub fn lse(r: &[f64], gamma: f64) -> f64 {
    let m = r.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = r.iter().map(|&x| (gamma * (x - m)).exp()).sum();
    m + s.ln() / gamma
}

/// Softmax weights `exp(γ r_k) / Σ exp(γ r_l)`.
pub fn lse_weights(r: &[f64], gamma: f64) -> Vec<f64> {
    let m = r.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = r.iter().map(|&x| (gamma * (x - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_of_constant_vector() {
        let v = lse(&[0.7, 0.7, 0.7], -30.0);
        assert!((v - (0.7 + 3f64.ln() / -30.0)).abs() < 1e-14);
    }

    #[test]
    fn lse_sandwich() {
        let r = [1.3, 0.4, 2.2, 0.45];
        for gamma in [-1.0, -30.0, -200.0] {
            let v = lse(&r, gamma);
            assert!(v <= 0.4 + 1e-15);
            assert!(0.4 - v <= 4f64.ln() / gamma.abs() + 1e-15);
        }
        let w = lse_weights(&r, -30.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w[1] > w[3] && w[3] > w[0]);
    }

    #[test]
    fn fraction_share_without_common_rate_goes_to_weakest() {
        let s = |j| RsmaProblem::common_share(CommonShareWeight::Fraction, &[0.0, 0.0, 0.0], &[0.5, 0.2, 0.2], 0.0, j);
        assert_eq!(s(0), 0.0);
        assert_eq!(s(1), 0.5);
        assert_eq!(s(2), 0.5);
    }
}
