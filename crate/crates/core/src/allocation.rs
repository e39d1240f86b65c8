//! Splitting the common-stream rate among users.
//!
//! For weighted sum-rate the whole common rate goes to one most-weighted
//! user. For max-min fairness the weakest users are water-filled to a common
//! level `η = (R_c + Σ d) / k'` with the largest `k'` that keeps every share
//! nonnegative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonAllocation {
    pub c: Vec<f64>,
}

impl CommonAllocation {
    pub fn zeros(k: usize) -> Self {
        CommonAllocation { c: vec![0.0; k] }
    }

    pub fn total(&self) -> f64 {
        self.c.iter().sum()
    }

    /// Per-user totals `c_k + r_p[k]`.
    pub fn user_rates(&self, r_p: &[f64]) -> Vec<f64> {
        self.c.iter().zip(r_p).map(|(c, p)| c + p).collect()
    }
}

/// Index of the first maximum.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the first minimum.
pub fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

pub fn wsr_allocation(weights: &[f64], r_c: f64) -> CommonAllocation {
    let mut alloc = CommonAllocation::zeros(weights.len());
    if !weights.is_empty() {
        alloc.c[argmax_lowest(weights)] = r_c;
    }
    alloc
}

/// Closed-form optimum of `max_c min_k (c_k + r_p[k])` over the simplex
/// `Σ c = r_c, c ⪰ 0`. Returns the allocation in input order and the
/// attained minimum.
pub fn mmf_allocation(r_c: f64, r_p: &[f64]) -> (CommonAllocation, f64) {
    let k = r_p.len();
    if k == 0 {
        return (CommonAllocation::zeros(0), f64::INFINITY);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| r_p[a].total_cmp(&r_p[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| r_p[i]).collect();

    let mut served = k;
    let mut eta;
    loop {
        let d = &sorted[..served];
        eta = (r_c + d.iter().sum::<f64>()) / served as f64;
        if served == 1 || d.iter().all(|&x| eta - x >= 0.0) {
            break;
        }
        served -= 1;
    }

    let mut alloc = CommonAllocation::zeros(k);
    for (rank, &user) in order.iter().enumerate().take(served) {
        alloc.c[user] = (eta - sorted[rank]).max(0.0);
    }
    // restore the exact budget lost to the max(0) guard
    let drift = r_c - alloc.total();
    if drift != 0.0 {
        alloc.c[order[0]] += drift;
    }
    let min_rate = alloc
        .user_rates(r_p)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    (alloc, min_rate)
}

/// Reference solution of the same problem by enumerating every candidate
/// support. Exponential in `K`; test use only.
pub fn mmf_allocation_lp_oracle(r_c: f64, r_p: &[f64]) -> Result<(CommonAllocation, f64)> {
    let k = r_p.len();
    if k == 0 || k > 12 {
        return Err(Error::Unsupported(format!(
            "enumeration oracle supports 1..=12 users, got {k}"
        )));
    }
    let mut best: Option<(CommonAllocation, f64)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let eta = (r_c + support.iter().map(|&i| r_p[i]).sum::<f64>()) / support.len() as f64;
        if support.iter().any(|&i| eta - r_p[i] < -1e-15) {
            continue;
        }
        let mut c = vec![0.0; k];
        for &i in &support {
            c[i] = (eta - r_p[i]).max(0.0);
        }
        let value = (0..k).map(|i| c[i] + r_p[i]).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((CommonAllocation { c }, value));
        }
    }
    Ok(best.expect("singleton supports are always feasible"))
}
