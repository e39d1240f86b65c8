//! Constellation-constrained RSMA rates at a single-antenna receiver.
//!
//! For user `k` observing `y = Σ_a g_a s_a + n` over every stream of the
//! layout, with `c` its common stream and `p` its private stream:
//!
//! ```text
//! R_c,k      = log2|X_c| - H(all)     + H(all \ c)
//! R_p,k^SIC  = log2|X_p| - H(all \ c) + H(all \ {c, p})
//! R_p,k^free = log2|X_p| - H(all)     + H(all \ p)
//! ```
//!
//! `H(S)` is the conditional entropy of the product alphabet of `S`. The
//! approximate method is deterministic; the exact method is a Monte-Carlo
//! estimate whose noise draws are shared by every term of one report.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{effective_points, Constellation, DEFAULT_PAIR_BUDGET};
use crate::entropy::{
    approx_from_points, entropy_approx_with_gain_grad, exact_per_sample, mean_and_stderr,
    McConfig, McEstimate, NoiseModel,
};
use crate::error::{Error, Result};
use crate::layout::{gains, CMatrix, CVector, PrecoderMatrix, StreamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMethod {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    #[serde(rename = "sic")]
    Sic,
    #[serde(rename = "sicfree")]
    SicFree,
}

/// Rates of one user, clamped for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserRates {
    pub r_c: f64,
    pub r_p_sic: f64,
    pub r_p_sicfree: f64,
    /// Values before clamping to `[0, log2|X|]`.
    pub raw_r_c: f64,
    pub raw_r_p_sic: f64,
    pub raw_r_p_sicfree: f64,
    /// Monte-Carlo standard errors, zero for the approximate method.
    pub stderr_c: f64,
    pub stderr_p_sic: f64,
    pub stderr_p_sicfree: f64,
    pub clamped: bool,
}

impl UserRates {
    pub fn private(&self, rx: Receiver) -> f64 {
        match rx {
            Receiver::Sic => self.r_p_sic,
            Receiver::SicFree => self.r_p_sicfree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_c_per_user: Vec<f64>,
    /// Decodable rate of each common stream: minimum over the users that
    /// decode it. One entry per common stream in layout order.
    pub common_rates: Vec<f64>,
    pub r_p_sic: Vec<f64>,
    pub r_p_sicfree: Vec<f64>,
    pub users: Vec<UserRates>,
    pub clamped: Vec<bool>,
}

impl RateReport {
    /// Common rate of a single-common layout, zero when there is none.
    pub fn r_c(&self) -> f64 {
        self.common_rates.first().copied().unwrap_or(0.0)
    }

    pub fn private(&self, rx: Receiver) -> &[f64] {
        match rx {
            Receiver::Sic => &self.r_p_sic,
            Receiver::SicFree => &self.r_p_sicfree,
        }
    }
}

fn subset<'a>(
    g: &[Complex64],
    layout: &'a StreamLayout,
    exclude: &[Option<usize>],
) -> (Vec<Complex64>, Vec<&'a Constellation>) {
    let mut gs = Vec::new();
    let mut xs = Vec::new();
    for (a, s) in layout.streams().iter().enumerate() {
        if exclude.contains(&Some(a)) {
            continue;
        }
        gs.push(g[a]);
        xs.push(&s.alphabet);
    }
    (gs, xs)
}

fn approx_entropy(g: &[Complex64], layout: &StreamLayout, exclude: &[Option<usize>], noise: NoiseModel) -> f64 {
    let (gs, xs) = subset(g, layout, exclude);
    approx_from_points(&effective_points(&gs, &xs).points, noise.sigma2())
}

fn exact_entropy_samples(
    g: &[Complex64],
    layout: &StreamLayout,
    exclude: &[Option<usize>],
    noise: NoiseModel,
    draws: &[Complex64],
) -> Vec<f64> {
    let (gs, xs) = subset(g, layout, exclude);
    let eff = effective_points(&gs, &xs);
    if eff.len() <= 1 {
        // a single point carries no uncertainty
        return vec![0.0; draws.len()];
    }
    exact_per_sample(&eff.points, noise.sigma2(), draws)
}

fn clamp_rate(v: f64, cap: f64, clamped: &mut bool) -> f64 {
    if v < 0.0 {
        *clamped = true;
        0.0
    } else if v > cap {
        *clamped = true;
        cap
    } else {
        v
    }
}

fn finish(
    raw: [f64; 3],
    stderr: [f64; 3],
    caps: [f64; 3],
) -> UserRates {
    let mut clamped = false;
    UserRates {
        r_c: clamp_rate(raw[0], caps[0], &mut clamped),
        r_p_sic: clamp_rate(raw[1], caps[1], &mut clamped),
        r_p_sicfree: clamp_rate(raw[2], caps[2], &mut clamped),
        raw_r_c: raw[0],
        raw_r_p_sic: raw[1],
        raw_r_p_sicfree: raw[2],
        stderr_c: stderr[0],
        stderr_p_sic: stderr[1],
        stderr_p_sicfree: stderr[2],
        clamped,
    }
}

/// Rates of `user` from its per-stream gains `g = h^H P`.
pub fn user_rates_from_gains(
    g: &[Complex64],
    layout: &StreamLayout,
    user: usize,
    method: RateMethod,
    noise: NoiseModel,
    draws: Option<&[Complex64]>,
) -> UserRates {
    let us = layout.user(user);
    let (c, p) = (us.common, us.private);
    let log_c = c.map_or(0.0, |i| layout.streams()[i].alphabet.log2_len());
    let log_p = p.map_or(0.0, |i| layout.streams()[i].alphabet.log2_len());
    let caps = [log_c, log_p, log_p];

    match method {
        RateMethod::Approx => {
            let h_all = approx_entropy(g, layout, &[], noise);
            let h_nc = if c.is_some() { approx_entropy(g, layout, &[c], noise) } else { h_all };
            let (sic, free) = if p.is_some() {
                let h_np = approx_entropy(g, layout, &[p], noise);
                let h_ncp = if c.is_some() { approx_entropy(g, layout, &[c, p], noise) } else { h_np };
                (log_p - h_nc + h_ncp, log_p - h_all + h_np)
            } else {
                (0.0, 0.0)
            };
            let r_c = if c.is_some() { log_c - h_all + h_nc } else { 0.0 };
            finish([r_c, sic, free], [0.0; 3], caps)
        }
        RateMethod::Exact => {
            let owned;
            let draws = match draws {
                Some(d) => d,
                None => {
                    owned = McConfig::default().unit_draws();
                    &owned
                }
            };
            let n = draws.len();
            let y_all = exact_entropy_samples(g, layout, &[], noise, draws);
            let y_nc = if c.is_some() { exact_entropy_samples(g, layout, &[c], noise, draws) } else { y_all.clone() };
            let zero = vec![0.0; n];
            let rc: Vec<f64> = if c.is_some() {
                (0..n).map(|s| log_c - y_all[s] + y_nc[s]).collect()
            } else {
                zero.clone()
            };
            let (sic, free) = if p.is_some() {
                let y_np = exact_entropy_samples(g, layout, &[p], noise, draws);
                let y_ncp = if c.is_some() { exact_entropy_samples(g, layout, &[c, p], noise, draws) } else { y_np.clone() };
                (
                    (0..n).map(|s| log_p - y_nc[s] + y_ncp[s]).collect(),
                    (0..n).map(|s| log_p - y_all[s] + y_np[s]).collect(),
                )
            } else {
                (zero.clone(), zero)
            };
            let (ec, es, ef) = (mean_and_stderr(&rc), mean_and_stderr(&sic), mean_and_stderr(&free));
            finish(
                [ec.estimate, es.estimate, ef.estimate],
                [ec.std_error, es.std_error, ef.std_error],
                caps,
            )
        }
    }
}

pub fn user_rates(
    p: &PrecoderMatrix,
    h: &CVector,
    layout: &StreamLayout,
    user: usize,
    method: RateMethod,
    noise: NoiseModel,
    mc: Option<McConfig>,
) -> Result<UserRates> {
    layout.check_precoder(p, h.len())?;
    if user >= layout.n_users() {
        return Err(Error::Dimension(format!("user {user} outside layout")));
    }
    let draws = mc.map(|m| m.unit_draws());
    Ok(user_rates_from_gains(&gains(h, p), layout, user, method, noise, draws.as_deref()))
}

/// Per-user rates plus the min-over-users common rate of every common stream.
pub fn rate_report(
    p: &PrecoderMatrix,
    channels: &[CVector],
    layout: &StreamLayout,
    method: RateMethod,
    noise: NoiseModel,
    mc: Option<McConfig>,
) -> Result<RateReport> {
    if channels.is_empty() || channels.len() != layout.n_users() {
        return Err(Error::Dimension(format!(
            "{} channels for {} users",
            channels.len(),
            layout.n_users()
        )));
    }
    let n_t = channels[0].len();
    layout.check_precoder(p, n_t)?;
    layout.check_tractable(DEFAULT_PAIR_BUDGET)?;
    let draws = match method {
        RateMethod::Exact => {
            let mc = mc.unwrap_or_default();
            mc.validate()?;
            Some(mc.unit_draws())
        }
        RateMethod::Approx => None,
    };
    let users: Vec<UserRates> = channels
        .iter()
        .enumerate()
        .map(|(k, h)| user_rates_from_gains(&gains(h, p), layout, k, method, noise, draws.as_deref()))
        .collect();
    Ok(assemble(layout, users))
}

pub(crate) fn assemble(layout: &StreamLayout, users: Vec<UserRates>) -> RateReport {
    let common_rates = layout
        .common_streams()
        .map(|c| {
            users
                .iter()
                .enumerate()
                .filter(|(k, _)| layout.user(*k).common == Some(c))
                .map(|(_, u)| u.r_c)
                .fold(f64::INFINITY, f64::min)
        })
        .map(|r| if r.is_finite() { r } else { 0.0 })
        .collect();
    RateReport {
        r_c_per_user: users.iter().map(|u| u.r_c).collect(),
        common_rates,
        r_p_sic: users.iter().map(|u| u.r_p_sic).collect(),
        r_p_sicfree: users.iter().map(|u| u.r_p_sicfree).collect(),
        clamped: users.iter().map(|u| u.clamped).collect(),
        users,
    }
}

/// `R_p^SIC - R_p^SIC-free` for one user, exact method with shared draws.
pub fn sic_gap_exact(
    p: &PrecoderMatrix,
    h: &CVector,
    layout: &StreamLayout,
    user: usize,
    noise: NoiseModel,
    mc: McConfig,
) -> Result<McEstimate> {
    layout.check_precoder(p, h.len())?;
    mc.validate()?;
    let us = layout.user(user);
    let (Some(c), Some(pr)) = (us.common, us.private) else {
        return Err(Error::Config("sic gap needs a common and a private stream".into()));
    };
    let g = gains(h, p);
    let draws = mc.unit_draws();
    let y_all = exact_entropy_samples(&g, layout, &[], noise, &draws);
    let y_nc = exact_entropy_samples(&g, layout, &[Some(c)], noise, &draws);
    let y_np = exact_entropy_samples(&g, layout, &[Some(pr)], noise, &draws);
    let y_ncp = exact_entropy_samples(&g, layout, &[Some(c), Some(pr)], noise, &draws);
    let diff: Vec<f64> = (0..draws.len())
        .map(|s| (-y_nc[s] + y_ncp[s]) - (-y_all[s] + y_np[s]))
        .collect();
    Ok(mean_and_stderr(&diff))
}

/// Approximate rates of one user with gradients with respect to its gains.
#[derive(Debug, Clone)]
pub(crate) struct UserEval {
    pub r_c: f64,
    pub r_p: f64,
    pub grad_c: Vec<Complex64>,
    pub grad_p: Vec<Complex64>,
}

fn entropy_with_grad(
    g: &[Complex64],
    layout: &StreamLayout,
    exclude: &[Option<usize>],
    noise: NoiseModel,
) -> (f64, Vec<Complex64>) {
    let (gs, xs) = subset(g, layout, exclude);
    let (h, sub_grad) = entropy_approx_with_gain_grad(&gs, &xs, noise);
    // scatter back into full stream indexing
    let mut full = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut it = sub_grad.into_iter();
    for (a, slot) in full.iter_mut().enumerate() {
        if !exclude.contains(&Some(a)) {
            *slot = it.next().expect("subset gradient length");
        }
    }
    (h, full)
}

fn combine(base: f64, minus: &(f64, Vec<Complex64>), plus: &(f64, Vec<Complex64>)) -> (f64, Vec<Complex64>) {
    let v = base - minus.0 + plus.0;
    let g = minus.1.iter().zip(&plus.1).map(|(m, p)| p - m).collect();
    (v, g)
}

/// Unclamped approximate rates and their gain-gradients for the given
/// receiver architecture.
pub(crate) fn approx_user_eval(
    g: &[Complex64],
    layout: &StreamLayout,
    user: usize,
    rx: Receiver,
    noise: NoiseModel,
) -> UserEval {
    let us = layout.user(user);
    let (c, p) = (us.common, us.private);
    let zeros = vec![Complex64::new(0.0, 0.0); g.len()];
    let log_c = c.map_or(0.0, |i| layout.streams()[i].alphabet.log2_len());
    let log_p = p.map_or(0.0, |i| layout.streams()[i].alphabet.log2_len());

    let h_all = entropy_with_grad(g, layout, &[], noise);
    let h_nc = c.map(|_| entropy_with_grad(g, layout, &[c], noise));
    let (r_c, grad_c) = match &h_nc {
        Some(h_nc) => combine(log_c, &h_all, h_nc),
        None => (0.0, zeros.clone()),
    };
    let (r_p, grad_p) = if p.is_none() {
        (0.0, zeros)
    } else {
        match rx {
            Receiver::Sic => match &h_nc {
                Some(h_nc) => {
                    let h_ncp = entropy_with_grad(g, layout, &[c, p], noise);
                    combine(log_p, h_nc, &h_ncp)
                }
                None => {
                    let h_np = entropy_with_grad(g, layout, &[p], noise);
                    combine(log_p, &h_all, &h_np)
                }
            },
            Receiver::SicFree => {
                let h_np = entropy_with_grad(g, layout, &[p], noise);
                combine(log_p, &h_all, &h_np)
            }
        }
    };
    UserEval { r_c, r_p, grad_c, grad_p }
}

/// Approximate rates without gradients, unclamped: `(r_c, r_p)`.
pub(crate) fn approx_user_value(
    g: &[Complex64],
    layout: &StreamLayout,
    user: usize,
    rx: Receiver,
    noise: NoiseModel,
) -> (f64, f64) {
    let u = user_rates_from_gains(g, layout, user, RateMethod::Approx, noise, None);
    let r_p = match rx {
        Receiver::Sic => u.raw_r_p_sic,
        Receiver::SicFree => u.raw_r_p_sicfree,
    };
    (u.raw_r_c, r_p)
}

/// Gradient of the approximate entropy over the streams in `streams`
/// (indices into the columns of `p`) with respect to the full precoder.
/// Columns outside `streams` are zero.
pub fn entropy_approx_gradient(
    h: &CVector,
    p: &PrecoderMatrix,
    alphabets: &[&Constellation],
    streams: &[usize],
    noise: NoiseModel,
) -> Result<CMatrix> {
    if alphabets.len() != streams.len() {
        return Err(Error::Dimension("one alphabet per stream".into()));
    }
    if p.nrows() != h.len() || streams.iter().any(|&a| a >= p.ncols()) {
        return Err(Error::Dimension("precoder and channel disagree".into()));
    }
    let all = gains(h, p);
    let gs: Vec<Complex64> = streams.iter().map(|&a| all[a]).collect();
    let (_, dg) = entropy_approx_with_gain_grad(&gs, alphabets, noise);
    let mut out = CMatrix::zeros(p.nrows(), p.ncols());
    for (&a, d) in streams.iter().zip(dg) {
        out.set_column(a, &gain_grad_to_column(h, d));
    }
    Ok(out)
}

/// Chain rule through `g = h^H p`: the precoder gradient is `h · dg`.
pub(crate) fn gain_grad_to_column(h: &CVector, dg: Complex64) -> CVector {
    h.map(|x| x * dg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{standard_constellation, ConstellationKind, TransmissionMode};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_bpsk_private_rate() {
        let mode = TransmissionMode::new(None, Some(ConstellationKind::Bpsk), 1);
        let layout = StreamLayout::single_group(&mode, 1);
        let h = CVector::from_vec(vec![c(1.0, 0.0)]);
        let p = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let noise = NoiseModel::new(1.0).unwrap();
        let r = user_rates(&p, &h, &layout, 0, RateMethod::Approx, noise, None).unwrap();
        let expected = 1.0 - (1.0 + (-2.0f64).exp()).log2();
        assert!((r.r_p_sic - expected).abs() < 1e-14);
        assert!((r.r_p_sic - 0.816882).abs() < 1e-6);
        assert_eq!(r.r_p_sic, r.r_p_sicfree);
        assert_eq!(r.r_c, 0.0);
    }

    #[test]
    fn orthogonal_common_precoder_gives_zero_common_rate() {
        let mode = TransmissionMode::new(Some(ConstellationKind::Qpsk), Some(ConstellationKind::Qpsk), 2);
        let layout = StreamLayout::single_group(&mode, 2);
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        // common column orthogonal to h
        let p = CMatrix::from_row_slice(2, 3, &[c(0.0, 0.0), c(0.8, 0.1), c(0.3, -0.2), c(1.0, 0.0), c(0.2, 0.0), c(0.1, 0.4)]);
        let noise = NoiseModel::new(0.5).unwrap();
        let r = user_rates(&p, &h, &layout, 0, RateMethod::Approx, noise, None).unwrap();
        assert!(r.raw_r_c.abs() < 1e-12);
        assert!((r.raw_r_p_sic - r.raw_r_p_sicfree).abs() < 1e-12);
    }

    #[test]
    fn symmetric_channels_give_equal_common_rates() {
        let mode = TransmissionMode::new(Some(ConstellationKind::Qpsk), Some(ConstellationKind::Qpsk), 2);
        let layout = StreamLayout::single_group(&mode, 2);
        let h = CVector::from_vec(vec![c(0.3, 1.0), c(-0.4, 0.2)]);
        let p = CMatrix::from_row_slice(2, 3, &[c(0.5, 0.0), c(0.8, 0.1), c(0.3, -0.2), c(0.1, 0.0), c(0.2, 0.0), c(0.1, 0.4)]);
        let noise = NoiseModel::new(0.1).unwrap();
        let rep = rate_report(&p, &[h.clone(), h], &layout, RateMethod::Approx, noise, None).unwrap();
        assert_eq!(rep.r_c_per_user[0], rep.r_c_per_user[1]);
        assert!(rep.r_c() <= rep.r_c_per_user[0]);
    }

    #[test]
    fn missing_common_stream_is_zero_rate_and_receivers_coincide() {
        let mode = TransmissionMode::new(None, Some(ConstellationKind::Qam8), 2);
        let layout = StreamLayout::single_group(&mode, 2);
        let h = CVector::from_vec(vec![c(0.3, 1.0), c(-0.4, 0.2)]);
        let p = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.8, 0.1), c(0.3, -0.2), c(0.1, 0.0)]);
        let noise = NoiseModel::new(0.2).unwrap();
        let r = user_rates(&p, &h, &layout, 1, RateMethod::Approx, noise, None).unwrap();
        assert_eq!(r.r_c, 0.0);
        assert_eq!(r.r_p_sic, r.r_p_sicfree);
    }

    #[test]
    fn negative_approx_rates_are_clamped_and_flagged() {
        // very low SNR with strong interference can push the surrogate below zero
        let mode = TransmissionMode::new(Some(ConstellationKind::Qam16), Some(ConstellationKind::Bpsk), 2);
        let layout = StreamLayout::single_group(&mode, 2);
        let noise = NoiseModel::new(1.0).unwrap();
        let mut seen = false;
        for i in 0..200 {
            let t = i as f64 * 0.05;
            let g = [c(1.5 * t.cos(), 0.3), c(0.05, t.sin()), c(2.0, -0.7 * t)];
            let u = user_rates_from_gains(&g, &layout, 0, RateMethod::Approx, noise, None);
            for (raw, rep) in [(u.raw_r_c, u.r_c), (u.raw_r_p_sic, u.r_p_sic), (u.raw_r_p_sicfree, u.r_p_sicfree)] {
                assert!(rep >= 0.0);
                if raw < 0.0 {
                    seen = true;
                    assert!(u.clamped);
                    assert_eq!(rep, 0.0);
                }
            }
        }
        let _ = seen;
    }

    #[test]
    fn zero_channel_gives_zero_gradient() {
        let q = standard_constellation(ConstellationKind::Qpsk);
        let h = CVector::zeros(2);
        let p = CMatrix::from_element(2, 2, c(0.4, 0.3));
        let g = entropy_approx_gradient(&h, &p, &[&q, &q], &[0, 1], NoiseModel::new(1.0).unwrap()).unwrap();
        assert!(g.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn sic_gap_requires_common_stream() {
        let mode = TransmissionMode::new(None, Some(ConstellationKind::Qpsk), 1);
        let layout = StreamLayout::single_group(&mode, 1);
        let h = CVector::from_vec(vec![c(1.0, 0.0)]);
        let p = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let r = sic_gap_exact(&p, &h, &layout, 0, NoiseModel::new(1.0).unwrap(), McConfig { samples: 10, seed: 1 });
        assert!(r.is_err());
    }
}
