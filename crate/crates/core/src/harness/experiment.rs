//! Mode search, ergodic sweeps and rate-region sweeps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{mmf_allocation, wsr_allocation};
use crate::baselines::{noma_rates, noma_two_user};
use crate::channel::{rician_sample_stream, UserGeometry};
use crate::constellation::{ModeDictionary, TransmissionMode};
use crate::entropy::{mean_and_stderr, McConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Grouping, OneOrMany, Scheme};
use crate::largescale::{group_users, grouped_optimize, grouped_rate_report, nulling_and_reduction, random_grouping, GroupingPlan};
use crate::layout::{CVector, StreamLayout};
use crate::optimizer::{optimize_mmf, optimize_wsr, ObjectiveKind, OptimizeResult, OptimizerConfig};
use crate::rate::{rate_report, RateMethod, RateReport, Receiver};

/// How final precoders are scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub method: RateMethod,
    pub mc: McConfig,
    pub noise: NoiseModel,
    /// Objective gap under which two modes count as tied.
    pub tie_tolerance: f64,
}

impl Evaluation {
    pub fn approx(noise: NoiseModel) -> Self {
        Evaluation {
            method: RateMethod::Approx,
            mc: McConfig::default(),
            noise,
            tie_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub value: f64,
    /// `c_k + R_p,k` per user.
    pub user_rates: Vec<f64>,
}

/// Objective of a rate report. Each common stream is split among the users
/// of its group (all users for a single group); users without a common
/// stream only count their private rate.
pub fn score_report(
    report: &RateReport,
    groups: &[Vec<usize>],
    objective: ObjectiveKind,
    weights: &[f64],
    rx: Receiver,
) -> Scored {
    let r_p = report.private(rx);
    let k = r_p.len();
    let mut c = vec![0.0; k];
    for (gi, g) in groups.iter().enumerate() {
        let r_c = report.common_rates.get(gi).copied().unwrap_or(0.0);
        let local = match objective {
            ObjectiveKind::Wsr => wsr_allocation(&g.iter().map(|&u| weights[u]).collect::<Vec<_>>(), r_c),
            ObjectiveKind::Mmf => mmf_allocation(r_c, &g.iter().map(|&u| r_p[u]).collect::<Vec<_>>()).0,
        };
        for (j, &u) in g.iter().enumerate() {
            c[u] = local.c[j];
        }
    }
    let user_rates: Vec<f64> = (0..k).map(|u| c[u] + r_p[u]).collect();
    let value = match objective {
        ObjectiveKind::Wsr => user_rates.iter().zip(weights).map(|(r, w)| r * w).sum(),
        ObjectiveKind::Mmf => user_rates.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Scored { value, user_rates }
}

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    /// Zero-based index into the dictionary.
    pub mode_index: usize,
    pub result: OptimizeResult,
    pub score: Scored,
    /// Scored objective of every mode, `None` when a mode was intractable.
    pub per_mode: Vec<Option<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn optimize_mode(
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    objective: ObjectiveKind,
    weights: &[f64],
    cfg: &OptimizerConfig,
    eval: &Evaluation,
    plan: Option<&GroupingPlan>,
) -> Result<(OptimizeResult, Scored)> {
    let k = channels.len();
    match plan {
        None => {
            let res = match objective {
                ObjectiveKind::Wsr => optimize_wsr(channels, mode, rx, weights, eval.noise, cfg, None)?,
                ObjectiveKind::Mmf => optimize_mmf(channels, mode, rx, eval.noise, cfg, None)?,
            };
            let layout = StreamLayout::single_group(mode, k);
            let report = rate_report(&res.precoder, channels, &layout, eval.method, eval.noise, Some(eval.mc))?;
            let score = score_report(&report, &[(0..k).collect()], objective, weights, rx);
            Ok((res, score))
        }
        Some(plan) => {
            let res = grouped_optimize(plan, channels, mode, rx, objective, Some(weights), eval.noise, cfg)?;
            let report = grouped_rate_report(plan, channels, &res.blocks, mode, eval.method, eval.noise, Some(eval.mc))?;
            let score = score_report(&report, &plan.group_sets(), objective, weights, rx);
            Ok((res, score))
        }
    }
}

/// Optimizes every mode of the dictionary and keeps the best scored one.
/// Modes within `tie_tolerance` of the best are tied and the lowest index
/// wins. Intractable modes are skipped.
#[allow(clippy::too_many_arguments)]
pub fn mode_search(
    channels: &[CVector],
    dict: &ModeDictionary,
    rx: Receiver,
    objective: ObjectiveKind,
    weights: &[f64],
    cfg: &OptimizerConfig,
    eval: &Evaluation,
    plan: Option<&GroupingPlan>,
) -> Result<ModeOutcome> {
    let mut runs = Vec::with_capacity(dict.len());
    let mut skipped = Vec::new();
    for (i, mode) in dict.modes.iter().enumerate() {
        match optimize_mode(channels, mode, rx, objective, weights, cfg, eval, plan) {
            Ok(r) => runs.push(Some(r)),
            Err(e @ Error::Intractable { .. }) => {
                skipped.push(format!("mode {} ({}): {e}", i + 1, mode.label()));
                runs.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let per_mode: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().map(|(_, s)| s.value)).collect();
    let best = per_mode.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let Some(index) = per_mode
        .iter()
        .position(|v| v.is_some_and(|v| v >= best - eval.tie_tolerance))
    else {
        return Err(Error::Config(format!("every mode is intractable: {}", skipped.join("; "))));
    };
    let (result, score) = runs.swap_remove(index).expect("selected mode ran");
    Ok(ModeOutcome {
        mode_index: index,
        result,
        score,
        per_mode,
    })
}

/// Channels of one realization. With `random_angles` the user angles are
/// drawn first from their own seeded stream.
pub fn realization_channels(cfg: &ExperimentConfig, realization: u64) -> Vec<CVector> {
    let mut users = cfg.user_geometries();
    if let Some(r) = cfg.random_angles {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x616e_676c_6573);
        rng.set_stream(realization);
        let draw = |rng: &mut ChaCha20Rng, [lo, hi]: [f64; 2]| if hi > lo { rng.random_range(lo..hi) } else { lo };
        for u in &mut users {
            *u = UserGeometry::new(draw(&mut rng, r.az), draw(&mut rng, r.el), u.kappa);
        }
    }
    rician_sample_stream(&cfg.geometry, &users, cfg.seed, realization)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub objective: f64,
    pub user_rates: Vec<f64>,
    pub common_power_ratio: f64,
    /// One-based mode number.
    pub mode: usize,
    pub iterations: usize,
    pub converged: bool,
}

pub fn grouping_plan(cfg: &ExperimentConfig, channels: &[CVector], grouping: Grouping, realization: u64) -> Result<GroupingPlan> {
    let groups = match grouping {
        Grouping::Ordered => group_users(channels)?,
        Grouping::Random => random_grouping(channels.len(), cfg.seed ^ 0x67_726f_7570 ^ realization.rotate_left(32)),
    };
    nulling_and_reduction(channels, &groups)
}

/// One scheme on one channel realization at one SNR.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    cfg: &ExperimentConfig,
    dict: &ModeDictionary,
    scheme: Scheme,
    grouping: Option<Grouping>,
    objective: ObjectiveKind,
    weights: &[f64],
    snr_db: f64,
    realization: u64,
) -> Result<Trial> {
    let channels = realization_channels(cfg, realization);
    let opt = cfg.optimizer_for(snr_db, realization);
    let eval = Evaluation {
        method: cfg.method,
        mc: cfg.mc,
        noise: NoiseModel::new(1.0)?,
        tie_tolerance: cfg.mode_tie_tolerance,
    };
    if scheme == Scheme::Noma {
        if cfg.large_scale {
            return Err(Error::Unsupported("NOMA has no grouped variant".into()));
        }
        let res = noma_two_user(&channels, dict, objective, Some(weights), eval.noise, &opt)?;
        let x = dict.sdma_mode()?.private.clone().expect("SDMA mode has a private stream");
        let rates = noma_rates(&res.precoder, &channels, &x, eval.method, eval.noise, Some(eval.mc))?.per_user();
        let value = match objective {
            ObjectiveKind::Wsr => rates.iter().zip(weights).map(|(r, w)| r * w).sum(),
            ObjectiveKind::Mmf => rates[0].min(rates[1]),
        };
        return Ok(Trial {
            objective: value,
            user_rates: rates.to_vec(),
            common_power_ratio: 0.0,
            mode: 1,
            iterations: res.iterations,
            converged: res.converged,
        });
    }
    let plan = match (cfg.large_scale, grouping) {
        (true, Some(g)) => Some(grouping_plan(cfg, &channels, g, realization)?),
        (true, None) => Some(grouping_plan(cfg, &channels, Grouping::Ordered, realization)?),
        (false, _) => None,
    };
    let sdma_only;
    let dict = if scheme == Scheme::Sdma {
        sdma_only = ModeDictionary {
            k: dict.k,
            r_max_bits: dict.r_max_bits,
            modes: vec![dict.sdma_mode()?.clone()],
        };
        &sdma_only
    } else {
        dict
    };
    let out = mode_search(&channels, dict, scheme.receiver(), objective, weights, &opt, &eval, plan.as_ref())?;
    Ok(Trial {
        objective: out.score.value,
        user_rates: out.score.user_rates,
        common_power_ratio: out.result.common_power_ratio,
        mode: out.mode_index + 1,
        iterations: out.result.iterations,
        converged: out.result.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub scheme: String,
    pub objective_mean: f64,
    pub objective_stderr: f64,
    pub common_power_ratio: f64,
    pub mode_index_mean: f64,
    pub realizations: usize,
}

fn labels(cfg: &ExperimentConfig) -> Vec<(Scheme, Option<Grouping>, String)> {
    let mut out = Vec::new();
    for s in cfg.schemes() {
        if cfg.large_scale && s != Scheme::Noma {
            for g in cfg.grouping.to_vec() {
                out.push((s, Some(g), format!("{}:{}", s.name(), g.name())));
            }
        } else {
            out.push((s, None, s.name().to_string()));
        }
    }
    out
}

/// Runs `jobs` on the current rayon pool and returns results in job order.
fn run_jobs<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Ergodic averages per scheme and SNR point. Realizations share channel
/// draws across schemes and SNR points.
pub fn ergodic_sweep(cfg: &ExperimentConfig, base_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let dict = cfg.dictionary.load(base_dir)?;
    let weights = cfg.weights();
    let labels = labels(cfg);
    let r = cfg.realizations;
    let per_label = cfg.snr_db.len() * r;
    let trials = run_jobs(labels.len() * per_label, |job| {
        let (l, rest) = (job / per_label, job % per_label);
        let (s, real) = (rest / r, rest % r);
        let (scheme, grouping, _) = &labels[l];
        run_trial(cfg, &dict, *scheme, *grouping, cfg.objective, &weights, cfg.snr_db[s], real as u64)
    })?;
    let mut rows = Vec::new();
    for (l, (_, _, label)) in labels.iter().enumerate() {
        for (s, &snr) in cfg.snr_db.iter().enumerate() {
            let chunk = &trials[l * per_label + s * r..l * per_label + (s + 1) * r];
            let obj: Vec<f64> = chunk.iter().map(|t| t.objective).collect();
            let est = mean_and_stderr(&obj);
            rows.push(SweepRow {
                snr_db: snr,
                scheme: label.clone(),
                objective_mean: est.estimate,
                objective_stderr: est.std_error,
                common_power_ratio: chunk.iter().map(|t| t.common_power_ratio).sum::<f64>() / r as f64,
                mode_index_mean: chunk.iter().map(|t| t.mode as f64).sum::<f64>() / r as f64,
                realizations: r,
            });
        }
    }
    Ok(rows)
}

/// The ergodic sweep with grouping enabled, comparing ordered and random
/// pairing.
pub fn large_scale_sweep(cfg: &ExperimentConfig, base_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let mut cfg = cfg.clone();
    cfg.large_scale = true;
    cfg.grouping = OneOrMany::Many(vec![Grouping::Ordered, Grouping::Random]);
    ergodic_sweep(&cfg, base_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub scheme: String,
    pub snr_db: f64,
    pub u1: f64,
    pub u2: f64,
    pub r1_mean: f64,
    pub r1_stderr: f64,
    pub r2_mean: f64,
    pub r2_stderr: f64,
    pub objective_mean: f64,
    pub objective_stderr: f64,
    pub realizations: usize,
    /// Not dominated by another point of the same scheme and SNR.
    pub frontier: bool,
}

/// Two-user WSR over the configured weight grid. Rows carry the mean
/// per-user rates; `frontier` marks the upper-right boundary.
pub fn rate_region(cfg: &ExperimentConfig, base_dir: Option<&Path>) -> Result<Vec<RegionRow>> {
    if cfg.k() != 2 {
        return Err(Error::Config(format!("config key `users`: the rate region needs 2 users, got {}", cfg.k())));
    }
    let dict = cfg.dictionary.load(base_dir)?;
    let pairs = cfg.rate_region.weight_pairs();
    let labels = labels(cfg);
    let r = cfg.realizations;
    let per_snr = pairs.len() * r;
    let per_label = cfg.snr_db.len() * per_snr;
    let trials = run_jobs(labels.len() * per_label, |job| {
        let (l, rest) = (job / per_label, job % per_label);
        let (s, rest) = (rest / per_snr, rest % per_snr);
        let (w, real) = (rest / r, rest % r);
        let (scheme, grouping, _) = &labels[l];
        run_trial(cfg, &dict, *scheme, *grouping, ObjectiveKind::Wsr, &pairs[w], cfg.snr_db[s], real as u64)
    })?;
    let mut rows = Vec::new();
    for (l, (_, _, label)) in labels.iter().enumerate() {
        for (s, &snr) in cfg.snr_db.iter().enumerate() {
            let start = rows.len();
            for (w, pair) in pairs.iter().enumerate() {
                let base = l * per_label + s * per_snr + w * r;
                let chunk = &trials[base..base + r];
                let r1 = mean_and_stderr(&chunk.iter().map(|t| t.user_rates[0]).collect::<Vec<_>>());
                let r2 = mean_and_stderr(&chunk.iter().map(|t| t.user_rates[1]).collect::<Vec<_>>());
                let obj = mean_and_stderr(&chunk.iter().map(|t| t.objective).collect::<Vec<_>>());
                rows.push(RegionRow {
                    scheme: label.clone(),
                    snr_db: snr,
                    u1: pair[0],
                    u2: pair[1],
                    r1_mean: r1.estimate,
                    r1_stderr: r1.std_error,
                    r2_mean: r2.estimate,
                    r2_stderr: r2.std_error,
                    objective_mean: obj.estimate,
                    objective_stderr: obj.std_error,
                    realizations: r,
                    frontier: false,
                });
            }
            mark_frontier(&mut rows[start..]);
        }
    }
    Ok(rows)
}

fn mark_frontier(rows: &mut [RegionRow]) {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.r1_mean, r.r2_mean)).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        let (a, b) = pts[i];
        row.frontier = !pts
            .iter()
            .any(|&(x, y)| x >= a && y >= b && (x > a || y > b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::UserRates;

    fn report(common: Vec<f64>, r_p: Vec<f64>) -> RateReport {
        let users = r_p
            .iter()
            .map(|&p| UserRates {
                r_c: 0.0,
                r_p_sic: p,
                r_p_sicfree: p,
                raw_r_c: 0.0,
                raw_r_p_sic: p,
                raw_r_p_sicfree: p,
                stderr_c: 0.0,
                stderr_p_sic: 0.0,
                stderr_p_sicfree: 0.0,
                clamped: false,
            })
            .collect();
        RateReport {
            r_c_per_user: vec![0.0; r_p.len()],
            common_rates: common,
            r_p_sic: r_p.clone(),
            r_p_sicfree: r_p,
            users,
            clamped: vec![false; 2],
        }
    }

    #[test]
    fn wsr_score_gives_common_rate_to_heaviest_user() {
        let s = score_report(&report(vec![0.5], vec![1.0, 2.0]), &[vec![0, 1]], ObjectiveKind::Wsr, &[1.0, 3.0], Receiver::Sic);
        assert_eq!(s.user_rates, vec![1.0, 2.5]);
        assert!((s.value - 8.5).abs() < 1e-15);
    }

    #[test]
    fn mmf_score_per_group() {
        let s = score_report(
            &report(vec![1.0, 0.0], vec![0.5, 1.0, 2.0, 3.0]),
            &[vec![0, 1], vec![2, 3]],
            ObjectiveKind::Mmf,
            &[1.0; 4],
            Receiver::SicFree,
        );
        assert!((s.value - 1.25).abs() < 1e-15);
        assert_eq!(s.user_rates[2], 2.0);
    }

    #[test]
    fn frontier_marks_nondominated_points() {
        let mk = |a, b| RegionRow {
            scheme: String::new(),
            snr_db: 0.0,
            u1: 1.0,
            u2: 1.0,
            r1_mean: a,
            r1_stderr: 0.0,
            r2_mean: b,
            r2_stderr: 0.0,
            objective_mean: 0.0,
            objective_stderr: 0.0,
            realizations: 1,
            frontier: false,
        };
        let mut rows = vec![mk(1.0, 0.0), mk(0.5, 0.5), mk(0.4, 0.4), mk(0.0, 1.0)];
        mark_frontier(&mut rows);
        assert_eq!(rows.iter().map(|r| r.frontier).collect::<Vec<_>>(), vec![true, true, false, true]);
    }
}
