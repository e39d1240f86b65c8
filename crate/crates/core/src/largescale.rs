//! User pairing, inter-group interference nulling and subspace reduction.
//!
//! User `k` in group `i` is served through `p = F_i G_i v`, where `F_i`
//! spans the null space of every channel outside the group and `G_i`
//! aligns the reduced variable with the group's own channels. Rates then
//! only involve in-group streams, and the optimizer works on the short
//! vectors `v`.

use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::constellation::{PairCount, TransmissionMode};
use crate::entropy::{McConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::layout::{gains, CMatrix, CVector, StreamLayout};
use crate::optimizer::{optimize_problem, ObjectiveKind, OptimizeResult, OptimizerConfig};
use crate::problem::{Block, Goal, RsmaProblem};
use crate::rate::{assemble, user_rates_from_gains, RateMethod, RateReport, Receiver};

/// Eigenvalues below this fraction of the largest count as zero.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// `|h_m^H h_n| / (‖h_m‖ ‖h_n‖)`.
pub fn channel_similarity(h_m: &CVector, h_n: &CVector) -> Result<f64> {
    let (a, b) = (h_m.norm(), h_n.norm());
    if a == 0.0 || b == 0.0 {
        return Err(Error::Degenerate("similarity of a zero channel".into()));
    }
    if h_m.len() != h_n.len() {
        return Err(Error::Dimension("channels differ in length".into()));
    }
    Ok((h_m.dotc(h_n).norm() / (a * b)).min(1.0))
}

/// Greedy pairing: repeatedly take the most similar pair among users not
/// yet grouped (first in row-major order on ties). With odd `K` the user
/// left over forms a singleton group at the end.
pub fn group_users(channels: &[CVector]) -> Result<Vec<Vec<usize>>> {
    let k = channels.len();
    if k < 2 {
        return Err(Error::Config("grouping needs at least two users".into()));
    }
    let mut q = vec![vec![-1.0; k]; k];
    for m in 0..k {
        for n in m + 1..k {
            q[m][n] = channel_similarity(&channels[m], &channels[n])?;
        }
    }
    let mut groups = Vec::with_capacity(k.div_ceil(2));
    for _ in 0..k / 2 {
        let (mut a, mut b, mut best) = (0, 0, f64::NEG_INFINITY);
        for (m, row) in q.iter().enumerate() {
            for (n, &v) in row.iter().enumerate() {
                if v > best {
                    (a, b, best) = (m, n, v);
                }
            }
        }
        groups.push(vec![a, b]);
        for (m, row) in q.iter_mut().enumerate() {
            for (n, v) in row.iter_mut().enumerate() {
                if m == a || m == b || n == a || n == b {
                    *v = -1.0;
                }
            }
        }
    }
    if k % 2 == 1 {
        let used: Vec<usize> = groups.iter().flatten().copied().collect();
        groups.push((0..k).filter(|u| !used.contains(u)).collect());
    }
    Ok(groups)
}

/// Uniformly random pairing (consecutive entries of a seeded shuffle), the
/// reference against which the similarity heuristic is compared.
pub fn random_grouping(k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    order.chunks(2).map(|c| c.to_vec()).collect()
}

#[derive(Debug, Clone)]
pub struct GroupPlan {
    pub users: Vec<usize>,
    /// `N_T x d` orthonormal basis of the inter-group null space.
    pub f: CMatrix,
    /// `d x g` reduction map.
    pub g: CMatrix,
}

impl GroupPlan {
    /// `F G`, the map from reduced variables to antenna space.
    pub fn transform(&self) -> CMatrix {
        &self.f * &self.g
    }
}

#[derive(Debug, Clone)]
pub struct GroupingPlan {
    pub n_t: usize,
    pub k: usize,
    pub groups: Vec<GroupPlan>,
}

impl GroupingPlan {
    pub fn group_sets(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(|g| g.users.clone()).collect()
    }

    /// Layout of the expanded precoder: one common per group, then privates.
    pub fn layout(&self, mode: &TransmissionMode) -> StreamLayout {
        StreamLayout::grouped(mode, &self.group_sets(), self.k)
    }

    /// `G^H F^H h` for every user of group `i`, in group order.
    pub fn reduced_channels(&self, i: usize, channels: &[CVector]) -> Vec<CVector> {
        let t = self.groups[i].transform().adjoint();
        self.groups[i].users.iter().map(|&u| &t * &channels[u]).collect()
    }

    /// Largest `|h_m^H F_i G_i v|` over users `m` outside group `i`, for
    /// the given unit-norm test vectors.
    pub fn max_residual(&self, channels: &[CVector], probes: &[CVector]) -> f64 {
        let mut worst: f64 = 0.0;
        for grp in &self.groups {
            let t = grp.transform();
            for (m, h) in channels.iter().enumerate() {
                if grp.users.contains(&m) {
                    continue;
                }
                let row = h.adjoint() * &t;
                for v in probes.iter().filter(|v| v.len() == t.ncols()) {
                    worst = worst.max((&row * v)[(0, 0)].norm());
                }
                // with no probes, the operator norm bound ‖h^H F‖
                if probes.is_empty() {
                    worst = worst.max((h.adjoint() * &grp.f).norm());
                }
            }
        }
        worst
    }

    /// Per-evaluation pair count summed over groups; grows linearly in `K`.
    pub fn pair_count(&self, mode: &TransmissionMode) -> PairCount {
        let mut total = PairCount { pairs: 0, saturated: false };
        for grp in &self.groups {
            let pc = StreamLayout::single_group(mode, grp.users.len()).pair_count();
            match total.pairs.checked_add(pc.pairs) {
                Some(p) if !pc.saturated => total.pairs = p,
                _ => {
                    total.pairs = u128::MAX;
                    total.saturated = true;
                }
            }
        }
        total
    }

    /// Full precoder `[F_1 G_1 v_c1, .., F_i G_i v_k, ..]` in the order of
    /// [`GroupingPlan::layout`].
    pub fn expand(&self, mode: &TransmissionMode, v: &[CMatrix]) -> Result<CMatrix> {
        if v.len() != self.groups.len() {
            return Err(Error::Dimension("one reduced precoder per group".into()));
        }
        let full = self.layout(mode);
        let mut p = CMatrix::zeros(self.n_t, full.n_streams());
        for (i, (grp, vi)) in self.groups.iter().zip(v).enumerate() {
            let local = StreamLayout::single_group(mode, grp.users.len());
            if vi.nrows() != grp.g.ncols() || vi.ncols() != local.n_streams() {
                return Err(Error::Dimension(format!("reduced precoder {i} has the wrong shape")));
            }
            let cols = grp.transform() * vi;
            if let (Some(lc), Some(fc)) = (local.common_streams().next(), full.common_streams().nth(i)) {
                p.set_column(fc, &cols.column(lc));
            }
            for (j, &u) in grp.users.iter().enumerate() {
                if let (Some(lp), Some(fp)) = (local.user(j).private, full.user(u).private) {
                    p.set_column(fp, &cols.column(lp));
                }
            }
        }
        Ok(p)
    }
}

/// Eigenvectors of `A A^H` whose eigenvalues fall below `tol · λ_max`.
fn null_space_basis(a: &CMatrix, n_t: usize) -> CMatrix {
    if a.ncols() == 0 {
        return CMatrix::identity(n_t, n_t);
    }
    let gram = a * a.adjoint();
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n_t)
        .filter(|&i| eig.eigenvalues[i] < NULL_SPACE_TOL * lmax)
        .collect();
    CMatrix::from_fn(n_t, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

pub fn nulling_and_reduction(channels: &[CVector], groups: &[Vec<usize>]) -> Result<GroupingPlan> {
    let k = channels.len();
    let n_t = channels.first().map_or(0, |h| h.len());
    if k == 0 || n_t == 0 {
        return Err(Error::Dimension("no channels".into()));
    }
    if n_t < k {
        return Err(Error::InfeasibleNulling { n_t, k });
    }
    let mut seen = vec![false; k];
    for &u in groups.iter().flatten() {
        if u >= k || std::mem::replace(&mut seen[u], true) {
            return Err(Error::Config("groups must partition the users".into()));
        }
    }
    if seen.iter().any(|s| !s) || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Config("groups must partition the users".into()));
    }

    let mut plans = Vec::with_capacity(groups.len());
    for grp in groups {
        let outside: Vec<CVector> = (0..k).filter(|u| !grp.contains(u)).map(|u| channels[u].clone()).collect();
        let f = if outside.is_empty() {
            CMatrix::identity(n_t, n_t)
        } else {
            null_space_basis(&CMatrix::from_columns(&outside), n_t)
        };
        let inside = CMatrix::from_columns(&grp.iter().map(|&u| channels[u].clone()).collect::<Vec<_>>());
        let reduced = f.adjoint() * inside;
        let svd = reduced.svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::Degenerate("SVD failed".into()));
        };
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * svd.singular_values.max()).count();
        if rank < grp.len() {
            return Err(Error::Degenerate("group channels are rank deficient in the null space".into()));
        }
        // compact factors: U is d x g, V^H is g x g
        let g = u.columns(0, grp.len()) * v_t.rows(0, grp.len());
        plans.push(GroupPlan {
            users: grp.clone(),
            f,
            g,
        });
    }
    Ok(GroupingPlan { n_t, k, groups: plans })
}

/// Rates from the reduced precoders, each user seeing only its group's
/// streams. Entries follow [`GroupingPlan::layout`].
#[allow(clippy::too_many_arguments)]
pub fn grouped_rate_report(
    plan: &GroupingPlan,
    channels: &[CVector],
    v: &[CMatrix],
    mode: &TransmissionMode,
    method: RateMethod,
    noise: NoiseModel,
    mc: Option<McConfig>,
) -> Result<RateReport> {
    if channels.len() != plan.k || v.len() != plan.groups.len() {
        return Err(Error::Dimension("plan, channels and precoders disagree".into()));
    }
    let draws = match method {
        RateMethod::Exact => {
            let mc = mc.unwrap_or_default();
            mc.validate()?;
            Some(mc.unit_draws())
        }
        RateMethod::Approx => None,
    };
    let mut users = vec![None; plan.k];
    for (i, (grp, vi)) in plan.groups.iter().zip(v).enumerate() {
        let local = StreamLayout::single_group(mode, grp.users.len());
        if vi.nrows() != grp.g.ncols() || vi.ncols() != local.n_streams() {
            return Err(Error::Dimension(format!("reduced precoder {i} has the wrong shape")));
        }
        for (j, h) in plan.reduced_channels(i, channels).iter().enumerate() {
            users[grp.users[j]] = Some(user_rates_from_gains(&gains(h, vi), &local, j, method, noise, draws.as_deref()));
        }
    }
    let users = users.into_iter().map(|u| u.expect("groups partition the users")).collect();
    Ok(assemble(&plan.layout(mode), users))
}

/// Builds the per-group blocks of a grouped problem.
pub fn grouped_problem(
    plan: &GroupingPlan,
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    noise: NoiseModel,
    goal: Goal,
) -> Result<RsmaProblem> {
    let blocks = plan
        .groups
        .iter()
        .enumerate()
        .map(|(i, grp)| Block::new(grp.users.clone(), plan.reduced_channels(i, channels), mode))
        .collect();
    RsmaProblem::from_blocks(blocks, plan.k, rx, noise, goal)
}

/// Optimizes the reduced precoders of every group under one shared power
/// budget and returns the expanded precoder.
#[allow(clippy::too_many_arguments)]
pub fn grouped_optimize(
    plan: &GroupingPlan,
    channels: &[CVector],
    mode: &TransmissionMode,
    rx: Receiver,
    objective: ObjectiveKind,
    weights: Option<&[f64]>,
    noise: NoiseModel,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    let goal = match objective {
        ObjectiveKind::Wsr => Goal::Wsr {
            weights: weights.map_or_else(|| vec![1.0; plan.k], <[f64]>::to_vec),
        },
        ObjectiveKind::Mmf => Goal::Mmf {
            gamma: cfg.gamma,
            share: cfg.share_weight,
        },
    };
    let problem = grouped_problem(plan, channels, mode, rx, noise, goal)?;
    let mut res = optimize_problem(&problem, cfg, None)?;
    res.precoder = plan.expand(mode, &res.blocks)?;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationKind;
    use num_complex::Complex64;

    fn e(n: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[i] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn similarity_examples() {
        let h = CVector::from_vec(vec![Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5)]);
        assert!((channel_similarity(&h, &h).unwrap() - 1.0).abs() < 1e-15);
        let scaled = &h * Complex64::new(-0.7, 2.1);
        assert!((channel_similarity(&h, &scaled).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(channel_similarity(&e(2, 0), &e(2, 1)).unwrap(), 0.0);
        assert!(channel_similarity(&h, &CVector::zeros(2)).is_err());
    }

    #[test]
    fn grouping_examples() {
        let ch = [e(2, 0), e(2, 0), e(2, 1), e(2, 1)];
        assert_eq!(group_users(&ch).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(group_users(&[e(2, 0), e(2, 1)]).unwrap(), vec![vec![0, 1]]);
        let odd = group_users(&[e(2, 0), e(2, 1), e(2, 0)]).unwrap();
        assert_eq!(odd, vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn basis_vector_nulling() {
        let ch: Vec<CVector> = (0..4).map(|i| e(4, i)).collect();
        let plan = nulling_and_reduction(&ch, &[vec![0, 1], vec![2, 3]]).unwrap();
        let f = &plan.groups[0].f;
        assert_eq!(f.ncols(), 2);
        // F spans span{e1, e2}
        for r in 2..4 {
            assert!(f.row(r).norm() < 1e-12);
        }
        assert!(plan.max_residual(&ch, &[]) < 1e-12);
    }

    #[test]
    fn single_group_uses_identity() {
        let ch = [
            CVector::from_vec(vec![Complex64::new(1.0, 0.2), Complex64::new(0.1, -0.4)]),
            CVector::from_vec(vec![Complex64::new(-0.3, 0.9), Complex64::new(0.5, 0.5)]),
        ];
        let plan = nulling_and_reduction(&ch, &[vec![0, 1]]).unwrap();
        assert_eq!(plan.groups[0].f, CMatrix::identity(2, 2));
        let t = plan.groups[0].transform();
        let v = CVector::from_vec(vec![Complex64::new(0.4, -1.0), Complex64::new(2.0, 0.3)]);
        assert!(((&t * &v).norm() - v.norm()).abs() < 1e-12);
    }

    #[test]
    fn nulling_needs_enough_antennas() {
        let ch: Vec<CVector> = (0..3).map(|i| e(2, i % 2)).collect();
        assert!(matches!(
            nulling_and_reduction(&ch, &[vec![0, 1], vec![2]]),
            Err(Error::InfeasibleNulling { n_t: 2, k: 3 })
        ));
    }

    #[test]
    fn partition_is_validated() {
        let ch: Vec<CVector> = (0..4).map(|i| e(4, i)).collect();
        assert!(nulling_and_reduction(&ch, &[vec![0, 1], vec![1, 2]]).is_err());
        assert!(nulling_and_reduction(&ch, &[vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn grouped_pair_count_is_per_group() {
        let ch: Vec<CVector> = (0..8).map(|i| e(16, i)).collect();
        let groups: Vec<Vec<usize>> = (0..4).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let plan = nulling_and_reduction(&ch, &groups).unwrap();
        let mode = TransmissionMode::new(Some(ConstellationKind::Qpsk), Some(ConstellationKind::Qpsk), 2);
        // 4 groups of 4^3 = 64 effective points each
        assert_eq!(plan.pair_count(&mode).pairs, 4 * 64 * 64);
    }
}
