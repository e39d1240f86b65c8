//! Stream bookkeeping: which precoder column carries which symbol stream,
//! and which streams each user decodes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constellation::{alphabet_pair_count, Constellation, PairCount, TransmissionMode};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
/// `N_T x S` matrix, one column per active stream in layout order.
pub type PrecoderMatrix = CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Common { group: usize },
    Private { user: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub role: StreamRole,
    pub alphabet: Constellation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UserStreams {
    pub common: Option<usize>,
    pub private: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamLayout {
    streams: Vec<Stream>,
    users: Vec<UserStreams>,
    groups: Vec<Vec<usize>>,
}

impl StreamLayout {
    /// One common stream shared by all `k` users (when the mode has one),
    /// followed by the private streams in user order.
    pub fn single_group(mode: &TransmissionMode, k: usize) -> Self {
        Self::grouped(mode, &[(0..k).collect()], k)
    }

    /// One common stream per group, then the private streams of users
    /// `0..k`. Columns: `[p_G1, p_G2, .., p_1, .., p_K]`.
    pub fn grouped(mode: &TransmissionMode, groups: &[Vec<usize>], k: usize) -> Self {
        let mut streams = Vec::new();
        let mut users = vec![UserStreams::default(); k];
        if let Some(c) = &mode.common {
            for (gi, g) in groups.iter().enumerate() {
                let idx = streams.len();
                streams.push(Stream {
                    role: StreamRole::Common { group: gi },
                    alphabet: c.clone(),
                });
                for &u in g {
                    users[u].common = Some(idx);
                }
            }
        }
        if let Some(p) = &mode.private {
            for (u, us) in users.iter_mut().enumerate() {
                us.private = Some(streams.len());
                streams.push(Stream {
                    role: StreamRole::Private { user: u },
                    alphabet: p.clone(),
                });
            }
        }
        StreamLayout {
            streams,
            users,
            groups: groups.to_vec(),
        }
    }

    /// Private streams only, one per user.
    pub fn privates_only(alphabet: &Constellation, k: usize) -> Self {
        let streams = (0..k)
            .map(|u| Stream {
                role: StreamRole::Private { user: u },
                alphabet: alphabet.clone(),
            })
            .collect();
        let users = (0..k)
            .map(|u| UserStreams {
                common: None,
                private: Some(u),
            })
            .collect();
        StreamLayout {
            streams,
            users,
            groups: vec![(0..k).collect()],
        }
    }

    pub fn n_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn streams(&self) -> &[Stream] {
        &self.streams
    }

    pub fn user(&self, k: usize) -> UserStreams {
        self.users[k]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn common_streams(&self) -> impl Iterator<Item = usize> + '_ {
        self.streams
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.role, StreamRole::Common { .. }))
            .map(|(i, _)| i)
    }

    pub fn alphabets(&self) -> Vec<&Constellation> {
        self.streams.iter().map(|s| &s.alphabet).collect()
    }

    pub fn pair_count(&self) -> PairCount {
        alphabet_pair_count(&self.alphabets())
    }

    pub fn check_tractable(&self, budget: f64) -> Result<()> {
        let pc = self.pair_count();
        if pc.exceeds(budget) {
            Err(Error::Intractable {
                pairs: pc.as_f64(),
                budget,
            })
        } else {
            Ok(())
        }
    }

    pub fn check_precoder(&self, p: &PrecoderMatrix, n_t: usize) -> Result<()> {
        if p.ncols() != self.n_streams() || p.nrows() != n_t {
            return Err(Error::Dimension(format!(
                "precoder is {}x{}, layout needs {}x{}",
                p.nrows(),
                p.ncols(),
                n_t,
                self.n_streams()
            )));
        }
        Ok(())
    }
}

/// `g_a = h^H p_a` for every column.
pub fn gains(h: &CVector, p: &CMatrix) -> Vec<Complex64> {
    (0..p.ncols())
        .map(|a| h.iter().zip(p.column(a).iter()).map(|(hi, pi)| hi.conj() * pi).sum())
        .collect()
}

pub fn frobenius_sq(p: &CMatrix) -> f64 {
    p.iter().map(|x| x.norm_sqr()).sum()
}

/// `Re tr(A^H B)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}
