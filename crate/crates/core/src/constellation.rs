//! Finite constellations, transmission-mode dictionaries and the effective
//! received-point multisets that every rate expression is built from.
//!
//! All constellations are normalized to zero mean and unit average power.
//! Layouts for the non-square orders are rectangular grids:
//! 8QAM is `{±1,±3} x {±1}` and 512QAM is a 32x16 grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default budget on the number of `(m, l)` difference pairs one entropy
/// evaluation may touch.
pub const DEFAULT_PAIR_BUDGET: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstellationKind {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8QAM")]
    Qam8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
    #[serde(rename = "256QAM")]
    Qam256,
    #[serde(rename = "512QAM")]
    Qam512,
}

impl ConstellationKind {
    pub const ALL: [ConstellationKind; 7] = [
        ConstellationKind::Bpsk,
        ConstellationKind::Qpsk,
        ConstellationKind::Qam8,
        ConstellationKind::Qam16,
        ConstellationKind::Qam64,
        ConstellationKind::Qam256,
        ConstellationKind::Qam512,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstellationKind::Bpsk => "BPSK",
            ConstellationKind::Qpsk => "QPSK",
            ConstellationKind::Qam8 => "8QAM",
            ConstellationKind::Qam16 => "16QAM",
            ConstellationKind::Qam64 => "64QAM",
            ConstellationKind::Qam256 => "256QAM",
            ConstellationKind::Qam512 => "512QAM",
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            ConstellationKind::Bpsk => 1,
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Qam8 => 3,
            ConstellationKind::Qam16 => 4,
            ConstellationKind::Qam64 => 6,
            ConstellationKind::Qam256 => 8,
            ConstellationKind::Qam512 => 9,
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        ConstellationKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == upper)
            .ok_or_else(|| Error::Config(format!("unknown constellation `{s}`")))
    }
}

/// A finite, uniformly used signal alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    bits: u32,
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log2 |X|` in bits.
    pub fn log2_len(&self) -> f64 {
        self.bits as f64
    }
}

/// Rectangular grid with odd-integer coordinates, normalized to unit power.
fn rectangular_grid(n_i: usize, n_q: usize) -> Vec<Complex64> {
    let level = |idx: usize, n: usize| 2.0 * idx as f64 - (n as f64 - 1.0);
    let mut pts = Vec::with_capacity(n_i * n_q);
    for q in 0..n_q {
        for i in 0..n_i {
            pts.push(Complex64::new(level(i, n_i), level(q, n_q)));
        }
    }
    normalize(pts)
}

fn normalize(mut pts: Vec<Complex64>) -> Vec<Complex64> {
    let power = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
    let scale = power.sqrt().recip();
    for p in &mut pts {
        *p *= scale;
    }
    pts
}

pub fn standard_constellation(kind: ConstellationKind) -> Constellation {
    let points = match kind {
        ConstellationKind::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        ConstellationKind::Qpsk => rectangular_grid(2, 2),
        ConstellationKind::Qam8 => {
            // 4x2 grid: I in {±1,±3}, Q in {±1}
            let mut pts = Vec::with_capacity(8);
            for q in [-1.0, 1.0] {
                for i in [-3.0, -1.0, 1.0, 3.0] {
                    pts.push(Complex64::new(i, q));
                }
            }
            normalize(pts)
        }
        ConstellationKind::Qam16 => rectangular_grid(4, 4),
        ConstellationKind::Qam64 => rectangular_grid(8, 8),
        ConstellationKind::Qam256 => rectangular_grid(16, 16),
        ConstellationKind::Qam512 => rectangular_grid(32, 16),
    };
    Constellation {
        kind,
        points,
        bits: kind.bits(),
    }
}

/// One (common, private) constellation pair. Either side may be absent:
/// no common stream is plain SDMA, no private stream is pure multicast.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMode {
    pub common: Option<Constellation>,
    pub private: Option<Constellation>,
    pub r_max_bits: u32,
}

impl TransmissionMode {
    pub fn new(
        common: Option<ConstellationKind>,
        private: Option<ConstellationKind>,
        k: usize,
    ) -> Self {
        let bits = common.map_or(0, |c| c.bits()) + private.map_or(0, |p| p.bits()) * k as u32;
        TransmissionMode {
            common: common.map(standard_constellation),
            private: private.map(standard_constellation),
            r_max_bits: bits,
        }
    }

    pub fn has_common(&self) -> bool {
        self.common.is_some()
    }

    pub fn label(&self) -> String {
        let c = self.common.as_ref().map_or("-", |c| c.name());
        let p = self.private.as_ref().map_or("-", |p| p.name());
        format!("{c}/{p}")
    }

    /// Total bits carried per channel use with `k` private streams.
    pub fn total_bits(&self, k: usize) -> u32 {
        self.common.as_ref().map_or(0, |c| c.bits())
            + self.private.as_ref().map_or(0, |p| p.bits()) * k as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDictionary {
    pub k: usize,
    pub r_max_bits: u32,
    pub modes: Vec<TransmissionMode>,
}

impl ModeDictionary {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// The SDMA mode (first entry, no common stream).
    pub fn sdma_mode(&self) -> Result<&TransmissionMode> {
        match self.modes.first() {
            Some(m) if !m.has_common() => Ok(m),
            _ => Err(Error::Config(
                "mode dictionary: first mode must have no common stream".into(),
            )),
        }
    }

    fn from_kinds(
        k: usize,
        r_max_bits: u32,
        kinds: &[(Option<ConstellationKind>, Option<ConstellationKind>)],
    ) -> Result<Self> {
        let modes: Vec<_> = kinds
            .iter()
            .map(|&(c, p)| TransmissionMode::new(c, p, k))
            .collect();
        for (i, m) in modes.iter().enumerate() {
            if m.common.is_none() && m.private.is_none() {
                return Err(Error::Config(format!("modes[{i}]: mode carries no stream")));
            }
            if m.r_max_bits != r_max_bits {
                return Err(Error::Config(format!(
                    "modes[{i}] ({}) carries {} bits, dictionary declares r_max_bits = {r_max_bits}",
                    m.label(),
                    m.r_max_bits
                )));
            }
        }
        if modes.is_empty() {
            return Err(Error::Config("modes: dictionary is empty".into()));
        }
        Ok(ModeDictionary {
            k,
            r_max_bits,
            modes,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DictionaryFile = serde_json::from_str(s)?;
        file.into_dictionary()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file_format(&self) -> DictionaryFile {
        DictionaryFile {
            k: self.k,
            r_max_bits: self.r_max_bits,
            modes: self
                .modes
                .iter()
                .map(|m| ModeEntry {
                    common: m.common.as_ref().map(|c| c.kind()),
                    private: m.private.as_ref().map(|p| p.kind()),
                })
                .collect(),
        }
    }
}

/// On-disk schema for user-supplied dictionaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub r_max_bits: u32,
    pub modes: Vec<ModeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub common: Option<ConstellationKind>,
    pub private: Option<ConstellationKind>,
}

impl DictionaryFile {
    pub fn into_dictionary(self) -> Result<ModeDictionary> {
        let kinds: Vec<_> = self.modes.iter().map(|m| (m.common, m.private)).collect();
        ModeDictionary::from_kinds(self.k, self.r_max_bits, &kinds)
    }
}

/// Built-in dictionaries keyed by `(K, R_max)`.
pub fn mode_dictionary(k: usize, r_max_bits: u32) -> Result<ModeDictionary> {
    use ConstellationKind::*;
    let kinds: &[(Option<ConstellationKind>, Option<ConstellationKind>)] = match (k, r_max_bits) {
        (2, 6) => &[
            (None, Some(Qam8)),
            (Some(Qpsk), Some(Qpsk)),
            (Some(Qam16), Some(Bpsk)),
            (Some(Qam64), None),
        ],
        (2, 8) => &[
            (None, Some(Qam16)),
            (Some(Qpsk), Some(Qam8)),
            (Some(Qam16), Some(Qpsk)),
            (Some(Qam64), Some(Bpsk)),
            (Some(Qam256), None),
        ],
        (3, 6) => &[
            (None, Some(Qpsk)),
            (Some(Qam8), Some(Bpsk)),
            (Some(Qam64), None),
        ],
        (3, 9) => &[
            (None, Some(Qam8)),
            (Some(Qam8), Some(Qpsk)),
            (Some(Qam64), Some(Bpsk)),
            (Some(Qam512), None),
        ],
        _ => {
            return Err(Error::Config(format!(
                "no built-in mode dictionary for K = {k}, r_max_bits = {r_max_bits}"
            )))
        }
    };
    ModeDictionary::from_kinds(k, r_max_bits, kinds)
}

/// The multiset `{ Σ_a g_a x_a : x_a ∈ X_a }`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePointSet {
    pub points: Vec<Complex64>,
    pub source_cardinalities: Vec<usize>,
}

impl EffectivePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Enumerates all weighted sums in mixed-radix order, last source fastest.
pub fn effective_points(gains: &[Complex64], alphabets: &[&Constellation]) -> EffectivePointSet {
    assert_eq!(
        gains.len(),
        alphabets.len(),
        "one gain per alphabet required"
    );
    let mut points = vec![Complex64::new(0.0, 0.0)];
    for (g, x) in gains.iter().zip(alphabets) {
        let mut next = Vec::with_capacity(points.len() * x.len());
        for &base in &points {
            for &s in x.points() {
                next.push(base + g * s);
            }
        }
        points = next;
    }
    EffectivePointSet {
        points,
        source_cardinalities: alphabets.iter().map(|x| x.len()).collect(),
    }
}

/// Number of `(m, l)` pairs an entropy over the product alphabet touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCount {
    pub pairs: u128,
    pub saturated: bool,
}

impl PairCount {
    pub fn as_f64(&self) -> f64 {
        if self.saturated {
            f64::INFINITY
        } else {
            self.pairs as f64
        }
    }

    pub fn exceeds(&self, budget: f64) -> bool {
        self.as_f64() > budget
    }
}

pub fn pair_count(cardinalities: impl IntoIterator<Item = usize>) -> PairCount {
    let mut product: u128 = 1;
    let mut saturated = false;
    for c in cardinalities {
        match product.checked_mul(c as u128) {
            Some(p) => product = p,
            None => {
                saturated = true;
                product = u128::MAX;
            }
        }
    }
    let pairs = if saturated {
        u128::MAX
    } else {
        match product.checked_mul(product) {
            Some(p) => p,
            None => {
                saturated = true;
                u128::MAX
            }
        }
    };
    PairCount { pairs, saturated }
}

pub fn alphabet_pair_count(alphabets: &[&Constellation]) -> PairCount {
    pair_count(alphabets.iter().map(|x| x.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_power(c: &Constellation) -> (Complex64, f64) {
        let n = c.len() as f64;
        let mean = c.points().iter().sum::<Complex64>() / n;
        let power = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
        (mean, power)
    }

    #[test]
    fn every_standard_constellation_is_normalized() {
        for kind in ConstellationKind::ALL {
            let c = standard_constellation(kind);
            assert_eq!(c.len(), 1usize << c.bits(), "{kind}");
            let (mean, power) = mean_and_power(&c);
            assert!(mean.norm() < 1e-12, "{kind} mean {mean}");
            assert!((power - 1.0).abs() < 1e-12, "{kind} power {power}");
            for (i, a) in c.points().iter().enumerate() {
                for b in &c.points()[i + 1..] {
                    assert!((a - b).norm() > 1e-9, "{kind} has duplicate points");
                }
            }
        }
    }

    #[test]
    fn small_constellation_layouts() {
        let bpsk = standard_constellation(ConstellationKind::Bpsk);
        assert_eq!(bpsk.points(), &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);

        let qpsk = standard_constellation(ConstellationKind::Qpsk);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for p in qpsk.points() {
            assert!((p.re.abs() - r).abs() < 1e-15 && (p.im.abs() - r).abs() < 1e-15);
        }

        let qam16 = standard_constellation(ConstellationKind::Qam16);
        let scale = 10f64.sqrt();
        for p in qam16.points() {
            let (i, q) = (p.re * scale, p.im * scale);
            assert!((i.round() - i).abs() < 1e-12 && (q.round() - q).abs() < 1e-12);
            assert!([1.0, 3.0].contains(&i.abs().round()));
        }
    }

    #[test]
    fn builtin_dictionaries() {
        let d = mode_dictionary(2, 6).unwrap();
        let labels: Vec<_> = d.modes.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["-/8QAM", "QPSK/QPSK", "16QAM/BPSK", "64QAM/-"]);

        let d = mode_dictionary(3, 9).unwrap();
        let labels: Vec<_> = d.modes.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["-/8QAM", "8QAM/QPSK", "64QAM/BPSK", "512QAM/-"]);

        let d = mode_dictionary(2, 8).unwrap();
        assert_eq!(d.modes[1].label(), "QPSK/8QAM");
        assert_eq!(d.modes[1].total_bits(2), 8);

        for (k, r) in [(2, 6), (2, 8), (3, 6), (3, 9)] {
            let d = mode_dictionary(k, r).unwrap();
            assert!(!d.modes[0].has_common());
            for m in &d.modes {
                assert_eq!(m.total_bits(k), r);
                for c in m.common.iter().chain(m.private.iter()) {
                    let (mean, power) = mean_and_power(c);
                    assert!(mean.norm() < 1e-12 && (power - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unknown_dictionary_is_config_error() {
        assert!(matches!(mode_dictionary(4, 6), Err(Error::Config(_))));
    }

    #[test]
    fn dictionary_file_roundtrip_and_validation() {
        let json = r#"{"K": 2, "r_max_bits": 4, "modes": [
            {"common": null, "private": "QPSK"},
            {"common": "QPSK", "private": "BPSK"},
            {"common": "16QAM", "private": null}
        ]}"#;
        let d = ModeDictionary::from_json_str(json).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.modes[1].label(), "QPSK/BPSK");
        let again = serde_json::to_string(&d.to_file_format()).unwrap();
        assert_eq!(ModeDictionary::from_json_str(&again).unwrap(), d);

        let bad = r#"{"K": 2, "r_max_bits": 5, "modes": [{"common": null, "private": "QPSK"}]}"#;
        assert!(ModeDictionary::from_json_str(bad).is_err());
        let unknown = r#"{"K": 2, "r_max_bits": 4, "modes": [{"common": null, "private": "7QAM"}]}"#;
        assert!(ModeDictionary::from_json_str(unknown).is_err());
    }

    #[test]
    fn effective_point_examples() {
        let bpsk = standard_constellation(ConstellationKind::Bpsk);
        let one = Complex64::new(1.0, 0.0);
        let e = effective_points(&[one], &[&bpsk]);
        assert_eq!(e.points, vec![one, -one]);

        let e = effective_points(&[one, Complex64::new(0.5, 0.0)], &[&bpsk, &bpsk]);
        let re: Vec<f64> = e.points.iter().map(|p| p.re).collect();
        assert_eq!(re, vec![1.5, 0.5, -0.5, -1.5]);

        let e = effective_points(&[], &[]);
        assert_eq!(e.points, vec![Complex64::new(0.0, 0.0)]);
        assert!(e.source_cardinalities.is_empty());
    }

    #[test]
    fn pair_count_examples() {
        let qpsk = standard_constellation(ConstellationKind::Qpsk);
        assert_eq!(alphabet_pair_count(&[&qpsk, &qpsk, &qpsk]).pairs, 4096);
        assert_eq!(alphabet_pair_count(&[]).pairs, 1);
        let q64 = standard_constellation(ConstellationKind::Qam64);
        let pc = alphabet_pair_count(&[&q64, &q64, &q64]);
        assert_eq!(pc.pairs, 1u128 << 36);
        assert!(pc.exceeds(DEFAULT_PAIR_BUDGET));
        let huge = pair_count(std::iter::repeat(512).take(20));
        assert!(huge.saturated && huge.exceeds(DEFAULT_PAIR_BUDGET));
    }
}
