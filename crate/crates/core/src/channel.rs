//! Rician MISO channels with ULA/URA line-of-sight steering.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::entropy::RNG_ALGORITHM;
use crate::error::{Error, Result};
use crate::layout::CVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Ula,
    Ura,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    pub n_y: usize,
    #[serde(default = "one")]
    pub n_z: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing: f64,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn ula(n: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Ula,
            n_y: n,
            n_z: 1,
            spacing: 0.5,
        }
    }

    pub fn ura(n_y: usize, n_z: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Ura,
            n_y,
            n_z,
            spacing: 0.5,
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::Config("geometry: n_y and n_z must be positive".into()));
        }
        if self.kind == ArrayKind::Ula && self.n_z != 1 {
            return Err(Error::Config("geometry: a ULA has n_z = 1".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Config("geometry.spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub theta_az: f64,
    pub theta_el: f64,
    /// Linear Rician factor.
    pub kappa: f64,
}

impl UserGeometry {
    pub fn new(theta_az: f64, theta_el: f64, kappa: f64) -> Self {
        UserGeometry {
            theta_az,
            theta_el,
            kappa,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Entries `exp(j 2π d (m sinθ_az cosθ_el + n sinθ_el))`, `m` (along y)
/// fastest. A ULA ignores elevation.
pub fn steering_vector(geom: &ArrayGeometry, theta_az: f64, theta_el: f64) -> CVector {
    let el = match geom.kind {
        ArrayKind::Ula => 0.0,
        ArrayKind::Ura => theta_el,
    };
    let (u, v) = (theta_az.sin() * el.cos(), el.sin());
    CVector::from_iterator(
        geom.n_t(),
        (0..geom.n_z).flat_map(|n| {
            (0..geom.n_y).map(move |m| {
                let phase = 2.0 * PI * geom.spacing * (m as f64 * u + n as f64 * v);
                Complex64::from_polar(1.0, phase)
            })
        }),
    )
}

fn cn01<R: Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// `h = sqrt(κ/(κ+1)) h_LoS + sqrt(1/(κ+1)) h_NLoS` with `h_NLoS ~ CN(0, I)`.
pub fn rician_sample(geom: &ArrayGeometry, users: &[UserGeometry], seed: u64) -> Vec<CVector> {
    rician_sample_stream(geom, users, seed, 0)
}

/// Independent draw `stream` of the seeded sequence (one per realization).
pub fn rician_sample_stream(
    geom: &ArrayGeometry,
    users: &[UserGeometry],
    seed: u64,
    stream: u64,
) -> Vec<CVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    users
        .iter()
        .map(|u| {
            let los = steering_vector(geom, u.theta_az, u.theta_el);
            let a = (u.kappa / (u.kappa + 1.0)).sqrt();
            let b = (1.0 / (u.kappa + 1.0)).sqrt();
            CVector::from_iterator(geom.n_t(), los.iter().map(|l| l * a + cn01(&mut rng) * b))
        })
        .collect()
}

/// JSON dump with complex entries as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub rng: String,
    pub seed: u64,
    pub stream: u64,
    pub channels: Vec<Vec<[f64; 2]>>,
}

impl ChannelDump {
    pub fn new(channels: &[CVector], seed: u64, stream: u64) -> Self {
        ChannelDump {
            rng: RNG_ALGORITHM.to_string(),
            seed,
            stream,
            channels: channels
                .iter()
                .map(|h| h.iter().map(|x| [x.re, x.im]).collect())
                .collect(),
        }
    }

    pub fn to_channels(&self) -> Vec<CVector> {
        self.channels
            .iter()
            .map(|h| CVector::from_iterator(h.len(), h.iter().map(|p| Complex64::new(p[0], p[1]))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadside_ula_is_all_ones() {
        let s = steering_vector(&ArrayGeometry::ula(4), 0.0, 0.3);
        for x in s.iter() {
            assert!((x - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn endfire_two_element_ula() {
        let s = steering_vector(&ArrayGeometry::ula(2), PI / 2.0, 0.0);
        assert!((s[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((s[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let g = ArrayGeometry::ura(4, 3);
        for &(az, el) in &[(0.3, -0.2), (1.2, 0.5), (-0.7, 0.0)] {
            let s = steering_vector(&g, az, el);
            assert_eq!(s.len(), 12);
            assert!(s.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn ura_elevation_phase_progression() {
        let g = ArrayGeometry::ura(2, 2);
        let s = steering_vector(&g, 0.0, PI / 6.0);
        // az = 0: phase only along z, π sin(π/6) = π/2 per element
        assert!((s[2] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((s[1] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn los_limit_recovers_steering_vector() {
        let g = ArrayGeometry::ula(4);
        let u = [UserGeometry::new(0.4, 0.0, 1e12)];
        let h = &rician_sample(&g, &u, 1)[0];
        let s = steering_vector(&g, 0.4, 0.0);
        assert!((h - s).norm() < 1e-5);
    }

    #[test]
    fn seeding_is_reproducible() {
        let g = ArrayGeometry::ula(3);
        let u = [UserGeometry::new(0.1, 0.0, 2.0), UserGeometry::new(-0.3, 0.0, 2.0)];
        assert_eq!(rician_sample(&g, &u, 5), rician_sample(&g, &u, 5));
        assert_ne!(rician_sample(&g, &u, 5), rician_sample(&g, &u, 6));
        assert_ne!(
            rician_sample_stream(&g, &u, 5, 0),
            rician_sample_stream(&g, &u, 5, 1)
        );
    }

    #[test]
    fn dump_roundtrip() {
        let g = ArrayGeometry::ula(2);
        let h = rician_sample(&g, &[UserGeometry::new(0.0, 0.0, 1.0)], 3);
        let dump = ChannelDump::new(&h, 3, 0);
        let text = serde_json::to_string(&dump).unwrap();
        let back: ChannelDump = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_channels(), h);
        assert!(text.contains("ChaCha20"));
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::ula(2).validate().is_ok());
        let mut g = ArrayGeometry::ula(2);
        g.n_z = 2;
        assert!(g.validate().is_err());
        g = ArrayGeometry::ura(2, 2);
        g.spacing = 0.0;
        assert!(g.validate().is_err());
    }
}
