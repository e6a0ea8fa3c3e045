//! Pendulum configurations and the linearized M, D, K matrices.
//!
//! Joints and masses are numbered from the base upward: joint 1 connects the
//! first rod to the foundation and carries stiffness `c_1` and damping `d_1`;
//! mass `m_i` sits at the upper end of rod `i`, so `m_m` is the free-end mass.
//! The follower load `P` acts tangentially on the last rod.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical description of an m-link pendulum with equal link lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigDoc", into = "ConfigDoc")]
pub struct PendulumConfig {
    link_length: f64,
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    dampings: Vec<f64>,
}

/// On-disk JSON layout. `dampings` may be omitted for an undamped pendulum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    link_count: usize,
    link_length: f64,
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    #[serde(default)]
    dampings: Option<Vec<f64>>,
}

impl TryFrom<ConfigDoc> for PendulumConfig {
    type Error = Error;

    fn try_from(doc: ConfigDoc) -> Result<Self> {
        if doc.masses.len() != doc.link_count {
            return Err(Error::InvalidConfig(format!(
                "link_count is {} but {} masses were given",
                doc.link_count,
                doc.masses.len()
            )));
        }
        let dampings = doc.dampings.unwrap_or_else(|| vec![0.0; doc.link_count]);
        PendulumConfig::new(doc.link_length, doc.masses, doc.stiffnesses, dampings)
    }
}

impl From<PendulumConfig> for ConfigDoc {
    fn from(c: PendulumConfig) -> Self {
        ConfigDoc {
            link_count: c.masses.len(),
            link_length: c.link_length,
            masses: c.masses,
            stiffnesses: c.stiffnesses,
            dampings: Some(c.dampings),
        }
    }
}

impl PendulumConfig {
    pub fn new(
        link_length: f64,
        masses: Vec<f64>,
        stiffnesses: Vec<f64>,
        dampings: Vec<f64>,
    ) -> Result<Self> {
        let config = PendulumConfig {
            link_length,
            masses,
            stiffnesses,
            dampings,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn undamped(link_length: f64, masses: Vec<f64>, stiffnesses: Vec<f64>) -> Result<Self> {
        let n = masses.len();
        Self::new(link_length, masses, stiffnesses, vec![0.0; n])
    }

    /// Ziegler's original two-link design: `m_1 = 2`, `m_2 = 1`, `c_1 = c_2 = 1`, `l = 1`.
    pub fn ziegler() -> Self {
        Self::undamped(1.0, vec![2.0, 1.0], vec![1.0, 1.0]).expect("valid constant config")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.masses.len();
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "link_count must be at least 2, got {m}"
            )));
        }
        if self.stiffnesses.len() != m || self.dampings.len() != m {
            return Err(Error::InvalidConfig(format!(
                "expected {m} stiffnesses and dampings, got {} and {}",
                self.stiffnesses.len(),
                self.dampings.len()
            )));
        }
        if !self.link_length.is_finite() {
            return Err(Error::NonFinite("link_length"));
        }
        if self.masses.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("masses"));
        }
        if self.stiffnesses.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stiffnesses"));
        }
        if self.dampings.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("dampings"));
        }
        if self.link_length <= 0.0 {
            return Err(Error::InvalidConfig("link_length must be positive".into()));
        }
        if self.masses.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidConfig("masses must be non-negative".into()));
        }
        if !self.masses.iter().any(|&x| x > 0.0) {
            return Err(Error::InvalidConfig(
                "at least one mass must be positive".into(),
            ));
        }
        if self.stiffnesses.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidConfig("stiffnesses must be positive".into()));
        }
        if self.dampings.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidConfig("dampings must be non-negative".into()));
        }
        Ok(())
    }

    pub fn link_count(&self) -> usize {
        self.masses.len()
    }

    pub fn link_length(&self) -> f64 {
        self.link_length
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn stiffnesses(&self) -> &[f64] {
        &self.stiffnesses
    }

    pub fn dampings(&self) -> &[f64] {
        &self.dampings
    }

    pub fn is_damped(&self) -> bool {
        self.dampings.iter().any(|&d| d != 0.0)
    }

    /// Stiffness of the last joint, used to normalize loads as `p = P l / c_m`.
    pub fn free_end_stiffness(&self) -> f64 {
        *self.stiffnesses.last().expect("validated config")
    }

    /// Normalized load `p = P l / c_m`.
    pub fn normalize_load(&self, load: f64) -> f64 {
        load * self.link_length / self.free_end_stiffness()
    }

    /// Physical load from a normalized value.
    pub fn denormalize_load(&self, p: f64) -> f64 {
        p * self.free_end_stiffness() / self.link_length
    }

    pub fn with_masses(&self, masses: Vec<f64>) -> Result<Self> {
        Self::new(
            self.link_length,
            masses,
            self.stiffnesses.clone(),
            self.dampings.clone(),
        )
    }

    pub fn with_stiffnesses(&self, stiffnesses: Vec<f64>) -> Result<Self> {
        Self::new(
            self.link_length,
            self.masses.clone(),
            stiffnesses,
            self.dampings.clone(),
        )
    }

    pub fn with_dampings(&self, dampings: Vec<f64>) -> Result<Self> {
        Self::new(
            self.link_length,
            self.masses.clone(),
            self.stiffnesses.clone(),
            dampings,
        )
    }
}

/// Mass, damping and stiffness matrices at a fixed follower load.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTriple {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub load: f64,
}

impl MatrixTriple {
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn is_undamped(&self) -> bool {
        self.damping.iter().all(|&x| x == 0.0)
    }
}

/// `M[i][j] = l^2 * sum_{k >= max(i, j)} m_k`.
pub fn mass_matrix(config: &PendulumConfig) -> DMatrix<f64> {
    mass_matrix_of(config.link_length, &config.masses)
}

/// Mass matrix for an arbitrary mass vector. M is linear in the masses, so
/// this also gives its derivative along a direction in mass space.
pub fn mass_matrix_of(link_length: f64, masses: &[f64]) -> DMatrix<f64> {
    let m = masses.len();
    let l2 = link_length * link_length;
    // tail[k] = m_k + ... + m_m
    let mut tail = vec![0.0; m + 1];
    for k in (0..m).rev() {
        tail[k] = tail[k + 1] + masses[k];
    }
    DMatrix::from_fn(m, m, |i, j| l2 * tail[i.max(j)])
}

fn chain_matrix(coeffs: &[f64]) -> DMatrix<f64> {
    let m = coeffs.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        out[(i, i)] = coeffs[i] + coeffs.get(i + 1).copied().unwrap_or(0.0);
        if i + 1 < m {
            out[(i, i + 1)] = -coeffs[i + 1];
            out[(i + 1, i)] = -coeffs[i + 1];
        }
    }
    out
}

pub fn damping_matrix(config: &PendulumConfig) -> DMatrix<f64> {
    chain_matrix(&config.dampings)
}

/// Load-free part of K: the symmetric joint-spring chain.
pub fn elastic_stiffness(config: &PendulumConfig) -> DMatrix<f64> {
    chain_matrix(&config.stiffnesses)
}

/// Coefficient of `P` in K: `-l` on the first `m-1` diagonal entries and
/// `+l` in the last column of the same rows.
pub fn follower_stiffness(config: &PendulumConfig) -> DMatrix<f64> {
    let m = config.link_count();
    let l = config.link_length;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m - 1 {
        out[(i, i)] -= l;
        out[(i, m - 1)] += l;
    }
    out
}

pub fn assemble(config: &PendulumConfig, load: f64) -> Result<MatrixTriple> {
    config.validate()?;
    if !load.is_finite() {
        return Err(Error::NonFinite("load"));
    }
    let stiffness = elastic_stiffness(config) + follower_stiffness(config) * load;
    Ok(MatrixTriple {
        mass: mass_matrix(config),
        damping: damping_matrix(config),
        stiffness,
        load,
    })
}

/// `det M = l^{2m} * prod m_i`.
pub fn mass_determinant(config: &PendulumConfig) -> f64 {
    let m = config.link_count() as i32;
    config.link_length.powi(2 * m) * config.masses.iter().product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat())
    }

    #[test]
    fn ziegler_matrices_at_load_two() {
        let t = assemble(&PendulumConfig::ziegler(), 2.0).unwrap();
        assert_eq!(t.mass, mat(&[&[3.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(t.stiffness, mat(&[&[0.0, 1.0], &[-1.0, 1.0]]));
        assert!(t.is_undamped());
    }

    #[test]
    fn two_link_damping_pattern() {
        let c = PendulumConfig::new(1.0, vec![2.0, 1.0], vec![1.0, 1.0], vec![0.3, 0.7]).unwrap();
        let t = assemble(&c, 0.0).unwrap();
        assert_eq!(t.damping, mat(&[&[1.0, -0.7], &[-0.7, 0.7]]));
    }

    #[test]
    fn stiffness_symmetric_without_load() {
        let c = PendulumConfig::undamped(1.3, vec![0.4, 2.0, 1.0], vec![1.0, 3.0, 2.0]).unwrap();
        let k = assemble(&c, 0.0).unwrap().stiffness;
        assert_eq!(k, k.transpose());
        let k = assemble(&c, 0.5).unwrap().stiffness;
        assert_ne!(k, k.transpose());
    }

    #[test]
    fn three_link_mass_matrix_on_quarter_circle() {
        let (s, co) = FRAC_PI_4.sin_cos();
        let c = PendulumConfig::undamped(1.0, vec![10.0, co, s], vec![1.0; 3]).unwrap();
        let mm = mass_matrix(&c);
        let h = 2f64.sqrt() / 2.0;
        assert!((mm[(0, 0)] - (10.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!((mm[(1, 2)] - h).abs() < 1e-15);
        assert!((mm[(2, 2)] - h).abs() < 1e-15);
    }

    #[test]
    fn three_link_stiffness_last_rows() {
        let c = PendulumConfig::undamped(2.0, vec![1.0; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let k = assemble(&c, 0.5).unwrap().stiffness;
        let expect = mat(&[
            &[3.0 - 1.0, -2.0, 1.0],
            &[-2.0, 5.0 - 1.0, -3.0 + 1.0],
            &[0.0, -3.0, 3.0],
        ]);
        assert_eq!(k, expect);
    }

    #[test]
    fn mass_determinant_values() {
        assert_eq!(mass_determinant(&PendulumConfig::ziegler()), 2.0);
        let c = PendulumConfig::undamped(2.0, vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(mass_determinant(&c), 64.0);
        let c = PendulumConfig::undamped(1.0, vec![0.0, 1.0], vec![1.0; 2]).unwrap();
        assert_eq!(mass_determinant(&c), 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(PendulumConfig::undamped(1.0, vec![1.0], vec![1.0]).is_err());
        assert!(PendulumConfig::undamped(0.0, vec![1.0; 2], vec![1.0; 2]).is_err());
        assert!(PendulumConfig::undamped(1.0, vec![0.0; 2], vec![1.0; 2]).is_err());
        assert!(PendulumConfig::undamped(1.0, vec![1.0; 2], vec![1.0, 0.0]).is_err());
        assert!(PendulumConfig::undamped(1.0, vec![-1.0, 1.0], vec![1.0; 2]).is_err());
        assert_eq!(
            PendulumConfig::undamped(1.0, vec![f64::NAN, 1.0], vec![1.0; 2]),
            Err(Error::NonFinite("masses"))
        );
        assert_eq!(
            assemble(&PendulumConfig::ziegler(), f64::INFINITY),
            Err(Error::NonFinite("load"))
        );
    }

    #[test]
    fn json_dampings_default_to_zero() {
        let c = PendulumConfig::from_json(
            r#"{"link_count": 2, "link_length": 1, "masses": [2, 1], "stiffnesses": [1, 1]}"#,
        )
        .unwrap();
        assert_eq!(c, PendulumConfig::ziegler());
        assert!(PendulumConfig::from_json(
            r#"{"link_count": 3, "link_length": 1, "masses": [2, 1], "stiffnesses": [1, 1]}"#,
        )
        .is_err());
        let back: PendulumConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
