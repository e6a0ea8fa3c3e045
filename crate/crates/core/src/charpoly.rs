//! Characteristic polynomials of the quadratic pencil `det(λ²M + λD + K)`.
//!
//! Coefficients are obtained by a division-free expansion of the pencil
//! determinant carried out in double-double arithmetic, so a singular mass
//! matrix is handled naturally: the leading coefficients simply vanish and
//! the corresponding eigenvalues are counted as lying at infinity.

use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{det, Dd, Poly};
use crate::error::{Error, Result};
use crate::model::{self, MatrixTriple, PendulumConfig};

/// Leading coefficients with `|a| <= DEFLATION_TOL * max|a_i|` are treated as zero.
pub const DEFLATION_TOL: f64 = 1e-13;

/// Real polynomial with degree-descending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealPoly {
    coeffs: Vec<f64>,
}

impl RealPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(
            !coeffs.is_empty(),
            "polynomial needs at least one coefficient"
        );
        RealPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn nominal_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs_coeff() == 0.0
    }

    /// Number of leading coefficients that are negligible relative to the
    /// largest one. For the zero polynomial this is the full length.
    pub fn leading_negligible(&self, tol: f64) -> usize {
        let cutoff = tol * self.max_abs_coeff();
        self.coeffs.iter().take_while(|a| a.abs() <= cutoff).count()
    }

    pub fn effective_degree(&self) -> usize {
        self.nominal_degree()
            .saturating_sub(self.leading_negligible(DEFLATION_TOL))
    }

    /// Roots lost to infinity by leading-coefficient deflation.
    pub fn infinite_count(&self) -> usize {
        self.nominal_degree() - self.effective_degree()
    }

    /// Coefficients with negligible leading terms stripped.
    pub fn deflated(&self) -> &[f64] {
        let skip = self
            .leading_negligible(DEFLATION_TOL)
            .min(self.coeffs.len() - 1);
        &self.coeffs[skip..]
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner_compensated(&self.coeffs, x)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }

    pub fn derivative(&self) -> RealPoly {
        let n = self.nominal_degree();
        if n == 0 {
            return RealPoly::new(vec![0.0]);
        }
        RealPoly::new(
            self.coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, &a)| a * (n - i) as f64)
                .collect(),
        )
    }
}

/// Horner evaluation with error-free transformations (compensated Horner).
pub fn horner_compensated(coeffs: &[f64], x: f64) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &a in coeffs {
        let p = s * x;
        let pe = s.mul_add(x, -p);
        let t = p + a;
        let bb = t - p;
        let se = (p - (t - bb)) + (a - bb);
        s = t;
        c = c.mul_add(x, pe + se);
    }
    s + c
}

/// Characteristic polynomial in `λ` of nominal degree `2m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPoly(RealPoly);

/// Characteristic polynomial in `μ = λ²` of nominal degree `m` (undamped pencils).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPoly(RealPoly);

impl CharPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        CharPoly(RealPoly::new(coeffs))
    }

    pub fn poly(&self) -> &RealPoly {
        &self.0
    }

    /// Largest odd-power coefficient relative to the largest coefficient.
    pub fn odd_ratio(&self) -> f64 {
        let max = self.max_abs_coeff();
        if max == 0.0 {
            return 0.0;
        }
        let n = self.nominal_degree();
        self.coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| (n - i) % 2 == 1)
            .fold(0.0f64, |m, (_, a)| m.max(a.abs()))
            / max
    }
}

impl MuPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        MuPoly(RealPoly::new(coeffs))
    }

    pub fn poly(&self) -> &RealPoly {
        &self.0
    }
}

impl Deref for CharPoly {
    type Target = RealPoly;
    fn deref(&self) -> &RealPoly {
        &self.0
    }
}

impl Deref for MuPoly {
    type Target = RealPoly;
    fn deref(&self) -> &RealPoly {
        &self.0
    }
}

fn pencil_entries(triple: &MatrixTriple) -> Vec<Vec<Poly<Dd>>> {
    let n = triple.dim();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    Poly(vec![
                        Dd::new(triple.stiffness[(i, j)]),
                        Dd::new(triple.damping[(i, j)]),
                        Dd::new(triple.mass[(i, j)]),
                    ])
                })
                .collect()
        })
        .collect()
}

/// Coefficients of `det(λ²M + λD + K)`, degree-descending.
pub fn char_poly(triple: &MatrixTriple) -> CharPoly {
    let ascending = det(&pencil_entries(triple)).0;
    CharPoly::new(ascending.iter().rev().map(|c| c.to_f64()).collect())
}

/// Two-degree-of-freedom shortcut
/// `det M λ⁴ + (tr M tr K - tr(MK)) λ² + det K`, evaluated directly in f64.
pub fn char_poly_2dof_trace(triple: &MatrixTriple) -> Result<CharPoly> {
    if triple.dim() != 2 {
        return Err(Error::Unsupported("a two-link pencil"));
    }
    if !triple.is_undamped() {
        return Err(Error::Unsupported("an undamped pencil"));
    }
    let m = &triple.mass;
    let k = &triple.stiffness;
    let mk = m * k;
    let middle = m.trace() * k.trace() - mk.trace();
    Ok(CharPoly::new(vec![
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        0.0,
        middle,
        0.0,
        k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)],
    ]))
}

/// Re-index an even polynomial in `λ` as a polynomial in `μ = λ²`.
pub fn to_mu_poly(p: &CharPoly, tol: f64) -> Result<MuPoly> {
    let ratio = p.odd_ratio();
    if ratio > tol {
        return Err(Error::OddCoefficientsPresent(ratio));
    }
    let n = p.nominal_degree();
    Ok(MuPoly::new(
        p.coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| (n - i).is_multiple_of(2))
            .map(|(_, &a)| a)
            .collect(),
    ))
}

/// Characteristic polynomial of one configuration as a polynomial in the load:
/// `coeff[k](P)` for every power of `λ`. Assembled once, evaluated per load.
#[derive(Debug, Clone)]
pub struct LoadFamily {
    /// `table[i]` is the polynomial in `P` (descending) multiplying `λ^{2m-i}`.
    table: Vec<Vec<f64>>,
    damped: bool,
}

impl LoadFamily {
    pub fn new(config: &PendulumConfig) -> Result<Self> {
        config.validate()?;
        let m = config.link_count();
        let mass = model::mass_matrix(config);
        let damping = model::damping_matrix(config);
        let k0 = model::elastic_stiffness(config);
        let k1 = model::follower_stiffness(config);
        let entries: Vec<Vec<Poly<Poly<Dd>>>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        Poly(vec![
                            Poly(vec![Dd::new(k0[(i, j)]), Dd::new(k1[(i, j)])]),
                            Poly(vec![Dd::new(damping[(i, j)])]),
                            Poly(vec![Dd::new(mass[(i, j)])]),
                        ])
                    })
                    .collect()
            })
            .collect();
        let ascending = det(&entries).0;
        let mut table: Vec<Vec<f64>> = ascending
            .iter()
            .rev()
            .map(|c| c.0.iter().rev().map(|x| x.to_f64()).collect())
            .collect();
        table.resize(2 * m + 1, Vec::new());
        Ok(LoadFamily {
            table,
            damped: config.is_damped(),
        })
    }

    pub fn link_count(&self) -> usize {
        (self.table.len() - 1) / 2
    }

    pub fn is_damped(&self) -> bool {
        self.damped
    }

    fn coeff_at(poly_in_load: &[f64], load: f64) -> f64 {
        horner_compensated(poly_in_load, load)
    }

    pub fn char_poly_at(&self, load: f64) -> CharPoly {
        CharPoly::new(self.table.iter().map(|c| Self::coeff_at(c, load)).collect())
    }

    /// Writes the μ-coefficients at `load` into `out` (undamped only) and
    /// returns how many there are; `None` when `out` is too short.
    pub(crate) fn mu_coeffs_into(&self, load: f64, out: &mut [f64]) -> Option<usize> {
        let n = self.table.len().div_ceil(2);
        if self.damped || out.len() < n {
            return None;
        }
        for (slot, c) in out.iter_mut().zip(self.table.iter().step_by(2)) {
            *slot = Self::coeff_at(c, load);
        }
        Some(n)
    }

    /// μ-polynomial at `load`; only meaningful for undamped configurations,
    /// whose odd coefficients vanish identically.
    pub fn mu_poly_at(&self, load: f64) -> Result<MuPoly> {
        if self.damped {
            return Err(Error::Unsupported("an undamped configuration"));
        }
        Ok(MuPoly::new(
            self.table
                .iter()
                .step_by(2)
                .map(|c| Self::coeff_at(c, load))
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::assemble;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = a.iter().chain(b).fold(1e-300f64, |m, x| m.max(x.abs()));
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn ziegler_at_load_two() {
        let t = assemble(&PendulumConfig::ziegler(), 2.0).unwrap();
        let p = char_poly(&t);
        assert_eq!(p.coeffs(), &[2.0, 0.0, 3.0, 0.0, 1.0]);
        let q = char_poly_2dof_trace(&t).unwrap();
        assert_eq!(q.coeffs(), p.coeffs());
        assert_eq!(to_mu_poly(&p, 1e-12).unwrap().coeffs(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn damped_quartic_coefficients() {
        let c = PendulumConfig::new(1.0, vec![2.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let p = char_poly(&assemble(&c, 1.0).unwrap());
        assert!(close(p.coeffs(), &[2.0, 7.0, 6.0, 2.0, 1.0], 1e-15));
        assert!(matches!(
            to_mu_poly(&p, 1e-12),
            Err(Error::OddCoefficientsPresent(_))
        ));
        assert!(char_poly_2dof_trace(&assemble(&c, 1.0).unwrap()).is_err());
    }

    #[test]
    fn three_link_equal_stiffness_coefficients() {
        let (m1, m2, m3, c, l, load) = (1.7, 0.6, 2.3, 1.4, 0.8, 0.9);
        let cfg = PendulumConfig::undamped(l, vec![m1, m2, m3], vec![c; 3]).unwrap();
        let mu = to_mu_poly(&char_poly(&assemble(&cfg, load).unwrap()), 1e-14).unwrap();
        let a0 = l.powi(6) * m1 * m2 * m3;
        let a1 = c * l.powi(4) * (6.0 * m2 * m3 + 5.0 * m1 * m3 + m1 * m2)
            - 2.0 * l.powi(5) * load * m3 * (m1 + m2);
        let a2 = 3.0 * load * load * l.powi(4) * m3 - 2.0 * (7.0 * m3 + m2) * load * l.powi(3) * c
            + (m1 + 5.0 * m2 + 14.0 * m3) * l * l * c * c;
        let a3 = c * c * c;
        assert!(close(mu.coeffs(), &[a0, a1, a2, a3], 1e-14));
    }

    #[test]
    fn zero_free_end_mass_drops_degree() {
        let c = PendulumConfig::undamped(1.0, vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mu = to_mu_poly(&char_poly(&assemble(&c, 0.5).unwrap()), 1e-14).unwrap();
        assert_eq!(mu.coeffs()[0], 0.0);
        assert_eq!(mu.effective_degree(), 1);
        assert_eq!(mu.infinite_count(), 1);
        assert_eq!(mu.deflated().len(), 2);
    }

    #[test]
    fn load_family_matches_direct_expansion() {
        let c = PendulumConfig::new(
            1.2,
            vec![0.5, 2.0, 1.0, 0.7],
            vec![1.0, 0.4, 2.0, 1.5],
            vec![0.1, 0.0, 0.3, 0.2],
        )
        .unwrap();
        let fam = LoadFamily::new(&c).unwrap();
        for load in [0.0, 0.37, 2.5, 11.0] {
            let direct = char_poly(&assemble(&c, load).unwrap());
            assert!(close(
                fam.char_poly_at(load).coeffs(),
                direct.coeffs(),
                1e-13
            ));
        }
        assert!(fam.mu_poly_at(1.0).is_err());
    }

    #[test]
    fn derivative_and_eval() {
        let p = RealPoly::new(vec![2.0, -3.0, 0.0, 5.0]);
        assert_eq!(p.derivative().coeffs(), &[6.0, -6.0, 0.0]);
        assert_eq!(p.eval(2.0), 9.0);
        let z = p.eval_complex(Complex64::new(0.0, 1.0));
        assert_eq!(z, Complex64::new(8.0, -2.0));
    }
}
