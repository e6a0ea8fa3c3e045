//! Stability classification.
//!
//! Undamped pendulums are classified from the roots in `μ = λ²`: marginal
//! stability needs every `μ` real, simple and negative. The discriminant
//! sequence of the μ-polynomial is attached as an independent algebraic
//! witness. Damped pendulums are classified by the Hurwitz determinants of
//! the characteristic polynomial in `λ`, with the roots attached.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{self, Dd};
use crate::charpoly::{self, CharPoly, LoadFamily, MuPoly};
use crate::error::Result;
use crate::model::{self, PendulumConfig};
use crate::roots::{self, Spectrum};

/// Numerical tolerances shared by the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// Configurations whose boundary distance is at or below this are BOUNDARY.
    pub boundary_band: f64,
    /// A root counts as real (in `μ`) or on the imaginary axis (in `λ`) when the
    /// offending component is at most this times the root magnitude.
    pub imaginary_tol: f64,
    /// Relative radius for merging roots into one multiple root.
    pub cluster_radius: f64,
    /// Largest relative odd coefficient accepted when passing to `μ`.
    pub odd_coeff_tol: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            boundary_band: 1e-9,
            imaginary_tol: 1e-8,
            cluster_radius: roots::CLUSTER_RADIUS,
            odd_coeff_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StabilityClass {
    MarginallyStable,
    Flutter,
    Divergence,
    FlutterAndDivergence,
    Boundary,
    AsymptoticallyStable,
    UnstableDamped,
}

impl StabilityClass {
    pub fn is_stable(self) -> bool {
        matches!(
            self,
            StabilityClass::MarginallyStable | StabilityClass::AsymptoticallyStable
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            StabilityClass::MarginallyStable => "MARGINALLY_STABLE",
            StabilityClass::Flutter => "FLUTTER",
            StabilityClass::Divergence => "DIVERGENCE",
            StabilityClass::FlutterAndDivergence => "FLUTTER_AND_DIVERGENCE",
            StabilityClass::Boundary => "BOUNDARY",
            StabilityClass::AsymptoticallyStable => "ASYMPTOTICALLY_STABLE",
            StabilityClass::UnstableDamped => "UNSTABLE_DAMPED",
        }
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub class: StabilityClass,
    /// Class with the boundary band ignored; equals `class` unless that is BOUNDARY.
    pub underlying: StabilityClass,
    /// Roots in `μ` (undamped only).
    pub mu_roots: Option<Spectrum>,
    pub lambda_roots: Spectrum,
    /// Discriminant sequence `Δ_1..Δ_n` of the μ-polynomial (undamped only).
    pub discriminants: Vec<f64>,
    /// Leading Hurwitz determinants of the λ-polynomial (damped only).
    pub hurwitz: Vec<f64>,
    /// Relative distance of the spectrum from a stability boundary: smallest
    /// relative imaginary part, magnitude or separation of the `μ` roots
    /// (undamped), or relative real part of the rightmost `λ` (damped).
    pub boundary_distance: f64,
}

/// Interleaved Sylvester-type matrix of `f` and `f'` whose even-order leading
/// minors form the discriminant sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationMatrix {
    pub entries: DMatrix<f64>,
}

/// Built from the deflated coefficients `a_0..a_n`: row `2k` holds `f`
/// shifted right by `k`, row `2k+1` holds `f'` shifted right by `k + 1`.
pub fn discrimination_matrix(p: &MuPoly) -> DiscriminationMatrix {
    discrimination_matrix_of(p.deflated())
}

fn discrimination_matrix_of(a: &[f64]) -> DiscriminationMatrix {
    let n = a.len() - 1;
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        for (i, &c) in a.iter().enumerate() {
            s[(2 * k, k + i)] = c;
        }
        for (i, &c) in a[..n].iter().enumerate() {
            s[(2 * k + 1, k + 1 + i)] = c * (n - i) as f64;
        }
    }
    DiscriminationMatrix { entries: s }
}

/// `(det, det / Hadamard bound)` of the leading principal minors. Minors
/// below `1e-12` of their bound are recomputed in double-double: widely
/// spread roots leave them there far from any boundary, where LU can lose
/// the sign.
fn leading_minors(m: &DMatrix<f64>, orders: impl Iterator<Item = usize>) -> Vec<(f64, f64)> {
    orders
        .map(|k| {
            let sub = m.view((0, 0), (k, k)).clone_owned();
            let hadamard: f64 = sub.row_iter().map(|r| r.norm()).product();
            if hadamard == 0.0 {
                return (0.0, 0.0);
            }
            let mut d = sub.determinant();
            if d.abs() <= 1e-12 * hadamard {
                let rows: Vec<Vec<Dd>> = (0..k)
                    .map(|i| (0..k).map(|j| Dd::new(sub[(i, j)])).collect())
                    .collect();
                d = algebra::det(&rows).to_f64();
            }
            (d, d / hadamard)
        })
        .collect()
}

/// `Δ_k` = determinant of the leading principal minor of order `2k`.
pub fn discriminant_sequence(p: &MuPoly) -> Vec<f64> {
    let s = discrimination_matrix(p).entries;
    let n = s.nrows() / 2;
    leading_minors(&s, (1..=n).map(|k| 2 * k))
        .into_iter()
        .map(|(d, _)| d)
        .collect()
}

/// Discriminant sequence divided by the Hadamard bound of each minor, so
/// every entry lies in `[-1, 1]`.
pub fn normalized_discriminants(p: &MuPoly) -> Vec<f64> {
    let s = discrimination_matrix(p).entries;
    let n = s.nrows() / 2;
    leading_minors(&s, (1..=n).map(|k| 2 * k))
        .into_iter()
        .map(|(_, x)| x)
        .collect()
}

/// `λ = ±sqrt(μ)` for every finite `μ`.
pub fn lambda_from_mu(mu: &Spectrum, cluster_radius: f64) -> Spectrum {
    let mut lambdas: Vec<Complex64> = mu
        .roots
        .iter()
        .flat_map(|m| {
            let s = m.sqrt();
            [s, -s]
        })
        .collect();
    lambdas.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Spectrum {
        clusters: roots::cluster(&lambdas, cluster_radius),
        roots: lambdas,
        infinite_count: 2 * mu.infinite_count,
    }
}

struct MuRootCounts {
    nonreal: usize,
    positive: usize,
    zero: bool,
    repeated: bool,
    margin: f64,
}

impl MuRootCounts {
    fn class(&self) -> StabilityClass {
        match (self.nonreal > 0, self.positive > 0) {
            (true, true) => StabilityClass::FlutterAndDivergence,
            (true, false) => StabilityClass::Flutter,
            (false, true) => StabilityClass::Divergence,
            (false, false) => StabilityClass::MarginallyStable,
        }
    }
}

/// Class from the μ-roots alone, as [`count_mu_roots`] decides it.
fn mu_class_of(found: &[Complex64], tol: &ToleranceSet) -> StabilityClass {
    let (mut nonreal, mut positive) = (false, false);
    for z in found {
        let mag = z.norm();
        if z.im.abs() > tol.imaginary_tol * mag {
            nonreal = true;
        } else if z.re > 0.0 {
            // zero roots (relative to the spectrum) are neither
            let scale = found
                .iter()
                .fold(0.0f64, |m, w| m.max(w.norm()))
                .max(1e-300);
            if mag > tol.imaginary_tol * scale {
                positive = true;
            }
        }
    }
    MuRootCounts {
        nonreal: nonreal as usize,
        positive: positive as usize,
        zero: false,
        repeated: false,
        margin: 0.0,
    }
    .class()
}

fn count_mu_roots(spectrum: &Spectrum, tol: &ToleranceSet) -> MuRootCounts {
    let scale = spectrum.scale();
    let mut out = MuRootCounts {
        nonreal: 0,
        positive: 0,
        zero: false,
        repeated: spectrum.clusters.iter().any(|c| c.multiplicity > 1),
        margin: f64::INFINITY,
    };
    for z in &spectrum.roots {
        let mag = z.norm();
        if z.im.abs() > tol.imaginary_tol * mag {
            out.nonreal += 1;
            out.margin = out.margin.min(z.im.abs() / mag);
        } else if mag <= tol.imaginary_tol * scale {
            out.zero = true;
            out.margin = 0.0;
        } else {
            if z.re > 0.0 {
                out.positive += 1;
            }
            out.margin = out.margin.min(mag / scale);
        }
    }
    // separation of neighbouring roots: a real pair about to collide
    for (i, a) in spectrum.roots.iter().enumerate() {
        for b in &spectrum.roots[i + 1..] {
            let sep = (a - b).norm() / a.norm().max(b.norm());
            out.margin = out.margin.min(sep);
        }
    }
    out
}

pub fn classify_undamped(p: &MuPoly, tol: &ToleranceSet) -> Result<StabilityReport> {
    let spectrum = roots::roots_with_radius(p, tol.cluster_radius)?;
    let lambda_roots = lambda_from_mu(&spectrum, tol.cluster_radius);
    let discriminants = if p.effective_degree() >= 1 {
        discriminant_sequence(p)
    } else {
        Vec::new()
    };

    let counts = count_mu_roots(&spectrum, tol);
    let underlying = counts.class();
    // Root margins, not the discriminants: for widely spread roots the
    // normalized Δ_k are tiny far away from any boundary.
    let boundary_distance = if spectrum.roots.is_empty() {
        0.0
    } else {
        counts.margin
    };
    let boundary = spectrum.roots.is_empty()
        || counts.zero
        || counts.repeated
        || boundary_distance <= tol.boundary_band;
    Ok(StabilityReport {
        class: if boundary {
            StabilityClass::Boundary
        } else {
            underlying
        },
        underlying,
        mu_roots: Some(spectrum),
        lambda_roots,
        discriminants,
        hurwitz: Vec::new(),
        boundary_distance,
    })
}

/// Hurwitz matrix `H[i][j] = a_{2j - i + 1}` (0-based) of `a_0 λ^n + ... + a_n`.
pub fn hurwitz_matrix(a: &[f64]) -> DMatrix<f64> {
    let n = a.len() - 1;
    DMatrix::from_fn(n, n, |i, j| {
        let k = 2 * j as isize - i as isize + 1;
        if (0..=n as isize).contains(&k) {
            a[k as usize]
        } else {
            0.0
        }
    })
}

/// Leading Hurwitz determinants `H_1..H_n` of the deflated, sign-normalized
/// polynomial, together with their Hadamard-normalized values.
pub fn hurwitz_determinants(p: &CharPoly) -> (Vec<f64>, Vec<f64>) {
    let mut a = p.deflated().to_vec();
    if a[0] < 0.0 {
        a.iter_mut().for_each(|x| *x = -*x);
    }
    if a.len() < 2 {
        return (Vec::new(), Vec::new());
    }
    let h = hurwitz_matrix(&a);
    leading_minors(&h, 1..=h.nrows()).into_iter().unzip()
}

pub fn hurwitz_classify(p: &CharPoly, tol: &ToleranceSet) -> Result<StabilityReport> {
    let lambda_roots = roots::roots_with_radius(p, tol.cluster_radius)?;
    let (hurwitz, normalized) = hurwitz_determinants(p);
    let stable = !normalized.is_empty() && normalized.iter().all(|&h| h > 0.0);
    // distance of the rightmost root from the imaginary axis, relative to
    // the spectrum
    let boundary_distance = lambda_roots
        .max_real_part()
        .map_or(0.0, |re| re.abs() / lambda_roots.scale());
    let underlying = if stable {
        StabilityClass::AsymptoticallyStable
    } else {
        StabilityClass::UnstableDamped
    };
    let boundary = boundary_distance <= tol.boundary_band;
    Ok(StabilityReport {
        class: if boundary {
            StabilityClass::Boundary
        } else {
            underlying
        },
        underlying,
        mu_roots: None,
        lambda_roots,
        discriminants: Vec::new(),
        hurwitz,
        boundary_distance,
    })
}

/// Classify a characteristic polynomial, taking the μ-route when `damped` is false.
pub fn classify_char_poly(
    p: &CharPoly,
    damped: bool,
    tol: &ToleranceSet,
) -> Result<StabilityReport> {
    if damped {
        hurwitz_classify(p, tol)
    } else {
        classify_undamped(&charpoly::to_mu_poly(p, tol.odd_coeff_tol)?, tol)
    }
}

pub fn classify(config: &PendulumConfig, load: f64, tol: &ToleranceSet) -> Result<StabilityReport> {
    let triple = model::assemble(config, load)?;
    classify_char_poly(&charpoly::char_poly(&triple), config.is_damped(), tol)
}

/// Repeated classification of one configuration over many loads.
#[derive(Debug, Clone)]
pub struct Classifier {
    family: LoadFamily,
    tol: ToleranceSet,
}

impl Classifier {
    pub fn new(config: &PendulumConfig, tol: ToleranceSet) -> Result<Self> {
        Ok(Classifier {
            family: LoadFamily::new(config)?,
            tol,
        })
    }

    pub fn tolerances(&self) -> &ToleranceSet {
        &self.tol
    }

    pub fn family(&self) -> &LoadFamily {
        &self.family
    }

    pub fn is_damped(&self) -> bool {
        self.family.is_damped()
    }

    /// Class with the boundary band ignored, skipping the witnesses. This is
    /// what load scans and bisection use.
    pub fn underlying_at(&self, load: f64) -> Result<StabilityClass> {
        if self.family.is_damped() {
            let (_, normalized) = hurwitz_determinants(&self.family.char_poly_at(load));
            Ok(
                if !normalized.is_empty() && normalized.iter().all(|&h| h > 0.0) {
                    StabilityClass::AsymptoticallyStable
                } else {
                    StabilityClass::UnstableDamped
                },
            )
        } else {
            let mut buf = [0.0; 32];
            let Some(n) = self.family.mu_coeffs_into(load, &mut buf) else {
                let mu = self.family.mu_poly_at(load)?;
                let spectrum = roots::roots_with_radius(&mu, self.tol.cluster_radius)?;
                return Ok(count_mu_roots(&spectrum, &self.tol).class());
            };
            let coeffs = &buf[..n];
            let max = coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if max == 0.0 {
                return Err(crate::Error::ZeroPolynomial);
            }
            let skip = coeffs
                .iter()
                .take_while(|a| a.abs() <= charpoly::DEFLATION_TOL * max)
                .count()
                .min(n - 1);
            let found = roots::polynomial_roots(&coeffs[skip..]);
            Ok(mu_class_of(&found, &self.tol))
        }
    }

    pub fn classify_at(&self, load: f64) -> Result<StabilityReport> {
        if self.family.is_damped() {
            hurwitz_classify(&self.family.char_poly_at(load), &self.tol)
        } else {
            classify_undamped(&self.family.mu_poly_at(load)?, &self.tol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PendulumConfig;

    fn tol() -> ToleranceSet {
        ToleranceSet::default()
    }

    fn damped_ziegler(d1: f64, d2: f64) -> PendulumConfig {
        PendulumConfig::new(1.0, vec![2.0, 1.0], vec![1.0, 1.0], vec![d1, d2]).unwrap()
    }

    #[test]
    fn cubic_matrix_layout() {
        let (a0, a1, a2, a3) = (2.0, 3.0, 5.0, 7.0);
        let s = discrimination_matrix(&MuPoly::new(vec![a0, a1, a2, a3])).entries;
        let expect = DMatrix::from_row_slice(
            6,
            6,
            &[
                a0,
                a1,
                a2,
                a3,
                0.0,
                0.0, //
                0.0,
                3.0 * a0,
                2.0 * a1,
                a2,
                0.0,
                0.0, //
                0.0,
                a0,
                a1,
                a2,
                a3,
                0.0, //
                0.0,
                0.0,
                3.0 * a0,
                2.0 * a1,
                a2,
                0.0, //
                0.0,
                0.0,
                a0,
                a1,
                a2,
                a3, //
                0.0,
                0.0,
                0.0,
                3.0 * a0,
                2.0 * a1,
                a2,
            ],
        );
        assert_eq!(s, expect);
    }

    #[test]
    fn quadratic_discriminant_sequence() {
        let d = discriminant_sequence(&MuPoly::new(vec![2.0, 3.0, 1.0]));
        // Δ_1 = 2 a0², Δ_2 = a0² (a1² - 4 a0 a2)
        assert!((d[0] - 8.0).abs() < 1e-12);
        assert!((d[1] - 4.0).abs() < 1e-12);
        let d = discriminant_sequence(&MuPoly::new(vec![1.0, 2.0, 1.0]));
        assert!(d[1].abs() < 1e-14);
    }

    #[test]
    fn linear_sequence() {
        let d = discriminant_sequence(&MuPoly::new(vec![1.0, 4.0]));
        assert_eq!(d, vec![1.0]);
    }

    fn undamped_at(load: f64) -> StabilityReport {
        classify(&PendulumConfig::ziegler(), load, &tol()).unwrap()
    }

    #[test]
    fn ziegler_classes() {
        assert_eq!(undamped_at(2.0).class, StabilityClass::MarginallyStable);
        assert_eq!(undamped_at(3.0).class, StabilityClass::Flutter);
        assert_eq!(undamped_at(5.0).class, StabilityClass::Divergence);
        let r = undamped_at(2.0);
        let mu = r.mu_roots.unwrap();
        assert!((mu.roots[0].re + 1.0).abs() < 1e-14);
        assert!((mu.roots[1].re + 0.5).abs() < 1e-14);
        assert_eq!(r.lambda_roots.roots.len(), 4);
    }

    #[test]
    fn ziegler_onset_flip() {
        let p = 3.5 - 2f64.sqrt();
        assert_eq!(
            undamped_at(p - 1e-6).class,
            StabilityClass::MarginallyStable
        );
        assert_eq!(undamped_at(p + 1e-6).class, StabilityClass::Flutter);
        let at = undamped_at(p);
        assert_eq!(at.class, StabilityClass::Boundary);
    }

    #[test]
    fn zero_free_end_mass_keeps_one_root() {
        let c = PendulumConfig::undamped(1.0, vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        for load in [0.0, 1.0, 10.0, 100.0] {
            let r = classify(&c, load, &tol()).unwrap();
            assert_eq!(r.class, StabilityClass::MarginallyStable);
            let mu = r.mu_roots.unwrap();
            assert_eq!(mu.infinite_count, 1);
            assert!((mu.roots[0].re + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_joint_mass_goes_divergent_at_two_and_a_half() {
        let c = PendulumConfig::undamped(1.0, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            classify(&c, 2.49, &tol()).unwrap().class,
            StabilityClass::MarginallyStable
        );
        assert_eq!(
            classify(&c, 2.51, &tol()).unwrap().class,
            StabilityClass::Divergence
        );
    }

    #[test]
    fn damped_classes_around_closed_form() {
        let c = damped_ziegler(1.0, 1.0);
        let r = classify(&c, 1.0, &tol()).unwrap();
        assert_eq!(r.class, StabilityClass::AsymptoticallyStable);
        assert_eq!(r.hurwitz.len(), 4);
        assert_eq!(
            classify(&c, 3.0, &tol()).unwrap().class,
            StabilityClass::UnstableDamped
        );
        assert_eq!(
            classify(&c, 0.0, &tol()).unwrap().class,
            StabilityClass::AsymptoticallyStable
        );
        let p = 55.0 / 28.0;
        assert_eq!(
            classify(&c, p - 1e-6, &tol()).unwrap().class,
            StabilityClass::AsymptoticallyStable
        );
        assert_eq!(
            classify(&c, p + 1e-6, &tol()).unwrap().class,
            StabilityClass::UnstableDamped
        );
    }

    #[test]
    fn hurwitz_on_known_polynomials() {
        // (λ+1)(λ+2)(λ+3) = λ³ + 6λ² + 11λ + 6
        let p = CharPoly::new(vec![1.0, 6.0, 11.0, 6.0]);
        assert_eq!(
            hurwitz_classify(&p, &tol()).unwrap().class,
            StabilityClass::AsymptoticallyStable
        );
        // (λ-1)(λ+2)(λ+3)
        let p = CharPoly::new(vec![1.0, 4.0, 1.0, -6.0]);
        assert_eq!(
            hurwitz_classify(&p, &tol()).unwrap().class,
            StabilityClass::UnstableDamped
        );
        // λ² + 1: on the imaginary axis
        let p = CharPoly::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(
            hurwitz_classify(&p, &tol()).unwrap().class,
            StabilityClass::Boundary
        );
        // negated stable polynomial is still stable
        let p = CharPoly::new(vec![-1.0, -6.0, -11.0, -6.0]);
        assert_eq!(
            hurwitz_classify(&p, &tol()).unwrap().class,
            StabilityClass::AsymptoticallyStable
        );
    }

    #[test]
    fn classifier_matches_direct_path() {
        let cfgs = [
            PendulumConfig::ziegler(),
            damped_ziegler(1.0, 0.1),
            PendulumConfig::undamped(1.0, vec![10.0, 0.9, 0.4], vec![1.0; 3]).unwrap(),
        ];
        for c in &cfgs {
            let cl = Classifier::new(c, tol()).unwrap();
            for load in [0.0, 0.5, 1.7, 2.3, 4.0, 9.0] {
                let a = cl.classify_at(load).unwrap();
                let b = classify(c, load, &tol()).unwrap();
                assert_eq!(a.class, b.class, "load {load}");
            }
        }
    }
}
