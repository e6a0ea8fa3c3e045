//! Singular points of stability boundaries: multiple eigenvalues, cusps with
//! a triple root in `μ`, vertical tangents of the critical-load curve and the
//! umbrella apex of the two-link critical surface.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{det, Jet2, Poly};
use crate::charpoly::RealPoly;
use crate::critload::{self, LoadBoundary, Transition};
use crate::error::{Error, Result};
use crate::model::{self, PendulumConfig};
use crate::roots;
use crate::stability::Classifier;
use crate::sweep::{azimuth_components, MassPlane, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SingularKind {
    DoubleImaginary,
    DoubleReal,
    TripleImaginaryCusp,
    /// Triple root at a positive `μ`; reported for completeness.
    TripleReal,
    VerticalTangent,
    UmbrellaApex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub masses: Option<Vec<f64>>,
    pub load: f64,
    pub normalized_load: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub kind: SingularKind,
    pub location: ParameterPoint,
    /// Multiple root in `μ = λ²`; absent when every root sits at infinity.
    pub mu_value: Option<Complex64>,
    /// Root in `λ` with non-negative imaginary part.
    pub lambda_value: Option<Complex64>,
    pub jordan_order: usize,
    /// Scaled values of the defining equations at the returned point.
    pub residuals: Vec<f64>,
}

/// μ-polynomial coefficients (ascending) with their first derivatives in the
/// family parameter `α` and the load.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCoefficients {
    pub value: Vec<f64>,
    pub d_alpha: Vec<f64>,
    pub d_load: Vec<f64>,
}

/// Undamped pendulums depending on one shape parameter `α` and the load.
pub trait MuFamily: Sync {
    fn coefficients(&self, alpha: f64, load: f64) -> Result<FamilyCoefficients>;

    fn masses_at(&self, _alpha: f64) -> Option<Vec<f64>> {
        None
    }

    fn radius(&self) -> Option<f64> {
        None
    }

    fn normalize_load(&self, _load: f64) -> Option<f64> {
        None
    }
}

/// The μ-family of an undamped pendulum whose masses move on a [`MassPlane`].
#[derive(Debug, Clone)]
pub struct PlaneFamily {
    plane: MassPlane,
    k0: Vec<Vec<f64>>,
    k1: Vec<Vec<f64>>,
}

impl PlaneFamily {
    pub fn new(plane: MassPlane) -> Result<Self> {
        plane.validate()?;
        if plane.base.is_damped() {
            return Err(Error::Unsupported("an undamped configuration"));
        }
        let rows = |m: nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        Ok(PlaneFamily {
            k0: rows(model::elastic_stiffness(&plane.base)),
            k1: rows(model::follower_stiffness(&plane.base)),
            plane,
        })
    }

    pub fn plane(&self) -> &MassPlane {
        &self.plane
    }
}

impl MuFamily for PlaneFamily {
    /// `det(μ M(α) + K(P))`, with exact derivatives: M is linear in the
    /// masses and K is linear in the load.
    fn coefficients(&self, alpha: f64, load: f64) -> Result<FamilyCoefficients> {
        if !(alpha.is_finite() && load.is_finite()) {
            return Err(Error::NonFinite("family parameter"));
        }
        let (c, s) = azimuth_components(alpha);
        let (i, j) = self.plane.plane;
        let r = self.plane.r;
        let masses = self.plane.masses_at(alpha);
        let mut tangent = vec![0.0; masses.len()];
        tangent[i] = -r * s;
        tangent[j] = r * c;
        let l = self.plane.base.link_length();
        let mass = model::mass_matrix_of(l, &masses);
        let d_mass = model::mass_matrix_of(l, &tangent);
        let n = masses.len();
        let entries: Vec<Vec<Poly<Jet2>>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let k = self.k0[a][b] + load * self.k1[a][b];
                        Poly(vec![
                            Jet2::new(k, 0.0, self.k1[a][b]),
                            Jet2::new(mass[(a, b)], d_mass[(a, b)], 0.0),
                        ])
                    })
                    .collect()
            })
            .collect();
        let mut coeffs = det(&entries).0;
        coeffs.resize(n + 1, Jet2::default());
        Ok(FamilyCoefficients {
            value: coeffs.iter().map(|x| x.v).collect(),
            d_alpha: coeffs.iter().map(|x| x.d[0]).collect(),
            d_load: coeffs.iter().map(|x| x.d[1]).collect(),
        })
    }

    fn masses_at(&self, alpha: f64) -> Option<Vec<f64>> {
        Some(self.plane.masses_at(alpha))
    }

    fn radius(&self) -> Option<f64> {
        Some(self.plane.r)
    }

    fn normalize_load(&self, load: f64) -> Option<f64> {
        Some(self.plane.base.normalize_load(load))
    }
}

/// `d^j/dx^j Σ c_k x^k` for ascending coefficients.
fn derivative_at(ascending: &[f64], x: f64, j: usize) -> f64 {
    let mut acc = 0.0;
    for k in (j..ascending.len()).rev() {
        let falling: f64 = (k + 1 - j..=k).map(|t| t as f64).product();
        acc = acc * x + falling * ascending[k];
    }
    acc
}

/// `Σ |c_k| k!/(k-j)! |x|^{k-j}`: the natural size of the j-th derivative.
fn derivative_scale(ascending: &[f64], x: f64, j: usize) -> f64 {
    let mut acc = 0.0;
    for k in (j..ascending.len()).rev() {
        let falling: f64 = (k + 1 - j..=k).map(|t| t as f64).product();
        acc = acc * x.abs() + falling * ascending[k].abs();
    }
    acc
}

fn complex_derivative(ascending: &[f64], z: Complex64, j: usize) -> (Complex64, f64) {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for k in (j..ascending.len()).rev() {
        let falling: f64 = (k + 1 - j..=k).map(|t| t as f64).product();
        acc = acc * z + falling * ascending[k];
        scale = scale * z.norm() + falling * ascending[k].abs();
    }
    (acc, scale)
}

/// Largest `k` such that `f, f', ..., f^{(k-1)}` all vanish at `root` to
/// within `tol` relative to their natural scale.
pub fn jordan_order_at(p: &RealPoly, root: Complex64, tol: f64) -> Result<usize> {
    let ascending: Vec<f64> = p.coeffs().iter().rev().copied().collect();
    let (f, scale) = complex_derivative(&ascending, root, 0);
    let rel = f.norm() / scale.max(f64::MIN_POSITIVE);
    if rel > tol {
        return Err(Error::NotARoot(rel));
    }
    let mut order = 1;
    while order < ascending.len() {
        let (d, scale) = complex_derivative(&ascending, root, order);
        if d.norm() > tol * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        order += 1;
    }
    Ok(order)
}

struct CuspEquations {
    f: Vector3<f64>,
    scale: Vector3<f64>,
    jac: Matrix3<f64>,
}

impl CuspEquations {
    fn residuals(&self) -> Vector3<f64> {
        self.f
            .component_div(&self.scale.map(|s| s.max(f64::MIN_POSITIVE)))
    }

    fn norm(&self) -> f64 {
        self.residuals().amax()
    }
}

/// `(f, f', f'')` in `μ` and their Jacobian in `(μ, α, P)`.
fn cusp_equations(family: &dyn MuFamily, x: &Vector3<f64>) -> Result<CuspEquations> {
    let (mu, alpha, load) = (x[0], x[1], x[2]);
    let c = family.coefficients(alpha, load)?;
    let mut f = Vector3::zeros();
    let mut scale = Vector3::zeros();
    let mut jac = Matrix3::zeros();
    for i in 0..3 {
        f[i] = derivative_at(&c.value, mu, i);
        scale[i] = derivative_scale(&c.value, mu, i);
        jac[(i, 0)] = derivative_at(&c.value, mu, i + 1);
        jac[(i, 1)] = derivative_at(&c.d_alpha, mu, i);
        jac[(i, 2)] = derivative_at(&c.d_load, mu, i);
    }
    Ok(CuspEquations { f, scale, jac })
}

const NEWTON_MAX_ITER: usize = 100;
const LINE_SEARCH_HALVINGS: usize = 40;

/// Damped Newton (with Levenberg-Marquardt fallback) on the cusp system from `x`.
fn cusp_newton(
    family: &dyn MuFamily,
    mut x: Vector3<f64>,
    tol: f64,
) -> Result<(Vector3<f64>, CuspEquations, usize)> {
    let mut eq = cusp_equations(family, &x)?;
    let mut norm = eq.norm();
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER && norm >= 1e-3 * tol {
        iterations += 1;
        // merit ½|W f|² with the weights frozen at x: the Newton step is a
        // descent direction for it
        let w = eq.scale.map(|s| 1.0 / s.max(f64::MIN_POSITIVE));
        let merit = |e: &CuspEquations| e.f.component_mul(&w).norm_squared();
        let m0 = merit(&eq);
        let wj = Matrix3::from_diagonal(&w) * eq.jac;
        let wf = eq.f.component_mul(&w);
        let mut candidates: Vec<Vector3<f64>> = Vec::new();
        if let Some(step) = eq.jac.lu().solve(&(-eq.f)) {
            candidates.push(step);
        }
        // Levenberg-Marquardt steps for when Newton stalls
        let jtj = wj.transpose() * wj;
        let jtf = wj.transpose() * wf;
        let diag = jtj.diagonal().map(|d| d.max(f64::MIN_POSITIVE));
        for lm in [1e-4, 1e-2, 1.0, 1e2] {
            if let Some(step) = (jtj + Matrix3::from_diagonal(&(diag * lm)))
                .lu()
                .solve(&(-jtf))
            {
                candidates.push(step);
            }
        }
        let mut accepted = None;
        'search: for step in candidates {
            let mut t = 1.0;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let trial = x + step * t;
                if let Ok(e) = cusp_equations(family, &trial) {
                    let m = merit(&e);
                    if m.is_finite() && m <= (1.0 - 1e-4 * t) * m0 {
                        accepted = Some((trial, e));
                        break 'search;
                    }
                }
                t *= 0.5;
            }
        }
        let Some((trial, e)) = accepted else {
            break;
        };
        let moved = (trial - x).amax();
        x = trial;
        eq = e;
        norm = eq.norm();
        if moved <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    Ok((x, eq, iterations))
}

/// Tracks `F(x) = (1 - s) F(x0)` from `s = 0` to `s = 1` with adaptive
/// steps and a few Newton corrections per step.
fn cusp_homotopy(family: &dyn MuFamily, x0: Vector3<f64>) -> Option<Vector3<f64>> {
    let f0 = cusp_equations(family, &x0).ok()?.f;
    let mut x = x0;
    let (mut s, mut ds) = (0.0f64, 0.05f64);
    while s < 1.0 {
        let target = (s + ds).min(1.0);
        let mut y = x;
        let mut ok = false;
        for _ in 0..8 {
            let eq = cusp_equations(family, &y).ok()?;
            let h = eq.f - f0 * (1.0 - target);
            let scale = eq.scale.map(|v| v.max(f64::MIN_POSITIVE));
            if h.component_div(&scale).amax() <= 1e-10 {
                ok = true;
                break;
            }
            let Some(step) = eq.jac.lu().solve(&(-h)) else {
                break;
            };
            y += step;
            if !y.iter().all(|v| v.is_finite()) {
                break;
            }
        }
        // reject corrections that jump far relative to the step
        if ok && (y - x).amax() <= 0.5 * (1.0 + x.amax()) {
            x = y;
            s = target;
            ds = (ds * 1.5).min(0.25);
        } else {
            ds *= 0.5;
            if ds < 1e-6 {
                return None;
            }
        }
    }
    Some(x)
}

/// Real root of `f''` nearest to `mu` at `(α, P)`: the inflection point a
/// triple root must sit on.
fn inflection_seed(family: &dyn MuFamily, alpha: f64, load: f64, mu: f64) -> Option<f64> {
    let c = family.coefficients(alpha, load).ok()?;
    let n = c.value.len();
    if n < 3 {
        return None;
    }
    let second: Vec<f64> = (2..n)
        .rev()
        .map(|k| (k * (k - 1)) as f64 * c.value[k])
        .collect();
    let spec = roots::roots(&RealPoly::new(second)).ok()?;
    spec.roots
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.norm().max(1.0))
        .map(|z| z.re)
        .min_by(|a, b| (a - mu).abs().total_cmp(&(b - mu).abs()))
}

/// Damped Newton on `f = f' = f'' = 0` from `guess = (α, P, μ)`. When it
/// stalls, the solve is repeated from a Newton homotopy, then from `μ`
/// re-seeded at the nearest inflection point of the μ-polynomial.
/// Solve `f = f' = 0` in `(α, P)` with `μ` held on the inflection curve
/// `f'' = 0`, by Levenberg-Marquardt on the reduced 2x2 system.
fn cusp_reduced(family: &dyn MuFamily, x0: Vector3<f64>) -> Option<Vector3<f64>> {
    let eval =
        |mu: f64, alpha: f64, load: f64| -> Option<(Vector3<f64>, Vector2<f64>, Matrix2<f64>)> {
            let mu = inflection_seed(family, alpha, load, mu)?;
            let x = Vector3::new(mu, alpha, load);
            let eq = cusp_equations(family, &x).ok()?;
            let third = eq.jac[(2, 0)];
            if third == 0.0 || !third.is_finite() {
                return None;
            }
            let mut r = Vector2::zeros();
            let mut j = Matrix2::zeros();
            for i in 0..2 {
                let s = eq.scale[i].max(f64::MIN_POSITIVE);
                r[i] = eq.f[i] / s;
                for (c, col) in [1, 2].into_iter().enumerate() {
                    let dmu = -eq.jac[(2, col)] / third;
                    j[(i, c)] = (eq.jac[(i, col)] + eq.jac[(i, 0)] * dmu) / s;
                }
            }
            Some((x, r, j))
        };
    let (mut x, mut r, mut j) = eval(x0[0], x0[1], x0[2])?;
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if r.amax() < 1e-12 {
            break;
        }
        let jt = j.transpose();
        let g = jt * r;
        let mut accepted = false;
        for _ in 0..30 {
            let a = jt * j
                + Matrix2::from_diagonal(&(jt * j).diagonal().map(|d| lambda * d.max(1e-12)));
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            if let Some((x2, r2, j2)) = eval(x[0], x[1] + step[0], x[2] + step[1]) {
                if r2.norm() < r.norm() {
                    (x, r, j) = (x2, r2, j2);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Some(x)
}

pub fn find_triple_root_cusp(
    family: &dyn MuFamily,
    guess: (f64, f64, f64),
    tol: f64,
) -> Result<SingularPoint> {
    let (alpha0, load0, mu0) = guess;
    let start = Vector3::new(mu0, alpha0, load0);
    let (mut x, mut eq, mut iterations) = cusp_newton(family, start, tol)?;
    let mut starts = vec![start];
    if let Some(mu) = inflection_seed(family, alpha0, load0, mu0) {
        starts.push(Vector3::new(mu, alpha0, load0));
    }
    for (k, &from) in starts.iter().enumerate() {
        if eq.residuals().amax() < tol {
            break;
        }
        let mut tries = vec![cusp_homotopy(family, from)];
        if k > 0 {
            tries.insert(0, Some(from));
            tries.push(cusp_reduced(family, from));
        }
        for y in tries.into_iter().flatten() {
            if let Ok((x2, eq2, it2)) = cusp_newton(family, y, tol) {
                iterations += it2;
                if eq2.norm() < eq.norm() {
                    (x, eq) = (x2, eq2);
                }
            }
            if eq.residuals().amax() < tol {
                break;
            }
        }
    }
    let res = eq.residuals();
    if res.amax() >= tol || !x.iter().all(|v| v.is_finite()) {
        if res[0].abs() < tol && res[1].abs() < tol {
            return Err(Error::ConvergedToLowerOrder(2));
        }
        return Err(Error::NoConvergence {
            iterations,
            residual: res.amax(),
        });
    }
    let (mu, alpha, load) = (x[0], x[1], x[2]);
    let coeffs = family.coefficients(alpha, load)?;
    let poly = RealPoly::new(coeffs.value.iter().rev().copied().collect());
    let order = jordan_order_at(&poly, Complex64::new(mu, 0.0), tol)?;
    if order < 3 {
        return Err(Error::ConvergedToLowerOrder(order));
    }
    let lambda = Complex64::new(mu, 0.0).sqrt();
    Ok(SingularPoint {
        kind: if mu < 0.0 {
            SingularKind::TripleImaginaryCusp
        } else {
            SingularKind::TripleReal
        },
        location: ParameterPoint {
            alpha: Some(alpha),
            r: family.radius(),
            masses: family.masses_at(alpha),
            load,
            normalized_load: family.normalize_load(load),
        },
        mu_value: Some(Complex64::new(mu, 0.0)),
        lambda_value: Some(Complex64::new(lambda.re.abs(), lambda.im.abs())),
        jordan_order: order,
        residuals: res.iter().copied().collect(),
    })
}

/// Search region and start grid for [`find_cusps`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspSearch {
    pub alpha_range: (f64, f64),
    pub load_range: (f64, f64),
    pub alpha_starts: usize,
    pub load_starts: usize,
    pub tol: f64,
}

/// Multi-start triple-root search. Starts sit on a grid in `(α, P)` with
/// `μ` seeded from the real parts of the roots there; converged points
/// inside the region with `μ < 0` are merged and sorted by `α`.
pub fn find_cusps(family: &dyn MuFamily, search: &CuspSearch) -> Vec<SingularPoint> {
    let (a0, a1) = search.alpha_range;
    let (p0, p1) = search.load_range;
    let na = search.alpha_starts.max(1);
    let np = search.load_starts.max(1);
    let node = |lo: f64, hi: f64, k: usize, n: usize| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let mut starts = Vec::new();
    for ia in 0..na {
        for ip in 0..np {
            let alpha = node(a0, a1, ia, na);
            let load = node(p0, p1, ip, np);
            let Ok(c) = family.coefficients(alpha, load) else {
                continue;
            };
            let poly = RealPoly::new(c.value.iter().rev().copied().collect());
            let Ok(spec) = roots::roots(&poly) else {
                continue;
            };
            for z in spec.roots.iter().filter(|z| z.re < 0.0 && z.im >= 0.0) {
                starts.push((alpha, load, z.re));
            }
        }
    }
    let found: Vec<SingularPoint> = starts
        .par_iter()
        .filter_map(|&g| find_triple_root_cusp(family, g, search.tol).ok())
        .filter(|p| {
            let a = p.location.alpha.unwrap_or(f64::NAN);
            let slack = 1e-9;
            p.kind == SingularKind::TripleImaginaryCusp
                && a >= a0 - slack
                && a <= a1 + slack
                && p.location.load >= p0
                && p.location.load <= p1
        })
        .collect();
    merge_points(found)
}

fn merge_points(mut points: Vec<SingularPoint>) -> Vec<SingularPoint> {
    let key = |p: &SingularPoint| (p.location.alpha.unwrap_or(0.0), p.location.load);
    points.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let mut out: Vec<SingularPoint> = Vec::new();
    for p in points {
        let (a, l) = key(&p);
        let dup = out.iter_mut().find(|q| {
            let (qa, ql) = key(q);
            (a - qa).abs() <= 1e-6 * (1.0 + qa.abs()) && (l - ql).abs() <= 1e-6 * (1.0 + ql.abs())
        });
        match dup {
            Some(q) => {
                if p.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
                    < q.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
                {
                    *q = p;
                }
            }
            None => out.push(p),
        }
    }
    out
}

/// Closest pair of finite roots of `p`, returned as the pair's midpoint.
fn merging_pair(p: &RealPoly) -> Option<Complex64> {
    let spec = roots::roots(p).ok()?;
    let mut best: Option<(f64, Complex64)> = None;
    for (i, a) in spec.roots.iter().enumerate() {
        for b in &spec.roots[i + 1..] {
            let d = (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, 0.5 * (a + b)));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Double eigenvalue at a boundary found by the load scan of an undamped
/// configuration.
pub fn boundary_point(config: &PendulumConfig, boundary: &LoadBoundary) -> Result<SingularPoint> {
    if config.is_damped() {
        return Err(Error::Unsupported("an undamped configuration"));
    }
    let family = crate::charpoly::LoadFamily::new(config)?;
    let mu_poly = family.mu_poly_at(boundary.load)?;
    let mu = merging_pair(&mu_poly);
    let residuals = match mu {
        Some(z) => {
            let ascending: Vec<f64> = mu_poly.coeffs().iter().rev().copied().collect();
            (0..2)
                .map(|j| {
                    let (d, s) = complex_derivative(&ascending, z, j);
                    d.norm() / s.max(f64::MIN_POSITIVE)
                })
                .collect()
        }
        None => Vec::new(),
    };
    let kind = match (boundary.transition, mu) {
        (Transition::FlutterToDivergence, _) => SingularKind::DoubleReal,
        (_, Some(z)) if z.re > 0.0 => SingularKind::DoubleReal,
        _ => SingularKind::DoubleImaginary,
    };
    let lambda = mu.map(|z| {
        let s = z.sqrt();
        Complex64::new(s.re.abs(), s.im.abs())
    });
    Ok(SingularPoint {
        kind,
        location: ParameterPoint {
            alpha: None,
            r: None,
            masses: Some(config.masses().to_vec()),
            load: boundary.load,
            normalized_load: Some(boundary.normalized),
        },
        mu_value: mu,
        lambda_value: lambda,
        jordan_order: 2,
        residuals,
    })
}

/// Slopes above this multiple of the median slope count as vertical.
pub const VERTICAL_SLOPE_FACTOR: f64 = 1e3;
/// Intervals steeper than this multiple of the median are refined.
const CANDIDATE_SLOPE_FACTOR: f64 = 3.0;
const REFINE_MIN_WIDTH: f64 = 1e-9;
const REFINE_MAX_STEPS: usize = 40;

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Vertical tangents of the critical-load curve `p(α)` (first loss of
/// stability in every row). Steep intervals are bisected toward their
/// steeper half; a tangent is reported when the difference quotient at the
/// final width exceeds [`VERTICAL_SLOPE_FACTOR`] times the median slope of
/// the sweep and is still growing under refinement.
pub fn find_vertical_tangent(sweep: &SweepResult) -> Vec<SingularPoint> {
    let plane = &sweep.spec.plane;
    if plane.base.is_damped() {
        return Vec::new();
    }
    let settings = sweep.settings;
    let branch: Vec<(f64, Option<f64>)> = sweep
        .rows
        .iter()
        .map(|row| (row.alpha, row.first_exit().map(|b| b.normalized)))
        .collect();
    let slopes: Vec<Option<f64>> = branch
        .windows(2)
        .map(|w| match (w[0].1, w[1].1) {
            (Some(p), Some(q)) if w[1].0 > w[0].0 => Some((q - p).abs() / (w[1].0 - w[0].0)),
            _ => None,
        })
        .collect();
    let Some(med) = median(slopes.iter().flatten().copied().collect()) else {
        return Vec::new();
    };
    let med = med.max(f64::MIN_POSITIVE);
    let eval = |alpha: f64| -> Option<(f64, LoadBoundary)> {
        let config = plane.config_at(alpha).ok()?;
        let classifier = Classifier::new(&config, settings.tol).ok()?;
        critload::load_boundaries(&config, &classifier, &settings, true)
            .ok()?
            .into_iter()
            .find(|b| b.from.is_stable() && !b.to.is_stable())
            .map(|b| (b.normalized, b))
    };
    let mut out = Vec::new();
    for (i, s) in slopes.iter().enumerate() {
        let Some(s) = *s else { continue };
        let left = i.checked_sub(1).and_then(|k| slopes[k]).unwrap_or(0.0);
        let right = slopes.get(i + 1).copied().flatten().unwrap_or(0.0);
        let local_max = s >= left && s >= right;
        if !(s > VERTICAL_SLOPE_FACTOR * med || (local_max && s > CANDIDATE_SLOPE_FACTOR * med)) {
            continue;
        }
        if let Some(p) = refine_tangent(&eval, &branch[i], &branch[i + 1], med, plane) {
            out.push(p);
        }
    }
    out.dedup_by(|a, b| {
        (a.location.alpha.unwrap_or(0.0) - b.location.alpha.unwrap_or(0.0)).abs() <= 1e-7
    });
    out
}

fn refine_tangent(
    eval: &dyn Fn(f64) -> Option<(f64, LoadBoundary)>,
    left: &(f64, Option<f64>),
    right: &(f64, Option<f64>),
    median_slope: f64,
    plane: &MassPlane,
) -> Option<SingularPoint> {
    let (mut a, mut b) = (left.0, right.0);
    let (mut pa, mut pb) = (left.1?, right.1?);
    let mut quotients = vec![(pb - pa).abs() / (b - a)];
    let mut steps = 0;
    while b - a > REFINE_MIN_WIDTH && steps < REFINE_MAX_STEPS {
        steps += 1;
        let mid = 0.5 * (a + b);
        let (pm, _) = eval(mid)?;
        if (pm - pa).abs() >= (pb - pm).abs() {
            b = mid;
            pb = pm;
        } else {
            a = mid;
            pa = pm;
        }
        quotients.push((pb - pa).abs() / (b - a));
    }
    let last = *quotients.last()?;
    // ten halvings shrink the width ~1000-fold: a finite slope stays put,
    // a square-root tangent grows ~30-fold, a jump ~1000-fold
    let earlier = quotients[quotients.len().saturating_sub(11)];
    if last <= VERTICAL_SLOPE_FACTOR * median_slope || last < 4.0 * earlier {
        return None;
    }
    // report the upper end, where the curve turns
    let (alpha_top, p_top, alpha_in) = if pa >= pb { (a, pa, b) } else { (b, pb, a) };
    let config = plane.config_at(alpha_top).ok()?;
    let load = config.denormalize_load(p_top);
    let probe = eval(alpha_in)
        .and_then(|(_, boundary)| plane.config_at(alpha_in).ok().map(|c| (c, boundary)))
        .and_then(|(c, boundary)| boundary_point(&c, &boundary).ok());
    Some(SingularPoint {
        kind: SingularKind::VerticalTangent,
        location: ParameterPoint {
            alpha: Some(alpha_top),
            r: Some(plane.r),
            masses: Some(plane.masses_at(alpha_top)),
            load,
            normalized_load: Some(p_top),
        },
        mu_value: probe.as_ref().and_then(|p| p.mu_value),
        lambda_value: probe.as_ref().and_then(|p| p.lambda_value),
        jordan_order: 2,
        residuals: probe.map(|p| p.residuals).unwrap_or_default(),
    })
}

/// Certify the umbrella apex of the two-link critical surface `p(m1, m2)`
/// for stiffnesses `c1, c2`. Residuals, in order: distance of the minimum
/// over mass ratios from 2; relative distance of the minimizing ratio from
/// `c1/c2`; deviation of the lower branch under mass scaling toward the
/// origin; mismatch of the two ratios that reach `p = 2 + ε` from both sides
/// of the minimizing ray, and the gap between them divided by `sqrt(ε)`
/// compared to its limit `4 sqrt(2 c1/c2)`.
pub fn certify_umbrella_apex_m2(c1: f64, c2: f64, link_length: f64) -> Result<SingularPoint> {
    let lower = |m1: f64, m2: f64| -> Result<f64> {
        let c = PendulumConfig::undamped(link_length, vec![m1, m2], vec![c1, c2])?;
        Ok(critload::critical_loads_closed_undamped_m2(&c)?.0)
    };
    lower(1.0, 1.0)?;
    let target = c1 / c2;
    // coarse log-grid scan of the ratio, then golden section in log space
    let (mut lo, mut hi) = (-8.0f64, 8.0f64);
    let samples = 321;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..samples {
        let u = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let p = lower(u.exp(), 1.0)?;
        if p < best.0 {
            best = (p, u);
        }
    }
    let h = (hi - lo) / (samples - 1) as f64;
    lo = best.1 - h;
    hi = best.1 + h;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (lower(x1.exp(), 1.0)?, lower(x2.exp(), 1.0)?);
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = lower(x1.exp(), 1.0)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = lower(x2.exp(), 1.0)?;
        }
    }
    let ratio = (0.5 * (lo + hi)).exp();
    let p_min = lower(ratio, 1.0)?;
    let scaling = [1e-6, 1e-3, 1.0, 1e3]
        .iter()
        .map(|&t| lower(t * ratio, t).map(|p| (p - p_min).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let eps = 1e-6f64;
    let (sq, se) = (target.sqrt(), (2.0 * eps).sqrt());
    let t_minus = (sq - se).powi(2);
    let t_plus = (sq + se).powi(2);
    let hit =
        ((lower(t_minus, 1.0)? - (2.0 + eps)).abs()).max((lower(t_plus, 1.0)? - (2.0 + eps)).abs());
    let gap = (t_plus - t_minus) / eps.sqrt();
    let gap_limit = 4.0 * (2.0 * target).sqrt();
    let l = link_length;
    Ok(SingularPoint {
        kind: SingularKind::UmbrellaApex,
        location: ParameterPoint {
            alpha: Some(1.0f64.atan2(ratio)),
            r: Some(0.0),
            masses: Some(vec![0.0, 0.0]),
            load: p_min * c2 / l,
            normalized_load: Some(p_min),
        },
        mu_value: None,
        lambda_value: None,
        jordan_order: 2,
        residuals: vec![
            p_min - 2.0,
            ratio / target - 1.0,
            scaling,
            hit,
            gap / gap_limit - 1.0,
        ],
    })
}
