//! Polynomial roots via balanced companion matrices.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charpoly::RealPoly;
use crate::error::{Error, Result};

/// Default relative radius under which two roots are reported as one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub center: Complex64,
    pub multiplicity: usize,
}

/// Finite roots of a deflated polynomial plus the count of roots at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub roots: Vec<Complex64>,
    pub clusters: Vec<RootCluster>,
    pub infinite_count: usize,
}

impl Spectrum {
    pub fn nominal_degree(&self) -> usize {
        self.roots.len() + self.infinite_count
    }

    /// Magnitude scale used for relative tolerances on this spectrum.
    pub fn scale(&self) -> f64 {
        self.roots
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
            .max(1e-300)
    }

    pub fn max_real_part(&self) -> Option<f64> {
        self.roots.iter().map(|z| z.re).reduce(f64::max)
    }
}

/// All roots of `p` with clustering radius [`CLUSTER_RADIUS`].
pub fn roots(p: &RealPoly) -> Result<Spectrum> {
    roots_with_radius(p, CLUSTER_RADIUS)
}

pub fn roots_with_radius(p: &RealPoly, cluster_radius: f64) -> Result<Spectrum> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let coeffs = p.deflated();
    let mut found = polynomial_roots(coeffs);
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let clusters = cluster(&found, cluster_radius);
    Ok(Spectrum {
        infinite_count: p.nominal_degree() - found.len(),
        roots: found,
        clusters,
    })
}

/// Roots of a polynomial whose leading coefficient is nonzero.
pub(crate) fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    // exact zero roots first; they would otherwise cost a larger eigenproblem
    let zeros = coeffs
        .iter()
        .rev()
        .take_while(|&&a| a == 0.0)
        .count()
        .min(n);
    let core = &coeffs[..coeffs.len() - zeros];
    let mut out = vec![Complex64::new(0.0, 0.0); zeros];
    let d = core.len() - 1;
    match d {
        0 => {}
        1 => out.push(Complex64::new(-core[1] / core[0], 0.0)),
        2 => out.extend(quadratic_roots(core[0], core[1], core[2])),
        3 => out.extend(cubic_roots(core).map(|z| polish(core, z))),
        _ => {
            let mut comp = companion(core);
            balance(&mut comp);
            let eig = Schur::try_new(comp.clone(), f64::EPSILON, 10_000)
                .map(|s| s.complex_eigenvalues())
                .unwrap_or_else(|| comp.complex_eigenvalues());
            out.extend(eig.iter().map(|&z| polish(core, z)));
        }
    }
    out
}

/// Roots of `a x^2 + b x + c` without cancellation in the smaller root.
fn quadratic_roots(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = b.mul_add(b, -4.0 * a * c);
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Roots of a cubic (descending coefficients): trigonometric form when all
/// three are real, otherwise one real root by Cardano, refined by Newton, and
/// the remaining pair from the deflated quadratic.
fn cubic_roots(core: &[f64]) -> [Complex64; 3] {
    let (b, c, d) = (core[1] / core[0], core[2] / core[0], core[3] / core[0]);
    let q = (b * b - 3.0 * c) / 9.0;
    let r = (b * (2.0 * b * b - 9.0 * c) + 27.0 * d) / 54.0;
    let shift = b / 3.0;
    if r * r < q * q * q {
        let sq = q.sqrt();
        let theta = (r / (sq * sq * sq)).clamp(-1.0, 1.0).acos();
        let tau = std::f64::consts::TAU;
        return [0.0, tau, -tau]
            .map(|k| Complex64::new(-2.0 * sq * ((theta + k) / 3.0).cos() - shift, 0.0));
    }
    let a = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
    let mut x = if a == 0.0 { -shift } else { a + q / a - shift };
    for _ in 0..3 {
        let f = ((x + b) * x + c) * x + d;
        let df = (3.0 * x + 2.0 * b) * x + c;
        if df == 0.0 || f == 0.0 {
            break;
        }
        let next = x - f / df;
        if !next.is_finite() || ((next + b) * next + c) * next + d == f {
            break;
        }
        x = next;
    }
    // x^2 + p1 x + p0 with p0 from the product of roots unless x vanishes
    let p1 = b + x;
    let p0 = if x != 0.0 && x.abs() > 1e-8 * (c.abs() + p1.abs()).sqrt() {
        -d / x
    } else {
        c + x * p1
    };
    let [u, v] = quadratic_roots(1.0, p1, p0);
    [Complex64::new(x, 0.0), u, v]
}

/// Frobenius companion matrix of `core` (first row holds `-a_i / a_0`).
fn companion(core: &[f64]) -> DMatrix<f64> {
    let d = core.len() - 1;
    let mut c = DMatrix::zeros(d, d);
    for j in 0..d {
        c[(0, j)] = -core[j + 1] / core[0];
    }
    for i in 1..d {
        c[(i, i - 1)] = 1.0;
    }
    c
}

/// Parlett-Reinsch diagonal similarity scaling with powers of two.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / radix;
            while cc < g {
                f *= radix;
                cc *= radix * radix;
            }
            let g = r * radix;
            while cc > g {
                f /= radix;
                cc /= radix * radix;
            }
            if (cc + r / f) < 0.95 * s * f {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut f = Complex64::new(0.0, 0.0);
    let mut df = Complex64::new(0.0, 0.0);
    for &a in coeffs {
        df = df * z + f;
        f = f * z + a;
    }
    (f, df)
}

/// One Newton step, kept only when it reduces the residual.
fn polish(coeffs: &[f64], z: Complex64) -> Complex64 {
    let (f, df) = eval_with_derivative(coeffs, z);
    if f.norm() == 0.0 || df.norm() == 0.0 {
        return z;
    }
    let next = z - f / df;
    let (g, _) = eval_with_derivative(coeffs, next);
    if next.is_finite() && g.norm() < f.norm() {
        next
    } else {
        z
    }
}

/// Single-linkage clustering at relative radius `radius`, clusters listed in
/// order of their first member.
pub(crate) fn cluster(roots: &[Complex64], radius: f64) -> Vec<RootCluster> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = roots[i].norm().max(roots[j].norm()).max(1.0);
            if (roots[i] - roots[j]).norm() <= radius * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut members: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match members.iter_mut().find(|(k, _)| *k == r) {
            Some((_, v)) => v.push(roots[i]),
            None => members.push((r, vec![roots[i]])),
        }
    }
    members
        .into_iter()
        .map(|(_, v)| RootCluster {
            center: v.iter().sum::<Complex64>() / v.len() as f64,
            multiplicity: v.len(),
        })
        .collect()
}
