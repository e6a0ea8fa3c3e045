//! Division-free determinant expansion over commutative rings, plus the few
//! scalar rings the crate needs: double-double reals and first-order jets.

/// Minimal commutative ring interface used by [`det`].
pub(crate) trait Ring: Clone {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self {
        Self::zero().sub(self)
    }
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`; roughly 106 bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Ring for Dd {
    fn zero() -> Self {
        Dd::default()
    }

    fn add(&self, o: &Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    fn neg(&self) -> Self {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(&self, o: &Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Value with first derivatives along two parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Jet2 {
    pub v: f64,
    pub d: [f64; 2],
}

impl Jet2 {
    pub fn new(v: f64, d0: f64, d1: f64) -> Self {
        Jet2 { v, d: [d0, d1] }
    }
}

impl Ring for Jet2 {
    fn zero() -> Self {
        Jet2::default()
    }
    fn add(&self, o: &Self) -> Self {
        Jet2::new(self.v + o.v, self.d[0] + o.d[0], self.d[1] + o.d[1])
    }
    fn sub(&self, o: &Self) -> Self {
        Jet2::new(self.v - o.v, self.d[0] - o.d[0], self.d[1] - o.d[1])
    }
    fn mul(&self, o: &Self) -> Self {
        Jet2::new(
            self.v * o.v,
            self.v * o.d[0] + self.d[0] * o.v,
            self.v * o.d[1] + self.d[1] * o.v,
        )
    }
}

/// Polynomial with ascending coefficients over a ring. No trimming: a
/// product of lengths `a` and `b` has length `a + b - 1`, which keeps the
/// nominal degree of a determinant visible even when leading terms vanish.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly<R>(pub Vec<R>);

impl<R: Ring> Ring for Poly<R> {
    fn zero() -> Self {
        Poly(Vec::new())
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        Poly(
            (0..n)
                .map(|i| match (self.0.get(i), o.0.get(i)) {
                    (Some(a), Some(b)) => a.add(b),
                    (Some(a), None) => a.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => unreachable!(),
                })
                .collect(),
        )
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    fn neg(&self) -> Self {
        Poly(self.0.iter().map(Ring::neg).collect())
    }

    fn mul(&self, o: &Self) -> Self {
        if self.0.is_empty() || o.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![R::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Poly(out)
    }
}

/// Determinant of a square matrix over a commutative ring by Laplace
/// expansion with memoized minors: `O(n 2^n)` ring products, no division.
///
/// `minor[S]` holds the determinant of rows `0..|S|` restricted to the
/// column set `S`. Expanding along the last row of that minor gives
/// `minor[S + j] += (-1)^{#{k in S : k > j}} minor[S] * a[|S|][j]`.
pub(crate) fn det<R: Ring>(a: &[Vec<R>]) -> R {
    let n = a.len();
    assert!(
        n > 0 && n <= 20,
        "determinant expansion sized for small matrices"
    );
    debug_assert!(a.iter().all(|row| row.len() == n));
    let full = (1usize << n) - 1;
    let mut minor: Vec<Option<R>> = vec![None; 1 << n];
    // Seed row 0 directly so the ring never needs a multiplicative identity.
    for j in 0..n {
        minor[1 << j] = Some(a[0][j].clone());
    }
    for mask in 1..full {
        let Some(cur) = minor[mask].take() else {
            continue;
        };
        let row = mask.count_ones() as usize;
        for j in 0..n {
            let bit = 1usize << j;
            if mask & bit != 0 {
                continue;
            }
            let above = (mask >> (j + 1)).count_ones();
            let term = cur.mul(&a[row][j]);
            let target = &mut minor[mask | bit];
            *target = Some(match target.take() {
                None if above % 2 == 0 => term,
                None => term.neg(),
                Some(acc) if above % 2 == 0 => acc.add(&term),
                Some(acc) => acc.sub(&term),
            });
        }
    }
    minor[full].take().unwrap_or_else(R::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_determinants() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        assert_eq!(det(&a), 5.0);
        let a = vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        assert!((det(&a) - 4.0).abs() < 1e-14);
        let a = vec![vec![7.0]];
        assert_eq!(det(&a), 7.0);
    }

    #[test]
    fn matches_nalgebra_lu_on_4x4() {
        let vals = [
            3.0, 1.0, -2.0, 0.5, 1.0, 4.0, 0.0, -1.0, 2.0, -3.0, 5.0, 1.0, 0.0, 2.0, 1.0, 6.0,
        ];
        let m = nalgebra::DMatrix::from_row_slice(4, 4, &vals);
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vals[4 * i..4 * i + 4].to_vec()).collect();
        assert!((det(&rows) - m.determinant()).abs() < 1e-12);
    }

    #[test]
    fn polynomial_entries() {
        // det [[x, 1], [1, x]] = x^2 - 1
        let x = Poly(vec![0.0, 1.0]);
        let one = Poly(vec![1.0]);
        let d = det(&[vec![x.clone(), one.clone()], vec![one, x]]);
        assert_eq!(d.0, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn double_double_recovers_cancellation() {
        let a = Dd::new(1.0).add(&Dd::new(1e-20));
        let b = a.sub(&Dd::new(1.0));
        assert_eq!(b.to_f64(), 1e-20);
        let x = Dd::new(1.0 + f64::EPSILON);
        let sq = x.mul(&x).sub(&Dd::new(1.0 + 2.0 * f64::EPSILON));
        assert_eq!(sq.to_f64(), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn jet_product_rule() {
        let x = Jet2::new(3.0, 1.0, 0.0);
        let y = Jet2::new(2.0, 0.0, 1.0);
        let p = x.mul(&y).mul(&x);
        assert_eq!(p, Jet2::new(18.0, 12.0, 9.0));
    }
}
