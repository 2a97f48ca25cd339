//! Dense univariate polynomials with exact rational coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Exact conversion of a finite float.
pub fn q_from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Coefficients in ascending order, no trailing zeros.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    c: Vec<Q>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.c.iter().map(|q| q.to_string()).collect();
        write!(f, "Poly[{}]", parts.join(", "))
    }
}

impl Poly {
    pub fn zero() -> Self {
        Poly { c: Vec::new() }
    }

    pub fn constant(q: Q) -> Self {
        Self::from_coeffs(vec![q])
    }

    pub fn x() -> Self {
        Self::from_coeffs(vec![Q::zero(), Q::one()])
    }

    pub fn from_coeffs(mut c: Vec<Q>) -> Self {
        while c.last().is_some_and(|q| q.is_zero()) {
            c.pop();
        }
        Poly { c }
    }

    pub fn from_i64(c: &[i64]) -> Self {
        Self::from_coeffs(c.iter().map(|&v| q_int(v)).collect())
    }

    /// `(a + b·x)^n`.
    pub fn binomial_power(a: &Q, b: &Q, n: u32) -> Self {
        Poly::from_coeffs(vec![a.clone(), b.clone()]).pow(n)
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Q> {
        self.c.last()
    }

    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for q in self.c.iter().rev() {
            acc = acc * x + q;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, q| acc * x + q_to_f64(q))
    }

    pub fn derivative(&self) -> Self {
        Self::from_coeffs(
            self.c.iter().enumerate().skip(1).map(|(k, q)| q * q_int(k as i64)).collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut c = Vec::with_capacity(self.c.len() + 1);
        c.push(Q::zero());
        for (k, q) in self.c.iter().enumerate() {
            c.push(q / q_int(k as i64 + 1));
        }
        Self::from_coeffs(c)
    }

    pub fn scale(&self, s: &Q) -> Self {
        Self::from_coeffs(self.c.iter().map(|q| q * s).collect())
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Poly::constant(Q::one());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// `p(s·x)`.
    pub fn compose_scale(&self, s: &Q) -> Self {
        let mut f = Q::one();
        let mut c = Vec::with_capacity(self.c.len());
        for q in &self.c {
            c.push(q * &f);
            f *= s;
        }
        Self::from_coeffs(c)
    }

    /// `p(a·x + b)` by Horner's rule on polynomials.
    pub fn compose_affine(&self, a: &Q, b: &Q) -> Self {
        let inner = Poly::from_coeffs(vec![b.clone(), a.clone()]);
        let mut acc = Poly::zero();
        for q in self.c.iter().rev() {
            acc = &(&acc * &inner) + &Poly::constant(q.clone());
        }
        acc
    }

    /// Euclidean division: `self = q·d + r`, `deg r < deg d`.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        let dl = d.leading().expect("division by zero polynomial").clone();
        let dd = d.c.len() - 1;
        let mut r = self.c.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![Q::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let coef = &r[k + dd] / &dl;
            if !coef.is_zero() {
                for (i, dc) in d.c.iter().enumerate() {
                    r[k + i] -= &coef * dc;
                }
            }
            q[k] = coef;
        }
        r.truncate(dd);
        (Poly::from_coeffs(q), Poly::from_coeffs(r))
    }

    pub fn monic(&self) -> Poly {
        match self.leading() {
            Some(l) => self.scale(&l.recip()),
            None => Poly::zero(),
        }
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// Product of the distinct irreducible factors (same real roots, all simple).
    pub fn squarefree_part(&self) -> Poly {
        if self.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0.monic()
    }

    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(-r);
        }
        chain
    }

    /// Distinct real roots in the open interval `(a, b)`, each approximated by a
    /// rational within `tol` of the true root.
    pub fn real_roots(&self, a: &Q, b: &Q, tol: &Q) -> Vec<Q> {
        if self.degree().unwrap_or(0) == 0 || a >= b {
            return Vec::new();
        }
        let sq = self.squarefree_part();
        let chain = sq.sturm_chain();
        let v = |x: &Q| sign_variations(&chain, x);
        // Roots in (lo, hi] = V(lo) − V(hi).
        let mut out = Vec::new();
        let mut stack = vec![(a.clone(), b.clone(), v(a), v(b))];
        while let Some((lo, hi, vlo, vhi)) = stack.pop() {
            let mut count = vlo - vhi;
            if sq.eval(&hi).is_zero() {
                count -= 1;
            }
            if count <= 0 {
                continue;
            }
            if count == 1 && &hi - &lo <= *tol {
                out.push((&lo + &hi) / q_int(2));
                continue;
            }
            let mid = (&lo + &hi) / q_int(2);
            let vmid = v(&mid);
            if sq.eval(&mid).is_zero() {
                out.push(mid.clone());
            }
            stack.push((lo, mid.clone(), vlo, vmid));
            stack.push((mid, hi, vmid, vhi));
        }
        out.sort();
        out
    }

    /// `∫_a^b |p|`, exact up to the root approximation (error quadratic in `tol`).
    pub fn abs_integral(&self, a: &Q, b: &Q) -> Q {
        if self.is_zero() || a >= b {
            return Q::zero();
        }
        let width = b - a;
        let tol = if width > Q::one() { width.clone() } else { Q::one() } * Q::new(BigInt::one(), BigInt::one() << 80);
        let anti = self.antiderivative();
        let mut knots = vec![a.clone()];
        knots.extend(self.real_roots(a, b, &tol));
        knots.push(b.clone());
        let vals: Vec<Q> = knots.iter().map(|t| anti.eval(t)).collect();
        vals.windows(2).map(|w| (&w[1] - &w[0]).abs()).fold(Q::zero(), |s, x| s + x)
    }
}

fn sign_variations(chain: &[Poly], x: &Q) -> i64 {
    let mut count = 0;
    let mut last = 0i8;
    for p in chain {
        let v = p.eval(x);
        let s = if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        let z = Q::zero();
        Poly::from_coeffs(
            (0..n).map(|i| self.c.get(i).unwrap_or(&z) + o.c.get(i).unwrap_or(&z)).collect(),
        )
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o.clone())
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![Q::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::from_coeffs(c)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { c: self.c.into_iter().map(|q| -q).collect() }
    }
}
