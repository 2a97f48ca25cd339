//! Radial functions `f(x) = g(‖x‖)` and their exact Radon profiles in odd dimension.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{ExpBumpJet, PolyJet, RadialJet};
use crate::piecewise::PiecewisePolynomial;
use crate::poly::{q_int, q_to_f64, Poly, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum RadialProfile {
    /// Polynomial pieces in `r`; only `r ≥ 0` is used and the last piece must vanish.
    Polynomial(PiecewisePolynomial),
    /// `g(r) = exp(−1/(1 − (r/radius)²))` inside the ball, zero outside.
    ExpBump { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialFunction {
    d: usize,
    profile: RadialProfile,
}

/// Compact description used in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Polynomial { k: u32, radius: f64 },
    ExpBump { radius: f64 },
}

impl RadialFunction {
    pub fn from_spec(d: usize, spec: &ProfileSpec) -> Result<Self> {
        let (f, radius) = match *spec {
            ProfileSpec::Polynomial { k, radius } => (Self::bump_power(d, k)?, radius),
            ProfileSpec::ExpBump { radius } => (Self::exp_bump(d)?, radius),
        };
        if radius == 1.0 {
            return Ok(f);
        }
        let eps = crate::poly::q_from_f64(radius)
            .ok_or_else(|| Error::Domain(format!("support radius must be finite, got {radius}")))?;
        f.dilate(&eps)
    }

    pub fn polynomial(d: usize, g: PiecewisePolynomial) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !g.pieces().last().is_some_and(Poly::is_zero) {
            return Err(Error::Invalid("radial profile must have compact support".into()));
        }
        Ok(RadialFunction { d, profile: RadialProfile::Polynomial(g) })
    }

    /// `g(r) = (1 − r²)^k` on `[0, 1]`.
    pub fn bump_power(d: usize, k: u32) -> Result<Self> {
        let p = Poly::from_i64(&[1, 0, -1]).pow(k);
        let g = PiecewisePolynomial::compact(vec![q_int(-1), q_int(1)], vec![p])?;
        Self::polynomial(d, g)
    }

    pub fn exp_bump(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(RadialFunction { d, profile: RadialProfile::ExpBump { radius: 1.0 } })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// `x ↦ f(x/ε)`.
    pub fn dilate(&self, eps: &Q) -> Result<Self> {
        if !eps.is_positive() {
            return Err(Error::Domain("dilation factor must be positive".into()));
        }
        let profile = match &self.profile {
            RadialProfile::Polynomial(g) => RadialProfile::Polynomial(g.dilate(eps)),
            RadialProfile::ExpBump { radius } => RadialProfile::ExpBump { radius: radius * q_to_f64(eps) },
        };
        Ok(RadialFunction { d: self.d, profile })
    }

    pub fn support_radius(&self) -> f64 {
        match &self.profile {
            RadialProfile::Polynomial(g) => g.breakpoints().last().map(q_to_f64).unwrap_or(0.0).max(0.0),
            RadialProfile::ExpBump { radius } => *radius,
        }
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        match &self.profile {
            RadialProfile::Polynomial(g) => g.eval_f64(r.abs()),
            RadialProfile::ExpBump { radius } => ExpBumpJet { radius: *radius }.taylor(r * r, 0)[0],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radius(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Pieces of `g` restricted to `r ≥ 0`: `(lo, hi, poly)` with `lo` starting at 0.
    pub(crate) fn radial_pieces(&self) -> Result<Vec<(Q, Q, Poly)>> {
        let g = match &self.profile {
            RadialProfile::Polynomial(g) => g,
            RadialProfile::ExpBump { .. } => {
                return Err(Error::Invalid("profile is not piecewise polynomial".into()))
            }
        };
        let bps = g.breakpoints();
        let mut out = Vec::new();
        let mut lo = Q::zero();
        for (i, b) in bps.iter().enumerate() {
            if b.is_positive() {
                out.push((lo.clone(), b.clone(), g.pieces()[i].clone()));
                lo = b.clone();
            }
        }
        Ok(out)
    }

    /// A jet of `G(u) = g(√u)` when `g` is a single even polynomial piece on `[0, R]`
    /// or the exponential bump.
    pub fn jet(&self) -> Option<Box<dyn RadialJet>> {
        match &self.profile {
            RadialProfile::ExpBump { radius } => Some(Box::new(ExpBumpJet { radius: *radius })),
            RadialProfile::Polynomial(_) => {
                let pieces = self.radial_pieces().ok()?;
                let [(_, hi, p)] = pieces.as_slice() else { return None };
                let c = p.coeffs();
                if c.iter().skip(1).step_by(2).any(|q| !q.is_zero()) {
                    return None;
                }
                let coeffs = c.iter().step_by(2).map(q_to_f64).collect();
                Some(Box::new(PolyJet { coeffs, radius: q_to_f64(hi) }))
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> Q {
    let mut r = Q::one();
    for i in 0..k {
        r = r * q_int((n - i) as i64) / q_int((i + 1) as i64);
    }
    r
}

/// `ρ(b) = ∫_{|b|}^∞ g(t)(t² − b²)^{(d−3)/2} t dt` as an exact even piecewise polynomial.
pub fn radial_radon_profile(f: &RadialFunction) -> Result<PiecewisePolynomial> {
    let d = f.d;
    if d < 3 || d % 2 == 0 {
        return Err(Error::UnsupportedDimension(d));
    }
    let m = (d - 3) / 2;
    let pieces = f.radial_pieces()?;
    if pieces.is_empty() {
        return Ok(PiecewisePolynomial::zero());
    }
    // anti[i][l] = antiderivative of g_i(t)·t^{2l+1}
    let anti: Vec<Vec<Poly>> = pieces
        .iter()
        .map(|(_, _, g)| {
            (0..=m)
                .map(|l| {
                    let mono = Poly::from_coeffs(
                        (0..=2 * l + 1).map(|i| if i == 2 * l + 1 { Q::one() } else { Q::zero() }).collect(),
                    );
                    (g * &mono).antiderivative()
                })
                .collect()
        })
        .collect();
    let full: Vec<Vec<Q>> = pieces
        .iter()
        .zip(&anti)
        .map(|((lo, hi, _), a)| a.iter().map(|p| p.eval(hi) - p.eval(lo)).collect())
        .collect();
    let mut half = Vec::with_capacity(pieces.len());
    for k in 0..pieces.len() {
        let hi = &pieces[k].1;
        let mut rho = Poly::zero();
        for l in 0..=m {
            let mut tail = anti[k][l].eval(hi);
            for row in full.iter().skip(k + 1) {
                tail += &row[l];
            }
            let inner = &Poly::constant(tail) - &anti[k][l];
            let sign = if (m - l) % 2 == 0 { Q::one() } else { -Q::one() };
            let mut bpow = vec![Q::zero(); 2 * (m - l) + 1];
            bpow[2 * (m - l)] = binomial(m, l) * sign;
            rho = &rho + &(&Poly::from_coeffs(bpow) * &inner);
        }
        half.push(rho);
    }
    let n = pieces.len();
    let mut breakpoints: Vec<Q> = pieces.iter().rev().map(|(_, hi, _)| -hi.clone()).collect();
    breakpoints.push(Q::zero());
    breakpoints.extend(pieces.iter().map(|(_, hi, _)| hi.clone()));
    let m1 = q_int(-1);
    let mut out = Vec::with_capacity(2 * n + 2);
    out.push(Poly::zero());
    out.extend(half.iter().rev().map(|p| p.compose_scale(&m1)));
    out.extend(half.iter().cloned());
    out.push(Poly::zero());
    PiecewisePolynomial::new(breakpoints, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q_frac;

    #[test]
    fn quadratic_bump_in_three_dimensions() {
        let f = RadialFunction::bump_power(3, 2).unwrap();
        let rho = radial_radon_profile(&f).unwrap();
        let expect = Poly::from_i64(&[1, 0, -1]).pow(3).scale(&q_frac(1, 6));
        assert_eq!(rho.breakpoints(), &[q_int(-1), q_int(1)]);
        assert_eq!(rho.pieces()[1], expect);
    }

    #[test]
    fn zero_profile() {
        let g = PiecewisePolynomial::compact(vec![q_int(0), q_int(1)], vec![Poly::zero()]).unwrap();
        let f = RadialFunction::polynomial(3, g).unwrap();
        assert!(radial_radon_profile(&f).unwrap().is_zero());
    }

    #[test]
    fn shape_is_power_of_one_minus_b_squared() {
        for d in [3usize, 5, 7] {
            for k in 1..4u32 {
                let f = RadialFunction::bump_power(d, k).unwrap();
                let rho = radial_radon_profile(&f).unwrap();
                let p = &rho.pieces()[1];
                let e = k + (d as u32 - 1) / 2;
                let base = Poly::from_i64(&[1, 0, -1]).pow(e);
                let c = p.leading().unwrap() / base.leading().unwrap();
                assert_eq!(*p, base.scale(&c), "d={d} k={k}");
            }
        }
    }

    #[test]
    fn non_even_profile_gets_breakpoint_at_origin() {
        // Cone g = 1 − r: ρ(b) = ∫_b^1 (1−t) t dt has odd powers.
        let g = PiecewisePolynomial::compact(vec![q_int(0), q_int(1)], vec![Poly::from_i64(&[1, -1])]).unwrap();
        let rho = radial_radon_profile(&RadialFunction::polynomial(3, g).unwrap()).unwrap();
        assert_eq!(rho.breakpoints(), &[q_int(-1), q_int(0), q_int(1)]);
        assert_eq!(rho.eval(&q_frac(1, 2)), rho.eval(&q_frac(-1, 2)));
    }

    #[test]
    fn rejects_even_dimension() {
        let f = RadialFunction::bump_power(4, 2).unwrap();
        assert!(matches!(radial_radon_profile(&f), Err(Error::UnsupportedDimension(4))));
        let f = RadialFunction::bump_power(1, 2).unwrap();
        assert!(matches!(radial_radon_profile(&f), Err(Error::UnsupportedDimension(1))));
    }

    #[test]
    fn requires_compact_support() {
        let g = PiecewisePolynomial::new(vec![q_int(0)], vec![Poly::zero(), Poly::from_i64(&[1])]).unwrap();
        assert!(RadialFunction::polynomial(3, g).is_err());
    }
}
