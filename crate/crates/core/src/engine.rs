//! R-norm calculators and the bounds around them.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{factorial, gamma_d, sphere_area};
use crate::error::{Error, Result};
use crate::grid::GridFunction2D;
use crate::jet::{abs_integral_smooth, rho_derivative};
use crate::piecewise::{profile_l1_half_line, pw_derivative_n, NormValue};
use crate::poly::{q_int, q_to_f64, Poly, Q};
use crate::radial::{radial_radon_profile, RadialFunction, RadialProfile};
use crate::radon::{grid_radon_2d, Sinogram};
use crate::spectral::{boundary_leakage, frac_laplacian_2d};

/// Coincidence threshold for atoms in the (angle, offset) metric.
pub const ATOM_MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FiniteNet,
    RadialOdd,
    Grid2d,
    Bound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RNormReport {
    pub value: NormValue,
    pub method: Method,
    pub error_estimate: Option<f64>,
    pub diagnostics: BTreeMap<String, Value>,
}

impl RNormReport {
    fn new(value: NormValue, method: Method, error_estimate: Option<f64>) -> Self {
        let error_estimate = if value.is_finite() { error_estimate } else { None };
        RNormReport { value, method, error_estimate, diagnostics: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: Value) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReluUnit {
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

/// `g(x) = Σ a_i [w_iᵀx − b_i]₊ + vᵀx + c` with unit `w_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteReluNet {
    d: usize,
    units: Vec<ReluUnit>,
    v: Vec<f64>,
    c: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl FiniteReluNet {
    pub fn new(d: usize, units: Vec<ReluUnit>, v: Vec<f64>, c: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if v.len() != d {
            return Err(Error::Invalid(format!("linear unit has length {}, expected {d}", v.len())));
        }
        for u in &units {
            if u.w.len() != d {
                return Err(Error::Invalid(format!("unit direction has length {}, expected {d}", u.w.len())));
            }
            if (norm(&u.w) - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("unit direction {:?} is not normalized", u.w)));
            }
            if !u.a.is_finite() || !u.b.is_finite() {
                return Err(Error::Invalid("non-finite unit parameters".into()));
            }
        }
        Ok(FiniteReluNet { d, units, v, c })
    }

    /// Rescales each unit to a unit direction using positive homogeneity.
    pub fn from_unnormalized(d: usize, units: Vec<ReluUnit>, v: Vec<f64>, c: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(units.len());
        for u in units {
            let s = norm(&u.w);
            if s == 0.0 {
                return Err(Error::Invalid("zero unit direction".into()));
            }
            out.push(ReluUnit { a: u.a * s, w: u.w.iter().map(|x| x / s).collect(), b: u.b / s });
        }
        Self::new(d, out, v, c)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn units(&self) -> &[ReluUnit] {
        &self.units
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for u in &self.units {
            s += u.a * (dot(&u.w, x) - u.b).max(0.0);
        }
        s + dot(&self.v, x) + self.c
    }

    /// `α·g`.
    pub fn scaled(&self, alpha: f64) -> Self {
        FiniteReluNet {
            d: self.d,
            units: self.units.iter().map(|u| ReluUnit { a: alpha * u.a, ..u.clone() }).collect(),
            v: self.v.iter().map(|x| alpha * x).collect(),
            c: alpha * self.c,
        }
    }

    /// Sum of two nets of the same dimension.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::Invalid("dimension mismatch".into()));
        }
        let mut units = self.units.clone();
        units.extend(other.units.iter().cloned());
        let v = self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect();
        Ok(FiniteReluNet { d: self.d, units, v, c: self.c + other.c })
    }

    /// The unique even measure: `a_i/2` at `(w_i, b_i)` and at `(−w_i, −b_i)`, merged.
    pub fn even_measure(&self) -> Vec<(Vec<f64>, f64, f64)> {
        let mut atoms: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(2 * self.units.len());
        for u in &self.units {
            for (w, b) in [(u.w.clone(), u.b), (u.w.iter().map(|x| -x).collect(), -u.b)] {
                let hit = atoms.iter_mut().find(|(w2, b2, _)| atom_distance(&w, b, w2, *b2) <= ATOM_MERGE_TOLERANCE);
                match hit {
                    Some(a) => a.2 += 0.5 * u.a,
                    None => atoms.push((w, b, 0.5 * u.a)),
                }
            }
        }
        atoms.retain(|a| a.2 != 0.0);
        atoms
    }
}

/// Geodesic angle plus offset difference.
pub fn atom_distance(w1: &[f64], b1: f64, w2: &[f64], b2: f64) -> f64 {
    let chord: f64 = w1.iter().zip(w2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    2.0 * (0.5 * chord).min(1.0).asin() + (b1 - b2).abs()
}

pub fn rnorm_finite_net(net: &FiniteReluNet) -> RNormReport {
    let atoms = net.even_measure();
    let tv: f64 = atoms.iter().map(|a| a.2.abs()).sum();
    let listed: Vec<Value> = atoms.iter().map(|(w, b, a)| json!({"w": w, "b": b, "weight": a})).collect();
    RNormReport::new(NormValue::Finite(tv), Method::FiniteNet, Some(0.0))
        .with("even_measure_atoms", Value::Array(listed))
}

/// `∇f(∞) = ½ Σ a_i w_i + v`.
pub fn grad_at_infinity(net: &FiniteReluNet) -> Vec<f64> {
    let mut g = net.v.clone();
    for u in &net.units {
        for (gi, wi) in g.iter_mut().zip(&u.w) {
            *gi += 0.5 * u.a * wi;
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradEstimate {
    pub grad: Vec<f64>,
    pub radii: Vec<f64>,
    pub per_radius: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Sphere-averaged gradient of a callable at radii 10, 20, 40 with a
/// Richardson step on the two largest radii (error assumed `O(1/r)`).
/// Directions are equispaced for `d = 2` and seeded Gaussian draws otherwise.
pub fn grad_at_infinity_sampled(f: &dyn Fn(&[f64]) -> f64, d: usize, points: usize) -> Result<GradEstimate> {
    use rand::{Rng, SeedableRng};
    if d == 0 || points == 0 {
        return Err(Error::Invalid("need d ≥ 1 and at least one point".into()));
    }
    let dirs: Vec<Vec<f64>> = if d == 2 {
        (0..points)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / points as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        (0..points)
            .map(|_| {
                let g: Vec<f64> = (0..d)
                    .map(|_| {
                        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                let n = norm(&g);
                g.into_iter().map(|x| x / n).collect()
            })
            .collect()
    };
    let radii = vec![10.0, 20.0, 40.0];
    let mut per_radius = Vec::new();
    for &r in &radii {
        let h = 1e-4 * r;
        let mut acc = vec![0.0; d];
        for u in &dirs {
            let x: Vec<f64> = u.iter().map(|c| c * r).collect();
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                acc[i] += (f(&xp) - f(&xm)) / (2.0 * h);
            }
        }
        per_radius.push(acc.into_iter().map(|s| s / dirs.len() as f64).collect::<Vec<f64>>());
    }
    let grad: Vec<f64> = (0..d).map(|i| 2.0 * per_radius[2][i] - per_radius[1][i]).collect();
    let scale = per_radius.iter().map(|g| norm(g)).fold(0.0, f64::max).max(1e-12);
    let spread = per_radius
        .iter()
        .map(|g| norm(&g.iter().zip(&per_radius[2]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let converged = spread <= 0.05 * scale || spread <= 1e-9;
    Ok(GradEstimate { grad, radii, per_radius, converged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbarBounds {
    pub rnorm: f64,
    pub grad_inf: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// `∇f(∞) = 0`, so both costs equal the R-norm.
    pub tight: bool,
}

pub fn rbar_bounds(rnorm: f64, grad_inf: &[f64]) -> Result<RbarBounds> {
    if !rnorm.is_finite() || rnorm < 0.0 {
        return Err(Error::Precondition(format!("R-norm must be finite and non-negative, got {rnorm}")));
    }
    if grad_inf.iter().any(|g| !g.is_finite()) {
        return Err(Error::Precondition("gradient at infinity must be finite".into()));
    }
    let g = norm(grad_inf);
    Ok(RbarBounds {
        rnorm,
        grad_inf: grad_inf.to_vec(),
        lower: rnorm.max(2.0 * g),
        upper: rnorm + 2.0 * g,
        tight: g == 0.0,
    })
}

fn check_radial_dimension(d: usize) -> Result<()> {
    if d < 3 || d % 2 == 0 {
        Err(Error::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

/// `(2/(d−2)!) ∫₀^∞ |∂^{d+1}ρ|` for odd `d ≥ 3`.
pub fn rnorm_radial_odd(f: &RadialFunction) -> Result<RNormReport> {
    let d = f.d();
    check_radial_dimension(d)?;
    let pref = 2.0 / factorial(d - 2);
    match f.profile() {
        RadialProfile::Polynomial(_) => {
            let rho = radial_radon_profile(f)?;
            let dq = pw_derivative_n(&rho, d + 1);
            let value = profile_l1_half_line(&dq).map(|v| pref * v);
            let atoms: Vec<Value> = dq
                .atoms()
                .iter()
                .map(|a| json!({"location": q_to_f64(&a.location), "mass": q_to_f64(&a.mass), "order": a.order}))
                .collect();
            Ok(RNormReport::new(value, Method::RadialOdd, Some(0.0))
                .with("atom_derivative_order", json!(dq.atom_derivative_order()))
                .with("atoms", Value::Array(atoms))
                .with("path", json!("symbolic")))
        }
        RadialProfile::ExpBump { .. } => {
            let jet = f.jet().expect("smooth profile has a jet");
            let radius = f.support_radius();
            let integrand = |b: f64| rho_derivative(jet.as_ref(), d, d + 1, b);
            let fine = abs_integral_smooth(&integrand, 0.0, radius, 20_000);
            let coarse = abs_integral_smooth(&integrand, 0.0, radius, 10_000);
            Ok(RNormReport::new(NormValue::Finite(pref * fine), Method::RadialOdd, Some(pref * (fine - coarse).abs()))
                .with("path", json!("quadrature")))
        }
    }
}

/// R-norm of `x ↦ f(x/ε)` from that of `f` by the scaling law `‖f(·/ε)‖ = ‖f‖/ε`.
pub fn rnorm_radial_odd_dilated(f: &RadialFunction, eps: f64) -> Result<RNormReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("dilation factor must be positive and finite, got {eps}")));
    }
    let base = rnorm_radial_odd(f)?;
    let value = base.value.map(|v| v / eps);
    let mut out = RNormReport::new(value, base.method, base.error_estimate.map(|e| e / eps));
    out.diagnostics = base.diagnostics;
    Ok(out.with("dilation", json!(eps)).with("undilated_value", json!(base.value)))
}

/// `sup |Δf|` for a radial function; `Δf = g'' + (d−1)g'/r`.
pub fn laplacian_lower_bound_radial(f: &RadialFunction) -> Result<f64> {
    let d = f.d();
    match f.profile() {
        RadialProfile::Polynomial(_) => {
            let pieces = f.radial_pieces()?;
            let mut best = Q::zero();
            let dm1 = q_int(d as i64 - 1);
            for (i, (lo, hi, g)) in pieces.iter().enumerate() {
                let g1 = g.derivative();
                let g2 = g1.derivative();
                if i > 0 {
                    let prev = &pieces[i - 1].2;
                    if prev.eval(lo) != g.eval(lo) || prev.derivative().eval(lo) != g1.eval(lo) {
                        return Err(Error::Precondition("Laplacian is not a bounded function".into()));
                    }
                }
                if i + 1 == pieces.len() && (!g.eval(hi).is_zero() || !g1.eval(hi).is_zero()) {
                    return Err(Error::Precondition("Laplacian is not a bounded function".into()));
                }
                // N(r) = r g'' + (d−1) g'; Δf = N / r.
                let num = &(&Poly::x() * &g2) + &g1.scale(&dm1);
                let mut candidates = vec![hi.clone()];
                if lo.is_zero() {
                    if !num.eval(lo).is_zero() {
                        return Err(Error::Precondition("Laplacian is unbounded at the origin".into()));
                    }
                    let (q, _) = num.div_rem(&Poly::x());
                    let crit = q.derivative();
                    let tol = Q::new(1.into(), num_bigint::BigInt::from(1u64 << 60));
                    let mut pts = vec![lo.clone(), hi.clone()];
                    pts.extend(crit.real_roots(lo, hi, &tol));
                    for p in pts {
                        let v = q.eval(&p).abs();
                        if v > best {
                            best = v;
                        }
                    }
                    continue;
                }
                candidates.push(lo.clone());
                let crit = &(&num.derivative() * &Poly::x()) - &num;
                let tol = Q::new(1.into(), num_bigint::BigInt::from(1u64 << 60));
                candidates.extend(crit.real_roots(lo, hi, &tol));
                for p in candidates {
                    let v = (num.eval(&p) / &p).abs();
                    if v > best {
                        best = v;
                    }
                }
            }
            Ok(q_to_f64(&best))
        }
        RadialProfile::ExpBump { .. } => {
            let jet = f.jet().expect("smooth profile has a jet");
            let radius = f.support_radius();
            // Δf = 4r² G''(r²) + 2d G'(r²)
            let lap = |r: f64| {
                let t = jet.taylor(r * r, 2);
                (4.0 * r * r * 2.0 * t[2] + 2.0 * d as f64 * t[1]).abs()
            };
            let n = 20_000;
            let (mut best, mut arg) = (0.0, 0.0);
            for i in 0..=n {
                let r = radius * i as f64 / n as f64;
                let v = lap(r);
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            let h = radius / n as f64;
            let (mut lo, mut hi) = ((arg - h).max(0.0), (arg + h).min(radius));
            for _ in 0..100 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if lap(m1) < lap(m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            Ok(best.max(lap(0.5 * (lo + hi))))
        }
    }
}

/// Sum of `|s|` over the stored half circle, doubled, times the angle and offset steps.
pub fn sinogram_l1_full_circle(s: &Sinogram) -> f64 {
    let total: f64 = s.values().iter().map(|v| v.abs()).sum();
    2.0 * total * (std::f64::consts::PI / s.k() as f64) * s.db()
}

fn grid_value(f: &GridFunction2D, k: usize, j: usize) -> Result<(f64, bool)> {
    let g = frac_laplacian_2d(f, 3.0)?;
    let s = grid_radon_2d(&g, k, j)?;
    Ok((gamma_d(2) * sinogram_l1_full_circle(&s), boundary_leakage(f)))
}

/// `(1/4π)‖R{(−Δ)^{3/2} f}‖₁` with a Richardson estimate from a half-resolution rerun.
pub fn rnorm_grid_2d(f: &GridFunction2D, k: usize, j: usize) -> Result<RNormReport> {
    let (value, leak) = grid_value(f, k, j)?;
    let (kc, jc) = (k / 2, j.div_ceil(2));
    let coarse = if kc >= 32 && jc >= 64 { Some(grid_value(f, kc, jc)?.0) } else { None };
    let err = coarse.map(|c| (value - c).abs() / 3.0);
    Ok(RNormReport::new(NormValue::Finite(value), Method::Grid2d, err)
        .with("boundary_leakage", json!(leak))
        .with("angles", json!(k))
        .with("offsets", json!(j))
        .with("coarse_value", json!(coarse)))
}

/// `c_2 γ_2 ‖(−Δ)^{3/2} f‖₁`.
pub fn sobolev_upper_bound_2d(f: &GridFunction2D) -> Result<f64> {
    let g = frac_laplacian_2d(f, 3.0)?;
    Ok(sphere_area(2) * gamma_d(2) * g.l1_norm())
}

/// `sup |(−Δ) f|` on the grid.
pub fn laplacian_lower_bound_grid(f: &GridFunction2D) -> Result<f64> {
    Ok(frac_laplacian_2d(f, 2.0)?.max_abs())
}
