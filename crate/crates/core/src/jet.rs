//! Taylor jets of radial profiles in the variable `u = r²` and the derivatives of
//! their Radon profiles.

use crate::constants::factorial;

/// A radial profile `g(r) = G(r²)` that can report Taylor coefficients of `G`.
pub trait RadialJet {
    /// `[G(s), G'(s), G''(s)/2!, …]` up to `order` inclusive.
    fn taylor(&self, s: f64, order: usize) -> Vec<f64>;

    /// Radius beyond which `g` vanishes.
    fn support(&self) -> f64;
}

/// `G(u) = exp(−1/(1 − u/R²))` for `u < R²`, zero beyond.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpBumpJet {
    pub radius: f64,
}

impl RadialJet for ExpBumpJet {
    fn taylor(&self, s: f64, order: usize) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        let one_minus = 1.0 - s / r2;
        let mut e = vec![0.0; order + 1];
        if one_minus <= 0.0 || 1.0 / one_minus > 700.0 {
            return e;
        }
        // h(t) = −1/(1 − (s+t)/R²) = −Σ t^k / (R^{2k} (1−s/R²)^{k+1})
        let h: Vec<f64> = (0..=order).map(|k| -1.0 / (r2.powi(k as i32) * one_minus.powi(k as i32 + 1))).collect();
        e[0] = h[0].exp();
        for k in 1..=order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * h[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        e
    }

    fn support(&self) -> f64 {
        self.radius
    }
}

/// `G(u) = Σ c_i u^i` on `u ∈ [0, R²]`, zero beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyJet {
    pub coeffs: Vec<f64>,
    pub radius: f64,
}

impl RadialJet for PolyJet {
    fn taylor(&self, s: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        if s >= self.radius * self.radius {
            return out;
        }
        // Repeated synthetic division by (u − s) gives the Taylor shift.
        let mut c = self.coeffs.clone();
        for slot in out.iter_mut() {
            if c.is_empty() {
                break;
            }
            let mut quot = vec![0.0; c.len() - 1];
            let mut acc = 0.0;
            for i in (0..c.len()).rev() {
                acc = acc * s + c[i];
                if i > 0 {
                    quot[i - 1] = acc;
                }
            }
            *slot = acc;
            c = quot;
        }
        out
    }

    fn support(&self) -> f64 {
        self.radius
    }
}

/// Derivative `G^{(k)}(s)` from a jet.
fn jet_derivative(coeffs: &[f64], k: usize) -> f64 {
    coeffs[k] * factorial(k)
}

/// `∂_b^n ρ(b)` for `ρ(b) = ∫_b^∞ g(t)(t²−b²)^{(d−3)/2} t dt`, odd `d ≥ 3`, `n ≥ d − 1`.
///
/// With `ρ(b) = H(b²)` and `H^{(m+1)} = ½(−1)^{m+1} m! G`, `m = (d−3)/2`.
pub fn rho_derivative<J: RadialJet + ?Sized>(jet: &J, d: usize, n: usize, b: f64) -> f64 {
    assert!(d >= 3 && d % 2 == 1 && n + 1 >= d);
    let m = (d - 3) / 2;
    let s = b * b;
    let max_order = n - m - 1;
    let t = jet.taylor(s, max_order);
    let pref = 0.5 * if (m + 1) % 2 == 0 { 1.0 } else { -1.0 } * factorial(m);
    let mut acc = 0.0;
    for j in 0..=n / 2 {
        let k = n - j;
        let coef = factorial(n) / (factorial(j) * factorial(n - 2 * j));
        acc += coef * (2.0 * b).powi((n - 2 * j) as i32) * jet_derivative(&t, k - m - 1);
    }
    pref * acc
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// `∫_a^b |f|` for a smooth `f`: sign changes are located on a fine scan,
/// polished by bisection, and each sign-constant stretch is integrated by
/// composite Gauss–Legendre.
pub fn abs_integral_smooth(f: &dyn Fn(f64) -> f64, a: f64, b: f64, scan: usize) -> f64 {
    let mut knots = vec![a];
    let step = (b - a) / scan as f64;
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 1..=scan {
        let x1 = if i == scan { b } else { a + step * i as f64 };
        let f1 = f(x1);
        if f0 != 0.0 && f1 != 0.0 && (f0 > 0.0) != (f1 > 0.0) {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            knots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    knots.push(b);
    let (gx, gw) = gauss_legendre(20);
    let mut total = 0.0;
    for seg in knots.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let panels = 64;
        let h = (hi - lo) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                s += w * f(c + 0.5 * h * x);
            }
        }
        total += (s * 0.5 * h).abs();
    }
    total
}
