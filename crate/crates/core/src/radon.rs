//! Sinograms, the 2-D grid Radon transform, its dual and filtered backprojection.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::constants::gamma_d;
use crate::error::{Error, Result};
use crate::grid::{GridFunction2D, GridSpec};
use crate::spectral::offset_power_derivative;

/// Margin factor between the grid half-diagonal and the offset range.
pub const OFFSET_MARGIN: f64 = 1.05;

/// Symmetry under `(w, b) ↦ (−w, −b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Samples on `θ_k = kπ/K` (`k < K`) and `b_j = −B + j·2B/(J−1)`; the other half
/// circle follows from the parity.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    k: usize,
    j: usize,
    b_max: f64,
    values: Vec<f64>,
    parity: Parity,
    /// Rows are one period of a periodic signal (set after a Fourier multiplier).
    periodic: bool,
}

impl Sinogram {
    pub fn new(k: usize, j: usize, b_max: f64, values: Vec<f64>, parity: Parity) -> Result<Self> {
        if k == 0 || j < 2 {
            return Err(Error::Invalid("sinogram needs K ≥ 1 and J ≥ 2".into()));
        }
        if !(b_max.is_finite() && b_max > 0.0) {
            return Err(Error::Invalid("offset range must be positive".into()));
        }
        if values.len() != k * j {
            return Err(Error::Invalid(format!("expected {} values, got {}", k * j, values.len())));
        }
        Ok(Sinogram { k, j, b_max, values, parity, periodic: false })
    }

    pub fn from_fn(k: usize, j: usize, b_max: f64, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut s = Self::new(k, j, b_max, vec![0.0; k * j], parity)?;
        for kk in 0..k {
            let t = s.theta(kk);
            for jj in 0..j {
                s.values[kk * j + jj] = f(t, s.offset(jj));
            }
        }
        Ok(s)
    }

    pub(crate) fn with_values(&self, j: usize, b_max: f64, values: Vec<f64>, periodic: bool) -> Self {
        Sinogram { k: self.k, j, b_max, values, parity: self.parity, periodic }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * PI / self.k as f64
    }

    pub fn db(&self) -> f64 {
        2.0 * self.b_max / (self.j - 1) as f64
    }

    pub fn offset(&self, j: usize) -> f64 {
        -self.b_max + j as f64 * self.db()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.j..(k + 1) * self.j]
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.j + j]
    }

    /// Value at angle index `k < 2K` on the full circle via the parity identification.
    pub fn get_full(&self, k: usize, j: usize) -> f64 {
        if k < self.k {
            self.get(k, j)
        } else {
            self.parity.sign() * self.get(k - self.k, self.j - 1 - j)
        }
    }

    /// Linear interpolation in `b` on row `k`; `None` outside the offset range.
    #[inline]
    pub fn interp(&self, k: usize, b: f64) -> Option<f64> {
        let u = (b + self.b_max) / self.db();
        if !(u >= 0.0 && u <= (self.j - 1) as f64) {
            return None;
        }
        let i = (u.floor() as usize).min(self.j - 2);
        let t = u - i as f64;
        let row = self.row(k);
        Some((1.0 - t) * row[i] + t * row[i + 1])
    }

    /// Linear interpolation in `b` on full-circle row `k < 2K`.
    #[inline]
    pub fn interp_full(&self, k: usize, b: f64) -> Option<f64> {
        if k < self.k {
            return self.interp(k, b);
        }
        let u = (b + self.b_max) / self.db();
        if !(u >= 0.0 && u <= (self.j - 1) as f64) {
            return None;
        }
        let i = (u.floor() as usize).min(self.j - 2);
        let t = u - i as f64;
        let (k0, last) = (k - self.k, self.j - 1);
        Some(self.parity.sign() * ((1.0 - t) * self.get(k0, last - i) + t * self.get(k0, last - i - 1)))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.db() * PI / self.k as f64
    }

    /// Restriction to `[−b, b]` on the original offset lattice (no interpolation).
    pub fn crop(&self, b: f64) -> Result<Sinogram> {
        let db = self.db();
        let half = ((self.j - 1) as f64 / 2.0).round() as usize;
        let keep = ((b / db) + 1e-9).floor() as usize;
        if (self.j - 1) % 2 != 0 || keep > half {
            return Err(Error::Range("crop range exceeds the sinogram".into()));
        }
        let (lo, j) = (half - keep, 2 * keep + 1);
        let mut values = Vec::with_capacity(self.k * j);
        for kk in 0..self.k {
            values.extend_from_slice(&self.row(kk)[lo..lo + j]);
        }
        Ok(Sinogram { k: self.k, j, b_max: keep as f64 * db, values, parity: self.parity, periodic: false })
    }

    /// CSV with header `theta,b,value`, row-major by angle.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["theta", "b", "value"])?;
        for kk in 0..self.k {
            for jj in 0..self.j {
                wr.write_record(&[
                    self.theta(kk).to_string(),
                    self.offset(jj).to_string(),
                    self.get(kk, jj).to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Sinogram::write_csv`]; parity is supplied by the caller.
    pub fn read_csv<R: Read>(r: R, parity: Parity) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let p = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Invalid("sinogram CSV rows need theta,b,value".into()))
            };
            rows.push((p(0)?, p(1)?, p(2)?));
        }
        let j = rows.iter().take_while(|r| r.0 == rows[0].0).count();
        if j < 2 || rows.len() % j != 0 {
            return Err(Error::Invalid("sinogram CSV is not a full angle × offset table".into()));
        }
        let k = rows.len() / j;
        let b_max = -rows[0].1;
        let s = Self::new(k, j, b_max, rows.iter().map(|r| r.2).collect(), parity)?;
        for (i, r) in rows.iter().enumerate() {
            if (r.0 - s.theta(i / j)).abs() > 1e-9 || (r.1 - s.offset(i % j)).abs() > 1e-9 * b_max.max(1.0) {
                return Err(Error::Invalid(format!("row {i} is off the sinogram lattice")));
            }
        }
        Ok(s)
    }
}

/// Line integrals with the default offset range `1.05 ×` grid half-diagonal.
pub fn grid_radon_2d(f: &GridFunction2D, k: usize, j: usize) -> Result<Sinogram> {
    grid_radon_2d_with_range(f, k, j, OFFSET_MARGIN * f.spec().half_diagonal())
}

/// Line integrals `∫_{w·x=b} f ds` by bilinear interpolation sampled at step `h/2`.
pub fn grid_radon_2d_with_range(f: &GridFunction2D, k: usize, j: usize, b_max: f64) -> Result<Sinogram> {
    if k < 32 || j < 64 {
        return Err(Error::Invalid(format!("need K ≥ 32 and J ≥ 64, got K={k}, J={j}")));
    }
    let support = f.support_radius();
    if support > b_max {
        return Err(Error::Range(format!("support radius {support} exceeds offset range {b_max}")));
    }
    let mut s = Sinogram::new(k, j, b_max, vec![0.0; k * j], Parity::Even)?;
    let spec = f.spec();
    let h = spec.h;
    let c = 0.5 * (spec.n as f64 - 1.0);
    let step = 0.5 * h;
    // Interpolant vanishes once an index leaves [−1, n].
    let lim = (c + 1.0) * h;
    for kk in 0..k {
        let (sn, cs) = s.theta(kk).sin_cos();
        for jj in 0..j {
            let b = s.offset(jj);
            // p(t) = b·w + t·w⊥, w = (cos, sin), w⊥ = (−sin, cos)
            let (px, py) = (b * cs, b * sn);
            let (tlo, thi) = match chord(px, py, -sn, cs, lim) {
                Some(r) => r,
                None => continue,
            };
            let s0 = (tlo / step).ceil() as i64;
            let s1 = (thi / step).floor() as i64;
            if s1 < s0 {
                continue;
            }
            let t0 = s0 as f64 * step;
            let mut u = (px - t0 * sn) / h + c;
            let mut v = (py + t0 * cs) / h + c;
            let (du, dv) = (-0.5 * sn, 0.5 * cs);
            let mut acc = 0.0;
            for _ in s0..=s1 {
                acc += f.bilinear_index(u, v);
                u += du;
                v += dv;
            }
            s.values[kk * j + jj] = acc * step;
        }
    }
    Ok(s)
}

/// Parameter range where `p + t·d` stays in the square `[−lim, lim]²`.
fn chord(px: f64, py: f64, dx: f64, dy: f64, lim: f64) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < 1e-15 {
            if p.abs() > lim {
                return None;
            }
        } else {
            let (a, b) = ((-lim - p) / d, (lim - p) / d);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualRadon {
    pub image: GridFunction2D,
    /// Some lookup fell outside the offset range and was taken as zero.
    pub clamped: bool,
}

/// `R*φ(x) = ∫_{S¹} φ(w, w·x) dw`, summed over all `2K` angles of the full circle
/// (the second half read through the parity identification) with weight `π/K`.
pub fn dual_radon_2d(s: &Sinogram, target: GridSpec) -> DualRadon {
    let n = target.n;
    let mut out = vec![0.0; n * n];
    let mut clamped = false;
    let weight = PI / s.k() as f64;
    let coords: Vec<f64> = (0..n).map(|i| target.coord(i)).collect();
    for kk in 0..2 * s.k() {
        let (sn, cs) = (kk as f64 * PI / s.k() as f64).sin_cos();
        for iy in 0..n {
            let y = coords[iy];
            for ix in 0..n {
                match s.interp_full(kk, coords[ix] * cs + y * sn) {
                    Some(v) => out[iy * n + ix] += weight * v,
                    None => clamped = true,
                }
            }
        }
    }
    DualRadon { image: GridFunction2D::from_values(target, out).expect("finite"), clamped }
}

/// `γ_2 R*{|σ| R f}`: ramp filter per angle, dual transform, normalization.
pub fn fbp_inverse_2d(s: &Sinogram, target: GridSpec) -> Result<GridFunction2D> {
    let filtered = offset_power_derivative(s, 1)?;
    let back = dual_radon_2d(&filtered, target);
    Ok(back.image.map(|v| gamma_d(2) * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, half: f64) -> GridFunction2D {
        GridFunction2D::from_fn(GridSpec::covering(n, half).unwrap(), |x, y| (-(x * x + y * y) / 2.0).exp())
    }

    #[test]
    fn gaussian_profile() {
        let f = gaussian(128, 8.0);
        let s = grid_radon_2d(&f, 32, 129).unwrap();
        let peak = (2.0 * PI).sqrt();
        for kk in [0, 5, 17] {
            for jj in 0..s.j() {
                let b = s.offset(jj);
                let expect = peak * (-b * b / 2.0).exp();
                assert!((s.get(kk, jj) - expect).abs() < 0.01 * peak, "k={kk} b={b}");
            }
        }
    }

    #[test]
    fn zero_input_and_range_error() {
        let f = GridFunction2D::zeros(GridSpec::covering(32, 1.0).unwrap());
        assert!(grid_radon_2d(&f, 32, 64).unwrap().values().iter().all(|v| *v == 0.0));
        let g = gaussian(32, 4.0);
        assert!(matches!(grid_radon_2d_with_range(&g, 32, 64, 1.0), Err(Error::Range(_))));
        assert!(grid_radon_2d(&g, 16, 64).is_err());
    }

    #[test]
    fn full_circle_identification() {
        let s = Sinogram::from_fn(4, 5, 1.0, Parity::Odd, |t, b| t + b).unwrap();
        assert_eq!(s.get_full(5, 0), -s.get(1, 4));
    }

    #[test]
    fn dual_of_constant_is_circumference() {
        let s = Sinogram::from_fn(64, 65, 3.0, Parity::Even, |_, _| 1.0).unwrap();
        let d = dual_radon_2d(&s, GridSpec::covering(16, 1.0).unwrap());
        assert!(!d.clamped);
        for v in d.image.values() {
            assert!((v - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_flags_out_of_range() {
        let s = Sinogram::from_fn(64, 65, 0.5, Parity::Even, |_, _| 1.0).unwrap();
        assert!(dual_radon_2d(&s, GridSpec::covering(16, 1.0).unwrap()).clamped);
    }

    #[test]
    fn odd_sinogram_is_annihilated() {
        let s = Sinogram::from_fn(64, 129, 3.0, Parity::Odd, |t, b| t.cos() * (-b * b).exp() + b).unwrap();
        let d = dual_radon_2d(&s, GridSpec::covering(16, 1.0).unwrap());
        assert!(d.image.max_abs() <= 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let s = Sinogram::from_fn(3, 4, 1.5, Parity::Even, |t, b| t * b).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Sinogram::read_csv(buf.as_slice(), Parity::Even).unwrap();
        assert_eq!(back, s);
    }
}
