//! Fourier multipliers on grids and sinograms, and Fourier ray probes.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction2D;
use crate::radon::Sinogram;

/// Relative boundary amplitude above which a grid is said to leak.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

/// Signed frequency index of bin `k` in a length-`n` DFT.
fn signed(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// True when the outermost ring of samples exceeds `1e−6 × max |f|`.
pub fn boundary_leakage(f: &GridFunction2D) -> bool {
    let n = f.n();
    let max = f.max_abs();
    if max == 0.0 {
        return false;
    }
    let mut edge: f64 = 0.0;
    for i in 0..n {
        edge = edge.max(f.get(i, 0).abs()).max(f.get(i, n - 1).abs());
        edge = edge.max(f.get(0, i).abs()).max(f.get(n - 1, i).abs());
    }
    edge > LEAKAGE_THRESHOLD * max
}

/// `(−Δ)^{s/2} f` via a zero-padded (factor 2) DFT with multiplier `‖ω‖^s`.
pub fn frac_laplacian_2d(f: &GridFunction2D, s: f64) -> Result<GridFunction2D> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("power must be positive, got {s}")));
    }
    let n = f.n();
    let m = 2 * n;
    let mut data = vec![Complex64::new(0.0, 0.0); m * m];
    for iy in 0..n {
        for ix in 0..n {
            data[iy * m + ix].re = f.get(ix, iy);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fft2(&mut data, m, fwd.as_ref());
    let dw = 2.0 * PI / (m as f64 * f.h());
    let w2: Vec<f64> = (0..m).map(|k| (signed(k, m) * dw).powi(2)).collect();
    for ky in 0..m {
        for kx in 0..m {
            let r2 = w2[kx] + w2[ky];
            data[ky * m + kx] *= if r2 == 0.0 { 0.0 } else { r2.powf(0.5 * s) };
        }
    }
    fft2(&mut data, m, inv.as_ref());
    let scale = 1.0 / (m * m) as f64;
    let mut values = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            values.push(data[iy * m + ix].re * scale);
        }
    }
    GridFunction2D::from_values(f.spec(), values)
}

/// In-place 2-D transform: rows, then columns through a transpose.
fn fft2(data: &mut [Complex64], m: usize, fft: &dyn rustfft::Fft<f64>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    transpose(data, m);
    fft.process_with_scratch(data, &mut scratch);
    transpose(data, m);
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Smallest `n ≥ min` whose prime factors are at most 7 and that has the parity of `odd`.
fn smooth_length(min: usize, odd: bool) -> usize {
    let mut n = min;
    loop {
        if (n % 2 == 1) == odd {
            let mut r = n;
            for p in [2, 3, 5, 7] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return n;
            }
        }
        n += 1;
    }
}

/// Per-angle multiplier `|σ|^order` in the offset variable.
///
/// A non-periodic sinogram is first zero-padded symmetrically to at least twice
/// its length; the result keeps the padded offsets and is marked periodic, so
/// further multipliers act on the same period and compose exactly.
pub fn offset_power_derivative(sin: &Sinogram, order: u32) -> Result<Sinogram> {
    if order == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    let (j, db) = (sin.j(), sin.db());
    let (len, pad) = if sin.is_periodic() {
        (j, 0)
    } else {
        let len = smooth_length(2 * j, j % 2 == 1);
        (len, (len - j) / 2)
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let dw = 2.0 * PI / (len as f64 * db);
    let mult: Vec<f64> = (0..len).map(|k| (signed(k, len) * dw).abs().powi(order as i32)).collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut out = Vec::with_capacity(sin.k() * len);
    for kk in 0..sin.k() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, v) in sin.row(kk).iter().enumerate() {
            buf[pad + i].re = *v;
        }
        fwd.process(&mut buf);
        for (c, m) in buf.iter_mut().zip(&mult) {
            *c *= *m;
        }
        inv.process(&mut buf);
        out.extend(buf.iter().map(|c| c.re / len as f64));
    }
    let b_max = sin.b_max() + pad as f64 * db;
    Ok(sin.with_values(len, b_max, out, true))
}

/// Boundary segments of a piecewise-linear function with curvature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct PwlCurvatureMeasure2D {
    pub segments: Vec<Segment>,
}

impl PwlCurvatureMeasure2D {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if s.p0 == s.p1 {
                return Err(Error::Invalid("degenerate segment".into()));
            }
            if s.coeff == 0.0 || !s.coeff.is_finite() {
                return Err(Error::Invalid("segment weights must be finite and nonzero".into()));
            }
        }
        Ok(PwlCurvatureMeasure2D { segments })
    }

    /// The pyramid `[1 − ‖x‖₁]₊`: four inner half-axes (ridge, weight 2) and the
    /// four edges of the diamond (valley, weight −√2).
    pub fn pyramid() -> Self {
        let mut segments = Vec::new();
        for p in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            segments.push(Segment { p0: [0.0, 0.0], p1: p, coeff: 2.0 });
        }
        let corners = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for i in 0..4 {
            segments.push(Segment { p0: corners[i], p1: corners[(i + 1) % 4], coeff: -std::f64::consts::SQRT_2 });
        }
        PwlCurvatureMeasure2D { segments }
    }

    /// Segments whose normal is not parallel to `w`.
    pub fn without_normals_parallel_to(&self, w: [f64; 2]) -> Self {
        let segments = self
            .segments
            .iter()
            .filter(|s| {
                let d = [s.p1[0] - s.p0[0], s.p1[1] - s.p0[1]];
                let len = d[0].hypot(d[1]);
                (w[0] * d[0] + w[1] * d[1]).abs() > 1e-12 * len
            })
            .cloned()
            .collect();
        PwlCurvatureMeasure2D { segments }
    }

    /// Unit normals of the segments (sign fixed so the first nonzero component is positive).
    pub fn normals(&self) -> Vec<[f64; 2]> {
        self.segments
            .iter()
            .map(|s| {
                let d = [s.p1[0] - s.p0[0], s.p1[1] - s.p0[1]];
                let len = d[0].hypot(d[1]);
                let mut n = [-d[1] / len, d[0] / len];
                if n[0] < -1e-15 || (n[0].abs() <= 1e-15 && n[1] < 0.0) {
                    n = [-n[0], -n[1]];
                }
                n
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayDecaySample {
    pub w: [f64; 2],
    pub sigmas: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl RayDecaySample {
    /// CSV with header `sigma,magnitude`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sigma", "magnitude"])?;
        for (s, m) in self.sigmas.iter().zip(&self.magnitudes) {
            wr.write_record(&[s.to_string(), m.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, w: [f64; 2]) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let (mut sigmas, mut magnitudes) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let p = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Invalid("decay CSV rows need sigma,magnitude".into()))
            };
            sigmas.push(p(0)?);
            magnitudes.push(p(1)?);
        }
        check_sigmas(&sigmas)?;
        Ok(RayDecaySample { w, sigmas, magnitudes })
    }

    /// Least-squares slope of `log(envelope)` against `log σ` on `[lo, hi]`, where the
    /// envelope at `σ` is the largest magnitude at any frequency `≥ σ`.
    pub fn decay_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut env = self.magnitudes.clone();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        let pts: Vec<(f64, f64)> = self
            .sigmas
            .iter()
            .zip(&env)
            .filter(|(s, m)| **s >= lo && **s <= hi && **m > 0.0)
            .map(|(s, m)| (s.ln(), m.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("frequencies must be positive and increasing".into()));
    }
    Ok(())
}

fn check_unit(w: [f64; 2]) -> Result<()> {
    if ((w[0].hypot(w[1])) - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("direction {w:?} is not a unit vector")));
    }
    Ok(())
}

/// `sin z / z` with a series near zero.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `|Σ_k c_k ∫_{B_k} e^{−i2πσ w·x} ds|` in closed form per segment.
pub fn pwl_fourier_ray_complex(mu: &PwlCurvatureMeasure2D, w: [f64; 2], sigma: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for s in &mu.segments {
        let m = [0.5 * (s.p0[0] + s.p1[0]), 0.5 * (s.p0[1] + s.p1[1])];
        let u = [0.5 * (s.p1[0] - s.p0[0]), 0.5 * (s.p1[1] - s.p0[1])];
        let len = 2.0 * u[0].hypot(u[1]);
        let wm = w[0] * m[0] + w[1] * m[1];
        let wu = w[0] * u[0] + w[1] * u[1];
        let phase = Complex64::from_polar(1.0, -2.0 * PI * sigma * wm);
        acc += phase * (s.coeff * len * sinc(2.0 * PI * sigma * wu));
    }
    acc
}

pub fn pwl_fourier_ray(mu: &PwlCurvatureMeasure2D, w: [f64; 2], sigmas: &[f64]) -> Result<RayDecaySample> {
    check_unit(w)?;
    check_sigmas(sigmas)?;
    let magnitudes = sigmas.iter().map(|&s| pwl_fourier_ray_complex(mu, w, s).norm()).collect();
    Ok(RayDecaySample { w, sigmas: sigmas.to_vec(), magnitudes })
}

/// `|Σ_x f(x) e^{−iσ w·x} h²|`, the exact discrete sum in angular frequency.
pub fn grid_fourier_ray(f: &GridFunction2D, w: [f64; 2], sigmas: &[f64]) -> Result<RayDecaySample> {
    check_unit(w)?;
    check_sigmas(sigmas)?;
    let n = f.n();
    let spec = f.spec();
    let h2 = f.h() * f.h();
    let mut magnitudes = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let px: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, -s * w[0] * spec.coord(i))).collect();
        let py: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, -s * w[1] * spec.coord(i))).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for iy in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for ix in 0..n {
                row += px[ix] * f.get(ix, iy);
            }
            acc += row * py[iy];
        }
        magnitudes.push((acc * h2).norm());
    }
    Ok(RayDecaySample { w, sigmas: sigmas.to_vec(), magnitudes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::radon::Parity;

    fn gaussian(n: usize, half: f64) -> GridFunction2D {
        GridFunction2D::from_fn(GridSpec::covering(n, half).unwrap(), |x, y| (-(x * x + y * y) / 2.0).exp())
    }

    #[test]
    fn laplacian_of_gaussian() {
        let f = gaussian(128, 8.0);
        let g = frac_laplacian_2d(&f, 2.0).unwrap();
        let spec = f.spec();
        for iy in (0..128).step_by(7) {
            for ix in (0..128).step_by(5) {
                let (x, y) = (spec.coord(ix), spec.coord(iy));
                let r2 = x * x + y * y;
                let expect = (2.0 - r2) * (-r2 / 2.0).exp();
                assert!((g.get(ix, iy) - expect).abs() < 0.01 * 2.0, "({x},{y})");
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let f = GridFunction2D::zeros(GridSpec::covering(32, 1.0).unwrap());
        assert_eq!(frac_laplacian_2d(&f, 1.7).unwrap().max_abs(), 0.0);
        assert!(frac_laplacian_2d(&f, 0.0).is_err());
        assert!(!boundary_leakage(&f));
        let one = GridFunction2D::from_fn(GridSpec::covering(32, 1.0).unwrap(), |_, _| 1.0);
        assert!(boundary_leakage(&one));
    }

    #[test]
    fn parseval_energy() {
        // ∫|ω|^{2s}|F|²dω/(2π)² = πΓ(s+1) for the unit Gaussian.
        let f = gaussian(256, 8.0);
        for (s, gamma) in [(1.0, 1.0), (2.0, 2.0), (3.0, 6.0)] {
            let g = frac_laplacian_2d(&f, s).unwrap();
            let e = g.l2_norm().powi(2);
            let expect = PI * gamma;
            assert!((e / expect - 1.0).abs() < 0.01, "s={s}: {e} vs {expect}");
        }
    }

    #[test]
    fn offset_second_derivative_of_gaussian_row() {
        let s = Sinogram::from_fn(1, 257, 10.0, Parity::Even, |_, b| (2.0 * PI).sqrt() * (-b * b / 2.0).exp()).unwrap();
        let d = offset_power_derivative(&s, 2).unwrap();
        assert!(d.is_periodic() && d.j() >= 2 * s.j());
        let peak = (2.0 * PI).sqrt();
        for jj in 0..d.j() {
            let b = d.offset(jj);
            let expect = (1.0 - b * b) * peak * (-b * b / 2.0).exp();
            assert!((d.get(0, jj) - expect).abs() < 0.01 * peak, "b={b}");
        }
        let z = Sinogram::from_fn(2, 64, 1.0, Parity::Even, |_, _| 0.0).unwrap();
        assert!(offset_power_derivative(&z, 3).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn multipliers_compose_once_periodic() {
        let s = Sinogram::from_fn(3, 129, 6.0, Parity::Even, |t, b| (1.0 + t) * (-b * b).exp()).unwrap();
        let a = offset_power_derivative(&s, 1).unwrap();
        let ab = offset_power_derivative(&a, 2).unwrap();
        let direct = offset_power_derivative(&s, 3).unwrap();
        let scale = direct.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in ab.values().iter().zip(direct.values()) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn smooth_lengths() {
        assert_eq!(smooth_length(1026, true), 1029);
        assert_eq!(smooth_length(128, false), 128);
    }

    #[test]
    fn single_segment_rays() {
        let mu = PwlCurvatureMeasure2D::new(vec![Segment { p0: [0.0, -0.5], p1: [0.0, 0.5], coeff: 3.0 }]).unwrap();
        let sig: Vec<f64> = (1..=20).map(|k| 5.0 * k as f64).collect();
        let r = pwl_fourier_ray(&mu, [1.0, 0.0], &sig).unwrap();
        assert!(r.magnitudes.iter().all(|m| (m - 3.0).abs() < 1e-12));
        let w = [0.6, 0.8];
        let r = pwl_fourier_ray(&mu, w, &sig).unwrap();
        for (s, m) in r.sigmas.iter().zip(&r.magnitudes) {
            assert!(m * s <= 3.0 / (PI * 0.8) + 1e-9);
        }
        let e = pwl_fourier_ray(&PwlCurvatureMeasure2D::default(), w, &sig).unwrap();
        assert!(e.magnitudes.iter().all(|m| *m == 0.0));
        assert!(PwlCurvatureMeasure2D::new(vec![Segment { p0: [1.0, 1.0], p1: [1.0, 1.0], coeff: 1.0 }]).is_err());
    }

    #[test]
    fn sinc_series_branch() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(5e-5) - (5e-5f64).sin() / 5e-5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_ray_shape() {
        let f = gaussian(128, 8.0);
        let sig: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
        let r = grid_fourier_ray(&f, [0.8, 0.6], &sig).unwrap();
        for (s, m) in r.sigmas.iter().zip(&r.magnitudes) {
            let expect = 2.0 * PI * (-s * s / 2.0).exp();
            assert!((m / expect - 1.0).abs() < 0.02, "σ={s}");
        }
        let z = grid_fourier_ray(&GridFunction2D::zeros(f.spec()), [1.0, 0.0], &sig).unwrap();
        assert!(z.magnitudes.iter().all(|m| *m == 0.0));
    }
}
