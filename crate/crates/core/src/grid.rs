//! Sampled functions on a centered square grid.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n × n` cell-centered samples `x_i = (i − (n−1)/2)·h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::Invalid(format!("grid needs n ≥ 16, got {n}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Invalid(format!("grid spacing must be positive, got {h}")));
        }
        Ok(GridSpec { n, h })
    }

    /// Cells tiling `[−half_width, half_width]²`.
    pub fn covering(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, 2.0 * half_width / n as f64)
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.n as f64 - 1.0)) * self.h
    }

    pub fn half_extent(&self) -> f64 {
        0.5 * self.n as f64 * self.h
    }

    pub fn half_diagonal(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.half_extent()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction2D {
    spec: GridSpec,
    /// Row-major: `values[iy * n + ix]`.
    values: Vec<f64>,
}

impl GridFunction2D {
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = spec.n;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = spec.coord(iy);
            for ix in 0..n {
                values.push(f(spec.coord(ix), y));
            }
        }
        GridFunction2D { spec, values }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n * spec.n {
            return Err(Error::Invalid(format!("expected {} samples, got {}", spec.n * spec.n, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("grid samples must be finite".into()));
        }
        Ok(GridFunction2D { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridFunction2D { spec, values: vec![0.0; spec.n * spec.n] }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.n + ix]
    }

    /// Bilinear interpolation; samples outside the grid count as zero.
    #[inline]
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let c = 0.5 * (self.spec.n as f64 - 1.0);
        self.bilinear_index(x / self.spec.h + c, y / self.spec.h + c)
    }

    /// Bilinear interpolation at fractional indices.
    #[inline]
    pub fn bilinear_index(&self, u: f64, v: f64) -> f64 {
        let n = self.spec.n as isize;
        let (fu, fv) = (u.floor(), v.floor());
        let (i0, j0) = (fu as isize, fv as isize);
        if i0 < -1 || j0 < -1 || i0 >= n || j0 >= n {
            return 0.0;
        }
        let (tu, tv) = (u - fu, v - fv);
        let at = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= n || j >= n {
                0.0
            } else {
                self.values[(j * n + i) as usize]
            }
        };
        if i0 >= 0 && j0 >= 0 && i0 + 1 < n && j0 + 1 < n {
            let base = (j0 * n + i0) as usize;
            let nn = n as usize;
            let a = self.values[base];
            let b = self.values[base + 1];
            let c = self.values[base + nn];
            let d = self.values[base + nn + 1];
            return (1.0 - tv) * ((1.0 - tu) * a + tu * b) + tv * ((1.0 - tu) * c + tu * d);
        }
        (1.0 - tv) * ((1.0 - tu) * at(i0, j0) + tu * at(i0 + 1, j0))
            + tv * ((1.0 - tu) * at(i0, j0 + 1) + tu * at(i0 + 1, j0 + 1))
    }

    /// `h² Σ f`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.h * self.spec.h
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.spec.h * self.spec.h
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.spec.h * self.spec.h).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `‖x‖ + h√2` over nonzero samples: the support radius of the bilinear interpolant.
    pub fn support_radius(&self) -> f64 {
        let n = self.spec.n;
        let mut r: f64 = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                if self.values[iy * n + ix] != 0.0 {
                    r = r.max(self.spec.coord(ix).hypot(self.spec.coord(iy)));
                }
            }
        }
        if r == 0.0 && self.values.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            r + self.spec.h * std::f64::consts::SQRT_2
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction2D { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::Invalid("grid mismatch".into()));
        }
        Ok(GridFunction2D {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `g(x) = f(R⁻¹x)` for a counter-clockwise quarter turn `R`.
    pub fn rotate90(&self) -> Self {
        let n = self.spec.n;
        let mut values = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                values[iy * n + ix] = self.values[(n - 1 - ix) * n + iy];
            }
        }
        GridFunction2D { spec: self.spec, values }
    }

    /// `g(x) = f(x − (dx, dy)·h)` with zero fill.
    pub fn shift(&self, dx: isize, dy: isize) -> Self {
        let n = self.spec.n as isize;
        let mut values = vec![0.0; (n * n) as usize];
        for iy in 0..n {
            for ix in 0..n {
                let (sx, sy) = (ix - dx, iy - dy);
                if sx >= 0 && sy >= 0 && sx < n && sy < n {
                    values[(iy * n + ix) as usize] = self.values[(sy * n + sx) as usize];
                }
            }
        }
        GridFunction2D { spec: self.spec, values }
    }

    /// CSV with header `x,y,value`, rows ordered by `y` then `x`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "value"])?;
        let n = self.spec.n;
        for iy in 0..n {
            for ix in 0..n {
                wr.write_record(&[
                    self.spec.coord(ix).to_string(),
                    self.spec.coord(iy).to_string(),
                    self.values[iy * n + ix].to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `x,y,value` rows in any order; the grid must be square, uniform and centered.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Invalid("grid CSV rows need x,y,value".into()));
            }
            let p = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad number '{}'", &rec[i])))
            };
            rows.push((p(0)?, p(1)?, p(2)?));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() || n < 2 {
            return Err(Error::Invalid(format!("{} rows do not form a square grid", rows.len())));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        if xs.len() != n {
            return Err(Error::Invalid("x coordinates do not form a uniform grid".into()));
        }
        let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let spec = GridSpec::new(n, h)?;
        if (xs[0] - spec.coord(0)).abs() > 1e-6 * h {
            return Err(Error::Invalid("grid is not centered at the origin".into()));
        }
        let c = 0.5 * (n as f64 - 1.0);
        let mut values = vec![f64::NAN; n * n];
        for (x, y, v) in rows {
            let (fx, fy) = (x / h + c, y / h + c);
            let (ix, iy) = (fx.round(), fy.round());
            if (fx - ix).abs() > 1e-6 || (fy - iy).abs() > 1e-6 || ix < 0.0 || iy < 0.0 || ix >= n as f64 || iy >= n as f64 {
                return Err(Error::Invalid(format!("point ({x}, {y}) is off the grid")));
            }
            values[iy as usize * n + ix as usize] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Invalid("grid CSV has missing or duplicate points".into()));
        }
        Self::from_values(spec, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_symmetric() {
        let s = GridSpec::covering(512, 8.0).unwrap();
        assert_eq!(s.h, 16.0 / 512.0);
        assert_eq!(s.coord(0), -s.coord(511));
        assert!(GridSpec::new(8, 1.0).is_err());
    }

    #[test]
    fn bilinear_reproduces_affine_inside() {
        let s = GridSpec::covering(32, 2.0).unwrap();
        let f = GridFunction2D::from_fn(s, |x, y| 2.0 * x - y + 0.5);
        for &(x, y) in &[(0.1, 0.2), (-1.3, 0.77), (0.0, 0.0)] {
            assert!((f.bilinear(x, y) - (2.0 * x - y + 0.5)).abs() < 1e-12);
        }
        assert_eq!(f.bilinear(10.0, 0.0), 0.0);
    }

    #[test]
    fn rotate_and_shift() {
        let s = GridSpec::covering(16, 1.0).unwrap();
        let f = GridFunction2D::from_fn(s, |x, y| x + 10.0 * y);
        let r = f.rotate90();
        // f(R⁻¹(x, y)) = f(y, −x) = y − 10x
        for &(ix, iy) in &[(0usize, 3usize), (7, 9), (15, 15)] {
            let (x, y) = (s.coord(ix), s.coord(iy));
            assert!((r.get(ix, iy) - (y - 10.0 * x)).abs() < 1e-12);
        }
        assert_eq!(f.rotate90().rotate90().rotate90().rotate90(), f);
        let g = f.shift(2, -1);
        assert_eq!(g.get(5, 5), f.get(3, 6));
        assert_eq!(g.get(0, 5), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = GridSpec::covering(16, 1.0).unwrap();
        let f = GridFunction2D::from_fn(s, |x, y| (-(x * x + y * y)).exp());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = GridFunction2D::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.n(), 16);
        assert!((g.h() - f.h()).abs() < 1e-15);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a, b);
        }
        assert!(GridFunction2D::read_csv("x,y,value\n0,0,1\n".as_bytes()).is_err());
    }
}
