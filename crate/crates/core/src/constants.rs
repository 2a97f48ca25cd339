//! Dimension-dependent constants.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `gamma_d = 1/(2(2π)^{d−1})` and `c_d = 2π^{d/2}/Γ(d/2)`, the surface area of `S^{d−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub d: usize,
    pub gamma_d: f64,
    pub c_d: f64,
}

pub fn constants(d: i64) -> Result<Constants> {
    if d <= 0 {
        return Err(Error::Domain(format!("dimension must be positive, got {d}")));
    }
    let d = d as usize;
    Ok(Constants { d, gamma_d: gamma_d(d), c_d: sphere_area(d) })
}

pub fn gamma_d(d: usize) -> f64 {
    0.5 / (2.0 * PI).powi(d as i32 - 1)
}

/// Surface area of the unit sphere in `R^d`; `c_1 = 2`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// `Γ(n/2)` for a positive integer `n`.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n > 0);
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    let target = n as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
