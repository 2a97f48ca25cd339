//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use rnorm_core::fit::disc_points;
use rnorm_core::{FitProblem, GridFunction2D, GridSpec, OffsetRange, Samples};

/// `exp(−‖x‖²/2)` on an `n × n` grid over `[−8, 8]²`.
pub fn gaussian_grid(n: usize) -> GridFunction2D {
    GridFunction2D::from_fn(GridSpec::covering(n, 8.0).expect("valid grid"), |x, y| (-(x * x + y * y) / 2.0).exp())
}

/// Three on-grid ReLU units sampled at `n` points of the disc of radius 3, dictionary `K × (K+1)`.
pub fn planted_problem(n: usize, k: usize) -> FitProblem {
    let j = k + 1;
    let b_max = 3.2;
    let offset = |jj: usize| -b_max + 2.0 * b_max * jj as f64 / (j - 1) as f64;
    let dir = |kk: usize| {
        let t = 2.0 * PI * kk as f64 / k as f64;
        [t.cos(), t.sin()]
    };
    let units = [(2.0f64, dir(0), offset(37 * j / 65)), (-1.0, dir(k / 4), offset(29 * j / 65)), (0.5, dir(5 * k / 8), offset(42 * j / 65))];
    let f = |x: &[f64]| units.iter().map(|(a, w, b)| a * (w[0] * x[0] + w[1] * x[1] - b).max(0.0)).sum::<f64>();
    let samples = Samples::from_fn(disc_points(n, 3.0, 1), f).expect("finite samples");
    let mut p = FitProblem::new(samples, k, j, 1e-3);
    p.offsets = OffsetRange::Explicit(b_max);
    p
}
