//! Demonstrations assembled from the engines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{grad_at_infinity, rbar_bounds, rnorm_finite_net, rnorm_radial_odd, FiniteReluNet, ReluUnit};
use crate::error::{Error, Result};
use crate::fit::{disc_points, min_norm_fit, FitProblem, FitResult, OffsetRange, Samples};
use crate::piecewise::NormValue;
use crate::radial::RadialFunction;
use crate::spectral::{pwl_fourier_ray, pwl_fourier_ray_complex, PwlCurvatureMeasure2D, RayDecaySample};

/// Frequencies at which the ratio `|F(2σ)| / |F(σ)|` is measured.
pub const CONSTANT_PROBES: [f64; 2] = [50.0, 100.0];
/// A ray is asymptotically constant when every probe ratio is within this of 1.
pub const CONSTANT_BAND: f64 = 0.1;
/// Magnitudes below this fraction of the total curvature mass count as zero.
pub const MAGNITUDE_FLOOR: f64 = 1e-9;
/// Envelope samples per unit of the fastest phase `2π‖p‖σ` over the segment endpoints.
const ENVELOPE_OVERSAMPLING: f64 = 16.0;
const ENVELOPE_MIN_REACH: f64 = 1e-3;
const ENVELOPE_MAX_SAMPLES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RayClass {
    Constant,
    Decaying,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionVerdict {
    pub w: [f64; 2],
    pub class: RayClass,
    /// `E(2σ) / E(σ)` at each probe `σ`, where `E(σ) = max |F|` on `[σ, 2σ)`.
    pub ratios: Vec<f64>,
    /// `|F(σ)|` at each probe `σ`.
    pub magnitudes: Vec<f64>,
    /// `E(σ)` at each probe `σ`.
    pub envelopes: Vec<f64>,
    pub curve: RayDecaySample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfinityCertificate {
    pub directions: Vec<DirectionVerdict>,
    /// Some direction is asymptotically constant.
    pub infinite: bool,
    pub reason: Option<String>,
}

/// Classifies the Fourier transform of the curvature measure along each candidate direction.
pub fn pwl_infinite_certificate(
    mu: &PwlCurvatureMeasure2D,
    normals: &[[f64; 2]],
    sigmas: &[f64],
) -> Result<InfinityCertificate> {
    let mass: f64 = mu
        .segments
        .iter()
        .map(|s| s.coeff.abs() * (s.p1[0] - s.p0[0]).hypot(s.p1[1] - s.p0[1]))
        .sum();
    let floor = MAGNITUDE_FLOOR * mass;
    let reach = mu
        .segments
        .iter()
        .flat_map(|s| [s.p0[0].hypot(s.p0[1]), s.p1[0].hypot(s.p1[1])])
        .fold(ENVELOPE_MIN_REACH, f64::max);
    let step = 1.0 / (ENVELOPE_OVERSAMPLING * reach);
    let mut directions = Vec::with_capacity(normals.len());
    for &w in normals {
        let curve = pwl_fourier_ray(mu, w, sigmas)?;
        let magnitudes: Vec<f64> = CONSTANT_PROBES.iter().map(|&s| pwl_fourier_ray_complex(mu, w, s).norm()).collect();
        let envelopes: Vec<f64> = CONSTANT_PROBES.iter().map(|&s| envelope(mu, w, s, step)).collect();
        let doubled: Vec<f64> = CONSTANT_PROBES.iter().map(|&s| envelope(mu, w, 2.0 * s, step)).collect();
        let ratios: Vec<f64> = envelopes
            .iter()
            .zip(&doubled)
            .map(|(m, m2)| if *m > 0.0 { m2 / m } else { 0.0 })
            .collect();
        let constant = mass > 0.0
            && envelopes.iter().all(|m| *m > floor)
            && ratios.iter().all(|r| (r - 1.0).abs() <= CONSTANT_BAND);
        let class = if constant { RayClass::Constant } else { RayClass::Decaying };
        directions.push(DirectionVerdict { w, class, ratios, magnitudes, envelopes, curve });
    }
    let hit = directions.iter().find(|d| d.class == RayClass::Constant);
    let reason = hit.map(|d| {
        format!(
            "the Fourier transform of the Laplacian stays near {:.6} along w = ({:.6}, {:.6}), \
             while a finite R-norm requires it to decay along every direction",
            d.envelopes[0], d.w[0], d.w[1]
        )
    });
    Ok(InfinityCertificate { infinite: hit.is_some(), reason, directions })
}

/// Largest `|F(s)|` over `s ∈ [σ, 2σ)`.
fn envelope(mu: &PwlCurvatureMeasure2D, w: [f64; 2], sigma: f64, step: f64) -> f64 {
    let count = ((sigma / step).ceil() as usize).clamp(1, ENVELOPE_MAX_SAMPLES);
    (0..count)
        .map(|i| pwl_fourier_ray_complex(mu, w, sigma * (1.0 + i as f64 / count as f64)).norm())
        .fold(0.0, f64::max)
}

/// `[1 − ([x]₊ + [−x]₊ + [y]₊ + [−y]₊)]₊`.
pub fn pyramid_three_layer(x: &[f64]) -> f64 {
    let relu = |t: f64| t.max(0.0);
    let hidden = relu(x[0]) + relu(-x[0]) + relu(x[1]) + relu(-x[1]);
    relu(1.0 - hidden)
}

/// `[1 − ‖x‖₁]₊`.
pub fn pyramid(x: &[f64]) -> f64 {
    (1.0 - (x[0].abs() + x[1].abs())).max(0.0)
}

/// `exp(1 − 1/(1 − ‖x‖²))` inside the unit disc, zero outside.
pub fn smooth_bump(x: &[f64]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 < 1.0 {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub points: usize,
    pub half_width: f64,
    pub seed: u64,
    pub max_abs_deviation: f64,
    pub exact: bool,
}

/// Compares the three-layer network with the pyramid on uniform points in `[−h, h]²`.
pub fn pyramid_threelayer(points: usize, half_width: f64, seed: u64) -> EquivalenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = 0.0f64;
    for _ in 0..points {
        let x = [rng.random_range(-half_width..=half_width), rng.random_range(-half_width..=half_width)];
        dev = dev.max((pyramid_three_layer(&x) - pyramid(&x)).abs());
    }
    EquivalenceReport { points, half_width, seed, max_abs_deviation: dev, exact: dev == 0.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelogramReport {
    pub w1: [f64; 2],
    pub w2: [f64; 2],
    pub scale: f64,
    /// Norms of `f₁`, `f₂`, `f₁ + f₂`, `f₁ − f₂`.
    pub norms: [f64; 4],
    /// `2(n₁² + n₂²)`.
    pub lhs: f64,
    /// `n₊² + n₋²`.
    pub rhs: f64,
    pub violated: bool,
}

pub fn parallelogram_check(w1: [f64; 2], w2: [f64; 2]) -> Result<ParallelogramReport> {
    parallelogram_check_scaled(w1, w2, 1.0)
}

/// Parallelogram law for `f_i = s[w_iᵀx]₊`.
pub fn parallelogram_check_scaled(w1: [f64; 2], w2: [f64; 2], scale: f64) -> Result<ParallelogramReport> {
    for w in [w1, w2] {
        if (w[0].hypot(w[1]) - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("{w:?} is not a unit vector")));
        }
    }
    let same = (w1[0] - w2[0]).hypot(w1[1] - w2[1]) <= 1e-12;
    let opposite = (w1[0] + w2[0]).hypot(w1[1] + w2[1]) <= 1e-12;
    if same || opposite {
        return Err(Error::Precondition("directions must satisfy w1 ≠ ±w2".into()));
    }
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::Precondition(format!("scale must be finite and nonzero, got {scale}")));
    }
    let unit = |w: [f64; 2], a: f64| ReluUnit { a, w: w.to_vec(), b: 0.0 };
    let net = |units: Vec<ReluUnit>| FiniteReluNet::new(2, units, vec![0.0, 0.0], 0.0);
    let nets = [
        net(vec![unit(w1, scale)])?,
        net(vec![unit(w2, scale)])?,
        net(vec![unit(w1, scale), unit(w2, scale)])?,
        net(vec![unit(w1, scale), unit(w2, -scale)])?,
    ];
    let mut norms = [0.0; 4];
    for (n, f) in norms.iter_mut().zip(&nets) {
        *n = finite_value(&rnorm_finite_net(f).value);
    }
    let lhs = 2.0 * (norms[0].powi(2) + norms[1].powi(2));
    let rhs = norms[2].powi(2) + norms[3].powi(2);
    Ok(ParallelogramReport { w1, w2, scale, norms, lhs, rhs, violated: lhs != rhs })
}

fn finite_value(v: &NormValue) -> f64 {
    match v {
        NormValue::Finite(x) => *x,
        NormValue::Infinite => f64::INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpRow {
    pub d: usize,
    pub k: u32,
    pub finite: bool,
    /// `k ≥ (d+1)/2`.
    pub expected_finite: bool,
    pub value: Option<f64>,
    /// `[(d+5)d, 2d(d+5)]`, checked when `k = (d+5)/2`.
    pub bracket: Option<[f64; 2]>,
    pub in_bracket: Option<bool>,
}

impl BumpRow {
    pub fn agrees(&self) -> bool {
        self.finite == self.expected_finite && self.in_bracket != Some(false)
    }
}

/// R-norms of `(1 − ‖x‖²)₊^k` across odd dimensions and powers.
pub fn bump_finiteness_sweep(d_list: &[usize], k_list: &[u32]) -> Result<Vec<BumpRow>> {
    let mut rows = Vec::with_capacity(d_list.len() * k_list.len());
    for &d in d_list {
        if d < 3 || d % 2 == 0 {
            return Err(Error::UnsupportedDimension(d));
        }
        for &k in k_list {
            let rep = rnorm_radial_odd(&RadialFunction::bump_power(d, k)?)?;
            let value = match rep.value {
                NormValue::Finite(v) => Some(v),
                NormValue::Infinite => None,
            };
            let bracket = (2 * k as usize == d + 5).then(|| [((d + 5) * d) as f64, (2 * d * (d + 5)) as f64]);
            let in_bracket = bracket.zip(value).map(|(b, v)| v >= b[0] && v <= b[1]);
            rows.push(BumpRow {
                d,
                k,
                finite: value.is_some(),
                expected_finite: 2 * k as usize >= d + 1,
                value,
                bracket,
                in_bracket,
            });
        }
    }
    Ok(rows)
}

/// Sampling and dictionary for the fits of `|x| + y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDemoConfig {
    pub samples: usize,
    /// Samples are uniform in the disc of this radius.
    pub radius: f64,
    pub tol: f64,
    pub k: usize,
    pub j: usize,
    /// Offsets are restricted to `[−window, window]`.
    pub window: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for GapDemoConfig {
    fn default() -> Self {
        GapDemoConfig {
            samples: 200,
            radius: 3.0,
            tol: 1e-3,
            k: 128,
            j: 129,
            window: 1.5,
            max_iter: crate::fit::DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub use_linear_unit: bool,
    pub norm: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub residual_max: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitSummary {
    fn new(use_linear_unit: bool, r: &FitResult) -> Self {
        FitSummary {
            use_linear_unit,
            norm: r.norm,
            dual_objective: r.dual_objective,
            duality_gap: r.duality_gap,
            residual_max: r.residual_max,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDemoReport {
    pub config: GapDemoConfig,
    pub rnorm: f64,
    pub grad_inf: Vec<f64>,
    pub bracket: [f64; 2],
    pub with_linear_unit: FitSummary,
    pub without_linear_unit: FitSummary,
}

impl GapDemoReport {
    pub fn converged(&self) -> bool {
        self.with_linear_unit.converged && self.without_linear_unit.converged
    }
}

/// `|x| + y = [x]₊ + [−x]₊ + y`.
pub fn abs_plus_linear() -> FiniteReluNet {
    let units = vec![
        ReluUnit { a: 1.0, w: vec![1.0, 0.0], b: 0.0 },
        ReluUnit { a: 1.0, w: vec![-1.0, 0.0], b: 0.0 },
    ];
    FiniteReluNet::new(2, units, vec![0.0, 1.0], 0.0).expect("unit directions")
}

/// Norm, gradient at infinity, bracket and the two fits of `|x| + y`.
pub fn rbar_gap_demo(cfg: &GapDemoConfig) -> Result<GapDemoReport> {
    let net = abs_plus_linear();
    let rnorm = finite_value(&rnorm_finite_net(&net).value);
    let grad_inf = grad_at_infinity(&net);
    let b = rbar_bounds(rnorm, &grad_inf)?;
    let samples = Samples::from_fn(disc_points(cfg.samples, cfg.radius, cfg.seed), |x| net.eval(x))?;
    let fit = |lin: bool| -> Result<FitSummary> {
        let mut p = FitProblem::new(samples.clone(), cfg.k, cfg.j, cfg.tol);
        p.use_linear_unit = lin;
        p.offsets = OffsetRange::Window(cfg.window);
        p.max_iter = cfg.max_iter;
        p.seed = cfg.seed;
        Ok(FitSummary::new(lin, &min_norm_fit(&p)?))
    };
    Ok(GapDemoReport {
        config: cfg.clone(),
        rnorm,
        grad_inf,
        bracket: [b.lower, b.upper],
        with_linear_unit: fit(true)?,
        without_linear_unit: fit(false)?,
    })
}
