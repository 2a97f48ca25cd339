//! Minimum total-variation fits over a discretized dictionary of ReLU ridges in the plane.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{atom_distance, FiniteReluNet, ReluUnit, ATOM_MERGE_TOLERANCE};
use crate::error::{Error, Result};
use crate::radon::OFFSET_MARGIN;

/// Default iteration cap of the primal-dual solver.
pub const DEFAULT_MAX_ITER: usize = 50_000;
/// Tube half-width used when interpolation (`τ = 0`) is requested.
pub const INTERPOLATION_SLACK: f64 = 1e-8;
/// Relative duality gap (against `‖y‖∞`) at which the solver stops.
pub const GAP_TOLERANCE: f64 = 1e-6;

const POWER_ITERATIONS: usize = 100;
const EQUILIBRATION_PASSES: usize = 10;
/// Accepted iterations between active-set polish attempts.
const POLISH_EVERY: usize = 1024;
/// Relative shrink of the tube targeted by the polish, keeping round-off inside it.
const POLISH_SHRINK: f64 = 1e-9;
/// Largest active set handed to the dense polish.
const POLISH_LIMIT: usize = 2500;
/// Polishing starts once the relative duality gap of the restart candidate falls below this.
const POLISH_GATE: f64 = 1e-2;
/// Active-set updates per polish.
const POLISH_ROUNDS: usize = 8;
/// Relative singular value cutoff in the polish projections.
const POLISH_RANK: f64 = 1e-11;
const CHECK_EVERY: usize = 64;
/// The solver works in a slightly shrunk tube so that its iterates end inside the requested one;
/// the shrink is the smaller of this fraction of `τ` and `MARGIN_OF_GAP` times the gap tolerance.
const TUBE_MARGIN: f64 = 1e-3;
const MARGIN_OF_GAP: f64 = 1e-2;
/// A candidate whose KKT error exceeds the last restart's by this factor triggers a rollback.
const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureAtom {
    pub w: Vec<f64>,
    pub b: f64,
    pub weight: f64,
}

/// Finite signed combination of point masses on `S^{d−1} × ℝ`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<MeasureAtom>,
}

impl AtomicMeasure {
    /// Merges coincident atoms and drops zero weights.
    pub fn new(atoms: Vec<MeasureAtom>) -> Result<Self> {
        let mut out: Vec<MeasureAtom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !a.weight.is_finite() || !a.b.is_finite() {
                return Err(Error::Invalid("non-finite atom".into()));
            }
            let n = a.w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("atom direction {:?} is not normalized", a.w)));
            }
            if let Some(o) = out.iter().position(|o| o.w.len() != a.w.len()) {
                return Err(Error::Invalid(format!("atom {o} has a different dimension")));
            }
            match out.iter_mut().find(|o| atom_distance(&o.w, o.b, &a.w, a.b) <= ATOM_MERGE_TOLERANCE) {
                Some(o) => o.weight += a.weight,
                None => out.push(a),
            }
        }
        out.retain(|a| a.weight != 0.0);
        Ok(AtomicMeasure { atoms: out })
    }

    pub fn atoms(&self) -> &[MeasureAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }

    /// Average of the measure and its reflection `(w, b) ↦ (−w, −b)`.
    pub fn even_part(&self) -> AtomicMeasure {
        let mut atoms = Vec::with_capacity(2 * self.atoms.len());
        for a in &self.atoms {
            atoms.push(MeasureAtom { w: a.w.clone(), b: a.b, weight: 0.5 * a.weight });
            atoms.push(MeasureAtom { w: a.w.iter().map(|x| -x).collect(), b: -a.b, weight: 0.5 * a.weight });
        }
        AtomicMeasure::new(atoms).expect("reflected atoms stay valid")
    }

    /// `Σ weight·([wᵀx − b]₊ − [−b]₊)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.atoms.iter().map(|a| a.weight * ridge(dot(&a.w, x), a.b)).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[t − b]₊ − [−b]₊`, the ridge that vanishes at the origin.
fn ridge(t: f64, b: f64) -> f64 {
    (t - b).max(0.0) - (-b).max(0.0)
}

/// Planar sample points with targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn new(x: Vec<[f64; 2]>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Invalid("need at least one sample".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Invalid(format!("{} points but {} targets", x.len(), y.len())));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite sample".into()));
        }
        Ok(Samples { x, y })
    }

    pub fn from_fn(x: Vec<[f64; 2]>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let y = x.iter().map(|p| f(p)).collect();
        Self::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.x.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }

    /// CSV with header `x1,x2,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x1", "x2", "y"])?;
        for (p, y) in self.x.iter().zip(&self.y) {
            wr.write_record(&[p[0].to_string(), p[1].to_string(), y.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `x1,…,xd,y`; only `d = 2` is supported.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let width = rd.headers()?.len();
        if width < 2 {
            return Err(Error::Invalid("samples need coordinates and a target column".into()));
        }
        if width != 3 {
            return Err(Error::UnsupportedDimension(width - 1));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Invalid(format!("bad sample value: {e}")))?;
            if v.len() != 3 {
                return Err(Error::Invalid("ragged sample row".into()));
            }
            x.push([v[0], v[1]]);
            y.push(v[2]);
        }
        Self::new(x, y)
    }
}

/// `n` points uniform in the disc of the given radius.
pub fn disc_points(n: usize, radius: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = 2.0 * PI * rng.random::<f64>();
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// `n` points uniform in `[−half, half]²`.
pub fn box_points(n: usize, half: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = half * (2.0 * rng.random::<f64>() - 1.0);
            let b = half * (2.0 * rng.random::<f64>() - 1.0);
            [a, b]
        })
        .collect()
}

/// How the offset range `[−B, B]` of the dictionary is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "b_max", rename_all = "kebab-case")]
pub enum OffsetRange {
    /// `B = 1.05 × max sample radius`.
    Cover,
    /// Given `B`, which must cover every sample projection.
    Explicit(f64),
    /// Given `B` with no coverage check; the dictionary sees only a window of offsets.
    Window(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub samples: Samples,
    /// Number of angles, uniform on `[0, 2π)`.
    pub k: usize,
    /// Number of offsets, uniform on `[−B, B]`.
    pub j: usize,
    pub tol: f64,
    pub use_linear_unit: bool,
    pub offsets: OffsetRange,
    /// Fix the bias to this value instead of leaving it free.
    pub origin_value: Option<f64>,
    pub max_iter: usize,
    /// Seed of the power iteration start vector.
    pub seed: u64,
}

impl FitProblem {
    pub fn new(samples: Samples, k: usize, j: usize, tol: f64) -> Self {
        FitProblem {
            samples,
            k,
            j,
            tol,
            use_linear_unit: true,
            offsets: OffsetRange::Cover,
            origin_value: None,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }

    pub fn grid(&self) -> Result<AtomGrid> {
        if self.k < 1 || self.j < 2 {
            return Err(Error::Invalid(format!("atom grid {}×{} is too small", self.k, self.j)));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain(format!("tolerance must be non-negative, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("max_iter must be positive".into()));
        }
        let r = self.samples.max_radius();
        let b_max = match self.offsets {
            OffsetRange::Cover => OFFSET_MARGIN * r,
            OffsetRange::Explicit(b) => {
                if b < r {
                    return Err(Error::Range(format!("offset range {b} does not cover sample radius {r}")));
                }
                b
            }
            OffsetRange::Window(b) => b,
        };
        if !(b_max > 0.0 && b_max.is_finite()) {
            return Err(Error::Invalid(format!("offset range must be positive, got {b_max}")));
        }
        Ok(AtomGrid { k: self.k, j: self.j, b_max })
    }

    /// Tube half-width actually enforced.
    pub fn effective_tol(&self) -> f64 {
        if self.tol == 0.0 {
            INTERPOLATION_SLACK
        } else {
            self.tol
        }
    }

    fn extra_columns(&self) -> usize {
        2 * self.use_linear_unit as usize + self.origin_value.is_none() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomGrid {
    pub k: usize,
    pub j: usize,
    pub b_max: f64,
}

impl AtomGrid {
    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.k as f64
    }

    pub fn direction(&self, k: usize) -> [f64; 2] {
        let t = self.angle(k);
        [t.cos(), t.sin()]
    }

    pub fn offset(&self, j: usize) -> f64 {
        -self.b_max + 2.0 * self.b_max * j as f64 / (self.j - 1) as f64
    }

    pub fn atoms(&self) -> usize {
        self.k * self.j
    }
}

/// Dense feature matrix, row-major, with the ridge columns `(k, j) ↦ k·J + j`
/// first and then the unpenalized columns `x1, x2` (linear unit) and `1` (free bias).
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    pub rows: usize,
    pub atom_cols: usize,
    pub extra_cols: usize,
    pub data: Vec<f64>,
}

impl Dictionary {
    pub fn cols(&self) -> usize {
        self.atom_cols + self.extra_cols
    }

    pub fn get(&self, n: usize, col: usize) -> f64 {
        self.data[n * self.cols() + col]
    }
}

pub fn build_dictionary(p: &FitProblem) -> Result<Dictionary> {
    let g = p.grid()?;
    let extra = p.extra_columns();
    let cols = g.atoms() + extra;
    let mut data = Vec::with_capacity(p.samples.len() * cols);
    for x in &p.samples.x {
        for k in 0..g.k {
            let t = dot(&g.direction(k), x);
            for j in 0..g.j {
                data.push(ridge(t, g.offset(j)));
            }
        }
        if p.use_linear_unit {
            data.extend_from_slice(x);
        }
        if p.origin_value.is_none() {
            data.push(1.0);
        }
    }
    Ok(Dictionary { rows: p.samples.len(), atom_cols: g.atoms(), extra_cols: extra, data })
}

/// Matrix-free ridge dictionary: each product costs `O(K(N + J))`.
#[derive(Clone, Debug)]
pub struct RidgeOperator {
    grid: AtomGrid,
    n: usize,
    offsets: Vec<f64>,
    neg_part: Vec<f64>,
    /// `t[k·N + n] = w_kᵀx_n`.
    t: Vec<f64>,
    /// Number of offsets strictly below `t[k·N + n]`.
    idx: Vec<usize>,
}

impl RidgeOperator {
    pub fn new(x: &[[f64; 2]], grid: AtomGrid) -> Self {
        let n = x.len();
        let offsets: Vec<f64> = (0..grid.j).map(|j| grid.offset(j)).collect();
        let neg_part = offsets.iter().map(|b| (-b).max(0.0)).collect();
        let db = 2.0 * grid.b_max / (grid.j - 1) as f64;
        let mut t = Vec::with_capacity(grid.k * n);
        let mut idx = Vec::with_capacity(grid.k * n);
        for k in 0..grid.k {
            let w = grid.direction(k);
            for p in x {
                let tv = dot(&w, p);
                let guess = ((tv + grid.b_max) / db).floor() + 1.0;
                let mut i = guess.clamp(0.0, grid.j as f64) as usize;
                while i > 0 && offsets[i - 1] >= tv {
                    i -= 1;
                }
                while i < grid.j && offsets[i] < tv {
                    i += 1;
                }
                t.push(tv);
                idx.push(i);
            }
        }
        RidgeOperator { grid, n, offsets, neg_part, t, idx }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.grid.atoms()
    }

    /// `out = A a`.
    pub fn apply(&self, a: &[f64], out: &mut [f64]) {
        let jn = self.grid.j;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut s0 = vec![0.0; jn + 1];
        let mut s1 = vec![0.0; jn + 1];
        for k in 0..self.grid.k {
            let ak = &a[k * jn..(k + 1) * jn];
            if ak.iter().all(|v| *v == 0.0) {
                continue;
            }
            let mut konst = 0.0;
            for j in 0..jn {
                s0[j + 1] = s0[j] + ak[j];
                s1[j + 1] = s1[j] + ak[j] * self.offsets[j];
                konst += ak[j] * self.neg_part[j];
            }
            let base = k * self.n;
            for (i, o) in out.iter_mut().enumerate() {
                let (tv, m) = (self.t[base + i], self.idx[base + i]);
                *o += tv * s0[m] - s1[m] - konst;
            }
        }
    }

    /// `out = Aᵀ λ`.
    pub fn apply_t(&self, lam: &[f64], out: &mut [f64]) {
        let jn = self.grid.j;
        let total: f64 = lam.iter().sum();
        let mut l0 = vec![0.0; jn + 1];
        let mut l1 = vec![0.0; jn + 1];
        for k in 0..self.grid.k {
            l0.iter_mut().for_each(|v| *v = 0.0);
            l1.iter_mut().for_each(|v| *v = 0.0);
            let base = k * self.n;
            for (i, l) in lam.iter().enumerate() {
                let m = self.idx[base + i];
                l0[m] += l;
                l1[m] += l * self.t[base + i];
            }
            let (mut c0, mut c1) = (0.0, 0.0);
            for j in (0..jn).rev() {
                c0 += l0[j + 1];
                c1 += l1[j + 1];
                out[k * jn + j] = c1 - self.offsets[j] * c0 - self.neg_part[j] * total;
            }
        }
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let jn = self.grid.j;
        let mut out = vec![0.0; self.cols()];
        for k in 0..self.grid.k {
            let base = k * self.n;
            for j in 0..jn {
                let b = self.offsets[j];
                let s: f64 = self.t[base..base + self.n].iter().map(|&tv| ridge(tv, b).powi(2)).sum();
                out[k * jn + j] = s.sqrt();
            }
        }
        out
    }
}

/// Fixed solver settings, for embedding in reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    pub default_max_iter: usize,
    pub interpolation_slack: f64,
    pub gap_tolerance: f64,
    pub power_iterations: usize,
    pub equilibration_passes: usize,
    pub check_every: usize,
    pub polish_every: usize,
    pub polish_gate: f64,
    pub offset_margin: f64,
}

pub fn solver_settings() -> SolverSettings {
    SolverSettings {
        default_max_iter: DEFAULT_MAX_ITER,
        interpolation_slack: INTERPOLATION_SLACK,
        gap_tolerance: GAP_TOLERANCE,
        power_iterations: POWER_ITERATIONS,
        equilibration_passes: EQUILIBRATION_PASSES,
        check_every: CHECK_EVERY,
        polish_every: POLISH_EVERY,
        polish_gate: POLISH_GATE,
        offset_margin: OFFSET_MARGIN,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub measure: AtomicMeasure,
    /// Linear unit; zero when disabled.
    pub v: Vec<f64>,
    pub c: f64,
    /// `‖α‖₁`.
    pub norm: f64,
    /// Value of the certified dual feasible point.
    pub dual_objective: f64,
    pub residual_max: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub b_max: f64,
}

impl FitResult {
    /// The fitted function as a finite network.
    pub fn to_net(&self) -> FiniteReluNet {
        let mut c = self.c;
        let units = self
            .measure
            .atoms()
            .iter()
            .map(|a| {
                c -= a.weight * (-a.b).max(0.0);
                ReluUnit { a: a.weight, w: a.w.clone(), b: a.b }
            })
            .collect();
        FiniteReluNet::new(2, units, self.v.clone(), c).expect("dictionary directions are unit vectors")
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.measure.eval(x) + dot(&self.v, x) + self.c
    }
}

/// Unpenalized block `[x1 x2 1]` (or a subset), column-normalized and orthonormalized for projection.
struct FreeBlock {
    cols: Vec<Vec<f64>>,
    scale: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl FreeBlock {
    fn new(p: &FitProblem, row: &[f64]) -> Self {
        let mut raw: Vec<Vec<f64>> = Vec::new();
        if p.use_linear_unit {
            raw.push(p.samples.x.iter().map(|x| x[0]).collect());
            raw.push(p.samples.x.iter().map(|x| x[1]).collect());
        }
        if p.origin_value.is_none() {
            raw.push(vec![1.0; p.samples.len()]);
        }
        let mut cols = Vec::new();
        let mut scale = Vec::new();
        for c in raw {
            let c: Vec<f64> = c.iter().zip(row).map(|(v, r)| v * r).collect();
            let s = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = if s > 1e-12 { s } else { 1.0 };
            cols.push(c.iter().map(|v| v / s).collect::<Vec<f64>>());
            scale.push(s);
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in &cols {
            let mut v = c.clone();
            for _ in 0..2 {
                for q in &basis {
                    let d = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
                }
            }
            let nv = dot(&v, &v).sqrt();
            if nv > 1e-10 {
                basis.push(v.into_iter().map(|a| a / nv).collect());
            }
        }
        FreeBlock { cols, scale, basis }
    }

    fn apply_add(&self, z: &[f64], out: &mut [f64]) {
        for (c, zi) in self.cols.iter().zip(z) {
            out.iter_mut().zip(c).for_each(|(o, v)| *o += zi * v);
        }
    }

    fn apply_t(&self, lam: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, lam)).collect()
    }

    fn project_out(&self, lam: &[f64]) -> Vec<f64> {
        let mut l = lam.to_vec();
        for q in &self.basis {
            let d = dot(q, &l);
            l.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        l
    }
}

/// Row- and column-scaled operator `[R A C, F]` seen by the solver.
struct Scaled<'a> {
    op: &'a RidgeOperator,
    row: Vec<f64>,
    inv: Vec<f64>,
    free: &'a FreeBlock,
    buf: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl Scaled<'_> {
    fn forward(&self, a: &[f64], z: &[f64], out: &mut [f64]) {
        let mut buf = self.buf.borrow_mut();
        buf.0.iter_mut().zip(a).zip(&self.inv).for_each(|((b, a), s)| *b = a * s);
        self.op.apply(&buf.0, out);
        out.iter_mut().zip(&self.row).for_each(|(o, r)| *o *= r);
        self.free.apply_add(z, out);
    }

    fn adjoint(&self, lam: &[f64], out: &mut [f64]) -> Vec<f64> {
        let mut buf = self.buf.borrow_mut();
        buf.1.iter_mut().zip(lam).zip(&self.row).for_each(|((b, l), r)| *b = l * r);
        self.op.apply_t(&buf.1, out);
        out.iter_mut().zip(&self.inv).for_each(|(o, s)| *o *= s);
        self.free.apply_t(lam)
    }
}

/// Ruiz equilibration of the ridge block in the max norm, then unit Euclidean columns.
/// Returns row scales and column scales.
fn equilibrate(op: &RidgeOperator, x: &[[f64; 2]], passes: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, jn) = (op.n, op.grid.j);
    let mut row = vec![1.0; n];
    let mut col = vec![1.0; op.cols()];
    let mut rmax = vec![0.0f64; n];
    let mut cmax = vec![0.0f64; op.cols()];
    for _ in 0..passes {
        // The free columns x1, x2, 1 bound each row from below.
        for (r, (p, s)) in rmax.iter_mut().zip(x.iter().zip(&row)) {
            *r = p[0].abs().max(p[1].abs()).max(1.0) * s;
        }
        cmax.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..op.grid.k {
            let base = k * n;
            for (i, rs) in row.iter().enumerate() {
                let tv = op.t[base + i];
                for j in 0..jn {
                    let c = k * jn + j;
                    let v = ridge(tv, op.offsets[j]).abs() * col[c];
                    rmax[i] = rmax[i].max(v * rs);
                    cmax[c] = cmax[c].max(v * rs);
                }
            }
        }
        for (r, m) in row.iter_mut().zip(&rmax) {
            if *m > 0.0 {
                *r /= m.sqrt();
            }
        }
        for (c, m) in col.iter_mut().zip(&cmax) {
            if *m > 0.0 {
                *c /= m.sqrt();
            }
        }
    }
    let mut norm2 = vec![0.0f64; op.cols()];
    for k in 0..op.grid.k {
        let base = k * n;
        for (i, rs) in row.iter().enumerate() {
            let tv = op.t[base + i];
            for j in 0..jn {
                norm2[k * jn + j] += (ridge(tv, op.offsets[j]) * rs).powi(2);
            }
        }
    }
    for (c, s2) in col.iter_mut().zip(&norm2) {
        let s = s2.sqrt() * *c;
        *c = if s > 1e-12 { *c / s } else { 1.0 };
    }
    (row, col)
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

struct Kkt {
    viol: f64,
    gap: f64,
    primal: f64,
    dual: f64,
    err: f64,
}

struct Solver<'a> {
    k: Scaled<'a>,
    wts: Vec<f64>,
    y: Vec<f64>,
    tube: f64,
}

impl Solver<'_> {
    /// Feasibility, objectives and the `ω`-weighted KKT error used for restarts.
    fn kkt(&self, a: &[f64], z: &[f64], lam: &[f64], tol: f64, omega: f64) -> Kkt {
        let n = self.y.len();
        let mut r = vec![0.0; n];
        self.k.forward(a, z, &mut r);
        let (mut viol, mut pres) = (0.0f64, 0.0);
        for ((p, y), s) in r.iter().zip(&self.y).zip(&self.k.row) {
            let e = ((p - y).abs() - tol * s).max(0.0);
            viol = viol.max(e / s);
            pres += e * e;
        }
        let primal: f64 = a.iter().zip(&self.wts).map(|(a, w)| a.abs() * w).sum();
        let mut at = vec![0.0; a.len()];
        let bt = self.k.adjoint(lam, &mut at);
        let dres = at.iter().zip(&self.wts).map(|(v, w)| (v.abs() - w).max(0.0).powi(2)).sum::<f64>()
            + dot(&bt, &bt);
        let l = self.k.free.project_out(lam);
        self.k.adjoint(&l, &mut at);
        let s = at.iter().zip(&self.wts).map(|(v, w)| v.abs() / w).fold(1.0, f64::max);
        let dual = (-dot(&self.y, &l) - tol * l.iter().zip(&self.k.row).map(|(v, r)| v.abs() * r).sum::<f64>()) / s;
        let gap = primal - dual;
        let err = (omega * pres + dres / omega + gap * gap).sqrt();
        Kkt { viol, gap, primal, dual, err }
    }
}

/// Projection of a sparse iterate onto the equations of its own active set: the support of `a`
/// and the rows where `λ ≠ 0`. Primal and dual are corrected separately by minimum-norm steps.
/// Columns whose sign flips leave the support, violated rows or columns join the active set,
/// and the projection is repeated. Either half is `None` when no consistent set is found.
#[allow(clippy::type_complexity)]
fn polish(
    solver: &Solver<'_>,
    a: &[f64],
    z: &[f64],
    lam: &[f64],
    tube: f64,
) -> (Option<(Vec<f64>, Vec<f64>)>, Option<Vec<f64>>) {
    let sup: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
    let act: Vec<(usize, f64)> = (0..lam.len()).filter(|&n| lam[n] != 0.0).map(|n| (n, lam[n].signum())).collect();
    if act.is_empty() {
        return (None, None);
    }
    (polish_primal(solver, a, z, sup.clone(), act.clone(), tube), polish_dual(solver, a, lam, sup, act))
}

fn polish_entry(solver: &Solver<'_>, n: usize, col: usize) -> f64 {
    let op = solver.k.op;
    let (k, j) = (col / op.grid.j, col % op.grid.j);
    solver.k.row[n] * ridge(op.t[k * op.n + n], op.offsets[j]) * solver.k.inv[col]
}

fn polish_primal(
    solver: &Solver<'_>,
    a: &[f64],
    z: &[f64],
    mut sup: Vec<usize>,
    mut act: Vec<(usize, f64)>,
    tube: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    use nalgebra::{DMatrix, DVector};
    let free = solver.k.free;
    let pz = free.cols.len();
    let n = solver.y.len();
    for _ in 0..POLISH_ROUNDS {
        let cols = sup.len() + pz;
        if act.len() > POLISH_LIMIT || cols > POLISH_LIMIT {
            return None;
        }
        let m = DMatrix::from_fn(act.len(), cols, |r, c| {
            if c < sup.len() {
                polish_entry(solver, act[r].0, sup[c])
            } else {
                free.cols[c - sup.len()][act[r].0]
            }
        });
        let x0 = DVector::from_fn(cols, |c, _| if c < sup.len() { a[sup[c]] } else { z[c - sup.len()] });
        let rhs = DVector::from_fn(act.len(), |r, _| {
            let (i, sg) = act[r];
            solver.y[i] + sg * tube * solver.k.row[i]
        });
        let svd = m.clone().svd(true, true);
        let eps = POLISH_RANK * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let x = &x0 + svd.solve(&(&rhs - &m * &x0), eps).ok()?;
        let flipped: Vec<usize> = (0..sup.len()).filter(|&c| x[c] * a[sup[c]] < 0.0).collect();
        if !flipped.is_empty() {
            sup = (0..sup.len()).filter(|c| !flipped.contains(c)).map(|c| sup[c]).collect();
            continue;
        }
        let mut pa = vec![0.0; a.len()];
        for (c, &j) in sup.iter().enumerate() {
            pa[j] = x[c];
        }
        let pzv: Vec<f64> = (0..pz).map(|i| x[sup.len() + i]).collect();
        let mut r = vec![0.0; n];
        solver.k.forward(&pa, &pzv, &mut r);
        let mut grew = false;
        for i in 0..n {
            let e = r[i] - solver.y[i];
            if e.abs() > solver.tube * solver.k.row[i] {
                if act.iter().any(|&(q, _)| q == i) {
                    return None;
                }
                act.push((i, e.signum()));
                grew = true;
            }
        }
        if !grew {
            return Some((pa, pzv));
        }
    }
    None
}

fn polish_dual(
    solver: &Solver<'_>,
    a: &[f64],
    lam: &[f64],
    mut sup: Vec<usize>,
    mut act: Vec<(usize, f64)>,
) -> Option<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let free = solver.k.free;
    let pz = free.cols.len();
    let mut sign: Vec<f64> = sup.iter().map(|&j| a[j].signum()).collect();
    let mut at = vec![0.0; a.len()];
    for _ in 0..POLISH_ROUNDS {
        let cols = sup.len() + pz;
        if act.len() > POLISH_LIMIT || cols > POLISH_LIMIT || act.is_empty() {
            return None;
        }
        let mt = DMatrix::from_fn(cols, act.len(), |c, r| {
            if c < sup.len() {
                polish_entry(solver, act[r].0, sup[c])
            } else {
                free.cols[c - sup.len()][act[r].0]
            }
        });
        let l0 = DVector::from_fn(act.len(), |r, _| lam[act[r].0]);
        let drhs = DVector::from_fn(cols, |c, _| if c < sup.len() { -sign[c] * solver.wts[sup[c]] } else { 0.0 });
        let svd = mt.clone().svd(true, true);
        let eps = POLISH_RANK * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let l = &l0 + svd.solve(&(&drhs - &mt * &l0), eps).ok()?;
        let flipped: Vec<usize> = (0..act.len()).filter(|&r| l[r] * act[r].1 < 0.0).collect();
        if !flipped.is_empty() {
            act = (0..act.len()).filter(|r| !flipped.contains(r)).map(|r| act[r]).collect();
            continue;
        }
        let mut pl = vec![0.0; lam.len()];
        for (r, &(i, _)) in act.iter().enumerate() {
            pl[i] = l[r];
        }
        solver.k.adjoint(&pl, &mut at);
        let mut grew = false;
        for (j, v) in at.iter().enumerate() {
            if v.abs() > solver.wts[j] * (1.0 + POLISH_RANK.sqrt()) && !sup.contains(&j) {
                sup.push(j);
                sign.push(-v.signum());
                grew = true;
            }
        }
        if !grew {
            return Some(pl);
        }
    }
    None
}

/// Restarted primal-dual hybrid gradient on
/// `min Σ|α| s.t. |Aα + Fz − y| ≤ τ` with free `z`.
pub fn min_norm_fit(p: &FitProblem) -> Result<FitResult> {
    let grid = p.grid()?;
    let op = RidgeOperator::new(&p.samples.x, grid);
    let (row, inv) = equilibrate(&op, &p.samples.x, EQUILIBRATION_PASSES);
    let free = FreeBlock::new(p, &row);
    let y_raw: Vec<f64> = match p.origin_value {
        Some(c0) => p.samples.y.iter().map(|v| v - c0).collect(),
        None => p.samples.y.clone(),
    };
    let y_inf = y_raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let y: Vec<f64> = y_raw.iter().zip(&row).map(|(v, r)| v * r).collect();
    let n = y.len();
    let m = op.cols();
    let pz = free.cols.len();
    let cs: Vec<f64> = inv.iter().map(|s| 1.0 / s).collect();
    let solver = Solver {
        k: Scaled {
            op: &op,
            row: row.clone(),
            inv: inv.clone(),
            free: &free,
            buf: std::cell::RefCell::new((vec![0.0; m], vec![0.0; n])),
        },
        wts: inv,
        y,
        tube: p.effective_tol(),
    };
    let gap_tol = GAP_TOLERANCE * y_inf.max(f64::MIN_POSITIVE);
    let tube_in = solver.tube - (TUBE_MARGIN * solver.tube).min(MARGIN_OF_GAP * gap_tol);

    // Operator norm by power iteration on KᵀK.
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut va: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut vz: Vec<f64> = (0..pz).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut kv = vec![0.0; n];
    let mut lmax = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let nv = (dot(&va, &va) + dot(&vz, &vz)).sqrt();
        if nv == 0.0 {
            break;
        }
        va.iter_mut().for_each(|v| *v /= nv);
        vz.iter_mut().for_each(|v| *v /= nv);
        solver.k.forward(&va, &vz, &mut kv);
        vz = solver.k.adjoint(&kv, &mut va);
        lmax = (dot(&va, &va) + dot(&vz, &vz)).sqrt();
    }
    let mut eta = 0.9 / lmax.sqrt().max(1e-12);

    let mut a = vec![0.0; m];
    let mut z = vec![0.0; pz];
    let mut lam = vec![0.0; n];
    let (mut sa, mut sz, mut sl) = (vec![0.0; m], vec![0.0; pz], vec![0.0; n]);
    let mut weight_sum = 0.0;
    let (mut ra, mut rz, mut rl) = (a.clone(), z.clone(), lam.clone());
    let mut last_restart = solver.kkt(&a, &z, &lam, tube_in, 1.0).err;
    let mut prev_candidate = f64::INFINITY;
    let mut since = 0usize;
    let mut omega = 1.0f64;
    // Cached products at the current point: kx = K(a, z), at/bt = Kᵀλ.
    let mut kx = vec![0.0; n];
    let mut at = vec![0.0; m];
    let mut bt = solver.k.adjoint(&lam, &mut at);
    let (mut an, mut zn, mut ln) = (vec![0.0; m], vec![0.0; pz], vec![0.0; n]);
    let (mut kxn, mut atn) = (vec![0.0; n], vec![0.0; m]);
    let mut accepted = 0usize;
    // Lowered whenever the adaptive steps run away from the last restart point.
    let mut eta_cap = f64::INFINITY;
    let mut segment_eta = 0.0f64;
    let mut iterations = p.max_iter;
    let mut done = false;

    for it in 0..p.max_iter {
        // Adaptive step: accept when η ≤ ‖Δ‖²_ω / (2|Δλᵀ K Δx|).
        let (tp, sd) = (eta / omega, eta * omega);
        for i in 0..m {
            an[i] = soft(a[i] - tp * at[i], tp * solver.wts[i]);
        }
        for i in 0..pz {
            zn[i] = z[i] - tp * bt[i];
        }
        solver.k.forward(&an, &zn, &mut kxn);
        for i in 0..n {
            ln[i] = soft(lam[i] + sd * (2.0 * kxn[i] - kx[i] - solver.y[i]), sd * tube_in * row[i]);
        }
        let btn = solver.k.adjoint(&ln, &mut atn);
        let dx2 = dist2(&an, &a) + dist2(&zn, &z);
        let dl2 = dist2(&ln, &lam);
        let inter: f64 = (0..n).map(|i| (ln[i] - lam[i]) * (kxn[i] - kx[i])).sum::<f64>().abs();
        let eta_max = if inter > 0.0 { (omega * dx2 + dl2 / omega) / (2.0 * inter) } else { f64::INFINITY };
        let k1 = (accepted + 1) as f64;
        let next = ((1.0 - k1.powf(-0.3)) * eta_max).min((1.0 + k1.powf(-0.6)) * eta).min(eta_cap);
        if eta > eta_max {
            eta = next;
            continue;
        }
        std::mem::swap(&mut a, &mut an);
        std::mem::swap(&mut z, &mut zn);
        std::mem::swap(&mut lam, &mut ln);
        std::mem::swap(&mut kx, &mut kxn);
        std::mem::swap(&mut at, &mut atn);
        bt = btn;
        axpy(&mut sa, eta, &a);
        axpy(&mut sz, eta, &z);
        axpy(&mut sl, eta, &lam);
        weight_sum += eta;
        segment_eta = segment_eta.max(eta);
        eta = next;
        accepted += 1;
        since += 1;

        if accepted % CHECK_EVERY == 0 {
            let inv_c = 1.0 / weight_sum;
            let (ma, mz, ml) = (scaled(&sa, inv_c), scaled(&sz, inv_c), scaled(&sl, inv_c));
            let e_avg = solver.kkt(&ma, &mz, &ml, tube_in, omega).err;
            let e_cur = solver.kkt(&a, &z, &lam, tube_in, omega).err;
            let (ca, cz, cl, ce) = if e_avg < e_cur { (ma, mz, ml, e_avg) } else { (a.clone(), z.clone(), lam.clone(), e_cur) };
            if !(ce <= DIVERGENCE_FACTOR * last_restart) {
                eta_cap = 0.5 * segment_eta;
                eta = eta.min(eta_cap);
                a.clone_from(&ra);
                z.clone_from(&rz);
                lam.clone_from(&rl);
                solver.k.forward(&a, &z, &mut kx);
                bt = solver.k.adjoint(&lam, &mut at);
                sa.iter_mut().for_each(|v| *v = 0.0);
                sz.iter_mut().for_each(|v| *v = 0.0);
                sl.iter_mut().for_each(|v| *v = 0.0);
                weight_sum = 0.0;
                segment_eta = 0.0;
                since = 0;
                prev_candidate = f64::INFINITY;
                continue;
            }
            let check = solver.kkt(&ca, &cz, &cl, solver.tube, omega);
            if check.viol == 0.0 && check.gap <= gap_tol {
                a = ca;
                z = cz;
                lam = cl;
                iterations = it + 1;
                done = true;
                weight_sum = 0.0;
                break;
            }
            if accepted % POLISH_EVERY == 0 && check.gap.abs() <= POLISH_GATE * check.primal.abs() {
                let (pp, pd) = polish(&solver, &a, &z, &lam, solver.tube * (1.0 - POLISH_SHRINK));
                if pp.is_some() || pd.is_some() {
                    let (pa, pzv) = pp.unwrap_or_else(|| (a.clone(), z.clone()));
                    let pl = pd.unwrap_or_else(|| lam.clone());
                    let chk = solver.kkt(&pa, &pzv, &pl, solver.tube, omega);
                    if chk.viol == 0.0 && chk.gap <= gap_tol {
                        a = pa;
                        z = pzv;
                        lam = pl;
                        iterations = it + 1;
                        done = true;
                        weight_sum = 0.0;
                        break;
                    }
                }
            }
            let restart = ce <= 0.2 * last_restart
                || (ce <= 0.8 * last_restart && ce > prev_candidate)
                || since as f64 >= 0.36 * accepted as f64;
            if restart {
                let dp = (dist2(&ca, &ra) + dist2(&cz, &rz)).sqrt();
                let dd = dist2(&cl, &rl).sqrt();
                if dp > 1e-10 && dd > 1e-10 {
                    omega = (0.5 * (dd / dp).ln() + 0.5 * omega.ln()).exp();
                }
                a = ca;
                z = cz;
                lam = cl;
                solver.k.forward(&a, &z, &mut kx);
                bt = solver.k.adjoint(&lam, &mut at);
                ra.clone_from(&a);
                rz.clone_from(&z);
                rl.clone_from(&lam);
                sa.iter_mut().for_each(|v| *v = 0.0);
                sz.iter_mut().for_each(|v| *v = 0.0);
                sl.iter_mut().for_each(|v| *v = 0.0);
                weight_sum = 0.0;
                segment_eta = 0.0;
                since = 0;
                last_restart = ce;
                eta_cap *= 2.0;
                prev_candidate = f64::INFINITY;
            } else {
                prev_candidate = ce;
            }
        }
    }
    if !done && weight_sum > 0.0 {
        let inv_c = 1.0 / weight_sum;
        let (ma, mz, ml) = (scaled(&sa, inv_c), scaled(&sz, inv_c), scaled(&sl, inv_c));
        if solver.kkt(&ma, &mz, &ml, solver.tube, omega).err < solver.kkt(&a, &z, &lam, solver.tube, omega).err {
            a = ma;
            z = mz;
            lam = ml;
        }
    }
    let fin = solver.kkt(&a, &z, &lam, solver.tube, 1.0);

    // Back to original units.
    let mut atoms = Vec::new();
    for (i, ai) in a.iter().enumerate() {
        if *ai != 0.0 {
            let (k, j) = (i / grid.j, i % grid.j);
            atoms.push(MeasureAtom { w: grid.direction(k).to_vec(), b: grid.offset(j), weight: ai / cs[i] });
        }
    }
    let measure = AtomicMeasure { atoms };
    let zs: Vec<f64> = z.iter().zip(&free.scale).map(|(z, s)| z / s).collect();
    let (v, c) = match (p.use_linear_unit, p.origin_value) {
        (true, None) => (vec![zs[0], zs[1]], zs[2]),
        (true, Some(c0)) => (vec![zs[0], zs[1]], c0),
        (false, None) => (vec![0.0, 0.0], zs[0]),
        (false, Some(c0)) => (vec![0.0, 0.0], c0),
    };
    let mut result = FitResult {
        norm: measure.total_variation(),
        measure,
        v,
        c,
        dual_objective: fin.dual,
        residual_max: 0.0,
        duality_gap: fin.gap,
        iterations,
        converged: false,
        b_max: grid.b_max,
    };
    let mut pred = vec![0.0; n];
    let wa: Vec<f64> = a.iter().zip(&cs).map(|(a, s)| a / s).collect();
    op.apply(&wa, &mut pred);
    result.residual_max = p
        .samples
        .x
        .iter()
        .zip(&pred)
        .zip(&p.samples.y)
        .map(|((x, pr), y)| (pr + dot(&result.v, x) + result.c - y).abs())
        .fold(0.0, f64::max);
    result.converged = done && result.residual_max <= solver.tube && fin.gap <= gap_tol;
    debug_assert!((fin.primal - result.norm).abs() <= 1e-9 * (1.0 + result.norm));
    Ok(result)
}

fn axpy(acc: &mut [f64], s: f64, x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += s * b);
}

fn scaled(x: &[f64], s: f64) -> Vec<f64> {
    x.iter().map(|v| v * s).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub level: usize,
    pub samples: usize,
    pub k: usize,
    pub j: usize,
    pub norm: f64,
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    /// Relative change of the norm from each level to the next.
    pub fn growth(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].norm / w[0].norm - 1.0).collect()
    }

    /// CSV with header `K,J,norm,gap`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["K", "J", "norm", "gap"])?;
        for r in &self.rows {
            wr.write_record(&[r.k.to_string(), r.j.to_string(), r.norm.to_string(), r.gap.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn row(level: usize, p: &FitProblem) -> Result<RefinementRow> {
    let r = min_norm_fit(p)?;
    Ok(RefinementRow {
        level,
        samples: p.samples.len(),
        k: p.k,
        j: p.j,
        norm: r.norm,
        gap: r.duality_gap,
        converged: r.converged,
        iterations: r.iterations,
    })
}

/// Refits the same samples with `K` doubled and the offset spacing halved at each level.
pub fn refinement_study(p: &FitProblem, levels: usize) -> Result<RefinementTable> {
    if levels < 2 {
        return Err(Error::Invalid("refinement needs at least two levels".into()));
    }
    let mut q = p.clone();
    let mut rows = Vec::new();
    for level in 0..=levels {
        rows.push(row(level, &q)?);
        q.k *= 2;
        q.j = 2 * (q.j - 1) + 1;
    }
    Ok(RefinementTable { rows })
}

/// Schedule for a study in which the sample set grows with the dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledRefinement {
    /// Samples at level 0; multiplied by 4 per level, nested.
    pub n0: usize,
    /// Angles at level 0; doubled per level, with `J = K + 1` offsets.
    pub k0: usize,
    /// Samples are uniform in `[−half_width, half_width]²`.
    pub half_width: f64,
    pub tol: f64,
    pub levels: usize,
    pub use_linear_unit: bool,
    pub max_iter: usize,
    pub seed: u64,
}

impl SampledRefinement {
    pub fn new(n0: usize, k0: usize, half_width: f64, tol: f64, levels: usize) -> Self {
        SampledRefinement { n0, k0, half_width, tol, levels, use_linear_unit: true, max_iter: DEFAULT_MAX_ITER, seed: 0 }
    }
}

/// Refinement in which the samples fill in as the dictionary refines, so that the
/// fitted norm tracks the cost of the function rather than of a fixed point set.
pub fn refinement_study_sampled(f: &dyn Fn(&[f64]) -> f64, cfg: &SampledRefinement) -> Result<RefinementTable> {
    if cfg.levels < 2 {
        return Err(Error::Invalid("refinement needs at least two levels".into()));
    }
    if cfg.n0 == 0 || cfg.k0 == 0 {
        return Err(Error::Invalid("empty level-0 configuration".into()));
    }
    let total = cfg.n0 * 4usize.pow(cfg.levels as u32);
    let pts = box_points(total, cfg.half_width, cfg.seed);
    let mut rows = Vec::new();
    for level in 0..=cfg.levels {
        let n = cfg.n0 * 4usize.pow(level as u32);
        let k = cfg.k0 << level;
        let samples = Samples::from_fn(pts[..n].to_vec(), f)?;
        let mut q = FitProblem::new(samples, k, k + 1, cfg.tol);
        q.use_linear_unit = cfg.use_linear_unit;
        q.max_iter = cfg.max_iter;
        q.seed = cfg.seed;
        rows.push(row(level, &q)?);
    }
    Ok(RefinementTable { rows })
}
