//! Piecewise polynomials on the real line and their distributional derivatives.

use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::poly::{q_frac, q_from_f64, q_int, q_to_f64, Poly, Q};

/// Breakpoints closer than this are merged.
pub const BREAKPOINT_TOLERANCE: f64 = 1e-12;

/// `pieces[0]` lives on `(−∞, breakpoints[0])`, `pieces[i]` on
/// `[breakpoints[i−1], breakpoints[i])` and the last piece on `[breakpoints[n−1], ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<Q>,
    pieces: Vec<Poly>,
}

impl PiecewisePolynomial {
    /// Accepts either `breakpoints.len() + 1` pieces (covering the whole line) or
    /// `breakpoints.len() − 1` pieces (supported on `[first, last]`, zero outside).
    pub fn new(breakpoints: Vec<Q>, pieces: Vec<Poly>) -> Result<Self> {
        let pieces = if pieces.len() + 1 == breakpoints.len() && !breakpoints.is_empty() {
            let mut full = Vec::with_capacity(pieces.len() + 2);
            full.push(Poly::zero());
            full.extend(pieces);
            full.push(Poly::zero());
            full
        } else if pieces.len() == breakpoints.len() + 1 {
            pieces
        } else {
            return Err(Error::Invalid(format!(
                "{} breakpoints are incompatible with {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        };
        for w in breakpoints.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Invalid("breakpoints must be strictly increasing".into()));
            }
        }
        let mut p = PiecewisePolynomial { breakpoints, pieces };
        p.normalize();
        Ok(p)
    }

    /// Polynomial pieces between consecutive breakpoints, zero outside.
    pub fn compact(breakpoints: Vec<Q>, pieces: Vec<Poly>) -> Result<Self> {
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::Invalid("compact form needs one piece per interval".into()));
        }
        Self::new(breakpoints, pieces)
    }

    pub fn zero() -> Self {
        PiecewisePolynomial { breakpoints: Vec::new(), pieces: vec![Poly::zero()] }
    }

    pub fn polynomial(p: Poly) -> Self {
        PiecewisePolynomial { breakpoints: Vec::new(), pieces: vec![p] }
    }

    fn normalize(&mut self) {
        let tol = q_from_f64(BREAKPOINT_TOLERANCE).unwrap();
        let mut i = 1;
        while i < self.breakpoints.len() {
            if &self.breakpoints[i] - &self.breakpoints[i - 1] < tol {
                self.breakpoints.remove(i);
                self.pieces.remove(i);
            } else {
                i += 1;
            }
        }
        let mut i = 0;
        while i < self.breakpoints.len() {
            if self.pieces[i] == self.pieces[i + 1] {
                self.breakpoints.remove(i);
                self.pieces.remove(i);
            } else {
                i += 1;
            }
        }
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Poly::is_zero)
    }

    /// True when both unbounded pieces vanish.
    pub fn compact_support(&self) -> bool {
        self.pieces[0].is_zero() && self.pieces[self.pieces.len() - 1].is_zero()
    }

    /// Index of the piece governing `x` (right-continuous at breakpoints).
    pub fn piece_index(&self, x: &Q) -> usize {
        self.breakpoints.partition_point(|b| b <= x)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.pieces[self.piece_index(x)].eval(x)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|b| q_to_f64(b) <= x);
        self.pieces[i].eval_f64(x)
    }

    /// Classical derivative on each open piece.
    pub fn derivative_ac(&self) -> Self {
        let mut p = PiecewisePolynomial {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
        };
        p.normalize();
        p
    }

    /// `(location, right limit − left limit)` at every breakpoint with a nonzero jump.
    pub fn jumps(&self) -> Vec<(Q, Q)> {
        self.breakpoints
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                let j = self.pieces[i + 1].eval(b) - self.pieces[i].eval(b);
                (!j.is_zero()).then(|| (b.clone(), j))
            })
            .collect()
    }

    /// `x ↦ p(x/ε)` for `ε > 0`.
    pub fn dilate(&self, eps: &Q) -> Self {
        let inv = eps.recip();
        PiecewisePolynomial {
            breakpoints: self.breakpoints.iter().map(|b| b * eps).collect(),
            pieces: self.pieces.iter().map(|p| p.compose_scale(&inv)).collect(),
        }
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut p = PiecewisePolynomial {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(s)).collect(),
        };
        p.normalize();
        p
    }

    /// `x ↦ p(−x)`.
    pub fn reflect(&self) -> Self {
        let m1 = q_int(-1);
        PiecewisePolynomial {
            breakpoints: self.breakpoints.iter().rev().map(|b| -b).collect(),
            pieces: self.pieces.iter().rev().map(|p| p.compose_scale(&m1)).collect(),
        }
    }

    /// `∫ |p|` over `[lo, ∞)` (or the whole line when `lo` is `None`); `None` if unbounded.
    pub fn abs_integral_from(&self, lo: Option<&Q>) -> Option<Q> {
        let n = self.pieces.len();
        let mut total = Q::zero();
        for (i, p) in self.pieces.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let mut a = if i == 0 { None } else { Some(self.breakpoints[i - 1].clone()) };
            let b = if i + 1 == n { None } else { Some(self.breakpoints[i].clone()) };
            if let Some(lo) = lo {
                if b.as_ref().is_some_and(|b| b <= lo) {
                    continue;
                }
                if a.as_ref().is_none_or(|a| a < lo) {
                    a = Some(lo.clone());
                }
            }
            match (a, b) {
                (Some(a), Some(b)) => total += p.abs_integral(&a, &b),
                _ => return None,
            }
        }
        Some(total)
    }
}

/// A Dirac derivative `mass · δ^{(order)}(· − location)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub location: Q,
    pub mass: Q,
    pub order: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionalProfile {
    ac: PiecewisePolynomial,
    atoms: Vec<Atom>,
}

impl From<PiecewisePolynomial> for DistributionalProfile {
    fn from(ac: PiecewisePolynomial) -> Self {
        DistributionalProfile { ac, atoms: Vec::new() }
    }
}

impl DistributionalProfile {
    pub fn new(ac: PiecewisePolynomial, atoms: Vec<Atom>) -> Self {
        let mut p = DistributionalProfile { ac, atoms };
        p.merge_atoms();
        p
    }

    pub fn ac(&self) -> &PiecewisePolynomial {
        &self.ac
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Highest derivative order among the atoms; 0 for a pure measure.
    pub fn atom_derivative_order(&self) -> u32 {
        self.atoms.iter().map(|a| a.order).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.ac.is_zero() && self.atoms.is_empty()
    }

    fn merge_atoms(&mut self) {
        self.atoms.sort_by(|a, b| a.location.cmp(&b.location).then(a.order.cmp(&b.order)));
        let mut out: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for a in self.atoms.drain(..) {
            match out.last_mut() {
                Some(l) if l.location == a.location && l.order == a.order => l.mass += a.mass,
                _ => out.push(a),
            }
        }
        out.retain(|a| !a.mass.is_zero());
        self.atoms = out;
    }

    /// Distributional derivative: jumps of the ac part become atoms and every
    /// existing atom gains one derivative order.
    pub fn differentiate(&self) -> Self {
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom { location: a.location.clone(), mass: a.mass.clone(), order: a.order + 1 })
            .collect();
        atoms.extend(
            self.ac.jumps().into_iter().map(|(location, mass)| Atom { location, mass, order: 0 }),
        );
        DistributionalProfile::new(self.ac.derivative_ac(), atoms)
    }

    fn l1_exact(&self, half_line: bool) -> Option<Q> {
        if self.atom_derivative_order() > 0 {
            return None;
        }
        let zero = Q::zero();
        let mut total = self.ac.abs_integral_from(half_line.then_some(&zero))?;
        for a in &self.atoms {
            if !half_line || a.location.is_positive() {
                total += a.mass.abs();
            } else if a.location.is_zero() {
                total += a.mass.abs() * q_frac(1, 2);
            }
        }
        Some(total)
    }
}

/// A norm that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormValue {
    Finite(f64),
    Infinite,
}

impl NormValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, NormValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            NormValue::Finite(v) => Some(*v),
            NormValue::Infinite => None,
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            NormValue::Finite(v) => NormValue::Finite(f(v)),
            NormValue::Infinite => NormValue::Infinite,
        }
    }
}

impl Serialize for NormValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormValue::Finite(v) => s.serialize_f64(*v),
            NormValue::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for NormValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => Ok(NormValue::Finite(n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) if s == "infinite" => Ok(NormValue::Infinite),
            other => Err(D::Error::custom(format!("expected number or \"infinite\", got {other}"))),
        }
    }
}

pub fn pw_derivative(p: &PiecewisePolynomial) -> DistributionalProfile {
    DistributionalProfile::from(p.clone()).differentiate()
}

pub fn pw_derivative_n(p: &PiecewisePolynomial, n: usize) -> DistributionalProfile {
    let mut q = DistributionalProfile::from(p.clone());
    for _ in 0..n {
        q = q.differentiate();
    }
    q
}

/// Total variation on the whole line.
pub fn profile_l1(q: &DistributionalProfile) -> NormValue {
    match q.l1_exact(false) {
        Some(v) => NormValue::Finite(q_to_f64(&v)),
        None => NormValue::Infinite,
    }
}

/// Total variation on `[0, ∞)`; an atom sitting exactly at 0 counts half.
pub fn profile_l1_half_line(q: &DistributionalProfile) -> NormValue {
    match q.l1_exact(true) {
        Some(v) => NormValue::Finite(q_to_f64(&v)),
        None => NormValue::Infinite,
    }
}

fn q_to_json(q: &Q) -> Value {
    let f = q_to_f64(q);
    if q_from_f64(f).as_ref() == Some(q) {
        serde_json::json!(f)
    } else {
        Value::String(q.to_string())
    }
}

/// Parses a JSON number (exact binary value) or a string `"p/q"`.
pub fn q_from_json(v: &Value) -> Result<Q> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                return Ok(q_int(i));
            }
            n.as_f64()
                .and_then(q_from_f64)
                .ok_or_else(|| Error::Invalid(format!("non-finite number {n}")))
        }
        Value::String(s) => s
            .trim()
            .parse::<Q>()
            .map_err(|_| Error::Invalid(format!("cannot parse rational '{s}'"))),
        other => Err(Error::Invalid(format!("expected number, got {other}"))),
    }
}

#[derive(Serialize, Deserialize)]
struct PiecewiseJson {
    breakpoints: Vec<Value>,
    pieces: Vec<Vec<Value>>,
}

impl PiecewisePolynomial {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(PiecewiseJson {
            breakpoints: self.breakpoints.iter().map(q_to_json).collect(),
            pieces: self.pieces.iter().map(|p| p.coeffs().iter().map(q_to_json).collect()).collect(),
        })
        .expect("serializable")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let raw: PiecewiseJson = serde_json::from_value(v.clone())?;
        let breakpoints = raw.breakpoints.iter().map(q_from_json).collect::<Result<Vec<_>>>()?;
        let pieces = raw
            .pieces
            .iter()
            .map(|c| c.iter().map(q_from_json).collect::<Result<Vec<_>>>().map(Poly::from_coeffs))
            .collect::<Result<Vec<_>>>()?;
        Self::new(breakpoints, pieces)
    }
}
