use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use std::f64::consts::PI;

/// Exact LP for `min ‖α‖₁` subject to `|Σ α_kj φ_kj(x_n) + vᵀx_n + c − y_n| ≤ τ`,
/// with `φ_kj(x) = [w_kᵀx − b_j]₊ − [−b_j]₊`, `w_k` at angle `2πk/K` and `b_j` uniform on `[−B, B]`.
pub fn lp_min_norm(x: &[[f64; 2]], y: &[f64], k: usize, j: usize, b_max: f64, tol: f64, linear_unit: bool) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut cols = Vec::with_capacity(k * j);
    for kk in 0..k {
        let t = 2.0 * PI * kk as f64 / k as f64;
        let w = [t.cos(), t.sin()];
        for jj in 0..j {
            let b = -b_max + 2.0 * b_max * jj as f64 / (j - 1) as f64;
            let feat: Vec<f64> = x.iter().map(|p| (w[0] * p[0] + w[1] * p[1] - b).max(0.0) - (-b).max(0.0)).collect();
            if feat.iter().all(|v| *v == 0.0) {
                continue;
            }
            let pos = lp.add_var(1.0, (0.0, f64::INFINITY));
            let neg = lp.add_var(1.0, (0.0, f64::INFINITY));
            cols.push((pos, neg, feat));
        }
    }
    let free = f64::NEG_INFINITY..f64::INFINITY;
    let lin = if linear_unit {
        Some([lp.add_var(0.0, (free.start, free.end)), lp.add_var(0.0, (free.start, free.end))])
    } else {
        None
    };
    let c = lp.add_var(0.0, (free.start, free.end));
    for (n, p) in x.iter().enumerate() {
        let mut e = LinearExpr::empty();
        for (pos, neg, feat) in &cols {
            if feat[n] != 0.0 {
                e.add(*pos, feat[n]);
                e.add(*neg, -feat[n]);
            }
        }
        if let Some(v) = lin {
            e.add(v[0], p[0]);
            e.add(v[1], p[1]);
        }
        e.add(c, 1.0);
        lp.add_constraint(e.clone(), ComparisonOp::Le, y[n] + tol);
        lp.add_constraint(e, ComparisonOp::Ge, y[n] - tol);
    }
    let out = lp.solve().expect("LP solves");
    out.solution().expect("LP has a solution").objective()
}
