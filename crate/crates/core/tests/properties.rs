use proptest::prelude::*;

use rnorm_core::poly::{q_frac, q_int, q_to_f64};
use rnorm_core::radon::Parity;
use rnorm_core::spectral::Segment;
use rnorm_core::{
    grid_radon_2d_with_range, offset_power_derivative, profile_l1, pw_derivative, pw_derivative_n,
    pwl_infinite_certificate, rnorm_finite_net, rnorm_radial_odd, AtomicMeasure, FiniteReluNet, GridFunction2D,
    GridSpec, MeasureAtom, NormValue, PiecewisePolynomial, Poly, PwlCurvatureMeasure2D, RadialFunction, RayClass,
    ReluUnit, Sinogram, Q,
};

fn value(v: &NormValue) -> f64 {
    v.finite().expect("finite norm")
}

fn unit(theta: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin()]
}

fn net_strategy() -> impl Strategy<Value = FiniteReluNet> {
    (
        prop::collection::vec((-3.0..3.0f64, 0.0..std::f64::consts::TAU, -2.0..2.0f64), 1..5),
        -2.0..2.0f64,
        -2.0..2.0f64,
        -1.0..1.0f64,
    )
        .prop_map(|(units, v1, v2, c)| {
            let units = units.into_iter().map(|(a, t, b)| ReluUnit { a, w: unit(t), b }).collect();
            FiniteReluNet::new(2, units, vec![v1, v2], c).unwrap()
        })
}

fn combine(f: &FiniteReluNet, g: &FiniteReluNet) -> FiniteReluNet {
    let units = f.units().iter().chain(g.units()).cloned().collect();
    let v = f.v().iter().zip(g.v()).map(|(a, b)| a + b).collect();
    FiniteReluNet::new(2, units, v, f.c() + g.c()).unwrap()
}

fn scaled(f: &FiniteReluNet, s: f64) -> FiniteReluNet {
    let units = f.units().iter().map(|u| ReluUnit { a: s * u.a, ..u.clone() }).collect();
    FiniteReluNet::new(2, units, f.v().iter().map(|v| s * v).collect(), s * f.c()).unwrap()
}

/// Piecewise polynomial, constant outside `[0, pieces]`, with small integer coefficients.
fn piecewise_strategy() -> impl Strategy<Value = PiecewisePolynomial> {
    (
        -3i64..=3,
        prop::collection::vec(prop::collection::vec(-3i64..=3, 1..4), 1..4),
        -3i64..=3,
    )
        .prop_map(|(left, inner, right)| {
            let breakpoints: Vec<Q> = (0..=inner.len() as i64).map(q_int).collect();
            let mut pieces = vec![Poly::from_i64(&[left])];
            pieces.extend(inner.iter().map(|c| Poly::from_i64(c)));
            pieces.push(Poly::from_i64(&[right]));
            PiecewisePolynomial::new(breakpoints, pieces).unwrap()
        })
}

/// Total variation from a dense partition of every piece plus the jumps between pieces.
fn sampled_variation(p: &PiecewisePolynomial, per_piece: usize) -> f64 {
    let bps: Vec<f64> = p.breakpoints().iter().map(q_to_f64).collect();
    let pieces = p.pieces();
    let mut total = 0.0;
    for (i, w) in bps.windows(2).enumerate() {
        let q = &pieces[i + 1];
        let mut prev = q.eval_f64(w[0]);
        for s in 1..=per_piece {
            let cur = q.eval_f64(w[0] + (w[1] - w[0]) * s as f64 / per_piece as f64);
            total += (cur - prev).abs();
            prev = cur;
        }
    }
    for (i, b) in bps.iter().enumerate() {
        total += (pieces[i + 1].eval_f64(*b) - pieces[i].eval_f64(*b)).abs();
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finite_net_norm_is_absolutely_homogeneous(f in net_strategy(), s in -4.0..4.0f64) {
        let a = value(&rnorm_finite_net(&f).value);
        let b = value(&rnorm_finite_net(&scaled(&f, s)).value);
        prop_assert!((b - s.abs() * a).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn finite_net_norm_satisfies_triangle_inequality(f in net_strategy(), g in net_strategy()) {
        let nf = value(&rnorm_finite_net(&f).value);
        let ng = value(&rnorm_finite_net(&g).value);
        let nfg = value(&rnorm_finite_net(&combine(&f, &g)).value);
        prop_assert!(nfg <= nf + ng + 1e-12);
    }

    #[test]
    fn affine_nets_have_zero_norm(t in 0.0..std::f64::consts::TAU, b in -2.0..2.0f64, a in -3.0..3.0f64) {
        // a[wᵀx − b]₊ − a[−wᵀx + b]₊ = a(wᵀx − b)
        let w = unit(t);
        let units = vec![
            ReluUnit { a, w: w.clone(), b },
            ReluUnit { a: -a, w: w.iter().map(|x| -x).collect(), b: -b },
        ];
        let net = FiniteReluNet::new(2, units, vec![0.3, -0.1], 0.2).unwrap();
        prop_assert!(value(&rnorm_finite_net(&net).value) <= 1e-12);
        for x in [[0.3, -1.2], [2.0, 0.5]] {
            let affine = a * (w[0] * x[0] + w[1] * x[1] - b) + 0.3 * x[0] - 0.1 * x[1] + 0.2;
            prop_assert!((net.eval(&x) - affine).abs() <= 1e-12);
        }
    }

    #[test]
    fn net_evaluation_is_exact_sum(f in net_strategy(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let direct: f64 = f.units().iter().map(|u| u.a * (u.w[0] * x + u.w[1] * y - u.b).max(0.0)).sum::<f64>()
            + f.v()[0] * x + f.v()[1] * y + f.c();
        prop_assert!((f.eval(&[x, y]) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn measure_total_variation_and_even_part(atoms in prop::collection::vec(
        (0.0..std::f64::consts::TAU, -2.0..2.0f64, -3.0..3.0f64), 0..6)
    ) {
        let atoms: Vec<MeasureAtom> = atoms.into_iter().map(|(t, b, weight)| MeasureAtom { w: unit(t), b, weight }).collect();
        let m = AtomicMeasure::new(atoms).unwrap();
        let tv: f64 = m.atoms().iter().map(|a| a.weight.abs()).sum();
        prop_assert_eq!(m.total_variation(), tv);
        let e = m.even_part();
        prop_assert!(e.total_variation() <= m.total_variation() + 1e-12);
        for x in [[0.7, -0.4], [-1.5, 2.0]] {
            prop_assert!((e.eval(&x) - e.even_part().eval(&x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_variation_is_nonnegative_and_vanishes_only_on_constants(p in piecewise_strategy()) {
        let l1 = value(&profile_l1(&pw_derivative(&p)));
        prop_assert!(l1 >= 0.0);
        let constant = p.pieces().iter().all(|q| q.degree().unwrap_or(0) == 0)
            && p.pieces().windows(2).all(|w| w[0] == w[1]);
        prop_assert_eq!(l1 == 0.0, constant);
    }

    #[test]
    fn derivative_variation_matches_dense_partition(p in piecewise_strategy()) {
        let l1 = value(&profile_l1(&pw_derivative(&p)));
        let oracle = sampled_variation(&p, 1_000_000);
        prop_assert!((l1 - oracle).abs() <= 1e-9 * (1.0 + l1), "{} vs {}", l1, oracle);
    }

    #[test]
    fn ridge_profiles_are_never_certified(
        x0 in -1.0..1.0f64, len in 0.1..2.0f64, c in 0.5..3.0f64, t in 0.05..1.5f64,
    ) {
        // parallel vertical segments: every boundary normal is (±1, 0)
        let segs = vec![
            Segment { p0: [x0, -len], p1: [x0, len], coeff: c },
            Segment { p0: [x0 + 0.5, -len], p1: [x0 + 0.5, len], coeff: -c },
        ];
        let mu = PwlCurvatureMeasure2D::new(segs).unwrap();
        let sigmas: Vec<f64> = (1..=100).map(|i| 2.0 * i as f64).collect();
        let w = [t.cos(), t.sin()];
        let cert = pwl_infinite_certificate(&mu, &[w], &sigmas).unwrap();
        prop_assert_eq!(cert.directions[0].class, RayClass::Decaying);
        prop_assert!(!cert.infinite);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn radon_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, cx in -1.0..1.0f64, cy in -1.0..1.0f64) {
        let spec = GridSpec::covering(48, 6.0).unwrap();
        let f = GridFunction2D::from_fn(spec, |x, y| (-(x * x + y * y)).exp());
        let g = GridFunction2D::from_fn(spec, |x, y| (-((x - cx).powi(2) + 2.0 * (y - cy).powi(2))).exp());
        let fg = f.zip_with(&g, |u, v| a * u + b * v).unwrap();
        let range = 1.05 * spec.half_diagonal();
        let rf = grid_radon_2d_with_range(&f, 32, 64, range).unwrap();
        let rg = grid_radon_2d_with_range(&g, 32, 64, range).unwrap();
        let rfg = grid_radon_2d_with_range(&fg, 32, 64, range).unwrap();
        let scale = rfg.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for ((x, y), z) in rf.values().iter().zip(rg.values()).zip(rfg.values()) {
            prop_assert!((a * x + b * y - z).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn offset_multipliers_compose(o1 in 1u32..4, o2 in 1u32..4, width in 0.5..2.0f64) {
        let s = Sinogram::from_fn(4, 129, 8.0, Parity::Even, |t, b| (1.0 + t) * (-b * b / (2.0 * width * width)).exp()).unwrap();
        let two = offset_power_derivative(&offset_power_derivative(&s, o1).unwrap(), o2).unwrap();
        let one = offset_power_derivative(&s, o1 + o2).unwrap();
        let scale = one.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in two.values().iter().zip(one.values()) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn bump_derivative_orders() {
    for k in 1..=6u32 {
        let p = PiecewisePolynomial::compact(vec![q_int(-1), q_int(1)], vec![Poly::from_i64(&[1, 0, -1]).pow(k)]).unwrap();
        let k = k as usize;
        assert!(pw_derivative_n(&p, k).atoms().is_empty(), "k={k}");
        let first = pw_derivative_n(&p, k + 1);
        assert!(!first.atoms().is_empty() && first.atom_derivative_order() == 0, "k={k}");
        assert!(pw_derivative_n(&p, k + 2).atom_derivative_order() >= 1, "k={k}");
    }
}

#[test]
fn radial_dilation_is_exact() {
    let f = RadialFunction::bump_power(3, 2).unwrap();
    let base = value(&rnorm_radial_odd(&f).unwrap().value);
    for (n, d) in [(1, 4), (1, 2), (2, 1), (4, 1)] {
        let eps = n as f64 / d as f64;
        let v = value(&rnorm_radial_odd(&f.dilate(&q_frac(n, d)).unwrap()).unwrap().value);
        assert!((v - base / eps).abs() <= 1e-12 * base / eps, "eps {eps}: {v}");
    }
}

#[test]
fn radial_homogeneity() {
    let g = Poly::from_i64(&[1, 0, -1]).pow(3);
    let base = RadialFunction::polynomial(5, PiecewisePolynomial::compact(vec![q_int(0), q_int(1)], vec![g.clone()]).unwrap()).unwrap();
    let tripled = RadialFunction::polynomial(
        5,
        PiecewisePolynomial::compact(vec![q_int(0), q_int(1)], vec![g.scale(&q_frac(-3, 1))]).unwrap(),
    )
    .unwrap();
    let a = value(&rnorm_radial_odd(&base).unwrap().value);
    let b = value(&rnorm_radial_odd(&tripled).unwrap().value);
    assert!((b - 3.0 * a).abs() <= 1e-12 * b);
}
