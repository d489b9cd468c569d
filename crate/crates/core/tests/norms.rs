use helmnorm::assembly::*;
use helmnorm::geometry::*;
use helmnorm::kernels::{dlp_kernel, phi, KernelPoint};
use helmnorm::linalg::CMat;
use helmnorm::norms::*;
use helmnorm::quadrature::gauss_on;
use helmnorm::{Error, C};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

const J0_ZERO: f64 = 2.404825557695773;

fn custom(disc: &Discretization<f64>, matrix: CMat<f64>) -> DenseOperator<f64> {
    DenseOperator {
        matrix,
        kind: OperatorKind::Custom,
        k: disc.k,
        eta: None,
        discretization: disc.id,
        gradient: None,
    }
}

fn random_matrix(n: usize, seed: u64) -> CMat<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n)
        .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    CMat {
        rows: n,
        cols: n,
        data,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Mode-n eigenvalue of a unit-circle operator with kernel `kern(x, y, n(y))` by direct quadrature of
/// `∫ K(x, y(φ)) e^{inφ} dφ`, graded geometrically toward the singular point φ = 0.
/// The circle is centred at (0, −1) with x at the origin so x − y carries no cancellation.
fn circle_mode_quadrature(n: i64, kern: impl Fn([f64; 2], [f64; 2], [f64; 2]) -> C<f64>) -> C<f64> {
    let mut acc = C::new(0.0, 0.0);
    let mut add = |a: f64, b: f64| {
        let pieces = ((b - a) / 0.05).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let lo = a + (b - a) * p as f64 / pieces as f64;
            let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
            let (x, w) = gauss_on(20, lo, hi);
            for (phi_, w) in x.into_iter().zip(w) {
                // Both signs of φ, so the integral over (−π, π].
                for s in [1.0, -1.0] {
                    let half = (phi_ / 2.0).sin();
                    let y = [(s * phi_).sin(), -2.0 * half * half];
                    let normal = [(s * phi_).sin(), phi_.cos()];
                    let e = C::new(0.0, s * n as f64 * phi_).exp();
                    acc += kern([0.0, 0.0], y, normal) * e * w;
                }
            }
        }
    };
    let mut b = PI;
    for _ in 0..80 {
        add(b / 2.0, b);
        b /= 2.0;
    }
    acc
}

fn s_mode(n: i64, k: f64) -> C<f64> {
    circle_mode_quadrature(n, |x, y, _| phi(&KernelPoint::planar(x, y, k)).unwrap())
}

fn d_mode(n: i64, k: f64) -> C<f64> {
    circle_mode_quadrature(n, |x, y, ny| {
        dlp_kernel(&KernelPoint::planar(x, y, k).with_normal_y([ny[0], ny[1], 0.0])).unwrap()
    })
}

#[test]
fn identity_has_unit_norm() {
    for g in [
        make_circle(1.0_f64).unwrap(),
        make_ellipse(2.0_f64, 0.6).unwrap(),
        make_square(1.0_f64).unwrap(),
    ] {
        let disc = discretize(&g, 2.0, 96).unwrap();
        let id = custom(&disc, CMat::identity(disc.len()));
        let r = operator_norm(&id, &disc, NormSpec::l2_l2()).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-12, "{}: {}", g.name, r.norm);
        assert!(r.converged);
        let want = if disc.len() <= 256 {
            Method::DenseSvd
        } else {
            Method::Lanczos
        };
        assert_eq!(r.method, want);
    }
}

#[test]
fn fourier_multiplier_norm() {
    // a_n = 1/(1+n²) in L²→H¹ has norm sup √(1+n²)/(1+n²) = 1 at n = 0.
    let g = make_circle(1.0_f64).unwrap();
    let disc = discretize(&g, 1.0, 64).unwrap();
    let n = disc.len();
    let m = CMat::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        for q in 0..n {
            let mode = if q <= n / 2 {
                q as f64
            } else {
                q as f64 - n as f64
            };
            v += (mode * 2.0 * PI * (i as f64 - j as f64) / n as f64).cos() / (1.0 + mode * mode);
        }
        C::new(v / n as f64, 0.0)
    });
    let op = custom(&disc, m);
    let r = operator_norm(&op, &disc, NormSpec::l2_h1()).unwrap();
    assert!((r.norm - 1.0).abs() < 1e-12, "{}", r.norm);
    let r = operator_norm(&op, &disc, NormSpec::l2_l2()).unwrap();
    assert!((r.norm - 1.0).abs() < 1e-12, "{}", r.norm);
}

#[test]
fn iterative_methods_match_dense() {
    // Weighted inner products on both sides: the ellipse has non-uniform mass.
    let disc = discretize(&make_ellipse(1.5_f64, 0.5).unwrap(), 1.0, 200).unwrap();
    let op = custom(&disc, random_matrix(200, 3));
    let dense = operator_norm(&op, &disc, NormSpec::l2_l2()).unwrap();
    assert_eq!(dense.method, Method::DenseSvd);
    for method in [Method::PowerIteration, Method::Lanczos] {
        let opts = NormOptions {
            method: Some(method),
            ..NormOptions::default()
        };
        let r = operator_norm_with(&op, &disc, NormSpec::l2_l2(), &opts).unwrap();
        assert!(r.converged, "{method}: {r:?}");
        assert!(r.residual <= 1e-10 || method == Method::PowerIteration);
        assert!(
            rel(r.norm, dense.norm) < 1e-9,
            "{method}: {} vs {}",
            r.norm,
            dense.norm
        );
    }
    // And on an assembled operator with the H¹_k target.
    let (disc, s) = assemble(&make_kite::<f64>().unwrap(), 8.0, 160, OperatorKind::S).unwrap();
    let dense = operator_norm(&s, &disc, NormSpec::l2_h1k()).unwrap();
    for method in [Method::PowerIteration, Method::Lanczos] {
        let opts = NormOptions {
            method: Some(method),
            ..NormOptions::default()
        };
        let r = operator_norm_with(&s, &disc, NormSpec::l2_h1k(), &opts).unwrap();
        assert!(r.converged);
        assert!(
            rel(r.norm, dense.norm) < 1e-9,
            "{method}: {} vs {}",
            r.norm,
            dense.norm
        );
    }
}

#[test]
fn power_iteration_flags_non_convergence() {
    let disc = discretize(&make_circle(1.0_f64).unwrap(), 1.0, 100).unwrap();
    let op = custom(&disc, random_matrix(100, 5));
    let opts = NormOptions {
        method: Some(Method::PowerIteration),
        max_iter: 3,
        ..NormOptions::default()
    };
    let r = operator_norm_with(&op, &disc, NormSpec::l2_l2(), &opts).unwrap();
    assert!(!r.converged);
    assert!(r.norm > 0.0);
}

#[test]
fn h1k_norm_closed_forms() {
    let disc = discretize(&make_circle(1.0_f64).unwrap(), 1.0, 64).unwrap();
    let c = C::new(0.3, -1.2);
    let v = vec![c; disc.len()];
    assert!((h1k_norm(&v, &disc).unwrap() - c.norm() * (2.0 * PI).sqrt()).abs() < 1e-12);
    let v: Vec<C<f64>> = disc
        .nodes
        .iter()
        .map(|nd| C::new(0.0, 2.0 * PI * nd.t).exp())
        .collect();
    assert!((h1k_norm(&v, &disc).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-10);
    assert!(matches!(h1k_norm(&v[1..], &disc), Err(Error::Argument(_))));
}

proptest! {
    #[test]
    fn h1k_dominates_l2(seed in 0u64..1000, gi in 0usize..3) {
        let g = [make_circle(1.0_f64).unwrap(), make_kite::<f64>().unwrap(), make_square(1.0_f64).unwrap()];
        let disc = discretize(&g[gi], 3.0, 64).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C<f64>> = (0..disc.len()).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        prop_assert!(h1k_norm(&v, &disc).unwrap() >= l2_norm(&v, &disc).unwrap());
    }
}

#[test]
fn symbols_match_kernel_quadrature() {
    for k in [1.3, 7.0, 20.0] {
        let s = circle_symbols(OperatorKind::S, 40, k, 1.0).unwrap();
        let d = circle_symbols(OperatorKind::D, 40, k, 1.0).unwrap();
        let dp = circle_symbols(OperatorKind::Dprime, 40, k, 1.0).unwrap();
        for n in [0usize, 1, 2, 5, 13, 20, 27, 40] {
            let qs = s_mode(n as i64, k);
            let qd = d_mode(n as i64, k);
            assert!(
                (s[n] - qs).norm() < 1e-11 * (1.0 + qs.norm()),
                "S k={k} n={n}: {} vs {qs}",
                s[n]
            );
            assert!(
                (d[n] - qd).norm() < 1e-11 * (1.0 + qd.norm()),
                "D k={k} n={n}: {} vs {qd}",
                d[n]
            );
            assert_eq!(d[n], dp[n]);
        }
    }
}

#[test]
fn symbol_parity_and_zero() {
    for n in 0..30 {
        let a = circle_symbol(OperatorKind::S, n, 9.5, 1.0).unwrap();
        let b = circle_symbol(OperatorKind::S, -n, 9.5, 1.0).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(b.n, -n);
    }
    let s0 = circle_symbol(OperatorKind::S, 0, J0_ZERO, 1.0)
        .unwrap()
        .value;
    let q = s_mode(0, J0_ZERO);
    assert!((s0 - q).norm() < 1e-8, "{s0} vs {q}");
    assert!(s0.norm() < 1e-8);
}

#[test]
fn combined_symbol_algebra() {
    let (k, eta) = (12.0, 12.0);
    let a = circle_symbols(OperatorKind::ADirect, 50, k, eta).unwrap();
    let s = circle_symbols(OperatorKind::S, 50, k, eta).unwrap();
    let dp = circle_symbols(OperatorKind::Dprime, 50, k, eta).unwrap();
    for n in 0..=50 {
        let want = C::new(0.5, 0.0) + dp[n] - C::new(0.0, eta) * s[n];
        assert!((a[n] - want).norm() <= 1e-15 * want.norm());
    }
}

#[test]
fn oracle_truncation_rule() {
    let k = 20.0;
    let need = oracle_n_max(k);
    assert_eq!(need, 20 + 28 + 100);
    assert!(matches!(
        oracle_norm(OperatorKind::S, k, NormSpec::l2_l2(), need - 1, k),
        Err(Error::Argument(_))
    ));
    // ½I does not map L² to H¹, so the combined operator only has a bounded L²→L² norm.
    assert!(matches!(
        oracle_norm(OperatorKind::ADirect, k, NormSpec::l2_h1k(), need, k),
        Err(Error::Argument(_))
    ));
    for (kind, spec) in [
        (OperatorKind::S, NormSpec::l2_l2()),
        (OperatorKind::S, NormSpec::l2_h1k()),
        (OperatorKind::S, NormSpec::l2_h1()),
        (OperatorKind::D, NormSpec::l2_h1k()),
        (OperatorKind::ADirect, NormSpec::l2_l2()),
    ] {
        {
            let a = oracle_norm(kind, k, spec, need, k).unwrap();
            let b = oracle_norm(kind, k, spec, need * 3 / 2, k).unwrap();
            assert!(rel(b.norm, a.norm) < 1e-12, "{kind} {spec}");
            assert_eq!(a.method, Method::FourierOracle);
        }
    }
}

#[test]
fn oracle_weight_ordering() {
    for k in [3.0, 20.0, 75.0] {
        let n = oracle_n_max(k);
        for kind in [OperatorKind::S, OperatorKind::D, OperatorKind::Dprime] {
            let l2 = oracle_norm(kind, k, NormSpec::l2_l2(), n, k).unwrap().norm;
            let h1k = oracle_norm(kind, k, NormSpec::l2_h1k(), n, k).unwrap().norm;
            let h1 = oracle_norm(kind, k, NormSpec::l2_h1(), n, k).unwrap().norm;
            assert!(l2 <= h1k && h1 <= k * h1k * (1.0 + 1e-15), "{kind} k={k}");
        }
    }
}

#[test]
fn oracle_matches_assembly_at_k20() {
    let g = make_circle(1.0_f64).unwrap();
    let k = 20.0;
    let (disc, s) = assemble(&g, k, 200, OperatorKind::S).unwrap();
    let n = oracle_n_max(k);
    for spec in [
        NormSpec::l2_l2(),
        NormSpec::l2_h1k(),
        NormSpec::trace_pair(0.0),
        NormSpec::trace_pair(0.5),
    ] {
        let a = operator_norm(&s, &disc, spec).unwrap().norm;
        let o = oracle_norm(OperatorKind::S, k, spec, n, k).unwrap().norm;
        assert!(rel(a, o) < 1e-8, "{spec}: {a} vs {o}");
    }
    let a = operator_norm(
        &assemble_on(&disc, OperatorKind::ADirect).unwrap(),
        &disc,
        NormSpec::l2_l2(),
    )
    .unwrap();
    let o = oracle_norm(OperatorKind::ADirect, k, NormSpec::l2_l2(), n, k).unwrap();
    assert!(rel(a.norm, o.norm) < 1e-8);
}

#[test]
fn panel_norms_on_split_circle() {
    // Panels on the unit circle cut into two arcs. The H¹_k value carries a small excess from
    // node-scale grid functions that jump between panels.
    let arc = |a: f64, b: f64| {
        BoundaryPiece::new(Shape::Arc {
            center: [0.0, 0.0],
            radius: 1.0,
            theta0: a,
            theta1: b,
        })
    };
    let g =
        BoundaryGeometry::from_pieces("two-arc", vec![arc(0.0, PI), arc(PI, 2.0 * PI)]).unwrap();
    let k = 10.0;
    let (disc, s) = assemble(&g, k, 256, OperatorKind::S).unwrap();
    let n = oracle_n_max(k);
    let o = oracle_norm(OperatorKind::S, k, NormSpec::l2_l2(), n, k)
        .unwrap()
        .norm;
    assert!(rel(operator_norm(&s, &disc, NormSpec::l2_l2()).unwrap().norm, o) < 1e-9);
    let o = oracle_norm(OperatorKind::S, k, NormSpec::l2_h1k(), n, k)
        .unwrap()
        .norm;
    assert!(
        rel(
            operator_norm(&s, &disc, NormSpec::l2_h1k()).unwrap().norm,
            o
        ) < 2e-5
    );
}

#[test]
fn duality_h_minus_one_to_l2() {
    let k = 15.0;
    let n = oracle_n_max(k);
    let dual = NormSpec::new(Space::Hs(-1.0_f64), Space::L2).unwrap();
    let a = oracle_norm(OperatorKind::S, k, dual, n, k).unwrap().norm;
    let b = oracle_norm(OperatorKind::S, k, NormSpec::l2_h1(), n, k)
        .unwrap()
        .norm;
    assert!(rel(a, b) < 1e-8);
    let (disc, s) = assemble(&make_circle(1.0_f64).unwrap(), k, 160, OperatorKind::S).unwrap();
    let a = operator_norm(&s, &disc, dual).unwrap().norm;
    let b = operator_norm(&s, &disc, NormSpec::l2_h1()).unwrap().norm;
    assert!(rel(a, b) < 1e-8, "{a} vs {b}");
}

#[test]
fn assembled_norm_invariants() {
    let cases = [
        (make_circle(1.0_f64).unwrap(), OperatorKind::D),
        (make_ellipse(1.3_f64, 0.8).unwrap(), OperatorKind::Dprime),
        (make_kite::<f64>().unwrap(), OperatorKind::S),
        (make_square(1.0_f64).unwrap(), OperatorKind::S),
    ];
    for (g, kind) in cases {
        for k in [1.0, 6.0] {
            let (disc, op) = assemble(&g, k, 96, kind).unwrap();
            let l2 = operator_norm(&op, &disc, NormSpec::l2_l2()).unwrap().norm;
            let h1k = operator_norm(&op, &disc, NormSpec::l2_h1k()).unwrap().norm;
            let h1 = operator_norm(&op, &disc, NormSpec::l2_h1()).unwrap().norm;
            assert!(l2 <= h1k * (1.0 + 1e-12), "{} {kind}", g.name);
            assert!(h1 <= k * h1k * (1.0 + 1e-12), "{} {kind}", g.name);
        }
    }
}

#[test]
fn incompatible_specs_refused() {
    let (disc, s) = assemble(&make_square(1.0_f64).unwrap(), 2.0, 64, OperatorKind::S).unwrap();
    assert!(matches!(
        operator_norm(&s, &disc, NormSpec::trace_pair(0.0)),
        Err(Error::Argument(_))
    ));
    assert!(NormSpec::new(Space::H1k, Space::L2::<f64>).is_err());
    assert!(NormSpec::new(Space::L2, Space::Hs(2.0_f64)).is_err());
    let (other, _) = assemble(&make_square(1.0_f64).unwrap(), 2.0, 64, OperatorKind::S).unwrap();
    assert!(matches!(
        operator_norm(&s, &other, NormSpec::l2_l2()),
        Err(Error::Argument(_))
    ));
}

#[test]
fn spec_text_round_trip() {
    for text in ["L2->L2", "L2->H1", "L2->H1k", "Hs(-0.5)->Hs(0.5)"] {
        let spec: NormSpec<f64> = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
    }
    assert!(matches!(
        "H1->L2".parse::<NormSpec<f64>>(),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        "L2 H1".parse::<NormSpec<f64>>(),
        Err(Error::Config(_))
    ));
}
