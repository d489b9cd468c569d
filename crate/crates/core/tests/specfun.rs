//! Special functions against independent oracles: power series, integral representations,
//! analytic identities.

use helmnorm::specfun::{bessel_j, bessel_j_orders, bessel_y, bessel_y_orders, hankel1};
use std::f64::consts::PI;

/// Power series for J_n; only trusted for small x where cancellation is mild.
fn series_j(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200 {
        term *= -(x * x / 4.0) / (f64::from(m) * f64::from(m + n));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Fixed composite 5-point Gauss–Legendre on `panels` equal panels.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.5384693101056831,
        -0.5384693101056831,
        0.906179845938664,
        -0.906179845938664,
    ];
    const W: [f64; 5] = [
        0.5688888888888889,
        0.47862867049936647,
        0.47862867049936647,
        0.23692688505618908,
        0.23692688505618908,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let m = a + (p as f64 + 0.5) * h;
            0.5 * h
                * X.iter()
                    .zip(W)
                    .map(|(x, w)| w * f(m + 0.5 * h * x))
                    .sum::<f64>()
        })
        .sum()
}

/// Y_n(x) = (1/π)∫₀^π sin(x sinθ − nθ)dθ − (1/π)∫₀^∞ (e^{nt} + (−1)ⁿe^{−nt}) e^{−x sinh t} dt.
fn integral_y(n: u32, x: f64) -> f64 {
    let nf = f64::from(n);
    let a = integrate(&|t| (x * t.sin() - nf * t).sin(), 0.0, PI, 4000);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let b = integrate(
        &|t| ((nf * t).exp() + sign * (-nf * t).exp()) * (-x * t.sinh()).exp(),
        0.0,
        20.0,
        8000,
    );
    (a - b) / PI
}

#[test]
fn first_zero_of_j0_by_series_bisection() {
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if series_j(0, lo) * series_j(0, mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let zero = 0.5 * (lo + hi);
    assert!((zero - 2.404825557695773).abs() < 1e-14);
    assert!(bessel_j(0, 2.404825557695773_f64).unwrap().abs() < 1e-10);
}

#[test]
fn series_agrees_for_small_arguments() {
    for n in [0u32, 1, 2, 5, 9] {
        for x in [0.01, 0.3, 1.0, 2.2, 4.0] {
            let a = bessel_j(n, x).unwrap();
            let b = series_j(n, x);
            assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()), "J_{n}({x})");
        }
    }
}

#[test]
fn y_matches_integral_representation() {
    for n in [0u32, 1] {
        for x in [1.0, 10.0, 100.0] {
            let a = bessel_y(n, x).unwrap();
            let b = integral_y(n, x);
            assert!((a - b).abs() < 1e-9, "Y_{n}({x}) = {a} vs quadrature {b}");
        }
    }
}

#[test]
fn hankel_zero_at_one_matches_reference() {
    // 50-digit series reference: J0(1) = 0.765197686557966551449717526103,
    // Y0(1) = 0.0882569642156769579829267660235.
    let h = hankel1(0, 1.0_f64).unwrap();
    assert!((h.re - 0.765_197_686_557_966_6).abs() < 1e-12);
    assert!((h.im - 0.088_256_964_215_676_96).abs() < 1e-12);
}

#[test]
fn hankel_modulus_asymptote() {
    let x = 1.0e4_f64;
    let h = hankel1(0, x).unwrap();
    assert!((h.norm() * (PI * x / 2.0).sqrt() - 1.0).abs() < 1e-4);
    let prod = h * h.conj();
    assert_eq!(prod.im, 0.0);
}

#[test]
fn wronskian_on_log_grid() {
    let mut worst = 0.0_f64;
    for i in 0..=24 {
        let x = 10f64.powf(-3.0 + 6.0 * f64::from(i) / 24.0);
        let js = bessel_j_orders(201, x).unwrap();
        let ys = bessel_y_orders(201, x).unwrap();
        for n in 0..=200usize {
            let w = js[n + 1].mul_value(ys[n]) - js[n].mul_value(ys[n + 1]);
            let want = 2.0 / (PI * x);
            worst = worst.max((w - want).abs() / want);
        }
    }
    assert!(worst < 1e-10, "worst Wronskian residual {worst:e}");
}

#[test]
fn upward_recurrence_residual_in_stable_regime() {
    for x in [5.0_f64, 37.0, 120.0, 900.0] {
        let js = bessel_j_orders(x as u32, x).unwrap();
        for n in 1..(x as usize).saturating_sub(1) {
            let (a, b, c) = (js[n - 1].value(), js[n].value(), js[n + 1].value());
            let resid = (c - 2.0 * n as f64 / x * b + a).abs();
            let scale = a.abs().max(b.abs()).max(c.abs());
            assert!(resid <= 1e-9 * scale + 1e-300, "x={x} n={n}");
        }
    }
}
