//! Gauss–Legendre rules and barycentric Lagrange interpolation on them.

use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = T::lit((std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = T::zero();
    }
    (x, w)
}

/// P_n(z) and P_n'(z).
fn legendre<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for j in 2..=n {
        let jf = T::from_usize_lossy(j);
        let p2 = ((T::lit(2.0) * jf - T::one()) * z * p1 - (jf - T::one()) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    (p1, nf * (z * p1 - p0) / (z * z - T::one()))
}

/// Gauss rule mapped to [a, b].
pub fn gauss_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

/// Barycentric weights for arbitrary distinct nodes.
pub fn barycentric_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let scale = T::lit(2.0) / (nodes[n - 1] - nodes[0]).abs().max(T::min_positive_value());
    (0..n)
        .map(|j| {
            let mut p = T::one();
            for m in 0..n {
                if m != j {
                    p *= scale * (nodes[j] - nodes[m]);
                }
            }
            T::one() / p
        })
        .collect()
}

/// Values of the Lagrange basis polynomials at `x`.
pub fn lagrange_basis<T: Real>(nodes: &[T], bw: &[T], x: T) -> Vec<T> {
    let n = nodes.len();
    let mut out = vec![T::zero(); n];
    for j in 0..n {
        if x == nodes[j] {
            out[j] = T::one();
            return out;
        }
    }
    let mut denom = T::zero();
    for j in 0..n {
        let t = bw[j] / (x - nodes[j]);
        out[j] = t;
        denom += t;
    }
    for v in &mut out {
        *v /= denom;
    }
    out
}

/// Differentiation matrix D with (D f)_i = p'(x_i) for the interpolant p of f, row-major.
pub fn diff_matrix<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let bw = barycentric_weights(nodes);
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        let mut diag = T::zero();
        for j in 0..n {
            if i != j {
                let v = (bw[j] / bw[i]) / (nodes[i] - nodes[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre::<f64>(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn interpolation_and_derivative_of_polynomial() {
        let (x, _) = gauss_on::<f64>(16, 0.0, 2.0);
        let f = |t: f64| t.powi(7) - 3.0 * t * t + 1.0;
        let df = |t: f64| 7.0 * t.powi(6) - 6.0 * t;
        let vals: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let bw = barycentric_weights(&x);
        for t in [0.0, 0.31, 1.7, 2.0] {
            let b = lagrange_basis(&x, &bw, t);
            let p: f64 = b.iter().zip(&vals).map(|(b, v)| b * v).sum();
            assert!((p - f(t)).abs() < 1e-11);
        }
        let d = diff_matrix(&x);
        for i in 0..16 {
            let p: f64 = (0..16).map(|j| d[i * 16 + j] * vals[j]).sum();
            assert!((p - df(x[i])).abs() < 1e-9 * (1.0 + df(x[i]).abs()));
        }
    }
}
