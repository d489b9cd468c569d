//! Dense complex matrices and extremal singular values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scalar::{cplx, Real, C};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C::new(T::one(), T::zero());
        }
        m
    }

    /// Builds the matrix row by row in parallel.
    pub fn from_rows<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [C<T>]) + Sync,
    {
        let mut m = Self::zeros(rows, cols);
        if cols > 0 {
            m.data
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
        }
        m
    }

    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> C<T> + Sync,
    {
        Self::from_rows(rows, cols, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C<T>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `Aᴴ x`.
    pub fn matvec_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.rows);
        let chunk = 64;
        let zero = C::new(T::zero(), T::zero());
        (0..self.rows.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![zero; self.cols];
                let end = ((c + 1) * chunk).min(self.rows);
                for (i, &xi) in x.iter().enumerate().take(end).skip(c * chunk) {
                    for (a, m) in acc.iter_mut().zip(self.row(i)) {
                        *a += m.conj() * xi;
                    }
                }
                acc
            })
            .reduce(
                || vec![zero; self.cols],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    }

    pub fn matmul(&self, other: &CMat<T>) -> CMat<T> {
        assert_eq!(self.cols, other.rows);
        CMat::from_rows(self.rows, other.cols, |i, out| {
            for (l, a) in self.row(i).iter().enumerate() {
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        })
    }

    pub fn transpose(&self) -> CMat<T> {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn adjoint(&self) -> CMat<T> {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale_rows(&self, s: &[T]) -> CMat<T> {
        CMat::from_rows(self.rows, self.cols, |i, out| {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o = a * s[i];
            }
        })
    }

    pub fn scale_cols(&self, s: &[T]) -> CMat<T> {
        CMat::from_rows(self.rows, self.cols, |i, out| {
            for ((o, a), &sj) in out.iter_mut().zip(self.row(i)).zip(s) {
                *o = a * sj;
            }
        })
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: C<T>, other: &CMat<T>, b: C<T>) -> CMat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &CMat<T>) -> CMat<T> {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        CMat {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn fro_norm(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }
}

/// Block-diagonal real matrix; blocks never couple distinct index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag<T> {
    /// `(offset, size, row-major block)`.
    pub blocks: Vec<(usize, usize, Vec<T>)>,
    pub n: usize,
}

impl<T: Real> BlockDiag<T> {
    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![C::new(T::zero(), T::zero()); self.n];
        for (off, m, b) in &self.blocks {
            let (off, m) = (*off, *m);
            y[off..off + m]
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| {
                    let row = &b[i * m..(i + 1) * m];
                    *yi = row
                        .iter()
                        .zip(&x[off..off + m])
                        .fold(C::new(T::zero(), T::zero()), |acc, (a, v)| acc + v * *a);
                });
        }
        y
    }

    pub fn apply_transpose(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![C::new(T::zero(), T::zero()); self.n];
        for (off, m, b) in &self.blocks {
            let (off, m) = (*off, *m);
            y[off..off + m]
                .par_iter_mut()
                .enumerate()
                .for_each(|(j, yj)| {
                    let mut acc = C::new(T::zero(), T::zero());
                    for i in 0..m {
                        acc += x[off + i] * b[i * m + j];
                    }
                    *yj = acc;
                });
        }
        y
    }

    pub fn to_dense(&self) -> CMat<T> {
        let mut out = CMat::zeros(self.n, self.n);
        for (off, m, b) in &self.blocks {
            for i in 0..*m {
                for j in 0..*m {
                    out.set(off + i, off + j, C::new(b[i * m + j], T::zero()));
                }
            }
        }
        out
    }
}

pub fn vdot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(C::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}

pub fn vnorm<T: Real>(a: &[C<T>]) -> T {
    a.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

/// Deterministic unit start vector.
pub fn seeded_unit<T: Real>(n: usize, seed: u64) -> Vec<C<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C<T>> = (0..n)
        .map(|_| {
            cplx(
                T::lit(rng.gen_range(-1.0..1.0)),
                T::lit(rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let s = vnorm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Singular values of `a` (descending) by parallel one-sided Jacobi, plus the final
/// largest normalized column inner product.
pub fn singular_values<T: Real>(a: &CMat<T>, tol: T, max_sweeps: usize) -> (Vec<T>, T, usize) {
    let (m, n) = (a.rows, a.cols);
    let mut cols: Vec<Vec<C<T>>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    // Round-robin tournament over an even number of slots; slot `n` is a dummy when n is odd.
    let slots = n + n % 2;
    let mut sweeps = 0;
    let mut off = T::zero();
    while sweeps < max_sweeps {
        sweeps += 1;
        off = T::zero();
        let mut order: Vec<usize> = (0..slots).collect();
        for _round in 0..slots.saturating_sub(1) {
            let pairs: Vec<(usize, usize)> = (0..slots / 2)
                .map(|i| {
                    let (p, q) = (order[i], order[slots - 1 - i]);
                    (p.min(q), p.max(q))
                })
                .filter(|&(_, q)| q < n)
                .collect();
            let mut taken: Vec<(usize, usize, Column<T>, Column<T>)> = pairs
                .iter()
                .map(|&(p, q)| {
                    (
                        p,
                        q,
                        std::mem::take(&mut cols[p]),
                        std::mem::take(&mut cols[q]),
                    )
                })
                .collect();
            let round_off = taken
                .par_iter_mut()
                .map(|(_, _, cp, cq)| rotate_pair(cp, cq, tol))
                .reduce(T::zero, T::max);
            off = off.max(round_off);
            for (p, q, cp, cq) in taken {
                cols[p] = cp;
                cols[q] = cq;
            }
            // Rotate every slot except the first.
            let last = order.pop().unwrap();
            order.insert(1, last);
        }
        if off <= tol {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| vnorm(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (sv, off, sweeps)
}

/// Orthogonalizes two columns; returns their normalized inner product before rotation.
fn rotate_pair<T: Real>(cp: &mut [C<T>], cq: &mut [C<T>], tol: T) -> T {
    let alpha: T = cp.iter().map(|v| v.norm_sqr()).sum();
    let beta: T = cq.iter().map(|v| v.norm_sqr()).sum();
    let gamma = vdot(cp, cq);
    let g = gamma.norm();
    if alpha == T::zero() || beta == T::zero() {
        return T::zero();
    }
    let rel = g / (alpha * beta).sqrt();
    if rel <= tol {
        return rel;
    }
    let phase = gamma / g;
    let zeta = (beta - alpha) / (T::lit(2.0) * g);
    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = c * t;
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase.conj();
        let xp = *x;
        *x = xp * c - yq * s;
        *y = (xp * s + yq * c) * phase;
    }
    rel
}

/// Outcome of an iterative top-eigenvalue solve for a Hermitian positive semidefinite operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopEigen<T> {
    pub value: T,
    /// `‖G y − θ y‖ / θ` for the returned Ritz pair.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

type Column<T> = Vec<C<T>>;

/// Action `x ↦ Gx` of a Hermitian positive semidefinite operator.
pub type Gram<'a, T> = dyn Fn(&[C<T>]) -> Vec<C<T>> + Sync + 'a;

/// Power iteration; stops once the Rayleigh quotient changes by at most `tol` (relative)
/// on 3 consecutive steps and the eigen-residual is at most `tol`.
pub fn power_top<T: Real>(
    g: &Gram<T>,
    n: usize,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> TopEigen<T> {
    let mut x = seeded_unit::<T>(n, seed);
    let mut theta_prev = T::zero();
    let mut streak = 0;
    let mut out = TopEigen {
        value: T::zero(),
        residual: T::infinity(),
        iterations: 0,
        converged: false,
    };
    for it in 1..=max_iter {
        let y = g(&x);
        let theta = vdot(&x, &y).re;
        let res = vnorm(
            &y.iter()
                .zip(&x)
                .map(|(a, b)| a - b * theta)
                .collect::<Vec<_>>(),
        );
        let rel = if theta > T::zero() {
            res / theta
        } else {
            T::infinity()
        };
        out = TopEigen {
            value: theta,
            residual: rel,
            iterations: it,
            converged: false,
        };
        if theta == T::zero() {
            out.residual = T::zero();
            out.converged = true;
            return out;
        }
        if (theta - theta_prev).abs() <= tol * theta {
            streak += 1;
        } else {
            streak = 0;
        }
        theta_prev = theta;
        if streak >= 3 && rel <= tol {
            out.converged = true;
            return out;
        }
        let s = vnorm(&y);
        x = y.into_iter().map(|v| v / s).collect();
    }
    out
}

/// Lanczos with full reorthogonalization and explicit restarts from the current Ritz vector.
pub fn lanczos_top<T: Real>(
    g: &Gram<T>,
    n: usize,
    tol: T,
    max_matvecs: usize,
    seed: u64,
) -> TopEigen<T> {
    let basis_cap = n.clamp(1, 400);
    let mut start = seeded_unit::<T>(n, seed);
    let mut matvecs = 0;
    let mut best = TopEigen {
        value: T::zero(),
        residual: T::infinity(),
        iterations: 0,
        converged: false,
    };
    while matvecs < max_matvecs {
        let mut v: Vec<Vec<C<T>>> = vec![start.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let (theta, s) = loop {
            let j = v.len() - 1;
            let mut w = g(&v[j]);
            matvecs += 1;
            let a = vdot(&v[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for vi in &v {
                    let h = vdot(vi, &w);
                    for (x, y) in w.iter_mut().zip(vi) {
                        *x -= y * h;
                    }
                }
            }
            let b = vnorm(&w);
            let m = alpha.len();
            let check = m.is_multiple_of(5)
                || m == basis_cap
                || b <= T::epsilon() * a.abs().max(T::one())
                || matvecs >= max_matvecs;
            if check {
                let (theta, s) = tridiag_top(&alpha, &beta);
                let est = b * s[m - 1].abs();
                if est <= T::lit(0.1) * tol * theta.abs().max(T::min_positive_value())
                    || m == basis_cap
                    || b <= T::epsilon() * a.abs().max(T::one())
                    || matvecs >= max_matvecs
                {
                    break (theta, s);
                }
            }
            beta.push(b);
            v.push(w.into_iter().map(|x| x / b).collect());
        };
        let mut y = vec![C::new(T::zero(), T::zero()); n];
        for (sj, vj) in s.iter().zip(&v) {
            for (a, b) in y.iter_mut().zip(vj) {
                *a += b * *sj;
            }
        }
        let ny = vnorm(&y);
        for a in &mut y {
            *a /= ny;
        }
        let gy = g(&y);
        matvecs += 1;
        let rq = vdot(&y, &gy).re;
        let res = vnorm(
            &gy.iter()
                .zip(&y)
                .map(|(a, b)| a - b * rq)
                .collect::<Vec<_>>(),
        );
        let rel = if rq > T::zero() {
            res / rq
        } else if res == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        let _ = theta;
        best = TopEigen {
            value: rq,
            residual: rel,
            iterations: matvecs,
            converged: rel <= tol,
        };
        if best.converged {
            return best;
        }
        start = y;
    }
    best
}

/// Largest eigenpair of the symmetric tridiagonal matrix with diagonal `a` and off-diagonal
/// `b`: Sturm bisection for the value, inverse iteration for the vector.
fn tridiag_top<T: Real>(a: &[T], b: &[T]) -> (T, Vec<T>) {
    let m = a.len();
    let bound = |i: usize| {
        let l = if i > 0 { b[i - 1].abs() } else { T::zero() };
        let r = if i + 1 < m { b[i].abs() } else { T::zero() };
        l + r
    };
    let mut lo = (0..m).map(|i| a[i] - bound(i)).fold(T::infinity(), T::min);
    let mut hi = (0..m)
        .map(|i| a[i] + bound(i))
        .fold(T::neg_infinity(), T::max);
    let scale = lo.abs().max(hi.abs()).max(T::min_positive_value());
    // Number of eigenvalues below x.
    let count = |x: T| {
        let mut c = 0;
        let mut d = T::one();
        for i in 0..m {
            let off = if i > 0 {
                b[i - 1] * b[i - 1] / d
            } else {
                T::zero()
            };
            d = a[i] - x - off;
            if d == T::zero() {
                d = -T::epsilon() * scale;
            }
            if d < T::zero() {
                c += 1;
            }
        }
        c
    };
    while hi - lo > T::lit(2.0) * T::epsilon() * scale {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) == m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = (lo + hi) / T::lit(2.0);
    let mut x = vec![T::one(); m];
    for _ in 0..3 {
        x = tridiag_shift_solve(a, b, theta + T::lit(4.0) * T::epsilon() * scale, x, scale);
        let n = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        for v in &mut x {
            *v /= n;
        }
    }
    (theta, x)
}

/// Solves `(T − σI) x = rhs` by Gaussian elimination with partial pivoting.
fn tridiag_shift_solve<T: Real>(a: &[T], b: &[T], sigma: T, mut x: Vec<T>, scale: T) -> Vec<T> {
    let n = a.len();
    if n == 1 {
        let d = a[0] - sigma;
        let d = if d == T::zero() {
            T::epsilon() * scale
        } else {
            d
        };
        return vec![x[0] / d];
    }
    let tiny = T::epsilon() * scale;
    let mut d: Vec<T> = a.iter().map(|&v| v - sigma).collect();
    let mut dl = b.to_vec();
    let mut du = b.to_vec();
    let mut du2 = vec![T::zero(); n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == T::zero() {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == T::zero() {
        d[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            x.swap(i, i + 1);
        }
        let t = x[i];
        x[i + 1] -= dl[i] * t;
    }
    x[n - 1] /= d[n - 1];
    x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}
