//! Operator norms between L², H¹, semiclassical H¹_k and Fourier-weighted Sobolev spaces,
//! and the Fourier diagonalization of the layer operators on the unit circle.

use std::fmt;
use std::str::FromStr;

use crate::assembly::{DenseOperator, Discretization, OperatorKind};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::linalg::{lanczos_top, power_top, singular_values, vnorm, CMat};
use crate::scalar::{cplx, Real, C};
use crate::specfun::{bessel_j_orders, bessel_y_orders};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space<T> {
    L2,
    H1,
    H1k,
    /// Fourier-weighted `H^s` on the circle.
    Hs(T),
}

impl<T: Real> fmt::Display for Space<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::L2 => f.write_str("L2"),
            Space::H1 => f.write_str("H1"),
            Space::H1k => f.write_str("H1k"),
            Space::Hs(s) => write!(f, "Hs({s})"),
        }
    }
}

impl<T: Real> FromStr for Space<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L2" => Ok(Space::L2),
            "H1" => Ok(Space::H1),
            "H1k" => Ok(Space::H1k),
            _ => {
                let inner = s
                    .strip_prefix("Hs(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Config(format!("unknown space `{s}`")))?;
                let v: f64 = inner
                    .parse()
                    .map_err(|_| Error::Config(format!("bad Sobolev index in `{s}`")))?;
                Ok(Space::Hs(T::lit(v)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec<T> {
    pub source: Space<T>,
    pub target: Space<T>,
}

impl<T: Real> NormSpec<T> {
    pub fn new(source: Space<T>, target: Space<T>) -> Result<Self> {
        if matches!(source, Space::H1 | Space::H1k) {
            return Err(Error::Argument(format!(
                "source space {source} is not supported"
            )));
        }
        for sp in [source, target] {
            if let Space::Hs(s) = sp {
                if !(s.abs() <= T::lit(1.5)) {
                    return Err(Error::Argument(format!(
                        "Sobolev index {s} outside [-1.5, 1.5]"
                    )));
                }
            }
        }
        Ok(NormSpec { source, target })
    }

    pub fn l2_l2() -> Self {
        NormSpec {
            source: Space::L2,
            target: Space::L2,
        }
    }

    pub fn l2_h1() -> Self {
        NormSpec {
            source: Space::L2,
            target: Space::H1,
        }
    }

    pub fn l2_h1k() -> Self {
        NormSpec {
            source: Space::L2,
            target: Space::H1k,
        }
    }

    /// `H^{s−1/2} → H^{s+1/2}`.
    pub fn trace_pair(s: T) -> Self {
        let h = T::lit(0.5);
        NormSpec {
            source: Space::Hs(s - h),
            target: Space::Hs(s + h),
        }
    }
}

impl<T: Real> fmt::Display for NormSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

impl<T: Real> FromStr for NormSpec<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("->")
            .ok_or_else(|| Error::Config(format!("norm spec `{s}` must look like L2->H1k")))?;
        NormSpec::new(a.trim().parse()?, b.trim().parse()?).map_err(|e| match e {
            Error::Argument(m) => Error::Config(m),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    DenseSvd,
    PowerIteration,
    Lanczos,
    FourierOracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::DenseSvd => "dense_svd",
            Method::PowerIteration => "power_iteration",
            Method::Lanczos => "lanczos",
            Method::FourierOracle => "fourier_oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport<T> {
    pub kind: OperatorKind,
    pub k: T,
    pub n: usize,
    pub norm: T,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    /// Relative eigen-residual of the final iterate (dense: largest normalized column overlap).
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions<T> {
    /// Largest N handled by the dense decomposition when no method is forced.
    pub dense_max: usize,
    pub method: Option<Method>,
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
}

impl<T: Real> Default for NormOptions<T> {
    fn default() -> Self {
        NormOptions {
            dense_max: 256,
            method: None,
            tol: T::lit(1e-10),
            max_iter: 5000,
            seed: 0x5eed,
        }
    }
}

/// Unit-circle radius when the discretization is the equispaced circle.
fn circle_radius<T: Real>(disc: &Discretization<T>) -> Option<T> {
    if !disc.is_equispaced_periodic() || disc.geometry.pieces.len() != 1 {
        return None;
    }
    match disc.geometry.pieces[0].shape {
        Shape::Arc { radius, .. } if disc.geometry.pieces[0].is_periodic() => Some(radius),
        _ => None,
    }
}

/// Signed Fourier mode of DFT slot `j` among `n` (the Nyquist slot maps to +n/2).
fn mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Maps nodal values to unweighted coordinates `R x` and back, for one side of the norm.
struct Factor<'a, T> {
    space: Space<T>,
    disc: &'a Discretization<T>,
    sqrt_w: Vec<T>,
    radius: T,
}

impl<'a, T: Real> Factor<'a, T> {
    fn new(space: Space<T>, disc: &'a Discretization<T>) -> Result<Self> {
        let radius = match space {
            Space::Hs(_) => circle_radius(disc).ok_or_else(|| {
                Error::Argument("Fourier Sobolev norms need the equispaced circle".into())
            })?,
            _ => T::one(),
        };
        Ok(Factor {
            space,
            disc,
            sqrt_w: disc.mass.iter().map(|w| w.sqrt()).collect(),
            radius,
        })
    }

    fn rows(&self) -> usize {
        match self.space {
            Space::H1 | Space::H1k => 2 * self.disc.len(),
            _ => self.disc.len(),
        }
    }

    fn grad_scale(&self) -> T {
        if self.space == Space::H1k {
            T::one() / self.disc.k
        } else {
            T::one()
        }
    }

    fn hs_weight(&self, j: usize, s: T) -> T {
        let n = self.disc.len();
        let m = T::from_i64(mode(j, n)).unwrap() / self.radius;
        (T::one() + m * m).powf(s / T::lit(2.0))
    }

    /// Unitary DFT `û_m = N^{-1/2} Σ_j u_j e^{−i m θ_j}` (or its inverse).
    fn dft(&self, x: &[C<T>], inverse: bool) -> Vec<C<T>> {
        let n = x.len();
        let nf = T::from_usize_lossy(n);
        let sign = if inverse { T::one() } else { -T::one() };
        let norm = nf.sqrt();
        (0..n)
            .map(|m| {
                let mut acc = cplx(T::zero(), T::zero());
                for (j, v) in x.iter().enumerate() {
                    let ang = sign * T::TAU() * T::from_usize_lossy((m * j) % n) / nf;
                    acc += v * cplx(ang.cos(), ang.sin());
                }
                acc / norm
            })
            .collect()
    }

    /// `R x`.
    fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self.space {
            Space::L2 => x.iter().zip(&self.sqrt_w).map(|(v, w)| v * *w).collect(),
            Space::H1 | Space::H1k => {
                let c = self.grad_scale();
                let g = self.disc.diff.apply(x);
                let mut out: Vec<C<T>> = x.iter().zip(&self.sqrt_w).map(|(v, w)| v * *w).collect();
                out.extend(g.iter().zip(&self.sqrt_w).map(|(v, w)| v * (*w * c)));
                out
            }
            Space::Hs(s) => {
                let f = (T::TAU() * self.radius / T::from_usize_lossy(x.len())).sqrt();
                let mut u = self.dft(x, false);
                for (j, v) in u.iter_mut().enumerate() {
                    *v *= self.hs_weight(j, s) * f;
                }
                u
            }
        }
    }

    /// `Rᴴ y`.
    fn apply_adjoint(&self, y: &[C<T>]) -> Vec<C<T>> {
        let n = self.disc.len();
        match self.space {
            Space::L2 => y.iter().zip(&self.sqrt_w).map(|(v, w)| v * *w).collect(),
            Space::H1 | Space::H1k => {
                let c = self.grad_scale();
                let lower: Vec<C<T>> = y[n..]
                    .iter()
                    .zip(&self.sqrt_w)
                    .map(|(v, w)| v * (*w * c))
                    .collect();
                let g = self.disc.diff.apply_transpose(&lower);
                y[..n]
                    .iter()
                    .zip(&self.sqrt_w)
                    .zip(g)
                    .map(|((v, w), gi)| v * *w + gi)
                    .collect()
            }
            Space::Hs(s) => {
                let f = (T::TAU() * self.radius / T::from_usize_lossy(n)).sqrt();
                let scaled: Vec<C<T>> = y
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (self.hs_weight(j, s) * f))
                    .collect();
                self.dft(&scaled, true)
            }
        }
    }

    /// `R⁻¹ y` (source side only: L² or Hs).
    fn apply_inverse(&self, y: &[C<T>]) -> Vec<C<T>> {
        match self.space {
            Space::Hs(s) => {
                let f = (T::TAU() * self.radius / T::from_usize_lossy(y.len())).sqrt();
                let scaled: Vec<C<T>> = y
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v / (self.hs_weight(j, s) * f))
                    .collect();
                self.dft(&scaled, true)
            }
            _ => y.iter().zip(&self.sqrt_w).map(|(v, w)| v / *w).collect(),
        }
    }

    /// `R⁻ᴴ x`.
    fn apply_inverse_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self.space {
            Space::Hs(s) => {
                let f = (T::TAU() * self.radius / T::from_usize_lossy(x.len())).sqrt();
                let mut u = self.dft(x, false);
                for (j, v) in u.iter_mut().enumerate() {
                    *v /= self.hs_weight(j, s) * f;
                }
                u
            }
            _ => x.iter().zip(&self.sqrt_w).map(|(v, w)| v / *w).collect(),
        }
    }
}

fn columns_apply<T: Real>(
    m: &CMat<T>,
    f: impl Fn(&[C<T>]) -> Vec<C<T>>,
    out_rows: usize,
) -> CMat<T> {
    let mut out = CMat::zeros(out_rows, m.cols);
    for j in 0..m.cols {
        let col: Vec<C<T>> = (0..m.rows).map(|i| m.get(i, j)).collect();
        for (i, v) in f(&col).into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

/// Largest generalized singular value of `op` between the source and target inner products.
pub fn operator_norm<T: Real>(
    op: &DenseOperator<T>,
    disc: &Discretization<T>,
    spec: NormSpec<T>,
) -> Result<NormReport<T>> {
    operator_norm_with(op, disc, spec, &NormOptions::default())
}

pub fn operator_norm_with<T: Real>(
    op: &DenseOperator<T>,
    disc: &Discretization<T>,
    spec: NormSpec<T>,
    opts: &NormOptions<T>,
) -> Result<NormReport<T>> {
    let n = disc.len();
    if op.n() != n || (op.discretization != disc.id && op.kind != OperatorKind::Custom) {
        return Err(Error::Argument(
            "operator does not belong to this discretization".into(),
        ));
    }
    if matches!(spec.source, Space::H1 | Space::H1k) {
        return Err(Error::Argument(format!(
            "source space {} is not supported",
            spec.source
        )));
    }
    let src = Factor::new(spec.source, disc)?;
    let tgt = Factor::new(spec.target, disc)?;
    // A directly assembled derivative replaces differentiating the nodal output.
    let gradient = match spec.target {
        Space::H1 | Space::H1k => op.gradient.as_ref(),
        _ => None,
    };
    let method = opts.method.unwrap_or(if n <= opts.dense_max {
        Method::DenseSvd
    } else {
        Method::Lanczos
    });
    let mut report = NormReport {
        kind: op.kind,
        k: disc.k,
        n,
        norm: T::zero(),
        method,
        converged: false,
        iterations: 0,
        residual: T::infinity(),
    };
    match method {
        Method::DenseSvd => {
            // B = R_T A R_S⁻¹: right factor acts on rows of A, left factor on columns.
            let right = |m: &CMat<T>| {
                if let Space::L2 = spec.source {
                    let inv: Vec<T> = src.sqrt_w.iter().map(|w| T::one() / *w).collect();
                    m.scale_cols(&inv)
                } else {
                    // (A R⁻¹) = (R⁻ᴴ Aᴴ)ᴴ
                    columns_apply(&m.adjoint(), |c| src.apply_inverse_adjoint(c), n).adjoint()
                }
            };
            let b = match gradient {
                Some(g) => {
                    let scaled: Vec<T> = tgt.sqrt_w.iter().map(|w| *w * tgt.grad_scale()).collect();
                    right(&op.matrix)
                        .scale_rows(&tgt.sqrt_w)
                        .vstack(&right(g).scale_rows(&scaled))
                }
                None => columns_apply(&right(&op.matrix), |c| tgt.apply(c), tgt.rows()),
            };
            let (sv, off, sweeps) = singular_values(&b, T::epsilon() * T::lit(4.0), 60);
            report.norm = sv[0];
            report.residual = off;
            report.iterations = sweeps;
            report.converged = off <= opts.tol;
        }
        Method::PowerIteration | Method::Lanczos => {
            let g = |x: &[C<T>]| {
                let z = src.apply_inverse(x);
                let back = match gradient {
                    Some(gm) => {
                        let c = tgt.grad_scale();
                        let w2 = |v: Vec<C<T>>, s: T| -> Vec<C<T>> {
                            v.iter()
                                .zip(&tgt.sqrt_w)
                                .map(|(v, w)| v * (*w * *w * s))
                                .collect()
                        };
                        let top = op
                            .matrix
                            .matvec_adjoint(&w2(op.matrix.matvec(&z), T::one()));
                        let bot = gm.matvec_adjoint(&w2(gm.matvec(&z), c * c));
                        top.iter().zip(&bot).map(|(a, b)| a + b).collect()
                    }
                    None => {
                        let y = tgt.apply(&op.matrix.matvec(&z));
                        op.matrix.matvec_adjoint(&tgt.apply_adjoint(&y))
                    }
                };
                src.apply_inverse_adjoint(&back)
            };
            let e = if method == Method::Lanczos {
                lanczos_top(&g, n, opts.tol, opts.max_iter, opts.seed)
            } else {
                power_top(&g, n, opts.tol, opts.max_iter, opts.seed)
            };
            report.norm = e.value.max(T::zero()).sqrt();
            report.residual = e.residual;
            report.iterations = e.iterations;
            report.converged = e.converged;
        }
        Method::FourierOracle => {
            return Err(Error::Argument(
                "use oracle_norm for the Fourier oracle".into(),
            ))
        }
    }
    Ok(report)
}

pub fn l2_norm<T: Real>(v: &[C<T>], disc: &Discretization<T>) -> Result<T> {
    if v.len() != disc.len() {
        return Err(Error::Argument(format!(
            "vector of length {} on {} nodes",
            v.len(),
            disc.len()
        )));
    }
    Ok(vnorm(
        &v.iter()
            .zip(&disc.mass)
            .map(|(x, w)| x * w.sqrt())
            .collect::<Vec<_>>(),
    ))
}

/// `√(k⁻²‖∇v‖² + ‖v‖²)` with the broken surface gradient.
pub fn h1k_norm<T: Real>(v: &[C<T>], disc: &Discretization<T>) -> Result<T> {
    let l2 = l2_norm(v, disc)?;
    let g = l2_norm(&disc.diff.apply(v), disc)?;
    Ok((l2 * l2 + g * g / (disc.k * disc.k)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSymbol<T> {
    pub n: i64,
    pub value: C<T>,
}

/// Eigenvalues of `kind` on `e^{inθ}`, `n = 0..=n_max`, for the unit circle.
///
/// `S ↦ (iπ/2) J_n(k) H_n(k)`, `D, D′ ↦ (iπk/4)(J_n H_n′ + J_n′ H_n)`.
pub fn circle_symbols<T: Real>(
    kind: OperatorKind,
    n_max: usize,
    k: T,
    eta: T,
) -> Result<Vec<C<T>>> {
    if !(k > T::zero()) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let top = n_max as u32 + 1;
    let j = bessel_j_orders(top, k)?;
    let y = bessel_y_orders(top, k)?;
    // J_a·H_b = J_a J_b + i J_a Y_b, computed on scaled factors.
    let jh = |a: usize, b: usize| cplx(j[a].mul_value(j[b]), j[a].mul_value(y[b]));
    let half = T::lit(0.5);
    let s_sym = |n: usize| cplx(T::zero(), T::PI() / T::lit(2.0)) * jh(n, n);
    let d_sym = |n: usize| {
        // J_n H_n' + J_n' H_n with C_n' = (C_{n−1} − C_{n+1})/2 and C_0' = −C_1.
        let sum = if n == 0 {
            -(jh(0, 1) + jh(1, 0))
        } else {
            (jh(n, n - 1) - jh(n, n + 1) + jh(n - 1, n) - jh(n + 1, n)) * half
        };
        cplx(T::zero(), T::PI() * k / T::lit(4.0)) * sum
    };
    (0..=n_max)
        .map(|n| {
            Ok(match kind {
                OperatorKind::S => s_sym(n),
                OperatorKind::D | OperatorKind::Dprime => d_sym(n),
                OperatorKind::ADirect | OperatorKind::AIndirect => {
                    cplx(half, T::zero()) + d_sym(n) - cplx(T::zero(), eta) * s_sym(n)
                }
                OperatorKind::Custom => {
                    return Err(Error::Argument("custom operators have no symbol".into()))
                }
            })
        })
        .collect()
}

pub fn circle_symbol<T: Real>(
    kind: OperatorKind,
    n: i64,
    k: T,
    eta: T,
) -> Result<FourierSymbol<T>> {
    let m = n.unsigned_abs() as usize;
    let v = circle_symbols(kind, m, k, eta)?;
    Ok(FourierSymbol { n, value: v[m] })
}

/// Smallest admissible truncation for [`oracle_norm`].
pub fn oracle_n_max<T: Real>(k: T) -> usize {
    let a = k.ceil().to_f64_lossy() as usize;
    let b = (T::lit(10.0) * k.cbrt()).ceil().to_f64_lossy() as usize;
    a + b + 100
}

fn fourier_weight<T: Real>(space: Space<T>, n: T, k: T) -> T {
    match space {
        Space::L2 => T::one(),
        Space::H1 => (T::one() + n * n).sqrt(),
        Space::H1k => (T::one() + n * n / (k * k)).sqrt(),
        Space::Hs(s) => (T::one() + n * n).powf(s / T::lit(2.0)),
    }
}

/// `sup_{|n| ≤ n_max} w_target(n)/w_source(n)·|σ(n)|` on the unit circle.
pub fn oracle_norm<T: Real>(
    kind: OperatorKind,
    k: T,
    spec: NormSpec<T>,
    n_max: usize,
    eta: T,
) -> Result<NormReport<T>> {
    let need = oracle_n_max(k);
    if n_max < need {
        return Err(Error::Argument(format!(
            "n_max = {n_max} below the truncation rule {need} at k = {k}"
        )));
    }
    let gains = |s: Space<T>| match s {
        Space::L2 => T::zero(),
        Space::H1 | Space::H1k => T::one(),
        Space::Hs(s) => s,
    };
    if matches!(kind, OperatorKind::ADirect | OperatorKind::AIndirect)
        && gains(spec.target) > gains(spec.source)
    {
        return Err(Error::Argument(format!(
            "the identity part of {kind} is unbounded in {spec}"
        )));
    }
    let sym = circle_symbols(kind, n_max, k, eta)?;
    let norm = sym
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let nf = T::from_usize_lossy(n);
            fourier_weight(spec.target, nf, k) / fourier_weight(spec.source, nf, k) * s.norm()
        })
        .fold(T::zero(), T::max);
    Ok(NormReport {
        kind,
        k,
        n: n_max,
        norm,
        method: Method::FourierOracle,
        converged: true,
        iterations: n_max,
        residual: T::zero(),
    })
}
