//! Helmholtz fundamental solution and its first derivatives in two and three dimensions.

use crate::error::{Error, Result};
use crate::scalar::{cplx, Real, C};
use crate::specfun::hankel01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint<T> {
    /// Points in ℝ^d; the third coordinate is ignored when `dimension == 2`.
    pub x: [T; 3],
    pub y: [T; 3],
    pub normal_x: Option<[T; 3]>,
    pub normal_y: Option<[T; 3]>,
    pub k: T,
    pub dimension: u8,
}

impl<T: Real> KernelPoint<T> {
    pub fn planar(x: [T; 2], y: [T; 2], k: T) -> Self {
        KernelPoint {
            x: [x[0], x[1], T::zero()],
            y: [y[0], y[1], T::zero()],
            normal_x: None,
            normal_y: None,
            k,
            dimension: 2,
        }
    }

    pub fn spatial(x: [T; 3], y: [T; 3], k: T) -> Self {
        KernelPoint {
            x,
            y,
            normal_x: None,
            normal_y: None,
            k,
            dimension: 3,
        }
    }

    pub fn with_normal_x(mut self, n: [T; 3]) -> Self {
        self.normal_x = Some(n);
        self
    }

    pub fn with_normal_y(mut self, n: [T; 3]) -> Self {
        self.normal_y = Some(n);
        self
    }

    fn diff(&self) -> Result<([T; 3], T)> {
        if !(self.k > T::zero()) {
            return Err(Error::Domain(format!(
                "wavenumber must be positive, got {}",
                self.k
            )));
        }
        let d = match self.dimension {
            2 => [self.x[0] - self.y[0], self.x[1] - self.y[1], T::zero()],
            3 => [
                self.x[0] - self.y[0],
                self.x[1] - self.y[1],
                self.x[2] - self.y[2],
            ],
            other => {
                return Err(Error::Argument(format!(
                    "dimension must be 2 or 3, got {other}"
                )))
            }
        };
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if r == T::zero() {
            return Err(Error::Singular);
        }
        Ok((d, r))
    }

    fn dot(&self, a: [T; 3], b: [T; 3]) -> T {
        let s = a[0] * b[0] + a[1] * b[1];
        if self.dimension == 3 {
            s + a[2] * b[2]
        } else {
            s
        }
    }

    /// `dΦ/dr` at distance `r`.
    fn radial_derivative(&self, r: T) -> C<T> {
        let k = self.k;
        if self.dimension == 2 {
            phi2_dr(k, r)
        } else {
            let e = cplx((k * r).cos(), (k * r).sin());
            e * cplx(-T::one(), k * r) / (T::lit(4.0) * T::PI() * r * r)
        }
    }
}

/// `(i/4)·H0(kr)`.
#[inline]
pub fn phi2<T: Real>(k: T, r: T) -> C<T> {
    let (h0, _) = hankel01(k * r);
    cplx(-h0.im, h0.re) / T::lit(4.0)
}

/// `d/dr (i/4)·H0(kr) = −(ik/4)·H1(kr)`.
#[inline]
pub fn phi2_dr<T: Real>(k: T, r: T) -> C<T> {
    let (_, h1) = hankel01(k * r);
    cplx(h1.im, -h1.re) * (k / T::lit(4.0))
}

pub fn phi<T: Real>(p: &KernelPoint<T>) -> Result<C<T>> {
    let (_, r) = p.diff()?;
    Ok(if p.dimension == 2 {
        phi2(p.k, r)
    } else {
        let kr = p.k * r;
        cplx(kr.cos(), kr.sin()) / (T::lit(4.0) * T::PI() * r)
    })
}

/// `∂Φ(x, y)/∂n(y)`.
pub fn dlp_kernel<T: Real>(p: &KernelPoint<T>) -> Result<C<T>> {
    let n = p
        .normal_y
        .ok_or_else(|| Error::Argument("double-layer kernel needs normal_y".into()))?;
    let (d, r) = p.diff()?;
    Ok(p.radial_derivative(r) * (-p.dot(d, n) / r))
}

/// `∂Φ(x, y)/∂n(x)`.
pub fn adlp_kernel<T: Real>(p: &KernelPoint<T>) -> Result<C<T>> {
    let n = p
        .normal_x
        .ok_or_else(|| Error::Argument("adjoint double-layer kernel needs normal_x".into()))?;
    let (d, r) = p.diff()?;
    Ok(p.radial_derivative(r) * (p.dot(d, n) / r))
}

/// `⟨V, ∇_x⟩Φ(x, y)`.
pub fn grad_x_phi<T: Real>(p: &KernelPoint<T>, v: [T; 3]) -> Result<C<T>> {
    let (d, r) = p.diff()?;
    Ok(p.radial_derivative(r) * (p.dot(d, v) / r))
}
