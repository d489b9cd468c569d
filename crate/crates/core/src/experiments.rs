//! Lower-bound witnesses for the single-layer operator, and Herglotz quasimodes
//! restricted to curves.

use rayon::prelude::*;

use crate::assembly::MIN_PPW;
use crate::error::{Error, Result};
use crate::fit::{fit_exponent, Fit, FitModel};
use crate::geometry::{dot, norm, sub, BoundaryGeometry, BoundaryPiece, Point};
use crate::kernels::{grad_x_phi, phi, KernelPoint};
use crate::quadrature::gauss_on;
use crate::scalar::{cplx, Real, C};
use crate::specfun::bessel_j;

pub const DEFAULT_BIG_M: f64 = 8.0;
/// Default ε as a fraction of the flat piece length or of the radius of curvature.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.05;
pub const DEFAULT_WIDTH_EXPONENT: f64 = 0.5;
const ORDER: usize = 16;

/// Plateau cutoff: 1 on `[−1, 1]`, 0 outside `(−2, 2)`, smooth in between.
pub fn cutoff<T: Real>(t: T) -> T {
    let a = t.abs();
    if a <= T::one() {
        return T::one();
    }
    if a >= T::lit(2.0) {
        return T::zero();
    }
    let f = |x: T| {
        if x > T::zero() {
            (-T::one() / x).exp()
        } else {
            T::zero()
        }
    };
    let s = T::lit(2.0) - a;
    f(s) / (f(s) + f(T::one() - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    Flat,
    Curved,
}

/// `u = e^{ikx₁}·χ(k^{γ₁}x₁/ε)` on one piece, with x₁ measured along the tangent at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub kind: WitnessKind,
    pub k: T,
    pub epsilon: T,
    pub big_m: T,
    pub gamma1: T,
    /// Transverse exponent; inert in the plane.
    pub gamma2: T,
    pub piece: usize,
    pub origin_t: T,
    pub origin: Point<T>,
    pub axis: Point<T>,
    /// Piece parameters at `x₁ = −2s, −s, s, 2s` (s = cutoff scale).
    pub support_t: [T; 4],
    /// Piece parameters at `x₁ = Ms, 2Ms`.
    pub patch_t: [T; 2],
}

impl<T: Real> Witness<T> {
    /// `ε·k^{−γ₁}`.
    pub fn scale(&self) -> T {
        self.epsilon * self.k.powf(-self.gamma1)
    }

    /// x₁-interval of `supp u`.
    pub fn support(&self) -> (T, T) {
        let s = self.scale();
        (-T::lit(2.0) * s, T::lit(2.0) * s)
    }

    /// x₁-interval of the evaluation patch U.
    pub fn patch(&self) -> (T, T) {
        let s = self.scale();
        (self.big_m * s, T::lit(2.0) * self.big_m * s)
    }

    pub fn coordinate(&self, p: Point<T>) -> T {
        dot(sub(p, self.origin), self.axis)
    }

    /// `u` as a function of x₁.
    pub fn value(&self, x1: T) -> C<T> {
        let ph = self.k * x1;
        cplx(ph.cos(), ph.sin()) * cutoff(x1 / self.scale())
    }
}

fn check_common<T: Real>(k: T, big_m: T) -> Result<()> {
    if !(k > T::zero()) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    if !(big_m > T::lit(2.0)) {
        return Err(Error::Domain(format!(
            "M = {big_m} must exceed 2 to keep U off the support"
        )));
    }
    Ok(())
}

/// Parameter where `x₁(t) = target`, walking from `t0` while x₁ stays monotone.
fn invert<T: Real>(
    piece: &BoundaryPiece<T>,
    origin: Point<T>,
    axis: Point<T>,
    t0: T,
    target: T,
) -> Result<T> {
    let x1 = |t: T| dot(sub(piece.point(t), origin), axis);
    let dir = if target >= T::zero() {
        T::one()
    } else {
        -T::one()
    };
    let step = T::lit(1.0 / 512.0);
    let mut lo = t0;
    loop {
        let hi = lo + dir * step;
        let out = hi < T::zero() || hi > T::one();
        let hi = hi.max(T::zero()).min(T::one());
        let d = piece.derivatives(hi)[1];
        if dot(d, axis) <= T::zero() {
            break;
        }
        let v = x1(hi);
        if (v - target) * dir >= T::zero() {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = (a + b) / T::lit(2.0);
                if m == a || m == b {
                    break;
                }
                if (x1(m) - target) * dir >= T::zero() {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Ok((a + b) / T::lit(2.0));
        }
        if out || hi == lo {
            break;
        }
        lo = hi;
    }
    Err(Error::Domain(format!(
        "ε too large: x₁ = {target} is not reachable on the piece as a graph over its tangent"
    )))
}

fn build<T: Real>(
    kind: WitnessKind,
    piece_index: usize,
    piece: &BoundaryPiece<T>,
    origin_t: T,
    k: T,
    epsilon: T,
    big_m: T,
) -> Result<Witness<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    let e = piece.eval(origin_t);
    let (gamma1, gamma2) = match kind {
        WitnessKind::Flat => (T::zero(), T::lit(0.5)),
        WitnessKind::Curved => (T::lit(1.0 / 3.0), T::lit(2.0 / 3.0)),
    };
    let mut w = Witness {
        kind,
        k,
        epsilon,
        big_m,
        gamma1,
        gamma2,
        piece: piece_index,
        origin_t,
        origin: e.point,
        axis: e.tangent,
        support_t: [T::zero(); 4],
        patch_t: [T::zero(); 2],
    };
    let s = w.scale();
    let two = T::lit(2.0);
    for (slot, x) in w.support_t.iter_mut().zip([-two * s, -s, s, two * s]) {
        *slot = invert(piece, w.origin, w.axis, origin_t, x)?;
    }
    for (slot, x) in w.patch_t.iter_mut().zip([big_m * s, two * big_m * s]) {
        *slot = invert(piece, w.origin, w.axis, origin_t, x)?;
    }
    Ok(w)
}

/// Witness on the longest flat piece, placed so that supp u and U sit centred on it.
pub fn flat_witness<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    epsilon: Option<T>,
    big_m: T,
) -> Result<Witness<T>> {
    check_common(k, big_m)?;
    let (index, piece, len) = geometry
        .pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_flat)
        .map(|(i, p)| (i, p, p.length()))
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .ok_or_else(|| Error::Domain(format!("{} has no flat piece", geometry.name)))?;
    let eps = epsilon.unwrap_or(T::lit(DEFAULT_EPSILON_FRACTION) * len);
    if (T::lit(2.0) * big_m + T::lit(2.0)) * eps > len {
        return Err(Error::Domain(format!(
            "ε = {eps} too large: supp u and U need (2M + 2)ε ≤ {len}"
        )));
    }
    // Centre the x₁ range [−2ε, 2Mε] on the segment.
    let origin_t = T::lit(0.5) - (big_m - T::one()) * eps / len;
    build(WitnessKind::Flat, index, piece, origin_t, k, eps, big_m)
}

/// Witness centred at the midpoint of the first curved piece.
pub fn curved_witness<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    epsilon: Option<T>,
    big_m: T,
) -> Result<Witness<T>> {
    check_common(k, big_m)?;
    let (index, piece) = geometry
        .pieces
        .iter()
        .enumerate()
        .find(|(_, p)| p.is_curved)
        .ok_or_else(|| Error::Domain(format!("{} has no curved piece", geometry.name)))?;
    let origin_t = T::lit(0.5);
    let kappa = piece.eval(origin_t).curvature;
    let eps = epsilon.unwrap_or(T::lit(DEFAULT_EPSILON_FRACTION) / kappa);
    build(WitnessKind::Curved, index, piece, origin_t, k, eps, big_m)
}

/// Quadrature nodes per region giving about 10 points per wavelength, a multiple of 64.
pub fn default_witness_nodes<T: Real>(w: &Witness<T>) -> usize {
    let (a, b) = w.patch();
    let len = (b - a).max(T::lit(4.0) * w.scale());
    let want = (T::lit(10.0) * w.k * len / T::TAU()).ceil().to_f64_lossy() as usize;
    want.max(64).div_ceil(64) * 64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessRatios<T> {
    /// `‖S_k u‖_{L²(U)} / ‖u‖_{L²(Γ)}`
    pub r_l2: T,
    /// `‖∂_{x₁} S_k u‖_{L²(U)} / ‖u‖_{L²(Γ)}`
    pub r_h1: T,
    pub u_norm: T,
    pub nodes: usize,
}

struct QNode<T> {
    point: Point<T>,
    weight: T,
}

fn piece_rule<T: Real>(
    piece: &BoundaryPiece<T>,
    breaks: &[T],
    panels_per_gap: usize,
) -> Vec<QNode<T>> {
    let mut out = Vec::new();
    for gap in breaks.windows(2) {
        let (a, b) = (gap[0].min(gap[1]), gap[0].max(gap[1]));
        for p in 0..panels_per_gap {
            let lo = a + (b - a) * T::from_usize_lossy(p) / T::from_usize_lossy(panels_per_gap);
            let hi = a + (b - a) * T::from_usize_lossy(p + 1) / T::from_usize_lossy(panels_per_gap);
            let (x, wt) = gauss_on(ORDER, lo, hi);
            for (t, wt) in x.into_iter().zip(wt) {
                let e = piece.eval(t);
                out.push(QNode {
                    point: e.point,
                    weight: wt * e.jacobian,
                });
            }
        }
    }
    out
}

/// Ratios by direct quadrature of the single-layer integral, `n` nodes on each of supp u and U.
pub fn witness_ratios<T: Real>(
    w: &Witness<T>,
    geometry: &BoundaryGeometry<T>,
    n: usize,
) -> Result<WitnessRatios<T>> {
    let piece = geometry.pieces.get(w.piece).ok_or_else(|| {
        Error::Argument(format!(
            "witness piece {} not in {}",
            w.piece, geometry.name
        ))
    })?;
    let here = piece.point(w.origin_t);
    if norm(sub(here, w.origin)) > T::lit(1e-10) * (T::one() + norm(w.origin)) {
        return Err(Error::Argument(
            "witness was built on a different geometry".into(),
        ));
    }
    let n = n.div_ceil(4 * ORDER) * 4 * ORDER;
    let (a, b) = w.patch();
    for (len, what) in [(T::lit(4.0) * w.scale(), "supp u"), (b - a, "U")] {
        let ppw = T::TAU() * T::from_usize_lossy(n) / (w.k * len);
        if ppw < T::lit(MIN_PPW) {
            return Err(Error::UnderResolved(format!(
                "{n} nodes give {ppw:.2} points per wavelength on {what} at k = {}",
                w.k
            )));
        }
    }
    let src = piece_rule(
        piece,
        &[
            w.support_t[0],
            w.support_t[1],
            w.origin_t,
            w.support_t[2],
            w.support_t[3],
        ],
        n / (4 * ORDER),
    );
    let tgt = piece_rule(piece, &w.patch_t, n / ORDER);
    let u: Vec<C<T>> = src.iter().map(|q| w.value(w.coordinate(q.point))).collect();
    let u_norm = src
        .iter()
        .zip(&u)
        .map(|(q, v)| v.norm_sqr() * q.weight)
        .sum::<T>()
        .sqrt();
    let axis3 = [w.axis[0], w.axis[1], T::zero()];
    let sums: Vec<(T, T)> = tgt
        .par_iter()
        .map(|x| {
            let mut s = C::new(T::zero(), T::zero());
            let mut g = C::new(T::zero(), T::zero());
            for (y, uy) in src.iter().zip(&u) {
                let p = KernelPoint::planar(x.point, y.point, w.k);
                let f = *uy * y.weight;
                s += phi(&p).expect("U is disjoint from supp u") * f;
                g += grad_x_phi(&p, axis3).expect("U is disjoint from supp u") * f;
            }
            (s.norm_sqr() * x.weight, g.norm_sqr() * x.weight)
        })
        .collect();
    let sl2 = sums.iter().map(|s| s.0).sum::<T>().sqrt();
    let sh1 = sums.iter().map(|s| s.1).sum::<T>().sqrt();
    Ok(WitnessRatios {
        r_l2: sl2 / u_norm,
        r_h1: sh1 / u_norm,
        u_norm,
        nodes: n,
    })
}

/// Minimum angular node count for a Herglotz field evaluated within distance `reach` of the origin.
pub fn herglotz_nodes<T: Real>(r: T, reach: T) -> usize {
    8 * (r * reach).ceil().to_f64_lossy() as usize + 64
}

/// `T_r φ(x) = ∫_{|ξ|=r} φ(ξ) e^{i⟨x,ξ⟩} dσ(ξ)` by the trapezoidal rule in angle.
#[derive(Debug, Clone)]
pub struct Herglotz<T> {
    pub r: T,
    pub reach: T,
    pub nodes: usize,
    /// Frequencies with nonzero weight `φ(θ_j)·r·2π/n`.
    waves: Vec<(Point<T>, C<T>)>,
}

impl<T: Real> Herglotz<T> {
    fn sample(r: T, density: &impl Fn(T) -> C<T>, n: usize) -> Vec<(Point<T>, C<T>)> {
        let h = T::TAU() / T::from_usize_lossy(n);
        (0..n)
            .filter_map(|j| {
                let th = h * T::from_usize_lossy(j);
                let v = density(th);
                (v != C::new(T::zero(), T::zero()))
                    .then(|| ([r * th.cos(), r * th.sin()], v * (r * h)))
            })
            .collect()
    }

    fn eval(waves: &[(Point<T>, C<T>)], x: Point<T>) -> C<T> {
        waves
            .iter()
            .map(|(xi, a)| {
                let ph = dot(*xi, x);
                *a * cplx(ph.cos(), ph.sin())
            })
            .sum()
    }

    /// Samples `density(θ)` on the frequency circle of radius `r`, starting from
    /// [`herglotz_nodes`] and doubling until a further doubling moves the field at distance
    /// `reach` by at most 1e−10 relative. Refuses after 8 doublings.
    pub fn new(r: T, density: impl Fn(T) -> C<T>, reach: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::Domain(format!(
                "frequency radius must be positive, got {r}"
            )));
        }
        if !(reach >= T::zero()) || !reach.is_finite() {
            return Err(Error::Domain(format!(
                "reach must be finite and nonnegative, got {reach}"
            )));
        }
        let mut n = herglotz_nodes(r, reach);
        let mut waves = Self::sample(r, &density, n);
        let mut last = T::infinity();
        for _ in 0..8 {
            let fine = Self::sample(r, &density, 2 * n);
            let mass: T = fine.iter().map(|(_, a)| a.norm()).sum();
            last = (0..8)
                .map(|j| {
                    let a = T::TAU() * T::from_usize_lossy(j) / T::lit(8.0);
                    let x = [reach * a.cos(), reach * a.sin()];
                    (Self::eval(&waves, x) - Self::eval(&fine, x)).norm()
                })
                .fold(T::zero(), T::max)
                / mass.max(T::min_positive_value());
            if last <= T::lit(1e-10) {
                return Ok(Herglotz {
                    r,
                    reach,
                    nodes: n,
                    waves,
                });
            }
            n *= 2;
            waves = fine;
        }
        Err(Error::UnderResolved(format!(
            "Herglotz quadrature still moves by {last:e} relative at {n} nodes"
        )))
    }

    fn check(&self, x: Point<T>) -> Result<()> {
        if norm(x) > self.reach * (T::one() + T::lit(1e-9)) {
            return Err(Error::Range(format!(
                "|x| = {} beyond the resolved reach {}",
                norm(x),
                self.reach
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: Point<T>) -> Result<C<T>> {
        self.check(x)?;
        Ok(Self::eval(&self.waves, x))
    }

    pub fn gradient(&self, x: Point<T>) -> Result<[C<T>; 2]> {
        self.check(x)?;
        let mut g = [C::new(T::zero(), T::zero()); 2];
        for (xi, a) in &self.waves {
            let ph = dot(*xi, x);
            let v = *a * cplx(-ph.sin(), ph.cos());
            g[0] += v * xi[0];
            g[1] += v * xi[1];
        }
        Ok(g)
    }

    /// `‖T_r φ‖_{L²(B(0, ρ))}` in closed form:
    /// `∫_{B_ρ} e^{i⟨x,ζ⟩} dx = 2πρ J₁(ρ|ζ|)/|ζ|`.
    pub fn disk_norm(&self, rho: T) -> Result<T> {
        if rho > self.reach * (T::one() + T::lit(1e-9)) {
            return Err(Error::Range(format!(
                "disk radius {rho} beyond the resolved reach {}",
                self.reach
            )));
        }
        let area = T::PI() * rho * rho;
        let rows: Vec<Result<C<T>>> = self
            .waves
            .par_iter()
            .map(|(xj, aj)| {
                let mut s = C::new(T::zero(), T::zero());
                for (xl, al) in &self.waves {
                    let d = norm(sub(*xj, *xl));
                    let m = if d * rho < T::lit(1e-12) {
                        area
                    } else {
                        T::TAU() * rho * bessel_j(1, rho * d)? / d
                    };
                    s += *aj * al.conj() * m;
                }
                Ok(s)
            })
            .collect();
        let mut total = C::new(T::zero(), T::zero());
        for r in rows {
            total += r?;
        }
        Ok(total.re.max(T::zero()).sqrt())
    }
}

/// Single-point evaluation of `T_r φ(x)`.
pub fn herglotz<T: Real>(r: T, density: impl Fn(T) -> C<T>, x: Point<T>) -> Result<C<T>> {
    Herglotz::new(r, density, norm(x))?.value(x)
}

/// Wraps an angle difference into `(−π, π]`.
fn wrap<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let mut v = a % tau;
    if v > T::PI() {
        v -= tau;
    } else if v <= -T::PI() {
        v += tau;
    }
    v
}

/// Direction on the frequency circle where the quasimode density concentrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Focus {
    /// Along the tangent at the piece midpoint (glancing).
    Tangent,
    /// Along the normal at the midpoint. On a segment a tangential density is symmetric
    /// about the segment, so its normal derivative vanishes there identically.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictionSample<T> {
    pub r: T,
    pub focus: Focus,
    /// `‖u‖_{L²(Γ)}` with `‖u‖_{L²(B)} = 1`.
    pub trace: T,
    /// `‖∂_ν u‖_{L²(Γ)}` under the same normalization.
    pub normal_trace: T,
    /// Radius of the normalization disk B, centred at the piece midpoint.
    pub disk_radius: T,
}

/// Restriction of a concentrated Herglotz field to `piece`.
///
/// The density is `χ((θ − θ₀)/w)` with `w = r^{−width_exponent}` and θ₀ the tangent (or normal)
/// angle at the midpoint c; the field is `T_r φ(x − c)`, normalized on the disk `B(c, ρ)`
/// containing Γ.
pub fn quasimode_restriction<T: Real>(
    piece: &BoundaryPiece<T>,
    r: T,
    width_exponent: T,
    focus: Focus,
) -> Result<RestrictionSample<T>> {
    let mid = piece.eval(T::lit(0.5));
    let c = mid.point;
    let dir = match focus {
        Focus::Tangent => mid.tangent,
        Focus::Normal => mid.normal,
    };
    let theta0 = dir[1].atan2(dir[0]);
    let width = r.powf(-width_exponent);
    let density = |th: T| cplx(cutoff(wrap(th - theta0) / width), T::zero());
    let mut far = T::zero();
    for i in 0..=256 {
        far = far.max(norm(sub(
            piece.point(T::from_usize_lossy(i) / T::lit(256.0)),
            c,
        )));
    }
    let rho = T::lit(1.25) * far;
    let field = Herglotz::new(r, density, rho)?;
    let scale = field.disk_norm(rho)?;
    let len = piece.length();
    let panels = ((T::lit(10.0) * r * len / T::TAU() / T::from_usize_lossy(ORDER))
        .ceil()
        .to_f64_lossy() as usize)
        .max(4);
    let breaks: Vec<T> = vec![T::zero(), T::one()];
    let nodes = piece_rule(piece, &breaks, panels);
    let normals: Vec<Point<T>> = {
        let mut out = Vec::with_capacity(nodes.len());
        for p in 0..panels {
            let lo = T::from_usize_lossy(p) / T::from_usize_lossy(panels);
            let hi = T::from_usize_lossy(p + 1) / T::from_usize_lossy(panels);
            let (x, _) = gauss_on(ORDER, lo, hi);
            out.extend(x.into_iter().map(|t| piece.eval(t).normal));
        }
        out
    };
    let parts: Vec<Result<(T, T)>> = nodes
        .par_iter()
        .zip(&normals)
        .map(|(q, nu)| {
            let x = sub(q.point, c);
            let u = field.value(x)?;
            let g = field.gradient(x)?;
            let dn = g[0] * nu[0] + g[1] * nu[1];
            Ok((u.norm_sqr() * q.weight, dn.norm_sqr() * q.weight))
        })
        .collect();
    let (mut a, mut b) = (T::zero(), T::zero());
    for p in parts {
        let (x, y) = p?;
        a += x;
        b += y;
    }
    Ok(RestrictionSample {
        r,
        focus,
        trace: a.sqrt() / scale,
        normal_trace: b.sqrt() / scale,
        disk_radius: rho,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionGrowth<T> {
    /// Tangential density: the trace exponent.
    pub samples: Vec<RestrictionSample<T>>,
    /// Normal density: the normal-derivative exponent.
    pub normal_samples: Vec<RestrictionSample<T>>,
    pub trace_fit: Fit<T>,
    pub normal_fit: Fit<T>,
}

/// Pure-power growth exponents over `r_values` of `‖u‖_{L²(Γ)}` (tangential density) and of
/// `‖∂_ν u‖_{L²(Γ)}` (normal density).
pub fn restriction_growth<T: Real>(
    piece: &BoundaryPiece<T>,
    r_values: &[T],
    width_exponent: T,
) -> Result<RestrictionGrowth<T>> {
    if r_values.len() < 4 {
        return Err(Error::Argument(format!(
            "need at least 4 sweep points, got {}",
            r_values.len()
        )));
    }
    let sweep = |focus| {
        r_values
            .iter()
            .map(|&r| quasimode_restriction(piece, r, width_exponent, focus))
            .collect::<Result<Vec<_>>>()
    };
    let samples = sweep(Focus::Tangent)?;
    let normal_samples = sweep(Focus::Normal)?;
    let trace_fit = fit_exponent(
        &samples.iter().map(|s| (s.r, s.trace)).collect::<Vec<_>>(),
        FitModel::PurePower,
    )?;
    let normal_fit = fit_exponent(
        &normal_samples
            .iter()
            .map(|s| (s.r, s.normal_trace))
            .collect::<Vec<_>>(),
        FitModel::PurePower,
    )?;
    Ok(RestrictionGrowth {
        samples,
        normal_samples,
        trace_fit,
        normal_fit,
    })
}
