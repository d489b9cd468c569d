//! Nyström discretizations of the single-, double- and adjoint double-layer operators.
//!
//! Smooth closed curves use the periodic log-splitting quadrature of Kress on `N = 2n`
//! equispaced parameters. Boundaries with corners use 16-point Gauss–Legendre panels,
//! graded algebraically toward the corners, with dyadic refinement for nearby sources.
//! Operators act on nodal values; `mass` holds the quadrature weights.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sub, BoundaryGeometry, Point};
use crate::kernels::{phi2, phi2_dr};
use crate::linalg::{BlockDiag, CMat};
use crate::quadrature::{barycentric_weights, diff_matrix, gauss_legendre, lagrange_basis};
use crate::scalar::{cplx, Real, C};
use crate::specfun::jy01;

pub const PANEL_ORDER: usize = 16;
pub const GRADING_EXPONENT: i32 = 3;
pub const GRADED_SUBPANELS: usize = 4;
pub const DEFAULT_PPW: f64 = 10.0;
pub const MIN_PPW: f64 = 4.0;
pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Kress,
    Panel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    S,
    D,
    Dprime,
    ADirect,
    AIndirect,
    Custom,
}

impl OperatorKind {
    pub fn code(self) -> u32 {
        match self {
            OperatorKind::S => 0,
            OperatorKind::D => 1,
            OperatorKind::Dprime => 2,
            OperatorKind::ADirect => 3,
            OperatorKind::AIndirect => 4,
            OperatorKind::Custom => 5,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        Some(match c {
            0 => OperatorKind::S,
            1 => OperatorKind::D,
            2 => OperatorKind::Dprime,
            3 => OperatorKind::ADirect,
            4 => OperatorKind::AIndirect,
            5 => OperatorKind::Custom,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::S => "S",
            OperatorKind::D => "D",
            OperatorKind::Dprime => "Dprime",
            OperatorKind::ADirect => "Adirect",
            OperatorKind::AIndirect => "Aindirect",
            OperatorKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "S" => OperatorKind::S,
            "D" => OperatorKind::D,
            "Dprime" | "D'" => OperatorKind::Dprime,
            "Adirect" | "A_direct" => OperatorKind::ADirect,
            "Aindirect" | "A_indirect" => OperatorKind::AIndirect,
            other => return Err(Error::Config(format!("unknown operator kind `{other}`"))),
        })
    }

    pub fn is_double_layer(self) -> bool {
        !matches!(self, OperatorKind::S | OperatorKind::Custom)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node<T> {
    pub piece: usize,
    pub t: T,
    pub point: Point<T>,
    pub normal: Point<T>,
    pub weight: T,
    /// `|γ'(t)|` with respect to the piece parameter `t ∈ [0, 1]`.
    pub jacobian: T,
    pub curvature: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel<T> {
    pub piece: usize,
    pub t0: T,
    pub t1: T,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub id: u64,
    pub geometry: BoundaryGeometry<T>,
    pub nodes: Vec<Node<T>>,
    /// Diagonal of the mass matrix.
    pub mass: Vec<T>,
    /// Surface derivative, one block per piece (Kress) or per panel.
    pub diff: BlockDiag<T>,
    pub k: T,
    pub scheme: Scheme,
    pub panels: Vec<Panel<T>>,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

impl<T: Real> Discretization<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Equispaced nodes on a single periodic piece (the Fourier-based norms need this).
    pub fn is_equispaced_periodic(&self) -> bool {
        self.scheme == Scheme::Kress
    }
}

/// Node count for `ppw` points per wavelength, at least [`MIN_NODES`], rounded up to even.
pub fn default_n<T: Real>(geometry: &BoundaryGeometry<T>, k: T, ppw: f64) -> usize {
    let want = (T::lit(ppw) * k * geometry.length() / T::TAU())
        .ceil()
        .to_f64_lossy() as usize;
    let n = want.max(MIN_NODES);
    n + n % 2
}

/// Builds the node set. Smooth closed curves get the periodic scheme, others get panels.
pub fn discretize<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    n: usize,
) -> Result<Discretization<T>> {
    if !(k > T::zero()) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    if n < 4 {
        return Err(Error::Argument(format!("need at least 4 nodes, got {n}")));
    }
    let length = geometry.length();
    let ppw = T::TAU() * T::from_usize_lossy(n) / (k * length);
    if ppw < T::lit(MIN_PPW) {
        return Err(Error::UnderResolved(format!(
            "N = {n} gives {ppw:.2} points per wavelength at k = {k}; at least {MIN_PPW} required"
        )));
    }
    let disc = if geometry.classification.has_corners() {
        panel_discretization(geometry, k, n)
    } else {
        kress_discretization(geometry, k, n)
    };
    Ok(disc)
}

fn kress_discretization<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    n: usize,
) -> Discretization<T> {
    let big_n = n + n % 2;
    let piece = &geometry.pieces[0];
    let nf = T::from_usize_lossy(big_n);
    let h = T::TAU() / nf;
    let nodes: Vec<Node<T>> = (0..big_n)
        .map(|j| {
            let t = T::from_usize_lossy(j) / nf;
            let e = piece.eval(t);
            Node {
                piece: 0,
                t,
                point: e.point,
                normal: e.normal,
                weight: h * e.jacobian / T::TAU(),
                jacobian: e.jacobian,
                curvature: e.curvature,
            }
        })
        .collect();
    // Trigonometric differentiation in s = 2πt, then divided by the speed |dγ/ds|.
    let mut block = vec![T::zero(); big_n * big_n];
    for i in 0..big_n {
        let speed = nodes[i].jacobian / T::TAU();
        for j in 0..big_n {
            if i != j {
                let d = i as i64 - j as i64;
                let sign = if d.rem_euclid(2) == 0 {
                    T::one()
                } else {
                    -T::one()
                };
                let cot = T::one() / (T::from_i64(d).unwrap() * h / T::lit(2.0)).tan();
                block[i * big_n + j] = sign * cot / T::lit(2.0) / speed;
            }
        }
    }
    Discretization {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        geometry: geometry.clone(),
        mass: nodes.iter().map(|n| n.weight).collect(),
        nodes,
        diff: BlockDiag {
            blocks: vec![(0, big_n, block)],
            n: big_n,
        },
        k,
        scheme: Scheme::Kress,
        panels: vec![Panel {
            piece: 0,
            t0: T::zero(),
            t1: T::one(),
            offset: 0,
        }],
    }
}

/// Panel breakpoints on `[0, 1]`: `m` uniform panels, with the end panels at corners
/// split into algebraically graded sub-panels.
fn panel_breaks<T: Real>(m: usize, grade_start: bool, grade_end: bool) -> Vec<T> {
    let mf = T::from_usize_lossy(m);
    let g = GRADED_SUBPANELS;
    let gf = T::from_usize_lossy(g);
    let mut b = Vec::new();
    if grade_start {
        for j in 0..g {
            b.push((T::from_usize_lossy(j) / gf).powi(GRADING_EXPONENT) / mf);
        }
    } else {
        b.push(T::zero());
    }
    for l in 1..m {
        b.push(T::from_usize_lossy(l) / mf);
    }
    if grade_end {
        for j in (1..g).rev() {
            b.push(T::one() - (T::from_usize_lossy(j) / gf).powi(GRADING_EXPONENT) / mf);
        }
    }
    b.push(T::one());
    b
}

fn panel_discretization<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    n: usize,
) -> Discretization<T> {
    let pieces = geometry.pieces.len();
    let corners = geometry.corners();
    let corner_at_start = |i: usize| corners.iter().any(|c| c.piece == i);
    let per_piece = 2 * n.div_ceil(pieces);
    let m = per_piece.div_ceil(PANEL_ORDER).max(2);
    let (gx, gw) = gauss_legendre::<T>(PANEL_ORDER);
    let mut nodes = Vec::new();
    let mut panels = Vec::new();
    let mut blocks = Vec::new();
    for (pi, piece) in geometry.pieces.iter().enumerate() {
        let breaks = panel_breaks::<T>(m, corner_at_start(pi), corner_at_start((pi + 1) % pieces));
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = (b - a) / T::lit(2.0);
            let offset = nodes.len();
            let ts: Vec<T> = gx
                .iter()
                .map(|&x| (a + b) / T::lit(2.0) + half * x)
                .collect();
            for (q, &t) in ts.iter().enumerate() {
                let e = piece.eval(t);
                nodes.push(Node {
                    piece: pi,
                    t,
                    point: e.point,
                    normal: e.normal,
                    weight: gw[q] * half * e.jacobian,
                    jacobian: e.jacobian,
                    curvature: e.curvature,
                });
            }
            let mut dm = diff_matrix(&ts);
            for i in 0..PANEL_ORDER {
                let jac = nodes[offset + i].jacobian;
                for v in &mut dm[i * PANEL_ORDER..(i + 1) * PANEL_ORDER] {
                    *v /= jac;
                }
            }
            blocks.push((offset, PANEL_ORDER, dm));
            panels.push(Panel {
                piece: pi,
                t0: a,
                t1: b,
                offset,
            });
        }
    }
    let total = nodes.len();
    Discretization {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        geometry: geometry.clone(),
        mass: nodes.iter().map(|n| n.weight).collect(),
        nodes,
        diff: BlockDiag { blocks, n: total },
        k,
        scheme: Scheme::Panel,
        panels,
    }
}

#[derive(Debug, Clone)]
pub struct DenseOperator<T> {
    pub matrix: CMat<T>,
    pub kind: OperatorKind,
    pub k: T,
    pub eta: Option<T>,
    pub discretization: u64,
    /// Tangential derivative of the output at the nodes, when assembled directly.
    pub gradient: Option<CMat<T>>,
}

impl<T: Real> DenseOperator<T> {
    pub fn n(&self) -> usize {
        self.matrix.rows
    }

    /// `W^{1/2} A W^{-1/2}`: the matrix of the operator in an orthonormal nodal basis.
    pub fn symmetrized(&self, disc: &Discretization<T>) -> CMat<T> {
        let s: Vec<T> = disc.mass.iter().map(|w| w.sqrt()).collect();
        let inv: Vec<T> = s.iter().map(|w| T::one() / *w).collect();
        self.matrix.scale_rows(&s).scale_cols(&inv)
    }
}

/// Discretizes and assembles one of S, D, D′.
pub fn assemble<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    n: usize,
    kind: OperatorKind,
) -> Result<(Discretization<T>, DenseOperator<T>)> {
    check_kind(geometry, kind)?;
    let disc = discretize(geometry, k, n)?;
    let op = assemble_on(&disc, kind)?;
    Ok((disc, op))
}

fn check_kind<T: Real>(geometry: &BoundaryGeometry<T>, kind: OperatorKind) -> Result<()> {
    if kind.is_double_layer() && geometry.classification.has_corners() {
        return Err(Error::UnsupportedRegularity(format!(
            "{kind} maps L² to H¹ only on C^{{2,α}} boundaries; {} has corners",
            geometry.name
        )));
    }
    Ok(())
}

/// Assembles S, D, D′ (or a combined operator with η = k) on an existing discretization.
pub fn assemble_on<T: Real>(
    disc: &Discretization<T>,
    kind: OperatorKind,
) -> Result<DenseOperator<T>> {
    check_kind(&disc.geometry, kind)?;
    let mut gradient = None;
    let matrix = match (kind, disc.scheme) {
        (OperatorKind::S | OperatorKind::D | OperatorKind::Dprime, Scheme::Kress) => {
            kress_matrix(disc, kind)
        }
        (OperatorKind::S, Scheme::Panel) => {
            gradient = Some(panel_single_layer_gradient(disc));
            panel_single_layer(disc)
        }
        (OperatorKind::ADirect | OperatorKind::AIndirect, _) => {
            return combined_on(disc, disc.k, kind == OperatorKind::ADirect);
        }
        (OperatorKind::Custom, _) => {
            return Err(Error::Argument("custom operators are not assembled".into()))
        }
        _ => unreachable!("double-layer kinds on panels are rejected above"),
    };
    Ok(DenseOperator {
        matrix,
        kind,
        k: disc.k,
        eta: None,
        discretization: disc.id,
        gradient,
    })
}

/// Weights `R_d` of the periodic log quadrature and `log(4 sin²(dπ/2n))`, indexed by `d = |i − j|`.
pub fn kress_tables<T: Real>(big_n: usize) -> (Vec<T>, Vec<T>) {
    let n = big_n / 2;
    let nf = T::from_usize_lossy(n);
    let pi = T::PI();
    let r = (0..big_n)
        .map(|d| {
            let mut s = T::zero();
            for m in 1..n {
                let arg = T::from_usize_lossy((m * d) % big_n) * pi / nf;
                s += arg.cos() / T::from_usize_lossy(m);
            }
            let alt = if d % 2 == 0 { T::one() } else { -T::one() };
            -(T::lit(2.0) * pi / nf) * s - pi / (nf * nf) * alt
        })
        .collect();
    let logs = (0..big_n)
        .map(|d| {
            if d == 0 {
                T::zero()
            } else {
                let s = (T::from_usize_lossy(d) * pi / (T::lit(2.0) * nf)).sin();
                (T::lit(4.0) * s * s).ln()
            }
        })
        .collect();
    (r, logs)
}

fn kress_matrix<T: Real>(disc: &Discretization<T>, kind: OperatorKind) -> CMat<T> {
    let big_n = disc.len();
    let (rw, logs) = kress_tables::<T>(big_n);
    let h = T::TAU() / T::from_usize_lossy(big_n);
    let k = disc.k;
    let four_pi = T::lit(4.0) * T::PI();
    let quarter = T::lit(0.25);
    let nodes = &disc.nodes;
    CMat::from_rows(big_n, big_n, |i, row| {
        let x = &nodes[i];
        for (j, out) in row.iter_mut().enumerate() {
            let y = &nodes[j];
            let speed = y.jacobian / T::TAU();
            let d = i.abs_diff(j);
            if i == j {
                *out = match kind {
                    OperatorKind::S => {
                        let m1 = -speed / four_pi;
                        let m2 = cplx(
                            -(T::euler_gamma() + (k * speed / T::lit(2.0)).ln()) / T::TAU(),
                            quarter,
                        ) * speed;
                        cplx(rw[0] * m1, T::zero()) + m2 * h
                    }
                    _ => cplx(-h * x.curvature * speed / four_pi, T::zero()),
                };
                continue;
            }
            let diff = sub(x.point, y.point);
            let r = norm(diff);
            let (j0, j1, y0, y1) = jy01(k * r);
            *out = match kind {
                OperatorKind::S => {
                    let m = cplx(-y0, j0) * (quarter * speed);
                    let m1 = -j0 * speed / four_pi;
                    cplx(rw[d] * m1, T::zero()) + (m - cplx(m1 * logs[d], T::zero())) * h
                }
                _ => {
                    let ip = if kind == OperatorKind::D {
                        dot(diff, y.normal)
                    } else {
                        -dot(diff, x.normal)
                    } / r;
                    let l = cplx(-y1, j1) * (k * quarter * ip * speed);
                    let l1 = -k * j1 * ip * speed / four_pi;
                    cplx(rw[d] * l1, T::zero()) + (l - cplx(l1 * logs[d], T::zero())) * h
                }
            };
        }
    })
}

/// Nearest parameter on a panel to `x`, by sampling then golden-section refinement.
fn nearest_parameter<T: Real>(disc: &Discretization<T>, p: &Panel<T>, x: Point<T>) -> T {
    let piece = &disc.geometry.pieces[p.piece];
    let samples = 32;
    let dist = |t: T| norm(sub(piece.point(t), x));
    let step = (p.t1 - p.t0) / T::from_usize_lossy(samples);
    let mut best = 0;
    let mut best_d = T::infinity();
    for s in 0..=samples {
        let d = dist(p.t0 + step * T::from_usize_lossy(s));
        if d < best_d {
            best_d = d;
            best = s;
        }
    }
    let mut lo = (p.t0 + step * T::from_usize_lossy(best.saturating_sub(1))).max(p.t0);
    let mut hi = (p.t0 + step * T::from_usize_lossy(best + 1)).min(p.t1);
    let g = T::lit(0.618_033_988_749_894_8);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// `∫_panel κ(x − γ(t)) L_j(t) |γ'(t)| dt` for every Lagrange basis function `L_j` of the
/// panel, with dyadic refinement toward the parameter `tau` closest to `x`. `diff(t)` is
/// `x − γ(t)`. With `cauchy = Some((j, c))` the target sits at `tau` on this panel and
/// `c/(tau − t)` is taken out of basis `j` and integrated in closed form.
#[allow(clippy::too_many_arguments)]
fn near_panel_integrals<T: Real>(
    disc: &Discretization<T>,
    p: &Panel<T>,
    diff: &dyn Fn(T) -> Point<T>,
    kernel: &dyn Fn(Point<T>) -> C<T>,
    tau: T,
    cauchy: Option<(usize, T)>,
    ts: &[T],
    bw: &[T],
    rule: &(Vec<T>, Vec<T>),
) -> Vec<C<T>> {
    let piece = &disc.geometry.pieces[p.piece];
    let mut acc = vec![cplx(T::zero(), T::zero()); ts.len()];
    let integrate = |a: T, b: T, acc: &mut Vec<C<T>>| {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        for (&gx, &gw) in rule.0.iter().zip(&rule.1) {
            let t = mid + half * gx;
            let d = diff(t);
            if d[0] == T::zero() && d[1] == T::zero() {
                continue;
            }
            let w = gw * half;
            let f = kernel(d) * (w * piece.eval(t).jacobian);
            for (a, l) in acc.iter_mut().zip(lagrange_basis(ts, bw, t)) {
                *a += f * l;
            }
            if let Some((j, c)) = cauchy {
                acc[j] -= cplx(c * w / (tau - t), T::zero());
            }
        }
    };
    let gap = norm(diff(tau));
    let max_jac = ts
        .iter()
        .map(|&t| piece.eval(t).jacobian)
        .fold(T::zero(), T::max);
    let floor = (p.t1 - p.t0) * T::epsilon();
    for (end, dir) in [(p.t0, -T::one()), (p.t1, T::one())] {
        let mut len = (end - tau) * dir;
        if len <= T::zero() {
            continue;
        }
        loop {
            if len <= floor || (gap > T::zero() && len * max_jac < T::lit(0.25) * gap) {
                let (a, b) = if dir > T::zero() {
                    (tau, tau + len)
                } else {
                    (tau - len, tau)
                };
                if gap > T::zero() {
                    integrate(a, b, &mut acc);
                }
                break;
            }
            let half = len / T::lit(2.0);
            let (a, b) = if dir > T::zero() {
                (tau + half, tau + len)
            } else {
                (tau - len, tau - half)
            };
            integrate(a, b, &mut acc);
            len = half;
        }
    }
    if let Some((j, c)) = cauchy {
        acc[j] += cplx(c * ((tau - p.t0) / (p.t1 - tau)).ln(), T::zero());
    }
    acc
}

/// Matrix of `u ↦ ∫ κ_i(x_i − y) u(y) ds_y` on a panel discretization. `cauchy` is the
/// coefficient of the `1/(σ − t)` singularity of `κ·|γ'|` on a target's own panel.
fn panel_matrix<T: Real>(
    disc: &Discretization<T>,
    kernel: &(dyn Fn(usize, Point<T>) -> C<T> + Sync),
    cauchy: Option<T>,
) -> CMat<T> {
    let n = disc.len();
    let rule = gauss_legendre::<T>(PANEL_ORDER);
    let panel_nodes: Vec<Vec<T>> = disc
        .panels
        .iter()
        .map(|p| {
            (0..PANEL_ORDER)
                .map(|q| disc.nodes[p.offset + q].t)
                .collect()
        })
        .collect();
    let panel_bw: Vec<Vec<T>> = panel_nodes
        .iter()
        .map(|ts| barycentric_weights(ts))
        .collect();
    let panel_len: Vec<T> = disc
        .panels
        .iter()
        .map(|p| {
            disc.mass[p.offset..p.offset + PANEL_ORDER]
                .iter()
                .copied()
                .sum()
        })
        .collect();
    CMat::from_rows(n, n, |i, row| {
        let xi = &disc.nodes[i];
        let x = xi.point;
        for (pi, p) in disc.panels.iter().enumerate() {
            let own = i >= p.offset && i < p.offset + PANEL_ORDER;
            let piece = &disc.geometry.pieces[p.piece];
            let diff = |t: T| {
                if xi.piece == p.piece {
                    piece.chord(xi.t, t)
                } else {
                    sub(x, piece.point(t))
                }
            };
            let mut dist = norm(diff(p.t0)).min(norm(diff(p.t1)));
            for q in 0..PANEL_ORDER {
                dist = dist.min(norm(diff(disc.nodes[p.offset + q].t)));
            }
            if !own && dist >= panel_len[pi] {
                for q in 0..PANEL_ORDER {
                    let y = &disc.nodes[p.offset + q];
                    row[p.offset + q] = kernel(i, diff(y.t)) * y.weight;
                }
                continue;
            }
            let tau = if own {
                xi.t
            } else {
                nearest_parameter(disc, p, x)
            };
            let singular = if own {
                cauchy.map(|c| (i - p.offset, c))
            } else {
                None
            };
            let vals = near_panel_integrals(
                disc,
                p,
                &diff,
                &|d| kernel(i, d),
                tau,
                singular,
                &panel_nodes[pi],
                &panel_bw[pi],
                &rule,
            );
            row[p.offset..p.offset + PANEL_ORDER].copy_from_slice(&vals);
        }
    })
}

fn panel_single_layer<T: Real>(disc: &Discretization<T>) -> CMat<T> {
    let k = disc.k;
    panel_matrix(disc, &|_, d| phi2(k, norm(d)), None)
}

/// Tangential derivative of the single layer at the nodes, `∂_{s_x} S u`, assembled from the
/// kernel `∂_r Φ · ⟨x − y, τ_x⟩ / r`. Differentiating `S u_h` piecewise instead loses accuracy
/// because `u_h` jumps between panels.
fn panel_single_layer_gradient<T: Real>(disc: &Discretization<T>) -> CMat<T> {
    let k = disc.k;
    let tangents: Vec<Point<T>> = disc
        .nodes
        .iter()
        .map(|nd| {
            let e = disc.geometry.pieces[nd.piece].eval(nd.t);
            e.tangent
        })
        .collect();
    let c = -T::one() / T::TAU();
    panel_matrix(
        disc,
        &|i, d| {
            let r = norm(d);
            phi2_dr(k, r) * (dot(d, tangents[i]) / r)
        },
        Some(c),
    )
}

/// `½I + K − iηS` where `K` is D′ (direct) or D (indirect).
pub fn combine<T: Real>(
    s: &DenseOperator<T>,
    double_layer: &DenseOperator<T>,
    eta: T,
    direct: bool,
) -> Result<DenseOperator<T>> {
    if eta == T::zero() || !eta.is_finite() {
        return Err(Error::Domain(
            "coupling parameter η must be a nonzero real".into(),
        ));
    }
    let want = if direct {
        OperatorKind::Dprime
    } else {
        OperatorKind::D
    };
    if s.kind != OperatorKind::S || double_layer.kind != want {
        return Err(Error::Argument(format!(
            "combined operator needs S and {want}, got {} and {}",
            s.kind, double_layer.kind
        )));
    }
    if s.discretization != double_layer.discretization || s.n() != double_layer.n() {
        return Err(Error::Argument(
            "operators live on different discretizations".into(),
        ));
    }
    let mut matrix =
        double_layer
            .matrix
            .lincomb(cplx(T::one(), T::zero()), &s.matrix, cplx(T::zero(), -eta));
    let half = cplx(T::lit(0.5), T::zero());
    for i in 0..matrix.rows {
        let v = matrix.get(i, i);
        matrix.set(i, i, v + half);
    }
    Ok(DenseOperator {
        matrix,
        kind: if direct {
            OperatorKind::ADirect
        } else {
            OperatorKind::AIndirect
        },
        k: s.k,
        eta: Some(eta),
        discretization: s.discretization,
        gradient: None,
    })
}

fn combined_on<T: Real>(
    disc: &Discretization<T>,
    eta: T,
    direct: bool,
) -> Result<DenseOperator<T>> {
    let s = assemble_on(disc, OperatorKind::S)?;
    let dl = assemble_on(
        disc,
        if direct {
            OperatorKind::Dprime
        } else {
            OperatorKind::D
        },
    )?;
    combine(&s, &dl, eta, direct)
}

/// `A′_{k,η} = ½I + D′ − iηS` (direct) or `A_{k,η} = ½I + D − iηS` (indirect).
pub fn assemble_combined<T: Real>(
    geometry: &BoundaryGeometry<T>,
    k: T,
    n: usize,
    eta: T,
    direct: bool,
) -> Result<(Discretization<T>, DenseOperator<T>)> {
    if eta == T::zero() || !eta.is_finite() {
        return Err(Error::Domain(
            "coupling parameter η must be a nonzero real".into(),
        ));
    }
    check_kind(geometry, OperatorKind::D)?;
    let disc = discretize(geometry, k, n)?;
    let op = combined_on(&disc, eta, direct)?;
    Ok((disc, op))
}

const DUMP_MAGIC: &[u8; 4] = b"HNRM";

/// Writes `HNRM`, u32 N, u32 kind code, then N² little-endian f64 (re, im) pairs, row-major.
pub fn write_dump<T: Real, W: Write>(op: &DenseOperator<T>, mut out: W) -> Result<()> {
    let n = op.n();
    let mut buf = Vec::with_capacity(16 + 16 * n * n);
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&op.kind.code().to_le_bytes());
    buf.extend_from_slice(&[0u8; 4]);
    for v in &op.matrix.data {
        buf.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
        buf.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<(OperatorKind, CMat<f64>)> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(Error::Argument("not a matrix dump (bad magic)".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let code = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let kind = OperatorKind::from_code(code)
        .ok_or_else(|| Error::Argument(format!("unknown kind code {code}")))?;
    let mut body = vec![0u8; 16 * n * n];
    input.read_exact(&mut body)?;
    let data = body
        .chunks_exact(16)
        .map(|c| {
            C::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((
        kind,
        CMat {
            rows: n,
            cols: n,
            data,
        },
    ))
}

pub fn dump_to_path<T: Real>(op: &DenseOperator<T>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_dump(op, std::io::BufWriter::new(f))
}
