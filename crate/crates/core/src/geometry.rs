//! Piecewise smooth closed boundaries in the plane.
//!
//! Every piece is parametrized over `t ∈ [0, 1]`, boundaries run counter-clockwise and
//! the normal `(y', −x')/|γ'|` points out of the enclosed domain.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::gauss_on;
use crate::scalar::Real;

pub type Point<T> = [T; 2];

#[inline]
pub(crate) fn sub<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot<T: Real>(a: Point<T>, b: Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm<T: Real>(a: Point<T>) -> T {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T> {
    Segment {
        a: Point<T>,
        b: Point<T>,
    },
    /// Arc of a circle from angle `theta0` to `theta1` (a full circle when they differ by 2π).
    Arc {
        center: Point<T>,
        radius: T,
        theta0: T,
        theta1: T,
    },
    Ellipse {
        a: T,
        b: T,
    },
    /// `(cos s + fold·cos 2s − fold, height·sin s)`, `s = 2πt`.
    Kite {
        fold: T,
        height: T,
    },
}

/// Rotation by `angle` followed by translation by `shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid<T> {
    pub cos: T,
    pub sin: T,
    pub shift: Point<T>,
}

impl<T: Real> Rigid<T> {
    pub fn identity() -> Self {
        Rigid {
            cos: T::one(),
            sin: T::zero(),
            shift: [T::zero(), T::zero()],
        }
    }

    pub fn new(angle: T, shift: Point<T>) -> Self {
        Rigid {
            cos: angle.cos(),
            sin: angle.sin(),
            shift,
        }
    }

    #[inline]
    pub fn rotate(&self, v: Point<T>) -> Point<T> {
        [
            self.cos * v[0] - self.sin * v[1],
            self.sin * v[0] + self.cos * v[1],
        ]
    }

    #[inline]
    pub fn apply(&self, p: Point<T>) -> Point<T> {
        let r = self.rotate(p);
        [r[0] + self.shift[0], r[1] + self.shift[1]]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Rigid<T>) -> Rigid<T> {
        Rigid {
            cos: self.cos * other.cos - self.sin * other.sin,
            sin: self.sin * other.cos + self.cos * other.sin,
            shift: self.apply(other.shift),
        }
    }
}

/// Geometric data at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PieceEval<T> {
    pub point: Point<T>,
    pub tangent: Point<T>,
    pub normal: Point<T>,
    /// `|γ'(t)|` with respect to `t ∈ [0, 1]`.
    pub jacobian: T,
    pub curvature: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPiece<T> {
    pub shape: Shape<T>,
    pub reversed: bool,
    pub rigid: Rigid<T>,
    pub is_flat: bool,
    pub is_curved: bool,
}

impl<T: Real> BoundaryPiece<T> {
    pub fn new(shape: Shape<T>) -> Self {
        let mut p = BoundaryPiece {
            shape,
            reversed: false,
            rigid: Rigid::identity(),
            is_flat: false,
            is_curved: false,
        };
        p.refresh_flags();
        p
    }

    fn refresh_flags(&mut self) {
        let (flat, curved) = self.sample_flags(1000);
        self.is_flat = flat;
        self.is_curved = curved;
    }

    /// Flatness and strict positive curvature judged from `samples` equispaced parameters.
    pub fn sample_flags(&self, samples: usize) -> (bool, bool) {
        if let Shape::Segment { .. } = self.shape {
            return (true, false);
        }
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for i in 0..samples {
            let t = T::from_usize_lossy(i) / T::from_usize_lossy(samples - 1);
            let k = self.eval(t).curvature;
            lo = lo.min(k);
            hi = hi.max(k.abs());
        }
        (hi == T::zero(), lo > T::zero())
    }

    /// Closed single-curve shapes whose two endpoints join smoothly.
    pub fn is_periodic(&self) -> bool {
        match self.shape {
            Shape::Segment { .. } => false,
            Shape::Arc { theta0, theta1, .. } => {
                ((theta1 - theta0).abs() - T::TAU()).abs() <= T::lit(1e-12)
            }
            Shape::Ellipse { .. } | Shape::Kite { .. } => true,
        }
    }

    /// Position and the first two derivatives in the raw (unreversed, untransformed) frame.
    fn raw(&self, t: T) -> [Point<T>; 3] {
        let tau = T::TAU();
        match self.shape {
            Shape::Segment { a, b } => {
                let d = sub(b, a);
                [
                    [a[0] + t * d[0], a[1] + t * d[1]],
                    d,
                    [T::zero(), T::zero()],
                ]
            }
            Shape::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let w = theta1 - theta0;
                let th = theta0 + w * t;
                let (s, c) = th.sin_cos();
                [
                    [center[0] + radius * c, center[1] + radius * s],
                    [-radius * w * s, radius * w * c],
                    [-radius * w * w * c, -radius * w * w * s],
                ]
            }
            Shape::Ellipse { a, b } => {
                let (s, c) = (tau * t).sin_cos();
                [
                    [a * c, b * s],
                    [-a * tau * s, b * tau * c],
                    [-a * tau * tau * c, -b * tau * tau * s],
                ]
            }
            Shape::Kite { fold, height } => {
                let th = tau * t;
                let (s, c) = th.sin_cos();
                let (s2, c2) = (T::lit(2.0) * th).sin_cos();
                let two = T::lit(2.0);
                let four = T::lit(4.0);
                [
                    [c + fold * c2 - fold, height * s],
                    [tau * (-s - two * fold * s2), tau * height * c],
                    [tau * tau * (-c - four * fold * c2), -tau * tau * height * s],
                ]
            }
        }
    }

    /// Position, γ' and γ'' at parameter `t`, with orientation and rigid motion applied.
    pub fn derivatives(&self, t: T) -> [Point<T>; 3] {
        let (tt, sign) = if self.reversed {
            (T::one() - t, -T::one())
        } else {
            (t, T::one())
        };
        let [p, d1, d2] = self.raw(tt);
        let d1 = [sign * d1[0], sign * d1[1]];
        [
            self.rigid.apply(p),
            self.rigid.rotate(d1),
            self.rigid.rotate(d2),
        ]
    }

    pub fn eval(&self, t: T) -> PieceEval<T> {
        let [point, d1, d2] = self.derivatives(t);
        let jacobian = norm(d1);
        let tangent = [d1[0] / jacobian, d1[1] / jacobian];
        let normal = [tangent[1], -tangent[0]];
        let curvature = (d1[0] * d2[1] - d1[1] * d2[0]) / (jacobian * jacobian * jacobian);
        PieceEval {
            point,
            tangent,
            normal,
            jacobian,
            curvature,
        }
    }

    pub fn point(&self, t: T) -> Point<T> {
        self.derivatives(t)[0]
    }

    /// `γ(s) − γ(t)` without the cancellation of subtracting two points.
    pub fn chord(&self, s: T, t: T) -> Point<T> {
        let two = T::lit(2.0);
        let (d, m) = if self.reversed {
            (t - s, two - s - t)
        } else {
            (s - t, s + t)
        };
        // cos u − cos v and sin u − sin v from the half difference h and half sum c.
        let trig = |h: T, c: T| {
            let sh = h.sin();
            let (sc, cc) = c.sin_cos();
            [-two * sc * sh, two * cc * sh]
        };
        let raw = match self.shape {
            Shape::Segment { a, b } => [d * (b[0] - a[0]), d * (b[1] - a[1])],
            Shape::Arc {
                radius,
                theta0,
                theta1,
                ..
            } => {
                let w = theta1 - theta0;
                let [dc, ds] = trig(w * d / two, theta0 + w * m / two);
                [radius * dc, radius * ds]
            }
            Shape::Ellipse { a, b } => {
                let tau = T::TAU();
                let [dc, ds] = trig(tau * d / two, tau * m / two);
                [a * dc, b * ds]
            }
            Shape::Kite { fold, height } => {
                let tau = T::TAU();
                let [dc, ds] = trig(tau * d / two, tau * m / two);
                let [dc2, _] = trig(tau * d, tau * m);
                [dc + fold * dc2, height * ds]
            }
        };
        self.rigid.rotate(raw)
    }

    pub fn length(&self) -> T {
        let mut total = T::zero();
        let panels = 32;
        for p in 0..panels {
            let a = T::from_usize_lossy(p) / T::from_usize_lossy(panels);
            let b = T::from_usize_lossy(p + 1) / T::from_usize_lossy(panels);
            let (x, w) = gauss_on(20, a, b);
            for (t, w) in x.into_iter().zip(w) {
                total += w * self.eval(t).jacobian;
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Classification {
    SmoothCurved,
    Smooth,
    PiecewiseCurved,
    PiecewiseSmooth,
}

impl Classification {
    pub fn has_corners(self) -> bool {
        matches!(
            self,
            Classification::PiecewiseCurved | Classification::PiecewiseSmooth
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::SmoothCurved => "smooth_curved",
            Classification::Smooth => "smooth",
            Classification::PiecewiseCurved => "piecewise_curved",
            Classification::PiecewiseSmooth => "piecewise_smooth",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner<T> {
    /// Index of the piece that starts at the corner.
    pub piece: usize,
    pub point: Point<T>,
    pub interior_angle: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry<T> {
    pub name: String,
    pub pieces: Vec<BoundaryPiece<T>>,
    pub closed: bool,
    pub classification: Classification,
}

/// Classification implied by per-piece flags.
pub fn classify<T: Real>(pieces: &[BoundaryPiece<T>]) -> Classification {
    let curved = pieces.iter().all(|p| p.is_curved);
    if pieces.len() == 1 && pieces[0].is_periodic() {
        if curved {
            Classification::SmoothCurved
        } else {
            Classification::Smooth
        }
    } else if curved {
        Classification::PiecewiseCurved
    } else {
        Classification::PiecewiseSmooth
    }
}

impl<T: Real> BoundaryGeometry<T> {
    /// Validates continuity, closure and simplicity, then classifies.
    pub fn from_pieces(name: &str, pieces: Vec<BoundaryPiece<T>>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Domain("geometry needs at least one piece".into()));
        }
        let scale = pieces
            .iter()
            .map(|p| norm(p.point(T::zero())))
            .fold(T::one(), T::max);
        let tol = T::lit(1e-12) * scale;
        let n = pieces.len();
        for i in 0..n {
            let end = pieces[i].point(T::one());
            let start = pieces[(i + 1) % n].point(T::zero());
            if norm(sub(end, start)) > tol {
                return Err(Error::Domain(format!(
                    "piece {i} does not meet piece {}",
                    (i + 1) % n
                )));
            }
        }
        let g = BoundaryGeometry {
            name: name.to_string(),
            classification: classify(&pieces),
            pieces,
            closed: true,
        };
        g.check_simple()?;
        Ok(g)
    }

    /// Pairwise chord test on a fine polyline with bounding-box rejection.
    fn check_simple(&self) -> Result<()> {
        let per = 128;
        let mut pts = Vec::new();
        for p in &self.pieces {
            for i in 0..per {
                pts.push(p.point(T::from_usize_lossy(i) / T::from_usize_lossy(per)));
            }
        }
        let m = pts.len();
        let seg = |i: usize| (pts[i], pts[(i + 1) % m]);
        for i in 0..m {
            let (a, b) = seg(i);
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let (c, d) = seg(j);
                if a[0].max(b[0]) < c[0].min(d[0])
                    || c[0].max(d[0]) < a[0].min(b[0])
                    || a[1].max(b[1]) < c[1].min(d[1])
                    || c[1].max(d[1]) < a[1].min(b[1])
                {
                    continue;
                }
                let o = |p: Point<T>, q: Point<T>, r: Point<T>| {
                    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
                };
                let d1 = o(a, b, c);
                let d2 = o(a, b, d);
                let d3 = o(c, d, a);
                let d4 = o(c, d, b);
                if d1 * d2 < T::zero() && d3 * d4 < T::zero() {
                    return Err(Error::Domain(format!("{} is self-intersecting", self.name)));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, piece: usize, t: T) -> Result<PieceEval<T>> {
        let p = self
            .pieces
            .get(piece)
            .ok_or_else(|| Error::Range(format!("piece index {piece} out of range")))?;
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::Range(format!("parameter {t} outside [0, 1]")));
        }
        Ok(p.eval(t))
    }

    pub fn length(&self) -> T {
        self.pieces.iter().map(|p| p.length()).sum()
    }

    pub fn corners(&self) -> Vec<Corner<T>> {
        let n = self.pieces.len();
        if n == 1 && self.pieces[0].is_periodic() {
            return Vec::new();
        }
        (0..n)
            .filter_map(|i| {
                let prev = self.pieces[(i + n - 1) % n].eval(T::one());
                let next = self.pieces[i].eval(T::zero());
                let cross = prev.tangent[0] * next.tangent[1] - prev.tangent[1] * next.tangent[0];
                let turn = cross.atan2(dot(prev.tangent, next.tangent));
                if turn.abs() <= T::lit(1e-12) {
                    None
                } else {
                    Some(Corner {
                        piece: i,
                        point: next.point,
                        interior_angle: T::PI() - turn,
                    })
                }
            })
            .collect()
    }

    /// Same curve traversed the other way; normals and signed curvature flip.
    pub fn reversed(&self) -> Self {
        let mut pieces: Vec<_> = self.pieces.iter().rev().cloned().collect();
        for p in &mut pieces {
            p.reversed = !p.reversed;
            p.refresh_flags();
        }
        BoundaryGeometry {
            name: format!("{}-reversed", self.name),
            classification: classify(&pieces),
            pieces,
            closed: self.closed,
        }
    }

    pub fn transformed(&self, rigid: Rigid<T>) -> Self {
        let mut g = self.clone();
        for p in &mut g.pieces {
            p.rigid = rigid.compose(&p.rigid);
        }
        g
    }
}

pub fn make_circle<T: Real>(radius: T) -> Result<BoundaryGeometry<T>> {
    if !(radius > T::zero()) {
        return Err(Error::Domain(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    let piece = BoundaryPiece::new(Shape::Arc {
        center: [T::zero(), T::zero()],
        radius,
        theta0: T::zero(),
        theta1: T::TAU(),
    });
    BoundaryGeometry::from_pieces("circle", vec![piece])
}

pub fn make_ellipse<T: Real>(a: T, b: T) -> Result<BoundaryGeometry<T>> {
    if !(a > T::zero() && b > T::zero()) {
        return Err(Error::Domain("ellipse semi-axes must be positive".into()));
    }
    BoundaryGeometry::from_pieces("ellipse", vec![BoundaryPiece::new(Shape::Ellipse { a, b })])
}

pub const KITE_FOLD: f64 = 0.65;
pub const KITE_HEIGHT: f64 = 1.5;

pub fn make_kite<T: Real>() -> Result<BoundaryGeometry<T>> {
    make_kite_with(T::lit(KITE_FOLD), T::lit(KITE_HEIGHT))
}

pub fn make_kite_with<T: Real>(fold: T, height: T) -> Result<BoundaryGeometry<T>> {
    if !(height > T::zero()) || !fold.is_finite() {
        return Err(Error::Domain("kite height must be positive".into()));
    }
    BoundaryGeometry::from_pieces(
        "kite",
        vec![BoundaryPiece::new(Shape::Kite { fold, height })],
    )
}

pub fn make_polygon<T: Real>(vertices: &[Point<T>]) -> Result<BoundaryGeometry<T>> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Domain("polygon needs at least 3 vertices".into()));
    }
    let area: T = (0..n)
        .map(|i| {
            let (p, q) = (vertices[i], vertices[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<T>()
        / T::lit(2.0);
    if !(area > T::zero()) {
        return Err(Error::Domain(
            "polygon vertices must be non-collinear and counter-clockwise".into(),
        ));
    }
    for i in 0..n {
        if norm(sub(vertices[(i + 1) % n], vertices[i])) == T::zero() {
            return Err(Error::Domain(format!("repeated polygon vertex {i}")));
        }
    }
    let pieces = (0..n)
        .map(|i| {
            BoundaryPiece::new(Shape::Segment {
                a: vertices[i],
                b: vertices[(i + 1) % n],
            })
        })
        .collect();
    BoundaryGeometry::from_pieces("polygon", pieces)
}

/// Axis-aligned square centred at the origin.
pub fn make_square<T: Real>(side: T) -> Result<BoundaryGeometry<T>> {
    if !(side > T::zero()) {
        return Err(Error::Domain(format!(
            "square side must be positive, got {side}"
        )));
    }
    let h = side / T::lit(2.0);
    let mut g = make_polygon(&[[-h, -h], [h, -h], [h, h], [-h, h]])?;
    g.name = "square".into();
    Ok(g)
}

/// Builds a geometry from a registry entry such as `circle radius=1.0`.
///
/// Builders: `circle radius`, `square side`, `ellipse a b`, `kite fold height`,
/// `polygon vertices=x,y;x,y;...`. Every builder also accepts `rotate` (radians) and
/// `shift=x,y`.
pub fn parse_geometry<T: Real>(spec: &str) -> Result<BoundaryGeometry<T>> {
    let mut words = spec.split_whitespace();
    let builder = words
        .next()
        .ok_or_else(|| Error::Config("empty geometry entry".into()))?;
    let mut params = BTreeMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("geometry parameter `{w}` is not key=value")))?;
        params.insert(k.to_string(), v.to_string());
    }
    let mut take = |key: &str, default: Option<f64>| -> Result<T> {
        match params.remove(key) {
            Some(v) => v.parse::<f64>().map(T::lit).map_err(|_| {
                Error::Config(format!("geometry parameter {key}={v} is not a number"))
            }),
            None => default
                .map(T::lit)
                .ok_or_else(|| Error::Config(format!("{builder} needs parameter `{key}`"))),
        }
    };
    let rotate = take("rotate", Some(0.0))?;
    let mut g = match builder {
        "circle" => make_circle(take("radius", Some(1.0))?)?,
        "square" => make_square(take("side", Some(1.0))?)?,
        "ellipse" => make_ellipse(take("a", None)?, take("b", None)?)?,
        "kite" => make_kite_with(
            take("fold", Some(KITE_FOLD))?,
            take("height", Some(KITE_HEIGHT))?,
        )?,
        "polygon" => {
            let raw = params
                .remove("vertices")
                .ok_or_else(|| Error::Config("polygon needs `vertices`".into()))?;
            make_polygon(&parse_points(&raw)?)?
        }
        other => return Err(Error::Config(format!("unknown geometry builder `{other}`"))),
    };
    let shift = match params.remove("shift") {
        Some(s) => {
            let p = parse_points::<T>(&s)?;
            if p.len() != 1 {
                return Err(Error::Config(format!("shift `{s}` must be one point")));
            }
            p[0]
        }
        None => [T::zero(), T::zero()],
    };
    if let Some(k) = params.keys().next() {
        return Err(Error::Config(format!(
            "unknown parameter `{k}` for {builder}"
        )));
    }
    if rotate != T::zero() || shift != [T::zero(), T::zero()] {
        g = g.transformed(Rigid::new(rotate, shift));
    }
    Ok(g)
}

fn parse_points<T: Real>(s: &str) -> Result<Vec<Point<T>>> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let c: Vec<&str> = p.split(',').collect();
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::Config(format!("bad coordinate `{x}`")))
            };
            match c.as_slice() {
                [x, y] => Ok([num(x)?, num(y)?]),
                _ => Err(Error::Config(format!("point `{p}` must be x,y"))),
            }
        })
        .collect()
}

/// Named geometry entries, one `name = builder key=value ...` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    pub entries: BTreeMap<String, String>,
}

impl Registry {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, spec) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "registry line {}: expected `name = builder ...`",
                    lineno + 1
                ))
            })?;
            entries.insert(name.trim().to_string(), spec.trim().to_string());
        }
        Ok(Registry { entries })
    }

    /// Resolves a registered name, or parses `spec` directly when it is not a name.
    pub fn build<T: Real>(&self, spec: &str) -> Result<BoundaryGeometry<T>> {
        let key = spec.trim();
        match self.entries.get(key) {
            Some(s) => {
                let mut g = parse_geometry(s)?;
                g.name = key.to_string();
                Ok(g)
            }
            None => parse_geometry(key),
        }
    }
}
