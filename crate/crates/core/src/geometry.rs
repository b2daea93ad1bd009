//! Points, balls and segments in R^N, plus the enclosing-ball and clipping
//! primitives the measure and covering code is built on.

use crate::error::{domain, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// A point of R^N. Coordinates are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return domain("a point needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return domain("point coordinates must be finite");
        }
        Ok(Self { coords })
    }

    /// Builds a point from trusted coordinates (non-empty, finite).
    pub(crate) fn from_vec(coords: Vec<T>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self::from_vec(vec![T::zero(); dim.max(1)])
    }

    pub fn xy(x: T, y: T) -> Self {
        Self::from_vec(vec![x, y])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    #[inline]
    pub fn dist2(&self, other: &Self) -> T {
        dist2(&self.coords, &other.coords)
    }

    #[inline]
    pub fn dist(&self, other: &Self) -> T {
        self.dist2(other).sqrt()
    }

    /// `self + t (other - self)`.
    pub fn lerp(&self, other: &Self, t: T) -> Self {
        Self::from_vec(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn cast<U: Real>(&self) -> Point<U> {
        Point::from_vec(self.coords.iter().map(|c| U::of(c.as_f64())).collect())
    }

    pub(crate) fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.coords.iter().zip(&other.coords) {
            match a.partial_cmp(b) {
                Some(Ordering::Equal) | None => continue,
                Some(o) => return o,
            }
        }
        Ordering::Equal
    }
}

#[inline]
pub(crate) fn dist2<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |acc, v| acc + v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    Open,
    #[default]
    Closed,
}

/// `B_r(x)`, open or closed. Mass queries in this crate always use the closed
/// variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    pub center: Point<T>,
    pub radius: T,
    #[serde(default)]
    pub closure: Closure,
}

impl<T: Real> Ball<T> {
    pub fn closed(center: Point<T>, radius: T) -> Self {
        Self {
            center,
            radius,
            closure: Closure::Closed,
        }
    }

    pub fn open(center: Point<T>, radius: T) -> Self {
        Self {
            center,
            radius,
            closure: Closure::Open,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Exact membership test; a closed radius-0 ball is a singleton and an
    /// open radius-0 ball is empty.
    pub fn contains(&self, p: &Point<T>) -> bool {
        let d2 = self.center.dist2(p);
        let r2 = self.radius * self.radius;
        match self.closure {
            Closure::Closed => d2 <= r2,
            Closure::Open => d2 < r2,
        }
    }

    /// Membership with a relative slack, used to absorb rounding in
    /// enclosing-ball constructions.
    pub(crate) fn contains_slack(&self, p: &Point<T>) -> bool {
        let d = self.center.dist(p);
        let slack = T::eps_scale() * (T::one() + self.radius) * T::of(16.0);
        d <= self.radius + slack
    }
}

/// Straight segment `[a, b]` with `a != b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub a: Point<T>,
    pub b: Point<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(a: Point<T>, b: Point<T>) -> Result<Self> {
        if a.dim() != b.dim() {
            return domain(format!(
                "segment endpoints live in R^{} and R^{}",
                a.dim(),
                b.dim()
            ));
        }
        if a == b {
            return domain("segment endpoints must differ");
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn length(&self) -> T {
        self.a.dist(&self.b)
    }

    /// `a + t(b - a)`, returning the stored endpoints exactly at `t = 0, 1`.
    pub fn point_at(&self, t: T) -> Point<T> {
        if t == T::zero() {
            self.a.clone()
        } else if t == T::one() {
            self.b.clone()
        } else {
            self.a.lerp(&self.b, t)
        }
    }

    /// Sub-segment over the parameter interval `[t0, t1]`.
    pub fn sub(&self, t0: T, t1: T) -> Self {
        Self {
            a: self.point_at(t0),
            b: self.point_at(t1),
        }
    }

    fn direction(&self) -> Vec<T> {
        self.b
            .coords
            .iter()
            .zip(&self.a.coords)
            .map(|(&b, &a)| b - a)
            .collect()
    }

    /// Parameter interval `{t in [0,1] : a + t(b-a) in closed ball}`, or
    /// `None` when the intersection is empty.
    ///
    /// Uses the foot of the perpendicular from the center, which avoids the
    /// cancellation of the raw quadratic formula.
    pub fn clip_to_ball(&self, center: &Point<T>, radius: T) -> Option<(T, T)> {
        let d = self.direction();
        let dd = dot(&d, &d);
        let ac: Vec<T> = self
            .a
            .coords
            .iter()
            .zip(&center.coords)
            .map(|(&a, &c)| a - c)
            .collect();
        let t0 = -dot(&ac, &d) / dd;
        let h2 = ac
            .iter()
            .zip(&d)
            .map(|(&x, &y)| {
                let v = x + t0 * y;
                v * v
            })
            .fold(T::zero(), |acc, v| acc + v);
        let r2 = radius * radius;
        if h2 > r2 {
            return None;
        }
        let w = ((r2 - h2) / dd).sqrt();
        let lo = (t0 - w).max(T::zero());
        let hi = (t0 + w).min(T::one());
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Distance from `p` to the infinite line through the segment.
    pub fn line_distance(&self, p: &Point<T>) -> T {
        let d = self.direction();
        let dd = dot(&d, &d);
        let ap: Vec<T> = p
            .coords
            .iter()
            .zip(&self.a.coords)
            .map(|(&x, &a)| x - a)
            .collect();
        let t = dot(&ap, &d) / dd;
        ap.iter()
            .zip(&d)
            .map(|(&x, &y)| {
                let v = x - t * y;
                v * v
            })
            .fold(T::zero(), |acc, v| acc + v)
            .sqrt()
    }

    pub fn point_distance(&self, p: &Point<T>) -> T {
        let d = self.direction();
        let dd = dot(&d, &d);
        let ap: Vec<T> = p
            .coords
            .iter()
            .zip(&self.a.coords)
            .map(|(&x, &a)| x - a)
            .collect();
        let t = (dot(&ap, &d) / dd).max(T::zero()).min(T::one());
        p.dist(&self.point_at(t))
    }

    /// Euclidean distance between two segments of the same R^N.
    pub fn segment_distance(&self, other: &Self) -> T {
        let d1 = self.direction();
        let d2 = other.direction();
        let r: Vec<T> = self
            .a
            .coords
            .iter()
            .zip(&other.a.coords)
            .map(|(&x, &y)| x - y)
            .collect();
        let a = dot(&d1, &d1);
        let e = dot(&d2, &d2);
        let b = dot(&d1, &d2);
        let c = dot(&d1, &r);
        let f = dot(&d2, &r);
        let denom = a * e - b * b;
        if denom > T::eps_scale() * a * e {
            let s = (b * f - c * e) / denom;
            let t = (a * f - b * c) / denom;
            if s >= T::zero() && s <= T::one() && t >= T::zero() && t <= T::one() {
                return self.point_at(s).dist(&other.point_at(t));
            }
        }
        // Minimum on the boundary of the parameter square.
        [
            other.point_distance(&self.a),
            other.point_distance(&self.b),
            self.point_distance(&other.a),
            self.point_distance(&other.b),
        ]
        .into_iter()
        .fold(T::infinity(), T::min)
    }

    pub fn cast<U: Real>(&self) -> Segment<U> {
        Segment {
            a: self.a.cast(),
            b: self.b.cast(),
        }
    }
}

/// Mass of a uniform-density segment inside a closed ball:
/// `density * length(seg ∩ ball)`.
pub fn ball_segment_length<T: Real>(ball: &Ball<T>, seg: &Segment<T>, density: T) -> Result<T> {
    if ball.dim() != seg.dim() {
        return domain(format!(
            "ball in R^{} and segment in R^{}",
            ball.dim(),
            seg.dim()
        ));
    }
    Ok(segment_mass_in_ball(seg, density, &ball.center, ball.radius))
}

/// Mass inside a closed ball, computed in length units so that short chords
/// keep full relative precision.
#[inline]
pub(crate) fn segment_mass_in_ball<T: Real>(
    seg: &Segment<T>,
    density: T,
    center: &Point<T>,
    radius: T,
) -> T {
    if density == T::zero() {
        return T::zero();
    }
    let d = seg.direction();
    let dd = dot(&d, &d);
    let len = dd.sqrt();
    let ac: Vec<T> = seg
        .a
        .coords
        .iter()
        .zip(&center.coords)
        .map(|(&a, &c)| a - c)
        .collect();
    let t0 = -dot(&ac, &d) / dd;
    let h2 = ac
        .iter()
        .zip(&d)
        .map(|(&x, &y)| {
            let v = x + t0 * y;
            v * v
        })
        .fold(T::zero(), |acc, v| acc + v);
    let r2 = radius * radius;
    if h2 > r2 {
        return T::zero();
    }
    let half = (r2 - h2).sqrt();
    let foot = t0 * len;
    let (lo, hi) = (foot - half, foot + half);
    let inside = if lo >= T::zero() && hi <= len {
        half + half
    } else {
        (hi.min(len) - lo.max(T::zero())).max(T::zero())
    };
    density * inside
}

/// Smallest distance between a point of `a` and a point of `b`.
pub fn pairwise_set_distance<T: Real>(a: &[Point<T>], b: &[Point<T>]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return domain("set distance needs two non-empty point sets");
    }
    let mut best = T::infinity();
    for p in a {
        for q in b {
            if p.dim() != q.dim() {
                return domain("mixed dimensions in set distance");
            }
            best = best.min(p.dist2(q));
        }
    }
    Ok(best.sqrt())
}

/// Support sets up to this size are handled by exhaustive enumeration.
const ENUMERATION_LIMIT: usize = 16;

/// Smallest closed ball containing every point.
///
/// The input is first sorted lexicographically, so the result does not
/// depend on the order of `points`. Small inputs in R^1..R^3 enumerate all
/// support subsets of size at most N+1 (ties go to the lexicographically
/// smallest index sequence); larger inputs in R^1..R^3 use the move-to-front
/// recursion, whose depth is bounded by N+1. Above R^3 an iterative core-set
/// approximation is returned whose radius is the true maximal distance from
/// the computed center, so containment always holds.
pub fn minimal_enclosing_ball<T: Real>(points: &[Point<T>]) -> Result<Ball<T>> {
    let Some(first) = points.first() else {
        return domain("minimal enclosing ball of an empty set");
    };
    let dim = first.dim();
    if points.iter().any(|p| p.dim() != dim) {
        return domain("minimal enclosing ball of points with mixed dimensions");
    }
    let mut sorted: Vec<&Point<T>> = points.iter().collect();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    sorted.dedup_by(|a, b| a == b);

    if dim > 3 {
        return Ok(approximate_ball(&sorted));
    }
    if sorted.len() <= ENUMERATION_LIMIT {
        if let Some(ball) = enumerate_support(&sorted, dim) {
            return Ok(ball);
        }
    }
    Ok(move_to_front_ball(&sorted, dim))
}

fn enumerate_support<T: Real>(pts: &[&Point<T>], dim: usize) -> Option<Ball<T>> {
    let n = pts.len();
    let max_k = (dim + 1).min(n);
    let mut best: Option<(Ball<T>, Vec<usize>)> = None;
    let tol = T::eps_scale() * T::of(64.0);
    let mut idx = Vec::with_capacity(max_k);
    // Depth-first enumeration visits index sequences in lexicographic order.
    fn rec<T: Real>(
        pts: &[&Point<T>],
        start: usize,
        max_k: usize,
        idx: &mut Vec<usize>,
        tol: T,
        best: &mut Option<(Ball<T>, Vec<usize>)>,
    ) {
        for i in start..pts.len() {
            idx.push(i);
            let support: Vec<&Point<T>> = idx.iter().map(|&j| pts[j]).collect();
            if let Some(ball) = circumball(&support) {
                let better = match best {
                    None => true,
                    Some((b, _)) => ball.radius < b.radius * (T::one() - tol) - tol,
                };
                if better && pts.iter().all(|p| ball.contains_slack(p)) {
                    *best = Some((ball, idx.clone()));
                }
            }
            if idx.len() < max_k {
                rec(pts, i + 1, max_k, idx, tol, best);
            }
            idx.pop();
        }
    }
    rec(pts, 0, max_k, &mut idx, tol, &mut best);
    best.map(|(b, _)| b)
}

/// Ball whose boundary passes through every support point, centered in
/// their affine hull. `None` for affinely dependent supports.
pub(crate) fn circumball<T: Real>(support: &[&Point<T>]) -> Option<Ball<T>> {
    let p0 = support[0];
    if support.len() == 1 {
        return Some(Ball::closed(p0.clone(), T::zero()));
    }
    let k = support.len() - 1;
    let vs: Vec<Vec<T>> = support[1..]
        .iter()
        .map(|p| {
            p.coords
                .iter()
                .zip(&p0.coords)
                .map(|(&x, &y)| x - y)
                .collect()
        })
        .collect();
    let mut g = vec![vec![T::zero(); k + 1]; k];
    let mut scale = T::zero();
    for i in 0..k {
        for j in 0..k {
            g[i][j] = dot(&vs[i], &vs[j]);
        }
        g[i][k] = dot(&vs[i], &vs[i]) * T::half();
        scale = scale.max(g[i][i]);
    }
    let lambda = solve_small(g, scale)?;
    let mut c = p0.coords.clone();
    for (l, v) in lambda.iter().zip(&vs) {
        for (ci, &vi) in c.iter_mut().zip(v) {
            *ci = *ci + *l * vi;
        }
    }
    let center = Point::from_vec(c);
    let radius = support
        .iter()
        .map(|p| center.dist(p))
        .fold(T::zero(), T::max);
    Some(Ball::closed(center, radius))
}

/// Gaussian elimination with partial pivoting on an augmented `k x (k+1)`
/// system. Rejects near-singular systems relative to `scale`.
fn solve_small<T: Real>(mut m: Vec<Vec<T>>, scale: T) -> Option<Vec<T>> {
    let k = m.len();
    let tiny = T::eps_scale() * T::of(1e-2) * scale.max(T::min_positive_value());
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .unwrap_or(Ordering::Equal)
        })?;
        if m[piv][col].abs() <= tiny {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            for c in col..=k {
                let v = m[col][c];
                m[row][c] = m[row][c] - f * v;
            }
        }
    }
    let mut x = vec![T::zero(); k];
    for row in (0..k).rev() {
        let mut acc = m[row][k];
        for c in row + 1..k {
            acc = acc - m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

fn move_to_front_ball<T: Real>(pts: &[&Point<T>], dim: usize) -> Ball<T> {
    let mut list: Vec<&Point<T>> = pts.to_vec();
    let mut boundary: Vec<&Point<T>> = Vec::with_capacity(dim + 1);
    let n = list.len();
    let mut ball = mtf(&mut list, n, &mut boundary, dim);
    // Rounding can leave points a hair outside; grow to the true maximum.
    let far = pts
        .iter()
        .map(|p| ball.center.dist(p))
        .fold(T::zero(), T::max);
    ball.radius = ball.radius.max(far);
    ball
}

fn ball_of_boundary<T: Real>(boundary: &[&Point<T>], dim: usize) -> Option<Ball<T>> {
    if boundary.is_empty() {
        return Some(Ball::closed(Point::origin(dim), -T::one()));
    }
    circumball(boundary)
}

fn mtf<'a, T: Real>(
    list: &mut Vec<&'a Point<T>>,
    end: usize,
    boundary: &mut Vec<&'a Point<T>>,
    dim: usize,
) -> Ball<T> {
    let mut ball = match ball_of_boundary(boundary, dim) {
        Some(b) => b,
        None => {
            // Degenerate boundary: fall back to the ball of a maximal
            // independent prefix of it.
            let mut sub = boundary.clone();
            loop {
                sub.pop();
                if let Some(b) = ball_of_boundary(&sub, dim) {
                    break b;
                }
            }
        }
    };
    if boundary.len() == dim + 1 {
        return ball;
    }
    let mut i = 0;
    while i < end {
        let p = list[i];
        if ball.radius < T::zero() || !ball.contains_slack(p) {
            boundary.push(p);
            ball = mtf(list, i, boundary, dim);
            boundary.pop();
            let moved = list.remove(i);
            list.insert(0, moved);
        }
        i += 1;
    }
    ball
}

fn approximate_ball<T: Real>(pts: &[&Point<T>]) -> Ball<T> {
    let mut c = pts[0].coords.clone();
    let iters = 2000;
    for k in 1..=iters {
        let far = pts
            .iter()
            .max_by(|a, b| {
                dist2(&a.coords, &c)
                    .partial_cmp(&dist2(&b.coords, &c))
                    .unwrap_or(Ordering::Equal)
            })
            .expect("non-empty");
        let step = T::one() / T::of_usize(k + 1);
        for (ci, &fi) in c.iter_mut().zip(&far.coords) {
            *ci = *ci + (fi - *ci) * step;
        }
    }
    let center = Point::from_vec(c);
    let radius = pts.iter().map(|p| center.dist(p)).fold(T::zero(), T::max);
    Ball::closed(center, radius)
}

/// Axis-aligned bounding box `(lo, hi)` of a non-empty point set.
pub fn bounding_box<T: Real>(points: &[Point<T>]) -> Option<(Vec<T>, Vec<T>)> {
    let first = points.first()?;
    let mut lo = first.coords.clone();
    let mut hi = first.coords.clone();
    for p in &points[1..] {
        for (i, &c) in p.coords.iter().enumerate() {
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::xy(x, y)
    }

    #[test]
    fn meb_singleton_and_pair() {
        let b = minimal_enclosing_ball(&[p(0.0, 0.0)]).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.center, p(0.0, 0.0));
        let b = minimal_enclosing_ball(&[p(0.0, 0.0), p(2.0, 0.0)]).unwrap();
        assert_relative_eq!(b.radius, 1.0);
        assert_relative_eq!(b.center.coords()[0], 1.0);
    }

    #[test]
    fn meb_right_triangle_has_hypotenuse_as_diameter() {
        // (1,1) sits exactly on the circle with diameter [(0,0),(2,0)];
        // exhaustive circumcenter enumeration gives center (1,0), r = 1.
        let b = minimal_enclosing_ball(&[p(0.0, 0.0), p(2.0, 0.0), p(1.0, 1.0)]).unwrap();
        assert_relative_eq!(b.radius, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.center.coords()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.center.coords()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn meb_rejects_bad_input() {
        assert!(minimal_enclosing_ball::<f64>(&[]).is_err());
        let mixed = [p(0.0, 0.0), Point::new(vec![1.0, 2.0, 3.0]).unwrap()];
        assert!(minimal_enclosing_ball(&mixed).is_err());
    }

    #[test]
    fn meb_in_three_dimensions() {
        let pts: Vec<Point<f64>> = [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [0.1, 0.2, 0.3],
        ]
        .iter()
        .map(|c| Point::new(c.to_vec()).unwrap())
        .collect();
        let b = minimal_enclosing_ball(&pts).unwrap();
        assert_relative_eq!(b.radius, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn meb_high_dimension_contains_everything() {
        let pts: Vec<Point<f64>> = (0..10)
            .map(|i| {
                let mut c = vec![0.0; 5];
                c[i % 5] = if i < 5 { 1.0 } else { -1.0 };
                Point::new(c).unwrap()
            })
            .collect();
        let b = minimal_enclosing_ball(&pts).unwrap();
        assert!(pts.iter().all(|q| b.center.dist(q) <= b.radius + 1e-12));
        assert!(b.radius < 1.01);
    }

    #[test]
    fn meb_f32() {
        let pts = [Point::xy(0.0f32, 0.0), Point::xy(2.0, 0.0), Point::xy(1.0, 0.5)];
        let b = minimal_enclosing_ball(&pts).unwrap();
        assert!((b.radius - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ball_segment_examples() {
        let seg = Segment::new(p(0.0, 0.0), p(10.0, 0.0)).unwrap();
        let b = Ball::closed(p(5.0, 0.0), 2.0);
        assert_relative_eq!(ball_segment_length(&b, &seg, 1.0).unwrap(), 4.0, epsilon = 1e-12);
        let b = Ball::closed(p(0.0, 5.0), 1.0);
        assert_eq!(ball_segment_length(&b, &seg, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ball_segment_chord_matches_quadrature() {
        let seg = Segment::new(p(-2.0, 0.5), p(2.0, 0.5)).unwrap();
        let ball = Ball::closed(p(0.0, 0.0), 1.0);
        // Midpoint-rule oracle on the indicator along the segment.
        let n = 400_000;
        let len = seg.length();
        let inside = (0..n)
            .filter(|&i| {
                let t = (i as f64 + 0.5) / n as f64;
                ball.contains(&seg.point_at(t))
            })
            .count();
        let oracle = 2.0 * len * inside as f64 / n as f64;
        let got = ball_segment_length(&ball, &seg, 2.0).unwrap();
        assert_relative_eq!(got, 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert!((got - oracle).abs() < 1e-4);
    }

    #[test]
    fn set_distance_examples() {
        assert_relative_eq!(
            pairwise_set_distance(&[p(0.0, 0.0)], &[p(3.0, 4.0)]).unwrap(),
            5.0
        );
        let a = [p(1.0, 2.0), p(-1.0, 0.5)];
        assert_eq!(pairwise_set_distance(&a, &a).unwrap(), 0.0);
        assert!(pairwise_set_distance::<f64>(&[], &a).is_err());
    }

    #[test]
    fn segment_distances() {
        let s = Segment::new(p(0.0, 0.0), p(1.0, 0.0)).unwrap();
        let t = Segment::new(p(0.5, 1.0), p(0.5, 3.0)).unwrap();
        assert_relative_eq!(s.segment_distance(&t), 1.0, epsilon = 1e-12);
        let u = Segment::new(p(0.5, -1.0), p(0.5, 1.0)).unwrap();
        assert!(s.segment_distance(&u) < 1e-12);
        let v = Segment::new(p(2.0, 1.0), p(3.0, 1.0)).unwrap();
        assert_relative_eq!(s.segment_distance(&v), 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(s.line_distance(&p(7.0, -0.25)), 0.25, epsilon = 1e-12);
    }

    fn pts_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn meb_contains_all(raw in pts_strategy(40)) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| p(x, y)).collect();
            let b = minimal_enclosing_ball(&pts).unwrap();
            for q in &pts {
                prop_assert!(b.center.dist(q) <= b.radius + 1e-12 * (1.0 + b.radius) * 16.0 + 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn meb_cannot_shrink(raw in pts_strategy(12)) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| p(x, y)).collect();
            let b = minimal_enclosing_ball(&pts).unwrap();
            prop_assume!(b.radius > 1e-3);
            let r = b.radius * (1.0 - 1e-6);
            // Fine grid of candidate centers around the optimum.
            let (cx, cy) = (b.center.coords()[0], b.center.coords()[1]);
            let step = b.radius / 50.0;
            for i in -60..=60 {
                for j in -60..=60 {
                    let c = p(cx + i as f64 * step, cy + j as f64 * step);
                    prop_assert!(pts.iter().any(|q| c.dist(q) > r));
                }
            }
        }

        #[test]
        fn meb_is_permutation_invariant(raw in pts_strategy(30)) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| p(x, y)).collect();
            let mut rev = pts.clone();
            rev.reverse();
            prop_assert_eq!(minimal_enclosing_ball(&pts).unwrap(), minimal_enclosing_ball(&rev).unwrap());
        }

        #[test]
        fn segment_mass_monotone_and_additive(
            ax in -3.0f64..3.0, ay in -3.0f64..3.0, bx in -3.0f64..3.0, by in -3.0f64..3.0,
            cx in -3.0f64..3.0, cy in -3.0f64..3.0, r in 0.0f64..4.0, dr in 0.0f64..1.0, t in 0.01f64..0.99,
        ) {
            prop_assume!((ax - bx).abs() + (ay - by).abs() > 1e-3);
            let seg = Segment::new(p(ax, ay), p(bx, by)).unwrap();
            let c = p(cx, cy);
            let m = segment_mass_in_ball(&seg, 1.0, &c, r);
            prop_assert!(segment_mass_in_ball(&seg, 1.0, &c, r + dr) >= m - 1e-12);
            let left = seg.sub(0.0, t);
            let right = seg.sub(t, 1.0);
            let split = segment_mass_in_ball(&left, 1.0, &c, r) + segment_mass_in_ball(&right, 1.0, &c, r);
            prop_assert!((split - m).abs() <= 1e-9 * (1.0 + m));
        }

        #[test]
        fn set_distance_matches_scan(a in pts_strategy(6), b in pts_strategy(6)) {
            let pa: Vec<_> = a.iter().map(|&(x, y)| p(x, y)).collect();
            let pb: Vec<_> = b.iter().map(|&(x, y)| p(x, y)).collect();
            let mut best = f64::INFINITY;
            for u in &a { for v in &b { best = best.min(((u.0 - v.0).powi(2) + (u.1 - v.1).powi(2)).sqrt()); } }
            prop_assert!((pairwise_set_distance(&pa, &pb).unwrap() - best).abs() < 1e-12);
        }
    }
}
