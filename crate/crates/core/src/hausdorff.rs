//! Hausdorff capacity `H^s_δ` of finite carriers by covering optimization.

use crate::error::{domain, Error, Result};
use crate::geometry::{circumball, minimal_enclosing_ball, Ball, Point, Segment};
use crate::measure::{CarrierSubset, DiscreteMeasure, IntervalSet, Origin};
use crate::scalar::Real;
use crate::special::omega;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

/// Largest sample set accepted by exact mode.
pub const EXACT_LIMIT: usize = 14;
/// Largest sample set accepted at all.
pub const SAMPLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Ball of radius r weighs `ω_s r^s`.
    #[default]
    Spherical,
    /// Ball of radius r weighs `(2r)^s`.
    Diameter,
}

/// `s`, the scale cap `δ` (possibly infinite) and the weight convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams", bound = "")]
pub struct HausdorffParams<T: Real> {
    s: T,
    delta: T,
    convention: Convention,
    omega: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    s: f64,
    /// `null` stands for `+∞`.
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    convention: Convention,
}

impl<T: Real> TryFrom<RawParams> for HausdorffParams<T> {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        Self::new(T::of(r.s), T::of(r.delta.unwrap_or(f64::INFINITY)))
            .map(|p| p.with_convention(r.convention))
    }
}

impl<T: Real> From<HausdorffParams<T>> for RawParams {
    fn from(p: HausdorffParams<T>) -> Self {
        RawParams {
            s: p.s.as_f64(),
            delta: p.delta.is_finite().then(|| p.delta.as_f64()),
            convention: p.convention,
        }
    }
}

impl<T: Real> HausdorffParams<T> {
    pub fn new(s: T, delta: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return domain(format!("delta must be positive, got {delta}"));
        }
        let omega = omega(s)?;
        Ok(Self {
            s,
            delta,
            convention: Convention::Spherical,
            omega,
        })
    }

    /// Content parameters: `δ = +∞`.
    pub fn content(s: T) -> Result<Self> {
        Self::new(s, T::infinity())
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_delta(self, delta: T) -> Result<Self> {
        Ok(Self::new(self.s, delta)?.with_convention(self.convention))
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    /// Weight of one covering ball of radius `r`.
    pub fn ball_weight(&self, r: T) -> T {
        match self.convention {
            Convention::Spherical => self.omega * r.powf(self.s),
            Convention::Diameter => (r + r).powf(self.s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContentMode {
    Exact,
    #[default]
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentOptions<T> {
    pub mode: ContentMode,
    /// Minimal radius `ρ` charged per ball.
    pub floor: T,
    /// Sampling pitch along segment fragments; chosen automatically when
    /// `None`.
    pub pitch: Option<T>,
}

impl<T: Real> Default for ContentOptions<T> {
    fn default() -> Self {
        Self {
            mode: ContentMode::Greedy,
            floor: T::zero(),
            pitch: None,
        }
    }
}

impl<T: Real> ContentOptions<T> {
    pub fn exact() -> Self {
        Self {
            mode: ContentMode::Exact,
            ..Self::default()
        }
    }

    pub fn greedy() -> Self {
        Self::default()
    }

    pub fn with_floor(mut self, floor: T) -> Self {
        self.floor = floor;
        self
    }

    pub fn with_pitch(mut self, pitch: T) -> Self {
        self.pitch = Some(pitch);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBall<T> {
    pub center: Point<T>,
    pub radius: T,
}

/// A finite ball cover together with its weight under the chosen
/// convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cover<T> {
    pub balls: Vec<CoverBall<T>>,
    pub weight: T,
}

impl<T: Real> Cover<T> {
    fn from_balls(balls: Vec<CoverBall<T>>, params: &HausdorffParams<T>) -> Self {
        let weight = balls.iter().map(|b| params.ball_weight(b.radius)).sum();
        Self { balls, weight }
    }

    pub fn empty() -> Self {
        Self {
            balls: Vec::new(),
            weight: T::zero(),
        }
    }
}

/// Two-sided estimate of `H^s_δ` of a carrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentEstimate<T> {
    pub lower: T,
    pub upper: T,
    pub witness: Cover<T>,
    pub mode: ContentMode,
    /// Number of points the optimization ran on.
    pub samples: usize,
    /// Pitch used along segment fragments, if any were present.
    pub pitch: Option<T>,
    /// Minimal radius charged per ball.
    pub floor: T,
    /// True when segment fragments were replaced by sample points.
    pub discretized: bool,
    /// What the lower bound means.
    pub lower_bound: String,
}

/// Points standing in for a carrier, plus the fragments they sample.
#[derive(Debug, Clone)]
pub struct CarrierSample<T> {
    pub points: Vec<Point<T>>,
    pub fragments: Vec<Segment<T>>,
    pub pitch: Option<T>,
}

/// Default fragment pitch for a carrier of diameter `diam` at scale `delta`.
pub fn default_pitch<T: Real>(diam: T, delta: T) -> T {
    let p = diam / T::of(256.0);
    if delta.is_finite() {
        p.min(delta / T::of(8.0))
    } else {
        p
    }
}

/// Replaces the fragments of `sub` by points spaced at most `pitch` apart
/// (endpoints included) and collects the atoms. Coincident points are
/// merged.
pub fn sample_carrier<T: Real>(
    mu: &DiscreteMeasure<T>,
    sub: &CarrierSubset<T>,
    delta: T,
    pitch: Option<T>,
) -> Result<CarrierSample<T>> {
    sub.validate(mu)?;
    let mut points: Vec<Point<T>> = Vec::new();
    let mut fragments = Vec::new();
    for e in sub.elements() {
        match e {
            Origin::Atom(i) => points.push(mu.atoms()[i].location.clone()),
            Origin::Fragment { piece, t0, t1 } => {
                let seg = &mu.pieces()[piece].segment;
                let sub_seg = if t0 == T::zero() && t1 == T::one() {
                    seg.clone()
                } else {
                    seg.sub(t0, t1)
                };
                if sub_seg.a != sub_seg.b {
                    fragments.push(sub_seg);
                }
            }
        }
    }
    let mut used_pitch = None;
    if !fragments.is_empty() {
        let mut extreme = points.clone();
        for f in &fragments {
            extreme.push(f.a.clone());
            extreme.push(f.b.clone());
        }
        let diam = diameter(&extreme);
        let mut p = match pitch {
            Some(p) if p > T::zero() => p,
            Some(p) => return domain(format!("sampling pitch must be positive, got {p}")),
            None => default_pitch(diam, delta),
        };
        let count = |p: T| -> usize {
            points.len()
                + fragments
                    .iter()
                    .map(|f| (f.length() / p).ceil().to_usize().unwrap_or(usize::MAX) + 1)
                    .sum::<usize>()
        };
        if pitch.is_none() {
            while count(p) > SAMPLE_LIMIT {
                p = p * T::of(1.25);
            }
            if delta.is_finite() && p > delta / T::two() {
                return Err(Error::Refused(format!(
                    "carrier needs more than {SAMPLE_LIMIT} samples at scale {delta}"
                )));
            }
        } else if count(p) > SAMPLE_LIMIT {
            return Err(Error::Refused(format!(
                "pitch {p} yields {} samples; the limit is {SAMPLE_LIMIT}",
                count(p)
            )));
        }
        for f in &fragments {
            let n = (f.length() / p).ceil().to_usize().unwrap_or(1).max(1);
            for k in 0..=n {
                points.push(f.point_at(T::of_usize(k) / T::of_usize(n)));
            }
        }
        used_pitch = Some(p);
    }
    Ok(CarrierSample {
        points: dedup_points(points),
        fragments,
        pitch: used_pitch,
    })
}

fn diameter<T: Real>(pts: &[Point<T>]) -> T {
    let mut d2 = T::zero();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d2 = d2.max(pts[i].dist2(&pts[j]));
        }
    }
    d2.sqrt()
}

fn dedup_points<T: Real>(mut pts: Vec<Point<T>>) -> Vec<Point<T>> {
    pts.sort_by(|a, b| a.lex_cmp(b));
    pts.dedup();
    let scale = pts
        .iter()
        .flat_map(|p| p.coords().iter().map(|c| c.abs()))
        .fold(T::one(), T::max);
    let tol2 = (T::eps_scale() * scale).powi(2);
    let mut out: Vec<Point<T>> = Vec::with_capacity(pts.len());
    for p in pts {
        if !out.iter().any(|q| q.dist2(&p) <= tol2) {
            out.push(p);
        }
    }
    out
}

/// Estimates `H^s_δ` of the carrier `sub` of `mu`.
///
/// Exact mode solves the covering problem over enclosing balls of point
/// subsets and returns `lower == upper`. Greedy mode returns a feasible
/// cover; when fragments are present the cover is completed so that it
/// covers the fragments themselves, not just their samples.
pub fn content<T: Real>(
    mu: &DiscreteMeasure<T>,
    sub: &CarrierSubset<T>,
    params: &HausdorffParams<T>,
    opts: &ContentOptions<T>,
) -> Result<ContentEstimate<T>> {
    let sample = sample_carrier(mu, sub, params.delta, opts.pitch)?;
    content_of_sample(&sample, params, opts)
}

/// Content of a finite point set.
pub fn point_content<T: Real>(
    points: &[Point<T>],
    params: &HausdorffParams<T>,
    opts: &ContentOptions<T>,
) -> Result<ContentEstimate<T>> {
    if let Some(p) = points.first() {
        if points.iter().any(|q| q.dim() != p.dim()) {
            return domain("points of mixed dimensions");
        }
    }
    let sample = CarrierSample {
        points: dedup_points(points.to_vec()),
        fragments: Vec::new(),
        pitch: None,
    };
    content_of_sample(&sample, params, opts)
}

pub fn content_of_sample<T: Real>(
    sample: &CarrierSample<T>,
    params: &HausdorffParams<T>,
    opts: &ContentOptions<T>,
) -> Result<ContentEstimate<T>> {
    if !(opts.floor >= T::zero()) {
        return domain(format!("radius floor must be nonnegative, got {}", opts.floor));
    }
    if opts.floor > params.delta {
        return domain("radius floor exceeds delta");
    }
    let floor = match sample.pitch {
        Some(p) => opts.floor.max(p * T::half()).min(params.delta),
        None => opts.floor,
    };
    let n = sample.points.len();
    let discretized = !sample.fragments.is_empty();
    match opts.mode {
        ContentMode::Exact => {
            if n > EXACT_LIMIT {
                return Err(Error::Refused(format!(
                    "exact mode handles at most {EXACT_LIMIT} points, the carrier has {n}; \
                     use greedy mode or a coarser sampling pitch"
                )));
            }
            let cover = exact_cover(&sample.points, params, floor);
            Ok(ContentEstimate {
                lower: cover.weight,
                upper: cover.weight,
                witness: cover,
                mode: ContentMode::Exact,
                samples: n,
                pitch: sample.pitch,
                floor,
                discretized,
                lower_bound: if discretized {
                    "exact minimum over covers of the sample points".into()
                } else {
                    "exact minimum".into()
                },
            })
        }
        ContentMode::Greedy => {
            let mut balls = greedy_cover(&sample.points, params, floor)?;
            patch_fragments(&mut balls, &sample.fragments, params);
            let cover = Cover::from_balls(balls, params);
            let m = separated_count(&sample.points, params.delta);
            let lower = (T::of_usize(m) * params.ball_weight(opts.floor)).min(cover.weight);
            Ok(ContentEstimate {
                lower,
                upper: cover.weight,
                witness: cover,
                mode: ContentMode::Greedy,
                samples: n,
                pitch: sample.pitch,
                floor,
                discretized,
                lower_bound: format!(
                    "{m} carrier points pairwise farther than 2*delta apart, each needing its own ball of radius >= {}",
                    opts.floor
                ),
            })
        }
    }
}

/// `H^s_δ` for each `δ` of a decreasing list, with a common sampling pitch.
pub fn capacity_profile<T: Real>(
    mu: &DiscreteMeasure<T>,
    sub: &CarrierSubset<T>,
    s: T,
    deltas: &[T],
    opts: &ContentOptions<T>,
) -> Result<Vec<ContentEstimate<T>>> {
    for w in deltas.windows(2) {
        if !(w[1] < w[0]) {
            return domain("deltas must be strictly decreasing");
        }
    }
    if deltas.iter().any(|d| !(*d > T::zero())) {
        return domain("deltas must be positive");
    }
    let Some(&smallest) = deltas.last() else {
        return Ok(Vec::new());
    };
    let sample = sample_carrier(mu, sub, smallest, opts.pitch)?;
    let mut out: Vec<ContentEstimate<T>> = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let params = HausdorffParams::new(s, d)?;
        let est = content_of_sample(&sample, &params, opts)?;
        if opts.mode == ContentMode::Exact {
            if let Some(prev) = out.last() {
                let tol = T::eps_scale() * T::of(100.0) * (T::one() + prev.upper);
                if est.upper < prev.upper - tol {
                    return Err(Error::Solver {
                        message: "exact capacity profile is not monotone".into(),
                        iterate: None,
                    });
                }
            }
        }
        out.push(est);
    }
    Ok(out)
}

/// Greedy lower-bound witness: size of a set of points pairwise more than
/// `2δ` apart.
fn separated_count<T: Real>(points: &[Point<T>], delta: T) -> usize {
    if points.is_empty() {
        return 0;
    }
    if !delta.is_finite() {
        return 1;
    }
    let lim2 = (delta + delta) * (delta + delta);
    let mut chosen: Vec<&Point<T>> = Vec::new();
    for p in points {
        if chosen.iter().all(|q| q.dist2(p) > lim2) {
            chosen.push(p);
        }
    }
    chosen.len()
}

fn within_delta<T: Real>(r: T, delta: T) -> bool {
    r <= delta * (T::one() + T::eps_scale() * T::of(16.0))
}

/// Minimum-weight cover of at most [`EXACT_LIMIT`] points by balls through
/// at most N+1 of them.
fn exact_cover<T: Real>(points: &[Point<T>], params: &HausdorffParams<T>, floor: T) -> Cover<T> {
    let n = points.len();
    if n == 0 {
        return Cover::empty();
    }
    let dim = points[0].dim();
    let max_k = (dim + 1).min(n);
    // Cheapest ball for each covered set.
    let mut best: HashMap<u32, (T, Ball<T>)> = HashMap::new();
    let mut idx: Vec<usize> = Vec::with_capacity(max_k);
    fn combos<T: Real>(
        points: &[Point<T>],
        start: usize,
        max_k: usize,
        idx: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if !idx.is_empty() {
            f(idx);
        }
        if idx.len() == max_k {
            return;
        }
        for i in start..points.len() {
            idx.push(i);
            combos(points, i + 1, max_k, idx, f);
            idx.pop();
        }
    }
    combos(points, 0, max_k, &mut idx, &mut |sel: &[usize]| {
        let support: Vec<&Point<T>> = sel.iter().map(|&i| &points[i]).collect();
        let Some(ball) = circumball(&support) else {
            return;
        };
        if !within_delta(ball.radius, params.delta) {
            return;
        }
        let mut mask = 0u32;
        for (j, p) in points.iter().enumerate() {
            if ball.contains_slack(p) {
                mask |= 1 << j;
            }
        }
        let r = ball.radius.max(floor).min(params.delta.max(floor));
        let w = params.ball_weight(r);
        let ball = Ball::closed(ball.center, r);
        match best.get(&mask) {
            Some((bw, _)) if *bw <= w => {}
            _ => {
                best.insert(mask, (w, ball));
            }
        }
    });
    let mut cands: Vec<(u32, T, Ball<T>)> = best.into_iter().map(|(m, (w, b))| (m, w, b)).collect();
    cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    // Dominance: drop a ball if a no-heavier one covers a superset.
    let mut kept: Vec<(u32, T, Ball<T>)> = Vec::new();
    for c in cands {
        if !kept.iter().any(|k| k.0 & c.0 == c.0 && k.1 <= c.1) {
            kept.push(c);
        }
    }
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut memo: Vec<Option<(T, usize)>> = vec![None; 1 << n];
    fn solve<T: Real>(u: u32, kept: &[(u32, T, Ball<T>)], memo: &mut Vec<Option<(T, usize)>>) -> T {
        if u == 0 {
            return T::zero();
        }
        if let Some((w, _)) = memo[u as usize] {
            return w;
        }
        let i = u.trailing_zeros();
        let mut best = (T::infinity(), usize::MAX);
        for (ci, c) in kept.iter().enumerate() {
            if c.0 >> i & 1 == 1 && c.1 < best.0 {
                let w = c.1 + solve(u & !c.0, kept, memo);
                if w < best.0 {
                    best = (w, ci);
                }
            }
        }
        memo[u as usize] = Some(best);
        best.0
    }
    solve(full, &kept, &mut memo);
    let mut balls = Vec::new();
    let mut u = full;
    while u != 0 {
        let (_, ci) = memo[u as usize].expect("solved");
        let c = &kept[ci];
        balls.push(CoverBall {
            center: c.2.center.clone(),
            radius: c.2.radius,
        });
        u &= !c.0;
    }
    Cover::from_balls(balls, params)
}

#[derive(PartialEq)]
struct Ranked<T> {
    score: T,
    cand: usize,
}

impl<T: Real> Eq for Ranked<T> {}

impl<T: Real> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then(other.cand.cmp(&self.cand))
    }
}

/// Lazy greedy weighted set cover over balls centered at carrier points
/// (plus the global enclosing-ball center) with radii on a geometric grid.
fn greedy_cover<T: Real>(
    points: &[Point<T>],
    params: &HausdorffParams<T>,
    floor: T,
) -> Result<Vec<CoverBall<T>>> {
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let delta = params.delta;
    let meb = minimal_enclosing_ball(points)?;
    let mut centers: Vec<Point<T>> = points.to_vec();
    if within_delta(meb.radius, delta) {
        centers.push(meb.center.clone());
    }
    let diam = meb.radius + meb.radius;
    let top = if delta.is_finite() { delta.min(diam) } else { diam };
    let mut radii = vec![T::zero()];
    if top > T::zero() {
        let bottom = floor.max(top * T::of(1e-6));
        let mut r = top;
        let mut grid = Vec::new();
        while r >= bottom {
            grid.push(r);
            r = r / T::two().sqrt();
        }
        grid.reverse();
        radii.extend(grid);
    }
    if within_delta(meb.radius, delta) && !radii.contains(&meb.radius) {
        radii.push(meb.radius);
        radii.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    }
    let slack = T::one() + T::eps_scale() * T::of(16.0);
    // Per center: points by distance and the prefix length for each radius.
    let mut order: Vec<Vec<u32>> = Vec::with_capacity(centers.len());
    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(centers.len());
    for c in &centers {
        let mut d: Vec<(T, u32)> = points.iter().enumerate().map(|(i, p)| (p.dist(c), i as u32)).collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
        counts.push(
            radii
                .iter()
                .map(|&r| d.partition_point(|x| x.0 <= r * slack + T::eps_scale() * T::of(16.0)) as u32)
                .collect(),
        );
        order.push(d.into_iter().map(|x| x.1).collect());
    }
    let nr = radii.len();
    let weight = |k: usize| params.ball_weight(radii[k].max(floor));
    let score = |newly: usize, k: usize| {
        let w = weight(k);
        if w > T::zero() {
            T::of_usize(newly) / w
        } else if newly > 0 {
            T::infinity()
        } else {
            T::zero()
        }
    };
    let mut heap = BinaryHeap::new();
    for ci in 0..centers.len() {
        for k in 0..nr {
            let c = counts[ci][k] as usize;
            if c > 0 {
                heap.push(Ranked {
                    score: score(c, k),
                    cand: ci * nr + k,
                });
            }
        }
    }
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let Some(top) = heap.pop() else {
            return Err(Error::Solver {
                message: "greedy cover ran out of candidate balls".into(),
                iterate: None,
            });
        };
        let (ci, k) = (top.cand / nr, top.cand % nr);
        let prefix = &order[ci][..counts[ci][k] as usize];
        let newly: Vec<u32> = prefix.iter().copied().filter(|&i| !covered[i as usize]).collect();
        if newly.is_empty() {
            continue;
        }
        let fresh = score(newly.len(), k);
        if let Some(next) = heap.peek() {
            if fresh < next.score {
                heap.push(Ranked {
                    score: fresh,
                    cand: top.cand,
                });
                continue;
            }
        }
        let pts: Vec<Point<T>> = newly.iter().map(|&i| points[i as usize].clone()).collect();
        let shrunk = minimal_enclosing_ball(&pts)?;
        let (center, r) = if shrunk.radius <= radii[k] {
            (shrunk.center, shrunk.radius)
        } else {
            (centers[ci].clone(), radii[k])
        };
        for &i in &newly {
            covered[i as usize] = true;
        }
        remaining -= newly.len();
        let r = r.max(floor).min(delta.max(floor));
        chosen.push(CoverBall { center, radius: r });
    }
    Ok(chosen)
}

/// Adds balls over the parts of `fragments` left uncovered between samples,
/// so the cover covers the fragments themselves.
fn patch_fragments<T: Real>(balls: &mut Vec<CoverBall<T>>, fragments: &[Segment<T>], params: &HausdorffParams<T>) {
    let mut extra = Vec::new();
    for f in fragments {
        let mut cov = IntervalSet::default();
        for b in balls.iter() {
            if let Some((lo, hi)) = f.clip_to_ball(&b.center, b.radius) {
                if hi > lo {
                    cov = cov.union(&IntervalSet::from_spans(vec![(lo, hi)]).expect("valid span"));
                }
            }
        }
        let len = f.length();
        for &(t0, t1) in cov.complement().spans() {
            let r = (t1 - t0) * len * T::half() * (T::one() + T::eps_scale());
            if r <= T::zero() {
                continue;
            }
            extra.push(CoverBall {
                center: f.point_at((t0 + t1) * T::half()),
                radius: r.min(params.delta),
            });
        }
    }
    balls.extend(extra);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, SegmentPiece};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point<f64>> {
        v.iter().map(|&(x, y)| Point::xy(x, y)).collect()
    }

    fn segment_measure(len: f64) -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(
            2,
            vec![],
            vec![SegmentPiece {
                segment: Segment::new(Point::xy(0.0, 0.0), Point::xy(len, 0.0)).unwrap(),
                density: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn singleton_and_pairs() {
        let p = HausdorffParams::content(1.0).unwrap();
        let e = point_content(&pts(&[(0.3, 0.4)]), &p, &ContentOptions::exact()).unwrap();
        assert_eq!(e.upper, 0.0);
        let two = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        let e = point_content(&two, &p, &ContentOptions::exact()).unwrap();
        assert_eq!(e.upper, 0.0);
        let e = point_content(&two, &p, &ContentOptions::exact().with_floor(0.01)).unwrap();
        assert_relative_eq!(e.upper, 0.04, max_relative = 1e-12);
        assert_eq!(e.witness.balls.len(), 2);
        // Large floor: one ball of radius 1 beats two of radius 0.6.
        let e = point_content(&two, &p, &ContentOptions::exact().with_floor(0.6)).unwrap();
        assert_relative_eq!(e.upper, 2.0, max_relative = 1e-12);
        let empty: Vec<Point<f64>> = vec![];
        assert_eq!(point_content(&empty, &p, &ContentOptions::exact()).unwrap().upper, 0.0);
    }

    #[test]
    fn exact_mode_refuses_large_inputs() {
        let p = HausdorffParams::content(1.0).unwrap();
        let many: Vec<Point<f64>> = (0..15).map(|i| Point::xy(i as f64, 0.0)).collect();
        let err = point_content(&many, &p, &ContentOptions::exact()).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
        assert!(err.to_string().contains("greedy"));
    }

    #[test]
    fn greedy_circle_is_close_to_two() {
        let n = 1024;
        let v: Vec<Point<f64>> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Point::xy(a.cos(), a.sin())
            })
            .collect();
        let pieces = (0..n)
            .map(|k| SegmentPiece {
                segment: Segment::new(v[k].clone(), v[(k + 1) % n].clone()).unwrap(),
                density: 1.0,
            })
            .collect();
        let mu = DiscreteMeasure::new(2, vec![], pieces).unwrap();
        let p = HausdorffParams::content(1.0).unwrap();
        let e = content(&mu, &CarrierSubset::full(&mu), &p, &ContentOptions::greedy()).unwrap();
        assert!((e.upper - 2.0).abs() <= 0.1, "{}", e.upper);
        assert!(e.lower <= e.upper);
        assert!(e.discretized);
    }

    #[test]
    fn segment_profile_is_flat() {
        let mu = segment_measure(1.0);
        let sub = CarrierSubset::full(&mu);
        let prof = capacity_profile(&mu, &sub, 1.0, &[f64::INFINITY, 0.1, 0.01], &ContentOptions::greedy()).unwrap();
        for e in &prof {
            assert!((e.upper - 1.0).abs() <= 0.05, "{}", e.upper);
        }
        let empty = capacity_profile(&mu, &CarrierSubset::empty(), 1.0, &[1.0, 0.1], &ContentOptions::exact()).unwrap();
        assert!(empty.iter().all(|e| e.upper == 0.0));
        assert!(capacity_profile(&mu, &sub, 1.0, &[0.1, 1.0], &ContentOptions::greedy()).is_err());
    }

    #[test]
    fn greedy_cover_covers_the_fragments() {
        let mu = segment_measure(3.0);
        let p = HausdorffParams::new(1.0, 0.05).unwrap();
        let e = content(&mu, &CarrierSubset::full(&mu), &p, &ContentOptions::greedy()).unwrap();
        let seg = &mu.pieces()[0].segment;
        for k in 0..=3000 {
            let x = seg.point_at(k as f64 / 3000.0);
            assert!(e.witness.balls.iter().any(|b| b.center.dist(&x) <= b.radius * (1.0 + 1e-9) + 1e-12));
        }
        assert!(e.witness.balls.iter().all(|b| b.radius <= 0.05 + 1e-12));
        assert!(e.upper >= 3.0 - 1e-9);
    }

    #[test]
    fn conventions_agree_at_s_one_and_scale_otherwise() {
        for &s in &[0.5, 1.0, 1.7, 2.0] {
            let sph = HausdorffParams::content(s).unwrap();
            let dia = sph.with_convention(Convention::Diameter);
            let one = pts(&[(0.0, 0.0)]);
            let opts = ContentOptions::exact().with_floor(0.3);
            let a = point_content(&one, &sph, &opts).unwrap().upper;
            let b = point_content(&one, &dia, &opts).unwrap().upper;
            assert_relative_eq!(a, b * sph.omega() / 2f64.powf(s), max_relative = 1e-14);
            if s == 1.0 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn params_serde() {
        let p: HausdorffParams<f64> = serde_json::from_str(r#"{"s": 1, "delta": null}"#).unwrap();
        assert!(p.delta().is_infinite());
        let q: HausdorffParams<f64> = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<HausdorffParams<f64>>(r#"{"s": -1}"#).is_err());
        assert!(serde_json::from_str::<HausdorffParams<f64>>(r#"{"s": 1, "delta": 0}"#).is_err());
    }

    /// Brute force over set partitions into enclosing balls.
    fn partition_oracle(points: &[Point<f64>], params: &HausdorffParams<f64>, floor: f64) -> f64 {
        let n = points.len();
        let mut cost = vec![f64::INFINITY; 1 << n];
        for m in 1usize..1 << n {
            let sel: Vec<Point<f64>> = (0..n).filter(|i| m >> i & 1 == 1).map(|i| points[i].clone()).collect();
            let b = minimal_enclosing_ball(&sel).unwrap();
            if b.radius <= params.delta() * (1.0 + 1e-12) {
                cost[m] = params.ball_weight(b.radius.max(floor));
            }
        }
        let mut best = vec![f64::INFINITY; 1 << n];
        best[0] = 0.0;
        for m in 1usize..1 << n {
            let low = m & m.wrapping_neg();
            let mut sub = m;
            while sub > 0 {
                if sub & low != 0 {
                    best[m] = best[m].min(cost[sub] + best[m ^ sub]);
                }
                sub = (sub - 1) & m;
            }
        }
        best[(1 << n) - 1]
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point<f64>>> {
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..=max)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point::xy(x, y)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn exact_matches_partition_oracle(p in arb_points(7), s in 0.3f64..2.0, floor in 0.0f64..0.2, delta in 0.2f64..2.0) {
            let params = HausdorffParams::new(s, delta).unwrap();
            let pts = dedup_points(p);
            let e = point_content(&pts, &params, &ContentOptions::exact().with_floor(floor)).unwrap();
            let o = partition_oracle(&pts, &params, floor);
            prop_assert!((e.upper - o).abs() <= 1e-9 * (1.0 + o), "{} vs {}", e.upper, o);
            prop_assert!(e.witness.balls.iter().all(|b| b.radius <= delta * (1.0 + 1e-9)));
        }

        #[test]
        fn exact_monotone_and_subadditive(p in arb_points(8), split in 1usize..8, s in 0.3f64..2.0, floor in 0.0f64..0.1) {
            let params = HausdorffParams::content(s).unwrap();
            let opts = ContentOptions::exact().with_floor(floor);
            let k = split.min(p.len());
            let (a, b) = p.split_at(k);
            let ca = point_content(a, &params, &opts).unwrap().upper;
            let cb = point_content(b, &params, &opts).unwrap().upper;
            let cab = point_content(&p, &params, &opts).unwrap().upper;
            prop_assert!(ca <= cab + 1e-9);
            prop_assert!(cab <= ca + cb + 1e-9);
        }

        #[test]
        fn exact_delta_monotone(p in arb_points(8), s in 0.3f64..2.0, floor in 0.0f64..0.05) {
            let opts = ContentOptions::exact().with_floor(floor);
            let mut prev = 0.0;
            for &d in &[f64::INFINITY, 1.0, 0.5, 0.25, 0.1] {
                let c = point_content(&p, &HausdorffParams::new(s, d).unwrap(), &opts).unwrap().upper;
                prop_assert!(c >= prev - 1e-9);
                prev = c;
            }
        }

        #[test]
        fn greedy_is_feasible_and_above_exact(p in arb_points(10), s in 0.3f64..2.0, floor in 0.0f64..0.1, delta in 0.1f64..2.0) {
            let params = HausdorffParams::new(s, delta).unwrap();
            let pts = dedup_points(p);
            let g = point_content(&pts, &params, &ContentOptions::greedy().with_floor(floor)).unwrap();
            let e = point_content(&pts, &params, &ContentOptions::exact().with_floor(floor)).unwrap();
            prop_assert!(g.upper >= e.upper - 1e-9);
            prop_assert!(g.lower <= e.upper + 1e-9);
            for q in &pts {
                prop_assert!(g.witness.balls.iter().any(|b| b.center.dist(q) <= b.radius + 1e-9));
            }
        }
    }

    #[test]
    fn atoms_and_fragments_mix() {
        let mu = DiscreteMeasure::new(
            2,
            vec![Atom { location: Point::xy(5.0, 5.0), mass: 1.0 }],
            vec![SegmentPiece {
                segment: Segment::new(Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)).unwrap(),
                density: 1.0,
            }],
        )
        .unwrap();
        let p = HausdorffParams::new(1.0, 1.0).unwrap();
        let e = content(&mu, &CarrierSubset::full(&mu), &p, &ContentOptions::greedy()).unwrap();
        assert!(e.upper >= 1.0 - 1e-9 && e.upper <= 1.1, "{}", e.upper);
        assert!(e.lower > 0.0 || e.floor > 0.0);
    }
}
