//! Finite measures made of weighted atoms and uniform-density segments.

use crate::error::{domain, Error, Result};
use crate::geometry::{bounding_box, segment_mass_in_ball, Ball, Point, Segment};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    #[serde(rename = "x")]
    pub location: Point<T>,
    pub mass: T,
}

/// A segment carrying `density` units of mass per unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPiece<T> {
    pub segment: Segment<T>,
    pub density: T,
}

impl<T: Real> SegmentPiece<T> {
    pub fn mass(&self) -> T {
        self.density * self.segment.length()
    }
}

/// Finite nonnegative measure on R^N: atoms plus segment pieces.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    dimension: usize,
    atoms: Vec<Atom<T>>,
    pieces: Vec<SegmentPiece<T>>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(dimension: usize, atoms: Vec<Atom<T>>, pieces: Vec<SegmentPiece<T>>) -> Result<Self> {
        if dimension == 0 {
            return domain("dimension must be at least 1");
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.location.dim() != dimension {
                return domain(format!("atom {i} is not in R^{dimension}"));
            }
            if !(a.mass >= T::zero() && a.mass.is_finite()) {
                return domain(format!("atom {i} has invalid mass {}", a.mass));
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.segment.dim() != dimension {
                return domain(format!("piece {i} is not in R^{dimension}"));
            }
            if !(p.density >= T::zero() && p.density.is_finite()) {
                return domain(format!("piece {i} has invalid density {}", p.density));
            }
            if p.segment.a == p.segment.b {
                return domain(format!("piece {i} is degenerate"));
            }
        }
        Ok(Self {
            dimension,
            atoms,
            pieces,
        })
    }

    pub fn empty(dimension: usize) -> Self {
        Self {
            dimension: dimension.max(1),
            atoms: Vec::new(),
            pieces: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[SegmentPiece<T>] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.pieces.is_empty()
    }

    /// Number of carrier elements (atoms + pieces).
    pub fn element_count(&self) -> usize {
        self.atoms.len() + self.pieces.len()
    }

    pub fn total_mass(&self) -> T {
        total_mass(self)
    }

    /// Same carriers, all masses and densities multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dimension: self.dimension,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location.clone(),
                    mass: a.mass * factor,
                })
                .collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| SegmentPiece {
                    segment: p.segment.clone(),
                    density: p.density * factor,
                })
                .collect(),
        }
    }

    /// Atom locations and segment endpoints; their convex hull contains the
    /// support.
    pub fn extreme_points(&self) -> Vec<Point<T>> {
        let mut pts: Vec<Point<T>> = self.atoms.iter().map(|a| a.location.clone()).collect();
        for p in &self.pieces {
            pts.push(p.segment.a.clone());
            pts.push(p.segment.b.clone());
        }
        pts
    }

    pub fn bounding_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        bounding_box(&self.extreme_points())
    }

    /// Diameter of the carrier (0 for an empty or single-point carrier).
    pub fn diameter(&self) -> T {
        let pts = self.extreme_points();
        let mut d2 = T::zero();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d2 = d2.max(pts[i].dist2(&pts[j]));
            }
        }
        d2.sqrt()
    }

    /// Mass of the closed ball `B̄(center, radius)` without building a [`Ball`].
    pub fn mass_in(&self, center: &Point<T>, radius: T) -> T {
        let r2 = radius * radius;
        let mut m = T::zero();
        for a in &self.atoms {
            if a.location.dist2(center) <= r2 {
                m = m + a.mass;
            }
        }
        for p in &self.pieces {
            m = m + segment_mass_in_ball(&p.segment, p.density, center, radius);
        }
        m
    }

    pub fn cast<U: Real>(&self) -> DiscreteMeasure<U> {
        DiscreteMeasure {
            dimension: self.dimension,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location.cast(),
                    mass: U::of(a.mass.as_f64()),
                })
                .collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| SegmentPiece {
                    segment: p.segment.cast(),
                    density: U::of(p.density.as_f64()),
                })
                .collect(),
        }
    }
}

pub fn total_mass<T: Real>(mu: &DiscreteMeasure<T>) -> T {
    let atoms: T = mu.atoms.iter().map(|a| a.mass).sum();
    let pieces: T = mu.pieces.iter().map(|p| p.mass()).sum();
    atoms + pieces
}

/// Exact mass inside a ball; atoms on the boundary count for closed balls.
pub fn ball_mass<T: Real>(mu: &DiscreteMeasure<T>, ball: &Ball<T>) -> Result<T> {
    if ball.dim() != mu.dimension {
        return domain(format!(
            "ball in R^{} queried against a measure on R^{}",
            ball.dim(),
            mu.dimension
        ));
    }
    let mut m = T::zero();
    for a in &mu.atoms {
        if ball.contains(&a.location) {
            m = m + a.mass;
        }
    }
    for p in &mu.pieces {
        m = m + segment_mass_in_ball(&p.segment, p.density, &ball.center, ball.radius);
    }
    Ok(m)
}

/// Lengths below this are treated as empty parameter intervals.
fn tiny<T: Real>() -> T {
    T::eps_scale() * T::of(1e-3)
}

/// Sorted, pairwise disjoint closed sub-intervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet<T> {
    spans: Vec<(T, T)>,
}

impl<T: Real> IntervalSet<T> {
    pub fn full() -> Self {
        Self {
            spans: vec![(T::zero(), T::one())],
        }
    }

    pub fn from_spans(mut spans: Vec<(T, T)>) -> Result<Self> {
        for &(a, b) in &spans {
            if !(a >= T::zero() && b <= T::one() && a <= b) {
                return domain(format!("parameter interval [{a}, {b}] is not inside [0, 1]"));
            }
        }
        spans.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 - tiny::<T>() {
                return domain("parameter intervals overlap");
            }
        }
        spans.retain(|&(a, b)| b - a > tiny());
        Ok(Self { spans })
    }

    pub fn spans(&self) -> &[(T, T)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn measure(&self) -> T {
        self.spans.iter().map(|&(a, b)| b - a).sum()
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a0, a1) = self.spans[i];
            let (b0, b1) = other.spans[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi - lo > tiny() {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { spans: out }
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cur = T::zero();
        for &(a, b) in &self.spans {
            if a - cur > tiny() {
                out.push((cur, a));
            }
            cur = b;
        }
        if T::one() - cur > tiny() {
            out.push((cur, T::one()));
        }
        Self { spans: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<(T, T)> = self.spans.iter().chain(&other.spans).copied().collect();
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        let mut out: Vec<(T, T)> = Vec::new();
        for (a, b) in all {
            match out.last_mut() {
                Some(last) if a <= last.1 + tiny() => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { spans: out }
    }
}

/// A subset of a measure's carrier: whole atoms plus parameter sub-intervals
/// of pieces. Indices refer to the measure the subset was built for.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CarrierSubset<T> {
    pub atoms: BTreeSet<usize>,
    #[serde(rename = "fragments")]
    pub pieces: BTreeMap<usize, IntervalSet<T>>,
}

/// Where an element of a restricted measure came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin<T> {
    Atom(usize),
    Fragment { piece: usize, t0: T, t1: T },
}

impl<T: Real> CarrierSubset<T> {
    pub fn empty() -> Self {
        Self {
            atoms: BTreeSet::new(),
            pieces: BTreeMap::new(),
        }
    }

    pub fn full(mu: &DiscreteMeasure<T>) -> Self {
        Self {
            atoms: (0..mu.atoms.len()).collect(),
            pieces: (0..mu.pieces.len()).map(|i| (i, IntervalSet::full())).collect(),
        }
    }

    pub fn atom(i: usize) -> Self {
        let mut s = Self::empty();
        s.atoms.insert(i);
        s
    }

    pub fn fragment(piece: usize, t0: T, t1: T) -> Self {
        let mut s = Self::empty();
        if t1 - t0 > tiny() {
            s.pieces.insert(
                piece,
                IntervalSet {
                    spans: vec![(t0, t1)],
                },
            );
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.pieces.values().all(IntervalSet::is_empty)
    }

    /// Checks indices against `mu`.
    pub fn validate(&self, mu: &DiscreteMeasure<T>) -> Result<()> {
        if let Some(&i) = self.atoms.iter().next_back() {
            if i >= mu.atoms.len() {
                return domain(format!("atom index {i} out of range ({} atoms)", mu.atoms.len()));
            }
        }
        if let Some((&i, _)) = self.pieces.iter().next_back() {
            if i >= mu.pieces.len() {
                return domain(format!(
                    "piece index {i} out of range ({} pieces)",
                    mu.pieces.len()
                ));
            }
        }
        Ok(())
    }

    fn normalized(mut self) -> Self {
        self.pieces.retain(|_, s| !s.is_empty());
        self
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut pieces = self.pieces.clone();
        for (&k, s) in &other.pieces {
            let merged = match pieces.get(&k) {
                Some(mine) => mine.union(s),
                None => s.clone(),
            };
            pieces.insert(k, merged);
        }
        Self {
            atoms: self.atoms.union(&other.atoms).copied().collect(),
            pieces,
        }
        .normalized()
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .filter_map(|(k, s)| other.pieces.get(k).map(|o| (*k, s.intersect(o))))
            .collect();
        Self {
            atoms: self.atoms.intersection(&other.atoms).copied().collect(),
            pieces,
        }
        .normalized()
    }

    pub fn difference(&self, other: &Self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|(k, s)| match other.pieces.get(k) {
                Some(o) => (*k, s.difference(o)),
                None => (*k, s.clone()),
            })
            .collect();
        Self {
            atoms: self.atoms.difference(&other.atoms).copied().collect(),
            pieces,
        }
        .normalized()
    }

    /// Mass of `mu` on this subset.
    pub fn mass(&self, mu: &DiscreteMeasure<T>) -> T {
        let atoms: T = self.atoms.iter().map(|&i| mu.atoms[i].mass).sum();
        let pieces: T = self
            .pieces
            .iter()
            .map(|(&k, s)| mu.pieces[k].mass() * s.measure())
            .sum();
        atoms + pieces
    }

    /// Elements in canonical order: atoms first, then fragments by piece and
    /// parameter.
    pub fn elements(&self) -> Vec<Origin<T>> {
        let mut out: Vec<Origin<T>> = self.atoms.iter().map(|&i| Origin::Atom(i)).collect();
        for (&piece, s) in &self.pieces {
            for &(t0, t1) in s.spans() {
                out.push(Origin::Fragment { piece, t0, t1 });
            }
        }
        out
    }

    pub fn from_elements(elements: &[Origin<T>]) -> Self {
        elements.iter().fold(Self::empty(), |acc, e| {
            let single = match *e {
                Origin::Atom(i) => Self::atom(i),
                Origin::Fragment { piece, t0, t1 } => Self::fragment(piece, t0, t1),
            };
            acc.union(&single)
        })
    }

    /// Expresses this subset (given in the index space of the original
    /// measure) in the index space of a restriction whose elements came from
    /// `origins`.
    pub fn transport(&self, origins: &[Origin<T>]) -> Self {
        let mut out = Self::empty();
        let mut atom_idx = 0;
        let mut piece_idx = 0;
        for o in origins {
            match *o {
                Origin::Atom(i) => {
                    if self.atoms.contains(&i) {
                        out.atoms.insert(atom_idx);
                    }
                    atom_idx += 1;
                }
                Origin::Fragment { piece, t0, t1 } => {
                    if let Some(s) = self.pieces.get(&piece) {
                        let window = IntervalSet {
                            spans: vec![(t0, t1)],
                        };
                        let len = t1 - t0;
                        let local: Vec<(T, T)> = s
                            .intersect(&window)
                            .spans()
                            .iter()
                            .map(|&(a, b)| {
                                (
                                    ((a - t0) / len).max(T::zero()),
                                    ((b - t0) / len).min(T::one()),
                                )
                            })
                            .collect();
                        if !local.is_empty() {
                            out.pieces.insert(piece_idx, IntervalSet { spans: local });
                        }
                    }
                    piece_idx += 1;
                }
            }
        }
        out.normalized()
    }
}

/// `mu|_sub`: a new measure holding the selected atoms and one piece per
/// selected fragment.
pub fn restrict<T: Real>(mu: &DiscreteMeasure<T>, sub: &CarrierSubset<T>) -> Result<DiscreteMeasure<T>> {
    Ok(restrict_with_origin(mu, sub)?.0)
}

/// Like [`restrict`], also returning the origin of every element (atoms
/// first, then pieces, in the order they appear in the result).
pub fn restrict_with_origin<T: Real>(
    mu: &DiscreteMeasure<T>,
    sub: &CarrierSubset<T>,
) -> Result<(DiscreteMeasure<T>, Vec<Origin<T>>)> {
    sub.validate(mu)?;
    let mut origins = Vec::new();
    let atoms = sub
        .atoms
        .iter()
        .map(|&i| {
            origins.push(Origin::Atom(i));
            mu.atoms[i].clone()
        })
        .collect();
    let mut pieces = Vec::new();
    for (&k, s) in &sub.pieces {
        let p = &mu.pieces[k];
        for &(t0, t1) in s.spans() {
            let seg = if t0 == T::zero() && t1 == T::one() {
                p.segment.clone()
            } else {
                p.segment.sub(t0, t1)
            };
            if seg.a == seg.b {
                continue;
            }
            origins.push(Origin::Fragment { piece: k, t0, t1 });
            pieces.push(SegmentPiece {
                segment: seg,
                density: p.density,
            });
        }
    }
    Ok((
        DiscreteMeasure {
            dimension: mu.dimension,
            atoms,
            pieces,
        },
        origins,
    ))
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    dimension: usize,
    #[serde(default)]
    atoms: Vec<RawAtom>,
    #[serde(default)]
    pieces: Vec<RawPiece>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    x: Vec<f64>,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    a: Vec<f64>,
    b: Vec<f64>,
    density: f64,
}

fn parse_err<V>(location: impl Into<String>, message: impl Into<String>) -> Result<V> {
    Err(Error::Parse {
        location: location.into(),
        message: message.into(),
    })
}

fn check_coords(loc: String, c: &[f64], dim: usize) -> Result<()> {
    if c.len() != dim {
        return parse_err(loc, format!("expected {dim} coordinates, found {}", c.len()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return parse_err(loc, "coordinates must be finite");
    }
    Ok(())
}

fn check_weight(loc: String, w: f64) -> Result<()> {
    if !(w.is_finite() && w >= 0.0) {
        return parse_err(loc, format!("must be a finite nonnegative number, found {w}"));
    }
    Ok(())
}

/// Parses the measure JSON schema, reporting the offending field path and
/// line on failure.
pub fn load_measure<T: Real, R: Read>(reader: R) -> Result<DiscreteMeasure<T>> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let raw: RawMeasure = match serde_path_to_error::deserialize(&mut de) {
        Ok(r) => r,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return parse_err(
                format!("{path} (line {}, column {})", inner.line(), inner.column()),
                inner.to_string(),
            );
        }
    };
    if raw.dimension == 0 {
        return parse_err("dimension", "must be at least 1");
    }
    let dim = raw.dimension;
    let mut atoms = Vec::with_capacity(raw.atoms.len());
    for (i, a) in raw.atoms.iter().enumerate() {
        check_coords(format!("atoms[{i}].x"), &a.x, dim)?;
        check_weight(format!("atoms[{i}].mass"), a.mass)?;
        atoms.push(Atom {
            location: Point::from_vec(a.x.iter().map(|&v| T::of(v)).collect()),
            mass: T::of(a.mass),
        });
    }
    let mut pieces = Vec::with_capacity(raw.pieces.len());
    for (i, p) in raw.pieces.iter().enumerate() {
        check_coords(format!("pieces[{i}].a"), &p.a, dim)?;
        check_coords(format!("pieces[{i}].b"), &p.b, dim)?;
        check_weight(format!("pieces[{i}].density"), p.density)?;
        if p.a == p.b {
            return parse_err(format!("pieces[{i}]"), "endpoints a and b must differ");
        }
        pieces.push(SegmentPiece {
            segment: Segment {
                a: Point::from_vec(p.a.iter().map(|&v| T::of(v)).collect()),
                b: Point::from_vec(p.b.iter().map(|&v| T::of(v)).collect()),
            },
            density: T::of(p.density),
        });
    }
    DiscreteMeasure::new(dim, atoms, pieces)
}

pub fn load_measure_str<T: Real>(s: &str) -> Result<DiscreteMeasure<T>> {
    load_measure(s.as_bytes())
}

/// Writes `mu` in the measure JSON schema. Output is byte-for-byte
/// deterministic.
pub fn save_measure<T: Real, W: Write>(mu: &DiscreteMeasure<T>, mut writer: W) -> Result<()> {
    let raw = RawMeasure {
        dimension: mu.dimension,
        atoms: mu
            .atoms
            .iter()
            .map(|a| RawAtom {
                x: a.location.coords().iter().map(|c| c.as_f64()).collect(),
                mass: a.mass.as_f64(),
            })
            .collect(),
        pieces: mu
            .pieces
            .iter()
            .map(|p| RawPiece {
                a: p.segment.a.coords().iter().map(|c| c.as_f64()).collect(),
                b: p.segment.b.coords().iter().map(|c| c.as_f64()).collect(),
                density: p.density.as_f64(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &raw).map_err(|e| Error::Io(e.into()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn measure_to_string<T: Real>(mu: &DiscreteMeasure<T>) -> String {
    let mut buf = Vec::new();
    save_measure(mu, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}
