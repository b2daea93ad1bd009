//! Straight parts, exhaustion into straight pieces, and localization.
//!
//! Carrier elements are the atoms and the fragments (parameter spans of
//! pieces) of a [`CarrierSubset`]. Exact and heuristic extraction keep
//! elements whole; only the proof-schedule mode and [`subset_with_mass`]
//! split fragments.

use crate::error::{domain, Result};
use crate::geometry::{segment_mass_in_ball, Point, Segment};
use crate::hausdorff::HausdorffParams;
use crate::measure::{restrict, CarrierSubset, DiscreteMeasure, IntervalSet, Origin};
use crate::scalar::Real;
use crate::straightness::{certify, CertRequest, CertStatus, DensityCertificate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Largest number of atoms for exact extraction.
pub const EXACT_MAX_ATOMS: usize = 16;
/// Largest number of fragments for exact extraction.
pub const EXACT_MAX_FRAGMENTS: usize = 8;
/// Largest number of atoms for exact subset-sum.
/// Extraction only needs some violating ball to pick what to drop.
const WITNESS_POLISH: u64 = 2_000;

pub const SUBSET_SUM_LIMIT: usize = 24;
/// Cap on the fragments one level of the proof schedule may create.
const PROOF_FRAGMENT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Largest-mass certifiable union of whole elements.
    Exact,
    /// Greedy peeling of the worst ball's largest contributor.
    Heuristic,
    /// Partition-and-trim construction on one segment fragment.
    ProofSchedule,
}

/// Sequences driving the extraction: slacks `ε_j` (decreasing, summing to
/// less than 1) and radii `r_j` (decreasing, down to the floor `r_min`).
/// `slack` is the `ε` handed to the certifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct ExtractionSchedule<T> {
    pub epsilons: Vec<T>,
    pub radii: Vec<T>,
    pub r_min: T,
    #[serde(default)]
    pub slack: T,
}

impl<T: Real> ExtractionSchedule<T> {
    /// `ε_j = ε_0 2^-j`, `r_1 = r_0 / 2`, and each later radius as large as
    /// allowed by `((t + r_{k+1}) / t)^s ≤ 1 / (1 - ε_{k-1}^2)` for `t ≥ r_k`,
    /// stopping at `r_min`.
    pub fn geometric(s: T, r0: T, r_min: T, eps0: T) -> Result<Self> {
        if !(eps0 > T::zero() && eps0 < T::half()) {
            return domain(format!("eps0 must lie in (0, 1/2), got {eps0}"));
        }
        if !(r_min > T::zero() && r0 >= r_min && r0.is_finite()) {
            return domain(format!("need 0 < r_min <= r0 < inf, got r_min={r_min}, r0={r0}"));
        }
        if !(s >= T::zero()) {
            return domain(format!("s must be >= 0, got {s}"));
        }
        let eps = |k: usize| eps0 / T::of(2f64.powi(k as i32));
        let mut radii = vec![r0];
        while *radii.last().expect("nonempty") > r_min {
            let k = radii.len() - 1;
            let r = radii[k];
            let factor = if k == 0 || s == T::zero() {
                T::half()
            } else {
                let e = eps(k - 1);
                ((T::one() - e * e).powf(-T::one() / s) - T::one()).min(T::half())
            };
            let next = r * factor;
            if next > r_min {
                radii.push(next);
            } else {
                radii.push(r_min);
            }
        }
        let epsilons = (0..radii.len()).map(eps).collect();
        let out = Self {
            epsilons,
            radii,
            r_min,
            slack: T::zero(),
        };
        out.validate()?;
        Ok(out)
    }

    /// Just a floor and a slack, for modes that ignore the sequences.
    pub fn floor(r_min: T) -> Result<Self> {
        let out = Self {
            epsilons: vec![T::of(0.25)],
            radii: vec![r_min],
            r_min,
            slack: T::zero(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn with_slack(mut self, slack: T) -> Self {
        self.slack = slack;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.radii.is_empty() {
            return domain("schedule needs at least one epsilon and one radius");
        }
        if self.epsilons.iter().any(|&e| !(e > T::zero())) {
            return domain("schedule epsilons must be positive");
        }
        if self.epsilons.windows(2).any(|w| w[1] > w[0]) {
            return domain("schedule epsilons must be non-increasing");
        }
        if !(self.epsilons.iter().copied().sum::<T>() < T::one()) {
            return domain("schedule epsilons must sum to less than 1");
        }
        if !(self.r_min > T::zero() && self.r_min.is_finite()) {
            return domain(format!("r_min must be positive and finite, got {}", self.r_min));
        }
        if self.radii.windows(2).any(|w| !(w[1] < w[0])) {
            return domain("schedule radii must be strictly decreasing");
        }
        if self.radii.iter().any(|&r| !(r.is_finite() && r >= self.r_min)) {
            return domain("schedule radii must be finite and at least r_min");
        }
        if !(self.slack >= T::zero() && self.slack.is_finite()) {
            return domain(format!("slack must be finite and >= 0, got {}", self.slack));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", from = "RawPart<T>", into = "RawPart<T>")]
pub struct StraightPart<T: Real> {
    pub subset: CarrierSubset<T>,
    pub mass: T,
    pub certificate: DensityCertificate<T>,
}

/// Wire form of [`StraightPart`] with the subset fields inlined.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawPart<T> {
    atoms: BTreeSet<usize>,
    fragments: BTreeMap<usize, IntervalSet<T>>,
    mass: T,
    certificate: DensityCertificate<T>,
}

impl<T: Real> From<RawPart<T>> for StraightPart<T> {
    fn from(r: RawPart<T>) -> Self {
        Self {
            subset: CarrierSubset {
                atoms: r.atoms,
                pieces: r.fragments,
            },
            mass: r.mass,
            certificate: r.certificate,
        }
    }
}

impl<T: Real> From<StraightPart<T>> for RawPart<T> {
    fn from(p: StraightPart<T>) -> Self {
        Self {
            atoms: p.subset.atoms,
            fragments: p.subset.pieces,
            mass: p.mass,
            certificate: p.certificate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Decomposition<T: Real> {
    pub parts: Vec<StraightPart<T>>,
    pub residual: CarrierSubset<T>,
    /// Maximal certifiable mass of the remainder before each extraction
    /// (exact mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<T>>,
    pub schedule: ExtractionSchedule<T>,
    pub params: HausdorffParams<T>,
    pub mode: ExtractionMode,
}

impl<T: Real> Decomposition<T> {
    pub fn part_mass(&self) -> T {
        self.parts.iter().map(|p| p.mass).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSearch {
    /// Exact up to [`SUBSET_SUM_LIMIT`] atoms, greedy above.
    #[default]
    Auto,
    Exact,
    Greedy,
}

/// Outcome of [`subset_with_mass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MassSubset<T> {
    pub subset: CarrierSubset<T>,
    pub mass: T,
    pub target: T,
    /// `target - mass`, never negative.
    pub gap: T,
    /// True when atoms prevent hitting the target exactly.
    pub atomic_obstruction: bool,
}

/// Best atom subset sum not above `c`, by meet in the middle. Returns the
/// sum and the chosen indices into `w`.
fn subset_sum_exact<T: Real>(w: &[T], c: T) -> (T, Vec<usize>) {
    let half = w.len() / 2;
    let sums = |range: std::ops::Range<usize>| -> Vec<(T, u32)> {
        let n = range.len();
        let base = range.start;
        let mut out = vec![(T::zero(), 0u32); 1 << n];
        for mask in 1u32..(1 << n) {
            let low = mask.trailing_zeros() as usize;
            out[mask as usize] = (out[(mask & (mask - 1)) as usize].0 + w[base + low], mask);
        }
        out
    };
    let left = sums(0..half);
    let mut right = sums(half..w.len());
    right.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
    let mut best = (T::zero(), 0u32, 0u32);
    for &(a, ma) in &left {
        if a > c {
            continue;
        }
        let room = c - a;
        let k = right.partition_point(|x| x.0 <= room);
        if k > 0 {
            let (b, mb) = right[k - 1];
            if a + b > best.0 {
                best = (a + b, ma, mb);
            }
        }
    }
    let mut idx: Vec<usize> = (0..half).filter(|i| best.1 >> i & 1 == 1).collect();
    idx.extend((0..w.len() - half).filter(|i| best.2 >> i & 1 == 1).map(|i| half + i));
    (best.0, idx)
}

/// Descending-weight greedy: the result is at least `c - max(w)`.
fn subset_sum_greedy<T: Real>(w: &[T], c: T) -> (T, Vec<usize>) {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).expect("finite").then(a.cmp(&b)));
    let mut sum = T::zero();
    let mut idx = Vec::new();
    for i in order {
        if sum + w[i] <= c {
            sum = sum + w[i];
            idx.push(i);
        }
    }
    idx.sort_unstable();
    (sum, idx)
}

/// A subset of the carrier with mass as close to `target` as possible from
/// below. Segment mass is split exactly; atoms are chosen by subset-sum.
pub fn subset_with_mass<T: Real>(
    mu: &DiscreteMeasure<T>,
    target: T,
    search: SubsetSearch,
) -> Result<MassSubset<T>> {
    let total = mu.total_mass();
    if !(target > T::zero() && target < total) {
        return domain(format!("target mass {target} must lie in (0, {total})"));
    }
    let weights: Vec<T> = mu.atoms().iter().map(|a| a.mass).collect();
    let seg_total: T = mu.pieces().iter().map(|p| p.mass()).sum();
    let exact = match search {
        SubsetSearch::Auto => weights.len() <= SUBSET_SUM_LIMIT,
        SubsetSearch::Exact if weights.len() > SUBSET_SUM_LIMIT => {
            return domain(format!(
                "exact subset-sum is limited to {SUBSET_SUM_LIMIT} atoms, got {}",
                weights.len()
            ))
        }
        SubsetSearch::Exact => true,
        SubsetSearch::Greedy => false,
    };
    let (atom_sum, atom_idx) = if seg_total >= target || weights.is_empty() {
        (T::zero(), Vec::new())
    } else if exact {
        subset_sum_exact(&weights, target)
    } else {
        subset_sum_greedy(&weights, target)
    };
    let mut subset = CarrierSubset::empty();
    subset.atoms.extend(atom_idx);
    let mut need = target - atom_sum;
    for (k, p) in mu.pieces().iter().enumerate() {
        if need <= T::zero() {
            break;
        }
        let m = p.mass();
        if m <= T::zero() {
            continue;
        }
        if m <= need {
            subset.pieces.insert(k, IntervalSet::full());
            need = need - m;
        } else {
            let t = need / m;
            subset = subset.union(&CarrierSubset::fragment(k, T::zero(), t));
            need = T::zero();
        }
    }
    let mass = subset.mass(mu);
    let gap = (target - mass).max(T::zero());
    let tol = T::eps_scale() * T::of(1e3) * total;
    Ok(MassSubset {
        subset,
        mass,
        target,
        gap,
        atomic_obstruction: gap > tol,
    })
}

#[derive(Debug, Clone, Copy)]
struct Elem<T> {
    origin: Origin<T>,
    mass: T,
}

fn element_mass<T: Real>(mu: &DiscreteMeasure<T>, o: &Origin<T>) -> T {
    match *o {
        Origin::Atom(i) => mu.atoms()[i].mass,
        Origin::Fragment { piece, t0, t1 } => mu.pieces()[piece].mass() * (t1 - t0),
    }
}

fn fragment_segment<T: Real>(mu: &DiscreteMeasure<T>, piece: usize, t0: T, t1: T) -> Segment<T> {
    let s = &mu.pieces()[piece].segment;
    if t0 == T::zero() && t1 == T::one() {
        s.clone()
    } else {
        s.sub(t0, t1)
    }
}

fn mass_in_ball<T: Real>(mu: &DiscreteMeasure<T>, o: &Origin<T>, c: &Point<T>, r: T) -> T {
    match *o {
        Origin::Atom(i) => {
            let a = &mu.atoms()[i];
            if a.location.dist2(c) <= r * r {
                a.mass
            } else {
                T::zero()
            }
        }
        Origin::Fragment { piece, t0, t1 } => {
            let seg = fragment_segment(mu, piece, t0, t1);
            segment_mass_in_ball(&seg, mu.pieces()[piece].density, c, r)
        }
    }
}

fn element_distance<T: Real>(mu: &DiscreteMeasure<T>, a: &Origin<T>, b: &Origin<T>) -> T {
    match (*a, *b) {
        (Origin::Atom(i), Origin::Atom(j)) => mu.atoms()[i].location.dist(&mu.atoms()[j].location),
        (Origin::Atom(i), Origin::Fragment { piece, t0, t1 })
        | (Origin::Fragment { piece, t0, t1 }, Origin::Atom(i)) => {
            fragment_segment(mu, piece, t0, t1).point_distance(&mu.atoms()[i].location)
        }
        (
            Origin::Fragment { piece, t0, t1 },
            Origin::Fragment {
                piece: q,
                t0: u0,
                t1: u1,
            },
        ) => fragment_segment(mu, piece, t0, t1).segment_distance(&fragment_segment(mu, q, u0, u1)),
    }
}

/// Distance between two carrier subsets of `mu`; `+∞` if either is empty.
pub fn subset_distance<T: Real>(mu: &DiscreteMeasure<T>, a: &CarrierSubset<T>, b: &CarrierSubset<T>) -> T {
    let ea = a.elements();
    let eb = b.elements();
    let mut d = T::infinity();
    for x in &ea {
        for y in &eb {
            d = d.min(element_distance(mu, x, y));
        }
    }
    d
}

struct Ctx<'a, T: Real> {
    mu: &'a DiscreteMeasure<T>,
    req: CertRequest<T>,
}

impl<'a, T: Real> Ctx<'a, T> {
    fn new(mu: &'a DiscreteMeasure<T>, params: &HausdorffParams<T>, schedule: &ExtractionSchedule<T>) -> Self {
        Self {
            mu,
            req: CertRequest::new(*params)
                .with_r_min(schedule.r_min.min(params.delta()))
                .with_epsilon(schedule.slack)
                .with_polish_budget(WITNESS_POLISH),
        }
    }

    fn certify_origins(&self, origins: &[Origin<T>]) -> Result<DensityCertificate<T>> {
        let sub = CarrierSubset::from_elements(origins);
        certify(&restrict(self.mu, &sub)?, &self.req)
    }

    fn certify_elems(&self, elems: &[Elem<T>], pick: &[usize]) -> Result<DensityCertificate<T>> {
        let origins: Vec<Origin<T>> = pick.iter().map(|&i| elems[i].origin).collect();
        self.certify_origins(&origins)
    }

    fn part(&self, elems: &[Elem<T>], pick: &[usize], cert: DensityCertificate<T>) -> StraightPart<T> {
        let origins: Vec<Origin<T>> = pick.iter().map(|&i| elems[i].origin).collect();
        let subset = CarrierSubset::from_elements(&origins);
        StraightPart {
            mass: subset.mass(self.mu),
            subset,
            certificate: cert,
        }
    }

    /// Elements of `sub` split into (certifiable, residual). Zero-mass
    /// elements go to the residual.
    fn triage(&self, sub: &CarrierSubset<T>) -> Result<(Vec<Elem<T>>, Vec<Origin<T>>)> {
        let elems: Vec<Elem<T>> = sub
            .elements()
            .into_iter()
            .map(|o| Elem {
                mass: element_mass(self.mu, &o),
                origin: o,
            })
            .collect();
        let ok: Vec<bool> = elems
            .par_iter()
            .map(|e| {
                if e.mass <= T::zero() {
                    return Ok(false);
                }
                Ok(self.certify_origins(&[e.origin])?.is_certified())
            })
            .collect::<Result<_>>()?;
        let mut keep = Vec::new();
        let mut rest = Vec::new();
        for (e, ok) in elems.into_iter().zip(ok) {
            if ok {
                keep.push(e);
            } else {
                rest.push(e.origin);
            }
        }
        Ok((keep, rest))
    }

    /// Largest-mass certifiable subset of `elems`: depth-first over elements
    /// in decreasing mass, pruned by pairwise conflicts and the mass still
    /// available.
    fn exact(&self, elems: &[Elem<T>]) -> Result<(Vec<usize>, DensityCertificate<T>)> {
        let n = elems.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            elems[b]
                .mass
                .partial_cmp(&elems[a].mass)
                .expect("finite")
                .then(a.cmp(&b))
        });
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let pair_ok: Vec<bool> = pairs
            .par_iter()
            .map(|&(i, j)| Ok(self.certify_elems(elems, &[order[i], order[j]])?.is_certified()))
            .collect::<Result<_>>()?;
        let mut compat = vec![0u64; n];
        for (&(i, j), &ok) in pairs.iter().zip(&pair_ok) {
            if ok {
                compat[i] |= 1 << j;
                compat[j] |= 1 << i;
            }
        }
        let masses: Vec<T> = order.iter().map(|&i| elems[i].mass).collect();
        let mut search = ExactSearch {
            ctx: self,
            elems,
            order: &order,
            masses: &masses,
            compat: &compat,
            memo: HashMap::new(),
            best: (T::zero(), 0),
        };
        search.dfs(0, 0, T::zero(), (1u64 << n) - 1)?;
        let mask = search.best.1;
        let pick: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| order[i]).collect();
        let cert = match search.memo.remove(&mask) {
            Some(Some(c)) => c,
            _ => self.certify_elems(elems, &pick)?,
        };
        Ok((pick, cert))
    }

    /// Drop the largest contributor to the worst ball until the rest passes.
    fn peel(&self, elems: &[Elem<T>]) -> Result<(Vec<usize>, DensityCertificate<T>)> {
        let mut cur: Vec<usize> = (0..elems.len()).collect();
        loop {
            let cert = self.certify_elems(elems, &cur)?;
            if cert.is_certified() || cur.len() == 1 {
                return Ok((cur, cert));
            }
            let mut victim: Option<(T, usize)> = None;
            if let Some(w) = &cert.witness {
                for (pos, &i) in cur.iter().enumerate() {
                    let m = mass_in_ball(self.mu, &elems[i].origin, &w.center, w.radius);
                    if m > T::zero() && victim.is_none_or(|(best, _)| m > best) {
                        victim = Some((m, pos));
                    }
                }
            }
            let pos = match victim {
                Some((_, pos)) => pos,
                None => {
                    let mut pos = 0;
                    for (p, &i) in cur.iter().enumerate() {
                        if elems[i].mass > elems[cur[pos]].mass {
                            pos = p;
                        }
                    }
                    pos
                }
            };
            cur.remove(pos);
        }
    }
}

struct ExactSearch<'a, 'b, T: Real> {
    ctx: &'b Ctx<'a, T>,
    elems: &'b [Elem<T>],
    order: &'b [usize],
    masses: &'b [T],
    compat: &'b [u64],
    memo: HashMap<u64, Option<DensityCertificate<T>>>,
    best: (T, u64),
}

impl<T: Real> ExactSearch<'_, '_, T> {
    fn feasible(&mut self, mask: u64) -> Result<bool> {
        if mask.count_ones() <= 2 {
            // singletons and pairs were checked up front
            return Ok(true);
        }
        if let Some(c) = self.memo.get(&mask) {
            return Ok(c.is_some());
        }
        let pick: Vec<usize> = (0..self.order.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.order[i])
            .collect();
        let cert = self.ctx.certify_elems(self.elems, &pick)?;
        let ok = cert.is_certified();
        self.memo.insert(mask, ok.then_some(cert));
        Ok(ok)
    }

    fn dfs(&mut self, i: usize, chosen: u64, mass: T, allowed: u64) -> Result<()> {
        let n = self.order.len();
        let avail: T = (i..n).filter(|j| allowed >> j & 1 == 1).map(|j| self.masses[j]).sum();
        if chosen != 0 && mass + avail <= self.best.0 {
            return Ok(());
        }
        if i == n {
            if mass > self.best.0 {
                self.best = (mass, chosen);
            }
            return Ok(());
        }
        if allowed >> i & 1 == 1 {
            let with = chosen | 1 << i;
            if self.feasible(with)? {
                self.dfs(i + 1, with, mass + self.masses[i], allowed & self.compat[i])?;
            }
        }
        self.dfs(i + 1, chosen, mass, allowed & !(1 << i))
    }
}

fn check_exact_size<T: Real>(elems: &[Elem<T>]) -> Result<()> {
    let atoms = elems.iter().filter(|e| matches!(e.origin, Origin::Atom(_))).count();
    let frags = elems.len() - atoms;
    if atoms > EXACT_MAX_ATOMS || frags > EXACT_MAX_FRAGMENTS {
        return domain(format!(
            "exact mode handles at most {EXACT_MAX_ATOMS} atoms and {EXACT_MAX_FRAGMENTS} fragments, got {atoms} and {frags}"
        ));
    }
    Ok(())
}

/// Extracts one certified straight part of `mu`.
///
/// Exact mode returns a union of whole carrier elements of maximal mass;
/// heuristic mode peels elements off until the remainder passes; proof
/// schedule mode trims one segment fragment level by level along the
/// schedule's radii. Fails when no element is certifiable on its own.
pub fn extract_straight_part<T: Real>(
    mu: &DiscreteMeasure<T>,
    params: &HausdorffParams<T>,
    schedule: &ExtractionSchedule<T>,
    mode: ExtractionMode,
) -> Result<StraightPart<T>> {
    extract_from(mu, &CarrierSubset::full(mu), params, schedule, mode)
}

/// Like [`extract_straight_part`], restricted to the carrier subset `within`
/// (indices refer to `mu`).
pub fn extract_from<T: Real>(
    mu: &DiscreteMeasure<T>,
    within: &CarrierSubset<T>,
    params: &HausdorffParams<T>,
    schedule: &ExtractionSchedule<T>,
    mode: ExtractionMode,
) -> Result<StraightPart<T>> {
    schedule.validate()?;
    within.validate(mu)?;
    let ctx = Ctx::new(mu, params, schedule);
    if mode == ExtractionMode::ProofSchedule {
        return proof_schedule(&ctx, within, params, schedule);
    }
    let (elems, _) = ctx.triage(within)?;
    if elems.is_empty() {
        return domain("no certifiable carrier element; the mass belongs to the residual");
    }
    let (pick, cert) = match mode {
        ExtractionMode::Exact => {
            check_exact_size(&elems)?;
            ctx.exact(&elems)?
        }
        _ => ctx.peel(&elems)?,
    };
    Ok(ctx.part(&elems, &pick, cert))
}

fn proof_schedule<T: Real>(
    ctx: &Ctx<'_, T>,
    within: &CarrierSubset<T>,
    params: &HausdorffParams<T>,
    schedule: &ExtractionSchedule<T>,
) -> Result<StraightPart<T>> {
    let mu = ctx.mu;
    if !within.atoms.is_empty() {
        return domain("proof schedule mode needs a segment-only carrier");
    }
    let r = &schedule.radii;
    if r.len() < 3 {
        return domain("proof schedule mode needs at least three radii");
    }
    // A: the first fragment that passes at every scale, trimmed to mass
    // at most ω r_0^s.
    let mut chosen = None;
    for o in within.elements() {
        if let Origin::Fragment { piece, t0, t1 } = o {
            if element_mass(mu, &o) > T::zero() && ctx.certify_origins(&[o])?.is_certified() {
                chosen = Some((piece, t0, t1));
                break;
            }
        }
    }
    let Some((piece, t0, t1)) = chosen else {
        return domain("no certifiable segment fragment; the mass belongs to the residual");
    };
    let full = element_mass(mu, &Origin::Fragment { piece, t0, t1 });
    let cap = params.omega() * r[0].powf(params.s());
    let t1 = if full > cap { t0 + (t1 - t0) * cap / full } else { t1 };
    let a = Origin::Fragment { piece, t0, t1 };
    let a_mass = element_mass(mu, &a);
    let a_len = mu.pieces()[piece].segment.length() * (t1 - t0);

    // μ|_A ≤ (1 + ε_k) H^s_{2 r_k} for every level used below.
    let levels = (1..r.len() - 1)
        .take_while(|&j| {
            let frags = (a_len / r[j + 1]).floor().to_usize().unwrap_or(usize::MAX) + 1;
            frags <= PROOF_FRAGMENT_LIMIT && j - 1 < schedule.epsilons.len()
        })
        .last()
        .unwrap_or(0);
    if levels == 0 {
        return domain("schedule radii are too fine for the fragment budget");
    }
    for k in 0..levels {
        let req = CertRequest::new(params.with_delta((r[k] * T::two()).min(params.delta()))?)
            .with_r_min(schedule.r_min.min(r[k] * T::two()).min(params.delta()))
            .with_epsilon(schedule.epsilons[k]);
        let sub = CarrierSubset::from_elements(&[a]);
        if !certify(&restrict(mu, &sub)?, &req)?.is_certified() {
            return domain(format!(
                "the chosen fragment fails the level-{k} bound at scale 2 r_{k}; refine the schedule"
            ));
        }
    }

    // E = ∩_j ∪_i E_{i,j}: at level j split A into pieces shorter than
    // r_{j+1} and keep the leading (1 - ε_{j-1}) share of each.
    let mut kept = IntervalSet::from_spans(vec![(t0, t1)])?;
    for j in 1..=levels {
        let n = (a_len / r[j + 1]).floor().to_usize().unwrap_or(usize::MAX) + 1;
        let keep = T::one() - schedule.epsilons[j - 1];
        let step = (t1 - t0) / T::of_usize(n);
        let spans: Vec<(T, T)> = (0..n)
            .map(|i| {
                let lo = t0 + step * T::of_usize(i);
                (lo, (lo + step * keep).min(t1))
            })
            .collect();
        kept = kept.intersect(&IntervalSet::from_spans(spans)?);
    }
    let origins: Vec<Origin<T>> = kept
        .spans()
        .iter()
        .map(|&(u0, u1)| Origin::Fragment { piece, t0: u0, t1: u1 })
        .collect();
    let req = CertRequest::new(*params)
        .with_r_min(r[levels].min(params.delta()))
        .with_epsilon(schedule.slack);
    let sub = CarrierSubset::from_elements(&origins);
    let cert = certify(&restrict(mu, &sub)?, &req)?;
    if !cert.is_certified() {
        return domain(format!(
            "proof-schedule part failed certification (status {:?}, bound {})",
            cert.status, cert.sup_ratio_bound
        ));
    }
    let mass = sub.mass(mu);
    debug_assert!(mass <= a_mass * (T::one() + T::eps_scale()));
    Ok(StraightPart {
        subset: sub,
        mass,
        certificate: cert,
    })
}

/// Exhausts `mu` into certified straight parts.
///
/// Elements that fail on their own (or carry no mass) form the residual.
/// Each step extracts from what is left; exact mode records the maximal
/// certifiable mass `d_n` of the remainder before step `n`.
pub fn decompose<T: Real>(
    mu: &DiscreteMeasure<T>,
    params: &HausdorffParams<T>,
    schedule: &ExtractionSchedule<T>,
    mode: ExtractionMode,
) -> Result<Decomposition<T>> {
    schedule.validate()?;
    if mode == ExtractionMode::ProofSchedule {
        return domain("proof schedule mode extracts a single part; use exact or heuristic to decompose");
    }
    let ctx = Ctx::new(mu, params, schedule);
    let (elems, rest) = ctx.triage(&CarrierSubset::full(mu))?;
    if mode == ExtractionMode::Exact {
        check_exact_size(&elems)?;
    }
    let mut left: Vec<usize> = (0..elems.len()).collect();
    let mut parts = Vec::new();
    let mut d_values = Vec::new();
    while !left.is_empty() {
        let sub: Vec<Elem<T>> = left.iter().map(|&i| elems[i]).collect();
        let (pick, cert) = match mode {
            ExtractionMode::Exact => ctx.exact(&sub)?,
            _ => ctx.peel(&sub)?,
        };
        if pick.is_empty() || !cert.is_certified() {
            // singletons pass, so this only happens on budget exhaustion
            return domain(format!(
                "extraction stalled with {} elements left (status {:?})",
                left.len(),
                cert.status
            ));
        }
        let part = ctx.part(&sub, &pick, cert);
        if mode == ExtractionMode::Exact {
            d_values.push(part.mass);
        }
        parts.push(part);
        let taken: Vec<usize> = pick.iter().map(|&p| left[p]).collect();
        left.retain(|i| !taken.contains(i));
    }
    Ok(Decomposition {
        parts,
        residual: CarrierSubset::from_elements(&rest),
        d_values: (mode == ExtractionMode::Exact).then_some(d_values),
        schedule: schedule.clone(),
        params: *params,
        mode,
    })
}

/// One stage of [`localize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LocalizationStage<T> {
    pub epsilon: T,
    /// Number of leading parts kept.
    pub kept: usize,
    pub kept_mass: T,
    /// Carrier outside the kept parts.
    pub unkept: CarrierSubset<T>,
    pub unkept_mass: T,
    /// Half the smallest distance between kept parts (`null` = `+∞`).
    #[serde(with = "crate::scalar::unbounded")]
    pub delta: T,
    /// Two kept parts touch, so `delta = 0`.
    pub degenerate: bool,
    /// `unkept_mass ≤ epsilon`; false only when the residual is too heavy.
    pub meets_target: bool,
    /// Certificate of the kept union at scale `delta` (absent when nothing
    /// is kept or the stage is degenerate).
    pub certificate: Option<DensityCertificate<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LocalizedDecomposition<T> {
    pub stages: Vec<LocalizationStage<T>>,
}

/// For each `ε_j`, keeps the shortest prefix of parts leaving at most `ε_j`
/// of mass outside, and certifies the kept union up to half the smallest
/// gap between kept parts.
///
/// Balls of radius exactly half a gap can touch two parts, so the
/// certificate uses a scale a relative `1e-9` below it. When that scale is
/// below the schedule's floor, balls are charged at the floor radius, as
/// during extraction.
pub fn localize<T: Real>(
    mu: &DiscreteMeasure<T>,
    dec: &Decomposition<T>,
    epsilons: &[T],
) -> Result<LocalizedDecomposition<T>> {
    if epsilons.iter().any(|&e| !(e > T::zero())) {
        return domain("localization epsilons must be positive");
    }
    if epsilons.windows(2).any(|w| w[1] > w[0]) {
        return domain("localization epsilons must be non-increasing");
    }
    for p in &dec.parts {
        p.subset.validate(mu)?;
    }
    let n = dec.parts.len();
    let mut dist = vec![vec![T::infinity(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = subset_distance(mu, &dec.parts[i].subset, &dec.parts[j].subset);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let total = mu.total_mass();
    let slack = T::eps_scale() * T::of(1e3) * total;
    let full = CarrierSubset::full(mu);
    let stages = epsilons
        .par_iter()
        .map(|&eps| {
            let mut kept = 0;
            let mut kept_mass = T::zero();
            while kept < n && total - kept_mass > eps + slack {
                kept_mass = kept_mass + dec.parts[kept].mass;
                kept += 1;
            }
            let mut union = CarrierSubset::empty();
            for p in &dec.parts[..kept] {
                union = union.union(&p.subset);
            }
            let unkept = full.difference(&union);
            let unkept_mass = unkept.mass(mu) + T::zero();
            let mut delta = T::infinity();
            for i in 0..kept {
                for j in i + 1..kept {
                    delta = delta.min(dist[i][j] * T::half());
                }
            }
            let degenerate = delta <= T::zero();
            let certificate = if kept == 0 || degenerate {
                None
            } else {
                let scale = if delta.is_finite() {
                    delta * (T::one() - T::of(1e-9))
                } else {
                    delta
                };
                let scale = scale.min(dec.params.delta());
                let floor = dec.schedule.r_min;
                // Below the floor every ball is charged at the floor radius:
                // mass ≤ (1+ε) ω floor^s for balls of radius `scale`.
                let (r_lo, eps) = if scale < floor {
                    let f = (floor / scale).powf(dec.params.s());
                    (scale, (T::one() + dec.schedule.slack) * f - T::one())
                } else {
                    (floor, dec.schedule.slack)
                };
                let req = CertRequest::new(dec.params.with_delta(scale)?)
                    .with_r_min(r_lo)
                    .with_epsilon(eps);
                Some(certify(&restrict(mu, &union)?, &req)?)
            };
            Ok(LocalizationStage {
                epsilon: eps,
                kept,
                kept_mass,
                unkept,
                unkept_mass,
                delta,
                degenerate,
                meets_target: unkept_mass <= eps + slack,
                certificate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalizedDecomposition { stages })
}

impl<T: Real> LocalizationStage<T> {
    pub fn is_certified(&self) -> bool {
        match &self.certificate {
            Some(c) => c.status == CertStatus::Certified,
            None => self.kept == 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate, FixtureSpec};
    use crate::measure::Atom;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn atoms(list: &[(f64, f64, f64)]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(
            2,
            list.iter()
                .map(|&(x, y, m)| Atom {
                    location: Point::xy(x, y),
                    mass: m,
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn parallel() -> DiscreteMeasure<f64> {
        generate(&FixtureSpec::ParallelSegments {
            length: 10.0,
            gap: 0.5,
            density: 1.0,
        })
        .unwrap()
    }

    fn unit(s: f64) -> HausdorffParams<f64> {
        HausdorffParams::content(s).unwrap()
    }

    #[test]
    fn subset_mass_on_segment_is_exact() {
        let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::Segment {
            length: 10.0,
            density: 1.0,
        })
        .unwrap();
        let pi = std::f64::consts::PI;
        let out = subset_with_mass(&mu, pi, SubsetSearch::Auto).unwrap();
        assert_relative_eq!(out.mass, pi, max_relative = 1e-14);
        assert!(!out.atomic_obstruction);
        let span = out.subset.pieces[&0].spans()[0];
        assert_relative_eq!((span.1 - span.0) * 10.0, pi, max_relative = 1e-14);
    }

    #[test]
    fn subset_mass_on_atoms() {
        let mu = atoms(&[(0.0, 0.0, 3.0), (1.0, 0.0, 2.0), (2.0, 0.0, 2.0), (3.0, 0.0, 1.0)]);
        let out = subset_with_mass(&mu, 4.0, SubsetSearch::Exact).unwrap();
        assert_eq!(out.mass, 4.0);
        let picked: Vec<f64> = out.subset.atoms.iter().map(|&i| mu.atoms()[i].mass).collect();
        assert!(picked == vec![3.0, 1.0] || picked == vec![2.0, 2.0]);

        let lone = atoms(&[(0.0, 0.0, 5.0)]);
        let out = subset_with_mass(&lone, 3.0, SubsetSearch::Auto).unwrap();
        assert_eq!(out.mass, 0.0);
        assert_eq!(out.gap, 3.0);
        assert!(out.atomic_obstruction);
        assert!(subset_with_mass(&lone, 6.0, SubsetSearch::Auto).is_err());
    }

    proptest! {
        #[test]
        fn subset_sum_exact_beats_greedy(w in prop::collection::vec(0.01f64..1.0, 1..16), frac in 0.05f64..0.95) {
            let total: f64 = w.iter().sum();
            let c = total * frac;
            let (e, ei) = subset_sum_exact(&w, c);
            let (g, gi) = subset_sum_greedy(&w, c);
            let wmax = w.iter().cloned().fold(0.0, f64::max);
            prop_assert!(e <= c && g <= c);
            prop_assert!(e >= g - 1e-12);
            prop_assert!(g >= c - wmax - 1e-12);
            prop_assert!((ei.iter().map(|&i| w[i]).sum::<f64>() - e).abs() < 1e-12);
            prop_assert!((gi.iter().map(|&i| w[i]).sum::<f64>() - g).abs() < 1e-12);
            // brute force
            let mut best = 0.0f64;
            for mask in 0u32..(1 << w.len()) {
                let s: f64 = (0..w.len()).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
                if s <= c { best = best.max(s); }
            }
            prop_assert!((best - e).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_segments_split_into_two_parts() {
        let mu = parallel();
        let sched = ExtractionSchedule::floor(1e-3).unwrap();
        let part = extract_straight_part(&mu, &unit(1.0), &sched, ExtractionMode::Exact).unwrap();
        assert_eq!(part.mass, 10.0);
        assert_eq!(part.subset.pieces.len(), 1);
        for mode in [ExtractionMode::Exact, ExtractionMode::Heuristic] {
            let dec = decompose(&mu, &unit(1.0), &sched, mode).unwrap();
            assert_eq!(dec.parts.len(), 2);
            assert!(dec.residual.is_empty());
            assert_relative_eq!(dec.part_mass(), 20.0);
        }
    }

    #[test]
    fn heavy_atom_is_residual() {
        let mu = atoms(&[(0.0, 0.0, 10.0)]);
        let sched = ExtractionSchedule::floor(0.1).unwrap();
        let dec = decompose(&mu, &unit(1.0), &sched, ExtractionMode::Exact).unwrap();
        assert!(dec.parts.is_empty());
        assert_eq!(dec.residual, CarrierSubset::atom(0));
        assert!(extract_straight_part(&mu, &unit(1.0), &sched, ExtractionMode::Exact).is_err());
    }

    #[test]
    fn proof_schedule_on_a_segment() {
        let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::Segment {
            length: 10.0,
            density: 1.0,
        })
        .unwrap();
        let sched = ExtractionSchedule::geometric(1.0, 1.0, 1e-4, 0.3).unwrap();
        let part = extract_straight_part(&mu, &unit(1.0), &sched, ExtractionMode::ProofSchedule).unwrap();
        assert!(part.certificate.is_certified());
        let total_eps: f64 = sched.epsilons.iter().sum();
        // A has mass ω r_0 = 2; E keeps at least (1 - Σε) of it.
        assert!(part.mass <= 2.0 + 1e-12);
        assert!(part.mass >= (1.0 - total_eps) * 2.0 - 1e-9);
        assert!(part.subset.pieces[&0].spans().len() > 10);
    }

    #[test]
    fn schedule_invariants() {
        let s = ExtractionSchedule::geometric(1.0, 1.0, 1e-3, 0.4).unwrap();
        assert!(s.epsilons.iter().sum::<f64>() < 1.0);
        for k in 1..s.radii.len() - 1 {
            let e = s.epsilons[k - 1];
            let bound = 1.0 / (1.0 - e * e);
            if s.radii[k + 1] > s.r_min {
                assert!((s.radii[k] + s.radii[k + 1]) / s.radii[k] <= bound * (1.0 + 1e-12));
            }
        }
        assert_eq!(*s.radii.last().unwrap(), 1e-3);
        assert!(ExtractionSchedule::geometric(1.0, 1.0, 1e-3, 0.6).is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ExtractionSchedule<f64>>(&json).unwrap(), s);
    }

    #[test]
    fn localize_parallel_segments() {
        let mu = parallel();
        let sched = ExtractionSchedule::floor(1e-3).unwrap();
        let dec = decompose(&mu, &unit(1.0), &sched, ExtractionMode::Exact).unwrap();
        let loc = localize(&mu, &dec, &[0.5, 0.01]).unwrap();
        for st in &loc.stages {
            assert_eq!(st.kept, 2);
            assert_relative_eq!(st.delta, 0.25, max_relative = 1e-12);
            assert!(st.is_certified());
            assert!(st.unkept.is_empty());
        }
        let single: DiscreteMeasure<f64> = generate(&FixtureSpec::Segment {
            length: 1.0,
            density: 1.0,
        })
        .unwrap();
        let dec = decompose(&single, &unit(1.0), &sched, ExtractionMode::Exact).unwrap();
        let loc = localize(&single, &dec, &[0.5]).unwrap();
        assert_eq!(loc.stages[0].kept, 1);
        assert!(loc.stages[0].delta.is_infinite());
        let json = serde_json::to_string(&loc).unwrap();
        assert!(json.contains("\"delta\":null"));
        let back: LocalizedDecomposition<f64> = serde_json::from_str(&json).unwrap();
        assert!(back.stages[0].delta.is_infinite());
    }

    #[test]
    fn decomposition_json_round_trip() {
        let mu = parallel();
        let dec = decompose(&mu, &unit(1.0), &ExtractionSchedule::floor(1e-3).unwrap(), ExtractionMode::Exact).unwrap();
        let json = serde_json::to_string(&dec).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["parts"][0]["fragments"].is_object());
        assert!(v["parts"][0]["certificate"]["status"] == "certified");
        let back: Decomposition<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dec);
    }

    #[test]
    fn localize_below_the_floor() {
        // Together the atoms overfill a floor-sized ball, so they form two
        // parts whose half gap 0.01 is below the floor 0.05.
        let mu = atoms(&[(0.0, 0.0, 0.06), (0.02, 0.0, 0.06)]);
        let sched = ExtractionSchedule::floor(0.05).unwrap();
        let dec = decompose(&mu, &unit(1.0), &sched, ExtractionMode::Exact).unwrap();
        assert_eq!(dec.parts.len(), 2);
        let loc = localize(&mu, &dec, &[0.01]).unwrap();
        let st = &loc.stages[0];
        assert_eq!(st.kept, 2);
        assert_relative_eq!(st.delta, 0.01, max_relative = 1e-12);
        assert!(st.is_certified());
        // each small ball holds one atom, at most 0.06 against the floor charge 0.1
        let cert = st.certificate.as_ref().unwrap();
        assert_relative_eq!(cert.epsilon, 0.05 / (0.01 * (1.0 - 1e-9)) - 1.0, max_relative = 1e-9);
    }
}
