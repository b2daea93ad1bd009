//! Brute-force reference computations for atomic and small segment measures.
//!
//! These are slow and exhaustive on purpose; they share no search logic with
//! the certifier and are used to cross-check it.

use crate::error::{domain, Result};
use crate::geometry::{minimal_enclosing_ball, Point};
use crate::measure::DiscreteMeasure;

/// Largest number of atoms the subset oracles accept.
pub const SUBSET_LIMIT: usize = 20;

fn ratio(mass: f64, omega: f64, s: f64, r: f64) -> f64 {
    mass / (omega * r.powf(s))
}

/// Radii of the minimal enclosing balls of every nonempty subset of `pts`,
/// indexed by bit mask (entry 0 unused).
fn subset_radii(pts: &[Point<f64>]) -> Result<Vec<f64>> {
    let n = pts.len();
    let mut radii = vec![0.0; 1 << n];
    let mut buf = Vec::with_capacity(n);
    for mask in 1usize..1 << n {
        buf.clear();
        buf.extend((0..n).filter(|i| mask >> i & 1 == 1).map(|i| pts[i].clone()));
        radii[mask] = if buf.len() == 1 {
            0.0
        } else {
            minimal_enclosing_ball(&buf)?.radius
        };
    }
    Ok(radii)
}

fn subset_masses(masses: &[f64]) -> Vec<f64> {
    let n = masses.len();
    let mut out = vec![0.0; 1 << n];
    for mask in 1usize..1 << n {
        let low = mask.trailing_zeros() as usize;
        out[mask] = out[mask & (mask - 1)] + masses[low];
    }
    out
}

fn atoms_only(mu: &DiscreteMeasure<f64>) -> Result<(Vec<Point<f64>>, Vec<f64>)> {
    if !mu.pieces().is_empty() {
        return domain("the subset oracles handle atoms only");
    }
    if mu.atoms().len() > SUBSET_LIMIT {
        return domain(format!(
            "{} atoms exceed the subset oracle limit of {SUBSET_LIMIT}",
            mu.atoms().len()
        ));
    }
    Ok((
        mu.atoms().iter().map(|a| a.location.clone()).collect(),
        mu.atoms().iter().map(|a| a.mass).collect(),
    ))
}

/// Exact `sup μ(B̄_r(x)) / (ω r^s)` over closed balls with `r ∈ [r_min, δ]`,
/// by enumerating which atoms a ball holds: a set `A` fits in a ball of
/// radius `max(r_A, r_min)` where `r_A` is its enclosing radius.
pub fn atom_sup_ratio(mu: &DiscreteMeasure<f64>, s: f64, omega: f64, r_min: f64, delta: f64) -> Result<f64> {
    let (pts, masses) = atoms_only(mu)?;
    let radii = subset_radii(&pts)?;
    let sums = subset_masses(&masses);
    let mut best = 0.0f64;
    for mask in 1..radii.len() {
        let r = radii[mask].max(r_min);
        if r <= delta {
            best = best.max(ratio(sums[mask], omega, s, r));
        }
    }
    Ok(best)
}

/// Largest mass of an atom subset whose restriction satisfies the density
/// criterion with slack factor `tolerance` (e.g. `1 + ε`), over
/// `r ∈ [r_min, δ]`; also returns one maximizing mask.
///
/// A subset fails iff some sub-subset overfills its own enclosing ball, so
/// the failing masks are the upward closure of the directly overfull ones.
pub fn max_straight_subset(
    mu: &DiscreteMeasure<f64>,
    s: f64,
    omega: f64,
    r_min: f64,
    delta: f64,
    tolerance: f64,
) -> Result<(f64, usize)> {
    let (pts, masses) = atoms_only(mu)?;
    let n = pts.len();
    let radii = subset_radii(&pts)?;
    let sums = subset_masses(&masses);
    let mut bad: Vec<bool> = (0..1usize << n)
        .map(|mask| {
            if mask == 0 {
                return false;
            }
            let r = radii[mask].max(r_min);
            r <= delta && sums[mask] > tolerance * omega * r.powf(s)
        })
        .collect();
    for i in 0..n {
        for mask in 0..1usize << n {
            if mask >> i & 1 == 1 && bad[mask ^ (1 << i)] {
                bad[mask] = true;
            }
        }
    }
    let mut best = (0.0, 0usize);
    for mask in 0..1usize << n {
        if !bad[mask] && sums[mask] > best.0 {
            best = (sums[mask], mask);
        }
    }
    Ok(best)
}

/// Grid scan of the density ratio: centers on a lattice of pitch
/// `center_pitch` covering the carrier's bounding box (2-D only).
///
/// For atoms the radius sweep is exact per center (the ratio only peaks
/// where a new atom enters); pieces add a radius lattice of pitch
/// `radius_pitch`. Returns a lower bound on the true supremum.
pub fn grid_scan_sup(
    mu: &DiscreteMeasure<f64>,
    s: f64,
    omega: f64,
    r_min: f64,
    delta: f64,
    center_pitch: f64,
    radius_pitch: f64,
) -> Result<f64> {
    if mu.dimension() != 2 {
        return domain("grid scan is implemented for R^2");
    }
    if !(center_pitch > 0.0 && radius_pitch > 0.0) {
        return domain("grid pitches must be positive");
    }
    let Some((lo, hi)) = mu.bounding_box() else {
        return Ok(0.0);
    };
    let nx = ((hi[0] - lo[0]) / center_pitch).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / center_pitch).ceil() as usize + 1;
    let r_cap = delta.min(mu.diameter().max(r_min));
    let mut radii_grid = Vec::new();
    if !mu.pieces().is_empty() {
        let mut r = r_min;
        while r <= r_cap {
            radii_grid.push(r);
            r += radius_pitch;
        }
        radii_grid.push(r_cap);
    }
    let mut best = 0.0f64;
    let mut dist: Vec<(f64, f64)> = Vec::with_capacity(mu.atoms().len());
    for i in 0..nx {
        for j in 0..ny {
            let c = Point::xy(lo[0] + i as f64 * center_pitch, lo[1] + j as f64 * center_pitch);
            if mu.pieces().is_empty() {
                dist.clear();
                dist.extend(mu.atoms().iter().map(|a| (a.location.dist(&c), a.mass)));
                dist.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut cum = 0.0;
                for (k, &(d, m)) in dist.iter().enumerate() {
                    cum += m;
                    if dist.get(k + 1).is_some_and(|next| next.0 == d) {
                        continue;
                    }
                    let r = d.max(r_min);
                    if r <= delta {
                        best = best.max(ratio(cum, omega, s, r));
                    }
                }
            } else {
                for &r in &radii_grid {
                    best = best.max(ratio(mu.mass_in(&c, r), omega, s, r));
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Segment};
    use crate::measure::{Atom, SegmentPiece};
    use approx::assert_relative_eq;

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

    #[test]
    fn two_atoms() {
        let mu = atoms(&[(0.0, 0.0, 0.5), (1.0, 0.0, 0.5)]);
        // One atom at the floor: 0.5 / (2 * 0.1); both at radius 1/2: 1 / 1.
        assert_relative_eq!(atom_sup_ratio(&mu, 1.0, 2.0, 0.1, f64::INFINITY).unwrap(), 2.5);
        assert_relative_eq!(atom_sup_ratio(&mu, 1.0, 2.0, 0.6, f64::INFINITY).unwrap(), 1.0 / 1.2);
        let scan = grid_scan_sup(&mu, 1.0, 2.0, 0.6, f64::INFINITY, 0.05, 0.01).unwrap();
        assert_relative_eq!(scan, 1.0 / 1.2, max_relative = 1e-12);
    }

    #[test]
    fn max_subset_drops_the_heavy_atom() {
        let mu = atoms(&[(0.0, 0.0, 0.1), (5.0, 0.0, 1.0), (10.0, 0.0, 0.1)]);
        // floor 0.2 gives capacity 0.4 per isolated atom.
        let (d, mask) = max_straight_subset(&mu, 1.0, 2.0, 0.2, f64::INFINITY, 1.0).unwrap();
        assert_relative_eq!(d, 0.2);
        assert_eq!(mask, 0b101);
    }

    #[test]
    fn grid_scan_on_parallel_segments() {
        let p = |y: f64| SegmentPiece {
            segment: Segment::new(Point::xy(0.0, y), Point::xy(10.0, y)).unwrap(),
            density: 1.0,
        };
        let mu = DiscreteMeasure::new(2, vec![], vec![p(0.25), p(-0.25)]).unwrap();
        let scan = grid_scan_sup(&mu, 1.0, 2.0, 0.01, f64::INFINITY, 0.25, 0.01).unwrap();
        assert!(scan > 1.99 && scan <= 1.9975047);
    }

    #[test]
    fn scan_never_exceeds_exact() {
        let mu = atoms(&[(0.1, 0.2, 0.3), (0.4, 0.25, 0.2), (0.9, 0.7, 0.4), (0.5, 0.5, 0.1)]);
        let exact = atom_sup_ratio(&mu, 0.5, 1.4688125832636094, 0.05, 1.0).unwrap();
        let scan = grid_scan_sup(&mu, 0.5, 1.4688125832636094, 0.05, 1.0, 0.01, 0.01).unwrap();
        assert!(scan <= exact * (1.0 + 1e-12));
        assert!(scan >= 0.9 * exact);
    }
}
