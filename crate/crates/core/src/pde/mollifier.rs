//! Grid mollification of discrete measures with a smooth, radially
//! decreasing bump.

use super::grid::{GridDomain, GridField};
use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;

/// `exp(-1 / (1 - ρ²))` for `ρ < 1`, else 0.
pub fn bump<T: Real>(rho: T) -> T {
    let q = rho * rho;
    if q >= T::one() {
        T::zero()
    } else {
        (-T::one() / (T::one() - q)).exp()
    }
}

/// Segment pieces are replaced by point masses this many per grid spacing.
const SEGMENT_SAMPLES_PER_H: usize = 4;

/// Adds `mass` spread by the bump of radius `tau` around `p`, normalized so
/// that `h² Σ` over interior nodes equals `mass`.
fn deposit<T: Real>(f: &mut GridField<T>, p: &Point<T>, mass: T, tau: T) -> Result<()> {
    let d = f.domain;
    let c = p.coords();
    let lo = |v: T, o: T| ((v - tau - o) / d.h).floor().max(T::one()).to_usize().unwrap_or(1);
    let hi = |v: T, o: T, n: usize| {
        ((v + tau - o) / d.h)
            .ceil()
            .min(T::of_usize(n - 1))
            .max(T::zero())
            .to_usize()
            .unwrap_or(0)
    };
    let (i0, i1) = (lo(c[0], d.x0), hi(c[0], d.x0, d.nx));
    let (j0, j1) = (lo(c[1], d.y0), hi(c[1], d.y0, d.ny));
    let mut weights = Vec::new();
    let mut total = T::zero();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let w = bump(d.node(i, j).dist(p) / tau);
            if w > T::zero() {
                weights.push((d.index(i, j), w));
                total = total + w;
            }
        }
    }
    if total <= T::zero() {
        return domain(format!(
            "mollifier of width {tau} catches no interior node near {p:?}; use a wider mollifier or a finer grid"
        ));
    }
    let scale = mass / (total * d.h * d.h);
    for (k, w) in weights {
        f.values[k] = f.values[k] + w * scale;
    }
    Ok(())
}

/// Nodal density of `nu` mollified at width `tau`. Each atom (and each
/// sample point of a segment) is spread separately and renormalized on the
/// grid, so the grid integral equals the mass inside the open rectangle.
pub fn mollify<T: Real>(dom: GridDomain<T>, nu: &DiscreteMeasure<T>, tau: T) -> Result<GridField<T>> {
    if nu.dimension() != 2 {
        return domain("mollification is implemented on planar grids");
    }
    if !(tau > T::zero() && tau.is_finite()) {
        return domain(format!("mollifier width must be positive, got {tau}"));
    }
    let mut f = GridField::zeros(dom);
    for a in nu.atoms() {
        if a.mass > T::zero() && dom.contains(&a.location) {
            deposit(&mut f, &a.location, a.mass, tau)?;
        }
    }
    for p in nu.pieces() {
        let len = p.segment.length();
        let n = (len / dom.h * T::of_usize(SEGMENT_SAMPLES_PER_H))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let m = p.mass() / T::of_usize(n);
        if m <= T::zero() {
            continue;
        }
        for k in 0..n {
            let t = (T::of_usize(k) + T::half()) / T::of_usize(n);
            let q = p.segment.point_at(t);
            if dom.contains(&q) {
                deposit(&mut f, &q, m, tau)?;
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use crate::measure::{Atom, SegmentPiece};
    use approx::assert_relative_eq;

    #[test]
    fn mass_is_preserved_and_profile_decreases() {
        let d = GridDomain::<f64>::unit_square(64).unwrap();
        let nu = DiscreteMeasure::new(
            2,
            vec![Atom {
                location: Point::xy(0.5, 0.5),
                mass: 2.0,
            }],
            vec![SegmentPiece {
                segment: Segment::new(Point::xy(0.2, 0.2), Point::xy(0.4, 0.3)).unwrap(),
                density: 1.5,
            }],
        )
        .unwrap();
        let f = mollify(d, &nu, 4.0 / 64.0).unwrap();
        assert_relative_eq!(f.interior_sum(|v| v), nu.total_mass(), max_relative = 1e-12);
        assert!(f.values.iter().all(|&v| v >= 0.0));
        // along the ray from the atom the profile decreases
        for i in 32..40 {
            assert!(f.at(i, 32) >= f.at(i + 1, 32));
        }
    }

    #[test]
    fn narrow_mollifier_is_rejected() {
        let d = GridDomain::<f64>::unit_square(8).unwrap();
        let nu = DiscreteMeasure::new(
            2,
            vec![Atom {
                location: Point::xy(0.51, 0.51),
                mass: 1.0,
            }],
            vec![],
        )
        .unwrap();
        assert!(mollify(d, &nu, 0.01).is_err());
    }
}
