//! Weak-form residual of `-Δu + e^u - 1 = ν` against smooth bumps.

use super::grid::GridField;
use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// `φ(x) = (1 - |x - c|²/R²)³` inside the disc of radius `R`, zero outside.
/// It is `C²`, so `Δφ` is available in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct Bump<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Real> Bump<T> {
    pub fn new(center: Point<T>, radius: T) -> Result<Self> {
        if center.dim() != 2 {
            return domain("test bumps are planar");
        }
        if !(radius > T::zero() && radius.is_finite()) {
            return domain(format!("bump radius must be positive, got {radius}"));
        }
        Ok(Self { center, radius })
    }

    fn q(&self, x: T, y: T) -> T {
        let c = self.center.coords();
        ((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1])) / (self.radius * self.radius)
    }

    pub fn value(&self, x: T, y: T) -> T {
        let q = self.q(x, y);
        if q >= T::one() {
            T::zero()
        } else {
            let w = T::one() - q;
            w * w * w
        }
    }

    /// `Δφ = (24 q (1 - q) - 12 (1 - q)²) / R²`.
    pub fn laplacian(&self, x: T, y: T) -> T {
        let q = self.q(x, y);
        if q >= T::one() {
            return T::zero();
        }
        let w = T::one() - q;
        (T::of(24.0) * q * w - T::of(12.0) * w * w) / (self.radius * self.radius)
    }

    /// `∫ φ dν`; exact for atoms and (4-point Gauss on the clipped
    /// parameter interval, degree 6 integrand) for segments.
    pub fn integrate(&self, nu: &DiscreteMeasure<T>) -> T {
        let mut s = T::zero();
        for a in nu.atoms() {
            let c = a.location.coords();
            s = s + a.mass * self.value(c[0], c[1]);
        }
        let nodes = [
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ];
        for p in nu.pieces() {
            let Some((t0, t1)) = p.segment.clip_to_ball(&self.center, self.radius) else {
                continue;
            };
            let (mid, half) = ((t0 + t1) * T::half(), (t1 - t0) * T::half());
            let mut acc = T::zero();
            for (x, w) in nodes {
                for sign in [-T::one(), T::one()] {
                    let q = p.segment.point_at(mid + sign * half * T::of(x));
                    let c = q.coords();
                    acc = acc + T::of(w) * self.value(c[0], c[1]);
                }
            }
            s = s + p.density * p.segment.length() * half * acc;
        }
        s
    }
}

/// Right-hand side of the equation: a measure, or a nodal density
/// integrated with the grid rule.
#[derive(Debug, Clone, Copy)]
pub enum RightHandSide<'a, T> {
    Measure(&'a DiscreteMeasure<T>),
    Density(&'a GridField<T>),
}

/// `-∫ u Δφ + ∫ (e^u - 1) φ - ∫ φ dν` for each bump, with grid sums for
/// the `u` terms. Bumps whose support reaches the boundary are rejected.
pub fn distributional_residual<T: Real>(u: &GridField<T>, rhs: RightHandSide<'_, T>, tests: &[Bump<T>]) -> Result<Vec<T>> {
    let d = u.domain;
    if let RightHandSide::Density(f) = rhs {
        if f.domain != d {
            return domain("density and solution live on different grids");
        }
    }
    if let RightHandSide::Measure(nu) = rhs {
        if nu.dimension() != 2 {
            return domain("the residual is planar");
        }
    }
    let h2 = d.h * d.h;
    tests
        .iter()
        .map(|b| {
            let c = b.center.coords();
            if !(c[0] - b.radius > d.x0 && c[0] + b.radius < d.x1() && c[1] - b.radius > d.y0 && c[1] + b.radius < d.y1()) {
                return domain(format!(
                    "bump at {:?} with radius {} reaches the boundary",
                    c, b.radius
                ));
            }
            let mut s = T::zero();
            for j in 1..d.ny {
                for i in 1..d.nx {
                    let (x, y) = (d.x(i), d.y(j));
                    let phi = b.value(x, y);
                    let lap = b.laplacian(x, y);
                    if phi == T::zero() && lap == T::zero() {
                        continue;
                    }
                    let v = u.at(i, j);
                    let mut term = -v * lap + v.exp_m1() * phi;
                    if let RightHandSide::Density(f) = rhs {
                        term = term - f.at(i, j) * phi;
                    }
                    s = s + term;
                }
            }
            s = s * h2;
            if let RightHandSide::Measure(nu) = rhs {
                s = s - b.integrate(nu);
            }
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use crate::measure::{Atom, SegmentPiece};
    use crate::pde::energy::{minimize_energy, NewtonOptions};
    use crate::pde::grid::GridDomain;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_matches_finite_differences() {
        let b = Bump::new(Point::xy(0.3, 0.4), 0.25).unwrap();
        let e = 1e-4;
        for (x, y) in [(0.35, 0.42), (0.2, 0.5), (0.3, 0.4)] {
            let fd = (b.value(x + e, y) + b.value(x - e, y) + b.value(x, y + e) + b.value(x, y - e) - 4.0 * b.value(x, y)) / (e * e);
            assert_relative_eq!(b.laplacian(x, y), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn segment_integral_is_exact() {
        let b = Bump::new(Point::xy(0.5, 0.5), 0.3).unwrap();
        let nu = DiscreteMeasure::new(
            2,
            vec![Atom {
                location: Point::xy(0.5, 0.6),
                mass: 2.0,
            }],
            vec![SegmentPiece {
                segment: Segment::new(Point::xy(0.0, 0.5), Point::xy(1.0, 0.5)).unwrap(),
                density: 1.5,
            }],
        )
        .unwrap();
        // along y = 0.5: ∫_{-R}^{R} (1 - x²/R²)³ dx = 32 R / 35
        let expect = 2.0 * (1.0 - 0.01f64 / 0.09).powi(3) + 1.5 * 32.0 * 0.3 / 35.0;
        assert_relative_eq!(b.integrate(&nu), expect, max_relative = 1e-13);
    }

    #[test]
    fn boundary_bumps_are_rejected() {
        let d = GridDomain::<f64>::unit_square(16).unwrap();
        let u = GridField::zeros(d);
        let b = Bump::new(Point::xy(0.2, 0.5), 0.25).unwrap();
        let nu = DiscreteMeasure::empty(2);
        assert!(distributional_residual(&u, RightHandSide::Measure(&nu), &[b]).is_err());
    }

    #[test]
    fn manufactured_solution_residual_is_second_order() {
        let tests = [
            Bump::new(Point::xy(0.5, 0.5), 0.3).unwrap(),
            Bump::new(Point::xy(0.35, 0.6), 0.2).unwrap(),
        ];
        let mut res = Vec::new();
        for n in [32, 64, 128] {
            let d = GridDomain::<f64>::unit_square(n).unwrap();
            let f = GridField::from_fn(d, |x: f64, y: f64| {
                let u = (PI * x).sin() * (PI * y).sin();
                2.0 * PI * PI * u + u.exp_m1()
            });
            let (u, _) = minimize_energy(&f, &GridField::zeros(d), &NewtonOptions::default()).unwrap();
            let r = distributional_residual(&u, RightHandSide::Density(&f), &tests).unwrap();
            res.push(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        for w in res.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{res:?}");
        }
    }
}
