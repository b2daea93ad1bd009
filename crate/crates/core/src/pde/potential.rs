//! Newtonian potentials of discrete measures and the exponential
//! integrability probe.

use super::grid::GridDomain;
use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;
use crate::special::omega;
use serde::{Deserialize, Serialize};

/// Value of the fundamental solution of `-Δ` at distance `r` in `R^n`.
pub fn kernel<T: Real>(n: usize, r: T) -> Result<T> {
    match n {
        0 | 1 => domain(format!("Newtonian potential needs dimension >= 2, got {n}")),
        2 => Ok(-r.ln() / (T::two() * T::PI())),
        _ => {
            let nn = T::of_usize(n);
            let w: T = omega(nn)?;
            Ok(r.powi(2 - n as i32) / ((nn - T::two()) * nn * w))
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// `∫_{s1}^{s2} ½ log(s² + d²) ds`.
fn log_line_integral<T: Real>(s1: T, s2: T, d: T) -> T {
    let f = |s: T| -> T {
        if d == T::zero() {
            if s == T::zero() {
                T::zero()
            } else {
                s * s.abs().ln() - s
            }
        } else {
            T::half() * (s * (s * s + d * d).ln() - T::two() * s + T::two() * d * (s / d).atan())
        }
    };
    f(s2) - f(s1)
}

/// `∫_{s1}^{s2} (s² + d²)^{-1/2} ds`, infinite when the path crosses 0 at
/// `d = 0`.
fn inverse_line_integral<T: Real>(s1: T, s2: T, d: T) -> T {
    if d == T::zero() {
        if s1 <= T::zero() && s2 >= T::zero() {
            return T::infinity();
        }
        return (s2.abs() / s1.abs()).ln().abs();
    }
    (s2 / d).asinh() - (s1 / d).asinh()
}

/// `Nν(x) = ∫ E(x - y) dν(y)` at each point, with `E` the fundamental
/// solution of `-Δ` in `R^N` (`N = ν.dimension()`). Atoms use the kernel
/// directly; segments use closed-form line integrals (`N = 2, 3`). Points
/// on an atom, or on a segment when `N = 3`, get `+∞`.
pub fn newtonian_potential<T: Real>(nu: &DiscreteMeasure<T>, points: &[Point<T>]) -> Result<Vec<T>> {
    let n = nu.dimension();
    kernel::<T>(n, T::one())?;
    if n > 3 && !nu.pieces().is_empty() {
        return domain("segment potentials are implemented for N = 2 and N = 3");
    }
    if points.iter().any(|p| p.dim() != n) {
        return domain(format!("evaluation points must lie in R^{n}"));
    }
    points
        .iter()
        .map(|x| {
            let mut v = T::zero();
            for a in nu.atoms() {
                if a.mass == T::zero() {
                    continue;
                }
                let r = a.location.dist(x);
                if r == T::zero() {
                    return Ok(T::infinity());
                }
                v = v + a.mass * kernel(n, r)?;
            }
            for p in nu.pieces() {
                if p.density == T::zero() {
                    continue;
                }
                let len = p.segment.length();
                let u: Vec<T> = p
                    .segment
                    .b
                    .coords()
                    .iter()
                    .zip(p.segment.a.coords())
                    .map(|(b, a)| (*b - *a) / len)
                    .collect();
                let rel: Vec<T> = x.coords().iter().zip(p.segment.a.coords()).map(|(x, a)| *x - *a).collect();
                let t0 = dot(&rel, &u);
                let d2 = (dot(&rel, &rel) - t0 * t0).max(T::zero());
                let d = d2.sqrt();
                let (s1, s2) = (-t0, len - t0);
                if n == 2 {
                    v = v - p.density * log_line_integral(s1, s2, d) / (T::two() * T::PI());
                } else {
                    let i = inverse_line_integral(s1, s2, d);
                    if i.is_infinite() {
                        return Ok(T::infinity());
                    }
                    v = v + p.density * i / (T::of(4.0) * T::PI());
                }
            }
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Bounded,
    Diverging,
}

/// Outcome of [`exp_integrability_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProbeReport<T> {
    pub spacings: Vec<T>,
    /// Midpoint sums of `exp(Nν)` over the rectangle, one per spacing.
    pub integrals: Vec<T>,
    /// `I_{k+1} / I_k`.
    pub ratios: Vec<T>,
    /// `(I_{k+2} - I_{k+1}) / (I_{k+1} - I_k)`.
    pub increment_ratios: Vec<T>,
    pub classification: Integrability,
    /// Largest atom mass, the smallest `α` with `ν ≤ α H^0`.
    pub max_atom_mass: T,
    /// Whether `ν ≤ α H^0` holds for the supplied `α`.
    pub bound_holds: bool,
    /// Whether the supplied `α` is below `4π`.
    pub alpha_below_threshold: bool,
}

/// Increment ratios above this count as divergence.
pub const DIVERGENCE_RATIO: f64 = 0.99;

/// Midpoint sums of `exp(Nν)` on `dom` at its spacing and `levels - 1`
/// successive halvings. Near an atom of mass `c` the integrand behaves like
/// `|x|^{-c/2π}`; the sums then grow by a fixed factor per halving when
/// `c > 4π`, by a fixed amount when `c = 4π`, and by geometrically
/// shrinking amounts when `c < 4π`. The classification reads the last
/// increment ratio.
pub fn exp_integrability_probe<T: Real>(
    nu: &DiscreteMeasure<T>,
    dom: GridDomain<T>,
    levels: usize,
    alpha: T,
) -> Result<ProbeReport<T>> {
    if nu.dimension() != 2 {
        return domain("the integrability probe is planar");
    }
    if !nu.pieces().is_empty() {
        return domain("the integrability probe takes atoms only");
    }
    if levels < 3 {
        return domain("the probe needs at least three refinement levels");
    }
    let mut spacings = Vec::new();
    let mut integrals = Vec::new();
    let mut g = dom;
    for _ in 0..levels {
        let mids: Vec<Point<T>> = (0..g.ny)
            .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
            .map(|(i, j)| Point::xy(g.x(i) + g.h * T::half(), g.y(j) + g.h * T::half()))
            .collect();
        let pot = newtonian_potential(nu, &mids)?;
        let sum: T = pot.iter().map(|&v| v.exp()).sum();
        spacings.push(g.h);
        integrals.push(sum * g.h * g.h);
        g = g.refined();
    }
    let ratios: Vec<T> = integrals.windows(2).map(|w| w[1] / w[0]).collect();
    let increment_ratios: Vec<T> = integrals
        .windows(3)
        .map(|w| (w[2] - w[1]) / (w[1] - w[0]))
        .collect();
    let last = *increment_ratios.last().expect("levels >= 3");
    let classification = if last.is_finite() && last < T::of(DIVERGENCE_RATIO) {
        Integrability::Bounded
    } else {
        Integrability::Diverging
    };
    let max_atom_mass = nu.atoms().iter().fold(T::zero(), |m, a| m.max(a.mass));
    Ok(ProbeReport {
        spacings,
        integrals,
        ratios,
        increment_ratios,
        classification,
        max_atom_mass,
        bound_holds: max_atom_mass <= alpha,
        alpha_below_threshold: alpha < T::of(4.0) * T::PI(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use crate::measure::{Atom, SegmentPiece};
    use approx::assert_relative_eq;

    fn atom(n: usize, mass: f64) -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(
            n,
            vec![Atom {
                location: Point::origin(n),
                mass,
            }],
            vec![],
        )
        .unwrap()
    }

    /// Adaptive Simpson on `[a, b]`.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn unit_atoms() {
        let v = newtonian_potential(&atom(2, 1.0), &[Point::xy(1.0, 0.0), Point::xy(0.0, 0.5)]).unwrap();
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 2f64.ln() / (2.0 * std::f64::consts::PI), max_relative = 1e-14);
        let v = newtonian_potential(&atom(3, 1.0), &[Point::new(vec![0.0, 1.0, 0.0]).unwrap()]).unwrap();
        assert_relative_eq!(v[0], 1.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-14);
        let v = newtonian_potential(&atom(2, 1.0), &[Point::origin(2)]).unwrap();
        assert!(v[0].is_infinite());
        assert!(newtonian_potential(&atom(1, 1.0), &[Point::origin(1)]).is_err());
        // R^4: 1 / (2 · 4 · ω_4 · r²) with ω_4 = π²/2
        let v = newtonian_potential(&atom(4, 1.0), &[Point::new(vec![2.0, 0.0, 0.0, 0.0]).unwrap()]).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(v[0], 1.0 / (8.0 * pi * pi / 2.0 * 4.0), max_relative = 1e-13);
    }

    #[test]
    fn segment_potentials_match_quadrature() {
        let seg2 = DiscreteMeasure::new(
            2,
            vec![],
            vec![SegmentPiece {
                segment: Segment::new(Point::xy(-1.0, 0.0), Point::xy(1.0, 0.0)).unwrap(),
                density: 1.0,
            }],
        )
        .unwrap();
        let pi = std::f64::consts::PI;
        for (x, y) in [(0.0, 1.0), (0.3, 0.05), (2.5, -0.7), (3.0, 0.0)] {
            let v = newtonian_potential(&seg2, &[Point::xy(x, y)]).unwrap()[0];
            let q = simpson(&|t| -((x - t).powi(2) + y * y).sqrt().ln() / (2.0 * pi), -1.0, 1.0, 1e-13);
            assert_relative_eq!(v, q, max_relative = 1e-8);
        }
        let seg3 = DiscreteMeasure::new(
            3,
            vec![],
            vec![SegmentPiece {
                segment: Segment::new(
                    Point::new(vec![0.0, 0.0, 0.0]).unwrap(),
                    Point::new(vec![1.0, 1.0, 0.0]).unwrap(),
                )
                .unwrap(),
                density: 2.0,
            }],
        )
        .unwrap();
        for x in [[0.5, 0.2, 0.3], [2.0, 2.0, 0.0], [-1.0, 0.5, 0.1]] {
            let v = newtonian_potential(&seg3, &[Point::new(x.to_vec()).unwrap()]).unwrap()[0];
            let l = 2f64.sqrt();
            let q = simpson(
                &|t| {
                    let s = t / l;
                    let r = ((x[0] - s).powi(2) + (x[1] - s).powi(2) + x[2] * x[2]).sqrt();
                    2.0 / (4.0 * pi * r)
                },
                0.0,
                l,
                1e-13,
            );
            assert_relative_eq!(v, q, max_relative = 1e-8);
        }
    }

    fn probe(c: f64) -> ProbeReport<f64> {
        let nu = DiscreteMeasure::new(
            2,
            vec![Atom {
                location: Point::xy(0.5, 0.5),
                mass: c,
            }],
            vec![],
        )
        .unwrap();
        exp_integrability_probe(&nu, GridDomain::unit_square(64).unwrap(), 3, 4.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn probe_classifies_the_threshold() {
        let pi = std::f64::consts::PI;
        for c in [pi, 2.0 * pi, 3.9 * pi] {
            assert_eq!(probe(c).classification, Integrability::Bounded, "c = {c}");
        }
        for c in [4.0 * pi, 4.4 * pi] {
            assert_eq!(probe(c).classification, Integrability::Diverging, "c = {c}");
        }
        // |x|^{-2.2}: the singular part of the sum scales by 2^{0.2}
        let r = probe(4.4 * pi);
        assert!(r.ratios.iter().all(|&q| q >= 1.05));
        // 2π: |x|^{-1} integrates to a finite value; the midpoint sums
        // approach ∫_{[0,1]²} |x - c|^{-1} dx = 4 ln(1 + √2) ... (times 1)
        let r = probe(2.0 * pi);
        let exact = 4.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((r.integrals[2] - exact).abs() < (r.integrals[1] - exact).abs());
        assert!((r.integrals[2] - exact).abs() / exact < 0.05);
    }
}
