//! Deterministic example measures.
//!
//! Every generator works in `f64` and casts at the end, so a spec (seed
//! included) always yields the same bytes when serialized.

use crate::error::{domain, Result};
use crate::geometry::{Point, Segment};
use crate::measure::{Atom, DiscreteMeasure, SegmentPiece};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Similarity dimension `log 2 / log 3` of the middle-thirds Cantor set.
pub const CANTOR_DIMENSION: f64 = 0.630_929_753_571_457_4;

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

/// A fixture recipe. Serialized with a `kind` tag, e.g.
/// `{"kind": "circle_polygon", "n": 1024}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureSpec {
    /// `(0,0)–(length,0)`.
    Segment {
        length: f64,
        #[serde(default = "one")]
        density: f64,
    },
    /// Two horizontal segments `[0,length] × {±gap/2}`.
    ParallelSegments {
        length: f64,
        gap: f64,
        #[serde(default = "one")]
        density: f64,
    },
    /// Chords of the regular `n`-gon inscribed in the circle of `radius`.
    CirclePolygon {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        density: f64,
    },
    /// Middle-thirds intervals of `[0,1] × {0}` at `depth`. The default
    /// density `(3/2)^depth` gives total mass 1.
    CantorSegments {
        depth: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<f64>,
    },
    /// One atom of mass `2^-depth` at the midpoint of each Cantor interval.
    CantorAtoms { depth: u32 },
    /// `n` atoms uniform in `[0,side]^dimension` with masses uniform in
    /// `[mass_min, mass_max]`.
    AtomCloud {
        n: usize,
        #[serde(default = "two")]
        dimension: usize,
        #[serde(default = "one")]
        side: f64,
        mass_min: f64,
        mass_max: f64,
        seed: u64,
    },
    /// `clusters` groups of `per_cluster` atoms, each group uniform in a disc
    /// of radius `spread` around `(k * separation, 0)`; masses uniform in
    /// `[mass_min, mass_max]`.
    AtomClusters {
        clusters: usize,
        per_cluster: usize,
        spread: f64,
        separation: f64,
        mass_min: f64,
        mass_max: f64,
        seed: u64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

fn mass_range(lo: f64, hi: f64) -> Result<()> {
    if lo >= 0.0 && hi >= lo && hi.is_finite() && hi > 0.0 {
        Ok(())
    } else {
        domain(format!("invalid mass range [{lo}, {hi}]"))
    }
}

fn seg(a: (f64, f64), b: (f64, f64), density: f64) -> Result<SegmentPiece<f64>> {
    Ok(SegmentPiece {
        segment: Segment::new(Point::xy(a.0, a.1), Point::xy(b.0, b.1))?,
        density,
    })
}

/// Left endpoints of the `2^depth` Cantor intervals of length `3^-depth`.
fn cantor_lefts(depth: u32) -> Vec<f64> {
    let mut lefts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        lefts = lefts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    lefts
}

fn max_depth(depth: u32) -> Result<()> {
    if depth > 20 {
        domain(format!("cantor depth {depth} is too large (max 20)"))
    } else {
        Ok(())
    }
}

pub fn generate<T: Real>(spec: &FixtureSpec) -> Result<DiscreteMeasure<T>> {
    Ok(generate_f64(spec)?.cast())
}

fn generate_f64(spec: &FixtureSpec) -> Result<DiscreteMeasure<f64>> {
    match *spec {
        FixtureSpec::Segment { length, density } => {
            positive("length", length)?;
            positive("density", density)?;
            DiscreteMeasure::new(2, vec![], vec![seg((0.0, 0.0), (length, 0.0), density)?])
        }
        FixtureSpec::ParallelSegments {
            length,
            gap,
            density,
        } => {
            positive("length", length)?;
            positive("gap", gap)?;
            positive("density", density)?;
            let y = gap / 2.0;
            DiscreteMeasure::new(
                2,
                vec![],
                vec![
                    seg((0.0, y), (length, y), density)?,
                    seg((0.0, -y), (length, -y), density)?,
                ],
            )
        }
        FixtureSpec::CirclePolygon { n, radius, density } => {
            if n < 3 {
                return domain(format!("circle_polygon needs n >= 3, got {n}"));
            }
            positive("radius", radius)?;
            positive("density", density)?;
            let vertex = |k: usize| {
                if k.is_multiple_of(n) {
                    return (radius, 0.0);
                }
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (radius * t.cos(), radius * t.sin())
            };
            let pieces = (0..n)
                .map(|k| seg(vertex(k), vertex(k + 1), density))
                .collect::<Result<Vec<_>>>()?;
            DiscreteMeasure::new(2, vec![], pieces)
        }
        FixtureSpec::CantorSegments { depth, density } => {
            max_depth(depth)?;
            let len = 3f64.powi(-(depth as i32));
            let density = density.unwrap_or(1.5f64.powi(depth as i32));
            positive("density", density)?;
            let pieces = cantor_lefts(depth)
                .into_iter()
                .map(|a| seg((a, 0.0), (a + len, 0.0), density))
                .collect::<Result<Vec<_>>>()?;
            DiscreteMeasure::new(2, vec![], pieces)
        }
        FixtureSpec::CantorAtoms { depth } => {
            max_depth(depth)?;
            let len = 3f64.powi(-(depth as i32));
            let mass = 0.5f64.powi(depth as i32);
            let atoms = cantor_lefts(depth)
                .into_iter()
                .map(|a| Atom {
                    location: Point::xy(a + len / 2.0, 0.0),
                    mass,
                })
                .collect();
            DiscreteMeasure::new(2, atoms, vec![])
        }
        FixtureSpec::AtomCloud {
            n,
            dimension,
            side,
            mass_min,
            mass_max,
            seed,
        } => {
            if dimension == 0 {
                return domain("dimension must be at least 1");
            }
            positive("side", side)?;
            mass_range(mass_min, mass_max)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms = (0..n)
                .map(|_| {
                    let coords: Vec<f64> = (0..dimension).map(|_| rng.gen::<f64>() * side).collect();
                    let mass = mass_min + (mass_max - mass_min) * rng.gen::<f64>();
                    Ok(Atom {
                        location: Point::new(coords)?,
                        mass,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            DiscreteMeasure::new(dimension, atoms, vec![])
        }
        FixtureSpec::AtomClusters {
            clusters,
            per_cluster,
            spread,
            separation,
            mass_min,
            mass_max,
            seed,
        } => {
            positive("spread", spread)?;
            positive("separation", separation)?;
            mass_range(mass_min, mass_max)?;
            if separation <= 2.0 * spread {
                return domain("clusters overlap: separation must exceed 2 * spread");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut atoms = Vec::with_capacity(clusters * per_cluster);
            for k in 0..clusters {
                let cx = k as f64 * separation;
                for _ in 0..per_cluster {
                    let rho = spread * rng.gen::<f64>().sqrt();
                    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                    let mass = mass_min + (mass_max - mass_min) * rng.gen::<f64>();
                    atoms.push(Atom {
                        location: Point::xy(cx + rho * theta.cos(), rho * theta.sin()),
                        mass,
                    });
                }
            }
            DiscreteMeasure::new(2, atoms, vec![])
        }
    }
}
