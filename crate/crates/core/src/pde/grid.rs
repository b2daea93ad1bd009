//! Node grids on axis-aligned rectangles with homogeneous Dirichlet data.

use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Rectangle `[x0, x0 + nx h] × [y0, y0 + ny h]` with square cells of side
/// `h`. Nodes are indexed `(i, j)` with `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`; the
/// outer ring is the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridDomain<T> {
    pub x0: T,
    pub y0: T,
    pub nx: usize,
    pub ny: usize,
    pub h: T,
}

impl<T: Real> GridDomain<T> {
    pub fn new(x0: T, y0: T, nx: usize, ny: usize, h: T) -> Result<Self> {
        if !(h > T::zero() && h.is_finite()) {
            return domain(format!("grid spacing must be positive, got {h}"));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return domain("grid origin must be finite");
        }
        if nx < 2 || ny < 2 || (nx - 1) * (ny - 1) < 9 {
            return domain(format!("need at least 9 interior nodes, got {nx} x {ny} cells"));
        }
        Ok(Self { x0, y0, nx, ny, h })
    }

    /// `[0,1]^2` with `n` cells per side.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("unit square needs at least one cell");
        }
        Self::new(T::zero(), T::zero(), n, n, T::one() / T::of_usize(n))
    }

    /// Rectangle `[x0,x1] × [y0,y1]` with spacing `h`, which must divide both
    /// side lengths.
    pub fn rectangle(x0: T, y0: T, x1: T, y1: T, h: T) -> Result<Self> {
        let cells = |len: T| -> Result<usize> {
            let n = (len / h).round();
            if !(n >= T::one()) || ((n * h - len) / len).abs() > T::of(1e-9) {
                return domain(format!("spacing {h} does not divide side length {len}"));
            }
            Ok(n.to_usize().expect("finite"))
        };
        Self::new(x0, y0, cells(x1 - x0)?, cells(y1 - y0)?, h)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.x0 + self.h * T::of_usize(i)
    }

    #[inline]
    pub fn y(&self, j: usize) -> T {
        self.y0 + self.h * T::of_usize(j)
    }

    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        Point::xy(self.x(i), self.y(j))
    }

    pub fn x1(&self) -> T {
        self.x(self.nx)
    }

    pub fn y1(&self) -> T {
        self.y(self.ny)
    }

    /// Whether `p` lies in the open rectangle.
    pub fn contains(&self, p: &Point<T>) -> bool {
        let c = p.coords();
        c.len() == 2 && c[0] > self.x0 && c[0] < self.x1() && c[1] > self.y0 && c[1] < self.y1()
    }

    /// Same rectangle with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            nx: self.nx * 2,
            ny: self.ny * 2,
            h: self.h * T::half(),
            ..*self
        }
    }

    /// Same rectangle with twice the spacing, if the cell counts are even
    /// and at least one interior node remains.
    pub fn coarsened(&self) -> Option<Self> {
        (self.nx.is_multiple_of(2) && self.ny.is_multiple_of(2) && self.nx >= 4 && self.ny >= 4).then(|| Self {
            nx: self.nx / 2,
            ny: self.ny / 2,
            h: self.h * T::two(),
            ..*self
        })
    }
}

/// Nodal values on a [`GridDomain`], row-major in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridField<T> {
    pub domain: GridDomain<T>,
    pub values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn zeros(domain: GridDomain<T>) -> Self {
        Self {
            values: vec![T::zero(); domain.node_count()],
            domain,
        }
    }

    /// Samples `f` at every node (boundary included).
    pub fn from_fn(domain: GridDomain<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut out = Self::zeros(domain);
        for j in 0..=domain.ny {
            for i in 0..=domain.nx {
                out.values[domain.index(i, j)] = f(domain.x(i), domain.y(j));
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.domain.index(i, j)]
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `h² Σ g(v)` over interior nodes.
    pub fn interior_sum(&self, g: impl Fn(T) -> T) -> T {
        let d = &self.domain;
        let mut s = T::zero();
        for j in 1..d.ny {
            for i in 1..d.nx {
                s = s + g(self.at(i, j));
            }
        }
        s * d.h * d.h
    }

    pub fn zero_boundary(&mut self) {
        let d = self.domain;
        for j in 0..=d.ny {
            for i in 0..=d.nx {
                if d.is_boundary(i, j) {
                    self.values[d.index(i, j)] = T::zero();
                }
            }
        }
    }

    /// `x,y,u` lines with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,u")?;
        let d = &self.domain;
        for j in 0..=d.ny {
            for i in 0..=d.nx {
                writeln!(w, "{},{},{}", d.x(i), d.y(j), self.at(i, j))?;
            }
        }
        Ok(())
    }
}

/// `(L v)_i = 4 v_i - Σ_neighbours v_j` at interior nodes, zero elsewhere.
/// This is `-h² Δ_h v` for the five-point Laplacian.
pub fn graph_laplacian<T: Real>(v: &GridField<T>) -> GridField<T> {
    let d = v.domain;
    let mut out = GridField::zeros(d);
    let w = d.nx + 1;
    for j in 1..d.ny {
        for i in 1..d.nx {
            let k = d.index(i, j);
            let s = v.values[k - 1] + v.values[k + 1] + v.values[k - w] + v.values[k + w];
            out.values[k] = T::of(4.0) * v.values[k] - s;
        }
    }
    out
}
