//! Conjugate gradients with a geometric multigrid preconditioner for
//! `(L + h² diag(c)) x = b` on the interior of a grid, `c ≥ 0`.

use super::grid::{GridDomain, GridField};
use crate::error::{Error, Result};
use crate::scalar::Real;

const PRE_SWEEPS: usize = 2;
const COARSE_SWEEPS: usize = 40;
const COARSEST_INTERIOR: usize = 49;

struct Level<T> {
    dom: GridDomain<T>,
    /// `h² c` at every node (boundary entries unused).
    shift: Vec<T>,
}

/// The shifted operator on a hierarchy of grids.
pub struct ShiftedLaplacian<T> {
    levels: Vec<Level<T>>,
}

/// Iteration count and final relative residual of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<T> {
    pub iterations: usize,
    pub relative_residual: T,
}

impl<T: Real> ShiftedLaplacian<T> {
    /// `coef` holds `c` at every node of `dom`.
    pub fn new(dom: GridDomain<T>, coef: &[T]) -> Self {
        let h2 = dom.h * dom.h;
        let mut levels = vec![Level {
            dom,
            shift: coef.iter().map(|&c| c * h2).collect(),
        }];
        loop {
            let fine = levels.last().expect("nonempty");
            if fine.dom.interior_count() <= COARSEST_INTERIOR {
                break;
            }
            let Some(cd) = fine.dom.coarsened() else { break };
            let ch2 = cd.h * cd.h;
            let fh2 = fine.dom.h * fine.dom.h;
            let mut shift = vec![T::zero(); cd.node_count()];
            for j in 0..=cd.ny {
                for i in 0..=cd.nx {
                    shift[cd.index(i, j)] = fine.shift[fine.dom.index(2 * i, 2 * j)] / fh2 * ch2;
                }
            }
            levels.push(Level { dom: cd, shift });
        }
        Self { levels }
    }

    pub fn domain(&self) -> &GridDomain<T> {
        &self.levels[0].dom
    }

    fn apply_level(&self, l: usize, x: &[T], out: &mut [T]) {
        let lv = &self.levels[l];
        let d = lv.dom;
        let w = d.nx + 1;
        let four = T::of(4.0);
        for v in out.iter_mut() {
            *v = T::zero();
        }
        for j in 1..d.ny {
            for i in 1..d.nx {
                let k = d.index(i, j);
                out[k] = (four + lv.shift[k]) * x[k] - x[k - 1] - x[k + 1] - x[k - w] - x[k + w];
            }
        }
    }

    /// `A x` on the finest grid.
    pub fn apply(&self, x: &GridField<T>) -> GridField<T> {
        let mut out = GridField::zeros(x.domain);
        self.apply_level(0, &x.values, &mut out.values);
        out
    }

    fn sweep(&self, l: usize, x: &mut [T], b: &[T], colors: [usize; 2]) {
        let lv = &self.levels[l];
        let d = lv.dom;
        let w = d.nx + 1;
        let four = T::of(4.0);
        for color in colors {
            for j in 1..d.ny {
                let start = 1 + (j + 1 + color) % 2;
                for i in (start..d.nx).step_by(2) {
                    let k = d.index(i, j);
                    x[k] = (b[k] + x[k - 1] + x[k + 1] + x[k - w] + x[k + w]) / (four + lv.shift[k]);
                }
            }
        }
    }

    fn vcycle(&self, l: usize, x: &mut [T], b: &[T]) {
        if l + 1 == self.levels.len() {
            for _ in 0..COARSE_SWEEPS {
                self.sweep(l, x, b, [0, 1]);
                self.sweep(l, x, b, [1, 0]);
            }
            return;
        }
        for _ in 0..PRE_SWEEPS {
            self.sweep(l, x, b, [0, 1]);
        }
        let fd = self.levels[l].dom;
        let cd = self.levels[l + 1].dom;
        let mut r = vec![T::zero(); fd.node_count()];
        self.apply_level(l, x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = *bi - *ri;
        }
        // Transpose of bilinear interpolation.
        let mut rc = vec![T::zero(); cd.node_count()];
        let q = T::of(0.25);
        let hf = T::half();
        for jc in 1..cd.ny {
            for ic in 1..cd.nx {
                let (i, j) = (2 * ic, 2 * jc);
                let at = |a: usize, b: usize| r[fd.index(a, b)];
                rc[cd.index(ic, jc)] = at(i, j)
                    + hf * (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1))
                    + q * (at(i - 1, j - 1) + at(i + 1, j - 1) + at(i - 1, j + 1) + at(i + 1, j + 1));
            }
        }
        let mut ec = vec![T::zero(); cd.node_count()];
        self.vcycle(l + 1, &mut ec, &rc);
        for j in 1..fd.ny {
            for i in 1..fd.nx {
                let e = |a: usize, b: usize| ec[cd.index(a, b)];
                let v = match (i % 2, j % 2) {
                    (0, 0) => e(i / 2, j / 2),
                    (1, 0) => hf * (e(i / 2, j / 2) + e(i / 2 + 1, j / 2)),
                    (0, 1) => hf * (e(i / 2, j / 2) + e(i / 2, j / 2 + 1)),
                    _ => q * (e(i / 2, j / 2) + e(i / 2 + 1, j / 2) + e(i / 2, j / 2 + 1) + e(i / 2 + 1, j / 2 + 1)),
                };
                x[fd.index(i, j)] = x[fd.index(i, j)] + v;
            }
        }
        for _ in 0..PRE_SWEEPS {
            self.sweep(l, x, b, [1, 0]);
        }
    }

    /// One symmetric V-cycle from a zero guess.
    pub fn precondition(&self, r: &[T]) -> Vec<T> {
        let mut z = vec![T::zero(); r.len()];
        self.vcycle(0, &mut z, r);
        z
    }

    /// Preconditioned CG from `x0` until `‖b - A x‖ ≤ rtol ‖b‖`.
    pub fn solve(&self, b: &GridField<T>, x0: &GridField<T>, rtol: T, max_iter: usize) -> Result<(GridField<T>, SolveStats<T>)> {
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y);
        let mut x = x0.clone();
        x.zero_boundary();
        let mut bb = b.clone();
        bb.zero_boundary();
        let bnorm = dot(&bb.values, &bb.values).sqrt();
        if bnorm == T::zero() {
            return Ok((
                GridField::zeros(b.domain),
                SolveStats {
                    iterations: 0,
                    relative_residual: T::zero(),
                },
            ));
        }
        let ax = self.apply(&x);
        let mut r: Vec<T> = bb.values.iter().zip(&ax.values).map(|(b, a)| *b - *a).collect();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![T::zero(); r.len()];
        for it in 0..=max_iter {
            let rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= rtol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        relative_residual: rel,
                    },
                ));
            }
            if it == max_iter {
                break;
            }
            self.apply_level(0, &p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for k in 0..r.len() {
                x.values[k] = x.values[k] + alpha * p[k];
                r[k] = r[k] - alpha * ap[k];
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..r.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::Solver {
            message: format!("conjugate gradients did not reach {rtol} in {max_iter} iterations"),
            iterate: Some(x.values.iter().map(|v| v.as_f64()).collect()),
        })
    }
}
