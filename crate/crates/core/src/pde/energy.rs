//! Discrete energy
//!
//! `E(v) = ½ Σ_edges (v_i - v_j)² + h² Σ (e^{v_i} - 1 - v_i) - h² Σ f_i v_i`
//!
//! over interior nodes (boundary values are zero) and its minimization by
//! damped Newton. The constant `-1` inside the exponential term does not
//! change the minimizer and keeps `E` small near `v = 0`. The Euler-Lagrange
//! equation is the five-point scheme `-Δ_h v + e^v - 1 = f`.

use super::grid::{graph_laplacian, GridDomain, GridField};
use super::multigrid::ShiftedLaplacian;
use crate::error::{domain, Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Newton settings. `tol` bounds the strong-form residual
/// `‖∇E‖∞ / h²` relative to `1 + ‖f‖∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct NewtonOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    pub linear_rtol: T,
    pub linear_max_iter: usize,
    pub armijo: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        let t = T::of(100.0) * T::eps_scale();
        Self {
            tol: t,
            max_iter: 60,
            linear_rtol: t,
            linear_max_iter: 200,
            armijo: T::of(1e-4),
            max_backtracks: 40,
        }
    }
}

/// History of one minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NewtonReport<T> {
    /// `E` at the start and after every accepted step.
    pub energy: Vec<T>,
    /// Strong-form residual `‖∇E‖∞ / h²` at the same iterates.
    pub gradient_norm: Vec<T>,
    pub step_lengths: Vec<T>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
}

impl<T> NewtonReport<T> {
    pub fn iterations(&self) -> usize {
        self.step_lengths.len()
    }
}

fn check<T: Real>(v: &GridField<T>, f: &GridField<T>) -> Result<()> {
    if v.domain != f.domain {
        return domain("iterate and data live on different grids");
    }
    Ok(())
}

fn interior(d: &GridDomain<impl Real>) -> impl Iterator<Item = usize> + '_ {
    (1..d.ny).flat_map(move |j| (1..d.nx).map(move |i| d.index(i, j)))
}

/// `E(v)` for data `f` (boundary values of `v` are treated as zero).
pub fn energy<T: Real>(v: &GridField<T>, f: &GridField<T>) -> Result<T> {
    check(v, f)?;
    let d = v.domain;
    let val = |i: usize, j: usize| if d.is_boundary(i, j) { T::zero() } else { v.at(i, j) };
    let mut edges = T::zero();
    for j in 0..=d.ny {
        for i in 0..=d.nx {
            if i < d.nx {
                let e = val(i + 1, j) - val(i, j);
                edges = edges + e * e;
            }
            if j < d.ny {
                let e = val(i, j + 1) - val(i, j);
                edges = edges + e * e;
            }
        }
    }
    let h2 = d.h * d.h;
    let mut bulk = T::zero();
    for k in interior(&d) {
        let x = v.values[k];
        bulk = bulk + x.exp_m1() - x - f.values[k] * x;
    }
    Ok(T::half() * edges + h2 * bulk)
}

/// `∇E(v) = L v + h² (e^v - 1 - f)` at interior nodes, zero on the boundary.
pub fn gradient<T: Real>(v: &GridField<T>, f: &GridField<T>) -> Result<GridField<T>> {
    check(v, f)?;
    let mut vv = v.clone();
    vv.zero_boundary();
    let mut g = graph_laplacian(&vv);
    let h2 = v.domain.h * v.domain.h;
    for k in interior(&v.domain) {
        g.values[k] = g.values[k] + h2 * (vv.values[k].exp_m1() - f.values[k]);
    }
    Ok(g)
}

/// `E(v + t d) - E(v)` evaluated termwise so that it keeps relative accuracy
/// when the change is tiny.
fn energy_change<T: Real>(v: &GridField<T>, dir: &GridField<T>, t: T, f: &GridField<T>) -> T {
    let d = v.domain;
    let w = d.nx + 1;
    let mut edges = T::zero();
    for j in 0..d.ny {
        for i in 0..d.nx {
            let k = d.index(i, j);
            for nb in [k + 1, k + w] {
                let dd = t * (dir.values[nb] - dir.values[k]);
                let dv = v.values[nb] - v.values[k];
                edges = edges + dd * (dd * T::half() + dv);
            }
        }
    }
    // the last column and row only have one outgoing edge each
    for j in 0..d.ny {
        let k = d.index(d.nx, j);
        let dd = t * (dir.values[k + w] - dir.values[k]);
        edges = edges + dd * (dd * T::half() + v.values[k + w] - v.values[k]);
    }
    for i in 0..d.nx {
        let k = d.index(i, d.ny);
        let dd = t * (dir.values[k + 1] - dir.values[k]);
        edges = edges + dd * (dd * T::half() + v.values[k + 1] - v.values[k]);
    }
    let mut bulk = T::zero();
    for k in interior(&d) {
        let s = t * dir.values[k];
        bulk = bulk + v.values[k].exp() * s.exp_m1() - s - f.values[k] * s;
    }
    edges + d.h * d.h * bulk
}

fn strong_norm<T: Real>(g: &GridField<T>) -> T {
    let h = g.domain.h;
    g.max_abs() / (h * h)
}

/// Minimizes `E` for data `f` from `v0` by Newton steps on
/// `(L + h² diag(e^v)) d = -∇E(v)`, with Armijo backtracking. Every
/// accepted step lowers `E` strictly. Fails with [`Error::Solver`] carrying
/// the last iterate when it cannot converge.
pub fn minimize_energy<T: Real>(
    f: &GridField<T>,
    v0: &GridField<T>,
    opts: &NewtonOptions<T>,
) -> Result<(GridField<T>, NewtonReport<T>)> {
    check(v0, f)?;
    if f.values.iter().any(|x| !x.is_finite()) {
        return domain("data must be finite");
    }
    let d = f.domain;
    let scale = T::one() + f.max_abs();
    let mut v = v0.clone();
    v.zero_boundary();
    let mut e = energy(&v, f)?;
    let mut g = gradient(&v, f)?;
    let mut report = NewtonReport {
        energy: vec![e],
        gradient_norm: vec![strong_norm(&g)],
        step_lengths: Vec::new(),
        linear_iterations: Vec::new(),
        converged: false,
    };
    let fail = |msg: String, v: &GridField<T>| Error::Solver {
        message: msg,
        iterate: Some(v.values.iter().map(|x| x.as_f64()).collect()),
    };
    for _ in 0..opts.max_iter {
        if *report.gradient_norm.last().expect("nonempty") <= opts.tol * scale {
            report.converged = true;
            return Ok((v, report));
        }
        let coef: Vec<T> = v.values.iter().map(|x| x.exp()).collect();
        let op = ShiftedLaplacian::new(d, &coef);
        let mut rhs = g.clone();
        rhs.values.iter_mut().for_each(|x| *x = -*x);
        let (dir, stats) = op.solve(&rhs, &GridField::zeros(d), opts.linear_rtol, opts.linear_max_iter)?;
        let slope: T = g.values.iter().zip(&dir.values).map(|(a, b)| *a * *b).sum();
        if !(slope < T::zero()) {
            return Err(fail(format!("Newton direction is not a descent direction (slope {slope})"), &v));
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let de = energy_change(&v, &dir, t, f);
            if de.is_finite() && de < T::zero() && de <= opts.armijo * t * slope {
                accepted = Some(de);
                break;
            }
            t = t * T::half();
        }
        let Some(de) = accepted else {
            return Err(fail(
                format!(
                    "line search stalled at residual {}",
                    report.gradient_norm.last().expect("nonempty")
                ),
                &v,
            ));
        };
        for (x, s) in v.values.iter_mut().zip(&dir.values) {
            *x = *x + t * *s;
        }
        e = e + de;
        g = gradient(&v, f)?;
        report.energy.push(e);
        report.gradient_norm.push(strong_norm(&g));
        report.step_lengths.push(t);
        report.linear_iterations.push(stats.iterations);
    }
    if *report.gradient_norm.last().expect("nonempty") <= opts.tol * scale {
        report.converged = true;
        return Ok((v, report));
    }
    Err(fail(format!("Newton did not converge in {} iterations", opts.max_iter), &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn data(n: usize) -> GridField<f64> {
        let d = GridDomain::unit_square(n).unwrap();
        GridField::from_fn(d, |x, y| 40.0 * (-30.0 * ((x - 0.4).powi(2) + (y - 0.6).powi(2))).exp())
    }

    #[test]
    fn energy_change_matches_difference() {
        let f = data(16);
        let v = GridField::from_fn(f.domain, |x, y| (3.0 * x).sin() * y * (1.0 - x) * (1.0 - y));
        let dir = GridField::from_fn(f.domain, |x, y| x * y * (1.0 - x) * (1.0 - y));
        let mut w = v.clone();
        for (a, b) in w.values.iter_mut().zip(&dir.values) {
            *a += 0.3 * b;
        }
        let direct = energy(&w, &f).unwrap() - energy(&v, &f).unwrap();
        assert_relative_eq!(energy_change(&v, &dir, 0.3, &f), direct, max_relative = 1e-10);
    }

    #[test]
    fn newton_converges_with_decreasing_energy() {
        for n in [32, 128] {
            let f = data(n);
            let (v, rep) = minimize_energy(&f, &GridField::zeros(f.domain), &NewtonOptions::default()).unwrap();
            assert!(rep.converged);
            assert!(rep.energy.windows(2).all(|w| w[1] < w[0]));
            assert!(rep.iterations() <= 15, "{} iterations", rep.iterations());
            let g = gradient(&v, &f).unwrap();
            assert!(strong_norm(&g) <= 1e-10 * (1.0 + f.max_abs()));
            // positive data gives a positive solution
            assert!(v.values.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn large_data_needs_damping() {
        let d = GridDomain::<f64>::unit_square(32).unwrap();
        let f = GridField::from_fn(d, |x: f64, y: f64| 2000.0 * (-200.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp());
        let (_, rep) = minimize_energy(&f, &GridField::zeros(d), &NewtonOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.energy.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_data() {
        let d = GridDomain::<f64>::unit_square(64).unwrap();
        let zero = GridField::zeros(d);
        let (v, rep) = minimize_energy(&zero, &zero, &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations(), 0);
        assert!(v.values.iter().all(|&x| x == 0.0));

        // -Δu = 1 has center value 0.07367...; absorption pushes it down.
        let one = GridField::from_fn(d, |_, _| 1.0);
        let (v, _) = minimize_energy(&one, &zero, &NewtonOptions::default()).unwrap();
        let op = crate::pde::multigrid::ShiftedLaplacian::new(d, &vec![0.0; d.node_count()]);
        let mut b = one.clone();
        b.values.iter_mut().for_each(|x| *x *= d.h * d.h);
        let (lin, _) = op.solve(&b, &zero, 1e-12, 100).unwrap();
        assert!((lin.at(32, 32) - 0.0737).abs() < 2e-4);
        assert!(v.at(32, 32) < lin.at(32, 32));
        assert!(v.values.iter().all(|&x| x >= 0.0));
    }
}
