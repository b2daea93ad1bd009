//! Staged solver for `-Δw + e^w - 1 = ν` with a measure `ν ≤ 4π H^0`.
//!
//! Stage `j` solves with data `β_j ν` restricted to the leading parts of a
//! straight decomposition of `ν / 4π` (the parts carrying all but `ε_j` of
//! its mass), mollified at a common width `τ`, warm-started from the
//! previous stage. The data grow with `j`, so the iterates grow too.

use super::energy::{minimize_energy, NewtonOptions, NewtonReport};
use super::grid::{graph_laplacian, GridDomain, GridField};
use super::mollifier::mollify;
use super::potential::newtonian_potential;
use super::residual::{distributional_residual, Bump, RightHandSide};
use crate::decomposition::{decompose, localize, ExtractionMode, ExtractionSchedule, EXACT_MAX_ATOMS, EXACT_MAX_FRAGMENTS};
use crate::error::{domain, Error, Result};
use crate::geometry::Point;
use crate::hausdorff::HausdorffParams;
use crate::measure::{restrict, DiscreteMeasure, SegmentPiece};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest `ν / 4π` mass of a segment fragment before decomposition.
const FRAGMENT_MASS: f64 = 0.5;

/// Tolerances for the per-stage checks.
const MONOTONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct SchemeConfig<T> {
    /// Number of stages when `betas` and `epsilons` are not given.
    pub stages: usize,
    /// Increasing weights in `(0, 1)`; default `1 - 2^{-(j+1)}`.
    pub betas: Option<Vec<T>>,
    /// Non-increasing localization budgets in units of `ν / 4π`; default
    /// `μ(Ω) 2^{-(j+1)}` with `μ = ν / 4π`.
    pub epsilons: Option<Vec<T>>,
    /// Mollifier width; default `min(4h, min_j δ_j / 2)`.
    pub tau: Option<T>,
    /// Radius floor for the density certificates; default `h`.
    pub r_min: Option<T>,
    /// Extraction mode; default exact when the carrier is small enough.
    pub extraction: Option<ExtractionMode>,
    pub newton: NewtonOptions<T>,
    /// Stop early once `‖w_j - w_{j-1}‖∞` falls below this.
    pub cauchy_tol: T,
    /// Nodes closer than this to an atom skip the comparison check;
    /// default `τ + h`.
    pub comparison_exclusion: Option<T>,
    /// Bumps for the weak-form residual of the final iterate.
    pub test_functions: Vec<Bump<T>>,
}

impl<T: Real> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            stages: 6,
            betas: None,
            epsilons: None,
            tau: None,
            r_min: None,
            extraction: None,
            newton: NewtonOptions::default(),
            cauchy_tol: T::zero(),
            comparison_exclusion: None,
            test_functions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StageReport<T> {
    pub beta: T,
    pub epsilon: T,
    /// Leading decomposition parts kept in the data.
    pub kept_parts: usize,
    /// `ν` mass of the kept parts.
    pub kept_mass: T,
    #[serde(with = "crate::scalar::unbounded")]
    pub delta: T,
    /// Grid integral of the mollified data, `β_j ν(kept)`.
    pub data_mass: T,
    pub newton: NewtonReport<T>,
    /// `h² Σ |e^w - 1|`.
    pub l1_exp: T,
    /// `h² Σ |Δ_h w|`.
    pub l1_laplacian: T,
    /// `max(w_{j-1} - w_j)`, clamped at 0.
    pub monotonicity_violation: T,
    /// `max(-w)`, clamped at 0.
    pub negativity: T,
    /// `max(w - Nν - c)` away from atoms, clamped at 0, where `c` is the
    /// report's `comparison_offset`.
    pub comparison_violation: T,
    /// `‖w_j - w_{j-1}‖∞`.
    pub increment: T,
    pub absorption_ok: bool,
    pub laplacian_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SolverReport<T> {
    pub h: T,
    pub tau: T,
    pub nu_mass: T,
    pub extraction: ExtractionMode,
    /// `max(-Nν)` over the boundary, clamped at 0. The comparison bound is
    /// `w ≤ Nν + c` because `w - Nν` is subharmonic; `c = 0` whenever
    /// `Nν ≥ 0` on `∂Ω`.
    pub comparison_offset: T,
    pub stages: Vec<StageReport<T>>,
    /// Weak-form residuals of the final iterate against the configured
    /// bumps, with the final stage's data measure.
    pub residuals: Vec<T>,
    pub max_monotonicity_violation: T,
    pub max_comparison_violation: T,
    pub passed: bool,
}

impl<T: Real> SolverReport<T> {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Io(e.into()))
    }
}

/// Splits segment pieces so that no fragment carries more than `cap`.
fn fragment<T: Real>(nu: &DiscreteMeasure<T>, cap: T) -> Result<DiscreteMeasure<T>> {
    let mut pieces = Vec::new();
    for p in nu.pieces() {
        let n = (p.mass() / cap).ceil().to_usize().unwrap_or(1).max(1);
        for k in 0..n {
            let t0 = T::of_usize(k) / T::of_usize(n);
            let t1 = T::of_usize(k + 1) / T::of_usize(n);
            pieces.push(SegmentPiece {
                segment: p.segment.sub(t0, t1),
                density: p.density,
            });
        }
    }
    DiscreteMeasure::new(nu.dimension(), nu.atoms().to_vec(), pieces)
}

fn check_support<T: Real>(dom: &GridDomain<T>, nu: &DiscreteMeasure<T>) -> Result<()> {
    if nu.dimension() != 2 {
        return domain("the solver is planar");
    }
    for a in nu.atoms() {
        if !dom.contains(&a.location) {
            return domain(format!("atom at {:?} is not inside the open rectangle", a.location.coords()));
        }
    }
    let inside = |p: &Point<T>| {
        let c = p.coords();
        c[0] >= dom.x0 && c[0] <= dom.x1() && c[1] >= dom.y0 && c[1] <= dom.y1()
    };
    for p in nu.pieces() {
        if !inside(&p.segment.a) || !inside(&p.segment.b) {
            return domain("segment pieces must lie in the closed rectangle");
        }
    }
    let four_pi = T::of(4.0) * T::PI();
    if let Some(a) = nu.atoms().iter().find(|a| a.mass > four_pi) {
        return Err(Error::Refused(format!(
            "atom of mass {} exceeds 4π; the equation has no solution for such data",
            a.mass
        )));
    }
    Ok(())
}

/// Runs the staged scheme and returns the final iterate with its report.
pub fn solve_with_measure<T: Real>(
    dom: GridDomain<T>,
    nu: &DiscreteMeasure<T>,
    config: &SchemeConfig<T>,
) -> Result<(GridField<T>, SolverReport<T>)> {
    check_support(&dom, nu)?;
    let h = dom.h;
    let four_pi = T::of(4.0) * T::PI();
    let nu = fragment(nu, T::of(FRAGMENT_MASS) * four_pi)?;
    let mu = nu.scaled(T::one() / four_pi);
    let mu_mass = mu.total_mass();

    let stages = match (&config.betas, &config.epsilons) {
        (Some(b), _) => b.len(),
        (None, Some(e)) => e.len(),
        _ => config.stages,
    };
    if stages == 0 {
        return domain("the scheme needs at least one stage");
    }
    let betas: Vec<T> = match &config.betas {
        Some(b) => b.clone(),
        None => (0..stages).map(|j| T::one() - T::two().powi(-(j as i32 + 1))).collect(),
    };
    if betas.iter().any(|&b| !(b > T::zero() && b <= T::one())) || betas.windows(2).any(|w| w[1] < w[0]) {
        return domain("betas must be non-decreasing in (0, 1]");
    }
    let unit = if mu_mass > T::zero() { mu_mass } else { T::one() };
    let epsilons: Vec<T> = match &config.epsilons {
        Some(e) => e.clone(),
        None => (0..stages).map(|j| unit * T::two().powi(-(j as i32 + 1))).collect(),
    };
    if epsilons.len() != stages {
        return domain(format!("{} betas but {} epsilons", stages, epsilons.len()));
    }

    let r_min = config.r_min.unwrap_or(h);
    let params = HausdorffParams::content(T::zero())?;
    let schedule = ExtractionSchedule::floor(r_min)?;
    let mode = config.extraction.unwrap_or(
        if nu.atoms().len() <= EXACT_MAX_ATOMS && nu.pieces().len() <= EXACT_MAX_FRAGMENTS {
            ExtractionMode::Exact
        } else {
            ExtractionMode::Heuristic
        },
    );
    let dec = decompose(&mu, &params, &schedule, mode)?;
    let loc = localize(&mu, &dec, &epsilons)?;
    if let Some((j, _)) = loc.stages.iter().enumerate().find(|(_, s)| !s.is_certified()) {
        return Err(Error::Refused(format!(
            "stage {j}: the kept parts of ν/4π do not satisfy the density bound"
        )));
    }
    let min_delta = loc
        .stages
        .iter()
        .map(|s| s.delta)
        .filter(|d| d.is_finite())
        .fold(T::infinity(), T::min);
    let tau = config.tau.unwrap_or((T::of(4.0) * h).min(min_delta * T::half()));
    if !(tau >= h) {
        return Err(Error::Refused(format!(
            "mollifier width {tau} is below the grid spacing {h}; refine the grid"
        )));
    }

    // Comparison data: Nν at the nodes away from atoms.
    let exclusion = config.comparison_exclusion.unwrap_or(tau + h);
    let mut check_nodes = Vec::new();
    let mut points = Vec::new();
    for j in 0..=dom.ny {
        for i in 0..=dom.nx {
            let p = dom.node(i, j);
            if nu.atoms().iter().all(|a| a.location.dist(&p) >= exclusion) {
                check_nodes.push(dom.index(i, j));
                points.push(p);
            }
        }
    }
    let pot = newtonian_potential(&nu, &points)?;
    let mut offset = T::zero();
    for (k, &idx) in check_nodes.iter().enumerate() {
        let (i, j) = (idx % (dom.nx + 1), idx / (dom.nx + 1));
        if dom.is_boundary(i, j) {
            offset = offset.max(-pot[k]);
        }
    }
    let slack = T::of(1e3) * T::eps_scale();
    let nu_mass = nu.total_mass();

    let mut w = GridField::zeros(dom);
    let mut reports = Vec::new();
    let mut last_data = DiscreteMeasure::empty(2);
    for (j, st) in loc.stages.iter().enumerate() {
        let kept = dec.parts[..st.kept]
            .iter()
            .fold(crate::measure::CarrierSubset::empty(), |u, p| u.union(&p.subset));
        let data = restrict(&nu, &kept)?.scaled(betas[j]);
        let f = mollify(dom, &data, tau)?;
        let (next, newton) = minimize_energy(&f, &w, &config.newton)?;
        let mut mono = T::zero();
        let mut increment = T::zero();
        for (a, b) in w.values.iter().zip(&next.values) {
            mono = mono.max(*a - *b);
            increment = increment.max((*a - *b).abs());
        }
        let lw = graph_laplacian(&next);
        let l1_exp = next.interior_sum(|v| v.exp_m1().abs());
        let l1_laplacian = lw.values.iter().fold(T::zero(), |s, v| s + v.abs());
        let data_mass = f.interior_sum(|v| v);
        let negativity = next.values.iter().fold(T::zero(), |m, v| m.max(-*v));
        let comparison = check_nodes
            .iter()
            .zip(&pot)
            .fold(T::zero(), |m, (&k, &p)| m.max(next.values[k] - p - offset));
        let bound = nu_mass * (T::one() + slack) + slack;
        reports.push(StageReport {
            beta: betas[j],
            epsilon: st.epsilon,
            kept_parts: st.kept,
            kept_mass: st.kept_mass * four_pi,
            delta: st.delta,
            data_mass,
            newton,
            l1_exp,
            l1_laplacian,
            monotonicity_violation: mono.max(T::zero()),
            negativity,
            comparison_violation: comparison,
            increment,
            absorption_ok: l1_exp <= data_mass * (T::one() + slack) + slack && data_mass <= bound,
            laplacian_ok: l1_laplacian <= T::two() * bound,
        });
        w = next;
        last_data = data;
        if j > 0 && increment <= config.cauchy_tol {
            break;
        }
    }
    let residuals = distributional_residual(&w, RightHandSide::Measure(&last_data), &config.test_functions)?;
    let max_mono = reports.iter().fold(T::zero(), |m, r| m.max(r.monotonicity_violation));
    let max_cmp = reports.iter().fold(T::zero(), |m, r| m.max(r.comparison_violation));
    let neg = reports.iter().fold(T::zero(), |m, r| m.max(r.negativity));
    let tol = T::of(MONOTONE_TOL).max(T::of(100.0) * T::eps_scale());
    let passed = max_mono <= tol
        && neg <= tol
        && max_cmp <= T::of(1e-6).max(T::of(100.0) * T::eps_scale())
        && reports.iter().all(|r| r.absorption_ok && r.laplacian_ok && r.newton.converged);
    let report = SolverReport {
        h,
        tau,
        nu_mass,
        extraction: mode,
        comparison_offset: offset,
        stages: reports,
        residuals,
        max_monotonicity_violation: max_mono,
        max_comparison_violation: max_cmp,
        passed,
    };
    Ok((w, report))
}
