//! Acceptance suites. Each suite runs a fixed experiment, compares it with
//! an independent reference and reports one pass/fail line.

use crate::decomposition::{decompose, localize, ExtractionMode, ExtractionSchedule, EXACT_MAX_ATOMS, EXACT_MAX_FRAGMENTS};
use crate::error::{domain, Result};
use crate::fixtures::{generate, FixtureSpec, CANTOR_DIMENSION};
use crate::geometry::Point;
use crate::hausdorff::{content, point_content, ContentOptions, HausdorffParams};
use crate::measure::{restrict, Atom, CarrierSubset, DiscreteMeasure};
use crate::oracle::{atom_sup_ratio, grid_scan_sup, max_straight_subset};
use crate::pde::energy::{energy, gradient, minimize_energy, NewtonOptions};
use crate::pde::grid::{GridDomain, GridField};
use crate::pde::potential::{exp_integrability_probe, Integrability};
use crate::pde::residual::{distributional_residual, Bump, RightHandSide};
use crate::pde::scheme::{solve_with_measure, SchemeConfig};
use crate::straightness::{certify, CertRequest, CertStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

/// Rows of numbers behind a suite, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub seconds: f64,
    pub time_limit: f64,
    pub plots: Vec<PlotData>,
}

struct Check {
    passed: bool,
    summary: String,
    plots: Vec<PlotData>,
}

impl Check {
    fn new(passed: bool, summary: String) -> Self {
        Self {
            passed,
            summary,
            plots: Vec::new(),
        }
    }
}

type SuiteFn = fn(u64) -> Result<Check>;

/// `(id, name, time limit in seconds, runner)`.
const SUITES: [(usize, &str, f64, SuiteFn); 10] = [
    (1, "flat-segment", 5.0, flat_segment),
    (2, "circle", 60.0, circle),
    (3, "density-oracle", 600.0, density_oracle),
    (4, "halving", 600.0, halving),
    (5, "partition", 600.0, partition),
    (6, "localization", 60.0, localization),
    (7, "pde-estimates", 300.0, pde_estimates),
    (8, "integrability", 120.0, integrability),
    (9, "manufactured", 120.0, manufactured),
    (10, "gradient-check", 30.0, gradient_check),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.1).collect()
}

/// Runs one suite by name or number. Errors inside the experiment count as
/// failures, not as errors of this function.
pub fn run_suite(which: &str, seed: u64) -> Result<SuiteOutcome> {
    let Some(&(id, name, limit, f)) = SUITES.iter().find(|s| s.1 == which || s.0.to_string() == which) else {
        return domain(format!("unknown suite {which:?}; expected one of {}", suite_names().join(", ")));
    };
    let t = Instant::now();
    let check = f(seed).unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
    let seconds = t.elapsed().as_secs_f64();
    let in_time = seconds <= limit;
    Ok(SuiteOutcome {
        id,
        name,
        passed: check.passed && in_time,
        summary: if in_time {
            check.summary
        } else {
            format!("{} (over the {limit} s limit)", check.summary)
        },
        seconds,
        time_limit: limit,
        plots: check.plots,
    })
}

pub fn run_all(seed: u64) -> Vec<SuiteOutcome> {
    SUITES
        .iter()
        .map(|s| run_suite(s.1, seed).expect("suite names are valid"))
        .collect()
}

impl SuiteOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<15} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.summary
        )
    }
}

fn unit_params(s: f64) -> Result<HausdorffParams<f64>> {
    HausdorffParams::content(s)
}

fn flat_segment(_: u64) -> Result<Check> {
    let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::Segment {
        length: 10.0,
        density: 1.0,
    })?;
    let c = certify(&mu, &CertRequest::new(unit_params(1.0)?).with_r_min(1e-3))?;
    let ok = c.status == CertStatus::Certified && (c.sup_ratio_bound - 1.0).abs() <= 1e-6;
    Ok(Check::new(
        ok,
        format!("status {:?}, sup ratio bound {:.9}", c.status, c.sup_ratio_bound),
    ))
}

fn circle(_: u64) -> Result<Check> {
    let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::CirclePolygon {
        n: 1024,
        radius: 1.0,
        density: 1.0,
    })?;
    let req = CertRequest::new(HausdorffParams::new(1.0, 2.0)?).with_r_min(1.5);
    let c = certify(&mu, &req)?;
    let (wr, wrad) = c.witness.as_ref().map_or((0.0, 0.0), |w| (w.ratio, w.radius));
    let est = content(&mu, &CarrierSubset::full(&mu), &unit_params(1.0)?, &ContentOptions::greedy())?;
    let mass = mu.total_mass();
    let ok = c.status == CertStatus::Violated
        && wr >= 1.3
        && (1.5..=2.0).contains(&wrad)
        && (est.upper - 2.0).abs() <= 0.1
        && (mass - 2.0 * PI).abs() <= 1e-4
        && mass / est.upper >= PI * 0.95;
    Ok(Check::new(
        ok,
        format!(
            "status {:?}, witness ratio {wr:.4} at r = {wrad:.4}; greedy content {:.4}, mass {mass:.8}",
            c.status, est.upper
        ),
    ))
}

/// Random atoms in the unit square rescaled so that the exact supremum of
/// the density ratio is `target`.
fn scaled_atoms(rng: &mut ChaCha8Rng, n: usize, target: f64, r_min: f64) -> Result<DiscreteMeasure<f64>> {
    let atoms: Vec<Atom<f64>> = (0..n)
        .map(|_| Atom {
            location: Point::xy(rng.gen(), rng.gen()),
            mass: rng.gen_range(0.05..0.4),
        })
        .collect();
    let mu = DiscreteMeasure::new(2, atoms, vec![])?;
    let sup = atom_sup_ratio(&mu, 1.0, 2.0, r_min, f64::INFINITY)?;
    Ok(mu.scaled(target / sup))
}

fn density_oracle(seed: u64) -> Result<Check> {
    const R_MIN: f64 = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = unit_params(1.0)?;
    let req = CertRequest::new(params).with_r_min(R_MIN);
    let (mut grid_agree, mut subset_agree, mut subset_cases) = (0, 0, 0);
    let cases = 100;
    for _ in 0..cases {
        let n = rng.gen_range(1..=10);
        let target = if rng.gen_bool(0.5) {
            rng.gen_range(0.5..0.9)
        } else {
            rng.gen_range(1.1..2.0)
        };
        let mu = scaled_atoms(&mut rng, n, target, R_MIN)?;
        let cert = certify(&mu, &req)?;
        let certified = cert.status == CertStatus::Certified;
        let scan = grid_scan_sup(&mu, 1.0, 2.0, R_MIN, f64::INFINITY, 0.005, 0.005)?;
        if certified == (scan <= 1.0) && cert.status != CertStatus::Inconclusive {
            grid_agree += 1;
        }
        if n <= 8 {
            subset_cases += 1;
            let pts: Vec<Point<f64>> = mu.atoms().iter().map(|a| a.location.clone()).collect();
            let opts = ContentOptions::exact().with_floor(R_MIN);
            let mut all = true;
            for mask in 1usize..1 << n {
                let sub: Vec<Point<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pts[i].clone()).collect();
                let m: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| mu.atoms()[i].mass).sum();
                let h = point_content(&sub, &params, &opts)?.upper;
                if m > h * (1.0 + 1e-9) {
                    all = false;
                    break;
                }
            }
            if all == certified {
                subset_agree += 1;
            }
        }
    }
    Ok(Check::new(
        grid_agree == cases && subset_agree == subset_cases,
        format!("grid oracle {grid_agree}/{cases}, subset content {subset_agree}/{subset_cases}"),
    ))
}

fn halving(seed: u64) -> Result<Check> {
    const R_MIN: f64 = 0.2;
    let params = unit_params(1.0)?;
    let sched = ExtractionSchedule::floor(R_MIN)?;
    let (mut parts, mut good) = (0, 0);
    let mut worst = f64::INFINITY;
    let mut plot = PlotData::new("halving", &["instance", "step", "part_mass", "d"]);
    for k in 0..50u64 {
        let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::AtomCloud {
            n: 12,
            dimension: 2,
            side: 1.0,
            mass_min: 0.05,
            mass_max: 0.4,
            seed: seed.wrapping_add(k),
        })?;
        let dec = decompose(&mu, &params, &sched, ExtractionMode::Exact)?;
        let mut used = dec.residual.clone();
        for (step, part) in dec.parts.iter().enumerate() {
            let rem = CarrierSubset::full(&mu).difference(&used);
            let (d, _) = max_straight_subset(&restrict(&mu, &rem)?, 1.0, 2.0, R_MIN, f64::INFINITY, 1.0 + 1e-9)?;
            parts += 1;
            let tol = 1e-12 * d.max(1.0);
            if part.mass >= 0.5 * d - tol && part.mass <= d + tol {
                good += 1;
            }
            worst = worst.min(part.mass / d);
            plot.rows.push(vec![k as f64, step as f64, part.mass, d]);
            used = used.union(&part.subset);
        }
    }
    let mut c = Check::new(
        good == parts && parts > 0,
        format!("{good}/{parts} parts satisfy d/2 <= mass <= d (min mass/d {worst:.6})"),
    );
    c.plots.push(plot);
    Ok(c)
}

fn partition(seed: u64) -> Result<Check> {
    let fixtures: Vec<(FixtureSpec, f64, f64)> = vec![
        (FixtureSpec::Segment { length: 10.0, density: 1.0 }, 1.0, 1e-3),
        (FixtureSpec::ParallelSegments { length: 10.0, gap: 0.5, density: 1.0 }, 1.0, 1e-3),
        (FixtureSpec::CirclePolygon { n: 32, radius: 1.0, density: 1.0 }, 1.0, 1e-3),
        (FixtureSpec::CantorSegments { depth: 3, density: Some(1.0) }, CANTOR_DIMENSION, 1e-3),
        (FixtureSpec::CantorAtoms { depth: 4 }, CANTOR_DIMENSION, 1e-2),
        (
            FixtureSpec::AtomCloud {
                n: 12,
                dimension: 2,
                side: 1.0,
                mass_min: 0.05,
                mass_max: 0.4,
                seed,
            },
            1.0,
            0.1,
        ),
        (
            FixtureSpec::AtomClusters {
                clusters: 3,
                per_cluster: 4,
                spread: 0.1,
                separation: 1.0,
                mass_min: 0.15,
                mass_max: 0.3,
                seed,
            },
            1.0,
            0.05,
        ),
    ];
    let mut failures = Vec::new();
    let mut parallel_parts = None;
    for (spec, s, r_min) in &fixtures {
        let mu: DiscreteMeasure<f64> = generate(spec)?;
        let params = unit_params(*s)?;
        let sched = ExtractionSchedule::floor(*r_min)?;
        let mode = if mu.atoms().len() <= EXACT_MAX_ATOMS && mu.pieces().len() <= EXACT_MAX_FRAGMENTS {
            ExtractionMode::Exact
        } else {
            ExtractionMode::Heuristic
        };
        let dec = decompose(&mu, &params, &sched, mode)?;
        let kind = serde_json::to_value(spec).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default();
        for i in 0..dec.parts.len() {
            for j in i + 1..dec.parts.len() {
                if dec.parts[i].subset.intersection(&dec.parts[j].subset).mass(&mu) > 0.0 {
                    failures.push(format!("{kind}: parts {i} and {j} overlap"));
                }
            }
        }
        let total = mu.total_mass();
        let sum = dec.part_mass() + dec.residual.mass(&mu);
        if (sum - total).abs() > 1e-12 * total {
            failures.push(format!("{kind}: parts + residual = {sum}, total = {total}"));
        }
        for (i, p) in dec.parts.iter().enumerate() {
            let req = CertRequest::new(params).with_r_min(*r_min).with_epsilon(sched.slack);
            if !certify(&restrict(&mu, &p.subset)?, &req)?.is_certified() {
                failures.push(format!("{kind}: part {i} does not re-verify"));
            }
        }
        if kind == "parallel_segments" {
            parallel_parts = Some((dec.parts.len(), dec.residual.is_empty()));
        }
    }
    let parallel_ok = parallel_parts == Some((2, true));
    if !parallel_ok {
        failures.push(format!("parallel segments gave {parallel_parts:?}"));
    }
    Ok(Check::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} fixtures partition cleanly; parallel segments give 2 parts", fixtures.len())
        } else {
            failures.join("; ")
        },
    ))
}

fn localization(seed: u64) -> Result<Check> {
    let mu: DiscreteMeasure<f64> = generate(&FixtureSpec::AtomClusters {
        clusters: 3,
        per_cluster: 5,
        spread: 0.1,
        separation: 1.0,
        mass_min: 0.02,
        mass_max: 0.06,
        seed,
    })?;
    let params = unit_params(1.0)?;
    let sched = ExtractionSchedule::floor(0.05)?;
    let dec = decompose(&mu, &params, &sched, ExtractionMode::Exact)?;
    let eps = [0.5, 0.1, 0.01];
    let loc = localize(&mu, &dec, &eps)?;
    let mut ok = dec.residual.is_empty();
    let mut prev = f64::INFINITY;
    let mut detail = Vec::new();
    for st in &loc.stages {
        ok &= st.unkept_mass <= st.epsilon + 1e-12 && st.unkept_mass <= prev && st.is_certified() && !st.degenerate;
        prev = st.unkept_mass;
        detail.push(format!(
            "ε={}: kept {}, μ(U)={:.4}, δ={:.4}",
            st.epsilon, st.kept, st.unkept_mass, st.delta
        ));
    }
    Ok(Check::new(ok, format!("{} parts; {}", dec.parts.len(), detail.join("; "))))
}

fn pde_estimates(_: u64) -> Result<Check> {
    let dom = GridDomain::unit_square(256)?;
    let nu = DiscreteMeasure::new(
        2,
        vec![Atom {
            location: Point::xy(0.5, 0.5),
            mass: 2.0 * PI,
        }],
        vec![],
    )?;
    let (_, rep) = solve_with_measure(dom, &nu, &SchemeConfig::default())?;
    let mass = nu.total_mass();
    let mut plot = PlotData::new(
        "pde_stages",
        &["stage", "beta", "l1_exp", "l1_laplacian", "monotonicity", "comparison", "newton_iterations"],
    );
    let mut ok = rep.stages.len() == 6;
    for (j, s) in rep.stages.iter().enumerate() {
        ok &= s.monotonicity_violation <= 1e-10
            && s.l1_exp <= mass
            && s.l1_laplacian <= 2.0 * mass
            && s.negativity <= 1e-6
            && s.comparison_violation <= 1e-6
            && s.newton.converged;
        plot.rows.push(vec![
            j as f64,
            s.beta,
            s.l1_exp,
            s.l1_laplacian,
            s.monotonicity_violation,
            s.comparison_violation,
            s.newton.iterations() as f64,
        ]);
    }
    let last = rep.stages.last();
    let mut c = Check::new(
        ok && rep.comparison_offset == 0.0,
        format!(
            "{} stages; max monotonicity {:.1e}, max comparison {:.1e}, final ‖e^w-1‖₁ {:.4}, ‖Δw‖₁ {:.4} (ν(Ω) = {mass:.4})",
            rep.stages.len(),
            rep.max_monotonicity_violation,
            rep.max_comparison_violation,
            last.map_or(0.0, |s| s.l1_exp),
            last.map_or(0.0, |s| s.l1_laplacian),
        ),
    );
    c.plots.push(plot);
    Ok(c)
}

fn integrability(_: u64) -> Result<Check> {
    let dom = GridDomain::unit_square(64)?;
    let mut plot = PlotData::new("integrability", &["mass_over_pi", "h", "integral", "ratio"]);
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [1.0, 2.0, 3.9, 4.4] {
        let nu = DiscreteMeasure::new(
            2,
            vec![Atom {
                location: Point::xy(0.5, 0.5),
                mass: c * PI,
            }],
            vec![],
        )?;
        let r = exp_integrability_probe(&nu, dom, 3, 4.0 * PI)?;
        for (k, (&h, &i)) in r.spacings.iter().zip(&r.integrals).enumerate() {
            let ratio = if k == 0 { f64::NAN } else { r.ratios[k - 1] };
            plot.rows.push(vec![c, h, i, ratio]);
        }
        if c < 4.0 {
            ok &= r.classification == Integrability::Bounded && r.ratios.windows(2).all(|w| w[1] <= w[0]);
        } else {
            ok &= r.classification == Integrability::Diverging && r.ratios.iter().all(|&q| q >= 1.05);
        }
        let ratios: Vec<String> = r.ratios.iter().map(|q| format!("{q:.4}")).collect();
        parts.push(format!("{c}π: [{}]", ratios.join(", ")));
    }
    let mut out = Check::new(ok, format!("ratios {}", parts.join("; ")));
    out.plots.push(plot);
    Ok(out)
}

fn manufactured(_: u64) -> Result<Check> {
    let tests = [
        Bump::new(Point::xy(0.5, 0.5), 0.3)?,
        Bump::new(Point::xy(0.35, 0.6), 0.2)?,
        Bump::new(Point::xy(0.7, 0.3), 0.15)?,
    ];
    let mut plot = PlotData::new("manufactured", &["h", "residual"]);
    let mut res = Vec::new();
    for n in [32, 64, 128] {
        let d = GridDomain::<f64>::unit_square(n)?;
        let f = GridField::from_fn(d, |x, y| {
            let u = (PI * x).sin() * (PI * y).sin();
            2.0 * PI * PI * u + u.exp_m1()
        });
        let (u, _) = minimize_energy(&f, &GridField::zeros(d), &NewtonOptions::default())?;
        let r = distributional_residual(&u, RightHandSide::Density(&f), &tests)?;
        let m = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        plot.rows.push(vec![d.h, m]);
        res.push(m);
    }
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&p| p >= 1.8);
    let mut c = Check::new(
        ok,
        format!(
            "residuals {:.3e}, {:.3e}, {:.3e}; orders {:.3}, {:.3}",
            res[0], res[1], res[2], orders[0], orders[1]
        ),
    );
    c.plots.push(plot);
    Ok(c)
}

fn gradient_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = GridDomain::<f64>::unit_square(8)?;
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    for _ in 0..20 {
        let mut f = GridField::zeros(d);
        let mut v = GridField::zeros(d);
        let mut dir = GridField::zeros(d);
        for j in 1..d.ny {
            for i in 1..d.nx {
                let k = d.index(i, j);
                f.values[k] = rng.gen_range(0.0..50.0);
                v.values[k] = rng.gen_range(-1.0..3.0);
                dir.values[k] = rng.gen_range(-1.0..1.0);
            }
        }
        let g = gradient(&v, &f)?;
        let eta = 1e-5;
        let shifted = |t: f64, dir: &GridField<f64>| {
            let mut w = v.clone();
            for (a, b) in w.values.iter_mut().zip(&dir.values) {
                *a += t * b;
            }
            w
        };
        let fd = (energy(&shifted(eta, &dir), &f)? - energy(&shifted(-eta, &dir), &f)?) / (2.0 * eta);
        let an: f64 = g.values.iter().zip(&dir.values).map(|(a, b)| a * b).sum();
        worst = worst.max(rel(an, fd));
        for j in 1..d.ny {
            for i in 1..d.nx {
                let mut e = GridField::zeros(d);
                e.values[d.index(i, j)] = 1.0;
                let fd = (energy(&shifted(eta, &e), &f)? - energy(&shifted(-eta, &e), &f)?) / (2.0 * eta);
                worst = worst.max(rel(g.at(i, j), fd));
            }
        }
    }
    Ok(Check::new(
        worst <= 1e-6,
        format!("20 iterates, max relative gradient error {worst:.2e}"),
    ))
}
