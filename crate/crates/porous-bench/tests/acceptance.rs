//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//!
//! Criteria that are not met are reported, not hidden, so the process exits
//! successfully unless `ACCEPTANCE_STRICT=1` is set. `ACCEPTANCE_ONLY=a,b`
//! runs a subset; `ACCEPTANCE_OUT=dir` keeps the run artifacts.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array1;
use ndarray_linalg::Solve;
use porous_bench::{run, BcKind, GeometrySource, RunSummary, Scenario, ScenarioConfig};
use porous_stokes::field::{is_reliable, velocity_unchecked, GridSpec};
use porous_stokes::geometry::{discretize, BoundaryDiscretization};
use porous_stokes::ifmm::{build_h2, ExtendedSystem, FactorOptions, IfmmConfig, IfmmFactorization};
use porous_stokes::kernel::{boundary_data, BoundaryCondition};
use porous_stokes::operator::{assemble_dense, FmmOperator, FmmOptions, LinearOperator};
use porous_stokes::presets::{desk_geometry, desk_packing, DESK_N_EXT, DESK_N_INT, DESK_SEED};
use porous_stokes::quadrature::kr6_corrections;
use porous_stokes::solver::SolverConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / lx.len() as f64, ly.iter().sum::<f64>() / ly.len() as f64);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    num / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
}

fn bessel_i(k: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..60 {
        term *= 0.25 * x * x / (m as f64 * (m + k) as f64);
        sum += term;
    }
    sum
}

fn quadrature() -> Outcome {
    let kr = kr6_corrections();
    // int log(4 sin^2(t/2)) cos(kt) dt = -2 pi / k, summed against the Fourier series of exp(a cos t)
    let cases: [(f64, f64); 2] = [(1.0, 0.0), (0.5, 2.0)];
    let ns = [64usize, 128, 256, 512];
    let mut slopes = Vec::new();
    for (a, shift) in cases {
        let exact = -4.0 * PI * (1..40).map(|k| bessel_i(k, a) / k as f64).sum::<f64>();
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let h = 2.0 * PI / n as f64;
                let f = |j: usize| {
                    let t = j as f64 * h;
                    (4.0 * (0.5 * t).sin().powi(2)).ln() * (a * t.cos()).exp() + shift * t.sin().powi(2) - shift * 0.5
                };
                (kr.integrate_periodic(n, h, 0, f) - exact).abs()
            })
            .collect();
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        slopes.push(-loglog_slope(&x, &errs));
    }
    let smooth = |n: usize| {
        let h = 2.0 * PI / n as f64;
        ((0..n).map(|j| (j as f64 * h).cos().exp()).sum::<f64>() * h - 2.0 * PI * bessel_i(0, 1.0)).abs()
    };
    let (e4, e8, e16) = (smooth(4), smooth(8), smooth(16));
    let spectral = e8 / e4 < 1e-4 && e16 < 1e-13;
    let pass = slopes.iter().all(|&s| s >= 5.5) && spectral;
    outcome(pass, format!("KR slopes {slopes:.2?} (>= 5.5); plain trapezoid errors N=4,8,16: {e4:.1e} {e8:.1e} {e16:.1e}"))
}

fn circle() -> Outcome {
    let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 256).unwrap();
    let a = assemble_dense(&disc).unwrap();
    let s = [0.6, -0.8];
    let sigma: Vec<f64> = (0..disc.len()).flat_map(|_| s).collect();
    let u = a.apply(&sigma).unwrap();
    let trace = u.iter().enumerate().map(|(k, v)| (v - 0.25 * s[k % 2]).abs()).fold(0.0, f64::max);
    let mut targets = Vec::new();
    for i in 0..60 {
        for j in 0..60 {
            let p = [-1.0 + (i as f64 + 0.5) / 30.0, -1.0 + (j as f64 + 0.5) / 30.0];
            let d = 1.0 - p[0].hypot(p[1]);
            if d > 0.0 && is_reliable(&disc, d, 0) {
                targets.push(p);
            }
        }
    }
    let v = velocity_unchecked(&disc, &sigma, &targets, 10).unwrap();
    let interior = v.iter().map(|w| (w[0] - 0.25 * s[0]).abs().max((w[1] - 0.25 * s[1]).abs())).fold(0.0, f64::max);
    outcome(
        trace <= 1e-8 && interior <= 1e-10,
        format!("trace error {trace:.1e} (<= 1e-8); interior deviation {interior:.1e} over {} reliable points (<= 1e-10)", targets.len()),
    )
}

fn fmm() -> Outcome {
    let disc = discretize(&desk_geometry(22).unwrap(), DESK_N_INT, DESK_N_EXT).unwrap();
    let dense = assemble_dense(&disc).unwrap();
    let mut worst = [0.0f64; 2];
    for (k, n) in [10, 15].into_iter().enumerate() {
        let op = FmmOperator::new(&disc, &FmmOptions { n, ..FmmOptions::default() }).unwrap();
        for seed in 0..10 {
            let v = random_vec(disc.unknowns(), seed);
            worst[k] = worst[k].max(rel(&op.apply(&v).unwrap(), &dense.apply(&v).unwrap()));
        }
    }
    outcome(
        worst[0] <= 1e-8 && worst[1] <= 1e-10,
        format!("N={}: max error n=10 {:.2e} (<= 1e-8), n=15 {:.2e} (<= 1e-10)", disc.len(), worst[0], worst[1]),
    )
}

/// Forward difference between dense solves of `A` and of `A` with every
/// entry perturbed by one unit in the last place: how well `x` is determined
/// in double precision at all.
fn ulp_floor(a: &ndarray::Array2<f64>, f: &[f64], x: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = a.mapv(|v| v * (1.0 + f64::EPSILON * rng.random_range(-1.0..1.0)));
    rel(p.solve(&Array1::from(f.to_vec())).unwrap().as_slice().unwrap(), x)
}

fn ifmm_direct() -> Outcome {
    let geom = desk_geometry(4).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (n_int, n_ext) in [(64, 256), (128, 512)] {
        let disc = discretize(&geom, n_int, n_ext).unwrap();
        let a = assemble_dense(&disc).unwrap();
        let f = boundary_data(&disc, &BoundaryCondition::Shear);
        let x_lu = a.matrix.solve(&Array1::from(f.clone())).unwrap();
        let x_lu = x_lu.as_slice().unwrap();
        for (eps, tol) in [(0.0, 1e-10), (1e-7, 1e-4)] {
            let cfg = IfmmConfig { epsilon: eps, levels: Some(3), ..IfmmConfig::default() };
            let ext = ExtendedSystem::new(build_h2(&disc, &cfg).unwrap());
            let fac = IfmmFactorization::new(&ext, &FactorOptions { epsilon: eps, ..FactorOptions::default() }).unwrap();
            let x = fac.apply_inverse(&f).unwrap();
            let diff = rel(&x, x_lu);
            let resid = rel(&a.apply(&x).unwrap(), &f);
            pass &= diff <= tol;
            let mut note = format!("N={} eps={eps:e}: |x-x_LU|/|x_LU| {diff:.1e} (<= {tol:e}), |Ax-f|/|f| {resid:.1e}", disc.len());
            if eps == 0.0 {
                let ah = ext.h2_dense();
                let x_h = ah.solve(&Array1::from(f.clone())).unwrap();
                note += &format!(", LU(A_H) vs LU(A) {:.1e}, LU(A) vs LU(A perturbed by 1 ulp) {:.1e}", rel(x_h.as_slice().unwrap(), x_lu), ulp_floor(&a.matrix, &f, x_lu));
            }
            parts.push(note);
        }
    }
    outcome(pass, parts.join("; "))
}

struct DeskRuns {
    shear: RunSummary,
    rotlet: RunSummary,
}

fn out_dir(name: &str) -> (PathBuf, Option<tempfile::TempDir>) {
    match std::env::var_os("ACCEPTANCE_OUT") {
        Some(d) => (PathBuf::from(d).join(name), None),
        None => {
            let t = tempfile::tempdir().unwrap();
            (t.path().to_path_buf(), Some(t))
        }
    }
}

fn desk_run(bc: BcKind, precs: &[&str], name: &str) -> RunSummary {
    let mut scenario = Scenario::new(bc);
    scenario.seed = 7;
    scenario.grid = Some(GridSpec::default());
    scenario.label = Some(name.into());
    let (dir, _keep) = out_dir(name);
    let cfg = ScenarioConfig {
        geometry: GeometrySource::Generate { spec: desk_packing(22), seed: DESK_SEED },
        scenario,
        solvers: precs.iter().map(|p| SolverConfig { precond: p.to_string(), ..SolverConfig::default() }).collect(),
        out_dir: dir,
    };
    run(&cfg).unwrap()
}

fn desk_runs() -> DeskRuns {
    DeskRuns {
        shear: desk_run(BcKind::Shear, &["none", "bd", "ifmm"], "desk_shear"),
        rotlet: desk_run(BcKind::StokesletRotlet, &["bd", "ifmm"], "desk_stokeslet_rotlet"),
    }
}

fn entry<'a>(s: &'a RunSummary, tag: &str) -> &'a porous_bench::SolverEntry {
    s.solvers.iter().find(|e| e.tag == tag).unwrap()
}

fn ordering(runs: &DeskRuns) -> Outcome {
    let it = |t: &str| entry(&runs.shear, t).report.iterations;
    let conv = |t: &str| entry(&runs.shear, t).report.converged;
    let (i, b, n) = (it("ifmm"), it("bd"), it("none"));
    let pass = conv("ifmm") && conv("bd") && (i as f64) < 0.6 * b as f64 && b < n;
    outcome(
        pass,
        format!(
            "2N={}: ifmm {i} (conv {}), bd {b} (conv {}), none {n} (conv {}); need ifmm < {:.1} and bd < none",
            runs.shear.unknowns,
            conv("ifmm"),
            conv("bd"),
            conv("none"),
            0.6 * b as f64
        ),
    )
}

/// The preconditioned residual is the recomputed `|P^-1 (f - A x)| / |P^-1 f|`
/// of the report; the GMRES stopping estimate is printed alongside.
fn honesty(runs: &DeskRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [&runs.shear, &runs.rotlet] {
        for e in &s.solvers {
            let r = &e.report;
            let estimate = *r.history.last().unwrap();
            let both = r.preconditioned_residual.is_finite() && r.actual_residual.is_finite();
            pass &= both;
            if e.tag == "ifmm" && r.converged {
                pass &= r.actual_residual <= 10.0 * r.preconditioned_residual;
            }
            parts.push(format!(
                "{}/{}: actual {:.1e}, preconditioned {:.1e} (gmres estimate {:.1e})",
                s.label.as_deref().unwrap_or(""),
                e.tag,
                r.actual_residual,
                r.preconditioned_residual,
                estimate
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn accuracy(runs: &DeskRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [&runs.shear, &runs.rotlet] {
        for e in &s.solvers {
            let st = e.field.expect("field statistics");
            if e.tag == "ifmm" {
                pass &= st.median_log10 <= -6.0;
            }
            parts.push(format!(
                "{}/{}: median {:.2}, max {:.2} over {} points",
                s.label.as_deref().unwrap_or(""),
                e.tag,
                st.median_log10,
                st.max_log10,
                st.count
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn density(runs: &DeskRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for e in &runs.shear.solvers {
        if e.report.converged {
            pass &= e.pore_density_ratio <= 1e-6;
        }
        parts.push(format!("{}: |sigma_pore|/|sigma_wall| {:.1e}", e.tag, e.pore_density_ratio));
    }
    outcome(pass, format!("{} (<= 1e-6)", parts.join(", ")))
}

fn scaling() -> Outcome {
    let geom = desk_geometry(22).unwrap();
    let (mut ns, mut fmm_t, mut fac_t) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..4 {
        let s = 1usize << k;
        let disc = discretize(&geom, 96 * s, 1984 * s).unwrap();
        ns.push(disc.len() as f64);
        let op = FmmOperator::new(&disc, &FmmOptions::default()).unwrap();
        let v = random_vec(disc.unknowns(), 1);
        op.apply(&v).unwrap();
        let t = Instant::now();
        for _ in 0..3 {
            op.apply(&v).unwrap();
        }
        fmm_t.push(t.elapsed().as_secs_f64() / 3.0);
        drop(op);
        let cfg = IfmmConfig::default();
        let t = Instant::now();
        let ext = ExtendedSystem::new(build_h2(&disc, &cfg).unwrap());
        IfmmFactorization::new(&ext, &FactorOptions { epsilon: cfg.epsilon, keep_factors: false, audit: false }).unwrap();
        fac_t.push(t.elapsed().as_secs_f64());
    }
    let (sf, si) = (loglog_slope(&ns, &fmm_t), loglog_slope(&ns, &fac_t));
    outcome(
        sf <= 1.3 && si <= 1.4,
        format!("N {ns:?}: FMM apply {fmm_t:.3?} s, slope {sf:.2} (<= 1.3); IFMM build {fac_t:.1?} s, slope {si:.2} (<= 1.4)"),
    )
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(String::from).collect());
    let wanted = |name: &str| only.as_ref().is_none_or(|o| o.iter().any(|n| n == name));
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn() -> Outcome| {
        if !wanted(name) {
            return;
        }
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} {name} [{secs:.1}s]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o, secs));
    };
    check("quadrature_order", &quadrature);
    check("circle_oracle", &circle);
    check("fmm_correctness", &fmm);
    check("ifmm_direct_oracle", &ifmm_direct);
    let desk = ["preconditioner_ordering", "residual_honesty", "accuracy_fields", "shear_density_structure"];
    if desk.iter().any(|n| wanted(n)) {
        let t = Instant::now();
        let runs = desk_runs();
        println!("     desk runs finished in {:.1}s", t.elapsed().as_secs_f64());
        check("preconditioner_ordering", &|| ordering(&runs));
        check("residual_honesty", &|| honesty(&runs));
        check("accuracy_fields", &|| accuracy(&runs));
        check("shear_density_structure", &|| density(&runs));
    }
    check("scaling_probes", &scaling);
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed {:?}", results.len() - failed.len(), failed.len(), failed);
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
