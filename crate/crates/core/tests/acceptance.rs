use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nlsqfem::assembly::Discretization;
use nlsqfem::lab::{execute, format_csv, verify, ExperimentConfig, ExperimentOutput, TableRow};
use nlsqfem::mesh::{make_unit_square, uniform_refine};
use nlsqfem::solve::gauss_newton;
use nlsqfem::system::HeatProblem;

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
    /// Criteria the implementation is expected to meet; the others are
    /// reported but do not fail the target.
    gating: bool,
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    ExperimentConfig::parse(&text).unwrap()
}

fn run(cfg: &ExperimentConfig) -> ExperimentOutput {
    let out = execute(cfg).unwrap();
    if let Some(e) = &out.failure {
        println!("  note: {} stopped early: {e}", cfg.problem);
    }
    out
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn in_band(v: Option<f64>, lo: f64, hi: f64) -> bool {
    v.is_some_and(|x| (lo..=hi).contains(&x))
}

fn list(rows: &[TableRow], f: impl Fn(&TableRow) -> Option<f64>) -> String {
    let v: Vec<String> = rows
        .iter()
        .map(|r| f(r).map_or("-".into(), |x| format!("{x:.3}")))
        .collect();
    format!("[{}]", v.join(", "))
}

fn heat_uniform() -> Outcome {
    let out = run(&config("heat-square.cfg"));
    let rows = &out.rows;
    let last = rows.last().expect("rows");
    let fine = (last.h - 1.0 / 64.0).abs() < 1e-12;
    let err = last.error.unwrap_or(f64::NAN);
    let magnitude =
        fine && within(err, 1.47e-1, 0.10) && within(last.functional_sqrt, 1.49e-1, 0.10);
    let ieff = rows.iter().all(|r| in_band(r.i_eff, 0.98, 1.05));
    let tail = &rows[rows.len().saturating_sub(3)..];
    let rates = rows.len() >= 4 && tail.iter().all(|r| in_band(r.eoc_h, 0.95, 1.05));
    Outcome {
        id: "1 heat uniform P1/RT0",
        passed: magnitude && ieff && rates,
        detail: format!(
            "h=1/64 error {err:.3e} (target 1.47e-1 +-10%) F^1/2 {:.3e} (target 1.49e-1 +-10%) [{}]; i_eff {} [{}]; eoc_h last three {} [{}]",
            last.functional_sqrt,
            pass(magnitude),
            list(rows, |r| r.i_eff),
            pass(ieff),
            list(tail, |r| r.eoc_h),
            pass(rates)
        ),
        gating: false,
    }
}

fn heat_iterations() -> Outcome {
    let cfg = config("heat-square.cfg");
    let p = HeatProblem::manufactured_square();
    let mut mesh = Arc::new(make_unit_square(cfg.initial_n).unwrap());
    let mut counts = Vec::new();
    let mut decreasing = true;
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = Arc::new(uniform_refine(&mesh));
        }
        let disc = Discretization::new(mesh.clone(), cfg.degree, &p).unwrap();
        let r = gauss_newton(&p, &disc, vec![0.0; disc.n_dofs()], &cfg.newton).unwrap();
        counts.push(r.iterations);
        decreasing &= r.residuals[1..].windows(2).all(|w| w[1] < w[0]);
    }
    let counts_ok = counts.iter().all(|c| (3..=10).contains(c));
    Outcome {
        id: "2 heat Gauss-Newton iterations",
        passed: counts_ok && decreasing,
        detail: format!("iterations per level {counts:?} in [3, 10] [{}]; residuals strictly decreasing after the first step [{}]", pass(counts_ok), pass(decreasing)),
        gating: true,
    }
}

fn heat_adaptive() -> Outcome {
    let cfg = config("heat-lshape.cfg");
    let out = run(&cfg);
    let late = &out.rows[3.min(out.rows.len())..];
    let ieff = !late.is_empty() && late.iter().all(|r| in_band(r.i_eff, 0.9, 1.15));
    let (near, total) = match out.snapshots.get(6) {
        Some(s) => {
            let mesh = s.disc.mesh();
            let near = (0..mesh.n_triangles())
                .filter(|t| {
                    let c = mesh.centroid(*t);
                    c[0].hypot(c[1]) < 0.25
                })
                .count();
            (near, mesh.n_triangles())
        }
        None => (0, 1),
    };
    let fraction = near as f64 / total as f64;
    let corner = fraction >= 0.30;
    Outcome {
        id: "3 heat adaptive L-shape",
        passed: ieff && corner,
        detail: format!(
            "i_eff for cycles >= 3 {} in [0.9, 1.15] [{}]; cycle 6 has {near} of {total} element centroids within 0.25 of the corner ({:.1}%, need 30%) [{}]",
            list(late, |r| r.i_eff),
            pass(ieff),
            100.0 * fraction,
            pass(corner)
        ),
        gating: false,
    }
}

fn relu() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (file, lo, hi) in [
        ("relu-lshape-k1.cfg", 0.4, 0.65),
        ("relu-lshape-k2.cfg", 0.9, f64::INFINITY),
    ] {
        let cfg = config(file);
        let out = run(&cfg);
        let rows = &out.rows;
        let ieff = out.failure.is_none() && rows.iter().all(|r| in_band(r.i_eff, 0.97, 1.03));
        let tail = &rows[rows.len().saturating_sub(3)..];
        let rates = rows.len() >= 4 && tail.iter().all(|r| in_band(r.eoc_dof, lo, hi));
        ok &= ieff && rates;
        let min = rows
            .iter()
            .filter_map(|r| r.i_eff)
            .fold(f64::INFINITY, f64::min);
        let max = rows.iter().filter_map(|r| r.i_eff).fold(0.0, f64::max);
        parts.push(format!(
            "k={}: i_eff {min:.3}..{max:.3} in [0.97, 1.03] [{}], eoc_dof last three {} [{}]",
            cfg.degree,
            pass(ieff),
            list(tail, |r| r.eoc_dof),
            pass(rates)
        ));
    }
    Outcome {
        id: "4 ReLU adaptive L-shape",
        passed: ok,
        detail: parts.join("; "),
        gating: true,
    }
}

fn svk_uniform() -> Outcome {
    let out = run(&config("svk-square.cfg"));
    let rows = &out.rows;
    let last = rows.last().expect("rows");
    let fine = (last.h - 1.0 / 64.0).abs() < 1e-12;
    let err = last.error.unwrap_or(f64::NAN);
    let magnitude = fine && within(err, 6.16e-4, 0.15);
    let start = rows
        .iter()
        .position(|r| r.h <= 1.0 / 8.0 + 1e-12)
        .unwrap_or(rows.len());
    let small = &rows[start..];
    let ieff = !small.is_empty() && small.iter().all(|r| in_band(r.i_eff, 0.98, 1.06));
    Outcome {
        id: "5 SVK uniform P2/RT1",
        passed: magnitude && ieff,
        detail: format!(
            "h=1/64 error {err:.3e} (target 6.16e-4 +-15%) [{}]; i_eff for h <= 1/8 {} in [0.98, 1.06] [{}]",
            pass(magnitude),
            list(small, |r| r.i_eff),
            pass(ieff)
        ),
        gating: false,
    }
}

fn cook() -> Outcome {
    let out = run(&config("svk-cook.cfg"));
    let rows = &out.rows;
    let iters: Vec<usize> = rows.iter().map(|r| r.newton_iters).collect();
    let iters_ok = out.failure.is_none() && iters.iter().all(|i| *i <= 10);
    let band = !rows.is_empty() && rows.iter().all(|r| in_band(r.i_eff, 0.15, 0.75));
    let tail = &rows[rows.len().saturating_sub(4)..];
    let monotone = tail.len() == 4 && tail.windows(2).all(|w| w[1].i_eff >= w[0].i_eff);
    Outcome {
        id: "6 SVK Cook membrane",
        passed: iters_ok && band && monotone,
        detail: format!(
            "Gauss-Newton iterations {iters:?} <= 10 [{}]; i_eff {} in [0.15, 0.75] [{}]; non-decreasing over the last four [{}]",
            pass(iters_ok),
            list(rows, |r| r.i_eff),
            pass(band),
            pass(monotone)
        ),
        gating: false,
    }
}

fn oracles() -> Outcome {
    let checks = verify().unwrap();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    Outcome {
        id: "7 oracle suite",
        passed: failed.is_empty(),
        detail: format!("{} checks, failing: {failed:?}", checks.len()),
        gating: true,
    }
}

fn determinism() -> Outcome {
    let mut same = true;
    let mut names = Vec::new();
    for file in ["heat-lshape.cfg", "relu-lshape-k1.cfg", "svk-cook.cfg"] {
        let mut cfg = config(file);
        cfg.cycles = cfg.cycles.min(6);
        let a = format_csv(&execute(&cfg).unwrap().rows);
        let b = format_csv(&execute(&cfg).unwrap().rows);
        same &= a == b;
        names.push(file);
    }
    Outcome {
        id: "8 determinism",
        passed: same,
        detail: format!("repeated runs of {names:?} give byte-identical CSV"),
        gating: true,
    }
}

fn informational() {
    let mut cfg = ExperimentConfig::new(nlsqfem::lab::ProblemId::ReluLshape);
    cfg.cycles = 8;
    let out = run(&cfg);
    println!(
        "INFO ReLU k=1 with kappa={} delta={}: i_eff {}",
        cfg.kappa,
        cfg.delta,
        list(&out.rows, |r| r.i_eff)
    );
    let mut cfg = config("svk-square.cfg");
    cfg.lambda = 1.0;
    cfg.levels = 4;
    let out = run(&cfg);
    println!(
        "INFO SVK uniform with lambda=1: error {}",
        list(&out.rows, |r| r.error)
    );
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "miss"
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [fn() -> Outcome; 8] = [
        heat_uniform,
        heat_iterations,
        heat_adaptive,
        relu,
        svk_uniform,
        cook,
        oracles,
        determinism,
    ];
    let mut gating_failures = 0;
    for criterion in criteria {
        let start = Instant::now();
        let o = criterion();
        println!(
            "{} criterion {}: {} ({:.1} s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if o.gating && !o.passed {
            gating_failures += 1;
        }
    }
    informational();
    if gating_failures > 0 {
        println!("{gating_failures} gating criteria failed");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
