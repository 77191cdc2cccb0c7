//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    bisect_max_c, bits, grid_feasible, random_config, random_simple_roots, ulp, Example, EXAMPLES,
};
use multiroot::cli::problem::{parse_problem, Overrides};
use multiroot::convergence::{attainable_accuracy, cubic_error_bound, estimate_order_above};
use multiroot::ehrlich::max_error;
use multiroot::oracle::default_verify_tolerance;
use multiroot::{
    check_theorem, classical_ehrlich_step, expand_from_roots, lemma1_residual,
    newton_multiplicity_solve, solve, step, FactoredForm, Family, IterationState, PolyFamily,
    Precision, Real, RootConfiguration, SolveSettings, SweepMode, Termination, TheoremParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const FAMILIES: [Family; 3] = [
    Family::Algebraic,
    Family::Trigonometric,
    Family::Exponential,
];

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 example 1 reproduction", || reproduce(&EXAMPLES[0])),
        ("2 example 2 reproduction", || reproduce(&EXAMPLES[1])),
        ("3 example 3 reproduction", || reproduce(&EXAMPLES[2])),
        ("4 cubic order against the Newton baseline", cubic_order),
        (
            "5 simple-root identity and classical step agreement",
            simple_roots,
        ),
        (
            "6 theorem predicates against observed iterates",
            theorem_consistency,
        ),
        ("7 expand, solve and verify round trip", round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(format!("panicked: {}", panic_message(&e))));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The bundled problem file, solved at 192 bits from the published starting
/// values; the error at the allowed iterate must be at most `1e-18`.
fn reproduce(ex: &Example) -> Outcome {
    let path = ex.problem_file();
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let overrides = Overrides {
        precision_bits: Some(192),
        ..Overrides::default()
    };
    let problem = parse_problem(ex.name, &text, &overrides).map_err(|e| e.to_string())?;
    let report = solve(
        &problem.poly,
        &problem.multiplicities,
        &problem.initial,
        &problem.settings,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let p = problem.precision;
    let truth = ex.truth(p);
    ensure(report.termination == Termination::Converged, || {
        format!("terminated as {}", report.termination)
    })?;
    // Iterates after convergence equal the last one.
    let row = report
        .trace
        .iter()
        .find(|r| r.k == ex.iterations)
        .unwrap_or_else(|| report.trace.last().unwrap());
    let err = max_error(&row.approximations, &truth);
    let target = p.parse("1e-18").unwrap();
    ensure(err <= target, || {
        format!("error {:.3e} at iterate {}", err.to_f64(), ex.iterations)
    })?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    let first = report.iterations_to(&truth, &target).unwrap();
    Ok(format!(
        "error {:.2e} at iterate {} (1e-18 first reached at {first}, converged after {}), {:.1} ms",
        err.to_f64(),
        ex.iterations,
        report.iterations_used,
        elapsed.as_secs_f64() * 1e3
    ))
}

/// Order from the error trace on each example at 256 bits, and Newton with
/// the multiplicity on each root from the same starting value.
fn cubic_order() -> Outcome {
    let p = bits(256);
    let mut lines = Vec::new();
    for ex in &EXAMPLES {
        let poly = ex.expanded(p);
        let truth = ex.truth(p);
        let report = solve(
            &poly,
            ex.multiplicities,
            &ex.start(p),
            &SolveSettings::new(p),
        )
        .map_err(|e| e.to_string())?;
        let order = report
            .error_order(&poly, ex.multiplicities, &truth)
            .map_err(|e| e.to_string())?
            .order;
        ensure((2.6..=3.4).contains(&order), || {
            format!("{}: order {order:.3}", ex.name)
        })?;

        let mut newton = Vec::new();
        for ((x0, r), &a) in ex.start(p).iter().zip(&truth).zip(ex.multiplicities) {
            let trace = newton_multiplicity_solve(&poly, a, x0, &SolveSettings::new(p))
                .map_err(|e| e.to_string())?;
            let floor = attainable_accuracy(&poly, r, a).map_err(|e| e.to_string())?;
            let est = estimate_order_above(&trace.errors(r), Some(&floor))
                .map_err(|e| format!("{}: Newton from {x0:.3}: {e}", ex.name))?;
            ensure((1.7..=2.3).contains(&est.order), || {
                format!("{}: Newton order {:.3} toward {r:.3}", ex.name, est.order)
            })?;
            newton.push(format!("{:.2}", est.order));
        }
        lines.push(format!(
            "{} {order:.2} vs Newton [{}]",
            ex.name,
            newton.join(", ")
        ));
    }
    Ok(lines.join("; "))
}

fn simple_roots() -> Outcome {
    let p = Precision::DOUBLE;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..=5);
        let roots = random_simple_roots(&mut rng, m, 0.3);
        let xs: Vec<Real> = roots.iter().map(|&r| p.from_f64(r)).collect();
        for i in 0..m {
            let scale: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (roots[i] - roots[j]))
                .sum::<f64>()
                .abs()
                * 2.0;
            let res = lemma1_residual(&xs, i)
                .map_err(|e| e.to_string())?
                .to_f64()
                .abs();
            let rel = res / scale;
            worst = worst.max(rel);
            ensure(rel <= 1e-10, || {
                format!("{roots:?}, i = {i}: relative residual {rel:.2e}")
            })?;
        }
    }

    let mut worst_ulps = 0f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..=5);
        let roots = random_simple_roots(&mut rng, m, 0.3);
        let cfg = RootConfiguration::from_f64(p, &roots, &vec![1; m]).unwrap();
        let poly = expand_from_roots(&FactoredForm::new(Family::Algebraic, cfg).unwrap()).unwrap();
        let xs: Vec<Real> = roots
            .iter()
            .map(|&r| p.from_f64(r + 0.1 * rng.gen_range(-1.0..1.0)))
            .collect();
        let classical = classical_ehrlich_step(&poly, &xs, SweepMode::Simultaneous)
            .map_err(|e| e.to_string())?;
        let state = IterationState::new(&poly, xs.clone()).map_err(|e| e.to_string())?;
        let general =
            step(&poly, &vec![1; m], &state, &SolveSettings::new(p)).map_err(|e| e.to_string())?;
        for ((a, b), x) in general.approximations.iter().zip(&classical).zip(&xs) {
            let scale = Float::with_val(53, x.abs_ref()).max(&Float::with_val(53, b.abs_ref()));
            let ulps = (Float::with_val(53, a - b).abs() / ulp(&scale)).to_f64();
            worst_ulps = worst_ulps.max(ulps);
            ensure(ulps <= 4.0, || {
                format!("{roots:?}: {a} vs {b} ({ulps} ulp)")
            })?;
        }
    }
    Ok(format!(
        "worst relative residual {worst:.1e}, worst step disagreement {worst_ulps} ulp"
    ))
}

/// Feasible point per family (largest `c` by bisection, or the grid for the
/// trigonometric family where `kappa` varies too); then 20 solves from
/// starting values within `c q` of the roots, checking the first three
/// iterates against `c q^(3^k)`.
fn theorem_consistency() -> Outcome {
    let p = bits(256);
    let q = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines = Vec::new();
    for (ex, kappa) in EXAMPLES.iter().zip([None, Some(1.0), None]) {
        let cfg = ex.config(p);
        let base =
            TheoremParams::new(ex.family, &cfg, 0.01, q, kappa).map_err(|e| e.to_string())?;
        let params = if ex.family == Family::Trigonometric {
            let grid = grid_feasible(&base, 60);
            let &(c, kappa) = grid
                .iter()
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .ok_or_else(|| format!("{}: no feasible grid point", ex.name))?;
            base.with_c(c).with_kappa(kappa)
        } else {
            let c = bisect_max_c(&base).ok_or_else(|| format!("{}: no feasible c", ex.name))?;
            base.with_c(c)
        };
        let verdict = check_theorem(&params);
        ensure(verdict.passed(), || {
            format!(
                "{}: feasible point fails {:?}",
                ex.name,
                verdict.failures().collect::<Vec<_>>()
            )
        })?;

        let c = params.c;
        let poly = PolyFamily::Factored(ex.factored(p));
        let mut worst = 0f64;
        for _ in 0..20 {
            let x0: Vec<Real> = cfg
                .roots()
                .iter()
                .map(|r| Float::with_val(256, r + c * q * rng.gen_range(-1.0..1.0)))
                .collect();
            let report = solve(&poly, ex.multiplicities, &x0, &SolveSettings::new(p))
                .map_err(|e| e.to_string())?;
            for k in 1..=3usize {
                let Some(row) = report.trace.iter().find(|r| r.k == k) else {
                    break;
                };
                let err = max_error(&row.approximations, cfg.roots()).to_f64();
                let bound = cubic_error_bound(c, q, k as u32);
                worst = worst.max(err / bound);
                ensure(err <= bound, || {
                    format!("{}: iterate {k} error {err:.3e} above {bound:.3e}", ex.name)
                })?;
            }
        }
        lines.push(format!(
            "{} c = {c:.4}, worst error/bound {worst:.2e}",
            ex.name
        ));
    }
    Ok(lines.join("; "))
}

/// 50 random configurations per family at 128 bits: expand, solve from the
/// roots perturbed by up to a tenth of the minimal gap, and certify.
fn round_trip() -> Outcome {
    let p = bits(128);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lines = Vec::new();
    for family in FAMILIES {
        let mut max_iterations = 0;
        for _ in 0..50 {
            let (roots, mult) = random_config(&mut rng, family, 5, 4, 0.3);
            let cfg = RootConfiguration::from_f64(p, &roots, &mult).unwrap();
            let poly = expand_from_roots(&FactoredForm::new(family, cfg.clone()).unwrap())
                .map_err(|e| e.to_string())?;
            let d = cfg.min_gap().map_or(1.0, |g| g.to_f64());
            let x0: Vec<Real> = roots
                .iter()
                .map(|&r| p.from_f64(r + 0.1 * d * rng.gen_range(-1.0..1.0)))
                .collect();
            let report =
                solve(&poly, &mult, &x0, &SolveSettings::new(p)).map_err(|e| e.to_string())?;
            ensure(report.termination == Termination::Converged, || {
                format!("{family} {roots:?} {mult:?}: {}", report.termination)
            })?;
            max_iterations = max_iterations.max(report.iterations_used);
            let claimed =
                RootConfiguration::new(report.final_approximations.clone(), mult.clone()).unwrap();
            let tol = default_verify_tolerance(p, *mult.iter().max().unwrap());
            let outcome =
                multiroot::verify_roots(&poly, &claimed, &tol).map_err(|e| e.to_string())?;
            ensure(outcome.passed, || {
                let why: Vec<String> = outcome.failures().map(|f| f.to_string()).collect();
                format!("{family} {roots:?} {mult:?}: {why:?}")
            })?;
        }
        lines.push(format!(
            "{family} 50/50 (at most {max_iterations} iterations)"
        ));
    }
    Ok(lines.join("; "))
}
