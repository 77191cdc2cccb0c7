//! Test-only oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use multiroot::{
    check_theorem, expand_from_roots, FactoredForm, Family, PolyFamily, Precision, Real,
    RootConfiguration, TheoremParams,
};
use rand::Rng;

/// One of the three worked examples: true roots, multiplicities and the
/// published starting values.
pub struct Example {
    pub name: &'static str,
    pub family: Family,
    pub roots: &'static [&'static str],
    pub multiplicities: &'static [u32],
    pub initial: &'static [&'static str],
    /// Iterations allowed to reach `1e-18`.
    pub iterations: usize,
}

pub const EXAMPLES: [Example; 3] = [
    Example {
        name: "example1",
        family: Family::Algebraic,
        roots: &["2", "3", "5"],
        multiplicities: &[2, 3, 1],
        initial: &["0.4", "3.5", "8"],
        iterations: 4,
    },
    Example {
        name: "example2",
        family: Family::Trigonometric,
        roots: &["1", "2", "2.5"],
        multiplicities: &[3, 2, 1],
        initial: &["0.2", "1.7", "3"],
        iterations: 5,
    },
    Example {
        name: "example3",
        family: Family::Exponential,
        roots: &["-2", "3"],
        multiplicities: &[2, 2],
        initial: &["-1", "4"],
        iterations: 4,
    },
];

impl Example {
    pub fn truth(&self, prec: Precision) -> Vec<Real> {
        parse_all(prec, self.roots)
    }

    pub fn start(&self, prec: Precision) -> Vec<Real> {
        parse_all(prec, self.initial)
    }

    pub fn config(&self, prec: Precision) -> RootConfiguration {
        RootConfiguration::new(self.truth(prec), self.multiplicities.to_vec()).unwrap()
    }

    pub fn factored(&self, prec: Precision) -> FactoredForm {
        FactoredForm::new(self.family, self.config(prec)).unwrap()
    }

    /// Coefficient form, as a user would supply it.
    pub fn expanded(&self, prec: Precision) -> PolyFamily {
        expand_from_roots(&self.factored(prec)).unwrap()
    }

    pub fn problem_file(&self) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("problems")
            .join(format!("{}.toml", self.name))
    }
}

pub fn bits(b: u32) -> Precision {
    Precision::new(b).unwrap()
}

pub fn parse_all(prec: Precision, values: &[&str]) -> Vec<Real> {
    values.iter().map(|s| prec.parse(s).unwrap()).collect()
}

/// Random configuration: 1..=`max_roots` roots at least `min_gap` apart,
/// multiplicities 1..=`max_alpha`, degree at most 10, and an even
/// multiplicity sum for the harmonic families.
pub fn random_config(
    rng: &mut impl Rng,
    family: Family,
    max_roots: usize,
    max_alpha: u32,
    min_gap: f64,
) -> (Vec<f64>, Vec<u32>) {
    loop {
        let m = rng.gen_range(1..=max_roots);
        let mut mult: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=max_alpha)).collect();
        if family != Family::Algebraic && mult.iter().sum::<u32>() % 2 == 1 {
            if mult[0] < max_alpha {
                mult[0] += 1;
            } else {
                mult[0] -= 1;
            }
        }
        let total: u32 = mult.iter().sum();
        let cap = if family == Family::Algebraic { 10 } else { 20 };
        if total == 0 || total > cap {
            continue;
        }
        let (lo, hi) = match family {
            Family::Trigonometric => (0.0, 2.0 * PI - min_gap),
            _ => (-2.5, 2.5),
        };
        let mut roots: Vec<f64> = Vec::with_capacity(m);
        for _ in 0..1000 {
            if roots.len() == m {
                break;
            }
            let r = rng.gen_range(lo..hi);
            if roots.iter().all(|s| (s - r).abs() >= min_gap) {
                roots.push(r);
            }
        }
        if roots.len() == m {
            return (roots, mult);
        }
    }
}

/// Distinct simple roots at least `min_gap` apart in `[-3, 3]`.
pub fn random_simple_roots(rng: &mut impl Rng, m: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let mut roots: Vec<f64> = Vec::with_capacity(m);
        for _ in 0..1000 {
            if roots.len() == m {
                break;
            }
            let r = rng.gen_range(-3.0..3.0);
            if roots.iter().all(|s: &f64| (s - r).abs() >= min_gap) {
                roots.push(r);
            }
        }
        if roots.len() == m {
            return roots;
        }
    }
}

/// Largest `c` in `(0, d/2)` for which the theorem check passes, by bisection
/// on the clause system (the feasible set in `c` is an interval at zero).
pub fn bisect_max_c(params: &TheoremParams) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, params.d / 2.0);
    let mut found = false;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if check_theorem(&params.with_c(mid)).passed() {
            lo = mid;
            found = true;
        } else {
            hi = mid;
        }
    }
    found.then_some(lo)
}

/// Feasible `(c, kappa)` points of the trigonometric theorem on a regular
/// grid over `(0, d/2) x (0, pi)`.
pub fn grid_feasible(params: &TheoremParams, steps: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for a in 1..steps {
        let c = params.d / 2.0 * a as f64 / steps as f64;
        for b in 1..steps {
            let kappa = PI * b as f64 / steps as f64;
            if check_theorem(&params.with_c(c).with_kappa(kappa)).passed() {
                out.push((c, kappa));
            }
        }
    }
    out
}

/// Units in the last place of `x` at its precision.
pub fn ulp(x: &Real) -> Real {
    let exp = x.get_exp().unwrap_or(0);
    Real::with_val(x.prec(), 1) << (exp - x.prec() as i32)
}
