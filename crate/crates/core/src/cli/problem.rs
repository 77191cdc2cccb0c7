//! Problem files: TOML documents describing one polynomial, the known
//! multiplicities and the starting approximations.
//!
//! ```toml
//! label = "example1"
//! family = "algebraic"            # algebraic | trigonometric | exponential
//! representation = "coefficients" # coefficients | roots
//! precision_bits = 256
//! multiplicities = [2, 3, 1]
//! initial = ["0.4", "3.5", "8"]
//! truth = ["2", "3", "5"]         # optional
//!
//! [coefficients]                  # algebraic: x^n + a_1 x^(n-1) + ... + a_n
//! a = ["-18", "132", "-506", "1071", "-1188", "540"]
//!
//! [settings]                      # optional
//! max_iterations = 50
//! tolerance = "1e-70"
//! sweep = "simultaneous"
//! error_target = "1e-18"
//!
//! [theorems]                      # optional
//! c = 0.1
//! q = 0.5
//! ```
//!
//! Trigonometric and exponential coefficient tables carry `a0`, `a` (cos or
//! ch) and `b` (sin or sh). With `representation = "roots"` a `[roots]` table
//! with `values` (and an optional `scale`) replaces `[coefficients]`, and the
//! roots double as the truth. Real values are decimal strings so that no
//! digit is lost to binary64 parsing.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::ehrlich::{SolveSettings, SweepMode};
use crate::poly::{
    expand_from_roots, AlgebraicPoly, ExpPoly, FactoredForm, Family, PolyFamily, RootConfiguration,
    TrigPoly,
};
use crate::real::{Precision, Real, MIN_PRECISION_BITS};

use super::CliError;

/// Largest accepted `precision_bits`.
pub const MAX_PRECISION_BITS: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Coefficients,
    Roots,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    label: Option<String>,
    family: Spanned<Family>,
    representation: Spanned<Representation>,
    precision_bits: Spanned<u32>,
    multiplicities: Spanned<Vec<u32>>,
    initial: Spanned<Vec<String>>,
    truth: Option<Spanned<Vec<String>>>,
    coefficients: Option<Spanned<RawCoefficients>>,
    roots: Option<Spanned<RawRoots>>,
    settings: Option<RawSettings>,
    theorems: Option<Spanned<TheoremInputs>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    a0: Option<Spanned<String>>,
    a: Spanned<Vec<String>>,
    b: Option<Spanned<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoots {
    values: Spanned<Vec<String>>,
    scale: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSettings {
    max_iterations: Option<Spanned<usize>>,
    tolerance: Option<Spanned<String>>,
    sweep: Option<SweepMode>,
    error_target: Option<Spanned<String>>,
}

/// Hypothesis constants for the family's convergence theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremInputs {
    pub c: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub precision_bits: Option<u32>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<String>,
    pub sweep: Option<SweepMode>,
}

/// A validated problem, with every real parsed at the working precision.
#[derive(Debug, Clone)]
pub struct Problem {
    pub label: String,
    pub family: Family,
    pub representation: Representation,
    pub precision: Precision,
    pub multiplicities: Vec<u32>,
    pub initial: Vec<Real>,
    pub poly: PolyFamily,
    pub truth: Option<Vec<Real>>,
    pub settings: SolveSettings,
    pub error_target: Option<Real>,
    pub theorems: Option<TheoremInputs>,
}

impl Problem {
    /// True roots paired with the multiplicities, when known.
    pub fn truth_configuration(&self) -> Option<RootConfiguration> {
        let truth = self.truth.as_ref()?;
        RootConfiguration::new(truth.clone(), self.multiplicities.clone()).ok()
    }
}

/// Resolves byte offsets of a source text to 1-based line numbers.
struct Source<'a> {
    name: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn error<T>(&self, spanned: &Spanned<T>, msg: impl std::fmt::Display) -> CliError {
        CliError::Input(format!(
            "{}:{}: {msg}",
            self.name,
            self.line(spanned.span())
        ))
    }

    fn real(&self, prec: Precision, v: &Spanned<String>, what: &str) -> Result<Real, CliError> {
        prec.parse(v.get_ref())
            .map_err(|e| self.error(v, format!("{what}: {e}")))
    }

    fn reals(
        &self,
        prec: Precision,
        v: &Spanned<Vec<String>>,
        what: &str,
    ) -> Result<Vec<Real>, CliError> {
        v.get_ref()
            .iter()
            .map(|s| {
                prec.parse(s)
                    .map_err(|e| self.error(v, format!("{what}: {e}")))
            })
            .collect()
    }
}

/// Parses and validates a problem file. `name` only labels error messages.
pub fn parse_problem(name: &str, text: &str, overrides: &Overrides) -> Result<Problem, CliError> {
    let raw: RawProblem = toml::from_str(text)
        .map_err(|e| CliError::Input(format!("{name}: {}", e.to_string().trim_end())))?;
    let src = Source { name, text };

    let bits = overrides
        .precision_bits
        .unwrap_or(*raw.precision_bits.get_ref());
    if !(MIN_PRECISION_BITS..=MAX_PRECISION_BITS).contains(&bits) {
        return Err(src.error(
            &raw.precision_bits,
            format!("precision_bits must lie in {MIN_PRECISION_BITS}..={MAX_PRECISION_BITS}, got {bits}"),
        ));
    }
    let prec = Precision::new(bits).expect("range checked");
    let family = *raw.family.get_ref();

    let multiplicities = raw.multiplicities.get_ref().clone();
    if multiplicities.is_empty() || multiplicities.contains(&0) {
        return Err(src.error(
            &raw.multiplicities,
            "multiplicities must be a non-empty list of positive integers",
        ));
    }
    let total: u32 = multiplicities.iter().sum();
    if family.degree_for_multiplicity(total).is_none() {
        return Err(src.error(
            &raw.multiplicities,
            format!("{family} problems need an even multiplicity sum, got {total}"),
        ));
    }
    let initial = src.reals(prec, &raw.initial, "initial")?;
    if initial.len() != multiplicities.len() {
        return Err(src.error(
            &raw.initial,
            format!(
                "initial has {} entries but multiplicities has {}",
                initial.len(),
                multiplicities.len()
            ),
        ));
    }

    let (poly, roots_truth) = match *raw.representation.get_ref() {
        Representation::Coefficients => {
            let table = raw.coefficients.as_ref().ok_or_else(|| {
                src.error(
                    &raw.representation,
                    "representation = \"coefficients\" needs a [coefficients] table",
                )
            })?;
            if let Some(r) = &raw.roots {
                return Err(src.error(
                    r,
                    "[roots] is not allowed with representation = \"coefficients\"",
                ));
            }
            (coefficient_poly(&src, prec, family, table, total)?, None)
        }
        Representation::Roots => {
            let table = raw.roots.as_ref().ok_or_else(|| {
                src.error(
                    &raw.representation,
                    "representation = \"roots\" needs a [roots] table",
                )
            })?;
            if let Some(c) = &raw.coefficients {
                return Err(src.error(
                    c,
                    "[coefficients] is not allowed with representation = \"roots\"",
                ));
            }
            let values = src.reals(prec, &table.get_ref().values, "roots")?;
            if values.len() != multiplicities.len() {
                return Err(src.error(
                    &table.get_ref().values,
                    format!(
                        "roots has {} entries but multiplicities has {}",
                        values.len(),
                        multiplicities.len()
                    ),
                ));
            }
            let config = RootConfiguration::new(values.clone(), multiplicities.clone())
                .map_err(|e| src.error(&table.get_ref().values, e))?;
            let form = match &table.get_ref().scale {
                Some(s) => FactoredForm::with_scale(family, config, src.real(prec, s, "scale")?),
                None => FactoredForm::new(family, config),
            }
            .map_err(|e| src.error(table, e))?;
            (PolyFamily::Factored(form), Some(values))
        }
    };

    let truth = match &raw.truth {
        Some(t) => {
            let values = src.reals(prec, t, "truth")?;
            if values.len() != multiplicities.len() {
                return Err(src.error(
                    t,
                    format!(
                        "truth has {} entries but multiplicities has {}",
                        values.len(),
                        multiplicities.len()
                    ),
                ));
            }
            Some(values)
        }
        None => roots_truth,
    };

    let mut settings = SolveSettings::new(prec);
    let mut error_target = None;
    if let Some(s) = &raw.settings {
        if let Some(m) = &s.max_iterations {
            settings.max_iterations = *m.get_ref();
            if settings.max_iterations == 0 {
                return Err(src.error(m, "max_iterations must be at least 1"));
            }
        }
        if let Some(t) = &s.tolerance {
            settings.correction_tolerance = src.real(prec, t, "tolerance")?;
            if settings.correction_tolerance <= 0 {
                return Err(src.error(t, "tolerance must be positive"));
            }
        }
        if let Some(sweep) = s.sweep {
            settings.sweep = sweep;
        }
        if let Some(t) = &s.error_target {
            let v = src.real(prec, t, "error_target")?;
            if v <= 0 {
                return Err(src.error(t, "error_target must be positive"));
            }
            error_target = Some(v);
        }
    }
    if let Some(m) = overrides.max_iterations {
        if m == 0 {
            return Err(CliError::Input(
                "--max-iterations must be at least 1".into(),
            ));
        }
        settings.max_iterations = m;
    }
    if let Some(t) = &overrides.tolerance {
        let v = prec
            .parse(t)
            .map_err(|e| CliError::Input(format!("--tolerance: {e}")))?;
        if v <= 0 {
            return Err(CliError::Input("--tolerance must be positive".into()));
        }
        settings.correction_tolerance = v;
    }
    if let Some(sweep) = overrides.sweep {
        settings.sweep = sweep;
    }

    if let Some(t) = &raw.theorems {
        let th = t.get_ref();
        if th.kappa.is_some() != (family == Family::Trigonometric) {
            return Err(src.error(
                t,
                "kappa is required for trigonometric problems and not allowed otherwise",
            ));
        }
    }

    Ok(Problem {
        label: raw.label.unwrap_or_else(|| name.to_string()),
        family,
        representation: *raw.representation.get_ref(),
        precision: prec,
        multiplicities,
        initial,
        poly,
        truth,
        settings,
        error_target,
        theorems: raw.theorems.map(|t| t.into_inner()),
    })
}

fn coefficient_poly(
    src: &Source<'_>,
    prec: Precision,
    family: Family,
    table: &Spanned<RawCoefficients>,
    total: u32,
) -> Result<PolyFamily, CliError> {
    let t = table.get_ref();
    let a = src.reals(prec, &t.a, "a")?;
    let expected = family
        .degree_for_multiplicity(total)
        .expect("parity checked");
    if a.len() != expected {
        return Err(src.error(
            &t.a,
            format!(
                "multiplicities sum to {total}, so a needs {expected} entries, got {}",
                a.len()
            ),
        ));
    }
    match family {
        Family::Algebraic => {
            if let Some(x) = &t.a0 {
                return Err(src.error(
                    x,
                    "algebraic coefficients take no a0 (the polynomial is monic)",
                ));
            }
            if let Some(x) = &t.b {
                return Err(src.error(x, "algebraic coefficients take no b"));
            }
            AlgebraicPoly::monic(a)
                .map(PolyFamily::Algebraic)
                .map_err(|e| src.error(table, e))
        }
        Family::Trigonometric | Family::Exponential => {
            let a0 =
                t.a0.as_ref()
                    .ok_or_else(|| src.error(table, format!("{family} coefficients need a0")))?;
            let a0 = src.real(prec, a0, "a0")?;
            let b_raw =
                t.b.as_ref()
                    .ok_or_else(|| src.error(table, format!("{family} coefficients need b")))?;
            let b = src.reals(prec, b_raw, "b")?;
            if b.len() != a.len() {
                return Err(src.error(
                    b_raw,
                    format!("b has {} entries but a has {}", b.len(), a.len()),
                ));
            }
            let poly = if family == Family::Trigonometric {
                TrigPoly::new(a0, a, b).map(PolyFamily::Trigonometric)
            } else {
                ExpPoly::new(a0, a, b).map(PolyFamily::Exponential)
            };
            poly.map_err(|e| src.error(table, e))
        }
    }
}

#[derive(Debug, Serialize)]
struct OutProblem<'a> {
    label: &'a str,
    family: Family,
    representation: Representation,
    precision_bits: u32,
    multiplicities: &'a [u32],
    initial: Vec<String>,
    truth: Vec<String>,
    coefficients: OutCoefficients,
    #[serde(skip_serializing_if = "Option::is_none")]
    settings: Option<OutSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorems: Option<TheoremInputs>,
}

#[derive(Debug, Serialize)]
struct OutCoefficients {
    #[serde(skip_serializing_if = "Option::is_none")]
    a0: Option<String>,
    a: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct OutSettings {
    error_target: String,
}

/// Everything `generate` needs to write a coefficient-form problem.
#[derive(Debug, Clone)]
pub struct GenerateSpec {
    pub label: String,
    pub family: Family,
    pub precision: Precision,
    /// Decimal roots; written to the file verbatim as the truth.
    pub roots: Vec<String>,
    pub multiplicities: Vec<u32>,
    pub scale: Option<Real>,
    /// Decimal starting values, written verbatim.
    pub initial: Option<Vec<String>>,
    pub error_target: Option<String>,
    pub theorems: Option<TheoremInputs>,
}

/// Expands the configuration and renders a coefficient-form problem file with
/// the roots as truth. Without explicit initial values each root is offset by
/// a tenth of the minimal gap, alternating in sign.
pub fn generate_problem(spec: &GenerateSpec) -> Result<String, CliError> {
    let prec = spec.precision;
    let parse_all = |v: &[String], what: &str| -> Result<Vec<Real>, CliError> {
        v.iter()
            .map(|s| {
                prec.parse(s)
                    .map_err(|e| CliError::Input(format!("{what}: {e}")))
            })
            .collect()
    };
    let roots = parse_all(&spec.roots, "roots")?;
    let config = RootConfiguration::new(roots.clone(), spec.multiplicities.clone())
        .map_err(|e| CliError::Input(e.to_string()))?;
    config
        .degree(spec.family)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let form = match &spec.scale {
        Some(s) => FactoredForm::with_scale(spec.family, config.clone(), s.clone()),
        None => FactoredForm::new(spec.family, config.clone()),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    let expanded = expand_from_roots(&form).map_err(|e| CliError::Numeric(e.to_string()))?;
    let fmt = |v: &[Real]| v.iter().map(|x| prec.format(x)).collect::<Vec<_>>();

    let initial = match &spec.initial {
        Some(v) if v.len() != spec.roots.len() => {
            return Err(CliError::Input(format!(
                "{} initial values for {} roots",
                v.len(),
                spec.roots.len()
            )))
        }
        Some(v) => {
            parse_all(v, "initial")?;
            v.iter().map(|s| s.trim().to_string()).collect()
        }
        None => {
            let offset = config
                .min_gap()
                .map_or_else(|| prec.from_f64(0.1), |g| g / 10u32);
            let shifted: Vec<Real> = roots
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    if i % 2 == 0 {
                        r.clone() + &offset
                    } else {
                        r.clone() - &offset
                    }
                })
                .collect();
            fmt(&shifted)
        }
    };

    let coefficients = match &expanded {
        PolyFamily::Algebraic(p) => OutCoefficients {
            a0: None,
            a: fmt(p.coefficients()),
            b: None,
        },
        PolyFamily::Trigonometric(p) => OutCoefficients {
            a0: Some(prec.format(p.a0())),
            a: fmt(p.cos_coeffs()),
            b: Some(fmt(p.sin_coeffs())),
        },
        PolyFamily::Exponential(p) => OutCoefficients {
            a0: Some(prec.format(p.a0())),
            a: fmt(p.ch_coeffs()),
            b: Some(fmt(p.sh_coeffs())),
        },
        PolyFamily::Factored(_) => unreachable!("expansion yields a coefficient form"),
    };
    let out = OutProblem {
        label: &spec.label,
        family: spec.family,
        representation: Representation::Coefficients,
        precision_bits: prec.bits(),
        multiplicities: &spec.multiplicities,
        initial,
        truth: spec.roots.iter().map(|s| s.trim().to_string()).collect(),
        coefficients,
        settings: spec
            .error_target
            .clone()
            .map(|error_target| OutSettings { error_target }),
        theorems: spec.theorems,
    };
    toml::to_string(&out).map_err(|e| CliError::Numeric(e.to_string()))
}
