//! JSON problem-file schema and conversions into core types.
//!
//! Unknown keys are rejected everywhere so that a typo in a problem file
//! fails loudly instead of silently running defaults.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use sl_lab_core::expr::{self, Expr};
use sl_lab_core::herglotz::{AcDensity, Atom, HerglotzFunction, SpectralMeasure};
use sl_lab_core::krein::MassDistribution;
use sl_lab_core::weyl::{BoundaryCondition, HalfLineProblem, Side};
use sl_lab_core::Complex64;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    /// Start from a built-in problem and override sections below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub problems: BTreeMap<String, ProblemPairSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form_m: Option<ClosedFormSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kernels: BTreeMap<String, KernelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub strings: BTreeMap<String, StringSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemPairSpec {
    pub plus: HalfLineSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<HalfLineSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfLineSpec {
    pub side: String,
    pub weight_expr: String,
    pub potential_expr: String,
    pub bc: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub s: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub expr: String,
    /// `[a, b]`; either end may be null for an infinite side.
    pub interval: (Option<f64>, Option<f64>),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormSpec {
    pub plus: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub rank: usize,
    pub a_exprs: Vec<String>,
    pub b_exprs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<(f64, f64)>>,
    /// Null for a half-line string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_expr: Option<String>,
}

/// Default parameters for the subcommands; flags override these.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_decades: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_decade: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    /// `[re_lo, re_hi, im_lo, im_hi]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxed: Option<(f64, f64, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string: Option<String>,
}

impl ProblemFile {
    /// Load from a path, or resolve a built-in name directly.
    pub fn load(name_or_path: &str) -> Result<ProblemFile> {
        if sl_lab_core::builtin::by_name(name_or_path).is_some() {
            return builtin_file(name_or_path);
        }
        let text = std::fs::read_to_string(name_or_path)
            .with_context(|| format!("cannot read problem file {}", name_or_path))?;
        let mut file: ProblemFile = serde_json::from_str(&text)
            .with_context(|| format!("schema error in {}", name_or_path))?;
        if let Some(builtin_name) = file.builtin.clone() {
            let base = builtin_file(&builtin_name)?;
            file = merge(base, file);
        }
        Ok(file)
    }

    pub fn problem_pair(&self) -> Result<(HalfLineProblem, Option<HalfLineProblem>)> {
        let (_, spec) = self
            .problems
            .iter()
            .next()
            .ok_or_else(|| anyhow!("problem file has no problems section"))?;
        if self.problems.len() > 1 {
            bail!("multiple problems defined; exactly one pair is expected");
        }
        let plus = spec.plus.to_problem()?;
        let minus = spec.minus.as_ref().map(|m| m.to_problem()).transpose()?;
        Ok((plus, minus))
    }

    pub fn measure(&self, name: &str) -> Result<SpectralMeasure> {
        let spec = self
            .measures
            .get(name)
            .ok_or_else(|| anyhow!("measure '{}' not found in problem file", name))?;
        spec.to_measure()
    }

    pub fn string(&self, name: &str) -> Result<MassDistribution> {
        let spec = self
            .strings
            .get(name)
            .ok_or_else(|| anyhow!("string '{}' not found in problem file", name))?;
        spec.to_mass_distribution()
    }

    pub fn run(&self) -> RunSpec {
        self.run.clone().unwrap_or_default()
    }

    /// The `(M_+, M_-)` pair: closed forms when present, otherwise
    /// ODE-backed from the problem pair.
    pub fn m_pair(&self, tol: f64) -> Result<(HerglotzFunction, HerglotzFunction)> {
        if let Some(cf) = &self.closed_form_m {
            let plus = parse_lambda_expr(&cf.plus)?;
            let minus_text = cf
                .minus
                .as_ref()
                .ok_or_else(|| anyhow!("closed_form_m.minus missing"))?;
            let minus = parse_lambda_expr(minus_text)?;
            return Ok((
                HerglotzFunction::from_lambda_expr(plus, Some(cf.plus.clone())),
                HerglotzFunction::from_lambda_expr(minus, Some(minus_text.clone())),
            ));
        }
        let (plus, minus) = self.problem_pair()?;
        let minus = minus.ok_or_else(|| anyhow!("minus half-line problem missing"))?;
        // M_-(lambda) = -m_-(-lambda), composed around the ODE backend
        let minus_m = HerglotzFunction::ode_backed(minus, tol);
        let reflected = HerglotzFunction::closed_form(
            move |lambda| Ok(-(minus_m.eval(-lambda)?)),
            "-m_-(-lambda) [ode]",
        );
        Ok((HerglotzFunction::ode_backed(plus, tol), reflected))
    }
}

fn merge(base: ProblemFile, over: ProblemFile) -> ProblemFile {
    let mut out = base;
    if !over.problems.is_empty() {
        out.problems = over.problems;
    }
    for (k, v) in over.measures {
        out.measures.insert(k, v);
    }
    if over.closed_form_m.is_some() {
        out.closed_form_m = over.closed_form_m;
    }
    for (k, v) in over.kernels {
        out.kernels.insert(k, v);
    }
    for (k, v) in over.strings {
        out.strings.insert(k, v);
    }
    if over.run.is_some() {
        out.run = over.run;
    }
    out.builtin = None;
    out
}

impl HalfLineSpec {
    pub fn to_problem(&self) -> Result<HalfLineProblem> {
        let side = match self.side.as_str() {
            "+" | "plus" => Side::Plus,
            "-" | "minus" => Side::Minus,
            other => bail!("side must be '+' or '-', got '{}'", other),
        };
        let bc = match self.bc.to_ascii_lowercase().as_str() {
            "neumann" => BoundaryCondition::Neumann,
            "dirichlet" => BoundaryCondition::Dirichlet,
            other => bail!("bc must be 'neumann' or 'dirichlet', got '{}'", other),
        };
        let weight =
            expr::parse(&self.weight_expr, "x").map_err(|e| anyhow!("weight_expr: {}", e))?;
        let potential =
            expr::parse(&self.potential_expr, "x").map_err(|e| anyhow!("potential_expr: {}", e))?;
        HalfLineProblem::new(side, weight, potential, bc).map_err(|e| anyhow!("{}", e))
    }
}

impl MeasureSpec {
    pub fn to_measure(&self) -> Result<SpectralMeasure> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.s,
                weight: a.w,
            })
            .collect();
        let density = self
            .density
            .as_ref()
            .map(|d| -> Result<AcDensity> {
                Ok(AcDensity {
                    rho: expr::parse(&d.expr, "s").map_err(|e| anyhow!("density expr: {}", e))?,
                    lo: d.interval.0,
                    hi: d.interval.1,
                    tail_exponent: d.tail_exponent,
                })
            })
            .transpose()?;
        SpectralMeasure::new(atoms, density).map_err(|e| anyhow!("{}", e))
    }
}

impl StringSpec {
    pub fn to_mass_distribution(&self) -> Result<MassDistribution> {
        let length = self.length.unwrap_or(f64::INFINITY);
        match (&self.mass_expr, &self.samples) {
            (Some(text), None) => {
                let mass = expr::parse(text, "x").map_err(|e| anyhow!("mass_expr: {}", e))?;
                let density = self
                    .density_expr
                    .as_ref()
                    .map(|t| expr::parse(t, "x").map_err(|e| anyhow!("density_expr: {}", e)))
                    .transpose()?;
                MassDistribution::from_expr(mass, length, density).map_err(|e| anyhow!("{}", e))
            }
            (None, Some(samples)) => {
                MassDistribution::from_samples(samples.clone()).map_err(|e| anyhow!("{}", e))
            }
            _ => bail!("string needs exactly one of mass_expr or samples"),
        }
    }
}

impl KernelSpec {
    pub fn to_kernel(&self) -> Result<sl_lab_core::glevitan::SeparableKernel> {
        if self.a_exprs.len() != self.rank || self.b_exprs.len() != self.rank {
            bail!(
                "kernel rank {} does not match coefficient counts",
                self.rank
            );
        }
        let a = self
            .a_exprs
            .iter()
            .map(|t| expr::parse(t, "x").map_err(|e| anyhow!("a_exprs: {}", e)))
            .collect::<Result<Vec<Expr>>>()?;
        let b = self
            .b_exprs
            .iter()
            .map(|t| expr::parse(t, "y").map_err(|e| anyhow!("b_exprs: {}", e)))
            .collect::<Result<Vec<Expr>>>()?;
        Ok(sl_lab_core::glevitan::SeparableKernel::new(
            a,
            b,
            sl_lab_core::glevitan::Provenance::ClosedForm,
        ))
    }
}

pub fn parse_lambda_expr(text: &str) -> Result<Expr> {
    expr::parse(text, "lambda").map_err(|e| anyhow!("lambda expression: {}", e))
}

/// `"a+bi"`, `"bi"`, or `"a"`; also accepts `i` suffix forms like `0.5i`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let t = text.trim().replace(' ', "");
    if !t.ends_with('i') {
        let re: f64 = t.parse().map_err(|_| anyhow!("bad number '{}'", text))?;
        return Ok(Complex64::new(re, 0.0));
    }
    let body = &t[..t.len() - 1];
    // split the imaginary coefficient from an optional real part
    for split in (1..body.len()).rev() {
        let (head, tail) = body.split_at(split);
        if (tail.starts_with('+') || tail.starts_with('-'))
            && !head.ends_with('e')
            && !head.ends_with('E')
        {
            let re: f64 = head
                .parse()
                .map_err(|_| anyhow!("bad real part '{}'", text))?;
            let im: f64 = match tail {
                "+" => 1.0,
                "-" => -1.0,
                other => other
                    .parse()
                    .map_err(|_| anyhow!("bad imaginary part '{}'", text))?,
            };
            return Ok(Complex64::new(re, im));
        }
    }
    let im: f64 = match body {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other
            .parse()
            .map_err(|_| anyhow!("bad imaginary part '{}'", text))?,
    };
    Ok(Complex64::new(0.0, im))
}

/// Canned problem files for the built-in names.
pub fn builtin_file(name: &str) -> Result<ProblemFile> {
    let b = sl_lab_core::builtin::by_name(name)
        .ok_or_else(|| anyhow!("unknown builtin problem '{}'", name))?;
    let (weight, potential, closed) = match name {
        "free" => ("1", "0", ("1/sqrt(-lambda)", "-1/sqrt(lambda)")),
        "paper-sec5" => (
            "(3*abs(x)+1)^(-4/3)",
            "0",
            ("-1/lambda + 1/sqrt(-lambda)", "-1/lambda - 1/sqrt(lambda)"),
        ),
        "paper-sec6.1" => (
            "1",
            "6*(x^4-6*abs(x))/((abs(x)^3+3)^2)",
            (
                "lambda/(1+lambda*sqrt(-lambda))",
                "lambda/(1-lambda*sqrt(lambda))",
            ),
        ),
        "paper-sec6.2" => (
            "1",
            "6*((abs(x)+1)^4-4*(abs(x)+1))/(((abs(x)+1)^3+2)^2)",
            (
                "-1/lambda + 1/sqrt(-lambda) - 1/(-lambda+sqrt(-lambda))",
                "-1/lambda - 1/sqrt(lambda) + 1/(lambda+sqrt(lambda))",
            ),
        ),
        _ => bail!("unknown builtin '{}'", name),
    };
    let mut file = ProblemFile {
        builtin: None,
        ..Default::default()
    };
    file.problems.insert(
        "main".to_string(),
        ProblemPairSpec {
            plus: HalfLineSpec {
                side: "+".into(),
                weight_expr: weight.into(),
                potential_expr: potential.into(),
                bc: "neumann".into(),
            },
            minus: Some(HalfLineSpec {
                side: "-".into(),
                weight_expr: weight.into(),
                potential_expr: potential.into(),
                bc: "neumann".into(),
            }),
        },
    );
    file.closed_form_m = Some(ClosedFormSpec {
        plus: closed.0.into(),
        minus: Some(closed.1.into()),
    });
    let to_spec = |mu: &SpectralMeasure| MeasureSpec {
        atoms: mu
            .atoms()
            .iter()
            .map(|a| AtomSpec {
                s: a.location,
                w: a.weight,
            })
            .collect(),
        density: mu.density().map(|d| DensitySpec {
            expr: expr::print_with_var(&d.rho, "s"),
            interval: (d.lo, d.hi),
            tail_exponent: d.tail_exponent,
        }),
    };
    if let Some(tau) = &b.tau_plus {
        file.measures.insert("tau_plus".to_string(), to_spec(tau));
    }
    if let Some(tau) = &b.tau_minus {
        file.measures.insert("tau_minus".to_string(), to_spec(tau));
    }
    file.measures.insert(
        "tau_free".to_string(),
        to_spec(&sl_lab_core::builtin::tau_free()),
    );
    file.strings.insert(
        "lebesgue".to_string(),
        StringSpec {
            mass_expr: Some("x".into()),
            samples: None,
            length: None,
            density_expr: Some("1".into()),
        },
    );
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("0.01i").unwrap(), Complex64::new(0.0, 0.01));
        assert_eq!(parse_complex("1+1i").unwrap(), Complex64::new(1.0, 1.0));
        assert_eq!(parse_complex("-2+0.5i").unwrap(), Complex64::new(-2.0, 0.5));
        assert_eq!(parse_complex("3-i").unwrap(), Complex64::new(3.0, -1.0));
        assert_eq!(parse_complex("2.5").unwrap(), Complex64::new(2.5, 0.0));
        assert_eq!(parse_complex("1e-2i").unwrap(), Complex64::new(0.0, 0.01));
        assert!(parse_complex("wat").is_err());
    }

    #[test]
    fn builtin_closed_forms_match_native() {
        for name in sl_lab_core::builtin::NAMES {
            let file = builtin_file(name).unwrap();
            let b = sl_lab_core::builtin::by_name(name).unwrap();
            let (mp, mm) = file.m_pair(1e-8).unwrap();
            for lam in [Complex64::new(0.3, 0.8), Complex64::new(-1.0, 0.25)] {
                let a = mp.eval(lam).unwrap();
                let e = b.m_plus.eval(lam).unwrap();
                assert!(
                    (a - e).norm() < 1e-12,
                    "{} plus at {}: {} vs {}",
                    name,
                    lam,
                    a,
                    e
                );
                let a = mm.eval(lam).unwrap();
                let e = b.m_minus.eval(lam).unwrap();
                assert!(
                    (a - e).norm() < 1e-12,
                    "{} minus at {}: {} vs {}",
                    name,
                    lam,
                    a,
                    e
                );
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"problems": {}, "nonsense": 1}"#;
        assert!(serde_json::from_str::<ProblemFile>(bad).is_err());
    }
}
