//! Built-in problems: the three named examples shipped with the CLI plus the
//! free half-line problem, each with its coefficient pair, closed-form
//! Weyl-Titchmarsh coefficients `M_+`/`M_-`, and spectral measures.
//!
//! Closed forms use the principal square root (`Re sqrt >= 0`, cut on the
//! negative real axis), under which `sqrt(-lambda)` maps the upper half-plane
//! into the fourth quadrant.

use alloc::string::ToString;
use alloc::vec;

use num_complex::Complex64;

use crate::expr;
use crate::herglotz::{AcDensity, Atom, HerglotzFunction, SpectralMeasure};
use crate::weyl::{BoundaryCondition, HalfLineProblem, Side};

/// Principal branch of `sqrt(-lambda)`.
pub fn sqrt_neg(lambda: Complex64) -> Complex64 {
    (-lambda).sqrt()
}

/// A named built-in problem with its closed-form data.
#[derive(Debug, Clone)]
pub struct BuiltinProblem {
    pub name: &'static str,
    pub plus: HalfLineProblem,
    pub minus: HalfLineProblem,
    /// Closed-form `M_+(lambda)`.
    pub m_plus: HerglotzFunction,
    /// Closed-form `M_-(lambda)`.
    pub m_minus: HerglotzFunction,
    pub tau_plus: Option<SpectralMeasure>,
    pub tau_minus: Option<SpectralMeasure>,
}

pub const NAMES: [&str; 4] = ["free", "paper-sec5", "paper-sec6.1", "paper-sec6.2"];

pub fn by_name(name: &str) -> Option<BuiltinProblem> {
    match name {
        "free" => Some(free()),
        "paper-sec5" => Some(paper_sec5()),
        "paper-sec6.1" => Some(paper_sec61()),
        "paper-sec6.2" => Some(paper_sec62()),
        _ => None,
    }
}

fn problem(side: Side, weight: &str, potential: &str) -> HalfLineProblem {
    HalfLineProblem::new(
        side,
        expr::parse(weight, "x").expect("builtin weight parses"),
        expr::parse(potential, "x").expect("builtin potential parses"),
        BoundaryCondition::Neumann,
    )
    .expect("builtin problem is valid")
}

fn density(text: &str, lo: Option<f64>, hi: Option<f64>, tail: f64) -> AcDensity {
    AcDensity {
        rho: expr::parse(text, "s").expect("builtin density parses"),
        lo,
        hi,
        tail_exponent: Some(tail),
    }
}

fn measure(atoms: vec::Vec<Atom>, dens: Option<AcDensity>) -> SpectralMeasure {
    SpectralMeasure::new(atoms, dens).expect("builtin measure is valid")
}

/// Spectral function of the free Neumann half-line problem:
/// density `1/(pi sqrt(s))` on `(0, inf)`, no atoms.
pub fn tau_free() -> SpectralMeasure {
    measure(
        vec![],
        Some(density("1/(pi*sqrt(s))", Some(0.0), None, -0.5)),
    )
}

/// `q = 0`, `|r| = 1` on both half-lines: `m(lambda) = 1/sqrt(-lambda)`.
pub fn free() -> BuiltinProblem {
    BuiltinProblem {
        name: "free",
        plus: problem(Side::Plus, "1", "0"),
        minus: problem(Side::Minus, "1", "0"),
        m_plus: HerglotzFunction::closed_form(|l| Ok(1.0 / sqrt_neg(l)), "1/sqrt(-lambda)"),
        m_minus: HerglotzFunction::closed_form(|l| Ok(-1.0 / l.sqrt()), "-1/sqrt(lambda)"),
        tau_plus: Some(tau_free()),
        tau_minus: Some(measure(
            vec![],
            Some(density("1/(pi*sqrt(-s))", None, Some(0.0), -0.5)),
        )),
    }
}

/// Zero potential with the integrable weight `(3|x|+1)^(-4/3)`:
/// `M_+ = -1/lambda + 1/sqrt(-lambda)`, `M_- = -1/lambda - 1/sqrt(lambda)`.
pub fn paper_sec5() -> BuiltinProblem {
    let w = "(3*abs(x)+1)^(-4/3)";
    BuiltinProblem {
        name: "paper-sec5",
        plus: problem(Side::Plus, w, "0"),
        minus: problem(Side::Minus, w, "0"),
        m_plus: HerglotzFunction::closed_form(
            |l| Ok(-1.0 / l + 1.0 / sqrt_neg(l)),
            "-1/lambda + 1/sqrt(-lambda)",
        ),
        m_minus: HerglotzFunction::closed_form(
            |l| Ok(-1.0 / l - 1.0 / l.sqrt()),
            "-1/lambda - 1/sqrt(lambda)",
        ),
        tau_plus: Some(measure(
            vec![Atom {
                location: 0.0,
                weight: 1.0,
            }],
            Some(density("1/(pi*sqrt(s))", Some(0.0), None, -0.5)),
        )),
        tau_minus: Some(measure(
            vec![Atom {
                location: 0.0,
                weight: 1.0,
            }],
            Some(density("1/(pi*sqrt(-s))", None, Some(0.0), -0.5)),
        )),
    }
}

/// Unit weight with the decaying even potential `6(x^4-6|x|)/(|x|^3+3)^2`:
/// `M_+ = lambda/(1 + lambda sqrt(-lambda))`, `M_-(lambda) = -M_+(-lambda)`.
pub fn paper_sec61() -> BuiltinProblem {
    let q = "6*(x^4-6*abs(x))/((abs(x)^3+3)^2)";
    let m0 = |l: Complex64| l / (1.0 + l * sqrt_neg(l));
    BuiltinProblem {
        name: "paper-sec6.1",
        plus: problem(Side::Plus, "1", q),
        minus: problem(Side::Minus, "1", q),
        m_plus: HerglotzFunction::closed_form(
            move |l| Ok(m0(l)),
            "lambda/(1 + lambda sqrt(-lambda))",
        ),
        m_minus: HerglotzFunction::closed_form(
            move |l| Ok(-m0(-l)),
            "lambda/(1 - lambda sqrt(lambda))",
        ),
        tau_plus: Some(measure(
            vec![Atom {
                location: -1.0,
                weight: 2.0 / 3.0,
            }],
            Some(density("s^2.5/(pi*(1+s^3))", Some(0.0), None, -0.5)),
        )),
        tau_minus: Some(measure(
            vec![Atom {
                location: 1.0,
                weight: 2.0 / 3.0,
            }],
            Some(density("(-s)^2.5/(pi*(1+(-s)^3))", None, Some(0.0), -0.5)),
        )),
    }
}

/// The Dirichlet-type counterpart of [`paper_sec61`]'s `M_+`:
/// `-1/M_+ = -1/lambda - sqrt(-lambda)`.
pub fn sec61_dirichlet_m() -> HerglotzFunction {
    HerglotzFunction::closed_form(|l| Ok(-1.0 / l - sqrt_neg(l)), "-1/lambda - sqrt(-lambda)")
}

/// Spectral function whose Stieltjes transform is
/// `-1/lambda + 1/sqrt(-lambda) - 1/(-lambda + sqrt(-lambda))`:
/// atom of mass 1 at 0 plus density `sqrt(s)/(pi(1+s))` on `(0, inf)`.
pub fn tau_arctan() -> SpectralMeasure {
    measure(
        vec![Atom {
            location: 0.0,
            weight: 1.0,
        }],
        Some(density("sqrt(s)/(pi*(1+s))", Some(0.0), None, -0.5)),
    )
}

/// Closed form of the `m`-coefficient attached to [`tau_arctan`].
pub fn m_arctan(lambda: Complex64) -> Complex64 {
    let root = sqrt_neg(lambda);
    -1.0 / lambda + 1.0 / root - 1.0 / (-lambda + root)
}

/// Sign-weight problem whose even potential is recovered from
/// [`tau_arctan`] by the Gelfand-Levitan step; its Neumann m-coefficient is
/// [`m_arctan`]. The potential below is the closed form of that
/// reconstruction, `6((|x|+1)^4 - 4(|x|+1))/(((|x|+1)^3+2)^2)`.
pub fn paper_sec62() -> BuiltinProblem {
    let q = "6*((abs(x)+1)^4-4*(abs(x)+1))/(((abs(x)+1)^3+2)^2)";
    BuiltinProblem {
        name: "paper-sec6.2",
        plus: problem(Side::Plus, "1", q),
        minus: problem(Side::Minus, "1", q),
        m_plus: HerglotzFunction::closed_form(|l| Ok(m_arctan(l)), "m with arctan tau"),
        m_minus: HerglotzFunction::closed_form(|l| Ok(-m_arctan(-l)), "reflected m"),
        tau_plus: Some(tau_arctan()),
        tau_minus: None,
    }
}

/// Measure-backed variants of the closed forms, used to cross-check the
/// Stieltjes transform against the analytic expressions.
pub fn measure_backed(name: &str) -> Option<HerglotzFunction> {
    let b = by_name(name)?;
    b.tau_plus
        .map(|mu| HerglotzFunction::from_measure(mu, Some(format_label(name))))
}

fn format_label(name: &str) -> alloc::string::String {
    let mut s = name.to_string();
    s.push_str(" (measure)");
    s
}
