//! Spectral measures and Herglotz ((R)-class) functions.
//!
//! A [`SpectralMeasure`] is a sum of point masses and an absolutely
//! continuous density on an interval. Its Stieltjes transform
//! `\int d\tau(s)/(s - \lambda)` is a Herglotz function; [`HerglotzFunction`]
//! also wraps closed-form evaluators, expression-backed evaluators in
//! `lambda`, and ODE-backed m-coefficients. The module provides the Stieltjes
//! inversion back to the spectral function and the moment integrals
//! `\int d\tau(s)/(s-\lambda_0)^p` with a numeric divergence verdict.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::expr::{self, Expr};
use crate::quad::{self, QuadError};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Rejected measure at construction time.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureError {
    NonPositiveAtomWeight {
        location: f64,
        weight: f64,
    },
    NegativeDensity {
        at: f64,
        value: f64,
    },
    DensityEval(expr::DomainError),
    /// `\int d\tau/(1+|s|)` diverges (tail too heavy for the class).
    NormalizationDivergent {
        tail_exponent: Option<f64>,
    },
    BadInterval,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::NonPositiveAtomWeight { location, weight } => {
                write!(f, "atom at {} has non-positive weight {}", location, weight)
            }
            MeasureError::NegativeDensity { at, value } => {
                write!(f, "density negative at s={} (value {})", at, value)
            }
            MeasureError::DensityEval(e) => write!(f, "density evaluation failed: {}", e),
            MeasureError::NormalizationDivergent { tail_exponent } => write!(
                f,
                "measure fails the \\int d tau/(1+|s|) < inf normalization (tail exponent {:?})",
                tail_exponent
            ),
            MeasureError::BadInterval => write!(f, "density interval is empty or inverted"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MeasureError {}

/// Runtime failure of a Herglotz-function operation.
#[derive(Debug, Clone, PartialEq)]
pub enum HerglotzError {
    Quadrature(QuadError),
    DensityEval(expr::DomainError),
    LambdaEval {
        detail: String,
    },
    /// The requested point sits on an atom of the measure.
    AtomAtLambda0 {
        location: f64,
    },
    /// Real evaluation point inside the continuous support.
    PoleOnSupport {
        lambda: f64,
    },
    NonRealRequired,
    /// `-1/M` requested at a zero of `M`.
    ZeroValue {
        lambda: Complex64,
    },
    /// Stieltjes inversion came out non-monotone beyond tolerance.
    NonMonotone {
        max_drop: f64,
    },
    BadSchedule,
    BadGrid,
    Ode(Box<crate::weyl::SlodeError>),
}

impl fmt::Display for HerglotzError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HerglotzError::Quadrature(e) => write!(f, "{}", e),
            HerglotzError::DensityEval(e) => write!(f, "density evaluation failed: {}", e),
            HerglotzError::LambdaEval { detail } => {
                write!(f, "closed-form evaluation failed: {}", detail)
            }
            HerglotzError::AtomAtLambda0 { location } => {
                write!(f, "atom at lambda0={}", location)
            }
            HerglotzError::PoleOnSupport { lambda } => {
                write!(f, "real lambda={} touches the continuous support", lambda)
            }
            HerglotzError::NonRealRequired => write!(f, "non-real lambda required"),
            HerglotzError::ZeroValue { lambda } => {
                write!(f, "function vanishes at lambda={}", lambda)
            }
            HerglotzError::NonMonotone { max_drop } => write!(
                f,
                "inverted spectral function non-monotone (max drop {:e}); refine the eps schedule",
                max_drop
            ),
            HerglotzError::BadSchedule => write!(f, "eps schedule must be positive and decreasing"),
            HerglotzError::BadGrid => write!(f, "grid must avoid the real axis"),
            HerglotzError::Ode(e) => write!(f, "ode-backed evaluation failed: {}", e),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for HerglotzError {}

impl From<QuadError> for HerglotzError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Integrand(d) => HerglotzError::DensityEval(d),
            other => HerglotzError::Quadrature(other),
        }
    }
}

// ---------------------------------------------------------------------------
// Spectral measures
// ---------------------------------------------------------------------------

/// A point mass `weight * delta_{location}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Absolutely continuous part: density `rho(s)` on `[lo, hi]`, either bound
/// may be infinite (`None`). `tail_exponent` is an optional power-law hint
/// `rho ~ C s^beta` used to pick the tail substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct AcDensity {
    pub rho: Expr,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tail_exponent: Option<f64>,
}

/// Normalization conventions carried by the measure: the spectral function is
/// taken with `tau(0) = 0` and left-continuous; atoms are stored explicitly
/// rather than folded into cumulative values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub tau_zero_at_origin: bool,
    pub left_continuous: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            tau_zero_at_origin: true,
            left_continuous: true,
        }
    }
}

/// Point masses plus an optional absolutely continuous density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    density: Option<AcDensity>,
    pub normalization: Normalization,
}

const NORMALIZATION_TOL: f64 = 1e-6;

impl SpectralMeasure {
    /// Build and validate a measure: positive atom weights, nonnegative
    /// density on a sample grid, and a finite `\int d\tau/(1+|s|)`.
    pub fn new(atoms: Vec<Atom>, density: Option<AcDensity>) -> Result<Self, MeasureError> {
        for a in &atoms {
            if !(a.weight > 0.0) || !a.weight.is_finite() || !a.location.is_finite() {
                return Err(MeasureError::NonPositiveAtomWeight {
                    location: a.location,
                    weight: a.weight,
                });
            }
        }
        if let Some(d) = &density {
            if let (Some(lo), Some(hi)) = (d.lo, d.hi) {
                if !(lo < hi) {
                    return Err(MeasureError::BadInterval);
                }
            }
            // spot-check nonnegativity on a grid biased toward the edges
            for s in d.sample_points() {
                let v = expr::eval(&d.rho, s).map_err(MeasureError::DensityEval)?;
                if v < -1e-12 {
                    return Err(MeasureError::NegativeDensity { at: s, value: v });
                }
            }
            // normalization: the tail of rho/(1+|s|) must be integrable
            let beta = d.tail_exponent_estimate();
            if let Some(beta) = beta {
                if beta >= -0.02 {
                    return Err(MeasureError::NormalizationDivergent {
                        tail_exponent: Some(beta),
                    });
                }
            }
            let check = integrate_density(d, |s| 1.0 / (1.0 + s.abs()), -1.0, NORMALIZATION_TOL);
            match check {
                Ok(_) => {}
                Err(HerglotzError::DensityEval(e)) => {
                    return Err(MeasureError::DensityEval(e));
                }
                Err(_) => {
                    return Err(MeasureError::NormalizationDivergent {
                        tail_exponent: beta,
                    })
                }
            }
        }
        Ok(SpectralMeasure {
            atoms,
            density,
            normalization: Normalization::default(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&AcDensity> {
        self.density.as_ref()
    }

    fn atom_near(&self, s: f64) -> Option<&Atom> {
        let tol = 1e-12 * s.abs().max(1.0);
        self.atoms.iter().find(|a| (a.location - s).abs() <= tol)
    }

    /// Distance from a real point to the continuous support (0 when inside).
    fn distance_to_ac_support(&self, s: f64) -> f64 {
        match &self.density {
            None => f64::INFINITY,
            Some(d) => {
                let lo = d.lo.unwrap_or(f64::NEG_INFINITY);
                let hi = d.hi.unwrap_or(f64::INFINITY);
                if s < lo {
                    lo - s
                } else if s > hi {
                    s - hi
                } else {
                    0.0
                }
            }
        }
    }
}

impl AcDensity {
    fn sample_points(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) => {
                let n = 48;
                for i in 1..n {
                    pts.push(lo + (hi - lo) * i as f64 / n as f64);
                }
            }
            (Some(lo), None) => {
                let mut d = 1e-4;
                while d < 1e6 {
                    pts.push(lo + d);
                    d *= 4.0;
                }
            }
            (None, Some(hi)) => {
                let mut d = 1e-4;
                while d < 1e6 {
                    pts.push(hi - d);
                    d *= 4.0;
                }
            }
            (None, None) => {
                let mut d = 1e-4;
                while d < 1e6 {
                    pts.push(d);
                    pts.push(-d);
                    d *= 4.0;
                }
            }
        }
        pts
    }

    /// Tail exponent: hint when present, else a log-log fit on samples.
    fn tail_exponent_estimate(&self) -> Option<f64> {
        if let Some(beta) = self.tail_exponent {
            return Some(beta);
        }
        if self.lo.is_some() && self.hi.is_some() {
            return None; // compact support has no tail
        }
        let base = match (self.lo, self.hi) {
            (Some(lo), None) => lo.abs().max(1.0) * 16.0,
            (None, Some(hi)) => -(hi.abs().max(1.0) * 16.0),
            _ => 16.0,
        };
        let rho = &self.rho;
        let est = quad::probe_exponent(
            |s| expr::eval(rho, s).map_err(QuadError::Integrand),
            base,
            4.0,
            10,
        )
        .ok()??;
        if est.spread < 0.7 {
            Some(est.exponent)
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Density integration with edge and tail substitutions
// ---------------------------------------------------------------------------

fn eval_rho(rho: &Expr, s: f64) -> Result<f64, QuadError> {
    expr::eval(rho, s).map_err(QuadError::Integrand)
}

/// Power for the tail map `s = split + z^p` given the combined decay
/// exponent `d` of `rho * g`.
fn tail_power(d: f64) -> f64 {
    if d <= -1.5 {
        2.0
    } else if d < -1.02 {
        ((-1.0 / (d + 1.0)).ceil() + 1.0).max(2.0)
    } else {
        // borderline or divergent; give the quadrature its best shot
        8.0
    }
}

/// Integrate `rho(s) * g(s)` over the density support.
///
/// `g_tail_decay` is the decay exponent of `g` at infinity (e.g. -1 for the
/// real part of the Stieltjes kernel, -2 for its imaginary part); it is added
/// to the density's tail exponent to size the tail substitution. Finite edges
/// always get the `s = edge + k^2` substitution, which turns the power-law
/// edges appearing here (1/sqrt singularities and half-integer zeros) into
/// smooth integrands.
fn integrate_density(
    dens: &AcDensity,
    g: impl Fn(f64) -> f64,
    g_tail_decay: f64,
    abs_tol: f64,
) -> Result<f64, HerglotzError> {
    let rho = &dens.rho;
    let f = |s: f64| -> Result<f64, QuadError> {
        let v = eval_rho(rho, s)? * g(s);
        Ok(v)
    };
    let piece_tol = abs_tol / 4.0;
    let max_seg = 20_000;

    let value = match (dens.lo, dens.hi) {
        (Some(lo), Some(hi)) => {
            let mid = 0.5 * (lo + hi);
            let left = quad::adaptive(
                |k| {
                    let s = lo + k * k;
                    Ok(2.0 * k * f(s)?)
                },
                0.0,
                (mid - lo).sqrt(),
                piece_tol,
                0.0,
                max_seg,
            )?;
            let right = quad::adaptive(
                |k| {
                    let s = hi - k * k;
                    Ok(2.0 * k * f(s)?)
                },
                0.0,
                (hi - mid).sqrt(),
                piece_tol,
                0.0,
                max_seg,
            )?;
            left.value + right.value
        }
        (Some(lo), None) => integrate_half_line(
            &f,
            lo,
            dens.tail_exponent_estimate(),
            g_tail_decay,
            piece_tol,
        )?,
        (None, Some(hi)) => {
            let mirrored = |u: f64| -> Result<f64, QuadError> { f(-u) };
            integrate_half_line(
                &mirrored,
                -hi,
                dens.tail_exponent_estimate(),
                g_tail_decay,
                piece_tol,
            )?
        }
        (None, None) => {
            let up = integrate_half_line(
                &f,
                0.0,
                dens.tail_exponent_estimate(),
                g_tail_decay,
                piece_tol,
            )?;
            let mirrored = |u: f64| -> Result<f64, QuadError> { f(-u) };
            let down = integrate_half_line(
                &mirrored,
                0.0,
                dens.tail_exponent_estimate(),
                g_tail_decay,
                piece_tol,
            )?;
            up + down
        }
    };
    Ok(value)
}

/// `\int_a^\infty f` with a `k^2` edge map on `[a, split]` and a power map on
/// the tail.
fn integrate_half_line(
    f: &impl Fn(f64) -> Result<f64, QuadError>,
    a: f64,
    tail_exponent: Option<f64>,
    g_tail_decay: f64,
    piece_tol: f64,
) -> Result<f64, HerglotzError> {
    let split = a + (a.abs() * 4.0).max(4.0);
    let edge = quad::adaptive(
        |k| {
            let s = a + k * k;
            Ok(2.0 * k * f(s)?)
        },
        0.0,
        (split - a).sqrt(),
        piece_tol,
        0.0,
        20_000,
    )?;
    let d = tail_exponent.unwrap_or(-0.5) + g_tail_decay;
    let tail = quad::semi_infinite_power(|s| f(s), split, tail_power(d), piece_tol, 0.0, 20_000)?;
    Ok(edge.value + tail.value)
}

// ---------------------------------------------------------------------------
// Stieltjes transform
// ---------------------------------------------------------------------------

/// `\int d\tau(s)/(s - \lambda)`: atom sum plus adaptive quadrature of the
/// density with tail handling. Absolute error target 1e-10.
///
/// `lambda` may be non-real, or real at positive distance from the support
/// (the transform is still defined there).
pub fn stieltjes_transform(
    mu: &SpectralMeasure,
    lambda: Complex64,
) -> Result<Complex64, HerglotzError> {
    if lambda.im == 0.0
        && (mu.atom_near(lambda.re).is_some() || mu.distance_to_ac_support(lambda.re) <= 0.0)
    {
        return Err(HerglotzError::PoleOnSupport { lambda: lambda.re });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for a in &mu.atoms {
        total += a.weight / (Complex64::new(a.location, 0.0) - lambda);
    }
    if let Some(d) = &mu.density {
        let tol = 5e-11;
        let re = integrate_density(
            d,
            |s| {
                let dr = s - lambda.re;
                dr / (dr * dr + lambda.im * lambda.im)
            },
            -1.0,
            tol,
        )?;
        let im = if lambda.im == 0.0 {
            0.0
        } else {
            integrate_density(
                d,
                |s| {
                    let dr = s - lambda.re;
                    lambda.im / (dr * dr + lambda.im * lambda.im)
                },
                -2.0,
                tol,
            )?
        };
        total += Complex64::new(re, im);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Moment integrals
// ---------------------------------------------------------------------------

/// Outcome of a moment integral: a finite value or a divergence verdict with
/// the exponents that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Divergent {
        local_exponent: Option<f64>,
        tail_exponent: Option<f64>,
    },
}

impl MomentValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MomentValue::Finite(v) => Some(*v),
            MomentValue::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, MomentValue::Divergent { .. })
    }
}

/// `\int d\tau(s)/(s-\lambda_0)^p` (signed) or with `|s-\lambda_0|^p`
/// (unsigned), `p` in {1, 2, 4}.
///
/// Divergence is decided from the density's local power behavior near
/// `lambda0`, corroborated by integrals over nested shrinking windows when
/// the fitted exponent is borderline.
pub fn moment_integral(
    mu: &SpectralMeasure,
    lambda0: f64,
    power: u32,
    signed: bool,
) -> Result<MomentValue, HerglotzError> {
    assert!(
        power == 1 || power == 2 || power == 4,
        "power must be 1, 2, or 4"
    );
    if let Some(atom) = mu.atom_near(lambda0) {
        return Err(HerglotzError::AtomAtLambda0 {
            location: atom.location,
        });
    }
    let p = power as i32;
    let kernel = move |s: f64| -> f64 {
        let d = s - lambda0;
        if signed {
            d.powi(-p)
        } else {
            d.abs().powi(-p)
        }
    };

    let mut total = 0.0;
    for a in &mu.atoms {
        total += a.weight * kernel(a.location);
    }

    let Some(dens) = &mu.density else {
        return Ok(MomentValue::Finite(total));
    };

    let lo = dens.lo.unwrap_or(f64::NEG_INFINITY);
    let hi = dens.hi.unwrap_or(f64::INFINITY);

    // tail integrability
    if let Some(beta) = dens.tail_exponent_estimate() {
        if beta - power as f64 >= -1.0 {
            return Ok(MomentValue::Divergent {
                local_exponent: None,
                tail_exponent: Some(beta - power as f64),
            });
        }
    }

    let touches = lambda0 >= lo && lambda0 <= hi;
    if !touches {
        // smooth integrand over the whole support
        let v = integrate_density(dens, kernel, -(power as f64), 1e-9)?;
        return Ok(MomentValue::Finite(total + v));
    }

    // split the support at lambda0 and analyze each inner edge
    let mut value = 0.0;
    let rho = dens.rho.clone();
    for side in [MomentSide::Above, MomentSide::Below] {
        let (present, outer) = match side {
            MomentSide::Above => (hi > lambda0, hi),
            MomentSide::Below => (lo < lambda0, lo),
        };
        if !present {
            continue;
        }
        let width = (outer - lambda0).abs();
        let probe_scale = if outer.is_finite() {
            (width * 0.25).min(0.5)
        } else {
            0.5
        };
        let sgn = match side {
            MomentSide::Above => 1.0,
            MomentSide::Below => -1.0,
        };
        let rho_off =
            |delta: f64| -> Result<f64, QuadError> { eval_rho(&rho, lambda0 + sgn * delta) };
        let est =
            quad::probe_exponent(rho_off, probe_scale, 0.5, 16).map_err(HerglotzError::from)?;
        let local = est.map(|e| e.exponent - power as f64);
        if let Some(gamma) = local {
            if gamma <= -0.95
                && (gamma <= -1.05 || windowed_divergence(&rho_off, power, probe_scale)?)
            {
                return Ok(MomentValue::Divergent {
                    local_exponent: Some(gamma),
                    tail_exponent: None,
                });
            }
        }
        // near piece in the offset coordinate delta = |s - lambda0| = k^2,
        // which keeps full precision against the singular point
        let near_width = if outer.is_finite() {
            width.min(4.0 * probe_scale)
        } else {
            4.0 * probe_scale
        };
        let sign_factor = if signed && sgn < 0.0 && power % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        let near = quad::adaptive(
            |k| {
                let delta = k * k;
                Ok(2.0 * k * rho_off(delta)? * delta.powi(-p))
            },
            0.0,
            near_width.sqrt(),
            2.5e-10,
            0.0,
            20_000,
        )?;
        value += sign_factor * near.value;
        // far piece, where s - lambda0 no longer suffers absorption
        if !outer.is_finite() || width > near_width {
            let inner = AcDensity {
                rho: rho.clone(),
                lo: match side {
                    MomentSide::Above => Some(lambda0 + near_width),
                    MomentSide::Below => {
                        if outer.is_finite() {
                            Some(outer)
                        } else {
                            None
                        }
                    }
                },
                hi: match side {
                    MomentSide::Above => {
                        if outer.is_finite() {
                            Some(outer)
                        } else {
                            None
                        }
                    }
                    MomentSide::Below => Some(lambda0 - near_width),
                },
                tail_exponent: dens.tail_exponent,
            };
            value += integrate_density(&inner, kernel, -(power as f64), 1e-9)?;
        }
    }
    Ok(MomentValue::Finite(total + value))
}

#[derive(Clone, Copy)]
enum MomentSide {
    Above,
    Below,
}

/// Nested-window divergence check: integrals over `[h/2^{j+1}, h/2^j]` of
/// `rho/delta^p` approaching the singular point (in the offset coordinate).
/// Non-decaying increments with at least a tenfold total growth over three
/// refinements mean divergence.
fn windowed_divergence(
    rho_off: &impl Fn(f64) -> Result<f64, QuadError>,
    power: u32,
    h: f64,
) -> Result<bool, HerglotzError> {
    let p = power as i32;
    let mut increments = Vec::new();
    let mut hi = h;
    for _ in 0..20 {
        let lo = hi * 0.5;
        let inc = quad::adaptive(
            |d| Ok(rho_off(d)?.abs() * d.powi(-p)),
            lo,
            hi,
            1e-12,
            1e-6,
            4000,
        )?;
        increments.push(inc.value.abs());
        hi = lo;
    }
    let n = increments.len();
    let last3_nondecaying = (n - 3..n).all(|j| increments[j] >= 0.95 * increments[j - 1]);
    let total: f64 = increments.iter().sum();
    let grew = total > 10.0 * increments[0].max(1e-300);
    Ok(last3_nondecaying && grew)
}

// ---------------------------------------------------------------------------
// Herglotz functions
// ---------------------------------------------------------------------------

type ClosedFormFn = dyn Fn(Complex64) -> Result<Complex64, HerglotzError> + Send + Sync;

/// Evaluation backend for a Herglotz function.
#[derive(Clone)]
pub enum Backend {
    /// Arbitrary closed-form evaluator.
    ClosedForm(Arc<ClosedFormFn>),
    /// Expression in the variable `lambda`, evaluated with principal
    /// branches.
    LambdaExpr(Expr),
    /// Stieltjes transform of a measure.
    Stieltjes(SpectralMeasure),
    /// m-coefficient of a half-line problem computed on demand.
    OdeBacked {
        problem: crate::weyl::HalfLineProblem,
        tol: f64,
    },
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::ClosedForm(_) => write!(f, "ClosedForm(..)"),
            Backend::LambdaExpr(e) => {
                write!(f, "LambdaExpr({})", expr::print_with_var(e, "lambda"))
            }
            Backend::Stieltjes(_) => write!(f, "Stieltjes(..)"),
            Backend::OdeBacked { tol, .. } => write!(f, "OdeBacked {{ tol: {} }}", tol),
        }
    }
}

/// A function of class (R): holomorphic off the real axis, conjugate
/// symmetric, mapping each half-plane into its closure.
#[derive(Debug, Clone)]
pub struct HerglotzFunction {
    pub backend: Backend,
    pub label: Option<String>,
}

impl HerglotzFunction {
    pub fn closed_form(
        f: impl Fn(Complex64) -> Result<Complex64, HerglotzError> + Send + Sync + 'static,
        label: &str,
    ) -> Self {
        HerglotzFunction {
            backend: Backend::ClosedForm(Arc::new(f)),
            label: Some(label.to_string()),
        }
    }

    pub fn from_lambda_expr(e: Expr, label: Option<String>) -> Self {
        HerglotzFunction {
            backend: Backend::LambdaExpr(e),
            label,
        }
    }

    pub fn from_measure(mu: SpectralMeasure, label: Option<String>) -> Self {
        HerglotzFunction {
            backend: Backend::Stieltjes(mu),
            label,
        }
    }

    pub fn ode_backed(problem: crate::weyl::HalfLineProblem, tol: f64) -> Self {
        HerglotzFunction {
            backend: Backend::OdeBacked { problem, tol },
            label: None,
        }
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64, HerglotzError> {
        match &self.backend {
            Backend::ClosedForm(f) => f(lambda),
            Backend::LambdaExpr(e) => eval_lambda_expr(e, lambda),
            Backend::Stieltjes(mu) => stieltjes_transform(mu, lambda),
            Backend::OdeBacked { problem, tol } => {
                let m = crate::weyl::m_coefficient(problem, lambda, *tol)
                    .map_err(|e| HerglotzError::Ode(Box::new(e)))?;
                Ok(m.value)
            }
        }
    }
}

/// Evaluate an expression in `lambda` over the complex numbers with
/// principal branches (`sqrt` cut along the negative real axis with
/// `Re sqrt >= 0`, `log` the principal logarithm, powers via `exp(w log z)`).
pub fn eval_lambda_expr(e: &Expr, lambda: Complex64) -> Result<Complex64, HerglotzError> {
    use crate::expr::{BinOp, Func};
    let fail = |detail: String| HerglotzError::LambdaEval { detail };
    Ok(match e {
        Expr::Num(v) => Complex64::new(*v, 0.0),
        Expr::Var => lambda,
        Expr::Neg(inner) => -eval_lambda_expr(inner, lambda)?,
        Expr::Bin(op, a, b) => {
            let va = eval_lambda_expr(a, lambda)?;
            let vb = eval_lambda_expr(b, lambda)?;
            match op {
                BinOp::Add => va + vb,
                BinOp::Sub => va - vb,
                BinOp::Mul => va * vb,
                BinOp::Div => {
                    if vb == Complex64::new(0.0, 0.0) {
                        return Err(fail(format!(
                            "division by zero in `{}`",
                            expr::print_with_var(e, "lambda")
                        )));
                    }
                    va / vb
                }
                BinOp::Pow => {
                    if va == Complex64::new(0.0, 0.0) {
                        if vb.re > 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            return Err(fail(format!(
                                "zero base with non-positive exponent in `{}`",
                                expr::print_with_var(e, "lambda")
                            )));
                        }
                    } else {
                        va.powc(vb)
                    }
                }
            }
        }
        Expr::Call(func, arg) => {
            let v = eval_lambda_expr(arg, lambda)?;
            match func {
                Func::Sqrt => v.sqrt(),
                Func::Exp => v.exp(),
                Func::Log => {
                    if v == Complex64::new(0.0, 0.0) {
                        return Err(fail("log of zero".to_string()));
                    }
                    v.ln()
                }
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Cosh => v.cosh(),
                Func::Sinh => v.sinh(),
                Func::Atan => v.atan(),
                Func::Abs => Complex64::new(v.norm(), 0.0),
                Func::Sign => {
                    return Err(fail(
                        "sign is not defined for complex arguments".to_string(),
                    ))
                }
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Stieltjes inversion
// ---------------------------------------------------------------------------

/// Tabulated nondecreasing approximation of
/// `(tau(s+0)+tau(s-0))/2 - tau(s0)` produced by inversion.
#[derive(Debug, Clone)]
pub struct InvertedTau {
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    /// Largest monotonicity violation remaining after extrapolation.
    pub max_drop: f64,
    /// The pair of smoothing parameters combined by Richardson.
    pub eps_pair: (f64, f64),
}

/// Stieltjes inversion `(1/pi) \int_{s0}^{s} Im M(t + i eps) dt` with a
/// two-point Richardson extrapolation over the tail of `eps_schedule`
/// (strictly decreasing). Output beyond `mono_tol` non-monotone is an error
/// signalling an insufficient schedule.
pub fn stieltjes_invert(
    m: &HerglotzFunction,
    interval: (f64, f64),
    eps_schedule: &[f64],
    n_points: usize,
    mono_tol: f64,
) -> Result<InvertedTau, HerglotzError> {
    let (s0, s1) = interval;
    if !(s0 < s1) || n_points < 2 {
        return Err(HerglotzError::BadGrid);
    }
    if eps_schedule.is_empty() || eps_schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(HerglotzError::BadSchedule);
    }
    for w in eps_schedule.windows(2) {
        if w[1] >= w[0] {
            return Err(HerglotzError::BadSchedule);
        }
    }

    let grid: Vec<f64> = (0..n_points)
        .map(|i| s0 + (s1 - s0) * i as f64 / (n_points - 1) as f64)
        .collect();

    let smoothed = |eps: f64| -> Result<Vec<f64>, HerglotzError> {
        let mut cumulative = vec![0.0; n_points];
        let mut acc = 0.0;
        for i in 1..n_points {
            let mut failure: Option<HerglotzError> = None;
            let panel = quad::adaptive(
                |t| match m.eval(Complex64::new(t, eps)) {
                    Ok(v) => Ok(v.im),
                    Err(e) => {
                        failure = Some(e);
                        Err(QuadError::NonFinite { at: t })
                    }
                },
                grid[i - 1],
                grid[i],
                1e-9,
                1e-9,
                4000,
            );
            let panel = match panel {
                Ok(p) => p,
                Err(qe) => return Err(failure.unwrap_or(HerglotzError::Quadrature(qe))),
            };
            acc += panel.value / core::f64::consts::PI;
            cumulative[i] = acc;
        }
        Ok(cumulative)
    };

    let tau = if eps_schedule.len() == 1 {
        smoothed(eps_schedule[0])?
    } else {
        let e1 = eps_schedule[eps_schedule.len() - 2];
        let e2 = eps_schedule[eps_schedule.len() - 1];
        let f1 = smoothed(e1)?;
        let f2 = smoothed(e2)?;
        // linear-in-eps extrapolation to eps -> 0
        f1.iter()
            .zip(&f2)
            .map(|(&a, &b)| (e1 * b - e2 * a) / (e1 - e2))
            .collect()
    };

    let mut max_drop: f64 = 0.0;
    for w in tau.windows(2) {
        max_drop = max_drop.max(w[0] - w[1]);
    }
    if max_drop > mono_tol {
        return Err(HerglotzError::NonMonotone { max_drop });
    }
    let eps_pair = if eps_schedule.len() == 1 {
        (eps_schedule[0], eps_schedule[0])
    } else {
        (
            eps_schedule[eps_schedule.len() - 2],
            eps_schedule[eps_schedule.len() - 1],
        )
    };
    Ok(InvertedTau {
        s: grid,
        tau,
        max_drop,
        eps_pair,
    })
}

// ---------------------------------------------------------------------------
// Class-(R) self check
// ---------------------------------------------------------------------------

/// Diagnostic outcome of [`herglotz_selfcheck`].
#[derive(Debug, Clone, Copy)]
pub struct SelfCheckReport {
    pub points_checked: usize,
    pub max_symmetry_violation: f64,
    pub max_sign_violation: f64,
}

/// Check conjugate symmetry and the half-plane sign condition on a grid of
/// non-real points.
pub fn herglotz_selfcheck(
    m: &HerglotzFunction,
    grid: &[Complex64],
) -> Result<SelfCheckReport, HerglotzError> {
    if grid.iter().any(|l| l.im == 0.0) {
        return Err(HerglotzError::BadGrid);
    }
    let mut max_sym: f64 = 0.0;
    let mut max_sign: f64 = 0.0;
    for &lambda in grid {
        let v = m.eval(lambda)?;
        let v_conj = m.eval(lambda.conj())?;
        max_sym = max_sym.max((v_conj - v.conj()).norm());
        let signed_im = lambda.im.signum() * v.im;
        if signed_im < 0.0 {
            max_sign = max_sign.max(-signed_im);
        }
    }
    Ok(SelfCheckReport {
        points_checked: grid.len(),
        max_symmetry_violation: max_sym,
        max_sign_violation: max_sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_mass_at_zero() -> SpectralMeasure {
        SpectralMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: 1.0,
            }],
            None,
        )
        .unwrap()
    }

    /// atom of mass 1 at 0 plus density 1/(pi sqrt(s)) on (0, inf)
    fn string_spectral_measure() -> SpectralMeasure {
        SpectralMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: 1.0,
            }],
            Some(AcDensity {
                rho: parse("1/(pi*sqrt(s))", "s").unwrap(),
                lo: Some(0.0),
                hi: None,
                tail_exponent: Some(-0.5),
            }),
        )
        .unwrap()
    }

    #[test]
    fn transform_single_pole() {
        let mu = unit_mass_at_zero();
        let v = stieltjes_transform(&mu, c(0.0, 1.0)).unwrap();
        // -1/i = i
        assert!((v - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn transform_string_measure_at_minus_one() {
        // m(-1) = -1/(-1) + 1/sqrt(1) = 2, evaluated at real lambda off support
        let mu = string_spectral_measure();
        let v = stieltjes_transform(&mu, c(-1.0, 0.0)).unwrap();
        assert!((v.re - 2.0).abs() < 1e-10, "re={}", v.re);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn transform_matches_closed_form_off_axis() {
        // m(lambda) = -1/lambda + 1/sqrt(-lambda)
        let mu = string_spectral_measure();
        for lambda in [c(0.0, 1.0), c(1.0, 1.0), c(-0.3, 0.2), c(2.0, -0.7)] {
            let v = stieltjes_transform(&mu, lambda).unwrap();
            let exact = -1.0 / lambda + 1.0 / (-lambda).sqrt();
            assert!(
                (v - exact).norm() < 1e-10,
                "lambda={} v={} exact={}",
                lambda,
                v,
                exact
            );
        }
    }

    #[test]
    fn transform_rejects_real_lambda_on_support() {
        let mu = string_spectral_measure();
        assert!(matches!(
            stieltjes_transform(&mu, c(2.0, 0.0)),
            Err(HerglotzError::PoleOnSupport { .. })
        ));
    }

    #[test]
    fn moment_atoms_only() {
        let mu = SpectralMeasure::new(
            vec![
                Atom {
                    location: 1.0,
                    weight: 2.0,
                },
                Atom {
                    location: -2.0,
                    weight: 1.0,
                },
            ],
            None,
        )
        .unwrap();
        // signed p=1 at 0: 2/1 + 1/(-2) = 1.5
        let v = moment_integral(&mu, 0.0, 1, true).unwrap();
        assert_eq!(v.finite().unwrap(), 1.5);
        // unsigned p=1 at 0: 2/1 + 1/2 = 2.5
        let v = moment_integral(&mu, 0.0, 1, false).unwrap();
        assert_eq!(v.finite().unwrap(), 2.5);
    }

    #[test]
    fn moment_atom_at_lambda0_rejected() {
        let mu = unit_mass_at_zero();
        assert!(matches!(
            moment_integral(&mu, 0.0, 2, false),
            Err(HerglotzError::AtomAtLambda0 { .. })
        ));
    }

    #[test]
    fn moment_disjoint_density_log_oracle() {
        // density 1 on [1,2]: \int_1^2 ds/s = log 2
        let mu = SpectralMeasure::new(
            vec![],
            Some(AcDensity {
                rho: parse("1", "s").unwrap(),
                lo: Some(1.0),
                hi: Some(2.0),
                tail_exponent: None,
            }),
        )
        .unwrap();
        let v = moment_integral(&mu, 0.0, 1, true)
            .unwrap()
            .finite()
            .unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-9, "v={}", v);
    }

    #[test]
    fn negative_atom_weight_rejected() {
        assert!(SpectralMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: -1.0
            }],
            None
        )
        .is_err());
    }

    #[test]
    fn heavy_tail_normalization_rejected() {
        // density sqrt(s)/pi: \int d tau/(1+s) diverges
        let res = SpectralMeasure::new(
            vec![],
            Some(AcDensity {
                rho: parse("sqrt(s)/pi", "s").unwrap(),
                lo: Some(0.0),
                hi: None,
                tail_exponent: None,
            }),
        );
        assert!(matches!(
            res,
            Err(MeasureError::NormalizationDivergent { .. })
        ));
    }

    #[test]
    fn invert_point_mass_step() {
        let m = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        let inv = stieltjes_invert(&m, (-1.0, 1.0), &[0.02, 0.01], 81, 0.05).unwrap();
        let at = |s: f64| {
            let idx = inv.s.iter().position(|&x| (x - s).abs() < 1e-9).unwrap();
            inv.tau[idx]
        };
        // step of height 1 at s=0 (relative to tau(-1))
        assert!(at(-0.5).abs() < 2e-2, "tau(-0.5)={}", at(-0.5));
        assert!((at(0.5) - 1.0).abs() < 2e-2, "tau(0.5)={}", at(0.5));
    }

    #[test]
    fn selfcheck_flags_anti_herglotz() {
        let good = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        let bad = HerglotzFunction::closed_form(|l| Ok(l.conj()), "conj");
        let grid: Vec<Complex64> = (1..50)
            .map(|i| c(0.1 * i as f64 - 2.0, if i % 2 == 0 { 0.7 } else { -0.9 }))
            .collect();
        let ok_report = herglotz_selfcheck(&good, &grid).unwrap();
        assert!(ok_report.max_symmetry_violation < 1e-14);
        assert!(ok_report.max_sign_violation < 1e-14);
        let bad_report = herglotz_selfcheck(&bad, &grid).unwrap();
        assert!(bad_report.max_sign_violation > 0.5);
    }

    #[test]
    fn identity_function_is_class_r() {
        let m = HerglotzFunction::closed_form(Ok, "lambda");
        let grid: Vec<Complex64> = (1..100)
            .map(|i| c((i % 13) as f64 - 6.0, 0.05 * i as f64))
            .collect();
        let report = herglotz_selfcheck(&m, &grid).unwrap();
        assert_eq!(report.max_symmetry_violation, 0.0);
        assert_eq!(report.max_sign_violation, 0.0);
    }

    #[test]
    fn lambda_expr_principal_branch() {
        let e = parse("sqrt(-lambda)", "lambda").unwrap();
        // lambda = i eps: sqrt(-i eps) = sqrt(eps) e^{-i pi/4}
        let v = eval_lambda_expr(&e, c(0.0, 0.01)).unwrap();
        let expected = Complex64::from_polar(0.1, -core::f64::consts::FRAC_PI_4);
        assert!((v - expected).norm() < 1e-15);
        assert!(v.re > 0.0);
    }

    #[test]
    fn signed_p1_equals_transform_boundary_limit() {
        // where the power-2 moment is finite, the signed power-1 moment is
        // the limit of the transform along lambda0 + i eps
        let mu = crate::builtin::paper_sec61().tau_plus.unwrap();
        for lambda0 in [0.0, -3.0] {
            let p1 = moment_integral(&mu, lambda0, 1, true)
                .unwrap()
                .finite()
                .unwrap();
            let eps1 = 1e-3;
            let eps2 = 5e-4;
            let f1 = stieltjes_transform(&mu, Complex64::new(lambda0, eps1))
                .unwrap()
                .re;
            let f2 = stieltjes_transform(&mu, Complex64::new(lambda0, eps2))
                .unwrap()
                .re;
            let extrapolated = (eps1 * f2 - eps2 * f1) / (eps1 - eps2);
            assert!(
                (p1 - extrapolated).abs() < 1e-6,
                "lambda0={} p1={} limit={}",
                lambda0,
                p1,
                extrapolated
            );
        }
    }

    #[test]
    fn invert_ac_density_against_direct_integral() {
        // M(lambda) = lambda/(1 + lambda sqrt(-lambda)) on [0.5, 5]:
        // the recovered increment equals the direct integral of the density
        let b = crate::builtin::paper_sec61();
        let inv = stieltjes_invert(&b.m_plus, (0.5, 5.0), &[0.04, 0.02], 46, 0.02).unwrap();
        let rho = parse("s^2.5/(pi*(1+s^3))", "s").unwrap();
        for (s, tau) in inv.s.iter().zip(&inv.tau).step_by(9) {
            let direct = crate::quad::adaptive(
                |t| expr::eval(&rho, t).map_err(QuadError::Integrand),
                0.5,
                *s,
                1e-10,
                0.0,
                2000,
            )
            .unwrap()
            .value;
            assert!(
                (tau - direct).abs() <= 1e-2,
                "s={} tau={} direct={}",
                s,
                tau,
                direct
            );
        }
    }

    #[test]
    fn values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<SpectralMeasure>();
        assert_send_sync::<HerglotzFunction>();
        assert_send_sync::<crate::weyl::HalfLineProblem>();
        assert_send_sync::<crate::krein::MassDistribution>();
        assert_send_sync::<crate::glevitan::SeparableKernel>();
        assert_send_sync::<crate::expr::Expr>();
    }

    #[test]
    fn non_monotone_inversion_flags_schedule() {
        // lambda^2 is not Herglotz: Im M(t+i eps) = 2 t eps changes sign,
        // so the smoothed spectral function decreases for t < 0
        let m = HerglotzFunction::closed_form(|l| Ok(l * l), "lambda^2");
        let res = stieltjes_invert(&m, (-1.0, 1.0), &[0.1], 21, 1e-3);
        assert!(matches!(res, Err(HerglotzError::NonMonotone { .. })));
    }

    #[test]
    fn moment_diverges_at_interior_point_of_support() {
        // density 1 on [1,2]: 1/|s - 1.5| is not integrable across 1.5
        let mu = SpectralMeasure::new(
            vec![],
            Some(AcDensity {
                rho: parse("1", "s").unwrap(),
                lo: Some(1.0),
                hi: Some(2.0),
                tail_exponent: None,
            }),
        )
        .unwrap();
        let v = moment_integral(&mu, 1.5, 1, false).unwrap();
        assert!(v.is_divergent(), "{:?}", v);
        // but integrable from outside the support
        let v = moment_integral(&mu, 0.0, 1, false).unwrap();
        assert!((v.finite().unwrap() - 2.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn lambda_expr_rejects_sign_and_zero_division() {
        let e = parse("sign(lambda)", "lambda").unwrap();
        assert!(matches!(
            eval_lambda_expr(&e, Complex64::new(0.0, 1.0)),
            Err(HerglotzError::LambdaEval { .. })
        ));
        let e = parse("1/(lambda-lambda)", "lambda").unwrap();
        assert!(matches!(
            eval_lambda_expr(&e, Complex64::new(0.0, 1.0)),
            Err(HerglotzError::LambdaEval { .. })
        ));
    }

    #[test]
    fn eps_schedule_must_decrease() {
        let m = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        assert!(matches!(
            stieltjes_invert(&m, (0.0, 1.0), &[0.01, 0.02], 11, 0.05),
            Err(HerglotzError::BadSchedule)
        ));
    }
}
