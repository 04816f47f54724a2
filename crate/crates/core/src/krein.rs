//! Krein strings: mass distributions and the spectral-shift transform.
//!
//! A string is a length (possibly infinite) together with a nondecreasing
//! mass function `M(x)` growing at `x = 0`. Adding a constant `c > 0` to the
//! string's spectral function produces a new string whose mass distribution
//! is given parametrically by
//! `M*(x) = M(z)/(1 + c M(z))`, `x = \int_0^z (1 + c M(u))^2 du`;
//! [`string_shift`] applies this rule by inverting the strictly increasing
//! map `x(z)` numerically.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::expr::{self, Expr};
use crate::quad::{self, QuadError};

#[derive(Debug, Clone, PartialEq)]
pub enum KreinError {
    Mass(expr::DomainError),
    Quadrature(QuadError),
    /// Mass function decreases between two sample points.
    NonMonotone {
        at: f64,
    },
    /// `x = 0` must be a point of growth.
    NoGrowthAtOrigin,
    /// Declared density disagrees with the mass increments.
    DensityMismatch {
        at: f64,
        expected: f64,
        got: f64,
    },
    /// Shift constants must satisfy `c >= 0` here (the shipped base strings
    /// have no spectral jump at the origin, so negative shifts are out of
    /// range; the caller asserts validity otherwise).
    InvalidShift {
        c: f64,
    },
    /// The parametric map `x(z)` could not be inverted.
    InversionFailed {
        x: f64,
    },
    BadSamples,
    /// One-sided derivatives disagree at this point.
    NonDifferentiable {
        at: f64,
        left: f64,
        right: f64,
    },
    OutOfRange {
        x: f64,
    },
}

impl fmt::Display for KreinError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KreinError::Mass(e) => write!(f, "mass evaluation failed: {}", e),
            KreinError::Quadrature(e) => write!(f, "{}", e),
            KreinError::NonMonotone { at } => write!(f, "mass function decreases near x={}", at),
            KreinError::NoGrowthAtOrigin => write!(f, "x=0 is not a point of growth"),
            KreinError::DensityMismatch { at, expected, got } => write!(
                f,
                "density inconsistent with mass at x={}: integral {} vs increment {}",
                at, expected, got
            ),
            KreinError::InvalidShift { c } => write!(f, "shift constant {} out of range", c),
            KreinError::InversionFailed { x } => {
                write!(f, "parametric inversion failed at x={}", x)
            }
            KreinError::BadSamples => write!(f, "samples must be sorted with nondecreasing mass"),
            KreinError::NonDifferentiable { at, left, right } => write!(
                f,
                "one-sided slopes disagree at x={}: {} vs {}",
                at, left, right
            ),
            KreinError::OutOfRange { x } => write!(f, "x={} outside the string length", x),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KreinError {}

impl From<QuadError> for KreinError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Integrand(d) => KreinError::Mass(d),
            other => KreinError::Quadrature(other),
        }
    }
}

/// Representation of the mass function.
#[derive(Debug, Clone, PartialEq)]
pub enum MassRepr {
    /// Closed form in `x`.
    Expr(Expr),
    /// Monotone samples `(x, M(x))`, interpolated linearly.
    Samples(Vec<(f64, f64)>),
    /// Result of [`string_shift`], evaluated by inverting the parametric map
    /// on demand (exact to the inversion tolerance).
    Shifted { base: Box<MassDistribution>, c: f64 },
}

/// A Krein string: length and mass distribution, with an optional closed-form
/// density `dM/dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassDistribution {
    pub repr: MassRepr,
    /// Length of the string; `f64::INFINITY` for the half-line.
    pub length: f64,
    density: Option<Expr>,
}

const INVERSION_TOL: f64 = 1e-12;

impl MassDistribution {
    /// Closed-form mass function; checks monotonicity, growth at the origin,
    /// and (when a density is declared) `M(x) - M(0) = \int_0^x dM` on a test
    /// grid.
    pub fn from_expr(mass: Expr, length: f64, density: Option<Expr>) -> Result<Self, KreinError> {
        let md = MassDistribution {
            repr: MassRepr::Expr(mass),
            length,
            density,
        };
        md.validate()?;
        Ok(md)
    }

    /// Tabulated monotone mass samples starting at `x = 0`.
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self, KreinError> {
        if samples.len() < 2 || samples[0].0 != 0.0 {
            return Err(KreinError::BadSamples);
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(KreinError::BadSamples);
            }
        }
        if samples.last().unwrap().1 <= samples[0].1 {
            return Err(KreinError::NoGrowthAtOrigin);
        }
        let length = samples.last().unwrap().0;
        Ok(MassDistribution {
            repr: MassRepr::Samples(samples),
            length,
            density: None,
        })
    }

    fn validate(&self) -> Result<(), KreinError> {
        let upper = if self.length.is_finite() {
            self.length
        } else {
            64.0
        };
        let n = 64;
        let mut prev = self.mass(0.0)?;
        let mut grid = Vec::with_capacity(n);
        for i in 1..=n {
            grid.push(upper * i as f64 / n as f64);
        }
        for &x in &grid {
            let m = self.mass(x)?;
            if m < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(KreinError::NonMonotone { at: x });
            }
            prev = m;
        }
        let m0 = self.mass(0.0)?;
        if !(self.mass(upper * 1e-3)? > m0) {
            return Err(KreinError::NoGrowthAtOrigin);
        }
        if let Some(dens) = &self.density {
            for &x in grid.iter().take(8) {
                let inc = self.mass(x)? - m0;
                let integral = quad::adaptive(
                    |u| expr::eval(dens, u).map_err(QuadError::Integrand),
                    0.0,
                    x,
                    1e-11,
                    1e-11,
                    10_000,
                )?;
                if (integral.value - inc).abs() > 1e-8 * inc.abs().max(1.0) {
                    return Err(KreinError::DensityMismatch {
                        at: x,
                        expected: integral.value,
                        got: inc,
                    });
                }
            }
        }
        Ok(())
    }

    /// The mass `M(x)`.
    pub fn mass(&self, x: f64) -> Result<f64, KreinError> {
        if x < 0.0 || (self.length.is_finite() && x > self.length * (1.0 + 1e-12)) {
            return Err(KreinError::OutOfRange { x });
        }
        match &self.repr {
            MassRepr::Expr(e) => expr::eval(e, x).map_err(KreinError::Mass),
            MassRepr::Samples(samples) => {
                let idx = samples.partition_point(|(sx, _)| *sx < x);
                if idx == 0 {
                    return Ok(samples[0].1);
                }
                if idx >= samples.len() {
                    return Ok(samples[samples.len() - 1].1);
                }
                let (x0, m0) = samples[idx - 1];
                let (x1, m1) = samples[idx];
                Ok(m0 + (m1 - m0) * (x - x0) / (x1 - x0))
            }
            MassRepr::Shifted { base, c } => {
                let z = invert_parametric(base, *c, x)?;
                let m = base.mass(z)?;
                Ok(m / (1.0 + c * m))
            }
        }
    }

    /// Analytic density at `x` when one is available.
    pub fn density_at(&self, x: f64) -> Result<Option<f64>, KreinError> {
        if let Some(d) = &self.density {
            return expr::eval(d, x).map(Some).map_err(KreinError::Mass);
        }
        if let MassRepr::Shifted { base, c } = &self.repr {
            let z = invert_parametric(base, *c, x)?;
            if let Some(rho) = base.density_at(z)? {
                let denom = 1.0 + c * base.mass(z)?;
                return Ok(Some(rho / denom.powi(4)));
            }
        }
        Ok(None)
    }
}

/// `x(z) = \int_0^z (1 + c M(u))^2 du`.
fn parametric_x(base: &MassDistribution, c: f64, z: f64) -> Result<f64, KreinError> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let v = quad::adaptive(
        |u| {
            let m = base.mass(u).map_err(|_| QuadError::NonFinite { at: u })?;
            let g = 1.0 + c * m;
            Ok(g * g)
        },
        0.0,
        z,
        1e-14 * z.max(1.0),
        1e-13,
        20_000,
    )?;
    Ok(v.value)
}

/// Solve `x(z) = x` for `z`; `x(z)` is strictly increasing with slope >= 1
/// for `c >= 0`, so `[0, x]` brackets the root.
fn invert_parametric(base: &MassDistribution, c: f64, x: f64) -> Result<f64, KreinError> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = x;
    let mut f_lo = -x;
    let f_hi = parametric_x(base, c, hi)? - x;
    if f_hi < 0.0 {
        return Err(KreinError::InversionFailed { x });
    }
    // bisection with a secant accelerant; x(z) is monotone so the bracket
    // never degenerates
    let mut z = hi * 0.5;
    for _ in 0..200 {
        let f = parametric_x(base, c, z)? - x;
        if f.abs() <= INVERSION_TOL * x.max(1.0) {
            return Ok(z);
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
            f_lo = f;
        }
        let denom = f - f_lo;
        let mut next = if denom.abs() > 0.0 {
            z - f * (z - lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) < INVERSION_TOL * x.max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
        z = next;
    }
    Err(KreinError::InversionFailed { x })
}

/// Apply the spectral shift `tau -> c + tau` to a string.
///
/// `c = 0` returns the base unchanged; `c > 0` produces the transformed
/// string with `M* = M/(1+cM) < 1/c`. Negative `c` is rejected: it is only
/// admissible past a spectral jump at the origin, which the shipped base
/// strings do not have.
pub fn string_shift(base: &MassDistribution, c: f64) -> Result<MassDistribution, KreinError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(KreinError::InvalidShift { c });
    }
    if c == 0.0 {
        return Ok(base.clone());
    }
    let length = if base.length.is_finite() {
        parametric_x(base, c, base.length)?
    } else {
        f64::INFINITY
    };
    Ok(MassDistribution {
        repr: MassRepr::Shifted {
            base: Box::new(base.clone()),
            c,
        },
        length,
        density: None,
    })
}

/// Tabulated density `dM/dx` on a grid: the analytic derivative when the
/// representation carries one, otherwise central differences with one
/// Richardson level. One-sided slopes are compared to flag kinks.
pub fn density_of(md: &MassDistribution, grid: &[f64]) -> Result<Vec<(f64, f64)>, KreinError> {
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        if let Some(v) = md.density_at(x)? {
            out.push((x, v));
            continue;
        }
        let h = 1e-4 * x.abs().max(1.0);
        let v = if x >= h {
            let d1 = (md.mass(x + h)? - md.mass(x - h)?) / (2.0 * h);
            let d2 = (md.mass(x + 0.5 * h)? - md.mass(x - 0.5 * h)?) / h;
            let left = (md.mass(x)? - md.mass(x - h)?) / h;
            let right = (md.mass(x + h)? - md.mass(x)?) / h;
            let scale = d2.abs().max(1.0);
            if (left - right).abs() > 0.05 * scale + 1e-6 {
                return Err(KreinError::NonDifferentiable { at: x, left, right });
            }
            (4.0 * d2 - d1) / 3.0
        } else {
            // one-sided second-order stencil near the origin
            let m0 = md.mass(x)?;
            let d1 = (-3.0 * m0 + 4.0 * md.mass(x + h)? - md.mass(x + 2.0 * h)?) / (2.0 * h);
            let hh = 0.5 * h;
            let d2 = (-3.0 * m0 + 4.0 * md.mass(x + hh)? - md.mass(x + 2.0 * hh)?) / (2.0 * hh);
            (4.0 * d2 - d1) / 3.0
        };
        out.push((x, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn lebesgue_string() -> MassDistribution {
        MassDistribution::from_expr(
            parse("x", "x").unwrap(),
            f64::INFINITY,
            Some(parse("1", "x").unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn shift_of_lebesgue_string_closed_form() {
        // c = 1: M*(x) = 1 - (3x+1)^(-1/3) via z = (3x+1)^(1/3) - 1
        let shifted = string_shift(&lebesgue_string(), 1.0).unwrap();
        for x in [0.0, 0.1, 1.0, 7.5, 42.0, 100.0] {
            let expected = 1.0 - (3.0 * x + 1.0).powf(-1.0 / 3.0);
            let got = shifted.mass(x).unwrap();
            assert!(
                (got - expected).abs() < 1e-11,
                "x={} got={} expected={}",
                x,
                got,
                expected
            );
        }
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let base = lebesgue_string();
        let same = string_shift(&base, 0.0).unwrap();
        for x in [0.0, 0.5, 3.0] {
            assert_eq!(same.mass(x).unwrap(), base.mass(x).unwrap());
        }
    }

    #[test]
    fn negative_shift_rejected() {
        assert!(matches!(
            string_shift(&lebesgue_string(), -0.5),
            Err(KreinError::InvalidShift { .. })
        ));
    }

    #[test]
    fn shifted_density_closed_form() {
        // dM*/dx = (3x+1)^(-4/3)
        let shifted = string_shift(&lebesgue_string(), 1.0).unwrap();
        let grid = [0.0, 1.0, 5.0, 20.0];
        let dens = density_of(&shifted, &grid).unwrap();
        for (x, v) in dens {
            let expected = (3.0 * x + 1.0).powf(-4.0 / 3.0);
            assert!(
                (v - expected).abs() < 1e-10,
                "x={} v={} expected={}",
                x,
                v,
                expected
            );
        }
        // frozen closed-form checks: 1 at the origin, 16^(-4/3) at x=5
        let d0 = shifted.density_at(0.0).unwrap().unwrap();
        assert!((d0 - 1.0).abs() < 1e-12);
        let d5 = shifted.density_at(5.0).unwrap().unwrap();
        assert!((d5 - 16.0f64.powf(-4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn shifted_mass_bounded_by_reciprocal_shift() {
        let shifted = string_shift(&lebesgue_string(), 2.0).unwrap();
        let mut prev = -1.0;
        for i in 0..50 {
            let x = 4.0 * i as f64;
            let m = shifted.mass(x).unwrap();
            assert!(m >= prev);
            assert!(m < 0.5); // 1/c
            prev = m;
        }
    }

    #[test]
    fn lebesgue_density_is_one() {
        let dens = density_of(&lebesgue_string(), &[0.0, 1.0, 2.5]).unwrap();
        for (_, v) in dens {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_interpolation_and_finite_difference_density() {
        let samples: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let x = i as f64 * 0.1;
                (x, x * x)
            })
            .collect();
        let md = MassDistribution::from_samples(samples).unwrap();
        assert!((md.mass(5.0).unwrap() - 25.0).abs() < 2e-3); // linear interp
        let dens = density_of(&md, &[2.0]).unwrap();
        assert!((dens[0].1 - 4.0).abs() < 0.05);
    }

    #[test]
    fn decreasing_mass_rejected() {
        let res = MassDistribution::from_expr(parse("0-x", "x").unwrap(), 10.0, None);
        assert!(matches!(res, Err(KreinError::NonMonotone { .. })));
    }

    #[test]
    fn flat_mass_rejected() {
        let res = MassDistribution::from_expr(parse("1", "x").unwrap(), 10.0, None);
        assert!(matches!(res, Err(KreinError::NoGrowthAtOrigin)));
    }

    #[test]
    fn density_mismatch_rejected() {
        let res = MassDistribution::from_expr(
            parse("x", "x").unwrap(),
            10.0,
            Some(parse("2", "x").unwrap()),
        );
        assert!(matches!(res, Err(KreinError::DensityMismatch { .. })));
    }
}
