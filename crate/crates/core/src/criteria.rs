//! Similarity and critical-point diagnostics built from the pair
//! `(M_+, M_-)`.
//!
//! A J-self-adjoint problem similar to a self-adjoint one must keep the
//! ratios `|Im M_pm| / |M_+ - M_-|` bounded off the real axis; regularity of
//! the critical points 0 and infinity requires boundedness near those points.
//! [`scan`] samples the ratios on geometric arcs toward 0 and infinity, fits
//! log-log slopes, and issues a verdict. Non-real spectrum corresponds to
//! coincidences `M_+(lambda) = M_-(lambda)`, located by winding-number
//! counting with Newton refinement. Real eigenvalues are classified from the
//! spectral measures via moment integrals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::herglotz::{moment_integral, HerglotzError, HerglotzFunction, SpectralMeasure};
use crate::quad;

#[derive(Debug, Clone, PartialEq)]
pub enum CriteriaError {
    Herglotz(HerglotzError),
    /// `M_+` and `M_-` coincide to working precision: the point is a
    /// candidate for non-real spectrum, and the ratios are undefined there.
    NonRealSpectrumCandidate {
        lambda: Complex64,
        difference: f64,
    },
    VanishingRealPart {
        eps: f64,
    },
    NonRealRequired,
    /// Scan grid must span at least three decades.
    GridTooNarrow,
    BadBox,
    /// Winding-number count could not be stabilized (a zero sits on or very
    /// near the contour at the maximum subdivision depth).
    ContourUnresolved {
        detail: String,
    },
    /// Newton refinement failed to converge inside the box.
    RefinementFailed {
        start: Complex64,
    },
}

impl fmt::Display for CriteriaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriteriaError::Herglotz(e) => write!(f, "{}", e),
            CriteriaError::NonRealSpectrumCandidate { lambda, difference } => write!(
                f,
                "non-real spectrum candidate at lambda={} (|M_+ - M_-| = {:e})",
                lambda, difference
            ),
            CriteriaError::VanishingRealPart { eps } => {
                write!(f, "Re M_+(i{}) vanishes; parity ratio undefined", eps)
            }
            CriteriaError::NonRealRequired => write!(f, "non-real lambda required"),
            CriteriaError::GridTooNarrow => {
                write!(f, "scale grid must span at least three decades")
            }
            CriteriaError::BadBox => write!(f, "box must lie strictly inside the upper half-plane"),
            CriteriaError::ContourUnresolved { detail } => {
                write!(f, "contour winding unresolved: {}", detail)
            }
            CriteriaError::RefinementFailed { start } => {
                write!(f, "Newton refinement failed from {}", start)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CriteriaError {}

impl From<HerglotzError> for CriteriaError {
    fn from(e: HerglotzError) -> Self {
        CriteriaError::Herglotz(e)
    }
}

/// Relative coincidence threshold for `M_+ = M_-` detection.
const COINCIDENCE_REL: f64 = 1e-13;

/// The two boundedness ratios `|Im M_+| / |M_+ - M_-|` and
/// `|Im M_-| / |M_+ - M_-|`.
pub fn similarity_ratios(
    m_plus: &HerglotzFunction,
    m_minus: &HerglotzFunction,
    lambda: Complex64,
) -> Result<(f64, f64), CriteriaError> {
    if lambda.im == 0.0 {
        return Err(CriteriaError::NonRealRequired);
    }
    let mp = m_plus.eval(lambda)?;
    let mm = m_minus.eval(lambda)?;
    let diff = (mp - mm).norm();
    if diff <= COINCIDENCE_REL * (mp.norm() + mm.norm() + 1.0) {
        return Err(CriteriaError::NonRealSpectrumCandidate {
            lambda,
            difference: diff,
        });
    }
    Ok((mp.im.abs() / diff, mm.im.abs() / diff))
}

/// `Im M_+(i eps) / Re M_+(i eps)`: for odd weight and even potential this is
/// the boundedness criterion along the imaginary axis.
pub fn parity_ratio(m_plus: &HerglotzFunction, eps: f64) -> Result<f64, CriteriaError> {
    assert!(eps > 0.0, "eps must be positive");
    let v = m_plus.eval(Complex64::new(0.0, eps))?;
    if v.re == 0.0 || v.re.abs() < 1e-15 * v.im.abs() {
        return Err(CriteriaError::VanishingRealPart { eps });
    }
    Ok(v.im / v.re)
}

/// Rank-one resolvent-correction norm
/// `(Im M_+ + Im M_-) / (|Im lambda| |M_+ - M_-|)`, the exact operator norm
/// of the difference between the full resolvent and the decoupled one.
pub fn resolvent_correction_norm(
    m_plus: &HerglotzFunction,
    m_minus: &HerglotzFunction,
    lambda: Complex64,
) -> Result<f64, CriteriaError> {
    if lambda.im == 0.0 {
        return Err(CriteriaError::NonRealRequired);
    }
    let mp = m_plus.eval(lambda)?;
    let mm = m_minus.eval(lambda)?;
    let diff = (mp - mm).norm();
    if diff <= COINCIDENCE_REL * (mp.norm() + mm.norm() + 1.0) {
        return Err(CriteriaError::NonRealSpectrumCandidate {
            lambda,
            difference: diff,
        });
    }
    // |Im M| / |Im lambda| = ||psi||^2 for class-(R) functions
    let norms_sq = (mp.im.abs() + mm.im.abs()) / lambda.im.abs();
    Ok(norms_sq / diff)
}

// ---------------------------------------------------------------------------
// Scan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ScanConfig {
    /// Scales for the arcs toward 0 (and, reciprocally, toward infinity).
    /// Must span at least three decades.
    pub scales: Vec<f64>,
    /// Ray angles in (0, pi).
    pub rays: Vec<f64>,
    /// A regime counts as unbounded only if some ratio exceeds this bound on
    /// the most extreme scale...
    pub ratio_bound: f64,
    /// ...and the fitted log-log slope exceeds this magnitude.
    pub slope_threshold: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            scales: geometric_scales(1e-8, 1e-1, 3),
            rays: vec![
                core::f64::consts::FRAC_PI_4,
                core::f64::consts::FRAC_PI_2,
                3.0 * core::f64::consts::FRAC_PI_4,
            ],
            ratio_bound: 1e3,
            slope_threshold: 0.05,
        }
    }
}

/// Geometric grid from `lo` to `hi` with `per_decade` points per decade,
/// returned in decreasing order.
pub fn geometric_scales(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        out.push(hi * (lo / hi).powf(t));
    }
    out
}

/// One ratio sample at `lambda = scale * exp(i theta)`.
#[derive(Debug, Clone, Copy)]
pub struct RatioSample {
    pub lambda: Complex64,
    pub scale: f64,
    pub theta: f64,
    pub r_plus: f64,
    pub r_minus: f64,
}

impl RatioSample {
    pub fn worst(&self) -> f64 {
        self.r_plus.max(self.r_minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NoObstructionFound,
    SimilarityExcludedNearZero,
    SimilarityExcludedNearInfinity,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::NoObstructionFound => "no-obstruction-found",
            Verdict::SimilarityExcludedNearZero => "similarity-excluded-near-0",
            Verdict::SimilarityExcludedNearInfinity => "similarity-excluded-near-inf",
        };
        write!(f, "{}", s)
    }
}

/// Result of a boundedness scan of the ratios near 0 and near infinity.
#[derive(Debug, Clone)]
pub struct CriteriaReport {
    pub near_zero: Vec<RatioSample>,
    pub near_infinity: Vec<RatioSample>,
    pub sup_near_zero: f64,
    pub sup_near_infinity: f64,
    /// Slope of log(worst ratio) against log(scale) toward 0.
    pub slope_near_zero: Option<f64>,
    /// Slope of log(worst ratio) against log(|lambda|) toward infinity.
    pub slope_near_infinity: Option<f64>,
    pub verdict: Verdict,
    /// Points where `M_+ = M_-` to working precision (recorded, not fatal).
    pub nonreal_candidates: Vec<Complex64>,
    /// The near-zero criterion presumes `ker A = ker A^2`, which this scan
    /// cannot verify; it is recorded here as an assumption.
    pub kernel_hypothesis_assumed: bool,
}

/// Evaluate the similarity ratios along rays toward 0 and toward infinity,
/// fit slopes, and classify.
pub fn scan(
    m_plus: &HerglotzFunction,
    m_minus: &HerglotzFunction,
    config: &ScanConfig,
) -> Result<CriteriaReport, CriteriaError> {
    let mut scales = config.scales.clone();
    scales.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if scales.is_empty() || scales[0] / scales[scales.len() - 1] < 1e3 - 1e-9 {
        return Err(CriteriaError::GridTooNarrow);
    }
    let mut candidates = Vec::new();
    let mut near_zero = Vec::new();
    let mut near_infinity = Vec::new();
    for &eps in &scales {
        for (scale, samples) in [(eps, &mut near_zero), (1.0 / eps, &mut near_infinity)] {
            for &theta in &config.rays {
                let lambda = Complex64::from_polar(scale, theta);
                match similarity_ratios(m_plus, m_minus, lambda) {
                    Ok((r_plus, r_minus)) => samples.push(RatioSample {
                        lambda,
                        scale,
                        theta,
                        r_plus,
                        r_minus,
                    }),
                    Err(CriteriaError::NonRealSpectrumCandidate { lambda, .. }) => {
                        candidates.push(lambda);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let per_scale_worst = |samples: &[RatioSample]| -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in samples {
            match out.iter_mut().find(|(sc, _)| *sc == s.scale) {
                Some((_, w)) => *w = w.max(s.worst()),
                None => out.push((s.scale, s.worst())),
            }
        }
        out
    };

    let zero_pts = per_scale_worst(&near_zero);
    let inf_pts = per_scale_worst(&near_infinity);
    let sup_near_zero = zero_pts.iter().fold(0.0f64, |a, p| a.max(p.1));
    let sup_near_infinity = inf_pts.iter().fold(0.0f64, |a, p| a.max(p.1));
    let slope_near_zero = quad::loglog_slope(&zero_pts);
    let slope_near_infinity = quad::loglog_slope(&inf_pts);

    // worst ratio on the most extreme scale of each regime
    let finest = zero_pts
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|p| p.1)
        .unwrap_or(0.0);
    let outermost = inf_pts
        .iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|p| p.1)
        .unwrap_or(0.0);

    let excluded_zero = slope_near_zero
        .map(|s| s < -config.slope_threshold && finest > config.ratio_bound)
        .unwrap_or(false);
    let excluded_inf = slope_near_infinity
        .map(|s| s > config.slope_threshold && outermost > config.ratio_bound)
        .unwrap_or(false);

    let verdict = if excluded_zero {
        Verdict::SimilarityExcludedNearZero
    } else if excluded_inf {
        Verdict::SimilarityExcludedNearInfinity
    } else {
        Verdict::NoObstructionFound
    };

    Ok(CriteriaReport {
        near_zero,
        near_infinity,
        sup_near_zero,
        sup_near_infinity,
        slope_near_zero,
        slope_near_infinity,
        verdict,
        nonreal_candidates: candidates,
        kernel_hypothesis_assumed: true,
    })
}

// ---------------------------------------------------------------------------
// Non-real spectrum: zeros of M_+ - M_-
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RootScanConfig {
    pub max_depth: usize,
    /// Residual target |M_+ - M_-| at a refined root.
    pub residual_tol: f64,
    /// Boxes smaller than this go straight to Newton.
    pub min_box: f64,
}

impl Default for RootScanConfig {
    fn default() -> Self {
        RootScanConfig {
            max_depth: 14,
            residual_tol: 1e-8,
            min_box: 1e-5,
        }
    }
}

/// Locate zeros of `h = M_+ - M_-` inside a rectangle strictly in the upper
/// half-plane by winding-number counting on subdivided boxes, then Newton.
pub fn nonreal_roots(
    m_plus: &HerglotzFunction,
    m_minus: &HerglotzFunction,
    corner_lo: Complex64,
    corner_hi: Complex64,
    config: &RootScanConfig,
) -> Result<Vec<Complex64>, CriteriaError> {
    if !(corner_lo.im > 0.0) || !(corner_hi.im > corner_lo.im) || !(corner_hi.re > corner_lo.re) {
        return Err(CriteriaError::BadBox);
    }
    let h = |lambda: Complex64| -> Result<Complex64, CriteriaError> {
        Ok(m_plus.eval(lambda)? - m_minus.eval(lambda)?)
    };
    let mut roots: Vec<Complex64> = Vec::new();
    let mut stack = vec![(corner_lo, corner_hi, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let count = winding_count(&h, lo, hi)?;
        if count == 0 {
            continue;
        }
        let diag = (hi - lo).norm();
        if count == 1 || diag < config.min_box {
            // Newton from the center with a numeric derivative
            let mut z = 0.5 * (lo + hi);
            let mut ok = false;
            for _ in 0..60 {
                let f0 = h(z)?;
                if f0.norm() <= config.residual_tol {
                    ok = true;
                    break;
                }
                let delta = 1e-7 * z.norm().max(1e-3);
                let fp = (h(z + Complex64::new(delta, 0.0))? - h(z - Complex64::new(delta, 0.0))?)
                    / (2.0 * delta);
                if fp.norm() == 0.0 {
                    break;
                }
                z -= f0 / fp;
                if !(z.im > 0.0) {
                    break;
                }
            }
            if ok && inside(z, corner_lo, corner_hi, 1e-6) {
                if !roots.iter().any(|r| (*r - z).norm() < 1e-6) {
                    roots.push(z);
                }
                continue;
            }
            if depth >= config.max_depth {
                return Err(CriteriaError::RefinementFailed {
                    start: 0.5 * (lo + hi),
                });
            }
        }
        if depth >= config.max_depth {
            return Err(CriteriaError::ContourUnresolved {
                detail: format!("{} zero(s) not isolated at max depth", count),
            });
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, depth + 1));
        stack.push((
            Complex64::new(mid.re, lo.im),
            Complex64::new(hi.re, mid.im),
            depth + 1,
        ));
        stack.push((
            Complex64::new(lo.re, mid.im),
            Complex64::new(mid.re, hi.im),
            depth + 1,
        ));
        stack.push((mid, hi, depth + 1));
    }
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(roots)
}

fn inside(z: Complex64, lo: Complex64, hi: Complex64, slack: f64) -> bool {
    z.re >= lo.re - slack && z.re <= hi.re + slack && z.im >= lo.im - slack && z.im <= hi.im + slack
}

/// Count zeros inside the rectangle by the argument principle, refining the
/// boundary sampling until consecutive phase jumps are small.
fn winding_count(
    h: &impl Fn(Complex64) -> Result<Complex64, CriteriaError>,
    lo: Complex64,
    hi: Complex64,
) -> Result<i32, CriteriaError> {
    let corners = [
        lo,
        Complex64::new(hi.re, lo.im),
        hi,
        Complex64::new(lo.re, hi.im),
    ];
    // boundary parametrized counterclockwise over [0, 4)
    let point = |t: f64| -> Complex64 {
        let leg = t.floor() as usize % 4;
        let frac = t - t.floor();
        let a = corners[leg];
        let b = corners[(leg + 1) % 4];
        a + (b - a) * frac
    };

    let mut params: Vec<f64> = (0..64).map(|i| i as f64 / 16.0).collect();
    let mut values: Vec<Complex64> = Vec::with_capacity(params.len());
    for &t in &params {
        values.push(h(point(t))?);
    }
    let tiny = 1e-12;
    for pass in 0..24 {
        let mut new_params = Vec::new();
        for i in 0..params.len() {
            let j = (i + 1) % params.len();
            let a = values[i];
            let b = values[j];
            if a.norm() < tiny || b.norm() < tiny {
                return Err(CriteriaError::ContourUnresolved {
                    detail: format!("|h| ~ 0 on the contour near {}", point(params[i])),
                });
            }
            let dphi = (b / a).arg().abs();
            if dphi > core::f64::consts::FRAC_PI_2 {
                let tj = if j == 0 { 4.0 } else { params[j] };
                new_params.push(0.5 * (params[i] + tj));
            }
        }
        if new_params.is_empty() {
            break;
        }
        if pass == 23 {
            return Err(CriteriaError::ContourUnresolved {
                detail: String::from("phase jumps did not settle"),
            });
        }
        for t in new_params {
            let idx = params.partition_point(|&x| x < t);
            params.insert(idx, t);
            values.insert(idx, h(point(t))?);
        }
    }
    let mut total = 0.0;
    for i in 0..params.len() {
        let j = (i + 1) % params.len();
        total += (values[j] / values[i]).arg();
    }
    let winding = total / (2.0 * core::f64::consts::PI);
    let count = winding.round();
    if (winding - count).abs() > 0.2 {
        return Err(CriteriaError::ContourUnresolved {
            detail: format!("non-integer winding {}", winding),
        });
    }
    Ok(count as i32)
}

// ---------------------------------------------------------------------------
// Eigenvalue classification from the spectral measures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenvalueVerdict {
    NotEigenvalue,
    SimpleEigenvalue,
    NonsimpleOrHigher,
    /// The moment test does not apply: an atom sits at `lambda0`, or a
    /// power-2 moment diverges.
    AtomObstruction,
}

impl fmt::Display for EigenvalueVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EigenvalueVerdict::NotEigenvalue => "not_eigenvalue",
            EigenvalueVerdict::SimpleEigenvalue => "simple_eigenvalue",
            EigenvalueVerdict::NonsimpleOrHigher => "nonsimple_or_higher",
            EigenvalueVerdict::AtomObstruction => "atom_obstruction",
        };
        write!(f, "{}", s)
    }
}

#[derive(Debug, Clone)]
pub struct EigenvalueReport {
    pub verdict: EigenvalueVerdict,
    pub reason: String,
    /// Signed power-1 moments of (tau_+, tau_-) when computed.
    pub p1_signed: Option<(f64, f64)>,
    /// Power-2 moments when computed.
    pub p2: Option<(f64, f64)>,
    /// Divergence flags of the power-4 moments when computed.
    pub p4_divergent: Option<(bool, bool)>,
}

/// Decision tree for a real point `lambda0`:
/// no atom and finite power-2 moments make the test applicable; equality of
/// the signed power-1 moments makes `lambda0` an eigenvalue (geometric
/// multiplicity 1); the eigenvalue is simple exactly when the pair of
/// conditions "both power-4 moments finite" and "power-2 moments equal" does
/// NOT hold in full.
pub fn eigenvalue_classify(
    tau_plus: &SpectralMeasure,
    tau_minus: &SpectralMeasure,
    lambda0: f64,
    equality_tol: f64,
) -> Result<EigenvalueReport, CriteriaError> {
    let atol = 1e-12 * lambda0.abs().max(1.0);
    let has_atom = |mu: &SpectralMeasure| {
        mu.atoms()
            .iter()
            .any(|a| (a.location - lambda0).abs() <= atol)
    };
    if has_atom(tau_plus) || has_atom(tau_minus) {
        return Ok(EigenvalueReport {
            verdict: EigenvalueVerdict::AtomObstruction,
            reason: format!("atom at lambda0={}", lambda0),
            p1_signed: None,
            p2: None,
            p4_divergent: None,
        });
    }

    let p2p = moment_integral(tau_plus, lambda0, 2, false)?;
    let p2m = moment_integral(tau_minus, lambda0, 2, false)?;
    let (p2p, p2m) = match (p2p.finite(), p2m.finite()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Ok(EigenvalueReport {
                verdict: EigenvalueVerdict::AtomObstruction,
                reason: String::from(
                    "power-2 moment divergent; moment test inapplicable at this point",
                ),
                p1_signed: None,
                p2: None,
                p4_divergent: None,
            })
        }
    };

    let p1p = moment_integral(tau_plus, lambda0, 1, true)?;
    let p1m = moment_integral(tau_minus, lambda0, 1, true)?;
    let (p1p, p1m) = match (p1p.finite(), p1m.finite()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Ok(EigenvalueReport {
                verdict: EigenvalueVerdict::AtomObstruction,
                reason: String::from("signed power-1 moment divergent"),
                p1_signed: None,
                p2: Some((p2p, p2m)),
                p4_divergent: None,
            })
        }
    };

    if (p1p - p1m).abs() > equality_tol {
        return Ok(EigenvalueReport {
            verdict: EigenvalueVerdict::NotEigenvalue,
            reason: format!("signed power-1 moments differ: {:e} vs {:e}", p1p, p1m),
            p1_signed: Some((p1p, p1m)),
            p2: Some((p2p, p2m)),
            p4_divergent: None,
        });
    }

    let p4p = moment_integral(tau_plus, lambda0, 4, false)?;
    let p4m = moment_integral(tau_minus, lambda0, 4, false)?;
    let p4_both_finite = !p4p.is_divergent() && !p4m.is_divergent();
    let p2_equal = (p2p - p2m).abs() <= equality_tol;

    // simple unless both extra conditions hold
    let (verdict, reason) = if p4_both_finite && p2_equal {
        (
            EigenvalueVerdict::NonsimpleOrHigher,
            String::from("power-4 moments finite and power-2 moments equal"),
        )
    } else {
        (
            EigenvalueVerdict::SimpleEigenvalue,
            format!(
                "power-4 finite: ({}, {}); power-2 equal: {}",
                !p4p.is_divergent(),
                !p4m.is_divergent(),
                p2_equal
            ),
        )
    };
    Ok(EigenvalueReport {
        verdict,
        reason,
        p1_signed: Some((p1p, p1m)),
        p2: Some((p2p, p2m)),
        p4_divergent: Some((p4p.is_divergent(), p4m.is_divergent())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::expr::parse;
    use crate::herglotz::{AcDensity, Atom};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn constant_pair() -> (HerglotzFunction, HerglotzFunction) {
        (
            HerglotzFunction::closed_form(|_| Ok(c(0.0, 1.0)), "i"),
            HerglotzFunction::closed_form(|_| Ok(c(0.0, -1.0)), "-i"),
        )
    }

    #[test]
    fn constant_pair_ratios_are_half() {
        let (mp, mm) = constant_pair();
        for lam in [c(0.0, 1.0), c(2.0, 0.5), c(-1.0, 3.0)] {
            let (rp, rm) = similarity_ratios(&mp, &mm, lam).unwrap();
            assert!((rp - 0.5).abs() < 1e-15);
            assert!((rm - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn sec5_ratio_growth_rate() {
        let b = builtin::paper_sec5();
        for eps in [1e-1, 1e-2, 1e-3] {
            let (rp, _) = similarity_ratios(&b.m_plus, &b.m_minus, c(0.0, eps)).unwrap();
            // closed-form oracle: (1/eps + 1/sqrt(2 eps)) / sqrt(2/eps)
            let expected = (1.0 / eps + 1.0 / (2.0 * eps).sqrt()) / (2.0f64 / eps).sqrt();
            assert!(
                (rp - expected).abs() < 1e-9 * expected,
                "eps={} rp={} expected={}",
                eps,
                rp,
                expected
            );
        }
    }

    #[test]
    fn coincidence_detected() {
        let mp = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        let mm = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        assert!(matches!(
            similarity_ratios(&mp, &mm, c(0.0, 1.0)),
            Err(CriteriaError::NonRealSpectrumCandidate { .. })
        ));
    }

    #[test]
    fn parity_ratio_paper_value() {
        // eps = 0.02: 1 + sqrt(2/0.02) = 11
        let b = builtin::paper_sec5();
        let r = parity_ratio(&b.m_plus, 0.02).unwrap();
        assert!((r - 11.0).abs() < 1e-9, "r={}", r);
    }

    #[test]
    fn parity_ratio_free_is_one() {
        let b = builtin::free();
        for eps in [0.01, 0.5, 3.0] {
            let r = parity_ratio(&b.m_plus, eps).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_norm_toy() {
        let (mp, mm) = constant_pair();
        let v = resolvent_correction_norm(&mp, &mm, c(0.0, 1.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resolvent_norm_sec5_asymptotics() {
        // sqrt(2) eps^{-3/2} + 1/eps exactly, from the closed forms
        let b = builtin::paper_sec5();
        for eps in [1e-2, 1e-3] {
            let v = resolvent_correction_norm(&b.m_plus, &b.m_minus, c(0.0, eps)).unwrap();
            let exact = 2.0f64.sqrt() * eps.powf(-1.5) + 1.0 / eps;
            assert!(
                (v - exact).abs() < 1e-7 * exact,
                "eps={} v={} exact={}",
                eps,
                v,
                exact
            );
        }
    }

    #[test]
    fn ordering_property() {
        // (Im M+ + Im M-) >= Im M+- pointwise: the correction norm dominates
        // each ratio divided by |Im lambda|
        let b = builtin::paper_sec61();
        for lam in [c(0.3, 0.4), c(-1.0, 1.0), c(0.0, 0.07)] {
            let (rp, rm) = similarity_ratios(&b.m_plus, &b.m_minus, lam).unwrap();
            let rn = resolvent_correction_norm(&b.m_plus, &b.m_minus, lam).unwrap();
            assert!(rn * lam.im.abs() + 1e-12 >= rp.max(rm));
        }
    }

    #[test]
    fn scan_sec5_excluded_near_zero() {
        let b = builtin::paper_sec5();
        let report = scan(&b.m_plus, &b.m_minus, &ScanConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::SimilarityExcludedNearZero);
        let slope = report.slope_near_zero.unwrap();
        assert!((slope + 0.5).abs() < 0.05, "slope={}", slope);
        assert!(report.kernel_hypothesis_assumed);
    }

    #[test]
    fn scan_free_pair_unobstructed() {
        let b = builtin::free();
        let report = scan(&b.m_plus, &b.m_minus, &ScanConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::NoObstructionFound);
        assert!(report.sup_near_zero < 1.0);
        assert!(report.sup_near_infinity < 1.0);
    }

    #[test]
    fn scan_detects_exclusion_near_infinity() {
        // Im M+ ~ |lambda| while |M+ - M-| ~ sqrt(|lambda|): the ratio grows
        // like |lambda|^(1/2) toward infinity and stays bounded near zero
        let mp = HerglotzFunction::closed_form(|l| Ok(l + Complex64::i() * l.sqrt()), "toy");
        let mm = HerglotzFunction::closed_form(Ok, "lambda");
        let report = scan(&mp, &mm, &ScanConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::SimilarityExcludedNearInfinity);
        let slope = report.slope_near_infinity.unwrap();
        assert!((slope - 0.5).abs() < 0.1, "slope={}", slope);
    }

    #[test]
    fn scan_requires_three_decades() {
        let b = builtin::free();
        let cfg = ScanConfig {
            scales: geometric_scales(1e-2, 1e-1, 3),
            ..ScanConfig::default()
        };
        assert!(matches!(
            scan(&b.m_plus, &b.m_minus, &cfg),
            Err(CriteriaError::GridTooNarrow)
        ));
    }

    #[test]
    fn roots_toy_quadratic() {
        // h = -1/lambda - lambda vanishes at lambda = i
        let mp = HerglotzFunction::closed_form(|l| Ok(-1.0 / l), "-1/lambda");
        let mm = HerglotzFunction::closed_form(Ok, "lambda");
        // note Re(i) = 0: the box must straddle the imaginary axis
        let roots = nonreal_roots(
            &mp,
            &mm,
            c(-10.0, 0.05),
            c(10.0, 10.0),
            &RootScanConfig::default(),
        )
        .unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - c(0.0, 1.0)).norm() < 1e-6, "root={}", roots[0]);
    }

    #[test]
    fn roots_sec5_empty() {
        let b = builtin::paper_sec5();
        let roots = nonreal_roots(
            &b.m_plus,
            &b.m_minus,
            c(0.1, 0.1),
            c(10.0, 10.0),
            &RootScanConfig::default(),
        )
        .unwrap();
        assert!(roots.is_empty(), "roots={:?}", roots);
    }

    #[test]
    fn eigenvalue_atoms_brute_force() {
        // atoms only: direct sums decide everything
        let tp = SpectralMeasure::new(
            vec![
                Atom {
                    location: 1.0,
                    weight: 0.5,
                },
                Atom {
                    location: -2.0,
                    weight: 0.25,
                },
            ],
            None,
        )
        .unwrap();
        let tm = SpectralMeasure::new(
            vec![Atom {
                location: 0.375,
                weight: 0.140625,
            }],
            None,
        )
        .unwrap();
        // p1+ = 0.5/1 + 0.25/(-2) = 0.375; p1- = 0.140625/0.375 = 0.375
        let report = eigenvalue_classify(&tp, &tm, 0.0, 1e-9).unwrap();
        let (p1p, p1m) = report.p1_signed.unwrap();
        assert!((p1p - 0.375).abs() < 1e-12);
        assert!((p1m - 0.375).abs() < 1e-12);
        // p2+ = 0.5 + 0.0625 = 0.5625 vs p2- = 1.0: unequal, so simple
        assert_eq!(report.verdict, EigenvalueVerdict::SimpleEigenvalue);
    }

    #[test]
    fn eigenvalue_atom_at_lambda0() {
        let tp = SpectralMeasure::new(
            vec![Atom {
                location: 1.0,
                weight: 1.0,
            }],
            None,
        )
        .unwrap();
        let report = eigenvalue_classify(&tp, &tp, 1.0, 1e-6).unwrap();
        assert_eq!(report.verdict, EigenvalueVerdict::AtomObstruction);
    }

    #[test]
    fn eigenvalue_disjoint_densities() {
        let tp = SpectralMeasure::new(
            vec![],
            Some(AcDensity {
                rho: parse("1", "s").unwrap(),
                lo: Some(1.0),
                hi: Some(2.0),
                tail_exponent: None,
            }),
        )
        .unwrap();
        let tm = SpectralMeasure::new(
            vec![],
            Some(AcDensity {
                rho: parse("1", "s").unwrap(),
                lo: Some(3.0),
                hi: Some(4.0),
                tail_exponent: None,
            }),
        )
        .unwrap();
        let report = eigenvalue_classify(&tp, &tm, 0.0, 1e-6).unwrap();
        assert_eq!(report.verdict, EigenvalueVerdict::NotEigenvalue);
        // oracle: log 2 vs log(4/3)
        let (p1p, p1m) = report.p1_signed.unwrap();
        assert!((p1p - 2.0f64.ln()).abs() < 1e-8);
        assert!((p1m - (4.0f64 / 3.0).ln()).abs() < 1e-8);
    }
}
