//! Closed-form stability analysis of the planar one-transition family
//!
//! ```text
//!     A0 = [ -alpha   c ]      A1 = [ -alpha   0 ]
//!          [   0  -alpha ]          [   -c  -alpha ]
//! ```
//!
//! switched by the symmetric two-state chain. The direction process has an
//! explicit invariant density on the circle built from
//!
//! ```text
//!     H(theta; lambda) = exp(-2 lambda cot 2theta)
//!                        * Int_theta^0 exp(2 lambda cot 2y) sec^2 y dy
//!     p0 = C csc^2(theta) lambda H,   p1 = C sec^2(theta) (1 - lambda H)
//! ```
//!
//! on the fundamental quadrant `(-pi/2, 0]`, extended by quarter-turn
//! symmetry with the state index flipping each quarter. The stability
//! functional `G(lambda) = Int (p0 - p1) cos sin` decides everything: the
//! top Lyapunov exponent of the family at switching rate `r` is
//! `c G(r/c) - alpha`.
//!
//! Numerics: both `lambda H` and its complement `1 - lambda H` are computed
//! as integrals of positive integrands with a nonpositive exponent (the
//! complement via `1 - lambda H = lambda Int exp(...) csc^2 y dy`), after the
//! substitution `s = cot(2 theta) - cot(2y)` which turns the boundary layer
//! into a plain exponential weight `e^{-2 lambda s}`. That keeps every
//! density evaluation accurate in relative terms right up to the quadrant
//! corners, where `csc^2`/`sec^2` prefactors would otherwise amplify
//! absolute quadrature error.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::quad::{self, QuadError};

/// Quadrature tolerance used for the inner `lambda H` integrals. These are
/// smooth after substitution, so the adaptive rule effectively reaches
/// machine-relative accuracy before this threshold matters.
const INNER_TOL: f64 = 1e-13;

/// Noise floor handed to the outer quadratures: their integrands are built
/// from inner quadratures accurate to a few tens of ulps, so refining
/// beyond this relative agreement is chasing that noise.
const NESTED_REL_FLOOR: f64 = 2.5e-13;

/// Default decision tolerance for window finding and classification.
pub const DEFAULT_WINDOW_TOL: f64 = 1e-8;

/// Log-grid used to bracket the maximizer of G.
const SCAN_LO: f64 = 1e-3;
const SCAN_HI: f64 = 1e3;
const SCAN_POINTS: usize = 60;

#[derive(Debug, Error)]
pub enum PlanarError {
    #[error("theta = {0} outside the fundamental domain (-pi/2, 0]")]
    DomainViolation(f64),
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("parameters must be positive and finite: {0}")]
    BadParams(String),
    #[error("grid point {0} is within 1e-3 of a multiple of pi/2")]
    GridTooClose(f64),
    #[error(
        "maximizer of G at lambda = {lambda:.3e} sits on the scan boundary \
         [{lo:.0e}, {hi:.0e}]; widen the lambda range"
    )]
    ScanBoundary { lambda: f64, lo: f64, hi: f64 },
    #[error("window certification failed: {0}")]
    CertificationFailed(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Parameters `(alpha, c)` of the one-transition family; both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarParams {
    pub alpha: f64,
    pub c: f64,
}

impl PlanarParams {
    pub fn new(alpha: f64, c: f64) -> Result<Self, PlanarError> {
        if !(alpha > 0.0) || !alpha.is_finite() || !(c > 0.0) || !c.is_finite() {
            return Err(PlanarError::BadParams(format!("alpha = {alpha}, c = {c}")));
        }
        Ok(Self { alpha, c })
    }
}

fn check_lambda(lambda: f64) -> Result<(), PlanarError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(PlanarError::BadLambda(lambda));
    }
    Ok(())
}

/// cot(2 theta) evaluated as (cot - tan)/2 of theta itself, accurate near
/// both quadrant corners.
fn cot_two(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    0.5 * (c / s - s / c)
}

/// 2 sin^2(y(v)) where cot(2 y) = v on the branch 2y in (-pi, 0), free of
/// cancellation for either sign of v.
fn two_sin_sq(v: f64) -> f64 {
    let r = (1.0 + v * v).sqrt();
    if v >= 0.0 {
        1.0 + v / r
    } else {
        1.0 / (r * (r - v))
    }
}

/// 2 cos^2(y(v)) on the same branch.
fn two_cos_sq(v: f64) -> f64 {
    two_sin_sq(-v)
}

fn check_fundamental(theta: f64) -> Result<(), PlanarError> {
    if !(theta > -FRAC_PI_2 && theta <= 0.0) {
        return Err(PlanarError::DomainViolation(theta));
    }
    Ok(())
}

/// `lambda * H(theta; lambda)` for `theta` in the fundamental quadrant.
///
/// After `s = cot(2 theta) - cot(2y)` the integral is
/// `lambda Int_0^inf e^{-2 lambda s} * 2 sin^2(y(s)) ds`,
/// a bounded positive integrand with pure exponential decay.
fn lambda_h(theta: f64, lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    check_fundamental(theta)?;
    check_lambda(lambda)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let c2t = cot_two(theta);
    let s_max = 37.0 / (2.0 * lambda);
    let v =
        quad::integrate(|s| lambda * (-2.0 * lambda * s).exp() * two_sin_sq(c2t - s), 0.0, s_max, tol)?;
    Ok(v)
}

/// `1 - lambda H(theta; lambda)` computed directly (never by subtraction):
/// the same substitution with `2 cos^2` in place of `2 sin^2`.
fn lambda_h_complement(theta: f64, lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    check_fundamental(theta)?;
    check_lambda(lambda)?;
    if theta == 0.0 {
        return Ok(1.0);
    }
    let c2t = cot_two(theta);
    let s_max = 37.0 / (2.0 * lambda);
    let v =
        quad::integrate(|s| lambda * (-2.0 * lambda * s).exp() * two_cos_sq(c2t - s), 0.0, s_max, tol)?;
    Ok(v)
}

/// H(theta; lambda) on `(-pi/2, 0]`, absolute tolerance `tol`; `H(0) = 0`.
pub fn h_eval(theta: f64, lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    Ok(lambda_h(theta, lambda, tol * lambda.max(1.0))? / lambda)
}

/// The closed-form derivative identity
/// `H'(theta) = lambda H (sec^2 + csc^2) - sec^2`, no differencing.
pub fn h_deriv(theta: f64, lambda: f64) -> Result<f64, PlanarError> {
    if !(theta > -FRAC_PI_2 && theta < 0.0) {
        return Err(PlanarError::DomainViolation(theta));
    }
    let lh = lambda_h(theta, lambda, INNER_TOL)?;
    let (s, c) = theta.sin_cos();
    let sec2 = 1.0 / (c * c);
    let csc2 = 1.0 / (s * s);
    Ok(lh * (sec2 + csc2) - sec2)
}

/// Normalizing constant `C(lambda)` of the angular invariant density.
///
/// `1/C = 4 Int_{-pi/2}^0 sec^2 x (1 - lambda H) + csc^2 x lambda H dx`,
/// with both quadrant-corner products computed in their grouped stable form.
pub fn c_const(lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    check_lambda(lambda)?;
    let integrand = |x: f64| -> f64 {
        let (s, c) = x.sin_cos();
        let sec2 = 1.0 / (c * c);
        let csc2 = 1.0 / (s * s);
        // Inner tolerances scaled down by the trig amplification.
        let lh = lambda_h(x, lambda, (INNER_TOL / csc2).max(1e-16)).unwrap_or(f64::NAN);
        let ch = lambda_h_complement(x, lambda, (INNER_TOL / sec2).max(1e-16)).unwrap_or(f64::NAN);
        sec2 * ch + csc2 * lh
    };
    let quarter =
        quad::integrate_with_floor(integrand, -FRAC_PI_2, 0.0, tol.max(1e-13), NESTED_REL_FLOOR)?;
    let inv_c = 4.0 * quarter;
    if !(inv_c.is_finite() && inv_c > 0.0) {
        return Err(PlanarError::BadParams(format!(
            "normalization integral came out as {inv_c}"
        )));
    }
    Ok(1.0 / inv_c)
}

/// Reduce an arbitrary angle to the fundamental quadrant.
///
/// Returns `(theta', flip)` with `theta'` in `(-pi/2, 0]` and `flip` true
/// when an odd number of quarter turns was removed, in which case the state
/// index swaps: `p_i(theta) = p_{i xor flip}(theta')`.
pub fn reduce_angle(theta: f64) -> (f64, bool) {
    let mut k = (theta / FRAC_PI_2).ceil();
    let mut reduced = theta - k * FRAC_PI_2;
    while reduced > 0.0 {
        reduced -= FRAC_PI_2;
        k += 1.0;
    }
    while reduced <= -FRAC_PI_2 {
        reduced += FRAC_PI_2;
        k -= 1.0;
    }
    let flip = (k as i64).rem_euclid(2) == 1;
    (reduced, flip)
}

/// Evaluator for the angular invariant density at a fixed `lambda = r/c`,
/// with the normalizing constant computed once.
#[derive(Debug, Clone)]
pub struct AngularDensity {
    lambda: f64,
    quad_tol: f64,
    c_value: f64,
}

impl AngularDensity {
    pub fn new(lambda: f64, quad_tol: f64) -> Result<Self, PlanarError> {
        check_lambda(lambda)?;
        let c_value = c_const(lambda, quad_tol)?;
        Ok(Self {
            lambda,
            quad_tol,
            c_value,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// The cached normalizing constant `C(lambda)`.
    pub fn c_value(&self) -> f64 {
        self.c_value
    }

    /// Density `p_i(theta; lambda)` for any real `theta`, `i` in {0, 1}.
    pub fn density(&self, theta: f64, i: usize) -> Result<f64, PlanarError> {
        assert!(i < 2, "state index must be 0 or 1");
        let (t, flip) = reduce_angle(theta);
        let j = if flip { 1 - i } else { i };
        if t == 0.0 {
            // Defined boundary values: p0(0) = 0, p1(0) = C.
            return Ok(if j == 0 { 0.0 } else { self.c_value });
        }
        let (s, c) = t.sin_cos();
        if j == 0 {
            let csc2 = 1.0 / (s * s);
            let lh = lambda_h(t, self.lambda, (INNER_TOL / csc2).max(1e-16))?;
            Ok(self.c_value * csc2 * lh)
        } else {
            let sec2 = 1.0 / (c * c);
            let ch = lambda_h_complement(t, self.lambda, (INNER_TOL / sec2).max(1e-16))?;
            Ok(self.c_value * sec2 * ch)
        }
    }

    /// `Int_0^{2pi} (p0 + p1) - 1`, integrated quadrant by quadrant through
    /// the public density evaluator.
    pub fn normalization_residual(&self) -> Result<f64, PlanarError> {
        let mut total = 0.0;
        for k in 0..4 {
            let lo = k as f64 * FRAC_PI_2;
            let hi = lo + FRAC_PI_2;
            total += quad::integrate_with_floor(
                |t| {
                    self.density(t, 0).unwrap_or(f64::NAN)
                        + self.density(t, 1).unwrap_or(f64::NAN)
                },
                lo,
                hi,
                self.quad_tol.max(1e-12),
                NESTED_REL_FLOOR,
            )?;
        }
        Ok(total - 1.0)
    }
}

/// The stability functional
/// `G(lambda) = Int_0^{2pi} (p0 - p1) cos sin  d theta`, computed on the
/// fundamental quadrant (the integrand is quarter-turn periodic):
/// `G = 4 C Int_{-pi/2}^0 [lambda H cot(theta) - (1 - lambda H) tan(theta)] d theta`.
pub fn g_eval(lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    check_lambda(lambda)?;
    let c_value = c_const(lambda, 0.1 * tol)?;
    let integrand = |t: f64| -> f64 {
        let (s, c) = t.sin_cos();
        let cot = c / s;
        let tan = s / c;
        let lh = lambda_h(t, lambda, (INNER_TOL / cot.abs().max(1.0)).max(1e-16))
            .unwrap_or(f64::NAN);
        let ch = lambda_h_complement(t, lambda, (INNER_TOL / tan.abs().max(1.0)).max(1e-16))
            .unwrap_or(f64::NAN);
        lh * cot - ch * tan
    };
    let quarter = quad::integrate_with_floor(
        integrand,
        -FRAC_PI_2,
        0.0,
        (0.1 * tol / (4.0 * c_value)).max(1e-14),
        NESTED_REL_FLOOR,
    )?;
    Ok(4.0 * c_value * quarter)
}

/// Full-domain evaluation of G through the extended densities; exists to
/// cross-check the quadrant reduction and costs four times as much.
pub fn g_eval_full_domain(lambda: f64, tol: f64) -> Result<f64, PlanarError> {
    let density = AngularDensity::new(lambda, 0.1 * tol)?;
    let mut total = 0.0;
    for k in 0..4 {
        let lo = k as f64 * FRAC_PI_2;
        let hi = lo + FRAC_PI_2;
        total += quad::integrate_with_floor(
            |t| {
                let p0 = density.density(t, 0).unwrap_or(f64::NAN);
                let p1 = density.density(t, 1).unwrap_or(f64::NAN);
                (p0 - p1) * t.cos() * t.sin()
            },
            lo,
            hi,
            (0.25 * tol).max(1e-14),
            NESTED_REL_FLOOR,
        )?;
    }
    Ok(total)
}

/// Analytic top Lyapunov exponent `c G(r/c) - alpha` of the family.
pub fn lyapunov_analytic(params: &PlanarParams, r: f64, tol: f64) -> Result<f64, PlanarError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(PlanarError::BadParams(format!("rate r = {r}")));
    }
    Ok(params.c * g_eval(r / params.c, tol)? - params.alpha)
}

/// Stability classification of the analytic exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Stable => write!(f, "Stable"),
            Verdict::Unstable => write!(f, "Unstable"),
            Verdict::Inconclusive => write!(f, "Inconclusive"),
        }
    }
}

/// Verdict plus the exponent it was based on. `margin` is the distance of
/// the exponent from the tolerance band; nonnegative iff conclusive.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityVerdict {
    pub tag: Verdict,
    pub analytic_exponent: f64,
    pub margin: f64,
}

/// Classify the family at rate `r`: the paper's dichotomy covers only
/// strict inequalities, so exponents within `tol` of zero are Inconclusive.
pub fn classify(params: &PlanarParams, r: f64, tol: f64) -> Result<StabilityVerdict, PlanarError> {
    let exponent = lyapunov_analytic(params, r, (0.25 * tol).max(1e-12))?;
    let tag = if exponent > tol {
        Verdict::Unstable
    } else if exponent < -tol {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityVerdict {
        tag,
        analytic_exponent: exponent,
        margin: exponent.abs() - tol,
    })
}

/// An instability window `(a, b)` with a certified interior point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstabilityWindow {
    pub a: f64,
    pub b: f64,
    pub r_star: f64,
    pub peak_exponent: f64,
}

/// Locate the maximizer of G over the scan grid by golden-section refinement.
///
/// Returns `(lambda_star, g_star)`. Errors if the grid maximum sits on the
/// boundary of the scan range.
pub fn g_max(tol: f64) -> Result<(f64, f64), PlanarError> {
    let qtol = tol.clamp(1e-12, 1e-8);
    let ln_lo = SCAN_LO.ln();
    let ln_hi = SCAN_HI.ln();
    let step = (ln_hi - ln_lo) / (SCAN_POINTS - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut values = Vec::with_capacity(SCAN_POINTS);
    for i in 0..SCAN_POINTS {
        let lam = (ln_lo + step * i as f64).exp();
        let g = g_eval(lam, qtol)?;
        values.push((lam, g));
        if g > best.1 {
            best = (i, g);
        }
    }
    if best.0 == 0 || best.0 == SCAN_POINTS - 1 {
        return Err(PlanarError::ScanBoundary {
            lambda: values[best.0].0,
            lo: SCAN_LO,
            hi: SCAN_HI,
        });
    }
    // Golden-section in log(lambda) to relative width 1e-6.
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut lo = values[best.0 - 1].0.ln();
    let mut hi = values[best.0 + 1].0.ln();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g_eval(x1.exp(), qtol)?;
    let mut f2 = g_eval(x2.exp(), qtol)?;
    while hi - lo > 1e-6 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g_eval(x2.exp(), qtol)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g_eval(x1.exp(), qtol)?;
        }
    }
    let lam_star = (0.5 * (lo + hi)).exp();
    let g_star = g_eval(lam_star, qtol)?;
    Ok((lam_star, g_star))
}

/// Find the instability window of `(alpha, c)`, if any.
///
/// Maximizes `G`, then bisects `c G(r/c) = alpha` on both sides of the
/// maximizer down to relative width `tol`, and certifies the result:
/// Unstable at `r_star`, Stable at `a/2` and `2b`.
pub fn find_window(
    params: &PlanarParams,
    tol: f64,
) -> Result<Option<InstabilityWindow>, PlanarError> {
    let tol = if tol > 0.0 && tol.is_finite() { tol } else { DEFAULT_WINDOW_TOL };
    let qtol = tol.clamp(1e-12, 1e-9);
    let (lam_star, g_star) = g_max(tol)?;
    let peak_exponent = params.c * g_star - params.alpha;
    if peak_exponent <= tol {
        return Ok(None);
    }
    let target = params.alpha / params.c;
    let exponent_sign = |lam: f64| -> Result<f64, PlanarError> {
        Ok(g_eval(lam, qtol)? - target)
    };

    // Grid brackets on both flanks of the maximizer.
    let ln_lo = SCAN_LO.ln();
    let ln_hi = SCAN_HI.ln();
    let step = (ln_hi - ln_lo) / (SCAN_POINTS - 1) as f64;
    let mut left_bracket = None;
    let mut lam = lam_star;
    while lam > SCAN_LO {
        lam = (lam.ln() - step).exp();
        if exponent_sign(lam)? < 0.0 {
            left_bracket = Some(lam);
            break;
        }
    }
    let mut right_bracket = None;
    lam = lam_star;
    while lam < SCAN_HI {
        lam = (lam.ln() + step).exp();
        if exponent_sign(lam)? < 0.0 {
            right_bracket = Some(lam);
            break;
        }
    }
    let (left, right) = match (left_bracket, right_bracket) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(PlanarError::ScanBoundary {
                lambda: lam_star,
                lo: SCAN_LO,
                hi: SCAN_HI,
            })
        }
    };

    let bisect = |mut neg: f64, mut pos: f64| -> Result<f64, PlanarError> {
        // Invariant: exponent < 0 at `neg`, > 0 at `pos`.
        loop {
            let mid = (neg * pos).sqrt();
            if (neg - pos).abs() <= tol * mid {
                return Ok(mid);
            }
            if exponent_sign(mid)? < 0.0 {
                neg = mid;
            } else {
                pos = mid;
            }
        }
    };
    let a = params.c * bisect(left, lam_star)?;
    let b = params.c * bisect(right, lam_star)?;
    let r_star = params.c * lam_star;

    // Certification.
    let at_peak = classify(params, r_star, tol)?;
    let below = classify(params, 0.5 * a, tol)?;
    let above = classify(params, 2.0 * b, tol)?;
    if at_peak.tag != Verdict::Unstable {
        return Err(PlanarError::CertificationFailed(format!(
            "exponent at r_star = {r_star} is {}",
            at_peak.analytic_exponent
        )));
    }
    if below.tag != Verdict::Stable || above.tag != Verdict::Stable {
        return Err(PlanarError::CertificationFailed(format!(
            "exponent not negative outside the window: {} at a/2, {} at 2b",
            below.analytic_exponent, above.analytic_exponent
        )));
    }
    Ok(Some(InstabilityWindow {
        a,
        b,
        r_star,
        peak_exponent,
    }))
}

fn distance_to_quarter(theta: f64) -> f64 {
    let (t, _) = reduce_angle(theta);
    (-t).min(t + FRAC_PI_2)
}

/// Max-absolute residual of the stationarity equation `L* p = 0` over a
/// grid, at `c = 1`, `r = lambda` (the residual is invariant under joint
/// scaling of `c` and `r`).
///
/// The transport term is evaluated through the closed-form derivative
/// identity and the jump term through the density evaluator, so the residual
/// measures the mutual consistency of the two quadrature routes; it is zero
/// in exact arithmetic.
pub fn stationarity_residual(lambda: f64, grid: &[f64]) -> Result<f64, PlanarError> {
    stationarity_residual_scaled(lambda, grid, 1.0)
}

/// As [`stationarity_residual`], with `p0` multiplied by `p0_scale`
/// (sensitivity experiments use a value slightly away from 1).
pub fn stationarity_residual_scaled(
    lambda: f64,
    grid: &[f64],
    p0_scale: f64,
) -> Result<f64, PlanarError> {
    check_lambda(lambda)?;
    let density = AngularDensity::new(lambda, 1e-12)?;
    let c_value = density.c_value();
    let mut max_res = 0.0f64;
    for &theta in grid {
        if distance_to_quarter(theta) < 1e-3 {
            return Err(PlanarError::GridTooClose(theta));
        }
        let (t, _) = reduce_angle(theta);
        let dh = h_deriv(t, lambda)?;
        let p0 = p0_scale * density.density(t, 0)?;
        let p1 = density.density(t, 1)?;
        // d/dtheta (sin^2 p0) = scale * C * lambda * H'; jump term completes L*.
        let res0 = p0_scale * c_value * lambda * dh + lambda * (p1 - p0);
        // d/dtheta (cos^2 p1) = -C * lambda * H'.
        let res1 = -c_value * lambda * dh + lambda * (p0 - p1);
        max_res = max_res.max(res0.abs()).max(res1.abs());
    }
    Ok(max_res)
}
