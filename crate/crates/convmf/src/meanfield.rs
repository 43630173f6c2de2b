//! Scalar mean-field theory of signal propagation.
//!
//! In the infinite-channel limit, the pre-activations of a random network
//! are Gaussian processes, and a single input is summarized by its variance
//! q while a pair of inputs is summarized by (q, c) with c the correlation.
//! One layer acts on these scalars through the variance/correlation map
//!
//! ```text
//! C(q, c) = σ_w² · E[φ(z₁) φ(z₂)] + σ_b²,   (z₁, z₂) ~ N(0, [[q, qc], [qc, q]])
//! ```
//!
//! This module finds the fixed points q* = C(q*, 1) and c* of c ↦ C(q*, c)/q*,
//! and the three slope constants of the map's linearization at the fixed
//! point:
//!
//! * `chi_c`  = σ_w²·E[φ′(z₁)φ′(z₂)] — the off-diagonal (correlation) slope;
//!   evaluated at (q*, 1) it is the order/chaos parameter χ₁,
//! * `chi_q`  = σ_w²·E[φ″(z)φ(z) + φ′(z)²] — the diagonal (variance) slope,
//! * `kappa`  = (σ_w²/2)·E[φ(z₁)φ″(z₂)] — the cross coefficient coupling
//!   off-diagonal perturbations back into the diagonal.
//!
//! All expectations go through the quadrature rules of [`crate::quadrature`];
//! every solver uses plain fixed-point iteration (damped for the correlation
//! map, which can be marginal), with tolerances tight enough that downstream
//! depth-scale computations are limited by theory, not by the solver.

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureRule};

/// Default solver tolerance (absolute, on the fixed-point residual).
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration budget for the fixed-point solvers.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Once a zero-bias variance iteration has decayed monotonically below this
/// floor, no attracting fixed point can sit meaningfully above zero and the
/// iteration is declared collapsed.
const COLLAPSE_FLOOR: f64 = 1e-3;
/// Variance iterates beyond this are treated as divergent (possible for
/// unbounded activations in the chaotic phase).
const DIVERGENCE_CEILING: f64 = 1e12;
/// Interior starting point for the correlation-map solver.
const C_INIT: f64 = 0.5;

/// The two variances defining a random network layer, plus its activation.
#[derive(Debug, Clone, Copy)]
pub struct MeanFieldParams {
    /// Weight variance σ_w² (weights drawn with variance σ_w²/fan-in).
    pub sigma_w_sq: f64,
    /// Bias variance σ_b².
    pub sigma_b_sq: f64,
    /// Activation profile φ, φ′, φ″.
    pub activation: ActivationProfile,
}

impl MeanFieldParams {
    /// Validated constructor: both variances must be finite and nonnegative.
    pub fn new(sigma_w_sq: f64, sigma_b_sq: f64, activation: ActivationProfile) -> Result<Self> {
        for (name, v) in [("sigma_w_sq", sigma_w_sq), ("sigma_b_sq", sigma_b_sq)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite nonnegative real, got {v}"
                )));
            }
        }
        Ok(Self {
            sigma_w_sq,
            sigma_b_sq,
            activation,
        })
    }
}

/// Fixed-point data of the mean-field map at given parameters.
#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    /// Fixed-point variance q*.
    pub q_star: f64,
    /// Fixed-point correlation c* (1 in the ordered phase, < 1 in chaos).
    pub c_star: f64,
    /// Diagonal slope χ_q at q*.
    pub chi_q: f64,
    /// Off-diagonal slope χ_c at (q*, c*).
    pub chi_c: f64,
    /// Cross coefficient κ at (q*, c*).
    pub kappa: f64,
}

impl CriticalPoint {
    /// Solve for the full fixed-point data with default solver settings.
    pub fn solve(params: &MeanFieldParams) -> Result<Self> {
        Self::solve_with(params, DEFAULT_TOL, DEFAULT_MAX_ITER)
    }

    /// Solve for the full fixed-point data with explicit solver settings.
    pub fn solve_with(params: &MeanFieldParams, tol: f64, max_iter: usize) -> Result<Self> {
        let q_star = solve_q_star(params, 1.0, tol, max_iter)?;
        let c_star = solve_c_star(params, q_star, tol, max_iter)?;
        Ok(Self {
            q_star,
            c_star,
            chi_q: chi_q(params, q_star)?,
            chi_c: chi_c(params, q_star, c_star)?,
            kappa: kappa(params, q_star, c_star)?,
        })
    }
}

fn check_q(name: &str, q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be a finite nonnegative real, got {q}"
        )));
    }
    Ok(())
}

/// One application of the variance/correlation map: C(q, c) for the
/// covariance [[q, qc], [qc, q]], using the shared default quadrature rule.
pub fn cmap_scalar(params: &MeanFieldParams, q_diag: f64, c: f64) -> Result<f64> {
    cmap_scalar_with_rule(params, q_diag, c, QuadratureRule::default_rule())
}

/// [`cmap_scalar`] with an explicit quadrature rule (used to verify
/// quadrature convergence; everything else should use the default).
pub fn cmap_scalar_with_rule(
    params: &MeanFieldParams,
    q_diag: f64,
    c: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !q_diag.is_finite() || q_diag <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "q_diag must be a finite positive real, got {q_diag}"
        )));
    }
    let phi = params.activation.value;
    let corr = quadrature::gaussian_separable_expectation(phi, phi, q_diag, q_diag, c, rule)?;
    Ok(params.sigma_w_sq * corr + params.sigma_b_sq)
}

/// Outcome of the raw variance iteration, converged or not.
struct QIteration {
    q: f64,
    converged: bool,
    iterations: usize,
    residual: f64,
}

/// Iterate q ← C(q, 1), with two escape hatches: a degenerate collapse to
/// exactly 0 (zero bias, iterates decaying monotonically through
/// [`COLLAPSE_FLOOR`]), and early exit on divergence for unbounded
/// activations.
fn iterate_q(
    params: &MeanFieldParams,
    q_init: f64,
    tol: f64,
    max_iter: usize,
) -> Result<QIteration> {
    let mut q = q_init;
    let mut monotone_down = true;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = cmap_scalar(params, q, 1.0)?;
        residual = (next - q).abs();
        if !next.is_finite() || next > DIVERGENCE_CEILING {
            return Ok(QIteration {
                q,
                converged: false,
                iterations: it,
                residual,
            });
        }
        if next > q {
            monotone_down = false;
        }
        if residual < tol {
            return Ok(QIteration {
                q: next,
                converged: true,
                iterations: it,
                residual,
            });
        }
        q = next;
        if params.sigma_b_sq == 0.0 && monotone_down && q < COLLAPSE_FLOOR {
            // With zero bias the map fixes 0, and a monotone decay through
            // the floor means any attracting fixed point sits below it —
            // which happens only within ~2e-3 of criticality. Snap to the
            // exact degenerate fixed point instead of crawling toward it.
            return Ok(QIteration {
                q: 0.0,
                converged: true,
                iterations: it,
                residual: 0.0,
            });
        }
    }
    Ok(QIteration {
        q,
        converged: false,
        iterations: max_iter,
        residual,
    })
}

/// Fixed-point variance q* = C(q*, 1), by fixed-point iteration from
/// `q_init`.
///
/// Returns exactly 0 when the iteration collapses degenerately (zero bias
/// variance, iterates decaying monotonically below 1e-3): zero is then a
/// true fixed point, and an attracting positive one can exist only within
/// ~2e-3 of the critical line, closer than the iteration could resolve.
pub fn solve_q_star(
    params: &MeanFieldParams,
    q_init: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if !q_init.is_finite() || q_init <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "q_init must be a finite positive real, got {q_init}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let it = iterate_q(params, q_init, tol, max_iter)?;
    if it.converged {
        Ok(it.q)
    } else {
        Err(Error::NonConvergence {
            last: it.q,
            residual: it.residual,
            iterations: it.iterations,
        })
    }
}

/// Fixed-point correlation c* of the map c ↦ C(q*, c)/q*.
///
/// Returns 1 when χ_c(q*, 1) ≤ 1 (c = 1 is then the stable fixed point:
/// ordered phase) and otherwise iterates from an interior start, damping the
/// step whenever the update direction flips. For the degenerate q* = 0 the
/// convention c* = 1 is returned.
pub fn solve_c_star(params: &MeanFieldParams, q_star: f64, tol: f64, max_iter: usize) -> Result<f64> {
    check_q("q_star", q_star)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if q_star == 0.0 {
        return Ok(1.0);
    }
    if chi_c(params, q_star, 1.0)? <= 1.0 {
        return Ok(1.0);
    }
    let mut c = C_INIT;
    let mut prev_delta = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mapped = (cmap_scalar(params, q_star, c)? / q_star).clamp(-1.0, 1.0);
        let delta = mapped - c;
        residual = delta.abs();
        if residual < tol {
            return Ok(mapped);
        }
        // A sign flip in the update means we are hopping across the fixed
        // point; halving the step restores monotone convergence.
        let next = if prev_delta * delta < 0.0 {
            0.5 * (c + mapped)
        } else {
            mapped
        };
        prev_delta = delta;
        c = next;
    }
    Err(Error::NonConvergence {
        last: c,
        residual,
        iterations: max_iter,
    })
}

/// Off-diagonal slope χ_c(q, c) = σ_w²·E[φ′(z₁)φ′(z₂)] at covariance
/// [[q, qc], [qc, q]].
///
/// Equals the derivative of the correlation map c ↦ C(q, c)/q at any (q, c);
/// at (q*, 1) it is the order/chaos parameter χ₁. The degenerate q = 0 is
/// evaluated in closed form as σ_w²·φ′(0)².
pub fn chi_c(params: &MeanFieldParams, q_star: f64, c: f64) -> Result<f64> {
    check_q("q_star", q_star)?;
    if q_star == 0.0 {
        let d = (params.activation.deriv1)(0.0);
        return Ok(params.sigma_w_sq * d * d);
    }
    let d1 = params.activation.deriv1;
    let e = quadrature::gaussian_separable_expectation(
        d1,
        d1,
        q_star,
        q_star,
        c,
        QuadratureRule::default_rule(),
    )?;
    Ok(params.sigma_w_sq * e)
}

/// Diagonal slope χ_q(q) = σ_w²·E[φ″(z)φ(z) + φ′(z)²], the derivative of
/// q ↦ C(q, 1) at q. The degenerate q = 0 is evaluated in closed form.
pub fn chi_q(params: &MeanFieldParams, q_star: f64) -> Result<f64> {
    check_q("q_star", q_star)?;
    let a = params.activation;
    if q_star == 0.0 {
        let d = (a.deriv1)(0.0);
        return Ok(params.sigma_w_sq * ((a.deriv2)(0.0) * (a.value)(0.0) + d * d));
    }
    let e = quadrature::gaussian_expectation(
        |z| (a.deriv2)(z) * (a.value)(z) + (a.deriv1)(z) * (a.deriv1)(z),
        q_star,
        QuadratureRule::default_rule(),
    )?;
    Ok(params.sigma_w_sq * e)
}

/// Cross coefficient κ = (σ_w²/2)·E[φ(z₁)φ″(z₂)] at covariance
/// [[q*, q*c*], [q*c*, q*]]. Zero for linear activations; the degenerate
/// q* = 0 is evaluated in closed form as (σ_w²/2)·φ(0)φ″(0).
pub fn kappa(params: &MeanFieldParams, q_star: f64, c_star: f64) -> Result<f64> {
    check_q("q_star", q_star)?;
    let a = params.activation;
    if q_star == 0.0 {
        return Ok(0.5 * params.sigma_w_sq * (a.value)(0.0) * (a.deriv2)(0.0));
    }
    let e = quadrature::gaussian_separable_expectation(
        a.value,
        a.deriv2,
        q_star,
        q_star,
        c_star,
        QuadratureRule::default_rule(),
    )?;
    Ok(0.5 * params.sigma_w_sq * e)
}

/// The critical weight variance: the σ_w² at which χ₁ = χ_c(q*(σ_w²), 1)
/// crosses 1 for the given bias variance, located by bisection to within
/// `tol`.
///
/// The bracket starts at [0, 4] and the upper end doubles (up to 1024) until
/// it sees χ₁ > 1; a bracket with no sign change is reported as an error.
/// The χ₁ evaluations tolerate an unconverged variance iteration by using
/// its best iterate — necessary e.g. for linear activations, whose q*
/// diverges at the boundary while χ₁ = σ_w² stays exact.
pub fn critical_sigma_w(
    activation: ActivationProfile,
    sigma_b_sq: f64,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tol must be a positive finite real, got {tol}"
        )));
    }
    let chi1 = |sigma_w_sq: f64| -> Result<f64> {
        let params = MeanFieldParams::new(sigma_w_sq, sigma_b_sq, activation)?;
        let it = iterate_q(&params, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        chi_c(&params, it.q, 1.0)
    };

    let mut lo = 0.0;
    let mut glo = chi1(lo)? - 1.0;
    let mut hi = 4.0;
    let mut ghi = chi1(hi)? - 1.0;
    while ghi <= 0.0 && hi < 1024.0 {
        hi *= 2.0;
        ghi = chi1(hi)? - 1.0;
    }
    if glo * ghi > 0.0 {
        return Err(Error::BracketFailure { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gmid = chi1(mid)? - 1.0;
        if gmid == 0.0 {
            return Ok(mid);
        }
        if (gmid > 0.0) == (ghi > 0.0) {
            hi = mid;
            ghi = gmid;
        } else {
            lo = mid;
            glo = gmid;
        }
    }
    let _ = glo;
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn tanh_params(sigma_w_sq: f64, sigma_b_sq: f64) -> MeanFieldParams {
        MeanFieldParams::new(sigma_w_sq, sigma_b_sq, ActivationProfile::tanh()).unwrap()
    }

    fn erf_params(sigma_w_sq: f64, sigma_b_sq: f64) -> MeanFieldParams {
        MeanFieldParams::new(sigma_w_sq, sigma_b_sq, ActivationProfile::erf()).unwrap()
    }

    fn linear_params(sigma_w_sq: f64, sigma_b_sq: f64) -> MeanFieldParams {
        MeanFieldParams::new(sigma_w_sq, sigma_b_sq, ActivationProfile::linear()).unwrap()
    }

    /// Monte-Carlo oracle for σ_w²·E[f(z₁)g(z₂)] + shift at equal variances.
    /// Returns (mean, standard error).
    fn mc_correlator(
        f: impl Fn(f64) -> f64,
        g: impl Fn(f64) -> f64,
        q: f64,
        c: f64,
        scale: f64,
        shift: f64,
        samples: usize,
        seed: u64,
    ) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let root = (1.0 - c * c).sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let u1: f64 = rng.sample(StandardNormal);
            let u2: f64 = rng.sample(StandardNormal);
            let z1 = q.sqrt() * u1;
            let z2 = q.sqrt() * (c * u1 + root * u2);
            let v = scale * f(z1) * g(z2) + shift;
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }

    /// Closed form of the erf correlation map (verified against Monte-Carlo
    /// in `erf_closed_form_is_trustworthy` before use as an oracle).
    fn erf_cmap_closed(params: &MeanFieldParams, q: f64, c: f64) -> f64 {
        params.sigma_w_sq * (2.0 / std::f64::consts::PI) * (2.0 * q * c / (1.0 + 2.0 * q)).asin()
            + params.sigma_b_sq
    }

    // ---- cmap_scalar ------------------------------------------------------

    #[test]
    fn cmap_linear_is_affine() {
        let p = linear_params(0.5, 0.5);
        let v = cmap_scalar(&p, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-13);
        // General (q, c): C = σ_w²·qc + σ_b² for the identity activation.
        let v = cmap_scalar(&p, 2.0, 0.25).unwrap();
        assert_relative_eq!(v, 0.5 * 2.0 * 0.25 + 0.5, epsilon = 1e-13);
    }

    #[test]
    fn cmap_tanh_has_unit_slope_at_zero_variance() {
        let p = tanh_params(1.0, 0.0);
        let q = 1e-8;
        let v = cmap_scalar(&p, q, 1.0).unwrap();
        assert!((v / q - 1.0).abs() < 1e-6, "C(q)/q = {}", v / q);
    }

    #[test]
    fn cmap_erf_matches_monte_carlo() {
        let p = erf_params(2.25, 0.25);
        let v = cmap_scalar(&p, 1.0, 0.3).unwrap();
        let (mc, se) = mc_correlator(
            libm::erf, libm::erf, 1.0, 0.3, 2.25, 0.25, 10_000_000, 0xc0ffee,
        );
        assert!((v - mc).abs() < 3.0 * se, "{v} vs {mc} ± {se}");
    }

    #[test]
    fn erf_closed_form_is_trustworthy() {
        // Validate the arcsine closed form against Monte-Carlo once...
        let p = erf_params(2.25, 0.25);
        let closed = erf_cmap_closed(&p, 1.2, 0.4);
        let (mc, se) = mc_correlator(
            libm::erf, libm::erf, 1.2, 0.4, 2.25, 0.25, 10_000_000, 0xfeed,
        );
        assert!((closed - mc).abs() < 3.0 * se, "{closed} vs {mc} ± {se}");

        // ...then hold cmap_scalar to it at 1e-8 across the (q, c) range.
        for &q in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            for &c in &[-1.0, -0.5, 0.0, 0.3, 0.9, 1.0] {
                let got = cmap_scalar(&p, q, c).unwrap();
                let want = erf_cmap_closed(&p, q, c);
                assert!(
                    (got - want).abs() < 1e-8,
                    "q={q} c={c}: {got} vs {want} (diff {:e})",
                    got - want
                );
            }
        }
    }

    #[test]
    fn cmap_is_monotone_in_c_for_monotone_activations() {
        let p = tanh_params(1.8, 0.2);
        for i in 0..20 {
            let q = 0.2 + 4.0 * i as f64 / 20.0;
            let mut prev = f64::NEG_INFINITY;
            for j in 0..20 {
                let c = j as f64 / 19.0;
                let v = cmap_scalar(&p, q, c).unwrap();
                assert!(v >= prev - 1e-13, "q={q}, c={c}: {v} < {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn cmap_is_stable_under_quadrature_refinement() {
        let doubled_panels = QuadratureRule::composite(24, 24, 8.6).unwrap();
        let doubled_order = QuadratureRule::composite(12, 48, 8.6).unwrap();
        let p = tanh_params(1.5, 0.1);
        for &q in &[0.5, 2.0, 10.0] {
            for &c in &[0.3, 1.0] {
                let v0 = cmap_scalar(&p, q, c).unwrap();
                let v1 = cmap_scalar_with_rule(&p, q, c, &doubled_panels).unwrap();
                let v2 = cmap_scalar_with_rule(&p, q, c, &doubled_order).unwrap();
                assert!((v0 - v1).abs() < 1e-10, "panels q={q} c={c}: {:e}", v0 - v1);
                assert!((v0 - v2).abs() < 1e-10, "order q={q} c={c}: {:e}", v0 - v2);
            }
        }
    }

    #[test]
    fn cmap_rejects_nonpositive_variance() {
        let p = tanh_params(1.0, 0.0);
        assert!(matches!(
            cmap_scalar(&p, 0.0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            cmap_scalar(&p, -1.0, 0.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    // ---- solve_q_star -----------------------------------------------------

    #[test]
    fn q_star_linear_closed_form() {
        // q* = σ_b² / (1 − σ_w²) for the identity activation.
        let p = linear_params(0.5, 0.5);
        let q = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((q - 1.0).abs() < 10.0 * DEFAULT_TOL);
    }

    #[test]
    fn q_star_collapses_to_zero_at_tanh_criticality() {
        let p = tanh_params(1.0, 0.0);
        let q = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(q, 0.0);
        // Also from the ordered side, where the decay is fast.
        let p = tanh_params(0.5, 0.0);
        let q = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn q_star_matches_bisection_oracle_in_chaos() {
        let p = tanh_params(2.0, 0.1);
        let got = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();

        // Independent oracle: bisection on q ↦ C(q, 1) − q.
        let f = |q: f64| cmap_scalar(&p, q, 1.0).unwrap() - q;
        let (mut lo, mut hi) = (0.05, 5.0);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((got - oracle).abs() < 1e-8, "{got} vs oracle {oracle}");
    }

    #[test]
    fn q_star_is_independent_of_initialization() {
        for p in [tanh_params(0.8, 0.05), tanh_params(2.5, 0.1)] {
            let reference = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            for &q0 in &[0.1, 1.0, 10.0] {
                let q = solve_q_star(&p, q0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
                assert!(
                    (q - reference).abs() < 10.0 * DEFAULT_TOL,
                    "q0={q0}: {q} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn q_star_reports_divergence_for_linear_chaos() {
        // σ_w² > 1 with identity activation: the variance iteration diverges.
        let p = linear_params(1.5, 0.5);
        match solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Err(Error::NonConvergence { last, .. }) => assert!(last > 1.0),
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    // ---- solve_c_star -----------------------------------------------------

    #[test]
    fn c_star_is_one_in_the_ordered_phase() {
        let p = linear_params(0.5, 0.5);
        let c = solve_c_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn c_star_is_interior_in_the_chaotic_phase() {
        let p = tanh_params(4.25, 0.05);
        let q_star = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let c_star = solve_c_star(&p, q_star, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(c_star < 1.0, "c* = {c_star}");
        assert!(c_star > -1.0);

        // Multi-start oracle: iterate the raw map to convergence from ten
        // random interior starts; all runs must land on the same point.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let mut c: f64 = rng.random_range(-0.99..0.99);
            for _ in 0..200_000 {
                let next = (cmap_scalar(&p, q_star, c).unwrap() / q_star).clamp(-1.0, 1.0);
                if (next - c).abs() < 1e-14 {
                    break;
                }
                c = next;
            }
            assert!((c - c_star).abs() < 1e-8, "start landed on {c} vs {c_star}");
        }
    }

    #[test]
    fn c_star_convention_at_degenerate_variance() {
        let p = tanh_params(1.0, 0.0);
        assert_eq!(solve_c_star(&p, 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(), 1.0);
    }

    // ---- slope constants --------------------------------------------------

    #[test]
    fn chi_c_linear_is_weight_variance() {
        let p = linear_params(0.7, 0.3);
        assert_relative_eq!(chi_c(&p, 2.0, 0.5).unwrap(), 0.7, epsilon = 1e-13);
        assert_relative_eq!(chi_c(&p, 0.0, 1.0).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn chi_c_at_degenerate_variance_is_slope_squared() {
        // φ′(0) = 1 for tanh: χ₁ → σ_w² as q* → 0, so χ₁ = 1 at σ_w² = 1.
        let p = tanh_params(1.0, 0.0);
        assert_relative_eq!(chi_c(&p, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn chi_c_matches_correlation_map_derivative_at_one() {
        let p = tanh_params(1.5, 0.05);
        let q_star = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let chi = chi_c(&p, q_star, 1.0).unwrap();
        // One-sided second-order stencil at the boundary c = 1.
        let h = 1e-4;
        let g = |c: f64| cmap_scalar(&p, q_star, c).unwrap() / q_star;
        let fd = (3.0 * g(1.0) - 4.0 * g(1.0 - h) + g(1.0 - 2.0 * h)) / (2.0 * h);
        assert!((chi - fd).abs() < 1e-5, "{chi} vs fd {fd}");
    }

    #[test]
    fn chi_c_matches_finite_differences_at_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..50 {
            let p = tanh_params(rng.random_range(0.3..3.0), rng.random_range(0.0..0.5));
            let q: f64 = rng.random_range(0.05..4.0);
            let c: f64 = rng.random_range(-0.9..0.9);
            let chi = chi_c(&p, q, c).unwrap();
            let h = 1e-4;
            let g = |c: f64| cmap_scalar(&p, q, c).unwrap() / q;
            let fd = (g(c + h) - g(c - h)) / (2.0 * h);
            assert!(
                (chi - fd).abs() < 1e-5 * chi.abs().max(1.0),
                "σ_w²={}, q={q}, c={c}: {chi} vs {fd}",
                p.sigma_w_sq
            );
        }
    }

    #[test]
    fn chi_q_linear_is_weight_variance() {
        let p = linear_params(0.7, 0.3);
        assert_relative_eq!(chi_q(&p, 2.0).unwrap(), 0.7, epsilon = 1e-13);
        assert_relative_eq!(chi_q(&p, 0.0).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn chi_q_at_degenerate_variance() {
        // φ″(0) = 0 and φ′(0) = 1 for tanh: χ_q → σ_w².
        let p = tanh_params(1.7, 0.0);
        assert_relative_eq!(chi_q(&p, 0.0).unwrap(), 1.7, epsilon = 1e-15);
    }

    #[test]
    fn chi_q_matches_variance_map_derivative() {
        let p = tanh_params(2.0, 0.1);
        let q_star = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let chi = chi_q(&p, q_star).unwrap();
        let h = 1e-5 * q_star.max(1.0);
        let fd = (cmap_scalar(&p, q_star + h, 1.0).unwrap()
            - cmap_scalar(&p, q_star - h, 1.0).unwrap())
            / (2.0 * h);
        assert!((chi - fd).abs() < 1e-5, "{chi} vs fd {fd}");
    }

    #[test]
    fn kappa_vanishes_for_linear_and_for_independent_odd_activations() {
        let p = linear_params(0.7, 0.3);
        assert_eq!(kappa(&p, 2.0, 0.5).unwrap(), 0.0);

        // Odd φ at c = 0: E[φ(z₁)φ″(z₂)] factorizes into two odd means.
        let p = tanh_params(1.5, 0.5);
        let q_star = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(kappa(&p, q_star, 0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn kappa_matches_monte_carlo() {
        let p = tanh_params(1.5, 0.5);
        let q_star = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let c_star = solve_c_star(&p, q_star, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let got = kappa(&p, q_star, c_star).unwrap();
        let phi_dd = |z: f64| {
            let t = z.tanh();
            -2.0 * t * (1.0 - t * t)
        };
        let (mc, se) = mc_correlator(
            f64::tanh, phi_dd, q_star, c_star, 0.5 * 1.5, 0.0, 10_000_000, 0xabba,
        );
        assert!((got - mc).abs() < 3.0 * se, "{got} vs {mc} ± {se}");
    }

    // ---- critical_sigma_w -------------------------------------------------

    #[test]
    fn critical_line_hits_one_at_zero_bias() {
        let got = critical_sigma_w(ActivationProfile::tanh(), 0.0, 1e-8).unwrap();
        assert!((got - 1.0).abs() < 1e-8, "critical σ_w² = {got}");
    }

    #[test]
    fn critical_line_for_linear_is_one_at_any_bias() {
        // χ₁ = σ_w² independently of q, even though q* itself diverges as
        // σ_w² → 1 (the bisection must survive that non-convergence).
        let got = critical_sigma_w(ActivationProfile::linear(), 0.5, 1e-8).unwrap();
        assert!((got - 1.0).abs() < 1e-8, "critical σ_w² = {got}");
    }

    #[test]
    fn critical_line_matches_grid_scan() {
        let sigma_b_sq = 0.05;
        let got = critical_sigma_w(ActivationProfile::tanh(), sigma_b_sq, 1e-6).unwrap();

        // Independent oracle: dense scan of χ₁ over σ_w² ∈ [0, 4], step 1e-3,
        // locating the first grid point past the crossing.
        let chi1 = |sw: f64| {
            let p = tanh_params(sw, sigma_b_sq);
            let q = solve_q_star(&p, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            chi_c(&p, q, 1.0).unwrap()
        };
        let step = 1e-3;
        let mut crossing = None;
        for i in 1..=4000 {
            let sw = i as f64 * step;
            if chi1(sw) >= 1.0 {
                crossing = Some(sw);
                break;
            }
        }
        let crossing = crossing.expect("χ₁ must cross 1 below σ_w² = 4");
        assert!(
            (got - crossing).abs() <= step,
            "bisection {got} vs grid {crossing}"
        );
    }

    #[test]
    fn bracket_failure_is_reported() {
        // An activation with φ′ ≡ 0 never reaches χ₁ = 1.
        let flat = ActivationProfile {
            name: "flat",
            value: |_| 0.5,
            deriv1: |_| 0.0,
            deriv2: |_| 0.0,
        };
        assert!(matches!(
            critical_sigma_w(flat, 0.1, 1e-6),
            Err(Error::BracketFailure { .. })
        ));
    }

    // ---- CriticalPoint ----------------------------------------------------

    #[test]
    fn critical_point_is_self_consistent() {
        for p in [tanh_params(1.5, 0.05), tanh_params(4.25, 0.05), erf_params(2.25, 0.25)] {
            let cp = CriticalPoint::solve(&p).unwrap();
            // q* is a fixed point of the variance map.
            let residual = cmap_scalar(&p, cp.q_star, 1.0).unwrap() - cp.q_star;
            assert!(residual.abs() < 1e-10, "residual {residual:e}");
            // Phase dichotomy: χ₁ ≤ 1 ⟺ c* = 1.
            let chi1 = chi_c(&p, cp.q_star, 1.0).unwrap();
            if chi1 <= 1.0 {
                assert_eq!(cp.c_star, 1.0);
            } else {
                assert!(cp.c_star < 1.0);
            }
            // Components agree with the standalone operations.
            assert_relative_eq!(cp.chi_q, chi_q(&p, cp.q_star).unwrap(), epsilon = 1e-14);
            assert_relative_eq!(
                cp.chi_c,
                chi_c(&p, cp.q_star, cp.c_star).unwrap(),
                epsilon = 1e-14
            );
            assert_relative_eq!(
                cp.kappa,
                kappa(&p, cp.q_star, cp.c_star).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn params_validation() {
        assert!(MeanFieldParams::new(-1.0, 0.0, ActivationProfile::tanh()).is_err());
        assert!(MeanFieldParams::new(1.0, f64::NAN, ActivationProfile::tanh()).is_err());
        assert!(matches!(
            solve_q_star(&tanh_params(1.0, 0.1), -1.0, 1e-12, 100),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            solve_c_star(&tanh_params(1.0, 0.1), 1.0, -1e-12, 100),
            Err(Error::InvalidParameter(_))
        ));
    }
}
