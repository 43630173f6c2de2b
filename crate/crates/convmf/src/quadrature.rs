//! Gaussian quadrature for expectations under one- and two-dimensional
//! normal measure.
//!
//! Everything here uses the physicists' convention: a rule integrates
//! against the weight e^{-x²}, so the weights of a valid rule sum to √π and
//! an expectation under N(0, q) is obtained by the substitution z = √(2q)·x
//! followed by division by √π (one factor per axis).
//!
//! Two constructions are provided:
//!
//! * [`QuadratureRule::gauss_hermite`] — classical Gauss–Hermite nodes and
//!   weights via the Golub–Welsch eigenvalue method. Spectrally accurate for
//!   entire integrands (polynomials, erf), but for functions with
//!   complex-plane poles near the real axis (tanh has poles at ±iπ/2, which
//!   the substitution z = √(2q)·x drags toward the real axis as q grows) a
//!   few hundred Hermite points cannot reach 1e-12 once q is of order 10.
//!
//! * [`QuadratureRule::composite`] — a composite Gauss–Legendre rule on
//!   [−R, R] with the Gaussian weight folded into the quadrature weights.
//!   Panelization keeps each panel's integrand polynomial-like no matter how
//!   sharp the substituted integrand becomes, so the accuracy is uniform
//!   over the variance range the fixed-point solvers visit. The shared
//!   default ([`QuadratureRule::default_rule`]) is a 12-panel × 24-node
//!   composite rule with R = 8.6: it reproduces Gaussian moments to machine
//!   precision, and doubling either the panel count or the per-panel order
//!   moves bounded-activation expectations by ≲ 1e-14 for variances up
//!   to 10.
//!
//! The truncation radius R = 8.6 discards Gaussian tail mass of order 1e-33
//! — negligible against the 1e-12 tolerances used elsewhere, even for
//! integrands with polynomial growth.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default truncation radius for the composite rule.
pub const DEFAULT_RADIUS: f64 = 8.6;
/// Default panel count for the composite rule.
pub const DEFAULT_PANELS: usize = 12;
/// Default Gauss–Legendre order per panel for the composite rule.
pub const DEFAULT_NODES_PER_PANEL: usize = 24;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Nodes and weights for integration against the weight e^{-x²} on the real
/// line.
///
/// Immutable after construction and freely shareable across threads.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Classical Gauss–Hermite rule of the given order (number of nodes).
    ///
    /// Nodes are the eigenvalues of the Jacobi matrix of the (physicists')
    /// Hermite recurrence; each weight is √π times the squared first
    /// component of the corresponding eigenvector (Golub–Welsch).
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter(
                "quadrature order must be positive".into(),
            ));
        }
        // Hermite recurrence off-diagonal: b_i = sqrt(i / 2).
        let offdiag: Vec<f64> = (1..order).map(|i| (i as f64 / 2.0).sqrt()).collect();
        let (nodes, first_components) = jacobi_eigen(&offdiag);
        let weights = first_components.iter().map(|v| SQRT_PI * v * v).collect();
        Ok(Self { nodes, weights })
    }

    /// Composite Gauss–Legendre rule on [−radius, radius] with the Gaussian
    /// weight e^{-x²} folded into the weights.
    pub fn composite(panels: usize, nodes_per_panel: usize, radius: f64) -> Result<Self> {
        if panels == 0 || nodes_per_panel == 0 {
            return Err(Error::InvalidParameter(
                "panel count and per-panel order must be positive".into(),
            ));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation radius must be a positive finite real, got {radius}"
            )));
        }
        // Legendre recurrence off-diagonal: b_i = i / sqrt(4 i² − 1); the
        // reference weights on [−1, 1] are 2 v₀².
        let offdiag: Vec<f64> = (1..nodes_per_panel)
            .map(|i| {
                let i = i as f64;
                i / (4.0 * i * i - 1.0).sqrt()
            })
            .collect();
        let (ref_nodes, first_components) = jacobi_eigen(&offdiag);
        let ref_weights: Vec<f64> = first_components.iter().map(|v| 2.0 * v * v).collect();

        let h = 2.0 * radius / panels as f64;
        let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(panels * nodes_per_panel);
        for p in 0..panels {
            let mid = -radius + (p as f64 + 0.5) * h;
            for (t, wt) in ref_nodes.iter().zip(&ref_weights) {
                let x = mid + 0.5 * h * t;
                nodes.push(x);
                weights.push(0.5 * h * wt * (-x * x).exp());
            }
        }
        Ok(Self { nodes, weights })
    }

    /// The shared default rule: composite, 12 panels × 24 nodes, R = 8.6.
    pub fn default_rule() -> &'static Self {
        use std::sync::OnceLock;
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| {
            Self::composite(DEFAULT_PANELS, DEFAULT_NODES_PER_PANEL, DEFAULT_RADIUS)
                .expect("default quadrature parameters are valid")
        })
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Quadrature nodes (abscissae for weight e^{-x²}).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights; positive, summing to √π.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Eigen-decomposition of a symmetric tridiagonal Jacobi matrix with zero
/// diagonal, returning (sorted eigenvalues, matching first eigenvector
/// components).
fn jacobi_eigen(offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = offdiag.len() + 1;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for (i, &b) in offdiag.iter().enumerate() {
        j[(i, i + 1)] = b;
        j[(i + 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let nodes = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let firsts = order.iter().map(|&i| eig.eigenvectors[(0, i)]).collect();
    (nodes, firsts)
}

fn check_variance(name: &str, q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be a finite nonnegative real, got {q}"
        )));
    }
    Ok(())
}

fn check_correlation(c: f64) -> Result<()> {
    if !c.is_finite() || c.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "correlation must lie in [-1, 1], got {c}"
        )));
    }
    Ok(())
}

fn finite_or_overflow(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericOverflow(format!(
            "{what} produced a non-finite value"
        )))
    }
}

/// E[f(z)] for z ~ N(0, q).
pub fn gaussian_expectation<F>(f: F, q: f64, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_variance("variance q", q)?;
    let s = (2.0 * q).sqrt();
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(s * x);
    }
    finite_or_overflow(acc / SQRT_PI, "gaussian_expectation")
}

/// E[f(z₁, z₂)] for the bivariate Gaussian with Var z₁ = q₁, Var z₂ = q₂ and
/// correlation c, parameterized as z₁ = √q₁·u₁, z₂ = √q₂·(c·u₁ + √(1−c²)·u₂)
/// with u₁, u₂ independent standard normals.
///
/// At |c| = 1 the distribution is degenerate and the integral collapses
/// exactly to a one-dimensional quadrature over u₁ — no √(1−c²) cancellation
/// is involved.
pub fn gaussian_pair_expectation<F>(
    f: F,
    q1: f64,
    q2: f64,
    c: f64,
    rule: &QuadratureRule,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    check_variance("variance q1", q1)?;
    check_variance("variance q2", q2)?;
    check_correlation(c)?;
    let s1 = (2.0 * q1).sqrt();
    let s2 = (2.0 * q2).sqrt();

    if c.abs() == 1.0 {
        let sign = c.signum();
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(s1 * x, sign * s2 * x);
        }
        return finite_or_overflow(acc / SQRT_PI, "gaussian_pair_expectation");
    }

    let root = (1.0 - c * c).sqrt();
    let mut acc = 0.0;
    for (x1, w1) in rule.nodes.iter().zip(&rule.weights) {
        let z1 = s1 * x1;
        let mean2 = s2 * c * x1;
        let mut inner = 0.0;
        for (x2, w2) in rule.nodes.iter().zip(&rule.weights) {
            inner += w2 * f(z1, mean2 + s2 * root * x2);
        }
        acc += w1 * inner;
    }
    finite_or_overflow(acc / (SQRT_PI * SQRT_PI), "gaussian_pair_expectation")
}

/// E[f(z₁)·g(z₂)] under the same bivariate Gaussian as
/// [`gaussian_pair_expectation`].
///
/// Product-form integrands are the crate's workhorse (activation
/// correlators); exploiting the factorization halves the integrand
/// evaluations of the generic path by hoisting f out of the inner loop.
pub fn gaussian_separable_expectation<F, G>(
    f: F,
    g: G,
    q1: f64,
    q2: f64,
    c: f64,
    rule: &QuadratureRule,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_variance("variance q1", q1)?;
    check_variance("variance q2", q2)?;
    check_correlation(c)?;
    let s1 = (2.0 * q1).sqrt();
    let s2 = (2.0 * q2).sqrt();

    if c.abs() == 1.0 {
        let sign = c.signum();
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(s1 * x) * g(sign * s2 * x);
        }
        return finite_or_overflow(acc / SQRT_PI, "gaussian_separable_expectation");
    }

    let root = (1.0 - c * c).sqrt();
    let mut acc = 0.0;
    for (x1, w1) in rule.nodes.iter().zip(&rule.weights) {
        let fz1 = f(s1 * x1);
        let mean2 = s2 * c * x1;
        let mut inner = 0.0;
        for (x2, w2) in rule.nodes.iter().zip(&rule.weights) {
            inner += w2 * g(mean2 + s2 * root * x2);
        }
        acc += w1 * fz1 * inner;
    }
    finite_or_overflow(acc / (SQRT_PI * SQRT_PI), "gaussian_separable_expectation")
}
