//! Matrix-level signal propagation: the covariance map of a convolutional
//! layer and its linearization.
//!
//! With circular padding, one convolutional layer acts on the n×n spatial
//! covariance Σ of the (Gaussian) pre-activations as
//!
//! ```text
//! Σ ← A_v ⋆ C(Σ),    [A_v ⋆ M]_{α,α'} = Σ_β v_β · M_{α+β, α'+β  (mod n)},
//! ```
//!
//! where C applies the scalar correlation map of [`crate::meanfield`]
//! entrywise and A_v is the circular cross-correlation induced by the
//! per-tap weight-variance vector v. Both operators preserve symmetry and
//! positive semi-definiteness, and A_v acts diagonally on Fourier modes:
//! its eigenvalues are the DFT of the zero-padded v, with λ_0 = 1.
//!
//! Around the fixed point Σ* = q*((1−c*)·I + c*·ones), the composite map
//! linearizes into decoupled cyclic-diagonal dynamics: a perturbation mode
//! with Fourier eigenvalue λ_α contracts by χ·|λ_α| per layer, giving the
//! per-mode depth scale ξ_α = −1/log(χ·|λ_α|). These spectra — and the
//! explicit Jacobian representation behind them — are what this module
//! computes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::meanfield::{CriticalPoint, MeanFieldParams};
use crate::quadrature::{self, QuadratureRule};

/// Relative PSD tolerance: smallest eigenvalue ≥ −PSD_TOL·max|eig|.
const PSD_TOL: f64 = 1e-10;
/// Absolute symmetry tolerance for validated constructors.
const SYMMETRY_TOL: f64 = 1e-12;

/// A spatial covariance matrix: symmetric positive semi-definite, n×n.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validated constructor: the matrix must be square, symmetric to 1e-12
    /// and positive semi-definite up to a −1e-10·‖Σ‖ eigenvalue tolerance
    /// (quadrature noise produces tiny negative eigenvalues on matrices that
    /// are exactly singular in theory). The stored matrix is exactly
    /// symmetrized.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "covariance must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        for a in 0..n {
            for b in (a + 1)..n {
                if (entries[(a, b)] - entries[(b, a)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "covariance is not symmetric at ({a}, {b}): {} vs {}",
                        entries[(a, b)],
                        entries[(b, a)]
                    )));
                }
            }
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let eigs = sym.clone().symmetric_eigen().eigenvalues;
        let max_abs = eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        let min = eigs.iter().fold(f64::INFINITY, |m, &e| m.min(e));
        if min < -PSD_TOL * max_abs {
            return Err(Error::InvalidParameter(format!(
                "covariance is not positive semi-definite: min eigenvalue {min:e} (norm {max_abs:e})"
            )));
        }
        Ok(Self { entries: sym })
    }

    /// Construct from a matrix known to be exactly symmetric and PSD by
    /// construction (operator outputs); validated only in debug builds.
    pub(crate) fn from_symmetric_unchecked(entries: DMatrix<f64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        debug_assert!((&entries - entries.transpose()).abs().max() <= SYMMETRY_TOL);
        Self { entries }
    }

    /// The mean-field fixed point Σ* = q*·((1−c*)·I + c*·ones) of size n.
    pub fn fixed_point(q_star: f64, c_star: f64, n: usize) -> Result<Self> {
        if !q_star.is_finite() || q_star < 0.0 || !c_star.is_finite() || c_star.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "fixed point needs q* ≥ 0 and |c*| ≤ 1, got q*={q_star}, c*={c_star}"
            )));
        }
        let mut m = DMatrix::from_element(n, n, q_star * c_star);
        for a in 0..n {
            m[(a, a)] = q_star;
        }
        Self::new(m)
    }

    /// Spatial size n.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// The underlying symmetric matrix.
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Consume into the underlying matrix.
    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Per-tap weight variances v_β, β = −k..k: nonnegative, summing to 1.
///
/// The uniform case v_β = 1/(2k+1) is the plain convolutional layer; a
/// one-hot center tap makes the layer act like a fully-connected one on
/// each pixel.
#[derive(Debug, Clone)]
pub struct VarianceVector {
    taps: Vec<f64>,
}

impl VarianceVector {
    /// Validated constructor from the 2k+1 taps in order β = −k..k. The sum
    /// must be 1 within 1e-12; taps are then renormalized exactly so that
    /// downstream eigenvalue computations see a unit sum.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "variance vector needs an odd number of taps, got {}",
                taps.len()
            )));
        }
        if let Some(bad) = taps.iter().find(|&&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance taps must be finite and nonnegative, got {bad}"
            )));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "variance taps must sum to 1 within 1e-12, got {sum}"
            )));
        }
        let taps = taps.into_iter().map(|t| t / sum).collect();
        Ok(Self { taps })
    }

    /// Uniform taps 1/(2k+1).
    pub fn uniform(k: usize) -> Self {
        let len = 2 * k + 1;
        Self {
            taps: vec![1.0 / len as f64; len],
        }
    }

    /// One-hot center tap: the identity cross-correlation operator.
    pub fn one_hot(k: usize) -> Self {
        let mut taps = vec![0.0; 2 * k + 1];
        taps[k] = 1.0;
        Self { taps }
    }

    /// Kernel half-width k.
    pub fn k(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// The taps in order β = −k..k.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Fourier eigenvalues λ_α of A_v together with the per-mode depth scales
/// ξ_α = −1/log(χ·|λ_α|) under a contraction multiplier χ.
#[derive(Debug, Clone)]
pub struct DepthScaleSpectrum {
    /// The n complex eigenvalues; λ_0 = 1 exactly.
    pub lambdas: Vec<Complex64>,
    /// Per-mode depth scale: positive and finite for decaying modes, ∞ for
    /// marginal ones (χ·|λ| = 1), 0 for annihilated ones (λ = 0), and
    /// negative (an e-folding growth scale) for growing modes.
    pub xis: Vec<f64>,
    /// The multiplier χ the scales were computed with.
    pub chi: f64,
    /// Per-mode flag: true where χ·|λ| > 1 (growing mode, chaotic phase).
    pub growing: Vec<bool>,
}

/// Representation of the C-map Jacobian at the fixed point, acting on
/// symmetric perturbations U of Σ*:
///
/// ```text
/// [J U]_{α,α}  = χ_q·U_{α,α}
/// [J U]_{α,α'} = χ_c·U_{α,α'} + κ·(U_{α,α} + U_{α',α'})     (α ≠ α')
/// ```
///
/// Zero-diagonal perturbations are an eigenspace with eigenvalue χ_c.
#[derive(Debug, Clone, Copy)]
pub struct CmapJacobianRep {
    /// Diagonal slope χ_q.
    pub chi_q: f64,
    /// Off-diagonal slope χ_c.
    pub chi_c: f64,
    /// Diagonal-to-off-diagonal coupling κ.
    pub kappa: f64,
    /// Spatial size n.
    pub n: usize,
}

impl CmapJacobianRep {
    /// Build from explicit coefficients.
    pub fn new(chi_q: f64, chi_c: f64, kappa: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("spatial size must be positive".into()));
        }
        for (name, v) in [("chi_q", chi_q), ("chi_c", chi_c), ("kappa", kappa)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(Self { chi_q, chi_c, kappa, n })
    }

    /// Build from a solved critical point.
    pub fn from_critical_point(cp: &CriticalPoint, n: usize) -> Result<Self> {
        Self::new(cp.chi_q, cp.chi_c, cp.kappa, n)
    }
}

/// Circular cross-correlation [A_v ⋆ M]_{α,α'} = Σ_β v_β·M_{α+β, α'+β mod n}.
///
/// Shifts both indices together, so it maps each cyclic diagonal of M to a
/// cross-correlation of that diagonal with v: symmetry, PSD-ness, and the
/// zero-diagonal subspace are all preserved exactly.
pub fn cross_correlate(v: &VarianceVector, m: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let n = m.n();
    let k = v.k();
    if n < 2 * k + 1 {
        return Err(Error::InvalidParameter(format!(
            "kernel of width {} does not fit spatial size {n}",
            2 * k + 1
        )));
    }
    let src = m.entries();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for (i, &tap) in v.taps().iter().enumerate() {
                // β = i − k; indices are shifted mod n.
                let shift = (i + n - k) % n;
                acc += tap * src[((a + shift) % n, (b + shift) % n)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(CovarianceMatrix::from_symmetric_unchecked(out))
}

/// Entrywise application of the scalar correlation map:
/// C(Σ)_{α,α'} = σ_w²·E[φ(h_α)φ(h_α')] + σ_b² with (h_α, h_α') Gaussian with
/// covariance [[Σ_αα, Σ_αα'], [Σ_αα', Σ_α'α']].
pub fn cmap_matrix(params: &MeanFieldParams, s: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let n = s.n();
    let m = s.entries();
    for a in 0..n {
        if !(m[(a, a)] > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "covariance diagonal must be positive, got {} at {a}",
                m[(a, a)]
            )));
        }
    }
    let rule = QuadratureRule::default_rule();
    let phi = params.activation.value;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let qa = m[(a, a)];
        let e = quadrature::gaussian_expectation(|z| phi(z) * phi(z), qa, rule)?;
        out[(a, a)] = params.sigma_w_sq * e + params.sigma_b_sq;
        for b in (a + 1)..n {
            let qb = m[(b, b)];
            // PSD inputs keep |c| ≤ 1 mathematically; clamp the roundoff.
            let c = (m[(a, b)] / (qa * qb).sqrt()).clamp(-1.0, 1.0);
            let e = quadrature::gaussian_separable_expectation(phi, phi, qa, qb, c, rule)?;
            let value = params.sigma_w_sq * e + params.sigma_b_sq;
            out[(a, b)] = value;
            out[(b, a)] = value;
        }
    }
    // C preserves PSD-ness in exact arithmetic, so the output is wrapped
    // without re-validation. That keeps the map usable on the PSD boundary
    // (finite-difference probes Σ* ± h·U straddle it by design).
    Ok(CovarianceMatrix::from_symmetric_unchecked(out))
}

/// Iterate the full layer map Σ ← A_v ⋆ C(Σ) for `depth` layers, returning
/// the trajectory [Σ⁰, Σ¹, …, Σ^depth].
pub fn propagate_covariance(
    params: &MeanFieldParams,
    v: &VarianceVector,
    s0: &CovarianceMatrix,
    depth: usize,
) -> Result<Vec<CovarianceMatrix>> {
    if s0.n() < 2 * v.k() + 1 {
        return Err(Error::InvalidParameter(format!(
            "kernel of width {} does not fit spatial size {}",
            2 * v.k() + 1,
            s0.n()
        )));
    }
    let mut trajectory = Vec::with_capacity(depth + 1);
    trajectory.push(s0.clone());
    for _ in 0..depth {
        let mapped = cmap_matrix(params, trajectory.last().expect("nonempty"))?;
        trajectory.push(cross_correlate(v, &mapped)?);
    }
    Ok(trajectory)
}

/// Fourier eigenvalues of the cross-correlation operator A_v on spatial
/// size n: λ_α = Σ_β v_β·e^{−2πi·α·β/n} (the DFT of the zero-padded taps).
///
/// λ_0 is snapped to exactly 1 (it is the tap sum), and any |λ_α| pushed
/// past 1 by roundoff is rescaled back onto the unit disk, so the spectrum
/// invariants hold exactly.
pub fn fourier_eigenvalues(v: &VarianceVector, n: usize) -> Result<Vec<Complex64>> {
    let k = v.k();
    if n < 2 * k + 1 {
        return Err(Error::InvalidParameter(format!(
            "kernel of width {} does not fit spatial size {n}",
            2 * k + 1
        )));
    }
    let mut lambdas = Vec::with_capacity(n);
    lambdas.push(Complex64::new(1.0, 0.0));
    for alpha in 1..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &tap) in v.taps().iter().enumerate() {
            let beta = i as f64 - k as f64;
            let angle = -2.0 * std::f64::consts::PI * alpha as f64 * beta / n as f64;
            acc += tap * Complex64::new(angle.cos(), angle.sin());
        }
        let norm = acc.norm();
        if norm > 1.0 {
            acc /= norm;
        }
        lambdas.push(acc);
    }
    Ok(lambdas)
}

/// Per-mode depth scales ξ_α = −1/log(χ·|λ_α|) under multiplier χ.
///
/// Marginal modes (χ·|λ| = 1) get ξ = ∞; annihilated modes (λ = 0) get
/// ξ = 0; growing modes (χ·|λ| > 1, possible in the chaotic phase) are
/// flagged rather than rejected, with a negative ξ whose magnitude is the
/// e-folding growth scale.
pub fn depth_scales(lambdas: &[Complex64], chi: f64) -> Result<DepthScaleSpectrum> {
    if !(chi > 0.0) || !chi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "multiplier chi must be a positive finite real, got {chi}"
        )));
    }
    let mut xis = Vec::with_capacity(lambdas.len());
    let mut growing = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let rate = chi * lambda.norm();
        growing.push(rate > 1.0);
        xis.push(if rate == 1.0 {
            f64::INFINITY
        } else {
            // rate = 0 gives −1/(−∞) = 0: the mode dies in one layer.
            -1.0 / rate.ln()
        });
    }
    Ok(DepthScaleSpectrum {
        lambdas: lambdas.to_vec(),
        xis,
        chi,
        growing,
    })
}

/// Apply the fixed-point Jacobian representation to a symmetric
/// perturbation.
pub fn apply_cmap_jacobian(rep: &CmapJacobianRep, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u.nrows() != rep.n || u.ncols() != rep.n {
        return Err(Error::InvalidParameter(format!(
            "perturbation is {}x{}, expected {}x{}",
            u.nrows(),
            u.ncols(),
            rep.n,
            rep.n
        )));
    }
    for a in 0..rep.n {
        for b in (a + 1)..rep.n {
            if (u[(a, b)] - u[(b, a)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "perturbation is not symmetric at ({a}, {b})"
                )));
            }
        }
    }
    let mut out = DMatrix::<f64>::zeros(rep.n, rep.n);
    for a in 0..rep.n {
        out[(a, a)] = rep.chi_q * u[(a, a)];
        for b in (a + 1)..rep.n {
            let value = rep.chi_c * u[(a, b)] + rep.kappa * (u[(a, a)] + u[(b, b)]);
            out[(a, b)] = value;
            out[(b, a)] = value;
        }
    }
    Ok(out)
}

/// Linearized per-mode magnitude prediction after `depth` layers:
/// |ε̃_α| · (χ·|λ_α|)^depth for each mode α.
pub fn linearized_mode_prediction(
    spectrum: &DepthScaleSpectrum,
    eps0_fourier: &[Complex64],
    depth: usize,
) -> Result<Vec<f64>> {
    if eps0_fourier.len() != spectrum.lambdas.len() {
        return Err(Error::InvalidParameter(format!(
            "{} initial coefficients for {} modes",
            eps0_fourier.len(),
            spectrum.lambdas.len()
        )));
    }
    Ok(spectrum
        .lambdas
        .iter()
        .zip(eps0_fourier)
        .map(|(lambda, eps)| eps.norm() * (spectrum.chi * lambda.norm()).powi(depth as i32))
        .collect())
}

/// Mean-field gradient-variance profile for a depth-L network: the relative
/// backward variance at layer l is χ₁^{L−l}, normalized so the last layer
/// is 1. Returned for l = 1..=depth.
///
/// Under the mean-field backward recursion the per-tap structure of the
/// kernel averages out of the layerwise variance, so the profile depends on
/// the parameters only through χ₁.
pub fn backprop_variance_profile(chi1: f64, depth: usize) -> Result<Vec<f64>> {
    if !(chi1 > 0.0) || !chi1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "chi1 must be a positive finite real, got {chi1}"
        )));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    Ok((1..=depth)
        .map(|l| chi1.powi((depth - l) as i32))
        .collect())
}

/// Direct DFT of a real sequence: X_a = Σ_j x_j·e^{−2πi·a·j/n}.
///
/// Spatial sizes here are tens, not thousands; a direct transform keeps the
/// crate dependency-free and the tests transparent.
pub fn dft(seq: &[f64]) -> Vec<Complex64> {
    let n = seq.len();
    (0..n)
        .map(|a| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in seq.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (a * j) as f64 / n as f64;
                acc += x * Complex64::new(angle.cos(), angle.sin());
            }
            acc
        })
        .collect()
}

/// The j-th cyclic diagonal of a square matrix: d_α = M_{α, α+j mod n}.
pub fn cyclic_diagonal(m: &DMatrix<f64>, offset: usize) -> Vec<f64> {
    let n = m.nrows();
    (0..n).map(|a| m[(a, (a + offset) % n)]).collect()
}

/// Build the zero-diagonal symmetric perturbation whose first cyclic
/// diagonal has the prescribed DFT coefficients: d = IDFT(coeffs), then
/// ε_{j, j+1 mod n} = ε_{j+1 mod n, j} = d_j with zeros elsewhere.
///
/// The coefficients must be conjugate-symmetric (coeffs[a] equal to the
/// conjugate of coeffs[n−a]) so that d is real; n ≥ 3 is required for the
/// first diagonal to be well defined.
pub fn first_diagonal_perturbation(coeffs: &[Complex64]) -> Result<DMatrix<f64>> {
    let n = coeffs.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "need spatial size at least 3, got {n}"
        )));
    }
    for a in 0..n {
        let mirror = coeffs[(n - a) % n].conj();
        if (coeffs[a] - mirror).norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "coefficients are not conjugate-symmetric at index {a}"
            )));
        }
    }
    let mut diag = vec![0.0; n];
    for (j, d) in diag.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, c) in coeffs.iter().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * (a * j) as f64 / n as f64;
            acc += c * Complex64::new(angle.cos(), angle.sin());
        }
        *d = acc.re / n as f64;
    }
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (j, &d) in diag.iter().enumerate() {
        out[(j, (j + 1) % n)] = d;
        out[((j + 1) % n, j)] = d;
    }
    Ok(out)
}
