//! Random-matrix diagnostics for convolutional layers.
//!
//! A periodic convolution is a linear map, so it has a dense matrix
//! representation: an n×n circulant tiling of c_out×c_in blocks (spatial
//! index outer, channel index inner). This module builds that
//! representation, computes singular-value spectra, compares block-circulant
//! ensembles against dense Gaussian ensembles of the same size via
//! Kolmogorov–Smirnov distances, and assembles the end-to-end input–output
//! Jacobian J = Dᴸ Wᴸ ⋯ D¹ W¹ of a deep network at a given base point.
//!
//! Vectorization convention: a c×n field `x` is flattened column-major, so
//! component α·c + i is channel i at site α. This matches `nalgebra`'s
//! memory order, making `W · vec(x) = vec(apply_periodic_1d(K, x))` exact.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};
use crate::kernels::{apply_periodic_1d, apply_periodic_2d, Conv1dKernel, ConvKernel};
use crate::random::RandomSource;

/// Dense matrix representation of a periodic 1D convolution.
///
/// The matrix has shape (n·c_out) × (n·c_in) and block-circulant structure:
/// the c_out×c_in block at spatial position (α, α′) depends only on the
/// cyclic offset (α′ − α) mod n and vanishes whenever the centered offset
/// exceeds the kernel's half-width.
#[derive(Debug, Clone)]
pub struct ConvMatrixRep {
    n: usize,
    c_in: usize,
    c_out: usize,
    matrix: DMatrix<f64>,
}

impl ConvMatrixRep {
    /// Spatial size n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Input channel count.
    pub fn c_in(&self) -> usize {
        self.c_in
    }

    /// Output channel count.
    pub fn c_out(&self) -> usize {
        self.c_out
    }

    /// The dense matrix, shape (n·c_out) × (n·c_in).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Consume the representation, returning the dense matrix.
    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// Build the dense matrix representation of `kernel` acting on a periodic
/// 1D field of `n` sites.
///
/// For every input `x` (c_in×n), `W · vec(x) == vec(apply_periodic_1d(kernel, x))`
/// exactly: both place tap t at spatial offset t − ⌊width/2⌋.
///
/// Errors if the kernel does not fit the field (`n < width`).
pub fn conv_to_matrix(kernel: &Conv1dKernel, n: usize) -> Result<ConvMatrixRep> {
    let width = kernel.width();
    if n < width {
        return Err(Error::InvalidParameter(format!(
            "kernel of width {width} does not fit spatial size {n}"
        )));
    }
    let (c_in, c_out) = (kernel.c_in(), kernel.c_out());
    let center = kernel.center() as isize;
    let mut matrix = DMatrix::<f64>::zeros(n * c_out, n * c_in);
    // Output site α reads input site α′ = (α + t − center) mod n through
    // tap t, so the block at (row α, column α′) is slice(t) transposed
    // (slices store [input, output]).
    for alpha in 0..n {
        for (t, slice) in kernel.slices().iter().enumerate() {
            let shift = t as isize - center;
            let alpha_p = (alpha as isize + shift).rem_euclid(n as isize) as usize;
            for o in 0..c_out {
                for i in 0..c_in {
                    matrix[(alpha * c_out + o, alpha_p * c_in + i)] += slice[(i, o)];
                }
            }
        }
    }
    Ok(ConvMatrixRep {
        n,
        c_in,
        c_out,
        matrix,
    })
}

/// Dense matrix representation of a 2D periodic convolution on an n×n
/// field, built by applying the kernel to coordinate basis fields (so it is
/// consistent with `apply_periodic_2d` by construction).
///
/// Vectorization: component (a·n + b)·c + i is channel i at site (a, b) —
/// sites row-major, channels innermost, mirroring the 1D convention.
/// The result has shape (n²·c_out) × (n²·c_in).
pub fn conv_to_matrix_2d(kernel: &ConvKernel, n: usize) -> Result<DMatrix<f64>> {
    if n < kernel.k_size() {
        return Err(Error::InvalidParameter(format!(
            "kernel of size {} does not fit spatial size {n}",
            kernel.k_size()
        )));
    }
    let (c_in, c_out) = (kernel.c_in(), kernel.c_out());
    let dim_in = n * n * c_in;
    let dim_out = n * n * c_out;
    let mut matrix = DMatrix::<f64>::zeros(dim_out, dim_in);
    let mut basis = vec![DMatrix::<f64>::zeros(n, n); c_in];
    for col in 0..dim_in {
        let i = col % c_in;
        let site = col / c_in;
        let (a, b) = (site / n, site % n);
        basis[i][(a, b)] = 1.0;
        let image = apply_periodic_2d(kernel, &basis)?;
        basis[i][(a, b)] = 0.0;
        for (o, map) in image.iter().enumerate() {
            for aa in 0..n {
                for bb in 0..n {
                    matrix[((aa * n + bb) * c_out + o, col)] = map[(aa, bb)];
                }
            }
        }
    }
    Ok(matrix)
}

/// Histogram of a singular-value sample over uniform bins.
#[derive(Debug, Clone)]
pub struct SpectrumHistogram {
    /// Bin edges, length `counts.len() + 1`, covering [0, max].
    pub edges: Vec<f64>,
    /// Sample counts per bin.
    pub counts: Vec<usize>,
}

/// Singular-value spectrum of a matrix together with a comparison against
/// the quarter-circle law (the singular-value form of the Marchenko–Pastur
/// limit for square iid matrices normalized to variance 1/dimension).
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Singular values sorted in descending order.
    pub singular_values: Vec<f64>,
    /// Histogram of the singular values.
    pub histogram: SpectrumHistogram,
    /// Support edge of the reference quarter-circle density (2 in the
    /// variance-1/dimension normalization used here).
    pub reference_edge: f64,
    /// Kolmogorov–Smirnov distance between the empirical singular-value
    /// CDF and the quarter-circle CDF.
    pub ks_to_reference: f64,
}

/// Number of histogram bins in a [`SpectrumReport`].
const HISTOGRAM_BINS: usize = 40;

/// Singular values of a dense matrix, sorted descending.
///
/// Errors if the matrix is empty, contains non-finite entries, or the SVD
/// iteration fails to converge.
pub fn singular_values(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    if matrix.is_empty() {
        return Err(Error::InvalidParameter(
            "singular values need a nonempty matrix".into(),
        ));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "singular values need finite entries".into(),
        ));
    }
    let svd = nalgebra::SVD::try_new(matrix.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericOverflow("SVD iteration did not converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    Ok(values)
}

/// Full spectrum report for a dense matrix: sorted singular values, a
/// histogram, and the KS distance to the quarter-circle law.
///
/// The reference assumes the variance-1/dimension normalization (mean
/// squared singular value ≈ 1, bulk edge 2); pass a matrix scaled
/// accordingly when the comparison is meant quantitatively.
pub fn singular_spectrum(matrix: &DMatrix<f64>) -> Result<SpectrumReport> {
    let values = singular_values(matrix)?;
    let histogram = histogram(&values, HISTOGRAM_BINS);
    let ks = ks_to_quarter_circle(&values);
    Ok(SpectrumReport {
        singular_values: values,
        histogram,
        reference_edge: 2.0,
        ks_to_reference: ks,
    })
}

fn histogram(values: &[f64], bins: usize) -> SpectrumHistogram {
    let max = values.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let step = max / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| b as f64 * step).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let bin = ((v / step) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    SpectrumHistogram { edges, counts }
}

/// CDF of the quarter-circle law on [0, 2]: density (1/π)·√(4 − s²).
///
/// F(s) = (1/π)·(s·√(4 − s²)/2 + 2·asin(s/2)), clamped to [0, 1] outside
/// the support.
pub fn quarter_circle_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 2.0 {
        return 1.0;
    }
    (s * (4.0 - s * s).sqrt() / 2.0 + 2.0 * (s / 2.0).asin()) / std::f64::consts::PI
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and
/// the quarter-circle CDF.
pub fn ks_to_quarter_circle(sample: &[f64]) -> f64 {
    ks_to_cdf(sample, quarter_circle_cdf)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and a
/// point mass at `location` (the idealized spectrum of an orthogonal map):
/// the largest gap between the empirical CDF and the unit step.
pub fn ks_to_point_mass(sample: &[f64], location: f64) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let n = sample.len() as f64;
    let below = sample.iter().filter(|&&s| s < location).count() as f64 / n;
    let at_or_below = sample.iter().filter(|&&s| s <= location).count() as f64 / n;
    below.max(1.0 - at_or_below)
}

fn ks_to_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("sample values are finite"));
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &s) in sorted.iter().enumerate() {
        let f = cdf(s);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((f - lo).abs()).max((f - hi).abs());
    }
    worst
}

/// Two-sample Kolmogorov–Smirnov distance between the empirical CDFs of
/// `a` and `b` (the classical sup-norm gap, evaluated by a merge sweep).
pub fn ks_between(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("sample values are finite"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("sample values are finite"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while ia < sa.len() && ib < sb.len() {
        let (va, vb) = (sa[ia], sb[ib]);
        if va <= vb {
            ia += 1;
        }
        if vb <= va {
            ib += 1;
        }
        worst = worst.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    worst.max((1.0 - ib as f64 / nb).abs()).max((1.0 - ia as f64 / na).abs())
}

/// Dense rows×cols matrix with iid N(0, `variance`) entries, filled in a
/// pinned order (row-major) from a dedicated stream.
pub fn dense_gaussian_matrix(
    rows: usize,
    cols: usize,
    variance: f64,
    source: RandomSource,
) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(
            "Gaussian matrix needs positive dimensions".into(),
        ));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "entry variance must be positive and finite, got {variance}"
        )));
    }
    let std = variance.sqrt();
    let mut rng = source.rng();
    let mut matrix = DMatrix::<f64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            matrix[(i, j)] = std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(matrix)
}

/// End-to-end input–output Jacobian J = Dᴸ Wᴸ ⋯ D¹ W¹ of a deep periodic
/// convolutional network, evaluated at the forward pass from `a0`.
///
/// Layer l maps aˡ⁻¹ ↦ φ(Wˡ aˡ⁻¹); Dˡ is the diagonal matrix of φ′ at the
/// layer's preactivations, vectorized in the same column-major order as
/// [`conv_to_matrix`]. `a0` is the layer-0 activation (c_in of the first
/// kernel × n). The result has shape (n·c_L) × (n·c_0).
///
/// Errors if the kernel channel counts do not chain or a kernel does not
/// fit the field.
pub fn end_to_end_jacobian(
    kernels: &[Conv1dKernel],
    activation: ActivationProfile,
    a0: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if kernels.is_empty() {
        return Err(Error::InvalidParameter(
            "the Jacobian needs at least one layer".into(),
        ));
    }
    let n = a0.ncols();
    if a0.nrows() != kernels[0].c_in() {
        return Err(Error::InvalidParameter(format!(
            "base point has {} channels, first kernel expects {}",
            a0.nrows(),
            kernels[0].c_in()
        )));
    }
    let mut jacobian = DMatrix::<f64>::identity(n * kernels[0].c_in(), n * kernels[0].c_in());
    let mut a = a0.clone();
    for (l, kernel) in kernels.iter().enumerate() {
        if kernel.c_in() != a.nrows() {
            return Err(Error::InvalidParameter(format!(
                "layer {l} expects {} channels, got {}",
                kernel.c_in(),
                a.nrows()
            )));
        }
        let h = apply_periodic_1d(kernel, &a)?;
        let w = conv_to_matrix(kernel, n)?;
        // Row α·c_out + o of Wˡ·J gets scaled by φ′(h[o, α]) — the same
        // column-major vectorization as conv_to_matrix.
        let derivs =
            DVector::<f64>::from_iterator(n * kernel.c_out(), h.iter().map(|&x| (activation.deriv1)(x)));
        let mut next = w.matrix() * jacobian;
        for (r, mut row) in next.row_iter_mut().enumerate() {
            row *= derivs[r];
        }
        jacobian = next;
        a = h.map(activation.value);
    }
    Ok(jacobian)
}

/// Ratio between the largest singular value and the smallest one in the
/// non-degenerate bulk (values below `floor`·max are treated as numerically
/// zero and excluded). The spread is 1 exactly for an isometry.
pub fn bulk_spread(singular_values: &[f64], floor: f64) -> Result<f64> {
    let max = singular_values.iter().cloned().fold(f64::NAN, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::InvalidParameter(
            "bulk spread needs a positive finite spectrum".into(),
        ));
    }
    let cut = floor * max;
    let min_bulk = singular_values
        .iter()
        .cloned()
        .filter(|&s| s > cut)
        .fold(f64::INFINITY, f64::min);
    Ok(max / min_bulk)
}
