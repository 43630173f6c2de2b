//! Initialization-kernel constructions.
//!
//! Three families of convolution kernels, all drawn from a seeded
//! [`RandomSource`]:
//!
//! * **Orthogonal** — built by repeated block-convolution of projection
//!   pairs, so that the induced periodic convolution operator is exactly
//!   orthogonal: ‖K ∗ x‖ = ‖x‖ for every input. The construction is exact
//!   by design, not statistical.
//! * **Delta-Orthogonal** — all spatial mass in the center tap, which holds
//!   a (scaled) orthonormal-row matrix. Norm preservation then holds for
//!   any padding, and the induced per-tap variance vector is one-hot, so
//!   every Fourier mode propagates with λ = 1.
//! * **Gaussian** — independent N(0, σ_w²·v/c_in) entries with an arbitrary
//!   per-tap variance profile v, including the GS interpolation family
//!   between one-hot and uniform.
//!
//! The 2D constructions (𝕜×𝕜 kernels) mirror the block-matrix algorithm;
//! the 1D variants use the same method one dimension down and are what the
//! spatial simulator and Jacobian diagnostics consume.
//!
//! Conventions: a kernel slice `K[i,j]` (or `K[t]` in 1D) is a c_in×c_out
//! matrix; the induced map is the center-anchored cross-correlation
//! `y_o(a,b) = Σ K[i,j][in,o]·x_in(a+i−⌊𝕜/2⌋, b+j−⌊𝕜/2⌋)`, periodic or
//! zero-padded. Centering matches the tap convention of the covariance
//! dynamics, so a delta kernel acts pointwise at the same position.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::VarianceVector;
use crate::error::{Error, Result};
use crate::random::RandomSource;

/// A 2D convolution kernel: 𝕜×𝕜 spatial taps of c_in×c_out matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    k_size: usize,
    c_in: usize,
    c_out: usize,
    /// Row-major spatial slices: index i·𝕜 + j holds tap (i, j).
    slices: Vec<DMatrix<f64>>,
}

impl ConvKernel {
    /// Validated constructor: 𝕜² slices, uniform c_in×c_out shape, finite.
    pub fn new(
        k_size: usize,
        c_in: usize,
        c_out: usize,
        slices: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if k_size == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::InvalidParameter(
                "kernel size and channel counts must be positive".into(),
            ));
        }
        if slices.len() != k_size * k_size {
            return Err(Error::InvalidParameter(format!(
                "expected {} spatial slices, got {}",
                k_size * k_size,
                slices.len()
            )));
        }
        for s in &slices {
            if s.nrows() != c_in || s.ncols() != c_out {
                return Err(Error::InvalidParameter(format!(
                    "slice is {}x{}, expected {c_in}x{c_out}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("kernel has non-finite entries".into()));
            }
        }
        Ok(Self { k_size, c_in, c_out, slices })
    }

    /// Spatial side 𝕜.
    pub fn k_size(&self) -> usize {
        self.k_size
    }

    /// Input channels.
    pub fn c_in(&self) -> usize {
        self.c_in
    }

    /// Output channels.
    pub fn c_out(&self) -> usize {
        self.c_out
    }

    /// The (i, j) spatial tap as a c_in×c_out matrix.
    pub fn slice(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.slices[i * self.k_size + j]
    }

    /// All slices in row-major tap order.
    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    /// The center tap index ⌊𝕜/2⌋.
    pub fn center(&self) -> usize {
        self.k_size / 2
    }
}

/// A 1D convolution kernel: `width` spatial taps of c_in×c_out matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dKernel {
    width: usize,
    c_in: usize,
    c_out: usize,
    slices: Vec<DMatrix<f64>>,
}

impl Conv1dKernel {
    /// Validated constructor: `width` slices, uniform shape, finite.
    pub fn new(width: usize, c_in: usize, c_out: usize, slices: Vec<DMatrix<f64>>) -> Result<Self> {
        if width == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::InvalidParameter(
                "kernel width and channel counts must be positive".into(),
            ));
        }
        if slices.len() != width {
            return Err(Error::InvalidParameter(format!(
                "expected {width} spatial slices, got {}",
                slices.len()
            )));
        }
        for s in &slices {
            if s.nrows() != c_in || s.ncols() != c_out {
                return Err(Error::InvalidParameter(format!(
                    "slice is {}x{}, expected {c_in}x{c_out}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("kernel has non-finite entries".into()));
            }
        }
        Ok(Self { width, c_in, c_out, slices })
    }

    /// Number of spatial taps.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Input channels.
    pub fn c_in(&self) -> usize {
        self.c_in
    }

    /// Output channels.
    pub fn c_out(&self) -> usize {
        self.c_out
    }

    /// The t-th spatial tap.
    pub fn slice(&self, t: usize) -> &DMatrix<f64> {
        &self.slices[t]
    }

    /// All slices in tap order.
    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    /// The center tap index ⌊width/2⌋.
    pub fn center(&self) -> usize {
        self.width / 2
    }
}

/// A square grid of equally-shaped matrix blocks, the operand of the
/// block-wise convolution in the orthogonal-kernel construction.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    p: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockMatrix {
    /// Validated constructor: p² blocks in row-major order, uniform shape.
    pub fn new(p: usize, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if p == 0 || blocks.len() != p * p {
            return Err(Error::InvalidParameter(format!(
                "expected {} blocks for grid side {p}, got {}",
                p * p,
                blocks.len()
            )));
        }
        let (r, c) = (blocks[0].nrows(), blocks[0].ncols());
        if r == 0 || c == 0 || blocks.iter().any(|b| b.nrows() != r || b.ncols() != c) {
            return Err(Error::InvalidParameter(
                "all blocks must share one nonempty shape".into(),
            ));
        }
        Ok(Self { p, blocks })
    }

    /// Grid side p.
    pub fn grid_side(&self) -> usize {
        self.p
    }

    /// Per-block (rows, cols).
    pub fn block_shape(&self) -> (usize, usize) {
        (self.blocks[0].nrows(), self.blocks[0].ncols())
    }

    /// Block (i, j).
    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i * self.p + j]
    }
}

/// Block-wise convolution: [B □ C]_{i,j} = Σ_{i′,j′} B_{i′,j′}·C_{i−i′,j−j′}
/// with out-of-range blocks treated as zero. The result grid side is
/// p + q − 1.
pub fn block_convolve(b: &BlockMatrix, c: &BlockMatrix) -> Result<BlockMatrix> {
    let (_, b_cols) = b.block_shape();
    let (c_rows, c_cols) = c.block_shape();
    if b_cols != c_rows {
        return Err(Error::InvalidParameter(format!(
            "block shapes incompatible for products: {b_cols} vs {c_rows}"
        )));
    }
    let (p, q) = (b.grid_side(), c.grid_side());
    let out_side = p + q - 1;
    let (out_rows, _) = b.block_shape();
    let mut blocks =
        vec![DMatrix::<f64>::zeros(out_rows, c_cols); out_side * out_side];
    for i in 0..out_side {
        for j in 0..out_side {
            let acc = &mut blocks[i * out_side + j];
            for ip in 0..p {
                for jp in 0..p {
                    // C index (i−i′, j−j′) must land inside C's grid.
                    if i >= ip && i - ip < q && j >= jp && j - jp < q {
                        *acc += b.block(ip, jp) * c.block(i - ip, j - jp);
                    }
                }
            }
        }
    }
    BlockMatrix::new(out_side, blocks)
}

/// Haar-distributed orthogonal c×c matrix: QR of a Gaussian matrix with the
/// R diagonal's signs folded into Q's columns (the standard correction that
/// makes the distribution exactly Haar).
fn haar_orthogonal(c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(c, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..c {
        if r[(j, j)] < 0.0 {
            for i in 0..c {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// A random symmetric idempotent: P = U·D·Uᵀ with U Haar orthogonal and D a
/// diagonal of independent fair coin flips in {0, 1}. Bit-exact symmetry
/// comes from the {0,1} diagonal (each entry is a shared-order sum of
/// commuted products); idempotency holds to rounding.
fn random_projection(c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = haar_orthogonal(c, rng);
    let mut ud = u.clone();
    for j in 0..c {
        if !rng.random_bool(0.5) {
            for i in 0..c {
                ud[(i, j)] = 0.0;
            }
        }
    }
    ud * u.transpose()
}

/// Two independent random orthogonal projection matrices from one source.
pub fn random_projection_pair(
    c: usize,
    source: RandomSource,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if c == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut rng = source.rng();
    let p = random_projection(c, &mut rng);
    let q = random_projection(c, &mut rng);
    Ok((p, q))
}

/// The 2×2 block grid [[PQ, P(1−Q)], [(1−P)Q, (1−P)(1−Q)]] whose induced
/// convolution operator is orthogonal for any projections P, Q.
fn projection_step_grid(p: &DMatrix<f64>, q: &DMatrix<f64>) -> BlockMatrix {
    let c = p.nrows();
    let eye = DMatrix::<f64>::identity(c, c);
    let p_c = &eye - p;
    let q_c = &eye - q;
    BlockMatrix::new(2, vec![p * q, p * &q_c, &p_c * q, p_c * q_c]).expect("valid 2x2 grid")
}

fn check_channels(c_in: usize, c_out: usize) -> Result<()> {
    if c_in == 0 || c_out == 0 {
        return Err(Error::InvalidParameter("channel counts must be positive".into()));
    }
    if c_in > c_out {
        return Err(Error::InvalidParameter(format!(
            "orthogonal constructions need c_in ≤ c_out, got {c_in} > {c_out}"
        )));
    }
    Ok(())
}

/// 2D orthogonal kernel: start from the 1×1 identity kernel, block-convolve
/// 𝕜−1 projection-pair grids, then left-multiply every slice by a random
/// c_in×c_out matrix with orthonormal rows. The result preserves the norm
/// of every input under periodic convolution.
pub fn orthogonal_kernel(
    k_size: usize,
    c_in: usize,
    c_out: usize,
    source: RandomSource,
) -> Result<ConvKernel> {
    if k_size == 0 {
        return Err(Error::InvalidParameter("kernel size must be positive".into()));
    }
    check_channels(c_in, c_out)?;
    let mut rng = source.rng();

    let mut grid = BlockMatrix::new(1, vec![DMatrix::identity(c_out, c_out)])?;
    for _ in 0..k_size - 1 {
        let p = random_projection(c_out, &mut rng);
        let q = random_projection(c_out, &mut rng);
        grid = block_convolve(&grid, &projection_step_grid(&p, &q))?;
    }
    let h = haar_orthogonal(c_out, &mut rng).rows(0, c_in).into_owned();

    let slices = (0..k_size * k_size)
        .map(|idx| &h * grid.block(idx / k_size, idx % k_size))
        .collect();
    ConvKernel::new(k_size, c_in, c_out, slices)
}

/// 2D Delta-Orthogonal kernel: gain·H at the spatial center, zero
/// elsewhere. Norm preservation (up to the gain) holds for any padding.
pub fn delta_orthogonal_kernel(
    k_size: usize,
    c_in: usize,
    c_out: usize,
    gain: f64,
    source: RandomSource,
) -> Result<ConvKernel> {
    if k_size == 0 {
        return Err(Error::InvalidParameter("kernel size must be positive".into()));
    }
    check_channels(c_in, c_out)?;
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gain must be a positive finite real, got {gain}"
        )));
    }
    let mut rng = source.rng();
    let h = haar_orthogonal(c_out, &mut rng).rows(0, c_in).into_owned();
    let center = k_size / 2;
    let slices = (0..k_size * k_size)
        .map(|idx| {
            if idx == center * k_size + center {
                &h * gain
            } else {
                DMatrix::zeros(c_in, c_out)
            }
        })
        .collect();
    ConvKernel::new(k_size, c_in, c_out, slices)
}

fn check_variance_grid(grid: &DMatrix<f64>, k_size: usize) -> Result<f64> {
    if grid.nrows() != k_size || grid.ncols() != k_size {
        return Err(Error::InvalidParameter(format!(
            "variance grid is {}x{}, expected {k_size}x{k_size}",
            grid.nrows(),
            grid.ncols()
        )));
    }
    if grid.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "variance grid entries must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = grid.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "variance grid must sum to 1 within 1e-12, got {sum}"
        )));
    }
    Ok(sum)
}

/// 2D Gaussian kernel: independent entries, tap (i, j) drawn from
/// N(0, σ_w²·v[i,j]/c_in). Zero-variance taps produce exactly-zero entries.
///
/// Draw order is pinned for reproducibility: row-major over taps; within a
/// tap, output channel outer, input channel inner.
pub fn gaussian_kernel(
    k_size: usize,
    c_in: usize,
    c_out: usize,
    sigma_w_sq: f64,
    grid: &DMatrix<f64>,
    source: RandomSource,
) -> Result<ConvKernel> {
    if k_size == 0 || c_in == 0 || c_out == 0 {
        return Err(Error::InvalidParameter(
            "kernel size and channel counts must be positive".into(),
        ));
    }
    if !(sigma_w_sq >= 0.0) || !sigma_w_sq.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma_w_sq must be finite and nonnegative, got {sigma_w_sq}"
        )));
    }
    let sum = check_variance_grid(grid, k_size)?;
    let mut rng = source.rng();
    let mut slices = Vec::with_capacity(k_size * k_size);
    for i in 0..k_size {
        for j in 0..k_size {
            let std = (sigma_w_sq * grid[(i, j)] / sum / c_in as f64).sqrt();
            let mut s = DMatrix::<f64>::zeros(c_in, c_out);
            for col in 0..c_out {
                for row in 0..c_in {
                    s[(row, col)] = std * rng.sample::<f64, _>(StandardNormal);
                }
            }
            slices.push(s);
        }
    }
    ConvKernel::new(k_size, c_in, c_out, slices)
}

/// 1D orthogonal kernel of the given width: the same construction one
/// dimension down — start from [I], convolve width−1 grids [P, 1−P], then
/// left-multiply by H with orthonormal rows.
pub fn orthogonal_kernel_1d(
    width: usize,
    c_in: usize,
    c_out: usize,
    source: RandomSource,
) -> Result<Conv1dKernel> {
    if width == 0 {
        return Err(Error::InvalidParameter("kernel width must be positive".into()));
    }
    check_channels(c_in, c_out)?;
    let mut rng = source.rng();

    let mut blocks: Vec<DMatrix<f64>> = vec![DMatrix::identity(c_out, c_out)];
    for _ in 0..width - 1 {
        let p = random_projection(c_out, &mut rng);
        let p_c = DMatrix::<f64>::identity(c_out, c_out) - &p;
        // [K □ (P, 1−P)]_t = K_t·P + K_{t−1}·(1−P), out-of-range zero.
        let mut next = Vec::with_capacity(blocks.len() + 1);
        for t in 0..=blocks.len() {
            let mut acc = DMatrix::<f64>::zeros(c_out, c_out);
            if t < blocks.len() {
                acc += &blocks[t] * &p;
            }
            if t >= 1 {
                acc += &blocks[t - 1] * &p_c;
            }
            next.push(acc);
        }
        blocks = next;
    }
    let h = haar_orthogonal(c_out, &mut rng).rows(0, c_in).into_owned();
    let slices = blocks.iter().map(|b| &h * b).collect();
    Conv1dKernel::new(width, c_in, c_out, slices)
}

/// 1D Delta-Orthogonal kernel: gain·H at the center tap, zero elsewhere.
pub fn delta_orthogonal_kernel_1d(
    width: usize,
    c_in: usize,
    c_out: usize,
    gain: f64,
    source: RandomSource,
) -> Result<Conv1dKernel> {
    if width == 0 {
        return Err(Error::InvalidParameter("kernel width must be positive".into()));
    }
    check_channels(c_in, c_out)?;
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gain must be a positive finite real, got {gain}"
        )));
    }
    let mut rng = source.rng();
    let h = haar_orthogonal(c_out, &mut rng).rows(0, c_in).into_owned();
    let center = width / 2;
    let slices = (0..width)
        .map(|t| if t == center { &h * gain } else { DMatrix::zeros(c_in, c_out) })
        .collect();
    Conv1dKernel::new(width, c_in, c_out, slices)
}

/// 1D Gaussian kernel: tap t drawn from N(0, σ_w²·v_t/c_in); same pinned
/// draw order as the 2D constructor.
pub fn gaussian_kernel_1d(
    c_in: usize,
    c_out: usize,
    sigma_w_sq: f64,
    v: &VarianceVector,
    source: RandomSource,
) -> Result<Conv1dKernel> {
    if c_in == 0 || c_out == 0 {
        return Err(Error::InvalidParameter("channel counts must be positive".into()));
    }
    if !(sigma_w_sq >= 0.0) || !sigma_w_sq.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma_w_sq must be finite and nonnegative, got {sigma_w_sq}"
        )));
    }
    let mut rng = source.rng();
    let mut slices = Vec::with_capacity(v.taps().len());
    for &tap in v.taps() {
        let std = (sigma_w_sq * tap / c_in as f64).sqrt();
        let mut s = DMatrix::<f64>::zeros(c_in, c_out);
        for col in 0..c_out {
            for row in 0..c_in {
                s[(row, col)] = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        slices.push(s);
    }
    Conv1dKernel::new(v.taps().len(), c_in, c_out, slices)
}

/// The 2D variance grid induced by a 1D tap vector: the outer product
/// v·vᵀ (sums to 1 when v does).
pub fn outer_grid(v: &VarianceVector) -> DMatrix<f64> {
    let t = v.taps();
    DMatrix::from_fn(t.len(), t.len(), |i, j| t[i] * t[j])
}

/// The GS interpolation family of tap vectors: GS0 is one-hot, GS4 is
/// uniform, GS1–GS3 interpolate linearly between them.
pub fn gs_vector(index: usize, k: usize) -> Result<VarianceVector> {
    if index > 4 {
        return Err(Error::InvalidParameter(format!(
            "GS family index must be 0..=4, got {index}"
        )));
    }
    let t = index as f64 / 4.0;
    let len = 2 * k + 1;
    let uniform = 1.0 / len as f64;
    let taps = (0..len)
        .map(|i| t * uniform + if i == k { 1.0 - t } else { 0.0 })
        .collect();
    VarianceVector::new(taps)
}

/// Periodic 2D cross-correlation with centered taps:
/// y_o(a,b) = Σ K[i,j][in,o]·x_in(a+i−⌊𝕜/2⌋, b+j−⌊𝕜/2⌋), both spatial
/// indices wrapped mod n. The input is one n×n map per input channel; the
/// output one per output channel.
pub fn apply_periodic_2d(kernel: &ConvKernel, x: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    if x.len() != kernel.c_in() {
        return Err(Error::InvalidParameter(format!(
            "{} input maps for {} input channels",
            x.len(),
            kernel.c_in()
        )));
    }
    let n = x[0].nrows();
    if n < kernel.k_size() || x.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::InvalidParameter(
            "input maps must be square, equal-sized, and at least kernel-sized".into(),
        ));
    }
    let k = kernel.k_size();
    let center = kernel.center();
    let mut out = vec![DMatrix::<f64>::zeros(n, n); kernel.c_out()];
    for i in 0..k {
        for j in 0..k {
            let slice = kernel.slice(i, j);
            for a in 0..n {
                for b in 0..n {
                    let (ai, bj) = ((a + i + n - center) % n, (b + j + n - center) % n);
                    for o in 0..kernel.c_out() {
                        let mut acc = 0.0;
                        for (inp, map) in x.iter().enumerate() {
                            acc += slice[(inp, o)] * map[(ai, bj)];
                        }
                        out[o][(a, b)] += acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Zero-padded "same" 2D cross-correlation: taps are centered, and reads
/// outside the input are zero.
pub fn apply_zero_padded_2d(kernel: &ConvKernel, x: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    if x.len() != kernel.c_in() {
        return Err(Error::InvalidParameter(format!(
            "{} input maps for {} input channels",
            x.len(),
            kernel.c_in()
        )));
    }
    let n = x[0].nrows();
    if x.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::InvalidParameter("input maps must be square and equal-sized".into()));
    }
    let k = kernel.k_size();
    let center = kernel.center() as isize;
    let mut out = vec![DMatrix::<f64>::zeros(n, n); kernel.c_out()];
    for i in 0..k {
        for j in 0..k {
            let slice = kernel.slice(i, j);
            for a in 0..n {
                for b in 0..n {
                    let ai = a as isize + i as isize - center;
                    let bj = b as isize + j as isize - center;
                    if ai < 0 || bj < 0 || ai >= n as isize || bj >= n as isize {
                        continue;
                    }
                    for o in 0..kernel.c_out() {
                        let mut acc = 0.0;
                        for (inp, map) in x.iter().enumerate() {
                            acc += slice[(inp, o)] * map[(ai as usize, bj as usize)];
                        }
                        out[o][(a, b)] += acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Periodic 1D cross-correlation with centered taps:
/// y[o, α] = Σ K[t][in,o]·x[in, (α+t−⌊w/2⌋) mod n] on a c_in×n input,
/// giving a c_out×n output.
pub fn apply_periodic_1d(kernel: &Conv1dKernel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != kernel.c_in() {
        return Err(Error::InvalidParameter(format!(
            "input has {} channels, kernel expects {}",
            x.nrows(),
            kernel.c_in()
        )));
    }
    let n = x.ncols();
    if n < kernel.width() {
        return Err(Error::InvalidParameter(format!(
            "kernel of width {} does not fit spatial size {n}",
            kernel.width()
        )));
    }
    let center = kernel.center();
    let mut out = DMatrix::<f64>::zeros(kernel.c_out(), n);
    for (t, slice) in kernel.slices().iter().enumerate() {
        // out[:, α] += sliceᵀ · x[:, (α+t−center) mod n]
        for alpha in 0..n {
            let src = (alpha + t + n - center) % n;
            for o in 0..kernel.c_out() {
                let mut acc = 0.0;
                for inp in 0..kernel.c_in() {
                    acc += slice[(inp, o)] * x[(inp, src)];
                }
                out[(o, alpha)] += acc;
            }
        }
    }
    Ok(out)
}
