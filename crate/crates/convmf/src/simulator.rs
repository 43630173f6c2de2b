//! Finite-channel random convolutional networks.
//!
//! Everything here is the finite-c counterpart of the covariance dynamics: a
//! 1D periodic convolutional network with c channels and n spatial sites per
//! layer, whose weights are drawn per tap from N(0, σ_w²·v_β/c) and biases
//! from N(0, σ_b²). As c → ∞ the channel-averaged Gram matrix of each
//! layer's preactivations follows the deterministic covariance recursion;
//! the routines below measure how closely finite networks track it, both
//! forward (covariance trajectories, Fourier-mode decay) and backward
//! (gradient-norm profiles across layers).
//!
//! Determinism: every stochastic quantity is derived from the config seed.
//! Layer l's weights come from `seed.child(l + 1)` (index 0 is reserved for
//! input generation), so forward and backward passes can regenerate the
//! exact same weights without storing them, and ensemble member e simply
//! reruns the network with `seed.child(e)` as its root. Draw order within
//! a layer is pinned: taps in ascending β, each tap filled input-channel
//! outer / output-channel inner, then the bias vector.
//!
//! Conventions match the rest of the crate: the layer map is
//! h^{l+1}[j, α] = Σ_{i,β} W_β[j, i]·φ(h^l[i, α+β]) + b[j] with β running
//! over centered taps −k..k and α periodic mod n; the empirical covariance
//! is the channel average Σ̂_{αα'} = (1/c)·Σ_j h[j,α]h[j,α'].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationProfile;
use crate::covariance::{cyclic_diagonal, dft, CovarianceMatrix, VarianceVector};
use crate::error::{Error, Result};
use crate::kernels::Conv1dKernel;
use crate::meanfield::MeanFieldParams;
use crate::random::RandomSource;

/// Configuration of a random convolutional network ensemble.
#[derive(Debug, Clone)]
pub struct SimNetworkConfig {
    /// Number of convolution layers L ≥ 1.
    pub depth: usize,
    /// Channels per layer c ≥ 1.
    pub channels: usize,
    /// Spatial sites n ≥ 2k+1 on a periodic ring.
    pub n: usize,
    /// Weight/bias variances and the activation.
    pub params: MeanFieldParams,
    /// Per-tap variance profile (2k+1 taps summing to 1).
    pub v: VarianceVector,
    /// Root seed; everything the ensemble does derives from it.
    pub seed: RandomSource,
}

impl SimNetworkConfig {
    /// Validated constructor.
    pub fn new(
        depth: usize,
        channels: usize,
        n: usize,
        params: MeanFieldParams,
        v: VarianceVector,
        seed: RandomSource,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if channels == 0 {
            return Err(Error::InvalidParameter("channel count must be at least 1".into()));
        }
        let width = 2 * v.k() + 1;
        if n < width {
            return Err(Error::InvalidParameter(format!(
                "kernel of width {width} does not fit spatial size {n}"
            )));
        }
        Ok(Self { depth, channels, n, params, v, seed })
    }

    /// The ensemble member with the same architecture and the e-th derived
    /// seed.
    pub fn member(&self, e: usize) -> Self {
        let mut out = self.clone();
        out.seed = self.seed.child(e as u64);
        out
    }
}

/// Preactivations of one layer: a c×n matrix (channel, site).
#[derive(Debug, Clone)]
pub struct LayerState {
    /// h[j, α] for channel j at site α.
    pub preactivations: DMatrix<f64>,
}

impl LayerState {
    /// Channel-averaged Gram matrix (1/c)·hᵀh, exactly symmetrized.
    pub fn gram(&self) -> DMatrix<f64> {
        let h = &self.preactivations;
        let g = h.transpose() * h / h.nrows() as f64;
        (&g + g.transpose()) * 0.5
    }
}

/// Explicit weights of one layer: 2k+1 tap matrices (c_out×c_in, tap t
/// acting at offset β = t − k) plus a bias vector.
#[derive(Debug, Clone)]
pub struct LayerWeights {
    /// Tap matrices in ascending-β order.
    pub taps: Vec<DMatrix<f64>>,
    /// Per-output-channel bias.
    pub bias: DVector<f64>,
}

impl LayerWeights {
    /// Output channels.
    pub fn c_out(&self) -> usize {
        self.taps[0].nrows()
    }

    /// Input channels.
    pub fn c_in(&self) -> usize {
        self.taps[0].ncols()
    }
}

/// The Gaussian weights of layer `layer` (0-based) under `config`,
/// regenerated deterministically from the config seed.
pub fn gaussian_layer_weights(config: &SimNetworkConfig, layer: usize) -> LayerWeights {
    let c = config.channels;
    let mut rng = config.seed.child(layer as u64 + 1).rng();
    let mut taps = Vec::with_capacity(config.v.taps().len());
    for &v_beta in config.v.taps() {
        let std = (config.params.sigma_w_sq * v_beta / c as f64).sqrt();
        let mut m = DMatrix::<f64>::zeros(c, c);
        for inp in 0..c {
            for out in 0..c {
                m[(out, inp)] = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        taps.push(m);
    }
    let std_b = config.params.sigma_b_sq.sqrt();
    let bias = DVector::from_fn(c, |_, _| std_b * rng.sample::<f64, _>(StandardNormal));
    LayerWeights { taps, bias }
}

/// Convert a (square) 1D kernel into layer weights with the given bias.
/// Kernel slices are c_in×c_out, so each tap is transposed into the
/// c_out×c_in orientation used by the layer map.
pub fn kernel_weights(kernel: &Conv1dKernel, bias: DVector<f64>) -> Result<LayerWeights> {
    if bias.len() != kernel.c_out() {
        return Err(Error::InvalidParameter(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            kernel.c_out()
        )));
    }
    Ok(LayerWeights {
        taps: kernel.slices().iter().map(|s| s.transpose()).collect(),
        bias,
    })
}

/// out[:, α] = m[:, (α + shift) mod n], for cache-friendly per-tap gemms.
fn shifted_columns(m: &DMatrix<f64>, shift: usize) -> DMatrix<f64> {
    let n = m.ncols();
    let mut out = DMatrix::<f64>::zeros(m.nrows(), n);
    for alpha in 0..n {
        out.set_column(alpha, &m.column((alpha + shift) % n));
    }
    out
}

/// One layer map on already-activated inputs: Σ_t W_t·a(· + t − center) + b.
fn layer_map(weights: &LayerWeights, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let center = weights.taps.len() / 2;
    let mut out = DMatrix::<f64>::zeros(weights.c_out(), n);
    for (t, w) in weights.taps.iter().enumerate() {
        let shifted = shifted_columns(a, (t + n - center) % n);
        out.gemm(1.0, w, &shifted, 1.0);
    }
    for alpha in 0..n {
        for j in 0..weights.c_out() {
            out[(j, alpha)] += weights.bias[j];
        }
    }
    out
}

fn check_input(config: &SimNetworkConfig, x0: &DMatrix<f64>) -> Result<()> {
    if x0.nrows() != config.channels || x0.ncols() != config.n {
        return Err(Error::InvalidParameter(format!(
            "input is {}x{}, expected channels x sites = {}x{}",
            x0.nrows(),
            x0.ncols(),
            config.channels,
            config.n
        )));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("input has non-finite entries".into()));
    }
    Ok(())
}

/// Run the network forward on explicit weights. Returns the L+1 layer
/// states, with layer 0 holding the input itself.
pub fn forward_with_weights(
    weights: &[LayerWeights],
    activation: &ActivationProfile,
    x0: &DMatrix<f64>,
) -> Result<Vec<LayerState>> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("at least one layer of weights required".into()));
    }
    let mut states = Vec::with_capacity(weights.len() + 1);
    states.push(LayerState { preactivations: x0.clone() });
    for w in weights {
        let prev = &states.last().unwrap().preactivations;
        if w.c_in() != prev.nrows() {
            return Err(Error::InvalidParameter(format!(
                "layer expects {} input channels, previous layer has {}",
                w.c_in(),
                prev.nrows()
            )));
        }
        let a = prev.map(activation.value);
        states.push(LayerState { preactivations: layer_map(w, &a) });
    }
    Ok(states)
}

/// Run the network forward with Gaussian weights drawn from the config
/// seed. Returns the L+1 layer states; layer 0 holds the input itself.
pub fn forward(config: &SimNetworkConfig, x0: &DMatrix<f64>) -> Result<Vec<LayerState>> {
    check_input(config, x0)?;
    let mut states = Vec::with_capacity(config.depth + 1);
    states.push(LayerState { preactivations: x0.clone() });
    for l in 0..config.depth {
        let w = gaussian_layer_weights(config, l);
        let a = states[l].preactivations.map(config.params.activation.value);
        states.push(LayerState { preactivations: layer_map(&w, &a) });
    }
    Ok(states)
}

/// Run the network forward with one supplied kernel per layer (biases are
/// still drawn from the config seed with variance σ_b², so a zero σ_b²
/// gives exactly bias-free layers).
pub fn forward_with_kernels(
    config: &SimNetworkConfig,
    x0: &DMatrix<f64>,
    kernels: &[Conv1dKernel],
) -> Result<Vec<LayerState>> {
    check_input(config, x0)?;
    if kernels.len() != config.depth {
        return Err(Error::InvalidParameter(format!(
            "{} kernels supplied for {} layers",
            kernels.len(),
            config.depth
        )));
    }
    let c = config.channels;
    let std_b = config.params.sigma_b_sq.sqrt();
    let mut states = Vec::with_capacity(config.depth + 1);
    states.push(LayerState { preactivations: x0.clone() });
    for (l, kernel) in kernels.iter().enumerate() {
        if kernel.c_in() != c || kernel.c_out() != c {
            return Err(Error::InvalidParameter(format!(
                "layer {l} kernel is {}x{} channels, expected {c}x{c}",
                kernel.c_in(),
                kernel.c_out()
            )));
        }
        if kernel.width() > config.n {
            return Err(Error::InvalidParameter(format!(
                "kernel of width {} does not fit spatial size {}",
                kernel.width(),
                config.n
            )));
        }
        let mut rng = config.seed.child(l as u64 + 1).rng();
        let bias = DVector::from_fn(c, |_, _| std_b * rng.sample::<f64, _>(StandardNormal));
        let w = kernel_weights(kernel, bias)?;
        let a = states[l].preactivations.map(config.params.activation.value);
        states.push(LayerState { preactivations: layer_map(&w, &a) });
    }
    Ok(states)
}

/// How ensemble members obtain their layer-0 input.
#[derive(Debug, Clone)]
pub enum InputEnsemble<'a> {
    /// The same fixed c×n input for every member.
    Fixed(&'a DMatrix<f64>),
    /// Per-member inputs with iid Gaussian channels of the given spatial
    /// covariance: x0 = Z·Fᵀ with Z a fresh c×n standard normal and
    /// F·Fᵀ = Σ⁰.
    SpatialGaussian(&'a CovarianceMatrix),
    /// As `SpatialGaussian`, but the Gaussian core is orthonormalized so
    /// the layer-0 Gram equals Σ⁰ exactly (requires c ≥ n). This removes
    /// input sampling noise from covariance estimates.
    WhitenedSpatialGaussian(&'a CovarianceMatrix),
}

/// Factor F with F·Fᵀ = Σ (symmetric eigendecomposition, so positive
/// semi-definite inputs such as ordered-phase fixed points are accepted).
fn covariance_factor(sigma: &CovarianceMatrix) -> DMatrix<f64> {
    let eig = sigma.entries().clone().symmetric_eigen();
    let mut f = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(0.0).sqrt();
        for i in 0..f.nrows() {
            f[(i, j)] *= scale;
        }
    }
    f
}

/// c×n standard-normal matrix from the given source.
fn standard_normal_matrix(c: usize, n: usize, source: RandomSource) -> DMatrix<f64> {
    let mut rng = source.rng();
    let mut z = DMatrix::<f64>::zeros(c, n);
    for col in 0..n {
        for row in 0..c {
            z[(row, col)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    z
}

/// c×n matrix whose columns are orthonormalized and rescaled so that
/// (1/c)·ZᵀZ = I exactly (up to rounding): the "whitened core".
fn whitened_core(c: usize, n: usize, source: RandomSource) -> Result<DMatrix<f64>> {
    if c < n {
        return Err(Error::InvalidParameter(format!(
            "whitened inputs need channels ≥ sites, got {c} < {n}"
        )));
    }
    let z = standard_normal_matrix(c, n, source);
    let q = z.qr().q();
    Ok(q * (c as f64).sqrt())
}

fn member_input(
    config: &SimNetworkConfig,
    input: &InputEnsemble<'_>,
    factor: Option<&DMatrix<f64>>,
    member_seed: RandomSource,
) -> Result<DMatrix<f64>> {
    let (c, n) = (config.channels, config.n);
    match input {
        InputEnsemble::Fixed(x0) => Ok((*x0).clone()),
        InputEnsemble::SpatialGaussian(_) => {
            let z = standard_normal_matrix(c, n, member_seed.child(0));
            Ok(z * factor.expect("factor precomputed").transpose())
        }
        InputEnsemble::WhitenedSpatialGaussian(_) => {
            let z = whitened_core(c, n, member_seed.child(0))?;
            Ok(z * factor.expect("factor precomputed").transpose())
        }
    }
}

/// Ensemble-averaged covariance trajectory.
#[derive(Debug, Clone)]
pub struct EnsembleCovariance {
    /// Mean channel-averaged covariance per layer, 0..=L.
    pub layers: Vec<CovarianceMatrix>,
    /// Entrywise standard error of each mean, per layer.
    pub std_errors: Vec<DMatrix<f64>>,
    /// Number of ensemble members.
    pub members: usize,
}

/// Estimate the per-layer covariance by averaging the channel Gram over
/// `members` independently seeded networks.
pub fn empirical_covariance(
    config: &SimNetworkConfig,
    input: InputEnsemble<'_>,
    members: usize,
) -> Result<EnsembleCovariance> {
    if members < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 ensemble members are needed for standard errors".into(),
        ));
    }
    let n = config.n;
    match &input {
        InputEnsemble::Fixed(x0) => check_input(config, x0)?,
        InputEnsemble::SpatialGaussian(s) | InputEnsemble::WhitenedSpatialGaussian(s) => {
            if s.n() != n {
                return Err(Error::InvalidParameter(format!(
                    "input covariance is {}x{}, expected {n}x{n}",
                    s.n(),
                    s.n()
                )));
            }
        }
    }
    let factor = match &input {
        InputEnsemble::Fixed(_) => None,
        InputEnsemble::SpatialGaussian(s) | InputEnsemble::WhitenedSpatialGaussian(s) => {
            Some(covariance_factor(s))
        }
    };

    let layers_count = config.depth + 1;
    let mut sums = vec![DMatrix::<f64>::zeros(n, n); layers_count];
    let mut sq_sums = vec![DMatrix::<f64>::zeros(n, n); layers_count];
    for e in 0..members {
        let member = config.member(e);
        let x0 = member_input(config, &input, factor.as_ref(), member.seed)?;
        let states = forward(&member, &x0)?;
        for (l, state) in states.iter().enumerate() {
            let g = state.gram();
            sq_sums[l] += g.map(|x| x * x);
            sums[l] += g;
        }
    }

    let m = members as f64;
    let mut layers = Vec::with_capacity(layers_count);
    let mut std_errors = Vec::with_capacity(layers_count);
    for l in 0..layers_count {
        let mean = &sums[l] / m;
        // Sample variance of the member Grams, then SE of their mean.
        let var = (&sq_sums[l] / m - mean.map(|x| x * x)) * (m / (m - 1.0));
        std_errors.push(var.map(|x| (x.max(0.0) / m).sqrt()));
        layers.push(CovarianceMatrix::new(mean)?);
    }
    Ok(EnsembleCovariance { layers, std_errors, members })
}

/// Fourier-mode decay measured by the paired-trajectory protocol.
#[derive(Debug, Clone)]
pub struct ModeDecayMeasurement {
    /// `magnitudes[l][a]`: magnitude of the ensemble-mean DFT coefficient
    /// of the first cyclic diagonal of Σ̂_perturbed − Σ̂_control at layer l.
    pub magnitudes: Vec<Vec<f64>>,
    /// Matching standard errors (scatter of the complex coefficients).
    pub std_errors: Vec<Vec<f64>>,
    /// Number of ensemble members.
    pub members: usize,
}

/// Measure how covariance perturbation modes decay with depth.
///
/// Each member runs two trajectories through the *same* random network: a
/// control started exactly at `sigma_star` and a perturbed copy started at
/// `sigma_star + eps0`, sharing both the per-layer weights and the whitened
/// input core. The difference of their channel Grams isolates the
/// propagated perturbation; weight noise, being common, cancels. The first
/// cyclic diagonal of the difference is Fourier-transformed per layer and
/// averaged over members, giving per-mode decay curves directly comparable
/// to the linearized theory.
pub fn mode_decay_experiment(
    config: &SimNetworkConfig,
    sigma_star: &CovarianceMatrix,
    eps0: &DMatrix<f64>,
    members: usize,
) -> Result<ModeDecayMeasurement> {
    if members < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 ensemble members are needed for standard errors".into(),
        ));
    }
    let n = config.n;
    if sigma_star.n() != n {
        return Err(Error::InvalidParameter(format!(
            "fixed point is {}x{}, expected {n}x{n}",
            sigma_star.n(),
            sigma_star.n()
        )));
    }
    if eps0.nrows() != n || eps0.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "perturbation is {}x{}, expected {n}x{n}",
            eps0.nrows(),
            eps0.ncols()
        )));
    }
    let perturbed = CovarianceMatrix::new(sigma_star.entries() + eps0)?;
    // Cholesky factors, not eigenfactors: the fixed point's degenerate
    // eigenspaces make eigenvector bases discontinuous under perturbation,
    // which would decouple the paired trajectories (δh⁰ = O(1) instead of
    // O(ε)) and let chaotic scatter swamp the signal. Cholesky is
    // continuous in the matrix, so the two inputs differ by O(ε).
    let chol = |s: &CovarianceMatrix| {
        s.entries()
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| {
                Error::InvalidParameter(
                    "mode decay needs positive-definite covariances (interior fixed point)"
                        .into(),
                )
            })
    };
    let factor_c = chol(sigma_star)?;
    let factor_p = chol(&perturbed)?;

    let layers_count = config.depth + 1;
    let mut sums = vec![vec![Complex64::new(0.0, 0.0); n]; layers_count];
    let mut sq_sums = vec![vec![0.0f64; n]; layers_count];
    let record = |l: usize,
                  hp: &DMatrix<f64>,
                  hc: &DMatrix<f64>,
                  sums: &mut Vec<Vec<Complex64>>,
                  sq_sums: &mut Vec<Vec<f64>>| {
        let c = hp.nrows() as f64;
        let gp = (hp.transpose() * hp) / c;
        let gc = (hc.transpose() * hc) / c;
        let diff = gp - gc;
        let coeffs = dft(&cyclic_diagonal(&diff, 1));
        for (a, z) in coeffs.into_iter().enumerate() {
            sums[l][a] += z;
            sq_sums[l][a] += z.norm_sqr();
        }
    };

    for e in 0..members {
        let member = config.member(e);
        let core = whitened_core(config.channels, n, member.seed.child(0))?;
        let mut hp = &core * factor_p.transpose();
        let mut hc = &core * factor_c.transpose();
        record(0, &hp, &hc, &mut sums, &mut sq_sums);
        for l in 0..config.depth {
            let w = gaussian_layer_weights(&member, l);
            let phi = member.params.activation.value;
            hp = layer_map(&w, &hp.map(phi));
            hc = layer_map(&w, &hc.map(phi));
            record(l + 1, &hp, &hc, &mut sums, &mut sq_sums);
        }
    }

    let m = members as f64;
    let mut magnitudes = Vec::with_capacity(layers_count);
    let mut std_errors = Vec::with_capacity(layers_count);
    for l in 0..layers_count {
        let mut mags = Vec::with_capacity(n);
        let mut ses = Vec::with_capacity(n);
        for a in 0..n {
            let mean = sums[l][a] / m;
            let var = (sq_sums[l][a] / m - mean.norm_sqr()) * (m / (m - 1.0));
            mags.push(mean.norm());
            ses.push((var.max(0.0) / m).sqrt());
        }
        magnitudes.push(mags);
        std_errors.push(ses);
    }
    Ok(ModeDecayMeasurement { magnitudes, std_errors, members })
}

/// Per-layer gradient norms of a single network.
#[derive(Debug, Clone)]
pub struct GradientProfile {
    /// ‖∇_{ω^l} Loss‖² for l = 1..=L, normalized by the last layer's value.
    /// Entries that overflowed during backpropagation are +∞.
    pub norms: Vec<f64>,
    /// True if any entry overflowed (chaotic phase at large depth).
    pub overflowed: bool,
}

/// δ^{l−1}-precursor: Σ_t W_tᵀ·δ(· − t + center), the adjoint of the layer
/// map's spatial mixing.
fn backward_mix(weights: &LayerWeights, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let n = delta.ncols();
    let center = weights.taps.len() / 2;
    let mut out = DMatrix::<f64>::zeros(weights.c_in(), n);
    for (t, w) in weights.taps.iter().enumerate() {
        let shifted = shifted_columns(delta, (n + center - t) % n);
        out.gemm(1.0, &w.transpose(), &shifted, 1.0);
    }
    out
}

/// Squared Frobenius norm of the weight gradient at one layer:
/// Σ_t ‖δ·shifted(a)ᵀ‖²_F for a = φ(previous preactivations).
fn weight_gradient_norm_sq(weights: &LayerWeights, delta: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    let center = weights.taps.len() / 2;
    let mut total = 0.0;
    for t in 0..weights.taps.len() {
        let shifted = shifted_columns(a, (t + n - center) % n);
        let grad = delta * shifted.transpose();
        total += grad.norm_squared();
    }
    total
}

/// Backpropagate the scalar loss Σ_{j,α} h^L[j,α] through one network drawn
/// from the config seed and report the per-layer squared gradient norms
/// ‖∇_{ω^l} Loss‖², normalized by the top layer. Weights are regenerated
/// from the seed during the backward sweep rather than stored.
pub fn backward_gradient_norms(
    config: &SimNetworkConfig,
    x0: &DMatrix<f64>,
) -> Result<GradientProfile> {
    let states = forward(config, x0)?;
    let phi = config.params.activation.value;
    let dphi = config.params.activation.deriv1;

    let mut norms = vec![0.0f64; config.depth];
    // δ^L for Loss = Σ h^L.
    let mut delta = DMatrix::<f64>::from_element(config.channels, config.n, 1.0);
    for l in (1..=config.depth).rev() {
        let w = gaussian_layer_weights(config, l - 1);
        let a_prev = states[l - 1].preactivations.map(phi);
        norms[l - 1] = weight_gradient_norm_sq(&w, &delta, &a_prev);
        if l > 1 {
            let mixed = backward_mix(&w, &delta);
            let gate = states[l - 1].preactivations.map(dphi);
            delta = mixed.component_mul(&gate);
        }
    }

    let last = norms[config.depth - 1];
    if !(last.is_finite() && last > 0.0) {
        return Err(Error::InvalidParameter(
            "top-layer gradient norm is zero or non-finite; cannot normalize the profile".into(),
        ));
    }
    let mut overflowed = false;
    let norms = norms
        .into_iter()
        .map(|g| {
            let r = g / last;
            if r.is_finite() {
                r
            } else {
                overflowed = true;
                f64::INFINITY
            }
        })
        .collect();
    Ok(GradientProfile { norms, overflowed })
}

/// Full analytic gradients (per-layer tap matrices and biases) of the
/// scalar loss Σ h^L under explicit weights.
fn analytic_gradients(
    weights: &[LayerWeights],
    activation: &ActivationProfile,
    states: &[LayerState],
) -> (Vec<Vec<DMatrix<f64>>>, Vec<DVector<f64>>) {
    let depth = weights.len();
    let phi = activation.value;
    let dphi = activation.deriv1;
    let n = states[0].preactivations.ncols();

    let mut grad_w = vec![Vec::new(); depth];
    let mut grad_b = vec![DVector::zeros(0); depth];
    let mut delta = DMatrix::<f64>::from_element(
        states[depth].preactivations.nrows(),
        n,
        1.0,
    );
    for l in (1..=depth).rev() {
        let w = &weights[l - 1];
        let a_prev = states[l - 1].preactivations.map(phi);
        let center = w.taps.len() / 2;
        let mut taps = Vec::with_capacity(w.taps.len());
        for t in 0..w.taps.len() {
            let shifted = shifted_columns(&a_prev, (t + n - center) % n);
            taps.push(&delta * shifted.transpose());
        }
        grad_w[l - 1] = taps;
        grad_b[l - 1] = DVector::from_fn(delta.nrows(), |j, _| delta.row(j).sum());
        if l > 1 {
            let mixed = backward_mix(w, &delta);
            let gate = states[l - 1].preactivations.map(dphi);
            delta = mixed.component_mul(&gate);
        }
    }
    (grad_w, grad_b)
}

fn loss(weights: &[LayerWeights], activation: &ActivationProfile, x0: &DMatrix<f64>) -> Result<f64> {
    let states = forward_with_weights(weights, activation, x0)?;
    Ok(states.last().unwrap().preactivations.sum())
}

/// Compare analytic gradients against central finite differences of the
/// loss for every weight and bias parameter; returns the maximum relative
/// error (relative above unit scale, absolute below:
/// |a − f| / max(1, |a|, |f|)). Intended for small networks.
pub fn gradient_check(config: &SimNetworkConfig, x0: &DMatrix<f64>, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive and finite, got {step}"
        )));
    }
    check_input(config, x0)?;
    let mut weights: Vec<LayerWeights> =
        (0..config.depth).map(|l| gaussian_layer_weights(config, l)).collect();
    let activation = config.params.activation;
    let states = forward_with_weights(&weights, &activation, x0)?;
    let (grad_w, grad_b) = analytic_gradients(&weights, &activation, &states);

    let mut worst = 0.0f64;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let fd = (plus - minus) / (2.0 * step);
        let err = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0);
        worst = worst.max(err);
    };

    for l in 0..config.depth {
        for t in 0..weights[l].taps.len() {
            for out in 0..config.channels {
                for inp in 0..config.channels {
                    let orig = weights[l].taps[t][(out, inp)];
                    weights[l].taps[t][(out, inp)] = orig + step;
                    let plus = loss(&weights, &activation, x0)?;
                    weights[l].taps[t][(out, inp)] = orig - step;
                    let minus = loss(&weights, &activation, x0)?;
                    weights[l].taps[t][(out, inp)] = orig;
                    check(grad_w[l][t][(out, inp)], plus, minus);
                }
            }
        }
        for j in 0..config.channels {
            let orig = weights[l].bias[j];
            weights[l].bias[j] = orig + step;
            let plus = loss(&weights, &activation, x0)?;
            weights[l].bias[j] = orig - step;
            let minus = loss(&weights, &activation, x0)?;
            weights[l].bias[j] = orig;
            check(grad_b[l][j], plus, minus);
        }
    }
    Ok(worst)
}

/// Least-squares slope of ln(values) against the index 0, 1, 2, ….
/// Values must be positive and finite.
pub fn log_slope(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("slope needs at least two values".into()));
    }
    if values.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "slope needs positive finite values".into(),
        ));
    }
    let n = values.len() as f64;
    let xbar = (values.len() - 1) as f64 / 2.0;
    let ybar = values.iter().map(|v| v.ln()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in values.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (v.ln() - ybar);
        den += dx * dx;
    }
    Ok(num / den)
}

/// Variance-weighted least-squares slope of ln(values) against the index
/// 0, 1, 2, …. Each point is weighted by 1/σ², where σ is the standard
/// error of ln(values[i]) obtained from the reported standard error of
/// values[i] by the delta method (σ = std_errors[i] / values[i]).
///
/// Ensemble measurements of decaying mode magnitudes lose relative
/// precision with depth, so an unweighted fit lets the noisiest tail
/// points dominate; weighting restores the information balance.
pub fn weighted_log_slope(values: &[f64], std_errors: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("slope needs at least two values".into()));
    }
    if values.len() != std_errors.len() {
        return Err(Error::InvalidParameter(
            "values and standard errors must have the same length".into(),
        ));
    }
    if values.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "slope needs positive finite values".into(),
        ));
    }
    if std_errors.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(
            "weighted slope needs positive finite standard errors".into(),
        ));
    }
    let weights: Vec<f64> = values
        .iter()
        .zip(std_errors)
        .map(|(v, s)| (v / s).powi(2))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let xbar = weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * i as f64)
        .sum::<f64>()
        / wsum;
    let ybar = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.ln())
        .sum::<f64>()
        / wsum;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (w, v)) in weights.iter().zip(values).enumerate() {
        let dx = i as f64 - xbar;
        num += w * dx * (v.ln() - ybar);
        den += w * dx * dx;
    }
    if den == 0.0 {
        return Err(Error::InvalidParameter(
            "weighted slope is underdetermined".into(),
        ));
    }
    Ok(num / den)
}
