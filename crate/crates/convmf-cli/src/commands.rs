//! The seven subcommands. Each one parses/validates its inputs, calls into
//! the `convmf` library, and emits either a JSON report on stdout or a CSV
//! table at `--out` (with a `<out>.meta.json` sidecar).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use convmf::activation::ActivationProfile;
use convmf::covariance::{
    backprop_variance_profile, cyclic_diagonal, depth_scales, dft, first_diagonal_perturbation,
    fourier_eigenvalues, propagate_covariance, CovarianceMatrix, VarianceVector,
};
use convmf::io::{KernelFile, KernelKind};
use convmf::kernels::{
    apply_periodic_2d, delta_orthogonal_kernel, gaussian_kernel, gaussian_kernel_1d,
    orthogonal_kernel,
};
use convmf::meanfield::{
    self, chi_c, solve_c_star, solve_q_star, CriticalPoint, MeanFieldParams,
};
use convmf::random::{RandomSource, RNG_ALGORITHM};
use convmf::simulator::{backward_gradient_norms, mode_decay_experiment, SimNetworkConfig};
use convmf::spectra::{conv_to_matrix, conv_to_matrix_2d, dense_gaussian_matrix, singular_spectrum};

use crate::output::{
    csv_body, fmt_float, parse_config, parse_float_list, parse_grid, ser_maybe_inf, write_artifact,
};
use crate::{CliError, FixedPointArgs, GenKernelArgs, PhaseDiagramArgs, DepthScalesArgs,
    SimulateArgs, SvdArgs, VerifyKernelArgs};

/// Map a library error onto the CLI's exit-code convention: bad inputs and
/// broken files are usage errors (2), solver/numeric failures are numerical
/// errors (3).
fn lib_err(e: convmf::Error) -> CliError {
    use convmf::Error as E;
    match e {
        E::InvalidParameter(_) | E::Format(_) | E::Io(_) => CliError::usage(e.to_string()),
        E::NonConvergence { .. } | E::BracketFailure { .. } | E::NumericOverflow(_) => {
            CliError::numeric(e.to_string())
        }
    }
}

fn activation_by_name(name: &str) -> Result<ActivationProfile, CliError> {
    ActivationProfile::by_name(name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown activation '{name}' (expected tanh, erf, or linear)"
        ))
    })
}

fn params_from(
    activation: &str,
    sigma_w_sq: f64,
    sigma_b_sq: f64,
) -> Result<MeanFieldParams, CliError> {
    let profile = activation_by_name(activation)?;
    MeanFieldParams::new(sigma_w_sq, sigma_b_sq, profile).map_err(lib_err)
}

/// Depth scale ξ = −1/ln χ: ∞ for a marginal multiplier (χ = 1), positive
/// for decay, negative (an e-folding growth scale) for growth.
fn xi_from_chi(chi: f64) -> f64 {
    if chi == 1.0 {
        f64::INFINITY
    } else {
        -1.0 / chi.ln()
    }
}

// ---------------------------------------------------------------------------
// fixed-point
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FixedPointReport<'a> {
    activation: &'a str,
    sigma_w2: f64,
    sigma_b2: f64,
    q_star: f64,
    c_star: f64,
    chi_q: f64,
    chi_c: f64,
    kappa: f64,
    #[serde(serialize_with = "ser_maybe_inf")]
    xi_c: f64,
}

pub fn cmd_fixed_point(args: &FixedPointArgs) -> Result<(), CliError> {
    let params = params_from(&args.activation, args.sigma_w2, args.sigma_b2)?;
    let cp = CriticalPoint::solve_with(&params, args.tol, args.max_iter).map_err(|e| {
        if let convmf::Error::NonConvergence {
            last,
            residual,
            iterations,
        } = e
        {
            CliError::numeric(
                json!({
                    "error": "fixed-point iteration did not converge",
                    "last": last,
                    "residual": residual,
                    "iterations": iterations,
                })
                .to_string(),
            )
        } else {
            lib_err(e)
        }
    })?;
    let report = FixedPointReport {
        activation: &args.activation,
        sigma_w2: args.sigma_w2,
        sigma_b2: args.sigma_b2,
        q_star: cp.q_star,
        c_star: cp.c_star,
        chi_q: cp.chi_q,
        chi_c: cp.chi_c,
        kappa: cp.kappa,
        xi_c: xi_from_chi(cp.chi_c),
    };
    let rendered = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::usage(format!("cannot render report: {e}")))?;
    println!("{rendered}");
    Ok(())
}

// ---------------------------------------------------------------------------
// phase-diagram
// ---------------------------------------------------------------------------

pub fn cmd_phase_diagram(args: &PhaseDiagramArgs) -> Result<(), CliError> {
    let profile = activation_by_name(&args.activation)?;
    let w_grid = parse_grid(&args.sigma_w2_grid)?;
    let b_grid = parse_grid(&args.sigma_b2_grid)?;
    if !(args.phase_tol > 0.0) {
        return Err(CliError::usage(format!(
            "--phase-tol must be positive, got {}",
            args.phase_tol
        )));
    }

    let points: Vec<(f64, f64)> = b_grid
        .iter()
        .flat_map(|&b| w_grid.iter().map(move |&w| (w, b)))
        .collect();

    // Each grid point is independent; the parallel map preserves order, so
    // the CSV body is identical to the sequential one.
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(w, b)| {
            let solved = MeanFieldParams::new(w, b, profile)
                .and_then(|params| {
                    let q_star = solve_q_star(&params, 1.0, args.tol, args.max_iter)?;
                    let c_star = solve_c_star(&params, q_star, args.tol, args.max_iter)?;
                    let chi1 = chi_c(&params, q_star, 1.0)?;
                    Ok((q_star, c_star, chi1))
                });
            match solved {
                Ok((q_star, c_star, chi1)) => {
                    let phase = if (chi1 - 1.0).abs() <= args.phase_tol {
                        "critical"
                    } else if chi1 < 1.0 {
                        "ordered"
                    } else {
                        "chaotic"
                    };
                    vec![
                        fmt_float(w),
                        fmt_float(b),
                        fmt_float(q_star),
                        fmt_float(c_star),
                        fmt_float(chi1),
                        phase.to_owned(),
                        String::new(),
                    ]
                }
                Err(e) => vec![
                    fmt_float(w),
                    fmt_float(b),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ],
            }
        })
        .collect();

    let body = csv_body(
        &["sigma_w2", "sigma_b2", "q_star", "c_star", "chi1", "phase", "error"],
        &rows,
    )?;
    write_artifact(
        &args.out,
        &body,
        "phase-diagram",
        json!({
            "activation": args.activation,
            "sigma_w2_grid": args.sigma_w2_grid,
            "sigma_b2_grid": args.sigma_b2_grid,
            "phase_tol": args.phase_tol,
            "tol": args.tol,
            "max_iter": args.max_iter,
        }),
    )
}

// ---------------------------------------------------------------------------
// depth-scales
// ---------------------------------------------------------------------------

pub fn cmd_depth_scales(args: &DepthScalesArgs) -> Result<(), CliError> {
    let params = params_from(&args.activation, args.sigma_w2, args.sigma_b2)?;
    let taps = parse_float_list(&args.v)?;
    let v = VarianceVector::new(taps).map_err(lib_err)?;
    let cp = CriticalPoint::solve_with(&params, args.tol, args.max_iter).map_err(lib_err)?;
    let lambdas = fourier_eigenvalues(&v, args.n).map_err(lib_err)?;
    let spectrum = depth_scales(&lambdas, cp.chi_c).map_err(lib_err)?;

    let rows: Vec<Vec<String>> = (0..args.n)
        .map(|alpha| {
            vec![
                alpha.to_string(),
                fmt_float(spectrum.lambdas[alpha].re),
                fmt_float(spectrum.lambdas[alpha].im),
                fmt_float(spectrum.lambdas[alpha].norm()),
                fmt_float(spectrum.xis[alpha]),
            ]
        })
        .collect();

    let body = csv_body(&["alpha", "lambda_re", "lambda_im", "lambda_abs", "xi"], &rows)?;
    write_artifact(
        &args.out,
        &body,
        "depth-scales",
        json!({
            "activation": args.activation,
            "sigma_w2": args.sigma_w2,
            "sigma_b2": args.sigma_b2,
            "v": args.v,
            "n": args.n,
            "chi_c": cp.chi_c,
            "tol": args.tol,
            "max_iter": args.max_iter,
        }),
    )
}

// ---------------------------------------------------------------------------
// gen-kernel
// ---------------------------------------------------------------------------

pub fn cmd_gen_kernel(args: &GenKernelArgs) -> Result<(), CliError> {
    let kind: KernelKind = args
        .kind
        .parse()
        .map_err(|_| CliError::usage(format!("unknown kernel kind '{}'", args.kind)))?;
    let source = RandomSource::new(args.seed);

    if kind != KernelKind::Delta {
        if let Some(g) = args.gain {
            if g != 1.0 {
                return Err(CliError::usage(format!(
                    "--gain applies only to delta kernels (got gain {g} for {})",
                    kind.name()
                )));
            }
        }
    }
    if kind != KernelKind::Gaussian {
        if args.sigma_w2.is_some() || args.grid.is_some() {
            return Err(CliError::usage(format!(
                "--sigma-w2/--grid apply only to gaussian kernels (kind is {})",
                kind.name()
            )));
        }
    }

    let gain = args.gain.unwrap_or(1.0);
    let kernel = match kind {
        KernelKind::Orthogonal => {
            orthogonal_kernel(args.ksize, args.cin, args.cout, source).map_err(lib_err)?
        }
        KernelKind::Delta => {
            delta_orthogonal_kernel(args.ksize, args.cin, args.cout, gain, source)
                .map_err(lib_err)?
        }
        KernelKind::Gaussian => {
            let k = args.ksize;
            let grid_name = args.grid.as_deref().unwrap_or("uniform");
            let grid = match grid_name {
                "uniform" => DMatrix::from_element(k, k, 1.0 / (k * k) as f64),
                "one-hot" => {
                    let mut g = DMatrix::zeros(k, k);
                    g[(k / 2, k / 2)] = 1.0;
                    g
                }
                other => {
                    return Err(CliError::usage(format!(
                        "unknown variance grid '{other}' (expected uniform or one-hot)"
                    )))
                }
            };
            let sigma_w2 = args.sigma_w2.unwrap_or(1.0);
            gaussian_kernel(k, args.cin, args.cout, sigma_w2, &grid, source).map_err(lib_err)?
        }
    };

    let file = KernelFile::new(kind, gain, RNG_ALGORITHM, args.seed, kernel).map_err(lib_err)?;
    let mut bytes = Vec::new();
    file.write_to(&mut bytes).map_err(lib_err)?;
    write_artifact(
        &args.out,
        &bytes,
        "gen-kernel",
        json!({
            "kind": kind.name(),
            "ksize": args.ksize,
            "cin": args.cin,
            "cout": args.cout,
            "gain": gain,
            "sigma_w2": args.sigma_w2,
            "grid": args.grid,
            "seed": args.seed,
            "rng_algorithm": RNG_ALGORITHM,
        }),
    )?;
    println!(
        "{}",
        json!({
            "kind": kind.name(),
            "k_size": args.ksize,
            "c_in": args.cin,
            "c_out": args.cout,
            "gain": gain,
            "seed": args.seed,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-kernel
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyReport {
    file: String,
    kind: &'static str,
    k_size: usize,
    c_in: usize,
    c_out: usize,
    gain: f64,
    n: usize,
    trials: usize,
    max_norm_deviation: f64,
    orthogonality_checked: bool,
    pass: bool,
}

fn frobenius(channels: &[DMatrix<f64>]) -> f64 {
    channels.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

pub fn cmd_verify_kernel(args: &VerifyKernelArgs) -> Result<(), CliError> {
    let file = KernelFile::load(&args.file).map_err(lib_err)?;
    let kernel = &file.kernel;
    let n = args.n.unwrap_or_else(|| kernel.k_size().max(8));
    if n < kernel.k_size() {
        return Err(CliError::usage(format!(
            "--n {n} is smaller than the kernel size {}",
            kernel.k_size()
        )));
    }
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }

    let mut rng = RandomSource::new(args.seed).rng();
    let mut max_dev = 0.0f64;
    for _ in 0..args.trials {
        let x: Vec<DMatrix<f64>> = (0..kernel.c_in())
            .map(|_| DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let y = apply_periodic_2d(kernel, &x).map_err(lib_err)?;
        let ratio = frobenius(&y) / frobenius(&x);
        max_dev = max_dev.max((ratio - file.gain).abs());
    }

    let checked = file.kind != KernelKind::Gaussian;
    let pass = !checked || max_dev <= args.tol;
    let report = VerifyReport {
        file: args.file.display().to_string(),
        kind: file.kind.name(),
        k_size: kernel.k_size(),
        c_in: kernel.c_in(),
        c_out: kernel.c_out(),
        gain: file.gain,
        n,
        trials: args.trials,
        max_norm_deviation: max_dev,
        orthogonality_checked: checked,
        pass,
    };
    let rendered = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::usage(format!("cannot render report: {e}")))?;
    println!("{rendered}");
    if !pass {
        return Err(CliError::numeric(format!(
            "norm preservation violated: max deviation {max_dev:e} > tol {:e}",
            args.tol
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Merged view of config-file values and flag overrides for `simulate`.
struct SimSettings {
    values: BTreeMap<String, String>,
}

impl SimSettings {
    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::usage(format!("missing required setting '{key}'")))
    }

    fn optional(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| CliError::usage(format!("setting '{key}': cannot parse '{raw}'")))
    }

    fn parse_optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.optional(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("setting '{key}': cannot parse '{raw}'"))),
        }
    }

    fn check_keys(&self, allowed: &[&str], mode: &str) -> Result<(), CliError> {
        for key in self.values.keys() {
            if key != "mode" && !allowed.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "setting '{key}' is not recognized for mode '{mode}' (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

fn merge_settings(args: &SimulateArgs) -> Result<SimSettings, CliError> {
    let mut values = match &args.config {
        Some(path) => parse_config(path)?,
        None => BTreeMap::new(),
    };
    // Flag overrides win over file values.
    let overrides: [(&str, Option<String>); 12] = [
        ("mode", args.mode.clone()),
        ("activation", args.activation.clone()),
        ("sigma-w2", args.sigma_w2.map(|x| x.to_string())),
        ("sigma-b2", args.sigma_b2.map(|x| x.to_string())),
        ("v", args.v.clone()),
        ("n", args.n.map(|x| x.to_string())),
        ("depth", args.depth.map(|x| x.to_string())),
        ("channels", args.channels.map(|x| x.to_string())),
        ("members", args.members.map(|x| x.to_string())),
        ("seed", args.seed.map(|x| x.to_string())),
        ("q0", args.q0.map(|x| x.to_string())),
        ("c0", args.c0.map(|x| x.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            values.insert(key.to_owned(), v);
        }
    }
    if let Some(coeffs) = &args.eps_coeffs {
        values.insert("eps-coeffs".to_owned(), coeffs.clone());
    }
    Ok(SimSettings { values })
}

fn settings_params(s: &SimSettings) -> Result<MeanFieldParams, CliError> {
    params_from(s.require("activation")?, s.parse("sigma-w2")?, s.parse("sigma-b2")?)
}

fn settings_variance(s: &SimSettings) -> Result<VarianceVector, CliError> {
    let taps = parse_float_list(s.require("v")?)?;
    VarianceVector::new(taps).map_err(lib_err)
}

fn simulate_covariance(s: &SimSettings, out: &Path) -> Result<(), CliError> {
    s.check_keys(
        &["activation", "sigma-w2", "sigma-b2", "v", "n", "depth", "q0", "c0"],
        "covariance",
    )?;
    let params = settings_params(s)?;
    let v = settings_variance(s)?;
    let n: usize = s.parse("n")?;
    let depth: usize = s.parse("depth")?;
    let q0: f64 = s.parse("q0")?;
    let c0: f64 = s.parse("c0")?;
    let s0 = CovarianceMatrix::fixed_point(q0, c0, n).map_err(lib_err)?;
    let trajectory = propagate_covariance(&params, &v, &s0, depth).map_err(lib_err)?;

    let mut rows = Vec::with_capacity((depth + 1) * n * n);
    for (layer, sigma) in trajectory.iter().enumerate() {
        for row in 0..n {
            for col in 0..n {
                rows.push(vec![
                    layer.to_string(),
                    row.to_string(),
                    col.to_string(),
                    fmt_float(sigma.entries()[(row, col)]),
                ]);
            }
        }
    }
    let body = csv_body(&["layer", "row", "col", "value"], &rows)?;
    write_artifact(out, &body, "simulate", settings_json(s))
}

fn simulate_gradients(s: &SimSettings, out: &Path) -> Result<(), CliError> {
    s.check_keys(
        &["activation", "sigma-w2", "sigma-b2", "v", "n", "depth", "channels", "seed", "q0"],
        "gradients",
    )?;
    let params = settings_params(s)?;
    let v = settings_variance(s)?;
    let n: usize = s.parse("n")?;
    let depth: usize = s.parse("depth")?;
    let channels: usize = s.parse("channels")?;
    let seed: u64 = s.parse("seed")?;
    let q0 = match s.parse_optional::<f64>("q0")? {
        Some(q) => q,
        None => solve_q_star(&params, 1.0, meanfield::DEFAULT_TOL, meanfield::DEFAULT_MAX_ITER)
            .map_err(lib_err)?,
    };
    if !(q0 >= 0.0) || !q0.is_finite() {
        return Err(CliError::usage(format!(
            "q0 must be a finite nonnegative real, got {q0}"
        )));
    }
    let chi1 = chi_c(&params, q0, 1.0).map_err(lib_err)?;

    let source = RandomSource::new(seed);
    let config = SimNetworkConfig::new(depth, channels, n, params, v, source.clone())
        .map_err(lib_err)?;
    // Stream 0 of the config seed is reserved for the input; layer weights
    // use streams l + 1.
    let mut rng = source.child(0).rng();
    let std = q0.sqrt();
    let x0 = DMatrix::from_fn(channels, n, |_, _| std * rng.sample::<f64, _>(StandardNormal));
    let profile = backward_gradient_norms(&config, &x0).map_err(lib_err)?;
    let theory = backprop_variance_profile(chi1, depth).map_err(lib_err)?;

    let rows: Vec<Vec<String>> = (0..depth)
        .map(|i| {
            vec![
                (i + 1).to_string(),
                fmt_float(profile.norms[i]),
                fmt_float(theory[i]),
            ]
        })
        .collect();
    let body = csv_body(&["layer", "relative_norm", "theory"], &rows)?;
    write_artifact(out, &body, "simulate", settings_json(s))
}

fn simulate_modes(s: &SimSettings, out: &Path) -> Result<(), CliError> {
    s.check_keys(
        &[
            "activation", "sigma-w2", "sigma-b2", "v", "n", "depth", "channels", "members",
            "seed", "eps-coeffs",
        ],
        "modes",
    )?;
    let params = settings_params(s)?;
    let v = settings_variance(s)?;
    let n: usize = s.parse("n")?;
    let depth: usize = s.parse("depth")?;
    let channels: usize = s.parse("channels")?;
    let members: usize = s.parse("members")?;
    let seed: u64 = s.parse("seed")?;
    let coeffs = parse_float_list(s.require("eps-coeffs")?)?;
    if coeffs.len() != n {
        return Err(CliError::usage(format!(
            "eps-coeffs has {} entries, expected n = {n}",
            coeffs.len()
        )));
    }
    let complex: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let eps0 = first_diagonal_perturbation(&complex).map_err(lib_err)?;

    let cp = CriticalPoint::solve(&params).map_err(lib_err)?;
    let sigma_star = CovarianceMatrix::fixed_point(cp.q_star, cp.c_star, n).map_err(lib_err)?;
    let lambdas = fourier_eigenvalues(&v, n).map_err(lib_err)?;

    let config = SimNetworkConfig::new(
        depth,
        channels,
        n,
        params.clone(),
        v.clone(),
        RandomSource::new(seed),
    )
    .map_err(lib_err)?;
    let measured =
        mode_decay_experiment(&config, &sigma_star, &eps0, members).map_err(lib_err)?;

    // Deterministic companion prediction: propagate the perturbed and
    // control covariances through the exact layer map and transform the
    // difference of first cyclic diagonals, mode by mode.
    let perturbed_start =
        CovarianceMatrix::new(sigma_star.entries() + &eps0).map_err(lib_err)?;
    let perturbed = propagate_covariance(&params, &v, &perturbed_start, depth).map_err(lib_err)?;
    let control = propagate_covariance(&params, &v, &sigma_star, depth).map_err(lib_err)?;

    let mut rows = Vec::with_capacity((depth + 1) * n);
    for layer in 0..=depth {
        let diff = perturbed[layer].entries() - control[layer].entries();
        let theory = dft(&cyclic_diagonal(&diff, 1));
        for mode in 0..n {
            let rate = (cp.chi_c * lambdas[mode].norm()).ln();
            rows.push(vec![
                layer.to_string(),
                mode.to_string(),
                fmt_float(measured.magnitudes[layer][mode]),
                fmt_float(measured.std_errors[layer][mode]),
                fmt_float(theory[mode].norm()),
                fmt_float(rate),
            ]);
        }
    }
    let body = csv_body(
        &["layer", "mode", "magnitude", "std_error", "theory_magnitude", "predicted_rate"],
        &rows,
    )?;
    write_artifact(out, &body, "simulate", settings_json(s))
}

fn settings_json(s: &SimSettings) -> serde_json::Value {
    serde_json::Value::Object(
        s.values
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect(),
    )
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let settings = merge_settings(args)?;
    let mode = settings.require("mode")?.to_owned();
    match mode.as_str() {
        "covariance" => simulate_covariance(&settings, &args.out),
        "gradients" => simulate_gradients(&settings, &args.out),
        "modes" => simulate_modes(&settings, &args.out),
        other => Err(CliError::usage(format!(
            "unknown mode '{other}' (expected covariance, gradients, or modes)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// svd
// ---------------------------------------------------------------------------

fn require_flag<T>(value: Option<T>, flag: &str, ensemble: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::usage(format!("--{flag} is required for ensemble '{ensemble}'"))
    })
}

pub fn cmd_svd(args: &SvdArgs) -> Result<(), CliError> {
    let matrix = match args.ensemble.as_str() {
        "blockcirc" => {
            let n = require_flag(args.n, "n", "blockcirc")?;
            let c = require_flag(args.c, "c", "blockcirc")?;
            let ksize = require_flag(args.ksize, "ksize", "blockcirc")?;
            let seed = require_flag(args.seed, "seed", "blockcirc")?;
            if ksize % 2 == 0 {
                return Err(CliError::usage(format!(
                    "--ksize must be odd for a centered 1D kernel, got {ksize}"
                )));
            }
            let v = VarianceVector::uniform(ksize / 2);
            let kernel = gaussian_kernel_1d(c, c, 1.0, &v, RandomSource::new(seed))
                .map_err(lib_err)?;
            conv_to_matrix(&kernel, n).map_err(lib_err)?.into_matrix()
        }
        "dense" => {
            let n = require_flag(args.n, "n", "dense")?;
            let c = require_flag(args.c, "c", "dense")?;
            let seed = require_flag(args.seed, "seed", "dense")?;
            let size = n * c;
            dense_gaussian_matrix(size, size, 1.0 / size as f64, RandomSource::new(seed))
                .map_err(lib_err)?
        }
        "kernel-file" => {
            let path = args.file.as_ref().ok_or_else(|| {
                CliError::usage("--file is required for ensemble 'kernel-file'")
            })?;
            let n = require_flag(args.n, "n", "kernel-file")?;
            let file = KernelFile::load(path).map_err(lib_err)?;
            conv_to_matrix_2d(&file.kernel, n).map_err(lib_err)?
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown ensemble '{other}' (expected blockcirc, dense, or kernel-file)"
            )))
        }
    };

    let report = singular_spectrum(&matrix).map_err(lib_err)?;
    let rows: Vec<Vec<String>> = report
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| vec![i.to_string(), fmt_float(s)])
        .collect();
    let body = csv_body(&["index", "singular_value"], &rows)?;
    write_artifact(
        &args.out,
        &body,
        "svd",
        json!({
            "ensemble": args.ensemble,
            "n": args.n,
            "c": args.c,
            "ksize": args.ksize,
            "seed": args.seed,
            "file": args.file.as_ref().map(|p| p.display().to_string()),
            "rows": matrix.nrows(),
            "cols": matrix.ncols(),
            "ks_to_quarter_circle": report.ks_to_reference,
            "reference_edge": report.reference_edge,
        }),
    )
}
