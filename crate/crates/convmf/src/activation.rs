//! Activation functions with their first and second derivatives.
//!
//! The mean-field recursions need φ, φ′ and φ″ under Gaussian expectations:
//! φ ⊗ φ drives the covariance map, φ′ ⊗ φ′ its linearization, and φ ⊗ φ″
//! the off-diagonal Jacobian coefficient. Bundling the three callables keeps
//! the derivative set consistent — every profile is verified against finite
//! differences in the tests, and user-supplied profiles can be checked with
//! the same harness.

/// An activation function φ together with φ′ and φ″.
///
/// The built-in profiles are [`ActivationProfile::tanh`],
/// [`ActivationProfile::erf`] (φ(x) = erf(x), the analytically solvable
/// case) and [`ActivationProfile::linear`]. Custom activations plug in as
/// plain function pointers; they should be smooth with bounded second
/// moments under Gaussian measure, or the quadrature guarantees elsewhere in
/// the crate do not apply.
#[derive(Debug, Clone, Copy)]
pub struct ActivationProfile {
    /// Short identifier ("tanh", "erf", "linear", …) used in reports.
    pub name: &'static str,
    /// φ itself.
    pub value: fn(f64) -> f64,
    /// First derivative φ′.
    pub deriv1: fn(f64) -> f64,
    /// Second derivative φ″.
    pub deriv2: fn(f64) -> f64,
}

impl ActivationProfile {
    /// Hyperbolic tangent: φ′ = 1 − φ², φ″ = −2φ(1 − φ²).
    pub fn tanh() -> Self {
        Self {
            name: "tanh",
            value: f64::tanh,
            deriv1: |x| {
                let t = x.tanh();
                1.0 - t * t
            },
            deriv2: |x| {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            },
        }
    }

    /// Error function: φ(x) = erf(x), φ′ = (2/√π)e^{−x²}, φ″ = −2x·φ′.
    ///
    /// Correlators of this profile have arcsine closed forms, which the test
    /// suite uses as an exact oracle.
    pub fn erf() -> Self {
        const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_6;
        Self {
            name: "erf",
            value: libm::erf,
            deriv1: |x| TWO_OVER_SQRT_PI * (-x * x).exp(),
            deriv2: |x| -2.0 * x * TWO_OVER_SQRT_PI * (-x * x).exp(),
        }
    }

    /// Identity activation; turns every recursion affine and exactly
    /// solvable.
    pub fn linear() -> Self {
        Self {
            name: "linear",
            value: |x| x,
            deriv1: |_| 1.0,
            deriv2: |_| 0.0,
        }
    }

    /// Look up a built-in profile by its identifier.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Self::tanh()),
            "erf" => Some(Self::erf()),
            "linear" => Some(Self::linear()),
            _ => None,
        }
    }
}
