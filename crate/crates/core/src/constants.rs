//! Parameter validation, regime classification, and the closed-form constants
//! of the radial fast-diffusion profile problem.
//!
//! The profile equation
//!
//! ```text
//! (n-1)/m Δv^m + 2β/(1-m) v + β x·∇v = 0,   v(0) = λ,  v > 0 on ℝⁿ
//! ```
//!
//! is well posed for `n ≥ 3` and `0 < m < (n-2)/n`. Within that range the
//! exponent `m = (n-2)/(n+2)` is special: there `n-2-(n+2)m = 0` and every
//! logarithmic correction of the far-field expansion degenerates, so the two
//! regimes must never be confused. All downstream coefficients are rational
//! functions of the two factors
//!
//! ```text
//! p = n-2-nm        (> 0 on the valid range)
//! q = n-2-(n+2)m    (sign flips at the critical exponent)
//! ```
//!
//! which are computed once and reused so that near-critical cancellation
//! happens in a single, controlled subtraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison tolerance for detecting the critical exponent `m = (n-2)/(n+2)`.
///
/// Misclassification silently corrupts every downstream limit target, so the
/// band is kept far below any physically meaningful perturbation of `m`.
pub const YAMABE_TOL: f64 = 1e-12;

/// Exponent regime of the pair `(n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `0 < m < (n-2)/n` and `m` away from `(n-2)/(n+2)`.
    FastSubcritical,
    /// `m = (n-2)/(n+2)` within [`YAMABE_TOL`].
    YamabeCritical,
    /// Outside the admissible range; no profile theory applies.
    Invalid,
}

impl Regime {
    pub fn is_valid(self) -> bool {
        !matches!(self, Regime::Invalid)
    }

    pub fn is_critical(self) -> bool {
        matches!(self, Regime::YamabeCritical)
    }
}

/// Classify the exponent pair. Total function: invalid input yields
/// [`Regime::Invalid`] rather than an error.
pub fn classify(n: u32, m: f64) -> Regime {
    if n < 3 || !m.is_finite() || m <= 0.0 || m >= (n as f64 - 2.0) / n as f64 {
        return Regime::Invalid;
    }
    let critical = (n as f64 - 2.0) / (n as f64 + 2.0);
    if (m - critical).abs() <= YAMABE_TOL {
        Regime::YamabeCritical
    } else {
        Regime::FastSubcritical
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid regime: n = {n}, m = {m} violates n >= 3, 0 < m < (n-2)/n")]
    InvalidRegime { n: u32, m: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// The problem quadruple `(n, m, β, λ)`.
///
/// `beta` is the self-similar scaling rate (inverse time), `lambda` the
/// center value `v(0)` of the profile. Construction validates the regime,
/// so a held `ProblemParams` is always usable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub m: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(n: u32, m: f64, beta: f64, lambda: f64) -> Result<Self, ParamError> {
        if !classify(n, m).is_valid() {
            return Err(ParamError::InvalidRegime { n, m });
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ParamError::NonPositive { name: "beta", value: beta });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ParamError::NonPositive { name: "lambda", value: lambda });
        }
        Ok(Self { n, m, beta, lambda })
    }

    pub fn regime(&self) -> Regime {
        classify(self.n, self.m)
    }

    /// Same `(n, m)` with a different amplitude/rate pair.
    pub fn with_lambda_beta(&self, lambda: f64, beta: f64) -> Result<Self, ParamError> {
        Self::new(self.n, self.m, beta, lambda)
    }

    /// `n - 2 - nm`, positive on the whole valid range.
    pub fn p_factor(&self) -> f64 {
        let n = self.n as f64;
        n - 2.0 - n * self.m
    }

    /// `n - 2 - (n+2)m`, snapped to exactly zero in the critical regime so
    /// that the degenerate constants vanish identically.
    pub fn q_factor(&self) -> f64 {
        if self.regime().is_critical() {
            0.0
        } else {
            let n = self.n as f64;
            n - 2.0 - (n + 2.0) * self.m
        }
    }
}

/// Closed-form constants of the far-field expansion, all reproducible from
/// `(n, m, β, λ)` plus the tail constant `K`.
///
/// The `K`-dependent entries (`k`, `k0`, `a1`, `a0`) stay `None` until the
/// extraction pipeline supplies `K`; see [`DerivedConstants::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Leading tail coefficient `c1 = 2(n-1)(n-2-nm)/(1-m)`:
    /// `r²v^{1-m} ~ (c1/β) log r`.
    pub c1: f64,
    /// Log-log coefficient `κ = (n-2-(n+2)m)/(2(n-2-nm))` of the expansion
    /// bracket; sign follows `q`.
    pub kappa: f64,
    /// Source constant `b0 = 2(n-1)(n-2-nm)(n-2-(n+2)m)/((1-m)²β)` of the
    /// damped equation for `h = w - (c1/β)s`.
    pub b0: f64,
    /// `a2 = (n-1)(n-2-(n+2)m)/((1-m)β)`; `s·h_s → -a2`.
    pub a2: f64,
    /// `a3 = (n-1)(n-2-(n+2)m)²/((1-m)²β)`; decay scale of the `h₁` source.
    pub a3: f64,
    /// Coefficient `A = (n-1)(n-2-(n+2)m)²/(2(n-2-nm)(1-m)β)` of the
    /// `(1+log s)/s` term in the `h₁` tail; also `s²h₁ₛ/log s → -A`.
    pub h1_coeff: f64,
    /// Tail constant `K(λ,β) = lim h₁(s)`, filled by extraction.
    pub k: Option<f64>,
    /// Universal constant `K₀ = (1-m)K(1,1)/(2(n-1)(n-2-nm))`, independent
    /// of `λ` and `β`.
    pub k0: Option<f64>,
    /// `a1(λ,β)` evaluated at the extracted `K`.
    pub a1: Option<f64>,
    /// Expansion coefficient `a0` built from `a1(1,1)`.
    pub a0: Option<f64>,
}

/// Evaluate every `K`-independent constant.
///
/// Defined in both valid regimes; at the critical exponent `q = 0` forces
/// `kappa = b0 = a2 = a3 = h1_coeff = 0` exactly.
pub fn derive_constants(params: &ProblemParams) -> Result<DerivedConstants, ParamError> {
    if !params.regime().is_valid() {
        return Err(ParamError::InvalidRegime { n: params.n, m: params.m });
    }
    let n = params.n as f64;
    let m = params.m;
    let beta = params.beta;
    let om = 1.0 - m;
    let p = params.p_factor();
    let q = params.q_factor();

    let c1 = 2.0 * (n - 1.0) * p / om;
    let kappa = q / (2.0 * p);
    let b0 = 2.0 * (n - 1.0) * p * q / (om * om * beta);
    let a2 = (n - 1.0) * q / (om * beta);
    let a3 = (n - 1.0) * q * q / (om * om * beta);
    let h1_coeff = (n - 1.0) * q * q / (2.0 * p * om * beta);

    Ok(DerivedConstants {
        c1,
        kappa,
        b0,
        a2,
        a3,
        h1_coeff,
        k: None,
        k0: None,
        a1: None,
        a0: None,
    })
}

impl DerivedConstants {
    /// Fill the `K`-dependent fields from an extracted tail constant.
    ///
    /// `k0` is recovered through the scaling identity
    /// `K₀ = (1-m)βK/(2(n-1)(n-2-nm)) - (1-m)/2·log λ - 1/2·log β`,
    /// then `a1 = a1_of(K)` at the run's `(λ,β)` and `a0` from `a1(1,1)`.
    pub fn resolve(&mut self, params: &ProblemParams, k: f64) {
        let n = params.n as f64;
        let om = 1.0 - params.m;
        let p = params.p_factor();
        let k0 = om * params.beta * k / (2.0 * (n - 1.0) * p)
            - 0.5 * om * params.lambda.ln()
            - 0.5 * params.beta.ln();
        let unit = ProblemParams { lambda: 1.0, beta: 1.0, ..*params };
        let k11 = k_closed_form(1.0, 1.0, k0, params);
        let a1_11 = a1_of(k11, &unit);
        self.k = Some(k);
        self.k0 = Some(k0);
        self.a1 = Some(a1_of(k, params));
        self.a0 = Some(a0_of(a1_11, params));
    }
}

/// The coefficient `a1(λ,β)`, affine in the tail constant `K`:
///
/// ```text
/// a1 = 2(1-2m)(n-1)(n-2-nm)/(1-m)² + (n-1)(n-2-(n+2)m)²/(1-m)²
///      + (n-2-(n+2)m)/(1-m) · K · β
/// ```
pub fn a1_of(k: f64, params: &ProblemParams) -> f64 {
    let n = params.n as f64;
    let m = params.m;
    let om = 1.0 - m;
    let p = params.p_factor();
    let q = params.q_factor();
    2.0 * (1.0 - 2.0 * m) * (n - 1.0) * p / (om * om)
        + (n - 1.0) * q * q / (om * om)
        + q * k * params.beta / om
}

/// The `1/log r` expansion coefficient built from `a1` at `(λ,β) = (1,1)`:
///
/// ```text
/// a0 = (n-2-(n+2)m)²/(4(n-2-nm)²) - (1-m)² a1(1,1)/(4(n-1)(n-2-nm)²)
/// ```
///
/// The first term equals `κ²`.
pub fn a0_of(a1_11: f64, params: &ProblemParams) -> f64 {
    let n = params.n as f64;
    let om = 1.0 - params.m;
    let p = params.p_factor();
    let q = params.q_factor();
    let kappa_sq = q * q / (4.0 * p * p);
    kappa_sq - om * om * a1_11 / (4.0 * (n - 1.0) * p * p)
}

/// Closed form of the tail constant once `K₀` is known:
///
/// ```text
/// K(λ,β) = 2(n-1)(n-2-nm)/((1-m)β) · { (1-m)/2·log λ + 1/2·log β + K₀ }
/// ```
pub fn k_closed_form(lambda: f64, beta: f64, k0: f64, params: &ProblemParams) -> f64 {
    let n = params.n as f64;
    let om = 1.0 - params.m;
    let p = params.p_factor();
    (2.0 * (n - 1.0) * p / (om * beta)) * (0.5 * om * lambda.ln() + 0.5 * beta.ln() + k0)
}

/// Profile amplitude selected by the far-field constant `K₁` of the initial
/// data: `λ₁ = (e^{2(K₁-K₀)}/β)^{1/(1-m)}`.
///
/// Satisfies the matching identity
/// `(1-m)/2·log λ₁ + 1/2·log β + K₀ = K₁` exactly.
pub fn lambda1_of(k1: f64, k0: f64, beta: f64, m: f64) -> f64 {
    ((2.0 * (k1 - k0) - beta.ln()) / (1.0 - m)).exp()
}

/// Surface area of the unit sphere `S^{n-1}` in ℝⁿ, by the recurrence
/// `A(n) = 2π/(n-2) · A(n-2)` with `A(1) = 2`, `A(2) = 2π`.
pub fn unit_sphere_area(n: u32) -> f64 {
    assert!(n >= 1, "dimension must be at least 1");
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    let mut area = if n % 2 == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    while k < n {
        k += 2;
        area *= 2.0 * std::f64::consts::PI / (k as f64 - 2.0);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(n: u32, m: f64, beta: f64, lambda: f64) -> ProblemParams {
        ProblemParams::new(n, m, beta, lambda).unwrap()
    }

    #[test]
    fn classify_three_examples() {
        assert_eq!(classify(3, 0.1), Regime::FastSubcritical);
        assert_eq!(classify(3, 0.2), Regime::YamabeCritical);
        assert_eq!(classify(3, 0.5), Regime::Invalid);
    }

    #[test]
    fn classify_boundaries() {
        assert_eq!(classify(2, 0.1), Regime::Invalid);
        assert_eq!(classify(3, 0.0), Regime::Invalid);
        assert_eq!(classify(3, -0.2), Regime::Invalid);
        assert_eq!(classify(3, 1.0 / 3.0), Regime::Invalid);
        assert_eq!(classify(5, 3.0 / 7.0), Regime::YamabeCritical);
        assert_eq!(classify(6, 0.5), Regime::YamabeCritical);
        assert_eq!(classify(3, f64::NAN), Regime::Invalid);
    }

    #[test]
    fn classify_stable_under_small_perturbation() {
        // Perturbations below half the comparison tolerance never flip the class.
        let critical = 1.0 / 5.0;
        for eps in [0.0, 0.4e-12, -0.4e-12] {
            assert_eq!(classify(3, critical + eps), Regime::YamabeCritical);
        }
        assert_eq!(classify(3, critical + 3e-12), Regime::FastSubcritical);
        for eps in [0.0, 0.4e-12, -0.4e-12] {
            assert_eq!(classify(3, 0.1 + eps), Regime::FastSubcritical);
        }
    }

    #[test]
    fn derived_constants_n3_m01() {
        let c = derive_constants(&params(3, 0.1, 1.0, 1.0)).unwrap();
        assert_relative_eq!(c.c1, 2.8 / 0.9, max_relative = 1e-14);
        assert_relative_eq!(c.kappa, 0.5 / 1.4, max_relative = 1e-14);
        assert_relative_eq!(c.b0, 1.4 / 0.81, max_relative = 1e-14);
        assert_relative_eq!(c.a2, 1.0 / 0.9, max_relative = 1e-14);
        assert_relative_eq!(c.a3, 0.5 / 0.81, max_relative = 1e-14);
        // h1_coeff = 2 * 0.25 / (2 * 0.7 * 0.9) = 0.5 / 1.26
        assert_relative_eq!(c.h1_coeff, 0.5 / 1.26, max_relative = 1e-14);
        assert!(c.k.is_none() && c.k0.is_none() && c.a1.is_none() && c.a0.is_none());
    }

    #[test]
    fn derived_constants_n5_m05_sign_flip() {
        let c = derive_constants(&params(5, 0.5, 1.0, 1.0)).unwrap();
        assert_relative_eq!(c.c1, 8.0, max_relative = 1e-14);
        assert_relative_eq!(c.kappa, -0.5, max_relative = 1e-14);
        assert!(c.a2 < 0.0 && c.b0 < 0.0);
        assert!(c.a3 > 0.0, "a3 is quadratic in q");
    }

    #[test]
    fn derived_constants_critical_degenerate() {
        let c = derive_constants(&params(3, 0.2, 2.0, 1.5)).unwrap();
        assert_eq!(c.kappa, 0.0);
        assert_eq!(c.b0, 0.0);
        assert_eq!(c.a2, 0.0);
        assert_eq!(c.a3, 0.0);
        assert_eq!(c.h1_coeff, 0.0);
        assert!(c.c1 > 0.0);
        // Snap also at critical exponents that do not round to zero exactly.
        let c = derive_constants(&params(5, 3.0 / 7.0, 2.0, 1.0)).unwrap();
        assert_eq!(c.a2, 0.0);
    }

    #[test]
    fn derive_constants_rejects_invalid() {
        assert!(ProblemParams::new(3, 0.5, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 0.1, 0.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 0.1, 1.0, -2.0).is_err());
    }

    #[test]
    fn cross_identities_hold_over_random_params() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(3..10);
            let upper = (n as f64 - 2.0) / n as f64;
            let m = rng.gen_range(1e-3..upper - 1e-3);
            let beta = rng.gen_range(0.1..5.0);
            let lambda = rng.gen_range(0.1..5.0);
            let pr = params(n, m, beta, lambda);
            let c = derive_constants(&pr).unwrap();
            let q = pr.q_factor();
            assert!(c.c1 > 0.0);
            assert_relative_eq!(c.b0 * (1.0 - m) * beta, c.c1 * q, max_relative = 1e-12);
            assert_relative_eq!(c.a3, c.a2 * q / (1.0 - m), max_relative = 1e-12, epsilon = 1e-300);
            assert_eq!(c.kappa.signum(), q.signum());
        }
    }

    #[test]
    fn a1_examples_and_affinity() {
        let pr = params(3, 0.1, 1.0, 1.0);
        assert_relative_eq!(a1_of(0.0, &pr), 2.24 / 0.81 + 0.5 / 0.81, max_relative = 1e-13);

        let pr5 = params(5, 0.5, 1.0, 1.0);
        assert_relative_eq!(a1_of(0.0, &pr5), 4.0, max_relative = 1e-13);

        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let k = rng.gen_range(-10.0..10.0);
            let beta = rng.gen_range(0.2..4.0);
            let pr = params(3, 0.1, beta, 1.0);
            let slope = pr.q_factor() / (1.0 - pr.m) * k * beta;
            assert_relative_eq!(a1_of(k, &pr) - a1_of(0.0, &pr), slope, max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn a0_examples() {
        let pr = params(3, 0.1, 1.0, 1.0);
        assert_relative_eq!(a0_of(0.0, &pr), 0.25 / 1.96, max_relative = 1e-13);
        let crit = params(3, 0.2, 1.0, 1.0);
        // First term vanishes at the critical exponent.
        let a1_11 = 1.0;
        let expected = -0.64 * a1_11 / (4.0 * 2.0 * 0.4 * 0.4);
        assert_relative_eq!(a0_of(a1_11, &crit), expected, max_relative = 1e-13);
    }

    #[test]
    fn k_closed_form_examples() {
        let pr = params(3, 0.1, 1.0, 1.0);
        // At (1,1) the closed form inverts the definition of K0.
        let k0 = 0.37;
        assert_relative_eq!(
            k_closed_form(1.0, 1.0, k0, &pr),
            2.0 * 2.0 * 0.7 * k0 / 0.9,
            max_relative = 1e-13
        );

        let e2 = std::f64::consts::E * std::f64::consts::E;
        let pr_e2 = params(3, 0.1, e2, 1.0);
        assert_relative_eq!(
            k_closed_form(1.0, e2, 0.0, &pr_e2),
            2.8 / (0.9 * e2),
            max_relative = 1e-13
        );

        // Affine in log lambda with slope (c1/beta)(1-m)/2.
        let c = derive_constants(&pr).unwrap();
        for lambda in [0.3, 2.0, 7.5] {
            let diff = k_closed_form(lambda, 1.0, k0, &pr) - k_closed_form(1.0, 1.0, k0, &pr);
            assert_relative_eq!(diff, c.c1 * 0.5 * 0.9 * f64::ln(lambda), max_relative = 1e-12);
        }
    }

    #[test]
    fn lambda1_examples_and_matching_identity() {
        assert_relative_eq!(lambda1_of(0.8, 0.8, 1.0, 0.1), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            lambda1_of(0.45, 0.0, 1.0, 0.1),
            std::f64::consts::E,
            max_relative = 1e-13
        );

        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..50 {
            let k1 = rng.gen_range(-3.0..3.0);
            let k0 = rng.gen_range(-3.0..3.0);
            let beta = rng.gen_range(0.2..4.0);
            let m = rng.gen_range(0.01..0.32);
            let l1 = lambda1_of(k1, k0, beta, m);
            let lhs = 0.5 * (1.0 - m) * l1.ln() + 0.5 * beta.ln() + k0;
            assert_relative_eq!(lhs, k1, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda1_composed_with_closed_form() {
        // The brace constant of K(lambda1, beta) is exactly K1.
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let k1 = rng.gen_range(-2.0..2.0);
            let k0 = rng.gen_range(-2.0..2.0);
            let beta = rng.gen_range(0.2..4.0);
            let pr = params(3, 0.1, beta, 1.0);
            let l1 = lambda1_of(k1, k0, beta, pr.m);
            let k = k_closed_form(l1, beta, k0, &pr);
            let n = pr.n as f64;
            let brace = k * (1.0 - pr.m) * beta / (2.0 * (n - 1.0) * pr.p_factor());
            assert_relative_eq!(brace, k1, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn resolve_fills_k_dependent_fields() {
        let pr = params(3, 0.1, 1.0, 1.0);
        let mut c = derive_constants(&pr).unwrap();
        c.resolve(&pr, 1.234);
        let k0 = c.k0.unwrap();
        // At (1,1): K0 = (1-m)K/(2(n-1)p).
        assert_relative_eq!(k0, 0.9 * 1.234 / 2.8, max_relative = 1e-13);
        assert_relative_eq!(c.a1.unwrap(), a1_of(1.234, &pr), max_relative = 1e-14);
        // Round trip through the closed form reproduces K.
        assert_relative_eq!(k_closed_form(1.0, 1.0, k0, &pr), 1.234, max_relative = 1e-13);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(
            unit_sphere_area(4),
            2.0 * std::f64::consts::PI * std::f64::consts::PI,
            max_relative = 1e-15
        );
        // |B_R| = area/n * R^n sanity for n=5.
        assert_relative_eq!(
            unit_sphere_area(5),
            8.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0,
            max_relative = 1e-14
        );
    }
}
