//! Tail diagnostics of the profile and extraction of its expansion constants.
//!
//! Subtracting the known growth of `w(s)` one order at a time exposes the
//! next constant in the far-field expansion:
//!
//! ```text
//! h  = w - (c1/β) s                 ->  h/log s  -> -a2
//! h1 = h + a2 log s                 ->  h1       ->  K(λ,β)
//! h2 = h1 - K - A (1+log s)/s       ->  s² h2_s  ->  (1-m) a1 /(2(n-2-nm)β)
//! ```
//!
//! with `A` the `(1+log s)/s` coefficient of the `h1` tail. The chain is
//! algebraic in the stored `(w, w_s)` columns; no numerical differentiation
//! enters except as a validation cross-check elsewhere.
//!
//! Convergence toward these limits is logarithmically slow, so the suite
//! certifies each limit by the tail value plus an extrapolation against the
//! known next-order correction, rather than by a single sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{a1_of, derive_constants, DerivedConstants, ProblemParams, Regime};
use crate::profile::Profile;

/// Relative tolerance for limits with a known correction term.
pub const LIMIT_TOL: f64 = 1e-2;
/// Relative tolerance for the `s² h2_s` limit (no correction known).
pub const LIMIT_TOL_H2S: f64 = 5e-2;
/// Floor entering `tol * max(|target|, floor)`: vanishing targets are held
/// to `LIMIT_TOL * LIMIT_FLOOR = 1e-6` absolute.
pub const LIMIT_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum AsymError {
    #[error("diagnostic tail too short: s_end = {s_end}, need at least {needed}")]
    InsufficientTail { s_end: f64, needed: f64 },
    #[error("K extraction did not converge within {iterations} iterations (S = {s_used} too small)")]
    NoConvergence { iterations: u32, s_used: f64 },
    #[error("expansion defined for r > e, got r = {r}")]
    DomainError { r: f64 },
    #[error("operation requires the fast-subcritical regime")]
    NotSubcritical,
    #[error("operation requires the critical regime")]
    NotCritical,
    #[error("h2 chain not materialized; run extraction first")]
    ExtractionMissing,
    #[error("sign of h_s does not stabilize before s = {tail_start}")]
    NoStabilization { tail_start: f64 },
}

/// The `h` chain sampled on the `s >= 1` part of a profile grid.
#[derive(Debug, Clone)]
pub struct WDiagnostics {
    params: ProblemParams,
    consts: DerivedConstants,
    s: Vec<f64>,
    h: Vec<f64>,
    hs: Vec<f64>,
    h1: Vec<f64>,
    h1s: Vec<f64>,
    h2: Vec<f64>,
    h2s: Vec<f64>,
    k_est: Option<f64>,
    a1_est: Option<f64>,
}

/// Restrict to `s >= 1` (so `log s >= 0`) and apply the exact transforms of
/// the stored `(w, w_s)` columns. The `h2` level stays empty until a `K`
/// estimate is applied.
pub fn build_diagnostics(profile: &Profile) -> Result<WDiagnostics, AsymError> {
    let consts = *profile.constants();
    let params = *profile.params();
    let c1_beta = consts.c1 / params.beta;

    let mut s = Vec::new();
    let mut h = Vec::new();
    let mut hs = Vec::new();
    let mut h1 = Vec::new();
    let mut h1s = Vec::new();
    for (i, &si) in profile.s().iter().enumerate() {
        if si < 1.0 {
            continue;
        }
        let wi = profile.w()[i];
        let wsi = profile.ws()[i];
        let hi = wi - c1_beta * si;
        let hsi = wsi - c1_beta;
        s.push(si);
        h.push(hi);
        hs.push(hsi);
        h1.push(hi + consts.a2 * si.ln());
        h1s.push(hsi + consts.a2 / si);
    }
    if s.len() < 2 || *s.last().unwrap() < 2.0 {
        return Err(AsymError::InsufficientTail {
            s_end: s.last().copied().unwrap_or(f64::NAN),
            needed: 2.0,
        });
    }
    Ok(WDiagnostics {
        params,
        consts,
        s,
        h,
        hs,
        h1,
        h1s,
        h2: Vec::new(),
        h2s: Vec::new(),
        k_est: None,
        a1_est: None,
    })
}

impl WDiagnostics {
    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn hs(&self) -> &[f64] {
        &self.hs
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    pub fn h1s(&self) -> &[f64] {
        &self.h1s
    }

    /// Filled after [`WDiagnostics::apply_extraction`].
    pub fn h2(&self) -> &[f64] {
        &self.h2
    }

    pub fn h2s(&self) -> &[f64] {
        &self.h2s
    }

    pub fn k_est(&self) -> Option<f64> {
        self.k_est
    }

    pub fn a1_est(&self) -> Option<f64> {
        self.a1_est
    }

    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Index of the node closest to `target` in `s`.
    fn node_near(&self, target: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &si) in self.s.iter().enumerate() {
            let d = (si - target).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    /// Materialize the `h2` level for an extracted `K`:
    /// `h2 = h1 - K - A(1+log s)/s` and `h2_s = h1_s + A log s / s²`.
    pub fn apply_extraction(&mut self, ext: &KExtraction) {
        let a = self.consts.h1_coeff;
        self.h2 = self
            .s
            .iter()
            .zip(&self.h1)
            .map(|(&s, &h1)| h1 - ext.k - a * (1.0 + s.ln()) / s)
            .collect();
        self.h2s = self
            .s
            .iter()
            .zip(&self.h1s)
            .map(|(&s, &h1s)| h1s + a * s.ln() / (s * s))
            .collect();
        self.k_est = Some(ext.k);
        self.a1_est = Some(ext.a1);
    }
}

/// Result of the fixed-point extraction of `K(λ,β)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KExtraction {
    pub k: f64,
    pub a1: f64,
    pub s_used: f64,
    pub iterations: u32,
}

/// Solve `K = h1(S) - A(1+log S)/S + (1-m) a1(K) / (2(n-2-nm) β S)` by
/// fixed-point iteration from the zeroth-order seed.
///
/// The map is affine in `K` with slope `(n-2-(n+2)m)/(2(n-2-nm)S)`, so it
/// contracts whenever `S` dominates that ratio; failure to converge within
/// 100 iterations signals an undersized tail.
pub fn fixed_point_k(
    params: &ProblemParams,
    s_used: f64,
    h1_at_s: f64,
) -> Result<KExtraction, AsymError> {
    let consts = derive_constants(params).expect("validated params");
    let om = 1.0 - params.m;
    let p = params.p_factor();
    let base = h1_at_s - consts.h1_coeff * (1.0 + s_used.ln()) / s_used;
    let gain = om / (2.0 * p * params.beta * s_used);

    let mut k = base;
    for it in 1..=100 {
        let next = base + gain * a1_of(k, params);
        let delta = (next - k).abs();
        k = next;
        if delta <= 1e-12 {
            return Ok(KExtraction {
                k,
                a1: a1_of(k, params),
                s_used,
                iterations: it,
            });
        }
    }
    Err(AsymError::NoConvergence {
        iterations: 100,
        s_used,
    })
}

/// Extract `K(λ,β)` from the last diagnostic node.
pub fn extract_k(diag: &WDiagnostics) -> Result<KExtraction, AsymError> {
    let s_used = diag.s_end();
    if s_used < 100.0 {
        return Err(AsymError::InsufficientTail {
            s_end: s_used,
            needed: 100.0,
        });
    }
    fixed_point_k(&diag.params, s_used, *diag.h1.last().unwrap())
}

/// Extract the universal constant `K₀ = (1-m) K(1,1) / (2(n-1)(n-2-nm))`
/// from a unit-parameter profile.
pub fn extract_k0(profile11: &Profile) -> Result<f64, AsymError> {
    let params = profile11.params();
    assert!(
        (params.lambda - 1.0).abs() < 1e-14 && (params.beta - 1.0).abs() < 1e-14,
        "K0 extraction requires the (lambda, beta) = (1, 1) profile"
    );
    let diag = build_diagnostics(profile11)?;
    let ext = extract_k(&diag)?;
    Ok(k0_from_k(ext.k, params))
}

/// Recover `K₀` from `K(λ,β)` at arbitrary `(λ,β)` through the closed-form
/// scaling of the tail constant.
pub fn k0_from_k(k: f64, params: &ProblemParams) -> f64 {
    let n = params.n as f64;
    let om = 1.0 - params.m;
    om * params.beta * k / (2.0 * (n - 1.0) * params.p_factor())
        - 0.5 * om * params.lambda.ln()
        - 0.5 * params.beta.ln()
}

/// The predicted expansion bracket at `s = log r`:
///
/// ```text
/// B(s) = s - κ log s + (1-m)/2 log λ + 1/2 log β + K₀ + a0/s + κ² log s / s
/// ```
///
/// so that `v(r)^{1-m} ≈ (c1/(β r²)) B(log r)`.
pub fn expansion_bracket(s: f64, params: &ProblemParams, k0: f64, a0: f64) -> f64 {
    let consts = derive_constants(params).expect("validated params");
    let kappa = consts.kappa;
    s - kappa * s.ln()
        + 0.5 * (1.0 - params.m) * params.lambda.ln()
        + 0.5 * params.beta.ln()
        + k0
        + a0 / s
        + kappa * kappa * s.ln() / s
}

/// Predicted `v(r)^{1-m}` from the expansion. Requires `r > e` so that the
/// iterated logarithm is positive.
pub fn expansion_eval(
    r: f64,
    params: &ProblemParams,
    k0: f64,
    a0: f64,
) -> Result<f64, AsymError> {
    if !(r > std::f64::consts::E) {
        return Err(AsymError::DomainError { r });
    }
    let consts = derive_constants(params).expect("validated params");
    let s = r.ln();
    Ok(consts.c1 / (params.beta * r * r) * expansion_bracket(s, params, k0, a0))
}

/// One certified limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitEntry {
    pub name: String,
    pub target: f64,
    pub estimate_tail: f64,
    pub estimate_extrapolated: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub floor: f64,
    pub pass: bool,
}

impl LimitEntry {
    fn new(name: &str, target: f64, tail: f64, extrap: f64, tolerance: f64) -> Self {
        let scale = target.abs().max(LIMIT_FLOOR);
        let rel_err = (extrap - target).abs() / scale;
        Self {
            name: name.to_string(),
            target,
            estimate_tail: tail,
            estimate_extrapolated: extrap,
            rel_err,
            tolerance,
            floor: LIMIT_FLOOR,
            pass: (extrap - target).abs() <= tolerance * scale,
        }
    }
}

/// Limit certificates for one profile run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitReport {
    pub params: ProblemParams,
    pub entries: Vec<LimitEntry>,
}

impl LimitReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&LimitEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Evaluate every limit the tail supports, extrapolating against the known
/// next-order correction where one exists.
///
/// Requires the `h2` chain (run [`extract_k`] and
/// [`WDiagnostics::apply_extraction`] first).
pub fn limit_suite(_profile: &Profile, diag: &WDiagnostics) -> Result<LimitReport, AsymError> {
    let (k_est, a1_est) = match (diag.k_est, diag.a1_est) {
        (Some(k), Some(a1)) => (k, a1),
        _ => return Err(AsymError::ExtractionMissing),
    };
    let params = diag.params;
    let consts = diag.consts;
    let om = 1.0 - params.m;
    let p = params.p_factor();
    let c1_beta = consts.c1 / params.beta;
    let a2 = consts.a2;
    let a = consts.h1_coeff;
    // Known 1/s² coefficient of h_s, from the h2 level.
    let c_h2 = om * a1_est / (2.0 * p * params.beta);

    let i_end = diag.s.len() - 1;
    let s_end = diag.s[i_end];
    let ln_s = s_end.ln();

    let mut entries = Vec::new();

    // w_s -> c1/beta, with the h_s model subtracted.
    let ws_tail = diag.hs[i_end] + c1_beta;
    let ws_extrap =
        ws_tail + a2 / s_end + a * ln_s / (s_end * s_end) - c_h2 / (s_end * s_end);
    entries.push(LimitEntry::new(
        "w_s",
        c1_beta,
        ws_tail,
        ws_extrap,
        LIMIT_TOL,
    ));

    // w/s -> c1/beta, with the h model subtracted.
    let w_over_s = c1_beta + diag.h[i_end] / s_end;
    let w_over_s_extrap =
        w_over_s - (-a2 * ln_s + k_est + a * (1.0 + ln_s) / s_end) / s_end;
    entries.push(LimitEntry::new(
        "w_over_s",
        c1_beta,
        w_over_s,
        w_over_s_extrap,
        LIMIT_TOL,
    ));

    if params.regime() == Regime::FastSubcritical {
        // s h_s -> -a2, correction A log s / s - c_h2 / s.
        let shs_tail = s_end * diag.hs[i_end];
        let shs_extrap = shs_tail + a * ln_s / s_end - c_h2 / s_end;
        entries.push(LimitEntry::new("s_hs", -a2, shs_tail, shs_extrap, LIMIT_TOL));

        // s² h1_s / log s -> -A, correction c_h2 / log s.
        let h1s_tail = s_end * s_end * diag.h1s[i_end] / ln_s;
        let h1s_extrap = h1s_tail - c_h2 / ln_s;
        entries.push(LimitEntry::new(
            "s2_h1s_over_log_s",
            -a,
            h1s_tail,
            h1s_extrap,
            LIMIT_TOL,
        ));

        // s² h2_s -> (1-m) a1 / (2(n-2-nm) β); no correction known.
        let h2s_tail = s_end * s_end * diag.h2s[i_end];
        entries.push(LimitEntry::new(
            "s2_h2s",
            c_h2,
            h2s_tail,
            h2s_tail,
            LIMIT_TOL_H2S,
        ));
    } else {
        entries.push(yamabe_entry(diag)?);
    }

    Ok(LimitReport { params, entries })
}

fn yamabe_entry(diag: &WDiagnostics) -> Result<LimitEntry, AsymError> {
    let params = &diag.params;
    if params.regime() != Regime::YamabeCritical {
        return Err(AsymError::NotCritical);
    }
    let n = params.n as f64;
    let target = (6.0 - n) * (n - 1.0) / (4.0 * params.beta);

    let i_end = diag.s.len() - 1;
    let s_end = diag.s[i_end];
    let tail = s_end * s_end * diag.hs[i_end];
    // No printed correction term; extrapolate a 1/s model through two
    // tail samples.
    let i_mid = diag.node_near(s_end / 2.0);
    let s_mid = diag.s[i_mid];
    let extrap = if s_mid < s_end {
        let l_mid = s_mid * s_mid * diag.hs[i_mid];
        tail + (tail - l_mid) * (1.0 / s_end) / (1.0 / s_mid - 1.0 / s_end)
    } else {
        tail
    };
    Ok(LimitEntry::new("s2_hs_critical", target, tail, extrap, LIMIT_TOL))
}

/// Critical-exponent limit `s² h_s -> (6-n)(n-1)/(4β)` as a standalone check.
pub fn yamabe_limit_check(
    _profile: &Profile,
    diag: &WDiagnostics,
) -> Result<LimitEntry, AsymError> {
    yamabe_entry(diag)
}

/// Eventual sign of `h_s` along the tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignVerdict {
    /// Largest grid point after which the sign is constant.
    pub stabilized_after: f64,
    pub eventually_negative: bool,
    /// Whether the observed sign matches the side of the critical exponent:
    /// negative below it, positive above.
    pub matches_corollary: bool,
}

/// Check that `h_s` is eventually single-signed with the regime's sign.
/// Rejects critical-exponent input, where the dichotomy does not apply.
pub fn sign_check(diag: &WDiagnostics) -> Result<SignVerdict, AsymError> {
    let params = &diag.params;
    if params.regime() != Regime::FastSubcritical {
        return Err(AsymError::NotSubcritical);
    }
    let mut stabilized_after = diag.s[0];
    let mut last_sign = diag.hs[0] > 0.0;
    for (i, &hs) in diag.hs.iter().enumerate() {
        let sign = hs > 0.0;
        if sign != last_sign {
            stabilized_after = diag.s[i];
            last_sign = sign;
        }
    }
    let s_end = diag.s_end();
    if stabilized_after > 0.5 * s_end {
        return Err(AsymError::NoStabilization {
            tail_start: stabilized_after,
        });
    }
    let eventually_negative = !last_sign;
    // q > 0 below the critical exponent, where h_s < 0 eventually.
    let matches_corollary = eventually_negative == (params.q_factor() > 0.0);
    Ok(SignVerdict {
        stabilized_after,
        eventually_negative,
        matches_corollary,
    })
}

/// Full extraction pipeline over one profile.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub diagnostics: WDiagnostics,
    pub extraction: KExtraction,
    /// Constants with the `K`-dependent fields resolved.
    pub constants: DerivedConstants,
    pub limits: LimitReport,
    /// Present in the fast-subcritical regime only.
    pub sign: Option<SignVerdict>,
}

/// Build diagnostics, extract `K`, resolve the constants, and certify the
/// limit suite in one pass.
pub fn analyze(profile: &Profile) -> Result<Analysis, AsymError> {
    let mut diag = build_diagnostics(profile)?;
    let ext = extract_k(&diag)?;
    diag.apply_extraction(&ext);
    let mut constants = *profile.constants();
    constants.resolve(profile.params(), ext.k);
    let limits = limit_suite(profile, &diag)?;
    let sign = if profile.params().regime() == Regime::FastSubcritical {
        Some(sign_check(&diag)?)
    } else {
        None
    };
    Ok(Analysis {
        diagnostics: diag,
        extraction: ext,
        constants,
        limits,
        sign,
    })
}

/// Scaled residual `s |B_numeric(s) - B_predicted(s)|` between the measured
/// bracket `β w(s)/c1` and the expansion prediction, at a given node.
pub fn brace_residual(
    profile: &Profile,
    s: f64,
    k0: f64,
    a0: f64,
) -> Result<f64, AsymError> {
    let params = profile.params();
    let consts = profile.constants();
    let (w, _) = profile
        .w_at(s)
        .map_err(|_| AsymError::InsufficientTail { s_end: profile.s_end(), needed: s })?;
    let b_numeric = params.beta * w / consts.c1;
    let b_predicted = expansion_bracket(s, params, k0, a0);
    Ok(s * (b_numeric - b_predicted).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::k_closed_form;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn params(n: u32, m: f64, beta: f64, lambda: f64) -> ProblemParams {
        ProblemParams::new(n, m, beta, lambda).unwrap()
    }

    /// Shared medium-depth profile to keep the unit suite quick.
    fn profile_31() -> &'static Profile {
        static CELL: OnceLock<Profile> = OnceLock::new();
        CELL.get_or_init(|| {
            Profile::compute(&params(3, 0.1, 1.0, 1.0), 300.0, 1e-10).unwrap()
        })
    }

    #[test]
    fn h1_minus_h_is_exact_log_term() {
        let diag = build_diagnostics(profile_31()).unwrap();
        let a2 = diag.constants().a2;
        for i in (0..diag.s().len()).step_by(97) {
            let expect = a2 * diag.s()[i].ln();
            assert_relative_eq!(diag.h1()[i] - diag.h()[i], expect, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(diag.h1s()[i] - diag.hs()[i], a2 / diag.s()[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn s_hs_near_target_on_tail() {
        let diag = build_diagnostics(profile_31()).unwrap();
        let a2 = diag.constants().a2;
        let i = diag.s().len() - 1;
        let shs = diag.s()[i] * diag.hs()[i];
        assert!(
            ((shs + a2) / a2).abs() < 2e-2,
            "s h_s = {shs} vs -a2 = {}",
            -a2
        );
    }

    #[test]
    fn h_over_log_s_consistent_with_s_hs() {
        // Both sequences estimate the same limit; their mutual distance is
        // bounded by the sum of their distances to the target.
        let diag = build_diagnostics(profile_31()).unwrap();
        let a2 = diag.constants().a2;
        let i = diag.s().len() - 1;
        let a = diag.h()[i] / diag.s()[i].ln();
        let b = diag.s()[i] * diag.hs()[i];
        assert!((a - b).abs() <= (a + a2).abs() + (b + a2).abs() + 1e-12);
    }

    #[test]
    fn synthetic_extraction_recovers_planted_k() {
        let pr = params(3, 0.1, 1.0, 1.0);
        let consts = derive_constants(&pr).unwrap();
        let k_star = -0.7341;
        let a1_star = a1_of(k_star, &pr);
        let s_used: f64 = 1000.0;
        let h1 = k_star + consts.h1_coeff * (1.0 + s_used.ln()) / s_used
            - 0.9 * a1_star / (2.0 * 0.7 * s_used);
        let ext = fixed_point_k(&pr, s_used, h1).unwrap();
        assert!((ext.k - k_star).abs() <= 1e-10, "recovered {} vs {}", ext.k, k_star);
        assert!(ext.iterations <= 10, "{} iterations", ext.iterations);
    }

    #[test]
    fn extraction_diverges_when_contraction_fails() {
        // Near the upper exponent bound the map slope exceeds 1 for small S.
        let pr = params(3, 0.333, 1.0, 1.0);
        let kappa = pr.q_factor() / (2.0 * pr.p_factor());
        let s_used = 100.0;
        assert!(kappa.abs() / s_used > 1.0);
        let err = fixed_point_k(&pr, s_used, 0.0).unwrap_err();
        assert!(matches!(err, AsymError::NoConvergence { .. }));
    }

    #[test]
    fn extraction_requires_tail() {
        let short = Profile::compute(&params(3, 0.1, 1.0, 1.0), 50.0, 1e-9).unwrap();
        let diag = build_diagnostics(&short).unwrap();
        assert!(matches!(
            extract_k(&diag),
            Err(AsymError::InsufficientTail { .. })
        ));
    }

    #[test]
    fn k0_round_trip_through_closed_form() {
        let profile = profile_31();
        let diag_k = {
            let diag = build_diagnostics(profile).unwrap();
            extract_k(&diag).unwrap().k
        };
        let k0 = k0_from_k(diag_k, profile.params());
        let k_back = k_closed_form(1.0, 1.0, k0, profile.params());
        assert_relative_eq!(k_back, diag_k, max_relative = 1e-12);
    }

    #[test]
    fn limit_suite_passes_at_moderate_depth() {
        let analysis = analyze(profile_31()).unwrap();
        for e in &analysis.limits.entries {
            assert!(
                e.pass,
                "{}: extrapolated {} vs target {} (rel err {:.3e})",
                e.name, e.estimate_extrapolated, e.target, e.rel_err
            );
        }
        let sign = analysis.sign.unwrap();
        assert!(sign.eventually_negative && sign.matches_corollary);
    }

    #[test]
    fn limit_targets_n3() {
        let analysis = analyze(profile_31()).unwrap();
        let e = analysis.limits.entry("s2_h1s_over_log_s").unwrap();
        assert_relative_eq!(e.target, -0.5 / 1.26, max_relative = 1e-12);
        let e = analysis.limits.entry("s_hs").unwrap();
        assert_relative_eq!(e.target, -1.0 / 0.9, max_relative = 1e-12);
    }

    #[test]
    fn sign_check_positive_side() {
        let profile = Profile::compute(&params(5, 0.5, 1.0, 1.0), 200.0, 1e-10).unwrap();
        let diag = build_diagnostics(&profile).unwrap();
        let verdict = sign_check(&diag).unwrap();
        assert!(!verdict.eventually_negative);
        assert!(verdict.matches_corollary);
    }

    #[test]
    fn sign_check_rejects_critical() {
        let profile = Profile::compute(&params(3, 0.2, 1.0, 1.0), 150.0, 1e-10).unwrap();
        let diag = build_diagnostics(&profile).unwrap();
        assert!(matches!(sign_check(&diag), Err(AsymError::NotSubcritical)));
    }

    #[test]
    fn yamabe_targets() {
        for (n, beta, want) in [(3u32, 1.0, 1.5), (5, 2.0, 0.5), (6, 1.0, 0.0)] {
            let m = (n as f64 - 2.0) / (n as f64 + 2.0);
            let pr = params(n, m, beta, 1.0);
            let nn = n as f64;
            let target = (6.0 - nn) * (nn - 1.0) / (4.0 * beta);
            assert_relative_eq!(target, want, epsilon = 1e-14);
            assert!(pr.regime().is_critical());
        }
    }

    #[test]
    fn yamabe_check_requires_critical_regime() {
        let diag = build_diagnostics(profile_31()).unwrap();
        assert!(matches!(
            yamabe_limit_check(profile_31(), &diag),
            Err(AsymError::NotCritical)
        ));
    }

    #[test]
    fn expansion_eval_domain_and_identity() {
        let pr = params(3, 0.1, 1.0, 1.0);
        assert!(matches!(
            expansion_eval(1.0, &pr, 0.0, 0.0),
            Err(AsymError::DomainError { .. })
        ));
        // At (1,1) the two middle constant terms vanish: bracket at k0 = 0,
        // a0 = 0 reduces to s - kappa ln s + kappa^2 ln s / s.
        let s: f64 = 25.0;
        let consts = derive_constants(&pr).unwrap();
        let want = s - consts.kappa * s.ln() + consts.kappa * consts.kappa * s.ln() / s;
        assert_relative_eq!(expansion_bracket(s, &pr, 0.0, 0.0), want, max_relative = 1e-14);
    }

    #[test]
    fn expansion_leading_order_ratio_tends_to_one() {
        let pr = params(3, 0.1, 1.0, 1.0);
        let consts = derive_constants(&pr).unwrap();
        let mut prev = f64::INFINITY;
        for s in [10.0f64, 50.0, 200.0] {
            let r = s.exp();
            let v1m = expansion_eval(r, &pr, 0.3, 0.1).unwrap();
            let ratio = v1m * pr.beta * r * r / (consts.c1 * s);
            let dev = (ratio - 1.0).abs();
            assert!(dev < prev, "ratio deviation must shrink along the tail");
            prev = dev;
        }
    }

    #[test]
    fn limit_suite_requires_extraction() {
        let diag = build_diagnostics(profile_31()).unwrap();
        assert!(matches!(
            limit_suite(profile_31(), &diag),
            Err(AsymError::ExtractionMissing)
        ));
    }
}
