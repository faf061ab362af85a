//! Radial integrator for the fast diffusion Cauchy problem
//! `u_t = (n-1)/m Δu^m`, the self-similar rescaling, and the long-time
//! comparison of rescaled solutions with the stationary profiles.
//!
//! Discretization: conservative finite volumes on a radial grid that is
//! uniform on `[0, 1]` and logarithmic on `[1, r_max]`, with node-centered
//! unknowns, zero flux through the origin, and the outer boundary held at
//! its initial value (Dirichlet). Time stepping is backward Euler; each step
//! solves the nonlinear system by lagged-diffusivity iteration on `u^m`
//! (`u^m ≈ u_prev^{m-1} u`), which yields a tridiagonal M-matrix per sweep
//! and therefore preserves positivity and pointwise ordering of solutions.
//! The fast-diffusion diffusivity `m u^{m-1}` grows without bound as
//! `u -> 0`, so explicit stepping is not an option on the far grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{unit_sphere_area, ProblemParams};
use crate::profile::{Profile, ProfileError};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("matching radius r_a = {r_a} below e^2; iterated logarithm undefined or fragile")]
    BadMatchingRadius { r_a: f64 },
    #[error("tail bracket nonpositive at r_a = {r_a} (value {value:.3e}); raise r_a or K1")]
    NonpositiveBracket { r_a: f64, value: f64 },
    #[error("initial tail not monotone decreasing near r = {r}")]
    NonmonotoneTail { r: f64 },
    #[error("nonlinear solve failed at t = {t} (dt = {dt:.3e} below floor)")]
    NonlinearSolveFailure { t: f64, dt: f64 },
    #[error("rescaled frame needs radius {needed} but coverage shrank to {available}")]
    CoverageExceeded { needed: f64, available: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Outer boundary treatment of the truncated domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OuterBc {
    /// Value pinned at its initial state. Validated by domain doubling.
    FrozenDirichlet,
    /// No flux through the outer face; turns the domain into a closed box
    /// (used for discrete mass accounting).
    ZeroFlux,
}

/// Radial grid: uniform nodes on `[0, 1]`, logarithmic on `[1, r_max]`.
pub fn radial_grid(r_max: f64, cells_unit: u32, cells_per_decade: u32) -> Vec<f64> {
    assert!(r_max > 1.0 && cells_unit >= 2 && cells_per_decade >= 2);
    let mut r = Vec::new();
    for i in 0..=cells_unit {
        r.push(i as f64 / cells_unit as f64);
    }
    let p = cells_per_decade as f64;
    let mut k = 1u32;
    loop {
        let node = 10f64.powf(k as f64 / p);
        if node >= r_max * (1.0 - 1e-12) {
            break;
        }
        r.push(node);
        k += 1;
    }
    r.push(r_max);
    r
}

/// Discretized radial state `u(r, t)`.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub params: ProblemParams,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
    pub outer_bc: OuterBc,
}

impl RadialField {
    pub fn new(params: ProblemParams, r: Vec<f64>, u: Vec<f64>, outer_bc: OuterBc) -> Self {
        assert_eq!(r.len(), u.len());
        Self {
            params,
            r,
            u,
            t: 0.0,
            outer_bc,
        }
    }

    /// Center value `u(0, t)`.
    pub fn center(&self) -> f64 {
        self.u[0]
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        self.r.len() == other.r.len()
            && self
                .r
                .iter()
                .zip(&other.r)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs().max(1.0))
    }

    /// Discrete weighted mass `Σ u_j ω_{n-1} ∫ r^{n-1} dr` over the cells.
    pub fn weighted_mass(&self) -> f64 {
        let vol = cell_volumes(&self.r, self.params.n);
        let omega = unit_sphere_area(self.params.n);
        omega
            * self
                .u
                .iter()
                .zip(&vol)
                .map(|(u, v)| u * v)
                .sum::<f64>()
    }
}

/// Control-volume sizes `∫ r^{n-1} dr` over `[r_{j-1/2}, r_{j+1/2}]`, with
/// half cells at both ends.
pub fn cell_volumes(r: &[f64], n: u32) -> Vec<f64> {
    let nn = n as f64;
    let j_max = r.len() - 1;
    let face = |j: usize| 0.5 * (r[j] + r[j + 1]);
    (0..=j_max)
        .map(|j| {
            let lo = if j == 0 { 0.0 } else { face(j - 1) };
            let hi = if j == j_max { r[j_max] } else { face(j) };
            (hi.powf(nn) - lo.powf(nn)) / nn
        })
        .collect()
}

/// Compactly supported bump `amp (1 - (r/radius)²)²` on `r < radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub radius: f64,
}

impl Bump {
    pub fn eval(&self, r: f64) -> f64 {
        if r < self.radius {
            let x = 1.0 - (r / self.radius) * (r / self.radius);
            self.amplitude * x * x
        } else {
            0.0
        }
    }
}

/// Initial data with the profile-matched logarithmic tail
///
/// ```text
/// u0(r)^{1-m} = c1/(β r²) (log r - κ log log r + K1),   r >= r_a,
/// ```
///
/// a constant continuation below the matching radius, and an optional
/// compactly supported perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub k1: f64,
    pub r_a: f64,
    /// Constant near-field value `u0(r_a)`.
    pub cap: f64,
    pub psi: Option<Bump>,
}

impl InitialData {
    pub fn new(
        params: &ProblemParams,
        k1: f64,
        r_a: f64,
        psi: Option<Bump>,
    ) -> Result<Self, PdeError> {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        if !(r_a >= e2 * (1.0 - 1e-12)) {
            return Err(PdeError::BadMatchingRadius { r_a });
        }
        let consts = crate::constants::derive_constants(params).expect("validated params");
        let bracket = r_a.ln() - consts.kappa * r_a.ln().ln() + k1;
        if bracket <= 0.0 {
            return Err(PdeError::NonpositiveBracket { r_a, value: bracket });
        }
        let cap = Self::tail_value(params, k1, r_a);
        Ok(Self { k1, r_a, cap, psi })
    }

    fn tail_value(params: &ProblemParams, k1: f64, r: f64) -> f64 {
        let consts = crate::constants::derive_constants(params).expect("validated params");
        let s = r.ln();
        let bracket = s - consts.kappa * s.ln() + k1;
        (consts.c1 / (params.beta * r * r) * bracket).powf(1.0 / (1.0 - params.m))
    }

    /// `u0(r)` before the perturbation.
    pub fn base_value(&self, params: &ProblemParams, r: f64) -> f64 {
        if r < self.r_a {
            self.cap
        } else {
            Self::tail_value(params, self.k1, r)
        }
    }

    /// `u0(r)` including the perturbation.
    pub fn value(&self, params: &ProblemParams, r: f64) -> f64 {
        self.base_value(params, r) + self.psi.map_or(0.0, |b| b.eval(r))
    }

    /// Sample onto a grid, verifying the decreasing tail.
    pub fn sample(&self, params: &ProblemParams, r: Vec<f64>) -> Result<RadialField, PdeError> {
        let u: Vec<f64> = r.iter().map(|&ri| self.value(params, ri)).collect();
        let mut prev: Option<(f64, f64)> = None;
        for (&ri, &ui) in r.iter().zip(&u) {
            if ri >= self.r_a && self.psi.map_or(true, |b| ri >= b.radius) {
                if let Some((rp, up)) = prev {
                    if ri >= self.r_a && rp >= self.r_a && ui > up * (1.0 + 1e-13) {
                        return Err(PdeError::NonmonotoneTail { r: ri });
                    }
                }
                prev = Some((ri, ui));
            }
        }
        Ok(RadialField::new(*params, r, u, OuterBc::FrozenDirichlet))
    }
}

/// Build the tail-matched initial state on the given grid.
pub fn build_initial(
    params: &ProblemParams,
    k1: f64,
    r_a: f64,
    grid: Vec<f64>,
    psi: Option<Bump>,
) -> Result<RadialField, PdeError> {
    InitialData::new(params, k1, r_a, psi)?.sample(params, grid)
}

/// Time step controller for the implicit march.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_max: f64,
    /// Relative change between lagged-diffusivity sweeps at which the step
    /// counts as converged.
    pub inner_tol: f64,
    pub max_inner: u32,
    pub dt_floor: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_max: 2e-3,
            inner_tol: 1e-12,
            max_inner: 600,
            dt_floor: 1e-10,
        }
    }
}

struct Discretization {
    /// `r_{j+1/2}^{n-1} / (r_{j+1} - r_j)` per interior face.
    face_coef: Vec<f64>,
    vol: Vec<f64>,
}

impl Discretization {
    fn new(r: &[f64], n: u32) -> Self {
        let nn = n as f64;
        let face_coef = (0..r.len() - 1)
            .map(|j| {
                let mid = 0.5 * (r[j] + r[j + 1]);
                mid.powf(nn - 1.0) / (r[j + 1] - r[j])
            })
            .collect();
        Self {
            face_coef,
            vol: cell_volumes(r, n),
        }
    }
}

/// One backward Euler step by lagged-diffusivity sweeps. Returns the new
/// state without committing it.
fn implicit_step(
    field: &RadialField,
    disc: &Discretization,
    dt: f64,
    ctl: &StepControl,
) -> Option<Vec<f64>> {
    let m = field.params.m;
    let g = (field.params.n as f64 - 1.0) / m;
    let j_max = field.u.len() - 1;
    // Unknowns 0..n_unknown; the Dirichlet node stays fixed.
    let n_unknown = match field.outer_bc {
        OuterBc::FrozenDirichlet => j_max,
        OuterBc::ZeroFlux => j_max + 1,
    };

    let mut iterate = field.u.clone();
    let mut lower = vec![0.0; n_unknown];
    let mut diag = vec![0.0; n_unknown];
    let mut upper = vec![0.0; n_unknown];
    let mut rhs = vec![0.0; n_unknown];
    let mut dcoef = vec![0.0; j_max + 1];
    let mut prev_change = f64::INFINITY;

    for _ in 0..ctl.max_inner {
        for (d, u) in dcoef.iter_mut().zip(&iterate) {
            *d = u.powf(m - 1.0);
        }
        for j in 0..n_unknown {
            let vdt = disc.vol[j] / dt;
            let mut a = 0.0;
            let mut b = vdt;
            let mut c = 0.0;
            let mut f = vdt * field.u[j];
            if j > 0 {
                let k = g * disc.face_coef[j - 1];
                a = -k * dcoef[j - 1];
                b += k * dcoef[j];
            }
            if j < j_max {
                let k = g * disc.face_coef[j];
                b += k * dcoef[j];
                if j + 1 < n_unknown {
                    c = -k * dcoef[j + 1];
                } else {
                    // Dirichlet neighbor: contribution moves to the rhs.
                    f += k * dcoef[j + 1] * field.u[j + 1];
                }
            }
            lower[j] = a;
            diag[j] = b;
            upper[j] = c;
            rhs[j] = f;
        }
        let solved = thomas_solve(&lower, &diag, &upper, &mut rhs)?;

        let mut change: f64 = 0.0;
        let mut positive = true;
        for j in 0..n_unknown {
            let new = solved[j];
            if !(new > 0.0) || !new.is_finite() {
                positive = false;
                break;
            }
            change = change.max((new - iterate[j]).abs() / new.abs());
        }
        if !positive {
            return None;
        }
        iterate[..n_unknown].copy_from_slice(&solved[..n_unknown]);
        // Geometric remainder estimate: for a linearly contracting sweep the
        // distance to the fixed point is about change * rho / (1 - rho).
        let converged = if change <= 1e-15 {
            true
        } else if prev_change.is_finite() && change < prev_change {
            let rho = (change / prev_change).min(0.999);
            change * rho / (1.0 - rho) <= ctl.inner_tol
        } else {
            false
        };
        if converged {
            return Some(iterate);
        }
        prev_change = change;
    }
    None
}

/// Thomas algorithm; the systems here are M-matrices, so no pivoting.
fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c_star = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c_star[0] = upper[0] / beta;
    x[0] = rhs[0] / beta;
    for j in 1..n {
        beta = diag[j] - lower[j] * c_star[j - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c_star[j] = upper[j] / beta;
        x[j] = (rhs[j] - lower[j] * x[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        x[j] -= c_star[j] * x[j + 1];
    }
    Some(x)
}

/// Advance the field to `t_target` with adaptive step halving on solver
/// failure.
pub fn advance(field: &mut RadialField, t_target: f64, ctl: &StepControl) -> Result<(), PdeError> {
    assert!(t_target >= field.t);
    let disc = Discretization::new(&field.r, field.params.n);
    let mut dt = ctl.dt_init.min(ctl.dt_max);
    while field.t < t_target {
        let step = dt.min(t_target - field.t);
        match implicit_step(field, &disc, step, ctl) {
            Some(u_new) => {
                field.u = u_new;
                field.t += step;
                dt = (dt * 1.25).min(ctl.dt_max);
            }
            None => {
                dt *= 0.5;
                if dt < ctl.dt_floor {
                    return Err(PdeError::NonlinearSolveFailure { t: field.t, dt });
                }
            }
        }
    }
    Ok(())
}

/// Advance two fields through an identical step sequence, preserving the
/// discrete comparison structure between them.
pub fn advance_pair(
    a: &mut RadialField,
    b: &mut RadialField,
    t_target: f64,
    ctl: &StepControl,
) -> Result<(), PdeError> {
    if !a.same_grid(b) {
        return Err(PdeError::GridMismatch);
    }
    let disc = Discretization::new(&a.r, a.params.n);
    let mut dt = ctl.dt_init.min(ctl.dt_max);
    while a.t < t_target {
        let step = dt.min(t_target - a.t);
        match (
            implicit_step(a, &disc, step, ctl),
            implicit_step(b, &disc, step, ctl),
        ) {
            (Some(ua), Some(ub)) => {
                a.u = ua;
                b.u = ub;
                a.t += step;
                b.t = a.t;
                dt = (dt * 1.25).min(ctl.dt_max);
            }
            _ => {
                dt *= 0.5;
                if dt < ctl.dt_floor {
                    return Err(PdeError::NonlinearSolveFailure { t: a.t, dt });
                }
            }
        }
    }
    Ok(())
}

/// Map to the self-similar frame: `ũ(r̃, t) = e^{2βt/(1-m)} u(e^{βt} r̃, t)`,
/// realized exactly by remapping the grid. Coverage shrinks to
/// `r_max e^{-βt}`.
pub fn rescale(field: &RadialField) -> RadialField {
    let beta = field.params.beta;
    let m = field.params.m;
    let shrink = (-beta * field.t).exp();
    let amp = (2.0 * beta * field.t / (1.0 - m)).exp();
    RadialField {
        params: field.params,
        r: field.r.iter().map(|&r| r * shrink).collect(),
        u: field.u.iter().map(|&u| u * amp).collect(),
        t: field.t,
        outer_bc: field.outer_bc,
    }
}

/// Exact per-cell integral of a piecewise linear function against
/// `r^{n-1} dr`, splitting cells where the integrand changes sign, so the
/// result is exact for piecewise linear differences (and in particular for
/// constants).
fn l1_piecewise(r: &[f64], d: &[f64], n: u32, radius: f64) -> f64 {
    let nn = n as f64;
    let seg = |a: f64, b: f64, da: f64, db: f64| -> f64 {
        // integral of the linear interpolant against r^{n-1} over [a, b]
        if b <= a {
            return 0.0;
        }
        let m0 = (b.powf(nn) - a.powf(nn)) / nn;
        let m1 = (b.powf(nn + 1.0) - a.powf(nn + 1.0)) / (nn + 1.0);
        let slope = (db - da) / (b - a);
        da * m0 + slope * (m1 - a * m0)
    };
    let mut total = 0.0;
    for j in 0..r.len() - 1 {
        let (a, b) = (r[j], r[j + 1]);
        if a >= radius {
            break;
        }
        let (mut hi, mut dhi) = (b, d[j + 1]);
        if b > radius {
            dhi = d[j] + (d[j + 1] - d[j]) * (radius - a) / (b - a);
            hi = radius;
        }
        let (lo, dlo) = (a, d[j]);
        if dlo * dhi >= 0.0 {
            total += seg(lo, hi, dlo, dhi).abs();
        } else {
            let root = lo - dlo * (hi - lo) / (dhi - dlo);
            total += seg(lo, root, dlo, 0.0).abs() + seg(root, hi, 0.0, dhi).abs();
        }
    }
    total
}

/// `∫_{B_R} |f - g| dx` with the radial measure `ω_{n-1} r^{n-1} dr`,
/// exact for piecewise linear node data.
pub fn l1_distance(f: &RadialField, g: &RadialField, radius: f64) -> Result<f64, PdeError> {
    if !f.same_grid(g) {
        return Err(PdeError::GridMismatch);
    }
    let d: Vec<f64> = f.u.iter().zip(&g.u).map(|(a, b)| a - b).collect();
    Ok(unit_sphere_area(f.params.n) * l1_piecewise(&f.r, &d, f.params.n, radius))
}

/// Volume-weighted nodal L¹ distance `ω Σ V_j |f_j - g_j|` over cells inside
/// `B_R` (cells clipped at the ball). This is the norm in which the implicit
/// monotone scheme contracts exactly, so the contraction verdicts use it.
pub fn l1_nodal(f: &RadialField, g: &RadialField, radius: f64) -> Result<f64, PdeError> {
    if !f.same_grid(g) {
        return Err(PdeError::GridMismatch);
    }
    let n = f.params.n;
    let nn = n as f64;
    let r = &f.r;
    let j_max = r.len() - 1;
    let face = |j: usize| 0.5 * (r[j] + r[j + 1]);
    let mut total = 0.0;
    for j in 0..=j_max {
        let lo = if j == 0 { 0.0 } else { face(j - 1) }.min(radius);
        let hi = if j == j_max { r[j_max] } else { face(j) }.min(radius);
        if hi <= lo {
            break;
        }
        let vol = (hi.powf(nn) - lo.powf(nn)) / nn;
        total += vol * (f.u[j] - g.u[j]).abs();
    }
    Ok(unit_sphere_area(n) * total)
}

/// Sup distance over nodes inside `B_R`.
pub fn sup_distance(f: &RadialField, g: &RadialField, radius: f64) -> Result<f64, PdeError> {
    if !f.same_grid(g) {
        return Err(PdeError::GridMismatch);
    }
    Ok(f
        .r
        .iter()
        .zip(f.u.iter().zip(&g.u))
        .filter(|(&r, _)| r <= radius)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Profile sampled on an existing grid (for distance measurements against
/// the stationary state).
pub fn field_from_profile(
    profile: &Profile,
    grid: &RadialField,
) -> Result<RadialField, PdeError> {
    let u = grid
        .r
        .iter()
        .map(|&r| profile.v_at(r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RadialField {
        params: *profile.params(),
        r: grid.r.clone(),
        u,
        t: grid.t,
        outer_bc: grid.outer_bc,
    })
}

/// Time series produced by [`contraction_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `‖u_a - u_b‖_{L¹}` over the whole truncated domain.
    pub plain: Vec<f64>,
    /// Same distance in the rescaled frame over the covered ball.
    pub rescaled: Vec<f64>,
    /// `plain(0) e^{-(n-2-nm)βt/(1-m)}`.
    pub bound: Vec<f64>,
    pub plain_nonincreasing: bool,
    /// Rescaled distance within a factor two of the decay bound.
    pub rescaled_within_bound: bool,
}

/// March two ordered initial states in lockstep and record the plain and
/// rescaled L¹ separations.
pub fn contraction_check(
    u0_a: &RadialField,
    u0_b: &RadialField,
    t_end: f64,
    samples: u32,
    ctl: &StepControl,
) -> Result<ContractionReport, PdeError> {
    assert!(samples >= 2);
    let params = u0_a.params;
    let rate = (params.n as f64 - 2.0 - params.n as f64 * params.m) / (1.0 - params.m)
        * params.beta;
    let mut a = u0_a.clone();
    let mut b = u0_b.clone();
    let full_radius = *a.r.last().unwrap();
    let d0 = l1_nodal(&a, &b, full_radius)?;

    let mut times = Vec::new();
    let mut plain = Vec::new();
    let mut rescaled = Vec::new();
    let mut bound = Vec::new();
    for i in 0..samples {
        let t = t_end * i as f64 / (samples - 1) as f64;
        advance_pair(&mut a, &mut b, t, ctl)?;
        let ra = rescale(&a);
        let rb = rescale(&b);
        let covered = *ra.r.last().unwrap();
        times.push(t);
        plain.push(l1_nodal(&a, &b, full_radius)?);
        rescaled.push(l1_nodal(&ra, &rb, covered)?);
        bound.push(d0 * (-rate * t).exp());
    }

    let plain_nonincreasing = plain
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    let rescaled_within_bound = rescaled
        .iter()
        .zip(&bound)
        .all(|(d, b)| *d <= 2.0 * b + 1e-12);
    Ok(ContractionReport {
        times,
        plain,
        rescaled,
        bound,
        plain_nonincreasing,
        rescaled_within_bound,
    })
}

/// Far-field decay diagnostic: samples of
/// `sup_annulus [r² u^{1-m} - (c1/β)(log r - κ log log r)]` with the linear
/// bound `K2 - c1 t` overlaid. Informational: the annulus of a truncated
/// domain only proxies the limsup at infinity, and the frozen boundary
/// contaminates it at late times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct K2Diagnostic {
    pub times: Vec<f64>,
    pub sup_bracket: Vec<f64>,
    pub bound: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_target: f64,
    pub informational: bool,
}

/// Bracket sup over the outer annulus `[0.9 r_max, r_max)`, excluding the
/// pinned boundary node itself.
pub fn bracket_sup_outer(field: &RadialField) -> f64 {
    let consts = crate::constants::derive_constants(&field.params).expect("validated params");
    let params = &field.params;
    let r_max = *field.r.last().unwrap();
    let mut sup = f64::NEG_INFINITY;
    for (&r, &u) in field.r.iter().zip(&field.u).rev().skip(1) {
        if r < 0.9 * r_max {
            break;
        }
        let s = r.ln();
        let bracket = r * r * u.powf(1.0 - params.m)
            - consts.c1 / params.beta * (s - consts.kappa * s.ln());
        sup = sup.max(bracket);
    }
    sup
}

/// Assemble the decay diagnostic from field snapshots.
pub fn decay_bound_diag(snapshots: &[RadialField], k2_init: f64) -> K2Diagnostic {
    let times: Vec<f64> = snapshots.iter().map(|f| f.t).collect();
    let sup_bracket: Vec<f64> = snapshots.iter().map(bracket_sup_outer).collect();
    let c1 = snapshots
        .first()
        .map(|f| crate::constants::derive_constants(&f.params).expect("valid").c1)
        .unwrap_or(f64::NAN);
    let bound: Vec<f64> = times.iter().map(|t| k2_init - c1 * t).collect();
    // Least squares slope of the samples over time.
    let fitted_slope = if times.len() >= 2 {
        let tbar = times.iter().sum::<f64>() / times.len() as f64;
        let ybar = sup_bracket.iter().sum::<f64>() / times.len() as f64;
        let num: f64 = times
            .iter()
            .zip(&sup_bracket)
            .map(|(t, y)| (t - tbar) * (y - ybar))
            .sum();
        let den: f64 = times.iter().map(|t| (t - tbar) * (t - tbar)).sum();
        num / den
    } else {
        f64::NAN
    };
    K2Diagnostic {
        times,
        sup_bracket,
        bound,
        fitted_slope,
        slope_target: -c1,
        informational: true,
    }
}

/// Configuration of a convergence run (defaults match the documented run
/// configuration keys).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub k1: f64,
    pub r_a: f64,
    pub r_max: f64,
    /// Simulation horizon; the default elsewhere is `5/β`.
    pub horizon: f64,
    pub r_obs: f64,
    pub cells_unit: u32,
    pub cells_per_decade: u32,
    pub samples: u32,
    pub ctl: StepControl,
    pub psi: Option<Bump>,
    pub k2_diag: bool,
}

impl ConvergenceConfig {
    pub fn defaults(k1: f64, beta: f64) -> Self {
        Self {
            k1,
            r_a: (std::f64::consts::E * std::f64::consts::E) * 1.0000001,
            r_max: 1e4,
            horizon: 5.0 / beta,
            r_obs: 1.0,
            cells_unit: 100,
            cells_per_decade: 100,
            samples: 21,
            ctl: StepControl::default(),
            psi: None,
            k2_diag: false,
        }
    }
}

/// Outcome of a convergence run against the selected profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda1: f64,
    pub times: Vec<f64>,
    pub l1_dist: Vec<f64>,
    pub sup_dist: Vec<f64>,
    pub center_vals: Vec<f64>,
    pub l1_decreasing_final_half: bool,
    pub sup_decreasing_final_half: bool,
    /// `|ũ(0, T) - λ1| / λ1` at the end of the horizon.
    pub center_rel_err_final: f64,
    pub k2_diag: Option<K2Diagnostic>,
}

/// Evolve the tail-matched data and measure the rescaled solution against
/// `v_{λ1,β}` on the observation ball.
pub fn convergence_run(
    params: &ProblemParams,
    k0: f64,
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport, PdeError> {
    let beta = params.beta;
    let lambda1 = crate::constants::lambda1_of(cfg.k1, k0, beta, params.m);
    let needed = cfg.r_obs * (beta * cfg.horizon).exp();
    if needed > cfg.r_max {
        return Err(PdeError::CoverageExceeded {
            needed,
            available: cfg.r_max,
        });
    }

    let grid = radial_grid(cfg.r_max, cfg.cells_unit, cfg.cells_per_decade);
    let mut field = build_initial(params, cfg.k1, cfg.r_a, grid, cfg.psi)?;

    let target = ProblemParams::new(params.n, params.m, beta, lambda1)
        .expect("lambda1 positive for valid params");
    let s_end = cfg.r_max.ln().max(cfg.r_obs.ln()) + 2.0;
    let profile = Profile::compute(&target, s_end, 1e-10)?;

    let k2_init = bracket_sup_outer(&field);
    let mut snapshots: Vec<RadialField> = Vec::new();

    let mut times = Vec::new();
    let mut l1 = Vec::new();
    let mut sup = Vec::new();
    let mut center = Vec::new();
    for i in 0..cfg.samples {
        let t = cfg.horizon * i as f64 / (cfg.samples - 1) as f64;
        advance(&mut field, t, &cfg.ctl)?;
        let tilde = rescale(&field);
        let target_field = field_from_profile(&profile, &tilde)?;
        times.push(t);
        l1.push(l1_distance(&tilde, &target_field, cfg.r_obs)?);
        sup.push(sup_distance(&tilde, &target_field, cfg.r_obs)?);
        center.push(tilde.center());
        if cfg.k2_diag {
            snapshots.push(field.clone());
        }
    }

    let half = times.len() / 2;
    let decreasing = |v: &[f64]| {
        v[half..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12)
    };
    let center_rel_err_final = (center.last().unwrap() - lambda1).abs() / lambda1;
    Ok(ConvergenceReport {
        lambda1,
        times,
        l1_dist: l1.clone(),
        sup_dist: sup.clone(),
        center_vals: center,
        l1_decreasing_final_half: decreasing(&l1),
        sup_decreasing_final_half: decreasing(&sup),
        center_rel_err_final,
        k2_diag: if cfg.k2_diag {
            Some(decay_bound_diag(&snapshots, k2_init))
        } else {
            None
        },
    })
}
