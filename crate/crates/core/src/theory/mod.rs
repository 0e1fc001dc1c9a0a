//! Lyapunov drift machinery for the Zig-Zag process on heavy-tailed targets.
//!
//! With `V(x, θ) = exp(β U(x) + δ sgn(x) θ)` the generator satisfies
//!
//! ```text
//! LV / V^a = V^{1-a} (θ β U'(x) + λ(x, θ) (exp(-2 θ sgn(x) δ) - 1))
//! ```
//!
//! and a drift condition `LV <= K - c V^a` outside a compact set yields
//! polynomial convergence of order `k = a / (1 - a)`. Everything here is
//! evaluated in log space because `V` overflows quickly on light-tailed
//! targets.

mod bounds;

pub use bounds::{refresh_threshold_m, tv_upper_bound, HairerTransforms, StudentTailBound};

use std::fmt;

use crate::error::{Error, Result};
use crate::pdmp::{switching_rate, Velocity, ZigZagState};
use crate::targets::{verify_tail_assumption, RefreshPolicy, Target, TailReport};

/// A real number stored as `sign * exp(ln_abs)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    fn new(factor: f64, ln_scale: f64) -> Self {
        if factor == 0.0 {
            Self {
                sign: 0.0,
                ln_abs: f64::NEG_INFINITY,
            }
        } else {
            Self {
                sign: factor.signum(),
                ln_abs: ln_scale + factor.abs().ln(),
            }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sign == 0.0 || self.ln_abs.is_finite()
    }
}

/// `sgn` with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Parameters of the Lyapunov function and the target drift rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftParams {
    pub beta: f64,
    pub delta: f64,
    /// Exponent of `f(u) = c u^a`; always `k / (1 + k)`.
    pub a: f64,
    pub k: f64,
    pub nu: f64,
}

impl DriftParams {
    pub fn new(k: f64, nu: f64, beta: f64, delta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            beta,
            delta,
            a: k / (1.0 + k),
            k,
            nu,
        })
    }

    /// `-log(1 - β) / 2`, the smallest admissible `δ` for a given `β`.
    pub fn delta_threshold(beta: f64) -> f64 {
        -0.5 * (-beta).ln_1p()
    }

    /// `β (1 - a)(1 + ν) - 1`; positive exactly when `V^{1-a} |U'|` diverges in the tails.
    pub fn growth_exponent(&self) -> f64 {
        self.beta * (1.0 - self.a) * (1.0 + self.nu) - 1.0
    }

    /// `ln V(x, θ)`.
    pub fn ln_lyapunov(&self, target: &Target, x: f64, theta: Velocity) -> f64 {
        self.beta * target.potential(x) + self.delta * sgn(x) * theta.sign()
    }
}

impl fmt::Display for DriftParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "beta={} delta={} a={} k={} nu={}",
            self.beta, self.delta, self.a, self.k, self.nu
        )
    }
}

/// `V(x, θ)` with its logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovValue {
    pub ln: f64,
}

impl LyapunovValue {
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

/// `V(x, θ) = exp(β U(x) + δ sgn(x) θ)`.
pub fn lyapunov(x: f64, theta: Velocity, params: &DriftParams, target: &Target) -> LyapunovValue {
    LyapunovValue {
        ln: params.ln_lyapunov(target, x, theta),
    }
}

/// `Lf(x, θ) = θ ∂ₓf(x, θ) + λ(x, θ) (f(x, -θ) - f(x, θ))` from caller-supplied values.
pub fn generator_apply(
    f_value: f64,
    f_flip: f64,
    f_deriv: f64,
    state: ZigZagState,
    target: &Target,
    refresh: &RefreshPolicy,
) -> f64 {
    state.theta.sign() * f_deriv + switching_rate(state, target, refresh) * (f_flip - f_value)
}

/// `LV(x, θ)` through [`generator_apply`], in linear space.
pub fn generator_of_lyapunov(
    x: f64,
    theta: Velocity,
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
) -> f64 {
    let v = lyapunov(x, theta, params, target).value();
    let v_flip = lyapunov(x, theta.flip(), params, target).value();
    let dv = params.beta * target.grad_potential(x) * v;
    generator_apply(v, v_flip, dv, ZigZagState::new(x, theta), target, refresh)
}

fn require_nonzero(x: f64) -> Result<()> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("drift ratio needs finite x != 0, got {x}")));
    }
    Ok(())
}

/// Exact `LV / V^a` in log space.
pub fn drift_ratio_log(
    x: f64,
    theta: Velocity,
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
) -> Result<SignedLog> {
    require_nonzero(x)?;
    let th = theta.sign();
    let ln_v = params.ln_lyapunov(target, x, theta);
    let rate = switching_rate(ZigZagState::new(x, theta), target, refresh);
    let bracket = th * params.beta * target.grad_potential(x)
        + rate * (-2.0 * th * sgn(x) * params.delta).exp_m1();
    Ok(SignedLog::new(bracket, (1.0 - params.a) * ln_v))
}

/// Exact `LV / V^a`; may overflow to `±inf` where the log-space value is finite.
pub fn drift_ratio(
    x: f64,
    theta: Velocity,
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
) -> Result<f64> {
    drift_ratio_log(x, theta, params, target, refresh).map(|r| r.value())
}

/// Upper bound on `LV / V^a` taking the larger of the uphill and downhill brackets:
///
/// ```text
/// V^{1-a} |U'| max{ β + (γ/|U'| + 1)(e^{-2δ} - 1), -β + (γ/|U'|)(e^{2δ} - 1) }
/// ```
pub fn drift_ratio_bound_log(
    x: f64,
    theta: Velocity,
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
) -> Result<SignedLog> {
    require_nonzero(x)?;
    let grad = target.grad_potential(x).abs();
    if !(grad > 0.0) {
        return Err(Error::Domain(format!("U'({x}) = 0, the bound is undefined")));
    }
    let ratio = refresh.rate(x, target) / grad;
    let uphill = params.beta + (ratio + 1.0) * (-2.0 * params.delta).exp_m1();
    let downhill = -params.beta + ratio * (2.0 * params.delta).exp_m1();
    let ln_v = params.ln_lyapunov(target, x, theta);
    Ok(SignedLog::new(uphill.max(downhill), (1.0 - params.a) * ln_v + grad.ln()))
}

pub fn drift_ratio_bound(
    x: f64,
    theta: Velocity,
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
) -> Result<f64> {
    drift_ratio_bound_log(x, theta, params, target, refresh).map(|r| r.value())
}

/// Log-spaced radii on which drift and growth conditions are checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_min: 1e-2,
            r_max: 1e6,
            per_decade: 512,
        }
    }
}

impl GridSpec {
    pub fn radii(&self) -> Result<Vec<f64>> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.per_decade > 0) {
            return Err(Error::InvalidParameter(format!("bad grid {self:?}")));
        }
        let decades = (self.r_max / self.r_min).log10();
        let n = (decades * self.per_decade as f64).round() as usize;
        Ok((0..=n)
            .map(|i| self.r_min * 10f64.powf(decades * i as f64 / n as f64))
            .collect())
    }
}

/// One grid evaluation of the drift ratio and its bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRow {
    pub x: f64,
    pub theta: Velocity,
    pub ratio: SignedLog,
    pub bound: SignedLog,
    /// `|U'(x)| |x| >= 1 + ν`.
    pub growth_ok: bool,
}

/// Drift ratio and bound at `±r`, `θ = ±1` for every grid radius.
pub fn drift_table(
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
    grid: &GridSpec,
) -> Result<Vec<DriftRow>> {
    let mut rows = Vec::new();
    for r in grid.radii()? {
        for x in [-r, r] {
            let growth_ok = target.grad_potential(x).abs() * x.abs() >= 1.0 + params.nu;
            for theta in [Velocity::Minus, Velocity::Plus] {
                let ratio = drift_ratio_log(x, theta, params, target, refresh)?;
                let bound = drift_ratio_bound_log(x, theta, params, target, refresh).unwrap_or(SignedLog {
                    sign: f64::NAN,
                    ln_abs: f64::NAN,
                });
                rows.push(DriftRow {
                    x,
                    theta,
                    ratio,
                    bound,
                    growth_ok,
                });
            }
        }
    }
    Ok(rows)
}

/// Result of checking `LV <= K - c V^a` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub params: DriftParams,
    /// Smallest grid radius beyond which the growth condition holds and the drift ratio is negative.
    pub compact_radius: f64,
    /// Largest `LV / V^a` at or beyond `compact_radius`.
    pub sup_ratio_outside: f64,
    /// `-sup_ratio_outside`: outside the compact set `LV <= -c_margin V^a`.
    pub c_margin: f64,
    /// Largest `LV + (c_margin / 2) V^a` over grid points inside the compact set.
    pub k_inside: f64,
    pub certified: bool,
}

impl DriftReport {
    /// Constant `c` of the drift rate `f(u) = c u^a` implied by the report.
    pub fn rate_constant(&self) -> f64 {
        0.5 * self.c_margin
    }
}

/// Checks the drift condition for fixed `(β, δ)`.
pub fn evaluate_certificate(
    params: &DriftParams,
    target: &Target,
    refresh: &RefreshPolicy,
    grid: &GridSpec,
) -> Result<DriftReport> {
    let radii = grid.radii()?;
    let rows = drift_table(params, target, refresh, grid)?;
    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    let good: Vec<bool> = rows
        .chunks(4)
        .map(|c| c.iter().all(|r| r.growth_ok && r.ratio.sign < 0.0 && r.ratio.is_finite()))
        .collect();
    let first_good = good.iter().rposition(|g| !g).map_or(0, |i| i + 1);

    if first_good == radii.len() {
        let sup = rows[rows.len() - 4..]
            .iter()
            .map(|r| r.ratio.value())
            .fold(f64::NEG_INFINITY, f64::max);
        return Ok(DriftReport {
            params: *params,
            compact_radius: radii[radii.len() - 1],
            sup_ratio_outside: sup,
            c_margin: -sup,
            k_inside: f64::NAN,
            certified: false,
        });
    }

    let sup = rows[4 * first_good..]
        .iter()
        .map(|r| r.ratio.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let c_margin = -sup;
    let k_inside = rows[..4 * first_good]
        .iter()
        .map(|r| {
            let ln_v = params.ln_lyapunov(target, r.x, r.theta);
            (params.a * ln_v).exp() * (r.ratio.value() + 0.5 * c_margin)
        })
        .fold(0.0, f64::max);
    Ok(DriftReport {
        params: *params,
        compact_radius: radii[first_good],
        sup_ratio_outside: sup,
        c_margin,
        k_inside,
        certified: all_finite && c_margin > 0.0 && sup.is_finite(),
    })
}

/// What to certify: the order `k`, the tail level `ν`, and optionally a fixed `(β, δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRequest {
    pub k: f64,
    pub nu: f64,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    /// Auto-selected `δ` is `(1 + delta_margin) * (-log(1 - β) / 2)`.
    pub delta_margin: f64,
}

impl DriftRequest {
    pub fn new(k: f64, nu: f64) -> Self {
        Self {
            k,
            nu,
            beta: None,
            delta: None,
            delta_margin: 0.05,
        }
    }
}

/// Search lattice for `β`: dyadic values `1 - 2^{-j}` together with an even
/// refinement of `(β_min, 1)`, where `β_min = (1 + k)/(1 + ν)` is the growth
/// threshold. Only values above `β_min` are kept, in increasing order.
pub fn beta_lattice(k: f64, nu: f64) -> Vec<f64> {
    let beta_min = (1.0 + k) / (1.0 + nu);
    let mut betas: Vec<f64> = (1..=20)
        .map(|j| 1.0 - 0.5f64.powi(j))
        .chain((1..64).map(|i| beta_min + (1.0 - beta_min) * i as f64 / 64.0))
        .filter(|&b| b > beta_min && b < 1.0)
        .collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    betas
}

/// Searches for `(β, δ)` certifying the drift condition with `f(u) = c u^a`, `a = k/(1+k)`.
///
/// Requires `k < ν` and the growth condition `|U'(x)| >= (1+ν)/|x|` on the
/// tail of the grid. Returns the first certified report in lattice order, or
/// [`Error::NotCertified`] carrying the best attempt.
pub fn certify_drift(
    request: &DriftRequest,
    target: &Target,
    refresh: &RefreshPolicy,
    grid: &GridSpec,
) -> Result<DriftReport> {
    let DriftRequest { k, nu, .. } = *request;
    if !(k > 0.0 && nu > 0.0 && k < nu) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k < nu, got k = {k}, nu = {nu}"
        )));
    }
    if !(request.delta_margin > 0.0) {
        return Err(Error::InvalidParameter("delta margin must be positive".to_string()));
    }
    if let TailReport::Violated { .. } = verify_tail_assumption(target, nu, &grid.radii()?)? {
        return Err(Error::Domain(format!(
            "{} does not satisfy |U'(x)| >= (1 + {nu})/|x| on the tail of the grid",
            target.tag()
        )));
    }
    let betas = match request.beta {
        Some(beta) => {
            let params = DriftParams::new(k, nu, beta, request.delta.unwrap_or(1.0))?;
            if params.growth_exponent() <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "beta = {beta} is too small: need beta (1 - a)(1 + nu) > 1"
                )));
            }
            vec![beta]
        }
        None => beta_lattice(k, nu),
    };
    let mut best: Option<DriftReport> = None;
    for beta in betas {
        let delta = request
            .delta
            .unwrap_or_else(|| (1.0 + request.delta_margin) * DriftParams::delta_threshold(beta));
        let params = DriftParams::new(k, nu, beta, delta)?;
        let report = evaluate_certificate(&params, target, refresh, grid)?;
        if report.certified {
            return Ok(report);
        }
        if best.as_ref().is_none_or(|b| !(b.c_margin >= report.c_margin)) {
            best = Some(report);
        }
    }
    let best = best.expect("lattice is never empty");
    Err(Error::NotCertified {
        reason: format!(
            "no (beta, delta) certifies {} with refresh {} at k = {k}; best sup LV/V^a = {:e} beyond |x| = {}",
            target.tag(),
            refresh.tag(),
            best.sup_ratio_outside,
            best.compact_radius
        ),
        best: Box::new(best),
    })
}

/// Largest `s` (to relative precision `1e-6`) for which `γ = s |U'|` is still certified.
pub fn max_certified_grad_scale(request: &DriftRequest, target: &Target, grid: &GridSpec) -> Result<f64> {
    let certified = |s: f64| -> Result<bool> {
        let refresh = RefreshPolicy::grad_proportional(s)?;
        match certify_drift(request, target, &refresh, grid) {
            Ok(_) => Ok(true),
            Err(Error::NotCertified { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !certified(0.0)? {
        return Err(Error::Domain(format!(
            "{} is not certified even without refresh",
            target.tag()
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while certified(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(lo);
        }
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if certified(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
