use statrs::function::gamma::ln_gamma;

use super::LyapunovValue;
use crate::error::{Error, Result};

/// Largest gradient-proportional refresh scale `s` that still admits a
/// drift certificate of order `k` on a target with tail index `ν`, with
/// slack `η > 0`:
///
/// ```text
/// M(k) = (p - η) b^{1+η} / (1 - b^{1+η}),  p = (1+k)(1+η)/(1+ν),  b = 1 - p
/// ```
///
/// When `p >= 1` no admissible `β` exists for this `η` and the threshold is 0.
pub fn refresh_threshold_m(k: f64, nu: f64, eta: f64) -> Result<f64> {
    if !(k > 0.0 && nu > k && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k < nu and eta > 0, got k = {k}, nu = {nu}, eta = {eta}"
        )));
    }
    let p = (1.0 + k) * (1.0 + eta) / (1.0 + nu);
    if !(p > eta) {
        return Err(Error::Domain(format!(
            "eta = {eta} too large for k = {k}, nu = {nu}: need eta < (1+k)(1+eta)/(1+nu)"
        )));
    }
    if p >= 1.0 {
        return Ok(0.0);
    }
    let ln_b = (1.0 + eta) * (-p).ln_1p();
    Ok((p - eta) * ln_b.exp() / -ln_b.exp_m1())
}

/// The change of variables `H(u) = ∫_1^u ds / f(s)` for `f(u) = c u^a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HairerTransforms {
    pub c: f64,
    pub a: f64,
}

impl HairerTransforms {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need c > 0 and 0 < a < 1, got c = {c}, a = {a}"
            )));
        }
        Ok(Self { c, a })
    }

    /// `H(u) = (u^{1-a} - 1) / (c (1-a))` for `u >= 1`.
    pub fn h(&self, u: f64) -> Result<f64> {
        if !(u >= 1.0) {
            return Err(Error::Domain(format!("H needs u >= 1, got {u}")));
        }
        let s = 1.0 - self.a;
        Ok((s * u.ln()).exp_m1() / (self.c * s))
    }

    /// `ln H^{-1}(t) = ln(1 + c (1-a) t) / (1-a)` for `t >= 0`.
    pub fn ln_h_inv(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("H^-1 needs t >= 0, got {t}")));
        }
        let s = 1.0 - self.a;
        Ok((self.c * s * t).ln_1p() / s)
    }

    pub fn h_inv(&self, t: f64) -> Result<f64> {
        self.ln_h_inv(t).map(f64::exp)
    }

    /// `f(H^{-1}(t)) = c (1 + c (1-a) t)^{a/(1-a)}`.
    pub fn f_of_h_inv(&self, t: f64) -> Result<f64> {
        Ok(self.c * (self.a * self.ln_h_inv(t)?).exp())
    }
}

/// `min(1, B V(x, θ) / t^{1+k} + B / t^k)`.
pub fn tv_upper_bound(t: f64, v: LyapunovValue, k: f64, b: f64) -> Result<f64> {
    if !(t > 0.0 && k > 0.0 && b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need t, k, B > 0, got t = {t}, k = {k}, B = {b}"
        )));
    }
    let ln_t = t.ln();
    let value = b * (v.ln - (1.0 + k) * ln_t).exp() + b * (-k * ln_t).exp();
    Ok(value.min(1.0))
}

/// Lower bound on the distance to stationarity of a Student-t target with
/// `ν` degrees of freedom, from `π(x) |x|^{ν+1} >= C₀` for `|x| >= K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudentTailBound {
    pub nu: f64,
    /// `(1 - ε) ν^{(ν+1)/2} / Z`.
    pub c0: f64,
    /// Radius beyond which the density bound holds.
    pub radius: f64,
}

impl StudentTailBound {
    pub fn new(nu: f64, eps: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        let ln_z = 0.5 * nu.ln() + ln_gamma(0.5) + ln_gamma(0.5 * nu) - ln_gamma(0.5 * (nu + 1.0));
        let limit = (0.5 * (nu + 1.0) * nu.ln() - ln_z).exp();
        // x² / (ν + x²) >= q  <=>  x² >= ν q / (1 - q)
        let q = ((1.0 - eps).ln() * 2.0 / (nu + 1.0)).exp();
        Ok(Self {
            nu,
            c0: (1.0 - eps) * limit,
            radius: (nu * q / (1.0 - q)).sqrt(),
        })
    }

    /// `(2 C₀ / ν) t^{-ν}`; a lower bound on `π(|x| > t)` for `t >= radius`.
    pub fn lower_bound(&self, t: f64) -> Result<f64> {
        if !(t >= self.radius) {
            return Err(Error::Domain(format!(
                "bound holds for t >= {}, got {t}",
                self.radius
            )));
        }
        Ok(2.0 * self.c0 / self.nu * t.powf(-self.nu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{tail_probability_truth, Target};
    use std::f64::consts::PI;

    #[test]
    fn threshold_examples() {
        let m = refresh_threshold_m(0.5, 1.0, 0.1).unwrap();
        // p = 0.825, b = 0.175
        let b = 0.175f64.powf(1.1);
        assert!((m - 0.725 * b / (1.0 - b)).abs() < 1e-15);
        assert!((m - 0.125).abs() < 5e-4, "{m}");
        let m2 = refresh_threshold_m(1.0, 2.0, 0.1).unwrap();
        assert!((m2 - 0.1931).abs() < 5e-4, "{m2}");
        assert!(refresh_threshold_m(1.0 - 1e-6, 1.0, 1e-3).unwrap() < 1e-3);
        assert!(refresh_threshold_m(0.5, 0.99, 0.0).is_err());
        assert!(refresh_threshold_m(1.0, 0.99, 0.1).is_err());
        assert!(matches!(refresh_threshold_m(0.1, 20.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn threshold_shrinks_with_order() {
        let ms: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|&k| refresh_threshold_m(k, 0.99, 0.01).unwrap())
            .collect();
        assert!(ms.windows(2).all(|w| w[1] < w[0]));
        // continuous where the admissible range closes
        let k_edge = 2.0 / 1.01 - 1.0;
        assert!(refresh_threshold_m(k_edge - 1e-9, 1.0, 0.01).unwrap() < 1e-6);
        assert_eq!(refresh_threshold_m(k_edge + 1e-9, 1.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn transforms_examples() {
        let h = HairerTransforms::new(1.0, 0.5).unwrap();
        assert!((h.h_inv(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((h.h(4.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(h.h(1.0).unwrap(), 0.0);
        assert!((h.f_of_h_inv(2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(h.h(0.5).is_err());
        assert!(h.h_inv(-1.0).is_err());
        assert!(HairerTransforms::new(1.0, 1.0).is_err());
    }

    #[test]
    fn transforms_invert_each_other() {
        for &(c, a) in &[(0.1, 0.05), (1.0, 0.5), (3.0, 0.9), (1e-3, 0.99)] {
            let h = HairerTransforms::new(c, a).unwrap();
            for &t in &[0.3, 1.0, 1e3, 1e8] {
                let back = h.h(h.h_inv(t).unwrap()).unwrap();
                assert!((back - t).abs() <= 1e-12 * t, "c={c} a={a} t={t}: {back}");
            }
            for &u in &[1.0 + 1e-9, 2.0, 1e5] {
                let back = h.h_inv(h.h(u).unwrap()).unwrap();
                assert!((back - u).abs() <= 1e-12 * u);
            }
        }
    }

    #[test]
    fn f_of_h_inv_matches_composition() {
        let h = HairerTransforms::new(0.7, 1.0 / 3.0).unwrap();
        for &t in &[0.0, 0.5, 10.0, 1e4] {
            let direct = 0.7 * h.h_inv(t).unwrap().powf(1.0 / 3.0);
            assert!((h.f_of_h_inv(t).unwrap() - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn tv_bound_examples() {
        let v = LyapunovValue { ln: 2f64.ln() };
        assert_eq!(tv_upper_bound(1.0, v, 0.5, 1.0).unwrap(), 1.0);
        let b = tv_upper_bound(100.0, v, 1.0, 1.0).unwrap();
        assert!((b - (2.0 / 1e4 + 0.01)).abs() < 1e-15);
        assert!(tv_upper_bound(0.0, v, 1.0, 1.0).is_err());
    }

    #[test]
    fn cauchy_constants() {
        let b = StudentTailBound::new(1.0, 0.01).unwrap();
        assert!((b.c0 - 0.99 / PI).abs() < 1e-14);
        // x² / (1 + x²) >= 0.99
        assert!((b.radius - 99f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn lower_bound_sits_below_exact_tail() {
        for &nu in &[0.5, 1.0, 2.0, 3.0, 7.5] {
            let bound = StudentTailBound::new(nu, 0.01).unwrap();
            let target = Target::student(nu).unwrap();
            for &m in &[1.0, 2.0, 10.0, 100.0] {
                let t = bound.radius * m;
                let exact = 2.0 * tail_probability_truth(&target, t).unwrap();
                let lb = bound.lower_bound(t).unwrap();
                assert!(lb <= exact, "nu={nu} t={t}: {lb} > {exact}");
                assert!(lb >= 0.9 * exact, "nu={nu} t={t}: bound is loose");
            }
            assert!(bound.lower_bound(0.5 * bound.radius).is_err());
        }
    }
}
