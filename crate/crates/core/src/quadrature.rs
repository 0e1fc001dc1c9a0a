//! Numerical integration: adaptive Gauss–Kronrod for truth values and a
//! fixed 5-point Gauss–Legendre rule for per-segment path averages.

use crate::error::{Error, Result};

// Kronrod abscissae (non-negative half), 15-point rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Embedded 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Nodes and weights of the 5-point Gauss–Legendre rule on [-1, 1].
pub const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Integrates `f` over `[a, b]` with the 5-point Gauss–Legendre rule.
pub fn gauss_legendre_5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GAUSS_LEGENDRE_5
        .iter()
        .map(|&(node, weight)| weight * f(mid + half * node))
        .sum::<f64>()
        * half
}

fn kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadTolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-15,
            rel: 1e-13,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration over a finite interval.
///
/// The interval with the largest error estimate is bisected until the total
/// estimate falls below `max(abs, rel * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, err) = kronrod_15(&f, a, b);
    let mut pieces = vec![(a, b, value, err)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} after {} subintervals on [{a}, {b}]",
                pieces.len()
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!(
                "subinterval [{lo}, {hi}] cannot be split further"
            )));
        }
        let (left, left_err) = kronrod_15(&f, lo, mid);
        let (right, right_err) = kronrod_15(&f, mid, hi);
        pieces.push((lo, mid, left, left_err));
        pieces.push((mid, hi, right, right_err));
    }
}

/// Integrates `f` over `[a, +inf)` through the substitution `x = a + t/(1-t)`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, tol: QuadTolerance) -> Result<f64> {
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let value = f(a + t / one_minus) / (one_minus * one_minus);
            if value.is_finite() {
                value
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `(-inf, b]`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, tol: QuadTolerance) -> Result<f64> {
    integrate_upper_tail(|y| f(-y), -b, tol)
}

/// Sum with pairwise (tree) reduction; the order of additions depends only on
/// the slice length, which keeps parallel aggregations bit-reproducible.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let kronrod: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let gauss: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        let legendre: f64 = GAUSS_LEGENDRE_5.iter().map(|p| p.1).sum();
        assert!((kronrod - 2.0).abs() < 1e-14);
        assert!((gauss - 2.0).abs() < 1e-14);
        assert!((legendre - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_exact_for_degree_nine() {
        // ∫_0^2 x^9 dx = 2^10 / 10
        let value = gauss_legendre_5(|x| x.powi(9), 0.0, 2.0);
        assert!((value - 102.4).abs() < 1e-11);
    }

    #[test]
    fn adaptive_smooth_and_tails() {
        let tol = QuadTolerance::default();
        let sin = integrate(f64::sin, 0.0, std::f64::consts::PI, tol).unwrap();
        assert!((sin - 2.0).abs() < 1e-13);

        let cauchy = integrate_upper_tail(|x| 1.0 / (1.0 + x * x), 0.0, tol).unwrap();
        assert!((cauchy - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let gauss = integrate_lower_tail(|x| (-0.5 * x * x).exp(), 0.0, tol).unwrap();
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        assert!((gauss - expected).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&values), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
