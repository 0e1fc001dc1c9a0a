//! Exact path functionals of a [`Skeleton`].
//!
//! Occupation times of half-lines are computed in closed form per linear
//! segment. General time averages use 5-point Gauss–Legendre per segment.

use crate::error::{Error, Result};
use crate::pdmp::{Segment, Skeleton, Velocity};
use crate::quadrature::gauss_legendre_5;

/// The event `[a, +inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorQuery {
    pub a: f64,
}

impl IndicatorQuery {
    pub fn new(a: f64) -> Self {
        Self { a }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OccupationResult {
    pub total_time_in_set: f64,
    pub horizon: f64,
    pub estimate: f64,
}

/// Time spent in `[a, inf)` by a segment during `[seg.start, until]`.
fn time_above(seg: &Segment, a: f64, until: f64) -> f64 {
    let until = until.min(seg.end);
    let inside = match seg.theta {
        // enters the half-line at start + (a - x0) and stays
        Velocity::Plus => until - seg.start.max(seg.start + (a - seg.x0)),
        // leaves it at start + (x0 - a)
        Velocity::Minus => until.min(seg.start + (seg.x0 - a)) - seg.start,
    };
    inside.max(0.0)
}

/// Lebesgue time in `[a, inf)` up to `upto`.
pub fn occupation_time(skeleton: &Skeleton, query: IndicatorQuery, upto: f64) -> Result<OccupationResult> {
    if !(upto > 0.0 && upto <= skeleton.horizon()) {
        return Err(Error::TimeOutOfRange {
            t: upto,
            horizon: skeleton.horizon(),
        });
    }
    let total = occupation_times(skeleton, query, &[upto])?[0];
    Ok(OccupationResult {
        total_time_in_set: total,
        horizon: upto,
        estimate: (total / upto).clamp(0.0, 1.0),
    })
}

/// Cumulative time in `[a, inf)` at each checkpoint, in a single pass.
pub fn occupation_times(skeleton: &Skeleton, query: IndicatorQuery, checkpoints: &[f64]) -> Result<Vec<f64>> {
    check_checkpoints(skeleton, checkpoints)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut segments = skeleton.segments().peekable();
    let mut completed = 0.0;
    for &c in checkpoints {
        while let Some(seg) = segments.peek() {
            if seg.end > c {
                break;
            }
            completed += time_above(seg, query.a, seg.end);
            segments.next();
        }
        let partial = segments.peek().map_or(0.0, |seg| time_above(seg, query.a, c));
        out.push(completed + partial);
    }
    Ok(out)
}

/// Occupation fraction of `[a, inf)` at each checkpoint.
pub fn occupation_curve(skeleton: &Skeleton, query: IndicatorQuery, checkpoints: &[f64]) -> Result<Vec<f64>> {
    if checkpoints.first().is_some_and(|&c| c <= 0.0) {
        return Err(Error::BadCheckpoints);
    }
    let times = occupation_times(skeleton, query, checkpoints)?;
    Ok(times
        .iter()
        .zip(checkpoints)
        .map(|(t, c)| (t / c).clamp(0.0, 1.0))
        .collect())
}

/// Positions at sorted checkpoints, in a single pass.
pub fn positions_at(skeleton: &Skeleton, checkpoints: &[f64]) -> Result<Vec<f64>> {
    check_checkpoints(skeleton, checkpoints)?;
    let mut segments = skeleton.segments().peekable();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut last = None;
    for &c in checkpoints {
        while let Some(seg) = segments.peek() {
            if seg.end >= c {
                break;
            }
            last = segments.next();
        }
        let seg = segments.peek().copied().or(last).expect("skeleton has a segment");
        out.push(seg.position(c));
    }
    Ok(out)
}

fn check_checkpoints(skeleton: &Skeleton, checkpoints: &[f64]) -> Result<()> {
    let in_range = |c: &f64| *c >= 0.0 && *c <= skeleton.horizon();
    if !checkpoints.iter().all(in_range) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::BadCheckpoints);
    }
    Ok(())
}

/// `(1/upto) ∫_0^upto f(X_s) ds` with 5-point Gauss–Legendre on every segment.
pub fn time_average<F: Fn(f64) -> f64>(skeleton: &Skeleton, f: F, upto: f64) -> Result<f64> {
    if !(upto > 0.0 && upto <= skeleton.horizon()) {
        return Err(Error::TimeOutOfRange {
            t: upto,
            horizon: skeleton.horizon(),
        });
    }
    let mut total = 0.0;
    for seg in skeleton.segments() {
        if seg.start >= upto {
            break;
        }
        let end = seg.end.min(upto);
        total += gauss_legendre_5(|t| f(seg.position(t)), seg.start, end);
    }
    Ok(total / upto)
}

/// `∫_0^upto f(X_s, Θ_s) ds`.
///
/// Every segment is cut where the path crosses one of `breaks` (places where
/// `f` is not smooth), and each piece gets `pieces` equal 5-point
/// Gauss–Legendre panels.
pub fn path_integral<F: Fn(f64, Velocity) -> f64>(
    skeleton: &Skeleton,
    f: F,
    upto: f64,
    breaks: &[f64],
    pieces: usize,
) -> Result<f64> {
    if !(upto > 0.0 && upto <= skeleton.horizon()) {
        return Err(Error::TimeOutOfRange {
            t: upto,
            horizon: skeleton.horizon(),
        });
    }
    let pieces = pieces.max(1);
    let mut total = 0.0;
    let mut cuts = Vec::with_capacity(breaks.len() + 2);
    for seg in skeleton.segments() {
        if seg.start >= upto {
            break;
        }
        let end = seg.end.min(upto);
        cuts.clear();
        cuts.push(seg.start);
        cuts.extend(
            breaks
                .iter()
                .map(|&b| seg.start + (b - seg.x0) * seg.theta.sign())
                .filter(|&t| t > seg.start && t < end),
        );
        cuts.push(end);
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let h = (w[1] - w[0]) / pieces as f64;
            for i in 0..pieces {
                let lo = w[0] + h * i as f64;
                total += gauss_legendre_5(|t| f(seg.position(t), seg.theta), lo, lo + h);
            }
        }
    }
    Ok(total)
}
