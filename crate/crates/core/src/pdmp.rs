//! Exact event-driven simulation of the one-dimensional Zig-Zag process.
//!
//! Between events the position moves at unit speed. Events are the first
//! arrival of two independent clocks:
//!
//! * the bounce clock with rate `[θ U'(x + sθ)]⁺`, simulated by inverting its
//!   integrated rate, which on an uphill stretch is just the increase of `U`;
//! * the refresh clock with rate `γ(x + sθ)`, exponential for a constant rate
//!   and thinned against a declared bound otherwise.
//!
//! Both kinds of event flip the velocity. Each step draws one `Exp(1)` for the
//! bounce clock first and then the refresh draws, and neither the draws nor
//! the arithmetic depend on the horizon, so a run to `T` and a run to `t < T`
//! with the same stream agree on every event before `t`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::targets::{RefreshPolicy, Target};

/// Velocity of the process, `-1` or `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Velocity {
    Minus,
    Plus,
}

impl Velocity {
    pub fn sign(self) -> f64 {
        match self {
            Velocity::Minus => -1.0,
            Velocity::Plus => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Velocity::Minus => Velocity::Plus,
            Velocity::Plus => Velocity::Minus,
        }
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Velocity::Minus => "-1",
            Velocity::Plus => "+1",
        })
    }
}

impl FromStr for Velocity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(Velocity::Plus),
            "-1" | "-" => Ok(Velocity::Minus),
            other => Err(Error::Parse(format!("velocity must be +1 or -1, got `{other}`"))),
        }
    }
}

/// A point `(x, θ)` of the state space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZigZagState {
    pub x: f64,
    pub theta: Velocity,
}

impl ZigZagState {
    pub fn new(x: f64, theta: Velocity) -> Self {
        Self { x, theta }
    }
}

impl fmt::Display for ZigZagState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.theta)
    }
}

/// Parses `"<x>,<θ>"`, e.g. `"-5,+1"`.
impl FromStr for ZigZagState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (x, theta) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("state must look like `x,θ`, got `{s}`")))?;
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad position in `{s}`")))?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("position must be finite in `{s}`")));
        }
        Ok(Self {
            x,
            theta: theta.parse()?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Bounce,
    Refresh,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Bounce => "bounce",
            EventKind::Refresh => "refresh",
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bounce" => Ok(EventKind::Bounce),
            "refresh" => Ok(EventKind::Refresh),
            other => Err(Error::Parse(format!("unknown event kind `{other}`"))),
        }
    }
}

/// A velocity flip at `time`, where the process sits at `position`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub position: f64,
}

/// One linear piece of a trajectory: `x(t) = x0 + θ (t - start)` on `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub x0: f64,
    pub theta: Velocity,
}

impl Segment {
    pub fn position(&self, t: f64) -> f64 {
        self.x0 + self.theta.sign() * (t - self.start)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Relative tolerance for the unit-speed check on externally built skeletons.
const UNIT_SPEED_TOL: f64 = 1e-9;

/// The complete record of a trajectory on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    initial: ZigZagState,
    events: Vec<Event>,
    horizon: f64,
}

impl Skeleton {
    /// Builds a skeleton, checking ordering, the horizon and unit speed.
    pub fn new(initial: ZigZagState, events: Vec<Event>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let mut prev_t = 0.0;
        let mut prev_x = initial.x;
        let mut theta = initial.theta;
        for (i, e) in events.iter().enumerate() {
            if !(e.time > prev_t || (i == 0 && e.time >= 0.0)) || e.time > horizon {
                return Err(Error::InvalidParameter(format!(
                    "event {i} at time {} is out of order or beyond the horizon",
                    e.time
                )));
            }
            let expected = prev_x + theta.sign() * (e.time - prev_t);
            if (e.position - expected).abs() > UNIT_SPEED_TOL * (1.0 + expected.abs()) {
                return Err(Error::InvalidParameter(format!(
                    "event {i} breaks unit speed: position {} vs {expected}",
                    e.position
                )));
            }
            prev_t = e.time;
            prev_x = e.position;
            theta = theta.flip();
        }
        Ok(Self {
            initial,
            events,
            horizon,
        })
    }

    pub fn initial(&self) -> ZigZagState {
        self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Linear pieces covering `[0, horizon]` in order.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let mut start = 0.0;
        let mut x0 = self.initial.x;
        let mut theta = self.initial.theta;
        let ends = self
            .events
            .iter()
            .map(|e| (e.time, e.position))
            .chain(std::iter::once((self.horizon, f64::NAN)));
        ends.filter_map(move |(end, next_x)| {
            if start >= self.horizon && end == self.horizon && next_x.is_nan() {
                // an event sits exactly on the horizon, nothing left to cover
                return None;
            }
            let seg = Segment {
                start,
                end,
                x0,
                theta,
            };
            start = end;
            x0 = next_x;
            theta = theta.flip();
            Some(seg)
        })
    }

    /// Position at time `t` by piecewise-linear reconstruction.
    pub fn position_at(&self, t: f64) -> Result<f64> {
        Ok(self.segment_at(t)?.position(t))
    }

    /// The state at time `t` (the post-event velocity at event times).
    pub fn state_at(&self, t: f64) -> Result<ZigZagState> {
        let seg = self.segment_at(t)?;
        Ok(ZigZagState::new(seg.position(t), seg.theta))
    }

    fn segment_at(&self, t: f64) -> Result<Segment> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let idx = self.events.partition_point(|e| e.time <= t);
        let (start, x0) = match idx {
            0 => (0.0, self.initial.x),
            i => (self.events[i - 1].time, self.events[i - 1].position),
        };
        let theta = if idx % 2 == 0 {
            self.initial.theta
        } else {
            self.initial.theta.flip()
        };
        let end = self.events.get(idx).map_or(self.horizon, |e| e.time);
        Ok(Segment {
            start,
            end,
            x0,
            theta,
        })
    }

    pub fn final_state(&self) -> ZigZagState {
        self.state_at(self.horizon).expect("horizon lies in range")
    }
}

/// `λ(x, θ) = [θ U'(x)]⁺ + γ(x)`.
pub fn switching_rate(state: ZigZagState, target: &Target, refresh: &RefreshPolicy) -> f64 {
    (state.theta.sign() * target.grad_potential(state.x)).max(0.0) + refresh.rate(state.x, target)
}

/// First arrival of the switching clock from some state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub kind: EventKind,
    pub position: f64,
}

/// Width at which bisection stops, in time units.
pub const ROOT_TOLERANCE: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 4000;
/// Window length used when thinning against per-interval bounds.
const THINNING_WINDOW: f64 = 1.0;
/// Slack allowed before a rate above its declared bound is reported.
const BOUND_SLACK: f64 = 1e-12;

/// Samples the first event time from `state`, or `None` when it falls after `horizon`.
pub fn first_event_time(
    state: ZigZagState,
    target: &Target,
    refresh: &RefreshPolicy,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Option<Arrival>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let level = rng.exp1();
    let bounce = bounce_arrival(state, target, level, horizon)?;
    let refresh_limit = bounce.map_or(horizon, |(t, _)| t);
    let refreshed = refresh_arrival(state, target, refresh, refresh_limit, rng)?;
    Ok(match (bounce, refreshed) {
        (b, Some(t)) if b.is_none_or(|(tb, _)| t < tb) => Some(Arrival {
            time: t,
            kind: EventKind::Refresh,
            position: state.x + state.theta.sign() * t,
        }),
        (Some((time, position)), _) => Some(Arrival {
            time,
            kind: EventKind::Bounce,
            position,
        }),
        _ => None,
    })
}

/// Time and position at which the integrated bounce rate reaches `level`,
/// if that happens within `limit`.
fn bounce_arrival(
    state: ZigZagState,
    target: &Target,
    level: f64,
    limit: f64,
) -> Result<Option<(f64, f64)>> {
    let dir = state.theta.sign();
    let x = state.x;
    let points = target.stationary_points();
    let ahead: Vec<f64> = if dir > 0.0 {
        points.iter().copied().filter(|&p| p > x).collect()
    } else {
        points.iter().rev().copied().filter(|&p| p < x).collect()
    };

    let mut start = x;
    let mut needed = level;
    for end in ahead.into_iter().chain(std::iter::once(dir * f64::INFINITY)) {
        if (start - x).abs() >= limit {
            return Ok(None);
        }
        let u_start = target.potential(start);
        if end.is_finite() {
            let rise = target.potential(end) - u_start;
            if rise <= 0.0 {
                start = end;
                continue;
            }
            if rise < needed {
                needed -= rise;
                start = end;
                continue;
            }
        } else {
            let probe = start + dir * start.abs().max(1.0);
            if !(dir * target.grad_potential(probe) > 0.0) {
                return Err(Error::Domain(format!(
                    "potential of {} does not increase towards {}",
                    target.tag(),
                    end
                )));
            }
        }
        let goal = u_start + needed;
        let reach = x + dir * limit;
        if (end - reach) * dir > 0.0 && target.potential(reach) < goal {
            return Ok(None);
        }
        let y = solve_level(target, start, end, dir, goal)?;
        let time = (y - x).abs();
        return Ok((time <= limit).then_some((time, y)));
    }
    unreachable!("the last piece is unbounded")
}

/// Finds `y` on the monotone increasing piece from `start` towards `end` with `U(y) = goal`.
fn solve_level(target: &Target, start: f64, end: f64, dir: f64, goal: f64) -> Result<f64> {
    if let Some(y) = target.level_crossing(start, dir, goal) {
        if y.is_finite() && (end - y) * dir >= 0.0 {
            return Ok(if (y - start) * dir < 0.0 { start } else { y });
        }
    }
    find_level_crossing(target, start, end, dir, goal)
}

/// Bracketing by doubling, bisection to [`ROOT_TOLERANCE`], then one Newton step.
pub fn find_level_crossing(
    target: &Target,
    start: f64,
    end: f64,
    dir: f64,
    goal: f64,
) -> Result<f64> {
    let fail = || Error::RootFinding { start, level: goal };
    let excess = |s: f64| target.potential(start + dir * s) - goal;
    let mut lo = 0.0;
    let mut hi = if end.is_finite() {
        (end - start).abs()
    } else {
        let mut hi = 1.0_f64;
        loop {
            let e = excess(hi);
            if e.is_nan() {
                return Err(fail());
            }
            if e >= 0.0 {
                break hi;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(fail());
            }
        }
    };
    let mut converged = false;
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOLERANCE || mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        let e = excess(mid);
        if e.is_nan() {
            return Err(fail());
        }
        if e < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(fail());
    }
    let mut s = 0.5 * (lo + hi);
    let slope = dir * target.grad_potential(start + dir * s);
    if slope > 0.0 {
        let newton = s - excess(s) / slope;
        if newton >= lo && newton <= hi {
            s = newton;
        }
    }
    Ok(start + dir * s)
}

/// First arrival of the refresh clock within `limit`.
fn refresh_arrival(
    state: ZigZagState,
    target: &Target,
    refresh: &RefreshPolicy,
    limit: f64,
    rng: &mut RngStream,
) -> Result<Option<f64>> {
    if refresh.is_zero() {
        return Ok(None);
    }
    if let RefreshPolicy::Constant(rate) = refresh {
        let t = rng.exp1() / rate;
        return Ok((t <= limit).then_some(t));
    }
    let dir = state.theta.sign();
    let at = |t: f64| state.x + dir * t;
    let bound_on = |lo: f64, hi: f64| {
        refresh.bound_on(target, lo, hi).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "refresh policy {} has no bound to thin against",
                refresh.tag()
            ))
        })
    };
    // proposals of a rate-`bound` clock on [from, to), accepted with prob γ/bound
    let mut thin = |from: f64, to: f64, bound: f64| -> Result<Option<Option<f64>>> {
        if bound <= 0.0 {
            return Ok(None);
        }
        let mut t = from;
        loop {
            t += rng.exp1() / bound;
            if t >= to {
                return Ok(None);
            }
            if t > limit {
                return Ok(Some(None));
            }
            let x = at(t);
            let rate = refresh.rate(x, target);
            if rate > bound * (1.0 + BOUND_SLACK) {
                return Err(Error::ThinningBound { x, rate, bound });
            }
            if rng.uniform() * bound < rate {
                return Ok(Some(Some(t)));
            }
        }
    };
    if refresh.has_global_bound(target) {
        let bound = bound_on(f64::NEG_INFINITY, f64::INFINITY)?;
        return Ok(thin(0.0, f64::INFINITY, bound)?.flatten());
    }
    let mut window = 0.0;
    while window < limit {
        let next = window + THINNING_WINDOW;
        let bound = bound_on(at(window), at(next))?;
        if let Some(outcome) = thin(window, next, bound)? {
            return Ok(outcome);
        }
        window = next;
    }
    Ok(None)
}

/// Limits applied by [`simulate_with`].
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    /// Abort once a single trajectory records more events than this.
    pub max_events: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            max_events: 50_000_000,
        }
    }
}

/// Simulates the process from `initial` on `[0, horizon]`.
pub fn simulate(
    initial: ZigZagState,
    horizon: f64,
    target: &Target,
    refresh: &RefreshPolicy,
    rng: &mut RngStream,
) -> Result<Skeleton> {
    simulate_with(initial, horizon, target, refresh, rng, &SimOptions::default())
}

pub fn simulate_with(
    initial: ZigZagState,
    horizon: f64,
    target: &Target,
    refresh: &RefreshPolicy,
    rng: &mut RngStream,
    options: &SimOptions,
) -> Result<Skeleton> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if !initial.x.is_finite() {
        return Err(Error::InvalidParameter("initial position must be finite".to_string()));
    }
    let mut events = Vec::new();
    let mut now = 0.0;
    let mut state = initial;
    while now < horizon {
        let Some(arrival) = first_event_time(state, target, refresh, horizon - now, rng)? else {
            break;
        };
        let time = now + arrival.time;
        if time > horizon {
            break;
        }
        if events.len() >= options.max_events {
            return Err(Error::EventCap {
                cap: options.max_events,
                time,
            });
        }
        debug_assert!(
            ((arrival.position - state.x).abs() - arrival.time).abs()
                <= UNIT_SPEED_TOL * (1.0 + arrival.position.abs())
        );
        events.push(Event {
            time,
            kind: arrival.kind,
            position: arrival.position,
        });
        now = time;
        state = ZigZagState::new(arrival.position, state.theta.flip());
    }
    Ok(Skeleton {
        initial,
        events,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{GradBound, Potential};
    use std::sync::Arc;

    fn plus(x: f64) -> ZigZagState {
        ZigZagState::new(x, Velocity::Plus)
    }

    fn minus(x: f64) -> ZigZagState {
        ZigZagState::new(x, Velocity::Minus)
    }

    #[test]
    fn switching_rate_examples() {
        let c = Target::cauchy();
        assert_eq!(switching_rate(plus(1.0), &c, &RefreshPolicy::Zero), 1.0);
        assert_eq!(switching_rate(minus(1.0), &c, &RefreshPolicy::Zero), 0.0);
        let one = RefreshPolicy::constant(1.0).unwrap();
        assert_eq!(switching_rate(minus(1.0), &c, &one), 1.0);
    }

    #[test]
    fn state_parsing() {
        let s: ZigZagState = "-5,+1".parse().unwrap();
        assert_eq!(s, plus(-5.0));
        let s: ZigZagState = " 2.5 , -1".parse().unwrap();
        assert_eq!(s, minus(2.5));
        assert!("3".parse::<ZigZagState>().is_err());
        assert!("3,0".parse::<ZigZagState>().is_err());
        assert!("nan,1".parse::<ZigZagState>().is_err());
    }

    #[test]
    fn gaussian_inversion_matches_closed_form() {
        let g = Target::gaussian();
        let mut rng = RngStream::new(5, 0);
        let mut probe = rng.clone();
        for _ in 0..200 {
            let e = probe.exp1();
            let a = first_event_time(plus(0.0), &g, &RefreshPolicy::Zero, 1e9, &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(a.kind, EventKind::Bounce);
            assert!((a.time - (2.0 * e).sqrt()).abs() < 1e-14 * a.time.max(1.0));
            assert_eq!(a.position, a.time);
        }
    }

    #[test]
    fn root_finder_agrees_with_closed_forms() {
        let targets = [Target::gaussian(), Target::cauchy(), Target::student(3.0).unwrap()];
        for t in &targets {
            for &(start, dir) in &[(0.0, 1.0), (0.0, -1.0), (2.5, 1.0), (-40.0, -1.0)] {
                for &rise in &[1e-6, 0.3, 1.0, 7.0, 30.0] {
                    let goal = t.potential(start) + rise;
                    let closed = t.level_crossing(start, dir, goal).unwrap();
                    let numeric = find_level_crossing(t, start, dir * f64::INFINITY, dir, goal).unwrap();
                    assert!(
                        (closed - numeric).abs() <= 1e-11 * closed.abs().max(1.0),
                        "{}: start {start} dir {dir} rise {rise}: {closed} vs {numeric}",
                        t.tag()
                    );
                }
            }
        }
    }

    #[test]
    fn root_finder_respects_finite_piece() {
        let g = Target::gaussian();
        // U rises from 0.5 to 2 between x = 1 and x = 2
        let y = find_level_crossing(&g, 1.0, 2.0, 1.0, 1.125).unwrap();
        assert!((y - 1.5).abs() < 1e-12);
    }

    #[test]
    fn downhill_before_horizon_means_no_event() {
        let c = Target::cauchy();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let out = first_event_time(plus(-5.0), &c, &RefreshPolicy::Zero, 4.99, &mut rng).unwrap();
            assert!(out.is_none());
        }
    }

    #[test]
    fn no_flip_before_the_mode() {
        let c = Target::cauchy();
        for stream in 0..200 {
            let mut rng = RngStream::new(3, stream);
            let sk = simulate(plus(-5.0), 50.0, &c, &RefreshPolicy::Zero, &mut rng).unwrap();
            if let Some(first) = sk.events().first() {
                assert!(first.time >= 5.0);
                assert!(first.position >= 0.0);
            }
        }
    }

    #[test]
    fn cauchy_first_event_survival() {
        // P(T > s) = 1 / (1 + s^2) from (0, +1); check the median and a KS distance
        let c = Target::cauchy();
        let mut rng = RngStream::new(42, 0);
        let n = 100_000;
        let mut times: Vec<f64> = (0..n)
            .map(|_| {
                first_event_time(plus(0.0), &c, &RefreshPolicy::Zero, 1e12, &mut rng)
                    .unwrap()
                    .unwrap()
                    .time
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let ks = times
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let cdf = s * s / (1.0 + s * s);
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.006, "KS = {ks}");
        let median = times[n / 2];
        assert!((median - 1.0).abs() < 0.02, "median = {median}");
    }

    #[test]
    fn constant_refresh_alone_is_exponential() {
        // moving downhill towards the mode only the refresh clock is active
        let c = Target::cauchy();
        let refresh = RefreshPolicy::constant(2.0).unwrap();
        let mut rng = RngStream::new(9, 0);
        let n = 20_000;
        let mut hits = 0usize;
        let mut total = 0.0;
        for _ in 0..n {
            if let Some(a) = first_event_time(plus(-1e6), &c, &refresh, 10.0, &mut rng).unwrap() {
                assert_eq!(a.kind, EventKind::Refresh);
                hits += 1;
                total += a.time;
            }
        }
        assert!(hits > n - 100);
        let mean = total / hits as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn thinned_refresh_matches_integrated_rate() {
        // downhill from x0 < 0 with γ = c|U'|: P(no refresh by s) = exp(-c (U(x0) - U(x0 + s)))
        let c = Target::cauchy();
        let refresh = RefreshPolicy::grad_proportional(1.5).unwrap();
        let x0 = -3.0;
        let s = 2.0;
        let expected = (-1.5 * (c.potential(x0) - c.potential(x0 + s))).exp();
        let mut rng = RngStream::new(17, 0);
        let n = 40_000;
        let survived = (0..n)
            .filter(|_| first_event_time(plus(x0), &c, &refresh, s, &mut rng).unwrap().is_none())
            .count();
        let p = survived as f64 / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((p - expected).abs() < 4.0 * se, "{p} vs {expected}");
    }

    #[test]
    fn windowed_thinning_on_gaussian() {
        let g = Target::gaussian();
        let refresh = RefreshPolicy::grad_proportional(1.0).unwrap();
        // downhill from -3 to 0: refresh survival exp(-(U(-3) - U(-3 + s)))
        let s = 2.5;
        let expected = (-(g.potential(-3.0) - g.potential(-3.0 + s))).exp();
        let mut rng = RngStream::new(23, 0);
        let n = 40_000;
        let survived = (0..n)
            .filter(|_| first_event_time(plus(-3.0), &g, &refresh, s, &mut rng).unwrap().is_none())
            .count();
        let p = survived as f64 / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((p - expected).abs() < 4.0 * se, "{p} vs {expected}");
    }

    #[test]
    fn thinning_bound_violation_is_reported() {
        let c = Target::cauchy();
        let refresh = RefreshPolicy::custom("liar", |_| 3.0, Some(1.0)).unwrap();
        let mut rng = RngStream::new(1, 0);
        let err = first_event_time(plus(-100.0), &c, &refresh, 50.0, &mut rng).unwrap_err();
        match err {
            Error::ThinningBound { x, rate, bound } => {
                assert!(x < -50.0);
                assert_eq!(rate, 3.0);
                assert_eq!(bound, 1.0);
            }
            other => panic!("unexpected {other}"),
        }
        let unbounded = RefreshPolicy::custom("free", |_| 1.0, None).unwrap();
        assert!(first_event_time(plus(-100.0), &c, &unbounded, 50.0, &mut rng).is_err());
    }

    #[test]
    fn skeleton_invariants_hold() {
        let c = Target::cauchy();
        for refresh in [
            RefreshPolicy::Zero,
            RefreshPolicy::constant(1.0).unwrap(),
            RefreshPolicy::grad_proportional(1.0).unwrap(),
        ] {
            let mut rng = RngStream::new(8, 1);
            let sk = simulate(plus(-5.0), 2000.0, &c, &refresh, &mut rng).unwrap();
            assert!(!sk.events().is_empty());
            let rebuilt = Skeleton::new(sk.initial(), sk.events().to_vec(), sk.horizon()).unwrap();
            assert_eq!(rebuilt, sk);
            let max_abs = sk.events().iter().map(|e| e.position.abs()).fold(0.0, f64::max);
            assert!(max_abs <= 5.0 + 2000.0);
            let total: f64 = sk.segments().map(|s| s.duration()).sum();
            assert!((total - 2000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn determinism_and_prefix_property() {
        let c = Target::cauchy();
        let refresh = RefreshPolicy::grad_proportional(1.0).unwrap();
        let run = |h: f64| simulate(plus(-5.0), h, &c, &refresh, &mut RngStream::new(77, 4)).unwrap();
        let long = run(500.0);
        assert_eq!(long, run(500.0));
        let short = run(120.0);
        let prefix: Vec<Event> = long.events().iter().copied().filter(|e| e.time <= 120.0).collect();
        assert_eq!(short.events(), prefix.as_slice());
    }

    #[test]
    fn position_at_examples() {
        let c = Target::cauchy();
        let mut rng = RngStream::new(2, 0);
        let sk = simulate(plus(0.0), 100.0, &c, &RefreshPolicy::Zero, &mut rng).unwrap();
        assert_eq!(sk.position_at(0.0).unwrap(), 0.0);
        let first = sk.events()[0];
        assert_eq!(sk.position_at(first.time).unwrap(), first.position);
        let early = first.time * 0.5;
        assert_eq!(sk.position_at(early).unwrap(), early);
        assert!(sk.position_at(-1.0).is_err());
        assert!(sk.position_at(100.5).is_err());
        for k in 0..=1000 {
            let t = k as f64 * 0.1;
            assert!(sk.position_at(t).unwrap().abs() <= t + 1e-9);
        }
    }

    #[test]
    fn event_cap_aborts() {
        let c = Target::cauchy();
        let refresh = RefreshPolicy::constant(10.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let opts = SimOptions { max_events: 100 };
        let err = simulate_with(plus(0.0), 1000.0, &c, &refresh, &mut rng, &opts).unwrap_err();
        assert!(matches!(err, Error::EventCap { cap: 100, .. }));
    }

    #[derive(Debug)]
    struct DoubleWell;

    impl Potential for DoubleWell {
        fn value(&self, x: f64) -> f64 {
            (x * x - 1.0).powi(2)
        }
        fn grad(&self, x: f64) -> f64 {
            4.0 * x * (x * x - 1.0)
        }
    }

    #[test]
    fn multimodal_custom_target_uses_all_stationary_points() {
        let target = Target::custom(
            "double-well",
            Arc::new(DoubleWell),
            vec![-1.0, 0.0, 1.0],
            Some(GradBound::PerInterval(Arc::new(|lo: f64, hi: f64| {
                let m = lo.abs().max(hi.abs()).max(1.0);
                4.0 * m * (m * m + 1.0)
            }))),
            None,
        )
        .unwrap();
        // from (-1.5, +1): downhill to -1, uphill to 0 (rise 1), downhill to 1, then uphill
        let mut rng = RngStream::new(4, 0);
        let mut probe = rng.clone();
        for _ in 0..500 {
            let e = probe.exp1();
            let a = first_event_time(plus(-1.5), &target, &RefreshPolicy::Zero, 1e6, &mut rng)
                .unwrap()
                .unwrap();
            if e < 1.0 {
                assert!(a.position > -1.0 && a.position < 0.0);
                assert!((target.potential(a.position) - e).abs() < 1e-9);
            } else {
                assert!(a.position > 1.0);
                assert!((target.potential(a.position) - (e - 1.0)).abs() < 1e-9);
            }
        }
    }
}
