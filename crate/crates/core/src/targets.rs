//! Target distributions described by their potential `U = -log density + const`.
//!
//! Normalising constants are never stored: the sampler only needs `U'` and
//! potential differences, and probabilities used as ground truth are computed
//! either in closed form or by quadrature of `exp(-U)` over the whole line.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult,
    Node, Value,
};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_lower_tail, integrate_upper_tail, QuadTolerance};

/// Half-width of the mode interval placed around the stationary points.
pub const MODE_HALF_WIDTH: f64 = 1e-6;

/// A one-dimensional potential and its derivative.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    fn grad(&self, x: f64) -> f64;

    /// Closed-form solution of `U(y) = level` on the ray leaving `from` in
    /// direction `dir`, when `U` is increasing along that ray and an explicit
    /// inverse exists. Returning `None` makes the caller fall back to
    /// numerical root finding.
    fn level_crossing(&self, _from: f64, _dir: f64, _level: f64) -> Option<f64> {
        None
    }
}

/// Potential of the Student t distribution with `dof` degrees of freedom.
#[derive(Clone, Copy, Debug)]
pub struct StudentPotential {
    dof: f64,
    half_power: f64,
}

impl StudentPotential {
    fn new(dof: f64) -> Self {
        Self {
            dof,
            half_power: 0.5 * (dof + 1.0),
        }
    }

    /// Distance from the origin at which `U` reaches `level`.
    fn radius_at(&self, level: f64) -> f64 {
        let scaled = level.max(0.0) / self.half_power;
        if scaled < 700.0 {
            (self.dof * scaled.exp_m1()).sqrt()
        } else {
            (0.5 * (self.dof.ln() + scaled)).exp()
        }
    }
}

impl Potential for StudentPotential {
    fn value(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax < 1e100 {
            self.half_power * (x * x / self.dof).ln_1p()
        } else {
            self.half_power * (2.0 * ax.ln() - self.dof.ln())
        }
    }

    fn grad(&self, x: f64) -> f64 {
        let p = self.dof + 1.0;
        if x.abs() > 1.0 {
            p / (x + self.dof / x)
        } else {
            p * x / (self.dof + x * x)
        }
    }

    fn level_crossing(&self, from: f64, dir: f64, level: f64) -> Option<f64> {
        (from * dir >= 0.0).then(|| dir * self.radius_at(level))
    }
}

/// Standard Gaussian potential `x^2 / 2`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPotential;

impl Potential for GaussianPotential {
    fn value(&self, x: f64) -> f64 {
        0.5 * x * x
    }

    fn grad(&self, x: f64) -> f64 {
        x
    }

    fn level_crossing(&self, from: f64, dir: f64, level: f64) -> Option<f64> {
        (from * dir >= 0.0).then(|| dir * (2.0 * level.max(0.0)).sqrt())
    }
}

struct SingleVariable(Value<DefaultNumericTypes>);

impl Context for SingleVariable {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value<DefaultNumericTypes>> {
        (identifier == "x").then_some(&self.0)
    }

    fn call_function(
        &self,
        identifier: &str,
        _argument: &Value<DefaultNumericTypes>,
    ) -> EvalexprResult<Value<DefaultNumericTypes>, DefaultNumericTypes> {
        Err(EvalexprError::FunctionIdentifierNotFound(
            identifier.to_string(),
        ))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(
        &mut self,
        _disabled: bool,
    ) -> EvalexprResult<(), DefaultNumericTypes> {
        Ok(())
    }
}

/// A potential given by two expressions in the variable `x`, e.g.
/// `potential = "x^4 / 4"`, `gradient = "x^3"`. Builtins such as
/// `math::ln`, `math::exp` and `math::sqrt` are available.
pub struct ExpressionPotential {
    potential_src: String,
    gradient_src: String,
    potential: Node<DefaultNumericTypes>,
    gradient: Node<DefaultNumericTypes>,
}

impl ExpressionPotential {
    pub fn parse(potential: &str, gradient: &str) -> Result<Self> {
        let build = |src: &str| {
            build_operator_tree::<DefaultNumericTypes>(src)
                .map_err(|e| Error::Parse(format!("expression `{src}`: {e}")))
        };
        let parsed = Self {
            potential_src: potential.to_string(),
            gradient_src: gradient.to_string(),
            potential: build(potential)?,
            gradient: build(gradient)?,
        };
        // evaluate once so unknown identifiers surface at construction time
        for (node, src) in [
            (&parsed.potential, potential),
            (&parsed.gradient, gradient),
        ] {
            node.eval_number_with_context(&SingleVariable(Value::Float(0.5)))
                .map_err(|e| Error::Parse(format!("expression `{src}`: {e}")))?;
        }
        Ok(parsed)
    }

    fn eval(node: &Node<DefaultNumericTypes>, x: f64) -> f64 {
        node.eval_number_with_context(&SingleVariable(Value::Float(x)))
            .unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for ExpressionPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpressionPotential")
            .field("potential", &self.potential_src)
            .field("gradient", &self.gradient_src)
            .finish()
    }
}

impl Potential for ExpressionPotential {
    fn value(&self, x: f64) -> f64 {
        Self::eval(&self.potential, x)
    }

    fn grad(&self, x: f64) -> f64 {
        Self::eval(&self.gradient, x)
    }
}

/// A dominating bound on `|U'|`, either global or per interval of positions.
#[derive(Clone)]
pub enum GradBound {
    Global(f64),
    PerInterval(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for GradBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradBound::Global(b) => write!(f, "Global({b})"),
            GradBound::PerInterval(_) => f.write_str("PerInterval(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Family {
    Student { dof: f64 },
    Gaussian,
    Custom,
}

/// A target distribution `pi(dx) ∝ exp(-U(x)) dx`.
#[derive(Clone, Debug)]
pub struct Target {
    tag: String,
    family: Family,
    potential: Arc<dyn Potential>,
    tail_index: Option<f64>,
    grad_bound: GradBound,
    stationary_points: Vec<f64>,
    mode_interval: (f64, f64),
}

impl Target {
    /// Student t with `dof` degrees of freedom.
    pub fn student(dof: f64) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be positive, got {dof}"
            )));
        }
        Ok(Self {
            tag: if dof == 1.0 {
                "cauchy".to_string()
            } else {
                format!("student:{dof}")
            },
            family: Family::Student { dof },
            potential: Arc::new(StudentPotential::new(dof)),
            tail_index: Some(dof),
            grad_bound: GradBound::Global((dof + 1.0) / (2.0 * dof.sqrt())),
            stationary_points: vec![0.0],
            mode_interval: (-MODE_HALF_WIDTH, MODE_HALF_WIDTH),
        })
    }

    pub fn cauchy() -> Self {
        Self::student(1.0).expect("dof = 1 is valid")
    }

    /// Standard Gaussian. `|U'|` is unbounded, so thinning uses per-interval bounds.
    pub fn gaussian() -> Self {
        Self {
            tag: "gaussian".to_string(),
            family: Family::Gaussian,
            potential: Arc::new(GaussianPotential),
            tail_index: None,
            grad_bound: GradBound::PerInterval(Arc::new(|lo: f64, hi: f64| {
                lo.abs().max(hi.abs())
            })),
            stationary_points: vec![0.0],
            mode_interval: (-MODE_HALF_WIDTH, MODE_HALF_WIDTH),
        }
    }

    /// A user-supplied target. Every stationary point of `U` must be listed,
    /// and a bound on `|U'|` is mandatory.
    pub fn custom(
        tag: impl Into<String>,
        potential: Arc<dyn Potential>,
        mut stationary_points: Vec<f64>,
        grad_bound: Option<GradBound>,
        tail_index: Option<f64>,
    ) -> Result<Self> {
        let grad_bound = grad_bound.ok_or_else(|| {
            Error::InvalidParameter(
                "custom targets need a global or per-interval bound on |U'|".to_string(),
            )
        })?;
        if let GradBound::Global(b) = grad_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad gradient bound {b}")));
            }
        }
        if stationary_points.is_empty() || stationary_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "custom targets need at least one finite stationary point".to_string(),
            ));
        }
        if let Some(nu) = tail_index {
            if !(nu > 0.0) {
                return Err(Error::InvalidParameter(format!("bad tail index {nu}")));
            }
        }
        stationary_points.sort_by(f64::total_cmp);
        stationary_points.dedup();
        let mode_interval = (
            stationary_points[0] - MODE_HALF_WIDTH,
            stationary_points[stationary_points.len() - 1] + MODE_HALF_WIDTH,
        );
        Ok(Self {
            tag: tag.into(),
            family: Family::Custom,
            potential,
            tail_index,
            grad_bound,
            stationary_points,
            mode_interval,
        })
    }

    /// Loads a custom target from a TOML file with keys `potential`,
    /// `gradient`, `stationary_points`, `grad_bound` and optionally
    /// `name` and `tail_index`.
    pub fn from_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct CustomFile {
            name: Option<String>,
            potential: String,
            gradient: String,
            stationary_points: Vec<f64>,
            grad_bound: Option<f64>,
            tail_index: Option<f64>,
        }
        let text = std::fs::read_to_string(path)?;
        let spec: CustomFile = toml::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let potential = ExpressionPotential::parse(&spec.potential, &spec.gradient)?;
        let tag = spec
            .name
            .unwrap_or_else(|| format!("custom:{}", path.display()));
        Self::custom(
            tag,
            Arc::new(potential),
            spec.stationary_points,
            spec.grad_bound.map(GradBound::Global),
            spec.tail_index,
        )
    }

    /// Resolves `student:<dof>`, `cauchy`, `gaussian` or `custom:<path>`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        match tag.split_once(':') {
            None if tag == "cauchy" => Ok(Self::cauchy()),
            None if tag == "gaussian" => Ok(Self::gaussian()),
            Some(("student", dof)) => {
                let dof: f64 = dof
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad degrees of freedom in `{tag}`")))?;
                Self::student(dof)
            }
            Some(("custom", path)) => Self::from_file(Path::new(path.trim())),
            _ => Err(Error::Parse(format!("unknown target `{tag}`"))),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// `U(x)`.
    pub fn potential(&self, x: f64) -> f64 {
        self.potential.value(x)
    }

    /// `U'(x)`.
    pub fn grad_potential(&self, x: f64) -> f64 {
        self.potential.grad(x)
    }

    pub fn tail_index(&self) -> Option<f64> {
        self.tail_index
    }

    /// Finite global bound on `|U'|`, if one exists.
    pub fn grad_bound(&self) -> Option<f64> {
        match self.grad_bound {
            GradBound::Global(b) => Some(b),
            GradBound::PerInterval(_) => None,
        }
    }

    /// Bound on `|U'|` over positions in `[lo, hi]`.
    pub fn grad_bound_on(&self, lo: f64, hi: f64) -> f64 {
        match &self.grad_bound {
            GradBound::Global(b) => *b,
            GradBound::PerInterval(f) => f(lo.min(hi), lo.max(hi)),
        }
    }

    pub fn mode_interval(&self) -> (f64, f64) {
        self.mode_interval
    }

    /// Sorted stationary points; `U` is monotone between consecutive ones.
    pub fn stationary_points(&self) -> &[f64] {
        &self.stationary_points
    }

    pub(crate) fn level_crossing(&self, from: f64, dir: f64, level: f64) -> Option<f64> {
        self.potential.level_crossing(from, dir, level)
    }

    /// Degrees of freedom when this is a Student target.
    pub fn student_dof(&self) -> Option<f64> {
        match self.family {
            Family::Student { dof } => Some(dof),
            _ => None,
        }
    }

    /// Whether `pi` is symmetric about the origin.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.family, Family::Custom)
    }
}

/// `pi([a, +inf))`.
///
/// Closed form for the Cauchy and Gaussian targets; otherwise the ratio of two
/// adaptive quadratures of `exp(-U)`.
pub fn tail_probability_truth(target: &Target, a: f64) -> Result<f64> {
    if a.is_nan() {
        return Err(Error::InvalidParameter("threshold is NaN".to_string()));
    }
    match target.family {
        Family::Student { dof: 1.0 } => Ok(cauchy_upper_tail(a)),
        Family::Gaussian => Ok(0.5 * libm::erfc(a * FRAC_1_SQRT_2)),
        _ => quadrature_upper_tail(target, a),
    }
}

fn cauchy_upper_tail(a: f64) -> f64 {
    // atan(1/a) keeps full relative precision far in the tail
    if a >= 0.0 {
        (1.0 / a).atan() / PI
    } else {
        1.0 - (1.0 / -a).atan() / PI
    }
}

/// `pi([a, +inf))` by quadrature, independent of any closed form.
pub fn quadrature_upper_tail(target: &Target, a: f64) -> Result<f64> {
    if a == f64::INFINITY {
        return Ok(0.0);
    }
    if a == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let shift = target
        .stationary_points
        .iter()
        .map(|&p| target.potential(p))
        .fold(f64::INFINITY, f64::min);
    let density = |x: f64| (shift - target.potential(x)).exp();
    let tol = QuadTolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 20_000,
    };
    let split = target.stationary_points[0];
    let upper = integrate_upper_tail(density, a, tol)?;
    let total = integrate_lower_tail(density, split, tol)? + integrate_upper_tail(density, split, tol)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Quadrature(format!(
            "normalising integral of {} is {total}",
            target.tag
        )));
    }
    Ok((upper / total).clamp(0.0, 1.0))
}

/// Outcome of checking `|U'(x)| |x| >= 1 + nu` on a radius grid.
#[derive(Clone, Debug, PartialEq)]
pub enum TailReport {
    /// The inequality holds at `±r` for every grid radius `r >= min_radius`.
    Holds { min_radius: f64 },
    /// It fails at the largest radius; every violating signed position is listed.
    Violated { violations: Vec<f64> },
}

impl TailReport {
    pub fn min_radius(&self) -> Option<f64> {
        match self {
            TailReport::Holds { min_radius } => Some(*min_radius),
            TailReport::Violated { .. } => None,
        }
    }
}

/// Checks the growth condition `|U'(x)| >= (1 + nu) / |x|` outside a compact set.
pub fn verify_tail_assumption(target: &Target, nu: f64, radius_grid: &[f64]) -> Result<TailReport> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    if radius_grid.is_empty()
        || radius_grid[0] <= 0.0
        || radius_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidParameter(
            "radius grid must be nonempty, positive and increasing".to_string(),
        ));
    }
    let holds = |x: f64| target.grad_potential(x).abs() * x.abs() >= 1.0 + nu;
    let mut first_good = radius_grid.len();
    for (i, &r) in radius_grid.iter().enumerate().rev() {
        if holds(r) && holds(-r) {
            first_good = i;
        } else {
            break;
        }
    }
    if first_good < radius_grid.len() {
        return Ok(TailReport::Holds {
            min_radius: radius_grid[first_good],
        });
    }
    let violations = radius_grid
        .iter()
        .flat_map(|&r| [-r, r])
        .filter(|&x| !holds(x))
        .collect();
    Ok(TailReport::Violated { violations })
}

/// The non-negative refresh rate `gamma(x)`.
#[derive(Clone)]
pub enum RefreshPolicy {
    Zero,
    Constant(f64),
    /// `gamma(x) = c |U'(x)|`.
    GradProportional(f64),
    Custom {
        label: String,
        rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        bound: Option<f64>,
    },
}

impl fmt::Debug for RefreshPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

fn check_rate_parameter(value: f64, what: &str) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be a finite non-negative number, got {value}"
        )))
    }
}

impl RefreshPolicy {
    pub fn constant(rate: f64) -> Result<Self> {
        check_rate_parameter(rate, "constant refresh rate").map(Self::Constant)
    }

    pub fn grad_proportional(scale: f64) -> Result<Self> {
        check_rate_parameter(scale, "refresh scale").map(Self::GradProportional)
    }

    pub fn custom(
        label: impl Into<String>,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound: Option<f64>,
    ) -> Result<Self> {
        if let Some(b) = bound {
            check_rate_parameter(b, "refresh bound")?;
        }
        Ok(Self::Custom {
            label: label.into(),
            rate: Arc::new(rate),
            bound,
        })
    }

    /// Parses `zero`, `const:<rate>` or `grad:<scale>`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number in refresh `{tag}`")))
        };
        match tag.split_once(':') {
            None if tag == "zero" => Ok(Self::Zero),
            Some(("const", v)) => Self::constant(number(v)?),
            Some(("grad", v)) => Self::grad_proportional(number(v)?),
            _ => Err(Error::Parse(format!("unknown refresh policy `{tag}`"))),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            RefreshPolicy::Zero => "zero".to_string(),
            RefreshPolicy::Constant(g) => format!("const:{g}"),
            RefreshPolicy::GradProportional(c) => format!("grad:{c}"),
            RefreshPolicy::Custom { label, .. } => format!("custom:{label}"),
        }
    }

    /// `gamma(x)`.
    pub fn rate(&self, x: f64, target: &Target) -> f64 {
        match self {
            RefreshPolicy::Zero => 0.0,
            RefreshPolicy::Constant(g) => *g,
            RefreshPolicy::GradProportional(c) => c * target.grad_potential(x).abs(),
            RefreshPolicy::Custom { rate, .. } => rate(x),
        }
    }

    /// Upper bound on `gamma` over positions in `[lo, hi]`, used for thinning.
    pub fn bound_on(&self, target: &Target, lo: f64, hi: f64) -> Option<f64> {
        match self {
            RefreshPolicy::Zero => Some(0.0),
            RefreshPolicy::Constant(g) => Some(*g),
            RefreshPolicy::GradProportional(c) => Some(c * target.grad_bound_on(lo, hi)),
            RefreshPolicy::Custom { bound, .. } => *bound,
        }
    }

    /// Whether the bound returned by [`Self::bound_on`] is the same for every interval.
    pub fn has_global_bound(&self, target: &Target) -> bool {
        match self {
            RefreshPolicy::GradProportional(_) => target.grad_bound().is_some(),
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, RefreshPolicy::Zero)
            || matches!(self, RefreshPolicy::Constant(g) if *g == 0.0)
            || matches!(self, RefreshPolicy::GradProportional(c) if *c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_student_examples() {
        let cauchy = Target::student(1.0).unwrap();
        assert_eq!(cauchy.grad_potential(1.0), 1.0);
        assert_eq!(cauchy.grad_potential(0.0), 0.0);
        assert_eq!(cauchy.grad_bound(), Some(1.0));
        assert_eq!(cauchy.tail_index(), Some(1.0));
        assert!(cauchy.mode_interval().0 < 0.0 && cauchy.mode_interval().1 > 0.0);
        assert!(Target::student(0.0).is_err());
        assert!(Target::student(-2.0).is_err());
        assert!(Target::student(f64::NAN).is_err());
    }

    #[test]
    fn student_closed_forms() {
        for &dof in &[0.5, 1.0, 2.0, 7.5] {
            let t = Target::student(dof).unwrap();
            for &x in &[-30.0, -1.5, 0.3, 2.0, 100.0] {
                let u = 0.5 * (dof + 1.0) * (1.0 + x * x / dof).ln();
                let du = (dof + 1.0) * x / (dof + x * x);
                assert!((t.potential(x) - u).abs() <= 1e-13 * u.abs().max(1.0));
                assert!((t.grad_potential(x) - du).abs() <= 1e-14 * du.abs().max(1.0));
            }
            let peak = t.grad_potential(dof.sqrt());
            assert!((peak - t.grad_bound().unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn student_potential_is_finite_far_out() {
        let t = Target::cauchy();
        let u = t.potential(1e200);
        assert!(u.is_finite());
        assert!((u - 2.0 * 1e200_f64.ln()).abs() < 1e-10);
        assert!(t.grad_potential(1e200) > 0.0);
    }

    #[test]
    fn finite_differences_match_gradient() {
        let h = 1e-5;
        for target in [Target::cauchy(), Target::student(3.0).unwrap()] {
            let mut x = -100.0;
            while x <= 100.0 {
                let fd = (target.potential(x + h) - target.potential(x - h)) / (2.0 * h);
                let g = target.grad_potential(x);
                // relative error floored at the finite-difference resolution
                assert!(
                    (fd - g).abs() <= 1e-6 * g.abs().max(1e-3),
                    "x = {x}: fd {fd} vs {g}"
                );
                x += 0.37;
            }
        }
    }

    #[test]
    fn truth_cauchy_tail() {
        let c = Target::cauchy();
        let p = tail_probability_truth(&c, 5.0).unwrap();
        assert!((p - 0.0628).abs() < 5e-5);
        assert!((p - (0.5 - 5.0_f64.atan() / PI)).abs() < 1e-15);
        assert_eq!(tail_probability_truth(&c, 0.0).unwrap(), 0.5);
        assert_eq!(tail_probability_truth(&c, f64::INFINITY).unwrap(), 0.0);
        assert!(tail_probability_truth(&c, 1e12).unwrap() < 1e-12);
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let c = Target::cauchy();
        for &a in &[-3.0, 0.0, 1.0, 5.0, 40.0] {
            let q = quadrature_upper_tail(&c, a).unwrap();
            let exact = cauchy_upper_tail(a);
            assert!((q - exact).abs() <= 1e-11 * exact, "a = {a}: {q} vs {exact}");
        }
        let g = Target::gaussian();
        for &a in &[-1.0, 0.0, 2.0] {
            let q = quadrature_upper_tail(&g, a).unwrap();
            let exact = tail_probability_truth(&g, a).unwrap();
            assert!((q - exact).abs() <= 1e-11 * exact, "a = {a}: {q} vs {exact}");
        }
    }

    #[test]
    fn quadrature_agrees_with_students_t_cdf() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &dof in &[0.7, 2.0, 5.0] {
            let t = Target::student(dof).unwrap();
            let reference = StudentsT::new(0.0, 1.0, dof).unwrap();
            for &a in &[0.0, 1.0, 5.0] {
                let q = tail_probability_truth(&t, a).unwrap();
                let exact = reference.sf(a);
                assert!((q - exact).abs() <= 1e-9 * exact, "dof {dof}, a {a}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn symmetric_targets_have_half_mass_above_zero() {
        for t in [Target::cauchy(), Target::gaussian(), Target::student(3.0).unwrap()] {
            let p = tail_probability_truth(&t, 0.0).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn tail_assumption_examples() {
        let grid = log_grid(0.01, 1e6, 801);
        let cauchy = Target::cauchy();
        let r = verify_tail_assumption(&cauchy, 0.9, &grid).unwrap();
        // 2x^2/(1+x^2) >= 1.9  <=>  x^2 >= 19
        let radius = r.min_radius().unwrap();
        assert!(radius >= 19f64.sqrt());
        assert!(radius < 19f64.sqrt() * 1.03);

        match verify_tail_assumption(&cauchy, 1.0, &grid).unwrap() {
            TailReport::Violated { violations } => assert_eq!(violations.len(), 2 * grid.len()),
            other => panic!("expected violation, got {other:?}"),
        }

        let gauss = verify_tail_assumption(&Target::gaussian(), 10.0, &grid).unwrap();
        let radius = gauss.min_radius().unwrap();
        assert!(radius >= 11f64.sqrt() && radius < 11f64.sqrt() * 1.03);

        assert!(verify_tail_assumption(&cauchy, 0.5, &[]).is_err());
        assert!(verify_tail_assumption(&cauchy, 0.5, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn refresh_policies() {
        let c = Target::cauchy();
        assert_eq!(RefreshPolicy::Zero.rate(3.0, &c), 0.0);
        assert_eq!(RefreshPolicy::constant(1.0).unwrap().rate(3.0, &c), 1.0);
        let grad = RefreshPolicy::grad_proportional(2.0).unwrap();
        assert!((grad.rate(1.0, &c) - 2.0).abs() < 1e-15);
        assert_eq!(grad.bound_on(&c, -5.0, 5.0), Some(2.0));
        assert!(RefreshPolicy::constant(-1.0).is_err());
        assert!(RefreshPolicy::grad_proportional(f64::INFINITY).is_err());

        for tag in ["zero", "const:1", "grad:0.5"] {
            assert_eq!(RefreshPolicy::from_tag(tag).unwrap().tag(), tag);
        }
        assert!(RefreshPolicy::from_tag("sometimes").is_err());
        assert!(RefreshPolicy::from_tag("const:x").is_err());
    }

    #[test]
    fn target_tags() {
        assert_eq!(Target::from_tag("cauchy").unwrap().student_dof(), Some(1.0));
        assert_eq!(Target::from_tag("student:1").unwrap().tag(), "cauchy");
        assert_eq!(Target::from_tag("student:2.5").unwrap().student_dof(), Some(2.5));
        assert_eq!(Target::from_tag("gaussian").unwrap().tag(), "gaussian");
        assert!(Target::from_tag("student:-1").is_err());
        assert!(Target::from_tag("laplace").is_err());
    }

    #[test]
    fn custom_target_requires_bound() {
        let potential: Arc<dyn Potential> =
            Arc::new(ExpressionPotential::parse("x^2 / 2", "x").unwrap());
        assert!(Target::custom("q", potential.clone(), vec![0.0], None, None).is_err());
        assert!(Target::custom("q", potential.clone(), vec![], Some(GradBound::Global(1.0)), None).is_err());
        let t = Target::custom("q", potential, vec![0.0], Some(GradBound::Global(50.0)), None).unwrap();
        assert!((t.potential(3.0) - 4.5).abs() < 1e-14);
        assert!((t.grad_potential(-2.0) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn custom_target_from_file() {
        let dir = std::env::temp_dir().join(format!("zigzag-target-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("logcosh.toml");
        std::fs::write(
            &path,
            "name = \"logcosh\"\npotential = \"2 * math::ln(math::cosh(x))\"\n\
             gradient = \"2 * math::tanh(x)\"\nstationary_points = [0.0]\ngrad_bound = 2.0\n",
        )
        .unwrap();
        let t = Target::from_tag(&format!("custom:{}", path.display())).unwrap();
        assert_eq!(t.tag(), "logcosh");
        assert!((t.grad_potential(1.0) - 2.0 * 1f64.tanh()).abs() < 1e-14);
        // pi ∝ sech^2, so pi([a, inf)) = (1 - tanh a) / 2
        let p = tail_probability_truth(&t, 1.0).unwrap();
        assert!((p - 0.5 * (1.0 - 1f64.tanh())).abs() < 1e-11);

        std::fs::write(&path, "potential = \"x^2\"\ngradient = \"2*x\"\nstationary_points = [0.0]\n").unwrap();
        assert!(Target::from_file(&path).is_err());
        std::fs::write(&path, "potential = \"y^2\"\ngradient = \"2*x\"\nstationary_points = [0.0]\ngrad_bound = 1.0\n").unwrap();
        assert!(Target::from_file(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn grad_bound_never_exceeded(x in -1e4f64..1e4, dof in 0.2f64..30.0) {
            let t = Target::student(dof).unwrap();
            prop_assert!(t.grad_potential(x).abs() <= t.grad_bound().unwrap() * (1.0 + 1e-14));
        }

        #[test]
        fn gaussian_interval_bound_dominates(lo in -1e4f64..1e4, w in 0.0f64..100.0, s in 0.0f64..1.0) {
            let t = Target::gaussian();
            let hi = lo + w;
            let x = lo + s * w;
            prop_assert!(t.grad_potential(x).abs() <= t.grad_bound_on(lo, hi));
        }

        #[test]
        fn tail_check_monotone_in_nu(nu1 in 0.05f64..3.0, extra in 0.0f64..3.0, dof in 0.5f64..5.0) {
            let grid = log_grid(0.01, 1e6, 241);
            let t = Target::student(dof).unwrap();
            let nu2 = nu1 + extra;
            if let Some(r2) = verify_tail_assumption(&t, nu2, &grid).unwrap().min_radius() {
                let r1 = verify_tail_assumption(&t, nu1, &grid).unwrap().min_radius();
                prop_assert!(r1.is_some());
                prop_assert!(r1.unwrap() <= r2);
            }
        }
    }
}
