//! Iterative Gauss-Chebyshev driver shared by the cut integrals.
//!
//! Every cut integral is reduced to `(1/L) sum_k f(tau_k)` over `tau in (0, 1)` with
//! `U = cos^2(pi tau / 2)`. The trapezoidal rule uses `tau_k = k/L` and doubles `L`; the
//! mid-point rule uses `tau_k = (k - 1/2)/L` and triples it. Either way the previous nodes are
//! reused, so a refinement only evaluates the new ones.
//!
//! Cut integrands share the factor `U/(U + b)`. Near the critical point `b` is tiny and that
//! factor turns over within `sqrt(b)` of `tau = 1`, far below any affordable node spacing.
//! [`integrate_weighted`] removes the near-pole: with `G_*` the smooth part at `U = -b`,
//! `G U/(U + b) = (G U + b G_*)/(U + b) - b G_*/(U + b)`. The last term integrates to
//! `G_* sqrt(b/(1 + b))` exactly, and the first is `G` minus `b` times a divided difference,
//! as smooth as `G` itself.

use crate::error::{Error, Result};
use crate::scalar::{sin_pi_ratio, Real};

/// Node placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Trapezoidal,
    Midpoint,
}

impl Rule {
    /// Mid-point nodes avoid `tau = 1`, where the integrand is singular at the critical point.
    pub fn select<T: Real>(beta_m1: T) -> Self {
        if beta_m1.abs() < T::lit(RULE_SWITCH_THRESHOLD) {
            Rule::Midpoint
        } else {
            Rule::Trapezoidal
        }
    }

    fn factor(self) -> usize {
        match self {
            Rule::Trapezoidal => 2,
            Rule::Midpoint => 3,
        }
    }
}

/// `|beta - 1|` below which the mid-point rule is used.
pub const RULE_SWITCH_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_START_NODES: usize = 16;
pub const DEFAULT_MAX_REFINEMENTS: usize = 14;

/// Refinement controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions<T> {
    pub tol: T,
    pub start_nodes: usize,
    pub max_refinements: usize,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self { tol: T::default_tol(), start_nodes: DEFAULT_START_NODES, max_refinements: DEFAULT_MAX_REFINEMENTS }
    }
}

impl<T: Real> QuadratureOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Final state of an iterative integration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureState<T> {
    pub rule: Rule,
    /// Node count `L` of the last rule applied.
    pub nodes: usize,
    pub refinements: usize,
    pub previous: Vec<T>,
    pub current: Vec<T>,
    /// Largest relative change over the components at the final refinement.
    pub achieved_tol: T,
    pub converged: bool,
}

/// A quadrature node `tau = j / den` with `U = cos^2(pi tau / 2)` and `1 - U`.
#[derive(Debug, Clone, Copy)]
pub struct Node<T> {
    pub j: u64,
    pub den: u64,
    pub u: T,
    pub one_minus_u: T,
}

impl<T: Real> Node<T> {
    fn new(j: u64, den: u64) -> Self {
        // cos(pi j / 2den) = sin(pi (den - j) / 2den); both forms keep full relative accuracy.
        let c: T = sin_pi_ratio(den - j, 2 * den);
        let s: T = sin_pi_ratio(j, 2 * den);
        Self { j, den, u: c * c, one_minus_u: s * s }
    }

    /// A point off the real `tau` interval, given by `U` alone; `den = 0` marks it.
    pub fn at_u(u: T) -> Self {
        Self { j: 0, den: 0, u, one_minus_u: T::one() - u }
    }

    /// False for points made by [`Node::at_u`], which have no phase.
    pub fn on_grid(&self) -> bool {
        self.den != 0
    }

    /// `sin(k pi tau)`, reduced exactly.
    pub fn sin_multiple(&self, k: u64) -> T {
        sin_pi_ratio(k * self.j, self.den)
    }
}

/// Neumaier-compensated running sum with a magnitude tally.
#[derive(Debug, Clone, Copy, Default)]
struct Acc<T> {
    sum: T,
    comp: T,
    abs: T,
}

impl<T: Real> Acc<T> {
    fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
        self.abs = self.abs + x.abs();
    }

    fn value(&self) -> T {
        self.sum + self.comp
    }
}

fn level_nodes<T: Real>(rule: Rule, start: usize, level: usize, den: u64) -> Vec<Node<T>> {
    let mut out = Vec::new();
    match rule {
        Rule::Trapezoidal => {
            // den = L; the endpoint weights vanish, so only interior nodes are sampled.
            // After a doubling the old nodes carry even numerators.
            let step = if level == 0 { 1 } else { 2 };
            let mut j = 1;
            while j < den {
                out.push(Node::new(j, den));
                j += step;
            }
        }
        Rule::Midpoint => {
            // den = 2L; nodes are the odd numerators, those divisible by 3 exist already.
            let mut j = 1;
            while j < den {
                if level == 0 || j % 3 != 0 {
                    out.push(Node::new(j, den));
                }
                j += 2;
            }
        }
    }
    debug_assert!(level > 0 || out.len() + usize::from(rule == Rule::Trapezoidal) == start);
    out
}

/// Integrates a vector-valued integrand until every component has settled.
///
/// `f(node, out)` writes the `n_out` integrand values at `node` into `out`. A component is
/// settled when its change between refinements is within `tol` relative, or within the
/// rounding floor of its own terms; two consecutive settled refinements stop the iteration.
pub fn integrate<T, F>(rule: Rule, n_out: usize, opts: &QuadratureOptions<T>, f: F) -> QuadratureState<T>
where
    T: Real,
    F: FnMut(&Node<T>, &mut [T]),
{
    drive(rule, None, n_out, opts, f)
}

/// Integrates `f * U/(U + b)` where `f` is smooth. `b >= 0`.
///
/// With the mid-point rule the near-pole at `U = -b` is subtracted analytically, which needs
/// `f` at `Node::at_u(-b)`; `f` must be analytic there. The trapezoidal rule is only selected away from the critical point,
/// where the factor is resolved directly.
pub fn integrate_weighted<T, F>(rule: Rule, b: T, n_out: usize, opts: &QuadratureOptions<T>, f: F) -> QuadratureState<T>
where
    T: Real,
    F: FnMut(&Node<T>, &mut [T]),
{
    drive(rule, Some(b), n_out, opts, f)
}

fn drive<T, F>(rule: Rule, b: Option<T>, n_out: usize, opts: &QuadratureOptions<T>, mut f: F) -> QuadratureState<T>
where
    T: Real,
    F: FnMut(&Node<T>, &mut [T]),
{
    let start = opts.start_nodes.max(2);
    let mut accs = vec![Acc::<T>::default(); n_out];
    let mut buf = vec![T::zero(); n_out];
    // Values at the pole and the exact integral subtracted per component. A component whose
    // value at the pole has grown past twice its value at U = 0 would cancel on subtraction;
    // it keeps the plain factor, which is resolved at the b where such growth occurs.
    let split: Option<(T, Vec<Option<T>>)> = match b {
        Some(b) if rule == Rule::Midpoint && b > T::zero() => {
            let mut g_pole = vec![T::zero(); n_out];
            let mut g_end = vec![T::zero(); n_out];
            f(&Node::at_u(-b), &mut g_pole);
            f(&Node::at_u(T::zero()), &mut g_end);
            let kept = g_pole.iter().zip(&g_end).map(|(&g, &e)| (g.abs() <= T::lit(2.0) * e.abs()).then_some(g));
            Some((b, kept.collect()))
        }
        _ => None,
    };
    let shift: Vec<T> = match &split {
        Some((b, g_pole)) => {
            let w = (*b / (T::one() + *b)).sqrt();
            g_pole.iter().map(|g| g.map_or(T::zero(), |g| g * w)).collect()
        }
        None => vec![T::zero(); n_out],
    };
    let mut nodes = start;
    let mut den = match rule {
        Rule::Trapezoidal => start as u64,
        Rule::Midpoint => 2 * start as u64,
    };
    let mut sweep = |den: u64, level: usize, accs: &mut [Acc<T>]| {
        for node in level_nodes::<T>(rule, start, level, den) {
            f(&node, &mut buf);
            match (&split, b) {
                (Some((b, g_pole)), _) => {
                    let inv = T::one() / (node.u + *b);
                    for ((acc, &v), g) in accs.iter_mut().zip(buf.iter()).zip(g_pole.iter()) {
                        acc.add((v * node.u + g.map_or(T::zero(), |g| *b * g)) * inv);
                    }
                }
                (None, Some(b)) => {
                    let denom = node.u + b;
                    let ratio = if denom == T::zero() { T::one() } else { node.u / denom };
                    for (acc, &v) in accs.iter_mut().zip(buf.iter()) {
                        acc.add(v * ratio);
                    }
                }
                (None, None) => {
                    for (acc, &v) in accs.iter_mut().zip(buf.iter()) {
                        acc.add(v);
                    }
                }
            }
        }
    };
    sweep(den, 0, &mut accs);
    let estimate = |accs: &[Acc<T>], nodes: usize| -> Vec<T> {
        let inv = T::one() / T::of(nodes);
        accs.iter().zip(shift.iter()).map(|(a, &c)| a.value() * inv - c).collect()
    };
    let mut current = estimate(&accs, nodes);
    let mut previous = current.clone();
    let mut passes = 0;
    let mut refinements = 0;
    let mut achieved = T::infinity();
    let floor_scale = T::epsilon() * T::lit(16.0);
    let mut converged = false;
    while refinements < opts.max_refinements {
        nodes *= rule.factor();
        den *= rule.factor() as u64;
        refinements += 1;
        sweep(den, refinements, &mut accs);
        previous = current;
        current = estimate(&accs, nodes);
        let inv = T::one() / T::of(nodes);
        let mut settled = true;
        let mut worst = T::zero();
        for (((c, p), acc), sh) in current.iter().zip(previous.iter()).zip(accs.iter()).zip(shift.iter()) {
            let delta = (*c - *p).abs();
            let floor = floor_scale * (acc.abs * inv + sh.abs());
            if delta > opts.tol * c.abs() + floor {
                settled = false;
            }
            let rel = if *c != T::zero() { delta / c.abs() } else { delta };
            if rel > worst {
                worst = rel;
            }
        }
        achieved = worst;
        if settled {
            passes += 1;
            if passes >= 2 {
                converged = true;
                break;
            }
        } else {
            passes = 0;
        }
    }
    QuadratureState { rule, nodes, refinements, previous, current, achieved_tol: achieved, converged }
}

/// Like [`integrate`] but turns a failure to converge into an error carrying the best estimate.
pub fn integrate_checked<T, F>(
    what: &'static str,
    rule: Rule,
    n_out: usize,
    opts: &QuadratureOptions<T>,
    f: F,
) -> Result<QuadratureState<T>>
where
    T: Real,
    F: FnMut(&Node<T>, &mut [T]),
{
    checked(what, integrate(rule, n_out, opts, f))
}

/// [`integrate_weighted`] with failures turned into errors.
pub fn integrate_weighted_checked<T, F>(
    what: &'static str,
    rule: Rule,
    b: T,
    n_out: usize,
    opts: &QuadratureOptions<T>,
    f: F,
) -> Result<QuadratureState<T>>
where
    T: Real,
    F: FnMut(&Node<T>, &mut [T]),
{
    checked(what, integrate_weighted(rule, b, n_out, opts, f))
}

fn checked<T: Real>(what: &'static str, state: QuadratureState<T>) -> Result<QuadratureState<T>> {
    if state.converged {
        Ok(state)
    } else {
        Err(Error::ConvergenceFailure {
            what,
            iterations: state.refinements,
            best_estimate: state.current.first().map(|v| v.as_f64()).unwrap_or(f64::NAN),
        })
    }
}
