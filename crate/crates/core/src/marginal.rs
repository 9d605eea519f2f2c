//! Marginal queue-length distributions.
//!
//! The high-priority marginal is geometric. The low-priority marginal is
//! `p_n = P_pol(n) + P_cut(n)`, with the cut integral evaluated by quadrature, by finite
//! sums of scaled Legendre polynomials, or by its large-`n` asymptote.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TwoLevelModel;
use crate::qfunc::scaled_legendre;
use crate::quadrature::{
    integrate_weighted, integrate_weighted_checked, Node, QuadratureOptions, QuadratureState, Rule,
};
use crate::scalar::Real;

/// Engine that produced a PMF entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Quadrature,
    Exact,
    Asymptotic,
    /// A degenerate parameter set with an elementary closed form.
    ClosedForm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Exact => "exact",
            Method::Asymptotic => "asymptotic",
            Method::ClosedForm => "closed-form",
        }
    }
}

/// Engine requested by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Engine {
    Quadrature,
    Exact,
    Asymptotic,
    /// Exact sums, except close to the critical point where quadrature is used.
    #[default]
    Auto,
}

impl Engine {
    fn resolve<T: Real>(self, model: &TwoLevelModel<T>) -> Engine {
        match self {
            Engine::Auto if model.derived.beta_m1.abs() < T::lit(crate::quadrature::RULE_SWITCH_THRESHOLD) => {
                Engine::Quadrature
            }
            Engine::Auto => Engine::Exact,
            e => e,
        }
    }
}

/// A probability with its pole/cut breakdown and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfResult<T> {
    pub value: T,
    pub pole_part: T,
    pub cut_part: T,
    pub method: Method,
    pub refinements: usize,
    pub achieved_tol: T,
}

impl<T: Real> PmfResult<T> {
    fn closed_form(value: T) -> Self {
        Self {
            value,
            pole_part: value,
            cut_part: T::zero(),
            method: Method::ClosedForm,
            refinements: 0,
            achieved_tol: T::zero(),
        }
    }

    fn split(pole: T, cut: T, method: Method, refinements: usize, achieved_tol: T) -> Self {
        Self { value: pole + cut, pole_part: pole, cut_part: cut, method, refinements, achieved_tol }
    }
}

/// Relative size of the `1 - sqrt(D) sum P^_k` bracket below which its direct evaluation
/// has lost too many digits and the tail form takes over.
const BRACKET_CANCELLATION: f64 = 1e-3;
/// Tail-sum stopping threshold and term cap.
pub const TAIL_EPS: f64 = 2.0 * f64::EPSILON;
pub const TAIL_MAX_TERMS: usize = 1_000_000;

impl<T: Real> TwoLevelModel<T> {
    /// `(1 - r_hi) r_hi^ell`.
    pub fn p_hi(&self, ell: usize) -> T {
        let r_hi = self.r_hi();
        (T::one() - r_hi) * r_hi.powi(ell as i32)
    }

    /// Degenerate low-priority marginal, when one exists.
    fn p_lo_closed_form(&self, n: usize) -> Option<T> {
        let d = &self.derived;
        if self.r() == T::zero() || d.no_low {
            Some(if n == 0 { T::one() } else { T::zero() })
        } else if d.no_high {
            Some((T::one() - self.r()) * self.r().powi(n as i32))
        } else {
            None
        }
    }

    /// Residue contribution of the pole at `1/r` to `p_n`.
    pub fn pole_term(&self, n: usize) -> T {
        let r = self.r();
        if !self.derived.pole_active || self.r_lo() == T::zero() {
            return T::zero();
        }
        let s = self.r_hi().sqrt();
        // 1 - r(1 - r)/r_lo = (r^2 - r_hi)/r_lo
        let bracket = (r - s) * (r + s) / self.r_lo();
        bracket * (T::one() - r) * r.powi(n as i32 - 1)
    }

    /// Node weight without the `U/(U + b)` factor, which the driver applies.
    fn marginal_weight(&self, node: &Node<T>) -> T {
        let r = self.r();
        T::lit(2.0) * (T::one() - r) / r * node.one_minus_u
    }

    fn require_cut(&self) -> Result<()> {
        if self.derived.has_cut() && self.r() > T::zero() {
            Ok(())
        } else {
            Err(Error::domain("cut integral needs r_hi > 0 and r_lo > 0"))
        }
    }

    /// Cut contribution to `p_n` by iterative Gauss-Chebyshev quadrature.
    pub fn cut_term_quadrature(&self, n: usize, opts: &QuadratureOptions<T>) -> Result<(T, QuadratureState<T>)> {
        self.require_cut()?;
        let d = self.derived;
        let rule = Rule::select(d.beta_m1);
        let state = integrate_weighted_checked("marginal cut quadrature", rule, d.b, 1, opts, |node, out| {
            let q = T::one() / (d.x_dif * (node.u + d.a));
            out[0] = T::lit(0.25) * d.x_dif * self.marginal_weight(node) * q.powi(n as i32 + 1);
        })?;
        Ok((state.current[0], state))
    }

    /// The cut rule at a fixed node count `L`, without refinement. Diagnostic use: the error
    /// of this estimate against a converged one shows the rate of convergence.
    pub fn cut_term_at_nodes(&self, n: usize, nodes: usize) -> Result<T> {
        self.require_cut()?;
        let d = self.derived;
        let opts = QuadratureOptions { tol: T::zero(), start_nodes: nodes, max_refinements: 0 };
        let state = integrate_weighted(Rule::select(d.beta_m1), d.b, 1, &opts, |node, out| {
            let q = T::one() / (d.x_dif * (node.u + d.a));
            out[0] = T::lit(0.25) * d.x_dif * self.marginal_weight(node) * q.powi(n as i32 + 1);
        });
        Ok(state.current[0])
    }

    /// Cut contributions to `p_0..=p_{n_max}` from one shared quadrature.
    pub fn cut_terms_quadrature(
        &self,
        n_max: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<(Vec<T>, QuadratureState<T>)> {
        self.require_cut()?;
        let d = self.derived;
        let rule = Rule::select(d.beta_m1);
        let state = integrate_weighted_checked("marginal cut quadrature", rule, d.b, n_max + 1, opts, |node, out| {
            let q = T::one() / (d.x_dif * (node.u + d.a));
            let mut v = T::lit(0.25) * d.x_dif * self.marginal_weight(node) * q;
            for slot in out.iter_mut() {
                *slot = v;
                v = v * q;
            }
        })?;
        Ok((state.current.clone(), state))
    }

    /// Scaled marginal integral `M_scl(n)` from the Legendre sums.
    ///
    /// The direct form `-z P^_{n-1} + (2 chi - z) P^_n - (sqrt(D)/z)[1 - sqrt(D) sum_{k<=n} P^_k]`
    /// is used while its bracket passes the bounding test and has not cancelled; otherwise the
    /// bracket is replaced by the convergent tail `sqrt(D) sum_{k>n} P^_k`.
    pub fn m_scl(&self, n: usize) -> Result<T> {
        Ok(self.m_scl_sequence(n)?[n])
    }

    /// `M_scl(0..=n_max)`.
    pub fn m_scl_sequence(&self, n_max: usize) -> Result<Vec<T>> {
        self.require_cut()?;
        let d = self.derived;
        let (t, z) = (d.tq, d.zq);
        let seq = scaled_legendre(t, z, n_max)?;
        let bound_scale = T::lit(2.0) * (d.beta + T::one()) / d.sqrt_alpha2m1;
        let mut out = Vec::with_capacity(n_max + 1);
        let mut partial = T::zero();
        let mut tails: Option<Vec<T>> = None;
        for n in 0..=n_max {
            let p_n = seq.get(n as isize);
            let p_prev = seq.get(n as isize - 1);
            partial = partial + p_n;
            let head = -z * p_prev + (T::lit(2.0) * d.chi - z) * p_n;
            let bracket = T::one() - d.sqrt_d * partial;
            let x = d.sqrt_d / z * bracket;
            let bounded = x >= T::zero() && x < bound_scale * p_n;
            let cancelled = bracket < T::lit(BRACKET_CANCELLATION);
            let use_tail = d.d > T::zero() && (!bounded || cancelled);
            let x = if use_tail {
                if tails.is_none() {
                    tails = Some(legendre_tails(t, z, &seq, n_max)?);
                }
                d.d / z * tails.as_ref().unwrap()[n]
            } else {
                x
            };
            out.push(head - x);
        }
        Ok(out)
    }

    /// Cut contribution to `p_n` from the Legendre sums.
    pub fn cut_term_exact(&self, n: usize) -> Result<T> {
        Ok(self.cut_terms_exact(n)?[n])
    }

    /// Cut contributions to `p_0..=p_{n_max}` from the Legendre sums.
    pub fn cut_terms_exact(&self, n_max: usize) -> Result<Vec<T>> {
        let r = self.r();
        let m = self.m_scl_sequence(n_max)?;
        let scale = T::lit(0.5) * (T::one() - r);
        Ok(m.into_iter().enumerate().map(|(n, v)| scale * r.powi(n as i32 - 1) * v).collect())
    }

    /// Leading large-`n` behaviour of the cut contribution.
    pub fn cut_term_asymptotic(&self, n: usize) -> Result<T> {
        self.require_cut()?;
        if n == 0 {
            return Err(Error::domain("asymptotic form needs n >= 1"));
        }
        let d = &self.derived;
        let r = self.r();
        let nf = T::of(n);
        if d.b == T::zero() {
            return Ok(((T::one() - r) / (T::PI() * r)).sqrt() * r.powi(n as i32) / nf.sqrt());
        }
        let rate = (T::one() - d.b / d.a) * r;
        let pre = (T::one() - r) / (T::lit(4.0) * r * d.b) * (d.a / (T::PI() * nf * nf * nf)).sqrt();
        Ok(pre * rate.powi(n as i32))
    }

    /// Pole term plus the asymptotic cut estimate.
    pub fn p_lo_asymptotic(&self, n: usize) -> Result<T> {
        if n == 0 {
            return Err(Error::domain("asymptotic form needs n >= 1"));
        }
        if let Some(v) = self.p_lo_closed_form(n) {
            return Ok(v);
        }
        Ok(self.pole_term(n) + self.cut_term_asymptotic(n)?)
    }

    /// Low-priority marginal `p_n` with the default tolerance.
    pub fn p_lo(&self, n: usize, engine: Engine) -> Result<PmfResult<T>> {
        self.p_lo_with(n, engine, &QuadratureOptions::default())
    }

    pub fn p_lo_with(&self, n: usize, engine: Engine, opts: &QuadratureOptions<T>) -> Result<PmfResult<T>> {
        if let Some(v) = self.p_lo_closed_form(n) {
            return Ok(PmfResult::closed_form(v));
        }
        let pole = self.pole_term(n);
        match engine.resolve(self) {
            Engine::Quadrature => {
                let (cut, st) = self.cut_term_quadrature(n, opts)?;
                Ok(PmfResult::split(pole, cut, Method::Quadrature, st.refinements, st.achieved_tol))
            }
            Engine::Exact => Ok(PmfResult::split(pole, self.cut_term_exact(n)?, Method::Exact, 0, T::zero())),
            Engine::Asymptotic => {
                let cut = self.cut_term_asymptotic(n)?;
                Ok(PmfResult::split(pole, cut, Method::Asymptotic, 0, T::zero()))
            }
            Engine::Auto => unreachable!("resolved above"),
        }
    }

    /// `p_0..=p_{n_max}` with one shared evaluation per engine.
    pub fn p_lo_sequence(
        &self,
        n_max: usize,
        engine: Engine,
        opts: &QuadratureOptions<T>,
    ) -> Result<Vec<PmfResult<T>>> {
        if self.p_lo_closed_form(0).is_some() {
            return Ok((0..=n_max).map(|n| PmfResult::closed_form(self.p_lo_closed_form(n).unwrap())).collect());
        }
        let engine = engine.resolve(self);
        let (cuts, method, refinements, tol) = match engine {
            Engine::Quadrature => {
                let (c, st) = self.cut_terms_quadrature(n_max, opts)?;
                (c, Method::Quadrature, st.refinements, st.achieved_tol)
            }
            Engine::Exact => (self.cut_terms_exact(n_max)?, Method::Exact, 0, T::zero()),
            Engine::Asymptotic => {
                // n = 0 has no asymptote; it is taken from the exact sums.
                let mut c = vec![self.cut_term_exact(0)?];
                for n in 1..=n_max {
                    c.push(self.cut_term_asymptotic(n)?);
                }
                (c, Method::Asymptotic, 0, T::zero())
            }
            Engine::Auto => unreachable!("resolved above"),
        };
        Ok(cuts
            .into_iter()
            .enumerate()
            .map(|(n, cut)| PmfResult::split(self.pole_term(n), cut, method, refinements, tol))
            .collect())
    }

    /// Per-index evaluation of `p_lo` in parallel; each entry gets its own refinement.
    pub fn p_lo_batch(&self, ns: &[usize], engine: Engine, opts: &QuadratureOptions<T>) -> Vec<Result<PmfResult<T>>> {
        ns.par_iter().map(|&n| self.p_lo_with(n, engine, opts)).collect()
    }
}

/// `sum_{k>n} P^_k` for every `n <= n_max`, continuing the recurrence past `n_max`.
fn legendre_tails<T: Real>(t: T, z: T, seq: &crate::qfunc::ScaledPolySeq<T>, n_max: usize) -> Result<Vec<T>> {
    let z2 = z * z;
    let mut prev = seq.get(n_max as isize - 1);
    let mut cur = seq.get(n_max as isize);
    let mut beyond = T::zero();
    let mut k = n_max;
    let mut terms = 0usize;
    loop {
        k += 1;
        let kf = T::of(k);
        let next = (T::lit(2.0) - kf.recip()) * t * cur - (T::one() - kf.recip()) * z2 * prev;
        prev = cur;
        cur = next;
        beyond = beyond + next;
        terms += 1;
        if next.abs() <= T::lit(TAIL_EPS) * beyond.abs() {
            break;
        }
        if terms >= TAIL_MAX_TERMS || !beyond.is_finite() {
            return Err(Error::ConvergenceFailure {
                what: "Legendre tail sum",
                iterations: terms,
                best_estimate: beyond.as_f64(),
            });
        }
    }
    let mut tails = vec![T::zero(); n_max + 1];
    let mut acc = beyond;
    for n in (0..=n_max).rev() {
        tails[n] = acc;
        acc = acc + seq.get(n as isize);
    }
    Ok(tails)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(r: f64, nu: f64) -> TwoLevelModel<f64> {
        TwoLevelModel::from_r_nu(r, nu).unwrap()
    }

    #[test]
    fn high_priority_marginal() {
        let m = model(0.9, 0.5);
        assert_eq!(m.p_hi(0), 0.55);
        assert!((m.p_hi(2) - 0.55 * 0.2025).abs() < 1e-16);
        assert_eq!(model(0.9, 0.0).p_hi(3), 0.0);
    }

    #[test]
    fn pole_term_examples() {
        let m = model(0.8, 0.0);
        assert!((m.pole_term(4) - 0.2 * 0.8f64.powi(4)).abs() < 1e-16);
        assert_eq!(model(0.5, 0.5).pole_term(3), 0.0);
        assert_eq!(model(0.9, 0.95).pole_term(3), 0.0);
    }

    #[test]
    fn degenerate_marginals() {
        let r = model(0.8, 1.0).p_lo(0, Engine::Quadrature).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(model(0.8, 1.0).p_lo(3, Engine::Exact).unwrap().value, 0.0);
        let r = model(0.8, 0.0).p_lo(3, Engine::Exact).unwrap();
        assert!((r.value - 0.1024).abs() < 1e-15);
        assert_eq!(r.cut_part, 0.0);
        assert!((model(0.8, 0.0).p_lo_asymptotic(3).unwrap() - 0.1024).abs() < 1e-15);
    }

    #[test]
    fn critical_point_closed_form_at_zero() {
        let m = model(0.5, 0.5);
        let want = (5f64.sqrt() - 1.0) / 2.0;
        for engine in [Engine::Quadrature, Engine::Exact] {
            let r = m.p_lo(0, engine).unwrap();
            assert_eq!(r.pole_part, 0.0);
            assert!((r.value - want).abs() < 1e-13, "{engine:?}: {}", r.value);
        }
        assert_eq!(Engine::Auto.resolve(&m), Engine::Quadrature);
        assert_eq!(m.p_lo(0, Engine::Quadrature).unwrap().method, Method::Quadrature);
    }

    #[test]
    fn m_scl_at_zero_matches_closed_form() {
        let m = model(0.9, 0.3);
        let d = m.derived;
        let sb = (d.beta_m1 * (d.beta + 1.0)).sqrt();
        let want = (d.alpha + d.beta) / (d.sqrt_alpha2m1 + sb) - 1.0;
        assert!((m.m_scl(0).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn engines_agree() {
        for (r, nu) in [(0.9, 0.5), (0.5, 0.1), (0.9, 0.99), (0.3, 0.7)] {
            let m = model(r, nu);
            let q = m.p_lo_sequence(50, Engine::Quadrature, &QuadratureOptions::default()).unwrap();
            let e = m.p_lo_sequence(50, Engine::Exact, &QuadratureOptions::default()).unwrap();
            for (n, (a, b)) in q.iter().zip(e.iter()).enumerate() {
                if a.value > 1e-14 {
                    let diff = (a.value.ln() - b.value.ln()).abs();
                    assert!(diff < 1e-10, "r={r} nu={nu} n={n}: {} vs {}", a.value, b.value);
                }
            }
        }
    }

    #[test]
    fn batch_and_single_quadrature_agree() {
        let m = model(0.9, 0.5);
        let opts = QuadratureOptions::default();
        let seq = m.p_lo_sequence(20, Engine::Quadrature, &opts).unwrap();
        for (res, n) in m.p_lo_batch(&[0, 7, 20], Engine::Quadrature, &opts).into_iter().zip([0, 7, 20]) {
            let v = res.unwrap().value;
            assert!((v - seq[n].value).abs() <= 1e-13 * v);
        }
    }

    #[test]
    fn asymptote_needs_positive_index() {
        assert!(model(0.9, 0.3).p_lo_asymptotic(0).is_err());
    }
}
