//! Wait-conditional joint PMF `P(ell, m)`.
//!
//! `P(ell, m) = P_pol(ell, m) + P_cut(ell, m)`. The quadrature engine evaluates
//! `P_cut = Lambda(ell + 1, m) - Lambda(ell, m + 1)` node by node on one grid. The exact engine
//! assembles the cut from the scaled joint integrals
//!
//! `J(ell, m) = d_{ell+1}(beta) + d_{ell+1}(alpha) [z Q^_m^{ell+1} - (1 + chi) S_m^ell + (chi - z) S_m^{ell+1}]`
//!
//! with `S_m^ell = sum_{k<=m} Q^_k^ell`, as
//! `P_cut = (1 - r) sqrt(r_hi) [r_hi^{ell/2} r^{m-1} J(ell, m-1) - r_hi^{(ell-1)/2} r^m J(ell-1, m)]`.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::{Engine, Method, PmfResult, TAIL_EPS, TAIL_MAX_TERMS};
use crate::model::{TwoLevelModel, TwoLevelParams};
use crate::qfunc::ScaledQIter;
use crate::quadrature::{
    integrate_weighted, integrate_weighted_checked, Node, QuadratureOptions, QuadratureState, Rule,
    RULE_SWITCH_THRESHOLD,
};
use crate::scalar::Real;

/// Index pair `(ell, m)` of high- and low-priority queue lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointIndex {
    pub ell: usize,
    pub m: usize,
}

/// Largest `m` the exact engine caches before `Auto` falls back to quadrature.
pub const EXACT_M_BUDGET: usize = 20_000;

/// Rectangular block `0..=l_max x 0..=m_max` of joint PMF entries.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGridResult<T> {
    pub l_max: usize,
    pub m_max: usize,
    pub params: TwoLevelParams<T>,
    pub method: Method,
    entries: Vec<PmfResult<T>>,
}

impl<T: Real> JointGridResult<T> {
    pub fn get(&self, ell: usize, m: usize) -> &PmfResult<T> {
        &self.entries[ell * (self.m_max + 1) + m]
    }

    pub fn value(&self, ell: usize, m: usize) -> T {
        self.get(ell, m).value
    }

    /// Row `ell` over `m = 0..=m_max`.
    pub fn row(&self, ell: usize) -> &[PmfResult<T>] {
        let w = self.m_max + 1;
        &self.entries[ell * w..(ell + 1) * w]
    }

    pub fn iter(&self) -> impl Iterator<Item = (JointIndex, &PmfResult<T>)> {
        let w = self.m_max + 1;
        self.entries.iter().enumerate().map(move |(i, e)| (JointIndex { ell: i / w, m: i % w }, e))
    }
}

/// Scaled Q-function row `Q^_0..=M^k` with prefix sums and, on demand, tail sums.
struct QRow<T> {
    values: Vec<T>,
    prefix: Vec<T>,
    tails: OnceLock<Option<Vec<T>>>,
    t: T,
    z: T,
    order: usize,
}

impl<T: Real> QRow<T> {
    fn new(t: T, z: T, order: usize, m_max: usize) -> Self {
        let values: Vec<T> = ScaledQIter::new(t, z, order).take(m_max + 1).collect();
        let mut prefix = Vec::with_capacity(values.len());
        let mut acc = T::zero();
        for &v in &values {
            acc = acc + v;
            prefix.push(acc);
        }
        Self { values, prefix, tails: OnceLock::new(), t, z, order }
    }

    /// `sum_{k>m} Q^_k` for `m <= M`, or `None` when the series does not settle in budget.
    fn tails(&self) -> Option<&Vec<T>> {
        self.tails
            .get_or_init(|| {
                let m_max = self.values.len() - 1;
                let mut it = ScaledQIter::new(self.t, self.z, self.order).skip(m_max + 1);
                let mut beyond = T::zero();
                let mut last = self.values[m_max];
                for _ in 0..TAIL_MAX_TERMS {
                    let v = it.next()?;
                    beyond = beyond + v;
                    let shrinking = v <= last;
                    last = v;
                    if !beyond.is_finite() {
                        return None;
                    }
                    if shrinking && v <= T::lit(TAIL_EPS) * beyond {
                        let mut tails = vec![T::zero(); m_max + 1];
                        let mut acc = beyond;
                        for m in (0..=m_max).rev() {
                            tails[m] = acc;
                            acc = acc + self.values[m];
                        }
                        return Some(tails);
                    }
                }
                None
            })
            .as_ref()
    }
}

/// One scaled joint integral: the full value `J` and its `alpha` part `J - d_{ell+1}(beta)`.
#[derive(Debug, Clone, Copy)]
struct JValue<T> {
    full: T,
    alpha_part: T,
    /// Whether `alpha_part` carries full relative accuracy (head form).
    head: bool,
}

/// Exact-engine evaluator over `ell <= l_max`, `m <= m_max`.
struct ExactJoint<'a, T> {
    model: &'a TwoLevelModel<T>,
    rows: Vec<QRow<T>>,
    tail_ok: bool,
}

impl<'a, T: Real> ExactJoint<'a, T> {
    fn new(model: &'a TwoLevelModel<T>, l_max: usize, m_max: usize) -> Self {
        let d = &model.derived;
        let rows: Vec<QRow<T>> = (0..=l_max + 1).into_par_iter().map(|k| QRow::new(d.tq, d.zq, k, m_max)).collect();
        // Tail ratio z (chi + sqrt(chi^2 - 1)) reaches 1 at the critical point.
        let q = d.zq * (d.chi + ((d.chi - T::one()) * (d.chi + T::one())).sqrt());
        let tail_ok = d.d > T::zero() && (T::one() - q) * T::of(TAIL_MAX_TERMS) > T::lit(64.0);
        Self { model, rows, tail_ok }
    }

    /// `J(ell, m)` for `ell >= -1`, `m >= -1`.
    fn j(&self, ell: isize, m: isize) -> JValue<T> {
        let d = &self.model.derived;
        if ell < 0 {
            // J(-1, m) = 0 while d_0(beta) = 1.
            return JValue { full: T::zero(), alpha_part: -T::one(), head: true };
        }
        let l = ell as usize;
        let d_beta = d.d_beta(l + 1);
        if m < 0 {
            return JValue { full: d_beta, alpha_part: T::zero(), head: true };
        }
        let m = m as usize;
        let (lo, hi) = (&self.rows[l], &self.rows[l + 1]);
        let (z, chi) = (d.zq, d.chi);
        let d_alpha = d.d_alpha(l + 1);
        let zq = z * hi.values[m];
        let a_lo = (T::one() + chi) * lo.prefix[m];
        let a_hi = (chi - z) * hi.prefix[m];
        let bracket = zq - a_lo + a_hi;
        let alpha_part = d_alpha * bracket;
        let full = d_beta + alpha_part;
        let mag_head = d_beta + d_alpha * (zq + a_lo + a_hi);
        if self.tail_ok && mag_head > T::lit(100.0) * full.abs() {
            if let (Some(t_lo), Some(t_hi)) = (lo.tails(), hi.tails()) {
                let b_lo = (T::one() + chi) * t_lo[m];
                let b_hi = (chi - z) * t_hi[m];
                let mag_tail = d_alpha * (zq + b_lo + b_hi);
                if mag_tail < mag_head {
                    let full = d_alpha * (zq + b_lo - b_hi);
                    return JValue { full, alpha_part: full - d_beta, head: false };
                }
            }
        }
        JValue { full, alpha_part, head: true }
    }

    /// `(pole, cut, value)` for one entry.
    fn entry(&self, ell: usize, m: usize) -> (T, T, T) {
        let model = self.model;
        let (r, r_hi) = (model.r(), model.r_hi());
        let s = r_hi.sqrt();
        let c = (T::one() - r) * s;
        let x = r_hi.powi(ell as i32).sqrt() * r.powi(m as i32 - 1);
        let y = if ell == 0 { r.powi(m as i32) / s } else { r_hi.powi(ell as i32 - 1).sqrt() * r.powi(m as i32) };
        let j1 = self.j(ell as isize, m as isize - 1);
        let j2 = self.j(ell as isize - 1, m as isize);
        let pole = model.pole_term_joint(ell, m);
        if j1.head && j2.head {
            // The beta parts of the cut cancel the pole exactly.
            let value = c * (x * j1.alpha_part - y * j2.alpha_part);
            (pole, value - pole, value)
        } else {
            let cut = c * (x * j1.full - y * j2.full);
            (pole, cut, pole + cut)
        }
    }
}

impl<T: Real> TwoLevelModel<T> {
    /// Residue contribution of the pole at `1/r` to `P(ell, m)`.
    pub fn pole_term_joint(&self, ell: usize, m: usize) -> T {
        if !self.derived.pole_active {
            return T::zero();
        }
        let (r, r_hi) = (self.r(), self.r_hi());
        let s = r_hi.sqrt();
        // 1 - r_hi/r^2 = (r - s)(r + s)/r^2
        let factor = (r - s) * (r + s) / (r * r);
        (T::one() - r) * r.powi(m as i32) * factor * (r_hi / r).powi(ell as i32)
    }

    /// The pole term in its d-factor form
    /// `(1 - r) r^{m-1} r_hi^{ell/2} [r d_ell(beta) - sqrt(r_hi) d_{ell+1}(beta)]`.
    pub fn pole_term_joint_dform(&self, ell: usize, m: usize) -> T {
        let (r, r_hi) = (self.r(), self.r_hi());
        let d = &self.derived;
        let s = r_hi.sqrt();
        (T::one() - r)
            * r.powi(m as i32 - 1)
            * r_hi.powi(ell as i32).sqrt()
            * (r * d.d_beta(ell) - s * d.d_beta(ell + 1))
    }

    fn joint_closed_form(&self, ell: usize, m: usize) -> Option<T> {
        let d = &self.derived;
        let r = self.r();
        if r == T::zero() {
            Some(if ell == 0 && m == 0 { T::one() } else { T::zero() })
        } else if d.no_high {
            Some(if ell == 0 { (T::one() - r) * r.powi(m as i32) } else { T::zero() })
        } else if d.no_low {
            Some(if m == 0 { (T::one() - r) * r.powi(ell as i32) } else { T::zero() })
        } else {
            None
        }
    }

    fn require_joint_cut(&self) -> Result<()> {
        if self.derived.has_cut() && self.r() > T::zero() {
            Ok(())
        } else {
            Err(Error::domain("cut integral needs r_hi > 0 and r_lo > 0"))
        }
    }

    fn joint_rule(&self) -> Rule {
        Rule::select(self.derived.beta_m1)
    }

    /// `C_ell(U) = (-1)^{ell-1} sin(ell pi tau) / sin(pi tau)` with the phases reduced exactly.
    /// Off the grid it is the Chebyshev polynomial `U_{ell-1}(1 - 2U)`.
    fn chebyshev_factor(node: &Node<T>, ell: usize) -> T {
        match ell {
            0 => T::zero(),
            1 => T::one(),
            _ if !node.on_grid() => {
                let x = T::one() - T::lit(2.0) * node.u;
                let (mut prev, mut cur) = (T::one(), x + x);
                for _ in 2..ell {
                    (prev, cur) = (cur, (x + x) * cur - prev);
                }
                cur
            }
            _ => {
                let sign = if ell % 2 == 0 { -T::one() } else { T::one() };
                sign * node.sin_multiple(ell as u64) / node.sin_multiple(1)
            }
        }
    }

    /// `(2(1 - r)/r)(1 - U)`, the common node weight; the driver applies `U/(U + b)`.
    fn joint_weight(&self, node: &Node<T>) -> T {
        T::lit(2.0) * (T::one() - self.r()) / self.r() * node.one_minus_u
    }

    /// `1 / (x_minus (1 + U/a))`.
    fn joint_decay(&self, node: &Node<T>) -> T {
        let d = &self.derived;
        d.a / (d.x_minus * (d.a + node.u))
    }

    /// `Lambda(ell, m) = r_hi^{ell/2} (1/L) sum_k W_k C_ell(U_k) / [x_minus (1 + U_k/a)]^m`.
    pub fn lambda_quadrature(&self, ell: usize, m: usize, opts: &QuadratureOptions<T>) -> Result<T> {
        self.require_joint_cut()?;
        if ell == 0 {
            return Ok(T::zero());
        }
        let scale = self.r_hi().powi(ell as i32).sqrt();
        let st = integrate_weighted_checked(
            "joint Lambda quadrature",
            self.joint_rule(),
            self.derived.b,
            1,
            opts,
            |node, out| {
                out[0] =
                    self.joint_weight(node) * Self::chebyshev_factor(node, ell) * self.joint_decay(node).powi(m as i32);
            },
        )?;
        Ok(scale * st.current[0])
    }

    /// Cut contribution `Lambda(ell + 1, m) - Lambda(ell, m + 1)`, combined node by node.
    pub fn cut_term_joint_quadrature(
        &self,
        ell: usize,
        m: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<(T, QuadratureState<T>)> {
        self.require_joint_cut()?;
        let state = self.joint_row_state(ell, m, m, opts);
        if !state.converged {
            return Err(Error::ConvergenceFailure {
                what: "joint cut quadrature",
                iterations: state.refinements,
                best_estimate: state.current[0].as_f64(),
            });
        }
        Ok((state.current[0], state))
    }

    /// Quadrature for `P_cut(ell, m)` over `m_lo..=m_hi` sharing one node grid.
    fn joint_row_state(&self, ell: usize, m_lo: usize, m_hi: usize, opts: &QuadratureOptions<T>) -> QuadratureState<T> {
        let s = self.r_hi().sqrt();
        let scale = self.r_hi().powi(ell as i32).sqrt();
        integrate_weighted(self.joint_rule(), self.derived.b, m_hi - m_lo + 1, opts, |node, out| {
            let y = self.joint_decay(node);
            let kernel = s * Self::chebyshev_factor(node, ell + 1) - Self::chebyshev_factor(node, ell) * y;
            let mut v = scale * self.joint_weight(node) * kernel * y.powi(m_lo as i32);
            for slot in out.iter_mut() {
                *slot = v;
                v = v * y;
            }
        })
    }

    /// Scaled joint integral `J(ell, m)`.
    pub fn j_scl(&self, ell: usize, m: usize) -> Result<T> {
        self.require_joint_cut()?;
        Ok(ExactJoint::new(self, ell, m).j(ell as isize, m as isize).full)
    }

    /// The bracket multiplying `d_{ell+1}(alpha)` in `J(ell, m)`.
    pub fn j_scl_alpha_bracket(&self, ell: usize, m: usize) -> Result<T> {
        self.require_joint_cut()?;
        let ex = ExactJoint::new(self, ell, m);
        let j = ex.j(ell as isize, m as isize);
        Ok(j.alpha_part / self.derived.d_alpha(ell + 1))
    }

    /// Large-`ell` form `d_{ell+1}(beta) - ((ell+1)^m / m!) z^m d_{ell+1}(alpha)`.
    pub fn j_scl_asymptotic(&self, ell: usize, m: usize) -> Result<T> {
        self.require_joint_cut()?;
        let d = &self.derived;
        Ok(d.d_beta(ell + 1) - j_asymptotic_coefficient(ell, m, d.zq) * d.d_alpha(ell + 1))
    }

    /// Cut contribution to `P(ell, m)` from the Q-function sums.
    pub fn cut_term_joint_exact(&self, ell: usize, m: usize) -> Result<T> {
        self.require_joint_cut()?;
        Ok(ExactJoint::new(self, ell, m).entry(ell, m).1)
    }

    /// `P(ell, m)` with the default tolerance.
    pub fn joint_pmf(&self, ell: usize, m: usize, engine: Engine) -> Result<PmfResult<T>> {
        self.joint_pmf_with(ell, m, engine, &QuadratureOptions::default())
    }

    pub fn joint_pmf_with(
        &self,
        ell: usize,
        m: usize,
        engine: Engine,
        opts: &QuadratureOptions<T>,
    ) -> Result<PmfResult<T>> {
        if let Some(v) = self.joint_closed_form(ell, m) {
            return Ok(closed(v));
        }
        match self.resolve_joint_engine(engine, m)? {
            Engine::Quadrature => {
                let pole = self.pole_term_joint(ell, m);
                let (cut, st) = self.cut_term_joint_quadrature(ell, m, opts)?;
                Ok(PmfResult {
                    value: pole + cut,
                    pole_part: pole,
                    cut_part: cut,
                    method: Method::Quadrature,
                    refinements: st.refinements,
                    achieved_tol: st.achieved_tol,
                })
            }
            _ => {
                let (pole, cut, value) = ExactJoint::new(self, ell, m).entry(ell, m);
                Ok(exact(pole, cut, value))
            }
        }
    }

    fn resolve_joint_engine(&self, engine: Engine, m_max: usize) -> Result<Engine> {
        match engine {
            Engine::Asymptotic => Err(Error::domain("the joint PMF has no asymptotic engine; use j_scl_asymptotic")),
            Engine::Auto => {
                if self.derived.beta_m1.abs() < T::lit(RULE_SWITCH_THRESHOLD) || m_max > EXACT_M_BUDGET {
                    Ok(Engine::Quadrature)
                } else {
                    Ok(Engine::Exact)
                }
            }
            e => Ok(e),
        }
    }

    /// `P(ell, m)` over `0..=l_max x 0..=m_max`.
    pub fn joint_grid(
        &self,
        l_max: usize,
        m_max: usize,
        engine: Engine,
        opts: &QuadratureOptions<T>,
    ) -> Result<JointGridResult<T>> {
        let w = m_max + 1;
        if self.joint_closed_form(0, 0).is_some() {
            let entries = (0..(l_max + 1) * w).map(|i| closed(self.joint_closed_form(i / w, i % w).unwrap())).collect();
            return Ok(JointGridResult { l_max, m_max, params: self.params, method: Method::ClosedForm, entries });
        }
        let (method, entries) = match self.resolve_joint_engine(engine, m_max)? {
            Engine::Quadrature => {
                let rows: Vec<Result<Vec<PmfResult<T>>>> = (0..=l_max)
                    .into_par_iter()
                    .map(|ell| {
                        let st = self.joint_row_state(ell, 0, m_max, opts);
                        if !st.converged {
                            return Err(Error::ConvergenceFailure {
                                what: "joint cut quadrature",
                                iterations: st.refinements,
                                best_estimate: st.current[0].as_f64(),
                            });
                        }
                        Ok(st
                            .current
                            .iter()
                            .enumerate()
                            .map(|(m, &cut)| {
                                let pole = self.pole_term_joint(ell, m);
                                PmfResult {
                                    value: pole + cut,
                                    pole_part: pole,
                                    cut_part: cut,
                                    method: Method::Quadrature,
                                    refinements: st.refinements,
                                    achieved_tol: st.achieved_tol,
                                }
                            })
                            .collect())
                    })
                    .collect();
                let mut entries = Vec::with_capacity((l_max + 1) * w);
                for row in rows {
                    entries.extend(row?);
                }
                (Method::Quadrature, entries)
            }
            _ => {
                let ex = ExactJoint::new(self, l_max, m_max);
                let entries = (0..(l_max + 1) * w)
                    .into_par_iter()
                    .map(|i| {
                        let (pole, cut, value) = ex.entry(i / w, i % w);
                        exact(pole, cut, value)
                    })
                    .collect();
                (Method::Exact, entries)
            }
        };
        Ok(JointGridResult { l_max, m_max, params: self.params, method, entries })
    }

    /// `P(0..=l_max, m)` for one `m`, as needed by the ell-direction sums.
    pub fn joint_column(&self, l_max: usize, m: usize, engine: Engine, opts: &QuadratureOptions<T>) -> Result<Vec<T>> {
        let grid = self.joint_grid(l_max, m, engine, opts)?;
        Ok((0..=l_max).map(|ell| grid.value(ell, m)).collect())
    }
}

/// `(ell + 1)^m z^m / m!`, accumulated as a product to stay finite.
pub fn j_asymptotic_coefficient<T: Real>(ell: usize, m: usize, z: T) -> T {
    let base = T::of(ell + 1) * z;
    (1..=m).fold(T::one(), |acc, k| acc * base / T::of(k))
}

fn closed<T: Real>(v: T) -> PmfResult<T> {
    PmfResult {
        value: v,
        pole_part: v,
        cut_part: T::zero(),
        method: Method::ClosedForm,
        refinements: 0,
        achieved_tol: T::zero(),
    }
}

fn exact<T: Real>(pole: T, cut: T, value: T) -> PmfResult<T> {
    PmfResult { value, pole_part: pole, cut_part: cut, method: Method::Exact, refinements: 0, achieved_tol: T::zero() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(r: f64, nu: f64) -> TwoLevelModel<f64> {
        TwoLevelModel::<f64>::from_r_nu(r, nu).unwrap()
    }

    fn opts() -> QuadratureOptions<f64> {
        QuadratureOptions::default()
    }

    #[test]
    fn pole_term_examples() {
        let m = model(0.9, 0.5);
        assert!((m.pole_term_joint(1, 1) - 0.02).abs() < 1e-15);
        assert_eq!(model(0.9, 0.95).pole_term_joint(2, 3), 0.0);
        for (ell, mm) in [(0, 0), (1, 4), (7, 2), (30, 30)] {
            let a = m.pole_term_joint(ell, mm);
            let b = m.pole_term_joint_dform(ell, mm);
            assert!((a - b).abs() <= 1e-12 * a, "({ell},{mm}): {a} vs {b}");
        }
        // The d-form vanishes on its own when the pole is inactive.
        assert!(model(0.9, 0.95).pole_term_joint_dform(3, 2).abs() < 1e-16);
    }

    #[test]
    fn degenerate_joints() {
        assert!((model(0.5, 1.0).joint_pmf(2, 0, Engine::Exact).unwrap().value - 0.125).abs() < 1e-16);
        assert_eq!(model(0.5, 1.0).joint_pmf(2, 1, Engine::Exact).unwrap().value, 0.0);
        assert!((model(0.5, 0.0).joint_pmf(0, 3, Engine::Exact).unwrap().value - 0.0625).abs() < 1e-16);
        assert_eq!(model(0.5, 0.0).joint_pmf(1, 3, Engine::Exact).unwrap().value, 0.0);
        assert!(model(0.5, 0.5).joint_pmf(1, 1, Engine::Asymptotic).is_err());
    }

    #[test]
    fn origin_is_one_minus_r() {
        for (r, nu) in [(0.9, 0.5), (0.5, 0.5), (0.9, 0.95), (0.3, 0.1)] {
            let m = model(r, nu);
            for engine in [Engine::Exact, Engine::Quadrature] {
                let v = m.joint_pmf(0, 0, engine).unwrap();
                assert!((v.value - (1.0 - r)).abs() < 1e-13, "{r} {nu} {engine:?}: {}", v.value);
                let min = (m.r_hi() / (r * r)).min(1.0);
                assert!((v.cut_part - (1.0 - r) * min).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_identities() {
        let m = model(0.9, 0.5);
        assert_eq!(m.lambda_quadrature(0, 3, &opts()).unwrap(), 0.0);
        let cuts = m.cut_terms_quadrature(20, &opts()).unwrap().0;
        for mm in [0usize, 5, 20] {
            let lam = m.lambda_quadrature(1, mm + 1, &opts()).unwrap();
            let want = m.r_lo() * cuts[mm];
            assert!((lam - want).abs() <= 1e-11 * want, "m={mm}");
        }
    }

    #[test]
    fn j_scl_at_m_zero() {
        let m = model(0.9, 0.5);
        let d = m.derived;
        for ell in [0usize, 1, 10, 50] {
            let j = m.j_scl(ell, 0).unwrap();
            let want = d.d_beta(ell + 1) - d.d_alpha(ell + 1);
            assert!((j - want).abs() <= 1e-12 * want, "ell={ell}");
            let a = m.j_scl_asymptotic(ell, 0).unwrap();
            assert!((a - want).abs() <= 1e-14 * want);
        }
    }

    #[test]
    fn engines_agree_on_a_grid() {
        let m = model(0.9, 0.5);
        let q = m.joint_grid(12, 12, Engine::Quadrature, &opts()).unwrap();
        let e = m.joint_grid(12, 12, Engine::Exact, &opts()).unwrap();
        for (idx, a) in q.iter() {
            let b = e.get(idx.ell, idx.m);
            assert!((a.value.ln() - b.value.ln()).abs() < 1e-10, "{idx:?}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn single_entries_match_the_grid() {
        let m = model(0.5, 0.3);
        let g = m.joint_grid(5, 5, Engine::Exact, &opts()).unwrap();
        let v = m.joint_pmf(3, 4, Engine::Exact).unwrap();
        assert!((v.value - g.value(3, 4)).abs() <= 1e-15 * v.value);
        let v = m.joint_pmf(3, 4, Engine::Quadrature).unwrap();
        assert!((v.value - g.value(3, 4)).abs() <= 1e-11 * v.value);
    }

    #[test]
    fn exclusively_high_row() {
        let m = model(0.9, 0.5);
        let z0 = m.zeta_minus_at_zero();
        let g = m.joint_grid(40, 0, Engine::Exact, &opts()).unwrap();
        for ell in 0..=40 {
            let want = 0.1 * z0.powi(ell as i32);
            assert!((g.value(ell, 0) - want).abs() <= 1e-13 * want, "ell={ell}");
        }
    }
}
