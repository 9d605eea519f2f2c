//! Wait-conditional waiting-time density of the low-priority class.
//!
//! Time is measured in units of `c mu`. The density splits like the queue-length marginal:
//! an exponential pole term, present when `r^2 > r_hi`, plus a cut integral over `u in (0, 1)`
//! that the Gauss-Chebyshev driver handles after `u = cos^2(pi tau / 2)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::{Method, PmfResult};
use crate::model::{TwoLevelModel, TwoLevelParams};
use crate::quadrature::{integrate_weighted_checked, QuadratureOptions, Rule};
use crate::scalar::Real;

/// Largest Laguerre order the forward recurrence is trusted for.
pub const LAGUERRE_MAX_ORDER: usize = 500;
/// Largest `r_lo t` accepted by [`waiting_pdf_laguerre`].
pub const LAGUERRE_MAX_ARGUMENT: f64 = 700.0;

/// Exponential decay rates of the two parts of the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates<T> {
    /// `r_lo (1 - r) / r`, or `None` when the pole is inactive.
    pub pole: Option<T>,
    /// `(1 - sqrt(r_hi))^2`, the rate of the cut envelope.
    pub cut: T,
}

impl<T: Real> TwoLevelModel<T> {
    fn exponential_wait(&self) -> bool {
        self.derived.no_high || self.r() == T::zero()
    }

    /// Decay rates bounding the tail of [`waiting_pdf`](Self::waiting_pdf).
    pub fn waiting_decay_rates(&self) -> DecayRates<T> {
        let r = self.r();
        let one = T::one();
        if self.exponential_wait() {
            return DecayRates { pole: Some(one - r), cut: T::infinity() };
        }
        let s = self.r_hi().sqrt();
        let pole = self.derived.pole_active.then(|| self.r_lo() * (one - r) / r);
        DecayRates { pole, cut: (one - s) * (one - s) }
    }

    /// Pole part of the density at scaled time `t`.
    pub fn waiting_pole_term(&self, t: T) -> T {
        let r = self.r();
        let one = T::one();
        if self.exponential_wait() {
            return (one - r) * (-(one - r) * t).exp();
        }
        if !self.derived.pole_active {
            return T::zero();
        }
        let s = self.r_hi().sqrt();
        // -(1 - r)(r_hi/r^2 - 1) = (1 - r)(r - s)(r + s)/r^2
        (one - r) * (r - s) * (r + s) / (r * r) * (-t * self.r_lo() * (one - r) / r).exp()
    }

    /// Cut part of the density at scaled time `t`.
    pub fn waiting_cut_term(&self, t: T, opts: &QuadratureOptions<T>) -> Result<(T, usize, T)> {
        if self.exponential_wait() {
            return Ok((T::zero(), 0, T::zero()));
        }
        let d = self.derived;
        let r = self.r();
        let s = self.r_hi().sqrt();
        let one = T::one();
        let four_ts = T::lit(4.0) * t * s;
        let pi = T::PI();
        let rule = Rule::select(d.beta_m1);
        let state = integrate_weighted_checked("waiting-time cut integral", rule, d.b, 1, opts, |node, out| {
            out[0] = pi * node.one_minus_u * (-four_ts * node.u).exp();
        })?;
        let pref = T::lit(2.0) * (one - r) * s / (pi * r) * (-t * (one - s) * (one - s)).exp();
        Ok((pref * state.current[0], state.refinements, state.achieved_tol))
    }

    /// Wait-conditional waiting-time density at scaled time `t >= 0`.
    pub fn waiting_pdf(&self, t: T, opts: &QuadratureOptions<T>) -> Result<PmfResult<T>> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::domain(format!("waiting time must be finite and non-negative, got {t}")));
        }
        let pole = self.waiting_pole_term(t);
        if self.exponential_wait() {
            return Ok(PmfResult {
                value: pole,
                pole_part: pole,
                cut_part: T::zero(),
                method: Method::ClosedForm,
                refinements: 0,
                achieved_tol: T::zero(),
            });
        }
        let (cut, refinements, achieved_tol) = self.waiting_cut_term(t, opts)?;
        Ok(PmfResult {
            value: pole + cut,
            pole_part: pole,
            cut_part: cut,
            method: Method::Quadrature,
            refinements,
            achieved_tol,
        })
    }

    /// Density over a grid of times, evaluated in parallel.
    pub fn waiting_pdf_grid(&self, ts: &[T], opts: &QuadratureOptions<T>) -> Result<Vec<T>> {
        ts.par_iter().map(|&t| self.waiting_pdf(t, opts).map(|p| p.value)).collect()
    }

    /// Laguerre coefficients `gamma_0..=gamma_N` of the density in the variable `r_lo t`.
    ///
    /// The cut part is a single vector-valued quadrature; the alternating binomial sums of the
    /// marginal that define the same numbers lose all accuracy quickly and are not used.
    pub fn laguerre_coeffs(&self, order: usize, opts: &QuadratureOptions<T>) -> Result<LaguerreCoeffs<T>> {
        let d = self.derived;
        if !d.has_cut() {
            return Err(Error::domain("Laguerre coefficients need r_hi > 0 and r_lo > 0"));
        }
        if order > LAGUERRE_MAX_ORDER {
            return Err(Error::domain(format!("Laguerre order {order} exceeds {LAGUERRE_MAX_ORDER}")));
        }
        let r = self.r();
        let one = T::one();
        let pi = T::PI();
        let state = integrate_weighted_checked(
            "Laguerre coefficients",
            Rule::select(d.beta_m1),
            d.b,
            order + 1,
            opts,
            |node, out| {
                let inv_a = one / (node.u + d.a);
                // (u + c_L)/(u + a) <= 1 since c_L <= a.
                let rho = (node.u + d.c_l) * inv_a;
                let mut term = pi * node.one_minus_u * inv_a;
                for slot in out.iter_mut() {
                    *slot = term;
                    term = term * rho;
                }
            },
        )?;
        let cut_scale = (one - r) / (T::lit(2.0) * pi * r);
        let s = self.r_hi().sqrt();
        let pole_scale = if d.pole_active { (r - s) * (r + s) / (self.r_lo() * r) } else { T::zero() };
        let mut pow = one;
        let gamma = state
            .current
            .iter()
            .map(|&c| {
                pow = pow * (one - r);
                pole_scale * pow + cut_scale * c
            })
            .collect();
        Ok(LaguerreCoeffs { gamma, params: self.params })
    }
}

/// Laguerre coefficients of the waiting-time density.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreCoeffs<T> {
    pub gamma: Vec<T>,
    pub params: TwoLevelParams<T>,
}

impl<T: Real> LaguerreCoeffs<T> {
    pub fn order(&self) -> usize {
        self.gamma.len().saturating_sub(1)
    }

    /// `sum gamma_n^2`, the squared L2 norm of the truncated series; bounded by 1.
    pub fn l2_norm_sq(&self) -> T {
        self.gamma.iter().fold(T::zero(), |acc, &g| acc + g * g)
    }
}

/// `r_lo sum_n gamma_n L_n(r_lo t)`.
///
/// The series converges in L2, so a truncated pointwise value is only an approximation.
pub fn waiting_pdf_laguerre<T: Real>(t: T, coeffs: &LaguerreCoeffs<T>) -> Result<T> {
    let r_lo = coeffs.params.r_lo();
    let x = r_lo * t;
    if !(t >= T::zero()) {
        return Err(Error::domain(format!("waiting time must be non-negative, got {t}")));
    }
    if coeffs.order() > LAGUERRE_MAX_ORDER || x > T::lit(LAGUERRE_MAX_ARGUMENT) {
        return Err(Error::domain(format!(
            "Laguerre evaluation limited to order {LAGUERRE_MAX_ORDER} and r_lo t <= {LAGUERRE_MAX_ARGUMENT}"
        )));
    }
    let mut sum = T::zero();
    let (mut prev, mut cur) = (T::zero(), T::one());
    for (n, &g) in coeffs.gamma.iter().enumerate() {
        sum = sum + g * cur;
        let nf = T::of(n);
        let next = ((T::lit(2.0) * nf + T::one() - x) * cur - nf * prev) / (nf + T::one());
        prev = cur;
        cur = next;
    }
    Ok(r_lo * sum)
}

/// Class intensities `r_1..r_K` of a multi-level priority queue, highest priority first.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelParams<T> {
    levels: Vec<T>,
    sigma: Vec<T>,
}

impl<T: Real> MultiLevelParams<T> {
    pub fn new(levels: Vec<T>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("at least one priority level is required"));
        }
        if levels.iter().any(|r| !(*r >= T::zero())) {
            return Err(Error::domain("level intensities must be non-negative"));
        }
        let mut acc = T::zero();
        let sigma: Vec<T> = levels
            .iter()
            .map(|&r| {
                acc = acc + r;
                acc
            })
            .collect();
        if !(acc < T::one()) {
            return Err(Error::ErgodicityViolation { r: acc.as_f64() });
        }
        Ok(Self { levels, sigma })
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    /// `sigma_kappa`, the intensity of levels `1..=kappa`; `sigma_0 = 0`.
    pub fn sigma(&self, kappa: usize) -> T {
        if kappa == 0 {
            T::zero()
        } else {
            self.sigma[kappa - 1]
        }
    }

    /// Total intensity `sigma_K`.
    pub fn r_agg(&self) -> T {
        *self.sigma.last().expect("non-empty")
    }

    /// Two-level problem seen by level `kappa`: `r_lo = r_kappa`, `r_hi = sigma_{kappa-1}`.
    pub fn effective(&self, kappa: usize) -> Result<TwoLevelModel<T>> {
        if kappa == 0 || kappa > self.levels.len() {
            return Err(Error::domain(format!("level {kappa} outside 1..={}", self.levels.len())));
        }
        let params = TwoLevelParams::from_intensities(self.sigma(kappa - 1), self.levels[kappa - 1])?;
        Ok(TwoLevelModel::new(params))
    }
}

/// Waiting-time density of level `kappa` through its effective two-level problem.
pub fn multilevel_waiting_pdf<T: Real>(
    levels: &MultiLevelParams<T>,
    kappa: usize,
    t: T,
    opts: &QuadratureOptions<T>,
) -> Result<PmfResult<T>> {
    levels.effective(kappa)?.waiting_pdf(t, opts)
}
