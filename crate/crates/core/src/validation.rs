//! Measures of performance: decimal places of agreement between two PMFs.
//!
//! `Xi = -max_n log10 |ln a_n - ln b_n|`, taken over the indices where both values exceed
//! `p_lim`, and capped at 16. Four comparisons are provided: two marginal engines against
//! each other, and the joint engine against three exact identities (aggregation over levels,
//! exclusively-high and exclusively-low states).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::Engine;
use crate::model::{TwoLevelModel, TwoLevelParams};
use crate::oracle::{marginal_coeffs, OracleConfig};
use crate::quadrature::QuadratureOptions;
use crate::scalar::Real;

/// Upper cap of a measure.
pub const MOP_CAP: f64 = 16.0;
pub const DEFAULT_N_LIM: usize = 400;
pub const DEFAULT_P_LIM: f64 = 1e-12;
pub const DEFAULT_P_LIM_AGGREGATION: f64 = 1e-9;

/// Which comparison a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MopKind {
    Pairwise,
    Aggregation,
    Xhi,
    Xlo,
}

impl MopKind {
    pub fn name(self) -> &'static str {
        match self {
            MopKind::Pairwise => "pairwise",
            MopKind::Aggregation => "aggregation",
            MopKind::Xhi => "xhi",
            MopKind::Xlo => "xlo",
        }
    }
}

/// Where a marginal sequence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginalSource {
    Engine(Engine),
    /// Coefficients of the closed-form generating function on a circle.
    Oracle,
}

impl MarginalSource {
    pub fn name(self) -> &'static str {
        match self {
            MarginalSource::Engine(Engine::Quadrature) => "quadrature",
            MarginalSource::Engine(Engine::Exact) => "exact",
            MarginalSource::Engine(Engine::Asymptotic) => "asymptotic",
            MarginalSource::Engine(Engine::Auto) => "auto",
            MarginalSource::Oracle => "oracle",
        }
    }
}

/// One measure of performance.
#[derive(Debug, Clone, PartialEq)]
pub struct MopReport<T> {
    pub kind: MopKind,
    /// Decimal places of agreement, at most 16.
    pub value: f64,
    pub p_lim: f64,
    pub n_lim: usize,
    /// Largest index that entered the comparison.
    pub n_max_sampled: usize,
    pub params: TwoLevelParams<T>,
    /// The two sides compared, e.g. `("exact", "reference")`.
    pub methods: (String, String),
}

/// `(Xi, n_max_sampled)` over the indices where both sequences exceed `p_lim`.
pub fn decimal_places<T: Real>(a: &[T], b: &[T], p_lim: f64) -> Result<(f64, usize)> {
    let mut worst = 0.0f64;
    let mut last = None;
    for (n, (&x, &y)) in a.iter().zip(b).enumerate() {
        let (x, y) = (x.as_f64(), y.as_f64());
        if !(x.min(y) > p_lim) {
            continue;
        }
        worst = worst.max((x.ln() - y.ln()).abs());
        last = Some(n);
    }
    let n = last.ok_or(Error::EmptyComparison { p_lim })?;
    let value = if worst == 0.0 { MOP_CAP } else { (-worst.log10()).min(MOP_CAP) };
    Ok((value, n))
}

/// Largest `k <= n_lim` with `head ratio^k > p_lim`, give or take one; `None` when even
/// `k = 0` fails.
fn geometric_cutoff(head: f64, ratio: f64, p_lim: f64, n_lim: usize) -> Option<usize> {
    if !(head > p_lim) {
        return None;
    }
    if ratio <= 0.0 {
        return Some(0);
    }
    let k = ((p_lim / head).ln() / ratio.ln()).ceil() as usize;
    Some(k.min(n_lim))
}

impl<T: Real> TwoLevelModel<T> {
    /// `p_lo(0..=n_max)` from `source`.
    pub fn marginal_sequence(
        &self,
        source: MarginalSource,
        n_max: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<Vec<T>> {
        match source {
            MarginalSource::Engine(engine) => {
                Ok(self.p_lo_sequence(n_max, engine, opts)?.into_iter().map(|p| p.value).collect())
            }
            MarginalSource::Oracle => Ok(marginal_coeffs(self, &OracleConfig::adaptive(self, n_max), n_max)?.values),
        }
    }

    fn report(
        &self,
        kind: MopKind,
        (value, n): (f64, usize),
        p_lim: f64,
        n_lim: usize,
        a: &str,
        b: &str,
    ) -> MopReport<T> {
        MopReport {
            kind,
            value,
            p_lim,
            n_lim,
            n_max_sampled: n,
            params: self.params,
            methods: (a.to_owned(), b.to_owned()),
        }
    }

    /// Agreement of two marginal sources over `p_lo(0..=n_lim)`.
    pub fn mop_pairwise(
        &self,
        a: MarginalSource,
        b: MarginalSource,
        p_lim: f64,
        n_lim: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<MopReport<T>> {
        let (sa, sb) =
            rayon::join(|| self.marginal_sequence(a, n_lim, opts), || self.marginal_sequence(b, n_lim, opts));
        let xi = decimal_places(&sa?, &sb?, p_lim)?;
        Ok(self.report(MopKind::Pairwise, xi, p_lim, n_lim, a.name(), b.name()))
    }

    /// `P_agg(k) = sum_m P(k - m, m)` against `(1 - r) r^k`.
    pub fn mop_aggregation(
        &self,
        engine: Engine,
        p_lim: f64,
        n_lim: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<MopReport<T>> {
        let r = self.r();
        let k_max =
            geometric_cutoff(1.0 - r.as_f64(), r.as_f64(), p_lim, n_lim).ok_or(Error::EmptyComparison { p_lim })?;
        let grid = self.joint_grid(k_max, k_max, engine, opts)?;
        let agg: Vec<T> = (0..=k_max).map(|k| (0..=k).fold(T::zero(), |acc, m| acc + grid.value(k - m, m))).collect();
        let reference: Vec<T> = (0..=k_max).map(|k| (T::one() - r) * r.powi(k as i32)).collect();
        let xi = decimal_places(&agg, &reference, p_lim)?;
        Ok(self.report(MopKind::Aggregation, xi, p_lim, n_lim, grid.method.name(), "geometric"))
    }

    /// `P(ell, 0)` against `(1 - r) zeta_minus(0)^ell`.
    pub fn mop_xhi(
        &self,
        engine: Engine,
        p_lim: f64,
        n_lim: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<MopReport<T>> {
        let zeta = self.zeta_minus_at_zero();
        let l_max = geometric_cutoff(1.0 - self.r().as_f64(), zeta.as_f64(), p_lim, n_lim)
            .ok_or(Error::EmptyComparison { p_lim })?;
        let grid = self.joint_grid(l_max, 0, engine, opts)?;
        let column: Vec<T> = (0..=l_max).map(|ell| grid.value(ell, 0)).collect();
        let reference: Vec<T> = (0..=l_max).map(|ell| (T::one() - self.r()) * zeta.powi(ell as i32)).collect();
        let xi = decimal_places(&column, &reference, p_lim)?;
        Ok(self.report(MopKind::Xhi, xi, p_lim, n_lim, grid.method.name(), "zeta-power"))
    }

    /// `P(0, m)` against `r_lo p_lo(m - 1)` for `1 <= m <= n_lim`.
    pub fn mop_xlo(
        &self,
        joint_engine: Engine,
        marginal: MarginalSource,
        p_lim: f64,
        n_lim: usize,
        opts: &QuadratureOptions<T>,
    ) -> Result<MopReport<T>> {
        if n_lim == 0 {
            return Err(Error::EmptyComparison { p_lim });
        }
        let (grid, marg) = rayon::join(
            || self.joint_grid(0, n_lim, joint_engine, opts),
            || self.marginal_sequence(marginal, n_lim - 1, opts),
        );
        let grid = grid?;
        let row: Vec<T> = (1..=n_lim).map(|m| grid.value(0, m)).collect();
        let reference: Vec<T> = marg?.into_iter().map(|p| self.r_lo() * p).collect();
        let (value, n) = decimal_places(&row, &reference, p_lim)?;
        let label = format!("r_lo x {}", marginal.name());
        Ok(self.report(MopKind::Xlo, (value, n + 1), p_lim, n_lim, grid.method.name(), &label))
    }
}

/// The high-priority fractions of a sweep at total intensity `r`: 37 evenly spaced points
/// from 0.025 to 0.975 plus the critical point `nu = r`, sorted.
pub fn nu_grid<T: Real>(r: T) -> Vec<T> {
    let mut grid: Vec<T> = (0..37).map(|i| T::lit(0.025 + 0.95 * i as f64 / 36.0)).collect();
    // A grid point that is the critical point up to rounding is replaced by it.
    grid.retain(|nu| (*nu - r).abs() > T::lit(1e-12));
    grid.push(r);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid
}

/// Runs `f` at every point of [`nu_grid`] in parallel.
pub fn sweep<T, F>(r: T, f: F) -> Vec<(T, Result<MopReport<T>>)>
where
    T: Real,
    F: Fn(&TwoLevelModel<T>) -> Result<MopReport<T>> + Sync,
{
    sweep_points(r, &nu_grid(r), f)
}

/// Runs `f` at the given fractions in parallel, keeping their order.
pub fn sweep_points<T, F>(r: T, nus: &[T], f: F) -> Vec<(T, Result<MopReport<T>>)>
where
    T: Real,
    F: Fn(&TwoLevelModel<T>) -> Result<MopReport<T>> + Sync,
{
    nus.par_iter().map(|&nu| (nu, TwoLevelModel::from_r_nu(r, nu).and_then(|m| f(&m)))).collect()
}
