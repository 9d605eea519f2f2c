//! Reference coefficients by Cauchy's integral on a circle.
//!
//! `p_n = eta^{-n} (1/N) sum_j g(eta w^j) w^{-jn}`, `w = exp(2 pi i / N)`, applied to the
//! closed-form generating functions. Nothing here touches the pole/cut machinery.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TwoLevelModel;
use crate::scalar::{sin_pi_ratio, Real};

/// Sampling circle and resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig<T> {
    /// Circle radius `eta`, strictly inside the disc of analyticity.
    pub radius: T,
    /// Sample count `N`, a power of two.
    pub samples: usize,
    /// Largest accepted imaginary residue relative to the largest coefficient.
    pub target_rel_error: T,
}

/// Coefficients with their quality metric.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCoeffs<T> {
    pub values: Vec<T>,
    /// `max_n |Im p_n| / max_n |p_n|`.
    pub imag_residue: T,
    pub config: OracleConfig<T>,
}

impl<T: Real> OracleConfig<T> {
    /// Distance to the nearest singularity: the pole `1/r` or the cut endpoint `x_minus`.
    pub fn singularity_radius(model: &TwoLevelModel<T>) -> T {
        let r = model.r();
        let mut rad = if r > T::zero() { T::one() / r } else { T::infinity() };
        if model.derived.has_cut() {
            rad = rad.min(model.derived.x_minus);
        }
        rad
    }

    /// `eta = 0.95 min(1/r, x_minus)`; `N` covers `2 n_max` and is at least 1024, which puts
    /// the aliasing factor `0.95^N` near `1e-23`.
    pub fn standard(model: &TwoLevelModel<T>, n_max: usize) -> Self {
        let rad = Self::singularity_radius(model);
        let radius = if rad.is_finite() { T::lit(0.95) * rad } else { T::one() };
        Self { radius, samples: (2 * n_max + 2).next_power_of_two().max(1024), target_rel_error: T::lit(1e-12) }
    }

    /// A circle hugging the singularity, `eta = (1 - 2/n_max) R`, for relative accuracy out to
    /// `n_max`: rounding is amplified by `(R/eta)^n <= e^2` instead of `0.95^{-n}`. The sample
    /// count keeps the aliasing factor `(eta/R)^N` below `e^{-40}`.
    pub fn adaptive(model: &TwoLevelModel<T>, n_max: usize) -> Self {
        let rad = Self::singularity_radius(model);
        if !rad.is_finite() {
            return Self::standard(model, n_max);
        }
        let delta = (2.0 / n_max.max(40) as f64).min(0.05);
        let samples = ((40.0 / delta).ceil() as usize).max(2 * n_max + 2).next_power_of_two();
        Self { radius: T::lit(1.0 - delta) * rad, samples, target_rel_error: T::lit(1e-12) }
    }

    fn validate(&self, model: &TwoLevelModel<T>, n_max: usize) -> Result<()> {
        if !self.samples.is_power_of_two() || self.samples < 2 * n_max + 1 {
            return Err(Error::domain(format!(
                "oracle needs a power-of-two sample count >= {}, got {}",
                2 * n_max + 1,
                self.samples
            )));
        }
        let rad = Self::singularity_radius(model);
        if !(self.radius > T::zero() && self.radius < rad) {
            return Err(Error::domain(format!("oracle radius {} outside (0, {rad})", self.radius)));
        }
        Ok(())
    }
}

/// `exp(-2 pi i k / N)` for `k < N`, each from an exactly reduced phase.
fn twiddles<T: Real>(n: usize) -> Vec<Complex<T>> {
    let nn = n as u64;
    (0..nn)
        .map(|k| {
            let c: T = sin_pi_ratio(2 * k + nn / 2, nn);
            let s: T = sin_pi_ratio(2 * k, nn);
            Complex::new(c, -s)
        })
        .collect()
}

fn extract<T, G>(config: &OracleConfig<T>, n_max: usize, g: G) -> Result<OracleCoeffs<T>>
where
    T: Real,
    G: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
{
    let n = config.samples;
    let tw = twiddles::<T>(n);
    let samples: Vec<Complex<T>> =
        (0..n).into_par_iter().map(|j| g(tw[(n - j) % n] * config.radius)).collect::<Result<_>>()?;
    let inv_n = T::one() / T::of(n);
    let raw: Vec<Complex<T>> = (0..=n_max)
        .into_par_iter()
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, s) in samples.iter().enumerate() {
                acc = acc + *s * tw[(j * k) % n];
            }
            acc * inv_n * config.radius.powi(-(k as i32))
        })
        .collect();
    let max_re = raw.iter().fold(T::zero(), |m, c| m.max(c.re.abs()));
    let max_im = raw.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
    let imag_residue = if max_re > T::zero() { max_im / max_re } else { max_im };
    Ok(OracleCoeffs { values: raw.into_iter().map(|c| c.re).collect(), imag_residue, config: *config })
}

/// Low-priority marginal `p_0..=p_{n_max}` from `g_lo`.
pub fn marginal_coeffs<T: Real>(
    model: &TwoLevelModel<T>,
    config: &OracleConfig<T>,
    n_max: usize,
) -> Result<OracleCoeffs<T>> {
    config.validate(model, n_max)?;
    extract(config, n_max, |p| model.g_lo(p))
}

/// Joint row `P(ell, 0..=m_max)` from `g_ell`.
pub fn joint_coeffs<T: Real>(
    model: &TwoLevelModel<T>,
    config: &OracleConfig<T>,
    ell: usize,
    m_max: usize,
) -> Result<OracleCoeffs<T>> {
    config.validate(model, m_max)?;
    extract(config, m_max, |p| model.g_ell(ell, p))
}
