//! Scaled Legendre polynomials, scaled Q-functions and the `d_ell` factors.
//!
//! With `chi = t / z`, the scaled sequences are `P^_n = z^n P_n(chi)` and
//! `Q^_m^ell = z^m Q_m^ell(chi)`. Scaling keeps every entry bounded when `chi` is large.

use crate::error::{Error, Result};
use crate::model::DerivedParams;
use crate::scalar::Real;

/// A scaled polynomial sequence, `P^_{-1..=K}` or `Q^_{0..=K}^ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPolySeq<T> {
    pub t: T,
    pub z: T,
    /// Order for Q-functions; `None` for the Legendre sequence.
    pub ell: Option<usize>,
    first: isize,
    values: Vec<T>,
}

impl<T: Real> ScaledPolySeq<T> {
    /// Entry of index `k`; panics outside the computed range.
    pub fn get(&self, k: isize) -> T {
        self.values[(k - self.first) as usize]
    }

    /// Lowest stored index (`-1` for Legendre, `0` for Q).
    pub fn first_index(&self) -> isize {
        self.first
    }

    /// Highest stored index `K`.
    pub fn last_index(&self) -> isize {
        self.first + self.values.len() as isize - 1
    }

    /// Entries with index `0..=K`.
    pub fn from_zero(&self) -> &[T] {
        &self.values[(-self.first) as usize..]
    }

    /// `sum_{k=0}^{K} entry_k`.
    pub fn partial_sum(&self, upto: usize) -> T {
        self.from_zero()[..=upto].iter().fold(T::zero(), |acc, &v| acc + v)
    }
}

/// `P^_n = (2 - 1/n) t P^_{n-1} - (1 - 1/n) z^2 P^_{n-2}` from `P^_{-1} = 1/z`, `P^_0 = 1`.
pub fn scaled_legendre<T: Real>(t: T, z: T, k_max: usize) -> Result<ScaledPolySeq<T>> {
    if z == T::zero() {
        return Err(Error::domain("scaled Legendre sequence needs z != 0"));
    }
    if !(z.abs() < T::one()) {
        return Err(Error::domain(format!("scaled Legendre sequence needs |z| < 1, got {z}")));
    }
    let mut values = Vec::with_capacity(k_max + 2);
    values.push(T::one() / z);
    values.push(T::one());
    let z2 = z * z;
    for n in 1..=k_max {
        let nf = T::of(n);
        let next = (T::lit(2.0) - nf.recip()) * t * values[n] - (T::one() - nf.recip()) * z2 * values[n - 1];
        values.push(next);
    }
    Ok(ScaledPolySeq { t, z, ell: None, first: -1, values })
}

/// Streams `Q^_m^ell` for `m = 0, 1, 2, ...` without storing them.
#[derive(Debug, Clone)]
pub struct ScaledQIter<T> {
    t: T,
    z: T,
    ellf: T,
    m: usize,
    prev: T,
    cur: T,
}

impl<T: Real> ScaledQIter<T> {
    pub fn new(t: T, z: T, ell: usize) -> Self {
        Self { t, z, ellf: T::of(ell), m: 0, prev: T::nan(), cur: T::one() }
    }
}

/// `Q^_{m+1} = A_m Q^_m - B_m^ell Q^_{m-1}` with `A_m = t(2m+1)/(m+1)` and
/// `B_m^ell = z^2 (m^2 - ell^2)/(m(m+1))`.
fn q_step<T: Real>(t: T, z: T, ellf: T, m: usize, cur: T, prev: T) -> T {
    let mf = T::of(m);
    let a = t * (T::lit(2.0) * mf + T::one()) / (mf + T::one());
    let b = z * z * ((mf - ellf) * (mf + ellf)) / (mf * (mf + T::one()));
    a * cur - b * prev
}

impl<T: Real> Iterator for ScaledQIter<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        let out = self.cur;
        let next = if self.m == 0 {
            self.t + self.ellf * self.z
        } else {
            q_step(self.t, self.z, self.ellf, self.m, self.cur, self.prev)
        };
        self.prev = self.cur;
        self.cur = next;
        self.m += 1;
        Some(out)
    }
}

/// Scaled Q-functions `Q^_0..=K^ell`, seeded by `Q^_0 = 1` and `Q^_1 = t + ell z`.
pub fn scaled_q<T: Real>(t: T, z: T, ell: usize, k_max: usize) -> ScaledPolySeq<T> {
    let values: Vec<T> = ScaledQIter::new(t, z, ell).take(k_max + 1).collect();
    ScaledPolySeq { t, z, ell: Some(ell), first: 0, values }
}

/// A `d_ell(gamma) = (gamma - sqrt(gamma^2 - 1))^ell` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DFactor<T> {
    pub gamma_arg: T,
    pub ell: usize,
    pub value: T,
}

/// `d_ell(gamma)`, evaluated as `exp(-ell acosh(gamma))` with `acosh` taken from `gamma - 1`
/// so that `gamma` close to 1 keeps full accuracy.
pub fn d_factor<T: Real>(gamma: T, ell: usize) -> Result<DFactor<T>> {
    if !(gamma >= T::one()) {
        return Err(Error::domain(format!("d-factor needs gamma >= 1, got {gamma}")));
    }
    Ok(DFactor { gamma_arg: gamma, ell, value: d_factor_from_excess(gamma - T::one(), ell) })
}

/// `d_ell(1 + excess)`.
pub fn d_factor_from_excess<T: Real>(excess: T, ell: usize) -> T {
    if ell == 0 {
        return T::one();
    }
    if excess == T::infinity() {
        return T::zero();
    }
    let acosh = (excess + (excess * (excess + T::lit(2.0))).sqrt()).ln_1p();
    (-T::of(ell) * acosh).exp()
}

impl<T: Real> DerivedParams<T> {
    /// `d_ell(alpha)`.
    pub fn d_alpha(&self, ell: usize) -> T {
        d_factor_from_excess(self.alpha_m1, ell)
    }

    /// `d_ell(beta)`; exactly 1 at the critical point.
    pub fn d_beta(&self, ell: usize) -> T {
        d_factor_from_excess(self.beta_m1, ell)
    }
}

/// `|sqrt(D) sum_{k<=K} Q^_k^ell - d_ell(beta)/d_ell(alpha)|`.
pub fn q_partial_sum_identity_check<T: Real>(derived: &DerivedParams<T>, ell: usize, k_max: usize) -> T {
    let seq = scaled_q(derived.tq, derived.zq, ell, k_max);
    let sum = seq.partial_sum(k_max);
    let target = (T::of(ell) * (derived.alpha_m1.acosh_excess() - derived.beta_m1.acosh_excess())).exp();
    (derived.sqrt_d * sum - target).abs()
}

trait AcoshExcess {
    fn acosh_excess(self) -> Self;
}

impl<T: Real> AcoshExcess for T {
    /// `acosh(1 + self)`.
    fn acosh_excess(self) -> T {
        (self + (self * (self + T::lit(2.0))).sqrt()).ln_1p()
    }
}
