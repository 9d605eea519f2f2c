//! Model parameters, cut/pole geometry, and the closed-form generating functions.
//!
//! The wait-conditional PGF of the low-priority queue is
//! `g_lo(z) = (1 - r) / (zeta_plus(z) - r)`, where `zeta_plus`, `zeta_minus` are the
//! two roots of `zeta^2 - (1 + r - r_lo z) zeta + r_hi = 0`. The discriminant vanishes at
//! the cut endpoints `x_minus < x_plus`, and `g_lo` has a pole at `z = 1/r` exactly when
//! `r^2 > r_hi`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point of the complex z-plane.
pub type ComplexPoint<T> = Complex<T>;

/// Relative guard radius around the pole at `1/r`.
pub const POLE_GUARD: f64 = 1e-12;

/// Model inputs: total traffic intensity `r`, high-priority fraction `nu` and the server count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams<T> {
    r: T,
    nu: T,
    r_hi: T,
    r_lo: T,
    servers: u32,
}

impl<T: Real> TwoLevelParams<T> {
    /// Single-server parameters; the server count only matters for the unconditional PMF.
    pub fn new(r: T, nu: T) -> Result<Self> {
        Self::with_servers(r, nu, 1)
    }

    pub fn with_servers(r: T, nu: T, servers: u32) -> Result<Self> {
        if !(r >= T::zero()) {
            return Err(Error::domain(format!("traffic intensity must be non-negative, got {r}")));
        }
        if !(r < T::one()) {
            return Err(Error::ErgodicityViolation { r: r.as_f64() });
        }
        if !(nu >= T::zero() && nu <= T::one()) {
            return Err(Error::domain(format!("high-priority fraction must lie in [0, 1], got {nu}")));
        }
        if servers == 0 {
            return Err(Error::domain("server count must be positive"));
        }
        let r_hi = nu * r;
        Ok(Self { r, nu, r_hi, r_lo: r - r_hi, servers })
    }

    /// Parameters of an effective two-level problem given directly by class intensities.
    pub fn from_intensities(r_hi: T, r_lo: T) -> Result<Self> {
        if !(r_hi >= T::zero() && r_lo >= T::zero()) {
            return Err(Error::domain("class intensities must be non-negative"));
        }
        let r = r_hi + r_lo;
        if !(r < T::one()) {
            return Err(Error::ErgodicityViolation { r: r.as_f64() });
        }
        let nu = if r > T::zero() { r_hi / r } else { T::zero() };
        Ok(Self { r, nu, r_hi, r_lo, servers: 1 })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn r_hi(&self) -> T {
        self.r_hi
    }

    pub fn r_lo(&self) -> T {
        self.r_lo
    }

    pub fn servers(&self) -> u32 {
        self.servers
    }
}

/// Cut and pole geometry derived from [`TwoLevelParams`].
///
/// When `no_high` (r_hi = 0) or `no_low` (r_lo = 0) is set, the cut collapses or runs off to
/// infinity and the geometry fields hold non-finite or meaningless values; the engines route
/// those cases through closed forms instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T> {
    pub x_minus: T,
    pub x_plus: T,
    pub x_dif: T,
    pub a: T,
    pub b: T,
    pub alpha: T,
    pub beta: T,
    /// `alpha - 1`, computed without cancellation.
    pub alpha_m1: T,
    /// `beta - 1 = (r - sqrt(r_hi))^2 / (2 r sqrt(r_hi))`; exactly zero at the critical point.
    pub beta_m1: T,
    /// `alpha - beta = r_lo / (2 r sqrt(r_hi))`.
    pub alpha_minus_beta: T,
    pub chi: T,
    pub zq: T,
    pub tq: T,
    pub d: T,
    pub sqrt_d: T,
    /// `sqrt(alpha^2 - 1)`.
    pub sqrt_alpha2m1: T,
    /// `(x_minus - 1) / x_dif = (1 - r) a + r b`, the Laguerre-coefficient constant.
    pub c_l: T,
    pub pole_active: bool,
    pub no_high: bool,
    pub no_low: bool,
}

impl<T: Real> DerivedParams<T> {
    pub fn new(p: &TwoLevelParams<T>) -> Self {
        let (r, r_hi, r_lo) = (p.r, p.r_hi, p.r_lo);
        let one = T::one();
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let half = T::lit(0.5);
        let s = r_hi.sqrt();

        let no_high = r_hi == T::zero();
        let no_low = r_lo == T::zero();
        let pole_active = r * r > r_hi;

        let x_minus = one + (one - s) * (one - s) / r_lo;
        let x_plus = one + (one + s) * (one + s) / r_lo;
        let x_dif = four * s / r_lo;

        // 1 + r - 2 sqrt(r_hi) = (1 - sqrt(r_hi))^2 + r_lo
        let alpha_m1 = ((one - s) * (one - s) + r_lo) / (two * s);
        let beta_m1 = (r - s) * (r - s) / (two * r * s);
        let alpha = one + alpha_m1;
        let beta = one + beta_m1;
        let alpha_minus_beta = r_lo / (two * r * s);
        let a = half * alpha_m1;
        let b = half * beta_m1;

        // (1 + r)^2 - 4 r_hi = (1 + r - 2s)(1 + r + 2s)
        let root = (((one - s) * (one - s) + r_lo) * (one + r + two * s)).sqrt();
        let chi = (one + r) / root;
        let zq = (r_lo / r) / root;
        let tq = chi * zq;
        let sqrt_alpha2m1 = (alpha_m1 * (alpha + one)).sqrt();
        let d = beta_m1 * (beta + one) / (alpha_m1 * (alpha + one));
        let sqrt_d = d.sqrt();
        let c_l = (one - r) * a + r * b;

        Self {
            x_minus,
            x_plus,
            x_dif,
            a,
            b,
            alpha,
            beta,
            alpha_m1,
            beta_m1,
            alpha_minus_beta,
            chi,
            zq,
            tq,
            d,
            sqrt_d,
            sqrt_alpha2m1,
            c_l,
            pole_active,
            no_high,
            no_low,
        }
    }

    /// True when neither class vanishes and the cut machinery applies.
    pub fn has_cut(&self) -> bool {
        !self.no_high && !self.no_low
    }
}

/// Computes the derived geometry for `params`.
pub fn derive<T: Real>(params: &TwoLevelParams<T>) -> DerivedParams<T> {
    DerivedParams::new(params)
}

/// Parameters together with their derived geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelModel<T> {
    pub params: TwoLevelParams<T>,
    pub derived: DerivedParams<T>,
}

impl<T: Real> TwoLevelModel<T> {
    pub fn new(params: TwoLevelParams<T>) -> Self {
        Self { params, derived: DerivedParams::new(&params) }
    }

    pub fn from_r_nu(r: T, nu: T) -> Result<Self> {
        Ok(Self::new(TwoLevelParams::new(r, nu)?))
    }

    pub fn r(&self) -> T {
        self.params.r
    }

    pub fn r_hi(&self) -> T {
        self.params.r_hi
    }

    pub fn r_lo(&self) -> T {
        self.params.r_lo
    }

    /// `b(z) = 1 + r - r_lo z`.
    pub fn b_of(&self, p: ComplexPoint<T>) -> ComplexPoint<T> {
        Complex::new(T::one() + self.r(), T::zero()) - p * self.r_lo()
    }

    /// The two roots `(zeta_plus, zeta_minus)` on the branch that keeps them analytic off the
    /// positive real axis: the square root takes sign `+1` for `Re z <= (x_plus + x_minus)/2`
    /// and `-1` beyond.
    pub fn zeta_branches(&self, p: ComplexPoint<T>) -> (ComplexPoint<T>, ComplexPoint<T>) {
        let (plus, minus, _) = self.roots_with_shift(p);
        (plus, minus)
    }

    /// `(zeta_plus, zeta_minus, zeta_plus - r)`, the last formed without subtracting `r`.
    fn roots_with_shift(&self, p: ComplexPoint<T>) -> (ComplexPoint<T>, ComplexPoint<T>, ComplexPoint<T>) {
        let r_hi = self.r_hi();
        let r_lo = self.r_lo();
        let one = T::one();
        let b = self.b_of(p);
        let half = T::lit(0.5);
        if r_hi == T::zero() {
            return (b, Complex::new(T::zero(), T::zero()), Complex::new(one, T::zero()) - p * r_lo);
        }
        // b - 2r = (1 - r) - r_lo z, with 1 - r exact for r >= 1/2.
        let shifted = Complex::new(one - self.r(), T::zero()) - p * r_lo;
        // b^2 - 4 r_hi = (b - 2s)(b + 2s), each factor r_lo (z - 1) - (1 -+ s)^2 up to sign.
        let s = r_hi.sqrt();
        let w = (p - one) * r_lo;
        let disc = (w - (one - s) * (one - s)) * (w - (one + s) * (one + s));
        let mut root = disc.sqrt();
        // Midpoint of the cut is (1 + r) / r_lo; with r_lo = 0 it sits at infinity.
        if r_lo > T::zero() && p.re > (one + self.r()) / r_lo {
            root = -root;
        }
        let plus = (b + root) * half;
        let minus = (b - root) * half;
        // Recover the smaller root from the product to avoid cancellation.
        if plus.norm_sqr() >= minus.norm_sqr() {
            let minus = if plus.norm_sqr() > T::zero() { Complex::new(r_hi, T::zero()) / plus } else { minus };
            (plus, minus, (shifted + root) * half)
        } else {
            let plus = Complex::new(r_hi, T::zero()) / minus;
            (plus, minus, plus - self.r())
        }
    }

    fn check_pole(&self, p: ComplexPoint<T>) -> Result<()> {
        if self.derived.pole_active {
            let inv_r = T::one() / self.r();
            if (p - inv_r).norm() < T::lit(POLE_GUARD) * inv_r {
                return Err(Error::PoleEvaluation { re: p.re.as_f64(), im: p.im.as_f64() });
            }
        }
        Ok(())
    }

    /// PGF of the wait-conditional low-priority marginal.
    pub fn g_lo(&self, p: ComplexPoint<T>) -> Result<ComplexPoint<T>> {
        if self.r() == T::zero() {
            return Ok(Complex::new(T::one(), T::zero()));
        }
        self.check_pole(p)?;
        let (_, _, shift) = self.roots_with_shift(p);
        Ok(Complex::new(T::one() - self.r(), T::zero()) / shift)
    }

    /// PGF over the low-priority index at fixed high-priority length `ell`.
    pub fn g_ell(&self, ell: usize, p: ComplexPoint<T>) -> Result<ComplexPoint<T>> {
        if self.r() == T::zero() {
            let v = if ell == 0 { T::one() } else { T::zero() };
            return Ok(Complex::new(v, T::zero()));
        }
        self.check_pole(p)?;
        let (_, zm, shift) = self.roots_with_shift(p);
        let glo = Complex::new(T::one() - self.r(), T::zero()) / shift;
        Ok(glo * (Complex::new(T::one(), T::zero()) - zm) * zm.powu(ell as u32))
    }

    /// `zeta_minus(0) = (1 + r - sqrt((1 + r)^2 - 4 r_hi)) / 2`, the geometric rate of `P(ell, 0)`.
    pub fn zeta_minus_at_zero(&self) -> T {
        let (r, r_hi) = (self.r(), self.r_hi());
        let one = T::one();
        let big = T::lit(0.5) * (one + r + ((one + r) * (one + r) - T::lit(4.0) * r_hi).sqrt());
        if big > T::zero() {
            r_hi / big
        } else {
            T::zero()
        }
    }
}

/// Probability that an arrival finds a free server among `servers` at intensity `r`.
///
/// Evaluates `1 / (1 - P_NW) = 1 + (1 - r) c! / (rc)^c * sum_{n<c} (rc)^n / n!` with the sum
/// accumulated as products of ratios `(c - i) / (rc)`, so no factorial is ever formed.
pub fn no_wait_probability<T: Real>(servers: u32, r: T) -> Result<T> {
    if servers == 0 {
        return Err(Error::domain("server count must be positive"));
    }
    if !(r >= T::zero()) {
        return Err(Error::domain(format!("traffic intensity must be non-negative, got {r}")));
    }
    if !(r < T::one()) {
        return Err(Error::ErgodicityViolation { r: r.as_f64() });
    }
    if r == T::zero() {
        return Ok(T::one());
    }
    let c = servers as usize;
    let rc = r * T::of(c);
    // term_j = c! / ((c - j)! (rc)^j) for j = 1..=c, summed smallest first.
    let mut terms = Vec::with_capacity(c);
    let mut term = T::one();
    for i in 0..c {
        term = term * T::of(c - i) / rc;
        terms.push(term);
        if !term.is_finite() {
            break;
        }
    }
    terms.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let sum = terms.into_iter().fold(T::zero(), |acc, t| acc + t);
    let inv = T::one() + (T::one() - r) * sum;
    Ok(T::one() - T::one() / inv)
}

/// Unconditional joint PMF from its wait-conditional counterpart.
pub fn full_pmf<T: Real>(ell: usize, m: usize, wait_conditional_value: T, servers: u32, r: T) -> Result<T> {
    let p_nw = no_wait_probability(servers, r)?;
    let origin = if ell == 0 && m == 0 { p_nw } else { T::zero() };
    Ok(origin + (T::one() - p_nw) * wait_conditional_value)
}
