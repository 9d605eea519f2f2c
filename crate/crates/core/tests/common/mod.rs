//! Helpers shared by the integration tests.
#![allow(dead_code)]

use npq::qfunc::scaled_q;
use npq::{Model, QuadratureOptions};

/// Adaptive Simpson over `[a, b]` for a vector-valued integrand, with absolute tolerance
/// `tol` on every component.
pub fn simpson_vec<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Vec<f64> {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson_rule(a, b, &fa, &fm, &fb);
    refine(f, a, b, &fa, &fm, &fb, &whole, tol, 40)
}

fn simpson_rule(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter().zip(fm).zip(fb).map(|((x, y), z)| h * (x + 4.0 * y + z)).collect()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> Vec<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
) -> Vec<f64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson_rule(a, m, fa, &flm, fm);
    let right = simpson_rule(m, b, fm, &frm, fb);
    let err = left.iter().zip(&right).zip(whole).map(|((l, r), w)| (l + r - w).abs()).fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        return left.iter().zip(&right).zip(whole).map(|((l, r), w)| l + r + (l + r - w) / 15.0).collect();
    }
    let mut lv = refine(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1);
    let rv = refine(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1);
    for (x, y) in lv.iter_mut().zip(rv) {
        *x += y;
    }
    lv
}

/// Time beyond which the density envelope is below `1e-16`, with the tail mass it leaves.
pub fn truncation(model: &Model) -> (f64, f64) {
    let rates = model.waiting_decay_rates();
    let slow = rates.pole.map_or(rates.cut, |p| p.min(rates.cut));
    let t_star = (1e16f64).ln() / slow;
    // Both parts are bounded by (1 - r) e^{-rate t}; the tail mass is at most that over rate.
    let tail = (1.0 - model.r()) * (-slow * t_star).exp() / slow;
    (t_star, tail)
}

/// `int_0^inf P_W(t) k(t) dt` for a vector of kernels, integrated piecewise.
pub fn integrate_waiting<K: Fn(f64) -> Vec<f64>>(model: &Model, kernels: K, tol: f64) -> Vec<f64> {
    let opts = QuadratureOptions::default();
    let (t_star, _) = truncation(model);
    let f = |t: f64| {
        let p = model.waiting_pdf(t, &opts).unwrap().value;
        kernels(t).into_iter().map(|k| k * p).collect::<Vec<_>>()
    };
    // Unit-width panels near the origin, geometrically growing ones beyond.
    let mut edges = vec![0.0];
    let mut t = 0.0;
    let mut h = 0.5;
    while t < t_star {
        t = (t + h).min(t_star);
        edges.push(t);
        h *= 1.15;
    }
    let mut total: Vec<f64> = Vec::new();
    for w in edges.windows(2) {
        let part = simpson_vec(&f, w[0], w[1], tol / edges.len() as f64);
        if total.is_empty() {
            total = part;
        } else {
            for (x, y) in total.iter_mut().zip(part) {
                *x += y;
            }
        }
    }
    total
}

/// `x^n e^{-x} / n!` evaluated in log space.
pub fn poisson_kernel(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * x.ln() - x - ln_fact).exp()
}

pub fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `Q_m^ell(chi)` from its finite binomial expansion.
pub fn q_binomial(m: u64, ell: u64, chi: f64) -> f64 {
    (0..=m).map(|k| binom(m + ell, k + ell) * binom(k + m, m) * ((chi - 1.0) / 2.0).powi(k as i32)).sum()
}

/// `P_m^ell(x)` for `x > 1` without the Condon-Shortley phase, by upward recurrence in `m`.
pub fn assoc_legendre(m: usize, ell: usize, x: f64) -> f64 {
    let mut p_ll = 1.0;
    for k in 0..ell {
        p_ll *= (2 * k + 1) as f64;
    }
    p_ll *= (x * x - 1.0).powf(ell as f64 / 2.0);
    if m == ell {
        return p_ll;
    }
    let mut prev = p_ll;
    let mut cur = x * (2 * ell + 1) as f64 * p_ll;
    for k in ell + 1..m {
        let next = ((2 * k + 1) as f64 * x * cur - (k + ell) as f64 * prev) / (k + 1 - ell) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn unscaled_q(m: usize, ell: usize, chi: f64) -> f64 {
    let z = 0.5 / chi;
    scaled_q(chi * z, z, ell, m).get(m as isize) / z.powi(m as i32)
}

/// `2F1(a, 1/2; 2; x)` for `x < 0` through the Pfaff transformation, which turns the series
/// into one in `w = x/(x-1) in [0, 1)`; for integer `a >= 1` it terminates.
pub fn hyp2f1_pfaff(a: u32, x: f64) -> f64 {
    let w = x / (x - 1.0);
    let ap = 2.0 - a as f64;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..100_000 {
        let kf = k as f64;
        term *= (ap + kf) * (0.5 + kf) / ((2.0 + kf) * (kf + 1.0)) * w;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    (1.0 - x).powf(-0.5) * sum
}

/// Erlang C from the Erlang B recurrence.
pub fn erlang_c(c: u32, r: f64) -> f64 {
    let a = r * c as f64;
    let mut b = 1.0;
    for k in 1..=c {
        b = a * b / (k as f64 + a * b);
    }
    b / (1.0 - r * (1.0 - b))
}
