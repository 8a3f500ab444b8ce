//! Special functions: Bessel `J0`, exponentially scaled `I0`, and the
//! first-order Marcum Q function.
//!
//! Everything here is written from scratch in double precision. The
//! Marcum function is evaluated as a Poisson mixture (the Bessel series
//! `exp(-(a²+b²)/2) Σ (a/b)^k I_k(ab)` expanded term by term), which only
//! ever adds positive quantities and therefore stays accurate for the
//! large arguments that show up in the tails of the rate integrals.

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;
const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;

/// Bessel function of the first kind, order zero.
///
/// Power series for `|x| < 8`, Miller backward recurrence for
/// `8 <= |x| < 25`, and the Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(
            "bessel_j0",
            format!("non-finite argument {x}"),
        ));
    }
    Ok(j0_unchecked(x))
}

pub(crate) fn j0_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        j0_series(ax)
    } else if ax < 25.0 {
        j0_miller(ax)
    } else {
        j0_hankel(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-3) {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

// Normalised with 1 = J0 + 2 Σ J_2k.
fn j0_miller(x: f64) -> f64 {
    let mut m = (x as usize) + 40;
    if m % 2 == 1 {
        m += 1;
    }
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 2.0 * cur;
    for n in (1..=m).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let order = n - 1;
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            next *= 1e-200;
            norm *= 1e-200;
        }
    }
    norm += cur;
    cur / norm
}

fn j0_hankel(x: f64) -> f64 {
    let (p, q) = hankel_pq(x);
    let chi = x - FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn hankel_pq(x: f64) -> (f64, f64) {
    // a_k = prod_{j<=k} (2j-1)^2 / (8j)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if a > last || a < 1e-18 {
            break;
        }
        last = a;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q -= sign * a;
        }
    }
    (p, q)
}

/// `exp(-x) * I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(
            "bessel_i0_scaled",
            format!("argument must be finite and non-negative, got {x}"),
        ));
    }
    Ok(i0_scaled_unchecked(x))
}

pub(crate) fn i0_scaled_unchecked(x: f64) -> f64 {
    if x <= 30.0 {
        i0_scaled_series(x)
    } else {
        i0_scaled_asymptotic(x)
    }
}

fn i0_scaled_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum * (-x).exp()
}

fn i0_scaled_asymptotic(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut a = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let next = a * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if next > a || next < 1e-18 {
            break;
        }
        a = next;
        sum += a;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// First-order Marcum Q function `Q1(a, b)`.
///
/// With `M ~ Poisson(a²/2)` and `N ~ Poisson(b²/2)` independent,
/// `Q1(a, b) = P[N <= M]`. The smaller of the two tails is summed directly
/// so no step subtracts nearly equal numbers.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
        return Err(Error::domain(
            "marcum_q1",
            format!("arguments must be finite and non-negative, got ({a}, {b})"),
        ));
    }
    Ok(q1_unchecked(a, b))
}

pub(crate) fn q1_unchecked(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    // Q1 <= exp(-(b-a)²/2) for b > a and the mirror bound for a > b.
    if b - a > 40.0 {
        return 0.0;
    }
    if a - b > 40.0 {
        return 1.0;
    }
    let lambda = 0.5 * a * a;
    let y = 0.5 * b * b;
    let q = if lambda < y {
        lower_mixture(lambda, y)
    } else {
        1.0 - upper_mixture(lambda, y)
    };
    q.clamp(0.0, 1.0)
}

const MIXTURE_REL_TOL: f64 = 1e-17;

/// Σ_k P[M=k] P[N<=k] for `lambda < y`.
fn lower_mixture(lambda: f64, y: f64) -> f64 {
    let spread = 12.0 * lambda.sqrt() + 12.0;
    let k_lo = (lambda - spread).floor().max(0.0) as u64;
    let mut cdf = poisson_lower_tail(k_lo, y);
    let mut sum = 0.0;
    let mut k = k_lo;
    loop {
        let pm = poisson_pmf(k, lambda);
        sum += pm * cdf;
        let kf = k as f64;
        if kf > lambda {
            let tail = pm / (1.0 - lambda / (kf + 1.0));
            if pm == 0.0 || tail <= MIXTURE_REL_TOL * sum {
                break;
            }
        }
        k += 1;
        cdf = (cdf + poisson_pmf(k, y)).min(1.0);
    }
    sum
}

/// Σ_k P[M=k] P[N>k] for `lambda >= y`.
fn upper_mixture(lambda: f64, y: f64) -> f64 {
    let spread = 12.0 * lambda.sqrt() + 12.0;
    let mut k = (lambda + spread).ceil() as u64;
    let mut sf = poisson_upper_tail(k, y);
    let mut sum = 0.0;
    loop {
        let pm = poisson_pmf(k, lambda);
        sum += pm * sf;
        let kf = k as f64;
        if kf < lambda {
            let tail = pm / (1.0 - kf / lambda);
            if pm == 0.0 || tail <= MIXTURE_REL_TOL * sum {
                break;
            }
        }
        if k == 0 {
            break;
        }
        sf = (sf + poisson_pmf(k, y)).min(1.0);
        k -= 1;
    }
    sum
}

/// P[N <= k] for `N ~ Poisson(mean)`, `k < mean`.
fn poisson_lower_tail(k: u64, mean: f64) -> f64 {
    let head = poisson_pmf(k, mean);
    if head == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = k;
    while j > 0 && term > MIXTURE_REL_TOL * sum {
        term *= j as f64 / mean;
        sum += term;
        j -= 1;
    }
    head * sum
}

/// P[N > k] for `N ~ Poisson(mean)`, `k + 1 > mean`.
fn poisson_upper_tail(k: u64, mean: f64) -> f64 {
    let head = poisson_pmf(k + 1, mean);
    if head == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = k + 2;
    while term > MIXTURE_REL_TOL * sum {
        term *= mean / j as f64;
        sum += term;
        j += 1;
    }
    head * sum
}

/// Poisson probability mass via the saddle-point form
/// `exp(-stirlerr(k) - bd0(k, mean)) / sqrt(2πk)`.
pub(crate) fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mean).exp();
    }
    let kf = k as f64;
    (-stirling_error(k) - deviance_term(kf, mean)).exp() / (2.0 * std::f64::consts::PI * kf).sqrt()
}

/// ln(k!) - [(k + 1/2) ln k - k + ln sqrt(2π)].
fn stirling_error(k: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = k as f64;
    if k <= 15 {
        let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - HALF_LN_2PI;
    }
    let nn = n * n;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// x ln(x/m) + m - x, computed without cancellation when x ≈ m.
fn deviance_term(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return s;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}
