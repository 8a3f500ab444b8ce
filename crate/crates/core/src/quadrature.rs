//! Adaptive Gauss–Kronrod integration on finite intervals and on
//! `[0, ∞)` with an exponentially decaying integrand.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Hard cap on integrand samples per call.
pub const MAX_EVALUATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const PANEL_POINTS: usize = 21;

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // Largest error first; ties broken by position so the order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod_panel<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(non_finite(center, fc));
    }
    let mut gauss = 0.0;
    let mut kronrod = fc * WGK[10];
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let (a, b) = (center - dx, center + dx);
        let (fa, fb) = (f(a), f(b));
        if !fa.is_finite() {
            return Err(non_finite(a, fa));
        }
        if !fb.is_finite() {
            return Err(non_finite(b, fb));
        }
        kronrod += w * (fa + fb);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fa + fb);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Panel {
        lo,
        hi,
        value,
        error,
    })
}

fn non_finite(x: f64, fx: f64) -> Error {
    Error::domain("quadrature", format!("integrand returned {fx} at {x}"))
}

/// Globally adaptive bisection of `[lo, hi]`, always refining the panel
/// with the largest error estimate.
fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<IntegrationResult> {
    if !(abs_tol > 0.0 && rel_tol > 0.0) {
        return Err(Error::domain(
            "quadrature",
            format!("tolerances must be positive, got abs {abs_tol}, rel {rel_tol}"),
        ));
    }
    let first = kronrod_panel(&mut f, lo, hi)?;
    let mut evaluations = PANEL_POINTS;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    // Panels too narrow to split further.
    let mut frozen_error = 0.0;

    loop {
        if error <= abs_tol.max(rel_tol * value.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            frozen_error += worst.error;
            continue;
        }
        if evaluations + 2 * PANEL_POINTS > MAX_EVALUATIONS {
            heap.push(worst);
            break;
        }
        let left = kronrod_panel(&mut f, worst.lo, mid)?;
        let right = kronrod_panel(&mut f, mid, worst.hi)?;
        evaluations += 2 * PANEL_POINTS;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panel list so the reported value carries no
    // accumulated update drift.
    let mut panels = heap.into_vec();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    value = panels.iter().map(|p| p.value).sum();
    error = panels.iter().map(|p| p.error).sum::<f64>() + frozen_error;

    if error <= abs_tol.max(rel_tol * value.abs()) {
        Ok(IntegrationResult {
            value,
            error_estimate: error,
            evaluations,
        })
    } else {
        Err(Error::Convergence {
            best: value,
            error_estimate: error,
            evaluations,
        })
    }
}

/// Integrate `f` over the finite interval `[lo, hi]`.
pub fn integrate_interval<F>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<IntegrationResult>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::domain(
            "integrate_interval",
            format!("invalid interval [{lo}, {hi}]"),
        ));
    }
    if lo == hi {
        return Ok(IntegrationResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    adaptive(f, lo, hi, abs_tol, rel_tol)
}

/// Integrate `f` over `[0, ∞)`.
///
/// `f` must decay at least like `exp(-x / decay_scale)`. The substitution
/// `x = -decay_scale · ln(u)` maps the half line onto `(0, 1]` and turns that
/// exponential into a constant, so the transformed integrand
/// `f(x) · decay_scale / u` stays bounded. Gauss nodes never touch `u = 0`.
pub fn integrate_semi_infinite<F>(
    mut f: F,
    decay_scale: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<IntegrationResult>
where
    F: FnMut(f64) -> f64,
{
    if !(decay_scale.is_finite() && decay_scale > 0.0) {
        return Err(Error::domain(
            "integrate_semi_infinite",
            format!("decay scale must be positive, got {decay_scale}"),
        ));
    }
    let transformed = |u: f64| {
        let x = -decay_scale * u.ln();
        let fx = f(x);
        // Beyond the point where the weight underflows the integrand is zero.
        if fx == 0.0 {
            0.0
        } else {
            fx * decay_scale / u
        }
    };
    adaptive(transformed, 0.0, 1.0, abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // e·E1(1) from the convergent series E1(1) = -γ - Σ (-1)^k / (k·k!)
    fn e_times_e1_at_one() -> f64 {
        let euler_gamma = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..40 {
            fact *= k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign / (k as f64 * fact);
        }
        std::f64::consts::E * (-euler_gamma + sum)
    }

    #[test]
    fn exponential_moments() {
        let r = integrate_semi_infinite(|x| (-x).exp(), 1.0, 1e-12, 1e-12).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert!(r.error_estimate >= 0.0 && r.evaluations >= 1);
        let r = integrate_semi_infinite(|x| x * (-x).exp(), 1.0, 1e-12, 1e-12).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn exponential_log_matches_series_oracle() {
        let oracle = e_times_e1_at_one();
        assert_abs_diff_eq!(oracle, 0.596_347_362_323_194_1, epsilon = 1e-14);
        let r = integrate_semi_infinite(|x| (-x).exp() * x.ln_1p(), 1.0, 1e-12, 1e-10).unwrap();
        assert_abs_diff_eq!(r.value, oracle, epsilon = 1e-11);
    }

    #[test]
    fn splitting_the_domain_is_consistent() {
        let tol = 1e-10;
        let integrands: [fn(f64) -> f64; 3] = [
            |x| (-x).exp(),
            |x| x * (-x).exp(),
            |x| (-x).exp() * x.ln_1p(),
        ];
        for f in integrands {
            let whole = integrate_semi_infinite(f, 1.0, tol, 1e-12).unwrap().value;
            for &t in &[0.3, 1.0, 4.0, 20.0] {
                let head = integrate_interval(f, 0.0, t, tol, 1e-12).unwrap().value;
                let tail = integrate_semi_infinite(|y| f(t + y), 1.0, tol, 1e-12)
                    .unwrap()
                    .value;
                assert!((head + tail - whole).abs() < 2.0 * tol);
            }
        }
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| (-x / 3.0).exp() * (1.0 + x).ln() * (x.sin() + 2.0);
        let a = integrate_semi_infinite(f, 3.0, 1e-9, 1e-9).unwrap();
        let b = integrate_semi_infinite(f, 3.0, 1e-9, 1e-9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            integrate_semi_infinite(|_| f64::NAN, 1.0, 1e-8, 1e-8),
            Err(Error::Domain { .. })
        ));
        assert!(integrate_semi_infinite(|x| (-x).exp(), 0.0, 1e-8, 1e-8).is_err());
        assert!(integrate_semi_infinite(|x| (-x).exp(), 1.0, 0.0, 1e-8).is_err());
        // Non-integrable singularity exhausts the budget.
        match integrate_interval(|x: f64| 1.0 / x.abs().max(1e-300), -1.0, 1.0, 1e-10, 1e-10) {
            Err(Error::Convergence { evaluations, .. }) => assert!(evaluations <= MAX_EVALUATIONS),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn finite_interval() {
        let r =
            integrate_interval(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-13).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-13);
        assert_eq!(
            integrate_interval(|x| x, 2.0, 2.0, 1e-8, 1e-8)
                .unwrap()
                .value,
            0.0
        );
    }
}
