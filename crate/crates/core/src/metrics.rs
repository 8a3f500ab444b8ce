//! Rate selection from a delayed, noisy SNR estimate and the resulting
//! outage and effective-rate metrics.
//!
//! All quantities are linear; rates are in nats per channel use.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::specfun;

/// Absolute tolerance used for the effective-rate integral by default.
pub const DEFAULT_RATE_TOL: f64 = 1e-8;

/// Backoff search bracket for [`calibrate_backoff`] (±60 dB).
pub const BACKOFF_BRACKET: (f64, f64) = (1e-6, 1e6);

/// Below this `1 - ρ²` the estimate is treated as perfectly correlated.
const PERFECT_CORRELATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAdaptParams {
    /// Average SNR seen by the data decoder.
    pub snr_data: f64,
    /// Backoff factor.
    pub delta: f64,
    /// SNR gap to capacity.
    pub gamma_gap: f64,
}

impl RateAdaptParams {
    pub fn new(snr_data: f64, delta: f64, gamma_gap: f64) -> Result<Self> {
        let p = RateAdaptParams {
            snr_data,
            delta,
            gamma_gap,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !(positive(self.snr_data) && self.snr_data.is_finite()) {
            return Err(Error::domain(
                "RateAdaptParams",
                "snr_data must be positive",
            ));
        }
        if !positive(self.delta) {
            return Err(Error::domain("RateAdaptParams", "backoff must be positive"));
        }
        if !(positive(self.gamma_gap) && self.gamma_gap.is_finite()) {
            return Err(Error::domain("RateAdaptParams", "SNR gap must be positive"));
        }
        Ok(())
    }
}

/// Second-order statistics linking the SNR estimate to the next channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStatistics {
    /// Raw channel autocorrelation at the CSI delay.
    pub rho_tilde: f64,
    /// Channel-estimation error variance.
    pub sigma_e_sq: f64,
}

impl LinkStatistics {
    pub fn new(rho_tilde: f64, sigma_e_sq: f64) -> Result<Self> {
        if !(rho_tilde.abs() <= 1.0) {
            return Err(Error::domain(
                "LinkStatistics",
                format!("|rho_tilde| must be at most 1, got {rho_tilde}"),
            ));
        }
        if !(sigma_e_sq >= 0.0 && sigma_e_sq.is_finite()) {
            return Err(Error::domain(
                "LinkStatistics",
                format!("sigma_e² must be finite and non-negative, got {sigma_e_sq}"),
            ));
        }
        Ok(LinkStatistics {
            rho_tilde,
            sigma_e_sq,
        })
    }

    /// Mean of the estimated SNR, `1 + sigma_e²`.
    pub fn sigma_sq(&self) -> f64 {
        1.0 + self.sigma_e_sq
    }

    /// Normalised correlation `ρ̃ / σ`.
    pub fn rho(&self) -> f64 {
        self.rho_tilde / self.sigma_sq().sqrt()
    }

    /// `1 - ρ²` evaluated as `(σ² - ρ̃²) / σ²` to keep precision near one.
    pub fn one_minus_rho_sq(&self) -> f64 {
        let s2 = self.sigma_sq();
        ((s2 - self.rho_tilde * self.rho_tilde) / s2).max(0.0)
    }

    fn is_perfectly_correlated(&self) -> bool {
        self.one_minus_rho_sq() < PERFECT_CORRELATION_EPS
    }
}

/// Transmission rate `ln(1 + snr·γ̂ / (Δ·Γ))` chosen for an SNR estimate.
pub fn rate(gamma_hat: f64, p: &RateAdaptParams) -> f64 {
    (p.snr_data * gamma_hat / (p.delta * p.gamma_gap)).ln_1p()
}

/// Marcum arguments `(a, b)` of the conditional success probability.
fn marcum_args(gamma_hat: f64, stats: &LinkStatistics, delta: f64) -> (f64, f64) {
    let omr = stats.one_minus_rho_sq();
    let rho_sq = 1.0 - omr;
    let a = (2.0 * rho_sq * gamma_hat / (omr * stats.sigma_sq())).sqrt();
    let b = (2.0 * gamma_hat / (omr * delta)).sqrt();
    (a, b)
}

/// Probability that the next channel falls below `γ̂/Δ` given the estimate
/// `γ̂`.
pub fn conditional_outage(gamma_hat: f64, stats: &LinkStatistics, delta: f64) -> f64 {
    1.0 - conditional_success(gamma_hat, stats, delta)
}

fn conditional_success(gamma_hat: f64, stats: &LinkStatistics, delta: f64) -> f64 {
    if gamma_hat <= 0.0 {
        return 1.0;
    }
    if stats.is_perfectly_correlated() {
        // The next channel equals the estimate.
        return if delta >= 1.0 { 1.0 } else { 0.0 };
    }
    let (a, b) = marcum_args(gamma_hat, stats, delta);
    specfun::q1_unchecked(a, b)
}

/// Average outage probability in closed form.
pub fn outage_probability(stats: &LinkStatistics, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::domain(
            "outage_probability",
            format!("backoff must be positive, got {delta}"),
        ));
    }
    if delta.is_infinite() {
        return Ok(0.0);
    }
    if stats.is_perfectly_correlated() {
        return Ok(if delta >= 1.0 { 0.0 } else { 1.0 });
    }
    let s2 = stats.sigma_sq();
    let discriminant = (delta + s2).powi(2) - 4.0 * stats.rho_tilde.powi(2) * delta;
    assert!(
        discriminant > 0.0,
        "outage discriminant must be positive for |rho_tilde| <= 1 and sigma² >= 1"
    );
    Ok((0.5 + (s2 - delta) / (2.0 * discriminant.sqrt())).clamp(0.0, 1.0))
}

/// Average effective rate: expected rate times conditional success
/// probability over the exponential law of the estimate, by quadrature.
///
/// `tol` is the absolute tolerance; the relative tolerance is `10·tol`.
pub fn average_effective_rate(
    p: &RateAdaptParams,
    stats: &LinkStatistics,
    tol: f64,
) -> Result<f64> {
    p.validate()?;
    if p.delta.is_infinite() {
        return Ok(0.0);
    }
    let s2 = stats.sigma_sq();
    let integrand = |x: f64| {
        let weight = (-x / s2).exp() / s2;
        if weight == 0.0 {
            return 0.0;
        }
        conditional_success(x, stats, p.delta) * weight * rate(x, p)
    };
    let r = quadrature::integrate_semi_infinite(integrand, s2, tol, 10.0 * tol)?;
    Ok(r.value.max(0.0))
}

/// Backoff `Δ` at which the average outage equals `target_pout`.
pub fn calibrate_backoff(target_pout: f64, stats: &LinkStatistics) -> Result<f64> {
    let (lo, hi) = BACKOFF_BRACKET;
    let infeasible = || Error::InfeasibleTarget {
        target: target_pout,
        lo,
        hi,
    };
    if !(target_pout > 0.0 && target_pout < 1.0) {
        return Err(infeasible());
    }
    let p_lo = outage_probability(stats, lo)?;
    let p_hi = outage_probability(stats, hi)?;
    if !(p_lo >= target_pout && target_pout >= p_hi) {
        return Err(infeasible());
    }
    // Outage decreases with backoff; bisect on ln Δ.
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if outage_probability(stats, mid.exp())? > target_pout {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let delta = (0.5 * (a + b)).exp();
    if (outage_probability(stats, delta)? - target_pout).abs() > 1e-9 {
        return Err(infeasible());
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn stats(rho_tilde: f64, sigma_e_sq: f64) -> LinkStatistics {
        LinkStatistics::new(rho_tilde, sigma_e_sq).unwrap()
    }

    fn db(x: f64) -> f64 {
        10f64.powf(x / 10.0)
    }

    #[test]
    fn rate_examples() {
        let p = RateAdaptParams::new(db(5.0), db(3.0), db(1.0)).unwrap();
        assert_eq!(rate(0.0, &p), 0.0);
        let expected = (1.0 + db(5.0) / (db(3.0) * db(1.0))).ln();
        assert_abs_diff_eq!(rate(1.0, &p), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(rate(1.0, &p), 0.814_90, epsilon = 1e-4);
        let p = RateAdaptParams::new(db(5.0), 1e300, 1.0).unwrap();
        assert!(rate(1.0, &p) < 1e-299);
    }

    #[test]
    fn conditional_outage_examples() {
        let s = stats(0.9696, 0.00544);
        assert_eq!(conditional_outage(0.0, &s, 2.0), 0.0);
        let s = stats(0.0, 0.0);
        assert_abs_diff_eq!(
            conditional_outage(1.0, &s, 2.0),
            1.0 - (-0.5f64).exp(),
            epsilon = 1e-15
        );
        let perfect = stats(1.0, 0.0);
        assert_eq!(conditional_outage(3.0, &perfect, 2.0), 0.0);
        assert_eq!(conditional_outage(3.0, &perfect, 1.0), 0.0);
        assert_eq!(conditional_outage(3.0, &perfect, 0.5), 1.0);
    }

    #[test]
    fn outage_examples() {
        assert_eq!(outage_probability(&stats(1.0, 0.0), 2.0).unwrap(), 0.0);
        for &rt in &[0.0, 0.3, 0.9, 0.999] {
            let s = stats(rt, 0.17);
            assert_abs_diff_eq!(
                outage_probability(&s, s.sigma_sq()).unwrap(),
                0.5,
                epsilon = 1e-15
            );
        }
        assert_abs_diff_eq!(
            outage_probability(&stats(0.0, 0.0), 2.0).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(outage_probability(&stats(0.5, 0.0), 0.0).is_err());
        assert!(outage_probability(&stats(0.5, 0.0), -1.0).is_err());
    }

    #[test]
    fn outage_matches_integral_of_conditional_outage() {
        for &rt in &[0.0, 0.5, 0.9, 0.99] {
            for &se in &[0.0, 0.00544, 0.17] {
                for &d in &[1.5, 2.0, 3.6] {
                    let s = stats(rt, se);
                    let s2 = s.sigma_sq();
                    let numeric = quadrature::integrate_semi_infinite(
                        |x| conditional_outage(x, &s, d) * (-x / s2).exp() / s2,
                        s2,
                        1e-10,
                        1e-10,
                    )
                    .unwrap()
                    .value;
                    let closed = outage_probability(&s, d).unwrap();
                    assert!(
                        (numeric - closed).abs() < 1e-6,
                        "{rt} {se} {d}: {numeric} vs {closed}"
                    );
                }
            }
        }
    }

    #[test]
    fn effective_rate_perfect_csi_is_ergodic_capacity() {
        let p = RateAdaptParams::new(1.0, 1.0, 1.0).unwrap();
        let v = average_effective_rate(&p, &stats(1.0, 0.0), DEFAULT_RATE_TOL).unwrap();
        assert_abs_diff_eq!(v, 0.596_347_362_323_194, epsilon = 1e-7);
    }

    #[test]
    fn effective_rate_vanishes_with_huge_backoff() {
        let s = stats(0.9, 0.01);
        let p = RateAdaptParams::new(3.0, 1e12, 1.2).unwrap();
        assert!(average_effective_rate(&p, &s, DEFAULT_RATE_TOL).unwrap() < 1e-10);
        let p = RateAdaptParams::new(3.0, f64::INFINITY, 1.2).unwrap();
        assert_eq!(
            average_effective_rate(&p, &s, DEFAULT_RATE_TOL).unwrap(),
            0.0
        );
    }

    #[test]
    fn effective_rate_below_ergodic_bound() {
        let snr = db(5.0);
        let bound = average_effective_rate(
            &RateAdaptParams::new(snr, 1.0, 1.0).unwrap(),
            &stats(1.0, 0.0),
            DEFAULT_RATE_TOL,
        )
        .unwrap();
        for &rt in &[0.0, 0.5, 0.97] {
            for &se in &[0.0, 0.05, 0.17] {
                for &d in &[1.2, db(3.0), db(5.6)] {
                    let p = RateAdaptParams::new(snr, d, db(1.0)).unwrap();
                    let v = average_effective_rate(&p, &stats(rt, se), DEFAULT_RATE_TOL).unwrap();
                    assert!(v >= 0.0 && v <= bound, "{v} vs {bound}");
                }
            }
        }
    }

    #[test]
    fn calibration_examples() {
        let s = stats(0.8, 0.17);
        assert_abs_diff_eq!(
            calibrate_backoff(0.5, &s).unwrap(),
            s.sigma_sq(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            calibrate_backoff(1.0 / 3.0, &stats(0.0, 0.0)).unwrap(),
            2.0,
            epsilon = 1e-10
        );
        for &target in &[0.01, 0.1, 0.3] {
            let d = calibrate_backoff(target, &s).unwrap();
            assert!((outage_probability(&s, d).unwrap() - target).abs() < 1e-9);
        }
        assert!(matches!(
            calibrate_backoff(1e-15, &stats(0.0, 0.0)),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert!(calibrate_backoff(0.0, &s).is_err());
        assert!(calibrate_backoff(0.2, &stats(1.0, 0.0)).is_err());
    }

    #[test]
    fn link_statistics_validation() {
        assert!(LinkStatistics::new(1.01, 0.0).is_err());
        assert!(LinkStatistics::new(f64::NAN, 0.0).is_err());
        assert!(LinkStatistics::new(0.5, -0.1).is_err());
        let s = stats(0.9, 0.21);
        assert!(s.rho().abs() <= s.rho_tilde.abs());
        assert!(RateAdaptParams::new(0.0, 1.0, 1.0).is_err());
        assert!(RateAdaptParams::new(1.0, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn zero_correlation_identity(se in 0.0f64..2.0, d in 0.01f64..100.0) {
            let s = stats(0.0, se);
            let closed = s.sigma_sq() / (d + s.sigma_sq());
            prop_assert!((outage_probability(&s, d).unwrap() - closed).abs() <= 1e-12);
        }

        #[test]
        fn half_outage_threshold(rt in -0.999f64..0.999, se in 0.0f64..1.0, d in 0.05f64..20.0) {
            let s = stats(rt, se);
            let p = outage_probability(&s, d).unwrap();
            prop_assert_eq!(p < 0.5, d > s.sigma_sq());
        }

        #[test]
        fn outage_monotone(rt in 0.0f64..0.99, se in 0.0f64..0.5, d in 0.1f64..10.0) {
            let h = 1e-4;
            let s = stats(rt, se);
            let base = outage_probability(&s, d).unwrap();
            prop_assert!(outage_probability(&s, d * (1.0 + h)).unwrap() <= base + 1e-14);
            // Better correlation only helps once the backoff covers the
            // estimation noise; below that it drives outage towards one.
            let up = outage_probability(&stats(rt + h, se), d).unwrap();
            if d >= s.sigma_sq() {
                prop_assert!(up <= base + 1e-14);
            } else {
                prop_assert!(up >= base - 1e-14);
            }
        }

        #[test]
        fn conditional_outage_monotone_in_backoff(
            rt in 0.0f64..0.99, se in 0.0f64..0.5, g in 0.0f64..10.0, d in 0.2f64..10.0
        ) {
            let s = stats(rt, se);
            let e = conditional_outage(g, &s, d);
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert!(conditional_outage(g, &s, d * 1.1) <= e + 1e-12);
        }
    }
}
