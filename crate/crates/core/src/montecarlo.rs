//! Monte Carlo estimates of the outage and effective-rate metrics, drawn
//! directly from the joint law of the SNR estimate and the next channel.
//! Serves as an independent check on the closed forms and quadratures.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_normal, sample_joint_pair};
use crate::error::{Error, Result};
use crate::metrics::{rate, LinkStatistics, RateAdaptParams};

pub const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of equal batches used for batch-means standard errors.
    pub batches: usize,
    /// Independent ChaCha stream selected under `seed`.
    pub stream: u64,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            batches: DEFAULT_BATCHES,
            stream: 0,
        }
    }

    /// Same settings on a different stream.
    pub fn with_stream(self, stream: u64) -> Self {
        McConfig { stream, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batches == 0 || self.samples < self.batches {
            return Err(Error::Config(format!(
                "need samples >= batches >= 1, got {} samples in {} batches",
                self.samples, self.batches
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples_used: usize,
}

impl McEstimate {
    /// Whether `reference` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }

    fn binomial(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        McEstimate {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            samples_used: n,
        }
    }
}

fn is_outage(gamma_next: f64, gamma_hat: f64, delta: f64) -> bool {
    gamma_next < gamma_hat / delta
}

/// Fraction of draws where the next channel falls below `γ̂/Δ`.
pub fn empirical_outage(stats: &LinkStatistics, delta: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let mut hits = 0usize;
    for _ in 0..cfg.samples {
        let s = sample_joint_pair(stats.rho_tilde, stats.sigma_e_sq, &mut rng);
        if is_outage(s.gamma_next, s.gamma_hat, delta) {
            hits += 1;
        }
    }
    Ok(McEstimate::binomial(hits, cfg.samples))
}

/// Mean of `R(γ̂)·1[no outage]` with a batch-means standard error.
pub fn empirical_effective_rate(
    p: &RateAdaptParams,
    stats: &LinkStatistics,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let base = cfg.samples / cfg.batches;
    let extra = cfg.samples % cfg.batches;
    let mut batch_means = Vec::with_capacity(cfg.batches);
    let mut total = 0.0;
    for b in 0..cfg.batches {
        let n = base + usize::from(b < extra);
        let mut acc = 0.0;
        for _ in 0..n {
            let s = sample_joint_pair(stats.rho_tilde, stats.sigma_e_sq, &mut rng);
            if !is_outage(s.gamma_next, s.gamma_hat, p.delta) {
                acc += rate(s.gamma_hat, p);
            }
        }
        total += acc;
        batch_means.push(acc / n as f64);
    }
    let mean = total / cfg.samples as f64;
    Ok(McEstimate {
        mean,
        std_error: batch_std_error(&batch_means),
        samples_used: cfg.samples,
    })
}

fn batch_std_error(batch_means: &[f64]) -> f64 {
    let b = batch_means.len();
    if b < 2 {
        return 0.0;
    }
    let m = batch_means.iter().sum::<f64>() / b as f64;
    let var = batch_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Outage probability given a fixed estimate `γ̂`, sampling the next
/// channel from its exact conditional law.
pub fn empirical_conditional_outage(
    gamma_hat: f64,
    stats: &LinkStatistics,
    delta: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    empirical_conditional_outage_with_phase(gamma_hat, 0.0, stats, delta, cfg)
}

/// As [`empirical_conditional_outage`] with the estimate placed at phase
/// `phase` (radians). The result does not depend on the phase.
pub fn empirical_conditional_outage_with_phase(
    gamma_hat: f64,
    phase: f64,
    stats: &LinkStatistics,
    delta: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(gamma_hat >= 0.0 && gamma_hat.is_finite()) {
        return Err(Error::domain(
            "empirical_conditional_outage",
            format!("gamma_hat must be finite and non-negative, got {gamma_hat}"),
        ));
    }
    let s2 = stats.sigma_sq();
    // Regression of h_{l+1} on the estimate h_l + e_l.
    let coefficient = stats.rho_tilde / s2;
    let residual_var = (1.0 - stats.rho_tilde * stats.rho_tilde / s2).max(0.0);
    let h_hat = Complex64::from_polar(gamma_hat.sqrt(), phase);
    let mean = h_hat * coefficient;
    let threshold = gamma_hat / delta;
    let mut rng = cfg.rng();
    let mut hits = 0usize;
    for _ in 0..cfg.samples {
        let h_next = mean + complex_normal(&mut rng, residual_var);
        if h_next.norm_sqr() < threshold {
            hits += 1;
        }
    }
    Ok(McEstimate::binomial(hits, cfg.samples))
}

/// Grid on which the Monte Carlo oracle is checked against the analytic
/// outage probability and effective rate.
pub const AGREEMENT_RHO_TILDE: [f64; 4] = [0.0, 0.5, 0.9, 0.99];
pub const AGREEMENT_SIGMA_E_SQ: [f64; 3] = [0.0, 0.00544, 0.17];
pub const AGREEMENT_DELTA: [f64; 3] = [1.5, 2.0, 3.6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementCell {
    pub rho_tilde: f64,
    pub sigma_e_sq: f64,
    pub delta: f64,
    pub pout_exact: f64,
    pub pout_mc: McEstimate,
    pub rate_exact: f64,
    pub rate_mc: McEstimate,
}

impl AgreementCell {
    pub fn pout_agrees(&self, k: f64) -> bool {
        self.pout_mc.agrees_with(self.pout_exact, k)
    }

    pub fn rate_agrees(&self, k: f64) -> bool {
        self.rate_mc.agrees_with(self.rate_exact, k)
    }
}

/// Evaluates every cell of the agreement grid. Cell `i` draws from streams
/// `2i` and `2i + 1` under `base.seed`, so the result does not depend on
/// how cells are scheduled across threads.
pub fn agreement_grid(snr: f64, gamma_gap: f64, base: &McConfig) -> Result<Vec<AgreementCell>> {
    use rayon::prelude::*;

    base.validate()?;
    let mut points = Vec::new();
    for &rt in &AGREEMENT_RHO_TILDE {
        for &se in &AGREEMENT_SIGMA_E_SQ {
            for &d in &AGREEMENT_DELTA {
                points.push((rt, se, d));
            }
        }
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(rho_tilde, sigma_e_sq, delta))| {
            let stats = LinkStatistics::new(rho_tilde, sigma_e_sq)?;
            let p = RateAdaptParams::new(snr, delta, gamma_gap)?;
            let i = i as u64;
            Ok(AgreementCell {
                rho_tilde,
                sigma_e_sq,
                delta,
                pout_exact: crate::metrics::outage_probability(&stats, delta)?,
                pout_mc: empirical_outage(&stats, delta, &base.with_stream(2 * i))?,
                rate_exact: crate::metrics::average_effective_rate(
                    &p,
                    &stats,
                    crate::metrics::DEFAULT_RATE_TOL,
                )?,
                rate_mc: empirical_effective_rate(&p, &stats, &base.with_stream(2 * i + 1))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{self, DEFAULT_RATE_TOL};
    use approx::assert_abs_diff_eq;

    fn stats(rho_tilde: f64, sigma_e_sq: f64) -> LinkStatistics {
        LinkStatistics::new(rho_tilde, sigma_e_sq).unwrap()
    }

    #[test]
    fn outage_examples() {
        let e = empirical_outage(&stats(1.0, 0.0), 2.0, &McConfig::new(100_000, 1)).unwrap();
        assert_eq!(e.mean, 0.0);
        let e = empirical_outage(&stats(0.0, 0.0), 2.0, &McConfig::new(1_000_000, 2)).unwrap();
        assert!(e.agrees_with(1.0 / 3.0, 3.0), "{e:?}");
        assert_eq!(e.samples_used, 1_000_000);
    }

    #[test]
    fn same_seed_same_bits() {
        let cfg = McConfig::new(50_000, 77);
        let s = stats(0.9, 0.1);
        let a = empirical_outage(&s, 2.0, &cfg).unwrap();
        let b = empirical_outage(&s, 2.0, &cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let p = RateAdaptParams::new(3.0, 2.0, 1.25).unwrap();
        let a = empirical_effective_rate(&p, &s, &cfg).unwrap();
        let b = empirical_effective_rate(&p, &s, &cfg).unwrap();
        assert_eq!(a, b);
        let c = empirical_effective_rate(&p, &s, &cfg.with_stream(1)).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn effective_rate_examples() {
        let p = RateAdaptParams::new(1.0, 1.0, 1.0).unwrap();
        let e =
            empirical_effective_rate(&p, &stats(1.0, 0.0), &McConfig::new(1_000_000, 3)).unwrap();
        assert!(e.agrees_with(0.596_347_362_323_194, 3.0), "{e:?}");

        let p = RateAdaptParams::new(3.0, 1e12, 1.0).unwrap();
        let e = empirical_effective_rate(&p, &stats(0.9, 0.0), &McConfig::new(10_000, 3)).unwrap();
        assert!(e.mean < 1e-10);
    }

    #[test]
    fn effective_rate_matches_quadrature_for_full_duplex_operating_point() {
        // FDCSI at 15 km/h, 2 ms delay, inr = 0 dB, snr_dl = 5 dB, kappa = 0.1
        let rho_tilde = crate::channel::autocorrelation(
            crate::channel::doppler_frequency(15.0, 2e9).unwrap(),
            2e-3,
        )
        .unwrap();
        let sinr = crate::db_to_linear(5.0) / (0.1 * 2.0);
        let s = stats(rho_tilde, 0.0544 / sinr);
        let p = RateAdaptParams::new(
            crate::db_to_linear(5.0),
            crate::db_to_linear(3.0),
            crate::db_to_linear(1.0),
        )
        .unwrap();
        let q = metrics::average_effective_rate(&p, &s, DEFAULT_RATE_TOL).unwrap();
        let e = empirical_effective_rate(&p, &s, &McConfig::new(1_000_000, 4)).unwrap();
        assert!(e.agrees_with(q, 3.0), "{e:?} vs {q}");
        assert!((e.mean / q - 1.0).abs() < 0.005);
    }

    #[test]
    fn conditional_outage_examples() {
        let cfg = McConfig::new(1_000_000, 5);
        let e = empirical_conditional_outage(0.0, &stats(0.9, 0.1), 2.0, &cfg).unwrap();
        assert_eq!(e.mean, 0.0);
        let e = empirical_conditional_outage(1.0, &stats(0.0, 0.0), 2.0, &cfg).unwrap();
        assert!(e.agrees_with(1.0 - (-0.5f64).exp(), 3.0), "{e:?}");
        let s = stats(0.9696, 0.00544);
        let e = empirical_conditional_outage(1.0, &s, 1.9953, &cfg).unwrap();
        let closed = metrics::conditional_outage(1.0, &s, 1.9953);
        assert!(e.agrees_with(closed, 3.0), "{e:?} vs {closed}");
    }

    #[test]
    fn conditional_outage_is_phase_invariant() {
        let s = stats(0.8, 0.05);
        let cfg = McConfig::new(400_000, 6);
        let base = empirical_conditional_outage_with_phase(1.3, 0.0, &s, 1.7, &cfg).unwrap();
        for &phase in &[0.7, 2.0, -2.9] {
            let e =
                empirical_conditional_outage_with_phase(1.3, phase, &s, 1.7, &cfg.with_stream(9))
                    .unwrap();
            let se = (base.std_error.powi(2) + e.std_error.powi(2)).sqrt();
            assert!((e.mean - base.mean).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn conditional_outage_grid_matches_closed_form() {
        let cfg = McConfig::new(200_000, 8);
        let mut cells = 0;
        let mut pass = 0;
        for &rt in &[0.0, 0.5, 0.9, 0.99] {
            for &se in &[0.0, 0.00544, 0.17] {
                for &g in &[0.2, 1.0, 3.0] {
                    let s = stats(rt, se);
                    let e =
                        empirical_conditional_outage(g, &s, 2.0, &cfg.with_stream(cells)).unwrap();
                    cells += 1;
                    let c = metrics::conditional_outage(g, &s, 2.0);
                    // Reference standard error stays positive when no hits occur.
                    let se = (c * (1.0 - c) / cfg.samples as f64).sqrt();
                    if (e.mean - c).abs() <= 3.0 * se {
                        pass += 1;
                    }
                }
            }
        }
        // Rare-event cells hold only a handful of hits, where the normal
        // approximation to the binomial is loose; allow a few misses.
        assert!(pass as f64 >= 0.9 * cells as f64, "{pass}/{cells}");
    }

    #[test]
    fn agreement_grid_small() {
        let cells = agreement_grid(3.0, 1.25, &McConfig::new(20_000, 12)).unwrap();
        assert_eq!(cells.len(), 36);
        let again = agreement_grid(3.0, 1.25, &McConfig::new(20_000, 12)).unwrap();
        assert_eq!(cells, again);
        let ok = cells.iter().filter(|c| c.pout_agrees(3.0)).count();
        assert!(ok >= 33, "{ok}/36");
    }

    #[test]
    fn config_validation() {
        let mut cfg = McConfig::new(10, 0);
        assert!(cfg.validate().is_err());
        cfg.batches = 0;
        assert!(cfg.validate().is_err());
        cfg.batches = 1;
        assert!(cfg.validate().is_ok());
        let e = empirical_effective_rate(
            &RateAdaptParams::new(1.0, 1.0, 1.0).unwrap(),
            &stats(0.5, 0.0),
            &cfg,
        )
        .unwrap();
        assert_eq!(e.std_error, 0.0);
        assert_abs_diff_eq!(batch_std_error(&[1.0, 3.0]), 1.0, epsilon = 1e-15);
    }
}
