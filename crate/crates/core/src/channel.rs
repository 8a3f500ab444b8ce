//! Physical-layer parameterisation of the link: Doppler spread, temporal
//! correlation of the fading, channel-estimation error, correlated sample
//! generation and a symbol-level model of full-duplex pilot reception.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::specfun;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Returned by [`coherence_symbol_budget`] for a static terminal.
pub const UNBOUNDED_COHERENCE: u64 = (1 << 31) - 1;

/// First positive zero of J0.
const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub carrier_hz: f64,
    pub speed_kmh: f64,
    pub csi_delay_s: f64,
}

impl FadingParams {
    pub fn new(carrier_hz: f64, speed_kmh: f64, csi_delay_s: f64) -> Result<Self> {
        let p = FadingParams {
            carrier_hz,
            speed_kmh,
            csi_delay_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::domain("FadingParams", "carrier must be positive"));
        }
        if !(self.speed_kmh.is_finite() && self.speed_kmh >= 0.0) {
            return Err(Error::domain("FadingParams", "speed must be non-negative"));
        }
        if !(self.csi_delay_s.is_finite() && self.csi_delay_s >= 0.0) {
            return Err(Error::domain(
                "FadingParams",
                "CSI delay must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn doppler_hz(&self) -> Result<f64> {
        doppler_frequency(self.speed_kmh, self.carrier_hz)
    }

    /// Correlation between the channel at estimation time and at use time.
    pub fn autocorrelation(&self) -> Result<f64> {
        autocorrelation(self.doppler_hz()?, self.csi_delay_s)
    }
}

/// Channel-estimation quality: `sigma_e² = c_e / sinr_csi`.
///
/// An infinite `sinr_csi` is accepted and yields a perfect estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationModel {
    pub c_e: f64,
    pub sinr_csi: f64,
}

impl EstimationModel {
    pub fn sigma_e_sq(&self) -> Result<f64> {
        estimation_variance(self)
    }

    /// Mean of the estimated instantaneous SNR.
    pub fn sigma_sq(&self) -> Result<f64> {
        Ok(1.0 + self.sigma_e_sq()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfInterferenceParams {
    /// Linear residual self-interference-to-noise ratio.
    pub inr: f64,
    /// Mean of the residual self-interference channel.
    pub mu: Complex64,
}

impl SelfInterferenceParams {
    pub fn new(inr: f64) -> Self {
        SelfInterferenceParams {
            inr,
            mu: Complex64::new(0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotSimConfig {
    pub n_bs: usize,
    pub pilot_len: usize,
    /// Linear downlink SNR of each base station, indexed from BS 1.
    pub snr_dl_per_bs: Vec<f64>,
    pub si: SelfInterferenceParams,
}

impl PilotSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 {
            return Err(Error::Config(
                "at least one base station is required".into(),
            ));
        }
        if self.pilot_len < self.n_bs {
            return Err(Error::Config(format!(
                "{} orthogonal pilots need length >= {}, got {}",
                self.n_bs, self.n_bs, self.pilot_len
            )));
        }
        if self.snr_dl_per_bs.len() != self.n_bs {
            return Err(Error::Config(format!(
                "expected {} downlink SNRs, got {}",
                self.n_bs,
                self.snr_dl_per_bs.len()
            )));
        }
        if self
            .snr_dl_per_bs
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::Config("downlink SNRs must be positive".into()));
        }
        if !(self.si.inr.is_finite() && self.si.inr >= 0.0) {
            return Err(Error::Config("inr must be non-negative".into()));
        }
        Ok(())
    }
}

/// Estimated SNR at the last estimate and true SNR at the next use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub gamma_hat: f64,
    pub gamma_next: f64,
}

pub fn doppler_frequency(speed_kmh: f64, carrier_hz: f64) -> Result<f64> {
    if !(speed_kmh.is_finite() && speed_kmh >= 0.0) {
        return Err(Error::domain(
            "doppler_frequency",
            format!("speed must be non-negative, got {speed_kmh}"),
        ));
    }
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(Error::domain(
            "doppler_frequency",
            format!("carrier must be positive, got {carrier_hz}"),
        ));
    }
    Ok(speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT)
}

/// Clarke/Jakes correlation `J0(2π f_d τ)`.
pub fn autocorrelation(f_d: f64, delay_s: f64) -> Result<f64> {
    if !(f_d.is_finite() && f_d >= 0.0) || !(delay_s.is_finite() && delay_s >= 0.0) {
        return Err(Error::domain(
            "autocorrelation",
            format!("need f_d >= 0 and delay >= 0, got ({f_d}, {delay_s})"),
        ));
    }
    specfun::bessel_j0(2.0 * std::f64::consts::PI * f_d * delay_s)
}

pub fn estimation_variance(model: &EstimationModel) -> Result<f64> {
    if !(model.c_e.is_finite() && model.c_e > 0.0) {
        return Err(Error::domain(
            "estimation_variance",
            format!("c_e must be positive, got {}", model.c_e),
        ));
    }
    if model.sinr_csi.is_nan() || model.sinr_csi <= 0.0 {
        return Err(Error::domain(
            "estimation_variance",
            format!("sinr_csi must be positive, got {}", model.sinr_csi),
        ));
    }
    Ok(model.c_e / model.sinr_csi)
}

/// Correlation between the noisy estimate and the future channel.
pub fn normalized_correlation(rho_tilde: f64, sigma_e_sq: f64) -> f64 {
    rho_tilde / (1.0 + sigma_e_sq).sqrt()
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Draws `(h_l + e_l, h_{l+1})` with `h_{l+1} = ρ̃ h_l + sqrt(1-ρ̃²) w`.
pub fn sample_joint_channels<R: Rng + ?Sized>(
    rho_tilde: f64,
    sigma_e_sq: f64,
    rng: &mut R,
) -> (Complex64, Complex64) {
    let h = complex_normal(rng, 1.0);
    let w = complex_normal(rng, 1.0);
    let e = if sigma_e_sq > 0.0 {
        complex_normal(rng, sigma_e_sq)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let innovation = (1.0 - rho_tilde * rho_tilde).max(0.0).sqrt();
    (h + e, h * rho_tilde + w * innovation)
}

pub fn sample_joint_pair<R: Rng + ?Sized>(
    rho_tilde: f64,
    sigma_e_sq: f64,
    rng: &mut R,
) -> JointSample {
    let (h_hat, h_next) = sample_joint_channels(rho_tilde, sigma_e_sq, rng);
    JointSample {
        gamma_hat: h_hat.norm_sqr(),
        gamma_next: h_next.norm_sqr(),
    }
}

/// Row `j` (zero-based) of the `len`-point DFT matrix; unit-modulus entries.
pub fn pilot_sequence(j: usize, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| {
            let phase = -2.0 * std::f64::consts::PI * ((j * n) % len) as f64 / len as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

fn inner(p: &[Complex64], y: &[Complex64]) -> Complex64 {
    p.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Per-symbol SINR of the least-squares pilot estimate for `target_bs`
/// (1-based), measured over `blocks` independent received blocks.
///
/// Each block is `Σ_j sqrt(snr_j) h_j p_j + sqrt(inr) h0 s + n`. After
/// projecting on `p_target / L` the desired part is `sqrt(snr) h_target`;
/// everything else is disturbance. The returned ratio divides out the
/// pilot processing gain `L`, so its expectation is `snr / (1 + inr)` for
/// a zero-mean residual channel.
pub fn simulate_pilot_sinr<R: Rng + ?Sized>(
    cfg: &PilotSimConfig,
    target_bs: usize,
    blocks: usize,
    rng: &mut R,
) -> Result<f64> {
    let stats = run_pilot_blocks(cfg, target_bs, blocks, rng)?;
    Ok(stats.signal_power / (cfg.pilot_len as f64 * stats.disturbance_power))
}

/// Power of base station `source_bs` leaking into the projection for
/// `target_bs`, relative to the power that source delivers into its own
/// projection. Zero up to rounding for orthogonal pilots.
pub fn simulate_pilot_leakage<R: Rng + ?Sized>(
    cfg: &PilotSimConfig,
    source_bs: usize,
    target_bs: usize,
    blocks: usize,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    check_bs_index(cfg, source_bs)?;
    check_bs_index(cfg, target_bs)?;
    if blocks == 0 {
        return Err(Error::Config("at least one block is required".into()));
    }
    let len = cfg.pilot_len;
    let p_src = pilot_sequence(source_bs - 1, len);
    let p_dst = pilot_sequence(target_bs - 1, len);
    let amp = cfg.snr_dl_per_bs[source_bs - 1].sqrt();
    let mut leaked = 0.0;
    let mut own = 0.0;
    let mut rx = vec![Complex64::new(0.0, 0.0); len];
    for _ in 0..blocks {
        let h = complex_normal(rng, 1.0);
        for (r, p) in rx.iter_mut().zip(&p_src) {
            *r = *p * (h * amp);
        }
        leaked += (inner(&p_dst, &rx) / len as f64).norm_sqr();
        own += (inner(&p_src, &rx) / len as f64).norm_sqr();
    }
    Ok(leaked / own)
}

struct PilotStats {
    signal_power: f64,
    disturbance_power: f64,
}

fn check_bs_index(cfg: &PilotSimConfig, bs: usize) -> Result<()> {
    if bs == 0 || bs > cfg.n_bs {
        return Err(Error::Config(format!(
            "base station index {bs} outside 1..={}",
            cfg.n_bs
        )));
    }
    Ok(())
}

fn run_pilot_blocks<R: Rng + ?Sized>(
    cfg: &PilotSimConfig,
    target_bs: usize,
    blocks: usize,
    rng: &mut R,
) -> Result<PilotStats> {
    cfg.validate()?;
    check_bs_index(cfg, target_bs)?;
    if blocks == 0 {
        return Err(Error::Config("at least one block is required".into()));
    }
    let len = cfg.pilot_len;
    let pilots: Vec<Vec<Complex64>> = (0..cfg.n_bs).map(|j| pilot_sequence(j, len)).collect();
    let amps: Vec<f64> = cfg.snr_dl_per_bs.iter().map(|s| s.sqrt()).collect();
    let si_amp = cfg.si.inr.sqrt();
    let target = target_bs - 1;

    let mut rx = vec![Complex64::new(0.0, 0.0); len];
    let mut gains = vec![Complex64::new(0.0, 0.0); cfg.n_bs];
    let mut signal_power = 0.0;
    let mut disturbance_power = 0.0;
    for _ in 0..blocks {
        for g in gains.iter_mut() {
            *g = complex_normal(rng, 1.0);
        }
        let h0 = cfg.si.mu + complex_normal(rng, 1.0);
        for (n, r) in rx.iter_mut().enumerate() {
            let mut v = complex_normal(rng, 1.0);
            let s = complex_normal(rng, 1.0);
            v += h0 * s * si_amp;
            for j in 0..cfg.n_bs {
                v += pilots[j][n] * (gains[j] * amps[j]);
            }
            *r = v;
        }
        let estimate = inner(&pilots[target], &rx) / len as f64;
        let desired = gains[target] * amps[target];
        signal_power += desired.norm_sqr();
        disturbance_power += (estimate - desired).norm_sqr();
    }
    Ok(PilotStats {
        signal_power: signal_power / blocks as f64,
        disturbance_power: disturbance_power / blocks as f64,
    })
}

/// Number of symbols at `bandwidth_hz` that fit before the channel
/// correlation drops to `corr_threshold`.
pub fn coherence_symbol_budget(
    speed_kmh: f64,
    carrier_hz: f64,
    bandwidth_hz: f64,
    corr_threshold: f64,
) -> Result<u64> {
    if !(corr_threshold > 0.0 && corr_threshold < 1.0) {
        return Err(Error::domain(
            "coherence_symbol_budget",
            format!("threshold must lie in (0, 1), got {corr_threshold}"),
        ));
    }
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::domain(
            "coherence_symbol_budget",
            format!("bandwidth must be positive, got {bandwidth_hz}"),
        ));
    }
    let f_d = doppler_frequency(speed_kmh, carrier_hz)?;
    if f_d == 0.0 {
        return Ok(UNBOUNDED_COHERENCE);
    }
    // J0 falls monotonically from 1 to 0 on [0, first zero].
    let (mut lo, mut hi) = (0.0, J0_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if specfun::j0_unchecked(mid) > corr_threshold {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    let t_star = 0.5 * (lo + hi) / (2.0 * std::f64::consts::PI * f_d);
    let symbols = (bandwidth_hz * t_star).floor();
    Ok(if symbols >= UNBOUNDED_COHERENCE as f64 {
        UNBOUNDED_COHERENCE
    } else {
        symbols as u64
    })
}
