//! The four CSI-acquisition schemes and their throughput at a 1 MHz
//! reference bandwidth.
//!
//! Each scheme is decomposed into one or two [`SchemeLeg`]s: a link with its
//! own data SNR, CSI statistics and bandwidth weight. Throughput is the
//! weighted sum of the legs' average effective rates, in Mnats/s.

use std::fmt;
use std::str::FromStr;

use crate::channel::{EstimationModel, FadingParams};
use crate::db_to_linear;
use crate::error::{Error, Result};
use crate::metrics::{self, LinkStatistics, RateAdaptParams};

/// Reference bandwidth of the throughput metric, in MHz.
pub const REFERENCE_BANDWIDTH_MHZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Perfect CSI: no delay, no estimation noise.
    Pcsi,
    /// Half-duplex probing with a round-trip delay.
    Probe,
    /// Full-duplex CSI acquisition from continuously broadcast pilots.
    Fdcsi,
    /// Full duplex used for downlink data; both directions probe.
    Fddata,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pcsi, Scheme::Probe, Scheme::Fdcsi, Scheme::Fddata];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pcsi => "PCSI",
            Scheme::Probe => "PROBE",
            Scheme::Fdcsi => "FDCSI",
            Scheme::Fddata => "FDDATA",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PCSI" => Ok(Scheme::Pcsi),
            "PROBE" => Ok(Scheme::Probe),
            "FDCSI" => Ok(Scheme::Fdcsi),
            "FDDATA" => Ok(Scheme::Fddata),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Link budget with all powers referred to 1 MHz, linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub snr_ul: f64,
    pub snr_dl: f64,
    pub inr: f64,
    /// Fraction of the 1 MHz reference used in the downlink.
    pub kappa: f64,
    pub t_min_s: f64,
    pub t_pr_s: f64,
    pub c_e: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.snr_ul) && pos(self.snr_dl)) {
            return Err(Error::Config("SNR values must be positive".into()));
        }
        if !(self.inr.is_finite() && self.inr >= 0.0) {
            return Err(Error::Config("inr must be non-negative".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 1], got {}",
                self.kappa
            )));
        }
        if !(pos(self.t_min_s) && self.t_min_s <= self.t_pr_s && self.t_pr_s.is_finite()) {
            return Err(Error::Config("need 0 < t_min <= t_pr".into()));
        }
        if !pos(self.c_e) {
            return Err(Error::Config("c_e must be positive".into()));
        }
        Ok(())
    }
}

/// SINR available for channel estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcquisitionSnr {
    /// Error-free estimation.
    Unbounded,
    Finite(f64),
}

impl AcquisitionSnr {
    pub fn sigma_e_sq(self, c_e: f64) -> Result<f64> {
        match self {
            AcquisitionSnr::Unbounded => Ok(0.0),
            AcquisitionSnr::Finite(sinr) => EstimationModel {
                c_e,
                sinr_csi: sinr,
            }
            .sigma_e_sq(),
        }
    }
}

/// A power at 1 MHz rescaled to a fraction `kappa` of that bandwidth.
/// Noise shrinks with the bandwidth; self-interference shrinks with it too,
/// so the INR is carried through unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandScaled {
    pub snr: f64,
    pub inr: f64,
}

pub fn scale_snr(snr_1mhz: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::domain(
            "scale_snr",
            format!("kappa must lie in (0, 1], got {kappa}"),
        ));
    }
    Ok(snr_1mhz / kappa)
}

pub fn scale_to_bandwidth(snr_1mhz: f64, inr: f64, kappa: f64) -> Result<BandScaled> {
    Ok(BandScaled {
        snr: scale_snr(snr_1mhz, kappa)?,
        inr,
    })
}

/// Pilot SINR of a full-duplex receiver using `kappa` of the downlink band.
pub fn full_duplex_sinr(snr_dl: f64, inr: f64, kappa: f64) -> Result<f64> {
    let scaled = scale_to_bandwidth(snr_dl, inr, kappa)?;
    Ok(scaled.snr / (1.0 + scaled.inr))
}

/// Estimation SINR of the scheme's uplink CSI.
pub fn scheme_sinr_csi(tag: Scheme, budget: &LinkBudget) -> Result<AcquisitionSnr> {
    Ok(match tag {
        Scheme::Pcsi => AcquisitionSnr::Unbounded,
        Scheme::Probe | Scheme::Fddata => AcquisitionSnr::Finite(budget.snr_ul),
        Scheme::Fdcsi => {
            AcquisitionSnr::Finite(full_duplex_sinr(budget.snr_dl, budget.inr, budget.kappa)?)
        }
    })
}

/// Estimation SINR of the downlink data leg of [`Scheme::Fddata`].
pub fn fddata_downlink_sinr_csi(budget: &LinkBudget) -> Result<AcquisitionSnr> {
    Ok(AcquisitionSnr::Finite(full_duplex_sinr(
        budget.snr_dl,
        budget.inr,
        budget.kappa,
    )?))
}

/// CSI delay of a scheme.
pub fn scheme_csi_delay(tag: Scheme, budget: &LinkBudget) -> f64 {
    match tag {
        Scheme::Pcsi => 0.0,
        Scheme::Probe | Scheme::Fddata => budget.t_pr_s,
        Scheme::Fdcsi => budget.t_min_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegDirection {
    Uplink,
    Downlink,
}

/// One link contributing to a scheme's throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeLeg {
    pub direction: LegDirection,
    pub params: RateAdaptParams,
    pub stats: LinkStatistics,
    /// Bandwidth in MHz this leg occupies.
    pub bandwidth_mhz: f64,
}

/// Decompose a scheme into its legs. `fading.csi_delay_s` is ignored; the
/// delay follows from the scheme.
pub fn scheme_legs(
    tag: Scheme,
    budget: &LinkBudget,
    fading: &FadingParams,
    delta: f64,
    gamma_gap: f64,
) -> Result<Vec<SchemeLeg>> {
    budget.validate()?;
    let delayed = FadingParams {
        csi_delay_s: scheme_csi_delay(tag, budget),
        ..*fading
    };
    delayed.validate()?;
    let rho_tilde = delayed.autocorrelation()?;
    let uplink = SchemeLeg {
        direction: LegDirection::Uplink,
        params: RateAdaptParams::new(budget.snr_ul, delta, gamma_gap)?,
        stats: LinkStatistics::new(
            rho_tilde,
            scheme_sinr_csi(tag, budget)?.sigma_e_sq(budget.c_e)?,
        )?,
        bandwidth_mhz: REFERENCE_BANDWIDTH_MHZ,
    };
    if tag != Scheme::Fddata {
        return Ok(vec![uplink]);
    }
    // No inter-BS interference term: the downlink SINR is SNR/(1+INR) only.
    let dl_snr = full_duplex_sinr(budget.snr_dl, budget.inr, budget.kappa)?;
    let downlink = SchemeLeg {
        direction: LegDirection::Downlink,
        params: RateAdaptParams::new(dl_snr, delta, gamma_gap)?,
        stats: LinkStatistics::new(
            rho_tilde,
            fddata_downlink_sinr_csi(budget)?.sigma_e_sq(budget.c_e)?,
        )?,
        bandwidth_mhz: budget.kappa * REFERENCE_BANDWIDTH_MHZ,
    };
    Ok(vec![uplink, downlink])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FddataComponents {
    pub uplink_mnats_per_s: f64,
    pub downlink_mnats_per_s: f64,
    pub uplink_pout: f64,
    pub downlink_pout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub scheme: Scheme,
    pub throughput_mnats_per_s: f64,
    /// PCSI: zero by definition. FDDATA: the uplink leg.
    pub pout: f64,
    pub components: Option<FddataComponents>,
}

/// Throughput and outage of a scheme. Backoff and SNR gap are in dB.
pub fn scheme_throughput(
    tag: Scheme,
    budget: &LinkBudget,
    fading: &FadingParams,
    delta_db: f64,
    gamma_gap_db: f64,
    tol: f64,
) -> Result<ThroughputReport> {
    let legs = scheme_legs(
        tag,
        budget,
        fading,
        db_to_linear(delta_db),
        db_to_linear(gamma_gap_db),
    )?;
    let mut per_leg = Vec::with_capacity(legs.len());
    for leg in &legs {
        let eta = metrics::average_effective_rate(&leg.params, &leg.stats, tol)?;
        let pout = metrics::outage_probability(&leg.stats, leg.params.delta)?;
        per_leg.push((leg.bandwidth_mhz * eta, pout));
    }
    let throughput = per_leg.iter().map(|(t, _)| t).sum();
    let pout = if tag == Scheme::Pcsi {
        0.0
    } else {
        per_leg[0].1
    };
    let components = (tag == Scheme::Fddata).then(|| FddataComponents {
        uplink_mnats_per_s: per_leg[0].0,
        downlink_mnats_per_s: per_leg[1].0,
        uplink_pout: per_leg[0].1,
        downlink_pout: per_leg[1].1,
    });
    Ok(ThroughputReport {
        scheme: tag,
        throughput_mnats_per_s: throughput,
        pout,
        components,
    })
}
