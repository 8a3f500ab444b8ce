//! Scenario configuration, the standard parameter sets and figure presets,
//! and sweep execution.
//!
//! The JSON boundary uses dB for powers and ratios, milliseconds for times
//! and km/h for speed; everything is converted to linear/SI exactly once in
//! [`run_sweep_with`].

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::FadingParams;
use crate::db_to_linear;
use crate::error::{Error, Result};
use crate::metrics::{self, LinkStatistics, DEFAULT_RATE_TOL};
use crate::montecarlo::{self, McConfig, McEstimate, DEFAULT_BATCHES};
use crate::schemes::{self, LinkBudget, Scheme};

pub const CSV_HEADER: [&str; 9] = [
    "scheme",
    "axis",
    "axis_value",
    "throughput_mnats",
    "pout",
    "mc_throughput",
    "mc_throughput_se",
    "mc_pout",
    "mc_pout_se",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    InrDb,
    SpeedKmh,
    RhoTilde,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::InrDb => "inr_db",
            SweepAxis::SpeedKmh => "speed_kmh",
            SweepAxis::RhoTilde => "rho_tilde",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// A scheme, optionally with its own downlink bandwidth fraction.
/// Written `NAME` or `NAME@kappa`, e.g. `FDDATA@0.2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SchemeEntry {
    pub scheme: Scheme,
    pub kappa: Option<f64>,
}

impl SchemeEntry {
    pub fn new(scheme: Scheme) -> Self {
        SchemeEntry {
            scheme,
            kappa: None,
        }
    }

    pub fn with_kappa(scheme: Scheme, kappa: f64) -> Self {
        SchemeEntry {
            scheme,
            kappa: Some(kappa),
        }
    }

    fn sort_key(&self, other: &Self) -> Ordering {
        self.scheme
            .cmp(&other.scheme)
            .then_with(|| match (self.kappa, other.kappa) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.total_cmp(&b),
            })
    }
}

impl fmt::Display for SchemeEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kappa {
            None => write!(f, "{}", self.scheme),
            Some(k) => write!(f, "{}@{}", self.scheme, k),
        }
    }
}

impl FromStr for SchemeEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, kappa) = match s.split_once('@') {
            None => (s, None),
            Some((name, k)) => {
                let k: f64 = k
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad kappa in scheme entry '{s}'")))?;
                (name, Some(k))
            }
        };
        Ok(SchemeEntry {
            scheme: name.trim().parse()?,
            kappa,
        })
    }
}

impl TryFrom<String> for SchemeEntry {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeEntry> for String {
    fn from(e: SchemeEntry) -> String {
        e.to_string()
    }
}

/// One analytic outage curve against `rho_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageCurve {
    pub delta_db: f64,
    pub sigma_e_sq: f64,
}

impl OutageCurve {
    pub fn label(&self) -> String {
        format!(
            "Pout(delta_db={},sigma_e_sq={})",
            self.delta_db, self.sigma_e_sq
        )
    }

    fn sort_key(&self, other: &Self) -> Ordering {
        self.delta_db
            .total_cmp(&other.delta_db)
            .then_with(|| self.sigma_e_sq.total_cmp(&other.sigma_e_sq))
    }
}

/// Backoff per scheme, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackoffDb {
    pub pcsi: f64,
    pub probe: f64,
    pub fdcsi: f64,
    pub fddata: f64,
}

impl BackoffDb {
    pub fn for_scheme(&self, s: Scheme) -> f64 {
        match s {
            Scheme::Pcsi => self.pcsi,
            Scheme::Probe => self.probe,
            Scheme::Fdcsi => self.fdcsi,
            Scheme::Fddata => self.fddata,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

fn default_rate_tol() -> f64 {
    DEFAULT_RATE_TOL
}

impl McSettings {
    fn config(&self, stream: u64) -> McConfig {
        McConfig {
            samples: self.samples,
            seed: self.seed,
            batches: self.batches,
            stream,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub carrier_hz: f64,
    pub speed_kmh: f64,
    pub snr_ul_db: f64,
    pub snr_dl_db: f64,
    pub inr_db: f64,
    pub kappa: f64,
    pub t_min_ms: f64,
    pub t_pr_ms: f64,
    pub c_e: f64,
    pub delta_db: BackoffDb,
    pub gamma_gap_db: f64,
    pub sweep: Sweep,
    #[serde(default)]
    pub schemes: Vec<SchemeEntry>,
    #[serde(default)]
    pub outage_curves: Vec<OutageCurve>,
    #[serde(default)]
    pub mc: Option<McSettings>,
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.sweep.values;
        if v.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "sweep grid must be finite and strictly increasing".into(),
            ));
        }
        let analytic_axis = self.sweep.axis == SweepAxis::RhoTilde;
        if analytic_axis && !self.schemes.is_empty() {
            return Err(Error::Config(
                "schemes cannot be swept over rho_tilde; use outage_curves".into(),
            ));
        }
        if !analytic_axis && !self.outage_curves.is_empty() {
            return Err(Error::Config(
                "outage_curves require the rho_tilde axis".into(),
            ));
        }
        if analytic_axis && v.iter().any(|r| r.abs() > 1.0) {
            return Err(Error::Config("rho_tilde grid must lie in [-1, 1]".into()));
        }
        for (i, a) in self.schemes.iter().enumerate() {
            if self.schemes[..i]
                .iter()
                .any(|b| a.sort_key(b) == Ordering::Equal)
            {
                return Err(Error::Config(format!("duplicate scheme entry {a}")));
            }
            if let Some(k) = a.kappa {
                if !(k > 0.0 && k <= 1.0) {
                    return Err(Error::Config(format!("kappa out of (0, 1] in {a}")));
                }
            }
        }
        for (i, a) in self.outage_curves.iter().enumerate() {
            if self.outage_curves[..i]
                .iter()
                .any(|b| a.sort_key(b) == Ordering::Equal)
            {
                return Err(Error::Config(format!(
                    "duplicate outage curve {}",
                    a.label()
                )));
            }
            if !(a.delta_db.is_finite() && a.sigma_e_sq.is_finite() && a.sigma_e_sq >= 0.0) {
                return Err(Error::Config(format!("invalid outage curve {}", a.label())));
            }
        }
        if !self.rate_tol.is_finite() || self.rate_tol <= 0.0 {
            return Err(Error::Config("rate_tol must be positive".into()));
        }
        for d in [
            self.delta_db.pcsi,
            self.delta_db.probe,
            self.delta_db.fdcsi,
            self.delta_db.fddata,
            self.gamma_gap_db,
        ] {
            if !d.is_finite() {
                return Err(Error::Config(
                    "backoff and gap must be finite dB values".into(),
                ));
            }
        }
        if let Some(mc) = &self.mc {
            mc.config(0).validate()?;
        }
        self.budget(self.inr_db, self.kappa)?.validate()?;
        FadingParams::new(self.carrier_hz, self.speed_kmh, 0.0)?;
        Ok(())
    }

    fn budget(&self, inr_db: f64, kappa: f64) -> Result<LinkBudget> {
        let b = LinkBudget {
            snr_ul: db_to_linear(self.snr_ul_db),
            snr_dl: db_to_linear(self.snr_dl_db),
            inr: db_to_linear(inr_db),
            kappa,
            t_min_s: self.t_min_ms * 1e-3,
            t_pr_s: self.t_pr_ms * 1e-3,
            c_e: self.c_e,
        };
        b.validate()?;
        Ok(b)
    }
}

/// Standard parameter set, evaluated at a single operating point.
pub fn default_scenario() -> ScenarioConfig {
    ScenarioConfig {
        name: "default".into(),
        carrier_hz: 2e9,
        speed_kmh: 15.0,
        snr_ul_db: 5.0,
        snr_dl_db: 5.0,
        inr_db: 0.0,
        kappa: 0.1,
        t_min_ms: 2.0,
        t_pr_ms: 4.0,
        c_e: 0.0544,
        delta_db: BackoffDb {
            pcsi: 0.0,
            probe: 5.6,
            fdcsi: 3.0,
            fddata: 5.6,
        },
        gamma_gap_db: 1.0,
        sweep: Sweep {
            axis: SweepAxis::InrDb,
            values: vec![0.0],
        },
        schemes: Scheme::ALL.iter().map(|&s| SchemeEntry::new(s)).collect(),
        outage_curves: Vec::new(),
        mc: None,
        rate_tol: DEFAULT_RATE_TOL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            _ => Err(Error::Config(format!(
                "unknown figure '{s}' (expected fig2, fig3 or fig4)"
            ))),
        }
    }
}

fn fddata_pair() -> [SchemeEntry; 2] {
    [
        SchemeEntry::with_kappa(Scheme::Fddata, 0.1),
        SchemeEntry::with_kappa(Scheme::Fddata, 0.2),
    ]
}

fn linspace(lo: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + step * i as f64).collect()
}

pub fn figure_preset(id: Figure) -> ScenarioConfig {
    let base = default_scenario();
    let mut schemes = vec![
        SchemeEntry::new(Scheme::Pcsi),
        SchemeEntry::new(Scheme::Probe),
        SchemeEntry::new(Scheme::Fdcsi),
    ];
    schemes.extend(fddata_pair());
    match id {
        Figure::Fig2 => ScenarioConfig {
            name: "fig2".into(),
            sweep: Sweep {
                axis: SweepAxis::RhoTilde,
                values: linspace(0.0, 0.05, 21),
            },
            schemes: Vec::new(),
            // Illustrative (backoff, estimation error) pairs: perfect and
            // probe-quality estimates at two backoffs, plus a poor estimate.
            outage_curves: vec![
                OutageCurve {
                    delta_db: 3.0,
                    sigma_e_sq: 0.0,
                },
                OutageCurve {
                    delta_db: 3.0,
                    sigma_e_sq: 0.0172,
                },
                OutageCurve {
                    delta_db: 5.6,
                    sigma_e_sq: 0.0172,
                },
                OutageCurve {
                    delta_db: 5.6,
                    sigma_e_sq: 0.17,
                },
            ],
            ..base
        },
        Figure::Fig3 => ScenarioConfig {
            name: "fig3".into(),
            snr_dl_db: 5.0,
            speed_kmh: 15.0,
            sweep: Sweep {
                axis: SweepAxis::InrDb,
                values: linspace(-10.0, 2.0, 16),
            },
            schemes,
            ..base
        },
        Figure::Fig4 => ScenarioConfig {
            name: "fig4".into(),
            snr_dl_db: 0.0,
            inr_db: -5.0,
            delta_db: BackoffDb {
                fdcsi: 3.1,
                ..base.delta_db
            },
            sweep: Sweep {
                axis: SweepAxis::SpeedKmh,
                values: linspace(5.0, 5.0, 10),
            },
            schemes,
            ..base
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Series {
    Scheme(SchemeEntry),
    Outage(OutageCurve),
}

impl Series {
    fn label(&self) -> String {
        match self {
            Series::Scheme(e) => e.to_string(),
            Series::Outage(c) => c.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: String,
    pub axis_value: f64,
    pub throughput_mnats: Option<f64>,
    pub pout: f64,
    pub mc_throughput: Option<McEstimate>,
    pub mc_pout: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Sub-streams per row; leaves room for two legs of two metrics each.
const STREAMS_PER_ROW: u64 = 8;

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    run_sweep_with(cfg, Execution::Parallel)
}

/// Evaluates every (series, grid point) pair. Rows come out sorted by
/// series then axis value whatever the execution mode, and Monte Carlo
/// streams are tied to the row index, so both modes give identical tables.
pub fn run_sweep_with(cfg: &ScenarioConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let mut schemes = cfg.schemes.clone();
    schemes.sort_by(|a, b| a.sort_key(b));
    let mut curves = cfg.outage_curves.clone();
    curves.sort_by(|a, b| a.sort_key(b));
    let series: Vec<Series> = schemes
        .into_iter()
        .map(Series::Scheme)
        .chain(curves.into_iter().map(Series::Outage))
        .collect();

    let tasks: Vec<(usize, Series, f64)> = series
        .iter()
        .flat_map(|s| cfg.sweep.values.iter().map(move |&x| (*s, x)))
        .enumerate()
        .map(|(i, (s, x))| (i, s, x))
        .collect();

    let eval = |&(i, s, x): &(usize, Series, f64)| {
        evaluate_point(cfg, s, x, i as u64).map_err(|e| Error::AtGridPoint {
            scheme: s.label(),
            axis: cfg.sweep.axis.to_string(),
            value: x,
            source: Box::new(e),
        })
    };
    let rows = match exec {
        Execution::Sequential => tasks.iter().map(eval).collect::<Result<Vec<_>>>()?,
        Execution::Parallel => tasks.par_iter().map(eval).collect::<Result<Vec<_>>>()?,
    };
    Ok(SweepResult {
        axis: cfg.sweep.axis,
        rows,
    })
}

fn evaluate_point(cfg: &ScenarioConfig, series: Series, x: f64, row: u64) -> Result<SweepRow> {
    let stream = |k: u64| row * STREAMS_PER_ROW + k;
    match series {
        Series::Outage(curve) => {
            let stats = LinkStatistics::new(x, curve.sigma_e_sq)?;
            let delta = db_to_linear(curve.delta_db);
            let pout = metrics::outage_probability(&stats, delta)?;
            let mc_pout = cfg
                .mc
                .map(|mc| montecarlo::empirical_outage(&stats, delta, &mc.config(stream(0))))
                .transpose()?;
            Ok(SweepRow {
                series: series.label(),
                axis_value: x,
                throughput_mnats: None,
                pout,
                mc_throughput: None,
                mc_pout,
            })
        }
        Series::Scheme(entry) => {
            let (inr_db, speed) = match cfg.sweep.axis {
                SweepAxis::InrDb => (x, cfg.speed_kmh),
                SweepAxis::SpeedKmh => (cfg.inr_db, x),
                SweepAxis::RhoTilde => unreachable!("rejected by validate"),
            };
            let budget = cfg.budget(inr_db, entry.kappa.unwrap_or(cfg.kappa))?;
            let fading = FadingParams::new(cfg.carrier_hz, speed, 0.0)?;
            let delta_db = cfg.delta_db.for_scheme(entry.scheme);
            let report = schemes::scheme_throughput(
                entry.scheme,
                &budget,
                &fading,
                delta_db,
                cfg.gamma_gap_db,
                cfg.rate_tol,
            )?;
            let (mc_throughput, mc_pout) = match cfg.mc {
                None => (None, None),
                Some(mc) => {
                    let legs = schemes::scheme_legs(
                        entry.scheme,
                        &budget,
                        &fading,
                        db_to_linear(delta_db),
                        db_to_linear(cfg.gamma_gap_db),
                    )?;
                    let mut mean = 0.0;
                    let mut var = 0.0;
                    for (k, leg) in legs.iter().enumerate() {
                        let e = montecarlo::empirical_effective_rate(
                            &leg.params,
                            &leg.stats,
                            &mc.config(stream(2 * k as u64)),
                        )?;
                        mean += leg.bandwidth_mhz * e.mean;
                        var += (leg.bandwidth_mhz * e.std_error).powi(2);
                    }
                    let up = &legs[0];
                    let pout = montecarlo::empirical_outage(
                        &up.stats,
                        up.params.delta,
                        &mc.config(stream(1)),
                    )?;
                    let throughput = McEstimate {
                        mean,
                        std_error: var.sqrt(),
                        samples_used: mc.samples * legs.len(),
                    };
                    (Some(throughput), Some(pout))
                }
            };
            Ok(SweepRow {
                series: series.label(),
                axis_value: x,
                throughput_mnats: Some(report.throughput_mnats_per_s),
                pout: report.pout,
                mc_throughput,
                mc_pout,
            })
        }
    }
}

/// Formats with 9 significant digits, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_sig9)
}

impl SweepResult {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Series labels in row order, without repeats.
    pub fn series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.series.as_str()) {
                out.push(&r.series);
            }
        }
        out
    }

    pub fn row(&self, series: &str, axis_value: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.series == series && r.axis_value == axis_value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            out.write_record([
                r.series.clone(),
                self.axis.to_string(),
                format_sig9(r.axis_value),
                opt(r.throughput_mnats),
                format_sig9(r.pout),
                opt(r.mc_throughput.map(|e| e.mean)),
                opt(r.mc_throughput.map(|e| e.std_error)),
                opt(r.mc_pout.map(|e| e.mean)),
                opt(r.mc_pout.map(|e| e.std_error)),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}
