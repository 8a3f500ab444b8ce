mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fdcsi::channel::{simulate_pilot_sinr, FadingParams, PilotSimConfig, SelfInterferenceParams};
use fdcsi::metrics::{self, LinkStatistics, RateAdaptParams, DEFAULT_RATE_TOL};
use fdcsi::montecarlo::{agreement_grid, McConfig};
use fdcsi::scenario::{
    default_scenario, figure_preset, run_sweep, Figure, McSettings, ScenarioConfig, SchemeEntry,
    SweepResult,
};
use fdcsi::schemes::{scheme_throughput, LinkBudget};
use fdcsi::{db_to_linear, Error};

/// Outage, effective rate and throughput of uplink rate adaptation with
/// delayed, noisy CSI at the transmitter.
#[derive(Debug, Parser)]
#[command(name = "fdcsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average outage probability.
    Pout(LinkStatArgs),
    /// Rate selected for one SNR estimate, in nats/s/Hz.
    Rate {
        #[arg(long, allow_hyphen_values = true)]
        gamma_hat_db: f64,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta_db: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma_gap_db: f64,
    },
    /// Average effective rate, in nats/s/Hz.
    Ase {
        #[command(flatten)]
        link: LinkStatArgs,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma_gap_db: f64,
        #[arg(long, default_value_t = DEFAULT_RATE_TOL)]
        tol: f64,
    },
    /// Throughput report for one scheme, e.g. FDCSI or FDDATA@0.2.
    Throughput {
        #[arg(long)]
        scheme: SchemeEntry,
        #[command(flatten)]
        overrides: Overrides,
        /// Backoff in dB; defaults to the scheme's standard value.
        #[arg(long, allow_hyphen_values = true)]
        delta_db: Option<f64>,
    },
    /// Run a sweep described by a JSON scenario file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a figure preset.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare Monte Carlo estimates against the analytic metrics on the
    /// agreement grid; succeeds iff at least 99% of cells pass.
    McValidate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma_gap_db: f64,
    },
    /// Symbol-level simulation of the full-duplex pilot SINR at BS 1.
    PilotSim {
        #[arg(long, default_value_t = 1)]
        n_bs: usize,
        #[arg(long, default_value_t = 16)]
        pilot_len: usize,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        snr_dl_db: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        inr_db: f64,
        #[arg(long, default_value_t = 100_000)]
        blocks: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct LinkStatArgs {
    #[arg(long, allow_hyphen_values = true)]
    rho_tilde: f64,
    #[arg(long)]
    sigma_e_sq: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta_db: f64,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    snr_ul_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_dl_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    inr_db: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    speed_kmh: Option<f64>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    t_min_ms: Option<f64>,
    #[arg(long)]
    t_pr_ms: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_gap_db: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Add Monte Carlo columns.
    #[arg(long)]
    mc: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FigureId {
    Fig2,
    Fig3,
    Fig4,
}

const DEFAULT_SWEEP_SAMPLES: usize = 100_000;
const DEFAULT_SEED: u64 = 1;

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, Failure> {
    let mut stdout = io::stdout().lock();
    match cmd {
        Command::Pout(a) => {
            let stats = LinkStatistics::new(a.rho_tilde, a.sigma_e_sq)?;
            let p = metrics::outage_probability(&stats, db_to_linear(a.delta_db))?;
            writeln!(stdout, "{p:.6}")?;
        }
        Command::Rate {
            gamma_hat_db,
            snr_db,
            delta_db,
            gamma_gap_db,
        } => {
            let p = RateAdaptParams::new(
                db_to_linear(snr_db),
                db_to_linear(delta_db),
                db_to_linear(gamma_gap_db),
            )?;
            writeln!(
                stdout,
                "{:.6}",
                metrics::rate(db_to_linear(gamma_hat_db), &p)
            )?;
        }
        Command::Ase {
            link,
            snr_db,
            gamma_gap_db,
            tol,
        } => {
            let stats = LinkStatistics::new(link.rho_tilde, link.sigma_e_sq)?;
            let p = RateAdaptParams::new(
                db_to_linear(snr_db),
                db_to_linear(link.delta_db),
                db_to_linear(gamma_gap_db),
            )?;
            writeln!(
                stdout,
                "{:.6}",
                metrics::average_effective_rate(&p, &stats, tol)?
            )?;
        }
        Command::Throughput {
            scheme,
            overrides,
            delta_db,
        } => throughput(&mut stdout, scheme, &overrides, delta_db)?,
        Command::Sweep { config, output } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", config.display())))?;
            let cfg = ScenarioConfig::from_json(&text)?;
            emit(&mut stdout, cfg, &output)?;
        }
        Command::Figure { id, output } => {
            let fig = match id {
                FigureId::Fig2 => Figure::Fig2,
                FigureId::Fig3 => Figure::Fig3,
                FigureId::Fig4 => Figure::Fig4,
            };
            emit(&mut stdout, figure_preset(fig), &output)?;
        }
        Command::McValidate {
            seed,
            samples,
            snr_db,
            gamma_gap_db,
        } => return mc_validate(&mut stdout, seed, samples, snr_db, gamma_gap_db),
        Command::PilotSim {
            n_bs,
            pilot_len,
            snr_dl_db,
            inr_db,
            blocks,
            seed,
        } => {
            let cfg = PilotSimConfig {
                n_bs,
                pilot_len,
                snr_dl_per_bs: vec![db_to_linear(snr_dl_db); n_bs],
                si: SelfInterferenceParams::new(db_to_linear(inr_db)),
            };
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sim = simulate_pilot_sinr(&cfg, 1, blocks, &mut rng)?;
            let predicted = db_to_linear(snr_dl_db) / (1.0 + db_to_linear(inr_db));
            writeln!(stdout, "simulated_sinr: {sim:.6}")?;
            writeln!(stdout, "predicted_sinr: {predicted:.6}")?;
            writeln!(
                stdout,
                "relative_error: {:.6}",
                (sim / predicted - 1.0).abs()
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn throughput(
    out: &mut impl Write,
    entry: SchemeEntry,
    o: &Overrides,
    delta_db: Option<f64>,
) -> Result<(), Failure> {
    let d = default_scenario();
    let budget = LinkBudget {
        snr_ul: db_to_linear(o.snr_ul_db.unwrap_or(d.snr_ul_db)),
        snr_dl: db_to_linear(o.snr_dl_db.unwrap_or(d.snr_dl_db)),
        inr: db_to_linear(o.inr_db.unwrap_or(d.inr_db)),
        kappa: entry.kappa.or(o.kappa).unwrap_or(d.kappa),
        t_min_s: o.t_min_ms.unwrap_or(d.t_min_ms) * 1e-3,
        t_pr_s: o.t_pr_ms.unwrap_or(d.t_pr_ms) * 1e-3,
        c_e: d.c_e,
    };
    budget
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let fading = FadingParams::new(
        o.carrier_hz.unwrap_or(d.carrier_hz),
        o.speed_kmh.unwrap_or(d.speed_kmh),
        0.0,
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let report = scheme_throughput(
        entry.scheme,
        &budget,
        &fading,
        delta_db.unwrap_or(d.delta_db.for_scheme(entry.scheme)),
        o.gamma_gap_db.unwrap_or(d.gamma_gap_db),
        DEFAULT_RATE_TOL,
    )?;
    writeln!(out, "scheme: {entry}")?;
    writeln!(
        out,
        "throughput_mnats_per_s: {:.6}",
        report.throughput_mnats_per_s
    )?;
    writeln!(out, "pout: {:.6}", report.pout)?;
    if let Some(c) = report.components {
        writeln!(out, "uplink_mnats_per_s: {:.6}", c.uplink_mnats_per_s)?;
        writeln!(out, "downlink_mnats_per_s: {:.6}", c.downlink_mnats_per_s)?;
        writeln!(out, "downlink_pout: {:.6}", c.downlink_pout)?;
    }
    Ok(())
}

fn emit(stdout: &mut impl Write, mut cfg: ScenarioConfig, o: &OutputArgs) -> Result<(), Failure> {
    if o.mc || o.seed.is_some() || o.samples.is_some() {
        let base = cfg.mc.unwrap_or(McSettings {
            samples: DEFAULT_SWEEP_SAMPLES,
            seed: DEFAULT_SEED,
            batches: fdcsi::montecarlo::DEFAULT_BATCHES,
        });
        cfg.mc = Some(McSettings {
            samples: o.samples.unwrap_or(base.samples),
            seed: o.seed.unwrap_or(base.seed),
            ..base
        });
    }
    cfg.validate()?;
    let result = run_sweep(&cfg)?;
    let bytes = render(&result, o.format)?;
    match &o.out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

fn render(result: &SweepResult, format: Format) -> Result<Vec<u8>, Failure> {
    match format {
        Format::Csv => Ok(result.to_csv().into_bytes()),
        Format::Svg => svg::render(result)
            .map(String::into_bytes)
            .ok_or_else(|| Failure::Usage("nothing to plot: the sweep produced no rows".into())),
    }
}

fn mc_validate(
    out: &mut impl Write,
    seed: u64,
    samples: usize,
    snr_db: f64,
    gamma_gap_db: f64,
) -> Result<ExitCode, Failure> {
    let cfg = McConfig::new(samples, seed);
    let cells = agreement_grid(db_to_linear(snr_db), db_to_linear(gamma_gap_db), &cfg)?;
    writeln!(
        out,
        "rho_tilde,sigma_e_sq,delta,pout,mc_pout,mc_pout_se,pout_ok,rate,mc_rate,mc_rate_se,rate_ok"
    )?;
    for c in &cells {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.2e},{},{:.6},{:.6},{:.2e},{}",
            c.rho_tilde,
            c.sigma_e_sq,
            c.delta,
            c.pout_exact,
            c.pout_mc.mean,
            c.pout_mc.std_error,
            c.pout_agrees(3.0),
            c.rate_exact,
            c.rate_mc.mean,
            c.rate_mc.std_error,
            c.rate_agrees(3.0)
        )?;
    }
    let n = cells.len();
    let pout_ok = cells.iter().filter(|c| c.pout_agrees(3.0)).count();
    let rate_ok = cells.iter().filter(|c| c.rate_agrees(3.0)).count();
    writeln!(out, "pout: {pout_ok}/{n} cells within 3 standard errors")?;
    writeln!(out, "rate: {rate_ok}/{n} cells within 3 standard errors")?;
    let enough = |k: usize| k as f64 >= 0.99 * n as f64;
    Ok(if enough(pout_ok) && enough(rate_ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
