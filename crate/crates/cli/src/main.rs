use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use phonon_twin::config::RunConfig;
use phonon_twin::dynamics::{integrate_langevin, LangevinOptions, OscillatorState};
use phonon_twin::experiments::{fit_scale, run_campaign, simulate_gate, Campaign, Scenario};
use phonon_twin::fit::{fit_histogram, initial_guess, FitModelParams, FrozenMask, Param};
use phonon_twin::io::{atomic_write, key_value_text};
use phonon_twin::photon::TacHistogram;

const OUT_ENV: &str = "PHONON_TWIN_OUT";

#[derive(Parser)]
#[command(name = "phonon-twin", version, about = "Phonon-laser force sensor twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one measurement gate and write its TAC histogram.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Injection voltage in V; defaults to the config value.
        #[arg(long)]
        voltage: Option<f64>,
        /// Also integrate the full equation of motion for this many seconds.
        #[arg(long, value_name = "SECONDS")]
        trajectory: Option<f64>,
    },
    /// Fit a TAC histogram file and write a fit report.
    Fit {
        histogram: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated parameters to hold fixed, "none", or "all-but-<list>".
        #[arg(long)]
        freeze: Option<String>,
        /// Initial values as name=value pairs, e.g. "amplitude=21e-6,phase=0.1".
        #[arg(long)]
        init: Option<String>,
        /// Report path; defaults to <out>/<histogram stem>.fit.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a measurement campaign: calibrate, sweep-amplitude, sweep-squeeze, lower-bound or sensitivity.
    Campaign {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::NotConverged(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Outcome<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| cfg.output.dir.clone())
}

fn write(path: &Path, body: &str) -> Outcome<()> {
    atomic_write(path, body.as_bytes()).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn simulate(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    voltage: Option<f64>,
    trajectory: Option<f64>,
) -> Outcome<()> {
    let cfg = load_config(config.as_deref(), seed)?;
    let voltage = voltage.unwrap_or(cfg.physics.drive.injection_voltage);
    if !voltage.is_finite() {
        return Err(usage("voltage must be finite"));
    }
    let dir = out_dir(out, &cfg);
    let sc = Scenario::from_config(cfg).map_err(usage)?;
    let seed = sc.config.seed;
    let (amplitude, phase, hist) = simulate_gate(&sc, voltage, seed).map_err(runtime)?;
    write(&dir.join("histogram.tac"), &hist.to_text())?;

    let mut summary = vec![
        ("config_hash".to_string(), sc.hash.clone()),
        ("seed".into(), seed.to_string()),
        ("voltage_v".into(), format!("{voltage:e}")),
        ("amplitude_m".into(), format!("{amplitude:e}")),
        ("phase_rad".into(), format!("{phase:e}")),
        ("total_counts".into(), hist.total_counts.to_string()),
        ("bins".into(), hist.counts.len().to_string()),
    ];
    if let Some(duration) = trajectory {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(usage("trajectory duration must be > 0"));
        }
        let o = &sc.objects;
        let opts = LangevinOptions {
            duration,
            initial: OscillatorState { position: amplitude, velocity: 0.0, time: 0.0 },
            ..LangevinOptions::default()
        };
        let drive = o.drive.with_voltage(voltage);
        let traj = integrate_langevin(&o.trap, &o.beams, &drive, &o.noise, &opts, seed).map_err(runtime)?;
        let mut buf = Vec::new();
        traj.write_columns(&mut buf, &summary[..2]).map_err(runtime)?;
        write(&dir.join("trajectory.dat"), &String::from_utf8_lossy(&buf))?;
        summary.push(("trajectory_samples".into(), traj.len().to_string()));
    }
    write(&dir.join("simulate.summary.txt"), &key_value_text(&summary))
}

fn parse_freeze(s: &str) -> Outcome<FrozenMask> {
    match s.trim().strip_prefix("all-but-") {
        Some(rest) => {
            let keep = rest.split(',').map(str::parse::<Param>).collect::<Result<Vec<_>, _>>().map_err(usage)?;
            Ok(FrozenMask::all_but(&keep))
        }
        None => s.parse().map_err(usage),
    }
}

fn parse_init(s: &str) -> Outcome<Vec<(Param, f64)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (k, v) = t.split_once('=').ok_or_else(|| usage(format!("--init expects name=value, got {t:?}")))?;
            let p: Param = k.parse().map_err(usage)?;
            let v: f64 = v.trim().parse().map_err(|_| usage(format!("bad number in --init: {v:?}")))?;
            Ok((p, v))
        })
        .collect()
}

fn fit(
    histogram: PathBuf,
    config: Option<PathBuf>,
    freeze: Option<String>,
    init: Option<String>,
    out: Option<PathBuf>,
) -> Outcome<()> {
    let cfg = load_config(config.as_deref(), None)?;
    let frozen = match freeze.as_deref() {
        Some(s) => parse_freeze(s)?,
        None => cfg.frozen().map_err(usage)?,
    };
    let overrides = init.as_deref().map(parse_init).transpose()?.unwrap_or_default();
    let report_path = match out {
        Some(p) => p,
        None => {
            let stem = histogram.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "histogram".into());
            out_dir(None, &cfg).join(format!("{stem}.fit.txt"))
        }
    };
    let text = std::fs::read_to_string(&histogram).map_err(|e| runtime(format!("{}: {e}", histogram.display())))?;
    let hist = TacHistogram::from_text(&text).map_err(|e| runtime(format!("{}: {e}", histogram.display())))?;
    let sc = Scenario::from_config(cfg).map_err(usage)?;
    let o = &sc.objects;
    if (hist.period / o.period - 1.0).abs() > 1e-9 {
        warn!("histogram period {:e} s differs from the configured {:e} s", hist.period, o.period);
    }
    let omega = std::f64::consts::TAU / hist.period;
    let sigma_t = sc.config.fit.sigma_t;
    let (alpha, beta) = fit_scale(&sc, &hist).map_err(runtime)?;
    let needs_guess = !overrides.iter().any(|(p, _)| *p == Param::Amplitude) || !overrides.iter().any(|(p, _)| *p == Param::Phase);
    let mut p0 = if needs_guess {
        let g = initial_guess(&hist, &o.beams, omega, sigma_t, Some((alpha, beta))).map_err(runtime)?;
        FitModelParams { alpha, beta, sigma_t, ..g }
    } else {
        FitModelParams { amplitude: 0.0, phase: 0.0, alpha, beta, sigma_t }
    };
    for (p, v) in overrides {
        p0.set(p, v);
    }
    let result = fit_histogram(&hist, &o.beams, omega, &p0, frozen, &o.fit).map_err(runtime)?;
    write(&report_path, &result.report(Some(&sc.hash)))?;
    eprintln!(
        "A = {:.4} µm ± {:.4}, φ = {:.4} rad ± {:.4}, χ²/dof = {:.3}",
        result.params.amplitude * 1e6,
        result.errors.amplitude * 1e6,
        result.params.phase,
        result.errors.phase,
        result.reduced_chi2
    );
    if result.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("fit did not converge after {} iterations", result.iterations)))
    }
}

fn campaign(name: String, config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>) -> Outcome<()> {
    let which: Campaign = name.parse().map_err(usage)?;
    let cfg = load_config(config.as_deref(), seed)?;
    let dir = out_dir(out, &cfg);
    let output = run_campaign(&cfg, which).map_err(runtime)?;
    let paths = output.write_to(&dir).map_err(runtime)?;
    for p in paths {
        info!("wrote {}", p.display());
    }
    eprint!("{}", output.summary);
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Simulate { config, seed, out, voltage, trajectory } => simulate(config, seed, out, voltage, trajectory),
        Command::Fit { histogram, config, freeze, init, out } => fit(histogram, config, freeze, init, out),
        Command::Campaign { name, config, seed, out } => campaign(name, config, seed, out),
        Command::PrintConfig { config } => {
            print!("{}", load_config(config.as_deref(), None)?.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
