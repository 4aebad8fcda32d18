use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nfdm_core::channel::{propagate_link, NoiseMode};
use nfdm_core::harness::io::WaveformUnits;
use nfdm_core::harness::{
    prepare, read_summary, read_waveform, run_experiment, write_outputs, write_waveform, ExperimentConfig,
    HarnessError, WaveformFile,
};
use nfdm_core::modem::constellation::{LAMBDA1, LAMBDA2};
use nfdm_core::nft::{discrete_spectrum, find_eigenvalues, SearchRegion};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Dual-eigenvalue soliton link simulator.
#[derive(Parser)]
#[command(name = "nfdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 16 constellation waveforms and one PRBS frame.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Store samples in physical units (seconds, √W).
        #[arg(long)]
        physical: bool,
    },
    /// Print the discrete spectrum of a waveform file.
    Nft {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Analyze one symbol slot of a frame instead of the whole file.
        #[arg(long)]
        slot: Option<usize>,
    },
    /// Send a waveform file through the configured link.
    Propagate {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Link length; must be a whole number of spans. 0 copies the input.
        #[arg(long)]
        distance_km: Option<f64>,
    },
    /// Run a Monte-Carlo experiment and write scatter CSV and BER JSON.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Render a BER JSON file as text.
    Report { file: PathBuf },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file, for `propagate`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    lossless: bool,
    /// Add receiver noise for this OSNR (12.5 GHz reference bandwidth).
    #[arg(long)]
    osnr_db: Option<f64>,
    #[arg(long)]
    launch_offset_db: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.run.trials = t;
        }
        if self.lossless {
            cfg.link.lossless = true;
        }
        if let Some(o) = self.osnr_db {
            cfg.link.noise = NoiseMode::TargetOsnr { osnr_db: o };
        }
        if let Some(l) = self.launch_offset_db {
            cfg.scale.launch_offset_db = l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{:+.6}{:+.6}j", z.re, z.im)
}

fn synthesize(common: &Common, physical: bool) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let setup = prepare(&cfg)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let encode = |env| {
        if physical {
            WaveformFile::physical(env, &setup.scale)
        } else {
            WaveformFile::from_envelope(env)
        }
    };
    for s in setup.table.symbols() {
        write_waveform(&dir.join(format!("symbol_{:02}.nfdmwf", s.index)), &encode(&s.waveform))?;
    }
    write_waveform(&dir.join("frame.nfdmwf"), &encode(&setup.frame.envelope))?;
    println!(
        "wrote 16 symbols and a {}-symbol frame to {} (mean energy {:.6}, launch {:.2} dBm)",
        setup.frame.n_symbols(),
        dir.display(),
        setup.table.mean_energy(),
        setup.scale.launch_power_dbm()
    );
    Ok(())
}

fn nft(file: &Path, common: &Common, slot: Option<usize>) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let w = read_waveform(file)?;
    let scale = prepare(&cfg)?.scale;
    let mut env = w.to_envelope(Some(&scale))?;
    if let Some(k) = slot {
        env = env
            .slot(k)
            .ok_or_else(|| HarnessError::Config(format!("slot {k} out of range ({} slots)", env.n_slots())))?;
    }
    let found = find_eigenvalues(
        &env,
        &[LAMBDA1, LAMBDA2],
        Some(&SearchRegion::default()),
        &cfg.detection.nft,
    )
    .map_err(|e| HarnessError::Numerical(e.to_string()))?;
    let spec = discrete_spectrum(&env, &found.roots, &cfg.detection.nft)
        .map_err(|e| HarnessError::Numerical(e.to_string()))?;
    println!("{} eigenvalue(s), energy {:.6}", spec.len(), env.energy());
    for e in spec.entries() {
        println!(
            "lambda {}  qd {}  |qd| {:.6}  arg {:+.6}",
            fmt_c(e.lambda),
            fmt_c(e.qd),
            e.qd.norm(),
            e.qd.arg()
        );
    }
    Ok(())
}

fn propagate(input: &Path, common: &Common, distance_km: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = common.config()?;
    if let Some(d) = distance_km {
        let spans = d / cfg.fiber.span_length;
        if !d.is_finite() || d < 0.0 || (spans - spans.round()).abs() > 1e-9 {
            return Err(HarnessError::Config(format!(
                "distance {d} km is not a whole number of {} km spans",
                cfg.fiber.span_length
            ))
            .into());
        }
        cfg.fiber.n_spans = spans.round() as usize;
    }
    let out = common
        .out
        .clone()
        .ok_or_else(|| HarnessError::Config("propagate needs --out FILE".into()))?;
    let w = read_waveform(input)?;
    if cfg.fiber.n_spans == 0 && cfg.link.noise == NoiseMode::Off {
        write_waveform(&out, &w)?;
        return Ok(());
    }
    let scale = prepare(&cfg)?.scale;
    let env = w.to_envelope(Some(&scale))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let rx = propagate_link(&env, &cfg.link_config(), &scale, &mut rng)
        .map_err(HarnessError::from)?
        .envelope;
    let encoded = match w.units {
        WaveformUnits::Normalized => WaveformFile::from_envelope(&rx),
        WaveformUnits::Physical => WaveformFile::physical(&rx, &scale),
    };
    write_waveform(&out, &encoded)?;
    println!("propagated {} samples over {} km", env.len(), cfg.distance_km());
    Ok(())
}

fn run(common: &Common) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let outcome = run_experiment(&cfg)?;
    let (scatter, ber) = write_outputs(&cfg, &outcome, common.out.as_deref())?;
    print!("{}", outcome.summary.render());
    println!("scatter: {}\nber: {}", scatter.display(), ber.display());
    Ok(())
}

fn report(file: &Path) -> anyhow::Result<()> {
    print!("{}", read_summary(file)?.render());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize { common, physical } => synthesize(common, *physical),
        Command::Nft { file, common, slot } => nft(file, common, *slot),
        Command::Propagate {
            input,
            common,
            distance_km,
        } => propagate(input, common, *distance_km),
        Command::Run { common } => run(common),
        Command::Report { file } => report(file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
