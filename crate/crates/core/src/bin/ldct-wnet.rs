use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldct_wnet::commands::{self, RunConfig};
use ldct_wnet::{Error, Result};

/// Output-directory override.
const OUT_ENV: &str = "LDCT_WNET_OUT";

#[derive(Parser)]
#[command(name = "ldct-wnet", version, about = "Dual-domain U-net cascades for low-dose CT enhancement")]
struct Cli {
    /// Worker threads; 1 gives bitwise-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: $LDCT_WNET_OUT, else ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a paired LDCT/RDCT dataset.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip Poisson noise (LDCT equals RDCT).
        #[arg(long)]
        no_noise: bool,
    },
    /// Train one network.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Saved dataset; simulated from the config when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Overrides the config's network.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Score checkpoints and the LDCT baseline on the test split.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Enhance one image container (.wnct) into .wnct or .png.
    Enhance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// PNG row: LDCT | each network | RDCT.
    Montage {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        slice: String,
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parameter counts of every network and their identities.
    Paramcount {
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Analytic oracle checks.
    Selftest,
}

fn out_dir(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    let out = out_dir(cli.out);
    match cli.command {
        Command::Simulate { config, no_noise } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let dir = commands::simulate(&cfg, no_noise, &out.join("dataset"))?;
            println!("dataset written to {}", dir.display());
        }
        Command::Train { config, dataset, variant } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(v) = variant {
                cfg.variant = v.parse()?;
            }
            let dir = out.join(cfg.variant.name());
            commands::record_config(&cfg, &dir)?;
            let best = commands::train_command(&cfg, dataset.as_deref(), &dir)?;
            println!("best checkpoint at {}", best.display());
        }
        Command::Eval { dataset, checkpoints } => {
            let report = commands::eval_command(&dataset, &checkpoints, &out)?;
            print!("{}", report.summary_text());
        }
        Command::Enhance { checkpoint, input, output } => {
            commands::enhance_command(&checkpoint, &input, &output)?;
        }
        Command::Montage { dataset, slice, checkpoints, output } => {
            let path = output.unwrap_or_else(|| out.join(format!("montage_{slice}.png")));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            commands::montage_command(&dataset, &slice, &checkpoints, &path)?;
            println!("montage written to {}", path.display());
        }
        Command::Paramcount { depth } => {
            let (rows, checks) = commands::paramcount(depth)?;
            println!("{:<10} {:>12}", "network", "parameters");
            for r in &rows {
                println!("{:<10} {:>12}", r.variant.label(), r.params);
            }
            for c in &checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::Selftest => {
            let checks = commands::selftest()?;
            for c in &checks {
                println!("{} {}: {:.3e} (limit {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
