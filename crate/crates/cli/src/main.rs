use anyhow::Result;
use clap::{Parser, Subcommand};
use rotcode_cli::cache::cache_gc;
use rotcode_cli::config::{self, VerifySection};
use rotcode_cli::experiments::{evaluate_all, threshold, verify_tasks};
use rotcode_cli::rows::Value;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rotcode", version, about = "Rotation-code sweeps, verification and result cache")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write its CSV.
    Run { config: PathBuf },
    /// Check gate propagation identities and noise channel accuracy.
    Verify {
        #[arg(long, default_value_t = 48)]
        dim: usize,
    },
    /// Evict least recently used cache entries down to a size limit.
    CacheGc {
        #[arg(long)]
        max_bytes: u64,
        /// Defaults to ROTCODE_CACHE_DIR, then ./.rotcode-cache.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

fn run(path: PathBuf) -> Result<ExitCode> {
    let lc = match config::load(&path) {
        Ok(lc) => lc,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let out = rotcode_cli::experiments::run(&lc)?;
    eprintln!(
        "wrote {} rows to {} ({} computed, {} cached, {} failed)",
        out.rows.len(),
        out.output.display(),
        out.computed,
        out.cache_hits,
        out.failures
    );
    if out.verified == Some(false) {
        eprintln!("verification failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(dim: usize) -> Result<ExitCode> {
    let v = VerifySection { dim, ..VerifySection::default() };
    let cfg: config::SweepConfig = toml::from_str("experiment = \"verify_identities\"\noutput = \"-\"")?;
    let workers = rotcode_cli::experiments::resolve_workers(&cfg)?;
    let evaluated = evaluate_all(verify_tasks(&v), &cfg, None, workers)?;
    let rows = rotcode_cli::experiments::assemble(cfg.experiment, &cfg, &evaluated);
    let mut ok = true;
    for r in &rows {
        let pass = matches!(r.value, Value::Num(x) if x <= threshold(&r.metric));
        ok &= pass;
        let value = match &r.value {
            Value::Num(x) => format!("{x:.3e}"),
            Value::Text(t) => t.clone(),
        };
        let n = r.n.map(|n| format!(" N={n}")).unwrap_or_default();
        println!("{} {}{n} {} {value}", if pass { "PASS" } else { "FAIL" }, r.param, r.metric);
    }
    println!("{} of {} checks passed", rows.iter().filter(|r| matches!(r.value, Value::Num(x) if x <= threshold(&r.metric))).count(), rows.len());
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(config),
        Command::Verify { dim } => verify(dim),
        Command::CacheGc { max_bytes, cache_dir } => {
            let dir = cache_dir
                .or_else(|| std::env::var_os("ROTCODE_CACHE_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(".rotcode-cache"));
            cache_gc(&dir, max_bytes).map(|freed| {
                println!("freed {freed} bytes");
                ExitCode::SUCCESS
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
