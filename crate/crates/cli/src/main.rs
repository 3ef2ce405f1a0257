use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use floquet_learn::config::{has_errors, ExperimentConfig};
use floquet_learn::{engine, output, resolve_jobs, validate};

#[derive(Parser)]
#[command(name = "floquet-learn", version, about = "Floquet Hamiltonian learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by the config.
    Run(Common),
    /// Check the config and report diagnostics without computing anything.
    Validate(Common),
    /// Write the instance JSON of every grid cell.
    Generate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config, TOML or JSON.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: $FLOQUET_LEARN_JOBS, then all CPUs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        cfg.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(cfg.stem()))
    }
}

fn report(cfg: &ExperimentConfig) -> bool {
    let diags = validate(cfg);
    for d in &diags {
        eprintln!("{d}");
    }
    !has_errors(&diags)
}

fn run(args: &Common) -> anyhow::Result<()> {
    let cfg = args.load()?;
    if !report(&cfg) {
        anyhow::bail!("config {} is invalid", args.config.display());
    }
    let jobs = resolve_jobs(args.jobs)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let start = Instant::now();
    let outcome = pool.install(|| engine::run(&cfg))?;
    let elapsed = start.elapsed().as_secs_f64();
    let files = output::write_outputs(&args.out_dir(&cfg), &cfg, &outcome, jobs, elapsed)?;
    match &outcome.theory {
        Some(t) => print!("{}", output::theory_table(t)),
        None => print!("{}", output::summary_table(&outcome.records)),
    }
    let failed = outcome.records.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} rows failed; see the status column",
            outcome.records.len()
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn generate(args: &Common) -> anyhow::Result<()> {
    let cfg = args.load()?;
    if !report(&cfg) {
        anyhow::bail!("config {} is invalid", args.config.display());
    }
    let dir = args.out_dir(&cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut seen = std::collections::HashSet::new();
    for cell in engine::cells(&cfg) {
        let id = cell.instance_id();
        if !seen.insert(id.clone()) {
            continue;
        }
        let inst = engine::instance(&cfg, &cell)?;
        let file = dir.join(format!("{}.json", id.replace([':', '(', ')', ','], "_")));
        inst.save(&file)?;
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => a.load().map(|cfg| {
            let ok = report(&cfg);
            if ok {
                println!("config is valid");
            }
            if !ok {
                std::process::exit(1);
            }
        }),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
