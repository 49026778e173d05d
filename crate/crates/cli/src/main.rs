use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tripgrade::constraints::CheckConfig;
use tripgrade::datagen::{generate_fixture, write_fixture};
use tripgrade::embedding::{EmbedderConfig, ENDPOINT_ENV};
use tripgrade::params::DurationClass;
use tripgrade::report::{compare_runs, evaluate_run, run_estimate, run_evaluate, summary_text, RunManifest};

#[derive(Parser)]
#[command(name = "tripgrade", version, about = "Check and score multi-day travel plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a directory of plans against queries and a sandbox.
    Evaluate(EvaluateArgs),
    /// Compare two plan directories over the plans both delivered.
    Compare(CompareArgs),
    /// Fit metric parameters to annotated plans.
    Estimate(EstimateArgs),
    /// Generate a synthetic sandbox, queries and reference plans.
    Datagen(DatagenArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    sandbox: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Reference plans, used for the ordering score.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Parameter file; builtin values are used when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Embedding service URL; the local baseline is used when unset.
    #[arg(long, env = ENDPOINT_ENV)]
    embed_endpoint: Option<String>,
    /// Use the local baseline when the embedding service fails.
    #[arg(long)]
    embed_fallback: bool,
    #[arg(long, default_value_t = 30)]
    checkin_gap: u32,
    #[arg(long, default_value_t = 30)]
    checkout_gap: u32,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Inputs {
    fn manifest(&self, plans: PathBuf, out: PathBuf) -> RunManifest {
        let mut m = RunManifest::new(&self.sandbox, &self.queries, plans, out);
        m.gold_dir = self.gold.clone();
        m.params_file = self.params.clone();
        m.embed = match self.embed_endpoint.as_deref().filter(|e| !e.trim().is_empty()) {
            Some(url) => EmbedderConfig { fallback: self.embed_fallback, ..EmbedderConfig::remote(url) },
            None => EmbedderConfig::default(),
        };
        m.check = CheckConfig { checkin_gap_minutes: self.checkin_gap, checkout_gap_minutes: self.checkout_gap };
        m.jobs = self.jobs;
        m
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Give twice: run A, then run B.
    #[arg(long, num_args = 1, required = true)]
    plans: Vec<PathBuf>,
    /// Also write comparison.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    sandbox: PathBuf,
    /// Queries carrying the personas of the annotated plans.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Length {
    #[value(name = "3")]
    Three,
    #[value(name = "5")]
    Five,
    #[value(name = "7")]
    Seven,
    All,
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Queries per trip length.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, value_enum, default_value = "all")]
    days: Length,
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = args.inputs.manifest(args.plans, args.out.clone());
    let result = run_evaluate(&manifest)?;
    print!("{}", summary_text(&result));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let [a, b] = <[PathBuf; 2]>::try_from(args.plans).map_err(|p| anyhow::anyhow!("--plans must be given exactly twice, got {}", p.len()))?;
    let scratch = PathBuf::new();
    let run_a = evaluate_run(&args.inputs.manifest(a.clone(), scratch.clone())).with_context(|| format!("evaluating {}", a.display()))?;
    let run_b = evaluate_run(&args.inputs.manifest(b.clone(), scratch)).with_context(|| format!("evaluating {}", b.display()))?;
    let table = compare_runs(&run_a, &run_b)?;
    println!("A = {}\nB = {}", a.display(), b.display());
    print!("{}", table.render());
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join("comparison.json");
        std::fs::write(&path, serde_json::to_string_pretty(&table)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let est = run_estimate(&args.plans, &args.queries, &args.sandbox, &args.out)?;
    for class in est.params.0.keys() {
        println!("{class}: estimated");
    }
    for (class, why) in &est.skipped {
        println!("{class}: skipped ({why})");
    }
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", args.out.join("params.json").display());
    Ok(())
}

fn datagen(args: DatagenArgs) -> Result<()> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let classes = match args.days {
        Length::Three => vec![DurationClass::ThreeDay],
        Length::Five => vec![DurationClass::FiveDay],
        Length::Seven => vec![DurationClass::SevenDay],
        Length::All => DurationClass::ALL.to_vec(),
    };
    let fixture = generate_fixture(args.seed, &classes, args.count)?;
    write_fixture(&fixture, args.seed, &args.out)?;
    println!("wrote {} queries to {}", fixture.items.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Estimate(a) => estimate(a),
        Command::Datagen(a) => datagen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
