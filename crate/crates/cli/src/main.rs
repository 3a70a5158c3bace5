//! `cocoa`: train, inspect constants, certify dual points and generate data.
//!
//! Exit codes: 0 ok, 2 config, 3 parse, 4 I/O, 5 diverged, 6 certificate
//! failed (gap above `--tol`), 7 infeasible dual point.

mod cell;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cocoa::data::{generate_synthetic, parse_libsvm};
use cocoa::framework::LocalSteps;
use cocoa::subproblem::{safe_sigma_prime, sigma_aggregate, sigma_prime_min_lower_bound, DEFAULT_SPECTRAL_TOL};
use cocoa::{Error, LossModel, Partition, PartitionStrategy, Problem, RunConfig, SimulatedCluster, SparseDataset};
use serde::Serialize;

use cell::Cell;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_DIVERGED: u8 = 5;
const EXIT_CERTIFICATE: u8 = 6;
const EXIT_INFEASIBLE: u8 = 7;

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Io(_) => EXIT_IO,
            Error::Diverged { .. } => EXIT_DIVERGED,
            Error::Domain(_) | Error::Config(_) | Error::Dimension(_) | Error::Precondition(_) => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "cocoa", version, about = "Distributed primal-dual optimization on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more sweep cells and write convergence logs.
    Train(TrainArgs),
    /// Print the spectral constants of a partitioned dataset as CSV.
    Constants(ConstantsArgs),
    /// Evaluate the duality-gap certificate of a dual point.
    Certify(CertifyArgs),
    /// Write a synthetic dataset in LIBSVM format.
    Generate(GenerateArgs),
}

/// Where the data comes from: a LIBSVM file or the synthetic generator.
#[derive(Args, Clone, Debug)]
struct DataArgs {
    /// LIBSVM file.
    #[arg(long, conflicts_with_all = ["n", "d"])]
    data: Option<PathBuf>,
    /// Feature dimension for the LIBSVM file, if larger than the largest index.
    #[arg(long, requires = "data")]
    dim: Option<usize>,
    /// Scale every nonzero column to unit norm.
    #[arg(long)]
    normalize: bool,
    /// Synthetic datapoints.
    #[arg(long, requires = "d")]
    n: Option<usize>,
    /// Synthetic features.
    #[arg(long, requires = "n")]
    d: Option<usize>,
    /// Probability that a synthetic feature is present.
    #[arg(long, default_value_t = 0.1)]
    sparsity: f64,
}

impl DataArgs {
    fn load(&self, seed: u64) -> CliResult<SparseDataset> {
        let ds = match (&self.data, self.n, self.d) {
            (Some(path), _, _) => {
                let file = File::open(path).map_err(|e| Failure::io(path, e))?;
                parse_libsvm(BufReader::new(file), self.dim).map_err(|e| match e {
                    Error::Io(e) => Failure::io(path, e),
                    e => Failure { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) },
                })?
            }
            (None, Some(n), Some(d)) => generate_synthetic(n, d, self.sparsity, seed)?,
            _ => return Err(Failure::config("give --data <file> or --n and --d for synthetic data")),
        };
        Ok(if self.normalize { ds.normalize_columns() } else { ds })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// hinge, smoothed-hinge:<mu> or logistic.
    #[arg(long, default_value = "hinge")]
    loss: String,
    #[arg(long)]
    lambda: f64,
    /// Sweep cell, e.g. "variant=adding,k=4,gamma=1,sigma=4,h=500". Repeatable.
    #[arg(long = "cell", required = true)]
    cells: Vec<String>,
    /// Local steps for cells that do not set `h`: a count or auto:<theta>.
    #[arg(long, default_value = "1000")]
    h: String,
    /// Seeds the data generator, the partition and every worker.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Stopping duality gap.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
    /// Evaluate the certificate every this many rounds.
    #[arg(long, default_value_t = 1)]
    gap_every: usize,
    /// balanced-random or contiguous.
    #[arg(long, default_value = "balanced-random")]
    partition: String,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Record diverged cells in the summary instead of failing.
    #[arg(long)]
    allow_diverge: bool,
    /// Also write each log's records as CSV.
    #[arg(long)]
    csv: bool,
    /// Print the run configurations as JSON before running.
    #[arg(long)]
    dump_config: bool,
    /// Include σ_k and σ in each log header.
    #[arg(long)]
    spectral: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "balanced-random")]
    partition: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Restarts for the sampled σ′_min lower bound.
    #[arg(long, default_value_t = 8)]
    trials: usize,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "hinge")]
    loss: String,
    #[arg(long)]
    lambda: f64,
    /// One α_i per line.
    #[arg(long)]
    alpha: PathBuf,
    /// Largest accepted duality gap.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_loss(s: &str) -> CliResult<LossModel> {
    Ok(s.parse::<LossModel>()?)
}

fn parse_strategy(s: &str) -> CliResult<PartitionStrategy> {
    Ok(s.parse::<PartitionStrategy>()?)
}

#[derive(Serialize)]
struct SummaryRow {
    cell: usize,
    variant: String,
    k: usize,
    gamma: f64,
    sigma_prime: f64,
    h: String,
    status: &'static str,
    rounds: usize,
    rounds_to_tol: Option<usize>,
    final_gap: Option<f64>,
    log: String,
}

struct Prepared {
    cell: Cell,
    cfg: RunConfig,
    part: Partition,
    gamma: f64,
    sigma_prime: f64,
}

fn train(args: TrainArgs) -> CliResult {
    let loss = parse_loss(&args.loss)?;
    let strategy = parse_strategy(&args.partition)?;
    let default_h: LocalSteps = args.h.parse()?;
    let cells = args
        .cells
        .iter()
        .enumerate()
        .map(|(i, s)| Cell::parse(i, s).map_err(Failure::config))
        .collect::<CliResult<Vec<_>>>()?;
    let configs = cells
        .into_iter()
        .map(|cell| {
            let cfg = RunConfig {
                k: cell.k,
                variant: cell.variant,
                gamma: cell.gamma,
                sigma_prime: cell.sigma_prime,
                local_steps: cell.local_steps.unwrap_or(default_h),
                max_rounds: args.max_rounds,
                gap_tol: args.tol,
                gap_every: args.gap_every,
                seed: args.seed,
                partition_strategy: strategy,
                report_spectral: args.spectral,
            };
            cfg.validate().map_err(|e| Failure::config(format!("{cell}: {e}")))?;
            Ok((cell, cfg))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let ds = args.data.load(args.seed)?;
    let p = Problem::new(ds, loss, args.lambda)?;
    let prepared = configs
        .into_iter()
        .map(|(cell, cfg)| {
            let tag = |e: Error| Failure { message: format!("{cell}: {e}"), ..Failure::from(e) };
            let part = cfg.partition(p.n()).map_err(tag)?;
            let resolved = cfg.resolve(&p, &part).map_err(tag)?;
            for w in &resolved.warnings {
                eprintln!("warning: {cell}: {w}");
            }
            Ok(Prepared { gamma: resolved.gamma, sigma_prime: resolved.sigma_prime, cell, cfg, part })
        })
        .collect::<CliResult<Vec<_>>>()?;

    if args.dump_config {
        let cfgs: Vec<&RunConfig> = prepared.iter().map(|c| &c.cfg).collect();
        println!("{}", serde_json::to_string_pretty(&cfgs).expect("configs serialize"));
    }

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    let cluster = SimulatedCluster::new(args.threads);
    let mut rows = Vec::new();
    let mut diverged = None;
    for c in &prepared {
        let log_name = format!("{}.jsonl", c.cell.stem());
        let h = match c.cfg.local_steps {
            LocalSteps::Fixed(h) => h.to_string(),
            LocalSteps::Auto { theta } => format!("auto:{theta}"),
        };
        let mut row = SummaryRow {
            cell: c.cell.index,
            variant: c.cfg.variant.name().to_string(),
            k: c.cfg.k,
            gamma: c.gamma,
            sigma_prime: c.sigma_prime,
            h,
            status: "ok",
            rounds: 0,
            rounds_to_tol: None,
            final_gap: None,
            log: log_name.clone(),
        };
        match cluster.run(&p, &c.part, &c.cfg) {
            Ok(log) => {
                let path = args.out.join(&log_name);
                let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
                let mut out = BufWriter::new(file);
                log.write_jsonl(&mut out)
                    .and_then(|_| out.flush())
                    .map_err(|e| Failure::io(&path, e))?;
                if args.csv {
                    let path = args.out.join(format!("{}.csv", c.cell.stem()));
                    let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
                    log.write_csv(file)
                        .map_err(|e| Failure::io(&path, io::Error::other(e)))?;
                }
                row.rounds = log.records.last().map_or(0, |r| r.round);
                row.rounds_to_tol = log.rounds_to_gap(c.cfg.gap_tol);
                row.final_gap = log.final_gap();
                let reached = row.rounds_to_tol.map_or("not reached".to_string(), |t| format!("{t} rounds"));
                eprintln!("{}: gap {:.3e}, tolerance {reached}", c.cell, row.final_gap.unwrap_or(f64::NAN));
            }
            Err(Error::Diverged { round, message }) => {
                eprintln!("{}: diverged at round {round}: {message}", c.cell);
                row.status = "diverged";
                row.rounds = round;
                row.log = String::new();
                diverged.get_or_insert(Failure {
                    code: EXIT_DIVERGED,
                    message: format!("{}: diverged at round {round}", c.cell),
                });
            }
            Err(e) => return Err(Failure { message: format!("{}: {e}", c.cell), ..Failure::from(e) }),
        }
        rows.push(row);
    }

    let path = args.out.join("summary.csv");
    let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in &rows {
        w.serialize(row).map_err(|e| Failure::io(&path, io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Failure::io(&path, e))?;
    match diverged {
        Some(f) if !args.allow_diverge => Err(f),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct ConstantsRow {
    k: usize,
    n_k: usize,
    sigma_k: f64,
    sigma: f64,
    ratio: f64,
    sigma_prime_min_lb: f64,
    safe_sigma_prime: f64,
}

fn constants(args: ConstantsArgs) -> CliResult {
    let strategy = parse_strategy(&args.partition)?;
    let ds = args.data.load(args.seed)?;
    let part = Partition::new(ds.n(), args.k, strategy, args.seed)?;
    let sc = sigma_aggregate(&ds, &part, DEFAULT_SPECTRAL_TOL)?;
    let lb = sigma_prime_min_lower_bound(&ds, &part, args.gamma, args.trials, args.seed)?;
    let safe = safe_sigma_prime(args.gamma, args.k)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for (k, (&sigma_k, &n_k)) in sc.sigma_k.iter().zip(&sc.sizes).enumerate() {
        w.serialize(ConstantsRow {
            k,
            n_k,
            sigma_k,
            sigma: sc.sigma,
            ratio: sc.ratio,
            sigma_prime_min_lb: lb,
            safe_sigma_prime: safe,
        })
        .map_err(|e| Failure::io(Path::new("<stdout>"), io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn read_alpha(path: &Path) -> CliResult<Vec<f64>> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    let mut alpha = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = t.parse::<f64>().map_err(|_| Failure {
            code: EXIT_PARSE,
            message: format!("{}: line {}: not a number: {t:?}", path.display(), i + 1),
        })?;
        alpha.push(v);
    }
    Ok(alpha)
}

fn certify(args: CertifyArgs) -> CliResult {
    let loss = parse_loss(&args.loss)?;
    let ds = args.data.load(args.seed)?;
    let p = Problem::new(ds, loss, args.lambda)?;
    let alpha = read_alpha(&args.alpha)?;
    if alpha.len() != p.n() {
        return Err(Failure::config(format!(
            "alpha has {} entries but the dataset has {} points",
            alpha.len(),
            p.n()
        )));
    }
    let cert = p.certificate(&alpha)?;
    println!("primal\t{}", cert.primal);
    println!("dual\t{}", cert.dual);
    if !cert.is_feasible() {
        println!("gap\tinf");
        return Err(Failure { code: EXIT_INFEASIBLE, message: "alpha is outside the dual domain".into() });
    }
    println!("gap\t{}", cert.gap);
    if cert.gap <= args.tol {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CERTIFICATE,
            message: format!("gap {} exceeds tolerance {}", cert.gap, args.tol),
        })
    }
}

fn generate(args: GenerateArgs) -> CliResult {
    let ds = generate_synthetic(args.n, args.d, args.sparsity, args.seed)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::io(path, e))?;
            let mut out = BufWriter::new(file);
            ds.write_libsvm(&mut out)
                .and_then(|_| out.flush())
                .map_err(|e| Failure::io(path, e))
        }
        None => ds
            .write_libsvm(io::stdout().lock())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Constants(a) => constants(a),
        Command::Certify(a) => certify(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
