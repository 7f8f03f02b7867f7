// SPDX-License-Identifier: Apache-2.0

//! `hyperball`: convert edge lists, estimate or compute centralities, and
//! compare estimates against exact values.

mod manifest;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hyperball_core::centrality::{
    multi_run_aggregate, Centralities, CentralityAccumulator, DiscountSpec,
};
use hyperball_core::graph::{CsrGraph, NodeWeights};
use hyperball_core::hll::{standard_deviation_bound, CounterParams, HllError};
use hyperball_core::hyperball::{run_probabilistic, HyperBallConfig, HyperBallError};
use hyperball_core::oracle::{compare, exact_all, OracleError};
use hyperball_core::tsv::{self, Table};

use manifest::{Direction, Mode, RunManifest};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "hyperball", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a whitespace-separated edge list into the binary graph format.
    Convert { input: PathBuf, output: PathBuf },
    /// Estimate centralities with HyperLogLog counters.
    #[command(alias = "hyperball")]
    Run(RunArgs),
    /// Compute centralities exactly by one breadth-first visit per node.
    Exact(ExactArgs),
    /// Compare one column of an estimate table against an exact table.
    Compare {
        estimate: PathBuf,
        exact: PathBuf,
        #[arg(long, default_value = "harmonic")]
        column: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Repeat the run recorded in the header of an output table.
    Rerun {
        table: PathBuf,
        /// Write here instead of the recorded output path.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Graph in binary format.
    graph: String,
    #[arg(long, value_enum, default_value_t = Direction::Negative)]
    direction: Direction,
    /// Node weights, one `node weight` pair per line.
    #[arg(long)]
    weights: Option<String>,
    /// harmonic, log, quad, const or table:<path>; repeatable.
    #[arg(long)]
    discount: Vec<String>,
    /// Output table; standard output when omitted.
    #[arg(short, long)]
    output: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Registers per counter are 2^log2m.
    #[arg(long, default_value_t = 6)]
    log2m: u32,
    #[arg(long, default_value_t = 5)]
    register_width: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds seed, seed+1, ...; averaged.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest accepted product of node and arc counts.
    #[arg(long)]
    budget: Option<u128>,
}

/// Errors caused by the arguments rather than the data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_target(false)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(OracleError::BudgetExceeded { .. }) = cause.downcast_ref() {
            return EXIT_BUDGET;
        }
        let hll = cause.downcast_ref::<HllError>().or_else(|| {
            match cause.downcast_ref::<HyperBallError>() {
                Some(HyperBallError::Hll(h)) => Some(h),
                _ => None,
            }
        });
        if let Some(
            HllError::InvalidLog2m(_)
            | HllError::InvalidRegisterWidth(_)
            | HllError::TooFewRegisters(_),
        ) = hll
        {
            return EXIT_USAGE;
        }
        if let Some(HyperBallError::RegisterWidth { .. }) = cause.downcast_ref() {
            return EXIT_USAGE;
        }
    }
    EXIT_DATA
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Convert { input, output } => convert(&input, &output),
        Command::Run(args) => {
            let mode = Mode::Hyperball {
                log2m: args.log2m,
                register_width: args.register_width,
                seed: args.seed,
                runs: args.runs as usize,
            };
            let (manifest, threads) = manifest_of(args.common, mode);
            execute(&manifest, threads, None)
        }
        Command::Exact(args) => {
            let mode = Mode::Exact {
                budget: args.budget,
            };
            let (manifest, threads) = manifest_of(args.common, mode);
            execute(&manifest, threads, None)
        }
        Command::Compare {
            estimate,
            exact,
            column,
            output,
        } => compare_tables(&estimate, &exact, &column, output.as_deref()),
        Command::Rerun {
            table,
            output,
            threads,
        } => {
            let recorded = read_table(&table)?;
            let manifest = RunManifest::from_comments(&recorded.comments)
                .with_context(|| format!("{} has no usable run header", table.display()))?;
            execute(&manifest, threads, output.as_deref())
        }
    }
}

fn manifest_of(common: CommonArgs, mode: Mode) -> (RunManifest, Option<usize>) {
    let manifest = RunManifest {
        graph: common.graph,
        direction: common.direction,
        weights: common.weights,
        discounts: common.discount,
        output: common.output.unwrap_or_else(|| "-".into()),
        mode,
    };
    (manifest, common.threads)
}

fn convert(input: &Path, output: &Path) -> Result<()> {
    let start = Instant::now();
    let file = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let g = CsrGraph::load_edge_list(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", input.display()))?;
    write_graph(&g, output)?;
    log::info!(
        "command=convert nodes={} arcs={} bytes={} elapsed_ms={}",
        g.num_nodes(),
        g.num_arcs(),
        g.binary_len(),
        start.elapsed().as_millis()
    );
    Ok(())
}

fn write_graph(g: &CsrGraph, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    g.write_binary(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<CsrGraph> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    CsrGraph::read_binary(BufReader::new(file))
        .with_context(|| format!("cannot read graph {}", path.display()))
}

/// `graph.bin` -> `graph.t.bin`.
fn transpose_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_default();
    let stem = name.strip_suffix(".bin").unwrap_or(&name);
    path.with_file_name(format!("{stem}.t.bin"))
}

/// Loads the cached transpose of `g`, rebuilding it when missing, older
/// than the graph, or unreadable.
fn cached_transpose(path: &Path, g: &CsrGraph) -> Result<CsrGraph> {
    let cache = transpose_path(path);
    let modified = |p: &Path| fs::metadata(p).and_then(|m| m.modified()).ok();
    let fresh = match (modified(path), modified(&cache)) {
        (Some(src), Some(t)) => t >= src,
        _ => false,
    };
    if fresh {
        match read_graph(&cache) {
            Ok(t) if t.num_nodes() == g.num_nodes() && t.num_arcs() == g.num_arcs() => {
                log::info!("transpose={} cached=true", cache.display());
                return Ok(t);
            }
            _ => log::warn!("transpose={} unusable, rebuilding", cache.display()),
        }
    }
    let t = g.transpose();
    match write_graph(&t, &cache) {
        Ok(()) => log::info!("transpose={} cached=false", cache.display()),
        Err(e) => log::warn!("cannot cache transpose: {e:#}"),
    }
    Ok(t)
}

fn parse_discount(spec: &str) -> Result<DiscountSpec> {
    Ok(match spec {
        "harmonic" => DiscountSpec::Harmonic,
        "log" => DiscountSpec::Logarithmic,
        "quad" => DiscountSpec::Quadratic,
        "const" => DiscountSpec::Constant,
        _ => match spec.strip_prefix("table:") {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read discount table {path}"))?;
                DiscountSpec::parse_table(&text)
                    .with_context(|| format!("bad discount table {path}"))?
            }
            None => {
                return Err(UsageError(format!(
                    "unknown discount {spec:?}; expected harmonic, log, quad, const or table:<path>"
                ))
                .into())
            }
        },
    })
}

fn execute(
    manifest: &RunManifest,
    threads: Option<usize>,
    destination: Option<&Path>,
) -> Result<()> {
    let start = Instant::now();
    let specs = manifest
        .discounts
        .iter()
        .map(|d| parse_discount(d))
        .collect::<Result<Vec<_>>>()?;
    if let Mode::Hyperball {
        log2m,
        register_width,
        ..
    } = manifest.mode
    {
        // Reject bad counter shapes before touching the graph.
        let params = CounterParams::new(log2m, register_width, 0)?;
        log::info!(
            "registers={} theoretical_rsd={:.6}",
            params.num_registers(),
            standard_deviation_bound(params.num_registers())?
        );
    }
    let graph_path = Path::new(&manifest.graph);
    let g = read_graph(graph_path)?;
    let weights = match &manifest.weights {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open weights {path}"))?;
            Some(
                NodeWeights::load(BufReader::new(file), g.num_nodes())
                    .with_context(|| format!("cannot read weights {path}"))?,
            )
        }
        None => None,
    };
    log::info!(
        "graph={} nodes={} arcs={} direction={}",
        manifest.graph,
        g.num_nodes(),
        g.num_arcs(),
        manifest.direction
    );

    let (mean, std) = match manifest.mode {
        Mode::Hyperball {
            log2m,
            register_width,
            seed,
            runs,
        } => {
            // The engine grows balls along outgoing arcs.
            let engine_graph = match manifest.direction {
                Direction::Negative => cached_transpose(graph_path, &g)?,
                Direction::Positive => g,
            };
            let config = HyperBallConfig {
                weights,
                threads,
                ..HyperBallConfig::default()
            };
            let mut results = Vec::with_capacity(runs);
            for r in 0..runs as u64 {
                let run_start = Instant::now();
                let params = CounterParams::new(log2m, register_width, seed.wrapping_add(r))?;
                let mut acc = CentralityAccumulator::new(engine_graph.num_nodes(), specs.clone());
                let state = run_probabilistic(&engine_graph, params, &config, &mut [&mut acc])?;
                log::info!(
                    "run={} seed={} iterations={} elapsed_ms={}",
                    r + 1,
                    params.seed(),
                    state.iteration(),
                    run_start.elapsed().as_millis()
                );
                results.push(acc.centralities());
            }
            let agg = multi_run_aggregate(&results)?;
            (agg.mean, agg.std)
        }
        Mode::Exact { budget } => {
            // The oracle visits the transpose of its argument.
            let oracle_graph = match manifest.direction {
                Direction::Negative => g,
                Direction::Positive => cached_transpose(graph_path, &g)?,
            };
            let exact = with_threads(threads, || {
                exact_all(&oracle_graph, &specs, weights.as_ref(), budget)
            })??;
            (exact.centralities(), None)
        }
    };

    let rename = |mut c: Centralities| {
        for ((name, _), flag) in c.discounted.iter_mut().zip(&manifest.discounts) {
            *name = flag.clone();
        }
        c
    };
    let table = Table::from_centralities(
        manifest.to_comments(),
        &rename(mean),
        std.map(rename).as_ref(),
    );
    let target = destination
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&manifest.output));
    write_output(&target, |w| table.write_to(w))?;
    log::info!(
        "output={} elapsed_ms={}",
        target.display(),
        start.elapsed().as_millis()
    );
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, body: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(body)),
        None => Ok(body()),
    }
}

fn write_output(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    if path == Path::new("-") {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write(&mut lock)?;
    } else {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        write(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Table::read_from(BufReader::new(file))
        .with_context(|| format!("cannot read {}", path.display()))
}

fn compare_tables(
    estimate: &Path,
    exact: &Path,
    column: &str,
    output: Option<&Path>,
) -> Result<()> {
    let est_table = read_table(estimate)?;
    let exact_table = read_table(exact)?;
    let pick = |t: &Table, path: &Path| -> Result<Vec<f64>> {
        t.column(column)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| anyhow!("{} has no column {column:?}", path.display()))
    };
    let est = pick(&est_table, estimate)?;
    let ex = pick(&exact_table, exact)?;
    if est.len() != ex.len() {
        bail!(
            "{} has {} rows, {} has {}",
            estimate.display(),
            est.len(),
            exact.display(),
            ex.len()
        );
    }
    let cmp = compare(&est, &ex)?;
    let s = &cmp.summary;
    log::info!(
        "column={column} count={} q1={} median={} q3={} mean={} std={} zero_exact={}",
        s.count,
        tsv::format_float(s.q1),
        tsv::format_float(s.median),
        tsv::format_float(s.q3),
        tsv::format_float(s.mean),
        tsv::format_float(s.std),
        s.zero_exact
    );
    let comments = vec![
        ("estimate".to_string(), estimate.display().to_string()),
        ("exact".to_string(), exact.display().to_string()),
        ("column".to_string(), column.to_string()),
    ];
    let target = output.unwrap_or(Path::new("-"));
    write_output(target, |w| tsv::write_comparison(w, &comments, &cmp))
}
