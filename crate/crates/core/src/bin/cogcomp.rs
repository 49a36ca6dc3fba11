use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use cogcomp::harness::{
    self, merge_rows, read_csv, render_table, write_csv, Cell, ChainLength, ComposerKind, Density, ExperimentConfig,
    Mobility, ReportRow, RunMetrics, Summary,
};
use cogcomp::{Error, Result};

#[derive(Parser)]
#[command(name = "cogcomp", version, about = "Service composition experiments on a simulated MANET")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scenario grid.
    Run(GridArgs),
    /// Run a single grid cell.
    Cell(CellArgs),
    /// Run one replication and dump its event log and decision trace.
    Trace(TraceArgs),
    /// Merge and summarize existing CSV reports.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    replications: Option<usize>,
    /// Per-request deadline in seconds.
    #[arg(long)]
    deadline: Option<f64>,
    /// Simulated seconds per run.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long, env = "COGCOMP_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    composers: Vec<ComposerKind>,
    #[arg(long, value_delimiter = ',')]
    densities: Vec<Density>,
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<ChainLength>,
    #[arg(long, value_delimiter = ',')]
    mobilities: Vec<Mobility>,
}

#[derive(Args)]
struct CellArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    composer: ComposerKind,
    #[arg(long)]
    density: Density,
    #[arg(long)]
    length: ChainLength,
    #[arg(long)]
    mobility: Mobility,
    /// Print the CSV instead of writing it.
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    cell: CellArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV files written by `run` or `cell`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Write the merged CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn merge_json(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn build_config(common: &Common, grid: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig { seed: common.seed, ..Default::default() };
    if let Some(r) = common.replications {
        cfg.replications = r;
    }
    if let Some(d) = common.deadline {
        cfg.deadline = d;
    }
    if let Some(h) = common.horizon {
        cfg.sim.horizon = h;
    }
    if let Some(n) = common.requests {
        cfg.sim.requests = n;
    }
    grid(&mut cfg);
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let over: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut base = serde_json::to_value(&cfg).map_err(|e| Error::Parse(e.to_string()))?;
        merge_json(&mut base, over);
        cfg = serde_json::from_value(base).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cell_config(args: &CellArgs) -> Result<(ExperimentConfig, Cell)> {
    let cfg = build_config(&args.common, |c| {
        c.composers = vec![args.composer];
        c.densities = vec![args.density];
        c.lengths = vec![args.length];
        c.mobilities = vec![args.mobility];
    })?;
    let cell = cfg.cells()[0];
    Ok((cfg, cell))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_report(dir: &Path, stem: &str, cfg: &ExperimentConfig, rows: &[ReportRow]) -> Result<PathBuf> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_csv(rows, create(&csv_path)?)?;
    let summary = Summary { replications: cfg.replications, seed: cfg.seed, rows };
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| io_err(&json_path, e))?;
    writeln!(w).map_err(|e| io_err(&json_path, e))?;
    Ok(csv_path)
}

fn run_grid(args: GridArgs) -> Result<()> {
    let cfg = build_config(&args.common, |c| {
        if !args.composers.is_empty() {
            c.composers = args.composers.clone();
        }
        if !args.densities.is_empty() {
            c.densities = args.densities.clone();
        }
        if !args.lengths.is_empty() {
            c.lengths = args.lengths.clone();
        }
        if !args.mobilities.is_empty() {
            c.mobilities = args.mobilities.clone();
        }
    })?;
    let results = harness::run_experiment(&cfg)?;
    let rows: Vec<ReportRow> = results.iter().map(|r| r.row(cfg.seed)).collect();
    let path = write_report(&args.common.out_dir, "grid", &cfg, &rows)?;
    print!("{}", render_table(&rows));
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run_cell(args: CellArgs) -> Result<()> {
    let (cfg, cell) = cell_config(&args)?;
    let result = harness::run_cell(&cfg, &cell)?;
    let rows = [result.row(cfg.seed)];
    if args.stdout {
        write_csv(&rows, io::stdout().lock())?;
    } else {
        let stem = format!(
            "cell-{}-{}-{}-{}-s{}",
            cell.composer,
            cell.density.0,
            cell.length.label(),
            cell.mobility.label(),
            cfg.seed
        );
        let path = write_report(&args.common.out_dir, &stem, &cfg, &rows)?;
        print!("{}", render_table(&rows));
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run_trace(args: TraceArgs) -> Result<()> {
    let (cfg, cell) = cell_config(&args.cell)?;
    let out = harness::run_once(&cfg, &cell, cfg.seed, true)?;
    let dir = &args.cell.common.out_dir;
    let stem = format!("trace-{}-s{}", cell.composer, cfg.seed);
    let events_path = dir.join(format!("{stem}.events.jsonl"));
    let mut w = create(&events_path)?;
    for line in &out.events {
        writeln!(w, "{line}").map_err(|e| io_err(&events_path, e))?;
    }
    w.flush().map_err(|e| io_err(&events_path, e))?;
    if !out.cycles.is_empty() {
        let cycles_path = dir.join(format!("{stem}.cycles.jsonl"));
        let mut w = create(&cycles_path)?;
        for c in &out.cycles {
            let line = serde_json::to_string(c).map_err(|e| io_err(&cycles_path, e))?;
            writeln!(w, "{line}").map_err(|e| io_err(&cycles_path, e))?;
        }
        w.flush().map_err(|e| io_err(&cycles_path, e))?;
    }
    let requests_path = dir.join(format!("{stem}.requests.json"));
    let mut w = create(&requests_path)?;
    serde_json::to_writer_pretty(&mut w, &out.summary).map_err(|e| io_err(&requests_path, e))?;
    let m = RunMetrics::from_run(&out.summary)?;
    let row = harness::ReportRow::new(&cell, cfg.seed, &m);
    print!("{}", render_table(&[row]));
    eprintln!("wrote {} ({} events)", events_path.display(), out.events.len());
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        rows.extend(read_csv(file)?);
    }
    let merged = merge_rows(&rows)?;
    match &args.output {
        Some(path) => {
            write_csv(&merged, create(path)?)?;
            print!("{}", render_table(&merged));
        }
        None => write_csv(&merged, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_grid(a),
        Command::Cell(a) => run_cell(a),
        Command::Trace(a) => run_trace(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
