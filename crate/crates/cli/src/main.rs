use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equipart::recursive::{solve_general, GeneralOptions, PartitionTree};
use equipart::sweep::{branch_curves, SweepOptions};
use equipart::verify::check_partition;
use equipart::{ConvexPolygon, Density, Error, Functional};

mod input;
mod svg;

use input::InputError;

/// Equal-mass, equal-value convex partitions of convex polygons.
#[derive(Parser)]
#[command(name = "equipart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a body into m convex parts.
    Solve(SolveArgs),
    /// Trace the branch values of the two halves over a full turn of
    /// halving lines.
    Sweep(SweepArgs),
    /// Check a partition document against a body.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Polygon file: one `x y` pair per line, counterclockwise.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "perimeter")]
    functional: String,
    /// uniform, linear:a,b,c or gauss:cx,cy,s
    #[arg(long, default_value = "uniform")]
    density: String,
    /// Relative tolerance on the cell masses.
    #[arg(long, default_value_t = 1e-6)]
    tol_area: f64,
    /// Relative tolerance on the functional values.
    #[arg(long, default_value_t = 1e-5)]
    tol_f: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per turn of each halving sweep.
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parts per half.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Partition document written by `solve`, or a JSON array of cells.
    #[arg(long)]
    partition: PathBuf,
}

enum Failure {
    Input(String),
    Failed(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_non_convergence() {
            Failure::Failed(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(2)
        }
    }
}

struct Problem {
    body: ConvexPolygon,
    f: Functional,
    density: Density,
}

fn load(c: &Common) -> Result<Problem, Failure> {
    let f = Functional::by_name(&c.functional)?;
    let density: Density = c.density.parse()?;
    for (name, v) in [("--tol-area", c.tol_area), ("--tol-f", c.tol_f)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::Input(format!("{name} must be positive")));
        }
    }
    let body = input::read_polygon(&c.input)?;
    if !(density.mass(&body) > 0.0) {
        return Err(Failure::Input("body has zero mass under the density".into()));
    }
    Ok(Problem { body, f, density })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn options(c: &Common, seed: u64, threads: usize, sweep: SweepOptions) -> GeneralOptions {
    let mut opts = GeneralOptions { sweep, tol_area: c.tol_area, tol_f: c.tol_f, ..GeneralOptions::default() };
    opts.partition.seed = seed;
    opts.partition.threads = threads.max(1);
    opts
}

fn check_grid(grid: usize) -> Result<(), Failure> {
    if grid == 0 || grid % 2 != 0 {
        return Err(Failure::Input(format!("--grid must be a positive even number, got {grid}")));
    }
    Ok(())
}

fn tree_json(tree: &PartitionTree) -> String {
    serde_json::to_string_pretty(tree).expect("tree serializes") + "\n"
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let p = load(&a.common)?;
    if a.m == 0 {
        return Err(Failure::Input("--m must be at least 1".into()));
    }
    check_grid(a.grid)?;
    let sweep = SweepOptions { grid: a.grid, ..GeneralOptions::default().sweep };
    let opts = options(&a.common, a.seed, a.threads, sweep);
    let tree = match solve_general(&p.body, a.m, &p.f, &p.density, &opts) {
        Ok(t) => t,
        Err(Error::TreeNotConverged { reason, partial: Some(t) }) => {
            write_out(a.common.out.as_deref(), &tree_json(&t))?;
            return Err(Failure::Failed(reason));
        }
        Err(e) => return Err(e.into()),
    };
    write_out(a.common.out.as_deref(), &tree_json(&tree))?;
    let leaves = tree.leaves();
    if let Some(path) = &a.svg {
        write_out(Some(path), &svg::partition(&p.body, &leaves))?;
    }
    let cells: Vec<_> = leaves.iter().map(|c| c.vertices().to_vec()).collect();
    let report = check_partition(&p.body, &cells, &p.density, &p.f, a.common.tol_area, a.common.tol_f);
    eprintln!(
        "m = {}, levels {:?}, {} = {:.9}, mass deviation {:.2e}, {} deviation {:.2e}",
        tree.m, tree.levels, tree.functional, tree.value, report.max_mass_deviation, tree.functional, report.max_f_deviation
    );
    if !report.pass {
        return Err(Failure::Failed(report.failures.join("; ")));
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let p = load(&a.common)?;
    if a.m == 0 {
        return Err(Failure::Input("--m must be at least 1".into()));
    }
    check_grid(a.grid)?;
    let opts = options(&a.common, a.seed, a.threads, SweepOptions { grid: a.grid, ..SweepOptions::default() });
    let s = branch_curves(&p.body, a.m, &p.f, &p.density, &opts)?;
    let rows = s.table();
    let mut tsv = String::from("t\ty_L\ty_M\n");
    for (t, yl, ym) in &rows {
        writeln!(tsv, "{t}\t{yl}\t{ym}").unwrap();
    }
    write_out(a.common.out.as_deref(), &tsv)?;
    if let Some(path) = &a.svg {
        write_out(Some(path), &svg::curves(&rows))?;
    }
    eprintln!(
        "{} rows, half-turn defect {:.2e}, L {}, M {}",
        rows.len(),
        s.half_turn_defect(),
        if s.l.continuous { "continuous" } else { "broken" },
        if s.m.continuous { "continuous" } else { "broken" }
    );
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let p = load(&a.common)?;
    let cells = input::read_cells(&a.partition)?;
    let report = check_partition(&p.body, &cells, &p.density, &p.f, a.common.tol_area, a.common.tol_f);
    write_out(a.common.out.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    if !report.pass {
        return Err(Failure::Failed(report.failures.join("; ")));
    }
    Ok(())
}
