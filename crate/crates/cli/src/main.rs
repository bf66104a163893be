//! `startx`: simulate star-transform data and reconstruct images from it.

mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use star_transform::experiment::{
    ballistic_projections, run_reconstruction, simulate, ExperimentConfig, GeometryConfig, MethodName, NoiseConfig,
    Outcome, RayConfig, Setup,
};
use star_transform::geometry::StarGeometry;
use star_transform::grid::{interior_error, DataField, PairwiseField};
use star_transform::io;
use star_transform::phantom::rasterize;
use star_transform::solver::SliceReport;
use star_transform::stability::{classify, f_theta, table1_cases, table1_geometry, StabilityReport};
use star_transform::{Category, Error};

use output::Outputs;

const FORMATS: &str = "\
File formats (first line of every text file names its format and version):
  star-field/1         data field Φ or pairwise φ_jk, one Z row per line
  star-image/1         reconstructed or rasterized image, one Z row per line
  star-ballistic/1     vertical projections, 'y,projection' rows
  star-coefficients/1  Fourier coefficients, 'n,q,re,im' rows
  star-scheme/1        pairwise coefficient table c_jk
  PGM                  binary P5, 8 bit, μL clipped to [-2, 6]
Numbers are written with 17 significant digits.

Exit codes: 0 ok, 2 config, 3 geometry, 4 solver, 5 io.
Set STARTX_THREADS to limit the number of worker threads.";

#[derive(Parser)]
#[command(name = "startx", version, about = "Star-transform simulation and reconstruction", after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stability report for a ray geometry, optionally with f(θ) samples.
    #[command(after_help = FORMATS)]
    Analyze(AnalyzeArgs),
    /// Rasterize the configured phantom.
    #[command(after_help = FORMATS)]
    Phantom(PhantomArgs),
    /// Simulate pairwise data, the combined data field and ballistic projections.
    #[command(after_help = FORMATS)]
    Forward(ForwardArgs),
    /// Reconstruct an image from a data field (or pairwise fields).
    #[command(after_help = FORMATS)]
    Reconstruct(ReconstructArgs),
    /// Print Σ0, Σ1 and the number of zeros of f(θ) for the reference geometries.
    ReproduceTable1(Table1Args),
    /// Simulate and reconstruct as described by a config file.
    #[command(after_help = FORMATS)]
    Run(RunArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GeometrySource {
    /// Experiment config (TOML); only its geometry is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of the reference geometries 1a, 1b, 2a, 2b, 3a, 3b.
    #[arg(long)]
    case: Option<String>,
    /// Rays as comma-separated THETA_OVER_PI:WEIGHT, e.g. "1:1,0.25:1,-0.25:1".
    #[arg(long, allow_hyphen_values = true)]
    rays: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: GeometrySource,
    /// Write (θ/π, f(θ)) over [0, π] at 2000 samples to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_pgm: Option<PathBuf>,
}

#[derive(Args)]
struct ForwardArgs {
    #[arg(long)]
    config: PathBuf,
    /// Photon count 𝒩 for Poisson noise; overrides the config.
    #[arg(long)]
    noise: Option<f64>,
    /// Noise seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output.dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Recursive,
    Local,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Experiment config supplying geometry, scheme and solver defaults.
    #[arg(long)]
    config: PathBuf,
    /// Combined data field Φ (star-field/1); required for the Fourier methods.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory of pairwise fields pair_J_K.csv; required for the local method.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    nsum: Option<usize>,
    /// Ballistic projections (star-ballistic/1); they fix μ_0 in every q ≠ 0 slice.
    #[arg(long)]
    use_projection: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_pgm: Option<PathBuf>,
    /// Per-q diagnostics as CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    /// Write the table as CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output.dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct CliError {
    category: Category,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { category: e.category(), message: e.to_string() }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError { category: Category::Config, message: msg.into() }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError { category: Category::Io, message: format!("{}: {e}", path.display()) }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn exit_code(c: Category) -> u8 {
    match c {
        Category::Config => 2,
        Category::Geometry => 3,
        Category::Solver => 4,
        Category::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return fail(e);
    }
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Phantom(a) => phantom(a),
        Command::Forward(a) => forward(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::ReproduceTable1(a) => table1(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error[{}]: {}", e.category.as_str(), e.message);
    ExitCode::from(exit_code(e.category))
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("STARTX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err(format!("STARTX_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_err(e.to_string()))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Parse errors inside a data file are reported against that file.
fn parse_in<T>(path: &Path, r: star_transform::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } => CliError { category: Category::Io, message: format!("{}: {e}", path.display()) },
        other => other.into(),
    })
}

fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = read(path)?;
    ExperimentConfig::from_toml(&text).map_err(|e| {
        let mut c = CliError::from(e);
        c.message = format!("{}: {}", path.display(), c.message);
        c
    })
}

fn parse_rays(spec: &str) -> CliResult<GeometryConfig> {
    let mut rays = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, w) = item.split_once(':').unwrap_or((item, "1"));
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| config_err(format!("bad ray '{item}' in --rays")));
        rays.push(RayConfig { theta_over_pi: parse(t)?, weight: parse(w)? });
    }
    if rays.is_empty() {
        return Err(config_err("--rays lists no rays"));
    }
    Ok(GeometryConfig { strip_width: 1.0, rays, scheme: None })
}

fn geometry_from(src: &GeometrySource) -> CliResult<StarGeometry> {
    if let Some(path) = &src.config {
        return Ok(load_config(path)?.geometry()?);
    }
    if let Some(case) = &src.case {
        return Ok(table1_geometry(case, 1.0)?);
    }
    let spec = src.rays.as_deref().unwrap_or_default();
    let g = parse_rays(spec)?;
    let t: Vec<f64> = g.rays.iter().map(|r| r.theta_over_pi).collect();
    let w: Vec<f64> = g.rays.iter().map(|r| r.weight).collect();
    Ok(StarGeometry::from_turns(&t, &w, g.strip_width)?)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn stability_text(g: &StarGeometry, r: &StabilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rays: {}", g.len());
    for (k, ray) in g.rays().iter().enumerate() {
        let _ = writeln!(s, "  ray {k}: theta/pi = {:.6}, weight = {}", ray.theta() / std::f64::consts::PI, ray.weight());
    }
    let _ = writeln!(s, "sigma0: {:.6}", r.sigma.sigma0);
    let _ = writeln!(s, "sigma1: {:.6}", r.sigma.sigma1);
    let _ = writeln!(s, "sigma2: {:.6}", r.sigma.sigma2);
    let zeros: Vec<String> = r.zero_locations.iter().map(|z| format!("{:.6}", z / std::f64::consts::PI)).collect();
    let _ = writeln!(s, "zeros of f(theta): {} (theta/pi in [0, 1): [{}])", r.zero_count, zeros.join(", "));
    let _ = writeln!(s, "odd number of rays: {}", r.k_odd);
    let _ = writeln!(s, "weighted directions in a half-plane: {}", r.halfplane_confined);
    let _ = writeln!(s, "stable at small q: {}", r.low_q_stable);
    let _ = writeln!(s, "stable at large q: {}", r.high_q_stable);
    s
}

fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let g = geometry_from(&a.source)?;
    let report = classify(&g);
    let mut out = Outputs::default();
    if let Some(path) = &a.csv {
        let mut csv = String::from("theta_over_pi,f\n");
        const SAMPLES: usize = 2000;
        for i in 0..SAMPLES {
            let t = i as f64 / (SAMPLES - 1) as f64;
            // Singular directions get an empty value.
            let f = f_theta(&g, t * std::f64::consts::PI).map(num).unwrap_or_default();
            let _ = writeln!(csv, "{},{f}", num(t));
        }
        out.add(path, csv);
    }
    out.commit().map_err(|e| io_err(a.csv.as_deref().unwrap_or(Path::new(".")), e))?;
    print!("{}", stability_text(&g, &report));
    Ok(())
}

fn phantom(a: PhantomArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let setup = cfg.setup()?;
    let img = rasterize(&setup.phantom, setup.grid);
    let mut out = Outputs::default();
    if let Some(p) = &a.out_csv {
        out.add(p, io::write_image(&img));
    }
    if let Some(p) = &a.out_pgm {
        out.add(p, io::write_pgm(&img));
    }
    commit(out)?;
    println!("phantom: {} x {} samples, max {:.6}", setup.grid.n, setup.grid.ny, img.max());
    Ok(())
}

fn commit(out: Outputs) -> CliResult<()> {
    let first = out.paths().next().map(Path::to_path_buf).unwrap_or_default();
    out.commit().map_err(|e| io_err(&first, e))
}

fn pair_name(j: usize, k: usize) -> String {
    format!("pair_{j}_{k}.csv")
}

fn forward(a: ForwardArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.config)?;
    match (a.noise, a.seed) {
        (Some(photons), seed) => {
            let seed = seed.or(cfg.noise.map(|n| n.seed)).unwrap_or(0);
            cfg.noise = Some(NoiseConfig { photons, seed });
        }
        (None, Some(seed)) => match cfg.noise.as_mut() {
            Some(n) => n.seed = seed,
            None => return Err(config_err("--seed needs --noise or a [noise] table in the config")),
        },
        (None, None) => {}
    }
    let setup = cfg.setup()?;
    let sim = simulate(&setup, cfg.noise.as_ref())?;
    let dir = a.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut out = Outputs::default();
    for p in &sim.pairs {
        out.add(dir.join(pair_name(p.j, p.k)), io::write_pairwise(p));
    }
    out.add(dir.join("data.csv"), io::write_field(&sim.data, None));
    out.add(dir.join("ballistic.csv"), io::write_ballistic(setup.grid, &sim.ballistic)?);
    commit(out)?;
    println!("wrote {} pairwise fields, data.csv and ballistic.csv to {}", sim.pairs.len(), dir.display());
    if sim.clamped > 0 {
        eprintln!("warning: {} noisy samples had zero counts and were clamped to one photon", sim.clamped);
    }
    Ok(())
}

fn read_pairs(dir: &Path, k: usize) -> CliResult<Vec<PairwiseField>> {
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let path = dir.join(pair_name(a, b));
            let p = parse_in(&path, io::read_pairwise(&read(&path)?))?;
            if (p.j, p.k) != (a, b) {
                return Err(io_err(&path, format!("file is tagged as pair {}-{}", p.j, p.k)));
            }
            pairs.push(p);
        }
    }
    Ok(pairs)
}

fn diagnostics_csv(slices: &[SliceReport]) -> String {
    let mut s = String::from("q,condition,failure\n");
    for r in slices {
        let cond = r.condition.map(num).unwrap_or_default();
        let fail = r.failure.as_deref().map(|f| format!("\"{}\"", f.replace('"', "\"\""))).unwrap_or_default();
        let _ = writeln!(s, "{},{cond},{fail}", num(r.q));
    }
    s
}

fn report(outcome: &Outcome) {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let failed = outcome.slices.iter().filter(|s| s.failure.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} q slice(s) failed and were zero-filled");
    }
}

fn reconstruct(a: ReconstructArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(m) = a.method {
        cfg.solver.method = match m {
            MethodArg::Direct => MethodName::Direct,
            MethodArg::Recursive => MethodName::Recursive,
            MethodArg::Local => MethodName::Local,
        };
    }
    if let Some(l) = a.lambda {
        cfg.solver.lambda = l;
    }
    if a.nmax.is_some() {
        cfg.solver.nmax = a.nmax;
    }
    if let Some(n) = a.nsum {
        cfg.solver.n_sum = n;
    }
    cfg.solver.use_projection = a.use_projection.is_some();
    let mut setup = cfg.setup()?;

    let (data, pairs) = if cfg.solver.method == MethodName::Local {
        let dir = a.pairs.as_deref().ok_or_else(|| config_err("the local method needs --pairs DIR"))?;
        let pairs = read_pairs(dir, setup.geometry.len())?;
        let grid = pairs[0].field.grid;
        (DataField::zeros(grid), pairs)
    } else {
        let path = a.data.as_deref().ok_or_else(|| config_err("the Fourier methods need --data FILE"))?;
        let (field, _) = parse_in(path, io::read_field(&read(path)?))?;
        (field, Vec::new())
    };
    let grid = if pairs.is_empty() { data.grid } else { pairs[0].field.grid };
    if pairs.iter().any(|p| p.field.grid != grid) {
        return Err(config_err("pairwise fields are on different grids"));
    }
    if (grid.strip_width - setup.geometry.strip_width()).abs() > 1e-12 * grid.strip_width {
        return Err(config_err(format!(
            "data strip width {} does not match the config's {}",
            grid.strip_width,
            setup.geometry.strip_width()
        )));
    }
    setup.grid = grid;
    let ballistic = match &a.use_projection {
        Some(path) => {
            let (bg, p) = parse_in(path, io::read_ballistic(&read(path)?))?;
            if bg != grid {
                return Err(config_err("ballistic projections are on a different grid than the data"));
            }
            Some(p)
        }
        None => None,
    };
    let outcome = run_reconstruction(&setup, &cfg.solver, &data, &pairs, ballistic.as_deref())?;
    report(&outcome);
    let mut out = Outputs::default();
    if let Some(p) = &a.out_csv {
        out.add(p, io::write_image(&outcome.image));
    }
    if let Some(p) = &a.out_pgm {
        out.add(p, io::write_pgm(&outcome.image));
    }
    if let Some(p) = &a.diagnostics {
        out.add(p, diagnostics_csv(&outcome.slices));
    }
    commit(out)?;
    println!("reconstructed {} x {} image", grid.n, grid.ny);
    Ok(())
}

fn table1(a: Table1Args) -> CliResult<()> {
    let mut s = String::new();
    if a.csv {
        s.push_str("case,sigma0,sigma1,zeros\n");
    } else {
        let _ = writeln!(s, "{:<5}{:>8}{:>8}{:>4}", "case", "Σ0", "Σ1", "NZ");
    }
    for (name, _, _) in table1_cases() {
        let r = classify(&table1_geometry(name, 1.0)?);
        if a.csv {
            let _ = writeln!(s, "{name},{:.4},{:.4},{}", r.sigma.sigma0, r.sigma.sigma1, r.zero_count);
        } else {
            let _ = writeln!(s, "{name:<5}{:>8.2}{:>8.2}{:>4}", r.sigma.sigma0, r.sigma.sigma1, r.zero_count);
        }
    }
    print!("{s}");
    Ok(())
}

fn run(a: RunArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let setup: Setup = cfg.setup()?;
    let sim = simulate(&setup, cfg.noise.as_ref())?;
    let ballistic = cfg.solver.use_projection.then(|| ballistic_projections(&setup.phantom, setup.grid));
    let outcome = run_reconstruction(&setup, &cfg.solver, &sim.data, &sim.pairs, ballistic.as_deref())?;
    report(&outcome);
    let truth = rasterize(&setup.phantom, setup.grid);
    let (rel, max) = interior_error(&outcome.image, &truth, 2);

    let dir = a.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut out = Outputs::default();
    out.add(dir.join("config.toml"), cfg.to_toml()?);
    out.add(dir.join("data.csv"), io::write_field(&sim.data, None));
    out.add(dir.join("phantom.csv"), io::write_image(&truth));
    out.add(dir.join("reconstruction.csv"), io::write_image(&outcome.image));
    out.add(dir.join("reconstruction.pgm"), io::write_pgm(&outcome.image));
    out.add(dir.join("stability.txt"), stability_text(&setup.geometry, &classify(&setup.geometry)));
    out.add(dir.join("diagnostics.csv"), diagnostics_csv(&outcome.slices));
    commit(out)?;
    println!("interior relative L2 error {:.4}, max abs error {:.4}; outputs in {}", rel, max, dir.display());
    Ok(())
}
