//! `bgrdmft`: sectors, domains, functional grids, BEC-force reports and the
//! `(3,3,0)` approximation studies as reproducible CSV/JSON files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bgrdmft::approx;
use bgrdmft::force::{self, FacetPoint, ForceReport};
use bgrdmft::functional::grid::{functional_grid, grid_csv};
use bgrdmft::functional::scan::{angular_sweep, kinetic_sweep, t_scan};
use bgrdmft::interaction::{build_interaction_matrix, hubbard_interaction};
use bgrdmft::io::{fmt_g17, write_atomic, CsvTable};
use bgrdmft::{build_domain, enumerate_sector, DomainPolytope, Error, Method, PairInteraction, SearchOptions, SectorOperator};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "bgrdmft", version, about = "Symmetry-adapted RDMFT for lattice bosons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the configuration states of a momentum sector.
    Sector(SectorArgs),
    /// Facet representation, incidence matrix T, pseudoinverse and kernel.
    Domain(SectorArgs),
    /// Functional values over a barycentric grid, or a Legendre t-scan.
    Functional(FunctionalArgs),
    /// Repulsion strength at a facet point, with a slope fit along the normal.
    Force(ForceArgs),
    /// Studies of the polynomial approximation in the (3,3,0) Hubbard sector.
    Approx(ApproxArgs),
}

#[derive(Args, Debug, Clone)]
struct SectorArgs {
    /// Number of lattice sites (momentum modes).
    #[arg(long)]
    d: usize,
    /// Number of bosons.
    #[arg(long = "N")]
    n: u32,
    /// Total momentum sector.
    #[arg(long = "P", default_value_t = 0)]
    p: usize,
    /// Output directory; without it the primary result goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// `hubbard` or a path to a `k1,k2,k3,k4,amplitude` table.
    #[arg(long, default_value = "hubbard")]
    interaction: String,
    /// Multistart seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FunctionalArgs {
    #[command(flatten)]
    sector: SectorArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// search | simplex | general | tscan
    #[arg(long, default_value = "search")]
    method: String,
    /// Lattice divisions per edge.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Skip the finite-difference gradient column.
    #[arg(long)]
    no_gradient: bool,
    /// Number of random kinetic vectors for the t-scan.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args, Debug)]
struct ForceArgs {
    #[command(flatten)]
    sector: SectorArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated occupations on a facet, e.g. `0,3,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    facet_point: Vec<f64>,
    /// Facet index; located automatically when omitted.
    #[arg(long)]
    facet: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    eps_min: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_max: f64,
    /// Number of log-spaced eps values; 0 skips the slope fit.
    #[arg(long, default_value_t = 12)]
    eps_steps: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Study {
    ErrorGrid,
    EnergyDisk,
    ZbarSpread,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long, value_enum, default_value_t = Study::ErrorGrid)]
    study: Study,
    /// Barycentric resolution (error grid, and the start grid of the energy minimization).
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 20)]
    r_steps: usize,
    #[arg(long, default_value_t = 72)]
    theta_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::SectorTooLarge { .. }
            | Error::UnsupportedDomain(_)
            | Error::OffHyperplane { .. }
            | Error::InfeasibleTarget
            | Error::NotSimplex
            | Error::InvalidFacetPoint(_)
            | Error::PathExitsDomain(_)
            | Error::Parse(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

type CliResult = Result<(), Failure>;

fn emit(out: &Option<PathBuf>, name: &str, contents: &str, to_stdout: bool) -> CliResult {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            write_atomic(&path, contents.as_bytes())?;
            log::info!("wrote {}", path.display());
        }
        None if to_stdout => print!("{contents}"),
        None => {}
    }
    Ok(())
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn load_interaction(spec: &str, d: usize) -> Result<PairInteraction, Failure> {
    if spec == "hubbard" {
        return Ok(hubbard_interaction(d));
    }
    let text = std::fs::read_to_string(Path::new(spec))
        .map_err(|e| Failure::Usage(format!("cannot read interaction table {spec}: {e}")))?;
    Ok(PairInteraction::from_table(d, &text)?)
}

fn setup(s: &SectorArgs, solver: &SolverArgs) -> Result<(DomainPolytope, SectorOperator), Failure> {
    let sector = enumerate_sector(s.d, s.n, s.p)?;
    let pair = load_interaction(&solver.interaction, s.d)?;
    let w = build_interaction_matrix(&pair, &sector)?;
    let poly = build_domain(&sector)?;
    Ok((poly, w))
}

fn base_meta(s: &SectorArgs, solver: Option<&SolverArgs>) -> Vec<(&'static str, String)> {
    let mut m = vec![
        ("artifact", format!("bgrdmft {VERSION}")),
        ("d", s.d.to_string()),
        ("N", s.n.to_string()),
        ("P", s.p.to_string()),
    ];
    if let Some(solver) = solver {
        m.push(("interaction", solver.interaction.clone()));
        m.push(("seed", solver.seed.to_string()));
    }
    m
}

fn cmd_sector(a: &SectorArgs) -> CliResult {
    let sector = enumerate_sector(a.d, a.n, a.p)?;
    let v = json!({
        "d": a.d,
        "N": a.n,
        "P": a.p,
        "dim": sector.dim(),
        "states": sector.states().iter().map(|s| s.occ().to_vec()).collect::<Vec<_>>(),
    });
    let text = json_text(&v);
    emit(&a.out, "sector.json", &text, true)?;
    if a.out.is_some() {
        print!("{text}");
    }
    Ok(())
}

fn cmd_domain(a: &SectorArgs) -> CliResult {
    let sector = enumerate_sector(a.d, a.n, a.p)?;
    let poly: DomainPolytope = build_domain(&sector)?;
    let mut text = poly.to_json();
    text.push('\n');
    emit(&a.out, "domain.json", &text, true)?;
    // the table carries d, N, P itself
    let csv = format!("# artifact: bgrdmft {VERSION}\n{}", poly.distances_csv());
    emit(&a.out, "facets.csv", &csv, false)?;
    if a.out.is_some() {
        println!(
            "{} states, {} vertices, {} facets, affine dimension {}",
            sector.dim(),
            poly.vertices().len(),
            poly.num_facets(),
            poly.affine_dim()
        );
    }
    Ok(())
}

fn cmd_functional(a: &FunctionalArgs) -> CliResult {
    let method: Method = a.method.parse()?;
    let (poly, w) = setup(&a.sector, &a.solver)?;
    let opts = SearchOptions::default().with_seed(a.solver.seed);
    let mut meta = base_meta(&a.sector, Some(&a.solver));
    meta.push(("method", method.tag().into()));
    meta.push(("starts", opts.starts.to_string()));
    meta.push(("tolerance", fmt_g17(opts.tolerance)));
    let d = a.sector.d;
    let (csv, summary) = if method == Method::TScan {
        let mut ts = kinetic_sweep(d, a.samples, 1e-2, 1e2, a.solver.seed);
        if d == 3 {
            ts.extend(angular_sweep(&[0.1, 1.0, 10.0], 72));
        }
        let samples = t_scan(&poly, &w, &ts)?;
        let mut header: Vec<String> = (0..d).map(|k| format!("n{k}")).collect();
        header.push("F".into());
        header.extend((0..d).map(|k| format!("t{k}")));
        header.extend(["method".into(), "degenerate_flag".into()]);
        let mut table = CsvTable::new(&header);
        for (k, v) in &meta {
            table.meta(k, v);
        }
        for (t, s) in ts.iter().zip(&samples) {
            let mut row: Vec<String> = s.n.iter().map(|&x| fmt_g17(x)).collect();
            row.push(fmt_g17(s.value));
            row.extend(t.0.iter().map(|&x| fmt_g17(x)));
            row.push(method.tag().into());
            row.push(u8::from(s.degenerate).to_string());
            table.push_row(row);
        }
        let degenerate = samples.iter().filter(|s| s.degenerate).count();
        (table.render(), json!({"samples": samples.len(), "degenerate": degenerate}))
    } else {
        meta.push(("grid", a.grid.to_string()));
        let g = functional_grid(&poly, &w, a.grid, method, &opts, !a.no_gradient)?;
        let failed = g.iter().filter(|s| s.error.is_some()).count();
        (grid_csv(&g, d, method, &meta), json!({"points": g.len(), "failed": failed}))
    };
    emit(&a.sector.out, "functional.csv", &csv, true)?;
    let mut info = serde_json::Map::new();
    for (k, v) in &meta {
        info.insert((*k).into(), json!(v));
    }
    info.insert("summary".into(), summary);
    emit(&a.sector.out, "functional.json", &json_text(&serde_json::Value::Object(info)), false)?;
    Ok(())
}

fn cmd_force(a: &ForceArgs) -> CliResult {
    let (poly, w) = setup(&a.sector, &a.solver)?;
    let opts = SearchOptions::default().with_seed(a.solver.seed);
    let fp = match a.facet {
        Some(s) => FacetPoint::new(&poly, s, a.facet_point.clone())?,
        None => FacetPoint::locate(&poly, a.facet_point.clone())?,
    };
    let result = force::repulsion_strength(&poly, &w, &fp, &opts)?;
    let eps = if a.eps_steps == 0 { Vec::new() } else { force::eps_ladder(a.eps_min, a.eps_max, a.eps_steps) };
    let fit = if eps.len() >= 2 { Some(force::verify_slope(&poly, &w, &fp, &eps, &opts)?) } else { None };
    let report = ForceReport::new(&poly, &fp, &result, fit.as_ref(), &eps);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(&a.sector.out, "force.json", &text, true)?;
    if let Some(fit) = &fit {
        let mut meta = base_meta(&a.sector, Some(&a.solver));
        meta.push(("facet", fp.facet.to_string()));
        meta.push(("G", fmt_g17(result.g)));
        emit(&a.sector.out, "slope.csv", &force::slope_csv(fit, result.g, &meta), false)?;
    }
    if a.sector.out.is_some() {
        println!("G = {}", fmt_g17(result.g));
    }
    Ok(())
}

fn cmd_approx(a: &ApproxArgs) -> CliResult {
    let meta = vec![("artifact", format!("bgrdmft {VERSION}")), ("d", "3".into()), ("N", "3".into()), ("P", "0".into())];
    match a.study {
        Study::ErrorGrid | Study::ZbarSpread => {
            let pts = approx::error_grid(a.grid);
            let summary = approx::summarize(&pts, a.grid);
            let mut m = meta.clone();
            m.push(("grid", a.grid.to_string()));
            if matches!(a.study, Study::ErrorGrid) {
                emit(&a.out, "approx_error.csv", &approx::error_grid_csv(&pts, &m), true)?;
            } else {
                let mut t = CsvTable::new(&["z_max", "zbar_min", "zbar_max", "zbar_approx"]);
                for (k, v) in &m {
                    t.meta(k, v);
                }
                for (z, lo, hi) in approx::zbar_spread(&pts, 50) {
                    t.push_floats(&[z, lo, hi, approx::approx_zbar(z)]);
                }
                emit(&a.out, "zbar_spread.csv", &t.render(), true)?;
            }
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            emit(&a.out, "approx_summary.json", &format!("{text}\n"), false)?;
            if a.out.is_some() {
                println!("{text}");
            }
        }
        Study::EnergyDisk => {
            let pts = approx::energy_error_study(a.r_steps, a.theta_steps, a.grid);
            let mut m = meta.clone();
            m.push(("r_steps", a.r_steps.to_string()));
            m.push(("theta_steps", a.theta_steps.to_string()));
            m.push(("grid", a.grid.to_string()));
            emit(&a.out, "energy_disk.csv", &approx::disk_csv(&pts, &m), true)?;
            let e_max = pts.iter().map(|p| p.e_exact).fold(f64::NEG_INFINITY, f64::max);
            let e_min = pts.iter().map(|p| p.e_exact).fold(f64::INFINITY, f64::min);
            let d_max = pts.iter().map(|p| p.delta()).fold(f64::NEG_INFINITY, f64::max);
            let summary = json!({
                "points": pts.len(),
                "E_min": e_min,
                "E_max": e_max,
                "max_dE": d_max,
                "relative": d_max / (e_max - e_min),
            });
            emit(&a.out, "energy_disk.json", &json_text(&summary), false)?;
            if a.out.is_some() {
                print!("{}", json_text(&summary));
            }
        }
    }
    Ok(())
}

fn configure_threads() -> CliResult {
    if let Ok(v) = std::env::var("BGRDMFT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Usage(format!("BGRDMFT_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Numeric(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = configure_threads().and_then(|_| match &cli.command {
        Command::Sector(a) => cmd_sector(a),
        Command::Domain(a) => cmd_domain(a),
        Command::Functional(a) => cmd_functional(a),
        Command::Force(a) => cmd_force(a),
        Command::Approx(a) => cmd_approx(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
