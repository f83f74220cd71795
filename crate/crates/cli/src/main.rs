//! `lgp`: least gradient solver front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leastgrad::barrier::{self, barrier_indicator, classify, signed_distance};
use leastgrad::field_io::{read_field, read_mask, write_atomic, write_field};
use leastgrad::functional::{duality_gap, phi_perimeter};
use leastgrad::gallery::{self, solve_quantities, GalleryReport, RunOptions, Task};
use leastgrad::imaging::{run_pipeline, ImagingOptions, ImagingProblem, Phantom};
use leastgrad::problem::{BoundaryData, Problem, ProblemSpec};
use leastgrad::solver::{load_checkpoint, resume, save_checkpoint, Solver};
use leastgrad::structure::{contours_csv, heatmap_pgm, level_sets, structure_report, StructureOptions};
use leastgrad::{build_mask, DomainMask, Error, MetricField, NormKind, ScalarGrid, Shape, VectorGrid};
use serde_json::json;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_UNCONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "lgp", version, about = "Anisotropic least gradient problems with duality certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the relaxed problem and write u, T and a report.
    Solve(SolveArgs),
    /// Re-evaluate energies and the duality gap for saved u and T.
    Certify(CertifyArgs),
    /// Alignment, boundary-jump and arc diagnostics for saved u and T.
    Structure(CertifyArgs),
    /// Curvature barrier indicator on the domain boundary.
    Barrier(BarrierArgs),
    /// Metric perimeter of a set.
    Perimeter(PerimeterArgs),
    /// Conductivity imaging round trip on the unit square.
    Imaging(ImagingArgs),
    /// Built-in problems with expected values.
    Gallery {
        #[command(subcommand)]
        cmd: GalleryCmd,
    },
}

#[derive(Args, Clone, Default)]
struct ProblemArgs {
    /// TOML problem file.
    #[arg(long, conflicts_with_all = ["gallery", "shape", "mask"])]
    config: Option<PathBuf>,
    /// Gallery entry id (solve entries only).
    #[arg(long, conflicts_with_all = ["shape", "mask"])]
    gallery: Option<String>,
    /// Domain shape, e.g. `disk:1` or `annulus:0.5,1`.
    #[arg(long, conflicts_with = "mask")]
    shape: Option<String>,
    /// Domain mask file (field CSV, nonzero = interior).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Boundary data: linear-x, linear-y, const:<c>, top-edge[:amp,slope], file:<path>.
    #[arg(long)]
    data: Option<String>,
    /// Cells across the shape bounding box.
    #[arg(long)]
    n: Option<usize>,
    /// Metric kind: isotropic, riemannian, l1, linf.
    #[arg(long)]
    metric: Option<String>,
    /// Metric weight: a number, `id:<name>` or `file:<path>`.
    #[arg(long)]
    weight: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    tol_div: Option<f64>,
    #[arg(long)]
    check_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from a seeded random iterate instead of zero.
    #[arg(long)]
    random_init: bool,
    /// Continue from the checkpoint in this directory.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Write solver state to `<out>/checkpoint`.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    u: PathBuf,
    #[arg(long)]
    tx: PathBuf,
    #[arg(long)]
    ty: PathBuf,
    /// Directory for the report (printed to stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BarrierArgs {
    #[arg(long, required_unless_present = "mask")]
    shape: Option<String>,
    #[arg(long, conflicts_with = "shape")]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value = "isotropic")]
    metric: String,
    #[arg(long)]
    weight: Option<String>,
    /// Classification margin (default 10h).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerimeterArgs {
    /// Domain shape.
    #[arg(long)]
    domain: String,
    /// The set whose perimeter is measured.
    #[arg(long)]
    set: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value = "isotropic")]
    metric: String,
}

#[derive(Args)]
struct ImagingArgs {
    /// const[:c], layered[:c0,slope] or bump[:amp,cx,cy,width2].
    #[arg(long)]
    phantom: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GalleryCmd {
    List,
    /// Run one entry, or `all`.
    Run {
        id: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION })
        }
    }
}

type Res<T> = leastgrad::Result<T>;

fn threads() -> Res<usize> {
    match std::env::var("LG_THREADS") {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(Error::Config(format!("LG_THREADS must be a positive integer, got `{s}`"))),
        },
    }
}

fn run(cli: Cli) -> Res<u8> {
    match cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::Certify(a) => certify(a, false),
        Cmd::Structure(a) => certify(a, true),
        Cmd::Barrier(a) => barrier_cmd(a),
        Cmd::Perimeter(a) => perimeter(a),
        Cmd::Imaging(a) => imaging(a),
        Cmd::Gallery { cmd: GalleryCmd::List } => {
            for g in gallery::gallery() {
                println!("{:<22} n={:<4} {}", g.id, g.resolution(), g.summary);
            }
            Ok(0)
        }
        Cmd::Gallery { cmd: GalleryCmd::Run { id, n, out } } => gallery_run(&id, n, out.as_deref()),
    }
}

fn spec_from_args(a: &ProblemArgs) -> Res<ProblemSpec> {
    let mut spec = if let Some(path) = &a.config {
        ProblemSpec::load(path)?
    } else if let Some(id) = &a.gallery {
        match gallery::find(id)?.task {
            Task::Solve(s) => s,
            _ => return Err(Error::Config(format!("gallery entry `{id}` is not a solve problem"))),
        }
    } else {
        let data: BoundaryData = a
            .data
            .as_deref()
            .ok_or_else(|| Error::Config("one of --config, --gallery, or --shape/--mask with --data is required".into()))?
            .parse()?;
        let mut spec = ProblemSpec::simple(&Shape::unit_box(), a.n.unwrap_or(64), &data);
        spec.base_dir = PathBuf::from(".");
        match (&a.shape, &a.mask) {
            (Some(s), None) => spec.problem.shape = Some(s.parse::<Shape>()?.to_string()),
            (None, Some(m)) => {
                spec.problem.shape = None;
                spec.problem.mask = Some(m.to_string_lossy().into_owned());
            }
            _ => return Err(Error::Config("--shape or --mask is required".into())),
        }
        spec
    };
    if let Some(d) = &a.data {
        spec.boundary.data = d.parse::<BoundaryData>()?.to_string();
    }
    if let Some(n) = a.n {
        spec.problem.n = n;
    }
    if let Some(k) = &a.metric {
        spec.metric.kind = k.clone();
    }
    if let Some(w) = &a.weight {
        spec.metric.weight = match w.parse::<f64>() {
            Ok(v) => leastgrad::problem::WeightSource::Value(v),
            Err(_) => leastgrad::problem::WeightSource::Named(w.clone()),
        };
    }
    spec.solver.threads = threads()?;
    spec.check()?;
    Ok(spec)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Res<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_vector(dir: &Path, stem: &str, v: &VectorGrid) -> Res<()> {
    write_field(&dir.join(format!("{stem}_x.csv")), &ScalarGrid { grid: v.grid, values: v.x.clone() })?;
    write_field(&dir.join(format!("{stem}_y.csv")), &ScalarGrid { grid: v.grid, values: v.y.clone() })
}

/// Nine levels evenly spaced strictly inside the range of `u` on the domain.
fn contour_levels(u: &ScalarGrid, mask: &DomainMask) -> Vec<f64> {
    let vals = mask.interior_cells.iter().map(|&c| u.values[c]);
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Vec::new();
    }
    (1..10).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect()
}

fn write_plots(dir: &Path, stem: &str, u: &ScalarGrid, mask: &DomainMask) -> Res<()> {
    write_atomic(&dir.join(format!("{stem}.pgm")), heatmap_pgm(u, Some(mask)).as_bytes())?;
    let c = level_sets(u, &contour_levels(u, mask), Some(mask))?;
    write_atomic(&dir.join(format!("{stem}_contours.csv")), contours_csv(&c).as_bytes())
}

fn solve(a: SolveArgs) -> Res<u8> {
    let mut spec = spec_from_args(&a.problem)?;
    let s = &mut spec.solver;
    if let Some(v) = a.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = a.tol_gap {
        s.tol_gap = v;
    }
    if let Some(v) = a.tol_div {
        s.tol_div = v;
    }
    if let Some(v) = a.check_every {
        s.check_every = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if a.random_init {
        s.random_init = true;
    }
    let p: Problem = spec.build()?;
    let out = match &a.resume {
        Some(dir) => {
            let state = load_checkpoint(dir, &p.mask)?;
            resume(state, &p.f, &p.metric, &p.mask, &p.solver, p.solver.max_iters)?
        }
        None => {
            let solver = Solver::new(&p.f, &p.metric, &p.mask, p.solver.clone())?;
            let mut state = solver.init_state();
            solver.run(&mut state, p.solver.max_iters)?;
            solver.output(&state)?
        }
    };
    log::info!("solve finished after {} iterations in {:.2}s", out.report.iterations, out.state.wall_time_s);
    let structure = structure_report(&out.u, &p.f, &out.t, &p.metric, &p.mask, &StructureOptions::default())?;
    let quantities = solve_quantities(&p, &out, &structure);

    std::fs::create_dir_all(&a.out)?;
    write_field(&a.out.join("u.csv"), &out.u)?;
    write_vector(&a.out, "T", &out.t)?;
    write_plots(&a.out, "u", &out.u, &p.mask)?;
    if a.problem.config.is_none() {
        write_atomic(&a.out.join("problem.toml"), spec.to_toml()?.as_bytes())?;
    }
    if a.checkpoint {
        let dir = a.out.join("checkpoint");
        std::fs::create_dir_all(&dir)?;
        save_checkpoint(&dir, &out.state, &p.mask)?;
    }
    let report = json!({
        "problem": spec,
        "solve": out.report,
        "quantities": quantities,
        "structure": structure,
    });
    write_json(&a.out.join("report.json"), &report)?;

    let e = &out.report.energy;
    println!(
        "iterations {}  converged {}  primal {:.9}  dual {:.9}  relative gap {:.3e}  div {:.3e}",
        out.report.iterations,
        out.report.converged,
        e.relaxed_total,
        e.dual,
        e.relative_gap(),
        e.div_residual
    );
    if out.report.converged {
        Ok(0)
    } else {
        eprintln!("warning: not converged; wrote best checked iterate (iteration {})", out.report.returned_iteration);
        Ok(EXIT_UNCONVERGED)
    }
}

fn load_pair(a: &CertifyArgs, p: &Problem) -> Res<(ScalarGrid, VectorGrid)> {
    let u = read_field(&a.u)?;
    let tx = read_field(&a.tx)?;
    let ty = read_field(&a.ty)?;
    for (f, name) in [(&u, "u"), (&tx, "T_x"), (&ty, "T_y")] {
        p.mask.check_scalar(f, name)?;
    }
    Ok((u, VectorGrid { grid: tx.grid, x: tx.values, y: ty.values }))
}

fn certify(a: CertifyArgs, structure: bool) -> Res<u8> {
    let spec = spec_from_args(&a.problem)?;
    let p = spec.build()?;
    let (u, t) = load_pair(&a, &p)?;
    let (name, value) = if structure {
        let s = structure_report(&u, &p.f, &t, &p.metric, &p.mask, &StructureOptions::default())?;
        if let Some(dir) = &a.out {
            std::fs::create_dir_all(dir)?;
            write_plots(dir, "u", &u, &p.mask)?;
        }
        ("structure.json", serde_json::to_value(&s)?)
    } else {
        let g = duality_gap(&u, &p.f, &p.metric, &p.mask, &t)?;
        let mut v = serde_json::to_value(g)?;
        v["relative_gap"] = json!(g.relative_gap());
        ("certificate.json", v)
    };
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_json(&dir.join(name), &value)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&value)?),
    }
    Ok(0)
}

fn weight_field(mask: &DomainMask, weight: Option<&str>) -> Res<ScalarGrid> {
    let grid = mask.grid;
    match weight {
        None => Ok(ScalarGrid::constant(grid, 1.0)),
        Some(w) => {
            if let Ok(v) = w.parse::<f64>() {
                Ok(ScalarGrid::constant(grid, v))
            } else if let Some(id) = w.strip_prefix("id:") {
                let f = leastgrad::problem::weight_by_id(id)?;
                Ok(ScalarGrid::from_fn(grid, f))
            } else if let Some(path) = w.strip_prefix("file:") {
                let f = read_field(Path::new(path))?;
                mask.check_scalar(&f, "weight")?;
                Ok(f)
            } else {
                Err(Error::Config(format!("bad weight `{w}`")))
            }
        }
    }
}

fn barrier_cmd(a: BarrierArgs) -> Res<u8> {
    let mask = match (&a.shape, &a.mask) {
        (Some(s), _) => build_mask(&s.parse::<Shape>()?, a.n)?,
        (None, Some(m)) => read_mask(m)?,
        (None, None) => return Err(Error::Config("--shape or --mask is required".into())),
    };
    let kind = NormKind::parse(&a.metric)?;
    let w = weight_field(&mask, a.weight.as_deref())?;
    let m = MetricField::new(kind, w, None)?;
    let d = signed_distance(&mask)?;
    let rep = classify(&barrier_indicator(&m, &d, &mask, None)?, &mask, a.delta)?;
    let q = gallery::barrier_quantities(&mask, &rep);
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("barrier.csv"), barrier::report_csv(&rep, &mask).as_bytes())?;
        write_json(&dir.join("barrier.json"), &json!({ "report": rep, "quantities": q }))?;
    }
    for (k, c) in rep.components.iter().enumerate() {
        println!(
            "component {k}: {} faces  pass {:.3}  fail {:.3}  marginal {:.3}",
            c.faces, c.pass, c.fail, c.marginal
        );
    }
    println!("verdict: {}", serde_json::to_value(rep.verdict)?.as_str().unwrap_or("?"));
    Ok(0)
}

fn perimeter(a: PerimeterArgs) -> Res<u8> {
    let domain: Shape = a.domain.parse()?;
    let set: Shape = a.set.parse()?;
    let mask = build_mask(&domain, a.n)?;
    let m = MetricField::uniform(NormKind::parse(&a.metric)?, mask.grid, 1.0, None)?;
    let e = ScalarGrid::from_fn(mask.grid, |x, y| if set.contains([x, y]) { 1.0 } else { 0.0 });
    println!("{}", phi_perimeter(&e, &m, &mask)?);
    Ok(0)
}

fn imaging(a: ImagingArgs) -> Res<u8> {
    let phantom: Phantom = a.phantom.parse()?;
    let p = ImagingProblem::unit_box(phantom, a.n)?;
    let mut solver = leastgrad::SolverOptions { threads: threads()?, ..Default::default() };
    if let Some(k) = a.max_iters {
        solver.max_iters = k;
    }
    let r = run_pipeline(&p, &solver, &ImagingOptions::default())?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        let f = &r.fields;
        write_field(&dir.join("u_forward.csv"), &f.u_forward)?;
        write_field(&dir.join("u.csv"), &f.u_recovered)?;
        write_field(&dir.join("a.csv"), &f.a)?;
        write_field(&dir.join("c_recovered.csv"), &f.c_recovered)?;
        write_field(&dir.join("c_true.csv"), &f.c_true)?;
        write_vector(dir, "J", &f.j)?;
        write_vector(dir, "T", &f.t)?;
        write_atomic(&dir.join("c_recovered.pgm"), heatmap_pgm(&f.c_recovered, Some(&p.mask)).as_bytes())?;
        write_json(&dir.join("report.json"), &r)?;
    }
    println!(
        "rel L2 error c {:.3e}  u {:.3e}  excluded {:.3}  converged {}",
        r.rel_l2_error_c, r.rel_l2_error_u, r.excluded_fraction, r.solve.converged
    );
    Ok(if r.solve.converged { 0 } else { EXIT_UNCONVERGED })
}

fn print_gallery(r: &GalleryReport) {
    println!("{} (n = {}): {}", r.id, r.n, if r.passed { "pass" } else { "FAIL" });
    for c in &r.checks {
        let actual = c.actual.map_or("missing".to_string(), |v| format!("{v:.6e}"));
        println!("  {:<4} {:<26} {actual:<14} {:?}", if c.pass { "ok" } else { "FAIL" }, c.quantity, c.check);
    }
}

fn gallery_run(id: &str, n: Option<usize>, out: Option<&Path>) -> Res<u8> {
    let entries = if id == "all" { gallery::gallery() } else { vec![gallery::find(id)?] };
    let opts = RunOptions { n, threads: Some(threads()?), solver: None };
    let mut all = true;
    for e in &entries {
        let r = gallery::gallery_run(e, &opts)?;
        print_gallery(&r);
        all &= r.passed;
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            let name = if entries.len() == 1 { "report.json".to_string() } else { format!("{}.json", r.id) };
            write_json(&dir.join(name), &r)?;
        }
    }
    Ok(if all { 0 } else { EXIT_UNCONVERGED })
}
