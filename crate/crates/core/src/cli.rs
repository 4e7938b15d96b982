//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assembly::Discretization;
use crate::cut::{build_cut_surface, CutOptions};
use crate::io::config::{parse_config, InitialCondition, RunConfig, Surface};
use crate::io::table::{cell, Table};
use crate::io::vtk::write_vtk;
use crate::levelset::{interpolate_p1, LevelSet, SixHole, Sphere};
use crate::mesh::{BackgroundMesh, Vec3};
use crate::solver::{self, ChState};
use crate::space::FieldRole;
use crate::verification::{
    eoc, ritz_error, run_convergence, surface_gradient_ambient, AnalyticField, ConvergenceSetup,
    ExactConcentration,
};
use crate::Error;

const CONFIG_HELP: &str = "\
Configuration (TOML, all keys optional):
  surface = \"sphere\" | \"sixhole\"      radius = 1.0
  box_lo, box_hi   cube bounds (default ±1.25·radius, ±2.25 for sixhole)
  n = <cells per axis> | h = <target size, default 0.1>
  epsilon = 0.05   mobility = 1.0   beta_s = 2.0   seed = 42
  initial = \"random\" | \"ritz\" | \"interpolate\"
  schedule = \"staged\" | [[t_end, tau], ...]    final_time = 5.0
  snapshot_times = [..]   output = \"out\"   threads = <k>
  [potential] K = 1.1
  [converge]  levels = [0.4, 0.2, 0.1, 0.05]  final_time = 0.1
              tau_factor = 0.5  epsilon = 0.1

Exit status: 0 on success, 1 when a run or check fails, 2 on usage or
configuration errors.";

#[derive(Debug, Parser)]
#[command(
    name = "tracefem-ch",
    version,
    about = "Trace finite elements for the Cahn-Hilliard equation on implicit surfaces",
    after_help = CONFIG_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (overrides `threads`).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Smallest accepted order between the two finest levels
    /// (default 1.8, or 1.6 for geometry-check).
    #[arg(long, global = true, value_name = "X")]
    eoc_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Manufactured-solution convergence study on the unit sphere.
    Converge,
    /// Phase separation from a random initial state.
    Simulate,
    /// Error table of the stabilized Ritz projection of x1*x2.
    ProjectTest,
    /// Area and normal accuracy of the discrete surface.
    GeometryCheck,
}

/// Runs the tool and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?
        }
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        cfg.threads = Some(k);
    }
    Ok(cfg)
}

fn run_cli(cli: &Cli) -> Result<bool, Error> {
    let cfg = load_config(cli)?;
    if let Some(mode) = cfg.mode {
        let requested = match cli.command {
            Command::Converge => crate::io::config::Mode::Converge,
            Command::Simulate => crate::io::config::Mode::Simulate,
            Command::ProjectTest => crate::io::config::Mode::ProjectTest,
            Command::GeometryCheck => crate::io::config::Mode::GeometryCheck,
        };
        if mode != requested {
            log::warn!("config mode {mode:?} ignored in favor of the {requested:?} subcommand");
        }
    }
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| Error::Usage(format!("cannot create {}: {e}", cfg.output.display())))?;
    let threads = cfg.threads;
    faer::set_global_parallelism(match threads {
        Some(1) => faer::Par::Seq,
        Some(k) => faer::Par::rayon(k),
        None => faer::Par::rayon(0),
    });
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Converge => converge(&cfg, cli.eoc_threshold.unwrap_or(1.8)),
        Command::Simulate => simulate(&cfg),
        Command::ProjectTest => project_test(&cfg, cli.eoc_threshold.unwrap_or(1.8)),
        Command::GeometryCheck => geometry_check(&cfg, cli.eoc_threshold.unwrap_or(1.6)),
    })
}

fn require_unit_sphere(cfg: &RunConfig, what: &str) -> Result<(), Error> {
    match cfg.surface {
        Surface::Sphere { radius: 1.0 } => Ok(()),
        _ => Err(Error::Usage(format!("{what} needs the unit sphere"))),
    }
}

fn level_set(surface: Surface) -> Result<Box<dyn LevelSet>, Error> {
    Ok(match surface {
        Surface::Sphere { radius } => Box::new(Sphere::new(radius)?),
        Surface::SixHole => Box::new(SixHole),
    })
}

fn write_table(table: &Table, path: &Path) -> Result<(), Error> {
    table.write(path)?;
    print!("{}", table.to_csv()?);
    println!("wrote {}", path.display());
    Ok(())
}

fn check_order(name: &str, order: Option<f64>, threshold: f64) -> bool {
    match order {
        Some(o) if o >= threshold => {
            println!("PASS {name}: order {o:.3} >= {threshold}");
            true
        }
        Some(o) => {
            println!("FAIL {name}: order {o:.3} < {threshold}");
            false
        }
        None => {
            println!("{name}: fewer than two levels, no order computed");
            true
        }
    }
}

fn converge(cfg: &RunConfig, threshold: f64) -> Result<bool, Error> {
    require_unit_sphere(cfg, "converge")?;
    let setup = ConvergenceSetup {
        params: crate::solver::SchemeParams {
            epsilon: cfg.converge.epsilon,
            ..cfg.params
        },
        bounds: cfg.bounds,
        final_time: cfg.converge.final_time,
        tau_factor: cfg.converge.tau_factor,
        ritz_initial: cfg.initial != InitialCondition::Interpolate,
        cut: CutOptions::default(),
    };
    let report = run_convergence(&setup, &cfg.converge.levels)?;
    let mut table = Table::new(&[
        "level", "h", "err_c_L2", "eoc_c", "err_mu_L2", "eoc_mu", "err_c_L2L2", "eoc",
        "err_mu_L2L2", "eoc",
    ]);
    for (i, (l, o)) in report.levels.iter().zip(report.orders()).enumerate() {
        let pick = |f: fn(&crate::verification::LevelOrders) -> f64| {
            cell(o.as_ref().map_or(f64::NAN, f))
        };
        table.push(vec![
            i.to_string(),
            cell(l.h),
            cell(l.c_l2),
            pick(|o| o.c_l2),
            cell(l.mu_l2),
            pick(|o| o.mu_l2),
            cell(l.c_l2l2),
            pick(|o| o.c_l2l2),
            cell(l.mu_l2l2),
            pick(|o| o.mu_l2l2),
        ]);
    }
    write_table(&table, &cfg.output.join("converge.csv"))?;
    Ok(check_order(
        "convergence (smallest of the four norms)",
        report.finest_orders().map(|o| o.min()),
        threshold,
    ))
}

fn project_test(cfg: &RunConfig, threshold: f64) -> Result<bool, Error> {
    require_unit_sphere(cfg, "project-test")?;
    let mut table = Table::new(&["level", "h", "err_L2", "eoc"]);
    let mut prev: Option<(f64, f64)> = None;
    let mut last = None;
    for (i, &target) in cfg.converge.levels.iter().enumerate() {
        let n = crate::verification::cells_for(&cfg.bounds, target);
        let (h, e) = ritz_error(&cfg.bounds, n)?;
        let order = prev.map(|(h0, e0)| eoc(e0, e, h0, h));
        last = order;
        table.push(vec![i.to_string(), cell(h), cell(e), cell(order.unwrap_or(f64::NAN))]);
        prev = Some((h, e));
    }
    write_table(&table, &cfg.output.join("project.csv"))?;
    Ok(check_order("ritz projection", last, threshold))
}

/// Largest angle between the discrete and exact normals at triangle centroids.
fn max_normal_angle(ls: &dyn LevelSet, cut: &crate::cut::CutSurface) -> Result<f64, Error> {
    let mut worst: f64 = 0.0;
    for tri in &cut.triangles {
        let x = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) / 3.0;
        let n = ls.normal(&x)?;
        worst = worst.max(tri.normal.dot(&n).clamp(-1.0, 1.0).acos());
    }
    Ok(worst)
}

fn geometry_check(cfg: &RunConfig, threshold: f64) -> Result<bool, Error> {
    let ls = level_set(cfg.surface)?;
    let exact_area = match cfg.surface {
        Surface::Sphere { radius } => Some(4.0 * std::f64::consts::PI * radius * radius),
        Surface::SixHole => None,
    };
    let mut table = Table::new(&[
        "level", "h", "triangles", "area", "area_err", "eoc_area", "normal_err", "eoc_normal",
    ]);
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut last_area_order = None;
    for (i, &target) in cfg.converge.levels.iter().enumerate() {
        let mesh = BackgroundMesh::new(cfg.bounds, crate::verification::cells_for(&cfg.bounds, target))?;
        let h = mesh.h();
        let field = interpolate_p1(ls.as_ref(), &mesh);
        let (cut, _) = build_cut_surface(&field, CutOptions::default())?;
        let area = cut.area();
        let area_err = exact_area.map_or(f64::NAN, |a| (area - a).abs() / a);
        let normal_err = max_normal_angle(ls.as_ref(), &cut)?;
        let (ea, en) = match prev {
            Some((h0, a0, n0)) => (eoc(a0, area_err, h0, h), eoc(n0, normal_err, h0, h)),
            None => (f64::NAN, f64::NAN),
        };
        if prev.is_some() && exact_area.is_some() {
            last_area_order = Some(ea);
        }
        table.push(vec![
            i.to_string(),
            cell(h),
            cut.triangles.len().to_string(),
            cell(area),
            cell(area_err),
            cell(ea),
            cell(normal_err),
            cell(en),
        ]);
        prev = Some((h, area_err, normal_err));
    }
    write_table(&table, &cfg.output.join("geometry.csv"))?;
    Ok(check_order("area error", last_area_order, threshold))
}

fn simulate(cfg: &RunConfig) -> Result<bool, Error> {
    let ls = level_set(cfg.surface)?;
    let mesh = BackgroundMesh::new(cfg.bounds, cfg.cells_per_axis())?;
    let disc = Discretization::build(ls.as_ref(), mesh, CutOptions::default())?;
    let params = cfg.params;
    let c0 = match cfg.initial {
        InitialCondition::Random => solver::random_initial_condition(disc.n_dof(), cfg.seed),
        InitialCondition::Interpolate => {
            disc.interpolate(|x| ExactConcentration.value(x, 0.0), FieldRole::Concentration)
        }
        InitialCondition::Ritz => {
            let normal = |x: &Vec3| ls.normal(x).unwrap_or_else(|_| Vec3::zeros());
            solver::ritz_projection(
                &disc,
                |x| ExactConcentration.value(x, 0.0),
                |x| surface_gradient_ambient(&ExactConcentration, x, 0.0, &normal(x)),
            )?
        }
    };
    println!(
        "h = {:.4}, {} dofs, area {:.6}, {} steps, beta_s = {} (L/2 = {:.4})",
        disc.h(),
        disc.n_dof(),
        disc.area(),
        cfg.schedule.steps().len(),
        params.beta_s,
        0.5 * params.potential.lipschitz()
    );
    let init = ChState::initial(&disc, c0, &params);
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut written = 0usize;
    let mut snap_error: Option<Error> = None;
    let mut snapshot = |st: &ChState, pending: &mut Vec<f64>| {
        let due = pending.iter().take_while(|&&t| t <= st.t + 1e-12).count();
        if due == 0 || snap_error.is_some() {
            return;
        }
        pending.drain(..due);
        let path = cfg.output.join(format!("snapshot_{written:04}.vtk"));
        match write_vtk(&path, &disc.cut, &disc.band, &disc.space, &[("c", &st.c), ("mu", &st.mu)]) {
            Ok(()) => log::info!("t = {}: wrote {}", st.t, path.display()),
            Err(e) => snap_error = Some(e.into()),
        }
        written += 1;
    };
    snapshot(&init, &mut pending);
    let outcome = solver::run(&disc, &params, &cfg.schedule, init, None, |st| {
        snapshot(st, &mut pending)
    });

    let mut table = Table::new(&["t", "energy", "mass"]);
    for e in &outcome.state.history {
        table.push(vec![cell(e.t), cell(e.energy), cell(e.mass)]);
    }
    let path = cfg.output.join("history.csv");
    table.write(&path)?;
    println!(
        "wrote {} ({} entries, {} factorizations, {} snapshots)",
        path.display(),
        table.rows.len(),
        outcome.factorizations,
        written
    );
    if let Some(e) = snap_error {
        return Err(e);
    }
    if let Some(e) = outcome.error {
        return Err(e.into());
    }

    let history = &outcome.state.history;
    let m0 = history[0].mass;
    let area = disc.area();
    let drift = history.iter().map(|e| (e.mass - m0).abs()).fold(0.0, f64::max);
    let mut ok = drift <= 1e-9 * area;
    println!(
        "{} mass drift {drift:.3e} (limit {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        1e-9 * area
    );
    let increases = history
        .windows(2)
        .filter(|w| w[1].energy > w[0].energy + 1e-12 * w[0].energy.abs().max(1.0))
        .count();
    if params.is_energy_stable() {
        let pass = increases == 0;
        ok &= pass;
        println!(
            "{} energy non-increasing ({increases} increases)",
            if pass { "PASS" } else { "FAIL" }
        );
    } else {
        println!("energy monitored only (beta_s < L/2): {increases} increases");
    }
    Ok(ok)
}
