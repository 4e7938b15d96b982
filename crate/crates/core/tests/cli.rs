//! Command-line behavior of the `tracefem-ch` binary.

use std::path::Path;
use std::process::{Command, Output};

use tracefem_ch::io::table::Table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tracefem-ch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_config_keys() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["converge", "simulate", "project-test", "geometry-check", "beta_s = 2.0", "K = 1.1"] {
        assert!(text.contains(key), "help lacks {key}");
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "surface = \"sphere\"\nepsilon = -1\n");
    let out = run(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsilon") && err.contains("line 2"), "{err}");
    let cfg = write(dir.path(), "unknown.toml", "surfce = \"sphere\"\n");
    assert_eq!(run(&["simulate", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", "/no/such/file.toml"]).status.code(), Some(2));
}

#[test]
fn geometry_check_reports_second_order_area() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "[converge]\nlevels = [0.4, 0.2, 0.1]\n");
    let out_dir = dir.path().join("out");
    let out = run(&["geometry-check", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let t = Table::read(&out_dir.join("geometry.csv")).unwrap();
    assert_eq!(t.rows.len(), 3);
    let eocs = t.column(5).unwrap();
    assert!(eocs[1..].iter().all(|&e| e >= 1.6), "{eocs:?}");
}

#[test]
fn converge_below_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[converge]\nlevels = [0.4, 0.2]\n");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "converge", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--eoc-threshold", "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = std::fs::read_to_string(out_dir.join("converge.csv")).unwrap();
    assert!(text.starts_with(
        "level,h,err_c_L2,eoc_c,err_mu_L2,eoc_mu,err_c_L2L2,eoc,err_mu_L2L2,eoc\n"
    ));
    let t = Table::from_csv(&text).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.column(2).unwrap().iter().all(|e| *e > 0.0));
}

#[test]
fn project_test_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", "[converge]\nlevels = [0.4, 0.2]\n");
    let out_dir = dir.path().join("out");
    let out = run(&["project-test", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let t = Table::read(&out_dir.join("project.csv")).unwrap();
    assert_eq!(t.header, vec!["level", "h", "err_L2", "eoc"]);
    assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
}

const SIM: &str = "surface = \"sphere\"\nn = 10\nepsilon = 0.1\nbeta_s = 2.0\nseed = 7\n\
schedule = [[0.05, 0.01], [0.2, 0.05]]\nfinal_time = 0.2\nsnapshot_times = [0.0, 0.1]\n";

#[test]
fn simulate_writes_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SIM);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap(), "--threads", "1"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let hist = Table::read(&a.join("history.csv")).unwrap();
    assert_eq!(hist.header, vec!["t", "energy", "mass"]);
    assert_eq!(hist.rows.len(), 1 + 5 + 3);
    let e = hist.column(1).unwrap();
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
    for name in ["history.csv", "snapshot_0000.vtk", "snapshot_0001.vtk"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
    let vtk = std::fs::read_to_string(a.join("snapshot_0001.vtk")).unwrap();
    let count = |key: &str| -> usize {
        vtk.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split_whitespace().nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(count("POINTS"), 3 * count("POLYGONS"));
    assert!(vtk.contains("SCALARS c double 1") && vtk.contains("SCALARS mu double 1"));
}

#[test]
fn in_process_entry_point() {
    assert_eq!(tracefem_ch::cli::main_with_args(["tracefem-ch", "nope"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "[converge]\nlevels = [0.5]\n");
    let out = dir.path().join("o");
    let code = tracefem_ch::cli::main_with_args([
        "tracefem-ch",
        "geometry-check",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg = tracefem_ch::io::config::parse_config(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.mode.is_some(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
