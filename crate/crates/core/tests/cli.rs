use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use isodrum::cli::{CompareReport, ExtrapolationReport, FieldDump};
use isodrum::geometry::{Domain, DomainName};
use isodrum::grid::Grid;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isodrum"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn solve_square_writes_closed_form_csv_and_matrix() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "sq.cfg", "domain = square\nleg = 1\ngrid.h = 1/8\nsolver.k = 3\n");
    let out = run(d.path(), &["solve", "--config", "sq.cfg", "--out", "o", "--dump-matrix"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.path().join("o/spectrum_square.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let h = 1.0f64 / 8.0;
    let s = |p: f64| (p * std::f64::consts::PI * h / 2.0).sin().powi(2);
    let exact = [2.0 * s(1.0), s(1.0) + s(2.0), s(1.0) + s(2.0)].map(|x| 4.0 / (h * h) * x);
    for (r, e) in rows.iter().zip(exact) {
        assert!((r[1] - e).abs() <= 1e-10 * e);
    }
    let mtx = fs::read_to_string(d.path().join("o/operator_square.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
}

#[test]
fn exit_codes_separate_config_from_numerical_failures() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.cfg", "domain = pair\ngrid.h = 0.3\n");
    let out = run(d.path(), &["solve", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reflection"));

    let out = run(d.path(), &["solve", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));

    // more eigenpairs than unknowns
    write(d.path(), "k.cfg", "domain = square\nleg = 1\ngrid.cells = 3\nsolver.k = 5\n");
    assert_eq!(run(d.path(), &["solve", "--config", "k.cfg"]).status.code(), Some(2));

    write(d.path(), "neg.cfg", "domain = pair\ngrid.cells = 4\nfield.sigma.B = -1\n");
    assert_eq!(run(d.path(), &["solve", "--config", "neg.cfg"]).status.code(), Some(2));
}

#[test]
fn compare_pair_and_negative_control() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "ef.cfg",
        "domain = pair\nleg = 2\ngrid.cells = 8, 16\nfield.kind = efield\nfield.efield.magnitude = 5\nsolver.k = 4\n",
    );
    let out = run(d.path(), &["compare", "--config", "ef.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let r: CompareReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("o/compare.json")).unwrap()).unwrap();
    assert!(r.exact);
    assert_eq!(r.intertwining_residual, 0.0);
    assert!(r.max_rel_diff <= 1e-10);
    assert_eq!(r.field_direction, Some([0.0, 1.0]));
    assert_eq!(r.field_anchor, Some([0.0, 0.0]));
    assert_eq!(r.grids.len(), 2);

    write(
        d.path(),
        "pt.cfg",
        "domain = pair\nleg = 2\ngrid.cells = 8\nfield.kind = split\nfield.perturb.block = D\nfield.perturb.factor = 1.1\nsolver.k = 3\n",
    );
    let out = run(d.path(), &["compare", "--config", "pt.cfg", "--out", "p"]);
    let r: CompareReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!r.exact);
    assert!(r.intertwining_residual > 0.0);
    assert!(r.max_rel_diff > 1e-6);

    write(d.path(), "one.cfg", "domain = gww_a\ngrid.cells = 8\n");
    assert_eq!(run(d.path(), &["compare", "--config", "one.cfg"]).status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.cfg",
        "domain = pair\nleg = 2\ngrid.cells = 12\nfield.kind = charges\nsolver.k = 4\noutput.field_dump = true\n",
    );
    for o in ["a", "b"] {
        assert!(run(d.path(), &["solve", "--config", "c.cfg", "--out", o]).status.success());
        assert!(run(d.path(), &["compare", "--config", "c.cfg", "--out", o]).status.success());
    }
    for f in ["spectrum_gww_a.csv", "spectrum_gww_b.csv", "state1_gww_a.bin", "compare.json"] {
        assert_eq!(
            fs::read(d.path().join("a").join(f)).unwrap(),
            fs::read(d.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let out = run(d.path(), &["solve", "--config", "c.cfg", "--out", "s", "--seed", "7"]);
    assert!(out.status.success());
}

#[test]
fn ground_state_dump_is_a_single_signed_lobe() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "ef.cfg",
        "domain = gww_a\nleg = 2\ngrid.cells = 16\nfield.kind = efield\nfield.efield.magnitude = 5\nsolver.k = 2\noutput.field_dump = true\n",
    );
    assert!(run(d.path(), &["solve", "--config", "ef.cfg", "--out", "o"]).status.success());
    let dump = FieldDump::read_from(fs::File::open(d.path().join("o/state1_gww_a.bin")).unwrap()).unwrap();
    let g = Grid::with_cells(&Domain::by_name(DomainName::GwwA, 2.0).unwrap(), 16).unwrap();
    assert_eq!(dump.values.len(), g.len());
    assert_eq!(dump.tag, "gww_a:psi1");
    assert_eq!(dump.h, 0.125);
    let pos = dump.values.iter().filter(|v| **v > 0.0).count();
    assert!(pos == 0 || pos == g.len(), "ground state changes sign");
}

#[test]
fn field_dump_matches_grid_dump() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.cfg", "domain = gww_b\nleg = 2\ngrid.cells = 8\nfield.kind = split\n");
    assert!(run(d.path(), &["field-dump", "--config", "s.cfg", "--out", "o"]).status.success());
    let dump = FieldDump::read_from(fs::File::open(d.path().join("o/field_gww_b.bin")).unwrap()).unwrap();
    let grid = fs::read_to_string(d.path().join("o/grid_gww_b.txt")).unwrap();
    let header: Vec<&str> = grid.lines().next().unwrap().split(' ').collect();
    assert_eq!(header[3].parse::<usize>().unwrap(), dump.values.len());
    assert_eq!(header[0].parse::<i64>().unwrap(), dump.nx);
    assert!(dump.values.iter().all(|v| *v == 1.0 || *v == 2.0));
}

#[test]
fn extrapolate_csv_recovers_planted_limit() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.csv", "h,E\n1/10,3.07\n1/20,3.0175\n1/40,3.004375\n");
    let out = run(d.path(), &["extrapolate", "--csv", "s.csv"]);
    assert!(out.status.success());
    let r: ExtrapolationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r.limit - 3.0).abs() < 1e-13);
    assert_eq!(r.table.len(), 3);

    write(d.path(), "one.csv", "h,E\n0.1,1\n");
    assert_eq!(run(d.path(), &["extrapolate", "--csv", "one.csv"]).status.code(), Some(2));
    write(d.path(), "junk.csv", "h,E\n0.1,1\nnot,numbers\n");
    assert_eq!(run(d.path(), &["extrapolate", "--csv", "junk.csv"]).status.code(), Some(2));
}

#[test]
fn build_writes_domains_grids_and_map() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "p.cfg", "domain = pair\nleg = 2\ngrid.cells = 4\n");
    let out = run(d.path(), &["build", "--config", "p.cfg", "--out", "o"]);
    assert!(out.status.success());
    let text = fs::read_to_string(d.path().join("o/domain_gww_a.txt")).unwrap();
    assert_eq!(Domain::from_text(&text).unwrap(), Domain::gww_a(2.0).unwrap());
    let t = fs::read_to_string(d.path().join("o/transplant.txt")).unwrap();
    assert_eq!(t.lines().count(), 7);
    assert!(String::from_utf8_lossy(&out.stdout).contains("points=39"));
}

#[test]
fn unreachable_tolerance_exits_numerical_with_partial_csv() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "t.cfg", "domain = square\nleg = 1\ngrid.cells = 12\nsolver.k = 2\nsolver.tol = 1e-300\n");
    let out = run(d.path(), &["solve", "--config", "t.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    let csv = fs::read_to_string(d.path().join("o/spectrum_square.csv")).unwrap();
    assert!(csv.starts_with("n,E,residual,converged\n"));
    assert_eq!(csv.lines().filter(|l| l.ends_with(",false")).count(), 2);
}
