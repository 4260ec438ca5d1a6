//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed. Criteria
//! that cannot hold as literally stated are reported as FAIL together with
//! the negative result, which is asserted; the process fails only when an
//! attainable criterion fails or a negative result stops holding.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use isodrum::cli::{compare, prepare};
use isodrum::config::ExperimentConfig;
use isodrum::eigen::{
    dense_eigen_oracle, dense_generalized_oracle, lowest_eigenpairs, weyl_ratio, Spectrum,
};
use isodrum::extrapolate::{convergence_rate, richardson, ConvergenceSequence};
use isodrum::field::total_mass;
use isodrum::geometry::{build_gww_pair, Domain, DomainName};
use isodrum::grid::Grid;
use isodrum::operator::assemble_laplacian;
use isodrum::transplant::{
    class_block_structure_attainable, derive_transplantation, verify_intertwining,
};

const REFERENCE_FD: [f64; 10] = [
    1.52189, 2.63494, 3.08334, 4.58312, 4.83882, 6.23355, 6.68975, 7.71814, 7.92551, 8.66913,
];
const REFERENCE_EX: [f64; 10] = [
    1.51992, 2.63002, 3.07902, 4.57697, 4.83108, 6.22662, 6.67769, 7.70122, 7.91504, 8.65750,
];
const EFIELD_E1: f64 = -1.21302;

const HOMOGENEOUS: &str = "field.kind = density\n";
const SPLIT: &str = "field.kind = split\n";
const SPLIT_LEG2: &str = "field.kind = split\nfield.split.side = leg2\n";
const EFIELD: &str = "field.kind = efield\nfield.efield.magnitude = 5\n";
const CHARGES: &str = "field.kind = charges\n";
const PARITY_CLASS: &str = "field.kind = density\nfield.sigma = 1\nfield.sigma.B = 2\n\
                            field.sigma.D = 2\nfield.sigma.F = 2\nfield.sigma.G = 2\n";

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    /// Fails as stated; the recorded counter-result holds.
    Unattainable,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: &str, what: &str, verdict: Verdict, detail: String) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail | Verdict::Unattainable => "FAIL",
        };
        if verdict == Verdict::Fail {
            self.failures += 1;
        }
        println!("{tag} [{id}] {what}: {detail}");
    }

    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        self.report(id, what, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn config(domain: &str, leg: f64, grid: &str, field: &str, k: usize) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "domain = {domain}\nleg = {leg}\n{grid}\n{field}solver.k = {k}\n"
    ))
    .unwrap()
}

fn solve(cfg: &ExperimentConfig, name: DomainName, cells: i64) -> (Spectrum, Duration) {
    let t = Instant::now();
    let p = prepare(cfg, name, cells).unwrap();
    let s = lowest_eigenpairs(&p.operator, cfg.solver.k, cfg.solver.tol).unwrap();
    (s, t.elapsed())
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

/// Criterion 1 for one field; returns (worst residual, all exact, worst rel diff).
fn isospectral(field: &str) -> (f64, bool, f64) {
    let cfg = config("pair", 2.0, "grid.cells = 8, 16, 32", field, 10);
    let r = compare(&cfg, None).unwrap();
    (r.intertwining_residual, r.exact, r.max_rel_diff)
}

fn criterion_1(s: &mut Suite) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, field) in [
        ("homogeneous", HOMOGENEOUS),
        ("split", SPLIT),
        ("efield", EFIELD),
        ("charges", CHARGES),
    ] {
        let t = Instant::now();
        let (res, exact, rel) = isospectral(field);
        ok &= res == 0.0 && exact && rel <= 1e-10;
        parts.push(format!(
            "{name} residual={res:e} rel={rel:.1e} ({:.1}s)",
            t.elapsed().as_secs_f64()
        ));
    }
    s.check("1", "bitwise intertwining, l/h in {8,16,32}", ok, parts.join("; "));
}

fn criterion_2_and_3(s: &mut Suite) {
    // l/h = 240 (k = 30) is the last grid of the sweep.
    let cfg = config("gww_a", 2.0, "grid.k = 19..30", SPLIT, 10);
    let mut rows = Vec::new();
    let mut total = Duration::ZERO;
    for &cells in &cfg.cells {
        let (sp, dt) = solve(&cfg, DomainName::GwwA, cells);
        total += dt;
        rows.push((cells, 2.0 / cells as f64, sp.eigenvalues, dt));
    }
    let fine = &rows.last().unwrap().2;
    let points = Grid::with_cells(&Domain::gww_a(2.0).unwrap(), 240).unwrap().len();

    let cfg_b = config("gww_b", 2.0, "grid.cells = 240", SPLIT, 10);
    let (sb, _) = solve(&cfg_b, DomainName::GwwB, 240);
    let rel_a = max_rel(fine, &REFERENCE_FD);
    let rel_b = max_rel(&sb.eigenvalues, &REFERENCE_FD);
    s.check(
        "2",
        "reference FD spectrum at 200521 points",
        points == 200521 && rel_a <= 5e-4 && rel_b <= 5e-4,
        format!(
            "points={points}, max rel err GWW_A={rel_a:.2e} GWW_B={rel_b:.2e} (tol 5e-4), \
             split drum dark half on leg1, {:.1}s per solve",
            rows.last().unwrap().3.as_secs_f64()
        ),
    );

    let (res, exact, rel) = isospectral(SPLIT_LEG2);
    s.check(
        "2c",
        "complementary assignment (dark half on leg2) isospectral",
        res == 0.0 && exact && rel <= 1e-10,
        format!("residual={res:e} rel={rel:.1e}"),
    );

    let (res, exact, rel) = isospectral(PARITY_CLASS);
    let counter = !exact && res > 0.0 && rel > 1e-3;
    s.report(
        "2p",
        "parity-class assignment {A,C,E}=1 {B,D,F,G}=2 isospectral",
        if counter { Verdict::Unattainable } else { Verdict::Fail },
        format!(
            "residual={res:.3e} rel={rel:.2e}: every fold joins opposite classes, so this density \
             is not mirror symmetric and the pair is not isospectral"
        ),
    );

    let seq = |i: usize, pick: &dyn Fn(i64) -> bool| {
        ConvergenceSequence::new(
            format!("E{}", i + 1),
            rows.iter()
                .filter(|r| pick(r.0))
                .map(|r| (r.1, r.2[i]))
                .collect(),
        )
        .unwrap()
    };
    let mut worst = 0.0f64;
    let mut worst_first_order = 0.0f64;
    let mut rates = Vec::new();
    for i in 0..10 {
        let full = seq(i, &|_| true);
        worst = worst.max((richardson(&full, 2.0).unwrap().limit - REFERENCE_EX[i]).abs() / REFERENCE_EX[i]);
        worst_first_order = worst_first_order
            .max((richardson(&full, 1.0).unwrap().limit - REFERENCE_EX[i]).abs() / REFERENCE_EX[i]);
        rates.push(convergence_rate(&full).unwrap());
    }
    s.check(
        "3",
        "Richardson (h^2) over k=19..30 vs reference extrapolated spectrum",
        worst <= 5e-3 && total.as_secs() <= 7200,
        format!(
            "max rel err {worst:.2e} (tol 5e-3), sweep {:.0}s; first-order tableau gives {worst_first_order:.1e}",
            total.as_secs_f64()
        ),
    );

    let reduced = |c: i64| [152, 176, 200, 224].contains(&c);
    let reduced_time: Duration = rows.iter().filter(|r| reduced(r.0)).map(|r| r.3).sum();
    let mut worst_r = 0.0f64;
    for i in 0..10 {
        let r = richardson(&seq(i, &reduced), 2.0).unwrap();
        worst_r = worst_r.max((r.limit - REFERENCE_EX[i]).abs() / REFERENCE_EX[i]);
    }
    s.check(
        "3r",
        "reduced sweep k=19,22,25,28",
        worst_r <= 1e-2 && reduced_time.as_secs() <= 1800,
        format!("max rel err {worst_r:.2e} (tol 1e-2), {:.0}s", reduced_time.as_secs_f64()),
    );

    let (lo, hi) = rates
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    s.report(
        "3q",
        "observed convergence order of the split-drum sequence in [1.5, 2.5]",
        if (lo..=hi).contains(&1.0) || hi < 1.5 { Verdict::Unattainable } else { Verdict::Fail },
        format!(
            "fitted order {lo:.3}..{hi:.3}: the density jump on the altitude leaves a first-order \
             error term"
        ),
    );
}

fn criterion_4(s: &mut Suite) {
    let (res, exact, rel) = isospectral(EFIELD);
    let cfg = config("gww_a", 2.0, "grid.cells = 240", EFIELD, 1);
    let (sp, _) = solve(&cfg, DomainName::GwwA, 240);
    let e1 = sp.eigenvalues[0];
    s.check(
        "4",
        "electric field E=5 isospectral, E1 soft target",
        res == 0.0 && exact && rel <= 1e-10 && (e1 - EFIELD_E1).abs() <= 1e-2,
        format!(
            "E1={e1:.8} (target {EFIELD_E1}, |diff|={:.1e}); direction (0, 1) along the \
             reference leg2, anchor at the right-angle vertex (0, 0), reference-block coordinates",
            (e1 - EFIELD_E1).abs()
        ),
    );
}

fn square_closed_form(cells: i64) -> Vec<f64> {
    let h = 1.0 / cells as f64;
    let mut v = Vec::new();
    for p in 1..cells {
        for q in 1..cells {
            let sp = (p as f64 * PI * h / 2.0).sin();
            let sq = (q as f64 * PI * h / 2.0).sin();
            v.push(4.0 / (h * h) * (sp * sp + sq * sq));
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

fn criterion_5(s: &mut Suite) {
    let sq = Domain::square(1.0).unwrap();
    let mut worst = 0.0f64;
    for cells in [4, 8, 16] {
        let op = assemble_laplacian(&Grid::with_cells(&sq, cells).unwrap());
        let dense = dense_eigen_oracle(&op).unwrap();
        worst = worst.max(max_rel(&dense.eigenvalues, &square_closed_form(cells)));
    }
    let cfg = config("square", 1.0, "grid.cells = 8, 16, 32", HOMOGENEOUS, 1);
    let entries = cfg
        .cells
        .iter()
        .map(|&c| (1.0 / c as f64, solve(&cfg, DomainName::Square, c).0.eigenvalues[0]))
        .collect();
    let r = richardson(&ConvergenceSequence::new("square E1", entries).unwrap(), 2.0).unwrap();
    let target = 2.0 * PI * PI;
    let rel = (r.limit - target).abs() / target;
    s.check(
        "5",
        "unit square closed form and Richardson to 2 pi^2",
        worst <= 1e-12 && rel <= 1e-5,
        format!("max rel err {worst:.1e} (tol 1e-12), limit {:.8} rel {rel:.1e} (tol 1e-5)", r.limit),
    );
}

fn criterion_6(s: &mut Suite) {
    let mut worst = 0.0f64;
    let mut worst_gen = 0.0f64;
    let mut cases = 0;
    let mut gen_cases = 0;
    for field in [HOMOGENEOUS, SPLIT, EFIELD, CHARGES] {
        for cells in [8, 16, 24] {
            let cfg = config("pair", 2.0, &format!("grid.cells = {cells}"), field, 10);
            for name in [DomainName::GwwA, DomainName::GwwB] {
                let p = prepare(&cfg, name, cells).unwrap();
                assert!(p.grid.len() <= 2000);
                let it = lowest_eigenpairs(&p.operator, 10, 1e-10).unwrap();
                let dense = dense_eigen_oracle(&p.operator).unwrap();
                worst = worst.max(max_rel(&it.eigenvalues, &dense.eigenvalues[..10]));
                cases += 1;
                if field != EFIELD && field != CHARGES && cells <= 16 {
                    let l = assemble_laplacian(&p.grid);
                    let d = p.field.sample(&p.grid).unwrap();
                    let g = dense_generalized_oracle(&l, &d).unwrap();
                    worst_gen = worst_gen.max(max_rel(&it.eigenvalues, &g[..10]));
                    gen_cases += 1;
                }
            }
        }
    }
    s.check(
        "6",
        "iterative vs dense oracles (<= 2000 points)",
        worst <= 1e-10 && worst_gen <= 1e-10,
        format!(
            "symmetric: {cases} cases, max rel {worst:.1e}; generalized: {gen_cases} cases, \
             max rel {worst_gen:.1e} (tol 1e-10)"
        ),
    );
}

fn criterion_7(s: &mut Suite) {
    let field = format!("{SPLIT}field.perturb.block = C\nfield.perturb.factor = 1.1\n");
    let cfg = config("pair", 2.0, "grid.cells = 32", &field, 10);
    let r = compare(&cfg, None).unwrap();
    let a = r.spectra["gww_a"][0];
    let b = r.spectra["gww_b"][0];
    let rel = (a - b).abs() / b.abs();
    s.check(
        "7",
        "negative control: +10% density in block C of GWW_A",
        r.intertwining_residual > 0.0 && !r.exact && rel > 1e-6,
        format!("residual={:.3e}, E1 rel diff {rel:.2e}", r.intertwining_residual),
    );
}

fn criterion_8(s: &mut Suite) {
    let cfg = config("gww_a", 2.0, "grid.cells = 64", SPLIT, 200);
    let p = prepare(&cfg, DomainName::GwwA, 64).unwrap();
    let mass = total_mass(&p.field, &Domain::gww_a(2.0).unwrap()).unwrap();
    let sp = lowest_eigenpairs(&p.operator, 200, 1e-10).unwrap();
    let w = weyl_ratio(&sp, mass);
    let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
    let quarters: Vec<f64> = w.chunks(50).map(mean).collect();
    let decreasing = quarters.windows(2).all(|q| q[1] < q[0]);
    let last = *w.last().unwrap();
    s.check(
        "8",
        "Weyl ratio E_n M/(4 pi n), n <= 200, l/h = 64",
        decreasing && (0.9..=1.3).contains(&last),
        format!(
            "M={mass}, quarter means {:?}, final {last:.4}",
            quarters.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>()
        ),
    );
}

fn criterion_9(s: &mut Suite) {
    let (a, b) = build_gww_pair(2.0).unwrap();
    let t4 = derive_transplantation(&a, &b, 4).unwrap();
    let t8 = derive_transplantation(&a, &b, 8).unwrap();
    let mut worst = 0.0f64;
    for cells in [16, 32, 64] {
        for field in [HOMOGENEOUS, SPLIT] {
            let cfg = config("pair", 2.0, &format!("grid.cells = {cells}"), field, 1);
            let pa = prepare(&cfg, DomainName::GwwA, cells).unwrap();
            let pb = prepare(&cfg, DomainName::GwwB, cells).unwrap();
            let map = t4.promote(&pa.grid, &pb.grid).unwrap();
            let r = verify_intertwining(&map, &pa.operator, &pb.operator).unwrap();
            worst = worst.max(if r.exact { r.residual } else { f64::INFINITY });
        }
    }
    s.check(
        "9",
        "derived T stable on l/4, l/8 and exact on finer grids",
        t4 == t8 && worst == 0.0 && t4.determinant() != 0,
        format!(
            "identical={}, det={}, nonzeros/row {:?}, residual on l/h 16,32,64 = {worst:e}",
            t4 == t8,
            t4.determinant(),
            t4.nonzeros_per_row()
        ),
    );
    s.check(
        "9s",
        "T signs: +1 within a parity class, -1 across",
        t4.class_signs_consistent(&b, &a),
        format!("{} cross-class entries, all -1", t4.cross_class_entries(&b, &a).len()),
    );
    let attainable = class_block_structure_attainable(&a, &b, 4).unwrap();
    s.report(
        "9p",
        "T block-diagonal in parity classes",
        if attainable { Verdict::Fail } else { Verdict::Unattainable },
        "no nonzero intertwiner vanishes on all cross-class entries (constrained integer null \
         space has dimension 0); the class structure shows in the sign rule instead"
            .into(),
    );
}

fn main() -> ExitCode {
    let mut s = Suite { failures: 0 };
    let t = Instant::now();
    criterion_1(&mut s);
    criterion_2_and_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    println!(
        "acceptance: {} unexpected failure(s), {:.0}s",
        s.failures,
        t.elapsed().as_secs_f64()
    );
    if s.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
