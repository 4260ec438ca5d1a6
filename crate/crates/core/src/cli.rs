//! Commands behind the `isodrum` binary.
//!
//! Every command reads an [`ExperimentConfig`], writes its files into an
//! output directory and returns the text it prints on stdout. Outputs depend
//! only on the config and the seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_number, ConfigError, ExperimentConfig, FieldConfig};
use crate::eigen::{lowest_eigenpairs_with, EigenError, EigenOptions, Spectrum};
use crate::extrapolate::{convergence_rate, richardson, ConvergenceSequence, ExtrapolateError};
use crate::field::{FieldError, FieldKind, ScalarField};
use crate::geometry::{Domain, DomainName};
use crate::grid::{Grid, GridError};
use crate::operator::{
    assemble_density_operator, assemble_schrodinger, OperatorError, SparseSymOperator,
};
use crate::transplant::{
    compare_spectra, verify_intertwining, Coeffs, TransplantError, TransplantMap, GWW_TRANSPLANT,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration errors, 3 for numerical
    /// failures, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExtrapolateError> for CliError {
    fn from(e: ExtrapolateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TransplantError> for CliError {
    fn from(e: TransplantError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<EigenError> for CliError {
    fn from(e: EigenError) -> Self {
        match e {
            EigenError::BadCount { .. } | EigenError::BadTolerance(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ExperimentConfig::parse(&text)?)
}

/// Per-point values on a grid: a one-line ASCII header
/// `nx ny h n_interior tag`, then `n_interior` little-endian `f64`s in grid
/// point order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub nx: i64,
    pub ny: i64,
    pub h: f64,
    pub tag: String,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn new(grid: &Grid, tag: impl Into<String>, values: Vec<f64>) -> FieldDump {
        let (lo, hi) = grid.bbox;
        FieldDump {
            nx: hi[0] - lo[0] + 1,
            ny: hi[1] - lo[1] + 1,
            h: grid.h,
            tag: tag.into(),
            values,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.tag.contains(char::is_whitespace) || self.values.iter().any(|v| !v.is_finite()) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "field dump needs a tag without whitespace and finite values",
            ));
        }
        writeln!(
            w,
            "{} {} {:?} {} {}",
            self.nx,
            self.ny,
            self.h,
            self.values.len(),
            self.tag
        )?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<FieldDump> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let invalid = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| invalid("missing header"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| invalid("header not ascii"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 {
            return Err(invalid("header needs nx ny h n_interior tag"));
        }
        let bad = |_| invalid("bad header number");
        let n: usize = f[3].parse().map_err(|_| invalid("bad count"))?;
        let payload = &bytes[nl + 1..];
        if payload.len() != 8 * n {
            return Err(invalid("payload length does not match n_interior"));
        }
        Ok(FieldDump {
            nx: f[0].parse().map_err(bad)?,
            ny: f[1].parse().map_err(bad)?,
            h: f[2].parse().map_err(|_| invalid("bad spacing"))?,
            tag: f[4].to_string(),
            values: payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        })
    }
}

/// One domain discretized on one grid.
pub struct Prepared {
    pub name: DomainName,
    pub grid: Grid,
    pub field: ScalarField,
    pub operator: SparseSymOperator,
}

/// Builds grid, field and operator of `name` at `cells` per leg. The
/// perturbation applies to the first domain of the config only.
pub fn prepare(
    cfg: &ExperimentConfig,
    name: DomainName,
    cells: i64,
) -> Result<Prepared, CliError> {
    let domain = Domain::by_name(name, cfg.leg).map_err(|e| CliError::Config(e.to_string()))?;
    let grid = Grid::with_cells(&domain, cells)?;
    let mut field = ScalarField::new(&cfg.field.spec(grid.h), &domain)?;
    if let Some(p) = &cfg.perturb {
        if cfg.domain.domains()[0] == name {
            field = field.scaled_in_block(p.block, p.factor)?;
        }
    }
    let operator = match field.kind() {
        FieldKind::Density => assemble_density_operator(&grid, &field)?,
        FieldKind::Potential => assemble_schrodinger(&grid, &field, cfg.kinetic)?,
    };
    Ok(Prepared {
        name,
        grid,
        field,
        operator,
    })
}

fn solver_options(cfg: &ExperimentConfig, keep_vectors: bool) -> EigenOptions {
    let mut o = EigenOptions::new(cfg.solver.k);
    o.tol = cfg.solver.tol;
    o.seed = cfg.solver.seed;
    o.mode = cfg.solver.mode;
    o.keep_vectors = keep_vectors;
    o
}

/// Lowercase domain name used in file names and tags.
fn slug(name: DomainName) -> String {
    name.as_str().to_ascii_lowercase()
}

fn stem(cfg: &ExperimentConfig, name: DomainName, cells: i64) -> String {
    if cfg.cells.len() > 1 {
        format!("{}_c{cells}", slug(name))
    } else {
        slug(name)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_matrix(out: &Path, stem: &str, op: &SparseSymOperator) -> Result<(), CliError> {
    let path = out.join(format!("operator_{stem}.mtx"));
    let f = fs::File::create(&path)?;
    op.write_matrix_market(BufWriter::new(f))?;
    Ok(())
}

/// Writes domain descriptions, grid dumps and, for the pair, the
/// transplantation matrix.
pub fn cmd_build(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    let mut report = String::new();
    for name in cfg.domain.domains() {
        let domain =
            Domain::by_name(name, cfg.leg).map_err(|e| CliError::Config(e.to_string()))?;
        write_file(&out.join(format!("domain_{}.txt", slug(name))), domain.to_text().as_bytes())?;
        for &cells in &cfg.cells {
            let grid = Grid::with_cells(&domain, cells)?;
            let s = stem(cfg, name, cells);
            write_file(&out.join(format!("grid_{s}.txt")), grid.dump().as_bytes())?;
            let _ = writeln!(
                report,
                "{} cells={cells} h={:?} points={} area={:?} perimeter={:?}",
                slug(name),
                grid.h,
                grid.len(),
                domain.area(),
                domain.perimeter()
            );
        }
    }
    if cfg.domain == crate::config::DomainChoice::Pair {
        let map = TransplantMap {
            coeffs: GWW_TRANSPLANT,
            solution_dim: 2,
        };
        write_file(&out.join("transplant.txt"), (map.to_text() + "\n").as_bytes())?;
    }
    Ok(report)
}

fn certified(op: &SparseSymOperator, tol: f64, e: f64, r: f64) -> bool {
    r <= tol * e.abs().max(op.norm1())
}

/// Solves every domain on every grid and writes `spectrum_<stem>.csv`.
/// Without convergence the best estimates are written with a `converged`
/// column and the command fails.
pub fn cmd_solve(
    cfg: &ExperimentConfig,
    out: &Path,
    dump_matrix: bool,
) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    let mut report = String::new();
    for name in cfg.domain.domains() {
        for &cells in &cfg.cells {
            let p = prepare(cfg, name, cells)?;
            let s = stem(cfg, name, cells);
            if dump_matrix || cfg.output.dump_matrix {
                write_matrix(out, &s, &p.operator)?;
            }
            let csv_path = out.join(format!("spectrum_{s}.csv"));
            let spectrum =
                match lowest_eigenpairs_with(&p.operator, &solver_options(cfg, cfg.output.field_dump)) {
                    Ok(sp) => sp,
                    Err(EigenError::NotConverged {
                        restarts,
                        eigenvalues,
                        residuals,
                    }) => {
                        let mut csv = String::from("n,E,residual,converged\n");
                        for (i, (e, r)) in eigenvalues.iter().zip(&residuals).enumerate() {
                            let ok = certified(&p.operator, cfg.solver.tol, *e, *r);
                            let _ = writeln!(csv, "{},{:.17e},{:.3e},{}", i + 1, e, r, ok);
                        }
                        write_file(&csv_path, csv.as_bytes())?;
                        return Err(CliError::Numerical(format!(
                            "{s}: no convergence after {restarts} restarts; partial results in {}",
                            csv_path.display()
                        )));
                    }
                    Err(e) => return Err(e.into()),
                };
            write_file(&csv_path, spectrum.to_csv().as_bytes())?;
            if cfg.output.field_dump {
                let state = cfg.output.state;
                let v = spectrum
                    .eigenvectors
                    .as_ref()
                    .and_then(|vs| vs.get(state - 1))
                    .ok_or_else(|| CliError::Numerical("eigenvector not available".into()))?;
                let dump = FieldDump::new(&p.grid, format!("{}:psi{state}", slug(name)), v.clone());
                let f = fs::File::create(out.join(format!("state{state}_{s}.bin")))?;
                dump.write_to(BufWriter::new(f))?;
            }
            let _ = writeln!(
                report,
                "{s}: {} points, field {}, {} via {} ({} restarts)",
                p.grid.len(),
                p.field.spec().describe(),
                spectrum.len(),
                spectrum.info.method,
                spectrum.info.restarts
            );
            for (i, e) in spectrum.eigenvalues.iter().enumerate() {
                let _ = writeln!(report, "  E{} = {:.8}", i + 1, e);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridComparison {
    pub cells: i64,
    pub h: f64,
    pub points: usize,
    pub intertwining_residual: f64,
    pub exact: bool,
    pub nonzero_entries: usize,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub spectra: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub field: String,
    /// Unit direction of the electric field in reference-block coordinates.
    pub field_direction: Option<[f64; 2]>,
    /// Zero-potential point in reference-block coordinates.
    pub field_anchor: Option<[f64; 2]>,
    pub transplant: Coeffs,
    /// Worst values over all grids.
    pub intertwining_residual: f64,
    pub exact: bool,
    pub max_rel_diff: f64,
    /// Spectra on the last grid.
    pub spectra: BTreeMap<String, Vec<f64>>,
    pub grids: Vec<GridComparison>,
}

/// Transplantation check and spectra of both domains on every grid.
pub fn compare(cfg: &ExperimentConfig, out: Option<(&Path, bool)>) -> Result<CompareReport, CliError> {
    if cfg.domain != crate::config::DomainChoice::Pair {
        return Err(CliError::Config("compare needs domain = pair".into()));
    }
    let map = TransplantMap {
        coeffs: GWW_TRANSPLANT,
        solution_dim: 2,
    };
    let opts = solver_options(cfg, false);
    let mut grids = Vec::new();
    for &cells in &cfg.cells {
        let a = prepare(cfg, DomainName::GwwA, cells)?;
        let b = prepare(cfg, DomainName::GwwB, cells)?;
        if let Some((dir, true)) = out {
            write_matrix(dir, &stem(cfg, DomainName::GwwA, cells), &a.operator)?;
            write_matrix(dir, &stem(cfg, DomainName::GwwB, cells), &b.operator)?;
        }
        let t = map.promote(&a.grid, &b.grid)?;
        let check = verify_intertwining(&t, &a.operator, &b.operator)?;
        let sa: Spectrum = lowest_eigenpairs_with(&a.operator, &opts)?;
        let sb: Spectrum = lowest_eigenpairs_with(&b.operator, &opts)?;
        let cmp = compare_spectra(&sa, &sb).map_err(|e| CliError::Numerical(e.to_string()))?;
        grids.push(GridComparison {
            cells,
            h: a.grid.h,
            points: a.grid.len(),
            intertwining_residual: check.residual,
            exact: check.exact,
            nonzero_entries: check.nonzero_entries,
            max_abs_diff: cmp.max_abs_diff,
            max_rel_diff: cmp.max_rel_diff,
            spectra: BTreeMap::from([
                ("gww_a".to_string(), sa.eigenvalues),
                ("gww_b".to_string(), sb.eigenvalues),
            ]),
        });
    }
    let (field_direction, field_anchor) = match &cfg.field {
        FieldConfig::Efield {
            direction, anchor, ..
        } => (Some(*direction), Some(*anchor)),
        _ => (None, None),
    };
    let mut field = cfg.field.spec(cfg.leg / cfg.cells[0] as f64).describe();
    if let Some(p) = &cfg.perturb {
        let _ = write!(field, "; gww_a block {} scaled by {:?}", p.block, p.factor);
    }
    Ok(CompareReport {
        field,
        field_direction,
        field_anchor,
        transplant: map.coeffs,
        intertwining_residual: grids.iter().map(|g| g.intertwining_residual).fold(0.0, f64::max),
        exact: grids.iter().all(|g| g.exact),
        max_rel_diff: grids.iter().map(|g| g.max_rel_diff).fold(0.0, f64::max),
        spectra: grids.last().unwrap().spectra.clone(),
        grids,
    })
}

/// Writes `compare.json` and returns it.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path, dump_matrix: bool) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    let report = compare(cfg, Some((out, dump_matrix || cfg.output.dump_matrix)))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&out.join("compare.json"), json.as_bytes())?;
    Ok(json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub quantity: String,
    pub order: f64,
    pub entries: Vec<(f64, f64)>,
    pub limit: f64,
    pub stability: f64,
    pub column: usize,
    pub non_monotone: bool,
    /// Fitted order of convergence; absent with fewer than three entries.
    pub rate: Option<f64>,
    pub table: Vec<Vec<f64>>,
}

pub fn extrapolation_report(
    seq: &ConvergenceSequence,
    order: f64,
) -> Result<ExtrapolationReport, CliError> {
    let r = richardson(seq, order)?;
    Ok(ExtrapolationReport {
        quantity: seq.quantity.clone(),
        order,
        entries: seq.entries.clone(),
        limit: r.limit,
        stability: r.stability,
        column: r.column,
        non_monotone: r.non_monotone,
        rate: convergence_rate(seq).ok(),
        table: r.table,
    })
}

/// Reads `h,E` rows; a non-numeric first line is a header. Spacings may be
/// fractions.
pub fn parse_sequence_csv(text: &str, quantity: &str) -> Result<ConvergenceSequence, CliError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (f.len() == 2)
            .then(|| parse_number(f[0]).zip(parse_number(f[1])))
            .flatten();
        match parsed {
            Some(e) => entries.push(e),
            None if entries.is_empty() && i == 0 => continue,
            None => {
                return Err(CliError::Config(format!(
                    "csv line {}: expected `h,E`, got `{line}`",
                    i + 1
                )))
            }
        }
    }
    Ok(ConvergenceSequence::new(quantity, entries)?)
}

pub fn cmd_extrapolate_csv(csv: &Path, order: f64) -> Result<String, CliError> {
    let text = fs::read_to_string(csv)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", csv.display())))?;
    let seq = parse_sequence_csv(&text, &csv.display().to_string())?;
    let report = extrapolation_report(&seq, order)?;
    Ok(serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
}

/// Runs the grid sweep of the config on its first domain, writes
/// `sweep_<domain>.csv` (`h,E1..Ek`) and `extrapolate.json` (one report per
/// eigenvalue).
pub fn cmd_extrapolate_sweep(
    cfg: &ExperimentConfig,
    out: &Path,
    order: f64,
) -> Result<String, CliError> {
    if cfg.cells.len() < 2 {
        return Err(CliError::Config(
            "extrapolation needs a grid sequence (grid.k, grid.cells or grid.h_list with 2+ entries)"
                .into(),
        ));
    }
    fs::create_dir_all(out)?;
    let name = cfg.domain.domains()[0];
    let opts = solver_options(cfg, false);
    let mut rows = Vec::new();
    for &cells in &cfg.cells {
        let p = prepare(cfg, name, cells)?;
        let s = lowest_eigenpairs_with(&p.operator, &opts)?;
        rows.push((p.grid.h, s.eigenvalues));
    }
    let mut csv = String::from("h");
    for i in 1..=cfg.solver.k {
        let _ = write!(csv, ",E{i}");
    }
    csv.push('\n');
    for (h, es) in &rows {
        let _ = write!(csv, "{h:?}");
        for e in es {
            let _ = write!(csv, ",{e:.17e}");
        }
        csv.push('\n');
    }
    write_file(&out.join(format!("sweep_{}.csv", slug(name))), csv.as_bytes())?;
    let reports = (0..cfg.solver.k)
        .map(|i| {
            let seq = ConvergenceSequence::new(
                format!("{} E{}", slug(name), i + 1),
                rows.iter().map(|(h, es)| (*h, es[i])).collect(),
            )?;
            extrapolation_report(&seq, order)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let json = serde_json::to_string_pretty(&reports).expect("report serializes") + "\n";
    write_file(&out.join("extrapolate.json"), json.as_bytes())?;
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(
            text,
            "{}: limit {:.6} stability {:.2e} rate {}",
            r.quantity,
            r.limit,
            r.stability,
            r.rate.map_or("n/a".into(), |x| format!("{x:.3}"))
        );
    }
    Ok(text)
}

/// Writes the sampled field of every domain and grid as `field_<stem>.bin`
/// with the matching grid dump.
pub fn cmd_field_dump(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    let mut report = String::new();
    for name in cfg.domain.domains() {
        for &cells in &cfg.cells {
            let p = prepare(cfg, name, cells)?;
            let s = stem(cfg, name, cells);
            let values = p.field.sample(&p.grid)?;
            let tag = match p.field.kind() {
                FieldKind::Density => "density",
                FieldKind::Potential => "potential",
            };
            let dump = FieldDump::new(&p.grid, format!("{}:{tag}", slug(name)), values);
            let f = fs::File::create(out.join(format!("field_{s}.bin")))?;
            dump.write_to(BufWriter::new(f))?;
            write_file(&out.join(format!("grid_{s}.txt")), p.grid.dump().as_bytes())?;
            let _ = writeln!(report, "{s}: {} values of {}", dump.values.len(), p.field.spec().describe());
        }
    }
    Ok(report)
}
