//! Experiment configuration.
//!
//! The text format is one `key = value` per line with dotted keys; `#`
//! starts a comment. A file whose first non-blank character is `{` is read as
//! JSON with the same structure as [`ExperimentConfig`]. Recognized keys:
//!
//! ```text
//! domain               gww_a | gww_b | pair | square
//! leg                  positive length (square: side)
//! grid.h               spacing, decimal or fraction (1/120)
//! grid.cells           lattice steps per leg, one value or a comma list
//! grid.k               h = 1/(4k); one value, a comma list or a range 19..30
//! grid.h_list          comma list of spacings
//! field.kind           density | split | efield | charges
//! field.sigma          density default (kind = density)
//! field.sigma.<A..G>   per-block density (kind = density)
//! field.split.light    density of the light half (kind = split)
//! field.split.dark     density of the dark half
//! field.split.side     leg1 | leg2, the half carrying the dark density
//! field.efield.magnitude, field.efield.charge
//! field.efield.direction  unit vector "dx, dy" in reference-block coordinates
//! field.efield.anchor     zero-potential point "x, y" in reference-block coordinates
//! field.charge.q, field.charge.cutoff (default h/2)
//! field.charge.coupling   own_block | all_blocks
//! field.perturb.block, field.perturb.factor   scale the field of the first domain in one block
//! operator.kinetic     prefactor of the Laplacian in the Schrödinger operator
//! solver.k, solver.tol, solver.seed, solver.mode (auto | shift_invert | plain)
//! output.field_dump    write the eigenvector dump after `solve`
//! output.state         1-based index of the dumped eigenvector
//! output.dump_matrix   write the operator in MatrixMarket format
//! ```
//!
//! Exactly one of the `grid.*` keys must be present; all of them resolve to
//! a list of cell counts, which is what the config serializes back to.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{SolverMode, DEFAULT_SEED};
use crate::field::{ChargeCoupling, FieldSpec, SplitSide};
use crate::geometry::{BlockId, DomainName, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` does not apply to field.kind = {kind}")]
    InapplicableKey { key: String, kind: String },
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("grid: {0}")]
    Grid(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainChoice {
    GwwA,
    GwwB,
    Pair,
    Square,
}

impl DomainChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainChoice::GwwA => "gww_a",
            DomainChoice::GwwB => "gww_b",
            DomainChoice::Pair => "pair",
            DomainChoice::Square => "square",
        }
    }

    /// Domains the experiment runs on, in order.
    pub fn domains(self) -> Vec<DomainName> {
        match self {
            DomainChoice::GwwA => vec![DomainName::GwwA],
            DomainChoice::GwwB => vec![DomainName::GwwB],
            DomainChoice::Pair => vec![DomainName::GwwA, DomainName::GwwB],
            DomainChoice::Square => vec![DomainName::Square],
        }
    }
}

impl FromStr for DomainChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gww_a" => Ok(DomainChoice::GwwA),
            "gww_b" => Ok(DomainChoice::GwwB),
            "pair" => Ok(DomainChoice::Pair),
            "square" => Ok(DomainChoice::Square),
            _ => Err("expected gww_a, gww_b, pair or square".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Density {
        sigma: f64,
        #[serde(default)]
        blocks: BTreeMap<BlockId, f64>,
    },
    Split {
        light: f64,
        dark: f64,
        side: SplitSide,
    },
    Efield {
        magnitude: f64,
        charge: f64,
        direction: [f64; 2],
        anchor: [f64; 2],
    },
    Charges {
        q: f64,
        /// `None` means `h/2` on each grid.
        cutoff: Option<f64>,
        coupling: ChargeCoupling,
    },
}

impl FieldConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FieldConfig::Density { .. } => "density",
            FieldConfig::Split { .. } => "split",
            FieldConfig::Efield { .. } => "efield",
            FieldConfig::Charges { .. } => "charges",
        }
    }

    /// Field specification on a grid of spacing `h`.
    pub fn spec(&self, h: f64) -> FieldSpec {
        match self {
            FieldConfig::Density { sigma, blocks } => FieldSpec::PiecewiseDensity {
                values: blocks.clone(),
                default: *sigma,
            },
            FieldConfig::Split { light, dark, side } => FieldSpec::SplitDensity {
                light: *light,
                dark: *dark,
                dark_side: *side,
            },
            FieldConfig::Efield {
                magnitude,
                charge,
                direction,
                anchor,
            } => FieldSpec::ElectricField {
                magnitude: *magnitude,
                charge: *charge,
                direction: *direction,
                anchor: Point::new(anchor[0], anchor[1]),
            },
            FieldConfig::Charges {
                q,
                cutoff,
                coupling,
            } => FieldSpec::PointCharges {
                q: *q,
                cutoff: cutoff.unwrap_or(h / 2.0),
                coupling: *coupling,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub block: BlockId,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub mode: SolverMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub field_dump: bool,
    pub state: usize,
    pub dump_matrix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainChoice,
    pub leg: f64,
    /// Lattice steps per leg, one entry per grid.
    pub cells: Vec<i64>,
    pub field: FieldConfig,
    #[serde(default)]
    pub perturb: Option<Perturbation>,
    pub kinetic: f64,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainChoice::Pair,
            leg: 2.0,
            cells: vec![16],
            field: FieldConfig::Density {
                sigma: 1.0,
                blocks: BTreeMap::new(),
            },
            perturb: None,
            kinetic: 1.0,
            solver: SolverConfig {
                k: 10,
                tol: 1e-10,
                seed: DEFAULT_SEED,
                mode: SolverMode::Auto,
            },
            output: OutputConfig {
                field_dump: false,
                state: 1,
                dump_matrix: false,
            },
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

/// Decimal or `p/q`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let (p, q) = (p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?);
        return (q != 0.0).then(|| p / q).filter(|v| v.is_finite());
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

/// Integer list: comma separated values and `a..b` inclusive ranges.
fn parse_int_list(key: &str, s: &str) -> Result<Vec<i64>, ConfigError> {
    let mut out = Vec::new();
    for t in list(s) {
        if let Some((a, b)) = t.split_once("..") {
            let a: i64 = a.trim().parse().map_err(|_| bad(key, s, "bad range"))?;
            let b: i64 = b.trim().parse().map_err(|_| bad(key, s, "bad range"))?;
            if b < a {
                return Err(bad(key, s, "empty range"));
            }
            out.extend(a..=b);
        } else {
            out.push(t.parse().map_err(|_| bad(key, s, "expected integers"))?);
        }
    }
    if out.is_empty() {
        return Err(bad(key, s, "empty list"));
    }
    Ok(out)
}

/// Number of cells per leg for spacing `h`, if `leg / h` is an integer.
pub fn cells_for(leg: f64, h: f64) -> Option<i64> {
    let r = leg / h;
    let c = r.round();
    (h > 0.0 && r.is_finite() && c >= 1.0 && (r - c).abs() <= 1e-9 * r).then_some(c as i64)
}

struct Keys {
    map: BTreeMap<String, (usize, String)>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|v| parse_number(&v).ok_or_else(|| bad(key, &v, "expected a finite number")))
            .transpose()
    }

    fn num_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.take(key)
            .map(|v| v.parse::<T>().map_err(|_| bad(key, &v, format!("expected {what}"))))
            .transpose()
    }

    fn pair(&mut self, key: &str) -> Result<Option<[f64; 2]>, ConfigError> {
        self.take(key)
            .map(|v| {
                let xs: Vec<f64> = list(&v).filter_map(parse_number).collect();
                match (xs.len(), list(&v).count()) {
                    (2, 2) => Ok([xs[0], xs[1]]),
                    _ => Err(bad(key, &v, "expected two numbers `x, y`")),
                }
            })
            .transpose()
    }

    fn keyword<T: serde::de::DeserializeOwned>(
        &mut self,
        key: &str,
        what: &str,
    ) -> Result<Option<T>, ConfigError> {
        self.take(key)
            .map(|v| {
                serde_json::from_value(serde_json::Value::String(v.clone()))
                    .map_err(|_| bad(key, &v, format!("expected {what}")))
            })
            .transpose()
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.take(key)
            .map(|v| match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(bad(key, &v, "expected true or false")),
            })
            .transpose()
    }
}

impl ExperimentConfig {
    /// Parses either format.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_key_value(text)
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_key_value(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    message: format!("bad key `{k}`"),
                });
            }
            if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(ConfigError::Duplicate(k.to_string()));
            }
        }
        let mut keys = Keys { map };
        let d = ExperimentConfig::default();

        let domain = keys
            .parsed::<DomainChoice>("domain", "gww_a, gww_b, pair or square")?
            .ok_or_else(|| ConfigError::Missing("domain".into()))?;
        let leg = keys.num_or("leg", d.leg)?;
        if !(leg > 0.0) {
            return Err(bad("leg", &leg.to_string(), "must be positive"));
        }

        let grid_keys: Vec<&str> = ["grid.h", "grid.cells", "grid.k", "grid.h_list"]
            .into_iter()
            .filter(|k| keys.map.contains_key(*k))
            .collect();
        let cells = match grid_keys.as_slice() {
            [] => return Err(ConfigError::Missing("grid.h".into())),
            [_, _, ..] => {
                return Err(ConfigError::Grid(format!(
                    "give exactly one of {}",
                    grid_keys.join(", ")
                )))
            }
            [key] => {
                let key = *key;
                let v = keys.take(key).unwrap();
                if key == "grid.cells" {
                    parse_int_list(key, &v)?
                } else {
                    let spacings: Vec<f64> = if key == "grid.k" {
                        parse_int_list(key, &v)?
                            .into_iter()
                            .map(|k| 1.0 / (4.0 * k as f64))
                            .collect()
                    } else {
                        list(&v)
                            .map(|t| {
                                parse_number(t).ok_or_else(|| bad(key, &v, "expected spacings"))
                            })
                            .collect::<Result<_, _>>()?
                    };
                    spacings
                        .iter()
                        .map(|&h| {
                            cells_for(leg, h).ok_or_else(|| {
                                ConfigError::Grid(format!(
                                    "h={h} does not divide leg {leg}: reflection images of grid \
                                     points would fall off the grid"
                                ))
                            })
                        })
                        .collect::<Result<_, _>>()?
                }
            }
        };

        let kind = keys
            .take("field.kind")
            .unwrap_or_else(|| "density".to_string());
        let field = match kind.as_str() {
            "density" | "homogeneous" => {
                let sigma = keys.num_or("field.sigma", 1.0)?;
                let mut blocks = BTreeMap::new();
                for id in BlockId::ALL {
                    let key = format!("field.sigma.{id}");
                    if let Some(v) = keys.num(&key)? {
                        blocks.insert(id, v);
                    }
                }
                FieldConfig::Density { sigma, blocks }
            }
            "split" => FieldConfig::Split {
                light: keys.num_or("field.split.light", 1.0)?,
                dark: keys.num_or("field.split.dark", 2.0)?,
                side: keys
                    .keyword("field.split.side", "leg1 or leg2")?
                    .unwrap_or(SplitSide::Leg1),
            },
            "efield" => FieldConfig::Efield {
                magnitude: keys
                    .num("field.efield.magnitude")?
                    .ok_or_else(|| ConfigError::Missing("field.efield.magnitude".into()))?,
                charge: keys.num_or("field.efield.charge", 1.0)?,
                direction: keys.pair("field.efield.direction")?.unwrap_or([0.0, 1.0]),
                anchor: keys.pair("field.efield.anchor")?.unwrap_or([0.0, 0.0]),
            },
            "charges" => FieldConfig::Charges {
                q: keys.num_or("field.charge.q", 1.0)?,
                cutoff: keys.num("field.charge.cutoff")?,
                coupling: keys
                    .keyword("field.charge.coupling", "own_block or all_blocks")?
                    .unwrap_or(ChargeCoupling::OwnBlock),
            },
            _ => {
                return Err(bad(
                    "field.kind",
                    &kind,
                    "expected density, split, efield or charges",
                ))
            }
        };

        let perturb = match (
            keys.parsed::<BlockId>("field.perturb.block", "a block id A..G")?,
            keys.num("field.perturb.factor")?,
        ) {
            (None, None) => None,
            (Some(block), Some(factor)) => Some(Perturbation { block, factor }),
            (None, Some(_)) => return Err(ConfigError::Missing("field.perturb.block".into())),
            (Some(_), None) => return Err(ConfigError::Missing("field.perturb.factor".into())),
        };

        let kinetic = keys.num_or("operator.kinetic", d.kinetic)?;
        let solver = SolverConfig {
            k: keys.parsed("solver.k", "a positive integer")?.unwrap_or(d.solver.k),
            tol: keys.num_or("solver.tol", d.solver.tol)?,
            seed: keys.parsed("solver.seed", "an unsigned integer")?.unwrap_or(d.solver.seed),
            mode: keys
                .keyword("solver.mode", "auto, shift_invert or plain")?
                .unwrap_or(d.solver.mode),
        };
        let output = OutputConfig {
            field_dump: keys.boolean("output.field_dump")?.unwrap_or(false),
            state: keys.parsed("output.state", "a positive integer")?.unwrap_or(1),
            dump_matrix: keys.boolean("output.dump_matrix")?.unwrap_or(false),
        };

        if let Some((key, _)) = keys.map.into_iter().next() {
            let known_elsewhere = key.starts_with("field.sigma")
                || key.starts_with("field.split.")
                || key.starts_with("field.efield.")
                || key.starts_with("field.charge.");
            let valid_block = key
                .strip_prefix("field.sigma.")
                .is_none_or(|b| b.parse::<BlockId>().is_ok());
            return Err(if known_elsewhere && valid_block && key != "field.charge" {
                ConfigError::InapplicableKey { key, kind }
            } else {
                ConfigError::UnknownKey(key)
            });
        }

        let c = ExperimentConfig {
            domain,
            leg,
            cells,
            field,
            perturb,
            kinetic,
            solver,
            output,
        };
        c.validate()?;
        Ok(c)
    }

    /// Canonical key=value text; parses back to an equal config.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        kv("domain", self.domain.as_str().into());
        kv("leg", format!("{:?}", self.leg));
        kv(
            "grid.cells",
            self.cells
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("field.kind", self.field.kind_name().into());
        match &self.field {
            FieldConfig::Density { sigma, blocks } => {
                kv("field.sigma", format!("{sigma:?}"));
                for (id, v) in blocks {
                    kv(&format!("field.sigma.{id}"), format!("{v:?}"));
                }
            }
            FieldConfig::Split { light, dark, side } => {
                kv("field.split.light", format!("{light:?}"));
                kv("field.split.dark", format!("{dark:?}"));
                kv("field.split.side", keyword(side));
            }
            FieldConfig::Efield {
                magnitude,
                charge,
                direction,
                anchor,
            } => {
                kv("field.efield.magnitude", format!("{magnitude:?}"));
                kv("field.efield.charge", format!("{charge:?}"));
                kv("field.efield.direction", join(direction));
                kv("field.efield.anchor", join(anchor));
            }
            FieldConfig::Charges {
                q,
                cutoff,
                coupling,
            } => {
                kv("field.charge.q", format!("{q:?}"));
                if let Some(c) = cutoff {
                    kv("field.charge.cutoff", format!("{c:?}"));
                }
                kv("field.charge.coupling", keyword(coupling));
            }
        }
        if let Some(p) = &self.perturb {
            kv("field.perturb.block", p.block.to_string());
            kv("field.perturb.factor", format!("{:?}", p.factor));
        }
        kv("operator.kinetic", format!("{:?}", self.kinetic));
        kv("solver.k", self.solver.k.to_string());
        kv("solver.tol", format!("{:?}", self.solver.tol));
        kv("solver.seed", self.solver.seed.to_string());
        kv("solver.mode", keyword(&self.solver.mode));
        kv("output.field_dump", self.output.field_dump.to_string());
        kv("output.state", self.output.state.to_string());
        kv("output.dump_matrix", self.output.dump_matrix.to_string());
        s
    }

    /// Checks value ranges and grid compatibility.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.leg.is_finite() && self.leg > 0.0) {
            return Err(bad("leg", &self.leg.to_string(), "must be positive"));
        }
        if self.cells.is_empty() {
            return Err(ConfigError::Grid("no grid given".into()));
        }
        if let Some(c) = self.cells.iter().find(|&&c| c < 1) {
            return Err(ConfigError::Grid(format!("cells per leg must be positive, got {c}")));
        }
        let mut sorted = self.cells.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Grid("grid list repeats a spacing".into()));
        }
        if self.solver.k == 0 {
            return Err(bad("solver.k", "0", "must be positive"));
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) {
            return Err(bad("solver.tol", &self.solver.tol.to_string(), "must be positive"));
        }
        if !(self.kinetic.is_finite() && self.kinetic > 0.0) {
            return Err(bad("operator.kinetic", &self.kinetic.to_string(), "must be positive"));
        }
        if self.output.state == 0 || self.output.state > self.solver.k {
            return Err(bad(
                "output.state",
                &self.output.state.to_string(),
                format!("must lie in 1..={}", self.solver.k),
            ));
        }
        if let Some(p) = &self.perturb {
            if !(p.factor.is_finite() && p.factor > 0.0) {
                return Err(bad("field.perturb.factor", &p.factor.to_string(), "must be positive"));
            }
            if self.domain == DomainChoice::Square && p.block.index() > 1 {
                return Err(bad("field.perturb.block", &p.block.to_string(), "square has blocks A, B"));
            }
        }
        if self.domain == DomainChoice::Square {
            if let FieldConfig::Density { blocks, .. } = &self.field {
                if let Some(id) = blocks.keys().find(|b| b.index() > 1) {
                    return Err(bad(&format!("field.sigma.{id}"), "", "square has blocks A, B"));
                }
            }
        }
        if let FieldConfig::Charges {
            cutoff: Some(c), ..
        } = &self.field
        {
            if !(c.is_finite() && *c > 0.0) {
                return Err(bad("field.charge.cutoff", &c.to_string(), "must be positive"));
            }
        }
        self.field
            .spec(self.leg / self.cells[0] as f64)
            .validate()
            .map_err(|e| bad("field", self.field.kind_name(), e.to_string()))
    }

    /// Grid spacings, in the order of `cells`.
    pub fn spacings(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| self.leg / c as f64).collect()
    }
}

fn keyword<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum serializes to a string"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_spacing_and_k_range() {
        let c = ExperimentConfig::parse("domain = pair\nleg = 2\ngrid.h = 1/120\n").unwrap();
        assert_eq!(c.cells, vec![240]);
        let c = ExperimentConfig::parse("domain = pair\nleg = 2\ngrid.k = 19..21, 30\n").unwrap();
        assert_eq!(c.cells, vec![152, 160, 168, 240]);
    }

    #[test]
    fn incompatible_spacing_is_config_error() {
        let e = ExperimentConfig::parse("domain = pair\nleg = 2\ngrid.h = 0.3\n").unwrap_err();
        assert!(matches!(e, ConfigError::Grid(_)));
    }

    #[test]
    fn unknown_and_inapplicable_keys() {
        let e = ExperimentConfig::parse("domain = pair\ngrid.cells = 4\nsolver.kk = 3\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey("solver.kk".into()));
        let e = ExperimentConfig::parse(
            "domain = pair\ngrid.cells = 4\nfield.kind = split\nfield.sigma.B = 2\n",
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::InapplicableKey { .. }));
        let e = ExperimentConfig::parse("domain = pair\ngrid.cells = 4\nfield.sigma.Q = 2\n")
            .unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey(_)));
    }

    #[test]
    fn round_trips_both_formats() {
        let text = "domain = pair\nleg = 2\ngrid.k = 19, 20\nfield.kind = efield\n\
                    field.efield.magnitude = 5\nfield.efield.direction = 0.6, 0.8\n\
                    field.perturb.block = C\nfield.perturb.factor = 1.1\nsolver.k = 4\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_key_value()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_non_unit_direction_and_bad_state() {
        let e = ExperimentConfig::parse(
            "domain = pair\ngrid.cells = 4\nfield.kind = efield\nfield.efield.magnitude = 5\n\
             field.efield.direction = 1, 1\n",
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { .. }));
        let e = ExperimentConfig::parse("domain = pair\ngrid.cells = 4\nsolver.k = 2\noutput.state = 3\n")
            .unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { .. }));
    }
}
