//! Densities and potentials carried from the reference block to every block
//! of a domain.
//!
//! A field is stored as one rule per block. Fields built from a single rule
//! on the reference triangle, composed with each block's inverse placement,
//! are mirror-symmetric across every fold by construction: this is the
//! condition under which the transplantation between the GWW pair survives
//! a coordinate-dependent operator.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BlockId, Domain, Placement, Point};
use crate::grid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("density must be strictly positive and finite, got {value} ({context})")]
    NonPositiveDensity { value: f64, context: String },
    #[error("direction vector must have unit norm, got norm {0}")]
    DirectionNotUnit(f64),
    #[error("invalid field parameter: {0}")]
    InvalidParameter(String),
    #[error("mass is only defined for densities")]
    NotADensity,
    #[error("block {0} is not part of the domain")]
    UnknownBlock(BlockId),
    #[error("field was built on a different domain than the grid")]
    DomainMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Density,
    Potential,
}

/// Which half of the reference block, cut along the altitude from the right
/// angle, carries the `dark` density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSide {
    /// The open half adjacent to `Leg1` (`u > v` in reference coordinates).
    Leg1,
    /// The open half adjacent to `Leg2` (`v > u`).
    Leg2,
}

/// How the electron couples to the point charges sitting at block centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeCoupling {
    /// Each block feels only the charge at its own centroid. This is the
    /// reflection-propagated configuration.
    OwnBlock,
    /// Plain superposition of all centroid charges. Not mirror-symmetric.
    AllBlocks,
}

pub type ReferenceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FieldSpec {
    /// One constant per block; blocks not listed take `default`.
    PiecewiseDensity {
        values: BTreeMap<BlockId, f64>,
        default: f64,
    },
    /// Two-valued density on the reference block, split by its altitude.
    /// Nodes on the altitude take the `light` value.
    SplitDensity {
        light: f64,
        dark: f64,
        dark_side: SplitSide,
    },
    /// Potential of a uniform field `magnitude` along `direction` (unit
    /// vector in reference coordinates), zero at `anchor`:
    /// `V = -charge * magnitude * direction · (x_ref - anchor)`.
    ElectricField {
        magnitude: f64,
        charge: f64,
        direction: [f64; 2],
        anchor: Point,
    },
    /// Coulomb attraction `-q / max(r, cutoff)` to charges at the block centroids.
    PointCharges {
        q: f64,
        cutoff: f64,
        coupling: ChargeCoupling,
    },
    /// Arbitrary rule on reference coordinates.
    Custom {
        kind: FieldKind,
        label: String,
        func: ReferenceFn,
    },
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::PiecewiseDensity { values, default } => f
                .debug_struct("PiecewiseDensity")
                .field("values", values)
                .field("default", default)
                .finish(),
            FieldSpec::SplitDensity {
                light,
                dark,
                dark_side,
            } => f
                .debug_struct("SplitDensity")
                .field("light", light)
                .field("dark", dark)
                .field("dark_side", dark_side)
                .finish(),
            FieldSpec::ElectricField {
                magnitude,
                charge,
                direction,
                anchor,
            } => f
                .debug_struct("ElectricField")
                .field("magnitude", magnitude)
                .field("charge", charge)
                .field("direction", direction)
                .field("anchor", anchor)
                .finish(),
            FieldSpec::PointCharges {
                q,
                cutoff,
                coupling,
            } => f
                .debug_struct("PointCharges")
                .field("q", q)
                .field("cutoff", cutoff)
                .field("coupling", coupling)
                .finish(),
            FieldSpec::Custom { kind, label, .. } => f
                .debug_struct("Custom")
                .field("kind", kind)
                .field("label", label)
                .finish_non_exhaustive(),
        }
    }
}

impl FieldSpec {
    pub fn homogeneous(sigma: f64) -> FieldSpec {
        FieldSpec::PiecewiseDensity {
            values: BTreeMap::new(),
            default: sigma,
        }
    }

    /// The two-density drum of the heterogeneous-membrane experiment.
    pub fn split_drum(light: f64, dark: f64) -> FieldSpec {
        FieldSpec::SplitDensity {
            light,
            dark,
            dark_side: SplitSide::Leg1,
        }
    }

    /// Uniform electric field along the reference `Leg2`, zero potential at
    /// the right-angle vertex of every block.
    pub fn electric_field(magnitude: f64) -> FieldSpec {
        FieldSpec::ElectricField {
            magnitude,
            charge: 1.0,
            direction: [0.0, 1.0],
            anchor: Point::new(0.0, 0.0),
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            FieldSpec::PiecewiseDensity { .. } | FieldSpec::SplitDensity { .. } => {
                FieldKind::Density
            }
            FieldSpec::ElectricField { .. } | FieldSpec::PointCharges { .. } => {
                FieldKind::Potential
            }
            FieldSpec::Custom { kind, .. } => *kind,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let positive = |v: f64, ctx: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FieldError::NonPositiveDensity {
                    value: v,
                    context: ctx.to_string(),
                })
            }
        };
        match self {
            FieldSpec::PiecewiseDensity { values, default } => {
                positive(*default, "default")?;
                for (id, v) in values {
                    positive(*v, &format!("block {id}"))?;
                }
            }
            FieldSpec::SplitDensity { light, dark, .. } => {
                positive(*light, "light")?;
                positive(*dark, "dark")?;
            }
            FieldSpec::ElectricField {
                magnitude,
                charge,
                direction,
                anchor,
            } => {
                let norm = direction[0].hypot(direction[1]);
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(FieldError::DirectionNotUnit(norm));
                }
                if ![*magnitude, *charge, anchor.x, anchor.y]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(FieldError::InvalidParameter(
                        "electric field parameters must be finite".into(),
                    ));
                }
            }
            FieldSpec::PointCharges { q, cutoff, .. } => {
                if !q.is_finite() || !(cutoff.is_finite() && *cutoff > 0.0) {
                    return Err(FieldError::InvalidParameter(format!(
                        "point charges need finite q and positive cutoff, got q={q}, cutoff={cutoff}"
                    )));
                }
            }
            FieldSpec::Custom { .. } => {}
        }
        Ok(())
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        match self {
            FieldSpec::PiecewiseDensity { values, default } => {
                let mut s = format!("piecewise_density default={default}");
                for (id, v) in values {
                    s.push_str(&format!(" {id}={v}"));
                }
                s
            }
            FieldSpec::SplitDensity {
                light,
                dark,
                dark_side,
            } => format!("split_density light={light} dark={dark} dark_side={dark_side:?}"),
            FieldSpec::ElectricField {
                magnitude,
                charge,
                direction,
                anchor,
            } => format!(
                "efield magnitude={magnitude} charge={charge} direction=({}, {}) anchor=({}, {}) [reference block coordinates]",
                direction[0], direction[1], anchor.x, anchor.y
            ),
            FieldSpec::PointCharges {
                q,
                cutoff,
                coupling,
            } => format!("point_charges q={q} cutoff={cutoff} coupling={coupling:?}"),
            FieldSpec::Custom { kind, label, .. } => format!("custom {kind:?} {label}"),
        }
    }
}

#[derive(Clone)]
enum Rule {
    /// Function of reference coordinates.
    Reference(ReferenceFn),
    /// Function of plane coordinates.
    Plane(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

#[derive(Clone)]
struct BlockRule {
    id: BlockId,
    placement: Placement,
    rule: Rule,
}

/// A scalar field on a domain.
#[derive(Clone)]
pub struct ScalarField {
    kind: FieldKind,
    spec: FieldSpec,
    leg: f64,
    rules: Vec<BlockRule>,
    domain: Domain,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("kind", &self.kind)
            .field("spec", &self.spec)
            .field("domain", &self.domain.name)
            .finish()
    }
}

impl ScalarField {
    /// Builds the field described by `spec` on `domain`.
    pub fn new(spec: &FieldSpec, domain: &Domain) -> Result<ScalarField, FieldError> {
        spec.validate()?;
        let leg = domain.leg();
        let per_block = |f: &dyn Fn(BlockId) -> Rule| -> Vec<BlockRule> {
            domain
                .blocks
                .iter()
                .map(|b| BlockRule {
                    id: b.id,
                    placement: b.placement,
                    rule: f(b.id),
                })
                .collect()
        };
        let shared = |func: ReferenceFn| per_block(&|_| Rule::Reference(func.clone()));
        let rules = match spec {
            FieldSpec::PiecewiseDensity { values, default } => {
                for id in values.keys() {
                    if domain.block(*id).is_none() {
                        return Err(FieldError::UnknownBlock(*id));
                    }
                }
                per_block(&|id| {
                    let v = values.get(&id).copied().unwrap_or(*default);
                    Rule::Reference(Arc::new(move |_| v))
                })
            }
            &FieldSpec::SplitDensity {
                light,
                dark,
                dark_side,
            } => shared(Arc::new(move |r: Point| {
                let in_dark = match dark_side {
                    SplitSide::Leg1 => r.x > r.y,
                    SplitSide::Leg2 => r.y > r.x,
                };
                if in_dark {
                    dark
                } else {
                    light
                }
            })),
            &FieldSpec::ElectricField {
                magnitude,
                charge,
                direction,
                anchor,
            } => shared(Arc::new(move |r: Point| {
                -charge
                    * magnitude
                    * (direction[0] * (r.x - anchor.x) + direction[1] * (r.y - anchor.y))
            })),
            &FieldSpec::PointCharges {
                q,
                cutoff,
                coupling,
            } => match coupling {
                ChargeCoupling::OwnBlock => {
                    let c = domain.reference.centroid();
                    shared(Arc::new(move |r: Point| -q / r.distance(c).max(cutoff)))
                }
                ChargeCoupling::AllBlocks => {
                    let centroids: Vec<Point> = domain
                        .blocks
                        .iter()
                        .map(|b| b.placement.apply(domain.reference.centroid(), leg))
                        .collect();
                    let func: Arc<dyn Fn(Point) -> f64 + Send + Sync> =
                        Arc::new(move |p: Point| {
                            -q * centroids
                                .iter()
                                .map(|c| 1.0 / p.distance(*c).max(cutoff))
                                .sum::<f64>()
                        });
                    per_block(&|_| Rule::Plane(func.clone()))
                }
            },
            FieldSpec::Custom { func, .. } => shared(func.clone()),
        };
        Ok(ScalarField {
            kind: spec.kind(),
            spec: spec.clone(),
            leg,
            rules,
            domain: domain.clone(),
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Multiplies the field by `factor` inside one block only. Used to
    /// break the mirror symmetry on purpose.
    pub fn scaled_in_block(&self, id: BlockId, factor: f64) -> Result<ScalarField, FieldError> {
        let mut out = self.clone();
        let br = out
            .rules
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or(FieldError::UnknownBlock(id))?;
        let scaled = match br.rule.clone() {
            Rule::Reference(f) => Rule::Reference(Arc::new(move |r| factor * f(r))),
            Rule::Plane(f) => Rule::Plane(Arc::new(move |p| factor * f(p))),
        };
        br.rule = scaled;
        if self.kind == FieldKind::Density && !(factor.is_finite() && factor > 0.0) {
            return Err(FieldError::NonPositiveDensity {
                value: factor,
                context: "scale factor".into(),
            });
        }
        Ok(out)
    }

    fn rule(&self, id: BlockId) -> Option<&BlockRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Value of block `id`'s rule at plane point `p` (which may lie on the
    /// block's boundary or even outside it).
    pub fn eval_in_block(&self, id: BlockId, p: Point) -> Option<f64> {
        let br = self.rule(id)?;
        Some(match &br.rule {
            Rule::Reference(f) => f(br.placement.apply_inverse(p, self.leg)),
            Rule::Plane(f) => f(p),
        })
    }

    /// Value of block `id`'s rule given both coordinate frames, which the
    /// grid sampler computes exactly.
    pub(crate) fn eval_with_frames(&self, id: BlockId, plane: Point, reference: Point) -> f64 {
        let br = self.rule(id).expect("block present in field");
        match &br.rule {
            Rule::Reference(f) => f(reference),
            Rule::Plane(f) => f(plane),
        }
    }

    /// Value at `p`, using the block assignment of [`Domain::locate`].
    pub fn eval(&self, p: Point) -> Option<f64> {
        let (id, r) = self.domain.locate(p)?;
        let br = self.rule(id)?;
        Some(match &br.rule {
            Rule::Reference(f) => f(r),
            Rule::Plane(f) => f(p),
        })
    }
}

impl ScalarField {
    /// Nodal values on `grid`, in grid order. A node shared by several blocks
    /// takes the mean of their values.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>, FieldError> {
        if grid.domain.blocks != self.domain.blocks || grid.domain.leg() != self.leg {
            return Err(FieldError::DomainMismatch);
        }
        Ok((0..grid.len())
            .into_par_iter()
            .map(|k| {
                let plane = grid.coords(k);
                let mut vals: Vec<f64> = grid
                    .incidences(k)
                    .iter()
                    .map(|inc| self.eval_with_frames(inc.block, plane, grid.reference_coords(inc)))
                    .collect();
                combine_node_values(&mut vals)
            })
            .collect())
    }
}

/// Combines the values of all blocks meeting at a node. Equal values pass
/// through untouched so mirror-symmetric fields stay bitwise symmetric.
pub(crate) fn combine_node_values(values: &mut [f64]) -> f64 {
    let first = values[0];
    if values.iter().all(|v| v.to_bits() == first.to_bits()) {
        return first;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub max_violation: f64,
    pub pairs_checked: usize,
    pub pass: bool,
}

/// Samples `n_samples` points in every block and compares the field with its
/// value at the mirror point across each incident fold.
pub fn check_symmetry(
    field: &ScalarField,
    domain: &Domain,
    n_samples: usize,
    tol: f64,
) -> SymmetryReport {
    let leg = domain.leg();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut max_violation = 0.0f64;
    let mut pairs = 0usize;
    for b in &domain.blocks {
        let folds: Vec<_> = domain.folds.iter().filter(|f| f.touches(b.id)).collect();
        for _ in 0..n_samples {
            // uniform in the reference triangle
            let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = b.placement.apply(Point::new(u * leg, v * leg), leg);
            let here = field.eval_in_block(b.id, p).unwrap();
            for f in &folds {
                let other = f.other(b.id).unwrap();
                let q = f.line.reflect(p, leg);
                let there = field.eval_in_block(other, q).unwrap();
                max_violation = max_violation.max((here - there).abs());
                pairs += 1;
            }
        }
    }
    SymmetryReport {
        max_violation,
        pairs_checked: pairs,
        pass: max_violation <= tol,
    }
}

/// Total mass of a density over the domain.
pub fn total_mass(field: &ScalarField, domain: &Domain) -> Result<f64, FieldError> {
    if field.kind() != FieldKind::Density {
        return Err(FieldError::NotADensity);
    }
    let block_area = domain.reference.area();
    match field.spec() {
        FieldSpec::PiecewiseDensity { .. } if field_is_unmodified(field) => Ok(domain
            .blocks
            .iter()
            .map(|b| {
                let c = b.placement.apply(domain.reference.centroid(), domain.leg());
                field.eval_in_block(b.id, c).unwrap() * block_area
            })
            .sum()),
        FieldSpec::SplitDensity { light, dark, .. } if field_is_unmodified(field) => {
            Ok(domain.blocks.len() as f64 * 0.5 * block_area * (light + dark))
        }
        _ => Ok(domain
            .blocks
            .iter()
            .map(|b| {
                let leg = domain.leg();
                let tri = [
                    Point::new(0.0, 0.0),
                    Point::new(leg, 0.0),
                    Point::new(0.0, leg),
                ];
                let f = |r: Point| field.eval_in_block(b.id, b.placement.apply(r, leg)).unwrap();
                adaptive_triangle_quadrature(&f, tri, 1e-10 * block_area, 12)
            })
            .sum()),
    }
}

fn field_is_unmodified(field: &ScalarField) -> bool {
    // scaled_in_block keeps the spec but swaps the rule; detect by probing centroids
    match field.spec() {
        FieldSpec::PiecewiseDensity { values, default } => field.domain.blocks.iter().all(|b| {
            let c = b
                .placement
                .apply(field.domain.reference.centroid(), field.leg);
            let expect = values.get(&b.id).copied().unwrap_or(*default);
            field.eval_in_block(b.id, c) == Some(expect)
        }),
        FieldSpec::SplitDensity {
            light,
            dark,
            dark_side,
        } => {
            let leg = field.leg;
            let (pd, pl) = match dark_side {
                SplitSide::Leg1 => (Point::new(0.6 * leg, 0.1 * leg), Point::new(0.1 * leg, 0.6 * leg)),
                SplitSide::Leg2 => (Point::new(0.1 * leg, 0.6 * leg), Point::new(0.6 * leg, 0.1 * leg)),
            };
            field.domain.blocks.iter().all(|b| {
                field.eval_in_block(b.id, b.placement.apply(pd, leg)) == Some(*dark)
                    && field.eval_in_block(b.id, b.placement.apply(pl, leg)) == Some(*light)
            })
        }
        _ => false,
    }
}

// Degree-5 seven-point rule on a triangle (barycentric points, weights sum to 1).
const DUNAVANT5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

fn triangle_rule(f: &dyn Fn(Point) -> f64, t: [Point; 3]) -> f64 {
    let area = 0.5
        * ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y)).abs();
    DUNAVANT5
        .iter()
        .map(|(b, w)| {
            let p = Point::new(
                b[0] * t[0].x + b[1] * t[1].x + b[2] * t[2].x,
                b[0] * t[0].y + b[1] * t[1].y + b[2] * t[2].y,
            );
            w * f(p)
        })
        .sum::<f64>()
        * area
}

/// Adaptive integration by 4-way midpoint subdivision.
pub fn adaptive_triangle_quadrature(
    f: &dyn Fn(Point) -> f64,
    t: [Point; 3],
    tol: f64,
    max_depth: u32,
) -> f64 {
    fn mid(a: Point, b: Point) -> Point {
        Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
    }
    fn recurse(f: &dyn Fn(Point) -> f64, t: [Point; 3], whole: f64, tol: f64, depth: u32) -> f64 {
        let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
        let kids = [
            [t[0], m01, m20],
            [m01, t[1], m12],
            [m20, m12, t[2]],
            [m01, m12, m20],
        ];
        let parts: Vec<f64> = kids.iter().map(|k| triangle_rule(f, *k)).collect();
        let refined: f64 = parts.iter().sum();
        if depth == 0 || (refined - whole).abs() <= tol {
            return refined;
        }
        kids.iter()
            .zip(&parts)
            .map(|(k, w)| recurse(f, *k, *w, tol / 4.0, depth - 1))
            .sum()
    }
    let whole = triangle_rule(f, t);
    recurse(f, t, whole, tol, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_gww_pair;

    #[test]
    fn homogeneous_is_one_everywhere() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let f = ScalarField::new(&FieldSpec::homogeneous(1.0), &a).unwrap();
        for b in &a.blocks {
            let c = a.block_centroid(b.id).unwrap();
            assert_eq!(f.eval(c), Some(1.0));
        }
        let r = check_symmetry(&f, &a, 50, 0.0);
        assert_eq!(r.max_violation, 0.0);
        assert!(r.pass);
        assert_eq!(total_mass(&f, &a).unwrap(), 14.0);
    }

    #[test]
    fn split_drum_values_and_mass() {
        let (a, b) = build_gww_pair(2.0).unwrap();
        let spec = FieldSpec::split_drum(1.0, 2.0);
        let fa = ScalarField::new(&spec, &a).unwrap();
        let fb = ScalarField::new(&spec, &b).unwrap();
        // a point in the leg1 half of block D, and one in its leg2 half
        let d = a.block(BlockId::D).unwrap().placement;
        assert_eq!(fa.eval(d.apply(Point::new(1.2, 0.3), 2.0)), Some(2.0));
        assert_eq!(fa.eval(d.apply(Point::new(0.3, 1.2), 2.0)), Some(1.0));
        assert_eq!(check_symmetry(&fa, &a, 200, 0.0).max_violation, 0.0);
        assert_eq!(total_mass(&fa, &a).unwrap(), 21.0);
        assert_eq!(total_mass(&fa, &a).unwrap(), total_mass(&fb, &b).unwrap());
    }

    #[test]
    fn zero_efield_is_zero() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let f = ScalarField::new(&FieldSpec::electric_field(0.0), &a).unwrap();
        for b in &a.blocks {
            assert_eq!(f.eval(a.block_centroid(b.id).unwrap()).unwrap().abs(), 0.0);
        }
    }

    #[test]
    fn perturbed_block_breaks_symmetry() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let mut values = BTreeMap::new();
        values.insert(BlockId::A, 3.0);
        let spec = FieldSpec::PiecewiseDensity {
            values,
            default: 1.0,
        };
        let f = ScalarField::new(&spec, &a).unwrap();
        let r = check_symmetry(&f, &a, 20, 1.999);
        assert!(!r.pass);
        assert_eq!(r.max_violation, 2.0);
    }

    #[test]
    fn parity_class_density_is_not_mirror_symmetric() {
        // every fold joins an even and an odd block
        let (a, _) = build_gww_pair(2.0).unwrap();
        let values = [BlockId::B, BlockId::D, BlockId::F, BlockId::G]
            .into_iter()
            .map(|id| (id, 2.0))
            .collect();
        let spec = FieldSpec::PiecewiseDensity {
            values,
            default: 1.0,
        };
        let f = ScalarField::new(&spec, &a).unwrap();
        assert!(!check_symmetry(&f, &a, 10, 0.5).pass);
        assert_eq!(total_mass(&f, &a).unwrap(), 22.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        assert!(matches!(
            ScalarField::new(&FieldSpec::homogeneous(0.0), &a),
            Err(FieldError::NonPositiveDensity { .. })
        ));
        let bad_dir = FieldSpec::ElectricField {
            magnitude: 1.0,
            charge: 1.0,
            direction: [1.0, 1.0],
            anchor: Point::new(0.0, 0.0),
        };
        assert!(matches!(
            ScalarField::new(&bad_dir, &a),
            Err(FieldError::DirectionNotUnit(_))
        ));
        let pot = ScalarField::new(&FieldSpec::electric_field(5.0), &a).unwrap();
        assert_eq!(total_mass(&pot, &a), Err(FieldError::NotADensity));
    }

    #[test]
    fn own_block_charges_symmetric_all_blocks_not() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let own = FieldSpec::PointCharges {
            q: 1.0,
            cutoff: 0.01,
            coupling: ChargeCoupling::OwnBlock,
        };
        let all = FieldSpec::PointCharges {
            q: 1.0,
            cutoff: 0.01,
            coupling: ChargeCoupling::AllBlocks,
        };
        let f = ScalarField::new(&own, &a).unwrap();
        assert!(check_symmetry(&f, &a, 100, 1e-12).pass);
        let g = ScalarField::new(&all, &a).unwrap();
        assert!(!check_symmetry(&g, &a, 100, 1e-6).pass);
    }

    #[test]
    fn efield_continuous_across_folds() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let f = ScalarField::new(&FieldSpec::electric_field(5.0), &a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let fold = a.folds[rng.gen_range(0..a.folds.len())];
            let blk = a.block(fold.blocks.0).unwrap();
            let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            // foot of the perpendicular onto the shared edge
            let q = blk.placement.apply(Point::new(2.0 * u, 2.0 * v), 2.0);
            let r = fold.line.reflect(q, 2.0);
            let p = Point::new(0.5 * (q.x + r.x), 0.5 * (q.y + r.y));
            let lhs = f.eval_in_block(fold.blocks.0, p).unwrap();
            let rhs = f.eval_in_block(fold.blocks.1, p).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn quadrature_matches_closed_form_mass() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let smooth = FieldSpec::Custom {
            kind: FieldKind::Density,
            label: "1+x".into(),
            func: Arc::new(|r: Point| 1.0 + r.x),
        };
        let f = ScalarField::new(&smooth, &a).unwrap();
        // per block: ∫(1+u) over the reference triangle = 2 + ∫u = 2 + leg³/6
        let expect = 7.0 * (2.0 + 8.0 / 6.0);
        assert!((total_mass(&f, &a).unwrap() - expect).abs() < 1e-10);
    }
}
