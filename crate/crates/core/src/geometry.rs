//! Planar domains assembled from copies of a right isosceles triangle.
//!
//! Every domain is generated from a single reference block by repeated
//! reflections across block edges. All vertices sit on the integer lattice
//! in units of the leg length, so every fold line is axis-aligned or a 45°
//! diagonal through lattice points and reflections of lattice points are
//! exact in floating point.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("leg length must be positive and finite, got {0}")]
    InvalidLeg(f64),
    #[error("block {0} referenced before it was placed")]
    UnknownParent(BlockId),
    #[error("block {0} overlaps an existing block")]
    Overlap(BlockId),
    #[error("malformed domain description at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Block labels. Ordering is used for tie-breaking on shared edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl BlockId {
    pub const ALL: [BlockId; 7] = [
        BlockId::A,
        BlockId::B,
        BlockId::C,
        BlockId::D,
        BlockId::E,
        BlockId::F,
        BlockId::G,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BlockId> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for BlockId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(BlockId::A),
            "B" | "b" => Ok(BlockId::B),
            "C" | "c" => Ok(BlockId::C),
            "D" | "d" => Ok(BlockId::D),
            "E" | "e" => Ok(BlockId::E),
            "F" | "f" => Ok(BlockId::F),
            "G" | "g" => Ok(BlockId::G),
            other => Err(format!("unknown block id `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn from_det(det: i32) -> Parity {
        if det > 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Edges of the reference triangle. `Leg1` runs from the right-angle vertex
/// along the x axis, `Leg2` along the y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Leg1,
    Leg2,
    Hypotenuse,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 3] = [EdgeLabel::Leg1, EdgeLabel::Leg2, EdgeLabel::Hypotenuse];

    /// Endpoints in reference lattice coordinates (units of the leg).
    fn endpoints(self) -> ([i64; 2], [i64; 2]) {
        match self {
            EdgeLabel::Leg1 => ([0, 0], [1, 0]),
            EdgeLabel::Leg2 => ([0, 0], [0, 1]),
            EdgeLabel::Hypotenuse => ([1, 0], [0, 1]),
        }
    }

    fn name(self) -> &'static str {
        match self {
            EdgeLabel::Leg1 => "leg1",
            EdgeLabel::Leg2 => "leg2",
            EdgeLabel::Hypotenuse => "hypotenuse",
        }
    }
}

impl FromStr for EdgeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "leg1" => Ok(EdgeLabel::Leg1),
            "leg2" => Ok(EdgeLabel::Leg2),
            "hypotenuse" | "hyp" => Ok(EdgeLabel::Hypotenuse),
            other => Err(format!("unknown edge label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Lattice isometry `x ↦ M x + t` where `M` is a signed permutation matrix
/// and `t` is an integer translation in units of the leg length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub m: [[i32; 2]; 2],
    pub t: [i64; 2],
}

impl Placement {
    pub const IDENTITY: Placement = Placement {
        m: [[1, 0], [0, 1]],
        t: [0, 0],
    };

    pub fn det(&self) -> i32 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_orthogonal(&self) -> bool {
        let m = &self.m;
        let c0 = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let c1 = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        let dot = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        c0 == 1 && c1 == 1 && dot == 0
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Placement) -> Placement {
        let a = &self.m;
        let b = &other.m;
        let mut m = [[0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let t = self.apply_linear(other.t);
        Placement {
            m,
            t: [t[0] + self.t[0], t[1] + self.t[1]],
        }
    }

    pub fn inverse(&self) -> Placement {
        // orthogonal: M⁻¹ = Mᵀ
        let m = [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]];
        let inv = Placement { m, t: [0, 0] };
        let t = inv.apply_linear(self.t);
        Placement {
            m,
            t: [-t[0], -t[1]],
        }
    }

    fn apply_linear(&self, p: [i64; 2]) -> [i64; 2] {
        let m = &self.m;
        [
            m[0][0] as i64 * p[0] + m[0][1] as i64 * p[1],
            m[1][0] as i64 * p[0] + m[1][1] as i64 * p[1],
        ]
    }

    /// Maps a lattice point given in units of `leg / cells`.
    pub fn apply_lattice(&self, p: [i64; 2], cells: i64) -> [i64; 2] {
        let q = self.apply_linear(p);
        [q[0] + self.t[0] * cells, q[1] + self.t[1] * cells]
    }

    pub fn apply(&self, p: Point, leg: f64) -> Point {
        let m = &self.m;
        Point::new(
            m[0][0] as f64 * p.x + m[0][1] as f64 * p.y + self.t[0] as f64 * leg,
            m[1][0] as f64 * p.x + m[1][1] as f64 * p.y + self.t[1] as f64 * leg,
        )
    }

    pub fn apply_inverse(&self, p: Point, leg: f64) -> Point {
        let dx = p.x - self.t[0] as f64 * leg;
        let dy = p.y - self.t[1] as f64 * leg;
        let m = &self.m;
        Point::new(
            m[0][0] as f64 * dx + m[1][0] as f64 * dy,
            m[0][1] as f64 * dx + m[1][1] as f64 * dy,
        )
    }

    /// Applies the linear part only, e.g. to carry direction vectors.
    pub fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.m;
        [
            m[0][0] as f64 * v[0] + m[0][1] as f64 * v[1],
            m[1][0] as f64 * v[0] + m[1][1] as f64 * v[1],
        ]
    }
}

/// The 45-45-90 building block with its right angle at the origin and legs
/// along the positive axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTriangle {
    pub leg: f64,
}

impl ReferenceTriangle {
    pub fn new(leg: f64) -> Result<Self, GeometryError> {
        if !(leg.is_finite() && leg > 0.0) {
            return Err(GeometryError::InvalidLeg(leg));
        }
        Ok(ReferenceTriangle { leg })
    }

    pub fn vertices(&self) -> [Point; 3] {
        [
            Point::new(0.0, 0.0),
            Point::new(self.leg, 0.0),
            Point::new(0.0, self.leg),
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.leg * self.leg
    }

    pub fn centroid(&self) -> Point {
        Point::new(self.leg / 3.0, self.leg / 3.0)
    }

    /// Interior angles in degrees, at the vertices returned by [`vertices`](Self::vertices).
    pub fn angles(&self) -> [f64; 3] {
        let v = self.vertices();
        let angle = |a: Point, b: Point, c: Point| {
            let u = [b.x - a.x, b.y - a.y];
            let w = [c.x - a.x, c.y - a.y];
            let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        };
        [
            angle(v[0], v[1], v[2]),
            angle(v[1], v[2], v[0]),
            angle(v[2], v[0], v[1]),
        ]
    }

    /// Closed containment with a tolerance relative to the leg.
    pub fn contains(&self, p: Point) -> bool {
        let eps = 1e-12 * self.leg;
        p.x >= -eps && p.y >= -eps && p.x + p.y <= self.leg + eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub placement: Placement,
    pub parity: Parity,
}

impl Block {
    /// Vertices in lattice units of the leg, as images of the reference
    /// right-angle vertex, the `Leg1` end and the `Leg2` end.
    pub fn lattice_vertices(&self) -> [[i64; 2]; 3] {
        [[0, 0], [1, 0], [0, 1]].map(|p| self.placement.apply_lattice(p, 1))
    }

    fn edge(&self, label: EdgeLabel) -> ([i64; 2], [i64; 2]) {
        let (a, b) = label.endpoints();
        (
            self.placement.apply_lattice(a, 1),
            self.placement.apply_lattice(b, 1),
        )
    }
}

/// A line of reflection, with its offset in units of the leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldLine {
    /// `x = c`
    Vertical(i64),
    /// `y = c`
    Horizontal(i64),
    /// `y = x + c`
    Diagonal(i64),
    /// `x + y = c`
    AntiDiagonal(i64),
}

impl FoldLine {
    fn through(a: [i64; 2], b: [i64; 2]) -> FoldLine {
        let d = [b[0] - a[0], b[1] - a[1]];
        match (d[0], d[1]) {
            (0, _) => FoldLine::Vertical(a[0]),
            (_, 0) => FoldLine::Horizontal(a[1]),
            (x, y) if x == y => FoldLine::Diagonal(a[1] - a[0]),
            _ => FoldLine::AntiDiagonal(a[0] + a[1]),
        }
    }

    /// Reflection of a lattice point whose coordinates are in units of `leg / cells`.
    pub fn reflect_lattice(&self, p: [i64; 2], cells: i64) -> [i64; 2] {
        match *self {
            FoldLine::Vertical(c) => [2 * c * cells - p[0], p[1]],
            FoldLine::Horizontal(c) => [p[0], 2 * c * cells - p[1]],
            FoldLine::Diagonal(c) => [p[1] - c * cells, p[0] + c * cells],
            FoldLine::AntiDiagonal(c) => [c * cells - p[1], c * cells - p[0]],
        }
    }

    pub fn reflect(&self, p: Point, leg: f64) -> Point {
        match *self {
            FoldLine::Vertical(c) => Point::new(2.0 * c as f64 * leg - p.x, p.y),
            FoldLine::Horizontal(c) => Point::new(p.x, 2.0 * c as f64 * leg - p.y),
            FoldLine::Diagonal(c) => {
                let c = c as f64 * leg;
                Point::new(p.y - c, p.x + c)
            }
            FoldLine::AntiDiagonal(c) => {
                let c = c as f64 * leg;
                Point::new(c - p.y, c - p.x)
            }
        }
    }

    /// The reflection as a lattice isometry.
    pub fn as_placement(&self) -> Placement {
        match *self {
            FoldLine::Vertical(c) => Placement {
                m: [[-1, 0], [0, 1]],
                t: [2 * c, 0],
            },
            FoldLine::Horizontal(c) => Placement {
                m: [[1, 0], [0, -1]],
                t: [0, 2 * c],
            },
            FoldLine::Diagonal(c) => Placement {
                m: [[0, 1], [1, 0]],
                t: [-c, c],
            },
            FoldLine::AntiDiagonal(c) => Placement {
                m: [[0, -1], [-1, 0]],
                t: [c, c],
            },
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            FoldLine::Vertical(_) => "vertical",
            FoldLine::Horizontal(_) => "horizontal",
            FoldLine::Diagonal(_) => "diagonal",
            FoldLine::AntiDiagonal(_) => "antidiagonal",
        }
    }

    fn offset(&self) -> i64 {
        match *self {
            FoldLine::Vertical(c)
            | FoldLine::Horizontal(c)
            | FoldLine::Diagonal(c)
            | FoldLine::AntiDiagonal(c) => c,
        }
    }
}

/// Two blocks glued along a common edge; each is the mirror image of the
/// other across `line`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub blocks: (BlockId, BlockId),
    pub edge: EdgeLabel,
    pub line: FoldLine,
}

impl Fold {
    pub fn touches(&self, id: BlockId) -> bool {
        self.blocks.0 == id || self.blocks.1 == id
    }

    pub fn other(&self, id: BlockId) -> Option<BlockId> {
        if self.blocks.0 == id {
            Some(self.blocks.1)
        } else if self.blocks.1 == id {
            Some(self.blocks.0)
        } else {
            None
        }
    }
}

/// Mirror image of `p` across the fold line.
pub fn reflect_across(fold: &Fold, p: Point, leg: f64) -> Point {
    fold.line.reflect(p, leg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainName {
    #[serde(rename = "GWW_A")]
    GwwA,
    #[serde(rename = "GWW_B")]
    GwwB,
    /// Two blocks glued along the hypotenuse: a square of side `leg`.
    #[serde(rename = "SQUARE")]
    Square,
}

impl DomainName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainName::GwwA => "GWW_A",
            DomainName::GwwB => "GWW_B",
            DomainName::Square => "SQUARE",
        }
    }
}

impl FromStr for DomainName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gww_a" => Ok(DomainName::GwwA),
            "gww_b" => Ok(DomainName::GwwB),
            "square" => Ok(DomainName::Square),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One gluing step: `child` is `parent` reflected across `parent`'s `edge`.
#[derive(Debug, Clone, Copy)]
pub struct ReflectionStep {
    pub child: BlockId,
    pub parent: BlockId,
    pub edge: EdgeLabel,
}

const fn step(child: BlockId, parent: BlockId, edge: EdgeLabel) -> ReflectionStep {
    ReflectionStep {
        child,
        parent,
        edge,
    }
}

/// Both GWW domains are a path A-B-C-D-E with F and G hung on A.
const GWW_A_STEPS: [ReflectionStep; 6] = [
    step(BlockId::B, BlockId::A, EdgeLabel::Hypotenuse),
    step(BlockId::C, BlockId::B, EdgeLabel::Leg1),
    step(BlockId::D, BlockId::C, EdgeLabel::Leg2),
    step(BlockId::E, BlockId::D, EdgeLabel::Hypotenuse),
    step(BlockId::F, BlockId::A, EdgeLabel::Leg1),
    step(BlockId::G, BlockId::A, EdgeLabel::Leg2),
];

const GWW_B_STEPS: [ReflectionStep; 6] = [
    step(BlockId::B, BlockId::A, EdgeLabel::Leg1),
    step(BlockId::C, BlockId::B, EdgeLabel::Hypotenuse),
    step(BlockId::D, BlockId::C, EdgeLabel::Leg2),
    step(BlockId::E, BlockId::D, EdgeLabel::Leg1),
    step(BlockId::F, BlockId::A, EdgeLabel::Leg2),
    step(BlockId::G, BlockId::A, EdgeLabel::Hypotenuse),
];

const SQUARE_STEPS: [ReflectionStep; 1] = [step(BlockId::B, BlockId::A, EdgeLabel::Hypotenuse)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: DomainName,
    pub reference: ReferenceTriangle,
    pub blocks: Vec<Block>,
    pub folds: Vec<Fold>,
}

impl Domain {
    /// Builds a domain from block A (identity placement) and a sequence of
    /// reflections.
    pub fn from_reflections(
        name: DomainName,
        leg: f64,
        steps: &[ReflectionStep],
    ) -> Result<Domain, GeometryError> {
        let reference = ReferenceTriangle::new(leg)?;
        let mut blocks = vec![Block {
            id: BlockId::A,
            placement: Placement::IDENTITY,
            parity: Parity::Even,
        }];
        let mut folds = Vec::with_capacity(steps.len());
        for s in steps {
            let parent = *blocks
                .iter()
                .find(|b| b.id == s.parent)
                .ok_or(GeometryError::UnknownParent(s.parent))?;
            let (a, b) = parent.edge(s.edge);
            let line = FoldLine::through(a, b);
            let placement = line.as_placement().compose(&parent.placement);
            let child = Block {
                id: s.child,
                placement,
                parity: Parity::from_det(placement.det()),
            };
            if blocks.iter().any(|b| overlaps(b, &child)) {
                return Err(GeometryError::Overlap(s.child));
            }
            blocks.push(child);
            folds.push(Fold {
                blocks: (s.parent.min(s.child), s.parent.max(s.child)),
                edge: s.edge,
                line,
            });
        }
        blocks.sort_by_key(|b| b.id);
        Ok(Domain {
            name,
            reference,
            blocks,
            folds,
        })
    }

    pub fn gww_a(leg: f64) -> Result<Domain, GeometryError> {
        Self::from_reflections(DomainName::GwwA, leg, &GWW_A_STEPS)
    }

    pub fn gww_b(leg: f64) -> Result<Domain, GeometryError> {
        Self::from_reflections(DomainName::GwwB, leg, &GWW_B_STEPS)
    }

    pub fn square(side: f64) -> Result<Domain, GeometryError> {
        Self::from_reflections(DomainName::Square, side, &SQUARE_STEPS)
    }

    pub fn by_name(name: DomainName, leg: f64) -> Result<Domain, GeometryError> {
        match name {
            DomainName::GwwA => Self::gww_a(leg),
            DomainName::GwwB => Self::gww_b(leg),
            DomainName::Square => Self::square(leg),
        }
    }

    pub fn leg(&self) -> f64 {
        self.reference.leg
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn area(&self) -> f64 {
        self.blocks.len() as f64 * self.reference.area()
    }

    /// Edges of the region boundary (edges covered by exactly one block), in
    /// leg units.
    pub fn boundary_edges(&self) -> Vec<([i64; 2], [i64; 2])> {
        let mut count: BTreeMap<([i64; 2], [i64; 2]), usize> = BTreeMap::new();
        for b in &self.blocks {
            for label in EdgeLabel::ALL {
                let (p, q) = b.edge(label);
                *count.entry((p.min(q), p.max(q))).or_default() += 1;
            }
        }
        count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary_edges()
            .iter()
            .map(|(p, q)| {
                let dx = (q[0] - p[0]) as f64;
                let dy = (q[1] - p[1]) as f64;
                dx.hypot(dy) * self.leg()
            })
            .sum()
    }

    /// Lattice bounding box in leg units, `(min, max)`.
    pub fn bounding_box(&self) -> ([i64; 2], [i64; 2]) {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for b in &self.blocks {
            for v in b.lattice_vertices() {
                for k in 0..2 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
        }
        (lo, hi)
    }

    /// Blocks grouped by parity class, each group in id order.
    pub fn parity_classes(&self) -> (Vec<BlockId>, Vec<BlockId>) {
        let (even, odd): (Vec<&Block>, Vec<&Block>) =
            self.blocks.iter().partition(|b| b.parity == Parity::Even);
        (
            even.iter().map(|b| b.id).collect(),
            odd.iter().map(|b| b.id).collect(),
        )
    }

    /// True when the fold graph is a spanning tree of the blocks.
    pub fn fold_graph_is_tree(&self) -> bool {
        let n = self.blocks.len();
        if self.folds.len() + 1 != n {
            return false;
        }
        let mut seen = BTreeSet::from([BlockId::A]);
        let mut stack = vec![BlockId::A];
        while let Some(id) = stack.pop() {
            for f in self.folds.iter().filter(|f| f.touches(id)) {
                let other = f.other(id).unwrap();
                if seen.insert(other) {
                    stack.push(other);
                }
            }
        }
        seen.len() == n
    }

    /// Fold path from block A to `target`, in traversal order.
    pub fn fold_path(&self, target: BlockId) -> Option<Vec<Fold>> {
        let mut prev: HashMap<BlockId, (BlockId, Fold)> = HashMap::new();
        let mut stack = vec![BlockId::A];
        let mut seen = BTreeSet::from([BlockId::A]);
        while let Some(id) = stack.pop() {
            for f in self.folds.iter().filter(|f| f.touches(id)) {
                let other = f.other(id).unwrap();
                if seen.insert(other) {
                    prev.insert(other, (id, *f));
                    stack.push(other);
                }
            }
        }
        if !seen.contains(&target) {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = target;
        while cur != BlockId::A {
            let (p, f) = prev[&cur];
            path.push(f);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    /// Sorted squared pairwise distances between distinct block vertices,
    /// in leg units. A congruence invariant.
    pub fn vertex_distance_multiset(&self) -> Vec<i64> {
        let verts: BTreeSet<[i64; 2]> = self
            .blocks
            .iter()
            .flat_map(|b| b.lattice_vertices())
            .collect();
        let verts: Vec<_> = verts.into_iter().collect();
        let mut d = Vec::with_capacity(verts.len() * verts.len() / 2);
        for (i, p) in verts.iter().enumerate() {
            for q in &verts[i + 1..] {
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                d.push(dx * dx + dy * dy);
            }
        }
        d.sort_unstable();
        d
    }

    /// Finds the block containing `p` and the corresponding reference
    /// coordinates. Points on shared edges go to the lowest block id.
    pub fn locate(&self, p: Point) -> Option<(BlockId, Point)> {
        let leg = self.leg();
        self.blocks.iter().find_map(|b| {
            let r = b.placement.apply_inverse(p, leg);
            self.reference.contains(r).then_some((b.id, r))
        })
    }

    pub fn block_centroid(&self, id: BlockId) -> Option<Point> {
        self.block(id)
            .map(|b| b.placement.apply(self.reference.centroid(), self.leg()))
    }

    /// Text form: a header, one line per block
    /// `id det tx ty m00 m01 m10 m11` (translation in length units), then
    /// one line per fold.
    pub fn to_text(&self) -> String {
        let leg = self.leg();
        let mut out = format!("domain {} {}\n", self.name, leg);
        for b in &self.blocks {
            let p = &b.placement;
            out.push_str(&format!(
                "{} {} {} {} {} {} {} {}\n",
                b.id,
                p.det(),
                p.t[0] as f64 * leg,
                p.t[1] as f64 * leg,
                p.m[0][0],
                p.m[0][1],
                p.m[1][0],
                p.m[1][1]
            ));
        }
        for f in &self.folds {
            out.push_str(&format!(
                "fold {} {} {} {} {}\n",
                f.blocks.0,
                f.blocks.1,
                f.edge.name(),
                f.line.kind_name(),
                f.line.offset() as f64 * leg
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Domain, GeometryError> {
        let err = |line: usize, reason: String| GeometryError::Parse { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| err(0, "empty input".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "domain" {
            return Err(err(hl + 1, "expected `domain <NAME> <leg>`".into()));
        }
        let name: DomainName = h[1].parse().map_err(|e| err(hl + 1, e))?;
        let leg: f64 = h[2].parse().map_err(|_| err(hl + 1, "bad leg".into()))?;
        let reference = ReferenceTriangle::new(leg)?;
        let to_units = |v: f64, line: usize| -> Result<i64, GeometryError> {
            let u = v / leg;
            if (u - u.round()).abs() > 1e-9 {
                return Err(err(line, format!("{v} is not a multiple of the leg")));
            }
            Ok(u.round() as i64)
        };
        let mut blocks = Vec::new();
        let mut folds = Vec::new();
        for (ln, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.first() == Some(&"fold") {
                if tok.len() != 6 {
                    return Err(err(ln + 1, "expected 6 fields for fold".into()));
                }
                let a: BlockId = tok[1].parse().map_err(|e| err(ln + 1, e))?;
                let b: BlockId = tok[2].parse().map_err(|e| err(ln + 1, e))?;
                let edge: EdgeLabel = tok[3].parse().map_err(|e| err(ln + 1, e))?;
                let c: f64 = tok[5]
                    .parse()
                    .map_err(|_| err(ln + 1, "bad fold offset".into()))?;
                let c = to_units(c, ln + 1)?;
                let line = match tok[4] {
                    "vertical" => FoldLine::Vertical(c),
                    "horizontal" => FoldLine::Horizontal(c),
                    "diagonal" => FoldLine::Diagonal(c),
                    "antidiagonal" => FoldLine::AntiDiagonal(c),
                    other => return Err(err(ln + 1, format!("unknown fold line `{other}`"))),
                };
                folds.push(Fold {
                    blocks: (a, b),
                    edge,
                    line,
                });
                continue;
            }
            if tok.len() != 8 {
                return Err(err(ln + 1, "expected 8 fields for block".into()));
            }
            let id: BlockId = tok[0].parse().map_err(|e| err(ln + 1, e))?;
            let nums: Result<Vec<f64>, _> = tok[1..].iter().map(|t| t.parse::<f64>()).collect();
            let nums = nums.map_err(|_| err(ln + 1, "bad number".into()))?;
            let placement = Placement {
                m: [
                    [nums[3] as i32, nums[4] as i32],
                    [nums[5] as i32, nums[6] as i32],
                ],
                t: [to_units(nums[1], ln + 1)?, to_units(nums[2], ln + 1)?],
            };
            if !placement.is_orthogonal() || placement.det() != nums[0] as i32 {
                return Err(err(ln + 1, "placement is not an isometry".into()));
            }
            blocks.push(Block {
                id,
                placement,
                parity: Parity::from_det(placement.det()),
            });
        }
        blocks.sort_by_key(|b| b.id);
        Ok(Domain {
            name,
            reference,
            blocks,
            folds,
        })
    }
}

/// Builds `(GWW_A, GWW_B)` with the given leg length.
pub fn build_gww_pair(leg: f64) -> Result<(Domain, Domain), GeometryError> {
    Ok((Domain::gww_a(leg)?, Domain::gww_b(leg)?))
}

/// Each block is half of a unit lattice cell; two blocks overlap iff they
/// sit in the same cell and are not the two halves cut by the same diagonal.
fn overlaps(a: &Block, b: &Block) -> bool {
    let cell = |blk: &Block| {
        let v = blk.lattice_vertices();
        let lo = [
            v.iter().map(|p| p[0]).min().unwrap(),
            v.iter().map(|p| p[1]).min().unwrap(),
        ];
        (lo, v[0])
    };
    let (ca, ra) = cell(a);
    let (cb, rb) = cell(b);
    if ca != cb {
        return false;
    }
    let complementary = ra[0] + rb[0] == 2 * ca[0] + 1 && ra[1] + rb[1] == 2 * ca[1] + 1;
    !complementary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gww_pair_basic_shape() {
        let (a, b) = build_gww_pair(2.0).unwrap();
        for d in [&a, &b] {
            assert_eq!(d.blocks.len(), 7);
            assert_eq!(d.area(), 14.0);
            assert!(d.fold_graph_is_tree());
            assert_eq!(d.boundary_edges().len(), 9);
        }
        assert!((a.perimeter() - b.perimeter()).abs() < 1e-12);
        assert_ne!(a.vertex_distance_multiset(), b.vertex_distance_multiset());
    }

    #[test]
    fn parity_classes_match_labels() {
        let (a, b) = build_gww_pair(2.0).unwrap();
        use BlockId::*;
        for d in [&a, &b] {
            let (even, odd) = d.parity_classes();
            assert_eq!(even, vec![A, C, E]);
            assert_eq!(odd, vec![B, D, F, G]);
        }
    }

    #[test]
    fn folds_are_mirror_placements() {
        let (a, b) = build_gww_pair(1.0).unwrap();
        for d in [&a, &b] {
            for f in &d.folds {
                let p = d.block(f.blocks.0).unwrap().placement;
                let q = d.block(f.blocks.1).unwrap().placement;
                assert_eq!(f.line.as_placement().compose(&p), q);
                assert_eq!(f.line.as_placement().compose(&q), p);
            }
        }
    }

    #[test]
    fn non_positive_leg_rejected() {
        assert_eq!(build_gww_pair(0.0).unwrap_err(), GeometryError::InvalidLeg(0.0));
        assert!(build_gww_pair(-1.0).is_err());
        assert!(build_gww_pair(f64::NAN).is_err());
    }

    #[test]
    fn reflections_match_examples() {
        let leg = 1.0;
        let v = FoldLine::Vertical(2);
        assert_eq!(v.reflect(Point::new(2.0 + 0.25, 0.5), leg), Point::new(2.0 - 0.25, 0.5));
        let d = FoldLine::Diagonal(0);
        assert_eq!(d.reflect(Point::new(0.3, 0.7), leg), Point::new(0.7, 0.3));
        // x = 0 then y = 0 composes to a half turn; the y=x mirror followed by
        // y=0 gives (a, b) -> (b, -a)
        let h = FoldLine::Horizontal(0);
        let p = Point::new(0.25, 0.75);
        assert_eq!(h.reflect(d.reflect(p, leg), leg), Point::new(0.75, -0.25));
    }

    #[test]
    fn locate_centroids() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let c = a.block_centroid(BlockId::A).unwrap();
        let (id, r) = a.locate(c).unwrap();
        assert_eq!(id, BlockId::A);
        assert!(r.distance(a.reference.centroid()) < 1e-14);
        let c = a.block_centroid(BlockId::D).unwrap();
        let (id, r) = a.locate(c).unwrap();
        assert_eq!(id, BlockId::D);
        assert!(r.distance(a.reference.centroid()) < 1e-14);
        assert!(a.locate(Point::new(100.0, -50.0)).is_none());
    }

    #[test]
    fn shared_edge_goes_to_lower_id() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        // midpoint of the A|B hypotenuse
        let (id, _) = a.locate(Point::new(0.5, 0.5)).unwrap();
        assert_eq!(id, BlockId::A);
    }

    #[test]
    fn text_round_trip() {
        let (a, b) = build_gww_pair(2.0).unwrap();
        for d in [a, b] {
            let back = Domain::from_text(&d.to_text()).unwrap();
            assert_eq!(back, d);
        }
        assert!(Domain::from_text("domain GWW_A 2\nA 1 0 0 1 0 0\n").is_err());
    }

    #[test]
    fn reference_triangle_angles() {
        let t = ReferenceTriangle::new(2.0).unwrap();
        let a = t.angles();
        assert!((a[0] - 90.0).abs() < 1e-12);
        assert!((a[1] - 45.0).abs() < 1e-12);
        assert!((a[2] - 45.0).abs() < 1e-12);
        assert_eq!(t.area(), 2.0);
    }
}
