//! Self-similar models and their level-`m` graph approximations.
//!
//! Vertices carry exact rational coordinates so that corners shared between
//! neighbouring cells are identified without any tolerance. Interval points are
//! dyadic numbers `k / 2^m`; gasket points are stored by their barycentric
//! weights `(s, t)` on `p₂` and `p₃` (the weight on `p₁` is `1 - s - t`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{QueError, Result};

pub const LEVELGRAPH_SCHEMA: &str = "levelgraph/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Interval,
    Gasket,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Interval => "interval",
            ModelKind::Gasket => "gasket",
        }
    }

    pub fn model(self) -> FractalModel {
        match self {
            ModelKind::Interval => FractalModel::interval(),
            ModelKind::Gasket => FractalModel::gasket(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = QueError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interval" => Ok(ModelKind::Interval),
            "gasket" | "sierpinski" => Ok(ModelKind::Gasket),
            other => Err(QueError::Validation(format!("unknown model '{other}'"))),
        }
    }
}

/// Static description of a self-similar model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractalModel {
    pub kind: ModelKind,
    pub num_contractions: usize,
    pub boundary_size: usize,
    pub conductance_base: Rational64,
    pub measure_cell_factor: Rational64,
    pub boundary_weight_factor: Rational64,
    pub interior_weight_factor: Rational64,
    pub max_level: usize,
}

impl FractalModel {
    pub fn interval() -> Self {
        FractalModel {
            kind: ModelKind::Interval,
            num_contractions: 2,
            boundary_size: 2,
            conductance_base: Rational64::from_integer(2),
            measure_cell_factor: Rational64::new(1, 2),
            boundary_weight_factor: Rational64::new(1, 2),
            interior_weight_factor: Rational64::one(),
            max_level: 8,
        }
    }

    pub fn gasket() -> Self {
        FractalModel {
            kind: ModelKind::Gasket,
            num_contractions: 3,
            boundary_size: 3,
            conductance_base: Rational64::new(5, 3),
            measure_cell_factor: Rational64::new(1, 3),
            boundary_weight_factor: Rational64::new(1, 3),
            interior_weight_factor: Rational64::new(2, 3),
            max_level: 7,
        }
    }

    pub fn with_max_level(mut self, max_level: usize) -> Self {
        self.max_level = max_level;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Edge conductance `c_m = base^m`.
    pub fn conductance(&self, level: usize) -> Rational64 {
        pow(self.conductance_base, level)
    }

    /// Measure weight `μ_m(x)` of a vertex at `level`.
    pub fn vertex_weight(&self, level: usize, on_boundary: bool) -> Rational64 {
        let factor = if on_boundary {
            self.boundary_weight_factor
        } else {
            self.interior_weight_factor
        };
        pow(self.measure_cell_factor, level) * factor
    }

    /// The boundary set `V₀`, in canonical order.
    pub fn boundary_points(&self) -> Vec<Point> {
        match self.kind {
            ModelKind::Interval => vec![Point::line(0, 1), Point::line(1, 1)],
            ModelKind::Gasket => vec![
                Point::Triangle(Rational64::zero(), Rational64::zero()),
                Point::Triangle(Rational64::one(), Rational64::zero()),
                Point::Triangle(Rational64::zero(), Rational64::one()),
            ],
        }
    }

    /// Applies the contraction `F_j` (1-based).
    pub fn contract(&self, letter: u8, p: Point) -> Point {
        let half = Rational64::new(1, 2);
        match (self.kind, p) {
            (ModelKind::Interval, Point::Line(t)) => match letter {
                1 => Point::Line(t * half),
                _ => Point::Line((t + Rational64::one()) * half),
            },
            (ModelKind::Gasket, Point::Triangle(s, t)) => match letter {
                1 => Point::Triangle(s * half, t * half),
                2 => Point::Triangle(s * half + half, t * half),
                _ => Point::Triangle(s * half, t * half + half),
            },
            _ => unreachable!("point kind does not match the model"),
        }
    }

    /// Closed-form `|V_m|`.
    pub fn vertex_count(&self, level: usize) -> usize {
        match self.kind {
            ModelKind::Interval => (1usize << level) + 1,
            ModelKind::Gasket => (3usize.pow(level as u32 + 1) + 3) / 2,
        }
    }

    /// Closed-form `|E_m|`.
    pub fn edge_count(&self, level: usize) -> usize {
        match self.kind {
            ModelKind::Interval => 1usize << level,
            ModelKind::Gasket => 3usize.pow(level as u32 + 1),
        }
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.max_level {
            return Err(QueError::ResourceLimit {
                model: self.name(),
                level,
                max: self.max_level,
            });
        }
        Ok(())
    }
}

fn pow(base: Rational64, exp: usize) -> Rational64 {
    (0..exp).fold(Rational64::one(), |acc, _| acc * base)
}

pub fn vertex_count(model: &FractalModel, level: usize) -> usize {
    model.vertex_count(level)
}

/// An exact vertex coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    /// A point `t` of the unit interval.
    Line(Rational64),
    /// Barycentric weights `(s, t)` of `p₂` and `p₃`.
    Triangle(Rational64, Rational64),
}

impl Point {
    pub fn line(num: i64, den: i64) -> Self {
        Point::Line(Rational64::new(num, den))
    }

    pub fn triangle(s: (i64, i64), t: (i64, i64)) -> Self {
        Point::Triangle(Rational64::new(s.0, s.1), Rational64::new(t.0, t.1))
    }

    pub fn midpoint(self, other: Point) -> Point {
        let half = Rational64::new(1, 2);
        match (self, other) {
            (Point::Line(a), Point::Line(b)) => Point::Line((a + b) * half),
            (Point::Triangle(a, b), Point::Triangle(c, d)) => {
                Point::Triangle((a + c) * half, (b + d) * half)
            }
            _ => panic!("midpoint of points from different models"),
        }
    }

    /// Plot coordinates, with the gasket on `p₁=(0,0)`, `p₂=(1,0)`, `p₃=(1/2, √3/2)`.
    pub fn embed(self) -> [f64; 2] {
        match self {
            Point::Line(t) => [to_f64(t), 0.0],
            Point::Triangle(s, t) => {
                let (s, t) = (to_f64(s), to_f64(t));
                [s + 0.5 * t, t * 3f64.sqrt() / 2.0]
            }
        }
    }

    fn coords(self) -> Vec<Rational64> {
        match self {
            Point::Line(t) => vec![t],
            Point::Triangle(s, t) => vec![s, t],
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Line(t) => write!(f, "{t}"),
            Point::Triangle(s, t) => write!(f, "({s}, {t})"),
        }
    }
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A word `w₁…w_m` over the contraction alphabet; the empty word is `K` itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    letters: Vec<u8>,
}

impl Word {
    pub fn new(model: &FractalModel, letters: &[u8]) -> Result<Self> {
        if let Some(&bad) = letters
            .iter()
            .find(|&&l| l == 0 || l as usize > model.num_contractions)
        {
            return Err(QueError::Validation(format!(
                "letter {bad} is outside the alphabet 1..={} of the {} model",
                model.num_contractions,
                model.name()
            )));
        }
        Ok(Word {
            letters: letters.to_vec(),
        })
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// All words of length `m` in lexicographic order.
    pub fn all(model: &FractalModel, m: usize) -> Vec<Word> {
        let k = model.num_contractions as u8;
        let mut out = vec![Word::empty()];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (1..=k).map(move |l| {
                        let mut letters = w.letters.clone();
                        letters.push(l);
                        Word { letters }
                    })
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("ε");
        }
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Geometric descriptor of the cell `F_w(K)`: its images of the boundary points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub corners: Vec<Point>,
}

/// Computes `F_w(K) = (F_{w₁} ∘ … ∘ F_{w_m})(K)` through its corners.
pub fn cell_of(model: &FractalModel, word: &Word) -> Result<Cell> {
    let word = Word::new(model, word.letters())?;
    let corners = model
        .boundary_points()
        .into_iter()
        .map(|p| {
            word.letters
                .iter()
                .rev()
                .fold(p, |acc, &l| model.contract(l, acc))
        })
        .collect();
    Ok(Cell { corners })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub conductance: Rational64,
}

/// Vertices, edges, conductances and measure weights of one approximation level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelGraph {
    pub model: FractalModel,
    pub level: usize,
    pub vertices: Vec<Point>,
    pub boundary: Vec<bool>,
    pub edges: Vec<Edge>,
    pub measure: Vec<Rational64>,
    /// Each `m`-cell with the indices of its corners, in lexicographic word order.
    pub cells: Vec<(Word, Vec<usize>)>,
}

impl LevelGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.vertices.binary_search(p).ok()
    }

    pub fn total_measure(&self) -> Rational64 {
        self.measure.iter().copied().sum()
    }

    pub fn measure_f64(&self) -> Vec<f64> {
        self.measure.iter().map(|&r| to_f64(r)).collect()
    }

    /// Number of `m`-cells containing vertex `i`.
    pub fn cell_multiplicity(&self, i: usize) -> usize {
        self.cells.iter().filter(|(_, c)| c.contains(&i)).count()
    }

    pub fn to_document(&self) -> LevelGraphDoc {
        LevelGraphDoc {
            schema: LEVELGRAPH_SCHEMA.to_string(),
            model: self.model.kind,
            level: self.level,
            vertices: self
                .vertices
                .iter()
                .map(|p| {
                    p.coords()
                        .into_iter()
                        .flat_map(|r| [*r.numer(), *r.denom()])
                        .collect()
                })
                .collect(),
            boundary: (0..self.len()).filter(|&i| self.boundary[i]).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    [
                        e.a as i64,
                        e.b as i64,
                        *e.conductance.numer(),
                        *e.conductance.denom(),
                    ]
                })
                .collect(),
            measure: self.measure.iter().map(|r| [*r.numer(), *r.denom()]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("level graph serializes")
    }

    /// Parses a `levelgraph/1` document. The document is accepted only if it
    /// matches the canonical construction for its model and level exactly.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LevelGraphDoc =
            serde_json::from_str(text).map_err(|e| QueError::Format(e.to_string()))?;
        if doc.schema != LEVELGRAPH_SCHEMA {
            return Err(QueError::Format(format!(
                "expected schema {LEVELGRAPH_SCHEMA}, found {}",
                doc.schema
            )));
        }
        let graph = build_level(&doc.model.model(), doc.level)?;
        if graph.to_document() != doc {
            return Err(QueError::Format(format!(
                "document for {} level {} does not match the canonical construction",
                doc.model, doc.level
            )));
        }
        Ok(graph)
    }
}

/// Wire form of a [`LevelGraph`]. Each vertex is a flat list of `num, den`
/// pairs, one pair per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGraphDoc {
    pub schema: String,
    pub model: ModelKind,
    pub level: usize,
    pub vertices: Vec<Vec<i64>>,
    pub boundary: Vec<usize>,
    pub edges: Vec<[i64; 4]>,
    pub measure: Vec<[i64; 2]>,
}

/// Builds `G_m = (V_m, E_m)` with conductances and measure weights.
pub fn build_level(model: &FractalModel, level: usize) -> Result<LevelGraph> {
    model.check_level(level)?;

    let words = Word::all(model, level);
    let cell_corners: Vec<(Word, Vec<Point>)> = words
        .into_iter()
        .map(|w| {
            let cell = cell_of(model, &w).expect("generated words are valid");
            (w, cell.corners)
        })
        .collect();

    let vertex_set: BTreeSet<Point> = cell_corners
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .collect();
    let vertices: Vec<Point> = vertex_set.into_iter().collect();
    let index: BTreeMap<Point, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i))
        .collect();

    let boundary_points = model.boundary_points();
    let boundary: Vec<bool> = vertices
        .iter()
        .map(|p| boundary_points.contains(p))
        .collect();

    let conductance = model.conductance(level);
    let mut edge_set = BTreeSet::new();
    let mut cells = Vec::with_capacity(cell_corners.len());
    for (word, corners) in cell_corners {
        let idx: Vec<usize> = corners.iter().map(|p| index[p]).collect();
        for i in 0..idx.len() {
            for j in i + 1..idx.len() {
                let (a, b) = (idx[i].min(idx[j]), idx[i].max(idx[j]));
                edge_set.insert((a, b));
            }
        }
        cells.push((word, idx));
    }
    let edges = edge_set
        .into_iter()
        .map(|(a, b)| Edge { a, b, conductance })
        .collect();

    let measure = boundary
        .iter()
        .map(|&on_boundary| model.vertex_weight(level, on_boundary))
        .collect();

    Ok(LevelGraph {
        model: model.clone(),
        level,
        vertices,
        boundary,
        edges,
        measure,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn interval_level_zero_and_one() {
        let m = FractalModel::interval();
        let g0 = build_level(&m, 0).unwrap();
        assert_eq!(g0.vertices, vec![Point::line(0, 1), Point::line(1, 1)]);
        assert_eq!(g0.edges.len(), 1);
        assert_eq!(g0.edges[0].conductance, r(1, 1));
        assert_eq!(g0.measure, vec![r(1, 2), r(1, 2)]);

        let g1 = build_level(&m, 1).unwrap();
        assert_eq!(
            g1.vertices,
            vec![Point::line(0, 1), Point::line(1, 2), Point::line(1, 1)]
        );
        let pairs: Vec<_> = g1.edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        assert!(g1.edges.iter().all(|e| e.conductance == r(2, 1)));
        assert_eq!(g1.measure, vec![r(1, 4), r(1, 2), r(1, 4)]);
    }

    #[test]
    fn gasket_level_one() {
        let m = FractalModel::gasket();
        let g = build_level(&m, 1).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.edges.len(), 9);
        assert!(g.edges.iter().all(|e| e.conductance == r(5, 3)));
        for (i, &on_boundary) in g.boundary.iter().enumerate() {
            let expected = if on_boundary { r(1, 9) } else { r(2, 9) };
            assert_eq!(g.measure[i], expected);
        }
        assert_eq!(g.boundary.iter().filter(|&&b| b).count(), 3);
        assert_eq!(g.total_measure(), r(1, 1));
    }

    #[test]
    fn vertex_counts() {
        assert_eq!(vertex_count(&FractalModel::interval(), 3), 9);
        assert_eq!(vertex_count(&FractalModel::gasket(), 0), 3);
        assert_eq!(vertex_count(&FractalModel::gasket(), 2), 15);
        // brute-force dedup of the union of F_w(V₀) over W₂
        let m = FractalModel::gasket();
        let set: BTreeSet<Point> = Word::all(&m, 2)
            .iter()
            .flat_map(|w| cell_of(&m, w).unwrap().corners)
            .collect();
        assert_eq!(set.len(), 15);
    }

    #[test]
    fn counts_match_closed_forms_up_to_max_level() {
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            for level in 0..=model.max_level {
                let g = build_level(&model, level).unwrap();
                assert_eq!(g.len(), model.vertex_count(level));
                assert_eq!(g.edges.len(), model.edge_count(level));
                assert_eq!(g.total_measure(), Rational64::one());
                assert!(g
                    .edges
                    .iter()
                    .all(|e| e.conductance == model.conductance(level)));
            }
        }
    }

    #[test]
    fn interval_cells() {
        let m = FractalModel::interval();
        let w = Word::new(&m, &[1, 2]).unwrap();
        assert_eq!(
            cell_of(&m, &w).unwrap().corners,
            vec![Point::line(1, 4), Point::line(1, 2)]
        );
        assert_eq!(
            cell_of(&m, &Word::empty()).unwrap().corners,
            vec![Point::line(0, 1), Point::line(1, 1)]
        );
    }

    #[test]
    fn gasket_first_cell() {
        let m = FractalModel::gasket();
        let w = Word::new(&m, &[1]).unwrap();
        let [p1, p2, p3] = <[Point; 3]>::try_from(m.boundary_points()).unwrap();
        assert_eq!(
            cell_of(&m, &w).unwrap().corners,
            vec![p1, p1.midpoint(p2), p1.midpoint(p3)]
        );
    }

    #[test]
    fn letter_out_of_alphabet() {
        let m = FractalModel::interval();
        assert!(matches!(Word::new(&m, &[1, 3]), Err(QueError::Validation(_))));
        assert!(matches!(
            Word::new(&FractalModel::gasket(), &[0]),
            Err(QueError::Validation(_))
        ));
    }

    #[test]
    fn level_above_maximum_is_rejected() {
        let err = build_level(&FractalModel::interval(), 9).unwrap_err();
        assert!(err.to_string().contains("maximum level 8"));
        let err = build_level(&FractalModel::gasket(), 8).unwrap_err();
        assert!(matches!(err, QueError::ResourceLimit { max: 7, .. }));
        assert!(build_level(&FractalModel::gasket().with_max_level(8), 3).is_ok());
    }

    #[test]
    fn refinement_is_nested() {
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            for level in 0..5 {
                let coarse = build_level(&model, level).unwrap();
                let fine = build_level(&model, level + 1).unwrap();
                assert!(coarse.vertices.iter().all(|p| fine.index_of(p).is_some()));
            }
        }
    }

    #[test]
    fn gasket_cell_multiplicity() {
        let m = FractalModel::gasket();
        for level in 1..5 {
            let g = build_level(&m, level).unwrap();
            for i in 0..g.len() {
                let expected = if g.boundary[i] { 1 } else { 2 };
                assert_eq!(g.cell_multiplicity(i), expected);
            }
        }
    }

    #[test]
    fn interval_edges_join_dyadic_neighbours() {
        let g = build_level(&FractalModel::interval(), 4).unwrap();
        let h = r(1, 16);
        for e in &g.edges {
            match (g.vertices[e.a], g.vertices[e.b]) {
                (Point::Line(a), Point::Line(b)) => assert_eq!(b - a, h),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn json_document_roundtrip_and_rejection() {
        let g = build_level(&FractalModel::gasket(), 2).unwrap();
        let text = g.to_json();
        assert!(text.starts_with("{\"schema\":\"levelgraph/1\""));
        assert_eq!(LevelGraph::from_json(&text).unwrap(), g);
        let tampered = text.replacen("[1,27]", "[1,26]", 1);
        assert!(LevelGraph::from_json(&tampered).is_err());
        assert!(LevelGraph::from_json("{}").is_err());
    }
}
