//! Discrete energy forms as stiffness/mass pencils.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use faer::Mat;
use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{QueError, Result};
use crate::fractal::{build_level, to_f64, FractalModel, LevelGraph, ModelKind};
use crate::linalg;
use crate::spectral::{eigensolve, SpectralDecomposition};

pub const PENCIL_SCHEMA: &str = "pencil/1";

/// Energy form `E(f) = fᵀ L f` on `ℓ²(V, μ)` with `M = diag(μ)`.
///
/// The Laplacian is the pencil `(L, M)`, i.e. `Δ = M⁻¹ L`.
#[derive(Clone, Debug)]
pub struct FormPencil {
    pub model: Option<ModelKind>,
    pub level: usize,
    pub stiffness: Mat<f64>,
    pub mass: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    energy_factor: OnceLock<Mat<f64>>,
    decomposition: OnceLock<SpectralDecomposition>,
}

impl FormPencil {
    /// Assembles `L = Σ_e c(e)(δ_x − δ_y)(δ_x − δ_y)ᵀ` in exact arithmetic and
    /// converts to double once.
    pub fn from_weighted_edges(
        model: Option<ModelKind>,
        level: usize,
        mass: &[Rational64],
        edges: impl IntoIterator<Item = (usize, usize, Rational64)>,
    ) -> Self {
        let n = mass.len();
        let mut entries: BTreeMap<(usize, usize), Rational64> = BTreeMap::new();
        for (a, b, c) in edges {
            *entries.entry((a, a)).or_insert_with(Rational64::zero) += c;
            *entries.entry((b, b)).or_insert_with(Rational64::zero) += c;
            *entries.entry((a, b)).or_insert_with(Rational64::zero) -= c;
            *entries.entry((b, a)).or_insert_with(Rational64::zero) -= c;
        }
        debug_assert!((0..n).all(|i| {
            entries
                .range((i, 0)..(i + 1, 0))
                .map(|(_, v)| *v)
                .sum::<Rational64>()
                .is_zero()
        }));
        let mut stiffness = Mat::zeros(n, n);
        let mut triplets = Vec::with_capacity(entries.len());
        for (&(i, j), &v) in &entries {
            if v.is_zero() {
                continue;
            }
            let v = to_f64(v);
            stiffness[(i, j)] = v;
            triplets.push((i, j, v));
        }
        FormPencil {
            model,
            level,
            stiffness,
            mass: mass.iter().map(|&r| to_f64(r)).collect(),
            triplets,
            energy_factor: OnceLock::new(),
            decomposition: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn mass_matrix(&self) -> Mat<f64> {
        linalg::diag(&self.mass)
    }

    /// Gram matrix `M + L` of the energy norm `‖f‖²_E = ‖f‖² + E(f)`.
    pub fn energy_gram(&self) -> Mat<f64> {
        let mut g = self.stiffness.clone();
        for (i, m) in self.mass.iter().enumerate() {
            g[(i, i)] += m;
        }
        g
    }

    /// Lower Cholesky factor of `M + L`, computed once.
    pub fn energy_cholesky(&self) -> Result<&Mat<f64>> {
        if let Some(l) = self.energy_factor.get() {
            return Ok(l);
        }
        let l = linalg::cholesky(&self.energy_gram())?;
        Ok(self.energy_factor.get_or_init(|| l))
    }

    /// Full generalized eigendecomposition, computed once.
    pub fn decomposition(&self) -> Result<&SpectralDecomposition> {
        if let Some(d) = self.decomposition.get() {
            return Ok(d);
        }
        let d = eigensolve(self, None)?;
        Ok(self.decomposition.get_or_init(|| d))
    }

    pub fn energy(&self, f: &[f64]) -> f64 {
        linalg::bilinear(&self.stiffness, f, f)
    }

    /// `Σ_e c(e)(f(x) − f(y))²` summed over the edges. Free of the
    /// cancellation in `fᵀLf` when `f` is close to a constant.
    pub fn difference_energy(&self, f: &[f64]) -> f64 {
        self.triplets
            .iter()
            .filter(|&&(i, j, _)| i < j)
            .map(|&(i, j, v)| -v * (f[i] - f[j]).powi(2))
            .sum()
    }

    pub fn energy_bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        linalg::bilinear(&self.stiffness, f, g)
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        linalg::weighted_dot(&self.mass, f, g)
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    pub fn energy_norm(&self, f: &[f64]) -> f64 {
        (self.inner(f, f) + self.energy(f)).sqrt()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn to_document(&self) -> PencilDoc {
        PencilDoc {
            schema: PENCIL_SCHEMA.to_string(),
            model: self.model,
            level: self.level,
            stiffness: self.triplets.clone(),
            mass: self.mass.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("pencil serializes")
    }
}

/// Wire form of a pencil: stiffness as coordinate triplets, mass as the diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilDoc {
    pub schema: String,
    pub model: Option<ModelKind>,
    pub level: usize,
    #[serde(rename = "L")]
    pub stiffness: Vec<(usize, usize, f64)>,
    #[serde(rename = "M")]
    pub mass: Vec<f64>,
}

pub fn assemble(graph: &LevelGraph) -> FormPencil {
    FormPencil::from_weighted_edges(
        Some(graph.model.kind),
        graph.level,
        &graph.measure,
        graph.edges.iter().map(|e| (e.a, e.b, e.conductance)),
    )
}

/// `E_m(f)` summed edge by edge, without the stiffness matrix.
pub fn edge_energy(graph: &LevelGraph, f: &[f64]) -> f64 {
    graph
        .edges
        .iter()
        .map(|e| to_f64(e.conductance) * (f[e.b] - f[e.a]).powi(2))
        .sum()
}

/// Indices of the coarse vertices inside the fine vertex list.
pub fn embedding(coarse: &LevelGraph, fine: &LevelGraph) -> Result<Vec<usize>> {
    coarse
        .vertices
        .iter()
        .map(|p| {
            fine.index_of(p).ok_or_else(|| {
                QueError::Validation(format!(
                    "vertex {p} of level {} is missing at level {}",
                    coarse.level, fine.level
                ))
            })
        })
        .collect()
}

/// One-level harmonic prolongation `P` (`n_{m+1} × n_m`) from the closed-form
/// rule: interval midpoints average their two neighbours; a new gasket vertex
/// takes 2/5 of each adjacent cell corner and 1/5 of the opposite one.
pub fn prolongation(coarse: &LevelGraph, fine: &LevelGraph) -> Result<Mat<f64>> {
    if fine.level != coarse.level + 1 || fine.model.kind != coarse.model.kind {
        return Err(QueError::DimensionMismatch(format!(
            "prolongation needs consecutive levels of one model, got {} and {}",
            coarse.level, fine.level
        )));
    }
    let mut p = Mat::zeros(fine.len(), coarse.len());
    for (i, &fi) in embedding(coarse, fine)?.iter().enumerate() {
        p[(fi, i)] = 1.0;
    }
    for (_, corners) in &coarse.cells {
        for a in 0..corners.len() {
            for b in a + 1..corners.len() {
                let (ca, cb) = (corners[a], corners[b]);
                let mid = coarse.vertices[ca].midpoint(coarse.vertices[cb]);
                let row = fine.index_of(&mid).ok_or_else(|| {
                    QueError::Validation(format!("midpoint {mid} missing at level {}", fine.level))
                })?;
                match coarse.model.kind {
                    ModelKind::Interval => {
                        p[(row, ca)] = 0.5;
                        p[(row, cb)] = 0.5;
                    }
                    ModelKind::Gasket => {
                        let opposite = corners
                            .iter()
                            .copied()
                            .find(|&c| c != ca && c != cb)
                            .expect("gasket cells have three corners");
                        p[(row, ca)] = 0.4;
                        p[(row, cb)] = 0.4;
                        p[(row, opposite)] = 0.2;
                    }
                }
            }
        }
    }
    Ok(p)
}

/// Extends `f` on `V_m` to the energy minimizer on `V_{m+1}`.
pub fn harmonic_extension(model: &FractalModel, level: usize, f: &[f64]) -> Result<Vec<f64>> {
    let coarse = build_level(model, level)?;
    let fine = build_level(model, level + 1)?;
    if f.len() != coarse.len() {
        return Err(QueError::DimensionMismatch(format!(
            "expected {} values on V_{level}, got {}",
            coarse.len(),
            f.len()
        )));
    }
    Ok(linalg::mat_vec(&prolongation(&coarse, &fine)?, f))
}

/// Minimizer of `E(g)` subject to `g = f` on `fixed`, by a grounded solve.
pub fn minimize_with_boundary(pencil: &FormPencil, fixed: &[usize], f: &[f64]) -> Result<Vec<f64>> {
    let n = pencil.dim();
    let mut is_fixed = vec![false; n];
    for &i in fixed {
        is_fixed[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
    let mut g = vec![0.0; n];
    for (k, &i) in fixed.iter().enumerate() {
        g[i] = f[k];
    }
    if free.is_empty() {
        return Ok(g);
    }
    let l_ff = linalg::select(&pencil.stiffness, &free, &free);
    let l_fb = linalg::select(&pencil.stiffness, &free, fixed);
    let rhs = linalg::mat_vec(&l_fb, f);
    let rhs = Mat::from_fn(free.len(), 1, |i, _| -rhs[i]);
    let sol = linalg::solve_spd(&l_ff, &rhs)?;
    for (k, &i) in free.iter().enumerate() {
        g[i] = sol[(k, 0)];
    }
    Ok(g)
}

/// Schur complement of `l` onto the index set `keep`.
pub fn schur_complement(l: &Mat<f64>, keep: &[usize]) -> Result<Mat<f64>> {
    let n = l.nrows();
    let mut kept = vec![false; n];
    for &i in keep {
        kept[i] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !kept[i]).collect();
    let l_kk = linalg::select(l, keep, keep);
    if elim.is_empty() {
        return Ok(l_kk);
    }
    let l_ee = linalg::select(l, &elim, &elim);
    let l_ek = linalg::select(l, &elim, keep);
    let x = linalg::solve_spd(&l_ee, &l_ek)
        .map_err(|e| QueError::Numerical(format!("singular interior block: {e}")))?;
    Ok(&l_kk - linalg::transpose(&l_ek) * &x)
}

/// Relative Frobenius distance between the Schur complement of `L_{m+1}`
/// onto `V_m` and `L_m`.
pub fn schur_compatibility_residual(model: &FractalModel, level: usize) -> Result<f64> {
    let coarse = build_level(model, level)?;
    let fine = build_level(model, level + 1)?;
    let keep = embedding(&coarse, &fine)?;
    let s = schur_complement(&assemble(&fine).stiffness, &keep)?;
    let l = assemble(&coarse).stiffness;
    Ok(linalg::frobenius(&(&s - &l)) / linalg::frobenius(&l))
}

/// Effective resistance `R(x, y) = (min{E(u) : u(x) = 1, u(y) = 0})⁻¹`.
pub fn resistance(pencil: &FormPencil, x: usize, y: usize) -> Result<f64> {
    if x == y {
        return Err(QueError::Domain(format!(
            "resistance needs two distinct vertices, got {x} twice"
        )));
    }
    // R(x, y) = R(y, x) bit for bit: always solve with the smaller index grounded at 1
    let (a, b) = (x.min(y), x.max(y));
    let u = minimize_with_boundary(pencil, &[a, b], &[1.0, 0.0])?;
    Ok(1.0 / pencil.energy(&u))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoelderCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Checks `|u(x) − u(y)|² ≤ E(u) R(x, y)`.
pub fn hoelder_check(pencil: &FormPencil, u: &[f64], x: usize, y: usize) -> Result<HoelderCheck> {
    let lhs = (u[x] - u[y]).powi(2);
    let rhs = pencil.energy(u) * resistance(pencil, x, y)?;
    Ok(HoelderCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + 1e-10) + f64::MIN_POSITIVE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pencil(model: &FractalModel, level: usize) -> (LevelGraph, FormPencil) {
        let g = build_level(model, level).unwrap();
        let p = assemble(&g);
        (g, p)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn interval_level_one_assembly() {
        let (_, p) = pencil(&FractalModel::interval(), 1);
        let expected = [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p.stiffness[(i, j)], expected[i][j]);
            }
        }
        assert_eq!(p.mass, vec![0.25, 0.5, 0.25]);
        assert_eq!(p.energy(&[0.0, 1.0, 0.0]), 4.0);
    }

    #[test]
    fn gasket_level_zero_indicator_energy() {
        let (_, p) = pencil(&FractalModel::gasket(), 0);
        assert_eq!(p.energy(&[1.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn row_sums_vanish_and_mass_positive() {
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            for level in 0..=5 {
                let (_, p) = pencil(&model, level);
                let ones = vec![1.0; p.dim()];
                let l1 = linalg::mat_vec(&p.stiffness, &ones);
                assert!(l1.iter().all(|v| v.abs() <= 1e-13));
                assert!(p.mass.iter().all(|&m| m > 0.0));
                assert!(linalg::max_abs(&(&p.stiffness - linalg::transpose(&p.stiffness))) == 0.0);
            }
        }
    }

    #[test]
    fn stiffness_energy_matches_edge_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            let (g, p) = pencil(&model, 4);
            for _ in 0..20 {
                let f = random_vec(&mut rng, p.dim());
                let a = p.energy(&f);
                let b = edge_energy(&g, &f);
                assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }

    #[test]
    fn kernel_is_constants() {
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            let (_, p) = pencil(&model, 3);
            let vals = linalg::sym_eigenvalues(&p.stiffness).unwrap();
            assert!(vals[0].abs() < 1e-10);
            assert!(vals[1] > 1e-6);
        }
    }

    #[test]
    fn interval_extension_is_linear_interpolation() {
        let ext = harmonic_extension(&FractalModel::interval(), 0, &[0.0, 1.0]).unwrap();
        assert_eq!(ext, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn gasket_one_fifth_two_fifths_rule() {
        let model = FractalModel::gasket();
        let fine = build_level(&model, 1).unwrap();
        let ext = harmonic_extension(&model, 0, &[1.0, 0.0, 0.0]).unwrap();
        let [p1, p2, p3] = <[Point; 3]>::try_from(model.boundary_points()).unwrap();
        let at = |p: Point| ext[fine.index_of(&p).unwrap()];
        assert_eq!(at(p1), 1.0);
        assert_eq!(at(p2), 0.0);
        assert_eq!(at(p3), 0.0);
        assert!((at(p1.midpoint(p2)) - 0.4).abs() < 1e-15);
        assert!((at(p2.midpoint(p3)) - 0.2).abs() < 1e-15);
        assert!((at(p1.midpoint(p3)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constants_extend_to_constants() {
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            let n = model.vertex_count(2);
            let ext = harmonic_extension(&model, 2, &vec![3.5; n]).unwrap();
            assert!(ext.iter().all(|&v| (v - 3.5).abs() < 1e-14));
        }
    }

    #[test]
    fn closed_form_rule_agrees_with_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            for level in 0..4 {
                let coarse = build_level(&model, level).unwrap();
                let fine = build_level(&model, level + 1).unwrap();
                let fp = assemble(&fine);
                let idx = embedding(&coarse, &fine).unwrap();
                let p = prolongation(&coarse, &fine).unwrap();
                for _ in 0..5 {
                    let f = random_vec(&mut rng, coarse.len());
                    let a = linalg::mat_vec(&p, &f);
                    let b = minimize_with_boundary(&fp, &idx, &f).unwrap();
                    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    assert!(diff <= 1e-12, "{model:?} level {level}: {diff}");
                }
            }
        }
    }

    #[test]
    fn extension_preserves_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [FractalModel::interval(), FractalModel::gasket()] {
            for level in 0..4 {
                let (_, coarse) = pencil(&model, level);
                let (_, fine) = pencil(&model, level + 1);
                for _ in 0..20 {
                    let f = random_vec(&mut rng, coarse.dim());
                    let g = harmonic_extension(&model, level, &f).unwrap();
                    let (a, b) = (coarse.energy(&f), fine.energy(&g));
                    assert!((a - b).abs() <= 1e-12 * a);
                }
            }
        }
    }

    #[test]
    fn schur_compatibility() {
        for level in 0..=7 {
            let r = schur_compatibility_residual(&FractalModel::interval(), level).unwrap();
            assert!(r <= 1e-12, "interval level {level}: {r}");
        }
        for level in 0..=4 {
            let r = schur_compatibility_residual(&FractalModel::gasket(), level).unwrap();
            assert!(r <= 1e-12, "gasket level {level}: {r}");
        }
    }

    #[test]
    fn interval_resistance_is_distance() {
        for level in 0..5 {
            let (g, p) = pencil(&FractalModel::interval(), level);
            let last = g.len() - 1;
            assert!((resistance(&p, 0, last).unwrap() - 1.0).abs() < 1e-12);
            if level >= 1 {
                let half = g.index_of(&Point::line(1, 2)).unwrap();
                assert!((resistance(&p, 0, half).unwrap() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gasket_boundary_resistance() {
        let (_, p) = pencil(&FractalModel::gasket(), 0);
        assert!((resistance(&p, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        // compatibility makes the boundary resistance level independent
        let (g, p) = pencil(&FractalModel::gasket(), 3);
        let [a, b, _] = <[Point; 3]>::try_from(g.model.boundary_points()).unwrap();
        let r = resistance(&p, g.index_of(&a).unwrap(), g.index_of(&b).unwrap()).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn resistance_rejects_equal_vertices() {
        let (_, p) = pencil(&FractalModel::interval(), 2);
        assert!(matches!(resistance(&p, 1, 1), Err(QueError::Domain(_))));
    }

    #[test]
    fn resistance_is_a_metric() {
        let (_, p) = pencil(&FractalModel::gasket(), 2);
        let n = p.dim();
        let r = |x: usize, y: usize| if x == y { 0.0 } else { resistance(&p, x, y).unwrap() };
        for x in (0..n).step_by(2) {
            for y in (0..n).step_by(3) {
                assert_eq!(r(x, y), r(y, x));
                for z in (0..n).step_by(4) {
                    assert!(r(x, y) <= r(x, z) + r(z, y) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn hoelder_constant_and_linear() {
        let (_, p) = pencil(&FractalModel::gasket(), 2);
        let c = hoelder_check(&p, &vec![2.0; p.dim()], 0, 3).unwrap();
        assert_eq!((c.lhs, c.rhs, c.ok), (0.0, 0.0, true));

        let (g, p) = pencil(&FractalModel::interval(), 2);
        let u: Vec<f64> = g.vertices.iter().map(|v| v.embed()[0]).collect();
        let c = hoelder_check(&p, &u, 0, g.len() - 1).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-14);
        assert!((c.rhs - 1.0).abs() < 1e-12);
        assert!(c.ok);
    }

    #[test]
    fn hoelder_random_gasket() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, p) = pencil(&FractalModel::gasket(), 3);
        let n = p.dim();
        let pairs: Vec<(usize, usize)> = (0..8)
            .map(|_| {
                let x = rng.random_range(0..n);
                let y = (x + 1 + rng.random_range(0..n - 1)) % n;
                (x, y)
            })
            .collect();
        let resist: Vec<f64> = pairs.iter().map(|&(x, y)| resistance(&p, x, y).unwrap()).collect();
        for _ in 0..100 {
            let u = random_vec(&mut rng, n);
            let e = p.energy(&u);
            for (&(x, y), &r) in pairs.iter().zip(&resist) {
                assert!((u[x] - u[y]).powi(2) <= e * r * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn pencil_document() {
        let (_, p) = pencil(&FractalModel::interval(), 1);
        let doc = p.to_document();
        assert_eq!(doc.schema, "pencil/1");
        assert_eq!(doc.stiffness.len(), 7);
        let text = p.to_json();
        let back: PencilDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }
}
