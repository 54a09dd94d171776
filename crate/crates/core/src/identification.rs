//! Identification operators between a coarse level `m` and a fine level `M`.
//!
//! The fine level stands in for `L²(K, μ)` and the form domain:
//!
//! * `J`: iterated harmonic prolongation; its columns are the splines `ψ_{x,m}`,
//! * `J'`: the weighted adjoint `M_m⁻¹ Jᵀ M_M`,
//! * `J¹`: equal to `J`,
//! * `J'¹`: sampling at the coarse vertices `V_m ⊂ V_M`.

use std::sync::{Arc, OnceLock};

use faer::Mat;

use crate::error::{QueError, Result};
use crate::forms::{assemble, embedding, prolongation, FormPencil};
use crate::fractal::{build_level, FractalModel, LevelGraph, ModelKind, Point};
use crate::linalg;
use crate::spectral::EigenCoordinates;

#[derive(Clone, Debug)]
pub struct IdentificationPair {
    pub model: Option<ModelKind>,
    pub coarse_level: usize,
    pub fine_level: usize,
    pub coarse_graph: Option<Arc<LevelGraph>>,
    pub fine_graph: Option<Arc<LevelGraph>>,
    pub coarse: Arc<FormPencil>,
    pub fine: Arc<FormPencil>,
    /// `n_M × n_m`
    pub j: Mat<f64>,
    /// `n_m × n_M`
    pub jp: Mat<f64>,
    /// `n_M × n_m`
    pub j1: Mat<f64>,
    /// `n_m × n_M`
    pub jp1: Mat<f64>,
    eigen_coords: OnceLock<EigenCoordinates>,
}

/// `M_cod⁻¹ Aᵀ M_dom`, the adjoint of `A` between diagonal-weighted spaces.
pub fn weighted_adjoint(a: &Mat<f64>, dom_mass: &[f64], cod_mass: &[f64]) -> Mat<f64> {
    Mat::from_fn(a.ncols(), a.nrows(), |x, y| a[(y, x)] * dom_mass[y] / cod_mass[x])
}

impl IdentificationPair {
    /// Assembles a pair from explicit maps, checking only the shapes.
    pub fn from_maps(
        coarse: Arc<FormPencil>,
        fine: Arc<FormPencil>,
        j: Mat<f64>,
        jp: Mat<f64>,
        j1: Mat<f64>,
        jp1: Mat<f64>,
    ) -> Result<Self> {
        let (n, nf) = (coarse.dim(), fine.dim());
        for (name, m, shape) in [
            ("J", &j, (nf, n)),
            ("J'", &jp, (n, nf)),
            ("J1", &j1, (nf, n)),
            ("J'1", &jp1, (n, nf)),
        ] {
            if (m.nrows(), m.ncols()) != shape {
                return Err(QueError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        Ok(IdentificationPair {
            model: coarse.model,
            coarse_level: coarse.level,
            fine_level: fine.level,
            coarse_graph: None,
            fine_graph: None,
            coarse,
            fine,
            j,
            jp,
            j1,
            jp1,
            eigen_coords: OnceLock::new(),
        })
    }

    /// `J` and `J'` in the eigenbases of the two pencils, computed once.
    pub fn eigen_coordinates(&self) -> Result<&EigenCoordinates> {
        if let Some(c) = self.eigen_coords.get() {
            return Ok(c);
        }
        let coords = EigenCoordinates::new(self)?;
        Ok(self.eigen_coords.get_or_init(|| coords))
    }

    /// The unitary case: one level, all four maps the identity.
    pub fn identity(model: &FractalModel, level: usize) -> Result<Self> {
        let graph = Arc::new(build_level(model, level)?);
        let pencil = Arc::new(assemble(&graph));
        let id = linalg::identity(pencil.dim());
        let mut pair = Self::from_maps(
            pencil.clone(),
            pencil,
            id.clone(),
            id.clone(),
            id.clone(),
            id,
        )?;
        pair.coarse_graph = Some(graph.clone());
        pair.fine_graph = Some(graph);
        Ok(pair)
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse.dim()
    }

    pub fn fine_dim(&self) -> usize {
        self.fine.dim()
    }

    /// `ψ_{x,m}` as a fine vector.
    pub fn column_spline(&self, x: &Point) -> Result<Vec<f64>> {
        let graph = self
            .coarse_graph
            .as_ref()
            .ok_or_else(|| QueError::Domain("pair carries no coarse vertex set".into()))?;
        let i = graph.index_of(x).ok_or_else(|| {
            QueError::Domain(format!("{x} is not a vertex of level {}", self.coarse_level))
        })?;
        Ok(linalg::column(&self.j, i))
    }

    /// `Ĵ = J̃J`, `Ĵ' = J'J̃'`, `Ĵ¹ = J̃¹J¹`, `Ĵ'¹ = J'¹J̃'¹`.
    pub fn compose(&self, next: &IdentificationPair) -> Result<IdentificationPair> {
        if self.fine_dim() != next.coarse_dim() || self.fine_level != next.coarse_level {
            return Err(QueError::DimensionMismatch(format!(
                "cannot compose ({} -> {}) with ({} -> {})",
                self.coarse_level, self.fine_level, next.coarse_level, next.fine_level
            )));
        }
        let mut pair = Self::from_maps(
            self.coarse.clone(),
            next.fine.clone(),
            &next.j * &self.j,
            &self.jp * &next.jp,
            &next.j1 * &self.j1,
            &self.jp1 * &next.jp1,
        )?;
        pair.coarse_graph = self.coarse_graph.clone();
        pair.fine_graph = next.fine_graph.clone();
        Ok(pair)
    }
}

/// Builds `J, J', J¹, J'¹` between levels `m < M` of `model`.
pub fn build_identification(model: &FractalModel, m: usize, fine: usize) -> Result<IdentificationPair> {
    if m >= fine {
        return Err(QueError::Domain(format!(
            "coarse level {m} must be below fine level {fine}"
        )));
    }
    let graphs: Vec<LevelGraph> = (m..=fine)
        .map(|l| build_level(model, l))
        .collect::<Result<_>>()?;
    let mut j = linalg::identity(graphs[0].len());
    for w in graphs.windows(2) {
        j = prolongation(&w[0], &w[1])? * &j;
    }
    let coarse_graph = Arc::new(graphs[0].clone());
    let fine_graph = Arc::new(graphs.last().expect("at least two levels").clone());
    let coarse = Arc::new(assemble(&coarse_graph));
    let finep = Arc::new(assemble(&fine_graph));

    let jp = weighted_adjoint(&j, &finep.mass, &coarse.mass);
    let idx = embedding(&coarse_graph, &fine_graph)?;
    let mut jp1 = Mat::zeros(coarse.dim(), finep.dim());
    for (x, &y) in idx.iter().enumerate() {
        jp1[(x, y)] = 1.0;
    }
    let mut pair = IdentificationPair::from_maps(coarse, finep, j.clone(), jp, j, jp1)?;
    pair.coarse_graph = Some(coarse_graph);
    pair.fine_graph = Some(fine_graph);
    Ok(pair)
}

/// Default fine level: `m + 5` for the interval, `m + 3` for the gasket, capped
/// at the model's maximum level.
pub fn default_fine_level(model: &FractalModel, m: usize) -> usize {
    let offset = match model.kind {
        ModelKind::Interval => 5,
        ModelKind::Gasket => 3,
    };
    (m + offset).min(model.max_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn configs() -> Vec<(FractalModel, usize, usize)> {
        vec![
            (FractalModel::interval(), 0, 1),
            (FractalModel::interval(), 1, 4),
            (FractalModel::interval(), 3, 8),
            (FractalModel::gasket(), 0, 1),
            (FractalModel::gasket(), 1, 3),
            (FractalModel::gasket(), 2, 4),
        ]
    }

    #[test]
    fn interval_zero_to_one() {
        let pair = build_identification(&FractalModel::interval(), 0, 1).unwrap();
        let jf = linalg::mat_vec(&pair.j, &[2.0, 6.0]);
        assert_eq!(jf, vec![2.0, 4.0, 6.0]);
        let jpj = &pair.jp * &pair.j;
        let expected = [[0.75, 0.25], [0.25, 0.75]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((jpj[(i, k)] - expected[i][k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn structural_invariants_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (model, m, fine) in configs() {
            let pair = build_identification(&model, m, fine).unwrap();
            let (n, nf) = (pair.coarse_dim(), pair.fine_dim());

            let sample_j = &pair.jp1 * &pair.j;
            assert!(linalg::max_abs(&(&sample_j - linalg::identity(n))) == 0.0);

            let j1 = linalg::mat_vec(&pair.j, &vec![1.0; n]);
            assert!(j1.iter().all(|v| (v - 1.0).abs() < 1e-12));
            let jp1 = linalg::mat_vec(&pair.jp, &vec![1.0; nf]);
            assert!(jp1.iter().all(|v| (v - 1.0).abs() < 1e-12), "{jp1:?}");

            for _ in 0..50 {
                let f = random_vec(&mut rng, n);
                let u = random_vec(&mut rng, nf);
                let jf = linalg::mat_vec(&pair.j, &f);
                let lhs = pair.fine.inner(&jf, &u);
                let rhs = pair.coarse.inner(&f, &linalg::mat_vec(&pair.jp, &u));
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

                let (ef, ejf) = (pair.coarse.energy(&f), pair.fine.energy(&jf));
                assert!((ef - ejf).abs() <= 1e-12 * ef);

                // δ-closeness holds with equality
                let a = pair.fine.energy_bilinear(&jf, &u);
                let b = pair.coarse.energy_bilinear(&f, &linalg::mat_vec(&pair.jp1, &u));
                assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn splines_are_harmonic_off_the_coarse_grid() {
        for (model, m, fine) in configs() {
            let pair = build_identification(&model, m, fine).unwrap();
            let lj = &pair.fine.stiffness * &pair.j;
            let coarse = pair.coarse_graph.as_ref().unwrap();
            let fine_graph = pair.fine_graph.as_ref().unwrap();
            let idx = embedding(coarse, fine_graph).unwrap();
            for y in 0..pair.fine_dim() {
                if idx.contains(&y) {
                    continue;
                }
                for x in 0..pair.coarse_dim() {
                    assert!(lj[(y, x)].abs() <= 1e-12 * linalg::max_abs(&pair.fine.stiffness));
                }
            }
        }
    }

    #[test]
    fn column_spline_examples() {
        let pair = build_identification(&FractalModel::interval(), 1, 2).unwrap();
        let psi = pair.column_spline(&Point::line(1, 2)).unwrap();
        assert_eq!(psi, vec![0.0, 0.5, 1.0, 0.5, 0.0]);

        let model = FractalModel::gasket();
        let pair = build_identification(&model, 0, 1).unwrap();
        let [p1, p2, p3] = <[Point; 3]>::try_from(model.boundary_points()).unwrap();
        let psi = pair.column_spline(&p1).unwrap();
        let fine = pair.fine_graph.as_ref().unwrap();
        let at = |p: Point| psi[fine.index_of(&p).unwrap()];
        assert_eq!(at(p1), 1.0);
        assert!((at(p1.midpoint(p2)) - 0.4).abs() < 1e-15);
        assert!((at(p2.midpoint(p3)) - 0.2).abs() < 1e-15);
        assert!((at(p1.midpoint(p3)) - 0.4).abs() < 1e-15);
        assert_eq!((at(p2), at(p3)), (0.0, 0.0));

        assert!(matches!(
            pair.column_spline(&p1.midpoint(p2)),
            Err(QueError::Domain(_))
        ));
    }

    #[test]
    fn splines_form_a_partition_of_unity() {
        let pair = build_identification(&FractalModel::gasket(), 1, 4).unwrap();
        for y in 0..pair.fine_dim() {
            let s: f64 = (0..pair.coarse_dim()).map(|x| pair.j[(y, x)]).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn composition_matches_direct_construction() {
        for (model, m, k, fine) in [
            (FractalModel::interval(), 1, 3, 6),
            (FractalModel::gasket(), 0, 2, 4),
        ] {
            let direct = build_identification(&model, m, fine).unwrap();
            let composed = build_identification(&model, m, k)
                .unwrap()
                .compose(&build_identification(&model, k, fine).unwrap())
                .unwrap();
            for (a, b) in [
                (&direct.j, &composed.j),
                (&direct.jp, &composed.jp),
                (&direct.j1, &composed.j1),
                (&direct.jp1, &composed.jp1),
            ] {
                assert!(linalg::max_abs(&(a - b)) <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_inverted_levels() {
        assert!(matches!(
            build_identification(&FractalModel::interval(), 3, 3),
            Err(QueError::Domain(_))
        ));
        let a = build_identification(&FractalModel::interval(), 0, 2).unwrap();
        let b = build_identification(&FractalModel::interval(), 3, 4).unwrap();
        assert!(matches!(a.compose(&b), Err(QueError::DimensionMismatch(_))));
    }
}
