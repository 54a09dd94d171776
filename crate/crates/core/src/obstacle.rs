//! A discrete circle with an obstacle removed.
//!
//! The circle `X` has `N` vertices at spacing `h = 1/N`, conductance `1/h` per
//! edge and mass `h` per vertex. An obstacle `B` is the set of vertices within
//! distance `ε` of a center; the Neumann Laplacian of `X ∖ B` is the graph
//! Laplacian of the induced subgraph. The two are compared with restriction
//! `J`, extension by zero `J'` and the harmonic gap fill `E`.

use faer::Mat;
use num_rational::Rational64;
use serde::Serialize;

use crate::certify::{bilinear_form_norm, weighted_operator_norm, Metric};
use crate::error::{QueError, Result};
use crate::forms::FormPencil;
use crate::linalg;

pub const MIN_GRID: usize = 16;

#[derive(Clone, Debug)]
pub struct ObstacleModel {
    pub grid_size: usize,
    pub centers: Vec<usize>,
    /// `ε` in length units.
    pub radius: f64,
    pub alpha: f64,
    pub in_obstacle: Vec<bool>,
    /// Circle indices of the complement vertices, ascending.
    pub complement: Vec<usize>,
    pub circle: FormPencil,
    pub complement_pencil: FormPencil,
}

fn circular_steps(n: usize, a: usize, b: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// Induced subgraph of the circle on `vertices` (ascending).
fn induced_pencil(n_total: usize, vertices: &[usize]) -> FormPencil {
    let n = n_total as i64;
    let mass = vec![Rational64::new(1, n); vertices.len()];
    let conductance = Rational64::from_integer(n);
    let edges: Vec<_> = vertices
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            let j = vertices.binary_search(&((v + 1) % n_total)).ok()?;
            Some((i.min(j), i.max(j), conductance))
        })
        .collect();
    FormPencil::from_weighted_edges(None, 0, &mass, edges)
}

impl ObstacleModel {
    /// Builds the circle with obstacles of radius `eps` around `centers`.
    pub fn build(grid_size: usize, centers: &[usize], eps: f64, alpha: f64) -> Result<Self> {
        let n = grid_size;
        if n < MIN_GRID {
            return Err(QueError::Configuration(format!(
                "grid size {n} is below the minimum {MIN_GRID}"
            )));
        }
        let h = 1.0 / n as f64;
        if !(eps >= h * (1.0 - 1e-12)) {
            return Err(QueError::Configuration(format!(
                "obstacle radius {eps} is smaller than the grid spacing {h}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(QueError::Configuration(format!(
                "separation exponent {alpha} must lie in (0, 1]"
            )));
        }
        if let Some(&c) = centers.iter().find(|&&c| c >= n) {
            return Err(QueError::Configuration(format!(
                "obstacle center {c} is not a grid position (N = {n})"
            )));
        }
        let separation = 2.0 * eps.powf(alpha);
        for (i, &a) in centers.iter().enumerate() {
            for &b in &centers[i + 1..] {
                let d = circular_steps(n, a, b) as f64 * h;
                if !(d > separation) {
                    return Err(QueError::Configuration(format!(
                        "obstacles at {a} and {b} are {d} apart, separation requires more than {separation}"
                    )));
                }
            }
        }
        let reach = (eps * n as f64 + 1e-9).floor() as usize;
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (k, &c) in centers.iter().enumerate() {
            for (v, slot) in owner.iter_mut().enumerate() {
                if circular_steps(n, v, c) <= reach {
                    if slot.is_some() {
                        return Err(QueError::Configuration(format!(
                            "obstacles {k} and {} overlap at vertex {v}",
                            slot.unwrap()
                        )));
                    }
                    *slot = Some(k);
                }
            }
        }
        let in_obstacle: Vec<bool> = owner.iter().map(Option::is_some).collect();
        let complement: Vec<usize> = (0..n).filter(|&v| !in_obstacle[v]).collect();
        if complement.is_empty() {
            return Err(QueError::Configuration("obstacles cover the whole circle".into()));
        }
        // the complement of k ≥ 2 disjoint arcs of a circle has k components
        if centers.len() > 1 {
            return Err(QueError::Configuration(format!(
                "the complement of {} obstacles on a circle is disconnected",
                centers.len()
            )));
        }
        let all: Vec<usize> = (0..n).collect();
        Ok(ObstacleModel {
            grid_size: n,
            centers: centers.to_vec(),
            radius: eps,
            alpha,
            in_obstacle,
            circle: induced_pencil(n, &all),
            complement_pencil: induced_pencil(n, &complement),
            complement,
        })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.grid_size as f64
    }

    pub fn obstacle_vertices(&self) -> Vec<usize> {
        (0..self.grid_size).filter(|&v| self.in_obstacle[v]).collect()
    }

    /// `J`: restriction to the complement (`n_c × N`).
    pub fn restriction(&self) -> Mat<f64> {
        Mat::from_fn(self.complement.len(), self.grid_size, |i, v| {
            if self.complement[i] == v {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `J'`: extension by zero (`N × n_c`).
    pub fn zero_extension(&self) -> Mat<f64> {
        linalg::transpose(&self.restriction())
    }
}

/// `sup ‖f‖_{ℓ²(S)} / ‖f‖_{H¹(X)}` for a vertex set `S` of the pencil.
pub fn restriction_norm(pencil: &FormPencil, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let a = Mat::from_fn(set.len(), pencil.dim(), |i, v| if set[i] == v { 1.0 } else { 0.0 });
    let mass: Vec<f64> = set.iter().map(|&v| pencil.mass[v]).collect();
    weighted_operator_norm(&a, Metric::energy(pencil)?, Metric::Diagonal(&mass))
}

/// Tight `δ` in `‖f‖_{L²(B)} ≤ δ ‖f‖_{H¹(X)}`.
pub fn measure_smallness_delta(model: &ObstacleModel) -> Result<f64> {
    restriction_norm(&model.circle, &model.obstacle_vertices())
}

/// The gap fill `E` (`N × n_c`): identity on the complement, linear
/// interpolation across each gap between its two neighbouring complement
/// vertices.
pub fn build_extension(model: &ObstacleModel) -> Mat<f64> {
    let n = model.grid_size;
    let nc = model.complement.len();
    let mut e = Mat::zeros(n, nc);
    for (i, &v) in model.complement.iter().enumerate() {
        e[(v, i)] = 1.0;
    }
    if nc == n {
        return e;
    }
    // walk each gap from the complement vertex before it to the one after it
    for (i, &a) in model.complement.iter().enumerate() {
        let next = (a + 1) % n;
        if !model.in_obstacle[next] {
            continue;
        }
        let mut gap = Vec::new();
        let mut v = next;
        while model.in_obstacle[v] {
            gap.push(v);
            v = (v + 1) % n;
        }
        let j = model
            .complement
            .binary_search(&v)
            .expect("a gap ends at a complement vertex");
        let len = (gap.len() + 1) as f64;
        for (k, &g) in gap.iter().enumerate() {
            let t = (k + 1) as f64 / len;
            e[(g, i)] += 1.0 - t;
            e[(g, j)] += t;
        }
    }
    e
}

/// Tight `‖E‖` from `H¹(X ∖ B)` to `H¹(X)`.
pub fn extension_constant(model: &ObstacleModel, extension: &Mat<f64>) -> Result<f64> {
    weighted_operator_norm(
        extension,
        Metric::energy(&model.complement_pencil)?,
        Metric::energy(&model.circle)?,
    )
}

/// Tight constant in `‖f‖_{H²} ≤ C ‖(Δ+1)f‖` with
/// `‖f‖²_{H²} = ‖f‖² + fᵀLf + ‖M⁻¹Lf‖²`.
pub fn elliptic_regularity_constant(pencil: &FormPencil) -> Result<f64> {
    // In the M-orthonormal eigenbasis (L+M)^{-1}M is diag 1/(1+λ) and the H² metric
    // M + L + LM⁻¹L is diag 1+λ+λ², so the norm is a max over the spectrum.
    // The dense route squares the conditioning of LM⁻¹L and loses ~1e-9.
    let d = pencil.decomposition()?;
    Ok(d.eigenvalues
        .iter()
        .map(|&l| (1.0 + l + l * l).sqrt() / (1.0 + l))
        .fold(0.0, f64::max))
}

#[cfg(test)]
fn elliptic_regularity_dense(pencil: &FormPencil) -> Result<f64> {
    let l = &pencil.stiffness;
    let inv_mass: Vec<f64> = pencil.mass.iter().map(|m| 1.0 / m).collect();
    let h2 = pencil.energy_gram() + linalg::transpose(l) * linalg::scale_rows(&inv_mass, l);
    let h2 = linalg::symmetrize(&h2);
    let resolvent = linalg::solve_spd(&pencil.energy_gram(), &pencil.mass_matrix())?;
    weighted_operator_norm(&resolvent, Metric::mass(pencil), Metric::Dense(&h2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstacleReport {
    pub grid_size: usize,
    pub eps: f64,
    pub alpha: f64,
    /// Measure smallness `δ`.
    pub delta: f64,
    pub c_ext: f64,
    pub c_ell_reg: f64,
    /// `‖J‖`
    pub j_norm: f64,
    /// `‖J* − J'‖`
    pub adjoint_defect: f64,
    /// `max |JJ' − I|`
    pub jjp_defect: f64,
    /// `max |JE − I|`
    pub right_inverse_defect: f64,
    /// `sup ‖f − J'Jf‖ / ‖f‖_{H¹}`, bounded by `δ`
    pub b1: f64,
    /// `sup ‖(E − J')u‖ / ‖u‖_{H¹}`, bounded by `C_ext δ`
    pub c2: f64,
    pub c2_bound: f64,
    /// `sup |Ẽ(Jf, u) − E(f, Eu)| / (‖(Δ+1)f‖ ‖u‖_{H¹})`
    pub closeness: f64,
    /// `C_ell.reg C_ext δ`
    pub closeness_bound: f64,
    pub ok: bool,
}

/// Measures every constant of the restriction/extension comparison.
pub fn certify_obstacle(model: &ObstacleModel) -> Result<ObstacleReport> {
    let x = &model.circle;
    let c = &model.complement_pencil;
    let j = model.restriction();
    let jp = model.zero_extension();
    let e = build_extension(model);
    let nc = c.dim();

    let delta = measure_smallness_delta(model)?;
    let c_ext = extension_constant(model, &e)?;
    let c_ell_reg = elliptic_regularity_constant(x)?;

    let j_norm = weighted_operator_norm(&j, Metric::mass(x), Metric::mass(c))?;
    let j_star = crate::identification::weighted_adjoint(&j, &c.mass, &x.mass);
    let adjoint_defect = weighted_operator_norm(&(&j_star - &jp), Metric::mass(c), Metric::mass(x))?;
    let jjp_defect = linalg::max_abs(&(&j * &jp - linalg::identity(nc)));
    let right_inverse_defect = linalg::max_abs(&(&j * &e - linalg::identity(nc)));
    let b1 = weighted_operator_norm(
        &(linalg::identity(x.dim()) - &jp * &j),
        Metric::energy(x)?,
        Metric::mass(x),
    )?;
    let c2 = weighted_operator_norm(&(&e - &jp), Metric::energy(c)?, Metric::mass(x))?;

    // fᵀ K u = Ẽ(Jf, u) − E(f, Eu); substitute f = (L+M)^{-1} M g
    let k = linalg::transpose(&j) * &c.stiffness - &x.stiffness * &e;
    let w = linalg::scale_rows(&x.mass, &linalg::solve_spd(&x.energy_gram(), &k)?);
    let closeness = bilinear_form_norm(&w, Metric::mass(x), Metric::energy(c)?)?;

    let c2_bound = c_ext * delta;
    let closeness_bound = c_ell_reg * c_ext * delta;
    let slack = 1.0 + 1e-8;
    let ok = b1 <= delta * slack + 1e-14
        && c2 <= c2_bound * slack + 1e-14
        && closeness <= closeness_bound * slack + 1e-14;
    Ok(ObstacleReport {
        grid_size: model.grid_size,
        eps: model.radius,
        alpha: model.alpha,
        delta,
        c_ext,
        c_ell_reg,
        j_norm,
        adjoint_defect,
        jjp_defect,
        right_inverse_defect,
        b1,
        c2,
        c2_bound,
        closeness,
        closeness_bound,
        ok,
    })
}

/// Certifies one obstacle at `center` for each radius.
pub fn sweep(grid_size: usize, center: usize, radii: &[f64], alpha: f64) -> Result<Vec<ObstacleReport>> {
    radii
        .iter()
        .map(|&eps| certify_obstacle(&ObstacleModel::build(grid_size, &[center], eps, alpha)?))
        .collect()
}

/// Least-squares slope of `ln δ` against `ln ε`.
pub fn delta_slope(reports: &[ObstacleReport]) -> f64 {
    let x: Vec<f64> = reports.iter().map(|r| r.eps.ln()).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.delta.ln()).collect();
    linalg::fit_slope(&x, &y)
}
