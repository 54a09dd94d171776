//! Generalized eigensolving of form pencils and the functional-calculus
//! comparisons between a coarse and a fine level.
//!
//! Every function of a Laplacian goes through its eigendecomposition:
//! `η(Δ) = Φ diag(η(λ)) Φᵀ M`. For a pair, the operator `η(Δ̃)J − Jη(Δ)` is
//! evaluated in the two orthonormal eigenbases, where it becomes the entrywise
//! product of `G = Φ̃ᵀ M̃ J Φ` with `η(λ̃_i) − η(λ_j)`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::certify::QueCertificate;
use crate::error::{QueError, Result};
use crate::forms::{assemble, FormPencil};
use crate::fractal::{build_level, FractalModel, ModelKind};
use crate::identification::IdentificationPair;
use crate::linalg;

/// Relative slack granted to every measured-versus-bound comparison.
pub const BOUND_SLACK: f64 = 1e-8;

/// Eigenvalues closer than this are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal columns, first nonzero entry positive.
    pub eigenvectors: Mat<f64>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        linalg::column(&self.eigenvectors, k)
    }

    /// `η(Δ) = Φ diag(η(λ)) Φᵀ M`. Only meaningful for a complete decomposition.
    pub fn function<F: Fn(f64) -> f64>(&self, mass: &[f64], eta: F) -> Mat<f64> {
        let phi = &self.eigenvectors;
        let values: Vec<f64> = self.eigenvalues.iter().map(|&l| eta(l)).collect();
        let left = linalg::scale_cols(phi, &values);
        let right = linalg::scale_cols(&linalg::transpose(phi), mass);
        left * right
    }
}

/// Solves `L φ = λ M φ` through the symmetric matrix `M^{-1/2} L M^{-1/2}`.
/// `k = None` returns the full spectrum, otherwise the lowest `k` pairs.
pub fn eigensolve(pencil: &FormPencil, k: Option<usize>) -> Result<SpectralDecomposition> {
    let n = pencil.dim();
    let k = k.unwrap_or(n);
    if k > n {
        return Err(QueError::Domain(format!(
            "requested {k} eigenpairs of a pencil of dimension {n}"
        )));
    }
    let s: Vec<f64> = pencil.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let c = linalg::scale_cols(&linalg::scale_rows(&s, &pencil.stiffness), &s);
    let (values, u) = linalg::sym_eigen(&linalg::symmetrize(&c))?;
    let mut phi = linalg::scale_rows(&s, &u);
    for j in 0..n {
        let scale = (0..n).map(|i| phi[(i, j)].abs()).fold(0.0, f64::max);
        let first = (0..n).find(|&i| phi[(i, j)].abs() > 1e-8 * scale);
        if let Some(i) = first {
            if phi[(i, j)] < 0.0 {
                for r in 0..n {
                    phi[(r, j)] = -phi[(r, j)];
                }
            }
        }
    }
    // The dense solver is accurate to about eps·λ_max in absolute terms, which
    // swamps the bottom of the spectrum on fine levels. Rayleigh quotients
    // through the edge sum are accurate relative to each eigenvalue.
    let mut pairs: Vec<(f64, usize)> = (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| phi[(i, j)]).collect();
            let m2: f64 = col.iter().zip(&pencil.mass).map(|(x, m)| m * x * x).sum();
            let q = pencil.difference_energy(&col) / m2;
            (if q.is_finite() { q } else { values[j] }, j)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectralDecomposition {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        eigenvectors: Mat::from_fn(n, k, |i, j| phi[(i, pairs[j].1)]),
    })
}

/// Heat semigroup `e^{-tΔ}` of a pencil.
pub fn heat_semigroup(pencil: &FormPencil, t: f64) -> Result<Mat<f64>> {
    Ok(pencil
        .decomposition()?
        .function(&pencil.mass, |l| (-t * l).exp()))
}

/// Spectral projection `1_{(a,b)}(Δ)`.
pub fn spectral_projection(pencil: &FormPencil, a: f64, b: f64) -> Result<Mat<f64>> {
    Ok(pencil
        .decomposition()?
        .function(&pencil.mass, |l| if a < l && l < b { 1.0 } else { 0.0 }))
}

/// The maps `J` and `J'` written in the orthonormal eigenbases of the two
/// pencils: `G = Φ̃ᵀ M̃ J Φ` and `G' = Φᵀ M J' Φ̃`.
#[derive(Clone, Debug)]
pub struct EigenCoordinates {
    pub coarse_values: Vec<f64>,
    pub fine_values: Vec<f64>,
    pub g: Mat<f64>,
    pub gp: Mat<f64>,
}

impl EigenCoordinates {
    pub fn new(pair: &IdentificationPair) -> Result<Self> {
        let coarse = pair.coarse.decomposition()?;
        let fine = pair.fine.decomposition()?;
        let phi_t = linalg::transpose(&fine.eigenvectors);
        let g = &phi_t * linalg::scale_rows(&pair.fine.mass, &pair.j) * &coarse.eigenvectors;
        let gp = linalg::transpose(&coarse.eigenvectors)
            * linalg::scale_rows(&pair.coarse.mass, &pair.jp)
            * &fine.eigenvectors;
        Ok(EigenCoordinates {
            coarse_values: coarse.eigenvalues.clone(),
            fine_values: fine.eigenvalues.clone(),
            g,
            gp,
        })
    }

    /// `‖η(Δ̃)J − Jη(Δ)‖` from `ℓ²(μ)` to `ℓ²(μ̃)`.
    pub fn transfer_defect<F: Fn(f64) -> f64>(&self, eta: F) -> Result<f64> {
        let fine: Vec<f64> = self.fine_values.iter().map(|&l| eta(l)).collect();
        let coarse: Vec<f64> = self.coarse_values.iter().map(|&l| eta(l)).collect();
        let t = Mat::from_fn(self.g.nrows(), self.g.ncols(), |i, j| {
            self.g[(i, j)] * (fine[i] - coarse[j])
        });
        linalg::spectral_norm(&t)
    }

    /// Complex version of [`Self::transfer_defect`].
    pub fn transfer_defect_complex<F: Fn(f64) -> Complex64>(&self, eta: F) -> Result<f64> {
        let fine: Vec<Complex64> = self.fine_values.iter().map(|&l| eta(l)).collect();
        let coarse: Vec<Complex64> = self.coarse_values.iter().map(|&l| eta(l)).collect();
        let (r, c) = (self.g.nrows(), self.g.ncols());
        let re = Mat::from_fn(r, c, |i, j| self.g[(i, j)] * (fine[i] - coarse[j]).re);
        let im = Mat::from_fn(r, c, |i, j| self.g[(i, j)] * (fine[i] - coarse[j]).im);
        linalg::spectral_norm_complex(&re, &im)
    }

    /// `‖η(Δ̃) − Jη(Δ)J'‖` on `ℓ²(μ̃)`.
    pub fn sandwich_defect<F: Fn(f64) -> f64>(&self, eta: F) -> Result<f64> {
        let coarse: Vec<f64> = self.coarse_values.iter().map(|&l| eta(l)).collect();
        let mut h = -(linalg::scale_cols(&self.g, &coarse) * &self.gp);
        for (i, &l) in self.fine_values.iter().enumerate() {
            h[(i, i)] += eta(l);
        }
        linalg::spectral_norm(&h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub norm: f64,
    pub constant: f64,
    pub bound: f64,
    pub ok: bool,
}

impl BoundCheck {
    pub fn new(norm: f64, constant: f64, delta: f64) -> Self {
        let bound = if constant.is_infinite() {
            f64::INFINITY
        } else {
            constant * delta
        };
        BoundCheck {
            norm,
            constant,
            bound,
            ok: norm <= bound * (1.0 + BOUND_SLACK),
        }
    }
}

fn distance_to_spectra(z: Complex64, spectra: &[&[f64]]) -> f64 {
    spectra
        .iter()
        .flat_map(|s| s.iter())
        .map(|&l| (z - l).norm())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventConstant {
    pub z_re: f64,
    pub z_im: f64,
    /// `d(z, spec Δ ∪ spec Δ̃)`
    pub distance: f64,
    /// `4(1 + |z+1| / d)²`
    pub constant: f64,
    /// `1 + |z+1|/|Im z|` for `Re z ≥ 0`, `1 + |z+1|/|z|` for `Re z < 0`: the
    /// distance factor with the spectra replaced by `[0, ∞)`.
    pub rough_factor: f64,
}

pub fn resolvent_constant(z: Complex64, spec_a: &[f64], spec_b: &[f64]) -> Result<ResolventConstant> {
    let distance = distance_to_spectra(z, &[spec_a, spec_b]);
    if distance <= 1e-12 {
        return Err(QueError::Domain(format!(
            "z = {z} lies on the spectrum (distance {distance:e})"
        )));
    }
    let shift = (z + 1.0).norm();
    let factor = if distance.is_infinite() { 1.0 } else { 1.0 + shift / distance };
    let rough_factor = if z.re >= 0.0 {
        if z.im == 0.0 {
            f64::INFINITY
        } else {
            1.0 + shift / z.im.abs()
        }
    } else {
        1.0 + shift / z.norm()
    };
    Ok(ResolventConstant {
        z_re: z.re,
        z_im: z.im,
        distance,
        constant: 4.0 * factor * factor,
        rough_factor,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventComparison {
    pub constant: ResolventConstant,
    pub check: BoundCheck,
}

/// `‖R̃(z)J − JR(z)‖` against `C(z)·δ`.
pub fn resolvent_comparison(
    pair: &IdentificationPair,
    cert: &QueCertificate,
    z: Complex64,
) -> Result<ResolventComparison> {
    let coords = pair.eigen_coordinates()?;
    let constant = resolvent_constant(z, &coords.coarse_values, &coords.fine_values)?;
    let norm = coords.transfer_defect_complex(|l| 1.0 / (Complex64::new(l, 0.0) - z))?;
    Ok(ResolventComparison {
        check: BoundCheck::new(norm, constant.constant, cert.delta_total),
        constant,
    })
}

/// `C_η` and `C'_η` for the indicator of `(a, b)` with contour distance `ε`.
pub fn projection_constants(a: f64, b: f64, eps: f64) -> Result<(f64, f64)> {
    if !(-1.0 < a && a < b) || !(eps > 0.0) {
        return Err(QueError::Domain(format!(
            "projection window needs -1 < a < b and eps > 0, got a = {a}, b = {b}, eps = {eps}"
        )));
    }
    let r = (b + 1.0) / eps;
    let root = 1.0 + (1.0 + r * r).sqrt();
    let c = 4.0 / PI * (b - a + eps) * root * root;
    Ok((c, 5.0 * (b + 1.0).sqrt() + 3.0 * c))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionComparison {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    /// `‖1_I(Δ̃)J − J1_I(Δ)‖` against `C_η δ`
    pub transfer: BoundCheck,
    /// `‖1_I(Δ̃) − J1_I(Δ)J'‖` against `C'_η δ`
    pub sandwich: BoundCheck,
}

impl ProjectionComparison {
    pub fn ok(&self) -> bool {
        self.transfer.ok && self.sandwich.ok
    }
}

pub fn projection_comparison(
    pair: &IdentificationPair,
    cert: &QueCertificate,
    a: f64,
    b: f64,
) -> Result<ProjectionComparison> {
    let coords = pair.eigen_coordinates()?;
    let eps = [a, b]
        .iter()
        .map(|&x| distance_to_spectra(Complex64::new(x, 0.0), &[&coords.coarse_values, &coords.fine_values]))
        .fold(f64::INFINITY, f64::min);
    if eps < 1e-10 {
        return Err(QueError::IllConditionedWindow(format!(
            "window ({a}, {b}) has an endpoint within {eps:e} of the spectrum"
        )));
    }
    let (c, cp) = projection_constants(a, b, eps)?;
    let eta = |l: f64| if a < l && l < b { 1.0 } else { 0.0 };
    let delta = cert.delta_total;
    Ok(ProjectionComparison {
        a,
        b,
        eps,
        transfer: BoundCheck::new(coords.transfer_defect(eta)?, c, delta),
        sandwich: BoundCheck::new(coords.sandwich_defect(eta)?, cp, delta),
    })
}

/// `C'_{η_t} = 12/(π cos θ) (1 + 1/sin θ)² / t + 5`.
pub fn heat_constant(t: f64, theta: f64) -> Result<f64> {
    if !(t > 0.0) || !(theta > 0.0 && theta < PI / 2.0) {
        return Err(QueError::Domain(format!(
            "heat constant needs t > 0 and 0 < theta < pi/2, got t = {t}, theta = {theta}"
        )));
    }
    let s = 1.0 + 1.0 / theta.sin();
    Ok(12.0 / (PI * theta.cos()) * s * s / t + 5.0)
}

/// `‖e^{-tΔ̃}J − Je^{-tΔ}‖` against `C'_{η_t} δ`. At `t = 0` both semigroups
/// are the identity, the defect vanishes and the bound is vacuous.
pub fn heat_comparison(
    pair: &IdentificationPair,
    cert: &QueCertificate,
    t: f64,
    theta: f64,
) -> Result<BoundCheck> {
    if !(t >= 0.0) {
        return Err(QueError::Domain(format!("heat time must be nonnegative, got {t}")));
    }
    let constant = if t == 0.0 {
        f64::INFINITY
    } else {
        heat_constant(t, theta)?
    };
    let coords = pair.eigen_coordinates()?;
    let norm = coords.transfer_defect(|l| (-t * l).exp())?;
    Ok(BoundCheck::new(norm, constant, cert.delta_total))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    /// `‖u_t − J f_t‖_μ̃`
    pub error: f64,
    /// `C'_{η_T} δ ‖u_0‖`
    pub bound: f64,
    pub ok: bool,
}

/// Evolves `u_t = e^{-tΔ̃}u_0` and `f_t = e^{-tΔ}J'u_0` and compares at each
/// time with the bound for `T = min(times)`.
pub fn heat_solution_comparison(
    pair: &IdentificationPair,
    cert: &QueCertificate,
    u0: &[f64],
    times: &[f64],
    theta: f64,
) -> Result<Vec<TrajectoryRow>> {
    if u0.len() != pair.fine_dim() {
        return Err(QueError::DimensionMismatch(format!(
            "initial datum has length {}, fine level has {} vertices",
            u0.len(),
            pair.fine_dim()
        )));
    }
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if !(t_min > 0.0) {
        return Err(QueError::Domain(format!(
            "trajectory times must be positive, got minimum {t_min}"
        )));
    }
    let constant = heat_constant(t_min, theta)?;
    let bound = constant * cert.delta_total * pair.fine.norm(u0);
    let coarse = pair.coarse.decomposition()?;
    let fine = pair.fine.decomposition()?;
    let f0 = linalg::mat_vec(&pair.jp, u0);
    // coefficients in the eigenbases
    let a = linalg::mat_vec(&linalg::transpose(&fine.eigenvectors), &scale(&pair.fine.mass, u0));
    let b = linalg::mat_vec(&linalg::transpose(&coarse.eigenvectors), &scale(&pair.coarse.mass, &f0));
    times
        .iter()
        .map(|&t| {
            let ea: Vec<f64> = a.iter().zip(&fine.eigenvalues).map(|(c, l)| c * (-t * l).exp()).collect();
            let eb: Vec<f64> = b.iter().zip(&coarse.eigenvalues).map(|(c, l)| c * (-t * l).exp()).collect();
            let ut = linalg::mat_vec(&fine.eigenvectors, &ea);
            let jft = linalg::mat_vec(&pair.j, &linalg::mat_vec(&coarse.eigenvectors, &eb));
            let diff: Vec<f64> = ut.iter().zip(&jft).map(|(x, y)| x - y).collect();
            let error = pair.fine.norm(&diff);
            Ok(TrajectoryRow {
                t,
                error,
                bound,
                ok: error <= bound * (1.0 + BOUND_SLACK) + 1e-12 * pair.fine.norm(u0),
            })
        })
        .collect()
}

fn scale(w: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter().zip(x).map(|(a, b)| a * b).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenvectorComparison {
    pub k: usize,
    pub fine_eigenvalue: f64,
    /// Radius of the disc around the fine eigenvalue that excludes the rest of
    /// the fine spectrum.
    pub radius: f64,
    /// Indices of the coarse eigenvalues inside the disc.
    pub coarse_indices: Vec<usize>,
    /// Largest `|λ_j − λ̃_k|` over the coarse eigenvalues in the disc.
    pub eigenvalue_gap: f64,
    /// `min ‖J¹Φ − Φ̃‖_Ẽ` over unit `Φ ∈ ran 1_D(Δ)`.
    pub error: f64,
    /// `error / δ`, the empirical constant.
    pub fitted_constant: f64,
}

/// Compares the `k`-th fine eigenvector with the best unit vector of the
/// coarse spectral subspace selected by an isolating disc.
pub fn eigenvector_comparison(
    pair: &IdentificationPair,
    cert: &QueCertificate,
    k: usize,
) -> Result<EigenvectorComparison> {
    let coarse = pair.coarse.decomposition()?;
    let fine = pair.fine.decomposition()?;
    if k >= fine.len() {
        return Err(QueError::Domain(format!(
            "eigenvector {k} requested, fine level has {}",
            fine.len()
        )));
    }
    let lam = fine.eigenvalues[k];
    let radius = 0.5
        * fine
            .eigenvalues
            .iter()
            .map(|&l| (l - lam).abs())
            .filter(|&d| d > CLUSTER_TOL * (1.0 + lam.abs()))
            .fold(f64::INFINITY, f64::min);
    let inside: Vec<usize> = (0..coarse.len())
        .filter(|&j| (coarse.eigenvalues[j] - lam).abs() < radius)
        .collect();
    if inside.is_empty() {
        return Err(QueError::DegenerateCluster(format!(
            "no coarse eigenvalue lies within {radius:e} of the fine eigenvalue {lam}"
        )));
    }
    let eigenvalue_gap = inside
        .iter()
        .map(|&j| (coarse.eigenvalues[j] - lam).abs())
        .fold(0.0, f64::max);

    // minimize ‖A c − b‖_G over |c| = 1 with A = J¹Φ_D, b = Φ̃, G = M̃ + L̃
    let phi_d = linalg::from_columns(pair.coarse_dim(), &inside.iter().map(|&j| coarse.vector(j)).collect::<Vec<_>>());
    let a = &pair.j1 * &phi_d;
    let b = fine.vector(k);
    let gram = pair.fine.energy_gram();
    let ga = &gram * &a;
    let q = linalg::symmetrize(&(linalg::transpose(&a) * &ga));
    let p = linalg::mat_vec(&linalg::transpose(&ga), &b);
    let c = sphere_least_squares(&q, &p)?;
    let ac = linalg::mat_vec(&a, &c);
    let diff: Vec<f64> = ac.iter().zip(&b).map(|(x, y)| x - y).collect();
    let error = pair.fine.energy_norm(&diff);
    Ok(EigenvectorComparison {
        k,
        fine_eigenvalue: lam,
        radius,
        coarse_indices: inside,
        eigenvalue_gap,
        error,
        fitted_constant: if cert.delta_total > 0.0 { error / cert.delta_total } else { 0.0 },
    })
}

/// Minimizes `cᵀQc − 2pᵀc` over the unit sphere (`Q` symmetric).
fn sphere_least_squares(q: &Mat<f64>, p: &[f64]) -> Result<Vec<f64>> {
    let (values, v) = linalg::sym_eigen(q)?;
    let s = values.len();
    let w = linalg::mat_vec(&linalg::transpose(&v), p);
    let lmin = values[0];
    let scale = values.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let norm2 = |nu: f64| -> f64 {
        w.iter()
            .zip(&values)
            .map(|(wi, li)| (wi / (li - nu)).powi(2))
            .sum()
    };
    let tol = 1e-12 * scale;
    let bottom = |i: usize| (values[i] - lmin).abs() <= tol;
    let wmax = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let hard = (0..s).filter(|&i| bottom(i)).all(|i| w[i].abs() <= 1e-12 * wmax.max(f64::MIN_POSITIVE))
        && norm2_excluding_min(&w, &values, tol) <= 1.0;
    let coeffs: Vec<f64> = if hard {
        // hard case: ν = λ_min, fill the remaining length along the bottom eigenvector
        let mut c: Vec<f64> = (0..s)
            .map(|i| if bottom(i) { 0.0 } else { w[i] / (values[i] - lmin) })
            .collect();
        let rest: f64 = c.iter().map(|x| x * x).sum();
        c[0] = (1.0 - rest).max(0.0).sqrt();
        c
    } else {
        // ‖c(ν)‖ increases from 0 to ∞ as ν rises from -∞ to λ_min
        let mut hi = lmin;
        let mut step = 1.0 + scale;
        let mut lo = lmin - step;
        while norm2(lo) > 1.0 {
            step *= 2.0;
            lo = lmin - step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm2(mid) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let nu = lo;
        w.iter().zip(&values).map(|(wi, li)| wi / (li - nu)).collect()
    };
    let mut c = linalg::mat_vec(&v, &coeffs);
    let n: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        c.iter_mut().for_each(|x| *x /= n);
    }
    Ok(c)
}

fn norm2_excluding_min(w: &[f64], values: &[f64], tol: f64) -> f64 {
    let lmin = values[0];
    w.iter()
        .zip(values)
        .filter(|(_, l)| (*l - lmin).abs() > tol)
        .map(|(wi, li)| (wi / (li - lmin)).powi(2))
        .sum()
}

/// Two-sided Hausdorff distance between the parts of two spectra inside
/// `[lo, hi]`. Both parts empty gives 0, exactly one empty gives `+∞`.
pub fn hausdorff_distance(a: &[f64], b: &[f64], lo: f64, hi: f64) -> f64 {
    let a: Vec<f64> = a.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    let b: Vec<f64> = b.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let directed = |x: &[f64], y: &[f64]| {
                x.iter()
                    .map(|p| y.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max)
            };
            directed(&a, &b).max(directed(&b, &a))
        }
    }
}

/// `2·4^m (1 − cos(kπ 2^{-m}))`, the `k`-th eigenvalue of the level-`m`
/// interval pencil.
pub fn interval_eigenvalue(m: usize, k: usize) -> f64 {
    let n = (1u64 << m) as f64;
    2.0 * n * n * (1.0 - (k as f64 * PI / n).cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Reference {
    /// The same eigenvalue index at a finer level.
    Finest(usize),
    /// `(kπ)²`, the Neumann eigenvalues of `-d²/dx²` on `[0, 1]`.
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub eigenvalue: f64,
    pub reference: f64,
    pub error: f64,
    /// The model's theoretical `δ_m`.
    pub delta_bound: f64,
    /// `error / δ_m`
    pub fitted_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub model: ModelKind,
    pub k: usize,
    pub reference: Reference,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(error)` per level over the rows with
    /// nonzero error; `None` with fewer than two such rows.
    pub log_slope: Option<f64>,
}

/// `λ_k(Δ_m)` per level against a reference value.
pub fn convergence_table(
    model: &FractalModel,
    levels: &[usize],
    k: usize,
    reference: Reference,
) -> Result<ConvergenceTable> {
    let reference_value = match reference {
        Reference::Analytic => {
            if model.kind != ModelKind::Interval {
                return Err(QueError::UnsupportedReference);
            }
            (k as f64 * PI).powi(2)
        }
        Reference::Finest(level) => level_eigenvalue(model, level, k)?,
    };
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let eigenvalue = level_eigenvalue(model, level, k)?;
        let error = (eigenvalue - reference_value).abs();
        let delta_bound = crate::certify::theoretical_bound(model.kind, level);
        rows.push(ConvergenceRow {
            level,
            eigenvalue,
            reference: reference_value,
            error,
            delta_bound,
            fitted_constant: error / delta_bound,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.level as f64, r.error.ln()))
        .unzip();
    Ok(ConvergenceTable {
        model: model.kind,
        k,
        reference,
        log_slope: (x.len() >= 2).then(|| linalg::fit_slope(&x, &y)),
        rows,
    })
}

fn level_eigenvalue(model: &FractalModel, level: usize, k: usize) -> Result<f64> {
    let pencil = assemble(&build_level(model, level)?);
    if k >= pencil.dim() {
        return Err(QueError::Domain(format!(
            "eigenvalue {k} does not exist at level {level} ({} vertices)",
            pencil.dim()
        )));
    }
    Ok(eigensolve(&pencil, Some(k + 1))?.eigenvalues[k])
}
