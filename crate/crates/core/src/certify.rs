//! Tight constants of the quasi-unitary-equivalence inequalities.
//!
//! Every constant is an operator norm between weighted spaces: plain `ℓ²(μ)`
//! norms (metric `M`) or energy norms `‖f‖²_E = ‖f‖²_μ + E(f)` (metric `M + L`).

use std::borrow::Cow;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{QueError, Result};
use crate::forms::FormPencil;
use crate::fractal::ModelKind;
use crate::identification::{weighted_adjoint, IdentificationPair};
use crate::linalg;

pub const CERT_SCHEMA: &str = "que-cert/1";

/// Flag set when `‖J¹f‖_Ẽ ≤ (1+δ)‖f‖_E` fails for the certified pair.
pub const FLAG_ENERGY_J: &str = "energy_bound_J exceeds 1+delta";
/// Flag set when `‖J'¹u‖_E ≤ (1+δ)‖u‖_Ẽ` fails for the certified pair.
pub const FLAG_ENERGY_JP1: &str = "energy_bound_Jp1 exceeds 1+delta";

/// A positive definite inner product on `ℝⁿ`.
#[derive(Clone, Copy, Debug)]
pub enum Metric<'a> {
    /// `Σ w_i x_i²`
    Diagonal(&'a [f64]),
    /// `xᵀ G x`
    Dense(&'a Mat<f64>),
    /// `xᵀ L Lᵀ x` given the lower Cholesky factor `L`.
    Factor(&'a Mat<f64>),
}

impl<'a> Metric<'a> {
    /// The `ℓ²(μ)` metric of a pencil.
    pub fn mass(p: &'a FormPencil) -> Self {
        Metric::Diagonal(&p.mass)
    }

    /// The energy metric `M + L` of a pencil, using its cached factor.
    pub fn energy(p: &'a FormPencil) -> Result<Self> {
        Ok(Metric::Factor(p.energy_cholesky()?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Diagonal(w) => w.len(),
            Metric::Dense(g) | Metric::Factor(g) => g.nrows(),
        }
    }

    fn factor(&self) -> Result<Option<Cow<'a, Mat<f64>>>> {
        match self {
            Metric::Diagonal(w) => {
                if w.iter().any(|&x| !(x > 0.0)) {
                    return Err(QueError::Domain("diagonal metric has a non-positive weight".into()));
                }
                Ok(None)
            }
            Metric::Dense(g) => linalg::cholesky(g)
                .map(|l| Some(Cow::Owned(l)))
                .map_err(|_| QueError::Domain("dense metric is not positive definite".into())),
            Metric::Factor(l) => Ok(Some(Cow::Borrowed(*l))),
        }
    }
}

/// `R A` where `‖x‖² = |R x|²`.
fn apply_root(metric: &Metric, factor: &Option<Cow<Mat<f64>>>, a: &Mat<f64>) -> Mat<f64> {
    match (metric, factor) {
        (Metric::Diagonal(w), _) => {
            let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            linalg::scale_rows(&s, a)
        }
        (_, Some(l)) => l.transpose() * a,
        _ => unreachable!("dense metrics are factored"),
    }
}

/// `R^{-ᵀ} A`.
fn apply_inverse_root_transpose(metric: &Metric, factor: &Option<Cow<Mat<f64>>>, a: &Mat<f64>) -> Mat<f64> {
    match (metric, factor) {
        (Metric::Diagonal(w), _) => {
            let s: Vec<f64> = w.iter().map(|x| 1.0 / x.sqrt()).collect();
            linalg::scale_rows(&s, a)
        }
        (_, Some(l)) => linalg::solve_lower(l, a),
        _ => unreachable!("dense metrics are factored"),
    }
}

fn check_dims(a: &Mat<f64>, rows: usize, cols: usize) -> Result<()> {
    if a.nrows() != rows || a.ncols() != cols {
        return Err(QueError::DimensionMismatch(format!(
            "operator is {}x{}, metrics need {}x{}",
            a.nrows(),
            a.ncols(),
            rows,
            cols
        )));
    }
    Ok(())
}

/// `sup ‖A f‖_cod / ‖f‖_dom`.
pub fn weighted_operator_norm(a: &Mat<f64>, dom: Metric, cod: Metric) -> Result<f64> {
    check_dims(a, cod.dim(), dom.dim())?;
    let (fd, fc) = (dom.factor()?, cod.factor()?);
    // Bᵀ = R_dom^{-ᵀ} (R_cod A)ᵀ has the same norm as B = R_cod A R_dom^{-1}
    let c = apply_root(&cod, &fc, a);
    let bt = apply_inverse_root_transpose(&dom, &fd, &linalg::transpose(&c));
    linalg::spectral_norm(&bt)
}

/// `sup |fᵀ K u| / (‖f‖_left ‖u‖_right)`.
pub fn bilinear_form_norm(k: &Mat<f64>, left: Metric, right: Metric) -> Result<f64> {
    check_dims(k, left.dim(), right.dim())?;
    let (fl, fr) = (left.factor()?, right.factor()?);
    let c = apply_inverse_root_transpose(&left, &fl, k);
    let bt = apply_inverse_root_transpose(&right, &fr, &linalg::transpose(&c));
    linalg::spectral_norm(&bt)
}

/// The model's theoretical `δ_m`.
pub fn theoretical_bound(kind: ModelKind, m: usize) -> f64 {
    match kind {
        ModelKind::Interval => (1.0 + 2f64.sqrt()) * 0.5f64.powi(m as i32),
        ModelKind::Gasket => {
            (1.0 + 3f64.sqrt()) * 2f64.sqrt() / 3f64.sqrt() * 5f64.powf(-(m as f64) / 2.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    /// `max(0, ‖J‖ − 1)`
    pub delta_a1: f64,
    /// `‖J* − J'‖`
    pub delta_a2: f64,
    /// `sup ‖f − J'Jf‖ / ‖f‖_E`
    pub delta_b1: f64,
    /// `sup ‖u − JJ'u‖ / ‖u‖_Ẽ`
    pub delta_b2: f64,
    /// `sup ‖u − JJ'¹u‖ / ‖u‖_Ẽ`
    pub delta_bprime: f64,
    /// `sup ‖(J¹ − J)f‖ / ‖f‖_E`
    pub delta_c1: f64,
    /// `sup ‖(J'¹ − J')u‖ / ‖u‖_Ẽ`
    pub delta_c2: f64,
    /// `sup |Ẽ(J¹f, u) − E(f, J'¹u)| / (‖f‖_E ‖u‖_Ẽ)`
    pub delta_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueCertificate {
    pub schema: String,
    pub model: Option<ModelKind>,
    pub m: usize,
    #[serde(rename = "M")]
    pub fine_level: usize,
    pub deltas: Deltas,
    /// `max(δ_a1, δ_a2, δ_b1, δ_b' + (1+δ_a1)δ_c2, δ_c1, δ_c2, δ_d)`
    pub delta_total: f64,
    pub theoretical_bound: Option<f64>,
    /// `sup ‖J¹f‖_Ẽ / ‖f‖_E`
    pub energy_bound_j: f64,
    /// `sup ‖J'¹u‖_E / ‖u‖_Ẽ`
    pub energy_bound_jp1: f64,
    pub hypothesis_flags: Vec<String>,
}

impl QueCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: QueCertificate =
            serde_json::from_str(text).map_err(|e| QueError::Format(e.to_string()))?;
        if cert.schema != CERT_SCHEMA {
            return Err(QueError::Format(format!("unknown schema {:?}", cert.schema)));
        }
        Ok(cert)
    }

    /// `δ_b' + (1+δ_a1)δ_c2`, the second (b) inequality derived from (b′) and (c).
    pub fn combined_b2(&self) -> f64 {
        self.deltas.delta_bprime + (1.0 + self.deltas.delta_a1) * self.deltas.delta_c2
    }
}

/// `δ' + (1 + δ_a)δ_c`.
pub fn combine_b_inequality(delta_bprime: f64, delta_a: f64, delta_c: f64) -> Result<f64> {
    if [delta_bprime, delta_a, delta_c].iter().any(|&d| !(d >= 0.0)) {
        return Err(QueError::Domain(format!(
            "inputs must be nonnegative, got ({delta_bprime}, {delta_a}, {delta_c})"
        )));
    }
    Ok(delta_bprime + (1.0 + delta_a) * delta_c)
}

/// `δ̂ = δ √((2+δ)/(2−δ))`, valid for `δ < 2`.
pub fn delta_hat_from_delta(delta: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&delta) {
        return Err(QueError::Domain(format!(
            "delta_hat = delta*sqrt((2+delta)/(2-delta)) requires 0 <= delta < 2, got {delta}"
        )));
    }
    Ok(delta * ((2.0 + delta) / (2.0 - delta)).sqrt())
}

/// `δ = δ̂ / √(1−δ̂)`, valid for `δ̂ < 1`.
pub fn delta_from_delta_hat(delta_hat: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta_hat) {
        return Err(QueError::Domain(format!(
            "delta = delta_hat/sqrt(1-delta_hat) requires 0 <= delta_hat < 1, got {delta_hat}"
        )));
    }
    Ok(delta_hat / (1.0 - delta_hat).sqrt())
}

fn check_unit_interval(delta: f64, delta_tilde: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&delta_tilde) {
        return Err(QueError::Precondition(format!(
            "transitivity needs delta, delta_tilde in [0, 1], got {delta} and {delta_tilde}"
        )));
    }
    Ok(())
}

/// `14(δ + δ̃)` for forms.
pub fn form_transitivity_bound(delta: f64, delta_tilde: f64) -> Result<f64> {
    check_unit_interval(delta, delta_tilde)?;
    Ok(14.0 * (delta + delta_tilde))
}

/// `5δ + 5δ̃` for operators.
pub fn operator_transitivity_bound(delta: f64, delta_tilde: f64) -> Result<f64> {
    check_unit_interval(delta, delta_tilde)?;
    Ok(5.0 * delta + 5.0 * delta_tilde)
}

/// Computes every tight constant of the pair.
pub fn certify(pair: &IdentificationPair) -> Result<QueCertificate> {
    let (c, f) = (&*pair.coarse, &*pair.fine);
    let (n, nf) = (c.dim(), f.dim());
    let (mu, mu_t) = (Metric::mass(c), Metric::mass(f));
    let (e, e_t) = (Metric::energy(c)?, Metric::energy(f)?);

    let j_norm = weighted_operator_norm(&pair.j, mu, mu_t)?;
    let j_star = weighted_adjoint(&pair.j, &f.mass, &c.mass);
    let delta_a1 = (j_norm - 1.0).max(0.0);
    let delta_a2 = weighted_operator_norm(&(&j_star - &pair.jp), mu_t, mu)?;
    let delta_b1 = weighted_operator_norm(&(linalg::identity(n) - &pair.jp * &pair.j), e, mu)?;
    let delta_b2 = weighted_operator_norm(&(linalg::identity(nf) - &pair.j * &pair.jp), e_t, mu_t)?;
    let delta_bprime =
        weighted_operator_norm(&(linalg::identity(nf) - &pair.j * &pair.jp1), e_t, mu_t)?;
    let delta_c1 = weighted_operator_norm(&(&pair.j1 - &pair.j), e, mu_t)?;
    let delta_c2 = weighted_operator_norm(&(&pair.jp1 - &pair.jp), e_t, mu)?;
    let k = linalg::transpose(&pair.j1) * &f.stiffness - &c.stiffness * &pair.jp1;
    let delta_d = bilinear_form_norm(&k, e, e_t)?;
    let energy_bound_j = weighted_operator_norm(&pair.j1, e, e_t)?;
    let energy_bound_jp1 = weighted_operator_norm(&pair.jp1, e_t, e)?;

    let deltas = Deltas {
        delta_a1,
        delta_a2,
        delta_b1,
        delta_b2,
        delta_bprime,
        delta_c1,
        delta_c2,
        delta_d,
    };
    let delta_total = [
        delta_a1,
        delta_a2,
        delta_b1,
        combine_b_inequality(delta_bprime, delta_a1, delta_c2)?,
        delta_c1,
        delta_c2,
        delta_d,
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut hypothesis_flags = Vec::new();
    if energy_bound_j > (1.0 + delta_total) * (1.0 + 1e-12) {
        hypothesis_flags.push(FLAG_ENERGY_J.to_string());
    }
    if energy_bound_jp1 > (1.0 + delta_total) * (1.0 + 1e-12) {
        hypothesis_flags.push(FLAG_ENERGY_JP1.to_string());
    }
    Ok(QueCertificate {
        schema: CERT_SCHEMA.to_string(),
        model: pair.model,
        m: pair.coarse_level,
        fine_level: pair.fine_level,
        deltas,
        delta_total,
        theoretical_bound: pair.model.map(|k| theoretical_bound(k, pair.coarse_level)),
        energy_bound_j,
        energy_bound_jp1,
        hypothesis_flags,
    })
}

#[derive(Clone, Debug)]
pub struct Composition {
    pub pair: IdentificationPair,
    pub certificate: QueCertificate,
    /// `14(δ + δ̃)`
    pub theoretical_bound: f64,
    /// Transitivity hypotheses that failed for the two input pairs.
    pub hypothesis_flags: Vec<String>,
}

impl Composition {
    pub fn ok(&self) -> bool {
        self.certificate.delta_total <= self.theoretical_bound * (1.0 + 1e-8)
    }
}

/// Composes two certified pairs and certifies the composition directly.
pub fn compose(
    ab: &IdentificationPair,
    cert_ab: &QueCertificate,
    bc: &IdentificationPair,
    cert_bc: &QueCertificate,
) -> Result<Composition> {
    let (delta, delta_tilde) = (cert_ab.delta_total, cert_bc.delta_total);
    let theoretical_bound = form_transitivity_bound(delta, delta_tilde)?;
    let pair = ab.compose(bc)?;
    let mut hypothesis_flags = Vec::new();
    if cert_ab.energy_bound_j > 1.0 + delta {
        hypothesis_flags.push(format!(
            "first pair: |J1 f| <= (1+delta)|f| fails ({} > {})",
            cert_ab.energy_bound_j,
            1.0 + delta
        ));
    }
    if cert_bc.energy_bound_jp1 > 1.0 + delta_tilde {
        hypothesis_flags.push(format!(
            "second pair: |J'1 w| <= (1+delta~)|w| fails ({} > {})",
            cert_bc.energy_bound_jp1,
            1.0 + delta_tilde
        ));
    }
    let mut certificate = certify(&pair)?;
    certificate.hypothesis_flags.extend(hypothesis_flags.iter().cloned());
    Ok(Composition {
        pair,
        certificate,
        theoretical_bound,
        hypothesis_flags,
    })
}

/// Resolvent `(Δ + 1)^{-1} = (L + M)^{-1} M` by a dense Cholesky solve.
pub fn resolvent_at_minus_one(p: &FormPencil) -> Result<Mat<f64>> {
    linalg::solve_spd(&p.energy_gram(), &p.mass_matrix())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorCertificate {
    pub m: usize,
    #[serde(rename = "M")]
    pub fine_level: usize,
    /// `max(0, ‖J‖ − 1)`
    pub delta_a1: f64,
    /// `‖J* − J'‖`
    pub delta_a2: f64,
    /// `‖(1 − J'J)R‖`
    pub delta_b1: f64,
    /// `‖(1 − JJ')R̃‖`
    pub delta_b2: f64,
    /// `‖R̃J − JR‖`
    pub delta_d: f64,
    pub delta_total: f64,
    /// `‖J'‖`
    pub jp_norm: f64,
    /// The form-level `δ` the checks below are measured against.
    pub form_delta: f64,
    /// `‖R̃J − JR‖ ≤ 4δ`
    pub resolvent_ok: bool,
    /// `‖J'‖ ≤ 1 + 2δ`
    pub jp_ok: bool,
}

/// Operator-level constants with `R = (Δ+1)^{-1}` from dense solves.
pub fn operator_level_certificate(
    pair: &IdentificationPair,
    cert: &QueCertificate,
) -> Result<OperatorCertificate> {
    let (c, f) = (&*pair.coarse, &*pair.fine);
    let (mu, mu_t) = (Metric::mass(c), Metric::mass(f));
    let r = resolvent_at_minus_one(c)?;
    let r_t = resolvent_at_minus_one(f)?;
    let j_star = weighted_adjoint(&pair.j, &f.mass, &c.mass);

    let delta_a1 = (weighted_operator_norm(&pair.j, mu, mu_t)? - 1.0).max(0.0);
    let delta_a2 = weighted_operator_norm(&(&j_star - &pair.jp), mu_t, mu)?;
    let delta_b1 =
        weighted_operator_norm(&((linalg::identity(c.dim()) - &pair.jp * &pair.j) * &r), mu, mu)?;
    let delta_b2 = weighted_operator_norm(
        &((linalg::identity(f.dim()) - &pair.j * &pair.jp) * &r_t),
        mu_t,
        mu_t,
    )?;
    let delta_d = weighted_operator_norm(&(&r_t * &pair.j - &pair.j * &r), mu, mu_t)?;
    let jp_norm = weighted_operator_norm(&pair.jp, mu_t, mu)?;
    let delta_total = [delta_a1, delta_a2, delta_b1, delta_b2, delta_d]
        .into_iter()
        .fold(0.0, f64::max);
    let form_delta = cert.delta_total;
    Ok(OperatorCertificate {
        m: pair.coarse_level,
        fine_level: pair.fine_level,
        delta_a1,
        delta_a2,
        delta_b1,
        delta_b2,
        delta_d,
        delta_total,
        jp_norm,
        form_delta,
        resolvent_ok: delta_d <= 4.0 * form_delta * (1.0 + 1e-8) + 1e-14,
        jp_ok: jp_norm <= (1.0 + 2.0 * form_delta) * (1.0 + 1e-12),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnrsEntry {
    pub m: usize,
    pub delta: f64,
    pub theoretical_bound: Option<f64>,
    pub within_theoretical_bound: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnrsVerdict {
    pub entries: Vec<GnrsEntry>,
    /// Logarithm base of the slope: 2 for the interval, 5 for the gasket, `e`
    /// otherwise.
    pub log_base: f64,
    /// Least-squares slope of `log_base δ_m` against `m`.
    pub slope: f64,
    /// The slope band used to judge the rate; a tolerance policy, not a theorem.
    pub slope_band: Option<(f64, f64)>,
    pub slope_within_band: Option<bool>,
    /// `δ_m` is decreasing over the last three levels and the slope is negative.
    pub converges: bool,
    pub verdict: String,
}

/// Generalized norm resolvent convergence verdict from certificates at
/// increasing coarse levels.
pub fn gnrs_verdict(certs: &[QueCertificate]) -> Result<GnrsVerdict> {
    if certs.len() < 3 {
        return Err(QueError::Domain(format!(
            "a convergence verdict needs at least 3 certificates, got {}",
            certs.len()
        )));
    }
    if certs.windows(2).any(|w| w[1].m <= w[0].m) {
        return Err(QueError::Domain("certificates must have increasing m".into()));
    }
    let model = certs[0].model.filter(|k| certs.iter().all(|c| c.model == Some(*k)));
    let (log_base, slope_band) = match model {
        Some(ModelKind::Interval) => (2.0, Some((-1.3, -0.7))),
        Some(ModelKind::Gasket) => (5.0, Some((f64::NEG_INFINITY, -0.35))),
        None => (std::f64::consts::E, None),
    };
    let entries: Vec<GnrsEntry> = certs
        .iter()
        .map(|c| GnrsEntry {
            m: c.m,
            delta: c.delta_total,
            theoretical_bound: c.theoretical_bound,
            within_theoretical_bound: c.theoretical_bound.map(|b| c.delta_total <= b),
        })
        .collect();
    let x: Vec<f64> = entries.iter().map(|e| e.m as f64).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.delta.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = linalg::fit_slope(&x, &y) / log_base.ln();
    let tail = &entries[entries.len() - 3..];
    let converges = slope < 0.0 && tail.windows(2).all(|w| w[1].delta < w[0].delta);
    let slope_within_band = slope_band.map(|(lo, hi)| lo <= slope && slope <= hi);
    let verdict = if converges {
        "converges in generalised norm resolvent sense"
    } else {
        "not convergent"
    };
    Ok(GnrsVerdict {
        entries,
        log_base,
        slope,
        slope_band,
        slope_within_band,
        converges,
        verdict: verdict.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::FractalModel;
    use crate::identification::build_identification;

    #[test]
    fn norm_trivial_cases() {
        let w = [0.5, 2.0, 1.0];
        let id = linalg::identity(3);
        let n = weighted_operator_norm(&id, Metric::Diagonal(&w), Metric::Diagonal(&w)).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        let ones = [1.0; 3];
        let three = linalg::diag(&[3.0, 3.0, 3.0]);
        let n = weighted_operator_norm(&three, Metric::Diagonal(&ones), Metric::Diagonal(&ones)).unwrap();
        assert!((n - 3.0).abs() < 1e-14);
        assert!(matches!(
            weighted_operator_norm(&id, Metric::Diagonal(&[1.0, 0.0, 1.0]), Metric::Diagonal(&ones)),
            Err(QueError::Domain(_))
        ));
        assert!(matches!(
            weighted_operator_norm(&id, Metric::Dense(&Mat::zeros(3, 3)), Metric::Diagonal(&ones)),
            Err(QueError::Domain(_))
        ));
    }

    #[test]
    fn norm_of_first_prolongation() {
        let pair = build_identification(&FractalModel::interval(), 0, 1).unwrap();
        let n = weighted_operator_norm(
            &pair.j,
            Metric::mass(&pair.coarse),
            Metric::mass(&pair.fine),
        )
        .unwrap();
        // JᵀM₁J = [[3/8, 1/8], [1/8, 3/8]] against M₀ = I/2: eigenvalues 1 and 1/2
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dense_and_factored_metrics_agree() {
        let pair = build_identification(&FractalModel::gasket(), 1, 2).unwrap();
        let g = pair.fine.energy_gram();
        let a = &pair.j;
        let dense = weighted_operator_norm(a, Metric::mass(&pair.coarse), Metric::Dense(&g)).unwrap();
        let factored =
            weighted_operator_norm(a, Metric::mass(&pair.coarse), Metric::energy(&pair.fine).unwrap()).unwrap();
        assert!((dense - factored).abs() < 1e-12 * dense);
    }

    #[test]
    fn identity_pair_is_unitary() {
        let pair = IdentificationPair::identity(&FractalModel::interval(), 3).unwrap();
        let cert = certify(&pair).unwrap();
        let d = &cert.deltas;
        for v in [d.delta_a1, d.delta_a2, d.delta_b1, d.delta_b2, d.delta_bprime, d.delta_c1, d.delta_c2, d.delta_d] {
            assert!(v.abs() < 1e-13, "{d:?}");
        }
        assert!(cert.delta_total < 1e-13);
        let op = operator_level_certificate(&pair, &cert).unwrap();
        assert!(op.delta_d < 1e-13);
    }

    #[test]
    fn construction_identities() {
        for (model, m, fine) in [
            (FractalModel::interval(), 2, 6),
            (FractalModel::gasket(), 1, 3),
        ] {
            let pair = build_identification(&model, m, fine).unwrap();
            let cert = certify(&pair).unwrap();
            let d = &cert.deltas;
            assert!(d.delta_a2 <= 1e-12 && d.delta_c1 <= 1e-12 && d.delta_d <= 1e-11, "{d:?}");
            assert!(cert.delta_total >= d.delta_b1 && cert.delta_total >= cert.combined_b2());
            assert!(cert.delta_total <= cert.theoretical_bound.unwrap());
            let op = operator_level_certificate(&pair, &cert).unwrap();
            assert!(op.resolvent_ok && op.jp_ok, "{op:?}");
        }
    }

    #[test]
    fn conversions() {
        assert_eq!(delta_hat_from_delta(0.0).unwrap(), 0.0);
        assert!((delta_hat_from_delta(1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((delta_from_delta_hat(0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(delta_hat_from_delta(2.0).is_err());
        assert!(delta_from_delta_hat(1.0).is_err());
        for i in 1..=50 {
            let d = i as f64 / 100.0;
            let hat = delta_hat_from_delta(d).unwrap();
            if hat < 1.0 {
                assert!(delta_from_delta_hat(hat).unwrap() >= d);
            }
        }
    }

    #[test]
    fn b_combination_and_transitivity_arithmetic() {
        assert_eq!(combine_b_inequality(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((combine_b_inequality(0.1, 0.2, 0.05).unwrap() - 0.16).abs() < 1e-15);
        assert!(combine_b_inequality(-0.1, 0.0, 0.0).is_err());
        assert!((form_transitivity_bound(0.1, 0.2).unwrap() - 4.2).abs() < 1e-14);
        assert!((operator_transitivity_bound(0.1, 0.2).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(operator_transitivity_bound(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(form_transitivity_bound(1.5, 0.0), Err(QueError::Precondition(_))));
        assert!(matches!(operator_transitivity_bound(0.0, -0.1), Err(QueError::Precondition(_))));
    }

    #[test]
    fn identity_composition() {
        let model = FractalModel::gasket();
        let a = IdentificationPair::identity(&model, 1).unwrap();
        let ca = certify(&a).unwrap();
        let comp = compose(&a, &ca, &a, &ca).unwrap();
        assert!(comp.theoretical_bound < 1e-12);
        assert!(comp.certificate.delta_total < 1e-12);
    }

    #[test]
    fn verdicts() {
        let cert = |m: usize, delta: f64| QueCertificate {
            schema: CERT_SCHEMA.into(),
            model: Some(ModelKind::Interval),
            m,
            fine_level: m + 5,
            deltas: Deltas {
                delta_a1: 0.0,
                delta_a2: 0.0,
                delta_b1: delta,
                delta_b2: 0.0,
                delta_bprime: 0.0,
                delta_c1: 0.0,
                delta_c2: 0.0,
                delta_d: 0.0,
            },
            delta_total: delta,
            theoretical_bound: Some(theoretical_bound(ModelKind::Interval, m)),
            energy_bound_j: 1.0,
            energy_bound_jp1: 1.0,
            hypothesis_flags: vec![],
        };
        let v = gnrs_verdict(&[cert(1, 0.4), cert(2, 0.2), cert(3, 0.1)]).unwrap();
        assert!(v.converges && (v.slope + 1.0).abs() < 1e-12 && v.slope_within_band == Some(true));
        let v = gnrs_verdict(&[cert(1, 0.4), cert(2, 0.4), cert(3, 0.4)]).unwrap();
        assert!(!v.converges);
        assert_eq!(v.verdict, "not convergent");
        assert!(gnrs_verdict(&[cert(1, 0.4), cert(2, 0.2)]).is_err());

        let json = cert(2, 0.2).to_json();
        assert_eq!(QueCertificate::from_json(&json).unwrap(), cert(2, 0.2));
        assert!(QueCertificate::from_json(&json.replace("que-cert/1", "que-cert/0")).is_err());
    }
}
