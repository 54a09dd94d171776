use std::path::PathBuf;

use num_complex::Complex64;
use que_core::certify::{
    certify, compose, gnrs_verdict, operator_level_certificate, operator_transitivity_bound,
    OperatorCertificate,
};
use que_core::forms::{assemble, schur_compatibility_residual};
use que_core::identification::{build_identification, default_fine_level};
use que_core::obstacle::{delta_slope, sweep, ObstacleReport};
use que_core::spectral::{
    convergence_table, heat_comparison, heat_solution_comparison, interval_eigenvalue, projection_comparison,
    resolvent_comparison, BoundCheck, Reference, CLUSTER_TOL,
};
use que_core::{linalg, FormPencil, IdentificationPair, ModelKind, QueCertificate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cache::Cache;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, read_artifact, Check, Writer, OUTPUT_SCHEMA};
use crate::svg::{Plot, Series};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    /// Human-readable summary for stdout.
    pub lines: Vec<String>,
}

impl Outcome {
    fn finish(mut self, w: Writer) -> Self {
        self.files = w.written().to_vec();
        self
    }

    pub fn violations(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }
}

fn bound_check(name: String, b: &BoundCheck) -> Check {
    Check {
        name,
        measured: b.norm,
        bound: b.bound,
        ok: b.ok,
    }
}

fn fine_level(cfg: &RunConfig, m: usize) -> CliResult<usize> {
    let fine = cfg.fine.unwrap_or_else(|| default_fine_level(&cfg.fractal(), m));
    if fine <= m {
        return Err(CliError::key("fine", format!("fine level {fine} must exceed the coarse level {m}")));
    }
    Ok(fine)
}

fn pair_for(cfg: &RunConfig, m: usize) -> CliResult<(IdentificationPair, QueCertificate)> {
    let pair = build_identification(&cfg.fractal(), m, fine_level(cfg, m)?)?;
    let cert = certify(&pair)?;
    Ok((pair, cert))
}

pub fn build(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let m = cfg.level;
    let cached = Cache::locate(cfg).level(&model, m)?;
    let graph = cached.graph;
    let pencil = assemble(&graph);
    let mut checks = vec![
        Check::flag("total measure equals 1 exactly", {
            let t = graph.total_measure();
            *t.numer() == 1 && *t.denom() == 1
        }),
        Check::flag(
            "vertex count matches closed form",
            graph.len() == que_core::fractal::vertex_count(&model, m),
        ),
    ];
    if m > 0 {
        let r = schur_compatibility_residual(&model, m - 1)?;
        checks.push(Check::at_most(
            format!("schur complement of level {m} onto level {} (relative Frobenius)", m - 1),
            r,
            1e-12,
        ));
    }
    let name = format!("level-{}-{m}", model.name());
    w.json(
        &format!("{name}.json"),
        "level",
        &checks,
        json!({
            "model": model.name(),
            "level": m,
            "vertex_count": graph.len(),
            "edge_count": graph.edges.len(),
            "graph": graph.to_document(),
            "pencil": pencil.to_document(),
        }),
    )?;
    let lines = vec![format!(
        "{} level {m}: {} vertices, {} edges ({})",
        model.name(),
        graph.len(),
        graph.edges.len(),
        if cached.hit { "cached" } else { "built" }
    )];
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

/// Largest relative defect `|Ẽ(J¹f, g) − E(f, J'¹g)| / (‖f‖_{H¹} ‖g‖_{H¹})`
/// over random pairs.
pub fn spot_check_closeness(pair: &IdentificationPair, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let f: Vec<f64> = (0..pair.coarse_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..pair.fine_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = pair.fine.energy_bilinear(&linalg::mat_vec(&pair.j1, &f), &g);
        let rhs = pair.coarse.energy_bilinear(&f, &linalg::mat_vec(&pair.jp1, &g));
        let scale = pair.coarse.energy_norm(&f) * pair.fine.energy_norm(&g);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

fn certificate_checks(cfg: &RunConfig, cert: &QueCertificate, spot: f64) -> Vec<Check> {
    let (m, fine) = (cert.m, cert.fine_level);
    let mut checks = Vec::new();
    if let Some(b) = cert.theoretical_bound {
        checks.push(Check::at_most(format!("delta_total({m},{fine}) <= theoretical delta_{m}"), cert.delta_total, b));
    }
    checks.push(Check::at_most(
        format!("delta_d({m},{fine}) vanishes"),
        cert.deltas.delta_d,
        cfg.tolerance.delta_d,
    ));
    checks.push(Check::at_most(
        format!("random closeness spot checks ({m},{fine})"),
        spot,
        cfg.tolerance.delta_d,
    ));
    for flag in &cert.hypothesis_flags {
        checks.push(Check::flag(format!("({m},{fine}): {flag}"), false));
    }
    checks
}

pub fn certify_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let levels = if cfg.levels.is_empty() { vec![cfg.level] } else { cfg.levels.clone() };
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut certs = Vec::new();
    for &m in &levels {
        let (pair, cert) = pair_for(cfg, m)?;
        let spot = spot_check_closeness(&pair, cfg.spot_checks, cfg.seed);
        let checks = certificate_checks(cfg, &cert, spot);
        let d = &cert.deltas;
        let ok = checks.iter().all(|c| c.ok);
        rows.push(vec![
            m.to_string(),
            cert.fine_level.to_string(),
            num(d.delta_a1),
            num(d.delta_a2),
            num(d.delta_b1),
            num(d.delta_b2),
            num(d.delta_bprime),
            num(d.delta_c1),
            num(d.delta_c2),
            num(d.delta_d),
            num(cert.delta_total),
            cert.theoretical_bound.map(num).unwrap_or_default(),
            num(cert.energy_bound_j),
            num(cert.energy_bound_jp1),
            num(spot),
            ok.to_string(),
        ]);
        out.lines.push(format!(
            "{} ({m},{}) delta_total = {:.6e}, theoretical {} [{}]",
            model.name(),
            cert.fine_level,
            cert.delta_total,
            cert.theoretical_bound.map(|b| format!("{b:.6e}")).unwrap_or_else(|| "-".into()),
            if ok { "ok" } else { "VIOLATED" }
        ));
        w.json(
            &format!("certificate-{}-{m}-{}.json", model.name(), cert.fine_level),
            "certificate",
            &checks,
            json!({
                "certificate": cert,
                "spot_checks": { "count": cfg.spot_checks, "seed": cfg.seed, "max_relative_defect": spot },
            }),
        )?;
        out.checks.extend(checks);
        certs.push(cert);
    }
    let tag = levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("_");
    w.csv(
        &format!("certify-{}-{tag}.csv", model.name()),
        &[
            "m", "M", "delta_a1", "delta_a2", "delta_b1", "delta_b2", "delta_bprime", "delta_c1", "delta_c2",
            "delta_d", "delta_total", "theoretical_bound", "energy_bound_J1", "energy_bound_Jp1", "spot_check", "ok",
        ],
        &rows,
    )?;
    if certs.len() >= 3 {
        let verdict = gnrs_verdict(&certs)?;
        out.lines.push(format!("convergence verdict: {} (slope {:.3})", verdict.verdict, verdict.slope));
        let mut checks = vec![Check::flag("delta_m eventually decreasing", verdict.converges)];
        if let Some((lo, hi)) = verdict.slope_band {
            checks.push(Check::within("fitted log slope of delta_m", verdict.slope, lo, hi));
        }
        w.json(&format!("gnrs-{}-{tag}.json", model.name()), "gnrs", &checks, &verdict)?;
        out.checks.extend(checks);
    }
    Ok(out.finish(w))
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let m = cfg.level;
    let cached = Cache::locate(cfg).spectrum(&model, m)?;
    let values = cached.eigenvalues.unwrap_or_default();
    let count = cfg.spectrum_count.unwrap_or(values.len()).min(values.len());
    let values = &values[..count];
    let interval = model.kind == ModelKind::Interval;
    let top = values.last().copied().unwrap_or(0.0);
    let mut rows = Vec::with_capacity(count);
    let mut worst: f64 = 0.0;
    for (k, &l) in values.iter().enumerate() {
        let mut row = vec![k.to_string(), num(l)];
        if interval {
            let exact = interval_eigenvalue(m, k);
            worst = worst.max((l - exact).abs());
            row.push(num(exact));
            row.push(num((k as f64 * std::f64::consts::PI).powi(2)));
        }
        rows.push(row);
    }
    let mut checks = vec![];
    if let Some(&l0) = values.first() {
        checks.push(Check::at_most("lowest eigenvalue is 0", l0.abs(), cfg.tolerance.exact * (1.0 + top)));
    }
    if interval {
        checks.push(Check::at_most(
            "eigenvalues match the discrete closed form",
            worst,
            cfg.tolerance.exact * (1.0 + top),
        ));
    }
    let header: &[&str] = if interval {
        &["k", "eigenvalue", "discrete_closed_form", "continuum"]
    } else {
        &["k", "eigenvalue"]
    };
    let name = format!("spectrum-{}-{m}", model.name());
    w.csv(&format!("{name}.csv"), header, &rows)?;
    w.json(
        &format!("{name}.json"),
        "spectrum",
        &checks,
        json!({ "model": model.name(), "level": m, "eigenvalues": values }),
    )?;
    let head: Vec<String> = values.iter().take(6).map(|l| format!("{l:.6}")).collect();
    let lines = vec![format!("{} level {m}: {count} eigenvalues, lowest [{}]", model.name(), head.join(", "))];
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

pub fn converge(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let k = cfg.eigen_index;
    let levels = if cfg.levels.is_empty() {
        match model.kind {
            ModelKind::Interval => vec![3, 4, 5, 6, 7],
            ModelKind::Gasket => vec![1, 2, 3, 4],
        }
    } else {
        cfg.levels.clone()
    };
    let top = levels.iter().copied().max().unwrap_or(0);
    let reference = match (cfg.reference_level, model.kind) {
        (Some(r), _) => Reference::Finest(r),
        (None, ModelKind::Interval) => Reference::Analytic,
        (None, ModelKind::Gasket) => Reference::Finest((top + 2).min(model.max_level)),
    };
    if let Reference::Finest(r) = reference {
        if r <= top {
            return Err(CliError::key("reference_level", format!("reference level {r} must exceed every level in {levels:?}")));
        }
    }
    let table = convergence_table(&model, &levels, k, reference)?;
    let mut checks = Vec::new();
    if reference == Reference::Analytic {
        // λ_k(Δ_m) = 2·4^m (1 − cos(kπ/2^m)) undershoots (kπ)² by at most (kπ)⁴/(12·4^m)
        let c = (k as f64 * std::f64::consts::PI).powi(4) / 12.0;
        for r in &table.rows {
            checks.push(Check::at_most(
                format!("|lambda_{k}(level {}) - ({k} pi)^2| within discretization envelope", r.level),
                r.error,
                c * 4f64.powi(-(r.level as i32)) * (1.0 + 1e-9) + 1e-10,
            ));
        }
    } else {
        let decreasing = table.rows.windows(2).all(|p| p[1].error < p[0].error || p[1].error == 0.0);
        checks.push(Check::flag(format!("eigenvalue {k} error decreases with level"), decreasing));
    }
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                num(r.eigenvalue),
                num(r.reference),
                num(r.error),
                num(r.delta_bound),
                num(r.fitted_constant),
            ]
        })
        .collect();
    let name = format!("converge-{}-k{k}", model.name());
    w.csv(
        &format!("{name}.csv"),
        &["level", "eigenvalue", "reference", "error", "theoretical_delta", "fitted_constant"],
        &rows,
    )?;
    let reference_label = match reference {
        Reference::Analytic => "continuum eigenvalue".to_string(),
        Reference::Finest(r) => format!("level {r}"),
    };
    let plot = Plot {
        title: format!("{}: eigenvalue {k} error vs {reference_label}", model.name()),
        x_label: "level m".into(),
        y_label: "absolute error".into(),
        log_x: false,
        series: vec![
            Series::new("eigenvalue error", table.rows.iter().map(|r| (r.level as f64, r.error)).collect()),
            Series::new("theoretical delta_m", table.rows.iter().map(|r| (r.level as f64, r.delta_bound)).collect())
                .dashed(),
        ],
    };
    w.text(&format!("{name}.svg"), &plot.render(&w.meta))?;
    w.json(&format!("{name}.json"), "convergence", &checks, &table)?;
    let mut lines: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("level {}: lambda_{k} = {:.10}, error {:.3e}", r.level, r.eigenvalue, r.error))
        .collect();
    if let Some(s) = table.log_slope {
        lines.push(format!("log error slope per level: {s:.4}"));
    }
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

/// Windows isolating the two lowest eigenvalue clusters common to both spectra.
pub fn isolating_windows(coarse: &[f64], fine: &[f64]) -> Vec<[f64; 2]> {
    fn clusters(values: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in values {
            match out.last() {
                Some(&l) if (v - l).abs() <= CLUSTER_TOL * (1.0 + l.abs()) => {}
                _ => out.push(v),
            }
        }
        out
    }
    let (c, f) = (clusters(coarse), clusters(fine));
    let n = c.len().min(f.len());
    let mut windows = Vec::new();
    for k in 0..2.min(n.saturating_sub(1)) {
        let lo_k = c[k].min(f[k]);
        let hi_k = c[k].max(f[k]);
        let next = c[k + 1].min(f[k + 1]);
        if hi_k >= next {
            break;
        }
        let a = if k == 0 {
            -0.5
        } else {
            let prev = c[k - 1].max(f[k - 1]);
            if prev >= lo_k {
                break;
            }
            0.5 * (prev + lo_k)
        };
        windows.push([a, 0.5 * (hi_k + next)]);
    }
    windows
}

/// `max |e^{-tΔ}1 − 1|` through the eigendecomposition.
pub fn markov_defect(p: &FormPencil, t: f64) -> CliResult<f64> {
    let d = p.decomposition()?;
    let coeffs = linalg::mat_vec(&linalg::transpose(&d.eigenvectors), &p.mass);
    let scaled: Vec<f64> = coeffs.iter().zip(&d.eigenvalues).map(|(c, l)| c * (-t * l).exp()).collect();
    let u = linalg::mat_vec(&d.eigenvectors, &scaled);
    Ok(u.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max))
}

pub fn compare(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let (pair, cert) = pair_for(cfg, cfg.level)?;
    let (m, fine) = (pair.coarse_level, pair.fine_level);
    let delta = cert.delta_total;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut push = |kind: &str, parameter: String, b: &BoundCheck, checks: &mut Vec<Check>| {
        rows.push(vec![
            kind.to_string(),
            parameter.clone(),
            num(b.norm),
            num(b.constant),
            num(b.bound),
            b.ok.to_string(),
        ]);
        checks.push(bound_check(format!("{kind} {parameter}"), b));
    };
    for z in &cfg.z_points {
        let z = Complex64::new(z[0], z[1]);
        let r = resolvent_comparison(&pair, &cert, z)?;
        push("resolvent", format!("z={}{:+}i", z.re, z.im), &r.check, &mut checks);
    }
    for &t in &cfg.times {
        let h = heat_comparison(&pair, &cert, t, cfg.theta)?;
        push("heat", format!("t={t}"), &h, &mut checks);
        for (which, p) in [("coarse", &*pair.coarse), ("fine", &*pair.fine)] {
            checks.push(Check::at_most(
                format!("heat semigroup preserves constants ({which}, t={t})"),
                markov_defect(p, t)?,
                cfg.tolerance.exact,
            ));
        }
    }
    if !cfg.times.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let u0: Vec<f64> = (0..pair.fine_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for r in heat_solution_comparison(&pair, &cert, &u0, &cfg.times, cfg.theta)? {
            let b = BoundCheck {
                norm: r.error,
                constant: r.bound / (delta * pair.fine.norm(&u0)),
                bound: r.bound,
                ok: r.ok,
            };
            push("heat_trajectory", format!("t={}", r.t), &b, &mut checks);
        }
    }
    let windows = if cfg.windows.is_empty() {
        let coords = pair.eigen_coordinates()?;
        isolating_windows(&coords.coarse_values, &coords.fine_values)
    } else {
        cfg.windows.clone()
    };
    for win in &windows {
        let p = projection_comparison(&pair, &cert, win[0], win[1])?;
        let parameter = format!("({},{}) eps={}", win[0], win[1], p.eps);
        push("projection_transfer", parameter.clone(), &p.transfer, &mut checks);
        push("projection_sandwich", parameter, &p.sandwich, &mut checks);
    }
    let name = format!("compare-{}-{m}-{fine}", model.name());
    w.csv(&format!("{name}.csv"), &["kind", "parameter", "measured", "constant", "bound", "ok"], &rows)?;
    w.json(
        &format!("{name}.json"),
        "comparison",
        &checks,
        json!({ "model": model.name(), "m": m, "M": fine, "delta_total": delta, "theta": cfg.theta, "windows": windows }),
    )?;
    let failed = checks.iter().filter(|c| !c.ok).count();
    let lines = vec![format!(
        "{} ({m},{fine}): {} comparisons, {failed} violated, delta_total = {delta:.6e}",
        model.name(),
        checks.len()
    )];
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

#[derive(Serialize)]
struct ComposeStep {
    first: (usize, usize),
    second: (usize, usize),
    delta_first: f64,
    delta_second: f64,
    delta_composed: f64,
    form_bound: f64,
    operator_first: OperatorCertificate,
    operator_second: OperatorCertificate,
    operator_composed: OperatorCertificate,
    operator_bound: f64,
    hypothesis_flags: Vec<String>,
}

pub fn compose_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let model = cfg.fractal();
    let chain = if cfg.chain.is_empty() {
        match model.kind {
            ModelKind::Interval => vec![2, 4, 8],
            ModelKind::Gasket => vec![1, 2, 4],
        }
    } else {
        cfg.chain.clone()
    };
    if chain.len() < 3 {
        return Err(CliError::key("chain", "a chain needs at least three levels"));
    }
    let mut pairs = Vec::new();
    for l in chain.windows(2) {
        let pair = build_identification(&model, l[0], l[1])?;
        let cert = certify(&pair)?;
        pairs.push((pair, cert));
    }
    let mut pairs = pairs.into_iter();
    let (mut acc, mut acc_cert) = pairs.next().expect("chain has pairs");
    let mut steps = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (next, next_cert) in pairs {
        let c = compose(&acc, &acc_cert, &next, &next_cert)?;
        let op_first = operator_level_certificate(&acc, &acc_cert)?;
        let op_second = operator_level_certificate(&next, &next_cert)?;
        let op_comp = operator_level_certificate(&c.pair, &c.certificate)?;
        let op_bound = operator_transitivity_bound(op_first.delta_total, op_second.delta_total)?;
        let label = format!("{}->{}->{}", acc.coarse_level, acc.fine_level, next.fine_level);
        checks.push(Check::at_most(
            format!("composed delta {label} <= 14(delta + delta~)"),
            c.certificate.delta_total,
            c.theoretical_bound * (1.0 + 1e-8),
        ));
        checks.push(Check::at_most(
            format!("composed operator delta {label} <= 5 delta + 5 delta~"),
            op_comp.delta_total,
            op_bound * (1.0 + 1e-8),
        ));
        for f in &c.hypothesis_flags {
            checks.push(Check::flag(format!("{label}: {f}"), false));
        }
        rows.push(vec![
            label.clone(),
            num(acc_cert.delta_total),
            num(next_cert.delta_total),
            num(c.certificate.delta_total),
            num(c.theoretical_bound),
            num(op_first.delta_total),
            num(op_second.delta_total),
            num(op_comp.delta_total),
            num(op_bound),
        ]);
        lines.push(format!(
            "{label}: composed delta {:.6e} vs 14(delta+delta~) = {:.6e}; operator {:.6e} vs {:.6e}",
            c.certificate.delta_total, c.theoretical_bound, op_comp.delta_total, op_bound
        ));
        steps.push(ComposeStep {
            first: (acc.coarse_level, acc.fine_level),
            second: (next.coarse_level, next.fine_level),
            delta_first: acc_cert.delta_total,
            delta_second: next_cert.delta_total,
            delta_composed: c.certificate.delta_total,
            form_bound: c.theoretical_bound,
            operator_first: op_first,
            operator_second: op_second,
            operator_composed: op_comp,
            operator_bound: op_bound,
            hypothesis_flags: c.hypothesis_flags.clone(),
        });
        acc = c.pair;
        acc_cert = c.certificate;
    }
    let tag = chain.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("_");
    let name = format!("compose-{}-{tag}", model.name());
    w.csv(
        &format!("{name}.csv"),
        &[
            "chain", "delta", "delta_tilde", "delta_composed", "form_bound", "operator_delta", "operator_delta_tilde",
            "operator_delta_composed", "operator_bound",
        ],
        &rows,
    )?;
    w.json(&format!("{name}.json"), "composition", &checks, json!({ "model": model.name(), "chain": chain, "steps": steps }))?;
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

pub fn obstacle(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let o = &cfg.obstacle;
    let mut all: Vec<ObstacleReport> = Vec::new();
    let mut slopes = Vec::new();
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    let mut series = Vec::new();
    for &n in &o.grid_sizes {
        let radii: Vec<f64> = o.radii.iter().map(|r| r / n as f64).collect();
        let center = o.center.unwrap_or(n / 2);
        let reports = sweep(n, center, &radii, o.alpha)?;
        let slope = delta_slope(&reports);
        for r in &reports {
            checks.push(Check::at_most(
                format!("N={n} eps={}: closeness <= C_ext C_ell delta", r.eps),
                r.closeness,
                r.closeness_bound,
            ));
            checks.push(Check::at_most(
                format!("N={n} eps={}: |C_ell - 1|", r.eps),
                (r.c_ell_reg - 1.0).abs(),
                cfg.tolerance.exact,
            ));
        }
        let [lo, hi] = cfg.tolerance.obstacle_slope;
        checks.push(Check::within(format!("N={n}: delta vs eps log-log slope (1D analogue)"), slope, lo, hi));
        let c_ext: Vec<f64> = reports.iter().map(|r| r.c_ext).collect();
        let spread = c_ext.iter().copied().fold(0.0, f64::max) / c_ext.iter().copied().fold(f64::INFINITY, f64::min);
        lines.push(format!("N={n}: delta slope {slope:.4}, C_ext max/min {spread:.3}"));
        slopes.push(json!({ "grid_size": n, "center": center, "slope": slope, "c_ext_spread": spread }));
        series.push(Series::new(format!("delta, N={n}"), reports.iter().map(|r| (r.eps, r.delta)).collect()));
        if let Some(first) = reports.first() {
            let c = first.delta / first.eps.sqrt();
            series.push(
                Series::new(format!("eps^(1/2), N={n}"), reports.iter().map(|r| (r.eps, c * r.eps.sqrt())).collect())
                    .dashed(),
            );
        }
        all.extend(reports);
    }
    let rows: Vec<Vec<String>> = all
        .iter()
        .map(|r| {
            vec![
                r.grid_size.to_string(),
                num(r.eps),
                num(r.alpha),
                num(r.delta),
                num(r.c_ext),
                num(r.c_ell_reg),
                num(r.closeness),
                num(r.closeness_bound),
                r.ok.to_string(),
            ]
        })
        .collect();
    w.csv(
        "obstacle.csv",
        &["grid_size", "eps", "alpha", "delta_measured", "C_ext", "C_ell_reg", "closeness_measured", "bound", "ok"],
        &rows,
    )?;
    let plot = Plot {
        title: "circle with one obstacle: measure smallness (1D analogue)".into(),
        x_label: "obstacle radius eps".into(),
        y_label: "delta".into(),
        log_x: true,
        series,
    };
    w.text("obstacle.svg", &plot.render(&w.meta))?;
    w.json("obstacle.json", "obstacle", &checks, json!({ "reports": all, "sweeps": slopes, "analogue": "1D circle" }))?;
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}

pub const REPORT_NOTE: &str = "Limit-space statements are checked against the finest computed level, \
which stands in for the continuum. The gap between that proxy and the limit is controlled by composing \
certificates: a pair certified against a finer level plus the certificate of that finer level against \
the limit yields a bound for the pair against the limit.";

pub fn report(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut w = Writer::new(cfg)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&cfg.out)
        .map_err(|e| CliError::io(&cfg.out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != "report.json"))
        .collect();
    paths.sort();
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    for path in &paths {
        let Some(a) = read_artifact(path)? else { continue };
        let file = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        let failed: Vec<&Check> = a.checks.iter().filter(|c| !c.ok).collect();
        entries.push(json!({
            "file": file,
            "kind": a.kind,
            "config_hash": a.meta.config_hash,
            "seed": a.meta.seed,
            "checks": a.checks.len(),
            "failed": failed.len(),
        }));
        checks.extend(a.checks.iter().map(|c| Check {
            name: format!("{file}: {}", c.name),
            ..c.clone()
        }));
    }
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
    let mut md = String::from("# que report\n\n");
    md.push_str(&format!("schema: {OUTPUT_SCHEMA}, config hash: {}, seed: {}\n\n", w.meta.config_hash, w.meta.seed));
    if entries.is_empty() {
        md.push_str("No artifacts found.\n");
    } else {
        md.push_str(&format!(
            "{} artifacts, {} checks, {} violated.\n\n| file | kind | checks | failed |\n|---|---|---|---|\n",
            entries.len(),
            checks.len(),
            failed.len()
        ));
        for e in &entries {
            md.push_str(&format!("| {} | {} | {} | {} |\n", e["file"].as_str().unwrap_or(""), e["kind"].as_str().unwrap_or(""), e["checks"], e["failed"]));
        }
        if !failed.is_empty() {
            md.push_str("\n## Violations\n\n");
            for c in &failed {
                md.push_str(&format!("- {}: measured {:e}, bound {:e}\n", c.name, c.measured, c.bound));
            }
        }
        md.push_str(&format!("\n## Reference levels\n\n{REPORT_NOTE}\n"));
    }
    w.text("report.md", &md)?;
    w.json(
        "report.json",
        "report",
        &[],
        json!({ "artifacts": entries, "violations": failed, "reference_levels": REPORT_NOTE }),
    )?;
    let lines = vec![format!("{} artifacts, {} checks, {} violated", entries.len(), checks.len(), failed.len())];
    Ok(Outcome {
        checks,
        lines,
        ..Default::default()
    }
    .finish(w))
}
