use faer::Mat;
use proptest::prelude::*;
use que_core::certify::{certify, weighted_operator_norm, Metric};
use que_core::forms::{assemble, harmonic_extension, hoelder_check};
use que_core::fractal::{build_level, cell_of, Word};
use que_core::identification::build_identification;
use que_core::{linalg, FractalModel, LevelGraph, Point, QueCertificate};

fn model(gasket: bool) -> FractalModel {
    if gasket {
        FractalModel::gasket()
    } else {
        FractalModel::interval()
    }
}

fn matrix(rows: usize, cols: usize, entries: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| entries[i * cols + j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interval_cells_match_binary_expansion(letters in prop::collection::vec(1u8..=2, 0..12)) {
        let m = letters.len() as u32;
        let left: i64 = letters
            .iter()
            .enumerate()
            .map(|(i, &l)| (l as i64 - 1) << (m - 1 - i as u32))
            .sum();
        let den = 1i64 << m;
        let cell = cell_of(&FractalModel::interval(), &Word::new(&FractalModel::interval(), &letters).unwrap()).unwrap();
        prop_assert_eq!(cell.corners, vec![Point::line(left, den), Point::line(left + 1, den)]);
    }

    #[test]
    fn weighted_norm_is_homogeneous(
        entries in prop::collection::vec(-3.0f64..3.0, 12),
        dom in prop::collection::vec(0.1f64..4.0, 3),
        cod in prop::collection::vec(0.1f64..4.0, 4),
        s in -5.0f64..5.0,
    ) {
        let a = matrix(4, 3, &entries);
        let base = weighted_operator_norm(&a, Metric::Diagonal(&dom), Metric::Diagonal(&cod)).unwrap();
        let scaled = weighted_operator_norm(&(&a * faer::Scale(s)), Metric::Diagonal(&dom), Metric::Diagonal(&cod)).unwrap();
        prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + base * s.abs()));
    }

    #[test]
    fn weighted_norm_dominates_every_ratio(
        entries in prop::collection::vec(-3.0f64..3.0, 12),
        dom in prop::collection::vec(0.1f64..4.0, 3),
        cod in prop::collection::vec(0.1f64..4.0, 4),
        x in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let a = matrix(4, 3, &entries);
        let norm = weighted_operator_norm(&a, Metric::Diagonal(&dom), Metric::Diagonal(&cod)).unwrap();
        let ax = linalg::mat_vec(&a, &x);
        let top = linalg::weighted_dot(&cod, &ax, &ax).sqrt();
        let bottom = linalg::weighted_dot(&dom, &x, &x).sqrt();
        prop_assume!(bottom > 1e-6);
        prop_assert!(top <= norm * bottom * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn weighted_norm_is_submultiplicative(
        a in prop::collection::vec(-2.0f64..2.0, 9),
        b in prop::collection::vec(-2.0f64..2.0, 9),
        w in prop::collection::vec(0.2f64..3.0, 9),
    ) {
        let (a, b) = (matrix(3, 3, &a), matrix(3, 3, &b));
        let (u, v, z) = (&w[0..3], &w[3..6], &w[6..9]);
        let norm = |m: &Mat<f64>, d: &[f64], c: &[f64]| {
            weighted_operator_norm(m, Metric::Diagonal(d), Metric::Diagonal(c)).unwrap()
        };
        let lhs = norm(&(&b * &a), u, z);
        prop_assert!(lhs <= norm(&a, u, v) * norm(&b, v, z) * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn harmonic_extension_preserves_energy(
        gasket in any::<bool>(),
        level in 0usize..3,
        seed in prop::collection::vec(-1.0f64..1.0, 42),
    ) {
        let model = model(gasket);
        let coarse = assemble(&build_level(&model, level).unwrap());
        let fine = assemble(&build_level(&model, level + 1).unwrap());
        let f = &seed[..coarse.dim()];
        let g = harmonic_extension(&model, level, f).unwrap();
        let (e, eg) = (coarse.energy(f), fine.energy(&g));
        prop_assert!((e - eg).abs() <= 1e-12 * (1.0 + e));
    }

    #[test]
    fn hoelder_estimate_holds(
        gasket in any::<bool>(),
        values in prop::collection::vec(-1.0f64..1.0, 15),
        x in 0usize..9,
        y in 0usize..9,
    ) {
        let model = model(gasket);
        let pencil = assemble(&build_level(&model, if gasket { 2 } else { 3 }).unwrap());
        prop_assume!(x != y);
        let u = &values[..pencil.dim()];
        prop_assert!(hoelder_check(&pencil, u, x, y).unwrap().ok);
    }
}

#[test]
fn level_graphs_roundtrip_through_json() {
    for (model, top) in [(FractalModel::interval(), 5), (FractalModel::gasket(), 3)] {
        for m in 0..=top {
            let g = build_level(&model, m).unwrap();
            let back = LevelGraph::from_json(&g.to_json()).unwrap();
            assert_eq!(back, g);
            assert_eq!(back.to_json(), g.to_json());
        }
    }
}

#[test]
fn certificates_roundtrip_through_json() {
    let pair = build_identification(&FractalModel::gasket(), 1, 3).unwrap();
    let cert = certify(&pair).unwrap();
    let back = QueCertificate::from_json(&cert.to_json()).unwrap();
    assert_eq!(back, cert);
    let tampered = cert.to_json().replace("que-cert/1", "que-cert/0");
    assert!(QueCertificate::from_json(&tampered).is_err());
}
