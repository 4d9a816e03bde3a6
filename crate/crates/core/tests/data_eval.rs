mod common;

use common::*;
use proptest::prelude::*;
use scmgen::data::{
    covariance_from_segment, generate_synthetic_dataset, matrix_norm, read_dataset, scale_by_norm, write_dataset,
    Label, NormKind, Segment, SynthConfig,
};
use scmgen::eval::{evaluate_generated, fit_mdm, read_flat, read_mdm, write_flat, write_mdm};
use scmgen::spd::{eig_sym, SymMatrix};

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        bands: 3,
        trials_per_class: 30,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn covariance_of_a_known_segment() {
    let seg = Segment::new(2, 3, vec![1.0, 2.0, 3.0, 0.0, 1.0, -1.0]).unwrap();
    let c = covariance_from_segment(&seg);
    assert_eq!(c.matrix.as_slice(), &[14.0, -1.0, -1.0, 2.0]);
    assert!(!c.rank_deficient);
    let short = Segment::new(3, 2, vec![1.0; 6]).unwrap();
    assert!(covariance_from_segment(&short).rank_deficient);
}

#[test]
fn norms_of_a_known_matrix() {
    let s = SymMatrix::from_row_major(2, vec![3.0, 0.0, 0.0, -4.0]).unwrap();
    assert_eq!(matrix_norm(&s, NormKind::Spectral).unwrap(), 4.0);
    assert_eq!(matrix_norm(&s, NormKind::Frobenius).unwrap(), 5.0);
    assert!(scale_by_norm(&SymMatrix::zeros(2), NormKind::Spectral).is_err());
}

#[test]
fn synthetic_dataset_is_frozen() {
    let d = generate_synthetic_dataset(&SynthConfig {
        bands: 3,
        trials_per_class: 50,
        ..SynthConfig::default()
    })
    .unwrap();
    assert_eq!(d.len(), 300);
    assert_eq!(d.channel_names(), ["C3", "FC3", "Cz", "FC4", "C4"]);
    let e = eig_sym(&d.samples()[0].matrix).unwrap();
    let expected = [1.0, 0.6766, 0.5115, 0.2062, 0.1057];
    for (a, b) in e.eigenvalues().iter().zip(expected) {
        assert!((a - b).abs() < 5e-5, "{a} vs {b}");
    }
}

#[test]
fn synthetic_classes_differ_on_their_hemisphere() {
    let d = generate_synthetic_dataset(&small_synth(3)).unwrap();
    let mean_diag = |label, band| {
        let mut acc = vec![0.0; 5];
        for s in d.samples_for(label, band) {
            for (a, v) in acc.iter_mut().zip(s.matrix.diagonal()) {
                *a += v;
            }
        }
        acc
    };
    let left = mean_diag(Label::Left, 1);
    let right = mean_diag(Label::Right, 1);
    assert!(left[4] > 2.0 * left[0] && right[0] > 2.0 * right[4]);
    for s in d.samples() {
        assert!((matrix_norm(&s.matrix, NormKind::Spectral).unwrap() - 1.0).abs() < 1e-12);
        assert!(s.spd().is_ok());
    }
}

#[test]
fn dataset_round_trips_bit_exactly() {
    let d = generate_synthetic_dataset(&small_synth(4)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&d, &mut buf).unwrap();
    assert_eq!(read_dataset(buf.as_slice()).unwrap(), d);
    let mut again = Vec::new();
    write_dataset(&d, &mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn malformed_dataset_is_rejected() {
    let d = generate_synthetic_dataset(&SynthConfig {
        trials_per_class: 1,
        bands: 1,
        discriminative_bands: vec![0],
        ..SynthConfig::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_dataset(&d, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
    assert!(read_dataset(truncated.as_bytes()).is_err());
    let bad = text.replacen("\"band\":0", "\"band\":5", 1);
    assert!(read_dataset(bad.as_bytes()).is_err());
    assert!(read_dataset("not json\n".as_bytes()).is_err());
}

#[test]
fn mdm_separates_held_out_trials_and_round_trips() {
    let train = generate_synthetic_dataset(&small_synth(5)).unwrap();
    let test = generate_synthetic_dataset(&small_synth(6)).unwrap();
    let model = fit_mdm(&train).unwrap();
    assert!(model.classify_trials(&test).unwrap().accuracy() >= 0.9);

    let mut buf = Vec::new();
    write_mdm(&model, &mut buf).unwrap();
    let back = read_mdm(buf.as_slice()).unwrap();
    for label in Label::ALL {
        for band in 0..3 {
            let (a, b) = (model.mean(label, band).unwrap(), back.mean(label, band).unwrap());
            assert_eq!(a.as_sym(), b.as_sym());
        }
    }
}

#[test]
fn evaluating_real_data_against_itself() {
    let real = generate_synthetic_dataset(&small_synth(8)).unwrap();
    let model = fit_mdm(&real).unwrap();
    let r = evaluate_generated(&model, &real, &real).unwrap();
    assert!(r.is_consistent());
    assert_eq!(r.sample_count, 60);
    assert!(r.mean_distance < 1e-8);
    assert_eq!(r.accuracy, r.real_accuracy);
    assert!(r.real_inter_class_distance > 1.0);
    assert_eq!(r.band_distances.len(), 6);
}

#[test]
fn flat_export_rows_and_standardization() {
    let d = generate_synthetic_dataset(&small_synth(9)).unwrap();
    let mut buf = Vec::new();
    let rows = write_flat(&[&d, &d], true, &mut buf).unwrap();
    assert_eq!(rows, 2 * d.len());
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("provenance\tclass\tband\ttrial\ts0_0\ts0_1"));
    let back = read_flat(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows);
    for r in &back {
        let n = r.entries.len() as f64;
        let mean = r.entries.iter().sum::<f64>() / n;
        let var = r.entries.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }
    let mut raw = Vec::new();
    write_flat(&[&d], false, &mut raw).unwrap();
    let raw = read_flat(raw.as_slice()).unwrap();
    assert_eq!(raw[0].entries, d.samples()[0].matrix.as_slice());
    assert_eq!((raw[0].label, raw[0].band, raw[0].trial), (d.samples()[0].label, 0, 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_by_norm_ignores_positive_scale(seed in any::<u64>(), n in 2usize..8, c in 1e-3f64..1e3) {
        let s = random_spd(&mut rng(seed), n);
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            let a = scale_by_norm(s.as_sym(), kind).unwrap();
            let b = scale_by_norm(&s.as_sym().scale(c), kind).unwrap();
            prop_assert!(rel_frobenius(&b, &a) < 1e-12);
            prop_assert!((matrix_norm(&a, kind).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
