use proptest::prelude::*;
use wold_factor::io::{read_model, write_model};
use wold_factor::pipeline::{factorize, RunConfig};
use wold_factor::simulate::{ma_sample_path, random_mixture_spec, round_trip, SimulationConfig};
use wold_factor::spectra::{density_from_ma, FrequencyGrid};
use wold_factor::wold::{predict, recover_noise};

fn gap(a: &wold_factor::CMatrix, b: &wold_factor::CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mixture_specs_round_trip(seed in 0u64..10_000, d in 1usize..4, q in 0usize..4) {
        let spec = random_mixture_spec(seed, d, q).unwrap();
        let report = round_trip(&spec, &RunConfig::with_grid(512)).unwrap();
        prop_assert!(report.completed);
        prop_assert!(report.residual.unwrap() <= 1e-6, "residual {:?}", report.residual);
        prop_assert!(report.sigma_gap.unwrap() <= 1e-6);
        prop_assert!(report.unitary_defect.unwrap() <= 1e-10);
    }
}

#[test]
fn model_file_preserves_predictions() {
    let spec = random_mixture_spec(5, 2, 2).unwrap();
    let f = density_from_ma(&spec, FrequencyGrid::new(256).unwrap()).unwrap();
    let model = factorize(&f, &RunConfig::with_grid(256)).unwrap().model.unwrap();
    let text = write_model(&model, serde_json::json!({}), serde_json::json!({})).unwrap();
    let back = read_model(&text).unwrap();
    assert_eq!(back.rank, model.rank);
    assert_eq!(back.b.len(), model.b.len());

    let path = ma_sample_path(&spec, &SimulationConfig::new(400, 11)).unwrap();
    let a = predict(&model, &recover_noise(&model, &path).unwrap(), 4).unwrap();
    let b = predict(&back, &recover_noise(&back, &path).unwrap(), 4).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).norm() < 1e-12);
    }
    assert!(gap(&a.error_covariances[3], &b.error_covariances[3]) < 1e-12);
    assert!(gap(&a.error_covariances[0], &model.sigma) < 1e-12);
}

#[test]
fn predictions_vanish_past_the_ma_order() {
    let spec = random_mixture_spec(9, 3, 2).unwrap();
    let f = density_from_ma(&spec, FrequencyGrid::new(256).unwrap()).unwrap();
    let model = factorize(&f, &RunConfig::with_grid(256)).unwrap().model.unwrap();
    let path = ma_sample_path(&spec, &SimulationConfig::new(300, 2)).unwrap();
    let p = predict(&model, &recover_noise(&model, &path).unwrap(), 5).unwrap();
    assert!(p.values[3].norm() < 1e-6 && p.values[4].norm() < 1e-6);
    let total = spec.covariance(0);
    assert!(gap(&p.error_covariances[4], &total) < 1e-6);
}
