use isingml::pipeline::{train_method, HyperParam, Preprocessing};
use isingml::{
    build_multiclass_problem, ensemble_average, exhaustive_solve, LabeledDataset, Method,
    MethodSettings, ReductionSpec, SyntheticSpec,
};

#[test]
fn csv_round_trip_through_file() {
    let data = SyntheticSpec::multiclass_axes(3, 4, 2.0, 10).unwrap().generate(2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    data.write_csv_path(&path).unwrap();
    let back = LabeledDataset::read_csv_path(&path).unwrap();
    assert_eq!(back.labels(), data.labels());
    assert_eq!(back.class_names(), data.class_names());
    assert_eq!(back.features(), data.features());
}

#[test]
fn exhaustive_weights_classify_training_data() {
    let data = SyntheticSpec::two_class_shift(6, 1.5, 40).unwrap().generate(3).unwrap();
    let pre = Preprocessing::fit(&data, &ReductionSpec::None).unwrap();
    let z = pre.apply(&data).unwrap();
    let built = build_multiclass_problem(&z).unwrap();
    let problem = built.problem.scale_to_unit().unwrap();
    let result = exhaustive_solve(&problem).unwrap();
    let avg = ensemble_average(&problem, &result, 5).unwrap();
    let w = built.layout.to_weight_matrix(&avg).unwrap();
    let correct = (0..z.n_samples())
        .filter(|&i| {
            let score = w.row(0).dot(&z.features().row(i));
            (score > 0.0) == (z.labels()[i] == 0)
        })
        .count();
    assert!(correct as f64 / z.n_samples() as f64 > 0.9);
}

#[test]
fn every_method_trains_on_a_three_class_task() {
    let data = SyntheticSpec::multiclass_axes(3, 4, 3.0, 30).unwrap().generate(4).unwrap();
    let pre = Preprocessing::fit(&data, &ReductionSpec::None).unwrap();
    let z = pre.apply(&data).unwrap();
    let mut settings = MethodSettings::default();
    settings.sa.restarts = 20;
    settings.sa.sweeps = 100;
    for method in Method::ALL {
        let hp = match method {
            Method::Sa => HyperParam::BetaFinal(1.0),
            Method::Rbm => HyperParam::Epochs(200),
            Method::Ridge => HyperParam::Lambda(0.1),
            _ => HyperParam::None,
        };
        let model = train_method(method, &z, &hp, &settings, 9).unwrap();
        let metrics = model.evaluate(&z).unwrap();
        assert!(metrics.balanced_accuracy > 0.8, "{method}: {metrics:?}");
    }
}
