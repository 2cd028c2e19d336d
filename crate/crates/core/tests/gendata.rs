use layerdebias::fixtures::{default_gendata, default_lexicon, default_pairs, default_template};
use layerdebias::gendata::{
    probe_experiment, separability_sweep, sweep_directions, text_layers, word_vector, GenData,
    InputSetting, ProbeConfig, WordLists, FEMALE, MALE,
};
use layerdebias::linalg::{dot, project_out, Direction};
use layerdebias::model::{LayeredModel, SyntheticConfig, SyntheticModel};
use layerdebias::neural::{train_conv_baseline, TrainConfig};
use layerdebias::subspace::{
    build_definition_pair, extract_independent, extract_iterative, DirectionSet, ExtractOptions,
    Projection,
};
use layerdebias::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64) -> SyntheticModel {
    let cfg = SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    };
    SyntheticModel::new(cfg, default_lexicon()).unwrap()
}

fn directions(m: &SyntheticModel, iterative: bool) -> DirectionSet {
    let pairs = default_pairs();
    let dp = build_definition_pair(m, &pairs, &default_template()).unwrap();
    if iterative {
        extract_iterative(m, &dp, &pairs.hash(), ExtractOptions::default()).unwrap()
    } else {
        extract_independent(m, &dp, 2, &pairs.hash(), ExtractOptions::default()).unwrap()
    }
}

#[test]
fn shipped_lists_have_table_counts() {
    let data = default_gendata();
    assert_eq!(data.train.counts(), [222, 222, 222]);
    assert_eq!(data.test.counts(), [404, 595, 5701]);
}

#[test]
fn load_errors() {
    assert!(WordLists::parse("", "empty").is_err());
    let text = "counts female=1 male=1 neutral=0\n[female]\nalex\n[male]\nalex\n";
    let err = WordLists::parse(text, "dup").unwrap_err().to_string();
    assert!(err.contains("alex"), "{err}");
    let text = "counts female=2 male=1 neutral=0\n[female]\nana\n[male]\nbob\n";
    match WordLists::parse(text, "short").unwrap_err() {
        Error::CountMismatch { observed, .. } => assert_eq!(observed, 1),
        e => panic!("{e}"),
    }
}

#[test]
fn i2_is_mean_with_sentinels() {
    let m = model(7);
    let layers = text_layers(&m, "queen", None).unwrap();
    for (j, l) in layers.iter().enumerate() {
        assert_eq!(l.vectors.len(), 3);
        let v = word_vector(&m, "queen", InputSetting::I2, j, None).unwrap();
        for i in 0..m.width() {
            let hand = (l.vectors[0][i] + l.vectors[1][i] + l.vectors[2][i]) / 3.0;
            assert_eq!(v[i], hand);
        }
        assert_eq!(
            word_vector(&m, "queen", InputSetting::I1, j, None).unwrap(),
            l.vectors[0]
        );
    }
}

#[test]
fn debiased_word_vectors_are_orthogonal() {
    let m = model(11);
    let dirs = directions(&m, true);
    for word in ["queen", "king", "table", "herself"] {
        for j in 0..=m.layer_count() {
            let p = dirs.primary(j).unwrap();
            for s in [InputSetting::I1, InputSetting::I2] {
                let v = word_vector(&m, word, s, j, Some(&dirs)).unwrap();
                let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
                assert!(
                    dot(&v, p.axis()).abs() <= 1e-9 * scale,
                    "{word} {s} layer {j}"
                );
            }
        }
    }
}

#[test]
fn separability_sweep_shape_and_planted_accuracy() {
    let m = model(7);
    let dirs = directions(&m, false);
    let data = default_gendata();
    let rows =
        separability_sweep(&m, &dirs, &data, &[1, 2], InputSetting::I2, Projection::Raw).unwrap();
    assert_eq!(rows.len(), (m.layer_count() + 1) * 2);
    let pc1 = rows.iter().find(|r| r.layer == 0 && r.pc == 1).unwrap();
    assert!(pc1.test_accuracy >= 0.95, "{}", pc1.test_accuracy);
    let again =
        separability_sweep(&m, &dirs, &data, &[1, 2], InputSetting::I2, Projection::Raw).unwrap();
    assert_eq!(rows, again);
    assert!(separability_sweep(
        &m,
        &directions(&m, true),
        &data,
        &[2],
        InputSetting::I2,
        Projection::Raw
    )
    .is_err());
}

/// Directions orthogonal to the planted axis carry no gender signal; on a
/// balanced test split their accuracy is binomial around one half.
#[test]
fn random_direction_is_at_chance() {
    let m = model(7);
    let full = default_gendata();
    let mut test = full.test.clone();
    test.male.truncate(test.female.len());
    test.neutral.clear();
    let data = GenData::new(full.train.clone(), test).unwrap();
    let n = (data.test.female.len() * 2) as f64;
    let sigma = (0.25 / n).sqrt();
    let g0 = Direction::new(m.planted_direction().to_vec(), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let raw: Vec<f64> = (0..m.width()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = Direction::from_vector(&project_out(&raw, &g0).unwrap(), 0.0).unwrap();
        let layer0 = [d];
        let rows = sweep_directions(
            &m,
            &[&layer0],
            &data,
            &[1],
            InputSetting::I2,
            Projection::Raw,
        )
        .unwrap();
        let acc = rows[0].test_accuracy;
        assert!(
            (acc - 0.5).abs() <= 3.0 * sigma,
            "accuracy {acc}, sigma {sigma}"
        );
    }
}

#[test]
fn planted_layer_probe_drops_after_debiasing() {
    let m = model(7);
    let dirs = directions(&m, true);
    let data = default_gendata();
    let grid = [ProbeConfig {
        setting: InputSetting::I2,
        layer: 0,
        way: 2,
    }];
    let cfg = TrainConfig::classifier().with_seed(1);
    let raw = probe_experiment(&m, &data, &grid, None, &cfg).unwrap();
    let deb = probe_experiment(&m, &data, &grid, Some(&dirs), &cfg).unwrap();
    assert!(raw[0].test_accuracy >= 0.9, "{}", raw[0].test_accuracy);
    assert!(deb[0].test_accuracy <= 0.65, "{}", deb[0].test_accuracy);
}

#[test]
fn three_way_reports_neutral_percentages() {
    let m = model(7);
    let data = default_gendata();
    let grid = ProbeConfig::grid(&[0, m.layer_count()], &[3]);
    assert_eq!(grid.len(), 4);
    let rows = probe_experiment(&m, &data, &grid, None, &TrainConfig::classifier()).unwrap();
    for r in &rows {
        for p in [
            r.neutral_misclassified_pct,
            r.misclassified_neutral_male_pct,
        ]
        .into_iter()
        .flatten()
        {
            assert!((0.0..=100.0).contains(&p));
        }
        assert!(r.neutral_misclassified_pct.is_some());
    }
}

#[test]
fn subword_baseline_beats_majority() {
    let m = model(7);
    let data = default_gendata();
    let pieces = |lists: &WordLists| -> Vec<(Vec<String>, usize)> {
        lists
            .female
            .iter()
            .map(|w| (w, FEMALE))
            .chain(lists.male.iter().map(|w| (w, MALE)))
            .map(|(w, y)| (m.word_pieces(w).unwrap(), y))
            .collect()
    };
    let (conv, _) =
        train_conv_baseline(&pieces(&data.train), 2, &TrainConfig::classifier()).unwrap();
    let test = pieces(&data.test);
    let majority = 595.0 / 999.0;
    assert!(conv.accuracy(&test) > majority, "{}", conv.accuracy(&test));
}
