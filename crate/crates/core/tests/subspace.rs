use layerdebias::fixtures::{default_lexicon, default_pairs, default_template, FIXTURE_SEEDS};
use layerdebias::linalg::{dot, norm};
use layerdebias::model::{LayeredModel, SyntheticConfig, SyntheticModel};
use layerdebias::subspace::{
    build_definition_pair, cosine_report, extract_independent, extract_iterative, DirectionSet,
    ExtractOptions, PositionPolicy,
};

fn model(seed: u64) -> SyntheticModel {
    let cfg = SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    };
    SyntheticModel::new(cfg, default_lexicon()).unwrap()
}

#[test]
fn iterative_recovers_planted_direction_on_every_seed() {
    let pairs = default_pairs();
    for seed in FIXTURE_SEEDS {
        let m = model(seed);
        let dp = build_definition_pair(&m, &pairs, &default_template()).unwrap();
        assert_eq!(dp.pair_positions.len(), 11);
        let set = extract_iterative(&m, &dp, &pairs.hash(), ExtractOptions::default()).unwrap();
        let c = dot(set.primary(0).unwrap().axis(), m.planted_direction()).abs();
        assert!(c >= 0.95, "seed {seed}: {c}");
    }
}

#[test]
fn both_policies_give_unit_directions_per_layer() {
    let m = model(7);
    let pairs = default_pairs();
    let dp = build_definition_pair(&m, &pairs, &default_template()).unwrap();
    for positions in [PositionPolicy::PairsOnly, PositionPolicy::All] {
        for center in [false, true] {
            let opts = ExtractOptions { positions, center };
            let sets = [
                extract_independent(&m, &dp, 2, &pairs.hash(), opts).unwrap(),
                extract_iterative(&m, &dp, &pairs.hash(), opts).unwrap(),
            ];
            for set in &sets {
                assert_eq!(set.layers.len(), m.layer_count() + 1);
                set.validate().unwrap();
                for l in &set.layers {
                    assert!((norm(l.directions[0].axis()) - 1.0).abs() <= 1e-9);
                }
                let back = DirectionSet::parse(&set.to_text(), "mem").unwrap();
                assert_eq!(&back, set);
            }
        }
    }
}

#[test]
fn iterative_curve_drops_below_independent() {
    let m = model(7);
    let pairs = default_pairs();
    let dp = build_definition_pair(&m, &pairs, &default_template()).unwrap();
    let opts = ExtractOptions::default();
    let a = extract_independent(&m, &dp, 2, &pairs.hash(), opts).unwrap();
    let b = extract_iterative(&m, &dp, &pairs.hash(), opts).unwrap();
    let rows = cosine_report(Some(&a), Some(&b)).unwrap();
    assert_eq!(rows[0].iterative, Some(1.0));
    for r in &rows[1..] {
        assert!(
            r.iterative.unwrap().abs() < r.pc1.unwrap().abs(),
            "layer {}",
            r.layer
        );
    }
}

#[test]
fn dropping_pairs_reshapes_the_definition() {
    let m = model(7);
    let swapped = default_pairs()
        .with_dropped(&["queen".to_string()])
        .unwrap();
    assert_eq!(swapped.len(), 11);
    assert!(swapped.active().any(|(f, _)| f == "mary"));
    let pairs = default_pairs()
        .with_dropped(&["queen".to_string(), "john".to_string()])
        .unwrap();
    assert_eq!(pairs.len(), 10);
    assert!(build_definition_pair(&m, &pairs, &default_template()).is_err());
    let template = "<0> and <1> saw <2> <3> <4> <5> <6> <7> <8> <9>";
    let dp = build_definition_pair(&m, &pairs, template).unwrap();
    assert_eq!(dp.pair_positions.len(), 10);
}
