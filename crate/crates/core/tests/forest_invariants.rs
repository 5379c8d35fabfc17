use aif_core::analysis::{label_top_fraction, make_blob};
use aif_core::forest::height_limit;
use aif_core::{Dataset, ExtensionLevel, Forest, ForestParams, MixtureSpec, NormalDistribution, SymMatrix};
use proptest::prelude::*;

fn diag_dist(diag: &[f64]) -> NormalDistribution {
    NormalDistribution::gaussian(SymMatrix::from_diagonal(diag).unwrap()).unwrap()
}

fn points(d: usize) -> impl Strategy<Value = Dataset> {
    proptest::collection::vec(-50.0f64..50.0, d * 20..d * 120)
        .prop_map(move |mut v| {
            v.truncate(v.len() / d * d);
            Dataset::from_flat(d, v).unwrap()
        })
}

fn setup() -> impl Strategy<Value = (Dataset, Vec<f64>, usize, u64)> {
    (1usize..5).prop_flat_map(|d| {
        (
            points(d),
            proptest::collection::vec(0.01f64..10.0, d),
            2usize..64,
            any::<u64>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trees_respect_their_limits((data, diag, subsample, seed) in setup()) {
        let subsample = subsample.min(data.len());
        let params = ForestParams { trees: 10, subsample, seed, ..ForestParams::default() };
        let forest = Forest::fit(&data, diag_dist(&diag), &params).unwrap();
        let limit = height_limit(subsample);
        for tree in forest.trees() {
            prop_assert!(tree.max_depth() <= limit);
            prop_assert_eq!(tree.leaves().iter().map(|(_, n)| n).sum::<usize>(), subsample);
        }
        for s in forest.score_all(&data).unwrap().scores {
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn fitting_is_reproducible((data, diag, subsample, seed) in setup()) {
        let params = ForestParams { trees: 8, subsample: subsample.min(data.len()), seed, ..ForestParams::default() };
        let a = Forest::fit(&data, diag_dist(&diag), &params).unwrap();
        let b = Forest::fit(&data, diag_dist(&diag), &params).unwrap();
        prop_assert_eq!(&a, &b);
        let back: Forest = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(&back, &a);
        for x in data.rows() {
            prop_assert_eq!(back.score(x).to_bits(), a.score(x).to_bits());
        }
    }

    #[test]
    fn extension_level_fixes_the_support(k in 0usize..6, seed in any::<u64>()) {
        let data = make_blob(300, 6, seed).unwrap();
        let params = ForestParams {
            trees: 5,
            subsample: 64,
            seed,
            extension: ExtensionLevel::Level(k),
            ..ForestParams::default()
        };
        let forest = Forest::fit(&data, diag_dist(&[1.0, 2.0, 0.5, 1.0, 3.0, 0.1]), &params).unwrap();
        for normal in forest.trees().iter().flat_map(|t| t.split_normals()) {
            prop_assert_eq!(normal.iter().filter(|v| **v != 0.0).count(), k + 1);
        }
    }
}

#[test]
fn mixtures_fit_and_flag_the_outlier() {
    let mut rows: Vec<Vec<f64>> = make_blob(500, 2, 3).unwrap().rows().map(<[f64]>::to_vec).collect();
    rows.push(vec![6.0, 6.0]);
    let data = Dataset::from_rows(&rows).unwrap();
    let m = MixtureSpec::new(
        vec![
            (0.5, SymMatrix::from_rows(&[[1.0, 0.9], [0.9, 1.0]]).unwrap()),
            (0.5, SymMatrix::from_rows(&[[1.0, -0.9], [-0.9, 1.0]]).unwrap()),
        ],
        1.0,
    )
    .unwrap();
    let forest = Forest::fit(&data, NormalDistribution::Mixture(m), &ForestParams::default()).unwrap();
    let scores = forest.score_all(&data).unwrap().scores;
    let flags = label_top_fraction(&scores, 0.01).unwrap();
    assert!(flags.flags[500]);
}
