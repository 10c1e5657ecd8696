use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use txembed::methods::Method;
use txembed::segment::{
    dispersion, kmeans, median_cluster_spread, pattern_matrix, typical_members, DispersionConfig, KMeansConfig,
};
use txembed::synth::Preset;
use txembed::{seed, PreprocSpec};

proptest! {
    #[test]
    fn spread_is_shift_invariant_and_scale_equivariant(
        values in proptest::collection::vec(-1e3f64..1e3, 2..60),
        k in 1usize..5,
        shift in -1e3f64..1e3,
        scale in 0.1f64..10.0,
        s in 0u64..100,
    ) {
        let mut rng = seed::rng(s);
        let assign: Vec<usize> = values.iter().map(|_| rng.random_range(0..k)).collect();
        let (base, nonempty) = median_cluster_spread(&values, &assign, k).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let (a, n2) = median_cluster_spread(&shifted, &assign, k).unwrap();
        let (b, _) = median_cluster_spread(&scaled, &assign, k).unwrap();
        prop_assert_eq!(nonempty, n2);
        prop_assert!((a - base).abs() <= 1e-9 * (1.0 + base.abs() + shift.abs()));
        prop_assert!((b - scale * base).abs() <= 1e-9 * (1.0 + scale * base));
    }
}

#[test]
fn dispersion_is_deterministic_and_averages_targets() {
    let ds = Preset::random(6, 20, 2).generate(1200, 2, 0.0).unwrap();
    let method = Method::raw(PreprocSpec::Binarize);
    let cfg = DispersionConfig::new(8, 3);
    let a = dispersion(&ds.transactions, &method, &[2, 3, 4], &cfg).unwrap();
    let b = dispersion(&ds.transactions, &method, &[2, 3, 4], &cfg).unwrap();
    assert_eq!(a, b);
    let mean = a.targets.iter().map(|t| t.median_std).sum::<f64>() / 3.0;
    assert!((a.delta - mean).abs() < 1e-12);
    let single = dispersion(&ds.transactions, &method, &[3], &cfg).unwrap();
    assert_eq!(single.targets[0], a.targets[1]);
    assert!(dispersion(&ds.transactions, &method, &[20], &cfg).is_err());
}

#[test]
fn typical_members_are_closest_within_their_cluster() {
    let mut rng = seed::rng(12);
    let centers = [(-5.0, 0.0), (5.0, 0.0), (0.0, 8.0)];
    let spreads = [0.3, 1.0, 2.0];
    let points = DMatrix::from_fn(2, 300, |r, c| {
        let (x, y) = centers[c % 3];
        let z: f64 = rng.random_range(-1.0..1.0);
        (if r == 0 { x } else { y }) + spreads[c % 3] * z
    });
    let clustering = kmeans(&points, &KMeansConfig::new(3, 0)).unwrap();
    let sel = typical_members(&points, &clustering, 2, 5).unwrap();
    assert_eq!(sel.clusters.len(), 2);
    assert!(sel.clusters[0].density >= sel.clusters[1].density);
    // the tightest blob is the densest
    assert_eq!(clustering.assignments[0], sel.clusters[0].cluster);
    for c in &sel.clusters {
        let members: Vec<_> = sel.members.iter().filter(|m| m.cluster == c.cluster).collect();
        assert_eq!(members.len(), 5);
        assert!(members.windows(2).all(|w| w[0].sq_distance <= w[1].sq_distance));
        let worst = members.last().unwrap().sq_distance;
        let closer_outside = (0..300)
            .filter(|&i| clustering.assignments[i] == c.cluster)
            .filter(|i| !members.iter().any(|m| m.client == *i))
            .any(|i| clustering.sq_distance(&points, i) < worst);
        assert!(!closer_outside);
    }
    assert!(typical_members(&points, &clustering, 4, 5).is_err());
}

#[test]
fn pattern_rows_follow_transaction_signs() {
    let ds = Preset::random(3, 10, 1).generate(200, 1, 0.0).unwrap();
    let emb = Method::raw(PreprocSpec::Binarize).fit_embed(&ds.transactions).unwrap();
    let clustering = kmeans(emb.matrix(), &KMeansConfig::new(4, 0)).unwrap();
    let sel = typical_members(emb.matrix(), &clustering, 2, 3).unwrap();
    let pattern = pattern_matrix(&ds.transactions, &sel).unwrap();
    assert_eq!(pattern.rows.len(), sel.members.len());
    for (row, member) in pattern.rows.iter().zip(&sel.members) {
        assert_eq!(row.client_id, ds.transactions.client_ids()[member.client]);
        for (c, &s) in row.signs.iter().enumerate() {
            let want = match ds.transactions.get(member.client, c) {
                Some(v) if v > 0.0 => 1,
                Some(v) if v < 0.0 => -1,
                _ => 0,
            };
            assert_eq!(s, want);
        }
    }
}
