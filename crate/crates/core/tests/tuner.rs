use std::collections::BTreeSet;
use std::time::Duration;

use txembed::methods::MethodConfig;
use txembed::synth::{generate, ArchetypeSpec, GenConfig};
use txembed::table::{split, SplitSpec};
use txembed::tuner::{tune, BaseConfigs, EntryStatus, Grid, MethodKind, Objective, TuneOptions};
use txembed::{PreprocSpec, TransactionTable};

/// Segments defined purely by which categories are used; amounts are
/// lognormal with a huge spread and carry no segment signal.
fn planted_presence(seed: u64) -> (TransactionTable, TransactionTable) {
    let k = 16;
    let archetypes: Vec<ArchetypeSpec> = (0..4)
        .map(|a| ArchetypeSpec {
            name: format!("a{a}"),
            weight: 1.0,
            activity_prob: (0..k).map(|c| if c % 4 == a { 0.85 } else { 0.08 }).collect(),
            log_amount_mean: vec![4.0; k],
            log_amount_std: vec![3.0; k],
            income_categories: BTreeSet::new(),
        })
        .collect();
    let config = GenConfig {
        n_clients: 1500,
        n_categories: k,
        n_archetypes: 4,
        seed,
        sociodemo_correlation: 0.0,
    };
    let ds = generate(&config, &archetypes).unwrap();
    let (train, val, _) = split(&ds.transactions, SplitSpec::new(1000, 500, 0), seed).unwrap();
    (train, val)
}

fn options(seed: u64) -> TuneOptions {
    TuneOptions {
        seed,
        base: BaseConfigs::default(),
        budget: None,
        sociodemo: None,
    }
}

#[test]
fn planted_binary_signal_selects_binarize() {
    let (train, val) = planted_presence(3);
    let grid = Grid {
        preproc: vec![PreprocSpec::LogNormalize, PreprocSpec::Binarize, PreprocSpec::MaxNormalize],
        ..Grid::default()
    };
    let objective = Objective::MissingAp { k: 25, targets: vec![0, 1, 2, 3] };
    let result = tune(&train, &val, MethodKind::Raw, &grid, &objective, &options(1)).unwrap();
    assert_eq!(
        result.best().config,
        MethodConfig::Raw {
            preproc: PreprocSpec::Binarize
        }
    );
    assert_eq!(result.leaderboard.len(), 3);
}

#[test]
fn single_point_grid_has_one_entry() {
    let (train, val) = planted_presence(4);
    let result = tune(
        &train,
        &val,
        MethodKind::Msda,
        &Grid::default(),
        &Objective::Dispersion { k: 4, targets: vec![0, 5] },
        &options(2),
    )
    .unwrap();
    assert_eq!(result.leaderboard.len(), 1);
    let best = result.best();
    assert_eq!(best.status, EntryStatus::Ok);
    assert_eq!(best.grid_index, 0);
    assert!(best.score.unwrap() > 0.0);
}

#[test]
fn rerun_gives_identical_leaderboard_csv() {
    let (train, val) = planted_presence(5);
    let grid = Grid {
        noise_p: vec![0.2, 0.5, 0.8],
        preproc: vec![PreprocSpec::Binarize, PreprocSpec::LogNormalize],
        ..Grid::default()
    };
    let objective = Objective::MapAtK { k: 30, descriptors: vec![1] };
    let csv = || {
        let r = tune(&train, &val, MethodKind::Msda, &grid, &objective, &options(6)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, false, &[]).unwrap();
        buf
    };
    let a = csv();
    assert_eq!(a, csv());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);
}

#[test]
fn failing_combinations_are_recorded_not_fatal() {
    let (train, val) = planted_presence(6);
    // noise 1.0 is outside the valid range and fails
    let grid = Grid {
        noise_p: vec![1.0, 0.5],
        ..Grid::default()
    };
    let objective = Objective::Dispersion { k: 4, targets: vec![2] };
    let result = tune(&train, &val, MethodKind::Msda, &grid, &objective, &options(0)).unwrap();
    assert_eq!(result.best().grid_index, 1);
    assert!(matches!(result.leaderboard[1].status, EntryStatus::Failed(_)));

    let all_bad = Grid {
        noise_p: vec![1.0],
        ..Grid::default()
    };
    assert!(tune(&train, &val, MethodKind::Msda, &all_bad, &objective, &options(0)).is_err());
}

#[test]
fn exhausted_budget_skips_remaining_entries() {
    let (train, val) = planted_presence(7);
    let grid = Grid {
        noise_p: vec![0.1, 0.3, 0.5, 0.7],
        ..Grid::default()
    };
    let mut opts = options(0);
    opts.budget = Some(Duration::ZERO);
    let objective = Objective::Dispersion { k: 4, targets: vec![2] };
    // nothing starts within a zero budget, so nothing succeeds
    assert!(tune(&train, &val, MethodKind::Msda, &grid, &objective, &opts).is_err());
}
