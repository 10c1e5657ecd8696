//! mSDA closed form checked against exhaustive enumeration of masking patterns.

use nalgebra::DMatrix;
use rand::Rng;
use txembed::msda::{expected_scatter, train_layer, MsdaConfig, MsdaLayer, MsdaModel, OutputMode, Ridge};
use txembed::{PreprocSpec, TransactionTable};

/// Brute-force `(E[P], E[Q])`: average over all 2^d keep/drop patterns,
/// weighted by `p^dropped (1-p)^kept`; the bias feature is never dropped.
fn enumerate_moments(x: &DMatrix<f64>, p: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (d, n) = x.shape();
    let mut ep = vec![vec![0.0; d + 1]; d];
    let mut eq = vec![vec![0.0; d + 1]; d + 1];
    for s in 0..n {
        let clean: Vec<f64> = (0..d).map(|i| x[(i, s)]).collect();
        for mask in 0u32..(1 << d) {
            let kept = mask.count_ones() as i32;
            let w = (1.0 - p).powi(kept) * p.powi(d as i32 - kept);
            if w == 0.0 {
                continue;
            }
            let mut noisy: Vec<f64> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { clean[i] } else { 0.0 })
                .collect();
            noisy.push(1.0);
            for i in 0..d {
                for j in 0..=d {
                    ep[i][j] += w * clean[i] * noisy[j];
                }
            }
            for i in 0..=d {
                for j in 0..=d {
                    eq[i][j] += w * noisy[i] * noisy[j];
                }
            }
        }
    }
    (ep, eq)
}

/// Gaussian elimination with partial pivoting: returns `Y` with `A Y = B`.
fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ar, br)| ar.iter().chain(br).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        for r in col + 1..n {
            let f = aug[r][col] / aug[col][col];
            for c in col..n + m {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    let mut y = vec![vec![0.0; m]; n];
    for r in (0..n).rev() {
        for c in 0..m {
            let mut v = aug[r][n + c];
            for k in r + 1..n {
                v -= aug[r][k] * y[k][c];
            }
            y[r][c] = v / aug[r][r];
        }
    }
    y
}

fn rel_err(m: &DMatrix<f64>, oracle: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, row) in oracle.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            num += (m[(i, j)] - v).powi(2);
            den += v * v;
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn oracle_weights(x: &DMatrix<f64>, p: f64, ridge_scale: f64) -> Vec<Vec<f64>> {
    let (ep, eq) = enumerate_moments(x, p);
    let dim = eq.len();
    let lambda = ridge_scale * (0..dim).map(|i| eq[i][i]).sum::<f64>() / dim as f64;
    let mut a = eq;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let ept: Vec<Vec<f64>> = (0..dim).map(|j| ep.iter().map(|r| r[j]).collect()).collect();
    let y = gauss_solve(&a, &ept);
    // M = Yᵀ
    (0..ep.len()).map(|i| (0..dim).map(|j| y[j][i]).collect()).collect()
}

fn random_matrix(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = txembed::seed::rng(seed);
    DMatrix::from_fn(d, n, |_, _| rng.random_range(-3.0..3.0))
}

#[test]
fn closed_form_matches_enumeration() {
    for d in 1..=8 {
        for (k, n) in [1usize, 5, 50].into_iter().enumerate() {
            let x = random_matrix(d, n, (d * 10 + k) as u64);
            for p in [0.0, 0.25, 0.5, 0.9] {
                let (ep, eq) = expected_scatter(&x, p).unwrap();
                let (oep, oeq) = enumerate_moments(&x, p);
                assert!(rel_err(&ep, &oep) < 1e-10, "E[P] d={d} n={n} p={p}");
                assert!(rel_err(&eq, &oeq) < 1e-10, "E[Q] d={d} n={n} p={p}");
            }
        }
    }
}

#[test]
fn layer_matches_reference_solve() {
    for d in 1..=6 {
        let x = random_matrix(d, 30, 100 + d as u64);
        for p in [0.0, 0.3, 0.7] {
            let layer = train_layer(&x, p, Ridge::Auto { scale: 1e-5 }).unwrap();
            let oracle = oracle_weights(&x, p, 1e-5);
            assert!(rel_err(layer.weights(), &oracle) < 1e-8, "d={d} p={p}");
        }
    }
}

#[test]
fn one_dimensional_worked_example() {
    // single sample x = 2, p = 0.5: the enumeration averages the kept and dropped cases
    let x = DMatrix::from_vec(1, 1, vec![2.0]);
    let (oep, oeq) = enumerate_moments(&x, 0.5);
    assert_eq!(oeq, vec![vec![2.0, 1.0], vec![1.0, 1.0]]);
    assert_eq!(oep, vec![vec![2.0, 2.0]]);
    let (ep, eq) = expected_scatter(&x, 0.5).unwrap();
    assert!(rel_err(&ep, &oep) < 1e-15 && rel_err(&eq, &oeq) < 1e-15);
}

#[test]
fn zero_input_zero_bias_embeds_to_zero() {
    let mut w = DMatrix::zeros(3, 4);
    w[(0, 1)] = 0.7;
    w[(2, 0)] = -1.3;
    let layer = MsdaLayer::from_weights(w, 0.0).unwrap();
    let out = layer.forward(&DMatrix::zeros(3, 2));
    assert!(out.iter().all(|v| *v == 0.0));
}

fn config(p: f64, layers: usize, ridge: Ridge) -> MsdaConfig {
    MsdaConfig {
        noise_p: p,
        n_layers: layers,
        ridge,
        preproc: PreprocSpec::None,
        output_mode: OutputMode::LastLayer,
    }
}

#[test]
fn identity_model_embeds_tanh() {
    let x = random_matrix(4, 25, 9);
    let model = MsdaModel::train_matrix(&x, config(0.0, 1, Ridge::Fixed(0.0))).unwrap();
    let e = model.embed_matrix(&x).unwrap();
    for (a, b) in e.iter().zip(x.iter()) {
        assert!((a - b.tanh()).abs() < 1e-8);
    }
}

#[test]
fn feature_permutation_equivariance() {
    let x = random_matrix(5, 40, 11);
    let perm = [3usize, 0, 4, 1, 2];
    let xp = DMatrix::from_fn(5, 40, |i, j| x[(perm[i], j)]);
    let cfg = config(0.5, 2, Ridge::Fixed(1e-3));
    let e = MsdaModel::train_matrix(&x, cfg).unwrap().embed_matrix(&x).unwrap();
    let ep = MsdaModel::train_matrix(&xp, cfg).unwrap().embed_matrix(&xp).unwrap();
    for i in 0..5 {
        for j in 0..40 {
            assert!((ep[(i, j)] - e[(perm[i], j)]).abs() < 1e-10);
        }
    }
}

#[test]
fn one_layer_model_equals_single_layer_training() {
    let x = random_matrix(6, 50, 12);
    let cfg = config(0.3, 1, Ridge::default());
    let model = MsdaModel::train_matrix(&x, cfg).unwrap();
    let layer = train_layer(&x, 0.3, Ridge::default()).unwrap();
    assert_eq!(model.layers()[0], layer);
}

#[test]
fn stacked_shapes_and_range() {
    let x = random_matrix(6, 50, 13);
    let mut cfg = config(0.5, 3, Ridge::default());
    let model = MsdaModel::train_matrix(&x, cfg).unwrap();
    let e = model.embed_matrix(&x).unwrap();
    assert_eq!(e.shape(), (6, 50));
    assert!(e.iter().all(|v| v.abs() < 1.0 && v.is_finite()));
    cfg.output_mode = OutputMode::ConcatAll;
    let model = MsdaModel::train_matrix(&x, cfg).unwrap();
    assert_eq!(model.embed_matrix(&x).unwrap().shape(), (18, 50));
    assert!(model.embed_matrix(&random_matrix(5, 2, 1)).is_err());
}

#[test]
fn training_is_bit_deterministic() {
    let x = random_matrix(7, 5000, 14);
    let cfg = config(0.5, 2, Ridge::default());
    let a = MsdaModel::train_matrix(&x, cfg).unwrap();
    let b = MsdaModel::train_matrix(&x, cfg).unwrap();
    for (la, lb) in a.layers().iter().zip(b.layers()) {
        assert!(la.weights().iter().zip(lb.weights().iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

#[test]
fn model_file_round_trip_is_lossless() {
    let labels: Vec<String> = (1..=4).map(|i| format!("CAT{i}")).collect();
    let x = random_matrix(4, 60, 15);
    let values = (0..60).flat_map(|j| (0..4).map(move |i| (i, j))).map(|(i, j)| Some(x[(i, j)] * 100.0)).collect();
    let ids = (0..60).map(|j| format!("c{j}")).collect();
    let table = TransactionTable::new(ids, labels, values).unwrap();
    let cfg = MsdaConfig {
        output_mode: OutputMode::ConcatAll,
        n_layers: 2,
        ..MsdaConfig::default()
    };
    let model = MsdaModel::train(&table, cfg).unwrap();
    let mut buf = Vec::new();
    model.write_to(&mut buf).unwrap();
    let back = MsdaModel::read_from(&mut buf.as_slice()).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.embed(&table).unwrap(), model.embed(&table).unwrap());
    assert!(MsdaModel::read_from(&mut &buf[..buf.len() - 3]).is_err());
    let narrower = table.drop_column(0).unwrap();
    assert!(model.embed(&narrower).is_err());
}
