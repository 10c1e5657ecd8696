use nalgebra::DMatrix;
use rand::Rng;
use txembed::msda::{train_layer, Ridge};

/// Pearson correlation of two equally long slices.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn layer_restores_dropped_features_from_correlated_ones() {
    // four features, each two copies of one latent factor plus small noise
    let mut rng = txembed::seed::rng(21);
    let n = 3000;
    let latent: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let x = DMatrix::from_fn(4, n, |i, j| latent[j][i / 2] + 0.05 * rng.random_range(-1.0..1.0));
    let layer = train_layer(&x, 0.5, Ridge::default()).unwrap();

    // drop feature 0 everywhere and reconstruct it linearly
    let mut corrupted = x.clone();
    corrupted.row_mut(0).fill(0.0);
    let w = layer.weights();
    let recon: Vec<f64> = (0..n)
        .map(|j| (0..4).map(|i| w[(0, i)] * corrupted[(i, j)]).sum::<f64>() + w[(0, 4)])
        .collect();
    let clean: Vec<f64> = x.row(0).iter().copied().collect();
    let r = correlation(&recon, &clean);
    assert!(r > 0.95, "correlation {r}");
    // feature 0 leans on its twin, not on the unrelated pair
    assert!(w[(0, 1)].abs() > 5.0 * w[(0, 2)].abs().max(w[(0, 3)].abs()));
}
