use floquet_core::stats::*;

#[test]
fn exact_line() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
    let f = linear_fit(&pts);
    assert!((f.slope + 2.0).abs() < 1e-12);
    assert!((f.intercept - 3.0).abs() < 1e-12);
    assert!((f.r2 - 1.0).abs() < 1e-12);
}

#[test]
fn r2_of_symmetric_noise() {
    // y = x + (+1, -1, -1, +1): residual 4, total = 5 + 4
    let pts = [(0.0, 1.0), (1.0, 0.0), (2.0, 1.0), (3.0, 4.0)];
    let f = linear_fit(&pts);
    let my = 1.5;
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let sse: f64 = pts.iter().map(|p| (p.1 - f.slope * p.0 - f.intercept).powi(2)).sum();
    assert!((f.r2 - (1.0 - sse / syy)).abs() < 1e-12);
    assert!(f.r2 < 1.0);
}

#[test]
fn spearman_monotone_and_ties() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 100.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
}
