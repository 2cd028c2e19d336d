//! Independent reference computations shared by the integration tests and
//! the acceptance target.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenpairs of the Gram matrix `X^T X` (rows optionally centered) by power
/// iteration with deflation, largest first. Returns `(sigma, unit vector)`.
pub fn power_iteration_pca(rows: &[Vec<f64>], k: usize, center: bool) -> Vec<(f64, Vec<f64>)> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .map(|(a, m)| if center { a - m } else { *a })
                .collect()
        })
        .collect();
    let mut gram = vec![vec![0.0; d]; d];
    for r in &x {
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..2_000_000 {
            let mut w: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| gram[i][j] * v[j]).sum())
                .collect();
            let l = normalize(&mut w);
            if l == 0.0 {
                lambda = 0.0;
                break;
            }
            let step: f64 = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = w;
            lambda = l;
            if step < 1e-15 {
                break;
            }
        }
        for i in 0..d {
            for j in 0..d {
                gram[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda.max(0.0).sqrt(), v));
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Random rows with a decaying spectrum: Gaussian-ish rows whose coordinates
/// are scaled by `1, 0.7, 0.49, ...` in a random rotation-free basis.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, bool) {
    let n = rng.gen_range(3..12);
    let d = rng.gen_range(2..9);
    let center = rng.gen_bool(0.5);
    let scales: Vec<f64> = (0..d).map(|i| 0.7f64.powi(i as i32)).collect();
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| rng.gen_range(-1.0..1.0) * scales[j] + 0.1)
                .collect()
        })
        .collect();
    (rows, center)
}

/// Smallest relative gap between consecutive leading singular values.
pub fn min_relative_gap(sigmas: &[f64]) -> f64 {
    let top = sigmas[0];
    sigmas
        .windows(2)
        .map(|w| (w[0] - w[1]) / top)
        .fold(f64::INFINITY, f64::min)
}

pub const FD_STEP: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Worst relative error between `grad` and central differences of `loss`.
/// Parameters before `skip` are frozen and not checked.
pub fn worst_fd_error<M, F>(
    model: &mut M,
    params: fn(&mut M) -> &mut [f64],
    skip: usize,
    grad: &[f64],
    loss: F,
) -> f64
where
    F: Fn(&M) -> f64,
{
    let n = params(model).len();
    let mut worst: f64 = 0.0;
    for i in skip..n {
        let orig = params(model)[i];
        params(model)[i] = orig + FD_STEP;
        let up = loss(model);
        params(model)[i] = orig - FD_STEP;
        let down = loss(model);
        params(model)[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        if grad[i] == 0.0 && numeric.abs() < 1e-10 {
            continue;
        }
        worst = worst.max(rel_err(grad[i], numeric));
    }
    worst
}

/// `(diffs, t, p)` cases computed with 50-digit arithmetic.
pub fn t_test_reference() -> Vec<(Vec<f64>, f64, f64)> {
    include_str!("../fixtures/ttest_reference.txt")
        .lines()
        .map(|line| {
            let (diffs, expect) = line.split_once(';').unwrap();
            let diffs = diffs
                .split_whitespace()
                .map(|x| x.parse().unwrap())
                .collect();
            let mut e = expect.split_whitespace().map(|x| x.parse::<f64>().unwrap());
            (diffs, e.next().unwrap(), e.next().unwrap())
        })
        .collect()
}
