//! Small trainable probes: a two-layer MLP regressor and classifier and a
//! convolutional word classifier, all trained with Adam on flat parameter
//! vectors.

mod checkpoint;
mod conv;
mod mlp;

pub use checkpoint::Checkpoint;
pub use conv::{train_conv_baseline, ConvBaseline, Vocabulary, CONV_EMBED, CONV_FC, CONV_FILTERS};
pub use mlp::{train_classifier, train_regressor, Mlp, MlpClassifier, MlpRegressor};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn regressor() -> Self {
        TrainConfig {
            batch_size: 200,
            learning_rate: 0.001,
            max_epochs: 300,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn classifier() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 0.001,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidInput(
                "batch size and max epochs must be positive".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// What happened during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub validation_losses: Vec<f64>,
    /// Full training-set loss before the first step and after every step of
    /// the first epoch.
    pub first_epoch_losses: Vec<f64>,
}

/// Seeded train/validation split: returns (train, validation) indices.
pub(crate) fn split_indices(
    n: usize,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    if n < 2 {
        return (idx, Vec::new());
    }
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

pub(crate) fn uniform_init(n: usize, bound: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Mini-batch Adam over a flat parameter vector with early stopping on
/// validation loss. `grad` returns the mean loss and its gradient over a
/// batch; `loss` evaluates the mean loss over a set of examples.
pub(crate) fn fit<G, L>(
    params: &mut Vec<f64>,
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut grad: G,
    loss: L,
) -> Result<TrainLog>
where
    G: FnMut(&[f64], &[usize], &mut ChaCha8Rng) -> (f64, Vec<f64>),
    L: Fn(&[f64], &[usize]) -> f64,
{
    let monitor: &[usize] = if val.is_empty() { train } else { val };
    let mut adam = Adam::new(cfg.learning_rate, params.len());
    let mut order = train.to_vec();
    let mut log = TrainLog {
        best_validation_loss: loss(params, monitor),
        first_epoch_losses: vec![loss(params, train)],
        ..TrainLog::default()
    };
    let mut best = params.clone();
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let (l, g) = grad(params, batch, rng);
            if !l.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            adam.step(params, &g);
            if epoch == 1 {
                log.first_epoch_losses.push(loss(params, train));
            }
        }
        let v = loss(params, monitor);
        if !v.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log.validation_losses.push(v);
        log.epochs_run = epoch;
        if v < log.best_validation_loss {
            log.best_validation_loss = v;
            log.best_epoch = epoch;
            best.clone_from(params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    *params = best;
    Ok(log)
}

/// Sample Pearson correlation.
pub fn pearson(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "need at least two values".into(),
        ));
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gold.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        sxy += (p - mp) * (g - mg);
        sxx += (p - mp) * (p - mp);
        syy += (g - mg) * (g - mg);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds whose sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "cannot cut {n} samples into {k} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Mean held-out score over `k` folds. `train_eval` receives the training
/// and held-out samples of one fold and returns the held-out accuracy.
pub fn kfold<T, F>(data: &[T], k: usize, seed: u64, mut train_eval: F) -> Result<f64>
where
    T: Clone,
    F: FnMut(&[T], &[T]) -> Result<f64>,
{
    let folds = fold_assignment(data.len(), k, seed)?;
    let mut total = 0.0;
    for (f, held) in folds.iter().enumerate() {
        let train: Vec<T> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| data[i].clone()))
            .collect();
        let test: Vec<T> = held.iter().map(|&i| data[i].clone()).collect();
        total += train_eval(&train, &test)?;
    }
    Ok(total / k as f64)
}

pub(crate) fn check_width<'a, I>(rows: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut it = rows.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidInput("empty training data".into()))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidInput("zero-width inputs".into()));
    }
    for r in std::iter::once(first).chain(it) {
        if r.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: r.len(),
            });
        }
        crate::linalg::check_finite(r, "training input")?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let g = [1.0, 2.0, 4.0, 3.5];
        assert!((pearson(&g, &g).unwrap() - 1.0).abs() < 1e-15);
        let anti: Vec<f64> = g.iter().map(|x| 5.0 - x).collect();
        assert!((pearson(&anti, &g).unwrap() + 1.0).abs() < 1e-15);
        // cov = 1.5, var(pred) = 1, var(gold) = 7/3
        let expect = 1.5 / (7.0f64 / 3.0).sqrt();
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.98198).abs() < 1e-5);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(23, 10, 4).unwrap();
        let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(f, fold_assignment(23, 10, 4).unwrap());
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(fold_assignment(5, 10, 0).is_err());
    }

    #[test]
    fn memorizing_trainer_is_at_chance_on_unique_inputs() {
        let data: Vec<(usize, usize)> = (0..40).map(|i| (i, i % 2)).collect();
        let acc = kfold(&data, 10, 1, |train, test| {
            let hits = test
                .iter()
                .filter(|(x, y)| {
                    train
                        .iter()
                        .find(|(tx, _)| tx == x)
                        .map_or(0, |(_, ty)| *ty)
                        == *y
                })
                .count();
            Ok(hits as f64 / test.len() as f64)
        })
        .unwrap();
        // unseen inputs fall back to label 0, which is right half the time
        assert!((acc - 0.5).abs() < 0.2);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![1.0, -2.0];
        let mut a = Adam::new(0.01, 2);
        a.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, v) = split_indices(100, 0.1, &mut rng);
        assert_eq!((t.len(), v.len()), (90, 10));
        let (t, v) = split_indices(3, 0.1, &mut rng);
        assert_eq!((t.len(), v.len()), (2, 1));
        let (t, v) = split_indices(1, 0.1, &mut rng);
        assert_eq!((t.len(), v.len()), (1, 0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::regressor().validate().is_ok());
        let mut c = TrainConfig::classifier();
        c.validation_fraction = 1.0;
        assert!(c.validate().is_err());
    }
}
