use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_width, fit, split_indices, uniform_init, TrainConfig, TrainLog};
use crate::error::{Error, Result};

pub const REGRESSOR_HIDDEN: usize = 200;
pub const CLASSIFIER_HIDDEN: usize = 100;

/// `out = W2 relu(W1 x + b1) + b2` with parameters stored flat as
/// `[W1 (row-major), b1, W2 (row-major), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(input: usize, hidden: usize, outputs: usize) -> usize {
        hidden * input + hidden + outputs * hidden + outputs
    }

    /// Weights and biases drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn random(input: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = 1.0 / (input as f64).sqrt();
        let b = 1.0 / (hidden as f64).sqrt();
        let mut params = uniform_init(hidden * input + hidden, a, rng);
        params.extend(uniform_init(outputs * hidden + outputs, b, rng));
        Mlp {
            input,
            hidden,
            outputs,
            params,
        }
    }

    pub fn from_params(
        input: usize,
        hidden: usize,
        outputs: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let n = Self::param_count(input, hidden, outputs);
        if params.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: params.len(),
            });
        }
        crate::linalg::check_finite(&params, "mlp parameters")?;
        Ok(Mlp {
            input,
            hidden,
            outputs,
            params,
        })
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    fn hidden_pre(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|h| {
                let row = &p[h * self.input..(h + 1) * self.input];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[b1 + h]
            })
            .collect()
    }

    fn output(&self, p: &[f64], act: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.outputs)
            .map(|o| {
                let row = &p[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
                row.iter().zip(act).map(|(w, a)| w * a).sum::<f64>() + p[b2 + o]
            })
            .collect()
    }

    fn forward_with(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let act: Vec<f64> = self
            .hidden_pre(p, x)
            .into_iter()
            .map(|z| z.max(0.0))
            .collect();
        self.output(p, &act)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_with(&self.params, x)
    }

    /// Adds the gradient of one example into `grad`, given `dL/dout`
    /// computed from the example's outputs by `head`. Returns the loss.
    fn backprop<H>(&self, p: &[f64], x: &[f64], grad: &mut [f64], head: H) -> f64
    where
        H: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let (b1, w2, b2) = self.offsets();
        let pre = self.hidden_pre(p, x);
        let act: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();
        let out = self.output(p, &act);
        let (loss, g_out) = head(&out);
        let mut g_act = vec![0.0; self.hidden];
        for (o, go) in g_out.iter().enumerate() {
            let row = w2 + o * self.hidden;
            for h in 0..self.hidden {
                grad[row + h] += go * act[h];
                g_act[h] += go * p[row + h];
            }
            grad[b2 + o] += go;
        }
        for h in 0..self.hidden {
            if pre[h] <= 0.0 {
                continue;
            }
            let gz = g_act[h];
            let row = h * self.input;
            for (i, xi) in x.iter().enumerate() {
                grad[row + i] += gz * xi;
            }
            grad[b1 + h] += gz;
        }
        loss
    }
}

fn squared_error(out: &[f64], y: f64, scale: f64) -> (f64, Vec<f64>) {
    let e = out[0] - y;
    (e * e * scale, vec![2.0 * e * scale])
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Cross-entropy of one example scaled by `scale`, with its gradient with
/// respect to the logits.
pub(crate) fn cross_entropy(logits: &[f64], label: usize, scale: f64) -> (f64, Vec<f64>) {
    let lp = log_softmax(logits);
    let g = lp
        .iter()
        .enumerate()
        .map(|(c, l)| (l.exp() - f64::from(u8::from(c == label))) * scale)
        .collect();
    (-lp[label] * scale, g)
}

/// Two-layer regressor with 200 hidden units and an unsquashed output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    pub mlp: Mlp,
}

impl MlpRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.mlp.forward(x)[0]
    }

    fn loss_with(&self, p: &[f64], data: &[(Vec<f64>, f64)], idx: &[usize]) -> f64 {
        let s = 1.0 / idx.len() as f64;
        idx.iter()
            .map(|&i| {
                let e = self.mlp.forward_with(p, &data[i].0)[0] - data[i].1;
                e * e * s
            })
            .sum()
    }

    fn grad_with(&self, p: &[f64], data: &[(Vec<f64>, f64)], idx: &[usize]) -> (f64, Vec<f64>) {
        let s = 1.0 / idx.len() as f64;
        let mut g = vec![0.0; p.len()];
        let loss = idx
            .iter()
            .map(|&i| {
                let y = data[i].1;
                self.mlp
                    .backprop(p, &data[i].0, &mut g, |out| squared_error(out, y, s))
            })
            .sum();
        (loss, g)
    }

    /// Mean squared error over `batch`.
    pub fn loss(&self, batch: &[(Vec<f64>, f64)]) -> f64 {
        let idx: Vec<usize> = (0..batch.len()).collect();
        self.loss_with(&self.mlp.params, batch, &idx)
    }

    /// Mean squared error over `batch` and its gradient.
    pub fn loss_and_grad(&self, batch: &[(Vec<f64>, f64)]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..batch.len()).collect();
        self.grad_with(&self.mlp.params, batch, &idx)
    }
}

/// Two-layer softmax classifier with 100 hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub mlp: Mlp,
}

impl MlpClassifier {
    pub fn classes(&self) -> usize {
        self.mlp.outputs
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.mlp.forward(x))
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.mlp.forward(x))
    }

    pub fn accuracy(&self, data: &[(Vec<f64>, usize)]) -> f64 {
        let hits = data.iter().filter(|(x, y)| self.predict(x) == *y).count();
        hits as f64 / data.len().max(1) as f64
    }

    /// Counts indexed `[gold][predicted]`.
    pub fn confusion(&self, data: &[(Vec<f64>, usize)]) -> Vec<Vec<usize>> {
        let c = self.classes();
        let mut m = vec![vec![0; c]; c];
        for (x, y) in data {
            m[*y][self.predict(x)] += 1;
        }
        m
    }

    fn loss_with(&self, p: &[f64], data: &[(Vec<f64>, usize)], idx: &[usize]) -> f64 {
        let s = 1.0 / idx.len() as f64;
        idx.iter()
            .map(|&i| -log_softmax(&self.mlp.forward_with(p, &data[i].0))[data[i].1] * s)
            .sum()
    }

    fn grad_with(&self, p: &[f64], data: &[(Vec<f64>, usize)], idx: &[usize]) -> (f64, Vec<f64>) {
        let s = 1.0 / idx.len() as f64;
        let mut g = vec![0.0; p.len()];
        let loss = idx
            .iter()
            .map(|&i| {
                let y = data[i].1;
                self.mlp
                    .backprop(p, &data[i].0, &mut g, |out| cross_entropy(out, y, s))
            })
            .sum();
        (loss, g)
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, batch: &[(Vec<f64>, usize)]) -> f64 {
        let idx: Vec<usize> = (0..batch.len()).collect();
        self.loss_with(&self.mlp.params, batch, &idx)
    }

    pub fn loss_and_grad(&self, batch: &[(Vec<f64>, usize)]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..batch.len()).collect();
        self.grad_with(&self.mlp.params, batch, &idx)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains a regressor on `(vector, intensity)` pairs with mean squared error.
pub fn train_regressor(
    data: &[(Vec<f64>, f64)],
    cfg: &TrainConfig,
) -> Result<(MlpRegressor, TrainLog)> {
    cfg.validate()?;
    let d = check_width(data.iter().map(|(x, _)| x.as_slice()))?;
    if let Some((_, y)) = data.iter().find(|(_, y)| !y.is_finite()) {
        return Err(Error::NonFinite(format!("regression target {y}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpRegressor {
        mlp: Mlp::random(d, REGRESSOR_HIDDEN, 1, &mut rng),
    };
    let (train, val) = split_indices(data.len(), cfg.validation_fraction, &mut rng);
    let shape = model.clone();
    let mut params = std::mem::take(&mut model.mlp.params);
    let log = fit(
        &mut params,
        &train,
        &val,
        cfg,
        &mut rng,
        |p, b, _| shape.grad_with(p, data, b),
        |p, idx| shape.loss_with(p, data, idx),
    )?;
    model.mlp.params = params;
    Ok((model, log))
}

/// Trains a `classes`-way classifier on `(vector, label)` pairs with
/// softmax cross-entropy.
pub fn train_classifier(
    data: &[(Vec<f64>, usize)],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(MlpClassifier, TrainLog)> {
    cfg.validate()?;
    if !(2..=3).contains(&classes) {
        return Err(Error::InvalidInput(format!(
            "{classes}-way classification unsupported"
        )));
    }
    let d = check_width(data.iter().map(|(x, _)| x.as_slice()))?;
    check_labels(data.iter().map(|(_, y)| *y), classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpClassifier {
        mlp: Mlp::random(d, CLASSIFIER_HIDDEN, classes, &mut rng),
    };
    let (train, val) = split_indices(data.len(), cfg.validation_fraction, &mut rng);
    let shape = model.clone();
    let mut params = std::mem::take(&mut model.mlp.params);
    let log = fit(
        &mut params,
        &train,
        &val,
        cfg,
        &mut rng,
        |p, b, _| shape.grad_with(p, data, b),
        |p, idx| shape.loss_with(p, data, idx),
    )?;
    model.mlp.params = params;
    Ok((model, log))
}

pub(crate) fn check_labels(labels: impl Iterator<Item = usize>, classes: usize) -> Result<()> {
    let mut seen = vec![false; classes];
    for y in labels {
        if y >= classes {
            return Err(Error::InvalidInput(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        seen[y] = true;
    }
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(Error::SingleClass(format!(
            "only class {} present",
            seen.iter().position(|s| *s).unwrap_or(0)
        )));
    }
    Ok(())
}
