use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{argmax, check_labels, cross_entropy, softmax};
use super::{fit, split_indices, uniform_init, TrainConfig, TrainLog};
use crate::error::{Error, Result};

pub const CONV_EMBED: usize = 100;
pub const CONV_FILTERS: usize = 32;
pub const CONV_FC: usize = 128;
pub const DROPOUT: f64 = 0.2;

/// Sorted piece vocabulary; id 0 is reserved for unknown pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pieces: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a, I>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let set: BTreeSet<&str> = pieces.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidInput("empty vocabulary".into()));
        }
        let pieces: Vec<String> = set.into_iter().map(str::to_string).collect();
        let index = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i + 1))
            .collect();
        Ok(Vocabulary { pieces, index })
    }

    /// Number of rows in the embedding table, unknown row included.
    pub fn rows(&self) -> usize {
        self.pieces.len() + 1
    }

    pub fn id(&self, piece: &str) -> usize {
        self.index.get(piece).copied().unwrap_or(0)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }
}

/// Embedding table, width-1 convolution with ReLU, global max-pool, a
/// 128-unit ReLU layer with dropout, and a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBaseline {
    vocab: Vocabulary,
    classes: usize,
    params: Vec<f64>,
}

struct Offsets {
    wc: usize,
    bc: usize,
    wf: usize,
    bf: usize,
    wo: usize,
    bo: usize,
    end: usize,
}

struct Cache {
    ids: Vec<usize>,
    conv_pre: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    fc_pre: Vec<f64>,
    fc_out: Vec<f64>,
    logits: Vec<f64>,
}

impl ConvBaseline {
    pub fn random(vocab: Vocabulary, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = uniform_init(vocab.rows() * CONV_EMBED, 1.0, rng);
        let a = 1.0 / (CONV_EMBED as f64).sqrt();
        let b = 1.0 / (CONV_FILTERS as f64).sqrt();
        let c = 1.0 / (CONV_FC as f64).sqrt();
        params.extend(uniform_init(
            CONV_FILTERS * CONV_EMBED + CONV_FILTERS,
            a,
            rng,
        ));
        params.extend(uniform_init(CONV_FC * CONV_FILTERS + CONV_FC, b, rng));
        params.extend(uniform_init(classes * CONV_FC + classes, c, rng));
        ConvBaseline {
            vocab,
            classes,
            params,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// The embedding row used for unknown pieces.
    pub fn unknown_embedding(&self) -> &[f64] {
        &self.params[..CONV_EMBED]
    }

    fn offsets(&self) -> Offsets {
        let wc = self.vocab.rows() * CONV_EMBED;
        let bc = wc + CONV_FILTERS * CONV_EMBED;
        let wf = bc + CONV_FILTERS;
        let bf = wf + CONV_FC * CONV_FILTERS;
        let wo = bf + CONV_FC;
        let bo = wo + self.classes * CONV_FC;
        Offsets {
            wc,
            bc,
            wf,
            bf,
            wo,
            bo,
            end: bo + self.classes,
        }
    }

    fn ids(&self, pieces: &[String]) -> Vec<usize> {
        pieces.iter().map(|p| self.vocab.id(p)).collect()
    }

    /// `mask` scales FC activations (dropout); `None` is inference mode.
    fn forward_with(&self, p: &[f64], ids: &[usize], mask: Option<&[f64]>) -> Cache {
        let o = self.offsets();
        let conv_pre: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| {
                let e = &p[id * CONV_EMBED..(id + 1) * CONV_EMBED];
                (0..CONV_FILTERS)
                    .map(|k| {
                        let w = &p[o.wc + k * CONV_EMBED..o.wc + (k + 1) * CONV_EMBED];
                        w.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() + p[o.bc + k]
                    })
                    .collect()
            })
            .collect();
        let mut pooled = vec![f64::NEG_INFINITY; CONV_FILTERS];
        let mut arg = vec![0; CONV_FILTERS];
        for (t, row) in conv_pre.iter().enumerate() {
            for k in 0..CONV_FILTERS {
                let a = row[k].max(0.0);
                if a > pooled[k] {
                    pooled[k] = a;
                    arg[k] = t;
                }
            }
        }
        let fc_pre: Vec<f64> = (0..CONV_FC)
            .map(|j| {
                let w = &p[o.wf + j * CONV_FILTERS..o.wf + (j + 1) * CONV_FILTERS];
                w.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>() + p[o.bf + j]
            })
            .collect();
        let fc_out: Vec<f64> = fc_pre
            .iter()
            .enumerate()
            .map(|(j, z)| z.max(0.0) * mask.map_or(1.0, |m| m[j]))
            .collect();
        let logits = (0..self.classes)
            .map(|c| {
                let w = &p[o.wo + c * CONV_FC..o.wo + (c + 1) * CONV_FC];
                w.iter().zip(&fc_out).map(|(a, b)| a * b).sum::<f64>() + p[o.bo + c]
            })
            .collect();
        Cache {
            ids: ids.to_vec(),
            conv_pre,
            pooled,
            argmax: arg,
            fc_pre,
            fc_out,
            logits,
        }
    }

    fn backprop(
        &self,
        p: &[f64],
        cache: &Cache,
        g_logits: &[f64],
        mask: Option<&[f64]>,
        grad: &mut [f64],
    ) {
        let o = self.offsets();
        let mut g_fc = vec![0.0; CONV_FC];
        for (c, g) in g_logits.iter().enumerate() {
            let row = o.wo + c * CONV_FC;
            for j in 0..CONV_FC {
                grad[row + j] += g * cache.fc_out[j];
                g_fc[j] += g * p[row + j];
            }
            grad[o.bo + c] += g;
        }
        let mut g_pool = vec![0.0; CONV_FILTERS];
        for j in 0..CONV_FC {
            if cache.fc_pre[j] <= 0.0 {
                continue;
            }
            let g = g_fc[j] * mask.map_or(1.0, |m| m[j]);
            let row = o.wf + j * CONV_FILTERS;
            for k in 0..CONV_FILTERS {
                grad[row + k] += g * cache.pooled[k];
                g_pool[k] += g * p[row + k];
            }
            grad[o.bf + j] += g;
        }
        for k in 0..CONV_FILTERS {
            let t = cache.argmax[k];
            if cache.conv_pre[t][k] <= 0.0 {
                continue;
            }
            let g = g_pool[k];
            let id = cache.ids[t];
            let wrow = o.wc + k * CONV_EMBED;
            for i in 0..CONV_EMBED {
                grad[wrow + i] += g * p[id * CONV_EMBED + i];
                if id != 0 {
                    grad[id * CONV_EMBED + i] += g * p[wrow + i];
                }
            }
            grad[o.bc + k] += g;
        }
    }

    pub fn probabilities(&self, pieces: &[String]) -> Vec<f64> {
        softmax(
            &self
                .forward_with(&self.params, &self.ids(pieces), None)
                .logits,
        )
    }

    pub fn predict(&self, pieces: &[String]) -> usize {
        argmax(
            &self
                .forward_with(&self.params, &self.ids(pieces), None)
                .logits,
        )
    }

    pub fn accuracy(&self, data: &[(Vec<String>, usize)]) -> f64 {
        let hits = data.iter().filter(|(w, y)| self.predict(w) == *y).count();
        hits as f64 / data.len().max(1) as f64
    }

    fn masks(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let keep = 1.0 / (1.0 - DROPOUT);
        (0..n)
            .map(|_| {
                (0..CONV_FC)
                    .map(|_| if rng.gen_bool(DROPOUT) { 0.0 } else { keep })
                    .collect()
            })
            .collect()
    }

    fn loss_with(
        &self,
        p: &[f64],
        data: &[(Vec<usize>, usize)],
        idx: &[usize],
        masks: Option<&[Vec<f64>]>,
    ) -> f64 {
        let s = 1.0 / idx.len() as f64;
        idx.iter()
            .enumerate()
            .map(|(b, &i)| {
                let m = masks.map(|m| m[b].as_slice());
                let c = self.forward_with(p, &data[i].0, m);
                cross_entropy(&c.logits, data[i].1, s).0
            })
            .sum()
    }

    fn grad_with(
        &self,
        p: &[f64],
        data: &[(Vec<usize>, usize)],
        idx: &[usize],
        masks: Option<&[Vec<f64>]>,
    ) -> (f64, Vec<f64>) {
        let s = 1.0 / idx.len() as f64;
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        for (b, &i) in idx.iter().enumerate() {
            let m = masks.map(|m| m[b].as_slice());
            let c = self.forward_with(p, &data[i].0, m);
            let (l, g) = cross_entropy(&c.logits, data[i].1, s);
            loss += l;
            self.backprop(p, &c, &g, m, &mut grad);
        }
        (loss, grad)
    }

    fn encode(&self, batch: &[(Vec<String>, usize)]) -> Vec<(Vec<usize>, usize)> {
        batch.iter().map(|(w, y)| (self.ids(w), *y)).collect()
    }

    /// Mean cross-entropy over `batch`; with a seed, dropout masks are drawn
    /// from it, otherwise dropout is off.
    pub fn loss(&self, batch: &[(Vec<String>, usize)], dropout_seed: Option<u64>) -> f64 {
        let data = self.encode(batch);
        let idx: Vec<usize> = (0..data.len()).collect();
        let masks =
            dropout_seed.map(|s| Self::masks(data.len(), &mut ChaCha8Rng::seed_from_u64(s)));
        self.loss_with(&self.params, &data, &idx, masks.as_deref())
    }

    pub fn loss_and_grad(
        &self,
        batch: &[(Vec<String>, usize)],
        dropout_seed: Option<u64>,
    ) -> (f64, Vec<f64>) {
        let data = self.encode(batch);
        let idx: Vec<usize> = (0..data.len()).collect();
        let masks =
            dropout_seed.map(|s| Self::masks(data.len(), &mut ChaCha8Rng::seed_from_u64(s)));
        self.grad_with(&self.params, &data, &idx, masks.as_deref())
    }

    pub(crate) fn from_parts(vocab: Vocabulary, classes: usize, params: Vec<f64>) -> Result<Self> {
        let m = ConvBaseline {
            vocab,
            classes,
            params: Vec::new(),
        };
        let n = m.offsets().end;
        if params.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: params.len(),
            });
        }
        Ok(ConvBaseline { params, ..m })
    }
}

/// Trains the convolutional baseline on `(pieces, label)` examples. The
/// vocabulary is built from the training pieces.
pub fn train_conv_baseline(
    data: &[(Vec<String>, usize)],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(ConvBaseline, TrainLog)> {
    cfg.validate()?;
    if !(2..=3).contains(&classes) {
        return Err(Error::InvalidInput(format!(
            "{classes}-way classification unsupported"
        )));
    }
    if data.iter().any(|(w, _)| w.is_empty()) {
        return Err(Error::InvalidInput("word with no pieces".into()));
    }
    check_labels(data.iter().map(|(_, y)| *y), classes)?;
    let vocab = Vocabulary::build(data.iter().flat_map(|(w, _)| w.iter().map(String::as_str)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ConvBaseline::random(vocab, classes, &mut rng);
    let encoded = model.encode(data);
    let (train, val) = split_indices(data.len(), cfg.validation_fraction, &mut rng);
    let shape = ConvBaseline::from_parts(model.vocab.clone(), classes, model.params.clone())?;
    let mut params = std::mem::take(&mut model.params);
    let log = fit(
        &mut params,
        &train,
        &val,
        cfg,
        &mut rng,
        |p, b, r| {
            let masks = ConvBaseline::masks(b.len(), r);
            shape.grad_with(p, &encoded, b, Some(&masks))
        },
        |p, idx| shape.loss_with(p, &encoded, idx, None),
    )?;
    model.params = params;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(list: &[(&[&str], usize)]) -> Vec<(Vec<String>, usize)> {
        list.iter()
            .map(|(w, y)| (w.iter().map(|s| s.to_string()).collect(), *y))
            .collect()
    }

    #[test]
    fn unknown_pieces_use_frozen_row() {
        let data = words(&[
            (&["ma", "##ry"], 0),
            (&["jo", "##hn"], 1),
            (&["an", "##na"], 0),
        ]);
        let cfg = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::classifier()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let before = uniform_init(CONV_EMBED, 1.0, &mut rng);
        let (m, _) = train_conv_baseline(&data, 2, &cfg).unwrap();
        assert_eq!(m.vocabulary().id("zz"), 0);
        assert_eq!(m.unknown_embedding(), before.as_slice());
        let unseen = vec!["zz".to_string(), "##qq".to_string()];
        let p = m.probabilities(&unseen);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inference_is_deterministic() {
        let data = words(&[(&["ma", "##ry"], 0), (&["jo", "##hn"], 1)]);
        let (m, _) = train_conv_baseline(&data, 2, &TrainConfig::classifier()).unwrap();
        let w = data[0].0.clone();
        let a = m.probabilities(&w);
        let b = m.probabilities(&w);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_vocabulary_rejected() {
        assert!(Vocabulary::build(std::iter::empty()).is_err());
        let data = words(&[(&[], 0), (&["a"], 1)]);
        assert!(train_conv_baseline(&data, 2, &TrainConfig::classifier()).is_err());
    }

    #[test]
    fn pool_shapes() {
        let vocab = Vocabulary::build(["a", "b", "c"]).unwrap();
        let m = ConvBaseline::random(vocab, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let c = m.forward_with(&m.params, &[1, 2, 3, 0], None);
        assert_eq!(c.conv_pre.len(), 4);
        assert!(c.conv_pre.iter().all(|r| r.len() == CONV_FILTERS));
        assert_eq!(c.pooled.len(), CONV_FILTERS);
        assert_eq!(c.logits.len(), 3);
    }
}
