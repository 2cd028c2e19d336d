//! Deterministic synthetic layered model with a planted gender direction.
//!
//! Layer 0 maps a token to `h(token) + beta * s(token) * g0`, where `g0` is a
//! seeded unit vector, `s` is +1/-1/0 for male/female/neutral lexicon entries,
//! and `h` is a hash-seeded base vector with its `g0` component removed. Layer
//! `j` maps each token vector independently through `tanh(A_j x + b_j) + x/2`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_layer_input, LayerVectors, LayeredModel, TokenSequence};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};

pub const START: &str = "<s>";
pub const END: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn sign(self) -> f64 {
        match self {
            Gender::Female => -1.0,
            Gender::Male => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LexEntry {
    gender: Gender,
    /// Words that are gendered counterparts share a concept key and hence a
    /// base vector, up to a small per-word jitter.
    concept: Option<String>,
}

/// Gendered vocabulary of the synthetic model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderLexicon {
    entries: BTreeMap<String, LexEntry>,
}

impl GenderLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a standalone gendered word.
    pub fn add_word(&mut self, word: &str, gender: Gender) -> Result<()> {
        let word = word.to_lowercase();
        match self.entries.get(&word) {
            Some(e) if e.gender != gender => Err(Error::InvalidInput(format!(
                "lexicon conflict: {word:?} is both female and male"
            ))),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(
                    word,
                    LexEntry {
                        gender,
                        concept: None,
                    },
                );
                Ok(())
            }
        }
    }

    /// Adds a female/male counterpart pair sharing one concept.
    pub fn add_pair(&mut self, female: &str, male: &str) -> Result<()> {
        let (f, m) = (female.to_lowercase(), male.to_lowercase());
        if f == m {
            return Err(Error::InvalidInput(format!(
                "pair ({f}, {m}) uses one word for both genders"
            )));
        }
        let existing = self
            .entries
            .get(&f)
            .and_then(|e| e.concept.clone())
            .or_else(|| self.entries.get(&m).and_then(|e| e.concept.clone()));
        let concept = existing.unwrap_or_else(|| format!("{f}|{m}"));
        for (w, g) in [(&f, Gender::Female), (&m, Gender::Male)] {
            match self.entries.get(w) {
                Some(e) if e.gender != g => {
                    return Err(Error::InvalidInput(format!(
                        "lexicon conflict: {w:?} is both female and male"
                    )))
                }
                Some(e) if e.concept.is_some() => {}
                _ => {
                    self.entries.insert(
                        w.clone(),
                        LexEntry {
                            gender: g,
                            concept: Some(concept.clone()),
                        },
                    );
                }
            }
        }
        Ok(())
    }

    pub fn gender(&self, token: &str) -> Option<Gender> {
        self.entries.get(token).map(|e| e.gender)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, Gender)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e.gender))
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (w, e) in &self.entries {
            h.update(w.as_bytes());
            h.update([0, e.gender as u8]);
            if let Some(c) = &e.concept {
                h.update(c.as_bytes());
            }
            h.update([0xff]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub layers: usize,
    pub width: usize,
    /// Planting strength along `g0`.
    pub beta: f64,
    /// Scale of the per-word deviation between paired counterparts.
    pub pair_jitter: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            layers: 6,
            width: 64,
            beta: 1.5,
            pair_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
struct Layer {
    /// Row-major `width x width`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticModel {
    config: SyntheticConfig,
    lexicon: GenderLexicon,
    planted: Vec<f64>,
    layers: Vec<Layer>,
}

const SPECTRAL_NORM: f64 = 0.9;
const BIAS_SCALE: f64 = 0.1;

impl SyntheticModel {
    pub fn new(config: SyntheticConfig, lexicon: GenderLexicon) -> Result<Self> {
        if config.width < 2 {
            return Err(Error::InvalidInput("synthetic width must be >= 2".into()));
        }
        if !(config.beta.is_finite() && config.pair_jitter.is_finite()) {
            return Err(Error::NonFinite("synthetic model config".into()));
        }
        let d = config.width;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut planted: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&planted);
        planted.iter_mut().for_each(|x| *x /= n);

        let layers = (0..config.layers)
            .map(|_| {
                let mut weights: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s = spectral_norm(&weights, d);
                weights.iter_mut().for_each(|w| *w *= SPECTRAL_NORM / s);
                let bias = (0..d)
                    .map(|_| rng.gen_range(-BIAS_SCALE..BIAS_SCALE))
                    .collect();
                Layer { weights, bias }
            })
            .collect();
        Ok(SyntheticModel {
            config,
            lexicon,
            planted,
            layers,
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &GenderLexicon {
        &self.lexicon
    }

    /// The planted unit gender direction `g0`.
    pub fn planted_direction(&self) -> &[f64] {
        &self.planted
    }

    /// +1 male, -1 female, 0 neutral.
    pub fn gender_sign(&self, token: &str) -> f64 {
        self.lexicon.gender(token).map_or(0.0, Gender::sign)
    }

    /// Hash-derived base vector `h(token)`, orthogonal to `g0`.
    pub fn base_vector(&self, token: &str) -> Vec<f64> {
        let entry = self.lexicon.entries.get(token);
        let concept_key = match entry.and_then(|e| e.concept.as_deref()) {
            Some(c) => format!("pair:{c}"),
            None => format!("tok:{token}"),
        };
        let mut h = self.uniform_vector(&concept_key, 1.0);
        if entry.is_some_and(|e| e.concept.is_some()) {
            let jitter = self.uniform_vector(&format!("jit:{token}"), self.config.pair_jitter);
            axpy(1.0, &jitter, &mut h);
        }
        let c = dot(&h, &self.planted);
        axpy(-c, &self.planted, &mut h);
        h
    }

    fn uniform_vector(&self, key: &str, scale: f64) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.config.seed.to_le_bytes());
        hasher.update(key.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(seed));
        (0..self.config.width)
            .map(|_| scale * rng.gen_range(-1.0..1.0))
            .collect()
    }
}

/// Largest singular value of a square row-major matrix by power iteration
/// on `A^T A` from a fixed start vector.
fn spectral_norm(a: &[f64], d: usize) -> f64 {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut sigma = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = (0..d).map(|i| dot(&a[i * d..(i + 1) * d], &v)).collect();
        let mut atav = vec![0.0; d];
        for (i, x) in av.iter().enumerate() {
            axpy(*x, &a[i * d..(i + 1) * d], &mut atav);
        }
        let n = norm(&atav);
        if n == 0.0 {
            return 0.0;
        }
        sigma = n.sqrt();
        v = atav.iter().map(|x| x / n).collect();
    }
    sigma
}

impl LayeredModel for SyntheticModel {
    fn id(&self) -> String {
        let c = &self.config;
        format!(
            "synthetic(seed={},width={},layers={},beta={},jitter={},lexicon={})",
            c.seed,
            c.width,
            c.layers,
            c.beta,
            c.pair_jitter,
            &self.lexicon.hash()[..12]
        )
    }

    fn layer_count(&self) -> usize {
        self.config.layers
    }

    fn width(&self) -> usize {
        self.config.width
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        let lower = text.to_lowercase();
        let words: Vec<&str> = lower.split_whitespace().collect();
        if words.is_empty() {
            return Err(Error::InvalidInput("cannot tokenize empty text".into()));
        }
        let mut tokens = Vec::with_capacity(words.len() + 2);
        tokens.push(START.to_string());
        tokens.extend(words.into_iter().map(str::to_string));
        tokens.push(END.to_string());
        TokenSequence::new(tokens)
    }

    fn embed0(&self, tokens: &TokenSequence) -> Result<LayerVectors> {
        let vectors = tokens
            .tokens()
            .iter()
            .map(|t| {
                let mut v = self.base_vector(t);
                axpy(
                    self.config.beta * self.gender_sign(t),
                    &self.planted,
                    &mut v,
                );
                v
            })
            .collect();
        Ok(LayerVectors { layer: 0, vectors })
    }

    fn apply_layer(&self, layer: usize, input: &LayerVectors) -> Result<LayerVectors> {
        check_layer_input(self, layer, input)?;
        let d = self.config.width;
        let l = &self.layers[layer - 1];
        let vectors = input
            .vectors
            .iter()
            .map(|x| {
                (0..d)
                    .map(|i| {
                        (dot(&l.weights[i * d..(i + 1) * d], x) + l.bias[i]).tanh() + 0.5 * x[i]
                    })
                    .collect()
            })
            .collect();
        Ok(LayerVectors { layer, vectors })
    }

    /// Whole-word vocabulary; subword pieces are fixed two-character chunks
    /// with a `##` continuation prefix.
    fn word_pieces(&self, word: &str) -> Result<Vec<String>> {
        let chars: Vec<char> = word.trim().to_lowercase().chars().collect();
        if chars.is_empty() {
            return Err(Error::InvalidInput("cannot split an empty word".into()));
        }
        Ok(chars
            .chunks(2)
            .enumerate()
            .map(|(i, c)| {
                let s: String = c.iter().collect();
                if i == 0 {
                    s
                } else {
                    format!("##{s}")
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SyntheticModel {
        let mut lex = GenderLexicon::new();
        lex.add_pair("she", "he").unwrap();
        lex.add_word("mary", Gender::Female).unwrap();
        SyntheticModel::new(SyntheticConfig::default(), lex).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        let m = model();
        assert_eq!(
            m.tokenize("He runs").unwrap().tokens(),
            &["<s>", "he", "runs", "</s>"]
        );
        assert_eq!(m.tokenize("a").unwrap().tokens(), &["<s>", "a", "</s>"]);
        assert!(m.tokenize("   ").is_err());
    }

    #[test]
    fn planted_offset_is_exact() {
        let m = model();
        let g0 = m.planted_direction().to_vec();
        assert!((norm(&g0) - 1.0).abs() < 1e-12);
        let toks = m.tokenize("he runs").unwrap();
        let v = m.embed0(&toks).unwrap();
        let he = dot(&v.vectors[1], &g0) - dot(&m.base_vector("he"), &g0);
        assert!((he - 1.5).abs() < 1e-12);
        let runs = dot(&v.vectors[2], &g0);
        assert!((runs - dot(&m.base_vector("runs"), &g0)).abs() < 1e-15);
        assert!(dot(&m.base_vector("runs"), &g0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_bytes() {
        let a = model();
        let b = model();
        let t = a.tokenize("she met mary").unwrap();
        let fa = a.forward_all(&t).unwrap();
        let fb = b.forward_all(&t).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            for (u, v) in x.vectors.iter().zip(&y.vectors) {
                let bu: Vec<u64> = u.iter().map(|z| z.to_bits()).collect();
                let bv: Vec<u64> = v.iter().map(|z| z.to_bits()).collect();
                assert_eq!(bu, bv);
            }
        }
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn zero_input_gives_tanh_bias() {
        let m = model();
        let z = LayerVectors {
            layer: 0,
            vectors: vec![vec![0.0; 64]; 2],
        };
        let out = m.apply_layer(1, &z).unwrap();
        for v in &out.vectors {
            for (x, b) in v.iter().zip(&m.layers[0].bias) {
                assert_eq!(*x, b.tanh());
            }
        }
    }

    #[test]
    fn layer_range_and_width_checked() {
        let m = model();
        let z = LayerVectors {
            layer: 0,
            vectors: vec![vec![0.0; 64]],
        };
        assert!(matches!(
            m.apply_layer(0, &z),
            Err(Error::LayerOutOfRange { .. })
        ));
        assert!(m.apply_layer(7, &z).is_err());
        assert!(m.apply_layer(2, &z).is_err());
        let bad = LayerVectors {
            layer: 0,
            vectors: vec![vec![0.0; 3]],
        };
        assert!(matches!(
            m.apply_layer(1, &bad),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn forward_all_composes_layers() {
        let m = model();
        let t = m.tokenize("she runs home").unwrap();
        let all = m.forward_all(&t).unwrap();
        assert_eq!(all.len(), 7);
        for j in 1..all.len() {
            assert_eq!(m.apply_layer(j, &all[j - 1]).unwrap(), all[j]);
            assert_eq!(all[j].vectors.len(), t.len());
        }
    }

    #[test]
    fn spectral_norm_is_scaled() {
        let m = model();
        for l in &m.layers {
            assert!((spectral_norm(&l.weights, 64) - 0.9).abs() < 1e-6);
        }
    }

    #[test]
    fn paired_words_share_concept() {
        let m = model();
        let diff = crate::linalg::sub(&m.base_vector("she"), &m.base_vector("he"));
        let far = crate::linalg::sub(&m.base_vector("she"), &m.base_vector("mary"));
        assert!(norm(&diff) < 0.2 * norm(&far));
    }

    #[test]
    fn lexicon_conflicts_rejected() {
        let mut lex = GenderLexicon::new();
        lex.add_word("alex", Gender::Male).unwrap();
        assert!(lex.add_word("alex", Gender::Female).is_err());
        assert!(lex.add_pair("alex", "bob").is_err());
        assert!(lex.add_pair("same", "same").is_err());
    }

    #[test]
    fn word_pieces_chunked() {
        let m = model();
        assert_eq!(m.word_pieces("Velina").unwrap(), vec!["ve", "##li", "##na"]);
        assert_eq!(m.word_pieces("abc").unwrap(), vec!["ab", "##c"]);
    }
}
