//! The layered-model abstraction and its backends.
//!
//! A layered model turns text into a token sequence, maps tokens to
//! context-independent vectors (layer 0), and then applies layers `1..=L`
//! one at a time. Interactive access to single layers is what lets the
//! iterative extraction inject projected vectors between layers.

mod bridge;
mod dump;
mod synthetic;

pub use bridge::{BridgeModel, BridgeRequest, BridgeResponse, LineTransport};
pub use dump::{DumpRecord, EmbeddingDump, ReplayModel};
pub use synthetic::{Gender, GenderLexicon, SyntheticConfig, SyntheticModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens of one input, framed by a start and an end sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps tokens that already include both sentinels.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "token sequence needs two sentinels and at least one content token, got {} tokens",
                tokens.len()
            )));
        }
        Ok(TokenSequence(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Content tokens without the sentinels.
    pub fn content(&self) -> &[String] {
        &self.0[1..self.0.len() - 1]
    }
}

/// One vector per token at a given layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerVectors {
    pub layer: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl LayerVectors {
    pub fn width(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Tokenizer plus per-layer vector transform.
pub trait LayeredModel: Send + Sync {
    /// Stable identifier recorded in every artifact derived from the model.
    fn id(&self) -> String;

    /// Number of transform layers `L`; layer indices run `0..=L`.
    fn layer_count(&self) -> usize;

    fn width(&self) -> usize;

    fn tokenize(&self, text: &str) -> Result<TokenSequence>;

    /// Context-independent vectors (layer 0).
    fn embed0(&self, tokens: &TokenSequence) -> Result<LayerVectors>;

    /// Applies layer `layer` (1..=L) to vectors produced at `layer - 1`.
    fn apply_layer(&self, layer: usize, input: &LayerVectors) -> Result<LayerVectors>;

    /// All layers `0..=L` for one token sequence.
    fn forward_all(&self, tokens: &TokenSequence) -> Result<Vec<LayerVectors>> {
        let mut out = Vec::with_capacity(self.layer_count() + 1);
        out.push(self.embed0(tokens)?);
        for j in 1..=self.layer_count() {
            let next = self.apply_layer(j, &out[j - 1])?;
            out.push(next);
        }
        Ok(out)
    }

    /// Subword pieces of a single word, used by the token-level baseline.
    fn word_pieces(&self, word: &str) -> Result<Vec<String>> {
        Ok(self.tokenize(word)?.content().to_vec())
    }
}

/// Shared precondition check for `apply_layer` implementations.
pub(crate) fn check_layer_input(
    model: &dyn LayeredModel,
    layer: usize,
    input: &LayerVectors,
) -> Result<()> {
    if layer == 0 || layer > model.layer_count() {
        return Err(Error::LayerOutOfRange {
            index: layer,
            max: model.layer_count(),
        });
    }
    if input.layer + 1 != layer {
        return Err(Error::InvalidInput(format!(
            "layer {layer} expects vectors from layer {}, got layer {}",
            layer - 1,
            input.layer
        )));
    }
    for v in &input.vectors {
        if v.len() != model.width() {
            return Err(Error::LengthMismatch {
                expected: model.width(),
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Fixed-width decimal used by every text artifact; 17 significant digits
/// so values round-trip bit-exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn fmt_row(row: &[f64]) -> String {
    row.iter()
        .map(|x| fmt_f64(*x))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_row(line: &str, width: usize, path: &str, lineno: usize) -> Result<Vec<f64>> {
    let row = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::parse(path, lineno, format!("bad number {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if row.len() != width {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {width} values, found {}", row.len()),
        ));
    }
    Ok(row)
}
