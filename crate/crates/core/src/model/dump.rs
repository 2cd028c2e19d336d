//! Embedding dump files and a replay backend over them.
//!
//! ```text
//! embedding-dump v1
//! width <d>
//! layers <L+1>
//! records <n>
//! record <i>
//! text <json string>
//! tokens <count> <json array>
//! layer 0
//! <count rows of d decimals>
//! layer 1
//! ...
//! ```
//!
//! Leading `#` lines are ignored on read.

use std::collections::HashMap;
use std::path::Path;

use super::{fmt_row, parse_row, LayerVectors, LayeredModel, TokenSequence};
use crate::error::{Error, Result};

const MAGIC: &str = "embedding-dump v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub text: String,
    pub tokens: TokenSequence,
    /// One entry per layer `0..=L`.
    pub layers: Vec<LayerVectors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub width: usize,
    /// Number of stored layers, `L + 1`.
    pub layers: usize,
    pub records: Vec<DumpRecord>,
}

impl EmbeddingDump {
    pub fn new(width: usize, layers: usize) -> Self {
        EmbeddingDump {
            width,
            layers,
            records: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        text: &str,
        tokens: TokenSequence,
        layers: Vec<LayerVectors>,
    ) -> Result<()> {
        if layers.len() != self.layers {
            return Err(Error::CountMismatch {
                what: "dump record layers".into(),
                declared: self.layers,
                observed: layers.len(),
            });
        }
        for l in &layers {
            if l.vectors.len() != tokens.len() {
                return Err(Error::CountMismatch {
                    what: "dump record vectors".into(),
                    declared: tokens.len(),
                    observed: l.vectors.len(),
                });
            }
            if let Some(v) = l.vectors.iter().find(|v| v.len() != self.width) {
                return Err(Error::LengthMismatch {
                    expected: self.width,
                    found: v.len(),
                });
            }
        }
        self.records.push(DumpRecord {
            text: text.to_string(),
            tokens,
            layers,
        });
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        s.push_str(&format!("width {}\n", self.width));
        s.push_str(&format!("layers {}\n", self.layers));
        s.push_str(&format!("records {}\n", self.records.len()));
        for (i, r) in self.records.iter().enumerate() {
            s.push_str(&format!("record {i}\n"));
            s.push_str(&format!(
                "text {}\n",
                serde_json::to_string(&r.text).expect("string serializes")
            ));
            s.push_str(&format!(
                "tokens {} {}\n",
                r.tokens.len(),
                serde_json::to_string(r.tokens.tokens()).expect("tokens serialize")
            ));
            for l in &r.layers {
                s.push_str(&format!("layer {}\n", l.layer));
                for v in &l.vectors {
                    s.push_str(&fmt_row(v));
                    s.push('\n');
                }
            }
        }
        s
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .skip_while(|(_, l)| l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| {
                Error::parse(path, 0, format!("unexpected end of file, expected {what}"))
            })
        };
        let (n, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(Error::parse(path, n, format!("expected {MAGIC:?}")));
        }
        let width = keyed_usize(next("width")?, "width", path)?;
        let layers = keyed_usize(next("layers")?, "layers", path)?;
        let count = keyed_usize(next("records")?, "records", path)?;
        let mut dump = EmbeddingDump::new(width, layers);
        for i in 0..count {
            let idx = keyed_usize(next("record")?, "record", path)?;
            if idx != i {
                return Err(Error::parse(path, 0, format!("record {idx} out of order")));
            }
            let (n, line) = next("text")?;
            let text: String = line
                .strip_prefix("text ")
                .ok_or_else(|| Error::parse(path, n, "expected text"))
                .and_then(|t| {
                    serde_json::from_str(t).map_err(|e| Error::parse(path, n, e.to_string()))
                })?;
            let (n, line) = next("tokens")?;
            let rest = line
                .strip_prefix("tokens ")
                .ok_or_else(|| Error::parse(path, n, "expected tokens"))?;
            let (cnt, json) = rest
                .split_once(' ')
                .ok_or_else(|| Error::parse(path, n, "expected token count and list"))?;
            let cnt: usize = cnt
                .parse()
                .map_err(|_| Error::parse(path, n, "bad token count"))?;
            let toks: Vec<String> =
                serde_json::from_str(json).map_err(|e| Error::parse(path, n, e.to_string()))?;
            if toks.len() != cnt {
                return Err(Error::parse(path, n, "token count does not match list"));
            }
            let tokens = TokenSequence::new(toks)?;
            let mut lv = Vec::with_capacity(layers);
            for j in 0..layers {
                let l = keyed_usize(next("layer")?, "layer", path)?;
                if l != j {
                    return Err(Error::parse(path, 0, format!("layer {l} out of order")));
                }
                let mut vectors = Vec::with_capacity(cnt);
                for _ in 0..cnt {
                    let (n, row) = next("vector row")?;
                    vectors.push(parse_row(row, width, path, n)?);
                }
                lv.push(LayerVectors { layer: j, vectors });
            }
            dump.push(&text, tokens, lv)?;
        }
        Ok(dump)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn keyed_usize((n, line): (usize, &str), key: &str, path: &str) -> Result<usize> {
    line.strip_prefix(key)
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, n, format!("expected `{key} <integer>`")))
}

/// Serves stored vectors. Layers cannot be applied to vectors that were not
/// recorded, so only the independent extraction mode works on a replay.
pub struct ReplayModel {
    id: String,
    dump: EmbeddingDump,
    by_text: HashMap<String, usize>,
    by_tokens: HashMap<TokenSequence, usize>,
}

impl ReplayModel {
    pub fn new(id: &str, dump: EmbeddingDump) -> Result<Self> {
        if dump.layers == 0 {
            return Err(Error::InvalidInput("dump has no layers".into()));
        }
        let mut by_text = HashMap::new();
        let mut by_tokens = HashMap::new();
        for (i, r) in dump.records.iter().enumerate() {
            by_text.entry(r.text.clone()).or_insert(i);
            by_tokens.entry(r.tokens.clone()).or_insert(i);
        }
        Ok(ReplayModel {
            id: id.to_string(),
            dump,
            by_text,
            by_tokens,
        })
    }

    fn record(&self, tokens: &TokenSequence) -> Result<&DumpRecord> {
        self.by_tokens
            .get(tokens)
            .map(|&i| &self.dump.records[i])
            .ok_or_else(|| Error::InvalidInput(format!("tokens {:?} not in dump", tokens.tokens())))
    }
}

impl LayeredModel for ReplayModel {
    fn id(&self) -> String {
        format!("replay({})", self.id)
    }

    fn layer_count(&self) -> usize {
        self.dump.layers - 1
    }

    fn width(&self) -> usize {
        self.dump.width
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        self.by_text
            .get(text)
            .map(|&i| self.dump.records[i].tokens.clone())
            .ok_or_else(|| Error::InvalidInput(format!("text {text:?} not in dump")))
    }

    fn embed0(&self, tokens: &TokenSequence) -> Result<LayerVectors> {
        Ok(self.record(tokens)?.layers[0].clone())
    }

    fn apply_layer(&self, layer: usize, input: &LayerVectors) -> Result<LayerVectors> {
        super::check_layer_input(self, layer, input)?;
        self.dump
            .records
            .iter()
            .find(|r| r.layers[layer - 1].vectors == input.vectors)
            .map(|r| r.layers[layer].clone())
            .ok_or_else(|| {
                Error::InvalidInput(
                    "replayed dumps cannot apply layers to unrecorded vectors; use a live model"
                        .into(),
                )
            })
    }

    fn forward_all(&self, tokens: &TokenSequence) -> Result<Vec<LayerVectors>> {
        Ok(self.record(tokens)?.layers.clone())
    }
}
