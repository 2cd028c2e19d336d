//! Text checkpoints for trained MLPs.
//!
//! ```text
//! mlp-checkpoint v1
//! kind regressor
//! input 64
//! hidden 200
//! outputs 1
//! meta layer 6
//! w1
//! <hidden rows of input decimals>
//! b1
//! <one row>
//! w2
//! <outputs rows of hidden decimals>
//! b2
//! <one row>
//! ```
//!
//! Leading `#` lines are ignored on read.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Mlp, MlpClassifier, MlpRegressor};
use crate::error::{Error, Result};
use crate::model::{fmt_row, parse_row};

const MAGIC: &str = "mlp-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// `regressor` or `classifier`.
    pub kind: String,
    pub mlp: Mlp,
    /// Free-form provenance such as the layer, input setting and direction
    /// set hash. Keys and values may not contain newlines; keys no spaces.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn regressor(model: &MlpRegressor, meta: BTreeMap<String, String>) -> Self {
        Checkpoint {
            kind: "regressor".into(),
            mlp: model.mlp.clone(),
            meta,
        }
    }

    pub fn classifier(model: &MlpClassifier, meta: BTreeMap<String, String>) -> Self {
        Checkpoint {
            kind: "classifier".into(),
            mlp: model.mlp.clone(),
            meta,
        }
    }

    pub fn into_regressor(self) -> Result<MlpRegressor> {
        if self.kind != "regressor" || self.mlp.outputs() != 1 {
            return Err(Error::InvalidInput(format!(
                "checkpoint holds a {} with {} outputs, not a regressor",
                self.kind,
                self.mlp.outputs()
            )));
        }
        Ok(MlpRegressor { mlp: self.mlp })
    }

    pub fn into_classifier(self) -> Result<MlpClassifier> {
        if self.kind != "classifier" {
            return Err(Error::InvalidInput(format!(
                "checkpoint holds a {}, not a classifier",
                self.kind
            )));
        }
        Ok(MlpClassifier { mlp: self.mlp })
    }

    pub fn to_text(&self) -> String {
        let m = &self.mlp;
        let (d, h, o) = (m.input(), m.hidden(), m.outputs());
        let p = m.params();
        let mut s = format!(
            "{MAGIC}\nkind {}\ninput {d}\nhidden {h}\noutputs {o}\n",
            self.kind
        );
        for (k, v) in &self.meta {
            s.push_str(&format!("meta {k} {v}\n"));
        }
        let mut block = |name: &str, data: &[f64], width: usize| {
            s.push_str(name);
            s.push('\n');
            for row in data.chunks(width) {
                s.push_str(&fmt_row(row));
                s.push('\n');
            }
        };
        let b1 = h * d;
        let w2 = b1 + h;
        let b2 = w2 + o * h;
        block("w1", &p[..b1], d);
        block("b1", &p[b1..w2], h);
        block("w2", &p[w2..b2], h);
        block("b2", &p[b2..], o);
        s
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .skip_while(|(_, l)| l.starts_with('#'))
            .peekable();
        let (n, magic) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "empty checkpoint"))?;
        if magic.trim() != MAGIC {
            return Err(Error::parse(path, n, format!("expected {MAGIC:?}")));
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|v| (n, v.trim().to_string()))
                .ok_or_else(|| Error::parse(path, n, format!("expected `{key} ...`")))
        };
        let kind = header("kind")?.1;
        let mut dim = |key: &str| -> Result<usize> {
            let (n, v) = header(key)?;
            v.parse()
                .map_err(|_| Error::parse(path, n, format!("bad {key} {v:?}")))
        };
        let (d, h, o) = (dim("input")?, dim("hidden")?, dim("outputs")?);
        let mut meta = BTreeMap::new();
        while let Some((n, line)) = lines.peek().copied() {
            let Some(rest) = line.strip_prefix("meta ") else {
                break;
            };
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            if meta.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::parse(path, n, format!("duplicate meta key {k:?}")));
            }
            lines.next();
        }
        let mut params = Vec::with_capacity(Mlp::param_count(d, h, o));
        for (name, rows, width) in [("w1", h, d), ("b1", 1, h), ("w2", o, h), ("b2", 1, o)] {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("missing block {name}")))?;
            if line.trim() != name {
                return Err(Error::parse(path, n, format!("expected `{name}`")));
            }
            for _ in 0..rows {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| Error::parse(path, 0, format!("truncated block {name}")))?;
                params.extend(parse_row(line, width, path, n)?);
            }
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::parse(path, n, "trailing content"));
        }
        Ok(Checkpoint {
            kind,
            mlp: Mlp::from_params(d, h, o, params)?,
            meta,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reg = MlpRegressor {
            mlp: Mlp::random(3, 5, 1, &mut rng),
        };
        let mut meta = BTreeMap::new();
        meta.insert("layer".to_string(), "6".to_string());
        meta.insert("directions".to_string(), "none".to_string());
        let c = Checkpoint::regressor(&reg, meta);
        let text = c.to_text();
        let back = Checkpoint::parse(&text, "mem").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.clone().into_regressor().unwrap(), reg);
        assert!(back.into_classifier().is_err());
    }

    #[test]
    fn truncated_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Checkpoint::classifier(
            &MlpClassifier {
                mlp: Mlp::random(2, 3, 2, &mut rng),
            },
            BTreeMap::new(),
        );
        let text = c.to_text();
        let cut: Vec<&str> = text.lines().collect();
        assert!(Checkpoint::parse(&cut[..cut.len() - 1].join("\n"), "mem").is_err());
        assert!(Checkpoint::parse(&text.replace("v1", "v2"), "mem").is_err());
    }
}
