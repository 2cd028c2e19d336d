use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{dot, Direction};
use crate::model::{fmt_f64, fmt_row, parse_row};

const MAGIC: &str = "directionset v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractionMode {
    Independent,
    Iterative,
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractionMode::Independent => "independent",
            ExtractionMode::Iterative => "iterative",
        })
    }
}

impl FromStr for ExtractionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ExtractionMode::Independent),
            "iterative" => Ok(ExtractionMode::Iterative),
            _ => Err(Error::InvalidInput(format!(
                "unknown extraction mode {s:?}"
            ))),
        }
    }
}

/// Which token positions contribute difference vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PositionPolicy {
    /// Every position, sentinels included.
    All,
    /// Only positions where the two sentences differ.
    #[default]
    PairsOnly,
}

impl fmt::Display for PositionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PositionPolicy::All => "all",
            PositionPolicy::PairsOnly => "pairs_only",
        })
    }
}

impl FromStr for PositionPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PositionPolicy::All),
            "pairs_only" | "pairs-only" | "pairs" => Ok(PositionPolicy::PairsOnly),
            _ => Err(Error::InvalidInput(format!(
                "unknown position policy {s:?}"
            ))),
        }
    }
}

/// Ranked directions of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDirections {
    pub layer: usize,
    pub directions: Vec<Direction>,
    /// Squared Frobenius norm of the layer's difference matrix.
    pub energy: f64,
}

/// Per-layer gender directions with the provenance needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    pub model_id: String,
    pub width: usize,
    pub mode: ExtractionMode,
    pub pair_hash: String,
    pub positions: PositionPolicy,
    pub layers: Vec<LayerDirections>,
}

impl DirectionSet {
    /// Checks unit norms, within-layer orthogonality and widths.
    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.layer != i {
                return Err(Error::InvalidInput(format!(
                    "direction layers out of order: entry {i} is layer {}",
                    l.layer
                )));
            }
            for (a, d) in l.directions.iter().enumerate() {
                if d.dim() != self.width {
                    return Err(Error::LengthMismatch {
                        expected: self.width,
                        found: d.dim(),
                    });
                }
                for e in &l.directions[a + 1..] {
                    let c = dot(d.axis(), e.axis());
                    if c.abs() > 1e-8 {
                        return Err(Error::InvalidInput(format!(
                            "layer {i} directions not orthogonal (inner product {c})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// First (primary) direction of `layer`.
    pub fn primary(&self, layer: usize) -> Result<&Direction> {
        self.layers
            .get(layer)
            .and_then(|l| l.directions.first())
            .ok_or(Error::LayerOutOfRange {
                index: layer,
                max: self.layers.len().saturating_sub(1),
            })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MAGIC}\nmodel {}\nwidth {}\nlayers {}\nmode {}\npairs {}\npositions {}\n",
            self.model_id,
            self.width,
            self.layers.len(),
            self.mode,
            self.pair_hash,
            self.positions
        );
        for l in &self.layers {
            s.push_str(&format!(
                "layer {} directions {} energy {}\n",
                l.layer,
                l.directions.len(),
                fmt_f64(l.energy)
            ));
            let ev: Vec<f64> = l
                .directions
                .iter()
                .map(Direction::explained_variance_ratio)
                .collect();
            s.push_str(&format!("ev {}\n", fmt_row(&ev)).replace("ev \n", "ev\n"));
            for d in &l.directions {
                s.push_str(&fmt_row(d.axis()));
                s.push('\n');
            }
        }
        s
    }

    /// Leading `#` lines are ignored.
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
        let field = |(n, line): (usize, &str), key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(path, n, format!("expected `{key} ...`")))
        };
        let num = |n: usize, v: &str| -> Result<usize> {
            v.trim()
                .parse()
                .map_err(|_| Error::parse(path, n, format!("bad integer {v:?}")))
        };
        let model_id = field(next("model")?, "model")?;
        let l = next("width")?;
        let width = num(l.0, &field(l, "width")?)?;
        let l = next("layers")?;
        let count = num(l.0, &field(l, "layers")?)?;
        let l = next("mode")?;
        let mode = field(l, "mode")?
            .parse()
            .map_err(|e: Error| Error::parse(path, l.0, e.to_string()))?;
        let pair_hash = field(next("pairs")?, "pairs")?;
        let l = next("positions")?;
        let positions = field(l, "positions")?
            .parse()
            .map_err(|e: Error| Error::parse(path, l.0, e.to_string()))?;

        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let (n, line) = next("layer header")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (idx, k, energy) = match parts.as_slice() {
                ["layer", idx, "directions", k, "energy", e] => (
                    num(n, idx)?,
                    num(n, k)?,
                    e.parse::<f64>()
                        .map_err(|_| Error::parse(path, n, "bad energy"))?,
                ),
                _ => return Err(Error::parse(path, n, "expected layer header")),
            };
            if idx != i {
                return Err(Error::parse(path, n, format!("layer {idx} out of order")));
            }
            let (n, line) = next("ev")?;
            let ev_text = line
                .strip_prefix("ev")
                .ok_or_else(|| Error::parse(path, n, "expected `ev ...`"))?;
            let ev = parse_row(ev_text, k, path, n)?;
            let mut directions = Vec::with_capacity(k);
            for r in ev {
                let (n, line) = next("direction row")?;
                let axis = parse_row(line, width, path, n)?;
                directions.push(
                    Direction::new(axis, r).map_err(|e| Error::parse(path, n, e.to_string()))?,
                );
            }
            layers.push(LayerDirections {
                layer: idx,
                directions,
                energy,
            });
        }
        let set = DirectionSet {
            model_id,
            width,
            mode,
            pair_hash,
            positions,
            layers,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}
