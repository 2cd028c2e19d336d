//! Emotion-intensity regression data.
//!
//! Files are tab-separated `id, text, score` rows. Four-column rows
//! (`id, text, dimension, score`) are accepted as well, so task files in the
//! usual shared-task layout load unchanged. The first non-comment line, if its score column
//! is not a number, is a header; `#` lines are skipped.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixtures::PseudoWords;
use crate::model::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Anger,
    Fear,
    Joy,
    Sadness,
    Valence,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Anger => "anger",
            Task::Fear => "fear",
            Task::Joy => "joy",
            Task::Sadness => "sadness",
            Task::Valence => "valence",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anger" => Ok(Task::Anger),
            "fear" => Ok(Task::Fear),
            "joy" => Ok(Task::Joy),
            "sadness" => Ok(Task::Sadness),
            "valence" => Ok(Task::Valence),
            _ => Err(Error::InvalidInput(format!(
                "unknown task {s:?} (anger, fear, joy, sadness, valence)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRecord {
    pub id: String,
    pub text: String,
    /// Gold intensity in `[0, 1]`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDataset {
    pub records: Vec<IntensityRecord>,
}

impl IntensityDataset {
    pub fn new(records: Vec<IntensityRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("intensity dataset is empty".into()));
        }
        if let Some(r) = records.iter().find(|r| !(0.0..=1.0).contains(&r.score)) {
            return Err(Error::InvalidInput(format!(
                "record {}: intensity {} outside [0, 1]",
                r.id, r.score
            )));
        }
        Ok(IntensityDataset { records })
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut first = true;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let header_allowed = std::mem::take(&mut first);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 && cols.len() != 4 {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected 3 or 4 tab-separated columns, got {}", cols.len()),
                ));
            }
            let raw = cols[cols.len() - 1].trim();
            let score: f64 = match raw.parse() {
                Ok(s) => s,
                Err(_) if header_allowed => continue,
                Err(_) => return Err(Error::parse(path, n, format!("bad intensity {raw:?}"))),
            };
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::parse(
                    path,
                    n,
                    format!("intensity {raw} outside [0, 1]"),
                ));
            }
            if cols[1].trim().is_empty() {
                return Err(Error::parse(path, n, "empty text"));
            }
            records.push(IntensityRecord {
                id: cols[0].trim().to_string(),
                text: cols[1].trim().to_string(),
                score,
            });
        }
        if records.is_empty() {
            return Err(Error::parse(path, 0, "no records"));
        }
        Ok(IntensityDataset { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("id\ttext\tscore\n");
        for r in &self.records {
            s.push_str(&format!("{}\t{}\t{}\n", r.id, r.text, fmt_f64(r.score)));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Knobs of the synthetic intensity generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityFixtureConfig {
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    /// Filler vocabulary size.
    pub fillers: usize,
    /// Filler words per sentence.
    pub per_sentence: usize,
    /// Filler scores are uniform in `[-spread, spread]`.
    pub spread: f64,
    /// Female sentences get `+offset / 2`, male ones `-offset / 2`.
    pub gender_offset: f64,
}

impl Default for IntensityFixtureConfig {
    fn default() -> Self {
        IntensityFixtureConfig {
            seed: 5,
            train: 4000,
            test: 400,
            fillers: 20,
            per_sentence: 2,
            spread: 0.25,
            gender_offset: 0.05,
        }
    }
}

/// Sentences of one gendered person word followed by filler pseudo-words.
/// The score is `0.5 + sum of filler scores +- offset / 2`, clipped to
/// `[0, 1]`. Fillers carry no gender; only the person word does.
pub fn synthetic_intensity(
    cfg: &IntensityFixtureConfig,
    female: &[String],
    male: &[String],
    reserved: impl IntoIterator<Item = String>,
) -> Result<(IntensityDataset, IntensityDataset)> {
    if female.is_empty() || male.is_empty() || cfg.fillers == 0 || cfg.per_sentence == 0 {
        return Err(Error::InvalidInput(
            "intensity fixture needs persons of both genders and filler words".into(),
        ));
    }
    let reserved: Vec<String> = reserved
        .into_iter()
        .chain(female.iter().cloned())
        .chain(male.iter().cloned())
        .collect();
    let mut words = PseudoWords::new(cfg.seed ^ 0x5eed, reserved);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fillers: Vec<(String, f64)> = (0..cfg.fillers)
        .map(|_| (words.word(None), rng.gen_range(-cfg.spread..=cfg.spread)))
        .collect();
    let mut make = |prefix: &str, n: usize| -> Result<IntensityDataset> {
        let records = (0..n)
            .map(|i| {
                let is_female = rng.gen_bool(0.5);
                let person = if is_female {
                    female.choose(&mut rng)
                } else {
                    male.choose(&mut rng)
                }
                .expect("nonempty");
                let mut text = person.clone();
                let mut score = 0.5 + if is_female { 0.5 } else { -0.5 } * cfg.gender_offset;
                for _ in 0..cfg.per_sentence {
                    let (w, s) = fillers.choose(&mut rng).expect("nonempty");
                    text.push(' ');
                    text.push_str(w);
                    score += s;
                }
                IntensityRecord {
                    id: format!("{prefix}-{i:05}"),
                    text,
                    score: score.clamp(0.0, 1.0),
                }
            })
            .collect();
        IntensityDataset::new(records)
    };
    let train = make("train", cfg.train)?;
    let test = make("test", cfg.test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_formats() {
        let d = IntensityDataset::parse("id\ttext\tscore\na\thi there\t0.25\n", "mem").unwrap();
        assert_eq!(d.records[0].text, "hi there");
        let d = IntensityDataset::parse("1\tgrr\tanger\t0.9\n", "mem").unwrap();
        assert_eq!(d.records[0].score, 0.9);
        assert_eq!(IntensityDataset::parse(&d.to_text(), "mem").unwrap(), d);
    }

    #[test]
    fn out_of_range_names_line() {
        let err = IntensityDataset::parse("a\tx\t0.5\nb\ty\t1.5\n", "f.tsv").unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
        assert!(IntensityDataset::parse("a\tx\t0.5\nb\ty\tnope\n", "f").is_err());
        assert!(IntensityDataset::parse("", "f").is_err());
        assert!(IntensityDataset::parse("a\tx\n", "f").is_err());
    }

    #[test]
    fn fixture_is_deterministic() {
        let f = vec!["ana".to_string()];
        let m = vec!["bob".to_string()];
        let cfg = IntensityFixtureConfig {
            train: 20,
            test: 5,
            ..Default::default()
        };
        let a = synthetic_intensity(&cfg, &f, &m, []).unwrap();
        let b = synthetic_intensity(&cfg, &f, &m, []).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 20);
        assert!(a.0.records.iter().all(|r| r.text.split(' ').count() == 3));
    }
}
