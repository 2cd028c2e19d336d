//! Equity evaluation corpus: template sentences that differ only in a
//! gendered person term, and the score-gap statistics computed from a
//! system's predictions on them.

mod report;

pub use report::{
    compare_reports, equity_report, paired_t_test, ComparisonRow, EmotionRow, EquityReport, TTest,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Gender;

const DEFAULT_SPEC: &str = include_str!("../../data/eec_spec.txt");
const PERSON_SLOT: &str = "<person>";
const EMOTION_SLOT: &str = "<emotion>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmotionCategory {
    pub name: String,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EecSpec {
    pub templates: Vec<String>,
    pub female_names: Vec<String>,
    pub male_names: Vec<String>,
    /// `(female phrase, male phrase)`.
    pub phrase_pairs: Vec<(String, String)>,
    pub emotions: Vec<EmotionCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonKind {
    Name,
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Person {
    pub text: String,
    pub gender: Gender,
    pub kind: PersonKind,
    /// Index of the phrase pair for phrases.
    pub pair: Option<usize>,
}

impl EecSpec {
    /// The bundled emotional-state corpus definition.
    pub fn default_spec() -> Self {
        let spec =
            Self::parse(DEFAULT_SPEC, "<bundled eec_spec.txt>").expect("bundled spec parses");
        spec.check_standard()
            .expect("bundled spec has standard counts");
        spec
    }

    pub fn default_text() -> &'static str {
        DEFAULT_SPEC
    }

    /// Parses the sectioned text format. Lines are trimmed; blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut spec = EecSpec {
            templates: Vec::new(),
            female_names: Vec::new(),
            male_names: Vec::new(),
            phrase_pairs: Vec::new(),
            emotions: Vec::new(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                match name {
                    "templates" | "female_names" | "male_names" | "phrase_pairs" | "emotions" => {
                        section = Some(name.to_string())
                    }
                    _ => return Err(Error::parse(path, n, format!("unknown section [{name}]"))),
                }
                continue;
            }
            match section.as_deref() {
                None => return Err(Error::parse(path, n, "content before the first section")),
                Some("templates") => spec.templates.push(line.to_string()),
                Some("female_names") => spec.female_names.push(line.to_string()),
                Some("male_names") => spec.male_names.push(line.to_string()),
                Some("phrase_pairs") => {
                    let (f, m) = line
                        .split_once('|')
                        .map(|(f, m)| (f.trim(), m.trim()))
                        .filter(|(f, m)| !f.is_empty() && !m.is_empty())
                        .ok_or_else(|| {
                            Error::parse(path, n, "expected `female phrase | male phrase`")
                        })?;
                    spec.phrase_pairs.push((f.to_string(), m.to_string()));
                }
                Some(_) => {
                    let (name, words) = line.split_once(':').ok_or_else(|| {
                        Error::parse(path, n, "expected `category: word, word, ...`")
                    })?;
                    let words: Vec<String> = words
                        .split(',')
                        .map(|w| w.trim().to_string())
                        .filter(|w| !w.is_empty())
                        .collect();
                    if name.trim().is_empty() || words.is_empty() {
                        return Err(Error::parse(path, n, "empty emotion category"));
                    }
                    spec.emotions.push(EmotionCategory {
                        name: name.trim().to_string(),
                        words,
                    });
                }
            }
        }
        if spec.templates.is_empty() || spec.emotions.is_empty() {
            return Err(Error::parse(path, 0, "spec needs templates and emotions"));
        }
        if spec.female_names.len() != spec.male_names.len() {
            return Err(Error::CountMismatch {
                what: "male names (must match female names)".into(),
                declared: spec.female_names.len(),
                observed: spec.male_names.len(),
            });
        }
        if spec.female_names.is_empty() && spec.phrase_pairs.is_empty() {
            return Err(Error::parse(path, 0, "spec has no persons"));
        }
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks the standard corpus shape: 7 templates, 20 + 20 names,
    /// 10 phrase pairs, 4 emotions of 5 words each.
    pub fn check_standard(&self) -> Result<()> {
        let checks = [
            ("templates", 7, self.templates.len()),
            ("female names", 20, self.female_names.len()),
            ("male names", 20, self.male_names.len()),
            ("phrase pairs", 10, self.phrase_pairs.len()),
            ("emotion categories", 4, self.emotions.len()),
        ];
        for (what, declared, observed) in checks {
            if declared != observed {
                return Err(Error::CountMismatch {
                    what: what.into(),
                    declared,
                    observed,
                });
            }
        }
        for e in &self.emotions {
            if e.words.len() != 5 {
                return Err(Error::CountMismatch {
                    what: format!("words for emotion {}", e.name),
                    declared: 5,
                    observed: e.words.len(),
                });
            }
        }
        Ok(())
    }

    /// Female names, male names, then female and male phrases.
    pub fn persons(&self) -> Vec<Person> {
        let name = |t: &String, g| Person {
            text: t.clone(),
            gender: g,
            kind: PersonKind::Name,
            pair: None,
        };
        let phrase = |(i, t): (usize, &String), g| Person {
            text: t.clone(),
            gender: g,
            kind: PersonKind::Phrase,
            pair: Some(i),
        };
        self.female_names
            .iter()
            .map(|t| name(t, Gender::Female))
            .chain(self.male_names.iter().map(|t| name(t, Gender::Male)))
            .chain(
                self.phrase_pairs
                    .iter()
                    .map(|p| &p.0)
                    .enumerate()
                    .map(|p| phrase(p, Gender::Female)),
            )
            .chain(
                self.phrase_pairs
                    .iter()
                    .map(|p| &p.1)
                    .enumerate()
                    .map(|p| phrase(p, Gender::Male)),
            )
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EecSentence {
    pub id: usize,
    pub text: String,
    pub template: usize,
    /// Index into [`EecSpec::persons`].
    pub person: usize,
    pub gender: Gender,
    pub kind: PersonKind,
    /// Index into [`EecSpec::emotions`].
    pub emotion: usize,
    pub word: String,
}

/// Every (template, emotion word, person) combination, in that order.
pub fn generate_corpus(spec: &EecSpec) -> Result<Vec<EecSentence>> {
    for t in &spec.templates {
        if t.matches(PERSON_SLOT).count() != 1 || t.matches(EMOTION_SLOT).count() != 1 {
            return Err(Error::InvalidInput(format!(
                "template {t:?} must contain {PERSON_SLOT} and {EMOTION_SLOT} exactly once"
            )));
        }
    }
    let persons = spec.persons();
    let mut out = Vec::new();
    for (ti, t) in spec.templates.iter().enumerate() {
        for (ei, e) in spec.emotions.iter().enumerate() {
            for w in &e.words {
                for (pi, p) in persons.iter().enumerate() {
                    out.push(EecSentence {
                        id: out.len(),
                        text: t.replace(PERSON_SLOT, &p.text).replace(EMOTION_SLOT, w),
                        template: ti,
                        person: pi,
                        gender: p.gender,
                        kind: p.kind,
                        emotion: ei,
                        word: w.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// One female/male score pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePair {
    pub template: usize,
    pub emotion: String,
    pub word: String,
    /// `None` for the name-average pair, otherwise the phrase pair index.
    pub phrase_pair: Option<usize>,
    pub female: f64,
    pub male: f64,
}

impl ScorePair {
    pub const CSV_HEADER: &'static str = "template,emotion,word,source,female,male";

    pub fn to_csv(&self) -> String {
        let source = self
            .phrase_pair
            .map_or_else(|| "names".to_string(), |i| format!("phrase{i}"));
        format!(
            "{},{},{},{},{},{}",
            self.template,
            self.emotion,
            self.word,
            source,
            crate::model::fmt_f64(self.female),
            crate::model::fmt_f64(self.male)
        )
    }
}

/// Per (template, emotion word): one pair of mean female-name and mean
/// male-name scores, then one pair per phrase pair.
pub fn score_pairs(
    spec: &EecSpec,
    sentences: &[EecSentence],
    predictions: &BTreeMap<usize, f64>,
) -> Result<Vec<ScorePair>> {
    let missing: Vec<usize> = sentences
        .iter()
        .filter(|s| !predictions.contains_key(&s.id))
        .map(|s| s.id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let mut groups: BTreeMap<(usize, usize, &str), Vec<&EecSentence>> = BTreeMap::new();
    let word_rank = |e: usize, w: &str| {
        spec.emotions[e]
            .words
            .iter()
            .position(|x| x == w)
            .unwrap_or(0)
    };
    for s in sentences {
        groups
            .entry((s.template, s.emotion, s.word.as_str()))
            .or_default()
            .push(s);
    }
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_by_key(|&(t, e, w)| (t, e, word_rank(e, w)));

    let persons = spec.persons();
    let mut out = Vec::new();
    for key in keys {
        let group = &groups[&key];
        let (t, e, w) = key;
        let score = |s: &&EecSentence| predictions[&s.id];
        let names = |g: Gender| -> Vec<f64> {
            group
                .iter()
                .filter(|s| s.kind == PersonKind::Name && s.gender == g)
                .map(score)
                .collect()
        };
        let (f, m) = (names(Gender::Female), names(Gender::Male));
        if !f.is_empty() && !m.is_empty() {
            out.push(ScorePair {
                template: t,
                emotion: spec.emotions[e].name.clone(),
                word: w.to_string(),
                phrase_pair: None,
                female: f.iter().sum::<f64>() / f.len() as f64,
                male: m.iter().sum::<f64>() / m.len() as f64,
            });
        }
        for pair in 0..spec.phrase_pairs.len() {
            let find = |g: Gender| {
                group
                    .iter()
                    .find(|s| persons[s.person].pair == Some(pair) && s.gender == g)
                    .map(score)
            };
            if let (Some(female), Some(male)) = (find(Gender::Female), find(Gender::Male)) {
                out.push(ScorePair {
                    template: t,
                    emotion: spec.emotions[e].name.clone(),
                    word: w.to_string(),
                    phrase_pair: Some(pair),
                    female,
                    male,
                });
            }
        }
    }
    Ok(out)
}
