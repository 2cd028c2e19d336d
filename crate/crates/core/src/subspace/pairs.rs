use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::LayeredModel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub female: String,
    pub male: String,
    pub active: bool,
}

/// Ordered female/male word pairs. Inactive entries are kept so a data file
/// can list candidates and switch them on or off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenderPairList {
    entries: Vec<PairEntry>,
}

impl GenderPairList {
    pub fn new(pairs: &[(&str, &str)]) -> Result<Self> {
        let entries = pairs
            .iter()
            .map(|(f, m)| PairEntry {
                female: f.to_lowercase(),
                male: m.to_lowercase(),
                active: true,
            })
            .collect();
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<PairEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            for w in [&e.female, &e.male] {
                if !seen.insert(w.clone()) {
                    return Err(Error::InvalidInput(format!(
                        "word {w:?} appears in more than one pair position"
                    )));
                }
            }
        }
        let list = GenderPairList { entries };
        if list.active().next().is_none() {
            return Err(Error::InvalidInput(
                "gender pair list has no active pairs".into(),
            ));
        }
        Ok(list)
    }

    /// Parses `female male` lines; a trailing `off` marks an inactive pair,
    /// `#` starts a comment.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let active = match fields.as_slice() {
                [_, _] => true,
                [_, _, "off"] => false,
                _ => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        "expected `female male` or `female male off`",
                    ))
                }
            };
            entries.push(PairEntry {
                female: fields[0].to_lowercase(),
                male: fields[1].to_lowercase(),
                active,
            });
        }
        Self::from_entries(entries)
    }

    /// Activates every pair except those containing one of `words`.
    pub fn with_dropped(&self, words: &[String]) -> Result<Self> {
        let drop: BTreeSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
        for w in &drop {
            if !self.entries.iter().any(|e| &e.female == w || &e.male == w) {
                return Err(Error::InvalidInput(format!("no pair contains {w:?}")));
            }
        }
        let entries = self
            .entries
            .iter()
            .map(|e| PairEntry {
                active: !drop.contains(&e.female) && !drop.contains(&e.male),
                ..e.clone()
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[PairEntry] {
        &self.entries
    }

    /// Active pairs as `(female, male)`.
    pub fn active(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter(|e| e.active)
            .map(|e| (e.female.as_str(), e.male.as_str()))
    }

    pub fn len(&self) -> usize {
        self.active().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (f, m) in self.active() {
            h.update(f.as_bytes());
            h.update([0]);
            h.update(m.as_bytes());
            h.update([1]);
        }
        hex::encode(h.finalize())
    }
}

/// Two sentences that differ only at gendered positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitionPair {
    pub female_sentence: String,
    pub male_sentence: String,
    pub female_tokens: crate::model::TokenSequence,
    pub male_tokens: crate::model::TokenSequence,
    /// Token indices (sentinel at index 0) where the sequences differ.
    pub pair_positions: Vec<usize>,
}

impl DefinitionPair {
    /// Tokenizes both sentences and records where they differ, without
    /// checking the differences against a pair list.
    pub fn from_sentences(model: &dyn LayeredModel, female: &str, male: &str) -> Result<Self> {
        let ft = model.tokenize(female)?;
        let mt = model.tokenize(male)?;
        if ft.len() != mt.len() {
            return Err(Error::InvalidInput(format!(
                "definition sentences tokenize to {} and {} tokens",
                ft.len(),
                mt.len()
            )));
        }
        let pair_positions = ft
            .tokens()
            .iter()
            .zip(mt.tokens())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect();
        Ok(DefinitionPair {
            female_sentence: female.to_string(),
            male_sentence: male.to_string(),
            female_tokens: ft,
            male_tokens: mt,
            pair_positions,
        })
    }
}

/// Fills `<i>` slots of `template` with the i-th active pair and validates
/// that the two sentences differ exactly at pair-word pieces.
pub fn build_definition_pair(
    model: &dyn LayeredModel,
    pairs: &GenderPairList,
    template: &str,
) -> Result<DefinitionPair> {
    let active: Vec<(&str, &str)> = pairs.active().collect();
    let (female, male) = fill_template(template, &active)?;

    for (f, m) in &active {
        let fp = model.tokenize(f)?;
        let mp = model.tokenize(m)?;
        if fp.len() != mp.len() {
            return Err(Error::PairTokenization {
                female: f.to_string(),
                male: m.to_string(),
                detail: format!("{} vs {} pieces", fp.content().len(), mp.content().len()),
            });
        }
    }
    let dp = DefinitionPair::from_sentences(model, &female, &male)?;

    let mut allowed = BTreeSet::new();
    for (f, m) in &active {
        let fp = model.tokenize(f)?;
        let mp = model.tokenize(m)?;
        for (a, b) in fp.content().iter().zip(mp.content()) {
            allowed.insert((a.clone(), b.clone()));
        }
    }
    for &i in &dp.pair_positions {
        let key = (
            dp.female_tokens.tokens()[i].clone(),
            dp.male_tokens.tokens()[i].clone(),
        );
        if !allowed.contains(&key) {
            return Err(Error::InvalidInput(format!(
                "definition sentences differ at token {i} ({:?} vs {:?}), which is not a pair word",
                key.0, key.1
            )));
        }
    }
    if dp.pair_positions.is_empty() {
        return Err(Error::InvalidInput(
            "definition sentences are identical".into(),
        ));
    }
    Ok(dp)
}

fn fill_template(template: &str, active: &[(&str, &str)]) -> Result<(String, String)> {
    let mut female = String::new();
    let mut male = String::new();
    let mut used = vec![0usize; active.len()];
    let mut rest = template;
    while let Some(start) = rest.find('<') {
        let end = rest[start..]
            .find('>')
            .map(|e| start + e)
            .ok_or_else(|| Error::InvalidInput("unterminated slot in template".into()))?;
        let idx: usize = rest[start + 1..end].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("bad slot {:?} in template", &rest[start..=end]))
        })?;
        let (f, m) = active.get(idx).ok_or_else(|| {
            Error::InvalidInput(format!(
                "template slot <{idx}> but only {} active pairs",
                active.len()
            ))
        })?;
        used[idx] += 1;
        female.push_str(&rest[..start]);
        male.push_str(&rest[..start]);
        female.push_str(f);
        male.push_str(m);
        rest = &rest[end + 1..];
    }
    female.push_str(rest);
    male.push_str(rest);
    if let Some(i) = used.iter().position(|&u| u != 1) {
        return Err(Error::InvalidInput(format!(
            "template must use slot <{i}> exactly once (used {} times)",
            used[i]
        )));
    }
    Ok((female.trim().to_string(), male.trim().to_string()))
}
