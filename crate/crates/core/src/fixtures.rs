//! Bundled data files and the generators behind the desk-scale fixtures.
//!
//! The shipped word lists are pseudo-words, not the upstream Gen-data: they
//! reproduce its sizes, and gendered words lean toward a few final
//! syllables so that subword models have something to learn.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eec::EecSpec;
use crate::error::{Error, Result};
use crate::gendata::{GenData, WordLists};
use crate::model::{Gender, GenderLexicon};
use crate::subspace::GenderPairList;

pub const GENDER_PAIRS: &str = include_str!("../data/gender_pairs.txt");
pub const DEFINITION_TEMPLATE: &str = include_str!("../data/definition_template.txt");
pub const GENDATA_TRAIN: &str = include_str!("../data/gendata_train.txt");
pub const GENDATA_TEST: &str = include_str!("../data/gendata_test.txt");

/// Seed the shipped word lists were generated with.
pub const GENDATA_SEED: u64 = 2020;
/// `[female, male, neutral]` sizes of each split.
pub const GENDATA_TRAIN_COUNTS: [usize; 3] = [222, 222, 222];
pub const GENDATA_TEST_COUNTS: [usize; 3] = [404, 595, 5701];

/// Synthetic model seeds used by the fixture-level checks.
pub const FIXTURE_SEEDS: [u64; 5] = [7, 11, 23, 42, 101];
/// Layer the intensity regressors read on the default synthetic model.
/// Deeper layers contract the vectors enough that training at the default
/// learning rate runs out of epochs before it fits.
pub const REGRESSOR_FIXTURE_LAYER: usize = 2;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const FEMALE_ENDINGS: [&str; 5] = ["la", "ne", "ri", "sa", "ti"];
const MALE_ENDINGS: [&str; 5] = ["do", "ko", "ru", "bo", "go"];
/// Chance that a gendered word takes one of its gender's endings.
const ENDING_BIAS: f64 = 0.75;

pub fn default_pairs() -> GenderPairList {
    GenderPairList::parse(GENDER_PAIRS, "<bundled gender_pairs.txt>").expect("bundled pairs parse")
}

/// First non-comment line of a template file.
pub fn template_line(text: &str) -> Result<String> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidInput("template file has no template line".into()))
}

pub fn default_template() -> String {
    template_line(DEFINITION_TEMPLATE).expect("bundled template")
}

pub fn default_gendata() -> GenData {
    GenData::new(
        WordLists::parse(GENDATA_TRAIN, "<bundled gendata_train.txt>").expect("bundled train list"),
        WordLists::parse(GENDATA_TEST, "<bundled gendata_test.txt>").expect("bundled test list"),
    )
    .expect("bundled splits are disjoint")
}

/// Gendered vocabulary for the synthetic backend: every definitional pair
/// (inactive ones too), the EEC names and phrase pairs, and the gendered
/// bundled word lists.
pub fn default_lexicon() -> GenderLexicon {
    let mut lex = GenderLexicon::new();
    for e in default_pairs().entries() {
        lex.add_pair(&e.female, &e.male)
            .expect("pairs are consistent");
    }
    let spec = EecSpec::default_spec();
    for (f, m) in &spec.phrase_pairs {
        let fw: Vec<&str> = f.split_whitespace().collect();
        let mw: Vec<&str> = m.split_whitespace().collect();
        for (a, b) in fw.iter().zip(&mw).filter(|(a, b)| a != b) {
            lex.add_pair(a, b).expect("phrase pairs are consistent");
        }
    }
    for w in &spec.female_names {
        lex.add_word(w, Gender::Female)
            .expect("names are consistent");
    }
    for w in &spec.male_names {
        lex.add_word(w, Gender::Male).expect("names are consistent");
    }
    let data = default_gendata();
    for lists in [&data.train, &data.test] {
        for (w, g) in lists.gendered() {
            lex.add_word(w, g).expect("word lists are consistent");
        }
    }
    lex
}

/// Draws unique pseudo-words of three or four consonant-vowel syllables.
pub struct PseudoWords {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl PseudoWords {
    /// `reserved` words are never produced.
    pub fn new(seed: u64, reserved: impl IntoIterator<Item = String>) -> Self {
        PseudoWords {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: reserved.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    fn syllable(&mut self) -> String {
        let c = CONSONANTS[self.rng.gen_range(0..CONSONANTS.len())] as char;
        let v = VOWELS[self.rng.gen_range(0..VOWELS.len())] as char;
        format!("{c}{v}")
    }

    fn neutral_ending(&mut self) -> String {
        loop {
            let s = self.syllable();
            if !FEMALE_ENDINGS.contains(&s.as_str()) && !MALE_ENDINGS.contains(&s.as_str()) {
                return s;
            }
        }
    }

    /// A fresh word whose last syllable leans toward `gender`'s endings.
    pub fn word(&mut self, gender: Option<Gender>) -> String {
        loop {
            let n = self.rng.gen_range(2..4);
            let mut w: String = (0..n).map(|_| self.syllable()).collect();
            let endings = match gender {
                Some(Gender::Female) => Some(&FEMALE_ENDINGS),
                Some(Gender::Male) => Some(&MALE_ENDINGS),
                None => None,
            };
            match endings {
                Some(e) if self.rng.gen_bool(ENDING_BIAS) => {
                    w.push_str(e.choose(&mut self.rng).expect("nonempty"))
                }
                _ => {
                    let s = self.neutral_ending();
                    w.push_str(&s);
                }
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

/// Words that pseudo-word generation must avoid: the pair list and the
/// EEC vocabulary.
pub fn reserved_words() -> Vec<String> {
    let mut out: Vec<String> = default_pairs()
        .entries()
        .iter()
        .flat_map(|e| [e.female.clone(), e.male.clone()])
        .collect();
    let spec = EecSpec::default_spec();
    out.extend(
        spec.female_names
            .iter()
            .chain(&spec.male_names)
            .map(|w| w.to_lowercase()),
    );
    for t in spec
        .templates
        .iter()
        .chain(spec.phrase_pairs.iter().flat_map(|(f, m)| [f, m]))
    {
        out.extend(t.split_whitespace().map(str::to_string));
    }
    for e in &spec.emotions {
        out.extend(e.words.iter().cloned());
    }
    out
}

/// Pseudo-word lists with the given `[female, male, neutral]` sizes.
pub fn generate_gendata(seed: u64, train: [usize; 3], test: [usize; 3]) -> Result<GenData> {
    let mut gen = PseudoWords::new(seed, reserved_words());
    let mut draw = |counts: [usize; 3]| WordLists {
        female: (0..counts[0])
            .map(|_| gen.word(Some(Gender::Female)))
            .collect(),
        male: (0..counts[1])
            .map(|_| gen.word(Some(Gender::Male)))
            .collect(),
        neutral: (0..counts[2]).map(|_| gen.word(None)).collect(),
    };
    let tr = draw(train);
    let te = draw(test);
    GenData::new(tr, te)
}
