//! Gendered word lists and the two evaluations built on them: threshold
//! separability along extracted directions, and trained gender probes.
//!
//! Word-list files declare their sizes in a header line and list one word
//! per line under `[female]`, `[male]` and `[neutral]`:
//!
//! ```text
//! counts female=222 male=222 neutral=222
//! [female]
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Direction;
use crate::model::{Gender, LayerVectors, LayeredModel};
use crate::neural::{train_classifier, TrainConfig};
use crate::subspace::{
    debias_forward, fit_threshold, separability, DirectionSet, Orientation, Projection,
};

const SECTIONS: [&str; 3] = ["female", "male", "neutral"];

/// One split of the word lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordLists {
    pub female: Vec<String>,
    pub male: Vec<String>,
    pub neutral: Vec<String>,
}

impl WordLists {
    fn section_mut(&mut self, name: &str) -> Option<&mut Vec<String>> {
        match name {
            "female" => Some(&mut self.female),
            "male" => Some(&mut self.male),
            "neutral" => Some(&mut self.neutral),
            _ => None,
        }
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.female.len(), self.male.len(), self.neutral.len()]
    }

    /// Gendered words with their gender, female first.
    pub fn gendered(&self) -> Vec<(&str, Gender)> {
        self.female
            .iter()
            .map(|w| (w.as_str(), Gender::Female))
            .chain(self.male.iter().map(|w| (w.as_str(), Gender::Male)))
            .collect()
    }

    /// Parses one word-list file. Words are lowercased; repeats within a
    /// section keep the first occurrence; a word in two sections is an error.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "empty word-list file"))?;
        let declared = parse_counts(header)
            .ok_or_else(|| Error::parse(path, n, "expected `counts female=N male=N neutral=N`"))?;

        let mut lists = WordLists::default();
        let mut owner: BTreeMap<String, &str> = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (n, line) in lines {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = SECTIONS
                    .iter()
                    .find(|s| **s == name)
                    .ok_or_else(|| Error::parse(path, n, format!("unknown section [{name}]")))?;
                section = Some(name);
                continue;
            }
            let sec = section.ok_or_else(|| Error::parse(path, n, "word before any section"))?;
            if line.split_whitespace().count() != 1 {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected one word, got {line:?}"),
                ));
            }
            let word = line.to_lowercase();
            match owner.get(&word) {
                Some(prev) if *prev == sec => continue,
                Some(prev) => {
                    return Err(Error::parse(
                        path,
                        n,
                        format!("word {word:?} is listed under both [{prev}] and [{sec}]"),
                    ))
                }
                None => {}
            }
            owner.insert(word.clone(), sec);
            lists.section_mut(sec).expect("known section").push(word);
        }
        for (name, (want, got)) in SECTIONS.iter().zip(declared.iter().zip(lists.counts())) {
            if *want != got {
                return Err(Error::CountMismatch {
                    what: format!("{path} [{name}] words (observed {:?})", lists.counts()),
                    declared: *want,
                    observed: got,
                });
            }
        }
        Ok(lists)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let [f, m, n] = self.counts();
        let mut s = format!("counts female={f} male={m} neutral={n}\n");
        for (name, words) in SECTIONS
            .iter()
            .zip([&self.female, &self.male, &self.neutral])
        {
            s.push_str(&format!("[{name}]\n"));
            for w in words {
                s.push_str(w);
                s.push('\n');
            }
        }
        s
    }
}

fn parse_counts(line: &str) -> Option<[usize; 3]> {
    let mut fields = line.split_whitespace();
    if fields.next()? != "counts" {
        return None;
    }
    let mut out = [0; 3];
    for (slot, name) in out.iter_mut().zip(SECTIONS) {
        let (k, v) = fields.next()?.split_once('=')?;
        if k != name {
            return None;
        }
        *slot = v.parse().ok()?;
    }
    fields.next().is_none().then_some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenData {
    pub train: WordLists,
    pub test: WordLists,
}

impl GenData {
    /// Rejects a word that appears in both splits under the same gender.
    pub fn new(train: WordLists, test: WordLists) -> Result<Self> {
        for (a, b, name) in [
            (&train.female, &test.female, "female"),
            (&train.male, &test.male, "male"),
            (&train.neutral, &test.neutral, "neutral"),
        ] {
            if let Some(w) = a.iter().find(|w| b.contains(w)) {
                return Err(Error::InvalidInput(format!(
                    "{name} word {w:?} is in both the train and test lists"
                )));
            }
        }
        Ok(GenData { train, test })
    }
}

pub fn load_gendata(train_path: &Path, test_path: &Path) -> Result<GenData> {
    GenData::new(WordLists::read(train_path)?, WordLists::read(test_path)?)
}

/// Which vector stands for a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputSetting {
    /// The start-sentinel vector.
    I1,
    /// Mean of every token vector, sentinels included.
    I2,
}

impl fmt::Display for InputSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputSetting::I1 => "i1",
            InputSetting::I2 => "i2",
        })
    }
}

impl FromStr for InputSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i1" => Ok(InputSetting::I1),
            "i2" => Ok(InputSetting::I2),
            _ => Err(Error::InvalidInput(format!(
                "unknown input setting {s:?} (i1, i2)"
            ))),
        }
    }
}

impl InputSetting {
    pub fn pool(self, layer: &LayerVectors) -> Vec<f64> {
        match self {
            InputSetting::I1 => layer.vectors[0].clone(),
            InputSetting::I2 => {
                let n = layer.vectors.len() as f64;
                let mut mean = vec![0.0; layer.width()];
                for v in &layer.vectors {
                    crate::linalg::axpy(1.0, v, &mut mean);
                }
                mean.iter_mut().for_each(|x| *x /= n);
                mean
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeConfig {
    pub setting: InputSetting,
    pub layer: usize,
    /// 2 (female, male) or 3 (female, male, neutral).
    pub way: usize,
}

impl ProbeConfig {
    /// Every layer in `layers` crossed with both input settings.
    pub fn grid(layers: &[usize], ways: &[usize]) -> Vec<ProbeConfig> {
        let mut out = Vec::new();
        for &way in ways {
            for &layer in layers {
                for setting in [InputSetting::I1, InputSetting::I2] {
                    out.push(ProbeConfig {
                        setting,
                        layer,
                        way,
                    });
                }
            }
        }
        out
    }
}

/// All layers of `text`, debiased when `dirs` is given.
pub fn text_layers(
    model: &dyn LayeredModel,
    text: &str,
    dirs: Option<&DirectionSet>,
) -> Result<Vec<LayerVectors>> {
    let tokens = model.tokenize(text)?;
    match dirs {
        Some(d) => debias_forward(model, d, &tokens),
        None => model.forward_all(&tokens),
    }
}

fn check_layer(model: &dyn LayeredModel, layer: usize) -> Result<()> {
    if layer > model.layer_count() {
        return Err(Error::LayerOutOfRange {
            index: layer,
            max: model.layer_count(),
        });
    }
    Ok(())
}

/// The vector a probe sees for `word`: the word is its own sentence.
pub fn word_vector(
    model: &dyn LayeredModel,
    word: &str,
    setting: InputSetting,
    layer: usize,
    dirs: Option<&DirectionSet>,
) -> Result<Vec<f64>> {
    check_layer(model, layer)?;
    let layers = text_layers(model, word, dirs)?;
    Ok(setting.pool(&layers[layer]))
}

/// Vectors keyed by `(setting, layer)`, one row per word.
pub type VectorTable = BTreeMap<(InputSetting, usize), Vec<Vec<f64>>>;

/// Word vectors for every requested `(setting, layer)`, computed with one
/// forward pass per word.
pub fn text_vectors(
    model: &dyn LayeredModel,
    words: &[&str],
    wanted: &[(InputSetting, usize)],
    dirs: Option<&DirectionSet>,
) -> Result<VectorTable> {
    for (_, l) in wanted {
        check_layer(model, *l)?;
    }
    let per_word: Vec<Vec<Vec<f64>>> = words
        .par_iter()
        .map(|w| {
            let layers = text_layers(model, w, dirs)
                .map_err(|e| Error::InvalidInput(format!("word {w:?}: {e}")))?;
            Ok(wanted.iter().map(|(s, l)| s.pool(&layers[*l])).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (k, key) in wanted.iter().enumerate() {
        out.insert(*key, per_word.iter().map(|v| v[k].clone()).collect());
    }
    Ok(out)
}

fn words_of<'a, T>(v: &[(&'a str, T)]) -> Vec<&'a str> {
    v.iter().map(|(w, _)| *w).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityRow {
    pub layer: usize,
    /// 1-based principal component index.
    pub pc: usize,
    pub c: f64,
    pub orientation: Orientation,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub const SEPARABILITY_HEADER: &str = "layer,pc,threshold,orientation,train_accuracy,test_accuracy";

impl SeparabilityRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6}",
            self.layer,
            self.pc,
            crate::model::fmt_f64(self.c),
            self.orientation,
            self.train_accuracy,
            self.test_accuracy
        )
    }
}

/// Threshold fit on training female/male words along each layer's
/// `pc`-th direction, scored on the test female/male words. Neutral words
/// are not used.
pub fn separability_sweep(
    model: &dyn LayeredModel,
    dirset: &DirectionSet,
    data: &GenData,
    pcs: &[usize],
    setting: InputSetting,
    mode: Projection,
) -> Result<Vec<SeparabilityRow>> {
    if dirset.layers.len() != model.layer_count() + 1 {
        return Err(Error::InvalidInput(format!(
            "direction set has {} layers, model has {}",
            dirset.layers.len(),
            model.layer_count() + 1
        )));
    }
    let directions: Vec<&[Direction]> = dirset
        .layers
        .iter()
        .map(|l| l.directions.as_slice())
        .collect();
    sweep_directions(model, &directions, data, pcs, setting, mode)
}

/// [`separability_sweep`] over explicit per-layer direction lists.
pub fn sweep_directions(
    model: &dyn LayeredModel,
    directions: &[&[Direction]],
    data: &GenData,
    pcs: &[usize],
    setting: InputSetting,
    mode: Projection,
) -> Result<Vec<SeparabilityRow>> {
    if pcs.is_empty() || pcs.contains(&0) {
        return Err(Error::InvalidInput(
            "principal component indices start at 1".into(),
        ));
    }
    let need = *pcs.iter().max().expect("nonempty");
    if let Some((j, l)) = directions.iter().enumerate().find(|(_, l)| l.len() < need) {
        return Err(Error::InvalidInput(format!(
            "layer {j} has {} directions, PC-{need} requested",
            l.len()
        )));
    }
    let wanted: Vec<(InputSetting, usize)> = (0..directions.len()).map(|l| (setting, l)).collect();
    let train = data.train.gendered();
    let test = data.test.gendered();
    let train_vecs = text_vectors(model, &words_of(&train), &wanted, None)?;
    let test_vecs = text_vectors(model, &words_of(&test), &wanted, None)?;

    let mut rows = Vec::new();
    for (layer, dirs) in directions.iter().enumerate() {
        let label = |vecs: &[Vec<f64>], ws: &[(&str, Gender)]| -> Vec<(Vec<f64>, Gender)> {
            vecs.iter()
                .cloned()
                .zip(ws.iter().map(|(_, g)| *g))
                .collect()
        };
        let tr = label(&train_vecs[&(setting, layer)], &train);
        let te = label(&test_vecs[&(setting, layer)], &test);
        for &pc in pcs {
            let dir = &dirs[pc - 1];
            let fit = fit_threshold(dir, &tr, mode)
                .map_err(|e| Error::InvalidInput(format!("layer {layer} PC-{pc}: {e}")))?;
            let test_accuracy = separability(dir, fit.c, fit.orientation, &te, mode)?;
            rows.push(SeparabilityRow {
                layer,
                pc,
                c: fit.c,
                orientation: fit.orientation,
                train_accuracy: fit.accuracy,
                test_accuracy,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub config: ProbeConfig,
    pub test_accuracy: f64,
    pub epochs: usize,
    /// 3-way only: share of neutral test words given a gendered label.
    pub neutral_misclassified_pct: Option<f64>,
    /// 3-way only: share of those misclassified neutral words labeled male.
    pub misclassified_neutral_male_pct: Option<f64>,
}

pub const PROBE_HEADER: &str =
    "layer,setting,way,test_accuracy,epochs,neutral_misclassified_pct,misclassified_neutral_male_pct";

impl ProbeRow {
    pub fn to_csv(&self) -> String {
        let pct = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6},{},{},{}",
            self.config.layer,
            self.config.setting,
            self.config.way,
            self.test_accuracy,
            self.epochs,
            pct(self.neutral_misclassified_pct),
            pct(self.misclassified_neutral_male_pct)
        )
    }
}

/// Class index used by the probes.
pub const FEMALE: usize = 0;
pub const MALE: usize = 1;
pub const NEUTRAL: usize = 2;

fn labeled_words(lists: &WordLists, way: usize) -> Vec<(&str, usize)> {
    let mut out: Vec<(&str, usize)> = lists
        .female
        .iter()
        .map(|w| (w.as_str(), FEMALE))
        .chain(lists.male.iter().map(|w| (w.as_str(), MALE)))
        .collect();
    if way == 3 {
        out.extend(lists.neutral.iter().map(|w| (w.as_str(), NEUTRAL)));
    }
    out
}

/// Trains one classifier per grid cell on the training words and scores it
/// on the test words, with vectors from the debiased forward pass when
/// `dirs` is given.
pub fn probe_experiment(
    model: &dyn LayeredModel,
    data: &GenData,
    grid: &[ProbeConfig],
    dirs: Option<&DirectionSet>,
    cfg: &TrainConfig,
) -> Result<Vec<ProbeRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("probe grid is empty".into()));
    }
    for g in grid {
        if g.way != 2 && g.way != 3 {
            return Err(Error::InvalidInput(format!(
                "probe way must be 2 or 3, got {}",
                g.way
            )));
        }
        check_layer(model, g.layer)?;
    }
    let mut wanted: Vec<(InputSetting, usize)> =
        grid.iter().map(|g| (g.setting, g.layer)).collect();
    wanted.sort();
    wanted.dedup();
    let way = grid.iter().map(|g| g.way).max().expect("nonempty");
    let train_words = labeled_words(&data.train, way);
    let test_words = labeled_words(&data.test, way);
    let train_vecs = text_vectors(model, &words_of(&train_words), &wanted, dirs)?;
    let test_vecs = text_vectors(model, &words_of(&test_words), &wanted, dirs)?;

    grid.par_iter()
        .map(|g| {
            let take = |vecs: &[Vec<f64>], words: &[(&str, usize)]| -> Vec<(Vec<f64>, usize)> {
                vecs.iter()
                    .zip(words)
                    .filter(|(_, (_, y))| *y < g.way)
                    .map(|(v, (_, y))| (v.clone(), *y))
                    .collect()
            };
            let train = take(&train_vecs[&(g.setting, g.layer)], &train_words);
            let test = take(&test_vecs[&(g.setting, g.layer)], &test_words);
            let (probe, log) = train_classifier(&train, g.way, cfg).map_err(|e| {
                Error::InvalidInput(format!(
                    "probe layer {} {} {}-way: {e}",
                    g.layer, g.setting, g.way
                ))
            })?;
            let (mut neutral_pct, mut male_pct) = (None, None);
            if g.way == 3 {
                let preds: Vec<usize> = test
                    .iter()
                    .filter(|(_, y)| *y == NEUTRAL)
                    .map(|(x, _)| probe.predict(x))
                    .collect();
                let wrong = preds.iter().filter(|p| **p != NEUTRAL).count();
                if !preds.is_empty() {
                    neutral_pct = Some(100.0 * wrong as f64 / preds.len() as f64);
                }
                if wrong > 0 {
                    let male = preds.iter().filter(|p| **p == MALE).count();
                    male_pct = Some(100.0 * male as f64 / wrong as f64);
                }
            }
            Ok(ProbeRow {
                config: *g,
                test_accuracy: probe.accuracy(&test),
                epochs: log.epochs_run,
                neutral_misclassified_pct: neutral_pct,
                misclassified_neutral_male_pct: male_pct,
            })
        })
        .collect()
}
