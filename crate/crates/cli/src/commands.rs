//! Subcommand implementations. Each one builds its inputs, runs the library
//! pipeline and stages its outputs; `main` commits or quarantines them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use layerdebias::eec::{
    compare_reports, equity_report, generate_corpus, score_pairs, ComparisonRow, EecSpec,
    EquityReport, ScorePair,
};
use layerdebias::fixtures::{
    self, default_gendata, default_template, generate_gendata, reserved_words, template_line,
    GENDATA_TEST_COUNTS, GENDATA_TRAIN_COUNTS,
};
use layerdebias::gendata::{
    load_gendata, probe_experiment, separability_sweep, text_vectors, GenData, InputSetting,
    ProbeConfig, WordLists, FEMALE, MALE, NEUTRAL, PROBE_HEADER, SEPARABILITY_HEADER,
};
use layerdebias::intensity::{synthetic_intensity, IntensityDataset, IntensityFixtureConfig, Task};
use layerdebias::model::{EmbeddingDump, LayeredModel};
use layerdebias::neural::{self, kfold, pearson, train_conv_baseline, Checkpoint, TrainConfig};
use layerdebias::subspace::{
    build_definition_pair, cosine_report, debias_forward, extract_independent, extract_iterative,
    CosineRow, DirectionSet, ExtractOptions, GenderPairList, Projection,
};

use crate::backend::derive_seed;
use crate::output::{sha256_hex, OutputDir, Provenance};
use crate::{
    DumpArgs, EecArgs, ExtractArgs, FixtureArgs, GenDataArgs, ProbeArgs, SeparabilityArgs,
    TrainArgs,
};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Reads a direction set and records its hash.
fn load_directions(path: &Path, name: &str, prov: &mut Provenance) -> Result<DirectionSet> {
    let text = read(path)?;
    prov.input(name, &text);
    Ok(DirectionSet::parse(&text, &path.display().to_string())?)
}

/// Identifies the direction set a checkpoint was trained with.
fn directions_hash(dirs: Option<&DirectionSet>) -> String {
    dirs.map_or_else(
        || "none".to_string(),
        |d| sha256_hex(d.to_text().as_bytes()),
    )
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} {t:?}: {e}"))
        })
        .collect::<Result<Vec<T>>>()?;
    if out.is_empty() {
        bail!("empty {what} list");
    }
    Ok(out)
}

fn layer_list(spec: Option<&str>, model: &dyn LayeredModel) -> Result<Vec<usize>> {
    let layers = match spec {
        Some(s) => parse_list(s, "layer")?,
        None => (0..=model.layer_count()).collect(),
    };
    if let Some(l) = layers.iter().find(|&&l| l > model.layer_count()) {
        bail!("layer {l} out of range 0..={}", model.layer_count());
    }
    Ok(layers)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn gendata(args: &GenDataArgs, prov: &mut Provenance) -> Result<GenData> {
    let data = match (&args.gendata_train, &args.gendata_test) {
        (None, None) => default_gendata(),
        (Some(tr), Some(te)) => load_gendata(tr, te)?,
        _ => bail!("--gendata-train and --gendata-test go together"),
    };
    prov.input("gendata_train", &data.train.to_text());
    prov.input("gendata_test", &data.test.to_text());
    Ok(data)
}

pub fn extract(a: &ExtractArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("extract", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let pairs = match &a.pairs {
        Some(p) => GenderPairList::parse(&read(p)?, &p.display().to_string())?,
        None => fixtures::default_pairs(),
    };
    let pairs = if a.drop.is_empty() {
        pairs
    } else {
        pairs.with_dropped(&a.drop)?
    };
    let template = match &a.template {
        Some(p) => template_line(&read(p)?)?,
        None => default_template(),
    };
    prov.inputs.push(("pairs".into(), pairs.hash()));
    prov.input("template", &template);
    let opts = ExtractOptions {
        positions: a.positions.parse()?,
        center: a.center,
    };
    let dp = build_definition_pair(model.as_ref(), &pairs, &template)?;

    let (indep, iter) = match a.mode.as_str() {
        "independent" => (
            Some(extract_independent(
                model.as_ref(),
                &dp,
                a.k,
                &pairs.hash(),
                opts,
            )?),
            None,
        ),
        "iterative" => (
            None,
            Some(extract_iterative(model.as_ref(), &dp, &pairs.hash(), opts)?),
        ),
        "both" => (
            Some(extract_independent(
                model.as_ref(),
                &dp,
                a.k,
                &pairs.hash(),
                opts,
            )?),
            Some(extract_iterative(model.as_ref(), &dp, &pairs.hash(), opts)?),
        ),
        other => bail!("unknown mode {other:?} (independent, iterative, both)"),
    };
    for set in indep.iter().chain(&iter) {
        out.write_with_header(
            &format!("directions_{}.txt", set.mode),
            &prov,
            &set.to_text(),
        )?;
    }
    let rows = cosine_report(indep.as_ref(), iter.as_ref())?;
    out.write_with_header(
        "cosine.csv",
        &prov,
        &csv(CosineRow::CSV_HEADER, rows.iter().map(CosineRow::to_csv)),
    )?;
    Ok(())
}

fn texts(d: &IntensityDataset) -> Vec<&str> {
    d.records.iter().map(|r| r.text.as_str()).collect()
}

/// Pooled vectors of `texts` at one layer.
fn vectors(
    model: &dyn LayeredModel,
    texts: &[&str],
    setting: InputSetting,
    layer: usize,
    dirs: Option<&DirectionSet>,
) -> Result<Vec<Vec<f64>>> {
    let key = (setting, layer);
    let mut v = text_vectors(model, texts, &[key], dirs)?;
    Ok(v.remove(&key).expect("requested key"))
}

/// The stopping recipe, reported with every regressor since it is a local
/// choice rather than a published setting.
fn stopping(cfg: &TrainConfig) -> String {
    format!(
        "early_stop(lr={};max_epochs={};patience={};batch={})",
        cfg.learning_rate, cfg.max_epochs, cfg.patience, cfg.batch_size
    )
}

pub fn train_regressor(a: &TrainArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("train-regressor", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let task: Task = a.task.parse()?;
    let setting: InputSetting = a.input.parse()?;
    let layer = a.layer.unwrap_or(model.layer_count());
    if layer > model.layer_count() {
        bail!("layer {layer} out of range 0..={}", model.layer_count());
    }
    let train_text = read(&a.train)?;
    let test_text = read(&a.test)?;
    let train = IntensityDataset::parse(&train_text, &a.train.display().to_string())?;
    let test = IntensityDataset::parse(&test_text, &a.test.display().to_string())?;
    prov.input("train", &train_text);
    prov.input("test", &test_text);
    let dirs = match &a.directions {
        Some(p) => Some(load_directions(p, "directions", &mut prov)?),
        None => None,
    };

    let xtr = vectors(
        model.as_ref(),
        &texts(&train),
        setting,
        layer,
        dirs.as_ref(),
    )?;
    let xte = vectors(model.as_ref(), &texts(&test), setting, layer, dirs.as_ref())?;
    let data: Vec<(Vec<f64>, f64)> = xtr
        .into_iter()
        .zip(train.records.iter().map(|r| r.score))
        .collect();
    let cfg =
        TrainConfig::regressor().with_seed(derive_seed(a.model.seed, &format!("regressor:{task}")));
    let (reg, log) = neural::train_regressor(&data, &cfg)?;
    let pred: Vec<f64> = xte.iter().map(|x| reg.predict(x)).collect();
    let gold: Vec<f64> = test.records.iter().map(|r| r.score).collect();
    let r = pearson(&pred, &gold)?;

    let meta: BTreeMap<String, String> = [
        ("task", task.to_string()),
        ("layer", layer.to_string()),
        ("input", setting.to_string()),
        ("directions", directions_hash(dirs.as_ref())),
        ("model", model.id()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    out.write_with_header(
        "regressor.ckpt",
        &prov,
        &Checkpoint::regressor(&reg, meta).to_text(),
    )?;
    out.write_with_header(
        "metrics.csv",
        &prov,
        &csv(
            "task,layer,input,debiased,train_size,test_size,epochs,best_epoch,stopping,test_pearson",
            [format!(
                "{task},{layer},{setting},{},{},{},{},{},{},{r:.6}",
                dirs.is_some(),
                train.len(),
                test.len(),
                log.epochs_run,
                log.best_epoch,
                stopping(&cfg)
            )],
        ),
    )?;
    out.write_with_header(
        "predictions.csv",
        &prov,
        &csv(
            "id,gold,predicted",
            test.records
                .iter()
                .zip(&pred)
                .map(|(rec, p)| format!("{},{},{p:.6}", rec.id, rec.score)),
        ),
    )?;
    eprintln!("test pearson {r:.4} after {} epochs", log.epochs_run);
    Ok(())
}

/// Scores the corpus with one checkpoint after checking that it fits the
/// model and the supplied direction set.
fn score_checkpoint(
    model: &dyn LayeredModel,
    spec: &EecSpec,
    path: &Path,
    dirs_path: Option<&PathBuf>,
    name: &str,
    decimals: u32,
    prov: &mut Provenance,
) -> Result<EquityReport> {
    let text = read(path)?;
    prov.input(name, &text);
    let ckpt = Checkpoint::parse(&text, &path.display().to_string())?;
    let meta = |k: &str| -> Result<String> {
        ckpt.meta
            .get(k)
            .cloned()
            .with_context(|| format!("{}: checkpoint has no `{k}` entry", path.display()))
    };
    if ckpt.mlp.input() != model.width() {
        bail!(
            "{}: checkpoint expects {}-wide vectors, model is {}-wide",
            path.display(),
            ckpt.mlp.input(),
            model.width()
        );
    }
    let layer: usize = meta("layer")?.parse().context("checkpoint layer")?;
    if layer > model.layer_count() {
        bail!(
            "{}: checkpoint layer {layer} beyond the model's {}",
            path.display(),
            model.layer_count()
        );
    }
    let setting: InputSetting = meta("input")?.parse()?;
    let dirs = match dirs_path {
        Some(p) => Some(load_directions(p, &format!("{name}_directions"), prov)?),
        None => None,
    };
    let want = meta("directions")?;
    let have = directions_hash(dirs.as_ref());
    if want != have {
        bail!(
            "{}: checkpoint was trained with directions {want}, got {have}",
            path.display()
        );
    }
    let reg = ckpt.into_regressor()?;
    let corpus = generate_corpus(spec)?;
    let texts: Vec<&str> = corpus.iter().map(|s| s.text.as_str()).collect();
    let x = vectors(model, &texts, setting, layer, dirs.as_ref())?;
    let preds: BTreeMap<usize, f64> = corpus
        .iter()
        .zip(&x)
        .map(|(s, v)| (s.id, reg.predict(v).clamp(0.0, 1.0)))
        .collect();
    let pairs = score_pairs(spec, &corpus, &preds)?;
    Ok(equity_report(&pairs, decimals)?)
}

#[derive(Serialize)]
struct Summary<'a> {
    provenance: &'a Provenance,
    report: &'a EquityReport,
}

fn write_report(
    out: &mut OutputDir,
    suffix: &str,
    prov: &Provenance,
    rep: &EquityReport,
) -> Result<()> {
    out.write_with_header(&format!("equity{suffix}.csv"), prov, &rep.to_csv())?;
    out.write_with_header(
        &format!("pairs{suffix}.csv"),
        prov,
        &csv(
            ScorePair::CSV_HEADER,
            rep.pairs.iter().map(ScorePair::to_csv),
        ),
    )?;
    let json = serde_json::to_string_pretty(&Summary {
        provenance: prov,
        report: rep,
    })?;
    out.write(&format!("summary{suffix}.json"), &format!("{json}\n"))
}

pub fn eval_eec(a: &EecArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("eval-eec", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let spec = match &a.eec_spec {
        Some(p) => {
            let text = read(p)?;
            prov.input("eec_spec", &text);
            EecSpec::parse(&text, &p.display().to_string())?
        }
        None => {
            prov.input("eec_spec", EecSpec::default_text());
            EecSpec::default_spec()
        }
    };
    if a.compare.is_none() && a.compare_directions.is_some() {
        bail!("--compare-directions needs --compare");
    }
    let first = score_checkpoint(
        model.as_ref(),
        &spec,
        &a.checkpoint,
        a.directions.as_ref(),
        "checkpoint",
        a.rounding,
        &mut prov,
    )?;
    let second = match &a.compare {
        Some(p) => Some(score_checkpoint(
            model.as_ref(),
            &spec,
            p,
            a.compare_directions.as_ref(),
            "compare",
            a.rounding,
            &mut prov,
        )?),
        None => None,
    };
    write_report(out, "", &prov, &first)?;
    if let Some(second) = &second {
        write_report(out, "_compare", &prov, second)?;
        let rows = compare_reports(&first, second)?;
        out.write_with_header(
            "comparison.csv",
            &prov,
            &csv(
                ComparisonRow::CSV_HEADER,
                rows.iter().map(ComparisonRow::to_csv),
            ),
        )?;
    }
    Ok(())
}

pub fn separability(a: &SeparabilityArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("separability", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let data = gendata(&a.data, &mut prov)?;
    let dirs = load_directions(&a.directions, "directions", &mut prov)?;
    let setting: InputSetting = a.input.parse()?;
    let layers = layer_list(a.layers.as_deref(), model.as_ref())?;
    let pcs: Vec<usize> = match &a.pcs {
        Some(s) => parse_list(s, "component")?,
        None => {
            let available = dirs
                .layers
                .iter()
                .map(|l| l.directions.len())
                .min()
                .unwrap_or(0);
            (1..=available.min(2)).collect()
        }
    };
    let mode = if a.normalize {
        Projection::Normalized
    } else {
        Projection::Raw
    };
    let rows = separability_sweep(model.as_ref(), &dirs, &data, &pcs, setting, mode)?;
    out.write_with_header(
        "separability.csv",
        &prov,
        &csv(
            SEPARABILITY_HEADER,
            rows.iter()
                .filter(|r| layers.contains(&r.layer))
                .map(|r| r.to_csv()),
        ),
    )?;
    Ok(())
}

fn labeled(lists: &WordLists, way: usize) -> Vec<(&str, usize)> {
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

pub fn probe(a: &ProbeArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("probe", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let data = gendata(&a.data, &mut prov)?;
    let dirs = match &a.directions {
        Some(p) => Some(load_directions(p, "directions", &mut prov)?),
        None => None,
    };
    let layers = layer_list(a.layers.as_deref(), model.as_ref())?;
    let ways: Vec<usize> = parse_list(&a.ways, "way")?;
    let settings: Vec<InputSetting> = parse_list(&a.settings, "input setting")?;
    let grid: Vec<ProbeConfig> = ProbeConfig::grid(&layers, &ways)
        .into_iter()
        .filter(|g| settings.contains(&g.setting))
        .collect();
    let cfg = TrainConfig::classifier().with_seed(derive_seed(a.model.seed, "probe"));
    let rows = probe_experiment(model.as_ref(), &data, &grid, dirs.as_ref(), &cfg)?;
    out.write_with_header(
        "probe.csv",
        &prov,
        &csv(PROBE_HEADER, rows.iter().map(|r| r.to_csv())),
    )?;

    if a.baseline {
        let mut lines = Vec::new();
        for &way in &ways {
            let pieces = |lists: &WordLists| -> Result<Vec<(Vec<String>, usize)>> {
                labeled(lists, way)
                    .into_iter()
                    .map(|(w, y)| Ok((model.word_pieces(w)?, y)))
                    .collect()
            };
            let train = pieces(&data.train)?;
            let test = pieces(&data.test)?;
            let cfg = TrainConfig::classifier()
                .with_seed(derive_seed(a.model.seed, &format!("baseline:{way}")));
            let (conv, log) = train_conv_baseline(&train, way, &cfg)?;
            let mut counts = vec![0usize; way];
            test.iter().for_each(|(_, y)| counts[*y] += 1);
            let majority = *counts.iter().max().expect("nonempty") as f64 / test.len() as f64;
            let cv = if a.cv_folds > 0 {
                let seed = derive_seed(a.model.seed, &format!("folds:{way}"));
                let acc = kfold(&train, a.cv_folds, seed, |tr, held| {
                    Ok(train_conv_baseline(tr, way, &cfg)?.0.accuracy(held))
                })?;
                format!("{acc:.6}")
            } else {
                String::new()
            };
            lines.push(format!(
                "{way},{:.6},{majority:.6},{},{cv},{}",
                conv.accuracy(&test),
                a.cv_folds,
                log.epochs_run
            ));
        }
        out.write_with_header(
            "baseline.csv",
            &prov,
            &csv(
                "way,test_accuracy,majority_accuracy,cv_folds,cv_accuracy,epochs",
                lines,
            ),
        )?;
    }
    Ok(())
}

pub fn debias_dump(a: &DumpArgs, out: &mut OutputDir) -> Result<()> {
    let mut prov = Provenance::new("debias-dump", a, a.model.seed, "")?;
    let model = a.model.build(&mut prov)?;
    let dirs = load_directions(&a.directions, "directions", &mut prov)?;
    let text = read(&a.texts)?;
    prov.input("texts", &text);
    let mut dump = EmbeddingDump::new(model.width(), model.layer_count() + 1);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens = model
            .tokenize(line)
            .with_context(|| format!("{}:{}", a.texts.display(), i + 1))?;
        let layers = debias_forward(model.as_ref(), &dirs, &tokens)?;
        dump.push(line, tokens, layers)?;
    }
    if dump.records.is_empty() {
        bail!("{} has no texts", a.texts.display());
    }
    out.write_with_header("dump.txt", &prov, &dump.to_text())?;
    Ok(())
}

pub fn gen_fixture(a: &FixtureArgs, out: &mut OutputDir) -> Result<()> {
    let prov = Provenance::new("gen-fixture", a, a.seed, "none")?;
    let data = if a.gendata_seed == fixtures::GENDATA_SEED {
        default_gendata()
    } else {
        generate_gendata(a.gendata_seed, GENDATA_TRAIN_COUNTS, GENDATA_TEST_COUNTS)?
    };
    let cfg = IntensityFixtureConfig {
        seed: a.seed,
        train: a.train,
        test: a.test,
        gender_offset: a.gender_offset,
        ..IntensityFixtureConfig::default()
    };
    let (train, test) =
        synthetic_intensity(&cfg, &data.train.female, &data.train.male, reserved_words())?;
    out.write_with_header("gendata_train.txt", &prov, &data.train.to_text())?;
    out.write_with_header("gendata_test.txt", &prov, &data.test.to_text())?;
    out.write_with_header("intensity_train.tsv", &prov, &train.to_text())?;
    out.write_with_header("intensity_test.tsv", &prov, &test.to_text())?;
    out.write_with_header("gender_pairs.txt", &prov, fixtures::GENDER_PAIRS)?;
    out.write_with_header(
        "definition_template.txt",
        &prov,
        fixtures::DEFINITION_TEMPLATE,
    )?;
    out.write_with_header("eec_spec.txt", &prov, EecSpec::default_text())?;
    Ok(())
}
