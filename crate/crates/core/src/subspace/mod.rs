//! Gender-direction extraction and removal.
//!
//! Difference vectors between the male and female sentence of a definition
//! pair are decomposed by PCA, either independently at every layer or
//! iteratively: the direction found at layer `j-1` is projected out of both
//! sentences' vectors before they are fed through layer `j`.

mod dirset;
mod pairs;
mod report;
mod separability;

pub use dirset::{DirectionSet, ExtractionMode, LayerDirections, PositionPolicy};
pub use pairs::{build_definition_pair, DefinitionPair, GenderPairList, PairEntry};
pub use report::{cosine_report, CosineRow};
pub use separability::{fit_threshold, separability, Orientation, Projection, Threshold};

use crate::error::{Error, Result};
use crate::linalg::{pca_top_k, project_out_in_place, sub, Direction};
use crate::model::{LayerVectors, LayeredModel, TokenSequence};

/// Options shared by both extraction modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub positions: PositionPolicy,
    /// Mean-center difference vectors before PCA.
    pub center: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            positions: PositionPolicy::PairsOnly,
            center: false,
        }
    }
}

fn selected_differences(
    dp: &DefinitionPair,
    female: &LayerVectors,
    male: &LayerVectors,
    positions: PositionPolicy,
) -> Vec<Vec<f64>> {
    match positions {
        PositionPolicy::All => female
            .vectors
            .iter()
            .zip(&male.vectors)
            .map(|(u, v)| sub(v, u))
            .collect(),
        PositionPolicy::PairsOnly => dp
            .pair_positions
            .iter()
            .map(|&i| sub(&male.vectors[i], &female.vectors[i]))
            .collect(),
    }
}

/// `D_k^i = v_k^i - u_k^i` (male minus female) at the selected positions of
/// layer `layer`.
pub fn difference_vectors(
    model: &dyn LayeredModel,
    dp: &DefinitionPair,
    layer: usize,
    positions: PositionPolicy,
) -> Result<Vec<Vec<f64>>> {
    if layer > model.layer_count() {
        return Err(Error::LayerOutOfRange {
            index: layer,
            max: model.layer_count(),
        });
    }
    let f = model.forward_all(&dp.female_tokens)?;
    let m = model.forward_all(&dp.male_tokens)?;
    Ok(selected_differences(dp, &f[layer], &m[layer], positions))
}

fn layer_pca(layer: usize, diffs: &[Vec<f64>], k: usize, center: bool) -> Result<LayerDirections> {
    let pca = pca_top_k(diffs, k, center).map_err(|e| match e {
        Error::ZeroVariance(msg) => Error::ZeroVariance(format!("layer {layer}: {msg}")),
        Error::InvalidInput(msg) => Error::InvalidInput(format!("layer {layer}: {msg}")),
        other => other,
    })?;
    Ok(LayerDirections {
        layer,
        directions: pca.directions,
        energy: pca.total_energy,
    })
}

/// Top `k_dirs` principal directions of every layer, each layer on its own.
pub fn extract_independent(
    model: &dyn LayeredModel,
    dp: &DefinitionPair,
    k_dirs: usize,
    pair_hash: &str,
    opts: ExtractOptions,
) -> Result<DirectionSet> {
    if k_dirs == 0 {
        return Err(Error::InvalidInput("k_dirs must be >= 1".into()));
    }
    let f = model.forward_all(&dp.female_tokens)?;
    let m = model.forward_all(&dp.male_tokens)?;
    let layers = f
        .iter()
        .zip(&m)
        .enumerate()
        .map(|(j, (u, v))| {
            let d = selected_differences(dp, u, v, opts.positions);
            layer_pca(j, &d, k_dirs, opts.center)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionSet {
        model_id: model.id(),
        width: model.width(),
        mode: ExtractionMode::Independent,
        pair_hash: pair_hash.to_string(),
        positions: opts.positions,
        layers,
    })
}

fn project_all(vectors: &mut LayerVectors, dir: &Direction) -> Result<()> {
    for v in vectors.vectors.iter_mut() {
        project_out_in_place(v, dir)?;
    }
    Ok(())
}

/// One direction per layer; before layer `j` is applied, the component along
/// the direction found at layer `j-1` is removed from every token vector of
/// both sentences.
pub fn extract_iterative(
    model: &dyn LayeredModel,
    dp: &DefinitionPair,
    pair_hash: &str,
    opts: ExtractOptions,
) -> Result<DirectionSet> {
    let mut u = model.embed0(&dp.female_tokens)?;
    let mut v = model.embed0(&dp.male_tokens)?;
    let d0 = selected_differences(dp, &u, &v, opts.positions);
    let mut layers = vec![layer_pca(0, &d0, 1, opts.center)?];
    for j in 1..=model.layer_count() {
        let prev = &layers[j - 1].directions[0];
        project_all(&mut u, prev)?;
        project_all(&mut v, prev)?;
        u = model.apply_layer(j, &u)?;
        v = model.apply_layer(j, &v)?;
        let d = selected_differences(dp, &u, &v, opts.positions);
        layers.push(layer_pca(j, &d, 1, opts.center)?);
    }
    Ok(DirectionSet {
        model_id: model.id(),
        width: model.width(),
        mode: ExtractionMode::Iterative,
        pair_hash: pair_hash.to_string(),
        positions: opts.positions,
        layers,
    })
}

/// Forward pass that removes each layer's primary direction from every
/// token vector at that layer's output, before the next layer sees it.
pub fn debias_forward(
    model: &dyn LayeredModel,
    dirs: &DirectionSet,
    tokens: &TokenSequence,
) -> Result<Vec<LayerVectors>> {
    if dirs.layers.len() != model.layer_count() + 1 {
        return Err(Error::InvalidInput(format!(
            "direction set has {} layers, model has {}",
            dirs.layers.len(),
            model.layer_count() + 1
        )));
    }
    if dirs.width != model.width() {
        return Err(Error::LengthMismatch {
            expected: model.width(),
            found: dirs.width,
        });
    }
    let mut out = Vec::with_capacity(dirs.layers.len());
    let mut cur = model.embed0(tokens)?;
    project_all(&mut cur, dirs.primary(0)?)?;
    out.push(cur);
    for j in 1..=model.layer_count() {
        let mut next = model.apply_layer(j, &out[j - 1])?;
        project_all(&mut next, dirs.primary(j)?)?;
        out.push(next);
    }
    Ok(out)
}
