use crate::error::{Error, Result};
use crate::linalg::cosine_similarity;

use super::DirectionSet;

/// Cosine similarities of layer `j` directions against layer-0 PC-1.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineRow {
    pub layer: usize,
    /// cos(p1_0, p1_j) from the independent set.
    pub pc1: Option<f64>,
    /// cos(p1_0, p2_j) from the independent set, when it has two directions.
    pub pc2: Option<f64>,
    /// cos(P_0, P_j) from the iterative set.
    pub iterative: Option<f64>,
}

impl CosineRow {
    pub const CSV_HEADER: &'static str = "layer,cos_pc1_pc1,cos_pc1_pc2,cos_iterative";

    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map(|v| format!("{v:.12}")).unwrap_or_default();
        format!(
            "{},{},{},{}",
            self.layer,
            cell(self.pc1),
            cell(self.pc2),
            cell(self.iterative)
        )
    }
}

/// One row per layer; at least one of the two sets must be given and, when
/// both are, they must cover the same layers.
pub fn cosine_report(
    independent: Option<&DirectionSet>,
    iterative: Option<&DirectionSet>,
) -> Result<Vec<CosineRow>> {
    let layers = match (independent, iterative) {
        (None, None) => {
            return Err(Error::InvalidInput(
                "cosine report needs a direction set".into(),
            ))
        }
        (Some(a), Some(b)) if a.layers.len() != b.layers.len() => {
            return Err(Error::CountMismatch {
                what: "direction set layers".into(),
                declared: a.layers.len(),
                observed: b.layers.len(),
            })
        }
        (Some(a), _) => a.layers.len(),
        (None, Some(b)) => b.layers.len(),
    };
    let mut rows = Vec::with_capacity(layers);
    for j in 0..layers {
        let mut row = CosineRow {
            layer: j,
            pc1: None,
            pc2: None,
            iterative: None,
        };
        if let Some(set) = independent {
            let base = set.primary(0)?.axis();
            row.pc1 = Some(cosine_similarity(base, set.primary(j)?.axis())?);
            if let Some(d) = set.layers[j].directions.get(1) {
                row.pc2 = Some(cosine_similarity(base, d.axis())?);
            }
        }
        if let Some(set) = iterative {
            row.iterative = Some(cosine_similarity(
                set.primary(0)?.axis(),
                set.primary(j)?.axis(),
            )?);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Direction;
    use crate::subspace::{ExtractionMode, LayerDirections, PositionPolicy};

    fn set(mode: ExtractionMode, dirs: Vec<Vec<Vec<f64>>>) -> DirectionSet {
        DirectionSet {
            model_id: "m".into(),
            width: 2,
            mode,
            pair_hash: "h".into(),
            positions: PositionPolicy::PairsOnly,
            layers: dirs
                .into_iter()
                .enumerate()
                .map(|(layer, ds)| LayerDirections {
                    layer,
                    directions: ds
                        .into_iter()
                        .map(|v| Direction::from_vector(&v, 0.5).unwrap())
                        .collect(),
                    energy: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn rows_cover_every_layer() {
        let ind = set(
            ExtractionMode::Independent,
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 1.0], vec![-1.0, 1.0]],
            ],
        );
        let it = set(
            ExtractionMode::Iterative,
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        );
        let rows = cosine_report(Some(&ind), Some(&it)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].pc1, Some(1.0));
        assert_eq!(rows[0].pc2, Some(0.0));
        assert!((rows[1].pc1.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((rows[1].pc2.unwrap() + 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rows[1].iterative, Some(0.0));
        assert_eq!(
            rows[1].to_csv(),
            "1,0.707106781187,-0.707106781187,0.000000000000"
        );
    }

    #[test]
    fn single_set_leaves_blank_columns() {
        let it = set(ExtractionMode::Iterative, vec![vec![vec![1.0, 0.0]]]);
        let rows = cosine_report(None, Some(&it)).unwrap();
        assert_eq!(rows[0].to_csv(), "0,,,1.000000000000");
        assert!(cosine_report(None, None).is_err());
    }
}
