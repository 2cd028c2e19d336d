//! Threshold separability of gendered words along a single direction.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{norm, Direction};
use crate::model::Gender;

/// Number of evenly spaced threshold candidates in the grid search.
pub const GRID_POINTS: usize = 1001;

/// Which gender owns the ray `projection >= c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    MalePositive,
    FemalePositive,
}

impl Orientation {
    fn positive(self) -> Gender {
        match self {
            Orientation::MalePositive => Gender::Male,
            Orientation::FemalePositive => Gender::Female,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::MalePositive => Orientation::FemalePositive,
            Orientation::FemalePositive => Orientation::MalePositive,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::MalePositive => "male_positive",
            Orientation::FemalePositive => "female_positive",
        })
    }
}

/// How vectors are projected before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    #[default]
    Raw,
    /// Vectors are scaled to unit norm first.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub c: f64,
    pub orientation: Orientation,
    /// Training accuracy at `c`.
    pub accuracy: f64,
}

fn projections<V: AsRef<[f64]>>(
    direction: &Direction,
    labeled: &[(V, Gender)],
    mode: Projection,
) -> Result<Vec<f64>> {
    labeled
        .iter()
        .map(|(v, _)| {
            let p = direction.project(v.as_ref())?;
            Ok(match mode {
                Projection::Raw => p,
                Projection::Normalized => {
                    let n = norm(v.as_ref());
                    if n == 0.0 {
                        0.0
                    } else {
                        p / n
                    }
                }
            })
        })
        .collect()
}

fn correct_count(proj: &[f64], genders: &[Gender], c: f64, o: Orientation) -> usize {
    proj.iter()
        .zip(genders)
        .filter(|(p, g)| {
            let predicted = if **p >= c {
                o.positive()
            } else {
                o.positive().other()
            };
            predicted == **g
        })
        .count()
}

impl Gender {
    pub fn other(self) -> Gender {
        match self {
            Gender::Female => Gender::Male,
            Gender::Male => Gender::Female,
        }
    }
}

/// Grid search over `GRID_POINTS` thresholds spanning the projection range
/// and both orientations. Ties prefer the smallest `|c|`, then
/// `FemalePositive`.
pub fn fit_threshold<V: AsRef<[f64]>>(
    direction: &Direction,
    labeled: &[(V, Gender)],
    mode: Projection,
) -> Result<Threshold> {
    let genders: Vec<Gender> = labeled.iter().map(|(_, g)| *g).collect();
    if !(genders.contains(&Gender::Female) && genders.contains(&Gender::Male)) {
        return Err(Error::SingleClass(
            "threshold fitting needs both genders".into(),
        ));
    }
    let proj = projections(direction, labeled, mode)?;
    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut best: Option<(usize, f64, Orientation)> = None;
    for i in 0..GRID_POINTS {
        let c = lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64;
        for o in [Orientation::FemalePositive, Orientation::MalePositive] {
            let k = correct_count(&proj, &genders, c, o);
            let better = match best {
                None => true,
                Some((bk, bc, bo)) => {
                    k > bk
                        || (k == bk && c.abs() < bc.abs())
                        || (k == bk
                            && c.abs() == bc.abs()
                            && o == Orientation::FemalePositive
                            && bo == Orientation::MalePositive)
                }
            };
            if better {
                best = Some((k, c, o));
            }
        }
    }
    let (k, c, orientation) = best.expect("grid is nonempty");
    Ok(Threshold {
        c,
        orientation,
        accuracy: k as f64 / labeled.len() as f64,
    })
}

/// Fraction of vectors whose projection falls on their own gender's ray;
/// a projection exactly at `c` belongs to the positive ray.
pub fn separability<V: AsRef<[f64]>>(
    direction: &Direction,
    c: f64,
    orientation: Orientation,
    labeled: &[(V, Gender)],
    mode: Projection,
) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::InvalidInput("no labeled vectors".into()));
    }
    let genders: Vec<Gender> = labeled.iter().map(|(_, g)| *g).collect();
    let proj = projections(direction, labeled, mode)?;
    Ok(correct_count(&proj, &genders, c, orientation) as f64 / labeled.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x_axis() -> Direction {
        Direction::new(vec![1.0, 0.0], 1.0).unwrap()
    }

    fn points(f: &[f64], m: &[f64]) -> Vec<(Vec<f64>, Gender)> {
        f.iter()
            .map(|x| (vec![*x, 0.5], Gender::Female))
            .chain(m.iter().map(|x| (vec![*x, -0.5], Gender::Male)))
            .collect()
    }

    #[test]
    fn separable_case() {
        let data = points(&[-1.0, -2.0], &[1.0, 2.0]);
        let t = fit_threshold(&x_axis(), &data, Projection::Raw).unwrap();
        assert_eq!(t.accuracy, 1.0);
        assert!(t.c > -1.0 && t.c < 1.0);
        assert_eq!(t.c, 0.0);
        assert_eq!(t.orientation, Orientation::MalePositive);
        let s = separability(&x_axis(), t.c, t.orientation, &data, Projection::Raw).unwrap();
        assert_eq!(s, t.accuracy);
    }

    #[test]
    fn degenerate_projections_give_majority() {
        let data = points(&[0.3, 0.3, 0.3], &[0.3]);
        let t = fit_threshold(&x_axis(), &data, Projection::Raw).unwrap();
        assert_eq!(t.accuracy, 0.75);
        assert_eq!(t.orientation, Orientation::FemalePositive);
    }

    #[test]
    fn single_class_rejected() {
        let data = points(&[0.1, 0.2], &[]);
        assert!(matches!(
            fit_threshold(&x_axis(), &data, Projection::Raw),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn random_labels_beat_majority_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<(Vec<f64>, Gender)> = (0..200)
            .map(|_| {
                let g = if rng.gen_bool(0.5) {
                    Gender::Female
                } else {
                    Gender::Male
                };
                (vec![rng.gen_range(-1.0..1.0), 0.0], g)
            })
            .collect();
        let t = fit_threshold(&x_axis(), &data, Projection::Raw).unwrap();
        assert!(t.accuracy >= 0.5);
    }

    #[test]
    fn flipping_labels_and_orientation_preserves_accuracy() {
        let data = points(&[-1.0, 0.4, -0.2], &[1.0, -0.3, 2.0]);
        let flipped: Vec<_> = data.iter().map(|(v, g)| (v.clone(), g.other())).collect();
        for c in [-0.5, 0.0, 0.35] {
            let a = separability(
                &x_axis(),
                c,
                Orientation::MalePositive,
                &data,
                Projection::Raw,
            )
            .unwrap();
            let b = separability(
                &x_axis(),
                c,
                Orientation::FemalePositive,
                &flipped,
                Projection::Raw,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn point_at_threshold_is_positive() {
        let data = vec![(vec![0.5, 0.0], Gender::Male)];
        assert_eq!(
            separability(
                &x_axis(),
                0.5,
                Orientation::MalePositive,
                &data,
                Projection::Raw
            )
            .unwrap(),
            1.0
        );
    }

    #[test]
    fn normalized_projection_ignores_scale() {
        let data = vec![
            (vec![10.0, 0.0], Gender::Male),
            (vec![0.1, 0.0], Gender::Male),
            (vec![-5.0, 1.0], Gender::Female),
        ];
        let t = fit_threshold(&x_axis(), &data, Projection::Normalized).unwrap();
        assert_eq!(t.accuracy, 1.0);
        assert!(t.c.abs() <= 1.0);
    }
}
