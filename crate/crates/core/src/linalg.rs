//! Dense vector primitives, thin-SVD based PCA and perpendicular projection.
//!
//! Vectors are plain `f64` slices. Everything here is pure; values are never
//! mutated after construction, so results may be shared across threads freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by the linear-algebra routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed deviation of a direction's norm from one.
    pub unit_norm: f64,
    /// Allowed inner product between two directions of one PCA result.
    pub orthogonality: f64,
    /// Relative singular-value gap below which two directions count as tied.
    pub tie_gap: f64,
    /// Relative size below which a singular value is treated as zero.
    pub rank: f64,
    /// Convergence threshold of the Jacobi rotations.
    pub jacobi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit_norm: 1e-9,
            orthogonality: 1e-8,
            tie_gap: 1e-10,
            rank: 1e-12,
            jacobi: 1e-15,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Arithmetic mean of equally sized rows.
pub fn mean_rows<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.as_ref().len()];
    for r in rows {
        axpy(1.0, r.as_ref(), &mut acc);
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|x| *x /= n);
    acc
}

pub fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// A unit-norm axis together with the share of variance it explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    axis: Vec<f64>,
    explained_variance_ratio: f64,
}

impl Direction {
    /// Wraps an axis that is already unit norm.
    pub fn new(axis: Vec<f64>, explained_variance_ratio: f64) -> Result<Self> {
        check_finite(&axis, "direction axis")?;
        let n = norm(&axis);
        if (n - 1.0).abs() > Tolerances::default().unit_norm {
            return Err(Error::InvalidInput(format!(
                "direction axis has norm {n}, expected 1"
            )));
        }
        if !(0.0..=1.0).contains(&explained_variance_ratio) {
            return Err(Error::InvalidInput(format!(
                "explained variance ratio {explained_variance_ratio} outside [0, 1]"
            )));
        }
        Ok(Direction {
            axis,
            explained_variance_ratio,
        })
    }

    /// Normalizes `v` into a direction with the given explained-variance ratio.
    pub fn from_vector(v: &[f64], explained_variance_ratio: f64) -> Result<Self> {
        check_finite(v, "direction axis")?;
        let n = norm(v);
        if n == 0.0 {
            return Err(Error::DegenerateVector("zero-norm direction".into()));
        }
        Direction::new(v.iter().map(|x| x / n).collect(), explained_variance_ratio)
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        self.explained_variance_ratio
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }

    /// Scalar projection `<v, axis>`.
    pub fn project(&self, v: &[f64]) -> Result<f64> {
        check_len(&self.axis, v)?;
        Ok(dot(v, &self.axis))
    }

    pub fn negated(&self) -> Direction {
        Direction {
            axis: self.axis.iter().map(|x| -x).collect(),
            explained_variance_ratio: self.explained_variance_ratio,
        }
    }
}

/// Output of [`pca_top_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub directions: Vec<Direction>,
    /// Singular values of the returned directions, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Squared Frobenius norm of the (centered) data matrix.
    pub total_energy: f64,
    /// Set when fewer than the requested number of directions exist.
    pub truncated: bool,
}

/// Cosine of the angle between `u` and `v`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    check_finite(u, "cosine input")?;
    check_finite(v, "cosine input")?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateVector(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Removes the component of `a` along the unit direction `b`: `a - <a,b> b`.
pub fn project_out(a: &[f64], b: &Direction) -> Result<Vec<f64>> {
    let mut out = a.to_vec();
    project_out_in_place(&mut out, b)?;
    Ok(out)
}

pub fn project_out_in_place(a: &mut [f64], b: &Direction) -> Result<()> {
    check_len(b.axis(), a)?;
    let c = dot(a, b.axis());
    axpy(-c, b.axis(), a);
    Ok(())
}

/// Principal directions of a set of rows via a one-sided Jacobi thin SVD.
///
/// Returns up to `k` right-singular directions, ordered by nonincreasing
/// singular value and oriented so the mean of the (uncentered) rows projects
/// nonnegatively. When the data has fewer than `k` directions the result is
/// marked `truncated`. Zero singular values inside `min(n, d)` are filled by
/// completing the orthonormal basis.
pub fn pca_top_k<R: AsRef<[f64]>>(rows: &[R], k: usize, center: bool) -> Result<PcaResult> {
    pca_top_k_with(rows, k, center, &Tolerances::default())
}

pub fn pca_top_k_with<R: AsRef<[f64]>>(
    rows: &[R],
    k: usize,
    center: bool,
    tol: &Tolerances,
) -> Result<PcaResult> {
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("PCA needs k >= 1".into()));
    }
    let d = rows[0].as_ref().len();
    for r in rows {
        check_len(rows[0].as_ref(), r.as_ref())?;
        check_finite(r.as_ref(), "PCA row")?;
    }
    if d == 0 {
        return Err(Error::InvalidInput("PCA rows are empty".into()));
    }

    let mean = mean_rows(rows);
    let mut cols: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            if center {
                sub(r.as_ref(), &mean)
            } else {
                r.as_ref().to_vec()
            }
        })
        .collect();
    let total_energy: f64 = cols.iter().map(|c| dot(c, c)).sum();
    if total_energy == 0.0 {
        return Err(Error::ZeroVariance(if center {
            "all rows identical".into()
        } else {
            "all rows are zero".into()
        }));
    }

    jacobi_orthogonalize(&mut cols, tol.jacobi);

    let mut pairs: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| {
            let s = norm(&c);
            (s, c)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sigma_max = pairs[0].0;
    let max_dirs = rows.len().min(d);
    let rank_cut = tol.rank * sigma_max * (rows.len().max(d) as f64);

    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(max_dirs);
    for (s, c) in pairs {
        if s <= rank_cut || found.len() == max_dirs {
            break;
        }
        let axis: Vec<f64> = c.iter().map(|x| x / s).collect();
        found.push((s, axis));
    }
    // Null-space completion for requested directions beyond the rank.
    let wanted = k.min(max_dirs);
    if found.len() < wanted {
        let mut basis: Vec<Vec<f64>> = found.iter().map(|(_, a)| a.clone()).collect();
        for e in 0..d {
            if basis.len() == wanted {
                break;
            }
            let mut v = vec![0.0; d];
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    axpy(-c, b, &mut v);
                }
            }
            let n = norm(&v);
            if n > 0.5 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v.clone());
                found.push((0.0, v));
            }
        }
    }

    for (_, axis) in found.iter_mut() {
        orient(axis, &mean);
    }
    order_ties(&mut found, sigma_max * tol.tie_gap);
    found.truncate(wanted);

    let singular_values: Vec<f64> = found.iter().map(|(s, _)| *s).collect();
    let directions = found
        .into_iter()
        .map(|(s, axis)| {
            let evr = (s * s / total_energy).clamp(0.0, 1.0);
            Direction::new(axis, evr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PcaResult {
        truncated: directions.len() < k,
        directions,
        singular_values,
        total_energy,
    })
}

/// Hestenes one-sided Jacobi: rotates the vectors in `cols` until they are
/// mutually orthogonal. On return their norms are the singular values and
/// their normalized forms the right-singular vectors of the row matrix.
fn jacobi_orthogonalize(cols: &mut [Vec<f64>], eps: f64) {
    let n = cols.len();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Flips `axis` so `mean` projects nonnegatively; when the projection is
/// numerically zero the first clearly nonzero coordinate is made positive.
fn orient(axis: &mut [f64], mean: &[f64]) {
    let proj = dot(axis, mean);
    let flip = if proj.abs() > 1e-12 * norm(mean).max(f64::MIN_POSITIVE) {
        proj < 0.0
    } else {
        axis.iter()
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|x| *x < 0.0)
    };
    if flip {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Within runs of (nearly) equal singular values, orders axes
/// lexicographically in descending order so the output is reproducible.
fn order_ties(found: &mut [(f64, Vec<f64>)], gap: f64) {
    let mut start = 0;
    while start < found.len() {
        let mut end = start + 1;
        while end < found.len() && (found[end - 1].0 - found[end].0).abs() <= gap {
            end += 1;
        }
        if end - start > 1 {
            found[start..end].sort_by(|a, b| {
                for (x, y) in a.1.iter().zip(&b.1) {
                    match y.total_cmp(x) {
                        std::cmp::Ordering::Equal => continue,
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            });
        }
        start = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!(close(c, 8.0 / 9.0, 1e-15));
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateVector(_))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn project_out_examples() {
        let x = Direction::new(vec![1.0, 0.0], 1.0).unwrap();
        assert_eq!(project_out(&[3.0, 4.0], &x).unwrap(), vec![0.0, 4.0]);
        assert_eq!(project_out(&[0.0, 0.0], &x).unwrap(), vec![0.0, 0.0]);
        let z = Direction::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(
            project_out(&[1.0, 2.0, 2.0], &z).unwrap(),
            vec![1.0, 2.0, 0.0]
        );
        assert!(project_out(&[1.0, 2.0, 2.0], &x).is_err());
    }

    #[test]
    fn direction_rejects_non_unit() {
        assert!(Direction::new(vec![1.0, 1.0], 0.5).is_err());
        assert!(Direction::new(vec![1.0, 0.0], 1.5).is_err());
        assert!(Direction::from_vector(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn pca_rank_one() {
        let rows = vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 2.0]];
        let r = pca_top_k(&rows, 1, false).unwrap();
        let a = r.directions[0].axis();
        let h = 1.0 / 2f64.sqrt();
        assert!(close(a[0], h, 1e-12) && close(a[1], h, 1e-12));
        assert!(close(
            r.directions[0].explained_variance_ratio(),
            1.0,
            1e-12
        ));
        assert!(!r.truncated);
    }

    #[test]
    fn pca_two_points_centered() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = pca_top_k(&rows, 2, true).unwrap();
        assert_eq!(r.directions.len(), 2);
        assert!(close(
            r.directions[0].explained_variance_ratio(),
            1.0,
            1e-12
        ));
        assert!(close(
            r.directions[1].explained_variance_ratio(),
            0.0,
            1e-12
        ));
        let c = dot(r.directions[0].axis(), r.directions[1].axis());
        assert!(c.abs() < 1e-12);
        // deterministic orientation: first nonzero coordinate positive
        assert!(r.directions[0].axis()[0] > 0.0);
    }

    #[test]
    fn pca_zero_variance() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert!(matches!(
            pca_top_k(&rows, 1, true),
            Err(Error::ZeroVariance(_))
        ));
        let zeros = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(pca_top_k(&zeros, 1, false).is_err());
    }

    #[test]
    fn pca_truncates_beyond_dimension() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]];
        let r = pca_top_k(&rows, 5, false).unwrap();
        assert_eq!(r.directions.len(), 2);
        assert!(r.truncated);
    }

    #[test]
    fn pca_orientation_follows_mean() {
        let rows = vec![vec![-3.0, 0.1], vec![-2.0, -0.1], vec![-2.5, 0.0]];
        let r = pca_top_k(&rows, 1, false).unwrap();
        assert!(r.directions[0].axis()[0] < 0.0);
    }

    #[test]
    fn pca_rejects_bad_input() {
        assert!(pca_top_k(&[vec![1.0]], 1, false).is_err());
        assert!(pca_top_k(&[vec![1.0], vec![2.0]], 0, false).is_err());
        assert!(pca_top_k(&[vec![1.0], vec![2.0, 3.0]], 1, false).is_err());
        assert!(pca_top_k(&[vec![f64::NAN], vec![2.0]], 1, false).is_err());
    }
}
