use serde::Serialize;
use statrs::function::beta::beta_reg;

use super::ScorePair;
use crate::error::{Error, Result};
use crate::model::fmt_f64;

/// Two-sided one-sample t-test on paired differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub t: f64,
    pub p: f64,
    /// Zero sample variance: `p` is 0 for a nonzero mean and 1 otherwise.
    pub degenerate: bool,
}

pub fn paired_t_test(diffs: &[f64]) -> Result<TTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "t-test needs at least 2 differences, got {n}"
        )));
    }
    crate::linalg::check_finite(diffs, "paired differences")?;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(TTest {
            n,
            mean,
            t,
            p,
            degenerate: true,
        });
    }
    let t = mean * (n as f64).sqrt() / var.sqrt();
    let df = (n - 1) as f64;
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest {
        n,
        mean,
        t,
        p,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionRow {
    pub emotion: String,
    pub pairs: usize,
    /// Mean of `F - M` over pairs where the female score is higher.
    pub delta_f_gt_m: f64,
    /// Mean of `M - F` over pairs where the male score is higher.
    pub delta_m_gt_f: f64,
    pub count_f_gt_m: usize,
    pub count_m_gt_f: usize,
    pub count_f_eq_m: usize,
    /// `|count_f_gt_m - count_m_gt_f|`.
    pub delta: usize,
    pub t_test: Option<TTest>,
}

impl EmotionRow {
    fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut m = vec![
            ("delta_f_gt_m", self.delta_f_gt_m),
            ("delta_m_gt_f", self.delta_m_gt_f),
            ("count_f_gt_m", self.count_f_gt_m as f64),
            ("count_m_gt_f", self.count_m_gt_f as f64),
            ("count_f_eq_m", self.count_f_eq_m as f64),
            ("delta", self.delta as f64),
        ];
        if let Some(t) = &self.t_test {
            m.push(("t", t.t));
            m.push(("p", t.p));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityReport {
    /// Scores within half a unit of this decimal place count as equal.
    pub decimals: u32,
    pub rows: Vec<EmotionRow>,
    /// Test over every pair regardless of emotion.
    pub overall: Option<TTest>,
    #[serde(skip)]
    pub pairs: Vec<ScorePair>,
}

impl EquityReport {
    pub const CSV_HEADER: &'static str = "emotion,metric,value";

    /// One row per emotion and metric, then the overall test.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            for (name, v) in r.metrics() {
                s.push_str(&format!("{},{name},{}\n", r.emotion, fmt_f64(v)));
            }
            if let Some(t) = &r.t_test {
                s.push_str(&format!("{},degenerate,{}\n", r.emotion, t.degenerate));
            }
        }
        if let Some(t) = &self.overall {
            s.push_str(&format!("all,pairs,{}\n", t.n));
            s.push_str(&format!("all,t,{}\n", fmt_f64(t.t)));
            s.push_str(&format!("all,p,{}\n", fmt_f64(t.p)));
            s.push_str(&format!("all,degenerate,{}\n", t.degenerate));
        }
        s
    }

    pub fn pairs_csv(&self) -> String {
        let mut s = format!("{}\n", ScorePair::CSV_HEADER);
        for p in &self.pairs {
            s.push_str(&p.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn row(&self, emotion: &str) -> Option<&EmotionRow> {
        self.rows.iter().find(|r| r.emotion == emotion)
    }
}

/// Δ means, gap counts, δ and t-tests per emotion, in order of first
/// appearance. Two scores are equal when they differ by less than half a
/// unit in the `decimals`-th place.
pub fn equity_report(pairs: &[ScorePair], decimals: u32) -> Result<EquityReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no score pairs".into()));
    }
    let tol = 0.5 * 10f64.powi(-(decimals as i32));
    let mut order: Vec<&str> = Vec::new();
    for p in pairs {
        if !order.contains(&p.emotion.as_str()) {
            order.push(&p.emotion);
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for e in order {
        let diffs: Vec<f64> = pairs
            .iter()
            .filter(|p| p.emotion == e)
            .map(|p| p.female - p.male)
            .collect();
        crate::linalg::check_finite(&diffs, "score pairs")?;
        let f_up: Vec<f64> = diffs.iter().copied().filter(|d| *d >= tol).collect();
        let m_up: Vec<f64> = diffs.iter().filter(|d| **d <= -tol).map(|d| -d).collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        rows.push(EmotionRow {
            emotion: e.to_string(),
            pairs: diffs.len(),
            delta_f_gt_m: mean(&f_up),
            delta_m_gt_f: mean(&m_up),
            count_f_gt_m: f_up.len(),
            count_m_gt_f: m_up.len(),
            count_f_eq_m: diffs.len() - f_up.len() - m_up.len(),
            delta: f_up.len().abs_diff(m_up.len()),
            t_test: (diffs.len() >= 2)
                .then(|| paired_t_test(&diffs))
                .transpose()?,
        });
    }
    let all: Vec<f64> = pairs.iter().map(|p| p.female - p.male).collect();
    Ok(EquityReport {
        decimals,
        rows,
        overall: (all.len() >= 2).then(|| paired_t_test(&all)).transpose()?,
        pairs: pairs.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub emotion: String,
    pub metric: String,
    pub raw: f64,
    pub debiased: f64,
    /// `100 * (debiased - raw) / |raw|`, undefined when `raw` is zero.
    pub pct_change: Option<f64>,
}

impl ComparisonRow {
    pub const CSV_HEADER: &'static str = "emotion,metric,raw,debiased,pct_change";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.emotion,
            self.metric,
            fmt_f64(self.raw),
            fmt_f64(self.debiased),
            self.pct_change.map(fmt_f64).unwrap_or_default()
        )
    }
}

/// Side-by-side metrics of two reports over the same emotions.
pub fn compare_reports(raw: &EquityReport, debiased: &EquityReport) -> Result<Vec<ComparisonRow>> {
    let mut out = Vec::new();
    for r in &raw.rows {
        let d = debiased.row(&r.emotion).ok_or_else(|| {
            Error::InvalidInput(format!(
                "emotion {} missing from debiased report",
                r.emotion
            ))
        })?;
        for ((name, a), (_, b)) in r.metrics().into_iter().zip(d.metrics()) {
            out.push(ComparisonRow {
                emotion: r.emotion.clone(),
                metric: name.to_string(),
                raw: a,
                debiased: b,
                pct_change: (a != 0.0).then(|| 100.0 * (b - a) / a.abs()),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(emotion: &str, female: f64, male: f64) -> ScorePair {
        ScorePair {
            template: 0,
            emotion: emotion.into(),
            word: "w".into(),
            phrase_pair: None,
            female,
            male,
        }
    }

    #[test]
    fn t_test_examples() {
        let z = paired_t_test(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!((z.t, z.p), (0.0, 1.0));
        assert!(!z.degenerate);
        let d = paired_t_test(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.p, 0.0);
        let flat = paired_t_test(&[0.0, 0.0]).unwrap();
        assert!(flat.degenerate && flat.p == 1.0);
        let r = paired_t_test(&[0.5, 0.7, 0.3, 0.5, 0.5]).unwrap();
        assert!((r.t - 7.905694150420948).abs() < 1e-9);
        assert!((r.p - 0.001392).abs() < 1e-5);
        assert!(paired_t_test(&[1.0]).is_err());
    }

    #[test]
    fn counts_and_deltas() {
        let pairs = vec![
            pair("joy", 0.6, 0.5),
            pair("joy", 0.5, 0.8),
            pair("joy", 0.5, 0.5002),
            pair("anger", 0.1, 0.2),
        ];
        let r = equity_report(&pairs, 3).unwrap();
        assert_eq!(r.rows.len(), 2);
        let joy = r.row("joy").unwrap();
        assert_eq!(
            (joy.count_f_gt_m, joy.count_m_gt_f, joy.count_f_eq_m),
            (1, 1, 1)
        );
        assert!((joy.delta_f_gt_m - 0.1).abs() < 1e-12);
        assert!((joy.delta_m_gt_f - 0.3).abs() < 1e-12);
        assert_eq!(joy.delta, 0);
        let anger = r.row("anger").unwrap();
        assert_eq!(anger.delta_f_gt_m, 0.0);
        assert!(anger.t_test.is_none());
        assert_eq!(r.overall.unwrap().n, 4);
    }

    #[test]
    fn csv_and_comparison() {
        let a = equity_report(&[pair("joy", 0.6, 0.5), pair("joy", 0.7, 0.5)], 3).unwrap();
        let b = equity_report(&[pair("joy", 0.5, 0.5), pair("joy", 0.55, 0.5)], 3).unwrap();
        let csv = a.to_csv();
        assert!(csv.starts_with("emotion,metric,value\njoy,delta_f_gt_m,"));
        assert!(csv.contains("joy,count_f_gt_m,2"));
        let cmp = compare_reports(&a, &b).unwrap();
        let d = cmp.iter().find(|c| c.metric == "delta").unwrap();
        assert_eq!((d.raw, d.debiased), (2.0, 1.0));
        assert_eq!(d.pct_change, Some(-50.0));
        let eq = cmp.iter().find(|c| c.metric == "count_f_eq_m").unwrap();
        assert_eq!(eq.pct_change, None);
        assert!(a.summary_json().contains("\"decimals\": 3"));
    }
}
