//! Ground-truth and predicted scores for six simulated Libero splits, with the
//! correlations reported for them.

use serde::{Deserialize, Serialize};

use super::correlation::{correlations, kendall_tau_a, Correlations};
use crate::error::{Error, Result};

/// CSV with columns `dataset_tag,gt,pred`.
pub const FIXTURE_CSV: &str = include_str!("../../data/fixture_scores.csv");

pub const TAGS: [&str; 6] = ["goal", "object", "spatial", "ten", "goal10_p1", "goal10_p2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePoint {
    pub tag: String,
    pub gt: f64,
    pub pred: f64,
}

pub fn parse_fixture(text: &str) -> Result<Vec<ScorePoint>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "dataset_tag,gt,pred" => {}
        other => return Err(Error::Fixture(format!("bad header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Fixture(format!("line {}: bad number {s:?}", i + 2)))
            };
            match f.as_slice() {
                [tag, gt, pred] => Ok(ScorePoint {
                    tag: tag.to_string(),
                    gt: num(gt)?,
                    pred: num(pred)?,
                }),
                _ => Err(Error::Fixture(format!("line {}: expected 3 fields", i + 2))),
            }
        })
        .collect()
}

pub fn bundled_fixture() -> Result<Vec<ScorePoint>> {
    let points = parse_fixture(FIXTURE_CSV)?;
    for tag in TAGS {
        let n = points.iter().filter(|p| p.tag == tag).count();
        if n != 10 {
            return Err(Error::Fixture(format!("tag {tag}: {n} points, expected 10")));
        }
    }
    if points.len() != 60 {
        return Err(Error::Fixture(format!("{} points, expected 60", points.len())));
    }
    Ok(points)
}

/// Reference correlations per group; `All` pools every point.
pub const EXPECTED: [(&str, &[&str], Correlations); 6] = [
    ("Goal", &["goal"], Correlations { srcc: 0.6159, krcc: 0.4319, plcc: 0.7479 }),
    ("Object", &["object"], Correlations { srcc: 0.3303, krcc: 0.2300, plcc: 0.1975 }),
    ("Spatial", &["spatial"], Correlations { srcc: 0.2553, krcc: 0.2247, plcc: 0.3677 }),
    ("Ten", &["ten"], Correlations { srcc: 0.6848, krcc: 0.4667, plcc: 0.6744 }),
    ("Goal+10", &["goal10_p1", "goal10_p2"], Correlations { srcc: 0.7622, krcc: 0.5990, plcc: 0.7955 }),
    ("All", &TAGS, Correlations { srcc: 0.7974, krcc: 0.6033, plcc: 0.7966 }),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub group: String,
    pub points: usize,
    pub computed: Correlations,
    pub expected: Correlations,
    /// Kendall tau-a on the same points, for comparison with tau-b.
    pub tau_a: f64,
    pub passed: bool,
}

impl FixtureRow {
    pub fn deviations(&self) -> [f64; 3] {
        [
            (self.computed.srcc - self.expected.srcc).abs(),
            (self.computed.krcc - self.expected.krcc).abs(),
            (self.computed.plcc - self.expected.plcc).abs(),
        ]
    }
}

pub fn group_scores(points: &[ScorePoint], tags: &[&str]) -> (Vec<f64>, Vec<f64>) {
    points
        .iter()
        .filter(|p| tags.contains(&p.tag.as_str()))
        .map(|p| (p.pred, p.gt))
        .unzip()
}

/// Recomputes every reference row and compares each cell within `tolerance`.
pub fn fixture_check(tolerance: f64) -> Result<Vec<FixtureRow>> {
    let points = bundled_fixture()?;
    EXPECTED
        .iter()
        .map(|(group, tags, expected)| {
            let (pred, gt) = group_scores(&points, tags);
            let computed = correlations(&pred, &gt)?;
            let mut row = FixtureRow {
                group: group.to_string(),
                points: pred.len(),
                computed,
                expected: *expected,
                tau_a: kendall_tau_a(&pred, &gt)?,
                passed: false,
            };
            row.passed = row.deviations().iter().all(|&d| d <= tolerance);
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixture_is_complete() {
        let pts = bundled_fixture().unwrap();
        assert_eq!(pts.len(), 60);
        assert_eq!(pts[0].tag, "goal");
        assert_eq!((pts[0].gt, pts[0].pred), (40.0, 0.176855));
    }

    #[test]
    fn rejects_corrupt_text() {
        assert!(parse_fixture("tag,gt,pred\n").is_err());
        assert!(parse_fixture("dataset_tag,gt,pred\ngoal,1.0\n").is_err());
        assert!(parse_fixture("dataset_tag,gt,pred\ngoal,x,1.0\n").is_err());
    }

    #[test]
    fn all_rows_within_tolerance() {
        let rows = fixture_check(0.01).unwrap();
        for r in &rows {
            assert!(r.passed, "{r:?}");
        }
        let all = rows.iter().find(|r| r.group == "All").unwrap();
        assert_eq!(all.points, 60);
        assert_eq!(rows.iter().find(|r| r.group == "Goal+10").unwrap().points, 20);
    }
}
