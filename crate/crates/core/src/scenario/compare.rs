use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::normalize_name;
use crate::post::{fmt_sig, RegionReport};

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("need at least two scenarios to compare, got {0}")]
    TooFew(usize),
    #[error("scenario {label:?} has no report for region {region:?}")]
    MissingRegion { label: String, region: String },
    #[error("duplicate scenario label {0:?}")]
    DuplicateLabel(String),
}

/// Left/right pairing of two region columns, per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Laterality {
    pub left: String,
    pub right: String,
    /// `max_j(left) / max_j(right)` for each scenario, in row order; `None`
    /// when the right maximum is zero.
    pub ratios: Vec<Option<f64>>,
}

/// Peak current density of every region under every scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub regions: Vec<String>,
    /// `max_j[scenario][region]` in A/m².
    pub max_j: Vec<Vec<f64>>,
    pub laterality: Vec<Laterality>,
}

/// Lines up the regions reported by the first scenario across all others.
pub fn compare_reports(
    runs: &[(String, Vec<RegionReport<f64>>)],
) -> Result<Comparison, CompareError> {
    if runs.len() < 2 {
        return Err(CompareError::TooFew(runs.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (label, _) in runs {
        if !seen.insert(label.as_str()) {
            return Err(CompareError::DuplicateLabel(label.clone()));
        }
    }
    let regions: Vec<String> = runs[0].1.iter().map(|r| r.region.clone()).collect();
    let mut max_j = Vec::with_capacity(runs.len());
    for (label, reports) in runs {
        let by_name: BTreeMap<String, f64> = reports
            .iter()
            .map(|r| (normalize_name(&r.region), r.max_j))
            .collect();
        let row = regions
            .iter()
            .map(|region| {
                by_name
                    .get(&normalize_name(region))
                    .copied()
                    .ok_or_else(|| CompareError::MissingRegion {
                        label: label.clone(),
                        region: region.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        max_j.push(row);
    }

    let mut laterality = Vec::new();
    for (li, left) in regions.iter().enumerate() {
        let key = normalize_name(left);
        if !key.contains("left") {
            continue;
        }
        let want = key.replace("left", "right");
        if let Some(ri) = regions.iter().position(|r| normalize_name(r) == want) {
            let ratios = max_j
                .iter()
                .map(|row| (row[ri] > 0.0).then(|| row[li] / row[ri]))
                .collect();
            laterality.push(Laterality {
                left: left.clone(),
                right: regions[ri].clone(),
                ratios,
            });
        }
    }

    Ok(Comparison {
        labels: runs.iter().map(|(l, _)| l.clone()).collect(),
        regions,
        max_j,
        laterality,
    })
}

impl Comparison {
    /// One row per scenario: label, then max_j per region, then each
    /// left/right ratio.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for r in &self.regions {
            out.push_str(&format!(",max_j[{r}]"));
        }
        for l in &self.laterality {
            out.push_str(&format!(",ratio[{}/{}]", l.left, l.right));
        }
        out.push('\n');
        for (i, label) in self.labels.iter().enumerate() {
            out.push_str(label);
            for v in &self.max_j[i] {
                out.push(',');
                out.push_str(&fmt_sig(*v));
            }
            for l in &self.laterality {
                out.push(',');
                if let Some(r) = l.ratios[i] {
                    out.push_str(&fmt_sig(r));
                }
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lw = self
            .labels
            .iter()
            .map(|l| l.len())
            .max()
            .unwrap_or(0)
            .max(8);
        let cw: Vec<usize> = self.regions.iter().map(|r| r.len().max(12)).collect();
        write!(f, "{:<lw$}", "scenario")?;
        for (r, w) in self.regions.iter().zip(&cw) {
            write!(f, "  {r:>w$}")?;
        }
        for l in &self.laterality {
            write!(
                f,
                "  {:>12}",
                format!("{}/{}", short(&l.left), short(&l.right))
            )?;
        }
        writeln!(f)?;
        for (i, label) in self.labels.iter().enumerate() {
            write!(f, "{label:<lw$}")?;
            for (v, w) in self.max_j[i].iter().zip(&cw) {
                write!(f, "  {:>w$}", format!("{v:.4e}"))?;
            }
            for l in &self.laterality {
                let cell = l.ratios[i].map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
                write!(f, "  {cell:>12}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn short(region: &str) -> &str {
    region.rsplit(['_', ' ']).next().unwrap_or(region)
}
