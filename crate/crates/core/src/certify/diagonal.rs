use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DiagonalData, Estimate};
use crate::apparatus::SettingKind;
use crate::error::{Error, Result};

/// One row of count data: a setting, its 0-based mode `j`, separation `i`
/// (0 for computational-basis settings), counts and integration time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub kind: SettingKind,
    pub j: usize,
    pub i: usize,
    pub counts: u64,
    pub time_s: f64,
}

/// Diagonal probabilities from the `2d` correlated and bucket settings.
///
/// Repeated rows of one setting are pooled. Rates are normalized by the sum
/// of all `2d` setting rates; σ is the Poisson error of each rate.
pub fn diagonal_from_records(records: &[CountRecord], d: usize) -> Result<DiagonalData> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let mut pooled: BTreeMap<(SettingKind, usize), (f64, f64)> = BTreeMap::new();
    for r in records {
        if !matches!(r.kind, SettingKind::Corr | SettingKind::Bucket) {
            continue;
        }
        if r.j >= d {
            return Err(Error::ModeOutOfRange { index: r.j, d });
        }
        if !(r.time_s > 0.0) {
            return Err(Error::InvalidParameter(format!("bad time_s in {} row j={}", r.kind.as_str(), r.j + 1)));
        }
        let e = pooled.entry((r.kind, r.j)).or_insert((0.0, 0.0));
        e.0 += r.counts as f64;
        e.1 += r.time_s;
    }

    let mut missing = Vec::new();
    for kind in [SettingKind::Corr, SettingKind::Bucket] {
        for j in 0..d {
            if !pooled.contains_key(&(kind, j)) {
                missing.push(format!("{} j={}", kind.as_str(), j + 1));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteDataset(missing));
    }

    let total: f64 = pooled.values().map(|(c, t)| c / t).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroCounts);
    }
    let to_estimate = |kind, j| {
        let (c, t) = pooled[&(kind, j)];
        Estimate::new(c / t / total, c.sqrt() / t / total)
    };
    Ok(DiagonalData {
        p_corr: (0..d).map(|j| to_estimate(SettingKind::Corr, j)).collect(),
        p_bucket: (0..d).map(|j| to_estimate(SettingKind::Bucket, j)).collect(),
    })
}
