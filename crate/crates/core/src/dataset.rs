//! CSV formats for count data, visibilities, diagonals and calibration
//! scans. Mode labels are 1-based on disk and 0-based in memory.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::apparatus::SettingKind;
use crate::certify::{CountRecord, DiagonalData, Estimate, PairScan, SubspaceVisibility};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementRow {
    setting_type: String,
    j: usize,
    i: usize,
    counts: u64,
    time_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct VisibilityRow {
    j: usize,
    i: usize,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "sigma_V")]
    sigma_v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagonalRow {
    j: usize,
    p: f64,
    sigma_p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    j: usize,
    i: usize,
    psi_rad: f64,
    counts: f64,
}

fn zero_based(j: usize) -> Result<usize> {
    j.checked_sub(1).ok_or_else(|| Error::InvalidParameter("mode labels on disk start at 1".into()))
}

pub fn write_measurements<W: Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(MeasurementRow {
            setting_type: r.kind.as_str().to_string(),
            j: r.j + 1,
            i: r.i,
            counts: r.counts,
            time_s: r.time_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurements<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<MeasurementRow>()
        .map(|row| {
            let row = row?;
            let kind = SettingKind::parse(&row.setting_type)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown setting_type '{}'", row.setting_type)))?;
            Ok(CountRecord { kind, j: zero_based(row.j)?, i: row.i, counts: row.counts, time_s: row.time_s })
        })
        .collect()
}

pub fn write_visibilities<W: Write>(vis: &[SubspaceVisibility], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for v in vis {
        w.serialize(VisibilityRow { j: v.j + 1, i: v.i, v: v.visibility.value, sigma_v: v.visibility.sigma })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_visibilities<R: Read>(input: R) -> Result<Vec<SubspaceVisibility>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<VisibilityRow>()
        .map(|row| {
            let row = row?;
            Ok(SubspaceVisibility { j: zero_based(row.j)?, i: row.i, visibility: Estimate::new(row.v, row.sigma_v) })
        })
        .collect()
}

pub fn write_diagonal<W: Write>(data: &DiagonalData, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (j, e) in data.p_corr.iter().enumerate() {
        w.serialize(DiagonalRow { j: j + 1, p: e.value, sigma_p: e.sigma })?;
    }
    w.flush()?;
    Ok(())
}

/// Diagonal CSV; rows must cover `j = 1..d` exactly once. Buckets are unknown
/// and set to zero.
pub fn read_diagonal<R: Read>(input: R) -> Result<DiagonalData> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = BTreeMap::new();
    for row in rd.deserialize::<DiagonalRow>() {
        let row = row?;
        if rows.insert(zero_based(row.j)?, Estimate::new(row.p, row.sigma_p)).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate diagonal row j={}", row.j)));
        }
    }
    let d = rows.len();
    let missing: Vec<String> = (0..d).filter(|j| !rows.contains_key(j)).map(|j| format!("diagonal j={}", j + 1)).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteDataset(missing));
    }
    let data = DiagonalData { p_corr: rows.into_values().collect(), p_bucket: vec![Estimate::exact(0.0); d] };
    data.validate()?;
    Ok(data)
}

pub fn write_calibration<W: Write>(scans: &[PairScan], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scans {
        for (&psi, &counts) in s.psi.iter().zip(&s.counts) {
            w.serialize(CalibrationRow { j: s.j + 1, i: s.i, psi_rad: psi, counts })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_calibration<R: Read>(input: R) -> Result<Vec<PairScan>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut scans: BTreeMap<(usize, usize), PairScan> = BTreeMap::new();
    for row in rd.deserialize::<CalibrationRow>() {
        let row = row?;
        let j = zero_based(row.j)?;
        let s = scans.entry((row.i, j)).or_insert_with(|| PairScan { j, i: row.i, psi: Vec::new(), counts: Vec::new() });
        s.psi.push(row.psi_rad);
        s.counts.push(row.counts);
    }
    Ok(scans.into_values().collect())
}

/// Number of modes covered by the correlated settings.
pub fn infer_dimension(records: &[CountRecord]) -> Result<usize> {
    records
        .iter()
        .filter(|r| r.kind == SettingKind::Corr)
        .map(|r| r.j + 1)
        .max()
        .ok_or_else(|| Error::IncompleteDataset(vec!["corr settings".into()]))
}

/// Pooled count rate and its standard error over the samples of one setting.
fn pooled_rate(samples: &[(u64, f64)]) -> (f64, f64) {
    let counts: f64 = samples.iter().map(|s| s.0 as f64).sum();
    let time: f64 = samples.iter().map(|s| s.1).sum();
    let rate = counts / time;
    if samples.len() < 2 {
        return (rate, counts.sqrt() / time);
    }
    let n = samples.len() as f64;
    let var = samples.iter().map(|&(c, t)| (c as f64 / t - rate).powi(2)).sum::<f64>() / (n - 1.0);
    (rate, (var / n).sqrt())
}

/// Visibility of every pair `{j, j+i}` with `i` in `neighbors`, from the
/// pooled `fringe_max` and `fringe_min` rows. σ is propagated from the
/// sample scatter of each extremum.
pub fn visibilities_from_records(
    records: &[CountRecord],
    d: usize,
    neighbors: &[usize],
) -> Result<Vec<SubspaceVisibility>> {
    let mut groups: BTreeMap<(usize, usize, SettingKind), Vec<(u64, f64)>> = BTreeMap::new();
    for r in records {
        if matches!(r.kind, SettingKind::FringeMax | SettingKind::FringeMin) {
            groups.entry((r.i, r.j, r.kind)).or_default().push((r.counts, r.time_s));
        }
    }
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for &i in neighbors {
        for j in 0..d.saturating_sub(i) {
            let max = groups.get(&(i, j, SettingKind::FringeMax));
            let min = groups.get(&(i, j, SettingKind::FringeMin));
            let (Some(max), Some(min)) = (max, min) else {
                for (kind, g) in [(SettingKind::FringeMax, max), (SettingKind::FringeMin, min)] {
                    if g.is_none() {
                        missing.push(format!("{} j={} i={}", kind.as_str(), j + 1, i));
                    }
                }
                continue;
            };
            let (hi, s_hi) = pooled_rate(max);
            let (lo, s_lo) = pooled_rate(min);
            let sum = hi + lo;
            if !(sum > 0.0) {
                return Err(Error::ZeroCounts);
            }
            let v = ((hi - lo) / sum).clamp(0.0, 1.0);
            let sigma = 2.0 * ((lo * s_hi).powi(2) + (hi * s_lo).powi(2)).sqrt() / (sum * sum);
            out.push(SubspaceVisibility { j, i, visibility: Estimate::new(v, sigma) });
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteDataset(missing));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_round_trip_uses_one_based_labels() {
        let recs = vec![
            CountRecord { kind: SettingKind::Corr, j: 0, i: 0, counts: 12, time_s: 1.0 },
            CountRecord { kind: SettingKind::FringeMin, j: 4, i: 2, counts: 3, time_s: 0.5 },
        ];
        let mut buf = Vec::new();
        write_measurements(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("setting_type,j,i,counts,time_s\ncorr,1,0,12,1.0\n"));
        assert_eq!(read_measurements(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn visibility_and_diagonal_round_trip() {
        let vis = vec![SubspaceVisibility { j: 2, i: 6, visibility: Estimate::new(0.968, 0.001) }];
        let mut buf = Vec::new();
        write_visibilities(&vis, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("j,i,V,sigma_V\n3,6,"));
        assert_eq!(read_visibilities(buf.as_slice()).unwrap(), vis);

        let diag = DiagonalData::uniform(3);
        let mut buf = Vec::new();
        write_diagonal(&diag, &mut buf).unwrap();
        assert_eq!(read_diagonal(buf.as_slice()).unwrap(), diag);
    }

    #[test]
    fn diagonal_gap_is_reported() {
        let text = "j,p,sigma_p\n1,0.5,0\n3,0.5,0\n";
        assert!(matches!(read_diagonal(text.as_bytes()), Err(Error::IncompleteDataset(_))));
    }

    #[test]
    fn visibility_from_extrema_groups() {
        let mut recs = Vec::new();
        for _ in 0..3 {
            recs.push(CountRecord { kind: SettingKind::FringeMax, j: 0, i: 1, counts: 990, time_s: 1.0 });
            recs.push(CountRecord { kind: SettingKind::FringeMin, j: 0, i: 1, counts: 10, time_s: 1.0 });
        }
        let vis = visibilities_from_records(&recs, 2, &[1]).unwrap();
        assert!((vis[0].visibility.value - 0.98).abs() < 1e-12);
        assert_eq!(vis[0].visibility.sigma, 0.0);
        match visibilities_from_records(&recs, 3, &[1]) {
            Err(Error::IncompleteDataset(m)) => assert_eq!(m, vec!["fringe_max j=2 i=1", "fringe_min j=2 i=1"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn calibration_round_trip() {
        let scans = vec![PairScan { j: 1, i: 2, psi: vec![0.0, 1.0], counts: vec![5.0, 7.5] }];
        let mut buf = Vec::new();
        write_calibration(&scans, &mut buf).unwrap();
        assert_eq!(read_calibration(buf.as_slice()).unwrap(), scans);
    }
}
