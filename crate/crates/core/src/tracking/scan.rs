//! Energy against tracking quality.

use std::io::Write;

use serde::Serialize;

use super::metrics::Metrics;
use crate::error::{Error, Result};
use crate::qubo::Qubo;

/// Energy of the lowest row after normalisation.
pub const SCAN_FLOOR: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    /// `E - E_min + 1000`.
    pub energy: f64,
    pub purity: Option<f64>,
    pub efficiency: Option<f64>,
    pub tag: String,
}

/// One row for the truth assignment, one for the annealed minimum and one
/// per snapshot, with energies shifted so the lowest sits at 1000.
pub fn energy_scan(
    q: &Qubo,
    truth: &[bool],
    minimum: &[bool],
    snapshots: &[Vec<bool>],
    mut metrics_of: impl FnMut(&[bool]) -> Result<Metrics>,
) -> Result<Vec<ScanRow>> {
    let mut raw = Vec::with_capacity(snapshots.len() + 2);
    let tagged = [("truth".to_string(), truth), ("minimum".to_string(), minimum)]
        .into_iter()
        .chain(snapshots.iter().enumerate().map(|(k, s)| (format!("snapshot_{k}"), s.as_slice())));
    for (tag, bits) in tagged {
        let m = metrics_of(bits)?;
        raw.push((q.energy(bits)?, m.purity, m.efficiency, tag));
    }
    let lowest = raw.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    Ok(raw
        .into_iter()
        .map(|(e, purity, efficiency, tag)| ScanRow { energy: e - lowest + SCAN_FLOOR, purity, efficiency, tag })
        .collect())
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["energy", "purity", "efficiency", "tag"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        w.write_record([format!("{}", r.energy), opt(r.purity), opt(r.efficiency), r.tag.clone()])?;
    }
    w.flush()?;
    Ok(())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), actual: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Insufficient("rank correlation needs two points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    if sx == 0.0 || sy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (sx * sy))
}
