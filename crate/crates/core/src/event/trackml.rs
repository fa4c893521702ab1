//! TrackML two-file CSV layout.
//!
//! ```text
//! hits:  hit_id,x,y,z,volume_id,layer_id,module_id
//! truth: hit_id,particle_id,tx,ty,tz,tpx,tpy,tpz,weight
//! ```
//!
//! Synthetic events are written in the same layout, so every downstream
//! stage reads one format regardless of where the event came from.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Event, Hit, HitTruth, NOISE};
use crate::error::{Error, Result};

pub const HITS_HEADER: [&str; 7] = ["hit_id", "x", "y", "z", "volume_id", "layer_id", "module_id"];
pub const TRUTH_HEADER: [&str; 9] = ["hit_id", "particle_id", "tx", "ty", "tz", "tpx", "tpy", "tpz", "weight"];

/// `<dir>/<stem>-hits.csv` and `<dir>/<stem>-truth.csv`.
pub fn event_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}-hits.csv")), dir.join(format!("{stem}-truth.csv")))
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str, path: &Path, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| Error::Parse {
        path: path.to_owned(),
        line,
        message: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|e| Error::Parse {
        path: path.to_owned(),
        line,
        message: format!("bad {name} {raw:?}: {e}"),
    })
}

fn reader<R: Read>(src: R, path: &Path, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(src);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_owned()).collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("expected header {}, found {}", expected.join(","), header.join(",")),
        });
    }
    Ok(rdr)
}

fn read_hits<R: Read>(src: R, path: &Path) -> Result<Vec<Hit>> {
    let mut rdr = reader(src, path, &HITS_HEADER)?;
    let mut hits = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != HITS_HEADER.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected {} fields, found {}", HITS_HEADER.len(), rec.len()),
            });
        }
        let id: u64 = field(&rec, 0, "hit_id", path, line)?;
        if let Some(first) = seen.insert(id, line) {
            return Err(Error::DuplicateHit { id, first, second: line });
        }
        let hit = Hit::new(
            id,
            field(&rec, 1, "x", path, line)?,
            field(&rec, 2, "y", path, line)?,
            field(&rec, 3, "z", path, line)?,
        )
        .with_layer(
            field(&rec, 4, "volume_id", path, line)?,
            field(&rec, 5, "layer_id", path, line)?,
            field(&rec, 6, "module_id", path, line)?,
        );
        hits.push(hit);
    }
    Ok(hits)
}

fn read_truth<R: Read>(src: R, path: &Path) -> Result<HashMap<u64, (u64, HitTruth)>> {
    let mut rdr = reader(src, path, &TRUTH_HEADER)?;
    let mut out = HashMap::new();
    let mut lines: HashMap<u64, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != TRUTH_HEADER.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected {} fields, found {}", TRUTH_HEADER.len(), rec.len()),
            });
        }
        let id: u64 = field(&rec, 0, "hit_id", path, line)?;
        if let Some(first) = lines.insert(id, line) {
            return Err(Error::DuplicateHit { id, first, second: line });
        }
        let pid: u64 = field(&rec, 1, "particle_id", path, line)?;
        let truth = HitTruth {
            tx: field(&rec, 2, "tx", path, line)?,
            ty: field(&rec, 3, "ty", path, line)?,
            tz: field(&rec, 4, "tz", path, line)?,
            tpx: field(&rec, 5, "tpx", path, line)?,
            tpy: field(&rec, 6, "tpy", path, line)?,
            tpz: field(&rec, 7, "tpz", path, line)?,
            weight: field(&rec, 8, "weight", path, line)?,
        };
        out.insert(id, (pid, truth));
    }
    Ok(out)
}

/// Join a hits file with its truth file into an event. Hits without a truth
/// row are treated as unlabelled noise.
pub fn ingest_trackml(hits_path: &Path, truth_path: &Path) -> Result<Event> {
    let hits = read_hits(File::open(hits_path)?, hits_path)?;
    let truth = read_truth(File::open(truth_path)?, truth_path)?;
    join(hits, truth)
}

/// In-memory variant of [`ingest_trackml`], used by tests and tools that
/// already hold the file contents.
pub fn ingest_trackml_from<R1: Read, R2: Read>(hits: R1, truth: R2) -> Result<Event> {
    let hits = read_hits(hits, Path::new("<hits>"))?;
    let truth = read_truth(truth, Path::new("<truth>"))?;
    join(hits, truth)
}

fn join(mut hits: Vec<Hit>, mut truth: HashMap<u64, (u64, HitTruth)>) -> Result<Event> {
    for h in &mut hits {
        if let Some((pid, t)) = truth.remove(&h.id) {
            h.particle_id = pid;
            h.truth = Some(t);
        } else {
            h.particle_id = NOISE;
        }
    }
    if let Some(&orphan) = truth.keys().min() {
        return Err(Error::UnknownHit(orphan));
    }
    Event::from_labelled_hits(hits)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Write an event in the TrackML layout. Floats use the shortest
/// representation that parses back to the identical value.
pub fn write_trackml(event: &Event, hits_path: &Path, truth_path: &Path) -> Result<()> {
    write_trackml_to(event, File::create(hits_path)?, File::create(truth_path)?)
}

pub fn write_trackml_to<W1: Write, W2: Write>(event: &Event, hits: W1, truth: W2) -> Result<()> {
    let mut hw = csv::Writer::from_writer(hits);
    hw.write_record(HITS_HEADER)?;
    let mut tw = csv::Writer::from_writer(truth);
    tw.write_record(TRUTH_HEADER)?;
    for h in event.hits() {
        hw.write_record([
            h.id.to_string(),
            num(h.x),
            num(h.y),
            num(h.z),
            h.volume_id.to_string(),
            h.layer_id.to_string(),
            h.module_id.to_string(),
        ])?;
        let t = h.truth.unwrap_or(HitTruth { tx: h.x, ty: h.y, tz: h.z, tpx: 0.0, tpy: 0.0, tpz: 0.0, weight: 0.0 });
        tw.write_record([
            h.id.to_string(),
            h.particle_id.to_string(),
            num(t.tx),
            num(t.ty),
            num(t.tz),
            num(t.tpx),
            num(t.tpy),
            num(t.tpz),
            num(t.weight),
        ])?;
    }
    hw.flush()?;
    tw.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HITS: &str = "hit_id,x,y,z,volume_id,layer_id,module_id\n\
1,30.0,1.0,5.0,8,2,1\n\
2,70.0,2.0,12.0,8,4,1\n\
3,-50.0,60.0,-100.0,8,6,3\n";
    const TRUTH: &str = "hit_id,particle_id,tx,ty,tz,tpx,tpy,tpz,weight\n\
1,42,30.0,1.0,5.0,1.0,0.0,0.2,0.5\n\
2,42,70.0,2.0,12.0,1.0,0.05,0.2,0.5\n\
3,0,-50.0,60.0,-100.0,0,0,0,0\n";

    #[test]
    fn joins_hits_and_truth() {
        let ev = ingest_trackml_from(HITS.as_bytes(), TRUTH.as_bytes()).unwrap();
        assert_eq!(ev.hits().len(), 3);
        assert_eq!(ev.hit(1).unwrap().particle_id, 42);
        assert!(ev.hit(3).unwrap().is_noise());
        assert_eq!(ev.particles().len(), 1);
        assert_eq!(ev.particles()[0].hit_ids, vec![1, 2]);
        assert!((ev.particles()[0].pt - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_hit_reports_both_lines() {
        let hits = format!("{HITS}2,1.0,1.0,1.0,8,2,1\n");
        let err = ingest_trackml_from(hits.as_bytes(), TRUTH.as_bytes()).unwrap_err();
        match err {
            Error::DuplicateHit { id: 2, first: 3, second: 5 } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let hits = "hit_id,x,y,z,volume_id,layer_id,module_id\n1,30.0,1.0,5.0,8,2,1\n2,abc,2.0,12.0,8,4,1\n";
        let err = ingest_trackml_from(hits.as_bytes(), TRUTH.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line: 3, ref message, .. } => assert!(message.contains('x'), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truth_for_unknown_hit_is_an_error() {
        let truth = format!("{TRUTH}99,42,0,0,0,0,0,0,0\n");
        let err = ingest_trackml_from(HITS.as_bytes(), truth.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::UnknownHit(99)));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = ingest_trackml_from("id,x\n1,2\n".as_bytes(), TRUTH.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn round_trip_is_exact() {
        let ev = ingest_trackml_from(HITS.as_bytes(), TRUTH.as_bytes()).unwrap();
        let (mut h, mut t) = (Vec::new(), Vec::new());
        write_trackml_to(&ev, &mut h, &mut t).unwrap();
        let back = ingest_trackml_from(h.as_slice(), t.as_slice()).unwrap();
        assert_eq!(back, ev);
    }
}
