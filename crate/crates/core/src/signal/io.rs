//! Plain-text manifest + per-record CSV ingestion.
//!
//! Manifest: one `<id>,<relative-path>` per line, paths relative to the
//! manifest's directory. Record file: a header line
//! `fs=<int>,age=<int|NA>,sex=<M|F|U>,label=<abbrev>` followed by one line
//! per sample with 12 comma-separated floats in lead order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{Dataset, DiagnosisCode, EcgRecording, Sex, LEADS};
use crate::error::{Error, Result};

/// A record that was skipped during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rejected: Vec<RecordError>,
}

/// Loads every record listed in a manifest. Individual bad records are
/// skipped and reported; only an unreadable manifest is a hard error.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<LoadReport> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once(',') {
            Some((id, path)) => entries.push((id.trim().to_string(), base.join(path.trim()))),
            None => entries.push((
                format!("line{}", lineno + 1),
                PathBuf::new(), // reported below as malformed
            )),
        }
    }

    let parsed: Vec<(String, Result<EcgRecording>)> = entries
        .into_par_iter()
        .map(|(id, path)| {
            let res = if path.as_os_str().is_empty() {
                Err(Error::Schema("malformed manifest line".into()))
            } else {
                read_record(&id, &path)
            };
            (id, res)
        })
        .collect();

    let mut recordings = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (id, res) in parsed {
        match res {
            Ok(rec) if seen.contains(rec.id()) => rejected.push(RecordError {
                error: Error::Schema(format!("duplicate record id `{id}`")).to_string(),
                id,
            }),
            Ok(rec) => {
                seen.insert(rec.id().to_string());
                recordings.push(rec);
            }
            Err(e) => {
                log::warn!("skipping record {id}: {e}");
                rejected.push(RecordError {
                    id,
                    error: e.to_string(),
                })
            }
        }
    }
    let dataset = Dataset::new(recordings, manifest_path.display().to_string())?;
    Ok(LoadReport { dataset, rejected })
}

fn read_record(id: &str, path: &Path) -> Result<EcgRecording> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("record `{id}`: empty file")))?;

    let mut fs_hz = None;
    let mut age = None;
    let mut sex = None;
    let mut label = None;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Schema(format!("record `{id}`: bad header field `{field}`")))?;
        match key.trim() {
            "fs" => {
                let v: u32 = value.trim().parse().map_err(|_| {
                    Error::Schema(format!("record `{id}`: bad fs `{value}`"))
                })?;
                fs_hz = Some(v as f64);
            }
            "age" => {
                age = Some(match value.trim() {
                    "NA" => None,
                    v => Some(v.parse::<u32>().map_err(|_| {
                        Error::Schema(format!("record `{id}`: bad age `{v}`"))
                    })? as f64),
                })
            }
            "sex" => {
                sex = Some(Sex::from_code(value.trim()).ok_or_else(|| {
                    Error::Schema(format!("record `{id}`: bad sex `{value}`"))
                })?)
            }
            "label" => label = Some(value.trim().parse::<DiagnosisCode>()?),
            other => {
                return Err(Error::Schema(format!("record `{id}`: unknown header key `{other}`")))
            }
        }
    }
    let missing = |k: &str| Error::Schema(format!("record `{id}`: header lacks `{k}`"));
    let fs_hz = fs_hz.ok_or_else(|| missing("fs"))?;
    let age = age.ok_or_else(|| missing("age"))?;
    let sex = sex.ok_or_else(|| missing("sex"))?;
    let label = label.ok_or_else(|| missing("label"))?;

    let mut channels = vec![Vec::new(); LEADS];
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for (lead, tok) in line.split(',').enumerate() {
            if lead >= LEADS {
                n = lead + 1;
                continue;
            }
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::Schema(format!("record `{id}`: bad sample `{tok}` on row {}", row + 1))
            })?;
            channels[lead].push(v);
            n = lead + 1;
        }
        if n != LEADS {
            return Err(Error::Schema(format!(
                "record `{id}`: row {} has {n} channels, expected {LEADS}",
                row + 1
            )));
        }
    }
    EcgRecording::new(id, channels, fs_hz, age, sex, label)
}

/// Writes one record file in the ingestion format. Samples use Rust's
/// shortest round-trip float formatting, so reloading is bit-exact.
pub fn write_recording(rec: &EcgRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rec.fs().fract() != 0.0 {
        return Err(Error::Schema(format!(
            "record `{}`: fs {} is not an integer",
            rec.id(),
            rec.fs()
        )));
    }
    let mut out = String::with_capacity(rec.len() * LEADS * 10);
    let age = rec
        .age()
        .map(|a| format!("{}", a.round() as u32))
        .unwrap_or_else(|| "NA".into());
    writeln!(
        out,
        "fs={},age={},sex={},label={}",
        rec.fs() as u32,
        age,
        rec.sex().code(),
        rec.label()
    )
    .expect("write to String");
    for j in 0..rec.len() {
        for (lead, ch) in rec.channels().iter().enumerate() {
            if lead > 0 {
                out.push(',');
            }
            write!(out, "{}", ch[j]).expect("write to String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `records/<id>.csv` files plus `manifest.csv` under `dir` and
/// returns the manifest path.
pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let rec_dir = dir.join("records");
    fs::create_dir_all(&rec_dir).map_err(|e| Error::io(&rec_dir, e))?;
    ds.recordings()
        .par_iter()
        .try_for_each(|r| write_recording(r, rec_dir.join(format!("{}.csv", r.id()))))?;
    let mut manifest = String::new();
    for r in ds.recordings() {
        writeln!(manifest, "{},records/{}.csv", r.id(), r.id()).expect("write to String");
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: DiagnosisCode) -> EcgRecording {
        let channels = (0..LEADS)
            .map(|l| (0..6).map(|j| (l * 10 + j) as f64 * 0.1 - 0.37).collect())
            .collect();
        EcgRecording::new(id, channels, 257.0, Some(61.0), Sex::Female, label).unwrap()
    }

    #[test]
    fn three_valid_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            vec![
                rec("a", DiagnosisCode::NSR),
                rec("b", DiagnosisCode::AF),
                rec("c", DiagnosisCode::VEB),
            ],
            "test",
        )
        .unwrap();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let report = load_dataset(&manifest).unwrap();
        assert!(report.rejected.is_empty());
        assert_eq!(report.dataset.len(), 3);
        for (a, b) in report.dataset.recordings().iter().zip(ds.recordings()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn eleven_channel_record_is_rejected_with_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let good = rec("good", DiagnosisCode::NSR);
        write_recording(&good, dir.path().join("good.csv")).unwrap();
        let mut bad = String::from("fs=257,age=NA,sex=U,label=NSR\n");
        for _ in 0..4 {
            bad.push_str(&vec!["0.5"; 11].join(","));
            bad.push('\n');
        }
        fs::write(dir.path().join("bad.csv"), bad).unwrap();
        fs::write(dir.path().join("m.csv"), "good,good.csv\nbad,bad.csv\n").unwrap();
        let report = load_dataset(dir.path().join("m.csv")).unwrap();
        assert_eq!(report.dataset.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].id, "bad");
        assert!(report.rejected[0].error.contains("schema error"));
    }

    #[test]
    fn unknown_label_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("r.csv"),
            "fs=500,age=40,sex=M,label=XYZ\n".to_string() + &vec!["0"; 12].join(",") + "\n",
        )
        .unwrap();
        fs::write(dir.path().join("m.csv"), "r,r.csv\n").unwrap();
        let report = load_dataset(dir.path().join("m.csv")).unwrap();
        assert!(report.dataset.is_empty());
        assert!(report.rejected[0].error.contains("label error"));
    }

    #[test]
    fn empty_manifest_gives_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.csv"), "").unwrap();
        let report = load_dataset(dir.path().join("m.csv")).unwrap();
        assert!(report.dataset.is_empty());
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let err = load_dataset("/nonexistent/manifest.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn missing_age_is_na() {
        let dir = tempfile::tempdir().unwrap();
        let r = EcgRecording::new("z", vec![vec![1.5]; 12], 500.0, None, Sex::Unknown, DiagnosisCode::SB).unwrap();
        write_recording(&r, dir.path().join("z.csv")).unwrap();
        let text = fs::read_to_string(dir.path().join("z.csv")).unwrap();
        assert!(text.starts_with("fs=500,age=NA,sex=U,label=SB\n"));
    }
}
