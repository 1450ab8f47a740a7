//! On-disk dataset layout: `meta.json` plus one CSV per body position.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataSource, Dataset, Deployment, Recording, SensorError};

/// Label used for samples outside every activity.
pub const NULL_LABEL: &str = "null";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sampling_rate: f64,
    pub sources: Vec<DataSource>,
    pub activities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn position_file(position: &str) -> String {
    format!("{position}.csv")
}

fn channel_columns(sources: &[&DataSource]) -> Vec<String> {
    sources
        .iter()
        .flat_map(|s| (0..s.channels).map(move |c| format!("{}_{c}", s.id)))
        .collect()
}

/// Writes `dataset` under `dir`; `comment` becomes a leading `#` line of every CSV.
pub fn write_dataset(
    dir: &Path,
    dataset: &Dataset,
    provenance: Option<serde_json::Value>,
    comment: Option<&str>,
) -> Result<(), SensorError> {
    fs::create_dir_all(dir)?;
    let dep = &dataset.deployment;
    let meta = DatasetMeta {
        sampling_rate: dep.sampling_rate,
        sources: dep.sources.clone(),
        activities: dataset.activities.clone(),
        provenance,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    for pos in dep.positions() {
        let idx: Vec<usize> = (0..dep.sources.len()).filter(|&i| dep.sources[i].position == pos).collect();
        let srcs: Vec<&DataSource> = idx.iter().map(|&i| &dep.sources[i]).collect();
        let chans: Vec<usize> = idx.iter().flat_map(|&i| dep.channel_range(i)).collect();
        let mut file = std::io::BufWriter::new(fs::File::create(dir.join(position_file(pos)))?);
        if let Some(c) = comment {
            writeln!(file, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["recording".to_string(), "label".to_string()];
        header.extend(channel_columns(&srcs));
        w.write_record(&header).map_err(csv_io)?;
        for (r, rec) in dataset.recordings.iter().enumerate() {
            for t in 0..rec.len() {
                let mut row = Vec::with_capacity(header.len());
                row.push(r.to_string());
                row.push(match rec.labels[t] {
                    Some(a) => dataset.activities[a].clone(),
                    None => NULL_LABEL.to_string(),
                });
                for &c in &chans {
                    let v = rec.channels[c][t];
                    row.push(if v.is_nan() { String::new() } else { format!("{v}") });
                }
                w.write_record(&row).map_err(csv_io)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> SensorError {
    SensorError::Io(std::io::Error::other(e.to_string()))
}

struct PositionTable {
    /// Per recording: labels and channel columns.
    recordings: Vec<(Vec<Option<usize>>, Vec<Vec<f64>>)>,
}

fn read_position(path: &Path, srcs: &[&DataSource], activities: &[String]) -> Result<PositionTable, SensorError> {
    let file = path.display().to_string();
    let err = |line: u64, message: String| SensorError::Csv {
        file: file.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => SensorError::Io(io),
            other => SensorError::Io(std::io::Error::other(format!("{other:?}"))),
        })?;
    let mut expected = vec!["recording".to_string(), "label".to_string()];
    expected.extend(channel_columns(srcs));
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(err(1, format!("header {header:?} does not match expected {expected:?}")));
    }
    let n_ch = expected.len() - 2;
    let mut recordings: Vec<(Vec<Option<usize>>, Vec<Vec<f64>>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            return Err(err(line, format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        let r: usize = rec[0].trim().parse().map_err(|_| err(line, format!("bad recording index `{}`", &rec[0])))?;
        if r > recordings.len() {
            return Err(err(line, format!("recording {r} skips an index")));
        }
        if r == recordings.len() {
            recordings.push((Vec::new(), vec![Vec::new(); n_ch]));
        }
        let label = match rec[1].trim() {
            NULL_LABEL => None,
            l => Some(activities.iter().position(|a| a == l).ok_or_else(|| SensorError::UnknownLabel {
                file: file.clone(),
                line,
                label: l.to_string(),
            })?),
        };
        let (labels, chans) = &mut recordings[r];
        labels.push(label);
        for (c, field) in rec.iter().skip(2).enumerate() {
            let field = field.trim();
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field.parse().map_err(|_| err(line, format!("bad number `{field}`")))?
            };
            chans[c].push(v);
        }
    }
    Ok(PositionTable { recordings })
}

/// Reads a dataset directory; positions are aligned by row index within each recording.
pub fn ingest_csv(dir: &Path) -> Result<Dataset, SensorError> {
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let deployment = Deployment {
        sources: meta.sources,
        sampling_rate: meta.sampling_rate,
    };
    deployment.validate()?;
    let mut recordings: Vec<Recording> = Vec::new();
    for (pi, pos) in deployment.positions().into_iter().enumerate() {
        let path = dir.join(position_file(pos));
        if !path.exists() {
            return Err(SensorError::MissingPosition(path.display().to_string()));
        }
        let idx: Vec<usize> = (0..deployment.sources.len())
            .filter(|&i| deployment.sources[i].position == pos)
            .collect();
        // position blocks must be contiguous for channel order to match
        if idx.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(SensorError::Deployment(format!("sources of position `{pos}` must be listed contiguously")));
        }
        let srcs: Vec<&DataSource> = idx.iter().map(|&i| &deployment.sources[i]).collect();
        let table = read_position(&path, &srcs, &meta.activities)?;
        if pi == 0 {
            recordings = table
                .recordings
                .into_iter()
                .map(|(labels, channels)| Recording { channels, labels })
                .collect();
            continue;
        }
        if table.recordings.len() != recordings.len() {
            return Err(SensorError::Csv {
                file: path.display().to_string(),
                line: 0,
                message: format!("{} recordings, expected {}", table.recordings.len(), recordings.len()),
            });
        }
        for (r, (labels, channels)) in table.recordings.into_iter().enumerate() {
            if labels != recordings[r].labels {
                return Err(SensorError::Csv {
                    file: path.display().to_string(),
                    line: 0,
                    message: format!("recording {r}: labels or length differ from the first position"),
                });
            }
            recordings[r].channels.extend(channels);
        }
    }
    Ok(Dataset {
        deployment,
        activities: meta.activities,
        recordings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Dataset {
        let dep = Deployment::grid(&["Hand", "Bag"], &["acc"], 3, 100.0);
        let n = 200;
        Dataset {
            deployment: dep,
            activities: vec!["walk".into(), "sit".into()],
            recordings: vec![Recording {
                channels: (0..6).map(|c| (0..n).map(|t| (t * 7 + c) as f64 * 0.125).collect()).collect(),
                labels: (0..n).map(|t| if t < 50 { None } else { Some(t % 2) }).collect(),
            }],
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = fixture();
        ds.recordings[0].channels[4][17] = f64::NAN;
        write_dataset(dir.path(), &ds, None, Some("seed=1")).unwrap();
        let back = ingest_csv(dir.path()).unwrap();
        assert_eq!(back.deployment, ds.deployment);
        assert_eq!(back.recordings[0].labels, ds.recordings[0].labels);
        assert_eq!(back.recordings[0].channels.len(), 6);
        assert!(back.recordings[0].channels[4][17].is_nan());
        assert_eq!(back.recordings[0].channels[5][199], ds.recordings[0].channels[5][199]);
        assert_eq!(back.n_samples(), 200);
    }

    #[test]
    fn short_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &fixture(), None, None).unwrap();
        let path = dir.path().join("Bag.csv");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[10] = lines[10].rsplit_once(',').unwrap().0.to_string();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let e = ingest_csv(dir.path()).unwrap_err();
        assert!(matches!(e, SensorError::Csv { line: 11, .. }), "{e}");
    }

    #[test]
    fn missing_position_and_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &fixture(), None, None).unwrap();
        let path = dir.path().join("Hand.csv");
        let text = fs::read_to_string(&path).unwrap().replacen(",walk,", ",fly,", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(ingest_csv(dir.path()), Err(SensorError::UnknownLabel { .. })));
        fs::remove_file(&path).unwrap();
        assert!(matches!(ingest_csv(dir.path()), Err(SensorError::MissingPosition(_))));
    }
}
