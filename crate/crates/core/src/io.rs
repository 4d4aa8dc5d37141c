//! File formats: dataset CSV/JSON, noise records, value tables, and the
//! plot-ready CSV emitted by each downstream task.
//!
//! CSV is comma-separated UTF-8 with a required header row and `.` decimal
//! separator. Floats are written with Rust's shortest round-trip formatting,
//! so a save/load cycle preserves every bit. Rows are numbered from 1
//! including the header.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataPoint, Dataset, LabelKind, PointId};
use crate::error::{Error, Result};
use crate::exact::{MarginalProfile, ValueVector};
use crate::mc::ValueReport;
use crate::synth::NoiseRecord;
use crate::tasks::{CurveResult, DetectionResult, SnrProfile};

/// How to read a dataset CSV: which column holds the label, and optionally
/// an explicit label kind (otherwise binary is inferred when every label is
/// 0 or 1).
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub label_column: String,
    pub label_kind: Option<LabelKind>,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            label_kind: None,
        }
    }

    pub fn with_label_kind(mut self, kind: LabelKind) -> Self {
        self.label_kind = Some(kind);
        self
    }
}

fn parse_cell(path: &str, row: usize, column: &str, cell: &str) -> Result<f64> {
    let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        row,
        column: column.to_string(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            row,
            column: column.to_string(),
            message: format!("non-finite value `{cell}`"),
        });
    }
    Ok(value)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Parse a dataset CSV; ids are assigned by row order starting at 0.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let shown = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::SchemaMismatch(
        format!("{shown}: empty file, expected a header row"),
    ))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_idx = columns
        .iter()
        .position(|c| *c == schema.label_column)
        .ok_or_else(|| {
            Error::SchemaMismatch(format!(
                "{shown}: label column `{}` not found in header `{header}`",
                schema.label_column
            ))
        })?;

    let mut points = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line_idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(Error::Parse {
                path: shown,
                row,
                column: String::new(),
                message: format!("expected {} cells, found {}", columns.len(), cells.len()),
            });
        }
        let mut features = Vec::with_capacity(columns.len() - 1);
        let mut label = 0.0;
        for (i, cell) in cells.iter().enumerate() {
            let value = parse_cell(&shown, row, columns[i], cell)?;
            if i == label_idx {
                label = value;
            } else {
                features.push(value);
            }
        }
        points.push(DataPoint {
            id: PointId(points.len() as u64),
            features,
            label,
        });
    }
    if points.is_empty() {
        return Err(Error::SchemaMismatch(format!("{shown}: no data rows")));
    }
    let kind = schema.label_kind.unwrap_or_else(|| {
        if points.iter().all(|p| p.label == 0.0 || p.label == 1.0) {
            LabelKind::Binary
        } else {
            LabelKind::Real
        }
    });
    Dataset::new(points, kind)
}

/// Write a dataset as CSV with feature columns `x1..xd` and label column `y`.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 1..=data.dim() {
        let _ = write!(out, "x{i},");
    }
    out.push_str("y\n");
    for p in data.points() {
        for x in &p.features {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{}", p.label);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    label_kind: LabelKind,
    points: Vec<DataPoint>,
}

/// JSON export mirroring the CSV schema plus explicit ids.
pub fn save_dataset_json(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let repr = DatasetJson {
        label_kind: data.label_kind(),
        points: data.points().to_vec(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&repr)?)?;
    Ok(())
}

pub fn save_noise_record(record: &NoiseRecord, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(record)?)?;
    Ok(())
}

pub fn load_noise_record(path: impl AsRef<Path>) -> Result<NoiseRecord> {
    Ok(serde_json::from_str(&read_file(path.as_ref())?)?)
}

/// `id,value` rows for an exact value vector.
pub fn values_csv(values: &ValueVector) -> String {
    let mut out = String::from("id,value\n");
    for e in &values.entries {
        let _ = writeln!(out, "{},{}", e.id, e.value);
    }
    out
}

/// `id,value,se,rhat` rows for a Monte-Carlo report.
pub fn report_csv(report: &ValueReport) -> String {
    let mut out = String::from("id,value,se,rhat\n");
    for (i, e) in report.values.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.id, e.value, report.standard_errors[i], report.rhat[i]
        );
    }
    out
}

/// Read `(id, value)` pairs back from either values CSV form.
pub fn read_values_csv(path: impl AsRef<Path>) -> Result<Vec<(PointId, f64)>> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::SchemaMismatch(format!("{shown}: empty values file")))?;
    if !header.starts_with("id,value") {
        return Err(Error::SchemaMismatch(format!(
            "{shown}: expected an `id,value...` header, found `{header}`"
        )));
    }
    let mut out = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line_idx + 1;
        let mut cells = line.split(',');
        let id: u64 = cells
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                path: shown.clone(),
                row,
                column: "id".into(),
                message: "not an integer id".into(),
            })?;
        let value = parse_cell(
            &shown,
            row,
            "value",
            cells.next().ok_or_else(|| Error::Parse {
                path: shown.clone(),
                row,
                column: "value".into(),
                message: "missing value cell".into(),
            })?,
        )?;
        out.push((PointId(id), value));
    }
    Ok(out)
}

/// `id,j,mean,variance,count` rows.
pub fn profiles_csv(profiles: &[MarginalProfile]) -> String {
    let mut out = String::from("id,j,mean,variance,count\n");
    for p in profiles {
        for (i, s) in p.per_cardinality.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", p.id, i + 1, s.mean, s.variance, s.count);
        }
    }
    out
}

/// `step,utility,delta` rows; delta is against the step-0 baseline.
pub fn curve_csv(curve: &CurveResult) -> String {
    let mut out = String::from("step,utility,delta\n");
    let base = curve.step_utilities[0];
    for (k, u) in curve.step_utilities.iter().enumerate() {
        let _ = writeln!(out, "{k},{u},{}", u - base);
    }
    out
}

/// `j,mean,std,snr,zeta,zeta_ratio` rows; empty cells where undefined.
pub fn snr_csv(profile: &SnrProfile) -> String {
    fn opt(x: Option<f64>) -> String {
        x.map(|v| v.to_string()).unwrap_or_default()
    }
    let mut out = String::from("j,mean,std,snr,zeta,zeta_ratio\n");
    for (i, &j) in profile.grid.iter().enumerate() {
        let _ = writeln!(
            out,
            "{j},{},{},{},{},{}",
            profile.mean[i],
            profile.std[i],
            opt(profile.snr[i]),
            profile.zeta[i],
            opt(profile.zeta_ratio[i]),
        );
    }
    out
}

/// `id,value,selected,flipped` rows for detection plots.
pub fn detection_csv(
    detection: &DetectionResult,
    values: &[(PointId, f64)],
    record: &NoiseRecord,
) -> String {
    let mut out = String::from("id,value,selected,flipped\n");
    for (id, v) in values {
        let _ = writeln!(
            out,
            "{id},{v},{},{}",
            detection.selected.contains(id) as u8,
            record.is_flipped(*id) as u8
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_gaussian_classification;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("betashap-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn small_csv_parses_with_schema() {
        let path = tmp("small.csv");
        std::fs::write(&path, "x1,x2,y\n0.5,1.5,1\n-0.25,2.0,0\n3.5,0.125,1\n").unwrap();
        let d = load_csv(&path, &CsvSchema::new("y")).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.label_kind(), LabelKind::Binary);
        assert_eq!(d.get(PointId(1)).unwrap().features, vec![-0.25, 2.0]);
    }

    #[test]
    fn nan_cell_is_named_in_the_error() {
        let path = tmp("nan.csv");
        std::fs::write(&path, "x1,y\n1.0,0\nNaN,1\n").unwrap();
        let err = load_csv(&path, &CsvSchema::new("y")).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x1");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_label_column_is_schema_mismatch() {
        let path = tmp("nolabel.csv");
        std::fs::write(&path, "x1,x2\n1.0,2.0\n").unwrap();
        assert!(matches!(
            load_csv(&path, &CsvSchema::new("y")),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let d = gen_gaussian_classification(40, 77);
        let path = tmp("roundtrip.csv");
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path, &CsvSchema::new("y")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn real_labels_inferred_and_overridable() {
        let path = tmp("real.csv");
        std::fs::write(&path, "x1,y\n1.0,0.5\n2.0,1.5\n").unwrap();
        let d = load_csv(&path, &CsvSchema::new("y")).unwrap();
        assert_eq!(d.label_kind(), LabelKind::Real);

        let path2 = tmp("binary_like.csv");
        std::fs::write(&path2, "x1,y\n1.0,0\n2.0,1\n").unwrap();
        let forced = load_csv(
            &path2,
            &CsvSchema::new("y").with_label_kind(LabelKind::Real),
        )
        .unwrap();
        assert_eq!(forced.label_kind(), LabelKind::Real);
    }

    #[test]
    fn values_csv_round_trip() {
        use crate::exact::{ValueEntry, ValueMode};
        use crate::weights::WeightScheme;
        let v = ValueVector {
            mode: ValueMode::Exact,
            scheme: WeightScheme::data_shapley(2).unwrap(),
            entries: vec![
                ValueEntry {
                    id: PointId(0),
                    value: 0.12345678912345679,
                },
                ValueEntry {
                    id: PointId(1),
                    value: -3.5e-17,
                },
            ],
        };
        let path = tmp("values.csv");
        std::fs::write(&path, values_csv(&v)).unwrap();
        let back = read_values_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1.to_bits(), v.entries[0].value.to_bits());
        assert_eq!(back[1].1.to_bits(), v.entries[1].value.to_bits());
    }

    #[test]
    fn noise_record_round_trip() {
        let d = gen_gaussian_classification(30, 1);
        let (_, record) = crate::synth::flip_labels(&d, 0.2, 3).unwrap();
        let path = tmp("noise.json");
        save_noise_record(&record, &path).unwrap();
        assert_eq!(load_noise_record(&path).unwrap(), record);
    }
}
