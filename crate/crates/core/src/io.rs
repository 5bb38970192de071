//! File formats: CSV data, TOML/JSON configuration, report and simulation
//! outputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Sample};
use crate::dgp::{DgpSpec, SynthDataset, Task};
use crate::error::{Error, Result};
use crate::knockoff::KnockoffReport;
use crate::pipeline::PipelineConfig;

/// Features and response read from one CSV table.
#[derive(Debug, Clone)]
pub struct Table {
    pub x: DataMatrix,
    pub y: Sample,
    /// Header names of the feature columns, in matrix order.
    pub feature_names: Vec<String>,
    pub response: String,
}

/// Read a headed CSV; `response` names the response column and every other
/// column becomes a feature. Rows are numbered from 1 (first data row) in
/// error messages.
pub fn read_table(path: &Path, response: &str) -> Result<Table> {
    let f = fs::File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    read_table_from(f, response)
}

pub fn read_table_from<R: Read>(reader: R, response: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(Error::invalid(format!(
            "CSV needs at least 2 columns, found {}",
            headers.len()
        )));
    }
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::invalid(format!("response column '{response}' not found in header")))?;
    let width = headers.len();
    let mut values = Vec::new();
    let mut nrows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse(format!("CSV row {row}: {e}")))?;
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "CSV row {row}: expected {width} fields, found {}",
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "CSV row {row}, column '{}': cannot parse '{field}' as a number",
                    headers[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "CSV row {row}, column '{}': non-finite value",
                    headers[j]
                )));
            }
            values.push(v);
        }
        nrows += 1;
    }
    let all = Array2::from_shape_vec((nrows, width), values).expect("row widths checked");
    let feats: Vec<usize> = (0..width).filter(|&j| j != ycol).collect();
    let x = DataMatrix::new(all.select(ndarray::Axis(1), &feats))?;
    let y = Sample::new(all.column(ycol).to_owned())?;
    Ok(Table {
        x,
        y,
        feature_names: feats.iter().map(|&j| headers[j].clone()).collect(),
        response: response.to_string(),
    })
}

/// Pipeline configuration from TOML text. Unknown keys are rejected.
pub fn config_from_toml(text: &str) -> Result<PipelineConfig> {
    let cfg: PipelineConfig =
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    config_from_toml(&read_text(path)?)
}

/// Pipeline configuration from a JSON mapping with the same schema as the
/// config file.
pub fn config_from_json(value: &serde_json::Value) -> Result<PipelineConfig> {
    let cfg = PipelineConfig::deserialize(value)
        .map_err(|e| Error::Parse(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn write_report(report: &KnockoffReport, path: &Path) -> Result<()> {
    let mut text = report.to_json();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Plain-text table of the selected features with their scores.
pub fn selection_table(report: &KnockoffReport, names: &[String]) -> String {
    let mut out = String::new();
    let t = if report.threshold.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.6}", report.threshold)
    };
    out.push_str(&format!(
        "selected {} feature(s) at alpha = {} (threshold {t}, estimated FDP {:.4})\n",
        report.selected.len(),
        report.alpha_used,
        report.fdp_hat
    ));
    if report.selected.is_empty() {
        return out;
    }
    out.push_str(&format!("{:>6}  {:<20} {:>12}\n", "index", "feature", "W"));
    for &k in &report.selected {
        let name = names.get(k).map(String::as_str).unwrap_or("?");
        out.push_str(&format!("{k:>6}  {name:<20} {:>12.6}\n", report.w[k]));
    }
    out
}

/// Sidecar written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub dgp: DgpSpec,
    pub true_support: Vec<usize>,
    pub task: Task,
    /// Header of the response column in the combined data file.
    pub response: String,
}

/// Paths produced by [`write_simulation`].
#[derive(Debug, Clone)]
pub struct SimulationFiles {
    pub x: PathBuf,
    pub y: PathBuf,
    pub meta: PathBuf,
    /// Features and response in one table, ready for `select`.
    pub data: PathBuf,
}

fn prefixed(prefix: &str, name: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{name}"))
}

/// Write `{prefix}X.csv`, `{prefix}y.csv`, `{prefix}meta.json` and the
/// combined `{prefix}data.csv`. Feature headers are x0..x{p-1}; the
/// response header is `y`.
pub fn write_simulation(ds: &SynthDataset, spec: &DgpSpec, prefix: &str) -> Result<SimulationFiles> {
    let files = SimulationFiles {
        x: prefixed(prefix, "X.csv"),
        y: prefixed(prefix, "y.csv"),
        meta: prefixed(prefix, "meta.json"),
        data: prefixed(prefix, "data.csv"),
    };
    if let Some(dir) = files.x.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let p = ds.x.ncols();
    let names: Vec<String> = (0..p).map(|k| format!("x{k}")).collect();
    let x = ds.x.view();
    let y = ds.y.as_slice();

    let mut wx = csv::Writer::from_path(&files.x).map_err(csv_err)?;
    let mut wd = csv::Writer::from_path(&files.data).map_err(csv_err)?;
    let mut wy = csv::Writer::from_path(&files.y).map_err(csv_err)?;
    wx.write_record(&names).map_err(csv_err)?;
    wd.write_record(names.iter().map(String::as_str).chain(["y"]))
        .map_err(csv_err)?;
    wy.write_record(["y"]).map_err(csv_err)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        wx.write_record(&cells).map_err(csv_err)?;
        wd.write_record(cells.iter().map(String::as_str).chain([fmt_num(y[i]).as_str()]))
            .map_err(csv_err)?;
        wy.write_record([fmt_num(y[i])]).map_err(csv_err)?;
    }
    wx.flush()?;
    wd.flush()?;
    wy.flush()?;

    let meta = SimulationMeta {
        dgp: *spec,
        true_support: ds.true_support.clone(),
        task: ds.task,
        response: "y".to_string(),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    text.push('\n');
    fs::write(&files.meta, text)?;
    Ok(files)
}

// shortest representation that parses back to the same f64
fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("CSV: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, DgpId};
    use crate::penalty::PenaltySpec;

    #[test]
    fn reads_response_by_name() {
        let csv = "a,y,b\n1,10,2\n3,11,4\n5,12,7\n";
        let t = read_table_from(csv.as_bytes(), "y").unwrap();
        assert_eq!(t.feature_names, vec!["a", "b"]);
        assert_eq!(t.y.as_slice(), &[10.0, 11.0, 12.0]);
        assert_eq!(t.x.view()[[2, 1]], 7.0);
    }

    #[test]
    fn missing_response_names_column() {
        let err = read_table_from("a,b\n1,2\n3,4\n".as_bytes(), "target").unwrap_err();
        assert!(err.to_string().contains("'target'"));
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let csv = "a,y\n1,2\n3,4\n5\n";
        let err = read_table_from(csv.as_bytes(), "y").unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        let csv = "a,y\n1,2\n3,abc\n";
        let err = read_table_from(csv.as_bytes(), "y").unwrap_err();
        assert!(err.to_string().contains("row 2") && err.to_string().contains("'y'"), "{err}");
    }

    #[test]
    fn single_column_rejected() {
        assert!(read_table_from("y\n1\n2\n".as_bytes(), "y").is_err());
    }

    #[test]
    fn toml_and_json_configs_agree() {
        let toml_text = r#"
            alpha = 0.2
            escalate = true
            seed = 9
            [measure]
            kind = "nr_hsic"
            [penalty]
            kind = "scad"
            lambda = 0.05
            a = 3.7
        "#;
        let json = serde_json::json!({
            "alpha": 0.2, "escalate": true, "seed": 9,
            "measure": {"kind": "nr_hsic"},
            "penalty": {"kind": "scad", "lambda": 0.05, "a": 3.7}
        });
        let a = config_from_toml(toml_text).unwrap();
        let b = config_from_json(&json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.penalty, PenaltySpec::scad(0.05, 3.7));
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(config_from_toml("alpah = 0.2").is_err());
        assert!(config_from_json(&serde_json::json!({"penalty": {"kind": "mcp", "c": 1}})).is_err());
    }

    #[test]
    fn simulation_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = format!("{}/sim_", dir.path().display());
        let spec = DgpSpec::new(DgpId::L1a, 15, 6, 4);
        let ds = generate(&spec).unwrap();
        let files = write_simulation(&ds, &spec, &prefix).unwrap();
        let t = read_table(&files.data, "y").unwrap();
        assert_eq!(t.x, ds.x);
        assert_eq!(t.y, ds.y);
        let meta: SimulationMeta =
            serde_json::from_str(&fs::read_to_string(&files.meta).unwrap()).unwrap();
        assert_eq!(meta.true_support, vec![0, 5]);
        assert_eq!(meta.task, Task::Regression);
    }
}
