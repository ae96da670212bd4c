//! CSV persistence of feature matrices.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MtlError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub source_id: String,
    pub target_id: String,
    pub values: Vec<f64>,
    /// realized transfer RMSE, when evaluated
    pub rmse: Option<f64>,
}

/// Feature rows with their column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

/// Header `source_id,target_id,<features...>[,rmse]`; the `rmse` column is
/// written only when every row has a realized value.
pub fn write_feature_table<W: Write>(table: &FeatureTable, out: W) -> Result<()> {
    let with_rmse = !table.rows.is_empty() && table.rows.iter().all(|r| r.rmse.is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["source_id".to_string(), "target_id".to_string()];
    header.extend(table.feature_names.iter().cloned());
    if with_rmse {
        header.push("rmse".into());
    }
    w.write_record(&header)?;
    for r in &table.rows {
        if r.values.len() != table.feature_names.len() {
            return Err(MtlError::Shape { expected: table.feature_names.len(), got: r.values.len() });
        }
        let mut rec = vec![r.source_id.clone(), r.target_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        if with_rmse {
            rec.push(r.rmse.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table<R: Read>(input: R) -> Result<FeatureTable> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header[0] != "source_id" || header[1] != "target_id" {
        return Err(MtlError::Schema {
            file: "feature matrix".into(),
            detail: "header must start with source_id,target_id".into(),
        });
    }
    let with_rmse = header.last().is_some_and(|h| h == "rmse");
    let n_feat = header.len() - 2 - usize::from(with_rmse);
    let feature_names = header[2..2 + n_feat].to_vec();
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| MtlError::Parse(format!("feature matrix row {}: bad number {s:?}", i + 2)))
        };
        let values = (0..n_feat).map(|k| parse(&rec[2 + k])).collect::<Result<Vec<_>>>()?;
        let rmse = if with_rmse { Some(parse(&rec[2 + n_feat])?) } else { None };
        rows.push(FeatureRow { source_id: rec[0].to_string(), target_id: rec[1].to_string(), values, rmse });
    }
    Ok(FeatureTable { feature_names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let t = FeatureTable {
            feature_names: vec!["a".into(), "b".into()],
            rows: vec![
                FeatureRow { source_id: "s".into(), target_id: "t".into(), values: vec![0.1 + 0.2, -1e-300], rmse: Some(1.0 / 3.0) },
                FeatureRow { source_id: "t".into(), target_id: "s".into(), values: vec![f64::MAX, 0.0], rmse: Some(2.5) },
            ],
        };
        let mut buf = Vec::new();
        write_feature_table(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("source_id,target_id,a,b,rmse\n"));
        assert_eq!(read_feature_table(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn rmse_column_omitted_for_unevaluated_rows() {
        let t = FeatureTable {
            feature_names: vec!["a".into()],
            rows: vec![FeatureRow { source_id: "s".into(), target_id: "t".into(), values: vec![1.0], rmse: None }],
        };
        let mut buf = Vec::new();
        write_feature_table(&t, &mut buf).unwrap();
        assert_eq!(read_feature_table(buf.as_slice()).unwrap(), t);
    }
}
