use std::collections::BTreeSet;
use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Taxonomy leaf owning the column.
    pub leaf: Option<String>,
}

/// Rectangular table of per-trajectory features. Missing values are `NaN`.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    labels: Vec<String>,
    columns: Vec<ColumnMeta>,
    values: Array2<f64>,
    imputed: bool,
    scaled: bool,
}

/// JSON companion of the feature CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub columns: Vec<ColumnMeta>,
    /// Per row, the indices of missing columns.
    pub missing: Vec<Vec<usize>>,
    pub imputed: bool,
    pub scaled: bool,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, labels: Vec<String>, columns: Vec<ColumnMeta>, values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if ids.len() != rows || labels.len() != rows {
            return Err(Error::InvalidInput(format!(
                "{rows} value rows but {} ids and {} labels",
                ids.len(),
                labels.len()
            )));
        }
        if columns.len() != cols {
            return Err(Error::InvalidInput(format!("{cols} value columns but {} names", columns.len())));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(&c.name)) {
            return Err(Error::InvalidInput(format!("duplicate column `{}`", dup.name)));
        }
        Ok(Self {
            ids,
            labels,
            columns,
            values,
            imputed: false,
            scaled: false,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [ColumnMeta] {
        &mut self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_imputed(&self) -> bool {
        self.imputed
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub(crate) fn replace_values(&self, values: Array2<f64>, imputed: bool, scaled: bool) -> Self {
        debug_assert_eq!(values.dim(), self.values.dim());
        Self {
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            columns: self.columns.clone(),
            values,
            imputed,
            scaled,
        }
    }

    pub fn missing_mask(&self) -> Array2<bool> {
        self.values.mapv(f64::is_nan)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Missing values per column.
    pub fn missing_by_column(&self) -> Vec<usize> {
        self.values
            .axis_iter(Axis(1))
            .map(|c| c.iter().filter(|v| v.is_nan()).count())
            .collect()
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        self.labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Label of each row as an index into [`FeatureMatrix::classes`].
    pub fn class_ids(&self) -> Vec<usize> {
        let classes = self.classes();
        self.labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label is a class"))
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
            columns: self.columns.clone(),
            values: self.values.select(Axis(0), rows),
            imputed: self.imputed,
            scaled: self.scaled,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            values: self.values.select(Axis(1), cols),
            imputed: self.imputed,
            scaled: self.scaled,
        }
    }

    pub fn sidecar(&self) -> FeatureSidecar {
        FeatureSidecar {
            columns: self.columns.clone(),
            missing: self
                .values
                .axis_iter(Axis(0))
                .map(|row| row.iter().enumerate().filter(|(_, v)| v.is_nan()).map(|(j, _)| j).collect())
                .collect(),
            imputed: self.imputed,
            scaled: self.scaled,
        }
    }

    /// Writes `trajectory_id,label,<features...>`; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["trajectory_id", "label"];
        header.extend(self.columns.iter().map(|c| c.name.as_str()));
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (i, row) in self.values.axis_iter(Axis(0)).enumerate() {
            record.clear();
            record.push(self.ids[i].clone());
            record.push(self.labels[i].clone());
            record.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<feature writer>", e))?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.sidecar())?;
        Ok(())
    }

    /// Reads the CSV produced by [`FeatureMatrix::write_csv`]. Column tags come
    /// from `sidecar` when given and are otherwise left empty.
    pub fn read_csv<R: Read>(reader: R, sidecar: Option<&FeatureSidecar>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "trajectory_id" || &header[1] != "label" {
            return Err(Error::Schema(
                "feature CSV must start with `trajectory_id,label` followed by feature columns".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::Schema(format!(
                    "feature CSV line {}: {} fields, expected {}",
                    line + 2,
                    record.len(),
                    header.len()
                )));
            }
            ids.push(record[0].to_string());
            labels.push(record[1].to_string());
            for field in record.iter().skip(2) {
                data.push(if field.is_empty() {
                    f64::NAN
                } else {
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Schema(format!("feature CSV line {}: `{field}`: {e}", line + 2)))?
                });
            }
        }
        let values = Array2::from_shape_vec((ids.len(), names.len()), data).expect("rectangular");
        let columns = match sidecar {
            Some(s) => {
                if s.columns.len() != names.len() || s.columns.iter().zip(&names).any(|(c, n)| &c.name != n) {
                    return Err(Error::Schema("sidecar columns do not match the CSV header".into()));
                }
                s.columns.clone()
            }
            None => names.into_iter().map(|name| ColumnMeta { name, leaf: None }).collect(),
        };
        let mut m = Self::new(ids, labels, columns, values)?;
        if let Some(s) = sidecar {
            m.imputed = s.imputed;
            m.scaled = s.scaled;
        }
        Ok(m)
    }
}
