//! Readers for beta tables, sector labels and returns matrices.
//!
//! Every error names its source and, where it applies, the offending line and column.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::anchors::Partition;
use crate::error::{Error, Result};
use crate::model::{BetaVector, ReturnsBlock};

const BETAS_SCHEMA: &str = "expected header asset_id,sector,b1,...,bK followed by one row per asset";

/// Per-asset beta columns, e.g. one column per historical period.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    pub asset_ids: Vec<String>,
    pub sectors: Vec<String>,
    pub columns: Vec<BetaVector>,
}

impl BetaTable {
    pub fn p(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    /// Parse CSV text; `source` names the input in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::data(source, e.to_string()))?.clone();
        if header.is_empty() || text.trim().is_empty() {
            return Err(Error::data(source, format!("empty file; {BETAS_SCHEMA}")));
        }
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        let k = names.len().saturating_sub(2);
        let expected: Vec<String> = ["asset_id".to_string(), "sector".to_string()]
            .into_iter()
            .chain((1..=k).map(|j| format!("b{j}")))
            .collect();
        if k == 0 || names != expected {
            return Err(Error::data(source, format!("bad header {:?}; {BETAS_SCHEMA}", names.join(","))));
        }

        let mut asset_ids = Vec::new();
        let mut sectors = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::data(source, e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != k + 2 {
                return Err(Error::data(
                    source,
                    format!("line {line}: expected {} fields, found {}", k + 2, rec.len()),
                ));
            }
            asset_ids.push(rec[0].trim().to_string());
            sectors.push(rec[1].trim().to_string());
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(parse_number(&rec[j + 2], source, line, j + 3)?);
            }
        }
        if asset_ids.is_empty() {
            return Err(Error::data(source, format!("no asset rows; {BETAS_SCHEMA}")));
        }
        let mut seen = HashMap::new();
        for (i, id) in asset_ids.iter().enumerate() {
            if let Some(prev) = seen.insert(id.as_str(), i) {
                return Err(Error::data(source, format!("asset {id:?} appears on rows {} and {}", prev + 1, i + 1)));
            }
        }
        let columns = cols
            .into_iter()
            .enumerate()
            .map(|(j, c)| BetaVector::new(c).map_err(|e| Error::data(source, format!("column b{}: {e}", j + 1))))
            .collect::<Result<_>>()?;
        Ok(Self { asset_ids, sectors, columns })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("asset_id,sector");
        for j in 1..=self.columns.len() {
            out.push_str(&format!(",b{j}"));
        }
        out.push('\n');
        for (i, id) in self.asset_ids.iter().enumerate() {
            out.push_str(id);
            out.push(',');
            out.push_str(&self.sectors[i]);
            for col in &self.columns {
                out.push_str(&format!(",{}", col.as_slice()[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Partition grouping assets by the table's own sector column.
    pub fn sector_partition(&self) -> Result<Partition> {
        Partition::from_labels(&self.sectors)
    }
}

/// Read an `asset_id,sector` file (header optional) and build the sector
/// partition over the assets of `table`, in table order.
pub fn read_sector_partition(path: &Path, table: &BetaTable) -> Result<Partition> {
    parse_sector_partition(&read_text(path)?, &path.display().to_string(), table)
}

pub fn parse_sector_partition(text: &str, source: &str, table: &BetaTable) -> Result<Partition> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut labels: HashMap<String, String> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(source, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::data(
                source,
                format!("line {line}: expected 2 fields asset_id,sector, found {}", rec.len()),
            ));
        }
        let (id, sector) = (rec[0].trim(), rec[1].trim());
        if i == 0 && id == "asset_id" && sector == "sector" {
            continue;
        }
        if labels.insert(id.to_string(), sector.to_string()).is_some() {
            return Err(Error::data(source, format!("line {line}: asset {id:?} labelled twice")));
        }
    }
    let mut ordered = Vec::with_capacity(table.p());
    for id in &table.asset_ids {
        match labels.remove(id) {
            Some(s) => ordered.push(s),
            None => return Err(Error::data(source, format!("missing sector label for asset {id:?}"))),
        }
    }
    if let Some(extra) = labels.keys().min() {
        return Err(Error::data(source, format!("asset {extra:?} is not in the betas table")));
    }
    Partition::from_labels(&ordered).map_err(|e| Error::data(source, e.to_string()))
}

/// Read a `p × n` returns matrix, one asset per row, optionally skipping a header row.
pub fn read_returns(path: &Path, header: bool) -> Result<ReturnsBlock> {
    parse_returns(&read_text(path)?, &path.display().to_string(), header)
}

pub fn parse_returns(text: &str, source: &str, header: bool) -> Result<ReturnsBlock> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).flexible(true).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut n = None;
    let mut p = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(source, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let width = *n.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(Error::data(source, format!("line {line}: expected {width} columns, found {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            values.push(parse_number(field, source, line, j + 1)?);
        }
        p += 1;
    }
    let n = n.ok_or_else(|| Error::data(source, "empty file; expected one row of returns per asset"))?;
    if p < 2 || n < 2 {
        return Err(Error::data(source, format!("need at least 2 rows and 2 columns, found {p} × {n}")));
    }
    ReturnsBlock::new(DMatrix::from_row_slice(p, n, &values)).map_err(|e| Error::data(source, e.to_string()))
}

/// Write a returns matrix as headerless CSV.
pub fn returns_to_csv(block: &ReturnsBlock) -> String {
    let m = block.matrix();
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_number(field: &str, source: &str, line: u64, column: usize) -> Result<f64> {
    let t = field.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::data(source, format!("line {line}, column {column}: expected a finite number, found {t:?}"))),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::data(path.display().to_string(), e.to_string()))
}
