//! Loading level-series panels from CSV and turning them into increments.
//!
//! The expected file layout is one header row, the time label in the first
//! column and one column per series:
//!
//! ```text
//! t,A,B
//! 2010-07-02,12.5,3.0
//! 2010-07-09,13.0,2.5
//! ```
//!
//! Lines starting with `#` are comments. Cells that are empty, `NA` or `NaN`
//! count as missing; they are never imputed.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What to do with a series that has a gap or a short row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    DropSeries,
}

/// How time labels are ordered. Labels are otherwise opaque.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeOrder {
    #[default]
    Lexicographic,
    Numeric,
    /// A `chrono` format string, e.g. `%Y-%m-%d`.
    Date(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub missing: MissingPolicy,
    /// The file already holds increments; skip differencing.
    pub already_increments: bool,
    pub time_order: TimeOrder,
}

/// N named level series sharing one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    ids: Vec<String>,
    index: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl SeriesPanel {
    /// Builds a panel, checking ids, shape and finiteness. Time-label order
    /// is checked by the loader, which knows the configured [`TimeOrder`].
    pub fn new(ids: Vec<String>, index: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_ids(&ids)?;
        if values.len() != ids.len() {
            return Err(Error::Dimension {
                expected: ids.len(),
                got: values.len(),
            });
        }
        if index.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: index.len(),
            });
        }
        for (id, row) in ids.iter().zip(&values) {
            if row.len() != index.len() {
                return Err(Error::MissingValues(vec![id.clone()]));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("series {id} has non-finite values")));
            }
        }
        Ok(Self { ids, index, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index(&self) -> &[String] {
        &self.index
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_series(&self) -> usize {
        self.ids.len()
    }

    /// Number of observations per series, M + 1 for a level panel.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Writes the panel in the layout [`parse_panel`] reads. `comment` lines
    /// are emitted first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, out: W, comment: &[String]) -> Result<()> {
        let mut out = out;
        for line in comment {
            writeln!(out, "# {line}").map_err(|e| Error::output("<output>", e))?;
        }
        let mut writer = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        let mut header = Vec::with_capacity(self.ids.len() + 1);
        header.push("t".to_string());
        header.extend(self.ids.iter().cloned());
        writer.write_record(&header).map_err(csv_err)?;
        for (t, label) in self.index.iter().enumerate() {
            let mut record = Vec::with_capacity(header.len());
            record.push(label.clone());
            record.extend(self.values.iter().map(|row| row[t].to_string()));
            writer.write_record(&record).map_err(csv_err)?;
        }
        writer
            .flush()
            .map_err(|e| Error::output("<output>", e))?;
        Ok(())
    }
}

/// N increment series of common length M ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPanel {
    ids: Vec<String>,
    values: Vec<Vec<f64>>,
    differenced: bool,
}

impl IncrementPanel {
    pub fn new(ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_ids(&ids)?;
        if values.len() != ids.len() {
            return Err(Error::Dimension {
                expected: ids.len(),
                got: values.len(),
            });
        }
        let m = values.first().map_or(0, Vec::len);
        if m < 2 {
            return Err(Error::InsufficientData { needed: 2, got: m });
        }
        for (id, row) in ids.iter().zip(&values) {
            if row.len() != m {
                return Err(Error::MissingValues(vec![id.clone()]));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("series {id} has non-finite values")));
            }
        }
        Ok(Self {
            ids,
            values,
            differenced: false,
        })
    }

    /// Reads a level panel whose rows already are increments.
    pub fn from_levels_as_is(panel: &SeriesPanel) -> Result<Self> {
        Self::new(panel.ids.clone(), panel.values.clone())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn n_series(&self) -> usize {
        self.ids.len()
    }

    /// M, the number of increments per series.
    pub fn n_obs(&self) -> usize {
        self.values[0].len()
    }

    /// True when the panel was produced by [`to_increments`].
    pub fn differenced(&self) -> bool {
        self.differenced
    }

    /// Keeps the listed time positions, in the order given.
    pub fn select_observations(&self, positions: &[usize]) -> Result<Self> {
        let m = self.n_obs();
        if let Some(&bad) = positions.iter().find(|&&p| p >= m) {
            return Err(Error::Parameter(format!(
                "observation position {bad} out of range for M = {m}"
            )));
        }
        let values = self
            .values
            .iter()
            .map(|row| positions.iter().map(|&p| row[p]).collect())
            .collect();
        let mut out = Self::new(self.ids.clone(), values)?;
        out.differenced = self.differenced;
        Ok(out)
    }
}

/// A loaded panel plus anything the loader had to drop.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub panel: SeriesPanel,
    pub warnings: Vec<String>,
}

pub fn load_panel(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_panel(file, options)
}

pub fn parse_panel<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = csv.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(format_error)?,
        None => return Err(Error::Validation("empty file, header row required".into())),
    };
    if header.len() < 2 {
        return Err(Error::Format {
            line: line_of(&header),
            column: header.len() + 1,
            message: "header needs a time column and at least one series".into(),
        });
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if let Some(col) = ids.iter().position(String::is_empty) {
        return Err(Error::Validation(format!(
            "empty series id in header column {}",
            col + 2
        )));
    }
    check_ids(&ids)?;

    let n = ids.len();
    let mut index: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut missing = vec![0usize; n];
    let mut previous_key: Option<OrderKey> = None;

    for rec in records {
        let rec = rec.map_err(format_error)?;
        let line = line_of(&rec);
        if rec.len() > n + 1 {
            return Err(Error::Format {
                line,
                column: n + 2,
                message: format!("row has {} fields, header has {}", rec.len(), n + 1),
            });
        }
        let label = rec.get(0).unwrap_or_default().to_string();
        let key = order_key(&label, &options.time_order).map_err(|message| Error::Format {
            line,
            column: 1,
            message,
        })?;
        if let Some(prev) = &previous_key {
            if key.partial_cmp(prev) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Format {
                    line,
                    column: 1,
                    message: format!(
                        "time label '{label}' is not strictly after '{}'",
                        index.last().map(String::as_str).unwrap_or_default()
                    ),
                });
            }
        }
        previous_key = Some(key);
        index.push(label);

        for s in 0..n {
            match rec.get(s + 1) {
                None => {
                    missing[s] += 1;
                    columns[s].push(f64::NAN);
                }
                Some(cell) if is_missing_token(cell) => {
                    missing[s] += 1;
                    columns[s].push(f64::NAN);
                }
                Some(cell) => {
                    let v: f64 = cell.parse().map_err(|_| Error::Format {
                        line,
                        column: s + 2,
                        message: format!("cannot parse '{cell}' as a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Format {
                            line,
                            column: s + 2,
                            message: format!("non-finite value '{cell}'"),
                        });
                    }
                    columns[s].push(v);
                }
            }
        }
    }

    let gappy: Vec<usize> = (0..n).filter(|&s| missing[s] > 0).collect();
    let mut warnings = Vec::new();
    let (ids, columns) = if gappy.is_empty() {
        (ids, columns)
    } else {
        match options.missing {
            MissingPolicy::Reject => {
                return Err(Error::MissingValues(
                    gappy.iter().map(|&s| ids[s].clone()).collect(),
                ))
            }
            MissingPolicy::DropSeries => {
                for &s in &gappy {
                    let msg = format!("dropped series {}: {} missing values", ids[s], missing[s]);
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                let keep: Vec<bool> = missing.iter().map(|&c| c == 0).collect();
                let ids: Vec<String> = ids
                    .into_iter()
                    .zip(&keep)
                    .filter_map(|(id, &k)| k.then_some(id))
                    .collect();
                let columns: Vec<Vec<f64>> = columns
                    .into_iter()
                    .zip(&keep)
                    .filter_map(|(c, &k)| k.then_some(c))
                    .collect();
                if ids.is_empty() {
                    return Err(Error::Validation("no complete series remain".into()));
                }
                (ids, columns)
            }
        }
    };

    let panel = SeriesPanel::new(ids, index, columns)?;
    Ok(Ingested { panel, warnings })
}

/// First differences of every level series.
pub fn to_increments(panel: &SeriesPanel) -> Result<IncrementPanel> {
    if panel.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: panel.len(),
        });
    }
    let values = panel
        .values
        .iter()
        .map(|row| row.windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    let mut out = IncrementPanel::new(panel.ids.clone(), values)?;
    out.differenced = true;
    Ok(out)
}

/// Differences the panel unless the options say it already holds increments.
pub fn increments_for(panel: &SeriesPanel, options: &IngestOptions) -> Result<IncrementPanel> {
    if options.already_increments {
        IncrementPanel::from_levels_as_is(panel)
    } else {
        to_increments(panel)
    }
}

fn check_ids(ids: &[String]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::Validation("panel has no series".into()));
    }
    if ids.iter().any(String::is_empty) {
        return Err(Error::Validation("empty series id".into()));
    }
    let mut seen = BTreeSet::new();
    let dups: BTreeSet<&String> = ids.iter().filter(|id| !seen.insert(*id)).collect();
    if !dups.is_empty() {
        return Err(Error::DuplicateIds(dups.into_iter().cloned().collect()));
    }
    Ok(())
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, csv::Position::line)
}

fn format_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, csv::Position::line);
    Error::Format {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, PartialEq, PartialOrd)]
enum OrderKey {
    Text(String),
    Number(f64),
    Time(chrono::NaiveDateTime),
}

fn order_key(label: &str, order: &TimeOrder) -> std::result::Result<OrderKey, String> {
    if label.is_empty() {
        return Err("empty time label".into());
    }
    match order {
        TimeOrder::Lexicographic => Ok(OrderKey::Text(label.to_string())),
        TimeOrder::Numeric => label
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(OrderKey::Number)
            .ok_or_else(|| format!("time label '{label}' is not a number")),
        TimeOrder::Date(fmt) => chrono::NaiveDateTime::parse_from_str(label, fmt)
            .or_else(|_| {
                chrono::NaiveDate::parse_from_str(label, fmt)
                    .map(|d| d.and_time(chrono::NaiveTime::MIN))
            })
            .map(OrderKey::Time)
            .map_err(|e| format!("time label '{label}' does not match '{fmt}': {e}")),
    }
}
