//! Loading heterogeneous daily CSV sources, aligning them on a common
//! contiguous calendar, per-category imputation, and selection of the longest
//! fully-observed training range.
//!
//! Missing cells are represented as `f64::NAN` throughout; use [`is_missing`]
//! rather than comparing against NaN directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker for an unobserved cell.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Which family a source belongs to. The category fixes the legal imputation
/// rule for every column of the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCategory {
    Internal,
    MarketPrice,
    MarketVolume,
    Economic,
    /// Columns produced by the pipeline itself (indicators, cyclical time
    /// features). Never imputed.
    Derived,
}

impl fmt::Display for SourceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SourceCategory::Internal => "internal",
            SourceCategory::MarketPrice => "market_price",
            SourceCategory::MarketVolume => "market_volume",
            SourceCategory::Economic => "economic",
            SourceCategory::Derived => "derived",
        };
        f.write_str(s)
    }
}

/// Expected non-date columns of a source CSV. Every column is real-valued;
/// an empty cell means missing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub columns: Vec<String>,
}

impl CsvSchema {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
        }
    }
}

/// One loaded source: strictly increasing dates and equal-length real columns.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub source_id: String,
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub category: SourceCategory,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// A named column of a [`CalendarFrame`].
#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub category: SourceCategory,
    pub values: Vec<f64>,
}

/// Date-indexed rectangular table on a contiguous daily calendar.
///
/// Immutable by convention once a pipeline stage has produced it; mutation
/// happens through operations that return a new frame or through
/// [`CalendarFrame::add_column`] during feature expansion.
#[derive(Debug, Clone)]
pub struct CalendarFrame {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
}

impl CalendarFrame {
    /// Build a frame, enforcing calendar contiguity, unique column names and
    /// equal column lengths.
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<Column>) -> Result<Self> {
        for pair in dates.windows(2) {
            if pair[1] != pair[0].succ_opt().expect("date overflow") {
                return Err(Error::Integrity(format!(
                    "calendar gap between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for col in &columns {
            if !seen.insert(col.name.clone()) {
                return Err(Error::Integrity(format!(
                    "duplicate column name '{}'",
                    col.name
                )));
            }
            if col.values.len() != dates.len() {
                return Err(Error::Integrity(format!(
                    "column '{}' has {} values for {} dates",
                    col.name,
                    col.values.len(),
                    dates.len()
                )));
            }
        }
        Ok(Self { dates, columns })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::Integrity(format!("no column named '{}'", name)))
    }

    /// Index of a date within the calendar, if covered.
    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        if self.dates.is_empty() {
            return None;
        }
        let first = self.dates[0];
        let off = (date - first).num_days();
        if off < 0 || off as usize >= self.dates.len() {
            None
        } else {
            Some(off as usize)
        }
    }

    /// Append a column; fully-qualified name collisions are rejected.
    pub fn add_column(
        &mut self,
        name: String,
        category: SourceCategory,
        values: Vec<f64>,
    ) -> Result<()> {
        if self.column(&name).is_some() {
            return Err(Error::Integrity(format!(
                "column name collision on '{}'",
                name
            )));
        }
        if values.len() != self.dates.len() {
            return Err(Error::Integrity(format!(
                "column '{}' has {} values for {} dates",
                name,
                values.len(),
                self.dates.len()
            )));
        }
        self.columns.push(Column {
            name,
            category,
            values,
        });
        Ok(())
    }

    /// Restrict the frame to `[start, end]` (inclusive); both must lie on the
    /// calendar.
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Result<CalendarFrame> {
        let (i, j) = match (self.date_index(start), self.date_index(end)) {
            (Some(i), Some(j)) if i <= j => (i, j),
            _ => {
                return Err(Error::Integrity(format!(
                    "slice [{start}, {end}] not covered by calendar"
                )))
            }
        };
        let dates = self.dates[i..=j].to_vec();
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                category: c.category,
                values: c.values[i..=j].to_vec(),
            })
            .collect();
        CalendarFrame::new(dates, columns)
    }

    /// Write the frame as CSV: `date` first, then every column in order.
    /// Missing cells are written as empty strings. Byte-stable for identical
    /// frames.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        wtr.write_record(&header)?;
        for (i, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            for col in &self.columns {
                let v = col.values[i];
                rec.push(if is_missing(v) {
                    String::new()
                } else {
                    format_cell(v)
                });
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read a frame previously written by [`CalendarFrame::write_csv`].
    /// Column categories are supplied by the caller (per-name lookup;
    /// unlisted names default to [`SourceCategory::Derived`]).
    pub fn read_csv<R: std::io::Read>(
        r: R,
        categories: &BTreeMap<String, SourceCategory>,
    ) -> Result<CalendarFrame> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if headers.first().map(String::as_str) != Some("date") {
            return Err(Error::Integrity(
                "frame csv must start with a 'date' column".into(),
            ));
        }
        let names = headers[1..].to_vec();
        let mut dates = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row_idx, record) in rdr.records().enumerate() {
            let record = record?;
            let date = parse_date("frame", row_idx + 1, record.get(0).unwrap_or(""))?;
            dates.push(date);
            for (j, name) in names.iter().enumerate() {
                let raw = record.get(j + 1).unwrap_or("");
                cols[j].push(parse_cell("frame", row_idx + 1, name, raw)?);
            }
        }
        let columns = names
            .into_iter()
            .zip(cols)
            .map(|(name, values)| {
                let category = categories
                    .get(&name)
                    .copied()
                    .unwrap_or(SourceCategory::Derived);
                Column {
                    name,
                    category,
                    values,
                }
            })
            .collect();
        CalendarFrame::new(dates, columns)
    }
}

/// Plain decimal formatting with enough digits to round-trip f64.
fn format_cell(v: f64) -> String {
    let mut s = format!("{}", v);
    if s.parse::<f64>() != Ok(v) {
        s = format!("{:?}", v);
    }
    s
}

fn parse_date(source_id: &str, row: usize, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| Error::Schema {
        source_id: source_id.to_string(),
        row,
        column: "date".to_string(),
        detail: format!("'{}' is not an ISO date", raw),
    })
}

fn parse_cell(source_id: &str, row: usize, column: &str, raw: &str) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(MISSING);
    }
    let v: f64 = raw.parse().map_err(|_| Error::Schema {
        source_id: source_id.to_string(),
        row,
        column: column.to_string(),
        detail: format!("'{}' is not a real number", raw),
    })?;
    if !v.is_finite() {
        return Err(Error::Schema {
            source_id: source_id.to_string(),
            row,
            column: column.to_string(),
            detail: format!("'{}' is not finite", raw),
        });
    }
    Ok(v)
}

/// Load one source CSV: header row, first column `date` (ISO `YYYY-MM-DD`),
/// remaining columns real-valued with empty cells meaning missing. Rows come
/// back sorted by date; duplicate dates are rejected.
pub fn load_csv(path: &Path, schema: &CsvSchema, category: SourceCategory) -> Result<RawSeries> {
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some("date") {
        return Err(Error::Schema {
            source_id,
            row: 0,
            column: headers.first().cloned().unwrap_or_default(),
            detail: "first column must be 'date'".to_string(),
        });
    }
    if headers[1..] != schema.columns[..] {
        return Err(Error::Schema {
            source_id,
            row: 0,
            column: "<header>".to_string(),
            detail: format!(
                "columns {:?} do not match declared schema {:?}",
                &headers[1..],
                schema.columns
            ),
        });
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let date = parse_date(&source_id, row, record.get(0).unwrap_or(""))?;
        let mut vals = Vec::with_capacity(schema.columns.len());
        for (j, name) in schema.columns.iter().enumerate() {
            vals.push(parse_cell(&source_id, row, name, record.get(j + 1).unwrap_or(""))?);
        }
        rows.push((date, vals));
    }

    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Integrity(format!(
                "duplicate date {} in source '{}'",
                pair[0].0, source_id
            )));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let columns = schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), rows.iter().map(|(_, v)| v[j]).collect()))
        .collect();

    Ok(RawSeries {
        source_id,
        dates,
        columns,
        category,
    })
}

/// Merge sources on a contiguous daily calendar `[start, end]`. Each source
/// column becomes `source_id.name`; days absent from a source are missing.
/// Never invents values: every observed cell equals a source cell exactly.
pub fn align_calendar(
    series: &[RawSeries],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<CalendarFrame> {
    if start > end {
        return Err(Error::Integrity(format!(
            "align_calendar start {start} after end {end}"
        )));
    }
    let n_days = (end - start).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = start.iter_days().take(n_days).collect();

    let mut columns: Vec<Column> = Vec::new();
    let mut seen = BTreeSet::new();
    for src in series {
        // day offset within [start, end] for each source row
        let offsets: Vec<Option<usize>> = src
            .dates
            .iter()
            .map(|d| {
                let off = (*d - start).num_days();
                if off < 0 || off as usize >= n_days {
                    None
                } else {
                    Some(off as usize)
                }
            })
            .collect();
        for (name, values) in &src.columns {
            let qualified = format!("{}.{}", src.source_id, name);
            if !seen.insert(qualified.clone()) {
                return Err(Error::Integrity(format!(
                    "colliding fully-qualified column name '{}'",
                    qualified
                )));
            }
            let mut out = vec![MISSING; n_days];
            for (i, off) in offsets.iter().enumerate() {
                if let Some(k) = off {
                    out[*k] = values[i];
                }
            }
            columns.push(Column {
                name: qualified,
                category: src.category,
                values: out,
            });
        }
    }
    CalendarFrame::new(dates, columns)
}

/// How a category's missing cells are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeRule {
    /// Interior gaps only; leading/trailing missing values are left alone.
    /// Look-ahead by construction, which is why it is confined to the
    /// internal category.
    LinearInterpolation,
    /// Carry the previous observation forward. Causal.
    ForwardFill,
    /// Fill with zero once the column has started reporting. Causal.
    ZeroFill,
}

/// Category → rule map.
#[derive(Debug, Clone)]
pub struct ImputeRules(BTreeMap<SourceCategory, ImputeRule>);

impl ImputeRules {
    pub fn new(map: BTreeMap<SourceCategory, ImputeRule>) -> Self {
        Self(map)
    }

    /// internal → linear interpolation, market price → forward fill,
    /// market volume → zero fill, economic → forward fill.
    pub fn paper_defaults() -> Self {
        let mut map = BTreeMap::new();
        map.insert(SourceCategory::Internal, ImputeRule::LinearInterpolation);
        map.insert(SourceCategory::MarketPrice, ImputeRule::ForwardFill);
        map.insert(SourceCategory::MarketVolume, ImputeRule::ZeroFill);
        map.insert(SourceCategory::Economic, ImputeRule::ForwardFill);
        Self(map)
    }

    pub fn rule_for(&self, category: SourceCategory) -> Option<ImputeRule> {
        self.0.get(&category).copied()
    }
}

/// Apply the per-category imputation rules. Leading missing values (no
/// earlier observation) always remain missing; no later value ever influences
/// an earlier cell except under linear interpolation, which the rules confine
/// to the internal category.
pub fn impute(frame: &CalendarFrame, rules: &ImputeRules) -> Result<CalendarFrame> {
    let mut columns = Vec::with_capacity(frame.n_cols());
    for col in frame.columns() {
        let rule = rules.rule_for(col.category).ok_or_else(|| {
            Error::Config(format!(
                "no imputation rule for category '{}' (column '{}')",
                col.category, col.name
            ))
        })?;
        let values = match rule {
            ImputeRule::LinearInterpolation => interpolate_interior(&col.values),
            ImputeRule::ForwardFill => forward_fill(&col.values),
            ImputeRule::ZeroFill => zero_fill(&col.values),
        };
        columns.push(Column {
            name: col.name.clone(),
            category: col.category,
            values,
        });
    }
    CalendarFrame::new(frame.dates().to_vec(), columns)
}

fn interpolate_interior(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut last_obs: Option<usize> = None;
    let mut i = 0;
    while i < out.len() {
        if !is_missing(out[i]) {
            last_obs = Some(i);
            i += 1;
            continue;
        }
        // missing run [i, j)
        let mut j = i;
        while j < out.len() && is_missing(out[j]) {
            j += 1;
        }
        if let (Some(a), true) = (last_obs, j < out.len()) {
            let (lo, hi) = (values[a], values[j]);
            let span = (j - a) as f64;
            for k in i..j {
                out[k] = lo + (hi - lo) * ((k - a) as f64 / span);
            }
        }
        i = j;
    }
    out
}

fn forward_fill(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut last: Option<f64> = None;
    for v in out.iter_mut() {
        if is_missing(*v) {
            if let Some(prev) = last {
                *v = prev;
            }
        } else {
            last = Some(*v);
        }
    }
    out
}

fn zero_fill(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut started = false;
    for v in out.iter_mut() {
        if is_missing(*v) {
            if started {
                *v = 0.0;
            }
        } else {
            started = true;
        }
    }
    out
}

/// Longest contiguous window with no missing cell in any column; ties broken
/// toward the latest start (prefer recent data).
pub fn select_training_range(frame: &CalendarFrame) -> Result<(NaiveDate, NaiveDate)> {
    let n = frame.n_rows();
    let clean: Vec<bool> = (0..n)
        .map(|i| frame.columns().iter().all(|c| !is_missing(c.values[i])))
        .collect();

    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut run_start = 0usize;
    let mut in_run = false;
    for i in 0..=n {
        let ok = i < n && clean[i];
        if ok && !in_run {
            run_start = i;
            in_run = true;
        } else if !ok && in_run {
            let len = i - run_start;
            // >= prefers the later window on equal length
            if best.map_or(true, |(_, bl)| len >= bl) {
                best = Some((run_start, len));
            }
            in_run = false;
        }
    }

    match best {
        Some((s, l)) if l > 0 => Ok((frame.dates()[s], frame.dates()[s + l - 1])),
        _ => Err(Error::EmptyRange(format!(
            " across {} columns and {} rows",
            frame.n_cols(),
            n
        ))),
    }
}
