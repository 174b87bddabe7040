//! Feature construction: technical indicators over rolling windows, cyclical
//! calendar features, and the one-day-lag binary direction target.
//!
//! Indicator columns follow the `base.kind.window` naming contract, e.g.
//! `btc_price.close.sma.7`.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{is_missing, CalendarFrame, SourceCategory, MISSING};

/// The nine indicator kinds computed over each configured window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorKind {
    Sma,
    Ema,
    Wma,
    Rsi,
    Roc,
    Mom,
    StdDev,
    Var,
    Trix,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 9] = [
        IndicatorKind::Sma,
        IndicatorKind::Ema,
        IndicatorKind::Wma,
        IndicatorKind::Rsi,
        IndicatorKind::Roc,
        IndicatorKind::Mom,
        IndicatorKind::StdDev,
        IndicatorKind::Var,
        IndicatorKind::Trix,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IndicatorKind::Sma => "sma",
            IndicatorKind::Ema => "ema",
            IndicatorKind::Wma => "wma",
            IndicatorKind::Rsi => "rsi",
            IndicatorKind::Roc => "roc",
            IndicatorKind::Mom => "mom",
            IndicatorKind::StdDev => "stddev",
            IndicatorKind::Var => "var",
            IndicatorKind::Trix => "trix",
        }
    }

    pub fn parse(s: &str) -> Option<IndicatorKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// (kind, window) pair; window is in days and must be at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub kind: IndicatorKind,
    pub window: usize,
}

impl IndicatorSpec {
    pub fn new(kind: IndicatorKind, window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::Config(format!(
                "indicator window must be >= 2, got {window}"
            )));
        }
        Ok(Self { kind, window })
    }

    /// Number of leading outputs that stay missing.
    pub fn warm_up(&self) -> usize {
        let w = self.window;
        match self.kind {
            IndicatorKind::Sma
            | IndicatorKind::Ema
            | IndicatorKind::Wma
            | IndicatorKind::StdDev
            | IndicatorKind::Var => w - 1,
            IndicatorKind::Rsi | IndicatorKind::Roc | IndicatorKind::Mom => w,
            IndicatorKind::Trix => 3 * w - 2,
        }
    }
}

/// Compute one indicator over a fully-observed series. Output is aligned to
/// the input; the warm-up prefix is missing.
pub fn compute_indicator(series: &[f64], spec: IndicatorSpec) -> Result<Vec<f64>> {
    if series.iter().any(|v| is_missing(*v)) {
        return Err(Error::Integrity(
            "compute_indicator requires a fully-observed series".into(),
        ));
    }
    if spec.warm_up() >= series.len() {
        return Err(Error::WarmUp(format!(
            "{}({}) needs more than {} observations",
            spec.kind.name(),
            spec.window,
            series.len()
        )));
    }
    let n = series.len();
    let w = spec.window;
    let mut out = vec![MISSING; n];
    match spec.kind {
        IndicatorKind::Sma => {
            let mut sum: f64 = series[..w].iter().sum();
            out[w - 1] = sum / w as f64;
            for t in w..n {
                sum += series[t] - series[t - w];
                out[t] = sum / w as f64;
            }
        }
        IndicatorKind::Ema => {
            ema_into(series, w, &mut out);
        }
        IndicatorKind::Wma => {
            let denom = (w * (w + 1)) as f64 / 2.0;
            for t in (w - 1)..n {
                let mut acc = 0.0;
                for i in 0..w {
                    acc += (i + 1) as f64 * series[t + 1 - w + i];
                }
                out[t] = acc / denom;
            }
        }
        IndicatorKind::Rsi => {
            // Wilder smoothing of gains/losses over w changes.
            let mut avg_gain = 0.0;
            let mut avg_loss = 0.0;
            for t in 1..=w {
                let delta = series[t] - series[t - 1];
                avg_gain += delta.max(0.0);
                avg_loss += (-delta).max(0.0);
            }
            avg_gain /= w as f64;
            avg_loss /= w as f64;
            out[w] = rsi_value(avg_gain, avg_loss);
            for t in (w + 1)..n {
                let delta = series[t] - series[t - 1];
                avg_gain = (avg_gain * (w as f64 - 1.0) + delta.max(0.0)) / w as f64;
                avg_loss = (avg_loss * (w as f64 - 1.0) + (-delta).max(0.0)) / w as f64;
                out[t] = rsi_value(avg_gain, avg_loss);
            }
        }
        IndicatorKind::Roc => {
            for t in w..n {
                let base = series[t - w];
                out[t] = if base == 0.0 {
                    0.0
                } else {
                    100.0 * (series[t] - base) / base
                };
            }
        }
        IndicatorKind::Mom => {
            for t in w..n {
                out[t] = series[t] - series[t - w];
            }
        }
        IndicatorKind::StdDev | IndicatorKind::Var => {
            for t in (w - 1)..n {
                let win = &series[t + 1 - w..=t];
                let mean = win.iter().sum::<f64>() / w as f64;
                let var =
                    win.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (w as f64 - 1.0);
                out[t] = if spec.kind == IndicatorKind::Var {
                    var
                } else {
                    var.sqrt()
                };
            }
        }
        IndicatorKind::Trix => {
            let mut e1 = vec![MISSING; n];
            ema_into(series, w, &mut e1);
            let mut e2 = vec![MISSING; n];
            ema_over(&e1, w, w - 1, &mut e2);
            let mut e3 = vec![MISSING; n];
            ema_over(&e2, w, 2 * (w - 1), &mut e3);
            for t in (3 * w - 2)..n {
                let prev = e3[t - 1];
                out[t] = if prev == 0.0 {
                    0.0
                } else {
                    100.0 * (e3[t] - prev) / prev
                };
            }
        }
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_gain == 0.0 && avg_loss == 0.0 {
        // all-flat window reads neutral
        50.0
    } else if avg_loss == 0.0 {
        100.0
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// EMA with smoothing 2/(w+1), seeded with the SMA of the first w values.
fn ema_into(series: &[f64], w: usize, out: &mut [f64]) {
    ema_over(series, w, 0, out)
}

/// Same, but the input itself starts being defined at `offset`.
fn ema_over(series: &[f64], w: usize, offset: usize, out: &mut [f64]) {
    let n = series.len();
    let first = offset + w - 1;
    if first >= n {
        return;
    }
    let alpha = 2.0 / (w as f64 + 1.0);
    let seed: f64 = series[offset..offset + w].iter().sum::<f64>() / w as f64;
    out[first] = seed;
    for t in (first + 1)..n {
        out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1];
    }
}

/// Add one column per (base, spec) pair named `base.kind.window`. Base
/// columns must be observed without interior gaps; a missing prefix is
/// tolerated (the indicator starts at the first observation and the prefix
/// stays missing).
pub fn expand_features(
    frame: &CalendarFrame,
    base_columns: &[String],
    specs: &[IndicatorSpec],
) -> Result<CalendarFrame> {
    let mut out = frame.clone();
    for base in base_columns {
        let values = frame.values(base)?.to_vec();
        let first = values.iter().position(|v| !is_missing(*v)).ok_or_else(|| {
            Error::Integrity(format!("base column '{base}' has no observations"))
        })?;
        if values[first..].iter().any(|v| is_missing(*v)) {
            return Err(Error::Integrity(format!(
                "base column '{base}' has interior gaps; impute before expanding"
            )));
        }
        for spec in specs {
            let computed = compute_indicator(&values[first..], *spec)?;
            let mut col = vec![MISSING; first];
            col.extend(computed);
            let name = format!("{base}.{}.{}", spec.kind.name(), spec.window);
            out.add_column(name, SourceCategory::Derived, col)?;
        }
    }
    Ok(out)
}

/// Names of the four cyclical calendar columns, in emission order.
pub const CYCLICAL_NAMES: [&str; 4] = ["cal.dow_sin", "cal.dow_cos", "cal.dom_sin", "cal.dom_cos"];

/// sin/cos encodings of day-of-week (Monday = 0, period 7) and day-of-month
/// (period 31). Each pair lies on the unit circle.
pub fn cyclical_time_features(dates: &[NaiveDate]) -> [Vec<f64>; 4] {
    let tau = std::f64::consts::TAU;
    let mut cols: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(dates.len()));
    for date in dates {
        let dow = date.weekday().num_days_from_monday() as f64;
        let dom = (date.day() - 1) as f64;
        let a = tau * dow / 7.0;
        let b = tau * dom / 31.0;
        cols[0].push(a.sin());
        cols[1].push(a.cos());
        cols[2].push(b.sin());
        cols[3].push(b.cos());
    }
    cols
}

/// Append the cyclical columns to a frame.
pub fn add_cyclical_features(frame: &mut CalendarFrame) -> Result<()> {
    let cols = cyclical_time_features(frame.dates());
    for (name, values) in CYCLICAL_NAMES.iter().zip(cols) {
        frame.add_column(name.to_string(), SourceCategory::Derived, values)?;
    }
    Ok(())
}

/// Binary next-period direction: `y[t] = 1` iff `close[t+lag] > close[t]`.
/// A flat price counts as non-increase. The returned vector has
/// `close.len() - lag` entries; the unlabeled tail is dropped.
pub fn make_target(close: &[f64], lag: usize) -> Result<Vec<u8>> {
    if lag == 0 {
        return Err(Error::Config("target lag must be positive".into()));
    }
    if lag >= close.len() {
        return Err(Error::Config(format!(
            "target lag {lag} >= series length {}",
            close.len()
        )));
    }
    if close.iter().any(|v| is_missing(*v)) {
        return Err(Error::Integrity("make_target requires observed closes".into()));
    }
    Ok((0..close.len() - lag)
        .map(|t| u8::from(close[t + lag] > close[t]))
        .collect())
}

/// Row-major real matrix. Rows are days, columns are features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            n_cols,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            if row.len() != n_cols {
                return Err(Error::Integrity("ragged matrix rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            n_rows,
            n_cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1))
    }

    /// Copy of the rows at `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            n_rows: indices.len(),
            n_cols: self.n_cols,
        }
    }
}

/// Feature matrix with aligned dates and binary labels, ready for modelling.
/// `y[t]` refers to the direction of day `t + lag`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub dates: Vec<NaiveDate>,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        dates: Vec<NaiveDate>,
        x: Matrix,
        y: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if dates.len() != x.n_rows() || y.len() != x.n_rows() {
            return Err(Error::Integrity(format!(
                "labeled dataset misaligned: {} dates, {} rows, {} labels",
                dates.len(),
                x.n_rows(),
                y.len()
            )));
        }
        if feature_names.len() != x.n_cols() {
            return Err(Error::Integrity("feature names misaligned".into()));
        }
        if x.rows_iter().any(|r| r.iter().any(|v| is_missing(*v))) {
            return Err(Error::Integrity("labeled dataset contains missing cells".into()));
        }
        if y.iter().any(|v| *v > 1) {
            return Err(Error::Integrity("labels must be 0/1".into()));
        }
        Ok(Self {
            dates,
            x,
            y,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    /// Build from a fully-observed frame slice: every column becomes a
    /// feature; labels come from `close_column` with the given lag and the
    /// unlabeled tail rows are dropped.
    pub fn from_frame(frame: &CalendarFrame, close_column: &str, lag: usize) -> Result<Self> {
        let close = frame.values(close_column)?;
        let y = make_target(close, lag)?;
        let n = y.len();
        let feature_names: Vec<String> =
            frame.columns().iter().map(|c| c.name.clone()).collect();
        let mut x = Matrix::zeros(n, feature_names.len());
        for (j, col) in frame.columns().iter().enumerate() {
            for i in 0..n {
                x.set(i, j, col.values[i]);
            }
        }
        LabeledDataset::new(frame.dates()[..n].to_vec(), x, y, feature_names)
    }
}
