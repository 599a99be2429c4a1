use std::io::{Read, Write};

use serde::Deserialize;

use crate::bounds::EnvelopeProfile;
use crate::error::{Error, Result};

/// Resolution that convergence rates are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBase {
    M,
    N,
}

impl RateBase {
    pub fn label(self) -> &'static str {
        match self {
            RateBase::M => "M",
            RateBase::N => "N",
        }
    }
}

/// One measured quantity at `(α, r, M[, N, γ])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub alpha: f64,
    pub r: f64,
    pub m: usize,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub value: f64,
    /// Rate against the previous row of the same series.
    pub rate: Option<f64>,
}

/// Pointwise errors of one run next to an envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseSeries {
    pub alpha: f64,
    pub r: f64,
    pub m: usize,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub envelope: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub title: String,
    /// Column header of the measured value (`error` or `ratio`).
    pub value_label: String,
    pub rate_base: RateBase,
    pub rows: Vec<ReportRow>,
    pub pointwise: Vec<PointwiseSeries>,
}

impl ErrorReport {
    pub fn new(title: impl Into<String>, value_label: impl Into<String>, rate_base: RateBase) -> Self {
        Self {
            title: title.into(),
            value_label: value_label.into(),
            rate_base,
            rows: Vec::new(),
            pointwise: Vec::new(),
        }
    }

    /// Fills `rate` for consecutive rows sharing `(α, r, γ)`; the first row
    /// of each series has no rate.
    pub fn fill_rates(&mut self) -> Result<()> {
        let mut start = 0;
        while start < self.rows.len() {
            let key = series_key(&self.rows[start]);
            let mut end = start + 1;
            while end < self.rows.len() && series_key(&self.rows[end]) == key {
                end += 1;
            }
            let points: Vec<(usize, f64)> = self.rows[start..end]
                .iter()
                .map(|row| (self.base_of(row), row.value))
                .collect();
            let rates = compute_rates(&points)?;
            self.rows[start].rate = None;
            for (row, q) in self.rows[start + 1..end].iter_mut().zip(rates) {
                row.rate = Some(q);
            }
            start = end;
        }
        Ok(())
    }

    fn base_of(&self, row: &ReportRow) -> usize {
        match self.rate_base {
            RateBase::M => row.m,
            RateBase::N => row.n.unwrap_or(row.m),
        }
    }
}

fn series_key(row: &ReportRow) -> (u64, u64, Option<u64>) {
    (row.alpha.to_bits(), row.r.to_bits(), row.gamma.map(f64::to_bits))
}

/// `q_i = ln(e_i / e_{i+1}) / ln(M_{i+1} / M_i)`.
pub fn compute_rates(points: &[(usize, f64)]) -> Result<Vec<f64>> {
    if let Some(&(m, e)) = points.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Domain(format!("rates need positive errors; got {e:e} at M = {m}")));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Domain("rates need strictly increasing mesh sizes".into()));
    }
    Ok(points
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        .collect())
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `alpha,r,M,<value>,rate`, followed by `N` and `gamma`
/// when any row carries them.
pub fn write_csv<W: Write>(report: &ErrorReport, out: W) -> Result<()> {
    let has_n = report.rows.iter().any(|r| r.n.is_some());
    let has_gamma = report.rows.iter().any(|r| r.gamma.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["alpha", "r", "M", report.value_label.as_str(), "rate"];
    if has_n {
        header.push("N");
    }
    if has_gamma {
        header.push("gamma");
    }
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![
            row.alpha.to_string(),
            row.r.to_string(),
            row.m.to_string(),
            sci(row.value),
            row.rate.map(sci).unwrap_or_default(),
        ];
        if has_n {
            rec.push(row.n.map(|n| n.to_string()).unwrap_or_default());
        }
        if has_gamma {
            rec.push(row.gamma.map(|g| g.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CsvRow {
    alpha: f64,
    r: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(alias = "ratio")]
    error: f64,
    rate: Option<f64>,
    #[serde(rename = "N", default)]
    n: Option<usize>,
    #[serde(default)]
    gamma: Option<f64>,
}

/// Parses a table written by [`write_csv`].
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<CsvRow>()
        .map(|rec| {
            let rec = rec?;
            Ok(ReportRow {
                alpha: rec.alpha,
                r: rec.r,
                m: rec.m,
                n: rec.n,
                gamma: rec.gamma,
                value: rec.error,
                rate: rec.rate,
            })
        })
        .collect()
}

fn pow2_label(v: usize) -> String {
    if v.is_power_of_two() && v > 1 {
        format!("2^{}", v.trailing_zeros())
    } else {
        v.to_string()
    }
}

/// Markdown table: one error row and one rate row per series, columns over
/// the swept resolution.
pub fn write_markdown<W: Write>(report: &ErrorReport, mut out: W) -> Result<()> {
    let base = |row: &ReportRow| match report.rate_base {
        RateBase::M => row.m,
        RateBase::N => row.n.unwrap_or(row.m),
    };
    let mut columns: Vec<usize> = report.rows.iter().map(base).collect();
    columns.sort_unstable();
    columns.dedup();
    let has_gamma = report.rows.iter().any(|r| r.gamma.is_some());

    writeln!(out, "### {}", report.title)?;
    writeln!(out)?;
    let lead = if has_gamma { "| r | α | γ | |" } else { "| r | α | |" };
    write!(out, "{lead}")?;
    for c in &columns {
        write!(out, " {}={} |", report.rate_base.label(), pow2_label(*c))?;
    }
    writeln!(out)?;
    write!(out, "|{}", if has_gamma { "---|---|---|---|" } else { "---|---|---|" })?;
    for _ in &columns {
        write!(out, "---:|")?;
    }
    writeln!(out)?;

    let mut start = 0;
    while start < report.rows.len() {
        let key = series_key(&report.rows[start]);
        let mut end = start + 1;
        while end < report.rows.len() && series_key(&report.rows[end]) == key {
            end += 1;
        }
        let series = &report.rows[start..end];
        let first = &series[0];
        let gamma = first.gamma.map(|g| format!(" {g} |")).unwrap_or_default();
        let find = |c: usize| series.iter().find(|row| base(row) == c);
        write!(out, "| {:.4} | {} |{gamma} {} |", first.r, first.alpha, report.value_label)?;
        for &c in &columns {
            match find(c) {
                Some(row) => write!(out, " {:.3e} |", row.value)?,
                None => write!(out, " |")?,
            }
        }
        writeln!(out)?;
        if series.iter().any(|row| row.rate.is_some()) {
            write!(out, "| | |{} rate |", if has_gamma { " |" } else { "" })?;
            for &c in &columns {
                match find(c).and_then(|row| row.rate) {
                    Some(q) => write!(out, " {q:.3} |")?,
                    None => write!(out, " |")?,
                }
            }
            writeln!(out)?;
        }
        start = end;
    }
    Ok(())
}

/// Writes `m,t,error,envelope,ratio`; the ratio is blank where the envelope
/// vanishes.
pub fn emit_pointwise_plot_data<W: Write>(errors: &[f64], envelope: &EnvelopeProfile<'_>, out: W) -> Result<()> {
    if errors.len() != envelope.values.len() {
        return Err(Error::Domain(format!(
            "error series has {} levels, envelope has {}",
            errors.len(),
            envelope.values.len()
        )));
    }
    write_pointwise(errors, envelope.mesh.nodes(), &envelope.values, out)
}

/// [`emit_pointwise_plot_data`] for a stored series.
pub fn write_pointwise_series<W: Write>(series: &PointwiseSeries, out: W) -> Result<()> {
    if series.errors.len() != series.times.len() || series.envelope.len() != series.times.len() {
        return Err(Error::Domain("pointwise series columns differ in length".into()));
    }
    write_pointwise(&series.errors, &series.times, &series.envelope, out)
}

fn write_pointwise<W: Write>(errors: &[f64], times: &[f64], envelope: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "t", "error", "envelope", "ratio"])?;
    for (m, ((e, t), v)) in errors.iter().zip(times).zip(envelope).enumerate() {
        let ratio = if *v > 0.0 { sci(e / v) } else { String::new() };
        w.write_record([m.to_string(), sci(*t), sci(*e), sci(*v), ratio])?;
    }
    w.flush()?;
    Ok(())
}
