//! Fixed-layout estimate tables.
//!
//! One column per fitted model, one row per effect, cells rendered as
//! `estimate<stars> (SE) [p]` with three decimals throughout. Stars are
//! decided on the exact p-value, the bracket value is truncated (not
//! rounded) so a borderline p never prints below a threshold it did not
//! cross.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use super::IoError;

/// One effect in one model column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
}

/// A fitted model: a column label plus its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportColumn {
    pub label: String,
    pub rows: Vec<ReportRow>,
}

const NOTES: &str = "*** p < 0.001, ** p < 0.01, * p < 0.05; exact p-values in brackets; \
                     0.000 is used for p-values below 0.001; standard errors in parentheses";

/// Two-sided p-value under the normal approximation, p = 2(1 - Phi(|z|)),
/// evaluated as erfc(|z|/sqrt 2) with the Abramowitz & Stegun 7.1.26
/// polynomial (absolute error below 1.5e-7).
#[must_use]
pub fn normal_p_value(z: f64) -> f64 {
    let x = z.abs() * FRAC_1_SQRT_2;
    let t = 1.0 / (1.0 + 0.3275 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    (poly * (-x * x).exp()).clamp(0.0, 1.0)
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn truncate_3(p: f64) -> f64 {
    (p * 1000.0).floor() / 1000.0
}

impl ReportRow {
    pub fn p_value(&self) -> f64 {
        normal_p_value(self.estimate / self.standard_error)
    }

    /// Renders `estimate<stars> (SE) [p]`.
    pub fn cell(&self) -> Result<String, IoError> {
        if !(self.standard_error > 0.0) {
            return Err(IoError::NonpositiveSe {
                name: self.name.clone(),
                se: self.standard_error,
            });
        }
        let p = self.p_value();
        Ok(format!(
            "{:.3}{} ({:.3}) [{:.3}]",
            self.estimate,
            stars(p),
            self.standard_error,
            truncate_3(p)
        ))
    }
}

/// Lays the columns out side by side. Row order follows first appearance
/// across columns; a model without some effect leaves that cell blank.
pub fn format_report(columns: &[ReportColumn]) -> Result<String, IoError> {
    let mut names: Vec<&str> = Vec::new();
    for col in columns {
        for row in &col.rows {
            if !names.contains(&row.name.as_str()) {
                names.push(&row.name);
            }
        }
    }
    let mut cells: Vec<BTreeMap<&str, String>> = Vec::with_capacity(columns.len());
    for col in columns {
        let mut by_name = BTreeMap::new();
        for row in &col.rows {
            by_name.insert(row.name.as_str(), row.cell()?);
        }
        cells.push(by_name);
    }

    let name_width = names.iter().map(|n| n.len()).max().unwrap_or(0).max("effect".len());
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|(col, by_name)| {
            by_name.values().map(String::len).max().unwrap_or(0).max(col.label.len())
        })
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:<name_width$}", "effect");
    for (col, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", col.label);
    }
    out.push('\n');
    let total = name_width + widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for name in &names {
        let _ = write!(out, "{name:<name_width$}");
        for (by_name, w) in cells.iter().zip(&widths) {
            let cell = by_name.get(name).map(String::as_str).unwrap_or("");
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(NOTES);
    out.push('\n');
    Ok(out)
}
