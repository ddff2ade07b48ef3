//! File formats and result rendering.
//!
//! Everything on disk is UTF-8 TSV with a header row. Panels come in four
//! files (edges, nodes, composition, membership), model specifications in a
//! line-oriented `.spec` format, and results go out as TSV, fixed-layout
//! text reports and standalone SVG plots.

mod modelspec;
mod panel_io;
mod report;
mod svg;

pub use modelspec::{parse_model_spec, ModelSpecFile, ParsedEffect};
pub use panel_io::{load_panel, save_panel, LoadedPanel};
pub use report::{format_report, normal_p_value, ReportColumn, ReportRow};
pub use svg::{experiment_svg, gof_svg};

use thiserror::Error;

use crate::attrs::AttrError;
use crate::ergm::ErgmError;
use crate::saom::SaomError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: empty file, expected a header line")]
    MissingHeader { path: String },
    #[error("{path}:{line}: expected at least {expected} tab-separated fields, got {got}")]
    FieldCount { path: String, line: usize, expected: usize, got: usize },
    #[error("{path}:{line}: cannot parse {what} from '{text}'")]
    BadField { path: String, line: usize, what: &'static str, text: String },
    #[error("{path}:{line}: unknown node id '{id}'")]
    UnknownNode { path: String, line: usize, id: String },
    #[error("{path}:{line}: self-loop on node '{id}'")]
    SelfLoop { path: String, line: usize, id: String },
    #[error("{path}: waves must be contiguous integers from 1; wave {wave} is missing")]
    WaveGap { path: String, wave: usize },
    #[error("{path}:{line}: edge touches node '{id}' which is absent in wave {wave}")]
    AbsentEdge { path: String, line: usize, id: String, wave: usize },
    #[error("{path}:{line}: duplicate row for node '{id}'")]
    DuplicateRow { path: String, line: usize, id: String },
    #[error("{path}:{line}: wave {wave} outside 1..={waves}")]
    WaveRange { path: String, line: usize, wave: usize, waves: usize },
    #[error("{path}:{line}: unknown effect '{name}'")]
    UnknownEffect { path: String, line: usize, name: String },
    #[error("{path}:{line}: {message}")]
    SpecLine { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    SpecFile { path: String, message: String },
    #[error("standard error for '{name}' must be positive, got {se}")]
    NonpositiveSe { name: String, se: f64 },
    #[error(transparent)]
    Attr(#[from] AttrError),
    #[error(transparent)]
    Saom(#[from] SaomError),
    #[error(transparent)]
    Ergm(#[from] ErgmError),
}

/// Formats a number with the given count of significant digits, the house
/// style for all TSV output.
#[must_use]
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(1.0, 6), "1.00000");
        assert_eq!(format_sig(-3.33333333, 6), "-3.33333");
        assert_eq!(format_sig(123456789.0, 6), "123456789");
        assert_eq!(format_sig(0.000012345678, 6), "0.0000123457");
        assert_eq!(format_sig(2.5, 3), "2.50");
        assert_eq!(format_sig(f64::NAN, 6), "NaN");
    }
}
