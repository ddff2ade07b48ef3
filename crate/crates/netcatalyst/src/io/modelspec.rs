//! Line-oriented model specification files.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! # cross-sectional model
//! effect edges init=-3
//! effect gwesp decay=0.7
//! effect nodematch attr=country
//! effect nodefactor attr=country level=US
//!
//! # longitudinal model
//! effect density fix=-0.4
//! effect inPop
//! effect egoPlusAltX attr=member
//! rate 1 init=3.5
//! rate 2 init=3.5
//! ```
//!
//! `init=` sets a starting value (default 0), `fix=` sets it and excludes
//! the effect from estimation. Rate lines are optional; when present there
//! must be one per period.

use std::path::Path;

use super::IoError;
use crate::ergm::{ErgmEffect, ErgmSpec};
use crate::saom::{SaomEffectKind, SaomSpec};

const ERGM_NAMES: &[&str] = &["edges", "gwdegree", "gwesp", "triangles", "nodefactor", "nodematch"];
const SAOM_NAMES: &[&str] = &["density", "transTriad", "inPop", "egoPlusAltX", "sameX"];

/// One `effect` line, uninterpreted beyond key=value splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEffect {
    pub name: String,
    pub attr: Option<String>,
    pub level: Option<String>,
    pub decay: Option<f64>,
    pub init: f64,
    pub fixed: bool,
    pub line: usize,
}

/// A parsed `.spec` file; convert with [`ModelSpecFile::to_ergm_spec`] or
/// [`ModelSpecFile::to_saom_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecFile {
    pub path: String,
    pub effects: Vec<ParsedEffect>,
    /// `(line, period, starting value)` per `rate` directive, 1-based periods.
    pub rates: Vec<(usize, usize, f64)>,
}

pub fn parse_model_spec(path: &Path) -> Result<ModelSpecFile, IoError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: name.clone(), source })?;

    let mut effects = Vec::new();
    let mut rates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        match words.next() {
            Some("effect") => {
                let effect_name = words.next().ok_or_else(|| IoError::SpecLine {
                    path: name.clone(),
                    line,
                    message: "effect directive needs a name".to_string(),
                })?;
                if !ERGM_NAMES.contains(&effect_name) && !SAOM_NAMES.contains(&effect_name) {
                    return Err(IoError::UnknownEffect {
                        path: name.clone(),
                        line,
                        name: effect_name.to_string(),
                    });
                }
                let mut parsed = ParsedEffect {
                    name: effect_name.to_string(),
                    attr: None,
                    level: None,
                    decay: None,
                    init: 0.0,
                    fixed: false,
                    line,
                };
                for word in words {
                    let (key, value) = split_kv(&name, line, word)?;
                    match key {
                        "attr" => parsed.attr = Some(value.to_string()),
                        "level" => parsed.level = Some(value.to_string()),
                        "decay" => parsed.decay = Some(parse_float(&name, line, "decay", value)?),
                        "init" => parsed.init = parse_float(&name, line, "init", value)?,
                        "fix" => {
                            parsed.init = parse_float(&name, line, "fix", value)?;
                            parsed.fixed = true;
                        }
                        other => {
                            return Err(IoError::SpecLine {
                                path: name.clone(),
                                line,
                                message: format!("unknown key '{other}'"),
                            })
                        }
                    }
                }
                effects.push(parsed);
            }
            Some("rate") => {
                let period = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .filter(|&p| p >= 1)
                    .ok_or_else(|| IoError::SpecLine {
                        path: name.clone(),
                        line,
                        message: "rate directive needs a period number from 1".to_string(),
                    })?;
                let mut init = None;
                for word in words {
                    let (key, value) = split_kv(&name, line, word)?;
                    if key != "init" {
                        return Err(IoError::SpecLine {
                            path: name.clone(),
                            line,
                            message: format!("unknown key '{key}' on a rate line"),
                        });
                    }
                    init = Some(parse_float(&name, line, "init", value)?);
                }
                let init = init.ok_or_else(|| IoError::SpecLine {
                    path: name.clone(),
                    line,
                    message: "rate directive needs init=<value>".to_string(),
                })?;
                if rates.iter().any(|&(_, p, _)| p == period) {
                    return Err(IoError::SpecLine {
                        path: name.clone(),
                        line,
                        message: format!("period {period} already has a rate"),
                    });
                }
                rates.push((line, period, init));
            }
            Some(other) => {
                return Err(IoError::SpecLine {
                    path: name.clone(),
                    line,
                    message: format!("unknown directive '{other}', expected effect or rate"),
                })
            }
            None => unreachable!("blank lines are skipped"),
        }
    }
    if effects.is_empty() {
        return Err(IoError::SpecFile {
            path: name,
            message: "no effect lines found".to_string(),
        });
    }
    Ok(ModelSpecFile { path: name, effects, rates })
}

fn split_kv<'a>(path: &str, line: usize, word: &'a str) -> Result<(&'a str, &'a str), IoError> {
    word.split_once('=').ok_or_else(|| IoError::SpecLine {
        path: path.to_string(),
        line,
        message: format!("expected key=value, got '{word}'"),
    })
}

fn parse_float(path: &str, line: usize, what: &'static str, text: &str) -> Result<f64, IoError> {
    text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| IoError::BadField {
        path: path.to_string(),
        line,
        what,
        text: text.to_string(),
    })
}

impl ModelSpecFile {
    fn need_attr(&self, e: &ParsedEffect) -> Result<String, IoError> {
        e.attr.clone().ok_or_else(|| IoError::SpecLine {
            path: self.path.clone(),
            line: e.line,
            message: format!("{} needs attr=<column>", e.name),
        })
    }

    fn reject_family(&self, e: &ParsedEffect, family: &str) -> IoError {
        IoError::SpecLine {
            path: self.path.clone(),
            line: e.line,
            message: format!("'{}' is not an {family} effect", e.name),
        }
    }

    /// Builds the cross-sectional spec plus a per-effect fixed mask.
    pub fn to_ergm_spec(&self) -> Result<(ErgmSpec, Vec<bool>), IoError> {
        let mut effects = Vec::with_capacity(self.effects.len());
        let mut params = Vec::with_capacity(self.effects.len());
        let mut fixed = Vec::with_capacity(self.effects.len());
        for e in &self.effects {
            let effect = match e.name.as_str() {
                "edges" => ErgmEffect::Edges,
                "triangles" => ErgmEffect::Triangles,
                "gwdegree" | "gwesp" => {
                    let decay = e.decay.ok_or_else(|| IoError::SpecLine {
                        path: self.path.clone(),
                        line: e.line,
                        message: format!("{} needs decay=<value>", e.name),
                    })?;
                    if e.name == "gwdegree" {
                        ErgmEffect::Gwdegree { decay }
                    } else {
                        ErgmEffect::Gwesp { decay }
                    }
                }
                "nodefactor" => {
                    let level = e.level.clone().ok_or_else(|| IoError::SpecLine {
                        path: self.path.clone(),
                        line: e.line,
                        message: "nodefactor needs level=<value>".to_string(),
                    })?;
                    ErgmEffect::NodeFactor { attr: self.need_attr(e)?, level }
                }
                "nodematch" => ErgmEffect::NodeMatch { attr: self.need_attr(e)? },
                _ => return Err(self.reject_family(e, "ERGM")),
            };
            effects.push(effect);
            params.push(e.init);
            fixed.push(e.fixed);
        }
        if !self.rates.is_empty() {
            return Err(IoError::SpecFile {
                path: self.path.clone(),
                message: "rate lines have no meaning in a cross-sectional model".to_string(),
            });
        }
        Ok((ErgmSpec::new(effects, params)?, fixed))
    }

    /// Builds the longitudinal spec plus a per-effect fixed mask. Rate
    /// lines, when given, must cover 1..=`periods` exactly; without them
    /// the fitter picks starting rates from the observed change.
    pub fn to_saom_spec(&self, periods: usize) -> Result<(SaomSpec, Vec<bool>), IoError> {
        let mut effects = Vec::with_capacity(self.effects.len());
        let mut params = Vec::with_capacity(self.effects.len());
        let mut fixed = Vec::with_capacity(self.effects.len());
        for e in &self.effects {
            let effect = match e.name.as_str() {
                "density" => SaomEffectKind::Density,
                "transTriad" => SaomEffectKind::TransTriad,
                "inPop" => SaomEffectKind::InPop,
                "egoPlusAltX" => SaomEffectKind::EgoPlusAltX { attr: self.need_attr(e)? },
                "sameX" => SaomEffectKind::SameX { attr: self.need_attr(e)? },
                _ => return Err(self.reject_family(e, "SAOM")),
            };
            effects.push(effect);
            params.push(e.init);
            fixed.push(e.fixed);
        }
        let rates = if self.rates.is_empty() {
            Vec::new()
        } else {
            let mut rates = vec![f64::NAN; periods];
            for &(line, period, init) in &self.rates {
                if period > periods {
                    return Err(IoError::WaveRange {
                        path: self.path.clone(),
                        line,
                        wave: period,
                        waves: periods,
                    });
                }
                rates[period - 1] = init;
            }
            if let Some(missing) = rates.iter().position(|r| r.is_nan()) {
                return Err(IoError::SpecFile {
                    path: self.path.clone(),
                    message: format!(
                        "rate lines must cover every period or none; period {} is missing",
                        missing + 1
                    ),
                });
            }
            rates
        };
        Ok((SaomSpec::new(effects, params, rates)?, fixed))
    }
}
