//! Node covariates: categorical columns over a declared level set and
//! numeric columns with explicit missingness.
//!
//! Effects never read raw columns directly; they bind them first. Binding
//! resolves level names, mean-imputes missing numeric values and reports
//! what it imputed, so a model fitted on patchy size data says so instead
//! of silently shifting the covariate.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AttrError {
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {0:?} already defined")]
    DuplicateAttribute(String),
    #[error("attribute {attr:?} has {got} values for a roster of {expected}")]
    WrongArity { attr: String, expected: usize, got: usize },
    #[error("attribute {0:?} is not categorical")]
    NotCategorical(String),
    #[error("attribute {0:?} is not numeric")]
    NotNumeric(String),
    #[error("unknown level {level:?} for attribute {attr:?}")]
    UnknownLevel { attr: String, level: String },
    #[error("attribute {attr:?} refers to level index {index} but has {levels} levels")]
    LevelOutOfRange { attr: String, index: usize, levels: usize },
    #[error("attribute {0:?} has no observed values to impute from")]
    AllMissing(String),
    #[error("attribute {attr:?} has {levels} levels; a binary 0/1 reading needs exactly 2")]
    NotBinary { attr: String, levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariate {
    /// Values index into `levels`.
    Categorical { levels: Vec<String>, values: Vec<u32> },
    /// `None` marks a missing observation.
    Numeric { values: Vec<Option<f64>> },
}

/// Covariate table for one node roster (one snapshot in time).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeAttributes {
    n: usize,
    columns: Vec<(String, Covariate)>,
}

impl NodeAttributes {
    #[must_use]
    pub fn new(n: usize) -> Self {
        NodeAttributes { n, columns: Vec::new() }
    }

    #[must_use]
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(name, _)| name.as_str())
    }

    fn check_new(&self, name: &str, len: usize) -> Result<(), AttrError> {
        if self.columns.iter().any(|(c, _)| c == name) {
            return Err(AttrError::DuplicateAttribute(name.to_string()));
        }
        if len != self.n {
            return Err(AttrError::WrongArity {
                attr: name.to_string(),
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    pub fn add_categorical(
        &mut self,
        name: &str,
        levels: Vec<String>,
        values: Vec<u32>,
    ) -> Result<(), AttrError> {
        self.check_new(name, values.len())?;
        for &v in &values {
            if v as usize >= levels.len() {
                return Err(AttrError::LevelOutOfRange {
                    attr: name.to_string(),
                    index: v as usize,
                    levels: levels.len(),
                });
            }
        }
        self.columns.push((name.to_string(), Covariate::Categorical { levels, values }));
        Ok(())
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<(), AttrError> {
        self.check_new(name, values.len())?;
        self.columns.push((name.to_string(), Covariate::Numeric { values }));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Covariate, AttrError> {
        self.columns
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, v)| v)
            .ok_or_else(|| AttrError::UnknownAttribute(name.to_string()))
    }

    /// Per-node level indices plus the level table.
    pub fn categorical(&self, name: &str) -> Result<(&[String], &[u32]), AttrError> {
        match self.get(name)? {
            Covariate::Categorical { levels, values } => Ok((levels, values)),
            Covariate::Numeric { .. } => Err(AttrError::NotCategorical(name.to_string())),
        }
    }

    /// Resolves a level name to its index.
    pub fn level_index(&self, name: &str, level: &str) -> Result<u32, AttrError> {
        let (levels, _) = self.categorical(name)?;
        levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as u32)
            .ok_or_else(|| AttrError::UnknownLevel {
                attr: name.to_string(),
                level: level.to_string(),
            })
    }

    /// Numeric column with missing values replaced by the observed mean.
    /// Also accepts a two-level categorical column, read as 0/1 in level
    /// order. Returns the values and the number of imputed entries.
    pub fn numeric_imputed(&self, name: &str) -> Result<(Vec<f64>, usize), AttrError> {
        match self.get(name)? {
            Covariate::Numeric { values } => {
                let observed: Vec<f64> = values.iter().flatten().copied().collect();
                if observed.is_empty() {
                    return Err(AttrError::AllMissing(name.to_string()));
                }
                let mean = observed.iter().sum::<f64>() / observed.len() as f64;
                let imputed = values.iter().filter(|v| v.is_none()).count();
                Ok((values.iter().map(|v| v.unwrap_or(mean)).collect(), imputed))
            }
            Covariate::Categorical { levels, values } => {
                if levels.len() != 2 {
                    return Err(AttrError::NotBinary {
                        attr: name.to_string(),
                        levels: levels.len(),
                    });
                }
                Ok((values.iter().map(|&v| v as f64).collect(), 0))
            }
        }
    }

    /// Keys under which two nodes compare equal for homophily effects:
    /// level indices for categorical columns, value bits for numeric ones.
    pub fn equality_keys(&self, name: &str) -> Result<Vec<u64>, AttrError> {
        match self.get(name)? {
            Covariate::Categorical { values, .. } => {
                Ok(values.iter().map(|&v| v as u64).collect())
            }
            Covariate::Numeric { .. } => {
                let (vals, _) = self.numeric_imputed(name)?;
                Ok(vals.iter().map(|v| v.to_bits()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imputation_uses_observed_mean_and_counts() {
        let mut attrs = NodeAttributes::new(4);
        attrs
            .add_numeric("size", vec![Some(2.0), None, Some(4.0), None])
            .unwrap();
        let (vals, imputed) = attrs.numeric_imputed("size").unwrap();
        assert_eq!(vals, vec![2.0, 3.0, 4.0, 3.0]);
        assert_eq!(imputed, 2);
    }

    #[test]
    fn all_missing_is_an_error() {
        let mut attrs = NodeAttributes::new(2);
        attrs.add_numeric("size", vec![None, None]).unwrap();
        assert_eq!(
            attrs.numeric_imputed("size").unwrap_err(),
            AttrError::AllMissing("size".to_string())
        );
    }

    #[test]
    fn binary_categorical_reads_as_dummy() {
        let mut attrs = NodeAttributes::new(3);
        attrs
            .add_categorical("member", vec!["no".into(), "yes".into()], vec![1, 0, 1])
            .unwrap();
        let (vals, imputed) = attrs.numeric_imputed("member").unwrap();
        assert_eq!(vals, vec![1.0, 0.0, 1.0]);
        assert_eq!(imputed, 0);
        assert_eq!(attrs.level_index("member", "yes").unwrap(), 1);
        assert!(matches!(
            attrs.level_index("member", "maybe"),
            Err(AttrError::UnknownLevel { .. })
        ));
    }

    #[test]
    fn arity_and_duplicates_are_rejected() {
        let mut attrs = NodeAttributes::new(2);
        attrs.add_numeric("size", vec![Some(1.0), Some(2.0)]).unwrap();
        assert!(matches!(
            attrs.add_numeric("size", vec![Some(1.0), Some(2.0)]),
            Err(AttrError::DuplicateAttribute(_))
        ));
        assert!(matches!(
            attrs.add_numeric("other", vec![Some(1.0)]),
            Err(AttrError::WrongArity { .. })
        ));
    }
}
