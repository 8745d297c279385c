//! Loading user-supplied cohorts of correlation matrices.

use std::path::Path;

use gmdmr_core::CorrelationMatrix;

use crate::csvio::{csv_files_in, read_matrix, FormatError};

/// Reads every `*.csv` in `dir` (lexicographic order) as a correlation matrix.
///
/// Files that fail to parse, are not unit-diagonal, or are not positive
/// definite are rejected with the filename in the error. All matrices must
/// share one dimension.
pub fn load_cohort(dir: &Path) -> Result<Vec<CorrelationMatrix>, FormatError> {
    let files = csv_files_in(dir)?;
    if files.is_empty() {
        return Err(FormatError::invalid(dir, gmdmr_core::Error::EmptyInput));
    }
    let mut out: Vec<CorrelationMatrix> = Vec::with_capacity(files.len());
    for path in &files {
        let m = read_matrix(path)?;
        let c = CorrelationMatrix::from_matrix(m).map_err(|e| FormatError::invalid(path, e))?;
        if let Some(first) = out.first() {
            if first.dim() != c.dim() {
                return Err(FormatError::invalid(
                    path,
                    gmdmr_core::Error::DimensionMismatch {
                        expected: first.dim(),
                        found: c.dim(),
                    },
                ));
            }
        }
        out.push(c);
    }
    Ok(out)
}
