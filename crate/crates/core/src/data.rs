//! Tabular input: per-cell value inference, CSV loading, example splitting and
//! cross-validation folds.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token that stands for a missing cell, both on input and in emitted rules.
pub const MISSING_TOKEN: &str = "?";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file is empty, a header row is required")]
    MissingHeader { path: PathBuf },
    #[error("{path}: header has no column named `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: header column {index} is empty")]
    EmptyColumnName { path: PathBuf, index: usize },
    #[error("{path}: duplicate header column `{column}`")]
    DuplicateColumn { path: PathBuf, column: String },
    #[error("{path}: line {line} has {found} fields, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("fold count {k} out of range for {n} examples (need 2 <= k <= n)")]
    FoldCount { k: usize, n: usize },
    #[error("record has {found} values, schema expects {expected}")]
    Arity { expected: usize, found: usize },
}

/// A single cell.
///
/// Numeric payloads are always finite and `-0.0` is folded into `0.0`, so
/// equality, hashing and ordering are total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Numeric(f64),
    Categorical(String),
    Missing,
}

impl Value {
    /// Builds a numeric value, rejecting NaN and infinities.
    pub fn numeric(x: f64) -> Option<Value> {
        if x.is_finite() {
            Some(Value::Numeric(if x == 0.0 { 0.0 } else { x }))
        } else {
            None
        }
    }

    pub fn categorical(token: impl Into<String>) -> Value {
        Value::Categorical(token.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Numeric(x) => Some(*x),
            _ => None,
        }
    }

    /// The token used for `=`/`≠` comparisons; `None` for numbers.
    pub fn token(&self) -> Option<&str> {
        match self {
            Value::Categorical(s) => Some(s),
            Value::Missing => Some(MISSING_TOKEN),
            Value::Numeric(_) => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Numeric(_))
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Numeric(_) => 0,
            Value::Categorical(_) => 1,
            Value::Missing => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Numeric(a), Value::Numeric(b)) => a.total_cmp(b),
            (Value::Categorical(a), Value::Categorical(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Numeric(x) => x.to_bits().hash(state),
            Value::Categorical(s) => s.hash(state),
            Value::Missing => {}
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Numeric(x) => f.write_str(&format_number(*x)),
            Value::Categorical(s) => f.write_str(s),
            Value::Missing => f.write_str(MISSING_TOKEN),
        }
    }
}

/// Shortest round-trip decimal with at least one fractional digit (`16.0`, `23.25`).
pub fn format_number(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Classifies one raw CSV cell.
pub fn infer_value(token: &str) -> Value {
    let token = token.trim();
    if token.is_empty() || token == MISSING_TOKEN {
        return Value::Missing;
    }
    if looks_numeric(token) {
        if let Some(v) = token.parse::<f64>().ok().and_then(Value::numeric) {
            return v;
        }
    }
    Value::Categorical(token.to_string())
}

// `f64::from_str` also accepts "inf", "NaN" and "infinity"; only plain
// decimal literals (optional sign, digits, dot, exponent) count as numbers.
fn looks_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    body.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        && body
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub positive_value: String,
}

impl Schema {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: usize,
    pub values: Vec<Value>,
    pub label: bool,
}

/// An immutable set of labelled examples sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(schema: Schema, examples: Vec<Example>) -> Result<Dataset, DataError> {
        let expected = schema.feature_count();
        if let Some(bad) = examples.iter().find(|e| e.values.len() != expected) {
            return Err(DataError::Arity {
                expected,
                found: bad.values.len(),
            });
        }
        Ok(Dataset { schema, examples })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn subset(&self, ids: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            examples: ids.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// Unlabelled rows read from a CSV file, aligned to `feature_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Raw target cells when the file carried the target column.
    pub targets: Option<Vec<String>>,
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<Option<RawTable>, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(None);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes.as_slice());
    let csv_err = |source: csv::Error| match source.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => DataError::RaggedRow {
            path: path.to_path_buf(),
            line: pos.as_ref().map_or(0, |p| p.line()),
            expected: *expected_len as usize,
            found: *len as usize,
        },
        _ => DataError::Csv {
            path: path.to_path_buf(),
            source,
        },
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for (index, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(DataError::EmptyColumnName {
                path: path.to_path_buf(),
                index,
            });
        }
        if header[..index].contains(name) {
            return Err(DataError::DuplicateColumn {
                path: path.to_path_buf(),
                column: name.clone(),
            });
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Some(RawTable { header, rows }))
}

/// Loads a labelled dataset. Every column except `target_name` becomes a
/// feature; a row is positive when its target cell equals `positive_value`.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_name: &str,
    positive_value: &str,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let raw = read_raw(path)?.ok_or_else(|| DataError::MissingHeader {
        path: path.to_path_buf(),
    })?;
    let target_col = raw
        .header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| DataError::MissingColumn {
            path: path.to_path_buf(),
            column: target_name.to_string(),
        })?;
    let feature_names = raw
        .header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let positive_value = positive_value.trim();
    let examples = raw
        .rows
        .into_iter()
        .enumerate()
        .map(|(id, row)| {
            let label = row[target_col].trim() == positive_value;
            let values = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != target_col)
                .map(|(_, cell)| infer_value(cell))
                .collect();
            Example { id, values, label }
        })
        .collect();
    let schema = Schema {
        feature_names,
        target_name: target_name.to_string(),
        positive_value: positive_value.to_string(),
    };
    Dataset::new(schema, examples)
}

/// Loads rows for prediction. The target column is dropped when present; an
/// empty file yields an empty table.
pub fn load_records(
    path: impl AsRef<Path>,
    target_name: Option<&str>,
) -> Result<RecordTable, DataError> {
    let path = path.as_ref();
    let Some(raw) = read_raw(path)? else {
        return Ok(RecordTable {
            feature_names: Vec::new(),
            rows: Vec::new(),
            targets: None,
        });
    };
    let target_col = target_name.and_then(|t| raw.header.iter().position(|h| h == t));
    let feature_names = raw
        .header
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let targets = target_col.map(|c| raw.rows.iter().map(|r| r[c].trim().to_string()).collect());
    let rows = raw
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|&(i, _)| Some(i) != target_col)
                .map(|(_, cell)| infer_value(cell))
                .collect()
        })
        .collect();
    Ok(RecordTable {
        feature_names,
        rows,
        targets,
    })
}

/// Partitions examples by label, preserving input order.
pub fn split_examples(d: &Dataset) -> (Vec<&Example>, Vec<&Example>) {
    d.examples().iter().partition(|e| e.label)
}

/// One cross-validation split.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Dataset,
    pub test: Dataset,
}

/// Shuffles example positions with `seed` and deals them into `k` test folds
/// whose sizes differ by at most one. Train and test keep dataset order.
pub fn make_folds(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    let n = d.len();
    if k < 2 || k > n {
        return Err(DataError::FoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold {
            train: d.subset(&train),
            test: d.subset(&test),
        });
        start += size;
    }
    Ok(folds)
}
