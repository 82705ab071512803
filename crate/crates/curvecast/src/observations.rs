//! Replicated accuracy observations and their weighting.
//!
//! Observations arrive as CSV with a required header:
//!
//! ```text
//! size,accuracy[,class][,repetition]
//! ```
//!
//! `size` is the per-class training-set size (positive integer), `accuracy` a
//! percent in [0, 100]. The optional `class` column separates per-class
//! experiments; the optional `repetition` column only guards against
//! duplicate rows - replicate order is always file order.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("input contains a header but no observation rows")]
    Empty,
    #[error("group for size {size} has no replicates")]
    EmptyGroup { size: u64 },
    #[error("size must be a positive integer, got {0}")]
    NonPositiveSize(u64),
    #[error("accuracy {value} for size {size} is outside [0, 100]")]
    AccuracyOutOfRange { size: u64, value: f64 },
    #[error("duplicate size {size} within class {class:?}")]
    DuplicateSize { size: u64, class: Option<String> },
    #[error("{expected} sizes but {got} manual weights")]
    ManualWeightCount { expected: usize, got: usize },
    #[error("weight values must be positive and finite, got {0}")]
    BadWeight(f64),
    #[error("variance floor must be positive and finite, got {0}")]
    BadVarianceFloor(f64),
}

/// Replicated accuracy measurements at one training-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGroup {
    pub size: u64,
    pub replicates: Vec<f64>,
    pub class_label: Option<String>,
}

/// A collection of size groups, possibly spanning several classes.
///
/// Groups are kept sorted by (class label, size); replicate order inside a
/// group is preserved from the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    groups: Vec<SizeGroup>,
}

impl ObservationSet {
    pub fn new(mut groups: Vec<SizeGroup>) -> Result<Self, DataError> {
        if groups.is_empty() {
            return Err(DataError::Empty);
        }
        for group in &groups {
            if group.size == 0 {
                return Err(DataError::NonPositiveSize(group.size));
            }
            if group.replicates.is_empty() {
                return Err(DataError::EmptyGroup { size: group.size });
            }
            for &value in &group.replicates {
                if !value.is_finite() || !(0.0..=100.0).contains(&value) {
                    return Err(DataError::AccuracyOutOfRange {
                        size: group.size,
                        value,
                    });
                }
            }
        }
        groups.sort_by(|a, b| (&a.class_label, a.size).cmp(&(&b.class_label, b.size)));
        for pair in groups.windows(2) {
            if pair[0].class_label == pair[1].class_label && pair[0].size == pair[1].size {
                return Err(DataError::DuplicateSize {
                    size: pair[0].size,
                    class: pair[0].class_label.clone(),
                });
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[SizeGroup] {
        &self.groups
    }

    /// Distinct class labels, sorted; empty when no class column was present.
    pub fn classes(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self
            .groups
            .iter()
            .filter_map(|g| g.class_label.as_deref())
            .collect();
        labels.dedup();
        labels
    }

    pub fn has_classes(&self) -> bool {
        self.groups.iter().any(|g| g.class_label.is_some())
    }

    /// The observations of one class, without its label.
    pub fn select_class(&self, label: &str) -> Option<ObservationSet> {
        let groups: Vec<SizeGroup> = self
            .groups
            .iter()
            .filter(|g| g.class_label.as_deref() == Some(label))
            .map(|g| SizeGroup {
                size: g.size,
                replicates: g.replicates.clone(),
                class_label: None,
            })
            .collect();
        if groups.is_empty() {
            None
        } else {
            Some(ObservationSet { groups })
        }
    }

    /// Pooled view across classes: at each size, one pseudo-replicate per
    /// class holding that class's mean. Matches how an overall-accuracy row
    /// is assembled from per-class results. Without classes this is the data
    /// itself.
    pub fn average_total(&self) -> ObservationSet {
        if !self.has_classes() {
            return self.clone();
        }
        let groups = self
            .distinct_sizes()
            .into_iter()
            .map(|size| SizeGroup {
                size,
                replicates: self
                    .groups
                    .iter()
                    .filter(|g| g.size == size)
                    .map(|g| mean(&g.replicates))
                    .collect(),
                class_label: Some("AverageTotal".to_string()),
            })
            .collect();
        ObservationSet { groups }
    }

    pub fn distinct_sizes(&self) -> Vec<u64> {
        let mut sizes: Vec<u64> = self.groups.iter().map(|g| g.size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    /// Replicates at one size, pooled across classes in group order.
    fn pooled(&self, size: u64) -> impl Iterator<Item = f64> + '_ {
        self.groups
            .iter()
            .filter(move |g| g.size == size)
            .flat_map(|g| g.replicates.iter().copied())
    }

    /// One `(size, mean accuracy)` pair per distinct size, ascending.
    pub fn mean_pairs(&self) -> Vec<(f64, f64)> {
        self.distinct_sizes()
            .into_iter()
            .map(|size| {
                let values: Vec<f64> = self.pooled(size).collect();
                (size as f64, mean(&values))
            })
            .collect()
    }

    /// One `(size, accuracy)` pair per replicate; sizes ascending, replicate
    /// order preserved within a size.
    pub fn replicate_pairs(&self) -> Vec<(f64, f64)> {
        self.distinct_sizes()
            .into_iter()
            .flat_map(|size| self.pooled(size).map(move |t| (size as f64, t)))
            .collect()
    }

    /// Serializes back to the CSV schema. Parsing the output yields an equal
    /// `ObservationSet`.
    pub fn to_csv(&self) -> String {
        let with_class = self.has_classes();
        let mut out = String::from("size,accuracy");
        if with_class {
            out.push_str(",class");
        }
        out.push_str(",repetition\n");
        for group in &self.groups {
            for (index, value) in group.replicates.iter().enumerate() {
                write!(out, "{},{}", group.size, value).expect("string write");
                if with_class {
                    write!(out, ",{}", group.class_label.as_deref().unwrap_or(""))
                        .expect("string write");
                }
                writeln!(out, ",{}", index + 1).expect("string write");
            }
        }
        out
    }
}

/// Parses the CSV schema, reporting the offending line on failure.
pub fn parse_observations(text: &str) -> Result<ObservationSet, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| DataError::Row {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut size_col = None;
    let mut accuracy_col = None;
    let mut class_col = None;
    let mut repetition_col = None;
    for (index, name) in headers.iter().enumerate() {
        match name {
            "size" => size_col = Some(index),
            "accuracy" => accuracy_col = Some(index),
            "class" => class_col = Some(index),
            "repetition" => repetition_col = Some(index),
            other => return Err(DataError::UnknownColumn(other.to_string())),
        }
    }
    let size_col = size_col.ok_or_else(|| DataError::MissingColumn("size".into()))?;
    let accuracy_col = accuracy_col.ok_or_else(|| DataError::MissingColumn("accuracy".into()))?;

    // Accumulate replicates in file order, keyed by (class, size).
    let mut order: Vec<(Option<String>, u64)> = Vec::new();
    let mut buckets: std::collections::HashMap<(Option<String>, u64), Vec<f64>> =
        std::collections::HashMap::new();
    let mut seen_keys: HashSet<(Option<String>, u64, u64)> = HashSet::new();

    for record in reader.records() {
        let record = record.map_err(|e| DataError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| DataError::Row { line, message };

        let field = |col: usize| record.get(col).unwrap_or("");
        let size: u64 = field(size_col).parse().map_err(|_| {
            row_err(format!(
                "size `{}` is not a positive integer",
                field(size_col)
            ))
        })?;
        if size == 0 {
            return Err(row_err("size must be positive".into()));
        }
        let accuracy: f64 = field(accuracy_col).parse().map_err(|_| {
            row_err(format!(
                "accuracy `{}` is not a number",
                field(accuracy_col)
            ))
        })?;
        if !accuracy.is_finite() || !(0.0..=100.0).contains(&accuracy) {
            return Err(row_err(format!("accuracy {accuracy} is outside [0, 100]")));
        }
        let class = class_col
            .map(&field)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        if let Some(col) = repetition_col {
            let repetition: u64 = field(col).parse().map_err(|_| {
                row_err(format!(
                    "repetition `{}` is not a positive integer",
                    field(col)
                ))
            })?;
            if repetition == 0 {
                return Err(row_err("repetition must be positive".into()));
            }
            if !seen_keys.insert((class.clone(), size, repetition)) {
                return Err(row_err(format!(
                    "duplicate observation for class {class:?}, size {size}, repetition {repetition}"
                )));
            }
        }

        let key = (class, size);
        match buckets.get_mut(&key) {
            Some(replicates) => replicates.push(accuracy),
            None => {
                buckets.insert(key.clone(), vec![accuracy]);
                order.push(key);
            }
        }
    }

    let groups = order
        .into_iter()
        .map(|key| {
            let replicates = buckets.remove(&key).expect("bucket exists");
            SizeGroup {
                class_label: key.0,
                size: key.1,
                replicates,
            }
        })
        .collect();
    ObservationSet::new(groups)
}

/// One row of the aggregate view: per-size summary across replicates and
/// classes.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub size: u64,
    /// Mean accuracy per class, classes sorted by label.
    pub class_means: Vec<(Option<String>, f64)>,
    /// Unweighted arithmetic mean of the per-class means.
    pub overall_mean: f64,
    /// Sample standard deviation (n-1) of all replicates at this size; zero
    /// for a single replicate.
    pub std_dev: f64,
    pub replicate_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

pub fn aggregate(obs: &ObservationSet) -> AggregateTable {
    let rows = obs
        .distinct_sizes()
        .into_iter()
        .map(|size| {
            let class_means: Vec<(Option<String>, f64)> = obs
                .groups()
                .iter()
                .filter(|g| g.size == size)
                .map(|g| (g.class_label.clone(), mean(&g.replicates)))
                .collect();
            let overall_mean = mean(&class_means.iter().map(|&(_, m)| m).collect::<Vec<f64>>());
            let pooled: Vec<f64> = obs.pooled(size).collect();
            AggregateRow {
                size,
                overall_mean,
                std_dev: sample_std(&pooled),
                replicate_count: pooled.len(),
                class_means,
            }
        })
        .collect();
    AggregateTable { rows }
}

/// How to weight each size when fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Uniform,
    /// One weight per size, bound in ascending-size order.
    Manual(Vec<f64>),
    /// `w = 1 / max(sample variance, floor)` per size.
    InverseVariance {
        floor: f64,
    },
}

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-4;

impl WeightScheme {
    pub fn inverse_variance() -> Self {
        WeightScheme::InverseVariance {
            floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

/// The diagonal of the weight matrix. Values are always positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DataError> {
        for &value in &values {
            if !value.is_finite() || value <= 0.0 {
                return Err(DataError::BadWeight(value));
            }
        }
        Ok(Self(values))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Turns a scheme into concrete weights for `obs`, one per size (ascending),
/// or one per replicate when `per_replicate` is set. Returns any warnings
/// raised along the way (currently only the single-replicate variance-floor
/// fallback).
pub fn materialize_weights(
    obs: &ObservationSet,
    scheme: &WeightScheme,
    per_replicate: bool,
) -> Result<(WeightVector, Vec<String>), DataError> {
    let sizes = obs.distinct_sizes();
    let mut warnings = Vec::new();
    let per_size: Vec<f64> = match scheme {
        WeightScheme::Uniform => vec![1.0; sizes.len()],
        WeightScheme::Manual(values) => {
            if values.len() != sizes.len() {
                return Err(DataError::ManualWeightCount {
                    expected: sizes.len(),
                    got: values.len(),
                });
            }
            values.clone()
        }
        WeightScheme::InverseVariance { floor } => {
            if !floor.is_finite() || *floor <= 0.0 {
                return Err(DataError::BadVarianceFloor(*floor));
            }
            sizes
                .iter()
                .map(|&size| {
                    let values: Vec<f64> = obs.pooled(size).collect();
                    if values.len() < 2 {
                        warnings.push(format!(
                            "size {size}: single replicate, falling back to variance floor {floor}"
                        ));
                        return 1.0 / floor;
                    }
                    let s2 = sample_std(&values).powi(2);
                    1.0 / s2.max(*floor)
                })
                .collect()
        }
    };

    let values = if per_replicate {
        sizes
            .iter()
            .zip(&per_size)
            .flat_map(|(&size, &w)| obs.pooled(size).map(move |_| w))
            .collect()
    } else {
        per_size
    };
    Ok((WeightVector::new(values)?, warnings))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the n-1 denominator; zero for n <= 1.
fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
