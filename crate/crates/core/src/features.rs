//! Static-analysis inputs and the feature vector fed to both the energy
//! model and the reliability model.
//!
//! Feature layout is fixed per deployment:
//! `[normalized API-call frequencies (d_api) | complexity metrics (d_cx) | OOV mass (1)]`.
//! Frequencies are normalized by the total call count, so the API block plus
//! the out-of-vocabulary mass sums to exactly 1 whenever the app makes any
//! call at all.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Ordered list of known API-call identifiers. Index order is the feature
/// index order and must stay fixed for the lifetime of a deployment.
/// Calls outside the vocabulary fall into an implicit OOV bucket.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "VocabularyWire", into = "VocabularyWire")]
pub struct ApiVocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyWire {
    entries: Vec<String>,
}

impl TryFrom<VocabularyWire> for ApiVocabulary {
    type Error = String;
    fn try_from(wire: VocabularyWire) -> Result<Self, String> {
        ApiVocabulary::new(wire.entries).map_err(|e| e.to_string())
    }
}

impl From<ApiVocabulary> for VocabularyWire {
    fn from(v: ApiVocabulary) -> Self {
        VocabularyWire { entries: v.entries }
    }
}

impl ApiVocabulary {
    pub fn new(entries: Vec<String>) -> Result<Self, ValidationError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, id) in entries.iter().enumerate() {
            if id.is_empty() {
                return Err(ValidationError::new(
                    format!("entries[{i}]"),
                    "identifier must be non-empty",
                ));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(ValidationError::new(
                    format!("entries[{i}]"),
                    format!("duplicate identifier {id:?}"),
                ));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// One instrumented test case of an app's measurement suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    pub nominal_duration_s: f64,
}

/// The developer-supplied package, reduced to its static-analysis summary:
/// API-call counts, complexity metrics and the test suite to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppManifest {
    pub app_id: String,
    /// API identifier -> call count. BTreeMap so serialization and
    /// iteration order are stable.
    pub api_calls: BTreeMap<String, u64>,
    /// Complexity metric name -> value (e.g. method_count, cyclomatic_mean).
    pub complexity: BTreeMap<String, f64>,
    pub tests: Vec<TestCase>,
}

impl AppManifest {
    /// Total nominal duration of the whole suite, in seconds.
    pub fn suite_duration_s(&self) -> f64 {
        self.tests.iter().map(|t| t.nominal_duration_s).sum()
    }

    /// Validates the manifest invariants, reporting the first offending
    /// field by path.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.app_id.is_empty() {
            return Err(ValidationError::new("app_id", "must be non-empty"));
        }
        for (name, value) in &self.complexity {
            if !value.is_finite() {
                return Err(ValidationError::new(
                    format!("complexity.{name}"),
                    "must be finite",
                ));
            }
        }
        if self.tests.is_empty() {
            return Err(ValidationError::new("tests", "at least one test required"));
        }
        for (i, test) in self.tests.iter().enumerate() {
            if test.test_id.is_empty() {
                return Err(ValidationError::new(
                    format!("tests[{i}].test_id"),
                    "must be non-empty",
                ));
            }
            if !(test.nominal_duration_s > 0.0) || !test.nominal_duration_s.is_finite() {
                return Err(ValidationError::new(
                    format!("tests[{i}].nominal_duration_s"),
                    "must be a positive finite number",
                ));
            }
        }
        Ok(())
    }
}

/// Where a measurement request is meant to run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionContext {
    pub device_model: String,
    #[serde(default)]
    pub os_version: String,
    #[serde(default)]
    pub api_level: i32,
    #[serde(default)]
    pub framework: String,
}

impl ExecutionContext {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.device_model.is_empty() {
            return Err(ValidationError::new("device_model", "must be non-empty"));
        }
        Ok(())
    }
}

/// Dense feature vector over a fixed layout. Extraction is deterministic:
/// the same manifest always yields a bit-identical vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Bundles the vocabulary and the complexity-metric order that together fix
/// the feature layout for a deployment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub vocab: ApiVocabulary,
    pub cx_names: Vec<String>,
}

impl FeatureSpace {
    pub fn new(vocab: ApiVocabulary, cx_names: Vec<String>) -> Self {
        Self { vocab, cx_names }
    }

    /// Total feature dimension: API block + complexity block + OOV mass.
    pub fn dim(&self) -> usize {
        self.vocab.len() + self.cx_names.len() + 1
    }

    /// Index of the OOV-mass entry (always the last one).
    pub fn oov_index(&self) -> usize {
        self.dim() - 1
    }

    pub fn extract(&self, manifest: &AppManifest) -> FeatureVector {
        extract_features(manifest, &self.vocab, &self.cx_names)
    }
}

/// Turns a manifest into the fixed-layout feature vector.
///
/// API frequencies are call counts divided by the total call count; calls
/// not in the vocabulary contribute to the OOV mass instead. An app with no
/// calls at all gets an all-zero API block and zero OOV mass. Complexity
/// metrics are copied through unnormalized in `cx_names` order; missing
/// metrics default to 0.
pub fn extract_features(
    manifest: &AppManifest,
    vocab: &ApiVocabulary,
    cx_names: &[String],
) -> FeatureVector {
    let d_api = vocab.len();
    let mut values = vec![0.0; d_api + cx_names.len() + 1];

    let total_calls: u64 = manifest.api_calls.values().sum();
    if total_calls > 0 {
        let total = total_calls as f64;
        let mut oov_calls: u64 = 0;
        for (id, &count) in &manifest.api_calls {
            match vocab.index_of(id) {
                Some(i) => values[i] = count as f64 / total,
                None => oov_calls += count,
            }
        }
        values[d_api + cx_names.len()] = oov_calls as f64 / total;
    }

    for (j, name) in cx_names.iter().enumerate() {
        values[d_api + j] = manifest.complexity.get(name).copied().unwrap_or(0.0);
    }

    FeatureVector::new(values)
}
