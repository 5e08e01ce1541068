//! Synthetic app/test-suite population.
//!
//! Apps draw Zipf-skewed API calls either from the in-distribution part of
//! the vocabulary or, with probability `ood_fraction`, from the OOD API set.
//! The generator remembers which branch produced each app; that label is the
//! routing oracle for experiments and never reaches the manifest.

use std::collections::BTreeMap;

use emaas_core::{ApiVocabulary, AppManifest, TestCase};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppGeneratorParams {
    /// Zipf exponent for API-call frequency skew.
    pub zipf_s: f64,
    /// Total call count range, inclusive.
    pub calls_range: (u64, u64),
    /// Probability that an app draws its calls from the OOD API set.
    pub ood_fraction: f64,
    /// Single-test suite duration range, seconds.
    pub duration_range_s: (f64, f64),
}

impl Default for AppGeneratorParams {
    fn default() -> Self {
        Self {
            zipf_s: 1.1,
            calls_range: (50, 500),
            ood_fraction: 0.2,
            duration_range_s: (5.0, 60.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedApp {
    pub manifest: AppManifest,
    /// Whether the app drew its calls from the OOD API set.
    pub is_ood: bool,
}

#[derive(Debug, Clone)]
pub struct AppGenerator {
    in_distribution_ids: Vec<String>,
    ood_ids: Vec<String>,
    /// Complexity metric name and uniform value range, in layout order.
    cx_ranges: Vec<(String, (f64, f64))>,
    params: AppGeneratorParams,
    counter: u64,
}

impl AppGenerator {
    /// `ood_count` marks the trailing entries of the vocabulary as the OOD
    /// API set; in-distribution apps never draw from it.
    pub fn new(
        vocab: &ApiVocabulary,
        ood_count: usize,
        cx_ranges: Vec<(String, (f64, f64))>,
        params: AppGeneratorParams,
    ) -> Self {
        let split = vocab.len() - ood_count;
        Self {
            in_distribution_ids: vocab.entries()[..split].to_vec(),
            ood_ids: vocab.entries()[split..].to_vec(),
            cx_ranges,
            params,
            counter: 0,
        }
    }

    pub fn generate(&mut self, rng: &mut ChaCha8Rng) -> GeneratedApp {
        self.counter += 1;
        let is_ood = self.params.ood_fraction > 0.0 && rng.random_bool(self.params.ood_fraction);
        let pool = if is_ood {
            &self.ood_ids
        } else {
            &self.in_distribution_ids
        };

        let (lo, hi) = self.params.calls_range;
        let total_calls = rng.random_range(lo..=hi);
        let zipf = Zipf::new(pool.len() as f64, self.params.zipf_s).expect("valid zipf");
        let mut api_calls: BTreeMap<String, u64> = BTreeMap::new();
        for _ in 0..total_calls {
            let rank = zipf.sample(rng) as usize - 1;
            *api_calls.entry(pool[rank].clone()).or_insert(0) += 1;
        }

        let mut complexity = BTreeMap::new();
        for (name, (lo, hi)) in &self.cx_ranges {
            complexity.insert(name.clone(), rng.random_range(*lo..*hi));
        }

        let (dlo, dhi) = self.params.duration_range_s;
        let manifest = AppManifest {
            app_id: format!("app-{:06}", self.counter),
            api_calls,
            complexity,
            tests: vec![TestCase {
                test_id: "suite".into(),
                nominal_duration_s: rng.random_range(dlo..dhi),
            }],
        };
        GeneratedApp { manifest, is_ood }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn vocab(n: usize) -> ApiVocabulary {
        ApiVocabulary::new((0..n).map(|i| format!("api.{i:02}")).collect()).unwrap()
    }

    fn generator(ood_fraction: f64) -> AppGenerator {
        AppGenerator::new(
            &vocab(8),
            3,
            vec![("method_count".into(), (50.0, 500.0))],
            AppGeneratorParams {
                ood_fraction,
                calls_range: (10, 40),
                ..AppGeneratorParams::default()
            },
        )
    }

    #[test]
    fn zero_ood_fraction_never_touches_the_ood_set() {
        let mut generated = generator(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let app = generated.generate(&mut rng);
            assert!(!app.is_ood);
            for id in app.manifest.api_calls.keys() {
                let idx: usize = id[4..].parse().unwrap();
                assert!(idx < 5, "in-distribution app used OOD call {id}");
            }
        }
    }

    #[test]
    fn full_ood_fraction_only_draws_from_the_ood_set() {
        let mut generated = generator(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let app = generated.generate(&mut rng);
            assert!(app.is_ood);
            for id in app.manifest.api_calls.keys() {
                let idx: usize = id[4..].parse().unwrap();
                assert!(idx >= 5, "OOD app used in-distribution call {id}");
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_same_manifest_sequence() {
        let run = |seed| {
            let mut generated = generator(0.3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| generated.generate(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn manifests_are_valid_and_durations_in_range() {
        let mut generated = generator(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let app = generated.generate(&mut rng);
            app.manifest.validate().unwrap();
            let d = app.manifest.tests[0].nominal_duration_s;
            assert!((5.0..60.0).contains(&d));
            let total: u64 = app.manifest.api_calls.values().sum();
            assert!((10..=40).contains(&total));
        }
    }
}
