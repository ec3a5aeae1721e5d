//! Incremental incorporation of new samples into cached query evaluations.
//!
//! Each cached query keeps its bandwidth frozen from its first evaluation
//! together with the running normalization and weighted value sums. New
//! samples only contribute their own kernel weights:
//!
//! ```text
//! g_new = (g_prev · Nm_k + Σ_new w_i g(x_i)) / Nm_{k+m}
//! ```
//!
//! Old weights are retained, so the normalization floor established at first
//! evaluation still holds after any number of updates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::extender::{BandwidthChoice, ExtenderModel, KernelSums, SampleValues, COINCIDENCE_TOL};
use crate::matrix::{sq_dist, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum EntryState {
    Exact { index: usize, value: Vec<f64> },
    Kernel { epsilon: f64, sums: KernelSums },
}

/// Cached evaluation of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub(crate) query_coord: Vec<f64>,
    pub(crate) state: EntryState,
    pub(crate) k_seen: usize,
}

impl CacheEntry {
    pub fn query_coord(&self) -> &[f64] {
        &self.query_coord
    }

    /// Frozen bandwidth; `None` when the query sits on a training sample.
    pub fn epsilon(&self) -> Option<f64> {
        match &self.state {
            EntryState::Kernel { epsilon, .. } => Some(*epsilon),
            EntryState::Exact { .. } => None,
        }
    }

    /// Accumulated normalization `Σ w_i`.
    pub fn nm(&self) -> Option<f64> {
        match &self.state {
            EntryState::Kernel { sums, .. } => Some(sums.nm()),
            EntryState::Exact { .. } => None,
        }
    }

    /// Accumulated `Σ w_i g(x_i)`, one entry per value component.
    pub fn weighted_sum(&self) -> Option<Vec<f64>> {
        match &self.state {
            EntryState::Kernel { sums, .. } => {
                let scale = (-sums.shift).exp();
                Some(sums.weighted.iter().map(|w| scale * w).collect())
            }
            EntryState::Exact { .. } => None,
        }
    }

    /// Index of the coincident training sample, if any.
    pub fn exact_sample(&self) -> Option<usize> {
        match &self.state {
            EntryState::Exact { index, .. } => Some(*index),
            EntryState::Kernel { .. } => None,
        }
    }

    /// Number of samples folded into this entry.
    pub fn k_seen(&self) -> usize {
        self.k_seen
    }

    pub fn value(&self) -> Vec<f64> {
        match &self.state {
            EntryState::Exact { value, .. } => value.clone(),
            EntryState::Kernel { sums, .. } => sums.ratio(),
        }
    }
}

/// Per-query evaluation state keyed by caller-chosen identifiers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationCache {
    pub(crate) entries: BTreeMap<String, CacheEntry>,
    pub(crate) kernel_evals: u64,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CacheEntry> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CacheEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn remove(&mut self, id: &str) -> Option<CacheEntry> {
        self.entries.remove(id)
    }

    /// Kernel evaluations performed through this cache since creation.
    pub fn kernel_evaluations(&self) -> u64 {
        self.kernel_evals
    }

    pub(crate) fn insert_raw(&mut self, id: String, entry: CacheEntry) {
        self.entries.insert(id, entry);
    }
}

/// Returns the extension at `query`, computing and caching it on first sight.
///
/// A cold evaluation is bitwise identical to [`ExtenderModel::extend`]. Later
/// calls read the cached sums; an entry that predates samples added outside
/// [`update`] is brought up to date with just those samples.
pub fn evaluate_cached(
    model: &ExtenderModel,
    cache: &mut EvaluationCache,
    id: &str,
    query: &[f64],
) -> Result<Vec<f64>> {
    if model.is_empty() {
        return Err(Error::EmptyInput("extender model has no samples"));
    }
    let mut weights = Vec::new();
    if let Some(entry) = cache.entries.get_mut(id) {
        if entry.k_seen < model.len() {
            let fresh = entry.k_seen..model.len();
            cache.kernel_evals += fold_samples(model, entry, fresh, &mut weights);
        }
        return Ok(entry.value());
    }

    let coord = model.project_query(query)?;
    let state = match model.adaptive_epsilon(&coord)? {
        BandwidthChoice::ExactSample(index) => EntryState::Exact {
            index,
            value: model.values().value(index),
        },
        BandwidthChoice::Adaptive {
            epsilon,
            nearest_sq,
        } => {
            let eps2 = epsilon.value() * epsilon.value();
            let sums = KernelSums::accumulate(
                model,
                0..model.len(),
                &coord,
                eps2,
                nearest_sq / eps2,
                &mut weights,
            );
            cache.kernel_evals += model.len() as u64;
            EntryState::Kernel {
                epsilon: epsilon.value(),
                sums,
            }
        }
    };
    let entry = CacheEntry {
        query_coord: coord,
        state,
        k_seen: model.len(),
    };
    let value = entry.value();
    cache.entries.insert(id.to_owned(), entry);
    Ok(value)
}

/// Folds samples `range` into one entry; returns the number of kernel evaluations.
fn fold_samples(
    model: &ExtenderModel,
    entry: &mut CacheEntry,
    range: std::ops::Range<usize>,
    weights: &mut Vec<f64>,
) -> u64 {
    let count = range.len() as u64;
    if let EntryState::Kernel { epsilon, sums } = &mut entry.state {
        let hit = range.clone().find(|&i| {
            sq_dist(&entry.query_coord, model.train_coords().point(i)).sqrt() <= COINCIDENCE_TOL
        });
        match hit {
            Some(index) => {
                entry.state = EntryState::Exact {
                    index,
                    value: model.values().value(index),
                };
            }
            None => {
                let eps2 = *epsilon * *epsilon;
                sums.add(model, range.clone(), &entry.query_coord, eps2, weights);
            }
        }
    }
    entry.k_seen = range.end;
    count
}

/// Counts reported by [`update`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub new_samples: usize,
    pub entries_updated: usize,
    pub entries_now_exact: usize,
    pub kernel_evaluations: u64,
}

/// Appends samples to the model (projected with its existing basis) and
/// folds them into every cached entry with that entry's frozen bandwidth.
pub fn update(
    model: &mut ExtenderModel,
    cache: &mut EvaluationCache,
    new_points: &PointCloud,
    new_values: &SampleValues,
) -> Result<UpdateStats> {
    if new_points.is_empty() && new_values.is_empty() {
        return Ok(UpdateStats::default());
    }
    let range = model.append_samples(new_points, new_values)?;
    let mut stats = UpdateStats {
        new_samples: range.len(),
        ..UpdateStats::default()
    };
    let mut weights = Vec::with_capacity(range.len());
    for entry in cache.entries.values_mut() {
        let was_exact = entry.exact_sample().is_some();
        let from = entry.k_seen.min(range.start);
        let evals = fold_samples(model, entry, from..range.end, &mut weights);
        if !was_exact {
            stats.kernel_evaluations += evals;
            stats.entries_updated += 1;
            if entry.exact_sample().is_some() {
                stats.entries_now_exact += 1;
            }
        }
    }
    cache.kernel_evals += stats.kernel_evaluations;
    Ok(stats)
}
