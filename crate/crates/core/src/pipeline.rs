//! Dataset -> labeled, split and encoded samples ready for the interest model.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, LabeledInteraction, Persona, RawDataset, Rating, Split, SplitOptions};
use crate::error::{Error, Result};
use crate::features::{EncodingSchema, FeatureVector, RowBuilder, ScaleRule};
use crate::model::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareOptions {
    /// Ratings at or above this value are positive.
    pub like_threshold: u8,
    pub train_fraction: f64,
    /// Share of the training split held out for early stopping.
    pub validation_fraction: f64,
    pub new_per_user: usize,
    pub scale_rule: ScaleRule,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            like_threshold: 4,
            train_fraction: 0.8,
            validation_fraction: 0.1,
            new_per_user: 300,
            scale_rule: ScaleRule::StdDev,
            seed: 0,
        }
    }
}

pub struct Prepared {
    pub ds: RawDataset,
    pub split: Split,
    /// Training interactions used for gradient steps (train minus validation).
    pub fit: Vec<LabeledInteraction>,
    pub validation: Vec<LabeledInteraction>,
    /// Computed from the `fit` ratings only.
    pub personas: BTreeMap<u32, Persona>,
    pub schema: EncodingSchema,
}

pub fn prepare(ds: RawDataset, opts: &PrepareOptions) -> Result<Prepared> {
    if !(opts.validation_fraction > 0.0 && opts.validation_fraction < 1.0) {
        return Err(Error::config("data.validation_fraction", "must be in (0,1)"));
    }
    let labels = dataset::label_interactions(&ds, opts.like_threshold)?;
    let split = dataset::split(
        &ds,
        &labels,
        &SplitOptions {
            train_fraction: opts.train_fraction,
            seed: opts.seed,
            new_per_user: opts.new_per_user,
        },
    )?;
    if split.train.len() < 2 || split.test.is_empty() {
        return Err(Error::Domain(format!(
            "dataset too small to split: {} train, {} test interactions",
            split.train.len(),
            split.test.len()
        )));
    }
    let n_val = ((split.train.len() as f64 * opts.validation_fraction).round() as usize)
        .clamp(1, split.train.len() - 1);
    let cut = split.train.len() - n_val;
    let fit = split.train[..cut].to_vec();
    let validation = split.train[cut..].to_vec();

    let fit_ratings = ratings_of(&ds, &fit);
    let personas = dataset::personas_from(&ds, &fit_ratings);
    let pairs: Vec<(u32, u32)> = fit.iter().map(|l| (l.user, l.item)).collect();
    let schema = RowBuilder::new(&ds, &personas).fit(&pairs, opts.scale_rule)?;
    Ok(Prepared {
        ds,
        split,
        fit,
        validation,
        personas,
        schema,
    })
}

/// The rating records behind `interactions`.
pub fn ratings_of(ds: &RawDataset, interactions: &[LabeledInteraction]) -> Vec<Rating> {
    let keep: HashSet<(u32, u32)> = interactions.iter().map(|l| (l.user, l.item)).collect();
    ds.ratings
        .iter()
        .filter(|r| keep.contains(&(r.user, r.item)))
        .copied()
        .collect()
}

impl Prepared {
    pub fn rows(&self) -> RowBuilder<'_> {
        RowBuilder::new(&self.ds, &self.personas)
    }

    pub fn encode(&self, user: u32, item: u32) -> Result<FeatureVector> {
        self.rows().encode(&self.schema, user, item)
    }

    pub fn encode_pairs(&self, pairs: &[(u32, u32)]) -> Result<Vec<FeatureVector>> {
        pairs.par_iter().map(|&(u, m)| self.encode(u, m)).collect()
    }

    pub fn samples(&self, interactions: &[LabeledInteraction]) -> Result<Vec<Sample>> {
        interactions
            .par_iter()
            .map(|l| {
                Ok(Sample {
                    x: self.encode(l.user, l.item)?,
                    label: f64::from(l.label),
                })
            })
            .collect()
    }

    /// Number of training interactions (fit + validation) per item.
    pub fn train_popularity(&self) -> HashMap<u32, usize> {
        let mut counts = HashMap::new();
        for l in &self.split.train {
            *counts.entry(l.item).or_insert(0) += 1;
        }
        counts
    }
}
