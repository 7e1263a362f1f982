use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EpochedRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// `max(1, round((1 - train_fraction) * n))`, never taking every subject.
pub fn test_subject_count(n_subjects: usize, train_fraction: f64) -> usize {
    let raw = ((1.0 - train_fraction) * n_subjects as f64).round() as usize;
    raw.max(1).min(n_subjects.saturating_sub(1))
}

/// Seeded partition of subject ids. The ids are sorted before shuffling so
/// the result does not depend on input order; both halves come back sorted.
pub fn split_subjects(ids: &[String], train_fraction: f64, seed: u64) -> Result<SubjectSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::Split("subject ids are not unique".into()));
    }
    if ids.len() < 2 {
        return Err(Error::Split(format!("need at least 2 subjects, got {}", ids.len())));
    }
    let mut order: Vec<String> = unique.into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = test_subject_count(order.len(), train_fraction);
    let mut test = order.split_off(order.len() - n_test);
    order.sort();
    test.sort();
    Ok(SubjectSplit { train: order, test })
}

/// Splits records by subject into `(train, test)`, preserving subject-sorted order.
pub fn split_by_subject(
    records: Vec<EpochedRecord>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<EpochedRecord>, Vec<EpochedRecord>)> {
    let ids: Vec<String> = records.iter().map(|r| r.subject_id().to_string()).collect();
    let split = split_subjects(&ids, train_fraction, seed)?;
    let test_ids: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
    let (mut test, mut train): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| test_ids.contains(r.subject_id()));
    train.sort_by(|a, b| a.subject_id().cmp(b.subject_id()));
    test.sort_by(|a, b| a.subject_id().cmp(b.subject_id()));
    Ok((train, test))
}
