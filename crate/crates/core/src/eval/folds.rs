use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of every instance to one of `k` test folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Ascending indices of the instances held out in `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Ascending indices of every instance outside `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignments.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

pub(crate) fn members_by_class(indices: &[usize], labels: &[usize]) -> Vec<Vec<usize>> {
    let c = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut by_class = vec![Vec::new(); c];
    indices.iter().for_each(|&i| by_class[labels[i]].push(i));
    by_class
}

/// Shuffles each class with `seed`, then deals its members to folds in turn.
/// The dealing position carries over from one class to the next, so overall
/// fold sizes also differ by at most one. With `strict`, every class must
/// have at least `k` members.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64, strict: bool) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {n} instances")));
    }
    let all: Vec<usize> = (0..n).collect();
    let by_class = members_by_class(&all, labels);
    if strict {
        if let Some((class, m)) = by_class.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                count: m.len(),
                required: k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; n];
    let mut next = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Split of a training fold into fitting and validation nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Carve {
    pub fit: Vec<usize>,
    pub val: Vec<usize>,
    /// Set when no class could spare a validation node under the stratified
    /// rule and the split was drawn at random instead.
    pub fallback: bool,
}

/// Per class, `round(fraction·count)` members (at most `count − 1`) go to
/// validation. If that leaves validation empty, validation nodes are drawn at
/// random among classes that can spare one. Both outputs are ascending.
pub fn carve_validation(train: &[usize], labels: &[usize], fraction: f64, seed: u64) -> Result<Carve> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "validation fraction must lie in (0, 0.5), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = members_by_class(train, labels);
    let mut val = Vec::new();
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..take]);
    }
    let mut fallback = false;
    if val.is_empty() {
        fallback = true;
        let mut spare: Vec<usize> = by_class
            .iter()
            .filter(|m| m.len() >= 2)
            .flat_map(|m| m[1..].iter().copied())
            .collect();
        if spare.is_empty() {
            return Err(Error::Mask(
                "no class in the training fold has two members to spare one for validation".into(),
            ));
        }
        spare.sort_unstable();
        spare.shuffle(&mut rng);
        let want = ((fraction * train.len() as f64).round() as usize).clamp(1, spare.len());
        val.extend_from_slice(&spare[..want]);
    }
    val.sort_unstable();
    let mut is_val = vec![false; labels.len()];
    val.iter().for_each(|&i| is_val[i] = true);
    let mut fit: Vec<usize> = train.iter().copied().filter(|&i| !is_val[i]).collect();
    fit.sort_unstable();
    Ok(Carve { fit, val, fallback })
}

/// Seed for one stream of one fold; independent of execution order.
pub fn fold_seed(seed: u64, fold: usize, stream: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(fold as u64 + 1)) ^ stream)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_class_fold_counts(plan: &FoldPlan, labels: &[usize]) -> Vec<Vec<usize>> {
        let c = labels.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0; plan.k]; c];
        for (i, &f) in plan.assignments.iter().enumerate() {
            counts[labels[i]][f] += 1;
        }
        counts
    }

    #[test]
    fn divisible_case() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        let plan = stratified_kfold(&labels, 10, 3, true).unwrap();
        let counts = per_class_fold_counts(&plan, &labels);
        assert!(counts[0].iter().all(|&x| x == 6));
        assert!(counts[1].iter().all(|&x| x == 4));
    }

    #[test]
    fn uneven_classes() {
        let mut labels = Vec::new();
        for (k, &n) in [19, 12, 11, 7].iter().enumerate() {
            labels.extend(std::iter::repeat_n(k, n));
        }
        let plan = stratified_kfold(&labels, 10, 11, false).unwrap();
        for row in per_class_fold_counts(&plan, &labels) {
            assert!(row.iter().max().unwrap() - row.iter().min().unwrap() <= 1);
        }
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
        assert_eq!(plan, stratified_kfold(&labels, 10, 11, false).unwrap());
        assert!(matches!(
            stratified_kfold(&labels, 10, 11, true),
            Err(Error::ClassTooSmall { count: 7, .. })
        ));
    }

    #[test]
    fn fold_count_bounds() {
        let labels = [0, 1, 0, 1];
        assert!(stratified_kfold(&labels, 5, 0, false).is_err());
        assert!(stratified_kfold(&labels, 1, 0, false).is_err());
        let loo = stratified_kfold(&labels, 4, 0, false).unwrap();
        assert_eq!(loo.fold_sizes(), vec![1; 4]);
    }

    #[test]
    fn carve_is_stratified_partition() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let train: Vec<usize> = (0..90).collect();
        let c = carve_validation(&train, &labels, 0.1, 5).unwrap();
        assert_eq!(c.val.len(), 9);
        for k in 0..3 {
            assert_eq!(c.val.iter().filter(|&&i| labels[i] == k).count(), 3);
        }
        let mut all = c.fit.clone();
        all.extend(&c.val);
        all.sort_unstable();
        assert_eq!(all, train);
        assert!(!c.fallback);
    }

    #[test]
    fn singleton_class_stays_in_fit() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let train: Vec<usize> = (0..11).collect();
        let c = carve_validation(&train, &labels, 0.1, 0).unwrap();
        assert!(c.fit.contains(&10));
        assert_eq!(c.val.len(), 1);
    }

    #[test]
    fn tiny_classes_fall_back_to_random() {
        let labels = [0, 0, 1, 1, 2, 2];
        let train: Vec<usize> = (0..6).collect();
        let c = carve_validation(&train, &labels, 0.1, 0).unwrap();
        assert!(c.fallback);
        assert_eq!(c.val.len(), 1);
        for k in 0..3 {
            assert!(c.fit.iter().any(|&i| labels[i] == k));
        }
        assert!(carve_validation(&[0, 2, 4], &labels, 0.1, 0).is_err());
        assert!(carve_validation(&train, &labels, 0.5, 0).is_err());
    }

    #[test]
    fn fold_seeds_differ() {
        assert_ne!(fold_seed(0, 0, 1), fold_seed(0, 1, 1));
        assert_ne!(fold_seed(0, 0, 1), fold_seed(0, 0, 2));
        assert_eq!(fold_seed(9, 3, 1), fold_seed(9, 3, 1));
    }
}
