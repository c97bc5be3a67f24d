//! Ranking and clustering scores, plus the edge featurization used for link
//! prediction.

use std::collections::HashMap;

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Hadamard product of two node embeddings.
pub fn link_features(z_u: ArrayView1<f64>, z_v: ArrayView1<f64>) -> Result<Array1<f64>> {
    if z_u.len() != z_v.len() {
        return Err(Error::shape(format!(
            "embedding lengths differ: {} vs {}",
            z_u.len(),
            z_v.len()
        )));
    }
    Ok(&z_u * &z_v)
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted half.
///
/// Runs in `O(n log n)` using average ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numerical("NaN score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("auc needs at least one positive and one negative"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += avg_rank * tied_pos as f64;
        start = end;
    }
    let (p, q) = (positives as f64, negatives as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * q))
}

/// Normalized mutual information `I(a; b) / sqrt(H(a) H(b))` with natural logs.
///
/// Two single-cluster partitions score 1. When exactly one partition has zero
/// entropy the mutual information is zero and so is the score.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("partition lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("nmi needs at least one element"));
    }
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut count_a: HashMap<usize, usize> = HashMap::new();
    let mut count_b: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *count_a.entry(x).or_default() += 1;
        *count_b.entry(y).or_default() += 1;
    }
    let entropy = |counts: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut values: Vec<usize> = counts.collect();
        values.sort_unstable();
        values
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_a = entropy(&mut count_a.values().copied());
    let h_b = entropy(&mut count_b.values().copied());
    if h_a == 0.0 && h_b == 0.0 {
        return Ok(1.0);
    }
    if h_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }
    // I = H(a) + H(b) - H(a, b); the shared summation order makes identical
    // partitions score exactly one
    let mutual = h_a + h_b - entropy(&mut joint.values().copied());
    Ok((mutual / (h_a * h_b).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn link_features_cases() {
        let z = array![0.0, 0.0, 0.0];
        let v = array![1.0, -2.0, 3.0];
        assert_eq!(link_features(z.view(), v.view()).unwrap(), z);
        let ones = Array1::<f64>::ones(4);
        assert_eq!(link_features(ones.view(), ones.view()).unwrap(), ones);
        let u = array![0.5, 2.0, -1.0];
        let expected: Array1<f64> = (0..3).map(|i| u[i] * v[i]).collect();
        assert_eq!(link_features(u.view(), v.view()).unwrap(), expected);
        assert!(link_features(u.view(), ones.view()).is_err());
    }

    #[test]
    fn auc_trivial_cases() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn nmi_hand_computed_example() {
        // a = [0,0,1,1], b = [0,0,0,1]
        // H(a) = ln 2, H(b) = -(3/4 ln 3/4 + 1/4 ln 1/4), I summed cell by cell
        let a = [0, 0, 1, 1];
        let b = [0, 0, 0, 1];
        let h_a = 2f64.ln();
        let h_b = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        // cells: (0,0)=2, (1,0)=1, (1,1)=1
        let i = 0.5 * (0.5f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.25)).ln();
        let expected = i / (h_a * h_b).sqrt();
        assert!((nmi(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn nmi_trivial_cases() {
        let a = [0, 1, 1, 2, 2, 2];
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
        let renamed = [7, 3, 3, 9, 9, 9];
        assert!((nmi(&a, &renamed).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[4, 4, 4], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[4, 4, 4], &[0, 1, 2]).unwrap(), 0.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
        assert!(nmi(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..50)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < labels.len());
            let fast = auc(&scores, &labels).unwrap();
            prop_assert!((fast - auc_by_pairs(&scores, &labels)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn nmi_is_symmetric_and_bounded(
            pairs in prop::collection::vec((0usize..4, 0usize..3), 1..40)
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
