//! Jaccard-based distances between coalitions and individuals.

use std::cmp::Ordering;

use crate::domain::{Coalition, Individual, Side};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiversityError {
    #[error("diversity needs at least one other individual")]
    PopulationTooSmall,
}

/// `|a∩b| / (|a| + |b| - |a∩b|)`; two empty coalitions are identical.
pub fn jaccard(a: &Coalition, b: &Coalition) -> f64 {
    let shared = a.overlap(b);
    let union = a.len() + b.len() - shared;
    if union == 0 {
        1.0
    } else {
        shared as f64 / union as f64
    }
}

/// Sum of `1 - jaccard` over a greedy best-first alignment of two coalition
/// lists, plus 1 for each coalition left without a partner.
///
/// Ties are broken on coalition contents rather than positions, so the
/// result does not depend on argument order.
fn aligned_dissimilarity(a: &[Coalition], b: &[Coalition]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            pairs.push((jaccard(ca, cb), i, j));
        }
    }
    let content_key = |i: usize, j: usize| {
        let (x, y) = (&a[i], &b[j]);
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    pairs.sort_by(|p, q| {
        q.0.partial_cmp(&p.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| content_key(p.1, p.2).cmp(&content_key(q.1, q.2)))
            .then_with(|| (p.1, p.2).cmp(&(q.1, q.2)))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut total = 0.0;
    let mut matched = 0;
    for (jac, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += 1.0 - jac;
            matched += 1;
        }
    }
    total + (a.len().max(b.len()) - matched) as f64
}

/// Mean dissimilarity over aligned coalition pairs of both sides, in `[0, 1]`.
pub fn individual_distance(x: &Individual, y: &Individual) -> f64 {
    let mut total = 0.0;
    let mut slots = 0;
    for side in Side::BOTH {
        let (a, b) = (x.side(side), y.side(side));
        slots += a.len().max(b.len());
        total += aligned_dissimilarity(a, b);
    }
    if slots == 0 {
        0.0
    } else {
        total / slots as f64
    }
}

/// Distance from `ind` to its nearest neighbour among `others`.
pub fn diversity_contribution(ind: &Individual, others: &[Individual]) -> Result<f64, DiversityError> {
    others
        .iter()
        .map(|o| individual_distance(ind, o))
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .ok_or(DiversityError::PopulationTooSmall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::OrderIdx;
    use proptest::prelude::*;

    fn c(m: &[u32]) -> Coalition {
        Coalition::new(Side::Seller, m.iter().map(|&i| OrderIdx(i))).unwrap()
    }

    fn ind(parts: &[&[u32]]) -> Individual {
        Individual::new(parts.iter().map(|p| c(p)).collect(), vec![])
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&c(&[1, 2]), &c(&[2, 1])), 1.0);
        assert_eq!(jaccard(&c(&[1, 2]), &c(&[3, 4])), 0.0);
        assert_eq!(jaccard(&c(&[1, 2, 3]), &c(&[2, 3, 4])), 0.5);
    }

    #[test]
    fn distance_examples() {
        let a = ind(&[&[0, 1], &[2, 3]]);
        assert_eq!(individual_distance(&a, &a), 0.0);
        let disjoint = ind(&[&[4, 5], &[6, 7]]);
        assert_eq!(individual_distance(&a, &disjoint), 1.0);
        // Aligned with Jaccard 1 and 0.5.
        let x = ind(&[&[0, 1], &[2, 3, 4]]);
        let y = ind(&[&[0, 1], &[3, 4, 5]]);
        assert_eq!(individual_distance(&x, &y), 0.25);
        // One unmatched coalition pads with distance 1.
        let z = ind(&[&[0, 1], &[2, 3, 4], &[9]]);
        assert!((individual_distance(&x, &z) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_examples() {
        let me = ind(&[&[0, 1], &[2, 3]]);
        assert_eq!(diversity_contribution(&me, &[ind(&[&[4], &[5]]), me.clone()]).unwrap(), 0.0);
        assert_eq!(diversity_contribution(&me, &[ind(&[&[4], &[5]]), ind(&[&[6, 7], &[8]])]).unwrap(), 1.0);
        // distances 0.25 and 1.0
        let near = ind(&[&[0, 1], &[2, 3, 4]]);
        let d_near = individual_distance(&me, &near);
        assert!((d_near - (0.0 + (1.0 - 2.0 / 3.0)) / 2.0).abs() < 1e-12);
        let far = ind(&[&[5], &[6]]);
        assert_eq!(diversity_contribution(&me, &[far, near]).unwrap(), d_near);
        assert_eq!(diversity_contribution(&me, &[]), Err(DiversityError::PopulationTooSmall));
    }

    fn arb_partition() -> impl Strategy<Value = Individual> {
        proptest::collection::vec(0usize..3, 7).prop_map(|labels| {
            let mut parts: Vec<Vec<u32>> = vec![vec![]; 3];
            for (i, l) in labels.iter().enumerate() {
                parts[*l].push(i as u32);
            }
            Individual::new(parts.into_iter().filter(|p| !p.is_empty()).map(|p| c(&p)).collect(), vec![])
        })
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(a in proptest::collection::btree_set(0u32..10, 1..6),
                                            b in proptest::collection::btree_set(0u32..10, 1..6)) {
            let (ca, cb) = (c(&a.iter().copied().collect::<Vec<_>>()), c(&b.iter().copied().collect::<Vec<_>>()));
            let j = jaccard(&ca, &cb);
            prop_assert_eq!(j, jaccard(&cb, &ca));
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j == 1.0, a == b);
        }

        #[test]
        fn distance_is_symmetric(x in arb_partition(), y in arb_partition()) {
            let d = individual_distance(&x, &y);
            prop_assert_eq!(d, individual_distance(&y, &x));
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d == 0.0, x.same_partition(&y));
        }
    }
}
