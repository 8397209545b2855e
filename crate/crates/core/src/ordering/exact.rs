use super::{Orderer, OrderingResult, Permutation, SymmetricCost};
use crate::confmat::ConfusionMatrix;
use crate::error::{bail, Result};

/// Largest class count accepted by the exhaustive search (10! orders).
pub const MAX_EXACT_CLASSES: usize = 10;

/// Globally optimal ordering by enumerating every permutation in
/// lexicographic order. The first optimum found, i.e. the lexicographically
/// smallest, is returned.
pub fn brute_force_order(c: &ConfusionMatrix) -> Result<OrderingResult> {
    let k = c.k();
    if k > MAX_EXACT_CLASSES {
        bail!("exhaustive ordering supports at most {MAX_EXACT_CLASSES} classes, got {k}");
    }
    let cost = SymmetricCost::new(c);
    let mut order: Vec<usize> = (0..k).collect();
    let initial = cost.objective(&order);
    let mut best = initial;
    let mut best_order = order.clone();
    while next_permutation(&mut order) {
        let f = cost.objective(&order);
        if f < best {
            best = f;
            best_order.copy_from_slice(&order);
        }
    }
    let result = OrderingResult {
        permutation: Permutation(best_order),
        objective: best,
        initial_objective: initial,
        trace: None,
    };
    result.check(c)?;
    Ok(result)
}

/// Advances to the next lexicographic permutation; false after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v
        .iter()
        .rposition(|&x| x > v[i])
        .expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOrderer;

impl Orderer for ExactOrderer {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn order(&self, c: &ConfusionMatrix) -> Result<OrderingResult> {
        brute_force_order(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_permutations_in_order() {
        let mut v = vec![0, 1, 2, 3];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen.len(), 24);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn examples() {
        let diag = ConfusionMatrix::unlabeled(vec![vec![3, 0], vec![0, 4]]).unwrap();
        let r = brute_force_order(&diag).unwrap();
        assert_eq!(r.permutation, Permutation::identity(2));
        assert_eq!(r.objective, 0);

        let c =
            ConfusionMatrix::unlabeled(vec![vec![0, 5, 1], vec![5, 0, 0], vec![9, 0, 0]]).unwrap();
        let r = brute_force_order(&c).unwrap();
        assert_eq!(r.objective, 20);
        assert_eq!(r.permutation.order(), &[1, 0, 2]);
    }

    #[test]
    fn symmetric_reversal_is_co_optimal() {
        let c = ConfusionMatrix::unlabeled(vec![
            vec![0, 1, 6, 0],
            vec![1, 0, 0, 4],
            vec![6, 0, 0, 2],
            vec![0, 4, 2, 0],
        ])
        .unwrap();
        let r = brute_force_order(&c).unwrap();
        let rev = r.permutation.reversed();
        assert_eq!(
            super::super::objective_value(&c, &rev).unwrap(),
            r.objective
        );
        assert!(r.permutation.order() < rev.order());
    }

    #[test]
    fn rejects_large_k() {
        let rows = (0..11)
            .map(|i| (0..11).map(|j| u64::from(i == j)).collect())
            .collect();
        let c = ConfusionMatrix::unlabeled(rows).unwrap();
        assert!(brute_force_order(&c).is_err());
    }
}
