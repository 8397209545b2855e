//! Class orderings that pull confusion mass towards the diagonal.
//!
//! The objective is the linear-arrangement cost
//! `f(C) = Σ_ij C[order[i]][order[j]] · |i − j|` over display positions.
//! Two strategies implement [`Orderer`]: [`AnnealOrderer`] (simulated
//! annealing with row swaps and block moves) and [`ExactOrderer`]
//! (exhaustive search, small K only). [`registry`] maps names to them.

mod anneal;
mod exact;

pub use anneal::{anneal_order, AcceptRule, AnnealOrderer, AnnealSchedule};
pub use exact::{brute_force_order, ExactOrderer, MAX_EXACT_CLASSES};

use serde::{Deserialize, Serialize};

use crate::confmat::ConfusionMatrix;
use crate::error::{bail, Error, Result};

/// Bijection on class indices. `order()[p]` is the original class shown at
/// display position `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation((0..k).collect())
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &c in &order {
            if c >= order.len() || seen[c] {
                bail!("{order:?} is not a permutation of 0..{}", order.len());
            }
            seen[c] = true;
        }
        Ok(Permutation(order))
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (p, &c) in self.0.iter().enumerate() {
            inv[c] = p;
        }
        Permutation(inv)
    }

    pub fn reversed(&self) -> Self {
        Permutation(self.0.iter().rev().copied().collect())
    }

    /// Order such that `c.permuted(&other)?.permuted(&self)` equals
    /// `c.permuted(&self.compose(&other))`.
    pub fn compose(&self, other: &Permutation) -> Self {
        Permutation(self.0.iter().map(|&p| other.0[p]).collect())
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

pub fn objective_value(c: &ConfusionMatrix, perm: &Permutation) -> Result<u64> {
    if perm.len() != c.k() {
        bail!("permutation of length {} for {} classes", perm.len(), c.k());
    }
    Ok(SymmetricCost::new(c).objective(perm.order()))
}

/// `C + Cᵀ` flattened; the objective only depends on this sum.
#[derive(Debug, Clone)]
pub(crate) struct SymmetricCost {
    k: usize,
    sym: Vec<u64>,
}

impl SymmetricCost {
    pub(crate) fn new(c: &ConfusionMatrix) -> Self {
        let k = c.k();
        let mut sym = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                sym[i * k + j] = c.get(i, j) + c.get(j, i);
            }
        }
        Self { k, sym }
    }

    #[inline]
    pub(crate) fn pair(&self, a: usize, b: usize) -> u64 {
        self.sym[a * self.k + b]
    }

    pub(crate) fn objective(&self, order: &[usize]) -> u64 {
        let mut f = 0;
        for p in 0..order.len() {
            let row = &self.sym[order[p] * self.k..(order[p] + 1) * self.k];
            for (q, &cq) in order.iter().enumerate().skip(p + 1) {
                f += row[cq] * (q - p) as u64;
            }
        }
        f
    }

    /// Objective change from swapping display positions `a` and `b`.
    pub(crate) fn swap_delta(&self, order: &[usize], a: usize, b: usize) -> i64 {
        if a == b {
            return 0;
        }
        let (x, y) = (order[a], order[b]);
        let mut delta = 0i64;
        for (p, &z) in order.iter().enumerate() {
            if p == a || p == b {
                continue;
            }
            let da = a.abs_diff(p) as i64;
            let db = b.abs_diff(p) as i64;
            let diff = self.pair(x, z) as i64 - self.pair(y, z) as i64;
            delta += diff * (db - da);
        }
        delta
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingResult {
    #[serde(rename = "order")]
    pub permutation: Permutation,
    pub objective: u64,
    pub initial_objective: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<u64>>,
}

impl OrderingResult {
    pub(crate) fn check(&self, c: &ConfusionMatrix) -> Result<()> {
        let recomputed = objective_value(c, &self.permutation)?;
        if recomputed != self.objective {
            return Err(Error::Invariant(format!(
                "reported objective {} but permutation scores {recomputed}",
                self.objective
            )));
        }
        if self.objective > self.initial_objective {
            return Err(Error::Invariant(format!(
                "objective {} exceeds initial objective {}",
                self.objective, self.initial_objective
            )));
        }
        Ok(())
    }
}

/// Strategy that turns a confusion matrix into a class ordering.
pub trait Orderer: Send + Sync {
    fn name(&self) -> &'static str;
    fn order(&self, c: &ConfusionMatrix) -> Result<OrderingResult>;
}

type OrdererFactory = fn(&OrdererConfig) -> Box<dyn Orderer>;

/// Knobs shared by orderer constructors. Fields left `None` fall back to
/// per-matrix defaults.
#[derive(Debug, Clone, Default)]
pub struct OrdererConfig {
    pub steps: Option<u64>,
    pub t0: Option<f64>,
    pub cooling: Option<f64>,
    pub restarts: Option<u32>,
    pub seed: u64,
    pub accept: AcceptRule,
    pub trace_every: Option<u64>,
}

/// Name → constructor table for the available orderers.
pub struct OrdererRegistry {
    entries: Vec<(&'static str, OrdererFactory)>,
}

impl OrdererRegistry {
    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn register(&mut self, name: &'static str, factory: OrdererFactory) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, factory));
    }

    pub fn build(&self, name: &str, cfg: &OrdererConfig) -> Result<Box<dyn Orderer>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| f(cfg))
            .ok_or_else(|| Error::Unknown {
                kind: "orderer",
                name: name.to_string(),
            })
    }
}

pub fn registry() -> OrdererRegistry {
    let mut r = OrdererRegistry { entries: vec![] };
    r.register("anneal", |cfg| Box::new(AnnealOrderer::from_config(cfg)));
    r.register("exact", |_| Box::new(ExactOrderer));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example3() -> ConfusionMatrix {
        ConfusionMatrix::unlabeled(vec![vec![0, 5, 1], vec![5, 0, 0], vec![9, 0, 0]]).unwrap()
    }

    #[test]
    fn objective_examples() {
        let diag =
            ConfusionMatrix::unlabeled(vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]).unwrap();
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            let p = Permutation::new(order.to_vec()).unwrap();
            assert_eq!(objective_value(&diag, &p).unwrap(), 0);
        }
        let c = ConfusionMatrix::unlabeled(vec![vec![0, 3], vec![7, 0]]).unwrap();
        assert_eq!(objective_value(&c, &Permutation::identity(2)).unwrap(), 10);

        let c = example3();
        assert_eq!(objective_value(&c, &Permutation::identity(3)).unwrap(), 30);
        let best = Permutation::new(vec![1, 0, 2]).unwrap();
        assert_eq!(objective_value(&c, &best).unwrap(), 20);
        assert!(objective_value(&c, &Permutation::identity(2)).is_err());
    }

    #[test]
    fn objective_matches_permuted_matrix_definition() {
        let c = example3();
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let m = c.permuted(&p).unwrap();
        let mut direct = 0;
        for i in 0..3 {
            for j in 0..3 {
                direct += m.get(i, j) * i.abs_diff(j) as u64;
            }
        }
        assert_eq!(objective_value(&c, &p).unwrap(), direct);
    }

    #[test]
    fn swap_delta_agrees_with_recompute() {
        let c = ConfusionMatrix::unlabeled(vec![
            vec![3, 1, 4, 1],
            vec![5, 9, 2, 6],
            vec![5, 3, 5, 8],
            vec![9, 7, 9, 3],
        ])
        .unwrap();
        let s = SymmetricCost::new(&c);
        let order = vec![2, 0, 3, 1];
        let base = s.objective(&order) as i64;
        for a in 0..4 {
            for b in 0..4 {
                let mut o = order.clone();
                o.swap(a, b);
                assert_eq!(base + s.swap_delta(&order, a, b), s.objective(&o) as i64);
            }
        }
    }

    #[test]
    fn permutation_validation_and_algebra() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(p.compose(&p.inverse()), Permutation::identity(4));
        assert_eq!(p.inverse().compose(&p), Permutation::identity(4));
        let parsed: Permutation = serde_json::from_str("[1,0]").unwrap();
        assert_eq!(parsed.order(), &[1, 0]);
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
    }

    #[test]
    fn registry_lookup() {
        let r = registry();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["anneal", "exact"]);
        let exact = r.build("exact", &OrdererConfig::default()).unwrap();
        assert_eq!(exact.order(&example3()).unwrap().objective, 20);
        assert!(matches!(
            r.build("spectral", &OrdererConfig::default()),
            Err(Error::Unknown { .. })
        ));
    }
}
