//! Class clusters from an ordered confusion matrix.
//!
//! Neighbouring classes `i, i+1` in display order are joined when their
//! adjacency strength `C'[i][i+1] + C'[i+1][i]` reaches the threshold θ.
//! θ is chosen by a [`ThresholdStrategy`]: fixed, percentile-based, or by
//! asking a [`Responder`] a logarithmic number of yes/no questions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::confmat::ConfusionMatrix;
use crate::error::{bail, Error, Result};
use crate::ordering::Permutation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub order: Permutation,
    /// One entry per boundary between display positions `i` and `i+1`.
    pub strengths: Vec<u64>,
    pub threshold: u64,
    /// Inclusive display-position ranges, in order.
    pub clusters: Vec<RangeInclusive<usize>>,
}

impl ClusterPlan {
    /// Original class indices of each cluster.
    pub fn class_groups(&self) -> Vec<Vec<usize>> {
        self.clusters
            .iter()
            .map(|r| self.order.order()[r.clone()].to_vec())
            .collect()
    }

    pub fn to_clustering(&self, c: &ConfusionMatrix) -> Clustering {
        Clustering {
            groups: self
                .class_groups()
                .into_iter()
                .map(|g| g.into_iter().map(|i| c.labels()[i].clone()).collect())
                .collect(),
        }
    }
}

/// Boundary strengths of `c` displayed in `order`.
pub fn adjacency_strengths(c: &ConfusionMatrix, order: &Permutation) -> Result<Vec<u64>> {
    if order.len() != c.k() {
        bail!("order of length {} for {} classes", order.len(), c.k());
    }
    Ok(order
        .order()
        .windows(2)
        .map(|w| c.get(w[0], w[1]) + c.get(w[1], w[0]))
        .collect())
}

/// Cuts between positions `i` and `i+1` wherever the strength is below θ.
pub fn split_by_threshold(
    c: &ConfusionMatrix,
    order: &Permutation,
    theta: u64,
) -> Result<ClusterPlan> {
    let strengths = adjacency_strengths(c, order)?;
    let mut clusters = Vec::new();
    let mut start = 0;
    for (i, &a) in strengths.iter().enumerate() {
        if a < theta {
            clusters.push(start..=i);
            start = i + 1;
        }
    }
    clusters.push(start..=c.k() - 1);
    Ok(ClusterPlan {
        order: order.clone(),
        strengths,
        threshold: theta,
        clusters,
    })
}

/// Smallest candidate θ (a strength value, or one past the maximum) for
/// which at most `fraction_above` of the boundaries have strength ≥ θ.
pub fn percentile_threshold(strengths: &[u64], fraction_above: f64) -> Result<u64> {
    if strengths.is_empty() {
        bail!("no adjacency strengths");
    }
    if !(fraction_above > 0.0 && fraction_above <= 1.0) {
        bail!("fraction must be in (0, 1], got {fraction_above}");
    }
    let mut sorted = strengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let max = *sorted.last().expect("nonempty");
    let mut candidates: Vec<u64> = sorted.clone();
    candidates.dedup();
    candidates.push(max + 1);
    for theta in candidates {
        let below = sorted.partition_point(|&a| a < theta);
        let above = sorted.len() - below;
        if above as f64 / n <= fraction_above {
            return Ok(theta);
        }
    }
    unreachable!("max + 1 always qualifies")
}

/// One yes/no question about a boundary in display order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryQuery {
    pub position: usize,
    pub left: String,
    pub right: String,
    pub strength: u64,
}

/// Answers whether two neighbouring classes belong to the same cluster.
pub trait Responder {
    fn same_cluster(&mut self, query: &BoundaryQuery) -> Result<bool>;
}

/// Replays a fixed `y`/`n` script; running out of answers is an error.
#[derive(Debug, Clone)]
pub struct ScriptedResponder {
    answers: Vec<bool>,
    next: usize,
}

impl ScriptedResponder {
    pub fn parse(script: &str) -> Result<Self> {
        let answers = script
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c.to_ascii_lowercase() {
                'y' => Ok(true),
                'n' => Ok(false),
                other => Err(Error::invalid(format!("answer `{other}` is not y or n"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { answers, next: 0 })
    }

    pub fn used(&self) -> usize {
        self.next
    }
}

impl Responder for ScriptedResponder {
    fn same_cluster(&mut self, q: &BoundaryQuery) -> Result<bool> {
        let a = self.answers.get(self.next).copied().ok_or_else(|| {
            Error::Aborted(format!(
                "script exhausted at query {} ({} / {})",
                self.next + 1,
                q.left,
                q.right
            ))
        })?;
        self.next += 1;
        Ok(a)
    }
}

impl<F: FnMut(&BoundaryQuery) -> Result<bool>> Responder for F {
    fn same_cluster(&mut self, q: &BoundaryQuery) -> Result<bool> {
        self(q)
    }
}

/// Binary search for θ over the sorted distinct strengths.
///
/// A "yes" at strength `v` means θ ≤ `v`; a "no" means θ > `v`. The result
/// is one past the largest strength answered "no", or 0 without any "no".
/// Uses at most `ceil(log2(m + 1))` queries for `m` distinct strengths.
pub fn interactive_threshold(
    c: &ConfusionMatrix,
    order: &Permutation,
    responder: &mut dyn Responder,
) -> Result<u64> {
    let strengths = adjacency_strengths(c, order)?;
    let labels = |p: usize| c.labels()[order.order()[p]].clone();
    search_threshold(&strengths, |position, strength| {
        let q = BoundaryQuery {
            position,
            left: labels(position),
            right: labels(position + 1),
            strength,
        };
        responder.same_cluster(&q)
    })
}

/// Core of [`interactive_threshold`]; `ask(position, strength)` is queried
/// for the first boundary carrying each probed strength.
pub fn search_threshold(
    strengths: &[u64],
    mut ask: impl FnMut(usize, u64) -> Result<bool>,
) -> Result<u64> {
    let distinct: Vec<u64> = strengths
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (mut lo, mut hi) = (0usize, distinct.len());
    let mut theta = 0;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let v = distinct[mid];
        let position = strengths
            .iter()
            .position(|&a| a == v)
            .expect("value present");
        if ask(position, v)? {
            hi = mid;
        } else {
            theta = v + 1;
            lo = mid + 1;
        }
    }
    Ok(theta)
}

/// How θ is chosen for [`cluster`].
pub enum ThresholdStrategy<'a> {
    Fixed(u64),
    Percentile(f64),
    Interactive(&'a mut dyn Responder),
}

impl ThresholdStrategy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ThresholdStrategy::Fixed(_) => "fixed",
            ThresholdStrategy::Percentile(_) => "percentile",
            ThresholdStrategy::Interactive(_) => "interactive",
        }
    }

    pub fn resolve(&mut self, c: &ConfusionMatrix, order: &Permutation) -> Result<u64> {
        match self {
            ThresholdStrategy::Fixed(t) => Ok(*t),
            ThresholdStrategy::Percentile(f) => {
                percentile_threshold(&adjacency_strengths(c, order)?, *f)
            }
            ThresholdStrategy::Interactive(r) => interactive_threshold(c, order, &mut **r),
        }
    }
}

pub fn cluster(
    c: &ConfusionMatrix,
    order: &Permutation,
    mut strategy: ThresholdStrategy<'_>,
) -> Result<ClusterPlan> {
    let theta = strategy.resolve(c, order)?;
    split_by_threshold(c, order, theta)
}

/// Disjoint groups of class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<String>>", into = "Vec<Vec<String>>")]
pub struct Clustering {
    groups: Vec<Vec<String>>,
}

impl Clustering {
    pub fn new(groups: Vec<Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &groups {
            if g.is_empty() {
                bail!("empty cluster");
            }
            for name in g {
                if !seen.insert(name.as_str()) {
                    bail!("class `{name}` appears in more than one cluster");
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }
}

impl TryFrom<Vec<Vec<String>>> for Clustering {
    type Error = Error;

    fn try_from(g: Vec<Vec<String>>) -> Result<Self> {
        Clustering::new(g)
    }
}

impl From<Clustering> for Vec<Vec<String>> {
    fn from(c: Clustering) -> Self {
        c.groups
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterError {
    /// Error per coarse group, in the coarse clustering's order.
    pub errors: Vec<u64>,
    pub total: u64,
}

/// Scores `candidate` against the ground-truth `coarse` grouping.
///
/// For a coarse group G touched by `n` candidate clusters whose union is M,
/// the error is `(n − 1) + |M \ G|`.
pub fn cluster_error(candidate: &Clustering, coarse: &Clustering) -> Result<ClusterError> {
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (gi, g) in candidate.groups.iter().enumerate() {
        for name in g {
            owner.insert(name, gi);
        }
    }
    let mut errors = Vec::with_capacity(coarse.groups.len());
    for g in &coarse.groups {
        let members: HashSet<&str> = g.iter().map(String::as_str).collect();
        let mut touched = BTreeSet::new();
        for name in g {
            let gi = owner.get(name.as_str()).ok_or_else(|| {
                Error::invalid(format!(
                    "coarse class `{name}` is missing from the candidate"
                ))
            })?;
            touched.insert(*gi);
        }
        let outsiders = touched
            .iter()
            .flat_map(|&gi| &candidate.groups[gi])
            .filter(|name| !members.contains(name.as_str()))
            .count();
        errors.push((touched.len() - 1 + outsiders) as u64);
    }
    Ok(ClusterError {
        total: errors.iter().sum(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example3() -> ConfusionMatrix {
        ConfusionMatrix::unlabeled(vec![vec![0, 5, 1], vec![5, 0, 0], vec![9, 0, 0]]).unwrap()
    }

    fn groups(g: &[&[&str]]) -> Clustering {
        Clustering::new(
            g.iter()
                .map(|x| x.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_threshold_is_one_cluster() {
        let c = example3();
        let plan = split_by_threshold(&c, &Permutation::identity(3), 0).unwrap();
        assert_eq!(plan.clusters, vec![0..=2]);
    }

    #[test]
    fn block_diagonal_splits() {
        let c = ConfusionMatrix::unlabeled(vec![
            vec![9, 9, 0, 0],
            vec![9, 9, 0, 0],
            vec![0, 0, 9, 9],
            vec![0, 0, 9, 9],
        ])
        .unwrap();
        let plan = split_by_threshold(&c, &Permutation::identity(4), 1).unwrap();
        assert_eq!(plan.strengths, vec![18, 0, 18]);
        assert_eq!(plan.class_groups(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn ordered_example_strengths() {
        // Display order (1, 0, 2): boundaries C[1][0]+C[0][1] and C[0][2]+C[2][0].
        let c = example3();
        let order = Permutation::new(vec![1, 0, 2]).unwrap();
        let plan = split_by_threshold(&c, &order, 2).unwrap();
        assert_eq!(plan.strengths, vec![10, 10]);
        assert_eq!(plan.class_groups(), vec![vec![1, 0, 2]]);
        let plan = split_by_threshold(&c, &order, 11).unwrap();
        assert_eq!(plan.class_groups(), vec![vec![1], vec![0], vec![2]]);
        let clustering = plan.to_clustering(&c);
        assert_eq!(clustering.groups()[0], vec!["1".to_string()]);
    }

    #[test]
    fn percentile_examples() {
        let s: Vec<u64> = (1..=10).collect();
        assert_eq!(percentile_threshold(&s, 0.1).unwrap(), 10);
        assert_eq!(percentile_threshold(&[4, 4, 4], 1.0).unwrap(), 4);
        assert_eq!(percentile_threshold(&[0, 0, 0], 0.1).unwrap(), 1);
        assert!(percentile_threshold(&[], 0.1).is_err());
        assert!(percentile_threshold(&[1], 0.0).is_err());
    }

    #[test]
    fn interactive_examples() {
        let mut asked = Vec::new();
        let theta = search_threshold(&[1, 5, 9], |_, v| {
            asked.push(v);
            Ok(v != 5)
        })
        .unwrap();
        assert_eq!(asked, vec![5, 9]);
        assert_eq!(theta, 6);

        let mut n = 0;
        assert_eq!(
            search_threshold(&[3, 3], |_, _| {
                n += 1;
                Ok(true)
            })
            .unwrap(),
            0
        );
        assert_eq!(n, 1);

        assert_eq!(search_threshold(&[1, 5, 9], |_, _| Ok(true)).unwrap(), 0);
    }

    #[test]
    fn interactive_with_scripted_responder() {
        let c = ConfusionMatrix::unlabeled(vec![
            vec![5, 1, 0, 0],
            vec![0, 5, 2, 0],
            vec![0, 3, 5, 9],
            vec![0, 0, 0, 5],
        ])
        .unwrap();
        // strengths (1, 5, 9) in identity order
        let mut r = ScriptedResponder::parse("ny").unwrap();
        let theta = interactive_threshold(&c, &Permutation::identity(4), &mut r).unwrap();
        assert_eq!(theta, 6);
        assert_eq!(r.used(), 2);

        let mut short = ScriptedResponder::parse("n").unwrap();
        let err = interactive_threshold(&c, &Permutation::identity(4), &mut short).unwrap_err();
        assert!(matches!(err, Error::Aborted(_)));
        assert!(ScriptedResponder::parse("yq").is_err());
    }

    #[test]
    fn query_labels_follow_display_order() {
        let c = example3();
        let order = Permutation::new(vec![2, 0, 1]).unwrap();
        let mut seen = Vec::new();
        let mut r = |q: &BoundaryQuery| {
            seen.push((q.left.clone(), q.right.clone(), q.strength));
            Ok(true)
        };
        interactive_threshold(&c, &order, &mut r).unwrap();
        assert_eq!(seen, vec![("2".to_string(), "0".to_string(), 10)]);
    }

    #[test]
    fn strategies_resolve() {
        let c = example3();
        let order = Permutation::identity(3);
        let plan = cluster(&c, &order, ThresholdStrategy::Fixed(0)).unwrap();
        assert_eq!(plan.clusters.len(), 1);
        let plan = cluster(&c, &order, ThresholdStrategy::Percentile(0.5)).unwrap();
        // strengths (10, 0): θ = 10 leaves one of two boundaries at or above.
        assert_eq!(plan.threshold, 10);
        let mut r = ScriptedResponder::parse("yy").unwrap();
        let s = ThresholdStrategy::Interactive(&mut r);
        assert_eq!(s.name(), "interactive");
        assert_eq!(cluster(&c, &order, s).unwrap().threshold, 0);
    }

    #[test]
    fn cluster_error_examples() {
        let coarse = groups(&[&["baby", "boy", "girl", "man", "woman"]]);
        assert_eq!(cluster_error(&coarse, &coarse).unwrap().total, 0);
        let cand = groups(&[&["baby", "boy", "man"], &["girl"], &["woman"]]);
        assert_eq!(cluster_error(&cand, &coarse).unwrap().errors, vec![2]);

        let coarse = groups(&[&["aquarium fish", "flatfish", "ray", "shark", "trout"]]);
        let cand = groups(&[
            &["aquarium fish", "orchid"],
            &["flatfish"],
            &["ray", "shark"],
            &["trout", "lion"],
        ]);
        assert_eq!(cluster_error(&cand, &coarse).unwrap().total, 5);

        let missing = groups(&[&["flatfish"]]);
        assert!(cluster_error(&missing, &coarse).is_err());
    }

    #[test]
    fn clustering_validation() {
        assert!(Clustering::new(vec![vec![]]).is_err());
        assert!(Clustering::new(vec![vec!["a".into()], vec!["a".into()]]).is_err());
        let c: Clustering = serde_json::from_str(r#"[["a","b"],["c"]]"#).unwrap();
        assert_eq!(c.groups().len(), 2);
    }
}
