use std::collections::{BTreeSet, HashSet};
use std::hash::Hash;

use super::EvalError;

/// Items with scores, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<T> {
    items: Vec<(T, f64)>,
}

impl<T> Default for RankedList<T> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<T: Ord + Clone> RankedList<T> {
    /// Sorts by descending score, ties by ascending id.
    pub fn from_scores<I: IntoIterator<Item = (T, f64)>>(scores: I) -> Self {
        let mut items: Vec<(T, f64)> = scores.into_iter().collect();
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        debug_assert!(items.windows(2).all(|w| w[0].0 != w[1].0), "duplicate ids");
        Self { items }
    }

    /// Keeps the given order.
    pub fn from_ordered(items: Vec<(T, f64)>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(T, f64)] {
        &self.items
    }

    pub fn ids(&self) -> impl Iterator<Item = T> + '_ {
        self.items.iter().map(|(id, _)| id.clone())
    }

    /// 1-based position of `id`.
    pub fn position(&self, id: &T) -> Option<usize> {
        self.items.iter().position(|(x, _)| x == id).map(|p| p + 1)
    }

    pub fn page(&self, offset: usize, limit: usize) -> &[(T, f64)] {
        let start = offset.min(self.items.len());
        let end = start.saturating_add(limit).min(self.items.len());
        &self.items[start..end]
    }

    pub fn into_items(self) -> Vec<(T, f64)> {
        self.items
    }
}

/// Filtered rank of one target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Found(usize),
    /// Target absent; `candidates` items remained after filtering.
    Missed { candidates: usize },
}

impl Rank {
    /// Rank value; a miss sits just past the end of the list.
    pub fn value(self) -> usize {
        match self {
            Rank::Found(r) => r,
            Rank::Missed { candidates } => candidates + 1,
        }
    }

    pub fn reciprocal(self) -> f64 {
        match self {
            Rank::Found(r) => 1.0 / r as f64,
            Rank::Missed { .. } => 0.0,
        }
    }

    pub fn hit(self, k: usize) -> bool {
        matches!(self, Rank::Found(r) if r <= k)
    }
}

/// Position of `target` after removing every other member of `truths`.
pub fn target_filtered_rank<T: Ord + Clone>(
    ranking: &RankedList<T>,
    truths: &BTreeSet<T>,
    target: &T,
) -> Result<Rank, EvalError> {
    if !truths.contains(target) {
        return Err(EvalError::TargetNotInTruths);
    }
    let mut pos = 0;
    for (id, _) in ranking.items() {
        if id == target {
            return Ok(Rank::Found(pos + 1));
        }
        if !truths.contains(id) {
            pos += 1;
        }
    }
    Ok(Rank::Missed { candidates: pos })
}

/// Micro-averaged hits@k and MRR.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub count: usize,
    pub hits: Vec<(usize, f64)>,
    pub mrr: f64,
    pub misses: usize,
}

impl Metrics {
    pub fn from_ranks(ranks: &[Rank], ks: &[usize]) -> Self {
        let n = ranks.len();
        let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        let hits = ks
            .iter()
            .map(|&k| (k, frac(ranks.iter().filter(|r| r.hit(k)).count())))
            .collect();
        let mrr = if n == 0 {
            0.0
        } else {
            ranks.iter().map(|r| r.reciprocal()).sum::<f64>() / n as f64
        };
        Self {
            count: n,
            hits,
            mrr,
            misses: ranks.iter().filter(|r| matches!(r, Rank::Missed { .. })).count(),
        }
    }

    pub fn hits_at(&self, k: usize) -> Option<f64> {
        self.hits.iter().find(|(x, _)| *x == k).map(|(_, h)| *h)
    }
}

/// First-occurrence deduplication of a ranked list through `key`.
pub fn dedup_by_key<T, K, F>(ranked: &RankedList<T>, mut key: F) -> RankedList<K>
where
    T: Ord + Clone,
    K: Ord + Clone + Hash,
    F: FnMut(&T) -> K,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (id, score) in ranked.items() {
        let k = key(id);
        if seen.insert(k.clone()) {
            out.push((k, *score));
        }
    }
    RankedList::from_ordered(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(ids: &[char]) -> RankedList<char> {
        RankedList::from_ordered(ids.iter().map(|&c| (c, 0.0)).collect())
    }

    #[test]
    fn filtered_example() {
        let truths: BTreeSet<char> = ['a', 'c'].into();
        let r = target_filtered_rank(&list(&['a', 'b', 'c', 'd']), &truths, &'c').unwrap();
        assert_eq!(r, Rank::Found(2));
        let r = target_filtered_rank(&list(&['a', 'b', 'c', 'd']), &truths, &'a').unwrap();
        assert_eq!(r, Rank::Found(1));
    }

    #[test]
    fn missing_target_is_a_miss() {
        let truths: BTreeSet<char> = ['z'].into();
        let r = target_filtered_rank(&list(&['a', 'b']), &truths, &'z').unwrap();
        assert_eq!(r, Rank::Missed { candidates: 2 });
        assert_eq!(r.value(), 3);
        assert_eq!(r.reciprocal(), 0.0);
        assert!(target_filtered_rank(&list(&['a']), &truths, &'a').is_err());
    }

    #[test]
    fn two_triples_metrics() {
        let m = Metrics::from_ranks(&[Rank::Found(1), Rank::Found(4)], &[1, 10, 100]);
        assert!((m.mrr - 0.625).abs() < 1e-12);
        assert_eq!(m.hits_at(1), Some(0.5));
        assert_eq!(m.hits_at(10), Some(1.0));
    }

    #[test]
    fn ties_break_by_id() {
        let r = RankedList::from_scores(vec![(3, 1.0), (1, 1.0), (2, 2.0)]);
        assert_eq!(r.ids().collect::<Vec<_>>(), vec![2, 1, 3]);
        assert_eq!(r.page(1, 5), &[(1, 1.0), (3, 1.0)]);
        assert!(r.page(9, 2).is_empty());
    }
}
