use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SetFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Entry {
    bound: f64,
    rank: usize,
    item: usize,
    version: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap: larger bound first, then smaller rank.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.rank.cmp(&self.rank))
            .then_with(|| other.item.cmp(&self.item))
    }
}

/// Lazy-greedy (CELF) priority queue over candidates of a submodular gain.
///
/// Each candidate keeps an upper bound on its gain. Bounds computed before the
/// last [`invalidate`](Self::invalidate) are stale; the queue re-evaluates
/// stale tops until a fresh one surfaces, which is the exact argmax because
/// gains only shrink as the base set grows. Ties go to the smaller rank (the
/// slot id unless ranks are given).
///
/// Candidates rejected by the filter are dropped for good, so filters must be
/// monotone: once an item fails it must keep failing (assigned slots, slots
/// over a shrinking budget).
#[derive(Debug, Clone)]
pub struct LazyArgmax {
    heap: BinaryHeap<Entry>,
    version: u64,
    evaluations: usize,
}

impl LazyArgmax {
    pub fn new(candidates: impl IntoIterator<Item = usize>) -> Self {
        Self::with_ranks(candidates, |i| i)
    }

    /// Candidates with a custom tie-break rank (smaller wins).
    pub fn with_ranks(candidates: impl IntoIterator<Item = usize>, rank: impl Fn(usize) -> usize) -> Self {
        let heap = candidates
            .into_iter()
            .map(|item| Entry { bound: f64::INFINITY, rank: rank(item), item, version: 0 })
            .collect();
        LazyArgmax { heap, version: 1, evaluations: 0 }
    }

    /// Marks every stored bound stale; call after the base set grows.
    pub fn invalidate(&mut self) {
        self.version += 1;
    }

    /// Number of gain evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// The candidate with the largest gain, kept in the queue. `None` when no
    /// candidate passes the filter or the best gain is not positive.
    pub fn peek(&mut self, gain: impl FnMut(usize) -> f64, filter: impl FnMut(usize) -> bool) -> Option<(usize, f64)> {
        self.find(gain, filter, false)
    }

    /// Like [`peek`](Self::peek) but removes the winner from the queue.
    pub fn pop(&mut self, gain: impl FnMut(usize) -> f64, filter: impl FnMut(usize) -> bool) -> Option<(usize, f64)> {
        self.find(gain, filter, true)
    }

    fn find(
        &mut self,
        mut gain: impl FnMut(usize) -> f64,
        mut filter: impl FnMut(usize) -> bool,
        remove: bool,
    ) -> Option<(usize, f64)> {
        while let Some(top) = self.heap.pop() {
            if !filter(top.item) {
                continue;
            }
            if top.version == self.version {
                if top.bound <= 0.0 {
                    self.heap.push(top);
                    return None;
                }
                if !remove {
                    self.heap.push(top);
                }
                return Some((top.item, top.bound));
            }
            self.evaluations += 1;
            let bound = gain(top.item);
            self.heap.push(Entry { bound, version: self.version, ..top });
        }
        None
    }
}

/// Candidate with the largest marginal gain of `f` over `base`, among those
/// passing `filter`. Ties go to the smallest id; `None` when nothing passes or
/// every gain is zero.
pub fn lazy_argmax(
    f: &impl SetFunction,
    base: &[usize],
    candidates: &[usize],
    filter: Option<&dyn Fn(usize) -> bool>,
) -> Result<Option<(usize, f64)>> {
    let n = f.ground_size();
    let mut members = vec![false; n];
    for &b in base {
        if b >= n {
            return Err(Error::UnknownSlot(b));
        }
        members[b] = true;
    }
    if let Some(&c) = candidates.iter().find(|&&c| c >= n || members[c]) {
        return Err(Error::invalid(format!("candidate {c} is out of range or already in the base set")));
    }
    let mut queue = LazyArgmax::new(candidates.iter().copied());
    Ok(queue.pop(|e| f.gain(&members, e), |e| filter.is_none_or(|keep| keep(e))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InfluenceMatrix, Scope};
    use crate::submodular::InfluenceFunction;

    fn example() -> InfluenceMatrix {
        let users = (1..=4).map(|i| format!("u{i}")).collect();
        let products = (1..=4).map(|i| (format!("P{i}"), vec![i - 1])).collect();
        let entries = [(0, 0, 0.6), (0, 1, 0.2), (1, 1, 0.4), (2, 0, 0.4), (2, 3, 0.3), (3, 0, 0.4), (3, 3, 0.5)];
        InfluenceMatrix::from_entries(4, users, products, entries).unwrap()
    }

    #[test]
    fn picks_best_slot_for_product() {
        let m = example();
        let f = InfluenceFunction::new(&m, Scope::Product(0)).unwrap();
        assert_eq!(lazy_argmax(&f, &[], &[0, 1, 2, 3], None).unwrap(), Some((0, 0.6)));
        let (s, g) = lazy_argmax(&f, &[0], &[1, 2, 3], None).unwrap().unwrap();
        assert_eq!(s, 2);
        assert!((g - 0.16).abs() < 1e-12);
    }

    #[test]
    fn empty_or_filtered_or_zero_gives_none() {
        let m = example();
        let f = InfluenceFunction::new(&m, Scope::Product(0)).unwrap();
        assert_eq!(lazy_argmax(&f, &[], &[], None).unwrap(), None);
        let none: &dyn Fn(usize) -> bool = &|_| false;
        assert_eq!(lazy_argmax(&f, &[], &[0, 1], Some(none)).unwrap(), None);
        // Slot b2 does not reach u1.
        assert_eq!(lazy_argmax(&f, &[], &[1], None).unwrap(), None);
        let g = InfluenceFunction::new(&m, Scope::Product(2)).unwrap();
        assert_eq!(lazy_argmax(&g, &[], &[0, 1, 2, 3], None).unwrap(), None);
    }

    #[test]
    fn filter_excludes_candidates() {
        let m = example();
        let f = InfluenceFunction::new(&m, Scope::Product(0)).unwrap();
        let skip_first: &dyn Fn(usize) -> bool = &|s| s != 0;
        assert_eq!(lazy_argmax(&f, &[], &[0, 1, 2, 3], Some(skip_first)).unwrap().unwrap().0, 2);
    }

    #[test]
    fn overlapping_candidates_rejected() {
        let m = example();
        let f = InfluenceFunction::new(&m, Scope::All).unwrap();
        assert!(lazy_argmax(&f, &[1], &[1, 2], None).is_err());
    }

    #[test]
    fn sequence_matches_plain_greedy_with_ranks() {
        let m = example();
        let f = InfluenceFunction::new(&m, Scope::All).unwrap();
        let mut queue = LazyArgmax::with_ranks(0..4, |i| 3 - i);
        let mut members = vec![false; 4];
        let mut order = Vec::new();
        while let Some((s, _)) = queue.pop(|e| f.gain(&members, e), |_| true) {
            members[s] = true;
            order.push(s);
            queue.invalidate();
        }
        // Singletons: 0.8, 0.4, 0.7, 0.9 -> b4 first.
        assert_eq!(order[0], 3);
        assert_eq!(order.len(), 4);
    }
}
