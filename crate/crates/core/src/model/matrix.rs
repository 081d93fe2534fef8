use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use super::{SlotCatalog, TrajectoryRecord};
use crate::error::{Error, Result};

/// Which users an influence value is summed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Every user.
    All,
    /// Users relevant to the product with this matrix index.
    Product(usize),
}

/// Compressed rows: row `i` is `data[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, PartialEq, Default)]
struct Csr {
    offsets: Vec<usize>,
    data: Vec<(u32, f64)>,
}

impl Csr {
    fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Sparse slot x user influence probabilities plus the product relevance
/// sets. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct InfluenceMatrix {
    n_slots: usize,
    users: Vec<String>,
    products: Vec<String>,
    product_users: Vec<Vec<u32>>,
    user_products: Vec<Vec<u32>>,
    by_slot: Csr,
    by_product: Vec<Csr>,
}

/// Serialized form: `entries` are `[slot, user index, probability]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDoc {
    n_slots: usize,
    users: Vec<String>,
    products: Vec<ProductUsers>,
    entries: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProductUsers {
    id: String,
    users: Vec<usize>,
}

impl TryFrom<MatrixDoc> for InfluenceMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        let products = doc.products.into_iter().map(|p| (p.id, p.users)).collect();
        InfluenceMatrix::from_entries(doc.n_slots, doc.users, products, doc.entries)
    }
}

impl From<InfluenceMatrix> for MatrixDoc {
    fn from(m: InfluenceMatrix) -> Self {
        MatrixDoc {
            n_slots: m.n_slots,
            entries: m.entries().collect(),
            products: m
                .products
                .iter()
                .zip(&m.product_users)
                .map(|(id, users)| ProductUsers {
                    id: id.clone(),
                    users: users.iter().map(|&u| u as usize).collect(),
                })
                .collect(),
            users: m.users,
        }
    }
}

impl InfluenceMatrix {
    /// Builds a matrix from explicit `(slot, user, probability)` triples.
    ///
    /// Zero probabilities are dropped; anything outside `[0, 1]` or a repeated
    /// `(slot, user)` pair is rejected. Product user lists are deduplicated.
    pub fn from_entries(
        n_slots: usize,
        users: Vec<String>,
        products: Vec<(String, Vec<usize>)>,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n_users = users.len();
        if n_users > u32::MAX as usize {
            return Err(Error::invalid("too many users"));
        }
        let mut triples = Vec::new();
        for (slot, user, p) in entries {
            if slot >= n_slots {
                return Err(Error::UnknownSlot(slot));
            }
            if user >= n_users {
                return Err(Error::UnknownUser(user.to_string()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability { slot, user, p });
            }
            if p > 0.0 {
                triples.push((slot, user as u32, p));
            }
        }
        triples.sort_by_key(|&(s, u, _)| (s, u));
        if let Some(w) = triples.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::DuplicateEntry { slot: w[0].0, user: w[0].1 as usize });
        }

        let mut seen_products = BTreeSet::new();
        let mut product_ids = Vec::with_capacity(products.len());
        let mut product_users = Vec::with_capacity(products.len());
        let mut user_products = vec![Vec::new(); n_users];
        for (j, (id, members)) in products.into_iter().enumerate() {
            if !seen_products.insert(id.clone()) {
                return Err(Error::invalid(format!("product {id} listed twice")));
            }
            let mut members: Vec<u32> = members
                .into_iter()
                .map(|u| {
                    if u < n_users {
                        Ok(u as u32)
                    } else {
                        Err(Error::UnknownUser(u.to_string()))
                    }
                })
                .collect::<Result<_>>()?;
            members.sort_unstable();
            members.dedup();
            for &u in &members {
                user_products[u as usize].push(j as u32);
            }
            product_ids.push(id);
            product_users.push(members);
        }

        let by_slot = build_csr(n_slots, triples.iter().copied());
        let by_product = (0..product_ids.len())
            .map(|j| {
                let j = j as u32;
                build_csr(
                    n_slots,
                    triples
                        .iter()
                        .copied()
                        .filter(|&(_, u, _)| user_products[u as usize].contains(&j)),
                )
            })
            .collect();

        Ok(InfluenceMatrix {
            n_slots,
            users,
            products: product_ids,
            product_users,
            user_products,
            by_slot,
            by_product,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn product_index(&self, id: &str) -> Result<usize> {
        self.products
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownProduct(id.to_string()))
    }

    pub fn product_users(&self, product: usize) -> &[u32] {
        &self.product_users[product]
    }

    /// Matrix indices of the products user `user` is relevant to.
    pub fn user_products(&self, user: usize) -> &[u32] {
        &self.user_products[user]
    }

    pub fn check_scope(&self, scope: Scope) -> Result<()> {
        match scope {
            Scope::Product(j) if j >= self.products.len() => Err(Error::UnknownProduct(format!("#{j}"))),
            _ => Ok(()),
        }
    }

    /// Nonzero `(user, probability)` pairs of slot `slot` restricted to `scope`,
    /// sorted by user.
    pub fn slot_entries(&self, scope: Scope, slot: usize) -> &[(u32, f64)] {
        match scope {
            Scope::All => self.by_slot.row(slot),
            Scope::Product(j) => self.by_product[j].row(slot),
        }
    }

    /// Probability for `(slot, user)`, zero when absent.
    pub fn probability(&self, slot: usize, user: usize) -> f64 {
        let row = self.by_slot.row(slot);
        row.binary_search_by_key(&(user as u32), |&(u, _)| u)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// All nonzero entries as `(slot, user, probability)`, slot-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_slots).flat_map(move |s| self.by_slot.row(s).iter().map(move |&(u, p)| (s, u as usize, p)))
    }

    pub fn nnz(&self) -> usize {
        self.by_slot.data.len()
    }

    /// Number of distinct users with at least one nonzero entry.
    pub fn exposed_users(&self) -> usize {
        let mut seen = vec![false; self.users.len()];
        for &(u, _) in &self.by_slot.data {
            seen[u as usize] = true;
        }
        seen.into_iter().filter(|&b| b).count()
    }

    /// Influence of the single slot `slot`: the sum of its probabilities.
    pub fn singleton(&self, scope: Scope, slot: usize) -> f64 {
        self.slot_entries(scope, slot).iter().map(|&(_, p)| p).sum()
    }

    /// Matrix indices of products with at least one relevant user that slot
    /// `slot` reaches.
    pub fn slot_products(&self, slot: usize) -> Vec<usize> {
        (0..self.products.len())
            .filter(|&j| !self.by_product[j].row(slot).is_empty())
            .collect()
    }
}

fn build_csr(rows: usize, sorted: impl Iterator<Item = (usize, u32, f64)>) -> Csr {
    let mut offsets = vec![0usize; rows + 1];
    let mut data = Vec::new();
    for (s, u, p) in sorted {
        offsets[s + 1] += 1;
        data.push((u, p));
    }
    for i in 0..rows {
        offsets[i + 1] += offsets[i];
    }
    Csr { offsets, data }
}

/// Computes influence probabilities from presence records and a slot catalog.
///
/// Entry `(s, u)` is `panel_size(s) / max panel_size` whenever one of `u`'s
/// records overlaps the slot window and lies within `lambda_radius` meters of
/// the billboard. Users are indexed in order of first appearance; products are
/// every interest id, sorted. Records and catalog must share one coordinate
/// convention; that cannot be checked here.
pub fn build_influence_matrix(
    trajectories: &[TrajectoryRecord],
    slots: &SlotCatalog,
    lambda_radius: f64,
) -> Result<InfluenceMatrix> {
    if slots.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if !(lambda_radius > 0.0) || !lambda_radius.is_finite() {
        return Err(Error::invalid(format!("lambda radius must be positive, got {lambda_radius}")));
    }
    let coords = slots.coords;

    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut users = Vec::new();
    let mut interests: Vec<BTreeSet<&str>> = Vec::new();
    for r in trajectories {
        r.check()?;
        let u = *user_index.entry(r.user_id.as_str()).or_insert_with(|| {
            users.push(r.user_id.clone());
            interests.push(BTreeSet::new());
            users.len() - 1
        });
        interests[u].extend(r.interests.iter().map(String::as_str));
    }
    let product_ids: BTreeSet<&str> = interests.iter().flatten().copied().collect();
    let products: Vec<(String, Vec<usize>)> = product_ids
        .iter()
        .map(|&p| {
            let members = (0..users.len()).filter(|&u| interests[u].contains(p)).collect();
            (p.to_string(), members)
        })
        .collect();

    // Group slots by billboard, keeping first-appearance order.
    let mut board_index: HashMap<&str, usize> = HashMap::new();
    let mut boards: Vec<(super::Point, Vec<usize>)> = Vec::new();
    for s in slots.slots() {
        let b = *board_index.entry(s.billboard_id.as_str()).or_insert_with(|| {
            boards.push((s.location, Vec::new()));
            boards.len() - 1
        });
        boards[b].1.push(s.slot_id);
    }
    let max_panel = slots.slots().iter().map(|s| s.panel_size).fold(0.0, f64::max);

    let ref_lat = boards.iter().map(|(p, _)| p.y).sum::<f64>() / boards.len() as f64;
    let cell = lambda_radius;
    let reach: i64 = match coords {
        super::CoordSystem::Planar => 1,
        super::CoordSystem::Geographic => 2,
    };
    let key = |p: super::Point| {
        let (x, y) = coords.project(p, ref_lat);
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (b, (loc, _)) in boards.iter().enumerate() {
        grid.entry(key(*loc)).or_default().push(b);
    }

    let mut entries = Vec::new();
    for r in trajectories {
        let u = user_index[r.user_id.as_str()];
        let (cx, cy) = key(r.location);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &b in bucket {
                    let (loc, ref board_slots) = boards[b];
                    if coords.distance(loc, r.location) > lambda_radius {
                        continue;
                    }
                    for &s in board_slots {
                        let slot = &slots.slots()[s];
                        if slot.overlaps(r.t_start, r.t_end) {
                            entries.push((s, u, slot.panel_size / max_panel));
                        }
                    }
                }
            }
        }
    }
    entries.sort_by_key(|&(s, u, _)| (s, u));
    entries.dedup_by_key(|e| (e.0, e.1));

    InfluenceMatrix::from_entries(slots.len(), users, products, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Billboard, CoordSystem, Point, SlotWindow};

    fn catalog(boards: &[(f64, f64, f64)], coords: CoordSystem) -> SlotCatalog {
        let boards: Vec<Billboard> = boards
            .iter()
            .enumerate()
            .map(|(i, &(x, y, size))| Billboard {
                billboard_id: format!("b{i}"),
                location: Point::new(x, y),
                panel_size: size,
            })
            .collect();
        SlotCatalog::from_billboards(&boards, SlotWindow { t1: 0.0, t2: 100.0, delta: 100.0 }, coords).unwrap()
    }

    fn rec(user: &str, x: f64, y: f64, t0: f64, t1: f64, interests: &[&str]) -> TrajectoryRecord {
        TrajectoryRecord::new(user, Point::new(x, y), t0, t1, interests.iter().copied()).unwrap()
    }

    #[test]
    fn colocated_user_gets_full_probability() {
        let cat = catalog(&[(0.0, 0.0, 2.0)], CoordSystem::Planar);
        let m = build_influence_matrix(&[rec("u", 0.0, 0.0, 10.0, 20.0, &["p"])], &cat, 100.0).unwrap();
        assert_eq!(m.probability(0, 0), 1.0);
        assert_eq!(m.product_users(0), &[0]);
    }

    #[test]
    fn distant_user_has_no_entries() {
        let cat = catalog(&[(0.0, 0.0, 1.0)], CoordSystem::Planar);
        let m = build_influence_matrix(&[rec("u", 500.0, 0.0, 0.0, 50.0, &["p"])], &cat, 100.0).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.n_users(), 1);
        assert_eq!(m.exposed_users(), 0);
    }

    #[test]
    fn probability_is_panel_ratio_and_time_gated() {
        let cat = catalog(&[(0.0, 0.0, 4.0), (1000.0, 0.0, 1.0)], CoordSystem::Planar);
        let recs = [
            rec("a", 1000.0, 50.0, 0.0, 10.0, &["p", "q"]),
            rec("b", 0.0, 0.0, 200.0, 300.0, &["q"]),
        ];
        let m = build_influence_matrix(&recs, &cat, 100.0).unwrap();
        assert_eq!(m.probability(1, 0), 0.25);
        assert_eq!(m.probability(0, 1), 0.0);
        assert_eq!(m.products(), &["p".to_string(), "q".to_string()]);
        assert_eq!(m.product_users(1), &[0, 1]);
    }

    #[test]
    fn geographic_radius_uses_meters() {
        let cat = catalog(&[(-73.99, 40.75, 1.0)], CoordSystem::Geographic);
        // ~0.0008 deg latitude is ~89 m.
        let near = rec("n", -73.99, 40.7508, 0.0, 1.0, &["p"]);
        let far = rec("f", -73.99, 40.7512, 0.0, 1.0, &["p"]);
        let m = build_influence_matrix(&[near, far], &cat, 100.0).unwrap();
        assert_eq!(m.probability(0, 0), 1.0);
        assert_eq!(m.probability(0, 1), 0.0);
    }

    #[test]
    fn empty_catalog_rejected() {
        let cat = SlotCatalog::new(vec![], CoordSystem::Planar).unwrap();
        assert!(matches!(build_influence_matrix(&[], &cat, 100.0), Err(Error::EmptyCatalog)));
    }

    #[test]
    fn from_entries_validates() {
        let users = vec!["a".to_string()];
        assert!(matches!(
            InfluenceMatrix::from_entries(1, users.clone(), vec![], [(0, 0, 1.5)]),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(matches!(
            InfluenceMatrix::from_entries(1, users.clone(), vec![], [(0, 0, 0.5), (0, 0, 0.4)]),
            Err(Error::DuplicateEntry { .. })
        ));
        assert!(matches!(
            InfluenceMatrix::from_entries(1, users.clone(), vec![], [(3, 0, 0.5)]),
            Err(Error::UnknownSlot(3))
        ));
        let m = InfluenceMatrix::from_entries(1, users, vec![], [(0, 0, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 0);
    }
}
