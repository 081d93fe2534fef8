//! Domain types: trajectories, billboard slots, the influence matrix, problem
//! instances and allocations.

mod coverage;
mod instance;
mod matrix;

pub use coverage::{influence, marginal_gain, product_influence, Coverage};
pub use instance::{Allocation, Audit, ProblemInstance, Product, Selection, Variant, FEASIBILITY_TOL, INSTANCE_FORMAT, INSTANCE_VERSION};
pub use matrix::{build_influence_matrix, InfluenceMatrix, Scope};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// How point coordinates are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoordSystem {
    /// `x` = longitude, `y` = latitude, in degrees.
    #[default]
    Geographic,
    /// `x`, `y` in meters.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl CoordSystem {
    /// Distance in meters (haversine for geographic coordinates).
    pub fn distance(self, a: Point, b: Point) -> f64 {
        match self {
            CoordSystem::Planar => (a.x - b.x).hypot(a.y - b.y),
            CoordSystem::Geographic => {
                let (lat1, lat2) = (a.y.to_radians(), b.y.to_radians());
                let dlat = lat2 - lat1;
                let dlon = (b.x - a.x).to_radians();
                let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
                2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
            }
        }
    }

    /// Local metric projection used for spatial bucketing. Geographic points
    /// are mapped equirectangularly around `ref_lat` degrees.
    pub(crate) fn project(self, p: Point, ref_lat: f64) -> (f64, f64) {
        match self {
            CoordSystem::Planar => (p.x, p.y),
            CoordSystem::Geographic => (
                EARTH_RADIUS_M * p.x.to_radians() * ref_lat.to_radians().cos(),
                EARTH_RADIUS_M * p.y.to_radians(),
            ),
        }
    }
}

/// One presence interval of a user at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub user_id: String,
    pub location: Point,
    pub t_start: f64,
    pub t_end: f64,
    /// Products the user is relevant to; may be empty.
    pub interests: BTreeSet<String>,
}

impl TrajectoryRecord {
    pub fn new(
        user_id: impl Into<String>,
        location: Point,
        t_start: f64,
        t_end: f64,
        interests: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let record = TrajectoryRecord {
            user_id: user_id.into(),
            location,
            t_start,
            t_end,
            interests: interests.into_iter().map(Into::into).collect(),
        };
        record.check()?;
        Ok(record)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.t_start <= self.t_end) {
            return Err(Error::invalid(format!(
                "trajectory record of user {} has t_start {} > t_end {}",
                self.user_id, self.t_start, self.t_end
            )));
        }
        Ok(())
    }
}

/// A physical billboard before it is cut into slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Billboard {
    pub billboard_id: String,
    pub location: Point,
    pub panel_size: f64,
}

/// A fixed-duration rental window on one billboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillboardSlot {
    pub slot_id: usize,
    pub billboard_id: String,
    pub location: Point,
    pub t_start: f64,
    pub t_end: f64,
    pub cost: f64,
    pub panel_size: f64,
}

impl BillboardSlot {
    /// Slot windows are half-open `[t_start, t_end)`; a presence interval
    /// `[a, b]` overlaps when `a < t_end` and `b >= t_start`.
    pub fn overlaps(&self, a: f64, b: f64) -> bool {
        a < self.t_end && b >= self.t_start
    }
}

/// The time range `[t1, t2)` cut into windows of length `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotWindow {
    pub t1: f64,
    pub t2: f64,
    pub delta: f64,
}

impl SlotWindow {
    /// Number of windows per billboard, `(t2 - t1) / delta`.
    pub fn windows(&self) -> Result<usize> {
        if !(self.delta > 0.0) || !(self.t2 > self.t1) {
            return Err(Error::invalid(format!(
                "slot window needs t1 < t2 and delta > 0 (got t1={}, t2={}, delta={})",
                self.t1, self.t2, self.delta
            )));
        }
        let ratio = (self.t2 - self.t1) / self.delta;
        let count = ratio.round();
        if (ratio - count).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "slot window length {} is not a multiple of delta {}",
                self.t2 - self.t1,
                self.delta
            )));
        }
        Ok(count as usize)
    }
}

/// All slots of a dataset, indexed densely by `slot_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCatalog {
    pub coords: CoordSystem,
    slots: Vec<BillboardSlot>,
}

impl SlotCatalog {
    pub fn new(slots: Vec<BillboardSlot>, coords: CoordSystem) -> Result<Self> {
        for (i, s) in slots.iter().enumerate() {
            if s.slot_id != i {
                return Err(Error::invalid(format!("slot at position {i} has id {}", s.slot_id)));
            }
            if !(s.cost >= 0.0) || !s.cost.is_finite() {
                return Err(Error::invalid(format!("slot {i} has invalid cost {}", s.cost)));
            }
            if !(s.panel_size > 0.0) || !s.panel_size.is_finite() {
                return Err(Error::invalid(format!("slot {i} has invalid panel size {}", s.panel_size)));
            }
            if !(s.t_start <= s.t_end) {
                return Err(Error::invalid(format!("slot {i} has an inverted interval")));
            }
        }
        Ok(SlotCatalog { coords, slots })
    }

    /// Cuts every billboard into `window.windows()` consecutive slots.
    /// Slot ids are billboard-major; costs start at zero.
    pub fn from_billboards(billboards: &[Billboard], window: SlotWindow, coords: CoordSystem) -> Result<Self> {
        let per = window.windows()?;
        let mut slots = Vec::with_capacity(billboards.len() * per);
        for b in billboards {
            for k in 0..per {
                let t_start = window.t1 + k as f64 * window.delta;
                slots.push(BillboardSlot {
                    slot_id: slots.len(),
                    billboard_id: b.billboard_id.clone(),
                    location: b.location,
                    t_start,
                    t_end: t_start + window.delta,
                    cost: 0.0,
                    panel_size: b.panel_size,
                });
            }
        }
        SlotCatalog::new(slots, coords)
    }

    pub fn slots(&self) -> &[BillboardSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn set_costs(&mut self, costs: &[f64]) -> Result<()> {
        if costs.len() != self.slots.len() {
            return Err(Error::invalid(format!(
                "{} costs for {} slots",
                costs.len(),
                self.slots.len()
            )));
        }
        for (s, &c) in self.slots.iter_mut().zip(costs) {
            s.cost = c;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_count_is_billboards_times_windows() {
        let boards = vec![Billboard {
            billboard_id: "b".into(),
            location: Point::new(0.0, 0.0),
            panel_size: 1.0,
        }];
        let w = SlotWindow { t1: 0.0, t2: 30.0, delta: 10.0 };
        let cat = SlotCatalog::from_billboards(&boards, w, CoordSystem::Planar).unwrap();
        assert_eq!(cat.len(), 3);
        assert_eq!(cat.slots()[2].t_start, 20.0);
        assert_eq!(cat.slots()[2].t_end, 30.0);

        let uneven = SlotWindow { t1: 0.0, t2: 25.0, delta: 10.0 };
        assert!(SlotCatalog::from_billboards(&boards, uneven, CoordSystem::Planar).is_err());
    }

    #[test]
    fn haversine_matches_known_distance() {
        // One degree of latitude is ~111.2 km.
        let d = CoordSystem::Geographic.distance(Point::new(-74.0, 40.0), Point::new(-74.0, 41.0));
        assert!((d - 111_195.0).abs() < 10.0, "{d}");
        let p = CoordSystem::Planar.distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0));
        assert_eq!(p, 5.0);
    }

    #[test]
    fn record_rejects_inverted_interval() {
        assert!(TrajectoryRecord::new("u", Point::new(0.0, 0.0), 5.0, 4.0, ["p"]).is_err());
        let r = TrajectoryRecord::new("u", Point::new(0.0, 0.0), 4.0, 4.0, Vec::<String>::new()).unwrap();
        assert!(r.interests.is_empty());
    }

    #[test]
    fn overlap_is_half_open_on_slot_end() {
        let s = BillboardSlot {
            slot_id: 0,
            billboard_id: "b".into(),
            location: Point::new(0.0, 0.0),
            t_start: 10.0,
            t_end: 20.0,
            cost: 1.0,
            panel_size: 1.0,
        };
        assert!(s.overlaps(0.0, 10.0));
        assert!(s.overlaps(19.9, 30.0));
        assert!(!s.overlaps(20.0, 30.0));
        assert!(!s.overlaps(0.0, 9.9));
    }
}
