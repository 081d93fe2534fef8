//! Dataset loading: trajectory and billboard CSV files, explicit-probability
//! fixtures, and the synthetic instance generator.

mod gen;

pub use gen::{derive_costs, derive_demands_budgets, gen_synthetic, ExperimentParams};

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    build_influence_matrix, Billboard, CoordSystem, InfluenceMatrix, Point, SlotCatalog, SlotWindow, TrajectoryRecord,
};

struct Table {
    path: String,
    columns: Vec<usize>,
    names: &'static [&'static str],
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, names: &'static [&'static str]) -> Result<Table> {
        let shown = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_path(path)?;
        let header = reader.headers()?.clone();
        let mut columns = Vec::with_capacity(names.len());
        for &name in names {
            match header.iter().position(|h| h == name) {
                Some(i) => columns.push(i),
                None => {
                    return Err(Error::Malformed {
                        path: shown,
                        line: 1,
                        column: name.to_string(),
                        message: "missing column in header".into(),
                    })
                }
            }
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.iter().all(str::is_empty) {
                continue;
            }
            rows.push((line, rec));
        }
        if rows.is_empty() {
            return Err(Error::invalid(format!("{shown} has no data rows")));
        }
        Ok(Table { path: shown, columns, names, rows })
    }

    fn malformed(&self, line: u64, col: usize, message: impl Into<String>) -> Error {
        Error::Malformed { path: self.path.clone(), line, column: self.names[col].to_string(), message: message.into() }
    }

    fn text<'r>(&self, row: &'r (u64, csv::StringRecord), col: usize) -> Result<&'r str> {
        match row.1.get(self.columns[col]) {
            Some(v) if !v.is_empty() || self.names[col] == "interests" => Ok(v),
            Some(_) => Err(self.malformed(row.0, col, "empty value")),
            None => Err(self.malformed(row.0, col, "missing value")),
        }
    }

    fn number(&self, row: &(u64, csv::StringRecord), col: usize) -> Result<f64> {
        let raw = self.text(row, col)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.malformed(row.0, col, format!("expected a number, got `{raw}`"))),
        }
    }
}

const TRAJECTORY_COLUMNS: &[&str] = &["user_id", "lon", "lat", "t_start", "t_end", "interests"];
const BILLBOARD_COLUMNS: &[&str] = &["billboard_id", "lon", "lat", "panel_size"];

/// Reads `user_id,lon,lat,t_start,t_end,interests`; interests are
/// semicolon-separated product ids and may be empty.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let t = Table::read(path.as_ref(), TRAJECTORY_COLUMNS)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let (x, y) = (t.number(row, 1)?, t.number(row, 2)?);
        let (a, b) = (t.number(row, 3)?, t.number(row, 4)?);
        if a > b {
            return Err(t.malformed(row.0, 4, format!("t_end {b} is before t_start {a}")));
        }
        let interests = t.text(row, 5)?.split(';').map(str::trim).filter(|s| !s.is_empty());
        out.push(TrajectoryRecord::new(t.text(row, 0)?, Point::new(x, y), a, b, interests)?);
    }
    Ok(out)
}

/// Reads `billboard_id,lon,lat,panel_size`.
pub fn load_billboards(path: impl AsRef<Path>) -> Result<Vec<Billboard>> {
    let t = Table::read(path.as_ref(), BILLBOARD_COLUMNS)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let panel_size = t.number(row, 3)?;
        if panel_size <= 0.0 {
            return Err(t.malformed(row.0, 3, format!("panel size must be positive, got {panel_size}")));
        }
        out.push(Billboard {
            billboard_id: t.text(row, 0)?.to_string(),
            location: Point::new(t.number(row, 1)?, t.number(row, 2)?),
            panel_size,
        });
    }
    Ok(out)
}

/// Cuts every billboard into `window` slots and builds the influence matrix.
pub fn load_datasets(
    trajectory_path: impl AsRef<Path>,
    billboard_path: impl AsRef<Path>,
    window: SlotWindow,
    lambda_radius: f64,
    coords: CoordSystem,
) -> Result<(SlotCatalog, InfluenceMatrix)> {
    let records = load_trajectories(trajectory_path)?;
    let boards = load_billboards(billboard_path)?;
    let catalog = SlotCatalog::from_billboards(&boards, window, coords)?;
    let matrix = build_influence_matrix(&records, &catalog, lambda_radius)?;
    Ok((catalog, matrix))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum UserRef {
    Index(usize),
    Id(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureDoc {
    users: Vec<String>,
    products: BTreeMap<String, Vec<UserRef>>,
    entries: Vec<(usize, UserRef, f64)>,
    costs: Vec<f64>,
}

/// A matrix given by explicit probabilities, plus slot costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub matrix: InfluenceMatrix,
    pub costs: Vec<f64>,
}

/// Parses `{"users", "products": {id: [user]}, "entries": [[slot, user, p]],
/// "costs"}`. Users may be referenced by id or by position; the slot count is
/// the length of `costs`.
pub fn parse_fixture(text: &str) -> Result<Fixture> {
    let doc: FixtureDoc = serde_json::from_str(text)?;
    let lookup: BTreeMap<&str, usize> = doc.users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    if lookup.len() != doc.users.len() {
        return Err(Error::invalid("fixture lists a user twice"));
    }
    let resolve = |r: &UserRef| -> Result<usize> {
        match r {
            UserRef::Index(i) if *i < doc.users.len() => Ok(*i),
            UserRef::Index(i) => Err(Error::UnknownUser(i.to_string())),
            UserRef::Id(id) => lookup.get(id.as_str()).copied().ok_or_else(|| Error::UnknownUser(id.clone())),
        }
    };
    let products = doc
        .products
        .iter()
        .map(|(id, members)| Ok((id.clone(), members.iter().map(resolve).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<Vec<_>>>()?;
    let entries = doc.entries.iter().map(|(s, u, p)| Ok((*s, resolve(u)?, *p))).collect::<Result<Vec<_>>>()?;
    let matrix = InfluenceMatrix::from_entries(doc.costs.len(), doc.users.clone(), products, entries)?;
    Ok(Fixture { matrix, costs: doc.costs })
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture> {
    parse_fixture(&std::fs::read_to_string(path)?)
}
