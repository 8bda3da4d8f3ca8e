//! Points, datasets, distance metrics and the closed-form independence bounds.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Numeric,
    Categorical,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointKind::Numeric => "numeric",
            PointKind::Categorical => "categorical",
        })
    }
}

/// Coordinates of one object. Categorical labels are stored as per-dimension codes
/// interned by the owning [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coords {
    Numeric(Vec<f64>),
    Categorical(Vec<u32>),
}

impl Coords {
    pub fn kind(&self) -> PointKind {
        match self {
            Coords::Numeric(_) => PointKind::Numeric,
            Coords::Categorical(_) => PointKind::Categorical,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Coords::Numeric(v) => v.len(),
            Coords::Categorical(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: usize,
    pub coords: Coords,
}

impl Point {
    pub fn numeric(id: usize, coords: Vec<f64>) -> Self {
        Point { id, coords: Coords::Numeric(coords) }
    }

    pub fn categorical(id: usize, codes: Vec<u32>) -> Self {
        Point { id, coords: Coords::Categorical(codes) }
    }

    pub fn kind(&self) -> PointKind {
        self.coords.kind()
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.coords {
            Coords::Numeric(v) => Some(v),
            Coords::Categorical(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Hamming,
}

impl Metric {
    pub fn supports(self, kind: PointKind) -> bool {
        matches!(
            (self, kind),
            (Metric::Euclidean | Metric::Manhattan, PointKind::Numeric) | (Metric::Hamming, PointKind::Categorical)
        )
    }

    pub fn check(self, kind: PointKind) -> Result<()> {
        if self.supports(kind) {
            Ok(())
        } else {
            Err(Error::MetricKind { metric: self, kind })
        }
    }

    /// Checked distance between two points.
    pub fn distance(self, a: &Point, b: &Point) -> Result<f64> {
        if a.kind() != b.kind() {
            return Err(Error::KindMismatch { expected: a.kind(), found: b.kind() });
        }
        self.check(a.kind())?;
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        Ok(self.raw(&a.coords, &b.coords))
    }

    /// Distance without validation; callers guarantee matching kind and dimension.
    #[inline]
    pub(crate) fn raw(self, a: &Coords, b: &Coords) -> f64 {
        match (self, a, b) {
            (Metric::Euclidean, Coords::Numeric(x), Coords::Numeric(y)) => {
                x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
            }
            (Metric::Manhattan, Coords::Numeric(x), Coords::Numeric(y)) => {
                x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum()
            }
            (Metric::Hamming, Coords::Categorical(x), Coords::Categorical(y)) => {
                x.iter().zip(y).filter(|(p, q)| p != q).count() as f64
            }
            _ => unreachable!("metric/kind validated at dataset construction"),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Hamming => "hamming",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "hamming" => Ok(Metric::Hamming),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// A set of result objects. Object ids coincide with positions, `0..len()`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    kind: PointKind,
    dim: usize,
    columns: Vec<String>,
    points: Vec<Point>,
    /// Per-dimension label dictionaries for categorical data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<Vec<String>>,
}

fn default_columns(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

impl Dataset {
    pub fn numeric(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        Self::numeric_with_columns(rows, default_columns(dim))
    }

    pub fn numeric_with_columns(rows: Vec<Vec<f64>>, columns: Vec<String>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if columns.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: columns.len() });
        }
        let mut points = Vec::with_capacity(rows.len());
        for (id, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Malformed(format!("non-finite coordinate in row {id}")));
            }
            points.push(Point::numeric(id, row));
        }
        Ok(Dataset { kind: PointKind::Numeric, dim, columns, points, labels: Vec::new() })
    }

    pub fn categorical<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        Self::categorical_with_columns(rows, default_columns(dim))
    }

    pub fn categorical_with_columns<S: AsRef<str>>(rows: &[Vec<S>], columns: Vec<String>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if columns.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: columns.len() });
        }
        let mut dicts: Vec<HashMap<String, u32>> = vec![HashMap::new(); dim];
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); dim];
        let mut points = Vec::with_capacity(rows.len());
        for (id, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            let codes = row
                .iter()
                .enumerate()
                .map(|(j, label)| {
                    let label = label.as_ref();
                    *dicts[j].entry(label.to_owned()).or_insert_with(|| {
                        labels[j].push(label.to_owned());
                        (labels[j].len() - 1) as u32
                    })
                })
                .collect();
            points.push(Point::categorical(id, codes));
        }
        Ok(Dataset { kind: PointKind::Categorical, dim, columns, points, labels })
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, id: usize) -> Result<&Point> {
        self.points.get(id).ok_or(Error::UnknownId(id))
    }

    /// Label of a categorical coordinate.
    pub fn label(&self, dim: usize, code: u32) -> Option<&str> {
        self.labels.get(dim)?.get(code as usize).map(String::as_str)
    }

    /// Row `id` rendered as strings, for export.
    pub fn row_strings(&self, id: usize) -> Vec<String> {
        match &self.points[id].coords {
            Coords::Numeric(v) => v.iter().map(|x| x.to_string()).collect(),
            Coords::Categorical(c) => {
                c.iter().enumerate().map(|(j, &code)| self.label(j, code).unwrap_or_default().to_owned()).collect()
            }
        }
    }

    /// Per-dimension (min, max) over numeric data; `None` for categorical data.
    pub fn extent(&self) -> Option<Vec<(f64, f64)>> {
        if self.kind != PointKind::Numeric {
            return None;
        }
        let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in &self.points {
            for (e, &x) in ext.iter_mut().zip(p.as_numeric().unwrap_or_default()) {
                e.0 = e.0.min(x);
                e.1 = e.1.max(x);
            }
        }
        Some(ext)
    }

    /// Unchecked distance between two member objects.
    #[inline]
    pub fn dist(&self, metric: Metric, a: usize, b: usize) -> f64 {
        metric.raw(&self.points[a].coords, &self.points[b].coords)
    }

    /// Checks that `p` can be compared against this dataset's points.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.kind() != self.kind {
            return Err(Error::KindMismatch { expected: self.kind, found: p.kind() });
        }
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: p.dim() });
        }
        Ok(())
    }

    /// Restriction to `ids`; object `i` of the result is object `ids[i]` of `self`.
    pub fn restrict(&self, ids: &[usize]) -> Result<Dataset> {
        if ids.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut points = Vec::with_capacity(ids.len());
        for (new_id, &id) in ids.iter().enumerate() {
            let mut p = self.point(id)?.clone();
            p.id = new_id;
            points.push(p);
        }
        Ok(Dataset {
            kind: self.kind,
            dim: self.dim,
            columns: self.columns.clone(),
            points,
            labels: self.labels.clone(),
        })
    }

    /// Largest pairwise distance, by exhaustive scan.
    pub fn diameter(&self, metric: Metric) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(self.dist(metric, i, j));
            }
        }
        best
    }
}

/// Maximum number of pairwise-independent neighbors an object can have, when a
/// closed-form value is known for this metric and dimensionality.
pub fn independence_bound(metric: Metric, d: usize) -> Option<u32> {
    match (metric, d) {
        (Metric::Euclidean, 2) => Some(5),
        (Metric::Manhattan, 2) => Some(7),
        (Metric::Euclidean, 3) => Some(24),
        _ => None,
    }
}

/// Golden ratio, the base of the logarithm in the Euclidean annulus bound.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

const CEIL_SLACK: f64 = 1e-9;

/// Ceiling that ignores floating-point noise just above an integer.
fn robust_ceil(x: f64) -> u64 {
    let c = (x - CEIL_SLACK).ceil();
    if c <= 0.0 {
        0
    } else {
        c as u64
    }
}

/// Upper bound on the number of objects within `r2` of an object that are pairwise
/// at least `r1` apart (2-dimensional data).
///
/// Euclidean: `9 * ceil(log_phi(r2 / r1))`. Manhattan: `4 * sum_{i=1..g} (2i + 1)`
/// with `g = ceil((r2 - r1) / r1)`.
pub fn annulus_independence_bound(metric: Metric, d: usize, r1: f64, r2: f64) -> Result<u64> {
    if !(r1 > 0.0) || !r1.is_finite() {
        return Err(Error::InvalidRadius(r1));
    }
    if !(r2 >= r1) || !r2.is_finite() {
        return Err(Error::InvalidRadius(r2));
    }
    if d != 2 {
        return Err(Error::Unsupported(format!("annulus bound for d = {d}")));
    }
    match metric {
        Metric::Euclidean => {
            let rings = robust_ceil((r2 / r1).ln() / GOLDEN_RATIO.ln());
            Ok(9 * rings)
        }
        Metric::Manhattan => {
            let gamma = robust_ceil((r2 - r1) / r1);
            // sum_{i=1}^{g} (2i + 1) = g^2 + 2g
            Ok(4 * (gamma * gamma + 2 * gamma))
        }
        Metric::Hamming => Err(Error::Unsupported("annulus bound for hamming".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(rows: &[&[&str]]) -> Dataset {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::categorical(&rows).unwrap()
    }

    #[test]
    fn euclidean_three_four_five() {
        let a = Point::numeric(0, vec![0.0, 0.0]);
        let b = Point::numeric(1, vec![0.3, 0.4]);
        let d = Metric::Euclidean.distance(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert_eq!(Metric::Euclidean.distance(&a, &a).unwrap(), 0.0);
        assert!((Metric::Manhattan.distance(&a, &b).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn hamming_counts_differing_coordinates() {
        let ds = cat(&[&["A", "3"], &["A", "5"], &["B", "5"]]);
        let d01 = ds.dist(Metric::Hamming, 0, 1);
        assert_eq!(d01, 1.0);
        assert_eq!(ds.dist(Metric::Hamming, 0, 2), 2.0);
        assert_eq!(ds.dist(Metric::Hamming, 1, 1), 0.0);
        assert_eq!(ds.label(0, 1), Some("B"));
        let p = ds.point(0).unwrap();
        assert_eq!(Metric::Hamming.distance(p, p).unwrap(), 0.0);
    }

    #[test]
    fn distance_errors() {
        let a = Point::numeric(0, vec![0.0, 0.0]);
        let b = Point::numeric(1, vec![0.0, 0.0, 1.0]);
        let c = Point::categorical(2, vec![0, 0]);
        assert!(matches!(Metric::Euclidean.distance(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(Metric::Hamming.distance(&a, &a), Err(Error::MetricKind { .. })));
        assert!(matches!(Metric::Euclidean.distance(&c, &c), Err(Error::MetricKind { .. })));
        assert!(matches!(Metric::Euclidean.distance(&a, &c), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn independence_bounds() {
        assert_eq!(independence_bound(Metric::Euclidean, 2), Some(5));
        assert_eq!(independence_bound(Metric::Manhattan, 2), Some(7));
        assert_eq!(independence_bound(Metric::Euclidean, 3), Some(24));
        assert_eq!(independence_bound(Metric::Hamming, 7), None);
        assert_eq!(independence_bound(Metric::Euclidean, 4), None);
    }

    #[test]
    fn annulus_bound_examples() {
        let b = annulus_independence_bound(Metric::Euclidean, 2, 0.1, 0.1 * GOLDEN_RATIO).unwrap();
        assert_eq!(b, 9);
        assert_eq!(annulus_independence_bound(Metric::Manhattan, 2, 0.1, 0.2).unwrap(), 12);
        assert_eq!(annulus_independence_bound(Metric::Manhattan, 2, 0.1, 0.1).unwrap(), 0);
        assert_eq!(annulus_independence_bound(Metric::Euclidean, 2, 0.3, 0.3).unwrap(), 0);
        // g = 2: 4 * (3 + 5)
        assert_eq!(annulus_independence_bound(Metric::Manhattan, 2, 0.1, 0.3).unwrap(), 32);
    }

    #[test]
    fn annulus_bound_errors() {
        assert!(annulus_independence_bound(Metric::Euclidean, 2, 0.0, 0.1).is_err());
        assert!(annulus_independence_bound(Metric::Euclidean, 2, 0.2, 0.1).is_err());
        assert!(annulus_independence_bound(Metric::Hamming, 2, 1.0, 2.0).is_err());
        assert!(annulus_independence_bound(Metric::Euclidean, 3, 0.1, 0.2).is_err());
    }

    #[test]
    fn restrict_renumbers() {
        let ds = Dataset::numeric(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        let sub = ds.restrict(&[2, 0]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.point(0).unwrap().as_numeric(), Some(&[1.0][..]));
        assert_eq!(sub.point(1).unwrap().id, 1);
        assert!((ds.diameter(Metric::Euclidean) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Dataset::numeric(vec![vec![0.0, 1.0], vec![0.0]]).is_err());
        assert!(matches!(Dataset::numeric(vec![]), Err(Error::EmptyDataset)));
    }
}
