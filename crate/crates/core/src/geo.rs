//! Distance primitives.
//!
//! Two coordinate modes are supported: geographic points (longitude in `x`,
//! latitude in `y`, both in degrees) measured by great-circle distance on a
//! sphere, and planar points in meters measured by Euclidean distance. All
//! distances are meters as `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle distances, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordMode {
    Geographic,
    Planar,
}

/// A point; `x` is longitude (degrees) or meters east, `y` is latitude
/// (degrees) or meters north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub mode: CoordMode,
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn planar(x: f64, y: f64) -> Self {
        Location {
            mode: CoordMode::Planar,
            x,
            y,
        }
    }

    /// Geographic point from latitude and longitude in degrees.
    pub fn lat_lon(lat: f64, lon: f64) -> Self {
        Location {
            mode: CoordMode::Geographic,
            x: lon,
            y: lat,
        }
    }

    pub fn lat(&self) -> f64 {
        self.y
    }

    pub fn lon(&self) -> f64 {
        self.x
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.x.is_finite()
            && self.y.is_finite()
            && match self.mode {
                CoordMode::Planar => true,
                CoordMode::Geographic => {
                    (-180.0..=180.0).contains(&self.x) && (-90.0..=90.0).contains(&self.y)
                }
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCoordinate {
                mode: self.mode,
                x: self.x,
                y: self.y,
            })
        }
    }
}

/// Distance in meters between two points of the same mode.
pub fn distance(a: &Location, b: &Location) -> Result<f64> {
    if a.mode != b.mode {
        return Err(Error::ModeMismatch(a.mode, b.mode));
    }
    Ok(match a.mode {
        CoordMode::Planar => (a.x - b.x).hypot(a.y - b.y),
        CoordMode::Geographic => haversine(a.lat(), a.lon(), b.lat(), b.lon()),
    })
}

fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Dense symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from explicit rows, checking shape, symmetry,
    /// non-negativity and the zero diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Param(format!(
                    "distance row has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        let m = DistanceMatrix { n, entries };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::Param(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = m.get(i, j);
                if !(d.is_finite() && d >= 0.0) || d != m.get(j, i) {
                    return Err(Error::Param(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Builds an `n x n` matrix from a distance function evaluated on the
    /// upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        DistanceMatrix { n, entries }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Matrix restricted to `nodes`, in the given order.
    pub fn submatrix(&self, nodes: &[usize]) -> DistanceMatrix {
        DistanceMatrix::from_fn(nodes.len(), |a, b| self.get(nodes[a], nodes[b]))
    }

    /// True when every triple satisfies the triangle inequality up to a
    /// relative tolerance.
    pub fn satisfies_triangle_inequality(&self, rel_tol: f64) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let direct = self.get(i, k);
                    let via = self.get(i, j) + self.get(j, k);
                    if direct > via + rel_tol * direct.max(via) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Pairwise distances between `points`, all of which must share one mode.
pub fn build_distance_matrix(points: &[Location]) -> Result<DistanceMatrix> {
    if points.is_empty() {
        return Err(Error::Param("distance matrix needs at least one point".into()));
    }
    let mode = points[0].mode;
    if let Some(p) = points.iter().find(|p| p.mode != mode) {
        return Err(Error::ModeMismatch(mode, p.mode));
    }
    // Mode is uniform, so `distance` cannot fail below.
    Ok(DistanceMatrix::from_fn(points.len(), |i, j| {
        distance(&points[i], &points[j]).expect("uniform mode")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        let a = Location::lat_lon(5.3, -4.0);
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
        let p = Location::planar(12.0, -3.0);
        assert_eq!(distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn one_degree_of_arc() {
        // pi * R / 180
        let expected = std::f64::consts::PI * EARTH_RADIUS_M / 180.0;
        let d = distance(&Location::lat_lon(0.0, 0.0), &Location::lat_lon(1.0, 0.0)).unwrap();
        assert!((d - expected).abs() < 1e-6);
        assert!((d - 111_194.93).abs() < 0.01);
        let d = distance(&Location::lat_lon(0.0, 0.0), &Location::lat_lon(0.0, 1.0)).unwrap();
        assert!((d - 111_194.93).abs() < 0.01);
    }

    #[test]
    fn pythagorean_triple() {
        let d = distance(&Location::planar(0.0, 0.0), &Location::planar(3.0, 4.0)).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn mixed_modes_rejected() {
        let err = distance(&Location::planar(0.0, 0.0), &Location::lat_lon(0.0, 0.0));
        assert!(matches!(err, Err(Error::ModeMismatch(..))));
        let err = build_distance_matrix(&[Location::planar(0.0, 0.0), Location::lat_lon(0.0, 0.0)]);
        assert!(matches!(err, Err(Error::ModeMismatch(..))));
    }

    #[test]
    fn coordinate_validation() {
        assert!(Location::lat_lon(91.0, 0.0).validate().is_err());
        assert!(Location::lat_lon(0.0, -180.5).validate().is_err());
        assert!(Location::planar(f64::NAN, 0.0).validate().is_err());
        assert!(Location::planar(1e9, -1e9).validate().is_ok());
    }

    #[test]
    fn small_matrices() {
        let m = build_distance_matrix(&[Location::planar(1.0, 1.0)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 0.0);

        let m = build_distance_matrix(&[Location::planar(0.0, 0.0), Location::planar(0.0, 70.0)])
            .unwrap();
        assert_eq!(m.get(0, 1), 70.0);
        assert_eq!(m.get(1, 0), 70.0);
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let pts = [
            Location::lat_lon(5.31, -4.02),
            Location::lat_lon(5.35, -4.01),
            Location::lat_lon(5.33, -3.99),
            Location::lat_lon(-33.9, 151.2),
            Location::lat_lon(51.5, -0.12),
        ];
        let m = build_distance_matrix(&pts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.get(i, j), distance(&pts[i], &pts[j]).unwrap());
            }
        }
        assert!(m.satisfies_triangle_inequality(1e-9));
    }

    #[test]
    fn from_rows_rejects_asymmetry() {
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0]]).is_err());
    }

    fn geo_point() -> impl Strategy<Value = Location> {
        (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(lat, lon)| Location::lat_lon(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric(a in geo_point(), b in geo_point()) {
            prop_assert_eq!(distance(&a, &b).unwrap(), distance(&b, &a).unwrap());
            prop_assert!(distance(&a, &b).unwrap() >= 0.0);
        }

        #[test]
        fn triangle(a in geo_point(), b in geo_point(), c in geo_point()) {
            let ac = distance(&a, &c).unwrap();
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-6);
        }

        #[test]
        fn longitude_translation(a in geo_point(), b in geo_point(), shift in -360.0f64..360.0) {
            let wrap = |lon: f64| (lon + shift + 180.0).rem_euclid(360.0) - 180.0;
            let a2 = Location::lat_lon(a.lat(), wrap(a.lon()));
            let b2 = Location::lat_lon(b.lat(), wrap(b.lon()));
            let d1 = distance(&a, &b).unwrap();
            let d2 = distance(&a2, &b2).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-6, "{} vs {}", d1, d2);
        }

        #[test]
        fn planar_triangle(
            pts in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 3..8)
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| Location::planar(x, y)).collect();
            let m = build_distance_matrix(&pts).unwrap();
            prop_assert!(m.satisfies_triangle_inequality(1e-9));
        }
    }
}
